use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::loss::{LinkKind, LossKind, NLL_CLAMP};

/// The statistic a table holds, as a function of the mixed positive-class
/// probability `p⁺` for a `y = 1` example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatKind {
    /// `E L(1, p⁺)`.
    LossMean { loss: LossKind, link: LinkKind },
    /// `E L(1, p⁺)²`.
    LossSquareMean { loss: LossKind, link: LinkKind },
    /// `E log p⁺`, clamped like the log-likelihood.
    LogP,
    /// `E p⁺`.
    PMean,
    /// `E (p⁺)²`.
    PSquareMean,
}

impl StatKind {
    pub fn loss_mean(loss: LossKind, link: LinkKind) -> Self {
        StatKind::LossMean { loss, link }
    }

    pub fn loss_square_mean(loss: LossKind, link: LinkKind) -> Self {
        StatKind::LossSquareMean { loss, link }
    }

    pub fn link(&self) -> LinkKind {
        match *self {
            StatKind::LossMean { link, .. } | StatKind::LossSquareMean { link, .. } => link,
            _ => LinkKind::Sigmoid,
        }
    }

    pub fn loss(&self) -> Option<LossKind> {
        match *self {
            StatKind::LossMean { loss, .. } | StatKind::LossSquareMean { loss, .. } => Some(loss),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StatKind::LossMean { loss, link: LinkKind::Step } | StatKind::LossSquareMean { loss, link: LinkKind::Step }
                if loss != LossKind::ZeroOne =>
            {
                Err(invalid(format!("the step link is only defined for 0/1 loss, not {loss}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether the integrand is a function of `ln p`.
    pub fn uses_log(&self) -> bool {
        matches!(
            self,
            StatKind::LogP | StatKind::LossMean { loss: LossKind::Nll, .. } | StatKind::LossSquareMean { loss: LossKind::Nll, .. }
        )
    }

    #[inline]
    pub fn integrand(&self, p: f64) -> f64 {
        match *self {
            StatKind::LossMean { loss, .. } => loss.pointwise(true, p),
            StatKind::LossSquareMean { loss, .. } => {
                let l = loss.pointwise(true, p);
                l * l
            }
            StatKind::LogP => p.clamp(NLL_CLAMP, 1.0 - NLL_CLAMP).ln(),
            StatKind::PMean => p,
            StatKind::PSquareMean => p * p,
        }
    }

    /// For statistics whose composition with the link is constant on each side
    /// of `c = 0`, the values `(c <= 0, c > 0)`.
    pub fn sign_split(&self) -> Option<(f64, f64)> {
        match self.link() {
            LinkKind::Step => Some((self.integrand(0.0), self.integrand(1.0))),
            LinkKind::Sigmoid if self.loss() == Some(LossKind::ZeroOne) => {
                Some((self.integrand(0.5), self.integrand(1.0)))
            }
            LinkKind::Sigmoid => None,
        }
    }

    pub(crate) fn tag(&self) -> u32 {
        match self {
            StatKind::LossMean { .. } => 0,
            StatKind::LossSquareMean { .. } => 1,
            StatKind::LogP => 2,
            StatKind::PMean => 3,
            StatKind::PSquareMean => 4,
        }
    }

    pub(crate) fn from_tags(stat: u32, loss: u32, link: u32) -> Result<Self> {
        let link = match link {
            0 => LinkKind::Sigmoid,
            1 => LinkKind::Step,
            t => return Err(Error::Load(format!("unknown link tag {t}"))),
        };
        let loss = match loss {
            0 => Some(LossKind::ZeroOne),
            1 => Some(LossKind::Nll),
            2 => Some(LossKind::Ls),
            NO_LOSS_TAG => None,
            t => return Err(Error::Load(format!("unknown loss tag {t}"))),
        };
        let need_loss = || loss.ok_or_else(|| Error::Load("loss statistic without a loss tag".into()));
        let stat = match stat {
            0 => StatKind::LossMean { loss: need_loss()?, link },
            1 => StatKind::LossSquareMean { loss: need_loss()?, link },
            2 => StatKind::LogP,
            3 => StatKind::PMean,
            4 => StatKind::PSquareMean,
            t => return Err(Error::Load(format!("unknown statistic tag {t}"))),
        };
        stat.validate().map_err(|e| Error::Load(e.to_string()))?;
        Ok(stat)
    }

    pub(crate) fn loss_tag(&self) -> u32 {
        match self.loss() {
            Some(LossKind::ZeroOne) => 0,
            Some(LossKind::Nll) => 1,
            Some(LossKind::Ls) => 2,
            None => NO_LOSS_TAG,
        }
    }

    pub(crate) fn link_tag(&self) -> u32 {
        match self.link() {
            LinkKind::Sigmoid => 0,
            LinkKind::Step => 1,
        }
    }
}

pub(crate) const NO_LOSS_TAG: u32 = 255;

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatKind::LossMean { loss, link } => write!(f, "loss_mean-{loss}-{link}"),
            StatKind::LossSquareMean { loss, link } => write!(f, "loss_sq_mean-{loss}-{link}"),
            StatKind::LogP => f.write_str("log_p"),
            StatKind::PMean => f.write_str("p_mean"),
            StatKind::PSquareMean => f.write_str("p_sq_mean"),
        }
    }
}

impl FromStr for StatKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('-').collect();
        let stat = match parts.as_slice() {
            ["loss_mean", loss, link] => StatKind::LossMean { loss: loss.parse()?, link: link.parse()? },
            ["loss_sq_mean", loss, link] => StatKind::LossSquareMean { loss: loss.parse()?, link: link.parse()? },
            ["log_p"] => StatKind::LogP,
            ["p_mean"] => StatKind::PMean,
            ["p_sq_mean"] => StatKind::PSquareMean,
            _ => return Err(invalid(format!("unknown statistic `{s}`"))),
        };
        stat.validate()?;
        Ok(stat)
    }
}
