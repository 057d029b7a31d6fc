//! Run configuration: an INI file with flag overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bitewise::advisor::{digest_hex, DEFAULT_MIX_BAND, DEFAULT_TAU};
use bitewise::learners::BiteMode;
use bitewise::tables::{DEFAULT_K_VALUES, DEFAULT_MC_SAMPLES, DEFAULT_QUADRATURE_ORDER};
use bitewise::{Error, LinkKind, LossKind, MixScheme, Result};
use ini::Ini;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic { n: usize, n_eval: usize, d: usize, separation: f64, prior: f64 },
    Files { train: PathBuf, eval: PathBuf },
    Scores { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TablesConfig {
    pub dir: PathBuf,
    pub build: bool,
    pub mc_samples: usize,
    pub quadrature_order: usize,
    pub k_values: Vec<u32>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub pool_size: usize,
    pub ensembles: usize,
    pub mode: BiteMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdviseConfig {
    pub tau: f64,
    pub band: f64,
    /// Ensemble size for the bite-size and mixing decisions; the largest K when absent.
    pub k: Option<usize>,
    /// Loss to reach when choosing m; the full-data classifier's loss when absent.
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub data: DataSource,
    pub k_tilde: usize,
    pub m_values: Vec<usize>,
    pub mode: BiteMode,
    pub k_values: Vec<usize>,
    pub losses: Vec<LossKind>,
    pub mixes: Vec<MixScheme>,
    pub zero_one_link: LinkKind,
    pub per_point: bool,
    pub tables: TablesConfig,
    pub baseline: BaselineConfig,
    pub advise: AdviseConfig,
}

/// Flag values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

struct Section<'a> {
    name: &'static str,
    props: Option<&'a ini::Properties>,
    base: &'a Path,
}

impl Section<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.props.and_then(|p| p.get(key)).map(str::trim)
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| self.bad(key, v, e)),
        }
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key).map(|v| v.parse().map_err(|e| self.bad(key, v, e))).transpose()
    }

    fn list<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|e| self.bad(key, s, e)))
                .collect(),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(|v| self.base.join(v))
    }

    fn bad(&self, key: &str, value: &str, e: impl std::fmt::Display) -> Error {
        Error::Config(format!("[{}] {key} = `{value}`: {e}", self.name))
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("run", &["seed", "threads", "out"]),
    ("data", &["source", "n", "n_eval", "d", "separation", "prior", "train", "eval", "scores"]),
    ("pool", &["k_tilde", "m", "mode"]),
    ("estimate", &["k", "losses", "mixes", "zero_one_link", "per_point"]),
    ("tables", &["dir", "build", "mc_samples", "quadrature_order", "k_values", "seed"]),
    ("baseline", &["pool_size", "ensembles", "mode"]),
    ("advise", &["tau", "band", "k", "target"]),
];

impl RunConfig {
    /// Loads `path` (or defaults when absent) and applies the overrides.
    /// Relative paths in the file are resolved against the file's directory.
    pub fn load(path: Option<&Path>, over: &Overrides) -> Result<Self> {
        let (ini, base) = match path {
            Some(p) => {
                let ini = Ini::load_from_file(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                (ini, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (Ini::new(), PathBuf::new()),
        };
        Self::from_ini(&ini, &base, over)
    }

    pub fn from_ini(ini: &Ini, base: &Path, over: &Overrides) -> Result<Self> {
        for (name, props) in ini.iter() {
            match name {
                None if props.is_empty() => {}
                None => return Err(Error::Config("keys must appear under a [section]".into())),
                Some(name) => {
                    let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == name) else {
                        return Err(Error::Config(format!("unknown section [{name}]")));
                    };
                    if let Some((k, _)) = props.iter().find(|(k, _)| !keys.contains(k)) {
                        return Err(Error::Config(format!("unknown key `{k}` in [{name}]")));
                    }
                }
            }
        }
        let sec = |name: &'static str| Section { name, props: ini.section(Some(name)), base };

        let run = sec("run");
        let seed = over.seed.map_or_else(|| run.get("seed", 1u64), Ok)?;
        let threads = over.threads.map_or_else(|| run.get("threads", 0usize), Ok)?;
        let out = over.out.clone().or_else(|| run.path("out")).unwrap_or_else(|| PathBuf::from("out"));

        let data = sec("data");
        let source: String = data.get("source", "synthetic".to_string())?;
        let data_source = match source.as_str() {
            "synthetic" => DataSource::Synthetic {
                n: data.get("n", 20_000)?,
                n_eval: data.get("n_eval", 10_000)?,
                d: data.get("d", 20)?,
                separation: data.get("separation", 2.56)?,
                prior: data.get("prior", 0.5)?,
            },
            "files" => DataSource::Files {
                train: data.path("train").ok_or_else(|| Error::Config("[data] train is required".into()))?,
                eval: data.path("eval").ok_or_else(|| Error::Config("[data] eval is required".into()))?,
            },
            "scores" => DataSource::Scores {
                path: data.path("scores").ok_or_else(|| Error::Config("[data] scores is required".into()))?,
            },
            other => return Err(Error::Config(format!("[data] source must be synthetic, files or scores, not `{other}`"))),
        };

        let pool = sec("pool");
        let est = sec("estimate");
        let tables = sec("tables");
        let base_sec = sec("baseline");
        let adv = sec("advise");

        let cfg = RunConfig {
            seed,
            threads,
            data: data_source,
            k_tilde: pool.get("k_tilde", 25)?,
            m_values: pool.list("m", vec![400])?,
            mode: pool.get("mode", BiteMode::IidWithReplacement)?,
            k_values: est.list("k", vec![1, 5, 10, 25, 50, 100])?,
            losses: est.list("losses", vec![LossKind::ZeroOne, LossKind::Nll, LossKind::Ls])?,
            mixes: est.list("mixes", vec![MixScheme::Voting, MixScheme::ParameterMixing])?,
            zero_one_link: est.get("zero_one_link", LinkKind::Sigmoid)?,
            per_point: est.get("per_point", false)?,
            tables: TablesConfig {
                dir: tables.path("dir").unwrap_or_else(|| out.join("tables")),
                build: tables.get("build", true)?,
                mc_samples: tables.get("mc_samples", DEFAULT_MC_SAMPLES)?,
                quadrature_order: tables.get("quadrature_order", DEFAULT_QUADRATURE_ORDER)?,
                k_values: tables.list("k_values", DEFAULT_K_VALUES.to_vec())?,
                seed: tables.get("seed", 20_240_601u64)?,
            },
            baseline: BaselineConfig {
                pool_size: base_sec.get("pool_size", 500)?,
                ensembles: base_sec.get("ensembles", 200)?,
                mode: base_sec.get("mode", BiteMode::IidWithReplacement)?,
            },
            advise: AdviseConfig {
                tau: adv.get("tau", DEFAULT_TAU)?,
                band: adv.get("band", DEFAULT_MIX_BAND)?,
                k: adv.opt("k")?,
                target: adv.opt("target")?,
            },
            out,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.k_tilde < 2 {
            return fail(format!("[pool] k_tilde must be at least 2, got {}", self.k_tilde));
        }
        if self.m_values.is_empty() || self.m_values.contains(&0) {
            return fail("[pool] m needs at least one positive bite size".into());
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return fail("[estimate] k needs at least one positive ensemble size".into());
        }
        if self.losses.is_empty() || self.mixes.is_empty() {
            return fail("[estimate] losses and mixes must be nonempty".into());
        }
        if self.baseline.ensembles == 0 || self.baseline.pool_size == 0 {
            return fail("[baseline] pool_size and ensembles must be positive".into());
        }
        if let DataSource::Files { train, eval } = &self.data {
            for p in [train, eval] {
                if !p.exists() {
                    return fail(format!("data file {} does not exist", p.display()));
                }
            }
        }
        if let DataSource::Scores { path } = &self.data {
            if !path.exists() {
                return fail(format!("score file {} does not exist", path.display()));
            }
        }
        Ok(())
    }

    /// The link used for a loss.
    pub fn link_for(&self, loss: LossKind) -> LinkKind {
        match loss {
            LossKind::ZeroOne => self.zero_one_link,
            _ => LinkKind::Sigmoid,
        }
    }

    /// Every resolved setting as sorted `key=value` lines. Output paths and the
    /// thread count are left out: they do not affect results.
    pub fn canonical(&self) -> String {
        let join = |v: &[String]| v.join(",");
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put("run.seed", self.seed.to_string());
        match &self.data {
            DataSource::Synthetic { n, n_eval, d, separation, prior } => {
                put("data.source", "synthetic".into());
                put("data.n", n.to_string());
                put("data.n_eval", n_eval.to_string());
                put("data.d", d.to_string());
                put("data.separation", format!("{separation:?}"));
                put("data.prior", format!("{prior:?}"));
            }
            DataSource::Files { train, eval } => {
                put("data.source", "files".into());
                put("data.train", file_digest(train));
                put("data.eval", file_digest(eval));
            }
            DataSource::Scores { path } => {
                put("data.source", "scores".into());
                put("data.scores", file_digest(path));
            }
        }
        put("pool.k_tilde", self.k_tilde.to_string());
        put("pool.m", join(&self.m_values.iter().map(|v| v.to_string()).collect::<Vec<_>>()));
        put("pool.mode", self.mode.to_string());
        put("estimate.k", join(&self.k_values.iter().map(|v| v.to_string()).collect::<Vec<_>>()));
        put("estimate.losses", join(&self.losses.iter().map(|v| v.to_string()).collect::<Vec<_>>()));
        put("estimate.mixes", join(&self.mixes.iter().map(|v| v.to_string()).collect::<Vec<_>>()));
        put("estimate.zero_one_link", self.zero_one_link.to_string());
        put("estimate.per_point", self.per_point.to_string());
        put("tables.mc_samples", self.tables.mc_samples.to_string());
        put("tables.quadrature_order", self.tables.quadrature_order.to_string());
        put("tables.k_values", join(&self.tables.k_values.iter().map(|v| v.to_string()).collect::<Vec<_>>()));
        put("tables.seed", self.tables.seed.to_string());
        put("baseline.pool_size", self.baseline.pool_size.to_string());
        put("baseline.ensembles", self.baseline.ensembles.to_string());
        put("baseline.mode", self.baseline.mode.to_string());
        put("advise.tau", format!("{:?}", self.advise.tau));
        put("advise.band", format!("{:?}", self.advise.band));
        put("advise.k", format!("{:?}", self.advise.k));
        put("advise.target", format!("{:?}", self.advise.target));
        s
    }

    /// Short digest of [`RunConfig::canonical`].
    pub fn digest(&self) -> String {
        digest_hex(self.canonical().as_bytes())[..16].to_string()
    }
}

/// Content digest of an input file, so a changed file changes the config digest.
fn file_digest(path: &Path) -> String {
    match std::fs::read(path) {
        Ok(bytes) => digest_hex(&bytes)[..16].to_string(),
        Err(_) => "missing".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        let ini = Ini::load_from_str(text).unwrap();
        RunConfig::from_ini(&ini, Path::new(""), &Overrides::default())
    }

    #[test]
    fn defaults_apply() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg.k_tilde, 25);
        assert_eq!(cfg.m_values, vec![400]);
        assert_eq!(cfg.zero_one_link, LinkKind::Sigmoid);
        assert_eq!(cfg.tables.k_values.len(), 32);
    }

    #[test]
    fn inline_comments_are_stripped() {
        let cfg = parse("[pool]\nm = 200, 400   ; two sizes\nmode = disjoint # note\n").unwrap();
        assert_eq!(cfg.m_values, vec![200, 400]);
        assert_eq!(cfg.mode, BiteMode::DisjointPartition);
    }

    #[test]
    fn lists_and_enums_parse() {
        let cfg = parse("[pool]\nm = 200, 400\n[estimate]\nlosses = nll\nmixes = pm\nk = 1,3\n").unwrap();
        assert_eq!(cfg.m_values, vec![200, 400]);
        assert_eq!(cfg.losses, vec![LossKind::Nll]);
        assert_eq!(cfg.mixes, vec![MixScheme::ParameterMixing]);
        assert_eq!(cfg.k_values, vec![1, 3]);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(parse("[pool]\nktilde = 3\n").is_err());
        assert!(parse("[nope]\na = 1\n").is_err());
        assert!(parse("[pool]\nk_tilde = 1\n").is_err());
        assert!(parse("[estimate]\nlosses = hinge\n").is_err());
    }

    #[test]
    fn overrides_win_and_change_the_digest() {
        let ini = Ini::load_from_str("[run]\nseed = 3\n").unwrap();
        let a = RunConfig::from_ini(&ini, Path::new(""), &Overrides::default()).unwrap();
        let over = Overrides { seed: Some(4), ..Default::default() };
        let b = RunConfig::from_ini(&ini, Path::new(""), &over).unwrap();
        assert_eq!(a.seed, 3);
        assert_eq!(b.seed, 4);
        assert_ne!(a.digest(), b.digest());
    }
}
