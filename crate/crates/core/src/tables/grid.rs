use crate::error::{invalid, Result};

/// Floor added to `b` before taking logs, so `b = 0` is interpolable.
pub const B_FLOOR: f64 = 1e-6;

/// Grid of table coordinates: score mean `a`, score variance `b` and, for
/// voting tables, ensemble size `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGrid {
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
    /// Empty for two-parameter (parameter-mixing) tables.
    pub k_values: Vec<u32>,
}

pub const DEFAULT_K_VALUES: [u32; 32] = [
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 25, 30, 40, 50, 75, 100, 150, 200, 300,
    400, 600, 800,
];

impl TableGrid {
    /// `a` in `[-8, 8]` step 0.1; `b = 0` plus 60 geometric points in `[1e-4, 25]`.
    pub fn default_pm() -> Self {
        Self { a_values: uniform_a(8.0, 80), b_values: geometric_b(1e-4, 25.0, 60), k_values: Vec::new() }
    }

    pub fn default_voting() -> Self {
        Self { k_values: DEFAULT_K_VALUES.to_vec(), ..Self::default_pm() }
    }

    pub fn with_k_values(&self, k_values: Vec<u32>) -> Self {
        Self { k_values, ..self.clone() }
    }

    pub fn has_k(&self) -> bool {
        !self.k_values.is_empty()
    }

    pub fn len(&self) -> usize {
        self.a_values.len() * self.b_values.len() * self.k_values.len().max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.a_values.is_empty() || self.b_values.is_empty() {
            return Err(invalid("table grid needs at least one a and one b value"));
        }
        if self.a_values.iter().any(|v| !v.is_finite()) || self.b_values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("table grid values must be finite"));
        }
        if self.a_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("a_values must be strictly increasing"));
        }
        if self.b_values[0] < 0.0 || self.b_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("b_values must be nonnegative and strictly increasing"));
        }
        if self.has_k() && (self.k_values[0] < 1 || self.k_values.windows(2).any(|w| w[0] >= w[1])) {
            return Err(invalid("k_values must be strictly increasing and start at 1 or above"));
        }
        Ok(())
    }
}

/// `2 * half_steps + 1` points `i / (half_steps / limit)`, exactly symmetric about 0.
fn uniform_a(limit: f64, half_steps: i64) -> Vec<f64> {
    let per_unit = half_steps as f64 / limit;
    (-half_steps..=half_steps).map(|i| i as f64 / per_unit).collect()
}

fn geometric_b(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    std::iter::once(0.0)
        .chain((0..count).map(|j| if j + 1 == count { hi } else { lo * (ratio * j as f64).exp() }))
        .collect()
}
