//! Self-paced pixel weighting.
//!
//! Each adjacency entry ("pixel") carries a weight `w` in `[0, 1]` chosen to
//! minimise `w * l + 1 / (w + 1/γ)` for its current loss `l`. Small losses get
//! full weight, losses at or above `γ²` are silenced, and the age parameter
//! `γ` grows geometrically between rounds so harder pixels are admitted later.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form minimiser of `w * l + 1 / (w + 1/γ)` over `w ∈ [0, 1]`.
///
/// Full weight for `l <= (γ / (γ + 1))²`, zero for `l >= γ²`, and
/// `1/√l - 1/γ` in between; continuous at both thresholds.
pub fn soft_weight(loss: f64, gamma: f64) -> f64 {
    let easy = gamma / (gamma + 1.0);
    if loss <= easy * easy {
        1.0
    } else if loss >= gamma * gamma {
        0.0
    } else {
        1.0 / loss.sqrt() - 1.0 / gamma
    }
}

/// Pixel weights, every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(Array2<f64>);

impl WeightMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::validation(format!("weight {bad} outside [0, 1]")));
        }
        Ok(WeightMatrix(values))
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        WeightMatrix(Array2::ones((rows, cols)))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    /// Fraction of entries with weight strictly below one.
    pub fn silenced_fraction(&self) -> f64 {
        let total = self.0.len().max(1) as f64;
        self.0.iter().filter(|&&w| w < 1.0).count() as f64 / total
    }
}

/// Soft-weight regulariser `Σ 1 / (W_bd + 1/γ)`.
pub fn regularizer_value(w: &WeightMatrix, gamma: f64) -> f64 {
    let inv = 1.0 / gamma;
    w.values().iter().map(|&x| 1.0 / (x + inv)).sum()
}

/// Elementwise [`soft_weight`] over a loss matrix.
pub fn update_weights(losses: &Array2<f64>, gamma: f64) -> Result<WeightMatrix> {
    if !(gamma > 0.0) {
        return Err(Error::validation(format!("age parameter must be positive, got {gamma}")));
    }
    if let Some(bad) = losses.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::validation(format!("pixel loss must be nonnegative, got {bad}")));
    }
    Ok(WeightMatrix(losses.mapv(|l| soft_weight(l, gamma))))
}

/// How the initial age parameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialAge {
    /// A fixed starting γ.
    Fixed(f64),
    /// `γ0 = sqrt(median initial pixel loss)`, floored at 1e-6, so roughly
    /// half of the pixels start with nonzero weight.
    MedianLoss,
}

/// Geometric age schedule `γ_t = γ0 · η^t` over `outer_iters` rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaceSchedule {
    pub gamma0: InitialAge,
    pub eta: f64,
    pub outer_iters: usize,
}

impl Default for PaceSchedule {
    fn default() -> Self {
        PaceSchedule {
            gamma0: InitialAge::MedianLoss,
            eta: 1.5,
            outer_iters: 20,
        }
    }
}

pub const MIN_GAMMA0: f64 = 1e-6;

impl PaceSchedule {
    pub fn new(gamma0: InitialAge, eta: f64, outer_iters: usize) -> Result<Self> {
        let s = PaceSchedule {
            gamma0,
            eta,
            outer_iters,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 1.0 && self.eta <= 2.05) {
            return Err(Error::validation(format!(
                "step multiplier eta must lie in (1, 2.05], got {}",
                self.eta
            )));
        }
        if self.outer_iters == 0 {
            return Err(Error::validation("at least one outer round is required"));
        }
        if let InitialAge::Fixed(g) = self.gamma0 {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::validation(format!("gamma0 must be positive, got {g}")));
            }
        }
        Ok(())
    }

    /// Starting age for the given initial pixel losses.
    pub fn resolve_gamma0(&self, initial_losses: &Array2<f64>) -> f64 {
        match self.gamma0 {
            InitialAge::Fixed(g) => g,
            InitialAge::MedianLoss => median(initial_losses.iter().copied())
                .sqrt()
                .max(MIN_GAMMA0),
        }
    }

    /// `γ_t = γ0 · η^t`.
    pub fn advance(&self, gamma0: f64, t: usize) -> f64 {
        gamma0 * self.eta.powi(t as i32)
    }
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
