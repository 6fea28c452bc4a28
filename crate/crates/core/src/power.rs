//! Power cost model.
//!
//! A physical machine running total load `x > 0` draws power `mu * x^alpha + b`;
//! an idle machine draws nothing. The fixed cost `b` rewards consolidation while
//! the superlinear term punishes overloading, so the power drawn per unit of
//! load is minimized at a finite load `x*`. Everything else in this crate is
//! about trading those two forces off under capacity and machine-count bounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("alpha must be a finite number exceeding 1 (got {0})")]
    BadAlpha(f64),
    #[error("b must be a finite positive number (got {0})")]
    BadB(f64),
    #[error("mu must be a finite positive number (got {0})")]
    BadMu(f64),
}

/// The cost-model constants. `mu` scales the load term and defaults to 1;
/// all formulas below keep it as a free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    pub mu: f64,
    pub alpha: f64,
    pub b: f64,
}

impl PowerParams {
    /// Model with `mu = 1`.
    pub fn new(alpha: f64, b: f64) -> Result<Self, ParamError> {
        Self::with_mu(1.0, alpha, b)
    }

    pub fn with_mu(mu: f64, alpha: f64, b: f64) -> Result<Self, ParamError> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(ParamError::BadAlpha(alpha));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(ParamError::BadB(b));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(ParamError::BadMu(mu));
        }
        Ok(PowerParams { mu, alpha, b })
    }

    /// Power drawn by one machine at load `x >= 0`: zero when idle,
    /// `mu * x^alpha + b` otherwise.
    pub fn machine_power(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0, "negative load {x}");
        if x == 0.0 {
            0.0
        } else {
            self.mu * x.powf(self.alpha) + self.b
        }
    }

    /// The load `x* = (b / (mu (alpha - 1)))^(1/alpha)` at which power per
    /// unit of load is minimal.
    pub fn optimal_load(&self) -> f64 {
        (self.b / (self.mu * (self.alpha - 1.0))).powf(1.0 / self.alpha)
    }

    /// Minimal power per unit of load, `machine_power(x*) / x*`. Any machine
    /// loaded away from `x*` pays strictly more per unit.
    pub fn optimal_power_rate(&self) -> f64 {
        let xs = self.optimal_load();
        self.machine_power(xs) / xs
    }
}

/// Total power of a partition given as explicit per-machine load sets.
/// Empty groups contribute nothing.
pub fn partition_power(groups: &[Vec<f64>], p: &PowerParams) -> f64 {
    groups
        .iter()
        .map(|g| p.machine_power(g.iter().sum()))
        .sum()
}

/// Power change from merging two loaded machines into one:
/// `f(a + b) - (f(a) + f(b))`. Strictly negative whenever `a + b <= x*`,
/// so such merges always pay off (and never do above `2 x*`).
pub fn merge_delta(a: f64, b_load: f64, p: &PowerParams) -> f64 {
    debug_assert!(a > 0.0 && b_load > 0.0);
    p.machine_power(a + b_load) - (p.machine_power(a) + p.machine_power(b_load))
}

/// Lower bound on the power of any partition that uses exactly `k` machines:
/// the best such partition balances the load evenly, giving
/// `k b + k mu (L/k)^alpha`.
pub fn balanced_lower_bound(k: usize, total_load: f64, p: &PowerParams) -> f64 {
    debug_assert!(k >= 1);
    let k = k as f64;
    k * p.b + k * p.mu * (total_load / k).powf(p.alpha)
}

/// Lower bound on the power of any partition of total load `L`: no machine
/// beats the optimal rate, so the whole system pays at least `rate * L`.
/// Strict unless every machine sits exactly at `x*`.
pub fn rate_lower_bound(total_load: f64, p: &PowerParams) -> f64 {
    p.optimal_power_rate() * total_load
}
