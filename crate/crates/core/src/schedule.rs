//! Logarithmic cooling `β_t = log(e^{cβ₀} + t) / c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The logarithmic cooling schedule with rate `c` and initial inverse
/// temperature `beta0`.
///
/// Evaluated as `β₀ + log1p(t·e^{−cβ₀}) / c`, which never forms `e^{cβ₀}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingSchedule {
    c: f64,
    beta0: f64,
    inv_scale: f64,
}

impl CoolingSchedule {
    pub fn new(c: f64, beta0: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("c", "must be a positive finite number"));
        }
        if !(beta0 >= 0.0 && beta0.is_finite()) {
            return Err(Error::param("beta0", "must be a finite number >= 0"));
        }
        Ok(Self {
            c,
            beta0,
            inv_scale: (-c * beta0).exp(),
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.beta_at(t))
    }

    pub fn beta_prime(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.beta_prime_at(t))
    }

    /// Unchecked `β(t)` for hot loops; `t` must be `≥ 0`.
    #[inline]
    pub fn beta_at(&self, t: f64) -> f64 {
        self.beta0 + (t * self.inv_scale).ln_1p() / self.c
    }

    /// `β′(t) = 1 / (c(e^{cβ₀} + t))`.
    #[inline]
    pub fn beta_prime_at(&self, t: f64) -> f64 {
        self.inv_scale / (self.c * (1.0 + t * self.inv_scale))
    }

    /// Time at which the schedule reaches `b`: `e^{cb} − e^{cβ₀}`.
    pub fn time_at_beta(&self, b: f64) -> Result<f64> {
        if !(b >= self.beta0) {
            return Err(Error::param("b", format!("must be >= beta0 = {}", self.beta0)));
        }
        let t = (self.c * self.beta0).exp() * (self.c * (b - self.beta0)).exp_m1();
        if !t.is_finite() {
            return Err(Error::param("b", "time overflows f64"));
        }
        Ok(t)
    }

    /// Schedule restarted at `t0`: same `c`, `β₀` replaced by `β(t0)`.
    pub fn shifted(&self, t0: f64) -> Result<Self> {
        Self::new(self.c, self.beta(t0)?)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param("t", "time must be finite and >= 0"));
    }
    Ok(())
}

/// Inverse-temperature path driving the dynamics.
///
/// `Constant` is the frozen-temperature process used by oracles (Gibbs
/// stationarity, explosion experiments).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaSchedule {
    Annealing(CoolingSchedule),
    Constant(f64),
}

impl BetaSchedule {
    #[inline]
    pub fn beta_at(&self, t: f64) -> f64 {
        match self {
            BetaSchedule::Annealing(s) => s.beta_at(t),
            BetaSchedule::Constant(b) => *b,
        }
    }

    #[inline]
    pub fn beta_prime_at(&self, t: f64) -> f64 {
        match self {
            BetaSchedule::Annealing(s) => s.beta_prime_at(t),
            BetaSchedule::Constant(_) => 0.0,
        }
    }

    pub fn beta0(&self) -> f64 {
        self.beta_at(0.0)
    }
}

impl From<CoolingSchedule> for BetaSchedule {
    fn from(s: CoolingSchedule) -> Self {
        BetaSchedule::Annealing(s)
    }
}
