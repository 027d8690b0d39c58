//! Parameter bundles for the harvesting circuit and the link.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::model::sigmoid;

/// Logistic energy-harvesting circuit constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonlinearEhParams {
    /// Charging rate (1/W).
    pub a: f64,
    /// Turn-on threshold (W).
    pub b: f64,
    /// Saturation harvested power (W).
    pub p_s: f64,
    /// Block duration (s).
    pub t_block: f64,
    /// Zero-input logistic value `1/(1+e^{ab})`.
    pub omega: f64,
}

impl NonlinearEhParams {
    pub fn new(a: f64, b: f64, p_s: f64, t_block: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("p_s", p_s), ("t_block", t_block)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let omega = sigmoid(-a * b);
        if !(omega > 0.0 && omega < 1.0) {
            return Err(domain(format!("a*b = {} underflows the offset constant", a * b)));
        }
        Ok(Self {
            a,
            b,
            p_s,
            t_block,
            omega,
        })
    }

    /// `1 - Ω`, evaluated without cancellation.
    pub fn one_minus_omega(&self) -> f64 {
        sigmoid(self.a * self.b)
    }

    /// `(1 - Ω) / (P_s T a)`, the common numerator of the case-table helpers.
    pub fn kappa(&self) -> f64 {
        self.one_minus_omega() / (self.p_s * self.t_block * self.a)
    }

    /// Harvested energy in saturation, `P_s T`.
    pub fn q_sat(&self) -> f64 {
        self.p_s * self.t_block
    }
}

/// Noise level and power budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParams {
    /// Noise variance (W).
    pub sigma2: f64,
    /// Fixed transmit power without transmitter CSI (W).
    pub p_fixed: f64,
    /// Long-term average power budget (W).
    pub p_avg: f64,
    /// Short-term peak power budget (W).
    pub p_max: f64,
    /// Linear-model conversion efficiency.
    pub zeta: f64,
}

impl SystemParams {
    pub fn new(sigma2: f64, p_fixed: f64, p_avg: f64, p_max: f64, zeta: f64) -> Result<Self> {
        for (name, v) in [
            ("sigma2", sigma2),
            ("p_fixed", p_fixed),
            ("p_avg", p_avg),
            ("p_max", p_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if p_max <= p_avg {
            return Err(domain(format!("p_max ({p_max}) must exceed p_avg ({p_avg})")));
        }
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(domain(format!("zeta must lie in (0, 1], got {zeta}")));
        }
        Ok(Self {
            sigma2,
            p_fixed,
            p_avg,
            p_max,
            zeta,
        })
    }

    /// Same budgets with a different fixed transmit power.
    pub fn with_p_fixed(&self, p_fixed: f64) -> Self {
        Self { p_fixed, ..*self }
    }
}

/// A validated power-splitting ratio.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct SplitDecision {
    pub rho: f64,
}

impl SplitDecision {
    pub fn new(rho: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&rho) {
            Ok(Self { rho })
        } else {
            Err(domain(format!("rho must lie in [0, 1], got {rho}")))
        }
    }
}
