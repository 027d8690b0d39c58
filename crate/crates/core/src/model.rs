//! Rate, harvested-energy and case-table helper functions.
//!
//! The public functions validate their arguments. The `*_rx` kernels used by
//! the solvers take the received power directly and skip validation.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{domain, Result};
use crate::params::{NonlinearEhParams, SystemParams};

/// Logistic function, evaluated with `exp` of a non-positive argument only.
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `σ(u)·σ(-u)`, the logistic derivative. At most 1/4.
#[inline]
pub(crate) fn logistic_slope(u: f64) -> f64 {
    let e = (-u.abs()).exp();
    let d = 1.0 + e;
    e / (d * d)
}

#[inline]
pub(crate) fn rate_rx(y: f64, sigma2: f64) -> f64 {
    (y / sigma2).ln_1p() / LN_2
}

#[inline]
pub(crate) fn psi_rx(x: f64, eh: &NonlinearEhParams) -> f64 {
    sigmoid(eh.a * (x - eh.b))
}

/// `Ψ(1-Ψ)` at received EH power `x`.
#[inline]
pub(crate) fn phi_rx(x: f64, eh: &NonlinearEhParams) -> f64 {
    logistic_slope(eh.a * (x - eh.b))
}

/// Harvested energy at received EH power `x`.
///
/// Uses `(Ψ-Ω)/(1-Ω) = Ψ·(1-e^{-ax})`, which is exactly zero at `x = 0`.
#[inline]
pub(crate) fn q_rx(x: f64, eh: &NonlinearEhParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    eh.q_sat() * psi_rx(x, eh) * -(-eh.a * x).exp_m1()
}

#[inline]
pub(crate) fn f_at(x: f64, p: f64, eh: &NonlinearEhParams) -> f64 {
    phi_rx(x * p, eh)
}

#[inline]
pub(crate) fn g_at(x: f64, p: f64, eh: &NonlinearEhParams, sigma2: f64) -> f64 {
    eh.kappa() / (x * p + sigma2)
}

#[inline]
pub(crate) fn gamma_at(x: f64, p: f64, eh: &NonlinearEhParams, sigma2: f64) -> f64 {
    eh.kappa() / ((x * p - eh.b).max(0.0) + sigma2)
}

#[inline]
pub(crate) fn z_at(x: f64, p: f64, eh: &NonlinearEhParams, sigma2: f64) -> f64 {
    let y = x * p;
    eh.kappa() / y * rate_rx(y, sigma2)
}

/// `R + λQ` for a fixed-power state.
#[inline]
pub(crate) fn lagrangian_rx(hp: f64, rho: f64, lambda: f64, eh: &NonlinearEhParams, sigma2: f64) -> f64 {
    rate_rx((1.0 - rho) * hp, sigma2) + lambda * q_rx(rho * hp, eh)
}

/// Derivative of `R + λQ` in `ρ` for a fixed-power state.
#[inline]
pub(crate) fn dl_drho_rx(hp: f64, rho: f64, lambda: f64, eh: &NonlinearEhParams, sigma2: f64) -> f64 {
    lambda * hp * phi_rx(rho * hp, eh) / eh.kappa() - hp / (((1.0 - rho) * hp + sigma2) * LN_2)
}

fn check_state(h: f64, p: f64, rho: f64) -> Result<()> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(domain(format!("channel gain must be finite and non-negative, got {h}")));
    }
    if !(p >= 0.0 && p.is_finite()) {
        return Err(domain(format!("power must be finite and non-negative, got {p}")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(domain(format!("rho must lie in [0, 1], got {rho}")));
    }
    Ok(())
}

/// Achievable rate `log2(1 + (1-ρ)hP/σ²)` in bits/s/Hz.
pub fn rate(h: f64, p: f64, rho: f64, sys: &SystemParams) -> Result<f64> {
    check_state(h, p, rho)?;
    Ok(rate_rx((1.0 - rho) * h * p, sys.sigma2))
}

/// Logistic value `Ψ = 1/(1+e^{-a(ρhP-b)})`.
pub fn psi(h: f64, p: f64, rho: f64, eh: &NonlinearEhParams) -> Result<f64> {
    check_state(h, p, rho)?;
    Ok(psi_rx(rho * h * p, eh))
}

/// Harvested energy under the logistic model, `P_s T (Ψ-Ω)/(1-Ω)`.
pub fn q_nonlinear(h: f64, p: f64, rho: f64, eh: &NonlinearEhParams) -> Result<f64> {
    check_state(h, p, rho)?;
    Ok(q_rx(rho * h * p, eh))
}

/// Harvested energy under the linear model, `ζρhPT`.
pub fn q_linear(h: f64, p: f64, rho: f64, sys: &SystemParams, eh: &NonlinearEhParams) -> Result<f64> {
    check_state(h, p, rho)?;
    Ok(sys.zeta * rho * h * p * eh.t_block)
}

/// Helper values for the fixed-power case table at channel gain `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CsirHelpers {
    pub f: f64,
    pub g: f64,
    pub gamma: f64,
    /// `None` at `x = 0`, where it is undefined.
    pub z: Option<f64>,
}

pub fn helpers_csir(x: f64, eh: &NonlinearEhParams, sys: &SystemParams) -> Result<CsirHelpers> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(domain(format!("helper argument must be finite and non-negative, got {x}")));
    }
    let p = sys.p_fixed;
    Ok(CsirHelpers {
        f: f_at(x, p, eh),
        g: g_at(x, p, eh, sys.sigma2),
        gamma: gamma_at(x, p, eh, sys.sigma2),
        z: (x > 0.0).then(|| z_at(x, p, eh, sys.sigma2)),
    })
}

/// Helper values for the adaptive-power case tables at channel gain `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CsiHelpers {
    pub f_low: f64,
    pub f_up: f64,
    pub g_low: f64,
    pub g_up: f64,
    pub z: f64,
    pub gamma: f64,
    pub z_prime: f64,
}

pub fn helpers_csi(
    x: f64,
    p_low: f64,
    p_up: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<CsiHelpers> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(domain(format!("helper argument must be finite and positive, got {x}")));
    }
    if !(0.0 <= p_low && p_low <= p_up && p_up <= sys.p_max) {
        return Err(domain(format!(
            "need 0 <= p_low <= p_up <= p_max, got [{p_low}, {p_up}] with p_max {}",
            sys.p_max
        )));
    }
    let s2 = sys.sigma2;
    Ok(CsiHelpers {
        f_low: f_at(x, p_low, eh),
        f_up: f_at(x, p_up, eh),
        g_low: g_at(x, sys.p_max - p_low, eh, s2),
        g_up: g_at(x, sys.p_max - p_up, eh, s2),
        z: eh.kappa() / x,
        gamma: gamma_at(x, sys.p_max, eh, s2),
        z_prime: z_at(x, sys.p_max, eh, s2),
    })
}

/// `∂(R + λQ)/∂ρ` with the rate in bits.
pub fn dl_drho(
    h: f64,
    p: f64,
    rho: f64,
    lambda: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<f64> {
    check_state(h, p, rho)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(domain(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    Ok(dl_drho_rx(h * p, rho, lambda, eh, sys.sigma2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eh() -> NonlinearEhParams {
        NonlinearEhParams::new(6400.0, 0.003, 2.0, 1.0).unwrap()
    }

    fn sys() -> SystemParams {
        SystemParams::new(2.0, 2.0, 2.0, 4.0, 1.0).unwrap()
    }

    #[test]
    fn rate_examples() {
        let s = sys();
        assert_eq!(rate(0.0, 2.0, 0.3, &s).unwrap(), 0.0);
        assert_eq!(rate(1.0, 2.0, 1.0, &s).unwrap(), 0.0);
        assert!((rate(1.0, 2.0, 0.0, &s).unwrap() - 1.0).abs() < 1e-15);
        assert!(rate(1.0, 2.0, 1.5, &s).is_err());
        assert!(rate(-1.0, 2.0, 0.5, &s).is_err());
    }

    #[test]
    fn psi_examples() {
        let e = eh();
        assert_eq!(psi(1.0, 0.003, 1.0, &e).unwrap(), 0.5);
        assert_eq!(psi(1.0, 2.0, 0.0, &e).unwrap(), e.omega);
        // 1/(1+e^{-19.2}) evaluated to 20 digits.
        let v = psi(1.0, 0.006, 1.0, &e).unwrap();
        assert!((v - 0.999_999_995_412_818_3).abs() < 1e-15);
        assert!(psi_rx(1e6, &e) <= 1.0 && psi_rx(-1e6, &e) >= 0.0);
    }

    #[test]
    fn q_examples() {
        let e = eh();
        assert_eq!(q_nonlinear(0.7, 2.0, 0.0, &e).unwrap(), 0.0);
        assert!((q_nonlinear(1.0, 1e3, 1.0, &e).unwrap() - 2.0).abs() < 1e-12);
        let mid = q_nonlinear(1.0, 0.003, 1.0, &e).unwrap();
        let direct = 2.0 * (0.5 - e.omega) / (1.0 - e.omega);
        assert!((mid - direct).abs() < 1e-14);
        assert!((mid - 1.0).abs() < 1e-8);
        let s = sys();
        assert_eq!(q_linear(1.0, 2.0, 0.0, &s, &e).unwrap(), 0.0);
        assert_eq!(q_linear(1.0, 2.0, 1.0, &s, &e).unwrap(), 2.0);
        let s2 = SystemParams::new(2.0, 2.0, 2.0, 4.0, 0.5).unwrap();
        assert!((q_linear(0.1, 2.0, 0.5, &s2, &e).unwrap() - 0.05).abs() < 1e-16);
    }

    #[test]
    fn helper_examples() {
        let e = eh();
        let s = sys();
        let peak = helpers_csir(0.003 / 2.0, &e, &s).unwrap();
        assert_eq!(peak.f, 0.25);
        let at0 = helpers_csir(0.0, &e, &s).unwrap();
        assert!(at0.z.is_none());
        // e^{-19.2}/(1+e^{-19.2})^2 to 12 significant digits.
        assert!((at0.f - 4.587_181_704_6e-9).abs() < 1e-18);
        let x = 0.01;
        let shifted = helpers_csir(x - e.b / s.p_fixed, &e, &s).unwrap();
        assert!((helpers_csir(x, &e, &s).unwrap().gamma - shifted.g).abs() < 1e-15);
        assert!(helpers_csir(-1.0, &e, &s).is_err());

        let c = helpers_csi(0.003 / 1.5, 1.5, 3.0, &e, &s).unwrap();
        assert_eq!(c.f_low, 0.25);
        let c2 = helpers_csi(0.5, 0.0, 4.0, &e, &s).unwrap();
        assert!((c.z * (0.003 / 1.5) - c2.z * 0.5).abs() < 1e-15);
        let c3 = helpers_csi(0.0005, 0.0, 4.0, &e, &s).unwrap();
        assert_eq!(c3.gamma, e.kappa() / s.sigma2);
        assert!(helpers_csi(0.0, 0.0, 1.0, &e, &s).is_err());
        assert!(helpers_csi(1.0, 2.0, 1.0, &e, &s).is_err());
    }

    #[test]
    fn derivative_signs() {
        let e = eh();
        let s = SystemParams::new(1e-4, 2.0, 2.0, 4.0, 1.0).unwrap();
        assert!(dl_drho(1e-3, 2.0, 0.4, 0.0, &e, &s).unwrap() < 0.0);
        assert!(dl_drho(1e-3, 2.0, 0.4, -1.0, &e, &s).is_err());
    }
}
