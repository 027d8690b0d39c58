//! Comparison schemes, all scored under the logistic harvesting model.
//!
//! The two linear-model schemes tune their multipliers against the linear
//! harvester `Q = ζρhPT`, as their designers would, and are then evaluated
//! with the logistic model. The mismatch between the model a scheme is tuned
//! for and the harvester it actually drives is the point of the comparison.
//! Their multipliers are in nats.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::FadingEnsemble;
use crate::csi::{case_a, Nested, PowerSplitAlloc};
use crate::csir::{q_max_at, strictly_better, DUAL_FLOOR};
use crate::dual::{locate, resolve, share_weight, Mixture, Pure, SearchOpts, TimeShare};
use crate::error::{domain, Result, SwiptError};
use crate::model::{q_rx, rate_rx};
use crate::numeric::{mean, refine_root};
use crate::params::{NonlinearEhParams, SystemParams};
use crate::region::REPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BaselineKind {
    LinearDpsCsir,
    LinearDpsCsi,
    ModeSwitchCsir,
    /// Splitting restricted to `ρ ∈ {0, 1}` with full channel knowledge. An
    /// approximation of mode switching with power control, not a
    /// reproduction of any published table.
    BinaryRestrictedCsi,
}

/// Policy returned by a baseline together with its rate-energy point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineSolution {
    pub baseline_kind: BaselineKind,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub p: Vec<f64>,
    pub rho: Vec<f64>,
    pub time_share: Vec<TimeShare>,
    pub achieved_rate: f64,
    /// Average harvested energy under the logistic model.
    pub achieved_q: f64,
    /// Average harvested energy under the model the scheme was tuned for.
    pub tuned_q: f64,
    pub achieved_p_avg: f64,
    /// Mode-switching thresholds `(χ1, χ2)` of the primary policy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<(f64, f64)>,
    pub iterations: usize,
    pub point: REPoint,
}

impl BaselineSolution {
    /// Average of `f(state, p, rho)` over the time-shared policy.
    pub fn expected<F: Fn(usize, f64, f64) -> f64>(&self, f: F) -> f64 {
        let n = self.rho.len() as f64;
        let mut total = mean((0..self.rho.len()).map(|k| f(k, self.p[k], self.rho[k])));
        for ts in &self.time_share {
            let delta: f64 = ts
                .changes
                .iter()
                .map(|c| f(c.state, c.p.unwrap_or(self.p[c.state]), c.rho) - f(c.state, self.p[c.state], self.rho[c.state]))
                .sum();
            total += ts.weight * delta / n;
        }
        total
    }
}

/// Averages of a per-state `(p, ρ)` policy. `metric` is the tuned energy.
fn score(
    gains: &[f64],
    lambda: f64,
    mu: Option<f64>,
    p: Vec<f64>,
    rho: Vec<f64>,
    tuned: impl Fn(f64, f64, f64) -> f64,
    eh: &NonlinearEhParams,
    s2: f64,
) -> Pure {
    let rate = mean((0..gains.len()).map(|k| rate_rx((1.0 - rho[k]) * gains[k] * p[k], s2)));
    let q = mean((0..gains.len()).map(|k| q_rx(rho[k] * gains[k] * p[k], eh)));
    let metric = mean((0..gains.len()).map(|k| tuned(gains[k], p[k], rho[k])));
    let power = mean(p.iter().copied());
    Pure {
        lambda,
        mu,
        p: Some(p),
        rho,
        rate,
        q,
        power,
        metric,
        dual_obj: 0.0,
        obj_rate: rate,
    }
}

fn finish(
    kind: BaselineKind,
    q_target: f64,
    mix: Mixture,
    calls: usize,
    thresholds: impl Fn(f64) -> Option<(f64, f64)>,
) -> BaselineSolution {
    let achieved_rate = mix.avg(|x| x.rate);
    let achieved_q = mix.avg(|x| x.q);
    let tuned_q = mix.avg(|x| x.metric);
    let achieved_p_avg = mix.avg(|x| x.power);
    let (main, time_share) = mix.into_primary();
    BaselineSolution {
        baseline_kind: kind,
        lambda: main.lambda,
        mu: main.mu,
        p: main.p.unwrap_or_default(),
        rho: main.rho,
        time_share,
        achieved_rate,
        achieved_q,
        tuned_q,
        achieved_p_avg,
        thresholds: thresholds(main.lambda),
        iterations: calls,
        point: REPoint {
            q_target,
            rate: achieved_rate,
            energy: achieved_q,
        },
    }
}

fn check_target(q_target: f64, max: f64) -> Result<f64> {
    if !(q_target >= 0.0 && q_target.is_finite()) {
        return Err(domain(format!("energy target must be finite and non-negative, got {q_target}")));
    }
    if q_target > max * (1.0 + 1e-12) {
        return Err(SwiptError::InfeasibleTarget { target: q_target, max });
    }
    Ok(q_target.min(max))
}

/// Linear-model split: zero below the gain threshold, otherwise the split
/// that leaves the decoder `1/(ζλT) - σ²` of received power.
pub fn linear_rho(h: f64, p: f64, lambda: f64, sys: &SystemParams, eh: &NonlinearEhParams) -> f64 {
    let level = 1.0 / (sys.zeta * lambda * eh.t_block) - sys.sigma2;
    let hp = h * p;
    if hp > level {
        (1.0 - level / hp).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Largest multiplier the linear schemes use; at it every active state
/// splits fully to the harvester.
fn linear_lambda_ceil(sys: &SystemParams, eh: &NonlinearEhParams) -> f64 {
    1.0 / (sys.zeta * sys.sigma2 * eh.t_block)
}

/// Maximum linear-model energy at fixed power.
pub fn q_max_linear_csir(ensemble: &FadingEnsemble, eh: &NonlinearEhParams, sys: &SystemParams) -> f64 {
    sys.zeta * eh.t_block * sys.p_fixed * ensemble.mean_gain()
}

/// Linear-model dynamic splitting with receiver-side knowledge.
pub fn linear_dps_csir(
    ensemble: &FadingEnsemble,
    q_target: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<BaselineSolution> {
    let target = check_target(q_target, q_max_linear_csir(ensemble, eh, sys))?;
    let gains = &ensemble.gains;
    let p = sys.p_fixed;
    let n = gains.len();
    let tuned = |h: f64, p: f64, r: f64| sys.zeta * r * h * p * eh.t_block;
    let eval = |lambda: f64| -> Result<(f64, Mixture)> {
        let rho: Vec<f64> = gains.iter().map(|&h| linear_rho(h, p, lambda, sys, eh)).collect();
        let pure = score(gains, lambda, None, vec![p; n], rho, tuned, eh, sys.sigma2);
        Ok((pure.metric, Mixture::single(pure)))
    };
    if target <= 0.0 {
        let (_, m) = eval(DUAL_FLOOR)?;
        return Ok(finish(BaselineKind::LinearDpsCsir, q_target, m, 1, |_| None));
    }
    let ceil = linear_lambda_ceil(sys, eh);
    let mut opts = SearchOpts::new(0.5 * ceil, 1e-12 * q_max_linear_csir(ensemble, eh, sys), 300);
    opts.ceil = ceil;
    opts.grow = 4.0;
    let (loc, calls) = locate(eval, target, opts)?;
    let (mix, _) = resolve(loc, target);
    Ok(finish(BaselineKind::LinearDpsCsir, q_target, mix, calls, |_| None))
}

/// Per-state rule of the linear-model scheme with power control.
///
/// In the second regime the printed condition repeats `x2 < x1`; it must read
/// `x2 > x1` for the two regimes to cover every multiplier pair. The
/// water-filling branch is clipped to the peak budget in both regimes so the
/// policy stays feasible.
pub fn linear_csi_state(
    h: f64,
    lambda: f64,
    mu: f64,
    sys: &SystemParams,
    eh: &NonlinearEhParams,
) -> PowerSplitAlloc {
    if h <= 0.0 {
        return PowerSplitAlloc::new(0.0, 0.0);
    }
    let pm = sys.p_max;
    let level = 1.0 / (sys.zeta * lambda * eh.t_block) - sys.sigma2;
    let x1 = level / pm;
    let x2 = mu / (sys.zeta * lambda * eh.t_block);
    let split = |h: f64| {
        let rho = (1.0 - level / (h * pm)).clamp(0.0, 1.0);
        PowerSplitAlloc::new((1.0 - rho) * pm, rho * pm)
    };
    let wf = || PowerSplitAlloc::new((1.0 / mu - sys.sigma2 / h).clamp(0.0, pm), 0.0);
    let threshold = if x2 <= x1 { x1 } else { x2 };
    if h > threshold {
        split(h)
    } else {
        wf()
    }
}

/// Largest linear-model energy under both power budgets: the peak power
/// goes to the strongest states until the average budget is spent.
pub fn q_max_linear_csi(ensemble: &FadingEnsemble, eh: &NonlinearEhParams, sys: &SystemParams) -> f64 {
    let alloc = greedy_peak_allocation(&ensemble.gains, sys);
    sys.zeta * eh.t_block * mean(ensemble.gains.iter().zip(&alloc).map(|(h, p)| h * p))
}

/// Peak power on the strongest states, a fractional share on the marginal
/// one, zero elsewhere. Ties keep index order.
pub(crate) fn greedy_peak_allocation(gains: &[f64], sys: &SystemParams) -> Vec<f64> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&i, &j| gains[j].total_cmp(&gains[i]).then(i.cmp(&j)));
    let mut left = sys.p_avg * gains.len() as f64;
    let mut p = vec![0.0; gains.len()];
    for k in order {
        if left <= 0.0 || gains[k] <= 0.0 {
            break;
        }
        p[k] = sys.p_max.min(left);
        left -= p[k];
    }
    p
}

/// Linear-model dynamic splitting with power control.
pub fn linear_dps_csi(
    ensemble: &FadingEnsemble,
    q_target: f64,
    p_avg: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<BaselineSolution> {
    let sys = SystemParams::new(sys.sigma2, sys.p_fixed, p_avg, sys.p_max, sys.zeta)?;
    let q_max = q_max_linear_csi(ensemble, eh, &sys);
    let target = check_target(q_target, q_max)?;
    let gains = &ensemble.gains;
    let s = &sys;
    let tuned = |h: f64, p: f64, r: f64| s.zeta * r * h * p * eh.t_block;
    let eval = |lambda: f64, mu: f64| -> Result<Pure> {
        let allocs: Vec<PowerSplitAlloc> = gains.iter().map(|&h| linear_csi_state(h, lambda, mu, s, eh)).collect();
        let p = allocs.iter().map(|a| a.p_total).collect();
        let rho = allocs.iter().map(|a| a.rho).collect();
        Ok(score(gains, lambda, Some(mu), p, rho, tuned, eh, s.sigma2))
    };
    let ceil = linear_lambda_ceil(s, eh);
    let nested = Nested {
        eval,
        p_avg,
        tol_p: 1e-10 * p_avg,
        max_iter: 500,
        lambda_ceil: ceil,
    };
    // Water-filling level in nats: μ = 1/(water level).
    let mu0 = 1.0 / p_avg;
    if target <= 0.0 {
        let (mix, _, calls) = nested.inner(DUAL_FLOOR, mu0)?;
        return Ok(finish(BaselineKind::LinearDpsCsi, q_target, mix, calls, |_| None));
    }
    let out = nested.outer(target, true, 0.5 * ceil, mu0, 1e-10 * q_max)?;
    Ok(finish(BaselineKind::LinearDpsCsi, q_target, out.mix, out.calls, |_| None))
}

/// Points in the logarithmic scan for the mode-switching thresholds.
const THRESHOLD_SCAN: usize = 2048;

/// The gains `χ1 < χ2` where `λq(x) = r(x)`, with `q` the logistic energy
/// and `r` the rate at full power. States strictly between them harvest.
///
/// When `λq > r` already at the bottom of the scan, `χ1 = 0`; when the upper
/// crossing exceeds the floating-point range, `χ2 = ∞`.
pub fn mode_switch_thresholds(lambda: f64, eh: &NonlinearEhParams, sys: &SystemParams) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("lambda must be positive and finite, got {lambda}")));
    }
    let (p, s2) = (sys.p_fixed, sys.sigma2);
    let d = |x: f64| lambda * q_rx(x * p, eh) - rate_rx(x * p, s2);
    // Beyond the gain where r reaches the saturated energy, r wins for good.
    let top_bits = lambda * eh.q_sat() + 1.0;
    let x_hi = if top_bits > 1000.0 { 1e300 } else { s2 / p * top_bits.exp2() };
    let x_lo = (eh.b / p * 1e-6).min(x_hi * 1e-12);
    let ln_lo = x_lo.ln();
    let ratio = (x_hi.ln() - ln_lo) / THRESHOLD_SCAN as f64;
    let grid = |i: usize| if i == THRESHOLD_SCAN { x_hi } else { (ln_lo + ratio * i as f64).exp() };
    let mut prev = (grid(0), d(grid(0)));
    let mut up: Option<f64> = if prev.1 > 0.0 { Some(0.0) } else { None };
    for i in 1..=THRESHOLD_SCAN {
        let x = grid(i);
        let v = d(x);
        match up {
            None if v > 0.0 => up = Some(refine_root(d, prev.0, x, prev.1, v)),
            Some(c1) if v <= 0.0 => return Ok((c1, refine_root(d, prev.0, x, prev.1, v))),
            _ => {}
        }
        prev = (x, v);
    }
    match up {
        // The upper crossing lies beyond the floating-point range.
        Some(c1) => Ok((c1, f64::INFINITY)),
        None => Err(SwiptError::NoRootPair),
    }
}

/// Binary-split scheme with receiver-side knowledge.
pub fn mode_switch_csir(
    ensemble: &FadingEnsemble,
    q_target: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<BaselineSolution> {
    let q_max = q_max_at(ensemble, sys.p_fixed, eh);
    let target = check_target(q_target, q_max)?;
    let gains = &ensemble.gains;
    let p = sys.p_fixed;
    let n = gains.len();
    let tuned = |h: f64, p: f64, r: f64| q_rx(r * h * p, eh);
    let eval = |lambda: f64| -> Result<(f64, Mixture)> {
        let rho: Vec<f64> = match mode_switch_thresholds(lambda, eh, sys) {
            Ok((c1, c2)) => gains.iter().map(|&h| if h > c1 && h < c2 { 1.0 } else { 0.0 }).collect(),
            // No crossing: harvesting never beats decoding.
            Err(SwiptError::NoRootPair) => vec![0.0; n],
            Err(e) => return Err(e),
        };
        let pure = score(gains, lambda, None, vec![p; n], rho, tuned, eh, sys.sigma2);
        Ok((pure.q, Mixture::single(pure)))
    };
    let thresholds = |lambda: f64| mode_switch_thresholds(lambda, eh, sys).ok();
    if target <= 0.0 {
        let (_, m) = eval(DUAL_FLOOR)?;
        return Ok(finish(BaselineKind::ModeSwitchCsir, q_target, m, 1, thresholds));
    }
    // States too weak to ever cross below this multiplier are reached by
    // time-sharing with the all-harvest policy.
    let ceil = 1e12 / eh.q_sat();
    let (g_top, m_top) = eval(ceil)?;
    if target > g_top {
        let all = score(gains, ceil, None, vec![p; n], vec![1.0; n], tuned, eh, sys.sigma2);
        let theta = share_weight(g_top, all.q, target);
        let mix = Mixture::blend(m_top, Mixture::single(all), theta);
        return Ok(finish(BaselineKind::ModeSwitchCsir, q_target, mix, 1, thresholds));
    }
    let r0 = mean(gains.iter().map(|h| rate_rx(h * p, sys.sigma2)));
    let mut opts = SearchOpts::new((r0 / q_max).clamp(DUAL_FLOOR, ceil), 1e-12 * q_max, 400);
    opts.grow = 2.0;
    opts.ceil = ceil;
    let (loc, calls) = locate(eval, target, opts)?;
    let (mix, _) = resolve(loc, target);
    Ok(finish(BaselineKind::ModeSwitchCsir, q_target, mix, calls, thresholds))
}

/// Better of the two binary candidates for one state: decode with
/// water-filled power, or harvest with the case-A power.
pub(crate) fn binary_state(
    h: f64,
    lambda: f64,
    mu: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<PowerSplitAlloc> {
    if h <= 0.0 {
        return Ok(PowerSplitAlloc::new(0.0, 0.0));
    }
    let s2 = sys.sigma2;
    let mu_n = mu * LN_2;
    let wf = if h <= mu_n * s2 { 0.0 } else { (1.0 / mu_n - s2 / h).min(sys.p_max) };
    let x = case_a(h, lambda, mu, 0.0, sys.p_max, eh)?;
    let decode = rate_rx(h * wf, s2) - mu * wf;
    let harvest = lambda * q_rx(h * x, eh) - mu * x;
    Ok(if strictly_better(harvest, decode) {
        PowerSplitAlloc::new(0.0, x)
    } else {
        PowerSplitAlloc::new(wf, 0.0)
    })
}

/// Splitting restricted to `ρ ∈ {0, 1}` with power control, solved with the
/// same nested multiplier search as the unrestricted scheme.
pub fn binary_restricted_csi(
    ensemble: &FadingEnsemble,
    q_target: f64,
    p_avg: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<BaselineSolution> {
    let sys = SystemParams::new(sys.sigma2, sys.p_fixed, p_avg, sys.p_max, sys.zeta)?;
    // The restriction does not change the energy-only optimum.
    let q_max = crate::csi::q_max_csi(ensemble, eh, &sys)?;
    let target = check_target(q_target, q_max)?;
    let gains = &ensemble.gains;
    let s = &sys;
    let eval = |lambda: f64, mu: f64| -> Result<Pure> {
        let allocs: Vec<PowerSplitAlloc> = gains
            .par_iter()
            .map(|&h| binary_state(h, lambda, mu, eh, s))
            .collect::<Result<_>>()?;
        Ok(crate::csi::summarize_allocs(gains, &allocs, lambda, mu, eh, s.sigma2))
    };
    let nested = Nested {
        eval,
        p_avg,
        tol_p: 1e-10 * p_avg,
        max_iter: 500,
        lambda_ceil: 1e300,
    };
    let mu0 = crate::csi::mu_guess(p_avg);
    if target <= 0.0 {
        let (mix, _, calls) = nested.inner(DUAL_FLOOR, mu0)?;
        return Ok(finish(BaselineKind::BinaryRestrictedCsi, q_target, mix, calls, |_| None));
    }
    let (wf, mu_wf, _) = nested.inner(DUAL_FLOOR, mu0)?;
    let lambda0 = (wf.avg(|x| x.rate) / q_max).max(DUAL_FLOOR);
    let out = nested.outer(target, true, lambda0, mu_wf, 1e-10 * q_max)?;
    Ok(finish(BaselineKind::BinaryRestrictedCsi, q_target, out.mix, out.calls, |_| None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eh() -> NonlinearEhParams {
        NonlinearEhParams::new(6400.0, 0.003, 2.0, 1.0).unwrap()
    }

    fn sys() -> SystemParams {
        SystemParams::new(1e-4, 2.0, 2.0, 4.0, 1.0).unwrap()
    }

    fn ens() -> FadingEnsemble {
        FadingEnsemble::new(vec![4e-4, 1e-3, 1.5e-3, 2e-3, 3e-3, 6e-3, 0.0], None, "t").unwrap()
    }

    #[test]
    fn linear_csir_zero_and_residual() {
        let (e, s, en) = (eh(), sys(), ens());
        let zero = linear_dps_csir(&en, 0.0, &e, &s).unwrap();
        assert!(zero.rho.iter().all(|r| *r == 0.0));
        let q_max = q_max_linear_csir(&en, &e, &s);
        for frac in [0.2, 0.6, 0.95] {
            let sol = linear_dps_csir(&en, frac * q_max, &e, &s).unwrap();
            assert!((sol.tuned_q - frac * q_max).abs() <= 1e-6 * frac * q_max);
            assert!(sol.rho.iter().all(|r| (0.0..=1.0).contains(r)));
        }
    }

    #[test]
    fn linear_split_above_threshold() {
        let (e, s) = (eh(), sys());
        let lambda = 0.5 / (s.sigma2 * s.zeta);
        let level = 1.0 / lambda - s.sigma2;
        let x1 = level / s.p_fixed;
        for h in [1.01 * x1, 3.0 * x1] {
            assert!(linear_rho(h, s.p_fixed, lambda, &s, &e) > 0.0);
        }
        assert_eq!(linear_rho(0.99 * x1, s.p_fixed, lambda, &s, &e), 0.0);
    }

    #[test]
    fn linear_csi_rule_is_the_per_state_argmax() {
        let (e, s) = (eh(), sys());
        for &(lambda, mu) in &[(10.0, 50.0), (5e3, 1.0), (1e3, 0.3), (100.0, 1e3)] {
            for &h in &[1e-4, 1e-3, 3e-3, 1e-2, 0.1] {
                let a = linear_csi_state(h, lambda, mu, &s, &e);
                let obj = |pid: f64, peh: f64| {
                    (1.0 + h * pid / s.sigma2).ln() + lambda * s.zeta * h * peh - mu * (pid + peh)
                };
                let best = obj(a.p_id, a.p_eh);
                let m = 400;
                for i in 0..=m {
                    for j in 0..=(m - i) {
                        let pid = s.p_max * i as f64 / m as f64;
                        let peh = s.p_max * j as f64 / m as f64;
                        assert!(obj(pid, peh) <= best + 1e-9 * best.abs().max(1.0), "{lambda} {mu} {h}");
                    }
                }
            }
        }
    }

    #[test]
    fn linear_csi_zero_target_is_water_filling() {
        let (e, s, en) = (eh(), sys(), ens());
        let sol = linear_dps_csi(&en, 0.0, 2.0, &e, &s).unwrap();
        assert!(sol.rho.iter().all(|r| *r == 0.0));
        assert!((sol.achieved_p_avg - 2.0).abs() <= 1e-8);
        let q_max = q_max_linear_csi(&en, &e, &s);
        let half = linear_dps_csi(&en, 0.5 * q_max, 2.0, &e, &s).unwrap();
        assert!((half.tuned_q - 0.5 * q_max).abs() <= 1e-6 * q_max);
        assert!((half.achieved_p_avg - 2.0).abs() <= 1e-5 * 2.0);
    }

    #[test]
    fn thresholds_solve_the_crossing() {
        let (e, s) = (eh(), sys());
        for lambda in [50.0, 200.0, 2e3, 1e6] {
            let (c1, c2) = mode_switch_thresholds(lambda, &e, &s).unwrap();
            assert!(c1 < c2);
            for c in [c1, c2].into_iter().filter(|c| c.is_finite()) {
                let r = lambda * q_rx(c * s.p_fixed, &e) - rate_rx(c * s.p_fixed, s.sigma2);
                assert!(r.abs() <= 1e-10, "{lambda}: {r}");
            }
        }
        assert!(matches!(mode_switch_thresholds(1e-9, &e, &s), Err(SwiptError::NoRootPair)));
    }

    #[test]
    fn mode_switch_meets_target() {
        let (e, s, en) = (eh(), sys(), ens());
        let zero = mode_switch_csir(&en, 0.0, &e, &s).unwrap();
        assert_eq!(zero.achieved_q, 0.0);
        let q_max = q_max_at(&en, s.p_fixed, &e);
        for frac in [0.3, 0.7] {
            let sol = mode_switch_csir(&en, frac * q_max, &e, &s).unwrap();
            assert!((sol.achieved_q - frac * q_max).abs() <= 1e-9 * q_max);
            assert!(sol.rho.iter().all(|r| *r == 0.0 || *r == 1.0));
        }
    }

    #[test]
    fn binary_state_beats_both_candidates() {
        let (e, s) = (eh(), sys());
        for &(l, m) in &[(1.0, 1.0), (1e3, 0.5), (50.0, 5.0)] {
            for &h in &[2e-4, 1e-3, 4e-3] {
                let a = binary_state(h, l, m, &e, &s).unwrap();
                let lag = rate_rx(h * a.p_id, s.sigma2) + l * q_rx(h * a.p_eh, &e) - m * a.p_total;
                let mu_n = m * LN_2;
                let wf = (1.0 / mu_n - s.sigma2 / h).clamp(0.0, s.p_max);
                assert!(lag >= rate_rx(h * wf, s.sigma2) - m * wf - 1e-12);
                assert!(a.rho == 0.0 || a.rho == 1.0);
            }
        }
    }
}
