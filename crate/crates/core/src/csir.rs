//! Power splitting with channel knowledge at the receiver only.
//!
//! Per-state splits come from the five-case classification of the Lagrangian
//! `R + λQ` and the multiplier `λ` is searched so the average harvested energy
//! meets its target.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::FadingEnsemble;
use crate::dual::{locate, resolve, Mixture, Pure, SearchOpts, TimeShare};
use crate::error::{domain, Result, SwiptError};
use crate::model::{lagrangian_rx, phi_rx, q_rx, rate_rx};
use crate::numeric::{golden_max, mean, refine_root, scan_descents};
use crate::params::{NonlinearEhParams, SystemParams};

/// Relative margin within which two candidate objectives count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Smallest multiplier used by the searches.
pub const DUAL_FLOOR: f64 = 1e-12;

/// Points in the pre-scan used when the preferred root bracket is empty.
pub(crate) const SCAN_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CsirCase {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
    #[serde(rename = "Case1'")]
    Case1p,
    #[serde(rename = "Case2'")]
    Case2p,
    #[serde(rename = "Case3'")]
    Case3p,
    #[serde(rename = "Case4'")]
    Case4p,
    #[serde(rename = "Case5'")]
    Case5p,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CsirMode {
    /// Maximises the exact rate.
    Optimal,
    /// Maximises the linear lower bound `(1-ρ)R(P,0)` of the rate.
    Suboptimal,
}

/// `true` when `big` beats `small` by more than the tie margin.
#[inline]
pub(crate) fn strictly_better(big: f64, small: f64) -> bool {
    big > small + TIE_TOL * small.abs().max(1.0)
}

fn check_args(h: f64, lambda: f64) -> Result<()> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(domain(format!("channel gain must be finite and non-negative, got {h}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("lambda must be positive and finite, got {lambda}")));
    }
    Ok(())
}

pub(crate) fn classify_optimal_rx(hp: f64, lambda: f64, eh: &NonlinearEhParams, s2: f64) -> CsirCase {
    if hp <= 0.0 {
        return CsirCase::Case1;
    }
    let ln = lambda * LN_2;
    let k = eh.kappa();
    let gamma_h = k / ((hp - eh.b).max(0.0) + s2);
    if gamma_h >= ln / 4.0 {
        return CsirCase::Case1;
    }
    let start_flat = ln * phi_rx(0.0, eh) <= k / (hp + s2);
    let end_falls = ln * phi_rx(hp, eh) < k / s2;
    match (start_flat, end_falls) {
        (true, true) => CsirCase::Case2,
        (true, false) => CsirCase::Case3,
        (false, true) => CsirCase::Case4,
        (false, false) => CsirCase::Case5,
    }
}

/// Case of the exact problem at channel gain `h`.
pub fn classify_optimal(h: f64, lambda: f64, eh: &NonlinearEhParams, sys: &SystemParams) -> Result<CsirCase> {
    check_args(h, lambda)?;
    Ok(classify_optimal_rx(h * sys.p_fixed, lambda, eh, sys.sigma2))
}

pub(crate) fn classify_suboptimal_rx(hp: f64, lambda: f64, eh: &NonlinearEhParams, s2: f64) -> CsirCase {
    if hp <= 0.0 {
        return CsirCase::Case1p;
    }
    let z = eh.kappa() / hp * rate_rx(hp, s2);
    let lf0 = lambda * phi_rx(0.0, eh);
    let lfh = lambda * phi_rx(hp, eh);
    if z >= lambda / 4.0 {
        CsirCase::Case1p
    } else if lfh.max(lf0) < z {
        CsirCase::Case2p
    } else if lf0 <= z && z <= lfh {
        CsirCase::Case3p
    } else if z <= lfh.min(lf0) {
        CsirCase::Case5p
    } else {
        // Either `λf(h) < z < λf(0)` or the boundary `z = λf(0) > λf(h)`,
        // where the split still rises from zero.
        CsirCase::Case4p
    }
}

/// Case of the lower-bound problem at channel gain `h`.
pub fn classify_suboptimal(h: f64, lambda: f64, eh: &NonlinearEhParams, sys: &SystemParams) -> Result<CsirCase> {
    check_args(h, lambda)?;
    Ok(classify_suboptimal_rx(h * sys.p_fixed, lambda, eh, sys.sigma2))
}

/// Received power at which `Ψ = 1/2 + √(1/4 - c)`, the falling-slope solution
/// of `Ψ(1-Ψ) = c`. `None` when `c > 1/4`.
pub(crate) fn upper_level_point(c: f64, eh: &NonlinearEhParams) -> Option<f64> {
    let t = 4.0 * c;
    if !(t <= 1.0) {
        return None;
    }
    let s = (1.0 - t).sqrt();
    let one_minus_s = t / (1.0 + s);
    Some(eh.b - (one_minus_s / (1.0 + s)).ln() / eh.a)
}

/// `λ ln2 Ψ(1-Ψ) - g`, the scaled derivative of the Lagrangian in `ρ`.
#[inline]
fn stationarity(rho: f64, hp: f64, ln: f64, eh: &NonlinearEhParams, s2: f64) -> f64 {
    ln * phi_rx(rho * hp, eh) - eh.kappa() / ((1.0 - rho) * hp + s2)
}

/// Local maxima of `R + λQ` inside `(0, 1)`, best first, and how many were
/// found.
pub(crate) fn interior_maxima(hp: f64, lambda: f64, eh: &NonlinearEhParams, s2: f64) -> (Option<f64>, usize) {
    let ln = lambda * LN_2;
    let d = |r: f64| stationarity(r, hp, ln, eh, s2);
    let peak = eh.b / hp;
    if peak < 1.0 {
        let (d_lo, d_hi) = (d(peak), d(1.0));
        if d_lo > 0.0 && d_hi <= 0.0 {
            return (Some(refine_root(d, peak, 1.0, d_lo, d_hi)), 1);
        }
    }
    let descents = scan_descents(d, 0.0, 1.0, SCAN_POINTS);
    let count = descents.len();
    let best = descents
        .into_iter()
        .map(|s| refine_root(d, s.lo, s.hi, s.f_lo, s.f_hi))
        .map(|r| (r, lagrangian_rx(hp, r, lambda, eh, s2)))
        .fold(None, |acc: Option<(f64, f64)>, c| match acc {
            Some(a) if a.1 >= c.1 => Some(a),
            _ => Some(c),
        })
        .map(|(r, _)| r);
    (best, count)
}

/// Interior stationary point `ρ_o` of `R + λQ` at channel gain `h`.
pub fn rho_opt_root(h: f64, lambda: f64, eh: &NonlinearEhParams, sys: &SystemParams) -> Result<f64> {
    check_args(h, lambda)?;
    let hp = h * sys.p_fixed;
    if hp <= 0.0 {
        return Err(SwiptError::NoRootInBracket { lo: 0.0, hi: 1.0 });
    }
    match interior_maxima(hp, lambda, eh, sys.sigma2) {
        (Some(r), _) => Ok(r),
        (None, _) => Err(SwiptError::NoRootInBracket {
            lo: (eh.b / hp).min(1.0),
            hi: 1.0,
        }),
    }
}

pub(crate) fn optimal_rho_rx(hp: f64, lambda: f64, eh: &NonlinearEhParams, s2: f64) -> Result<f64> {
    let lag = |r: f64| lagrangian_rx(hp, r, lambda, eh, s2);
    Ok(match classify_optimal_rx(hp, lambda, eh, s2) {
        CsirCase::Case1 => 0.0,
        CsirCase::Case2 => match interior_maxima(hp, lambda, eh, s2).0 {
            Some(r) if strictly_better(lag(r), lag(0.0)) => r,
            _ => 0.0,
        },
        CsirCase::Case3 => {
            if strictly_better(lag(1.0), lag(0.0)) {
                1.0
            } else {
                0.0
            }
        }
        CsirCase::Case4 => interior_maxima(hp, lambda, eh, s2).0.ok_or(SwiptError::NoRootInBracket {
            lo: (eh.b / hp).min(1.0),
            hi: 1.0,
        })?,
        _ => 1.0,
    })
}

/// Optimal split at channel gain `h` for multiplier `λ`.
pub fn solve_state_optimal(h: f64, lambda: f64, eh: &NonlinearEhParams, sys: &SystemParams) -> Result<f64> {
    check_args(h, lambda)?;
    optimal_rho_rx(h * sys.p_fixed, lambda, eh, sys.sigma2)
}

/// Lower-bound objective `(1-ρ)R(P,0) + λQ(P,ρ)`.
#[inline]
pub(crate) fn surrogate_rx(hp: f64, rho: f64, lambda: f64, eh: &NonlinearEhParams, s2: f64) -> f64 {
    (1.0 - rho) * rate_rx(hp, s2) + lambda * q_rx(rho * hp, eh)
}

/// Closed-form interior split of the lower-bound problem.
pub(crate) fn rho_so_rx(hp: f64, lambda: f64, eh: &NonlinearEhParams, s2: f64) -> Result<f64> {
    let z = eh.kappa() / hp * rate_rx(hp, s2);
    upper_level_point(z / lambda, eh)
        .map(|x| x / hp)
        .ok_or_else(|| domain(format!("4z/λ = {} exceeds one", 4.0 * z / lambda)))
}

pub(crate) fn suboptimal_rho_rx(hp: f64, lambda: f64, eh: &NonlinearEhParams, s2: f64) -> Result<f64> {
    let obj = |r: f64| surrogate_rx(hp, r, lambda, eh, s2);
    Ok(match classify_suboptimal_rx(hp, lambda, eh, s2) {
        CsirCase::Case1p => 0.0,
        CsirCase::Case2p => {
            let r = rho_so_rx(hp, lambda, eh, s2)?;
            // With hP below the threshold the candidate can fall past ρ = 1.
            if r <= 1.0 && strictly_better(obj(r), obj(0.0)) {
                r
            } else {
                0.0
            }
        }
        CsirCase::Case3p => {
            if strictly_better(obj(1.0), obj(0.0)) {
                1.0
            } else {
                0.0
            }
        }
        CsirCase::Case4p => {
            let r = rho_so_rx(hp, lambda, eh, s2)?;
            if !(0.0..=1.0 + 1e-12).contains(&r) {
                return Err(domain(format!("interior split {r} outside [0, 1]")));
            }
            r.min(1.0)
        }
        _ => 1.0,
    })
}

/// Split maximising the lower-bound objective at channel gain `h`.
pub fn solve_state_suboptimal(h: f64, lambda: f64, eh: &NonlinearEhParams, sys: &SystemParams) -> Result<f64> {
    check_args(h, lambda)?;
    suboptimal_rho_rx(h * sys.p_fixed, lambda, eh, sys.sigma2)
}

/// Average harvested energy with every block routed to the harvester.
pub fn q_max_csir(ensemble: &FadingEnsemble, eh: &NonlinearEhParams, sys: &SystemParams) -> f64 {
    q_max_at(ensemble, sys.p_fixed, eh)
}

pub(crate) fn q_max_at(ensemble: &FadingEnsemble, p: f64, eh: &NonlinearEhParams) -> f64 {
    mean(ensemble.gains.iter().map(|h| q_rx(h * p, eh)))
}

/// Evaluates the per-state argmax over the whole ensemble.
pub(crate) fn evaluate(
    gains: &[f64],
    p: f64,
    lambda: f64,
    mode: CsirMode,
    eh: &NonlinearEhParams,
    s2: f64,
) -> Result<Pure> {
    let rho: Vec<f64> = gains
        .par_iter()
        .map(|&h| match mode {
            CsirMode::Optimal => optimal_rho_rx(h * p, lambda, eh, s2),
            CsirMode::Suboptimal => suboptimal_rho_rx(h * p, lambda, eh, s2),
        })
        .collect::<Result<_>>()?;
    Ok(summarize(gains, p, lambda, rho, mode, eh, s2))
}

pub(crate) fn summarize(
    gains: &[f64],
    p: f64,
    lambda: f64,
    rho: Vec<f64>,
    mode: CsirMode,
    eh: &NonlinearEhParams,
    s2: f64,
) -> Pure {
    let rate = mean(gains.iter().zip(&rho).map(|(h, r)| rate_rx((1.0 - r) * h * p, s2)));
    let q = mean(gains.iter().zip(&rho).map(|(h, r)| q_rx(r * h * p, eh)));
    let obj_rate = match mode {
        CsirMode::Optimal => rate,
        CsirMode::Suboptimal => mean(gains.iter().zip(&rho).map(|(h, r)| (1.0 - r) * rate_rx(h * p, s2))),
    };
    Pure {
        lambda,
        mu: None,
        p: None,
        rho,
        rate,
        q,
        power: p,
        metric: q,
        dual_obj: obj_rate + lambda * q,
        obj_rate,
    }
}

/// Result of a multiplier search without transmitter CSI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsirSolution {
    pub mode: CsirMode,
    /// Transmit power used in every block.
    pub p: f64,
    pub lambda: f64,
    /// Split of the primary policy.
    pub rho: Vec<f64>,
    /// Secondary policies mixed in to meet the energy target exactly.
    pub time_share: Vec<TimeShare>,
    pub achieved_rate: f64,
    pub achieved_q: f64,
    pub iterations: usize,
    /// Dual bound minus achieved objective; zero up to rounding at the optimum.
    pub gap_bound: f64,
}

impl CsirSolution {
    /// Average of `f(state, rho)` over the time-shared policy.
    pub fn expected<F: Fn(usize, f64) -> f64>(&self, f: F) -> f64 {
        let base = mean(self.rho.iter().enumerate().map(|(k, r)| f(k, *r)));
        let n = self.rho.len() as f64;
        let mut total = base;
        for ts in &self.time_share {
            let delta: f64 = ts.changes.iter().map(|c| f(c.state, c.rho) - f(c.state, self.rho[c.state])).sum();
            total += ts.weight * delta / n;
        }
        total
    }
}

/// Multiplier search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsirSolver {
    pub mode: CsirMode,
    /// Accepted energy residual as a fraction of the maximum energy.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial multiplier; a scale estimate is used when absent.
    pub warm_start: Option<f64>,
}

impl CsirSolver {
    pub fn new(mode: CsirMode) -> Self {
        Self {
            mode,
            tol: 1e-9,
            max_iter: 200,
            warm_start: None,
        }
    }

    pub fn solve(
        &self,
        ensemble: &FadingEnsemble,
        q_target: f64,
        eh: &NonlinearEhParams,
        sys: &SystemParams,
    ) -> Result<CsirSolution> {
        self.solve_at_power(ensemble, q_target, sys.p_fixed, eh, sys)
    }

    pub(crate) fn solve_at_power(
        &self,
        ensemble: &FadingEnsemble,
        q_target: f64,
        p: f64,
        eh: &NonlinearEhParams,
        sys: &SystemParams,
    ) -> Result<CsirSolution> {
        let mix = self.search(ensemble, q_target, p, eh, sys)?;
        Ok(finish(self.mode, p, q_target, mix))
    }

    pub(crate) fn search(
        &self,
        ensemble: &FadingEnsemble,
        q_target: f64,
        p: f64,
        eh: &NonlinearEhParams,
        sys: &SystemParams,
    ) -> Result<(Mixture, Option<(f64, f64)>, usize)> {
        if !(q_target >= 0.0 && q_target.is_finite()) {
            return Err(domain(format!("energy target must be finite and non-negative, got {q_target}")));
        }
        let q_max = q_max_at(ensemble, p, eh);
        if q_target > q_max * (1.0 + 1e-12) {
            return Err(SwiptError::InfeasibleTarget {
                target: q_target,
                max: q_max,
            });
        }
        let target = q_target.min(q_max);
        let gains = &ensemble.gains;
        let s2 = sys.sigma2;
        if target >= q_max && q_max > 0.0 {
            // Only the all-harvest policy reaches the maximum.
            let pure = summarize(gains, p, f64::MAX, vec![1.0; gains.len()], self.mode, eh, s2);
            return Ok((Mixture::single(pure), None, 0));
        }
        let eval = |lambda: f64| -> Result<(f64, Mixture)> {
            let pure = evaluate(gains, p, lambda, self.mode, eh, s2)?;
            Ok((pure.q, Mixture::single(pure)))
        };
        if target <= 0.0 {
            let (_, m) = eval(DUAL_FLOOR)?;
            return Ok((m, None, 1));
        }
        let start = self.warm_start.unwrap_or_else(|| {
            let r0 = mean(gains.iter().map(|h| rate_rx(h * p, s2)));
            (r0 / q_max).max(DUAL_FLOOR)
        });
        let mut opts = SearchOpts::new(start, self.tol * q_max, self.max_iter);
        opts.grow = 4.0;
        // A straddled jump costs at most (jump in E[Q])·Δλ of rate once the
        // two ends are blended, so a 1e-10 relative bracket is ample.
        opts.rel_width = 1e-10;
        let (loc, calls) = locate(eval, target, opts)?;
        let (mix, bracket) = resolve(loc, target);
        Ok((mix, bracket, calls))
    }
}

fn finish(mode: CsirMode, p: f64, q_target: f64, (mix, _bracket, calls): (Mixture, Option<(f64, f64)>, usize)) -> CsirSolution {
    let achieved_rate = mix.avg(|x| x.rate);
    let achieved_q = mix.avg(|x| x.q);
    let obj_rate = mix.avg(|x| x.obj_rate);
    let dual = mix
        .parts
        .iter()
        .map(|(_, x)| x.dual_obj - x.lambda * q_target)
        .fold(f64::INFINITY, f64::min);
    // An unbounded multiplier means the feasible set is a single policy.
    let gap_bound = if dual.is_finite() { (dual - obj_rate).max(0.0) } else { 0.0 };
    let (main, time_share) = mix.into_primary();
    CsirSolution {
        mode,
        p,
        lambda: main.lambda,
        rho: main.rho,
        time_share,
        achieved_rate,
        achieved_q,
        iterations: calls,
        gap_bound,
    }
}

/// Finds `λ` so the average harvested energy equals `q_target`.
pub fn find_lambda(
    ensemble: &FadingEnsemble,
    q_target: f64,
    mode: CsirMode,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
    tol: f64,
) -> Result<CsirSolution> {
    CsirSolver {
        tol,
        ..CsirSolver::new(mode)
    }
    .solve(ensemble, q_target, eh, sys)
}

/// Grid points used before the golden-section refinement of the power.
const POWER_GRID: usize = 64;

/// Joint choice of one transmit power `P ≤ p_th` and the splits, for a
/// transmitter that knows only the channel statistics.
pub fn solve_partial_csit(
    ensemble: &FadingEnsemble,
    q_target: f64,
    p_th: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<(f64, CsirSolution)> {
    if !(p_th > 0.0 && p_th.is_finite()) {
        return Err(domain(format!("p_th must be positive, got {p_th}")));
    }
    if !(q_target >= 0.0 && q_target.is_finite()) {
        return Err(domain(format!("energy target must be finite and non-negative, got {q_target}")));
    }
    let q_max = q_max_at(ensemble, p_th, eh);
    if q_target > q_max * (1.0 + 1e-12) {
        return Err(SwiptError::InfeasibleTarget {
            target: q_target,
            max: q_max,
        });
    }
    let gains = &ensemble.gains;
    let s2 = sys.sigma2;
    if q_target <= 0.0 {
        let pure = summarize(gains, p_th, DUAL_FLOOR, vec![0.0; gains.len()], CsirMode::Optimal, eh, s2);
        return Ok((p_th, finish(CsirMode::Optimal, p_th, 0.0, (Mixture::single(pure), None, 1))));
    }
    let target = q_target.min(q_max);
    let dual_at = |lambda: f64, p: f64| -> f64 {
        let hp_lag = gains
            .iter()
            .map(|h| {
                let hp = h * p;
                let r = optimal_rho_rx(hp, lambda, eh, s2).unwrap_or(0.0);
                lagrangian_rx(hp, r, lambda, eh, s2)
            });
        mean(hp_lag)
    };
    let best_power = |lambda: f64| -> f64 {
        let mut best = (p_th, f64::NEG_INFINITY);
        for i in 0..=POWER_GRID {
            let p = p_th * i as f64 / POWER_GRID as f64;
            let v = dual_at(lambda, p);
            if v > best.1 {
                best = (p, v);
            }
        }
        let step = p_th / POWER_GRID as f64;
        let (lo, hi) = ((best.0 - step).max(0.0), (best.0 + step).min(p_th));
        let (p, v) = golden_max(|p| dual_at(lambda, p), lo, hi, p_th * 1e-6);
        if v > best.1 {
            p
        } else {
            best.0
        }
    };
    let eval = |lambda: f64| -> Result<(f64, Mixture)> {
        let p = best_power(lambda);
        let pure = evaluate(gains, p, lambda, CsirMode::Optimal, eh, s2)?;
        let mut pure = pure;
        pure.power = p;
        pure.p = Some(vec![p; gains.len()]);
        Ok((pure.q, Mixture::single(pure)))
    };
    let r0 = mean(gains.iter().map(|h| rate_rx(h * p_th, s2)));
    let mut opts = SearchOpts::new((r0 / q_max).max(DUAL_FLOOR), 1e-9 * q_max, 200);
    opts.grow = 4.0;
    let (loc, calls) = locate(eval, target, opts)?;
    let (mix, bracket) = resolve(loc, target);
    let p_star = mix
        .parts
        .iter()
        .fold((0.0, 0.0), |acc, (w, x)| if *w > acc.0 { (*w, x.power) } else { acc })
        .1;
    let sol = finish(CsirMode::Optimal, p_star, q_target, (mix, bracket, calls));
    Ok((p_star, sol))
}
