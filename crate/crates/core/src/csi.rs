//! Joint transmit power and power splitting with channel knowledge at both
//! ends.
//!
//! Each state splits its power into an information part `P_ID` and a
//! harvesting part `P_EH`. For a fixed `P_EH` the best `P_ID` is water-filling
//! clipped by the peak budget, so the per-state problem reduces to two
//! one-dimensional searches over `P_EH`: below the point where the peak budget
//! starts to bind (case A) and above it (case B).

use std::cell::Cell;
use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::FadingEnsemble;
use crate::csir::{strictly_better, upper_level_point, DUAL_FLOOR, SCAN_POINTS};
use crate::dual::{locate, resolve, Mixture, Pure, SearchOpts, TimeShare};
use crate::error::{domain, Result, SwiptError};
use crate::model::{phi_rx, q_rx, rate_rx};
use crate::numeric::{mean, refine_root, scan_descents};
use crate::params::{NonlinearEhParams, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    /// Exact per-state optimum under both power budgets.
    Optimal,
    /// Exact optimum with the peak budget removed.
    LongtermOnly,
    /// Case B replaced by its closed-form lower-bound variant.
    Suboptimal,
}

/// Which objective the case-B search maximises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseBVariant {
    Optimal,
    Suboptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualPair {
    pub lambda: f64,
    pub mu: f64,
}

/// Power allocation of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSplitAlloc {
    pub p_id: f64,
    pub p_eh: f64,
    pub p_total: f64,
    pub rho: f64,
}

impl PowerSplitAlloc {
    pub fn new(p_id: f64, p_eh: f64) -> Self {
        let p_total = p_id + p_eh;
        let rho = if p_total > 0.0 { p_eh / p_total } else { 0.0 };
        Self {
            p_id,
            p_eh,
            p_total,
            rho,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CaseA {
    A1,
    A2,
    A3,
    A4,
    A5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CaseB {
    B1,
    B2,
    B3,
    B4,
    B5,
}

fn check_duals(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite() && mu > 0.0 && mu.is_finite()) {
        return Err(domain(format!("duals must be positive and finite, got ({lambda}, {mu})")));
    }
    Ok(())
}

fn check_gain(h: f64) -> Result<()> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(domain(format!("channel gain must be finite and non-negative, got {h}")));
    }
    Ok(())
}

/// Water-filling power for the decoder given the harvesting power already
/// spent. `μ` prices power in bits per joule, hence the `ln 2`.
pub fn water_fill_id(h: f64, mu: f64, p_eh: f64, sys: &SystemParams) -> Result<f64> {
    check_gain(h)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(domain(format!("mu must be positive and finite, got {mu}")));
    }
    if !(0.0..=sys.p_max).contains(&p_eh) {
        return Err(domain(format!("p_eh must lie in [0, p_max], got {p_eh}")));
    }
    Ok(water_fill_rx(h, mu * LN_2, sys.sigma2).min(sys.p_max - p_eh))
}

/// `max{1/μ_n - σ²/h, 0}` with `μ_n` in nats per joule.
#[inline]
fn water_fill_rx(h: f64, mu_n: f64, s2: f64) -> f64 {
    if h <= mu_n * s2 {
        0.0
    } else {
        1.0 / mu_n - s2 / h
    }
}

pub(crate) fn classify_a(h: f64, lambda: f64, mu: f64, lo: f64, up: f64, eh: &NonlinearEhParams) -> CaseA {
    let c = mu * eh.kappa() / h;
    let lfl = lambda * phi_rx(h * lo, eh);
    let lfu = lambda * phi_rx(h * up, eh);
    if c >= lambda / 4.0 {
        CaseA::A1
    } else if lfu.max(lfl) < c {
        CaseA::A2
    } else if lfl <= c && c <= lfu {
        CaseA::A3
    } else if lfu <= c && c <= lfl {
        CaseA::A4
    } else {
        CaseA::A5
    }
}

/// Maximiser of `λQ(x) - μx` over `[lo, up]`.
pub(crate) fn case_a(h: f64, lambda: f64, mu: f64, lo: f64, up: f64, eh: &NonlinearEhParams) -> Result<f64> {
    if h <= 0.0 || up <= lo {
        return Ok(lo);
    }
    let obj = |x: f64| lambda * q_rx(h * x, eh) - mu * x;
    let interior = || -> Result<f64> {
        upper_level_point(mu * eh.kappa() / (h * lambda), eh)
            .map(|x| x / h)
            .ok_or_else(|| domain("4μZ(h)/λ exceeds one"))
    };
    Ok(match classify_a(h, lambda, mu, lo, up, eh) {
        CaseA::A1 => lo,
        CaseA::A2 => {
            let x = interior()?;
            // The peak may sit outside the interval, in which case the
            // objective falls throughout it.
            if x >= lo && x <= up && strictly_better(obj(x), obj(lo)) {
                x
            } else {
                lo
            }
        }
        CaseA::A3 => {
            if strictly_better(obj(up), obj(lo)) {
                up
            } else {
                lo
            }
        }
        CaseA::A4 => {
            let x = interior()?;
            let slack = 1e-9 * up.max(1e-300);
            if !(x >= lo - slack && x <= up + slack) {
                return Err(domain(format!("interior point {x} outside [{lo}, {up}]")));
            }
            x.clamp(lo, up)
        }
        CaseA::A5 => up,
    })
}

/// Maximiser of `λQ(x) - μx` over `[lo, up]`, validated.
pub fn p_eh_case_a(
    h: f64,
    lambda: f64,
    mu: f64,
    p_low: f64,
    p_up: f64,
    eh: &NonlinearEhParams,
) -> Result<f64> {
    check_gain(h)?;
    check_duals(lambda, mu)?;
    if !(0.0 <= p_low && p_low <= p_up && p_up.is_finite()) {
        return Err(domain(format!("need 0 <= p_low <= p_up, got [{p_low}, {p_up}]")));
    }
    case_a(h, lambda, mu, p_low, p_up, eh)
}

/// Harvesting power without a peak budget: zero, or the falling-slope
/// stationary point when it pays for its power.
pub(crate) fn case_a_unbounded(h: f64, lambda: f64, mu: f64, eh: &NonlinearEhParams) -> Result<f64> {
    if h <= 0.0 {
        return Ok(0.0);
    }
    let x1 = 4.0 * mu * eh.kappa() / lambda;
    let x2 = mu * eh.kappa() / (lambda * eh.omega * eh.one_minus_omega());
    if h <= x1 {
        return Ok(0.0);
    }
    let x = upper_level_point(mu * eh.kappa() / (h * lambda), eh)
        .map(|x| x / h)
        .ok_or_else(|| domain("4μZ(h)/λ exceeds one"))?;
    if h >= x2 {
        return Ok(x);
    }
    let gain = lambda * q_rx(h * x, eh) - mu * x;
    Ok(if strictly_better(gain, 0.0) { x } else { 0.0 })
}

pub(crate) fn classify_b(
    h: f64,
    lambda: f64,
    lo: f64,
    up: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> CaseB {
    let ln = lambda * LN_2;
    let k = eh.kappa();
    let s2 = sys.sigma2;
    let gamma = k / ((h * sys.p_max - eh.b).max(0.0) + s2);
    if gamma >= ln / 4.0 {
        return CaseB::B1;
    }
    let start_flat = ln * phi_rx(h * lo, eh) <= k / (h * (sys.p_max - lo) + s2);
    let end_falls = ln * phi_rx(h * up, eh) < k / (h * (sys.p_max - up) + s2);
    match (start_flat, end_falls) {
        (true, true) => CaseB::B2,
        (true, false) => CaseB::B3,
        (false, true) => CaseB::B4,
        (false, false) => CaseB::B5,
    }
}

/// `R(P_max - x) + λQ(x)`.
#[inline]
fn objective_b(h: f64, x: f64, lambda: f64, eh: &NonlinearEhParams, sys: &SystemParams) -> f64 {
    rate_rx(h * (sys.p_max - x), sys.sigma2) + lambda * q_rx(h * x, eh)
}

/// Local maxima of the case-B objective inside `(lo, up)`: the best one and
/// how many sign changes were found.
pub(crate) fn case_b_roots(
    h: f64,
    lambda: f64,
    lo: f64,
    up: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> (Option<f64>, usize) {
    let ln = lambda * LN_2;
    let k = eh.kappa();
    let (pm, s2) = (sys.p_max, sys.sigma2);
    let d = |x: f64| ln * phi_rx(h * x, eh) - k / (h * (pm - x) + s2);
    let left = (eh.b / h).max(lo);
    if left < up {
        let (d_lo, d_up) = (d(left), d(up));
        if d_lo > 0.0 && d_up <= 0.0 {
            return (Some(refine_root(d, left, up, d_lo, d_up)), 1);
        }
        if d_lo <= 0.0 && left > lo && d(lo) <= 0.0 {
            // Past the logistic peak the stationarity gap only falls, so a
            // non-positive value there rules out a root to the right.
            if eh.b / h >= lo {
                let descents = scan_descents(d, lo, left, SCAN_POINTS);
                return best_root(descents, d, |x| objective_b(h, x, lambda, eh, sys));
            }
            return (None, 0);
        }
    }
    let descents = scan_descents(d, lo, up, SCAN_POINTS);
    best_root(descents, d, |x| objective_b(h, x, lambda, eh, sys))
}

fn best_root<D: Fn(f64) -> f64, O: Fn(f64) -> f64>(
    descents: Vec<crate::numeric::Descent>,
    d: D,
    obj: O,
) -> (Option<f64>, usize) {
    let count = descents.len();
    let best = descents
        .into_iter()
        .map(|s| refine_root(&d, s.lo, s.hi, s.f_lo, s.f_hi))
        .map(|x| (x, obj(x)))
        .fold(None, |acc: Option<(f64, f64)>, c| match acc {
            Some(a) if a.1 >= c.1 => Some(a),
            _ => Some(c),
        })
        .map(|(x, _)| x);
    (best, count)
}

pub(crate) fn case_b(
    h: f64,
    lambda: f64,
    lo: f64,
    up: f64,
    variant: CaseBVariant,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<f64> {
    if h <= 0.0 || up <= lo {
        return Ok(lo);
    }
    if variant == CaseBVariant::Suboptimal {
        // The lower bound is linear in x apart from λQ, so it is the case-A
        // problem with the power price R(P_max)/P_max.
        let mu_eff = rate_rx(h * sys.p_max, sys.sigma2) / sys.p_max;
        return case_a(h, lambda, mu_eff, lo, up, eh);
    }
    let obj = |x: f64| objective_b(h, x, lambda, eh, sys);
    let no_root = SwiptError::NoRootInBracket { lo, hi: up };
    Ok(match classify_b(h, lambda, lo, up, eh, sys) {
        CaseB::B1 => lo,
        CaseB::B2 => match case_b_roots(h, lambda, lo, up, eh, sys).0 {
            Some(x) if strictly_better(obj(x), obj(lo)) => x,
            _ => lo,
        },
        CaseB::B3 => {
            if strictly_better(obj(up), obj(lo)) {
                up
            } else {
                lo
            }
        }
        CaseB::B4 => case_b_roots(h, lambda, lo, up, eh, sys).0.ok_or(no_root)?,
        CaseB::B5 => up,
    })
}

/// Maximiser over `[p_low, p_up]` of `R(P_max - x) + λQ(x)` (optimal) or of
/// its lower bound `(1 - x/P_max)R(P_max) + λQ(x)` (suboptimal).
pub fn p_eh_case_b(
    h: f64,
    lambda: f64,
    p_low: f64,
    p_up: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
    variant: CaseBVariant,
) -> Result<f64> {
    check_gain(h)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("lambda must be positive and finite, got {lambda}")));
    }
    if !(0.0 <= p_low && p_low <= p_up && p_up <= sys.p_max) {
        return Err(domain(format!("need 0 <= p_low <= p_up <= p_max, got [{p_low}, {p_up}]")));
    }
    case_b(h, lambda, p_low, p_up, variant, eh, sys)
}

/// `R(P_ID) + λQ(P_EH) - μ(P_ID + P_EH)` for one state.
#[inline]
pub(crate) fn lagrangian_csi(
    h: f64,
    p_id: f64,
    p_eh: f64,
    lambda: f64,
    mu: f64,
    eh: &NonlinearEhParams,
    s2: f64,
) -> f64 {
    rate_rx(h * p_id, s2) + lambda * q_rx(h * p_eh, eh) - mu * (p_id + p_eh)
}

pub(crate) fn solve_state_rx(
    h: f64,
    lambda: f64,
    mu: f64,
    mode: CsiMode,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<PowerSplitAlloc> {
    if h <= 0.0 {
        return Ok(PowerSplitAlloc::new(0.0, 0.0));
    }
    let s2 = sys.sigma2;
    let mu_n = mu * LN_2;
    let variant = match mode {
        CsiMode::LongtermOnly => {
            let p_eh = case_a_unbounded(h, lambda, mu, eh)?;
            return Ok(PowerSplitAlloc::new(water_fill_rx(h, mu_n, s2), p_eh));
        }
        CsiMode::Optimal => CaseBVariant::Optimal,
        CsiMode::Suboptimal => CaseBVariant::Suboptimal,
    };
    let pm = sys.p_max;
    if h <= mu_n * s2 {
        return Ok(PowerSplitAlloc::new(0.0, case_a(h, lambda, mu, 0.0, pm, eh)?));
    }
    let wf = water_fill_rx(h, mu_n, s2);
    let p_th = (pm - wf).max(0.0);
    let xa = case_a(h, lambda, mu, 0.0, p_th, eh)?;
    let a = PowerSplitAlloc::new(wf.min(pm - xa), xa);
    let xb = case_b(h, lambda, p_th, pm, variant, eh, sys)?;
    let b = PowerSplitAlloc::new(pm - xb, xb);
    let la = lagrangian_csi(h, a.p_id, a.p_eh, lambda, mu, eh, s2);
    let lb = lagrangian_csi(h, b.p_id, b.p_eh, lambda, mu, eh, s2);
    Ok(if strictly_better(lb, la) { b } else { a })
}

/// Per-state allocation maximising the Lagrangian for the given duals.
pub fn solve_state_csi(
    h: f64,
    duals: DualPair,
    mode: CsiMode,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<PowerSplitAlloc> {
    check_gain(h)?;
    check_duals(duals.lambda, duals.mu)?;
    solve_state_rx(h, duals.lambda, duals.mu, mode, eh, sys)
}

pub(crate) fn summarize_allocs(
    gains: &[f64],
    allocs: &[PowerSplitAlloc],
    lambda: f64,
    mu: f64,
    eh: &NonlinearEhParams,
    s2: f64,
) -> Pure {
    let rate = mean(gains.iter().zip(allocs).map(|(h, a)| rate_rx(h * a.p_id, s2)));
    let q = mean(gains.iter().zip(allocs).map(|(h, a)| q_rx(h * a.p_eh, eh)));
    let power = mean(allocs.iter().map(|a| a.p_total));
    Pure {
        lambda,
        mu: Some(mu),
        p: Some(allocs.iter().map(|a| a.p_total).collect()),
        rho: allocs.iter().map(|a| a.rho).collect(),
        rate,
        q,
        power,
        metric: q,
        dual_obj: rate + lambda * q - mu * power,
        obj_rate: rate,
    }
}

pub(crate) fn evaluate(
    gains: &[f64],
    lambda: f64,
    mu: f64,
    mode: CsiMode,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<Pure> {
    let allocs: Vec<PowerSplitAlloc> = gains
        .par_iter()
        .map(|&h| solve_state_rx(h, lambda, mu, mode, eh, sys))
        .collect::<Result<_>>()?;
    Ok(summarize_allocs(gains, &allocs, lambda, mu, eh, sys.sigma2))
}

/// Nested multiplier search: `μ` meets the power budget for each `λ`, and
/// `λ` drives the outer metric to its target.
pub(crate) struct Nested<F> {
    pub eval: F,
    pub p_avg: f64,
    pub tol_p: f64,
    pub max_iter: usize,
    /// Largest `λ` the outer search may try.
    pub lambda_ceil: f64,
}

pub(crate) struct NestedOutcome {
    pub mix: Mixture,
    pub calls: usize,
}

impl<F> Nested<F>
where
    F: Fn(f64, f64) -> Result<Pure>,
{
    /// Mixture meeting `E[P] = p_avg` at fixed `λ`, and the primary `μ`.
    pub(crate) fn inner(&self, lambda: f64, mu_start: f64) -> Result<(Mixture, f64, usize)> {
        let eval = |mu: f64| -> Result<(f64, Mixture)> {
            let pure = (self.eval)(lambda, mu)?;
            Ok((-pure.power, Mixture::single(pure)))
        };
        let mut opts = SearchOpts::new(mu_start, self.tol_p, self.max_iter);
        opts.grow = 2.0;
        let (loc, calls) = locate(eval, -self.p_avg, opts)?;
        let (mix, _) = resolve(loc, -self.p_avg);
        let mu = mix
            .parts
            .iter()
            .fold((0.0, mu_start), |acc, (w, p)| if *w > acc.0 { (*w, p.mu.unwrap_or(mu_start)) } else { acc })
            .1;
        Ok((mix, mu, calls))
    }

    /// Outer search on `λ`. `increasing` tells whether the metric grows
    /// with `λ`.
    pub(crate) fn outer(
        &self,
        target: f64,
        increasing: bool,
        lambda_start: f64,
        mu_start: f64,
        tol_abs: f64,
    ) -> Result<NestedOutcome> {
        let mu_warm = Cell::new(mu_start);
        let calls = Cell::new(0usize);
        let sign = if increasing { 1.0 } else { -1.0 };
        let eval = |lambda: f64| -> Result<(f64, Mixture)> {
            let (mix, mu, c) = self.inner(lambda, mu_warm.get())?;
            mu_warm.set(mu);
            calls.set(calls.get() + c);
            Ok((sign * mix.avg(|x| x.metric), mix))
        };
        let mut opts = SearchOpts::new(lambda_start, tol_abs, self.max_iter);
        opts.grow = 4.0;
        opts.ceil = self.lambda_ceil;
        let (loc, _) = locate(eval, sign * target, opts)?;
        let (mix, _) = resolve(loc, sign * target);
        Ok(NestedOutcome {
            mix,
            calls: calls.get(),
        })
    }

    /// A few projected subgradient steps on the dual, used to seed the
    /// bisections. Steps shrink as `s0/√i`.
    pub(crate) fn subgradient_seed(
        &self,
        target: f64,
        increasing: bool,
        lambda0: f64,
        mu0: f64,
        steps: usize,
    ) -> Result<(f64, f64)> {
        let sign = if increasing { 1.0 } else { -1.0 };
        let (mut lambda, mut mu) = (lambda0, mu0);
        let first = (self.eval)(lambda, mu)?;
        let viol_q = sign * (first.metric - target);
        let viol_p = first.power - self.p_avg;
        let s_lambda = 0.5 * lambda0 / viol_q.abs().max(1e-300);
        let s_mu = 0.5 * mu0 / viol_p.abs().max(1e-300);
        let (mut gq, mut gp) = (viol_q, viol_p);
        for i in 1..=steps {
            let s = 1.0 / (i as f64).sqrt();
            lambda = (lambda - s * s_lambda * gq).max(DUAL_FLOOR);
            mu = (mu + s * s_mu * gp).max(DUAL_FLOOR);
            let pure = (self.eval)(lambda, mu)?;
            gq = sign * (pure.metric - target);
            gp = pure.power - self.p_avg;
        }
        Ok((lambda, mu))
    }
}

/// Result of the two-multiplier search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsiSolution {
    pub mode: CsiMode,
    pub lambda: f64,
    pub mu: f64,
    /// Transmit power of the primary policy.
    pub p: Vec<f64>,
    /// Split of the primary policy.
    pub rho: Vec<f64>,
    pub time_share: Vec<TimeShare>,
    pub achieved_rate: f64,
    pub achieved_q: f64,
    pub achieved_p_avg: f64,
    pub iterations: usize,
    /// Dual bound minus achieved rate; a certificate only in optimal and
    /// long-term modes.
    pub gap_bound: f64,
}

impl CsiSolution {
    pub fn duals(&self) -> DualPair {
        DualPair {
            lambda: self.lambda,
            mu: self.mu,
        }
    }

    /// Average of `f(state, p, rho)` over the time-shared policy.
    pub fn expected<F: Fn(usize, f64, f64) -> f64>(&self, f: F) -> f64 {
        let base = mean((0..self.rho.len()).map(|k| f(k, self.p[k], self.rho[k])));
        let n = self.rho.len() as f64;
        let mut total = base;
        for ts in &self.time_share {
            let delta: f64 = ts
                .changes
                .iter()
                .map(|c| {
                    let k = c.state;
                    f(k, c.p.unwrap_or(self.p[k]), c.rho) - f(k, self.p[k], self.rho[k])
                })
                .sum();
            total += ts.weight * delta / n;
        }
        total
    }
}

pub(crate) fn finish(mode: CsiMode, mix: Mixture, calls: usize, gap_bound: f64) -> CsiSolution {
    let achieved_rate = mix.avg(|x| x.rate);
    let achieved_q = mix.avg(|x| x.q);
    let achieved_p_avg = mix.avg(|x| x.power);
    let (main, time_share) = mix.into_primary();
    CsiSolution {
        mode,
        lambda: main.lambda,
        mu: main.mu.unwrap_or(0.0),
        p: main.p.unwrap_or_default(),
        rho: main.rho,
        time_share,
        achieved_rate,
        achieved_q,
        achieved_p_avg,
        iterations: calls,
        gap_bound,
    }
}

/// `min over parts of D(λ, μ)` minus the achieved rate.
pub(crate) fn rate_gap(mix: &Mixture, q_target: f64, p_avg: f64) -> f64 {
    let rate = mix.avg(|x| x.obj_rate);
    let dual = mix
        .parts
        .iter()
        .map(|(_, x)| x.dual_obj - x.lambda * q_target + x.mu.unwrap_or(0.0) * p_avg)
        .fold(f64::INFINITY, f64::min);
    (dual - rate).max(0.0)
}

/// Scale guess for `μ`: the water level that spends roughly the budget.
pub(crate) fn mu_guess(p_avg: f64) -> f64 {
    1.0 / (p_avg * LN_2)
}

fn with_p_avg(sys: &SystemParams, p_avg: f64) -> Result<SystemParams> {
    SystemParams::new(sys.sigma2, sys.p_fixed, p_avg, sys.p_max, sys.zeta)
}

/// Maximum average harvested energy under the power budgets of `mode`.
pub fn q_max_csi_mode(
    ensemble: &FadingEnsemble,
    mode: CsiMode,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<f64> {
    Ok(q_max_solution(ensemble, mode, eh, sys)?.achieved_q)
}

/// Maximum average harvested energy under both power budgets.
pub fn q_max_csi(ensemble: &FadingEnsemble, eh: &NonlinearEhParams, sys: &SystemParams) -> Result<f64> {
    q_max_csi_mode(ensemble, CsiMode::Optimal, eh, sys)
}

/// Energy-only policy: every state harvests, with power set by `μ` alone.
pub(crate) fn q_max_solution(
    ensemble: &FadingEnsemble,
    mode: CsiMode,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<CsiSolution> {
    let gains = &ensemble.gains;
    let pm = sys.p_max;
    let eval = |_: f64, mu: f64| -> Result<Pure> {
        let allocs: Vec<PowerSplitAlloc> = gains
            .par_iter()
            .map(|&h| {
                let x = match mode {
                    CsiMode::LongtermOnly => case_a_unbounded(h, 1.0, mu, eh)?,
                    _ => case_a(h, 1.0, mu, 0.0, pm, eh)?,
                };
                Ok(PowerSplitAlloc::new(0.0, x))
            })
            .collect::<Result<_>>()?;
        Ok(summarize_allocs(gains, &allocs, 1.0, mu, eh, sys.sigma2))
    };
    let nested = Nested {
        eval,
        p_avg: sys.p_avg,
        tol_p: 1e-12 * sys.p_avg,
        max_iter: 500,
        lambda_ceil: 1e300,
    };
    let mu0 = eh.kappa() * 4.0 / mean(gains.iter().copied()).max(1e-300);
    let (mix, _, calls) = nested.inner(1.0, mu0.min(1e12))?;
    Ok(finish(mode, mix, calls, 0.0))
}

/// Solver settings for the two-multiplier search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiSolver {
    pub mode: CsiMode,
    /// Relative tolerance on both constraints.
    pub tol: f64,
    pub max_iter: usize,
    pub subgradient_steps: usize,
    pub warm_start: Option<DualPair>,
}

impl CsiSolver {
    pub fn new(mode: CsiMode) -> Self {
        Self {
            mode,
            tol: 1e-9,
            max_iter: 500,
            subgradient_steps: 6,
            warm_start: None,
        }
    }

    pub fn solve(
        &self,
        ensemble: &FadingEnsemble,
        q_target: f64,
        p_avg: f64,
        eh: &NonlinearEhParams,
        sys: &SystemParams,
    ) -> Result<CsiSolution> {
        if !(q_target >= 0.0 && q_target.is_finite()) {
            return Err(domain(format!("energy target must be finite and non-negative, got {q_target}")));
        }
        let sys = with_p_avg(sys, p_avg)?;
        let q_sol = q_max_solution(ensemble, self.mode, eh, &sys)?;
        let q_max = q_sol.achieved_q;
        if q_target > q_max * (1.0 + 1e-12) {
            return Err(SwiptError::InfeasibleTarget {
                target: q_target,
                max: q_max,
            });
        }
        let gains = &ensemble.gains;
        let mode = self.mode;
        let nested = Nested {
            eval: |lambda: f64, mu: f64| evaluate(gains, lambda, mu, mode, eh, &sys),
            p_avg,
            tol_p: self.tol * p_avg,
            max_iter: self.max_iter,
            lambda_ceil: 1e300,
        };
        let mu0 = self.warm_start.map(|d| d.mu).unwrap_or_else(|| mu_guess(p_avg));
        if q_target <= 0.0 {
            let (mix, _, calls) = nested.inner(DUAL_FLOOR, mu0)?;
            let gap = rate_gap(&mix, 0.0, p_avg);
            return Ok(finish(mode, mix, calls, gap));
        }
        if q_target >= q_max && q_max > 0.0 {
            return Ok(q_sol);
        }
        let target = q_target;
        let (lambda0, mu0) = match self.warm_start {
            Some(d) => (d.lambda, d.mu),
            None => {
                let (wf, _, _) = nested.inner(DUAL_FLOOR, mu0)?;
                let mu_wf = wf.parts[0].1.mu.unwrap_or(mu0);
                let lambda0 = (wf.avg(|x| x.rate) / q_max).max(DUAL_FLOOR);
                nested.subgradient_seed(target, true, lambda0, mu_wf, self.subgradient_steps)?
            }
        };
        let out = nested.outer(target, true, lambda0, mu0, self.tol * q_max)?;
        let gap = rate_gap(&out.mix, q_target, p_avg);
        Ok(finish(mode, out.mix, out.calls, gap))
    }
}

/// Finds `(λ, μ)` meeting the energy target and the average power budget.
pub fn find_duals(
    ensemble: &FadingEnsemble,
    q_target: f64,
    p_avg: f64,
    mode: CsiMode,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
    tol: f64,
) -> Result<CsiSolution> {
    CsiSolver {
        tol,
        ..CsiSolver::new(mode)
    }
    .solve(ensemble, q_target, p_avg, eh, sys)
}

/// Maximises the average harvested energy subject to an average rate target
/// and both power budgets.
///
/// The energy-max Lagrangian `Q + λ̃R - μ̃P` divided by `λ̃` is the rate-max
/// Lagrangian with `λ = 1/λ̃` and `μ = μ̃/λ̃`, so the per-state solver is
/// shared and only the outer search target changes. The returned duals are
/// in rate-max form.
pub fn solve_energy_max(
    ensemble: &FadingEnsemble,
    rate_target: f64,
    p_avg: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<CsiSolution> {
    solve_energy_max_with(ensemble, rate_target, p_avg, eh, sys, 1e-9)
}

pub(crate) fn solve_energy_max_with(
    ensemble: &FadingEnsemble,
    rate_target: f64,
    p_avg: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
    tol: f64,
) -> Result<CsiSolution> {
    if !(rate_target >= 0.0 && rate_target.is_finite()) {
        return Err(domain(format!("rate target must be finite and non-negative, got {rate_target}")));
    }
    let sys = with_p_avg(sys, p_avg)?;
    let gains = &ensemble.gains;
    let mode = CsiMode::Optimal;
    let nested = Nested {
        eval: |lambda: f64, mu: f64| {
            let mut pure = evaluate(gains, lambda, mu, mode, eh, &sys)?;
            pure.metric = pure.rate;
            Ok(pure)
        },
        p_avg,
        tol_p: tol * p_avg,
        max_iter: 500,
        lambda_ceil: 1e300,
    };
    let (wf, mu_wf, _) = nested.inner(DUAL_FLOOR, mu_guess(p_avg))?;
    let r_max = wf.avg(|x| x.rate);
    if rate_target > r_max * (1.0 + 1e-12) {
        return Err(SwiptError::InfeasibleTarget {
            target: rate_target,
            max: r_max,
        });
    }
    if rate_target >= r_max {
        return Ok(finish(mode, wf, 1, 0.0));
    }
    let q_max = q_max_csi(ensemble, eh, &sys)?;
    let lambda0 = (r_max / q_max.max(1e-300)).max(DUAL_FLOOR);
    let out = nested.outer(rate_target, false, lambda0, mu_wf, tol * r_max)?;
    Ok(finish(mode, out.mix, out.calls, 0.0))
}
