//! Multiplier searches over monotone constraint maps, with time-sharing when
//! the map jumps across the target.

use serde::Serialize;

use crate::error::{Result, SwiptError};

/// Per-state decisions of one deterministic policy plus its ensemble averages.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Pure {
    pub lambda: f64,
    pub mu: Option<f64>,
    pub p: Option<Vec<f64>>,
    pub rho: Vec<f64>,
    /// Average rate.
    pub rate: f64,
    /// Average harvested energy under the logistic model.
    pub q: f64,
    /// Average transmit power.
    pub power: f64,
    /// Quantity the multiplier search drives to its target.
    pub metric: f64,
    /// Average of the maximised per-state objective.
    pub dual_obj: f64,
    /// Average of the rate term inside that objective.
    pub obj_rate: f64,
}

/// A state whose decision differs from the primary policy inside a
/// time-sharing component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateChange {
    pub state: usize,
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

/// A secondary policy used for a fraction `weight` of the blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeShare {
    pub weight: f64,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub changes: Vec<StateChange>,
}

/// Weighted combination of deterministic policies. Weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mixture {
    pub parts: Vec<(f64, Pure)>,
}

impl Mixture {
    pub(crate) fn single(p: Pure) -> Self {
        Self {
            parts: vec![(1.0, p)],
        }
    }

    /// `(1-θ)·lo + θ·hi`, dropping zero-weight parts.
    pub(crate) fn blend(lo: Mixture, hi: Mixture, theta: f64) -> Self {
        let mut parts = Vec::new();
        for (w, p) in lo.parts {
            if w * (1.0 - theta) > 0.0 {
                parts.push((w * (1.0 - theta), p));
            }
        }
        for (w, p) in hi.parts {
            if w * theta > 0.0 {
                parts.push((w * theta, p));
            }
        }
        Self { parts }
    }

    pub(crate) fn avg(&self, f: impl Fn(&Pure) -> f64) -> f64 {
        self.parts.iter().map(|(w, p)| w * f(p)).sum()
    }

    /// Splits into the heaviest policy and its deviations.
    pub(crate) fn into_primary(self) -> (Pure, Vec<TimeShare>) {
        let mut parts = self.parts;
        let main_idx = parts
            .iter()
            .enumerate()
            .fold(0, |best, (i, (w, _))| if *w > parts[best].0 { i } else { best });
        let (_, main) = parts.remove(main_idx);
        let shares = parts
            .into_iter()
            .map(|(w, p)| {
                let mut changes = Vec::new();
                for k in 0..main.rho.len() {
                    let p_k = p.p.as_ref().map(|v| v[k]);
                    let main_p = main.p.as_ref().map(|v| v[k]);
                    if p.rho[k] != main.rho[k] || p_k != main_p {
                        changes.push(StateChange {
                            state: k,
                            rho: p.rho[k],
                            p: p_k,
                        });
                    }
                }
                TimeShare {
                    weight: w,
                    lambda: p.lambda,
                    mu: p.mu,
                    changes,
                }
            })
            .collect();
        (main, shares)
    }
}

pub(crate) struct Probe<T> {
    pub x: f64,
    pub g: f64,
    pub item: T,
}

pub(crate) enum Located<T> {
    Hit(Probe<T>),
    Straddle { lo: Probe<T>, hi: Probe<T> },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SearchOpts {
    pub start: f64,
    pub grow: f64,
    pub floor: f64,
    pub ceil: f64,
    pub tol_abs: f64,
    pub rel_width: f64,
    pub max_iter: usize,
}

impl SearchOpts {
    pub(crate) fn new(start: f64, tol_abs: f64, max_iter: usize) -> Self {
        Self {
            start,
            grow: 10.0,
            floor: 1e-12,
            ceil: 1e300,
            tol_abs,
            rel_width: 1e-13,
            max_iter,
        }
    }
}

/// Searches `x > 0` for `g(x) = target`, where `g` is nondecreasing.
///
/// Returns a probe within `tol_abs` of the target, or the two closest probes
/// straddling it once their abscissae agree to `rel_width`. If `g` already
/// meets the target at the floor, the floor probe is returned as a hit.
pub(crate) fn locate<T, F>(mut eval: F, target: f64, opts: SearchOpts) -> Result<(Located<T>, usize)>
where
    F: FnMut(f64) -> Result<(f64, T)>,
{
    let mut calls = 0usize;
    let mut probe = |x: f64, calls: &mut usize| -> Result<Probe<T>> {
        *calls += 1;
        let (g, item) = eval(x)?;
        Ok(Probe { x, g, item })
    };
    let hit = |p: &Probe<T>| (p.g - target).abs() <= opts.tol_abs;

    let first = probe(opts.start.clamp(opts.floor, opts.ceil), &mut calls)?;
    if hit(&first) {
        return Ok((Located::Hit(first), calls));
    }
    let (mut lo, mut hi);
    if first.g < target {
        lo = first;
        loop {
            if lo.x >= opts.ceil {
                return Err(SwiptError::NonConvergence(calls));
            }
            let p = probe((lo.x * opts.grow).min(opts.ceil), &mut calls)?;
            if hit(&p) {
                return Ok((Located::Hit(p), calls));
            }
            if p.g > target {
                hi = p;
                break;
            }
            lo = p;
            if calls > opts.max_iter {
                return Err(SwiptError::NonConvergence(calls));
            }
        }
    } else {
        hi = first;
        loop {
            if hi.x <= opts.floor {
                return Ok((Located::Hit(hi), calls));
            }
            let p = probe((hi.x / opts.grow).max(opts.floor), &mut calls)?;
            if hit(&p) {
                return Ok((Located::Hit(p), calls));
            }
            if p.g < target {
                lo = p;
                break;
            }
            hi = p;
            if calls > opts.max_iter {
                return Err(SwiptError::NonConvergence(calls));
            }
        }
    }

    // ITP iteration (interpolate, truncate, project) in log-abscissa: never
    // more probes than bisection plus one, superlinear on smooth pieces. The
    // interpolant is the secant through the two latest probes when it falls
    // inside the bracket, which copes with an end sitting across a jump;
    // otherwise regula falsi on the bracket ends.
    let half_eps = 0.5 * opts.rel_width.ln_1p();
    let width0 = (hi.x / lo.x).ln();
    let n_max = (width0 / (2.0 * half_eps)).log2().ceil().max(0.0) as i32 + 1;
    let k1 = 0.2 / width0;
    let mut recent = [(lo.x.ln(), lo.g - target), (hi.x.ln(), hi.g - target)];
    let mut j = 0i32;
    loop {
        let (u_lo, u_hi) = (lo.x.ln(), hi.x.ln());
        if hi.x / lo.x - 1.0 <= opts.rel_width {
            return Ok((Located::Straddle { lo, hi }, calls));
        }
        if calls >= opts.max_iter {
            return Err(SwiptError::NonConvergence(calls));
        }
        let width = u_hi - u_lo;
        let mid = 0.5 * (u_lo + u_hi);
        let inside = |u: f64| u > u_lo && u < u_hi;
        let [(u1, w1), (u2, w2)] = recent;
        let secant = u2 - w2 * (u2 - u1) / (w2 - w1);
        let (w_lo, w_hi) = (lo.g - target, hi.g - target);
        let falsi = (u_lo * w_hi - u_hi * w_lo) / (w_hi - w_lo);
        let interp = if inside(secant) {
            secant
        } else if inside(falsi) {
            falsi
        } else {
            mid
        };
        let sigma = (mid - interp).signum();
        let delta = k1 * width * width;
        let truncated = if delta <= (mid - interp).abs() { interp + sigma * delta } else { mid };
        let radius = (half_eps * 2f64.powi(n_max - j) - 0.5 * width).max(0.0);
        let u = if (truncated - mid).abs() <= radius { truncated } else { mid - sigma * radius };
        let mut x = u.exp();
        if !(x > lo.x && x < hi.x) {
            x = (lo.x * hi.x).sqrt();
            if !(x > lo.x && x < hi.x) {
                return Ok((Located::Straddle { lo, hi }, calls));
            }
        }
        let p = probe(x, &mut calls)?;
        j += 1;
        if hit(&p) {
            return Ok((Located::Hit(p), calls));
        }
        recent = [recent[1], (x.ln(), p.g - target)];
        if p.g < target {
            lo = p;
        } else {
            hi = p;
        }
    }
}

/// Weight on the upper probe so the blend meets `target` exactly.
pub(crate) fn share_weight(g_lo: f64, g_hi: f64, target: f64) -> f64 {
    if g_hi <= g_lo {
        return 0.5;
    }
    ((target - g_lo) / (g_hi - g_lo)).clamp(0.0, 1.0)
}

/// Resolves a search outcome into a mixture whose metric equals the target.
pub(crate) fn resolve(located: Located<Mixture>, target: f64) -> (Mixture, Option<(f64, f64)>) {
    match located {
        Located::Hit(p) => (p.item, None),
        Located::Straddle { lo, hi } => {
            let theta = share_weight(lo.g, hi.g, target);
            let xs = (lo.x, hi.x);
            (Mixture::blend(lo.item, hi.item, theta), Some(xs))
        }
    }
}
