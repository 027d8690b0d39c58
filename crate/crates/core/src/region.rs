//! Rate-energy region sweeps, their endpoints, serialization and the
//! brute-force oracle used to check the solvers on small ensembles.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    binary_restricted_csi, linear_dps_csi, linear_dps_csir, mode_switch_csir, q_max_linear_csi, q_max_linear_csir,
    greedy_peak_allocation, BaselineSolution,
};
use crate::channel::FadingEnsemble;
use crate::csi::{q_max_solution, CsiMode, CsiSolution, CsiSolver, DualPair};
use crate::csir::{q_max_at, CsirMode, CsirSolution, CsirSolver};
use crate::error::{domain, Result, SwiptError};
use crate::model::{q_rx, rate_rx};
use crate::numeric::mean;
use crate::params::{NonlinearEhParams, SystemParams};

/// One achieved pair of average rate and average harvested energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct REPoint {
    /// Requested energy threshold.
    pub q_target: f64,
    /// Average rate, bits/s/Hz.
    pub rate: f64,
    /// Average harvested energy under the logistic model, J.
    pub energy: f64,
}

/// Which side knows the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Csir,
    Csi,
}

impl Case {
    pub fn label(self) -> &'static str {
        match self {
            Case::Csir => "csir",
            Case::Csi => "csi",
        }
    }

    pub fn parse(s: &str) -> Option<Case> {
        match s {
            "csir" => Some(Case::Csir),
            "csi" => Some(Case::Csi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    CsirOptimal,
    CsirSuboptimal,
    CsiOptimal,
    CsiSuboptimal,
    CsiLongtermOnly,
    LinearDpsCsir,
    LinearDpsCsi,
    ModeSwitchCsir,
    BinaryRestrictedCsi,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::CsirOptimal,
        Scheme::CsirSuboptimal,
        Scheme::CsiOptimal,
        Scheme::CsiSuboptimal,
        Scheme::CsiLongtermOnly,
        Scheme::LinearDpsCsir,
        Scheme::LinearDpsCsi,
        Scheme::ModeSwitchCsir,
        Scheme::BinaryRestrictedCsi,
    ];

    pub fn case(self) -> Case {
        match self {
            Scheme::CsirOptimal | Scheme::CsirSuboptimal | Scheme::LinearDpsCsir | Scheme::ModeSwitchCsir => Case::Csir,
            _ => Case::Csi,
        }
    }

    /// Short name used in the `scheme` CSV column.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::CsirOptimal | Scheme::CsiOptimal => "optimal",
            Scheme::CsirSuboptimal | Scheme::CsiSuboptimal => "suboptimal",
            Scheme::CsiLongtermOnly => "longterm",
            Scheme::LinearDpsCsir | Scheme::LinearDpsCsi => "linear",
            Scheme::ModeSwitchCsir => "modeswitch",
            Scheme::BinaryRestrictedCsi => "binary",
        }
    }

    /// Inverse of `(label, case)`.
    pub fn parse(label: &str, case: Case) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.label() == label && s.case() == case)
    }

    /// Unique name, e.g. `csir_optimal`.
    pub fn name(self) -> String {
        format!("{}_{}", self.case().label(), self.label())
    }
}

/// Solver diagnostics for one swept point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDiag {
    pub q_target: f64,
    pub lambda: f64,
    pub mu: Option<f64>,
    pub iterations: usize,
    pub gap_bound: Option<f64>,
    pub achieved_p_avg: Option<f64>,
    /// Number of secondary policies mixed in.
    pub time_share_parts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub q_target: f64,
    pub error: String,
}

/// A swept rate-energy region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RERegion {
    pub scheme: Scheme,
    pub ensemble_meta: String,
    /// Largest reachable threshold for this scheme.
    pub q_max: f64,
    /// Ordered by strictly increasing `q_target`; the last one is the
    /// analytic endpoint at `q_max`.
    pub points: Vec<REPoint>,
    pub diagnostics: Vec<PointDiag>,
    pub failures: Vec<PointFailure>,
}

/// Warm start carried between neighbouring sweep points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warm {
    Lambda(f64),
    Duals(DualPair),
}

/// Solution of any scheme at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SchemeSolution {
    Csir(CsirSolution),
    Csi(CsiSolution),
    Baseline(BaselineSolution),
}

impl SchemeSolution {
    pub fn point(&self, q_target: f64) -> REPoint {
        let (rate, energy) = match self {
            SchemeSolution::Csir(s) => (s.achieved_rate, s.achieved_q),
            SchemeSolution::Csi(s) => (s.achieved_rate, s.achieved_q),
            SchemeSolution::Baseline(s) => (s.achieved_rate, s.achieved_q),
        };
        REPoint { q_target, rate, energy }
    }

    pub fn diag(&self, q_target: f64) -> PointDiag {
        match self {
            SchemeSolution::Csir(s) => PointDiag {
                q_target,
                lambda: s.lambda,
                mu: None,
                iterations: s.iterations,
                gap_bound: Some(s.gap_bound),
                achieved_p_avg: None,
                time_share_parts: s.time_share.len(),
            },
            SchemeSolution::Csi(s) => PointDiag {
                q_target,
                lambda: s.lambda,
                mu: Some(s.mu),
                iterations: s.iterations,
                gap_bound: Some(s.gap_bound),
                achieved_p_avg: Some(s.achieved_p_avg),
                time_share_parts: s.time_share.len(),
            },
            SchemeSolution::Baseline(s) => PointDiag {
                q_target,
                lambda: s.lambda,
                mu: s.mu,
                iterations: s.iterations,
                gap_bound: None,
                achieved_p_avg: Some(s.achieved_p_avg),
                time_share_parts: s.time_share.len(),
            },
        }
    }

    fn warm(&self) -> Option<Warm> {
        match self {
            SchemeSolution::Csir(s) => Some(Warm::Lambda(s.lambda)),
            SchemeSolution::Csi(s) => Some(Warm::Duals(s.duals())),
            SchemeSolution::Baseline(_) => None,
        }
    }
}

/// Default tolerance of the dual searches used by sweeps.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Solves `scheme` at one threshold. Power-controlled schemes use
/// `sys.p_avg`.
pub fn solve_point(
    scheme: Scheme,
    ensemble: &FadingEnsemble,
    q_target: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
    warm: Option<Warm>,
) -> Result<SchemeSolution> {
    solve_point_with_tol(scheme, ensemble, q_target, eh, sys, warm, DEFAULT_TOL)
}

/// [`solve_point`] with an explicit dual-search tolerance. The baselines
/// keep their own tolerances.
pub fn solve_point_with_tol(
    scheme: Scheme,
    ensemble: &FadingEnsemble,
    q_target: f64,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
    warm: Option<Warm>,
    tol: f64,
) -> Result<SchemeSolution> {
    let csir = |mode| {
        let solver = CsirSolver {
            warm_start: match warm {
                Some(Warm::Lambda(l)) => Some(l),
                _ => None,
            },
            tol,
            ..CsirSolver::new(mode)
        };
        solver.solve(ensemble, q_target, eh, sys).map(SchemeSolution::Csir)
    };
    let csi = |mode| {
        let solver = CsiSolver {
            warm_start: match warm {
                Some(Warm::Duals(d)) => Some(d),
                _ => None,
            },
            tol,
            ..CsiSolver::new(mode)
        };
        solver.solve(ensemble, q_target, sys.p_avg, eh, sys).map(SchemeSolution::Csi)
    };
    match scheme {
        Scheme::CsirOptimal => csir(CsirMode::Optimal),
        Scheme::CsirSuboptimal => csir(CsirMode::Suboptimal),
        Scheme::CsiOptimal => csi(CsiMode::Optimal),
        Scheme::CsiSuboptimal => csi(CsiMode::Suboptimal),
        Scheme::CsiLongtermOnly => csi(CsiMode::LongtermOnly),
        Scheme::LinearDpsCsir => linear_dps_csir(ensemble, q_target, eh, sys).map(SchemeSolution::Baseline),
        Scheme::LinearDpsCsi => linear_dps_csi(ensemble, q_target, sys.p_avg, eh, sys).map(SchemeSolution::Baseline),
        Scheme::ModeSwitchCsir => mode_switch_csir(ensemble, q_target, eh, sys).map(SchemeSolution::Baseline),
        Scheme::BinaryRestrictedCsi => {
            binary_restricted_csi(ensemble, q_target, sys.p_avg, eh, sys).map(SchemeSolution::Baseline)
        }
    }
}

/// Largest threshold the scheme accepts. For the linear schemes this is
/// measured with the linear model they are tuned for.
pub fn scheme_q_max(scheme: Scheme, ensemble: &FadingEnsemble, eh: &NonlinearEhParams, sys: &SystemParams) -> Result<f64> {
    Ok(match scheme {
        Scheme::CsirOptimal | Scheme::CsirSuboptimal | Scheme::ModeSwitchCsir => q_max_csir(ensemble, eh, sys),
        Scheme::CsiOptimal | Scheme::CsiSuboptimal | Scheme::BinaryRestrictedCsi => q_max_csi(ensemble, eh, sys)?,
        Scheme::CsiLongtermOnly => crate::csi::q_max_csi_mode(ensemble, CsiMode::LongtermOnly, eh, sys)?,
        Scheme::LinearDpsCsir => q_max_linear_csir(ensemble, eh, sys),
        Scheme::LinearDpsCsi => q_max_linear_csi(ensemble, eh, sys),
    })
}

/// The all-harvest end of the region, computed directly.
pub fn scheme_endpoint(scheme: Scheme, ensemble: &FadingEnsemble, eh: &NonlinearEhParams, sys: &SystemParams) -> Result<REPoint> {
    let q_top = scheme_q_max(scheme, ensemble, eh, sys)?;
    let energy = match scheme {
        Scheme::CsiOptimal | Scheme::CsiSuboptimal | Scheme::BinaryRestrictedCsi => q_top,
        Scheme::CsiLongtermOnly => q_top,
        Scheme::LinearDpsCsir => q_max_csir(ensemble, eh, sys),
        Scheme::LinearDpsCsi => {
            let p = greedy_peak_allocation(&ensemble.gains, sys);
            mean(ensemble.gains.iter().zip(&p).map(|(h, p)| q_rx(h * p, eh)))
        }
        _ => q_top,
    };
    Ok(REPoint {
        q_target: q_top,
        rate: 0.0,
        energy,
    })
}

/// Maximum average energy with fixed power: every state harvests.
pub fn q_max_csir(ensemble: &FadingEnsemble, eh: &NonlinearEhParams, sys: &SystemParams) -> f64 {
    q_max_at(ensemble, sys.p_fixed, eh)
}

/// Maximum average energy under both power budgets.
pub fn q_max_csi(ensemble: &FadingEnsemble, eh: &NonlinearEhParams, sys: &SystemParams) -> Result<f64> {
    Ok(q_max_solution(ensemble, CsiMode::Optimal, eh, sys)?.achieved_q)
}

/// Top grid point as a fraction of the maximum threshold.
pub const GRID_TOP: f64 = 1.0 - 1e-6;

/// Thresholds `q_max·GRID_TOP·k/(n-1)` for `k = 0..n`.
pub fn q_grid(q_max: f64, n_points: usize) -> Vec<f64> {
    let top = q_max * GRID_TOP;
    (0..n_points)
        .map(|k| if k + 1 == n_points { top } else { top * k as f64 / (n_points - 1) as f64 })
        .collect()
}

/// Sweeps a region over `n_points` thresholds and appends the analytic
/// endpoint. Failed points are recorded and skipped.
pub fn sweep_region(
    scheme: Scheme,
    ensemble: &FadingEnsemble,
    n_points: usize,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Result<RERegion> {
    sweep_region_with_tol(scheme, ensemble, n_points, eh, sys, DEFAULT_TOL)
}

/// [`sweep_region`] with an explicit dual-search tolerance.
pub fn sweep_region_with_tol(
    scheme: Scheme,
    ensemble: &FadingEnsemble,
    n_points: usize,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
    tol: f64,
) -> Result<RERegion> {
    if n_points < 2 {
        return Err(domain(format!("need at least two sweep points, got {n_points}")));
    }
    let q_max = scheme_q_max(scheme, ensemble, eh, sys)?;
    let mut region = RERegion {
        scheme,
        ensemble_meta: ensemble.meta.clone(),
        q_max,
        points: Vec::with_capacity(n_points + 1),
        diagnostics: Vec::with_capacity(n_points),
        failures: Vec::new(),
    };
    let mut warm = None;
    for q in q_grid(q_max, n_points) {
        match solve_point_with_tol(scheme, ensemble, q, eh, sys, warm, tol) {
            Ok(sol) => {
                region.points.push(sol.point(q));
                region.diagnostics.push(sol.diag(q));
                warm = sol.warm().or(warm);
            }
            Err(e) => region.failures.push(PointFailure {
                q_target: q,
                error: e.to_string(),
            }),
        }
    }
    region.points.push(scheme_endpoint(scheme, ensemble, eh, sys)?);
    Ok(region)
}

/// One row of the region CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub q_target: f64,
    pub rate: f64,
    pub energy: f64,
    pub scheme: String,
    pub mode: String,
}

/// Writes `q_target,rate,energy,scheme,mode` rows for every region.
/// Floats use the shortest representation that parses back to the same bits.
pub fn write_regions_csv<W: Write>(regions: &[RERegion], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for region in regions {
        for p in &region.points {
            out.serialize(CsvRow {
                q_target: p.q_target,
                rate: p.rate,
                energy: p.energy,
                scheme: region.scheme.label().to_string(),
                mode: region.scheme.case().label().to_string(),
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_regions_csv<R: Read>(r: R) -> Result<Vec<CsvRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for row in rd.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn write_regions_json<W: Write>(regions: &[RERegion], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, regions).map_err(|e| SwiptError::Io(e.to_string()))
}

pub fn read_regions_json<R: Read>(r: R) -> Result<Vec<RERegion>> {
    serde_json::from_reader(r).map_err(|e| SwiptError::Io(e.to_string()))
}

/// Largest ensemble the oracle accepts.
pub const ORACLE_MAX_STATES: usize = 256;

/// Grid sizes of the brute-force oracle. The averaged grid policy is
/// monotone in each multiplier, so the multiplier grids only need to be
/// coarse enough to bracket; the log-scale bisection supplies precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleResolution {
    /// Split grid step (fixed-power case).
    pub rho_step: f64,
    /// Power grid step as a fraction of `P_max`.
    pub p_step_frac: f64,
    /// Geometric grid size for `λ`.
    pub lambda_points: usize,
    /// Geometric grid size for `μ`.
    pub mu_points: usize,
    /// Log-scale bisections inside the bracketing grid cell.
    pub zoom_steps: usize,
}

impl OracleResolution {
    pub fn for_case(case: Case) -> Self {
        match case {
            Case::Csir => Self {
                rho_step: 1e-4,
                p_step_frac: 5e-4,
                lambda_points: 17,
                mu_points: 15,
                zoom_steps: 60,
            },
            Case::Csi => Self {
                rho_step: 1e-4,
                p_step_frac: 5e-4,
                lambda_points: 17,
                mu_points: 15,
                zoom_steps: 60,
            },
        }
    }
}

/// Averages of one grid policy.
#[derive(Debug, Clone, Copy, PartialEq)]
struct GridEval {
    rate: f64,
    q: f64,
    power: f64,
}

impl GridEval {
    fn mix(a: GridEval, b: GridEval, theta: f64) -> GridEval {
        GridEval {
            rate: (1.0 - theta) * a.rate + theta * b.rate,
            q: (1.0 - theta) * a.q + theta * b.q,
            power: (1.0 - theta) * a.power + theta * b.power,
        }
    }
}

/// Fixed-power oracle: exhaustive split grid per state.
struct CsirOracle {
    r: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
}

impl CsirOracle {
    fn new(gains: &[f64], step: f64, eh: &NonlinearEhParams, sys: &SystemParams) -> Self {
        let m = (1.0 / step).ceil() as usize;
        let grid: Vec<f64> = (0..=m).map(|j| j as f64 / m as f64).collect();
        let p = sys.p_fixed;
        let r = gains.iter().map(|h| grid.iter().map(|rho| rate_rx((1.0 - rho) * h * p, sys.sigma2)).collect()).collect();
        let q = gains.iter().map(|h| grid.iter().map(|rho| q_rx(rho * h * p, eh)).collect()).collect();
        Self { r, q }
    }

    fn eval(&self, lambda: f64) -> GridEval {
        let picks: Vec<(f64, f64)> = self
            .r
            .par_iter()
            .zip(&self.q)
            .map(|(r, q)| {
                let mut best = (r[0] + lambda * q[0], 0);
                for j in 1..r.len() {
                    let v = r[j] + lambda * q[j];
                    if v > best.0 {
                        best = (v, j);
                    }
                }
                (r[best.1], q[best.1])
            })
            .collect();
        GridEval {
            rate: mean(picks.iter().map(|x| x.0)),
            q: mean(picks.iter().map(|x| x.1)),
            power: 0.0,
        }
    }
}

/// Joint power oracle: exhaustive grid over `(P_ID, P_EH)` with
/// `P_ID + P_EH ≤ P_max`.
struct CsiOracle {
    delta: f64,
    r: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
}

impl CsiOracle {
    fn new(gains: &[f64], step_frac: f64, eh: &NonlinearEhParams, sys: &SystemParams) -> Self {
        let m = (1.0 / step_frac).ceil() as usize;
        let delta = sys.p_max / m as f64;
        let r = gains.iter().map(|h| (0..=m).map(|i| rate_rx(h * delta * i as f64, sys.sigma2)).collect()).collect();
        let q = gains.iter().map(|h| (0..=m).map(|j| q_rx(h * delta * j as f64, eh)).collect()).collect();
        Self { delta, r, q }
    }

    fn eval(&self, lambda: f64, mu: f64) -> GridEval {
        let d = self.delta;
        let picks: Vec<(f64, f64, f64)> = self
            .r
            .par_iter()
            .zip(&self.q)
            .map(|(r, q)| {
                let m = r.len() - 1;
                // Best decoder power among the first i grid points.
                let mut prefix = Vec::with_capacity(m + 1);
                let mut best = (f64::NEG_INFINITY, 0usize);
                for (i, ri) in r.iter().enumerate() {
                    let v = ri - mu * d * i as f64;
                    if v > best.0 {
                        best = (v, i);
                    }
                    prefix.push(best);
                }
                let mut top = (f64::NEG_INFINITY, 0usize, 0usize);
                for j in 0..=m {
                    let (a, i) = prefix[m - j];
                    let v = lambda * q[j] - mu * d * j as f64 + a;
                    if v > top.0 {
                        top = (v, i, j);
                    }
                }
                let (_, i, j) = top;
                (r[i], q[j], d * (i + j) as f64)
            })
            .collect();
        GridEval {
            rate: mean(picks.iter().map(|x| x.0)),
            q: mean(picks.iter().map(|x| x.1)),
            power: mean(picks.iter().map(|x| x.2)),
        }
    }

    /// Time-shared pair of grid policies meeting `E[P] = p_avg` at fixed `λ`.
    fn at_budget(&self, lambda: f64, p_avg: f64, mu_grid: &[f64], zoom: usize) -> GridEval {
        // Power falls as μ grows.
        let evals: Vec<GridEval> = mu_grid.iter().map(|&mu| self.eval(lambda, mu)).collect();
        if evals[0].power <= p_avg {
            return evals[0];
        }
        let Some(k) = evals.iter().position(|e| e.power <= p_avg) else {
            return *evals.last().unwrap();
        };
        let (mut lo, mut hi) = ((mu_grid[k - 1], evals[k - 1]), (mu_grid[k], evals[k]));
        for _ in 0..zoom {
            let mid = (lo.0 * hi.0).sqrt();
            let e = self.eval(lambda, mid);
            if e.power > p_avg {
                lo = (mid, e);
            } else {
                hi = (mid, e);
            }
        }
        let theta = if lo.1.power > hi.1.power { (lo.1.power - p_avg) / (lo.1.power - hi.1.power) } else { 1.0 };
        GridEval::mix(lo.1, hi.1, theta)
    }
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (step * i as f64).exp()).collect()
}

/// Finds the `λ` cell whose energies straddle the target, zooms into it and
/// time-shares its two ends. `lambdas` starts with zero.
fn bracket_lambda<F: Fn(f64) -> GridEval>(eval: F, lambdas: &[f64], target: f64, zoom: usize) -> Result<GridEval> {
    let evals: Vec<GridEval> = lambdas.iter().map(|&l| eval(l)).collect();
    if evals[0].q >= target {
        return Ok(evals[0]);
    }
    let Some(k) = evals.iter().position(|e| e.q >= target) else {
        return Err(SwiptError::NonConvergence(lambdas.len()));
    };
    let (mut lo, mut hi) = ((lambdas[k - 1], evals[k - 1]), (lambdas[k], evals[k]));
    for _ in 0..zoom {
        let mid = if lo.0 > 0.0 { (lo.0 * hi.0).sqrt() } else { 0.5 * hi.0 };
        let e = eval(mid);
        if e.q < target {
            lo = (mid, e);
        } else {
            hi = (mid, e);
        }
    }
    let theta = if hi.1.q > lo.1.q { (target - lo.1.q) / (hi.1.q - lo.1.q) } else { 1.0 };
    Ok(GridEval::mix(lo.1, hi.1, theta))
}

/// Brute-force rate at one threshold: geometric multiplier grids, exhaustive
/// per-state grids, bisection inside the bracketing cell and time-sharing of
/// its two ends. Uses no closed forms from the solvers.
pub fn oracle_solve(
    ensemble: &FadingEnsemble,
    q_target: f64,
    case: Case,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
    res: &OracleResolution,
) -> Result<REPoint> {
    Ok(oracle_sweep(ensemble, &[q_target], case, eh, sys, res)?.remove(0))
}

/// [`oracle_solve`] for several thresholds, sharing the per-state grids.
pub fn oracle_sweep(
    ensemble: &FadingEnsemble,
    q_targets: &[f64],
    case: Case,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
    res: &OracleResolution,
) -> Result<Vec<REPoint>> {
    let n = ensemble.len();
    if n > ORACLE_MAX_STATES {
        return Err(SwiptError::GuardrailExceeded {
            n,
            limit: ORACLE_MAX_STATES,
        });
    }
    if res.lambda_points < 2 || res.mu_points < 2 {
        return Err(domain("oracle grids need at least two points"));
    }
    let gains = &ensemble.gains;
    let r_scale = mean(gains.iter().map(|h| rate_rx(h * sys.p_max.max(sys.p_fixed), sys.sigma2))).max(1e-12);
    let lambda_scale = r_scale / eh.q_sat();
    let mut lambdas = vec![0.0];
    lambdas.extend(geometric(lambda_scale * 1e-6, lambda_scale * 1e10, res.lambda_points));
    let point = |e: GridEval, q_target: f64| REPoint {
        q_target,
        rate: e.rate,
        energy: e.q,
    };
    match case {
        Case::Csir => {
            let oracle = CsirOracle::new(gains, res.rho_step, eh, sys);
            q_targets
                .iter()
                .map(|&q| bracket_lambda(|l| oracle.eval(l), &lambdas, q, res.zoom_steps).map(|e| point(e, q)))
                .collect()
        }
        Case::Csi => {
            let oracle = CsiOracle::new(gains, res.p_step_frac, eh, sys);
            let mu_scale = 1.0 / sys.p_avg;
            let mus = geometric(mu_scale * 1e-6, mu_scale * 1e8, res.mu_points);
            q_targets
                .iter()
                .map(|&q| {
                    bracket_lambda(|l| oracle.at_budget(l, sys.p_avg, &mus, res.zoom_steps), &lambdas, q, res.zoom_steps)
                        .map(|e| point(e, q))
                })
                .collect()
        }
    }
}
