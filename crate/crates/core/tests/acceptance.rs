//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Every tolerance is pinned below.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{exact_sum, setup, water_filling_rate, P_AVG, P_MAX};
use swipt_core::csi::{find_duals, q_max_csi, solve_energy_max, CsiSolver};
use swipt_core::csir::{find_lambda, q_max_csir, CsirSolver};
use swipt_core::model::{dl_drho, q_nonlinear, rate};
use swipt_core::region::{oracle_sweep, sweep_region, write_regions_csv, Case, OracleResolution, Scheme};
use swipt_core::{CsiMode, CsiSolution, CsirMode, CsirSolution, FadingEnsemble, NonlinearEhParams, SystemParams};

const ORACLE_REL_TOL: f64 = 1e-4;
const KKT_TOL: f64 = 1e-8;
const FD_EPS: f64 = 1e-7;
const FD_REL_TOL: f64 = 1e-5;
const CONSTRAINT_TOL: f64 = 1e-4;
const LOW_SNR_RATIO: f64 = 0.999;
const DOMINANCE_SLACK: f64 = 1e-9;
const SUM_ULPS: f64 = 2.0;
const WATER_FILL_REL_TOL: f64 = 1e-6;
const GAP_REL_TOL: f64 = 1e-3;
const SWEEP_SECONDS: f64 = 60.0;
const FRONTIER_REL_TOL: f64 = 1e-3;
/// Solver tolerance used when one scheme is re-solved at another scheme's
/// achieved energy, so the comparison is not limited by the search residual.
const TIGHT_TOL: f64 = 1e-12;

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Residuals of every returned solution, checked by criterion 5.
#[derive(Default)]
struct Ledger {
    worst_q: f64,
    worst_p: f64,
    count: usize,
}

impl Ledger {
    fn csir(&mut self, sol: &CsirSolution, q: f64, q_max: f64) {
        self.worst_q = self.worst_q.max((sol.achieved_q - q).abs() / q_max);
        self.count += 1;
    }

    fn csi(&mut self, sol: &CsiSolution, q: f64, q_max: f64, p_avg: f64) {
        self.worst_q = self.worst_q.max((sol.achieved_q - q).abs() / q_max);
        self.worst_p = self.worst_p.max((sol.achieved_p_avg - p_avg).abs() / p_avg);
        self.count += 1;
    }
}

/// Largest `|∂L/∂ρ|` over interior splits of a fixed-power solution.
fn csir_kkt(sol: &CsirSolution, ens: &FadingEnsemble, eh: &NonlinearEhParams, sys: &SystemParams) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut n = 0;
    let mut check = |k: usize, rho: f64, lambda: f64| {
        if rho > 0.0 && rho < 1.0 {
            let d = dl_drho(ens.gains[k], sol.p, rho, lambda, eh, sys).unwrap();
            worst = worst.max(d.abs());
            n += 1;
        }
    };
    for (k, &r) in sol.rho.iter().enumerate() {
        check(k, r, sol.lambda);
    }
    for ts in &sol.time_share {
        for c in &ts.changes {
            check(c.state, c.rho, ts.lambda);
        }
    }
    (worst, n)
}

/// Logistic slope `Ψ(1-Ψ)` at received power `x`, from the definition.
fn slope(x: f64, eh: &NonlinearEhParams) -> f64 {
    let u = eh.a * (x - eh.b);
    let s = 1.0 / (1.0 + (-u).exp());
    s * (1.0 - s)
}

/// Stationarity residual of the harvesting power of one state, for whichever
/// sub-problem it is interior to. `None` when it sits on a boundary.
fn csi_state_residual(
    h: f64,
    p: f64,
    rho: f64,
    lambda: f64,
    mu: f64,
    mode: CsiMode,
    eh: &NonlinearEhParams,
    sys: &SystemParams,
) -> Option<f64> {
    let p_eh = rho * p;
    if h <= 0.0 || p_eh <= 0.0 {
        return None;
    }
    let kappa = (1.0 - eh.omega) / (eh.p_s * eh.t_block * eh.a);
    let mu_n = mu * std::f64::consts::LN_2;
    let wf = if h > mu_n * sys.sigma2 { 1.0 / mu_n - sys.sigma2 / h } else { 0.0 };
    let a_residual = lambda * h * slope(h * p_eh, eh) / kappa - mu;
    if mode == CsiMode::LongtermOnly {
        return Some(a_residual);
    }
    let p_th = if wf > 0.0 { (sys.p_max - wf).max(0.0) } else { sys.p_max };
    let margin = 1e-9 * sys.p_max;
    if p_eh < p_th - margin {
        return Some(a_residual);
    }
    if p_eh > p_th + margin && p_eh < sys.p_max - margin {
        let b = lambda * h * slope(h * p_eh, eh) / kappa
            - h / (std::f64::consts::LN_2 * (h * (sys.p_max - p_eh) + sys.sigma2));
        return Some(b);
    }
    None
}

fn csi_kkt(sol: &CsiSolution, ens: &FadingEnsemble, eh: &NonlinearEhParams, sys: &SystemParams) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut n = 0;
    let mut check = |k: usize, p: f64, rho: f64, lambda: f64, mu: f64| {
        if let Some(r) = csi_state_residual(ens.gains[k], p, rho, lambda, mu, sol.mode, eh, sys) {
            worst = worst.max(r.abs());
            n += 1;
        }
    };
    for k in 0..sol.rho.len() {
        check(k, sol.p[k], sol.rho[k], sol.lambda, sol.mu);
    }
    for ts in &sol.time_share {
        for c in &ts.changes {
            check(c.state, c.p.unwrap_or(sol.p[c.state]), c.rho, ts.lambda, ts.mu.unwrap_or(sol.mu));
        }
    }
    (worst, n)
}

fn grid(q_max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| q_max * k as f64 / n as f64).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

struct Kkt {
    worst: f64,
    checked: usize,
}

impl Kkt {
    fn add(&mut self, (w, n): (f64, usize)) {
        self.worst = self.worst.max(w);
        self.checked += n;
    }
}

fn criterion_1(ledger: &mut Ledger, kkt: &mut Kkt) -> Outcome {
    let (ens, eh, sys) = setup(64, 10.0, SEED);
    let q_max = q_max_csir(&ens, &eh, &sys);
    let qs = grid(q_max, 10);
    let start = Instant::now();
    let oracle = oracle_sweep(&ens, &qs, Case::Csir, &eh, &sys, &OracleResolution::for_case(Case::Csir)).unwrap();
    let oracle_secs = start.elapsed().as_secs_f64();
    let mut worst = 0.0f64;
    for (q, o) in qs.iter().zip(&oracle) {
        let sol = find_lambda(&ens, *q, CsirMode::Optimal, &eh, &sys, 1e-9).unwrap();
        ledger.csir(&sol, *q, q_max);
        kkt.add(csir_kkt(&sol, &ens, &eh, &sys));
        worst = worst.max(rel(sol.achieved_rate, o.rate));
    }
    outcome(
        worst <= ORACLE_REL_TOL && oracle_secs < 300.0,
        format!("max rel rate deviation {worst:.3e} (tol {ORACLE_REL_TOL:e}), oracle {oracle_secs:.1}s (limit 300s)"),
    )
}

fn criterion_2(ledger: &mut Ledger, kkt: &mut Kkt) -> Outcome {
    let (ens, eh, sys) = setup(64, 10.0, SEED);
    let q_max = q_max_csi(&ens, &eh, &sys).unwrap();
    let qs = grid(q_max, 8);
    let start = Instant::now();
    let oracle = oracle_sweep(&ens, &qs, Case::Csi, &eh, &sys, &OracleResolution::for_case(Case::Csi)).unwrap();
    let oracle_secs = start.elapsed().as_secs_f64();
    let mut worst = 0.0f64;
    for (q, o) in qs.iter().zip(&oracle) {
        let sol = find_duals(&ens, *q, P_AVG, CsiMode::Optimal, &eh, &sys, 1e-9).unwrap();
        ledger.csi(&sol, *q, q_max, P_AVG);
        kkt.add(csi_kkt(&sol, &ens, &eh, &sys));
        worst = worst.max(rel(sol.achieved_rate, o.rate));
    }
    outcome(
        worst <= ORACLE_REL_TOL && oracle_secs < 1200.0,
        format!("max rel rate deviation {worst:.3e} (tol {ORACLE_REL_TOL:e}), oracle {oracle_secs:.1}s (limit 1200s)"),
    )
}

fn criterion_3(kkt: &mut Kkt) -> Outcome {
    // Solutions from criteria 1, 2 and 9 are already included; add the
    // long-term mode and a second SNR.
    let (ens, eh, sys) = setup(256, 20.0, SEED + 3);
    let q_max = q_max_csir(&ens, &eh, &sys);
    for q in grid(q_max, 5) {
        let sol = find_lambda(&ens, q, CsirMode::Optimal, &eh, &sys, 1e-9).unwrap();
        kkt.add(csir_kkt(&sol, &ens, &eh, &sys));
    }
    for mode in [CsiMode::Optimal, CsiMode::LongtermOnly] {
        let q_max = swipt_core::csi::q_max_csi_mode(&ens, mode, &eh, &sys).unwrap();
        for q in grid(q_max, 5) {
            let sol = find_duals(&ens, q, P_AVG, mode, &eh, &sys, 1e-9).unwrap();
            kkt.add(csi_kkt(&sol, &ens, &eh, &sys));
        }
    }
    outcome(
        kkt.worst <= KKT_TOL && kkt.checked > 0,
        format!("max stationarity residual {:.3e} over {} interior states (tol {KKT_TOL:e})", kkt.worst, kkt.checked),
    )
}

fn criterion_4() -> Outcome {
    let (_, eh, sys) = setup(64, 10.0, SEED);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let h = 10f64.powf(rng.gen_range(-4.0..-2.0));
        let rho = rng.gen_range(0.05..0.95);
        let lambda = 10f64.powf(rng.gen_range(0.0..4.0));
        let lag = |r: f64| rate(h, sys.p_fixed, r, &sys).unwrap() + lambda * q_nonlinear(h, sys.p_fixed, r, &eh).unwrap();
        let fd = (lag(rho + FD_EPS) - lag(rho - FD_EPS)) / (2.0 * FD_EPS);
        let d = dl_drho(h, sys.p_fixed, rho, lambda, &eh, &sys).unwrap();
        worst = worst.max(rel(d, fd));
    }
    outcome(worst <= FD_REL_TOL, format!("max rel deviation {worst:.3e} over 100 states (tol {FD_REL_TOL:e})"))
}

fn criterion_5(ledger: &Ledger) -> Outcome {
    outcome(
        ledger.worst_q <= CONSTRAINT_TOL && ledger.worst_p <= CONSTRAINT_TOL,
        format!(
            "over {} solutions: max |E[Q]-Q|/Qmax {:.3e}, max |E[P]-Pavg|/Pavg {:.3e} (tol {CONSTRAINT_TOL:e})",
            ledger.count, ledger.worst_q, ledger.worst_p
        ),
    )
}

fn criterion_6(ledger: &mut Ledger) -> Outcome {
    let (ens, eh, sys) = setup(1000, -20.0, SEED + 6);
    let mut worst = f64::INFINITY;
    let q_max = q_max_csir(&ens, &eh, &sys);
    for q in grid(q_max, 10) {
        let opt = find_lambda(&ens, q, CsirMode::Optimal, &eh, &sys, 1e-9).unwrap();
        let sub = find_lambda(&ens, q, CsirMode::Suboptimal, &eh, &sys, 1e-9).unwrap();
        ledger.csir(&opt, q, q_max);
        ledger.csir(&sub, q, q_max);
        worst = worst.min(sub.achieved_rate / opt.achieved_rate);
    }
    let csir_worst = worst;
    let q_max = q_max_csi(&ens, &eh, &sys).unwrap();
    let mut worst = f64::INFINITY;
    for q in grid(q_max, 10) {
        let opt = find_duals(&ens, q, P_AVG, CsiMode::Optimal, &eh, &sys, 1e-9).unwrap();
        let sub = find_duals(&ens, q, P_AVG, CsiMode::Suboptimal, &eh, &sys, 1e-9).unwrap();
        ledger.csi(&opt, q, q_max, P_AVG);
        ledger.csi(&sub, q, q_max, P_AVG);
        worst = worst.min(sub.achieved_rate / opt.achieved_rate);
    }
    let csi_worst = worst;
    outcome(
        csir_worst >= LOW_SNR_RATIO && csi_worst >= LOW_SNR_RATIO,
        format!("min rate ratio CSIR {csir_worst:.6}, CSI {csi_worst:.6} (min {LOW_SNR_RATIO})"),
    )
}

fn tight_csir(ens: &FadingEnsemble, q: f64, eh: &NonlinearEhParams, sys: &SystemParams) -> f64 {
    let solver = CsirSolver {
        tol: TIGHT_TOL,
        ..CsirSolver::new(CsirMode::Optimal)
    };
    solver.solve(ens, q, eh, sys).unwrap().achieved_rate
}

fn tight_csi(ens: &FadingEnsemble, q: f64, mode: CsiMode, eh: &NonlinearEhParams, sys: &SystemParams) -> f64 {
    let solver = CsiSolver {
        tol: TIGHT_TOL,
        ..CsiSolver::new(mode)
    };
    solver.solve(ens, q, P_AVG, eh, sys).unwrap().achieved_rate
}

fn criterion_7() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut worst_at = String::new();
    let mut note = |margin: f64, what: String| {
        if margin < worst {
            worst = margin;
            worst_at = what;
        }
    };
    for snr in [0.0, 10.0, 20.0] {
        let (ens, eh, sys) = setup(10_000, snr, SEED + 7);
        let q_csir = q_max_csir(&ens, &eh, &sys);
        let q_csi = q_max_csi(&ens, &eh, &sys).unwrap();
        for scheme in [Scheme::LinearDpsCsir, Scheme::ModeSwitchCsir] {
            let region = sweep_region(scheme, &ens, 8, &eh, &sys).unwrap();
            for p in region.points.iter().filter(|p| p.energy <= q_csir) {
                let r = tight_csir(&ens, p.energy, &eh, &sys);
                note(r - p.rate, format!("{} at {snr} dB, Q={:e}", scheme.name(), p.energy));
            }
        }
        for scheme in [Scheme::LinearDpsCsi, Scheme::BinaryRestrictedCsi] {
            let region = sweep_region(scheme, &ens, 8, &eh, &sys).unwrap();
            for p in region.points.iter().filter(|p| p.energy <= q_csi) {
                let r = tight_csi(&ens, p.energy, CsiMode::Optimal, &eh, &sys);
                note(r - p.rate, format!("{} at {snr} dB, Q={:e}", scheme.name(), p.energy));
            }
        }
        let csir = sweep_region(Scheme::CsirOptimal, &ens, 8, &eh, &sys).unwrap();
        for p in &csir.points {
            let r = tight_csi(&ens, p.energy, CsiMode::Optimal, &eh, &sys);
            note(r - p.rate, format!("csi vs csir at {snr} dB, Q={:e}", p.energy));
        }
        let csi = sweep_region(Scheme::CsiOptimal, &ens, 8, &eh, &sys).unwrap();
        for p in &csi.points {
            let r = tight_csi(&ens, p.energy, CsiMode::LongtermOnly, &eh, &sys);
            note(r - p.rate, format!("long-term vs peak-limited at {snr} dB, Q={:e}", p.energy));
        }
    }
    outcome(
        worst >= -DOMINANCE_SLACK,
        format!("min rate margin {worst:.3e} (slack {DOMINANCE_SLACK:e}) at {worst_at}"),
    )
}

fn criterion_8() -> Outcome {
    let (ens, eh, sys) = setup(64, 10.0, SEED);
    let q_max = q_max_csir(&ens, &eh, &sys);
    let direct = exact_sum(ens.gains.iter().map(|&h| q_nonlinear(h, sys.p_fixed, 1.0, &eh).unwrap())) / ens.len() as f64;
    let ulps = (q_max - direct).abs() / (f64::EPSILON * direct);
    let sol = find_duals(&ens, 0.0, P_AVG, CsiMode::Optimal, &eh, &sys, 1e-9).unwrap();
    let wf = water_filling_rate(&ens.gains, P_AVG, P_MAX, sys.sigma2);
    let dev = rel(sol.achieved_rate, wf);
    outcome(
        ulps <= SUM_ULPS && dev <= WATER_FILL_REL_TOL,
        format!(
            "Qmax off by {ulps:.1} ulp (max {SUM_ULPS}); water-filling rel deviation {dev:.3e} (tol {WATER_FILL_REL_TOL:e})"
        ),
    )
}

fn criterion_9(ledger: &mut Ledger, kkt: &mut Kkt) -> Outcome {
    let (ens, eh, sys) = setup(10_000, 10.0, SEED + 9);
    let mut worst = 0.0f64;
    let q_max = q_max_csir(&ens, &eh, &sys);
    for q in grid(q_max, 5) {
        let sol = find_lambda(&ens, q, CsirMode::Optimal, &eh, &sys, 1e-9).unwrap();
        ledger.csir(&sol, q, q_max);
        kkt.add(csir_kkt(&sol, &ens, &eh, &sys));
        worst = worst.max(sol.gap_bound / sol.achieved_rate);
    }
    let q_max = q_max_csi(&ens, &eh, &sys).unwrap();
    for q in grid(q_max, 5) {
        let sol = find_duals(&ens, q, P_AVG, CsiMode::Optimal, &eh, &sys, 1e-9).unwrap();
        ledger.csi(&sol, q, q_max, P_AVG);
        kkt.add(csi_kkt(&sol, &ens, &eh, &sys));
        worst = worst.max(sol.gap_bound / sol.achieved_rate);
    }
    outcome(worst <= GAP_REL_TOL, format!("max relative duality gap {worst:.3e} (tol {GAP_REL_TOL:e})"))
}

fn criterion_10() -> Outcome {
    let (ens, eh, sys) = setup(100_000, 10.0, SEED + 10);
    let run = || {
        let start = Instant::now();
        let region = sweep_region(Scheme::CsirOptimal, &ens, 20, &eh, &sys).unwrap();
        let mut buf = Vec::new();
        write_regions_csv(&[region], &mut buf).unwrap();
        (buf, start.elapsed().as_secs_f64())
    };
    let (a, ta) = run();
    let (b, tb) = run();
    let (_, eh2, sys2) = setup(100_000, 10.0, SEED + 10);
    let regen = setup(100_000, 10.0, SEED + 10).0;
    let same_input = regen.gains.iter().zip(&ens.gains).all(|(x, y)| x.to_bits() == y.to_bits()) && eh2 == eh && sys2 == sys;
    let slowest = ta.max(tb);
    outcome(
        a == b && same_input && slowest < SWEEP_SECONDS,
        format!(
            "N=1e5, 20 points: {ta:.1}s and {tb:.1}s (limit {SWEEP_SECONDS}s), outputs {}",
            if a == b && same_input { "byte-identical" } else { "differ" }
        ),
    )
}

fn criterion_11() -> Outcome {
    let (ens, eh, sys) = setup(256, 10.0, SEED + 11);
    let q_max = q_max_csi(&ens, &eh, &sys).unwrap();
    let mut worst = 0.0f64;
    for k in 1..10 {
        let q = q_max * k as f64 / 10.0;
        let rm = find_duals(&ens, q, P_AVG, CsiMode::Optimal, &eh, &sys, 1e-9).unwrap();
        let em = solve_energy_max(&ens, rm.achieved_rate, P_AVG, &eh, &sys).unwrap();
        worst = worst.max(rel(em.achieved_q, rm.achieved_q));
    }
    let r_max = find_duals(&ens, 0.0, P_AVG, CsiMode::Optimal, &eh, &sys, 1e-9).unwrap().achieved_rate;
    for k in 1..10 {
        let r = r_max * k as f64 / 10.0;
        let em = solve_energy_max(&ens, r, P_AVG, &eh, &sys).unwrap();
        let rm = find_duals(&ens, em.achieved_q.min(q_max), P_AVG, CsiMode::Optimal, &eh, &sys, 1e-9).unwrap();
        worst = worst.max(rel(rm.achieved_rate, em.achieved_rate));
    }
    outcome(worst <= FRONTIER_REL_TOL, format!("max rel frontier deviation {worst:.3e} (tol {FRONTIER_REL_TOL:e})"))
}

fn report(i: usize, name: &str, o: &Outcome, secs: f64) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("{tag} criterion {}: {name}: {} [{secs:.1}s]", i + 1, o.detail);
}

/// `ACCEPTANCE_ONLY=1,7` restricts the run to the listed criteria.
fn selected() -> Vec<usize> {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(s) => s.split(',').filter_map(|x| x.trim().parse::<usize>().ok()).collect(),
        Err(_) => (1..=11).collect(),
    }
}

fn main() -> ExitCode {
    let names = [
        "oracle equivalence, fixed power",
        "oracle equivalence, power control",
        "KKT stationarity",
        "finite-difference gradient",
        "constraint satisfaction",
        "low-SNR optimality of the closed form",
        "region dominance",
        "endpoint identities",
        "zero duality gap at scale",
        "determinism and performance",
        "energy-max and rate-max frontiers agree",
    ];
    let only = selected();
    let mut ledger = Ledger::default();
    let mut kkt = Kkt { worst: 0.0, checked: 0 };
    // Criteria 3 and 5 also audit the solutions produced by 1, 2, 6 and 9,
    // so those run first.
    let order = [1, 2, 9, 6, 3, 5, 4, 7, 8, 10, 11];
    let mut failed = Vec::new();
    let mut ran = 0;
    for c in order {
        let feeds_audit = matches!(c, 1 | 2 | 6 | 9) && (only.contains(&3) || only.contains(&5));
        if !only.contains(&c) && !feeds_audit {
            continue;
        }
        let t = Instant::now();
        let o = match c {
            1 => criterion_1(&mut ledger, &mut kkt),
            2 => criterion_2(&mut ledger, &mut kkt),
            3 => criterion_3(&mut kkt),
            4 => criterion_4(),
            5 => criterion_5(&ledger),
            6 => criterion_6(&mut ledger),
            7 => criterion_7(),
            8 => criterion_8(),
            9 => criterion_9(&mut ledger, &mut kkt),
            10 => criterion_10(),
            _ => criterion_11(),
        };
        if !only.contains(&c) {
            continue;
        }
        report(c - 1, names[c - 1], &o, t.elapsed().as_secs_f64());
        ran += 1;
        if !o.pass {
            failed.push(c);
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
