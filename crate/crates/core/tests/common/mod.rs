#![allow(dead_code)]

use swipt_core::channel::gen_rician;
use swipt_core::{FadingEnsemble, NonlinearEhParams, RicianParams, SystemParams};

pub const P_AVG: f64 = 2.0;
pub const P_MAX: f64 = 4.0;

/// Rician ensemble (α = 1, LOS and scatter power −28 dBW) with the standard
/// harvester. `P_s = E[h]·P_avg` and `σ² = E[h]·P_avg / 10^(snr/10)`.
pub fn setup(n: usize, snr_db: f64, seed: u64) -> (FadingEnsemble, NonlinearEhParams, SystemParams) {
    let pw = 10f64.powf(-2.8);
    let rician = RicianParams {
        alpha: 1.0,
        los_power: pw,
        scatter_var: pw,
    };
    let ens = gen_rician(n, &rician, seed).unwrap();
    let mean_h = ens.mean_gain();
    let eh = NonlinearEhParams::new(6400.0, 0.003, mean_h * P_AVG, 1.0).unwrap();
    let sigma2 = mean_h * P_AVG / 10f64.powf(snr_db / 10.0);
    let sys = SystemParams::new(sigma2, P_AVG, P_AVG, P_MAX, 1.0).unwrap();
    (ens, eh, sys)
}

pub fn rate_bits(h: f64, p: f64, sigma2: f64) -> f64 {
    (1.0 + h * p / sigma2).log2()
}

/// Logistic harvested energy written straight from its definition.
pub fn q_direct(x: f64, eh: &NonlinearEhParams) -> f64 {
    let psi = 1.0 / (1.0 + (-eh.a * (x - eh.b)).exp());
    let omega = 1.0 / (1.0 + (eh.a * eh.b).exp());
    eh.p_s * eh.t_block * (psi - omega) / (1.0 - omega)
}

/// Classical water-filling: bisection on the water level so the clipped
/// powers average to `p_avg`. Returns the average rate.
pub fn water_filling_rate(gains: &[f64], p_avg: f64, p_max: f64, sigma2: f64) -> f64 {
    let power = |level: f64| -> f64 {
        gains
            .iter()
            .map(|&h| if h > 0.0 { (level - sigma2 / h).clamp(0.0, p_max) } else { 0.0 })
            .sum::<f64>()
            / gains.len() as f64
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while power(hi) < p_avg {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if power(mid) < p_avg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let level = 0.5 * (lo + hi);
    gains
        .iter()
        .map(|&h| if h > 0.0 { rate_bits(h, (level - sigma2 / h).clamp(0.0, p_max), sigma2) } else { 0.0 })
        .sum::<f64>()
        / gains.len() as f64
}

/// Exactly rounded sum (Shewchuk's partials).
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    partials.iter().rev().fold(0.0, |acc, v| acc + v)
}
