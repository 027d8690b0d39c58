//! Shared fixtures for the solver benchmarks.

use swipt_core::channel::gen_rician;
use swipt_core::{FadingEnsemble, NonlinearEhParams, RicianParams, SystemParams};

/// Average and peak transmit power, W.
pub const P_AVG: f64 = 2.0;
pub const P_MAX: f64 = 4.0;

/// Rician ensemble with the standard harvester and a noise level set by
/// `snr_db = 10 log10(E[h]·P_avg/σ²)`.
pub fn fixture(n: usize, snr_db: f64, seed: u64) -> (FadingEnsemble, NonlinearEhParams, SystemParams) {
    let los = 10f64.powf(-2.8);
    let rician = RicianParams {
        alpha: 1.0,
        los_power: los,
        scatter_var: los,
    };
    let ens = gen_rician(n, &rician, seed).expect("valid ensemble");
    let mean_h = ens.mean_gain();
    let eh = NonlinearEhParams::new(6400.0, 0.003, mean_h * P_AVG, 1.0).expect("valid harvester");
    let sigma2 = mean_h * P_AVG / 10f64.powf(snr_db / 10.0);
    let sys = SystemParams::new(sigma2, P_AVG, P_AVG, P_MAX, 1.0).expect("valid system");
    (ens, eh, sys)
}
