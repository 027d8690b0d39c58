//! Experiment configuration file (TOML). Every section is optional; an
//! empty file gives the standard Rician experiment at 0, 10 and 20 dB.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use swipt_core::channel::{distance_gain, gen_rician, mobility_trace};
use swipt_core::region::Case;
use swipt_core::{DistanceChannelParams, FadingEnsemble, MobilityParams, NonlinearEhParams, RicianParams, Scheme, SystemParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_states: usize,
    /// Thresholds per region sweep.
    pub q_points: usize,
    pub snr_db: Vec<f64>,
    /// Scheme labels: optimal, suboptimal, longterm, linear, modeswitch, binary.
    pub schemes: Vec<String>,
    pub cases: Vec<String>,
    pub out_dir: Option<PathBuf>,
    pub eh: EhConfig,
    pub power: PowerConfig,
    pub channel: ChannelConfig,
    pub solver: SolverConfig,
    pub oracle: OracleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            n_states: 10_000,
            q_points: 20,
            snr_db: vec![0.0, 10.0, 20.0],
            schemes: vec!["optimal".into()],
            cases: vec!["csir".into(), "csi".into()],
            out_dir: None,
            eh: EhConfig::default(),
            power: PowerConfig::default(),
            channel: ChannelConfig::default(),
            solver: SolverConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EhConfig {
    pub a: f64,
    pub b: f64,
    pub t_block: f64,
    /// Saturation power in W; `E[h]·P_avg` of the ensemble when absent.
    pub p_s: Option<f64>,
}

impl Default for EhConfig {
    fn default() -> Self {
        Self {
            a: 6400.0,
            b: 0.003,
            t_block: 1.0,
            p_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    pub p_avg: f64,
    pub p_max: f64,
    pub zeta: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            p_avg: 2.0,
            p_max: 4.0,
            zeta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChannelConfig {
    Rician {
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "minus_28")]
        los_power_dbw: f64,
        #[serde(default = "minus_28")]
        scatter_var_dbw: f64,
    },
    /// One block per listed distance (m).
    Distance {
        distances: Vec<f64>,
        #[serde(default)]
        antenna: AntennaConfig,
    },
    /// Random walk of a mobile receiver; `n_states` blocks.
    Mobility {
        d0: f64,
        v_max: f64,
        #[serde(default = "one")]
        t_block: f64,
        #[serde(default)]
        antenna: AntennaConfig,
    },
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig::Rician {
            alpha: 1.0,
            los_power_dbw: -28.0,
            scatter_var_dbw: -28.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AntennaConfig {
    pub a_t: f64,
    pub a_r: f64,
    pub f_c: f64,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        let d = DistanceChannelParams::default();
        Self {
            a_t: d.a_t,
            a_r: d.a_r,
            f_c: d.f_c,
        }
    }
}

impl AntennaConfig {
    fn params(&self) -> DistanceChannelParams {
        DistanceChannelParams {
            a_t: self.a_t,
            a_r: self.a_r,
            f_c: self.f_c,
            ..DistanceChannelParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Dual-search tolerance of the optimal and suboptimal solvers.
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Largest accepted relative rate deviation from the oracle.
    pub tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { tol: 1e-4 }
    }
}

fn one() -> f64 {
    1.0
}

fn minus_28() -> f64 {
    -28.0
}

/// Reads a config file, or returns the defaults when `path` is `None`.
pub fn load(path: Option<&Path>) -> Result<ExperimentConfig, String> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            toml::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", p.display()))
        }
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ExperimentConfig {
    /// Checks everything that does not need the ensemble.
    pub fn validate(&self) -> Result<(), String> {
        if self.n_states == 0 {
            return Err("n_states must be at least 1".into());
        }
        if self.q_points < 2 {
            return Err(format!("q_points must be at least 2, got {}", self.q_points));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err("snr_db must list finite values".into());
        }
        if !(self.solver.tol > 0.0 && self.oracle.tol > 0.0) {
            return Err("tolerances must be positive".into());
        }
        self.scheme_set()?;
        Ok(())
    }

    pub fn case_list(&self) -> Result<Vec<Case>, String> {
        if self.cases.is_empty() {
            return Err("no case selected".into());
        }
        self.cases
            .iter()
            .map(|c| Case::parse(c).ok_or_else(|| format!("unknown case `{c}` (expected csir or csi)")))
            .collect()
    }

    /// Requested schemes grouped by case. A label must exist for at least
    /// one requested case.
    pub fn scheme_set(&self) -> Result<Vec<(Case, Vec<Scheme>)>, String> {
        let cases = self.case_list()?;
        if self.schemes.is_empty() {
            return Err("no scheme selected".into());
        }
        for label in &self.schemes {
            if !cases.iter().any(|&c| Scheme::parse(label, c).is_some()) {
                return Err(format!("scheme `{label}` is not defined for the selected case(s)"));
            }
        }
        Ok(cases
            .into_iter()
            .map(|c| (c, self.schemes.iter().filter_map(|l| Scheme::parse(l, c)).collect::<Vec<_>>()))
            .filter(|(_, s)| !s.is_empty())
            .collect())
    }

    pub fn ensemble(&self) -> Result<FadingEnsemble, String> {
        let ens = match &self.channel {
            ChannelConfig::Rician {
                alpha,
                los_power_dbw,
                scatter_var_dbw,
            } => {
                let params = RicianParams {
                    alpha: *alpha,
                    los_power: db_to_linear(*los_power_dbw),
                    scatter_var: db_to_linear(*scatter_var_dbw),
                };
                gen_rician(self.n_states, &params, self.seed)
            }
            ChannelConfig::Distance { distances, antenna } => {
                let gains = distances
                    .iter()
                    .map(|&d| distance_gain(d, &antenna.params()))
                    .collect::<swipt_core::Result<Vec<_>>>();
                gains.and_then(|g| FadingEnsemble::new(g, None, format!("distance(n={})", distances.len())))
            }
            ChannelConfig::Mobility {
                d0,
                v_max,
                t_block,
                antenna,
            } => {
                let mob = MobilityParams {
                    d0: *d0,
                    v_max: *v_max,
                    t_block: *t_block,
                };
                mobility_trace(self.n_states, &mob, &antenna.params(), self.seed)
            }
        };
        ens.map_err(|e| e.to_string())
    }

    /// Harvester and system parameters at one SNR, with
    /// `σ² = E[h]·P_avg/10^{SNR/10}` and `P_s = E[h]·P_avg` by default.
    pub fn params(&self, ens: &FadingEnsemble, snr_db: f64) -> Result<(NonlinearEhParams, SystemParams), String> {
        let mean_h = ens.mean_gain();
        let p = &self.power;
        let p_s = self.eh.p_s.unwrap_or(mean_h * p.p_avg);
        let eh = NonlinearEhParams::new(self.eh.a, self.eh.b, p_s, self.eh.t_block).map_err(|e| e.to_string())?;
        let sigma2 = mean_h * p.p_avg / db_to_linear(snr_db);
        let sys = SystemParams::new(sigma2, p.p_avg, p.p_avg, p.p_max, p.zeta).map_err(|e| e.to_string())?;
        Ok((eh, sys))
    }
}
