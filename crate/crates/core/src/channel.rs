//! Fading ensembles: Rician blocks, the distance-based channel and a mobile
//! receiver trace.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, SwiptError};
use crate::numeric::mean;

/// Lower bound applied to the random-walk distance (m).
pub const MIN_DISTANCE: f64 = 0.1;

/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Channel power gains, one per fading block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingEnsemble {
    pub gains: Vec<f64>,
    pub seed: Option<u64>,
    pub meta: String,
}

impl FadingEnsemble {
    pub fn new(gains: Vec<f64>, seed: Option<u64>, meta: impl Into<String>) -> Result<Self> {
        if gains.is_empty() {
            return Err(domain("an ensemble needs at least one state"));
        }
        if let Some(bad) = gains.iter().find(|h| !(h.is_finite() && **h >= 0.0)) {
            return Err(domain(format!("channel gains must be finite and non-negative, got {bad}")));
        }
        Ok(Self {
            gains,
            seed,
            meta: meta.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Sample mean of the gains.
    pub fn mean_gain(&self) -> f64 {
        mean(self.gains.iter().copied())
    }

    /// Writes the gains as CSV with header `h`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["h"])?;
        for h in &self.gains {
            wr.write_record([h.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads gains written by [`FadingEnsemble::write_csv`].
    pub fn read_csv<R: Read>(r: R, meta: impl Into<String>) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        if rd.headers()?.iter().collect::<Vec<_>>() != ["h"] {
            return Err(SwiptError::Io("expected a single column named h".into()));
        }
        let mut gains = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let v: f64 = rec[0]
                .trim()
                .parse()
                .map_err(|e| SwiptError::Io(format!("bad gain {:?}: {e}", &rec[0])))?;
            gains.push(v);
        }
        Self::new(gains, None, meta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicianParams {
    /// Rician factor. `f64::INFINITY` gives a pure line-of-sight channel.
    pub alpha: f64,
    /// Line-of-sight power `|η̄|²`.
    pub los_power: f64,
    /// Scattered-component variance `σ_h²`.
    pub scatter_var: f64,
}

impl RicianParams {
    fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(domain(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if !(self.los_power >= 0.0 && self.los_power.is_finite()) {
            return Err(domain(format!("los_power must be non-negative, got {}", self.los_power)));
        }
        if !(self.scatter_var > 0.0 && self.scatter_var.is_finite()) {
            return Err(domain(format!("scatter_var must be positive, got {}", self.scatter_var)));
        }
        Ok(())
    }

    /// Mean channel power gain of the distribution.
    pub fn mean_gain(&self) -> f64 {
        if self.alpha.is_infinite() {
            return self.los_power;
        }
        (self.alpha * self.los_power + self.scatter_var) / (self.alpha + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceChannelParams {
    pub a_t: f64,
    pub a_r: f64,
    pub f_c: f64,
    pub c: f64,
}

impl Default for DistanceChannelParams {
    fn default() -> Self {
        Self {
            a_t: 0.5,
            a_r: 0.01,
            f_c: 2.4e9,
            c: SPEED_OF_LIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityParams {
    pub d0: f64,
    pub v_max: f64,
    pub t_block: f64,
}

/// Draws `n` Rician block gains `h = |η|²`.
pub fn gen_rician(n: usize, params: &RicianParams, seed: u64) -> Result<FadingEnsemble> {
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    params.validate()?;
    let (w_los, w_sc) = if params.alpha.is_infinite() {
        (1.0, 0.0)
    } else {
        (
            (params.alpha / (params.alpha + 1.0)).sqrt(),
            (1.0 / (params.alpha + 1.0)).sqrt(),
        )
    };
    let los = w_los * params.los_power.sqrt();
    let sd = (params.scatter_var / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gains = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let x = los + w_sc * sd * re;
            let y = w_sc * sd * im;
            x * x + y * y
        })
        .collect();
    FadingEnsemble::new(
        gains,
        Some(seed),
        format!(
            "rician(alpha={}, los_power={}, scatter_var={}, n={n})",
            params.alpha, params.los_power, params.scatter_var
        ),
    )
}

/// Power gain `1 - exp(-a_t a_r / ((c/f_c)² d²))` at distance `d`.
pub fn distance_gain(d: f64, params: &DistanceChannelParams) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(domain(format!("distance must be positive, got {d}")));
    }
    let p = params;
    if !(p.a_t > 0.0 && p.a_r > 0.0 && p.f_c > 0.0 && p.c > 0.0) {
        return Err(domain("distance-channel parameters must be positive"));
    }
    let wavelength = p.c / p.f_c;
    Ok(-(-(p.a_t * p.a_r) / (wavelength * wavelength * d * d)).exp_m1())
}

/// Gains along a random walk `d ← d + β v_max T` with `β ~ U[-1, 1]`.
pub fn mobility_trace(
    n: usize,
    mob: &MobilityParams,
    dist: &DistanceChannelParams,
    seed: u64,
) -> Result<FadingEnsemble> {
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    if !(mob.d0 > 0.0 && mob.v_max >= 0.0 && mob.t_block > 0.0) {
        return Err(domain("mobility parameters need d0 > 0, v_max >= 0, t_block > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = mob.d0;
    let mut gains = Vec::with_capacity(n);
    gains.push(distance_gain(d, dist)?);
    for _ in 1..n {
        let beta: f64 = rng.gen_range(-1.0..=1.0);
        d = (d + beta * mob.v_max * mob.t_block).max(MIN_DISTANCE);
        gains.push(distance_gain(d, dist)?);
    }
    FadingEnsemble::new(
        gains,
        Some(seed),
        format!("mobility(d0={}, v_max={}, n={n})", mob.d0, mob.v_max),
    )
}

/// Distances of the walk behind [`mobility_trace`], for inspection.
pub fn mobility_distances(n: usize, mob: &MobilityParams, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = mob.d0;
    let mut out = Vec::with_capacity(n);
    if n > 0 {
        out.push(d);
    }
    for _ in 1..n {
        let beta: f64 = rng.gen_range(-1.0..=1.0);
        d = (d + beta * mob.v_max * mob.t_block).max(MIN_DISTANCE);
        out.push(d);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard_rician() -> RicianParams {
        let g = 10f64.powf(-2.8);
        RicianParams {
            alpha: 1.0,
            los_power: g,
            scatter_var: g,
        }
    }

    #[test]
    fn rician_is_deterministic_and_nonnegative() {
        let a = gen_rician(1000, &standard_rician(), 7).unwrap();
        let b = gen_rician(1000, &standard_rician(), 7).unwrap();
        let c = gen_rician(1000, &standard_rician(), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.gains, c.gains);
        assert!(a.gains.iter().all(|h| *h >= 0.0 && h.is_finite()));
        assert!(gen_rician(0, &standard_rician(), 1).is_err());
    }

    #[test]
    fn pure_los_limit() {
        let p = RicianParams {
            alpha: f64::INFINITY,
            los_power: 0.25,
            scatter_var: 1.0,
        };
        let e = gen_rician(50, &p, 3).unwrap();
        assert!(e.gains.iter().all(|h| *h == 0.25));
    }

    #[test]
    fn distance_gain_limits_and_monotonicity() {
        let p = DistanceChannelParams::default();
        let near = distance_gain(1e-4, &p).unwrap();
        let far = distance_gain(1e6, &p).unwrap();
        assert!(near > 0.999_999 && near <= 1.0);
        assert!(far > 0.0 && far < 1e-12);
        assert!(distance_gain(10.0, &p).unwrap() > distance_gain(11.0, &p).unwrap());
        assert!(distance_gain(0.0, &p).is_err());
    }

    #[test]
    fn mobility_basics() {
        let dist = DistanceChannelParams::default();
        let still = MobilityParams {
            d0: 15.0,
            v_max: 0.0,
            t_block: 1.0,
        };
        let e = mobility_trace(20, &still, &dist, 1).unwrap();
        let h0 = distance_gain(15.0, &dist).unwrap();
        assert!(e.gains.iter().all(|h| *h == h0));
        assert_eq!(mobility_trace(1, &still, &dist, 9).unwrap().gains, vec![h0]);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let e = gen_rician(257, &standard_rician(), 11).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"h\n"));
        let back = FadingEnsemble::read_csv(buf.as_slice(), "fixture").unwrap();
        assert_eq!(back.gains.len(), e.gains.len());
        for (x, y) in back.gains.iter().zip(&e.gains) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
