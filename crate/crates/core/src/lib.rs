//! Rate-energy optimisation for receivers that split the received signal
//! between an information decoder and a saturating energy harvester.
//!
//! Modules:
//! - [`model`]: rate, harvested energy and case-table helpers.
//! - [`channel`]: fading ensembles.
//! - [`csir`]: splitting with receiver-side channel knowledge.
//! - [`csi`]: joint power control and splitting with transmitter knowledge.
//! - [`baselines`]: linear-model splitting and mode switching.
//! - [`region`]: rate-energy sweeps, endpoints and the brute-force oracle.

pub mod baselines;
pub mod channel;
pub mod csi;
pub mod csir;
mod dual;
pub mod error;
pub mod model;
mod numeric;
pub mod params;
pub mod region;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use channel::{FadingEnsemble, RicianParams, DistanceChannelParams, MobilityParams};
pub use csi::{CsiMode, CsiSolution, DualPair, PowerSplitAlloc};
pub use csir::{CsirCase, CsirMode, CsirSolution};
pub use dual::{StateChange, TimeShare};
pub use error::{Result, SwiptError};
pub use params::{NonlinearEhParams, SplitDecision, SystemParams};
pub use region::{REPoint, RERegion, Scheme};
