//! Vehicular multi-node wireless channel toolkit.
//!
//! The crate covers the full processing chain used to study vehicular links
//! obstructed by large vehicles:
//!
//! * [`scenario`]: static geometry, scatterer populations and spline-interpolated
//!   vehicle trajectories loaded from TOML scenario files.
//! * [`gscm`]: geometry-based stochastic path enumeration (LOS, static discrete,
//!   mobile discrete and diffuse contributions) including the large-vehicle
//!   reflection and obstruction model.
//! * [`synth`]: multi-link channel frequency responses on the sounding grid,
//!   the switched sounding schedule, the sounding multitone and calibration.
//! * [`chstats`]: local scattering function, PDP/DSD, RMS spreads and path loss
//!   per stationarity region.
//! * [`dpsinterp`]: resampling of channel tensors onto an emulation grid through
//!   a two-dimensional generalized DPS subspace.
//! * [`linksim`]: an 802.11p-style OFDM link simulator producing time-variant
//!   packet error rates and ensemble envelopes.
//! * [`compare`]: offset statistics and envelope bookkeeping between runs.

pub mod chstats;
pub mod compare;
pub mod dpsinterp;
pub mod dpss;
pub mod error;
pub mod geom;
pub mod gscm;
pub mod linksim;
pub mod mnct;
pub mod presets;
pub mod rng;
pub mod scenario;
pub mod spline;
pub mod synth;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
