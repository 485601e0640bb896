//! Shot-noise-limited homodyne interferometry with a high-frequency piezo
//! phase modulation, and the absolute sub-wavelength calibration that falls
//! out of it: the ratio of the first two modulation harmonics in the detected
//! signal fixes the displacement per volt without ever observing a fringe,
//! and the fundamental's signal-to-noise measures the displacement
//! sensitivity against the standard quantum limit.
//!
//! The crate is organized as a pipeline:
//!
//! - [`model`] — analytic formulas: homodyne mean and noise, Bessel-harmonic
//!   expansion, harmonic-ratio calibration, photon numbers and quantum limits.
//! - [`synth`] — seeded synthesis of shot-noise-limited difference
//!   photocurrent traces with the modulation and phase lock embedded.
//! - [`dsp`] — measurement electronics emulation: zero-span spectrum analysis
//!   with a Gaussian resolution filter, dual-phase lock-in demodulation,
//!   harmonic SNR and noise-floor extraction.
//! - [`calib`] — experiment orchestration: voltage sweeps, weighted fits,
//!   displacement calibration, sensitivity crossing, quantum-limit
//!   comparison.
//! - [`cli`] — config loading, trace file I/O, experiment running, and
//!   machine-readable reports for the `fringeless` binary.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --example harmonic_spectrum          # analytic harmonic table
//! cargo run --example synthesize_and_lock        # trace synthesis + lock checks
//! cargo run --example zero_span_snr              # measured vs predicted SNR
//! cargo run --example calibrate_piezo            # voltage sweep + ratio fit
//! cargo run --example displacement_sensitivity   # sensitivity + SQL ratio
//! cargo run --example classical_noise_correction # excess-noise correction
//! cargo run --example trace_roundtrip            # trace file write/ingest
//! ```

// Validation throughout uses `!(x > 0.0)`-style negated comparisons so that
// NaN inputs fail closed instead of slipping through `x <= 0.0`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod cli;
pub mod dsp;
pub mod error;
pub mod model;
pub mod synth;

pub use error::{Error, Result};
