//! Seeded synthesis of shot-noise-limited difference-photocurrent traces.
//!
//! A trace is the reference apparatus in numbers: the interferometer output
//! `M cos(phi0 + j(t) + knd sin(Omega t))` plus white Gaussian noise scaled
//! so that the zero-span analysis at the plan's resolution bandwidth
//! reproduces the analytic harmonic SNRs. Lock jitter `j(t)` is band-limited
//! Gaussian noise far below the modulation frequency, emulating a closed
//! servo loop without its dynamics.
//!
//! The per-sample white-noise scale is the one normalization that ties the
//! synthesis to the analysis chain: with `dS` the per-window photocurrent
//! noise std and `ENBW` the Gaussian filter's equivalent noise bandwidth,
//!
//! ```text
//! sigma_w = dS * sqrt(fs / (4 ENBW))
//! ```
//!
//! which makes the zero-span noise floor come out at `dS^2 / 2` and the
//! fundamental cross the detection threshold exactly at
//! `knd = 1/(2 sqrt(N))`. The constant is frozen by the cross-module
//! acceptance tests.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp;
use crate::error::{Error, Result};
use crate::model::{
    homodyne_noise_std, photon_number, DetectionChain, LockPoint, Modulation, OpticalField,
    QuadratureNoise,
};

/// Lock-jitter band edge as a fraction of the modulation frequency; jitter
/// lives below `Omega / 100` so it never contaminates the measurement band.
const JITTER_BAND_FRACTION: f64 = 0.01;

/// Complete recipe for one synthetic trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisPlan {
    pub field: OpticalField,
    pub det: DetectionChain,
    pub modulation: Modulation,
    pub lock: LockPoint,
    /// Quadrature noise of the signal field; `None` synthesizes a noiseless
    /// trace (useful for spectral-purity checks).
    pub noise: Option<QuadratureNoise>,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub rng_seed: u64,
}

impl SynthesisPlan {
    /// Apparatus defaults: 795 nm, 115 uW signal / 1.5 mW LO, 2 MHz drive,
    /// 0.55 A/V piezo, RBW 50 Hz / VBW 5 Hz, phase-quadrature lock with
    /// 1 mrad residual jitter, shot-noise-limited light, 32 MHz sampling.
    pub fn reference_apparatus() -> Self {
        Self {
            field: OpticalField::new(795e-9, 115e-6, 1.5e-3, 1.0).unwrap(),
            det: DetectionChain::new(0.667, 1.0, 50.0, 5.0).unwrap(),
            modulation: Modulation::new(2e6, 0.55e-10, 0.0).unwrap(),
            lock: LockPoint::phase_quadrature(1e-3).unwrap(),
            noise: Some(QuadratureNoise::shot_noise()),
            sample_rate_hz: 32e6,
            duration_s: 0.25,
            rng_seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz < 8.0 * self.modulation.frequency_hz {
            return Err(Error::Config(format!(
                "sample_rate_Hz must be >= 8 x modulation frequency to resolve \
                 the fourth harmonic: got {} with modulation {}",
                self.sample_rate_hz, self.modulation.frequency_hz
            )));
        }
        if self.duration_s * self.det.rbw_hz < 5.0 {
            return Err(Error::Config(format!(
                "duration_s x rbw_Hz must be >= 5 for stable noise statistics, \
                 got {} x {} = {}",
                self.duration_s,
                self.det.rbw_hz,
                self.duration_s * self.det.rbw_hz
            )));
        }
        if self.det.effective_efficiency() <= 0.0 {
            return Err(Error::Config(
                "quantum_efficiency and overlap must be > 0 to synthesize".into(),
            ));
        }
        Ok(())
    }

    /// Number of samples in the synthesized trace.
    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    /// Effective signal photon number per integration window: raw photons
    /// scaled by `quantum_efficiency * overlap^2`. This is the `N` whose
    /// square root sets the harmonic SNRs.
    pub fn effective_signal_photons(&self) -> f64 {
        photon_number(
            self.field.signal_power_w,
            self.field.wavelength_m,
            self.det.rbw_hz,
            self.det.effective_efficiency(),
        )
        .expect("validated plan parameters")
    }

    /// Mean-signal amplitude `2 eta A_lo A_sig` in simulation units.
    pub fn mean_amplitude(&self) -> f64 {
        let a_lo = photon_number(self.field.lo_power_w, self.field.wavelength_m, self.det.rbw_hz, 1.0)
            .expect("validated plan parameters")
            .sqrt();
        2.0 * self.det.eta() * a_lo * self.effective_signal_photons().sqrt()
    }

    /// Per-sample white-noise standard deviation realizing the plan's
    /// quadrature noise at this lock point, or 0 for a noiseless plan.
    pub fn white_noise_std(&self) -> f64 {
        match &self.noise {
            None => 0.0,
            Some(noise) => {
                let ds = homodyne_noise_std(&self.field, &self.det, self.lock.mean_phase_rad, noise);
                ds * (self.sample_rate_hz / (4.0 * self.det.enbw_hz())).sqrt()
            }
        }
    }
}

/// Provenance of a trace: the plan that generated it or the file header it
/// was ingested with.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceMetadata {
    pub mod_freq_hz: Option<f64>,
    pub drive_voltage_v: Option<f64>,
    pub lock_phase_rad: Option<f64>,
    /// Units tag for ingested data; synthesis writes "simulation".
    pub units: String,
    /// Free-form key/value pairs preserved from an ingested header.
    pub extra: BTreeMap<String, String>,
    pub plan: Option<SynthesisPlan>,
}

/// Uniformly sampled difference-photocurrent time series.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotocurrentTrace {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub start_time_s: f64,
    pub metadata: TraceMetadata,
}

impl PhotocurrentTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// 64-bit finalizer used for seed derivation.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-point sweep seed: base seed XOR a hash of (voltage index, lock id),
/// so adding voltage points never perturbs existing points' data.
pub fn derive_point_seed(base_seed: u64, voltage_index: usize, lock_id: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(((voltage_index as u64) << 1) | (lock_id & 1)))
}

/// Generate the difference-photocurrent trace for a plan.
pub fn synthesize_trace(plan: &SynthesisPlan) -> Result<PhotocurrentTrace> {
    plan.validate()?;
    if !plan.field.lo_dominates() {
        log::warn!(
            "LO power {} W is below 10 x signal power {} W; homodyne noise \
             formula assumes a dominant LO",
            plan.field.lo_power_w,
            plan.field.signal_power_w
        );
    }
    if !plan.modulation.in_small_modulation_regime(&plan.field) {
        log::warn!(
            "knd = {:.3} rad exceeds the small-modulation regime (0.5 rad); \
             truncated-expansion results will not hold",
            plan.modulation.knd(&plan.field)
        );
    }

    let n = plan.sample_count();
    let fs = plan.sample_rate_hz;
    let m_amp = plan.mean_amplitude();
    let knd = plan.modulation.knd(&plan.field);
    let phi0 = plan.lock.mean_phase_rad;
    let sigma_w = plan.white_noise_std();

    // Modulation phase sin(2 pi f k / fs): exact lookup table when the
    // sample rate is an integer multiple of the drive frequency, phase
    // accumulator otherwise.
    let period = fs / plan.modulation.frequency_hz;
    let table: Option<Vec<f64>> = if (period - period.round()).abs() < 1e-9 * period
        && period.round() >= 2.0
        && period.round() <= 65536.0
    {
        let p = period.round() as usize;
        Some(
            (0..p)
                .map(|k| (std::f64::consts::TAU * k as f64 / p as f64).sin())
                .collect(),
        )
    } else {
        None
    };

    let jitter = synthesize_jitter(plan, n);
    let mut white_rng = ChaCha8Rng::seed_from_u64(splitmix64(plan.rng_seed ^ 0x57_41_54_54));
    let normal = StandardNormal;

    let mut samples = vec![0.0f64; n];
    let dtheta = std::f64::consts::TAU * plan.modulation.frequency_hz / fs;
    let mut theta = 0.0f64;
    for (k, out) in samples.iter_mut().enumerate() {
        let s = match &table {
            Some(t) => t[k % t.len()],
            None => {
                let v = theta.sin();
                theta += dtheta;
                if theta >= std::f64::consts::TAU {
                    theta -= std::f64::consts::TAU;
                }
                v
            }
        };
        let mut phase = phi0 + knd * s;
        if let Some(j) = &jitter {
            phase += j[k];
        }
        let mut value = m_amp * phase.cos();
        if sigma_w > 0.0 {
            let g: f64 = normal.sample(&mut white_rng);
            value += sigma_w * g;
        }
        *out = value;
    }

    Ok(PhotocurrentTrace {
        samples,
        sample_rate_hz: fs,
        start_time_s: 0.0,
        metadata: TraceMetadata {
            mod_freq_hz: Some(plan.modulation.frequency_hz),
            drive_voltage_v: Some(plan.modulation.drive_voltage_v),
            lock_phase_rad: Some(plan.lock.mean_phase_rad),
            units: "simulation".into(),
            extra: BTreeMap::new(),
            plan: Some(plan.clone()),
        },
    })
}

/// Band-limited lock jitter: Gaussian knots at twice the band edge
/// `Omega/100`, interpolated to the sample rate with a Catmull-Rom cubic.
/// The cubic keeps the knot-rate spectral images far below the shot floor
/// even when the carrier dwarfs it; sqrt(105/86) restores the target RMS
/// lost to interpolation averaging (the integrated squared basis is 86/105).
fn synthesize_jitter(plan: &SynthesisPlan, n: usize) -> Option<Vec<f64>> {
    let rms = plan.lock.residual_jitter_rad;
    if rms <= 0.0 || n == 0 {
        return None;
    }
    let cutoff_hz = JITTER_BAND_FRACTION * plan.modulation.frequency_hz;
    let stride = (plan.sample_rate_hz / (2.0 * cutoff_hz)).round().max(1.0) as usize;
    let knot_count = n / stride + 4;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(plan.rng_seed ^ 0x4A_49_54_54));
    let scale = rms * (105.0f64 / 86.0).sqrt();
    let knots: Vec<f64> = (0..knot_count)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            scale * g
        })
        .collect();
    let inv = 1.0 / stride as f64;
    Some(
        (0..n)
            .map(|k| {
                let i = k / stride + 1;
                let u = (k - (i - 1) * stride) as f64 * inv;
                let u2 = u * u;
                let u3 = u2 * u;
                let w0 = 0.5 * (-u3 + 2.0 * u2 - u);
                let w1 = 0.5 * (3.0 * u3 - 5.0 * u2 + 2.0);
                let w2 = 0.5 * (-3.0 * u3 + 4.0 * u2 + u);
                let w3 = 0.5 * (u3 - u2);
                w0 * knots[i - 1] + w1 * knots[i] + w2 * knots[i + 1] + w3 * knots[i + 2]
            })
            .collect(),
    )
}

/// Emulated lock error signal, used to verify lock quality.
///
/// At the phase-quadrature lock the error is the low-frequency part of the
/// trace (HF/LF split at 10 kHz); at the amplitude-quadrature lock it is the
/// in-phase component of the trace demodulated at the drive frequency.
pub fn lock_error_signal(plan: &SynthesisPlan, trace: &PhotocurrentTrace) -> Result<Vec<f64>> {
    match &trace.metadata.plan {
        Some(p) if p == plan => {}
        _ => {
            return Err(Error::Provenance(
                "trace was not generated from the supplied plan".into(),
            ))
        }
    }
    let phase_quadrature = plan.lock.mean_phase_rad.sin().powi(2) >= 0.5;
    if phase_quadrature {
        // LF difference current: low-pass below the 10 kHz HF/LF split.
        let cutoff = 10e3_f64.min(plan.modulation.frequency_hz / 4.0);
        Ok(dsp::lowpass_decimate(&trace.samples, trace.sample_rate_hz, cutoff))
    } else {
        let cutoff = 10e3_f64.min(plan.modulation.frequency_hz / 4.0);
        let demod = dsp::demodulate(trace, plan.modulation.frequency_hz, cutoff)?;
        Ok(demod.i)
    }
}
