//! Measurement electronics emulation: zero-span spectrum analysis with a
//! Gaussian resolution filter and video averaging, dual-phase lock-in
//! demodulation, and harmonic SNR / noise-floor extraction.
//!
//! The zero-span chain is
//!
//! ```text
//! mix to baseband -> block-average decimate -> Gaussian RBW filter
//!                 -> detected power 2|y|^2 -> single-pole video filter
//! ```
//!
//! Every filter stage has exactly unit gain at its passband center (all
//! kernels are normalized to sum 1), which pins the normalization contract:
//! a sinusoid of amplitude `a` at the center frequency detects as power
//! `a^2/2`, and white noise of per-sample variance `s^2` detects as
//! `s^2 * 2 ENBW / fs` with `ENBW = 1.0645 rbw`.
//!
//! The block-average decimation rate is chosen commensurate with the
//! modulation frequency when the trace carries one, so that every other
//! modulation harmonic lands exactly on a decimation null instead of
//! aliasing near the measurement band.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::gaussian_enbw_factor;
use crate::synth::PhotocurrentTrace;

/// Decimated intermediate rate in units of the resolution bandwidth.
const INTERMEDIATE_RATE_RBW_MULTIPLE: f64 = 32.0;

/// Gaussian kernel support in units of its time-domain sigma.
const GAUSSIAN_KERNEL_HALF_SIGMAS: f64 = 6.0;

/// Candidate noise-floor offsets from the measured harmonic, in rbw units.
/// The first matches the default single-offset marker placement; the rest
/// spread the estimate to shrink its variance.
const FLOOR_OFFSET_RBW_CANDIDATES: [f64; 6] = [25.0, 39.0, 57.0, 71.0, 89.0, 103.0];

/// Minimum distance between a floor offset and any modulation harmonic.
const FLOOR_MIN_HARMONIC_DISTANCE_RBW: f64 = 20.0;

/// Minimum post-aliasing distance of any harmonic line from the filter
/// passband, in rbw units.
const FLOOR_MIN_ALIAS_DISTANCE_RBW: f64 = 6.0;

/// Zero-span detector mode: sample the video output or average power over
/// each decimation bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Detector {
    Sample,
    #[default]
    AveragePower,
}

/// Settings of a zero-span measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroSpanSettings {
    pub center_freq_hz: f64,
    /// -3 dB full width of the Gaussian resolution filter, Hz.
    pub rbw_hz: f64,
    /// Post-detection averaging bandwidth, Hz.
    pub vbw_hz: f64,
    pub detector: Detector,
}

impl ZeroSpanSettings {
    pub fn new(center_freq_hz: f64, rbw_hz: f64, vbw_hz: f64, detector: Detector) -> Result<Self> {
        if !(rbw_hz > 0.0) {
            return Err(Error::Config(format!("rbw_Hz must be > 0, got {rbw_hz}")));
        }
        if !(vbw_hz > 0.0) || vbw_hz > rbw_hz {
            return Err(Error::Config(format!(
                "vbw_Hz must be in (0, rbw_Hz], got {vbw_hz} with rbw {rbw_hz}"
            )));
        }
        if !(center_freq_hz > 4.0 * rbw_hz) {
            return Err(Error::Config(format!(
                "zero-span center must exceed 4 x rbw, got {center_freq_hz} with rbw {rbw_hz}"
            )));
        }
        Ok(Self {
            center_freq_hz,
            rbw_hz,
            vbw_hz,
            detector,
        })
    }

    /// Same settings retuned to another center frequency.
    pub fn at_center(&self, center_freq_hz: f64) -> Result<Self> {
        Self::new(center_freq_hz, self.rbw_hz, self.vbw_hz, self.detector)
    }

    /// Equivalent noise bandwidth of the Gaussian resolution filter,
    /// `1.0645 x rbw`.
    pub fn enbw_hz(&self) -> f64 {
        gaussian_enbw_factor() * self.rbw_hz
    }
}

/// Result of a zero-span measurement.
#[derive(Debug, Clone)]
pub struct ZeroSpan {
    /// Video-filtered detected power, decimated to at least 4 x vbw.
    pub power: Vec<f64>,
    /// Time stamps of `power`, seconds.
    pub times_s: Vec<f64>,
    /// Time-averaged detected power over the valid (settled) region of the
    /// resolution-filtered series, before video averaging.
    pub mean_power: f64,
    /// Standard error of `mean_power` from batch means.
    pub mean_power_stderr: f64,
    /// Equivalent noise bandwidth of the resolution filter, Hz.
    pub enbw_hz: f64,
}

/// Measured amplitude SNR of one modulation harmonic.
#[derive(Debug, Clone)]
pub struct HarmonicMeasurement {
    pub order: u32,
    pub drive_voltage_v: f64,
    pub lock_phase_rad: f64,
    /// Detected power at the harmonic, linear units (includes the floor).
    pub signal_power: f64,
    /// Noise floor power in the same bandwidth, linear units.
    pub noise_floor_power: f64,
    /// `sqrt(signal_power / noise_floor_power)`; reads ~1 when no signal is
    /// present (the floor measuring itself).
    pub snr_amplitude: f64,
    /// Propagated standard error of `snr_amplitude`.
    pub snr_stderr: f64,
    pub rbw_hz: f64,
}

impl HarmonicMeasurement {
    /// Amplitude SNR with the noise-on-noise bias removed:
    /// `sqrt(max(snr^2 - 1, 0))`. The detected power at the harmonic is
    /// signal plus floor, so the raw reading saturates at 1 for vanishing
    /// signal; this estimator targets the signal-only SNR.
    pub fn debiased_snr(&self) -> f64 {
        (self.snr_amplitude * self.snr_amplitude - 1.0).max(0.0).sqrt()
    }
}

/// Noise-floor reading at a fixed offset frequency.
#[derive(Debug, Clone, Copy)]
pub struct NoiseFloor {
    pub power: f64,
    pub stderr: f64,
    /// False when the first- and second-half means disagree beyond 3 sigma.
    pub stationary: bool,
}

/// Dual-phase demodulation output.
#[derive(Debug, Clone)]
pub struct Demodulated {
    pub i: Vec<f64>,
    pub q: Vec<f64>,
    pub sample_rate_hz: f64,
}

// ---------------------------------------------------------------------------
// Zero-span analysis
// ---------------------------------------------------------------------------

/// Resolution-filtered detected power and the geometry needed to timestamp
/// it: (power series at the intermediate rate, intermediate rate, kernel
/// half-width, decimation factor).
struct ResolutionPower {
    series: Vec<f64>,
    f1: f64,
    half: usize,
    r0: usize,
}

/// Mix, decimate, Gaussian-filter, and detect: one pass over the trace.
fn resolution_power(trace: &PhotocurrentTrace, settings: &ZeroSpanSettings) -> Result<ResolutionPower> {
    let fs = trace.sample_rate_hz;
    let fc = settings.center_freq_hz;
    if fc >= 0.5 * fs {
        return Err(Error::Domain(format!(
            "center frequency {fc} Hz is above Nyquist {} Hz",
            0.5 * fs
        )));
    }

    let r0 = decimation_factor(trace, settings);
    let f1 = fs / r0 as f64;
    let baseband = mix_triangle_decimate(&trace.samples, fs, fc, r0);

    // Gaussian resolution filter at the intermediate rate, -3 dB full width
    // rbw: h(t) ~ exp(-t^2 / (2 sigma_t^2)), sigma_t = sqrt(ln 2)/(pi rbw).
    let sigma_samples = std::f64::consts::LN_2.sqrt() / (std::f64::consts::PI * settings.rbw_hz) * f1;
    let half = (GAUSSIAN_KERNEL_HALF_SIGMAS * sigma_samples).ceil() as usize;
    let kernel = gaussian_kernel(sigma_samples, half);
    if baseband.len() <= kernel.len() {
        return Err(Error::Precision(format!(
            "trace too short for rbw {} Hz: {} baseband samples against a \
             {}-tap resolution filter",
            settings.rbw_hz,
            baseband.len(),
            kernel.len()
        )));
    }
    let filtered = fir_valid_complex(&baseband, &kernel);

    // Detected power: 2|y|^2 makes a sinusoid of amplitude a read a^2/2.
    let series: Vec<f64> = filtered.iter().map(|y| 2.0 * y.norm_sqr()).collect();
    Ok(ResolutionPower {
        series,
        f1,
        half,
        r0,
    })
}

/// Detected-power time series of a zero-span measurement at the settings'
/// center frequency.
pub fn zero_span_power(trace: &PhotocurrentTrace, settings: &ZeroSpanSettings) -> Result<ZeroSpan> {
    let fs = trace.sample_rate_hz;
    let res = resolution_power(trace, settings)?;
    let ResolutionPower {
        series: power_series,
        f1,
        half,
        r0,
    } = res;
    let (mean_power, mean_power_stderr) = batch_mean_stderr(&power_series);

    // Video stage: warm-started single-pole low-pass, then detector
    // decimation to >= 4 x vbw.
    let alpha = 1.0 - (-std::f64::consts::TAU * settings.vbw_hz / f1).exp();
    let warm = power_series
        .iter()
        .take((f1 / settings.vbw_hz).ceil() as usize)
        .copied();
    let warm_len = warm.len().max(1);
    let mut state = warm.sum::<f64>() / warm_len as f64;
    let video: Vec<f64> = power_series
        .iter()
        .map(|&p| {
            state += alpha * (p - state);
            state
        })
        .collect();
    let settle = ((5.0 * f1 / settings.vbw_hz).ceil() as usize).min(video.len() / 2);
    let stride = ((f1 / (4.0 * settings.vbw_hz)).floor() as usize).max(1);
    let mut power = Vec::new();
    let mut times_s = Vec::new();
    // Time of the j-th resolution-filtered sample: triangle-window center
    // plus Gaussian kernel group delay.
    let t_of = |j: usize| {
        trace.start_time_s + ((j + half) as f64 * r0 as f64 + r0 as f64 - 0.5) / fs
    };
    let mut idx = settle;
    while idx < video.len() {
        let value = match settings.detector {
            Detector::Sample => video[idx],
            Detector::AveragePower => {
                let end = (idx + stride).min(video.len());
                video[idx..end].iter().sum::<f64>() / (end - idx) as f64
            }
        };
        power.push(value);
        times_s.push(t_of(idx));
        idx += stride;
    }

    Ok(ZeroSpan {
        power,
        times_s,
        mean_power,
        mean_power_stderr,
        enbw_hz: settings.enbw_hz(),
    })
}

/// Mean zero-span power at a frequency offset from the modulation harmonics,
/// with a first-half/second-half stationarity check on the same detected
/// power series.
pub fn noise_floor(
    trace: &PhotocurrentTrace,
    offset_freq_hz: f64,
    settings: &ZeroSpanSettings,
) -> Result<NoiseFloor> {
    check_floor_placement(trace, offset_freq_hz, settings)?;
    let res = resolution_power(trace, &settings.at_center(offset_freq_hz)?)?;
    let (power, stderr) = batch_mean_stderr(&res.series);
    let mid = res.series.len() / 2;
    let (m1, e1) = batch_mean_stderr(&res.series[..mid]);
    let (m2, e2) = batch_mean_stderr(&res.series[mid..]);
    let sigma = (e1 * e1 + e2 * e2).sqrt();
    let stationary = (m1 - m2).abs() <= 3.0 * sigma;
    if !stationary {
        log::warn!(
            "noise floor at {offset_freq_hz} Hz fails the stationarity check \
             (first/second half means differ beyond 3 sigma)"
        );
    }
    Ok(NoiseFloor {
        power,
        stderr,
        stationary,
    })
}

fn check_floor_placement(
    trace: &PhotocurrentTrace,
    offset_freq_hz: f64,
    settings: &ZeroSpanSettings,
) -> Result<()> {
    if offset_freq_hz + 4.0 * settings.rbw_hz >= 0.5 * trace.sample_rate_hz {
        return Err(Error::Placement(format!(
            "floor offset {offset_freq_hz} Hz reaches past Nyquist"
        )));
    }
    if let Some(mod_freq) = trace.metadata.mod_freq_hz {
        if mod_freq > 0.0 {
            let nearest = (offset_freq_hz / mod_freq).round() * mod_freq;
            let distance = (offset_freq_hz - nearest).abs();
            if distance < FLOOR_MIN_HARMONIC_DISTANCE_RBW * settings.rbw_hz {
                return Err(Error::Placement(format!(
                    "floor offset {offset_freq_hz} Hz is only {distance:.1} Hz from a \
                     modulation harmonic; need >= {} x rbw",
                    FLOOR_MIN_HARMONIC_DISTANCE_RBW
                )));
            }
        }
    }
    Ok(())
}

/// Measure one harmonic's amplitude SNR: detected power at
/// `order x mod_freq` against the noise floor read at offset frequencies on
/// the same trace.
pub fn extract_harmonic_snr(
    trace: &PhotocurrentTrace,
    mod_freq_hz: f64,
    order: u32,
    settings: &ZeroSpanSettings,
) -> Result<HarmonicMeasurement> {
    if order < 1 {
        return Err(Error::Domain("harmonic order must be >= 1".into()));
    }
    if !(mod_freq_hz > 0.0) {
        return Err(Error::Domain(format!(
            "modulation frequency must be > 0, got {mod_freq_hz}"
        )));
    }
    let center = order as f64 * mod_freq_hz;
    if center >= 0.5 * trace.sample_rate_hz {
        return Err(Error::Domain(format!(
            "harmonic {order} at {center} Hz is above Nyquist"
        )));
    }
    if trace.duration_s() < 5.0 / settings.rbw_hz {
        return Err(Error::Precision(format!(
            "trace duration {:.4} s is below 5/rbw = {:.4} s required for RBW settling",
            trace.duration_s(),
            5.0 / settings.rbw_hz
        )));
    }

    let signal = zero_span_power(trace, &settings.at_center(center)?)?;

    let offsets = floor_offsets(trace, mod_freq_hz, center, settings)?;
    let mut floor_power = 0.0;
    let mut floor_var = 0.0;
    for &offset in &offsets {
        let floor = noise_floor(trace, offset, settings)?;
        floor_power += floor.power;
        floor_var += floor.stderr * floor.stderr;
    }
    let k = offsets.len() as f64;
    floor_power /= k;
    let floor_stderr = floor_var.sqrt() / k;

    let snr_amplitude = (signal.mean_power / floor_power).sqrt();
    // d(snr)/snr = 1/2 sqrt((dS/S)^2 + (dF/F)^2).
    let rel = 0.5
        * ((signal.mean_power_stderr / signal.mean_power).powi(2)
            + (floor_stderr / floor_power).powi(2))
        .sqrt();
    Ok(HarmonicMeasurement {
        order,
        drive_voltage_v: trace.metadata.drive_voltage_v.unwrap_or(f64::NAN),
        lock_phase_rad: trace.metadata.lock_phase_rad.unwrap_or(f64::NAN),
        signal_power: signal.mean_power,
        noise_floor_power: floor_power,
        snr_amplitude,
        snr_stderr: snr_amplitude * rel,
        rbw_hz: settings.rbw_hz,
    })
}

/// Pick floor offsets near the measured harmonic that stay clear of every
/// harmonic and of decimation-alias images of the harmonic lines.
fn floor_offsets(
    trace: &PhotocurrentTrace,
    mod_freq_hz: f64,
    center_hz: f64,
    settings: &ZeroSpanSettings,
) -> Result<Vec<f64>> {
    let rbw = settings.rbw_hz;
    let fs = trace.sample_rate_hz;
    let r0 = decimation_factor(trace, settings);
    let f1 = fs / r0 as f64;
    let mut chosen = Vec::new();
    for &base in FLOOR_OFFSET_RBW_CANDIDATES.iter() {
        let mut multiple = base;
        for _attempt in 0..20 {
            let offset = center_hz + multiple * rbw;
            if offset_is_clean(offset, mod_freq_hz, rbw, fs, f1) {
                chosen.push(offset);
                break;
            }
            multiple += 2.0;
        }
    }
    if chosen.len() < 3 {
        return Err(Error::Placement(format!(
            "could not place enough clean noise-floor offsets near {center_hz} Hz \
             (rbw {rbw} Hz, modulation {mod_freq_hz} Hz)"
        )));
    }
    Ok(chosen)
}

fn offset_is_clean(offset_hz: f64, mod_freq_hz: f64, rbw: f64, fs: f64, f1: f64) -> bool {
    if offset_hz + 4.0 * rbw >= 0.5 * fs {
        return false;
    }
    // Distance to every harmonic of the modulation.
    let nearest = (offset_hz / mod_freq_hz).round() * mod_freq_hz;
    if (offset_hz - nearest).abs() < FLOOR_MIN_HARMONIC_DISTANCE_RBW * rbw {
        return false;
    }
    // Post-decimation alias positions of all harmonic lines (and their
    // negative-frequency mirrors) must stay out of the filter passband.
    let jmax = (0.5 * fs / mod_freq_hz).floor() as i64;
    for j in -jmax..=jmax {
        let line = j as f64 * mod_freq_hz;
        let delta = line - offset_hz;
        let folded = delta - (delta / f1).round() * f1;
        if folded.abs() < FLOOR_MIN_ALIAS_DISTANCE_RBW * rbw {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Demodulation
// ---------------------------------------------------------------------------

/// Dual-phase lock-in demodulation: mix with cos/sin at `freq_hz`, low-pass
/// both channels, decimate to at least 4 x the cutoff. A tone
/// `a sin(2 pi f t + theta)` settles to `sqrt(I^2 + Q^2) = a/2` with
/// `atan2(I, Q) = theta`.
pub fn demodulate(trace: &PhotocurrentTrace, freq_hz: f64, lp_cutoff_hz: f64) -> Result<Demodulated> {
    let fs = trace.sample_rate_hz;
    if !(freq_hz > 0.0) || freq_hz >= 0.5 * fs {
        return Err(Error::Domain(format!(
            "demodulation frequency {freq_hz} Hz must be in (0, Nyquist)"
        )));
    }
    if !(lp_cutoff_hz > 0.0) || lp_cutoff_hz >= 0.5 * freq_hz {
        return Err(Error::Leakage(format!(
            "low-pass cutoff {lp_cutoff_hz} Hz must be below half the \
             demodulation frequency {freq_hz} Hz to reject the 2f image"
        )));
    }
    let w = Complex64::from_polar(1.0, -std::f64::consts::TAU * freq_hz / fs);
    let mut rot = Complex64::new(1.0, 0.0);
    let mixed: Vec<Complex64> = trace
        .samples
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let z = s * rot;
            rot *= w;
            if k % 4096 == 4095 {
                rot /= rot.norm();
            }
            z
        })
        .collect();
    let kernel = lowpass_kernel(fs, lp_cutoff_hz);
    if mixed.len() <= kernel.len() {
        return Err(Error::Precision(format!(
            "trace too short for a {} Hz demodulation low-pass ({} samples \
             against {} taps)",
            lp_cutoff_hz,
            mixed.len(),
            kernel.len()
        )));
    }
    let stride = ((fs / (4.0 * lp_cutoff_hz)).floor() as usize).max(1);
    let filtered = fir_valid_decimate_complex(&mixed, &kernel, stride);
    Ok(Demodulated {
        i: filtered.iter().map(|y| y.re).collect(),
        q: filtered.iter().map(|y| -y.im).collect(),
        sample_rate_hz: fs / stride as f64,
    })
}

/// Low-pass and decimate a real series; unit DC gain. Used for the
/// low-frequency lock error signal.
pub fn lowpass_decimate(samples: &[f64], sample_rate_hz: f64, cutoff_hz: f64) -> Vec<f64> {
    let kernel = lowpass_kernel(sample_rate_hz, cutoff_hz);
    if samples.len() <= kernel.len() {
        return Vec::new();
    }
    let stride = ((sample_rate_hz / (4.0 * cutoff_hz)).floor() as usize).max(1);
    let count = (samples.len() - kernel.len()) / stride + 1;
    (0..count)
        .map(|j| {
            let base = j * stride;
            kernel
                .iter()
                .zip(&samples[base..base + kernel.len()])
                .map(|(h, x)| h * x)
                .sum()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Internals
// ---------------------------------------------------------------------------

/// Block-average decimation factor. When the trace declares a modulation
/// frequency, the intermediate rate divides it exactly so that every
/// harmonic line lands on a decimation null.
fn decimation_factor(trace: &PhotocurrentTrace, settings: &ZeroSpanSettings) -> usize {
    let fs = trace.sample_rate_hz;
    let target_f1 = INTERMEDIATE_RATE_RBW_MULTIPLE * settings.rbw_hz;
    let r0 = match trace.metadata.mod_freq_hz {
        Some(mod_freq) if mod_freq > 0.0 => {
            let m = (mod_freq / target_f1).round().max(1.0);
            (fs * m / mod_freq).round()
        }
        _ => (fs / target_f1).round(),
    };
    (r0 as usize).max(1)
}

/// Fused heterodyne mix and triangular-window decimation by `r0`: output `j`
/// is the mixed signal weighted by the length-`2 r0` triangle
/// `boxcar(r0) * boxcar(r0)`, hopped by `r0`. Exactly unit gain at the
/// mixed-to-DC component (integer weights summing to r0^2); decimation nulls
/// sit at multiples of `fs / r0` with squared-sinc sidelobes, which keeps
/// strong out-of-band components — the low-frequency lock wander above all —
/// from aliasing into the measurement band.
fn mix_triangle_decimate(samples: &[f64], fs: f64, fc: f64, r0: usize) -> Vec<Complex64> {
    let w = Complex64::from_polar(1.0, -std::f64::consts::TAU * fc / fs);
    let mut rot = Complex64::new(1.0, 0.0);
    let blocks = samples.len() / r0;
    if blocks < 2 {
        return Vec::new();
    }
    let norm = 1.0 / (r0 as f64 * r0 as f64);
    let mut out = Vec::with_capacity(blocks - 1);
    // Triangle weights: rising (p+1) for the window starting this block,
    // falling (r0-1-p) for the window started one block earlier.
    let mut acc_cur = Complex64::new(0.0, 0.0);
    let mut acc_prev = Complex64::new(0.0, 0.0);
    let mut idx = 0;
    for block in 0..blocks {
        for p in 0..r0 {
            let z = samples[idx] * rot;
            rot *= w;
            idx += 1;
            acc_cur += z * (p + 1) as f64;
            acc_prev += z * (r0 - 1 - p) as f64;
        }
        rot /= rot.norm();
        if block > 0 {
            out.push(acc_prev * norm);
        }
        acc_prev = acc_cur;
        acc_cur = Complex64::new(0.0, 0.0);
    }
    out
}

/// Gaussian kernel with sum exactly 1.
fn gaussian_kernel(sigma_samples: f64, half: usize) -> Vec<f64> {
    let len = 2 * half + 1;
    let mut kernel: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 - half as f64;
            (-0.5 * (t / sigma_samples).powi(2)).exp()
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    for h in &mut kernel {
        *h /= sum;
    }
    kernel
}

/// Blackman-windowed sinc low-pass with sum exactly 1.
fn lowpass_kernel(fs: f64, cutoff_hz: f64) -> Vec<f64> {
    let half = (4.0 * fs / cutoff_hz).ceil() as usize;
    let len = 2 * half + 1;
    let fc = cutoff_hz / fs;
    let mut kernel: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 - half as f64;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (std::f64::consts::TAU * fc * t).sin() / (std::f64::consts::PI * t)
            };
            let x = std::f64::consts::TAU * i as f64 / (len - 1) as f64;
            let window = 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos();
            sinc * window
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    for h in &mut kernel {
        *h /= sum;
    }
    kernel
}

fn fir_valid_complex(x: &[Complex64], h: &[f64]) -> Vec<Complex64> {
    fir_valid_decimate_complex(x, h, 1)
}

fn fir_valid_decimate_complex(x: &[Complex64], h: &[f64], stride: usize) -> Vec<Complex64> {
    if x.len() < h.len() {
        return Vec::new();
    }
    let count = (x.len() - h.len()) / stride + 1;
    (0..count)
        .map(|j| {
            let base = j * stride;
            let mut acc = Complex64::new(0.0, 0.0);
            for (hi, xi) in h.iter().zip(&x[base..base + h.len()]) {
                acc += xi * hi;
            }
            acc
        })
        .collect()
}

/// Mean and standard error of a correlated series via batch means.
fn batch_mean_stderr(series: &[f64]) -> (f64, f64) {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let batches = 8.min(n);
    if batches < 2 {
        return (mean, f64::INFINITY);
    }
    let size = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            let chunk = &series[b * size..(b + 1) * size];
            chunk.iter().sum::<f64>() / size as f64
        })
        .collect();
    let bm = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::TraceMetadata;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::TAU;

    fn bare_trace(samples: Vec<f64>, fs: f64) -> PhotocurrentTrace {
        PhotocurrentTrace {
            samples,
            sample_rate_hz: fs,
            start_time_s: 0.0,
            metadata: TraceMetadata::default(),
        }
    }

    fn tone(fs: f64, n: usize, freq: f64, amp: f64, theta: f64) -> Vec<f64> {
        (0..n)
            .map(|k| amp * (TAU * freq * k as f64 / fs + theta).sin())
            .collect()
    }

    #[test]
    fn unit_sinusoid_detects_half_power() {
        let fs = 16e6;
        let n = (0.02 * fs) as usize;
        for freq in [2.0e6, 1.7321e6] {
            let trace = bare_trace(tone(fs, n, freq, 1.0, 0.4), fs);
            let settings = ZeroSpanSettings::new(freq, 2000.0, 200.0, Detector::AveragePower).unwrap();
            let zs = zero_span_power(&trace, &settings).unwrap();
            assert!(
                (zs.mean_power - 0.5).abs() <= 1e-9,
                "detected {} at center {freq}",
                zs.mean_power
            );
        }
    }

    #[test]
    fn offset_sinusoid_is_rejected() {
        let fs = 16e6;
        let n = (0.02 * fs) as usize;
        let rbw = 2000.0;
        let center = 2.0e6;
        // Tone at +10 rbw from the center.
        let trace = bare_trace(tone(fs, n, center + 10.0 * rbw, 1.0, 0.0), fs);
        let settings = ZeroSpanSettings::new(center, rbw, 200.0, Detector::AveragePower).unwrap();
        let zs = zero_span_power(&trace, &settings).unwrap();
        assert!(zs.mean_power < 1e-6 * 0.5, "leakage {}", zs.mean_power);
    }

    #[test]
    fn white_noise_floor_matches_enbw_relation() {
        let fs = 16e6;
        let n = (0.05 * fs) as usize;
        let sigma = 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                sigma * g
            })
            .collect();
        let trace = bare_trace(samples, fs);
        let settings = ZeroSpanSettings::new(2e6, 2000.0, 200.0, Detector::AveragePower).unwrap();
        let zs = zero_span_power(&trace, &settings).unwrap();
        // Detected power = sigma^2 * 2 ENBW / fs.
        let expected = sigma * sigma * 2.0 * zs.enbw_hz / fs;
        assert!(
            (zs.mean_power - expected).abs() <= 4.0 * zs.mean_power_stderr,
            "floor {} vs expected {expected} (stderr {})",
            zs.mean_power,
            zs.mean_power_stderr
        );
    }

    #[test]
    fn nyquist_and_sub_rbw_centers_are_rejected() {
        let fs = 1e6;
        let trace = bare_trace(vec![0.0; 1000], fs);
        let settings = ZeroSpanSettings::new(0.6e6, 1000.0, 100.0, Detector::AveragePower).unwrap();
        assert!(matches!(
            zero_span_power(&trace, &settings),
            Err(Error::Domain(_))
        ));
        assert!(ZeroSpanSettings::new(1000.0, 1000.0, 100.0, Detector::Sample).is_err());
    }

    #[test]
    fn demodulate_recovers_amplitude_and_phase() {
        let fs = 4e6;
        let n = 200_000;
        let freq = 100e3;
        for theta in [0.0, 0.7, -1.2] {
            let trace = bare_trace(tone(fs, n, freq, 0.8, theta), fs);
            let d = demodulate(&trace, freq, 5e3).unwrap();
            let i = d.i[d.i.len() / 2];
            let q = d.q[d.q.len() / 2];
            let mag = (i * i + q * q).sqrt();
            assert!((mag - 0.4).abs() < 1e-6, "magnitude {mag} at theta {theta}");
            let phase = i.atan2(q);
            assert!((phase - theta).abs() < 1e-6, "phase {phase} vs {theta}");
        }
    }

    #[test]
    fn demodulate_rejects_dc() {
        let fs = 4e6;
        let trace = bare_trace(vec![2.5; 200_000], fs);
        let d = demodulate(&trace, 100e3, 5e3).unwrap();
        let i = d.i[d.i.len() / 2];
        let q = d.q[d.q.len() / 2];
        // DC lands 20 x cutoff into the stopband of the low-pass.
        assert!((i * i + q * q).sqrt() < 1e-4 * 2.5);
    }

    #[test]
    fn demodulate_error_paths() {
        let fs = 4e6;
        let trace = bare_trace(vec![0.0; 1000], fs);
        assert!(matches!(
            demodulate(&trace, 3e6, 1e3),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            demodulate(&trace, 100e3, 60e3),
            Err(Error::Leakage(_))
        ));
    }

    #[test]
    fn floor_placement_rejects_harmonics() {
        let fs = 16e6;
        let mut trace = bare_trace(vec![0.0; (0.02 * fs) as usize], fs);
        trace.metadata.mod_freq_hz = Some(2e6);
        let settings = ZeroSpanSettings::new(2e6, 2000.0, 200.0, Detector::AveragePower).unwrap();
        // 10 x rbw from the second harmonic: too close.
        assert!(matches!(
            noise_floor(&trace, 4e6 + 10.0 * 2000.0, &settings),
            Err(Error::Placement(_))
        ));
    }

    #[test]
    fn floors_at_distinct_offsets_agree() {
        let fs = 16e6;
        let n = (0.05 * fs) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                2.0 * g
            })
            .collect();
        let mut trace = bare_trace(samples, fs);
        trace.metadata.mod_freq_hz = Some(2e6);
        let settings = ZeroSpanSettings::new(2e6, 2000.0, 200.0, Detector::AveragePower).unwrap();
        let a = noise_floor(&trace, 2e6 + 25.0 * 2000.0, &settings).unwrap();
        let b = noise_floor(&trace, 2e6 + 57.0 * 2000.0, &settings).unwrap();
        assert!(a.stationary && b.stationary);
        let sigma = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
        assert!((a.power - b.power).abs() <= 3.0 * sigma);
    }

    #[test]
    fn no_signal_snr_reads_unity() {
        let fs = 16e6;
        let n = (0.05 * fs) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                1.5 * g
            })
            .collect();
        let mut trace = bare_trace(samples, fs);
        trace.metadata.mod_freq_hz = Some(2e6);
        let settings = ZeroSpanSettings::new(2e6, 2000.0, 200.0, Detector::AveragePower).unwrap();
        let m = extract_harmonic_snr(&trace, 2e6, 1, &settings).unwrap();
        assert!((m.snr_amplitude - 1.0).abs() < 0.3, "snr {}", m.snr_amplitude);
        // Definition consistency.
        assert!(
            (m.snr_amplitude * m.snr_amplitude * m.noise_floor_power / m.signal_power - 1.0).abs()
                < 1e-12
        );
        assert!(m.debiased_snr() < 1.0);
    }

    #[test]
    fn demodulation_matches_synthesized_fundamental() {
        use crate::model::{bessel_j, DetectionChain, LockPoint};
        use crate::synth::{synthesize_trace, SynthesisPlan};
        let mut plan = SynthesisPlan::reference_apparatus();
        plan.sample_rate_hz = 16e6;
        plan.det = DetectionChain::new(0.667, 1.0, 2000.0, 200.0).unwrap();
        plan.duration_s = 5e-3;
        plan.noise = None;
        plan.lock = LockPoint::phase_quadrature(0.0).unwrap();
        plan.modulation.drive_voltage_v = 8.0;
        let trace = synthesize_trace(&plan).unwrap();
        let knd = plan.modulation.knd(&plan.field);
        let d = demodulate(&trace, 2e6, 50e3).unwrap();
        let mid = d.i.len() / 2;
        let magnitude = (d.i[mid] * d.i[mid] + d.q[mid] * d.q[mid]).sqrt();
        // Fundamental amplitude is 2 M J1(knd); the demodulator reads half.
        let expected = 2.0 * plan.mean_amplitude() * bessel_j(1, knd).unwrap();
        assert!(
            (2.0 * magnitude / expected - 1.0).abs() < 0.01,
            "demodulated {} vs fundamental {}",
            2.0 * magnitude,
            expected
        );
    }

    #[test]
    fn noiseless_trace_floor_is_empty() {
        use crate::model::{DetectionChain, LockPoint};
        use crate::synth::{synthesize_trace, SynthesisPlan};
        let mut plan = SynthesisPlan::reference_apparatus();
        plan.sample_rate_hz = 16e6;
        plan.det = DetectionChain::new(0.667, 1.0, 2000.0, 200.0).unwrap();
        plan.duration_s = 5e-3;
        plan.noise = None;
        plan.lock = LockPoint::phase_quadrature(0.0).unwrap();
        plan.modulation.drive_voltage_v = 8.0;
        let trace = synthesize_trace(&plan).unwrap();
        let settings = ZeroSpanSettings::new(2e6, 2000.0, 200.0, Detector::AveragePower).unwrap();
        let signal = zero_span_power(&trace, &settings).unwrap();
        let floor = noise_floor(&trace, 2e6 + 25.0 * 2000.0, &settings).unwrap();
        assert!(
            floor.power < 1e-12 * signal.mean_power,
            "floor {} vs signal {}",
            floor.power,
            signal.mean_power
        );
    }

    #[test]
    fn short_trace_is_precision_error() {
        let fs = 16e6;
        let trace = bare_trace(vec![0.0; 16_000], fs); // 1 ms
        let settings = ZeroSpanSettings::new(2e6, 2000.0, 200.0, Detector::AveragePower).unwrap();
        assert!(matches!(
            extract_harmonic_snr(&trace, 2e6, 1, &settings),
            Err(Error::Precision(_))
        ));
    }
}
