//! Analytic core: homodyne signal and noise, Bessel-harmonic expansion of a
//! sinusoidal phase modulation, harmonic-ratio calibration, and quantum-limit
//! formulas.
//!
//! Everything here is a pure function of its arguments. Detected quantities
//! are carried as amplitude signal-to-noise ratios in units where the
//! single-photon field amplitude and the electron charge are 1; absolute
//! photocurrent scale cancels in every observable.
//!
//! The harmonic structure comes from the Jacobi-Anger expansion of the
//! interferometer output `cos(phi0 + knd sin(Omega t))`:
//!
//! ```text
//! cos(phi0 + x sin wt) = J0(x) cos phi0
//!                      - 2 J1(x) sin phi0 sin wt
//!                      + 2 J2(x) cos phi0 cos 2wt
//!                      - 2 J3(x) sin phi0 sin 3wt + ...
//! ```
//!
//! so odd harmonics read the phase quadrature and even harmonics the
//! amplitude quadrature.

use crate::error::{Error, Result};

/// Planck constant, J s (exact, 2019 SI definition).
pub const PLANCK_CONSTANT_J_S: f64 = 6.62607015e-34;

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Effective integration time of a Gaussian resolution filter:
/// `dt = 0.44 / rbw` (Gaussian -3 dB time-bandwidth product).
pub const GAUSSIAN_INTEGRATION_TIME_FACTOR: f64 = 0.44;

/// Equivalent noise bandwidth of a Gaussian filter with -3 dB full width B:
/// `ENBW = sqrt(pi) / (2 sqrt(ln 2)) * B ~= 1.0645 B`.
pub fn gaussian_enbw_factor() -> f64 {
    std::f64::consts::PI.sqrt() / (2.0 * std::f64::consts::LN_2.sqrt())
}

/// Relative termination threshold for the ascending Bessel series.
const BESSEL_TERM_RATIO: f64 = 1e-16;

/// Largest argument for which the ascending series is guaranteed accurate.
const BESSEL_MAX_ARG: f64 = 20.0;

/// Ratio below which the linear inversion of J2/J1 is used directly.
/// At the switchover the two branches agree to about (4r)^2/24 ~ 4e-8,
/// keeping the round-trip identity with [`harmonic_ratio`] under 1e-6
/// relative across the whole regime.
const EXACT_INVERSION_MIN_RATIO: f64 = 2.5e-4;

/// Largest harmonic ratio accepted by [`invert_ratio`]; enforces the
/// small-modulation regime knd < 0.5.
pub const MAX_INVERTIBLE_RATIO: f64 = 0.125;

/// Upper bound of the small-modulation regime in radians.
pub const SMALL_MODULATION_LIMIT_RAD: f64 = 0.5;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Optical field parameters of the two interferometer arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalField {
    /// Vacuum wavelength, meters.
    pub wavelength_m: f64,
    /// Optical power of the signal arm, watts.
    pub signal_power_w: f64,
    /// Optical power of the local-oscillator arm, watts.
    pub lo_power_w: f64,
    /// Refractive index of the medium in which the modulation occurs.
    pub refractive_index: f64,
}

impl OpticalField {
    pub fn new(
        wavelength_m: f64,
        signal_power_w: f64,
        lo_power_w: f64,
        refractive_index: f64,
    ) -> Result<Self> {
        if !(wavelength_m > 0.0) {
            return Err(Error::Config(format!(
                "wavelength_m must be > 0, got {wavelength_m}"
            )));
        }
        if !(signal_power_w >= 0.0) || !(lo_power_w >= 0.0) {
            return Err(Error::Config(format!(
                "optical powers must be >= 0, got signal {signal_power_w}, lo {lo_power_w}"
            )));
        }
        if !(refractive_index >= 1.0) {
            return Err(Error::Config(format!(
                "refractive_index must be >= 1, got {refractive_index}"
            )));
        }
        Ok(Self {
            wavelength_m,
            signal_power_w,
            lo_power_w,
            refractive_index,
        })
    }

    /// Field wavenumber `k = 2 pi / lambda`, 1/m.
    pub fn wavenumber(&self) -> f64 {
        std::f64::consts::TAU / self.wavelength_m
    }

    /// True when the local oscillator dominates the signal arm
    /// (`lo >= 10 x signal`), the regime in which the homodyne noise
    /// formula holds. Callers flag a warning when this is false.
    pub fn lo_dominates(&self) -> bool {
        self.lo_power_w >= 10.0 * self.signal_power_w
    }
}

/// Detection chain: diode efficiency, fringe overlap, and analyzer bandwidths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionChain {
    /// Diode quantum efficiency, in [0, 1].
    pub quantum_efficiency: f64,
    /// Fringe-contrast overlap integral between the two fields, in [0, 1].
    pub overlap: f64,
    /// -3 dB resolution bandwidth of the analyzer, Hz.
    pub rbw_hz: f64,
    /// Video (post-detection) bandwidth, Hz.
    pub vbw_hz: f64,
}

impl DetectionChain {
    pub fn new(quantum_efficiency: f64, overlap: f64, rbw_hz: f64, vbw_hz: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&quantum_efficiency) {
            return Err(Error::Config(format!(
                "quantum_efficiency must be in [0, 1], got {quantum_efficiency}"
            )));
        }
        if !(0.0..=1.0).contains(&overlap) {
            return Err(Error::Config(format!(
                "overlap must be in [0, 1], got {overlap}"
            )));
        }
        if !(rbw_hz > 0.0) {
            return Err(Error::Config(format!("rbw_Hz must be > 0, got {rbw_hz}")));
        }
        if !(vbw_hz > 0.0) || vbw_hz > rbw_hz {
            return Err(Error::Config(format!(
                "vbw_Hz must be in (0, rbw_Hz], got vbw {vbw_hz} with rbw {rbw_hz}"
            )));
        }
        Ok(Self {
            quantum_efficiency,
            overlap,
            rbw_hz,
            vbw_hz,
        })
    }

    /// Detection prefactor `eta = quantum_efficiency * overlap` of the
    /// homodyne signal mean (diode response and fringe contrast folded).
    pub fn eta(&self) -> f64 {
        self.quantum_efficiency * self.overlap
    }

    /// Effective photon-counting efficiency for the signal field's SNR,
    /// `quantum_efficiency * overlap^2`: mode overlap enters the detected
    /// amplitude linearly while the LO shot noise is overlap-independent.
    pub fn effective_efficiency(&self) -> f64 {
        self.quantum_efficiency * self.overlap * self.overlap
    }

    /// Effective integration time `0.44 / rbw`, seconds.
    pub fn integration_time_s(&self) -> f64 {
        GAUSSIAN_INTEGRATION_TIME_FACTOR / self.rbw_hz
    }

    /// Equivalent noise bandwidth of the resolution filter, Hz.
    pub fn enbw_hz(&self) -> f64 {
        gaussian_enbw_factor() * self.rbw_hz
    }
}

/// Piezo-driven sinusoidal path modulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulation {
    /// Drive frequency Omega / 2 pi, Hz.
    pub frequency_hz: f64,
    /// True piezo slope d(V)/V, meters per volt. Ground truth in synthesis,
    /// the unknown being estimated in analysis.
    pub displacement_per_volt_m: f64,
    /// Applied drive amplitude, volts.
    pub drive_voltage_v: f64,
}

impl Modulation {
    pub fn new(frequency_hz: f64, displacement_per_volt_m: f64, drive_voltage_v: f64) -> Result<Self> {
        if !(frequency_hz > 0.0) {
            return Err(Error::Config(format!(
                "modulation frequency_Hz must be > 0, got {frequency_hz}"
            )));
        }
        if !(displacement_per_volt_m >= 0.0) {
            return Err(Error::Config(format!(
                "displacement_per_volt_m must be >= 0, got {displacement_per_volt_m}"
            )));
        }
        if !(drive_voltage_v >= 0.0) {
            return Err(Error::Config(format!(
                "drive_voltage_V must be >= 0, got {drive_voltage_v}"
            )));
        }
        Ok(Self {
            frequency_hz,
            displacement_per_volt_m,
            drive_voltage_v,
        })
    }

    /// Peak path displacement at the configured drive voltage, meters.
    pub fn displacement_m(&self) -> f64 {
        self.displacement_per_volt_m * self.drive_voltage_v
    }

    /// Peak phase excursion `k n d`, radians.
    pub fn knd(&self, field: &OpticalField) -> f64 {
        field.wavenumber() * field.refractive_index * self.displacement_m()
    }

    /// True when the truncated harmonic expansion holds at stated tolerances
    /// (`k n d < 0.5 rad`).
    pub fn in_small_modulation_regime(&self, field: &OpticalField) -> bool {
        self.knd(field) < SMALL_MODULATION_LIMIT_RAD
    }
}

/// Mean relative phase between the arms and the residual quality of its lock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockPoint {
    /// Mean phase offset, radians, normalized to [0, 2 pi). pi/2 reads the
    /// phase quadrature, 0 the amplitude quadrature.
    pub mean_phase_rad: f64,
    /// RMS of the residual lock jitter beyond shot noise, radians.
    pub residual_jitter_rad: f64,
}

impl LockPoint {
    pub fn new(mean_phase_rad: f64, residual_jitter_rad: f64) -> Result<Self> {
        if !mean_phase_rad.is_finite() {
            return Err(Error::Config("lock phase must be finite".into()));
        }
        if !(residual_jitter_rad >= 0.0) {
            return Err(Error::Config(format!(
                "residual_jitter_rad must be >= 0, got {residual_jitter_rad}"
            )));
        }
        Ok(Self {
            mean_phase_rad: mean_phase_rad.rem_euclid(std::f64::consts::TAU),
            residual_jitter_rad,
        })
    }

    /// Phase-quadrature lock (`<phi0> = pi/2`), where the fundamental
    /// harmonic is maximal.
    pub fn phase_quadrature(residual_jitter_rad: f64) -> Result<Self> {
        Self::new(std::f64::consts::FRAC_PI_2, residual_jitter_rad)
    }

    /// Amplitude-quadrature lock (`<phi0> = 0`), where the second harmonic
    /// is maximal.
    pub fn amplitude_quadrature(residual_jitter_rad: f64) -> Result<Self> {
        Self::new(0.0, residual_jitter_rad)
    }
}

/// Quadrature variances of the signal field. The shot-noise floor for a
/// coherent state is 1/4 in each quadrature; quadrature correlations are
/// taken to vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureNoise {
    /// Amplitude-quadrature variance `<dA_sig^2>`, dimensionless.
    pub amp_var: f64,
    /// Scaled phase-quadrature variance `A_sig^2 <dphi0^2>`, dimensionless.
    pub phase_var_scaled: f64,
}

impl QuadratureNoise {
    /// Shot-noise quantum limit for a coherent state.
    pub const SHOT_NOISE_VAR: f64 = 0.25;

    pub fn new(amp_var: f64, phase_var_scaled: f64) -> Result<Self> {
        if amp_var < Self::SHOT_NOISE_VAR || phase_var_scaled < Self::SHOT_NOISE_VAR {
            return Err(Error::Config(format!(
                "quadrature variances must be >= 1/4 (coherent-state floor), \
                 got amp {amp_var}, phase {phase_var_scaled}"
            )));
        }
        Ok(Self {
            amp_var,
            phase_var_scaled,
        })
    }

    /// Both quadratures exactly at the coherent-state floor.
    pub fn shot_noise() -> Self {
        Self {
            amp_var: Self::SHOT_NOISE_VAR,
            phase_var_scaled: Self::SHOT_NOISE_VAR,
        }
    }

    pub fn is_shot_noise_limited(&self) -> bool {
        self.amp_var == Self::SHOT_NOISE_VAR && self.phase_var_scaled == Self::SHOT_NOISE_VAR
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Bessel function of the first kind `J_order(x)` by the ascending power
/// series with term-ratio termination, valid for `|x| <= 20`.
///
/// `J_n(x) = sum_m (-1)^m (x/2)^(n+2m) / (m! (n+m)!)`
pub fn bessel_j(order: i32, x: f64) -> Result<f64> {
    if order < 0 {
        return Err(Error::Domain(format!(
            "bessel_j order must be >= 0, got {order}"
        )));
    }
    if !x.is_finite() || x.abs() > BESSEL_MAX_ARG {
        return Err(Error::Domain(format!(
            "bessel_j argument must satisfy |x| <= {BESSEL_MAX_ARG}, got {x}"
        )));
    }
    let n = order as u32;
    let half = 0.5 * x;
    // Leading term (x/2)^n / n!.
    let mut term = 1.0;
    for j in 1..=n {
        term *= half / j as f64;
    }
    let ratio = -half * half;
    let mut sum = term;
    for m in 1..=250u32 {
        term *= ratio / (m as f64 * (n + m) as f64);
        sum += term;
        if term.abs() <= BESSEL_TERM_RATIO * sum.abs() {
            break;
        }
    }
    Ok(sum)
}

/// Mean homodyne signal `2 eta A_lo A_sig cos(phi_rel)` per unit field
/// amplitudes (A_lo = A_sig = 1); the photon-number scale is applied by the
/// synthesis layer. The field argument fixes the regime the detection chain
/// operates in.
pub fn homodyne_mean(field: &OpticalField, det: &DetectionChain, phi_rel: f64) -> f64 {
    let _ = field;
    2.0 * det.eta() * phi_rel.cos()
}

/// Instantaneous modulation phase
/// `phi_mod(t) = (2 pi / lambda) n d(V) sin(2 pi f t)`, radians.
pub fn modulation_phase(modulation: &Modulation, field: &OpticalField, t_s: f64) -> f64 {
    modulation.knd(field) * (std::f64::consts::TAU * modulation.frequency_hz * t_s).sin()
}

/// Signed amplitude SNRs of the modulation harmonics for a signal field of
/// `n_sig_photons` photons in the analysis window:
///
/// - order 0: `2 sqrt(N) J0(knd) cos(phi0)`
/// - odd m:   `-4 sqrt(N) Jm(knd) sin(phi0)`
/// - even m:  `+4 sqrt(N) Jm(knd) cos(phi0)`
pub fn snr_harmonics(
    n_sig_photons: f64,
    knd: f64,
    phi0: f64,
    max_order: usize,
) -> Result<Vec<(u32, f64)>> {
    if !(n_sig_photons >= 0.0) {
        return Err(Error::Domain(format!(
            "photon number must be >= 0, got {n_sig_photons}"
        )));
    }
    if !(knd >= 0.0) {
        return Err(Error::Domain(format!("knd must be >= 0, got {knd}")));
    }
    if max_order < 2 {
        return Err(Error::Domain(format!(
            "max_order must be >= 2, got {max_order}"
        )));
    }
    let amp = n_sig_photons.sqrt();
    let (sin0, cos0) = phi0.sin_cos();
    let mut out = Vec::with_capacity(max_order + 1);
    out.push((0, 2.0 * amp * bessel_j(0, knd)? * cos0));
    for m in 1..=max_order {
        let jm = bessel_j(m as i32, knd)?;
        let value = if m % 2 == 1 {
            -4.0 * amp * jm * sin0
        } else {
            4.0 * amp * jm * cos0
        };
        out.push((m as u32, value));
    }
    Ok(out)
}

/// Standard deviation of the homodyne photocurrent within the analysis
/// window:
///
/// `dS = 2 eta A_lo sqrt(amp_var cos^2 phi0 + phase_var sin^2 phi0)`
///
/// with `A_lo = sqrt(N_lo)` over the integration window `0.44/rbw`. At the
/// shot-noise limit this reduces to `eta A_lo`, independent of the
/// quadrature.
pub fn homodyne_noise_std(
    field: &OpticalField,
    det: &DetectionChain,
    phi0: f64,
    noise: &QuadratureNoise,
) -> f64 {
    let n_lo = photon_number(field.lo_power_w, field.wavelength_m, det.rbw_hz, 1.0)
        .expect("validated field/detection parameters");
    let (sin0, cos0) = phi0.sin_cos();
    let quad_var = noise.amp_var * cos0 * cos0 + noise.phase_var_scaled * sin0 * sin0;
    2.0 * det.eta() * n_lo.sqrt() * quad_var.sqrt()
}

/// Exact and small-angle forms of the second-to-first harmonic ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicRatio {
    /// `J2(knd) / J1(knd)`.
    pub exact: f64,
    /// `knd / 4`; relative deviation from `exact` is bounded by `knd^2 / 8`
    /// in the small-modulation regime.
    pub small_angle: f64,
}

/// Ratio of the second- and first-harmonic SNRs, independent of the signal
/// field strength.
pub fn harmonic_ratio(knd: f64) -> Result<HarmonicRatio> {
    if !(knd > 0.0) {
        return Err(Error::Domain(format!(
            "harmonic ratio undefined at knd = {knd}; need knd > 0"
        )));
    }
    let j1 = bessel_j(1, knd)?;
    let j2 = bessel_j(2, knd)?;
    Ok(HarmonicRatio {
        exact: j2 / j1,
        small_angle: 0.25 * knd,
    })
}

/// Invert a measured `Sigma2/Sigma1` ratio into a path displacement, meters.
///
/// Uses the linear form `d = 4 r / (k n)` for tiny ratios and a bisection
/// root-find on `J2(x)/J1(x) = r` above [`EXACT_INVERSION_MIN_RATIO`], where
/// the linear approximation has degraded beyond ~4e-6 relative.
pub fn invert_ratio(measured_ratio: f64, field: &OpticalField) -> Result<f64> {
    check_invertible(measured_ratio)?;
    let kn = field.wavenumber() * field.refractive_index;
    if measured_ratio < EXACT_INVERSION_MIN_RATIO {
        Ok(4.0 * measured_ratio / kn)
    } else {
        Ok(solve_ratio_for_knd(measured_ratio)? / kn)
    }
}

/// Exact inversion of the measured ratio by root-finding on `J2/J1` over the
/// full invertible range, regardless of magnitude.
pub fn invert_ratio_exact(measured_ratio: f64, field: &OpticalField) -> Result<f64> {
    check_invertible(measured_ratio)?;
    let kn = field.wavenumber() * field.refractive_index;
    Ok(solve_ratio_for_knd(measured_ratio)? / kn)
}

fn check_invertible(ratio: f64) -> Result<()> {
    if !(ratio > 0.0) {
        return Err(Error::Domain(format!(
            "harmonic ratio must be > 0 to invert, got {ratio}"
        )));
    }
    if ratio >= MAX_INVERTIBLE_RATIO {
        return Err(Error::Regime(format!(
            "ratio {ratio} is outside the small-modulation regime \
             (need ratio < {MAX_INVERTIBLE_RATIO}, i.e. knd < 0.5 rad)"
        )));
    }
    Ok(())
}

/// Bisection on the strictly increasing `J2(x)/J1(x)` over (0, ~0.52].
fn solve_ratio_for_knd(ratio: f64) -> Result<f64> {
    let f = |x: f64| -> Result<f64> { Ok(harmonic_ratio(x)?.exact - ratio) };
    let mut lo = 1e-12;
    let mut hi = 0.52;
    if f(hi)? < 0.0 {
        return Err(Error::Regime(format!(
            "ratio {ratio} has no root below knd = 0.52"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Number of photons collected in one resolution-bandwidth integration
/// window: `N = efficiency * P * (0.44 / rbw) / (h c / lambda)`.
pub fn photon_number(power_w: f64, wavelength_m: f64, rbw_hz: f64, efficiency: f64) -> Result<f64> {
    if !(power_w >= 0.0) {
        return Err(Error::Domain(format!("power must be >= 0, got {power_w}")));
    }
    if !(wavelength_m > 0.0) || !(rbw_hz > 0.0) {
        return Err(Error::Domain(format!(
            "wavelength and rbw must be > 0, got {wavelength_m}, {rbw_hz}"
        )));
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::Domain(format!(
            "efficiency must be in (0, 1], got {efficiency}"
        )));
    }
    let photon_energy_j = PLANCK_CONSTANT_J_S * SPEED_OF_LIGHT_M_S / wavelength_m;
    let dt_s = GAUSSIAN_INTEGRATION_TIME_FACTOR / rbw_hz;
    Ok(efficiency * power_w * dt_s / photon_energy_j)
}

/// Standard-quantum-limit displacement `lambda / (4 pi sqrt(N))`, meters.
pub fn sql_displacement(wavelength_m: f64, n_photons: f64) -> Result<f64> {
    if !(wavelength_m > 0.0) || !(n_photons > 0.0) {
        return Err(Error::Domain(format!(
            "sql_displacement needs positive wavelength and photon number, \
             got {wavelength_m}, {n_photons}"
        )));
    }
    Ok(wavelength_m / (4.0 * std::f64::consts::PI * n_photons.sqrt()))
}

/// Smallest observable phase modulation `1 / (2 sqrt(N))`, radians — the
/// homodyne detection limit, which coincides with the Cramer-Rao bound for
/// coherent-state phase estimation.
pub fn min_detectable_phase_rad(n_photons: f64) -> Result<f64> {
    if !(n_photons > 0.0) {
        return Err(Error::Domain(format!(
            "photon number must be > 0, got {n_photons}"
        )));
    }
    Ok(0.5 / n_photons.sqrt())
}

/// Remove quadrature-dependent classical noise from a measured harmonic
/// ratio. With classical noise the measured ratio becomes
/// `(knd/4) * (phase_noise_rel / amp_noise_rel)`, so
///
/// `corrected = raw * amp_noise_rel_second / phase_noise_rel_fundamental`
///
/// recovers `knd/4`. Both noise factors are standard deviations relative to
/// the shot-noise limit, at the fundamental (phase quadrature) and second
/// harmonic (amplitude quadrature) respectively.
pub fn classical_noise_corrected_ratio(
    raw_ratio: f64,
    phase_noise_rel_fundamental: f64,
    amp_noise_rel_second: f64,
) -> Result<f64> {
    if !(raw_ratio > 0.0) {
        return Err(Error::Domain(format!(
            "raw ratio must be > 0, got {raw_ratio}"
        )));
    }
    if phase_noise_rel_fundamental < 1.0 || amp_noise_rel_second < 1.0 {
        return Err(Error::Domain(format!(
            "relative noise factors must be >= 1 (sub-shot-noise needs nonclassical light), \
             got phase {phase_noise_rel_fundamental}, amp {amp_noise_rel_second}"
        )));
    }
    Ok(raw_ratio * amp_noise_rel_second / phase_noise_rel_fundamental)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn reference_field() -> OpticalField {
        OpticalField::new(795e-9, 115e-6, 1.5e-3, 1.0).unwrap()
    }

    fn reference_detection() -> DetectionChain {
        DetectionChain::new(0.667, 1.0, 50.0, 5.0).unwrap()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn bessel_j0_at_zero_is_one() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn bessel_j1_small_argument_is_half_x() {
        let x = 0.004347;
        let j1 = bessel_j(1, x).unwrap();
        assert!(rel_err(j1, 0.0021734948660859) < 1e-12);
        // First-order form x/2, deviation bounded by x^2/8.
        assert!(rel_err(j1, x / 2.0) <= x * x / 8.0);
    }

    #[test]
    fn bessel_matches_frozen_oracle_values() {
        // Frozen from the exact-rational series oracle (50 terms).
        assert!(rel_err(bessel_j(1, 1.0).unwrap(), 0.4400505857449335) < 1e-14);
        assert!(rel_err(bessel_j(2, 1.0).unwrap(), 0.1149034849319005) < 1e-14);
        assert!(rel_err(bessel_j(0, 0.3).unwrap(), 0.9776262465382961) < 1e-14);
        assert!(rel_err(bessel_j(4, 0.3).unwrap(), 2.0999005912958371e-5) < 1e-13);
    }

    #[test]
    fn bessel_negative_order_is_domain_error() {
        assert!(matches!(bessel_j(-1, 1.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_j(0, 25.0), Err(Error::Domain(_))));
    }

    #[test]
    fn homodyne_mean_cosine_structure() {
        let field = reference_field();
        let det = reference_detection();
        assert!(homodyne_mean(&field, &det, FRAC_PI_2).abs() < 1e-16);
        let max = homodyne_mean(&field, &det, 0.0);
        assert!(rel_err(max, 2.0 * det.eta()) < 1e-15);
        assert!(rel_err(homodyne_mean(&field, &det, PI), -max) < 1e-12);
    }

    #[test]
    fn modulation_phase_examples() {
        let field = reference_field();
        let m = Modulation::new(2e6, 0.55e-10, 10.0).unwrap();
        assert_eq!(
            modulation_phase(&Modulation::new(2e6, 0.55e-10, 0.0).unwrap(), &field, 1e-3),
            0.0
        );
        assert_eq!(modulation_phase(&m, &field, 0.0), 0.0);
        // Quarter period: sin = 1, phase = k n d = 4.3469e-3 rad.
        let quarter = 0.25 / 2e6;
        let phi = modulation_phase(&m, &field, quarter);
        assert!(rel_err(phi, 4.346857759684e-3) < 1e-10);
    }

    #[test]
    fn snr_harmonics_paper_point() {
        // N and knd of the sensitivity figure: |Sigma1| = 4 sqrt(N) J1(knd).
        let n = 2.7e12;
        let knd = 4.347e-3;
        let h = snr_harmonics(n, knd, FRAC_PI_2, 4).unwrap();
        assert_eq!(h[0].0, 0);
        // cos(pi/2) kills the even orders.
        assert!(h[0].1.abs() < 2.0 * n.sqrt() * 1e-15);
        assert!(h[2].1.abs() < 4.0 * n.sqrt() * 1e-15);
        let sigma1 = h[1].1.abs();
        assert!(rel_err(sigma1, 1.4286e4) < 1e-3);
        // Small-angle form 2 sqrt(N) knd.
        assert!(rel_err(sigma1, 2.0 * n.sqrt() * knd) <= knd * knd / 8.0);
    }

    #[test]
    fn snr_harmonics_zero_modulation_keeps_only_order_zero() {
        let h = snr_harmonics(1e10, 0.0, 0.3, 5).unwrap();
        assert!(rel_err(h[0].1, 2.0 * 1e5 * 0.3f64.cos()) < 1e-14);
        for (order, value) in &h[1..] {
            assert_eq!(*value, 0.0, "order {order} must vanish at knd = 0");
        }
    }

    #[test]
    fn snr_threshold_is_half_inverse_sqrt_n() {
        // |Sigma1| = 1 at knd = 1/(2 sqrt N).
        let n = 2.7e12;
        let knd = min_detectable_phase_rad(n).unwrap();
        let h = snr_harmonics(n, knd, FRAC_PI_2, 2).unwrap();
        assert!(rel_err(h[1].1.abs(), 1.0) < 1e-7);
    }

    #[test]
    fn noise_std_shot_limited_is_quadrature_independent() {
        let field = reference_field();
        let det = reference_detection();
        let shot = QuadratureNoise::shot_noise();
        let expected =
            det.eta() * photon_number(1.5e-3, 795e-9, 50.0, 1.0).unwrap().sqrt();
        for phi in [0.0, 0.3, FRAC_PI_2, 2.0, PI] {
            assert!(rel_err(homodyne_noise_std(&field, &det, phi, &shot), expected) < 1e-13);
        }
    }

    #[test]
    fn noise_std_picks_quadrature_variance() {
        let field = reference_field();
        let det = reference_detection();
        let noise = QuadratureNoise::new(1.0, 0.25).unwrap();
        let a_lo = photon_number(1.5e-3, 795e-9, 50.0, 1.0).unwrap().sqrt();
        // cos^2 picks out the amplitude variance at phi0 = 0.
        assert!(rel_err(
            homodyne_noise_std(&field, &det, 0.0, &noise),
            2.0 * det.eta() * a_lo
        ) < 1e-13);
        // Equal variances are quadrature-independent.
        let v = QuadratureNoise::new(0.7, 0.7).unwrap();
        let r0 = homodyne_noise_std(&field, &det, 0.0, &v);
        let r1 = homodyne_noise_std(&field, &det, 1.1, &v);
        assert!(rel_err(r0, 2.0 * det.eta() * a_lo * 0.7f64.sqrt()) < 1e-13);
        assert!(rel_err(r0, r1) < 1e-13);
    }

    #[test]
    fn harmonic_ratio_examples() {
        let r = harmonic_ratio(4.347e-3).unwrap();
        assert!(rel_err(r.small_angle, 1.0868e-3) < 1e-3);
        // Frozen from the Bessel oracle: J2(0.2)/J1(0.2).
        let r = harmonic_ratio(0.2).unwrap();
        assert!(rel_err(r.exact, 0.05008354222373096) < 1e-12);
        assert!(rel_err(r.exact, r.small_angle) <= 0.2 * 0.2 / 8.0);
        // Leading-order behaviour: exact/small -> 1 as knd -> 0+.
        let tiny = harmonic_ratio(1e-6).unwrap();
        assert!(rel_err(tiny.exact, tiny.small_angle) < 1e-9);
        assert!(matches!(harmonic_ratio(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn invert_ratio_examples() {
        let field = reference_field();
        // Calibration-regime point: ratio 1.0868e-3 -> 5.5e-10 m.
        let d = invert_ratio(1.0868e-3, &field).unwrap();
        assert!(rel_err(d, 5.5e-10) < 1e-3);
        // Exact root-find at ratio 0.05: knd = 0.199667497784 (oracle), and
        // the linear form 0.2/(k n) agrees within the knd^2/8 regime bound.
        let exact = invert_ratio_exact(0.05, &field).unwrap();
        let kn = field.wavenumber();
        assert!(rel_err(exact, 0.199667497783704 / kn) < 1e-10);
        let linear = 4.0 * 0.05 / kn;
        assert!(rel_err(exact, linear) <= 0.2 * 0.2 / 8.0);
        // Out-of-regime and degenerate inputs.
        assert!(matches!(invert_ratio(0.2, &field), Err(Error::Regime(_))));
        assert!(matches!(invert_ratio(0.0, &field), Err(Error::Domain(_))));
        // ratio -> 0 limit: d -> 0.
        assert!(invert_ratio(1e-12, &field).unwrap() < 1e-17);
    }

    #[test]
    fn photon_number_paper_values() {
        let n = photon_number(115e-6, 795e-9, 50.0, 1.0).unwrap();
        assert!(rel_err(n, 4.0501e12) < 1e-4);
        let n_eff = photon_number(115e-6, 795e-9, 50.0, 0.667).unwrap();
        assert!(rel_err(n_eff, 2.7e12) < 0.02);
        assert_eq!(photon_number(0.0, 795e-9, 50.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn sql_displacement_paper_values() {
        let n = 2.7e12;
        let sql = sql_displacement(795e-9, n).unwrap();
        assert!(rel_err(sql, 3.85e-14) < 2e-3);
        assert!(rel_err(sql / 50f64.sqrt(), 5.45e-15) < 2e-3);
        // 1/sqrt(N) scaling: quadrupling N halves the limit.
        let sql4 = sql_displacement(795e-9, 4.0 * n).unwrap();
        assert!(rel_err(sql4, sql / 2.0) < 1e-12);
    }

    #[test]
    fn classical_noise_correction_examples() {
        assert_eq!(classical_noise_corrected_ratio(5e-4, 1.0, 1.0).unwrap(), 5e-4);
        assert!(rel_err(
            classical_noise_corrected_ratio(5e-4, 2.0, 1.0).unwrap(),
            2.5e-4
        ) < 1e-15);
        assert!(rel_err(
            classical_noise_corrected_ratio(1e-4, 1.0, 3.0).unwrap(),
            3e-4
        ) < 1e-15);
        assert!(matches!(
            classical_noise_corrected_ratio(1e-4, 0.5, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn quadrature_noise_floor_enforced() {
        assert!(QuadratureNoise::new(0.1, 0.25).is_err());
        assert!(QuadratureNoise::shot_noise().is_shot_noise_limited());
        assert!(!QuadratureNoise::new(0.3, 0.25).unwrap().is_shot_noise_limited());
    }

    #[test]
    fn lock_point_normalizes_phase() {
        let lock = LockPoint::new(-FRAC_PI_2, 0.0).unwrap();
        assert!((lock.mean_phase_rad - 1.5 * PI).abs() < 1e-15);
        assert!(LockPoint::new(0.0, -1.0).is_err());
    }

    #[test]
    fn bessel_even_order_sum_identity() {
        // J0(x) + 2 sum_{m=1..10} J_{2m}(x) = 1.
        for i in 1..=20 {
            let x = i as f64 * 0.05;
            let mut sum = bessel_j(0, x).unwrap();
            for m in 1..=10 {
                sum += 2.0 * bessel_j(2 * m, x).unwrap();
            }
            assert!((sum - 1.0).abs() <= 1e-12, "identity failed at x = {x}");
        }
    }

    #[test]
    fn sql_phase_displacement_consistency() {
        // sql(lambda, N) * 2 sqrt(N) * k = 1.
        for n in [1e6, 2.7e12, 9e15] {
            let lambda = 795e-9;
            let product = sql_displacement(lambda, n).unwrap() * 2.0 * n.sqrt() * TAU / lambda;
            assert!((product - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        /// Reconstructing cos(phi0 + knd sin wt) from the harmonic
        /// coefficients matches the direct evaluation pointwise.
        #[test]
        fn jacobi_anger_reconstruction(
            knd in 1e-4f64..0.5,
            phi0 in 0.0f64..TAU,
            frac in 0.0f64..1.0,
        ) {
            let n = 1.0; // coefficients divided by 2 sqrt(N), so N is arbitrary
            let harmonics = snr_harmonics(n, knd, phi0, 8).unwrap();
            let wt = TAU * frac;
            let mut reconstructed = harmonics[0].1 / 2.0;
            for (m, value) in &harmonics[1..] {
                let basis = if m % 2 == 1 {
                    (*m as f64 * wt).sin()
                } else {
                    (*m as f64 * wt).cos()
                };
                // Coefficient stored as +-4 sqrt(N) Jm; the expansion carries
                // -2 Jm sin(phi0) sin / +2 Jm cos(phi0) cos per unit 2 sqrt(N).
                reconstructed += value / 2.0 * basis;
            }
            let direct = (phi0 + knd * wt.sin()).cos();
            prop_assert!((reconstructed - direct).abs() <= 1e-10);
        }

        /// Harmonic ratios are independent of the field strength.
        #[test]
        fn ratio_field_strength_independence(
            knd in 1e-4f64..0.5,
            n in 1e6f64..1e14,
        ) {
            let at = |photons: f64| {
                let s1 = snr_harmonics(photons, knd, FRAC_PI_2, 2).unwrap()[1].1.abs();
                let s2 = snr_harmonics(photons, knd, 0.0, 2).unwrap()[2].1.abs();
                s2 / s1
            };
            // sqrt(N) cancels by construction; only prefactor rounding remains.
            prop_assert!((at(n) / at(100.0 * n) - 1.0).abs() < 1e-14);
        }

        /// Shot-noise-limited noise is constant in the lock phase.
        #[test]
        fn noise_quadrature_independence(phi0 in 0.0f64..TAU) {
            let field = reference_field();
            let det = reference_detection();
            let shot = QuadratureNoise::shot_noise();
            let at_zero = homodyne_noise_std(&field, &det, 0.0, &shot);
            let at_phi = homodyne_noise_std(&field, &det, phi0, &shot);
            prop_assert!((at_phi / at_zero - 1.0).abs() < 1e-12);
        }

        /// invert_ratio inverts harmonic_ratio across the regime.
        #[test]
        fn invert_ratio_roundtrip(knd in 1e-4f64..0.3) {
            let field = reference_field();
            let ratio = harmonic_ratio(knd).unwrap().exact;
            let d = invert_ratio(ratio, &field).unwrap();
            let d_true = knd / field.wavenumber();
            prop_assert!((d / d_true - 1.0).abs() <= 1e-6);
        }
    }
}
