//! Experiment orchestration: voltage sweeps at both lock points, the
//! harmonic-ratio calibration fit, growth-exponent checks, the sensitivity
//! crossing, and comparison against the standard quantum limit.

use rayon::prelude::*;
use serde::Serialize;

use crate::dsp::{self, Detector, HarmonicMeasurement, ZeroSpanSettings};
use crate::error::{Error, Result};
use crate::model::{self, OpticalField};
use crate::synth::{self, SynthesisPlan};

/// Default piezo drive range accepted by sweeps, volts.
pub const PIEZO_RANGE_V: (f64, f64) = (0.0, 10.0);

/// Points with a debiased SNR at or below this value are excluded from the
/// ratio and exponent fits: the ratio estimate is unstable against the noise
/// floor there. Configurable through [`calibrate_displacement_with`].
pub const DEFAULT_SNR_EXCLUSION_THRESHOLD: f64 = 3.0;

/// Seeds for the two lock points of one sweep voltage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointSeeds {
    pub fundamental: u64,
    pub second_harmonic: u64,
}

impl PointSeeds {
    /// Derive both lock seeds for a voltage index from a base seed; adding
    /// voltage points never perturbs existing points' data.
    pub fn derive(base_seed: u64, voltage_index: usize) -> Self {
        Self {
            fundamental: synth::derive_point_seed(base_seed, voltage_index, 0),
            second_harmonic: synth::derive_point_seed(base_seed, voltage_index, 1),
        }
    }

    pub fn derive_all(base_seed: u64, count: usize) -> Vec<Self> {
        (0..count).map(|i| Self::derive(base_seed, i)).collect()
    }
}

/// Harmonic measurements across a voltage sweep: the fundamental at the
/// phase-quadrature lock and the second harmonic at the amplitude-quadrature
/// lock.
#[derive(Debug, Clone)]
pub struct SweepDataset {
    pub voltages_v: Vec<f64>,
    pub fundamental: Vec<HarmonicMeasurement>,
    pub second_harmonic: Vec<HarmonicMeasurement>,
    pub plan_metadata: SynthesisPlan,
}

impl SweepDataset {
    pub fn validate(&self) -> Result<()> {
        if self.voltages_v.len() != self.fundamental.len()
            || self.voltages_v.len() != self.second_harmonic.len()
        {
            return Err(Error::Config(format!(
                "sweep arrays must have equal lengths: {} voltages, {} fundamental, {} second",
                self.voltages_v.len(),
                self.fundamental.len(),
                self.second_harmonic.len()
            )));
        }
        if self.voltages_v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep voltages must be strictly increasing".into()));
        }
        for m in &self.fundamental {
            if m.order != 1 || (m.lock_phase_rad - std::f64::consts::FRAC_PI_2).abs() > 1e-9 {
                return Err(Error::Config(
                    "fundamental entries must be order 1 at the pi/2 lock".into(),
                ));
            }
        }
        for m in &self.second_harmonic {
            if m.order != 2 || m.lock_phase_rad.min(std::f64::consts::TAU - m.lock_phase_rad) > 1e-9 {
                return Err(Error::Config(
                    "second-harmonic entries must be order 2 at the 0 lock".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Run the two-lock voltage sweep: for each voltage, synthesize a trace at
/// the phase-quadrature lock and extract the fundamental SNR, then at the
/// amplitude-quadrature lock and extract the second harmonic. Points run in
/// parallel on the current rayon pool; results are assembled in voltage
/// order.
pub fn run_voltage_sweep(
    plan_template: &SynthesisPlan,
    voltages_v: &[f64],
    seeds: &[PointSeeds],
) -> Result<SweepDataset> {
    if voltages_v.is_empty() {
        return Err(Error::Config("voltage grid must be nonempty".into()));
    }
    if seeds.len() != voltages_v.len() {
        return Err(Error::Config(format!(
            "need one seed pair per voltage: {} voltages, {} seed pairs",
            voltages_v.len(),
            seeds.len()
        )));
    }
    if voltages_v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("sweep voltages must be strictly increasing".into()));
    }
    for &v in voltages_v {
        if !(PIEZO_RANGE_V.0..=PIEZO_RANGE_V.1).contains(&v) {
            return Err(Error::Config(format!(
                "voltage {v} V outside the piezo range {:?}",
                PIEZO_RANGE_V
            )));
        }
    }
    plan_template.validate()?;

    let jitter = plan_template.lock.residual_jitter_rad;
    let points: Vec<Result<(HarmonicMeasurement, HarmonicMeasurement)>> = voltages_v
        .par_iter()
        .zip(seeds.par_iter())
        .enumerate()
        .map(|(index, (&voltage, seed))| {
            measure_point(plan_template, voltage, jitter, seed)
                .map_err(|e| e.at_voltage_index(index))
        })
        .collect();

    let mut fundamental = Vec::with_capacity(points.len());
    let mut second_harmonic = Vec::with_capacity(points.len());
    for point in points {
        let (f, s) = point?;
        fundamental.push(f);
        second_harmonic.push(s);
    }
    let dataset = SweepDataset {
        voltages_v: voltages_v.to_vec(),
        fundamental,
        second_harmonic,
        plan_metadata: plan_template.clone(),
    };
    dataset.validate()?;
    Ok(dataset)
}

fn measure_point(
    template: &SynthesisPlan,
    voltage: f64,
    jitter: f64,
    seed: &PointSeeds,
) -> Result<(HarmonicMeasurement, HarmonicMeasurement)> {
    let settings = ZeroSpanSettings::new(
        template.modulation.frequency_hz,
        template.det.rbw_hz,
        template.det.vbw_hz,
        Detector::AveragePower,
    )?;
    let mod_freq = template.modulation.frequency_hz;

    let mut plan = template.clone();
    plan.modulation.drive_voltage_v = voltage;
    plan.lock = model::LockPoint::phase_quadrature(jitter)?;
    plan.rng_seed = seed.fundamental;
    let trace = synth::synthesize_trace(&plan)?;
    let fundamental = dsp::extract_harmonic_snr(&trace, mod_freq, 1, &settings)?;
    drop(trace);

    plan.lock = model::LockPoint::amplitude_quadrature(jitter)?;
    plan.rng_seed = seed.second_harmonic;
    let trace = synth::synthesize_trace(&plan)?;
    let second = dsp::extract_harmonic_snr(&trace, mod_freq, 2, &settings)?;
    Ok((fundamental, second))
}

// ---------------------------------------------------------------------------
// Weighted least squares
// ---------------------------------------------------------------------------

/// Weighted linear fit `y = slope x + intercept` with parameter standard
/// errors from the covariance matrix.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub reduced_chi_sq: f64,
}

/// Closed-form weighted least squares with intercept, weights `1/stderr^2`.
pub fn fit_linear_weighted(x: &[f64], y: &[f64], y_stderr: &[f64]) -> Result<LinearFit> {
    if x.len() < 3 || x.len() != y.len() || x.len() != y_stderr.len() {
        return Err(Error::Insufficiency(format!(
            "weighted fit needs >= 3 points with matching stderr, got {}/{}/{}",
            x.len(),
            y.len(),
            y_stderr.len()
        )));
    }
    if y_stderr.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Config("per-point stderr must be > 0".into()));
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let w = 1.0 / (y_stderr[i] * y_stderr[i]);
        sw += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    let delta = sw * sxx - sx * sx;
    // Degenerate abscissa: all x equal up to rounding.
    if delta <= f64::EPSILON * sw * sxx {
        return Err(Error::Rank("degenerate abscissa: all x values coincide".into()));
    }
    let slope = (sw * sxy - sx * sy) / delta;
    let intercept = (sxx * sy - sx * sxy) / delta;
    let chi_sq: f64 = (0..x.len())
        .map(|i| {
            let r = (y[i] - slope * x[i] - intercept) / y_stderr[i];
            r * r
        })
        .sum();
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: (sw / delta).sqrt(),
        intercept_stderr: (sxx / delta).sqrt(),
        reduced_chi_sq: chi_sq / (x.len() as f64 - 2.0),
    })
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// Outcome of the harmonic-ratio calibration.
#[derive(Debug, Clone)]
pub struct CalibrationFit {
    /// Weighted fit of `Sigma2/Sigma1` against drive voltage.
    pub ratio_fit: LinearFit,
    pub displacement_per_volt_m: f64,
    pub displacement_per_volt_stderr_m: f64,
    /// False when the fitted intercept deviates from zero beyond 3 sigma,
    /// hinting at a systematic error.
    pub intercept_consistent_with_zero: bool,
    /// Sweep indices excluded from the fit (zero voltage or low SNR).
    pub excluded_indices: Vec<usize>,
}

/// Calibrate the piezo slope from the harmonic ratio versus voltage, with
/// the default SNR exclusion threshold.
pub fn calibrate_displacement(sweep: &SweepDataset, field: &OpticalField) -> Result<CalibrationFit> {
    calibrate_displacement_with(sweep, field, DEFAULT_SNR_EXCLUSION_THRESHOLD)
}

/// Calibrate the piezo slope. Points at zero voltage or with either
/// harmonic's debiased SNR at or below `snr_threshold` are excluded; the
/// surviving ratios are fitted linearly against voltage, and the ratio slope
/// maps to a displacement slope through `d = 4 r / (k n)`.
pub fn calibrate_displacement_with(
    sweep: &SweepDataset,
    field: &OpticalField,
    snr_threshold: f64,
) -> Result<CalibrationFit> {
    sweep.validate()?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut errs = Vec::new();
    let mut excluded = Vec::new();
    for i in 0..sweep.voltages_v.len() {
        let v = sweep.voltages_v[i];
        let f = &sweep.fundamental[i];
        let s = &sweep.second_harmonic[i];
        let snr1 = f.debiased_snr();
        let snr2 = s.debiased_snr();
        if v == 0.0 || snr1 <= snr_threshold || snr2 <= snr_threshold {
            excluded.push(i);
            log::warn!(
                "sweep point {i} (V = {v}) excluded from the ratio fit: \
                 SNRs {snr1:.2}/{snr2:.2} against threshold {snr_threshold}"
            );
            continue;
        }
        // Debiased-SNR errors: d(debiased)/d(raw) = raw/debiased.
        let e1 = f.snr_stderr * f.snr_amplitude / snr1;
        let e2 = s.snr_stderr * s.snr_amplitude / snr2;
        let ratio = snr2 / snr1;
        let stderr = ratio * ((e1 / snr1).powi(2) + (e2 / snr2).powi(2)).sqrt();
        xs.push(v);
        ys.push(ratio);
        errs.push(stderr);
    }
    if xs.len() < 4 {
        return Err(Error::Insufficiency(format!(
            "only {} sweep points survive the SNR threshold; need >= 4 for the ratio fit",
            xs.len()
        )));
    }
    if ys.iter().any(|&r| r >= model::MAX_INVERTIBLE_RATIO) {
        return Err(Error::Regime(
            "sweep reaches harmonic ratios outside the small-modulation regime".into(),
        ));
    }

    let fit = fit_linear_weighted(&xs, &ys, &errs)?;
    let intercept_consistent_with_zero = fit.intercept.abs() <= 3.0 * fit.intercept_stderr;
    if !intercept_consistent_with_zero {
        log::warn!(
            "ratio-fit intercept {:.3e} +- {:.3e} is inconsistent with zero; \
             possible systematic error",
            fit.intercept,
            fit.intercept_stderr
        );
    }
    // Ratio slope (1/V) -> displacement slope: d/V = 4 (dr/dV) / (k n).
    let kn = field.wavenumber() * field.refractive_index;
    Ok(CalibrationFit {
        ratio_fit: fit,
        displacement_per_volt_m: 4.0 * fit.slope / kn,
        displacement_per_volt_stderr_m: 4.0 * fit.slope_stderr / kn,
        intercept_consistent_with_zero,
        excluded_indices: excluded,
    })
}

// ---------------------------------------------------------------------------
// Growth exponents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExponentEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Log-log growth exponents of the two harmonics against voltage.
#[derive(Debug, Clone, Copy)]
pub struct GrowthExponents {
    pub fundamental: ExponentEstimate,
    pub second: ExponentEstimate,
    /// Set when the fundamental grows significantly slower than linearly,
    /// the signature of Bessel saturation outside the small-modulation
    /// regime.
    pub out_of_regime: bool,
}

pub fn growth_exponents(sweep: &SweepDataset) -> Result<GrowthExponents> {
    sweep.validate()?;
    let fundamental = exponent_fit(&sweep.voltages_v, &sweep.fundamental)?;
    let second = exponent_fit(&sweep.voltages_v, &sweep.second_harmonic)?;
    let out_of_regime = fundamental.value + 3.0 * fundamental.stderr < 1.0;
    if out_of_regime {
        log::warn!(
            "fundamental growth exponent {:.3} +- {:.3} is significantly below 1: \
             sweep extends outside the small-modulation regime",
            fundamental.value,
            fundamental.stderr
        );
    }
    Ok(GrowthExponents {
        fundamental,
        second,
        out_of_regime,
    })
}

fn exponent_fit(voltages: &[f64], measurements: &[HarmonicMeasurement]) -> Result<ExponentEstimate> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut errs = Vec::new();
    for (v, m) in voltages.iter().zip(measurements) {
        let snr = m.debiased_snr();
        if *v <= 0.0 || snr <= DEFAULT_SNR_EXCLUSION_THRESHOLD {
            continue;
        }
        let e = m.snr_stderr * m.snr_amplitude / snr;
        xs.push(v.ln());
        ys.push(snr.ln());
        errs.push(e / snr);
    }
    if xs.len() < 4 {
        return Err(Error::Insufficiency(format!(
            "only {} points above SNR {} for the exponent fit; need >= 4",
            xs.len(),
            DEFAULT_SNR_EXCLUSION_THRESHOLD
        )));
    }
    let fit = fit_linear_weighted(&xs, &ys, &errs)?;
    Ok(ExponentEstimate {
        value: fit.slope,
        stderr: fit.slope_stderr,
    })
}

// ---------------------------------------------------------------------------
// Sensitivity and quantum-limit comparison
// ---------------------------------------------------------------------------

/// Detection-limit crossing of the fundamental.
#[derive(Debug, Clone, Copy)]
pub struct SensitivityResult {
    /// Displacement at which the fitted fundamental SNR reaches 1.0, meters.
    pub d_min_m: f64,
    /// `d_min / sqrt(rbw)`, meters per root hertz.
    pub d_min_per_rthz_m: f64,
    /// The fitted SNR-versus-voltage line used for the crossing.
    pub crossing_fit: LinearFit,
}

/// Find where the fitted fundamental SNR line crosses 1.0 and convert to
/// displacement through the calibrated slope. The crossing sits near SNR ~ 1
/// where single points are maximally noisy, hence a fitted line rather than
/// the nearest raw point. The line is constrained through the origin — zero
/// drive produces zero signal — which keeps the extrapolation well-posed
/// even when the sweep sits far above the detection threshold.
pub fn sensitivity_crossing(
    sweep: &SweepDataset,
    displacement_per_volt_m: f64,
    rbw_hz: f64,
) -> Result<SensitivityResult> {
    sweep.validate()?;
    if !(displacement_per_volt_m > 0.0) || !(rbw_hz > 0.0) {
        return Err(Error::Config(
            "sensitivity crossing needs positive displacement slope and rbw".into(),
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut errs = Vec::new();
    for (v, m) in sweep.voltages_v.iter().zip(&sweep.fundamental) {
        let snr = m.debiased_snr();
        if *v <= 0.0 || snr <= DEFAULT_SNR_EXCLUSION_THRESHOLD {
            continue;
        }
        xs.push(*v);
        ys.push(snr);
        errs.push(m.snr_stderr * m.snr_amplitude / snr);
    }
    if xs.len() < 3 {
        return Err(Error::Insufficiency(format!(
            "only {} usable fundamental points for the sensitivity fit; need >= 3",
            xs.len()
        )));
    }
    // Through-origin weighted least squares.
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..xs.len() {
        let w = 1.0 / (errs[i] * errs[i]);
        sxy += w * xs[i] * ys[i];
        sxx += w * xs[i] * xs[i];
    }
    let slope = sxy / sxx;
    if slope <= 0.0 {
        return Err(Error::NoSensitivity(format!(
            "fitted SNR slope {slope} per volt does not cross the detection threshold"
        )));
    }
    let chi_sq: f64 = (0..xs.len())
        .map(|i| {
            let r = (ys[i] - slope * xs[i]) / errs[i];
            r * r
        })
        .sum();
    let fit = LinearFit {
        slope,
        intercept: 0.0,
        slope_stderr: (1.0 / sxx).sqrt(),
        intercept_stderr: 0.0,
        reduced_chi_sq: chi_sq / (xs.len() as f64 - 1.0),
    };
    let crossing_v = 1.0 / slope;
    let d_min_m = crossing_v * displacement_per_volt_m;
    Ok(SensitivityResult {
        d_min_m,
        d_min_per_rthz_m: d_min_m / rbw_hz.sqrt(),
        crossing_fit: fit,
    })
}

/// Standard-quantum-limit comparison.
#[derive(Debug, Clone, Copy)]
pub struct SqlComparison {
    /// Effective photon number per integration window.
    pub photon_number: f64,
    /// SQL displacement at the integration window, meters.
    pub sql_m: f64,
    /// SQL displacement per root hertz, meters.
    pub sql_per_rthz_m: f64,
    /// Measured sensitivity over the SQL.
    pub ratio: f64,
}

/// Compare a measured per-root-hertz sensitivity with the standard quantum
/// limit computed from the signal power, wavelength, resolution bandwidth,
/// and a detection efficiency.
pub fn compare_sql(
    d_min_per_rthz_m: f64,
    field: &OpticalField,
    det: &crate::model::DetectionChain,
    efficiency: f64,
) -> Result<SqlComparison> {
    if !(d_min_per_rthz_m > 0.0) {
        return Err(Error::Domain(format!(
            "measured sensitivity must be > 0, got {d_min_per_rthz_m}"
        )));
    }
    let photon_number = model::photon_number(
        field.signal_power_w,
        field.wavelength_m,
        det.rbw_hz,
        efficiency,
    )?;
    let sql_m = model::sql_displacement(field.wavelength_m, photon_number)?;
    let sql_per_rthz_m = sql_m / det.rbw_hz.sqrt();
    Ok(SqlComparison {
        photon_number,
        sql_m,
        sql_per_rthz_m,
        ratio: d_min_per_rthz_m / sql_per_rthz_m,
    })
}

/// Full calibration summary, the content of the machine-readable report.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub displacement_per_volt_m: f64,
    pub displacement_per_volt_stderr_m: f64,
    pub d_min_m: f64,
    pub d_min_per_rthz_m: f64,
    pub photon_number: f64,
    pub sql_m: f64,
    pub sql_per_rthz_m: f64,
    pub sql_ratio: f64,
    pub rbw_hz: f64,
    pub fundamental_exponent: f64,
    pub fundamental_exponent_stderr: f64,
    pub second_exponent: f64,
    pub second_exponent_stderr: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bessel_j, snr_harmonics, DetectionChain};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::FRAC_PI_2;

    fn fake_measurement(order: u32, lock: f64, v: f64, snr: f64, rel_err: f64) -> HarmonicMeasurement {
        // Consistent signal/floor pair: floor 1, signal snr^2 + 1 so the
        // debiased SNR equals `snr` exactly.
        HarmonicMeasurement {
            order,
            drive_voltage_v: v,
            lock_phase_rad: lock,
            signal_power: snr * snr + 1.0,
            noise_floor_power: 1.0,
            snr_amplitude: (snr * snr + 1.0).sqrt(),
            snr_stderr: (snr * snr + 1.0).sqrt() * rel_err,
            rbw_hz: 50.0,
        }
    }

    /// Model-exact sweep at a given slope, photon number, and relative error.
    fn model_sweep(dpv: f64, n_photons: f64, rel_err: f64, voltages: &[f64]) -> SweepDataset {
        let plan = SynthesisPlan::reference_apparatus();
        let field = plan.field;
        let mut fundamental = Vec::new();
        let mut second = Vec::new();
        for &v in voltages {
            let knd = field.wavenumber() * dpv * v;
            let h_phase = snr_harmonics(n_photons, knd, FRAC_PI_2, 2).unwrap();
            let h_amp = snr_harmonics(n_photons, knd, 0.0, 2).unwrap();
            fundamental.push(fake_measurement(1, FRAC_PI_2, v, h_phase[1].1.abs(), rel_err));
            second.push(fake_measurement(2, 0.0, v, h_amp[2].1.abs(), rel_err));
        }
        SweepDataset {
            voltages_v: voltages.to_vec(),
            fundamental,
            second_harmonic: second,
            plan_metadata: plan,
        }
    }

    #[test]
    fn weighted_fit_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let e = [1.0; 4];
        let fit = fit_linear_weighted(&x, &y, &e).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!(fit.reduced_chi_sq < 1e-20);
    }

    #[test]
    fn weighted_fit_downweights_outlier() {
        // y = x with one outlier carrying 100 x stderr.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 2.0, 3.0, 4.0, 50.0];
        let e = [0.01, 0.01, 0.01, 0.01, 1.0];
        let fit = fit_linear_weighted(&x, &y, &e).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.01, "slope {}", fit.slope);

        // Brute-force normal-equation oracle.
        let w: Vec<f64> = e.iter().map(|s| 1.0 / (s * s)).collect();
        let sw: f64 = w.iter().sum();
        let sx: f64 = w.iter().zip(&x).map(|(w, x)| w * x).sum();
        let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * x * x).sum();
        let sy: f64 = w.iter().zip(&y).map(|(w, y)| w * y).sum();
        let sxy: f64 = w
            .iter()
            .zip(x.iter().zip(&y))
            .map(|(w, (x, y))| w * x * y)
            .sum();
        let slope_oracle = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
        assert!((fit.slope - slope_oracle).abs() < 1e-12);
    }

    #[test]
    fn weighted_fit_stderr_scales_with_point_count() {
        // Monte Carlo: stderr of the slope shrinks as 1/sqrt(n).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let run = |n: usize, rng: &mut ChaCha8Rng| -> f64 {
            let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|v| {
                    let g: f64 = StandardNormal.sample(rng);
                    3.0 * v + 0.1 * g
                })
                .collect();
            let e = vec![0.1; n];
            fit_linear_weighted(&x, &y, &e).unwrap().slope_stderr
        };
        let se_small: f64 = (0..20).map(|_| run(16, &mut rng)).sum::<f64>() / 20.0;
        let se_large: f64 = (0..20).map(|_| run(64, &mut rng)).sum::<f64>() / 20.0;
        let shrink = se_small / se_large;
        assert!((shrink - 2.0).abs() < 0.25, "shrink factor {shrink}");
    }

    #[test]
    fn weighted_fit_degenerate_x_is_rank_error() {
        let x = [2.0, 2.0, 2.0, 2.0];
        let y = [1.0, 2.0, 3.0, 4.0];
        let e = [1.0; 4];
        assert!(matches!(
            fit_linear_weighted(&x, &y, &e),
            Err(Error::Rank(_))
        ));
    }

    #[test]
    fn calibration_recovers_slope_from_model_sweep() {
        let voltages: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let dpv = 0.55e-10;
        let sweep = model_sweep(dpv, 2.7e12, 1e-4, &voltages);
        let field = sweep.plan_metadata.field;
        let cal = calibrate_displacement(&sweep, &field).unwrap();
        assert!(
            (cal.displacement_per_volt_m / dpv - 1.0).abs() < 1e-3,
            "recovered {}",
            cal.displacement_per_volt_m
        );
        assert!(cal.intercept_consistent_with_zero);
        // Low-voltage points drop out where the second harmonic is buried.
        assert!(!cal.excluded_indices.is_empty());
    }

    #[test]
    fn calibration_excludes_zero_voltage() {
        let voltages = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0];
        let sweep = model_sweep(1.1e-10, 2.7e12, 1e-4, &voltages);
        let field = sweep.plan_metadata.field;
        let cal = calibrate_displacement(&sweep, &field).unwrap();
        assert!(cal.excluded_indices.contains(&0));
        assert!((cal.displacement_per_volt_m / 1.1e-10 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn calibration_insufficiency_error() {
        let voltages = [1.0, 2.0];
        let sweep = model_sweep(0.55e-10, 2.7e12, 1e-4, &voltages);
        let field = sweep.plan_metadata.field;
        assert!(matches!(
            calibrate_displacement(&sweep, &field),
            Err(Error::Insufficiency(_))
        ));
    }

    #[test]
    fn growth_exponents_of_model_sweep() {
        let voltages: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let sweep = model_sweep(0.55e-10, 2.7e12, 1e-6, &voltages);
        let g = growth_exponents(&sweep).unwrap();
        // Noiseless model values give the power laws by construction.
        assert!((g.fundamental.value - 1.0).abs() < 1e-3, "{}", g.fundamental.value);
        assert!((g.second.value - 2.0).abs() < 1e-2, "{}", g.second.value);
        assert!(!g.out_of_regime);
    }

    #[test]
    fn growth_exponent_flags_bessel_saturation() {
        // Extend the sweep so knd reaches ~1 rad where J1 rolls over.
        let voltages: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let dpv = 1.0 / (SynthesisPlan::reference_apparatus().field.wavenumber() * 10.0);
        let sweep = model_sweep(dpv, 2.7e12, 1e-6, &voltages);
        let g = growth_exponents(&sweep).unwrap();
        assert!(g.fundamental.value < 1.0);
        assert!(g.out_of_regime);
    }

    #[test]
    fn sensitivity_crossing_matches_quantum_limit() {
        // Reduced-range sweep bracketing SNR ~ 3..30 at N = 2.7e12.
        let n: f64 = 2.7e12;
        let dpv = 0.55e-10;
        let plan = SynthesisPlan::reference_apparatus();
        let k = plan.field.wavenumber();
        let v_star = 1.0 / (2.0 * n.sqrt() * k * dpv);
        let voltages: Vec<f64> = (1..=8).map(|i| 3.0 * v_star * i as f64).collect();
        let sweep = model_sweep(dpv, n, 1e-4, &voltages);
        let s = sensitivity_crossing(&sweep, dpv, 50.0).unwrap();
        let analytic = 1.0 / (2.0 * n.sqrt() * k);
        assert!(
            (s.d_min_m / analytic - 1.0).abs() < 1e-3,
            "d_min {} vs {analytic}",
            s.d_min_m
        );
        assert_eq!(s.d_min_per_rthz_m, s.d_min_m / 50f64.sqrt());
    }

    #[test]
    fn sql_comparison_reference_numbers() {
        let plan = SynthesisPlan::reference_apparatus();
        let det = DetectionChain::new(0.667, 1.0, 50.0, 5.0).unwrap();
        let cmp = compare_sql(7.0e-15, &plan.field, &det, 0.667).unwrap();
        assert!((cmp.photon_number / 2.7e12 - 1.0).abs() < 0.02);
        assert!((cmp.sql_per_rthz_m / 5.4e-15 - 1.0).abs() < 0.02);
        assert!((cmp.ratio - 1.30).abs() < 0.03);
    }

    #[test]
    fn doubling_photons_shrinks_sql_by_sqrt2() {
        let plan = SynthesisPlan::reference_apparatus();
        let det = DetectionChain::new(0.667, 1.0, 50.0, 5.0).unwrap();
        let mut bright = plan.field;
        bright.signal_power_w *= 2.0;
        let a = compare_sql(7.0e-15, &plan.field, &det, 0.667).unwrap();
        let b = compare_sql(7.0e-15, &bright, &det, 0.667).unwrap();
        assert!((b.sql_per_rthz_m * 2f64.sqrt() / a.sql_per_rthz_m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn model_sweep_ratio_uses_true_bessel_values() {
        // Guards the test oracle itself: the ratio is J2/J1, not knd/4.
        let voltages = [10.0];
        let sweep = model_sweep(2e-9, 1e12, 1e-9, &voltages);
        let knd = sweep.plan_metadata.field.wavenumber() * 2e-9 * 10.0;
        let measured_ratio =
            sweep.second_harmonic[0].debiased_snr() / sweep.fundamental[0].debiased_snr();
        let expected = bessel_j(2, knd).unwrap() / bessel_j(1, knd).unwrap();
        assert!((measured_ratio / expected - 1.0).abs() < 1e-9);
    }
}
