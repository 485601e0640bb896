//! Machine-readable artifacts: the JSON report and plot-ready CSV files.
//!
//! Report schema, version 1: every numeric field name ends in an explicit
//! unit suffix — `_m`, `_V`, `_Hz`, `_rad`, `_W`, `_s`, `_N` (photon count),
//! `_per_V`, or `_1` (dimensionless). Identifier-like values (schema
//! version, seeds) are strings.

use serde_json::{Map, Value};

use crate::calib::{CalibrationFit, CalibrationReport, GrowthExponents, SensitivityResult};
use crate::dsp::HarmonicMeasurement;
use crate::synth::SynthesisPlan;

pub const REPORT_SCHEMA_VERSION: &str = "1";

/// Numeric-key unit suffixes admitted by the report schema.
pub const UNIT_SUFFIXES: &[&str] = &[
    "_m", "_V", "_Hz", "_rad", "_W", "_s", "_N", "_per_V", "_1",
];

fn num(map: &mut Map<String, Value>, key: &str, value: f64) {
    debug_assert!(
        UNIT_SUFFIXES.iter().any(|s| key.ends_with(s)),
        "numeric report key '{key}' lacks a unit suffix"
    );
    map.insert(key.to_string(), Value::from(value));
}

/// Render the calibration/sensitivity report.
pub fn render_report_json(
    experiment: &str,
    base_seed: u64,
    plan: &SynthesisPlan,
    report: &CalibrationReport,
    calibration: Option<&CalibrationFit>,
    sensitivity: Option<&SensitivityResult>,
    exponents: Option<&GrowthExponents>,
) -> String {
    let mut map = Map::new();
    map.insert("schema".into(), Value::from("fringeless-report"));
    map.insert("schema_version".into(), Value::from(REPORT_SCHEMA_VERSION));
    map.insert("experiment".into(), Value::from(experiment));
    map.insert("base_seed".into(), Value::from(base_seed.to_string()));

    num(&mut map, "wavelength_m", plan.field.wavelength_m);
    num(&mut map, "signal_power_W", plan.field.signal_power_w);
    num(&mut map, "lo_power_W", plan.field.lo_power_w);
    num(&mut map, "mod_freq_Hz", plan.modulation.frequency_hz);
    num(&mut map, "sample_rate_Hz", plan.sample_rate_hz);
    num(&mut map, "duration_s", plan.duration_s);
    num(&mut map, "rbw_Hz", report.rbw_hz);
    num(&mut map, "vbw_Hz", plan.det.vbw_hz);

    num(&mut map, "displacement_per_volt_m", report.displacement_per_volt_m);
    num(
        &mut map,
        "displacement_per_volt_stderr_m",
        report.displacement_per_volt_stderr_m,
    );
    num(&mut map, "d_min_m", report.d_min_m);
    num(&mut map, "d_min_per_rtHz_m", report.d_min_per_rthz_m);
    num(&mut map, "photon_number_N", report.photon_number);
    num(&mut map, "sql_m", report.sql_m);
    num(&mut map, "sql_per_rtHz_m", report.sql_per_rthz_m);
    num(&mut map, "sql_ratio_1", report.sql_ratio);
    num(&mut map, "fundamental_exponent_1", report.fundamental_exponent);
    num(
        &mut map,
        "fundamental_exponent_stderr_1",
        report.fundamental_exponent_stderr,
    );
    num(&mut map, "second_exponent_1", report.second_exponent);
    num(&mut map, "second_exponent_stderr_1", report.second_exponent_stderr);

    if let Some(cal) = calibration {
        num(&mut map, "ratio_fit_slope_per_V", cal.ratio_fit.slope);
        num(&mut map, "ratio_fit_slope_stderr_per_V", cal.ratio_fit.slope_stderr);
        num(&mut map, "ratio_fit_intercept_1", cal.ratio_fit.intercept);
        num(
            &mut map,
            "ratio_fit_intercept_stderr_1",
            cal.ratio_fit.intercept_stderr,
        );
        num(&mut map, "ratio_fit_reduced_chi_sq_1", cal.ratio_fit.reduced_chi_sq);
        map.insert(
            "ratio_fit_intercept_consistent_with_zero".into(),
            Value::from(cal.intercept_consistent_with_zero),
        );
    }
    if let Some(sens) = sensitivity {
        num(&mut map, "crossing_fit_slope_per_V", sens.crossing_fit.slope);
        num(&mut map, "crossing_fit_intercept_1", sens.crossing_fit.intercept);
    }
    if let Some(g) = exponents {
        map.insert("growth_out_of_regime".into(), Value::from(g.out_of_regime));
    }

    serde_json::to_string_pretty(&Value::Object(map)).expect("report serialization") + "\n"
}

/// Render the sql-compare report (no sweep data).
pub fn render_sql_report_json(
    base_seed: u64,
    plan: &SynthesisPlan,
    efficiency: f64,
    measured_d_min_per_rthz_m: f64,
    cmp: &crate::calib::SqlComparison,
) -> String {
    let mut map = Map::new();
    map.insert("schema".into(), Value::from("fringeless-report"));
    map.insert("schema_version".into(), Value::from(REPORT_SCHEMA_VERSION));
    map.insert("experiment".into(), Value::from("sql-compare"));
    map.insert("base_seed".into(), Value::from(base_seed.to_string()));
    num(&mut map, "wavelength_m", plan.field.wavelength_m);
    num(&mut map, "signal_power_W", plan.field.signal_power_w);
    num(&mut map, "rbw_Hz", plan.det.rbw_hz);
    num(&mut map, "efficiency_1", efficiency);
    num(&mut map, "measured_d_min_per_rtHz_m", measured_d_min_per_rthz_m);
    num(&mut map, "photon_number_N", cmp.photon_number);
    num(&mut map, "sql_m", cmp.sql_m);
    num(&mut map, "sql_per_rtHz_m", cmp.sql_per_rthz_m);
    num(&mut map, "sql_ratio_1", cmp.ratio);
    serde_json::to_string_pretty(&Value::Object(map)).expect("report serialization") + "\n"
}

/// Render the analyze-trace report: both harmonic measurements.
pub fn render_analysis_report_json(
    trace_mod_freq_hz: f64,
    lock_phase_rad: f64,
    drive_voltage_v: f64,
    measurements: &[&HarmonicMeasurement],
) -> String {
    let mut map = Map::new();
    map.insert("schema".into(), Value::from("fringeless-analysis"));
    map.insert("schema_version".into(), Value::from(REPORT_SCHEMA_VERSION));
    map.insert("experiment".into(), Value::from("analyze-trace"));
    num(&mut map, "mod_freq_Hz", trace_mod_freq_hz);
    num(&mut map, "lock_phase_rad", lock_phase_rad);
    num(&mut map, "drive_voltage_V", drive_voltage_v);
    for m in measurements {
        let p = format!("order{}_", m.order);
        num(&mut map, &format!("{p}snr_1"), m.snr_amplitude);
        num(&mut map, &format!("{p}snr_stderr_1"), m.snr_stderr);
        num(&mut map, &format!("{p}snr_debiased_1"), m.debiased_snr());
        num(&mut map, &format!("{p}signal_power_1"), m.signal_power);
        num(&mut map, &format!("{p}noise_floor_power_1"), m.noise_floor_power);
        num(&mut map, &format!("{p}rbw_Hz"), m.rbw_hz);
    }
    serde_json::to_string_pretty(&Value::Object(map)).expect("report serialization") + "\n"
}

/// Sweep CSV: one row per voltage with both harmonics' analyzer readings and
/// the ratio entering the calibration fit (blank for excluded points).
pub fn render_csv_sweep(
    voltages: &[f64],
    fundamental: &[HarmonicMeasurement],
    second: &[HarmonicMeasurement],
    excluded: &[usize],
) -> String {
    let mut out = String::from("voltage_V,snr1,snr1_err,snr2,snr2_err,ratio,ratio_err\n");
    for i in 0..voltages.len() {
        let f = &fundamental[i];
        let s = &second[i];
        let ratio_cols = if excluded.contains(&i) {
            ",".to_string()
        } else {
            let s1 = f.debiased_snr();
            let s2 = s.debiased_snr();
            let e1 = f.snr_stderr * f.snr_amplitude / s1;
            let e2 = s.snr_stderr * s.snr_amplitude / s2;
            let ratio = s2 / s1;
            let err = ratio * ((e1 / s1).powi(2) + (e2 / s2).powi(2)).sqrt();
            format!("{ratio},{err}")
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            voltages[i], f.snr_amplitude, f.snr_stderr, s.snr_amplitude, s.snr_stderr, ratio_cols
        ));
    }
    out
}

/// Sensitivity CSV: fundamental reading against the calibrated displacement.
pub fn render_csv_sensitivity(
    voltages: &[f64],
    fundamental: &[HarmonicMeasurement],
    displacement_per_volt_m: f64,
) -> String {
    let mut out = String::from("voltage_V,snr1,displacement_m\n");
    for (v, f) in voltages.iter().zip(fundamental) {
        out.push_str(&format!(
            "{},{},{}\n",
            v,
            f.snr_amplitude,
            v * displacement_per_volt_m
        ));
    }
    out
}
