//! Experiment drivers: assemble sweeps, fits, and reports, and write the
//! artifacts atomically (temp file + rename; partial artifacts removed on
//! error).

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::calib::{self, CalibrationReport, PointSeeds};
use crate::cli::config::{Experiment, OutputFormat, RunConfig};
use crate::cli::report;
use crate::cli::trace_io;
use crate::dsp::{self, Detector, ZeroSpanSettings};
use crate::error::{Error, Result};
use crate::synth::{splitmix64, SynthesisPlan};

/// Paths of the artifacts written by a run.
#[derive(Debug, Default)]
pub struct ExperimentArtifacts {
    pub report_json: Option<PathBuf>,
    pub sweep_csv: Option<PathBuf>,
    pub sensitivity_csv: Option<PathBuf>,
}

/// Run the configured experiment and write its artifacts under the output
/// directory. Deterministic for a fixed config and seed.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentArtifacts> {
    let experiment = config.experiment.ok_or_else(|| {
        Error::Config("no experiment selected (CLI verb or `experiment` key)".into())
    })?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

    // Artifact content is fully rendered before anything is written.
    let mut artifacts: Vec<(&'static str, String)> = Vec::new();
    match experiment {
        Experiment::Calibrate => pool.install(|| calibrate_artifacts(config, &mut artifacts))?,
        Experiment::Sensitivity => pool.install(|| sensitivity_artifacts(config, &mut artifacts))?,
        Experiment::SqlCompare => sql_compare_artifacts(config, &mut artifacts)?,
        Experiment::AnalyzeTrace => analyze_trace_artifacts(config, &mut artifacts)?,
    }

    let keep = |name: &str| match config.format {
        OutputFormat::Both => true,
        OutputFormat::Json => name.ends_with(".json"),
        OutputFormat::Csv => name.ends_with(".csv"),
    };
    std::fs::create_dir_all(&config.out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut out = ExperimentArtifacts::default();
    for (name, content) in artifacts.iter().filter(|(n, _)| keep(n)) {
        let path = config.out_dir.join(name);
        if let Err(e) = write_atomic(&path, content.as_bytes()) {
            for w in &written {
                std::fs::remove_file(w).ok();
            }
            return Err(e);
        }
        written.push(path.clone());
        match *name {
            "report.json" => out.report_json = Some(path),
            "sweep.csv" => out.sweep_csv = Some(path),
            "sensitivity.csv" => out.sensitivity_csv = Some(path),
            _ => {}
        }
    }
    Ok(out)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(bytes)?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Calibration sweep, ratio fit, exponents, sensitivity extrapolation, and
/// SQL comparison.
fn calibrate_artifacts(config: &RunConfig, artifacts: &mut Vec<(&'static str, String)>) -> Result<()> {
    let plan = &config.plan;
    let seeds = PointSeeds::derive_all(config.base_seed, config.voltages_v.len());
    log::info!(
        "calibrate: {} voltages, rbw {} Hz, duration {} s",
        config.voltages_v.len(),
        plan.det.rbw_hz,
        plan.duration_s
    );
    let sweep = calib::run_voltage_sweep(plan, &config.voltages_v, &seeds)?;
    let cal = calib::calibrate_displacement_with(&sweep, &plan.field, config.snr_exclusion_threshold)?;
    let growth = calib::growth_exponents(&sweep)?;
    let sens = calib::sensitivity_crossing(&sweep, cal.displacement_per_volt_m, plan.det.rbw_hz)?;
    let sql = calib::compare_sql(sens.d_min_per_rthz_m, &plan.field, &plan.det, config.efficiency)?;

    let report_data = build_report(plan, &cal, &sens, &sql, &growth);
    artifacts.push((
        "report.json",
        report::render_report_json(
            "calibrate",
            config.base_seed,
            plan,
            &report_data,
            Some(&cal),
            Some(&sens),
            Some(&growth),
        ),
    ));
    artifacts.push((
        "sweep.csv",
        report::render_csv_sweep(
            &sweep.voltages_v,
            &sweep.fundamental,
            &sweep.second_harmonic,
            &cal.excluded_indices,
        ),
    ));
    artifacts.push((
        "sensitivity.csv",
        report::render_csv_sensitivity(
            &sweep.voltages_v,
            &sweep.fundamental,
            cal.displacement_per_volt_m,
        ),
    ));
    Ok(())
}

/// Calibration sweep for the slope, then a reduced-range sweep bracketing
/// the detection threshold for the sensitivity measurement.
fn sensitivity_artifacts(config: &RunConfig, artifacts: &mut Vec<(&'static str, String)>) -> Result<()> {
    let plan = &config.plan;
    let seeds = PointSeeds::derive_all(config.base_seed, config.voltages_v.len());
    let sweep = calib::run_voltage_sweep(plan, &config.voltages_v, &seeds)?;
    let cal = calib::calibrate_displacement_with(&sweep, &plan.field, config.snr_exclusion_threshold)?;
    let growth = calib::growth_exponents(&sweep)?;

    let voltages = match &config.sensitivity_voltages_v {
        Some(v) => v.clone(),
        None => derive_sensitivity_grid(plan, config.efficiency)?,
    };
    log::info!(
        "sensitivity: reduced range {:.3e}..{:.3e} V over {} points",
        voltages.first().copied().unwrap_or(0.0),
        voltages.last().copied().unwrap_or(0.0),
        voltages.len()
    );
    let reduced_seeds =
        PointSeeds::derive_all(splitmix64(config.base_seed ^ 0x53454e53), voltages.len());
    let reduced = calib::run_voltage_sweep(plan, &voltages, &reduced_seeds)?;
    let sens = calib::sensitivity_crossing(&reduced, cal.displacement_per_volt_m, plan.det.rbw_hz)?;
    let sql = calib::compare_sql(sens.d_min_per_rthz_m, &plan.field, &plan.det, config.efficiency)?;

    let report_data = build_report(plan, &cal, &sens, &sql, &growth);
    artifacts.push((
        "report.json",
        report::render_report_json(
            "sensitivity",
            config.base_seed,
            plan,
            &report_data,
            Some(&cal),
            Some(&sens),
            Some(&growth),
        ),
    ));
    artifacts.push((
        "sweep.csv",
        report::render_csv_sweep(
            &sweep.voltages_v,
            &sweep.fundamental,
            &sweep.second_harmonic,
            &cal.excluded_indices,
        ),
    ));
    artifacts.push((
        "sensitivity.csv",
        report::render_csv_sensitivity(
            &reduced.voltages_v,
            &reduced.fundamental,
            cal.displacement_per_volt_m,
        ),
    ));
    Ok(())
}

/// Reduced voltage grid bracketing fundamental SNRs of roughly 4..30, from
/// the configured ground-truth slope.
fn derive_sensitivity_grid(plan: &SynthesisPlan, efficiency: f64) -> Result<Vec<f64>> {
    let n = crate::model::photon_number(
        plan.field.signal_power_w,
        plan.field.wavelength_m,
        plan.det.rbw_hz,
        efficiency,
    )?;
    let kn = plan.field.wavenumber() * plan.field.refractive_index;
    let dpv = plan.modulation.displacement_per_volt_m;
    if !(dpv > 0.0) {
        return Err(Error::Config(
            "sensitivity grid derivation needs displacement_per_volt_m > 0".into(),
        ));
    }
    // SNR(V) ~ 2 sqrt(N) k dpv V; put 8 points at SNR ~ 3.75..30.
    let v_max = 30.0 / (2.0 * n.sqrt() * kn * dpv);
    Ok((1..=8).map(|i| v_max * i as f64 / 8.0).collect())
}

/// Pure quantum-limit arithmetic against an externally measured sensitivity.
fn sql_compare_artifacts(config: &RunConfig, artifacts: &mut Vec<(&'static str, String)>) -> Result<()> {
    let measured = config.measured_d_min_per_rthz_m.ok_or_else(|| {
        Error::Config("sql-compare requires measured_d_min_per_rtHz_m in the config".into())
    })?;
    let cmp = calib::compare_sql(measured, &config.plan.field, &config.plan.det, config.efficiency)?;
    artifacts.push((
        "report.json",
        report::render_sql_report_json(config.base_seed, &config.plan, config.efficiency, measured, &cmp),
    ));
    Ok(())
}

/// Ingest an externally recorded trace and measure both harmonics.
fn analyze_trace_artifacts(config: &RunConfig, artifacts: &mut Vec<(&'static str, String)>) -> Result<()> {
    let path = config.trace_path.as_ref().ok_or_else(|| {
        Error::Config("analyze-trace requires trace_path in the config".into())
    })?;
    let trace = trace_io::ingest_trace(path)?;
    let missing = |key: &str| Error::Ingestion {
        row: None,
        msg: format!("analyze-trace requires header key {key}"),
    };
    let mod_freq = trace.metadata.mod_freq_hz.ok_or_else(|| missing("mod_freq_Hz"))?;
    let lock_phase = trace
        .metadata
        .lock_phase_rad
        .ok_or_else(|| missing("lock_phase_rad"))?;
    let drive = trace
        .metadata
        .drive_voltage_v
        .ok_or_else(|| missing("drive_voltage_V"))?;

    let settings = ZeroSpanSettings::new(
        mod_freq,
        config.plan.det.rbw_hz,
        config.plan.det.vbw_hz,
        Detector::AveragePower,
    )?;
    let m1 = dsp::extract_harmonic_snr(&trace, mod_freq, 1, &settings)?;
    let measurements: Vec<&dsp::HarmonicMeasurement> = vec![&m1];
    let m2 = if 2.0 * mod_freq < 0.5 * trace.sample_rate_hz {
        Some(dsp::extract_harmonic_snr(&trace, mod_freq, 2, &settings)?)
    } else {
        None
    };
    let mut all = measurements;
    if let Some(m2) = &m2 {
        all.push(m2);
    }
    artifacts.push((
        "report.json",
        report::render_analysis_report_json(mod_freq, lock_phase, drive, &all),
    ));
    Ok(())
}

fn build_report(
    plan: &SynthesisPlan,
    cal: &calib::CalibrationFit,
    sens: &calib::SensitivityResult,
    sql: &calib::SqlComparison,
    growth: &calib::GrowthExponents,
) -> CalibrationReport {
    CalibrationReport {
        displacement_per_volt_m: cal.displacement_per_volt_m,
        displacement_per_volt_stderr_m: cal.displacement_per_volt_stderr_m,
        d_min_m: sens.d_min_m,
        d_min_per_rthz_m: sens.d_min_per_rthz_m,
        photon_number: sql.photon_number,
        sql_m: sql.sql_m,
        sql_per_rthz_m: sql.sql_per_rthz_m,
        sql_ratio: sql.ratio,
        rbw_hz: plan.det.rbw_hz,
        fundamental_exponent: growth.fundamental.value,
        fundamental_exponent_stderr: growth.fundamental.stderr,
        second_exponent: growth.second.value,
        second_exponent_stderr: growth.second.stderr,
    }
}
