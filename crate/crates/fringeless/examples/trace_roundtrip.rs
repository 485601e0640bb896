//! Trace files: serialize a synthesized trace to the CSV format, ingest it
//! back bit-exactly, and run the harmonic analysis on the ingested copy —
//! the same path an externally recorded trace takes.
//!
//! ```bash
//! cargo run --release --example trace_roundtrip
//! ```

use fringeless::cli::{ingest_trace, write_trace};
use fringeless::dsp::{extract_harmonic_snr, Detector, ZeroSpanSettings};
use fringeless::model::{DetectionChain, OpticalField};
use fringeless::synth::{synthesize_trace, SynthesisPlan};

fn main() -> fringeless::Result<()> {
    let mut plan = SynthesisPlan::reference_apparatus();
    plan.field = OpticalField::new(795e-9, 1.84e-3, 2.4e-2, 1.0)?;
    plan.det = DetectionChain::new(0.667, 1.0, 2000.0, 200.0)?;
    plan.sample_rate_hz = 16e6;
    plan.duration_s = 0.02;
    plan.modulation.drive_voltage_v = 6.0;
    plan.rng_seed = 5;

    let trace = synthesize_trace(&plan)?;
    let path = std::env::temp_dir().join("fringeless-example-trace.csv");
    write_trace(&trace, &path)?;
    let bytes = std::fs::metadata(&path)?.len();
    println!("wrote {} samples ({bytes} bytes) to {}", trace.len(), path.display());

    let ingested = ingest_trace(&path)?;
    println!(
        "ingested: {} samples at {} Hz, bit-exact: {}",
        ingested.len(),
        ingested.sample_rate_hz,
        ingested.samples == trace.samples
    );
    println!(
        "header metadata: mod_freq = {:?} Hz, drive = {:?} V, lock = {:?} rad",
        ingested.metadata.mod_freq_hz,
        ingested.metadata.drive_voltage_v,
        ingested.metadata.lock_phase_rad
    );

    let settings = ZeroSpanSettings::new(2e6, 2000.0, 200.0, Detector::AveragePower)?;
    let m1 = extract_harmonic_snr(&ingested, 2e6, 1, &settings)?;
    println!(
        "fundamental SNR from the ingested trace: {:.1} +- {:.1}",
        m1.debiased_snr(),
        m1.snr_stderr
    );

    std::fs::remove_file(&path).ok();
    Ok(())
}
