//! The absolute calibration experiment: sweep the piezo drive, extract both
//! harmonics, fit the ratio against voltage, and recover the displacement
//! per volt — without ever observing a fringe.
//!
//! ```bash
//! cargo run --release --example calibrate_piezo
//! ```

use fringeless::calib::{calibrate_displacement, growth_exponents, run_voltage_sweep, PointSeeds};
use fringeless::model::{DetectionChain, OpticalField};
use fringeless::synth::SynthesisPlan;

fn main() -> fringeless::Result<()> {
    let mut plan = SynthesisPlan::reference_apparatus();
    // Boosted powers keep the second harmonic measurable in a 50 ms
    // acquisition at 2 kHz RBW; the ratio is power-independent anyway.
    plan.field = OpticalField::new(795e-9, 1.84e-3, 2.4e-2, 1.0)?;
    plan.det = DetectionChain::new(0.667, 1.0, 2000.0, 200.0)?;
    plan.sample_rate_hz = 16e6;
    plan.duration_s = 0.05;

    let truth = plan.modulation.displacement_per_volt_m;
    let voltages: Vec<f64> = (1..=10).map(|v| v as f64).collect();
    let seeds = PointSeeds::derive_all(7, voltages.len());
    let sweep = run_voltage_sweep(&plan, &voltages, &seeds)?;

    println!(" V    Sigma1        Sigma2        ratio");
    for ((v, f), s) in voltages
        .iter()
        .zip(&sweep.fundamental)
        .zip(&sweep.second_harmonic)
    {
        let s1 = f.debiased_snr();
        let s2 = s.debiased_snr();
        println!("{v:3}   {s1:10.1}   {s2:9.2}     {:.3e}", s2 / s1.max(1e-30));
    }

    let growth = growth_exponents(&sweep)?;
    println!(
        "\ngrowth exponents: fundamental {:.3} +- {:.3}, second {:.3} +- {:.3}",
        growth.fundamental.value, growth.fundamental.stderr,
        growth.second.value, growth.second.stderr
    );

    let cal = calibrate_displacement(&sweep, &plan.field)?;
    println!(
        "recovered slope: {:.4} +- {:.4} A/V   (ground truth {:.4} A/V)",
        cal.displacement_per_volt_m * 1e10,
        cal.displacement_per_volt_stderr_m * 1e10,
        truth * 1e10
    );
    println!(
        "ratio-fit intercept consistent with zero: {} ({} low-SNR points excluded)",
        cal.intercept_consistent_with_zero,
        cal.excluded_indices.len()
    );
    Ok(())
}
