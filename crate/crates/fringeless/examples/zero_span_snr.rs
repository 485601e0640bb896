//! Measure harmonic SNRs with the emulated zero-span spectrum analyzer and
//! compare them with the analytic prediction.
//!
//! ```bash
//! cargo run --release --example zero_span_snr
//! ```

use fringeless::dsp::{extract_harmonic_snr, Detector, ZeroSpanSettings};
use fringeless::model::{snr_harmonics, DetectionChain, LockPoint, OpticalField};
use fringeless::synth::{synthesize_trace, SynthesisPlan};

fn main() -> fringeless::Result<()> {
    let mut plan = SynthesisPlan::reference_apparatus();
    // Boosted powers keep this demo fast at a wide resolution bandwidth.
    plan.field = OpticalField::new(795e-9, 1.84e-3, 2.4e-2, 1.0)?;
    plan.det = DetectionChain::new(0.667, 1.0, 2000.0, 200.0)?;
    plan.sample_rate_hz = 16e6;
    plan.duration_s = 0.05;
    plan.modulation.drive_voltage_v = 8.0;

    let n_eff = plan.effective_signal_photons();
    let knd = plan.modulation.knd(&plan.field);
    let settings = ZeroSpanSettings::new(2e6, 2000.0, 200.0, Detector::AveragePower)?;
    println!("N_eff = {n_eff:.3e}, knd = {knd:.3e} rad, ENBW = {:.1} Hz", settings.enbw_hz());

    plan.lock = LockPoint::phase_quadrature(1e-3)?;
    plan.rng_seed = 21;
    let trace = synthesize_trace(&plan)?;
    let m1 = extract_harmonic_snr(&trace, 2e6, 1, &settings)?;
    let predicted1 = snr_harmonics(n_eff, knd, std::f64::consts::FRAC_PI_2, 2)?[1].1.abs();
    println!(
        "fundamental:     measured {:9.1} +- {:5.1}   predicted {:9.1}",
        m1.debiased_snr(),
        m1.snr_stderr,
        predicted1
    );

    plan.lock = LockPoint::amplitude_quadrature(1e-3)?;
    plan.rng_seed = 22;
    let trace = synthesize_trace(&plan)?;
    let m2 = extract_harmonic_snr(&trace, 2e6, 2, &settings)?;
    let predicted2 = snr_harmonics(n_eff, knd, 0.0, 2)?[2].1.abs();
    println!(
        "second harmonic: measured {:9.3} +- {:5.3}   predicted {:9.3}",
        m2.debiased_snr(),
        m2.snr_stderr,
        predicted2
    );

    // The wrong-quadrature harmonic reads the noise floor measuring itself.
    let m1_suppressed = extract_harmonic_snr(&trace, 2e6, 1, &settings)?;
    println!(
        "fundamental at the amplitude lock: raw SNR {:.2} (noise measuring noise)",
        m1_suppressed.snr_amplitude
    );

    let ratio = m2.debiased_snr() / m1.debiased_snr();
    println!(
        "\nmeasured ratio {:.4e} against knd/4 = {:.4e}",
        ratio,
        knd / 4.0
    );
    Ok(())
}
