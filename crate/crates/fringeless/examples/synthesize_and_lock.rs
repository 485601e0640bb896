//! Synthesize shot-noise-limited photocurrent traces at both lock points and
//! verify the lock quality through the emulated error signals.
//!
//! ```bash
//! cargo run --release --example synthesize_and_lock
//! ```

use fringeless::model::{DetectionChain, LockPoint};
use fringeless::synth::{lock_error_signal, synthesize_trace, SynthesisPlan};

fn main() -> fringeless::Result<()> {
    let mut plan = SynthesisPlan::reference_apparatus();
    // Desk-scale acquisition: 16 MHz sampling, 5 ms, 2 kHz RBW bookkeeping.
    plan.sample_rate_hz = 16e6;
    plan.det = DetectionChain::new(0.667, 1.0, 2000.0, 200.0)?;
    plan.duration_s = 5e-3;
    plan.modulation.drive_voltage_v = 5.0;
    plan.rng_seed = 11;

    for (label, lock) in [
        ("phase quadrature (pi/2)", LockPoint::phase_quadrature(1e-3)?),
        ("amplitude quadrature (0)", LockPoint::amplitude_quadrature(1e-3)?),
        ("offset lock (pi/2 + 10 mrad)", LockPoint::new(std::f64::consts::FRAC_PI_2 + 0.01, 1e-3)?),
    ] {
        plan.lock = lock;
        let trace = synthesize_trace(&plan)?;
        let error = lock_error_signal(&plan, &trace)?;
        let mean = error.iter().sum::<f64>() / error.len() as f64;
        println!(
            "{label:30} -> {} samples, error-signal mean {:+.3e} (natural scale {:.3e})",
            trace.len(),
            mean,
            plan.mean_amplitude()
        );
    }
    println!("\nthe offset lock shows the expected -M sin(0.01) pull; the ideal locks sit at zero");
    Ok(())
}
