//! The six dynamical regimes of the positional/semantic family and the
//! critical mixing weight where the steepest origin direction flips.
//!
//! ```bash
//! cargo run --example phase_classification
//! ```

use ssi_lab::landscape::{classify_phase, transition_omega, ClassifyOptions};

fn main() -> ssi_lab::Result<()> {
    let opts = ClassifyOptions::default();
    println!("classification at sample points of the (ω, a) square:\n");
    for (omega, a) in [
        (0.0, 1.0),
        (0.45, 1.0),
        (0.67, 1.0),
        (0.9, 1.0),
        (1.0, 1.0),
        (0.5, 0.4),
    ] {
        let c = classify_phase(omega, a, &opts)?;
        println!(
            "ω = {omega:.2}, a = {a:.1}: {:<36} minima: {}, steepest (u_e, u_m) = ({:+.2}, {:+.2})",
            c.label.to_string(),
            c.minima.len(),
            c.steepest[0],
            c.steepest[1]
        );
    }

    let t = transition_omega(1.0, 19, 1e-3)?;
    println!("\nsteepest-direction transition at a = 1: ω_trans = {t:.4}");
    Ok(())
}
