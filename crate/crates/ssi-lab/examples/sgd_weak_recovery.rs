//! One-pass spherical SGD on the tied network: escape from an
//! uninformative start, weak recovery, and full alignment.
//!
//! ```bash
//! cargo run --example sgd_weak_recovery
//! ```

use ssi_lab::hermite::Activation;
use ssi_lab::models::TargetKind;
use ssi_lab::sgd::*;

fn main() -> ssi_lab::Result<()> {
    let target = TargetKind::SumHermite { order: 2 };
    let expansion = target.expansion(2, 4, 24)?;
    let gamma = learning_rate(&LearningRatePolicy::OptimalTied { base: 0.0125 }, &expansion, 2)?;

    let cfg = SgdConfig {
        d: 1000,
        l: 2,
        model: ModelVariant::TiedNetwork {
            activation: Activation::Relu,
        },
        target,
        gamma,
        sign_randomized: false,
        t_max: 400_000,
        eta: 0.3,
        stride: Some(10_000),
        stop: StopRule::AtNorm(0.95),
        seed: 1,
    };
    println!("training the tied ReLU network on Σ He2(z*_i), d = 1000, γ = {gamma:.4}");
    let traj = run_sgd(&cfg)?;

    println!("\n  step      |m|      loss");
    for p in &traj.points {
        println!("{:>8}  {:+.4}  {:.4}", p.step, p.stats.m_scalar(), p.loss);
    }
    match traj.recovery_step {
        Some(t) => println!("\nweak recovery (‖(e,m)‖ ≥ 0.3) at step {t}"),
        None => println!("\nno recovery within the budget"),
    }
    println!(
        "final |m| = {:.4} after {} steps ({} fresh samples)",
        traj.final_stats.m_scalar(),
        traj.steps_run,
        traj.samples_drawn
    );
    Ok(())
}
