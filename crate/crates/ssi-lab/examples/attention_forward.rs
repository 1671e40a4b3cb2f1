//! Forward passes of the tied attention model: positional encodings,
//! reduction maps, the injected-score variant and sufficient statistics.
//!
//! ```bash
//! cargo run --example attention_forward
//! ```

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use ssi_lab::models::*;

fn main() -> ssi_lab::Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let (l, d) = (2, 256);
    let frame = TargetFrame::sample(l, d, LayoutKind::AntisymmetricPair, &mut rng)?;

    // a weight fully aligned with the positional row: e = 1, m = 0
    let p = match &frame.layout {
        PositionalLayout::AntisymmetricPair(p) => p.clone(),
        _ => unreachable!(),
    };
    let w_pos = &p * (d as f64).sqrt();
    let x_zero = Array2::<f64>::zeros((l, d));
    let mut out = vec![0.0; 4];
    tied_attention_forward(&w_pos, &frame.layout, &x_zero, &ReductionMap::FullMatrix, &mut out)?;
    println!("attention at full positional alignment, zero tokens:");
    println!("  [{:.4} {:.4}]", out[0], out[1]);
    println!("  [{:.4} {:.4}]", out[2], out[3]);

    let stats = sufficient_stats(&WeightState::Tied(w_pos), &frame)?;
    println!(
        "  stats: e = {:.3}, m = {:.3}, ‖(e,m)‖ = {:.3}",
        stats.e[0],
        stats.m_scalar(),
        stats.recovery_norm()
    );

    // random weights on real tokens: rows of the full-matrix output sum to 1
    let w = sample_sphere(d, &mut rng);
    let x = sample_sequence(l, d, &mut rng);
    tied_attention_forward(&w, &frame.layout, &x, &ReductionMap::FullMatrix, &mut out)?;
    println!(
        "\nrandom weights: row sums {:.12}, {:.12}",
        out[0] + out[1],
        out[2] + out[3]
    );
    let stats = sufficient_stats(&WeightState::Tied(w.clone()), &frame)?;
    println!(
        "  initial overlaps ~ 1/√d: e = {:+.4}, m = {:+.4}",
        stats.e[0],
        stats.m_scalar()
    );

    // injected scores break the w → -w output symmetry of nothing: the score
    // matrix stays even in w, but gains a fixed rank-one offset
    let c = ndarray::Array1::from(vec![1.0, -1.0]);
    let mut tr = [0.0];
    injected_attention_forward(&w, &c, &frame.layout, &x_zero, &ReductionMap::Trace, &mut tr)?;
    let e = std::f64::consts::E;
    println!(
        "\ninjected c = (1,-1), zero field: Tr softmax = {:.6} (closed form {:.6})",
        tr[0],
        2.0 * e / (e + 1.0 / e)
    );

    // SSI labels: the positional/semantic mixture at ω = 1 is constant
    let link = LinkFunction::positional_semantic(1.0, 1.0);
    let y = link.eval(&[0.3, -1.2]);
    println!("\npure positional target block: [{:.4} {:.4}; {:.4} {:.4}]", y[0], y[1], y[2], y[3]);
    Ok(())
}
