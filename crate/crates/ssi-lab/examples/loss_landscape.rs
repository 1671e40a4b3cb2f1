//! The population loss over the sufficient-statistic ball: origin geometry,
//! circle minima, and the encoding's effect on the effective SIE.
//!
//! ```bash
//! cargo run --example loss_landscape
//! ```

use ssi_lab::landscape::*;
use ssi_lab::models::TargetKind;
use ssi_lab::sgd::ReductionKind;

fn main() -> ssi_lab::Result<()> {
    // the positional/semantic mixture at ω = 0.67: two boundary minima,
    // the global one semantic
    let surface = LossSurface::new(SurfaceSpec::positional_semantic(0.67, 1.0, 17))?;
    println!("R(e, m) for the ω = 0.67, a = 1 mixture:");
    for m in [0.0, 0.5, 1.0] {
        let row: Vec<String> = [0.0, 0.4, 0.8]
            .iter()
            .filter(|e| *e * *e + m * m <= 1.0)
            .map(|&e| format!("R({e:.1},{m:.1}) = {:.4}", surface.population_loss(e, m).unwrap()))
            .collect();
        println!("  {}", row.join("   "));
    }

    let g = origin_gradient(&surface)?;
    let h = origin_hessian(&surface)?;
    println!("\norigin gradient: [{:+.2e}, {:+.2e}] (parity makes it vanish)", g[0], g[1]);
    println!("origin Hessian:  [[{:+.4}, {:+.4}], [{:+.4}, {:+.4}]]", h[0][0], h[0][1], h[1][0], h[1][1]);

    let minima = find_minima(&surface, 240)?;
    println!("\nminima on the unit circle:");
    for m in &minima {
        println!(
            "  (e, m) = ({:+.3}, {:+.3})  loss = {:.5}  [{:?}]",
            m.e, m.m, m.loss, m.min_type
        );
    }

    // positional encoding can lower the effective SIE: the weighted-He4
    // target needs fourth-order escape without it, second-order with it
    let bare = LossSurface::new(SurfaceSpec {
        target: TargetKind::WeightedHe4,
        l: 2,
        reduction: ReductionKind::Trace,
        positional: false,
        n_int: 17,
    })?;
    let encoded = LossSurface::new(SurfaceSpec {
        target: TargetKind::WeightedHe4,
        l: 2,
        reduction: ReductionKind::Trace,
        positional: true,
        n_int: 17,
    })?;
    println!(
        "\nweighted-He4 target: effective SIE {:?} without encoding, {:?} with it",
        effective_sie_with_encoding(&bare, 6, 1e-3)?,
        effective_sie_with_encoding(&encoded, 6, 1e-3)?
    );
    Ok(())
}
