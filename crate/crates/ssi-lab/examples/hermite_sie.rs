//! Hermite analysis of sequence targets: coefficient tensors, contractions
//! and the sequence information exponent (SIE).
//!
//! ```bash
//! cargo run --example hermite_sie
//! ```

use ssi_lab::hermite::{sequence_information_exponent, Sie};
use ssi_lab::models::TargetKind;

fn main() -> ssi_lab::Result<()> {
    let cases: Vec<(&str, TargetKind, usize)> = vec![
        ("sum of coordinates", TargetKind::SumHermite { order: 1 }, 4),
        ("sum of He2", TargetKind::SumHermite { order: 2 }, 4),
        ("product He1·He4 + He2·He2", TargetKind::HermiteProduct { orders: vec![1, 4] }, 2),
        ("product He2·He3", TargetKind::HermiteProduct { orders: vec![2, 3] }, 2),
        ("antisymmetric z1 - z2", TargetKind::PathologicalSign, 2),
        ("antisymmetric z1² - z2²", TargetKind::PathologicalSquare, 2),
        ("weighted He4 pair", TargetKind::WeightedHe4, 2),
    ];

    for (name, target, l) in cases {
        let expansion = target.expansion(l, 6, 24)?;
        let sie = sequence_information_exponent(&expansion, None);
        print!("{name:<28} L={l}  SIE = ");
        match sie {
            Sie::Order(k) => {
                let c = expansion.coefficient(k).expect("leading tensor");
                println!(
                    "{k}   C_k×(1,…,1) = {:+.4}   ‖C_k‖_op = {:.4}",
                    c.contract_all_ones(),
                    c.operator_norm()
                );
            }
            Sie::BeyondTruncation => println!("beyond truncation"),
        }
    }

    // The antisymmetric targets contract to zero against the all-ones
    // vector: the tied drift is degenerate and the tied network cannot
    // escape, while the untied one still can (operator norm stays positive).
    let expansion = TargetKind::PathologicalSquare.expansion(2, 4, 24)?;
    let c2 = expansion.coefficient(2).unwrap();
    println!(
        "\npathological check: C_2×(1,1) = {:+.2e} while ‖C_2‖_op = {:.2}",
        c2.contract_all_ones(),
        c2.operator_norm()
    );
    Ok(())
}
