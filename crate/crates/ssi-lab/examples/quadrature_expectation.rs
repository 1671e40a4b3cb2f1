//! Gauss-Hermite quadrature against the Monte Carlo oracle.
//!
//! ```bash
//! cargo run --example quadrature_expectation
//! ```

use ndarray::array;
use ssi_lab::hermite::hermite_poly;
use ssi_lab::quadrature::{gaussian_expectation_1, gh_rule, mc_expectation, GaussianSpec};

fn main() -> ssi_lab::Result<()> {
    let rule = gh_rule(17)?;
    println!("17-node rule: Σw = {:.16}", rule.weights().iter().sum::<f64>());
    let he6_sq: f64 = rule
        .nodes()
        .iter()
        .zip(rule.weights())
        .map(|(x, w)| w * hermite_poly(6, *x) * hermite_poly(6, *x))
        .sum();
    println!("E[He6²] = {he6_sq:.10}  (exact 720 = 6!)");

    // correlated pair: E[He2(x)He2(y)] = 2m² under unit variances
    let m = 0.37;
    let spec = GaussianSpec::new(array![0.0, 0.0], array![[1.0, m], [m, 1.0]])?;
    let quad = gaussian_expectation_1(|x| hermite_poly(2, x[0]) * hermite_poly(2, x[1]), &spec, &rule)?;
    let (mc, se) = mc_expectation(
        |x, out| out[0] = hermite_poly(2, x[0]) * hermite_poly(2, x[1]),
        1,
        &spec,
        1_000_000,
        42,
    )?;
    println!("E[He2·He2] at m = {m}:");
    println!("  quadrature   {quad:.8}");
    println!("  exact        {:.8}", 2.0 * m * m);
    println!("  monte carlo  {:.8} ± {:.1e}", mc[0], se[0]);

    // a shifted, anisotropic Gaussian
    let spec = GaussianSpec::new(array![1.0, -2.0], array![[2.0, 0.6], [0.6, 0.5]])?;
    let quad = gaussian_expectation_1(|x| (x[0] - x[1]).powi(2), &spec, &rule)?;
    println!(
        "E[(x-y)²] under N(μ,Σ): quadrature {quad:.10}, exact {:.10}",
        // Var(x-y) + (μx-μy)²
        (2.0 + 0.5 - 2.0 * 0.6) + 9.0
    );
    Ok(())
}
