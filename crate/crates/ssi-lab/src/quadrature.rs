//! Gauss-Hermite quadrature and multivariate Gaussian expectations.
//!
//! All rules are expressed in the probabilists' convention: nodes and weights
//! integrate against the standard Gaussian density `exp(-x²/2)/√(2π)`, so a
//! rule with weights summing to one computes `E[f(z)]` for `z ~ N(0, 1)`.
//! Physicists' nodes and weights are generated first (Golub-Welsch on the
//! Jacobi matrix of the `exp(-x²)` weight) and rescaled by `√2` and `1/√π`
//! at construction, so downstream code only ever sees probabilists'
//! quantities.
//!
//! Multivariate expectations `E[f(x)]`, `x ~ N(μ, Σ)`, use a tensor-product
//! grid with the change of variables `x = T·y + μ`, `Σ = T·Tᵀ` with `T`
//! lower-triangular. Summation is compensated and chunked in a fixed order,
//! so results are bitwise reproducible regardless of thread count.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::linalg::{cholesky_lower, symmetric_eigen};
use crate::{Error, Result};

/// Largest 1D node count accepted by [`gh_rule`].
pub const MAX_GH_NODES: usize = 64;

/// Grid guard for tensor-product expectations: `N_int^p` may not exceed this.
pub const MAX_GRID_NODES: u128 = 100_000_000;

/// A 1D quadrature rule in the probabilists' convention.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss-Hermite rule with `n_int` nodes, exact for polynomials of degree
/// up to `2·n_int - 1` against the standard Gaussian.
pub fn gh_rule(n_int: usize) -> Result<QuadratureRule> {
    if n_int == 0 || n_int > MAX_GH_NODES {
        return Err(Error::InvalidArgument(format!(
            "gh_rule: node count must be in 1..={MAX_GH_NODES}, got {n_int}"
        )));
    }
    // Physicists' weight exp(-x²): monic recurrence offdiagonal sqrt(k/2),
    // total mass sqrt(pi).
    let offdiag: Vec<f64> = (1..n_int).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let (mut nodes, mut weights) = golub_welsch(&vec![0.0; n_int], &offdiag, std::f64::consts::PI.sqrt())?;
    let sqrt2 = std::f64::consts::SQRT_2;
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    for x in nodes.iter_mut() {
        *x *= sqrt2;
    }
    for w in weights.iter_mut() {
        *w *= inv_sqrt_pi;
    }
    symmetrize(&mut nodes, &mut weights);
    Ok(QuadratureRule { nodes, weights })
}

/// Gauss-Legendre rule on `[-1, 1]` (weight 1). Internal building block for
/// the half-range rule below.
pub(crate) fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    let diag = vec![0.0; n];
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let kf = k as f64;
            kf / (4.0 * kf * kf - 1.0).sqrt()
        })
        .collect();
    let (mut nodes, mut weights) = golub_welsch(&diag, &offdiag, 2.0)?;
    symmetrize(&mut nodes, &mut weights);
    Ok(QuadratureRule { nodes, weights })
}

/// Gauss rule for the half-line weight `exp(-x²/2)/√(2π)` on `[0, ∞)`.
///
/// Recurrence coefficients come from a Stieltjes procedure on a fine
/// composite Gauss-Legendre grid. The resulting rule has total mass 1/2 and
/// is exact for polynomials of degree up to `2n - 1` on the half-line, which
/// is what makes Hermite coefficients of kinked activations (ReLU and
/// friends, kink at the origin) computable to near machine precision.
pub fn half_range_hermite(n: usize) -> Result<QuadratureRule> {
    const MAX_HALF_NODES: usize = 48;
    if n == 0 || n > MAX_HALF_NODES {
        return Err(Error::InvalidArgument(format!(
            "half_range_hermite: node count must be in 1..={MAX_HALF_NODES}, got {n}"
        )));
    }
    // Fine discretization of the weight on [0, 16]; the tail beyond is below
    // 1e-56 and irrelevant at working precision.
    let panels = 32usize;
    let gl = gauss_legendre(24)?;
    let upper = 16.0;
    let h = upper / panels as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut xs = Vec::with_capacity(panels * gl.len());
    let mut ws = Vec::with_capacity(panels * gl.len());
    for p in 0..panels {
        let a = p as f64 * h;
        for (t, wt) in gl.nodes().iter().zip(gl.weights()) {
            let x = a + (t + 1.0) * h / 2.0;
            // gauss_legendre mass is normalized to 2 over [-1,1]
            let w = wt * (h / 2.0) * norm * (-x * x / 2.0).exp();
            xs.push(x);
            ws.push(w);
        }
    }

    let mu0: f64 = ws.iter().sum();
    let m = xs.len();
    let mut p_prev = vec![0.0f64; m];
    let mut p_cur = vec![1.0 / mu0.sqrt(); m];
    let mut diag = Vec::with_capacity(n);
    let mut offdiag = Vec::with_capacity(n.saturating_sub(1));
    let mut b_prev = 0.0f64;
    for k in 0..n {
        let a_k: f64 = (0..m).map(|q| ws[q] * xs[q] * p_cur[q] * p_cur[q]).sum();
        diag.push(a_k);
        if k + 1 < n {
            let mut u = vec![0.0f64; m];
            for q in 0..m {
                u[q] = (xs[q] - a_k) * p_cur[q] - b_prev * p_prev[q];
            }
            let b_next: f64 = (0..m).map(|q| ws[q] * u[q] * u[q]).sum::<f64>().sqrt();
            if !(b_next > 0.0) {
                return Err(Error::InvalidArgument(
                    "half_range_hermite: Stieltjes recurrence broke down".into(),
                ));
            }
            for q in 0..m {
                u[q] /= b_next;
            }
            p_prev = std::mem::replace(&mut p_cur, u);
            offdiag.push(b_next);
            b_prev = b_next;
        }
    }
    let (nodes, weights) = golub_welsch(&diag, &offdiag, mu0)?;
    Ok(QuadratureRule { nodes, weights })
}

/// Nodes and weights from a symmetric tridiagonal Jacobi matrix.
fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    let mut j = Array2::<f64>::zeros((n, n));
    for (i, &d) in diag.iter().enumerate() {
        j[[i, i]] = d;
    }
    for (i, &b) in offdiag.iter().enumerate() {
        j[[i, i + 1]] = b;
        j[[i + 1, i]] = b;
    }
    let (values, vectors) = symmetric_eigen(&j)?;
    let nodes: Vec<f64> = values.to_vec();
    let weights: Vec<f64> = (0..n)
        .map(|i| mu0 * vectors[[0, i]] * vectors[[0, i]])
        .collect();
    Ok((nodes, weights))
}

/// Force exact ± symmetry on a rule whose weight is even. Nodes come out of
/// the eigensolver symmetric only to rounding; pairing them up makes parity
/// cancellations exact downstream.
fn symmetrize(nodes: &mut [f64], weights: &mut [f64]) {
    let n = nodes.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let mag = (nodes[j] - nodes[i]) / 2.0;
        nodes[i] = -mag;
        nodes[j] = mag;
        let w = (weights[i] + weights[j]) / 2.0;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
}

/// Mean and covariance of a multivariate Gaussian, with the Cholesky factor
/// used for the change of variables.
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    mean: Array1<f64>,
    cov: Array2<f64>,
}

impl GaussianSpec {
    /// Validates symmetry of the covariance (within 1e-12, relative to its
    /// largest entry) and stores the pair.
    pub fn new(mean: Array1<f64>, cov: Array2<f64>) -> Result<Self> {
        let p = mean.len();
        if cov.nrows() != p || cov.ncols() != p {
            return Err(Error::ShapeMismatch(format!(
                "GaussianSpec: mean has dim {p} but covariance is {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let scale = cov.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        for i in 0..p {
            for j in (i + 1)..p {
                if (cov[[i, j]] - cov[[j, i]]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "GaussianSpec: covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &Array2<f64> {
        &self.cov
    }

    /// Lower-triangular `T` with `Σ = T·Tᵀ`. If the plain factorization
    /// fails, adds `1e-12·trace(Σ)/p` to the diagonal once and retries;
    /// boundary points of the sufficient-statistic ball produce exactly
    /// singular covariances and land on this path.
    pub fn factor(&self) -> Result<Array2<f64>> {
        match cholesky_lower(&self.cov) {
            Ok(t) => Ok(t),
            Err(_) => {
                let p = self.dim();
                let trace: f64 = (0..p).map(|i| self.cov[[i, i]]).sum();
                let jitter = 1e-12 * trace / p as f64;
                let mut bumped = self.cov.clone();
                for i in 0..p {
                    bumped[[i, i]] += jitter;
                }
                cholesky_lower(&bumped).map_err(|_| {
                    Error::NotPsd(format!(
                        "covariance failed to factor even with jitter {jitter:.3e}"
                    ))
                })
            }
        }
    }
}

/// Tensor-product Gauss-Hermite estimate of `E[f(x)]` for `x ~ N(μ, Σ)`.
///
/// `f` writes its `out_dim` components into the provided buffer. The grid has
/// `rule.len()^p` nodes and is rejected above [`MAX_GRID_NODES`].
pub fn gaussian_expectation<F>(
    f: F,
    out_dim: usize,
    spec: &GaussianSpec,
    rule: &QuadratureRule,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let p = spec.dim();
    let n = rule.len();
    let total = (n as u128).pow(p as u32);
    if total > MAX_GRID_NODES {
        return Err(Error::ResourceGuard(format!(
            "tensor-product grid {n}^{p} exceeds {MAX_GRID_NODES} nodes"
        )));
    }
    let t = spec.factor()?;
    let total = total as usize;

    // Fixed-order compensated summation over chunks keeps the reduction
    // deterministic independent of how work is scheduled.
    const CHUNK: usize = 8192;
    let n_chunks = total.div_ceil(CHUNK);
    let mut acc = vec![0.0f64; out_dim];
    let mut comp = vec![0.0f64; out_dim];
    let mut y = vec![0.0f64; p];
    let mut x = vec![0.0f64; p];
    let mut val = vec![0.0f64; out_dim];

    for chunk in 0..n_chunks {
        let start = chunk * CHUNK;
        let end = (start + CHUNK).min(total);
        for flat in start..end {
            let mut rem = flat;
            let mut w = 1.0f64;
            for q in 0..p {
                let digit = rem % n;
                rem /= n;
                y[q] = rule.nodes()[digit];
                w *= rule.weights()[digit];
            }
            for i in 0..p {
                let mut s = spec.mean[i];
                for j in 0..=i {
                    s += t[[i, j]] * y[j];
                }
                x[i] = s;
            }
            f(&x, &mut val);
            for k in 0..out_dim {
                let v = val[k];
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "integrand component {k} at node {flat}"
                    )));
                }
                let term = w * v - comp[k];
                let sum = acc[k] + term;
                comp[k] = (sum - acc[k]) - term;
                acc[k] = sum;
            }
        }
    }
    Ok(acc)
}

/// Scalar convenience wrapper around [`gaussian_expectation`].
pub fn gaussian_expectation_1<F>(f: F, spec: &GaussianSpec, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let out = gaussian_expectation(|x, buf| buf[0] = f(x), 1, spec, rule)?;
    Ok(out[0])
}

/// Plain Monte Carlo estimate of `E[f(x)]` with per-component standard
/// errors. Deterministic for a fixed seed; serves as the independent oracle
/// for the quadrature path.
pub fn mc_expectation<F>(
    f: F,
    out_dim: usize,
    spec: &GaussianSpec,
    n_samples: u64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    if n_samples < 2 {
        return Err(Error::InvalidArgument(
            "mc_expectation: need at least 2 samples".into(),
        ));
    }
    let p = spec.dim();
    let t = spec.factor()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut mean = vec![0.0f64; out_dim];
    let mut m2 = vec![0.0f64; out_dim];
    let mut y = vec![0.0f64; p];
    let mut x = vec![0.0f64; p];
    let mut val = vec![0.0f64; out_dim];
    for s in 0..n_samples {
        for yq in y.iter_mut() {
            *yq = rng.sample(StandardNormal);
        }
        for i in 0..p {
            let mut acc = spec.mean[i];
            for j in 0..=i {
                acc += t[[i, j]] * y[j];
            }
            x[i] = acc;
        }
        f(&x, &mut val);
        let count = (s + 1) as f64;
        for k in 0..out_dim {
            if !val[k].is_finite() {
                return Err(Error::NonFinite(format!(
                    "mc_expectation: sample {s}, component {k}"
                )));
            }
            let delta = val[k] - mean[k];
            mean[k] += delta / count;
            m2[k] += delta * (val[k] - mean[k]);
        }
    }
    let nf = n_samples as f64;
    let stderr: Vec<f64> = m2.iter().map(|&v| (v / (nf - 1.0) / nf).sqrt()).collect();
    Ok((mean, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn he(k: usize, x: f64) -> f64 {
        crate::hermite::hermite_poly(k, x)
    }

    #[test]
    fn single_node_rule_is_midpoint() {
        let rule = gh_rule(1).unwrap();
        assert_eq!(rule.len(), 1);
        assert!(rule.nodes()[0].abs() < 1e-15);
        assert!((rule.weights()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_node_rule_matches_hand_solution() {
        // Degree-3 exactness with symmetric nodes ±x and equal weights w
        // forces 2w = 1 and 2wx² = 1, so nodes ±1 and weights 1/2.
        let rule = gh_rule(2).unwrap();
        assert!((rule.nodes()[0] + 1.0).abs() < 1e-12);
        assert!((rule.nodes()[1] - 1.0).abs() < 1e-12);
        assert!((rule.weights()[0] - 0.5).abs() < 1e-12);
        assert!((rule.weights()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rule_invariants_hold_up_to_max() {
        for n in 1..=MAX_GH_NODES {
            let rule = gh_rule(n).unwrap();
            let sum_w: f64 = rule.weights().iter().sum();
            assert!((sum_w - 1.0).abs() < 1e-12, "mass at n={n}: {sum_w}");
            let second: f64 = rule
                .nodes()
                .iter()
                .zip(rule.weights())
                .map(|(x, w)| w * x * x)
                .sum();
            if n >= 2 {
                assert!((second - 1.0).abs() < 1e-10, "variance at n={n}: {second}");
            }
            for i in 0..n / 2 {
                assert!(
                    (rule.nodes()[i] + rule.nodes()[n - 1 - i]).abs() < 1e-12,
                    "asymmetry at n={n}"
                );
            }
        }
    }

    #[test]
    fn he6_second_moment_is_720() {
        let rule = gh_rule(17).unwrap();
        let est: f64 = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .map(|(x, w)| w * he(6, *x) * he(6, *x))
            .sum();
        assert!((est - 720.0).abs() < 1e-8, "E[He6²] = {est}");
    }

    #[test]
    fn gh_rule_rejects_out_of_range() {
        assert!(gh_rule(0).is_err());
        assert!(gh_rule(MAX_GH_NODES + 1).is_err());
    }

    #[test]
    fn half_range_moments() {
        // E over the half-line weight: moment j is 2^((j-1)/2) Γ((j+1)/2) / sqrt(2π)
        let rule = half_range_hermite(24).unwrap();
        let exact = [
            0.5,                                      // j = 0
            1.0 / (2.0 * std::f64::consts::PI).sqrt(), // j = 1
            0.5,                                      // j = 2
            2.0 / (2.0 * std::f64::consts::PI).sqrt(), // j = 3
            1.5,                                      // j = 4
        ];
        for (j, ex) in exact.iter().enumerate() {
            let est: f64 = rule
                .nodes()
                .iter()
                .zip(rule.weights())
                .map(|(x, w)| w * x.powi(j as i32))
                .sum();
            assert!((est - ex).abs() < 1e-12, "half-range moment {j}: {est} vs {ex}");
        }
        assert!(rule.nodes().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn normalization_and_second_moment_identity() {
        let spec = GaussianSpec::new(
            array![0.7, -0.3],
            array![[2.0, 0.4], [0.4, 1.0]],
        )
        .unwrap();
        let rule = gh_rule(9).unwrap();
        let one = gaussian_expectation_1(|_| 1.0, &spec, &rule).unwrap();
        assert!((one - 1.0).abs() < 1e-14);
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let est = gaussian_expectation_1(
                |x| x[i] * x[j] - spec.mean()[i] * spec.mean()[j],
                &spec,
                &rule,
            )
            .unwrap();
            assert!(
                (est - spec.cov()[[i, j]]).abs() < 1e-10,
                "second moment ({i},{j})"
            );
        }
    }

    #[test]
    fn correlated_he2_product_expectation() {
        // E[He2(x1)He2(x2)] with unit variances and correlation m is 2m².
        let m = 0.37;
        let spec = GaussianSpec::new(array![0.0, 0.0], array![[1.0, m], [m, 1.0]]).unwrap();
        let rule = gh_rule(17).unwrap();
        let est = gaussian_expectation_1(|x| he(2, x[0]) * he(2, x[1]), &spec, &rule).unwrap();
        assert!((est - 2.0 * m * m).abs() < 1e-8, "got {est}");
    }

    #[test]
    fn mc_matches_quadrature_on_correlated_integrand() {
        let m = 0.37;
        let spec = GaussianSpec::new(array![0.0, 0.0], array![[1.0, m], [m, 1.0]]).unwrap();
        let rule = gh_rule(17).unwrap();
        let quad = gaussian_expectation_1(|x| he(2, x[0]) * he(2, x[1]), &spec, &rule).unwrap();
        let (est, se) = mc_expectation(
            |x, out| out[0] = he(2, x[0]) * he(2, x[1]),
            1,
            &spec,
            200_000,
            7,
        )
        .unwrap();
        assert!((est[0] - quad).abs() < 5.0 * se[0]);
    }

    #[test]
    fn mc_trivial_cases() {
        let spec = GaussianSpec::new(array![3.0], array![[1.0]]).unwrap();
        let (est, se) = mc_expectation(|_, out| out[0] = 1.0, 1, &spec, 100, 0).unwrap();
        assert_eq!(est[0], 1.0);
        assert_eq!(se[0], 0.0);
        let (est, se) = mc_expectation(|x, out| out[0] = x[0], 1, &spec, 1_000_000, 1).unwrap();
        assert!((est[0] - 3.0).abs() < 5.0 * se[0]);
    }

    #[test]
    fn mc_is_deterministic_for_fixed_seed() {
        let spec = GaussianSpec::new(array![0.0, 0.0], array![[1.0, 0.2], [0.2, 1.0]]).unwrap();
        let f = |x: &[f64], out: &mut [f64]| out[0] = (x[0] * x[1]).sin();
        let (a, _) = mc_expectation(f, 1, &spec, 10_000, 42).unwrap();
        let (b, _) = mc_expectation(f, 1, &spec, 10_000, 42).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn jitter_handles_singular_boundary() {
        // Correlation exactly 1 is singular; the jitter path must succeed.
        let spec = GaussianSpec::new(array![0.0, 0.0], array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let rule = gh_rule(9).unwrap();
        let est = gaussian_expectation_1(|x| (x[0] - x[1]).abs(), &spec, &rule).unwrap();
        // residual scale is sqrt(jitter) ~ 1e-6
        assert!(est.abs() < 2e-6);
    }

    #[test]
    fn grid_guard_rejects_large_products() {
        let p = 8;
        let spec = GaussianSpec::new(Array1::zeros(p), Array2::eye(p)).unwrap();
        let rule = gh_rule(17).unwrap();
        let res = gaussian_expectation_1(|_| 1.0, &spec, &rule);
        assert!(matches!(res, Err(Error::ResourceGuard(_))));
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let spec = GaussianSpec::new(array![0.0], array![[1.0]]).unwrap();
        let rule = gh_rule(5).unwrap();
        let res = gaussian_expectation_1(|x| 1.0 / (x[0] - rule_node(&rule)), &spec, &rule);
        // dividing by zero at a node yields inf
        assert!(matches!(res, Err(Error::NonFinite(_))));
    }

    fn rule_node(rule: &QuadratureRule) -> f64 {
        rule.nodes()[0]
    }

    #[test]
    fn affine_invariance_for_linear_functions() {
        // E[f(Ax+b)] under N(μ,Σ) equals E[f(x)] under N(Aμ+b, AΣAᵀ).
        let mu = array![0.3, -0.2];
        let sigma = array![[1.5, 0.3], [0.3, 0.8]];
        let a = array![[0.6, -1.1], [0.4, 0.9]];
        let b = array![0.1, 2.0];
        let rule = gh_rule(11).unwrap();
        let f = |x: &[f64]| 2.0 * x[0] - 3.0 * x[1] + 1.0;

        let spec1 = GaussianSpec::new(mu.clone(), sigma.clone()).unwrap();
        let lhs = gaussian_expectation_1(
            |x| {
                let y0 = a[[0, 0]] * x[0] + a[[0, 1]] * x[1] + b[0];
                let y1 = a[[1, 0]] * x[0] + a[[1, 1]] * x[1] + b[1];
                f(&[y0, y1])
            },
            &spec1,
            &rule,
        )
        .unwrap();

        let mu2 = a.dot(&mu) + &b;
        let sigma2 = a.dot(&sigma).dot(&a.t());
        let spec2 = GaussianSpec::new(mu2, sigma2).unwrap();
        let rhs = gaussian_expectation_1(f, &spec2, &rule).unwrap();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
