//! Probabilists' Hermite polynomials, Hermite tensors and the sequence
//! information exponent (SIE).
//!
//! A square-integrable map `f: R^L → R` expands uniquely as
//! `f = Σ_k ⟨C_k(f), H_k⟩` where `H_k` is the order-`k` Hermite tensor (entry
//! `(i_1..i_k)` is the product of 1D Hermite polynomials with the index
//! multiplicities) and `C_k(f) = (1/k!) E[f(z)·H_k(z)]`. The SIE of a target
//! is the smallest total order `k ≥ 1` with `C_k ≠ 0`; it governs how long
//! one-pass SGD needs to escape an uninformative initialization.
//!
//! Tensors come in two representations: dense `L^k` arrays and orthogonal
//! decompositions (odeco) `Σ_i λ_i v_i^{⊗k}`. Separable targets
//! `g(z) = Σ_i g_i(z_i)` always have odeco coefficients with `v_i` the
//! coordinate axes, which is the fast path for large `L`.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeMap;

use crate::linalg::symmetric_eigen;
use crate::quadrature::{gh_rule, half_range_hermite};
use crate::{Error, Result};

/// Guard for dense tensor work: `L^k · N^L` element operations.
const TENSOR_GUARD: u128 = 100_000_000;

/// `He_k(x)` by the three-term recurrence
/// `He_{k+1}(x) = x·He_k(x) - k·He_{k-1}(x)`.
pub fn hermite_poly(k: usize, x: f64) -> f64 {
    let mut prev = 1.0; // He_0
    if k == 0 {
        return prev;
    }
    let mut cur = x; // He_1
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Values `He_0(x) .. He_{k_max}(x)` in one sweep.
pub fn hermite_poly_table(k_max: usize, x: f64) -> Vec<f64> {
    let mut table = Vec::with_capacity(k_max + 1);
    table.push(1.0);
    if k_max == 0 {
        return table;
    }
    table.push(x);
    for j in 1..k_max {
        let next = x * table[j] - j as f64 * table[j - 1];
        table.push(next);
    }
    table
}

/// 1D Hermite coefficients `c_0 .. c_{k_max}` of `f`, with
/// `c_k = (1/k!) E[f(z) He_k(z)]`.
///
/// The integral is evaluated with a pair of reflected `n_quad`-point Gauss
/// rules for the half-line Hermite weight. Splitting at the origin keeps
/// Gauss-order accuracy for the piecewise activations served here (ReLU and
/// friends have their kink at zero); a single full-range rule only converges
/// algebraically on those and cannot meet the coefficient tolerances.
pub fn hermite_coeffs_1d<F>(f: F, k_max: usize, n_quad: usize) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    if n_quad < k_max + 1 {
        return Err(Error::InvalidArgument(format!(
            "hermite_coeffs_1d: n_quad = {n_quad} below k_max + 1 = {}",
            k_max + 1
        )));
    }
    let rule = half_range_hermite(n_quad.min(48))?;
    let mut acc = vec![0.0f64; k_max + 1];
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let fp = f(x);
        let fm = f(-x);
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!(
                "hermite_coeffs_1d: f not finite at ±{x}"
            )));
        }
        let table = hermite_poly_table(k_max, x);
        let mut sign = 1.0;
        for k in 0..=k_max {
            // He_k(-x) = (-1)^k He_k(x)
            acc[k] += w * (fp + sign * fm) * table[k];
            sign = -sign;
        }
    }
    let mut fact = 1.0;
    for (k, a) in acc.iter_mut().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        *a /= fact;
    }
    Ok(acc)
}

/// `E[f(z)²]` under the standard 1D Gaussian, same split rule as
/// [`hermite_coeffs_1d`].
pub fn l2_norm_sq_1d<F>(f: F, n_quad: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let rule = half_range_hermite(n_quad.min(48))?;
    let mut acc = 0.0;
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let fp = f(x);
        let fm = f(-x);
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite("l2_norm_sq_1d".into()));
        }
        acc += w * (fp * fp + fm * fm);
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

/// Scalar activation with a known Hermite expansion.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Square,
    Relu,
    /// `σ(x) = Σ_k c_k He_k(x)` with the given coefficients.
    HermiteSeries(Vec<f64>),
}

impl Activation {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Square => x * x,
            Activation::Relu => x.max(0.0),
            Activation::HermiteSeries(c) => {
                let table = hermite_poly_table(c.len().saturating_sub(1), x);
                c.iter().zip(&table).map(|(ck, he)| ck * he).sum()
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Square => 2.0 * x,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::HermiteSeries(c) => {
                // He_k' = k He_{k-1}
                let table = hermite_poly_table(c.len().saturating_sub(1), x);
                c.iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, ck)| ck * k as f64 * table[k - 1])
                    .sum()
            }
        }
    }

    /// `c_k(σ) = (1/k!) E[σ(z) He_k(z)]`, closed form where available.
    pub fn hermite_coeff(&self, k: usize) -> f64 {
        match self {
            Activation::Identity => {
                if k == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Square => {
                if k == 0 || k == 2 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Relu => relu_hermite_coeff(k),
            Activation::HermiteSeries(c) => c.get(k).copied().unwrap_or(0.0),
        }
    }

    pub fn hermite_coeffs(&self, k_max: usize) -> Vec<f64> {
        (0..=k_max).map(|k| self.hermite_coeff(k)).collect()
    }

    /// `E[σ(z)²]` under the standard Gaussian.
    pub fn l2_norm_sq(&self) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Square => 3.0,
            Activation::Relu => 0.5,
            Activation::HermiteSeries(c) => {
                let mut fact = 1.0;
                c.iter()
                    .enumerate()
                    .map(|(k, ck)| {
                        if k > 0 {
                            fact *= k as f64;
                        }
                        fact * ck * ck
                    })
                    .sum()
            }
        }
    }
}

/// Closed-form Hermite coefficients of ReLU: `c_0 = 1/√(2π)`, `c_1 = 1/2`,
/// zero at odd orders ≥ 3, and
/// `c_k = (-1)^{k/2-1} (k-3)!! / (k!·√(2π))` at even orders ≥ 2.
fn relu_hermite_coeff(k: usize) -> f64 {
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    match k {
        0 => inv_sqrt_2pi,
        1 => 0.5,
        _ if k % 2 == 1 => 0.0,
        _ => {
            let mut double_fact = 1.0; // (k-3)!! with (-1)!! = 1
            let mut j = k as i64 - 3;
            while j >= 2 {
                double_fact *= j as f64;
                j -= 2;
            }
            let mut fact = 1.0;
            for i in 2..=k {
                fact *= i as f64;
            }
            let sign = if (k / 2) % 2 == 1 { 1.0 } else { -1.0 };
            sign * double_fact / fact * inv_sqrt_2pi
        }
    }
}

// ---------------------------------------------------------------------------
// Hermite tensors
// ---------------------------------------------------------------------------

/// Symmetric order-`k` tensor over `R^L`, dense or orthogonally decomposed.
#[derive(Debug, Clone)]
pub struct HermiteTensor {
    order: usize,
    dim: usize,
    data: TensorData,
}

#[derive(Debug, Clone)]
enum TensorData {
    /// `L^k` entries, index `(i_1..i_k)` flattened as `Σ i_j · L^j`.
    Dense(Vec<f64>),
    /// `Σ_i λ_i v_i^{⊗k}` with orthonormal `v_i`.
    Odeco(Vec<(f64, Vec<f64>)>),
}

/// Outcome of an operator-norm computation; `converged` is false only for
/// the iterative order ≥ 3 dense path.
#[derive(Debug, Clone, Copy)]
pub struct OperatorNorm {
    pub value: f64,
    pub converged: bool,
}

impl HermiteTensor {
    /// Dense tensor from flat entries. Checks the length and symmetry (every
    /// entry must match its sorted-index representative within 1e-12 of the
    /// largest magnitude).
    pub fn dense(order: usize, dim: usize, entries: Vec<f64>) -> Result<Self> {
        let expect = dim.checked_pow(order as u32).ok_or_else(|| {
            Error::ResourceGuard(format!("dense tensor {dim}^{order} overflows"))
        })?;
        if entries.len() != expect {
            return Err(Error::ShapeMismatch(format!(
                "dense tensor: expected {expect} entries, got {}",
                entries.len()
            )));
        }
        let scale = entries.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        let mut idx = vec![0usize; order];
        for flat in 0..entries.len() {
            decode_index(flat, dim, &mut idx);
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            let rep = encode_index(&sorted, dim);
            if (entries[flat] - entries[rep]).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!(
                    "dense tensor not symmetric at flat index {flat}"
                )));
            }
        }
        Ok(Self {
            order,
            dim,
            data: TensorData::Dense(entries),
        })
    }

    /// Odeco tensor `Σ_i λ_i v_i^{⊗k}`. Vectors must be unit-norm within
    /// 1e-10 and pairwise orthogonal within 1e-10.
    pub fn odeco(order: usize, dim: usize, terms: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument(
                "odeco representation needs order >= 1; use a dense scalar".into(),
            ));
        }
        for (i, (_, v)) in terms.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "odeco vector {i} has dim {}, expected {dim}",
                    v.len()
                )));
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "odeco vector {i} has norm {norm}, expected 1"
                )));
            }
        }
        for i in 0..terms.len() {
            for j in (i + 1)..terms.len() {
                let dot: f64 = terms[i]
                    .1
                    .iter()
                    .zip(&terms[j].1)
                    .map(|(a, b)| a * b)
                    .sum();
                if dot.abs() > 1e-10 {
                    return Err(Error::InvalidArgument(format!(
                        "odeco vectors {i},{j} not orthogonal (dot = {dot:.3e})"
                    )));
                }
            }
        }
        Ok(Self {
            order,
            dim,
            data: TensorData::Odeco(terms),
        })
    }

    /// Order-0 tensor holding a single scalar.
    pub fn scalar(dim: usize, value: f64) -> Self {
        Self {
            order: 0,
            dim,
            data: TensorData::Dense(vec![value]),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_odeco(&self) -> bool {
        matches!(self.data, TensorData::Odeco(_))
    }

    pub fn odeco_terms(&self) -> Option<&[(f64, Vec<f64>)]> {
        match &self.data {
            TensorData::Odeco(t) => Some(t),
            TensorData::Dense(_) => None,
        }
    }

    /// Entry at a multi-index (length must equal the order).
    pub fn entry(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.order, "index length vs tensor order");
        match &self.data {
            TensorData::Dense(e) => e[encode_index(index, self.dim)],
            TensorData::Odeco(terms) => terms
                .iter()
                .map(|(lam, v)| lam * index.iter().map(|&i| v[i]).product::<f64>())
                .sum(),
        }
    }

    /// Dense copy; odeco tensors are expanded as `Σ_i λ_i Π_j (v_i)_{i_j}`.
    pub fn densify(&self) -> Result<HermiteTensor> {
        match &self.data {
            TensorData::Dense(_) => Ok(self.clone()),
            TensorData::Odeco(terms) => {
                let total = (self.dim as u128).pow(self.order as u32);
                if total > TENSOR_GUARD {
                    return Err(Error::ResourceGuard(format!(
                        "densify: {0}^{1} entries exceed the guard",
                        self.dim, self.order
                    )));
                }
                let total = total as usize;
                let mut entries = vec![0.0f64; total];
                let mut idx = vec![0usize; self.order];
                for (flat, e) in entries.iter_mut().enumerate() {
                    decode_index(flat, self.dim, &mut idx);
                    *e = terms
                        .iter()
                        .map(|(lam, v)| lam * idx.iter().map(|&i| v[i]).product::<f64>())
                        .sum();
                }
                Ok(HermiteTensor {
                    order: self.order,
                    dim: self.dim,
                    data: TensorData::Dense(entries),
                })
            }
        }
    }

    /// Full contraction against the all-ones vector on every index. Dense:
    /// sum of all entries. Odeco: `Σ_i λ_i (Σ_j v_ij)^k`.
    pub fn contract_all_ones(&self) -> f64 {
        match &self.data {
            TensorData::Dense(e) => e.iter().sum(),
            TensorData::Odeco(terms) => terms
                .iter()
                .map(|(lam, v)| lam * v.iter().sum::<f64>().powi(self.order as i32))
                .sum(),
        }
    }

    /// `T × (m, ..., m)`: contraction against the same vector on every index.
    pub fn contract_vector_power(&self, m: &[f64]) -> f64 {
        assert_eq!(m.len(), self.dim);
        match &self.data {
            TensorData::Dense(e) => {
                if self.order == 0 {
                    return e[0];
                }
                let mut idx = vec![0usize; self.order];
                let mut acc = 0.0;
                for (flat, &t) in e.iter().enumerate() {
                    if t == 0.0 {
                        continue;
                    }
                    decode_index(flat, self.dim, &mut idx);
                    acc += t * idx.iter().map(|&i| m[i]).product::<f64>();
                }
                acc
            }
            TensorData::Odeco(terms) => terms
                .iter()
                .map(|(lam, v)| {
                    let dot: f64 = v.iter().zip(m).map(|(a, b)| a * b).sum();
                    lam * dot.powi(self.order as i32)
                })
                .sum(),
        }
    }

    /// `T × (I, m, ..., m)`: one free index, the rest contracted with `m`.
    /// Requires order ≥ 1.
    pub fn contract_one_slot(&self, m: &[f64]) -> Vec<f64> {
        assert!(self.order >= 1, "contract_one_slot needs order >= 1");
        assert_eq!(m.len(), self.dim);
        match &self.data {
            TensorData::Dense(e) => {
                let mut out = vec![0.0f64; self.dim];
                let mut idx = vec![0usize; self.order];
                for (flat, &t) in e.iter().enumerate() {
                    if t == 0.0 {
                        continue;
                    }
                    decode_index(flat, self.dim, &mut idx);
                    let tail: f64 = idx[1..].iter().map(|&i| m[i]).product();
                    out[idx[0]] += t * tail;
                }
                out
            }
            TensorData::Odeco(terms) => {
                let mut out = vec![0.0f64; self.dim];
                for (lam, v) in terms {
                    let dot: f64 = v.iter().zip(m).map(|(a, b)| a * b).sum();
                    let coef = lam * dot.powi(self.order as i32 - 1);
                    for (o, vi) in out.iter_mut().zip(v) {
                        *o += coef * vi;
                    }
                }
                out
            }
        }
    }

    /// Largest absolute entry; the magnitude used by SIE detection. Odeco
    /// tensors too large to densify fall back to `max_i |λ_i|`, which is
    /// zero exactly when the tensor is.
    pub fn max_abs_entry(&self) -> f64 {
        match &self.data {
            TensorData::Dense(e) => e.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            TensorData::Odeco(terms) => {
                let total = (self.dim as u128).pow(self.order as u32);
                if total <= 1_000_000 {
                    self.densify()
                        .map(|d| d.max_abs_entry())
                        .unwrap_or_else(|_| terms.iter().fold(0.0, |m, (l, _)| m.max(l.abs())))
                } else {
                    terms.iter().fold(0.0, |m, (l, _)| m.max(l.abs()))
                }
            }
        }
    }

    /// Frobenius norm squared (sum of squared entries). For odeco tensors
    /// with orthonormal directions this is `Σ λ_i²`.
    pub fn frobenius_sq(&self) -> f64 {
        match &self.data {
            TensorData::Dense(e) => e.iter().map(|x| x * x).sum(),
            TensorData::Odeco(terms) => terms.iter().map(|(l, _)| l * l).sum(),
        }
    }

    /// Operator norm with a convergence flag.
    ///
    /// Order 0: absolute value. Order 1: Euclidean norm. Order 2 dense:
    /// largest singular value via the symmetric eigendecomposition. Odeco of
    /// order ≥ 2: `max_i |λ_i|`, exact for orthogonal decompositions. Dense
    /// order ≥ 3: shifted symmetric power iteration with 32 seeded restarts
    /// of 200 iterations, an approximation by necessity.
    pub fn operator_norm_detailed(&self) -> OperatorNorm {
        match (&self.data, self.order) {
            (TensorData::Dense(e), 0) => OperatorNorm {
                value: e[0].abs(),
                converged: true,
            },
            (TensorData::Dense(e), 1) => OperatorNorm {
                value: e.iter().map(|x| x * x).sum::<f64>().sqrt(),
                converged: true,
            },
            (TensorData::Odeco(terms), 1) => OperatorNorm {
                value: terms.iter().map(|(l, _)| l * l).sum::<f64>().sqrt(),
                converged: true,
            },
            (TensorData::Odeco(terms), _) => OperatorNorm {
                value: terms.iter().fold(0.0, |m, (l, _)| m.max(l.abs())),
                converged: true,
            },
            (TensorData::Dense(e), 2) => {
                let mut mat = Array2::<f64>::zeros((self.dim, self.dim));
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        mat[[i, j]] = e[i + self.dim * j];
                    }
                }
                let value = match symmetric_eigen(&mat) {
                    Ok((vals, _)) => vals.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                    Err(_) => 0.0,
                };
                OperatorNorm {
                    value,
                    converged: true,
                }
            }
            (TensorData::Dense(_), _) => self.power_iteration_norm(),
        }
    }

    /// Operator norm, best estimate (see [`Self::operator_norm_detailed`]).
    pub fn operator_norm(&self) -> f64 {
        self.operator_norm_detailed().value
    }

    fn power_iteration_norm(&self) -> OperatorNorm {
        const RESTARTS: usize = 32;
        const ITERS: usize = 200;
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_7e05);
        let mut best = 0.0f64;
        let mut any_converged = false;
        for restart in 0..RESTARTS {
            // Alternate the sign of the tensor so that both extreme
            // eigenvalues of even-order tensors are reachable.
            let sign = if restart % 2 == 0 { 1.0 } else { -1.0 };
            let mut x: Vec<f64> = (0..self.dim)
                .map(|_| rng.gen::<f64>() * 2.0 - 1.0)
                .collect();
            normalize(&mut x);
            let mut lambda = sign * self.contract_vector_power(&x);
            let mut shift = 0.0f64;
            let mut converged = false;
            for it in 0..ITERS {
                let mut u = self.contract_one_slot(&x);
                if sign < 0.0 {
                    for ui in u.iter_mut() {
                        *ui = -*ui;
                    }
                }
                for (ui, xi) in u.iter_mut().zip(&x) {
                    *ui += shift * xi;
                }
                let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < 1e-300 {
                    converged = true; // zero tensor direction
                    lambda = 0.0;
                    break;
                }
                for (xi, ui) in x.iter_mut().zip(&u) {
                    *xi = ui / norm;
                }
                let next = sign * self.contract_vector_power(&x);
                if (next - lambda).abs() <= 1e-13 * lambda.abs().max(1.0) {
                    lambda = next;
                    converged = true;
                    break;
                }
                lambda = next;
                // plain iteration oscillating: engage the convexity shift
                if it == ITERS / 2 && shift == 0.0 {
                    shift = 1.0 + lambda.abs();
                }
            }
            if lambda.abs() > best {
                best = lambda.abs();
                any_converged = converged;
            } else if (lambda.abs() - best).abs() <= 1e-10 * best.max(1.0) && converged {
                any_converged = true;
            }
        }
        OperatorNorm {
            value: best,
            converged: any_converged,
        }
    }
}

fn normalize(x: &mut [f64]) {
    let n: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    } else {
        x[0] = 1.0;
    }
}

fn encode_index(index: &[usize], dim: usize) -> usize {
    let mut flat = 0usize;
    for &i in index.iter().rev() {
        flat = flat * dim + i;
    }
    flat
}

fn decode_index(mut flat: usize, dim: usize, out: &mut [usize]) {
    for o in out.iter_mut() {
        *o = flat % dim;
        flat /= dim;
    }
}

// ---------------------------------------------------------------------------
// Expansions
// ---------------------------------------------------------------------------

/// Hermite coefficients of a map up to a truncation order, plus the
/// estimated squared-norm mass beyond the truncation.
#[derive(Debug, Clone)]
pub struct HermiteExpansion {
    dim: usize,
    k_max: usize,
    coefficients: BTreeMap<usize, HermiteTensor>,
    residual_norm: f64,
}

impl HermiteExpansion {
    pub fn new(
        dim: usize,
        k_max: usize,
        coefficients: BTreeMap<usize, HermiteTensor>,
        residual_norm: f64,
    ) -> Result<Self> {
        for (k, t) in &coefficients {
            if t.dim() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "expansion: tensor at order {k} has dim {}, expected {dim}",
                    t.dim()
                )));
            }
            if t.order() != *k || *k > k_max {
                return Err(Error::InvalidArgument(format!(
                    "expansion: tensor order {} filed under key {k} (k_max {k_max})",
                    t.order()
                )));
            }
        }
        Ok(Self {
            dim,
            k_max,
            coefficients,
            residual_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    pub fn coefficient(&self, k: usize) -> Option<&HermiteTensor> {
        self.coefficients.get(&k)
    }

    pub fn coefficients(&self) -> &BTreeMap<usize, HermiteTensor> {
        &self.coefficients
    }

    /// Evaluate the truncated expansion `Σ_k ⟨C_k, H_k(z)⟩` at a point.
    pub fn evaluate(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.dim);
        let tables: Vec<Vec<f64>> = z.iter().map(|&x| hermite_poly_table(self.k_max, x)).collect();
        let mut acc = 0.0;
        for (k, tensor) in &self.coefficients {
            match &tensor.data {
                TensorData::Dense(e) => {
                    let mut idx = vec![0usize; *k];
                    for (flat, &t) in e.iter().enumerate() {
                        if t == 0.0 {
                            continue;
                        }
                        decode_index(flat, self.dim, &mut idx);
                        acc += t * hermite_entry(&idx, &tables);
                    }
                }
                TensorData::Odeco(_) => {
                    // expand through the dense entries; odeco expansions here
                    // are small separable ones
                    if let Ok(dense) = tensor.densify() {
                        if let TensorData::Dense(e) = &dense.data {
                            let mut idx = vec![0usize; *k];
                            for (flat, &t) in e.iter().enumerate() {
                                if t == 0.0 {
                                    continue;
                                }
                                decode_index(flat, self.dim, &mut idx);
                                acc += t * hermite_entry(&idx, &tables);
                            }
                        }
                    }
                }
            }
        }
        acc
    }
}

/// Entry of the multivariate Hermite tensor `H_k(z)` at a multi-index:
/// the product of 1D polynomials with the index multiplicities.
fn hermite_entry(index: &[usize], tables: &[Vec<f64>]) -> f64 {
    let mut counts = vec![0usize; tables.len()];
    for &i in index {
        counts[i] += 1;
    }
    let mut prod = 1.0;
    for (coord, &c) in counts.iter().enumerate() {
        if c > 0 {
            prod *= tables[coord][c];
        }
    }
    prod
}

/// Odeco expansion of a separable map `g(z) = Σ_i g_i(z_i)`: for each order
/// `k ≤ k_max`, `C_k = Σ_i c_k(g_i) e_i^{⊗k}` with `e_i` the coordinate axes.
pub fn separable_expansion(
    parts: &[&dyn Fn(f64) -> f64],
    k_max: usize,
    n_quad: usize,
) -> Result<HermiteExpansion> {
    let dim = parts.len();
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "separable_expansion: no parts given".into(),
        ));
    }
    let coeff_rows: Vec<Vec<f64>> = parts
        .iter()
        .map(|g| hermite_coeffs_1d(g, k_max, n_quad))
        .collect::<Result<_>>()?;
    let mut coefficients = BTreeMap::new();
    // order 0 is a plain scalar
    let c0: f64 = coeff_rows.iter().map(|row| row[0]).sum();
    coefficients.insert(0, HermiteTensor::scalar(dim, c0));
    for k in 1..=k_max {
        let mut terms = Vec::with_capacity(dim);
        for (i, row) in coeff_rows.iter().enumerate() {
            let mut axis = vec![0.0; dim];
            axis[i] = 1.0;
            terms.push((row[k], axis));
        }
        coefficients.insert(k, HermiteTensor::odeco(k, dim, terms)?);
    }

    // Parseval residual: E[g²] - Σ_k k! ||C_k||_F², with the cross term of
    // the order-0 coefficients handled by the scalar square above.
    let mut norm_sq = 0.0;
    for (i, g) in parts.iter().enumerate() {
        norm_sq += l2_norm_sq_1d(g, n_quad)?;
        for (j, row_j) in coeff_rows.iter().enumerate() {
            if i != j {
                norm_sq += coeff_rows[i][0] * row_j[0];
            }
        }
    }
    let mut captured = c0 * c0;
    let mut fact = 1.0;
    for k in 1..=k_max {
        fact *= k as f64;
        captured += fact * coefficients[&k].frobenius_sq();
    }
    let residual_norm = (norm_sq - captured).max(0.0).sqrt();
    HermiteExpansion::new(dim, k_max, coefficients, residual_norm)
}

/// Dense order-`k` Hermite coefficient of a scalar map on `R^L` by
/// tensor-product Gauss-Hermite quadrature:
/// `C_k(g) = (1/k!) E[g(z) H_k(z)]`.
///
/// Intended for small `L` and `k`; the `L^k · N^L` work is guarded. Larger
/// separable targets should use [`separable_expansion`].
pub fn hermite_tensor_coeff<F>(
    g: F,
    seq_len: usize,
    order: usize,
    n_quad: usize,
) -> Result<HermiteTensor>
where
    F: Fn(&[f64]) -> f64,
{
    let l = seq_len;
    let tensor_len = (l as u128).pow(order as u32);
    let grid = (n_quad as u128).pow(l as u32);
    if tensor_len.saturating_mul(grid) > TENSOR_GUARD {
        return Err(Error::ResourceGuard(format!(
            "hermite_tensor_coeff: {l}^{order} entries times {n_quad}^{l} nodes exceeds the guard"
        )));
    }
    let rule = gh_rule(n_quad)?;
    let tensor_len = tensor_len as usize;

    // Exponent pattern per flat tensor index: which coordinates appear and
    // how often. Computed once, reused at every grid node.
    let mut patterns: Vec<Vec<(usize, usize)>> = Vec::with_capacity(tensor_len);
    let mut idx = vec![0usize; order];
    for flat in 0..tensor_len {
        decode_index(flat, l, &mut idx);
        let mut counts = vec![0usize; l];
        for &i in &idx {
            counts[i] += 1;
        }
        patterns.push(
            counts
                .into_iter()
                .enumerate()
                .filter(|(_, c)| *c > 0)
                .collect(),
        );
    }

    let mut acc = vec![0.0f64; tensor_len];
    let mut z = vec![0.0f64; l];
    let mut tables: Vec<Vec<f64>> = vec![Vec::new(); l];
    let grid = grid as usize;
    for node in 0..grid {
        let mut rem = node;
        let mut w = 1.0f64;
        for q in 0..l {
            let digit = rem % n_quad;
            rem /= n_quad;
            z[q] = rule.nodes()[digit];
            w *= rule.weights()[digit];
        }
        let gz = g(&z);
        if !gz.is_finite() {
            return Err(Error::NonFinite(format!(
                "hermite_tensor_coeff: g not finite at node {node}"
            )));
        }
        if gz == 0.0 {
            continue;
        }
        for (q, &zq) in z.iter().enumerate() {
            tables[q] = hermite_poly_table(order, zq);
        }
        let wg = w * gz;
        for (a, pattern) in acc.iter_mut().zip(&patterns) {
            let mut h = 1.0;
            for &(coord, count) in pattern {
                h *= tables[coord][count];
            }
            *a += wg * h;
        }
    }
    let mut fact = 1.0;
    for k in 2..=order {
        fact *= k as f64;
    }
    if order >= 2 {
        for a in acc.iter_mut() {
            *a /= fact;
        }
    }
    // Symmetrize exact rounding asymmetries before the constructor checks.
    let mut sym = acc.clone();
    let mut idx = vec![0usize; order];
    for flat in 0..tensor_len {
        decode_index(flat, l, &mut idx);
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sym[flat] = acc[encode_index(&sorted, l)];
    }
    HermiteTensor::dense(order, l, sym)
}

/// Full dense expansion of a scalar map up to `k_max`, with the residual
/// taken against the quadrature estimate of `E[g²]`.
pub fn scalar_expansion<F>(
    g: F,
    seq_len: usize,
    k_max: usize,
    n_quad: usize,
) -> Result<HermiteExpansion>
where
    F: Fn(&[f64]) -> f64 + Copy,
{
    let mut coefficients = BTreeMap::new();
    for k in 0..=k_max {
        coefficients.insert(k, hermite_tensor_coeff(g, seq_len, k, n_quad)?);
    }
    let rule = gh_rule(n_quad)?;
    let spec = crate::quadrature::GaussianSpec::new(
        ndarray::Array1::zeros(seq_len),
        ndarray::Array2::eye(seq_len),
    )?;
    let norm_sq = crate::quadrature::gaussian_expectation_1(|z| g(z) * g(z), &spec, &rule)?;
    let mut captured = 0.0;
    let mut fact = 1.0;
    for k in 0..=k_max {
        if k > 0 {
            fact *= k as f64;
        }
        captured += fact * coefficients[&k].frobenius_sq();
    }
    let residual_norm = (norm_sq - captured).max(0.0).sqrt();
    HermiteExpansion::new(seq_len, k_max, coefficients, residual_norm)
}

// ---------------------------------------------------------------------------
// Sequence information exponent
// ---------------------------------------------------------------------------

/// Result of a SIE query against a truncated expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sie {
    Order(usize),
    BeyondTruncation,
}

impl Sie {
    pub fn order(&self) -> Option<usize> {
        match self {
            Sie::Order(k) => Some(*k),
            Sie::BeyondTruncation => None,
        }
    }
}

/// Smallest order `k ≥ 1` whose coefficient tensor has an entry of magnitude
/// above the tolerance. `None` uses the default of `1e-7` relative to the
/// largest coefficient magnitude present (counting the residual mass, so a
/// target living entirely beyond the truncation is not mistaken for noise),
/// the quadrature error floor.
pub fn sequence_information_exponent(exp: &HermiteExpansion, tol: Option<f64>) -> Sie {
    let global_max = (1..=exp.k_max())
        .filter_map(|k| exp.coefficient(k))
        .map(|t| t.max_abs_entry())
        .fold(0.0f64, f64::max)
        .max(exp.residual_norm());
    let tol = tol.unwrap_or(1e-7 * global_max.max(f64::MIN_POSITIVE));
    for k in 1..=exp.k_max() {
        if let Some(t) = exp.coefficient(k) {
            if t.max_abs_entry() > tol {
                return Sie::Order(k);
            }
        }
    }
    Sie::BeyondTruncation
}
