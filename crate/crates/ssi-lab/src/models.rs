//! Forward models and targets: tied attention with positional encoding,
//! injected positional encoding, SSI targets, and the tied/untied benchmark
//! networks.
//!
//! Conventions. Token matrices `X ∈ R^{L×d}` have i.i.d. `N(0, 1/d)` entries;
//! the hidden direction `w*` and every trainable weight vector live on the
//! sphere of radius `√d`; positional rows are unit vectors orthogonal to
//! `w*`. Under these normalizations the local fields `z* = X·w*` and
//! `z = (X + P/√d)·w` are jointly Gaussian with unit variances, mean `e_i`
//! on `z` and cross-covariance `δ_ij·m`, where
//!
//! ```text
//! m = w*ᵀw/d      (semantic overlap)
//! e = P·w/√d      (positional overlap)
//! ```
//!
//! are the sufficient statistics: the population loss depends on `w` only
//! through `(e, m)`, constrained to the closed unit ball.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::hermite::{hermite_poly, Activation};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// A fresh token sequence with i.i.d. `N(0, 1/d)` entries.
pub fn sample_sequence<R: Rng>(l: usize, d: usize, rng: &mut R) -> Array2<f64> {
    let scale = 1.0 / (d as f64).sqrt();
    Array2::from_shape_fn((l, d), |_| {
        let g: f64 = rng.sample(StandardNormal);
        g * scale
    })
}

/// One labelled sample from an SSI target.
#[derive(Debug, Clone)]
pub struct SequenceSample {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
}

/// Uniform point on the sphere of radius `√d`.
pub fn sample_sphere<R: Rng>(d: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let v = Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(StandardNormal));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v * ((d as f64).sqrt() / norm);
        }
    }
}

// ---------------------------------------------------------------------------
// Positional encodings and frames
// ---------------------------------------------------------------------------

/// Positional layout of the attention scores.
#[derive(Debug, Clone)]
pub enum PositionalLayout {
    /// No positional encoding; the only sufficient statistic is `m`.
    None,
    /// `L` orthonormal rows, all orthogonal to `w*`. Frame statistic
    /// `e = P·w/√d ∈ R^L`.
    Orthonormal(Array2<f64>),
    /// Two-token layout `P_1 = -P_2 = p` with a single unit row `p ⊥ w*`.
    /// Frame statistic is the scalar `e = pᵀw/√d`; the score means are
    /// `(e, -e)`.
    AntisymmetricPair(Array1<f64>),
}

impl PositionalLayout {
    /// Number of independent positional coordinates in the frame.
    pub fn frame_dim(&self) -> usize {
        match self {
            PositionalLayout::None => 0,
            PositionalLayout::Orthonormal(p) => p.nrows(),
            PositionalLayout::AntisymmetricPair(_) => 1,
        }
    }

    /// The dense `L×d` matrix added to the tokens as `P/√d`.
    pub fn materialize(&self, l: usize, d: usize) -> Result<Array2<f64>> {
        match self {
            PositionalLayout::None => Ok(Array2::zeros((l, d))),
            PositionalLayout::Orthonormal(p) => {
                if p.nrows() != l || p.ncols() != d {
                    return Err(Error::ShapeMismatch("positional matrix shape".into()));
                }
                Ok(p.clone())
            }
            PositionalLayout::AntisymmetricPair(p) => {
                if l != 2 || p.len() != d {
                    return Err(Error::ShapeMismatch(
                        "antisymmetric pair needs L = 2 and a d-vector".into(),
                    ));
                }
                let mut out = Array2::zeros((2, d));
                out.row_mut(0).assign(p);
                out.row_mut(1).assign(&(-p));
                Ok(out)
            }
        }
    }

    /// Adds `(P·w)/√d` to the local field `z` in place.
    pub fn add_shift(&self, w: &Array1<f64>, z: &mut [f64]) {
        let inv_sqrt_d = 1.0 / (w.len() as f64).sqrt();
        match self {
            PositionalLayout::None => {}
            PositionalLayout::Orthonormal(p) => {
                for (i, zi) in z.iter_mut().enumerate() {
                    *zi += p.row(i).dot(w) * inv_sqrt_d;
                }
            }
            PositionalLayout::AntisymmetricPair(p) => {
                let e = p.dot(w) * inv_sqrt_d;
                z[0] += e;
                z[1] -= e;
            }
        }
    }
}

/// The hidden direction together with its positional frame. Construction
/// Gram-Schmidts fresh Gaussian vectors against `w*/√d` (and each other), so
/// the orthonormality invariants hold by construction.
#[derive(Debug, Clone)]
pub struct TargetFrame {
    pub d: usize,
    pub l: usize,
    pub w_star: Array1<f64>,
    pub layout: PositionalLayout,
}

/// Which positional layout to build in [`TargetFrame::sample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LayoutKind {
    None,
    Orthonormal,
    AntisymmetricPair,
}

impl TargetFrame {
    pub fn sample<R: Rng>(l: usize, d: usize, kind: LayoutKind, rng: &mut R) -> Result<Self> {
        if d < l + 2 {
            return Err(Error::InvalidArgument(format!(
                "TargetFrame: d = {d} too small for L = {l}"
            )));
        }
        let w_star = sample_sphere(d, rng);
        let unit_star = &w_star / (d as f64).sqrt();
        let layout = match kind {
            LayoutKind::None => PositionalLayout::None,
            LayoutKind::Orthonormal => {
                let mut rows: Vec<Array1<f64>> = Vec::with_capacity(l);
                for _ in 0..l {
                    rows.push(gram_schmidt_unit(d, &unit_star, &rows, rng));
                }
                let mut p = Array2::zeros((l, d));
                for (i, r) in rows.iter().enumerate() {
                    p.row_mut(i).assign(r);
                }
                PositionalLayout::Orthonormal(p)
            }
            LayoutKind::AntisymmetricPair => {
                if l != 2 {
                    return Err(Error::InvalidArgument(
                        "antisymmetric pair layout needs L = 2".into(),
                    ));
                }
                let p = gram_schmidt_unit(d, &unit_star, &[], rng);
                PositionalLayout::AntisymmetricPair(p)
            }
        };
        Ok(Self {
            d,
            l,
            w_star,
            layout,
        })
    }

    /// Checks the orthonormality invariants of the frame
    /// `{w*/√d, P_1, ..., P_L}` to the stated tolerance.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let unit_star = &self.w_star / (self.d as f64).sqrt();
        let rows: Vec<Array1<f64>> = match &self.layout {
            PositionalLayout::None => vec![],
            PositionalLayout::Orthonormal(p) => {
                (0..p.nrows()).map(|i| p.row(i).to_owned()).collect()
            }
            PositionalLayout::AntisymmetricPair(p) => vec![p.clone()],
        };
        for (i, r) in rows.iter().enumerate() {
            if (r.dot(r).sqrt() - 1.0).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "frame row {i} is not unit-norm"
                )));
            }
            if r.dot(&unit_star).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "frame row {i} is not orthogonal to w*"
                )));
            }
            for (j, s) in rows.iter().enumerate().skip(i + 1) {
                if r.dot(s).abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "frame rows {i},{j} are not orthogonal"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn gram_schmidt_unit<R: Rng>(
    d: usize,
    unit_star: &Array1<f64>,
    existing: &[Array1<f64>],
    rng: &mut R,
) -> Array1<f64> {
    loop {
        let mut v = Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(StandardNormal));
        let proj = v.dot(unit_star);
        v = v - proj * unit_star;
        for r in existing {
            let proj = v.dot(r);
            v = v - proj * r;
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

// ---------------------------------------------------------------------------
// Reduction maps
// ---------------------------------------------------------------------------

/// Fixed map from the `L×L` attention matrix to a `k`-vector.
#[derive(Debug, Clone)]
pub enum ReductionMap {
    /// Sum of the diagonal; `k = 1`.
    Trace,
    /// The whole matrix, flattened row-major; `k = L²`.
    FullMatrix,
    /// `a_leftᵀ A a_right`; `k = 1`.
    Bilinear {
        left: Array1<f64>,
        right: Array1<f64>,
    },
}

impl ReductionMap {
    pub fn uniform_bilinear(l: usize) -> Self {
        let a = Array1::from_elem(l, 1.0 / (l as f64).sqrt());
        ReductionMap::Bilinear {
            left: a.clone(),
            right: a,
        }
    }

    pub fn out_dim(&self, l: usize) -> usize {
        match self {
            ReductionMap::Trace => 1,
            ReductionMap::FullMatrix => l * l,
            ReductionMap::Bilinear { .. } => 1,
        }
    }

    /// Applies the reduction to a row-major `L×L` matrix.
    pub fn apply(&self, mat: &[f64], l: usize, out: &mut [f64]) {
        match self {
            ReductionMap::Trace => {
                let mut tr = 0.0;
                for i in 0..l {
                    tr += mat[i * l + i];
                }
                out[0] = tr;
            }
            ReductionMap::FullMatrix => out.copy_from_slice(mat),
            ReductionMap::Bilinear { left, right } => {
                let mut acc = 0.0;
                for i in 0..l {
                    let mut row = 0.0;
                    for j in 0..l {
                        row += mat[i * l + j] * right[j];
                    }
                    acc += left[i] * row;
                }
                out[0] = acc;
            }
        }
    }

    /// Adjoint of the reduction: scatters the residual `u` on the output back
    /// to an `L×L` matrix cotangent.
    pub fn adjoint(&self, u: &[f64], l: usize, out: &mut [f64]) {
        out.fill(0.0);
        match self {
            ReductionMap::Trace => {
                for i in 0..l {
                    out[i * l + i] = u[0];
                }
            }
            ReductionMap::FullMatrix => out.copy_from_slice(u),
            ReductionMap::Bilinear { left, right } => {
                for i in 0..l {
                    for j in 0..l {
                        out[i * l + j] = u[0] * left[i] * right[j];
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Softmax and forwards
// ---------------------------------------------------------------------------

/// Row-wise softmax with max-subtraction, on a row-major `L×L` matrix.
pub fn softmax_rows(mat: &[f64], l: usize, out: &mut [f64]) {
    for i in 0..l {
        let row = &mat[i * l..(i + 1) * l];
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let mut sum = 0.0;
        for j in 0..l {
            let e = (row[j] - max).exp();
            out[i * l + j] = e;
            sum += e;
        }
        for j in 0..l {
            out[i * l + j] /= sum;
        }
    }
}

/// Convenience wrapper over matrices.
pub fn softmax_rows_mat(mat: &Array2<f64>) -> Array2<f64> {
    let l = mat.nrows();
    let flat: Vec<f64> = mat.iter().cloned().collect();
    let mut out = vec![0.0; l * l];
    softmax_rows(&flat, l, &mut out);
    Array2::from_shape_vec((l, l), out).expect("square shape")
}

/// Local field of the attention model: `z = (X + P/√d)·w`.
pub fn attention_local_field(
    w: &Array1<f64>,
    layout: &PositionalLayout,
    x: &Array2<f64>,
    z: &mut [f64],
) {
    for (i, zi) in z.iter_mut().enumerate() {
        *zi = x.row(i).dot(w);
    }
    layout.add_shift(w, z);
}

/// Tied attention forward: `R[softmax_rows(z·zᵀ)]` with
/// `z = (X + P/√d)·w`. Writes the `k` outputs into `out`.
pub fn tied_attention_forward(
    w: &Array1<f64>,
    layout: &PositionalLayout,
    x: &Array2<f64>,
    reduction: &ReductionMap,
    out: &mut [f64],
) -> Result<()> {
    let l = x.nrows();
    if w.len() != x.ncols() {
        return Err(Error::ShapeMismatch("tied_attention_forward: w vs X".into()));
    }
    let mut z = vec![0.0; l];
    attention_local_field(w, layout, x, &mut z);
    forward_from_field(&z, None, reduction, out);
    Ok(())
}

/// Injected-encoding forward: the scores gain a fixed rank-one `c·cᵀ` term,
/// `R[softmax_rows(z·zᵀ + c·cᵀ)]`. With `c = 0` this is exactly
/// [`tied_attention_forward`].
pub fn injected_attention_forward(
    w: &Array1<f64>,
    injected: &Array1<f64>,
    layout: &PositionalLayout,
    x: &Array2<f64>,
    reduction: &ReductionMap,
    out: &mut [f64],
) -> Result<()> {
    let l = x.nrows();
    if w.len() != x.ncols() || injected.len() != l {
        return Err(Error::ShapeMismatch(
            "injected_attention_forward: shapes".into(),
        ));
    }
    let mut z = vec![0.0; l];
    attention_local_field(w, layout, x, &mut z);
    forward_from_field(&z, Some(injected.as_slice().unwrap()), reduction, out);
    Ok(())
}

/// Attention output as a function of the local field alone; this is the map
/// the population loss integrates over the joint Gaussian of `(z*, z)`.
pub fn forward_from_field(
    z: &[f64],
    injected: Option<&[f64]>,
    reduction: &ReductionMap,
    out: &mut [f64],
) {
    let l = z.len();
    let mut scores = vec![0.0; l * l];
    let mut sm = vec![0.0; l * l];
    forward_from_field_buf(z, injected, reduction, &mut scores, &mut sm, out);
}

/// Allocation-free core of [`forward_from_field`] for quadrature loops.
pub(crate) fn forward_from_field_buf(
    z: &[f64],
    injected: Option<&[f64]>,
    reduction: &ReductionMap,
    scores: &mut [f64],
    sm: &mut [f64],
    out: &mut [f64],
) {
    let l = z.len();
    for i in 0..l {
        for j in 0..l {
            scores[i * l + j] = z[i] * z[j];
        }
    }
    if let Some(c) = injected {
        for i in 0..l {
            for j in 0..l {
                scores[i * l + j] += c[i] * c[j];
            }
        }
    }
    softmax_rows(scores, l, sm);
    reduction.apply(sm, l, out);
}

/// Tied benchmark network: `σ(Flatten(X)·w_tied/√L) = σ(Σ_i x_iᵀw/√L)`.
pub fn tied_network_forward(
    w: &Array1<f64>,
    x: &Array2<f64>,
    activation: &Activation,
) -> Result<f64> {
    if w.len() != x.ncols() {
        return Err(Error::ShapeMismatch("tied_network_forward: w vs X".into()));
    }
    let inv_sqrt_l = 1.0 / (x.nrows() as f64).sqrt();
    let mut u = 0.0;
    for i in 0..x.nrows() {
        u += x.row(i).dot(w);
    }
    Ok(activation.apply(u * inv_sqrt_l))
}

/// Untied benchmark network: `σ(Flatten(X)·Flatten(W)/√L) = σ(Σ_i x_iᵀW_i/√L)`.
pub fn untied_network_forward(
    w: &Array2<f64>,
    x: &Array2<f64>,
    activation: &Activation,
) -> Result<f64> {
    if w.shape() != x.shape() {
        return Err(Error::ShapeMismatch("untied_network_forward: W vs X".into()));
    }
    let inv_sqrt_l = 1.0 / (x.nrows() as f64).sqrt();
    let mut u = 0.0;
    for i in 0..x.nrows() {
        u += x.row(i).dot(&w.row(i));
    }
    Ok(activation.apply(u * inv_sqrt_l))
}

// ---------------------------------------------------------------------------
// Weight states and sufficient statistics
// ---------------------------------------------------------------------------

/// Trainable weights: one shared row on the `√d` sphere, or `L` independent
/// rows each on the `√d` sphere.
#[derive(Debug, Clone)]
pub enum WeightState {
    Tied(Array1<f64>),
    Untied(Array2<f64>),
}

impl WeightState {
    pub fn sample_tied<R: Rng>(d: usize, rng: &mut R) -> Self {
        WeightState::Tied(sample_sphere(d, rng))
    }

    pub fn sample_untied<R: Rng>(l: usize, d: usize, rng: &mut R) -> Self {
        let mut w = Array2::zeros((l, d));
        for i in 0..l {
            w.row_mut(i).assign(&sample_sphere(d, rng));
        }
        WeightState::Untied(w)
    }

    pub fn dim(&self) -> usize {
        match self {
            WeightState::Tied(w) => w.len(),
            WeightState::Untied(w) => w.ncols(),
        }
    }

    /// Largest deviation of any constrained norm from `√d`.
    pub fn norm_defect(&self) -> f64 {
        let sqrt_d = (self.dim() as f64).sqrt();
        match self {
            WeightState::Tied(w) => (w.dot(w).sqrt() - sqrt_d).abs(),
            WeightState::Untied(w) => (0..w.nrows())
                .map(|i| {
                    let r = w.row(i);
                    (r.dot(&r).sqrt() - sqrt_d).abs()
                })
                .fold(0.0, f64::max),
        }
    }
}

/// The pair of positional and semantic overlaps.
///
/// Tied states carry a scalar `m` and the frame vector `e`; untied states
/// carry the per-row overlap vector `𝐦 = W·w*/d` (compacted to
/// `m_untied = ‖𝐦‖/√L`) and the per-row positional overlaps
/// `e_i = P_i·W_i/√d`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SufficientStats {
    pub e: Vec<f64>,
    pub m: StatsOverlap,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub enum StatsOverlap {
    Tied(f64),
    Untied(Vec<f64>),
}

impl SufficientStats {
    /// Scalar semantic overlap: `m` for tied states, `‖𝐦‖/√L` untied.
    pub fn m_scalar(&self) -> f64 {
        match &self.m {
            StatsOverlap::Tied(m) => *m,
            StatsOverlap::Untied(mv) => {
                let norm: f64 = mv.iter().map(|x| x * x).sum::<f64>().sqrt();
                norm / (mv.len() as f64).sqrt()
            }
        }
    }

    /// Signed overlap along the hidden direction for tied states; untied
    /// states report the compact scalar (non-negative).
    pub fn m_signed(&self) -> f64 {
        match &self.m {
            StatsOverlap::Tied(m) => *m,
            StatsOverlap::Untied(_) => self.m_scalar(),
        }
    }

    pub fn e_norm(&self) -> f64 {
        self.e.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// The weak-recovery statistic `‖(e, m)‖`.
    pub fn recovery_norm(&self) -> f64 {
        let m = self.m_scalar();
        (self.e_norm().powi(2) + m * m).sqrt()
    }
}

/// Sufficient statistics of a weight state in a target frame.
///
/// The frame `{w*/√d, P_1, ..., P_L}` must be orthonormal (validated to
/// 1e-8); this is what constrains `‖(e, m)‖ ≤ 1`.
pub fn sufficient_stats(state: &WeightState, frame: &TargetFrame) -> Result<SufficientStats> {
    frame
        .validate(1e-8)
        .map_err(|_| Error::InvalidArgument("sufficient_stats: frame not orthonormal".into()))?;
    let d = frame.d as f64;
    let sqrt_d = d.sqrt();
    match state {
        WeightState::Tied(w) => {
            let m = frame.w_star.dot(w) / d;
            let e = match &frame.layout {
                PositionalLayout::None => vec![],
                PositionalLayout::Orthonormal(p) => {
                    (0..p.nrows()).map(|i| p.row(i).dot(w) / sqrt_d).collect()
                }
                PositionalLayout::AntisymmetricPair(p) => vec![p.dot(w) / sqrt_d],
            };
            Ok(SufficientStats {
                e,
                m: StatsOverlap::Tied(m),
            })
        }
        WeightState::Untied(wm) => {
            let mv: Vec<f64> = (0..wm.nrows())
                .map(|i| frame.w_star.dot(&wm.row(i)) / d)
                .collect();
            let e = match &frame.layout {
                PositionalLayout::None => vec![],
                PositionalLayout::Orthonormal(p) => (0..p.nrows())
                    .map(|i| p.row(i).dot(&wm.row(i)) / sqrt_d)
                    .collect(),
                PositionalLayout::AntisymmetricPair(p) => {
                    vec![(p.dot(&wm.row(0)) - p.dot(&wm.row(1))) / (2.0 * sqrt_d)]
                }
            };
            Ok(SufficientStats {
                e,
                m: StatsOverlap::Untied(mv),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Link functions
// ---------------------------------------------------------------------------

/// Tag describing where a link function came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    SeparableHermite,
    SoftmaxAttentionTarget,
    PositionalSemantic,
    Custom,
}

/// A deterministic target map `g: R^L → R^k`.
pub struct LinkFunction {
    seq_len: usize,
    out_dim: usize,
    kind: LinkKind,
    evaluator: Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
}

impl std::fmt::Debug for LinkFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinkFunction")
            .field("seq_len", &self.seq_len)
            .field("out_dim", &self.out_dim)
            .field("kind", &self.kind)
            .finish()
    }
}

impl LinkFunction {
    pub fn new<F>(seq_len: usize, out_dim: usize, kind: LinkKind, evaluator: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            seq_len,
            out_dim,
            kind,
            evaluator: Box::new(evaluator),
        }
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kind(&self) -> LinkKind {
        self.kind
    }

    pub fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.seq_len);
        debug_assert_eq!(out.len(), self.out_dim);
        (self.evaluator)(z, out)
    }

    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim];
        self.eval_into(z, &mut out);
        out
    }

    /// Scalar evaluation helper for `k = 1` links.
    pub fn eval_scalar(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(self.out_dim, 1);
        let mut out = [0.0];
        self.eval_into(z, &mut out);
        out[0]
    }

    /// Quadrature witness of square-integrability: `E[‖g(z)‖²]` under the
    /// standard Gaussian, which must come out finite.
    pub fn square_integrability_witness(&self, n_quad: usize) -> Result<f64> {
        let spec = crate::quadrature::GaussianSpec::new(
            Array1::zeros(self.seq_len),
            Array2::eye(self.seq_len),
        )?;
        let rule = crate::quadrature::gh_rule(n_quad)?;
        let out = crate::quadrature::gaussian_expectation(
            |z, buf| {
                let mut val = vec![0.0; self.out_dim];
                self.eval_into(z, &mut val);
                buf[0] = val.iter().map(|v| v * v).sum();
            },
            1,
            &spec,
            &rule,
        )?;
        if !out[0].is_finite() {
            return Err(Error::NonFinite("square-integrability witness".into()));
        }
        Ok(out[0])
    }

    /// Label for a token matrix: `g(X·w*)`.
    pub fn ssi_target(&self, w_star: &Array1<f64>, x: &Array2<f64>, out: &mut [f64]) -> Result<()> {
        if x.nrows() != self.seq_len || x.ncols() != w_star.len() {
            return Err(Error::ShapeMismatch("ssi_target: X vs link".into()));
        }
        let mut z = vec![0.0; self.seq_len];
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = x.row(i).dot(w_star);
        }
        self.eval_into(&z, out);
        Ok(())
    }

    // -- catalog ------------------------------------------------------------

    /// `g(z) = Σ_i He_k(z_i)`.
    pub fn sum_hermite(l: usize, order: usize) -> Self {
        Self::new(l, 1, LinkKind::SeparableHermite, move |z, out| {
            out[0] = z.iter().map(|&zi| hermite_poly(order, zi)).sum();
        })
    }

    /// `g(z) = Σ_i z_i / √L`.
    pub fn normalized_sum(l: usize) -> Self {
        let scale = 1.0 / (l as f64).sqrt();
        Self::new(l, 1, LinkKind::SeparableHermite, move |z, out| {
            out[0] = z.iter().sum::<f64>() * scale;
        })
    }

    /// Antisymmetric first-order target `g(z) = z_1 - z_2`; its leading
    /// coefficient contracts to zero against the all-ones vector.
    pub fn pathological_sign(l: usize) -> Self {
        assert!(l >= 2);
        Self::new(l, 1, LinkKind::SeparableHermite, |z, out| {
            out[0] = z[0] - z[1];
        })
    }

    /// Antisymmetric second-order target `g(z) = z_1² - z_2²`.
    pub fn pathological_square(l: usize) -> Self {
        assert!(l >= 2);
        Self::new(l, 1, LinkKind::SeparableHermite, |z, out| {
            out[0] = z[0] * z[0] - z[1] * z[1];
        })
    }

    /// Weighted even target `4/3 + He_4(z_1) + 2·He_4(z_2)`; fourth-order
    /// without positional encoding, second-order with it.
    pub fn weighted_he4(l: usize) -> Self {
        assert!(l >= 2);
        Self::new(l, 1, LinkKind::SeparableHermite, |z, out| {
            out[0] = 4.0 / 3.0 + hermite_poly(4, z[0]) + 2.0 * hermite_poly(4, z[1]);
        })
    }

    /// Separable product `g(z) = Π_i He_{k_i}(z_i)`.
    pub fn hermite_product(orders: Vec<usize>) -> Self {
        let l = orders.len();
        Self::new(l, 1, LinkKind::SeparableHermite, move |z, out| {
            out[0] = orders
                .iter()
                .zip(z)
                .map(|(&k, &zi)| hermite_poly(k, zi))
                .product();
        })
    }

    /// Attention-shaped target `g(s) = R[softmax_rows(s·sᵀ)]`.
    pub fn attention_target(l: usize, reduction: ReductionMap) -> Self {
        let k = reduction.out_dim(l);
        Self::new(l, k, LinkKind::SoftmaxAttentionTarget, move |z, out| {
            forward_from_field(z, None, &reduction, out);
        })
    }

    /// The two-token positional/semantic mixture: a convex combination of a
    /// semantic attention matrix and a fixed positional block,
    /// `(1-ω)·softmax(z*z*ᵀ) + ω·softmax([[a²,-a²],[-a²,a²]])`, flattened
    /// row-major to `R⁴`.
    pub fn positional_semantic(omega: f64, a: f64) -> Self {
        let a2 = a * a;
        let scores = [a2, -a2, -a2, a2];
        let mut pos = [0.0; 4];
        softmax_rows(&scores, 2, &mut pos);
        let reduction = ReductionMap::FullMatrix;
        Self::new(2, 4, LinkKind::PositionalSemantic, move |z, out| {
            forward_from_field(z, None, &reduction, out);
            for (o, p) in out.iter_mut().zip(&pos) {
                *o = (1.0 - omega) * *o + omega * p;
            }
        })
    }
}

// ---------------------------------------------------------------------------
// Declarative target catalog
// ---------------------------------------------------------------------------

/// Serializable description of a target; experiment configs name targets
/// through this and build the [`LinkFunction`] at run time.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetKind {
    /// `Σ_i He_k(z_i)`
    SumHermite { order: usize },
    /// `Σ_i z_i / √L`
    NormalizedSum,
    /// `z_1 - z_2`: leading coefficient contracts to zero against ones.
    PathologicalSign,
    /// `z_1² - z_2²`: same degeneracy one order up.
    PathologicalSquare,
    /// `4/3 + He_4(z_1) + 2·He_4(z_2)`
    WeightedHe4,
    /// `Π_i He_{k_i}(z_i)`
    HermiteProduct { orders: Vec<usize> },
    /// `(Σ_i z_i/√L)²`: the linear-attention observable; the tied network
    /// with a square activation interpolates it exactly at full overlap.
    SquaredSum,
    /// `Tr softmax(s·sᵀ)`
    AttentionTrace,
    /// Positional/semantic mixture with weights `ω` and alignment `a`.
    PositionalSemantic { omega: f64, a: f64 },
}

impl TargetKind {
    pub fn link(&self, l: usize) -> Result<LinkFunction> {
        Ok(match self {
            TargetKind::SumHermite { order } => LinkFunction::sum_hermite(l, *order),
            TargetKind::NormalizedSum => LinkFunction::normalized_sum(l),
            TargetKind::PathologicalSign => LinkFunction::pathological_sign(l),
            TargetKind::PathologicalSquare => LinkFunction::pathological_square(l),
            TargetKind::WeightedHe4 => LinkFunction::weighted_he4(l),
            TargetKind::HermiteProduct { orders } => {
                if orders.len() != l {
                    return Err(Error::ShapeMismatch(
                        "hermite-product: orders length must equal L".into(),
                    ));
                }
                LinkFunction::hermite_product(orders.clone())
            }
            TargetKind::SquaredSum => {
                let scale = 1.0 / (l as f64).sqrt();
                LinkFunction::new(l, 1, LinkKind::SeparableHermite, move |z, out| {
                    let s = z.iter().sum::<f64>() * scale;
                    out[0] = s * s;
                })
            }
            TargetKind::AttentionTrace => LinkFunction::attention_target(l, ReductionMap::Trace),
            TargetKind::PositionalSemantic { omega, a } => {
                if l != 2 {
                    return Err(Error::InvalidArgument(
                        "positional-semantic target needs L = 2".into(),
                    ));
                }
                LinkFunction::positional_semantic(*omega, *a)
            }
        })
    }

    /// Hermite expansion of the (scalar) target, used by the learning-rate
    /// policies. Separable targets take the odeco route; the rest go through
    /// dense quadrature.
    pub fn expansion(
        &self,
        l: usize,
        k_max: usize,
        n_quad: usize,
    ) -> Result<crate::hermite::HermiteExpansion> {
        use crate::hermite::{separable_expansion, scalar_expansion, hermite_poly as he};
        match self {
            TargetKind::SumHermite { order } => {
                let k = *order;
                let part = move |x: f64| he(k, x);
                let refs: Vec<&dyn Fn(f64) -> f64> = (0..l).map(|_| &part as _).collect();
                separable_expansion(&refs, k_max, n_quad)
            }
            TargetKind::NormalizedSum => {
                let scale = 1.0 / (l as f64).sqrt();
                let part = move |x: f64| x * scale;
                let refs: Vec<&dyn Fn(f64) -> f64> = (0..l).map(|_| &part as _).collect();
                separable_expansion(&refs, k_max, n_quad)
            }
            TargetKind::PathologicalSign => {
                let plus = |x: f64| x;
                let minus = |x: f64| -x;
                let zero = |_: f64| 0.0;
                let mut refs: Vec<&dyn Fn(f64) -> f64> = vec![&plus, &minus];
                for _ in 2..l {
                    refs.push(&zero);
                }
                separable_expansion(&refs, k_max, n_quad)
            }
            TargetKind::PathologicalSquare => {
                let plus = |x: f64| x * x;
                let minus = |x: f64| -x * x;
                let zero = |_: f64| 0.0;
                let mut refs: Vec<&dyn Fn(f64) -> f64> = vec![&plus, &minus];
                for _ in 2..l {
                    refs.push(&zero);
                }
                separable_expansion(&refs, k_max, n_quad)
            }
            TargetKind::WeightedHe4 => {
                let first = |x: f64| 4.0 / 3.0 + he(4, x);
                let second = |x: f64| 2.0 * he(4, x);
                let zero = |_: f64| 0.0;
                let mut refs: Vec<&dyn Fn(f64) -> f64> = vec![&first, &second];
                for _ in 2..l {
                    refs.push(&zero);
                }
                separable_expansion(&refs, k_max, n_quad)
            }
            TargetKind::HermiteProduct { orders } => {
                let orders = orders.clone();
                let g = move |z: &[f64]| {
                    orders
                        .iter()
                        .zip(z)
                        .map(|(&k, &zi)| he(k, zi))
                        .product::<f64>()
                };
                scalar_expansion(&g, l, k_max, n_quad.min(13))
            }
            TargetKind::SquaredSum => {
                let scale = 1.0 / (l as f64).sqrt();
                let g = move |z: &[f64]| {
                    let s = z.iter().sum::<f64>() * scale;
                    s * s
                };
                scalar_expansion(&g, l, k_max, n_quad.min(13))
            }
            TargetKind::AttentionTrace => {
                let red = ReductionMap::Trace;
                let g = move |z: &[f64]| {
                    let mut out = [0.0];
                    forward_from_field(z, None, &red, &mut out);
                    out[0]
                };
                scalar_expansion(&g, l, k_max, n_quad.min(13))
            }
            TargetKind::PositionalSemantic { .. } => Err(Error::InvalidArgument(
                "positional-semantic target is matrix-valued; no scalar expansion".into(),
            )),
        }
    }
}
