//! Deterministic dynamics of the sufficient statistics: drift series, the
//! gradient-norm correction, RK4 integration and hitting times.
//!
//! For a tied model with activation expansion `c_k(σ)` learning a target
//! with Hermite tensors `C_k(g)`, the semantic overlap follows
//!
//! ```text
//! dm/dt = φ_tied(m) - (γ/2)·Γ̂(m)·m,
//! φ_tied(m) = 2(1-m²)·Σ_k k·k!·c_k(σ)·[C_k(g)×(1,…,1)]·m^{k-1}/L^{k/2}
//! ```
//!
//! in rescaled time `t = τ·γ/d` (each SGD step advances the flow by `γ/d`).
//! The `k!/L^{k/2}` factor comes from the cross-moment identity
//! `E[σ(u)·g(z*)] = Σ_k k!·c_k(σ)·C_k(g)×(v,…,v)` with `v = (m/√L)·1`, and
//! is pinned by the identity `φ_tied = -(1-m²)·∂_m R̂(m)` against the
//! quadrature population risk (see the drift/landscape consistency test).
//! `Γ̂` is the expected squared spherical gradient per unit of `d`; one-pass
//! SGD tracks the flow until `γ` is large enough that the correction term
//! dominates the drift at the origin, which is the trapping threshold. The
//! untied overlap vector follows the componentwise analogue with the
//! one-slot contraction `C_k × (I, 𝐦, …, 𝐦)`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::hermite::HermiteExpansion;
use crate::models::{TargetFrame, TargetKind, WeightState};
use crate::sgd::{ModelVariant, RunModel, WeightGrad};
use crate::{Error, Result};

/// Tied drift `φ_tied(m) = 2(1-m²)·Σ_k k·k!·c_k·A_k·m^{k-1}/L^{k/2}` where
/// `A_k` is the all-ones contraction of the order-`k` target tensor and `L`
/// the sequence length. Series truncated at the shorter coefficient list.
/// Satisfies `φ_tied(m) = -(1-m²)·∂_m R̂(m)` for the tied-network population
/// risk.
pub fn drift_tied(m: f64, sigma_coeffs: &[f64], contractions: &[f64], seq_len: usize) -> f64 {
    let k_max = sigma_coeffs.len().min(contractions.len()).saturating_sub(1);
    let l = seq_len as f64;
    let mut series = 0.0;
    let mut m_pow = 1.0; // m^{k-1} starting at k = 1
    let mut fact = 1.0; // k!
    let mut l_pow = l.sqrt(); // L^{k/2}
    for k in 1..=k_max {
        fact *= k as f64;
        series += k as f64 * fact * sigma_coeffs[k] * contractions[k] * m_pow / l_pow;
        m_pow *= m;
        l_pow *= l.sqrt();
    }
    2.0 * (1.0 - m * m) * series
}

/// Untied drift: componentwise
/// `φ_i(𝐦) = 2(1-m_i²)·Σ_k k·k!·c_k·[C_k×(I,𝐦,…,𝐦)]_i/L^{k/2}`, the
/// one-slot analogue of [`drift_tied`].
pub fn drift_untied(m: &[f64], sigma_coeffs: &[f64], expansion: &HermiteExpansion) -> Vec<f64> {
    let l = m.len();
    let lf = l as f64;
    let mut series = vec![0.0; l];
    for (k, c) in expansion.coefficients() {
        let k = *k;
        if k == 0 || k >= sigma_coeffs.len() {
            continue;
        }
        let ck = sigma_coeffs[k];
        if ck == 0.0 {
            continue;
        }
        let mut fact = 1.0;
        for j in 2..=k {
            fact *= j as f64;
        }
        let scale = k as f64 * fact * ck / lf.powf(k as f64 / 2.0);
        let slot = c.contract_one_slot(m);
        for i in 0..l {
            series[i] += scale * slot[i];
        }
    }
    (0..l)
        .map(|i| 2.0 * (1.0 - m[i] * m[i]) * series[i])
        .collect()
}

// ---------------------------------------------------------------------------
// Gradient-norm term
// ---------------------------------------------------------------------------

/// Model/target pair for gradient-norm measurements.
#[derive(Debug, Clone)]
pub struct GradNormSpec {
    pub d: usize,
    pub l: usize,
    pub model: ModelVariant,
    pub target: TargetKind,
}

/// Monte Carlo estimate of `E[‖∇⊥ℓ‖²]` at fixed sufficient statistics,
/// measured in unit-sphere weight coordinates, where it scales linearly
/// with `d`. The flow correction consumes `Γ̂ = estimate/d`.
///
/// A concrete weight vector is synthesized at the requested overlap point
/// (`w = m·w* + Σ_i e_i·√d·P_i + residual`), then fresh samples estimate the
/// squared spherical gradient. Deterministic given the seed.
pub fn grad_norm_term(
    spec: &GradNormSpec,
    e: &[f64],
    m: f64,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    if n_mc == 0 {
        return Err(Error::InvalidArgument("grad_norm_term: n_mc >= 1".into()));
    }
    let norm_sq = m * m + e.iter().map(|x| x * x).sum::<f64>();
    if norm_sq > 1.0 + 1e-9 {
        return Err(Error::InvalidArgument(
            "grad_norm_term: point outside the unit ball".into(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let layout_kind = match &spec.model {
        ModelVariant::Attention { layout, .. } => *layout,
        _ => crate::models::LayoutKind::None,
    };
    let frame = TargetFrame::sample(spec.l, spec.d, layout_kind, &mut rng)?;
    if e.len() != frame.layout.frame_dim() {
        return Err(Error::ShapeMismatch(
            "grad_norm_term: e length vs layout frame".into(),
        ));
    }
    let model = RunModel::new(&spec.model, &frame)?;
    let link = spec.target.link(spec.l)?;
    let d = spec.d;

    let state = match &spec.model {
        ModelVariant::UntiedNetwork { .. } => {
            // symmetric rows, all at overlap m
            let row = synth_weight(&frame, e, m, &mut rng);
            let mut wm = ndarray::Array2::zeros((spec.l, d));
            for i in 0..spec.l {
                wm.row_mut(i).assign(&row);
            }
            WeightState::Untied(wm)
        }
        _ => WeightState::Tied(synth_weight(&frame, e, m, &mut rng)),
    };

    let mut y = vec![0.0; link.out_dim()];
    let mut acc = 0.0;
    for _ in 0..n_mc {
        let x = crate::models::sample_sequence(spec.l, d, &mut rng);
        link.ssi_target(&frame.w_star, &x, &mut y)?;
        let (_, grad) = model.loss_and_grad(&state, &x, &y)?;
        let sq = match (&state, &grad) {
            (WeightState::Tied(w), WeightGrad::Tied(g)) => {
                let radial = w.dot(g) / (d as f64);
                let mut sq = 0.0;
                for i in 0..d {
                    let perp = g[i] - radial * w[i];
                    sq += perp * perp;
                }
                sq
            }
            (WeightState::Untied(wm), WeightGrad::Untied(gm)) => {
                let mut sq = 0.0;
                for r in 0..wm.nrows() {
                    let w = wm.row(r);
                    let g = gm.row(r);
                    let radial = w.dot(&g) / (d as f64);
                    for i in 0..d {
                        let perp = g[i] - radial * w[i];
                        sq += perp * perp;
                    }
                }
                sq
            }
            _ => unreachable!("state and gradient shapes agree by construction"),
        };
        if !sq.is_finite() {
            return Err(Error::NonFinite("grad_norm_term sample".into()));
        }
        acc += sq;
    }
    // unit-sphere coordinates: ∇ w.r.t. w/√d carries a factor √d
    Ok(acc / n_mc as f64 * d as f64)
}

/// `w = m·w* + Σ_i e_i·√d·P_i + √(1-‖(e,m)‖²)·√d·u` with `u` a fresh unit
/// direction orthogonal to the frame.
fn synth_weight<R: rand::Rng>(
    frame: &TargetFrame,
    e: &[f64],
    m: f64,
    rng: &mut R,
) -> ndarray::Array1<f64> {
    use crate::models::PositionalLayout;
    let d = frame.d;
    let sqrt_d = (d as f64).sqrt();
    let mut w = &frame.w_star * m;
    match &frame.layout {
        PositionalLayout::None => {}
        PositionalLayout::Orthonormal(p) => {
            for (i, &ei) in e.iter().enumerate() {
                w.scaled_add(ei * sqrt_d, &p.row(i));
            }
        }
        PositionalLayout::AntisymmetricPair(p) => {
            if let Some(&e0) = e.first() {
                w.scaled_add(e0 * sqrt_d, p);
            }
        }
    }
    let norm_sq = m * m + e.iter().map(|x| x * x).sum::<f64>();
    let resid = (1.0 - norm_sq).max(0.0).sqrt();
    if resid > 1e-12 {
        // orthogonalize a fresh direction against the frame and w*
        let mut u = ndarray::Array1::from_shape_fn(d, |_| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let unit_star = &frame.w_star / sqrt_d;
        let proj = u.dot(&unit_star);
        u.scaled_add(-proj, &unit_star);
        match &frame.layout {
            PositionalLayout::None => {}
            PositionalLayout::Orthonormal(p) => {
                for i in 0..p.nrows() {
                    let proj = u.dot(&p.row(i));
                    u.scaled_add(-proj, &p.row(i));
                }
            }
            PositionalLayout::AntisymmetricPair(p) => {
                let proj = u.dot(p);
                u.scaled_add(-proj, p);
            }
        }
        let un = u.dot(&u).sqrt();
        w.scaled_add(resid * sqrt_d / un, &u);
    }
    w
}

// ---------------------------------------------------------------------------
// Flow integration
// ---------------------------------------------------------------------------

/// Drift source of the flow.
pub enum DriftSource {
    /// Scalar overlap `m` with the tied series drift.
    TiedSeries {
        sigma_coeffs: Vec<f64>,
        contractions: Vec<f64>,
        seq_len: usize,
    },
    /// Overlap vector `𝐦` with the untied series drift.
    UntiedSeries {
        sigma_coeffs: Vec<f64>,
        expansion: HermiteExpansion,
    },
    /// Projected finite-difference gradient of a loss surface over `(e, m)`,
    /// `ρ̇ = -(I - ρρᵀ)·∇R(ρ)`.
    QuadratureGradient {
        surface: crate::landscape::LossSurface,
        fd_step: f64,
    },
}

impl DriftSource {
    fn state_dim(&self) -> usize {
        match self {
            DriftSource::TiedSeries { .. } => 1,
            DriftSource::UntiedSeries { expansion, .. } => expansion.dim(),
            DriftSource::QuadratureGradient { .. } => 2,
        }
    }

    /// Norm against which the hitting threshold is compared. Untied flows
    /// hit at `‖𝐦‖ ≥ η·√L`, equivalent to the compacted `m_untied ≥ η`.
    fn threshold_scale(&self) -> f64 {
        match self {
            DriftSource::UntiedSeries { expansion, .. } => (expansion.dim() as f64).sqrt(),
            _ => 1.0,
        }
    }

    fn eval(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            DriftSource::TiedSeries {
                sigma_coeffs,
                contractions,
                seq_len,
            } => {
                out[0] = drift_tied(state[0], sigma_coeffs, contractions, *seq_len);
                Ok(())
            }
            DriftSource::UntiedSeries {
                sigma_coeffs,
                expansion,
            } => {
                let v = drift_untied(state, sigma_coeffs, expansion);
                out.copy_from_slice(&v);
                Ok(())
            }
            DriftSource::QuadratureGradient { surface, fd_step } => {
                let h = *fd_step;
                let e = state[0];
                let m = state[1];
                let de = (surface.population_loss(e + h, m)?
                    - surface.population_loss(e - h, m)?)
                    / (2.0 * h);
                let dm = (surface.population_loss(e, m + h)?
                    - surface.population_loss(e, m - h)?)
                    / (2.0 * h);
                // spherical projection: remove the radial component
                let radial = e * de + m * dm;
                out[0] = -(de - radial * e);
                out[1] = -(dm - radial * m);
                Ok(())
            }
        }
    }
}

/// Optional order-γ correction `-(coefficient·γ)·Γ̂·state`.
#[derive(Debug, Clone, Copy)]
pub struct GammaCorrection {
    pub gamma: f64,
    /// `Γ̂ = E[‖∇⊥ℓ‖²]/d`, the per-unit-dimension gradient norm.
    pub grad_norm_per_d: f64,
    /// Coefficient on `γ`; 1/2 is the order-2 expansion value and the
    /// default, exposed because the constant is absorbable into `γ`.
    pub coefficient: f64,
}

impl GammaCorrection {
    pub fn new(gamma: f64, grad_norm_per_d: f64) -> Self {
        Self {
            gamma,
            grad_norm_per_d,
            coefficient: 0.5,
        }
    }
}

/// Flow problem description.
pub struct FlowSpec {
    pub drift: DriftSource,
    pub gamma_correction: Option<GammaCorrection>,
    pub initial: Vec<f64>,
    /// RK4 step in rescaled time; 1e-3 is the default.
    pub dt: f64,
    pub horizon: f64,
    pub eta: f64,
    /// Keep every n-th point of the path; `None` targets ~4000 points.
    pub path_stride: Option<usize>,
}

/// Integration outcome.
#[derive(Debug, Clone)]
pub struct FlowResult {
    /// `(t, state)` samples, including the initial and final points.
    pub path: Vec<(f64, Vec<f64>)>,
    /// First time the threshold norm reaches `η` (linearly interpolated
    /// within the crossing step).
    pub hitting_time: Option<f64>,
    /// Whether the state ever had to be clipped back into the unit ball.
    pub clipped: bool,
}

impl FlowResult {
    /// SGD step count equivalent to a flow time: `τ = t·d/γ`.
    pub fn sgd_steps_equivalent(t: f64, gamma: f64, d: usize) -> f64 {
        t * d as f64 / gamma
    }
}

/// Classical fixed-step RK4 on the chosen drift. Integration stops at the
/// first threshold crossing or at the horizon; the path stays inside the
/// closed unit ball (componentwise for overlap coordinates), with any
/// clipping flagged.
pub fn integrate_flow(spec: &FlowSpec) -> Result<FlowResult> {
    if !(spec.dt > 0.0) {
        return Err(Error::InvalidArgument("integrate_flow: dt must be > 0".into()));
    }
    let dim = spec.drift.state_dim();
    if spec.initial.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "integrate_flow: initial state has dim {}, drift needs {dim}",
            spec.initial.len()
        )));
    }
    let init_norm: f64 = spec.initial.iter().map(|x| x * x).sum::<f64>().sqrt();
    if init_norm > 1.0 + 1e-9 {
        return Err(Error::InvalidArgument(
            "integrate_flow: initial point outside the closed unit ball".into(),
        ));
    }
    let n_steps = (spec.horizon / spec.dt).ceil() as usize;
    let stride = spec
        .path_stride
        .unwrap_or_else(|| (n_steps / 4000).max(1));
    let threshold = spec.eta * spec.drift.threshold_scale();

    let mut state = spec.initial.clone();
    let mut path = vec![(0.0, state.clone())];
    let mut clipped = false;
    let mut hitting_time = None;
    let mut prev_norm = norm(&state);
    if prev_norm >= threshold {
        return Ok(FlowResult {
            path,
            hitting_time: Some(0.0),
            clipped,
        });
    }

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    for step in 0..n_steps {
        let t = step as f64 * spec.dt;
        let dt = spec.dt;

        self_drift(&spec.drift, &spec.gamma_correction, &state, &mut k1)?;
        for i in 0..dim {
            tmp[i] = state[i] + 0.5 * dt * k1[i];
        }
        self_drift(&spec.drift, &spec.gamma_correction, &tmp, &mut k2)?;
        for i in 0..dim {
            tmp[i] = state[i] + 0.5 * dt * k2[i];
        }
        self_drift(&spec.drift, &spec.gamma_correction, &tmp, &mut k3)?;
        for i in 0..dim {
            tmp[i] = state[i] + dt * k3[i];
        }
        self_drift(&spec.drift, &spec.gamma_correction, &tmp, &mut k4)?;
        for i in 0..dim {
            state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        // stay in the closed unit ball
        let mut n = norm(&state);
        if n > 1.0 {
            for s in state.iter_mut() {
                *s /= n;
            }
            n = 1.0;
            clipped = true;
        }

        let t_next = t + dt;
        if (step + 1) % stride == 0 || step + 1 == n_steps {
            path.push((t_next, state.clone()));
        }
        if n >= threshold {
            // linear interpolation inside the crossing step
            let frac = if n > prev_norm {
                ((threshold - prev_norm) / (n - prev_norm)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            hitting_time = Some(t + frac * dt);
            if path.last().map(|(pt, _)| *pt) != Some(t_next) {
                path.push((t_next, state.clone()));
            }
            break;
        }
        prev_norm = n;
    }

    Ok(FlowResult {
        path,
        hitting_time,
        clipped,
    })
}

fn self_drift(
    drift: &DriftSource,
    correction: &Option<GammaCorrection>,
    state: &[f64],
    out: &mut [f64],
) -> Result<()> {
    drift.eval(state, out)?;
    if let Some(c) = correction {
        let factor = c.coefficient * c.gamma * c.grad_norm_per_d;
        for (o, s) in out.iter_mut().zip(state) {
            *o -= factor * s;
        }
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::Activation;

    #[test]
    fn drift_vanishes_at_the_boundary() {
        let sig = Activation::Square.hermite_coeffs(4);
        let contractions = vec![0.0, 0.0, 2.0, 0.0, 0.0];
        assert_eq!(drift_tied(1.0, &sig, &contractions), 0.0);
        assert_eq!(drift_tied(-1.0, &sig, &contractions), 0.0);
    }

    #[test]
    fn single_term_first_order_drift() {
        // only k = 1 with c_1·A_1 = A: drift = 2A(1-m²)
        let sig = vec![0.0, 1.0];
        let contractions = vec![0.0, 0.7];
        for m in [-0.5, 0.0, 0.3] {
            let expect = 2.0 * 0.7 * (1.0 - m * m);
            assert!((drift_tied(m, &sig, &contractions) - expect).abs() < 1e-14);
        }
        assert!((drift_tied(0.0, &sig, &contractions) - 1.4).abs() < 1e-14);
    }

    #[test]
    fn he2_sum_square_activation_drift() {
        // g = Σ He_2, σ = x² (c_2 = 1): drift = 4·L·m·(1-m²)
        let l = 3.0;
        let sig = Activation::Square.hermite_coeffs(4);
        let contractions = vec![0.0, 0.0, l, 0.0, 0.0];
        for m in [0.1, 0.4, -0.6] {
            let expect = 4.0 * l * m * (1.0 - m * m);
            assert!((drift_tied(m, &sig, &contractions) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn untied_drift_at_origin_is_first_order_term() {
        // k=1 only: φ(0) = 2·c_1·C_1 componentwise
        let target = TargetKind::PathologicalSign;
        let exp = target.expansion(2, 3, 16).unwrap();
        let sig = Activation::Identity.hermite_coeffs(3);
        let v = drift_untied(&[0.0, 0.0], &sig, &exp);
        assert!((v[0] - 2.0).abs() < 1e-10);
        assert!((v[1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn untied_drift_decouples_for_identity_tensor() {
        let target = TargetKind::SumHermite { order: 2 };
        let exp = target.expansion(3, 3, 16).unwrap();
        let sig = Activation::Square.hermite_coeffs(3);
        let m = [0.2, 0.0, -0.4];
        let v = drift_untied(&m, &sig, &exp);
        for i in 0..3 {
            let expect = 2.0 * (1.0 - m[i] * m[i]) * 2.0 * m[i];
            assert!((v[i] - expect).abs() < 1e-10, "component {i}: {}", v[i]);
        }
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn untied_drift_is_permutation_equivariant_for_exchangeable_targets() {
        let target = TargetKind::SumHermite { order: 2 };
        let exp = target.expansion(3, 3, 16).unwrap();
        let sig = Activation::Relu.hermite_coeffs(3);
        let v = drift_untied(&[0.3, 0.3, 0.3], &sig, &exp);
        assert!((v[0] - v[1]).abs() < 1e-12);
        assert!((v[1] - v[2]).abs() < 1e-12);
    }

    #[test]
    fn zero_drift_never_hits() {
        let spec = FlowSpec {
            drift: DriftSource::TiedSeries {
                sigma_coeffs: vec![0.0],
                contractions: vec![0.0],
            },
            gamma_correction: None,
            initial: vec![0.05],
            dt: 1e-3,
            horizon: 5.0,
            eta: 0.3,
            path_stride: None,
        };
        let res = integrate_flow(&spec).unwrap();
        assert!(res.hitting_time.is_none());
        for (_, s) in &res.path {
            assert_eq!(s[0], 0.05);
        }
    }

    #[test]
    fn first_order_hitting_matches_separable_solution() {
        // dm/dt = 2A(1-m²) solves to m(t) = tanh(2At + atanh m0):
        // t_hit = (atanh η - atanh m0)/(2A).
        let a = 0.35;
        let m0 = 0.02;
        let eta = 0.3;
        let spec = FlowSpec {
            drift: DriftSource::TiedSeries {
                sigma_coeffs: vec![0.0, 1.0],
                contractions: vec![0.0, a],
            },
            gamma_correction: None,
            initial: vec![m0],
            dt: 1e-3,
            horizon: 10.0,
            eta,
            path_stride: None,
        };
        let res = integrate_flow(&spec).unwrap();
        let exact = (eta.atanh() - m0.atanh()) / (2.0 * a);
        let t = res.hitting_time.unwrap();
        assert!(
            (t - exact).abs() < 0.05 * exact,
            "rk4 {t} vs exact {exact}"
        );
    }

    #[test]
    fn sie2_hitting_time_scales_with_log_d() {
        // dm/dt = A·m(1-m²) from m0 = 1/√d: t_hit ≈ ln(η√d)/A, linear in ln d.
        let sig = Activation::Square.hermite_coeffs(2);
        let contractions = vec![0.0, 0.0, 2.0];
        let mut ts = Vec::new();
        let ds = [100.0f64, 1000.0, 10000.0];
        for d in ds {
            let spec = FlowSpec {
                drift: DriftSource::TiedSeries {
                    sigma_coeffs: sig.clone(),
                    contractions: contractions.clone(),
                },
                gamma_correction: None,
                initial: vec![1.0 / d.sqrt()],
                dt: 1e-3,
                horizon: 50.0,
                eta: 0.3,
                path_stride: None,
            };
            ts.push(integrate_flow(&spec).unwrap().hitting_time.unwrap());
        }
        let xs: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
        let fit = crate::linalg::linear_fit(&xs, &ts).unwrap();
        assert!(fit.r_squared > 0.98, "R² = {}", fit.r_squared);
        // doubling-consistency of the log growth to 10%
        let inc1 = ts[1] - ts[0];
        let inc2 = ts[2] - ts[1];
        assert!((inc1 - inc2).abs() < 0.1 * inc1.abs());
    }

    #[test]
    fn stronger_drift_hits_earlier() {
        let mk = |amp: f64| FlowSpec {
            drift: DriftSource::TiedSeries {
                sigma_coeffs: vec![0.0, 1.0],
                contractions: vec![0.0, amp],
            },
            gamma_correction: None,
            initial: vec![0.01],
            dt: 1e-3,
            horizon: 20.0,
            eta: 0.4,
            path_stride: None,
        };
        let slow = integrate_flow(&mk(0.2)).unwrap().hitting_time.unwrap();
        let fast = integrate_flow(&mk(0.5)).unwrap().hitting_time.unwrap();
        assert!(fast < slow);
    }

    #[test]
    fn step_halving_changes_hitting_time_below_half_percent() {
        let mk = |dt: f64| FlowSpec {
            drift: DriftSource::TiedSeries {
                sigma_coeffs: Activation::Square.hermite_coeffs(2),
                contractions: vec![0.0, 0.0, 2.0],
            },
            gamma_correction: None,
            initial: vec![0.01],
            dt,
            horizon: 30.0,
            eta: 0.3,
            path_stride: None,
        };
        let a = integrate_flow(&mk(2e-3)).unwrap().hitting_time.unwrap();
        let b = integrate_flow(&mk(1e-3)).unwrap().hitting_time.unwrap();
        assert!((a - b).abs() / b < 0.005, "dt {a} vs dt/2 {b}");
    }

    #[test]
    fn large_gamma_correction_traps_the_flow() {
        // drift slope at the origin is A = 2·2·c_2·A_2·... here 4·L with
        // L=1 scale; trapping once coeff·γ·Γ̂ exceeds it.
        let contractions = vec![0.0, 0.0, 1.0];
        let sig = Activation::Square.hermite_coeffs(2);
        let slope = 4.0; // d(drift)/dm at 0 = 2·2·c_2·A_2
        let grad_norm = 10.0;
        let gamma_crit = slope / (0.5 * grad_norm);
        let mk = |gamma: f64| FlowSpec {
            drift: DriftSource::TiedSeries {
                sigma_coeffs: sig.clone(),
                contractions: contractions.clone(),
            },
            gamma_correction: Some(GammaCorrection::new(gamma, grad_norm)),
            initial: vec![0.03],
            dt: 1e-3,
            horizon: 20.0,
            eta: 0.3,
            path_stride: None,
        };
        let trapped = integrate_flow(&mk(2.0 * gamma_crit)).unwrap();
        assert!(trapped.hitting_time.is_none());
        // the overlap must have decayed, not grown
        let last = trapped.path.last().unwrap().1[0];
        assert!(last < 0.03);
        let escaping = integrate_flow(&mk(0.25 * gamma_crit)).unwrap();
        assert!(escaping.hitting_time.is_some());
    }

    #[test]
    fn untied_threshold_uses_sqrt_l_scale() {
        // decoupled logistic growth on two rows; hitting needs ‖𝐦‖ = η√2,
        // equivalent to m_untied = η
        let target = TargetKind::SumHermite { order: 2 };
        let exp = target.expansion(2, 3, 16).unwrap();
        let spec = FlowSpec {
            drift: DriftSource::UntiedSeries {
                sigma_coeffs: Activation::Square.hermite_coeffs(3),
                expansion: exp,
            },
            gamma_correction: None,
            initial: vec![0.02, 0.02],
            dt: 1e-3,
            horizon: 20.0,
            eta: 0.3,
            path_stride: None,
        };
        let res = integrate_flow(&spec).unwrap();
        let t = res.hitting_time.unwrap();
        // symmetric rows: each must reach η, so ‖𝐦‖ = η√2 exactly when m_i = η
        let expect = {
            // dm/dt = 4m(1-m²) from 0.02 to 0.3
            let a: f64 = 4.0;
            // separable solution for logistic-type growth
            let f = |m: f64| (m / (1.0 - m * m).sqrt()).ln();
            (f(0.3) - f(0.02)) / a
        };
        assert!((t - expect).abs() < 0.02 * expect, "{t} vs {expect}");
    }

    #[test]
    fn grad_norm_scales_linearly_in_d() {
        let mut per_d = Vec::new();
        for d in [200usize, 400, 800] {
            let spec = GradNormSpec {
                d,
                l: 2,
                model: ModelVariant::TiedNetwork {
                    activation: Activation::Relu,
                },
                target: TargetKind::SumHermite { order: 2 },
            };
            let est = grad_norm_term(&spec, &[], 0.0, 400, 7).unwrap();
            per_d.push(est / d as f64);
        }
        let mean: f64 = per_d.iter().sum::<f64>() / per_d.len() as f64;
        for v in &per_d {
            assert!(
                (v - mean).abs() / mean < 0.25,
                "estimate/d varies too much: {per_d:?}"
            );
        }
    }

    #[test]
    fn grad_norm_zero_at_interpolation() {
        // tied square network at m = 1 reproduces the squared-sum target
        // exactly: zero residual almost surely, zero gradient norm
        let spec = GradNormSpec {
            d: 100,
            l: 2,
            model: ModelVariant::TiedNetwork {
                activation: Activation::Square,
            },
            target: TargetKind::SquaredSum,
        };
        let est = grad_norm_term(&spec, &[], 1.0, 200, 3).unwrap();
        assert!(est.abs() < 1e-20, "estimate {est}");
    }

    #[test]
    fn grad_norm_deterministic_for_fixed_seed() {
        let spec = GradNormSpec {
            d: 150,
            l: 2,
            model: ModelVariant::TiedNetwork {
                activation: Activation::Relu,
            },
            target: TargetKind::SumHermite { order: 2 },
        };
        let a = grad_norm_term(&spec, &[], 0.1, 100, 11).unwrap();
        let b = grad_norm_term(&spec, &[], 0.1, 100, 11).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
