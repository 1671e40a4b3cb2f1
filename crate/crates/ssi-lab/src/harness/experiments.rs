//! Experiment drivers: deterministic parallel sweeps over independent runs,
//! aggregation and emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::harness::config::{
    ExperimentSpec, GainSpec, LandscapeSpec, OdeSpec, PhaseSpec, SgdRunSpec, SieSpec,
};
use crate::harness::emit::{emit_table, fmt_f64, fmt_opt, Table};
use crate::harness::records::{derive_seed, spec_hash, RecordStore, RunRecord};
use crate::hermite::{sequence_information_exponent, Sie};
use crate::landscape::{classify_phase, transition_omega, ClassifyOptions, LossSurface};
use crate::linalg::linear_fit;
use crate::models::{LayoutKind, TargetKind};
use crate::sgd::{
    learning_rate, run_sgd, LearningRatePolicy, ModelVariant, ReductionKind, SgdConfig, StopRule,
    Trajectory,
};
use crate::{Error, Result};

/// Result of an experiment: emitted files plus a human-readable summary.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub files: Vec<PathBuf>,
    pub summary: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl ExperimentOutput {
    fn new() -> Self {
        Self {
            files: Vec::new(),
            summary: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.summary.push((key.to_string(), value.to_string()));
    }
}

/// Run an experiment end to end: resolve, sweep (resuming from any
/// persisted records), aggregate and emit. The resolved spec is mirrored
/// into the output directory for provenance.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path, workers: usize) -> Result<ExperimentOutput> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("resolved_config.toml"), spec.to_toml()?)?;
    if workers > 0 {
        // a dedicated pool keeps the global one untouched; ignore failure if
        // one was installed already
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    match spec {
        ExperimentSpec::Sie(s) => run_sie(spec, s, out_dir),
        ExperimentSpec::Landscape(s) => run_landscape(spec, s, out_dir),
        ExperimentSpec::SgdRun(s) => run_sgd_runs(spec, s, out_dir),
        ExperimentSpec::Gain(s) => run_gain(spec, s, out_dir),
        ExperimentSpec::Phase(s) => run_phase(spec, s, out_dir),
        ExperimentSpec::Ode(s) => run_ode(spec, s, out_dir),
    }
}

/// Sweep `total` independent jobs with resume: finished records are loaded
/// from the store and only missing indices run. Job results are keyed by
/// index, so aggregation is order-independent and worker-count independent.
fn sweep<F>(
    store: &RecordStore,
    hash: &str,
    base_seed: u64,
    total: u64,
    job: F,
) -> Result<BTreeMap<u64, RunRecord>>
where
    F: Fn(u64, u64) -> Result<RunRecord> + Sync,
{
    let mut records = store.load_existing()?;
    let todo: Vec<u64> = (0..total).filter(|i| !records.contains_key(i)).collect();
    let fresh: Vec<RunRecord> = todo
        .par_iter()
        .map(|&index| {
            let seed = derive_seed(base_seed, index);
            let started = Instant::now();
            let mut rec = job(index, seed)?;
            rec.spec_hash = hash.to_string();
            rec.run_index = index;
            rec.seed = seed;
            rec.wall_clock_secs = started.elapsed().as_secs_f64();
            store.write(&rec)?;
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    for rec in fresh {
        records.insert(rec.run_index, rec);
    }
    Ok(records)
}

fn blank_record() -> RunRecord {
    RunRecord {
        spec_hash: String::new(),
        run_index: 0,
        seed: 0,
        scalars: BTreeMap::new(),
        label: None,
        trajectory_file: None,
        wall_clock_secs: 0.0,
    }
}

/// Resolve a policy to a step size, computing the target expansion only
/// when the policy actually needs the leading tensor.
pub fn resolve_gamma(policy: &LearningRatePolicy, target: &TargetKind, l: usize) -> Result<f64> {
    match policy {
        LearningRatePolicy::Constant { gamma0 } => Ok(*gamma0),
        LearningRatePolicy::OverScaledUntied { gamma0 } => Ok(gamma0 * l as f64),
        _ => {
            let expansion = target.expansion(l, 8, 24)?;
            learning_rate(policy, &expansion, l)
        }
    }
}

fn policy_label(p: &LearningRatePolicy) -> String {
    match p {
        LearningRatePolicy::Constant { gamma0 } => format!("constant({gamma0})"),
        LearningRatePolicy::OptimalTied { base } => format!("optimal-tied({base})"),
        LearningRatePolicy::OptimalUntied { base } => format!("optimal-untied({base})"),
        LearningRatePolicy::OverScaledUntied { gamma0 } => format!("over-scaled({gamma0}·L)"),
    }
}

// ---------------------------------------------------------------------------
// sie
// ---------------------------------------------------------------------------

fn run_sie(spec: &ExperimentSpec, s: &SieSpec, out_dir: &Path) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new();
    let expansion = s.target.expansion(s.l, s.k_max, s.n_quad)?;
    let sie = sequence_information_exponent(&expansion, s.tol);

    let mut table = Table::new(
        "sie_coefficients",
        &["order", "max_abs_entry", "frobenius_norm", "contract_ones", "op_norm"],
    );
    for (k, tensor) in expansion.coefficients() {
        table.push_row(vec![
            k.to_string(),
            fmt_f64(tensor.max_abs_entry()),
            fmt_f64(tensor.frobenius_sq().sqrt()),
            fmt_f64(tensor.contract_all_ones()),
            fmt_f64(tensor.operator_norm()),
        ]);
    }
    out.files.push(emit_table(&table, out_dir, s.format)?);
    match sie {
        Sie::Order(k) => out.note("sie", k),
        Sie::BeyondTruncation => out.note("sie", "beyond-truncation"),
    }
    out.note("residual_norm", fmt_f64(expansion.residual_norm()));
    Ok(hash_note(spec, out)?)
}

fn hash_note(spec: &ExperimentSpec, mut out: ExperimentOutput) -> Result<ExperimentOutput> {
    out.note("spec_hash", spec_hash(spec)?);
    Ok(out)
}

// ---------------------------------------------------------------------------
// landscape
// ---------------------------------------------------------------------------

fn run_landscape(spec: &ExperimentSpec, s: &LandscapeSpec, out_dir: &Path) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new();
    let surface = LossSurface::new(s.surface.clone())?;
    let grid = surface.sample_polar_grid(s.n_r, s.n_theta)?;
    let mut table = Table::new("landscape", &["e", "m", "loss"]);
    for (e, m, loss) in &grid {
        table.push_row(vec![fmt_f64(*e), fmt_f64(*m), fmt_f64(*loss)]);
    }
    out.files.push(emit_table(&table, out_dir, s.format)?);

    let g = crate::landscape::origin_gradient(&surface)?;
    let h = crate::landscape::origin_hessian(&surface)?;
    out.note("origin_gradient", format!("[{}, {}]", fmt_f64(g[0]), fmt_f64(g[1])));
    out.note(
        "origin_hessian",
        format!(
            "[[{}, {}], [{}, {}]]",
            fmt_f64(h[0][0]),
            fmt_f64(h[0][1]),
            fmt_f64(h[1][0]),
            fmt_f64(h[1][1])
        ),
    );
    let best = grid
        .iter()
        .min_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
        .expect("non-empty grid");
    out.note("min_loss", fmt_f64(best.2));
    out.note("min_point", format!("({}, {})", fmt_f64(best.0), fmt_f64(best.1)));
    Ok(hash_note(spec, out)?)
}

// ---------------------------------------------------------------------------
// sgd-run
// ---------------------------------------------------------------------------

fn run_sgd_runs(spec: &ExperimentSpec, s: &SgdRunSpec, out_dir: &Path) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new();
    let hash = spec_hash(spec)?;
    let store = RecordStore::open(out_dir, &hash)?;
    let gamma = resolve_gamma(&s.policy, &s.target, s.l)?;
    let traj_dir = out_dir.join("trajectories");
    std::fs::create_dir_all(&traj_dir)?;

    let records = sweep(&store, &hash, s.base_seed, s.replicas, |index, seed| {
        let cfg = SgdConfig {
            d: s.d,
            l: s.l,
            model: s.model.clone(),
            target: s.target.clone(),
            gamma,
            sign_randomized: s.sign_randomized,
            t_max: s.t_max,
            eta: s.eta,
            stride: s.stride,
            stop: s.stop,
            seed,
        };
        let traj = run_sgd(&cfg)?;
        let traj_file = format!("trajectories/{hash}_traj{index:06}.csv");
        write_trajectory_csv(&out_dir.join(&traj_file), &traj)?;
        let mut rec = blank_record();
        rec.trajectory_file = Some(traj_file);
        rec.scalars.insert(
            "tau_weak".into(),
            traj.recovery_step.map(|t| t as f64).unwrap_or(f64::NAN),
        );
        rec.scalars
            .insert("final_m".into(), traj.final_stats.m_signed());
        rec.scalars
            .insert("final_e_norm".into(), traj.final_stats.e_norm());
        rec.scalars
            .insert("final_norm".into(), traj.final_stats.recovery_norm());
        rec.scalars.insert("steps".into(), traj.steps_run as f64);
        rec.scalars.insert("gamma_signed".into(), traj.gamma_signed);
        Ok(rec)
    })?;
    store.check_references(&records)?;

    let mut table = Table::new(
        "sgd_runs",
        &["run", "seed", "tau_weak", "final_m", "final_e_norm", "final_norm", "steps", "gamma"],
    );
    for (idx, rec) in &records {
        table.push_row(vec![
            idx.to_string(),
            rec.seed.to_string(),
            fmt_f64(rec.scalars["tau_weak"]),
            fmt_f64(rec.scalars["final_m"]),
            fmt_f64(rec.scalars["final_e_norm"]),
            fmt_f64(rec.scalars["final_norm"]),
            fmt_f64(rec.scalars["steps"]),
            fmt_f64(rec.scalars["gamma_signed"]),
        ]);
    }
    out.files.push(emit_table(&table, out_dir, s.format)?);
    let recovered = records
        .values()
        .filter(|r| r.scalars["tau_weak"].is_finite())
        .count();
    out.note("gamma", fmt_f64(gamma));
    out.note("recovered", format!("{recovered}/{}", records.len()));
    Ok(hash_note(spec, out)?)
}

fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    wtr.write_record(["step", "loss", "m", "e_norm", "recovery_norm"])
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    for p in &traj.points {
        wtr.write_record([
            p.step.to_string(),
            fmt_f64(p.loss),
            fmt_f64(p.stats.m_signed()),
            fmt_f64(p.stats.e_norm()),
            fmt_f64(p.stats.recovery_norm()),
        ])
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// gain
// ---------------------------------------------------------------------------

fn run_gain(spec: &ExperimentSpec, s: &GainSpec, out_dir: &Path) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new();
    let hash = spec_hash(spec)?;
    let store = RecordStore::open(out_dir, &hash)?;

    // resolve step sizes per sequence length up front
    let mut gammas = Vec::with_capacity(s.ls.len());
    for &l in &s.ls {
        let tied = resolve_gamma(&s.tied_policy, &s.target, l)?;
        let untied = resolve_gamma(&s.untied_policy, &s.target, l)?;
        gammas.push((tied, untied));
    }

    let per_l = 2 * s.replicas;
    let total = s.ls.len() as u64 * per_l;
    let records = sweep(&store, &hash, s.base_seed, total, |index, seed| {
        let li = (index / per_l) as usize;
        let rem = index % per_l;
        let untied = rem >= s.replicas;
        let l = s.ls[li];
        let (g_tied, g_untied) = gammas[li];
        let cfg = SgdConfig {
            d: s.d,
            l,
            model: if untied {
                ModelVariant::UntiedNetwork {
                    activation: s.activation.clone(),
                }
            } else {
                ModelVariant::TiedNetwork {
                    activation: s.activation.clone(),
                }
            },
            target: s.target.clone(),
            gamma: if untied { g_untied } else { g_tied },
            sign_randomized: false,
            t_max: s.t_max,
            eta: s.eta,
            stride: None,
            stop: StopRule::AtRecovery,
            seed,
        };
        let traj = run_sgd(&cfg)?;
        let mut rec = blank_record();
        rec.label = Some(if untied { "untied".into() } else { "tied".into() });
        rec.scalars.insert("l".into(), l as f64);
        rec.scalars.insert(
            "tau_weak".into(),
            traj.recovery_step.map(|t| t as f64).unwrap_or(f64::NAN),
        );
        Ok(rec)
    })?;

    // aggregate medians per (L, model)
    let policy = format!(
        "{}|{}",
        policy_label(&s.tied_policy),
        policy_label(&s.untied_policy)
    );
    let mut table = Table::new("gain", &["L", "tau_tied", "tau_untied", "gain", "policy"]);
    let mut log_l = Vec::new();
    let mut log_gain = Vec::new();
    for (li, &l) in s.ls.iter().enumerate() {
        let collect = |untied: bool| -> Vec<f64> {
            (0..s.replicas)
                .filter_map(|rep| {
                    let index = li as u64 * per_l + if untied { s.replicas + rep } else { rep };
                    records.get(&index).map(|r| r.scalars["tau_weak"])
                })
                .filter(|t| t.is_finite())
                .collect()
        };
        let taus_tied = collect(false);
        let taus_untied = collect(true);
        let censored_tied = s.replicas as usize - taus_tied.len();
        let censored_untied = s.replicas as usize - taus_untied.len();
        if censored_tied > 0 || censored_untied > 0 {
            out.warnings.push(format!(
                "L={l}: censored {censored_tied} tied and {censored_untied} untied replicas (excluded from medians)"
            ));
        }
        if taus_tied.is_empty() || taus_untied.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "gain: L={l} is fully censored; the scaling fit is aborted"
            )));
        }
        let mt = median(&taus_tied);
        let mu = median(&taus_untied);
        let gain = mu / mt;
        table.push_row(vec![
            l.to_string(),
            fmt_f64(mt),
            fmt_f64(mu),
            fmt_f64(gain),
            policy.clone(),
        ]);
        log_l.push((l as f64).ln());
        log_gain.push(gain.ln());
    }
    out.files.push(emit_table(&table, out_dir, s.format)?);

    if log_l.len() >= 2 {
        let fit = linear_fit(&log_l, &log_gain)?;
        out.note("slope", fmt_f64(fit.slope));
        out.note("slope_stderr", fmt_f64(fit.slope_stderr));
        out.note("r_squared", fmt_f64(fit.r_squared));
    }
    Ok(hash_note(spec, out)?)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ---------------------------------------------------------------------------
// phase
// ---------------------------------------------------------------------------

fn run_phase(spec: &ExperimentSpec, s: &PhaseSpec, out_dir: &Path) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new();
    let hash = spec_hash(spec)?;
    let store = RecordStore::open(out_dir, &hash)?;
    let opts = ClassifyOptions::default();

    // SGD sweep over the omega grid
    let total = s.omegas.len() as u64 * s.replicas;
    let records = sweep(&store, &hash, s.base_seed, total, |index, seed| {
        let oi = (index / s.replicas) as usize;
        let omega = s.omegas[oi];
        let cfg = SgdConfig {
            d: s.d,
            l: 2,
            model: ModelVariant::Attention {
                layout: LayoutKind::AntisymmetricPair,
                reduction: ReductionKind::FullMatrix,
                injected: None,
            },
            target: TargetKind::PositionalSemantic { omega, a: s.a },
            gamma: s.gamma,
            sign_randomized: false,
            t_max: s.t_max,
            eta: s.eta,
            stride: None,
            stop: StopRule::AtNorm(0.92),
            seed,
        };
        let traj = run_sgd(&cfg)?;
        let mut rec = blank_record();
        rec.scalars.insert("omega".into(), omega);
        rec.scalars
            .insert("final_m".into(), traj.final_stats.m_signed());
        rec.scalars
            .insert("final_norm".into(), traj.final_stats.recovery_norm());
        Ok(rec)
    })?;

    let mut table = Table::new("phase", &["omega", "a", "label", "p_semantic", "n_runs"]);
    let mut curve: Vec<(f64, f64)> = Vec::new();
    for (oi, &omega) in s.omegas.iter().enumerate() {
        let finals: Vec<(f64, f64)> = (0..s.replicas)
            .filter_map(|rep| records.get(&(oi as u64 * s.replicas + rep)))
            .map(|r| (r.scalars["final_m"], r.scalars["final_norm"]))
            .collect();
        let valid: Vec<f64> = finals
            .iter()
            .filter(|(_, norm)| *norm >= 0.9)
            .map(|(m, _)| *m)
            .collect();
        let diverged = finals.len() - valid.len();
        if diverged > 0 {
            out.warnings.push(format!(
                "omega={omega}: {diverged} replicas never reached full alignment (excluded)"
            ));
        }
        let p_semantic = if valid.is_empty() {
            None
        } else {
            Some(valid.iter().filter(|m| m.abs() > 0.9).count() as f64 / valid.len() as f64)
        };
        let classification = classify_phase(omega, s.a, &opts)?;
        table.push_row(vec![
            fmt_f64(omega),
            fmt_f64(s.a),
            classification.label.to_string(),
            fmt_opt(p_semantic),
            valid.len().to_string(),
        ]);
        if let Some(p) = p_semantic {
            curve.push((omega, p));
        }
    }
    out.files.push(emit_table(&table, out_dir, s.format)?);

    // classifier-only grid over the unit square, when requested
    if let Some([n_omega, n_a]) = s.classifier_grid {
        let mut grid = Table::new(
            "phase_classifier",
            &["omega", "a", "label", "p_semantic", "n_runs"],
        );
        let cells: Vec<(f64, f64)> = (0..n_omega)
            .flat_map(|i| {
                (0..n_a).map(move |j| {
                    (
                        i as f64 / (n_omega - 1).max(1) as f64,
                        j as f64 / (n_a - 1).max(1) as f64,
                    )
                })
            })
            .collect();
        let labels: Vec<String> = cells
            .par_iter()
            .map(|(omega, a)| {
                classify_phase(*omega, *a, &opts).map(|c| c.label.to_string())
            })
            .collect::<Result<_>>()?;
        for ((omega, a), label) in cells.iter().zip(labels) {
            grid.push_row(vec![
                fmt_f64(*omega),
                fmt_f64(*a),
                label,
                String::new(),
                "0".into(),
            ]);
        }
        out.files.push(emit_table(&grid, out_dir, s.format)?);
    }

    if let Some(crossing) = crossing_half(&curve) {
        out.note("empirical_crossing", fmt_f64(crossing));
    }
    match transition_omega(s.a, 19, 1e-3) {
        Ok(t) => out.note("transition_omega", fmt_f64(t)),
        Err(e) => out.warnings.push(format!("transition_omega: {e}")),
    }
    Ok(hash_note(spec, out)?)
}

/// First downward crossing of 1/2 in the probability curve, linearly
/// interpolated.
fn crossing_half(curve: &[(f64, f64)]) -> Option<f64> {
    for win in curve.windows(2) {
        let (x0, p0) = win[0];
        let (x1, p1) = win[1];
        if (p0 - 0.5) * (p1 - 0.5) <= 0.0 && p0 != p1 {
            return Some(x0 + (0.5 - p0) / (p1 - p0) * (x1 - x0));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// ode
// ---------------------------------------------------------------------------

fn run_ode(spec: &ExperimentSpec, s: &OdeSpec, out_dir: &Path) -> Result<ExperimentOutput> {
    use crate::flow::{integrate_flow, DriftSource, FlowResult, FlowSpec, GammaCorrection};

    let mut out = ExperimentOutput::new();
    let expansion = s.target.expansion(s.l, s.k_max, 24)?;
    let sigma_coeffs = s.activation.hermite_coeffs(s.k_max);
    let contractions: Vec<f64> = (0..=s.k_max)
        .map(|k| {
            expansion
                .coefficient(k)
                .map(|c| c.contract_all_ones())
                .unwrap_or(0.0)
        })
        .collect();

    let correction = match s.gamma {
        None => None,
        Some(gamma) => {
            let per_d = match s.grad_norm_per_d {
                Some(v) => v,
                None => {
                    let d_ref = *s.ds.first().expect("validated non-empty");
                    let gspec = crate::flow::GradNormSpec {
                        d: d_ref,
                        l: s.l,
                        model: if s.untied {
                            ModelVariant::UntiedNetwork {
                                activation: s.activation.clone(),
                            }
                        } else {
                            ModelVariant::TiedNetwork {
                                activation: s.activation.clone(),
                            }
                        },
                        target: s.target.clone(),
                    };
                    crate::flow::grad_norm_term(&gspec, &[], 0.0, 400, s.base_seed)? / d_ref as f64
                }
            };
            Some(GammaCorrection::new(gamma, per_d))
        }
    };

    let mut table = Table::new(
        "ode_hitting",
        &["d", "m0", "hitting_time", "sgd_steps_equivalent"],
    );
    let mut first_path: Option<FlowResult> = None;
    let mut log_d = Vec::new();
    let mut taus = Vec::new();
    for &d in &s.ds {
        let m0 = 1.0 / (d as f64).sqrt();
        let drift = if s.untied {
            DriftSource::UntiedSeries {
                sigma_coeffs: sigma_coeffs.clone(),
                expansion: s.target.expansion(s.l, s.k_max, 24)?,
            }
        } else {
            DriftSource::TiedSeries {
                sigma_coeffs: sigma_coeffs.clone(),
                contractions: contractions.clone(),
            }
        };
        let flow = FlowSpec {
            drift,
            gamma_correction: correction,
            initial: if s.untied {
                vec![m0; s.l]
            } else {
                vec![m0]
            },
            dt: s.dt,
            horizon: s.horizon,
            eta: s.eta,
            path_stride: None,
        };
        let res = integrate_flow(&flow)?;
        let steps = match (res.hitting_time, s.gamma) {
            (Some(t), Some(g)) => Some(FlowResult::sgd_steps_equivalent(t, g, d)),
            _ => None,
        };
        table.push_row(vec![
            d.to_string(),
            fmt_f64(m0),
            fmt_opt(res.hitting_time),
            fmt_opt(steps),
        ]);
        if let Some(t) = res.hitting_time {
            log_d.push((d as f64).ln());
            taus.push(t);
        }
        if first_path.is_none() {
            first_path = Some(res);
        }
    }
    out.files.push(emit_table(&table, out_dir, s.format)?);

    if let Some(res) = first_path {
        let mut path = Table::new("ode_path", &["t", "overlap_norm"]);
        for (t, state) in &res.path {
            let norm = state.iter().map(|x| x * x).sum::<f64>().sqrt();
            path.push_row(vec![fmt_f64(*t), fmt_f64(norm)]);
        }
        out.files.push(emit_table(&path, out_dir, s.format)?);
    }
    if log_d.len() >= 2 {
        let fit = linear_fit(&log_d, &taus)?;
        out.note("log_fit_slope", fmt_f64(fit.slope));
        out.note("log_fit_intercept", fmt_f64(fit.intercept));
        out.note("log_fit_r_squared", fmt_f64(fit.r_squared));
    }
    Ok(hash_note(spec, out)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd_sets() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn crossing_interpolates_linearly() {
        let curve = vec![(0.4, 1.0), (0.6, 0.75), (0.7, 0.25), (0.8, 0.0)];
        let c = crossing_half(&curve).unwrap();
        assert!((c - 0.65).abs() < 1e-12);
        assert!(crossing_half(&[(0.1, 0.9), (0.2, 0.8)]).is_none());
    }
}
