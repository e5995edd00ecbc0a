use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use geomech::analysis::{
    classify_field, klein_gordon_residual, laplacian_identity_residual, schrodinger_residual, trajectory_consistency, AnalysisError,
    CandidateField, ConsistencyReport, FieldClassification, KleinGordonTerms, ResidualReport,
};
use geomech::dynamics::{drift_report, integrate, IntegrateError, IntegratorConfig, Termination};
use geomech::geometry::{preset_components, Chart, GeometryError, PRESETS};
use geomech::mechanics::{MechanicsError, State, TimeConstrained, WorkForm};
use geomech::sampling::StateSampler;
use serde::Serialize;

use crate::output::{json_bytes, trajectory_csv, write_atomic};
use crate::scenario::{self, Resolved, ValidationError};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_VERIFICATION: u8 = 4;

/// A command that could not produce its result.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn validation(e: impl fmt::Display) -> Self {
        Self { code: EXIT_VALIDATION, message: e.to_string() }
    }

    pub fn numerical(e: impl fmt::Display) -> Self {
        Self { code: EXIT_NUMERICAL, message: e.to_string() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: EXIT_USAGE, message: format!("cannot write {}: {e}", path.display()) }
    }
}

impl From<ValidationError> for Failure {
    fn from(e: ValidationError) -> Self {
        Failure::validation(e)
    }
}

fn is_input_problem(e: &GeometryError) -> bool {
    !matches!(e, GeometryError::Domain(_) | GeometryError::Degenerate { .. } | GeometryError::OutsideDomain { .. })
}

impl From<MechanicsError> for Failure {
    fn from(e: MechanicsError) -> Self {
        match &e {
            MechanicsError::Geometry(g) if !is_input_problem(g) => Failure::numerical(e),
            MechanicsError::DegenerateTimeForm { .. } => Failure::numerical(e),
            _ => Failure::validation(e),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Mechanics(m) => m.into(),
            AnalysisError::Integrate(IntegrateError::InvalidInitialState(m)) => m.into(),
            other => Failure::validation(other),
        }
    }
}

/// `Ok(true)` means every check passed.
pub type Outcome = Result<bool, Failure>;

fn load(path: &Path) -> Result<(scenario::Scenario, Resolved), Failure> {
    let s = scenario::load(path)?;
    let r = s.resolve()?;
    Ok((s, r))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => write_atomic(path, bytes).map_err(|e| Failure::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(|e| Failure::io(Path::new("<stdout>"), e))
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Failure> {
    emit(out, &json_bytes(value))
}

fn candidate(r: &Resolved) -> Result<&CandidateField, Failure> {
    r.candidate.as_ref().ok_or_else(|| Failure::validation("candidate_field: required by this command"))
}

fn check_all_skipped(evaluated: usize, skipped: usize) -> Result<(), Failure> {
    if evaluated == 0 && skipped > 0 {
        return Err(Failure::numerical(format!("evaluation failed at all {skipped} sample points")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub t_end: f64,
    pub stride: Option<f64>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub time_constrained: bool,
}

#[derive(Serialize)]
struct MonitorDrift {
    name: String,
    initial: f64,
    max_drift: f64,
    argmax_time: f64,
}

#[derive(Serialize)]
struct SimulateSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<String>,
    integrator: IntegratorConfig,
    time_constrained: bool,
    t_start: f64,
    t_end: f64,
    termination: Termination,
    /// Last time with a good state; equals `t_end` on completion.
    last_time: f64,
    samples: usize,
    steps: usize,
    rejected_steps: usize,
    final_state: State,
    drift: Vec<MonitorDrift>,
}

pub fn simulate(path: &Path, opts: &SimulateOptions) -> Outcome {
    let (s, r) = load(path)?;
    let s0 = r.initial.clone().ok_or_else(|| Failure::validation("initial: required by simulate"))?;
    if opts.time_constrained && r.system.time_form().is_none() {
        return Err(Failure::validation("time_form: required by --time-constrained"));
    }
    if !opts.t_end.is_finite() {
        return Err(Failure::validation("--t-end: must be finite"));
    }
    let mut config = r.integrator.clone();
    if let Some(stride) = opts.stride {
        config = config.with_stride(stride);
    }
    let traj = integrate(&r.system, &s0, (0.0, opts.t_end), &config, &r.monitors, opts.time_constrained).map_err(|e| match e {
        IntegrateError::InvalidInitialState(m) => Failure::from(m),
        other => Failure::validation(other),
    })?;

    let drift = r
        .monitors
        .iter()
        .map(|m| {
            let d = drift_report(&traj, m.name()).expect("monitor recorded");
            MonitorDrift { name: m.name().to_string(), initial: d.initial, max_drift: d.max_drift, argmax_time: d.argmax_time }
        })
        .collect();
    let summary = SimulateSummary {
        scenario: s.name.clone(),
        integrator: config,
        time_constrained: opts.time_constrained,
        t_start: 0.0,
        t_end: opts.t_end,
        termination: traj.termination.clone(),
        last_time: traj.last_time(),
        samples: traj.times.len(),
        steps: traj.steps,
        rejected_steps: traj.rejected_steps,
        final_state: traj.final_state().clone(),
        drift,
    };

    let csv = trajectory_csv(&r.chart, &traj);
    emit(opts.out.as_deref(), &csv)?;
    let summary_bytes = json_bytes(&summary);
    match (&opts.summary, &opts.out) {
        (Some(p), _) => emit(Some(p), &summary_bytes)?,
        (None, Some(_)) => emit(None, &summary_bytes)?,
        // stdout already carries the CSV
        (None, None) => {
            let _ = std::io::stderr().write_all(&summary_bytes);
        }
    }
    if traj.termination.is_failure() {
        return Err(Failure::numerical(format!(
            "integration stopped at t = {}: {}",
            traj.last_time(),
            serde_json::to_string(&traj.termination).expect("serializable")
        )));
    }
    Ok(true)
}

#[derive(Serialize)]
struct ClassifyReport {
    work_form: &'static str,
    conservative: bool,
    relativistic: bool,
    max_alpha_dot: f64,
    sample_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<State>,
}

pub fn classify(path: &Path, out: Option<&Path>) -> Outcome {
    let (_, r) = load(path)?;
    let sampler = StateSampler { count: r.samples.count, seed: r.samples.seed, speed: 1.0 };
    let report = r.system.classify_relativistic(&sampler)?;
    emit_json(
        out,
        &ClassifyReport {
            work_form: r.system.work_form().name(),
            conservative: r.system.work_form().is_conservative(),
            relativistic: report.relativistic,
            max_alpha_dot: report.max_alpha_dot,
            sample_count: report.sample_count,
            witness: report.witness,
        },
    )?;
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Check {
    IntermediateIntegral,
    Lagrangian,
    DivergenceFree,
    HjConstant,
    TrajectoryConsistency,
}

impl Check {
    pub const FIELD: [Check; 4] = [Check::IntermediateIntegral, Check::Lagrangian, Check::DivergenceFree, Check::HjConstant];
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub tolerance: f64,
    pub checks: Vec<Check>,
    /// Extra starts taken from the head of the sample set.
    pub consistency_starts: usize,
    pub consistency_t_end: f64,
    pub consistency_tolerance: f64,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct VerifyReport {
    #[serde(flatten)]
    classification: FieldClassification,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory_consistency: Option<ConsistencyReport>,
    requested: Vec<Check>,
    failed: Vec<Check>,
    pass: bool,
}

pub fn verify_field(path: &Path, opts: &VerifyOptions) -> Outcome {
    let (_, r) = load(path)?;
    let u = candidate(&r)?;
    if !(opts.tolerance > 0.0) {
        return Err(Failure::validation("--tolerance: must be positive"));
    }
    let points = r.sample_points();
    let classification = classify_field(&r.system, u, &points, opts.tolerance)?;
    check_all_skipped(classification.sample_count - classification.skipped, classification.skipped)?;

    let mut starts: Vec<Vec<f64>> = r.initial.iter().map(|s| s.x.clone()).collect();
    starts.extend(points.iter().take(opts.consistency_starts).cloned());
    let wants_consistency = opts.checks.is_empty() || opts.checks.contains(&Check::TrajectoryConsistency);
    let consistency = if wants_consistency && !starts.is_empty() {
        Some(trajectory_consistency(&r.system, u, &starts, opts.consistency_t_end, &r.integrator, opts.consistency_tolerance)?)
    } else {
        None
    };

    let mut requested: Vec<Check> = if opts.checks.is_empty() { Check::FIELD.to_vec() } else { opts.checks.clone() };
    if opts.checks.is_empty() && consistency.is_some() {
        requested.push(Check::TrajectoryConsistency);
    }
    let passed = |c: &Check| match c {
        Check::IntermediateIntegral => classification.intermediate_integral,
        Check::Lagrangian => classification.lagrangian,
        Check::DivergenceFree => classification.divergence_free,
        Check::HjConstant => classification.hj_constant,
        Check::TrajectoryConsistency => consistency.as_ref().is_some_and(|c| c.verdict),
    };
    let failed: Vec<Check> = requested.iter().copied().filter(|c| !passed(c)).collect();
    let pass = failed.is_empty();
    emit_json(opts.out.as_deref(), &VerifyReport { classification, trajectory_consistency: consistency, requested, failed, pass })?;
    Ok(pass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualKind {
    Schrodinger,
    KleinGordon,
    LaplacianIdentity,
}

#[derive(Debug, Clone)]
pub struct ResidualOptions {
    pub tolerance: f64,
    pub per_point: bool,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct PointResidual {
    point: Vec<f64>,
    components: Vec<f64>,
    magnitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    terms: Option<KleinGordonTerms>,
}

#[derive(Serialize)]
struct ResidualOutput {
    kind: ResidualKind,
    max_residual: f64,
    tolerance: f64,
    verdict: bool,
    sub_residuals: serde_json::Value,
    sample_count: usize,
    skipped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_point: Option<Vec<PointResidual>>,
}

fn per_point(report: &ResidualReport, terms: Option<&[KleinGordonTerms]>) -> Vec<PointResidual> {
    report
        .entries
        .iter()
        .enumerate()
        .map(|(k, e)| PointResidual {
            point: e.point.clone(),
            components: e.components.clone(),
            magnitude: e.magnitude,
            terms: terms.map(|t| t[k].clone()),
        })
        .collect()
}

pub fn residual(kind: ResidualKind, path: &Path, opts: &ResidualOptions) -> Outcome {
    let (_, r) = load(path)?;
    if !(opts.tolerance > 0.0) {
        return Err(Failure::validation("--tolerance: must be positive"));
    }
    let u = candidate(&r)?;
    let (phase, h) = u
        .phase()
        .ok_or_else(|| Failure::validation("candidate_field.type: a phase candidate (gradient_phase or lorentz_phase) is required"))?;
    let metric = r.system.metric();
    let points = r.sample_points();
    let (report, verdict, sub, terms) = match kind {
        ResidualKind::Schrodinger => {
            let potential = match r.system.work_form() {
                WorkForm::Zero => None,
                WorkForm::Potential(v) => Some(v),
                other => {
                    return Err(Failure::validation(format!(
                        "work_form.type: schrodinger needs zero or potential, found `{}`",
                        other.name()
                    )))
                }
            };
            let energy = r.energy.ok_or_else(|| Failure::validation("constants.E: required by the schrodinger residual"))?;
            let rep = schrodinger_residual(metric, potential, phase, h, energy, &points, opts.tolerance)?;
            let sub = serde_json::json!({
                "harmonicity": rep.harmonicity.max,
                "energy": rep.energy.max,
                "hj_spread": rep.hj_spread,
            });
            let verdict = rep.residual.verdict;
            (rep.residual, verdict, sub, None)
        }
        ResidualKind::KleinGordon => {
            let potential = u.potential().or(match r.system.work_form() {
                WorkForm::Electromagnetic { potential, .. } => potential.as_ref(),
                _ => None,
            });
            let rep = klein_gordon_residual(metric, potential, phase, h, r.m2, &points, opts.tolerance)?;
            let worst = rep.residual.entries.iter().enumerate().max_by(|a, b| a.1.magnitude.total_cmp(&b.1.magnitude)).map(|(k, _)| k);
            let sub = serde_json::json!({
                "divergence": rep.divergence.max,
                "norm_deviation": rep.norm_deviation.max,
                "m2": rep.m2,
                "m2_derived": rep.m2_derived,
                "terms_at_max": worst.map(|k| rep.terms[k].clone()),
            });
            (rep.residual, rep.verdict, sub, Some(rep.terms))
        }
        ResidualKind::LaplacianIdentity => {
            let rep = laplacian_identity_residual(phase, metric, &points, opts.tolerance)?;
            let verdict = rep.verdict;
            (rep, verdict, serde_json::json!({}), None)
        }
    };
    check_all_skipped(report.entries.len(), report.skipped.len())?;
    let output = ResidualOutput {
        kind,
        max_residual: report.max,
        tolerance: opts.tolerance,
        verdict,
        sub_residuals: sub,
        sample_count: points.len(),
        skipped: report.skipped.len(),
        per_point: opts.per_point.then(|| per_point(&report, terms.as_deref())),
    };
    emit_json(opts.out.as_deref(), &output)?;
    Ok(verdict)
}

/// `"x1,x2;v1,v2"`
pub fn parse_state(text: &str, n: usize) -> Result<State, ValidationError> {
    let bad = |msg: String| ValidationError::new("--at", msg);
    let parts: Vec<&str> = text.split(';').collect();
    if parts.len() != 2 {
        return Err(bad(format!("expected `x1,..,xn;v1,..,vn`, found `{text}`")));
    }
    let mut halves = Vec::with_capacity(2);
    for (part, what) in parts.iter().zip(["position", "velocity"]) {
        let values = part
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("invalid {what} entry `{}`", s.trim()))))
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != n {
            return Err(bad(format!("{what} needs {n} entries, found {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("{what} entries must be finite")));
        }
        halves.push(values);
    }
    let v = halves.pop().expect("two halves");
    let x = halves.pop().expect("two halves");
    Ok(State::new(x, v))
}

#[derive(Serialize)]
struct DeriveReport {
    state: State,
    metric: Vec<Vec<f64>>,
    /// `gamma[k][i][j] = Γ^k_ij`
    gamma: Vec<Vec<Vec<f64>>>,
    work_form: Vec<f64>,
    force: Vec<f64>,
    acceleration: Vec<f64>,
    theta_dot: f64,
    kinetic: f64,
    alpha_dot: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hamiltonian: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    time_constraint: Option<TimeConstrained>,
}

pub fn derive(path: &Path, at: &str, out: Option<&Path>) -> Outcome {
    let (_, r) = load(path)?;
    let s = parse_state(at, r.chart.dimension())?;
    r.chart.check_point(&s.x).map_err(|e| Failure::validation(format!("--at: {e}")))?;
    let sys = &r.system;
    let e = sys.evaluate(&s)?;
    let n = s.x.len();
    let report = DeriveReport {
        metric: (0..n).map(|i| (0..n).map(|j| e.metric.g(i, j)).collect()).collect(),
        gamma: e.christoffel.to_nested(),
        work_form: e.work_form,
        force: e.force,
        acceleration: e.acceleration,
        theta_dot: sys.theta_dot(&s)?,
        kinetic: sys.kinetic_energy(&s)?,
        alpha_dot: sys.alpha_dot(&s)?,
        hamiltonian: if sys.work_form().is_conservative() { Some(sys.hamiltonian(&s)?) } else { None },
        time_constraint: if sys.time_form().is_some() { Some(sys.time_constrained(&s)?) } else { None },
        state: s,
    };
    emit_json(out, &report)?;
    Ok(true)
}

#[derive(Serialize)]
struct CatalogEntry {
    name: &'static str,
    /// `None` for presets defined in every dimension.
    dimension: Option<usize>,
    description: &'static str,
    coords: Vec<String>,
    components: Vec<Vec<String>>,
}

/// Presets written over `q1..qn`; dimension-free presets use `dimension`.
pub fn catalog(dimension: usize, out: Option<&Path>) -> Outcome {
    let entries: Vec<CatalogEntry> = PRESETS
        .iter()
        .filter_map(|p| {
            let n = p.dimension.unwrap_or(dimension);
            let components = preset_components(p.name, n)?;
            let chart = Chart::numbered(n);
            let components =
                components.iter().map(|row| row.iter().map(|c| chart.parse(c).expect("preset parses").to_string()).collect()).collect();
            Some(CatalogEntry {
                name: p.name,
                dimension: p.dimension,
                description: p.description,
                coords: chart.coords().to_vec(),
                components,
            })
        })
        .collect();
    emit_json(out, &entries)?;
    Ok(true)
}

pub fn normalize(path: &Path, out: Option<&Path>) -> Outcome {
    let s = scenario::load(path)?;
    emit_json(out, &s.normalized()?)?;
    Ok(true)
}
