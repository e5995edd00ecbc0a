//! Scenario files: the JSON schema, validation against the core types and
//! normalization.
//!
//! Every validation failure names the JSON path of the offending value.

use std::fmt;
use std::path::Path;

use geomech::analysis::CandidateField;
use geomech::dynamics::{IntegratorConfig, Method, Monitor};
use geomech::exprlang::ParseError;
use geomech::geometry::{Chart, GeometryError, Metric, OneFormField, ScalarField, TwoFormField, VectorField};
use geomech::mechanics::{MechanicalSystem, MechanicsError, State, WorkForm};
use geomech::sampling::{SampleSpec, DEFAULT_SAMPLE_COUNT, DEFAULT_SEED};
use geomech::Expr;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self { path: path.into(), message: message.to_string() }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ValidationError {}

type Result<T> = std::result::Result<T, ValidationError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub chart: ChartSpec,
    pub metric: MetricSpec,
    #[serde(default)]
    pub work_form: WorkFormSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_form: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_field: Option<CandidateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub monitors: Vec<MonitorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<SamplesSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub coords: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Vec<String>>>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkFormSpec {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub V: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub F: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub A: Option<Vec<String>>,
}

impl Default for WorkFormSpec {
    fn default() -> Self {
        Self { kind: "zero".into(), V: None, alpha: None, F: None, A: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<f64>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub A: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub E: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m2: Option<f64>,
}

/// A builtin monitor name or a named phase-space expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MonitorSpec {
    Builtin(String),
    Expression { name: String, expr: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
}

/// Everything a command needs, checked and built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub chart: Chart,
    pub system: MechanicalSystem,
    pub initial: Option<State>,
    pub integrator: IntegratorConfig,
    pub candidate: Option<CandidateField>,
    pub energy: Option<f64>,
    pub m2: Option<f64>,
    pub monitors: Vec<Monitor>,
    pub samples: SampleSpec,
}

impl Resolved {
    pub fn sample_points(&self) -> Vec<Vec<f64>> {
        self.samples.points(&self.chart)
    }
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| ValidationError::new("", format!("cannot read {}: {e}", path.display())))?;
    from_json(&text)
}

pub fn from_json(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        ValidationError::new(path, e.into_inner())
    })
}

fn indexed(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

fn parse_error(path: &str, e: ParseError) -> ValidationError {
    ValidationError::new(path, e)
}

fn parse_list(path: &str, sources: &[String], parse: impl Fn(&str) -> std::result::Result<Expr, ParseError>) -> Result<Vec<Expr>> {
    sources.iter().enumerate().map(|(i, s)| parse(s).map_err(|e| parse_error(&indexed(path, i), e))).collect()
}

fn expect_len(path: &str, what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(ValidationError::new(path, format!("expected {expected} {what}, found {found}")));
    }
    Ok(())
}

fn required<'a, T>(value: &'a Option<T>, path: &str, context: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| ValidationError::new(path, format!("required {context}")))
}

fn forbidden<T>(value: &Option<T>, path: &str, context: &str) -> Result<()> {
    match value {
        Some(_) => Err(ValidationError::new(path, format!("not allowed {context}"))),
        None => Ok(()),
    }
}

fn geometry_error(path: &str, e: GeometryError) -> ValidationError {
    ValidationError::new(path, e)
}

impl Scenario {
    pub fn chart(&self) -> Result<Chart> {
        let chart = Chart::new(self.chart.coords.iter().cloned()).map_err(|e| geometry_error("chart.coords", e))?;
        match &self.chart.bounds {
            Some(b) => chart.with_bounds(b.iter().map(|[lo, hi]| (*lo, *hi)).collect()).map_err(|e| geometry_error("chart.bounds", e)),
            None => Ok(chart),
        }
    }

    fn metric(&self, chart: &Chart) -> Result<Metric> {
        let n = chart.dimension();
        match (&self.metric.preset, &self.metric.components) {
            (Some(_), Some(_)) => Err(ValidationError::new("metric", "give either `preset` or `components`, not both")),
            (None, None) => Err(ValidationError::new("metric", "one of `preset` or `components` is required")),
            (Some(name), None) => Metric::preset(name, chart).map_err(|e| geometry_error("metric.preset", e)),
            (None, Some(rows)) => {
                expect_len("metric.components", "rows", n, rows.len())?;
                let mut exprs = Vec::with_capacity(n);
                for (i, row) in rows.iter().enumerate() {
                    let path = indexed("metric.components", i);
                    expect_len(&path, "columns", n, row.len())?;
                    exprs.push(parse_list(&path, row, |s| chart.parse(s))?);
                }
                Metric::from_matrix(chart, exprs).map_err(|e| geometry_error("metric.components", e))
            }
        }
    }

    fn work_form(&self, chart: &Chart) -> Result<WorkForm> {
        let w = &self.work_form;
        let n = chart.dimension();
        let ctx = format!("for work_form type `{}`", w.kind);
        let pairs = n * (n - 1) / 2;
        match w.kind.as_str() {
            "zero" => {
                forbidden(&w.V, "work_form.V", &ctx)?;
                forbidden(&w.alpha, "work_form.alpha", &ctx)?;
                forbidden(&w.F, "work_form.F", &ctx)?;
                forbidden(&w.A, "work_form.A", &ctx)?;
                Ok(WorkForm::Zero)
            }
            "potential" => {
                let v = required(&w.V, "work_form.V", &ctx)?;
                forbidden(&w.alpha, "work_form.alpha", &ctx)?;
                forbidden(&w.F, "work_form.F", &ctx)?;
                forbidden(&w.A, "work_form.A", &ctx)?;
                let expr = chart.parse(v).map_err(|e| parse_error("work_form.V", e))?;
                Ok(WorkForm::Potential(ScalarField::new(chart, expr).map_err(|e| geometry_error("work_form.V", e))?))
            }
            "general" => {
                let alpha = required(&w.alpha, "work_form.alpha", &ctx)?;
                forbidden(&w.V, "work_form.V", &ctx)?;
                forbidden(&w.F, "work_form.F", &ctx)?;
                forbidden(&w.A, "work_form.A", &ctx)?;
                expect_len("work_form.alpha", "components", n, alpha.len())?;
                Ok(WorkForm::GeneralHorizontal(parse_list("work_form.alpha", alpha, |s| chart.parse_phase(s))?))
            }
            "electromagnetic" => {
                let f = required(&w.F, "work_form.F", &ctx)?;
                forbidden(&w.V, "work_form.V", &ctx)?;
                forbidden(&w.alpha, "work_form.alpha", &ctx)?;
                expect_len("work_form.F", "components (i<j)", pairs, f.len())?;
                let field = TwoFormField::new(chart, parse_list("work_form.F", f, |s| chart.parse(s))?)
                    .map_err(|e| geometry_error("work_form.F", e))?;
                let potential = match &w.A {
                    Some(a) => Some(vector_field(chart, "work_form.A", a)?),
                    None => None,
                };
                Ok(WorkForm::Electromagnetic { field, potential })
            }
            other => Err(ValidationError::new(
                "work_form.type",
                format!("unknown type `{other}`, expected one of zero, potential, general, electromagnetic"),
            )),
        }
    }

    fn system(&self, chart: &Chart) -> Result<MechanicalSystem> {
        let metric = self.metric(chart)?;
        let work = self.work_form(chart)?;
        let sys = MechanicalSystem::new(metric, work).map_err(|e| {
            let path = match &e {
                MechanicsError::PotentialMismatch { .. } => "work_form.A",
                MechanicsError::NotClosed { .. } => "work_form.F",
                _ => "work_form",
            };
            ValidationError::new(path, e)
        })?;
        match &self.time_form {
            None => Ok(sys),
            Some(tau) => {
                expect_len("time_form", "components", chart.dimension(), tau.len())?;
                let tau = OneFormField::new(chart, parse_list("time_form", tau, |s| chart.parse(s))?)
                    .map_err(|e| geometry_error("time_form", e))?;
                sys.with_time_form(tau).map_err(|e| ValidationError::new("time_form", e))
            }
        }
    }

    fn initial(&self, chart: &Chart) -> Result<Option<State>> {
        let Some(init) = &self.initial else { return Ok(None) };
        let n = chart.dimension();
        expect_len("initial.x", "coordinates", n, init.x.len())?;
        expect_len("initial.v", "components", n, init.v.len())?;
        chart.check_point(&init.x).map_err(|e| geometry_error("initial.x", e))?;
        if let Some(i) = init.v.iter().position(|v| !v.is_finite()) {
            return Err(ValidationError::new(indexed("initial.v", i), "must be finite"));
        }
        Ok(Some(State::new(init.x.clone(), init.v.clone())))
    }

    fn integrator(&self) -> Result<IntegratorConfig> {
        let Some(spec) = &self.integrator else { return Ok(IntegratorConfig::default()) };
        let ctx = format!("for method `{}`", spec.method);
        let mut cfg = match spec.method.as_str() {
            "rk4" => {
                forbidden(&spec.rtol, "integrator.rtol", &ctx)?;
                forbidden(&spec.atol, "integrator.atol", &ctx)?;
                let step = *required(&spec.step, "integrator.step", &ctx)?;
                if !(step > 0.0 && step.is_finite()) {
                    return Err(ValidationError::new("integrator.step", "must be positive"));
                }
                IntegratorConfig::rk4(step)
            }
            "rk45" => {
                forbidden(&spec.step, "integrator.step", &ctx)?;
                let defaults = IntegratorConfig::default();
                let Method::Rk45 { rtol, atol } = defaults.method else { unreachable!() };
                let rtol = spec.rtol.unwrap_or(rtol);
                let atol = spec.atol.unwrap_or(atol);
                if !(rtol > 0.0) {
                    return Err(ValidationError::new("integrator.rtol", "must be positive"));
                }
                if !(atol > 0.0) {
                    return Err(ValidationError::new("integrator.atol", "must be positive"));
                }
                IntegratorConfig::rk45(rtol, atol)
            }
            other => return Err(ValidationError::new("integrator.method", format!("unknown method `{other}`, expected rk4 or rk45"))),
        };
        if let Some(m) = spec.max_steps {
            cfg.max_steps = m;
        }
        if let Some(m) = spec.min_step {
            cfg.min_step = m;
        }
        cfg.stride = spec.stride;
        cfg.validate().map_err(|e| ValidationError::new("integrator", e))?;
        Ok(cfg)
    }

    fn candidate(&self, chart: &Chart) -> Result<Option<CandidateField>> {
        let Some(c) = &self.candidate_field else { return Ok(None) };
        let ctx = format!("for candidate_field type `{}`", c.kind);
        let h = c.h.unwrap_or(1.0);
        if !(h > 0.0 && h.is_finite()) {
            return Err(ValidationError::new("candidate_field.h", "must be positive"));
        }
        let phase = |c: &CandidateSpec| -> Result<ScalarField> {
            let f = required(&c.f, "candidate_field.f", &ctx)?;
            let expr = chart.parse(f).map_err(|e| parse_error("candidate_field.f", e))?;
            ScalarField::new(chart, expr).map_err(|e| geometry_error("candidate_field.f", e))
        };
        let field = match c.kind.as_str() {
            "explicit" => {
                forbidden(&c.f, "candidate_field.f", &ctx)?;
                forbidden(&c.A, "candidate_field.A", &ctx)?;
                forbidden(&c.h, "candidate_field.h", &ctx)?;
                let comps = required(&c.components, "candidate_field.components", &ctx)?;
                CandidateField::Explicit(vector_field(chart, "candidate_field.components", comps)?)
            }
            "gradient_phase" => {
                forbidden(&c.components, "candidate_field.components", &ctx)?;
                forbidden(&c.A, "candidate_field.A", &ctx)?;
                CandidateField::gradient_phase(phase(c)?, h).map_err(|e| ValidationError::new("candidate_field", e))?
            }
            "lorentz_phase" => {
                forbidden(&c.components, "candidate_field.components", &ctx)?;
                let a = vector_field(chart, "candidate_field.A", required(&c.A, "candidate_field.A", &ctx)?)?;
                CandidateField::lorentz_phase(phase(c)?, a, h).map_err(|e| ValidationError::new("candidate_field", e))?
            }
            other => {
                return Err(ValidationError::new(
                    "candidate_field.type",
                    format!("unknown type `{other}`, expected one of explicit, gradient_phase, lorentz_phase"),
                ))
            }
        };
        Ok(Some(field))
    }

    fn monitors(&self, chart: &Chart) -> Result<Vec<Monitor>> {
        let mut out: Vec<Monitor> = Vec::with_capacity(self.monitors.len());
        for (i, m) in self.monitors.iter().enumerate() {
            let path = indexed("monitors", i);
            let monitor = match m {
                MonitorSpec::Builtin(name) => Monitor::builtin(name).ok_or_else(|| {
                    ValidationError::new(&path, format!("unknown monitor `{name}`, expected hamiltonian, theta_dot, tau_dot or kinetic"))
                })?,
                MonitorSpec::Expression { name, expr } => {
                    let expr = chart.parse_phase(expr).map_err(|e| parse_error(&format!("{path}.expr"), e))?;
                    Monitor::Expression { name: name.clone(), expr }
                }
            };
            if out.iter().any(|o| o.name() == monitor.name()) {
                return Err(ValidationError::new(path, format!("duplicate monitor `{}`", monitor.name())));
            }
            out.push(monitor);
        }
        Ok(out)
    }

    fn samples(&self, chart: &Chart) -> Result<SampleSpec> {
        let Some(s) = &self.samples else { return Ok(SampleSpec::default()) };
        if let Some(points) = &s.points {
            if points.is_empty() {
                return Err(ValidationError::new("samples.points", "must not be empty"));
            }
            for (i, p) in points.iter().enumerate() {
                let path = indexed("samples.points", i);
                expect_len(&path, "coordinates", chart.dimension(), p.len())?;
                chart.check_point(p).map_err(|e| geometry_error(&path, e))?;
            }
        }
        let count = s.count.unwrap_or(DEFAULT_SAMPLE_COUNT);
        if count == 0 {
            return Err(ValidationError::new("samples.count", "must be at least 1"));
        }
        Ok(SampleSpec { count, seed: s.seed.unwrap_or(DEFAULT_SEED), points: s.points.clone() })
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let chart = self.chart()?;
        let system = self.system(&chart)?;
        let initial = self.initial(&chart)?;
        let integrator = self.integrator()?;
        let candidate = self.candidate(&chart)?;
        let monitors = self.monitors(&chart)?;
        let samples = self.samples(&chart)?;
        let (energy, m2) = match &self.constants {
            Some(c) => (c.E, c.m2),
            None => (None, None),
        };
        for (path, value) in [("constants.E", energy), ("constants.m2", m2)] {
            if value.is_some_and(|v| !v.is_finite()) {
                return Err(ValidationError::new(path, "must be finite"));
            }
        }
        Ok(Resolved { chart, system, initial, integrator, candidate, energy, m2, monitors, samples })
    }

    /// Canonical form: expressions reprinted, defaults made explicit.
    /// Validates first, so a normalized scenario always resolves.
    pub fn normalized(&self) -> Result<Scenario> {
        let resolved = self.resolve()?;
        let chart = &resolved.chart;
        let print_all = |sources: &[String], phase: bool| -> Vec<String> {
            sources.iter().map(|s| if phase { chart.parse_phase(s) } else { chart.parse(s) }.expect("validated").to_string()).collect()
        };
        let mut out = self.clone();
        if let Some(rows) = &self.metric.components {
            out.metric.components = Some(rows.iter().map(|row| print_all(row, false)).collect());
        }
        let w = &mut out.work_form;
        w.V = w.V.as_ref().map(|v| print_all(std::slice::from_ref(v), false).remove(0));
        w.alpha = w.alpha.as_ref().map(|a| print_all(a, true));
        w.F = w.F.as_ref().map(|f| print_all(f, false));
        w.A = w.A.as_ref().map(|a| print_all(a, false));
        out.time_form = self.time_form.as_ref().map(|t| print_all(t, false));
        if let Some(c) = &mut out.candidate_field {
            c.components = c.components.as_ref().map(|u| print_all(u, false));
            c.f = c.f.as_ref().map(|f| print_all(std::slice::from_ref(f), false).remove(0));
            c.A = c.A.as_ref().map(|a| print_all(a, false));
            if c.kind != "explicit" {
                c.h = Some(c.h.unwrap_or(1.0));
            }
        }
        if self.integrator.is_some() {
            let cfg = &resolved.integrator;
            let (step, rtol, atol) = match cfg.method {
                Method::Rk4 { step } => (Some(step), None, None),
                Method::Rk45 { rtol, atol } => (None, Some(rtol), Some(atol)),
            };
            out.integrator = Some(IntegratorSpec {
                method: self.integrator.as_ref().map(|i| i.method.clone()).unwrap_or_default(),
                step,
                rtol,
                atol,
                max_steps: Some(cfg.max_steps),
                min_step: Some(cfg.min_step),
                stride: cfg.stride,
            });
        }
        out.monitors = self
            .monitors
            .iter()
            .map(|m| match m {
                MonitorSpec::Builtin(_) => m.clone(),
                MonitorSpec::Expression { name, expr } => {
                    MonitorSpec::Expression { name: name.clone(), expr: print_all(std::slice::from_ref(expr), true).remove(0) }
                }
            })
            .zip(&resolved.monitors)
            .map(|(spec, m)| match spec {
                MonitorSpec::Builtin(_) => MonitorSpec::Builtin(m.name().to_string()),
                other => other,
            })
            .collect();
        out.samples = Some(SamplesSpec {
            count: Some(resolved.samples.count),
            seed: Some(resolved.samples.seed),
            points: resolved.samples.points.clone(),
        });
        Ok(out)
    }
}

fn vector_field(chart: &Chart, path: &str, sources: &[String]) -> Result<VectorField> {
    expect_len(path, "components", chart.dimension(), sources.len())?;
    VectorField::new(chart, parse_list(path, sources, |s| chart.parse(s))?).map_err(|e| geometry_error(path, e))
}
