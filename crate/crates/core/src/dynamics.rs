//! Integration of the second-order field on the tangent bundle.
//!
//! The state vector is `(x, v)` and the base flow is always `ẋ = v`; only
//! the fiber flow `v̇ = a(x, v)` comes from the system. Output samples land
//! exactly on the requested stride: steps are clipped to hit each sample
//! time rather than interpolated.

use serde::Serialize;
use thiserror::Error;

use crate::exprlang::Expr;
use crate::geometry::GeometryError;
use crate::mechanics::{MechanicalSystem, MechanicsError, State};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Rk4 { step: f64 },
    Rk45 { rtol: f64, atol: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegratorConfig {
    #[serde(flatten)]
    pub method: Method,
    pub max_steps: usize,
    pub min_step: f64,
    /// Output spacing in time; `None` records every step.
    pub stride: Option<f64>,
    /// First trial step for the adaptive method; estimated when `None`.
    pub initial_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self::rk45(1e-10, 1e-12)
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        Self { method: Method::Rk4 { step }, max_steps: 10_000_000, min_step: 1e-12, stride: None, initial_step: None }
    }

    pub fn rk45(rtol: f64, atol: f64) -> Self {
        Self { method: Method::Rk45 { rtol, atol }, ..Self::rk4(0.0) }
    }

    pub fn with_stride(mut self, stride: f64) -> Self {
        self.stride = Some(stride);
        self
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let bad = |what: &str| Err(IntegrateError::InvalidConfig(what.to_string()));
        match self.method {
            Method::Rk4 { step } if !(step > 0.0 && step.is_finite()) => return bad("rk4 step must be positive"),
            Method::Rk45 { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => return bad("tolerances must be positive"),
            _ => {}
        }
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1");
        }
        if !(self.min_step > 0.0) {
            return bad("min_step must be positive");
        }
        if self.stride.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
            return bad("stride must be positive");
        }
        if self.initial_step.is_some_and(|s| !(s > 0.0)) {
            return bad("initial step must be positive");
        }
        Ok(())
    }
}

/// A state functional recorded along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub enum Monitor {
    Hamiltonian,
    ThetaDot,
    TauDot,
    Kinetic,
    /// Expression over the phase coordinates `(x, x_dot)`.
    Expression {
        name: String,
        expr: Expr,
    },
}

impl Monitor {
    pub fn builtin(name: &str) -> Option<Monitor> {
        match name {
            "hamiltonian" | "H" => Some(Monitor::Hamiltonian),
            "theta_dot" => Some(Monitor::ThetaDot),
            "tau_dot" => Some(Monitor::TauDot),
            "kinetic" | "T" => Some(Monitor::Kinetic),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Monitor::Hamiltonian => "hamiltonian",
            Monitor::ThetaDot => "theta_dot",
            Monitor::TauDot => "tau_dot",
            Monitor::Kinetic => "kinetic",
            Monitor::Expression { name, .. } => name,
        }
    }

    fn validate(&self, sys: &MechanicalSystem) -> Result<(), IntegrateError> {
        let reason = match self {
            Monitor::Hamiltonian if !sys.work_form().is_conservative() => {
                format!("hamiltonian needs a conservative work form, found `{}`", sys.work_form().name())
            }
            Monitor::TauDot if sys.time_form().is_none() => "tau_dot needs a time form".to_string(),
            Monitor::Expression { expr, .. } if expr.dimension() != 2 * sys.dimension() => {
                format!("expression must be over {} phase coordinates", 2 * sys.dimension())
            }
            _ => return Ok(()),
        };
        Err(IntegrateError::InvalidMonitor { name: self.name().to_string(), reason })
    }

    pub fn evaluate(&self, sys: &MechanicalSystem, s: &State) -> Result<f64, MechanicsError> {
        match self {
            Monitor::Hamiltonian => sys.hamiltonian(s),
            Monitor::ThetaDot => sys.theta_dot(s),
            Monitor::TauDot => sys.tau_dot(s),
            Monitor::Kinetic => sys.kinetic_energy(s),
            Monitor::Expression { expr, .. } => Ok(expr.eval(&s.phase_point()).map_err(GeometryError::from)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// The trajectory left the chart's domain box.
    DomainExit,
    StepUnderflow {
        step: f64,
    },
    MaxSteps,
    NonFinite,
    /// The time form became null along the trajectory.
    DegenerateTimeForm,
    Evaluation {
        message: String,
    },
}

impl Termination {
    /// Failures are everything except normal completion and domain exit.
    pub fn is_failure(&self) -> bool {
        !matches!(self, Termination::Completed | Termination::DomainExit)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorSeries {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub monitors: Vec<MonitorSeries>,
    pub termination: Termination,
    pub steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("a trajectory always holds its initial state")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("a trajectory always holds its initial time")
    }

    pub fn monitor(&self, name: &str) -> Option<&[f64]> {
        self.monitors.iter().find(|m| m.name == name).map(|m| m.values.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid initial state: {0}")]
    InvalidInitialState(MechanicsError),
    #[error("time-constrained integration needs a time form")]
    MissingTimeForm,
    #[error("monitor `{name}`: {reason}")]
    InvalidMonitor { name: String, reason: String },
    #[error("unknown monitor `{0}`")]
    UnknownMonitor(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftReport {
    pub initial: f64,
    pub max_drift: f64,
    pub argmax_time: f64,
}

pub fn drift_report(trajectory: &Trajectory, monitor: &str) -> Result<DriftReport, IntegrateError> {
    let values = trajectory.monitor(monitor).ok_or_else(|| IntegrateError::UnknownMonitor(monitor.to_string()))?;
    let initial = values[0];
    let (mut max_drift, mut argmax_time) = (0.0, trajectory.times[0]);
    for (value, t) in values.iter().zip(&trajectory.times) {
        let drift = (value - initial).abs();
        if drift > max_drift {
            max_drift = drift;
            argmax_time = *t;
        }
    }
    Ok(DriftReport { initial, max_drift, argmax_time })
}

type Phase = Vec<f64>;

fn classify_failure(err: &MechanicsError) -> Termination {
    match err {
        MechanicsError::Geometry(GeometryError::OutsideDomain { .. }) => Termination::DomainExit,
        MechanicsError::DegenerateTimeForm { .. } => Termination::DegenerateTimeForm,
        other => Termination::Evaluation { message: other.to_string() },
    }
}

struct Field<'a> {
    sys: &'a MechanicalSystem,
    constrained: bool,
    n: usize,
}

impl Field<'_> {
    fn state(&self, y: &[f64]) -> State {
        State::new(y[..self.n].to_vec(), y[self.n..].to_vec())
    }

    fn eval(&self, y: &[f64]) -> Result<Phase, Termination> {
        if y.iter().any(|c| !c.is_finite()) {
            return Err(Termination::NonFinite);
        }
        let s = self.state(y);
        let a = if self.constrained { self.sys.time_constrained(&s).map(|t| t.acceleration) } else { self.sys.acceleration(&s) }
            .map_err(|e| classify_failure(&e))?;
        let mut dy = Vec::with_capacity(2 * self.n);
        dy.extend_from_slice(&y[self.n..]);
        dy.extend(a);
        if dy.iter().any(|c| !c.is_finite()) {
            return Err(Termination::NonFinite);
        }
        Ok(dy)
    }
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &Phase)]) -> Phase {
    let mut out = y.to_vec();
    for (coef, k) in terms {
        if *coef == 0.0 {
            continue;
        }
        for (o, ki) in out.iter_mut().zip(k.iter()) {
            *o += h * coef * ki;
        }
    }
    out
}

/// Compensated `y + delta`; `carry` holds the low-order bits lost so far.
fn compensated_add(y: &[f64], carry: &[f64], delta: &[f64]) -> (Phase, Phase) {
    let mut out = Vec::with_capacity(y.len());
    let mut lost = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        let d = delta[i] - carry[i];
        let sum = y[i] + d;
        lost.push((sum - y[i]) - d);
        out.push(sum);
    }
    (out, lost)
}

struct Step {
    y: Phase,
    carry: Phase,
    k_next: Phase,
    err: f64,
}

fn rk4_step(field: &Field, y: &[f64], carry: &[f64], k1: &Phase, h: f64) -> Result<Step, Termination> {
    let k2 = field.eval(&axpy(y, h, &[(0.5, k1)]))?;
    let k3 = field.eval(&axpy(y, h, &[(0.5, &k2)]))?;
    let k4 = field.eval(&axpy(y, h, &[(1.0, &k3)]))?;
    let zero = vec![0.0; y.len()];
    let delta = axpy(&zero, h, &[(1.0 / 6.0, k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]);
    let (y, carry) = compensated_add(y, carry, &delta);
    let k_next = field.eval(&y)?;
    Ok(Step { y, carry, k_next, err: 0.0 })
}

// Dormand–Prince 5(4) tableau.
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// One Dormand–Prince step: the 5th-order solution, its derivative (first
/// stage of the next step) and the scaled error norm.
fn dp_step(field: &Field, y: &[f64], carry: &[f64], k1: &Phase, h: f64, rtol: f64, atol: f64) -> Result<Step, Termination> {
    let mut ks: Vec<Phase> = vec![k1.clone()];
    for row in DP_A.iter().take(5) {
        let terms: Vec<(f64, &Phase)> = row.iter().copied().zip(ks.iter()).collect();
        let k = field.eval(&axpy(y, h, &terms))?;
        ks.push(k);
    }
    let terms: Vec<(f64, &Phase)> = DP_A[5].iter().copied().zip(ks.iter()).collect();
    let zero = vec![0.0; y.len()];
    let (y_new, carry) = compensated_add(y, carry, &axpy(&zero, h, &terms));
    let k7 = field.eval(&y_new)?;
    ks.push(k7);
    let mut acc = 0.0;
    for i in 0..y.len() {
        let err: f64 = DP_E.iter().zip(&ks).map(|(e, k)| e * k[i]).sum::<f64>() * h;
        let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
        acc += (err / scale).powi(2);
    }
    let norm = (acc / y.len() as f64).sqrt();
    let k_next = ks.pop().expect("seven stages");
    Ok(Step { y: y_new, carry, k_next, err: norm })
}

fn scaled_norm(v: &[f64], y: &[f64], rtol: f64, atol: f64) -> f64 {
    let acc: f64 = v.iter().zip(y).map(|(vi, yi)| (vi / (atol + rtol * yi.abs())).powi(2)).sum();
    (acc / v.len() as f64).sqrt()
}

fn initial_step(field: &Field, y: &[f64], f0: &Phase, rtol: f64, atol: f64) -> f64 {
    let d0 = scaled_norm(y, y, rtol, atol);
    let d1 = scaled_norm(f0, y, rtol, atol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y, h0, &[(1.0, f0)]);
    let Ok(f1) = field.eval(&y1) else {
        return h0;
    };
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled_norm(&diff, y, rtol, atol) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dmax).powf(0.2) };
    (100.0 * h0).min(h1)
}

struct Recorder<'a> {
    sys: &'a MechanicalSystem,
    monitors: &'a [Monitor],
    traj: Trajectory,
    n: usize,
}

impl Recorder<'_> {
    fn record(&mut self, t: f64, y: &[f64]) -> Result<(), Termination> {
        let s = State::new(y[..self.n].to_vec(), y[self.n..].to_vec());
        let values =
            self.monitors.iter().map(|m| m.evaluate(self.sys, &s)).collect::<Result<Vec<_>, _>>().map_err(|e| classify_failure(&e))?;
        for (series, value) in self.traj.monitors.iter_mut().zip(values) {
            series.values.push(value);
        }
        self.traj.times.push(t);
        self.traj.states.push(s);
        Ok(())
    }
}

/// Flow `s0` along the system's field (or its time-constrained version)
/// over `t_span`. Backward spans are allowed.
///
/// Numerical trouble along the way ends the run early with a
/// [`Termination`] reason; the samples recorded so far are kept.
pub fn integrate(
    sys: &MechanicalSystem,
    s0: &State,
    t_span: (f64, f64),
    config: &IntegratorConfig,
    monitors: &[Monitor],
    use_time_constraint: bool,
) -> Result<Trajectory, IntegrateError> {
    config.validate()?;
    if use_time_constraint && sys.time_form().is_none() {
        return Err(IntegrateError::MissingTimeForm);
    }
    for m in monitors {
        m.validate(sys)?;
    }
    let n = sys.dimension();
    let field = Field { sys, constrained: use_time_constraint, n };
    let probe = if use_time_constraint { sys.time_constrained(s0).map(|_| ()) } else { sys.evaluate(s0).map(|_| ()) };
    probe.map_err(IntegrateError::InvalidInitialState)?;

    let (t0, t1) = t_span;
    let mut rec = Recorder {
        sys,
        monitors,
        n,
        traj: Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            monitors: monitors.iter().map(|m| MonitorSeries { name: m.name().to_string(), values: Vec::new() }).collect(),
            termination: Termination::Completed,
            steps: 0,
            rejected_steps: 0,
        },
    };
    let mut y = s0.phase_point();
    if let Err(reason) = rec.record(t0, &y) {
        return Err(IntegrateError::InvalidMonitor { name: "initial sample".into(), reason: format!("{reason:?}") });
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(rec.traj);
    }
    let dir = span.signum();
    let sample_time = |k: u64| -> f64 {
        match config.stride {
            Some(stride) => {
                let t = t0 + dir * stride * k as f64;
                if (t - t1) * dir >= 0.0 {
                    t1
                } else {
                    t
                }
            }
            None => t1,
        }
    };

    let termination = run(&field, &mut rec, &mut y, t0, t1, dir, config, sample_time);
    rec.traj.termination = termination;
    Ok(rec.traj)
}

#[allow(clippy::too_many_arguments)]
fn run(
    field: &Field,
    rec: &mut Recorder,
    y: &mut Phase,
    t0: f64,
    t1: f64,
    dir: f64,
    config: &IntegratorConfig,
    sample_time: impl Fn(u64) -> f64,
) -> Termination {
    // time and state are summed with compensation so long fixed-step runs
    // do not drift by accumulated rounding
    let mut t = t0;
    let mut t_carry = 0.0;
    let mut carry = vec![0.0; y.len()];
    let mut next_sample = 1u64;
    let mut target = sample_time(next_sample);
    let mut k1 = match field.eval(y) {
        Ok(k) => k,
        Err(reason) => return reason,
    };
    let mut h = match config.method {
        Method::Rk4 { step } => step,
        Method::Rk45 { rtol, atol } => config.initial_step.unwrap_or_else(|| initial_step(field, y, &k1, rtol, atol)).min((t1 - t0).abs()),
    };
    let mut attempts = 0usize;
    loop {
        if attempts >= config.max_steps {
            return Termination::MaxSteps;
        }
        attempts += 1;
        let remaining = (target - t) * dir;
        let lands = h >= remaining * (1.0 - 1e-12);
        let step = if lands { remaining } else { h };
        let outcome = match config.method {
            Method::Rk4 { .. } => rk4_step(field, y, &carry, &k1, dir * step),
            Method::Rk45 { rtol, atol } => dp_step(field, y, &carry, &k1, dir * step, rtol, atol),
        };
        let Step { y: y_new, carry: carry_new, k_next, err } = match outcome {
            Ok(ok) => ok,
            Err(reason) => match config.method {
                Method::Rk4 { .. } => return reason,
                Method::Rk45 { .. } => {
                    // Retry smaller: a stage may have wandered outside the domain.
                    rec.traj.rejected_steps += 1;
                    h = step * 0.25;
                    if h < config.min_step {
                        return reason;
                    }
                    continue;
                }
            },
        };
        if err > 1.0 {
            rec.traj.rejected_steps += 1;
            let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h = step * factor;
            if h < config.min_step {
                return Termination::StepUnderflow { step: h };
            }
            continue;
        }
        rec.traj.steps += 1;
        if let Method::Rk45 { .. } = config.method {
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // a clipped landing step says nothing about the next step size
            h = if lands { h.max(step * factor).min(h * 5.0) } else { step * factor };
        }
        *y = y_new;
        carry = carry_new;
        k1 = k_next;
        if lands {
            t = target;
            t_carry = 0.0;
        } else {
            let d = dir * step - t_carry;
            let sum = t + d;
            t_carry = (sum - t) - d;
            t = sum;
        }
        if lands || config.stride.is_none() {
            if let Err(reason) = rec.record(t, y) {
                return reason;
            }
        }
        if lands {
            if t == t1 {
                return Termination::Completed;
            }
            next_sample += 1;
            target = sample_time(next_sample);
        }
    }
}
