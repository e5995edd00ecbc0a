//! Mechanical systems `(M, g, α)` and their equations of motion.
//!
//! The equation of motion `i_D ω + dT + α = 0` is resolved in coordinates to
//! the acceleration
//!
//! ```text
//! a^k = −Γ^k_ij v^i v^j − g^kj α_j
//! ```
//!
//! so a system is effectively a map from states `(x, v)` to accelerations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exprlang::{Expr, Jet2};
use crate::geometry::{
    exterior_derivative_2form_at, sym_covariant_derivative_from, Chart, Christoffel, GeometryError, Metric, MetricAt, OneFormField,
    ScalarField, TwoFormField, VectorField,
};
use crate::sampling::{halton_points, StateSampler, DEFAULT_SAMPLE_COUNT, DEFAULT_SEED};

/// Closedness threshold on `|dF|` at validation points.
pub const CLOSEDNESS_TOLERANCE: f64 = 1e-9;
/// Agreement threshold between `d(i_A g)` and `F`.
pub const POTENTIAL_TOLERANCE: f64 = 1e-8;
/// `|α̇|` at or below this counts as zero when classifying.
pub const RELATIVISTIC_TOLERANCE: f64 = 1e-12;
/// Time forms with `|‖τ‖²|` at or below this are rejected.
pub const TIME_FORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanicsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{operation} is not defined for a `{variant}` work form")]
    Unsupported { operation: &'static str, variant: &'static str },
    #[error("two-form is not closed: (dF){component:?} = {value:e} at {point:?}")]
    NotClosed { point: Vec<f64>, component: [usize; 3], value: f64 },
    #[error("vector potential inconsistent with F: component {component:?} expected {expected}, found {found} at {point:?}")]
    PotentialMismatch { point: Vec<f64>, component: [usize; 2], expected: f64, found: f64 },
    #[error("system has no time form")]
    MissingTimeForm,
    #[error("time form is null at {point:?}: |tau|^2 = {norm2:e}")]
    DegenerateTimeForm { point: Vec<f64>, norm2: f64 },
    #[error("{what}: expected {expected}, found {found}")]
    Dimension { what: &'static str, expected: usize, found: usize },
}

/// A point of the tangent bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> State {
        State { x, v }
    }

    /// `(x, v)` concatenated, the layout used by phase-space expressions.
    pub fn phase_point(&self) -> Vec<f64> {
        self.x.iter().chain(&self.v).copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorkForm {
    /// Geodesic motion.
    Zero,
    /// `α = dV`.
    Potential(ScalarField),
    /// `α_i(x, v)`, each parsed over the chart's phase coordinates.
    GeneralHorizontal(Vec<Expr>),
    /// `α = i_v F` for a closed 2-form, with an optional vector potential
    /// `A` satisfying `d(i_A g) = F`.
    Electromagnetic { field: TwoFormField, potential: Option<VectorField> },
}

impl WorkForm {
    pub fn name(&self) -> &'static str {
        match self {
            WorkForm::Zero => "zero",
            WorkForm::Potential(_) => "potential",
            WorkForm::GeneralHorizontal(_) => "general",
            WorkForm::Electromagnetic { .. } => "electromagnetic",
        }
    }

    /// Exact work forms (including zero).
    pub fn is_conservative(&self) -> bool {
        matches!(self, WorkForm::Zero | WorkForm::Potential(_))
    }
}

/// Closedness check of `F` over `points`; reports the worst component.
pub fn check_closed(field: &TwoFormField, points: &[Vec<f64>]) -> Result<(), MechanicsError> {
    let mut worst: Option<(Vec<f64>, [usize; 3], f64)> = None;
    for p in points {
        for (component, value) in exterior_derivative_2form_at(field, p)? {
            if worst.as_ref().is_none_or(|w| value.abs() > w.2.abs()) {
                worst = Some((p.clone(), component, value));
            }
        }
    }
    match worst {
        Some((point, component, value)) if value.abs() > CLOSEDNESS_TOLERANCE => Err(MechanicsError::NotClosed { point, component, value }),
        _ => Ok(()),
    }
}

/// `d(i_A g)` at a point, as an antisymmetric matrix.
pub fn potential_curvature_at(metric: &Metric, potential: &VectorField, p: &[f64]) -> Result<Vec<Vec<f64>>, GeometryError> {
    let n = metric.dimension();
    let m = metric.at(p)?;
    let a = potential.jets(p, 1)?;
    // dbeta[i][j] = ∂_i (g_jk A^k)
    let dbeta: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| m.dg(i)[(j, k)] * a[k].value() + m.g(j, k) * a[k].gradient()[i]).sum()).collect())
        .collect();
    Ok((0..n).map(|i| (0..n).map(|j| dbeta[i][j] - dbeta[j][i]).collect()).collect())
}

fn check_potential(metric: &Metric, field: &TwoFormField, potential: &VectorField, points: &[Vec<f64>]) -> Result<(), MechanicsError> {
    let n = metric.dimension();
    for p in points {
        let d = potential_curvature_at(metric, potential, p)?;
        let f = field.values(p)?;
        for i in 0..n {
            for j in (i + 1)..n {
                if (d[i][j] - f[i][j]).abs() > POTENTIAL_TOLERANCE {
                    return Err(MechanicsError::PotentialMismatch {
                        point: p.clone(),
                        component: [i, j],
                        expected: f[i][j],
                        found: d[i][j],
                    });
                }
            }
        }
    }
    Ok(())
}

fn validation_points(chart: &Chart) -> Vec<Vec<f64>> {
    halton_points(&chart.sample_box(), DEFAULT_SAMPLE_COUNT, DEFAULT_SEED)
}

/// Everything the dynamics needs at one state.
#[derive(Clone, Debug)]
pub struct StateEvaluation {
    pub metric: MetricAt,
    pub christoffel: Christoffel,
    /// `α_j(x, v)`
    pub work_form: Vec<f64>,
    /// `w = −g^{-1} α`
    pub force: Vec<f64>,
    /// `a = −Γ(v, v) + w`
    pub acceleration: Vec<f64>,
}

/// Time-constrained acceleration and the pieces of its correction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeConstrained {
    pub acceleration: Vec<f64>,
    pub free_acceleration: Vec<f64>,
    /// `c = (⟨τ, w⟩ + S(v, v)) / ‖τ‖²`
    pub correction: f64,
    pub tau_norm2: f64,
    pub grad_tau: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelativisticReport {
    pub relativistic: bool,
    pub max_alpha_dot: f64,
    /// State with the largest `|α̇|` when the system is not relativistic.
    pub witness: Option<State>,
    pub sample_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MechanicalSystem {
    metric: Metric,
    work: WorkForm,
    time_form: Option<OneFormField>,
}

impl MechanicalSystem {
    /// Validates component dimensions; electromagnetic forms are checked for
    /// closedness (and potential consistency) over the default sample set.
    pub fn new(metric: Metric, work: WorkForm) -> Result<MechanicalSystem, MechanicsError> {
        let chart = metric.chart();
        let n = chart.dimension();
        match &work {
            WorkForm::Zero => {}
            WorkForm::Potential(v) => {
                if v.expr().dimension() != n {
                    return Err(MechanicsError::Dimension { what: "potential arity", expected: n, found: v.expr().dimension() });
                }
            }
            WorkForm::GeneralHorizontal(alpha) => {
                if alpha.len() != n {
                    return Err(MechanicsError::Dimension { what: "work form components", expected: n, found: alpha.len() });
                }
                if let Some(e) = alpha.iter().find(|e| e.dimension() != 2 * n) {
                    return Err(MechanicsError::Dimension { what: "work form arity (x, v)", expected: 2 * n, found: e.dimension() });
                }
            }
            WorkForm::Electromagnetic { field, potential } => {
                if field.dimension() != n {
                    return Err(MechanicsError::Dimension { what: "two-form", expected: n, found: field.dimension() });
                }
                let points = validation_points(chart);
                check_closed(field, &points)?;
                if let Some(a) = potential {
                    check_potential(&metric, field, a, &points)?;
                }
            }
        }
        Ok(MechanicalSystem { metric, work, time_form: None })
    }

    pub fn with_time_form(mut self, tau: OneFormField) -> Result<MechanicalSystem, MechanicsError> {
        let n = self.dimension();
        if tau.components().len() != n {
            return Err(MechanicsError::Dimension { what: "time form", expected: n, found: tau.components().len() });
        }
        self.time_form = Some(tau);
        Ok(self)
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn chart(&self) -> &Chart {
        self.metric.chart()
    }

    pub fn dimension(&self) -> usize {
        self.metric.dimension()
    }

    pub fn work_form(&self) -> &WorkForm {
        &self.work
    }

    pub fn time_form(&self) -> Option<&OneFormField> {
        self.time_form.as_ref()
    }

    fn check_state(&self, s: &State) -> Result<(), MechanicsError> {
        let n = self.dimension();
        if s.v.len() != n {
            return Err(MechanicsError::Dimension { what: "velocity", expected: n, found: s.v.len() });
        }
        self.chart().check_point(&s.x)?;
        Ok(())
    }

    /// `T = ½ g_ij v^i v^j`.
    pub fn kinetic_energy(&self, s: &State) -> Result<f64, MechanicsError> {
        Ok(0.5 * self.theta_dot(s)?)
    }

    /// `θ̇ = g_ij v^i v^j = 2T`.
    pub fn theta_dot(&self, s: &State) -> Result<f64, MechanicsError> {
        self.check_state(s)?;
        let m = self.metric.at_order(&s.x, 0)?;
        Ok(m.inner(&s.v, &s.v))
    }

    /// Covariant components of the work form at a state.
    pub fn work_form_at(&self, s: &State) -> Result<Vec<f64>, MechanicsError> {
        self.check_state(s)?;
        let n = self.dimension();
        Ok(match &self.work {
            WorkForm::Zero => vec![0.0; n],
            WorkForm::Potential(v) => v.jet(&s.x, 1)?.gradient().to_vec(),
            WorkForm::GeneralHorizontal(alpha) => {
                let phase = s.phase_point();
                alpha.iter().map(|e| e.eval(&phase)).collect::<Result<Vec<_>, _>>().map_err(GeometryError::from)?
            }
            WorkForm::Electromagnetic { field, .. } => {
                let f = field.values(&s.x)?;
                (0..n).map(|j| (0..n).map(|i| f[i][j] * s.v[i]).sum()).collect()
            }
        })
    }

    /// `α̇ = α_i(x, v) v^i`; metric-independent.
    pub fn alpha_dot(&self, s: &State) -> Result<f64, MechanicsError> {
        let alpha = self.work_form_at(s)?;
        Ok(alpha.iter().zip(&s.v).map(|(a, v)| a * v).sum())
    }

    pub fn evaluate(&self, s: &State) -> Result<StateEvaluation, MechanicsError> {
        let work_form = self.work_form_at(s)?;
        let metric = self.metric.at(&s.x)?;
        let christoffel = Christoffel::from_metric(&metric);
        let force: Vec<f64> = metric.raise(&work_form).into_iter().map(|w| -w).collect();
        let spray = christoffel.contract(&s.v);
        let acceleration = spray.iter().zip(&force).map(|(g, w)| w - g).collect();
        Ok(StateEvaluation { metric, christoffel, work_form, force, acceleration })
    }

    /// Geometric representative of the force, `w = −grad α`.
    pub fn force_geometric_rep(&self, s: &State) -> Result<Vec<f64>, MechanicsError> {
        let alpha = self.work_form_at(s)?;
        let m = self.metric.at_order(&s.x, 0)?;
        Ok(m.raise(&alpha).into_iter().map(|w| -w).collect())
    }

    pub fn acceleration(&self, s: &State) -> Result<Vec<f64>, MechanicsError> {
        Ok(self.evaluate(s)?.acceleration)
    }

    /// `g_kj(a^k + Γ^k_il v^i v^l) + α_j`: zero when `a` solves the equation
    /// of motion at `s`.
    pub fn newton_residual(&self, s: &State, a: &[f64]) -> Result<Vec<f64>, MechanicsError> {
        let e = self.evaluate(s)?;
        let spray = e.christoffel.contract(&s.v);
        let total: Vec<f64> = a.iter().zip(&spray).map(|(a, g)| a + g).collect();
        let lowered = e.metric.lower(&total);
        Ok(lowered.iter().zip(&e.work_form).map(|(l, alpha)| l + alpha).collect())
    }

    /// `V(x)`; zero for the geodesic system.
    pub fn potential_energy(&self, x: &[f64]) -> Result<f64, MechanicsError> {
        match &self.work {
            WorkForm::Zero => Ok(0.0),
            WorkForm::Potential(v) => Ok(v.value(x)?),
            other => Err(MechanicsError::Unsupported { operation: "potential energy", variant: other.name() }),
        }
    }

    /// `H = T + V` for conservative systems.
    pub fn hamiltonian(&self, s: &State) -> Result<f64, MechanicsError> {
        let v =
            self.potential_energy(&s.x).map_err(|_| MechanicsError::Unsupported { operation: "hamiltonian", variant: self.work.name() })?;
        Ok(self.kinetic_energy(s)? + v)
    }

    /// Relativistic iff `α̇` vanishes over the sampled states.
    pub fn classify_relativistic(&self, sampler: &StateSampler) -> Result<RelativisticReport, MechanicsError> {
        let states = sampler.states(self.chart());
        let mut max_alpha_dot: f64 = 0.0;
        let mut witness = None;
        for s in &states {
            let ad = self.alpha_dot(s)?.abs();
            if ad > max_alpha_dot {
                max_alpha_dot = ad;
                witness = Some(s.clone());
            }
        }
        let relativistic = max_alpha_dot <= RELATIVISTIC_TOLERANCE;
        Ok(RelativisticReport {
            relativistic,
            max_alpha_dot,
            witness: if relativistic { None } else { witness },
            sample_count: states.len(),
        })
    }

    /// `τ̇ = τ_i(x) v^i`.
    pub fn tau_dot(&self, s: &State) -> Result<f64, MechanicsError> {
        let tau = self.time_form.as_ref().ok_or(MechanicsError::MissingTimeForm)?;
        self.check_state(s)?;
        Ok(tau.values(&s.x)?.iter().zip(&s.v).map(|(t, v)| t * v).sum())
    }

    /// Acceleration corrected to keep `τ̇` constant:
    /// `ā = a − c grad τ` with `c = (⟨τ, w⟩ + S_ij v^i v^j) / ‖τ‖²`.
    pub fn time_constrained_acceleration(&self, tau: &OneFormField, s: &State) -> Result<TimeConstrained, MechanicsError> {
        let e = self.evaluate(s)?;
        let tau_jets: Vec<Jet2> = tau.jets(&s.x, 1)?;
        let tau_values: Vec<f64> = tau_jets.iter().map(Jet2::value).collect();
        let tau_norm2 = e.metric.co_inner(&tau_values, &tau_values);
        if !(tau_norm2.abs() > TIME_FORM_TOLERANCE) {
            return Err(MechanicsError::DegenerateTimeForm { point: s.x.clone(), norm2: tau_norm2 });
        }
        let second = sym_covariant_derivative_from(&e.metric, &e.christoffel, &tau_jets);
        let n = self.dimension();
        let mut s_vv = 0.0;
        for i in 0..n {
            for j in 0..n {
                s_vv += second[i][j] * s.v[i] * s.v[j];
            }
        }
        let tau_w: f64 = tau_values.iter().zip(&e.force).map(|(t, w)| t * w).sum();
        let correction = (tau_w + s_vv) / tau_norm2;
        let grad_tau = e.metric.raise(&tau_values);
        let acceleration = e.acceleration.iter().zip(&grad_tau).map(|(a, g)| a - correction * g).collect();
        Ok(TimeConstrained { acceleration, free_acceleration: e.acceleration, correction, tau_norm2, grad_tau })
    }

    /// Time-constrained acceleration with the system's own time form.
    pub fn time_constrained(&self, s: &State) -> Result<TimeConstrained, MechanicsError> {
        let tau = self.time_form.as_ref().ok_or(MechanicsError::MissingTimeForm)?;
        self.time_constrained_acceleration(tau, s)
    }
}

/// The Lorentz system of a closed 2-form on `(M, g)`.
pub fn make_lorentz_system(
    metric: Metric,
    field: TwoFormField,
    potential: Option<VectorField>,
) -> Result<MechanicalSystem, MechanicsError> {
    MechanicalSystem::new(metric, WorkForm::Electromagnetic { field, potential })
}
