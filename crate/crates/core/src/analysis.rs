//! Field-level verification: intermediate integrals, lagrangian and
//! divergence conditions, Hamilton–Jacobi constancy, and the residuals of
//! the wave equations carried by `Ψ = e^{if/h}`.
//!
//! Complex residuals are reported with the unit-modulus factor `Ψ` removed,
//! so every magnitude below is phase-invariant.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{integrate, IntegrateError, IntegratorConfig, Termination};
use crate::exprlang::{Expr, Func};
use crate::geometry::{
    current_at, divergence_from_jacobian, gradient_field_jacobian, laplacian_at, GeometryError, Metric, MetricAt, ScalarField,
    TwoFormField, VectorField,
};
use crate::mechanics::{MechanicalSystem, MechanicsError, State, WorkForm};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Mechanics(#[from] MechanicsError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("invalid candidate field: {0}")]
    InvalidCandidate(String),
    #[error("{operation} is not defined for the `{variant}` work form")]
    Unsupported { operation: &'static str, variant: &'static str },
}

impl From<GeometryError> for AnalysisError {
    fn from(e: GeometryError) -> Self {
        AnalysisError::Mechanics(MechanicsError::Geometry(e))
    }
}

impl AnalysisError {
    /// Errors tied to one sample point; such points are skipped and counted.
    fn is_pointwise(&self) -> bool {
        matches!(
            self,
            AnalysisError::Mechanics(MechanicsError::Geometry(
                GeometryError::Domain(_) | GeometryError::Degenerate { .. } | GeometryError::OutsideDomain { .. }
            ))
        )
    }
}

/// A tangent field on `M` proposed as an intermediate integral.
#[derive(Clone, Debug, PartialEq)]
pub enum CandidateField {
    Explicit(VectorField),
    /// `u = grad f`
    GradientPhase {
        phase: ScalarField,
        h: f64,
    },
    /// `u = grad f − A`
    LorentzPhase {
        phase: ScalarField,
        potential: VectorField,
        h: f64,
    },
}

/// A candidate field with its first derivatives at one point.
#[derive(Clone, Debug)]
pub struct FieldAt {
    pub metric: MetricAt,
    pub u: Vec<f64>,
    /// `jacobian[i][k] = ∂_k u^i`
    pub jacobian: Vec<Vec<f64>>,
    /// `div(u + A)` for Lorentz phases, `div u` otherwise.
    pub divergence: f64,
}

impl CandidateField {
    pub fn gradient_phase(phase: ScalarField, h: f64) -> Result<Self, AnalysisError> {
        check_h(h)?;
        Ok(CandidateField::GradientPhase { phase, h })
    }

    pub fn lorentz_phase(phase: ScalarField, potential: VectorField, h: f64) -> Result<Self, AnalysisError> {
        check_h(h)?;
        if potential.components().len() != phase.expr().dimension() {
            return Err(AnalysisError::InvalidCandidate("potential and phase live on different charts".into()));
        }
        Ok(CandidateField::LorentzPhase { phase, potential, h })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CandidateField::Explicit(_) => "explicit",
            CandidateField::GradientPhase { .. } => "gradient_phase",
            CandidateField::LorentzPhase { .. } => "lorentz_phase",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            CandidateField::Explicit(u) => u.components().len(),
            CandidateField::GradientPhase { phase, .. } | CandidateField::LorentzPhase { phase, .. } => phase.expr().dimension(),
        }
    }

    pub fn phase(&self) -> Option<(&ScalarField, f64)> {
        match self {
            CandidateField::Explicit(_) => None,
            CandidateField::GradientPhase { phase, h } | CandidateField::LorentzPhase { phase, h, .. } => Some((phase, *h)),
        }
    }

    pub fn potential(&self) -> Option<&VectorField> {
        match self {
            CandidateField::LorentzPhase { potential, .. } => Some(potential),
            _ => None,
        }
    }

    fn check_metric(&self, metric: &Metric) -> Result<(), AnalysisError> {
        if self.dimension() != metric.dimension() {
            return Err(AnalysisError::InvalidCandidate(format!(
                "field has dimension {}, metric has {}",
                self.dimension(),
                metric.dimension()
            )));
        }
        Ok(())
    }

    pub fn at(&self, metric: &Metric, p: &[f64]) -> Result<FieldAt, GeometryError> {
        let m = metric.at(p)?;
        let (u, jacobian, divergence) = match self {
            CandidateField::Explicit(field) => {
                let jets = field.jets(p, 1)?;
                let u: Vec<f64> = jets.iter().map(|j| j.value()).collect();
                let jac: Vec<Vec<f64>> = jets.iter().map(|j| j.gradient().to_vec()).collect();
                let div = divergence_from_jacobian(&m, &u, &jac);
                (u, jac, div)
            }
            CandidateField::GradientPhase { phase, .. } => {
                let (u, jac) = gradient_field_jacobian(&m, &phase.jet(p, 2)?);
                let div = divergence_from_jacobian(&m, &u, &jac);
                (u, jac, div)
            }
            CandidateField::LorentzPhase { phase, potential, .. } => {
                let (grad, grad_jac) = gradient_field_jacobian(&m, &phase.jet(p, 2)?);
                let div = divergence_from_jacobian(&m, &grad, &grad_jac);
                let a = potential.jets(p, 1)?;
                let u = grad.iter().zip(&a).map(|(g, a)| g - a.value()).collect();
                let jac = grad_jac.iter().zip(&a).map(|(row, a)| row.iter().zip(a.gradient()).map(|(g, da)| g - da).collect()).collect();
                (u, jac, div)
            }
        };
        Ok(FieldAt { metric: m, u, jacobian, divergence })
    }

    pub fn value(&self, metric: &Metric, p: &[f64]) -> Result<Vec<f64>, GeometryError> {
        match self {
            CandidateField::Explicit(field) => field.values(p),
            _ => Ok(self.at(metric, p)?.u),
        }
    }
}

fn check_h(h: f64) -> Result<(), AnalysisError> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(AnalysisError::InvalidCandidate(format!("h must be positive, got {h}")))
    }
}

impl FieldAt {
    /// `[i][j] = ∂_i β_j` for `β = i_u T₂`.
    fn beta_jacobian(&self) -> Vec<Vec<f64>> {
        let n = self.u.len();
        let m = &self.metric;
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| m.dg(i)[(j, k)] * self.u[k] + m.g(j, k) * self.jacobian[k][i]).sum()).collect())
            .collect()
    }

    /// `d(i_u T₂)` as a full antisymmetric matrix.
    pub fn d_beta(&self) -> Vec<Vec<f64>> {
        let db = self.beta_jacobian();
        let n = self.u.len();
        (0..n).map(|i| (0..n).map(|j| db[i][j] - db[j][i]).collect()).collect()
    }

    /// `∂_j T(u) = ½ ∂_j g_ab u^a u^b + g_ab u^a ∂_j u^b`.
    pub fn d_kinetic(&self) -> Vec<f64> {
        let n = self.u.len();
        let m = &self.metric;
        (0..n)
            .map(|j| {
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        acc += 0.5 * m.dg(j)[(a, b)] * self.u[a] * self.u[b] + m.g(a, b) * self.u[a] * self.jacobian[b][j];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn kinetic(&self) -> f64 {
        0.5 * self.metric.inner(&self.u, &self.u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualEntry {
    pub point: Vec<f64>,
    pub components: Vec<f64>,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub point: Vec<f64>,
    pub reason: String,
}

/// Per-point residuals with an absolute-tolerance verdict on their maximum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub tolerance: f64,
    pub max: f64,
    pub verdict: bool,
    pub entries: Vec<ResidualEntry>,
    pub skipped: Vec<SkippedPoint>,
}

fn max_abs(c: &[f64]) -> f64 {
    c.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn complex_modulus(c: &[f64]) -> f64 {
    c[0].hypot(c[1])
}

impl ResidualReport {
    fn from_parts(tolerance: f64, entries: Vec<ResidualEntry>, skipped: Vec<SkippedPoint>) -> Self {
        let max = entries.iter().fold(0.0, |m: f64, e| m.max(e.magnitude));
        let verdict = !entries.is_empty() && max <= tolerance;
        ResidualReport { tolerance, max, verdict, entries, skipped }
    }

    fn collect(
        tolerance: f64,
        points: &[Vec<f64>],
        magnitude: fn(&[f64]) -> f64,
        mut residual: impl FnMut(&[f64]) -> Result<Vec<f64>, AnalysisError>,
    ) -> Result<Self, AnalysisError> {
        let mut entries = Vec::with_capacity(points.len());
        let mut skipped = Vec::new();
        for p in points {
            match residual(p) {
                Ok(components) => {
                    let magnitude = magnitude(&components);
                    entries.push(ResidualEntry { point: p.clone(), components, magnitude });
                }
                Err(e) if e.is_pointwise() => skipped.push(SkippedPoint { point: p.clone(), reason: e.to_string() }),
                Err(e) => return Err(e),
            }
        }
        Ok(Self::from_parts(tolerance, entries, skipped))
    }

    pub fn argmax(&self) -> Option<&ResidualEntry> {
        self.entries.iter().max_by(|a, b| a.magnitude.total_cmp(&b.magnitude))
    }
}

/// `r = i_u d(i_u T₂) + dT(u) + u*α`, a covector per point.
pub fn intermediate_integral_residual(
    sys: &MechanicalSystem,
    u: &CandidateField,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<ResidualReport, AnalysisError> {
    u.check_metric(sys.metric())?;
    ResidualReport::collect(tolerance, points, max_abs, |p| {
        let at = u.at(sys.metric(), p)?;
        let alpha = sys.work_form_at(&State::new(p.to_vec(), at.u.clone()))?;
        let d_beta = at.d_beta();
        let dt = at.d_kinetic();
        let n = at.u.len();
        Ok((0..n).map(|j| (0..n).map(|i| at.u[i] * d_beta[i][j]).sum::<f64>() + dt[j] + alpha[j]).collect())
    })
}

/// `d(i_u T₂)`, or `F + d(i_u T₂)` when `F` is given; `i < j` components
/// in row-major order.
pub fn lagrangian_residual(
    u: &CandidateField,
    metric: &Metric,
    points: &[Vec<f64>],
    field: Option<&TwoFormField>,
    tolerance: f64,
) -> Result<ResidualReport, AnalysisError> {
    u.check_metric(metric)?;
    ResidualReport::collect(tolerance, points, max_abs, |p| {
        let d_beta = u.at(metric, p)?.d_beta();
        let f = field.map(|f| f.values(p)).transpose()?;
        let n = d_beta.len();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(d_beta[i][j] + f.as_ref().map_or(0.0, |f| f[i][j]));
            }
        }
        Ok(out)
    })
}

/// `div u`, or `div(u + A)` for Lorentz phases.
pub fn divergence_residual(
    u: &CandidateField,
    metric: &Metric,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<ResidualReport, AnalysisError> {
    u.check_metric(metric)?;
    ResidualReport::collect(tolerance, points, max_abs, |p| Ok(vec![u.at(metric, p)?.divergence]))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointValue {
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HamiltonJacobiReport {
    /// `"hamiltonian"` for `H(u)`, `"kinetic"` for `T(u)` on Lorentz systems.
    pub quantity: &'static str,
    pub values: Vec<PointValue>,
    /// Mean of the sampled values.
    pub constant: f64,
    pub spread: f64,
    pub tolerance: f64,
    pub verdict: bool,
    pub skipped: Vec<SkippedPoint>,
}

/// Constancy of `H(u) = T(u) + V` (or `T(u)` for electromagnetic systems).
pub fn hamilton_jacobi_check(
    sys: &MechanicalSystem,
    u: &CandidateField,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<HamiltonJacobiReport, AnalysisError> {
    u.check_metric(sys.metric())?;
    let quantity = match sys.work_form() {
        WorkForm::Zero | WorkForm::Potential(_) => "hamiltonian",
        WorkForm::Electromagnetic { .. } => "kinetic",
        other => return Err(AnalysisError::Unsupported { operation: "Hamilton-Jacobi check", variant: other.name() }),
    };
    let mut values = Vec::with_capacity(points.len());
    let mut skipped = Vec::new();
    for p in points {
        let value = (|| -> Result<f64, AnalysisError> {
            let at = u.at(sys.metric(), p)?;
            let v = if quantity == "hamiltonian" { sys.potential_energy(p)? } else { 0.0 };
            Ok(at.kinetic() + v)
        })();
        match value {
            Ok(value) => values.push(PointValue { point: p.clone(), value }),
            Err(e) if e.is_pointwise() => skipped.push(SkippedPoint { point: p.clone(), reason: e.to_string() }),
            Err(e) => return Err(e),
        }
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.value), hi.max(v.value)));
    let spread = if values.is_empty() { 0.0 } else { hi - lo };
    let constant = values.iter().map(|v| v.value).sum::<f64>() / values.len().max(1) as f64;
    let verdict = !values.is_empty() && spread <= tolerance;
    Ok(HamiltonJacobiReport { quantity, values, constant, spread, tolerance, verdict, skipped })
}

fn composed(metric: &Metric, func: Func, phi: &ScalarField) -> Result<ScalarField, GeometryError> {
    ScalarField::new(metric.chart(), Expr::apply(func, phi.expr()))
}

/// `Δe^{iφ} − e^{iφ}(iΔφ − T²(dφ, dφ))` with the left side assembled from
/// `Δ cos φ + iΔ sin φ`; reported as `[re, im]` after dividing by `e^{iφ}`.
pub fn laplacian_identity_residual(
    phi: &ScalarField,
    metric: &Metric,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<ResidualReport, AnalysisError> {
    let cos_phi = composed(metric, Func::Cos, phi)?;
    let sin_phi = composed(metric, Func::Sin, phi)?;
    ResidualReport::collect(tolerance, points, complex_modulus, |p| {
        let lhs = Complex64::new(laplacian_at(&cos_phi, metric, p)?, laplacian_at(&sin_phi, metric, p)?);
        let jet = phi.jet(p, 1)?;
        let m = metric.at_order(p, 0)?;
        let norm = m.co_inner(jet.gradient(), jet.gradient());
        let rhs = Complex64::new(-norm, laplacian_at(phi, metric, p)?);
        let r = lhs * Complex64::from_polar(1.0, -jet.value()) - rhs;
        Ok(vec![r.re, r.im])
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchrodingerReport {
    /// `R = i(h/2)Δf − ½T²(df, df) − V + E`, as `[re, im]`.
    pub residual: ResidualReport,
    /// `Δf` per point.
    pub harmonicity: ResidualReport,
    /// `E − H(grad f)` per point.
    pub energy: ResidualReport,
    /// Spread of `H(grad f)` over the sample.
    pub hj_spread: f64,
    pub h: f64,
    pub energy_constant: f64,
}

/// `(h²/2 Δ − V + E)Ψ / Ψ` for `Ψ = e^{if/h}`.
///
/// Real and imaginary parts are exactly the two sub-residuals:
/// `|R|² = (h/2 · Δf)² + (E − H(grad f))²`.
pub fn schrodinger_residual(
    metric: &Metric,
    potential: Option<&ScalarField>,
    phase: &ScalarField,
    h: f64,
    energy: f64,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<SchrodingerReport, AnalysisError> {
    check_h(h)?;
    let mut rows = Vec::with_capacity(points.len());
    let mut skipped = Vec::new();
    for p in points {
        let row = (|| -> Result<(f64, f64), AnalysisError> {
            let lap = laplacian_at(phase, metric, p)?;
            let jet = phase.jet(p, 1)?;
            let norm = metric.at_order(p, 0)?.co_inner(jet.gradient(), jet.gradient());
            let v = potential.map(|v| v.value(p)).transpose()?.unwrap_or(0.0);
            Ok((lap, 0.5 * norm + v))
        })();
        match row {
            Ok(row) => rows.push((p.clone(), row)),
            Err(e) if e.is_pointwise() => skipped.push(SkippedPoint { point: p.clone(), reason: e.to_string() }),
            Err(e) => return Err(e),
        }
    }
    let entries = |f: &dyn Fn(f64, f64) -> Vec<f64>, mag: fn(&[f64]) -> f64| -> Vec<ResidualEntry> {
        rows.iter()
            .map(|(p, (lap, ham))| {
                let components = f(*lap, *ham);
                ResidualEntry { point: p.clone(), magnitude: mag(&components), components }
            })
            .collect()
    };
    let residual = entries(&|lap, ham| vec![energy - ham, 0.5 * h * lap], complex_modulus);
    let harmonicity = entries(&|lap, _| vec![lap], max_abs);
    let energy_rows = entries(&|_, ham| vec![energy - ham], max_abs);
    let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, (_, ham))| (lo.min(*ham), hi.max(*ham)));
    Ok(SchrodingerReport {
        residual: ResidualReport::from_parts(tolerance, residual, skipped.clone()),
        harmonicity: ResidualReport::from_parts(tolerance, harmonicity, skipped.clone()),
        energy: ResidualReport::from_parts(tolerance, energy_rows, skipped),
        hj_spread: if rows.is_empty() { 0.0 } else { hi - lo },
        h,
        energy_constant: energy,
    })
}

/// The three terms of the Klein–Gordon operator applied to `Ψ`, each
/// divided by `Ψ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KleinGordonTerms {
    /// `ΔΨ/Ψ = iΔf/h − T²(df, df)/h²`, as `[re, im]`.
    pub laplacian: [f64; 2],
    /// `−2(i/h)A(Ψ)/Ψ = 2A(f)/h²`.
    pub potential: f64,
    /// `(m² − ‖A‖²)/h²`.
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KleinGordonReport {
    pub residual: ResidualReport,
    pub terms: Vec<KleinGordonTerms>,
    pub m2: f64,
    pub m2_derived: bool,
    /// `div(u + A) = Δf` per point.
    pub divergence: ResidualReport,
    /// `‖u‖² − m²` per point, `u = grad f − A`.
    pub norm_deviation: ResidualReport,
    pub verdict: bool,
}

pub fn klein_gordon_residual(
    metric: &Metric,
    potential: Option<&VectorField>,
    phase: &ScalarField,
    h: f64,
    m2: Option<f64>,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<KleinGordonReport, AnalysisError> {
    check_h(h)?;
    struct Row {
        point: Vec<f64>,
        lap: f64,
        df2: f64,
        a_f: f64,
        a2: f64,
        u2: f64,
    }
    let mut rows = Vec::with_capacity(points.len());
    let mut skipped = Vec::new();
    for p in points {
        let row = (|| -> Result<Row, AnalysisError> {
            let lap = laplacian_at(phase, metric, p)?;
            let jet = phase.jet(p, 1)?;
            let df = jet.gradient();
            let m = metric.at_order(p, 0)?;
            let a = potential.map(|a| a.values(p)).transpose()?.unwrap_or_else(|| vec![0.0; df.len()]);
            let grad = m.raise(df);
            let u: Vec<f64> = grad.iter().zip(&a).map(|(g, a)| g - a).collect();
            Ok(Row {
                point: p.clone(),
                lap,
                df2: m.co_inner(df, df),
                a_f: a.iter().zip(df).map(|(a, d)| a * d).sum(),
                a2: m.inner(&a, &a),
                u2: m.inner(&u, &u),
            })
        })();
        match row {
            Ok(row) => rows.push(row),
            Err(e) if e.is_pointwise() => skipped.push(SkippedPoint { point: p.clone(), reason: e.to_string() }),
            Err(e) => return Err(e),
        }
    }
    let m2_derived = m2.is_none();
    let m2 = m2.unwrap_or_else(|| rows.iter().map(|r| r.u2).sum::<f64>() / rows.len().max(1) as f64);
    let h2 = h * h;
    let mut residual = Vec::with_capacity(rows.len());
    let mut terms = Vec::with_capacity(rows.len());
    let mut divergence = Vec::with_capacity(rows.len());
    let mut norm_deviation = Vec::with_capacity(rows.len());
    for r in &rows {
        let t = KleinGordonTerms { laplacian: [-r.df2 / h2, r.lap / h], potential: 2.0 * r.a_f / h2, mass: (m2 - r.a2) / h2 };
        let components = vec![t.laplacian[0] + t.potential + t.mass, t.laplacian[1]];
        residual.push(ResidualEntry { point: r.point.clone(), magnitude: complex_modulus(&components), components });
        terms.push(t);
        divergence.push(ResidualEntry { point: r.point.clone(), components: vec![r.lap], magnitude: r.lap.abs() });
        let dev = r.u2 - m2;
        norm_deviation.push(ResidualEntry { point: r.point.clone(), components: vec![dev], magnitude: dev.abs() });
    }
    let residual = ResidualReport::from_parts(tolerance, residual, skipped.clone());
    let divergence = ResidualReport::from_parts(tolerance, divergence, skipped.clone());
    let norm_deviation = ResidualReport::from_parts(tolerance, norm_deviation, skipped);
    let verdict = residual.verdict && divergence.verdict && norm_deviation.verdict;
    Ok(KleinGordonReport { residual, terms, m2, m2_derived, divergence, norm_deviation, verdict })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurrentEntry {
    pub point: Vec<f64>,
    pub current: Vec<f64>,
    pub codifferential: Vec<f64>,
    pub divergence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurrentReport {
    pub entries: Vec<CurrentEntry>,
    pub max_divergence: f64,
    pub tolerance: f64,
    pub verdict: bool,
    pub skipped: Vec<SkippedPoint>,
}

/// `J = (δF)^♯` and `div J` per point.
pub fn current_from_field(
    field: &TwoFormField,
    metric: &Metric,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<CurrentReport, AnalysisError> {
    let mut entries = Vec::with_capacity(points.len());
    let mut skipped = Vec::new();
    for p in points {
        match current_at(field, metric, p, true).map_err(AnalysisError::from) {
            Ok(c) => entries.push(CurrentEntry {
                point: p.clone(),
                current: c.current,
                codifferential: c.codifferential,
                divergence: c.divergence.unwrap_or(0.0),
            }),
            Err(e) if e.is_pointwise() => skipped.push(SkippedPoint { point: p.clone(), reason: e.to_string() }),
            Err(e) => return Err(e),
        }
    }
    let max_divergence = entries.iter().fold(0.0, |m: f64, e| m.max(e.divergence.abs()));
    let verdict = !entries.is_empty() && max_divergence <= tolerance;
    Ok(CurrentReport { entries, max_divergence, tolerance, verdict, skipped })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FoundConstants {
    #[serde(rename = "E", skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationResiduals {
    pub intermediate_integral: f64,
    pub lagrangian: f64,
    pub divergence: f64,
    pub hj_spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldClassification {
    pub intermediate_integral: bool,
    pub lagrangian: bool,
    pub divergence_free: bool,
    pub hj_constant: bool,
    pub constants: FoundConstants,
    pub residuals: ClassificationResiduals,
    pub tolerance: f64,
    pub sample_count: usize,
    pub skipped: usize,
}

impl FieldClassification {
    pub fn all_pass(&self) -> bool {
        self.intermediate_integral && self.lagrangian && self.divergence_free && self.hj_constant
    }

    /// Names of the failed checks, in report order.
    pub fn failures(&self) -> Vec<&'static str> {
        [
            ("intermediate_integral", self.intermediate_integral),
            ("lagrangian", self.lagrangian),
            ("divergence_free", self.divergence_free),
            ("hj_constant", self.hj_constant),
        ]
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name)
        .collect()
    }
}

/// Runs the intermediate-integral, lagrangian, divergence and
/// Hamilton–Jacobi checks with one tolerance. On electromagnetic systems
/// the lagrangian check is against `ω_F`.
pub fn classify_field(
    sys: &MechanicalSystem,
    u: &CandidateField,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<FieldClassification, AnalysisError> {
    let field = match sys.work_form() {
        WorkForm::Electromagnetic { field, .. } => Some(field),
        _ => None,
    };
    let ii = intermediate_integral_residual(sys, u, points, tolerance)?;
    let lag = lagrangian_residual(u, sys.metric(), points, field, tolerance)?;
    let div = divergence_residual(u, sys.metric(), points, tolerance)?;
    let hj = hamilton_jacobi_check(sys, u, points, tolerance)?;
    let constants = match hj.quantity {
        "kinetic" => FoundConstants { energy: None, m2: Some(2.0 * hj.constant) },
        _ => FoundConstants { energy: Some(hj.constant), m2: None },
    };
    Ok(FieldClassification {
        intermediate_integral: ii.verdict,
        lagrangian: lag.verdict,
        divergence_free: div.verdict,
        hj_constant: hj.verdict,
        constants,
        residuals: ClassificationResiduals {
            intermediate_integral: ii.max,
            lagrangian: lag.max,
            divergence: div.max,
            hj_spread: hj.spread,
        },
        tolerance,
        sample_count: points.len(),
        skipped: ii.skipped.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyEntry {
    pub start: Vec<f64>,
    pub max_deviation: f64,
    pub end_time: f64,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub entries: Vec<ConsistencyEntry>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub verdict: bool,
}

/// Flows the system from `(p, u(p))` for each start and tracks
/// `‖v(t) − u(x(t))‖∞` along the recorded samples.
pub fn trajectory_consistency(
    sys: &MechanicalSystem,
    u: &CandidateField,
    starts: &[Vec<f64>],
    t_end: f64,
    config: &IntegratorConfig,
    tolerance: f64,
) -> Result<ConsistencyReport, AnalysisError> {
    u.check_metric(sys.metric())?;
    let mut entries = Vec::with_capacity(starts.len());
    for p in starts {
        let s0 = State::new(p.clone(), u.value(sys.metric(), p)?);
        let traj = integrate(sys, &s0, (0.0, t_end), config, &[], false)?;
        let mut max_deviation: f64 = 0.0;
        for s in &traj.states {
            let expected = u.value(sys.metric(), &s.x)?;
            let dev = s.v.iter().zip(&expected).fold(0.0, |m: f64, (v, e)| m.max((v - e).abs()));
            max_deviation = max_deviation.max(dev);
        }
        entries.push(ConsistencyEntry { start: p.clone(), max_deviation, end_time: traj.last_time(), termination: traj.termination });
    }
    let max_deviation = entries.iter().fold(0.0, |m: f64, e| m.max(e.max_deviation));
    let verdict = entries.iter().all(|e| !e.termination.is_failure()) && max_deviation <= tolerance;
    Ok(ConsistencyReport { entries, max_deviation, tolerance, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Chart;
    use crate::mechanics::make_lorentz_system;

    fn plane() -> Chart {
        Chart::new(["x", "y"]).unwrap()
    }

    fn geodesic(chart: &Chart) -> MechanicalSystem {
        MechanicalSystem::new(Metric::euclidean(chart), WorkForm::Zero).unwrap()
    }

    fn explicit(chart: &Chart, comps: &[&str]) -> CandidateField {
        CandidateField::Explicit(VectorField::parse(chart, comps).unwrap())
    }

    fn grad(chart: &Chart, f: &str) -> CandidateField {
        CandidateField::gradient_phase(ScalarField::parse(chart, f).unwrap(), 1.0).unwrap()
    }

    fn pts() -> Vec<Vec<f64>> {
        vec![vec![0.3, -0.2], vec![1.0, 2.0], vec![-0.7, 0.5]]
    }

    #[test]
    fn intermediate_integral_examples() {
        let c = plane();
        let sys = geodesic(&c);
        let r = intermediate_integral_residual(&sys, &grad(&c, "2*x + y"), &pts(), DEFAULT_TOLERANCE).unwrap();
        assert!(r.verdict && r.max == 0.0);
        let r = intermediate_integral_residual(&sys, &explicit(&c, &["y", "0"]), &pts(), DEFAULT_TOLERANCE).unwrap();
        assert!(r.verdict && r.max < 1e-14);
        let r = intermediate_integral_residual(&sys, &explicit(&c, &["-y", "x"]), &[vec![1.0, 2.0]], DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.entries[0].components, vec![-1.0, -2.0]);
        assert!(!r.verdict);
    }

    #[test]
    fn lagrangian_examples() {
        let c = plane();
        let m = Metric::euclidean(&c);
        let r = lagrangian_residual(&grad(&c, "x^2*y + sin(x*y)"), &m, &pts(), None, DEFAULT_TOLERANCE).unwrap();
        assert!(r.max < 1e-14);
        let r = lagrangian_residual(&explicit(&c, &["y", "0"]), &m, &pts(), None, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.entries[0].components, vec![-1.0]);
        // F = d(i_A T₂) for A = (-y/2, x/2) is dx∧dy.
        let a = VectorField::parse(&c, &["-y/2", "x/2"]).unwrap();
        let f = TwoFormField::parse(&c, &["1"]).unwrap();
        let u = CandidateField::lorentz_phase(ScalarField::parse(&c, "x*y + y^3").unwrap(), a, 1.0).unwrap();
        let r = lagrangian_residual(&u, &m, &pts(), Some(&f), DEFAULT_TOLERANCE).unwrap();
        assert!(r.max < 1e-14, "{}", r.max);
    }

    #[test]
    fn hamilton_jacobi_examples() {
        let c = plane();
        let r = hamilton_jacobi_check(&geodesic(&c), &grad(&c, "2*x + y"), &pts(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.constant, 2.5);
        assert_eq!(r.spread, 0.0);
        let osc =
            MechanicalSystem::new(Metric::euclidean(&c), WorkForm::Potential(ScalarField::parse(&c, "0.5*(x^2 + y^2)").unwrap())).unwrap();
        let r = hamilton_jacobi_check(&osc, &grad(&c, "x^2/2"), &pts(), DEFAULT_TOLERANCE).unwrap();
        assert!(r.spread > 0.1 && !r.verdict);
        let general = MechanicalSystem::new(
            Metric::euclidean(&c),
            WorkForm::GeneralHorizontal(vec![c.parse_phase("x_dot").unwrap(), c.parse_phase("0").unwrap()]),
        )
        .unwrap();
        assert!(matches!(
            hamilton_jacobi_check(&general, &grad(&c, "x"), &pts(), DEFAULT_TOLERANCE),
            Err(AnalysisError::Unsupported { .. })
        ));
    }

    #[test]
    fn laplacian_identity_on_flat_and_indefinite() {
        let c = plane();
        let r = laplacian_identity_residual(&ScalarField::parse(&c, "2*x + y").unwrap(), &Metric::euclidean(&c), &pts(), 1e-12).unwrap();
        assert!(r.max <= 1e-12);
        let mink = Metric::preset("minkowski", &c).unwrap();
        let r = laplacian_identity_residual(&ScalarField::parse(&c, "x^2").unwrap(), &mink, &pts(), 1e-8).unwrap();
        assert!(r.verdict, "{}", r.max);
    }

    #[test]
    fn schrodinger_plane_wave_and_negative_control() {
        let c = plane();
        let m = Metric::euclidean(&c);
        let f = ScalarField::parse(&c, "2*x + y").unwrap();
        let r = schrodinger_residual(&m, None, &f, 1.0, 2.5, &pts(), 1e-12).unwrap();
        assert!(r.residual.verdict && r.residual.max <= 1e-12);

        let line = Chart::new(["x"]).unwrap();
        let f = ScalarField::parse(&line, "x^2").unwrap();
        let r = schrodinger_residual(&Metric::euclidean(&line), None, &f, 1.0, 2.0, &[vec![1.0]], DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.residual.entries[0].components, vec![0.0, 1.0]);
        assert_eq!(r.residual.max, 1.0);
        assert_eq!(r.harmonicity.max, 2.0);
        assert!(!r.residual.verdict);
    }

    #[test]
    fn klein_gordon_minkowski_example() {
        let c = Chart::new(["t", "x"]).unwrap();
        let m = Metric::preset("minkowski", &c).unwrap();
        let a = VectorField::parse(&c, &["0.3", "0"]).unwrap();
        let f = ScalarField::parse(&c, "t + 0.5*x").unwrap();
        let r = klein_gordon_residual(&m, Some(&a), &f, 1.0, Some(-1.44), &pts(), 1e-12).unwrap();
        assert!(r.verdict && r.residual.max <= 1e-12);
        let t = &r.terms[0];
        assert!((t.laplacian[0] - 0.75).abs() < 1e-12 && t.laplacian[1] == 0.0);
        assert!((t.potential - 0.6).abs() < 1e-12);
        assert!((t.mass + 1.35).abs() < 1e-12);
        let auto = klein_gordon_residual(&m, Some(&a), &f, 1.0, None, &pts(), 1e-12).unwrap();
        assert!(auto.m2_derived && (auto.m2 + 1.44).abs() < 1e-12);

        let g = ScalarField::parse(&c, "x^2").unwrap();
        let r = klein_gordon_residual(&m, Some(&a), &g, 1.0, None, &pts(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.divergence.max, 2.0);
        assert!(!r.verdict);
    }

    #[test]
    fn current_examples() {
        let c = plane();
        let m = Metric::euclidean(&c);
        let r = current_from_field(&TwoFormField::parse(&c, &["3"]).unwrap(), &m, &pts(), DEFAULT_TOLERANCE).unwrap();
        assert!(r.entries.iter().all(|e| e.current == vec![0.0, 0.0]));
        let r = current_from_field(&TwoFormField::parse(&c, &["x"]).unwrap(), &m, &pts(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.entries[0].current, vec![0.0, -1.0]);
        assert!(r.verdict);
    }

    #[test]
    fn classification_examples() {
        let c = plane();
        let sys = geodesic(&c);
        let r = classify_field(&sys, &grad(&c, "2*x + y"), &pts(), DEFAULT_TOLERANCE).unwrap();
        assert!(r.all_pass());
        assert_eq!(r.constants.energy, Some(2.5));
        let r = classify_field(&sys, &explicit(&c, &["y", "0"]), &pts(), DEFAULT_TOLERANCE).unwrap();
        assert!(r.intermediate_integral && !r.lagrangian);
        // T(u) = y²/2 varies, so the Hamilton–Jacobi check fails too.
        assert_eq!(r.failures(), vec!["lagrangian", "hj_constant"]);
    }

    #[test]
    fn lorentz_phase_with_constant_potential_passes_all() {
        let c = plane();
        let a = VectorField::parse(&c, &["0.2", "-0.1"]).unwrap();
        let lorentz = make_lorentz_system(Metric::euclidean(&c), TwoFormField::parse(&c, &["0"]).unwrap(), Some(a.clone())).unwrap();
        let u = CandidateField::lorentz_phase(ScalarField::parse(&c, "x - 2*y").unwrap(), a, 1.0).unwrap();
        let r = classify_field(&lorentz, &u, &pts(), DEFAULT_TOLERANCE).unwrap();
        assert!(r.all_pass(), "{r:?}");
        let m2 = r.constants.m2.unwrap();
        assert!((m2 - (0.8f64.powi(2) + 1.9f64.powi(2))).abs() < 1e-12);
    }

    #[test]
    fn shear_flow_is_followed_by_trajectories() {
        let c = plane();
        let r = trajectory_consistency(&geodesic(&c), &explicit(&c, &["y", "0"]), &pts(), 1.0, &IntegratorConfig::default(), 1e-6).unwrap();
        assert!(r.verdict, "{}", r.max_deviation);
        let r =
            trajectory_consistency(&geodesic(&c), &explicit(&c, &["-y", "x"]), &pts(), 1.0, &IntegratorConfig::default(), 1e-6).unwrap();
        assert!(!r.verdict);
    }

    #[test]
    fn rejects_bad_h_and_dimension() {
        let c = plane();
        assert!(CandidateField::gradient_phase(ScalarField::parse(&c, "x").unwrap(), 0.0).is_err());
        let line = Chart::new(["x"]).unwrap();
        let r = intermediate_integral_residual(&geodesic(&line), &grad(&c, "x"), &pts(), DEFAULT_TOLERANCE);
        assert!(matches!(r, Err(AnalysisError::InvalidCandidate(_))));
    }

    #[test]
    fn domain_failures_are_skipped() {
        let c = plane();
        let f = ScalarField::parse(&c, "log(x)").unwrap();
        let r = schrodinger_residual(&Metric::euclidean(&c), None, &f, 1.0, 0.0, &pts(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.residual.skipped.len(), 1);
        assert_eq!(r.residual.entries.len(), 2);
    }
}
