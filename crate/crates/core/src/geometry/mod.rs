//! Pointwise pseudo-Riemannian kernels over a single chart.
//!
//! Everything here is a pure function of a point: metric and cometric,
//! Christoffel symbols, gradient, divergence, Laplace–Beltrami, exterior
//! derivatives of 1- and 2-forms, the codifferential of a 2-form, and the
//! symmetrized covariant derivative of a 1-form.
//!
//! Sign conventions: `(dα)_ij = ∂_i α_j − ∂_j α_i` and
//! `(δF)_j = −|g|^{-1/2} ∂_i(|g|^{1/2} F^{ik}) g_kj`.

mod chart;
mod fields;
mod metric;

use thiserror::Error;

use crate::exprlang::{DomainError, Jet2, ParseError};

pub use chart::{Chart, VELOCITY_SUFFIX};
pub use fields::{OneFormField, ScalarField, TwoFormField, VectorField};
pub use metric::{preset_components, Metric, MetricAt, PresetInfo, DEGENERACY_TOLERANCE, PRESETS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate metric at {point:?}: det = {det:e}")]
    Degenerate { det: f64, point: Vec<f64> },
    #[error("point {point:?} is outside the chart domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("{what}: expected {expected}, found {found}")]
    Dimension { what: &'static str, expected: usize, found: usize },
    #[error("metric components ({i},{j}) and ({j},{i}) differ")]
    NotSymmetric { i: usize, j: usize },
    #[error("no preset metric `{name}` in dimension {dimension}")]
    UnknownPreset { name: String, dimension: usize },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// `Γ^k_ij` at one point, symmetric in the lower pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn from_metric(m: &MetricAt) -> Christoffel {
        let n = m.dimension();
        let mut data = vec![0.0; n * n * n];
        // Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
        let mut lowered = vec![0.0; n];
        for i in 0..n {
            for j in i..n {
                for (l, slot) in lowered.iter_mut().enumerate() {
                    *slot = 0.5 * (m.dg(i)[(j, l)] + m.dg(j)[(i, l)] - m.dg(l)[(i, j)]);
                }
                for k in 0..n {
                    let value: f64 = (0..n).map(|l| m.ginv(k, l) * lowered[l]).sum();
                    data[k * n * n + i * n + j] = value;
                    data[k * n * n + j * n + i] = value;
                }
            }
        }
        Christoffel { dim: n, data }
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.dim;
        self.data[k * n * n + i * n + j]
    }

    /// `Γ^k_ij v^i v^j` for each k.
    pub fn contract(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|k| {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += self.get(k, i, j) * v[i] * v[j];
                    }
                }
                acc
            })
            .collect()
    }

    /// `Γ^i_ik` for each k.
    pub fn trace(&self) -> Vec<f64> {
        (0..self.dim).map(|k| (0..self.dim).map(|i| self.get(i, i, k)).sum()).collect()
    }

    /// Nested as `[k][i][j]`.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        let n = self.dim;
        (0..n).map(|k| (0..n).map(|i| (0..n).map(|j| self.get(k, i, j)).collect()).collect()).collect()
    }
}

pub fn metric_at(g: &Metric, p: &[f64]) -> Result<MetricAt, GeometryError> {
    g.at(p)
}

pub fn christoffel_at(g: &Metric, p: &[f64]) -> Result<Christoffel, GeometryError> {
    Ok(Christoffel::from_metric(&g.at(p)?))
}

/// `(grad α)^i = g^ij α_j`.
pub fn grad_one_form_at(alpha: &OneFormField, g: &Metric, p: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let m = g.at_order(p, 0)?;
    Ok(m.raise(&alpha.values(p)?))
}

/// Gradient of a scalar: raise its differential.
pub fn grad_scalar_at(f: &ScalarField, g: &Metric, p: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let m = g.at_order(p, 0)?;
    Ok(m.raise(f.jet(p, 1)?.gradient()))
}

/// `div u = ∂_i u^i + Γ^i_ik u^k`, given `jacobian[i][k] = ∂_k u^i`.
pub fn divergence_from_jacobian(m: &MetricAt, u: &[f64], jacobian: &[Vec<f64>]) -> f64 {
    let weight = m.log_volume_gradient();
    (0..m.dimension()).map(|i| jacobian[i][i] + weight[i] * u[i]).sum()
}

pub fn divergence_at(u: &VectorField, g: &Metric, p: &[f64]) -> Result<f64, GeometryError> {
    let m = g.at(p)?;
    let jets = u.jets(p, 1)?;
    let values: Vec<f64> = jets.iter().map(Jet2::value).collect();
    let jacobian: Vec<Vec<f64>> = jets.iter().map(|j| j.gradient().to_vec()).collect();
    Ok(divergence_from_jacobian(&m, &values, &jacobian))
}

/// Value and Jacobian (`[i][k] = ∂_k u^i`) of `u = grad f` from a
/// second-order jet of `f`.
pub fn gradient_field_jacobian(m: &MetricAt, f: &Jet2) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.dimension();
    let df = f.gradient();
    let u = m.raise(df);
    let dginv: Vec<_> = (0..n).map(|k| m.dginv(k)).collect();
    let jacobian =
        (0..n).map(|i| (0..n).map(|k| (0..n).map(|j| dginv[k][(i, j)] * df[j] + m.ginv(i, j) * f.hessian(j, k)).sum()).collect()).collect();
    (u, jacobian)
}

/// `Δf = g^ij (∂_i∂_j f − Γ^k_ij ∂_k f)` from a second-order jet.
pub fn laplacian_from_jet(m: &MetricAt, gamma: &Christoffel, f: &Jet2) -> f64 {
    let n = m.dimension();
    let df = f.gradient();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let gij = m.ginv(i, j);
            if gij == 0.0 {
                continue;
            }
            let connection: f64 = (0..n).map(|k| gamma.get(k, i, j) * df[k]).sum();
            acc += gij * (f.hessian(i, j) - connection);
        }
    }
    acc
}

pub fn laplacian_at(f: &ScalarField, g: &Metric, p: &[f64]) -> Result<f64, GeometryError> {
    let m = g.at(p)?;
    let gamma = Christoffel::from_metric(&m);
    Ok(laplacian_from_jet(&m, &gamma, &f.jet(p, 2)?))
}

/// `(dα)_ij = ∂_i α_j − ∂_j α_i` from first-order jets of the components.
pub fn exterior_derivative_of_jets(alpha: &[Jet2]) -> Vec<Vec<f64>> {
    let n = alpha.len();
    (0..n).map(|i| (0..n).map(|j| alpha[j].gradient()[i] - alpha[i].gradient()[j]).collect()).collect()
}

pub fn exterior_derivative_1form_at(alpha: &OneFormField, p: &[f64]) -> Result<Vec<Vec<f64>>, GeometryError> {
    Ok(exterior_derivative_of_jets(&alpha.jets(p, 1)?))
}

/// Components `(dF)_ijk = ∂_i F_jk + ∂_j F_ki + ∂_k F_ij` for `i < j < k`;
/// empty when n ≤ 2.
pub fn exterior_derivative_2form_at(f: &TwoFormField, p: &[f64]) -> Result<Vec<([usize; 3], f64)>, GeometryError> {
    let n = f.dimension();
    if n < 3 {
        return Ok(Vec::new());
    }
    let jets = f.jets(p, 1)?;
    let d = |a: usize, b: usize, k: usize| jets[a][b].gradient()[k];
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                out.push(([i, j, k], d(j, k, i) + d(k, i, j) + d(i, j, k)));
            }
        }
    }
    Ok(out)
}

/// Current data derived from a 2-form at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentAt {
    /// `(δF)_j`
    pub codifferential: Vec<f64>,
    /// `J^k = g^kj (δF)_j`
    pub current: Vec<f64>,
    /// `div J`; `None` unless second derivatives were requested.
    pub divergence: Option<f64>,
}

/// Codifferential and current through second-order jets of the weighted
/// contravariant form `|g|^{1/2} F^{ik}`.
pub fn current_at(f: &TwoFormField, g: &Metric, p: &[f64], with_divergence: bool) -> Result<CurrentAt, GeometryError> {
    let n = g.dimension();
    if f.dimension() != n {
        return Err(GeometryError::Dimension { what: "two-form", expected: n, found: f.dimension() });
    }
    let m = g.at_order(p, 2)?;
    let order = if with_divergence { 2 } else { 1 };
    let fj = f.jets(p, order)?;
    let inv = m.inverse_jets();
    let s = m.volume_jet();
    // weighted[i][k] = s g^{ia} g^{kb} F_ab
    let zero = Jet2::constant(0.0, n, order);
    let mut weighted = vec![vec![zero.clone(); n]; n];
    for i in 0..n {
        for k in (i + 1)..n {
            let mut acc = zero.clone();
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    let term = &(&inv[i][a] * &inv[k][b]) * &fj[a][b];
                    acc = &acc + &term;
                }
            }
            let w = &s * &acc;
            weighted[k][i] = -&w;
            weighted[i][k] = w;
        }
    }
    let sv = s.value();
    let current: Vec<f64> = (0..n).map(|k| -(0..n).map(|i| weighted[i][k].gradient()[i]).sum::<f64>() / sv).collect();
    let codifferential = m.lower(&current);
    let divergence = with_divergence.then(|| {
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                acc += weighted[i][k].hessian(i, k);
            }
        }
        -acc / sv
    });
    Ok(CurrentAt { codifferential, current, divergence })
}

pub fn codifferential_2form_at(f: &TwoFormField, g: &Metric, p: &[f64]) -> Result<Vec<f64>, GeometryError> {
    Ok(current_at(f, g, p, false)?.codifferential)
}

/// `S_ij = ½(∇_i τ_j + ∇_j τ_i)` with `∇_i τ_j = ∂_i τ_j − Γ^k_ij τ_k`.
pub fn sym_covariant_derivative_from(m: &MetricAt, gamma: &Christoffel, tau: &[Jet2]) -> Vec<Vec<f64>> {
    let n = m.dimension();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let connection: f64 = (0..n).map(|k| gamma.get(k, i, j) * tau[k].value()).sum();
            let value = 0.5 * (tau[j].gradient()[i] + tau[i].gradient()[j]) - connection;
            s[i][j] = value;
            s[j][i] = value;
        }
    }
    s
}

pub fn sym_covariant_derivative_at(tau: &OneFormField, g: &Metric, p: &[f64]) -> Result<Vec<Vec<f64>>, GeometryError> {
    let m = g.at(p)?;
    let gamma = Christoffel::from_metric(&m);
    Ok(sym_covariant_derivative_from(&m, &gamma, &tau.jets(p, 1)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polar() -> Metric {
        Metric::preset("polar2", &Chart::new(["r", "phi"]).unwrap()).unwrap()
    }

    #[test]
    fn flat_christoffels_vanish() {
        let g = christoffel_at(&Metric::euclidean(&Chart::numbered(3)), &[0.1, 0.2, 0.3]).unwrap();
        assert!(g.to_nested().iter().flatten().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn polar_christoffels() {
        let g = christoffel_at(&polar(), &[2.0, 0.4]).unwrap();
        assert!((g.get(0, 1, 1) + 2.0).abs() < 1e-15);
        assert!((g.get(1, 0, 1) - 0.5).abs() < 1e-15);
        assert_eq!(g.get(1, 0, 1), g.get(1, 1, 0));
    }

    #[test]
    fn sphere_christoffels() {
        let m = Metric::preset("sphere2", &Chart::numbered(2)).unwrap();
        let g = christoffel_at(&m, &[std::f64::consts::FRAC_PI_4, 0.0]).unwrap();
        assert!((g.get(0, 1, 1) + 0.5).abs() < 1e-15);
        assert!((g.get(1, 0, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_raise_indices() {
        let e2 = Metric::euclidean(&Chart::numbered(2));
        let dx = OneFormField::parse(e2.chart(), &["1", "0"]).unwrap();
        assert_eq!(grad_one_form_at(&dx, &e2, &[0.5, 0.5]).unwrap(), vec![1.0, 0.0]);
        let mk = Metric::preset("minkowski", &Chart::numbered(2)).unwrap();
        assert_eq!(grad_one_form_at(&dx, &mk, &[0.5, 0.5]).unwrap(), vec![-1.0, 0.0]);
        let f = ScalarField::parse(e2.chart(), "q1^2 + q2^2").unwrap();
        assert_eq!(grad_scalar_at(&f, &e2, &[1.0, 2.0]).unwrap(), vec![2.0, 4.0]);
    }

    #[test]
    fn divergences() {
        let e2 = Metric::euclidean(&Chart::numbered(2));
        let radial = VectorField::parse(e2.chart(), &["q1", "q2"]).unwrap();
        assert_eq!(divergence_at(&radial, &e2, &[0.3, -0.7]).unwrap(), 2.0);
        let p = polar();
        let u = VectorField::parse(p.chart(), &["1/r", "0"]).unwrap();
        assert!(divergence_at(&u, &p, &[3.0, 1.0]).unwrap().abs() < 1e-15);
        let e3 = Metric::euclidean(&Chart::numbered(3));
        let rot = VectorField::parse(e3.chart(), &["q2", "-q1", "0"]).unwrap();
        assert_eq!(divergence_at(&rot, &e3, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn laplacians() {
        let e2 = Metric::euclidean(&Chart::numbered(2));
        let f = ScalarField::parse(e2.chart(), "q1^2 + q2^2").unwrap();
        assert_eq!(laplacian_at(&f, &e2, &[0.4, 0.1]).unwrap(), 4.0);
        let p = polar();
        let r2 = ScalarField::parse(p.chart(), "r^2").unwrap();
        assert!((laplacian_at(&r2, &p, &[1.7, 0.2]).unwrap() - 4.0).abs() < 1e-12);
        let mk = Metric::preset("minkowski", &Chart::new(["t", "x"]).unwrap()).unwrap();
        let t2 = ScalarField::parse(mk.chart(), "t^2").unwrap();
        assert_eq!(laplacian_at(&t2, &mk, &[0.4, 0.1]).unwrap(), -2.0);
    }

    #[test]
    fn first_exterior_derivatives() {
        let chart = Chart::new(["x", "y"]).unwrap();
        let exact = OneFormField::parse(&chart, &["2*x*y", "x^2"]).unwrap();
        let d = exterior_derivative_1form_at(&exact, &[1.0, 2.0]).unwrap();
        assert!(d.iter().flatten().all(|&v| v == 0.0));
        let ydx = OneFormField::parse(&chart, &["y", "0"]).unwrap();
        assert_eq!(exterior_derivative_1form_at(&ydx, &[0.3, 0.3]).unwrap()[0][1], -1.0);
        let rot = OneFormField::parse(&chart, &["-y", "x"]).unwrap();
        let d = exterior_derivative_1form_at(&rot, &[0.3, 0.3]).unwrap();
        assert_eq!((d[0][1], d[1][0]), (2.0, -2.0));
    }

    #[test]
    fn second_exterior_derivatives() {
        let plane = Chart::numbered(2);
        let f2 = TwoFormField::parse(&plane, &["q1*q2"]).unwrap();
        assert!(exterior_derivative_2form_at(&f2, &[1.0, 1.0]).unwrap().is_empty());
        let space = Chart::new(["x", "y", "z"]).unwrap();
        let zdxdy = TwoFormField::parse(&space, &["z", "0", "0"]).unwrap();
        assert_eq!(exterior_derivative_2form_at(&zdxdy, &[0.0, 0.0, 0.0]).unwrap(), vec![([0, 1, 2], 1.0)]);
        let dxdy = TwoFormField::parse(&space, &["1", "0", "0"]).unwrap();
        assert_eq!(exterior_derivative_2form_at(&dxdy, &[0.0, 0.0, 0.0]).unwrap()[0].1, 0.0);
    }

    #[test]
    fn codifferential_examples() {
        let e2 = Metric::euclidean(&Chart::new(["x", "y"]).unwrap());
        let constant = TwoFormField::parse(e2.chart(), &["3"]).unwrap();
        assert_eq!(codifferential_2form_at(&constant, &e2, &[0.2, 0.1]).unwrap(), vec![0.0, 0.0]);
        let xdxdy = TwoFormField::parse(e2.chart(), &["x"]).unwrap();
        let at = current_at(&xdxdy, &e2, &[0.2, 0.1], true).unwrap();
        assert_eq!(at.codifferential, vec![0.0, -1.0]);
        assert_eq!(at.current, vec![0.0, -1.0]);
        assert_eq!(at.divergence, Some(0.0));
    }

    #[test]
    fn symmetrized_covariant_derivative() {
        let e2 = Metric::euclidean(&Chart::new(["x", "y"]).unwrap());
        let dx = OneFormField::parse(e2.chart(), &["1", "0"]).unwrap();
        assert_eq!(sym_covariant_derivative_at(&dx, &e2, &[0.5, 0.5]).unwrap(), vec![vec![0.0; 2]; 2]);
        let xdx = OneFormField::parse(e2.chart(), &["x", "0"]).unwrap();
        assert_eq!(sym_covariant_derivative_at(&xdx, &e2, &[0.5, 0.5]).unwrap(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        let p = polar();
        let dphi = OneFormField::parse(p.chart(), &["0", "1"]).unwrap();
        let s = sym_covariant_derivative_at(&dphi, &p, &[2.0, 0.0]).unwrap();
        assert!((s[0][1] + 0.5).abs() < 1e-15);
        assert!(s[0][0].abs() < 1e-15 && s[1][1].abs() < 1e-15);
    }
}
