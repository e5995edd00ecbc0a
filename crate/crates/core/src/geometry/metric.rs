use nalgebra::DMatrix;

use crate::exprlang::{Expr, Jet2};

use super::{Chart, GeometryError};

/// Default threshold on `|det g|` below which a point is rejected.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

#[inline]
fn packed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// A metric given by coordinate expressions, stored upper-triangular.
///
/// No signature is assumed; nondegeneracy is checked at every point where
/// the metric is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    chart: Chart,
    components: Vec<Expr>,
    degeneracy_tolerance: f64,
}

/// A named metric from the built-in catalog.
#[derive(Clone, Debug, PartialEq)]
pub struct PresetInfo {
    pub name: &'static str,
    /// `None` for presets defined in every dimension.
    pub dimension: Option<usize>,
    pub description: &'static str,
}

pub const PRESETS: [PresetInfo; 5] = [
    PresetInfo { name: "euclidean", dimension: None, description: "identity metric" },
    PresetInfo { name: "minkowski", dimension: None, description: "diag(-1, 1, ..., 1)" },
    PresetInfo { name: "polar2", dimension: Some(2), description: "plane in polar coordinates (r, phi)" },
    PresetInfo { name: "sphere2", dimension: Some(2), description: "unit sphere in (theta, phi)" },
    PresetInfo { name: "hyperbolic2", dimension: Some(2), description: "Poincare half-plane, y = q2 > 0" },
];

/// Component sources of a preset in dimension `n`, written over `q1..qn`.
pub fn preset_components(name: &str, n: usize) -> Option<Vec<Vec<String>>> {
    let diag = |entries: Vec<&str>| -> Vec<Vec<String>> {
        let n = entries.len();
        (0..n).map(|i| (0..n).map(|j| if i == j { entries[i].to_string() } else { "0".to_string() }).collect()).collect()
    };
    match (name, n) {
        ("euclidean", n) if n >= 1 => Some(diag(vec!["1"; n])),
        ("minkowski", n) if n >= 2 => {
            let mut entries = vec!["1"; n];
            entries[0] = "-1";
            Some(diag(entries))
        }
        ("polar2", 2) => Some(diag(vec!["1", "q1^2"])),
        ("sphere2", 2) => Some(diag(vec!["1", "sin(q1)^2"])),
        ("hyperbolic2", 2) => Some(diag(vec!["1/q2^2", "1/q2^2"])),
        _ => None,
    }
}

impl Metric {
    /// From a full `n × n` matrix of expressions; must be symmetric as trees.
    pub fn from_matrix(chart: &Chart, rows: Vec<Vec<Expr>>) -> Result<Metric, GeometryError> {
        let n = chart.dimension();
        if rows.len() != n {
            return Err(GeometryError::Dimension { what: "metric rows", expected: n, found: rows.len() });
        }
        for row in &rows {
            if row.len() != n {
                return Err(GeometryError::Dimension { what: "metric columns", expected: n, found: row.len() });
            }
            for e in row {
                if e.dimension() != n {
                    return Err(GeometryError::Dimension { what: "metric component arity", expected: n, found: e.dimension() });
                }
            }
        }
        let mut components = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                if rows[i][j].node() != rows[j][i].node() {
                    return Err(GeometryError::NotSymmetric { i, j });
                }
                components.push(rows[i][j].rebind(chart.coords()));
            }
        }
        Ok(Metric { chart: chart.clone(), components, degeneracy_tolerance: DEGENERACY_TOLERANCE })
    }

    pub fn parse<S: AsRef<str>>(chart: &Chart, rows: &[Vec<S>]) -> Result<Metric, GeometryError> {
        let exprs = rows
            .iter()
            .map(|row| row.iter().map(|s| chart.parse(s.as_ref())).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Metric::from_matrix(chart, exprs)
    }

    pub fn diagonal<S: AsRef<str>>(chart: &Chart, entries: &[S]) -> Result<Metric, GeometryError> {
        let n = chart.dimension();
        if entries.len() != n {
            return Err(GeometryError::Dimension { what: "metric diagonal", expected: n, found: entries.len() });
        }
        let rows: Vec<Vec<&str>> = (0..n).map(|i| (0..n).map(|j| if i == j { entries[i].as_ref() } else { "0" }).collect()).collect();
        Metric::parse(chart, &rows)
    }

    /// A catalog metric over `chart`, matched to its coordinates by position.
    pub fn preset(name: &str, chart: &Chart) -> Result<Metric, GeometryError> {
        let n = chart.dimension();
        let sources = preset_components(name, n).ok_or_else(|| GeometryError::UnknownPreset { name: name.to_string(), dimension: n })?;
        let placeholder = Chart::numbered(n);
        let rows = sources
            .iter()
            .map(|row| row.iter().map(|s| placeholder.parse(s).map(|e| e.rebind(chart.coords()))).collect())
            .collect::<Result<Vec<Vec<Expr>>, _>>()?;
        Metric::from_matrix(chart, rows)
    }

    pub fn euclidean(chart: &Chart) -> Metric {
        Metric::preset("euclidean", chart).expect("euclidean is defined in every dimension")
    }

    pub fn with_degeneracy_tolerance(mut self, tolerance: f64) -> Metric {
        self.degeneracy_tolerance = tolerance;
        self
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dimension(&self) -> usize {
        self.chart.dimension()
    }

    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.components[packed(self.dimension(), i, j)]
    }

    pub fn component_sources(&self) -> Vec<Vec<String>> {
        let n = self.dimension();
        (0..n).map(|i| (0..n).map(|j| self.component(i, j).to_string()).collect()).collect()
    }

    pub fn degeneracy_tolerance(&self) -> f64 {
        self.degeneracy_tolerance
    }

    /// Metric data with first derivatives.
    pub fn at(&self, point: &[f64]) -> Result<MetricAt, GeometryError> {
        self.at_order(point, 1)
    }

    pub fn at_order(&self, point: &[f64], order: u8) -> Result<MetricAt, GeometryError> {
        self.chart.check_point(point)?;
        let n = self.dimension();
        let jets = self.components.iter().map(|e| e.eval_jet(point, order)).collect::<Result<Vec<_>, _>>()?;
        let g = DMatrix::from_fn(n, n, |i, j| jets[packed(n, i, j)].value());
        let lu = g.clone().lu();
        let det = lu.determinant();
        if !(det.abs() > self.degeneracy_tolerance) {
            return Err(GeometryError::Degenerate { det, point: point.to_vec() });
        }
        let inverse = lu.try_inverse().ok_or_else(|| GeometryError::Degenerate { det, point: point.to_vec() })?;
        let dg = if order >= 1 {
            (0..n).map(|k| DMatrix::from_fn(n, n, |i, j| jets[packed(n, i, j)].gradient()[k])).collect()
        } else {
            Vec::new()
        };
        Ok(MetricAt { point: point.to_vec(), order, g, inverse, det, dg, jets })
    }
}

/// A metric evaluated at one point.
#[derive(Clone, Debug)]
pub struct MetricAt {
    point: Vec<f64>,
    order: u8,
    g: DMatrix<f64>,
    inverse: DMatrix<f64>,
    det: f64,
    dg: Vec<DMatrix<f64>>,
    jets: Vec<Jet2>,
}

impl MetricAt {
    pub fn dimension(&self) -> usize {
        self.g.nrows()
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// The cometric `g^{ij}`.
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.g[(i, j)]
    }

    pub fn ginv(&self, i: usize, j: usize) -> f64 {
        self.inverse[(i, j)]
    }

    /// `∂_k g_ij`; requires order ≥ 1.
    pub fn dg(&self, k: usize) -> &DMatrix<f64> {
        &self.dg[k]
    }

    /// `∂_k ∂_l g_ij`; requires order 2.
    pub fn d2g(&self, k: usize, l: usize) -> DMatrix<f64> {
        let n = self.dimension();
        DMatrix::from_fn(n, n, |i, j| self.jets[packed(n, i, j)].hessian(k, l))
    }

    pub fn component_jet(&self, i: usize, j: usize) -> &Jet2 {
        &self.jets[packed(self.dimension(), i, j)]
    }

    pub fn raise(&self, covector: &[f64]) -> Vec<f64> {
        let n = self.dimension();
        (0..n).map(|i| (0..n).map(|j| self.inverse[(i, j)] * covector[j]).sum()).collect()
    }

    pub fn lower(&self, vector: &[f64]) -> Vec<f64> {
        let n = self.dimension();
        (0..n).map(|i| (0..n).map(|j| self.g[(i, j)] * vector[j]).sum()).collect()
    }

    /// `g_ij u^i v^j`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.dimension();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.g[(i, j)] * u[i] * v[j];
            }
        }
        acc
    }

    /// `g^ij α_i β_j`.
    pub fn co_inner(&self, alpha: &[f64], beta: &[f64]) -> f64 {
        let n = self.dimension();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.inverse[(i, j)] * alpha[i] * beta[j];
            }
        }
        acc
    }

    /// `∂_k g^{ij} = -(G ∂_k g G)_{ij}`.
    pub fn dginv(&self, k: usize) -> DMatrix<f64> {
        -(&self.inverse * &self.dg[k] * &self.inverse)
    }

    /// `∂_k ln sqrt|det g| = ½ tr(G ∂_k g)` for every k.
    pub fn log_volume_gradient(&self) -> Vec<f64> {
        (0..self.dimension()).map(|k| 0.5 * (&self.inverse * &self.dg[k]).trace()).collect()
    }

    /// Second-order jets of the cometric entries; requires order 2.
    pub fn inverse_jets(&self) -> Vec<Vec<Jet2>> {
        let n = self.dimension();
        let gi = &self.inverse;
        let first: Vec<DMatrix<f64>> = (0..n).map(|k| self.dginv(k)).collect();
        let mut second = vec![vec![DMatrix::zeros(n, n); n]; n];
        for k in 0..n {
            for l in k..n {
                let a = gi * &self.dg[k] * gi * &self.dg[l] * gi;
                let b = gi * &self.dg[l] * gi * &self.dg[k] * gi;
                let c = gi * self.d2g(k, l) * gi;
                let m = a + b - c;
                second[k][l] = m.clone();
                second[l][k] = m;
            }
        }
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let grad: Vec<f64> = (0..n).map(|k| first[k][(i, j)]).collect();
                        let hess: Vec<Vec<f64>> = (0..n).map(|k| (0..n).map(|l| second[k][l][(i, j)]).collect()).collect();
                        Jet2::from_parts(gi[(i, j)], Some(&grad), Some(&hess))
                    })
                    .collect()
            })
            .collect()
    }

    /// Second-order jet of `sqrt|det g|`; requires order 2.
    pub fn volume_jet(&self) -> Jet2 {
        let n = self.dimension();
        let gi = &self.inverse;
        let l1: Vec<f64> = (0..n).map(|k| (gi * &self.dg[k]).trace()).collect();
        let s = self.det.abs().sqrt();
        let grad: Vec<f64> = l1.iter().map(|lk| 0.5 * s * lk).collect();
        let hess: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|l| {
                        let l2 = (gi * self.d2g(k, l)).trace() - (gi * &self.dg[k] * gi * &self.dg[l]).trace();
                        s * (0.5 * l2 + 0.25 * l1[k] * l1[l])
                    })
                    .collect()
            })
            .collect();
        Jet2::from_parts(s, Some(&grad), Some(&hess))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_is_identity() {
        let m = Metric::euclidean(&Chart::numbered(2)).at(&[0.3, -2.0]).unwrap();
        assert_eq!(m.matrix(), &DMatrix::identity(2, 2));
        assert_eq!(m.det(), 1.0);
    }

    #[test]
    fn minkowski_inverse_and_sign() {
        let m = Metric::preset("minkowski", &Chart::numbered(2)).unwrap().at(&[0.0, 0.0]).unwrap();
        assert_eq!(m.inverse(), &DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0])));
        assert_eq!(m.det(), -1.0);
    }

    #[test]
    fn sphere_at_equator() {
        let m = Metric::preset("sphere2", &Chart::numbered(2)).unwrap();
        let at = m.at(&[std::f64::consts::FRAC_PI_2, 0.7]).unwrap();
        assert!((at.g(1, 1) - 1.0).abs() < 1e-15);
        assert_eq!(at.g(0, 1), 0.0);
        let identity = at.inverse() * at.matrix();
        assert!((identity - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn degenerate_points_are_rejected() {
        let m = Metric::preset("sphere2", &Chart::numbered(2)).unwrap();
        assert!(matches!(m.at(&[0.0, 0.0]), Err(GeometryError::Degenerate { .. })));
        let light = Metric::parse(&Chart::numbered(2), &[vec!["0", "1"], vec!["1", "0"]]).unwrap();
        assert!(light.at(&[0.0, 0.0]).is_ok());
        let null = Metric::parse(&Chart::numbered(2), &[vec!["1", "1"], vec!["1", "1"]]).unwrap();
        assert!(matches!(null.at(&[0.0, 0.0]), Err(GeometryError::Degenerate { .. })));
    }

    #[test]
    fn asymmetric_components_are_rejected() {
        let err = Metric::parse(&Chart::numbered(2), &[vec!["1", "q1"], vec!["q2", "1"]]).unwrap_err();
        assert!(matches!(err, GeometryError::NotSymmetric { i: 0, j: 1 }));
    }

    #[test]
    fn presets_bind_to_chart_names() {
        let chart = Chart::new(["theta", "phi"]).unwrap();
        let m = Metric::preset("sphere2", &chart).unwrap();
        assert_eq!(m.component(1, 1).to_string(), "sin(theta)^2");
        assert!(matches!(Metric::preset("sphere2", &Chart::numbered(3)), Err(GeometryError::UnknownPreset { .. })));
    }

    #[test]
    fn volume_and_inverse_jets_match_closed_form_on_polar() {
        let m = Metric::preset("polar2", &Chart::numbered(2)).unwrap();
        let at = m.at_order(&[2.0, 0.3], 2).unwrap();
        let s = at.volume_jet();
        assert!((s.value() - 2.0).abs() < 1e-15);
        assert!((s.gradient()[0] - 1.0).abs() < 1e-15);
        assert!(s.hessian(0, 0).abs() < 1e-15);
        // g^{φφ} = r^-2: derivative -2 r^-3, second derivative 6 r^-4
        let inv = at.inverse_jets();
        assert!((inv[1][1].gradient()[0] + 0.25).abs() < 1e-15);
        assert!((inv[1][1].hessian(0, 0) - 0.375).abs() < 1e-15);
    }
}
