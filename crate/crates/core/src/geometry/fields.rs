use crate::exprlang::{Expr, Jet2};

use super::{Chart, GeometryError};

fn check_arity(chart: &Chart, exprs: &[Expr], expected: usize, what: &'static str) -> Result<(), GeometryError> {
    if exprs.len() != expected {
        return Err(GeometryError::Dimension { what, expected, found: exprs.len() });
    }
    if let Some(e) = exprs.iter().find(|e| e.dimension() != chart.dimension()) {
        return Err(GeometryError::Dimension { what, expected: chart.dimension(), found: e.dimension() });
    }
    Ok(())
}

fn parse_all<S: AsRef<str>>(chart: &Chart, sources: &[S]) -> Result<Vec<Expr>, GeometryError> {
    Ok(sources.iter().map(|s| chart.parse(s.as_ref())).collect::<Result<Vec<_>, _>>()?)
}

fn jets_of(exprs: &[Expr], point: &[f64], order: u8) -> Result<Vec<Jet2>, GeometryError> {
    Ok(exprs.iter().map(|e| e.eval_jet(point, order)).collect::<Result<Vec<_>, _>>()?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    expr: Expr,
}

impl ScalarField {
    pub fn new(chart: &Chart, expr: Expr) -> Result<Self, GeometryError> {
        check_arity(chart, std::slice::from_ref(&expr), 1, "scalar field")?;
        Ok(Self { expr })
    }

    pub fn parse(chart: &Chart, source: &str) -> Result<Self, GeometryError> {
        Self::new(chart, chart.parse(source)?)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn jet(&self, point: &[f64], order: u8) -> Result<Jet2, GeometryError> {
        Ok(self.expr.eval_jet(point, order)?)
    }

    pub fn value(&self, point: &[f64]) -> Result<f64, GeometryError> {
        Ok(self.expr.eval(point)?)
    }
}

/// Covariant components `α_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneFormField {
    components: Vec<Expr>,
}

impl OneFormField {
    pub fn new(chart: &Chart, components: Vec<Expr>) -> Result<Self, GeometryError> {
        check_arity(chart, &components, chart.dimension(), "one-form components")?;
        Ok(Self { components })
    }

    pub fn parse<S: AsRef<str>>(chart: &Chart, sources: &[S]) -> Result<Self, GeometryError> {
        Self::new(chart, parse_all(chart, sources)?)
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn jets(&self, point: &[f64], order: u8) -> Result<Vec<Jet2>, GeometryError> {
        jets_of(&self.components, point, order)
    }

    pub fn values(&self, point: &[f64]) -> Result<Vec<f64>, GeometryError> {
        Ok(self.jets(point, 0)?.iter().map(Jet2::value).collect())
    }
}

/// Contravariant components `u^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<Expr>,
}

impl VectorField {
    pub fn new(chart: &Chart, components: Vec<Expr>) -> Result<Self, GeometryError> {
        check_arity(chart, &components, chart.dimension(), "vector components")?;
        Ok(Self { components })
    }

    pub fn parse<S: AsRef<str>>(chart: &Chart, sources: &[S]) -> Result<Self, GeometryError> {
        Self::new(chart, parse_all(chart, sources)?)
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn jets(&self, point: &[f64], order: u8) -> Result<Vec<Jet2>, GeometryError> {
        jets_of(&self.components, point, order)
    }

    pub fn values(&self, point: &[f64]) -> Result<Vec<f64>, GeometryError> {
        Ok(self.jets(point, 0)?.iter().map(Jet2::value).collect())
    }
}

/// A 2-form stored by its `i < j` components in row-major order:
/// `(0,1), (0,2), …, (0,n-1), (1,2), …`. `F_ji = -F_ij` and `F_ii = 0`
/// are implied.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoFormField {
    dim: usize,
    components: Vec<Expr>,
}

pub(crate) fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl TwoFormField {
    pub fn new(chart: &Chart, components: Vec<Expr>) -> Result<Self, GeometryError> {
        let n = chart.dimension();
        check_arity(chart, &components, n * (n - 1) / 2, "two-form components (i<j)")?;
        Ok(Self { dim: n, components })
    }

    pub fn parse<S: AsRef<str>>(chart: &Chart, sources: &[S]) -> Result<Self, GeometryError> {
        Self::new(chart, parse_all(chart, sources)?)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// The `i < j` expressions in storage order.
    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.components[pair_index(self.dim, i, j)]
    }

    /// Full antisymmetric matrix of jets.
    pub fn jets(&self, point: &[f64], order: u8) -> Result<Vec<Vec<Jet2>>, GeometryError> {
        let n = self.dim;
        let upper = jets_of(&self.components, point, order)?;
        let zero = Jet2::constant(0.0, n, order);
        let mut out = vec![vec![zero; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let jet = &upper[pair_index(n, i, j)];
                out[j][i] = -jet;
                out[i][j] = jet.clone();
            }
        }
        Ok(out)
    }

    pub fn values(&self, point: &[f64]) -> Result<Vec<Vec<f64>>, GeometryError> {
        Ok(self.jets(point, 0)?.iter().map(|row| row.iter().map(Jet2::value).collect()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_form_is_antisymmetric() {
        let chart = Chart::numbered(3);
        let f = TwoFormField::parse(&chart, &["q3", "1", "q1*q2"]).unwrap();
        let m = f.values(&[2.0, 3.0, 5.0]).unwrap();
        assert_eq!(m[0][1], 5.0);
        assert_eq!(m[1][0], -5.0);
        assert_eq!(m[0][2], 1.0);
        assert_eq!(m[2][1], -6.0);
        assert_eq!(m[1][1], 0.0);
    }

    #[test]
    fn component_counts_are_checked() {
        let chart = Chart::numbered(3);
        assert!(TwoFormField::parse(&chart, &["1", "2"]).is_err());
        assert!(OneFormField::parse(&chart, &["1", "2"]).is_err());
        let other = Chart::numbered(2);
        let e = other.parse("q1").unwrap();
        assert!(ScalarField::new(&chart, e).is_err());
    }
}
