use std::sync::Arc;

use crate::exprlang::{Expr, ParseError};

use super::GeometryError;

/// Suffix appended to coordinate names to name velocity components in
/// expressions over the tangent bundle (`x` → `x_dot`).
pub const VELOCITY_SUFFIX: &str = "_dot";

/// One coordinate chart: ordered names and an optional open domain box.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    coords: Arc<[String]>,
    phase_coords: Arc<[String]>,
    bounds: Option<Vec<(f64, f64)>>,
}

impl Chart {
    pub fn new<S: Into<String>>(coords: impl IntoIterator<Item = S>) -> Result<Chart, GeometryError> {
        let coords: Vec<String> = coords.into_iter().map(Into::into).collect();
        if coords.is_empty() {
            return Err(GeometryError::InvalidChart("a chart needs at least one coordinate".into()));
        }
        let phase: Vec<String> = coords.iter().cloned().chain(coords.iter().map(|c| format!("{c}{VELOCITY_SUFFIX}"))).collect();
        // Parsing a trivial expression runs the identifier/duplicate checks.
        Expr::parse("0", &phase).map_err(|e| GeometryError::InvalidChart(e.to_string()))?;
        Ok(Chart { coords: coords.into(), phase_coords: phase.into(), bounds: None })
    }

    /// Euclidean-style names `q1..qn`.
    pub fn numbered(n: usize) -> Chart {
        Chart::new((1..=n).map(|i| format!("q{i}"))).expect("numbered coordinates are valid")
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Chart, GeometryError> {
        if bounds.len() != self.dimension() {
            return Err(GeometryError::Dimension { what: "chart bounds", expected: self.dimension(), found: bounds.len() });
        }
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(GeometryError::InvalidChart(format!("empty interval ({lo}, {hi})")));
        }
        self.bounds = Some(bounds);
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &Arc<[String]> {
        &self.coords
    }

    /// Coordinates followed by velocity names; `2n` entries.
    pub fn phase_coords(&self) -> &Arc<[String]> {
        &self.phase_coords
    }

    pub fn bounds(&self) -> Option<&[(f64, f64)]> {
        self.bounds.as_deref()
    }

    /// The declared box, or `[-1, 1]^n` when unbounded.
    pub fn sample_box(&self) -> Vec<(f64, f64)> {
        self.bounds.clone().unwrap_or_else(|| vec![(-1.0, 1.0); self.dimension()])
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dimension()
            && point.iter().all(|x| x.is_finite())
            && self.bounds.as_ref().is_none_or(|b| point.iter().zip(b).all(|(x, (lo, hi))| lo < x && x < hi))
    }

    pub fn check_point(&self, point: &[f64]) -> Result<(), GeometryError> {
        if point.len() != self.dimension() {
            return Err(GeometryError::Dimension { what: "point", expected: self.dimension(), found: point.len() });
        }
        if !self.contains(point) {
            return Err(GeometryError::OutsideDomain { point: point.to_vec() });
        }
        Ok(())
    }

    pub fn parse(&self, source: &str) -> Result<Expr, ParseError> {
        Expr::parse_shared(source, &self.coords)
    }

    /// Parse over `(x, x_dot)`.
    pub fn parse_phase(&self, source: &str) -> Result<Expr, ParseError> {
        Expr::parse_shared(source, &self.phase_coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_coordinates_append_velocity_names() {
        let chart = Chart::new(["t", "q"]).unwrap();
        assert_eq!(&chart.phase_coords()[..], ["t", "q", "t_dot", "q_dot"]);
        let e = chart.parse_phase("q*t_dot").unwrap();
        assert_eq!(e.eval(&[0.0, 2.0, 3.0, 0.0]).unwrap(), 6.0);
    }

    #[test]
    fn invalid_charts_are_rejected() {
        assert!(Chart::new(Vec::<String>::new()).is_err());
        assert!(Chart::new(["x", "x"]).is_err());
        assert!(Chart::new(["x", "x_dot"]).is_err());
        assert!(Chart::numbered(2).with_bounds(vec![(0.0, 1.0), (2.0, 2.0)]).is_err());
    }

    #[test]
    fn domain_box_is_open() {
        let chart = Chart::numbered(1).with_bounds(vec![(0.0, 1.0)]).unwrap();
        assert!(chart.contains(&[0.5]));
        assert!(!chart.contains(&[0.0]));
        assert!(matches!(chart.check_point(&[1.5]), Err(GeometryError::OutsideDomain { .. })));
        assert!(matches!(chart.check_point(&[0.5, 0.5]), Err(GeometryError::Dimension { .. })));
    }
}
