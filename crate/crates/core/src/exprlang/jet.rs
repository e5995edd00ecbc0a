use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;

/// Value, gradient and Hessian of a scalar function at a point.
///
/// The Hessian is stored packed (upper triangle, row-major), so mixed
/// partials share one slot and the matrix is symmetric by construction.
/// `order` selects how many levels are populated: 0 keeps only the value,
/// 1 adds the gradient, 2 adds the Hessian.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Jet2 {
    order: u8,
    dim: usize,
    value: f64,
    gradient: Vec<f64>,
    hessian: Vec<f64>,
}

#[inline]
fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + j
}

impl Jet2 {
    pub fn constant(value: f64, dim: usize, order: u8) -> Self {
        let order = order.min(2);
        Self {
            order,
            dim,
            value,
            gradient: if order >= 1 { vec![0.0; dim] } else { Vec::new() },
            hessian: if order >= 2 { vec![0.0; dim * (dim + 1) / 2] } else { Vec::new() },
        }
    }

    /// Seed for coordinate `index` (∂x_index/∂x_index = 1).
    pub fn variable(value: f64, index: usize, dim: usize, order: u8) -> Self {
        let mut jet = Self::constant(value, dim, order);
        if jet.order >= 1 {
            jet.gradient[index] = 1.0;
        }
        jet
    }

    /// Build a jet from explicit parts. `hessian` is a full `dim × dim`
    /// matrix; only its upper triangle is read.
    pub fn from_parts(value: f64, gradient: Option<&[f64]>, hessian: Option<&[Vec<f64>]>) -> Self {
        let dim = gradient.map_or(0, |g| g.len());
        let order = match (gradient, hessian) {
            (None, _) => 0,
            (Some(_), None) => 1,
            (Some(_), Some(_)) => 2,
        };
        let mut jet = Self::constant(value, dim, order);
        if let Some(g) = gradient {
            jet.gradient.copy_from_slice(g);
        }
        if let Some(h) = hessian {
            for i in 0..dim {
                for j in i..dim {
                    jet.hessian[packed_index(dim, i, j)] = h[i][j];
                }
            }
        }
        jet
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Empty when the jet was evaluated at order 0.
    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    /// Second partial ∂²/∂x_i∂x_j. Returns 0 below order 2.
    pub fn hessian(&self, i: usize, j: usize) -> f64 {
        if self.order < 2 {
            return 0.0;
        }
        self.hessian[packed_index(self.dim, i, j)]
    }

    pub fn hessian_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.hessian(i, j)).collect()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.gradient.iter().all(|g| g.is_finite()) && self.hessian.iter().all(|h| h.is_finite())
    }

    /// Compose with a scalar function φ given φ(a), φ'(a), φ''(a).
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Self::constant(f0, self.dim, self.order);
        if self.order >= 1 {
            for (o, g) in out.gradient.iter_mut().zip(&self.gradient) {
                *o = f1 * g;
            }
        }
        if self.order >= 2 {
            let n = self.dim;
            for i in 0..n {
                for j in i..n {
                    let k = packed_index(n, i, j);
                    out.hessian[k] = f1 * self.hessian[k] + f2 * self.gradient[i] * self.gradient[j];
                }
            }
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.chain(factor * self.value, factor, 0.0)
    }

    pub fn recip(&self) -> Self {
        let inv = 1.0 / self.value;
        self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }

    fn common_order(&self, other: &Self) -> u8 {
        debug_assert!(self.order == 0 || other.order == 0 || self.dim == other.dim);
        self.order.min(other.order)
    }

    fn zip_with(&self, other: &Self, value: f64, sign: f64) -> Self {
        let order = self.common_order(other);
        let mut out = Self::constant(value, self.dim.max(other.dim), order);
        if order >= 1 {
            for (i, o) in out.gradient.iter_mut().enumerate() {
                *o = self.gradient[i] + sign * other.gradient[i];
            }
        }
        if order >= 2 {
            for (k, o) in out.hessian.iter_mut().enumerate() {
                *o = self.hessian[k] + sign * other.hessian[k];
            }
        }
        out
    }
}

impl Add for &Jet2 {
    type Output = Jet2;
    fn add(self, rhs: &Jet2) -> Jet2 {
        self.zip_with(rhs, self.value + rhs.value, 1.0)
    }
}

impl Sub for &Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: &Jet2) -> Jet2 {
        self.zip_with(rhs, self.value - rhs.value, -1.0)
    }
}

impl Mul for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: &Jet2) -> Jet2 {
        let order = self.common_order(rhs);
        let n = self.dim.max(rhs.dim);
        let (a, b) = (self.value, rhs.value);
        let mut out = Jet2::constant(a * b, n, order);
        if order >= 1 {
            for i in 0..n {
                out.gradient[i] = a * rhs.gradient[i] + b * self.gradient[i];
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let k = packed_index(n, i, j);
                    out.hessian[k] =
                        a * rhs.hessian[k] + b * self.hessian[k] + self.gradient[i] * rhs.gradient[j] + rhs.gradient[i] * self.gradient[j];
                }
            }
        }
        out
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        let mut out = self.clone();
        out.value = -out.value;
        out.gradient.iter_mut().for_each(|g| *g = -*g);
        out.hessian.iter_mut().for_each(|h| *h = -*h);
        out
    }
}
