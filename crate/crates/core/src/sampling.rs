//! Deterministic sample sets over a chart's domain box.
//!
//! Point sets are Halton sequences with a seeded Cranley–Patterson
//! rotation; random states draw velocities uniformly from a cube.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Chart;
use crate::mechanics::State;

pub const DEFAULT_SAMPLE_COUNT: usize = 256;
pub const DEFAULT_SEED: u64 = 0;

const PRIMES: [u32; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let base_f = base as f64;
    let mut inv = 1.0 / base_f;
    let mut result = 0.0;
    while index > 0 {
        result += (index % base as u64) as f64 * inv;
        index /= base as u64;
        inv /= base_f;
    }
    result
}

/// `count` points inside the open box `bounds`.
pub fn halton_points(bounds: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(bounds.len() <= PRIMES.len(), "halton sampling supports at most {} dimensions", PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = bounds.iter().map(|_| rng.gen::<f64>()).collect();
    (1..=count as u64)
        .map(|index| {
            bounds
                .iter()
                .zip(&shift)
                .zip(PRIMES)
                .map(|((&(lo, hi), s), base)| {
                    let mut u = radical_inverse(index, base) + s;
                    if u >= 1.0 {
                        u -= 1.0;
                    }
                    // keep strictly inside the open box
                    let u = u.clamp(1e-9, 1.0 - 1e-9);
                    lo + (hi - lo) * u
                })
                .collect()
        })
        .collect()
}

/// Where to evaluate field-level checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    /// Explicit points override the generated set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self { count: DEFAULT_SAMPLE_COUNT, seed: DEFAULT_SEED, points: None }
    }
}

impl SampleSpec {
    pub fn with_count(count: usize) -> Self {
        Self { count, ..Self::default() }
    }

    pub fn points(&self, chart: &Chart) -> Vec<Vec<f64>> {
        match &self.points {
            Some(points) => points.clone(),
            None => halton_points(&chart.sample_box(), self.count, self.seed),
        }
    }
}

/// Random states: base points uniform in the chart box, velocities uniform
/// in `[-speed, speed]^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSampler {
    pub count: usize,
    pub seed: u64,
    pub speed: f64,
}

impl Default for StateSampler {
    fn default() -> Self {
        Self { count: DEFAULT_SAMPLE_COUNT, seed: DEFAULT_SEED, speed: 1.0 }
    }
}

impl StateSampler {
    pub fn states(&self, chart: &Chart) -> Vec<State> {
        let bounds = chart.sample_box();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| {
                let x = bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
                let v = bounds.iter().map(|_| rng.gen_range(-self.speed..=self.speed)).collect();
                State::new(x, v)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn points_stay_inside_and_are_reproducible() {
        let bounds = [(-1.0, 1.0), (2.0, 3.0), (0.0, 10.0)];
        let a = halton_points(&bounds, 500, 7);
        assert_eq!(a, halton_points(&bounds, 500, 7));
        assert_ne!(a, halton_points(&bounds, 500, 8));
        for p in &a {
            for (x, (lo, hi)) in p.iter().zip(bounds) {
                assert!(*x > lo && *x < hi);
            }
        }
    }
}
