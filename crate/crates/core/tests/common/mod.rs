//! Independent reference computations shared by the integration tests and
//! the acceptance target. Nothing here calls the library's derivative
//! machinery except to read raw metric values.

#![allow(dead_code)]

use geomech::geometry::{Chart, Metric, OneFormField, ScalarField, TwoFormField};
use geomech::mechanics::{MechanicalSystem, State, WorkForm};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// A catalog metric on a chart whose box avoids its singularities.
pub struct Case {
    pub name: &'static str,
    pub metric: Metric,
}

pub fn catalog_cases() -> Vec<Case> {
    let boxed = |names: &[&str], bounds: &[(f64, f64)]| Chart::new(names.iter().copied()).unwrap().with_bounds(bounds.to_vec()).unwrap();
    vec![
        Case { name: "euclidean2", metric: Metric::preset("euclidean", &boxed(&["x", "y"], &[(-2.0, 2.0), (-2.0, 2.0)])).unwrap() },
        Case {
            name: "euclidean3",
            metric: Metric::preset("euclidean", &boxed(&["x", "y", "z"], &[(-2.0, 2.0), (-2.0, 2.0), (-2.0, 2.0)])).unwrap(),
        },
        Case { name: "minkowski2", metric: Metric::preset("minkowski", &boxed(&["t", "x"], &[(-2.0, 2.0), (-2.0, 2.0)])).unwrap() },
        Case {
            name: "minkowski3",
            metric: Metric::preset("minkowski", &boxed(&["t", "x", "y"], &[(-2.0, 2.0), (-2.0, 2.0), (-2.0, 2.0)])).unwrap(),
        },
        Case { name: "polar2", metric: Metric::preset("polar2", &boxed(&["r", "phi"], &[(0.5, 2.0), (-3.0, 3.0)])).unwrap() },
        Case { name: "sphere2", metric: Metric::preset("sphere2", &boxed(&["theta", "phi"], &[(0.3, 2.8), (-3.0, 3.0)])).unwrap() },
        Case { name: "hyperbolic2", metric: Metric::preset("hyperbolic2", &boxed(&["x", "y"], &[(-2.0, 2.0), (0.5, 2.0)])).unwrap() },
    ]
}

/// Uniform in the chart box, kept clear of its faces so difference
/// stencils stay inside.
pub fn random_point(rng: &mut impl Rng, chart: &Chart) -> Vec<f64> {
    chart
        .sample_box()
        .iter()
        .map(|&(lo, hi)| {
            let margin = 0.05 * (hi - lo);
            rng.gen_range(lo + margin..hi - margin)
        })
        .collect()
}

pub fn random_state(rng: &mut impl Rng, chart: &Chart) -> State {
    let x = random_point(rng, chart);
    let v = x.iter().map(|_| rng.gen_range(-1.5..1.5)).collect();
    State::new(x, v)
}

fn coord(chart: &Chart, i: usize) -> String {
    chart.coords()[i % chart.dimension()].clone()
}

/// One of the four work-form variants with randomized coefficients.
pub fn random_work_form(rng: &mut impl Rng, chart: &Chart, kind: usize) -> WorkForm {
    let n = chart.dimension();
    let c = |rng: &mut dyn rand::RngCore| format!("{:.3}", rng.gen_range(-2.0..2.0));
    match kind % 4 {
        0 => WorkForm::Zero,
        1 => {
            let src = format!(
                "{}*{}^2 + {}*sin({}) + {}*{}*{}",
                c(rng),
                coord(chart, 0),
                c(rng),
                coord(chart, 1),
                c(rng),
                coord(chart, 0),
                coord(chart, 1)
            );
            WorkForm::Potential(ScalarField::parse(chart, &src).unwrap())
        }
        2 => {
            let comps = (0..n)
                .map(|i| {
                    let src = format!(
                        "{}*{}_dot*{} + {}*cos({}) + {}*{}_dot^2",
                        c(rng),
                        coord(chart, i),
                        coord(chart, i + 1),
                        c(rng),
                        coord(chart, i),
                        c(rng),
                        coord(chart, i + 1)
                    );
                    chart.parse_phase(&src).unwrap()
                })
                .collect();
            WorkForm::GeneralHorizontal(comps)
        }
        _ => {
            // constant coefficients keep F closed in any dimension
            let comps: Vec<String> = (0..n * (n - 1) / 2).map(|_| c(rng)).collect();
            WorkForm::Electromagnetic { field: TwoFormField::parse(chart, &comps).unwrap(), potential: None }
        }
    }
}

pub fn metric_matrix(metric: &Metric, p: &[f64]) -> DMatrix<f64> {
    metric.at_order(p, 0).unwrap().matrix().clone()
}

/// Central differences of the metric, fourth order.
pub fn fd_metric_derivatives(metric: &Metric, p: &[f64], h: f64) -> Vec<DMatrix<f64>> {
    (0..p.len())
        .map(|k| {
            let at = |s: f64| {
                let mut q = p.to_vec();
                q[k] += s;
                metric_matrix(metric, &q)
            };
            (at(-2.0 * h) - at(2.0 * h) + (at(h) - at(-h)) * 8.0) / (12.0 * h)
        })
        .collect()
}

/// `Γ^k_ij` from finite-differenced metric values.
pub fn fd_christoffel(metric: &Metric, p: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let n = p.len();
    let dg = fd_metric_derivatives(metric, p, 1e-3);
    let inv = metric_matrix(metric, p).try_inverse().unwrap();
    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                gamma[k][i][j] = 0.5 * (0..n).map(|l| inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)])).sum::<f64>();
            }
        }
    }
    gamma
}

/// Acceleration from the linear system `i_D ω₂ = −dT − α` on `TM`,
/// `ω₂ = dθ`, `θ = g_ij v^j dx^i`. Unknowns are `(Dx, Dv)`.
pub fn linear_system_acceleration(sys: &MechanicalSystem, s: &State) -> Vec<f64> {
    let n = s.x.len();
    let m = sys.metric().at(&s.x).unwrap();
    let alpha = sys.work_form_at(s).unwrap();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut b = DVector::zeros(2 * n);
    // dθ_i/dx^k = ∂_k g_ij v^j
    let dtheta = |k: usize, i: usize| (0..n).map(|j| m.dg(k)[(i, j)] * s.v[j]).sum::<f64>();
    for i in 0..n {
        for k in 0..n {
            a[(i, k)] = dtheta(k, i) - dtheta(i, k);
        }
        for j in 0..n {
            a[(i, n + j)] = m.g(i, j);
        }
        let dt: f64 = (0..n).flat_map(|p| (0..n).map(move |q| (p, q))).map(|(p, q)| 0.5 * m.dg(i)[(p, q)] * s.v[p] * s.v[q]).sum();
        b[i] = -dt - alpha[i];
    }
    for j in 0..n {
        for i in 0..n {
            a[(n + j, i)] = -m.g(i, j);
        }
        b[n + j] = -(0..n).map(|k| m.g(j, k) * s.v[k]).sum::<f64>();
    }
    let d = a.lu().solve(&b).expect("ω₂ is nondegenerate");
    d.iter().skip(n).copied().collect()
}

/// Projection of the free acceleration making `d/dt (τ_i v^i) = 0`:
/// `ā = a − c grad τ` with `c` solved from `∂_kτ_i v^k v^i + τ·ā = 0`.
/// `∂τ` comes from finite differences.
pub fn tangency_projection(sys: &MechanicalSystem, tau: &OneFormField, s: &State) -> Vec<f64> {
    let n = s.x.len();
    let a = sys.acceleration(s).unwrap();
    let g = metric_matrix(sys.metric(), &s.x);
    let ginv = g.try_inverse().unwrap();
    let t = tau.values(&s.x).unwrap();
    let h = 1e-3;
    let mut quad = 0.0;
    for k in 0..n {
        let at = |d: f64| {
            let mut q = s.x.clone();
            q[k] += d;
            tau.values(&q).unwrap()
        };
        let (m2, m1, p1, p2) = (at(-2.0 * h), at(-h), at(h), at(2.0 * h));
        for i in 0..n {
            let d = (m2[i] - p2[i] + 8.0 * (p1[i] - m1[i])) / (12.0 * h);
            quad += d * s.v[k] * s.v[i];
        }
    }
    let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| ginv[(i, j)] * t[j]).sum()).collect();
    let norm2: f64 = t.iter().zip(&grad).map(|(a, b)| a * b).sum();
    let ta: f64 = t.iter().zip(&a).map(|(a, b)| a * b).sum();
    let c = (quad + ta) / norm2;
    a.iter().zip(&grad).map(|(a, g)| a - c * g).collect()
}

/// Value, gradient and Hessian of `f` by Richardson-extrapolated central
/// differences.
pub fn fd_derivatives(f: &dyn Fn(&[f64]) -> f64, p: &[f64], h: f64) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let n = p.len();
    let shifted = |moves: &[(usize, f64)]| {
        let mut q = p.to_vec();
        for &(i, d) in moves {
            q[i] += d;
        }
        f(&q)
    };
    let first = |i: usize, h: f64| (shifted(&[(i, h)]) - shifted(&[(i, -h)])) / (2.0 * h);
    let second = |i: usize, j: usize, h: f64| {
        if i == j {
            (shifted(&[(i, h)]) - 2.0 * f(p) + shifted(&[(i, -h)])) / (h * h)
        } else {
            (shifted(&[(i, h), (j, h)]) - shifted(&[(i, h), (j, -h)]) - shifted(&[(i, -h), (j, h)]) + shifted(&[(i, -h), (j, -h)]))
                / (4.0 * h * h)
        }
    };
    let rich = |a: f64, b: f64| (4.0 * b - a) / 3.0;
    let grad = (0..n).map(|i| rich(first(i, h), first(i, h / 2.0))).collect();
    let hess = (0..n).map(|i| (0..n).map(|j| rich(second(i, j, h), second(i, j, h / 2.0))).collect()).collect();
    (f(p), grad, hess)
}

/// A random polynomial of total degree ≤ 4 in `vars`, as source text.
pub fn random_polynomial(rng: &mut impl Rng, vars: &[&str]) -> String {
    let terms = rng.gen_range(1..=5);
    let mut out = Vec::new();
    for _ in 0..terms {
        let coef: f64 = rng.gen_range(-3.0..3.0);
        let mut term = format!("{coef:.4}");
        let mut degree = rng.gen_range(0..=4);
        while degree > 0 {
            let var = vars[rng.gen_range(0..vars.len())];
            let power = rng.gen_range(1..=degree);
            degree -= power;
            if power == 1 {
                term.push_str(&format!("*{var}"));
            } else {
                term.push_str(&format!("*{var}^{power}"));
            }
        }
        out.push(term);
    }
    out.join(" + ")
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}

/// `J^k = (1/s) ∂_i(s F^{ki})`, `s = sqrt|det g|`, by finite differences of
/// the raised, weighted form, and `div J` by differencing that result.
pub fn fd_current(field: &TwoFormField, metric: &Metric, p: &[f64], h: f64) -> Vec<f64> {
    let n = p.len();
    let weighted = |q: &[f64]| -> DMatrix<f64> {
        let g = metric_matrix(metric, q);
        let s = g.determinant().abs().sqrt();
        let inv = g.try_inverse().unwrap();
        let f = field.values(q).unwrap();
        let f = DMatrix::from_fn(n, n, |i, j| f[i][j]);
        (&inv * f * &inv) * s
    };
    let s0 = metric_matrix(metric, p).determinant().abs().sqrt();
    (0..n)
        .map(|k| {
            let mut acc = 0.0;
            for i in 0..n {
                let at = |d: f64| {
                    let mut q = p.to_vec();
                    q[i] += d;
                    weighted(&q)[(k, i)]
                };
                acc += (at(-2.0 * h) - at(2.0 * h) + 8.0 * (at(h) - at(-h))) / (12.0 * h);
            }
            acc / s0
        })
        .collect()
}
