#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use geomech::analysis::{schrodinger_residual, DEFAULT_TOLERANCE};
use geomech::exprlang::{BinOp, Constant, Func, Node};
use geomech::geometry::{
    christoffel_at, divergence_from_jacobian, exterior_derivative_of_jets, gradient_field_jacobian, laplacian_from_jet, Christoffel,
    ScalarField,
};
use geomech::{Expr, Jet2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const VARS: [&str; 3] = ["x", "y", "z"];

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs().max(b.abs()))
}

#[test]
fn jets_match_finite_differences_on_random_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..1000 {
        let vars = &VARS[..2 + trial % 2];
        let src = random_polynomial(&mut rng, vars);
        let expr = Expr::parse(&src, vars).unwrap();
        let p: Vec<f64> = vars.iter().map(|_| rand::Rng::gen_range(&mut rng, -1.5..1.5)).collect();
        let jet = expr.eval_jet(&p, 2).unwrap();
        let (value, grad, hess) = fd_derivatives(&|q| expr.eval(q).unwrap(), &p, 1e-3);
        assert!(relative_gap(jet.value(), value) <= 1e-12, "{src}");
        for i in 0..vars.len() {
            assert!(relative_gap(jet.gradient()[i], grad[i]) <= 1e-6, "{src}: d{i}");
            for j in 0..vars.len() {
                assert!(relative_gap(jet.hessian(i, j), hess[i][j]) <= 1e-6, "{src}: d{i}d{j}");
            }
        }
    }
}

fn arb_node(vars: usize) -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|k| Node::Num(k as f64 / 8.0)),
        Just(Node::Const(Constant::Pi)),
        Just(Node::Const(Constant::E)),
        (0..vars).prop_map(Node::Var),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        let ops = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div), Just(BinOp::Pow)];
        let funcs = prop::sample::select(Func::ALL.to_vec());
        prop_oneof![
            inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
            (ops, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Node::Binary(op, Box::new(a), Box::new(b))),
            (funcs, inner).prop_map(|(f, a)| Node::Call(f, Box::new(a))),
        ]
    })
}

fn coords() -> std::sync::Arc<[String]> {
    VARS.iter().map(|s| s.to_string()).collect()
}

fn same_result(a: Result<f64, impl std::fmt::Debug>, b: Result<f64, impl std::fmt::Debug>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x.to_bits() == y.to_bits(),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn printing_then_parsing_is_stable(node in arb_node(3)) {
        let coords = coords();
        let expr = Expr::from_node(node, &coords);
        let printed = expr.to_string();
        let reparsed = Expr::parse_shared(&printed, &coords).unwrap();
        prop_assert_eq!(reparsed.to_string(), printed.clone());
        let p = [0.7, -0.4, 1.3];
        prop_assert!(same_result(expr.eval(&p), reparsed.eval(&p)), "{}", printed);
    }

    #[test]
    fn jet_values_agree_across_orders(node in arb_node(3), x in -2.0..2.0f64, y in -2.0..2.0f64, z in -2.0..2.0f64) {
        let expr = Expr::from_node(node, &coords());
        let p = [x, y, z];
        let plain = expr.eval(&p);
        let order0 = expr.eval_jet(&p, 0).map(|j| j.value());
        let order2 = expr.eval_jet(&p, 2).map(|j| j.value());
        prop_assert!(same_result(plain.clone(), order0));
        if let (Ok(a), Ok(b)) = (&plain, &order2) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

/// `∇_k g_ij = ∂_k g_ij − Γ^l_ki g_lj − Γ^l_kj g_il = 0`.
#[test]
fn connection_is_metric_compatible() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for case in catalog_cases() {
        for _ in 0..20 {
            let p = random_point(&mut rng, case.metric.chart());
            let m = case.metric.at(&p).unwrap();
            let gamma = Christoffel::from_metric(&m);
            let n = p.len();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let conn: f64 = (0..n).map(|l| gamma.get(l, k, i) * m.g(l, j) + gamma.get(l, k, j) * m.g(i, l)).sum();
                        assert!((m.dg(k)[(i, j)] - conn).abs() < 1e-12, "{}", case.name);
                    }
                }
            }
        }
    }
}

#[test]
fn exterior_derivative_squares_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let src = random_polynomial(&mut rng, &VARS) + " + sin(x*y) + exp(0.2*z)";
        let f = Expr::parse(&src, &VARS).unwrap();
        let p = [0.3, -0.9, 1.1];
        let jet = f.eval_jet(&p, 2).unwrap();
        // df as one-form jets: component i has value ∂_i f and gradient ∂_k∂_i f
        let df: Vec<Jet2> = (0..3)
            .map(|i| {
                let row: Vec<f64> = (0..3).map(|k| jet.hessian(i, k)).collect();
                Jet2::from_parts(jet.gradient()[i], Some(&row), None)
            })
            .collect();
        let ddf = exterior_derivative_of_jets(&df);
        assert!(ddf.iter().flatten().all(|c| *c == 0.0), "{src}: {ddf:?}");
    }
}

#[test]
fn laplacian_routes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for case in catalog_cases() {
        let chart = case.metric.chart();
        let names: Vec<&str> = chart.coords().iter().map(String::as_str).collect();
        for _ in 0..20 {
            let src = random_polynomial(&mut rng, &names);
            let f = ScalarField::parse(chart, &format!("{src} + cos({})", names[0])).unwrap();
            let p = random_point(&mut rng, chart);
            let m = case.metric.at(&p).unwrap();
            let jet = f.jet(&p, 2).unwrap();
            let fused = laplacian_from_jet(&m, &christoffel_at(&case.metric, &p).unwrap(), &jet);
            let (u, jac) = gradient_field_jacobian(&m, &jet);
            let composed = divergence_from_jacobian(&m, &u, &jac);
            assert!(relative_gap(fused, composed) < 1e-10, "{}: {fused} vs {composed}", case.name);
        }
    }
}

#[test]
fn schrodinger_residual_splits_into_sub_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for case in catalog_cases() {
        let chart = case.metric.chart();
        let names: Vec<&str> = chart.coords().iter().map(String::as_str).collect();
        let f = ScalarField::parse(chart, &random_polynomial(&mut rng, &names)).unwrap();
        let v = ScalarField::parse(chart, &random_polynomial(&mut rng, &names)).unwrap();
        let h = 0.7;
        let points: Vec<Vec<f64>> = (0..20).map(|_| random_point(&mut rng, chart)).collect();
        let r = schrodinger_residual(&case.metric, Some(&v), &f, h, 1.3, &points, DEFAULT_TOLERANCE).unwrap();
        for ((res, harm), energy) in r.residual.entries.iter().zip(&r.harmonicity.entries).zip(&r.energy.entries) {
            let expected = (0.5 * h * harm.components[0]).hypot(energy.components[0]);
            assert!((res.magnitude - expected).abs() <= 1e-12 * expected.max(1.0));
        }
        let both = r.harmonicity.max * 0.5 * h <= r.residual.max && r.energy.max <= r.residual.max;
        assert!(both);
    }
}

#[test]
fn metric_inverse_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for case in catalog_cases() {
        let p = random_point(&mut rng, case.metric.chart());
        let m = case.metric.at(&p).unwrap();
        let v: Vec<f64> = (0..p.len()).map(|i| 0.3 + i as f64).collect();
        let back = m.raise(&m.lower(&v));
        assert!(max_abs_diff(&v, &back) < 1e-12);
    }
}
