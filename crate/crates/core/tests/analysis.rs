//! Relaxation optimizer, vertex enumeration and the strength checks.

mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{brute_vertices, config, direction, hpoly, polytope, scan};
use dfc_core::analysis::optimizer::{maximize_atoms, OptOptions};
use dfc_core::analysis::vertex::enumerate_vertices;
use dfc_core::analysis::{
    check_bbj_condition, check_ideal, check_par_conditions, check_sharp, maximize_over_relaxation,
    relaxation_polyhedron, relaxation_violation, xy_objective, AnalysisOptions, Verdict,
};
use dfc_core::fixtures;
use dfc_core::formulation_builders::{build, BbjData, Method, MethodParams, ProblemSpec};
use dfc_core::gauge_calculus::{AffExpr, Atom, Var, VarKind};
use dfc_core::model_ir_emit::{lower_model, LowerMode, ModelIR};
use dfc_core::sampling::rng;
use dfc_core::set_core::SetExpr;

fn lowered(spec: &ProblemSpec) -> ModelIR {
    lower_model(&build(spec).unwrap(), LowerMode::Plus).unwrap()
}

fn all_specs() -> Vec<(String, ProblemSpec)> {
    fixtures::NAMES.iter().flat_map(|n| fixtures::by_name(n).unwrap()).collect()
}

fn free_vars(n: usize) -> Vec<Var> {
    (0..n)
        .map(|j| Var { name: format!("z{j}"), kind: VarKind::Continuous, lb: f64::NEG_INFINITY, ub: f64::INFINITY })
        .collect()
}

fn rows_as_atoms(a: &[Vec<f64>], b: &[f64]) -> Vec<Atom> {
    a.iter()
        .zip(b)
        .map(|(row, bi)| Atom::le(AffExpr::from_terms(row.iter().copied().enumerate().collect(), 0.0), *bi))
        .collect()
}

#[test]
fn polyhedral_pair_relaxation_peak() {
    let ir = lowered(&fixtures::ex4(false));
    let r = maximize_over_relaxation(&ir, &xy_objective(&ir, &[0.0, 0.0, 1.0], &[]), &OptOptions::default()).unwrap();
    assert!((r.value - 1.5).abs() < 1e-9, "{}", r.value);
    for (got, want) in r.point.iter().zip([0.0, 0.0, 1.5, 0.5, 0.5]) {
        assert!((got - want).abs() < 1e-9, "{:?}", r.point);
    }
    // Over the hull the peak is 1, reached on each piece.
    let aug = lowered(&fixtures::ex4(true));
    let r = maximize_over_relaxation(&aug, &xy_objective(&aug, &[0.0, 0.0, 1.0], &[]), &OptOptions::default()).unwrap();
    assert!((r.value - 1.0).abs() < 1e-9);
}

#[test]
fn unbounded_direction_hits_the_box() {
    let spec = ProblemSpec::new(
        1,
        vec![SetExpr::BoxSet { lo: vec![0.0], hi: vec![f64::INFINITY] }, SetExpr::BoxSet { lo: vec![1.0], hi: vec![f64::INFINITY] }],
        vec![vec![0.0], vec![1.0]],
        Method::Extended,
        MethodParams::None,
    );
    let ir = lowered(&spec);
    let r = maximize_over_relaxation(&ir, &xy_objective(&ir, &[1.0], &[]), &OptOptions::default()).unwrap();
    assert!(r.box_active);
    let r = maximize_over_relaxation(&ir, &xy_objective(&ir, &[-1.0], &[]), &OptOptions::default()).unwrap();
    assert!(!r.box_active && r.value.abs() < 1e-9);
}

/// Points generated from the vertex description satisfy the inequalities,
/// and each vertex is tight on a full-rank row set.
#[test]
fn vertex_description_agrees_with_inequalities() {
    for (variant, spec) in all_specs() {
        let ir = lowered(&spec);
        let Ok((a, b)) = relaxation_polyhedron(&ir) else { continue };
        let vs = enumerate_vertices(&a, &b).unwrap();
        assert!(!vs.is_empty(), "{variant}");
        let d = a[0].len();
        for v in &vs.vertices {
            let tight: Vec<&Vec<f64>> = a
                .iter()
                .zip(&b)
                .filter(|(r, bi)| (r.iter().zip(v).map(|(p, q)| p * q).sum::<f64>() - *bi).abs() < 1e-9)
                .map(|(r, _)| r)
                .collect();
            assert!(tight.len() >= d, "{variant}: vertex {v:?} tight on {}", tight.len());
        }
        let mut r = rng(5);
        for _ in 0..1000 {
            let w: Vec<f64> = (0..vs.vertices.len()).map(|_| r.random_range(0.0..1.0)).collect();
            let s: f64 = w.iter().sum();
            let mut p = vec![0.0; d];
            for (wi, v) in w.iter().zip(&vs.vertices) {
                for j in 0..d {
                    p[j] += wi / s * v[j];
                }
            }
            for ray in vs.rays.iter().chain(&vs.lines) {
                let t = r.random_range(0.0..2.0);
                for j in 0..d {
                    p[j] += t * ray[j];
                }
            }
            let worst =
                a.iter().zip(&b).map(|(row, bi)| row.iter().zip(&p).map(|(x, y)| x * y).sum::<f64>() - bi).fold(f64::MIN, f64::max);
            assert!(worst <= 1e-9, "{variant}: {p:?} violates by {worst}");
            assert!(relaxation_violation(&ir, &p) <= 1e-9);
        }
    }
}

/// Every bundled instance that passes the idealness check is also sharp.
#[test]
fn ideal_implies_sharp() {
    let opts = AnalysisOptions::default().with_directions(120).with_tol(1e-5);
    for (variant, spec) in all_specs() {
        let ir = lowered(&spec);
        let ideal = check_ideal(&ir, &spec, &opts).unwrap();
        if ideal.verdict == Verdict::Fail {
            continue;
        }
        let sharp = check_sharp(&ir, &spec, &opts).unwrap();
        assert_ne!(sharp.verdict, Verdict::Fail, "{variant}: {}", sharp.summary());
    }
}

#[test]
fn witnesses_reproduce() {
    let spec = fixtures::ex1(true);
    let ir = lowered(&spec);
    let opts = AnalysisOptions::default().with_directions(200).with_tol(1e-5);
    let report = check_sharp(&ir, &spec, &opts).unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    for w in &report.witnesses {
        assert!(relaxation_violation(&ir, &w.point) <= 1e-6, "witness point infeasible");
        let again = maximize_over_relaxation(&ir, &xy_objective(&ir, &w.direction, &[]), &OptOptions::default()).unwrap();
        assert!((again.value - w.value).abs() <= 0.1 * w.value.abs().max(1e-9));
        assert!(again.value - w.reference > 0.9 * w.margin);
    }
}

#[test]
fn reports_are_seeded() {
    let spec = fixtures::ex1(true);
    let ir = lowered(&spec);
    let opts = AnalysisOptions::default().with_directions(60).with_seed(9);
    let a = check_sharp(&ir, &spec, &opts).unwrap().to_json();
    let b = check_sharp(&ir, &spec, &opts.with_jobs(Some(2))).unwrap().to_json();
    assert_eq!(a, b);
    let c = check_sharp(&ir, &spec, &opts.with_seed(10)).unwrap().to_json();
    assert_ne!(a, c);
}

#[test]
fn single_set_is_ideal() {
    let spec = ProblemSpec::new(2, vec![SetExpr::Ball { center: vec![0.5, 0.0], radius: 1.0 }], vec![vec![0.5, 0.0]], Method::Extended, MethodParams::None);
    let ir = lowered(&spec);
    let opts = AnalysisOptions::default().with_directions(100);
    assert_eq!(check_ideal(&ir, &spec, &opts).unwrap().verdict, Verdict::NotRefuted);
    assert_eq!(check_sharp(&ir, &spec, &opts).unwrap().verdict, Verdict::NotRefuted);
}

#[test]
fn families_equal_to_the_sets_pass() {
    let sets = fixtures::ex3().sets;
    let r = check_par_conditions(&sets, std::slice::from_ref(&sets), &AnalysisOptions::default().with_directions(90)).unwrap();
    assert_eq!(r.verdict, Verdict::NotRefuted, "{}", r.summary());
}

#[test]
fn identical_polyhedra_satisfy_the_basis_condition() {
    let a = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0], vec![1.0, 1.0]];
    let b = vec![1.0, 1.0, 1.0, 1.0, 1.5];
    let r = check_bbj_condition(&BbjData { a, b: vec![b.clone(), b] }, 50, &AnalysisOptions::default()).unwrap();
    assert_ne!(r.verdict, Verdict::Fail, "{}", r.summary());
}

fn polytope_case() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (2usize..=3).prop_flat_map(|n| (polytope(n, 8 - 2 * n), direction(n)).prop_map(|((a, b), c)| (a, b, c)))
}

proptest! {
    #![proptest_config(config(256, 0xa11))]

    /// Cutting planes, double description and brute-force vertices agree.
    #[test]
    fn optimizers_agree_on_polytopes((a, b, c) in polytope_case()) {
        let n = c.len();
        let cut = maximize_atoms(&free_vars(n), &rows_as_atoms(&a, &b), &c, &OptOptions::default()).unwrap();
        prop_assert!(!cut.box_active);
        let dd = enumerate_vertices(&a, &b).unwrap().maximize(&c).unwrap();
        let brute = scan(&brute_vertices(&a, &b), &c);
        prop_assert!((cut.value - brute).abs() <= 1e-6 * (1.0 + brute.abs()), "{} vs {}", cut.value, brute);
        prop_assert!((dd - brute).abs() <= 1e-6 * (1.0 + brute.abs()), "{} vs {}", dd, brute);
        let _ = hpoly(a, b);
    }
}
