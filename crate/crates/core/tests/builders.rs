//! Formulation builders on the bundled instances and on malformed input.

use dfc_core::analysis::optimizer::OptOptions;
use dfc_core::analysis::maximize_with;
use dfc_core::fixtures;
use dfc_core::formulation_builders::{
    build, minimal_bigm, BigMData, BbjData, HomothetyData, IsotoneData, Method, MethodParams, PiecewiseData,
    ProblemSpec, ORTHOGONAL_SETS_LABEL,
};
use dfc_core::gauge_calculus::{AffExpr, Atom};
use dfc_core::model_ir_emit::{lower_model, LowerMode, ModelIR};
use dfc_core::sampling::directions;
use dfc_core::set_core::{exposed_point, OracleOptions, SetExpr};
use dfc_core::DfcError;

fn ir_of(spec: &ProblemSpec) -> ModelIR {
    lower_model(&build(spec).unwrap(), LowerMode::Plus).unwrap()
}

/// Whether `(x, eⁱ)` is feasible in the formulation, auxiliaries free.
fn feasible_at(ir: &ModelIR, x: &[f64], i: usize) -> bool {
    let mut fix: Vec<Atom> = ir.x.iter().zip(x).map(|(&v, xv)| Atom::eq(AffExpr::var(v), *xv)).collect();
    for (l, &v) in ir.y.iter().enumerate() {
        fix.push(Atom::eq(AffExpr::var(v), if l == i { 1.0 } else { 0.0 }));
    }
    match maximize_with(ir, &[], &fix, &OptOptions::default().with_feas_tol(1e-7)) {
        Ok(_) => true,
        Err(DfcError::Infeasible) => false,
        Err(e) => panic!("unexpected {e}"),
    }
}

#[test]
fn big_m_coefficients_of_the_hyperbolic_pair() {
    let spec = fixtures::ex1(true);
    let m12 = minimal_bigm(&spec, 0, 1).unwrap();
    assert!((m12.value - 1.25).abs() < 1e-6, "{m12:?}");
    assert!(!m12.sampled);
    let m21 = minimal_bigm(&spec, 1, 0).unwrap();
    assert!((m21.value - 1.2).abs() < 1e-6, "{m21:?}");
    assert!((m21.coordinate_units.unwrap() - 1.5).abs() < 1e-6);
    let f = build(&spec).unwrap();
    assert!((f.constants["M[1][2]"] - 1.25).abs() < 1e-6);
    assert_eq!(f.constants["M[1][1]"], 1.0);
    assert!(f.provenance.iter().any(|p| p == "bigMformulation"));
}

#[test]
fn supplied_big_m_is_validated() {
    let base = fixtures::ex1(true);
    let with = |m: Vec<Vec<f64>>| base.with_method(Method::Bigm, MethodParams::BigM(BigMData { m: Some(m) }));
    let ok = build(&with(vec![vec![1.0, 2.0], vec![2.0, 1.0]])).unwrap();
    assert_eq!(ok.constants["M[2][1]"], 2.0);
    assert!(matches!(build(&with(vec![vec![1.0, 1.0], vec![2.0, 1.0]])), Err(DfcError::MMatrixInvalid(_))));
    assert!(matches!(build(&with(vec![vec![2.0, 2.0], vec![2.0, 1.0]])), Err(DfcError::MMatrixInvalid(_))));
    assert!(matches!(build(&with(vec![vec![1.0, 2.0]])), Err(DfcError::MMatrixInvalid(_))));
}

#[test]
fn unbounded_piece_makes_big_m_infinite() {
    let ray = SetExpr::BoxSet { lo: vec![0.0], hi: vec![f64::INFINITY] };
    let seg = SetExpr::cube(1, -1.0, 1.0);
    let spec = ProblemSpec::new(1, vec![seg, ray], vec![vec![0.0], vec![0.0]], Method::Bigm, MethodParams::None);
    assert_eq!(build(&spec).unwrap_err(), DfcError::UnboundedM(1, 2));
}

#[test]
fn extended_formulation_copies_and_labels() {
    let f = build(&fixtures::ex1(false)).unwrap();
    assert_eq!(f.copies.len(), 2);
    assert!(f.copies.iter().all(|c| c.len() == 2));
    assert!(f.provenance.iter().any(|p| p == "extendedformulation"));
    assert_eq!(f.count("soc"), 4);
}

#[test]
fn empty_family_and_bad_base_points() {
    let empty = ProblemSpec::new(2, Vec::new(), Vec::new(), Method::Extended, MethodParams::None);
    assert!(matches!(build(&empty), Err(DfcError::FamilyInvalid(_))));
    let off = ProblemSpec::new(1, vec![SetExpr::cube(1, 1.0, 2.0)], vec![vec![0.0]], Method::Extended, MethodParams::None);
    assert!(matches!(build(&off), Err(DfcError::InvalidParams(_))));
    let mixed = ProblemSpec::new(
        2,
        vec![SetExpr::cube(2, -1.0, 1.0), SetExpr::cube(3, -1.0, 1.0)],
        vec![vec![0.0; 2]; 2],
        Method::Extended,
        MethodParams::None,
    );
    assert!(matches!(build(&mixed), Err(DfcError::FamilyInvalid(_))));
}

#[test]
fn piecewise_pair_dedups_shared_rows() {
    let f = build(&fixtures::ex3()).unwrap();
    assert_eq!(f.count("soc"), 4);
    let bound_rows = f.blocks.iter().flat_map(|b| b.atoms()).filter(|a| a.is_linear()).count();
    assert_eq!(bound_rows, 4);
    assert!(f.provenance.iter().any(|p| p == "complexform"));
}

#[test]
fn redundant_family_adds_nothing() {
    let two = build(&fixtures::ex5(false)).unwrap();
    let three = build(&fixtures::ex5(true)).unwrap();
    assert_eq!(two.atoms().count(), three.atoms().count());
    for t in ["soc", "lin", "persp", "gaugeplus"] {
        assert_eq!(two.count(t), three.count(t), "{t}");
    }
}

#[test]
fn homothety_data_must_reproduce_the_sets() {
    let c0 = SetExpr::cube(1, -1.0, 1.0);
    let sets = vec![SetExpr::cube(1, -1.0, 1.0), SetExpr::cube(1, 2.0, 4.0)];
    let good = HomothetyData { c0: c0.clone(), b: vec![vec![0.0], vec![3.0]], r: vec![1.0, 1.0] };
    let spec = ProblemSpec::new(1, sets.clone(), vec![vec![0.0], vec![3.0]], Method::Homothetic, MethodParams::Homothety(good));
    let f = build(&spec).unwrap();
    assert!(f.provenance.iter().any(|p| p == "projectedgauge"));
    let bad = HomothetyData { c0, b: vec![vec![0.0], vec![3.0]], r: vec![1.0, 2.0] };
    let spec = ProblemSpec::new(1, sets, vec![vec![0.0], vec![3.0]], Method::Homothetic, MethodParams::Homothety(bad));
    assert!(matches!(build(&spec), Err(DfcError::HomothetyMismatch { .. })));
}

#[test]
fn piecewise_needs_families() {
    let spec = fixtures::ex3().with_method(Method::Piecewise, MethodParams::Piecewise(PiecewiseData { families: Vec::new() }));
    assert!(build(&spec).is_err());
}

#[test]
fn bbj_rejects_empty_pieces() {
    let a = vec![vec![1.0], vec![-1.0]];
    let data = BbjData { a, b: vec![vec![1.0, 1.0], vec![-1.0, 0.0]] };
    let sets = vec![SetExpr::cube(1, -1.0, 1.0), SetExpr::cube(1, -1.0, 1.0)];
    let spec = ProblemSpec::new(1, sets, vec![vec![0.0]; 2], Method::Bbj, MethodParams::Bbj(data));
    assert_eq!(build(&spec).unwrap_err(), DfcError::EmptyPiece(2));
}

#[test]
fn bbj_rows_follow_the_data() {
    let f = build(&fixtures::ex4(false)).unwrap();
    assert_eq!(f.count("lin"), 4);
    assert!(f.provenance.iter().any(|p| p == "blairform"));
    assert_eq!(build(&fixtures::ex4(true)).unwrap().count("lin"), 5);
}

#[test]
fn isotone_signs_are_checked() {
    let spec = fixtures::ex7(fixtures::ex7_ideal_r(), true);
    let MethodParams::Isotone(mut d) = spec.params.clone() else { panic!("isotone params") };
    d.s[0][1] = 0;
    let bad = spec.with_method(Method::Isotone, MethodParams::Isotone(IsotoneData { ..d }));
    assert!(build(&bad).is_err());
}

#[test]
fn isotone_single_gauge_has_no_positive_part() {
    let plus = build(&fixtures::ex7(2.0, true)).unwrap();
    let single = build(&fixtures::ex7(2.0, false)).unwrap();
    assert_eq!(plus.count("gaugeplus"), 1);
    assert_eq!(single.count("gaugeplus"), 0);
    assert!(plus.provenance.iter().any(|p| p == "isotonegeneralform"));
    assert!(plus.constants.keys().any(|k| k.starts_with('U')));
}

#[test]
fn orthogonal_blocks_without_cone() {
    let f = build(&fixtures::orthogonal_segments()).unwrap();
    assert!(f.provenance.iter().any(|p| p == ORTHOGONAL_SETS_LABEL));
}

/// Every piece point with its indicator is feasible, and points pushed off a
/// piece are not.
#[test]
fn formulations_are_valid_at_integral_points() {
    let opts = OracleOptions::default();
    for name in fixtures::NAMES {
        for (variant, spec) in fixtures::by_name(name).unwrap() {
            let ir = ir_of(&spec);
            for (i, set) in spec.sets.iter().enumerate() {
                for u in directions(spec.dim, 12, 3) {
                    let Ok(p) = exposed_point(set, &u, &opts) else { continue };
                    // Pulled a hair towards the base point so oracle error stays inside.
                    let base = &spec.base_points[i];
                    let p: Vec<f64> = p.iter().zip(base).map(|(a, b)| b + (1.0 - 1e-5) * (a - b)).collect();
                    assert!(feasible_at(&ir, &p, i), "{variant}: piece {} point {p:?}", i + 1);
                    let out: Vec<f64> = p.iter().zip(&u).map(|(a, b)| a + 0.05 * b).collect();
                    assert!(!feasible_at(&ir, &out, i), "{variant}: piece {} accepts {out:?}", i + 1);
                }
            }
        }
    }
}
