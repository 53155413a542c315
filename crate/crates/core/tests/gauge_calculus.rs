//! Epigraph lowering of gauges and positive-part gauge atoms.

mod common;

use proptest::prelude::*;

use common::{config, hpoly, polytope};
use dfc_core::gauge_calculus::{epi_gauge, epi_gauge_exprs, gauge_plus_argument, AffExpr, Atom, VarKind, VarPool};
use dfc_core::set_core::{contains, gauge_value, recession_contains, OracleOptions, SetExpr};
use dfc_core::DfcError;

/// Largest violation of the lowering of `s` at the fixed point `(x, y)`.
fn slice_violation(s: &SetExpr, x: &[f64], y: f64) -> f64 {
    let mut pool = VarPool::new();
    let xs: Vec<AffExpr> = x.iter().map(|v| AffExpr::constant(*v)).collect();
    let atoms = epi_gauge_exprs(s, &xs, &AffExpr::constant(y), &mut pool).unwrap();
    assert!(pool.is_empty(), "lowering of {s:?} needs auxiliaries");
    atoms.iter().map(|a| a.violation(&[])).fold(0.0, f64::max)
}

#[test]
fn box_epigraph_is_linear() {
    let mut pool = VarPool::new();
    let x: Vec<usize> = (0..2).map(|j| pool.add(&format!("x{j}"), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY)).collect();
    let y = pool.add("y", VarKind::Continuous, 0.0, 1.0);
    let block = epi_gauge(&SetExpr::cube(2, -1.0, 2.0), &[0.0, 0.0], &x, y, &mut pool).unwrap();
    assert!(block.atoms().all(Atom::is_linear));
    assert!(block.aux.is_empty());
    assert!(block.max_violation(&[1.5, -0.5, 1.0]) <= 0.0);
    assert!(block.max_violation(&[1.5, -0.5, 0.5]) > 0.0);
}

#[test]
fn base_point_outside_is_rejected() {
    let mut pool = VarPool::new();
    let x = pool.add("x", VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
    let y = pool.add("y", VarKind::Continuous, 0.0, 1.0);
    let err = epi_gauge(&SetExpr::cube(1, 1.0, 2.0), &[0.0], &[x], y, &mut pool).unwrap_err();
    assert_eq!(err, DfcError::BasePointNotInSet);
}

#[test]
fn gauge_plus_argument_clips_negative_parts() {
    let terms = vec![(vec![1.0, 0.0], AffExpr::var(0)), (vec![0.0, -1.0], AffExpr::var(1))];
    assert_eq!(gauge_plus_argument(&terms, &[2.0, -3.0]), vec![2.0, 0.0]);
    assert_eq!(gauge_plus_argument(&terms, &[-1.0, 0.5]), vec![0.0, -0.5]);
}

#[test]
fn gauge_plus_violation_uses_the_gauge() {
    let set = SetExpr::cube(2, -1.0, 1.0);
    let atom = Atom::GaugePlus {
        set: set.clone(),
        terms: vec![(vec![1.0, 0.0], AffExpr::var(0)), (vec![0.0, 1.0], AffExpr::var(1))],
        rhs: AffExpr::var(2),
    };
    // γ((3, 0)⁺) = 3 against rhs 2: violation 1.
    assert!((atom.violation(&[3.0, -5.0, 2.0]) - 1.0).abs() < 1e-6);
    assert!(atom.violation(&[0.5, -5.0, 0.6]) <= 0.0);
}

proptest! {
    #![proptest_config(config(256, 0xe9a))]

    #[test]
    fn polytope_slices_at_zero_and_one(
        (a, b) in polytope(3, 4),
        x in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let s = hpoly(a, b);
        let g = gauge_value(&s, &[0.0; 3], &x, &OracleOptions::default()).unwrap().value;
        prop_assume!((g - 1.0).abs() > 1e-6);
        let at_one = slice_violation(&s, &x, 1.0) <= 1e-9;
        prop_assert_eq!(at_one, contains(&s, &x, 1e-9).unwrap());
        prop_assert_eq!(at_one, g < 1.0);
        // At y = 0 the slice is the recession cone, here {0}.
        let at_zero = slice_violation(&s, &x, 0.0) <= 1e-9;
        prop_assert_eq!(at_zero, x.iter().all(|v| v.abs() < 1e-12));
        prop_assert!(slice_violation(&s, &[0.0; 3], 0.0) <= 1e-12);
    }

    #[test]
    fn ball_slices_at_zero_and_one(
        c in prop::collection::vec(-1.0f64..1.0, 2),
        r in 0.5f64..2.0,
        x in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let s = SetExpr::Ball { center: c.clone(), radius: r };
        let dist = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt();
        prop_assume!((dist - r).abs() > 1e-6);
        prop_assert_eq!(slice_violation(&s, &x, 1.0) <= 1e-9, dist < r);
        prop_assert_eq!(slice_violation(&s, &x, 0.0) <= 1e-9, false);
    }

    #[test]
    fn unbounded_box_slice_at_zero_is_its_recession_cone(
        lo in prop::collection::vec(-2.0f64..-0.1, 2),
        x in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let s = SetExpr::BoxSet { lo: lo.clone(), hi: vec![f64::INFINITY, 1.0] };
        prop_assume!(x.iter().all(|v| v.abs() > 1e-6));
        let at_zero = slice_violation(&s, &x, 0.0) <= 1e-9;
        prop_assert_eq!(at_zero, recession_contains(&s, &x, 1e-9).unwrap());
        prop_assert_eq!(at_zero, x[0] >= 0.0 && x[1] == 0.0);
        let inside = x[0] >= lo[0] && x[1] >= lo[1] && x[1] <= 1.0;
        prop_assert_eq!(slice_violation(&s, &x, 1.0) <= 1e-9, inside);
    }
}
