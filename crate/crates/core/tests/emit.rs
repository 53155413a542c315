//! Serialization of models and instances, and positive-part lifting.

mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use rand::Rng;

use common::{config, direction};
use dfc_core::analysis::optimizer::OptOptions;
use dfc_core::analysis::{maximize_over_relaxation, xy_objective};
use dfc_core::fixtures;
use dfc_core::formulation_builders::{build, ProblemSpec};
use dfc_core::model_ir_emit::{emit_json, emit_lp, instance_json, lower_model, parse_instance, parse_model, LowerMode, ModelIR};
use dfc_core::sampling::rng;
use dfc_core::DfcError;

fn all_specs() -> Vec<(String, ProblemSpec)> {
    fixtures::NAMES.iter().flat_map(|n| fixtures::by_name(n).unwrap()).collect()
}

fn lowered(spec: &ProblemSpec, mode: LowerMode) -> ModelIR {
    lower_model(&build(spec).unwrap(), mode).unwrap()
}

/// Minimal LP-format reader: rows `name: Σ ±c v op rhs` and bounds.
struct LpFile {
    rows: Vec<(Vec<(String, f64)>, String, f64)>,
    bounds: HashMap<String, (f64, f64)>,
}

fn num(s: &str) -> f64 {
    match s {
        "+inf" | "inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => s.parse().unwrap_or_else(|_| panic!("bad number {s}")),
    }
}

fn read_lp(text: &str) -> LpFile {
    let mut section = "";
    let mut rows = Vec::new();
    let mut bounds = HashMap::new();
    for line in text.lines() {
        let t = line.trim();
        match t {
            "Maximize" | "Subject To" | "Bounds" | "Binary" | "End" => {
                section = t;
                continue;
            }
            _ if t.starts_with('\\') => continue,
            _ => {}
        }
        let tok: Vec<&str> = t.split_whitespace().collect();
        match section {
            "Subject To" => {
                let body = &tok[1..];
                let (lhs, tail) = body.split_at(body.len() - 2);
                let mut terms = Vec::new();
                let mut sign = 1.0;
                let mut i = 0;
                while i < lhs.len() {
                    match lhs[i] {
                        "+" => sign = 1.0,
                        "-" => sign = -1.0,
                        c => {
                            terms.push((lhs[i + 1].to_string(), sign * num(c)));
                            sign = 1.0;
                            i += 1;
                        }
                    }
                    i += 1;
                }
                rows.push((terms, tail[0].to_string(), num(tail[1])));
            }
            "Bounds" => {
                if tok.len() == 2 && tok[1] == "free" {
                    bounds.insert(tok[0].to_string(), (f64::NEG_INFINITY, f64::INFINITY));
                } else {
                    assert_eq!(tok.len(), 5, "bound line {t}");
                    bounds.insert(tok[2].to_string(), (num(tok[0]), num(tok[4])));
                }
            }
            _ => {}
        }
    }
    LpFile { rows, bounds }
}

impl LpFile {
    fn feasible(&self, vals: &HashMap<String, f64>, tol: f64) -> bool {
        let rows_ok = self.rows.iter().all(|(terms, op, rhs)| {
            let lhs: f64 = terms.iter().map(|(v, c)| c * vals[v]).sum();
            match op.as_str() {
                "<=" => lhs <= rhs + tol,
                ">=" => lhs >= rhs - tol,
                "=" => (lhs - rhs).abs() <= tol,
                other => panic!("operator {other}"),
            }
        });
        rows_ok && self.bounds.iter().all(|(v, (lo, hi))| vals[v] >= lo - tol && vals[v] <= hi + tol)
    }
}

#[test]
fn model_json_round_trips() {
    for (variant, spec) in all_specs() {
        for mode in [LowerMode::Plus, LowerMode::Lifted] {
            let ir = lowered(&spec, mode);
            let text = emit_json(&ir);
            let back = parse_model(&text).unwrap_or_else(|e| panic!("{variant}: {e}"));
            assert_eq!(back, ir, "{variant} {mode:?}");
            assert_eq!(emit_json(&back), text);
        }
    }
}

#[test]
fn instance_json_round_trips() {
    for (variant, spec) in all_specs() {
        let text = instance_json(&spec);
        let back = parse_instance(&text).unwrap_or_else(|e| panic!("{variant}: {e}"));
        assert_eq!(instance_json(&back), text, "{variant}");
        assert_eq!(build(&back).unwrap().atoms().count(), build(&spec).unwrap().atoms().count());
    }
}

/// The LP text, read back by an independent parser, accepts exactly the
/// points the IR accepts.
#[test]
fn lp_text_matches_the_model() {
    let mut linear = 0;
    for (variant, spec) in all_specs() {
        let ir = lowered(&spec, LowerMode::Plus);
        let lp = match emit_lp(&ir) {
            Ok(s) => s,
            Err(DfcError::NonlinearAtomPresent(_)) => {
                assert!(!ir.is_linear(), "{variant}");
                continue;
            }
            Err(e) => panic!("{variant}: {e}"),
        };
        linear += 1;
        let file = read_lp(&lp);
        assert_eq!(file.rows.len(), ir.cons.len() + 1);
        let mut r = rng(11);
        let (mut inside, mut outside) = (0, 0);
        for _ in 0..2000 {
            let z: Vec<f64> = ir
                .vars
                .iter()
                .map(|v| if v.lb == 0.0 && v.ub == 1.0 { r.random_range(0.0..1.0) } else { r.random_range(-3.0..3.0) })
                .collect();
            let mut z = z;
            // Land on the simplex row half the time.
            if r.random_bool(0.5) {
                let s: f64 = ir.y.iter().map(|&i| z[i]).sum();
                for &i in &ir.y {
                    z[i] /= s;
                }
            }
            let vals: HashMap<String, f64> = ir.vars.iter().zip(&z).map(|(v, x)| (v.name.clone(), *x)).collect();
            let viol = ir.max_violation(&z);
            if viol.abs() < 1e-7 {
                continue;
            }
            let ok = viol < 0.0 || viol <= 1e-9;
            assert_eq!(file.feasible(&vals, 1e-9), ok, "{variant} at {z:?}");
            if ok {
                inside += 1;
            } else {
                outside += 1;
            }
        }
        assert!(outside > 0, "{variant}: no infeasible samples");
        let _ = inside;
    }
    assert!(linear >= 3, "{linear} linear fixtures");
}

#[test]
fn conic_models_refuse_lp_output() {
    let ir = lowered(&fixtures::ex1(false), LowerMode::Lifted);
    match emit_lp(&ir) {
        Err(DfcError::NonlinearAtomPresent(m)) => assert!(m.contains("soc"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn lifting_removes_positive_parts() {
    for r in [fixtures::ex7_ideal_r(), 2.0] {
        let spec = fixtures::ex7(r, true);
        let plus = lowered(&spec, LowerMode::Plus);
        let lifted = lowered(&spec, LowerMode::Lifted);
        assert!(plus.count("gaugeplus") > 0);
        assert_eq!(lifted.count("gaugeplus"), 0);
        assert!(lifted.vars.len() > plus.vars.len());
    }
}

fn lift_pair() -> Vec<(ModelIR, ModelIR)> {
    [fixtures::ex7_ideal_r(), 2.0]
        .iter()
        .map(|&r| {
            let spec = fixtures::ex7(r, true);
            (lowered(&spec, LowerMode::Plus), lowered(&spec, LowerMode::Lifted))
        })
        .collect()
}

proptest! {
    #![proptest_config(config(200, 0x11f7))]

    /// Both lowerings project to the same set in `(x, y)`.
    #[test]
    fn lifted_and_plus_relaxations_agree(u in direction(5), which in 0usize..2) {
        let pairs = lift_pair();
        let (plus, lifted) = &pairs[which];
        let opts = OptOptions::default();
        let a = maximize_over_relaxation(plus, &xy_objective(plus, &u[..3], &u[3..]), &opts).unwrap();
        let b = maximize_over_relaxation(lifted, &xy_objective(lifted, &u[..3], &u[3..]), &opts).unwrap();
        prop_assert!(!a.box_active && !b.box_active);
        prop_assert!((a.value - b.value).abs() <= 1e-6 * (1.0 + a.value.abs()), "{} vs {}", a.value, b.value);
    }
}
