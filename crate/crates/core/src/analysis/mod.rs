//! Optimization over continuous relaxations and strength certification.
//!
//! [`optimizer`] maximizes linear objectives over conjunctions of atoms,
//! [`vertex`] enumerates small polyhedra exactly, and [`checks`] compares
//! relaxation support values with those of the disjunction's hull.

pub mod checks;
pub mod lp;
pub mod optimizer;
pub mod report;
pub mod vertex;

use rayon::prelude::*;

use crate::error::{DfcError, Result};
use crate::gauge_calculus::{AffExpr, Atom, Rel};
use crate::model_ir_emit::{relaxed_vars, ModelIR};
use optimizer::{maximize_atoms, OptOptions, OptResult};

pub use checks::{
    check_bbj_condition, check_ideal, check_minkowski_ideal, check_par_conditions, check_sharp, piecewise_families,
    AnalysisOptions,
};
pub use report::{AnalysisReport, Verdict, Witness};

/// Maximizes `c·z` over the continuous relaxation of `ir`; `c` may be shorter
/// than the variable list and is padded with zeros.
pub fn maximize_over_relaxation(ir: &ModelIR, c: &[f64], opts: &OptOptions) -> Result<OptResult> {
    maximize_with(ir, c, &[], opts)
}

/// As [`maximize_over_relaxation`] with extra atoms appended.
pub fn maximize_with(ir: &ModelIR, c: &[f64], extra: &[Atom], opts: &OptOptions) -> Result<OptResult> {
    let vars = relaxed_vars(ir);
    if c.len() > vars.len() {
        return Err(DfcError::DimensionMismatch { expected: vars.len(), got: c.len() });
    }
    let mut obj = c.to_vec();
    obj.resize(vars.len(), 0.0);
    let mut atoms = ir.atoms();
    atoms.extend_from_slice(extra);
    maximize_atoms(&vars, &atoms, &obj, opts)
}

/// Objective vector over all IR variables with weights `u` on `x` and `v` on `y`.
pub fn xy_objective(ir: &ModelIR, u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; ir.vars.len()];
    for (j, &idx) in ir.x.iter().enumerate() {
        c[idx] = u.get(j).copied().unwrap_or(0.0);
    }
    for (i, &idx) in ir.y.iter().enumerate() {
        c[idx] = v.get(i).copied().unwrap_or(0.0);
    }
    c
}

/// Maximal violation of the relaxation at `z`, with binaries relaxed to `[0, 1]`.
pub fn relaxation_violation(ir: &ModelIR, z: &[f64]) -> f64 {
    ir.max_violation(z)
}

/// `{z : Az ≤ b}` for a purely linear IR: every linear row plus the finite
/// variable bounds, with binaries relaxed.
pub fn relaxation_polyhedron(ir: &ModelIR) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let nv = ir.vars.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, atom) in ir.atoms().iter().enumerate() {
        match atom {
            Atom::Linear { expr, rel, rhs } => {
                let row = expr.dense(nv);
                let r = rhs - expr.constant;
                if matches!(rel, Rel::Le | Rel::Eq) {
                    a.push(row.clone());
                    b.push(r);
                }
                if matches!(rel, Rel::Ge | Rel::Eq) {
                    a.push(row.iter().map(|v| -v).collect());
                    b.push(-r);
                }
            }
            other => return Err(DfcError::NonlinearAtomPresent(format!("atom {} ({})", i + 1, other.type_name()))),
        }
    }
    for (j, v) in relaxed_vars(ir).iter().enumerate() {
        if v.ub.is_finite() {
            a.push(AffExpr::var(j).dense(nv));
            b.push(v.ub);
        }
        if v.lb.is_finite() {
            a.push(AffExpr::term(j, -1.0).dense(nv));
            b.push(-v.lb);
        }
    }
    Ok((a, b))
}

/// Evaluates `f` over `0..count` in parallel and returns the results in index
/// order. `jobs = Some(1)` runs on the calling thread.
pub fn par_eval<T, F>(count: usize, jobs: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match jobs {
        Some(1) => (0..count).map(f).collect(),
        Some(j) => match rayon::ThreadPoolBuilder::new().num_threads(j).build() {
            Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
            Err(_) => (0..count).map(f).collect(),
        },
        None => (0..count).into_par_iter().map(f).collect(),
    }
}
