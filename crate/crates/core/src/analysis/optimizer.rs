//! Kelley cutting-plane maximization of a linear objective over a conjunction
//! of atoms.
//!
//! Linear atoms enter the master LP directly. Second-order-cone and
//! perspective atoms are separated by gradient cuts at the current master
//! point; because every atom is positively homogeneous, each gradient cut
//! passes through the origin of its argument space. Positive-part gauge atoms
//! are lifted first: `γ_G(Σ dⱼ(eⱼ)⁺) ≤ r` becomes `zⱼ ≥ eⱼ, zⱼ ≥ 0` plus the
//! gauge epigraph of `G` at `(Σ dⱼzⱼ, r)`. The lift is exact when the gauge is
//! nondecreasing along the `dⱼ`, which the builders check before emitting
//! such atoms.

use crate::analysis::lp::{CutLp, LpStatus};
use crate::error::{DfcError, Result};
use crate::gauge_calculus::{epi_gauge_exprs, AffExpr, Atom, Rel, Var, VarPool};
use crate::linalg::{dot, norm};
use crate::set_core::CatalogFunction;

#[derive(Debug, Clone, Copy)]
pub struct OptOptions {
    /// Radius of the artificial bounding box.
    pub box_radius: f64,
    /// Stop once no atom is violated by more than this.
    pub feas_tol: f64,
    /// Cutting-plane round limit.
    pub max_iter: usize,
}

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions { box_radius: 1e3, feas_tol: 1e-8, max_iter: 5000 }
    }
}

impl OptOptions {
    pub fn with_feas_tol(mut self, tol: f64) -> Self {
        self.feas_tol = tol;
        self
    }

    pub fn with_box_radius(mut self, radius: f64) -> Self {
        self.box_radius = radius;
        self
    }
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub value: f64,
    /// Values of the caller's variables (auxiliaries from lifting are dropped).
    pub point: Vec<f64>,
    /// An artificial box side carries dual weight at the optimum.
    pub box_active: bool,
    pub iterations: usize,
    pub max_violation: f64,
}

enum Nonlinear {
    Soc { args: Vec<AffExpr>, bound: AffExpr },
    Persp { f: CatalogFunction, xs: Vec<AffExpr>, y: AffExpr },
}

/// Rewrites positive-part gauge atoms into lifted form; output atoms are
/// linear, second-order cone or perspective.
pub fn lift_atoms(atoms: &[Atom], pool: &mut VarPool) -> Result<Vec<Atom>> {
    let mut out = Vec::with_capacity(atoms.len());
    for a in atoms {
        match a {
            Atom::GaugePlus { set, terms, rhs } => {
                let n = terms.first().map(|t| t.0.len()).or_else(|| set.dim()).unwrap_or(0);
                let mut w: Vec<AffExpr> = vec![AffExpr::zero(); n];
                for (d, e) in terms {
                    let z = pool.fresh("zp", 0.0, f64::INFINITY);
                    out.push(Atom::ge(AffExpr::var(z).minus(e), 0.0));
                    for (wi, di) in w.iter_mut().zip(d) {
                        if *di != 0.0 {
                            *wi = wi.plus(&AffExpr::term(z, *di));
                        }
                    }
                }
                out.extend(epi_gauge_exprs(set, &w, rhs, pool)?);
            }
            other => out.push(other.clone()),
        }
    }
    Ok(out)
}

/// Dense linear row for `Σ gₖ·exprₖ ≤ 0`, returned as `(coefs, rhs)`.
fn linear_cut(exprs: &[&AffExpr], g: &[f64], nvars: usize) -> (Vec<f64>, f64) {
    let mut row = vec![0.0; nvars];
    let mut c0 = 0.0;
    for (e, gk) in exprs.iter().zip(g) {
        if *gk == 0.0 {
            continue;
        }
        for (v, c) in &e.terms {
            row[*v] += gk * c;
        }
        c0 += gk * e.constant;
    }
    (row, -c0)
}

fn persp_value(f: &CatalogFunction, x: &[f64], y: f64, tol: f64) -> f64 {
    if y < -tol {
        return f64::INFINITY;
    }
    let y = y.max(0.0);
    match f {
        CatalogFunction::GeoMeanDeficit { shift, .. } => {
            // Domain slack within tolerance is treated as the boundary.
            if x.iter().any(|xj| xj - shift * y > tol) {
                return f64::INFINITY;
            }
            let xc: Vec<f64> = x.iter().map(|xj| xj.min(shift * y)).collect();
            f.persp(&xc, y)
        }
        // Near the closure boundary `y = 0` the value is taken at `y = tol`,
        // which accepts points within about `√tol` of the recession cone.
        _ => f.persp(x, y.max(tol)),
    }
}

fn violation_row(row: &[f64], rhs: f64, z: &[f64]) -> f64 {
    dot(row, z) - rhs
}

/// Maximizes `c·z` over the atoms with variable bounds from `vars`.
pub fn maximize_atoms(vars: &[Var], atoms: &[Atom], c: &[f64], opts: &OptOptions) -> Result<OptResult> {
    let n_orig = vars.len();
    let mut pool = VarPool::from_vars(vars.to_vec());
    let lifted = lift_atoms(atoms, &mut pool)?;
    let n = pool.len();
    let mut obj = c.to_vec();
    obj.resize(n, 0.0);
    let lb: Vec<f64> = pool.vars().iter().map(|v| v.lb).collect();
    let ub: Vec<f64> = pool.vars().iter().map(|v| v.ub).collect();
    if lb.iter().zip(&ub).any(|(l, u)| l > u) {
        return Err(DfcError::Infeasible);
    }
    let mut lp = CutLp::new(&obj, &lb, &ub, opts.box_radius);
    let mut nonlinear = Vec::new();
    for a in lifted {
        match a {
            Atom::Linear { expr, rel, rhs } => {
                let row = expr.dense(n);
                let r = rhs - expr.constant;
                match rel {
                    Rel::Le => lp.add_le(&row, r),
                    Rel::Ge => lp.add_le(&row.iter().map(|v| -v).collect::<Vec<_>>(), -r),
                    Rel::Eq => lp.add_eq(&row, r),
                }
            }
            Atom::Soc { args, bound } => nonlinear.push(Nonlinear::Soc { args, bound }),
            Atom::Perspective { f, xs, y } => nonlinear.push(Nonlinear::Persp { f, xs, y }),
            Atom::GaugePlus { .. } => unreachable!("lifted above"),
        }
    }
    let tol = opts.feas_tol;
    // Numerical breakdown of a nearly degenerate master late in the loop
    // returns the last iterate if it is already feasible to this level.
    let loose = (100.0 * tol).max(1e-6);
    let mut iterations = 0;
    let mut last: Option<OptResult> = None;
    loop {
        let status = lp.solve();
        if status != LpStatus::Optimal {
            if let Some(r) = last.filter(|r| r.max_violation <= loose) {
                return Ok(r);
            }
            return Err(match status {
                LpStatus::Infeasible => DfcError::Infeasible,
                _ => DfcError::IterationLimit { best_bound: lp.value() },
            });
        }
        let z = lp.point().to_vec();
        let mut worst = 0.0f64;
        let mut cuts: Vec<(Vec<f64>, f64)> = Vec::new();
        for nl in &nonlinear {
            match nl {
                Nonlinear::Soc { args, bound } => {
                    let a: Vec<f64> = args.iter().map(|e| e.eval(&z)).collect();
                    let na = norm(&a);
                    let v = na - bound.eval(&z);
                    if v > tol {
                        worst = worst.max(v);
                        let mut exprs: Vec<&AffExpr> = args.iter().collect();
                        exprs.push(bound);
                        let mut g: Vec<f64> = if na > 0.0 { a.iter().map(|ai| ai / na).collect() } else { vec![0.0; a.len()] };
                        g.push(-1.0);
                        cuts.push(linear_cut(&exprs, &g, n));
                    }
                }
                Nonlinear::Persp { f, xs, y } => {
                    let xv: Vec<f64> = xs.iter().map(|e| e.eval(&z)).collect();
                    let yv = y.eval(&z);
                    let v = persp_value(f, &xv, yv, tol);
                    if v <= tol {
                        continue;
                    }
                    worst = worst.max(v);
                    let mut exprs: Vec<&AffExpr> = xs.iter().collect();
                    exprs.push(y);
                    let mut added = false;
                    for (gx, gy) in f.domain_cuts(&xv, yv, tol) {
                        let mut g = gx;
                        g.push(gy);
                        let cut = linear_cut(&exprs, &g, n);
                        if violation_row(&cut.0, cut.1, &z) > 0.1 * tol {
                            cuts.push(cut);
                            added = true;
                        }
                    }
                    if added {
                        continue;
                    }
                    let scale = 1.0 + xv.iter().fold(yv.abs(), |m, v| m.max(v.abs()));
                    let mut candidates = Vec::new();
                    if yv > 0.0 {
                        candidates.push(yv);
                    }
                    let mut d = 1e-1 * scale;
                    while d > 1e-14 * scale {
                        candidates.push(yv.max(0.0) + d);
                        d *= 0.5;
                    }
                    // Tangent at the current point when it is interior to the
                    // domain; otherwise the shifted tangent that separates best
                    // relative to its norm.
                    let mut best: Option<((Vec<f64>, f64), f64)> = None;
                    for yc in candidates {
                        if let Some((gx, gy)) = f.persp_grad(&xv, yc) {
                            let mut g = gx;
                            g.push(gy);
                            if !g.iter().all(|v| v.is_finite()) {
                                continue;
                            }
                            let cut = linear_cut(&exprs, &g, n);
                            let cn = norm(&cut.0).max(1e-300);
                            let viol = violation_row(&cut.0, cut.1, &z);
                            if viol > 1e-3 * tol * cn.min(1.0) {
                                if yc == yv {
                                    best = Some((cut, f64::INFINITY));
                                    break;
                                }
                                let score = viol / cn;
                                if best.as_ref().is_none_or(|b| score > b.1) {
                                    best = Some((cut, score));
                                }
                            }
                        }
                    }
                    if let Some((cut, _)) = best {
                        cuts.push(cut);
                    }
                }
            }
        }
        if worst <= tol {
            let point = z[..n_orig].to_vec();
            return Ok(OptResult {
                value: dot(&obj, &z),
                point,
                box_active: lp.box_active(),
                iterations,
                max_violation: worst,
            });
        }
        iterations += 1;
        if worst <= loose {
            last = Some(OptResult {
                value: dot(&obj, &z),
                point: z[..n_orig].to_vec(),
                box_active: lp.box_active(),
                iterations,
                max_violation: worst,
            });
        }
        if cuts.is_empty() || iterations >= opts.max_iter {
            if let Some(r) = last.filter(|r| r.max_violation <= loose) {
                return Ok(r);
            }
            return Err(DfcError::IterationLimit { best_bound: lp.value() });
        }
        for (row, rhs) in cuts {
            lp.add_le(&row, rhs);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge_calculus::VarKind;

    fn free_vars(k: usize) -> Vec<Var> {
        (0..k)
            .map(|i| Var { name: format!("v{i}"), kind: VarKind::Continuous, lb: f64::NEG_INFINITY, ub: f64::INFINITY })
            .collect()
    }

    #[test]
    fn disk_maximum() {
        let vars = free_vars(2);
        let atoms = vec![Atom::Soc { args: vec![AffExpr::var(0), AffExpr::var(1)], bound: AffExpr::constant(1.0) }];
        let r = maximize_atoms(&vars, &atoms, &[1.0, 1.0], &OptOptions::default()).unwrap();
        assert!((r.value - 2f64.sqrt()).abs() < 1e-7, "{}", r.value);
        assert!(!r.box_active);
    }

    #[test]
    fn parabola_epigraph_perspective() {
        // x² ≤ t·1 with t ≤ 1: max x = 1.
        let mut vars = free_vars(2);
        vars.push(Var { name: "y".into(), kind: VarKind::Continuous, lb: 1.0, ub: 1.0 });
        let f = CatalogFunction::Sum {
            parts: vec![
                CatalogFunction::QuadraticPlus { a: vec![1.0, 0.0], beta: 0.0, w: 1.0 },
                CatalogFunction::QuadraticPlus { a: vec![-1.0, 0.0], beta: 0.0, w: 1.0 },
                CatalogFunction::Affine { a: vec![0.0, -1.0], beta: 0.0 },
            ],
        };
        let atoms = vec![
            Atom::Perspective { f, xs: vec![AffExpr::var(0), AffExpr::var(1)], y: AffExpr::var(2) },
            Atom::le(AffExpr::var(1), 1.0),
        ];
        let r = maximize_atoms(&vars, &atoms, &[1.0, 0.0, 0.0], &OptOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-7, "{}", r.value);
    }

    #[test]
    fn geometric_mean_level_set() {
        // (2 - x1)(2 - x2) ≥ 1, x ≤ 2: max x1 + x2 at x1 = x2 = 1.
        let mut vars = free_vars(2);
        vars.push(Var { name: "y".into(), kind: VarKind::Continuous, lb: 1.0, ub: 1.0 });
        let f = CatalogFunction::GeoMeanDeficit { dim: 2, shift: 2.0, scale: 1.0 };
        let atoms = vec![Atom::Perspective { f, xs: vec![AffExpr::var(0), AffExpr::var(1)], y: AffExpr::var(2) }];
        let r = maximize_atoms(&vars, &atoms, &[1.0, 1.0, 0.0], &OptOptions::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn infeasible_system() {
        let vars = free_vars(1);
        let atoms = vec![Atom::le(AffExpr::var(0), -1.0), Atom::ge(AffExpr::var(0), 1.0)];
        assert_eq!(
            maximize_atoms(&vars, &atoms, &[1.0], &OptOptions::default()).unwrap_err(),
            DfcError::Infeasible
        );
    }
}
