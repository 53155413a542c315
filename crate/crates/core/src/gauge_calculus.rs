//! Constraint atoms over indexed scalar variables and the lowering of a set
//! expression to the epigraph of its gauge.
//!
//! The lowering works on affine expressions rather than bare variables, so a
//! block can be instantiated at `(x − b·y, y)`, at `(Σ dⱼzⱼ, r)` or with `y`
//! identically zero without special cases. Every emitted atom is positively
//! homogeneous in the variables.

use serde::{Deserialize, Serialize};

use crate::error::{DfcError, Result};
use crate::linalg::{self, norm};
use crate::sampling;
use crate::set_core::{self, flatten_max, CatalogFunction, ConeKind, OracleOptions, SetExpr, SignedBasis};

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Var {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

/// Variable table with a deterministic counter for auxiliary names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarPool {
    vars: Vec<Var>,
    counter: usize,
}

impl VarPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, kind: VarKind, lb: f64, ub: f64) -> usize {
        self.vars.push(Var { name: name.to_string(), kind, lb, ub });
        self.vars.len() - 1
    }

    /// Adds `"{prefix}{k}"` with the next counter value `k`.
    pub fn fresh(&mut self, prefix: &str, lb: f64, ub: f64) -> usize {
        self.counter += 1;
        let name = format!("{prefix}{}", self.counter);
        self.add(&name, VarKind::Continuous, lb, ub)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn var(&self, i: usize) -> &Var {
        &self.vars[i]
    }

    pub fn var_mut(&mut self, i: usize) -> &mut Var {
        &mut self.vars[i]
    }

    pub fn into_vars(self) -> Vec<Var> {
        self.vars
    }

    pub fn from_vars(vars: Vec<Var>) -> Self {
        VarPool { counter: vars.len(), vars }
    }
}

/// `Σ coef·var + constant`, kept sorted by variable with no zero coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        AffExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(v: usize) -> Self {
        AffExpr { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn term(v: usize, c: f64) -> Self {
        Self::from_terms(vec![(v, c)], 0.0)
    }

    pub fn from_terms(mut terms: Vec<(usize, f64)>, constant: f64) -> Self {
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        AffExpr { terms: merged, constant }
    }

    pub fn plus(&self, other: &AffExpr) -> AffExpr {
        let mut t = self.terms.clone();
        t.extend_from_slice(&other.terms);
        Self::from_terms(t, self.constant + other.constant)
    }

    pub fn minus(&self, other: &AffExpr) -> AffExpr {
        self.plus(&other.scaled(-1.0))
    }

    pub fn scaled(&self, s: f64) -> AffExpr {
        Self::from_terms(self.terms.iter().map(|(v, c)| (*v, c * s)).collect(), self.constant * s)
    }

    /// `Σ coefs[i]·exprs[i]`
    pub fn combination(exprs: &[AffExpr], coefs: &[f64]) -> AffExpr {
        let mut t = Vec::new();
        let mut c0 = 0.0;
        for (e, c) in exprs.iter().zip(coefs) {
            if *c == 0.0 {
                continue;
            }
            t.extend(e.terms.iter().map(|(v, a)| (*v, a * c)));
            c0 += e.constant * c;
        }
        Self::from_terms(t, c0)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * z[*v]).sum::<f64>() + self.constant
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    /// Dense coefficient vector over `n` variables.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        for (v, c) in &self.terms {
            d[*v] += c;
        }
        d
    }

    pub fn max_var(&self) -> Option<usize> {
        self.terms.last().map(|t| t.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

/// A single constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    /// `expr rel rhs`
    Linear { expr: AffExpr, rel: Rel, rhs: f64 },
    /// `‖args‖₂ ≤ bound`
    Soc { args: Vec<AffExpr>, bound: AffExpr },
    /// `(cl f̃)(xs, y) ≤ 0`
    Perspective { f: CatalogFunction, xs: Vec<AffExpr>, y: AffExpr },
    /// `γ_set(Σⱼ dⱼ·(exprⱼ)⁺) ≤ rhs` with unit directions `dⱼ`.
    GaugePlus { set: SetExpr, terms: Vec<(Vec<f64>, AffExpr)>, rhs: AffExpr },
}

impl Atom {
    pub fn le(expr: AffExpr, rhs: f64) -> Atom {
        let c = expr.constant;
        Atom::Linear { expr: AffExpr { constant: 0.0, ..expr }, rel: Rel::Le, rhs: rhs - c }
    }

    pub fn ge(expr: AffExpr, rhs: f64) -> Atom {
        let c = expr.constant;
        Atom::Linear { expr: AffExpr { constant: 0.0, ..expr }, rel: Rel::Ge, rhs: rhs - c }
    }

    pub fn eq(expr: AffExpr, rhs: f64) -> Atom {
        let c = expr.constant;
        Atom::Linear { expr: AffExpr { constant: 0.0, ..expr }, rel: Rel::Eq, rhs: rhs - c }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Atom::Linear { .. } => "lin",
            Atom::Soc { .. } => "soc",
            Atom::Perspective { .. } => "persp",
            Atom::GaugePlus { .. } => "gaugeplus",
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Atom::Linear { .. })
    }

    /// Amount by which the point `z` violates the atom (≤ 0 when satisfied).
    pub fn violation(&self, z: &[f64]) -> f64 {
        match self {
            Atom::Linear { expr, rel, rhs } => {
                let v = expr.eval(z);
                match rel {
                    Rel::Le => v - rhs,
                    Rel::Ge => rhs - v,
                    Rel::Eq => (v - rhs).abs(),
                }
            }
            Atom::Soc { args, bound } => {
                let a: Vec<f64> = args.iter().map(|e| e.eval(z)).collect();
                norm(&a) - bound.eval(z)
            }
            Atom::Perspective { f, xs, y } => {
                let x: Vec<f64> = xs.iter().map(|e| e.eval(z)).collect();
                f.persp(&x, y.eval(z))
            }
            Atom::GaugePlus { set, terms, rhs } => {
                let w = gauge_plus_argument(terms, z);
                let n = w.len();
                let g = set_core::gauge_unchecked(set, &vec![0.0; n], &w, &OracleOptions::default())
                    .map(|g| g.value)
                    .unwrap_or(f64::INFINITY);
                g - rhs.eval(z)
            }
        }
    }

    /// Every variable index mentioned by the atom.
    pub fn vars(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut push = |e: &AffExpr| out.extend(e.terms.iter().map(|t| t.0));
        match self {
            Atom::Linear { expr, .. } => push(expr),
            Atom::Soc { args, bound } => {
                args.iter().for_each(&mut push);
                push(bound);
            }
            Atom::Perspective { xs, y, .. } => {
                xs.iter().for_each(&mut push);
                push(y);
            }
            Atom::GaugePlus { terms, rhs, .. } => {
                terms.iter().for_each(|t| push(&t.1));
                push(rhs);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Rewrites every affine expression through `f`.
    pub fn map_exprs(&self, f: &dyn Fn(&AffExpr) -> AffExpr) -> Atom {
        match self {
            Atom::Linear { expr, rel, rhs } => Atom::Linear { expr: f(expr), rel: *rel, rhs: *rhs },
            Atom::Soc { args, bound } => Atom::Soc { args: args.iter().map(f).collect(), bound: f(bound) },
            Atom::Perspective { f: func, xs, y } => {
                Atom::Perspective { f: func.clone(), xs: xs.iter().map(f).collect(), y: f(y) }
            }
            Atom::GaugePlus { set, terms, rhs } => Atom::GaugePlus {
                set: set.clone(),
                terms: terms.iter().map(|(d, e)| (d.clone(), f(e))).collect(),
                rhs: f(rhs),
            },
        }
    }
}

/// `Σⱼ dⱼ·(exprⱼ(z))⁺`
pub fn gauge_plus_argument(terms: &[(Vec<f64>, AffExpr)], z: &[f64]) -> Vec<f64> {
    let n = terms.first().map(|t| t.0.len()).unwrap_or(0);
    let mut w = vec![0.0; n];
    for (d, e) in terms {
        let v = e.eval(z).max(0.0);
        if v > 0.0 {
            for (wi, di) in w.iter_mut().zip(d) {
                *wi += di * v;
            }
        }
    }
    w
}

/// An atom with its origin label.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub atom: Atom,
    pub label: String,
}

/// Atoms plus the auxiliary variables introduced while building them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintBlock {
    pub constraints: Vec<Constraint>,
    pub aux: Vec<usize>,
}

impl ConstraintBlock {
    pub fn from_atoms(atoms: Vec<Atom>, label: &str) -> Self {
        ConstraintBlock {
            constraints: atoms.into_iter().map(|atom| Constraint { atom, label: label.to_string() }).collect(),
            aux: Vec::new(),
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.constraints.iter().map(|c| &c.atom)
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn count(&self, type_name: &str) -> usize {
        self.atoms().filter(|a| a.type_name() == type_name).count()
    }

    /// Largest violation over all atoms at `z`.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        self.atoms().map(|a| a.violation(z)).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn mul_row(row: &[f64], xs: &[AffExpr]) -> AffExpr {
    AffExpr::combination(xs, row)
}

/// True when `e` is a nonnegative combination of variables with nonnegative
/// lower bounds.
fn obviously_nonneg(e: &AffExpr, pool: &VarPool) -> bool {
    e.constant >= 0.0 && e.terms.iter().all(|(v, c)| *c > 0.0 && pool.var(*v).lb >= 0.0)
}

/// Atoms whose feasible set is `{(x, y) : x ∈ y·S, y ≥ 0}` (closure at `y = 0`
/// giving the recession cone).
pub fn epi_gauge_exprs(s: &SetExpr, xs: &[AffExpr], y: &AffExpr, pool: &mut VarPool) -> Result<Vec<Atom>> {
    if let Some(n) = s.dim() {
        if n != xs.len() {
            return Err(DfcError::DimensionMismatch { expected: n, got: xs.len() });
        }
    }
    let mut atoms = Vec::new();
    lower(s, xs, y, pool, &mut atoms)?;
    if !y.is_zero() && !obviously_nonneg(y, pool) {
        atoms.push(Atom::ge(y.clone(), 0.0));
    }
    Ok(atoms)
}

/// Epigraph of `γ_{S−b}` at `(x, y)`: the lowering of `S` at `(x + b·y, y)`.
pub fn epi_gauge_shifted(
    s: &SetExpr,
    b: &[f64],
    xs: &[AffExpr],
    y: &AffExpr,
    pool: &mut VarPool,
) -> Result<Vec<Atom>> {
    let shifted: Vec<AffExpr> = xs.iter().zip(b).map(|(x, bj)| x.plus(&y.scaled(*bj))).collect();
    epi_gauge_exprs(s, &shifted, y, pool)
}

fn lower(s: &SetExpr, xs: &[AffExpr], y: &AffExpr, pool: &mut VarPool, out: &mut Vec<Atom>) -> Result<()> {
    let n = xs.len();
    match s {
        SetExpr::BoxSet { lo, hi } => {
            for j in 0..n {
                if lo[j] == hi[j] {
                    out.push(Atom::eq(xs[j].minus(&y.scaled(hi[j])), 0.0));
                    continue;
                }
                if lo[j].is_finite() {
                    out.push(Atom::le(y.scaled(lo[j]).minus(&xs[j]), 0.0));
                }
                if hi[j].is_finite() {
                    out.push(Atom::le(xs[j].minus(&y.scaled(hi[j])), 0.0));
                }
            }
        }
        SetExpr::Ball { center, radius } => {
            let args = xs.iter().zip(center).map(|(x, c)| x.minus(&y.scaled(*c))).collect();
            out.push(Atom::Soc { args, bound: y.scaled(*radius) });
        }
        SetExpr::HPolyhedron { a, b } => {
            for (row, bi) in a.iter().zip(b) {
                out.push(Atom::le(mul_row(row, xs).minus(&y.scaled(*bi)), 0.0));
            }
        }
        SetExpr::VPolytope { vertices } => {
            let lam: Vec<usize> = vertices.iter().map(|_| pool.fresh("lam", 0.0, f64::INFINITY)).collect();
            for j in 0..n {
                let mut e = xs[j].clone();
                for (l, v) in lam.iter().zip(vertices) {
                    e = e.plus(&AffExpr::term(*l, -v[j]));
                }
                out.push(Atom::eq(e, 0.0));
            }
            let sum = AffExpr::from_terms(lam.iter().map(|l| (*l, 1.0)).collect(), 0.0);
            out.push(Atom::eq(sum.minus(y), 0.0));
        }
        SetExpr::ConicRep { a, b, c, cones } => {
            let p = b.first().map(|r| r.len()).unwrap_or(0);
            let z: Vec<AffExpr> = (0..p)
                .map(|_| AffExpr::var(pool.fresh("z", f64::NEG_INFINITY, f64::INFINITY)))
                .collect();
            let rows: Vec<AffExpr> = (0..a.len())
                .map(|i| {
                    let mut e = mul_row(&a[i], xs).plus(&y.scaled(c[i]));
                    if p > 0 {
                        e = e.plus(&mul_row(&b[i], &z));
                    }
                    e
                })
                .collect();
            let mut off = 0;
            for k in cones {
                let r = &rows[off..off + k.dim];
                match k.kind {
                    ConeKind::Nonneg => r.iter().for_each(|e| out.push(Atom::ge(e.clone(), 0.0))),
                    ConeKind::Zero => r.iter().for_each(|e| out.push(Atom::eq(e.clone(), 0.0))),
                    ConeKind::Soc if k.dim == 1 => out.push(Atom::ge(r[0].clone(), 0.0)),
                    ConeKind::Soc => out.push(Atom::Soc { args: r[1..].to_vec(), bound: r[0].clone() }),
                }
                off += k.dim;
            }
        }
        SetExpr::LevelSet { f } => {
            let mut parts = Vec::new();
            flatten_max(f, &mut parts);
            for part in parts {
                match part {
                    CatalogFunction::Affine { a, beta } => {
                        out.push(Atom::le(mul_row(a, xs).plus(&y.scaled(*beta)), 0.0));
                    }
                    other => out.push(Atom::Perspective { f: other.clone(), xs: xs.to_vec(), y: y.clone() }),
                }
            }
        }
        SetExpr::Translate { child, shift } => {
            let shifted: Vec<AffExpr> = xs.iter().zip(shift).map(|(x, t)| x.minus(&y.scaled(*t))).collect();
            lower(child, &shifted, y, pool, out)?;
        }
        SetExpr::Scale { child, factor } => {
            lower(child, xs, &y.scaled(*factor), pool, out)?;
        }
        SetExpr::SumCone { child, rays } => {
            let w: Vec<usize> = (0..n).map(|_| pool.fresh("w", f64::NEG_INFINITY, f64::INFINITY)).collect();
            let mu: Vec<usize> = rays.iter().map(|_| pool.fresh("mu", 0.0, f64::INFINITY)).collect();
            for j in 0..n {
                let mut e = xs[j].minus(&AffExpr::var(w[j]));
                for (m, r) in mu.iter().zip(rays) {
                    e = e.plus(&AffExpr::term(*m, -r[j]));
                }
                out.push(Atom::eq(e, 0.0));
            }
            let wx: Vec<AffExpr> = w.iter().map(|v| AffExpr::var(*v)).collect();
            lower(child, &wx, y, pool, out)?;
        }
        SetExpr::Intersect { children } => {
            for c in children {
                lower(c, xs, y, pool, out)?;
            }
        }
    }
    Ok(())
}

/// Epigraph block of `γ_{S−b}` over the variables `x` and `y`.
pub fn epi_gauge(s: &SetExpr, b: &[f64], x: &[usize], y: usize, pool: &mut VarPool) -> Result<ConstraintBlock> {
    s.validate()?;
    if !set_core::contains(s, b, 1e-7)? {
        return Err(DfcError::BasePointNotInSet);
    }
    let before = pool.len();
    let xs: Vec<AffExpr> = x.iter().map(|v| AffExpr::var(*v)).collect();
    let atoms = epi_gauge_shifted(s, b, &xs, &AffExpr::var(y), pool)?;
    let mut block = ConstraintBlock::from_atoms(atoms, "epigauge");
    block.aux = (before..pool.len()).collect();
    Ok(block)
}

/// Directions `uʲ = (−sⱼtⱼ)⁺ sⱼ vʲ` of the positive-part terms.
pub fn cone_sum_directions(basis: &SignedBasis) -> Vec<Vec<f64>> {
    basis
        .v
        .iter()
        .zip(basis.s.iter().zip(&basis.t))
        .map(|(v, (s, t))| {
            let f = (-(*s as f64) * (*t as f64)).max(0.0) * (*s as f64);
            linalg::scale(v, f)
        })
        .collect()
}

/// Coefficients `((1−|sⱼ|) + (sⱼtⱼ)⁺)·tⱼ` of the side conditions `κⱼ vʲ·x ≥ 0`.
pub fn cone_sum_side_coefs(basis: &SignedBasis) -> Vec<f64> {
    basis
        .s
        .iter()
        .zip(&basis.t)
        .map(|(s, t)| {
            let s = *s as f64;
            let t = *t as f64;
            ((1.0 - s.abs()) + (s * t).max(0.0)) * t
        })
        .collect()
}

/// Randomized probe of `C ∩ K` compactness and `((C∩K) − K) ∩ K = C∩K`.
/// Returns a witness of failure.
pub fn probe_cone_condition(
    c: &SetExpr,
    basis: &SignedBasis,
    probes: usize,
    seed: u64,
) -> Result<Option<(String, Vec<f64>)>> {
    let n = basis.v.len();
    let opts = OracleOptions::default();
    let active: Vec<usize> = (0..n).filter(|j| basis.s[*j] != 0).collect();
    if active.is_empty() {
        return Ok(None);
    }
    let mut rng = sampling::rng(seed);
    let zero = vec![0.0; n];
    for _ in 0..probes {
        let alpha: Vec<f64> = active.iter().map(|_| rng.random::<f64>()).collect();
        let mut d = vec![0.0; n];
        for (a, j) in alpha.iter().zip(&active) {
            d = linalg::axpy(&d, a * basis.s[*j] as f64, &basis.v[*j]);
        }
        if norm(&d) < 1e-9 {
            continue;
        }
        let g = set_core::gauge_unchecked(c, &zero, &d, &opts)?;
        if g.value <= 1e-9 {
            return Ok(Some(("C ∩ K is not compact".into(), d)));
        }
        if !g.value.is_finite() {
            continue;
        }
        let shrink = rng.random::<f64>() * (1.0 - 1e-9) / g.value;
        let beta: Vec<f64> = alpha.iter().map(|a| a * shrink * rng.random::<f64>()).collect();
        let mut q = vec![0.0; n];
        for (b, j) in beta.iter().zip(&active) {
            q = linalg::axpy(&q, b * basis.s[*j] as f64, &basis.v[*j]);
        }
        if !set_core::contains(c, &q, 1e-7)? {
            return Ok(Some(("((C∩K) − K) ∩ K ≠ C∩K".into(), q)));
        }
    }
    Ok(None)
}

/// Epigraph of `γ_{C∩K+M}` with `K = cone(sⱼvʲ)`, `M = cone(tⱼvʲ)`: one
/// positive-part gauge atom plus linear side conditions.
pub fn epi_gauge_cone_sum(
    c: &SetExpr,
    basis: &SignedBasis,
    x: &[AffExpr],
    y: &AffExpr,
    probes: usize,
    seed: u64,
) -> Result<ConstraintBlock> {
    basis.validate()?;
    c.validate()?;
    let n = basis.v.len();
    if !set_core::contains(c, &vec![0.0; n], 1e-7)? {
        return Err(DfcError::BasePointNotInSet);
    }
    if let Some((reason, witness)) = probe_cone_condition(c, basis, probes, seed)? {
        return Err(DfcError::ConditionViolated { reason, witness });
    }
    let mut atoms = Vec::new();
    let dirs = cone_sum_directions(basis);
    let terms: Vec<(Vec<f64>, AffExpr)> = dirs
        .iter()
        .filter(|u| norm(u) > 0.0)
        .map(|u| (u.clone(), AffExpr::combination(x, u)))
        .collect();
    if !terms.is_empty() {
        atoms.push(Atom::GaugePlus { set: c.clone(), terms, rhs: y.clone() });
    }
    for (j, k) in cone_sum_side_coefs(basis).iter().enumerate() {
        if *k != 0.0 {
            atoms.push(Atom::ge(AffExpr::combination(x, &linalg::scale(&basis.v[j], *k)), 0.0));
        }
    }
    Ok(ConstraintBlock::from_atoms(atoms, "gaugeconechar"))
}
