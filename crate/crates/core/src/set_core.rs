//! Convex set expressions and their oracles: support function, membership,
//! gauge, recession cone, exposed points and polyhedral tangent cones.
//!
//! Variants with a closed form (boxes, balls, point lists, translations,
//! scalings, sums with finitely generated cones) are answered directly. The
//! others are lowered to a constraint block through the gauge epigraph and
//! handed to the cutting-plane optimizer.

use serde::{Deserialize, Serialize};

use crate::analysis::optimizer::{self, OptOptions};
use crate::error::{DfcError, Result};
use crate::gauge_calculus::{epi_gauge_exprs, AffExpr, Atom, Rel, VarKind, VarPool};
use crate::linalg::{self, dot, norm};
use crate::sampling;

/// Serialization of extended reals: finite values as numbers, infinities as
/// the strings `"inf"` / `"-inf"`.
pub mod ext_real {
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v == f64::INFINITY {
            Repr::Text("inf".into())
        } else if v == f64::NEG_INFINITY {
            Repr::Text("-inf".into())
        } else {
            Repr::Num(v)
        }
    }

    fn from_repr<E: de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("expected number or \"inf\"/\"-inf\", got {other:?}"))),
            },
        }
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let r: Vec<Repr> = v.iter().map(|x| to_repr(*x)).collect();
            r.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            let r: Vec<Repr> = Vec::deserialize(d)?;
            r.into_iter().map(from_repr).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Nonneg,
    Zero,
    Soc,
}

/// One slice of a product cone. For `Soc` the first row is the bound and the
/// remaining `dim - 1` rows form the norm argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cone {
    pub kind: ConeKind,
    pub dim: usize,
}

impl Cone {
    pub fn nonneg(dim: usize) -> Self {
        Cone { kind: ConeKind::Nonneg, dim }
    }
    pub fn zero(dim: usize) -> Self {
        Cone { kind: ConeKind::Zero, dim }
    }
    pub fn soc(dim: usize) -> Self {
        Cone { kind: ConeKind::Soc, dim }
    }

    /// Amount by which `r` (length `dim`) lies outside the cone.
    pub fn violation(&self, r: &[f64]) -> f64 {
        match self.kind {
            ConeKind::Nonneg => r.iter().fold(0.0, |m, v| m.max(-v)),
            ConeKind::Zero => r.iter().fold(0.0, |m, v| m.max(v.abs())),
            ConeKind::Soc => (norm(&r[1..]) - r[0]).max(0.0),
        }
    }
}

/// Closed convex functions whose level sets `{f ≤ 0}` are representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CatalogFunction {
    /// `a·x + beta`
    Affine { a: Vec<f64>, beta: f64 },
    /// `w·((a·x + beta)⁺)²`, `w ≥ 0`
    QuadraticPlus { a: Vec<f64>, beta: f64, w: f64 },
    /// `scale − (∏ⱼ (shift − xⱼ))^{1/n}` on `xⱼ ≤ shift`; its level set at
    /// `scale = 1` is `∏(shift − xⱼ) ≥ 1`.
    GeoMeanDeficit { dim: usize, shift: f64, scale: f64 },
    /// Pointwise maximum.
    MaxOf { parts: Vec<CatalogFunction> },
    /// Pointwise sum.
    Sum { parts: Vec<CatalogFunction> },
}

impl CatalogFunction {
    pub fn dim(&self) -> Option<usize> {
        match self {
            CatalogFunction::Affine { a, .. } | CatalogFunction::QuadraticPlus { a, .. } => Some(a.len()),
            CatalogFunction::GeoMeanDeficit { dim, .. } => Some(*dim),
            CatalogFunction::MaxOf { parts } | CatalogFunction::Sum { parts } => {
                parts.iter().find_map(|p| p.dim())
            }
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            CatalogFunction::QuadraticPlus { w, .. } if *w < 0.0 => {
                Err(DfcError::InvalidSet("quadratic weight must be nonnegative".into()))
            }
            CatalogFunction::GeoMeanDeficit { dim, shift, .. } if *dim == 0 || *shift <= 0.0 => {
                Err(DfcError::InvalidSet("geometric mean needs dim ≥ 1 and shift > 0".into()))
            }
            CatalogFunction::MaxOf { parts } | CatalogFunction::Sum { parts } => {
                if parts.is_empty() {
                    return Err(DfcError::InvalidSet("empty function list".into()));
                }
                let d = self.dim();
                for p in parts {
                    p.check()?;
                    if p.dim() != d {
                        return Err(DfcError::InvalidSet("function parts differ in dimension".into()));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.persp(x, 1.0)
    }

    /// Closure of the perspective `y·f(x/y)`; `y = 0` gives the recession
    /// function, `y < 0` gives `+∞`.
    pub fn persp(&self, x: &[f64], y: f64) -> f64 {
        if y < 0.0 {
            return f64::INFINITY;
        }
        match self {
            CatalogFunction::Affine { a, beta } => dot(a, x) + beta * y,
            CatalogFunction::QuadraticPlus { a, beta, w } => {
                let t = (dot(a, x) + beta * y).max(0.0);
                if y > 0.0 {
                    w * t * t / y
                } else if t <= 0.0 || *w == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            CatalogFunction::GeoMeanDeficit { shift, scale, .. } => {
                let n = x.len() as f64;
                let mut logsum = 0.0;
                let mut on_boundary = false;
                for xj in x {
                    let a = shift * y - xj;
                    if a < 0.0 {
                        return f64::INFINITY;
                    }
                    if a == 0.0 {
                        on_boundary = true;
                    } else {
                        logsum += a.ln();
                    }
                }
                if on_boundary {
                    scale * y
                } else {
                    scale * y - (logsum / n).exp()
                }
            }
            CatalogFunction::MaxOf { parts } => {
                parts.iter().map(|p| p.persp(x, y)).fold(f64::NEG_INFINITY, f64::max)
            }
            CatalogFunction::Sum { parts } => parts.iter().map(|p| p.persp(x, y)).sum(),
        }
    }

    /// Gradient of the perspective at `(x, y)` with `y > 0` where it exists.
    pub fn persp_grad(&self, x: &[f64], y: f64) -> Option<(Vec<f64>, f64)> {
        if y <= 0.0 {
            return None;
        }
        match self {
            CatalogFunction::Affine { a, beta } => Some((a.clone(), *beta)),
            CatalogFunction::QuadraticPlus { a, beta, w } => {
                let t = dot(a, x) + beta * y;
                if t <= 0.0 {
                    Some((vec![0.0; a.len()], 0.0))
                } else {
                    let gx = linalg::scale(a, 2.0 * w * t / y);
                    let gy = 2.0 * w * t * beta / y - w * t * t / (y * y);
                    Some((gx, gy))
                }
            }
            CatalogFunction::GeoMeanDeficit { shift, scale, .. } => {
                let n = x.len() as f64;
                let a: Vec<f64> = x.iter().map(|xj| shift * y - xj).collect();
                if a.iter().any(|v| *v <= 0.0) {
                    return None;
                }
                let g = (a.iter().map(|v| v.ln()).sum::<f64>() / n).exp();
                let gx: Vec<f64> = a.iter().map(|aj| g / (n * aj)).collect();
                let gy = scale - shift * gx.iter().sum::<f64>();
                Some((gx, gy))
            }
            CatalogFunction::MaxOf { parts } => {
                let (best, _) = parts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, p.persp(x, y)))
                    .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
                parts[best].persp_grad(x, y)
            }
            CatalogFunction::Sum { parts } => {
                let mut gx = vec![0.0; x.len()];
                let mut gy = 0.0;
                for p in parts {
                    let (px, py) = p.persp_grad(x, y)?;
                    for (g, v) in gx.iter_mut().zip(&px) {
                        *g += v;
                    }
                    gy += py;
                }
                Some((gx, gy))
            }
        }
    }

    /// Linear homogeneous cuts `gx·x + gy·y ≤ 0` describing the domain of the
    /// perspective that `(x, y)` violates.
    pub fn domain_cuts(&self, x: &[f64], y: f64, tol: f64) -> Vec<(Vec<f64>, f64)> {
        let mut cuts = Vec::new();
        if y < -tol {
            cuts.push((vec![0.0; x.len()], -1.0));
        }
        match self {
            CatalogFunction::GeoMeanDeficit { shift, .. } => {
                for (j, xj) in x.iter().enumerate() {
                    if xj - shift * y > tol {
                        cuts.push((linalg::unit(x.len(), j), -shift));
                    }
                }
            }
            CatalogFunction::MaxOf { parts } | CatalogFunction::Sum { parts } => {
                for p in parts {
                    for c in p.domain_cuts(x, y, tol) {
                        if !cuts.contains(&c) {
                            cuts.push(c);
                        }
                    }
                }
            }
            _ => {}
        }
        cuts
    }
}

/// Expression tree for a closed convex set in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetExpr {
    /// `{x : A x ≤ b}`
    HPolyhedron { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// `conv(vertices)`
    VPolytope { vertices: Vec<Vec<f64>> },
    /// `{x : lo ≤ x ≤ hi}`, entries may be infinite.
    #[serde(rename = "box")]
    BoxSet {
        #[serde(with = "ext_real::vec")]
        lo: Vec<f64>,
        #[serde(with = "ext_real::vec")]
        hi: Vec<f64>,
    },
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x : ∃z, A x + B z + c ∈ K}` with `K` the product of `cones`.
    ConicRep {
        a: Vec<Vec<f64>>,
        #[serde(default)]
        b: Vec<Vec<f64>>,
        c: Vec<f64>,
        cones: Vec<Cone>,
    },
    /// `{x : f(x) ≤ 0}`
    LevelSet { f: CatalogFunction },
    /// `child + shift`
    Translate { child: Box<SetExpr>, shift: Vec<f64> },
    /// `factor · child`; a zero factor denotes the recession cone of `child`.
    Scale { child: Box<SetExpr>, factor: f64 },
    /// `child + cone(rays)`
    SumCone { child: Box<SetExpr>, rays: Vec<Vec<f64>> },
    Intersect { children: Vec<SetExpr> },
}

/// Orthonormal basis with sign vectors `s ∈ {−1,0,1}ⁿ` and `t ∈ {−1,1}ⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignedBasis {
    pub v: Vec<Vec<f64>>,
    pub s: Vec<i8>,
    pub t: Vec<i8>,
}

impl SignedBasis {
    pub fn standard(s: Vec<i8>, t: Vec<i8>) -> Self {
        let n = s.len();
        SignedBasis { v: (0..n).map(|j| linalg::unit(n, j)).collect(), s, t }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.v.len();
        if self.s.len() != n || self.t.len() != n || self.v.iter().any(|r| r.len() != n) {
            return Err(DfcError::InvalidParams("signed basis sizes disagree".into()));
        }
        if linalg::orthonormality_defect(&self.v) > 1e-10 {
            return Err(DfcError::InvalidParams("basis is not orthonormal".into()));
        }
        if self.s.iter().any(|v| v.abs() > 1) || self.t.iter().any(|v| v.abs() != 1) {
            return Err(DfcError::InvalidParams("sign vectors out of range".into()));
        }
        Ok(())
    }
}

/// Tolerances and limits for oracle calls.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Additive membership tolerance.
    pub tol: f64,
    /// Relative tolerance for support value comparisons.
    pub support_tol: f64,
    /// Membership tolerance used inside gauge bisection.
    pub gauge_tol: f64,
    pub lambda_max: f64,
    pub bisect_iters: usize,
    pub box_radius: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            tol: 1e-7,
            support_tol: 1e-6,
            gauge_tol: 1e-10,
            lambda_max: 1e6,
            bisect_iters: 80,
            box_radius: 1e3,
        }
    }
}

/// Result of a gauge evaluation. `limit_hit` marks `+∞` caused by the λ bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeEval {
    pub value: f64,
    pub limit_hit: bool,
}

fn check_dim(s: &SetExpr, v: &[f64]) -> Result<()> {
    match s.dim() {
        Some(n) if n != v.len() => Err(DfcError::DimensionMismatch { expected: n, got: v.len() }),
        _ => Ok(()),
    }
}

fn plain_box(lo: Vec<f64>, hi: Vec<f64>) -> SetExpr {
    SetExpr::BoxSet { lo, hi }
}

impl SetExpr {
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        plain_box(vec![lo; n], vec![hi; n])
    }

    pub fn translate(self, shift: Vec<f64>) -> Self {
        SetExpr::Translate { child: Box::new(self), shift }
    }

    pub fn scale(self, factor: f64) -> Self {
        SetExpr::Scale { child: Box::new(self), factor }
    }

    pub fn sum_cone(self, rays: Vec<Vec<f64>>) -> Self {
        SetExpr::SumCone { child: Box::new(self), rays }
    }

    /// Ambient dimension; `None` for a row-free polyhedron (the whole space).
    pub fn dim(&self) -> Option<usize> {
        match self {
            SetExpr::HPolyhedron { a, .. } => a.first().map(|r| r.len()),
            SetExpr::VPolytope { vertices } => vertices.first().map(|v| v.len()),
            SetExpr::BoxSet { lo, .. } => Some(lo.len()),
            SetExpr::Ball { center, .. } => Some(center.len()),
            SetExpr::ConicRep { a, .. } => a.first().map(|r| r.len()),
            SetExpr::LevelSet { f } => f.dim(),
            SetExpr::Translate { shift, .. } => Some(shift.len()),
            SetExpr::Scale { child, .. } => child.dim(),
            SetExpr::SumCone { child, rays } => child.dim().or_else(|| rays.first().map(|r| r.len())),
            SetExpr::Intersect { children } => children.iter().find_map(|c| c.dim()),
        }
    }

    /// Auxiliary dimension `p` of a conic representation.
    fn conic_aux(b: &[Vec<f64>]) -> usize {
        b.first().map(|r| r.len()).unwrap_or(0)
    }

    /// Checks the structural invariants and returns the dimension.
    pub fn validate(&self) -> Result<Option<usize>> {
        let n = self.dim();
        let same = |m: Option<usize>| -> Result<()> {
            match (n, m) {
                (Some(a), Some(b)) if a != b => Err(DfcError::DimensionMismatch { expected: a, got: b }),
                _ => Ok(()),
            }
        };
        match self {
            SetExpr::HPolyhedron { a, b } => {
                if a.len() != b.len() {
                    return Err(DfcError::InvalidSet("A and b row counts differ".into()));
                }
                for r in a {
                    same(Some(r.len()))?;
                }
            }
            SetExpr::VPolytope { vertices } => {
                if vertices.is_empty() {
                    return Err(DfcError::EmptySet);
                }
                for v in vertices {
                    same(Some(v.len()))?;
                }
            }
            SetExpr::BoxSet { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(DfcError::InvalidSet("box bound lengths differ".into()));
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h || l.is_nan() || h.is_nan()) {
                    return Err(DfcError::InvalidSet("box requires lo ≤ hi".into()));
                }
            }
            SetExpr::Ball { radius, .. } => {
                if !(*radius >= 0.0) {
                    return Err(DfcError::InvalidSet("ball radius must be nonnegative".into()));
                }
            }
            SetExpr::ConicRep { a, b, c, cones } => {
                let m = a.len();
                if c.len() != m || (!b.is_empty() && b.len() != m) {
                    return Err(DfcError::InvalidSet("conic representation row counts differ".into()));
                }
                let p = Self::conic_aux(b);
                if b.iter().any(|r| r.len() != p) {
                    return Err(DfcError::InvalidSet("B rows differ in length".into()));
                }
                for r in a {
                    same(Some(r.len()))?;
                }
                if cones.iter().map(|k| k.dim).sum::<usize>() != m {
                    return Err(DfcError::InvalidSet("cone dimensions must sum to the row count".into()));
                }
                if cones.iter().any(|k| k.kind == ConeKind::Soc && k.dim == 0) {
                    return Err(DfcError::InvalidSet("second-order cone of dimension 0".into()));
                }
            }
            SetExpr::LevelSet { f } => f.check()?,
            SetExpr::Translate { child, .. } => same(child.validate()?)?,
            SetExpr::Scale { child, factor } => {
                if !(*factor >= 0.0) || !factor.is_finite() {
                    return Err(DfcError::InvalidSet("scale factor must be finite and nonnegative".into()));
                }
                same(child.validate()?)?;
            }
            SetExpr::SumCone { child, rays } => {
                same(child.validate()?)?;
                for r in rays {
                    same(Some(r.len()))?;
                }
            }
            SetExpr::Intersect { children } => {
                if children.is_empty() {
                    return Err(DfcError::InvalidSet("empty intersection list".into()));
                }
                for c in children {
                    same(c.validate()?)?;
                }
            }
        }
        Ok(n)
    }

    /// True when the set is given by finitely many linear inequalities.
    pub fn is_polyhedral(&self) -> bool {
        match self {
            SetExpr::HPolyhedron { .. } | SetExpr::VPolytope { .. } | SetExpr::BoxSet { .. } => true,
            SetExpr::ConicRep { cones, .. } => cones.iter().all(|k| k.kind != ConeKind::Soc || k.dim == 1),
            SetExpr::LevelSet { f } => matches!(f, CatalogFunction::Affine { .. }),
            SetExpr::Translate { child, .. } | SetExpr::Scale { child, .. } | SetExpr::SumCone { child, .. } => {
                child.is_polyhedral()
            }
            SetExpr::Intersect { children } => children.iter().all(|c| c.is_polyhedral()),
            SetExpr::Ball { radius, .. } => *radius == 0.0,
        }
    }

    /// Collects directions that structurally matter for recession probes.
    fn structural_rays(&self, out: &mut Vec<Vec<f64>>) {
        match self {
            SetExpr::SumCone { child, rays } => {
                for r in rays {
                    if let Some(u) = linalg::normalized(r) {
                        out.push(u);
                    }
                }
                child.structural_rays(out);
            }
            SetExpr::Translate { child, .. } | SetExpr::Scale { child, .. } => child.structural_rays(out),
            SetExpr::Intersect { children } => children.iter().for_each(|c| c.structural_rays(out)),
            _ => {}
        }
    }
}

/// Problem built from the lowered epigraph of a set with `y` fixed.
struct Lowered {
    pool: VarPool,
    atoms: Vec<Atom>,
    x: Vec<usize>,
}

fn lower_slice(s: &SetExpr, n: usize, y_value: f64) -> Result<Lowered> {
    let mut pool = VarPool::new();
    let x: Vec<usize> = (0..n)
        .map(|j| pool.add(&format!("x{}", j + 1), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY))
        .collect();
    let y = pool.add("y", VarKind::Continuous, y_value, y_value);
    let xs: Vec<AffExpr> = x.iter().map(|v| AffExpr::var(*v)).collect();
    let atoms = epi_gauge_exprs(s, &xs, &AffExpr::var(y), &mut pool)?;
    Ok(Lowered { pool, atoms, x })
}

/// Maximizer of `u·x` over the set together with the unboundedness verdict.
#[derive(Debug, Clone)]
pub struct SetOptimum {
    pub value: f64,
    pub point: Vec<f64>,
    pub unbounded: bool,
}

fn opt_options(opts: &OracleOptions, radius: f64) -> OptOptions {
    OptOptions { box_radius: radius, ..OptOptions::default() }
        .with_feas_tol(1e-9_f64.min(opts.tol))
}

/// Maximizes `u·x` over `s` with the cutting-plane optimizer. A binding
/// artificial box is confirmed by re-solving with a larger box.
pub fn maximize_over_set(s: &SetExpr, u: &[f64], opts: &OracleOptions) -> Result<SetOptimum> {
    let n = u.len();
    let low = lower_slice(s, n, 1.0)?;
    let mut c = vec![0.0; low.pool.len()];
    for (j, v) in low.x.iter().enumerate() {
        c[*v] = u[j];
    }
    let run = |radius: f64| -> Result<optimizer::OptResult> {
        match optimizer::maximize_atoms(low.pool.vars(), &low.atoms, &c, &opt_options(opts, radius)) {
            Err(DfcError::Infeasible) => Err(DfcError::EmptySet),
            r => r,
        }
    };
    let r = run(opts.box_radius)?;
    let point: Vec<f64> = low.x.iter().map(|v| r.point[*v]).collect();
    if r.box_active {
        let r2 = run(opts.box_radius * 10.0)?;
        let grew = r2.value - r.value > opts.support_tol * (1.0 + r.value.abs());
        if grew {
            return Ok(SetOptimum { value: f64::INFINITY, point, unbounded: true });
        }
    }
    Ok(SetOptimum { value: r.value, point, unbounded: false })
}

/// `∞`-norm distance from `x` to the slice `{x : (x, y) ∈ epi}` of the lowered set.
fn slice_distance(s: &SetExpr, x: &[f64], y_value: f64, opts: &OracleOptions) -> Result<f64> {
    let n = x.len();
    let mut low = lower_slice(s, n, y_value)?;
    let t = low.pool.add("t", VarKind::Continuous, 0.0, f64::INFINITY);
    for (j, v) in low.x.iter().enumerate() {
        let diff = AffExpr::var(*v).plus(&AffExpr::var(t).scaled(-1.0));
        low.atoms.push(Atom::Linear { expr: diff, rel: Rel::Le, rhs: x[j] });
        let diff2 = AffExpr::var(*v).scaled(-1.0).plus(&AffExpr::var(t).scaled(-1.0));
        low.atoms.push(Atom::Linear { expr: diff2, rel: Rel::Le, rhs: -x[j] });
    }
    let mut c = vec![0.0; low.pool.len()];
    c[t] = -1.0;
    let radius = opts.box_radius.max(10.0 * linalg::norm_inf(x));
    match optimizer::maximize_atoms(low.pool.vars(), &low.atoms, &c, &opt_options(opts, radius)) {
        Ok(r) => Ok(-r.value),
        Err(DfcError::Infeasible) => Err(DfcError::EmptySet),
        Err(e) => Err(e),
    }
}

/// Finds some point of the set, or reports `EmptySet`.
pub fn find_point(s: &SetExpr, n: usize, opts: &OracleOptions) -> Result<Vec<f64>> {
    match s {
        SetExpr::BoxSet { lo, hi } => Ok(lo
            .iter()
            .zip(hi)
            .map(|(l, h)| match (l.is_finite(), h.is_finite()) {
                (true, true) => 0.5 * (l + h),
                (true, false) => *l,
                (false, true) => *h,
                (false, false) => 0.0,
            })
            .collect()),
        SetExpr::Ball { center, .. } => Ok(center.clone()),
        SetExpr::VPolytope { vertices } => vertices.first().cloned().ok_or(DfcError::EmptySet),
        SetExpr::Translate { child, shift } => Ok(linalg::add(&find_point(child, n, opts)?, shift)),
        SetExpr::Scale { child, factor } if *factor > 0.0 => {
            Ok(linalg::scale(&find_point(child, n, opts)?, *factor))
        }
        SetExpr::Scale { .. } => Ok(vec![0.0; n]),
        _ => Ok(maximize_over_set(s, &vec![0.0; n], opts)?.point),
    }
}

/// Support function `σ_S(u) = sup{u·x : x ∈ S}`.
pub fn support(s: &SetExpr, u: &[f64], opts: &OracleOptions) -> Result<f64> {
    check_dim(s, u)?;
    match s {
        SetExpr::BoxSet { lo, hi } => Ok(lo
            .iter()
            .zip(hi)
            .zip(u)
            .map(|((l, h), uj)| {
                if *uj > 0.0 {
                    uj * h
                } else if *uj < 0.0 {
                    uj * l
                } else {
                    0.0
                }
            })
            .sum()),
        SetExpr::Ball { center, radius } => Ok(dot(center, u) + radius * norm(u)),
        SetExpr::VPolytope { vertices } => vertices
            .iter()
            .map(|v| dot(v, u))
            .reduce(f64::max)
            .ok_or(DfcError::EmptySet),
        SetExpr::Translate { child, shift } => Ok(support(child, u, opts)? + dot(u, shift)),
        SetExpr::Scale { child, factor } => {
            let v = support(child, u, opts)?;
            if *factor > 0.0 {
                Ok(factor * v)
            } else if v.is_finite() {
                Ok(0.0)
            } else {
                Ok(f64::INFINITY)
            }
        }
        SetExpr::SumCone { child, rays } => {
            let un = norm(u);
            if rays.iter().any(|r| dot(r, u) > 1e-12 * un * norm(r)) {
                // Still report emptiness of the child.
                support(child, &vec![0.0; u.len()], opts)?;
                Ok(f64::INFINITY)
            } else {
                support(child, u, opts)
            }
        }
        _ => Ok(maximize_over_set(s, u, opts)?.value),
    }
}

/// Membership within additive tolerance `tol`.
pub fn contains(s: &SetExpr, x: &[f64], tol: f64) -> Result<bool> {
    contains_with(s, x, tol, &OracleOptions::default())
}

pub fn contains_with(s: &SetExpr, x: &[f64], tol: f64, opts: &OracleOptions) -> Result<bool> {
    check_dim(s, x)?;
    Ok(match s {
        SetExpr::BoxSet { lo, hi } => x
            .iter()
            .zip(lo.iter().zip(hi))
            .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
        SetExpr::Ball { center, radius } => norm(&linalg::sub(x, center)) <= radius + tol,
        SetExpr::HPolyhedron { a, b } => a
            .iter()
            .zip(b)
            .all(|(row, bi)| dot(row, x) <= bi + tol * norm(row).max(1.0)),
        SetExpr::ConicRep { a, b, c, cones } if SetExpr::conic_aux(b) == 0 => {
            let r: Vec<f64> = a.iter().zip(c).map(|(row, ci)| dot(row, x) + ci).collect();
            let mut off = 0;
            let mut ok = true;
            for k in cones {
                if k.violation(&r[off..off + k.dim]) > tol {
                    ok = false;
                    break;
                }
                off += k.dim;
            }
            ok
        }
        SetExpr::LevelSet { f } => f.eval(x) <= tol,
        SetExpr::Translate { child, shift } => contains_with(child, &linalg::sub(x, shift), tol, opts)?,
        SetExpr::Scale { child, factor } => {
            if *factor > 0.0 {
                contains_with(child, &linalg::scale(x, 1.0 / factor), tol / factor, opts)?
            } else {
                recession_contains_with(child, x, tol, opts)?
            }
        }
        SetExpr::Intersect { children } => {
            for c in children {
                if !contains_with(c, x, tol, opts)? {
                    return Ok(false);
                }
            }
            true
        }
        _ => slice_distance(s, x, 1.0, opts)? <= tol,
    })
}

/// Gauge `γ_{S−b}(x−b)` by bisection on `λ` with membership of `b + (x−b)/λ`.
pub fn gauge_value(s: &SetExpr, b: &[f64], x: &[f64], opts: &OracleOptions) -> Result<GaugeEval> {
    check_dim(s, x)?;
    check_dim(s, b)?;
    if !contains_with(s, b, opts.tol, opts)? {
        return Err(DfcError::BasePointNotInSet);
    }
    gauge_unchecked(s, b, x, opts)
}

/// Gauge evaluation that trusts `b ∈ S`.
pub fn gauge_unchecked(s: &SetExpr, b: &[f64], x: &[f64], opts: &OracleOptions) -> Result<GaugeEval> {
    let d = linalg::sub(x, b);
    if norm(&d) == 0.0 {
        return Ok(GaugeEval { value: 0.0, limit_hit: false });
    }
    let member = |lam: f64| contains_with(s, &linalg::axpy(b, 1.0 / lam, &d), opts.gauge_tol, opts);
    let mut lo = 1e-9;
    let mut hi = opts.lambda_max;
    if member(lo)? {
        return Ok(GaugeEval { value: 0.0, limit_hit: false });
    }
    if !member(hi)? {
        return Ok(GaugeEval { value: f64::INFINITY, limit_hit: true });
    }
    // Coarse geometric pass keeps relative accuracy across the wide bracket.
    while hi / lo > 4.0 {
        let mid = (lo * hi).sqrt();
        if member(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    for _ in 0..opts.bisect_iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if member(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(GaugeEval { value: hi, limit_hit: false })
}

/// Whether `d` is a recession direction of `s`.
pub fn recession_contains(s: &SetExpr, d: &[f64], tol: f64) -> Result<bool> {
    recession_contains_with(s, d, tol, &OracleOptions::default())
}

pub fn recession_contains_with(s: &SetExpr, d: &[f64], tol: f64, opts: &OracleOptions) -> Result<bool> {
    check_dim(s, d)?;
    let dn = norm(d);
    if dn == 0.0 {
        return Ok(true);
    }
    let d = linalg::scale(d, 1.0 / dn);
    Ok(match s {
        SetExpr::BoxSet { lo, hi } => d.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| {
            (*v <= tol || *h == f64::INFINITY) && (*v >= -tol || *l == f64::NEG_INFINITY)
        }),
        SetExpr::Ball { .. } | SetExpr::VPolytope { .. } => false,
        SetExpr::HPolyhedron { a, .. } => a.iter().all(|row| dot(row, &d) <= tol * norm(row).max(1.0)),
        SetExpr::ConicRep { a, b, cones, .. } if SetExpr::conic_aux(b) == 0 => {
            let r: Vec<f64> = a.iter().map(|row| dot(row, &d)).collect();
            let mut off = 0;
            let mut ok = true;
            for k in cones {
                if k.violation(&r[off..off + k.dim]) > tol {
                    ok = false;
                    break;
                }
                off += k.dim;
            }
            ok
        }
        SetExpr::LevelSet { f } => {
            let mut parts = Vec::new();
            flatten_max(f, &mut parts);
            parts.iter().all(|p| p.persp(&d, 0.0) <= tol)
        }
        SetExpr::Translate { child, .. } | SetExpr::Scale { child, .. } => {
            recession_contains_with(child, &d, tol, opts)?
        }
        SetExpr::Intersect { children } => {
            for c in children {
                if !recession_contains_with(c, &d, tol, opts)? {
                    return Ok(false);
                }
            }
            true
        }
        _ => slice_distance(s, &d, 0.0, opts)? <= tol,
    })
}

pub(crate) fn flatten_max<'a>(f: &'a CatalogFunction, out: &mut Vec<&'a CatalogFunction>) {
    match f {
        CatalogFunction::MaxOf { parts } => parts.iter().for_each(|p| flatten_max(p, out)),
        other => out.push(other),
    }
}

/// One maximizer of `u·x` over `s`.
pub fn exposed_point(s: &SetExpr, u: &[f64], opts: &OracleOptions) -> Result<Vec<f64>> {
    check_dim(s, u)?;
    match s {
        SetExpr::BoxSet { lo, hi } => {
            let mut x = Vec::with_capacity(u.len());
            for ((l, h), uj) in lo.iter().zip(hi).zip(u) {
                let v = if *uj > 0.0 {
                    *h
                } else if *uj < 0.0 {
                    *l
                } else if l.is_finite() && h.is_finite() {
                    0.5 * (l + h)
                } else if l.is_finite() {
                    *l
                } else if h.is_finite() {
                    *h
                } else {
                    0.0
                };
                if !v.is_finite() {
                    return Err(DfcError::UnboundedDirection);
                }
                x.push(v);
            }
            Ok(x)
        }
        SetExpr::Ball { center, radius } => match linalg::normalized(u) {
            Some(d) => Ok(linalg::axpy(center, *radius, &d)),
            None => Ok(center.clone()),
        },
        SetExpr::VPolytope { vertices } => vertices
            .iter()
            .max_by(|a, b| dot(a, u).total_cmp(&dot(b, u)))
            .cloned()
            .ok_or(DfcError::EmptySet),
        SetExpr::Translate { child, shift } => Ok(linalg::add(&exposed_point(child, u, opts)?, shift)),
        SetExpr::Scale { child, factor } => {
            if *factor > 0.0 {
                Ok(linalg::scale(&exposed_point(child, u, opts)?, *factor))
            } else if support(child, u, opts)?.is_finite() {
                Ok(vec![0.0; u.len()])
            } else {
                Err(DfcError::UnboundedDirection)
            }
        }
        SetExpr::SumCone { child, rays } => {
            let un = norm(u);
            if rays.iter().any(|r| dot(r, u) > 1e-12 * un * norm(r)) {
                Err(DfcError::UnboundedDirection)
            } else {
                exposed_point(child, u, opts)
            }
        }
        _ => {
            let r = maximize_over_set(s, u, opts)?;
            if r.unbounded {
                Err(DfcError::UnboundedDirection)
            } else {
                Ok(r.point)
            }
        }
    }
}

/// `x + T_P(x)`: the active rows of a polyhedron at `x`, shifted to `x`.
pub fn tangent_cone_polyhedral(p: &SetExpr, x: &[f64], tol: f64) -> Result<SetExpr> {
    let (a, b) = match p {
        SetExpr::HPolyhedron { a, b } => (a.clone(), b.clone()),
        SetExpr::BoxSet { lo, hi } => box_rows(lo, hi),
        _ => return Err(DfcError::NotPolyhedral),
    };
    check_dim(p, x)?;
    if !contains(p, x, tol)? {
        return Err(DfcError::PointNotInSet);
    }
    let mut rows = Vec::new();
    for (row, bi) in a.iter().zip(&b) {
        if dot(row, x) >= bi - tol * norm(row).max(1.0) {
            rows.push(row.clone());
        }
    }
    let m = rows.len();
    Ok(SetExpr::HPolyhedron { a: rows, b: vec![0.0; m] }.translate(x.to_vec()))
}

/// Finite box sides as inequality rows.
pub fn box_rows(lo: &[f64], hi: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = lo.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for j in 0..n {
        if hi[j].is_finite() {
            a.push(linalg::unit(n, j));
            b.push(hi[j]);
        }
        if lo[j].is_finite() {
            a.push(linalg::scale(&linalg::unit(n, j), -1.0));
            b.push(-lo[j]);
        }
    }
    (a, b)
}

/// Outcome of [`validate_family`].
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyReport {
    pub pass: bool,
    pub failures: Vec<String>,
    pub witness: Option<Vec<f64>>,
    pub probes: usize,
}

/// Checks nonemptiness, structure and agreement of recession cones across a
/// family. Probe directions are structural rays, signed coordinate axes and
/// seeded sphere samples, in that order.
pub fn validate_family(sets: &[SetExpr], probes: usize, seed: u64) -> FamilyReport {
    let opts = OracleOptions::default();
    let mut failures = Vec::new();
    let mut n = None;
    if sets.is_empty() {
        failures.push("family has no sets".to_string());
    }
    for (i, s) in sets.iter().enumerate() {
        match s.validate() {
            Ok(d) => match (n, d) {
                (Some(a), Some(b)) if a != b => failures.push(format!("set {} has dimension {b}, expected {a}", i + 1)),
                (None, Some(b)) => n = Some(b),
                _ => {}
            },
            Err(e) => failures.push(format!("set {}: {e}", i + 1)),
        }
    }
    let Some(n) = n else {
        if failures.is_empty() {
            failures.push("dimension could not be determined".into());
        }
        return FamilyReport { pass: false, failures, witness: None, probes: 0 };
    };
    if !failures.is_empty() {
        return FamilyReport { pass: false, failures, witness: None, probes: 0 };
    }
    for (i, s) in sets.iter().enumerate() {
        if let Err(e) = find_point(s, n, &opts) {
            failures.push(format!("set {}: {e}", i + 1));
        }
    }
    if !failures.is_empty() {
        return FamilyReport { pass: false, failures, witness: None, probes: 0 };
    }
    let mut dirs = Vec::new();
    for s in sets {
        s.structural_rays(&mut dirs);
    }
    for j in 0..n {
        dirs.push(linalg::unit(n, j));
        dirs.push(linalg::scale(&linalg::unit(n, j), -1.0));
    }
    dirs.extend(sampling::directions(n, probes, seed));
    let mut used = 0;
    for d in &dirs {
        used += 1;
        let verdicts: Result<Vec<bool>> =
            sets.iter().map(|s| recession_contains_with(s, d, 1e-7, &opts)).collect();
        match verdicts {
            Ok(v) => {
                if v.iter().any(|b| *b != v[0]) {
                    failures.push(format!("recession cones disagree on direction {d:?}: {v:?}"));
                    return FamilyReport { pass: false, failures, witness: Some(d.clone()), probes: used };
                }
            }
            Err(e) => {
                failures.push(format!("recession probe failed: {e}"));
                return FamilyReport { pass: false, failures, witness: Some(d.clone()), probes: used };
            }
        }
    }
    FamilyReport { pass: true, failures, witness: None, probes: used }
}
