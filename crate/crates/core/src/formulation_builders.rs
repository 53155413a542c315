//! Mixed-integer formulations of `x ∈ ⋃ᵢ Cⁱ`.
//!
//! Every builder maps a [`ProblemSpec`] to a [`Formulation`]: the original
//! variables `x`, selectors `y ∈ {0,1}ᵏ` tied by `Σ yᵢ = 1`, optional per-piece
//! copies, and constraint blocks labeled with the construction they come from.
//! Constants such as Big-M coefficients and projection bounds are computed with
//! the support and gauge oracles of [`crate::set_core`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::optimizer::{maximize_atoms, OptOptions};
use crate::error::{DfcError, Result};
use crate::gauge_calculus::{
    epi_gauge_exprs, epi_gauge_shifted, probe_cone_condition, AffExpr, Atom, Constraint, ConstraintBlock, Rel,
    VarKind, VarPool,
};
use crate::linalg::{self, dot, norm};
use crate::sampling;
use crate::set_core::{self, box_rows, OracleOptions, SetExpr, SignedBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Extended,
    Bigm,
    Homothetic,
    Orthogonal,
    Piecewise,
    Bbj,
    Isotone,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Extended,
        Method::Bigm,
        Method::Homothetic,
        Method::Orthogonal,
        Method::Piecewise,
        Method::Bbj,
        Method::Isotone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Extended => "extended",
            Method::Bigm => "bigm",
            Method::Homothetic => "homothetic",
            Method::Orthogonal => "orthogonal",
            Method::Piecewise => "piecewise",
            Method::Bbj => "bbj",
            Method::Isotone => "isotone",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Provenance label attached to the constraints the builder emits.
    pub fn label(self) -> &'static str {
        match self {
            Method::Extended => "extendedformulation",
            Method::Bigm => "bigMformulation",
            Method::Homothetic => "projectedgauge",
            Method::Orthogonal => "orthogonalplusprojcone",
            Method::Piecewise => "complexform",
            Method::Bbj => "blairform",
            Method::Isotone => "isotonegeneralform",
        }
    }
}

/// Label of the orthogonal builder when no cone `M` is declared.
pub const ORTHOGONAL_SETS_LABEL: &str = "originalorthotheo";
pub const SIMPLEX_LABEL: &str = "simplex";
pub const CONSTANTS_APPROXIMATE: &str = "constants-approximate";

/// `Cⁱ = rᵢ·C₀ + bⁱ + (C₀)_∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomothetyData {
    pub c0: SetExpr,
    pub b: Vec<Vec<f64>>,
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseData {
    pub families: Vec<HomothetyData>,
}

/// Cone-sum data `Cⁱ = bⁱ + Gⁱ∩Kⁱ + M`. Without `t` the sets are taken as
/// compact pieces supported on the disjoint coordinate blocks `parts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrthogonalData {
    #[serde(default)]
    pub g: Vec<SetExpr>,
    /// Orthonormal basis rows; the standard basis when absent.
    #[serde(default)]
    pub v: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub s: Vec<Vec<i8>>,
    #[serde(default)]
    pub t: Option<Vec<i8>>,
    /// Zero-based coordinate blocks `Jᵢ`.
    pub parts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BigMData {
    #[serde(default)]
    pub m: Option<Vec<Vec<f64>>>,
}

/// Pieces `Pⁱ = {x : A x ≤ bⁱ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BbjData {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

fn yes() -> bool {
    true
}

/// Pieces `Cⁱ = bⁱ + Gⁱ ∩ K^{sⁱ}` over a common orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsotoneData {
    pub g: Vec<SetExpr>,
    #[serde(default)]
    pub v: Option<Vec<Vec<f64>>>,
    pub s: Vec<Vec<i8>>,
    pub b: Vec<Vec<f64>>,
    /// With `false` the gauge argument drops the positive parts, giving the
    /// weaker single-gauge variant `γ_H(Σ vⁱʲ(vⁱʲ·x − …)) ≤ yᵢ`.
    #[serde(default = "yes")]
    pub positive_part: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum MethodParams {
    #[default]
    None,
    Homothety(HomothetyData),
    Piecewise(PiecewiseData),
    Orthogonal(OrthogonalData),
    BigM(BigMData),
    Bbj(BbjData),
    Isotone(IsotoneData),
}

/// Analysis and probing options carried by an instance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Random probes for set conditions checked at build time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
}

/// A disjunction instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub dim: usize,
    pub sets: Vec<SetExpr>,
    pub base_points: Vec<Vec<f64>>,
    pub method: Method,
    pub params: MethodParams,
    pub options: InstanceOptions,
}

impl ProblemSpec {
    pub fn new(dim: usize, sets: Vec<SetExpr>, base_points: Vec<Vec<f64>>, method: Method, params: MethodParams) -> Self {
        ProblemSpec { dim, sets, base_points, method, params, options: InstanceOptions::default() }
    }

    pub fn k(&self) -> usize {
        self.sets.len()
    }

    pub fn with_method(&self, method: Method, params: MethodParams) -> Self {
        ProblemSpec { method, params, ..self.clone() }
    }

    fn seed(&self) -> u64 {
        self.options.seed.unwrap_or(0)
    }

    fn probes(&self) -> usize {
        self.options.probes.unwrap_or(500)
    }

    /// Structural checks: nonempty family, uniform dimension, base points in
    /// their sets.
    pub fn check(&self) -> Result<()> {
        if self.sets.is_empty() {
            return Err(DfcError::FamilyInvalid("family has no sets".into()));
        }
        for (i, s) in self.sets.iter().enumerate() {
            match s.validate() {
                Ok(Some(d)) if d != self.dim => {
                    return Err(DfcError::FamilyInvalid(format!("set {} has dimension {d}, expected {}", i + 1, self.dim)))
                }
                Ok(_) => {}
                Err(e) => return Err(DfcError::FamilyInvalid(format!("set {}: {e}", i + 1))),
            }
        }
        if self.base_points.len() != self.k() {
            return Err(DfcError::InvalidParams(format!(
                "{} base points for {} sets",
                self.base_points.len(),
                self.k()
            )));
        }
        for (i, (s, b)) in self.sets.iter().zip(&self.base_points).enumerate() {
            if b.len() != self.dim {
                return Err(DfcError::DimensionMismatch { expected: self.dim, got: b.len() });
            }
            if !set_core::contains(s, b, 1e-7)? {
                return Err(DfcError::InvalidParams(format!("base point {} is not in its set", i + 1)));
            }
        }
        Ok(())
    }
}

/// One off-diagonal Big-M coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigMEntry {
    pub i: usize,
    pub j: usize,
    /// `sup{γ_{Cⁱ−bⁱ}(x − bⁱ) : x ∈ Cʲ}`.
    pub value: f64,
    /// Lower bound from boundary sampling rather than an exact maximum.
    pub sampled: bool,
    /// `value` times the half-width when `Cⁱ` is a cube centered at `bⁱ`.
    pub coordinate_units: Option<f64>,
}

/// Variables, constraint blocks and metadata of a built formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Formulation {
    pub method: Method,
    pub pool: VarPool,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub copies: Vec<Vec<usize>>,
    pub blocks: Vec<ConstraintBlock>,
    pub simplex: Constraint,
    pub provenance: Vec<String>,
    pub big_m: Vec<BigMEntry>,
    pub constants: BTreeMap<String, f64>,
}

impl Formulation {
    fn skeleton(spec: &ProblemSpec, method: Method) -> Self {
        let mut pool = VarPool::new();
        let x: Vec<usize> = (0..spec.dim)
            .map(|j| pool.add(&format!("x{}", j + 1), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY))
            .collect();
        let y: Vec<usize> = (0..spec.k()).map(|i| pool.add(&format!("y{}", i + 1), VarKind::Binary, 0.0, 1.0)).collect();
        let sum = AffExpr::from_terms(y.iter().map(|v| (*v, 1.0)).collect(), 0.0);
        Formulation {
            method,
            pool,
            x,
            y,
            copies: Vec::new(),
            blocks: Vec::new(),
            simplex: Constraint { atom: Atom::eq(sum, 1.0), label: SIMPLEX_LABEL.into() },
            provenance: vec![method.label().to_string()],
            big_m: Vec::new(),
            constants: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn k(&self) -> usize {
        self.y.len()
    }

    /// Block constraints followed by the simplex row.
    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.blocks.iter().flat_map(|b| b.constraints.iter()).chain(std::iter::once(&self.simplex))
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.constraints().map(|c| &c.atom)
    }

    /// Number of non-simplex atoms of the given type name.
    pub fn count(&self, type_name: &str) -> usize {
        self.blocks.iter().map(|b| b.count(type_name)).sum()
    }

    fn xs(&self) -> Vec<AffExpr> {
        self.x.iter().map(|v| AffExpr::var(*v)).collect()
    }

    fn y_comb(&self, coefs: &[f64]) -> AffExpr {
        AffExpr::from_terms(self.y.iter().zip(coefs).map(|(v, c)| (*v, *c)).collect(), 0.0)
    }

    fn push_block(&mut self, atoms: Vec<Atom>, label: &str, aux_from: usize) {
        let mut block = ConstraintBlock::from_atoms(atoms, label);
        block.aux = (aux_from..self.pool.len()).collect();
        self.blocks.push(block);
    }

    fn stamp(&mut self, tag: &str) {
        if !self.provenance.iter().any(|p| p == tag) {
            self.provenance.push(tag.to_string());
        }
    }
}

/// Builds the formulation selected by `spec.method`.
pub fn build(spec: &ProblemSpec) -> Result<Formulation> {
    match spec.method {
        Method::Extended => build_extended(spec),
        Method::Bigm => build_bigm(spec),
        Method::Homothetic => build_homothetic(spec),
        Method::Orthogonal => build_orthogonal(spec),
        Method::Piecewise => build_piecewise(spec),
        Method::Bbj => build_bbj(spec),
        Method::Isotone => build_isotone_general(spec),
    }
}

fn check_family(spec: &ProblemSpec) -> Result<()> {
    spec.check()?;
    let rep = set_core::validate_family(&spec.sets, 32, spec.seed());
    if !rep.pass {
        return Err(DfcError::FamilyInvalid(rep.failures.join("; ")));
    }
    Ok(())
}

/// Variable copies `xⁱ` with `γ_{Cⁱ−bⁱ}(xⁱ − bⁱyᵢ) ≤ yᵢ` and `Σ xⁱ = x`.
pub fn build_extended(spec: &ProblemSpec) -> Result<Formulation> {
    check_family(spec)?;
    let mut f = Formulation::skeleton(spec, Method::Extended);
    let label = Method::Extended.label();
    let n = spec.dim;
    for (i, (c, b)) in spec.sets.iter().zip(&spec.base_points).enumerate() {
        let copy: Vec<usize> = (0..n)
            .map(|j| f.pool.add(&format!("x{}_{}", i + 1, j + 1), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY))
            .collect();
        let yi = AffExpr::var(f.y[i]);
        let arg: Vec<AffExpr> = copy.iter().zip(b).map(|(v, bj)| AffExpr::var(*v).minus(&yi.scaled(*bj))).collect();
        let start = f.pool.len();
        let atoms = epi_gauge_shifted(c, b, &arg, &yi, &mut f.pool)?;
        f.push_block(atoms, label, start);
        f.copies.push(copy);
    }
    let mut link = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = AffExpr::var(f.x[j]);
        for copy in &f.copies {
            e = e.minus(&AffExpr::var(copy[j]));
        }
        link.push(Atom::eq(e, 0.0));
    }
    let start = f.pool.len();
    f.push_block(link, label, start);
    Ok(f)
}

/// Inequality rows of a polyhedral set, if it is one.
fn polyhedral_rows(s: &SetExpr) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    match s {
        SetExpr::HPolyhedron { a, b } => Some((a.clone(), b.clone())),
        SetExpr::BoxSet { lo, hi } => Some(box_rows(lo, hi)),
        _ => None,
    }
}

fn finite_box_vertices(s: &SetExpr) -> Option<Vec<Vec<f64>>> {
    match s {
        SetExpr::VPolytope { vertices } => Some(vertices.clone()),
        SetExpr::BoxSet { lo, hi } if lo.iter().chain(hi).all(|v| v.is_finite()) && lo.len() <= 16 => {
            let n = lo.len();
            Some(
                (0..1usize << n)
                    .map(|mask| (0..n).map(|j| if mask >> j & 1 == 1 { hi[j] } else { lo[j] }).collect())
                    .collect(),
            )
        }
        _ => None,
    }
}

/// Half-width of a cube centered at `b`.
fn cube_half_width(s: &SetExpr, b: &[f64]) -> Option<f64> {
    let SetExpr::BoxSet { lo, hi } = s else {
        return None;
    };
    let h = hi[0] - b[0];
    let same = |v: f64| (v - h).abs() <= 1e-12 * (1.0 + h.abs());
    let ok = h.is_finite() && (0..lo.len()).all(|j| same(hi[j] - b[j]) && same(b[j] - lo[j]));
    ok.then_some(h)
}

/// Smallest valid Big-M coefficient `sup{γ_{Cⁱ−bⁱ}(x − bⁱ) : x ∈ Cʲ}`
/// (zero-based `i`, `j`).
pub fn minimal_bigm(spec: &ProblemSpec, i: usize, j: usize) -> Result<BigMEntry> {
    let opts = OracleOptions::default();
    let (ci, bi, cj) = (&spec.sets[i], &spec.base_points[i], &spec.sets[j]);
    let n = spec.dim;
    let mut entry = BigMEntry { i, j, value: 1.0, sampled: false, coordinate_units: None };
    if i != j {
        if let Some((a, b)) = polyhedral_rows(ci) {
            // γ(x) = max over rows of a·x / (b − a·bⁱ); its maximum over Cʲ is a
            // maximum of support values.
            let mut best = 0.0f64;
            for (row, rhs) in a.iter().zip(&b) {
                let slack = rhs - dot(row, bi);
                let reach = set_core::support(cj, row, &opts)? - dot(row, bi);
                if reach <= 0.0 {
                    continue;
                }
                best = best.max(if slack <= 0.0 { f64::INFINITY } else { reach / slack });
            }
            entry.value = best;
        } else if let Some(vertices) = finite_box_vertices(cj) {
            let mut best = 0.0f64;
            for v in &vertices {
                best = best.max(set_core::gauge_value(ci, bi, v, &opts)?.value);
            }
            entry.value = best;
        } else {
            let mut dirs = Vec::new();
            for d in 0..n {
                dirs.push(linalg::unit(n, d));
                dirs.push(linalg::scale(&linalg::unit(n, d), -1.0));
            }
            dirs.extend(sampling::directions(n, 64, spec.seed()));
            let mut best = 0.0f64;
            for u in &dirs {
                match set_core::exposed_point(cj, u, &opts) {
                    Ok(p) => best = best.max(set_core::gauge_value(ci, bi, &p, &opts)?.value),
                    Err(DfcError::UnboundedDirection) => {
                        if set_core::recession_contains(ci, u, 1e-7)? {
                            continue;
                        }
                        best = f64::INFINITY;
                    }
                    Err(e) => return Err(e),
                }
            }
            entry.value = best;
            entry.sampled = true;
        }
    }
    if !entry.value.is_finite() {
        return Err(DfcError::UnboundedM(i + 1, j + 1));
    }
    entry.coordinate_units = cube_half_width(ci, bi).map(|h| h * entry.value);
    Ok(entry)
}

/// `γ_{Cⁱ−bⁱ}(x − bⁱ) ≤ Σⱼ M_{i,j} yⱼ` on the original variables.
pub fn build_bigm(spec: &ProblemSpec) -> Result<Formulation> {
    spec.check()?;
    let k = spec.k();
    let supplied = match &spec.params {
        MethodParams::BigM(BigMData { m: Some(m) }) => Some(m.clone()),
        MethodParams::BigM(_) | MethodParams::None => None,
        _ => return Err(DfcError::InvalidParams("bigm expects BigM parameters".into())),
    };
    let mut f = Formulation::skeleton(spec, Method::Bigm);
    let mut m = vec![vec![1.0; k]; k];
    if let Some(given) = &supplied {
        if given.len() != k || given.iter().any(|r| r.len() != k) {
            return Err(DfcError::MMatrixInvalid(format!("M must be {k}×{k}")));
        }
        for (i, row) in given.iter().enumerate() {
            if (row[i] - 1.0).abs() > 1e-12 {
                return Err(DfcError::MMatrixInvalid(format!("M[{}][{}] = {} but the diagonal must be 1", i + 1, i + 1, row[i])));
            }
        }
    }
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let e = minimal_bigm(spec, i, j)?;
            if e.sampled {
                f.stamp(CONSTANTS_APPROXIMATE);
            }
            m[i][j] = match &supplied {
                Some(given) => {
                    if given[i][j] < e.value - 1e-7 * (1.0 + e.value) {
                        return Err(DfcError::MMatrixInvalid(format!(
                            "M[{}][{}] = {} is below the required {}",
                            i + 1,
                            j + 1,
                            given[i][j],
                            e.value
                        )));
                    }
                    given[i][j]
                }
                None => e.value,
            };
            f.big_m.push(e);
        }
    }
    let label = Method::Bigm.label();
    let ones = vec![1.0; k];
    let ysum = f.y_comb(&ones);
    let xs = f.xs();
    for (i, (c, b)) in spec.sets.iter().zip(&spec.base_points).enumerate() {
        let rhs = f.y_comb(&m[i]);
        let arg: Vec<AffExpr> = xs.iter().zip(b).map(|(x, bj)| x.minus(&ysum.scaled(*bj))).collect();
        let start = f.pool.len();
        let atoms = epi_gauge_shifted(c, b, &arg, &rhs, &mut f.pool)?;
        f.push_block(atoms, label, start);
    }
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            f.constants.insert(format!("M[{}][{}]", i + 1, j + 1), *v);
        }
    }
    Ok(f)
}

fn probe_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for d in 0..n {
        dirs.push(linalg::unit(n, d));
        dirs.push(linalg::scale(&linalg::unit(n, d), -1.0));
    }
    dirs.extend(sampling::directions(n, count, seed));
    dirs
}

fn supports_agree(a: f64, b: f64, tol: f64) -> bool {
    match (a.is_finite(), b.is_finite()) {
        (false, false) => true,
        (true, true) => (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())),
        _ => false,
    }
}

fn check_homothety(h: &HomothetyData, k: usize, n: usize) -> Result<()> {
    if h.b.len() != k || h.r.len() != k || h.b.iter().any(|b| b.len() != n) {
        return Err(DfcError::InvalidParams(format!("homothety data must give {k} translations in R^{n} and {k} ratios")));
    }
    if h.r.iter().any(|r| !(*r >= 0.0 && r.is_finite())) || h.r.iter().all(|r| *r == 0.0) {
        return Err(DfcError::InvalidParams("ratios must be nonnegative and not all zero".into()));
    }
    h.c0.validate()?;
    if !set_core::contains(&h.c0, &vec![0.0; n], 1e-7)? {
        return Err(DfcError::InvalidParams("the homothety base set must contain the origin".into()));
    }
    Ok(())
}

/// `rᵢ·C₀ + bⁱ + (C₀)_∞` as a set expression.
pub fn homothetic_piece(h: &HomothetyData, i: usize) -> SetExpr {
    h.c0.clone().scale(h.r[i]).translate(h.b[i].clone())
}

fn homothetic_atoms(f: &mut Formulation, h: &HomothetyData) -> Result<Vec<Atom>> {
    let n = f.n();
    let xs = f.xs();
    let mut arg = xs.clone();
    for (i, b) in h.b.iter().enumerate() {
        let yi = AffExpr::var(f.y[i]);
        for j in 0..n {
            arg[j] = arg[j].minus(&yi.scaled(b[j]));
        }
    }
    let rhs = f.y_comb(&h.r);
    epi_gauge_exprs(&h.c0, &arg, &rhs, &mut f.pool)
}

/// `γ_{C₀}(x − Σ yᵢbⁱ) ≤ Σ rᵢyᵢ` for a nearly homothetic family.
pub fn build_homothetic(spec: &ProblemSpec) -> Result<Formulation> {
    spec.check()?;
    let MethodParams::Homothety(h) = &spec.params else {
        return Err(DfcError::InvalidParams("homothetic expects homothety parameters".into()));
    };
    let (n, k) = (spec.dim, spec.k());
    check_homothety(h, k, n)?;
    let opts = OracleOptions::default();
    let dirs = probe_directions(n, 16, spec.seed());
    for (i, c) in spec.sets.iter().enumerate() {
        let piece = homothetic_piece(h, i);
        for u in &dirs {
            let a = set_core::support(c, u, &opts)?;
            let b = set_core::support(&piece, u, &opts)?;
            if !supports_agree(a, b, 1e-5) {
                // Witness: a point of the larger set beyond the other's support.
                let larger = if b > a { &piece } else { c };
                let witness = set_core::exposed_point(larger, u, &opts).unwrap_or_else(|_| u.clone());
                return Err(DfcError::HomothetyMismatch { witness });
            }
        }
    }
    let mut f = Formulation::skeleton(spec, Method::Homothetic);
    let start = f.pool.len();
    let atoms = homothetic_atoms(&mut f, h)?;
    f.push_block(atoms, Method::Homothetic.label(), start);
    Ok(f)
}

fn approx(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn expr_approx(a: &AffExpr, b: &AffExpr, tol: f64) -> bool {
    a.terms.len() == b.terms.len()
        && approx(a.constant, b.constant, tol)
        && a.terms.iter().zip(&b.terms).all(|(p, q)| p.0 == q.0 && approx(p.1, q.1, tol))
}

fn lead(e: &AffExpr) -> f64 {
    e.terms.first().map(|t| t.1).unwrap_or(e.constant)
}

fn cmp_expr(a: &AffExpr, b: &AffExpr) -> std::cmp::Ordering {
    for (p, q) in a.terms.iter().zip(&b.terms) {
        let o = p.0.cmp(&q.0).then(p.1.total_cmp(&q.1));
        if o.is_ne() {
            return o;
        }
    }
    a.terms.len().cmp(&b.terms.len()).then(a.constant.total_cmp(&b.constant))
}

/// Scale-normalized form of an atom: linear rows with leading coefficient 1
/// (relations flipped as needed), cone atoms with unit leading bound
/// coefficient and sign-normalized, sorted arguments.
pub fn canonical_atom(a: &Atom) -> Atom {
    match a {
        Atom::Linear { expr, rel, rhs } => {
            let l = lead(expr);
            if l == 0.0 {
                return a.clone();
            }
            let rel = match (rel, l < 0.0) {
                (Rel::Le, true) => Rel::Ge,
                (Rel::Ge, true) => Rel::Le,
                (r, _) => *r,
            };
            let (expr, rhs) = (expr.scaled(1.0 / l), rhs / l);
            match rel {
                Rel::Ge => Atom::Linear { expr: expr.scaled(-1.0), rel: Rel::Le, rhs: -rhs },
                _ => Atom::Linear { expr, rel, rhs },
            }
        }
        Atom::Soc { args, bound } => {
            let l = lead(bound).abs();
            let s = if l > 0.0 { 1.0 / l } else { 1.0 };
            let mut args: Vec<AffExpr> = args
                .iter()
                .filter(|e| !e.is_zero())
                .map(|e| e.scaled(if lead(e) < 0.0 { -s } else { s }))
                .collect();
            args.sort_by(cmp_expr);
            Atom::Soc { args, bound: bound.scaled(s) }
        }
        other => other.clone(),
    }
}

/// Structural equality of canonical atoms within a relative tolerance.
pub fn atoms_equivalent(a: &Atom, b: &Atom, tol: f64) -> bool {
    match (canonical_atom(a), canonical_atom(b)) {
        (Atom::Linear { expr: e1, rel: r1, rhs: h1 }, Atom::Linear { expr: e2, rel: r2, rhs: h2 }) => {
            r1 == r2 && approx(h1, h2, tol) && expr_approx(&e1, &e2, tol)
        }
        (Atom::Soc { args: a1, bound: b1 }, Atom::Soc { args: a2, bound: b2 }) => {
            a1.len() == a2.len() && expr_approx(&b1, &b2, tol) && a1.iter().zip(&a2).all(|(p, q)| expr_approx(p, q, tol))
        }
        (Atom::Perspective { f: f1, xs: x1, y: y1 }, Atom::Perspective { f: f2, xs: x2, y: y2 }) => {
            f1 == f2 && expr_approx(&y1, &y2, tol) && x1.len() == x2.len() && x1.iter().zip(&x2).all(|(p, q)| expr_approx(p, q, tol))
        }
        (Atom::GaugePlus { set: s1, terms: t1, rhs: r1 }, Atom::GaugePlus { set: s2, terms: t2, rhs: r2 }) => {
            s1 == s2
                && expr_approx(&r1, &r2, tol)
                && t1.len() == t2.len()
                && t1.iter().zip(&t2).all(|(p, q)| {
                    p.0.len() == q.0.len() && p.0.iter().zip(&q.0).all(|(u, v)| approx(*u, *v, tol)) && expr_approx(&p.1, &q.1, tol)
                })
        }
        _ => false,
    }
}

/// Conjunction of homothetic blocks, one per family, with duplicate atoms
/// removed.
pub fn build_piecewise(spec: &ProblemSpec) -> Result<Formulation> {
    spec.check()?;
    let MethodParams::Piecewise(p) = &spec.params else {
        return Err(DfcError::InvalidParams("piecewise expects a list of families".into()));
    };
    if p.families.is_empty() {
        return Err(DfcError::InvalidParams("piecewise needs at least one family".into()));
    }
    let (n, k) = (spec.dim, spec.k());
    let mut f = Formulation::skeleton(spec, Method::Piecewise);
    let label = Method::Piecewise.label();
    let mut kept: Vec<Atom> = Vec::new();
    for h in &p.families {
        check_homothety(h, k, n)?;
        let start = f.pool.len();
        let atoms = homothetic_atoms(&mut f, h)?;
        let fresh: Vec<Atom> = atoms
            .into_iter()
            .filter(|a| !kept.iter().any(|b| atoms_equivalent(a, b, 1e-9)))
            .collect();
        kept.extend(fresh.iter().cloned());
        f.push_block(fresh, label, start);
    }
    Ok(f)
}

/// `K = cone{sⱼvʲ}` as an inequality system: `sⱼvʲ·x ≥ 0` and `vʲ·x = 0` when
/// `sⱼ = 0`.
pub fn sign_cone(v: &[Vec<f64>], s: &[i8]) -> SetExpr {
    let mut a = Vec::new();
    for (vj, sj) in v.iter().zip(s) {
        if *sj == 0 {
            a.push(vj.clone());
            a.push(linalg::scale(vj, -1.0));
        } else {
            a.push(linalg::scale(vj, -(*sj as f64)));
        }
    }
    let m = a.len();
    SetExpr::HPolyhedron { a, b: vec![0.0; m] }
}

fn basis_or_standard(v: &Option<Vec<Vec<f64>>>, n: usize) -> Result<Vec<Vec<f64>>> {
    let v = v.clone().unwrap_or_else(|| (0..n).map(|j| linalg::unit(n, j)).collect());
    if v.len() != n || v.iter().any(|r| r.len() != n) || linalg::orthonormality_defect(&v) > 1e-10 {
        return Err(DfcError::InvalidParams("basis must be n orthonormal n-vectors".into()));
    }
    Ok(v)
}

fn finite_support(s: &SetExpr, u: &[f64], what: &str) -> Result<f64> {
    let v = set_core::support(s, u, &OracleOptions::default())?;
    if !v.is_finite() {
        return Err(DfcError::OracleUnbounded(what.to_string()));
    }
    Ok(v)
}

fn check_parts(parts: &[Vec<usize>], k: usize, n: usize) -> Result<()> {
    if parts.len() != k {
        return Err(DfcError::InvalidParams(format!("{} coordinate blocks for {k} sets", parts.len())));
    }
    let mut seen = vec![false; n];
    for p in parts {
        for &j in p {
            if j >= n || seen[j] {
                return Err(DfcError::InvalidParams("coordinate blocks must be disjoint subsets of 0..n".into()));
            }
            seen[j] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(DfcError::InvalidParams("coordinate blocks must cover every coordinate".into()));
    }
    Ok(())
}

/// Cone-sum formulation over an orthonormal basis, or the coordinate-block
/// formulation `γ_{Cⁱ−bⁱ}([x − bⁱyᵢ]_{Jᵢ}) ≤ yᵢ` when no `t` is declared.
pub fn build_orthogonal(spec: &ProblemSpec) -> Result<Formulation> {
    spec.check()?;
    let MethodParams::Orthogonal(d) = &spec.params else {
        return Err(DfcError::InvalidParams("orthogonal expects orthogonal parameters".into()));
    };
    let (n, k) = (spec.dim, spec.k());
    check_parts(&d.parts, k, n)?;
    match &d.t {
        None => build_orthogonal_sets(spec, &d.parts),
        Some(t) => build_orthogonal_cone(spec, d, t),
    }
}

fn build_orthogonal_sets(spec: &ProblemSpec, parts: &[Vec<usize>]) -> Result<Formulation> {
    let n = spec.dim;
    let mut f = Formulation::skeleton(spec, Method::Orthogonal);
    f.provenance = vec![ORTHOGONAL_SETS_LABEL.to_string()];
    let opts = OracleOptions::default();
    for (i, (c, b)) in spec.sets.iter().zip(&spec.base_points).enumerate() {
        for j in 0..n {
            let e = linalg::unit(n, j);
            let hi = set_core::support(c, &e, &opts)?;
            let lo = -set_core::support(c, &linalg::scale(&e, -1.0), &opts)?;
            if !hi.is_finite() || !lo.is_finite() {
                return Err(DfcError::ConditionViolated { reason: format!("set {} is not compact", i + 1), witness: e });
            }
            if !parts[i].contains(&j) && (hi > 1e-7 || lo < -1e-7) {
                return Err(DfcError::ConditionViolated {
                    reason: format!("set {} leaves its coordinate block along x{}", i + 1, j + 1),
                    witness: e,
                });
            }
        }
        let yi = AffExpr::var(f.y[i]);
        let arg: Vec<AffExpr> = (0..n)
            .map(|j| {
                if parts[i].contains(&j) {
                    AffExpr::var(f.x[j]).minus(&yi.scaled(b[j]))
                } else {
                    AffExpr::zero()
                }
            })
            .collect();
        let start = f.pool.len();
        let atoms = epi_gauge_shifted(c, b, &arg, &yi, &mut f.pool)?;
        f.push_block(atoms, ORTHOGONAL_SETS_LABEL, start);
    }
    Ok(f)
}

fn build_orthogonal_cone(spec: &ProblemSpec, d: &OrthogonalData, t: &[i8]) -> Result<Formulation> {
    let (n, k) = (spec.dim, spec.k());
    let v = basis_or_standard(&d.v, n)?;
    if d.g.len() != k || d.s.len() != k || d.s.iter().any(|s| s.len() != n) || t.len() != n {
        return Err(DfcError::InvalidParams("orthogonal data needs G, s per set and t of length n".into()));
    }
    let opts = OracleOptions::default();
    let zero = vec![0.0; n];
    let mut pieces = Vec::with_capacity(k);
    for i in 0..k {
        let s = &d.s[i];
        if (0..n).any(|j| s[j] != 0 && !d.parts[i].contains(&j)) {
            return Err(DfcError::InvalidParams(format!("s for set {} must vanish outside its block", i + 1)));
        }
        let basis = SignedBasis { v: v.clone(), s: s.clone(), t: t.to_vec() };
        basis.validate()?;
        if !set_core::contains(&d.g[i], &zero, 1e-7)? {
            return Err(DfcError::InvalidParams(format!("G for set {} must contain the origin", i + 1)));
        }
        if let Some((reason, witness)) = probe_cone_condition(&d.g[i], &basis, spec.probes(), spec.seed())? {
            return Err(DfcError::ConditionViolated { reason, witness });
        }
        pieces.push(SetExpr::Intersect { children: vec![d.g[i].clone(), sign_cone(&v, s)] });
    }
    // Declared sets must match bⁱ + Gⁱ∩Kⁱ + M on probe directions.
    let rays: Vec<Vec<f64>> = (0..n).map(|j| linalg::scale(&v[j], t[j] as f64)).collect();
    for i in 0..k {
        let model = pieces[i].clone().sum_cone(rays.clone()).translate(spec.base_points[i].clone());
        for u in probe_directions(n, 8, spec.seed()) {
            let a = set_core::support(&spec.sets[i], &u, &opts)?;
            let b = set_core::support(&model, &u, &opts)?;
            if !supports_agree(a, b, 1e-5) {
                return Err(DfcError::ConditionViolated {
                    reason: format!("set {} differs from b + G∩K + M", i + 1),
                    witness: u,
                });
            }
        }
    }
    let b = &spec.base_points;
    // b̲ˡⱼ = min{tⱼvʲ·x : x ∈ bˡ + Gˡ∩Kˡ}
    let mut lower = vec![vec![0.0; n]; k];
    for l in 0..k {
        for j in 0..n {
            let dir = linalg::scale(&v[j], -(t[j] as f64));
            lower[l][j] = -dot(&dir, &b[l]) - finite_support(&pieces[l], &dir, "lower projection bound")?;
        }
    }
    let mut f = Formulation::skeleton(spec, Method::Orthogonal);
    let label = Method::Orthogonal.label();
    let xs = f.xs();
    let mut atoms = Vec::new();
    for i in 0..k {
        let basis = SignedBasis { v: v.clone(), s: d.s[i].clone(), t: t.to_vec() };
        let dirs = crate::gauge_calculus::cone_sum_directions(&basis);
        let mut terms = Vec::new();
        for &j in &d.parts[i] {
            let u = &dirs[j];
            if norm(u) == 0.0 {
                continue;
            }
            let sv = linalg::scale(&v[j], d.s[i][j] as f64);
            let mut coefs = vec![0.0; k];
            for l in 0..k {
                coefs[l] = if l == i {
                    dot(u, &b[i])
                } else {
                    dot(&sv, &b[l]) + finite_support(&pieces[l], &sv, "upper projection bound")?
                };
                f.constants.insert(format!("bbar[{}][{}][{}]", i + 1, l + 1, j + 1), coefs[l]);
            }
            let e = AffExpr::combination(&xs, u).minus(&f.y_comb(&coefs));
            terms.push((u.clone(), e));
        }
        if !terms.is_empty() {
            atoms.push(Atom::GaugePlus { set: d.g[i].clone(), terms, rhs: AffExpr::var(f.y[i]) });
        }
    }
    for j in 0..n {
        let col: Vec<f64> = (0..k).map(|l| lower[l][j]).collect();
        for (l, c) in col.iter().enumerate() {
            f.constants.insert(format!("blow[{}][{}]", l + 1, j + 1), *c);
        }
        let e = AffExpr::combination(&xs, &linalg::scale(&v[j], t[j] as f64)).minus(&f.y_comb(&col));
        atoms.push(Atom::ge(e, 0.0));
    }
    let start = f.pool.len();
    f.push_block(atoms, label, start);
    Ok(f)
}

/// `Ax ≤ Σ bⁱyᵢ`.
pub fn build_bbj(spec: &ProblemSpec) -> Result<Formulation> {
    spec.check()?;
    let MethodParams::Bbj(d) = &spec.params else {
        return Err(DfcError::InvalidParams("bbj expects A and right-hand sides".into()));
    };
    let (n, k) = (spec.dim, spec.k());
    let m = d.a.len();
    if d.b.len() != k || d.b.iter().any(|b| b.len() != m) || d.a.iter().any(|r| r.len() != n) {
        return Err(DfcError::InvalidParams(format!("bbj data must give a {m}×{n} matrix and {k} right-hand sides")));
    }
    let mut f = Formulation::skeleton(spec, Method::Bbj);
    for (i, rhs) in d.b.iter().enumerate() {
        let rows: Vec<Atom> = d
            .a
            .iter()
            .zip(rhs)
            .map(|(row, bi)| Atom::le(AffExpr::combination(&f.xs(), row), *bi))
            .collect();
        let vars = f.pool.vars()[..n].to_vec();
        match maximize_atoms(&vars, &rows, &vec![0.0; n], &OptOptions::default()) {
            Ok(_) => {}
            Err(DfcError::Infeasible) => return Err(DfcError::EmptyPiece(i + 1)),
            Err(e) => return Err(e),
        }
    }
    let xs = f.xs();
    let atoms: Vec<Atom> = (0..m)
        .map(|r| {
            let col: Vec<f64> = d.b.iter().map(|b| b[r]).collect();
            Atom::le(AffExpr::combination(&xs, &d.a[r]).minus(&f.y_comb(&col)), 0.0)
        })
        .collect();
    let start = f.pool.len();
    f.push_block(atoms, Method::Bbj.label(), start);
    Ok(f)
}

/// Removes rows `a·w ≤ ρ` of `G` with `a = α·dⱼ`, `α > 0`, and `ρ ≥ α·reachⱼ`:
/// inside the gauge argument such rows are implied by the bound rows.
/// Returns `None` when nothing remains.
fn drop_implied_rows(g: &SetExpr, dirs: &[Vec<f64>], reach: &[f64]) -> Option<SetExpr> {
    let implied = |row: &[f64], rho: f64| {
        let rn = norm(row);
        dirs.iter().zip(reach).any(|(d, r)| {
            let alpha = dot(row, d);
            alpha > 0.0
                && norm(&linalg::axpy(row, -alpha, d)) <= 1e-9 * rn
                && rho >= alpha * r - 1e-9 * (1.0 + rho.abs())
        })
    };
    let reduce_rows = |a: &[Vec<f64>], b: &[f64]| -> Option<SetExpr> {
        let keep: Vec<usize> = (0..a.len()).filter(|&r| !implied(&a[r], b[r])).collect();
        if keep.is_empty() {
            None
        } else {
            Some(SetExpr::HPolyhedron {
                a: keep.iter().map(|&r| a[r].clone()).collect(),
                b: keep.iter().map(|&r| b[r]).collect(),
            })
        }
    };
    match g {
        SetExpr::HPolyhedron { a, b } => reduce_rows(a, b),
        SetExpr::BoxSet { lo, hi } => {
            let (a, b) = box_rows(lo, hi);
            reduce_rows(&a, &b)
        }
        SetExpr::Intersect { children } => {
            let mut rest: Vec<SetExpr> = children.iter().filter_map(|c| drop_implied_rows(c, dirs, reach)).collect();
            match rest.len() {
                0 => None,
                1 => rest.pop(),
                _ => Some(SetExpr::Intersect { children: rest }),
            }
        }
        other => Some(other.clone()),
    }
}

/// `γ_{Gⁱ}(Σⱼ vⁱʲ(vⁱʲ·x − Σₗ b̄ⁱˡⱼ yₗ)⁺) ≤ yᵢ` with bound rows
/// `Σ Lⁱⱼyᵢ ≤ vʲ·x ≤ Σ Uⁱⱼyᵢ`. Rows of `Gⁱ` implied by the bound rows are
/// dropped from the gauge set.
pub fn build_isotone_general(spec: &ProblemSpec) -> Result<Formulation> {
    spec.check()?;
    let MethodParams::Isotone(d) = &spec.params else {
        return Err(DfcError::InvalidParams("isotone expects isotone parameters".into()));
    };
    let (n, k) = (spec.dim, spec.k());
    let v = basis_or_standard(&d.v, n)?;
    if d.g.len() != k || d.s.len() != k || d.b.len() != k || d.s.iter().any(|s| s.len() != n) {
        return Err(DfcError::InvalidParams("isotone data needs G, s and b per set".into()));
    }
    if d.b.iter().any(|b| b.len() != n) {
        return Err(DfcError::InvalidParams("isotone translations must lie in R^n".into()));
    }
    let zero = vec![0.0; n];
    let mut pieces = Vec::with_capacity(k);
    for i in 0..k {
        let s = &d.s[i];
        if s.iter().any(|sj| sj.abs() != 1) {
            return Err(DfcError::InvalidParams("isotone signs must be ±1".into()));
        }
        if !set_core::contains(&d.g[i], &zero, 1e-7)? {
            return Err(DfcError::InvalidParams(format!("G for set {} must contain the origin", i + 1)));
        }
        let t: Vec<i8> = s.iter().map(|sj| -sj).collect();
        let basis = SignedBasis { v: v.clone(), s: s.clone(), t };
        basis.validate()?;
        if let Some((reason, witness)) = probe_cone_condition(&d.g[i], &basis, spec.probes(), spec.seed())? {
            return Err(DfcError::ConditionViolated { reason, witness });
        }
        pieces.push(SetExpr::Intersect { children: vec![d.g[i].clone(), sign_cone(&v, s)] });
    }
    let sv = |i: usize, j: usize| linalg::scale(&v[j], d.s[i][j] as f64);
    let mut f = Formulation::skeleton(spec, Method::Isotone);
    let label = Method::Isotone.label();
    let mut lo = vec![vec![0.0; n]; k];
    let mut hi = vec![vec![0.0; n]; k];
    let mut reach = vec![vec![0.0; n]; k];
    for i in 0..k {
        for j in 0..n {
            let base = dot(&v[j], &d.b[i]);
            lo[i][j] = base - finite_support(&pieces[i], &linalg::scale(&v[j], -1.0), "lower bound L")?;
            hi[i][j] = base + finite_support(&pieces[i], &v[j], "upper bound U")?;
            reach[i][j] = if d.s[i][j] > 0 { hi[i][j] - base } else { base - lo[i][j] };
            f.constants.insert(format!("L[{}][{}]", i + 1, j + 1), lo[i][j]);
            f.constants.insert(format!("U[{}][{}]", i + 1, j + 1), hi[i][j]);
        }
    }
    let xs = f.xs();
    let mut atoms = Vec::new();
    for i in 0..k {
        let dirs: Vec<Vec<f64>> = (0..n).map(|j| sv(i, j)).collect();
        let Some(h) = drop_implied_rows(&d.g[i], &dirs, &reach[i]) else {
            continue;
        };
        let mut terms = Vec::with_capacity(n);
        for j in 0..n {
            let mut coefs = vec![0.0; k];
            for l in 0..k {
                // b̄ⁱˡⱼ = max{vⁱʲ·x : x ∈ Cˡ} for l ≠ i and vⁱʲ·bⁱ on the diagonal.
                coefs[l] = if l == i {
                    dot(&dirs[j], &d.b[i])
                } else if d.s[i][j] > 0 {
                    hi[l][j]
                } else {
                    -lo[l][j]
                };
                f.constants.insert(format!("bbar[{}][{}][{}]", i + 1, l + 1, j + 1), coefs[l]);
            }
            terms.push((dirs[j].clone(), AffExpr::combination(&xs, &dirs[j]).minus(&f.y_comb(&coefs))));
        }
        let yi = AffExpr::var(f.y[i]);
        if d.positive_part {
            atoms.push(Atom::GaugePlus { set: h, terms, rhs: yi });
        } else {
            let mut arg = vec![AffExpr::zero(); n];
            for (dir, e) in &terms {
                for c in 0..n {
                    if dir[c] != 0.0 {
                        arg[c] = arg[c].plus(&e.scaled(dir[c]));
                    }
                }
            }
            atoms.extend(epi_gauge_exprs(&h, &arg, &yi, &mut f.pool)?);
        }
    }
    for j in 0..n {
        let proj = AffExpr::combination(&xs, &v[j]);
        let l: Vec<f64> = (0..k).map(|i| lo[i][j]).collect();
        let u: Vec<f64> = (0..k).map(|i| hi[i][j]).collect();
        atoms.push(Atom::ge(proj.minus(&f.y_comb(&l)), 0.0));
        atoms.push(Atom::le(proj.minus(&f.y_comb(&u)), 0.0));
    }
    let start = f.pool.len();
    f.push_block(atoms, label, start);
    Ok(f)
}
