//! Sampled and exact strength checks.
//!
//! Every sampled check compares a relaxation support value with the matching
//! hull value over seeded directions and can only refute. The exact mode of
//! [`check_ideal`] enumerates the vertices of a linear relaxation and decides
//! idealness by `y`-integrality.

use std::time::Instant;

use crate::analysis::optimizer::{OptOptions, OptResult};
use crate::analysis::report::{AnalysisReport, Verdict, Witness};
use crate::analysis::vertex::{enumerate_vertices, VertexSet};
use crate::analysis::{maximize_with, par_eval, relaxation_polyhedron, xy_objective};
use crate::error::{DfcError, Result};
use crate::formulation_builders::{homothetic_piece, BbjData, MethodParams, ProblemSpec};
use crate::gauge_calculus::{AffExpr, Atom};
use crate::linalg::{dot, rank, unit};
use crate::model_ir_emit::ModelIR;
use crate::sampling::directions;
use crate::set_core::{contains_with, exposed_point, support, OracleOptions, SetExpr};

/// Integrality tolerance for exact-mode vertices.
const INTEGRALITY_TOL: f64 = 1e-7;
/// Membership tolerance for containment probes.
const MEMBER_TOL: f64 = 1e-6;
/// Upper bound on the enumerated basis family.
const MAX_BASES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub directions: usize,
    pub seed: u64,
    /// Relative comparison tolerance: a sample fails when the gap exceeds
    /// `tol·(1 + |reference|)`.
    pub tol: f64,
    pub box_radius: f64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Allow the exact vertex mode for linear models.
    pub exact: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { directions: 500, seed: 0, tol: 1e-6, box_radius: 1e3, jobs: None, exact: true }
    }
}

impl AnalysisOptions {
    pub fn with_directions(mut self, n: usize) -> Self {
        self.directions = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_jobs(mut self, jobs: Option<usize>) -> Self {
        self.jobs = jobs;
        self
    }

    fn opt(&self) -> OptOptions {
        OptOptions::default().with_box_radius(self.box_radius)
    }

    fn oracle(&self) -> OracleOptions {
        OracleOptions { box_radius: self.box_radius, ..OracleOptions::default() }
    }

    fn threshold(&self, reference: f64) -> f64 {
        self.tol * (1.0 + reference.abs())
    }
}

fn start(check: &str, mode: &str, ir: Option<&ModelIR>, opts: &AnalysisOptions) -> AnalysisReport {
    let mut r = AnalysisReport::new(check, mode);
    r.method = ir.map(|m| m.method.clone());
    r.seed = opts.seed;
    r.tol = opts.tol;
    r.box_radius = opts.box_radius;
    r
}

/// One relaxation-versus-hull comparison.
struct Sample {
    witness: Option<Witness>,
    box_active: bool,
    below: bool,
}

/// Relaxation value, `+∞` when the artificial box binds.
fn relaxation_value(r: &OptResult) -> f64 {
    if r.box_active {
        f64::INFINITY
    } else {
        r.value
    }
}

fn compare(sample: usize, direction: Vec<f64>, opt: &OptResult, reference: f64, opts: &AnalysisOptions) -> Sample {
    let value = relaxation_value(opt);
    let (fails, margin) = if value == f64::INFINITY {
        (reference < f64::INFINITY, opt.value - reference)
    } else if reference == f64::INFINITY {
        (false, f64::NEG_INFINITY)
    } else {
        let m = value - reference;
        (m > opts.threshold(reference), m)
    };
    let below = reference.is_finite() && value.is_finite() && reference - value > opts.threshold(reference);
    let witness = fails.then(|| Witness {
        sample,
        direction,
        point: opt.point.clone(),
        value: opt.value,
        reference,
        margin,
        box_active: opt.box_active,
    });
    Sample { witness, box_active: opt.box_active, below }
}

fn collect(report: &mut AnalysisReport, results: Vec<Result<Sample>>) -> Result<()> {
    let mut failing = Vec::new();
    let mut below = 0;
    for r in results {
        let s = r?;
        report.samples += 1;
        report.box_active += s.box_active as usize;
        below += s.below as usize;
        failing.extend(s.witness);
    }
    if below > 0 {
        report.notes.push(format!("{below} samples with relaxation value below the hull value"));
    }
    report.conclude(failing, Verdict::NotRefuted);
    Ok(())
}

fn supports(sets: &[SetExpr], u: &[f64], o: &OracleOptions) -> Result<Vec<f64>> {
    sets.iter().map(|s| support(s, u, o)).collect()
}

fn check_shapes(ir: &ModelIR, spec: &ProblemSpec) -> Result<()> {
    if ir.n() != spec.dim {
        return Err(DfcError::DimensionMismatch { expected: spec.dim, got: ir.n() });
    }
    if ir.k() != spec.k() {
        return Err(DfcError::DimensionMismatch { expected: spec.k(), got: ir.k() });
    }
    Ok(())
}

/// Sharpness: `max c·x` over the relaxation against `maxᵢ σ_{Cⁱ}(c)`.
pub fn check_sharp(ir: &ModelIR, spec: &ProblemSpec, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    check_shapes(ir, spec)?;
    let t0 = Instant::now();
    let mut report = start("sharp", "sampled", Some(ir), opts);
    let dirs = directions(ir.n(), opts.directions, opts.seed);
    let (o, oo) = (opts.opt(), opts.oracle());
    let results = par_eval(dirs.len(), opts.jobs, |s| {
        let c = &dirs[s];
        let reference = supports(&spec.sets, c, &oo)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
        let r = maximize_with(ir, &xy_objective(ir, c, &[]), &[], &o)?;
        Ok(compare(s, c.clone(), &r, reference, opts))
    });
    collect(&mut report, results)?;
    report.elapsed = t0.elapsed();
    Ok(report)
}

/// Idealness. Linear models (within the vertex-enumeration limits) are decided
/// exactly by `y`-integrality of the relaxation's vertices; otherwise sampled
/// `(u, v)` compare the relaxation with `maxᵢ σ_{Cⁱ}(u) + vᵢ`.
pub fn check_ideal(ir: &ModelIR, spec: &ProblemSpec, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    check_shapes(ir, spec)?;
    let t0 = Instant::now();
    if opts.exact && ir.is_linear() {
        let (a, b) = relaxation_polyhedron(ir)?;
        match enumerate_vertices(&a, &b) {
            Ok(vs) => {
                let mut report = exact_ideal(ir, &vs, opts)?;
                report.elapsed = t0.elapsed();
                return Ok(report);
            }
            Err(DfcError::ScaleLimit(why)) => {
                let mut report = sampled_ideal(ir, spec, opts)?;
                report.notes.push(format!("exact mode skipped: {why}"));
                report.elapsed = t0.elapsed();
                return Ok(report);
            }
            Err(e) => return Err(e),
        }
    }
    let mut report = sampled_ideal(ir, spec, opts)?;
    report.elapsed = t0.elapsed();
    Ok(report)
}

fn fractionality(v: f64) -> f64 {
    (v - v.round()).abs()
}

fn exact_ideal(ir: &ModelIR, vs: &VertexSet, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let mut report = start("ideal", "exact", Some(ir), opts);
    if vs.is_empty() {
        return Err(DfcError::Infeasible);
    }
    report.samples = vs.vertices.len();
    let failing: Vec<Witness> = vs
        .vertices
        .iter()
        .enumerate()
        .filter_map(|(s, p)| {
            let frac = ir.y.iter().map(|&j| fractionality(p[j])).fold(0.0, f64::max);
            (frac > INTEGRALITY_TOL).then(|| Witness {
                sample: s,
                direction: Vec::new(),
                point: p.clone(),
                value: frac,
                reference: 0.0,
                margin: frac,
                box_active: false,
            })
        })
        .collect();
    report.notes.push(format!("{} vertices, {} extreme rays, {} lines", vs.vertices.len(), vs.rays.len(), vs.lines.len()));
    report.conclude(failing, Verdict::Pass);
    Ok(report)
}

fn sampled_ideal(ir: &ModelIR, spec: &ProblemSpec, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let (n, k) = (ir.n(), ir.k());
    let mut report = start("ideal", "sampled", Some(ir), opts);
    let dirs = directions(n + k, opts.directions, opts.seed);
    let (o, oo) = (opts.opt(), opts.oracle());
    let results = par_eval(dirs.len(), opts.jobs, |s| {
        let (u, v) = dirs[s].split_at(n);
        let reference = supports(&spec.sets, u, &oo)?
            .into_iter()
            .zip(v)
            .map(|(a, b)| a + b)
            .fold(f64::NEG_INFINITY, f64::max);
        let r = maximize_with(ir, &xy_objective(ir, u, v), &[], &o)?;
        Ok(compare(s, dirs[s].clone(), &r, reference, opts))
    });
    collect(&mut report, results)?;
    Ok(report)
}

/// Minkowski criterion: the relaxation slice at `y = (1/k)·1` against the
/// averaged supports `(1/k)Σᵢ σ_{Cⁱ}(u)`.
pub fn check_minkowski_ideal(ir: &ModelIR, spec: &ProblemSpec, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    check_shapes(ir, spec)?;
    let t0 = Instant::now();
    let k = ir.k();
    let mut report = start("minkowski", "sampled", Some(ir), opts);
    let fix: Vec<Atom> = ir.y.iter().map(|&j| Atom::eq(AffExpr::var(j), 1.0 / k as f64)).collect();
    let dirs = directions(ir.n(), opts.directions, opts.seed);
    let (o, oo) = (opts.opt(), opts.oracle());
    let results = par_eval(dirs.len(), opts.jobs, |s| {
        let u = &dirs[s];
        let reference = supports(&spec.sets, u, &oo)?.iter().sum::<f64>() / k as f64;
        let r = maximize_with(ir, &xy_objective(ir, u, &[]), &fix, &o)?;
        Ok(compare(s, u.clone(), &r, reference, opts))
    });
    collect(&mut report, results)?;
    report.elapsed = t0.elapsed();
    Ok(report)
}

/// `|a − b|` with `∞ − ∞ = 0`.
fn support_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// Families `C^{j,i}` of a piecewise instance, indexed `[j][i]`.
pub fn piecewise_families(spec: &ProblemSpec) -> Result<Vec<Vec<SetExpr>>> {
    match &spec.params {
        MethodParams::Piecewise(p) => Ok(p
            .families
            .iter()
            .map(|h| (0..h.r.len()).map(|i| homothetic_piece(h, i)).collect())
            .collect()),
        _ => Err(DfcError::InvalidParams("instance has no piecewise families".into())),
    }
}

/// Containment `Cⁱ ⊆ C^{j,i}` probed at exposed points, and support equality:
/// every sampled `u` needs one family `j` with `σ_{Cⁱ}(u) = σ_{C^{j,i}}(u)`
/// for all `i`. `families[j][i]` is `C^{j,i}`.
pub fn check_par_conditions(
    sets: &[SetExpr],
    families: &[Vec<SetExpr>],
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    let t0 = Instant::now();
    let k = sets.len();
    if families.is_empty() {
        return Err(DfcError::InvalidParams("no families".into()));
    }
    if let Some(f) = families.iter().find(|f| f.len() != k) {
        return Err(DfcError::DimensionMismatch { expected: k, got: f.len() });
    }
    let n = sets.first().and_then(|s| s.dim()).ok_or_else(|| DfcError::InvalidParams("family dimension unknown".into()))?;
    let mut report = start("par", "sampled", None, opts);
    let dirs = directions(n, opts.directions, opts.seed);
    let oo = opts.oracle();
    let mut containment = 0usize;
    let results = par_eval(dirs.len(), opts.jobs, |s| -> Result<(Option<Witness>, usize)> {
        let u = &dirs[s];
        let base = supports(sets, u, &oo)?;
        let mut uncontained = 0;
        let mut worst_point: Option<(f64, Vec<f64>)> = None;
        let mut best: Option<(f64, usize)> = None;
        for (j, fam) in families.iter().enumerate() {
            let other = supports(fam, u, &oo)?;
            for i in 0..k {
                if base[i].is_finite() {
                    let p = exposed_point(&sets[i], u, &oo)?;
                    if !contains_with(&fam[i], &p, MEMBER_TOL, &oo)? {
                        uncontained += 1;
                        let gap = (dot(u, &p) - other[i]).max(0.0);
                        if worst_point.as_ref().is_none_or(|(g, _)| gap > *g) {
                            worst_point = Some((gap, p));
                        }
                    }
                }
            }
            let gap = (0..k)
                .map(|i| {
                    let g = support_gap(base[i], other[i]);
                    if g > opts.threshold(if base[i].is_finite() { base[i] } else { 0.0 }) {
                        g
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max);
            if best.is_none_or(|(g, _)| gap < g) {
                best = Some((gap, j));
            }
        }
        let (gap, j) = best.expect("families nonempty");
        let witness = if let Some((g, p)) = worst_point {
            Some(Witness { sample: s, direction: u.clone(), point: p, value: g, reference: 0.0, margin: g, box_active: false })
        } else if gap > 0.0 {
            let other = supports(&families[j], u, &oo)?;
            let i = (0..k).max_by(|&a, &b| support_gap(base[a], other[a]).total_cmp(&support_gap(base[b], other[b])));
            let i = i.unwrap_or(0);
            Some(Witness {
                sample: s,
                direction: u.clone(),
                point: Vec::new(),
                value: other[i],
                reference: base[i],
                margin: gap,
                box_active: false,
            })
        } else {
            None
        };
        Ok((witness, uncontained))
    });
    let mut failing = Vec::new();
    for r in results {
        let (w, c) = r?;
        report.samples += 1;
        containment += c;
        failing.extend(w);
    }
    if containment > 0 {
        report.notes.push(format!("{containment} exposed points outside their family piece"));
    }
    report.conclude(failing, Verdict::NotRefuted);
    report.elapsed = t0.elapsed();
    Ok(report)
}

/// Row subsets `B` with `|B| = rank(A) = rank(A_B)`, in lexicographic order.
pub fn basis_family(a: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
    let n = a.first().map(|r| r.len()).unwrap_or(0);
    let r = rank(a, n, 1e-9);
    let m = a.len();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..r).collect();
    if r == 0 || r > m {
        return Ok(vec![Vec::new()]);
    }
    loop {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| a[i].clone()).collect();
        if rank(&rows, n, 1e-9) == r {
            out.push(idx.clone());
            if out.len() > MAX_BASES {
                return Err(DfcError::ScaleLimit(format!("more than {MAX_BASES} bases")));
            }
        }
        // Next r-combination of 0..m.
        let mut p = r;
        while p > 0 && idx[p - 1] == m - r + p - 1 {
            p -= 1;
        }
        if p == 0 {
            break;
        }
        idx[p - 1] += 1;
        for q in p..r {
            idx[q] = idx[q - 1] + 1;
        }
    }
    Ok(out)
}

fn lp_max(vs: &VertexSet, c: &[f64]) -> Result<f64> {
    vs.maximize(c).ok_or(DfcError::Infeasible)
}

/// Basis condition: for each sampled `c` some basis `B` satisfies
/// `max{c·x : A_B x ≤ bⁱ_B} = max{c·x : Ax ≤ bⁱ}` for every `i`, with `+∞` on
/// both sides counting as equal. Signed coordinate axes are probed first, then
/// `n_samples` seeded directions.
pub fn check_bbj_condition(data: &BbjData, n_samples: usize, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let t0 = Instant::now();
    let n = data.a.first().map(|r| r.len()).unwrap_or(0);
    let mut report = start("bbj", "sampled", None, opts);
    report.method = Some("bbj".into());
    let bases = basis_family(&data.a)?;
    let full: Vec<VertexSet> = data.b.iter().map(|b| enumerate_vertices(&data.a, b)).collect::<Result<_>>()?;
    if let Some(i) = full.iter().position(VertexSet::is_empty) {
        return Err(DfcError::EmptyPiece(i + 1));
    }
    let restricted: Vec<Vec<VertexSet>> = bases
        .iter()
        .map(|bs| {
            let rows: Vec<Vec<f64>> = bs.iter().map(|&r| data.a[r].clone()).collect();
            data.b
                .iter()
                .map(|b| enumerate_vertices(&rows, &bs.iter().map(|&r| b[r]).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut cs: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        cs.push(unit(n, j));
        cs.push(unit(n, j).iter().map(|v| -v).collect());
    }
    cs.extend(directions(n, n_samples, opts.seed));
    report.notes.push(format!("{} bases", bases.len()));
    let results = par_eval(cs.len(), opts.jobs, |s| -> Result<Option<Witness>> {
        let c = &cs[s];
        let reference: Vec<f64> = full.iter().map(|vs| lp_max(vs, c)).collect::<Result<_>>()?;
        let mut best: Option<(f64, f64, f64)> = None;
        for per_piece in &restricted {
            let mut worst = (0.0, f64::NAN, f64::NAN);
            for (vs, r) in per_piece.iter().zip(&reference) {
                let v = lp_max(vs, c)?;
                let g = support_gap(v, *r);
                if g > opts.threshold(if r.is_finite() { *r } else { 0.0 }) && g > worst.0 {
                    worst = (g, v, *r);
                }
            }
            if best.is_none_or(|b| worst.0 < b.0) {
                best = Some(worst);
            }
        }
        Ok(best.filter(|b| b.0 > 0.0).map(|(margin, value, reference)| Witness {
            sample: s,
            direction: c.clone(),
            point: Vec::new(),
            value,
            reference,
            margin,
            box_active: false,
        }))
    });
    let mut failing = Vec::new();
    for r in results {
        report.samples += 1;
        failing.extend(r?);
    }
    report.conclude(failing, Verdict::NotRefuted);
    report.elapsed = t0.elapsed();
    Ok(report)
}
