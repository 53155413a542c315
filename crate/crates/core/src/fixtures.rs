//! Bundled worked instances.
//!
//! Each constructor returns a ready [`ProblemSpec`]. Derived constants are noted
//! next to the data together with the oracle that confirms them.

use crate::formulation_builders::{
    BbjData, BigMData, HomothetyData, IsotoneData, Method, MethodParams, OrthogonalData, PiecewiseData, ProblemSpec,
};
use crate::set_core::{CatalogFunction, Cone, SetExpr};

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 7] = ["ex1", "ex3", "ex4", "ex5", "ex6", "ex7", "orth"];

fn hpoly(a: Vec<Vec<f64>>, b: Vec<f64>) -> SetExpr {
    SetExpr::HPolyhedron { a, b }
}

/// `{x ∈ R² : (2 − v₁x₁)(2 − v₂x₂) ≥ 1}` for the sign vectors in `signs`, as
/// rotated cones `‖(2, v₁x₁ − v₂x₂)‖ ≤ 4 − v·x`.
pub fn hyperbolic_pieces(signs: &[[f64; 2]]) -> SetExpr {
    let mut a = Vec::new();
    let mut c = Vec::new();
    let mut cones = Vec::new();
    for v in signs {
        a.push(vec![-v[0], -v[1]]);
        c.push(4.0);
        a.push(vec![0.0, 0.0]);
        c.push(2.0);
        a.push(vec![v[0], -v[1]]);
        c.push(0.0);
        cones.push(Cone::soc(3));
    }
    SetExpr::ConicRep { a, b: Vec::new(), c, cones }
}

const SIGNS: [[f64; 2]; 4] = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]];

fn ex1_sets() -> Vec<SetExpr> {
    vec![hyperbolic_pieces(&SIGNS), SetExpr::cube(2, -1.25, 1.25)]
}

/// Hyperbolic star and the box `[−5/4, 5/4]²`. With `bigm` the Big-M method
/// is selected, otherwise the extended formulation.
///
/// Minimal Big-M in gauge units: `M₁₂ = 5/4` (gauge of `C¹` at the box
/// corners), `M₂₁ = 6/5` (`max ‖x‖∞ = 3/2` over `C¹` divided by `5/4`).
pub fn ex1(bigm: bool) -> ProblemSpec {
    let (method, params) = if bigm {
        (Method::Bigm, MethodParams::BigM(BigMData::default()))
    } else {
        (Method::Extended, MethodParams::None)
    };
    ProblemSpec::new(2, ex1_sets(), vec![vec![0.0; 2]; 2], method, params)
}

/// Homothety family for the sign vector `s`: `C^{s,0}` is one hyperbolic piece
/// cut by `sⱼxⱼ ≤ 3/2`, `r = (1, 0)`, `b¹ = 0`, `b² = (5/4)s`.
pub fn ex3_family(s: [f64; 2]) -> HomothetyData {
    let c0 = SetExpr::Intersect {
        children: vec![
            hyperbolic_pieces(&[s]),
            hpoly(vec![vec![s[0], 0.0], vec![0.0, s[1]]], vec![1.5, 1.5]),
        ],
    };
    HomothetyData { c0, b: vec![vec![0.0; 2], vec![1.25 * s[0], 1.25 * s[1]]], r: vec![1.0, 0.0] }
}

pub fn ex3() -> ProblemSpec {
    let families = SIGNS.iter().map(|s| ex3_family(*s)).collect();
    ProblemSpec::new(2, ex1_sets(), vec![vec![0.0; 2]; 2], Method::Piecewise, MethodParams::Piecewise(PiecewiseData { families }))
}

fn ex4_matrix() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0, 1.0], vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0], vec![0.0, -1.0, 1.0]]
}

/// Two polyhedra `{Ax ≤ bⁱ}` in `R³`; `augmented` appends the row `x₃ ≤ 1`.
pub fn ex4(augmented: bool) -> ProblemSpec {
    let mut a = ex4_matrix();
    let mut b1 = vec![1.0, 1.0, 2.0, 2.0];
    let mut b2 = vec![2.0, 2.0, 1.0, 1.0];
    if augmented {
        a.push(vec![0.0, 0.0, 1.0]);
        b1.push(1.0);
        b2.push(1.0);
    }
    let sets = vec![hpoly(a.clone(), b1.clone()), hpoly(a.clone(), b2.clone())];
    ProblemSpec::new(3, sets, vec![vec![0.0; 3]; 2], Method::Bbj, MethodParams::Bbj(BbjData { a, b: vec![b1, b2] }))
}

/// Cone slices over `(x₀, x)`: `‖(x, l)‖ ≤ ρ + σx₀` for each `(σ, ρ, l)` in
/// `soc` and `|x| ≤ 1 + σx₀` for each `σ` in `abs`.
fn ex5_cone(soc: &[(f64, f64, f64)], abs: &[f64]) -> SetExpr {
    let mut a = Vec::new();
    let mut c = Vec::new();
    let mut cones = Vec::new();
    for (sign, rhs, lift) in soc {
        a.push(vec![*sign, 0.0]);
        c.push(*rhs);
        a.push(vec![0.0, 1.0]);
        c.push(0.0);
        a.push(vec![0.0, 0.0]);
        c.push(*lift);
        cones.push(Cone::soc(3));
    }
    for sign in abs {
        a.push(vec![*sign, 0.0]);
        c.push(1.0);
        a.push(vec![0.0, 1.0]);
        c.push(0.0);
        cones.push(Cone::soc(2));
    }
    SetExpr::ConicRep { a, b: Vec::new(), c, cones }
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Families `j = 1, 2` (and the redundant third family with `extra`) for two
/// conic pieces in `R²` with coordinates `(x₀, x)`.
pub fn ex5(extra: bool) -> ProblemSpec {
    // C¹: ‖(x,1)‖ ≤ √2 − x₀, |x| ≤ 1 + x₀;  C²: |x| ≤ 1 − x₀, ‖(x,1)‖ ≤ √2 + x₀.
    let c1 = ex5_cone(&[(-1.0, SQRT2, 1.0)], &[1.0]);
    let c2 = ex5_cone(&[(1.0, SQRT2, 1.0)], &[-1.0]);
    let fam = |sign: f64| ex5_cone(&[(sign, SQRT2, 1.0)], &[sign]);
    let mut families = vec![
        HomothetyData { c0: fam(-1.0), b: vec![vec![0.0, 0.0], vec![1.0, 0.0]], r: vec![1.0, 0.0] },
        HomothetyData { c0: fam(1.0), b: vec![vec![-1.0, 0.0], vec![0.0, 0.0]], r: vec![0.0, 1.0] },
    ];
    if extra {
        families.push(HomothetyData { c0: ex5_cone(&[], &[1.0, -1.0]), b: vec![vec![0.0; 2]; 2], r: vec![1.0, 1.0] });
    }
    ProblemSpec::new(2, vec![c1, c2], vec![vec![0.0; 2]; 2], Method::Piecewise, MethodParams::Piecewise(PiecewiseData { families }))
}

fn square_plus(sign: f64) -> CatalogFunction {
    CatalogFunction::QuadraticPlus { a: vec![sign, 0.0], beta: 0.0, w: 1.0 }
}

fn minus_x2() -> CatalogFunction {
    CatalogFunction::Affine { a: vec![0.0, -1.0], beta: 0.0 }
}

/// Segment `[−1,1]×{0}` and the parabola region `{x ∈ [−1,1]×[0,1] : x₁² ≤ x₂}`
/// with the two one-sided families `g_j(x₁) = ((−1)ʲx₁)⁺²`.
pub fn ex6() -> ProblemSpec {
    let c1 = SetExpr::BoxSet { lo: vec![-1.0, 0.0], hi: vec![1.0, 0.0] };
    let c2 = SetExpr::Intersect {
        children: vec![
            SetExpr::LevelSet { f: CatalogFunction::Sum { parts: vec![square_plus(1.0), square_plus(-1.0), minus_x2()] } },
            SetExpr::BoxSet { lo: vec![-1.0, 0.0], hi: vec![1.0, 1.0] },
        ],
    };
    let families = [-1.0, 1.0]
        .iter()
        .map(|sign| HomothetyData {
            c0: SetExpr::Intersect {
                children: vec![
                    SetExpr::LevelSet { f: CatalogFunction::Sum { parts: vec![square_plus(*sign), minus_x2()] } },
                    hpoly(vec![vec![0.0, 1.0]], vec![1.0]),
                ],
            },
            b: vec![vec![*sign, 0.0], vec![0.0, 0.0]],
            r: vec![0.0, 1.0],
        })
        .collect();
    ProblemSpec::new(2, vec![c1, c2], vec![vec![0.0; 2]; 2], Method::Piecewise, MethodParams::Piecewise(PiecewiseData { families }))
}

/// Membership in the explicit description of the hull of the two pieces of
/// [`ex6`] over `(x₁, x₂, y₁, y₂)`: the largest constraint violation.
pub fn ex6_explicit_violation(p: &[f64]) -> f64 {
    let (x1, x2, y1, y2) = (p[0], p[1], p[2], p[3]);
    let root = (x2 * y2).max(0.0).sqrt();
    [
        x1 - y1 - root,
        -x1 - y1 - root,
        -x2,
        x2 - y2,
        x1 - 1.0,
        -x1 - 1.0,
        (y1 + y2 - 1.0).abs(),
        -y1,
        -y2,
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// `r = 2 − 2^{−1/3}` for the ideal single-gauge variant.
pub fn ex7_ideal_r() -> f64 {
    2.0 - 2f64.powf(-1.0 / 3.0)
}

fn geo_mean() -> SetExpr {
    SetExpr::LevelSet { f: CatalogFunction::GeoMeanDeficit { dim: 3, shift: 2.0, scale: 1.0 } }
}

/// `G¹ = {∏(2 − xⱼ) ≥ 1, xⱼ ≤ 2}`; `C¹ = G¹ ∩ [0,r]³`, `C² = [−2,0]³` in `R³`.
/// With `positive_part = false` the gauge argument is `x` itself.
pub fn ex7(r: f64, positive_part: bool) -> ProblemSpec {
    let n = 3;
    let eye = |s: f64| (0..n).map(|j| (0..n).map(|c| if c == j { s } else { 0.0 }).collect()).collect::<Vec<Vec<f64>>>();
    let c1 = SetExpr::Intersect { children: vec![geo_mean(), SetExpr::cube(n, 0.0, r)] };
    let c2 = SetExpr::cube(n, -2.0, 0.0);
    let g1 = SetExpr::Intersect { children: vec![geo_mean(), hpoly(eye(1.0), vec![r; n])] };
    let g2 = hpoly(eye(-1.0), vec![2.0; n]);
    let params = IsotoneData {
        g: vec![g1, g2],
        v: None,
        s: vec![vec![1; n], vec![-1; n]],
        b: vec![vec![0.0; n]; 2],
        positive_part,
    };
    ProblemSpec::new(n, vec![c1, c2], vec![vec![0.0; n]; 2], Method::Isotone, MethodParams::Isotone(params))
}

/// Witness against the single-gauge variant at `r = 2`: `xⱼ = a` on
/// `J = {1,2}`, `x₃ = −1/2`, `y = (1/2, 1/2)`. The threshold
/// `1 − 2^{−3/2}(3/2)^{−1/2} ≈ 0.711325` makes `γ(x) = 1/2` exactly (bisection
/// oracle); the value used sits just inside.
pub fn ex7_witness() -> Vec<f64> {
    vec![0.711319, 0.711319, -0.5, 0.5, 0.5]
}

/// Two segments on orthogonal axes with coordinate blocks `{x₁}`, `{x₂}`.
pub fn orthogonal_segments() -> ProblemSpec {
    let c1 = SetExpr::BoxSet { lo: vec![-1.0, 0.0], hi: vec![2.0, 0.0] };
    let c2 = SetExpr::BoxSet { lo: vec![0.0, -1.0], hi: vec![0.0, 1.0] };
    let params = OrthogonalData { g: Vec::new(), v: None, s: Vec::new(), t: None, parts: vec![vec![0], vec![1]] };
    ProblemSpec::new(2, vec![c1, c2], vec![vec![0.0; 2]; 2], Method::Orthogonal, MethodParams::Orthogonal(params))
}

/// Named variants of a bundled instance, used by the command line.
pub fn by_name(name: &str) -> Option<Vec<(String, ProblemSpec)>> {
    let list = match name {
        "ex1" => vec![("ex1".into(), ex1(false)), ("ex1-bigm".into(), ex1(true))],
        "ex3" => vec![("ex3".into(), ex3())],
        "ex4" => vec![("ex4".into(), ex4(false)), ("ex4aug".into(), ex4(true))],
        "ex5" => vec![("ex5".into(), ex5(false)), ("ex5-extra".into(), ex5(true))],
        "ex6" => vec![("ex6".into(), ex6())],
        "ex7" => vec![
            ("ex7".into(), ex7(ex7_ideal_r(), true)),
            ("ex7-single".into(), ex7(ex7_ideal_r(), false)),
            ("ex7-r2".into(), ex7(2.0, true)),
            ("ex7-r2-single".into(), ex7(2.0, false)),
        ],
        "orth" => vec![("orth".into(), orthogonal_segments())],
        _ => return None,
    };
    Some(list)
}
