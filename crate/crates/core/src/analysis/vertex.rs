//! Vertex and extreme-ray enumeration by the double description method.
//!
//! `P = {x : Ax ≤ b}` is homogenized to the cone `{(x,t) : Ax − bt ≤ 0, t ≥ 0}`.
//! Rows are inserted one at a time while the cone is held as lineality plus
//! extreme rays. A lineality vector not orthogonal to the new row becomes a
//! ray and the remaining generators are projected onto the row's hyperplane;
//! otherwise adjacent pairs of rays across the hyperplane are combined, with
//! adjacency decided by the combinatorial zero-set test.

use crate::error::{DfcError, Result};
use crate::linalg::{dot, norm_inf};

pub const MAX_ROWS: usize = 64;
pub const MAX_DIM: usize = 10;
const EPS: f64 = 1e-9;

/// `P = conv(vertices) + cone(rays) + span(lines)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VertexSet {
    pub vertices: Vec<Vec<f64>>,
    pub rays: Vec<Vec<f64>>,
    pub lines: Vec<Vec<f64>>,
}

impl VertexSet {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `max c·x` over the polyhedron; `+∞` along a ray or line.
    pub fn maximize(&self, c: &[f64]) -> Option<f64> {
        if self.vertices.is_empty() {
            return None;
        }
        let unbounded = self.rays.iter().any(|r| dot(c, r) > EPS) || self.lines.iter().any(|l| dot(c, l).abs() > EPS);
        if unbounded {
            return Some(f64::INFINITY);
        }
        Some(self.vertices.iter().map(|v| dot(c, v)).fold(f64::NEG_INFINITY, f64::max))
    }
}

#[derive(Clone)]
struct Ray {
    v: Vec<f64>,
    zero: u128,
}

fn normalize(v: &mut [f64]) {
    let m = norm_inf(v);
    if m > 0.0 {
        for x in v.iter_mut() {
            *x /= m;
        }
    }
}

fn scaled_tol(g: &[f64]) -> f64 {
    EPS * norm_inf(g).max(1.0)
}

fn dedup(points: &mut Vec<Vec<f64>>) {
    points.sort_by(|a, b| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points.drain(..) {
        let dup = out.iter().any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))));
        if !dup {
            out.push(p);
        }
    }
    *points = out;
}

/// Vertices, extreme rays and a lineality basis of `{x : Ax ≤ b}`.
pub fn enumerate_vertices(a: &[Vec<f64>], b: &[f64]) -> Result<VertexSet> {
    let m = a.len();
    let d = a.first().map(|r| r.len()).unwrap_or(0);
    if m > MAX_ROWS || d > MAX_DIM {
        return Err(DfcError::ScaleLimit(format!("{m} rows in dimension {d} (limits {MAX_ROWS} rows, dimension {MAX_DIM})")));
    }
    if a.iter().any(|r| r.len() != d) || b.len() != m {
        return Err(DfcError::InvalidSet("inconsistent polyhedron data".into()));
    }
    let dim = d + 1;
    // Row 0 is t ≥ 0; row k+1 is aₖ·x − bₖt ≤ 0.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut t_row = vec![0.0; dim];
    t_row[d] = -1.0;
    rows.push(t_row);
    for (r, bk) in a.iter().zip(b) {
        let mut g = r.clone();
        g.push(-bk);
        rows.push(g);
    }
    let mut lines: Vec<Vec<f64>> = (0..dim)
        .map(|j| {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut rays: Vec<Ray> = Vec::new();
    for (idx, g) in rows.iter().enumerate() {
        let bit = 1u128 << idx;
        let tol = scaled_tol(g);
        let pivot = lines
            .iter()
            .enumerate()
            .map(|(i, l)| (i, dot(g, l)))
            .filter(|(_, p)| p.abs() > tol)
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()));
        if let Some((pi, gp)) = pivot {
            let l0 = lines.remove(pi);
            for l in lines.iter_mut() {
                let f = dot(g, l) / gp;
                for (lj, l0j) in l.iter_mut().zip(&l0) {
                    *lj -= f * l0j;
                }
            }
            for r in rays.iter_mut() {
                let f = dot(g, &r.v) / gp;
                for (rj, l0j) in r.v.iter_mut().zip(&l0) {
                    *rj -= f * l0j;
                }
                normalize(&mut r.v);
                r.zero |= bit;
            }
            let sign = if gp > 0.0 { -1.0 } else { 1.0 };
            let mut nr: Vec<f64> = l0.iter().map(|v| sign * v).collect();
            normalize(&mut nr);
            // The new ray is tight on every earlier row: they are orthogonal to
            // the lineality space it came from.
            rays.push(Ray { v: nr, zero: bit - 1 });
            continue;
        }
        let vals: Vec<f64> = rays.iter().map(|r| dot(g, &r.v)).collect();
        let mut next: Vec<Ray> = Vec::with_capacity(rays.len());
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (i, r) in rays.iter().enumerate() {
            if vals[i] > tol {
                pos.push(i);
            } else if vals[i] < -tol {
                neg.push(i);
                next.push(r.clone());
            } else {
                next.push(Ray { v: r.v.clone(), zero: r.zero | bit });
            }
        }
        for &p in &pos {
            for &q in &neg {
                let common = rays[p].zero & rays[q].zero;
                let blocked = rays
                    .iter()
                    .enumerate()
                    .any(|(s, r)| s != p && s != q && r.zero & common == common);
                if blocked {
                    continue;
                }
                let (vp, vq) = (vals[p], vals[q]);
                let mut v: Vec<f64> = rays[q].v.iter().zip(&rays[p].v).map(|(rq, rp)| vp * rq - vq * rp).collect();
                normalize(&mut v);
                next.push(Ray { v, zero: common | bit });
            }
        }
        rays = next;
    }
    let mut out = VertexSet::default();
    for r in &rays {
        let t = r.v[d];
        if t > EPS {
            out.vertices.push(r.v[..d].iter().map(|x| x / t).collect());
        } else {
            let mut v = r.v[..d].to_vec();
            normalize(&mut v);
            if norm_inf(&v) > 0.0 {
                out.rays.push(v);
            }
        }
    }
    out.lines = lines.into_iter().map(|l| l[..d].to_vec()).filter(|l| norm_inf(l) > EPS).collect();
    dedup(&mut out.vertices);
    dedup(&mut out.rays);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square() {
        let a = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let vs = enumerate_vertices(&a, &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(vs.vertices, vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert!(vs.rays.is_empty() && vs.lines.is_empty());
    }

    #[test]
    fn quadrant_and_strip() {
        let vs = enumerate_vertices(&[vec![-1.0, 0.0], vec![0.0, -1.0]], &[0.0, 0.0]).unwrap();
        assert_eq!(vs.vertices, vec![vec![0.0, 0.0]]);
        assert_eq!(vs.rays.len(), 2);
        let strip = enumerate_vertices(&[vec![1.0, 0.0], vec![-1.0, 0.0]], &[1.0, 1.0]).unwrap();
        assert_eq!(strip.lines.len(), 1);
        assert_eq!(strip.vertices.len(), 2);
    }

    #[test]
    fn empty_polyhedron() {
        let vs = enumerate_vertices(&[vec![1.0], vec![-1.0]], &[-1.0, 0.0]).unwrap();
        assert!(vs.is_empty());
    }
}
