//! Shared helpers for the integration tests.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

use dfc_core::set_core::SetExpr;

/// Seeded configuration without failure persistence.
pub fn config(cases: u32, seed: u64) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(seed), failure_persistence: None, ..Config::default() }
}

/// Unit vector strategy in `R^n`.
pub fn direction(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        .prop_map(|v| {
            let m = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / m).collect()
        })
}

/// Bounded H-polytope in `R^n` containing the box `[-r, r]^n`: the cube
/// `[-R, R]^n` cut by `extra` random halfspaces `a·x ≤ 1`, `‖a‖∞ ≤ 1/(n r)`.
pub fn polytope(n: usize, extra: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), extra), 1.0f64..3.0).prop_map(move |(rows, big)| {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            a.push(e.clone());
            b.push(big);
            e[j] = -1.0;
            a.push(e);
            b.push(big);
        }
        for r in rows {
            a.push(r.iter().map(|v| v * 2.0).collect());
            b.push(1.0);
        }
        (a, b)
    })
}

pub fn hpoly(a: Vec<Vec<f64>>, b: Vec<f64>) -> SetExpr {
    SetExpr::HPolyhedron { a, b }
}

/// `max c·v` over a vertex list.
pub fn scan(vertices: &[Vec<f64>], c: &[f64]) -> f64 {
    vertices.iter().map(|v| v.iter().zip(c).map(|(a, b)| a * b).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max)
}

/// Brute-force vertices of `{x : Ax ≤ b}` by solving every `n`-subset of rows
/// with Gaussian elimination.
pub fn brute_vertices(a: &[Vec<f64>], b: &[f64]) -> Vec<Vec<f64>> {
    let n = a[0].len();
    let m = a.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = gauss(&idx.iter().map(|&i| a[i].clone()).collect::<Vec<_>>(), &idx.iter().map(|&i| b[i]).collect::<Vec<_>>()) {
            let feasible = a.iter().zip(b).all(|(r, bi)| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= bi + 1e-9);
            if feasible && !out.iter().any(|v| v.iter().zip(&x).all(|(p, q)| (p - q).abs() < 1e-8)) {
                out.push(x);
            }
        }
        let mut p = n;
        while p > 0 && idx[p - 1] == m - n + p - 1 {
            p -= 1;
        }
        if p == 0 {
            return out;
        }
        idx[p - 1] += 1;
        for q in p..n {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

fn gauss(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut m: Vec<Vec<f64>> = rows.iter().zip(rhs).map(|(r, b)| {
        let mut r = r.clone();
        r.push(*b);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}
