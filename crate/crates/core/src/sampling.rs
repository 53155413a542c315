//! Seeded direction and point sampling.
//!
//! Low dimensions (n ≤ 3) use Fibonacci-sphere layouts with a seeded offset;
//! higher dimensions use normalized Gaussian vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count` unit directions in `R^n`.
pub fn directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    match n {
        0 => vec![Vec::new(); count],
        1 => (0..count).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => {
            let offset: f64 = r.random::<f64>();
            (0..count)
                .map(|i| {
                    let a = std::f64::consts::TAU * (i as f64 + offset) / count.max(1) as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()
        }
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let offset: f64 = r.random::<f64>() * std::f64::consts::TAU;
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count.max(1) as f64;
                    let rad = (1.0 - z * z).max(0.0).sqrt();
                    let a = golden * i as f64 + offset;
                    vec![rad * a.cos(), rad * a.sin(), z]
                })
                .collect()
        }
        _ => (0..count).map(|_| gaussian_direction(&mut r, n)).collect(),
    }
}

pub fn gaussian_direction<R: Rng>(r: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(r)).collect();
        if let Some(u) = linalg::normalized(&v) {
            return u;
        }
    }
}

pub fn uniform_box<R: Rng>(r: &mut R, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(l, h)| l + (h - l) * r.random::<f64>())
        .collect()
}

/// Uniform point of the standard simplex in `R^k`.
pub fn simplex_point<R: Rng>(r: &mut R, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_unit_and_seeded() {
        for n in 1..6 {
            let a = directions(n, 17, 3);
            let b = directions(n, 17, 3);
            assert_eq!(a, b);
            for d in &a {
                assert!((linalg::norm(d) - 1.0).abs() < 1e-12);
            }
        }
    }
}
