//! Small dense vector helpers over `&[f64]`, with `nalgebra` for factorizations.

use nalgebra::DMatrix;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s·b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn unit(n: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[j] = 1.0;
    e
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

pub fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

pub fn to_dmatrix(rows: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// Numerical rank from singular values relative to the largest one.
pub fn rank(rows: &[Vec<f64>], ncols: usize, tol: f64) -> usize {
    if rows.is_empty() || ncols == 0 {
        return 0;
    }
    let m = to_dmatrix(rows, ncols);
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tol * smax.max(1.0)).count()
}

/// Solves the square system `M x = r`; `None` when singular.
pub fn solve(rows: &[Vec<f64>], r: &[f64]) -> Option<Vec<f64>> {
    let n = rows.len();
    let m = to_dmatrix(rows, n);
    let lu = m.lu();
    let rhs = nalgebra::DVector::from_column_slice(r);
    let x = lu.solve(&rhs)?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x.iter().cloned().collect())
    } else {
        None
    }
}

/// Maximum deviation of `VᵀV` from the identity.
pub fn orthonormality_defect(v: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in v.iter().enumerate() {
        for (j, b) in v.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(a, b) - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_dependent_rows() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert_eq!(rank(&rows, 2, 1e-10), 1);
    }

    #[test]
    fn solve_small_system() {
        let rows = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve(&rows, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }
}
