//! Master LP for the cutting-plane loop.
//!
//! The primal `max c·z s.t. aᵢ·z ≤ bᵢ` is solved through its dual
//! `min Σ bᵢλᵢ s.t. Σ λᵢaᵢ = c, λ ≥ 0` with a revised primal simplex. Every
//! primal row is a dual column, so adding a cut never destroys dual feasibility
//! and the previous basis is a warm start. Box rows `±z_j ≤ R` give an
//! immediately feasible starting basis. The simplex multipliers of the dual
//! basis are the primal point.

use nalgebra::DMatrix;

use crate::linalg::dot;

const PRICE_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-9;
/// Minimal reduced-cost violation of a dual ray accepted as infeasibility.
const INFEASIBLE_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 40;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct CutLp {
    n: usize,
    c: Vec<f64>,
    cols: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    artificial: Vec<bool>,
    is_basic: Vec<bool>,
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    lam: Vec<f64>,
    z: Vec<f64>,
    since_refactor: usize,
}

impl CutLp {
    /// Box rows use the variable bounds, clipped to `[-radius, radius]`; clipped
    /// sides are flagged artificial.
    pub fn new(c: &[f64], lb: &[f64], ub: &[f64], radius: f64) -> Self {
        let n = c.len();
        let mut lp = CutLp {
            n,
            c: c.to_vec(),
            cols: Vec::new(),
            rhs: Vec::new(),
            artificial: Vec::new(),
            is_basic: Vec::new(),
            basis: Vec::with_capacity(n),
            binv: Vec::new(),
            lam: Vec::new(),
            z: vec![0.0; n],
            since_refactor: 0,
        };
        for j in 0..n {
            let (u, ua) = if ub[j] < radius { (ub[j], false) } else { (radius, true) };
            let (l, la) = if lb[j] > -radius { (lb[j], false) } else { (-radius, true) };
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            lp.push_col(e.clone(), u, ua);
            e[j] = -1.0;
            lp.push_col(e, -l, la);
        }
        for j in 0..n {
            let col = if c[j] >= 0.0 { 2 * j } else { 2 * j + 1 };
            lp.basis.push(col);
            lp.is_basic[col] = true;
        }
        lp.refactor();
        lp
    }

    fn push_col(&mut self, a: Vec<f64>, b: f64, artificial: bool) {
        self.cols.push(a);
        self.rhs.push(b);
        self.artificial.push(artificial);
        self.is_basic.push(false);
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row_count(&self) -> usize {
        self.cols.len()
    }

    /// Adds `a·z ≤ b`. Zero rows are kept only when they make the LP infeasible.
    pub fn add_le(&mut self, a: &[f64], b: f64) {
        let nrm = dot(a, a).sqrt();
        if nrm < 1e-14 {
            if b < -1e-12 {
                // 0 ≤ b < 0: encode as an impossible pair of rows.
                let mut e = vec![0.0; self.n];
                if self.n > 0 {
                    e[0] = 1.0;
                    self.push_col(e.clone(), -1.0, false);
                    e[0] = -1.0;
                    self.push_col(e, -1.0, false);
                }
            }
            return;
        }
        self.push_col(a.iter().map(|v| v / nrm).collect(), b / nrm, false);
    }

    pub fn add_eq(&mut self, a: &[f64], b: f64) {
        self.add_le(a, b);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        self.add_le(&neg, -b);
    }

    pub fn point(&self) -> &[f64] {
        &self.z
    }

    pub fn value(&self) -> f64 {
        dot(&self.c, &self.z)
    }

    /// True when an artificial box row carries positive dual weight.
    pub fn box_active(&self) -> bool {
        self.basis
            .iter()
            .zip(&self.lam)
            .any(|(&col, &l)| self.artificial[col] && l > 1e-9)
    }

    fn refactor(&mut self) {
        let n = self.n;
        self.since_refactor = 0;
        if n == 0 {
            self.binv.clear();
            self.lam.clear();
            return;
        }
        let b = DMatrix::from_fn(n, n, |i, k| self.cols[self.basis[k]][i]);
        match b.try_inverse() {
            Some(inv) => {
                self.binv = (0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect();
            }
            None => {
                // Fall back to the starting box basis.
                for &col in &self.basis {
                    self.is_basic[col] = false;
                }
                self.basis.clear();
                for j in 0..n {
                    let col = if self.c[j] >= 0.0 { 2 * j } else { 2 * j + 1 };
                    self.basis.push(col);
                    self.is_basic[col] = true;
                }
                let inv = DMatrix::from_fn(n, n, |i, k| self.cols[self.basis[k]][i])
                    .try_inverse()
                    .expect("box basis is invertible");
                self.binv = (0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect();
            }
        }
        self.lam = self.binv.iter().map(|row| dot(row, &self.c).max(0.0)).collect();
        self.update_point();
    }

    fn update_point(&mut self) {
        let n = self.n;
        let mut z = vec![0.0; n];
        for (k, row) in self.binv.iter().enumerate() {
            let bk = self.rhs[self.basis[k]];
            if bk != 0.0 {
                for j in 0..n {
                    z[j] += row[j] * bk;
                }
            }
        }
        self.z = z;
    }

    pub fn solve(&mut self) -> LpStatus {
        let n = self.n;
        if n == 0 {
            return if self.rhs.iter().all(|b| *b >= -1e-12) {
                LpStatus::Optimal
            } else {
                LpStatus::Infeasible
            };
        }
        self.refactor();
        let mut degenerate_run = 0usize;
        // Columns whose only certificate of infeasibility is a numerically
        // negligible reduced cost are skipped until the next pivot.
        let mut skip = vec![false; self.cols.len()];
        for _ in 0..MAX_PIVOTS {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let bland = degenerate_run > 30;
            let mut enter = None;
            let mut best = -PRICE_TOL;
            for (i, a) in self.cols.iter().enumerate() {
                if self.is_basic[i] || skip[i] {
                    continue;
                }
                let d = self.rhs[i] - dot(a, &self.z);
                let thresh = -PRICE_TOL * (1.0 + self.rhs[i].abs());
                if d < thresh {
                    if bland {
                        enter = Some(i);
                        break;
                    }
                    if d < best {
                        best = d;
                        enter = Some(i);
                    }
                }
            }
            let Some(e) = enter else {
                return LpStatus::Optimal;
            };
            let a = &self.cols[e];
            let delta: Vec<f64> = self.binv.iter().map(|row| dot(row, a)).collect();
            let mut leave: Option<usize> = None;
            let mut theta = f64::INFINITY;
            for k in 0..n {
                if delta[k] > PIVOT_TOL {
                    let r = self.lam[k] / delta[k];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            r < theta - 1e-13
                                || (r <= theta + 1e-13
                                    && (if bland {
                                        self.basis[k] < self.basis[l]
                                    } else {
                                        delta[k] > delta[l]
                                    }))
                        }
                    };
                    if better {
                        theta = r.min(theta);
                        leave = Some(k);
                    }
                }
            }
            let Some(r) = leave else {
                // Reduced cost along the dual ray, from the basis directly so
                // that an opposite pair of rows cancels exactly.
                let reduced = self.rhs[e] - (0..n).map(|k| self.rhs[self.basis[k]] * delta[k]).sum::<f64>();
                if reduced < -INFEASIBLE_TOL * (1.0 + self.rhs[e].abs()) {
                    if self.since_refactor == 0 {
                        return LpStatus::Infeasible;
                    }
                    // Confirm the dual ray on a fresh factorization.
                    self.refactor();
                    continue;
                }
                skip[e] = true;
                continue;
            };
            skip.iter_mut().for_each(|v| *v = false);
            if theta < 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(e, r, &delta, theta);
        }
        LpStatus::Stalled
    }

    fn pivot(&mut self, e: usize, r: usize, delta: &[f64], theta: f64) {
        let n = self.n;
        for k in 0..n {
            self.lam[k] = (self.lam[k] - theta * delta[k]).max(0.0);
        }
        self.lam[r] = theta;
        let pr = delta[r];
        let row_r: Vec<f64> = self.binv[r].iter().map(|v| v / pr).collect();
        for k in 0..n {
            if k == r || delta[k] == 0.0 {
                continue;
            }
            let f = delta[k];
            for j in 0..n {
                self.binv[k][j] -= f * row_r[j];
            }
        }
        self.binv[r] = row_r;
        self.is_basic[self.basis[r]] = false;
        self.basis[r] = e;
        self.is_basic[e] = true;
        self.since_refactor += 1;
        self.update_point();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // max x + y s.t. x + 2y ≤ 4, 3x + y ≤ 6, box [0, 10]
        let mut lp = CutLp::new(&[1.0, 1.0], &[0.0, 0.0], &[10.0, 10.0], 1e3);
        lp.add_le(&[1.0, 2.0], 4.0);
        lp.add_le(&[3.0, 1.0], 6.0);
        assert_eq!(lp.solve(), LpStatus::Optimal);
        assert!((lp.value() - 2.8).abs() < 1e-9);
        assert!(!lp.box_active());
    }

    #[test]
    fn infeasible_lp() {
        let mut lp = CutLp::new(&[1.0], &[-5.0], &[5.0], 1e3);
        lp.add_le(&[1.0], -1.0);
        lp.add_le(&[-1.0], -1.0);
        assert_eq!(lp.solve(), LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction_flags_box() {
        let mut lp = CutLp::new(&[1.0, 0.0], &[f64::NEG_INFINITY; 2], &[f64::INFINITY; 2], 1e3);
        lp.add_le(&[0.0, 1.0], 1.0);
        assert_eq!(lp.solve(), LpStatus::Optimal);
        assert!(lp.box_active());
        assert!((lp.value() - 1e3).abs() < 1e-9);
    }

    #[test]
    fn warm_start_after_cut() {
        let mut lp = CutLp::new(&[1.0, 1.0], &[-1.0, -1.0], &[1.0, 1.0], 1e3);
        assert_eq!(lp.solve(), LpStatus::Optimal);
        assert!((lp.value() - 2.0).abs() < 1e-12);
        lp.add_le(&[1.0, 1.0], 1.0);
        assert_eq!(lp.solve(), LpStatus::Optimal);
        assert!((lp.value() - 1.0).abs() < 1e-12);
        lp.add_eq(&[1.0, -1.0], 0.0);
        assert_eq!(lp.solve(), LpStatus::Optimal);
        assert!((lp.point()[0] - 0.5).abs() < 1e-12);
    }
}
