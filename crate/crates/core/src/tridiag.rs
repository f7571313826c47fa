//! Thomas algorithm for tridiagonal systems.

/// Solves `A x = d` for tridiagonal `A` with sub-diagonal `a` (`a[0]` unused),
/// diagonal `b` and super-diagonal `c` (`c[n-1]` unused).
///
/// No pivoting; intended for diagonally dominant systems.
pub fn thomas_solve(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = d.len();
    assert!(n > 0, "empty system");
    assert!(a.len() == n && b.len() == n && c.len() == n, "band length mismatch");
    let mut cp = vec![0.0; n];
    let mut x = vec![0.0; n];
    cp[0] = c[0] / b[0];
    x[0] = d[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        x[i] = (d[i] - a[i] * x[i - 1]) / den;
    }
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    x
}

/// Pre-factored constant tridiagonal matrix with diagonal `diag` and both
/// off-diagonals equal to `off`; repeated solves reuse the forward-sweep
/// coefficients.
#[derive(Debug, Clone)]
pub struct SymmetricToeplitzTridiag {
    off: f64,
    cp: Vec<f64>,
    inv_den: Vec<f64>,
}

impl SymmetricToeplitzTridiag {
    pub fn new(n: usize, diag: f64, off: f64) -> Self {
        assert!(n > 0, "empty system");
        let mut cp = vec![0.0; n];
        let mut inv_den = vec![0.0; n];
        inv_den[0] = 1.0 / diag;
        cp[0] = off * inv_den[0];
        for i in 1..n {
            let den = diag - off * cp[i - 1];
            inv_den[i] = 1.0 / den;
            cp[i] = off * inv_den[i];
        }
        Self { off, cp, inv_den }
    }

    pub fn len(&self) -> usize {
        self.cp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cp.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.cp.len();
        assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_den[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) * self.inv_den[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.cp[i] * rhs[i + 1];
        }
    }
}


#[cfg(test)]
mod tests {
    use super::oracle::dense_solve;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(a: &[f64], b: &[f64], c: &[f64]) -> Vec<Vec<f64>> {
        let n = b.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = b[i];
            if i > 0 {
                m[i][i - 1] = a[i];
            }
            if i + 1 < n {
                m[i][i + 1] = c[i];
            }
        }
        m
    }

    #[test]
    fn laplacian_system() {
        let a = vec![0.0, -1.0, -1.0, -1.0];
        let b = vec![2.0; 4];
        let c = vec![-1.0, -1.0, -1.0, 0.0];
        let x = thomas_solve(&a, &b, &c, &[1.0, 0.0, 0.0, 1.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn random_systems_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(1..=64);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| 2.5 + rng.random_range(0.0..1.0)).collect();
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x = thomas_solve(&a, &b, &c, &d);
            let y = dense_solve(dense(&a, &b, &c), d.clone());
            let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for (u, v) in x.iter().zip(&y) {
                assert!((u - v).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn prefactored_matches_general() {
        let n = 37;
        let (diag, off) = (1.0 + 2.0 * 0.3, -0.3);
        let lu = SymmetricToeplitzTridiag::new(n, diag, off);
        let d: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut x = d.clone();
        lu.solve_in_place(&mut x);
        let y = thomas_solve(&vec![off; n], &vec![diag; n], &vec![off; n], &d);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-14);
        }
    }
}
