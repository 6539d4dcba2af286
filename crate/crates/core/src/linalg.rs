use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivot ratio below which a Cholesky factor is treated as singular.
const SINGULAR_RATIO: f64 = 1e-13;

/// Solve `gram * x = rhs` for symmetric positive (semi)definite `gram`.
pub fn solve_spd(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = Cholesky::new(gram.clone()).ok_or(Error::SingularDesign { ratio: 0.0 })?;
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..l.nrows() {
        let p = l[(i, i)] * l[(i, i)];
        lo = lo.min(p);
        hi = hi.max(p);
    }
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio > SINGULAR_RATIO) {
        return Err(Error::SingularDesign { ratio });
    }
    Ok(chol.solve(rhs))
}

pub fn spd_inverse(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = gram.nrows();
    let chol = Cholesky::new(gram.clone()).ok_or(Error::SingularDesign { ratio: 0.0 })?;
    Ok(chol.solve(&DMatrix::identity(n, n)))
}

/// Ridge statistics `V = lambda I + sum x x^T`, `b = lambda theta0 + sum x y` with
/// `V^{-1}` and `log det V` maintained by rank-one (Sherman-Morrison) updates.
#[derive(Debug, Clone)]
pub struct RidgeState {
    lambda: f64,
    v_inv: DMatrix<f64>,
    gram: DMatrix<f64>,
    b: DVector<f64>,
    log_det: f64,
    n: usize,
    scratch: DVector<f64>,
}

impl RidgeState {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        Self::with_prior(dim, lambda, None)
    }

    /// Ridge shrinking towards `prior` instead of zero.
    pub fn with_prior(dim: usize, lambda: f64, prior: Option<&[f64]>) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("ridge must be positive, got {lambda}")));
        }
        let b = match prior {
            Some(p) if p.len() != dim => {
                return Err(Error::InvalidInput(format!("prior has length {}, expected {dim}", p.len())))
            }
            Some(p) => DVector::from_iterator(dim, p.iter().map(|v| v * lambda)),
            None => DVector::zeros(dim),
        };
        Ok(Self {
            lambda,
            v_inv: DMatrix::identity(dim, dim) / lambda,
            gram: DMatrix::identity(dim, dim) * lambda,
            b,
            log_det: dim as f64 * lambda.ln(),
            n: 0,
            scratch: DVector::zeros(dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn num_samples(&self) -> usize {
        self.n
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn add(&mut self, x: &[f64], y: f64) {
        let xv = DVector::from_column_slice(x);
        self.v_inv.mul_to(&xv, &mut self.scratch);
        let denom = 1.0 + xv.dot(&self.scratch);
        self.v_inv.ger(-1.0 / denom, &self.scratch, &self.scratch, 1.0);
        self.gram.ger(1.0, &xv, &xv, 1.0);
        self.b.axpy(y, &xv, 1.0);
        self.log_det += denom.ln();
        self.n += 1;
    }

    pub fn theta(&self) -> DVector<f64> {
        &self.v_inv * &self.b
    }

    /// `sqrt(x^T V^{-1} x)`
    pub fn width(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let q = (&self.v_inv * &xv).dot(&xv);
        q.max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sherman_morrison_matches_direct() {
        let mut s = RidgeState::new(3, 0.5).unwrap();
        let xs = [[1.0, 0.2, -0.3], [0.0, 1.0, 0.5], [0.3, 0.3, 0.3], [2.0, -1.0, 0.0]];
        let ys = [0.4, -0.1, 0.9, 1.3];
        for (x, y) in xs.iter().zip(ys) {
            s.add(x, y);
        }
        let mut gram = DMatrix::identity(3, 3) * 0.5;
        let mut b = DVector::zeros(3);
        for (x, y) in xs.iter().zip(ys) {
            let v = DVector::from_column_slice(x);
            gram += &v * v.transpose();
            b += v * y;
        }
        let direct = solve_spd(&gram, &b).unwrap();
        assert!((s.theta() - direct).norm() < 1e-12);
        assert!((s.log_det() - gram.determinant().ln()).abs() < 1e-12);
        assert!((s.gram() - gram).norm() < 1e-12);
    }

    #[test]
    fn singular_is_reported() {
        let mut gram = DMatrix::zeros(2, 2);
        gram[(0, 0)] = 1.0;
        let rhs = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(solve_spd(&gram, &rhs), Err(Error::SingularDesign { .. })));
    }
}
