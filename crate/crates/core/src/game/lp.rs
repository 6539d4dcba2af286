//! Dense primal simplex for `max c·x  s.t.  A x ≤ b, x ≥ 0` with `b ≥ 0`.
//!
//! The slack basis is feasible from the start, so one phase suffices. Bland's
//! rule (lowest index entering and leaving) rules out cycling.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Optimal dual values `y ≥ 0` of the `≤` rows: `Aᵀy ≥ c`, `b·y = objective`.
    pub duals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Unbounded,
}

/// `a` is row-major, `rows × cols`.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpOutcome> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("inconsistent LP dimensions".into()));
    }
    if b.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidInput("right-hand side must be >= 0".into()));
    }
    let scale = a
        .iter()
        .flatten()
        .chain(c)
        .chain(b)
        .fold(1.0f64, |s, v| s.max(v.abs()));
    let eps = 1e-11 * scale;

    // tableau: m rows of [A | I | b]; objective row holds reduced costs c_j - z_j
    let width = n + m;
    let mut t: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
            r.push(b[i]);
            r
        })
        .collect();
    let mut obj: Vec<f64> = c.iter().copied().chain(std::iter::repeat(0.0).take(m)).collect();
    obj.push(0.0); // -objective
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        let Some(enter) = (0..width).find(|&j| obj[j] > eps) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let aij = t[i][enter];
            if aij > eps {
                let ratio = t[i][width] / aij;
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best - eps || (ratio <= best + eps && basis[i] < basis[l]),
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return Ok(LpOutcome::Unbounded);
        };
        let piv = t[r][enter];
        t[r].iter_mut().for_each(|v| *v /= piv);
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r {
                let f = row[enter];
                if f != 0.0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
        let f = obj[enter];
        obj.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
        basis[r] = enter;
    }

    let mut x = vec![0.0; n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = t[i][width];
        }
    }
    let duals = (0..m).map(|k| (-obj[n + k]).max(0.0)).collect();
    let objective = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpOutcome::Optimal(LpSolution { x, objective, duals }))
}
