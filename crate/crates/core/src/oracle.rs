//! Ground-truth solvers for small instances: exhaustive search over the
//! codebook lattice and the exact ridge estimator.

use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use rayon::prelude::*;

use crate::codebook::Codebook;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{cst, Real};

/// Largest number of configurations [`enumerate_min`] will visit.
pub const ENUMERATION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimizer<T> {
    pub w_hat: Vec<T>,
    pub energy: T,
}

/// Global minimizer of `½‖y − Xd‖² + (λ/2)‖d‖²` over `d ∈ Ωᴺ`.
///
/// Configurations are visited as a mixed-radix counter with coordinate 0
/// most significant, so among equal energies the lexicographically first
/// level-index vector wins. The leading coordinate is split across threads
/// and the partial results are reduced in index order.
pub fn enumerate_min<T: Real>(d: &Dataset<T>, cb: &Codebook<T>, lambda: T) -> Result<Minimizer<T>> {
    let n = d.n();
    let k = cb.levels().len();
    let size = (k as f64).powi(n as i32);
    if size > ENUMERATION_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    let levels = cb.levels();
    // Column j of X, contiguous.
    let cols: Vec<Vec<T>> = (0..n).map(|j| (0..d.m()).map(|mu| d.x.get(mu, j)).collect()).collect();
    let best = (0..k)
        .into_par_iter()
        .map(|lead| search_branch(lead, levels, &cols, &d.y, lambda))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(None::<(T, Vec<usize>)>, |acc, cand| match acc {
            Some(a) if a.0 <= cand.0 => Some(a),
            _ => Some(cand),
        })
        .expect("codebook has at least two levels");
    Ok(Minimizer {
        w_hat: best.1.iter().map(|&i| levels[i]).collect(),
        energy: best.0,
    })
}

/// Exhausts all configurations with `idx[0] = lead`, updating the residual
/// `y − Xd` one coordinate change at a time.
fn search_branch<T: Real>(lead: usize, levels: &[T], cols: &[Vec<T>], y: &[T], lambda: T) -> (T, Vec<usize>) {
    let n = cols.len();
    let k = levels.len();
    let half = cst::<T>(0.5);
    let mut idx = vec![0usize; n];
    idx[0] = lead;
    let mut resid: Vec<T> = y.to_vec();
    let mut norm = T::zero();
    for (j, &i) in idx.iter().enumerate() {
        let w = levels[i];
        norm = norm + w * w;
        for (r, &x) in resid.iter_mut().zip(&cols[j]) {
            *r = *r - x * w;
        }
    }
    let energy = |resid: &[T], norm: T| half * resid.iter().map(|&r| r * r).sum::<T>() + half * lambda * norm;
    let mut best = (energy(&resid, norm), idx.clone());
    if n == 1 {
        return best;
    }
    loop {
        // Advance the counter over coordinates 1..n, least significant last.
        let mut j = n - 1;
        loop {
            let old = levels[idx[j]];
            idx[j] = (idx[j] + 1) % k;
            let new = levels[idx[j]];
            let delta = new - old;
            norm = norm + new * new - old * old;
            for (r, &x) in resid.iter_mut().zip(&cols[j]) {
                *r = *r - x * delta;
            }
            if idx[j] != 0 {
                break;
            }
            if j == 1 {
                return best;
            }
            j -= 1;
        }
        let e = energy(&resid, norm);
        if e < best.0 {
            best = (e, idx.clone());
        }
    }
}

/// Solves `(XᵀX + λI) w = Xᵀy` by Cholesky factorization.
pub fn ridge_exact<T: Real + nalgebra::RealField>(d: &Dataset<T>, lambda: T) -> Result<Vec<T>> {
    let (m, n) = (d.m(), d.n());
    let x = DMatrix::from_row_slice(m, n, d.x.as_slice());
    let y = DVector::from_column_slice(&d.y);
    let mut gram = x.transpose() * &x;
    for i in 0..n {
        gram[(i, i)] += lambda;
    }
    let rhs = x.transpose() * y;
    let scale = (0..n).map(|i| gram[(i, i)]).fold(T::zero(), |a, b| Float::max(a, b));
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("XᵀX + {lambda}·I is not positive definite")))?;
    // Rank deficiency can survive factorization as round-off sized pivots.
    let floor = scale * cst::<T>(n as f64) * T::epsilon();
    if (0..n).any(|i| Float::powi(chol.l_dirty()[(i, i)], 2) <= floor) {
        return Err(Error::Singular(format!("XᵀX + {lambda}·I is numerically rank deficient")));
    }
    Ok(chol.solve(&rhs).iter().copied().collect())
}
