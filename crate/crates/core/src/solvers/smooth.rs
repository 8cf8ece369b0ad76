//! Spatially smoothed per-pixel fields.
//!
//! Solves `(diag(d) + λ LᵀL) x = b` where `L` stacks forward differences
//! along image rows and columns. The last difference in each direction is
//! zero (replicate boundary), so `LᵀL` is the 4-neighbour graph Laplacian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::Grid;

const CG_TOL: f64 = 1e-11;

/// `‖H_h x‖² + ‖H_v x‖²` for a single map `x` laid out on `grid`.
pub fn gradient_energy(x: &[f64], grid: Grid) -> f64 {
    let mut e = 0.0;
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let v = x[grid.index(r, c)];
            if c + 1 < grid.cols {
                let d = x[grid.index(r, c + 1)] - v;
                e += d * d;
            }
            if r + 1 < grid.rows {
                let d = x[grid.index(r + 1, c)] - v;
                e += d * d;
            }
        }
    }
    e
}

/// `out = LᵀL x`.
pub fn apply_laplacian(x: &[f64], grid: Grid, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let i = grid.index(r, c);
            if c + 1 < grid.cols {
                let j = grid.index(r, c + 1);
                let d = x[j] - x[i];
                out[j] += d;
                out[i] -= d;
            }
            if r + 1 < grid.rows {
                let j = grid.index(r + 1, c);
                let d = x[j] - x[i];
                out[j] += d;
                out[i] -= d;
            }
        }
    }
}

fn degree(n: usize, grid: Grid) -> f64 {
    let (r, c) = grid.coords(n);
    let mut d = 0.0;
    if r > 0 {
        d += 1.0;
    }
    if r + 1 < grid.rows {
        d += 1.0;
    }
    if c > 0 {
        d += 1.0;
    }
    if c + 1 < grid.cols {
        d += 1.0;
    }
    d
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradient for one map.
fn solve_row(data_coef: &[f64], rhs: &[f64], lambda: f64, grid: Grid) -> Result<Vec<f64>> {
    let n = rhs.len();
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        apply_laplacian(x, grid, out);
        for i in 0..n {
            out[i] = data_coef[i] * x[i] + lambda * out[i];
        }
    };
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| 1.0 / (data_coef[i] + lambda * degree(i, grid)))
        .collect();

    let mut x: Vec<f64> = (0..n).map(|i| rhs[i] * inv_diag[i]).collect();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = (0..n).map(|i| rhs[i] - ax[i]).collect();
    let mut z: Vec<f64> = (0..n).map(|i| r[i] * inv_diag[i]).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for _ in 0..10 * n {
        if dot(&r, &r).sqrt() <= CG_TOL * b_norm {
            break;
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::Numerical("CG stagnation: operator not SPD".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    // recompute the true residual; the recurrence can drift
    apply(&x, &mut ax);
    let res = (0..n).map(|i| (rhs[i] - ax[i]).powi(2)).sum::<f64>().sqrt();
    if res > 1e-8 * b_norm {
        return Err(Error::Numerical(format!(
            "CG stagnation: relative residual {:.3e} after {} iterations",
            res / b_norm,
            10 * n
        )));
    }
    Ok(x)
}

/// Solves `(diag(data_coef) + lambda_ratio · LᵀL) x_k = rhs_k` for every row
/// `k` of `rhs` (`P × N`).
pub fn solve_smoothed_field(
    data_coef: &DVector<f64>,
    rhs: &DMatrix<f64>,
    lambda_ratio: f64,
    grid: Grid,
) -> Result<DMatrix<f64>> {
    let n = grid.len();
    if data_coef.len() != n || rhs.ncols() != n {
        return Err(Error::Shape(format!(
            "grid has {n} pixels, data_coef {} and rhs {} columns",
            data_coef.len(),
            rhs.ncols()
        )));
    }
    if data_coef.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::InvalidInput("data coefficients must be positive".into()));
    }
    if !(lambda_ratio >= 0.0) || !lambda_ratio.is_finite() {
        return Err(Error::InvalidInput("lambda_ratio must be nonnegative".into()));
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("rhs has non-finite entries".into()));
    }
    if lambda_ratio == 0.0 {
        return Ok(DMatrix::from_fn(rhs.nrows(), n, |k, i| rhs[(k, i)] / data_coef[i]));
    }
    let coef = data_coef.as_slice();
    let rows: Vec<Vec<f64>> = (0..rhs.nrows())
        .into_par_iter()
        .map(|k| {
            let b: Vec<f64> = rhs.row(k).iter().copied().collect();
            solve_row(coef, &b, lambda_ratio, grid)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(rhs.nrows(), n, |k, i| rows[k][i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense `LᵀL` assembled from explicit difference rows.
    fn dense_laplacian(grid: Grid) -> DMatrix<f64> {
        let n = grid.len();
        let mut diffs: Vec<DVector<f64>> = Vec::new();
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                if c + 1 < grid.cols {
                    let mut d = DVector::zeros(n);
                    d[grid.index(r, c + 1)] = 1.0;
                    d[grid.index(r, c)] = -1.0;
                    diffs.push(d);
                }
                if r + 1 < grid.rows {
                    let mut d = DVector::zeros(n);
                    d[grid.index(r + 1, c)] = 1.0;
                    d[grid.index(r, c)] = -1.0;
                    diffs.push(d);
                }
            }
        }
        let l = DMatrix::from_columns(&diffs).transpose();
        l.tr_mul(&l)
    }

    #[test]
    fn zero_lambda_is_diagonal_solve() {
        let grid = Grid::new(2, 3);
        let d = DVector::from_vec(vec![1.0, 2.0, 4.0, 0.5, 1.0, 8.0]);
        let rhs = DMatrix::from_row_slice(1, 6, &[1.0, 1.0, 1.0, 1.0, 2.0, 4.0]);
        let x = solve_smoothed_field(&d, &rhs, 0.0, grid).unwrap();
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.5, 0.25, 2.0, 2.0, 0.5]);
    }

    #[test]
    fn constant_field_stays_constant() {
        let grid = Grid::new(5, 4);
        let d = DVector::from_element(20, 3.0);
        let rhs = DMatrix::from_element(2, 20, 1.5);
        let x = solve_smoothed_field(&d, &rhs, 7.0, grid).unwrap();
        for v in x.iter() {
            assert!((v - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_dense_direct_solve() {
        let grid = Grid::new(4, 4);
        let lap = dense_laplacian(grid);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let d = DVector::from_fn(16, |_, _| 0.1 + rng.random::<f64>());
            let rhs = DMatrix::from_fn(1, 16, |_, _| rng.random::<f64>() * 2.0 - 0.5);
            let lambda = rng.random::<f64>() * 5.0;
            let x = solve_smoothed_field(&d, &rhs, lambda, grid).unwrap();
            let a = DMatrix::from_diagonal(&d) + &lap * lambda;
            let direct = a.clone().lu().solve(&rhs.row(0).transpose()).unwrap();
            let got = x.row(0).transpose();
            assert!((&got - &direct).norm() <= 1e-8 * direct.norm());
            assert!((&a * &got - rhs.row(0).transpose()).norm() <= 1e-8 * rhs.norm());
        }
    }

    #[test]
    fn laplacian_matches_gradient_energy() {
        let grid = Grid::new(3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..15).map(|_| rng.random()).collect();
        let mut lx = vec![0.0; 15];
        apply_laplacian(&x, grid, &mut lx);
        assert!((dot(&x, &lx) - gradient_energy(&x, grid)).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_coefficients() {
        let grid = Grid::new(1, 2);
        let d = DVector::from_vec(vec![1.0, 0.0]);
        assert!(solve_smoothed_field(&d, &DMatrix::zeros(1, 2), 1.0, grid).is_err());
    }
}
