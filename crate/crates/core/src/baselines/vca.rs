//! Vertex Component Analysis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::types::{EndmemberSet, HsiCube};

/// Leading `d` eigenvectors of a symmetric matrix, by decreasing eigenvalue.
/// The first `rank` of them must carry nonzero variance.
fn leading_eigvecs(c: DMatrix<f64>, d: usize, rank: usize) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    if rank > 0 && eig.eigenvalues[order[rank - 1]] <= 1e-12 * top {
        return Err(Error::Numerical(format!(
            "data rank is below {rank} after projection"
        )));
    }
    let cols: Vec<DVector<f64>> = order[..d]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    Ok(DMatrix::from_columns(&cols))
}

/// Extracts `p` endmembers as observed pixels of `cube`.
///
/// Subspace choice (projective vs. orthogonal projection) follows the
/// estimated SNR against the `15 + 10 log10(p)` dB threshold. The returned
/// signatures are the selected pixels, clamped at zero.
pub fn extract_vca(cube: &HsiCube, p: usize, seed: u64) -> Result<EndmemberSet> {
    let r = cube.data();
    let (l, n) = r.shape();
    if p == 0 || p > l.min(n) {
        return Err(Error::InvalidInput(format!(
            "cannot extract {p} endmembers from {l} bands and {n} pixels"
        )));
    }
    let nf = n as f64;

    let indices = if p == 1 {
        let u = leading_eigvecs(r * r.transpose() / nf, 1, 1)?;
        let proj = u.tr_mul(r);
        let mut best = 0;
        for j in 1..n {
            if proj[j].abs() > proj[best].abs() {
                best = j;
            }
        }
        vec![best]
    } else {
        let mean = r.column_mean();
        let centered = DMatrix::from_fn(l, n, |i, j| r[(i, j)] - mean[i]);
        let ud = leading_eigvecs(&centered * centered.transpose() / nf, p, p - 1)?;
        let xp = ud.tr_mul(&centered);

        let py = r.norm_squared() / nf;
        let px = xp.norm_squared() / nf + mean.norm_squared();
        let snr = if py - px <= 0.0 {
            f64::INFINITY
        } else {
            10.0 * ((px - p as f64 / l as f64 * py) / (py - px)).log10()
        };
        let threshold = 15.0 + 10.0 * (p as f64).log10();

        let y = if snr.is_nan() || snr < threshold {
            let x = xp.rows(0, p - 1).into_owned();
            let c = x
                .column_iter()
                .map(|col| col.norm())
                .fold(0.0f64, f64::max);
            let mut y = DMatrix::from_element(p, n, c);
            y.rows_mut(0, p - 1).copy_from(&x);
            y
        } else {
            let ud = leading_eigvecs(r * r.transpose() / nf, p, p)?;
            let xp = ud.tr_mul(r);
            let u = xp.column_mean();
            let mut y = xp.clone();
            for (j, mut col) in y.column_iter_mut().enumerate() {
                let s = xp.column(j).dot(&u);
                if s == 0.0 {
                    return Err(Error::Numerical("degenerate projective projection".into()));
                }
                col /= s;
            }
            y
        };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::zeros(p, p);
        a[(p - 1, 0)] = 1.0;
        let mut indices = Vec::with_capacity(p);
        for i in 0..p {
            let w = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
            let pinv = a
                .clone()
                .pseudo_inverse(1e-12)
                .map_err(|e| Error::Numerical(e.to_string()))?;
            let f = &w - &a * (pinv * &w);
            let fnorm = f.norm();
            if fnorm == 0.0 {
                return Err(Error::Numerical("VCA direction collapsed".into()));
            }
            let v = f.tr_mul(&y) / fnorm;
            let mut best = 0;
            for j in 1..n {
                if v[j].abs() > v[best].abs() {
                    best = j;
                }
            }
            indices.push(best);
            a.set_column(i, &y.column(best));
        }
        indices
    };

    let mut m = DMatrix::zeros(l, p);
    for (k, &j) in indices.iter().enumerate() {
        m.set_column(k, &r.column(j).map(|v| v.max(0.0)));
    }
    EndmemberSet::new(m)
}
