//! Reference unmixers (FCLS, SCLS) and VCA endmember extraction.

mod vca;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::Result;
use crate::solvers::{simplex_qp, solve_nnls};
use crate::types::{AbundanceMatrix, Domain, EndmemberSet, HsiCube};

pub use vca::extract_vca;

/// Fully constrained least squares for every pixel against a fixed `M0`.
pub fn unmix_fcls(cube: &HsiCube, m0: &EndmemberSet) -> Result<AbundanceMatrix> {
    check_bands(cube, m0)?;
    let g = m0.data();
    let mut h = g.tr_mul(g);
    if h.clone().cholesky().is_none() {
        for i in 0..h.nrows() {
            h[(i, i)] += 1e-10;
        }
    }
    let cols: Vec<DVector<f64>> = (0..cube.pixels())
        .into_par_iter()
        .map(|n| simplex_qp(&h, &g.tr_mul(&cube.data().column(n))))
        .collect::<Result<_>>()?;
    AbundanceMatrix::new(DMatrix::from_columns(&cols), Domain::Original)
}

/// Scaled constrained least squares: `y_n ≈ ψ_n M0 a_n` with one scale per
/// pixel. Fits `b ≥ 0` and normalizes `a = b / 1ᵀb`, `ψ = 1ᵀb`.
pub fn unmix_scls(cube: &HsiCube, m0: &EndmemberSet) -> Result<(AbundanceMatrix, DVector<f64>)> {
    check_bands(cube, m0)?;
    let p = m0.endmembers();
    let fits: Vec<(DVector<f64>, f64)> = (0..cube.pixels())
        .into_par_iter()
        .map(|n| {
            let b = solve_nnls(m0.data(), &cube.data().column(n).into_owned())?;
            let s: f64 = b.iter().sum();
            Ok(if s > 0.0 {
                (b / s, s)
            } else {
                (DVector::from_element(p, 1.0 / p as f64), 0.0)
            })
        })
        .collect::<Result<_>>()?;
    let a = DMatrix::from_fn(p, cube.pixels(), |k, n| fits[n].0[k]);
    let psi = DVector::from_fn(cube.pixels(), |n, _| fits[n].1);
    Ok((AbundanceMatrix::new(a, Domain::Original)?, psi))
}

fn check_bands(cube: &HsiCube, m0: &EndmemberSet) -> Result<()> {
    if cube.bands() != m0.bands() {
        return Err(crate::Error::Shape(format!(
            "cube has {} bands, endmembers have {}",
            cube.bands(),
            m0.bands()
        )));
    }
    Ok(())
}
