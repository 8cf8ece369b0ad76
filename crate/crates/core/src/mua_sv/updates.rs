//! Block updates of the alternating solver and their block objectives.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solvers::{project_nonnegative, solve_fcls, solve_shifted_fcls, solve_smoothed_field, SimplexQpProblem};
use crate::superpixel::MultiscaleTransform;
use crate::types::{AbundanceMatrix, Domain, EndmemberField, EndmemberSet, Grid, HsiCube, ScalingField};

use super::MuaSvParams;

/// `M0 · diag(ψ)`.
pub fn scaled_reference(m0: &DMatrix<f64>, psi: &[f64]) -> DMatrix<f64> {
    let mut m = m0.clone();
    for (k, mut col) in m.column_iter_mut().enumerate() {
        col *= psi[k];
    }
    m
}

/// Minimizer of `½‖y − M a‖² + λ/2 ‖M − R‖²` before projection:
/// `(y aᵀ + λ R)(a aᵀ + λ I)⁻¹`, expanded with Sherman–Morrison.
pub fn endmember_unprojected(
    y: &DVector<f64>,
    a: &DVector<f64>,
    reference: &DMatrix<f64>,
    lambda_m: f64,
) -> Result<DMatrix<f64>> {
    let b = y * a.transpose() + reference * lambda_m;
    let aa = a.norm_squared();
    if lambda_m > 0.0 {
        // (aaᵀ + λI)⁻¹ = (I − aaᵀ/(λ + ‖a‖²)) / λ
        let ba = &b * a;
        Ok((b - ba * a.transpose() / (lambda_m + aa)) / lambda_m)
    } else if a.len() == 1 && aa > 0.0 {
        Ok(b / aa)
    } else {
        Err(Error::InvalidInput(
            "lambda_m = 0 leaves the endmember system rank deficient".into(),
        ))
    }
}

pub fn update_endmembers(
    cube: &HsiCube,
    ab: &AbundanceMatrix,
    psi: &ScalingField,
    m0: &EndmemberSet,
    lambda_m: f64,
) -> Result<EndmemberField> {
    let n = cube.pixels();
    if ab.columns() != n || psi.pixels() != n || ab.endmembers() != m0.endmembers() || cube.bands() != m0.bands() {
        return Err(Error::Shape("endmember update inputs disagree".into()));
    }
    let mats: Vec<DMatrix<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let reference = scaled_reference(m0.data(), psi.data().column(j).as_slice());
            let m = endmember_unprojected(
                &cube.data().column(j).into_owned(),
                &ab.data().column(j).into_owned(),
                &reference,
                lambda_m,
            )?;
            Ok(project_nonnegative(&m))
        })
        .collect::<Result<_>>()?;
    EndmemberField::new(mats)
}

/// `Σ_n ½‖y_n − M_n a_n‖² + λ_M/2 ‖M_n − M0 diag ψ_n‖²`.
pub fn endmember_objective(
    cube: &HsiCube,
    field: &EndmemberField,
    ab: &AbundanceMatrix,
    psi: &ScalingField,
    m0: &EndmemberSet,
    lambda_m: f64,
) -> f64 {
    (0..cube.pixels())
        .map(|j| {
            let m = field.get(j);
            let r = cube.data().column(j) - m * ab.data().column(j);
            let d = m - scaled_reference(m0.data(), psi.data().column(j).as_slice());
            0.5 * r.norm_squared() + 0.5 * lambda_m * d.norm_squared()
        })
        .sum()
}

/// Per-superpixel mean endmembers and per-pixel detail components.
#[derive(Debug, Clone)]
pub struct CoarseEndmemberCache {
    labels: Vec<usize>,
    /// `M_C`, one matrix per superpixel.
    pub coarse: Vec<DMatrix<f64>>,
    /// `M_D = M_n − M_{C*}`, one matrix per pixel.
    pub detail: Vec<DMatrix<f64>>,
}

impl CoarseEndmemberCache {
    /// `M_{C*}` of pixel `n`: the mean of its superpixel.
    pub fn coarse_at_pixel(&self, n: usize) -> &DMatrix<f64> {
        &self.coarse[self.labels[n]]
    }
}

pub fn build_coarse_endmembers(
    field: &EndmemberField,
    t: &MultiscaleTransform,
) -> Result<CoarseEndmemberCache> {
    if field.pixels() != t.pixels() {
        return Err(Error::Shape("field and transform disagree on N".into()));
    }
    let (l, p) = (field.bands(), field.endmembers());
    let coarse: Vec<DMatrix<f64>> = (0..t.superpixels())
        .into_par_iter()
        .map(|i| {
            let members = t.members(i);
            let mut acc = DMatrix::zeros(l, p);
            for &n in members {
                acc += field.get(n);
            }
            acc / members.len() as f64
        })
        .collect();
    let labels: Vec<usize> = t.map().labels().to_vec();
    let detail = (0..t.pixels())
        .into_par_iter()
        .map(|n| field.get(n) - &coarse[labels[n]])
        .collect();
    Ok(CoarseEndmemberCache { labels, coarse, detail })
}

/// Ridge weight of the coarse-scale subproblems.
pub fn coarse_ridge(params: &MuaSvParams) -> f64 {
    params.rho0 * params.lambda_a / 2.0
}

pub fn update_abundances_coarse(
    yc: &DMatrix<f64>,
    cache: &CoarseEndmemberCache,
    params: &MuaSvParams,
) -> Result<AbundanceMatrix> {
    if yc.ncols() != cache.coarse.len() {
        return Err(Error::Shape("coarse image and cache disagree on S".into()));
    }
    let tau = coarse_ridge(params);
    let cols: Vec<DVector<f64>> = (0..yc.ncols())
        .into_par_iter()
        .map(|i| {
            let prob = SimplexQpProblem::new(cache.coarse[i].clone(), yc.column(i).into_owned(), tau);
            solve_fcls(&prob)
        })
        .collect::<Result<_>>()?;
    AbundanceMatrix::new(DMatrix::from_columns(&cols), Domain::Coarse)
}

/// `Σ_i ‖y_{C_i} − M_{C_i} a_{C_i}‖² + τ_C ‖a_{C_i}‖²`.
pub fn coarse_objective(
    yc: &DMatrix<f64>,
    cache: &CoarseEndmemberCache,
    ac: &AbundanceMatrix,
    params: &MuaSvParams,
) -> f64 {
    let tau = coarse_ridge(params);
    (0..yc.ncols())
        .map(|i| {
            let a = ac.data().column(i);
            (yc.column(i) - &cache.coarse[i] * a).norm_squared() + tau * a.norm_squared()
        })
        .sum()
}

/// Target of the detail subproblem at pixel `n`: `y_{D_n} − M_{D_n} c_n`.
fn detail_target(yd: &DMatrix<f64>, cache: &CoarseEndmemberCache, c: &DMatrix<f64>, n: usize) -> DVector<f64> {
    yd.column(n) - &cache.detail[n] * c.column(n)
}

pub fn update_abundances_detail(
    yd: &DMatrix<f64>,
    field: &EndmemberField,
    cache: &CoarseEndmemberCache,
    a_coarse: &AbundanceMatrix,
    t: &MultiscaleTransform,
    params: &MuaSvParams,
) -> Result<AbundanceMatrix> {
    if yd.ncols() != t.pixels() || field.pixels() != t.pixels() {
        return Err(Error::Shape("detail image, field and transform disagree".into()));
    }
    let c = t.expand(a_coarse.data())?;
    let cols: Vec<DVector<f64>> = (0..t.pixels())
        .into_par_iter()
        .map(|n| {
            let shift = c.column(n).into_owned();
            let y = detail_target(yd, cache, &c, n);
            solve_shifted_fcls(field.get(n), &y, params.lambda_a, &shift)
        })
        .collect::<Result<_>>()?;
    AbundanceMatrix::new(DMatrix::from_columns(&cols), Domain::Detail)
}

/// `Σ_n ‖y_{D_n} − M_{D_n} c_n − M_n a_{D_n}‖² + λ_A ‖a_{D_n}‖²`.
pub fn detail_objective(
    yd: &DMatrix<f64>,
    field: &EndmemberField,
    cache: &CoarseEndmemberCache,
    a_coarse: &AbundanceMatrix,
    ad: &AbundanceMatrix,
    t: &MultiscaleTransform,
    params: &MuaSvParams,
) -> Result<f64> {
    let c = t.expand(a_coarse.data())?;
    Ok((0..t.pixels())
        .map(|n| {
            let a = ad.data().column(n);
            (detail_target(yd, cache, &c, n) - field.get(n) * a).norm_squared()
                + params.lambda_a * a.norm_squared()
        })
        .sum())
}

pub fn update_scaling(
    field: &EndmemberField,
    m0: &EndmemberSet,
    lambda_m: f64,
    lambda_psi: f64,
    grid: Grid,
) -> Result<ScalingField> {
    let (n, p) = (field.pixels(), m0.endmembers());
    if n != grid.len() || field.bands() != m0.bands() || field.endmembers() != p {
        return Err(Error::Shape("scaling update inputs disagree".into()));
    }
    let rows: Vec<DMatrix<f64>> = (0..p)
        .into_par_iter()
        .map(|k| {
            let m0k = m0.data().column(k);
            let norm = m0k.norm_squared();
            if norm == 0.0 {
                return Err(Error::InvalidInput(format!("reference endmember {k} has zero norm")));
            }
            let coef = DVector::from_element(n, lambda_m * norm);
            let rhs = DMatrix::from_fn(1, n, |_, j| lambda_m * m0k.dot(&field.get(j).column(k)));
            // gradient of λ_Ψ‖Lψ‖² is 2λ_Ψ LᵀLψ against λ_M‖m0‖²ψ from the data term
            solve_smoothed_field(&coef, &rhs, 2.0 * lambda_psi, grid)
        })
        .collect::<Result<_>>()?;
    let data = DMatrix::from_fn(p, n, |k, j| rows[k][(0, j)]);
    ScalingField::new(data)
}

/// `λ_M/2 Σ_n ‖M_n − M0 diag ψ_n‖² + λ_Ψ Σ_k ‖L ψ_k‖²`.
pub fn scaling_objective(
    field: &EndmemberField,
    m0: &EndmemberSet,
    psi: &ScalingField,
    lambda_m: f64,
    lambda_psi: f64,
    grid: Grid,
) -> f64 {
    let fit: f64 = (0..field.pixels())
        .map(|j| (field.get(j) - scaled_reference(m0.data(), psi.data().column(j).as_slice())).norm_squared())
        .sum();
    let smooth: f64 = (0..psi.endmembers())
        .map(|k| {
            let row: Vec<f64> = psi.data().row(k).iter().copied().collect();
            crate::solvers::gradient_energy(&row, grid)
        })
        .sum();
    0.5 * lambda_m * fit + lambda_psi * smooth
}
