//! Multiscale unmixing with spectral variability.
//!
//! Alternates between per-pixel endmember matrices, coarse (superpixel)
//! abundances, detail abundances and a spatially smooth scaling field.
//! Each abundance subproblem is a small simplex-constrained QP solved once
//! per scale and iteration.

mod params;
mod updates;

use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::solvers::gradient_energy;
use crate::superpixel::{build_transform, slic_segment, MultiscaleTransform};
use crate::types::{AbundanceMatrix, Domain, EndmemberField, EndmemberSet, HsiCube, ScalingField, SIMPLEX_TOL};

pub use params::MuaSvParams;
pub use updates::{
    build_coarse_endmembers, coarse_objective, coarse_ridge, detail_objective, endmember_objective,
    endmember_unprojected, scaled_reference, scaling_objective, update_abundances_coarse,
    update_abundances_detail, update_endmembers, update_scaling, CoarseEndmemberCache,
};

/// One line of the per-iteration log.
#[derive(Debug, Clone, Serialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    pub rel_change_m: f64,
    pub rel_change_a: f64,
    pub rel_change_psi: f64,
    pub objective_m: f64,
    pub objective_coarse: f64,
    pub objective_detail: f64,
    pub objective_psi: f64,
    pub global_cost: f64,
    pub a1_ratio: f64,
    pub negative_psi: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct MuaSvOutput {
    pub field: EndmemberField,
    pub scaling: ScalingField,
    pub abundances: AbundanceMatrix,
    pub coarse: AbundanceMatrix,
    pub detail: AbundanceMatrix,
    pub transform: MultiscaleTransform,
    pub iterations: usize,
    pub converged: bool,
    pub diagnostics: Vec<IterationDiagnostics>,
    pub wall_time_s: f64,
}

/// Coarse/detail split of the reconstruction residual `R = Y − [M_n a_n]`:
/// returns `(‖R WW*‖², ‖R(I − WW*)‖², ⟨R WW*, R(I − WW*)⟩)`.
pub fn residual_split(
    cube: &HsiCube,
    field: &EndmemberField,
    ab: &DMatrix<f64>,
    t: &MultiscaleTransform,
) -> Result<(f64, f64, f64)> {
    let r = residual(cube, field, ab);
    let rc = t.expand(&t.to_coarse(&r)?)?;
    let rd = &r - &rc;
    Ok((rc.norm_squared(), rd.norm_squared(), rc.dot(&rd)))
}

/// `|⟨RE_C, RE_D⟩| / (‖RE_C‖² + ‖RE_D‖²)`, zero for an exact fit.
pub fn a1_ratio(
    cube: &HsiCube,
    field: &EndmemberField,
    ab: &DMatrix<f64>,
    t: &MultiscaleTransform,
) -> Result<f64> {
    let (c, d, cross) = residual_split(cube, field, ab, t)?;
    Ok(if c + d > 0.0 { cross.abs() / (c + d) } else { 0.0 })
}

fn residual(cube: &HsiCube, field: &EndmemberField, ab: &DMatrix<f64>) -> DMatrix<f64> {
    let mut r = cube.data().clone();
    for n in 0..cube.pixels() {
        let x = field.get(n) * ab.column(n);
        let mut col = r.column_mut(n);
        col -= x;
    }
    r
}

/// Full regularized cost evaluated at the current iterate (logged, never
/// used for control flow).
#[allow(clippy::too_many_arguments)]
pub fn global_cost(
    cube: &HsiCube,
    field: &EndmemberField,
    ac: &AbundanceMatrix,
    ad: &AbundanceMatrix,
    ab: &DMatrix<f64>,
    psi: &ScalingField,
    m0: &EndmemberSet,
    t: &MultiscaleTransform,
    params: &MuaSvParams,
) -> f64 {
    let (n, s) = (t.pixels() as f64, t.superpixels() as f64);
    let rho = params.rho0 * n * n / (s * s);
    let data = 0.5 * residual(cube, field, ab).norm_squared();
    let abund = params.lambda_a
        * (0.5 * rho * ac.data().norm_squared() + 0.5 * ad.data().norm_squared());
    let grid = cube.grid();
    let smooth: f64 = (0..psi.endmembers())
        .map(|k| {
            let row: Vec<f64> = psi.data().row(k).iter().copied().collect();
            gradient_energy(&row, grid)
        })
        .sum();
    let fit: f64 = (0..cube.pixels())
        .map(|j| (field.get(j) - scaled_reference(m0.data(), psi.data().column(j).as_slice())).norm_squared())
        .sum();
    data + abund + 0.5 * params.lambda_m * fit + params.lambda_psi * smooth
}

fn rel_change(new: f64, old: f64) -> f64 {
    if old > 0.0 {
        (new / old).sqrt()
    } else {
        new.sqrt()
    }
}

fn field_diff_sq(a: &EndmemberField, b: &EndmemberField) -> f64 {
    a.mats().iter().zip(b.mats()).map(|(x, y)| (x - y).norm_squared()).sum()
}

/// Clamps roundoff negatives and renormalizes; larger violations are errors.
fn finalize_abundances(a: DMatrix<f64>) -> Result<AbundanceMatrix> {
    if let Some(v) = a.iter().find(|&&v| v < -SIMPLEX_TOL || !v.is_finite()) {
        return Err(Error::Numerical(format!("recombined abundance {v} is infeasible")));
    }
    let mut a = a.map(|v| v.max(0.0));
    for mut col in a.column_iter_mut() {
        let s = col.sum();
        col /= s;
    }
    AbundanceMatrix::new(a, Domain::Original)
}

/// Runs the alternating solver from the initial abundances `init`
/// (typically the SCLS estimate) with unit scaling factors.
pub fn run_mua_sv(
    cube: &HsiCube,
    m0: &EndmemberSet,
    init: &AbundanceMatrix,
    params: &MuaSvParams,
) -> Result<MuaSvOutput> {
    params.validate()?;
    if cube.bands() != m0.bands() {
        return Err(Error::Shape(format!(
            "cube has {} bands, endmembers have {}",
            cube.bands(),
            m0.bands()
        )));
    }
    if init.columns() != cube.pixels() || init.endmembers() != m0.endmembers() {
        return Err(Error::Shape("initial abundances do not match the cube".into()));
    }
    init.check(SIMPLEX_TOL)?;
    let start = Instant::now();
    let grid = cube.grid();
    let p = m0.endmembers();

    let map = slic_segment(cube, params.target_size, params.compactness, params.seed)?;
    let t = build_transform(map)?;
    let yc = t.to_coarse(cube.data())?;
    let yd = t.to_detail(cube.data())?;

    let mut ab = init.data().clone();
    let mut ac = AbundanceMatrix::from_raw(t.to_coarse(&ab)?, Domain::Coarse);
    let mut ad = AbundanceMatrix::from_raw(t.to_detail(&ab)?, Domain::Detail);
    let mut psi = ScalingField::ones(p, cube.pixels());
    let mut field = EndmemberField::from_scaling(m0, &psi)?;
    let mut diagnostics = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=params.max_iters {
        iterations = it;
        let a_cur = AbundanceMatrix::from_raw(ab.clone(), Domain::Original);
        let new_field = update_endmembers(cube, &a_cur, &psi, m0, params.lambda_m)?;
        let objective_m = endmember_objective(cube, &new_field, &a_cur, &psi, m0, params.lambda_m);

        let cache = build_coarse_endmembers(&new_field, &t)?;
        ac = update_abundances_coarse(&yc, &cache, params)?;
        let objective_coarse = coarse_objective(&yc, &cache, &ac, params);
        ad = update_abundances_detail(&yd, &new_field, &cache, &ac, &t, params)?;
        let objective_detail = detail_objective(&yd, &new_field, &cache, &ac, &ad, &t, params)?;
        let new_ab = t.recombine(ac.data(), ad.data())?;
        if new_ab.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite abundances".into()));
        }

        let new_psi = update_scaling(&new_field, m0, params.lambda_m, params.lambda_psi, grid)?;
        let objective_psi =
            scaling_objective(&new_field, m0, &new_psi, params.lambda_m, params.lambda_psi, grid);

        let rel_change_m = rel_change(field_diff_sq(&new_field, &field), field.frobenius_sq());
        let rel_change_a = rel_change((&new_ab - &ab).norm_squared(), ab.norm_squared());
        let rel_change_psi =
            rel_change((new_psi.data() - psi.data()).norm_squared(), psi.data().norm_squared());

        field = new_field;
        ab = new_ab;
        psi = new_psi;

        diagnostics.push(IterationDiagnostics {
            iteration: it,
            rel_change_m,
            rel_change_a,
            rel_change_psi,
            objective_m,
            objective_coarse,
            objective_detail,
            objective_psi,
            global_cost: global_cost(cube, &field, &ac, &ad, &ab, &psi, m0, &t, params),
            a1_ratio: a1_ratio(cube, &field, &ab, &t)?,
            negative_psi: psi.data().iter().filter(|&&v| v < 0.0).count(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });

        if rel_change_m.max(rel_change_a).max(rel_change_psi) < params.eps_stop {
            converged = true;
            break;
        }
    }

    let abundances = finalize_abundances(ab)?;
    Ok(MuaSvOutput {
        field,
        scaling: psi,
        abundances,
        coarse: ac,
        detail: ad,
        transform: t,
        iterations,
        converged,
        diagnostics,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
