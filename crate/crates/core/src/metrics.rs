//! Accuracy metrics for abundance and endmember estimates.

use crate::error::{Error, Result};
use crate::types::{AbundanceMatrix, EndmemberField, HsiCube};

/// `(1/NP) ‖A − Â‖²_F`.
pub fn mse_abundance(truth: &AbundanceMatrix, est: &AbundanceMatrix) -> Result<f64> {
    if truth.data().shape() != est.data().shape() {
        return Err(Error::Shape(format!(
            "abundance shapes {:?} and {:?} differ",
            truth.data().shape(),
            est.data().shape()
        )));
    }
    Ok((truth.data() - est.data()).norm_squared() / truth.data().len() as f64)
}

fn check_fields(truth: &EndmemberField, est: &EndmemberField) -> Result<()> {
    let t = (truth.bands(), truth.endmembers(), truth.pixels());
    let e = (est.bands(), est.endmembers(), est.pixels());
    if t != e {
        return Err(Error::Shape(format!("endmember fields {t:?} and {e:?} differ")));
    }
    Ok(())
}

/// `(1/NLP) Σ_n ‖M_n − M̂_n‖²_F`.
pub fn mse_endmembers(truth: &EndmemberField, est: &EndmemberField) -> Result<f64> {
    check_fields(truth, est)?;
    let total: f64 = truth
        .mats()
        .iter()
        .zip(est.mats())
        .map(|(t, e)| (t - e).norm_squared())
        .sum();
    Ok(total / (truth.bands() * truth.endmembers() * truth.pixels()) as f64)
}

/// `(1/NL) Σ_n ‖y_n − M̂_n â_n‖²`.
pub fn mse_reconstruction(
    cube: &HsiCube,
    field: &EndmemberField,
    ab: &AbundanceMatrix,
) -> Result<f64> {
    if field.pixels() != cube.pixels()
        || ab.columns() != cube.pixels()
        || field.bands() != cube.bands()
        || field.endmembers() != ab.endmembers()
    {
        return Err(Error::Shape("cube, field and abundances disagree".into()));
    }
    let total: f64 = (0..cube.pixels())
        .map(|n| (cube.data().column(n) - field.get(n) * ab.data().column(n)).norm_squared())
        .sum();
    Ok(total / (cube.pixels() * cube.bands()) as f64)
}

/// Spectral angle summed over endmembers and averaged over pixels only.
pub fn sam_endmembers(truth: &EndmemberField, est: &EndmemberField) -> Result<f64> {
    check_fields(truth, est)?;
    let mut total = 0.0;
    for (t, e) in truth.mats().iter().zip(est.mats()) {
        for (tc, ec) in t.column_iter().zip(e.column_iter()) {
            let (nt, ne) = (tc.norm(), ec.norm());
            if nt == 0.0 || ne == 0.0 {
                return Err(Error::InvalidInput(
                    "undefined angle: zero-norm endmember column".into(),
                ));
            }
            total += (tc.dot(&ec) / (nt * ne)).clamp(-1.0, 1.0).acos();
        }
    }
    Ok(total / truth.pixels() as f64)
}
