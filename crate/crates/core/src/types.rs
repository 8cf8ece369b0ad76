//! Core data containers shared by every stage of the pipeline.
//!
//! Matrices are stored column-major with one column per pixel, so a pixel
//! spectrum or abundance vector is a contiguous slice.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance applied to the simplex invariants of abundance matrices.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Observed hyperspectral image: `bands × pixels`, pixels in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    data: DMatrix<f64>,
    rows: usize,
    cols: usize,
}

impl HsiCube {
    pub fn new(data: DMatrix<f64>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || data.nrows() == 0 {
            return Err(Error::InvalidInput("empty cube rejected".into()));
        }
        if data.ncols() != rows * cols {
            return Err(Error::Shape(format!(
                "cube has {} pixel columns but rows*cols = {}",
                data.ncols(),
                rows * cols
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("cube contains non-finite values".into()));
        }
        Ok(Self { data, rows, cols })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.data.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.data.ncols()
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.rows, self.cols)
    }

    pub fn pixel(&self, n: usize) -> DVector<f64> {
        self.data.column(n).into_owned()
    }
}

/// Spatial layout of an image: `rows × cols`, pixel `n = r * cols + c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
}

impl Grid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    #[inline]
    pub fn coords(&self, n: usize) -> (usize, usize) {
        (n / self.cols, n % self.cols)
    }
}

/// Which multiscale domain an abundance matrix lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Per-pixel abundances on the unit simplex.
    Original,
    /// Per-superpixel abundances on the unit simplex.
    Coarse,
    /// Per-pixel detail component; columns sum to zero.
    Detail,
}

/// Abundance matrix `P × K` (K = pixels or superpixels).
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMatrix {
    data: DMatrix<f64>,
    domain: Domain,
}

impl AbundanceMatrix {
    /// Wraps `data` after checking the invariants of `domain`.
    pub fn new(data: DMatrix<f64>, domain: Domain) -> Result<Self> {
        let out = Self { data, domain };
        out.check(SIMPLEX_TOL)?;
        Ok(out)
    }

    /// Wraps `data` without validation, e.g. for estimates loaded from disk
    /// that are scored as-is.
    pub fn from_raw(data: DMatrix<f64>, domain: Domain) -> Self {
        Self { data, domain }
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn endmembers(&self) -> usize {
        self.data.nrows()
    }

    pub fn columns(&self) -> usize {
        self.data.ncols()
    }

    /// Verifies the simplex (or zero-sum) invariant within `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("abundances contain non-finite values".into()));
        }
        let target = match self.domain {
            Domain::Original | Domain::Coarse => 1.0,
            Domain::Detail => 0.0,
        };
        for (j, col) in self.data.column_iter().enumerate() {
            let sum: f64 = col.iter().sum();
            if (sum - target).abs() > tol {
                return Err(Error::Numerical(format!(
                    "abundance column {j} sums to {sum}, expected {target}"
                )));
            }
            if self.domain != Domain::Detail {
                if let Some(v) = col.iter().find(|&&v| v < -tol) {
                    return Err(Error::Numerical(format!(
                        "abundance column {j} has negative entry {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Reference endmember signatures `L × P`.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberSet {
    data: DMatrix<f64>,
}

impl EndmemberSet {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput("endmember matrix is empty".into()));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "endmember entries must be finite and nonnegative".into(),
            ));
        }
        if let Some(k) = data.column_iter().position(|c| c.iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidInput(format!("endmember column {k} is all zero")));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn bands(&self) -> usize {
        self.data.nrows()
    }

    pub fn endmembers(&self) -> usize {
        self.data.ncols()
    }
}

/// Per-pixel endmember matrices, one `L × P` matrix per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberField {
    bands: usize,
    endmembers: usize,
    mats: Vec<DMatrix<f64>>,
}

impl EndmemberField {
    pub fn new(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| Error::InvalidInput("endmember field has no pixels".into()))?;
        let (bands, endmembers) = first.shape();
        if mats.iter().any(|m| m.shape() != (bands, endmembers)) {
            return Err(Error::Shape("endmember field matrices differ in shape".into()));
        }
        if mats.iter().flat_map(|m| m.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("endmember field has non-finite entries".into()));
        }
        Ok(Self {
            bands,
            endmembers,
            mats,
        })
    }

    /// Field with `m0` replicated at every pixel.
    pub fn constant(m0: &EndmemberSet, pixels: usize) -> Self {
        Self {
            bands: m0.bands(),
            endmembers: m0.endmembers(),
            mats: vec![m0.data().clone(); pixels],
        }
    }

    /// ELMM field `M0 · diag(ψ_n)`.
    pub fn from_scaling(m0: &EndmemberSet, psi: &ScalingField) -> Result<Self> {
        if psi.endmembers() != m0.endmembers() {
            return Err(Error::Shape("scaling field and M0 disagree on P".into()));
        }
        let mats = psi
            .data()
            .column_iter()
            .map(|s| {
                let mut m = m0.data().clone();
                for (k, mut col) in m.column_iter_mut().enumerate() {
                    col *= s[k];
                }
                m
            })
            .collect();
        Self::new(mats)
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn endmembers(&self) -> usize {
        self.endmembers
    }

    pub fn pixels(&self) -> usize {
        self.mats.len()
    }

    pub fn get(&self, n: usize) -> &DMatrix<f64> {
        &self.mats[n]
    }

    pub fn mats(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    pub fn into_mats(self) -> Vec<DMatrix<f64>> {
        self.mats
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.mats.iter().map(|m| m.norm_squared()).sum()
    }
}

/// ELMM scaling factors `P × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingField {
    data: DMatrix<f64>,
}

impl ScalingField {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("scaling field has non-finite entries".into()));
        }
        Ok(Self { data })
    }

    pub fn ones(endmembers: usize, pixels: usize) -> Self {
        Self {
            data: DMatrix::from_element(endmembers, pixels, 1.0),
        }
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn endmembers(&self) -> usize {
        self.data.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.data.ncols()
    }
}

/// Accuracy metrics for one unmixing run. Metrics requiring a ground-truth
/// endmember field are absent when none exists.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse_a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sam_m: Option<f64>,
    pub wall_time_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cube_rejected() {
        let err = HsiCube::new(DMatrix::zeros(2, 0), 0, 3).unwrap_err();
        assert!(err.to_string().contains("empty cube rejected"));
    }

    #[test]
    fn cube_shape_checked() {
        assert!(matches!(
            HsiCube::new(DMatrix::zeros(2, 5), 2, 3),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn abundance_domains() {
        let a = DMatrix::from_row_slice(2, 2, &[0.25, 1.0, 0.75, 0.0]);
        assert!(AbundanceMatrix::new(a.clone(), Domain::Original).is_ok());
        assert!(AbundanceMatrix::new(a, Domain::Detail).is_err());
        let d = DMatrix::from_row_slice(2, 1, &[-0.4, 0.4]);
        assert!(AbundanceMatrix::new(d.clone(), Domain::Detail).is_ok());
        assert!(AbundanceMatrix::new(d, Domain::Coarse).is_err());
    }

    #[test]
    fn endmember_set_rejects_zero_column() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        assert!(EndmemberSet::new(m).is_err());
    }
}
