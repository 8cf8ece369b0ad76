//! Superpixel segmentation and the coarse/detail multiscale transform.
//!
//! With `W` (N×S) averaging pixels into superpixels and `W*` (S×N) copying
//! superpixel values back to their pixels, `X_C = X W`,
//! `X_D = X (I − W W*)` and `X = X_C W* + X_D`.

mod slic;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::Grid;

pub use slic::slic_segment;

/// Partition of the image grid into labelled superpixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelMap {
    labels: Vec<usize>,
    grid: Grid,
    sizes: Vec<usize>,
}

impl SuperpixelMap {
    /// Validates that labels cover `0..S` with no empty superpixel.
    pub fn new(labels: Vec<usize>, grid: Grid) -> Result<Self> {
        if labels.len() != grid.len() || labels.is_empty() {
            return Err(Error::Shape(format!(
                "{} labels for a {}×{} grid",
                labels.len(),
                grid.rows,
                grid.cols
            )));
        }
        let s = labels.iter().max().unwrap() + 1;
        let mut sizes = vec![0usize; s];
        for &l in &labels {
            sizes[l] += 1;
        }
        if let Some(i) = sizes.iter().position(|&c| c == 0) {
            return Err(Error::InvalidInput(format!("empty superpixel {i}")));
        }
        Ok(Self { labels, grid, sizes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn superpixel_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn pixel_count(&self) -> usize {
        self.labels.len()
    }

    /// True when every superpixel is 4-connected.
    pub fn is_connected(&self) -> bool {
        let g = self.grid;
        let mut seen = vec![false; self.labels.len()];
        let mut visited_labels = vec![false; self.sizes.len()];
        for start in 0..self.labels.len() {
            if seen[start] {
                continue;
            }
            let lab = self.labels[start];
            if visited_labels[lab] {
                return false;
            }
            visited_labels[lab] = true;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(n) = stack.pop() {
                let (r, c) = g.coords(n);
                let cand = [
                    (r > 0).then(|| g.index(r - 1, c)),
                    (r + 1 < g.rows).then(|| g.index(r + 1, c)),
                    (c > 0).then(|| g.index(r, c - 1)),
                    (c + 1 < g.cols).then(|| g.index(r, c + 1)),
                ];
                for m in cand.into_iter().flatten() {
                    if !seen[m] && self.labels[m] == lab {
                        seen[m] = true;
                        stack.push(m);
                    }
                }
            }
        }
        true
    }
}

/// Sparse `W`/`W*` pair built from a superpixel map.
#[derive(Debug, Clone)]
pub struct MultiscaleTransform {
    map: SuperpixelMap,
    members: Vec<Vec<usize>>,
}

pub fn build_transform(map: SuperpixelMap) -> Result<MultiscaleTransform> {
    let mut members = vec![Vec::new(); map.superpixel_count()];
    for (n, &l) in map.labels().iter().enumerate() {
        members[l].push(n);
    }
    if members.iter().any(|m| m.is_empty()) {
        return Err(Error::InvalidInput("empty superpixel".into()));
    }
    Ok(MultiscaleTransform { map, members })
}

impl MultiscaleTransform {
    pub fn map(&self) -> &SuperpixelMap {
        &self.map
    }

    pub fn superpixels(&self) -> usize {
        self.members.len()
    }

    pub fn pixels(&self) -> usize {
        self.map.pixel_count()
    }

    /// Pixel indices of superpixel `i`, ascending.
    pub fn members(&self, i: usize) -> &[usize] {
        &self.members[i]
    }

    pub fn label(&self, n: usize) -> usize {
        self.map.labels[n]
    }

    /// Dense `W` (N×S).
    pub fn w_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.pixels(), self.superpixels());
        for (i, m) in self.members.iter().enumerate() {
            for &n in m {
                w[(n, i)] = 1.0 / m.len() as f64;
            }
        }
        w
    }

    /// Dense `W*` (S×N).
    pub fn w_star_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.superpixels(), self.pixels());
        for (n, &l) in self.map.labels.iter().enumerate() {
            w[(l, n)] = 1.0;
        }
        w
    }

    fn check_cols(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.pixels() {
            return Err(Error::Shape(format!(
                "matrix has {} columns, transform has {} pixels",
                x.ncols(),
                self.pixels()
            )));
        }
        Ok(())
    }

    /// `X W`: per-superpixel column means, summed in ascending pixel order.
    pub fn to_coarse(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_cols(x)?;
        let k = x.nrows();
        let cols: Vec<Vec<f64>> = self
            .members
            .par_iter()
            .map(|m| {
                let mut acc = vec![0.0; k];
                for &n in m {
                    for (a, v) in acc.iter_mut().zip(x.column(n).iter()) {
                        *a += v;
                    }
                }
                let size = m.len() as f64;
                acc.iter().map(|a| a / size).collect()
            })
            .collect();
        Ok(DMatrix::from_fn(k, self.superpixels(), |r, i| cols[i][r]))
    }

    /// `X_C W*`: copies each superpixel column to its pixels.
    pub fn expand(&self, xc: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if xc.ncols() != self.superpixels() {
            return Err(Error::Shape(format!(
                "coarse matrix has {} columns, transform has {} superpixels",
                xc.ncols(),
                self.superpixels()
            )));
        }
        let labels = &self.map.labels;
        Ok(DMatrix::from_fn(xc.nrows(), self.pixels(), |r, n| xc[(r, labels[n])]))
    }

    /// `X (I − W W*)`.
    pub fn to_detail(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mean = self.expand(&self.to_coarse(x)?)?;
        Ok(x - mean)
    }

    /// `X_C W* + X_D`.
    pub fn recombine(&self, xc: &DMatrix<f64>, xd: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_cols(xd)?;
        let up = self.expand(xc)?;
        if up.nrows() != xd.nrows() {
            return Err(Error::Shape("coarse and detail row counts differ".into()));
        }
        Ok(up + xd)
    }
}
