//! SLIC clustering extended to full spectra.
//!
//! Distance between pixel `n` and cluster `k`:
//! `D² = ‖y_n − μ_k‖² + γ² ‖p_n − c_k‖² / s²`, with `s` the target size
//! (so `1/s² = S/N`).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{Grid, HsiCube};

use super::SuperpixelMap;

const SLIC_ITERS: usize = 10;

#[derive(Debug, Clone)]
struct Center {
    spectrum: DVector<f64>,
    r: f64,
    c: f64,
}

fn pixel_gradient(y: &DMatrix<f64>, grid: Grid, r: usize, c: usize) -> f64 {
    let at = |r: usize, c: usize| y.column(grid.index(r, c));
    let rm = r.saturating_sub(1);
    let rp = (r + 1).min(grid.rows - 1);
    let cm = c.saturating_sub(1);
    let cp = (c + 1).min(grid.cols - 1);
    (at(rp, c) - at(rm, c)).norm_squared() + (at(r, cp) - at(r, cm)).norm_squared()
}

fn initial_centers(y: &DMatrix<f64>, grid: Grid, step: f64) -> Vec<Center> {
    let nr = ((grid.rows as f64 / step).round() as usize).clamp(1, grid.rows);
    let nc = ((grid.cols as f64 / step).round() as usize).clamp(1, grid.cols);
    let hr = grid.rows as f64 / nr as f64;
    let hc = grid.cols as f64 / nc as f64;
    let mut centers = Vec::with_capacity(nr * nc);
    for i in 0..nr {
        for j in 0..nc {
            let mut r = (((i as f64 + 0.5) * hr).floor() as usize).min(grid.rows - 1);
            let mut c = (((j as f64 + 0.5) * hc).floor() as usize).min(grid.cols - 1);
            if step >= 3.0 {
                let mut best = pixel_gradient(y, grid, r, c);
                let (r0, c0) = (r, c);
                for rr in r0.saturating_sub(1)..=(r0 + 1).min(grid.rows - 1) {
                    for cc in c0.saturating_sub(1)..=(c0 + 1).min(grid.cols - 1) {
                        let g = pixel_gradient(y, grid, rr, cc);
                        if g < best {
                            best = g;
                            r = rr;
                            c = cc;
                        }
                    }
                }
            }
            centers.push(Center {
                spectrum: y.column(grid.index(r, c)).into_owned(),
                r: r as f64,
                c: c as f64,
            });
        }
    }
    centers
}

fn assign(
    y: &DMatrix<f64>,
    grid: Grid,
    centers: &[Center],
    step: f64,
    spatial_weight: f64,
) -> Vec<usize> {
    let window = step.ceil() as i64 + 1;
    (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let (r, c) = grid.coords(n);
            let (rf, cf) = (r as f64, c as f64);
            let px = y.column(n);
            let mut best = (usize::MAX, f64::INFINITY);
            let mut fallback = (usize::MAX, f64::INFINITY);
            for (k, ctr) in centers.iter().enumerate() {
                let dr = rf - ctr.r;
                let dc = cf - ctr.c;
                let sp = dr * dr + dc * dc;
                let near = dr.abs() <= window as f64 && dc.abs() <= window as f64;
                if !near {
                    if sp < fallback.1 {
                        fallback = (k, sp);
                    }
                    continue;
                }
                let d = (px - &ctr.spectrum).norm_squared() + spatial_weight * sp;
                if d < best.1 {
                    best = (k, d);
                }
            }
            if best.0 == usize::MAX {
                fallback.0
            } else {
                best.0
            }
        })
        .collect()
}

fn update_centers(y: &DMatrix<f64>, grid: Grid, labels: &[usize], centers: &mut [Center]) {
    let l = y.nrows();
    let k = centers.len();
    let mut sums = vec![DVector::<f64>::zeros(l); k];
    let mut pos = vec![(0.0, 0.0); k];
    let mut counts = vec![0usize; k];
    for (n, &lab) in labels.iter().enumerate() {
        let (r, c) = grid.coords(n);
        sums[lab] += y.column(n);
        pos[lab].0 += r as f64;
        pos[lab].1 += c as f64;
        counts[lab] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            let m = counts[j] as f64;
            centers[j].spectrum = &sums[j] / m;
            centers[j].r = pos[j].0 / m;
            centers[j].c = pos[j].1 / m;
        }
    }
}

/// Union-find root with path halving.
fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Labels 4-connected components of `labels`; returns component ids in
/// raster order of first appearance.
fn components(labels: &[usize], grid: Grid) -> Vec<usize> {
    let mut comp = vec![usize::MAX; labels.len()];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        stack.push(start);
        while let Some(n) = stack.pop() {
            let (r, c) = grid.coords(n);
            let mut nb = [usize::MAX; 4];
            if r > 0 {
                nb[0] = grid.index(r - 1, c);
            }
            if r + 1 < grid.rows {
                nb[1] = grid.index(r + 1, c);
            }
            if c > 0 {
                nb[2] = grid.index(r, c - 1);
            }
            if c + 1 < grid.cols {
                nb[3] = grid.index(r, c + 1);
            }
            for m in nb {
                if m != usize::MAX && comp[m] == usize::MAX && labels[m] == labels[n] {
                    comp[m] = next;
                    stack.push(m);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Splits disconnected clusters and merges fragments smaller than
/// `min_size` into the adjacent region with the nearest mean spectrum.
fn enforce_connectivity(y: &DMatrix<f64>, grid: Grid, labels: &[usize], min_size: usize) -> Vec<usize> {
    let mut comp = components(labels, grid);
    loop {
        let count = comp.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; count];
        let mut means = vec![DVector::<f64>::zeros(y.nrows()); count];
        for (n, &c) in comp.iter().enumerate() {
            sizes[c] += 1;
            means[c] += y.column(n);
        }
        for c in 0..count {
            means[c] /= sizes[c] as f64;
        }
        if count <= 1 || sizes.iter().all(|&s| s >= min_size) {
            break;
        }

        // adjacency between components, collected in ascending order
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); count];
        for n in 0..grid.len() {
            let (r, c) = grid.coords(n);
            let mut link = |m: usize| {
                let (a, b) = (comp[n], comp[m]);
                if a != b {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            };
            if c + 1 < grid.cols {
                link(grid.index(r, c + 1));
            }
            if r + 1 < grid.rows {
                link(grid.index(r + 1, c));
            }
        }
        let mut parent: Vec<usize> = (0..count).collect();
        let mut merged = false;
        for c in 0..count {
            if sizes[c] >= min_size {
                continue;
            }
            adj[c].sort_unstable();
            adj[c].dedup();
            let target = adj[c]
                .iter()
                .map(|&o| (o, (&means[c] - &means[o]).norm_squared()))
                .fold(None, |best: Option<(usize, f64)>, (o, d)| match best {
                    Some((_, bd)) if bd <= d => best,
                    _ => Some((o, d)),
                });
            if let Some((o, _)) = target {
                let (ra, rb) = (find(&mut parent, c), find(&mut parent, o));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                    merged = true;
                }
            }
        }
        if !merged {
            break;
        }
        let roots: Vec<usize> = (0..count).map(|c| find(&mut parent, c)).collect();
        let merged_labels: Vec<usize> = comp.iter().map(|&c| roots[c]).collect();
        comp = components(&merged_labels, grid);
    }
    comp
}

pub fn slic_segment(
    cube: &HsiCube,
    target_size: f64,
    compactness: f64,
    _seed: u64,
) -> Result<SuperpixelMap> {
    if !(target_size >= 1.0) || !target_size.is_finite() {
        return Err(Error::InvalidInput("target_size must be at least 1".into()));
    }
    if !(compactness > 0.0) || !compactness.is_finite() {
        return Err(Error::InvalidInput("compactness must be positive".into()));
    }
    let grid = cube.grid();
    let n = grid.len();
    if target_size * target_size > n as f64 {
        return Err(Error::InvalidInput("fewer than one superpixel".into()));
    }
    if target_size == 1.0 {
        return SuperpixelMap::new((0..n).collect(), grid);
    }
    let y = cube.data();
    let spatial_weight = compactness * compactness / (target_size * target_size);
    let mut centers = initial_centers(y, grid, target_size);
    let mut labels = assign(y, grid, &centers, target_size, spatial_weight);
    for _ in 1..SLIC_ITERS {
        update_centers(y, grid, &labels, &mut centers);
        let next = assign(y, grid, &centers, target_size, spatial_weight);
        if next == labels {
            break;
        }
        labels = next;
    }
    let min_size = ((target_size * target_size) / 4.0).floor().max(1.0) as usize;
    let labels = enforce_connectivity(y, grid, &labels, min_size);
    SuperpixelMap::new(labels, grid)
}
