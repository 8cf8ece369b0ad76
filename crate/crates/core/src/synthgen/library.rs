//! Bundled synthetic endmember library: three smooth spectra over
//! 400–2500 nm sampled at 224 bands.

use nalgebra::DMatrix;

use crate::types::EndmemberSet;

pub const LIBRARY_BANDS: usize = 224;

fn gauss(x: f64, mu: f64, width: f64) -> f64 {
    (-0.5 * ((x - mu) / width).powi(2)).exp()
}

fn logistic(x: f64, mu: f64, width: f64) -> f64 {
    1.0 / (1.0 + (-(x - mu) / width).exp())
}

/// Wavelength (nm) of band `b`.
pub fn wavelength(b: usize) -> f64 {
    400.0 + 2100.0 * b as f64 / (LIBRARY_BANDS - 1) as f64
}

fn vegetation(w: f64) -> f64 {
    let visible = 0.04 + 0.06 * gauss(w, 550.0, 35.0);
    let red_edge = 0.45 * logistic(w, 715.0, 18.0);
    let water = 1.0 - 0.55 * gauss(w, 1450.0, 60.0) - 0.7 * gauss(w, 1940.0, 70.0);
    let decline = 1.0 - 0.45 * logistic(w, 1300.0, 250.0);
    (visible + red_edge * decline) * water + 0.01
}

fn soil(w: f64) -> f64 {
    let base = 0.08 + 0.32 * logistic(w, 900.0, 300.0);
    base * (1.0 - 0.12 * gauss(w, 1420.0, 50.0) - 0.18 * gauss(w, 1920.0, 60.0))
        + 0.05 * gauss(w, 1650.0, 250.0)
}

fn mineral(w: f64) -> f64 {
    let base = 0.55 + 0.12 * gauss(w, 1100.0, 400.0) - 0.25 * gauss(w, 420.0, 120.0);
    base * (1.0 - 0.35 * gauss(w, 2205.0, 25.0) - 0.15 * gauss(w, 2340.0, 40.0))
}

/// The three bundled signatures as an `L × 3` matrix.
pub fn builtin_library() -> EndmemberSet {
    let m = DMatrix::from_fn(LIBRARY_BANDS, 3, |b, k| {
        let w = wavelength(b);
        match k {
            0 => vegetation(w),
            1 => soil(w),
            _ => mineral(w),
        }
    });
    EndmemberSet::new(m).expect("builtin library is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_csv_matches_generator() {
        let text = include_str!("../../data/library.csv");
        let parsed = crate::io::parse_csv_matrix(text).unwrap();
        assert_eq!(parsed, *builtin_library().data());
    }

    #[test]
    fn library_is_well_conditioned() {
        let m = builtin_library();
        assert!(m.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let s = m.data().clone().svd(false, false).singular_values;
        assert!(s.min() / s.max() > 0.05);
    }
}
