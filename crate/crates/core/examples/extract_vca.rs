//! Recovers endmembers from a noiseless cube that contains pure pixels.

use muasv::baselines::extract_vca;
use muasv::synthgen::builtin_library;
use muasv::HsiCube;
use nalgebra::DMatrix;

fn main() -> muasv::Result<()> {
    let library = builtin_library();
    let m0 = library.data();
    let (rows, cols) = (20, 20);
    // a pure pixel of each material in the first row, mixtures elsewhere
    let a = DMatrix::from_fn(3, rows * cols, |k, n| match n {
        0..=2 => f64::from(u8::from(k == n)),
        _ => {
            let w = [1.0 + (n % 7) as f64, 1.0 + (n % 5) as f64, 1.0 + (n % 3) as f64];
            w[k] / w.iter().sum::<f64>()
        }
    });
    let cube = HsiCube::new(m0 * &a, rows, cols)?;
    let found = extract_vca(&cube, 3, 0)?;
    for (k, col) in found.data().column_iter().enumerate() {
        let (best, err) = (0..3)
            .map(|j| (j, (col - m0.column(j)).norm() / m0.column(j).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        println!("extracted {k} matches library {best} with relative error {err:.2e}");
    }
    Ok(())
}
