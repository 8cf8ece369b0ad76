//! Constrained quadratic subproblem solvers shared by the unmixing
//! algorithms.

mod fcls;
mod smooth;

use nalgebra::DMatrix;

pub use fcls::{
    kkt_residual, simplex_kkt_residual, simplex_qp, solve_fcls, solve_nnls, solve_shifted_fcls,
    SimplexQpProblem,
};
pub use smooth::{apply_laplacian, gradient_energy, solve_smoothed_field};

/// Elementwise `max(x, 0)`.
pub fn project_nonnegative(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.map(|v| v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_cases() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.5, 3.0]);
        assert_eq!(project_nonnegative(&x), x);
        assert_eq!(project_nonnegative(&(-&x)), DMatrix::zeros(2, 2));
    }

    proptest! {
        #[test]
        fn projection_idempotent(v in proptest::collection::vec(-10.0f64..10.0, 12)) {
            let x = DMatrix::from_vec(3, 4, v);
            let once = project_nonnegative(&x);
            prop_assert_eq!(project_nonnegative(&once), once.clone());
            prop_assert!(once.iter().all(|&v| v >= 0.0));
        }
    }
}
