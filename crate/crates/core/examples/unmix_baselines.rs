//! Unmixes a DC1 scene with FCLS and SCLS using the true reference library.

use muasv::baselines::{unmix_fcls, unmix_scls};
use muasv::metrics::mse_abundance;
use muasv::synthgen::{builtin_library, generate_dc1};

fn main() -> muasv::Result<()> {
    let library = builtin_library();
    let scene = generate_dc1(1, 30.0, &library)?;
    let fcls = unmix_fcls(&scene.cube, &library)?;
    let (scls, psi) = unmix_scls(&scene.cube, &library)?;
    println!("FCLS  MSE_A = {:.3e}", mse_abundance(&scene.truth_abundances, &fcls)?);
    println!("SCLS  MSE_A = {:.3e}", mse_abundance(&scene.truth_abundances, &scls)?);
    println!("SCLS  scale range = [{:.3}, {:.3}]", psi.min(), psi.max());
    Ok(())
}
