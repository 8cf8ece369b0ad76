//! Decomposes a cube into coarse and detail components and checks that the
//! multiscale transform recombines it exactly.

use muasv::superpixel::{build_transform, slic_segment};
use muasv::synthgen::{builtin_library, generate_dc1};

fn main() -> muasv::Result<()> {
    let scene = generate_dc1(2, 30.0, &builtin_library())?;
    let t = build_transform(slic_segment(&scene.cube, 3.0, 0.001, 0)?)?;
    let y = scene.cube.data();
    let yc = t.to_coarse(y)?;
    let yd = t.to_detail(y)?;
    let back = t.recombine(&yc, &yd)?;
    let err = (&back - y).amax();
    let w = t.w_dense();
    let ws = t.w_star_dense();
    let eye = nalgebra::DMatrix::<f64>::identity(t.superpixels(), t.superpixels());
    println!("S = {} superpixels, N = {} pixels", t.superpixels(), t.pixels());
    println!("max |recombine(decompose(Y)) - Y| = {err:.2e}");
    println!("max |W* W - I| = {:.2e}", (&ws * &w - eye).amax());
    println!(
        "detail energy share = {:.4}",
        yd.norm_squared() / y.norm_squared()
    );
    Ok(())
}
