//! Segments a DC2 scene into superpixels and reports their size statistics.
//!
//! `cargo run --example segment_superpixels -- [size] [gamma]`

use muasv::superpixel::slic_segment;
use muasv::synthgen::{builtin_library, generate_dc2};

fn main() -> muasv::Result<()> {
    let mut args = std::env::args().skip(1);
    let size: f64 = args.next().map_or(9.0, |s| s.parse().expect("size"));
    let gamma: f64 = args.next().map_or(0.01, |s| s.parse().expect("gamma"));
    let scene = generate_dc2(1, 30.0, &builtin_library())?;
    let map = slic_segment(&scene.cube, size, gamma, 0)?;
    let sizes = map.sizes();
    let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
    println!(
        "{} superpixels for {} pixels (target {:.0}); sizes {min}..{max}; connected: {}",
        map.superpixel_count(),
        map.pixel_count(),
        map.pixel_count() as f64 / (size * size),
        map.is_connected()
    );
    Ok(())
}
