//! Generates both synthetic protocols with the bundled library and writes
//! them to scene directories.
//!
//! `cargo run --example generate_scene -- [out_dir]`

use std::path::PathBuf;

use muasv::synthgen::{generate_dc1, generate_dc2, write_scene, builtin_library};

fn main() -> muasv::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenes".into()));
    let library = builtin_library();
    for (name, scene) in [
        ("dc1", generate_dc1(1, 30.0, &library)?),
        ("dc2", generate_dc2(1, 30.0, &library)?),
    ] {
        let dir = out.join(name);
        write_scene(&scene, &dir)?;
        let snr = 10.0 * (scene.signal_energy / scene.noise_energy).log10();
        println!(
            "{name}: {}x{} pixels, {} bands, empirical SNR {snr:.2} dB -> {}",
            scene.cube.rows(),
            scene.cube.cols(),
            scene.cube.bands(),
            dir.display()
        );
    }
    Ok(())
}
