//! Scores an MUA-SV estimate with every metric and prints the report table.

use muasv::baselines::unmix_scls;
use muasv::cli::format_report;
use muasv::metrics::{mse_abundance, mse_endmembers, mse_reconstruction, sam_endmembers};
use muasv::mua_sv::{run_mua_sv, MuaSvParams};
use muasv::synthgen::{builtin_library, generate_dc1};
use muasv::MetricsReport;

fn main() -> muasv::Result<()> {
    let library = builtin_library();
    let scene = generate_dc1(3, 30.0, &library)?;
    let (init, _) = unmix_scls(&scene.cube, &library)?;
    let out = run_mua_sv(&scene.cube, &library, &init, &MuaSvParams::default())?;
    let report = MetricsReport {
        mse_a: mse_abundance(&scene.truth_abundances, &out.abundances)?,
        mse_m: Some(mse_endmembers(&scene.truth_field, &out.field)?),
        mse_y: Some(mse_reconstruction(&scene.cube, &out.field, &out.abundances)?),
        sam_m: Some(sam_endmembers(&scene.truth_field, &out.field)?),
        wall_time_s: out.wall_time_s,
    };
    print!("{}", format_report(&report));
    Ok(())
}
