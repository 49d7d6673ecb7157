//! Runs the overlap × intervals grid for every filter and prints the
//! best/average/worst table plus the share of near-perfect cells.
//!
//! cargo run --release --example grid_bench -- [smoke|desk|paper]

use tae_mapper::bench::{filters_in, format_table, fraction_at_most, run_grid};
use tae_mapper::config::RunConfig;
use tae_mapper::dataset::{generate_spheres, split_and_scale};

fn main() -> tae_mapper::Result<()> {
    let preset = std::env::args().nth(1).unwrap_or_else(|| "smoke".into());
    let cfg = RunConfig::preset(&preset)?;
    let cloud = generate_spheres(&cfg.dataset)?;
    let split = split_and_scale(&cloud, cfg.test_fraction, cfg.seed)?;
    println!(
        "{preset}: {} train / {} test points, {} grid cells per filter",
        split.train.len(),
        split.test.len(),
        cfg.grid.cells()
    );
    let started = std::time::Instant::now();
    let records = run_grid(&split, &cfg.grid, &cfg.mapper)?;
    print!("{}", format_table(&records));
    for kind in filters_in(&records) {
        println!("{kind:>15}: {:.3} of cells with m <= 1.05", fraction_at_most(&records, kind, 1.05));
    }
    println!("{:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
