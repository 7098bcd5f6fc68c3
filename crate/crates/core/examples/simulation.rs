//! A small run of the disk experiment: sample the bump, fit, extend and
//! measure the error on a grid.

use c11fit::sim::{run_sweep, SimConfig};

fn main() -> c11fit::Result<()> {
    let dir = std::env::temp_dir().join("c11fit_simulation_example");
    std::fs::create_dir_all(&dir)?;
    let configs: Vec<SimConfig> = [8, 23, 38]
        .into_iter()
        .map(|n| SimConfig {
            n,
            grid_per_axis: 64,
            surface_path: Some(dir.join(format!("surface_n{n}.csv"))),
            ..SimConfig::default()
        })
        .collect();
    let out = dir.join("records.csv");
    let _ = std::fs::remove_file(&out);
    for r in run_sweep(&configs, 1, &out)? {
        println!(
            "n = {:>3}: M = {:.3}, sup error {:.4}, rmse {:.4}, {:.1}s",
            r.n, r.m, r.sup_error, r.rmse, r.runtime_seconds
        );
    }
    println!("records and surfaces in {}", dir.display());
    Ok(())
}
