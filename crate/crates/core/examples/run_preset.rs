//! Runs a canonical preset at reduced size and writes its output directory.
//!
//! `cargo run --release --example run_preset -- fig4 40 /tmp/fig4`

use std::path::PathBuf;

use cavnl::experiments::{presets, run};

fn main() -> cavnl::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "fig3".to_string());
    let n_traj: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("cavnl-example"));
    for (label, mut cfg) in presets::preset(&name)? {
        if cfg.experiment.uses_trajectories() {
            cfg.n_traj = n_traj;
        }
        cfg.convergence.enabled = false;
        let dir = out.join(&label);
        let manifest = run(&cfg, &dir)?;
        println!("{label}: {} in {}", manifest.files.table, dir.display());
        for (k, v) in manifest.diagnostics.iter().filter(|(k, _)| k.starts_with("window_mean")) {
            println!("  {k} = {v:.4}");
        }
    }
    Ok(())
}
