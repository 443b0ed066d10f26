//! Multi-length training at p = 11 and evaluation at length 50.
//!
//! `cargo run --release --example ood_desk -- [epochs]`

use modadd::sweep::{preset, run_sweep};

fn main() -> modadd::Result<()> {
    let mut spec = preset("ood-desk")?;
    if let Some(e) = std::env::args().nth(1) {
        spec.base.epochs = e.parse().expect("epochs");
    }
    let result = run_sweep(&spec, 1, None)?;
    for (cell, best, wd) in result.table.best_over_wd("ood_50") {
        println!("{} length 50 best-over-wd {best:.4} (wd {wd})", cell["act"]);
    }
    Ok(())
}
