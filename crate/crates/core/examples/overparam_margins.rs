//! Wide networks under Muon: does the weight decay with the largest
//! normalized margin also give the best test accuracy?
//!
//! `cargo run --release --example overparam_margins -- [epochs]`

use modadd::sweep::{preset, run_sweep};

fn main() -> modadd::Result<()> {
    let epochs = std::env::args().nth(1).map(|e| e.parse().expect("epochs"));
    for (name, margin) in [("overparam-sine", "norm_margin_sine"), ("overparam-relu", "norm_margin_relu")] {
        let mut spec = preset(name)?;
        if let Some(e) = epochs {
            spec.base.epochs = e;
        }
        let table = run_sweep(&spec, 1, None)?.table;
        println!("{name}");
        for cell in table.cells() {
            let get = |m: &str| table.get(&cell, m).map_or(f64::NAN, |r| r.mean);
            println!(
                "  wd {:<6} train {:.4} test {:.4} pct05 margin {:.4e} normalized {:.4e}",
                cell["optim.weight_decay"],
                get("train_acc"),
                get("test_acc"),
                get("pct05_margin"),
                get(margin)
            );
        }
    }
    Ok(())
}
