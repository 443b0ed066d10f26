//! Sine vs ReLU in the small-width regime at (m, p) = (3, 31).
//!
//! `cargo run --release --example underparam -- [epochs]`

use std::time::Instant;

use modadd::data::TaskSpec;
use modadd::model::Activation;
use modadd::trainer::{train, TrainConfig};

fn main() -> modadd::Result<()> {
    let epochs = std::env::args().nth(1).map_or(5000, |s| s.parse().expect("epochs"));
    let spec = TaskSpec::new(31, 3)?;
    for act in [Activation::Sine, Activation::Relu] {
        let cfg = TrainConfig::new(spec, 64, act, 3000, epochs);
        let start = Instant::now();
        let runs = train(&cfg)?;
        let accs: Vec<f64> = runs.iter().filter_map(|r| r.last()).map(|r| r.test_acc).collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        println!("{:<4} test acc per seed {accs:?} mean {mean:.4} ({:.1}s)", act.name(), start.elapsed().as_secs_f64());
    }
    Ok(())
}
