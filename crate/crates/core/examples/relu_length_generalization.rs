//! Why a bias-free ReLU net cannot serve two lengths at once.
//!
//! `cargo run --release --example relu_length_generalization`

use modadd::constructions::relu_construction_m2;
use modadd::data::{TaskSpec, DEFAULT_DOMAIN_CAP};
use modadd::verify::{exhaustive_accuracy, relu_path_probe, relu_scale_invariance_witness};

fn main() -> modadd::Result<()> {
    let p = 7;
    let theta = relu_construction_m2(p)?;
    for m in 2..=5 {
        let acc = exhaustive_accuracy(&theta, TaskSpec::new(p, m)?, DEFAULT_DOMAIN_CAP)?;
        println!("trained for m=2, accuracy at m={m}: {acc:.4}");
    }
    let witness = relu_scale_invariance_witness(&theta, 2, 3, 1000, 11)?;
    println!("scale witness: {}", serde_json::to_string_pretty(&witness)?);
    let probe = relu_path_probe(&theta, TaskSpec::new(p, 40)?)?;
    println!("path probe at m=40 passes: {} {}", probe.passed, probe.witness.unwrap_or_default());
    Ok(())
}
