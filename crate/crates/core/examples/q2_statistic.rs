//! Collision statistic of a large sample against its expectation.
//!
//! `cargo run --release --example q2_statistic`

use modadd::data::{sample_set, TaskSpec};
use modadd::metrics::{q2_hoeffding_halfwidth, q2_squared_expectation, q2_statistic};
use modadd::numerics::RngStream;

fn main() -> modadd::Result<()> {
    let spec = TaskSpec::new(53, 4)?;
    let n = 100_000;
    let set = sample_set(spec, n, &mut RngStream::new(1337, 0))?;
    let q2 = q2_statistic(&set)?;
    let expected = q2_squared_expectation(spec);
    let half = q2_hoeffding_halfwidth(spec, n, 0.01);
    println!("Q2² = {:.5}, expectation {expected:.5}, band ±{half:.5}", q2 * q2);
    Ok(())
}
