//! The numerical identities behind the constructions, checked one by one.
//!
//! `cargo run --release --example lemmas`

use modadd::constructions::{lambda, newton_expansion, polarize, relu_spline_power_exact, total_terms};
use modadd::data::TaskSpec;
use modadd::numerics::RngStream;
use modadd::verify::{check_gram_identity, check_newton_reconstruction, check_polarization, check_spline_bound, check_trigpoly, check_uniformity};

fn main() -> modadd::Result<()> {
    let gram = (2..=64).map(check_gram_identity).collect::<modadd::Result<Vec<_>>>()?;
    println!("gram identity, p in 2..=64: {} passed", gram.iter().filter(|c| c.passed).count());

    let uniform = check_uniformity(TaskSpec::new(6, 4)?);
    println!("labels uniform on bags of 4 tokens mod 6: {}", uniform.passed);

    let terms = polarize(3)?;
    println!("x1·x2·x3 polarizes into {} signed cubes", terms.len());
    println!("polarization s=6: {}", check_polarization(6, 100, &mut RngStream::new(7, 0))?.passed);

    for m in 1..=6 {
        let n = newton_expansion(m)?.len();
        println!("newton m={m}: {n} terms (count formula {}), λ = {}", total_terms(m), lambda(m)?);
    }
    println!("newton reconstruction m=5: {}", check_newton_reconstruction(5, 100, 1)?.passed);

    for unit in relu_spline_power_exact(2, 7)? {
        print!("({}, {}, {}) ", unit.a, unit.b, unit.c);
    }
    println!();
    println!("spline s=3 N=16 within bound: {}", check_spline_bound(3, 16)?.passed);
    println!("trig-sum polynomialization: {}", check_trigpoly(100, 3)?.passed);
    Ok(())
}
