//! Build every explicit network and certify it on the full domain.
//!
//! `cargo run --release --example constructions`

use modadd::data::{TaskSpec, DEFAULT_DOMAIN_CAP};
use modadd::verify::{certify_construction, ConstructionKind};

fn main() -> modadd::Result<()> {
    let cases = [
        (ConstructionKind::SineWidth2, 3, 7),
        (ConstructionKind::SineBiased, 5, 11),
        (ConstructionKind::SineHalfp, 2, 8),
        (ConstructionKind::SineHighmargin, 3, 97),
        (ConstructionKind::ReluM2, 2, 11),
        (ConstructionKind::ReluGeneral { tau: 0.1 }, 3, 5),
    ];
    for (kind, m, p) in cases {
        let spec = TaskSpec::new(p, m)?;
        let width = kind.build(spec)?.width();
        let cert = certify_construction(kind, spec, DEFAULT_DOMAIN_CAP)?;
        let w = cert.witness.as_ref().expect("certificates carry a witness");
        println!(
            "{:<16} m={m} p={p:<3} width {width:<6} accuracy {:.6} min margin {:.6} {}",
            kind.name(),
            w["accuracy"].as_f64().unwrap_or(f64::NAN),
            w["min_margin"].as_f64().unwrap_or(f64::NAN),
            if cert.passed { "ok" } else { "FAILED" }
        );
    }
    Ok(())
}
