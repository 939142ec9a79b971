//! Generate scenarios from a manifest and compare against their planted truths.

use factor_alloc::genlab::{parse_manifest, serialize_manifest};
use factor_alloc::symmetry::{default_tolerance, symmetry_group};

const MANIFEST: &str = include_str!("../data/corpus.manifest");

fn main() -> factor_alloc::Result<()> {
    let corpus = parse_manifest(MANIFEST)?;
    for sc in &corpus {
        let mu = sc.generate()?;
        let group = symmetry_group(&mu, default_tolerance(&mu));
        let planted = sc.planted();
        println!(
            "{sc:<50} atoms {:>3}  V-dim {} (planted {:?})  |H| {}",
            mu.atoms().len(),
            group.invariant_dim(),
            planted.invariant_dim,
            group.order()
        );
    }
    println!("manifest round trip: {}", parse_manifest(&serialize_manifest(&corpus))? == corpus);
    Ok(())
}
