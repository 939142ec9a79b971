//! Extract the factor point pattern of a measure and check it follows a shift.

use factor_alloc::factor::{extract_point_process, extract_with, ExtractConfig};
use factor_alloc::genlab::{gen_diffuse_field, gen_with_invariant_direction};
use factor_alloc::{Error, TorusGeometry};

fn main() -> factor_alloc::Result<()> {
    let g = TorusGeometry::new(2, 16.0, 64)?;
    let mu = gen_diffuse_field(&g, 3, 1.0, 4);
    let trace = extract_with(&mu, &ExtractConfig::default())?;
    println!("shell N = {}, epsilon = 1/{}", trace.shell.index, trace.m);
    println!("occupancy {} in {} clusters", trace.occupancy.len(), trace.clusters.len());
    for p in trace.representatives.points() {
        println!("  point {p:?}");
    }

    let t = [5.25, -3.0];
    let shifted = extract_point_process(&mu.translate(&t)?)?;
    println!("P(mu + t) == P(mu) + t: {}", shifted == trace.representatives.translated(&t));

    let flat = gen_with_invariant_direction(&g, &[0], 9)?;
    match extract_point_process(&flat) {
        Err(Error::HasInvariantDirection(k)) => println!("measure constant along x is rejected (dimension {k})"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
