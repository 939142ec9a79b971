//! Transport a diffuse measure exactly onto an atomic one and certify the result.

use factor_alloc::alloc::{balance, verify_balance, BalanceCase};
use factor_alloc::genlab::{gen_diffuse_field, gen_poisson};
use factor_alloc::TorusGeometry;

fn main() -> factor_alloc::Result<()> {
    let g = TorusGeometry::new(2, 8.0, 32)?;
    let phi = gen_diffuse_field(&g, 2, 1.0, 21);
    let atoms = gen_poisson(&g, 0.1, 22);
    let psi = atoms.scaled(1.0 / atoms.total_mass())?;

    let result = balance(&phi, &psi)?;
    if let BalanceCase::Auxiliary { points } = &result.case {
        println!("balanced through {} auxiliary points", points.len());
    }
    let report = verify_balance(&result.map, &phi, &psi)?;
    println!("{} targets, worst relative residual {:e}", report.targets.len(), report.max_relative);
    println!("sources conserved exactly: {}", report.sources_exact);
    println!("monge defect {:.4}", result.map.monge_defect());
    print!("{}", report.certificate_csv().lines().take(4).map(|l| format!("{l}\n")).collect::<String>());
    Ok(())
}
