//! Prokhorov distance between a measure and its translates, and ball membership.

use factor_alloc::genlab::gen_diffuse_field;
use factor_alloc::{ball_contains, prokhorov, theta_shell_distance, Shell, TorusGeometry};

fn main() -> factor_alloc::Result<()> {
    let g = TorusGeometry::new(2, 8.0, 32)?;
    let mu = gen_diffuse_field(&g, 2, 1.0, 7);
    for dx in [0.25, 0.5, 1.0, 2.0] {
        let nu = mu.translate(&[dx, 0.0])?;
        let b = prokhorov(&mu, &nu, 1e-6)?;
        println!("shift {dx:>4}: d_P in [{:.6}, {:.6}]", b.lower, b.upper);
    }
    let shell = Shell::new(3);
    let sd = theta_shell_distance(&mu, &shell)?;
    println!("closest translate in shell [{}, {}]: {:?} at distance {:.6}", shell.inner, shell.outer, sd.minimizer, sd.value);

    let probe = mu.translate(&[0.25, 0.0])?;
    println!("translate by 0.25 inside ball of radius 0.3: {}", ball_contains(&mu, 0.3, &probe)?);
    Ok(())
}
