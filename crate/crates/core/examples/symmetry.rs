//! Recover a planted lattice of symmetries and the shell index it forces.

use factor_alloc::genlab::{gen_lattice_symmetric, gen_with_invariant_direction, lattice_grid_vectors};
use factor_alloc::symmetry::{default_tolerance, invariant_directions, shell_index, symmetry_group};
use factor_alloc::TorusGeometry;

fn main() -> factor_alloc::Result<()> {
    let g = TorusGeometry::new(2, 4.0, 64)?;
    for (name, gens) in [("unit", [[1.0, 0.0], [0.0, 1.0]]), ("half", [[0.5, 0.0], [0.0, 0.5]]), ("quarter", [[0.25, 0.0], [0.0, 0.25]])] {
        let gens: Vec<Vec<f64>> = gens.iter().map(|v| v.to_vec()).collect();
        let mu = gen_lattice_symmetric(&g, &lattice_grid_vectors(&g, &gens)?, 11)?;
        let group = symmetry_group(&mu, default_tolerance(&mu));
        let shell = shell_index(&group)?;
        println!(
            "{name:>7} lattice: |H| = {:>3}, generators {:?}, gap {}, N = {}",
            group.order(),
            group.generator_vectors(),
            group.gap(),
            shell.index
        );
    }

    let flat = gen_with_invariant_direction(&g, &[1], 5)?;
    let v = invariant_directions(&flat, default_tolerance(&flat));
    println!("constant along y: invariant directions {v:?}");
    Ok(())
}
