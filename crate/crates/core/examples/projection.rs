//! Balance a pair with an invariant direction through a chart of the complement.

use factor_alloc::alloc::{balance, gram_schmidt_chart, verify_balance, BalanceCase, Target};
use factor_alloc::genlab::gen_diffuse_field;
use factor_alloc::{Measure, TorusGeometry};

fn main() -> factor_alloc::Result<()> {
    let chart = gram_schmidt_chart(&[vec![1.0, 1.0, 0.0]], 3)?;
    println!("chart of span(1,1,0): W = {:?}, residual {:e}", chart.w_basis(), chart.orthonormality_residual());

    // diffuse in y, uniform in x
    let g = TorusGeometry::new(2, 4.0, 16)?;
    let line = g.with_dim(1)?;
    let (a, b) = (gen_diffuse_field(&line, 2, 1.0, 1), gen_diffuse_field(&line, 3, 1.0, 2));
    let product = |f: &Measure| {
        let cells = (0..g.cell_count()).map(|i| f.cells()[g.coords(i)[1]] / 16.0).collect();
        Measure::from_cells(g.clone(), cells)
    };
    let (phi, psi) = (product(&a)?, product(&b)?);

    let result = balance(&phi, &psi)?;
    if let BalanceCase::Projected { chart, .. } = &result.case {
        println!("projected onto axes {:?}", chart.w_axes());
    }
    let x_kept = (0..g.cell_count()).all(|i| {
        let sx = g.coords(i)[0];
        result.map.cell_pieces(i).iter().all(|p| matches!(p.target, Target::Cell(t) if g.coords(t)[0] == sx))
    });
    println!("x preserved by every piece: {x_kept}");
    println!("worst residual {:e}", verify_balance(&result.map, &phi, &psi)?.max_relative);
    Ok(())
}
