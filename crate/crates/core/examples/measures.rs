//! Build measures on a torus, move them around, quantize, and round-trip the text format.

use factor_alloc::io::{parse_measure, serialize_measure};
use factor_alloc::{Atom, Measure, TorusGeometry};

fn main() -> factor_alloc::Result<()> {
    let g = TorusGeometry::new(2, 4.0, 8)?;
    let cells: Vec<f64> = (0..g.cell_count()).map(|i| 1.0 + (i % 5) as f64).collect();
    let mu = Measure::new(g.clone(), cells, vec![Atom::new(vec![0.5, 3.25], 2.0)])?;
    println!("cells {} atoms {} total {}", mu.cells().len(), mu.atoms().len(), mu.total_mass());

    // grid shifts are exact, including across the seam
    let moved = mu.translate(&[3.5, -1.0])?;
    println!("atom after shift: {:?}", moved.atoms()[0].position);
    println!("shift back matches: {}", moved.translate(&[-3.5, 1.0])? == mu);

    // an off-grid shift is approximated by the nearest grid shift
    let (_, kind) = mu.translate_approx(&[0.3, 0.0])?;
    println!("off-grid shift: {kind:?}");

    let coarse = mu.quantize(4, 0.25)?;
    println!("quantized to {} cells, total {}", coarse.cells().len(), coarse.total_mass());

    let text = serialize_measure(&mu);
    println!("serialized {} lines; round trip exact: {}", text.lines().count(), parse_measure(&text)? == mu);
    Ok(())
}
