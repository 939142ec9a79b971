//! Split a diffuse measure into equal shares, one per point.

use factor_alloc::alloc::{fair_tessellation, Target};
use factor_alloc::genlab::gen_diffuse_field;
use factor_alloc::{PointPattern, TorusGeometry};

fn main() -> factor_alloc::Result<()> {
    let g = TorusGeometry::new(2, 8.0, 32)?;
    let mu = gen_diffuse_field(&g, 2, 6.0, 3);
    let p = PointPattern::new(g.clone(), vec![vec![1.0, 1.0], vec![1.25, 1.0], vec![5.0, 2.5], vec![6.0, 7.0]]);
    let map = fair_tessellation(&mu, &p)?;
    for (t, mass) in map.incoming() {
        if let Target::Point(k) = t {
            println!("point {k} at {:?} receives {mass:.15}", p.points()[k]);
        }
    }
    println!("cells split between points: {:.4}", map.monge_defect());
    Ok(())
}
