//! Stable fair tessellation: every point of a pattern receives an equal share of mass.

use crate::error::{Error, Result};
use crate::geometry::{lex_cmp, MAX_DIM};
use crate::measure::Measure;
use crate::pattern::PointPattern;

use super::{grain, AllocationMap, Piece, Source, Target};

struct Site {
    source: Source,
    position: [f64; MAX_DIM],
    mass: f64,
}

fn sites(mu: &Measure) -> Vec<Site> {
    let g = mu.geometry();
    let mut out: Vec<Site> = mu
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(i, &m)| Site { source: Source::Cell(i), position: g.cell_center(i), mass: m })
        .collect();
    for (k, a) in mu.atoms().iter().enumerate() {
        let mut position = [0.0; MAX_DIM];
        position[..a.position.len()].copy_from_slice(&a.position);
        out.push(Site { source: Source::Atom(k), position, mass: a.mass });
    }
    out
}

/// Allocates every cell and atom of `mu` to the points of `p` so that each point
/// receives `|mu| / |p|`, with no site and point both preferring each other over
/// their current partners.
///
/// Both sides rank partners by torus distance. Distance ties are broken by the
/// wrapped offset from point to site, which keeps the result equivariant under
/// grid translations. Every site's outgoing pieces sum to its mass exactly.
pub fn fair_tessellation(mu: &Measure, p: &PointPattern) -> Result<AllocationMap> {
    let g = mu.geometry();
    if p.geometry() != g {
        return Err(Error::GeometryMismatch);
    }
    if p.is_empty() {
        return Err(Error::EmptyPattern);
    }
    let d = g.dim();
    let half = 0.5 * g.side();
    let sites = sites(mu);
    let points = p.points();
    let cap = mu.total_mass() / points.len() as f64;

    struct Pair {
        dist: f64,
        offset: [f64; MAX_DIM],
        site: u32,
        point: u32,
    }
    let mut pairs = Vec::with_capacity(sites.len() * points.len());
    for (s, site) in sites.iter().enumerate() {
        for (k, x) in points.iter().enumerate() {
            let mut offset = [0.0; MAX_DIM];
            for a in 0..d {
                let w = g.wrap(site.position[a] - x[a]);
                offset[a] = if w > half { w - g.side() } else { w };
            }
            pairs.push(Pair {
                dist: g.torus_distance(&site.position, x),
                offset,
                site: s as u32,
                point: k as u32,
            });
        }
    }
    // Pairs sharing (distance, offset) share neither site nor point, so their
    // relative order does not affect the outcome.
    pairs.sort_unstable_by(|a, b| {
        a.dist.total_cmp(&b.dist).then_with(|| lex_cmp(&a.offset[..d], &b.offset[..d]))
    });

    let mut rem_site: Vec<f64> = sites.iter().map(|s| s.mass).collect();
    let mut rem_cap = vec![cap; points.len()];
    let mut nearest: Vec<Option<usize>> = vec![None; sites.len()];
    let mut out: Vec<Vec<Piece>> = (0..sites.len()).map(|_| Vec::new()).collect();
    for pair in &pairs {
        let (s, k) = (pair.site as usize, pair.point as usize);
        nearest[s].get_or_insert(k);
        if rem_site[s] <= 0.0 || rem_cap[k] <= 0.0 {
            continue;
        }
        let take = if rem_site[s] <= rem_cap[k] {
            rem_site[s]
        } else {
            let q = grain(sites[s].mass);
            (rem_cap[k] / q).floor() * q
        };
        if take <= 0.0 {
            continue;
        }
        out[s].push(Piece { target: Target::Point(k), mass: take });
        rem_site[s] -= take;
        rem_cap[k] -= take;
    }
    // Rounding can leave a few ulps unplaced once every point is full.
    for (s, rest) in rem_site.iter().enumerate() {
        if *rest > 0.0 {
            let k = nearest[s].expect("every site is paired with every point");
            super::push_merged(&mut out[s], Target::Point(k), *rest);
        }
    }

    let mut map = AllocationMap::empty(g.clone(), mu.atoms().len());
    for (site, pieces) in sites.iter().zip(out) {
        map.set(site.source, pieces);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TorusGeometry;
    use crate::measure::Atom;

    #[test]
    fn uniform_line_splits_in_halves() {
        let g = TorusGeometry::new(1, 1.0, 8).unwrap();
        let mu = Measure::uniform(g.clone(), 1.0).unwrap();
        let p = PointPattern::new(g, vec![vec![0.0], vec![0.5]]);
        let map = fair_tessellation(&mu, &p).unwrap();
        let inc = map.incoming();
        assert!((inc[&Target::Point(0)] - 0.5).abs() < 1e-15);
        assert!((inc[&Target::Point(1)] - 0.5).abs() < 1e-15);
        // cells 0 and 7 are nearest to the point at 0
        assert_eq!(map.cell_pieces(0)[0].target, Target::Point(0));
        assert_eq!(map.cell_pieces(7)[0].target, Target::Point(0));
        assert_eq!(map.cell_pieces(3)[0].target, Target::Point(1));
    }

    #[test]
    fn crowded_point_overflows_to_the_next() {
        // all mass sits next to the first point, so half must travel
        let g = TorusGeometry::new(1, 4.0, 4).unwrap();
        let mu = Measure::new(g.clone(), vec![0.0; 4], vec![Atom::new(vec![0.25], 2.0)]).unwrap();
        let p = PointPattern::new(g, vec![vec![0.0], vec![2.0]]);
        let map = fair_tessellation(&mu, &p).unwrap();
        let pieces = map.atom_pieces(0);
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces[0], Piece { target: Target::Point(0), mass: 1.0 });
        assert_eq!(pieces[1], Piece { target: Target::Point(1), mass: 1.0 });
    }

    #[test]
    fn sources_are_conserved_exactly() {
        let g = TorusGeometry::new(2, 4.0, 16).unwrap();
        let cells: Vec<f64> = (0..256).map(|i| 0.1 + ((i * 37) % 11) as f64 / 7.0).collect();
        let mu = Measure::from_cells(g.clone(), cells).unwrap();
        let p = PointPattern::new(g, vec![vec![0.0, 0.0], vec![1.0, 3.0], vec![2.5, 1.25]]);
        let map = fair_tessellation(&mu, &p).unwrap();
        for (i, &m) in mu.cells().iter().enumerate() {
            let out: f64 = map.cell_pieces(i).iter().map(|p| p.mass).sum();
            assert_eq!(out, m, "cell {i}");
        }
        let cap = mu.total_mass() / 3.0;
        for v in map.incoming().values() {
            assert!((v - cap).abs() <= 1e-12 * cap);
        }
    }
}
