//! Monotone matching inside one tessellation cell along a Hilbert curve.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::{lex_cmp, TorusGeometry, MAX_DIM};
use crate::measure::Measure;
use crate::pattern::PointPattern;

use super::hilbert::{bits_for, hilbert_index};
use super::tessellation::fair_tessellation;
use super::{check_totals, grain, push_merged, AllocationMap, Piece, Source, Target};

/// Ordering key along the curve anchored at a point: the curve position of the
/// containing cell, then cells before atoms, then the wrapped atom offset.
#[derive(Debug, Clone, Copy)]
struct CurveKey {
    h: u64,
    atom: bool,
    offset: [f64; MAX_DIM],
}

impl CurveKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.h
            .cmp(&other.h)
            .then(self.atom.cmp(&other.atom))
            .then_with(|| lex_cmp(&self.offset, &other.offset))
    }
}

struct Curve<'a> {
    g: &'a TorusGeometry,
    anchor: Vec<f64>,
    anchor_cell: [usize; MAX_DIM],
    bits: u32,
}

impl<'a> Curve<'a> {
    fn new(g: &'a TorusGeometry, anchor: &[f64]) -> Self {
        let anchor_cell = g.coords(g.cell_of(anchor));
        Self { g, anchor: anchor.to_vec(), anchor_cell, bits: bits_for(g.n()) }
    }

    fn cell_h(&self, idx: usize) -> u64 {
        let n = self.g.n();
        let c = self.g.coords(idx);
        let mut rel = [0u32; MAX_DIM];
        for a in 0..self.g.dim() {
            rel[a] = ((c[a] + n - self.anchor_cell[a]) % n) as u32;
        }
        hilbert_index(&rel[..self.g.dim()], self.bits)
    }

    fn key(&self, mu: &Measure, target: Target) -> CurveKey {
        match target {
            Target::Cell(i) => CurveKey { h: self.cell_h(i), atom: false, offset: [0.0; MAX_DIM] },
            Target::Atom(k) => {
                let pos = &mu.atoms()[k].position;
                let mut offset = [0.0; MAX_DIM];
                for (a, o) in offset.iter_mut().enumerate().take(self.g.dim()) {
                    *o = self.g.wrap(pos[a] - self.anchor[a]);
                }
                CurveKey { h: self.cell_h(self.g.cell_of(pos)), atom: true, offset }
            }
            Target::Point(_) => unreachable!("points are never matching targets"),
        }
    }
}

/// Walks both cumulative distributions in order and emits `(source cell, target, mass)`.
/// Source pieces are multiples of the grain of the source's full mass, so the
/// pieces of one source always add back to it exactly.
fn cdf_match(
    sources: &[(usize, f64)],
    targets: &[(Target, f64)],
    full_mass: impl Fn(usize) -> f64,
) -> Vec<(usize, Target, f64)> {
    let mut out = Vec::new();
    let Some(last) = targets.last() else {
        return out;
    };
    let mut j = 0;
    let mut rt = targets[0].1;
    for &(src, amount) in sources {
        let q = grain(full_mass(src));
        let mut rs = amount;
        while rs > 0.0 {
            if j >= targets.len() {
                out.push((src, last.0, rs));
                break;
            }
            if rs <= rt {
                out.push((src, targets[j].0, rs));
                rt -= rs;
                break;
            }
            let take = (rt / q).floor() * q;
            if take > 0.0 {
                out.push((src, targets[j].0, take));
                rs -= take;
            }
            j += 1;
            rt = targets.get(j).map_or(0.0, |t| t.1);
        }
    }
    out
}

/// Matches `phi_cell` onto `psi_cell` by walking a Hilbert curve started at
/// the cell containing `anchor`. Both measures live on the same torus and
/// carry equal mass; `phi_cell` must be diffuse.
pub fn within_cell_match(phi_cell: &Measure, psi_cell: &Measure, anchor: &[f64]) -> Result<AllocationMap> {
    let g = phi_cell.geometry();
    if psi_cell.geometry() != g {
        return Err(Error::GeometryMismatch);
    }
    g.check_dim(anchor.len())?;
    if !phi_cell.is_diffuse() {
        return Err(Error::NotDiffuse);
    }
    let (a, b) = (phi_cell.total_mass(), psi_cell.total_mass());
    if (a - b).abs() > 1e-9 * a.max(b) {
        return Err(Error::MassMismatch(a, b));
    }
    let curve = Curve::new(g, anchor);
    let sources: Vec<(usize, f64)> = phi_cell.cells().iter().copied().enumerate().filter(|&(_, m)| m > 0.0).collect();
    let mut targets: Vec<(Target, f64)> = psi_cell
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(j, &m)| (Target::Cell(j), m))
        .chain(psi_cell.atoms().iter().enumerate().map(|(k, at)| (Target::Atom(k), at.mass)))
        .collect();
    let mut sources: Vec<(CurveKey, usize, f64)> =
        sources.into_iter().map(|(i, m)| (curve.key(phi_cell, Target::Cell(i)), i, m)).collect();
    sources.sort_by(|x, y| x.0.cmp(&y.0));
    targets.sort_by(|x, y| curve.key(psi_cell, x.0).cmp(&curve.key(psi_cell, y.0)));
    let sources: Vec<(usize, f64)> = sources.into_iter().map(|(_, i, m)| (i, m)).collect();
    let matched = cdf_match(&sources, &targets, |i| phi_cell.cells()[i]);
    Ok(assemble(g, matched))
}

fn assemble(g: &TorusGeometry, pieces: Vec<(usize, Target, f64)>) -> AllocationMap {
    let mut per_cell: Vec<Vec<Piece>> = vec![Vec::new(); g.cell_count()];
    for (src, target, mass) in pieces {
        push_merged(&mut per_cell[src], target, mass);
    }
    let mut map = AllocationMap::empty(g.clone(), 0);
    for (i, pieces) in per_cell.into_iter().enumerate() {
        if !pieces.is_empty() {
            map.set(Source::Cell(i), pieces);
        }
    }
    map
}

/// Balances a diffuse `phi` onto `psi` through an auxiliary point pattern:
/// both measures are fairly tessellated by `p`, then each point's share of
/// `phi` is matched monotonically onto its share of `psi`.
pub fn balance_with_auxiliary(phi: &Measure, psi: &Measure, p: &PointPattern) -> Result<AllocationMap> {
    let g = phi.geometry();
    if psi.geometry() != g || p.geometry() != g {
        return Err(Error::GeometryMismatch);
    }
    if !phi.is_diffuse() {
        return Err(Error::NotDiffuse);
    }
    check_totals(phi, psi)?;
    let t_phi = fair_tessellation(phi, p)?;
    let t_psi = fair_tessellation(psi, p)?;

    let mut sources: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.len()];
    for i in 0..g.cell_count() {
        for piece in t_phi.cell_pieces(i) {
            if let Target::Point(k) = piece.target {
                sources[k].push((i, piece.mass));
            }
        }
    }
    let mut targets: Vec<Vec<(Target, f64)>> = vec![Vec::new(); p.len()];
    for (source, pieces) in t_psi.iter() {
        let target = match source {
            Source::Cell(j) => Target::Cell(j),
            Source::Atom(k) => Target::Atom(k),
        };
        for piece in pieces {
            if let Target::Point(k) = piece.target {
                targets[k].push((target, piece.mass));
            }
        }
    }

    let mut matched = Vec::new();
    for (k, x) in p.points().iter().enumerate() {
        let curve = Curve::new(g, x);
        let mut src: Vec<(CurveKey, usize, f64)> =
            sources[k].iter().map(|&(i, m)| (curve.key(phi, Target::Cell(i)), i, m)).collect();
        src.sort_by(|a, b| a.0.cmp(&b.0));
        let src: Vec<(usize, f64)> = src.into_iter().map(|(_, i, m)| (i, m)).collect();
        let mut tgt: Vec<(CurveKey, Target, f64)> =
            targets[k].iter().map(|&(t, m)| (curve.key(psi, t), t, m)).collect();
        tgt.sort_by(|a, b| a.0.cmp(&b.0));
        let tgt: Vec<(Target, f64)> = tgt.into_iter().map(|(_, t, m)| (t, m)).collect();
        matched.extend(cdf_match(&src, &tgt, |i| phi.cells()[i]));
    }
    Ok(assemble(g, matched))
}
