//! Orthonormal charts of the complement of an invariant subspace, and lifting a
//! chart allocation back to the full torus.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::measure::{axis_set, Measure};

use super::{grain, push_merged, AllocationMap, Piece, Source, Target};

/// Orthonormal bases of `V` and of its complement `W` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearChart {
    dim: usize,
    v_basis: Vec<Vec<f64>>,
    w_basis: Vec<Vec<f64>>,
}

const DEGENERATE: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Removes the components along `basis` (twice, for stability) and normalizes.
/// Returns `None` when nothing independent is left.
fn orthonormalize(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let before = dot(&v, &v).sqrt();
    for _ in 0..2 {
        for b in basis {
            let c = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    let norm = dot(&v, &v).sqrt();
    if norm <= DEGENERATE * before.max(1.0) {
        return None;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    Some(v)
}

/// Orthonormalizes `v_basis` and completes it with coordinate axes projected onto
/// the complement, in axis order.
pub fn gram_schmidt_chart(v_basis: &[Vec<f64>], dim: usize) -> Result<LinearChart> {
    let mut v = Vec::new();
    for b in v_basis {
        if b.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: b.len() });
        }
        v.push(orthonormalize(b.clone(), &v).ok_or(Error::DegenerateBasis)?);
    }
    let mut w: Vec<Vec<f64>> = Vec::new();
    for axis in 0..dim {
        let mut e = vec![0.0; dim];
        e[axis] = 1.0;
        let all: Vec<Vec<f64>> = v.iter().chain(&w).cloned().collect();
        if let Some(u) = orthonormalize(e, &all) {
            w.push(u);
        }
        if v.len() + w.len() == dim {
            break;
        }
    }
    debug_assert_eq!(w.len(), dim - v.len());
    Ok(LinearChart { dim, v_basis: v, w_basis: w })
}

impl LinearChart {
    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    /// Dimension `k` of the chart space `W`.
    pub fn rank(&self) -> usize {
        self.w_basis.len()
    }

    pub fn v_basis(&self) -> &[Vec<f64>] {
        &self.v_basis
    }

    pub fn w_basis(&self) -> &[Vec<f64>] {
        &self.w_basis
    }

    /// Chart coordinates of `x`.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        self.w_basis.iter().map(|w| dot(w, x)).collect()
    }

    /// Largest entry of `B^T B - I` over the combined basis `[V | W]`.
    pub fn orthonormality_residual(&self) -> f64 {
        let all: Vec<&Vec<f64>> = self.v_basis.iter().chain(&self.w_basis).collect();
        let mut worst: f64 = 0.0;
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }

    /// The coordinate axes spanning `W`, when the chart is axis-aligned.
    pub fn w_axes(&self) -> Option<Vec<usize>> {
        let mut axes = Vec::new();
        for w in &self.w_basis {
            let big: Vec<usize> = (0..self.dim).filter(|&a| w[a].abs() > 1e-12).collect();
            if big.len() != 1 || (w[big[0]] - 1.0).abs() > 1e-12 {
                return None;
            }
            axes.push(big[0]);
        }
        Some(axes)
    }
}

/// Lifts an allocation of the projected measures back to the full torus. A cell
/// `(v, w)` with `v` the coordinates along `V` sends its mass to `(v, w')` in the
/// proportions `tau_w` uses for `w`; atom targets go to the atoms of `psi` over the
/// same chart position inside the same `V`-cell, split by mass.
pub fn extend_allocation(tau_w: &AllocationMap, chart: &LinearChart, phi: &Measure, psi: &Measure) -> Result<AllocationMap> {
    let g = phi.geometry();
    if psi.geometry() != g {
        return Err(Error::GeometryMismatch);
    }
    if chart.ambient_dim() != g.dim() {
        return Err(Error::ChartMismatch(format!("chart is {}-dimensional, torus is {}", chart.ambient_dim(), g.dim())));
    }
    let wg = tau_w.geometry();
    if wg.dim() != chart.rank() || wg.n() != g.n() || wg.side() != g.side() {
        return Err(Error::ChartMismatch("allocation does not live on the chart torus".into()));
    }
    let keep = chart.w_axes().ok_or_else(|| Error::IncompatibleDirection("chart is not axis-aligned".into()))?;
    let v_axes = axis_set(g, chart.v_basis())?;
    let psi_w = psi.minkowski_project(chart.v_basis())?;

    // full atoms of psi grouped by (chart atom, V-cell)
    let mut fibers: HashMap<(usize, Vec<usize>), Vec<(usize, f64)>> = HashMap::new();
    for (k, a) in psi.atoms().iter().enumerate() {
        let y: Vec<f64> = keep.iter().map(|&ax| a.position[ax]).collect();
        let Some(j) = psi_w.atoms().iter().position(|b| b.position == y) else {
            return Err(Error::ChartMismatch(format!("atom {k} has no projection")));
        };
        let c = g.coords(g.cell_of(&a.position));
        let v: Vec<usize> = v_axes.iter().map(|&ax| c[ax]).collect();
        fibers.entry((j, v)).or_default().push((k, a.mass));
    }

    let w_mass: Vec<f64> = (0..wg.cell_count())
        .map(|w| crate::measure::canonical_sum(tau_w.cell_pieces(w).iter().map(|p| p.mass)))
        .collect();
    let mut map = AllocationMap::empty(g.clone(), 0);
    for (i, &m) in phi.cells().iter().enumerate() {
        if m <= 0.0 {
            continue;
        }
        let c = g.coords(i);
        let wc: Vec<usize> = keep.iter().map(|&a| c[a]).collect();
        let w = wg.index(&wc);
        let inner = tau_w.cell_pieces(w);
        if inner.is_empty() || w_mass[w] <= 0.0 {
            return Err(Error::ChartMismatch(format!("chart cell {w} carries no allocation")));
        }
        let v: Vec<usize> = v_axes.iter().map(|&a| c[a]).collect();
        let mut wanted: Vec<(Target, f64)> = Vec::new();
        for piece in inner {
            let share = m * (piece.mass / w_mass[w]);
            match piece.target {
                Target::Cell(wt) => {
                    let wtc = wg.coords(wt);
                    let mut full = c;
                    for (slot, &a) in keep.iter().enumerate() {
                        full[a] = wtc[slot];
                    }
                    wanted.push((Target::Cell(g.index(&full[..g.dim()])), share));
                }
                Target::Atom(j) => {
                    let Some(atoms) = fibers.get(&(j, v.clone())) else {
                        return Err(Error::ChartMismatch(format!("no atoms over chart atom {j} in this fiber")));
                    };
                    let fiber_mass = crate::measure::canonical_sum(atoms.iter().map(|a| a.1));
                    for &(k, am) in atoms {
                        wanted.push((Target::Atom(k), share * (am / fiber_mass)));
                    }
                }
                Target::Point(_) => return Err(Error::ChartMismatch("chart allocation targets points".into())),
            }
        }
        map.set(Source::Cell(i), on_grain(m, &wanted));
    }
    Ok(map)
}

/// Rounds the shares onto the grain of `m`, giving the rounding remainder to the
/// last piece, so the pieces add up to `m` exactly.
fn on_grain(m: f64, wanted: &[(Target, f64)]) -> Vec<Piece> {
    let q = grain(m);
    let mut out = Vec::new();
    let mut rest = m;
    for (idx, &(t, x)) in wanted.iter().enumerate() {
        let take = if idx + 1 == wanted.len() { rest } else { ((x / q).round() * q).min(rest) };
        if take > 0.0 {
            push_merged(&mut out, t, take);
            rest -= take;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_chart() {
        let c = gram_schmidt_chart(&[vec![1.0, 0.0]], 2).unwrap();
        assert_eq!(c.rank(), 1);
        assert_eq!(c.w_basis(), &[vec![0.0, 1.0]]);
        assert_eq!(c.w_axes(), Some(vec![1]));
    }

    #[test]
    fn oblique_chart_is_orthonormal() {
        let c = gram_schmidt_chart(&[vec![1.0, 1.0, 0.0]], 3).unwrap();
        assert_eq!(c.rank(), 2);
        assert!(c.orthonormality_residual() <= 1e-12);
        assert_eq!(c.w_axes(), None);
        let x = c.coordinates(&[1.0, 1.0, 0.0]);
        assert!(x.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn trivial_subspace_gives_identity() {
        let c = gram_schmidt_chart(&[], 2).unwrap();
        assert_eq!(c.w_basis(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn dependent_basis_is_degenerate() {
        let r = gram_schmidt_chart(&[vec![1.0, 2.0], vec![2.0, 4.0]], 2);
        assert!(matches!(r, Err(Error::DegenerateBasis)));
    }

    #[test]
    fn shares_add_up_exactly() {
        let m = 0.1 + 0.2;
        let pieces = on_grain(m, &[(Target::Cell(0), m / 3.0), (Target::Cell(1), m / 3.0), (Target::Cell(2), m / 3.0)]);
        let s: f64 = pieces.iter().map(|p| p.mass).sum();
        assert_eq!(s, m);
    }
}
