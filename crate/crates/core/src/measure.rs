//! Finite measures on the torus: cell masses plus a list of atoms.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::{lex_cmp, GridVec, TorusGeometry};

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub position: Vec<f64>,
    pub mass: f64,
}

impl Atom {
    pub fn new(position: Vec<f64>, mass: f64) -> Self {
        Self { position, mass }
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        lex_cmp(&self.position, &other.position).then(self.mass.total_cmp(&other.mass))
    }
}

/// Cell masses in row-major order plus atoms sorted lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    geometry: TorusGeometry,
    cells: Vec<f64>,
    atoms: Vec<Atom>,
}

/// Whether a translation was carried out exactly on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftKind {
    Exact,
    Approximate,
}

/// Sum that does not depend on the order of the summands.
pub fn canonical_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

impl Measure {
    pub fn new(geometry: TorusGeometry, cells: Vec<f64>, atoms: Vec<Atom>) -> Result<Self> {
        if cells.len() != geometry.cell_count() {
            return Err(Error::InvalidMeasure(format!(
                "expected {} cells, got {}",
                geometry.cell_count(),
                cells.len()
            )));
        }
        if let Some(m) = cells.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("cell mass {m}")));
        }
        for a in &atoms {
            geometry.check_dim(a.position.len())?;
            if !(a.mass.is_finite() && a.mass > 0.0) {
                return Err(Error::InvalidMeasure(format!("atom mass {}", a.mass)));
            }
            if a.position.iter().any(|x| !(x.is_finite() && *x >= 0.0 && *x < geometry.side())) {
                return Err(Error::InvalidMeasure(format!(
                    "atom position {:?} outside [0, L)",
                    a.position
                )));
            }
        }
        let mut atoms = atoms;
        atoms.sort_by(Atom::canonical_cmp);
        // -0.0 and 0.0 compare equal but serialize differently
        let cells = cells.into_iter().map(|m| if m == 0.0 { 0.0 } else { m }).collect();
        Ok(Self { geometry, cells, atoms })
    }

    pub fn zero(geometry: TorusGeometry) -> Self {
        let cells = vec![0.0; geometry.cell_count()];
        Self { geometry, cells, atoms: Vec::new() }
    }

    /// Constant density per unit volume.
    pub fn uniform(geometry: TorusGeometry, density: f64) -> Result<Self> {
        let vol = geometry.cell_width().powi(geometry.dim() as i32);
        let cells = vec![density * vol; geometry.cell_count()];
        Self::new(geometry, cells, Vec::new())
    }

    pub fn from_cells(geometry: TorusGeometry, cells: Vec<f64>) -> Result<Self> {
        Self::new(geometry, cells, Vec::new())
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_diffuse(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Sum of all cell and atom masses, independent of their storage order.
    pub fn total_mass(&self) -> f64 {
        canonical_sum(self.cells.iter().copied().chain(self.atoms.iter().map(|a| a.mass)))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let cells = self.cells.iter().map(|m| m * factor).collect();
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.position.clone(), a.mass * factor))
            .collect();
        Self::new(self.geometry.clone(), cells, atoms)
    }

    /// Superposition `self + other`.
    pub fn plus(&self, other: &Measure) -> Result<Self> {
        if self.geometry != other.geometry {
            return Err(Error::GeometryMismatch);
        }
        let cells = self.cells.iter().zip(&other.cells).map(|(a, b)| a + b).collect();
        let atoms = self.atoms.iter().chain(&other.atoms).cloned().collect();
        Self::new(self.geometry.clone(), cells, atoms)
    }

    /// Exact translation by a displacement whose coordinates are multiples of the cell width.
    pub fn translate(&self, t: &[f64]) -> Result<Self> {
        let shift = self.geometry.to_grid_shift(t)?;
        Ok(self.translate_grid(&shift))
    }

    /// `(mu + t)(A) = mu(A - t)` for a shift in cell units.
    pub fn translate_grid(&self, shift: &[i64]) -> Self {
        let g = &self.geometry;
        let mut cells = vec![0.0; self.cells.len()];
        for (i, &m) in self.cells.iter().enumerate() {
            cells[g.shift_index(i, shift)] = m;
        }
        let h = g.cell_width();
        let mut atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| {
                let position = a
                    .position
                    .iter()
                    .zip(shift)
                    .map(|(&x, &k)| g.wrap(x + k as f64 * h))
                    .collect();
                Atom::new(position, a.mass)
            })
            .collect();
        atoms.sort_by(Atom::canonical_cmp);
        Self { geometry: g.clone(), cells, atoms }
    }

    /// Translation by an arbitrary displacement. Off-grid shifts split each cell's mass
    /// multilinearly over the neighbouring cells; atoms move exactly.
    pub fn translate_approx(&self, t: &[f64]) -> Result<(Self, ShiftKind)> {
        if let Ok(shift) = self.geometry.to_grid_shift(t) {
            return Ok((self.translate_grid(&shift), ShiftKind::Exact));
        }
        let g = &self.geometry;
        let d = g.dim();
        let h = g.cell_width();
        let mut whole = [0i64; 3];
        let mut frac = [0f64; 3];
        for a in 0..d {
            let x = t[a] / h;
            whole[a] = x.floor() as i64;
            frac[a] = x - x.floor();
        }
        let mut cells = vec![0.0; self.cells.len()];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut shift = vec![0i64; d];
            for a in 0..d {
                let up = (corner >> a) & 1 == 1;
                shift[a] = whole[a] + up as i64;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            for (i, &m) in self.cells.iter().enumerate() {
                cells[g.shift_index(i, &shift)] += w * m;
            }
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let position = a.position.iter().zip(t).map(|(&x, &s)| g.wrap(x + s)).collect();
                Atom::new(position, a.mass)
            })
            .collect();
        Ok((Self::new(g.clone(), cells, atoms)?, ShiftKind::Approximate))
    }

    /// Pools cells to resolution `r` and rounds every mass down to a multiple of `q`.
    /// Atoms keep their positions; atoms rounding to zero are dropped.
    pub fn quantize(&self, r: usize, q: f64) -> Result<Self> {
        Ok(self.quantize_counts(r, q)?.to_measure())
    }

    pub(crate) fn quantize_counts(&self, r: usize, q: f64) -> Result<Quantized> {
        let g = &self.geometry;
        if r == 0 || g.n() % r != 0 {
            return Err(Error::BadResolution { r, n: g.n() });
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::BadStep(q));
        }
        let coarse = TorusGeometry::with_resolution(g.dim(), g.side(), r)?;
        let block = g.n() / r;
        let mut pooled = vec![0.0; coarse.cell_count()];
        if block == 1 {
            pooled.copy_from_slice(&self.cells);
        } else {
            let mut members: Vec<Vec<f64>> = vec![Vec::new(); coarse.cell_count()];
            for (i, &m) in self.cells.iter().enumerate() {
                let c = g.coords(i);
                let cc: Vec<usize> = c[..g.dim()].iter().map(|&k| k / block).collect();
                members[coarse.index(&cc)].push(m);
            }
            for (p, ms) in pooled.iter_mut().zip(members) {
                *p = canonical_sum(ms.into_iter());
            }
        }
        let cells = pooled.iter().map(|&m| floor_count(m, q)).collect();
        let atoms = self
            .atoms
            .iter()
            .map(|a| (a.position.clone(), floor_count(a.mass, q)))
            .filter(|(_, k)| *k > 0)
            .collect();
        Ok(Quantized { geometry: coarse, step: q, cells, atoms })
    }

    /// Sums the measure over every fiber of an axis-aligned subspace `V`, giving the
    /// induced measure on the torus of the complementary axes.
    pub fn minkowski_project(&self, v_basis: &[Vec<f64>]) -> Result<Self> {
        let g = &self.geometry;
        let axes = axis_set(g, v_basis)?;
        if axes.len() >= g.dim() {
            return Err(Error::IncompatibleDirection(
                "subspace spans every axis; nothing left to project onto".into(),
            ));
        }
        let keep: Vec<usize> = (0..g.dim()).filter(|a| !axes.contains(a)).collect();
        let wg = g.with_dim(keep.len())?;
        let mut members: Vec<Vec<f64>> = vec![Vec::new(); wg.cell_count()];
        for (i, &m) in self.cells.iter().enumerate() {
            let c = g.coords(i);
            let wc: Vec<usize> = keep.iter().map(|&a| c[a]).collect();
            members[wg.index(&wc)].push(m);
        }
        let cells = members.into_iter().map(|ms| canonical_sum(ms.into_iter())).collect();
        let mut projected: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| Atom::new(keep.iter().map(|&k| a.position[k]).collect(), a.mass))
            .collect();
        projected.sort_by(Atom::canonical_cmp);
        let mut atoms: Vec<Atom> = Vec::new();
        let mut i = 0;
        while i < projected.len() {
            let mut j = i;
            while j < projected.len() && projected[j].position == projected[i].position {
                j += 1;
            }
            let mass = canonical_sum(projected[i..j].iter().map(|a| a.mass));
            atoms.push(Atom::new(projected[i].position.clone(), mass));
            i = j;
        }
        Self::new(wg, cells, atoms)
    }

    /// Maximum absolute per-cell difference to `other`, ignoring atoms.
    pub fn max_cell_discrepancy(&self, other: &Measure) -> f64 {
        self.cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Returns the axes spanned by an orthonormal, axis-aligned basis.
pub(crate) fn axis_set(g: &TorusGeometry, v_basis: &[Vec<f64>]) -> Result<Vec<usize>> {
    let mut axes = Vec::new();
    for v in v_basis {
        g.check_dim(v.len())?;
        let big: Vec<usize> = (0..v.len()).filter(|&a| v[a].abs() > 1e-12).collect();
        if big.len() != 1 || (v[big[0]].abs() - 1.0).abs() > 1e-12 {
            return Err(Error::IncompatibleDirection(format!("{v:?} is not axis-aligned")));
        }
        if axes.contains(&big[0]) {
            return Err(Error::IncompatibleDirection("repeated axis".into()));
        }
        axes.push(big[0]);
    }
    axes.sort_unstable();
    Ok(axes)
}

/// Largest `k` with `k * q <= m`, evaluated with the same products the caller stores.
fn floor_count(m: f64, q: f64) -> u64 {
    let mut k = (m / q).floor().max(0.0) as u64;
    while k > 0 && k as f64 * q > m {
        k -= 1;
    }
    while (k + 1) as f64 * q <= m {
        k += 1;
    }
    k
}

/// A quantized measure held as integer multiples of its step.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Quantized {
    pub geometry: TorusGeometry,
    pub step: f64,
    pub cells: Vec<u64>,
    pub atoms: Vec<(Vec<f64>, u64)>,
}

impl Quantized {
    pub fn to_measure(&self) -> Measure {
        let cells = self.cells.iter().map(|&k| k as f64 * self.step).collect();
        let atoms = self
            .atoms
            .iter()
            .map(|(p, k)| Atom::new(p.clone(), *k as f64 * self.step))
            .collect();
        Measure::new(self.geometry.clone(), cells, atoms).expect("quantized masses are valid")
    }

    /// Canonical code order: cell counts first, then atoms.
    pub fn code_cmp(&self, other: &Self) -> Ordering {
        self.cells.cmp(&other.cells).then_with(|| {
            for (a, b) in self.atoms.iter().zip(&other.atoms) {
                let o = lex_cmp(&a.0, &b.0).then(a.1.cmp(&b.1));
                if o != Ordering::Equal {
                    return o;
                }
            }
            self.atoms.len().cmp(&other.atoms.len())
        })
    }

    /// Cyclic shift; exact because only whole coarse cells move.
    pub fn translate_grid(&self, shift: &[i64]) -> Self {
        let g = &self.geometry;
        let mut cells = vec![0; self.cells.len()];
        for (i, &k) in self.cells.iter().enumerate() {
            cells[g.shift_index(i, shift)] = k;
        }
        Self { geometry: g.clone(), step: self.step, cells, atoms: self.translate_atoms(shift) }
    }

    /// Atoms moved by `shift`, in canonical order.
    pub fn translate_atoms(&self, shift: &[i64]) -> Vec<(Vec<f64>, u64)> {
        let g = &self.geometry;
        let h = g.cell_width();
        let mut atoms: Vec<(Vec<f64>, u64)> = self
            .atoms
            .iter()
            .map(|(p, k)| {
                let moved = p.iter().zip(shift).map(|(&x, &s)| g.wrap(x + s as f64 * h)).collect();
                (moved, *k)
            })
            .collect();
        atoms.sort_by(|a, b| lex_cmp(&a.0, &b.0).then(a.1.cmp(&b.1)));
        atoms
    }
}

/// Shift in the fine grid expressed as a displacement vector.
pub fn shift_vector(g: &TorusGeometry, shift: &GridVec) -> Vec<f64> {
    let h = g.cell_width();
    shift.iter().map(|&k| k as f64 * h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(n: usize) -> TorusGeometry {
        TorusGeometry::new(1, 1.0, n).unwrap()
    }

    #[test]
    fn translate_identity_and_examples() {
        let g = TorusGeometry::new(2, 1.0, 4).unwrap();
        let mu = Measure::new(g.clone(), vec![0.0; 16], vec![Atom::new(vec![0.0, 0.0], 1.0)]).unwrap();
        assert_eq!(mu.translate(&[0.0, 0.0]).unwrap(), mu);
        let moved = mu.translate(&[0.5, 0.0]).unwrap();
        assert_eq!(moved.atoms(), &[Atom::new(vec![0.5, 0.0], 1.0)]);

        let line = Measure::from_cells(g1(4), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(line.translate(&[0.25]).unwrap().cells(), &[4.0, 1.0, 2.0, 3.0]);
        assert!(matches!(line.translate(&[0.1]), Err(Error::NonGridShift(_))));
        assert!(matches!(line.translate(&[0.25, 0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn approximate_shift_splits_mass() {
        let line = Measure::from_cells(g1(4), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let (m, kind) = line.translate_approx(&[0.125]).unwrap();
        assert_eq!(kind, ShiftKind::Approximate);
        assert_eq!(m.cells(), &[0.5, 0.5, 0.0, 0.0]);
        let (_, kind) = line.translate_approx(&[0.25]).unwrap();
        assert_eq!(kind, ShiftKind::Exact);
    }

    #[test]
    fn total_mass_examples() {
        let g = TorusGeometry::new(2, 2.0, 4).unwrap();
        assert_eq!(Measure::zero(g.clone()).total_mass(), 0.0);
        assert_eq!(Measure::uniform(g, 1.0).unwrap().total_mass(), 4.0);
        let mu = Measure::new(g1(4), vec![0.25; 4], vec![Atom::new(vec![0.1], 0.5)]).unwrap();
        assert_eq!(mu.total_mass(), 1.5);
    }

    #[test]
    fn quantize_examples() {
        let mu = Measure::from_cells(g1(4), vec![0.5, 0.75, 0.25, 1.0]).unwrap();
        assert_eq!(mu.quantize(4, 0.25).unwrap(), mu);
        let two = Measure::from_cells(g1(2), vec![0.3, 0.4]).unwrap();
        assert_eq!(two.quantize(1, 0.5).unwrap().cells(), &[0.5]);
        assert!(matches!(mu.quantize(3, 0.1), Err(Error::BadResolution { .. })));
        assert!(matches!(mu.quantize(2, 0.0), Err(Error::BadStep(_))));
    }

    #[test]
    fn projection_examples() {
        let g = TorusGeometry::new(2, 1.0, 4).unwrap();
        let mu = Measure::new(g.clone(), vec![0.0; 16], vec![Atom::new(vec![0.25, 0.5], 1.0)]).unwrap();
        let p = mu.minkowski_project(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(p.geometry().dim(), 1);
        assert_eq!(p.atoms(), &[Atom::new(vec![0.5], 1.0)]);

        let u = Measure::uniform(g.clone(), 3.0).unwrap();
        let pu = u.minkowski_project(&[vec![0.0, 1.0]]).unwrap();
        assert!(pu.cells().iter().all(|&m| m == pu.cells()[0]));
        assert_eq!(pu.total_mass(), u.total_mass());

        let diag = (0.5f64).sqrt();
        assert!(matches!(
            u.minkowski_project(&[vec![diag, diag]]),
            Err(Error::IncompatibleDirection(_))
        ));
    }

    #[test]
    fn rejects_invalid_masses() {
        assert!(Measure::from_cells(g1(2), vec![-1.0, 0.0]).is_err());
        assert!(Measure::new(g1(2), vec![0.0; 2], vec![Atom::new(vec![1.0], 1.0)]).is_err());
        assert!(Measure::new(g1(2), vec![0.0; 2], vec![Atom::new(vec![0.5], 0.0)]).is_err());
    }
}
