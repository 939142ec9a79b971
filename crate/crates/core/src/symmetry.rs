//! Translation symmetries of a measure at grid resolution.
//!
//! A grid shift `t` is a symmetry when every cell mass agrees with the mass of
//! the cell `t` away up to an absolute tolerance, and the atom set maps onto
//! itself exactly. Candidates are screened with the grid autocorrelation
//! `S(t) = sum_i m_i m_{i+t}` (computed by FFT) and then verified exactly.

use std::collections::{HashSet, VecDeque};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::{GridVec, TorusGeometry};
use crate::measure::Measure;
use crate::metric::Shell;

/// Detected symmetry group `H` and its invariant subspace `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryGroup {
    geometry: TorusGeometry,
    elements: Vec<GridVec>,
    generators: Vec<GridVec>,
    invariant_basis: Vec<Vec<f64>>,
    gap: f64,
    tolerance: f64,
    closed: bool,
}

impl SymmetryGroup {
    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    /// Every symmetry as a residue vector in `[0, n)^d`, sorted.
    pub fn elements(&self) -> &[GridVec] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, t: &[i64]) -> bool {
        self.elements.binary_search(&self.geometry.reduce(t)).is_ok()
    }

    /// Generators in cell units, minimal representatives in `(-n/2, n/2]`.
    pub fn generators(&self) -> &[GridVec] {
        &self.generators
    }

    /// Generators as displacement vectors.
    pub fn generator_vectors(&self) -> Vec<Vec<f64>> {
        let h = self.geometry.cell_width();
        self.generators.iter().map(|v| v.iter().map(|&k| k as f64 * h).collect()).collect()
    }

    /// Orthonormal basis of the invariant subspace; empty when there is no invariant direction.
    pub fn invariant_basis(&self) -> &[Vec<f64>] {
        &self.invariant_basis
    }

    pub fn invariant_dim(&self) -> usize {
        self.invariant_basis.len()
    }

    /// Smallest norm of a nonzero symmetry; infinite for the trivial group and zero
    /// when there is an invariant direction.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Whether the detected set is closed under addition (always true at exact equality).
    pub fn is_closed(&self) -> bool {
        self.closed
    }
}

/// Default absolute per-cell tolerance: `1e-9` times the mean cell mass.
pub fn default_tolerance(mu: &Measure) -> f64 {
    let cells = mu.cells();
    1e-9 * crate::measure::canonical_sum(cells.iter().copied()) / cells.len() as f64
}

/// Exact test of a single grid shift.
pub fn is_symmetry(mu: &Measure, t: &[i64], tol: f64) -> bool {
    let g = mu.geometry();
    let cells = mu.cells();
    atoms_invariant(mu, &atom_keys(mu), t)
        && cells.iter().enumerate().all(|(i, &m)| (cells[g.shift_index(i, t)] - m).abs() <= tol)
}

type AtomKey = (Vec<u64>, u64);

fn atom_keys(mu: &Measure) -> HashSet<AtomKey> {
    mu.atoms()
        .iter()
        .map(|a| (a.position.iter().map(|x| x.to_bits()).collect(), a.mass.to_bits()))
        .collect()
}

fn atoms_invariant(mu: &Measure, keys: &HashSet<AtomKey>, t: &[i64]) -> bool {
    let g = mu.geometry();
    let h = g.cell_width();
    mu.atoms().iter().all(|a| {
        let pos: Vec<u64> = a
            .position
            .iter()
            .zip(t)
            .map(|(&x, &k)| g.wrap(x + k as f64 * h).to_bits())
            .collect();
        keys.contains(&(pos, a.mass.to_bits()))
    })
}

/// In-place n-dimensional FFT over a row-major buffer.
fn fft_nd(g: &TorusGeometry, data: &mut [Complex<f64>], inverse: bool) {
    let n = g.n();
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let mut line = vec![Complex::new(0.0, 0.0); n];
    for axis in 0..g.dim() {
        let stride = n.pow((g.dim() - 1 - axis) as u32);
        for start in 0..data.len() {
            if (start / stride) % n != 0 {
                continue;
            }
            for k in 0..n {
                line[k] = data[start + k * stride];
            }
            fft.process(&mut line);
            for k in 0..n {
                data[start + k * stride] = line[k];
            }
        }
    }
}

/// Autocorrelation `S(t)` indexed like the cells.
fn autocorrelation(mu: &Measure) -> Vec<f64> {
    let g = mu.geometry();
    let mut buf: Vec<Complex<f64>> = mu.cells().iter().map(|&m| Complex::new(m, 0.0)).collect();
    fft_nd(g, &mut buf, false);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    fft_nd(g, &mut buf, true);
    let scale = buf.len() as f64;
    buf.iter().map(|z| z.re / scale).collect()
}

/// Shifts surviving the autocorrelation screen for one measure.
fn screen(mu: &Measure, tol: f64) -> Vec<bool> {
    let g = mu.geometry();
    let s = autocorrelation(mu);
    let s0 = s[0];
    let slack = 0.5 * g.cell_count() as f64 * tol * tol + 1e-9 * s0.abs();
    s.iter().map(|&st| s0 - st <= slack).collect()
}

/// Symmetry group of a single measure.
pub fn symmetry_group(mu: &Measure, tol: f64) -> SymmetryGroup {
    joint_symmetry_group(&[(mu, tol)]).expect("single measure has one geometry")
}

/// Joint symmetries of several measures on a common geometry, each with its own tolerance.
pub fn joint_symmetry_group(measures: &[(&Measure, f64)]) -> Result<SymmetryGroup> {
    let g = measures[0].0.geometry().clone();
    if measures.iter().any(|(m, _)| m.geometry() != &g) {
        return Err(Error::GeometryMismatch);
    }
    let mut candidates = vec![true; g.cell_count()];
    for (mu, tol) in measures {
        for (c, keep) in candidates.iter_mut().zip(screen(mu, *tol)) {
            *c &= keep;
        }
    }
    candidates[0] = true;
    let keys: Vec<HashSet<AtomKey>> = measures.iter().map(|(m, _)| atom_keys(m)).collect();
    let elements: Vec<GridVec> = (0..g.cell_count())
        .into_par_iter()
        .filter(|&idx| candidates[idx])
        .map(|idx| g.coords(idx)[..g.dim()].iter().map(|&c| c as i64).collect::<GridVec>())
        .filter(|t| {
            measures.iter().zip(&keys).all(|((mu, tol), k)| {
                let cells = mu.cells();
                atoms_invariant(mu, k, t)
                    && cells.iter().enumerate().all(|(i, &m)| (cells[g.shift_index(i, t)] - m).abs() <= *tol)
            })
        })
        .collect();
    let tolerance = measures.iter().map(|m| m.1).fold(0.0, f64::max);
    Ok(from_elements(g, elements, tolerance))
}

fn from_elements(g: TorusGeometry, mut elements: Vec<GridVec>, tolerance: f64) -> SymmetryGroup {
    elements.sort();
    let member: HashSet<usize> = elements.iter().map(|v| grid_index(&g, v)).collect();

    let mut order: Vec<GridVec> = elements
        .iter()
        .filter(|v| v.iter().any(|&k| k != 0))
        .map(|v| v.iter().map(|&k| g.minimal_rep(k)).collect())
        .collect();
    order.sort_by(|a: &GridVec, b: &GridVec| {
        let na: i64 = a.iter().map(|k| k * k).sum();
        let nb: i64 = b.iter().map(|k| k * k).sum();
        na.cmp(&nb).then_with(|| b.cmp(a))
    });
    let mut generators: Vec<GridVec> = Vec::new();
    let mut span = closure(&g, &generators);
    for v in order {
        if !span.contains(&grid_index(&g, &v)) {
            generators.push(v);
            span = closure(&g, &generators);
        }
    }
    let closed = span == member;

    let invariant_basis = invariant_basis(&g, &member);
    let gap = if !invariant_basis.is_empty() {
        0.0
    } else {
        elements
            .iter()
            .filter(|v| v.iter().any(|&k| k != 0))
            .map(|v| g.grid_norm(v))
            .fold(f64::INFINITY, f64::min)
    };
    SymmetryGroup { geometry: g, elements, generators, invariant_basis, gap, tolerance, closed }
}

fn grid_index(g: &TorusGeometry, v: &[i64]) -> usize {
    let n = g.n() as i64;
    v.iter().fold(0usize, |acc, &k| acc * g.n() + k.rem_euclid(n) as usize)
}

/// Subgroup of `Z_n^d` generated by `gens`, as cell indices.
pub(crate) fn closure(g: &TorusGeometry, gens: &[GridVec]) -> HashSet<usize> {
    let mut seen = HashSet::from([0usize]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        for v in gens {
            let next = g.shift_index(idx, v);
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen
}

/// Primitive integer directions tried as invariant directions: axes first, then
/// small-coefficient vectors by length.
fn candidate_directions(d: usize) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = Vec::new();
    for a in 0..d {
        let mut e = vec![0; d];
        e[a] = 1;
        out.push(e);
    }
    let mut rest: Vec<Vec<i64>> = Vec::new();
    let mut v = vec![-2i64; d];
    loop {
        let first = v.iter().find(|&&k| k != 0).copied();
        let nonzero = v.iter().filter(|&&k| k != 0).count();
        let gcd = v.iter().fold(0i64, |a, &b| num_gcd(a, b.abs()));
        if first.is_some_and(|f| f > 0) && nonzero > 1 && gcd == 1 {
            rest.push(v.clone());
        }
        let mut a = d;
        loop {
            if a == 0 {
                rest.sort_by_key(|u| (u.iter().map(|k| k * k).sum::<i64>(), std::cmp::Reverse(u.clone())));
                out.extend(rest);
                return out;
            }
            a -= 1;
            v[a] += 1;
            if v[a] <= 2 {
                break;
            }
            v[a] = -2;
        }
    }
}

fn num_gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        num_gcd(b, a % b)
    }
}

fn invariant_basis(g: &TorusGeometry, member: &HashSet<usize>) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for u in candidate_directions(g.dim()) {
        if basis.len() == g.dim() {
            break;
        }
        let qualifies = (1..g.n() as i64).all(|k| {
            let multiple: Vec<i64> = u.iter().map(|&c| c * k).collect();
            member.contains(&grid_index(g, &multiple))
        });
        if !qualifies {
            continue;
        }
        let mut w: Vec<f64> = u.iter().map(|&c| c as f64).collect();
        for b in &basis {
            let dot: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in w.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-10 {
            basis.push(w.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// Invariant subspace of a single measure.
pub fn invariant_directions(mu: &Measure, tol: f64) -> Vec<Vec<f64>> {
    symmetry_group(mu, tol).invariant_basis
}

/// Smallest `N` with `2/N` strictly below the gap, as a shell `[1/N, 2/N]`.
pub fn shell_index(group: &SymmetryGroup) -> Result<Shell> {
    if !group.invariant_basis.is_empty() {
        return Err(Error::HasInvariantDirection(group.invariant_basis.len()));
    }
    let mut n = 1u32;
    while 2.0 / n as f64 >= group.gap {
        n += 1;
    }
    Ok(Shell::new(n))
}

/// Group generated by a set of grid vectors (helper for planted lattices).
pub(crate) fn generated_group(g: &TorusGeometry, gens: &[GridVec]) -> SymmetryGroup {
    let elements = closure(g, gens)
        .into_iter()
        .map(|idx| g.coords(idx)[..g.dim()].iter().map(|&c| c as i64).collect())
        .collect();
    from_elements(g.clone(), elements, 0.0)
}
