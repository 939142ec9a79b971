//! Translation-equivariant balancing allocations between two measures.
//!
//! An allocation sends every cell (or atom) of a source measure to targets in
//! pieces. [`balance`] builds one from a diffuse `phi` to any `psi` of equal
//! mass by splitting on the joint invariant subspace:
//!
//! * fully invariant: both are uniform and the identity works;
//! * no invariant direction: a factor point pattern of `phi + sqrt(2) psi`
//!   is fairly tessellated and each tile is matched along a Hilbert curve;
//! * otherwise: project along the invariant axes, balance the projections,
//!   and extend fiberwise.

mod chart;
mod hilbert;
mod matching;
mod tessellation;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::factor::extract_point_process;
use crate::geometry::TorusGeometry;
use crate::io::fmt_f64;
use crate::measure::{canonical_sum, Measure};
use crate::pattern::PointPattern;
use crate::symmetry::{default_tolerance, joint_symmetry_group};

pub use chart::{extend_allocation, gram_schmidt_chart, LinearChart};
pub use hilbert::hilbert_index;
pub use matching::{balance_with_auxiliary, within_cell_match};
pub use tessellation::fair_tessellation;

/// Where a piece of mass comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Cell(usize),
    Atom(usize),
}

/// Where a piece of mass goes: a cell or atom of the target measure, or a point
/// of a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Cell(usize),
    Atom(usize),
    Point(usize),
}

impl Target {
    fn kind(&self) -> &'static str {
        match self {
            Target::Cell(_) => "cell",
            Target::Atom(_) => "atom",
            Target::Point(_) => "point",
        }
    }

    fn id(&self) -> usize {
        match *self {
            Target::Cell(i) | Target::Atom(i) | Target::Point(i) => i,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub target: Target,
    pub mass: f64,
}

/// Pieces sent out by every source cell and atom, in the order they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMap {
    geometry: TorusGeometry,
    cells: Vec<Vec<Piece>>,
    atoms: Vec<Vec<Piece>>,
}

/// Spacing of doubles at `m`; multiples of it up to `m` add up exactly.
pub(crate) fn grain(m: f64) -> f64 {
    f64::from_bits(m.to_bits() + 1) - m
}

pub(crate) fn push_merged(pieces: &mut Vec<Piece>, target: Target, mass: f64) {
    match pieces.iter_mut().find(|p| p.target == target) {
        Some(p) => p.mass += mass,
        None => pieces.push(Piece { target, mass }),
    }
}

pub(crate) fn check_totals(phi: &Measure, psi: &Measure) -> Result<()> {
    let (a, b) = (phi.total_mass(), psi.total_mass());
    if (a - b).abs() > 1e-9 * a.max(b) {
        return Err(Error::TotalMassMismatch(a, b));
    }
    Ok(())
}

impl AllocationMap {
    pub(crate) fn empty(geometry: TorusGeometry, atom_sources: usize) -> Self {
        let cells = vec![Vec::new(); geometry.cell_count()];
        Self { geometry, cells, atoms: vec![Vec::new(); atom_sources] }
    }

    pub(crate) fn set(&mut self, source: Source, pieces: Vec<Piece>) {
        match source {
            Source::Cell(i) => self.cells[i] = pieces,
            Source::Atom(k) => self.atoms[k] = pieces,
        }
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn cell_pieces(&self, i: usize) -> &[Piece] {
        &self.cells[i]
    }

    pub fn atom_pieces(&self, k: usize) -> &[Piece] {
        &self.atoms[k]
    }

    /// Every source with its pieces; cells first, then atoms.
    pub fn iter(&self) -> impl Iterator<Item = (Source, &[Piece])> {
        let cells = self.cells.iter().enumerate().map(|(i, p)| (Source::Cell(i), p.as_slice()));
        let atoms = self.atoms.iter().enumerate().map(|(k, p)| (Source::Atom(k), p.as_slice()));
        cells.chain(atoms).filter(|(_, p)| !p.is_empty())
    }

    pub fn piece_count(&self) -> usize {
        self.iter().map(|(_, p)| p.len()).sum()
    }

    /// Total mass received by every target, summed in canonical order.
    pub fn incoming(&self) -> BTreeMap<Target, f64> {
        let mut per: BTreeMap<Target, Vec<f64>> = BTreeMap::new();
        for (_, pieces) in self.iter() {
            for p in pieces {
                per.entry(p.target).or_default().push(p.mass);
            }
        }
        per.into_iter().map(|(t, v)| (t, canonical_sum(v.into_iter()))).collect()
    }

    /// Fraction of source mass that sits in sources with more than one target.
    pub fn monge_defect(&self) -> f64 {
        let mut split = Vec::new();
        let mut all = Vec::new();
        for (_, pieces) in self.iter() {
            let m: f64 = canonical_sum(pieces.iter().map(|p| p.mass));
            all.push(m);
            if pieces.iter().filter(|p| p.mass > 0.0).count() > 1 {
                split.push(m);
            }
        }
        let total = canonical_sum(all.into_iter());
        if total > 0.0 {
            canonical_sum(split.into_iter()) / total
        } else {
            0.0
        }
    }
}

/// Text form of an allocation.
///
/// ```text
/// alloc v1
/// <d> <L> <n>
/// pieces <count>
/// <cell|atom> <source id> <cell|atom|point> <target id> <mass>
/// ```
pub fn serialize_allocation(map: &AllocationMap) -> String {
    let g = map.geometry();
    let mut s = String::new();
    writeln!(s, "alloc v1").unwrap();
    writeln!(s, "{} {} {}", g.dim(), fmt_f64(g.side()), g.n()).unwrap();
    writeln!(s, "pieces {}", map.piece_count()).unwrap();
    for (source, pieces) in map.iter() {
        let (kind, id) = match source {
            Source::Cell(i) => ("cell", i),
            Source::Atom(k) => ("atom", k),
        };
        for p in pieces {
            writeln!(s, "{kind} {id} {} {} {}", p.target.kind(), p.target.id(), fmt_f64(p.mass)).unwrap();
        }
    }
    s
}

pub fn parse_allocation(text: &str) -> Result<AllocationMap> {
    let err = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
    let lines: Vec<&str> = text.lines().collect();
    if lines.first().map(|l| l.trim_end()) != Some("alloc v1") {
        return Err(err(1, "expected `alloc v1`"));
    }
    let header: Vec<&str> = lines.get(1).ok_or_else(|| err(2, "missing header"))?.split_whitespace().collect();
    if header.len() != 3 {
        return Err(err(2, "expected `<d> <L> <n>`"));
    }
    let d: usize = header[0].parse().map_err(|_| err(2, "bad dimension"))?;
    let side: f64 = header[1].parse().map_err(|_| err(2, "bad side"))?;
    let n: usize = header[2].parse().map_err(|_| err(2, "bad resolution"))?;
    let g = TorusGeometry::with_resolution(d, side, n)?;
    let count_line: Vec<&str> = lines.get(2).ok_or_else(|| err(3, "missing piece count"))?.split_whitespace().collect();
    if count_line.len() != 2 || count_line[0] != "pieces" {
        return Err(err(3, "expected `pieces <count>`"));
    }
    let count: usize = count_line[1].parse().map_err(|_| err(3, "bad count"))?;
    let mut cells: Vec<Vec<Piece>> = vec![Vec::new(); g.cell_count()];
    let mut atoms: Vec<Vec<Piece>> = Vec::new();
    let body: Vec<(usize, &str)> =
        lines.iter().enumerate().skip(3).filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, *l)).collect();
    if body.len() != count {
        return Err(err(lines.len(), &format!("expected {count} pieces, found {}", body.len())));
    }
    for (ln, l) in body {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 5 {
            return Err(err(ln, "expected `<kind> <id> <kind> <id> <mass>`"));
        }
        let sid: usize = t[1].parse().map_err(|_| err(ln, "bad source id"))?;
        let tid: usize = t[3].parse().map_err(|_| err(ln, "bad target id"))?;
        let mass: f64 = t[4].parse().map_err(|_| err(ln, "bad mass"))?;
        if !(mass.is_finite() && mass > 0.0) {
            return Err(err(ln, "piece mass must be positive"));
        }
        let target = match t[2] {
            "cell" if tid < g.cell_count() => Target::Cell(tid),
            "atom" => Target::Atom(tid),
            "point" => Target::Point(tid),
            _ => return Err(err(ln, "bad target")),
        };
        let list = match t[0] {
            "cell" if sid < g.cell_count() => &mut cells[sid],
            "atom" => {
                if atoms.len() <= sid {
                    atoms.resize(sid + 1, Vec::new());
                }
                &mut atoms[sid]
            }
            _ => return Err(err(ln, "bad source")),
        };
        list.push(Piece { target, mass });
    }
    Ok(AllocationMap { geometry: g, cells, atoms })
}

/// Mass a target of `psi` should receive against what the allocation delivers.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetCheck {
    pub target: Target,
    pub expected: f64,
    pub received: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub targets: Vec<TargetCheck>,
    pub max_relative: f64,
    /// Every source's pieces add up to its mass exactly.
    pub sources_exact: bool,
    pub max_source_residual: f64,
}

impl BalanceReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.sources_exact && self.max_relative <= tol
    }

    /// One line per target: `target_kind,target_id,expected,received,relative_residual`.
    pub fn certificate_csv(&self) -> String {
        let mut s = String::from("target_kind,target_id,expected,received,relative_residual\n");
        for t in &self.targets {
            writeln!(
                s,
                "{},{},{},{},{}",
                t.target.kind(),
                t.target.id(),
                fmt_f64(t.expected),
                fmt_f64(t.received),
                fmt_f64(t.relative)
            )
            .unwrap();
        }
        s
    }
}

/// Checks that `map` pushes `phi` onto `psi`. Residuals are relative to the expected
/// mass, floored at `1e-12` of the total so empty targets stay comparable.
pub fn verify_balance(map: &AllocationMap, phi: &Measure, psi: &Measure) -> Result<BalanceReport> {
    let g = phi.geometry();
    if map.geometry() != g || psi.geometry() != g {
        return Err(Error::GeometryMismatch);
    }
    let mut max_source_residual: f64 = 0.0;
    let mut sources_exact = true;
    for (i, &m) in phi.cells().iter().enumerate() {
        let out = canonical_sum(map.cell_pieces(i).iter().map(|p| p.mass));
        sources_exact &= out == m;
        max_source_residual = max_source_residual.max((out - m).abs());
    }
    for (k, a) in phi.atoms().iter().enumerate() {
        let out = canonical_sum(map.atoms.get(k).into_iter().flatten().map(|p| p.mass));
        sources_exact &= out == a.mass;
        max_source_residual = max_source_residual.max((out - a.mass).abs());
    }
    sources_exact &= map.atoms.len() <= phi.atoms().len();

    let incoming = map.incoming();
    let floor = 1e-12 * psi.total_mass();
    let mut expected: BTreeMap<Target, f64> = BTreeMap::new();
    for (i, &m) in psi.cells().iter().enumerate() {
        if m > 0.0 {
            expected.insert(Target::Cell(i), m);
        }
    }
    for (k, a) in psi.atoms().iter().enumerate() {
        expected.insert(Target::Atom(k), a.mass);
    }
    for t in incoming.keys() {
        expected.entry(*t).or_insert(0.0);
    }
    let targets: Vec<TargetCheck> = expected
        .into_iter()
        .map(|(target, expected)| {
            let valid = match target {
                Target::Cell(i) => i < g.cell_count(),
                Target::Atom(k) => k < psi.atoms().len(),
                Target::Point(_) => false,
            };
            let received = incoming.get(&target).copied().unwrap_or(0.0);
            let relative =
                if valid { (received - expected).abs() / expected.max(floor) } else { f64::INFINITY };
            TargetCheck { target, expected, received, relative }
        })
        .collect();
    let max_relative = targets.iter().map(|t| t.relative).fold(0.0, f64::max);
    Ok(BalanceReport { targets, max_relative, sources_exact, max_source_residual })
}

/// Which construction produced a balancing allocation.
#[derive(Debug, Clone, PartialEq)]
pub enum BalanceCase {
    /// Both measures are uniform and every cell maps to itself.
    Uniform,
    /// No joint invariant direction; balanced through this factor point pattern.
    Auxiliary { points: PointPattern },
    /// Balanced on the complement chart and extended along the invariant axes.
    Projected { chart: LinearChart, inner: Box<Balanced> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Balanced {
    pub map: AllocationMap,
    pub case: BalanceCase,
}

/// A projected cell with mass and no massive neighbour: the fibers over it
/// carry a whole lower-dimensional sheet.
fn has_fiber_atom(mu: &Measure) -> bool {
    let g = mu.geometry();
    let d = g.dim();
    let neighbours: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|mut k| {
            (0..d)
                .map(|_| {
                    let o = (k % 3) as i64 - 1;
                    k /= 3;
                    o
                })
                .collect::<Vec<i64>>()
        })
        .filter(|o| o.iter().any(|&x| x != 0))
        .collect();
    g.n() >= 3
        && mu.cells().iter().enumerate().any(|(i, &m)| {
            m > 0.0 && neighbours.iter().all(|o| mu.cells()[g.shift_index(i, o)] == 0.0)
        })
}

/// Builds an allocation pushing the diffuse `phi` onto `psi`, equivariant under
/// grid translations of the pair.
pub fn balance(phi: &Measure, psi: &Measure) -> Result<Balanced> {
    let g = phi.geometry();
    if psi.geometry() != g {
        return Err(Error::GeometryMismatch);
    }
    if !phi.is_diffuse() {
        return Err(Error::NotDiffuse);
    }
    check_totals(phi, psi)?;
    let group = joint_symmetry_group(&[(phi, default_tolerance(phi)), (psi, default_tolerance(psi))])?;
    let v = group.invariant_basis();

    if v.len() == g.dim() {
        let tol = default_tolerance(phi).max(default_tolerance(psi));
        let uniform = psi.is_diffuse()
            && phi.cells().iter().zip(psi.cells()).all(|(a, b)| (a - b).abs() <= tol && *a > 0.0);
        if !uniform {
            return Err(Error::NotUniform);
        }
        let mut map = AllocationMap::empty(g.clone(), 0);
        for (i, &m) in phi.cells().iter().enumerate() {
            map.set(Source::Cell(i), vec![Piece { target: Target::Cell(i), mass: m }]);
        }
        return Ok(Balanced { map, case: BalanceCase::Uniform });
    }

    if v.is_empty() {
        let encoded = phi.plus(&psi.scaled(std::f64::consts::SQRT_2)?)?;
        let points = extract_point_process(&encoded)?;
        let map = balance_with_auxiliary(phi, psi, &points)?;
        return Ok(Balanced { map, case: BalanceCase::Auxiliary { points } });
    }

    let chart = gram_schmidt_chart(v, g.dim())?;
    if chart.w_axes().is_none() {
        return Err(Error::IncompatibleDirection("invariant subspace is not axis-aligned".into()));
    }
    let phi_w = phi.minkowski_project(chart.v_basis())?;
    let psi_w = psi.minkowski_project(chart.v_basis())?;
    if has_fiber_atom(&phi_w) {
        return Err(Error::FiberAtom);
    }
    let inner = balance(&phi_w, &psi_w)?;
    let map = extend_allocation(&inner.map, &chart, phi, psi)?;
    Ok(Balanced { map, case: BalanceCase::Projected { chart, inner: Box::new(inner) } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;

    #[test]
    fn grain_sums_are_exact() {
        let m = 0.7;
        let q = grain(m);
        let a = (0.3 / q).floor() * q;
        assert_eq!(a + (m - a), m);
        assert_eq!(grain(1.0), f64::EPSILON);
    }

    #[test]
    fn uniform_pair_is_identity() {
        let g = TorusGeometry::new(2, 4.0, 8).unwrap();
        let phi = Measure::uniform(g.clone(), 1.0).unwrap();
        let b = balance(&phi, &phi).unwrap();
        assert_eq!(b.case, BalanceCase::Uniform);
        assert_eq!(b.map.monge_defect(), 0.0);
        assert!(verify_balance(&b.map, &phi, &phi).unwrap().passes(0.0));
    }

    #[test]
    fn uniform_phi_on_lattice_of_atoms_is_rejected() {
        let g = TorusGeometry::new(1, 1.0, 4).unwrap();
        let phi = Measure::uniform(g.clone(), 1.0).unwrap();
        let atoms = (0..4).map(|k| Atom::new(vec![k as f64 * 0.25 + 0.125], 0.25)).collect();
        let psi = Measure::new(g, vec![0.0; 4], atoms).unwrap();
        assert!(matches!(balance(&phi, &psi), Err(Error::NotUniform)));
    }

    #[test]
    fn rejects_atoms_in_phi_and_mass_mismatch() {
        let g = TorusGeometry::new(1, 1.0, 4).unwrap();
        let phi = Measure::new(g.clone(), vec![0.25; 4], vec![Atom::new(vec![0.5], 1.0)]).unwrap();
        assert!(matches!(balance(&phi, &phi), Err(Error::NotDiffuse)));
        let a = Measure::uniform(g.clone(), 1.0).unwrap();
        let b = Measure::uniform(g, 2.0).unwrap();
        assert!(matches!(balance(&a, &b), Err(Error::TotalMassMismatch(..))));
    }

    #[test]
    fn allocation_text_round_trip() {
        let g = TorusGeometry::new(1, 1.0, 8).unwrap();
        let phi = Measure::uniform(g.clone(), 1.0).unwrap();
        let psi = Measure::new(g.clone(), vec![0.0; 8], vec![Atom::new(vec![0.3], 1.0)]).unwrap();
        let map = within_cell_match(&phi, &psi, &[0.0]).unwrap();
        let back = parse_allocation(&serialize_allocation(&map)).unwrap();
        assert_eq!(back, map);
        assert!(parse_allocation("alloc v2\n").is_err());
    }

    #[test]
    fn fiber_atom_detection() {
        let g = TorusGeometry::new(1, 1.0, 8).unwrap();
        let mut cells = vec![0.0; 8];
        cells[3] = 1.0;
        assert!(has_fiber_atom(&Measure::from_cells(g.clone(), cells.clone()).unwrap()));
        cells[4] = 1.0;
        assert!(!has_fiber_atom(&Measure::from_cells(g, cells).unwrap()));
    }
}
