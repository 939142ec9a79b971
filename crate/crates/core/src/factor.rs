//! Translation-equivariant point pattern extracted from a measure without
//! invariant directions.
//!
//! Pipeline: shell index `N` from the symmetry gap, the largest `eps = 1/M` below
//! the shell distance, a canonical quantized ball center of radius `eps/3`, the
//! occupancy set `U` of translations whose quantized translate falls in the ball,
//! clusters of `U` under `|t - s| < 1/N`, and one representative per cluster.

use std::cmp::Ordering;
use std::collections::HashMap;

use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};
use crate::geometry::{lex_cmp, GridVec, TorusGeometry, MAX_DIM};
use crate::measure::{Measure, Quantized};
use crate::metric::{feasible_at, for_each_box, strictly_within, Reach, Shell, SiteMeasure, Stencil};
use crate::pattern::PointPattern;
use crate::symmetry::{default_tolerance, shell_index, symmetry_group};

/// How a cluster picks its representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterOrder {
    /// Lexicographic minimum after unwrapping the cluster around one of its members.
    #[default]
    Unwrapped,
    /// Lexicographic minimum of the raw coordinates in `[0, n)`; not equivariant at the seam.
    Plain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractConfig {
    pub m_max: u32,
    /// Symmetry tolerance; `None` uses the default per-cell tolerance.
    pub tolerance: Option<f64>,
    pub retries: u32,
    pub order: ClusterOrder,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { m_max: 64, tolerance: None, retries: 3, order: ClusterOrder::Unwrapped }
    }
}

/// Pooling resolution and mass step used to build ball centers and probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    pub resolution: usize,
    pub step: f64,
}

impl Quantizer {
    /// Smallest power-of-two resolution with cell width `<= eps/6` (capped at `n`), and a
    /// step small enough that flooring removes at most `eps/6` of the total mass.
    pub fn for_epsilon(mu: &Measure, epsilon: f64) -> Self {
        let g = mu.geometry();
        let mut r = 1usize;
        while r < g.n() && (g.n() % (2 * r) == 0) && g.side() / r as f64 > epsilon / 6.0 {
            r *= 2;
        }
        if g.side() / r as f64 > epsilon / 6.0 {
            r = g.n();
        }
        let sites = r.pow(g.dim() as u32) + mu.atoms().len();
        Self { resolution: r, step: epsilon * mu.total_mass() / (6.0 * sites as f64) }
    }

    fn refined(self, n: usize) -> Self {
        let r = if n % (2 * self.resolution) == 0 { 2 * self.resolution } else { self.resolution };
        Self { resolution: r, step: 0.5 * self.step }
    }

    /// `quantize(translate(mu, -t))` for every grid `t`, sharing work when no pooling happens.
    fn probes<'a>(self, mu: &'a Measure) -> Result<Probes<'a>> {
        let base = mu.quantize_counts(self.resolution, self.step)?;
        Ok(Probes { mu, quantizer: self, base })
    }
}

struct Probes<'a> {
    mu: &'a Measure,
    quantizer: Quantizer,
    base: Quantized,
}

impl Probes<'_> {
    fn unpooled(&self) -> bool {
        self.quantizer.resolution == self.mu.geometry().n()
    }

    fn at(&self, t: &[i64]) -> Quantized {
        let neg: Vec<i64> = t.iter().map(|k| -k).collect();
        if self.unpooled() {
            self.base.translate_grid(&neg)
        } else {
            let q = self.quantizer;
            self.mu.translate_grid(&neg).quantize_counts(q.resolution, q.step).expect("validated quantizer")
        }
    }
}

/// Per-stage record of one extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionTrace {
    pub shell: Shell,
    pub m: u32,
    pub epsilon: f64,
    pub quantizer: Quantizer,
    pub center: Measure,
    pub radius: f64,
    pub anchor: GridVec,
    pub occupancy: Vec<GridVec>,
    pub clusters: Vec<Vec<GridVec>>,
    pub representatives: PointPattern,
    pub retries: u32,
}

/// Largest `1/M`, `M <= m_max`, strictly below a known shell distance.
pub fn epsilon_below(distance: f64, m_max: u32) -> Result<f64> {
    (1..=m_max)
        .map(|m| 1.0 / m as f64)
        .find(|&e| distance > e)
        .ok_or(Error::EpsilonNotFound { m_max })
}

/// Denominator `M` of the largest `eps = 1/M <= 1/2` with `d_P(mu, mu + t) > eps` for every
/// grid `t` in the shell. Each translate raises `M` until it is separated, so the cost
/// is one feasibility test per shell vector plus one per increment of `M`.
pub fn select_epsilon(mu: &Measure, shell: &Shell, m_max: u32) -> Result<f64> {
    Ok(1.0 / select_denominator(mu, shell, m_max)? as f64)
}

fn select_denominator(mu: &Measure, shell: &Shell, m_max: u32) -> Result<u32> {
    let g = mu.geometry();
    let vectors = shell.half_grid_vectors(g)?;
    let base = SiteMeasure::from_measure(mu)?;
    let mut stencils: Vec<Stencil> = Vec::new();
    let mut m = 2u32;
    for t in &vectors {
        let moved = base.translate_grid(t);
        while m <= m_max {
            let k = (m - 2) as usize;
            if stencils.len() <= k {
                stencils.push(Stencil::new(g, Reach::Closed(1.0 / m as f64)));
            }
            if !feasible_at(&base, &moved, &stencils[k]) {
                break;
            }
            m += 1;
        }
        if m > m_max {
            return Err(Error::EpsilonNotFound { m_max });
        }
    }
    Ok(m)
}

/// Canonical ball center: the smallest quantized code over the whole orbit of `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct Center {
    pub measure: Measure,
    pub radius: f64,
    pub quantizer: Quantizer,
    /// Smallest grid `t` (in `[0, n)^d`) whose probe equals the center.
    pub anchor: GridVec,
}

pub fn canonical_center(mu: &Measure, epsilon: f64) -> Result<Center> {
    center_with(mu, epsilon, Quantizer::for_epsilon(mu, epsilon))
}

fn center_with(mu: &Measure, epsilon: f64, quantizer: Quantizer) -> Result<Center> {
    let probes = quantizer.probes(mu)?;
    let vectors = mu.geometry().all_grid_vectors();
    let (code, anchor) = if probes.unpooled() {
        let best = min_rotation(&probes.base, &vectors);
        (probes.at(&best), best)
    } else {
        let mut best: Option<(Quantized, GridVec)> = None;
        for t in vectors {
            let q = probes.at(&t);
            if best.as_ref().is_none_or(|(b, _)| q.code_cmp(b) == Ordering::Less) {
                best = Some((q, t));
            }
        }
        best.ok_or(Error::NoCandidate)?
    };
    let measure = code.to_measure();
    if measure.total_mass() <= 0.0 {
        return Err(Error::NoCandidate);
    }
    Ok(Center { measure, radius: epsilon / 3.0, quantizer, anchor })
}

/// Smallest `t` minimizing the code of `base` shifted by `-t`, compared lazily.
fn min_rotation(base: &Quantized, vectors: &[GridVec]) -> GridVec {
    let g = &base.geometry;
    let any_cells = base.cells.iter().any(|&k| k > 0);
    let cells_cmp = |a: &[i64], b: &[i64]| -> Ordering {
        if !any_cells {
            return Ordering::Equal;
        }
        // shifting by -t moves cell j + t to j
        for j in 0..base.cells.len() {
            let o = base.cells[g.shift_index(j, a)].cmp(&base.cells[g.shift_index(j, b)]);
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    };
    let atoms_of = |t: &[i64]| base.translate_atoms(&t.iter().map(|k| -k).collect::<Vec<_>>());
    let atoms_cmp = |a: &[(Vec<f64>, u64)], b: &[(Vec<f64>, u64)]| -> Ordering {
        for (x, y) in a.iter().zip(b) {
            let o = lex_cmp(&x.0, &y.0).then(x.1.cmp(&y.1));
            if o != Ordering::Equal {
                return o;
            }
        }
        a.len().cmp(&b.len())
    };
    let mut best = vectors[0].clone();
    let mut best_atoms = atoms_of(&best);
    for t in &vectors[1..] {
        match cells_cmp(t, &best) {
            Ordering::Less => {
                best = t.clone();
                best_atoms = atoms_of(&best);
            }
            Ordering::Equal if !base.atoms.is_empty() => {
                let atoms = atoms_of(t);
                if atoms_cmp(&atoms, &best_atoms) == Ordering::Less {
                    best = t.clone();
                    best_atoms = atoms;
                }
            }
            _ => {}
        }
    }
    best
}

/// `U = { t : d_P(center, quantize(mu - t)) < radius }`, sorted.
pub fn occupancy_set(mu: &Measure, center: &Center) -> Result<Vec<GridVec>> {
    let probes = center.quantizer.probes(mu)?;
    let c = SiteMeasure::from_measure(&center.measure)?;
    let cg = center.measure.geometry();
    let stencil = Stencil::new(cg, Reach::Open(center.radius));
    let base = SiteMeasure::from_measure(&probes.base.to_measure())?;
    let precheck = Precheck::new(&c, &base, &stencil);
    let mut out = Vec::new();
    for t in mu.geometry().all_grid_vectors() {
        let candidate = if probes.unpooled() {
            if !precheck.may_contain(&c, &base, t.as_slice()) {
                continue;
            }
            base.translate_grid(&t.iter().map(|k| -k).collect::<Vec<_>>())
        } else {
            SiteMeasure::from_measure(&probes.at(&t).to_measure())?
        };
        if strictly_within(&c, &candidate, &stencil) {
            out.push(t);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyOccupancy);
    }
    Ok(out)
}

/// Cheap necessary condition for ball membership of an unpooled probe.
///
/// Matched mass is at most what each center site can reach among probe cells and
/// atoms, plus what each probe atom can absorb from nearby center cells; a probe
/// is rejected when that bound cannot exceed `(1 - radius)` of the base total.
struct Precheck {
    reach: Reach,
    offsets: Vec<Vec<i64>>,
    box_radius: i64,
    probe_atoms: HashMap<usize, Vec<([f64; MAX_DIM], u64)>>,
    need: u64,
    center_mass: u64,
    center_cells: bool,
    heavy_cells: Vec<([i64; MAX_DIM], u64)>,
}

impl Precheck {
    fn new(center: &SiteMeasure, probe: &SiteMeasure, stencil: &Stencil) -> Self {
        let g = &center.geometry;
        let d = g.dim();
        let base = center.total.min(probe.total) as f64;
        let need = (base * (1.0 - stencil.reach.radius())).floor().max(0.0) as u64;
        let mut heavy_cells: Vec<([i64; MAX_DIM], u64)> = (0..center.cells.len())
            .filter(|&i| center.cells[i] > 0)
            .map(|i| (g.coords(i).map(|c| c as i64), center.cells[i]))
            .collect();
        heavy_cells.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
        let mut probe_atoms: HashMap<usize, Vec<([f64; MAX_DIM], u64)>> = HashMap::new();
        for &(p, u) in &probe.atoms {
            probe_atoms.entry(g.cell_of(&p[..d])).or_default().push((p, u));
        }
        Self {
            reach: stencil.reach,
            offsets: stencil.offsets.iter().map(|o| o[..d].to_vec()).collect(),
            box_radius: stencil.box_radius,
            probe_atoms,
            need,
            center_mass: center.total,
            center_cells: center.cells.iter().any(|&k| k > 0),
            heavy_cells,
        }
    }

    /// `probe` is the translate by `0`; the candidate is `probe` shifted by `-t`.
    fn may_contain(&self, center: &SiteMeasure, probe: &SiteMeasure, t: &[i64]) -> bool {
        let g = &center.geometry;
        let d = g.dim();
        let h = g.cell_width();
        let mut absorbed = 0u64;
        for &(q, u) in if self.center_cells { &probe.atoms[..] } else { &[] } {
            let mut x = [0.0; MAX_DIM];
            for k in 0..d {
                x[k] = g.wrap(q[k] - t[k] as f64 * h);
            }
            let mut near = 0u64;
            for_each_box(g, g.coords(g.cell_of(&x[..d])), self.box_radius, |c| {
                let j = g.index(&c[..d]);
                if center.cells[j] > 0 && self.reach.admits(g.torus_distance(&g.cell_center(j), &x)) {
                    near += center.cells[j];
                }
            });
            absorbed += u.min(near);
        }
        // reject once the summed deficits reach this many units
        let threshold = (self.center_mass + absorbed).saturating_sub(self.need);
        let mut deficit = 0u64;
        for &(p, a) in &center.atoms {
            // distance from p to a candidate site equals distance from p + t to the probe site
            let mut q = [0.0; MAX_DIM];
            for k in 0..d {
                q[k] = g.wrap(p[k] + t[k] as f64 * h);
            }
            let mut reach = 0u64;
            for_each_box(g, g.coords(g.cell_of(&q[..d])), self.box_radius, |c| {
                let j = g.index(&c[..d]);
                if probe.cells[j] > 0 && self.reach.admits(g.torus_distance(&g.cell_center(j), &q)) {
                    reach += probe.cells[j];
                }
                if let Some(list) = self.probe_atoms.get(&j) {
                    for (x, u) in list {
                        if self.reach.admits(g.torus_distance(x, &q)) {
                            reach += u;
                        }
                    }
                }
            });
            deficit += a.saturating_sub(reach);
            if deficit >= threshold {
                return false;
            }
        }
        let n = g.n() as i64;
        // heaviest cells first so that rejections come early
        for &(c, a) in &self.heavy_cells {
            let mut reach = 0u64;
            for o in &self.offsets {
                let j = (0..d).fold(0usize, |acc, k| acc * g.n() + (c[k] + t[k] + o[k]).rem_euclid(n) as usize);
                reach += probe.cells[j];
                if reach >= a {
                    break;
                }
            }
            deficit += a.saturating_sub(reach);
            if deficit >= threshold {
                return false;
            }
        }
        true
    }
}

/// Union-find over pairs closer than `1/N`; any pair in `[1/N, 2/N]` is an error.
pub fn cluster_dichotomy(g: &TorusGeometry, occupancy: &[GridVec], shell: &Shell) -> Result<Vec<Vec<GridVec>>> {
    if occupancy.is_empty() {
        return Err(Error::EmptyOccupancy);
    }
    let mut uf = UnionFind::<usize>::new(occupancy.len());
    for i in 0..occupancy.len() {
        for j in i + 1..occupancy.len() {
            let diff: Vec<i64> = occupancy[i].iter().zip(&occupancy[j]).map(|(a, b)| a - b).collect();
            let dist = g.grid_norm(&diff);
            if dist < shell.inner {
                uf.union(i, j);
            } else if dist <= shell.outer {
                return Err(Error::KeyPropertyViolation { distance: dist, inner: shell.inner, outer: shell.outer });
            }
        }
    }
    let labels = uf.into_labeling();
    let mut groups: std::collections::BTreeMap<usize, Vec<GridVec>> = Default::default();
    for (i, l) in labels.into_iter().enumerate() {
        groups.entry(l).or_default().push(g.reduce(&occupancy[i]));
    }
    let mut clusters: Vec<Vec<GridVec>> = groups
        .into_values()
        .map(|mut c| {
            c.sort();
            c
        })
        .collect();
    clusters.sort();
    Ok(clusters)
}

/// One grid point per cluster.
pub fn representative(g: &TorusGeometry, cluster: &[GridVec], order: ClusterOrder) -> GridVec {
    match order {
        ClusterOrder::Plain => cluster.iter().map(|v| g.reduce(v)).min().expect("nonempty cluster"),
        ClusterOrder::Unwrapped => {
            let pivot = &cluster[0];
            let lifted = cluster
                .iter()
                .map(|v| pivot.iter().zip(v).map(|(&p, &x)| p + g.minimal_rep(x - p)).collect::<GridVec>())
                .min()
                .expect("nonempty cluster");
            g.reduce(&lifted)
        }
    }
}

pub fn representatives(g: &TorusGeometry, clusters: &[Vec<GridVec>], order: ClusterOrder) -> PointPattern {
    let points = clusters.iter().map(|c| g.grid_to_position(&representative(g, c, order))).collect();
    PointPattern::new(g.clone(), points)
}

/// Runs the full pipeline with default settings and returns the point pattern.
pub fn extract_point_process(mu: &Measure) -> Result<PointPattern> {
    Ok(extract_with(mu, &ExtractConfig::default())?.representatives)
}

pub fn extract_with(mu: &Measure, config: &ExtractConfig) -> Result<ExtractionTrace> {
    let g = mu.geometry();
    let tol = config.tolerance.unwrap_or_else(|| default_tolerance(mu));
    let group = symmetry_group(mu, tol);
    let shell = shell_index(&group)?;
    let m = select_denominator(mu, &shell, config.m_max)?;
    let epsilon = 1.0 / m as f64;
    let mut quantizer = Quantizer::for_epsilon(mu, epsilon);
    let mut retries = 0;
    loop {
        let attempt = center_with(mu, epsilon, quantizer).and_then(|center| {
            let occupancy = occupancy_set(mu, &center)?;
            let clusters = cluster_dichotomy(g, &occupancy, &shell)?;
            Ok((center, occupancy, clusters))
        });
        match attempt {
            Ok((center, occupancy, clusters)) => {
                let representatives = representatives(g, &clusters, config.order);
                debug_assert!(representatives.separation() >= shell.outer);
                return Ok(ExtractionTrace {
                    shell,
                    m,
                    epsilon,
                    quantizer,
                    center: center.measure,
                    radius: center.radius,
                    anchor: center.anchor,
                    occupancy,
                    clusters,
                    representatives,
                    retries,
                });
            }
            Err(Error::KeyPropertyViolation { .. }) if retries < config.retries => {
                quantizer = quantizer.refined(g.n());
                retries += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_below(0.3, 64).unwrap(), 0.25);
        assert_eq!(epsilon_below(0.09, 64).unwrap(), 1.0 / 12.0);
        assert!(matches!(epsilon_below(0.0, 64), Err(Error::EpsilonNotFound { m_max: 64 })));
    }

    #[test]
    fn uniform_has_no_epsilon() {
        let g = TorusGeometry::new(2, 4.0, 8).unwrap();
        let mu = Measure::uniform(g, 1.0).unwrap();
        assert!(matches!(select_epsilon(&mu, &Shell::new(2), 64), Err(Error::EpsilonNotFound { .. })));
    }

    #[test]
    fn dichotomy_examples() {
        let g = TorusGeometry::new(1, 16.0, 64).unwrap();
        let shell = Shell::new(1);
        assert_eq!(cluster_dichotomy(&g, &[vec![5]], &shell).unwrap(), vec![vec![vec![5]]]);
        let two = cluster_dichotomy(&g, &[vec![0], vec![12]], &shell).unwrap();
        assert_eq!(two.len(), 2);
        // u, u + 0.6/N, u + 1.2/N with N = 2 and h = 0.1
        let g = TorusGeometry::new(1, 10.0, 100).unwrap();
        let shell = Shell::new(2);
        let chain = [vec![0], vec![3], vec![6]];
        assert!(matches!(cluster_dichotomy(&g, &chain, &shell), Err(Error::KeyPropertyViolation { .. })));
    }

    #[test]
    fn representative_examples() {
        let g = TorusGeometry::new(2, 1.0, 20).unwrap();
        let c = vec![vec![10, 5], vec![10, 4]];
        assert_eq!(representative(&g, &c, ClusterOrder::Unwrapped), vec![10, 4]);
        let seam = vec![vec![0, 3], vec![19, 3]];
        assert_eq!(representative(&g, &seam, ClusterOrder::Unwrapped), vec![19, 3]);
        assert_eq!(representative(&g, &seam, ClusterOrder::Plain), vec![0, 3]);
    }

    #[test]
    fn single_atom_centers_at_origin() {
        let g = TorusGeometry::new(2, 16.0, 16).unwrap();
        let mu = Measure::new(g.clone(), vec![0.0; 256], vec![Atom::new(vec![5.0, 7.0], 1.0)]).unwrap();
        let c = canonical_center(&mu, 0.25).unwrap();
        assert_eq!(c.measure.atoms()[0].position, vec![0.0, 0.0]);
        assert_eq!(c.anchor, vec![5, 7]);
        let trace = extract_with(&mu, &ExtractConfig::default()).unwrap();
        assert_eq!(trace.representatives.points(), &[vec![5.0, 7.0]]);
    }
}
