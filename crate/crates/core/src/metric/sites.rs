//! Measures rescaled to a common fixed-point total, and the bipartite coupling
//! graph between two of them restricted to pairs within a given distance.
//!
//! Masses are converted to integer units of `2^-40` of the total so that flow
//! values, and every decision derived from them, are exact and independent of
//! the order in which sites are stored.

use crate::error::{Error, Result};
use crate::geometry::{TorusGeometry, MAX_DIM};
use crate::measure::Measure;

use super::flow::FlowNetwork;

pub(crate) const UNIT_SCALE: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SiteMeasure {
    pub geometry: TorusGeometry,
    pub cells: Vec<u64>,
    pub atoms: Vec<([f64; MAX_DIM], u64)>,
    pub total: u64,
}

impl SiteMeasure {
    pub fn from_measure(mu: &Measure) -> Result<Self> {
        let total = mu.total_mass();
        if !(total > 0.0) {
            return Err(Error::ZeroMass);
        }
        let unit = |m: f64| (m / total * UNIT_SCALE).round() as u64;
        let cells: Vec<u64> = mu.cells().iter().map(|&m| unit(m)).collect();
        let atoms: Vec<([f64; MAX_DIM], u64)> = mu
            .atoms()
            .iter()
            .map(|a| {
                let mut p = [0.0; MAX_DIM];
                p[..a.position.len()].copy_from_slice(&a.position);
                (p, unit(a.mass))
            })
            .filter(|(_, u)| *u > 0)
            .collect();
        let total = cells.iter().sum::<u64>() + atoms.iter().map(|a| a.1).sum::<u64>();
        Ok(Self { geometry: mu.geometry().clone(), cells, atoms, total })
    }

    pub fn translate_grid(&self, shift: &[i64]) -> Self {
        let g = &self.geometry;
        let mut cells = vec![0; self.cells.len()];
        for (i, &u) in self.cells.iter().enumerate() {
            cells[g.shift_index(i, shift)] = u;
        }
        let h = g.cell_width();
        let atoms = self
            .atoms
            .iter()
            .map(|(p, u)| {
                let mut q = *p;
                for a in 0..g.dim() {
                    q[a] = g.wrap(p[a] + shift[a] as f64 * h);
                }
                (q, *u)
            })
            .collect();
        Self { geometry: g.clone(), cells, atoms, total: self.total }
    }
}

/// Which site pairs count as close.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Reach {
    /// distance <= r
    Closed(f64),
    /// distance < r
    Open(f64),
}

impl Reach {
    pub fn radius(self) -> f64 {
        match self {
            Reach::Closed(r) | Reach::Open(r) => r,
        }
    }

    pub fn admits(self, d: f64) -> bool {
        match self {
            Reach::Closed(r) => d <= r,
            Reach::Open(r) => d < r,
        }
    }
}

/// Grid offsets admitted by a reach, one per residue class.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    pub reach: Reach,
    pub offsets: Vec<[i64; MAX_DIM]>,
    pub box_radius: i64,
}

impl Stencil {
    pub fn new(g: &TorusGeometry, reach: Reach) -> Self {
        let h = g.cell_width();
        let n = g.n() as i64;
        let r = reach.radius();
        let box_radius = if r.is_finite() { ((r / h).ceil() as i64 + 1).min(n) } else { n };
        let mut offsets = Vec::new();
        for_each_box(g, [0; MAX_DIM], box_radius, |coords| {
            let mut o = [0i64; MAX_DIM];
            for a in 0..g.dim() {
                o[a] = g.minimal_rep(coords[a] as i64);
            }
            if reach.admits(g.grid_norm(&o[..g.dim()])) {
                offsets.push(o);
            }
        });
        offsets.sort_by_key(|o| (o.iter().map(|k| k * k).sum::<i64>(), *o));
        Self { reach, offsets, box_radius }
    }
}

/// Visits every cell (once per residue) in the box of half-width `radius` around `center`.
pub(crate) fn for_each_box(g: &TorusGeometry, center: [usize; MAX_DIM], radius: i64, mut f: impl FnMut([usize; MAX_DIM])) {
    let n = g.n() as i64;
    let d = g.dim();
    let full = 2 * radius + 1 >= n;
    let len = if full { n } else { 2 * radius + 1 };
    let start: [i64; MAX_DIM] = std::array::from_fn(|a| if full { 0 } else { center[a] as i64 - radius });
    let mut idx = [0i64; MAX_DIM];
    loop {
        let mut c = [0usize; MAX_DIM];
        for a in 0..d {
            c[a] = (start[a] + idx[a]).rem_euclid(n) as usize;
        }
        f(c);
        let mut a = d;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < len {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// Result of evaluating the coupling graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Matching {
    pub matched: u64,
    pub base: u64,
}

impl Matching {
    pub fn unmatched_fraction(self) -> f64 {
        (self.base - self.matched.min(self.base)) as f64 / self.base as f64
    }
}

/// Maximum mass (in units) that can be matched across pairs admitted by the stencil.
///
/// `give_up` receives a certified lower bound on the unmatched fraction; when it
/// returns true the flow is skipped and `None` is returned. The flow may stop as soon
/// as `enough` accepts a partial matching, so `matched` is exact only when it never does.
pub(crate) fn match_within(
    mu: &SiteMeasure,
    nu: &SiteMeasure,
    stencil: &Stencil,
    give_up: impl Fn(f64) -> bool,
    enough: impl Fn(Matching) -> bool,
) -> Option<Matching> {
    let g = &mu.geometry;
    let dim = g.dim();
    let reach = stencil.reach;
    let base = mu.total.min(nu.total);

    let none = u32::MAX;
    let mut right_of_cell = vec![none; nu.cells.len()];
    let mut right_mass = Vec::new();
    for (j, &b) in nu.cells.iter().enumerate() {
        if b > 0 {
            right_of_cell[j] = right_mass.len() as u32;
            right_mass.push(b);
        }
    }
    let right_atoms = right_mass.len();
    right_mass.extend(nu.atoms.iter().map(|a| a.1));

    let mut left_of_cell = vec![none; mu.cells.len()];
    let mut left_mass = Vec::new();
    for (i, &a) in mu.cells.iter().enumerate() {
        if a > 0 {
            left_of_cell[i] = left_mass.len() as u32;
            left_mass.push(a);
        }
    }
    let left_atoms = left_mass.len();
    left_mass.extend(mu.atoms.iter().map(|a| a.1));

    if !mu.atoms.is_empty() || !nu.atoms.is_empty() {
        let lb = atom_reach_bound(mu, nu, stencil, base).max(atom_reach_bound(nu, mu, stencil, base));
        if give_up(Matching { matched: base - lb.min(base), base }.unmatched_fraction()) {
            return None;
        }
    }

    let mut edges: Vec<(u32, u32)> = Vec::new();

    // cell to cell
    for (i, &a) in mu.cells.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let l = left_of_cell[i];
        let c = g.coords(i);
        for o in &stencil.offsets {
            let j = (0..dim).fold(0usize, |acc, ax| {
                acc * g.n() + (c[ax] as i64 + o[ax]).rem_euclid(g.n() as i64) as usize
            });
            let r = right_of_cell[j];
            if r != none {
                edges.push((l, r));
            }
        }
    }
    // atoms against cells
    if !mu.atoms.is_empty() || !nu.atoms.is_empty() {
        for (k, (p, _)) in mu.atoms.iter().enumerate() {
            let l = (left_atoms + k) as u32;
            let home = g.coords(g.cell_of(&p[..dim]));
            for_each_box(g, home, stencil.box_radius, |c| {
                let j = g.index(&c[..dim]);
                let r = right_of_cell[j];
                if r != none && reach.admits(g.torus_distance(&g.cell_center(j), p)) {
                    edges.push((l, r));
                }
            });
            for (m, (q, _)) in nu.atoms.iter().enumerate() {
                if reach.admits(g.torus_distance(p, q)) {
                    edges.push((l, (right_atoms + m) as u32));
                }
            }
        }
        for (m, (q, _)) in nu.atoms.iter().enumerate() {
            let r = (right_atoms + m) as u32;
            let home = g.coords(g.cell_of(&q[..dim]));
            for_each_box(g, home, stencil.box_radius, |c| {
                let i = g.index(&c[..dim]);
                let l = left_of_cell[i];
                if l != none && reach.admits(g.torus_distance(&g.cell_center(i), q)) {
                    edges.push((l, r));
                }
            });
        }
    }

    let mut reach_left = vec![0u64; left_mass.len()];
    let mut reach_right = vec![0u64; right_mass.len()];
    let mut deg_left = vec![0u32; left_mass.len()];
    let mut deg_right = vec![0u32; right_mass.len()];
    for &(l, r) in &edges {
        reach_left[l as usize] += right_mass[r as usize];
        reach_right[r as usize] += left_mass[l as usize];
        deg_left[l as usize] += 1;
        deg_right[r as usize] += 1;
    }
    let excess = |mass: &[u64], reach: &[u64]| -> u64 {
        mass.iter().zip(reach).map(|(&m, &r)| m.saturating_sub(r)).sum()
    };
    let lb_left = (base + excess(&left_mass, &reach_left)).saturating_sub(mu.total);
    let lb_right = (base + excess(&right_mass, &reach_right)).saturating_sub(nu.total);
    let mut lb = lb_left.max(lb_right);
    if !give_up(Matching { matched: base - lb.min(base), base }.unmatched_fraction()) {
        lb = lb.max(cut_bound(mu, nu, stencil, base));
    }
    let lower = Matching { matched: base - lb.min(base), base };
    if give_up(lower.unmatched_fraction()) {
        return None;
    }

    // disjoint pairs need no flow
    if deg_left.iter().all(|&d| d <= 1) && deg_right.iter().all(|&d| d <= 1) {
        let matched = edges
            .iter()
            .map(|&(l, r)| left_mass[l as usize].min(right_mass[r as usize]))
            .sum::<u64>();
        return Some(Matching { matched, base });
    }

    let nl = left_mass.len();
    let nr = right_mass.len();
    let (s, t) = (nl + nr, nl + nr + 1);
    let mut net = FlowNetwork::new(nl + nr + 2);
    for (l, &m) in left_mass.iter().enumerate() {
        if deg_left[l] > 0 {
            net.add_edge(s, l, m);
        }
    }
    for (r, &m) in right_mass.iter().enumerate() {
        if deg_right[r] > 0 {
            net.add_edge(nl + r, t, m);
        }
    }
    for &(l, r) in &edges {
        let cap = left_mass[l as usize].min(right_mass[r as usize]);
        net.add_edge(l as usize, nl + r as usize, cap);
    }
    Some(Matching { matched: net.max_flow_until(s, t, |f| enough(Matching { matched: f, base })), base })
}

/// Reach bound restricted to the atoms of `a`, which is cheap to evaluate before
/// any edge is built: an atom can send no more than the `b`-mass within reach.
fn atom_reach_bound(a: &SiteMeasure, b: &SiteMeasure, stencil: &Stencil, base: u64) -> u64 {
    let g = &a.geometry;
    let dim = g.dim();
    let excess: u64 = a
        .atoms
        .iter()
        .map(|(p, w)| {
            let mut near = 0u64;
            for_each_box(g, g.coords(g.cell_of(&p[..dim])), stencil.box_radius, |c| {
                let j = g.index(&c[..dim]);
                if b.cells[j] > 0 && stencil.reach.admits(g.torus_distance(&g.cell_center(j), p)) {
                    near += b.cells[j];
                }
            });
            near += b.atoms.iter().filter(|(q, _)| stencil.reach.admits(g.torus_distance(p, q))).map(|x| x.1).sum::<u64>();
            w.saturating_sub(near)
        })
        .sum();
    (base + excess).saturating_sub(a.total)
}

/// Lower bound on the unmatched mass from cuts `A = { cells : a_i > b_i * k / 2 }`,
/// taken from either side: whatever `A` sends must land among the `b`-cells in its
/// stencil neighbourhood or on `b`'s atoms.
fn cut_bound(mu: &SiteMeasure, nu: &SiteMeasure, stencil: &Stencil, base: u64) -> u64 {
    let g = &mu.geometry;
    let one_side = |a: &SiteMeasure, b: &SiteMeasure| -> u64 {
        let mut best = 0u64;
        let b_atoms: u64 = b.atoms.iter().map(|x| x.1).sum();
        for num in [1u64, 2, 4] {
            let mut near = vec![false; b.cells.len()];
            let mut inside = 0u64;
            for (i, (&x, &y)) in a.cells.iter().zip(&b.cells).enumerate() {
                if 2 * x > y * num && x > 0 {
                    inside += x;
                    for o in &stencil.offsets {
                        near[g.shift_index(i, &o[..g.dim()])] = true;
                    }
                }
            }
            let outside = a.total - inside;
            let reach: u64 = b.cells.iter().zip(&near).filter(|(_, &m)| m).map(|(&y, _)| y).sum::<u64>() + b_atoms;
            best = best.max(base.saturating_sub(outside + reach));
        }
        best
    };
    one_side(mu, nu).max(one_side(nu, mu))
}

/// Every distinct torus distance between a site of `mu` and a site of `nu`, sorted.
pub(crate) fn candidate_distances(mu: &SiteMeasure, nu: &SiteMeasure) -> Vec<f64> {
    let g = &mu.geometry;
    let mut out = Vec::new();
    let mu_cells: Vec<usize> = (0..mu.cells.len()).filter(|&i| mu.cells[i] > 0).collect();
    let nu_cells: Vec<usize> = (0..nu.cells.len()).filter(|&j| nu.cells[j] > 0).collect();
    if !mu_cells.is_empty() && !nu_cells.is_empty() {
        let present: std::collections::HashSet<usize> = nu_cells.iter().copied().collect();
        let mut seen = std::collections::HashSet::new();
        for off in g.all_grid_vectors() {
            let hit = mu_cells.iter().any(|&i| present.contains(&g.shift_index(i, &off)));
            if hit {
                let d = g.grid_norm(&off);
                if seen.insert(d.to_bits()) {
                    out.push(d);
                }
            }
        }
    }
    for (p, _) in &mu.atoms {
        for &j in &nu_cells {
            out.push(g.torus_distance(&g.cell_center(j), p));
        }
        for (q, _) in &nu.atoms {
            out.push(g.torus_distance(p, q));
        }
    }
    for (q, _) in &nu.atoms {
        for &i in &mu_cells {
            out.push(g.torus_distance(&g.cell_center(i), q));
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}
