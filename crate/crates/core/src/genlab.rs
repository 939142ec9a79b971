//! Seeded scenario generators with planted ground truth.
//!
//! Randomness comes from ChaCha8 seeded with the scenario seed, and only
//! arithmetic (no libm transcendentals) touches the generated values, so a
//! scenario reproduces bit for bit on every platform.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{GridVec, TorusGeometry};
use crate::measure::{canonical_sum, Atom, Measure};
use crate::symmetry::generated_group;

/// Atom coordinates are multiples of `L / 2^20`.
pub const ATOM_GRID_BITS: u32 = 20;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `e^{-x}` for `x >= 0` by halving, a Taylor series, and repeated squaring.
fn exp_neg(x: f64) -> f64 {
    let mut k = 0;
    let mut y = x;
    while y > 0.125 {
        y *= 0.5;
        k += 1;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..=16 {
        term *= -y / i as f64;
        sum += term;
    }
    for _ in 0..k {
        sum *= sum;
    }
    sum
}

/// Poisson variate by CDF inversion, splitting large means into chunks.
fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    let mut left = mean;
    let mut count = 0;
    while left > 0.0 {
        let lambda = left.min(500.0);
        left -= lambda;
        let u: f64 = rng.gen();
        let mut p = exp_neg(lambda);
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf && p > 0.0 {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
        }
        count += k;
    }
    count
}

fn atom_position(rng: &mut ChaCha8Rng, g: &TorusGeometry) -> Vec<f64> {
    let unit = g.side() / (1u64 << ATOM_GRID_BITS) as f64;
    (0..g.dim()).map(|_| rng.gen_range(0..1u64 << ATOM_GRID_BITS) as f64 * unit).collect()
}

/// Unit atoms at a Poisson number of uniform positions; coincident atoms are merged.
pub fn gen_poisson(g: &TorusGeometry, intensity: f64, seed: u64) -> Measure {
    let mut r = rng(seed);
    let volume = g.side().powi(g.dim() as i32);
    let count = poisson(&mut r, intensity * volume);
    let mut atoms: Vec<Atom> = (0..count).map(|_| Atom::new(atom_position(&mut r, g), 1.0)).collect();
    atoms.sort_by(|a, b| crate::geometry::lex_cmp(&a.position, &b.position));
    atoms.dedup_by(|a, b| {
        if a.position == b.position {
            b.mass += a.mass;
            true
        } else {
            false
        }
    });
    Measure::new(g.clone(), vec![0.0; g.cell_count()], atoms).expect("generated atoms are valid")
}

fn box_blur(g: &TorusGeometry, values: &mut Vec<f64>, radius: usize) {
    if radius == 0 {
        return;
    }
    let n = g.n();
    let radius = radius.min((n - 1) / 2);
    let width = (2 * radius + 1) as f64;
    for axis in 0..g.dim() {
        let stride = n.pow((g.dim() - 1 - axis) as u32);
        let mut out = vec![0.0; values.len()];
        for start in 0..values.len() {
            if (start / stride) % n != 0 {
                continue;
            }
            for k in 0..n {
                let mut s = 0.0;
                for o in 0..=2 * radius {
                    let j = (k + n - radius + o) % n;
                    s += values[start + j * stride];
                }
                out[start + k * stride] = s / width;
            }
        }
        *values = out;
    }
}

/// Squared, box-smoothed white noise normalized to `total`; `smoothness` is the blur
/// radius in cells (two passes).
pub fn gen_diffuse_field(g: &TorusGeometry, smoothness: usize, total: f64, seed: u64) -> Measure {
    let mut r = rng(seed);
    let mut v: Vec<f64> = (0..g.cell_count()).map(|_| r.gen::<f64>() - 0.5).collect();
    box_blur(g, &mut v, smoothness);
    box_blur(g, &mut v, smoothness);
    let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
    let sum = canonical_sum(sq.iter().copied());
    let cells = sq.iter().map(|x| x * total / sum).collect();
    Measure::from_cells(g.clone(), cells).expect("squared field is nonnegative")
}

/// A diffuse profile on the remaining axes, constant along `axes`.
pub fn gen_with_invariant_direction(g: &TorusGeometry, axes: &[usize], seed: u64) -> Result<Measure> {
    if axes.is_empty() || axes.iter().any(|&a| a >= g.dim()) {
        return Err(Error::InvalidGeometry(format!("axis set {axes:?} for dimension {}", g.dim())));
    }
    let keep: Vec<usize> = (0..g.dim()).filter(|a| !axes.contains(a)).collect();
    if keep.is_empty() {
        return Measure::uniform(g.clone(), 1.0);
    }
    let wg = g.with_dim(keep.len())?;
    let profile = gen_diffuse_field(&wg, 2, 1.0, seed);
    let fiber = (g.n().pow(axes.len() as u32)) as f64;
    let cells = (0..g.cell_count())
        .map(|i| {
            let c = g.coords(i);
            let w: Vec<usize> = keep.iter().map(|&a| c[a]).collect();
            profile.cells()[wg.index(&w)] / fiber
        })
        .collect();
    Measure::from_cells(g.clone(), cells)
}

/// Converts lattice generators given as displacements to grid vectors.
pub fn lattice_grid_vectors(g: &TorusGeometry, generators: &[Vec<f64>]) -> Result<Vec<GridVec>> {
    generators
        .iter()
        .map(|v| g.to_grid_shift(v).map_err(|_| Error::BadLattice(format!("{v:?} is not a grid vector"))))
        .collect()
}

/// Generic diffuse field made exactly invariant under the lattice generated by
/// `generators` (grid vectors): every cell takes the value of the first cell of its coset.
pub fn gen_lattice_symmetric(g: &TorusGeometry, generators: &[GridVec], seed: u64) -> Result<Measure> {
    for v in generators {
        g.check_dim(v.len())?;
    }
    let gens: Vec<GridVec> = generators.iter().filter(|v| v.iter().any(|&k| k.rem_euclid(g.n() as i64) != 0)).cloned().collect();
    let group = generated_group(g, &gens);
    if group.invariant_dim() > 0 {
        return Err(Error::BadLattice("lattice contains a full direction of the torus".into()));
    }
    let seed_field = gen_diffuse_field(g, 1, 1.0, seed);
    let mut rep = vec![usize::MAX; g.cell_count()];
    for i in 0..g.cell_count() {
        if rep[i] != usize::MAX {
            continue;
        }
        for t in group.elements() {
            rep[g.shift_index(i, t)] = i;
        }
    }
    let cells: Vec<f64> = rep.iter().map(|&r| seed_field.cells()[r]).collect();
    let total = canonical_sum(cells.iter().copied());
    Measure::from_cells(g.clone(), cells.iter().map(|m| m / total).collect())
}

/// Generator family of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    Poisson { intensity: f64 },
    Diffuse { smoothness: usize },
    /// Diffuse field plus Poisson atoms carrying `weight` of the total.
    Mixed { smoothness: usize, intensity: f64, weight: f64 },
    InvariantDirection { axes: Vec<usize> },
    Lattice { generators: Vec<GridVec> },
}

/// Planted truth recorded alongside a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Planted {
    pub invariant_dim: Option<usize>,
    pub lattice: Option<Vec<GridVec>>,
    pub diffuse: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub dim: usize,
    pub side: f64,
    pub n: usize,
    pub kind: ScenarioKind,
}

impl Scenario {
    pub fn geometry(&self) -> Result<TorusGeometry> {
        TorusGeometry::new(self.dim, self.side, self.n)
    }

    pub fn generate(&self) -> Result<Measure> {
        let g = self.geometry()?;
        match &self.kind {
            ScenarioKind::Poisson { intensity } => Ok(gen_poisson(&g, *intensity, self.seed)),
            ScenarioKind::Diffuse { smoothness } => Ok(gen_diffuse_field(&g, *smoothness, 1.0, self.seed)),
            ScenarioKind::Mixed { smoothness, intensity, weight } => {
                let field = gen_diffuse_field(&g, *smoothness, 1.0 - weight, self.seed);
                let atoms = gen_poisson(&g, *intensity, self.seed ^ 0x9e37_79b9_7f4a_7c15);
                let count = atoms.atoms().len();
                if count == 0 {
                    return Ok(field);
                }
                field.plus(&atoms.scaled(weight / count as f64)?)
            }
            ScenarioKind::InvariantDirection { axes } => gen_with_invariant_direction(&g, axes, self.seed),
            ScenarioKind::Lattice { generators } => gen_lattice_symmetric(&g, generators, self.seed),
        }
    }

    pub fn planted(&self) -> Planted {
        match &self.kind {
            ScenarioKind::Poisson { .. } => Planted { invariant_dim: Some(0), lattice: None, diffuse: false },
            ScenarioKind::Diffuse { .. } => Planted { invariant_dim: Some(0), lattice: None, diffuse: true },
            ScenarioKind::Mixed { .. } => Planted { invariant_dim: Some(0), lattice: None, diffuse: false },
            ScenarioKind::InvariantDirection { axes } => {
                Planted { invariant_dim: Some(axes.len()), lattice: None, diffuse: true }
            }
            ScenarioKind::Lattice { generators } => {
                Planted { invariant_dim: Some(0), lattice: Some(generators.clone()), diffuse: true }
            }
        }
    }

    /// Parses one manifest line: `seed kind d L n key=value...`.
    pub fn parse(line: &str) -> Result<Self> {
        let bad = |msg: String| Error::Parse { line: 0, msg };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 5 {
            return Err(bad(format!("scenario needs `seed kind d L n`: `{line}`")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad integer `{s}`")));
        let seed = toks[0].parse::<u64>().map_err(|_| bad(format!("bad seed `{}`", toks[0])))?;
        let mut params = std::collections::BTreeMap::new();
        for kv in &toks[5..] {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("expected key=value, got `{kv}`")))?;
            params.insert(k, v);
        }
        let get = |k: &str| params.get(k).copied().ok_or_else(|| bad(format!("missing `{k}`")));
        let kind = match toks[1] {
            "poisson" => ScenarioKind::Poisson { intensity: num(get("intensity")?)? },
            "diffuse" => ScenarioKind::Diffuse { smoothness: int(get("smooth")?)? },
            "mixed" => ScenarioKind::Mixed {
                smoothness: int(get("smooth")?)?,
                intensity: num(get("intensity")?)?,
                weight: num(get("weight")?)?,
            },
            "invariant" => ScenarioKind::InvariantDirection {
                axes: get("axes")?.split(',').map(int).collect::<Result<_>>()?,
            },
            "lattice" => ScenarioKind::Lattice {
                generators: get("gens")?
                    .split(';')
                    .map(|v| {
                        v.split(',')
                            .map(|k| k.parse::<i64>().map_err(|_| bad(format!("bad generator `{v}`"))))
                            .collect()
                    })
                    .collect::<Result<_>>()?,
            },
            other => return Err(bad(format!("unknown scenario kind `{other}`"))),
        };
        Ok(Self { seed, dim: int(toks[2])?, side: num(toks[3])?, n: int(toks[4])?, kind })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.seed)?;
        match &self.kind {
            ScenarioKind::Poisson { .. } => write!(f, "poisson")?,
            ScenarioKind::Diffuse { .. } => write!(f, "diffuse")?,
            ScenarioKind::Mixed { .. } => write!(f, "mixed")?,
            ScenarioKind::InvariantDirection { .. } => write!(f, "invariant")?,
            ScenarioKind::Lattice { .. } => write!(f, "lattice")?,
        }
        write!(f, " {} {} {}", self.dim, self.side, self.n)?;
        match &self.kind {
            ScenarioKind::Poisson { intensity } => write!(f, " intensity={intensity}"),
            ScenarioKind::Diffuse { smoothness } => write!(f, " smooth={smoothness}"),
            ScenarioKind::Mixed { smoothness, intensity, weight } => {
                write!(f, " smooth={smoothness} intensity={intensity} weight={weight}")
            }
            ScenarioKind::InvariantDirection { axes } => {
                let a: Vec<String> = axes.iter().map(|a| a.to_string()).collect();
                write!(f, " axes={}", a.join(","))
            }
            ScenarioKind::Lattice { generators } => {
                let gs: Vec<String> = generators
                    .iter()
                    .map(|v| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","))
                    .collect();
                write!(f, " gens={}", gs.join(";"))
            }
        }
    }
}

/// Text manifest: a `manifest v1` line, then one scenario per line; `#` starts a comment.
pub fn parse_manifest(text: &str) -> Result<Vec<Scenario>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    match lines.next() {
        Some((_, l)) if l.trim() == "manifest v1" => {}
        _ => return Err(Error::Parse { line: 1, msg: "expected `manifest v1`".into() }),
    }
    lines
        .map(|(i, l)| {
            Scenario::parse(l).map_err(|e| match e {
                Error::Parse { msg, .. } => Error::Parse { line: i + 1, msg },
                other => other,
            })
        })
        .collect()
}

pub fn serialize_manifest(scenarios: &[Scenario]) -> String {
    let mut s = String::from("manifest v1\n# seed kind d L n params\n");
    for sc in scenarios {
        s.push_str(&sc.to_string());
        s.push('\n');
    }
    s
}

/// Essentially free scenarios cycling through diffuse, atomic and mixed generators.
pub fn free_corpus(count: usize, first_seed: u64, side: f64, n: usize) -> Vec<Scenario> {
    (0..count)
        .map(|i| {
            let kind = match i % 3 {
                0 => ScenarioKind::Diffuse { smoothness: 2 + (i / 3) % 3 },
                1 => ScenarioKind::Poisson { intensity: 0.08 },
                _ => ScenarioKind::Mixed { smoothness: 2, intensity: 0.05, weight: 0.25 },
            };
            Scenario { seed: first_seed + i as u64, dim: 2, side, n, kind }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::{default_tolerance, symmetry_group};

    #[test]
    fn exp_matches_reference() {
        for x in [0.0, 0.1, 1.0, 7.5, 100.0, 500.0] {
            let want = (-x as f64).exp();
            assert!((exp_neg(x) - want).abs() <= 1e-12 * want, "x = {x}");
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let g = TorusGeometry::new(2, 8.0, 16).unwrap();
        assert_eq!(gen_poisson(&g, 1.0, 7), gen_poisson(&g, 1.0, 7));
        assert_eq!(gen_diffuse_field(&g, 2, 1.0, 7), gen_diffuse_field(&g, 2, 1.0, 7));
        assert_ne!(gen_diffuse_field(&g, 2, 1.0, 7), gen_diffuse_field(&g, 2, 1.0, 8));
    }

    #[test]
    fn poisson_atoms_on_subgrid() {
        let g = TorusGeometry::new(2, 8.0, 16).unwrap();
        let mu = gen_poisson(&g, 2.0, 3);
        let unit = 8.0 / (1u64 << ATOM_GRID_BITS) as f64;
        assert!(mu.atoms().iter().all(|a| a.position.iter().all(|&x| (x / unit).fract() == 0.0)));
        assert!(gen_poisson(&g, 1e-12, 3).atoms().is_empty());
    }

    #[test]
    fn diffuse_field_total() {
        let g = TorusGeometry::new(2, 4.0, 32).unwrap();
        let mu = gen_diffuse_field(&g, 3, 2.5, 1);
        assert!((mu.total_mass() - 2.5).abs() <= 1e-12 * 2.5);
        assert!(mu.cells().iter().all(|&m| m > 0.0));
        assert_eq!(symmetry_group(&mu, default_tolerance(&mu)).order(), 1);
    }

    #[test]
    fn planted_truths() {
        let g = TorusGeometry::new(2, 4.0, 16).unwrap();
        let mu = gen_with_invariant_direction(&g, &[0], 5).unwrap();
        assert_eq!(symmetry_group(&mu, default_tolerance(&mu)).invariant_dim(), 1);
        let full = gen_with_invariant_direction(&g, &[0, 1], 5).unwrap();
        assert_eq!(full, Measure::uniform(g.clone(), 1.0).unwrap());
        let lat = gen_lattice_symmetric(&g, &[vec![4, 0], vec![0, 4]], 5).unwrap();
        let h = symmetry_group(&lat, default_tolerance(&lat));
        assert_eq!(h.generators(), &[vec![4, 0], vec![0, 4]]);
        assert!(matches!(gen_lattice_symmetric(&g, &[vec![1, 0]], 5), Err(Error::BadLattice(_))));
    }

    #[test]
    fn manifest_round_trip() {
        let mut sc = free_corpus(3, 10, 16.0, 64);
        sc.push(Scenario { seed: 1, dim: 2, side: 4.0, n: 64, kind: ScenarioKind::Lattice { generators: vec![vec![16, 0], vec![0, 16]] } });
        sc.push(Scenario { seed: 2, dim: 3, side: 4.0, n: 8, kind: ScenarioKind::InvariantDirection { axes: vec![0, 2] } });
        let text = serialize_manifest(&sc);
        assert_eq!(parse_manifest(&text).unwrap(), sc);
    }
}
