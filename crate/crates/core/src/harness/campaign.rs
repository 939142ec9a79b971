use std::collections::HashMap;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::alloc::{balance, fair_tessellation, verify_balance, AllocationMap, BalanceCase, Target};
use crate::error::{Error, Result};
use crate::factor::{extract_with, ClusterOrder, ExtractConfig};
use crate::genlab::{gen_poisson, rng, Scenario, ScenarioKind};
use crate::geometry::{GridVec, TorusGeometry};
use crate::measure::{shift_vector, Measure};
use crate::pattern::PointPattern;
use crate::symmetry::{default_tolerance, generated_group, invariant_directions, symmetry_group, shell_index};

use super::{CheckRecord, VerificationReport};

/// What `verify_equivariance` runs on each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    /// The measure itself; a sanity check of the shift plumbing.
    Identity,
    /// Factor point process with the equivariant cluster order.
    Extract,
    /// Factor point process with the raw lexicographic cluster order.
    ExtractPlain,
    /// Balancing allocation from the sample onto a paired atomic measure.
    Balance,
}

impl FromStr for Pipeline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "pp" => Ok(Self::Extract),
            "pp-plain" => Ok(Self::ExtractPlain),
            "alloc" => Ok(Self::Balance),
            _ => Err(Error::Parse { line: 0, msg: format!("unknown pipeline `{s}`") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Campaign {
    Equivariance,
    Separation,
    Necessity,
    Symmetry,
    Balance,
    All,
}

impl Campaign {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Equivariance => "equivariance",
            Self::Separation => "separation",
            Self::Necessity => "necessity",
            Self::Symmetry => "symmetry",
            Self::Balance => "balance",
            Self::All => "all",
        }
    }
}

impl FromStr for Campaign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Self::Equivariance, Self::Separation, Self::Necessity, Self::Symmetry, Self::Balance, Self::All]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("unknown campaign `{s}`") })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOptions {
    pub shifts: usize,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub pipeline: Pipeline,
    pub m_max: u32,
    pub tolerance: Option<f64>,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        Self { shifts: 20, jobs: 0, pipeline: Pipeline::Extract, m_max: 64, tolerance: None }
    }
}

impl CampaignOptions {
    fn extract_config(&self, order: ClusterOrder) -> ExtractConfig {
        ExtractConfig { m_max: self.m_max, tolerance: self.tolerance, order, ..ExtractConfig::default() }
    }
}

const SHIFT_SALT: u64 = 0x5348_4946_5453_0001;
const PAIR_SALT: u64 = 0x5041_4952_0000_0001;
const BALANCE_TOL: f64 = 1e-9;

/// `count` grid shifts drawn uniformly from `[0, n)^d`, reproducible from `seed`.
pub fn shift_sample(g: &TorusGeometry, seed: u64, count: usize) -> Vec<GridVec> {
    let mut r = rng(seed ^ SHIFT_SALT);
    (0..count).map(|_| (0..g.dim()).map(|_| r.gen_range(0..g.n() as i64)).collect()).collect()
}

/// 0 when the patterns coincide; otherwise the largest distance from a point of
/// either pattern to the other, or infinity when the sizes differ.
pub fn pattern_discrepancy(a: &PointPattern, b: &PointPattern) -> f64 {
    if a.points() == b.points() {
        return 0.0;
    }
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let g = a.geometry();
    let far = |x: &PointPattern, y: &PointPattern| {
        x.points()
            .iter()
            .map(|p| y.points().iter().map(|q| g.torus_distance(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    far(a, b).max(far(b, a))
}

/// Number of source cells whose pieces under `shifted` (computed on the inputs
/// moved by `t`) differ from the pieces of `original` moved by `t`.
pub fn allocation_shift_mismatches(
    original: &AllocationMap,
    psi: &Measure,
    shifted: &AllocationMap,
    shifted_psi: &Measure,
    t: &[i64],
) -> usize {
    let g = original.geometry();
    let tv = shift_vector(g, &t.to_vec());
    let moved_atom: HashMap<Vec<u64>, usize> = shifted_psi
        .atoms()
        .iter()
        .enumerate()
        .map(|(k, a)| (a.position.iter().map(|x| x.to_bits()).collect(), k))
        .collect();
    let move_target = |target: Target| -> Option<Target> {
        match target {
            Target::Cell(j) => Some(Target::Cell(g.shift_index(j, t))),
            Target::Atom(k) => {
                let p: Vec<u64> =
                    psi.atoms()[k].position.iter().zip(&tv).map(|(x, s)| g.wrap(x + s).to_bits()).collect();
                moved_atom.get(&p).map(|&k2| Target::Atom(k2))
            }
            Target::Point(_) => None,
        }
    };
    let key = |pieces: Vec<(Option<Target>, u64)>| {
        let mut v = pieces;
        v.sort();
        v
    };
    (0..g.cell_count())
        .filter(|&i| {
            let want = key(original.cell_pieces(i).iter().map(|p| (move_target(p.target), p.mass.to_bits())).collect());
            let got = key(shifted.cell_pieces(g.shift_index(i, t)).iter().map(|p| (Some(p.target), p.mass.to_bits())).collect());
            want != got
        })
        .count()
}

/// Paired atomic target for a diffuse scenario: Poisson atoms rescaled to the same total.
fn balance_pair(sc: &Scenario) -> Result<Option<(Measure, Measure)>> {
    let phi = sc.generate()?;
    if !phi.is_diffuse() {
        return Ok(None);
    }
    let g = phi.geometry();
    let atoms = gen_poisson(g, 0.05, sc.seed ^ PAIR_SALT);
    if atoms.atoms().is_empty() {
        return Ok(None);
    }
    let psi = atoms.scaled(phi.total_mass() / atoms.total_mass())?;
    Ok(Some((phi, psi)))
}

fn is_free(sc: &Scenario) -> bool {
    sc.planted().invariant_dim == Some(0)
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn same_outcome<T>(a: &Result<T>, b: &Result<T>) -> bool {
    match (a, b) {
        (Err(x), Err(y)) => std::mem::discriminant(x) == std::mem::discriminant(y),
        _ => false,
    }
}

fn equivariance_records(sc: &Scenario, pipeline: Pipeline, opts: &CampaignOptions) -> Result<Vec<CheckRecord>> {
    let g = sc.geometry()?;
    let shifts = shift_sample(&g, sc.seed, opts.shifts);
    let id = match pipeline {
        Pipeline::Identity => "equivariance.identity",
        Pipeline::Extract => "equivariance.pp",
        Pipeline::ExtractPlain => "equivariance.pp_plain",
        Pipeline::Balance => "equivariance.alloc",
    };
    let mut out = Vec::new();
    match pipeline {
        Pipeline::Identity => {
            let mu = sc.generate()?;
            for (case, t) in shifts.iter().enumerate() {
                let moved = mu.translate_grid(t);
                let back = moved.translate_grid(&t.iter().map(|k| -k).collect::<Vec<_>>());
                let d = back.max_cell_discrepancy(&mu);
                out.push(CheckRecord::new(id, sc.seed, case as u32, back == mu, d, 0.0));
            }
        }
        Pipeline::Extract | Pipeline::ExtractPlain => {
            if !is_free(sc) {
                return Ok(out);
            }
            let order = if pipeline == Pipeline::Extract { ClusterOrder::Unwrapped } else { ClusterOrder::Plain };
            let config = opts.extract_config(order);
            let mu = sc.generate()?;
            let base = extract_with(&mu, &config).map(|t| t.representatives);
            for (case, t) in shifts.iter().enumerate() {
                let moved = extract_with(&mu.translate_grid(t), &config).map(|t| t.representatives);
                let rec = match (&base, &moved) {
                    (Ok(p), Ok(q)) => {
                        let d = pattern_discrepancy(&p.translated(&shift_vector(&g, t)), q);
                        CheckRecord::new(id, sc.seed, case as u32, d == 0.0, d, 0.0)
                    }
                    _ => CheckRecord::new(id, sc.seed, case as u32, same_outcome(&base, &moved), f64::INFINITY, 0.0),
                };
                out.push(rec);
            }
        }
        Pipeline::Balance => {
            let Some((phi, psi)) = balance_pair(sc)? else {
                return Ok(out);
            };
            let base = balance(&phi, &psi);
            for (case, t) in shifts.iter().enumerate() {
                let (phi_t, psi_t) = (phi.translate_grid(t), psi.translate_grid(t));
                let moved = balance(&phi_t, &psi_t);
                let rec = match (&base, &moved) {
                    (Ok(a), Ok(b)) => {
                        let bad = allocation_shift_mismatches(&a.map, &psi, &b.map, &psi_t, t);
                        CheckRecord::new(id, sc.seed, case as u32, bad == 0, bad as f64, 0.0)
                    }
                    _ => CheckRecord::new(id, sc.seed, case as u32, same_outcome(&base, &moved), f64::INFINITY, 0.0),
                };
                out.push(rec);
            }
        }
    }
    Ok(out)
}

/// Checks `pipeline(mu + t) == pipeline(mu) + t` exactly for `shifts` random grid
/// shifts of every sample. Samples the pipeline does not apply to are skipped.
pub fn verify_equivariance(corpus: &[Scenario], opts: &CampaignOptions) -> Result<VerificationReport> {
    let start = Instant::now();
    let records = in_pool(opts.jobs, || collect(corpus, |sc| equivariance_records(sc, opts.pipeline, opts)))?;
    Ok(VerificationReport::new(Campaign::Equivariance.name(), records, start.elapsed()))
}

fn collect(corpus: &[Scenario], f: impl Fn(&Scenario) -> Result<Vec<CheckRecord>> + Sync + Send) -> Result<Vec<CheckRecord>> {
    let parts: Vec<Result<Vec<CheckRecord>>> = corpus.par_iter().map(f).collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn separation_records(sc: &Scenario, opts: &CampaignOptions) -> Result<Vec<CheckRecord>> {
    if !is_free(sc) {
        return Ok(Vec::new());
    }
    let mu = sc.generate()?;
    let rec = |id: &str, ok: bool, v: f64, tol: f64| CheckRecord::new(id, sc.seed, 0, ok, v, tol);
    Ok(match extract_with(&mu, &opts.extract_config(ClusterOrder::Unwrapped)) {
        Ok(trace) => {
            let p = &trace.representatives;
            vec![
                rec("pp.nonempty", !p.is_empty(), p.len() as f64, 1.0),
                rec("pp.separation", p.separation() >= trace.shell.outer, p.separation(), trace.shell.outer),
                rec("pp.retries", true, trace.retries as f64, opts.m_max as f64),
            ]
        }
        // samples without a usable epsilon are outside the contract
        Err(Error::EpsilonNotFound { m_max }) => vec![rec("pp.no_epsilon", true, m_max as f64, 0.0)],
        Err(Error::KeyPropertyViolation { .. }) => vec![rec("pp.dichotomy", false, 1.0, 0.0)],
        Err(_) => vec![rec("pp.error", false, 1.0, 0.0)],
    })
}

fn necessity_records(sc: &Scenario, opts: &CampaignOptions) -> Result<Vec<CheckRecord>> {
    let ScenarioKind::InvariantDirection { axes } = &sc.kind else {
        return Ok(Vec::new());
    };
    let mu = sc.generate()?;
    let rejected = matches!(
        extract_with(&mu, &opts.extract_config(ClusterOrder::Unwrapped)),
        Err(Error::HasInvariantDirection(_))
    );
    let tol = opts.tolerance.unwrap_or_else(|| default_tolerance(&mu));
    let dim = invariant_directions(&mu, tol).len();
    Ok(vec![
        CheckRecord::new("pp.rejects_invariant", sc.seed, 0, rejected, rejected as u8 as f64, 1.0),
        CheckRecord::new("sym.invariant_dim", sc.seed, 0, dim == axes.len(), dim as f64, axes.len() as f64),
    ])
}

/// Shell index forced by the gap of a planted lattice: the smallest `N` with `2/N` below it.
fn forced_shell_index(g: &TorusGeometry, generators: &[GridVec]) -> u32 {
    let planted = generated_group(g, generators);
    let gap = planted
        .elements()
        .iter()
        .filter(|v| v.iter().any(|&k| k != 0))
        .map(|v| g.grid_norm(v))
        .fold(f64::INFINITY, f64::min);
    if gap.is_infinite() {
        1
    } else {
        (2.0 / gap).floor() as u32 + 1
    }
}

fn symmetry_records(sc: &Scenario, opts: &CampaignOptions) -> Result<Vec<CheckRecord>> {
    let ScenarioKind::Lattice { generators } = &sc.kind else {
        return Ok(Vec::new());
    };
    let g = sc.geometry()?;
    let mu = sc.generate()?;
    let group = symmetry_group(&mu, opts.tolerance.unwrap_or_else(|| default_tolerance(&mu)));
    let planted = generated_group(&g, generators);
    let exact = group.elements() == planted.elements();
    let want = forced_shell_index(&g, generators);
    let got = shell_index(&group).map(|s| s.index).unwrap_or(0);
    Ok(vec![
        CheckRecord::new("sym.lattice", sc.seed, 0, exact, group.order() as f64, planted.order() as f64),
        CheckRecord::new("sym.shell", sc.seed, 0, got == want, got as f64, want as f64),
    ])
}

/// Balance certificate of one allocation as report records.
pub fn verify_balance_report(map: &AllocationMap, phi: &Measure, psi: &Measure, seed: u64) -> Result<VerificationReport> {
    let start = Instant::now();
    let r = verify_balance(map, phi, psi)?;
    let records = vec![
        CheckRecord::new("alloc.residual", seed, 0, r.max_relative <= BALANCE_TOL, r.max_relative, BALANCE_TOL),
        CheckRecord::new("alloc.sources", seed, 0, r.sources_exact, r.max_source_residual, 0.0),
    ];
    Ok(VerificationReport::new("balance", records, start.elapsed()))
}

fn capacity_residual(mu: &Measure, p: &PointPattern) -> Result<f64> {
    let cap = mu.total_mass() / p.len() as f64;
    let inc = fair_tessellation(mu, p)?.incoming();
    Ok((0..p.len())
        .map(|k| (inc.get(&Target::Point(k)).copied().unwrap_or(0.0) - cap).abs() / cap)
        .fold(0.0, f64::max))
}

fn balance_records(sc: &Scenario) -> Result<Vec<CheckRecord>> {
    if !is_free(sc) {
        return Ok(Vec::new());
    }
    let Some((phi, psi)) = balance_pair(sc)? else {
        return Ok(Vec::new());
    };
    match balance(&phi, &psi) {
        Ok(b) => {
            let mut out = verify_balance_report(&b.map, &phi, &psi, sc.seed)?.records;
            if let BalanceCase::Auxiliary { points } = &b.case {
                let c = capacity_residual(&phi, points)?.max(capacity_residual(&psi, points)?);
                out.push(CheckRecord::new("alloc.capacity", sc.seed, 0, c <= BALANCE_TOL, c, BALANCE_TOL));
            }
            Ok(out)
        }
        Err(_) => Ok(vec![CheckRecord::new("alloc.error", sc.seed, 0, false, 1.0, 0.0)]),
    }
}

pub fn run_campaign(campaign: Campaign, corpus: &[Scenario], opts: &CampaignOptions) -> Result<VerificationReport> {
    let start = Instant::now();
    let records = in_pool(opts.jobs, || {
        collect(corpus, |sc| {
            let mut out = Vec::new();
            let all = campaign == Campaign::All;
            if all || campaign == Campaign::Equivariance {
                out.extend(equivariance_records(sc, opts.pipeline, opts)?);
            }
            if all || campaign == Campaign::Separation {
                out.extend(separation_records(sc, opts)?);
            }
            if all || campaign == Campaign::Necessity {
                out.extend(necessity_records(sc, opts)?);
            }
            if all || campaign == Campaign::Symmetry {
                out.extend(symmetry_records(sc, opts)?);
            }
            if all || campaign == Campaign::Balance {
                out.extend(balance_records(sc)?);
            }
            Ok(out)
        })
    })?;
    Ok(VerificationReport::new(campaign.name(), records, start.elapsed()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifts_are_reproducible_and_in_range() {
        let g = TorusGeometry::new(2, 4.0, 16).unwrap();
        let a = shift_sample(&g, 7, 5);
        assert_eq!(a, shift_sample(&g, 7, 5));
        assert!(a.iter().flatten().all(|&k| (0..16).contains(&k)));
    }

    #[test]
    fn discrepancy_of_patterns() {
        let g = TorusGeometry::new(1, 4.0, 16).unwrap();
        let a = PointPattern::new(g.clone(), vec![vec![0.0], vec![2.0]]);
        let b = PointPattern::new(g.clone(), vec![vec![0.0], vec![2.5]]);
        assert_eq!(pattern_discrepancy(&a, &a), 0.0);
        assert_eq!(pattern_discrepancy(&a, &b), 0.5);
        assert!(pattern_discrepancy(&a, &PointPattern::new(g, vec![vec![1.0]])).is_infinite());
    }

    #[test]
    fn forced_indices() {
        let g = TorusGeometry::new(2, 4.0, 64).unwrap();
        assert_eq!(forced_shell_index(&g, &[vec![16, 0], vec![0, 16]]), 3);
        assert_eq!(forced_shell_index(&g, &[vec![8, 0], vec![0, 8]]), 5);
        assert_eq!(forced_shell_index(&g, &[vec![4, 0], vec![0, 4]]), 9);
        assert_eq!(forced_shell_index(&g, &[]), 1);
    }

    #[test]
    fn identity_pipeline_passes() {
        let sc = Scenario { seed: 3, dim: 2, side: 4.0, n: 16, kind: ScenarioKind::Diffuse { smoothness: 2 } };
        let opts = CampaignOptions { shifts: 4, pipeline: Pipeline::Identity, ..CampaignOptions::default() };
        let r = verify_equivariance(&[sc], &opts).unwrap();
        assert_eq!(r.records().len(), 4);
        assert!(r.all_passed());
    }
}
