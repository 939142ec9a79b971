//! Prokhorov distance between finite measures on the torus.
//!
//! Both measures are rescaled to unit total. By Strassen's theorem
//! `d_P(mu, nu) <= eps` iff some coupling leaves at most `eps` of the mass
//! unmatched across pairs at distance `<= eps`; the matched mass is a max-flow
//! over the bipartite graph of close site pairs. The unmatched mass only changes
//! at pairwise site distances, so the distance is found by bisection over that
//! finite candidate set.

mod flow;
pub(crate) mod sites;

use crate::error::{Error, Result};
use crate::geometry::GridVec;
use crate::measure::Measure;

pub(crate) use sites::{for_each_box, match_within, Reach, SiteMeasure, Stencil};

/// Summary of the coupling certifying the upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSummary {
    pub epsilon: f64,
    pub unmatched: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProkhorovBracket {
    pub lower: f64,
    pub upper: f64,
    pub witness: Option<CouplingSummary>,
}

impl ProkhorovBracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Annulus `1/N <= |t| <= 2/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shell {
    pub index: u32,
    pub inner: f64,
    pub outer: f64,
}

impl Shell {
    pub fn new(index: u32) -> Self {
        assert!(index > 0, "shell index must be positive");
        Self { index, inner: 1.0 / index as f64, outer: 2.0 / index as f64 }
    }

    pub fn contains(&self, r: f64) -> bool {
        self.inner <= r && r <= self.outer
    }

    /// Grid vectors inside the shell, one of each `±t` pair, ordered by norm then
    /// coordinates. The distance to a translate is symmetric under `t -> -t`.
    pub fn half_grid_vectors(&self, g: &crate::geometry::TorusGeometry) -> Result<Vec<GridVec>> {
        if self.outer < g.cell_width() {
            return Err(Error::ShellUnresolvable { inner: self.inner, outer: self.outer });
        }
        let mut out: Vec<(f64, GridVec)> = Vec::new();
        let mut any = false;
        for v in g.all_grid_vectors() {
            let r = g.grid_norm(&v);
            if !self.contains(r) {
                continue;
            }
            any = true;
            let neg = g.reduce(&v.iter().map(|k| -k).collect::<Vec<_>>());
            if neg < v {
                continue;
            }
            out.push((r, v));
        }
        if !any {
            return Err(Error::ShellUnresolvable { inner: self.inner, outer: self.outer });
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        Ok(out.into_iter().map(|(_, v)| v).collect())
    }
}

fn check_pair(mu: &Measure, nu: &Measure) -> Result<()> {
    if mu.geometry() != nu.geometry() {
        return Err(Error::GeometryMismatch);
    }
    let (a, b) = (mu.total_mass(), nu.total_mass());
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::ZeroMass);
    }
    if (a - b).abs() > 1e-12 * a.max(b) {
        return Err(Error::TotalMassMismatch(a, b));
    }
    Ok(())
}

/// Unmatched fraction using pairs at distance `<= eps`.
fn unmatched_closed(mu: &SiteMeasure, nu: &SiteMeasure, eps: f64) -> f64 {
    let st = Stencil::new(&mu.geometry, Reach::Closed(eps));
    match_within(mu, nu, &st, |_| false, |_| false).expect("no early exit").unmatched_fraction()
}

/// Certified Prokhorov bracket; bisection stops once the width is at most `tol`.
pub fn prokhorov(mu: &Measure, nu: &Measure, tol: f64) -> Result<ProkhorovBracket> {
    check_pair(mu, nu)?;
    let a = SiteMeasure::from_measure(mu)?;
    let b = SiteMeasure::from_measure(nu)?;
    Ok(prokhorov_sites(&a, &b, tol))
}

pub(crate) fn prokhorov_sites(mu: &SiteMeasure, nu: &SiteMeasure, tol: f64) -> ProkhorovBracket {
    let dist = sites::candidate_distances(mu, nu);
    let k = dist.len() as isize;
    // lo: largest index known to satisfy d < u(d) (or -1); hi: smallest known with d >= u(d) (or k)
    let mut lo: isize = -1;
    let mut hi: isize = k;
    let mut u_lo = 1.0;
    let mut u_hi = f64::NAN;
    loop {
        let upper = {
            let mut u = 1.0f64.min(u_lo);
            if hi < k {
                u = u.min(dist[hi as usize]);
            }
            u
        };
        if hi - lo <= 1 {
            let witness = Some(CouplingSummary {
                epsilon: upper,
                unmatched: if upper >= 1.0 { 0.0 } else { unmatched_closed(mu, nu, upper) },
            });
            return ProkhorovBracket { lower: upper, upper, witness };
        }
        let lower = if hi < k { dist[(lo + 1) as usize].min(u_hi).min(upper) } else { 0.0 };
        if upper - lower <= tol {
            let witness = Some(CouplingSummary { epsilon: upper, unmatched: unmatched_closed(mu, nu, upper) });
            return ProkhorovBracket { lower, upper, witness };
        }
        let mid = (lo + hi) / 2;
        let d = dist[mid as usize];
        let u = unmatched_closed(mu, nu, d);
        if d >= u {
            hi = mid;
            u_hi = u;
        } else {
            lo = mid;
            u_lo = u;
        }
    }
}

/// `d_P(mu, nu) <= eps`.
pub(crate) fn feasible_at(mu: &SiteMeasure, nu: &SiteMeasure, stencil: &Stencil) -> bool {
    let Reach::Closed(eps) = stencil.reach else { panic!("closed reach expected") };
    if eps >= 1.0 {
        return true;
    }
    match match_within(mu, nu, stencil, |lb| lb > eps, |m| m.unmatched_fraction() <= eps) {
        Some(m) => m.unmatched_fraction() <= eps,
        None => false,
    }
}

/// `d_P(center, probe) < radius`.
pub(crate) fn strictly_within(center: &SiteMeasure, probe: &SiteMeasure, stencil: &Stencil) -> bool {
    let Reach::Open(r) = stencil.reach else { panic!("open reach expected") };
    if r <= 0.0 {
        return false;
    }
    if r > 1.0 {
        return true;
    }
    // feasible at some eps < r iff the unmatched mass over pairs closer than r is below r
    match match_within(center, probe, stencil, |lb| lb >= r, |m| m.unmatched_fraction() < r) {
        Some(m) => m.unmatched_fraction() < r,
        None => false,
    }
}

/// Shell distance together with a translation attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellDistance {
    pub value: f64,
    pub minimizer: GridVec,
}

/// `min { d_P(mu, mu + t) : t grid vector in the shell }`.
pub fn theta_shell_distance(mu: &Measure, shell: &Shell) -> Result<ShellDistance> {
    let g = mu.geometry();
    let vectors = shell.half_grid_vectors(g)?;
    let base = SiteMeasure::from_measure(mu)?;
    let mut best = ShellDistance { value: f64::INFINITY, minimizer: vectors[0].clone() };
    for t in vectors {
        let moved = base.translate_grid(&t);
        if best.value.is_finite() {
            let st = Stencil::new(g, Reach::Closed(best.value));
            if !feasible_at(&base, &moved, &st) {
                continue;
            }
        }
        let v = prokhorov_sites(&base, &moved, 0.0).upper;
        if v < best.value {
            best = ShellDistance { value: v, minimizer: t };
        }
    }
    Ok(best)
}

/// Membership in the open Prokhorov ball: `d_P(center, probe) < radius`.
///
/// Totals are normalized independently, so the two measures need not carry equal mass.
pub fn ball_contains(center: &Measure, radius: f64, probe: &Measure) -> Result<bool> {
    if center.geometry() != probe.geometry() {
        return Err(Error::GeometryMismatch);
    }
    if radius <= 0.0 {
        return Ok(false);
    }
    let a = SiteMeasure::from_measure(center)?;
    let b = SiteMeasure::from_measure(probe)?;
    let st = Stencil::new(center.geometry(), Reach::Open(radius));
    Ok(strictly_within(&a, &b, &st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TorusGeometry;
    use crate::measure::Atom;

    fn dirac(g: &TorusGeometry, pos: &[f64]) -> Measure {
        Measure::new(g.clone(), vec![0.0; g.cell_count()], vec![Atom::new(pos.to_vec(), 1.0)]).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        let g = TorusGeometry::new(2, 1.0, 8).unwrap();
        let cells = (0..64).map(|i| ((i * 7) % 5) as f64 + 0.5).collect();
        let mu = Measure::from_cells(g, cells).unwrap();
        let b = prokhorov(&mu, &mu, 0.0).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
    }

    #[test]
    fn unit_atoms_follow_distance() {
        let g = TorusGeometry::new(2, 4.0, 4).unwrap();
        let a = dirac(&g, &[0.0, 0.0]);
        for (t, want) in [([0.5, 0.0], 0.5), ([0.25, 0.0], 0.25), ([2.0, 0.0], 1.0), ([3.5, 0.0], 0.5)] {
            let b = dirac(&g, &t);
            let br = prokhorov(&a, &b, 0.0).unwrap();
            assert_eq!(br.upper, want, "shift {t:?}");
            assert_eq!(br.lower, br.upper);
        }
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let g = TorusGeometry::new(1, 1.0, 4).unwrap();
        let h = TorusGeometry::new(1, 2.0, 4).unwrap();
        let a = Measure::from_cells(g.clone(), vec![1.0; 4]).unwrap();
        let b = Measure::from_cells(g.clone(), vec![2.0; 4]).unwrap();
        let c = Measure::from_cells(h, vec![1.0; 4]).unwrap();
        assert!(matches!(prokhorov(&a, &b, 0.0), Err(Error::TotalMassMismatch(..))));
        assert!(matches!(prokhorov(&a, &c, 0.0), Err(Error::GeometryMismatch)));
    }

    #[test]
    fn ball_membership_is_strict() {
        let g = TorusGeometry::new(2, 4.0, 4).unwrap();
        let a = dirac(&g, &[0.0, 0.0]);
        let b = dirac(&g, &[0.25, 0.0]);
        assert!(ball_contains(&a, 0.1, &a).unwrap());
        assert!(!ball_contains(&a, 0.25, &b).unwrap());
        assert!(ball_contains(&a, 0.2500001, &b).unwrap());
        assert!(!ball_contains(&a, 0.0, &a).unwrap());
    }

    #[test]
    fn shell_distance_of_single_atom() {
        let g = TorusGeometry::new(2, 1.0, 16).unwrap();
        let mu = dirac(&g, &[0.0, 0.0]);
        let s = theta_shell_distance(&mu, &Shell::new(4)).unwrap();
        assert_eq!(s.value, 0.25);
        assert_eq!(g.grid_norm(&s.minimizer), 0.25);
    }

    #[test]
    fn shell_distance_of_uniform_is_zero() {
        let g = TorusGeometry::new(2, 4.0, 16).unwrap();
        let mu = Measure::uniform(g, 1.0).unwrap();
        assert_eq!(theta_shell_distance(&mu, &Shell::new(2)).unwrap().value, 0.0);
    }

    #[test]
    fn unresolvable_shell() {
        let g = TorusGeometry::new(2, 1.0, 4).unwrap();
        let mu = dirac(&g, &[0.0, 0.0]);
        assert!(matches!(theta_shell_distance(&mu, &Shell::new(1)), Err(Error::ShellUnresolvable { .. })));
        assert!(matches!(theta_shell_distance(&mu, &Shell::new(100)), Err(Error::ShellUnresolvable { .. })));
    }
}
