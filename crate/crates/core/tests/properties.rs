use proptest::prelude::*;

use factor_alloc::alloc::{balance, fair_tessellation, parse_allocation, serialize_allocation, verify_balance, Target};
use factor_alloc::genlab::{gen_diffuse_field, gen_lattice_symmetric, gen_poisson, lattice_grid_vectors};
use factor_alloc::harness::allocation_shift_mismatches;
use factor_alloc::io::{parse_measure, serialize_measure};
use factor_alloc::symmetry::{default_tolerance, symmetry_group};
use factor_alloc::{prokhorov, Atom, Measure, PointPattern, TorusGeometry};

fn small_measure() -> impl Strategy<Value = Measure> {
    (1usize..=2, prop::sample::select(vec![4usize, 8]), prop::collection::vec((0u32..1 << 20, 0u32..1 << 20, 1u32..100), 0..4))
        .prop_flat_map(|(d, n, atoms)| {
            let g = TorusGeometry::new(d, 2.0, n).unwrap();
            let count = g.cell_count();
            (Just(g), prop::collection::vec(0.0f64..3.0, count), Just(atoms))
        })
        .prop_map(|(g, cells, raw)| {
            let unit = g.side() / (1u32 << 20) as f64;
            let atoms = raw
                .into_iter()
                .map(|(x, y, m)| Atom::new([x as f64 * unit, y as f64 * unit][..g.dim()].to_vec(), m as f64 / 7.0))
                .collect();
            Measure::new(g, cells, atoms).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn measure_text_round_trips(mu in small_measure()) {
        prop_assert_eq!(parse_measure(&serialize_measure(&mu)).unwrap(), mu);
    }

    #[test]
    fn grid_shifts_compose_and_keep_mass(mu in small_measure(), a in -20i64..20, b in -20i64..20) {
        let d = mu.geometry().dim();
        let (sa, sb, sab) = (vec![a; d], vec![b; d], vec![a + b; d]);
        let two = mu.translate_grid(&sa).translate_grid(&sb);
        prop_assert_eq!(&two, &mu.translate_grid(&sab));
        let mut before: Vec<f64> = mu.cells().to_vec();
        let mut after: Vec<f64> = two.cells().to_vec();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        prop_assert_eq!(before, after);
    }

    #[test]
    fn prokhorov_is_symmetric_and_zero_on_diagonal(seed in 0u64..1000, shift in 0i64..8) {
        let g = TorusGeometry::new(2, 2.0, 8).unwrap();
        let mu = gen_diffuse_field(&g, 1, 1.0, seed);
        let nu = mu.translate_grid(&[shift, 1]);
        let ab = prokhorov(&mu, &nu, 1e-9).unwrap();
        let ba = prokhorov(&nu, &mu, 1e-9).unwrap();
        prop_assert!((ab.midpoint() - ba.midpoint()).abs() <= 1e-9);
        prop_assert!(ab.lower <= ab.upper);
        prop_assert_eq!(prokhorov(&mu, &mu, 1e-9).unwrap().upper, 0.0);
    }

    #[test]
    fn tessellation_capacities_are_equal(seed in 0u64..1000, pts in prop::collection::vec((0usize..16, 0usize..16), 1..6)) {
        let g = TorusGeometry::new(2, 4.0, 16).unwrap();
        let mu = gen_diffuse_field(&g, 2, 3.0, seed);
        let h = g.cell_width();
        let points: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x as f64 * h, y as f64 * h]).collect();
        let p = PointPattern::new(g.clone(), points);
        let map = fair_tessellation(&mu, &p).unwrap();
        let cap = mu.total_mass() / p.len() as f64;
        let incoming = map.incoming();
        prop_assert_eq!(incoming.len(), p.len());
        for (t, m) in incoming {
            prop_assert!(matches!(t, Target::Point(_)));
            prop_assert!((m - cap).abs() <= 1e-9 * cap);
        }
    }

    #[test]
    fn symmetry_groups_are_closed(seed in 0u64..1000, k in 0usize..3) {
        let g = TorusGeometry::new(2, 4.0, 16).unwrap();
        let gap = [1.0, 2.0, 0.5][k];
        let gens = lattice_grid_vectors(&g, &[vec![gap, 0.0], vec![0.0, 2.0]]).unwrap();
        let mu = gen_lattice_symmetric(&g, &gens, seed).unwrap();
        let group = symmetry_group(&mu, default_tolerance(&mu));
        for a in group.elements() {
            for b in group.elements() {
                let s: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                prop_assert!(group.contains(&s));
            }
        }
        prop_assert_eq!(group.order(), (4.0 / gap) as usize * 2);
    }
}

fn pair(seed: u64) -> Option<(Measure, Measure)> {
    let g = TorusGeometry::new(2, 4.0, 16).unwrap();
    let phi = gen_diffuse_field(&g, 2, 1.0, seed);
    let atoms = gen_poisson(&g, 0.3, seed + 1);
    if atoms.atoms().is_empty() {
        return None;
    }
    let psi = atoms.scaled(1.0 / atoms.total_mass()).unwrap();
    Some((phi, psi))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn balance_commutes_with_shifts(seed in 0u64..500, sx in 0i64..16, sy in 0i64..16) {
        let Some((phi, psi)) = pair(seed) else { return Ok(()) };
        let t = [sx, sy];
        let (phi_t, psi_t) = (phi.translate_grid(&t), psi.translate_grid(&t));
        let a = balance(&phi, &psi).unwrap();
        let b = balance(&phi_t, &psi_t).unwrap();
        prop_assert_eq!(allocation_shift_mismatches(&a.map, &psi, &b.map, &psi_t, &t), 0);
    }

    #[test]
    fn allocation_files_round_trip(seed in 0u64..500) {
        let Some((phi, psi)) = pair(seed) else { return Ok(()) };
        let map = balance(&phi, &psi).unwrap().map;
        prop_assert_eq!(parse_allocation(&serialize_allocation(&map)).unwrap(), map);
    }
}

#[test]
fn perturbed_piece_is_flagged() {
    let (phi, psi) = (0..).find_map(pair).unwrap();
    let text = serialize_allocation(&balance(&phi, &psi).unwrap().map);
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let k = lines.iter().position(|l| l.starts_with("cell ")).unwrap();
    let mut f: Vec<String> = lines[k].split_whitespace().map(String::from).collect();
    let m: f64 = f[4].parse().unwrap();
    f[4] = format!("{:e}", m * (1.0 + 1e-3) + 1e-6);
    lines[k] = f.join(" ");
    let corrupted = parse_allocation(&(lines.join("\n") + "\n")).unwrap();
    let report = verify_balance(&corrupted, &phi, &psi).unwrap();
    assert!(!report.sources_exact);
    assert!(report.max_relative > 1e-9);
    assert!(!report.passes(1e-9));
}
