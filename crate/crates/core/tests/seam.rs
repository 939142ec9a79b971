//! The raw lexicographic cluster order breaks equivariance when a cluster straddles
//! the seam; the unwrapped order does not.

use factor_alloc::factor::{extract_with, ClusterOrder, ExtractConfig};
use factor_alloc::genlab::parse_manifest;
use factor_alloc::harness::pattern_discrepancy;
use factor_alloc::measure::shift_vector;

const MANIFEST: &str = include_str!("../data/corpus.manifest");

fn config(order: ClusterOrder) -> ExtractConfig {
    ExtractConfig { order, ..ExtractConfig::default() }
}

#[test]
fn straddling_shifts_expose_plain_order() {
    let corpus = parse_manifest(MANIFEST).unwrap();
    let small: Vec<_> = corpus.iter().filter(|s| s.side == 4.0 && s.planted().lattice.is_none() && s.planted().invariant_dim == Some(0)).collect();
    assert!(!small.is_empty());
    let mut plain_failures = 0;
    let mut tried = 0;
    for sc in small {
        let mu = sc.generate().unwrap();
        let g = mu.geometry().clone();
        let n = g.n() as i64;
        let trace = extract_with(&mu, &config(ClusterOrder::Unwrapped)).unwrap();
        for cluster in trace.clusters.iter().filter(|c| c.len() > 1) {
            for axis in 0..g.dim() {
                let lo = cluster.iter().map(|v| v[axis].rem_euclid(n)).min().unwrap();
                // either sign convention puts the cluster across the seam on this axis
                for step in [n - lo - 1, lo + 1] {
                    let mut s = vec![0i64; g.dim()];
                    s[axis] = step;
                    let t = shift_vector(&g, &s);
                    let moved = mu.translate_grid(&s);
                    tried += 1;
                    for (order, must_match) in [(ClusterOrder::Unwrapped, true), (ClusterOrder::Plain, false)] {
                        let base = extract_with(&mu, &config(order)).unwrap().representatives.translated(&t);
                        let after = extract_with(&moved, &config(order)).unwrap().representatives;
                        let gap = pattern_discrepancy(&base, &after);
                        if must_match {
                            assert_eq!(gap, 0.0, "seed {} shift {s:?}", sc.seed);
                        } else if gap > 0.0 {
                            plain_failures += 1;
                        }
                    }
                }
            }
        }
    }
    assert!(tried > 0);
    assert!(plain_failures > 0, "plain order survived {tried} straddling shifts");
}
