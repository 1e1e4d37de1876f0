//! Maximality cross-check against explicit enumeration of every set partition
//! of the edge set.

mod common;

use std::collections::BTreeSet;

use common::*;
use formctl_core::geometry::{is_line_configuration, Configuration, DEFAULT_ALIGN_TOL};
use formctl_core::graph::{Edge, TriangulatedLamanGraph};
use formctl_core::partition::{independent_partition, partition_is_coarsest};

fn set_partitions(items: &[Edge]) -> Vec<Vec<Vec<Edge>>> {
    let Some((&first, rest)) = items.split_first() else {
        return vec![vec![]];
    };
    let mut out = Vec::new();
    for partial in set_partitions(rest) {
        for i in 0..partial.len() {
            let mut q = partial.clone();
            q[i].push(first);
            out.push(q);
        }
        let mut q = partial;
        q.push(vec![first]);
        out.push(q);
    }
    out
}

fn admissible_part(g: &TriangulatedLamanGraph, p: &Configuration, edges: &[Edge]) -> bool {
    let vs: BTreeSet<usize> = edges.iter().flat_map(|e| [e.lo, e.hi]).collect();
    edges.len() + 3 == 2 * vs.len()
        && TriangulatedLamanGraph::from_edges(edges).is_ok()
        && is_line_configuration(&vs.iter().map(|&v| p.at(g, v)).collect::<Vec<_>>(), DEFAULT_ALIGN_TOL)
}

fn refines(fine: &[Vec<Edge>], coarse: &[Vec<Edge>]) -> bool {
    fine.iter().all(|part| coarse.iter().any(|c| part.iter().all(|e| c.contains(e))))
}

#[test]
fn every_admissible_partition_refines_the_computed_one() {
    let mut r = rng(11);
    for n in 3..=5 {
        for g in all_graphs(n) {
            let all = set_partitions(g.edges());
            for k in 0..12 {
                let p = match k % 3 {
                    0 => random_configuration(n, &mut r, 1.0),
                    1 => collinear_configuration(&g, &mut r, 1.0),
                    _ => partly_aligned_configuration(&g, &mut r, 0.6),
                };
                let computed = independent_partition(&g, &p, DEFAULT_ALIGN_TOL).unwrap();
                let mut found_self = false;
                for cand in &all {
                    if cand.iter().all(|part| admissible_part(&g, &p, part)) {
                        assert!(refines(cand, computed.parts()), "{cand:?} does not refine {:?}", computed.parts());
                        let mut sorted: Vec<Vec<Edge>> = cand.iter().map(|c| {
                            let mut c = c.clone();
                            c.sort();
                            c
                        }).collect();
                        sorted.sort();
                        found_self |= sorted == computed.parts();
                    }
                }
                assert!(found_self, "computed partition is not admissible");
                assert!(partition_is_coarsest(&g, &p, &computed).unwrap());
            }
        }
    }
}
