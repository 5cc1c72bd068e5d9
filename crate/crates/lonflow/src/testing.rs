//! Deterministic fixtures shared by unit, integration, and acceptance test
//! suites. Not part of the stable API.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lon::{Lon, LonEdge, LonNode, Perturbation};
use crate::qap::Fitness;

/// Twelve-node reference network with a source plateau cycle (2-3-4), a
/// sink cycle (10-11), plain sinks 6 and 9, and a lone source 0. Small
/// enough to check flow quantities by hand, rich enough to exercise every
/// node class.
pub fn flow12_lon() -> Lon {
    let fitness = [100i64, 90, 95, 95, 95, 80, 30, 60, 50, 30, 30, 30];
    let edges = [
        (0u32, 1u32),
        (1, 7),
        (2, 3),
        (3, 4),
        (4, 2),
        (4, 5),
        (5, 6),
        (5, 7),
        (7, 8),
        (8, 9),
        (8, 10),
        (10, 11),
        (11, 10),
    ];
    let nodes = fitness
        .iter()
        .map(|&f| LonNode {
            fitness: Fitness(f),
            perm: None,
        })
        .collect();
    let edges = edges
        .iter()
        .map(|&(from, to)| LonEdge { from, to, weight: 1 })
        .collect();
    Lon::new("flow12", Perturbation::Low, nodes, edges).expect("fixture is valid")
}

/// Random fitness-monotone network with plateaus, cycles, self-loops, and
/// possibly disconnected parts.
///
/// The induced backward walk is guaranteed to mix fast. Each plateau is one
/// strongly connected ring (size <= 8) with light chords, and is either
/// unfed (no incoming cross edges, hence a recurrent source component) or
/// fed, in which case every one of its nodes gets an external in-edge of
/// weight >= 6 against internal in-weight <= 26. Every transient row of the
/// walk then sums to <= 26/32, so all transient modes decay at rate >= 0.18
/// and the flow reaches its asymptote far below 1e-6 by t = 200.
pub fn random_monotone_lon(seed: u64, max_n: usize) -> Lon {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n.max(2));
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng);
    let mut plateaus: Vec<Vec<u32>> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let take = rng.random_range(1..=8).min(order.len() - i);
        plateaus.push(order[i..i + take].to_vec());
        i += take;
    }
    let mut fitness = vec![0i64; n];
    let levels = plateaus.len();
    for (g, plateau) in plateaus.iter().enumerate() {
        let f = ((levels - g) * 7) as i64;
        for &v in plateau {
            fitness[v as usize] = f;
        }
    }

    let mut edges = Vec::new();
    for plateau in &plateaus {
        let m = plateau.len();
        if m >= 2 {
            for (idx, &u) in plateau.iter().enumerate() {
                edges.push(LonEdge {
                    from: u,
                    to: plateau[(idx + 1) % m],
                    weight: rng.random_range(1..=3),
                });
            }
            for &u in plateau {
                for &v in plateau {
                    if u != v && rng.random_bool(0.3) {
                        edges.push(LonEdge {
                            from: u,
                            to: v,
                            weight: rng.random_range(1..=3),
                        });
                    }
                }
            }
        }
    }

    let cross_p = rng.random_range(0.03..0.20);
    let feed_source = |rng: &mut ChaCha8Rng, plateaus: &[Vec<u32>], g: usize| {
        let h = rng.random_range(0..g);
        plateaus[h][rng.random_range(0..plateaus[h].len())]
    };
    for g in 1..plateaus.len() {
        if !rng.random_bool(0.6) {
            continue; // unfed: this plateau stays a recurrent source.
        }
        for &v in &plateaus[g] {
            edges.push(LonEdge {
                from: feed_source(&mut rng, &plateaus, g),
                to: v,
                weight: rng.random_range(6..=20),
            });
            if rng.random_bool(cross_p) {
                edges.push(LonEdge {
                    from: feed_source(&mut rng, &plateaus, g),
                    to: v,
                    weight: rng.random_range(1..=20),
                });
            }
        }
    }

    for v in 0..n as u32 {
        if rng.random_bool(0.25) {
            edges.push(LonEdge {
                from: v,
                to: v,
                weight: rng.random_range(1..=2),
            });
        }
    }

    // Guaranteed feeds can duplicate an optional extra; merge them.
    let mut merged: std::collections::BTreeMap<(u32, u32), u64> = std::collections::BTreeMap::new();
    for e in edges {
        *merged.entry((e.from, e.to)).or_insert(0) += e.weight;
    }
    let edges = merged
        .into_iter()
        .map(|((from, to), weight)| LonEdge { from, to, weight })
        .collect();

    let nodes = fitness
        .into_iter()
        .map(|f| LonNode {
            fitness: Fitness(f),
            perm: None,
        })
        .collect();
    let perturbation = if seed % 2 == 0 {
        Perturbation::Low
    } else {
        Perturbation::High
    };
    Lon::new(&format!("rand{seed}"), perturbation, nodes, edges)
        .expect("generator respects network invariants")
}
