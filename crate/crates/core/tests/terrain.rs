use std::collections::{HashSet, VecDeque};

use wheelsim_core::rng::EnvRng;
use wheelsim_core::terrain::{generate_traversability, generate_traversability_with, TraversabilityMap};

fn generate(seed: u64, walkers: usize) -> (TraversabilityMap, wheelsim_core::terrain::GenerationTrace) {
    generate_traversability_with(&mut EnvRng::from_seed(seed), (30, 30), (10, 10), walkers, 0.6).unwrap()
}

#[test]
fn one_start_point_per_cell() {
    for (env, cell) in [((30, 30), (10, 10)), ((30, 30), (5, 5)), ((12, 20), (4, 10)), ((7, 7), (7, 7))] {
        let (_, trace) = generate_traversability_with(&mut EnvRng::from_seed(1), env, cell, 2, 0.6).unwrap();
        assert_eq!(trace.start_points.len(), (env.0 / cell.0) * (env.1 / cell.1), "{env:?} / {cell:?}");
        let cells: HashSet<_> = trace.start_points.iter().map(|&(r, c)| (r / cell.0, c / cell.1)).collect();
        assert_eq!(cells.len(), trace.start_points.len());
    }
}

#[test]
fn same_seed_same_map() {
    for seed in 0..20 {
        assert_eq!(generate_traversability((30, 30), (10, 10), 2, seed).unwrap(), generate_traversability((30, 30), (10, 10), 2, seed).unwrap());
    }
    let distinct: HashSet<Vec<u8>> = (0..20).map(|s| generate(s, 2).0.cells).collect();
    assert_eq!(distinct.len(), 20);
}

/// Breadth-first search over white tiles from `from`.
fn reachable(map: &TraversabilityMap, from: (usize, usize)) -> HashSet<(usize, usize)> {
    let mut seen = HashSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some((r, c)) = queue.pop_front() {
        let next = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
        for (nr, nc) in next {
            if nr < map.rows && nc < map.cols && map.get(nr, nc) == 1 && seen.insert((nr, nc)) {
                queue.push_back((nr, nc));
            }
        }
    }
    seen
}

#[test]
fn carved_paths_connect_endpoints_to_their_start() {
    for seed in 0..100 {
        let (map, trace) = generate(seed, 3);
        for path in &trace.paths {
            let (start, end) = (path[0], *path.last().unwrap());
            assert!(trace.start_points.contains(&start));
            assert!(reachable(&map, start).contains(&end), "seed {seed}: {end:?} unreachable from {start:?}");
        }
    }
}

#[test]
fn white_fraction_grows_with_walkers() {
    let mean = |walkers| (0..100).map(|s| generate(s, walkers).0.traversable_fraction()).sum::<f64>() / 100.0;
    let fractions: Vec<f64> = (0..=6).map(mean).collect();
    assert!((fractions[0] - 9.0 / 900.0).abs() < 1e-12);
    for w in fractions.windows(2) {
        assert!(w[1] > w[0], "{fractions:?}");
    }
}
