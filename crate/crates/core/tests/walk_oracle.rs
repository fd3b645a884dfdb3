//! Walk-graph sums against an independent brute-force peeler and the
//! closed forms for the full three-station network.

use frameless_core::analysis::{build_retrievability_table, closed_form_w_m3, compute_w_coop, GroupProbs};
use frameless_core::NetworkTopology;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Peels a walk graph: `states[k]` is 0 (no edges), 1 (one edge to each
/// reachable station) or 2 (a collided pair of edges to each).
fn peel(masks: &[u32], states: &[u8], target: usize) -> bool {
    let mut alive: Vec<bool> = states.iter().map(|&s| s > 0).collect();
    loop {
        let mut progress = false;
        for j in 0..32 {
            let load: u32 = (0..masks.len())
                .filter(|&k| alive[k] && masks[k] & (1 << j) != 0)
                .map(|k| states[k] as u32)
                .sum();
            if load != 1 {
                continue;
            }
            let k = (0..masks.len())
                .find(|&k| alive[k] && masks[k] & (1 << j) != 0)
                .unwrap();
            if k == target {
                return true;
            }
            alive[k] = false;
            progress = true;
        }
        if !progress {
            return false;
        }
    }
}

fn state_prob(p: &GroupProbs<f64>, s: u8) -> f64 {
    match s {
        0 => p.idle,
        1 => p.single,
        _ => 1.0 - p.idle - p.single,
    }
}

/// `1 - r_t * sum over companion patterns with the target peeled`.
fn brute_force_w(masks: &[u32], probs: &[GroupProbs<f64>], target: usize) -> f64 {
    let n = masks.len();
    let mut total = 0.0;
    for code in 0..3usize.pow(n as u32 - 1) {
        let mut states = vec![1u8; n];
        let mut rest = code;
        let mut mass = 1.0;
        for k in (0..n).filter(|&k| k != target) {
            states[k] = (rest % 3) as u8;
            rest /= 3;
            mass *= state_prob(&probs[k], states[k]);
        }
        if peel(masks, &states, target) {
            total += mass;
        }
    }
    1.0 - probs[target].sole * total
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<GroupProbs<f64>> {
    (0..n)
        .map(|_| {
            let idle: f64 = rng.random();
            let single = (1.0 - idle) * rng.random::<f64>();
            GroupProbs {
                idle,
                single,
                sole: rng.random(),
            }
        })
        .collect()
}

fn masks(t: &NetworkTopology) -> Vec<u32> {
    t.groups().iter().map(|g| g.bs_set.mask()).collect()
}

#[test]
fn closed_forms_match_enumeration_at_random_probes() {
    let t = NetworkTopology::full_uniform(3, 1).unwrap();
    let m = masks(&t);
    let tables: Vec<_> = (0..7).map(|g| build_retrievability_table(&m, g).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let probs = random_probs(&mut rng, 7);
        for (g, table) in tables.iter().enumerate() {
            let closed = closed_form_w_m3(&t, &probs, g).unwrap();
            let enumerated = compute_w_coop(table, &probs).unwrap();
            let brute = brute_force_w(&m, &probs, g);
            worst = worst.max((closed - enumerated).abs()).max((brute - enumerated).abs());
        }
    }
    assert!(worst < 1e-12, "max gap {worst:e}");
}

#[test]
fn closed_forms_are_exact_in_rationals() {
    let t = NetworkTopology::full_uniform(3, 1).unwrap();
    let m = masks(&t);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let frac = |rng: &mut ChaCha8Rng, max: i64| Ratio::new(rng.random_range(0..=max), 8i64);
    for _ in 0..20 {
        let probs: Vec<GroupProbs<Ratio<i64>>> = (0..7)
            .map(|_| {
                let idle = frac(&mut rng, 8);
                let single = Ratio::new(rng.random_range(0..=(8 - *(idle * 8).numer())), 8);
                GroupProbs {
                    idle,
                    single,
                    sole: frac(&mut rng, 8),
                }
            })
            .collect();
        for g in 0..7 {
            let table = build_retrievability_table(&m, g).unwrap();
            let closed = closed_form_w_m3(&t, &probs, g).unwrap();
            let enumerated = Ratio::from_integer(1) - table.retrieval_mass_direct(&probs);
            assert_eq!(closed, enumerated, "target {}", g + 1);
        }
    }
}

#[test]
fn closed_form_endpoints() {
    let t = NetworkTopology::full_uniform(3, 1).unwrap();
    let quiet = GroupProbs {
        idle: 1.0,
        single: 0.0,
        sole: 1.0,
    };
    for g in 0..7 {
        assert_eq!(closed_form_w_m3(&t, &[quiet; 7], g).unwrap(), 0.0);
        let mut probs = [quiet; 7];
        probs[g].sole = 0.0;
        assert_eq!(closed_form_w_m3(&t, &probs, g).unwrap(), 1.0);
    }
    assert!(closed_form_w_m3(&t, &[quiet; 7], 7).is_err());
    let two = NetworkTopology::full_uniform(2, 1).unwrap();
    assert!(closed_form_w_m3(&two, &[quiet; 3], 0).is_err());
}

#[test]
fn enumeration_matches_brute_force_on_partial_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let layouts: [&[u32]; 4] = [
        &[0b1, 0b10, 0b100, 0b11, 0b111],
        &[0b11, 0b110, 0b101],
        &[0b1, 0b1111, 0b1010, 0b100],
        &[0b1],
    ];
    for m in layouts {
        for _ in 0..10 {
            let probs = random_probs(&mut rng, m.len());
            for g in 0..m.len() {
                let table = build_retrievability_table(m, g).unwrap();
                let w = compute_w_coop(&table, &probs).unwrap();
                assert!((w - brute_force_w(m, &probs, g)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn pattern_mass_closes() {
    let t = NetworkTopology::full_uniform(3, 1).unwrap();
    let m = masks(&t);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let probs = random_probs(&mut rng, 7);
        for g in 0..7 {
            let table = build_retrievability_table(&m, g).unwrap();
            let all: f64 = (0..table.pattern_space()).map(|i| table.companion_mass(i, &probs)).sum();
            assert!((probs[g].sole * all - probs[g].sole).abs() < 1e-9);
            let retrievable = table.retrieval_mass_direct(&probs);
            assert!(retrievable <= probs[g].sole + 1e-12);
        }
    }
}

/// Probability that the target is alone at some station before peeling, by
/// inclusion-exclusion over its stations.
fn initial_singleton_mass(m: &[u32], probs: &[GroupProbs<f64>], target: usize) -> f64 {
    let stations: Vec<u32> = (0..32).filter(|j| m[target] & (1 << j) != 0).collect();
    let mut total = 0.0;
    for subset in 1u32..(1 << stations.len()) {
        let union = stations
            .iter()
            .enumerate()
            .filter(|(i, _)| subset & (1 << i) != 0)
            .fold(0u32, |acc, (_, &j)| acc | 1 << j);
        let quiet: f64 = (0..m.len())
            .filter(|&k| k != target && m[k] & union != 0)
            .map(|k| probs[k].idle)
            .product();
        let sign = if subset.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * quiet;
    }
    probs[target].sole * total
}

#[test]
fn singleton_split_matches_inclusion_exclusion() {
    let t = NetworkTopology::full_uniform(3, 1).unwrap();
    let m = masks(&t);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let probs = random_probs(&mut rng, 7);
        for g in 0..7 {
            let table = build_retrievability_table(&m, g).unwrap();
            let r0: f64 = probs[g].sole
                * table
                    .singleton_indices()
                    .map(|i| table.companion_mass(i, &probs))
                    .sum::<f64>();
            assert!((r0 - initial_singleton_mass(&m, &probs, g)).abs() < 1e-12);
            assert!(table.singleton_indices().all(|i| table.is_retrievable(i)));
        }
    }
}
