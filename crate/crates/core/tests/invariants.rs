//! Randomized invariants of density evolution on networks with up to three
//! base stations.

use frameless_core::analysis::{AnalysisConfig, Analyzer, EvolutionOptions, Mode};
use frameless_core::simulator::{monte_carlo, MonteCarloSpec, Scheme};
use frameless_core::topology::GroupSpec;
use frameless_core::{BsSet, NetworkTopology, TargetDegreeVector};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Case {
    topology: NetworkTopology,
    degrees: TargetDegreeVector,
    slots: u64,
}

fn case() -> impl Strategy<Value = Case> {
    (1usize..=3)
        .prop_flat_map(|m| {
            let sets = (1u32..(1 << m)).collect::<Vec<_>>();
            (Just(m), proptest::sample::subsequence(sets.clone(), 1..=sets.len()))
        })
        .prop_flat_map(|(m, masks)| {
            let n = masks.len();
            (
                Just(m),
                Just(masks),
                proptest::collection::vec(0u64..3000, n),
                proptest::collection::vec(0.1f64..3.5, n),
                0.2f64..2.0,
            )
        })
        .prop_filter_map("empty network", |(m, masks, counts, g, load)| {
            let total: u64 = counts.iter().sum();
            if total == 0 {
                return None;
            }
            let groups = masks
                .iter()
                .zip(&counts)
                .map(|(&mask, &num_users)| GroupSpec {
                    bs_set: BsSet::from_mask(mask),
                    num_users,
                })
                .collect();
            let topology = NetworkTopology::new(m, groups).ok()?;
            let degrees = g.iter().zip(&counts).map(|(&g, &n)| g.min(n as f64)).collect();
            let slots = ((total as f64 / (m as f64 * load)).ceil() as u64).max(1);
            Some(Case {
                topology,
                degrees: TargetDegreeVector::new(degrees),
                slots,
            })
        })
}

fn analyzer(topology: &NetworkTopology, mode: Mode, trace: bool) -> Analyzer {
    let config = AnalysisConfig {
        options: EvolutionOptions {
            trace,
            ..EvolutionOptions::default()
        },
        ..AnalysisConfig::default()
    };
    Analyzer::new(topology.clone(), mode, &config).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn iterates_fall_and_stay_probabilities(c in case()) {
        for mode in [Mode::Coop, Mode::NonCoop, Mode::Bound] {
            let o = analyzer(&c.topology, mode, true).evolve::<f64>(&c.degrees, c.slots).unwrap();
            let mut prev: Option<&Vec<f64>> = None;
            for step in &o.trace {
                for &v in step.x.iter().chain(&step.p_r0).chain(&step.p_r1) {
                    prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "{mode}: {v}");
                }
                if let Some(p) = prev {
                    for (a, b) in p.iter().zip(&step.x) {
                        prop_assert!(*b <= *a + 1e-12, "{mode}: x rose from {a} to {b}");
                    }
                }
                prev = Some(&step.x);
            }
            for &v in o.plr.iter().chain(&o.w) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn exact_cooperation_beats_the_union_bound(c in case()) {
        let coop = analyzer(&c.topology, Mode::Coop, false).evolve::<f64>(&c.degrees, c.slots).unwrap();
        let bound = analyzer(&c.topology, Mode::Bound, false).evolve::<f64>(&c.degrees, c.slots).unwrap();
        for g in 0..c.topology.num_groups() {
            prop_assert!(coop.plr[g] <= bound.plr[g] + 1e-9, "group {}: {} > bound {}", g + 1, coop.plr[g], bound.plr[g]);
        }
    }

    #[test]
    fn retrieval_splits_into_singleton_and_peeled(c in case()) {
        let o = analyzer(&c.topology, Mode::Coop, true).evolve::<f64>(&c.degrees, c.slots).unwrap();
        let last = o.trace.last().unwrap();
        for g in 0..c.topology.num_groups() {
            if c.topology.group(g).num_users == 0 || c.degrees.g[g] == 0.0 {
                continue;
            }
            prop_assert!(last.p_r1[g] >= -1e-12);
            prop_assert!((last.p_r0[g] + last.p_r1[g] - (1.0 - o.w[g])).abs() < 1e-12);
        }
    }

    #[test]
    fn single_station_needs_no_cooperation(n in 1u64..20_000, g in 0.1f64..5.0, load in 0.2f64..2.0) {
        let t = NetworkTopology::full(1, &[n]).unwrap();
        let d = TargetDegreeVector::new(vec![g.min(n as f64)]);
        let slots = ((n as f64 / load).ceil() as u64).max(1);
        let coop = analyzer(&t, Mode::Coop, false).evolve::<f64>(&d, slots).unwrap();
        let alone = analyzer(&t, Mode::NonCoop, false).evolve::<f64>(&d, slots).unwrap();
        prop_assert!((coop.plr[0] - alone.plr[0]).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn workers_do_not_change_simulation(c in case(), seed in any::<u64>()) {
        let spec = |workers| MonteCarloSpec {
            topology: c.topology.clone(),
            degrees: c.degrees.clone(),
            scheme: Scheme::FixedFrame { slots: c.slots.min(4000) },
            trials: 5,
            seed,
            workers,
        };
        prop_assert_eq!(monte_carlo(&spec(1)).unwrap(), monte_carlo(&spec(3)).unwrap());
    }
}

#[test]
fn single_precision_tracks_double() {
    let t = NetworkTopology::full_uniform(2, 10_000).unwrap();
    let d = TargetDegreeVector::new(vec![1.81, 1.81, 1.68]);
    let a = analyzer(&t, Mode::Coop, false);
    let wide = a.evolve::<f64>(&d, 17_000).unwrap();
    let narrow = a.evolve::<f32>(&d, 17_000).unwrap();
    for (x, y) in wide.plr.iter().zip(&narrow.plr) {
        assert!((x - *y as f64).abs() < 1e-3, "{x} vs {y}");
    }
}

/// A lone group heard by two stations puts identical slots at both, so
/// cooperation cannot help and the exact value is the single-station one.
/// The non-cooperative model multiplies the two collision probabilities as
/// if independent and lands below it.
#[test]
fn independence_approximation_undercuts_shared_slots() {
    let pair = NetworkTopology::new(2, vec![GroupSpec { bs_set: BsSet::from_mask(0b11), num_users: 3 }]).unwrap();
    let one = NetworkTopology::full(1, &[3]).unwrap();
    let d = TargetDegreeVector::new(vec![0.1]);
    let coop = analyzer(&pair, Mode::Coop, false).evolve::<f64>(&d, 8).unwrap();
    let alone = analyzer(&pair, Mode::NonCoop, false).evolve::<f64>(&d, 8).unwrap();
    let single = analyzer(&one, Mode::NonCoop, false).evolve::<f64>(&d, 8).unwrap();
    assert!((coop.plr[0] - single.plr[0]).abs() < 1e-12);
    assert!(alone.plr[0] < coop.plr[0] - 1e-3, "{} vs {}", alone.plr[0], coop.plr[0]);
}
