//! Monte Carlo against exhaustive enumeration and against its own statistics.

use frameless_core::simulator::{
    monte_carlo, plr_floor, run_fixed_frame, slots_for_load, trial_rng, trial_seed, MonteCarloSpec, Scheme,
};
use frameless_core::{BsSet, GroupSpec, NetworkTopology, TargetDegreeVector};

/// Users 0,1 hear only station 1, users 2,3 only station 2, users 4,5 both.
const HEARD_BY: [u32; 2] = [0b110011, 0b111100];

/// Packets retrieved by exact successive cancellation. Bit `6 s + u` of
/// `pattern` says user `u` sent in slot `s`.
fn cancel(pattern: u32, slots: usize) -> u32 {
    let mut known = 0u32;
    loop {
        let mut progress = false;
        for s in 0..slots {
            for heard in HEARD_BY {
                let present = (pattern >> (6 * s)) & 0x3f & heard & !known;
                if present.count_ones() == 1 {
                    known |= present;
                    progress = true;
                }
            }
        }
        if !progress {
            return known.count_ones();
        }
    }
}

/// Distribution of the retrieved count when every user sends with probability 1/2.
fn exhaustive(slots: usize) -> [f64; 7] {
    let total = 1u64 << (6 * slots);
    let mut counts = [0u64; 7];
    for pattern in 0..total {
        counts[cancel(pattern as u32, slots) as usize] += 1;
    }
    counts.map(|c| c as f64 / total as f64)
}

#[test]
fn tiny_network_matches_enumeration() {
    let topology = NetworkTopology::full(2, &[2, 2, 2]).unwrap();
    let degrees = TargetDegreeVector::new(vec![1.0; 3]);
    let trials = 100_000u64;
    for slots in 1..=4usize {
        let exact = exhaustive(slots);
        let mut seen = [0u64; 7];
        for k in 0..trials {
            let mut rng = trial_rng(trial_seed(slots as u64, k));
            let frame = run_fixed_frame(&topology, &degrees, slots as u64, &mut rng).unwrap();
            seen[frame.n_ret as usize] += 1;
        }
        for (k, (&q, &n)) in exact.iter().zip(&seen).enumerate() {
            let freq = n as f64 / trials as f64;
            let sigma = (q * (1.0 - q) / trials as f64).sqrt();
            assert!((freq - q).abs() <= 3.0 * sigma, "T={slots}, {k} retrieved: {freq} vs {q}");
        }
    }
}

#[test]
fn enumeration_sanity() {
    let q = exhaustive(1);
    assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert_eq!(cancel(0, 1), 0);
    assert_eq!(cancel(0b000001, 1), 1);
    // Users 4 and 5 collide everywhere; user 0 alone is not enough to free them.
    assert_eq!(cancel(0b110001, 1), 0);
    // Slot 2 isolates user 4, which frees user 5 in slot 1.
    assert_eq!(cancel(0b010000_110000, 2), 2);
}

#[test]
fn stderr_shrinks_with_square_root_of_trials() {
    let spec = |trials| MonteCarloSpec {
        topology: NetworkTopology::full_uniform(1, 1000).unwrap(),
        degrees: TargetDegreeVector::new(vec![3.1]),
        scheme: Scheme::Frameless {
            alpha: 0.8,
            slot_cap: None,
        },
        trials,
        seed: 42,
        workers: 0,
    };
    let small = monte_carlo(&spec(100)).unwrap().aggregate;
    let large = monte_carlo(&spec(400)).unwrap().aggregate;
    let ratio = small.throughput_stderr / large.throughput_stderr;
    assert!((ratio - 2.0).abs() <= 0.5, "{ratio}");
    assert!((small.throughput_mean - large.throughput_mean).abs() <= 3.0 * small.throughput_stderr);
}

#[test]
fn simulated_loss_stays_above_silence_floor() {
    let group = |mask, num_users| GroupSpec {
        bs_set: BsSet::from_mask(mask),
        num_users,
    };
    let topology = NetworkTopology::new(
        3,
        vec![group(0b001, 200), group(0b010, 200), group(0b100, 200), group(0b011, 200), group(0b111, 600)],
    )
    .unwrap();
    let degrees = TargetDegreeVector::new(vec![1.42, 1.42, 1.30, 0.47, 2.33]);
    for load in [0.3, 0.6, 0.75, 0.9, 1.2] {
        let slots = slots_for_load(&topology, load).unwrap();
        let report = monte_carlo(&MonteCarloSpec {
            topology: topology.clone(),
            degrees: degrees.clone(),
            scheme: Scheme::FixedFrame { slots },
            trials: 200,
            seed: 3,
            workers: 0,
        })
        .unwrap();
        let floor = plr_floor(&topology, &degrees, slots).unwrap();
        let a = report.aggregate;
        assert!(a.plr_mean >= floor - 3.0 * a.plr_stderr, "load {load}: {} < {floor}", a.plr_mean);
    }
}
