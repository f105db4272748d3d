//! Property tests for the engine invariants: exact queue conservation,
//! rate monotonicity in SINR, and hedging dominance.

use proptest::prelude::*;
use tailsim_core::channel::LinkParams;
use tailsim_core::{hedged_completion, QueueState, SimRng};

proptest! {
    /// The queue recursion holds exactly for any op sequence: replaying the
    /// recursion from scratch reproduces every history sample.
    #[test]
    fn queue_conservation(ops in proptest::collection::vec((0u64..10_000, 0u64..10_000), 1..200)) {
        let mut q = QueueState::new();
        for &(arrived, served) in &ops {
            q.step(arrived, served);
        }
        let mut expected = 0u64;
        for (i, &(arrived, served)) in ops.iter().enumerate() {
            expected = expected.saturating_sub(served) + arrived;
            prop_assert_eq!(q.history()[i], expected);
        }
        prop_assert_eq!(q.backlog_bits(), expected);
    }

    /// Shannon rate is monotone nondecreasing in SINR and never negative.
    #[test]
    fn rate_monotone_in_sinr(a in 0.0f64..1e6, b in 0.0f64..1e6) {
        let link = LinkParams { bandwidth_hz: 1e7, slot_duration_s: 1e-3 };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r_lo = link.rate_bits_per_slot(lo);
        let r_hi = link.rate_bits_per_slot(hi);
        prop_assert!(r_lo >= 0.0);
        prop_assert!(r_hi >= r_lo);
    }

    /// Hedged completion never exceeds the primary-alone latency.
    #[test]
    fn hedging_pointwise_dominance(p in 0u64..1000, b in 0u64..1000, d in 0u64..50) {
        let (latency, _, _) = hedged_completion(p, b, d);
        prop_assert!(latency <= p);
    }
}

/// Paired simulation on three fixed latency distributions: the hedged mean
/// completion is no worse than the primary alone.
#[test]
fn hedging_dominance_on_fixed_distributions() {
    // (primary draw, backup draw) sampling closures over a shared RNG.
    let distributions: [(&str, fn(&mut SimRng) -> (u64, u64)); 3] = [
        ("bimodal", |rng| {
            let p = if rng.bernoulli(0.9) { 1 } else { 100 };
            (p, 2)
        }),
        ("uniform", |rng| (1 + rng.below(20), 1 + rng.below(20))),
        ("geometric-ish", |rng| {
            let mut p = 1;
            while rng.bernoulli(0.5) && p < 64 {
                p *= 2;
            }
            (p, 4)
        }),
    ];

    for (name, draw) in distributions {
        let mut rng = SimRng::new(99, 0);
        let hedge_delay = 3;
        let mut hedged_total = 0u64;
        let mut primary_total = 0u64;
        let trials = 20_000;
        for _ in 0..trials {
            let (p, b) = draw(&mut rng);
            let (latency, _, _) = hedged_completion(p, b, hedge_delay);
            assert!(latency <= p, "{name}: hedged {latency} > primary {p}");
            hedged_total += latency;
            primary_total += p;
        }
        assert!(
            hedged_total <= primary_total,
            "{name}: hedged mean exceeds primary-alone mean"
        );
    }
}
