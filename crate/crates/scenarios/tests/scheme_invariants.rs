//! Cross-scheme invariants exercised at reduced scale: the acceptance
//! suite re-runs the full-strength versions.

use tailsim_scenarios::extreme_mec::{run_point, MecConfig, MecScheme};
use tailsim_scenarios::rl_offload::{ChannelModel, Env, EnvConfig, OffloadAction};
use tailsim_scenarios::vr_arcade::{run_scheme, VrConfig, VrScheme};

#[test]
fn lambda_tradeoff_is_monotone() {
    // Raising the power weight weakly lowers average power and weakly
    // raises violation frequency (same seed, arrivals paired by stream).
    let mut results = Vec::new();
    for lambda in [0.05, 1.0, 50.0] {
        let config = MecConfig {
            lambda_tradeoff: lambda,
            horizon: 40_000,
            seed: 3,
            ..MecConfig::default()
        };
        let point = run_point(&config, 1000.0, MecScheme::Controlled).unwrap();
        results.push((lambda, point.row.avg_power, point.row.violation_prob));
    }
    for pair in results.windows(2) {
        let (l0, p0, v0) = pair[0];
        let (l1, p1, v1) = pair[1];
        assert!(
            p1 <= p0 + 1e-12,
            "avg power must not rise with lambda: {p0} @ {l0} -> {p1} @ {l1}"
        );
        assert!(
            v1 >= v0 - 1e-12,
            "violation freq must not fall with lambda: {v0} @ {l0} -> {v1} @ {l1}"
        );
    }
}

#[test]
fn controlled_beats_ablations_smoke() {
    let config = MecConfig {
        horizon: 30_000,
        seed: 1,
        ..MecConfig::default()
    };
    let kappa = config.kappa_grid[0];
    let controlled = run_point(&config, kappa, MecScheme::Controlled).unwrap().row;
    for scheme in [MecScheme::NoEdge, MecScheme::NoLocal] {
        let ablation = run_point(&config, kappa, scheme).unwrap().row;
        assert!(controlled.q99 <= ablation.q99);
        assert!(controlled.excess_mean <= ablation.excess_mean);
        assert!(controlled.excess_std <= ablation.excess_std);
    }
}

#[test]
fn vr_scheme_orderings_smoke() {
    let config = VrConfig {
        horizon: 8_000,
        seed: 2,
        ..VrConfig::default()
    };
    let players = 8;
    let b1 = run_scheme(&config, VrScheme::Baseline1, players).unwrap();
    let b2 = run_scheme(&config, VrScheme::Baseline2, players).unwrap();
    let pr = run_scheme(&config, VrScheme::Proposed, players).unwrap();
    // Proactive computing never hurts computing delay.
    assert!(b2.mean_cp_delay <= b1.mean_cp_delay);
    assert!(pr.mean_cp_delay <= b1.mean_cp_delay);
    // Prediction misses retransmit in real time: communication pays.
    assert!(b2.mean_cm_delay >= b1.mean_cm_delay);
    // SFN recovers blocked links.
    assert!(pr.mean_cm_delay <= b2.mean_cm_delay);
}

#[test]
fn vr_enabler_isolation_with_perfect_prediction() {
    // p_hit = 1, no blockage, uncontended: communication delays match
    // across schemes exactly, computing strictly favors the proactive
    // schemes.
    let config = VrConfig {
        p_hit: 1.0,
        p_block: 0.0,
        horizon: 8_000,
        seed: 5,
        ..VrConfig::default()
    };
    let b1 = run_scheme(&config, VrScheme::Baseline1, 4).unwrap();
    let b2 = run_scheme(&config, VrScheme::Baseline2, 4).unwrap();
    let pr = run_scheme(&config, VrScheme::Proposed, 4).unwrap();
    assert_eq!(b1.mean_cm_delay, b2.mean_cm_delay);
    assert_eq!(b2.mean_cm_delay, pr.mean_cm_delay);
    assert!(b2.mean_cp_delay < b1.mean_cp_delay);
    assert_eq!(b2.mean_cp_delay, pr.mean_cp_delay);
}

/// Value-iteration oracle on the deterministic cyclic-channel MDP; the
/// acceptance suite runs the same check against the trained table.
#[test]
fn transition_model_supports_value_iteration() {
    let config = EnvConfig {
        n_bs: 1,
        arrival_prob: 1.0,
        energy_rate: 1.0,
        offload_tx_slots: vec![9.0, 6.0, 4.0, 3.0],
        deadline_slots: None,
        channel_model: ChannelModel::Cycle,
        ..EnvConfig::default()
    };
    let states = Env::enumerate_states(&config);
    assert_eq!(states.len(), 64);
    let gamma = 0.9;
    let mut q = vec![vec![0.0f64; config.n_actions()]; states.len()];
    for _ in 0..2000 {
        let mut next_q = q.clone();
        for (si, s) in states.iter().enumerate() {
            for (a, &ok) in config.feasible_mask(s).iter().enumerate() {
                if !ok {
                    continue;
                }
                let mut value = 0.0;
                for (p, ns, cost) in
                    Env::transition_model(&config, s, OffloadAction::from_index(a))
                {
                    let ni = config.state_index(&ns);
                    let best = q[ni]
                        .iter()
                        .zip(config.feasible_mask(&ns).iter())
                        .filter(|(_, &ok)| ok)
                        .map(|(&v, _)| v)
                        .fold(f64::INFINITY, f64::min);
                    value += p * (cost + gamma * best);
                }
                next_q[si][a] = value;
            }
        }
        q = next_q;
    }
    // Fixed point reached: one more sweep changes nothing measurable,
    // and values live in the plausible range bounded by c_max/(1-gamma).
    for (si, s) in states.iter().enumerate() {
        for (a, &ok) in config.feasible_mask(s).iter().enumerate() {
            if !ok {
                continue;
            }
            let mut value = 0.0;
            for (p, ns, cost) in Env::transition_model(&config, s, OffloadAction::from_index(a)) {
                let ni = config.state_index(&ns);
                let best = q[ni]
                    .iter()
                    .zip(config.feasible_mask(&ns).iter())
                    .filter(|(_, &ok)| ok)
                    .map(|(&v, _)| v)
                    .fold(f64::INFINITY, f64::min);
                value += p * (cost + gamma * best);
            }
            assert!((value - q[si][a]).abs() < 1e-9);
            assert!(q[si][a] >= 0.0 && q[si][a] < 600.0);
        }
    }
}
