// Scratch probe for rl-offload tuning. Not shipped.
use tailsim_scenarios::rl_offload::{
    self, greedy_action, train, BaselinePolicy, ChannelModel, Env, EnvConfig, OffloadAction,
    Representation, RlConfig,
};

fn value_iteration(config: &EnvConfig, gamma: f64) -> Vec<Vec<f64>> {
    let states = Env::enumerate_states(config);
    let n_actions = config.n_actions();
    let mut q = vec![vec![0.0f64; n_actions]; states.len()];
    loop {
        let mut delta: f64 = 0.0;
        let mut next_q = q.clone();
        for (si, s) in states.iter().enumerate() {
            let mask = config.feasible_mask(s);
            for (a, &ok) in mask.iter().enumerate() {
                if !ok { continue; }
                let mut value = 0.0;
                for (p, ns, cost) in Env::transition_model(config, s, OffloadAction::from_index(a)) {
                    let ni = config.state_index(&ns);
                    let nmask = config.feasible_mask(&ns);
                    let best = q[ni].iter().zip(&nmask).filter(|(_, &ok)| ok)
                        .map(|(&v, _)| v).fold(f64::INFINITY, f64::min);
                    value += p * (cost + gamma * best);
                }
                delta = delta.max((value - q[si][a]).abs());
                next_q[si][a] = value;
            }
        }
        q = next_q;
        if delta < 1e-12 { break; }
    }
    q
}

fn main() {
    // --- Part 1: deterministic oracle env, tabular vs VI ---
    let oracle_env = EnvConfig {
        task_cap: 3, energy_cap: 3, n_bs: 1, levels: 4,
        arrival_prob: 1.0, energy_rate: 1.0,
        offload_tx_slots: vec![9.0, 6.0, 4.0, 3.0],
        deadline_slots: None,
        channel_model: ChannelModel::Cycle,
        ..EnvConfig::default()
    };
    let config = RlConfig {
        representation: Representation::Tabular,
        train_slots: 1000,
        lr: 1.0,
        target_sync: 10,
        env: oracle_env.clone(),
        ..RlConfig::default()
    };
    let t0 = std::time::Instant::now();
    let mut q = {
        use tailsim_scenarios::rl_offload::{seed_replay_exhaustive, QApprox};
        use tailsim_core::SimRng;
        let mut q = QApprox::tabular(&oracle_env, config.replay_capacity, config.batch_size, config.target_sync);
        seed_replay_exhaustive(&mut q, &oracle_env);
        let mut rng = SimRng::new(42, 2);
        for _ in 0..5000 { q.train_step(&mut rng, config.gamma, 1.0); }  // K below
        q
    };
    let vi = value_iteration(&oracle_env, config.gamma);
    let states = Env::enumerate_states(&oracle_env);
    let mut max_err: f64 = 0.0;
    let mut _visited = 0;
    for (si, s) in states.iter().enumerate() {
        let mask = oracle_env.feasible_mask(s);
        let qv = q.q_values(s);
        for (a, &ok) in mask.iter().enumerate() {
            if !ok { continue; }
            let err = (qv[a] - vi[si][a]).abs();
            if qv[a] != 0.0 { _visited += 1; }
            max_err = max_err.max(err);
        }
    }
    println!("oracle: max |Q - VI| = {max_err:.2e} over {} state-actions ({} ms)", states.len()*4, t0.elapsed().as_millis());

    // --- Part 2: dominance + trends on the stochastic desk env ---
    for rho in [0.3, 0.5] {
        for seed in [1u64, 2, 3, 4, 5] {
            let mut costs_by_rate: Vec<f64> = Vec::new();
            for &energy_rate in &[0.2, 0.4, 0.6, 0.8] {
                let env_config = EnvConfig { arrival_prob: rho, energy_rate, ..EnvConfig::default() };
                let config = RlConfig { env: env_config.clone(), seed, train_slots: 300_000, gamma: 0.95, ..RlConfig::default() };
                let t0 = std::time::Instant::now();
                let mut q = train(&config, &env_config, seed).unwrap();
                let eval_seed = seed + 1000;
                let mut env = Env::new(env_config.clone(), eval_seed).unwrap();
                let learned = {
                    let mut total = 0.0;
                    for _ in 0..config.eval_slots {
                        let s = env.state().clone();
                        let mask = env.config.feasible_mask(&s);
                        let a = greedy_action(&mut q, &s, &mask);
                        total += env.step(OffloadAction::from_index(a)).cost;
                    }
                    total / config.eval_slots as f64
                };
                let mut baselines = Vec::new();
                for policy in [BaselinePolicy::LocalOnly, BaselinePolicy::ServerBest, BaselinePolicy::GreedyMyopic] {
                    let mut env = Env::new(env_config.clone(), eval_seed).unwrap();
                    baselines.push(rl_offload::run_baseline(policy, &mut env, config.eval_slots));
                }
                let best = baselines.iter().cloned().fold(f64::INFINITY, f64::min);
                let ok = learned <= best * 1.02;
                println!("rho {rho} seed {seed} e {energy_rate}: learned {learned:.4} vs local {:.4} server {:.4} greedy {:.4} -> {} ({} ms)",
                    baselines[0], baselines[1], baselines[2], if ok {"OK"} else {"DOMINANCE FAIL"}, t0.elapsed().as_millis());
                costs_by_rate.push(learned);
            }
            let monotone = costs_by_rate.windows(2).all(|w| w[1] <= w[0] + 1e-9);
            println!("rho {rho} seed {seed}: learned costs {costs_by_rate:?} monotone-nonincreasing: {monotone}");
        }
    }
}
