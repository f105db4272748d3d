//! Learned task offloading for a wireless-charging mobile device.
//!
//! A finite MDP (task backlog, stored energy, per-BS channel quality)
//! is solved by Q-learning -- tabular for enumerable configurations or a
//! one-hidden-layer network -- and compared against three fixed policies:
//! local-whenever-possible, always-offload-via-best-BS, and the myopic
//! greedy rule minimizing the expected immediate cost.

pub mod env;
pub mod qlearn;

use serde::{Deserialize, Serialize};
use tailsim_core::rng::streams;
use tailsim_core::SimRng;

pub use env::{
    discounted_return, immediate_cost, ActionOutcome, ChannelModel, Env, EnvConfig, MdpState,
    OffloadAction,
};
pub use qlearn::{greedy_action, MdpTransition, QApprox, ReplayBuffer};

use crate::error::ScenarioError;

// ---------------------------------------------------------------------------
// Baseline policies
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselinePolicy {
    /// Execute locally whenever energy allows, otherwise wait.
    LocalOnly,
    /// Offload every task via the BS with the best channel quality.
    ServerBest,
    /// Minimize the expected immediate cost each slot.
    GreedyMyopic,
}

impl BaselinePolicy {
    pub fn label(&self) -> &'static str {
        match self {
            BaselinePolicy::LocalOnly => "local",
            BaselinePolicy::ServerBest => "server",
            BaselinePolicy::GreedyMyopic => "greedy",
        }
    }

    fn choose(&self, env: &Env) -> OffloadAction {
        let s = env.state();
        let mask = env.config.feasible_mask(s);
        match self {
            BaselinePolicy::LocalOnly => {
                if mask[1] {
                    OffloadAction::Local
                } else {
                    OffloadAction::Idle
                }
            }
            BaselinePolicy::ServerBest => {
                if s.task_queue == 0 {
                    return OffloadAction::Idle;
                }
                let best = s
                    .channel
                    .iter()
                    .enumerate()
                    .max_by(|(ia, la), (ib, lb)| la.cmp(lb).then(ib.cmp(ia)))
                    .map(|(b, _)| b)
                    .unwrap_or(0);
                OffloadAction::Offload(best)
            }
            BaselinePolicy::GreedyMyopic => {
                let mut best = OffloadAction::Idle;
                let mut best_cost = f64::INFINITY;
                for (a, &ok) in mask.iter().enumerate() {
                    if !ok {
                        continue;
                    }
                    let action = OffloadAction::from_index(a);
                    let cost = env.expected_immediate_cost(action);
                    if cost < best_cost {
                        best_cost = cost;
                        best = action;
                    }
                }
                best
            }
        }
    }
}

/// Average realized cost per slot of a fixed baseline policy.
pub fn run_baseline(policy: BaselinePolicy, env: &mut Env, horizon: u64) -> f64 {
    let mut total = 0.0;
    for _ in 0..horizon {
        let action = policy.choose(env);
        total += env.step(action).cost;
    }
    total / horizon as f64
}

// ---------------------------------------------------------------------------
// Training and evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    Tabular,
    Mlp,
}

fn default_gamma() -> f64 {
    0.9
}
fn default_lr() -> f64 {
    0.1
}
fn default_hidden() -> usize {
    512
}
fn default_replay_capacity() -> usize {
    5000
}
fn default_batch_size() -> usize {
    100
}
fn default_target_sync() -> usize {
    200
}
fn default_train_slots() -> u64 {
    120_000
}
fn default_eval_slots() -> u64 {
    100_000
}
fn default_energy_rate_grid() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8]
}
fn default_representation() -> Representation {
    Representation::Tabular
}
fn default_final_epsilon() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Hidden width of the MLP representation.
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_replay_capacity")]
    pub replay_capacity: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_target_sync")]
    pub target_sync: usize,
    #[serde(default = "default_representation")]
    pub representation: Representation,
    /// Exploration anneals 1.0 -> final_epsilon over the first 20% of
    /// training, then holds.
    #[serde(default = "default_final_epsilon")]
    pub final_epsilon: f64,
    #[serde(default = "default_train_slots")]
    pub train_slots: u64,
    #[serde(default = "default_eval_slots")]
    pub eval_slots: u64,
    /// Energy arrival rates swept by the experiment.
    #[serde(default = "default_energy_rate_grid")]
    pub energy_rate_grid: Vec<f64>,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
            lr: default_lr(),
            hidden: default_hidden(),
            replay_capacity: default_replay_capacity(),
            batch_size: default_batch_size(),
            target_sync: default_target_sync(),
            representation: default_representation(),
            final_epsilon: default_final_epsilon(),
            train_slots: default_train_slots(),
            eval_slots: default_eval_slots(),
            energy_rate_grid: default_energy_rate_grid(),
            env: EnvConfig::default(),
            seed: 0,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.env.validate()?;
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(ScenarioError::InvalidConfig(
                "gamma must lie in [0,1)".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr <= 1.0) {
            return Err(ScenarioError::InvalidConfig(
                "lr must lie in (0,1]".into(),
            ));
        }
        if self.energy_rate_grid.is_empty()
            || self
                .energy_rate_grid
                .iter()
                .any(|r| !(0.0..=1.0).contains(r))
        {
            return Err(ScenarioError::InvalidConfig(
                "energy_rate_grid must be a nonempty list of probabilities".into(),
            ));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.target_sync == 0 {
            return Err(ScenarioError::InvalidConfig(
                "batch_size, replay_capacity, target_sync must be >= 1".into(),
            ));
        }
        if self.train_slots == 0 || self.eval_slots == 0 {
            return Err(ScenarioError::InvalidConfig(
                "train_slots and eval_slots must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Fill the replay buffer with one transition per feasible (state,
/// action) pair of a fully deterministic environment (single-branch
/// transitions only). Training from this exhaustive sweep makes tabular
/// Q-learning an asynchronous value iteration.
pub fn seed_replay_exhaustive(q: &mut QApprox, config: &EnvConfig) {
    for s in Env::enumerate_states(config) {
        for (a, &ok) in config.feasible_mask(&s).iter().enumerate() {
            if !ok {
                continue;
            }
            let branches = Env::transition_model(config, &s, OffloadAction::from_index(a));
            assert_eq!(
                branches.len(),
                1,
                "exhaustive seeding requires a deterministic environment"
            );
            let (_, next, cost) = branches.into_iter().next().unwrap();
            let next_feasible = config.feasible_mask(&next);
            q.replay.push(MdpTransition {
                state: s.clone(),
                action: a,
                cost,
                next,
                next_feasible,
            });
        }
    }
}

/// Train a Q approximation on the environment with epsilon-greedy
/// exploration (1.0 annealed to `final_epsilon` over the first 20% of
/// training). The learning rate anneals linearly to a tenth of its
/// initial value over the run.
pub fn train(config: &RlConfig, env_config: &EnvConfig, seed: u64) -> Result<QApprox, ScenarioError> {
    config.validate()?;
    let mut policy_rng = SimRng::new(seed, streams::POLICY);
    let mut q = match config.representation {
        Representation::Tabular => QApprox::tabular(
            env_config,
            config.replay_capacity,
            config.batch_size,
            config.target_sync,
        ),
        Representation::Mlp => {
            let mut init_rng = SimRng::new(seed, streams::POLICY + 1);
            QApprox::mlp(
                env_config,
                config.hidden,
                config.replay_capacity,
                config.batch_size,
                config.target_sync,
                &mut init_rng,
            )
        }
    };
    let mut env = Env::new(env_config.clone(), seed)?;
    let anneal_slots = (config.train_slots / 5).max(1);

    for slot in 0..config.train_slots {
        let progress = (slot as f64 / anneal_slots as f64).min(1.0);
        let epsilon = 1.0 + (config.final_epsilon - 1.0) * progress;
        let state = env.state().clone();
        let mask = env.config.feasible_mask(&state);
        let action_index = if policy_rng.bernoulli(epsilon) {
            // Uniform over feasible actions.
            let feasible: Vec<usize> = mask
                .iter()
                .enumerate()
                .filter(|(_, &ok)| ok)
                .map(|(a, _)| a)
                .collect();
            feasible[policy_rng.below(feasible.len() as u64) as usize]
        } else {
            greedy_action(&mut q, &state, &mask)
        };
        let result = env.step(OffloadAction::from_index(action_index));
        let next_feasible = env.config.feasible_mask(&result.next);
        q.replay.push(MdpTransition {
            state,
            action: action_index,
            cost: result.cost,
            next: result.next,
            next_feasible,
        });
        if q.replay.len() >= config.batch_size {
            let overall = slot as f64 / config.train_slots as f64;
            let lr = config.lr * (1.0 - 0.9 * overall);
            q.train_step(&mut policy_rng, config.gamma, lr);
        }
    }
    Ok(q)
}

/// Evaluate the greedy policy of a trained approximation.
pub fn evaluate(q: &mut QApprox, env: &mut Env, horizon: u64) -> f64 {
    let mut total = 0.0;
    for _ in 0..horizon {
        let state = env.state().clone();
        let mask = env.config.feasible_mask(&state);
        let action = greedy_action(q, &state, &mask);
        total += env.step(OffloadAction::from_index(action)).cost;
    }
    total / horizon as f64
}

/// Output row: average cost per slot for one (scheme, energy rate).
#[derive(Debug, Clone, Serialize)]
pub struct RlRow {
    pub episode: u64,
    pub scheme: String,
    pub rho: f64,
    pub energy_rate: f64,
    pub avg_cost: f64,
}

/// Sweep the energy-rate grid: train the learned policy at each point and
/// evaluate it against the three baselines on a paired evaluation seed.
pub fn run(config: &RlConfig) -> Result<Vec<RlRow>, ScenarioError> {
    config.validate()?;
    let mut rows = Vec::new();
    for (i, &energy_rate) in config.energy_rate_grid.iter().enumerate() {
        let env_config = EnvConfig {
            energy_rate,
            ..config.env.clone()
        };
        let train_seed = config.seed.wrapping_add(i as u64);
        let eval_seed = config.seed.wrapping_add(0x5eed_0000).wrapping_add(i as u64);

        let mut q = train(config, &env_config, train_seed)?;
        let mut env = Env::new(env_config.clone(), eval_seed)?;
        rows.push(RlRow {
            episode: i as u64,
            scheme: "learned".into(),
            rho: env_config.arrival_prob,
            energy_rate,
            avg_cost: evaluate(&mut q, &mut env, config.eval_slots),
        });
        for policy in [
            BaselinePolicy::LocalOnly,
            BaselinePolicy::ServerBest,
            BaselinePolicy::GreedyMyopic,
        ] {
            let mut env = Env::new(env_config.clone(), eval_seed)?;
            rows.push(RlRow {
                episode: i as u64,
                scheme: policy.label().into(),
                rho: env_config.arrival_prob,
                energy_rate,
                avg_cost: run_baseline(policy, &mut env, config.eval_slots),
            });
        }
    }
    Ok(rows)
}

pub fn csv_header() -> &'static str {
    "episode,scheme,rho,energy_rate,avg_cost"
}

pub fn to_csv(rows: &[RlRow]) -> String {
    let mut out = String::from(csv_header());
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.episode, r.scheme, r.rho, r.energy_rate, r.avg_cost
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_arrivals_cost_nothing_under_any_policy() {
        let env_config = EnvConfig {
            arrival_prob: 0.0,
            ..EnvConfig::default()
        };
        for policy in [
            BaselinePolicy::LocalOnly,
            BaselinePolicy::ServerBest,
            BaselinePolicy::GreedyMyopic,
        ] {
            let mut env = Env::new(env_config.clone(), 3).unwrap();
            let cost = run_baseline(policy, &mut env, 2000);
            assert_eq!(cost, 0.0, "{policy:?}");
        }
    }

    #[test]
    fn perfect_channel_server_cost_is_pure_transmission_delay() {
        // One BS pinned at the best level, instant server: every arrival
        // costs exactly the transmission delay. With cap 1 and immediate
        // service the queue never holds tasks over a slot boundary.
        let env_config = EnvConfig {
            task_cap: 1,
            n_bs: 1,
            levels: 1,
            offload_tx_slots: vec![3.0],
            server_exec_slots: 0.0,
            arrival_prob: 0.5,
            energy_rate: 0.0,
            deadline_slots: None,
            channel_model: ChannelModel::Cycle,
            ..EnvConfig::default()
        };
        let mut env = Env::new(env_config, 11).unwrap();
        let horizon = 20_000;
        let mut total = 0.0;
        let mut arrivals = 0u64;
        for _ in 0..horizon {
            let had_task = env.state().task_queue > 0;
            if had_task {
                arrivals += 1;
            }
            let action = BaselinePolicy::ServerBest.choose(&env);
            let r = env.step(action);
            assert!(!r.outcome.failure);
            total += r.cost;
        }
        assert!((total - arrivals as f64 * 3.0).abs() < 1e-9);
    }

    #[test]
    fn without_energy_local_only_loses_to_server_best() {
        let env_config = EnvConfig {
            energy_rate: 0.0,
            ..EnvConfig::default()
        };
        let mut env_local = Env::new(env_config.clone(), 5).unwrap();
        let local = run_baseline(BaselinePolicy::LocalOnly, &mut env_local, 20_000);
        let mut env_server = Env::new(env_config, 5).unwrap();
        let server = run_baseline(BaselinePolicy::ServerBest, &mut env_server, 20_000);
        assert!(
            local > server,
            "local {local} must exceed server {server} without energy"
        );
    }

    #[test]
    fn config_rejects_bad_gamma() {
        let config = RlConfig {
            gamma: 1.0,
            ..RlConfig::default()
        };
        assert!(config.validate().is_err());
    }
}
