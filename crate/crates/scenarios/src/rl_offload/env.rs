//! Finite MDP for wireless-charging task offloading.
//!
//! State: pending task count, queued energy units, and a discrete quality
//! level per base station. Actions: idle, execute the head task locally
//! (consumes stored energy), or offload it through one base station
//! (delay set by that station's current quality level). Per-slot cost is
//! the realized delay accrual (execution plus one slot of waiting per
//! queued task) plus a fixed penalty when a task fails, i.e. is dropped
//! on a full queue or misses its deadline.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use tailsim_core::rng::streams;
use tailsim_core::SimRng;

use crate::error::ScenarioError;

/// Exposed MDP state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MdpState {
    pub task_queue: u8,
    pub energy_queue: u8,
    /// Per-BS quality level in `0..levels`.
    pub channel: Vec<u8>,
}

/// Action encoding: index 0 = IDLE, 1 = LOCAL, 2 + b = OFFLOAD(b).
/// The ordering is also the tie-break order for greedy action selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffloadAction {
    Idle,
    Local,
    Offload(usize),
}

impl OffloadAction {
    pub fn from_index(index: usize) -> Self {
        match index {
            0 => OffloadAction::Idle,
            1 => OffloadAction::Local,
            b => OffloadAction::Offload(b - 2),
        }
    }

    pub fn index(&self) -> usize {
        match self {
            OffloadAction::Idle => 0,
            OffloadAction::Local => 1,
            OffloadAction::Offload(b) => 2 + b,
        }
    }
}

/// How per-BS quality levels evolve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelModel {
    /// level <- (level + 1) mod levels every slot; fully deterministic.
    Cycle,
    /// Lazy random walk: up with p_up, down with p_down, else hold.
    RandomWalk { p_up: f64, p_down: f64 },
}

fn default_task_cap() -> u8 {
    3
}
fn default_energy_cap() -> u8 {
    3
}
fn default_n_bs() -> usize {
    2
}
fn default_levels() -> u8 {
    4
}
fn default_arrival_prob() -> f64 {
    0.3
}
fn default_energy_rate() -> f64 {
    0.5
}
fn default_local_exec_slots() -> f64 {
    2.0
}
fn default_offload_tx_slots() -> Vec<f64> {
    vec![9.0, 6.0, 4.0, 3.0]
}
fn default_server_exec_slots() -> f64 {
    1.0
}
fn default_local_energy_cost() -> u8 {
    1
}
fn default_holding_cost() -> f64 {
    1.0
}
fn default_failure_penalty() -> f64 {
    50.0
}
fn default_deadline_slots() -> Option<u64> {
    Some(20)
}
fn default_channel_model() -> ChannelModel {
    ChannelModel::RandomWalk {
        p_up: 0.3,
        p_down: 0.3,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    #[serde(default = "default_task_cap")]
    pub task_cap: u8,
    #[serde(default = "default_energy_cap")]
    pub energy_cap: u8,
    #[serde(default = "default_n_bs")]
    pub n_bs: usize,
    #[serde(default = "default_levels")]
    pub levels: u8,
    /// Task arrival probability rho.
    #[serde(default = "default_arrival_prob")]
    pub arrival_prob: f64,
    /// Energy-unit arrival probability.
    #[serde(default = "default_energy_rate")]
    pub energy_rate: f64,
    #[serde(default = "default_local_exec_slots")]
    pub local_exec_slots: f64,
    /// Transmission delay per quality level, best level last.
    #[serde(default = "default_offload_tx_slots")]
    pub offload_tx_slots: Vec<f64>,
    #[serde(default = "default_server_exec_slots")]
    pub server_exec_slots: f64,
    #[serde(default = "default_local_energy_cost")]
    pub local_energy_cost: u8,
    /// Delay accrued per queued task per slot.
    #[serde(default = "default_holding_cost")]
    pub holding_cost: f64,
    #[serde(default = "default_failure_penalty")]
    pub failure_penalty: f64,
    /// Tasks unserved past this age are dropped as failures. `None`
    /// disables age tracking, making the exposed state exactly Markov.
    #[serde(default = "default_deadline_slots")]
    pub deadline_slots: Option<u64>,
    #[serde(default = "default_channel_model")]
    pub channel_model: ChannelModel,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            task_cap: default_task_cap(),
            energy_cap: default_energy_cap(),
            n_bs: default_n_bs(),
            levels: default_levels(),
            arrival_prob: default_arrival_prob(),
            energy_rate: default_energy_rate(),
            local_exec_slots: default_local_exec_slots(),
            offload_tx_slots: default_offload_tx_slots(),
            server_exec_slots: default_server_exec_slots(),
            local_energy_cost: default_local_energy_cost(),
            holding_cost: default_holding_cost(),
            failure_penalty: default_failure_penalty(),
            deadline_slots: default_deadline_slots(),
            channel_model: default_channel_model(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_bs == 0 || self.levels == 0 {
            return Err(ScenarioError::InvalidConfig(
                "n_bs and levels must be >= 1".into(),
            ));
        }
        if self.offload_tx_slots.len() != self.levels as usize {
            return Err(ScenarioError::InvalidConfig(format!(
                "offload_tx_slots must list exactly levels = {} delays",
                self.levels
            )));
        }
        for p in [self.arrival_prob, self.energy_rate] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ScenarioError::InvalidConfig(format!(
                    "probabilities must lie in [0,1], got {p}"
                )));
            }
        }
        if let ChannelModel::RandomWalk { p_up, p_down } = self.channel_model {
            if !(0.0..=1.0).contains(&p_up) || !(0.0..=1.0).contains(&p_down) || p_up + p_down > 1.0
            {
                return Err(ScenarioError::InvalidConfig(
                    "channel random walk needs p_up, p_down >= 0 with p_up + p_down <= 1".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        2 + self.n_bs
    }

    pub fn n_states(&self) -> usize {
        (self.task_cap as usize + 1)
            * (self.energy_cap as usize + 1)
            * (self.levels as usize).pow(self.n_bs as u32)
    }

    /// Dense state index for tabular value functions.
    pub fn state_index(&self, s: &MdpState) -> usize {
        let mut idx = s.task_queue as usize;
        idx = idx * (self.energy_cap as usize + 1) + s.energy_queue as usize;
        for &level in &s.channel {
            idx = idx * self.levels as usize + level as usize;
        }
        idx
    }

    /// One-hot encoding dimension for the MLP representation.
    pub fn onehot_dim(&self) -> usize {
        (self.task_cap as usize + 1)
            + (self.energy_cap as usize + 1)
            + self.n_bs * self.levels as usize
    }

    pub fn encode_onehot(&self, s: &MdpState, out: &mut [f64]) {
        out.fill(0.0);
        let mut base = 0;
        out[base + s.task_queue as usize] = 1.0;
        base += self.task_cap as usize + 1;
        out[base + s.energy_queue as usize] = 1.0;
        base += self.energy_cap as usize + 1;
        for &level in &s.channel {
            out[base + level as usize] = 1.0;
            base += self.levels as usize;
        }
    }

    /// Feasibility mask in action-index order. IDLE is always feasible;
    /// LOCAL needs a task and enough energy; OFFLOAD needs a task.
    pub fn feasible_mask(&self, s: &MdpState) -> Vec<bool> {
        let mut mask = vec![false; self.n_actions()];
        mask[0] = true;
        if s.task_queue > 0 {
            if s.energy_queue >= self.local_energy_cost {
                mask[1] = true;
            }
            for b in 0..self.n_bs {
                mask[2 + b] = true;
            }
        }
        mask
    }

    fn exec_delay(&self, s: &MdpState, action: OffloadAction) -> f64 {
        match action {
            OffloadAction::Idle => 0.0,
            OffloadAction::Local => self.local_exec_slots,
            OffloadAction::Offload(b) => {
                self.offload_tx_slots[s.channel[b] as usize] + self.server_exec_slots
            }
        }
    }
}

/// Realized consequences of one action, as consumed by `immediate_cost`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionOutcome {
    /// Delay accrued this slot: execution delay of the chosen action plus
    /// one slot of waiting per task left in the queue.
    pub delay_slots: f64,
    /// Whether any task failed this slot (drop on full queue or deadline
    /// miss).
    pub failure: bool,
}

/// Immediate cost: realized delay plus the failure penalty.
pub fn immediate_cost(outcome: &ActionOutcome, failure_penalty: f64) -> f64 {
    outcome.delay_slots + if outcome.failure { failure_penalty } else { 0.0 }
}

/// Discounted return `sum_t gamma^(t-1) cost_t`.
pub fn discounted_return(costs: &[f64], gamma: f64) -> Result<f64, ScenarioError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(ScenarioError::InvalidConfig(format!(
            "gamma must lie in [0,1), got {gamma}"
        )));
    }
    let mut acc = 0.0;
    let mut weight = 1.0;
    for &c in costs {
        acc += weight * c;
        weight *= gamma;
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub outcome: ActionOutcome,
    pub cost: f64,
    pub next: MdpState,
}

/// Live environment with its own RNG streams.
#[derive(Debug, Clone)]
pub struct Env {
    pub config: EnvConfig,
    state: MdpState,
    /// Arrival slot of each queued task, oldest first. Only maintained
    /// when a deadline is configured.
    task_ages: VecDeque<u64>,
    slot: u64,
    rng_task: SimRng,
    rng_energy: SimRng,
    rng_channel: SimRng,
}

impl Env {
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self, ScenarioError> {
        config.validate()?;
        let state = MdpState {
            task_queue: 0,
            energy_queue: 0,
            channel: vec![0; config.n_bs],
        };
        Ok(Self {
            config,
            state,
            task_ages: VecDeque::new(),
            slot: 0,
            rng_task: SimRng::new(seed, streams::ARRIVALS),
            rng_energy: SimRng::new(seed, streams::ENERGY),
            rng_channel: SimRng::new(seed, streams::CHANNEL),
        })
    }

    pub fn state(&self) -> &MdpState {
        &self.state
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Advance one slot under `action`; panics on infeasible actions.
    pub fn step(&mut self, action: OffloadAction) -> StepResult {
        let mask = self.config.feasible_mask(&self.state);
        assert!(mask[action.index()], "infeasible action {action:?}");

        let exec_delay = self.config.exec_delay(&self.state, action);
        match action {
            OffloadAction::Idle => {}
            OffloadAction::Local => {
                self.state.task_queue -= 1;
                self.state.energy_queue -= self.config.local_energy_cost;
                self.task_ages.pop_front();
            }
            OffloadAction::Offload(_) => {
                self.state.task_queue -= 1;
                self.task_ages.pop_front();
            }
        }

        let mut failure = false;
        // Deadline drops on the tasks still waiting.
        if let Some(deadline) = self.config.deadline_slots {
            while let Some(&arrival) = self.task_ages.front() {
                if self.slot - arrival >= deadline {
                    self.task_ages.pop_front();
                    self.state.task_queue -= 1;
                    failure = true;
                } else {
                    break;
                }
            }
        }

        let holding = self.config.holding_cost * self.state.task_queue as f64;

        // Arrivals.
        if self.rng_task.bernoulli(self.config.arrival_prob) {
            if self.state.task_queue < self.config.task_cap {
                self.state.task_queue += 1;
                if self.config.deadline_slots.is_some() {
                    self.task_ages.push_back(self.slot);
                }
            } else {
                failure = true;
            }
        }
        if self.rng_energy.bernoulli(self.config.energy_rate)
            && self.state.energy_queue < self.config.energy_cap
        {
            self.state.energy_queue += 1;
        }

        // Channel evolution.
        for level in &mut self.state.channel {
            *level = next_level(*level, self.config.levels, self.config.channel_model, || {
                self.rng_channel.next_f64()
            });
        }

        self.slot += 1;
        let outcome = ActionOutcome {
            delay_slots: exec_delay + holding,
            failure,
        };
        StepResult {
            outcome,
            cost: immediate_cost(&outcome, self.config.failure_penalty),
            next: self.state.clone(),
        }
    }

    /// Expected immediate cost of `action` from the current internal
    /// state, marginalizing over this slot's arrival randomness. Used by
    /// the myopic greedy baseline.
    pub fn expected_immediate_cost(&self, action: OffloadAction) -> f64 {
        let mask = self.config.feasible_mask(&self.state);
        if !mask[action.index()] {
            return f64::INFINITY;
        }
        let exec_delay = self.config.exec_delay(&self.state, action);
        let mut tasks_left = self.state.task_queue;
        let mut ages = self.task_ages.clone();
        if action != OffloadAction::Idle {
            tasks_left -= 1;
            ages.pop_front();
        }
        let mut deadline_failures = 0.0;
        if let Some(deadline) = self.config.deadline_slots {
            while let Some(&arrival) = ages.front() {
                if self.slot - arrival >= deadline {
                    ages.pop_front();
                    tasks_left -= 1;
                    deadline_failures = 1.0;
                } else {
                    break;
                }
            }
        }
        let holding = self.config.holding_cost * tasks_left as f64;
        let p_overflow = if tasks_left >= self.config.task_cap {
            self.config.arrival_prob
        } else {
            0.0
        };
        let p_failure = deadline_failures + (1.0 - deadline_failures) * p_overflow;
        exec_delay + holding + self.config.failure_penalty * p_failure
    }

    /// Exact transition law `(probability, next state, cost)` for
    /// deadline-free configurations; the value-iteration oracle consumes
    /// this. Panics when a deadline is configured (state is then not
    /// Markov in the exposed components).
    pub fn transition_model(
        config: &EnvConfig,
        s: &MdpState,
        action: OffloadAction,
    ) -> Vec<(f64, MdpState, f64)> {
        assert!(
            config.deadline_slots.is_none(),
            "transition_model requires a deadline-free config"
        );
        let mask = config.feasible_mask(s);
        assert!(mask[action.index()], "infeasible action");

        let exec_delay = config.exec_delay(s, action);
        let mut mid = s.clone();
        match action {
            OffloadAction::Idle => {}
            OffloadAction::Local => {
                mid.task_queue -= 1;
                mid.energy_queue -= config.local_energy_cost;
            }
            OffloadAction::Offload(_) => {
                mid.task_queue -= 1;
            }
        }
        let holding = config.holding_cost * mid.task_queue as f64;

        let mut out = Vec::new();
        for (p_task, task_arrives) in [
            (1.0 - config.arrival_prob, false),
            (config.arrival_prob, true),
        ] {
            if p_task == 0.0 {
                continue;
            }
            for (p_energy, energy_arrives) in [
                (1.0 - config.energy_rate, false),
                (config.energy_rate, true),
            ] {
                if p_energy == 0.0 {
                    continue;
                }
                let mut next = mid.clone();
                let mut cost = exec_delay + holding;
                if task_arrives {
                    if next.task_queue < config.task_cap {
                        next.task_queue += 1;
                    } else {
                        cost += config.failure_penalty;
                    }
                }
                if energy_arrives && next.energy_queue < config.energy_cap {
                    next.energy_queue += 1;
                }
                for (prob, channel) in channel_transitions(&next.channel, config) {
                    let mut n = next.clone();
                    n.channel = channel;
                    out.push((p_task * p_energy * prob, n, cost));
                }
            }
        }
        out
    }

    /// Enumerate every state (for value iteration on small configs).
    pub fn enumerate_states(config: &EnvConfig) -> Vec<MdpState> {
        let mut states = Vec::with_capacity(config.n_states());
        let levels = config.levels as usize;
        let channel_combos = levels.pow(config.n_bs as u32);
        for t in 0..=config.task_cap {
            for e in 0..=config.energy_cap {
                for combo in 0..channel_combos {
                    let mut channel = vec![0u8; config.n_bs];
                    let mut rem = combo;
                    for slot in channel.iter_mut().rev() {
                        *slot = (rem % levels) as u8;
                        rem /= levels;
                    }
                    states.push(MdpState {
                        task_queue: t,
                        energy_queue: e,
                        channel,
                    });
                }
            }
        }
        states
    }
}

fn next_level(level: u8, levels: u8, model: ChannelModel, mut draw: impl FnMut() -> f64) -> u8 {
    match model {
        ChannelModel::Cycle => (level + 1) % levels,
        ChannelModel::RandomWalk { p_up, p_down } => {
            let u = draw();
            if u < p_up {
                (level + 1).min(levels - 1)
            } else if u < p_up + p_down {
                level.saturating_sub(1)
            } else {
                level
            }
        }
    }
}

/// All channel-vector transitions with probabilities.
fn channel_transitions(channel: &[u8], config: &EnvConfig) -> Vec<(f64, Vec<u8>)> {
    match config.channel_model {
        ChannelModel::Cycle => {
            let next: Vec<u8> = channel
                .iter()
                .map(|&l| (l + 1) % config.levels)
                .collect();
            vec![(1.0, next)]
        }
        ChannelModel::RandomWalk { p_up, p_down } => {
            let mut acc: Vec<(f64, Vec<u8>)> = vec![(1.0, Vec::new())];
            for &level in channel {
                let hold = 1.0 - p_up - p_down;
                let options = [
                    (p_up, (level + 1).min(config.levels - 1)),
                    (p_down, level.saturating_sub(1)),
                    (hold, level),
                ];
                let mut next_acc = Vec::new();
                for (p, prefix) in &acc {
                    // up/down at the boundary may coincide with hold;
                    // merge simply by emitting all three branches.
                    for (q, l) in options {
                        if q == 0.0 {
                            continue;
                        }
                        let mut v = prefix.clone();
                        v.push(l);
                        next_acc.push((p * q, v));
                    }
                }
                acc = next_acc;
            }
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn immediate_cost_examples() {
        assert_eq!(
            immediate_cost(
                &ActionOutcome {
                    delay_slots: 3.0,
                    failure: false
                },
                50.0
            ),
            3.0
        );
        assert_eq!(
            immediate_cost(
                &ActionOutcome {
                    delay_slots: 0.0,
                    failure: true
                },
                50.0
            ),
            50.0
        );
        // Idle with empty queues accrues nothing.
        assert_eq!(
            immediate_cost(
                &ActionOutcome {
                    delay_slots: 0.0,
                    failure: false
                },
                50.0
            ),
            0.0
        );
    }

    #[test]
    fn discounted_return_examples() {
        // Truncated geometric sum stays within gamma^T c/(1-gamma).
        let costs = vec![1.0; 200];
        let got = discounted_return(&costs, 0.9).unwrap();
        let exact = 1.0 / (1.0 - 0.9);
        assert!((got - exact).abs() <= 0.9f64.powi(200) * exact + 1e-9);

        assert_eq!(discounted_return(&[0.0; 50], 0.9).unwrap(), 0.0);
        assert_eq!(discounted_return(&[1.0, 0.0, 0.0], 0.9).unwrap(), 1.0);
        assert!(discounted_return(&[1.0], 1.0).is_err());
    }

    #[test]
    fn feasibility_masking() {
        let config = EnvConfig::default();
        let s = MdpState {
            task_queue: 1,
            energy_queue: 0,
            channel: vec![0, 0],
        };
        let mask = config.feasible_mask(&s);
        assert_eq!(mask, vec![true, false, true, true]);

        let empty = MdpState {
            task_queue: 0,
            energy_queue: 2,
            channel: vec![0, 0],
        };
        assert_eq!(config.feasible_mask(&empty), vec![true, false, false, false]);
    }

    #[test]
    fn state_indexing_is_a_bijection() {
        let config = EnvConfig::default();
        let states = Env::enumerate_states(&config);
        assert_eq!(states.len(), config.n_states());
        let mut seen = vec![false; config.n_states()];
        for s in &states {
            let idx = config.state_index(s);
            assert!(!seen[idx]);
            seen[idx] = true;
        }
    }

    #[test]
    fn transition_model_probabilities_sum_to_one() {
        let config = EnvConfig {
            deadline_slots: None,
            ..EnvConfig::default()
        };
        for s in Env::enumerate_states(&config) {
            for (a, feasible) in config.feasible_mask(&s).iter().enumerate() {
                if !feasible {
                    continue;
                }
                let total: f64 = Env::transition_model(&config, &s, OffloadAction::from_index(a))
                    .iter()
                    .map(|(p, _, _)| p)
                    .sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deadline_drops_old_tasks_as_failures() {
        let config = EnvConfig {
            arrival_prob: 1.0,
            energy_rate: 0.0,
            deadline_slots: Some(3),
            ..EnvConfig::default()
        };
        let mut env = Env::new(config, 9).unwrap();
        let mut failures = 0;
        for _ in 0..20 {
            let r = env.step(OffloadAction::Idle);
            if r.outcome.failure {
                failures += 1;
            }
        }
        assert!(failures > 0);
        // Queue never exceeds cap.
        assert!(env.state().task_queue <= 3);
    }

    #[test]
    fn onehot_has_exactly_one_bit_per_block() {
        let config = EnvConfig::default();
        let s = MdpState {
            task_queue: 2,
            energy_queue: 1,
            channel: vec![3, 0],
        };
        let mut buf = vec![0.0; config.onehot_dim()];
        config.encode_onehot(&s, &mut buf);
        assert_eq!(buf.iter().sum::<f64>(), 4.0);
        assert_eq!(buf[2], 1.0);
    }
}
