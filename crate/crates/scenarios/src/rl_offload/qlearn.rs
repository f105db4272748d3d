//! Q-function approximation: tabular values or a one-hidden-layer MLP,
//! trained from a uniform-replay buffer against a hard-synced target
//! network. The target for a transition is
//! `y = cost + gamma * min over feasible a' of Q_target(s', a')`.

use tailsim_core::SimRng;

use super::env::{EnvConfig, MdpState};

/// One experienced transition; the feasibility mask of the successor
/// state rides along so targets can mask invalid actions without
/// consulting the environment.
#[derive(Debug, Clone)]
pub struct MdpTransition {
    pub state: MdpState,
    pub action: usize,
    pub cost: f64,
    pub next: MdpState,
    pub next_feasible: Vec<bool>,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<MdpTransition>,
    capacity: usize,
    write: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            data: Vec::with_capacity(capacity),
            capacity,
            write: 0,
        }
    }

    pub fn push(&mut self, t: MdpTransition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.write] = t;
        }
        self.write = (self.write + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Uniform draw (with replacement across calls).
    pub fn sample<'a>(&'a self, rng: &mut SimRng) -> &'a MdpTransition {
        &self.data[rng.below(self.data.len() as u64) as usize]
    }
}

// ---------------------------------------------------------------------------
// Representations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TabularQ {
    q: Vec<f64>,
    n_actions: usize,
}

impl TabularQ {
    fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            q: vec![0.0; n_states * n_actions],
            n_actions,
        }
    }

    fn get(&self, state_index: usize, action: usize) -> f64 {
        self.q[state_index * self.n_actions + action]
    }

    fn set(&mut self, state_index: usize, action: usize, value: f64) {
        self.q[state_index * self.n_actions + action] = value;
    }
}

/// One-hidden-layer ReLU network mapping a one-hot state encoding to one
/// Q-value per action.
#[derive(Debug, Clone)]
pub struct MlpQ {
    input_dim: usize,
    hidden: usize,
    n_actions: usize,
    w1: Vec<f64>, // input_dim x hidden
    b1: Vec<f64>,
    w2: Vec<f64>, // hidden x n_actions
    b2: Vec<f64>,
}

impl MlpQ {
    fn new(input_dim: usize, hidden: usize, n_actions: usize, rng: &mut SimRng) -> Self {
        let xavier = |fan_in: usize, fan_out: usize, rng: &mut SimRng| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out)
                .map(|_| (rng.next_f64() * 2.0 - 1.0) * limit)
                .collect::<Vec<f64>>()
        };
        Self {
            input_dim,
            hidden,
            n_actions,
            w1: xavier(input_dim, hidden, rng),
            b1: vec![0.0; hidden],
            w2: xavier(hidden, n_actions, rng),
            b2: vec![0.0; n_actions],
        }
    }

    fn forward(&self, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut h = self.b1.clone();
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.w1[i * self.hidden..(i + 1) * self.hidden];
            for (j, &w) in row.iter().enumerate() {
                h[j] += x * w;
            }
        }
        for v in &mut h {
            *v = v.max(0.0);
        }
        let mut out = self.b2.clone();
        for (j, &hj) in h.iter().enumerate() {
            if hj == 0.0 {
                continue;
            }
            let row = &self.w2[j * self.n_actions..(j + 1) * self.n_actions];
            for (a, &w) in row.iter().enumerate() {
                out[a] += hj * w;
            }
        }
        (h, out)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.extend_from_slice(&self.b2);
        p
    }

    pub fn set_params_flat(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut offset = 0;
        for dst in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let len = dst.len();
            dst.copy_from_slice(&p[offset..offset + len]);
            offset += len;
        }
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Mean squared error of chosen-action outputs against `targets`.
    pub fn batch_loss(&self, inputs: &[Vec<f64>], actions: &[usize], targets: &[f64]) -> f64 {
        let mut loss = 0.0;
        for ((input, &a), &y) in inputs.iter().zip(actions).zip(targets) {
            let (_, out) = self.forward(input);
            let err = out[a] - y;
            loss += err * err;
        }
        loss / inputs.len() as f64
    }

    /// Analytic gradient of `batch_loss` in `params_flat` layout.
    pub fn batch_loss_grad(
        &self,
        inputs: &[Vec<f64>],
        actions: &[usize],
        targets: &[f64],
    ) -> Vec<f64> {
        let mut g_w1 = vec![0.0; self.w1.len()];
        let mut g_b1 = vec![0.0; self.b1.len()];
        let mut g_w2 = vec![0.0; self.w2.len()];
        let mut g_b2 = vec![0.0; self.b2.len()];
        let scale = 2.0 / inputs.len() as f64;

        for ((input, &a), &y) in inputs.iter().zip(actions).zip(targets) {
            let (h, out) = self.forward(input);
            let err = scale * (out[a] - y);
            g_b2[a] += err;
            for (j, &hj) in h.iter().enumerate() {
                g_w2[j * self.n_actions + a] += err * hj;
            }
            // Backprop through ReLU into the first layer.
            for j in 0..self.hidden {
                if h[j] <= 0.0 {
                    continue;
                }
                let dh = err * self.w2[j * self.n_actions + a];
                g_b1[j] += dh;
                for (i, &x) in input.iter().enumerate() {
                    if x != 0.0 {
                        g_w1[i * self.hidden + j] += dh * x;
                    }
                }
            }
        }

        let mut g = Vec::with_capacity(self.param_count());
        g.extend(g_w1);
        g.extend(g_b1);
        g.extend(g_w2);
        g.extend(g_b2);
        g
    }

    fn sgd_step(&mut self, grad: &[f64], lr: f64) {
        let mut offset = 0;
        for dst in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let len = dst.len();
            for (w, g) in dst.iter_mut().zip(&grad[offset..offset + len]) {
                *w -= lr * g;
            }
            offset += len;
        }
    }
}

#[derive(Debug, Clone)]
pub enum QRepresentation {
    Tabular(TabularQ),
    Mlp(MlpQ),
}

/// Q approximation with replay and a hard-synced target copy.
#[derive(Debug, Clone)]
pub struct QApprox {
    env_config: EnvConfig,
    online: QRepresentation,
    target: QRepresentation,
    pub replay: ReplayBuffer,
    pub batch_size: usize,
    /// Hard-copy the online parameters into the target every this many
    /// train steps.
    pub target_sync_every: usize,
    train_steps: usize,
    onehot_buf: Vec<f64>,
}

impl QApprox {
    pub fn tabular(
        env_config: &EnvConfig,
        replay_capacity: usize,
        batch_size: usize,
        target_sync_every: usize,
    ) -> Self {
        let table = TabularQ::new(env_config.n_states(), env_config.n_actions());
        Self {
            env_config: env_config.clone(),
            online: QRepresentation::Tabular(table.clone()),
            target: QRepresentation::Tabular(table),
            replay: ReplayBuffer::new(replay_capacity),
            batch_size,
            target_sync_every,
            train_steps: 0,
            onehot_buf: vec![0.0; env_config.onehot_dim()],
        }
    }

    pub fn mlp(
        env_config: &EnvConfig,
        hidden: usize,
        replay_capacity: usize,
        batch_size: usize,
        target_sync_every: usize,
        init_rng: &mut SimRng,
    ) -> Self {
        let net = MlpQ::new(env_config.onehot_dim(), hidden, env_config.n_actions(), init_rng);
        Self {
            env_config: env_config.clone(),
            online: QRepresentation::Mlp(net.clone()),
            target: QRepresentation::Mlp(net),
            replay: ReplayBuffer::new(replay_capacity),
            batch_size,
            target_sync_every,
            train_steps: 0,
            onehot_buf: vec![0.0; env_config.onehot_dim()],
        }
    }

    pub fn online_mlp_mut(&mut self) -> Option<&mut MlpQ> {
        match &mut self.online {
            QRepresentation::Mlp(net) => Some(net),
            QRepresentation::Tabular(_) => None,
        }
    }

    pub fn train_steps(&self) -> usize {
        self.train_steps
    }

    fn values_of(repr: &QRepresentation, env_config: &EnvConfig, s: &MdpState, buf: &mut Vec<f64>) -> Vec<f64> {
        match repr {
            QRepresentation::Tabular(t) => {
                let idx = env_config.state_index(s);
                (0..env_config.n_actions()).map(|a| t.get(idx, a)).collect()
            }
            QRepresentation::Mlp(net) => {
                env_config.encode_onehot(s, buf);
                net.forward(buf).1
            }
        }
    }

    pub fn q_values(&mut self, s: &MdpState) -> Vec<f64> {
        Self::values_of(&self.online, &self.env_config, s, &mut self.onehot_buf)
    }

    fn target_min_feasible(&mut self, s: &MdpState, feasible: &[bool]) -> f64 {
        let values = Self::values_of(&self.target, &self.env_config, s, &mut self.onehot_buf);
        values
            .iter()
            .zip(feasible)
            .filter(|(_, &ok)| ok)
            .map(|(&v, _)| v)
            .fold(f64::INFINITY, f64::min)
    }

    /// One learning step: sample `batch_size` transitions uniformly, form
    /// targets from the frozen copy, update the online parameters, and
    /// hard-sync the target every `target_sync_every` steps.
    pub fn train_step(&mut self, rng: &mut SimRng, gamma: f64, lr: f64) {
        assert!(!self.replay.is_empty(), "train_step requires replay data");
        let batch: Vec<MdpTransition> = (0..self.batch_size)
            .map(|_| self.replay.sample(rng).clone())
            .collect();

        let targets: Vec<f64> = batch
            .iter()
            .map(|t| t.cost + gamma * self.target_min_feasible(&t.next, &t.next_feasible))
            .collect();

        match &mut self.online {
            QRepresentation::Tabular(table) => {
                for (t, &y) in batch.iter().zip(&targets) {
                    let idx = self.env_config.state_index(&t.state);
                    let old = table.get(idx, t.action);
                    table.set(idx, t.action, (1.0 - lr) * old + lr * y);
                }
            }
            QRepresentation::Mlp(net) => {
                let inputs: Vec<Vec<f64>> = batch
                    .iter()
                    .map(|t| {
                        self.env_config.encode_onehot(&t.state, &mut self.onehot_buf);
                        self.onehot_buf.clone()
                    })
                    .collect();
                let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
                let grad = net.batch_loss_grad(&inputs, &actions, &targets);
                net.sgd_step(&grad, lr);
            }
        }

        self.train_steps += 1;
        if self.train_steps % self.target_sync_every == 0 {
            self.target = self.online.clone();
        }
    }
}

/// Greedy action: argmin of Q over feasible actions, ties broken by the
/// action order IDLE < LOCAL < OFFLOAD(0) < OFFLOAD(1) < ...
pub fn greedy_action(q: &mut QApprox, s: &MdpState, feasible: &[bool]) -> usize {
    let values = q.q_values(s);
    let mut best = 0;
    let mut best_value = f64::INFINITY;
    for (a, (&v, &ok)) in values.iter().zip(feasible).enumerate() {
        if ok && v < best_value {
            best = a;
            best_value = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> EnvConfig {
        EnvConfig {
            task_cap: 1,
            energy_cap: 1,
            n_bs: 2,
            levels: 2,
            offload_tx_slots: vec![4.0, 2.0],
            ..EnvConfig::default()
        }
    }

    fn state(task: u8, energy: u8) -> MdpState {
        MdpState {
            task_queue: task,
            energy_queue: energy,
            channel: vec![0, 0],
        }
    }

    #[test]
    fn greedy_ties_break_to_idle() {
        let config = small_config();
        let mut q = QApprox::tabular(&config, 16, 4, 10);
        let s = state(1, 1);
        let a = greedy_action(&mut q, &s, &config.feasible_mask(&s));
        assert_eq!(a, 0, "all-equal Q must pick IDLE by tie order");
    }

    #[test]
    fn greedy_picks_minimum() {
        let config = small_config();
        let mut q = QApprox::tabular(&config, 16, 4, 10);
        let s = state(1, 1);
        let idx = config.state_index(&s);
        if let QRepresentation::Tabular(t) = &mut q.online {
            t.set(idx, 1, 1.0);
            t.set(idx, 0, 2.0);
            t.set(idx, 2, 2.0);
            t.set(idx, 3, 2.0);
        }
        let a = greedy_action(&mut q, &s, &config.feasible_mask(&s));
        assert_eq!(a, 1);
    }

    #[test]
    fn greedy_masks_local_without_energy() {
        let config = small_config();
        let mut q = QApprox::tabular(&config, 16, 4, 10);
        let s = state(1, 0);
        let idx = config.state_index(&s);
        if let QRepresentation::Tabular(t) = &mut q.online {
            t.set(idx, 1, -100.0); // LOCAL looks great but is infeasible
        }
        let a = greedy_action(&mut q, &s, &config.feasible_mask(&s));
        assert_ne!(a, 1);
    }

    #[test]
    fn replay_ring_never_exceeds_capacity() {
        let config = small_config();
        let mut buf = ReplayBuffer::new(5);
        for i in 0..23 {
            buf.push(MdpTransition {
                state: state(0, 0),
                action: 0,
                cost: i as f64,
                next: state(0, 0),
                next_feasible: config.feasible_mask(&state(0, 0)),
            });
        }
        assert_eq!(buf.len(), 5);
        // Ring keeps the most recent five costs.
        let costs: Vec<f64> = buf.data.iter().map(|t| t.cost).collect();
        for c in [18.0, 19.0, 20.0, 21.0, 22.0] {
            assert!(costs.contains(&c));
        }
    }

    #[test]
    fn replay_sampling_is_uniform() {
        // Chi-square goodness of fit over 1e5 draws from 20 items; the
        // critical value for 19 dof at p = 0.01 is 36.19.
        let config = small_config();
        let mut buf = ReplayBuffer::new(20);
        for i in 0..20 {
            buf.push(MdpTransition {
                state: state(0, 0),
                action: 0,
                cost: i as f64,
                next: state(0, 0),
                next_feasible: config.feasible_mask(&state(0, 0)),
            });
        }
        let mut rng = SimRng::new(77, 0);
        let mut counts = [0u64; 20];
        let draws = 100_000;
        for _ in 0..draws {
            counts[buf.sample(&mut rng).cost as usize] += 1;
        }
        let expected = draws as f64 / 20.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 36.19, "chi-square {chi2} rejects uniformity");
    }

    /// Deterministic single-state chain with cost 1 per step converges to
    /// the fixed point 1/(1-gamma) = 10.
    #[test]
    fn tabular_converges_to_geometric_fixed_point() {
        let config = EnvConfig {
            task_cap: 0,
            energy_cap: 0,
            n_bs: 1,
            levels: 1,
            offload_tx_slots: vec![3.0],
            ..EnvConfig::default()
        };
        let s = MdpState {
            task_queue: 0,
            energy_queue: 0,
            channel: vec![0],
        };
        let mut q = QApprox::tabular(&config, 10, 4, 1);
        q.replay.push(MdpTransition {
            state: s.clone(),
            action: 0,
            cost: 1.0,
            next: s.clone(),
            next_feasible: vec![true, false, false],
        });
        let mut rng = SimRng::new(1, 0);
        for _ in 0..10_000 {
            q.train_step(&mut rng, 0.9, 0.5);
        }
        let v = q.q_values(&s)[0];
        assert!((v - 10.0).abs() < 1e-3, "Q = {v}, want 10");
    }

    /// Two-action bandit with costs 0 and 1: the learned policy takes the
    /// free action.
    #[test]
    fn bandit_prefers_zero_cost_action() {
        let config = EnvConfig {
            task_cap: 1,
            energy_cap: 1,
            n_bs: 1,
            levels: 1,
            offload_tx_slots: vec![1.0],
            ..EnvConfig::default()
        };
        let s = state_with(&config, 1, 1);
        let feasible = config.feasible_mask(&s);
        let mut q = QApprox::tabular(&config, 100, 8, 20);
        // LOCAL costs 0, OFFLOAD costs 1, both lead back to s.
        for _ in 0..20 {
            q.replay.push(MdpTransition {
                state: s.clone(),
                action: 1,
                cost: 0.0,
                next: s.clone(),
                next_feasible: feasible.clone(),
            });
            q.replay.push(MdpTransition {
                state: s.clone(),
                action: 2,
                cost: 1.0,
                next: s.clone(),
                next_feasible: feasible.clone(),
            });
        }
        let mut rng = SimRng::new(2, 0);
        for _ in 0..2000 {
            q.train_step(&mut rng, 0.5, 0.3);
        }
        let values = q.q_values(&s);
        assert!(values[1] < values[2]);
    }

    fn state_with(config: &EnvConfig, task: u8, energy: u8) -> MdpState {
        MdpState {
            task_queue: task,
            energy_queue: energy,
            channel: vec![0; config.n_bs],
        }
    }

    /// Analytic MLP gradient against central finite differences on a
    /// fixed batch: relative error <= 1e-4 on sampled coordinates.
    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let config = small_config();
        let mut rng = SimRng::new(5, 0);
        let mut q = QApprox::mlp(&config, 8, 16, 4, 10, &mut rng);
        let net = q.online_mlp_mut().unwrap();

        let states = [state(1, 1), state(0, 1), state(1, 0)];
        let mut inputs = Vec::new();
        for s in &states {
            let mut buf = vec![0.0; config.onehot_dim()];
            config.encode_onehot(s, &mut buf);
            inputs.push(buf);
        }
        let actions = vec![0usize, 2, 3];
        let targets = vec![1.5, -0.5, 2.0];

        let analytic = net.batch_loss_grad(&inputs, &actions, &targets);
        let mut params = net.params_flat();
        let h = 1e-5;
        // Sample a spread of coordinates across all four blocks.
        let n = params.len();
        for k in 0..60 {
            let i = k * n / 60;
            let orig = params[i];
            params[i] = orig + h;
            net.set_params_flat(&params);
            let up = net.batch_loss(&inputs, &actions, &targets);
            params[i] = orig - h;
            net.set_params_flat(&params);
            let down = net.batch_loss(&inputs, &actions, &targets);
            params[i] = orig;
            net.set_params_flat(&params);
            let fd = (up - down) / (2.0 * h);
            let rel = (analytic[i] - fd).abs() / fd.abs().max(1e-4);
            assert!(
                rel <= 1e-4,
                "param {i}: analytic {} vs fd {} (rel {rel})",
                analytic[i],
                fd
            );
        }
    }
}
