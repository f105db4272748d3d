//! Federated estimation of queue-tail GPD parameters for V2V links.
//!
//! Vehicles observe their own queue-length samples, extract exceedances
//! over a shared threshold, and take local projected-ascent steps on the
//! GPD log-likelihood. Every round they upload their two-parameter model
//! (a payload of 2 scalars) to the roadside server, which federates by
//! sample-count-weighted parameter averaging and broadcasts the global
//! model back. The centralized baseline (CEN) instead uploads every raw
//! queue sample and fits the pooled exceedances by full MLE.
//!
//! Each vehicle uses the current global tail model for transmit power
//! control: full power above the queue bound, otherwise
//! `p_min + (p_max - p_min) * (Q/d)^(1 + shape)`.

use serde::{Deserialize, Serialize};
use tailsim_core::rng::streams;
use tailsim_core::{bernoulli_arrival, QueueState, SimRng, TaskTemplate};
use tailsim_evt::gpd::{log_likelihood_grad, support_ok, GpdParams};
use tailsim_evt::{fit_gpd_mle, mean, peaks_over_threshold, sample_variance};

use crate::error::ScenarioError;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// One vehicle's tail model plus the MLE gradient it last computed.
#[derive(Debug, Clone)]
pub struct LocalModel {
    pub params: GpdParams,
    /// Latest `(d/d scale, d/d shape)` log-likelihood gradient.
    pub gradient: [f64; 2],
    /// Exceedances consumed since the last federation round.
    pub sample_count: u64,
}

impl LocalModel {
    pub fn new(params: GpdParams) -> Self {
        Self {
            params,
            gradient: [0.0; 2],
            sample_count: 0,
        }
    }
}

/// The federated model the server broadcasts.
#[derive(Debug, Clone)]
pub struct GlobalModel {
    pub params: GpdParams,
    pub round: u64,
    pub contributors: usize,
}

/// Scalar-count ledger of everything exchanged with the server.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PayloadLedger {
    pub uplink_units: u64,
    pub downlink_units: u64,
}

/// Scalars in one model update (scale and shape).
pub const MODEL_SCALARS: u64 = 2;

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

const MIN_SCALE: f64 = 1e-8;
const SHAPE_CLAMP: f64 = 0.99;

/// One local round: extract exceedances from fresh queue samples and take
/// a single projected ascent step on the GPD log-likelihood. No uplink is
/// charged; this is purely local. Without exceedances the model is
/// untouched.
pub fn local_update(model: &mut LocalModel, queue_samples: &[f64], threshold: f64, lr: f64) {
    let exceedances = peaks_over_threshold(queue_samples, threshold);
    if exceedances.is_empty() {
        return;
    }
    let values = exceedances.values();
    let k = values.len() as f64;
    let grad = log_likelihood_grad(&model.params, values);
    if !grad[0].is_finite() || !grad[1].is_finite() {
        // Current parameters put some excess outside the support; restart
        // from the exponential moment estimate.
        model.params = GpdParams {
            scale: mean(values).max(MIN_SCALE),
            shape: 0.0,
            threshold,
        };
        model.gradient = log_likelihood_grad(&model.params, values);
        model.sample_count += values.len() as u64;
        return;
    }
    model.gradient = grad;
    // Per-sample step, scale moving in units of the current scale.
    let mut step = lr;
    for _ in 0..40 {
        let cand = GpdParams {
            scale: (model.params.scale
                + step * grad[0] / k * model.params.scale * model.params.scale)
                .max(MIN_SCALE),
            shape: (model.params.shape + step * grad[1] / k).clamp(-SHAPE_CLAMP, SHAPE_CLAMP),
            threshold,
        };
        if support_ok(&cand, values) {
            model.params = cand;
            break;
        }
        step /= 2.0;
    }
    model.sample_count += values.len() as u64;
}

/// Server-side model averaging: sample-count-weighted means of scale and
/// shape (unweighted when every count is zero). Charges 2 scalars uplink
/// per contributor and 2 downlink per vehicle.
pub fn federate(
    models: &[LocalModel],
    previous: &GlobalModel,
    n_vehicles: usize,
    ledger: &mut PayloadLedger,
) -> GlobalModel {
    assert!(!models.is_empty(), "federate requires at least one model");
    let total: u64 = models.iter().map(|m| m.sample_count).sum();
    let (scale, shape) = if total == 0 {
        let n = models.len() as f64;
        (
            models.iter().map(|m| m.params.scale).sum::<f64>() / n,
            models.iter().map(|m| m.params.shape).sum::<f64>() / n,
        )
    } else {
        let mut scale = 0.0;
        let mut shape = 0.0;
        for m in models {
            let w = m.sample_count as f64 / total as f64;
            scale += w * m.params.scale;
            shape += w * m.params.shape;
        }
        (scale, shape)
    };
    ledger.uplink_units += MODEL_SCALARS * models.len() as u64;
    ledger.downlink_units += MODEL_SCALARS * n_vehicles as u64;
    GlobalModel {
        params: GpdParams {
            scale: scale.max(MIN_SCALE),
            shape: shape.clamp(-SHAPE_CLAMP, SHAPE_CLAMP),
            threshold: previous.params.threshold,
        },
        round: previous.round + 1,
        contributors: models.len(),
    }
}

/// Centralized baseline: every raw queue sample is uploaded, the pooled
/// exceedances are fit by full MLE. Charges 1 scalar uplink per raw
/// sample plus the 2-scalar broadcast per vehicle. With fewer than two
/// pooled exceedances the previous model is retained.
pub fn cen_update(
    previous: &GlobalModel,
    per_vehicle_samples: &[Vec<f64>],
    threshold: f64,
    fit_steps: usize,
    fit_lr: f64,
    ledger: &mut PayloadLedger,
) -> Result<GlobalModel, ScenarioError> {
    let n_vehicles = per_vehicle_samples.len();
    let raw_count: usize = per_vehicle_samples.iter().map(|s| s.len()).sum();
    ledger.uplink_units += raw_count as u64;
    ledger.downlink_units += MODEL_SCALARS * n_vehicles as u64;

    let pooled: Vec<f64> = per_vehicle_samples.iter().flatten().copied().collect();
    let exceedances = peaks_over_threshold(&pooled, threshold);
    if exceedances.len() < 2 {
        return Ok(GlobalModel {
            params: previous.params,
            round: previous.round + 1,
            contributors: n_vehicles,
        });
    }
    let fit = fit_gpd_mle(&exceedances, previous.params, fit_steps, fit_lr)?;
    Ok(GlobalModel {
        params: fit.params,
        round: previous.round + 1,
        contributors: n_vehicles,
    })
}

/// Tail-aware transmit power: full power once the backlog exceeds the
/// bound, otherwise interpolated as `(Q/d)^(1 + shape)` so a heavier
/// learned tail (larger shape) keeps power lower until the queue is close
/// to the bound.
pub fn power_control(backlog: f64, global_shape: f64, bound: f64, p_min: f64, p_max: f64) -> f64 {
    if backlog > bound {
        return p_max;
    }
    if backlog <= 0.0 {
        return p_min;
    }
    let frac = (backlog / bound).powf(1.0 + global_shape);
    p_min + (p_max - p_min) * frac.min(1.0)
}

// ---------------------------------------------------------------------------
// Scenario runner
// ---------------------------------------------------------------------------

fn default_n_vues() -> usize {
    10
}
fn default_arrival_prob() -> f64 {
    0.5
}
fn default_task_size_bits() -> u64 {
    30_000
}
fn default_d() -> f64 {
    1.2e5
}
fn default_round_slots() -> u64 {
    100
}
fn default_lr() -> f64 {
    0.5
}
fn default_fit_steps() -> usize {
    200
}
fn default_p_max() -> f64 {
    1.0
}
fn default_bandwidth_hz() -> f64 {
    1.0e7
}
fn default_slot_duration_s() -> f64 {
    1.0e-3
}
fn default_snr_per_watt() -> f64 {
    3.0
}
fn default_init_scale() -> f64 {
    2.0e4
}
fn default_horizon() -> u64 {
    30_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FedConfig {
    #[serde(default = "default_n_vues")]
    pub n_vues: usize,
    #[serde(default = "default_arrival_prob")]
    pub arrival_prob: f64,
    #[serde(default = "default_task_size_bits")]
    pub task_size_bits: u64,
    /// Queue bound `d` (the threshold Q_0 exceedances are measured over).
    #[serde(default = "default_d", alias = "q0")]
    pub d: f64,
    /// Slots between federation rounds.
    #[serde(default = "default_round_slots")]
    pub round_slots: u64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_fit_steps")]
    pub fit_steps: usize,
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    /// Defaults to 0.1 * p_max when absent.
    #[serde(default)]
    pub p_min: Option<f64>,
    #[serde(default = "default_bandwidth_hz")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_slot_duration_s")]
    pub slot_duration_s: f64,
    #[serde(default = "default_snr_per_watt")]
    pub snr_per_watt: f64,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default)]
    pub init_shape: f64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for FedConfig {
    fn default() -> Self {
        Self {
            n_vues: default_n_vues(),
            arrival_prob: default_arrival_prob(),
            task_size_bits: default_task_size_bits(),
            d: default_d(),
            round_slots: default_round_slots(),
            lr: default_lr(),
            fit_steps: default_fit_steps(),
            p_max: default_p_max(),
            p_min: None,
            bandwidth_hz: default_bandwidth_hz(),
            slot_duration_s: default_slot_duration_s(),
            snr_per_watt: default_snr_per_watt(),
            init_scale: default_init_scale(),
            init_shape: 0.0,
            horizon: default_horizon(),
            seed: 0,
        }
    }
}

impl FedConfig {
    pub fn p_min(&self) -> f64 {
        self.p_min.unwrap_or(0.1 * self.p_max)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_vues == 0 {
            return Err(ScenarioError::InvalidConfig("n_vues must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.arrival_prob) {
            return Err(ScenarioError::InvalidConfig(
                "arrival_prob must lie in [0,1]".into(),
            ));
        }
        if !(self.p_max > 0.0) {
            return Err(ScenarioError::InvalidConfig("p_max must be positive".into()));
        }
        if let Some(p_min) = self.p_min {
            if !(p_min >= 0.0 && p_min <= self.p_max) {
                return Err(ScenarioError::InvalidConfig(
                    "p_min must lie in [0, p_max]".into(),
                ));
            }
        }
        if self.round_slots == 0 || self.horizon == 0 {
            return Err(ScenarioError::InvalidConfig(
                "round_slots and horizon must be >= 1".into(),
            ));
        }
        if !(self.d > 0.0) {
            return Err(ScenarioError::InvalidConfig("d must be positive".into()));
        }
        if !(self.init_scale > 0.0) {
            return Err(ScenarioError::InvalidConfig(
                "init_scale must be positive".into(),
            ));
        }
        if self.task_size_bits == 0 {
            return Err(ScenarioError::InvalidConfig(
                "task_size_bits must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FedScheme {
    ExtFl,
    Cen,
}

impl FedScheme {
    pub fn label(&self) -> &'static str {
        match self {
            FedScheme::ExtFl => "extfl",
            FedScheme::Cen => "cen",
        }
    }
}

/// Per-round output row.
#[derive(Debug, Clone, Serialize)]
pub struct FedRoundRow {
    pub round: u64,
    pub scheme: String,
    pub uplink_units: u64,
    pub downlink_units: u64,
    pub sigma_tilde: f64,
    pub xi: f64,
    /// Fraction of slots this round with backlog <= d, network-wide.
    pub reliability: f64,
    pub excess_mean: f64,
    pub excess_var: f64,
}

#[derive(Debug, Clone)]
pub struct FedRunResult {
    pub rows: Vec<FedRoundRow>,
    pub final_model: GlobalModel,
    pub ledger: PayloadLedger,
    /// Fraction of all slots with backlog <= d, network-wide.
    pub overall_reliability: f64,
}

/// Simulate one scheme over the full horizon.
pub fn run(config: &FedConfig, scheme: FedScheme) -> Result<FedRunResult, ScenarioError> {
    config.validate()?;
    let template = TaskTemplate::new(config.task_size_bits, 1.0)?;
    let bw_slot = config.bandwidth_hz * config.slot_duration_s;
    let p_min = config.p_min();
    let init = GpdParams {
        scale: config.init_scale,
        shape: config.init_shape,
        threshold: config.d,
    };

    let mut queues: Vec<QueueState> = (0..config.n_vues).map(|_| QueueState::new()).collect();
    let mut arrival_rngs: Vec<SimRng> = (0..config.n_vues)
        .map(|v| SimRng::new(config.seed, streams::ARRIVALS + v as u64 * streams::NODE_STRIDE))
        .collect();
    let mut locals: Vec<LocalModel> = (0..config.n_vues).map(|_| LocalModel::new(init)).collect();
    let mut global = GlobalModel {
        params: init,
        round: 0,
        contributors: 0,
    };
    let mut ledger = PayloadLedger::default();
    let mut next_task_id = 0u64;
    let mut rows = Vec::new();
    let mut all_excesses: Vec<f64> = Vec::new();
    let mut ok_slots = 0u64;
    let mut round_ok_slots = 0u64;
    let mut round_samples: Vec<Vec<f64>> = vec![Vec::new(); config.n_vues];

    for slot in 0..config.horizon {
        for v in 0..config.n_vues {
            let backlog = queues[v].backlog_bits() as f64;
            let power = power_control(backlog, global.params.shape, config.d, p_min, config.p_max);
            let rate = (bw_slot * (1.0 + config.snr_per_watt * power).log2()).floor() as u64;
            let arrived = bernoulli_arrival(
                &mut arrival_rngs[v],
                config.arrival_prob,
                &template,
                slot,
                &mut next_task_id,
            )?
            .map_or(0, |t| t.size_bits);
            queues[v].step(arrived, rate);
            let sample = queues[v].backlog_bits() as f64;
            round_samples[v].push(sample);
            if sample <= config.d {
                ok_slots += 1;
                round_ok_slots += 1;
            } else {
                all_excesses.push(sample - config.d);
            }
        }

        if (slot + 1) % config.round_slots == 0 {
            match scheme {
                FedScheme::ExtFl => {
                    for v in 0..config.n_vues {
                        locals[v].params = global.params;
                        local_update(&mut locals[v], &round_samples[v], config.d, config.lr);
                    }
                    global = federate(&locals, &global, config.n_vues, &mut ledger);
                    for local in &mut locals {
                        local.sample_count = 0;
                    }
                }
                FedScheme::Cen => {
                    global = cen_update(
                        &global,
                        &round_samples,
                        config.d,
                        config.fit_steps,
                        config.lr,
                        &mut ledger,
                    )?;
                }
            }
            let slots_this_round = config.round_slots * config.n_vues as u64;
            rows.push(FedRoundRow {
                round: global.round,
                scheme: scheme.label().to_string(),
                uplink_units: ledger.uplink_units,
                downlink_units: ledger.downlink_units,
                sigma_tilde: global.params.scale,
                xi: global.params.shape,
                reliability: round_ok_slots as f64 / slots_this_round as f64,
                excess_mean: mean(&all_excesses),
                excess_var: sample_variance(&all_excesses),
            });
            round_ok_slots = 0;
            for samples in &mut round_samples {
                samples.clear();
            }
        }
    }

    let overall_reliability = ok_slots as f64 / (config.horizon * config.n_vues as u64) as f64;
    Ok(FedRunResult {
        rows,
        final_model: global,
        ledger,
        overall_reliability,
    })
}

/// Run both schemes on the same seed (paired arrival randomness) and
/// return `(extfl, cen)`.
pub fn run_paired(config: &FedConfig) -> Result<(FedRunResult, FedRunResult), ScenarioError> {
    Ok((run(config, FedScheme::ExtFl)?, run(config, FedScheme::Cen)?))
}

pub fn csv_header() -> &'static str {
    "round,scheme,uplink_units,downlink_units,sigma_tilde,xi,reliability,excess_mean,excess_var"
}

pub fn to_csv(rows: &[FedRoundRow]) -> String {
    let mut out = String::from(csv_header());
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.round,
            r.scheme,
            r.uplink_units,
            r.downlink_units,
            r.sigma_tilde,
            r.xi,
            r.reliability,
            r.excess_mean,
            r.excess_var
        ));
    }
    out
}
