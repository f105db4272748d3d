//! Multi-user VR gaming arcade served by mmWave access points with edge
//! compute.
//!
//! Every frame period each player requests an HD frame. The serving AP
//! renders it (unless a proactively rendered copy is cached) and then
//! transmits it; the delivered-frame delay decomposes exactly as
//!
//! ```text
//! total = hd * (computing + communication + tau_ep)
//! ```
//!
//! with `computing = (kappa L_hd / c_e + W) z (1 - y)` and
//! `communication` the minimum number of slots whose cumulative delivered
//! bits reach `L_hd`. Frames that blow the motion-to-photon deadline are
//! downgraded to low quality.
//!
//! Three schemes: BASELINE-1 (reactive, single connectivity), BASELINE-2
//! (proactive rendering, single connectivity), PROPOSED (proactive plus
//! SFN multi-connectivity: when the serving SINR drops below a threshold,
//! idle APs transmit the same signal and received powers combine).
//!
//! Prediction errors cost twice: the wrongly cached frame is transmitted
//! before the mistake is discovered, and the correct frame must then be
//! rendered and sent in real time.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use tailsim_core::channel::{db_to_linear, LinkParams};
use tailsim_core::rng::streams;
use tailsim_core::{BlockageProcess, SimRng};
use tailsim_evt::{empirical_quantile, mean};

use crate::error::ScenarioError;

// ---------------------------------------------------------------------------
// Pure delay operations
// ---------------------------------------------------------------------------

/// Computing delay of an HD frame: `(kappa L / c_e + W) z (1 - y)`,
/// rounded up to whole slots. Cached (`y = 1`) or unscheduled (`z = 0`)
/// frames cost nothing.
pub fn computing_delay(
    hd_bits: u64,
    density: f64,
    capability: u64,
    waiting_slots: u64,
    scheduled: bool,
    cached: bool,
) -> u64 {
    if !scheduled || cached {
        return 0;
    }
    (density * hd_bits as f64 / capability as f64 + waiting_slots as f64).ceil() as u64
}

/// Whole slots a render takes once started.
pub fn render_exec_slots(hd_bits: u64, density: f64, capability: u64) -> u64 {
    (density * hd_bits as f64 / capability as f64).ceil() as u64
}

/// Communication delay: the smallest `d` such that the cumulative bits
/// delivered over slots `start+1 ..= start+d` reach `hd_bits`; `None` if
/// the budget of `max_slots` is exhausted first (missed frame).
pub fn communication_delay(
    hd_bits: u64,
    rate_bits_per_slot: impl Fn(u64) -> f64,
    start_slot: u64,
    max_slots: u64,
) -> Option<u64> {
    let target = hd_bits as f64;
    let mut cumulative = 0.0;
    for d in 1..=max_slots {
        cumulative += rate_bits_per_slot(start_slot + d).max(0.0);
        if cumulative >= target {
            return Some(d);
        }
    }
    None
}

/// Total delay per the delivered-frame decomposition: zero when the LQ
/// frame was delivered instead.
pub fn total_delay(hd_delivered: bool, cp_slots: u64, cm_slots: u64, tau_ep_slots: u64) -> u64 {
    if hd_delivered {
        cp_slots + cm_slots + tau_ep_slots
    } else {
        0
    }
}

/// SFN combining: if the serving AP's SINR clears the threshold it
/// transmits alone; otherwise the idle candidates join and their received
/// powers add, while every non-participating AP contributes residual
/// interference attenuated by the directionality factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SfnOutcome {
    pub sinr: f64,
    pub rate_bits_per_slot: f64,
    pub aps_used: Vec<usize>,
}

pub fn sfn_rate(
    serving: usize,
    idle_candidates: &[usize],
    received_snr: &[f64],
    sinr_threshold: f64,
    directionality: f64,
    link: &LinkParams,
) -> SfnOutcome {
    let total: f64 = received_snr.iter().sum();
    let single_sinr =
        received_snr[serving] / (1.0 + directionality * (total - received_snr[serving]));
    if single_sinr >= sinr_threshold || idle_candidates.is_empty() {
        return SfnOutcome {
            sinr: single_sinr,
            rate_bits_per_slot: link.rate_bits_per_slot(single_sinr),
            aps_used: vec![serving],
        };
    }
    let mut used = vec![serving];
    used.extend_from_slice(idle_candidates);
    let signal: f64 = used.iter().map(|&a| received_snr[a]).sum();
    let interference = total - signal;
    let sinr = signal / (1.0 + directionality * interference);
    SfnOutcome {
        sinr,
        rate_bits_per_slot: link.rate_bits_per_slot(sinr),
        aps_used: used,
    }
}

/// Pose predictor: a prerendered frame turns out correct with
/// probability `accuracy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionModel {
    pub accuracy: f64,
    /// How many frames ahead the predictor looks.
    pub horizon_frames: u64,
}

/// A cache-fill decision for one prerendered frame; `will_hit` is the
/// realized prediction correctness, drawn at render time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheDecision {
    pub user: usize,
    pub frame: u64,
    pub will_hit: bool,
}

/// Decide cache fills for idle-cycle prerendering, capped by capacity.
pub fn proactive_render(
    prediction: &PredictionModel,
    rng: &mut SimRng,
    upcoming: &[(usize, u64)],
    capacity_left: usize,
) -> Vec<CacheDecision> {
    upcoming
        .iter()
        .take(capacity_left)
        .map(|&(user, frame)| CacheDecision {
            user,
            frame,
            will_hit: rng.bernoulli(prediction.accuracy),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

fn default_n_aps() -> usize {
    16
}
fn default_players_grid() -> Vec<usize> {
    vec![4, 8, 12, 16]
}
fn default_hd_bits() -> u64 {
    2_000_000
}
fn default_lq_bits() -> u64 {
    200_000
}
fn default_density() -> f64 {
    50.0
}
fn default_ap_compute() -> u64 {
    50_000_000
}
fn default_p_hit() -> f64 {
    0.9
}
fn default_p_block() -> f64 {
    0.05
}
fn default_blockage_mean_slots() -> f64 {
    8.0
}
fn default_nlos_penalty_db() -> f64 {
    20.0
}
fn default_sinr_threshold_db() -> f64 {
    5.0
}
fn default_tau_ep_slots() -> u64 {
    2
}
fn default_frame_period_slots() -> u64 {
    11
}
fn default_deadline_slots() -> u64 {
    20
}
fn default_bandwidth_hz() -> f64 {
    2.0e8
}
fn default_slot_duration_s() -> f64 {
    1.0e-3
}
fn default_snr_at_1m() -> f64 {
    2000.0
}
fn default_pathloss_exp() -> f64 {
    2.5
}
fn default_hall_size_m() -> f64 {
    20.0
}
fn default_user_radius_m() -> f64 {
    1.5
}
fn default_directionality() -> f64 {
    0.01
}
fn default_max_sfn_extra() -> usize {
    2
}
fn default_cache_capacity() -> usize {
    8
}
fn default_horizon() -> u64 {
    20_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VrConfig {
    #[serde(default = "default_n_aps")]
    pub n_aps: usize,
    /// Player counts swept by the experiment.
    #[serde(default = "default_players_grid")]
    pub players_grid: Vec<usize>,
    #[serde(default = "default_hd_bits")]
    pub hd_bits: u64,
    #[serde(default = "default_lq_bits")]
    pub lq_bits: u64,
    /// Rendering density kappa in cycles per bit.
    #[serde(default = "default_density")]
    pub density: f64,
    /// Edge-unit compute capability c_e in cycles per slot.
    #[serde(default = "default_ap_compute")]
    pub ap_compute: u64,
    #[serde(default = "default_p_hit")]
    pub p_hit: f64,
    #[serde(default = "default_p_block")]
    pub p_block: f64,
    #[serde(default = "default_blockage_mean_slots")]
    pub blockage_mean_slots: f64,
    #[serde(default = "default_nlos_penalty_db")]
    pub nlos_penalty_db: f64,
    #[serde(default = "default_sinr_threshold_db")]
    pub sinr_threshold_db: f64,
    #[serde(default = "default_tau_ep_slots")]
    pub tau_ep_slots: u64,
    #[serde(default = "default_frame_period_slots")]
    pub frame_period_slots: u64,
    /// Motion-to-photon budget in slots; the total delay (including
    /// tau_ep) must fit inside it.
    #[serde(default = "default_deadline_slots")]
    pub deadline_slots: u64,
    #[serde(default = "default_bandwidth_hz")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_slot_duration_s")]
    pub slot_duration_s: f64,
    /// Received SNR at 1 m from an AP, line of sight.
    #[serde(default = "default_snr_at_1m")]
    pub snr_at_1m: f64,
    #[serde(default = "default_pathloss_exp")]
    pub pathloss_exp: f64,
    #[serde(default = "default_hall_size_m")]
    pub hall_size_m: f64,
    /// Players spawn on rings of this radius around the center APs.
    #[serde(default = "default_user_radius_m")]
    pub user_radius_m: f64,
    /// Residual interference factor of non-serving APs.
    #[serde(default = "default_directionality")]
    pub directionality: f64,
    /// Extra APs an SFN transmission may recruit.
    #[serde(default = "default_max_sfn_extra")]
    pub max_sfn_extra: usize,
    /// Prerendered frames an AP cache holds (oldest evicted).
    #[serde(default = "default_cache_capacity")]
    pub cache_capacity: usize,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for VrConfig {
    fn default() -> Self {
        Self {
            n_aps: default_n_aps(),
            players_grid: default_players_grid(),
            hd_bits: default_hd_bits(),
            lq_bits: default_lq_bits(),
            density: default_density(),
            ap_compute: default_ap_compute(),
            p_hit: default_p_hit(),
            p_block: default_p_block(),
            blockage_mean_slots: default_blockage_mean_slots(),
            nlos_penalty_db: default_nlos_penalty_db(),
            sinr_threshold_db: default_sinr_threshold_db(),
            tau_ep_slots: default_tau_ep_slots(),
            frame_period_slots: default_frame_period_slots(),
            deadline_slots: default_deadline_slots(),
            bandwidth_hz: default_bandwidth_hz(),
            slot_duration_s: default_slot_duration_s(),
            snr_at_1m: default_snr_at_1m(),
            pathloss_exp: default_pathloss_exp(),
            hall_size_m: default_hall_size_m(),
            user_radius_m: default_user_radius_m(),
            directionality: default_directionality(),
            max_sfn_extra: default_max_sfn_extra(),
            cache_capacity: default_cache_capacity(),
            horizon: default_horizon(),
            seed: 0,
        }
    }
}

impl VrConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_aps == 0 {
            return Err(ScenarioError::InvalidConfig("n_aps must be >= 1".into()));
        }
        if self.players_grid.is_empty() || self.players_grid.iter().any(|&p| p == 0) {
            return Err(ScenarioError::InvalidConfig(
                "players_grid must be a nonempty list of positive counts".into(),
            ));
        }
        if self.hd_bits <= self.lq_bits || self.lq_bits == 0 {
            return Err(ScenarioError::InvalidConfig(
                "hd_bits must exceed lq_bits and both must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_hit) || !(0.0..=1.0).contains(&self.p_block) {
            return Err(ScenarioError::InvalidConfig(
                "p_hit and p_block must lie in [0,1]".into(),
            ));
        }
        if self.ap_compute == 0 || !(self.density > 0.0) {
            return Err(ScenarioError::InvalidConfig(
                "ap_compute and density must be positive".into(),
            ));
        }
        if self.frame_period_slots == 0 || self.deadline_slots == 0 {
            return Err(ScenarioError::InvalidConfig(
                "frame_period_slots and deadline_slots must be >= 1".into(),
            ));
        }
        if self.deadline_slots <= self.tau_ep_slots {
            return Err(ScenarioError::InvalidConfig(
                "deadline_slots must exceed tau_ep_slots".into(),
            ));
        }
        Ok(())
    }

    fn link(&self) -> LinkParams {
        LinkParams {
            bandwidth_hz: self.bandwidth_hz,
            slot_duration_s: self.slot_duration_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VrScheme {
    /// Reactive rendering, single connectivity.
    Baseline1,
    /// Proactive rendering, single connectivity.
    Baseline2,
    /// Proactive rendering plus SFN multi-connectivity.
    Proposed,
}

impl VrScheme {
    pub fn label(&self) -> &'static str {
        match self {
            VrScheme::Baseline1 => "baseline-1",
            VrScheme::Baseline2 => "baseline-2",
            VrScheme::Proposed => "proposed",
        }
    }

    fn proactive(&self) -> bool {
        !matches!(self, VrScheme::Baseline1)
    }

    fn sfn(&self) -> bool {
        matches!(self, VrScheme::Proposed)
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Full per-frame log entry.
#[derive(Debug, Clone)]
pub struct FrameRecord {
    pub user: usize,
    pub frame: u64,
    pub request_slot: u64,
    /// HD delivered (false means downgraded to LQ on deadline miss).
    pub hd_delivered: bool,
    pub cached: bool,
    /// Computing delay as logged at scheduling time.
    pub cp_slots: u64,
    /// Communication delay: realized for delivered frames, the deadline
    /// transmission budget for missed ones (censored).
    pub cm_slots: u64,
    /// Delivery slot of the HD frame, when delivered.
    pub delivered_slot: Option<u64>,
    /// Total delay per the delivered-frame decomposition.
    pub total_slots: u64,
}

#[derive(Debug, Clone)]
struct RenderJob {
    user: usize,
    frame: u64,
    remaining_slots: u64,
    /// Retransmit the wrong cached frame before this one (prediction
    /// miss): the eventual transmission carries twice the HD payload.
    double_payload: bool,
}

#[derive(Debug, Clone)]
struct TxJob {
    user: usize,
    frame: u64,
    bits_left: f64,
    /// Slot the job became eligible to transmit.
    ready_slot: u64,
    /// LQ fallback transmissions ride the same link but are not part of
    /// the HD decomposition.
    lq: bool,
}

#[derive(Debug, Clone)]
struct CacheEntry {
    user: usize,
    frame: u64,
    will_hit: bool,
}

#[derive(Debug, Clone, Default)]
struct ApState {
    render_queue: VecDeque<RenderJob>,
    /// In-flight proactive render, abandoned when real-time work arrives.
    prerender: Option<RenderJob>,
    tx_queue: VecDeque<TxJob>,
    cache: VecDeque<CacheEntry>,
}

#[derive(Debug, Clone)]
struct PendingFrame {
    user: usize,
    frame: u64,
    request_slot: u64,
    cached: bool,
    cp_slots: u64,
    done: bool,
}

/// Aggregate statistics for one (scheme, players) run.
#[derive(Debug, Clone, Serialize)]
pub struct VrStats {
    pub players: usize,
    pub scheme: String,
    pub mean_cm_delay: f64,
    pub p99_cm_delay: f64,
    pub mean_cp_delay: f64,
    pub p99_cp_delay: f64,
    /// Fraction of frames delivered in HD.
    pub hd_rate: f64,
    /// Fraction downgraded to LQ.
    pub miss_rate: f64,
    #[serde(skip)]
    pub frames: Vec<FrameRecord>,
    #[serde(skip)]
    pub wasted_prerenders: u64,
    #[serde(skip)]
    pub cache_hits: u64,
    #[serde(skip)]
    pub cache_lookups: u64,
}

/// Simulate one scheme at one player count.
pub fn run_scheme(
    config: &VrConfig,
    scheme: VrScheme,
    players: usize,
) -> Result<VrStats, ScenarioError> {
    config.validate()?;
    let link = config.link();
    let sinr_threshold = db_to_linear(config.sinr_threshold_db);
    let nlos_attenuation = db_to_linear(config.nlos_penalty_db);
    let exec_slots = render_exec_slots(config.hd_bits, config.density, config.ap_compute);
    // Transmission must finish before the motion-to-photon budget closes.
    let tx_deadline_budget = config.deadline_slots - config.tau_ep_slots;
    let prediction = PredictionModel {
        accuracy: config.p_hit,
        horizon_frames: 1,
    };

    // Deterministic geometry: APs on a ceiling grid, players in pods
    // ringed around the four most central APs (round-robin), so player
    // populations are homogeneous and grow by adding same-AP contention.
    // Every player owns its placement stream so the first k players sit
    // at identical spots for every player count.
    let grid_side = (config.n_aps as f64).sqrt().ceil() as usize;
    let spacing = config.hall_size_m / grid_side as f64;
    let ap_pos: Vec<(f64, f64)> = (0..config.n_aps)
        .map(|a| {
            let gx = a % grid_side;
            let gy = a / grid_side;
            (spacing * (gx as f64 + 0.5), spacing * (gy as f64 + 0.5))
        })
        .collect();
    let center = config.hall_size_m / 2.0;
    let mut pod_aps: Vec<usize> = (0..config.n_aps).collect();
    pod_aps.sort_by(|&a, &b| {
        let da = (ap_pos[a].0 - center).powi(2) + (ap_pos[a].1 - center).powi(2);
        let db = (ap_pos[b].0 - center).powi(2) + (ap_pos[b].1 - center).powi(2);
        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
    });
    pod_aps.truncate(4.min(config.n_aps));
    let user_pos: Vec<(f64, f64)> = (0..players)
        .map(|u| {
            let mut rng = SimRng::new(
                config.seed,
                streams::PLACEMENT + u as u64 * streams::NODE_STRIDE,
            );
            let (px, py) = ap_pos[pod_aps[u % pod_aps.len()]];
            let radius = config.user_radius_m * (0.5 + 0.5 * rng.next_f64());
            let angle = std::f64::consts::TAU * rng.next_f64();
            (px + radius * angle.cos(), py + radius * angle.sin())
        })
        .collect();
    let base_snr: Vec<Vec<f64>> = user_pos
        .iter()
        .map(|&(ux, uy)| {
            ap_pos
                .iter()
                .map(|&(ax, ay)| {
                    let d = ((ux - ax).powi(2) + (uy - ay).powi(2)).sqrt().max(1.0);
                    config.snr_at_1m / d.powf(config.pathloss_exp)
                })
                .collect()
        })
        .collect();

    let mut blockages: Vec<Vec<BlockageProcess>> = (0..players)
        .map(|_| {
            (0..config.n_aps)
                .map(|_| BlockageProcess::new(config.p_block, config.blockage_mean_slots))
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut channel_rngs: Vec<SimRng> = (0..players)
        .map(|u| SimRng::new(config.seed, streams::CHANNEL + u as u64 * streams::NODE_STRIDE))
        .collect();
    let mut prediction_rngs: Vec<SimRng> = (0..players)
        .map(|u| SimRng::new(config.seed, streams::POLICY + u as u64 * streams::NODE_STRIDE))
        .collect();

    let mut aps: Vec<ApState> = (0..config.n_aps).map(|_| ApState::default()).collect();
    let mut pending: Vec<PendingFrame> = Vec::new();
    let mut records: Vec<FrameRecord> = Vec::new();
    let mut frame_counter = vec![0u64; players];
    let mut snr = vec![vec![0.0f64; config.n_aps]; players];
    let mut wasted_prerenders = 0u64;
    let mut cache_hits = 0u64;
    let mut cache_lookups = 0u64;

    for slot in 0..config.horizon {
        // 1. Channel evolution and association (strongest SINR, ties to
        // the lowest AP id).
        for u in 0..players {
            for a in 0..config.n_aps {
                let los = blockages[u][a].step(&mut channel_rngs[u]);
                snr[u][a] = if los {
                    base_snr[u][a]
                } else {
                    base_snr[u][a] / nlos_attenuation
                };
            }
        }
        let serving: Vec<usize> = (0..players)
            .map(|u| {
                let total: f64 = snr[u].iter().sum();
                let mut best = 0;
                let mut best_sinr = f64::NEG_INFINITY;
                for a in 0..config.n_aps {
                    let s = snr[u][a] / (1.0 + config.directionality * (total - snr[u][a]));
                    if s > best_sinr {
                        best_sinr = s;
                        best = a;
                    }
                }
                best
            })
            .collect();

        // 2. Frame generation: one synchronized cadence for the arcade.
        for u in 0..players {
            if slot % config.frame_period_slots != 0 {
                continue;
            }
            let frame = frame_counter[u];
            frame_counter[u] += 1;
            let ap = serving[u];

            let mut cached = false;
            let mut wrong_prediction = false;
            if scheme.proactive() {
                cache_lookups += 1;
                if let Some(idx) = aps[ap]
                    .cache
                    .iter()
                    .position(|e| e.user == u && e.frame == frame)
                {
                    let entry = aps[ap].cache.remove(idx).unwrap();
                    if entry.will_hit {
                        cached = true;
                        cache_hits += 1;
                    } else {
                        wrong_prediction = true;
                        wasted_prerenders += 1;
                    }
                }
            }

            let cp = if cached {
                computing_delay(config.hd_bits, config.density, config.ap_compute, 0, true, true)
            } else {
                // Real-time render; prerenders never block, so the wait
                // counts only the real-time jobs ahead.
                let waiting: u64 = aps[ap].render_queue.iter().map(|j| j.remaining_slots).sum();
                computing_delay(
                    config.hd_bits,
                    config.density,
                    config.ap_compute,
                    waiting,
                    true,
                    false,
                )
            };
            pending.push(PendingFrame {
                user: u,
                frame,
                request_slot: slot,
                cached,
                cp_slots: cp,
                done: false,
            });
            if cached {
                aps[ap].tx_queue.push_back(TxJob {
                    user: u,
                    frame,
                    bits_left: config.hd_bits as f64,
                    ready_slot: slot,
                    lq: false,
                });
            } else {
                // A real-time job preempts any prerender in progress.
                if aps[ap].prerender.take().is_some() {
                    wasted_prerenders += 1;
                }
                aps[ap].render_queue.push_back(RenderJob {
                    user: u,
                    frame,
                    remaining_slots: exec_slots,
                    double_payload: wrong_prediction,
                });
            }
        }

        // 3. Rendering; idle edge units prerender upcoming frames.
        for ap in 0..config.n_aps {
            if let Some(job) = aps[ap].render_queue.front_mut() {
                job.remaining_slots -= 1;
                if job.remaining_slots == 0 {
                    let job = aps[ap].render_queue.pop_front().unwrap();
                    let payload = if job.double_payload {
                        // The wrong cached frame goes out in real time
                        // ahead of the correct one.
                        2 * config.hd_bits
                    } else {
                        config.hd_bits
                    };
                    aps[ap].tx_queue.push_back(TxJob {
                        user: job.user,
                        frame: job.frame,
                        bits_left: payload as f64,
                        ready_slot: slot + 1,
                        lq: false,
                    });
                }
            } else if scheme.proactive() {
                if aps[ap].prerender.is_none() {
                    let upcoming: Vec<(usize, u64)> = (0..players)
                        .filter(|&u| serving[u] == ap)
                        .map(|u| (u, frame_counter[u]))
                        .filter(|&(u, f)| {
                            !aps[ap].cache.iter().any(|e| e.user == u && e.frame == f)
                                && !pending.iter().any(|p| p.user == u && p.frame == f)
                        })
                        .collect();
                    let capacity_left =
                        config.cache_capacity - aps[ap].cache.len().min(config.cache_capacity);
                    // Draw the prediction from the candidate user's own
                    // stream so caching patterns pair across player counts.
                    let decision = upcoming.first().and_then(|&(u, _)| {
                        proactive_render(
                            &prediction,
                            &mut prediction_rngs[u],
                            &upcoming[..1],
                            capacity_left,
                        )
                        .into_iter()
                        .next()
                    });
                    if let Some(decision) = decision {
                        aps[ap].prerender = Some(RenderJob {
                            user: decision.user,
                            frame: decision.frame,
                            remaining_slots: exec_slots,
                            // carries the realized prediction draw
                            double_payload: !decision.will_hit,
                        });
                    }
                }
                if let Some(job) = aps[ap].prerender.as_mut() {
                    job.remaining_slots -= 1;
                    if job.remaining_slots == 0 {
                        let job = aps[ap].prerender.take().unwrap();
                        if aps[ap].cache.len() >= config.cache_capacity {
                            aps[ap].cache.pop_front();
                        }
                        aps[ap].cache.push_back(CacheEntry {
                            user: job.user,
                            frame: job.frame,
                            will_hit: !job.double_payload,
                        });
                    }
                }
            }
        }

        // 4. Transmission with optional SFN combining. An AP may donate
        // to one SFN transmission per slot, and only when it has nothing
        // of its own to send.
        let idle_at_start: Vec<bool> = aps.iter().map(|ap| ap.tx_queue.is_empty()).collect();
        let mut donated = vec![false; config.n_aps];
        for ap in 0..config.n_aps {
            let Some(job) = aps[ap].tx_queue.front() else {
                continue;
            };
            let u = job.user;
            let candidates: Vec<usize> = if scheme.sfn() {
                let mut c: Vec<usize> = (0..config.n_aps)
                    .filter(|&a| a != ap && idle_at_start[a] && !donated[a])
                    .collect();
                c.sort_by(|&x, &y| snr[u][y].partial_cmp(&snr[u][x]).unwrap());
                c.truncate(config.max_sfn_extra);
                c
            } else {
                Vec::new()
            };
            let outcome = sfn_rate(
                ap,
                &candidates,
                &snr[u],
                sinr_threshold,
                config.directionality,
                &link,
            );
            for &a in &outcome.aps_used {
                if a != ap {
                    donated[a] = true;
                }
            }
            let job = aps[ap].tx_queue.front_mut().unwrap();
            job.bits_left -= outcome.rate_bits_per_slot;
            if job.bits_left <= 0.0 {
                let job = aps[ap].tx_queue.pop_front().unwrap();
                if !job.lq {
                    if let Some(p) = pending
                        .iter_mut()
                        .find(|p| !p.done && p.user == job.user && p.frame == job.frame)
                    {
                        p.done = true;
                        let cm = slot - job.ready_slot + 1;
                        records.push(FrameRecord {
                            user: p.user,
                            frame: p.frame,
                            request_slot: p.request_slot,
                            hd_delivered: true,
                            cached: p.cached,
                            cp_slots: p.cp_slots,
                            cm_slots: cm,
                            delivered_slot: Some(slot),
                            total_slots: total_delay(true, p.cp_slots, cm, config.tau_ep_slots),
                        });
                    }
                }
            }
        }

        // 5. Deadline sweep: frames that cannot meet the budget downgrade
        // to LQ; the fallback bits still ride the link.
        for i in 0..pending.len() {
            if pending[i].done || slot + 1 < pending[i].request_slot + tx_deadline_budget {
                continue;
            }
            pending[i].done = true;
            let (user, frame) = (pending[i].user, pending[i].frame);
            for ap in aps.iter_mut() {
                ap.render_queue.retain(|j| !(j.user == user && j.frame == frame));
                ap.tx_queue.retain(|j| !(j.user == user && j.frame == frame && !j.lq));
            }
            let ap = serving[user];
            aps[ap].tx_queue.push_back(TxJob {
                user,
                frame,
                bits_left: config.lq_bits as f64,
                ready_slot: slot + 1,
                lq: true,
            });
            records.push(FrameRecord {
                user,
                frame,
                request_slot: pending[i].request_slot,
                hd_delivered: false,
                cached: pending[i].cached,
                cp_slots: pending[i].cp_slots,
                cm_slots: tx_deadline_budget,
                delivered_slot: None,
                total_slots: total_delay(
                    false,
                    pending[i].cp_slots,
                    tx_deadline_budget,
                    config.tau_ep_slots,
                ),
            });
        }
        pending.retain(|p| !p.done);
    }

    let cm: Vec<f64> = records.iter().map(|r| r.cm_slots as f64).collect();
    let cp: Vec<f64> = records.iter().map(|r| r.cp_slots as f64).collect();
    let delivered = records.iter().filter(|r| r.hd_delivered).count();
    let total = records.len().max(1);
    Ok(VrStats {
        players,
        scheme: scheme.label().to_string(),
        mean_cm_delay: mean(&cm),
        p99_cm_delay: if cm.is_empty() {
            0.0
        } else {
            empirical_quantile(&cm, 0.99)
        },
        mean_cp_delay: mean(&cp),
        p99_cp_delay: if cp.is_empty() {
            0.0
        } else {
            empirical_quantile(&cp, 0.99)
        },
        hd_rate: delivered as f64 / total as f64,
        miss_rate: (records.len() - delivered) as f64 / total as f64,
        frames: records,
        wasted_prerenders,
        cache_hits,
        cache_lookups,
    })
}

/// Sweep all schemes over the player grid.
pub fn run(config: &VrConfig) -> Result<Vec<VrStats>, ScenarioError> {
    let mut out = Vec::new();
    for &players in &config.players_grid {
        for scheme in [VrScheme::Baseline1, VrScheme::Baseline2, VrScheme::Proposed] {
            out.push(run_scheme(config, scheme, players)?);
        }
    }
    Ok(out)
}

pub fn csv_header() -> &'static str {
    "players,scheme,mean_cm_delay,p99_cm_delay,mean_cp_delay,p99_cp_delay,hd_rate,miss_rate"
}

pub fn to_csv(stats: &[VrStats]) -> String {
    let mut out = String::from(csv_header());
    out.push('\n');
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.players,
            s.scheme,
            s.mean_cm_delay,
            s.p99_cm_delay,
            s.mean_cp_delay,
            s.p99_cp_delay,
            s.hd_rate,
            s.miss_rate
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn computing_delay_zero_when_cached_or_unscheduled() {
        assert_eq!(
            computing_delay(1_000_000, 1000.0, 1_000_000_000, 5, true, true),
            0
        );
        assert_eq!(
            computing_delay(1_000_000, 1000.0, 1_000_000_000, 5, false, false),
            0
        );
    }

    #[test]
    fn computing_delay_exact_division() {
        // kappa L / c_e = 1000 * 1e6 / 1e9 = 1 slot, no waiting.
        assert_eq!(
            computing_delay(1_000_000, 1000.0, 1_000_000_000, 0, true, false),
            1
        );
        // Waiting adds linearly.
        assert_eq!(
            computing_delay(1_000_000, 1000.0, 1_000_000_000, 4, true, false),
            5
        );
    }

    #[test]
    fn communication_delay_cumulative() {
        // Constant rate r with r = L: one slot.
        assert_eq!(communication_delay(600, |_| 600.0, 0, 100), Some(1));
        // r = L/3: three slots.
        assert_eq!(communication_delay(600, |_| 200.0, 0, 100), Some(3));
        // Zero rate forever: the deadline path.
        assert_eq!(communication_delay(600, |_| 0.0, 0, 100), None);
        // Time-varying rates accumulate.
        let rates = [100.0, 0.0, 250.0, 250.0];
        assert_eq!(
            communication_delay(600, |t| rates[(t - 1) as usize], 0, 4),
            Some(4)
        );
    }

    #[test]
    fn total_delay_decomposition() {
        assert_eq!(total_delay(false, 7, 9, 1), 0);
        assert_eq!(total_delay(true, 2, 3, 1), 6);
        assert_eq!(total_delay(true, 0, 1, 1), 2);
    }

    fn link() -> LinkParams {
        LinkParams {
            bandwidth_hz: 1e6,
            slot_duration_s: 1e-3,
        }
    }

    #[test]
    fn sfn_single_ap_matches_single_link() {
        let out = sfn_rate(0, &[], &[9.0], 100.0, 0.0, &link());
        assert!((out.sinr - 9.0).abs() < 1e-12);
        assert_eq!(out.aps_used, vec![0]);
        assert!((out.rate_bits_per_slot - link().rate_bits_per_slot(9.0)).abs() < 1e-9);
    }

    #[test]
    fn sfn_two_equal_aps_double_sinr() {
        // Noise-limited (directionality 0): combining two equal received
        // powers doubles SINR (3 dB).
        let out = sfn_rate(0, &[1], &[4.0, 4.0], 100.0, 0.0, &link());
        assert!((out.sinr - 8.0).abs() < 1e-12);
        assert_eq!(out.aps_used, vec![0, 1]);
    }

    #[test]
    fn sfn_only_triggers_below_threshold() {
        let out = sfn_rate(0, &[1], &[10.0, 4.0], 5.0, 0.0, &link());
        assert_eq!(out.aps_used, vec![0], "above threshold stays single");

        // Blocked primary plus LoS secondary: combined beats either alone.
        let out = sfn_rate(0, &[1], &[0.2, 4.0], 5.0, 0.0, &link());
        assert_eq!(out.aps_used, vec![0, 1]);
        assert!(out.sinr >= 4.0);
    }

    #[test]
    fn proactive_render_marks_hits_at_given_accuracy() {
        let prediction = PredictionModel {
            accuracy: 0.9,
            horizon_frames: 1,
        };
        let mut rng = SimRng::new(3, 0);
        let mut hits = 0u64;
        let n = 10_000;
        for i in 0..n {
            let d = proactive_render(&prediction, &mut rng, &[(0, i)], 10);
            if d[0].will_hit {
                hits += 1;
            }
        }
        let frac = hits as f64 / n as f64;
        assert!((frac - 0.9).abs() < 0.01, "hit fraction {frac}");
    }

    #[test]
    fn proactive_render_respects_capacity() {
        let prediction = PredictionModel {
            accuracy: 1.0,
            horizon_frames: 1,
        };
        let mut rng = SimRng::new(3, 0);
        let upcoming = vec![(0, 1), (1, 1), (2, 1)];
        assert_eq!(
            proactive_render(&prediction, &mut rng, &upcoming, 2).len(),
            2
        );
        assert_eq!(
            proactive_render(&prediction, &mut rng, &upcoming, 0).len(),
            0
        );
    }

    #[test]
    fn zero_horizon_produces_empty_statistics() {
        let config = VrConfig {
            horizon: 0,
            ..VrConfig::default()
        };
        let stats = run_scheme(&config, VrScheme::Proposed, 4).unwrap();
        assert!(stats.frames.is_empty());
        assert_eq!(stats.hd_rate, 0.0);
    }

    #[test]
    fn decomposition_is_exact_for_delivered_frames() {
        let config = VrConfig {
            horizon: 4000,
            ..VrConfig::default()
        };
        for scheme in [VrScheme::Baseline1, VrScheme::Baseline2, VrScheme::Proposed] {
            let stats = run_scheme(&config, scheme, 6).unwrap();
            assert!(!stats.frames.is_empty());
            for r in stats.frames.iter().filter(|r| r.hd_delivered) {
                // Components must reassemble both the equation and the
                // realized timeline.
                assert_eq!(r.total_slots, r.cp_slots + r.cm_slots + config.tau_ep_slots);
                let delivered = r.delivered_slot.unwrap();
                assert_eq!(
                    delivered - r.request_slot + 1,
                    r.cp_slots + r.cm_slots,
                    "timeline mismatch for user {} frame {}",
                    r.user,
                    r.frame
                );
            }
            for r in stats.frames.iter().filter(|r| !r.hd_delivered) {
                assert_eq!(r.total_slots, 0);
            }
        }
    }

    #[test]
    fn perfect_prediction_caches_steady_state_frames() {
        // Light load, ample compute, no blockage: after the first frame
        // everything is served from cache with zero computing delay.
        let config = VrConfig {
            p_hit: 1.0,
            p_block: 0.0,
            horizon: 3000,
            ..VrConfig::default()
        };
        let stats = run_scheme(&config, VrScheme::Baseline2, 2).unwrap();
        for r in &stats.frames {
            if r.frame >= 1 {
                assert!(r.cached, "frame {} of user {} not cached", r.frame, r.user);
                assert_eq!(r.cp_slots, 0);
            }
        }
        assert!(stats.cache_hits > 0);
    }

    #[test]
    fn zero_accuracy_behaves_reactively_plus_waste() {
        let config = VrConfig {
            p_hit: 0.0,
            p_block: 0.0,
            horizon: 3000,
            ..VrConfig::default()
        };
        let proactive = run_scheme(&config, VrScheme::Baseline2, 2).unwrap();
        let reactive = run_scheme(&config, VrScheme::Baseline1, 2).unwrap();
        // Computing delay matches the reactive scheme (prerenders are
        // preempted, never blocking real work)...
        assert_eq!(proactive.mean_cp_delay, reactive.mean_cp_delay);
        // ...but wasted renders were burned and wrong frames doubled the
        // transmitted payload.
        assert!(proactive.wasted_prerenders > 0);
        assert!(proactive.mean_cm_delay >= reactive.mean_cm_delay);
    }

    #[test]
    fn config_validation_rejects_degenerate_sizes() {
        let config = VrConfig {
            hd_bits: 100,
            lq_bits: 100,
            ..VrConfig::default()
        };
        assert!(config.validate().is_err());
    }
}
