//! Wireless link state and a two-state (LoS/NLoS) blockage process.
//!
//! Blockage is a Markov chain: the NLoS sojourn is geometric with a
//! configured mean, and the entry probability is chosen so the stationary
//! NLoS fraction equals the requested blockage probability. NLoS applies a
//! fixed SINR penalty (default 20 dB).

use crate::error::SimError;
use crate::rng::SimRng;

pub const DEFAULT_NLOS_PENALTY_DB: f64 = 20.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Bandwidth and slot length that turn an SINR into bits per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub bandwidth_hz: f64,
    pub slot_duration_s: f64,
}

impl LinkParams {
    /// Shannon rate in bits per slot.
    pub fn rate_bits_per_slot(&self, sinr: f64) -> f64 {
        self.bandwidth_hz * self.slot_duration_s * (1.0 + sinr).log2()
    }
}

/// Instantaneous link state; `rate` is recomputed whenever the SINR changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    pub link_gain: f64,
    pub los: bool,
    sinr: f64,
    rate_bits_per_slot: f64,
}

impl ChannelState {
    pub fn new(link_gain: f64, sinr: f64, link: &LinkParams) -> Self {
        let mut state = Self {
            link_gain,
            los: true,
            sinr: 0.0,
            rate_bits_per_slot: 0.0,
        };
        state.update_sinr(sinr, link);
        state
    }

    pub fn sinr(&self) -> f64 {
        self.sinr
    }

    pub fn rate_bits_per_slot(&self) -> f64 {
        self.rate_bits_per_slot
    }

    /// Set a new SINR (clamped to be nonnegative) and recompute the rate.
    pub fn update_sinr(&mut self, sinr: f64, link: &LinkParams) {
        self.sinr = sinr.max(0.0);
        self.rate_bits_per_slot = link.rate_bits_per_slot(self.sinr);
    }
}

/// Two-state LoS/NLoS Markov chain.
#[derive(Debug, Clone)]
pub struct BlockageProcess {
    p_enter_nlos: f64,
    p_exit_nlos: f64,
    los: bool,
}

impl BlockageProcess {
    /// `p_block` is the stationary NLoS fraction; `mean_duration_slots` the
    /// mean geometric NLoS sojourn.
    pub fn new(p_block: f64, mean_duration_slots: f64) -> Result<Self, SimError> {
        if !(0.0..=1.0).contains(&p_block) {
            return Err(SimError::InvalidProbability(p_block));
        }
        if !(mean_duration_slots >= 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "blockage mean_duration_slots must be >= 1, got {mean_duration_slots}"
            )));
        }
        if p_block >= 1.0 {
            return Ok(Self {
                p_enter_nlos: 1.0,
                p_exit_nlos: 0.0,
                los: false,
            });
        }
        // Stationary NLoS fraction a/(a+b) = p_block with exit b = 1/mean.
        let p_exit = 1.0 / mean_duration_slots;
        let p_enter = p_block * p_exit / (1.0 - p_block);
        if p_enter > 1.0 {
            return Err(SimError::InvalidConfig(format!(
                "blockage fraction {p_block} unreachable with mean sojourn {mean_duration_slots}"
            )));
        }
        Ok(Self {
            p_enter_nlos: p_enter,
            p_exit_nlos: p_exit,
            los: true,
        })
    }

    pub fn is_los(&self) -> bool {
        self.los
    }

    /// Advance one slot; returns the new LoS flag.
    pub fn step(&mut self, rng: &mut SimRng) -> bool {
        if self.los {
            if rng.bernoulli(self.p_enter_nlos) {
                self.los = false;
            }
        } else if rng.bernoulli(self.p_exit_nlos) {
            self.los = true;
        }
        self.los
    }

    /// SINR after applying the NLoS penalty when blocked.
    pub fn apply_penalty(&self, sinr: f64, penalty_db: f64) -> f64 {
        if self.los {
            sinr
        } else {
            sinr / db_to_linear(penalty_db)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link() -> LinkParams {
        LinkParams {
            bandwidth_hz: 1e7,
            slot_duration_s: 1e-3,
        }
    }

    #[test]
    fn rate_formula() {
        let ch = ChannelState::new(1.0, 3.0, &link());
        // 1e7 * 1e-3 * log2(4) = 2e4
        assert!((ch.rate_bits_per_slot() - 2e4).abs() < 1e-9);
    }

    #[test]
    fn negative_sinr_clamps_to_zero_rate() {
        let mut ch = ChannelState::new(1.0, 1.0, &link());
        ch.update_sinr(-0.5, &link());
        assert_eq!(ch.sinr(), 0.0);
        assert_eq!(ch.rate_bits_per_slot(), 0.0);
    }

    #[test]
    fn no_blockage_stays_los() {
        let mut bp = BlockageProcess::new(0.0, 5.0).unwrap();
        let mut rng = SimRng::new(3, 0);
        for _ in 0..10_000 {
            assert!(bp.step(&mut rng));
        }
    }

    #[test]
    fn full_blockage_stays_nlos() {
        let mut bp = BlockageProcess::new(1.0, 5.0).unwrap();
        let mut rng = SimRng::new(3, 0);
        for _ in 0..10_000 {
            assert!(!bp.step(&mut rng));
        }
    }

    #[test]
    fn stationary_fraction_matches_p_block() {
        // Empirical stationary distribution of the two-state chain.
        let mut bp = BlockageProcess::new(0.2, 5.0).unwrap();
        let mut rng = SimRng::new(11, 0);
        let n = 1_000_000;
        let mut nlos = 0u64;
        for _ in 0..n {
            if !bp.step(&mut rng) {
                nlos += 1;
            }
        }
        let frac = nlos as f64 / n as f64;
        assert!(
            (frac - 0.2).abs() < 0.01,
            "NLoS fraction {frac} outside 0.2 +/- 0.01"
        );
    }

    #[test]
    fn nlos_sojourn_mean_is_geometric() {
        let mut bp = BlockageProcess::new(0.2, 5.0).unwrap();
        let mut rng = SimRng::new(12, 0);
        let mut sojourns = Vec::new();
        let mut current = 0u64;
        for _ in 0..2_000_000 {
            let los = bp.step(&mut rng);
            if !los {
                current += 1;
            } else if current > 0 {
                sojourns.push(current);
                current = 0;
            }
        }
        let mean = sojourns.iter().sum::<u64>() as f64 / sojourns.len() as f64;
        assert!(
            (mean - 5.0).abs() < 0.2,
            "NLoS sojourn mean {mean} not ~5"
        );
    }

    #[test]
    fn penalty_applies_only_when_blocked() {
        let mut bp = BlockageProcess::new(1.0, 5.0).unwrap();
        let mut rng = SimRng::new(1, 0);
        bp.step(&mut rng);
        let sinr = bp.apply_penalty(100.0, 20.0);
        assert!((sinr - 1.0).abs() < 1e-12);

        let bp_los = BlockageProcess::new(0.0, 5.0).unwrap();
        assert_eq!(bp_los.apply_penalty(100.0, 20.0), 100.0);
    }

    #[test]
    fn unreachable_blockage_fraction_rejected() {
        // p=0.9 with mean 5 would need an entry probability > 1.
        assert!(BlockageProcess::new(0.9, 5.0).is_err());
    }
}
