//! Hedged offloading: send the task to a primary server, duplicate it to a
//! backup only if the primary has not completed after `hedge_delay` slots,
//! and take whichever result lands first. The losing replica is cancelled
//! in the completion slot, so it never blocks later tasks.

use crate::error::SimError;
use crate::server::ServerState;
use crate::task::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HedgeWinner {
    Primary,
    Backup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HedgeOutcome {
    pub completion_slot: u64,
    pub winner: HedgeWinner,
    /// Whether the backup replica was actually fired.
    pub replicated: bool,
}

/// Pure hedging arithmetic on realized latencies (slots from dispatch).
///
/// Returns `(completion_latency, winner, replicated)`. If the primary
/// finishes within the hedge delay no replica is sent.
pub fn hedged_completion(
    primary_latency: u64,
    backup_latency: u64,
    hedge_delay: u64,
) -> (u64, HedgeWinner, bool) {
    if primary_latency <= hedge_delay {
        return (primary_latency, HedgeWinner::Primary, false);
    }
    let backup_completion = hedge_delay + backup_latency;
    if backup_completion < primary_latency {
        (backup_completion, HedgeWinner::Backup, true)
    } else {
        (primary_latency, HedgeWinner::Primary, true)
    }
}

/// Offload `task` at `now` with hedging across two servers. Only the
/// winning server's capacity is committed; the cancelled replica releases
/// its reservation in the same slot.
pub fn hedged_offload(
    task: &Task,
    primary: &mut ServerState,
    backup: &mut ServerState,
    hedge_delay: u64,
    now: u64,
) -> Result<HedgeOutcome, SimError> {
    let primary_completion = primary.completion_if_offloaded(task, now);
    let backup_completion = backup.completion_if_offloaded(task, now + hedge_delay);

    match (primary_completion, backup_completion) {
        (None, None) => Err(SimError::TaskFailed { task_id: task.id }),
        (Some(_), None) => {
            let completion = primary.commit(task.clone(), now);
            Ok(HedgeOutcome {
                completion_slot: completion,
                winner: HedgeWinner::Primary,
                replicated: false,
            })
        }
        (None, Some(_)) => {
            let completion = backup.commit(task.clone(), now + hedge_delay);
            Ok(HedgeOutcome {
                completion_slot: completion,
                winner: HedgeWinner::Backup,
                replicated: true,
            })
        }
        (Some(p), Some(_)) => {
            let primary_latency = p - now;
            let backup_latency =
                backup.completion_if_offloaded(task, now + hedge_delay).unwrap() - (now + hedge_delay);
            let (latency, winner, replicated) =
                hedged_completion(primary_latency, backup_latency, hedge_delay);
            let completion = match winner {
                HedgeWinner::Primary => primary.commit(task.clone(), now),
                HedgeWinner::Backup => backup.commit(task.clone(), now + hedge_delay),
            };
            debug_assert_eq!(completion, now + latency);
            Ok(HedgeOutcome {
                completion_slot: completion,
                winner,
                replicated,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(size_bits: u64) -> Task {
        Task {
            id: 7,
            size_bits,
            density: 1.0,
            arrival_slot: 0,
        }
    }

    #[test]
    fn identical_replicas_with_zero_delay() {
        // Both servers deterministic latency L, hedge_delay = 0.
        let mut primary = ServerState::new(100);
        let mut backup = ServerState::new(100);
        let out = hedged_offload(&task(300), &mut primary, &mut backup, 0, 10).unwrap();
        assert_eq!(out.completion_slot, 13);
    }

    #[test]
    fn backup_wins_when_primary_is_slow() {
        // Primary latency 10, backup latency 2, hedge_delay 3 -> t0 + 5.
        let mut primary = ServerState::new(100);
        primary.busy_until = 8; // 8 + 2 service slots = latency 10 from t0=0
        let mut backup = ServerState::new(100);
        let out = hedged_offload(&task(200), &mut primary, &mut backup, 3, 0).unwrap();
        assert_eq!(out.completion_slot, 5);
        assert_eq!(out.winner, HedgeWinner::Backup);
        assert!(out.replicated);
        // Cancelled primary replica never held capacity.
        assert_eq!(primary.busy_until, 8);
    }

    #[test]
    fn fast_primary_never_replicates() {
        let mut primary = ServerState::new(100);
        let mut backup = ServerState::new(100);
        let out = hedged_offload(&task(100), &mut primary, &mut backup, 3, 0).unwrap();
        assert_eq!(out.completion_slot, 1);
        assert!(!out.replicated);
        assert_eq!(backup.busy_until, 0);
    }

    #[test]
    fn both_unreachable_is_task_failure() {
        let mut primary = ServerState::new(0);
        let mut backup = ServerState::new(0);
        let err = hedged_offload(&task(100), &mut primary, &mut backup, 3, 0).unwrap_err();
        assert!(matches!(err, SimError::TaskFailed { task_id: 7 }));
    }

    #[test]
    fn single_reachable_server_still_serves() {
        let mut primary = ServerState::new(0);
        let mut backup = ServerState::new(100);
        let out = hedged_offload(&task(100), &mut primary, &mut backup, 3, 0).unwrap();
        assert_eq!(out.winner, HedgeWinner::Backup);
        assert_eq!(out.completion_slot, 4);
    }

    #[test]
    fn mean_completion_matches_two_branch_expectation() {
        // Primary latency {1 w.p. 0.9, 100 w.p. 0.1}, hedge_delay 2, backup
        // latency 2. Closed form: 0.9 * 1 + 0.1 * (2 + 2) = 1.3.
        use crate::rng::SimRng;
        let mut rng = SimRng::new(5, 0);
        let trials = 100_000;
        let mut total = 0u64;
        for _ in 0..trials {
            let primary_latency = if rng.bernoulli(0.9) { 1 } else { 100 };
            let (latency, _, _) = hedged_completion(primary_latency, 2, 2);
            total += latency;
        }
        let mean = total as f64 / trials as f64;
        assert!(
            (mean - 1.3).abs() < 0.05,
            "mean completion {mean} outside 1.3 +/- 0.05"
        );
    }
}
