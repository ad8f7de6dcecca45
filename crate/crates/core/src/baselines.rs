//! Reference policies for comparison against the full controller.

use std::fmt;
use std::str::FromStr;

use crate::controller::{
    decide_slot, optimal_cpu_freqs, optimal_tx_powers, PtsProblem, SlotDecision, SolverDiagnostics,
};
use crate::error::ConfigError;

/// Anything that maps an observed slot to a decision.
pub trait Policy: Sync {
    fn name(&self) -> &'static str;
    fn decide(&self, problem: &PtsProblem) -> SlotDecision;
}

/// No offloading: zero transmit power, equal nominal bandwidth split, and the
/// same V-dependent CPU frequency as the full controller.
pub fn local_only_policy(problem: &PtsProblem) -> SlotDecision {
    let n = problem.len();
    SlotDecision {
        freqs: optimal_cpu_freqs(problem),
        tx_powers: vec![0.0; n],
        bw_fracs: vec![1.0 / n as f64; n],
        diagnostics: SolverDiagnostics {
            converged: true,
            ..Default::default()
        },
    }
}

/// Fixed equal bandwidth split with closed-form powers and frequencies.
pub fn static_equal_policy(problem: &PtsProblem) -> SlotDecision {
    let n = problem.len();
    let fracs = vec![1.0 / n as f64; n];
    SlotDecision {
        freqs: optimal_cpu_freqs(problem),
        tx_powers: optimal_tx_powers(problem, &fracs),
        bw_fracs: fracs,
        diagnostics: SolverDiagnostics {
            converged: true,
            ..Default::default()
        },
    }
}

/// Policies selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Lyapunov,
    LocalOnly,
    StaticEqual,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::Lyapunov,
        PolicyKind::LocalOnly,
        PolicyKind::StaticEqual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Lyapunov => "lyapunov",
            PolicyKind::LocalOnly => "local_only",
            PolicyKind::StaticEqual => "static_equal",
        }
    }
}

impl Policy for PolicyKind {
    fn name(&self) -> &'static str {
        self.as_str()
    }

    fn decide(&self, problem: &PtsProblem) -> SlotDecision {
        match self {
            PolicyKind::Lyapunov => decide_slot(problem),
            PolicyKind::LocalOnly => local_only_policy(problem),
            PolicyKind::StaticEqual => static_equal_policy(problem),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| ConfigError::UnknownPolicy {
                name: s.to_string(),
                valid: PolicyKind::ALL.map(PolicyKind::as_str).join(", "),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{pts_objective, DeviceSlot, SlotConstants};

    const H: f64 = 1.975e-13;

    fn problem(queues: &[f64], gains: &[f64]) -> PtsProblem {
        PtsProblem {
            consts: SlotConstants {
                slot_len: 1e-3,
                bandwidth: 1e7,
                noise_psd: 3.981e-21,
                switched_cap: 1e-27,
                control_v: 1e9,
                eps_a: 1e-4,
            },
            devices: queues
                .iter()
                .zip(gains)
                .map(|(&queue, &gain)| DeviceSlot {
                    queue,
                    gain,
                    cycles_per_bit: 737.5,
                    f_max: 1e9,
                    p_max: 0.5,
                })
                .collect(),
        }
    }

    #[test]
    fn local_only_never_transmits() {
        let pb = problem(&[1e6, 3e4, 0.0], &[H, 3.0 * H, H]);
        let d = local_only_policy(&pb);
        assert_eq!(d.tx_powers.iter().sum::<f64>(), 0.0);
        assert_eq!(d.freqs, optimal_cpu_freqs(&pb));
        let mut huge_v = pb.clone();
        huge_v.consts.control_v = 1e30;
        assert!(local_only_policy(&huge_v).freqs.iter().all(|&f| f < 1e3));
    }

    #[test]
    fn static_equal_matches_full_policy_when_symmetric() {
        let pb = problem(&[2e5; 4], &[H; 4]);
        let a = static_equal_policy(&pb);
        let b = decide_slot(&pb);
        for i in 0..4 {
            assert!((a.bw_fracs[i] - b.bw_fracs[i]).abs() < 1e-7);
            assert!((a.tx_powers[i] - b.tx_powers[i]).abs() < 1e-6 * a.tx_powers[i]);
        }
        let single = problem(&[2e5], &[H]);
        assert_eq!(
            static_equal_policy(&single).bw_fracs,
            decide_slot(&single).bw_fracs
        );
        assert_eq!(
            static_equal_policy(&single).tx_powers,
            decide_slot(&single).tx_powers
        );
    }

    #[test]
    fn full_policy_dominates_baselines() {
        let pb = problem(&[4e5, 1e5, 2e4], &[H * 0.5, H * 2.0, H]);
        let full = pts_objective(&pb, &decide_slot(&pb));
        assert!(full <= pts_objective(&pb, &static_equal_policy(&pb)));
        assert!(full <= pts_objective(&pb, &local_only_policy(&pb)));
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.as_str().parse::<PolicyKind>().unwrap(), p);
        }
        let err = "greedy".parse::<PolicyKind>().unwrap_err();
        assert!(err
            .to_string()
            .contains("lyapunov, local_only, static_equal"));
    }
}
