//! Slotted simulation of the task buffers under a per-slot policy.

use std::io::Write;

use crate::baselines::Policy;
use crate::controller::{PtsProblem, SlotDecision, SolverDiagnostics};
use crate::error::SimError;
use crate::model::{local_departure, local_power, Scenario};
use crate::stochastic::{draw_arrival, draw_channel_gain, Environment};

/// Relative slack allowed when checking a decision against its box constraints.
const FEASIBILITY_SLACK: f64 = 1e-12;

/// Header of the per-slot trace CSV.
pub const TRACE_HEADER: [&str; 11] = [
    "slot",
    "device",
    "queue_bits",
    "arrival_bits",
    "H_linear",
    "f_hz",
    "p_tx_w",
    "alpha",
    "D_l_bits",
    "D_r_bits",
    "P_total_w",
];

/// `max{Q - D, 0} + A`.
#[inline]
pub fn queue_update(queue: f64, departure: f64, arrival: f64) -> f64 {
    (queue - departure).max(0.0) + arrival
}

/// Telemetry for one slot. Queues are the values observed before the update.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    pub total_power: f64,
    pub queues: Vec<f64>,
    pub arrivals: Vec<f64>,
    pub gains: Vec<f64>,
    pub decision: SlotDecision,
    pub local_departures: Vec<f64>,
    pub remote_departures: Vec<f64>,
}

impl SlotRecord {
    pub fn departures(&self) -> impl Iterator<Item = f64> + '_ {
        self.local_departures
            .iter()
            .zip(&self.remote_departures)
            .map(|(l, r)| l + r)
    }

    pub fn diagnostics(&self) -> &SolverDiagnostics {
        &self.decision.diagnostics
    }
}

/// Time averages of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub policy: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub control_v: f64,
    pub num_devices: usize,
    pub horizon: usize,
    pub burn_in: usize,
    /// Average total device power (W).
    pub avg_power: f64,
    /// Average backlog per device (bits).
    pub avg_queues: Vec<f64>,
    pub sum_avg_queue: f64,
    /// `Σ λ_i` (bits/slot).
    pub total_arrival_rate: f64,
    /// Little's-law delay `Σ Q̄_i / Σ λ_i` in slots.
    pub delay_slots: f64,
    pub delay_ms: f64,
    /// Backlog `Q_i(T)` after the last slot.
    pub final_queues: Vec<f64>,
    /// Slots whose solver hit an iteration cap.
    pub unconverged_slots: usize,
    pub trace: Vec<SlotRecord>,
}

fn check_decision(scenario: &Scenario, slot: usize, d: &SlotDecision) -> Result<(), SimError> {
    let n = scenario.devices.len();
    let bad = |device: usize, reason: String| SimError::Infeasible {
        slot,
        device,
        reason,
    };
    if d.freqs.len() != n || d.tx_powers.len() != n || d.bw_fracs.len() != n {
        return Err(bad(0, "decision has the wrong number of devices".into()));
    }
    let eps_a = scenario.system.eps_a;
    for (i, dev) in scenario.devices.iter().enumerate() {
        let (f, p, a) = (d.freqs[i], d.tx_powers[i], d.bw_fracs[i]);
        if !(f.is_finite() && f >= 0.0 && f <= dev.f_max * (1.0 + FEASIBILITY_SLACK)) {
            return Err(bad(i, format!("frequency {f} outside [0, {}]", dev.f_max)));
        }
        if !(p.is_finite() && p >= 0.0 && p <= dev.p_max * (1.0 + FEASIBILITY_SLACK)) {
            return Err(bad(i, format!("power {p} outside [0, {}]", dev.p_max)));
        }
        if !(a.is_finite() && a >= eps_a * (1.0 - FEASIBILITY_SLACK)) {
            return Err(bad(i, format!("bandwidth share {a} below floor {eps_a}")));
        }
    }
    let sum: f64 = d.bw_fracs.iter().sum();
    if sum > 1.0 + FEASIBILITY_SLACK {
        return Err(SimError::BandwidthOverflow { slot, sum });
    }
    Ok(())
}

/// Runs the policy for `T` slots starting from empty buffers.
///
/// In slot `t` the policy sees `Q(t)`, which does not yet contain `A(t)`;
/// arrivals of slot `t` are added by the queue update and served from `t + 1`.
pub fn run<P, E>(scenario: &Scenario, policy: &P, env: &mut E) -> Result<RunSummary, SimError>
where
    P: Policy + ?Sized,
    E: Environment + ?Sized,
{
    scenario.validate()?;
    let sys = &scenario.system;
    let n = scenario.devices.len();
    let mut queues = vec![0.0; n];
    let mut trace = Vec::with_capacity(sys.horizon);

    let mut power_sum = 0.0;
    let mut queue_sums = vec![0.0; n];
    let mut unconverged = 0;

    for slot in 0..sys.horizon {
        let mut gains = Vec::with_capacity(n);
        let mut arrivals = Vec::with_capacity(n);
        for (i, dev) in scenario.devices.iter().enumerate() {
            gains.push(draw_channel_gain(env, i, dev, sys));
            arrivals.push(draw_arrival(env, i, dev));
        }

        let problem = PtsProblem::from_scenario(scenario, &queues, &gains);
        let decision = policy.decide(&problem);
        check_decision(scenario, slot, &decision)?;
        if !decision.diagnostics.converged {
            unconverged += 1;
        }

        let mut total_power = 0.0;
        let mut local = Vec::with_capacity(n);
        let mut remote = Vec::with_capacity(n);
        for (i, dev) in scenario.devices.iter().enumerate() {
            let f = decision.freqs[i];
            let p = decision.tx_powers[i];
            local.push(local_departure(f, sys.slot_len, dev.cycles_per_bit));
            remote.push(problem.remote(i, decision.bw_fracs[i], p));
            total_power += p + local_power(f, sys.switched_cap);
        }

        if slot >= sys.burn_in {
            power_sum += total_power;
            for (acc, q) in queue_sums.iter_mut().zip(&queues) {
                *acc += q;
            }
        }

        let record = SlotRecord {
            slot,
            total_power,
            queues: queues.clone(),
            arrivals,
            gains,
            decision,
            local_departures: local,
            remote_departures: remote,
        };
        for (i, q) in queues.iter_mut().enumerate() {
            let served = record.local_departures[i] + record.remote_departures[i];
            *q = queue_update(*q, served, record.arrivals[i]);
        }
        trace.push(record);
    }

    let counted = (sys.horizon - sys.burn_in) as f64;
    let avg_queues: Vec<f64> = queue_sums.iter().map(|s| s / counted).collect();
    let sum_avg_queue: f64 = avg_queues.iter().sum();
    let total_arrival_rate = scenario.total_mean_arrival();
    let delay_slots = sum_avg_queue / total_arrival_rate;
    Ok(RunSummary {
        policy: policy.name(),
        seed: sys.rng_seed,
        config_hash: scenario.config_hash(),
        control_v: sys.control_v,
        num_devices: n,
        horizon: sys.horizon,
        burn_in: sys.burn_in,
        avg_power: power_sum / counted,
        avg_queues,
        sum_avg_queue,
        total_arrival_rate,
        delay_slots,
        delay_ms: delay_slots * sys.slot_len * 1e3,
        final_queues: queues,
        unconverged_slots: unconverged,
        trace,
    })
}

/// Writes the per-slot, per-device trace as CSV.
pub fn write_trace<W: Write>(out: W, trace: &[SlotRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        for i in 0..r.queues.len() {
            w.write_record([
                r.slot.to_string(),
                i.to_string(),
                format!("{:e}", r.queues[i]),
                format!("{:e}", r.arrivals[i]),
                format!("{:e}", r.gains[i]),
                format!("{:e}", r.decision.freqs[i]),
                format!("{:e}", r.decision.tx_powers[i]),
                format!("{:e}", r.decision.bw_fracs[i]),
                format!("{:e}", r.local_departures[i]),
                format!("{:e}", r.remote_departures[i]),
                format!("{:e}", r.total_power),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes solver telemetry, one row per slot.
pub fn write_diagnostics<W: Write>(out: W, trace: &[SlotRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "slot",
        "gs_iterations",
        "bw_iterations",
        "lambda",
        "converged",
    ])?;
    for r in trace {
        let d = r.diagnostics();
        w.write_record([
            r.slot.to_string(),
            d.gs_iterations.to_string(),
            d.bw_iterations.to_string(),
            d.lambda.map(|l| format!("{l:e}")).unwrap_or_default(),
            d.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::PolicyKind;
    use crate::model::parse_config_str;
    use crate::stochastic::ConstantEnvironment;

    const DEFAULT_TOML: &str = include_str!("../../../configs/default.toml");

    #[test]
    fn queue_update_examples() {
        assert_eq!(queue_update(5000.0, 7000.0, 3000.0), 3000.0);
        assert_eq!(queue_update(5000.0, 2000.0, 0.0), 3000.0);
        assert_eq!(queue_update(1234.5, 0.0, 0.0), 1234.5);
    }

    #[test]
    fn idle_single_slot() {
        let sc = parse_config_str(&DEFAULT_TOML.replace("T_slots = 5000", "T_slots = 1")).unwrap();
        let mut env = ConstantEnvironment {
            arrival: 0.0,
            fading: 1.0,
        };
        let s = run(&sc, &PolicyKind::Lyapunov, &mut env).unwrap();
        assert_eq!(s.avg_power, 0.0);
        assert_eq!(s.sum_avg_queue, 0.0);
        assert_eq!(s.trace.len(), 1);
    }

    struct Broken;
    impl Policy for Broken {
        fn name(&self) -> &'static str {
            "broken"
        }
        fn decide(&self, problem: &PtsProblem) -> SlotDecision {
            let mut d = PolicyKind::LocalOnly.decide(problem);
            d.tx_powers[2] = 10.0;
            d
        }
    }

    #[test]
    fn infeasible_policy_is_reported() {
        let sc = parse_config_str(DEFAULT_TOML).unwrap();
        let mut env = ConstantEnvironment {
            arrival: 100.0,
            fading: 1.0,
        };
        match run(&sc, &Broken, &mut env) {
            Err(SimError::Infeasible { slot, device, .. }) => {
                assert_eq!((slot, device), (0, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trace_csv_layout() {
        let sc = parse_config_str(&DEFAULT_TOML.replace("T_slots = 5000", "T_slots = 3")).unwrap();
        let mut env = ConstantEnvironment {
            arrival: 1000.0,
            fading: 1.0,
        };
        let s = run(&sc, &PolicyKind::Lyapunov, &mut env).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &s.trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "slot,device,queue_bits,arrival_bits,H_linear,f_hz,p_tx_w,alpha,D_l_bits,D_r_bits,P_total_w"
        );
        assert_eq!(lines.count(), 15);
    }
}
