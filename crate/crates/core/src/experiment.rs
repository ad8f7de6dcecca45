//! Monte-Carlo sweeps over V, seeds and policies, and their CSV output.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::baselines::PolicyKind;
use crate::error::SimError;
use crate::model::Scenario;
use crate::simulator::{run, RunSummary};
use crate::stochastic::RandomStreams;

pub const SUMMARY_HEADER: [&str; 14] = [
    "policy",
    "V_bits2_per_W",
    "seed",
    "config_hash",
    "N",
    "T_slots",
    "avg_power_w",
    "sum_avg_queue_bits",
    "avg_queue_per_device_bits",
    "delay_slots",
    "delay_ms",
    "max_final_queue_bits",
    "unconverged_slots",
    "status",
];

/// One (policy, V, seed) run reduced to its headline numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub policy: PolicyKind,
    pub control_v: f64,
    pub seed: u64,
    pub config_hash: String,
    pub num_devices: usize,
    pub horizon: usize,
    pub avg_power: f64,
    pub sum_avg_queue: f64,
    pub delay_slots: f64,
    pub delay_ms: f64,
    /// `Q_i(T)` per device.
    pub final_queues: Vec<f64>,
    pub unconverged_slots: usize,
    /// `None` on success, otherwise the failure message.
    pub error: Option<String>,
}

impl SweepRow {
    pub fn from_summary(policy: PolicyKind, s: &RunSummary) -> Self {
        SweepRow {
            policy,
            control_v: s.control_v,
            seed: s.seed,
            config_hash: s.config_hash.clone(),
            num_devices: s.num_devices,
            horizon: s.horizon,
            avg_power: s.avg_power,
            sum_avg_queue: s.sum_avg_queue,
            delay_slots: s.delay_slots,
            delay_ms: s.delay_ms,
            final_queues: s.final_queues.clone(),
            unconverged_slots: s.unconverged_slots,
            error: None,
        }
    }

    fn failed(policy: PolicyKind, scenario: &Scenario, err: &SimError) -> Self {
        SweepRow {
            policy,
            control_v: scenario.system.control_v,
            seed: scenario.system.rng_seed,
            config_hash: scenario.config_hash(),
            num_devices: scenario.devices.len(),
            horizon: scenario.system.horizon,
            avg_power: f64::NAN,
            sum_avg_queue: f64::NAN,
            delay_slots: f64::NAN,
            delay_ms: f64::NAN,
            final_queues: Vec::new(),
            unconverged_slots: 0,
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    fn record(&self) -> [String; 14] {
        let max_final = self.final_queues.iter().cloned().fold(f64::NAN, f64::max);
        [
            self.policy.to_string(),
            format!("{:e}", self.control_v),
            self.seed.to_string(),
            self.config_hash.clone(),
            self.num_devices.to_string(),
            self.horizon.to_string(),
            format!("{:e}", self.avg_power),
            format!("{:e}", self.sum_avg_queue),
            format!("{:e}", self.sum_avg_queue / self.num_devices as f64),
            format!("{:e}", self.delay_slots),
            format!("{:e}", self.delay_ms),
            format!("{:e}", max_final),
            self.unconverged_slots.to_string(),
            self.error.clone().unwrap_or_else(|| "ok".into()),
        ]
    }
}

/// Runs one policy on one scenario with streams derived from its seed.
pub fn run_once(scenario: &Scenario, policy: PolicyKind) -> Result<RunSummary, SimError> {
    let mut env = RandomStreams::new(scenario.system.rng_seed, scenario.devices.len());
    run(scenario, &policy, &mut env)
}

/// Runs every (policy, V, seed) combination in parallel. Rows come back
/// ordered by policy, then V, then seed. Failed runs are kept as flagged rows.
pub fn sweep(
    scenario: &Scenario,
    policies: &[PolicyKind],
    v_list: &[f64],
    seeds: &[u64],
) -> Vec<SweepRow> {
    let mut points = Vec::with_capacity(policies.len() * v_list.len() * seeds.len());
    for &policy in policies {
        for &v in v_list {
            for &seed in seeds {
                points.push((policy, scenario.with_v(v).with_seed(seed)));
            }
        }
    }
    points.sort_by(|a, b| {
        (a.0, a.1.system.control_v, a.1.system.rng_seed)
            .partial_cmp(&(b.0, b.1.system.control_v, b.1.system.rng_seed))
            .expect("V values are finite")
    });
    points
        .par_iter()
        .map(|(policy, sc)| match run_once(sc, *policy) {
            Ok(s) => SweepRow::from_summary(*policy, &s),
            Err(e) => SweepRow::failed(*policy, sc, &e),
        })
        .collect()
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|k| {
                    if k == 0 {
                        lo
                    } else if k == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * k as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Seed-averaged results for one (policy, V).
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedRow {
    pub policy: PolicyKind,
    pub control_v: f64,
    pub seeds: usize,
    pub avg_power: f64,
    pub sum_avg_queue: f64,
    pub delay_ms: f64,
}

/// Averages successful rows over seeds, ordered by policy then V.
pub fn average_over_seeds(rows: &[SweepRow]) -> Vec<AveragedRow> {
    let mut groups: BTreeMap<(PolicyKind, u64), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        groups
            .entry((r.policy, r.control_v.to_bits()))
            .or_default()
            .push(r);
    }
    let mut out: Vec<AveragedRow> = groups
        .into_values()
        .map(|g| {
            let k = g.len() as f64;
            AveragedRow {
                policy: g[0].policy,
                control_v: g[0].control_v,
                seeds: g.len(),
                avg_power: g.iter().map(|r| r.avg_power).sum::<f64>() / k,
                sum_avg_queue: g.iter().map(|r| r.sum_avg_queue).sum::<f64>() / k,
                delay_ms: g.iter().map(|r| r.delay_ms).sum::<f64>() / k,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.policy, a.control_v)
            .partial_cmp(&(b.policy, b.control_v))
            .expect("finite V")
    });
    out
}

pub fn write_rows<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_averaged<W: Write>(out: W, rows: &[AveragedRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "policy",
        "V_bits2_per_W",
        "seeds",
        "avg_power_w",
        "sum_avg_queue_bits",
        "delay_ms",
    ])?;
    for r in rows {
        w.write_record([
            r.policy.to_string(),
            format!("{:e}", r.control_v),
            r.seeds.to_string(),
            format!("{:e}", r.avg_power),
            format!("{:e}", r.sum_avg_queue),
            format!("{:e}", r.delay_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Gnuplot script plotting power and backlog against V, and power against
/// delay, from the seed-averaged CSV `data_file`.
pub fn gnuplot_script(data_file: &str, policies: &[PolicyKind]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 1200,400\nset output 'sweep.png'\n");
    s.push_str("set multiplot layout 1,3\n");
    let plot = |x: usize, y: usize, extra: &str| {
        let series: Vec<String> = policies
            .iter()
            .map(|p| {
                format!(
                    "'{data_file}' using (strcol(1) eq '{p}' ? ${x} : 1/0):{y} with linespoints title '{p}'"
                )
            })
            .collect();
        format!("{extra}plot {}\n", series.join(", "))
    };
    s.push_str(&plot(
        2,
        4,
        "set logscale x\nset xlabel 'V'\nset ylabel 'power (W)'\n",
    ));
    s.push_str(&plot(2, 5, "set ylabel 'sum of average queues (bits)'\n"));
    s.push_str(&plot(
        6,
        4,
        "unset logscale x\nset xlabel 'delay (ms)'\nset ylabel 'power (W)'\n",
    ));
    s.push_str("unset multiplot\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_endpoints() {
        let v = log_space(1e6, 5e9, 20);
        assert_eq!(v.len(), 20);
        assert_eq!(v[0], 1e6);
        assert_eq!(v[19], 5e9);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        let ratio = v[1] / v[0];
        assert!((v[10] / v[9] - ratio).abs() < 1e-9);
    }
}
