use mec_lyapunov::experiment::run_once;
use mec_lyapunov::model::parse_config_str;
use mec_lyapunov::presets;
use mec_lyapunov::simulator::{run, write_trace};
use mec_lyapunov::stochastic::ConstantEnvironment;
use mec_lyapunov::{PolicyKind, Scenario};

fn scenario(replacements: &[(&str, &str)]) -> Scenario {
    let mut text = presets::DEFAULT.to_string();
    for (from, to) in replacements {
        assert!(text.contains(from), "{from}");
        text = text.replace(from, to);
    }
    parse_config_str(&text).unwrap()
}

/// Scalar single-device stepper written from the closed forms alone.
fn reference_queues(v: f64, slots: usize, arrival: f64, h: f64) -> Vec<f64> {
    let (tau, kappa, l, f_max, p_max) = (1e-3, 1e-27, 737.5, 1e9, 0.5);
    let w = 1e7;
    let n0 = 10f64.powf(-17.4) * 1e-3;
    let gain = h * 1e-4 / 150f64.powi(4);
    let mut q = 0.0f64;
    let mut out = Vec::with_capacity(slots);
    for _ in 0..slots {
        out.push(q);
        let f = (q * tau / (3.0 * kappa * v * l)).sqrt().min(f_max);
        let level = q * tau / (std::f64::consts::LN_2 * v) - n0 / gain;
        let p = (w * level.max(0.0)).min(p_max);
        let local = tau * f / l;
        let remote = w * tau * (1.0 + gain * p / (n0 * w)).log2();
        q = (q - local - remote).max(0.0) + arrival;
    }
    out
}

#[test]
fn degenerate_streams_match_scalar_stepper() {
    for v in [1e8, 1e9, 5e9] {
        let sc = scenario(&[
            ("count = 5", "count = 1"),
            ("T_slots = 5000", "T_slots = 100"),
        ])
        .with_v(v);
        let mut env = ConstantEnvironment {
            arrival: 1000.0,
            fading: 1.0,
        };
        let summary = run(&sc, &PolicyKind::Lyapunov, &mut env).unwrap();
        let expected = reference_queues(v, 100, 1000.0, 1.0);
        for (rec, q) in summary.trace.iter().zip(&expected) {
            let got = rec.queues[0];
            assert!(
                (got - q).abs() <= 1e-9 * q.max(1.0),
                "V={v} slot {}: {got} vs {q}",
                rec.slot
            );
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let sc = scenario(&[("T_slots = 5000", "T_slots = 300")]);
    let a = run_once(&sc, PolicyKind::Lyapunov).unwrap();
    let b = run_once(&sc, PolicyKind::Lyapunov).unwrap();
    assert_eq!(a, b);
    let mut ta = Vec::new();
    let mut tb = Vec::new();
    write_trace(&mut ta, &a.trace).unwrap();
    write_trace(&mut tb, &b.trace).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn queues_stay_non_negative_and_power_adds_up() {
    let sc = scenario(&[("T_slots = 5000", "T_slots = 500")]).with_v(1e8);
    for policy in PolicyKind::ALL {
        let s = run_once(&sc, policy).unwrap();
        for rec in &s.trace {
            assert!(rec.queues.iter().all(|&q| q >= 0.0));
            let parts: f64 = (0..5)
                .map(|i| 1e-27 * rec.decision.freqs[i].powi(3) + rec.decision.tx_powers[i])
                .sum();
            assert!((rec.total_power - parts).abs() <= 1e-12 * parts.max(1.0));
        }
        assert!(s.final_queues.iter().all(|&q| q >= 0.0));
    }
}

#[test]
fn backlog_stays_bounded_under_control() {
    let sc = presets::default_scenario();
    let s = run_once(&sc, PolicyKind::Lyapunov).unwrap();
    let tail: Vec<f64> = s.trace[s.trace.len() - 1000..]
        .iter()
        .map(|r| r.queues.iter().sum())
        .collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let max = tail.iter().cloned().fold(0.0, f64::max);
    assert!(max < 10.0 * mean, "max {max} mean {mean}");
}

#[test]
fn local_only_backlog_grows_at_the_capacity_deficit() {
    // at small V every CPU runs flat out: 1e9 * 1e-3 / 737.5 bits per slot
    let sc = presets::default_scenario().with_v(1e6);
    let s = run_once(&sc, PolicyKind::LocalOnly).unwrap();
    let deficit = 2000.0 - 1e6 / 737.5;
    let rate = s.final_queues.iter().sum::<f64>() / (5.0 * 5000.0);
    assert!(
        ((rate - deficit) / deficit).abs() < 0.1,
        "{rate} vs {deficit}"
    );
}

#[test]
fn full_control_beats_static_equal_split() {
    let sc = scenario(&[("T_slots = 5000", "T_slots = 2000")]);
    let full = run_once(&sc, PolicyKind::Lyapunov).unwrap();
    let fixed = run_once(&sc, PolicyKind::StaticEqual).unwrap();
    let score = |s: &mec_lyapunov::RunSummary| s.sum_avg_queue + 1e9 * s.avg_power;
    assert!(
        score(&full) <= score(&fixed),
        "{} vs {}",
        score(&full),
        score(&fixed)
    );
}
