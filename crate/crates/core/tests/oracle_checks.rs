use mec_lyapunov::controller::{
    bandwidth_allocation, decide_slot, marginal_rate, optimal_cpu_freq, solve_sp2, DeviceSlot,
    PtsProblem,
};
use mec_lyapunov::model::remote_departure;
use mec_lyapunov::oracle::{
    certify, default_constants, grid_bw, grid_slack, grid_sp2, oracle_sp2_objective, pwr_objective,
};
use mec_lyapunov::presets;
use mec_lyapunov::simulator::run;
use mec_lyapunov::stochastic::RandomStreams;
use mec_lyapunov::{PolicyKind, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PATHLOSS: f64 = 1.975_308_641_975_3e-13;

fn device(queue: f64, h: f64) -> DeviceSlot {
    DeviceSlot {
        queue,
        gain: h * PATHLOSS,
        cycles_per_bit: 737.5,
        f_max: 1e9,
        p_max: 0.5,
    }
}

#[test]
fn marginal_rate_matches_central_difference() {
    let c = default_constants(1e9);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let alpha = 10f64.powf(rng.gen_range(-3.5..0.0));
        let p = rng.gen_range(1e-4..0.5);
        let g = PATHLOSS * rng.gen_range(0.01..8.0);
        let h = 1e-5 * alpha;
        let d = |a: f64| remote_departure(a, p, g, c.bandwidth, c.slot_len, c.noise_psd);
        let fd = (d(alpha + h) - d(alpha - h)) / (2.0 * h);
        let exact = marginal_rate(alpha, p, g, c.bandwidth, c.slot_len, c.noise_psd);
        assert!(
            ((exact - fd) / fd).abs() < 1e-4,
            "alpha={alpha} p={p} exact={exact} fd={fd}"
        );
    }
}

#[test]
fn asymmetric_bandwidth_split_matches_grid() {
    let pb = PtsProblem {
        consts: default_constants(1e9),
        devices: vec![device(1e5, 1.0), device(5e4, 1.0), device(2e4, 1.0)],
    };
    let powers = [0.3, 0.3, 0.3];
    let bw = bandwidth_allocation(&pb, &powers);
    let grid = grid_bw(&pb, &powers, 1e-3).unwrap();
    let obj = oracle_sp2_objective(&pb, &powers, &bw.fracs);
    let slack = grid_slack(&pb, &grid.fracs, Some(&powers), 1e-3);
    assert!(
        obj <= grid.objective + 1e-6 * grid.objective.abs(),
        "{obj} vs {}",
        grid.objective
    );
    assert!((obj - grid.objective).abs() <= 1e-6 * grid.objective.abs() + slack);
    // the longest queue earns the widest share
    assert!(bw.fracs[0] > bw.fracs[1] && bw.fracs[1] > bw.fracs[2]);
    let sum: f64 = bw.fracs.iter().sum();
    assert!((sum - 1.0).abs() < 1e-6);
}

#[test]
fn single_device_sp2_matches_dense_grid() {
    for (q, v) in [(2e4, 1e9), (3e5, 1e9), (1e6, 5e9), (5e3, 1e8)] {
        let pb = PtsProblem {
            consts: default_constants(v),
            devices: vec![device(q, 0.8)],
        };
        let sol = solve_sp2(&pb);
        let mut best = f64::INFINITY;
        for ia in 0..500 {
            let alpha = 1e-4 + (1.0 - 1e-4) * ia as f64 / 499.0;
            for ip in 0..500 {
                let p = 0.5 * ip as f64 / 499.0;
                best = best.min(pwr_objective(&pb, 0, alpha, p));
            }
        }
        assert!(
            sol.objective <= best + 1e-9 * best.abs(),
            "q={q} v={v}: solver {} grid {best}",
            sol.objective
        );
        assert_eq!(sol.bw_fracs, vec![1.0]);
    }
}

/// Three-device variant of the baseline setup, advanced 200 slots so that
/// the queues are non-trivial, then compared with independent closed forms
/// and the exhaustive joint oracle.
#[test]
fn simulated_slot_decision_matches_oracles() {
    let text = presets::DEFAULT
        .replace("count = 5", "count = 3")
        .replace("T_slots = 5000", "T_slots = 200");
    let sc: Scenario = mec_lyapunov::parse_config_str(&text).unwrap();
    let mut env = RandomStreams::new(1, 3);
    let summary = run(&sc, &PolicyKind::Lyapunov, &mut env).unwrap();
    let rec = summary.trace.last().unwrap();
    let pb = PtsProblem::from_scenario(&sc, &rec.queues, &rec.gains);
    let d = decide_slot(&pb);

    for i in 0..3 {
        let q = rec.queues[i];
        let f = (q * 1e-3 / (3.0 * 1e-27 * 1e9 * 737.5)).sqrt().min(1e9);
        assert!((d.freqs[i] - f).abs() <= 1e-12 * f.max(1.0));
        assert_eq!(
            d.freqs[i],
            optimal_cpu_freq(q, 1e-3, 1e-27, 1e9, 737.5, 1e9)
        );
    }
    let grid = grid_sp2(&pb, 2e-3).unwrap();
    let obj = oracle_sp2_objective(&pb, &d.tx_powers, &d.bw_fracs);
    let slack = grid_slack(&pb, &grid.fracs, None, 2e-3);
    assert!(
        (obj - grid.objective).abs() <= 1e-6 * grid.objective.abs() + slack,
        "solver {obj} grid {} slack {slack}",
        grid.objective
    );
    assert!(obj <= grid.objective + 1e-6 * grid.objective.abs());
    // the decision replayed by the simulator is the one computed here
    assert_eq!(rec.decision.tx_powers, d.tx_powers);
    assert_eq!(rec.decision.bw_fracs, d.bw_fracs);
}

#[test]
fn certification_passes() {
    let report = certify(11, 30, 1e-3, 200, 10_000).unwrap();
    assert!(report.passed(), "{report:?}");
}
