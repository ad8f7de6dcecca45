use mec_lyapunov::presets;
use mec_lyapunov::stochastic::{draw_arrival, draw_channel_gain, Environment, RandomStreams};

const N: usize = 100_000;
/// Two-sided Kolmogorov-Smirnov critical value at α = 0.01.
const KS_CRITICAL: f64 = 1.628;

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    d
}

#[test]
fn arrivals_are_uniform() {
    let sc = presets::default_scenario();
    let dev = &sc.devices[0];
    let mut env = RandomStreams::new(3, 1);
    let xs: Vec<f64> = (0..N).map(|_| draw_arrival(&mut env, 0, dev)).collect();
    assert!(xs.iter().all(|&a| (0.0..=4000.0).contains(&a)));
    let d = ks_statistic(xs, |x| x / 4000.0);
    assert!(d < KS_CRITICAL / (N as f64).sqrt(), "D = {d}");
}

#[test]
fn fading_is_exponential() {
    let sc = presets::default_scenario();
    let dev = &sc.devices[2];
    let mut env = RandomStreams::new(3, 3);
    let xs: Vec<f64> = (0..N).map(|_| env.fading(2, dev)).collect();
    assert!(xs.iter().all(|&h| h > 0.0));
    let d = ks_statistic(xs, |x| 1.0 - (-x).exp());
    assert!(d < KS_CRITICAL / (N as f64).sqrt(), "D = {d}");
}

#[test]
fn channel_gain_carries_pathloss() {
    let sc = presets::default_scenario();
    let mut env = RandomStreams::new(9, 5);
    let n = 200_000;
    let mean = (0..n)
        .map(|_| draw_channel_gain(&mut env, 4, &sc.devices[4], &sc.system))
        .sum::<f64>()
        / n as f64;
    let expected = 1e-4 / 150f64.powi(4);
    assert!(
        ((mean - expected) / expected).abs() < 0.01,
        "{mean} vs {expected}"
    );
}

#[test]
fn device_streams_are_independent_of_device_count() {
    let sc = presets::default_scenario();
    let dev = &sc.devices[0];
    let mut small = RandomStreams::new(5, 2);
    let mut large = RandomStreams::new(5, 8);
    for _ in 0..100 {
        assert_eq!(small.arrival(1, dev), large.arrival(1, dev));
        assert_eq!(small.fading(1, dev), large.fading(1, dev));
    }
}
