//! Brute-force reference solvers for certifying the controller on small
//! instances. Not used by the simulator.
//!
//! The grids only share the model functions (departures and power) with the
//! controller. Objectives are summed here independently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::controller::{
    bandwidth_allocation, marginal_rate, optimal_cpu_freq, optimal_tx_power, solve_sp2, DeviceSlot,
    PtsProblem, SlotConstants,
};
use crate::error::OracleError;
use crate::model::{local_departure, local_power, remote_departure};

/// Minimum accepted size of the SP1 grid.
pub const MIN_SP1_POINTS: usize = 1000;
/// Largest instance the simplex enumeration accepts.
pub const MAX_GRID_DEVICES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub freq: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSp2 {
    pub powers: Vec<f64>,
    pub fracs: Vec<f64>,
    pub objective: f64,
}

/// CPU-frequency objective `-Q τ f / L + V κ f³` of device `i`.
pub fn sp1_objective(problem: &PtsProblem, i: usize, f: f64) -> f64 {
    let c = &problem.consts;
    let d = &problem.devices[i];
    -d.queue * local_departure(f, c.slot_len, d.cycles_per_bit)
        + c.control_v * local_power(f, c.switched_cap)
}

/// Transmit-power objective `-Q D_r + V p` of device `i` at fixed `alpha`.
pub fn pwr_objective(problem: &PtsProblem, i: usize, alpha: f64, p: f64) -> f64 {
    let c = &problem.consts;
    let d = &problem.devices[i];
    -d.queue * remote_departure(alpha, p, d.gain, c.bandwidth, c.slot_len, c.noise_psd)
        + c.control_v * p
}

/// `-Σ Q_i D_r,i + V Σ p_i`, accumulated from the last device to the first.
pub fn oracle_sp2_objective(problem: &PtsProblem, powers: &[f64], fracs: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in (0..problem.len()).rev() {
        total += pwr_objective(problem, i, fracs[i], powers[i]);
    }
    total
}

/// Exhaustive minimum of the CPU-frequency objective on a uniform grid over
/// `[0, f_max]`.
pub fn grid_sp1(problem: &PtsProblem, i: usize, points: usize) -> Result<GridPoint, OracleError> {
    if points < MIN_SP1_POINTS {
        return Err(OracleError::BadGrid(format!(
            "{points} points, need at least {MIN_SP1_POINTS}"
        )));
    }
    let f_max = problem.devices[i].f_max;
    let mut best = GridPoint {
        freq: 0.0,
        objective: sp1_objective(problem, i, 0.0),
    };
    for k in 1..points {
        let f = f_max * k as f64 / (points - 1) as f64;
        let obj = sp1_objective(problem, i, f);
        if obj < best.objective {
            best = GridPoint {
                freq: f,
                objective: obj,
            };
        }
    }
    Ok(best)
}

/// Exhaustive minimum of the transmit-power objective on a uniform grid over
/// `[0, p_max]`; returns `(p, objective)`.
pub fn grid_pwr(problem: &PtsProblem, i: usize, alpha: f64, points: usize) -> (f64, f64) {
    let p_max = problem.devices[i].p_max;
    (0..points)
        .map(|k| p_max * k as f64 / (points - 1) as f64)
        .map(|p| (p, pwr_objective(problem, i, alpha, p)))
        .fold((0.0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
}

/// Visits every `α` on the face `Σα = 1` of the floor-constrained simplex
/// whose first `n - 1` coordinates lie on the lattice `ε_A + k·step`.
///
/// For fixed powers every `D_r,i` is non-decreasing in `α_i`, so both
/// bandwidth oracles attain their minimum on this face.
fn for_each_face_point(n: usize, eps_a: f64, step: f64, mut visit: impl FnMut(&[f64])) {
    let mut alpha = vec![eps_a; n];
    fn rec(
        k: usize,
        alpha: &mut Vec<f64>,
        used: f64,
        eps_a: f64,
        step: f64,
        visit: &mut dyn FnMut(&[f64]),
    ) {
        let n = alpha.len();
        if k == n - 1 {
            let last = 1.0 - used;
            if last >= eps_a - 1e-15 {
                alpha[k] = last.max(eps_a);
                visit(alpha);
            }
            return;
        }
        let remaining_floor = eps_a * (n - 1 - k) as f64;
        let mut j = 0usize;
        loop {
            let a = eps_a + j as f64 * step;
            if used + a + remaining_floor > 1.0 + 1e-15 {
                break;
            }
            alpha[k] = a;
            rec(k + 1, alpha, used + a, eps_a, step, visit);
            j += 1;
        }
    }
    rec(0, &mut alpha, 0.0, eps_a, step, &mut visit);
}

fn check_grid(problem: &PtsProblem, step: f64) -> Result<(), OracleError> {
    if problem.len() > MAX_GRID_DEVICES {
        return Err(OracleError::TooManyDevices(problem.len()));
    }
    if !(step > 0.0 && step <= 1e-2) {
        return Err(OracleError::BadGrid(format!(
            "alpha step {step} not in (0, 0.01]"
        )));
    }
    Ok(())
}

/// Grid minimum of the joint power/bandwidth problem. The bandwidth is
/// gridded; for each grid point the power of every device is its exact
/// closed-form optimum, which is separable given α.
pub fn grid_sp2(problem: &PtsProblem, step: f64) -> Result<GridSp2, OracleError> {
    check_grid(problem, step)?;
    let n = problem.len();
    let c = problem.consts;
    let mut best = GridSp2 {
        powers: vec![0.0; n],
        fracs: vec![1.0 / n as f64; n],
        objective: f64::INFINITY,
    };
    let mut powers = vec![0.0; n];
    for_each_face_point(n, c.eps_a, step, |alpha| {
        for (i, (p, d)) in powers.iter_mut().zip(&problem.devices).enumerate() {
            *p = optimal_tx_power(
                d.queue,
                d.gain,
                alpha[i],
                c.control_v,
                c.bandwidth,
                c.slot_len,
                c.noise_psd,
                d.p_max,
            );
        }
        let obj = oracle_sp2_objective(problem, &powers, alpha);
        if obj < best.objective {
            best.objective = obj;
            best.powers.copy_from_slice(&powers);
            best.fracs.copy_from_slice(alpha);
        }
    });
    Ok(best)
}

/// Grid minimum over bandwidth shares with the powers held fixed.
pub fn grid_bw(problem: &PtsProblem, powers: &[f64], step: f64) -> Result<GridSp2, OracleError> {
    check_grid(problem, step)?;
    let n = problem.len();
    let mut best = GridSp2 {
        powers: powers.to_vec(),
        fracs: vec![1.0 / n as f64; n],
        objective: f64::INFINITY,
    };
    for_each_face_point(n, problem.consts.eps_a, step, |alpha| {
        let obj = oracle_sp2_objective(problem, powers, alpha);
        if obj < best.objective {
            best.objective = obj;
            best.fracs.copy_from_slice(alpha);
        }
    });
    Ok(best)
}

/// Bound on how much worse the best lattice point can be than the true
/// optimum near `fracs`.
///
/// The nearest lattice point moves each coordinate by at most `n·step`; the
/// objective's slope in `α_i` is bounded by `Q_i dD_r/dα` at the smallest
/// share in that neighbourhood and the largest power the device may use. The
/// slope is estimated with a forward difference of the departure function.
pub fn grid_slack(problem: &PtsProblem, fracs: &[f64], powers: Option<&[f64]>, step: f64) -> f64 {
    let n = problem.len();
    let reach = n as f64 * step;
    let c = &problem.consts;
    (0..n)
        .map(|i| {
            let d = &problem.devices[i];
            let p = powers.map_or(d.p_max, |ps| ps[i]);
            let a = (fracs[i] - reach).max(c.eps_a);
            let h = 1e-7 * a;
            let dr = |x: f64| remote_departure(x, p, d.gain, c.bandwidth, c.slot_len, c.noise_psd);
            let slope = (dr(a + h) - dr(a)) / h;
            d.queue * slope * reach
        })
        .sum()
}

/// Outcome of a randomized certification run.
#[derive(Debug, Clone, Default)]
pub struct CertificationReport {
    pub sp2_instances: usize,
    pub sp2_failures: usize,
    /// Largest `(solver - grid) / |grid|`; negative means the solver won.
    pub sp2_worst_excess: f64,
    pub kkt_failures: usize,
    pub max_kkt_residual: f64,
    pub max_slackness: f64,
    pub sp1_instances: usize,
    pub sp1_failures: usize,
    pub pwr_instances: usize,
    pub pwr_failures: usize,
}

impl CertificationReport {
    pub fn passed(&self) -> bool {
        self.sp2_failures == 0
            && self.kkt_failures == 0
            && self.sp1_failures == 0
            && self.pwr_failures == 0
    }
}

/// Default physical constants for random instances (1 ms slots, 10 MHz,
/// -174 dBm/Hz, κ = 1e-27).
pub fn default_constants(control_v: f64) -> SlotConstants {
    SlotConstants {
        slot_len: 1e-3,
        bandwidth: 1e7,
        noise_psd: crate::model::dbm_to_w(-174.0),
        switched_cap: 1e-27,
        control_v,
        eps_a: 1e-4,
    }
}

fn unit_exponential<R: Rng>(rng: &mut R) -> f64 {
    -(1.0 - rng.gen::<f64>()).ln()
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// A random power/bandwidth instance with `n` devices at 150 m, exponential
/// fading, and at least one device willing to transmit.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize) -> PtsProblem {
    let pathloss = 1e-4 / 150f64.powi(4);
    loop {
        let v = log_uniform(rng, 1e7, 1e10);
        let devices: Vec<DeviceSlot> = (0..n)
            .map(|_| {
                let h = unit_exponential(rng);
                DeviceSlot {
                    queue: log_uniform(rng, 1e3, 1e6),
                    gain: h.max(1e-3) * pathloss,
                    cycles_per_bit: 737.5,
                    f_max: 1e9,
                    p_max: 0.5,
                }
            })
            .collect();
        let pb = PtsProblem {
            consts: default_constants(v),
            devices,
        };
        if (0..n).any(|i| pb.tx_power(i, 1.0) > 0.0) {
            return pb;
        }
    }
}

/// Relative agreement required between the solver and the grid oracle.
pub const SP2_RELATIVE_TOLERANCE: f64 = 1e-6;
/// KKT stationarity bound, relative to λ*.
pub const KKT_TOLERANCE: f64 = 1e-4;
/// Complementary-slackness bound, relative to λ*.
pub const SLACKNESS_TOLERANCE: f64 = 1e-6;

/// Checks the solver against the oracles on random instances:
/// `sp2_instances` joint problems with 1..=3 devices (plus KKT residuals of
/// the bandwidth step at the returned powers) and `scalar_instances` random
/// SP1 / power problems against `scalar_points`-point grids.
pub fn certify(
    seed: u64,
    sp2_instances: usize,
    alpha_step: f64,
    scalar_instances: usize,
    scalar_points: usize,
) -> Result<CertificationReport, OracleError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut report = CertificationReport {
        sp2_worst_excess: f64::NEG_INFINITY,
        ..Default::default()
    };

    for k in 0..sp2_instances {
        let n = 1 + k % 3;
        let pb = random_instance(&mut rng, n);
        let sol = solve_sp2(&pb);
        let grid = grid_sp2(&pb, alpha_step)?;
        let solver_obj = oracle_sp2_objective(&pb, &sol.tx_powers, &sol.bw_fracs);
        let scale = grid.objective.abs().max(f64::MIN_POSITIVE);
        let slack = grid_slack(&pb, &sol.bw_fracs, None, alpha_step);
        let excess = solver_obj - grid.objective;
        report.sp2_worst_excess = report.sp2_worst_excess.max(excess / scale);
        report.sp2_instances += 1;
        if excess > SP2_RELATIVE_TOLERANCE * scale
            || -excess > SP2_RELATIVE_TOLERANCE * scale + slack
        {
            report.sp2_failures += 1;
        }

        let (residual, slackness) = kkt_residuals(&pb, &sol.tx_powers);
        report.max_kkt_residual = report.max_kkt_residual.max(residual);
        report.max_slackness = report.max_slackness.max(slackness);
        if residual > KKT_TOLERANCE || slackness > SLACKNESS_TOLERANCE {
            report.kkt_failures += 1;
        }
    }

    for _ in 0..scalar_instances {
        let v = log_uniform(&mut rng, 1e6, 1e11);
        let pb = PtsProblem {
            consts: default_constants(v),
            devices: vec![DeviceSlot {
                queue: log_uniform(&mut rng, 1.0, 1e8),
                gain: unit_exponential(&mut rng).max(1e-3) * 1e-4 / 150f64.powi(4),
                cycles_per_bit: 737.5,
                f_max: 1e9,
                p_max: 0.5,
            }],
        };
        let c = pb.consts;
        let d = pb.devices[0];
        let f = optimal_cpu_freq(
            d.queue,
            c.slot_len,
            c.switched_cap,
            c.control_v,
            d.cycles_per_bit,
            d.f_max,
        );
        let closed = sp1_objective(&pb, 0, f);
        let grid = grid_sp1(&pb, 0, scalar_points)?;
        report.sp1_instances += 1;
        if closed > grid.objective + 1e-12 * grid.objective.abs() {
            report.sp1_failures += 1;
        }

        let alpha = rng.gen_range(c.eps_a..=1.0);
        let p = pb.tx_power(0, alpha);
        let closed = pwr_objective(&pb, 0, alpha, p);
        let (_, grid_obj) = grid_pwr(&pb, 0, alpha, scalar_points);
        report.pwr_instances += 1;
        if closed > grid_obj + 1e-12 * grid_obj.abs() {
            report.pwr_failures += 1;
        }
    }
    Ok(report)
}

/// Relative KKT stationarity residual `max_i |Q_i dD_r/dα - λ*| / λ*` over
/// devices strictly above the floor, and relative slackness
/// `|Σα - 1|`, for the bandwidth step at fixed `powers`.
pub fn kkt_residuals(problem: &PtsProblem, powers: &[f64]) -> (f64, f64) {
    let bw = bandwidth_allocation(problem, powers);
    let Some(state) = bw.state else {
        return (0.0, 0.0);
    };
    let lambda = state.lambda;
    let c = &problem.consts;
    let mut residual: f64 = 0.0;
    for (i, d) in problem.devices.iter().enumerate() {
        let a = bw.fracs[i];
        if a > c.eps_a && powers[i] > 0.0 {
            let m =
                d.queue * marginal_rate(a, powers[i], d.gain, c.bandwidth, c.slot_len, c.noise_psd);
            residual = residual.max((m - lambda).abs() / lambda);
        }
    }
    let sum: f64 = bw.fracs.iter().sum();
    (residual, (sum - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sp1_grid_zero_queue() {
        let pb = PtsProblem {
            consts: default_constants(1e9),
            devices: vec![DeviceSlot {
                queue: 0.0,
                gain: 1e-13,
                cycles_per_bit: 737.5,
                f_max: 1e9,
                p_max: 0.5,
            }],
        };
        assert_eq!(grid_sp1(&pb, 0, 1000).unwrap().freq, 0.0);
        assert!(grid_sp1(&pb, 0, 999).is_err());
    }

    #[test]
    fn grid_refuses_large_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let pb = random_instance(&mut rng, 5);
        assert_eq!(grid_sp2(&pb, 1e-2), Err(OracleError::TooManyDevices(5)));
        let pb = random_instance(&mut rng, 2);
        assert!(grid_sp2(&pb, 0.05).is_err());
    }

    #[test]
    fn face_enumeration_counts() {
        let mut count = 0;
        for_each_face_point(3, 0.0, 0.1, |a| {
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            count += 1;
        });
        // compositions of 10 into 3 non-negative parts
        assert_eq!(count, 66);
    }

    #[test]
    fn single_device_grid_uses_full_band() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let pb = random_instance(&mut rng, 1);
        let g = grid_sp2(&pb, 1e-3).unwrap();
        assert_eq!(g.fracs, vec![1.0]);
        assert_eq!(g.powers[0], pb.tx_power(0, 1.0));
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let mut pb = random_instance(&mut rng, 2);
        let talker = (0..2).find(|&i| pb.tx_power(i, 0.5) > 0.0).unwrap();
        pb.devices = vec![pb.devices[talker]; 2];
        let g = grid_sp2(&pb, 1e-3).unwrap();
        assert!((g.fracs[0] - 0.5).abs() <= 1e-3, "{:?}", g.fracs);
    }
}
