//! Per-slot drift-plus-penalty controller.
//!
//! Each slot minimizes `-Σ Q_i D_Σ,i + V·P` over CPU frequencies, transmit
//! powers and bandwidth fractions. The problem separates into
//!
//! * one scalar cubic problem per device for the CPU frequency (closed form);
//! * a jointly convex power/bandwidth problem, solved by alternating the
//!   closed-form power update with a Lagrangian bisection over the bandwidth
//!   multiplier (block coordinate descent / Gauss-Seidel).

use std::f64::consts::LN_2;

use crate::model::{local_departure, local_power, remote_departure, Scenario};

/// Stopping accuracy ξ on `|Σα - 1|` for the multiplier bisection.
pub const BW_TOLERANCE: f64 = 1e-7;
/// Maximum multiplier bisection steps.
pub const BW_MAX_ITERATIONS: usize = 200;
/// Growth factor for the upper multiplier bracket.
pub const BW_BRACKET_GROWTH: f64 = 1.5;
/// Lower end of the inner bisection bracket for `R_i(λ)`.
pub const ROOT_ALPHA_FLOOR: f64 = 1e-9;
/// Absolute tolerance in α of the inner bisection.
pub const ROOT_ALPHA_TOLERANCE: f64 = 1e-10;
/// Relative objective change that ends the alternation.
pub const GS_TOLERANCE: f64 = 1e-9;
pub const GS_MAX_ITERATIONS: usize = 100;

/// Constants shared by all devices in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotConstants {
    pub slot_len: f64,
    pub bandwidth: f64,
    pub noise_psd: f64,
    pub switched_cap: f64,
    pub control_v: f64,
    pub eps_a: f64,
}

/// Observed state and limits of one device in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceSlot {
    /// Backlog `Q_i(t)` (bits).
    pub queue: f64,
    /// Channel power gain `H_i(t)`.
    pub gain: f64,
    pub cycles_per_bit: f64,
    pub f_max: f64,
    pub p_max: f64,
}

/// The deterministic per-slot problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PtsProblem {
    pub consts: SlotConstants,
    pub devices: Vec<DeviceSlot>,
}

impl PtsProblem {
    pub fn from_scenario(scenario: &Scenario, queues: &[f64], gains: &[f64]) -> Self {
        let sys = &scenario.system;
        PtsProblem {
            consts: SlotConstants {
                slot_len: sys.slot_len,
                bandwidth: sys.bandwidth,
                noise_psd: sys.noise_psd,
                switched_cap: sys.switched_cap,
                control_v: sys.control_v,
                eps_a: sys.eps_a,
            },
            devices: scenario
                .devices
                .iter()
                .zip(queues.iter().zip(gains))
                .map(|(d, (&queue, &gain))| DeviceSlot {
                    queue,
                    gain,
                    cycles_per_bit: d.cycles_per_bit,
                    f_max: d.f_max,
                    p_max: d.p_max,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    /// Offloaded bits of device `i` at `(alpha, p)`.
    pub fn remote(&self, i: usize, alpha: f64, p: f64) -> f64 {
        let c = &self.consts;
        remote_departure(
            alpha,
            p,
            self.devices[i].gain,
            c.bandwidth,
            c.slot_len,
            c.noise_psd,
        )
    }

    /// Closed-form transmit power of device `i` for bandwidth share `alpha`.
    pub fn tx_power(&self, i: usize, alpha: f64) -> f64 {
        let c = &self.consts;
        let d = &self.devices[i];
        optimal_tx_power(
            d.queue,
            d.gain,
            alpha,
            c.control_v,
            c.bandwidth,
            c.slot_len,
            c.noise_psd,
            d.p_max,
        )
    }

    /// `Q_i · dD_r/dα` of device `i`.
    pub fn weighted_marginal(&self, i: usize, alpha: f64, p: f64) -> f64 {
        let c = &self.consts;
        let d = &self.devices[i];
        d.queue * marginal_rate(alpha, p, d.gain, c.bandwidth, c.slot_len, c.noise_psd)
    }
}

/// CPU frequency, transmit power and bandwidth share for every device.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotDecision {
    pub freqs: Vec<f64>,
    pub tx_powers: Vec<f64>,
    pub bw_fracs: Vec<f64>,
    pub diagnostics: SolverDiagnostics,
}

/// Telemetry emitted by the solver for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverDiagnostics {
    /// Power/bandwidth alternations performed.
    pub gs_iterations: usize,
    /// Multiplier bisection steps summed over all alternations.
    pub bw_iterations: usize,
    /// Final bandwidth multiplier λ*, if a bandwidth problem was solved.
    pub lambda: Option<f64>,
    pub converged: bool,
}

/// Minimizer of `-Q τ f / L + V κ f³` on `[0, f_max]`.
pub fn optimal_cpu_freq(
    queue: f64,
    slot_len: f64,
    switched_cap: f64,
    control_v: f64,
    cycles_per_bit: f64,
    f_max: f64,
) -> f64 {
    let stationary = (queue * slot_len / (3.0 * switched_cap * control_v * cycles_per_bit)).sqrt();
    stationary.min(f_max)
}

/// Minimizer of `-Q D_r + V p` on `[0, p_max]` for a fixed bandwidth share.
#[allow(clippy::too_many_arguments)]
pub fn optimal_tx_power(
    queue: f64,
    gain: f64,
    alpha: f64,
    control_v: f64,
    bandwidth: f64,
    slot_len: f64,
    noise_psd: f64,
    p_max: f64,
) -> f64 {
    let water_level = queue * slot_len / (LN_2 * control_v) - noise_psd / gain;
    (alpha * bandwidth * water_level.max(0.0)).min(p_max)
}

/// `dD_r/dα` at `(alpha, p)`.
///
/// With `c = H p / (N0 w)` and `x = c/α`, the derivative of
/// `α w τ log2(1 + c/α)` is `w τ [log2(1 + x) - x / ((1 + x) ln 2)]`, which is
/// positive and strictly decreasing in α.
pub fn marginal_rate(
    alpha: f64,
    p: f64,
    gain: f64,
    bandwidth: f64,
    slot_len: f64,
    noise_psd: f64,
) -> f64 {
    let x = gain * p / (noise_psd * bandwidth * alpha);
    if x <= 0.0 {
        return 0.0;
    }
    bandwidth * slot_len * (x.ln_1p() - x / (1.0 + x)) / LN_2
}

/// `R_i(λ)`: the bandwidth share at which `Q_i dD_r/dα = λ`.
///
/// Returns ε_A for a silent device (`p = 0` or `Q = 0`) and 1 when even the
/// full band leaves the weighted marginal rate above λ. Otherwise the root is
/// bracketed in `[ROOT_ALPHA_FLOOR, 1]` and refined by Newton steps that fall
/// back to bisection whenever a step would leave the bracket.
pub fn root_r(lambda: f64, problem: &PtsProblem, i: usize, p: f64) -> f64 {
    root_r_from(lambda, problem, i, p, 0.5)
}

/// [`root_r`] with the Newton iteration started at `guess`.
pub fn root_r_from(lambda: f64, problem: &PtsProblem, i: usize, p: f64, guess: f64) -> f64 {
    let eps_a = problem.consts.eps_a;
    let d = &problem.devices[i];
    if p <= 0.0 || d.queue <= 0.0 {
        return eps_a;
    }
    let c = &problem.consts;
    // Q dD_r/dα = k g(x) with x = s/α
    let k = d.queue * c.bandwidth * c.slot_len / LN_2;
    let s = d.gain * p / (c.noise_psd * c.bandwidth);
    let residual = |a: f64| {
        let x = s / a;
        k * (x.ln_1p() - x / (1.0 + x)) - lambda
    };
    if residual(1.0) >= 0.0 {
        return 1.0;
    }
    if residual(ROOT_ALPHA_FLOOR) <= 0.0 {
        return ROOT_ALPHA_FLOOR;
    }
    // residual is strictly decreasing: positive at `lo`, negative at `hi`
    let (mut lo, mut hi) = (ROOT_ALPHA_FLOOR, 1.0);
    let mut a = if guess > lo && guess < hi { guess } else { 0.5 };
    while hi - lo > ROOT_ALPHA_TOLERANCE {
        let x = s / a;
        let q = x / (1.0 + x);
        let r = k * (x.ln_1p() - q) - lambda;
        if r > 0.0 {
            lo = a;
        } else if r < 0.0 {
            hi = a;
        } else {
            return a;
        }
        let slope = -k * q * q / a;
        let newton = a - r / slope;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - a).abs() <= 0.5 * ROOT_ALPHA_TOLERANCE {
            return next;
        }
        a = next;
    }
    0.5 * (lo + hi)
}

/// Bracket and current iterate of the bandwidth multiplier search.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeState {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda: f64,
    /// `R_i(λ)` for every device at the current λ.
    pub roots: Vec<f64>,
}

/// Result of the bandwidth sub-problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthAllocation {
    pub fracs: Vec<f64>,
    /// Final multiplier state; `None` when every device is silent.
    pub state: Option<LagrangeState>,
    pub iterations: usize,
    pub converged: bool,
}

fn allocate(problem: &PtsProblem, powers: &[f64], lambda: f64, roots: &mut [f64]) -> f64 {
    let eps_a = problem.consts.eps_a;
    let mut sum = 0.0;
    for (i, r) in roots.iter_mut().enumerate() {
        *r = root_r_from(lambda, problem, i, powers[i], *r);
        sum += r.max(eps_a);
    }
    sum
}

/// Optimal bandwidth shares for fixed transmit powers.
///
/// Bisection on the multiplier λ of `Σα ≤ 1`. The search stops once
/// `1 - ξ < Σα ≤ 1`, so the returned shares are always feasible.
pub fn bandwidth_allocation(problem: &PtsProblem, powers: &[f64]) -> BandwidthAllocation {
    let n = problem.len();
    let eps_a = problem.consts.eps_a;
    let active = |i: usize| powers[i] > 0.0 && problem.devices[i].queue > 0.0;

    // devices without power contribute a constant R_i = ε_A and do not enter λ_L
    let lambda_floor = (0..n)
        .filter(|&i| active(i))
        .map(|i| problem.weighted_marginal(i, 1.0, powers[i]))
        .fold(f64::NAN, f64::max);
    if lambda_floor.is_nan() || lambda_floor <= 0.0 {
        return BandwidthAllocation {
            fracs: vec![1.0 / n as f64; n],
            state: None,
            iterations: 0,
            converged: true,
        };
    }

    let mut roots = vec![0.5; n];
    let finish = |lambda_lo: f64, lambda_hi: f64, lambda: f64, roots: Vec<f64>, it, ok| {
        BandwidthAllocation {
            fracs: roots.iter().map(|r| r.max(eps_a)).collect(),
            state: Some(LagrangeState {
                lambda_lo,
                lambda_hi,
                lambda,
                roots,
            }),
            iterations: it,
            converged: ok,
        }
    };
    let accept = |sum: f64| sum <= 1.0 && sum > 1.0 - BW_TOLERANCE;

    let mut lambda_lo = lambda_floor;
    let sum = allocate(problem, powers, lambda_lo, &mut roots);
    if accept(sum) {
        return finish(lambda_lo, lambda_lo, lambda_lo, roots, 0, true);
    }

    let mut lambda_hi = lambda_lo;
    let mut sum = sum;
    while sum >= 1.0 {
        lambda_hi *= BW_BRACKET_GROWTH;
        sum = allocate(problem, powers, lambda_hi, &mut roots);
    }
    if accept(sum) {
        return finish(lambda_lo, lambda_hi, lambda_hi, roots, 0, true);
    }

    let mut mid_roots = roots.clone();
    for it in 1..=BW_MAX_ITERATIONS {
        let mid = 0.5 * (lambda_lo + lambda_hi);
        let s = allocate(problem, powers, mid, &mut mid_roots);
        if accept(s) {
            return finish(lambda_lo, lambda_hi, mid, mid_roots, it, true);
        }
        if s > 1.0 {
            lambda_lo = mid;
        } else {
            lambda_hi = mid;
            roots.copy_from_slice(&mid_roots);
        }
    }
    // `roots` always holds the allocation at λ_hi, which has Σα < 1
    finish(
        lambda_lo,
        lambda_hi,
        lambda_hi,
        roots,
        BW_MAX_ITERATIONS,
        false,
    )
}

/// Objective of the power/bandwidth sub-problem: `-Σ Q_i D_r,i + V Σ p_i`.
pub fn sp2_objective(problem: &PtsProblem, powers: &[f64], fracs: &[f64]) -> f64 {
    let v = problem.consts.control_v;
    (0..problem.len())
        .map(|i| -problem.devices[i].queue * problem.remote(i, fracs[i], powers[i]) + v * powers[i])
        .sum()
}

/// Full per-slot objective `-Σ Q_i (D_l,i + D_r,i) + V Σ (κ f_i³ + p_i)`.
pub fn pts_objective(problem: &PtsProblem, decision: &SlotDecision) -> f64 {
    let c = &problem.consts;
    let local: f64 = problem
        .devices
        .iter()
        .zip(&decision.freqs)
        .map(|(d, &f)| {
            -d.queue * local_departure(f, c.slot_len, d.cycles_per_bit)
                + c.control_v * local_power(f, c.switched_cap)
        })
        .sum();
    local + sp2_objective(problem, &decision.tx_powers, &decision.bw_fracs)
}

/// Solution of the joint power/bandwidth sub-problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Sp2Solution {
    pub tx_powers: Vec<f64>,
    pub bw_fracs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub bw_iterations: usize,
    pub lambda: Option<f64>,
    pub converged: bool,
    /// Objective after every block update, starting from the initial point.
    pub history: Vec<f64>,
}

/// Powers for every device at the given bandwidth shares.
pub fn optimal_tx_powers(problem: &PtsProblem, fracs: &[f64]) -> Vec<f64> {
    (0..problem.len())
        .map(|i| problem.tx_power(i, fracs[i]))
        .collect()
}

/// Alternates the closed-form power update and the bandwidth bisection,
/// starting from an equal split, and returns the best point visited.
pub fn solve_sp2(problem: &PtsProblem) -> Sp2Solution {
    let n = problem.len();
    let mut fracs = vec![1.0 / n as f64; n];
    let mut powers = optimal_tx_powers(problem, &fracs);

    // whether p_i > 0 does not depend on α, so this is decided once
    if powers.iter().all(|&p| p == 0.0) {
        return Sp2Solution {
            objective: sp2_objective(problem, &powers, &fracs),
            tx_powers: powers,
            bw_fracs: fracs,
            iterations: 0,
            bw_iterations: 0,
            lambda: None,
            converged: true,
            history: Vec::new(),
        };
    }

    let mut current = sp2_objective(problem, &powers, &fracs);
    let mut history = vec![current];
    let mut best = (current, powers.clone(), fracs.clone());
    let mut bw_iterations = 0;
    let mut lambda = None;
    let mut converged = false;
    let mut bw_ok = true;
    let mut iterations = 0;

    while iterations < GS_MAX_ITERATIONS {
        iterations += 1;
        let bw = bandwidth_allocation(problem, &powers);
        bw_iterations += bw.iterations;
        bw_ok &= bw.converged;
        lambda = bw.state.as_ref().map(|s| s.lambda);
        fracs = bw.fracs;
        history.push(sp2_objective(problem, &powers, &fracs));

        powers = optimal_tx_powers(problem, &fracs);
        let next = sp2_objective(problem, &powers, &fracs);
        history.push(next);
        if next < best.0 {
            best = (next, powers.clone(), fracs.clone());
        }
        let change = current - next;
        current = next;
        if change <= GS_TOLERANCE * next.abs() {
            converged = true;
            break;
        }
    }

    let (objective, tx_powers, bw_fracs) = best;
    Sp2Solution {
        tx_powers,
        bw_fracs,
        objective,
        iterations,
        bw_iterations,
        lambda,
        converged: converged && bw_ok,
        history,
    }
}

/// CPU frequencies for every device.
pub fn optimal_cpu_freqs(problem: &PtsProblem) -> Vec<f64> {
    let c = &problem.consts;
    problem
        .devices
        .iter()
        .map(|d| {
            optimal_cpu_freq(
                d.queue,
                c.slot_len,
                c.switched_cap,
                c.control_v,
                d.cycles_per_bit,
                d.f_max,
            )
        })
        .collect()
}

/// Solves the whole per-slot problem.
pub fn decide_slot(problem: &PtsProblem) -> SlotDecision {
    let sp2 = solve_sp2(problem);
    SlotDecision {
        freqs: optimal_cpu_freqs(problem),
        tx_powers: sp2.tx_powers,
        bw_fracs: sp2.bw_fracs,
        diagnostics: SolverDiagnostics {
            gs_iterations: sp2.iterations,
            bw_iterations: sp2.bw_iterations,
            lambda: sp2.lambda,
            converged: sp2.converged,
        },
    }
}
