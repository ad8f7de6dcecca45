//! Reproducible task arrivals and block-fading channel gains.
//!
//! Every (device, process) pair owns an independent ChaCha stream whose key is
//! derived by hashing the master seed with the device index and a process tag.
//! Runs that differ only in V therefore see identical arrivals and fading.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::model::{pathloss, DeviceConfig, SystemConfig};

/// Source of the exogenous per-slot randomness seen by the simulator.
pub trait Environment {
    /// Task bits arriving at `device` in the current slot.
    fn arrival(&mut self, device: usize, cfg: &DeviceConfig) -> f64;
    /// Small-scale fading power gain `h_i(t)` of `device` in the current slot.
    fn fading(&mut self, device: usize, cfg: &DeviceConfig) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Process {
    Arrival,
    Fading,
}

impl Process {
    fn tag(self) -> &'static [u8] {
        match self {
            Process::Arrival => b"arrival",
            Process::Fading => b"fading",
        }
    }
}

/// Uniform arrivals on `[0, A_max]` and exponential fading with mean `h̄_i`.
#[derive(Debug, Clone)]
pub struct RandomStreams {
    seed: u64,
    arrivals: Vec<ChaCha12Rng>,
    fading: Vec<ChaCha12Rng>,
}

fn substream(seed: u64, device: usize, process: Process) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((device as u64).to_le_bytes());
    hasher.update(process.tag());
    ChaCha12Rng::from_seed(hasher.finalize().into())
}

impl RandomStreams {
    pub fn new(seed: u64, num_devices: usize) -> Self {
        RandomStreams {
            seed,
            arrivals: (0..num_devices)
                .map(|i| substream(seed, i, Process::Arrival))
                .collect(),
            fading: (0..num_devices)
                .map(|i| substream(seed, i, Process::Fading))
                .collect(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Environment for RandomStreams {
    fn arrival(&mut self, device: usize, cfg: &DeviceConfig) -> f64 {
        let u: f64 = self.arrivals[device].gen();
        u * cfg.arrival_max
    }

    fn fading(&mut self, device: usize, cfg: &DeviceConfig) -> f64 {
        // inverse transform on the open interval keeps h strictly positive
        let u: f64 = self.fading[device].sample(Open01);
        -cfg.fading_mean * u.ln()
    }
}

/// Degenerate environment for tests: constant arrivals and fading.
#[derive(Debug, Clone, Copy)]
pub struct ConstantEnvironment {
    pub arrival: f64,
    pub fading: f64,
}

impl Environment for ConstantEnvironment {
    fn arrival(&mut self, _device: usize, _cfg: &DeviceConfig) -> f64 {
        self.arrival
    }

    fn fading(&mut self, _device: usize, _cfg: &DeviceConfig) -> f64 {
        self.fading
    }
}

/// Replays fixed per-slot sequences (one `Vec` per device), cycling when exhausted.
#[derive(Debug, Clone)]
pub struct ReplayEnvironment {
    arrivals: Vec<Vec<f64>>,
    fading: Vec<Vec<f64>>,
    arrival_pos: Vec<usize>,
    fading_pos: Vec<usize>,
}

impl ReplayEnvironment {
    pub fn new(arrivals: Vec<Vec<f64>>, fading: Vec<Vec<f64>>) -> Self {
        let n = arrivals.len();
        ReplayEnvironment {
            arrival_pos: vec![0; n],
            fading_pos: vec![0; fading.len()],
            arrivals,
            fading,
        }
    }
}

impl Environment for ReplayEnvironment {
    fn arrival(&mut self, device: usize, _cfg: &DeviceConfig) -> f64 {
        let seq = &self.arrivals[device];
        let v = seq[self.arrival_pos[device] % seq.len()];
        self.arrival_pos[device] += 1;
        v
    }

    fn fading(&mut self, device: usize, _cfg: &DeviceConfig) -> f64 {
        let seq = &self.fading[device];
        let v = seq[self.fading_pos[device] % seq.len()];
        self.fading_pos[device] += 1;
        v
    }
}

/// Draws `A_i(t)` for one device.
pub fn draw_arrival<E: Environment + ?Sized>(
    env: &mut E,
    device: usize,
    cfg: &DeviceConfig,
) -> f64 {
    env.arrival(device, cfg)
}

/// Draws `H_i(t) = h_i(t) g0 (d0/d_i)^θ` for one device.
pub fn draw_channel_gain<E: Environment + ?Sized>(
    env: &mut E,
    device: usize,
    cfg: &DeviceConfig,
    system: &SystemConfig,
) -> f64 {
    env.fading(device, cfg) * pathloss(system, cfg)
}
