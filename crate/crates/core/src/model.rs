//! Physical model of the MEC system: configuration types, unit handling and
//! the per-slot departure/power functions.
//!
//! Everything inside the crate is SI (seconds, Hz, W, W/Hz, bits). The human
//! facing TOML schema ([`RawConfig`]) uses the units the experiments are
//! usually quoted in (ms, MHz, dBm/Hz, dB, GHz, mW, kbits) and is converted
//! exactly once, in [`parse_config`].

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;

/// System-wide physical and algorithmic parameters, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub num_devices: usize,
    /// Slot length τ (s).
    pub slot_len: f64,
    /// Shared system bandwidth w (Hz).
    pub bandwidth: f64,
    /// Receiver noise power spectral density N0 (W/Hz).
    pub noise_psd: f64,
    /// Path-loss constant g0 (linear).
    pub pathloss_const: f64,
    /// Reference distance d0 (m).
    pub ref_dist: f64,
    /// Path-loss exponent θ.
    pub pathloss_exp: f64,
    /// Effective switched capacitance κ.
    pub switched_cap: f64,
    /// Lyapunov control weight V (bits²/W).
    pub control_v: f64,
    /// Minimum bandwidth fraction per device.
    pub eps_a: f64,
    /// Number of simulated slots T.
    pub horizon: usize,
    pub rng_seed: u64,
    /// Slots discarded from the start of the averages. Zero reproduces a plain
    /// sample average over the whole horizon.
    pub burn_in: usize,
}

/// Per-device parameters, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceConfig {
    /// Distance to the MEC server (m).
    pub distance: f64,
    /// CPU cycles needed per task bit.
    pub cycles_per_bit: f64,
    /// Maximum CPU-cycle frequency (Hz).
    pub f_max: f64,
    /// Maximum transmit power (W).
    pub p_max: f64,
    /// Upper end of the uniform per-slot arrival law (bits). The lower end is 0.
    pub arrival_max: f64,
    /// Mean of the small-scale fading power gain.
    pub fading_mean: f64,
}

impl DeviceConfig {
    /// Mean arrival rate λ_i (bits/slot) under the uniform `[0, A_max]` law.
    pub fn mean_arrival(&self) -> f64 {
        0.5 * self.arrival_max
    }
}

/// A validated system configuration together with its devices.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: SystemConfig,
    pub devices: Vec<DeviceConfig>,
}

impl Scenario {
    /// Large-scale gain `g0 (d0/d_i)^θ` of device `i`.
    pub fn pathloss(&self, i: usize) -> f64 {
        pathloss(&self.system, &self.devices[i])
    }

    pub fn total_mean_arrival(&self) -> f64 {
        self.devices.iter().map(DeviceConfig::mean_arrival).sum()
    }

    /// Re-validates after programmatic edits (e.g. a V sweep).
    pub fn validate(&self) -> Result<(), ConfigError> {
        validate(&self.system, &self.devices)
    }

    /// Returns a copy with a different control weight.
    pub fn with_v(&self, v: f64) -> Self {
        let mut s = self.clone();
        s.system.control_v = v;
        s
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.system.rng_seed = seed;
        s
    }

    /// Human-unit form of this scenario. Consecutive identical devices are
    /// folded into one block with a `count`.
    pub fn to_raw(&self) -> RawConfig {
        let sys = &self.system;
        let mut blocks: Vec<RawDevice> = Vec::new();
        for d in &self.devices {
            let raw = RawDevice::from_device(d);
            match blocks.last_mut() {
                Some(last) if last.same_device(&raw) => {
                    last.count = Some(last.count.unwrap_or(1) + 1);
                }
                _ => blocks.push(raw),
            }
        }
        RawConfig {
            seed: Some(sys.rng_seed),
            t_slots: Some(sys.horizon as u64),
            burn_in: Some(sys.burn_in as u64),
            tau_ms: Some(tidy(sys.slot_len * 1e3)),
            w_mhz: Some(tidy(sys.bandwidth / 1e6)),
            n0_dbm_per_hz: Some(tidy(w_to_dbm(sys.noise_psd))),
            g0_db: Some(tidy(linear_to_db(sys.pathloss_const))),
            d0_m: Some(sys.ref_dist),
            theta: Some(sys.pathloss_exp),
            kappa: Some(sys.switched_cap),
            v_bits2_per_w: Some(sys.control_v),
            eps_a: Some(sys.eps_a),
            devices: blocks,
        }
    }

    /// Canonical TOML of [`Scenario::to_raw`]; parsing it yields this scenario.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("raw config always serializes")
    }

    /// Short hex digest of the canonical TOML, embedded in output files.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        let mut s = String::with_capacity(16);
        for b in &digest[..8] {
            let _ = write!(s, "{b:02x}");
        }
        s
    }
}

/// Rounds a unit-converted value to 12 significant digits so that
/// emit-then-parse cycles reproduce the same text.
fn tidy(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// TOML document schema. Key names follow the usual symbols with their unit.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    #[serde(rename = "T_slots")]
    pub t_slots: Option<u64>,
    pub burn_in: Option<u64>,
    pub tau_ms: Option<f64>,
    #[serde(rename = "w_MHz")]
    pub w_mhz: Option<f64>,
    #[serde(rename = "N0_dBm_per_Hz")]
    pub n0_dbm_per_hz: Option<f64>,
    #[serde(rename = "g0_dB")]
    pub g0_db: Option<f64>,
    pub d0_m: Option<f64>,
    pub theta: Option<f64>,
    pub kappa: Option<f64>,
    #[serde(rename = "V_bits2_per_W")]
    pub v_bits2_per_w: Option<f64>,
    #[serde(rename = "eps_A")]
    pub eps_a: Option<f64>,
    #[serde(default)]
    pub devices: Vec<RawDevice>,
}

/// One `[[devices]]` block; `count` replicates it (default 1).
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawDevice {
    pub count: Option<u64>,
    pub distance_m: Option<f64>,
    #[serde(rename = "L_cycles_per_bit")]
    pub l_cycles_per_bit: Option<f64>,
    #[serde(rename = "f_max_GHz")]
    pub f_max_ghz: Option<f64>,
    #[serde(rename = "p_max_mW")]
    pub p_max_mw: Option<f64>,
    #[serde(rename = "A_max_kbits")]
    pub a_max_kbits: Option<f64>,
    pub fading_mean: Option<f64>,
}

impl RawDevice {
    fn from_device(d: &DeviceConfig) -> Self {
        RawDevice {
            count: None,
            distance_m: Some(d.distance),
            l_cycles_per_bit: Some(d.cycles_per_bit),
            f_max_ghz: Some(tidy(d.f_max / 1e9)),
            p_max_mw: Some(tidy(d.p_max * 1e3)),
            a_max_kbits: Some(tidy(d.arrival_max / 1e3)),
            fading_mean: Some(d.fading_mean),
        }
    }

    fn same_device(&self, other: &RawDevice) -> bool {
        RawDevice {
            count: None,
            ..self.clone()
        } == RawDevice {
            count: None,
            ..other.clone()
        }
    }
}

/// dBm/Hz → W/Hz.
pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

/// dB → linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

fn required<T: Copy>(value: Option<T>, key: &str) -> Result<T, ConfigError> {
    value.ok_or_else(|| ConfigError::MissingKey(key.to_string()))
}

fn positive(value: f64, field: &str) -> Result<f64, ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ConfigError::NonPositive {
            field: field.to_string(),
            value,
        })
    }
}

/// Converts a parsed TOML document into a validated [`Scenario`].
pub fn parse_config(raw: &RawConfig) -> Result<Scenario, ConfigError> {
    let mut devices = Vec::new();
    if raw.devices.is_empty() {
        return Err(ConfigError::MissingKey("devices".into()));
    }
    for (b, block) in raw.devices.iter().enumerate() {
        let key = |k: &str| format!("devices[{b}].{k}");
        let count = block.count.unwrap_or(1);
        if count == 0 {
            return Err(ConfigError::NonPositive {
                field: key("count"),
                value: 0.0,
            });
        }
        let dev = DeviceConfig {
            distance: required(block.distance_m, &key("distance_m"))?,
            cycles_per_bit: required(block.l_cycles_per_bit, &key("L_cycles_per_bit"))?,
            f_max: required(block.f_max_ghz, &key("f_max_GHz"))? * 1e9,
            p_max: required(block.p_max_mw, &key("p_max_mW"))? * 1e-3,
            arrival_max: required(block.a_max_kbits, &key("A_max_kbits"))? * 1e3,
            fading_mean: block.fading_mean.unwrap_or(1.0),
        };
        positive(dev.distance, &key("distance_m"))?;
        positive(dev.cycles_per_bit, &key("L_cycles_per_bit"))?;
        positive(dev.f_max, &key("f_max_GHz"))?;
        positive(dev.p_max, &key("p_max_mW"))?;
        positive(dev.arrival_max, &key("A_max_kbits"))?;
        positive(dev.fading_mean, &key("fading_mean"))?;
        devices.extend(std::iter::repeat_n(dev, count as usize));
    }

    let system = SystemConfig {
        num_devices: devices.len(),
        slot_len: required(raw.tau_ms, "tau_ms")? * 1e-3,
        bandwidth: required(raw.w_mhz, "w_MHz")? * 1e6,
        noise_psd: dbm_to_w(required(raw.n0_dbm_per_hz, "N0_dBm_per_Hz")?),
        pathloss_const: db_to_linear(required(raw.g0_db, "g0_dB")?),
        ref_dist: required(raw.d0_m, "d0_m")?,
        pathloss_exp: required(raw.theta, "theta")?,
        switched_cap: required(raw.kappa, "kappa")?,
        control_v: required(raw.v_bits2_per_w, "V_bits2_per_W")?,
        eps_a: raw.eps_a.unwrap_or(1e-4),
        horizon: required(raw.t_slots, "T_slots")? as usize,
        rng_seed: required(raw.seed, "seed")?,
        burn_in: raw.burn_in.unwrap_or(0) as usize,
    };
    validate(&system, &devices)?;
    Ok(Scenario { system, devices })
}

/// Parses a TOML string; see [`RawConfig`] for the schema.
pub fn parse_config_str(text: &str) -> Result<Scenario, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    parse_config(&raw)
}

pub fn load_config(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

fn validate(sys: &SystemConfig, devices: &[DeviceConfig]) -> Result<(), ConfigError> {
    if sys.num_devices == 0 || sys.num_devices != devices.len() {
        return Err(ConfigError::NonPositive {
            field: "devices".into(),
            value: devices.len() as f64,
        });
    }
    positive(sys.slot_len, "tau_ms")?;
    positive(sys.bandwidth, "w_MHz")?;
    positive(sys.noise_psd, "N0_dBm_per_Hz")?;
    positive(sys.pathloss_const, "g0_dB")?;
    positive(sys.ref_dist, "d0_m")?;
    positive(sys.pathloss_exp, "theta")?;
    positive(sys.switched_cap, "kappa")?;
    positive(sys.control_v, "V_bits2_per_W")?;
    positive(sys.eps_a, "eps_A")?;
    if sys.eps_a * sys.num_devices as f64 >= 1.0 {
        return Err(ConfigError::BandwidthFloor {
            eps_a: sys.eps_a,
            num_devices: sys.num_devices,
        });
    }
    if sys.horizon == 0 {
        return Err(ConfigError::NonPositive {
            field: "T_slots".into(),
            value: 0.0,
        });
    }
    if sys.burn_in >= sys.horizon {
        return Err(ConfigError::Invalid {
            field: "burn_in".into(),
            reason: format!("must be below T_slots = {}", sys.horizon),
        });
    }
    Ok(())
}

/// Large-scale channel gain `g0 (d0/d)^θ`.
pub fn pathloss(sys: &SystemConfig, dev: &DeviceConfig) -> f64 {
    sys.pathloss_const * (sys.ref_dist / dev.distance).powf(sys.pathloss_exp)
}

/// Bits executed locally in one slot at CPU frequency `f`.
#[inline]
pub fn local_departure(f: f64, slot_len: f64, cycles_per_bit: f64) -> f64 {
    slot_len * f / cycles_per_bit
}

/// DVFS power `κ f³`.
#[inline]
pub fn local_power(f: f64, switched_cap: f64) -> f64 {
    switched_cap * f * f * f
}

/// Bits offloaded in one slot with bandwidth share `alpha` and transmit
/// power `p` over a channel with power gain `gain`.
#[inline]
pub fn remote_departure(
    alpha: f64,
    p: f64,
    gain: f64,
    bandwidth: f64,
    slot_len: f64,
    noise_psd: f64,
) -> f64 {
    if alpha <= 0.0 {
        return 0.0;
    }
    let snr = gain * p / (alpha * noise_psd * bandwidth);
    alpha * bandwidth * slot_len * snr.ln_1p() / std::f64::consts::LN_2
}
