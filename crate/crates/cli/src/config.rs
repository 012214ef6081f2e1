//! JSON run configuration with compiled-in defaults.
//!
//! Every block is optional; omitted keys take the reference values of the
//! 19.9 mm ⁴⁰Ca⁺ cavity system. Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use cpk_core::analysis::PathEfficiency;
use cpk_core::atomic::{Branching, EmitterConstants, EmitterModel};
use cpk_core::cavity::{CavityGeometry, CavityModel, MirrorSet};
use cpk_core::consts::{khz, mhz, ppm, MU_B_OVER_H};
use cpk_core::ode::Tolerances;
use cpk_core::sim::{BuildOptions, DriveConfig, EvolveOptions, SystemModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitterBlock {
    pub gamma_mhz: f64,
    pub branching_s12: f64,
    pub branching_d32: f64,
    pub branching_d52: f64,
    pub b_field_gauss: f64,
}

impl Default for EmitterBlock {
    fn default() -> Self {
        let b = Branching::default();
        EmitterBlock { gamma_mhz: 11.49, branching_s12: b.s12, branching_d32: b.d32, branching_d52: b.d52, b_field_gauss: 4.23 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityBlock {
    pub length_mm: f64,
    pub mirror_radius_mm: f64,
    pub wavelength_nm: f64,
    pub t1_ppm: f64,
    pub t2_ppm: f64,
    /// Scattering and absorption per round trip; α = this + T1.
    pub scatter_absorb_ppm: f64,
    pub n_ions: u32,
}

impl Default for CavityBlock {
    fn default() -> Self {
        CavityBlock {
            length_mm: 19.906,
            mirror_radius_mm: 9.984,
            wavelength_nm: 854.0,
            t1_ppm: 2.9,
            t2_ppm: 90.0,
            scatter_absorb_ppm: 23.0,
            n_ions: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveBlock {
    pub rabi_mhz: f64,
    /// Second tone for entanglement runs; `null` gives a monochromatic drive.
    pub rabi2_mhz: Option<f64>,
    pub detuning_mhz: f64,
    pub phase_rad: f64,
    /// Drive on-time; `null` keeps the drive on for the whole run.
    pub pulse_us: Option<f64>,
    pub duration_us: f64,
    pub bin_us: f64,
    pub n_max: usize,
    pub jitter_khz: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for DriveBlock {
    fn default() -> Self {
        DriveBlock {
            rabi_mhz: 14.0,
            rabi2_mhz: None,
            detuning_mhz: -403.0,
            phase_rad: 0.0,
            pulse_us: None,
            duration_us: 400.0,
            bin_us: 0.1,
            n_max: 1,
            jitter_khz: 10.0,
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathBlock {
    pub p_el: f64,
    pub p_fc: f64,
    pub p_det: f64,
    pub p_el_err: f64,
    pub p_fc_err: f64,
    pub p_det_err: f64,
}

impl Default for PathBlock {
    fn default() -> Self {
        let p = PathEfficiency::default();
        PathBlock { p_el: p.p_el, p_fc: p.p_fc, p_det: p.p_det, p_el_err: p.p_el_err, p_fc_err: p.p_fc_err, p_det_err: p.p_det_err }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisBlock {
    pub bin_us: f64,
    pub n_slots: usize,
    pub slot_len_us: f64,
    pub slot_gap_us: f64,
    pub bootstrap_m: usize,
    pub background_rate_per_s: f64,
    pub background_window_us: f64,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        AnalysisBlock {
            bin_us: 1.0,
            n_slots: 15,
            slot_len_us: 200.0,
            slot_gap_us: 60.0,
            bootstrap_m: 200,
            background_rate_per_s: 20.0,
            background_window_us: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub emitter: EmitterBlock,
    pub cavity: CavityBlock,
    pub drive: DriveBlock,
    pub path: PathBlock,
    pub analysis: AnalysisBlock,
    pub seed: u64,
}

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Parse { line: usize, column: usize, message: String },
    Invalid { key: String, reason: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "cannot read config: {m}"),
            ConfigError::Parse { line, column, message } => write!(f, "config parse error at line {line}, column {column}: {message}"),
            ConfigError::Invalid { key, reason } => write!(f, "invalid config key `{key}`: {reason}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(key: &str, reason: &str) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), reason: reason.to_string() }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, "must be positive and finite"))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, "must be non-negative and finite"))
    }
}

fn probability(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(invalid(key, "must lie in (0, 1]"))
    }
}

fn loss_ppm(key: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..1e6).contains(&v) {
        Ok(())
    } else {
        Err(invalid(key, "must lie in [0, 1e6) ppm"))
    }
}

impl GlobalConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: GlobalConfig = serde_json::from_str(text)
            .map_err(|e| ConfigError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks every key, then lets the physics modules validate the assembled blocks.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let e = &self.emitter;
        positive("emitter.gamma_mhz", e.gamma_mhz)?;
        for (k, v) in [("emitter.branching_s12", e.branching_s12), ("emitter.branching_d32", e.branching_d32), ("emitter.branching_d52", e.branching_d52)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(k, "must lie in [0, 1]"));
            }
        }
        if (e.branching_s12 + e.branching_d32 + e.branching_d52 - 1.0).abs() > 1e-3 {
            return Err(invalid("emitter.branching_s12", "branching ratios must sum to 1 within 1e-3"));
        }
        non_negative("emitter.b_field_gauss", e.b_field_gauss)?;

        let c = &self.cavity;
        positive("cavity.length_mm", c.length_mm)?;
        positive("cavity.mirror_radius_mm", c.mirror_radius_mm)?;
        positive("cavity.wavelength_nm", c.wavelength_nm)?;
        loss_ppm("cavity.t1_ppm", c.t1_ppm)?;
        loss_ppm("cavity.t2_ppm", c.t2_ppm)?;
        loss_ppm("cavity.scatter_absorb_ppm", c.scatter_absorb_ppm)?;
        if c.t2_ppm == 0.0 {
            return Err(invalid("cavity.t2_ppm", "must be positive"));
        }
        if c.n_ions == 0 {
            return Err(invalid("cavity.n_ions", "must be at least 1"));
        }
        if c.length_mm >= 2.0 * c.mirror_radius_mm {
            return Err(invalid("cavity.length_mm", "must be below twice the mirror radius for a stable resonator"));
        }

        let d = &self.drive;
        non_negative("drive.rabi_mhz", d.rabi_mhz)?;
        if let Some(r2) = d.rabi2_mhz {
            non_negative("drive.rabi2_mhz", r2)?;
        }
        if !(d.detuning_mhz != 0.0 && d.detuning_mhz.is_finite()) {
            return Err(invalid("drive.detuning_mhz", "must be nonzero and finite"));
        }
        if !d.phase_rad.is_finite() {
            return Err(invalid("drive.phase_rad", "must be finite"));
        }
        if let Some(p) = d.pulse_us {
            non_negative("drive.pulse_us", p)?;
        }
        positive("drive.duration_us", d.duration_us)?;
        positive("drive.bin_us", d.bin_us)?;
        if d.bin_us > d.duration_us {
            return Err(invalid("drive.bin_us", "must not exceed drive.duration_us"));
        }
        if d.n_max == 0 {
            return Err(invalid("drive.n_max", "must be at least 1"));
        }
        non_negative("drive.jitter_khz", d.jitter_khz)?;
        positive("drive.rtol", d.rtol)?;
        positive("drive.atol", d.atol)?;

        let p = &self.path;
        probability("path.p_el", p.p_el)?;
        probability("path.p_fc", p.p_fc)?;
        probability("path.p_det", p.p_det)?;
        non_negative("path.p_el_err", p.p_el_err)?;
        non_negative("path.p_fc_err", p.p_fc_err)?;
        non_negative("path.p_det_err", p.p_det_err)?;

        let a = &self.analysis;
        positive("analysis.bin_us", a.bin_us)?;
        if a.n_slots == 0 {
            return Err(invalid("analysis.n_slots", "must be at least 1"));
        }
        positive("analysis.slot_len_us", a.slot_len_us)?;
        non_negative("analysis.slot_gap_us", a.slot_gap_us)?;
        if a.bootstrap_m < 2 {
            return Err(invalid("analysis.bootstrap_m", "must be at least 2"));
        }
        non_negative("analysis.background_rate_per_s", a.background_rate_per_s)?;
        non_negative("analysis.background_window_us", a.background_window_us)?;

        self.emitter_model().map_err(|e| invalid("emitter", &e.to_string()))?;
        self.cavity_model().map_err(|e| invalid("cavity", &e.to_string()))?;
        Ok(())
    }

    /// Compact JSON of the fully resolved config; field order is fixed by the struct.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn emitter_model(&self) -> cpk_core::Result<EmitterModel> {
        let e = &self.emitter;
        EmitterModel::new(EmitterConstants {
            gamma_total: mhz(e.gamma_mhz),
            branching: Branching { s12: e.branching_s12, d32: e.branching_d32, d52: e.branching_d52 },
            b_field_gauss: e.b_field_gauss,
            mu_b_over_h: MU_B_OVER_H,
        })
    }

    pub fn cavity_model(&self) -> cpk_core::Result<CavityModel> {
        let c = &self.cavity;
        let geometry = CavityGeometry { length: c.length_mm * 1e-3, mirror_radius: c.mirror_radius_mm * 1e-3, wavelength: c.wavelength_nm * 1e-9 };
        let mirrors = MirrorSet { t1: ppm(c.t1_ppm), t2: ppm(c.t2_ppm), scatter_absorb: ppm(c.scatter_absorb_ppm) };
        CavityModel::new(geometry, mirrors)
    }

    /// Drive for `model`; a second tone sits one D5/2 Zeeman splitting above the first.
    pub fn drive_config(&self, model: &SystemModel) -> DriveConfig {
        let d = &self.drive;
        let mut drive = match d.rabi2_mhz {
            Some(r2) => DriveConfig::bichromatic(mhz(d.rabi_mhz), mhz(r2), mhz(d.detuning_mhz), model.zeeman_z(), d.phase_rad),
            None => DriveConfig::monochromatic(mhz(d.rabi_mhz), mhz(d.detuning_mhz)),
        };
        if let Some(p) = d.pulse_us {
            drive = drive.with_pulse_duration(p * 1e-6);
        }
        drive
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions { n_max: self.drive.n_max, jitter_rate: khz(self.drive.jitter_khz) }
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            t_end: self.drive.duration_us * 1e-6,
            sample_dt: self.drive.bin_us * 1e-6,
            tol: Tolerances { rtol: self.drive.rtol, atol: self.drive.atol, ..Default::default() },
            ..Default::default()
        }
    }

    pub fn path_efficiency(&self) -> PathEfficiency {
        let p = &self.path;
        PathEfficiency { p_el: p.p_el, p_fc: p.p_fc, p_det: p.p_det, p_el_err: p.p_el_err, p_fc_err: p.p_fc_err, p_det_err: p.p_det_err }
    }
}
