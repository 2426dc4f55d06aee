//! Run configuration: JSON with `schema_version: 1`, Hz and SI units at
//! the boundary, every section optional with working defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use magnonlink_core::fitting::{FitParam, TraceKind};
use magnonlink_core::microscopic::{sphere_volume, FieldBias, MaterialGeometry, OpticalDriveParams};
use magnonlink_core::sweep::SweepQuantity;
use magnonlink_core::units::{dbm_to_watt, hz_to_rad, Constants, GAMMA_E_HZ_PER_T, HBAR, MU0};
use magnonlink_core::{Params, Real};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Power in watts. Accepts a bare number (W) or a string with a unit:
/// `"-41 dBm"`, `"15 mW"`, `"0.015 W"`, `"3 uW"`, `"2 nW"`, `"-30 dBW"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PowerSpec", into = "f64")]
pub struct Power(pub f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum PowerSpec {
    Watts(f64),
    Text(String),
}

impl TryFrom<PowerSpec> for Power {
    type Error = String;

    fn try_from(spec: PowerSpec) -> Result<Self, String> {
        match spec {
            PowerSpec::Watts(w) => Ok(Power(w)),
            PowerSpec::Text(s) => parse_power(&s).map(Power),
        }
    }
}

impl From<Power> for f64 {
    fn from(p: Power) -> f64 {
        p.0
    }
}

pub fn parse_power(s: &str) -> Result<f64, String> {
    let t = s.trim().replace('\u{2212}', "-");
    let split = t
        .find(|c: char| c.is_ascii_alphabetic() || c == 'µ')
        .ok_or_else(|| format!("power `{s}` has no unit"))?;
    let (num, unit) = t.split_at(split);
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse number in power `{s}`"))?;
    let w = match unit.trim() {
        "dBm" => dbm_to_watt(v),
        "dBW" => 10f64.powf(v / 10.0),
        "W" => v,
        "mW" => v * 1e-3,
        "uW" | "µW" => v * 1e-6,
        "nW" => v * 1e-9,
        "pW" => v * 1e-12,
        other => return Err(format!("unknown power unit `{other}` in `{s}`")),
    };
    if !w.is_finite() {
        return Err(format!("power `{s}` is not finite"));
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub bias: BiasSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub shotnoise: ShotNoiseSection,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
}

/// Hybrid-system rates as ordinary frequencies (value / 2π), Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub omega_c_hz: f64,
    pub omega_m_hz: f64,
    pub kappa_hz: f64,
    pub kappa_c_hz: f64,
    pub gamma_hz: f64,
    pub g_hz: f64,
    pub zeta_hz: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            omega_c_hz: 10.45e9,
            omega_m_hz: 10.45e9,
            kappa_hz: 3.3e6,
            kappa_c_hz: 25e6,
            gamma_hz: 1.1e6,
            g_hz: 63e6,
            zeta_hz: 0.18e-3,
        }
    }
}

impl SystemSection {
    pub fn params(&self) -> CliResult<Params> {
        Ok(Params::from_hz(
            self.omega_c_hz,
            self.omega_m_hz,
            self.kappa_hz,
            self.kappa_c_hz,
            self.gamma_hz,
            self.g_hz,
            self.zeta_hz,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsSection {
    pub hbar_js: f64,
    pub mu0_tm_per_a: f64,
    pub gamma_e_hz_per_t: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        Self {
            hbar_js: HBAR,
            mu0_tm_per_a: MU0,
            gamma_e_hz_per_t: GAMMA_E_HZ_PER_T,
        }
    }
}

impl ConstantsSection {
    pub fn constants(&self) -> CliResult<Constants<f64>> {
        for (name, v) in [
            ("constants.hbar_js", self.hbar_js),
            ("constants.mu0_tm_per_a", self.mu0_tm_per_a),
            ("constants.gamma_e_hz_per_t", self.gamma_e_hz_per_t),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Input(format!("{name}: must be finite and positive")));
            }
        }
        Ok(Constants {
            hbar: self.hbar_js,
            mu0: self.mu0_tm_per_a,
            gamma_e: hz_to_rad(self.gamma_e_hz_per_t),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSection {
    pub spin_density_m3: f64,
    pub verdet_rad_per_m: f64,
    pub sample_length_m: f64,
    /// Sphere radius used when `sample_volume_m3` is absent.
    pub sample_radius_m: f64,
    pub sample_volume_m3: Option<f64>,
    pub cavity_volume_m3: f64,
    pub gilbert_alpha: f64,
    pub bare_kittel_freq_hz: f64,
    /// Field-overlap factor applied to the first-principles coupling.
    pub overlap_factor: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self {
            spin_density_m3: 2.1e28,
            verdet_rad_per_m: 380.0,
            sample_length_m: 0.75e-3,
            sample_radius_m: 0.38e-3,
            sample_volume_m3: None,
            cavity_volume_m3: 21e-3 * 19e-3 * 3e-3,
            gilbert_alpha: 5.3e-5,
            bare_kittel_freq_hz: 10.45e9,
            overlap_factor: 1.0,
        }
    }
}

impl MaterialSection {
    pub fn geometry(&self, c: &Constants<f64>) -> CliResult<MaterialGeometry<f64>> {
        let g = MaterialGeometry {
            spin_density: self.spin_density_m3,
            verdet: self.verdet_rad_per_m,
            sample_length: self.sample_length_m,
            sample_volume: self
                .sample_volume_m3
                .unwrap_or_else(|| sphere_volume(self.sample_radius_m)),
            cavity_volume: self.cavity_volume_m3,
            gilbert_alpha: self.gilbert_alpha,
            gyromagnetic_ratio: c.gamma_e,
            bare_kittel_freq: hz_to_rad(self.bare_kittel_freq_hz),
        };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasSection {
    pub bias_field_t: f64,
    pub field_per_current_t_per_a: f64,
    pub reference_current_a: f64,
    /// Kittel frequency at the reference current; defaults to the cavity frequency.
    pub reference_kittel_freq_hz: Option<f64>,
}

impl Default for BiasSection {
    fn default() -> Self {
        Self {
            bias_field_t: 0.37,
            field_per_current_t_per_a: 0.05,
            reference_current_a: 0.4,
            reference_kittel_freq_hz: None,
        }
    }
}

impl BiasSection {
    pub fn bias(&self, system: &SystemSection) -> CliResult<FieldBias<f64>> {
        let b = FieldBias {
            bias_field: self.bias_field_t,
            field_per_current: self.field_per_current_t_per_a,
            reference_current: self.reference_current_a,
            reference_kittel_freq: hz_to_rad(self.reference_kittel_freq_hz.unwrap_or(system.omega_c_hz)),
        };
        b.validate()?;
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    pub power: Power,
    pub carrier_freq_hz: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self {
            power: Power(0.015),
            carrier_freq_hz: 200e12,
        }
    }
}

impl DriveSection {
    pub fn drive(&self) -> CliResult<OpticalDriveParams<f64>> {
        Ok(OpticalDriveParams::new(self.power.0, hz_to_rad(self.carrier_freq_hz))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub kind: TraceKind,
    /// Defaults to ω_c − 4(κ+κ_c) (coil: ω_m − 10 γ_total).
    pub freq_start_hz: Option<f64>,
    pub freq_stop_hz: Option<f64>,
    pub points: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Amplification factor for S_LM traces.
    pub eta: f64,
    pub phase_rad: f64,
    /// Coil coupling γ_c; defaults to γ (critical coupling).
    pub gamma_c_hz: Option<f64>,
    /// If set, ω_m follows the coil current through the bias block.
    pub current_a: Option<f64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            kind: TraceKind::S11Hybrid,
            freq_start_hz: None,
            freq_stop_hz: None,
            points: 801,
            noise_sigma: 0.0,
            seed: 0,
            eta: 1.0,
            phase_rad: 0.0,
            gamma_c_hz: None,
            current_a: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub quantity: SweepQuantity,
    pub freq_start_hz: f64,
    pub freq_stop_hz: f64,
    pub freq_points: usize,
    pub current_start_a: f64,
    pub current_stop_a: f64,
    pub current_points: usize,
    pub eta: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            quantity: SweepQuantity::S11Power,
            freq_start_hz: 10.2e9,
            freq_stop_hz: 10.7e9,
            freq_points: 801,
            current_start_a: 0.0,
            current_stop_a: 0.8,
            current_points: 201,
            eta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Seed from the trace itself (dips for reflection traces).
    Auto,
    /// Seed from the `system` block (and `fit.coil_init` for coil traces).
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoilInitSection {
    pub omega_m_hz: f64,
    pub gamma_hz: f64,
    pub gamma_c_hz: f64,
}

impl Default for CoilInitSection {
    fn default() -> Self {
        Self {
            omega_m_hz: 9.5e9,
            gamma_hz: 1.5e6,
            gamma_c_hz: 1.5e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Trace file (CSV or JSON), relative to the config file.
    pub trace: Option<String>,
    /// Required for complex CSV traces other than S11_HYBRID.
    pub kind: Option<TraceKind>,
    pub init: InitMode,
    pub coil_init: CoilInitSection,
    /// Parameters held at their initial value (S_LM fits).
    pub fixed: Vec<FitParam>,
    pub max_iter: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            trace: None,
            kind: None,
            init: InitMode::Auto,
            coil_init: CoilInitSection::default(),
            fixed: vec![FitParam::OmegaC, FitParam::Kappa, FitParam::KappaC],
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShotNoiseSection {
    pub microwave_power: Power,
    pub probe_photon_flux: f64,
    pub resolution_bandwidth_hz: f64,
    pub coil_coupling_hz: f64,
    /// Intrinsic Kittel damping; defaults to the coil coupling (critical).
    pub intrinsic_gamma_hz: Option<f64>,
    pub magnon_freq_hz: f64,
    /// Used when no measured spectrum is given.
    pub measured_snr_db: f64,
    /// Measured spectrum CSV `freq_hz,psd_w_per_hz`.
    pub spectrum: Option<String>,
    /// Electronic-noise spectrum on the same grid, subtracted first.
    pub electronic_noise: Option<String>,
    pub reference_zeta_hz: f64,
    /// Bins of the emitted model spectrum.
    pub spectrum_points: usize,
}

impl Default for ShotNoiseSection {
    fn default() -> Self {
        Self {
            microwave_power: Power(dbm_to_watt(-41.0)),
            probe_photon_flux: 1.2e17,
            resolution_bandwidth_hz: 100.0,
            coil_coupling_hz: 1.5e6,
            intrinsic_gamma_hz: None,
            magnon_freq_hz: 9.5e9,
            measured_snr_db: 36.8,
            spectrum: None,
            electronic_noise: None,
            reference_zeta_hz: 0.25e-3,
            spectrum_points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    /// Tone power at the auxiliary port when the CSV has no `tone_power_w` column.
    pub tone_power: Power,
    pub kappa_1_hz: f64,
    /// CSV `freq_hz,measured_power_w[,tone_power_w]`.
    pub measured: Option<String>,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            tone_power: Power(dbm_to_watt(-30.0)),
            kappa_1_hz: 42e3,
            measured: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    /// Half-widths of the search box in units of (κ+κ_c) and γ; default 3√C.
    pub span_c: Option<f64>,
    pub span_m: Option<f64>,
    pub grid_points: usize,
    pub landscape: bool,
    pub landscape_points: usize,
    /// Reference operating point (Δ_c, Δ_m) in Hz. The Kittel frequency it
    /// implies is held fixed for the constrained comparison.
    pub reference_point_hz: [f64; 2],
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            span_c: None,
            span_m: None,
            grid_points: 201,
            landscape: true,
            landscape_points: 201,
            reference_point_hz: [320e6, 12e6],
        }
    }
}

/// Parsed configuration plus the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    /// SHA-256 of the canonical (defaults-filled) configuration.
    pub hash: String,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

/// Applies `section.key=value` to a JSON document. The value is parsed as
/// JSON when possible and kept as a string otherwise.
pub fn apply_override(doc: &mut Value, spec: &str) -> CliResult<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{spec}` is not of the form section.key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Usage(format!(
            "override path `{path}` has an empty component"
        )));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for (i, key) in keys.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(CliError::Input(format!(
                "override `{path}`: `{}` is not an object",
                keys[..i].join(".")
            )));
        };
        if i == keys.len() - 1 {
            map.insert((*key).to_string(), value);
            return Ok(());
        }
        node = map
            .entry((*key).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("override path has at least one component")
}

pub fn parse_config(doc: Value) -> CliResult<RunConfig> {
    let cfg: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        CliError::Input(format!("config {path}: {}", e.inner()))
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::Input(format!(
            "config schema_version: expected {SCHEMA_VERSION}, found {}",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

/// Reads the config (or starts from an empty document), applies overrides
/// in order, validates, and hashes the canonical result.
pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<LoadedConfig> {
    let (mut doc, base_dir) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let doc: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Input(format!("config {}: {e}", p.display())))?;
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (doc, dir)
        }
        None => (serde_json::json!({ "schema_version": SCHEMA_VERSION }), PathBuf::new()),
    };
    if !doc.is_object() {
        return Err(CliError::Input("config: top level must be an object".into()));
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let config = parse_config(doc)?;
    let hash = canonical_hash(&config);
    Ok(LoadedConfig { config, base_dir, hash })
}

pub fn canonical_hash(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&canonical))
}

/// Kittel frequency for `current` through the bias block, rad/s.
pub fn omega_m_at(cfg: &RunConfig, current: f64) -> CliResult<f64> {
    let c = cfg.constants.constants()?;
    let bias = cfg.bias.bias(&cfg.system)?;
    let w = magnonlink_core::microscopic::kittel_freq_from_current(&bias, c.gamma_e, current);
    if !(w > 0.0) {
        return Err(CliError::Input(format!(
            "Kittel frequency at {current} A is not positive"
        )));
    }
    Ok(w)
}

/// Default probe window ω_c ± 4(κ+κ_c), Hz.
pub fn default_window(sys: &SystemSection) -> (f64, f64) {
    let half = 4.0 * (sys.kappa_hz + sys.kappa_c_hz);
    (sys.omega_c_hz - half, sys.omega_c_hz + half)
}

pub fn check_positive<T: Real>(name: &str, v: T) -> CliResult<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{name}: must be finite and positive")))
    }
}
