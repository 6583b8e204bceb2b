//! Experiment configuration files.
//!
//! A config is a TOML document with an `[experiment]` table, optional
//! parameter tables that override library defaults, an optional `[sweep]`
//! and one optional table per experiment kind. Everything is resolved to
//! concrete values on load, so the serialized form fully describes a run
//! and its hash identifies it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tonedisc::codec::CodecParams;
use tonedisc::galois::{GftPair, PrimeField};
use tonedisc::net::TopologyConfig;
use tonedisc::phy::{Fading, PhyConfig};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Fig9,
    Fig11,
    Fig12,
    Fig13,
    Fig14,
    Oracle,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig9 => "fig9",
            ExperimentKind::Fig11 => "fig11",
            ExperimentKind::Fig12 => "fig12",
            ExperimentKind::Fig13 => "fig13",
            ExperimentKind::Fig14 => "fig14",
            ExperimentKind::Oracle => "oracle",
        }
    }

    /// Sweep variable and values used when the config has no `[sweep]`.
    fn default_sweep(self) -> SweepSection {
        let (name, values): (&str, Vec<f64>) = match self {
            ExperimentKind::Fig9 => ("snr_db", vec![0.0, 3.0, 6.0, 9.0, 12.0]),
            ExperimentKind::Fig11 => ("snr_db", (0..=12).map(|s| s as f64).collect()),
            ExperimentKind::Fig12 => ("devices", vec![5.0, 10.0, 20.0, 30.0, 40.0, 50.0]),
            ExperimentKind::Fig13 => ("margin_db", vec![0.0]),
            ExperimentKind::Fig14 => ("neighbor_snr_db", vec![10.0]),
            ExperimentKind::Oracle => ("check", vec![]),
        };
        SweepSection {
            name: name.into(),
            values,
        }
    }

    fn allowed_sweeps(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Fig9 | ExperimentKind::Fig11 => &["snr_db"],
            ExperimentKind::Fig12 => &["devices"],
            ExperimentKind::Fig13 => &["margin_db", "group_radius_m"],
            ExperimentKind::Fig14 => &["neighbor_snr_db"],
            ExperimentKind::Oracle => &["check"],
        }
    }

    fn default_trials(self) -> u64 {
        match self {
            ExperimentKind::Fig9 | ExperimentKind::Fig11 => 2000,
            ExperimentKind::Fig12 => 50,
            ExperimentKind::Fig13 | ExperimentKind::Fig14 => 100,
            ExperimentKind::Oracle => 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Initial trials per sweep point: periods, blocks or drops.
    #[serde(default)]
    pub trials: u64,
    /// Cap for automatic extension; defaults to `trials`.
    #[serde(default)]
    pub max_trials: u64,
    /// Trials are doubled until the headline CI half-width is at most this;
    /// zero keeps the trial count fixed.
    #[serde(default)]
    pub ci_target: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecSection {
    pub p: u32,
    pub n: usize,
    pub k: usize,
    /// Defaults to `ceil((n + 1) / 2)`.
    #[serde(default)]
    pub theta: usize,
    pub delta_window: u32,
}

impl Default for CodecSection {
    fn default() -> Self {
        Self {
            p: 199,
            n: 11,
            k: 1,
            theta: 0,
            delta_window: 2,
        }
    }
}

impl CodecSection {
    pub fn params(&self) -> Result<CodecParams> {
        let gft = GftPair::new(PrimeField::new(self.p)?, self.n)?;
        Ok(CodecParams::from_gft(gft, self.k, self.theta, self.delta_window)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingKind {
    Block,
    Ar1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhySection {
    pub subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub channel_stride: usize,
    pub channel_offset: usize,
    pub rx_antennas: usize,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub detection_gamma: f64,
    pub fading: FadingKind,
    pub doppler_hz: f64,
}

impl Default for PhySection {
    fn default() -> Self {
        let d = PhyConfig::default();
        let (fading, doppler_hz) = match d.fading {
            Fading::BlockRayleigh => (FadingKind::Block, 0.0),
            Fading::Ar1Rayleigh { doppler_hz } => (FadingKind::Ar1, doppler_hz),
        };
        Self {
            subcarriers: d.subcarriers,
            subcarrier_spacing_hz: d.subcarrier_spacing_hz,
            channel_stride: d.channel_stride,
            channel_offset: d.channel_offset,
            rx_antennas: d.rx_antennas,
            noise_psd_dbm_hz: d.noise_psd_dbm_hz,
            noise_figure_db: d.noise_figure_db,
            detection_gamma: d.detection_gamma,
            fading,
            doppler_hz,
        }
    }
}

impl PhySection {
    pub fn config(&self) -> PhyConfig {
        PhyConfig {
            subcarriers: self.subcarriers,
            subcarrier_spacing_hz: self.subcarrier_spacing_hz,
            channel_stride: self.channel_stride,
            channel_offset: self.channel_offset,
            rx_antennas: self.rx_antennas,
            noise_psd_dbm_hz: self.noise_psd_dbm_hz,
            noise_figure_db: self.noise_figure_db,
            detection_gamma: self.detection_gamma,
            fading: match self.fading {
                FadingKind::Block => Fading::BlockRayleigh,
                FadingKind::Ar1 => Fading::Ar1Rayleigh {
                    doppler_hz: self.doppler_hz,
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySection {
    pub cells: usize,
    pub site_distance_m: f64,
    pub devices_per_cell: usize,
    pub bs_height_m: f64,
    pub device_height_m: f64,
    pub bs_power_dbm: f64,
    pub device_power_dbm: f64,
    pub carrier_mhz: f64,
    pub metro_correction_db: f64,
    pub noise_psd_dbm_hz: f64,
    pub bs_noise_figure_db: f64,
    pub device_noise_figure_db: f64,
    pub uplink_bandwidth_hz: f64,
    pub downlink_bandwidth_hz: f64,
    pub interference_over_thermal_db: f64,
    pub tone_bandwidth_hz: f64,
    pub neighbor_snr_db: f64,
    pub min_bs_distance_m: f64,
    pub bs_shadowing_db: f64,
    pub d2d_shadowing_db: f64,
}

macro_rules! topology_fields {
    ($from:expr, $to:ident) => {
        $to {
            cells: $from.cells,
            site_distance_m: $from.site_distance_m,
            devices_per_cell: $from.devices_per_cell,
            bs_height_m: $from.bs_height_m,
            device_height_m: $from.device_height_m,
            bs_power_dbm: $from.bs_power_dbm,
            device_power_dbm: $from.device_power_dbm,
            carrier_mhz: $from.carrier_mhz,
            metro_correction_db: $from.metro_correction_db,
            noise_psd_dbm_hz: $from.noise_psd_dbm_hz,
            bs_noise_figure_db: $from.bs_noise_figure_db,
            device_noise_figure_db: $from.device_noise_figure_db,
            uplink_bandwidth_hz: $from.uplink_bandwidth_hz,
            downlink_bandwidth_hz: $from.downlink_bandwidth_hz,
            interference_over_thermal_db: $from.interference_over_thermal_db,
            tone_bandwidth_hz: $from.tone_bandwidth_hz,
            neighbor_snr_db: $from.neighbor_snr_db,
            min_bs_distance_m: $from.min_bs_distance_m,
            bs_shadowing_db: $from.bs_shadowing_db,
            d2d_shadowing_db: $from.d2d_shadowing_db,
        }
    };
}

impl Default for TopologySection {
    fn default() -> Self {
        let d = TopologyConfig::default();
        topology_fields!(d, TopologySection)
    }
}

impl TopologySection {
    pub fn config(&self) -> TopologyConfig {
        topology_fields!(self, TopologyConfig)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub name: String,
    pub values: Vec<f64>,
}

/// Link-level discovery with many simultaneous transmitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig9Section {
    pub devices: usize,
    pub antennas: Vec<usize>,
    pub max_offset: u32,
}

impl Default for Fig9Section {
    fn default() -> Self {
        Self {
            devices: 30,
            antennas: vec![1, 2, 4],
            max_offset: 2,
        }
    }
}

/// Coded uplink under a discovery overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig11Section {
    pub devices: usize,
    pub overlay_inr_db: f64,
    pub data_subcarriers: usize,
    pub symbols: usize,
}

impl Default for Fig11Section {
    fn default() -> Self {
        Self {
            devices: 30,
            overlay_inr_db: 20.0,
            data_subcarriers: 12,
            symbols: 11,
        }
    }
}

/// Discovery time versus device density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig12Section {
    pub radius_m: f64,
    pub contention_windows: Vec<u32>,
    /// Periods before a baseline or CSMA pair counts as censored.
    pub horizon: u32,
    pub tone_horizon: u32,
    /// Drops simulated for the tone scheme; it is far slower than the
    /// baselines and its spread between drops is tiny.
    pub tone_trials: u64,
    pub tone_rx_antennas: usize,
    pub tone_max_offset: u32,
}

impl Default for Fig12Section {
    fn default() -> Self {
        Self {
            radius_m: 250.0,
            contention_windows: vec![8, 32, 128],
            horizon: 5000,
            tone_horizon: 20,
            tone_trials: 10,
            tone_rx_antennas: 2,
            tone_max_offset: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig13Section {
    pub group_radius_m: f64,
    pub margin_db: f64,
}

impl Default for Fig13Section {
    fn default() -> Self {
        Self {
            group_radius_m: 250.0,
            margin_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub codec: CodecSection,
    #[serde(default)]
    pub phy: PhySection,
    #[serde(default)]
    pub topology: TopologySection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub fig9: Fig9Section,
    #[serde(default)]
    pub fig11: Fig11Section,
    #[serde(default)]
    pub fig12: Fig12Section,
    #[serde(default)]
    pub fig13: Fig13Section,
}

impl ExperimentConfig {
    /// Default configuration for an experiment kind.
    pub fn for_kind(kind: ExperimentKind) -> Self {
        Self::resolve(Self {
            experiment: ExperimentSection {
                name: kind,
                seed: default_seed(),
                trials: 0,
                max_trials: 0,
                ci_target: 0.0,
                output: None,
            },
            codec: CodecSection::default(),
            phy: PhySection::default(),
            topology: TopologySection::default(),
            sweep: None,
            fig9: Fig9Section::default(),
            fig11: Fig11Section::default(),
            fig12: Fig12Section::default(),
            fig13: Fig13Section::default(),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let cfg = Self::resolve(raw);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    /// Fills in every value left to a default.
    fn resolve(mut self) -> Self {
        let kind = self.experiment.name;
        if self.experiment.trials == 0 {
            self.experiment.trials = kind.default_trials();
        }
        self.experiment.max_trials = self.experiment.max_trials.max(self.experiment.trials);
        if self.codec.theta == 0 {
            self.codec.theta = (self.codec.n + 1).div_ceil(2);
        }
        if self.sweep.is_none() {
            self.sweep = Some(kind.default_sweep());
        }
        self
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.name
    }

    pub fn sweep(&self) -> &SweepSection {
        self.sweep.as_ref().expect("resolved config has a sweep")
    }

    /// Overrides the initial trial count, raising the cap if needed.
    pub fn set_trials(&mut self, trials: u64) {
        self.experiment.trials = trials;
        self.experiment.max_trials = self.experiment.max_trials.max(trials);
    }

    /// Checks every parameter the selected experiment depends on.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let kind = self.kind();
        let e = &self.experiment;
        if e.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if !(e.ci_target >= 0.0) {
            return bad("ci_target must be >= 0".into());
        }
        let sweep = self.sweep();
        if !kind.allowed_sweeps().contains(&sweep.name.as_str()) {
            return bad(format!(
                "{} cannot sweep '{}'; expected one of {:?}",
                kind.name(),
                sweep.name,
                kind.allowed_sweeps()
            ));
        }
        if sweep.values.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        if kind == ExperimentKind::Oracle {
            return Ok(());
        }
        if sweep.values.is_empty() {
            return bad("sweep has no values".into());
        }
        let params = self.codec.params()?;
        let phy = self.phy.config();
        phy.validate(params.p())?;
        match kind {
            ExperimentKind::Fig9 => {
                let f = &self.fig9;
                if f.antennas.is_empty() || f.antennas.iter().any(|&a| a == 0 || a > 4) {
                    return bad("fig9.antennas must be non-empty and within 1..=4".into());
                }
                if f.devices == 0 || f.devices as u64 > params.tdid_count() {
                    return bad(format!("fig9.devices must be within 1..={}", params.tdid_count()));
                }
                if f.max_offset > params.delta_window() {
                    return bad("fig9.max_offset exceeds codec.delta_window".into());
                }
            }
            ExperimentKind::Fig11 => {
                let f = &self.fig11;
                if f.devices as u64 > params.tdid_count() {
                    return bad("fig11.devices exceeds the TDID space".into());
                }
                if f.data_subcarriers == 0 || f.symbols == 0 || f.symbols > params.n() {
                    return bad(format!(
                        "fig11 block must have >= 1 subcarrier and 1..={} symbols",
                        params.n()
                    ));
                }
            }
            ExperimentKind::Fig12 => {
                let f = &self.fig12;
                if sweep.values.iter().any(|&v| v < 2.0 || v.fract() != 0.0) {
                    return bad("fig12 densities must be whole numbers >= 2".into());
                }
                if f.contention_windows.is_empty() || f.contention_windows.contains(&0) {
                    return bad("fig12.contention_windows must be non-empty and positive".into());
                }
                if !(f.radius_m > 0.0) || f.horizon == 0 || f.tone_horizon == 0 {
                    return bad("fig12 radius and horizons must be positive".into());
                }
                if f.tone_rx_antennas == 0 || f.tone_max_offset > params.delta_window() {
                    return bad("fig12 tone receiver settings are out of range".into());
                }
                self.topology.config().validate()?;
            }
            ExperimentKind::Fig13 | ExperimentKind::Fig14 => {
                self.topology.config().validate()?;
                if !(self.fig13.group_radius_m > 0.0) {
                    return bad("fig13.group_radius_m must be positive".into());
                }
            }
            ExperimentKind::Oracle => {}
        }
        Ok(())
    }

    /// Canonical TOML of the resolved config without the output path.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.experiment.output = None;
        toml::to_string(&c).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash16(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// `name@hash`, the experiment column of every row.
    pub fn label(&self) -> String {
        format!("{}@{}", self.kind().name(), self.hash16())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_defaults() {
        let c = ExperimentConfig::parse("[experiment]\nname = \"fig9\"\n").unwrap();
        assert_eq!(c.experiment.seed, 1);
        assert_eq!(c.experiment.trials, 2000);
        assert_eq!(c.experiment.max_trials, 2000);
        assert_eq!(c.codec.theta, 6);
        assert_eq!(c.sweep().name, "snr_db");
        assert_eq!(c.phy.config(), PhyConfig::default());
        assert_eq!(c.topology.config(), TopologyConfig::default());
    }

    #[test]
    fn hash_ignores_output_but_not_parameters() {
        let a = ExperimentConfig::parse("[experiment]\nname = \"fig9\"\n").unwrap();
        let b = ExperimentConfig::parse("[experiment]\nname = \"fig9\"\noutput = \"x.csv\"\n").unwrap();
        let c = ExperimentConfig::parse("[experiment]\nname = \"fig9\"\nseed = 2\n").unwrap();
        assert_eq!(a.hash16(), b.hash16());
        assert_ne!(a.hash16(), c.hash16());
        assert_eq!(a.hash16().len(), 16);
        // Spelling out a default does not change the identity of the run.
        let d = ExperimentConfig::parse("[experiment]\nname = \"fig9\"\n[codec]\np = 199\nn = 11\nk = 1\ntheta = 6\ndelta_window = 2\n").unwrap();
        assert_eq!(a.hash16(), d.hash16());
    }

    #[test]
    fn canonical_round_trips() {
        let a = ExperimentConfig::for_kind(ExperimentKind::Fig12);
        let b = ExperimentConfig::parse(&a.canonical()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            "[experiment]\nname = \"fig10\"\n",
            "[experiment]\nname = \"fig9\"\nbogus = 1\n",
            "[experiment]\nname = \"fig9\"\n[codec]\np = 200\nn = 11\nk = 1\ndelta_window = 2\n",
            "[experiment]\nname = \"fig9\"\n[codec]\np = 199\nn = 10\nk = 1\ndelta_window = 2\n",
            "[experiment]\nname = \"fig9\"\n[fig9]\nantennas = [8]\n",
            "[experiment]\nname = \"fig9\"\n[sweep]\nname = \"devices\"\nvalues = [1.0]\n",
            "[experiment]\nname = \"fig12\"\n[sweep]\nname = \"devices\"\nvalues = [2.5]\n",
            "[experiment]\nname = \"fig11\"\n[phy]\nsubcarriers = 100\n",
            "[experiment]\nname = \"fig13\"\n[topology]\ncells = 4\n",
        ];
        for text in cases {
            let err = ExperimentConfig::parse(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }
}
