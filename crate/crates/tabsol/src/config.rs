//! TOML run configuration for the command-line tool.
//!
//! A config file describes one job: the network, the trainer, the target
//! function, the presentation schedule, the counter emulator, and (for the
//! `sweep` subcommand) the sweep axis. Unknown keys are rejected so typos
//! fail loudly.

use serde::Deserialize;
use std::path::Path;

use crate::bench::{self, AddNoPhase, ShuffleMode, TargetFunction, TargetKind};
use crate::error::{Error, Result};
use crate::net::NetworkConfig;

/// Top-level config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub trainer: TrainerSection,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub emulator: EmulatorSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default = "d_hidden")]
    pub hidden_count: usize,
    #[serde(default = "d_weight_range")]
    pub weight_range: f64,
    #[serde(default = "d_weight_min")]
    pub weight_min: f64,
    #[serde(default = "d_bias_range")]
    pub bias_range: f64,
    #[serde(default = "d_offset_span")]
    pub offset_span: f64,
    #[serde(default = "d_gain")]
    pub activation_gain: f64,
    #[serde(default)]
    pub seed: u64,
}

fn d_hidden() -> usize {
    100
}
fn d_weight_range() -> f64 {
    bench::protocol::WEIGHT_RANGE
}
fn d_weight_min() -> f64 {
    bench::protocol::WEIGHT_MIN
}
fn d_bias_range() -> f64 {
    bench::protocol::BIAS_RANGE
}
fn d_offset_span() -> f64 {
    bench::protocol::OFFSET_SPAN
}
fn d_gain() -> f64 {
    bench::protocol::ACTIVATION_GAIN
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            hidden_count: d_hidden(),
            weight_range: d_weight_range(),
            weight_min: d_weight_min(),
            bias_range: d_bias_range(),
            offset_span: d_offset_span(),
            activation_gain: d_gain(),
            seed: 0,
        }
    }
}

impl NetworkSection {
    pub fn to_network_config(&self) -> NetworkConfig {
        NetworkConfig {
            input_dim: 1,
            hidden_count: self.hidden_count,
            output_dim: 1,
            weight_range: self.weight_range,
            weight_min: self.weight_min,
            bias_range: self.bias_range,
            offset_span: self.offset_span,
            activation_gain: self.activation_gain,
            seed: self.seed,
        }
    }
}

/// Trainer selection. `kind` is one of `opium`, `opium-normalized`, `lms`,
/// or `sol-sign`; `sol-sign` runs on the counter emulator.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSection {
    #[serde(default = "d_trainer_kind")]
    pub kind: String,
    /// `opium`/`opium-normalized`: inverse-correlation initial scale.
    #[serde(default = "d_init_scale")]
    pub init_scale: f64,
    /// `lms`: constant gain (defaults to the emulator normalizer `1/2^bits`
    /// when unset).
    #[serde(default)]
    pub gain: Option<f64>,
}

fn d_trainer_kind() -> String {
    "sol-sign".into()
}
fn d_init_scale() -> f64 {
    1e8
}

impl Default for TrainerSection {
    fn default() -> Self {
        TrainerSection {
            kind: d_trainer_kind(),
            init_scale: d_init_scale(),
            gain: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    #[serde(default = "d_target_kind")]
    pub kind: TargetKind,
    #[serde(default = "d_amplitude")]
    pub amplitude: f64,
    /// Defaults per kind when unset.
    #[serde(default)]
    pub arg_scale: Option<f64>,
    #[serde(default = "d_points")]
    pub points: usize,
}

fn d_target_kind() -> TargetKind {
    TargetKind::Sinc
}
fn d_amplitude() -> f64 {
    100.0
}
fn d_points() -> usize {
    bench::GRID_POINTS
}

impl Default for TargetSection {
    fn default() -> Self {
        TargetSection {
            kind: d_target_kind(),
            amplitude: d_amplitude(),
            arg_scale: None,
            points: d_points(),
        }
    }
}

impl TargetSection {
    pub fn to_target(&self) -> TargetFunction {
        let mut f = TargetFunction::new(self.kind);
        f.amplitude = self.amplitude;
        if let Some(s) = self.arg_scale {
            f.arg_scale = s;
        }
        f
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    /// `random` (default) or `ordered`.
    #[serde(default = "d_shuffle")]
    pub shuffle: String,
    #[serde(default = "d_schedule_seed")]
    pub seed: u64,
    /// Optional step-size schedule, e.g. `[[0, 3], [2000, 0]]` meaning
    /// add_no 3 from iteration 0 and add_no 0 from iteration 2000.
    #[serde(default)]
    pub add_no_phases: Vec<(u64, u8)>,
}

fn d_epochs() -> usize {
    bench::protocol::TRAIN_EPOCHS
}
fn d_shuffle() -> String {
    "random".into()
}
fn d_schedule_seed() -> u64 {
    1
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            epochs: d_epochs(),
            shuffle: d_shuffle(),
            seed: d_schedule_seed(),
            add_no_phases: vec![],
        }
    }
}

impl ScheduleSection {
    pub fn shuffle_mode(&self) -> Result<ShuffleMode> {
        match self.shuffle.as_str() {
            "ordered" => Ok(ShuffleMode::Ordered),
            "random" => Ok(ShuffleMode::Random { seed: self.seed }),
            other => Err(Error::Config(format!(
                "shuffle must be \"random\" or \"ordered\", got \"{other}\""
            ))),
        }
    }

    pub fn add_no_schedule(&self) -> Vec<AddNoPhase> {
        self.add_no_phases
            .iter()
            .map(|&(from_iteration, add_no)| AddNoPhase {
                from_iteration,
                add_no,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmulatorSection {
    #[serde(default = "d_bits")]
    pub bits: u8,
    #[serde(default)]
    pub add_no: u8,
    /// Readout scale in nA; defaults to `2 x target amplitude`.
    #[serde(default)]
    pub readout_scale: Option<f64>,
}

fn d_bits() -> u8 {
    bench::protocol::DEFAULT_BITS
}

impl Default for EmulatorSection {
    fn default() -> Self {
        EmulatorSection {
            bits: d_bits(),
            add_no: 0,
            readout_scale: None,
        }
    }
}

/// Sweep axis for the `sweep` subcommand.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `bits`, `shuffle`, `capacity`, or `step-schedule`.
    pub axis: String,
    #[serde(default = "d_sweep_seeds")]
    pub n_seeds: usize,
    #[serde(default = "d_sweep_base_seed")]
    pub base_seed: u64,
    /// `bits` axis values.
    #[serde(default)]
    pub bits: Vec<u8>,
    /// `shuffle` and `capacity` axis values.
    #[serde(default)]
    pub hidden_counts: Vec<usize>,
    /// Budget override in epochs.
    #[serde(default)]
    pub epochs: Option<usize>,
    /// `capacity` axis threshold override, percent.
    #[serde(default)]
    pub threshold_percent: Option<f64>,
}

fn d_sweep_seeds() -> usize {
    10
}
fn d_sweep_base_seed() -> u64 {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; overridden by `--out`.
    #[serde(default = "d_out_dir")]
    pub dir: String,
    /// Model file name for `train`, relative to the output directory.
    #[serde(default = "d_model_file")]
    pub model_file: String,
    /// Test-vector count for `vectors`.
    #[serde(default = "d_vector_count")]
    pub vector_count: usize,
}

fn d_out_dir() -> String {
    "out".into()
}
fn d_model_file() -> String {
    "model.json".into()
}
fn d_vector_count() -> usize {
    1000
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: d_out_dir(),
            model_file: d_model_file(),
            vector_count: d_vector_count(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        match self.trainer.kind.as_str() {
            "opium" | "opium-normalized" | "lms" | "sol-sign" => {}
            other => {
                return Err(Error::Config(format!(
                    "trainer kind must be one of opium, opium-normalized, lms, sol-sign; got \"{other}\""
                )))
            }
        }
        self.schedule.shuffle_mode()?;
        self.target.to_target().validate()?;
        self.network.to_network_config().validate()?;
        if let Some(sweep) = &self.sweep {
            match sweep.axis.as_str() {
                "bits" => {
                    if sweep.bits.is_empty() {
                        return Err(Error::Config(
                            "bits sweep needs a nonempty sweep.bits list".into(),
                        ));
                    }
                }
                "shuffle" | "capacity" => {
                    if sweep.hidden_counts.is_empty() {
                        return Err(Error::Config(format!(
                            "{} sweep needs a nonempty sweep.hidden_counts list",
                            sweep.axis
                        )));
                    }
                }
                "step-schedule" => {}
                other => {
                    return Err(Error::Config(format!(
                        "sweep axis must be one of bits, shuffle, capacity, step-schedule; got \"{other}\""
                    )))
                }
            }
            if sweep.n_seeds == 0 {
                return Err(Error::Config("sweep.n_seeds must be at least 1".into()));
            }
        }
        Ok(())
    }
}
