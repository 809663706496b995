//! Experiment reproduction harness: target-function datasets on the 200-point
//! grid, presentation schedules, error metrics, the hardware training loop and
//! the four sweeps (bits per weight, shuffled vs ordered presentation,
//! epochs-vs-neurons capacity, variable step size).
//!
//! Inputs are voltages on `[-1, 1]`; targets are currents in nanoamperes.
//! Because the counter weights live in `(-1, 1)`, training runs on targets
//! normalised by a readout scale (default `2 x amplitude`); percent RMS error
//! is invariant under that scaling and nA-valued RMS figures are rescaled on
//! the way out.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::dlb::DlbArray;
use crate::error::{Error, Result};
use crate::net::{init_network, sign_bit, NetworkConfig, TabNetwork};

/// Regression targets from the experiment protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Sine,
    Cube,
    Sinc,
    Complex,
}

/// A target function `y = A * f(s * x)` with output scale in nanoamperes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetFunction {
    pub kind: TargetKind,
    /// Output scale in nA.
    pub amplitude: f64,
    /// Input-argument multiplier; defaults are per kind (sinc: 6 pi,
    /// sine: pi, cube and complex: 1).
    pub arg_scale: f64,
}

impl TargetFunction {
    pub fn new(kind: TargetKind) -> Self {
        let arg_scale = match kind {
            TargetKind::Sinc => 6.0 * std::f64::consts::PI,
            TargetKind::Sine => std::f64::consts::PI,
            TargetKind::Cube | TargetKind::Complex => 1.0,
        };
        TargetFunction {
            kind,
            amplitude: 100.0,
            arg_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitude <= 0.0 || !self.amplitude.is_finite() {
            return Err(Error::Config(format!(
                "amplitude must be positive and finite, got {}",
                self.amplitude
            )));
        }
        if self.arg_scale == 0.0 || !self.arg_scale.is_finite() {
            return Err(Error::Config(format!(
                "arg_scale must be finite and nonzero, got {}",
                self.arg_scale
            )));
        }
        Ok(())
    }

    /// Evaluate at one input voltage.
    pub fn value(&self, x: f64) -> f64 {
        let z = self.arg_scale * x;
        let f = match self.kind {
            TargetKind::Sine => z.sin(),
            TargetKind::Cube => z.powi(3),
            TargetKind::Sinc => sinc(z),
            TargetKind::Complex => z.sin() + z.powi(3) + sinc(z),
        };
        self.amplitude * f
    }
}

/// `sin(z)/z` with the limit value 1 at z = 0.
#[inline]
pub fn sinc(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.sin() / z
    }
}

/// Input/target pairs on the evenly spaced grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

/// Default grid resolution from the experiment protocol.
pub const GRID_POINTS: usize = 200;

/// Sample the target on `n_points` evenly spaced inputs over `[-1, 1]`.
pub fn gen_target(f: &TargetFunction, n_points: usize) -> Result<Dataset> {
    f.validate()?;
    if n_points < 2 {
        return Err(Error::Config(format!(
            "need at least 2 grid points, got {n_points}"
        )));
    }
    let step = 2.0 / (n_points - 1) as f64;
    let inputs: Vec<f64> = (0..n_points).map(|i| -1.0 + step * i as f64).collect();
    let targets = inputs.iter().map(|&x| f.value(x)).collect();
    Ok(Dataset { inputs, targets })
}

/// Root mean square of a nonempty sequence.
pub fn rms(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Input("rms of an empty sequence".into()));
    }
    let ms = values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64;
    Ok(ms.sqrt())
}

/// `100 * rms(pred - target) / rms(target)`.
pub fn percent_rms_error(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Input(format!(
            "prediction and target lengths differ or are empty ({} vs {})",
            pred.len(),
            target.len()
        )));
    }
    let target_rms = rms(target)?;
    if target_rms == 0.0 {
        return Err(Error::Input("target RMS is zero".into()));
    }
    let diff: Vec<f64> = pred.iter().zip(target).map(|(p, t)| p - t).collect();
    Ok(100.0 * rms(&diff)? / target_rms)
}

/// Presentation order policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShuffleMode {
    Ordered,
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub epochs: usize,
    pub mode: ShuffleMode,
}

/// Flattened presentation order: `epochs * n` sample indices. Random mode
/// draws an independent permutation per epoch from the seeded stream.
pub fn make_schedule(n: usize, schedule: &Schedule) -> Vec<usize> {
    let mut order = Vec::with_capacity(schedule.epochs * n);
    match schedule.mode {
        ShuffleMode::Ordered => {
            for _ in 0..schedule.epochs {
                order.extend(0..n);
            }
        }
        ShuffleMode::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut epoch: Vec<usize> = (0..n).collect();
            for _ in 0..schedule.epochs {
                epoch.shuffle(&mut rng);
                order.extend_from_slice(&epoch);
            }
        }
    }
    order
}

/// Per-iteration training record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: u64,
    pub epoch: u32,
    /// Magnitude of this iteration's error.
    pub instant_error: f64,
    /// RMS of the most recent full epoch of instantaneous errors.
    pub rms_error: f64,
    /// `100 * rms_error / target RMS`.
    pub percent_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainingTrace {
    /// CSV with a fixed, locale-independent column order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,epoch,rms_error,percent_error")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{}",
                r.iteration, r.epoch, r.rms_error, r.percent_error
            )?;
        }
        Ok(())
    }
}

/// A phase of the step-size schedule: from this iteration on, use this
/// register value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddNoPhase {
    pub from_iteration: u64,
    pub add_no: u8,
}

/// Benchmark protocol defaults. The paper reports neither the random-weight
/// distribution nor the training budgets; these values were fixed by an
/// offline oracle search so that the qualitative figure shapes reproduce at
/// desk scale.
pub mod protocol {
    use super::*;

    pub const ACTIVATION_GAIN: f64 = 10.0;
    pub const WEIGHT_MIN: f64 = 0.9;
    pub const WEIGHT_RANGE: f64 = 1.1;
    pub const BIAS_RANGE: f64 = 0.05;
    pub const OFFSET_SPAN: f64 = 1.0;
    /// Training targets are divided by `READOUT_SCALE_FACTOR * amplitude`.
    pub const READOUT_SCALE_FACTOR: f64 = 2.0;
    pub const DEFAULT_BITS: u8 = 13;
    /// Budgets, in epochs over the 200-point grid.
    pub const TRAIN_EPOCHS: usize = 300;
    pub const BITS_SWEEP_EPOCHS: usize = 35;
    pub const SHUFFLE_SWEEP_EPOCHS: usize = 60;
    pub const CAPACITY_MAX_EPOCHS: usize = 600;
    pub const SCHEDULE_EPOCHS: usize = 200;
    /// Final sweep errors average the clean grid evaluation over this many
    /// trailing epoch boundaries to strip the one-LSB dither jitter.
    pub const SMOOTHING_WINDOW: usize = 10;
    pub const THRESHOLD_PERCENT: f64 = 3.0;
    /// Offset between a cell's network seed and its shuffle seed.
    pub const SHUFFLE_SEED_OFFSET: u64 = 1_000_003;

    /// The network configuration used by all figure reproductions.
    pub fn network(hidden_count: usize, seed: u64) -> NetworkConfig {
        NetworkConfig {
            input_dim: 1,
            hidden_count,
            output_dim: 1,
            weight_range: WEIGHT_RANGE,
            weight_min: WEIGHT_MIN,
            bias_range: BIAS_RANGE,
            offset_span: OFFSET_SPAN,
            activation_gain: ACTIVATION_GAIN,
            seed,
        }
    }
}

/// Everything needed for one hardware training run.
#[derive(Debug, Clone)]
pub struct HwRunConfig {
    pub network: NetworkConfig,
    pub target: TargetFunction,
    pub points: usize,
    pub bits: u8,
    /// Step-size schedule; empty means add_no = 0 throughout.
    pub add_no_schedule: Vec<AddNoPhase>,
    pub epochs: usize,
    pub shuffle: ShuffleMode,
    /// Targets are divided by this before training; predictions in nA are
    /// `readout_scale * sum(w h)`.
    pub readout_scale: f64,
    pub smoothing_window: usize,
    /// Record the per-iteration trace (sweeps leave this off).
    pub record_trace: bool,
}

impl HwRunConfig {
    /// Protocol defaults for a given target, hidden count and cell seed.
    pub fn protocol(target: TargetFunction, hidden_count: usize, seed: u64) -> Self {
        HwRunConfig {
            network: protocol::network(hidden_count, seed),
            target,
            points: GRID_POINTS,
            bits: protocol::DEFAULT_BITS,
            add_no_schedule: vec![],
            epochs: protocol::TRAIN_EPOCHS,
            shuffle: ShuffleMode::Random {
                seed: seed.wrapping_add(protocol::SHUFFLE_SEED_OFFSET),
            },
            readout_scale: protocol::READOUT_SCALE_FACTOR * target.amplitude,
            smoothing_window: protocol::SMOOTHING_WINDOW,
            record_trace: false,
        }
    }
}

/// Result of one hardware run. Percent errors are clean full-grid
/// evaluations at epoch boundaries; `final_percent` averages the last
/// `smoothing_window` of them, `last_percent` is the unsmoothed final one.
#[derive(Debug, Clone)]
pub struct HwRunResult {
    pub dlbs: DlbArray,
    pub trace: TrainingTrace,
    pub epoch_percent: Vec<f64>,
    pub final_percent: f64,
    pub last_percent: f64,
    /// Final RMS error in nA (smoothed, like `final_percent`).
    pub final_rms: f64,
    /// First 1-based epoch at which the percent error reached the threshold.
    pub epochs_to_threshold: Option<u32>,
    /// Threshold used for `epochs_to_threshold`.
    pub threshold_percent: f64,
}

/// Run the sign-based rule on the digital learning block over the protocol
/// grid. Training stops early once `stop_at_threshold` is reached, if given.
pub fn train_sol_hw(cfg: &HwRunConfig, stop_at_threshold: Option<f64>) -> Result<HwRunResult> {
    let net = init_network(&cfg.network)?;
    let dataset = gen_target(&cfg.target, cfg.points)?;
    run_sol_hw(&net, &dataset, cfg, stop_at_threshold)
}

/// As [`train_sol_hw`] with a prebuilt network (sweeps that share a network
/// across modes).
pub fn run_sol_hw(
    net: &TabNetwork,
    dataset: &Dataset,
    cfg: &HwRunConfig,
    stop_at_threshold: Option<f64>,
) -> Result<HwRunResult> {
    if cfg.readout_scale <= 0.0 || !cfg.readout_scale.is_finite() {
        return Err(Error::Config(format!(
            "readout_scale must be positive and finite, got {}",
            cfg.readout_scale
        )));
    }
    let n = dataset.inputs.len();
    if n == 0 {
        return Err(Error::Input("dataset is empty".into()));
    }
    let normalized: Vec<f64> = dataset
        .targets
        .iter()
        .map(|&t| t / cfg.readout_scale)
        .collect();
    let target_rms_norm = rms(&normalized)?;
    let target_rms_na = rms(&dataset.targets)?;

    let mut h_rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut sign_rows: Vec<Vec<bool>> = Vec::with_capacity(n);
    for &x in &dataset.inputs {
        let h = net.hidden_activations_scalar(x)?;
        sign_rows.push(h.iter().map(|&v| sign_bit(v)).collect());
        h_rows.push(h.as_slice().to_vec());
    }

    let initial_add_no = cfg
        .add_no_schedule
        .first()
        .filter(|p| p.from_iteration == 0)
        .map(|p| p.add_no)
        .unwrap_or(0);
    let mut dlbs = DlbArray::new(net.config.hidden_count, cfg.bits, initial_add_no)?;
    for w in cfg.add_no_schedule.windows(2) {
        if w[1].from_iteration <= w[0].from_iteration {
            return Err(Error::Config(
                "add_no schedule iterations must be strictly increasing".into(),
            ));
        }
    }

    let order = make_schedule(n, &Schedule {
        epochs: cfg.epochs,
        mode: cfg.shuffle,
    });

    let mut trace = TrainingTrace::default();
    let mut window: Vec<f64> = Vec::with_capacity(n);
    let mut epoch_percent = Vec::with_capacity(cfg.epochs);
    let mut epochs_to_threshold = None;
    let mut phase_idx = 0usize;
    let threshold = stop_at_threshold.unwrap_or(protocol::THRESHOLD_PERCENT);

    'outer: for epoch in 0..cfg.epochs {
        for step_in_epoch in 0..n {
            let iter = (epoch * n + step_in_epoch) as u64;
            // Advance the step-size schedule.
            while phase_idx < cfg.add_no_schedule.len()
                && cfg.add_no_schedule[phase_idx].from_iteration <= iter
            {
                dlbs.set_add_no(cfg.add_no_schedule[phase_idx].add_no)?;
                phase_idx += 1;
            }
            let idx = order[epoch * n + step_in_epoch];
            let h = &h_rows[idx];
            let y_pred = dlbs.predict(h);
            let error = normalized[idx] - y_pred;
            let sign_e = sign_bit(error);
            for (s, &sh) in dlbs.states.iter_mut().zip(&sign_rows[idx]) {
                *s = s.update(sign_e, sh);
            }
            if cfg.record_trace {
                let instant = error.abs();
                if window.len() == n {
                    window.remove(0);
                }
                window.push(instant);
                let win_rms = rms(&window)?;
                trace.records.push(TraceRecord {
                    iteration: iter,
                    epoch: epoch as u32,
                    instant_error: instant * cfg.readout_scale,
                    rms_error: win_rms * cfg.readout_scale,
                    percent_error: 100.0 * win_rms / target_rms_norm,
                });
            }
        }
        // Clean full-grid evaluation at the epoch boundary.
        let preds: Vec<f64> = h_rows.iter().map(|h| dlbs.predict(h)).collect();
        let pct = percent_rms_error(&preds, &normalized)?;
        epoch_percent.push(pct);
        if epochs_to_threshold.is_none() && pct <= threshold {
            epochs_to_threshold = Some(epoch as u32 + 1);
            if stop_at_threshold.is_some() {
                break 'outer;
            }
        }
    }

    let window_len = cfg.smoothing_window.max(1).min(epoch_percent.len().max(1));
    let (final_percent, last_percent) = if epoch_percent.is_empty() {
        (100.0, 100.0)
    } else {
        let tail = &epoch_percent[epoch_percent.len() - window_len..];
        (
            tail.iter().sum::<f64>() / tail.len() as f64,
            *epoch_percent.last().unwrap(),
        )
    };
    Ok(HwRunResult {
        dlbs,
        trace,
        epoch_percent,
        final_percent,
        last_percent,
        final_rms: final_percent / 100.0 * target_rms_na,
        epochs_to_threshold,
        threshold_percent: threshold,
    })
}

/// Convergence status recorded per sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    NotApplicable,
    Converged(u32),
    NotConverged,
}

impl Convergence {
    fn csv_field(&self) -> String {
        match self {
            Convergence::NotApplicable => String::new(),
            Convergence::Converged(e) => e.to_string(),
            Convergence::NotConverged => "nc".into(),
        }
    }
}

/// One sweep cell's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub swept_value: String,
    pub seed: u64,
    pub final_rms: f64,
    pub final_percent: f64,
    pub epochs_to_threshold: Convergence,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
}

/// Mean/variance summary for one swept value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub swept_value: String,
    pub mean_rms: f64,
    pub var_rms: f64,
    pub mean_percent: f64,
    pub var_percent: f64,
    pub median_percent: f64,
    /// Median epochs-to-threshold, counting not-converged cells as
    /// `max_epochs + 1`; None when not applicable.
    pub median_epochs: Option<f64>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "swept_value,seed,final_rms,final_percent,epochs_to_threshold"
        )?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.swept_value,
                r.seed,
                r.final_rms,
                r.final_percent,
                r.epochs_to_threshold.csv_field()
            )?;
        }
        Ok(())
    }

    /// Aggregate per swept value, in first-appearance order.
    pub fn summaries(&self, max_epochs: usize) -> Vec<SweepSummary> {
        let mut order: Vec<&str> = Vec::new();
        for r in &self.records {
            if !order.contains(&r.swept_value.as_str()) {
                order.push(&r.swept_value);
            }
        }
        order
            .into_iter()
            .map(|value| {
                let cells: Vec<&SweepRecord> = self
                    .records
                    .iter()
                    .filter(|r| r.swept_value == value)
                    .collect();
                let n = cells.len() as f64;
                let mean_rms = cells.iter().map(|c| c.final_rms).sum::<f64>() / n;
                let mean_percent = cells.iter().map(|c| c.final_percent).sum::<f64>() / n;
                let var_rms = cells
                    .iter()
                    .map(|c| (c.final_rms - mean_rms).powi(2))
                    .sum::<f64>()
                    / n;
                let var_percent = cells
                    .iter()
                    .map(|c| (c.final_percent - mean_percent).powi(2))
                    .sum::<f64>()
                    / n;
                let mut pcts: Vec<f64> = cells.iter().map(|c| c.final_percent).collect();
                pcts.sort_by(|a, b| a.total_cmp(b));
                let median_percent = median_sorted(&pcts);
                let applicable = cells
                    .iter()
                    .any(|c| c.epochs_to_threshold != Convergence::NotApplicable);
                let median_epochs = if applicable {
                    let mut epochs: Vec<f64> = cells
                        .iter()
                        .map(|c| match c.epochs_to_threshold {
                            Convergence::Converged(e) => e as f64,
                            _ => (max_epochs + 1) as f64,
                        })
                        .collect();
                    epochs.sort_by(|a, b| a.total_cmp(b));
                    Some(median_sorted(&epochs))
                } else {
                    None
                };
                SweepSummary {
                    swept_value: value.to_string(),
                    mean_rms,
                    var_rms,
                    mean_percent,
                    var_percent,
                    median_percent,
                    median_epochs,
                }
            })
            .collect()
    }
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Shared sweep parameters.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub target: TargetFunction,
    pub points: usize,
    pub n_seeds: usize,
    pub base_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            target: TargetFunction::new(TargetKind::Sinc),
            points: GRID_POINTS,
            n_seeds: 10,
            base_seed: 100,
        }
    }
}

/// Final RMS error versus counter width, 100 hidden neurons, fixed budget.
pub fn sweep_bits(
    cfg: &SweepConfig,
    hidden_count: usize,
    bits_list: &[u8],
    epochs: usize,
) -> Result<SweepResult> {
    let cells: Vec<(usize, u8, u64)> = bits_list
        .iter()
        .enumerate()
        .flat_map(|(bi, &bits)| {
            (0..cfg.n_seeds).map(move |s| {
                let cell_index = (bi * cfg.n_seeds + s) as u64;
                (s, bits, cell_index)
            })
        })
        .collect();
    let records: Vec<Result<SweepRecord>> = cells
        .par_iter()
        .map(|&(s, bits, cell_index)| {
            let seed = cfg.base_seed + cell_index;
            let mut run_cfg = HwRunConfig::protocol(cfg.target, hidden_count, seed);
            run_cfg.points = cfg.points;
            run_cfg.bits = bits;
            run_cfg.epochs = epochs;
            let res = train_sol_hw(&run_cfg, None)?;
            Ok(SweepRecord {
                swept_value: bits.to_string(),
                seed: cfg.base_seed + s as u64, // reported seed index within the bits group
                final_rms: res.final_rms,
                final_percent: res.final_percent,
                epochs_to_threshold: Convergence::NotApplicable,
            })
        })
        .collect();
    collect_records(records)
}

/// Percent error for random vs ordered presentation across hidden counts,
/// same iteration budget and same network per (hidden_count, seed) cell.
pub fn sweep_shuffle(
    cfg: &SweepConfig,
    hidden_counts: &[usize],
    epochs: usize,
) -> Result<SweepResult> {
    let cells: Vec<(usize, usize, u64)> = hidden_counts
        .iter()
        .enumerate()
        .flat_map(|(hi, &hc)| {
            (0..cfg.n_seeds).map(move |s| (hc, s, (hi * cfg.n_seeds + s) as u64))
        })
        .collect();
    let records: Vec<Result<Vec<SweepRecord>>> = cells
        .par_iter()
        .map(|&(hc, s, cell_index)| {
            let seed = cfg.base_seed + cell_index;
            let mut out = Vec::with_capacity(2);
            for ordered in [false, true] {
                let mut run_cfg = HwRunConfig::protocol(cfg.target, hc, seed);
                run_cfg.points = cfg.points;
                run_cfg.epochs = epochs;
                if ordered {
                    run_cfg.shuffle = ShuffleMode::Ordered;
                }
                let res = train_sol_hw(&run_cfg, None)?;
                out.push(SweepRecord {
                    swept_value: format!(
                        "{}-{}",
                        hc,
                        if ordered { "ordered" } else { "random" }
                    ),
                    seed: cfg.base_seed + s as u64,
                    final_rms: res.final_rms,
                    final_percent: res.final_percent,
                    epochs_to_threshold: Convergence::NotApplicable,
                });
            }
            Ok(out)
        })
        .collect();
    let mut flat = Vec::new();
    for r in records {
        flat.extend(r?);
    }
    Ok(SweepResult { records: flat })
}

/// Epochs to the error threshold versus hidden count, with a cap for
/// non-converging runs.
pub fn sweep_capacity(
    cfg: &SweepConfig,
    hidden_counts: &[usize],
    threshold_percent: f64,
    max_epochs: usize,
) -> Result<SweepResult> {
    let cells: Vec<(usize, usize, u64)> = hidden_counts
        .iter()
        .enumerate()
        .flat_map(|(hi, &hc)| {
            (0..cfg.n_seeds).map(move |s| (hc, s, (hi * cfg.n_seeds + s) as u64))
        })
        .collect();
    let records: Vec<Result<SweepRecord>> = cells
        .par_iter()
        .map(|&(hc, s, cell_index)| {
            let seed = cfg.base_seed + cell_index;
            let mut run_cfg = HwRunConfig::protocol(cfg.target, hc, seed);
            run_cfg.points = cfg.points;
            run_cfg.epochs = max_epochs;
            let res = train_sol_hw(&run_cfg, Some(threshold_percent))?;
            Ok(SweepRecord {
                swept_value: hc.to_string(),
                seed: cfg.base_seed + s as u64,
                final_rms: res.final_rms,
                final_percent: res.final_percent,
                epochs_to_threshold: match res.epochs_to_threshold {
                    Some(e) => Convergence::Converged(e),
                    None => Convergence::NotConverged,
                },
            })
        })
        .collect();
    collect_records(records)
}

/// Smallest hidden count whose median run converged, from a capacity sweep.
pub fn min_converging_hidden_count(
    result: &SweepResult,
    max_epochs: usize,
) -> Option<usize> {
    let mut best: Option<usize> = None;
    for s in result.summaries(max_epochs) {
        if let (Ok(hc), Some(med)) = (s.swept_value.parse::<usize>(), s.median_epochs) {
            if med <= max_epochs as f64 && best.map(|b| hc < b).unwrap_or(true) {
                best = Some(hc);
            }
        }
    }
    best
}

/// Variable vs fixed step-size comparison: one run with the given add_no
/// schedule and one with add_no = 0 throughout, identical network and
/// presentation order.
pub fn run_step_schedule(
    cfg: &SweepConfig,
    hidden_count: usize,
    schedule: &[AddNoPhase],
    epochs: usize,
) -> Result<(HwRunResult, HwRunResult)> {
    let seed = cfg.base_seed;
    let mut variable_cfg = HwRunConfig::protocol(cfg.target, hidden_count, seed);
    variable_cfg.points = cfg.points;
    variable_cfg.epochs = epochs;
    variable_cfg.add_no_schedule = schedule.to_vec();
    variable_cfg.record_trace = true;
    let mut fixed_cfg = variable_cfg.clone();
    fixed_cfg.add_no_schedule = vec![];
    let variable = train_sol_hw(&variable_cfg, None)?;
    let fixed = train_sol_hw(&fixed_cfg, None)?;
    Ok((variable, fixed))
}

/// The default schedule: coarse steps until iteration 2000, then finest.
pub fn default_step_schedule() -> Vec<AddNoPhase> {
    vec![
        AddNoPhase {
            from_iteration: 0,
            add_no: 3,
        },
        AddNoPhase {
            from_iteration: 2000,
            add_no: 0,
        },
    ]
}

fn collect_records(records: Vec<Result<SweepRecord>>) -> Result<SweepResult> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        out.push(r?);
    }
    Ok(SweepResult { records: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sinc_at_zero() {
        let f = TargetFunction::new(TargetKind::Sinc);
        assert_eq!(f.value(0.0), 100.0);
    }

    #[test]
    fn cube_at_minus_one() {
        let f = TargetFunction::new(TargetKind::Cube);
        assert_eq!(f.value(-1.0), -100.0);
    }

    #[test]
    fn sinc_grid_rms_anchor() {
        let ds = gen_target(&TargetFunction::new(TargetKind::Sinc), 200).unwrap();
        let r = rms(&ds.targets).unwrap();
        assert!((28.3..=28.9).contains(&r), "sinc grid RMS = {r}");
    }

    #[test]
    fn complex_uses_sinc_limit_at_zero() {
        let f = TargetFunction::new(TargetKind::Complex);
        // sin(0) + 0^3 + limit 1
        assert_eq!(f.value(0.0), 100.0);
    }

    #[test]
    fn gen_target_needs_two_points() {
        assert!(matches!(
            gen_target(&TargetFunction::new(TargetKind::Sine), 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn grid_is_sorted_and_spans_range() {
        let ds = gen_target(&TargetFunction::new(TargetKind::Sine), 200).unwrap();
        assert_eq!(ds.inputs.len(), 200);
        assert_eq!(ds.inputs[0], -1.0);
        assert_eq!(*ds.inputs.last().unwrap(), 1.0);
        assert!(ds.inputs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rms_values() {
        assert_relative_eq!(rms(&[3.0, 4.0, 0.0, 0.0]).unwrap(), 2.5);
        assert_relative_eq!(rms(&[-2.0, -2.0, -2.0]).unwrap(), 2.0);
        assert!(rms(&[]).is_err());
    }

    #[test]
    fn percent_error_cases() {
        let t = vec![1.0, -2.0, 3.0];
        assert_eq!(percent_rms_error(&t, &t).unwrap(), 0.0);
        assert_relative_eq!(
            percent_rms_error(&[0.0, 0.0, 0.0], &t).unwrap(),
            100.0
        );
        let scaled: Vec<f64> = t.iter().map(|v| 1.03 * v).collect();
        assert_relative_eq!(
            percent_rms_error(&scaled, &t).unwrap(),
            3.0,
            max_relative = 1e-12
        );
        assert!(percent_rms_error(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn schedule_counts_and_bijection() {
        let empty = make_schedule(
            10,
            &Schedule {
                epochs: 0,
                mode: ShuffleMode::Ordered,
            },
        );
        assert!(empty.is_empty());

        let order = make_schedule(
            200,
            &Schedule {
                epochs: 10,
                mode: ShuffleMode::Random { seed: 4 },
            },
        );
        assert_eq!(order.len(), 2000);
        for epoch in order.chunks(200) {
            let mut seen = [false; 200];
            for &i in epoch {
                assert!(!seen[i], "index {i} repeated within an epoch");
                seen[i] = true;
            }
        }
    }

    #[test]
    fn ordered_schedule_is_grid_order() {
        let order = make_schedule(
            5,
            &Schedule {
                epochs: 2,
                mode: ShuffleMode::Ordered,
            },
        );
        assert_eq!(order, vec![0, 1, 2, 3, 4, 0, 1, 2, 3, 4]);
    }

    #[test]
    fn percent_error_scale_invariant() {
        let t = vec![1.0, -2.0, 3.0, 0.5];
        let p = vec![1.1, -1.8, 2.9, 0.4];
        let a = percent_rms_error(&p, &t).unwrap();
        let ts: Vec<f64> = t.iter().map(|v| 7.5 * v).collect();
        let ps: Vec<f64> = p.iter().map(|v| 7.5 * v).collect();
        let b = percent_rms_error(&ps, &ts).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn hw_run_is_deterministic() {
        let cfg = HwRunConfig {
            epochs: 3,
            ..HwRunConfig::protocol(TargetFunction::new(TargetKind::Sinc), 20, 1)
        };
        let a = train_sol_hw(&cfg, None).unwrap();
        let b = train_sol_hw(&cfg, None).unwrap();
        assert_eq!(a.dlbs, b.dlbs);
        assert_eq!(a.epoch_percent, b.epoch_percent);
    }

    #[test]
    fn sweep_single_cell_shape() {
        let cfg = SweepConfig {
            n_seeds: 1,
            ..SweepConfig::default()
        };
        let res = sweep_bits(&cfg, 10, &[13], 2).unwrap();
        assert_eq!(res.records.len(), 1);
        assert_eq!(res.records[0].swept_value, "13");

        let res = sweep_shuffle(&cfg, &[20], 2).unwrap();
        assert_eq!(res.records.len(), 2); // random + ordered
    }

    #[test]
    fn capacity_marks_nonconverging_runs() {
        let cfg = SweepConfig {
            n_seeds: 2,
            ..SweepConfig::default()
        };
        // 3 neurons cannot represent the sinc target; cap at 2 epochs.
        let res = sweep_capacity(&cfg, &[3], 3.0, 2).unwrap();
        assert!(res
            .records
            .iter()
            .all(|r| r.epochs_to_threshold == Convergence::NotConverged));
        assert_eq!(min_converging_hidden_count(&res, 2), None);
    }

    #[test]
    fn degenerate_step_schedule_matches_fixed() {
        let cfg = SweepConfig {
            n_seeds: 1,
            base_seed: 7,
            ..SweepConfig::default()
        };
        let schedule = vec![AddNoPhase {
            from_iteration: 0,
            add_no: 0,
        }];
        let (variable, fixed) = run_step_schedule(&cfg, 15, &schedule, 3).unwrap();
        assert_eq!(variable.dlbs, fixed.dlbs);
        assert_eq!(variable.epoch_percent, fixed.epoch_percent);
    }

    #[test]
    fn sweeps_are_deterministic() {
        let cfg = SweepConfig {
            n_seeds: 2,
            ..SweepConfig::default()
        };
        let a = sweep_bits(&cfg, 10, &[8, 13], 2).unwrap();
        let b = sweep_bits(&cfg, 10, &[8, 13], 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_csv_format() {
        let mut trace = TrainingTrace::default();
        trace.records.push(TraceRecord {
            iteration: 0,
            epoch: 0,
            instant_error: 1.0,
            rms_error: 0.5,
            percent_error: 12.5,
        });
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "iteration,epoch,rms_error,percent_error\n0,0,0.5,12.5\n");
    }
}
