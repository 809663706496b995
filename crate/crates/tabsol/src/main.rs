//! Command-line front end.
//!
//! Subcommands: `train` (fit a readout and save a model plus a training
//! trace), `eval` (reload the model and write grid predictions), `sweep`
//! (run one of the four experiment sweeps), and `vectors` (emit randomized
//! counter test vectors in the testbench stimulus format).
//!
//! The `TABSOL_SEED` environment variable, when set, overrides the network
//! seed with its value and the presentation-schedule seed with value + 1.

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

use tabsol::bench::{
    self, default_step_schedule, gen_target, percent_rms_error, HwRunConfig, Schedule,
    SweepConfig, SweepResult,
};
use tabsol::config::RunConfig;
use tabsol::dlb::{format_vector_line, DlbState};
use tabsol::error::{Error, Result};
use tabsol::model::{atomic_write, ModelFile};
use tabsol::net::init_network;
use tabsol::trainers::{train_online, TrainerKind};

#[derive(Parser)]
#[command(name = "tabsol", version, about = "Sign-based online learning on a tanh projection network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a readout and save the model and training trace.
    Train(CommonArgs),
    /// Evaluate a saved model on the target grid.
    Eval(CommonArgs),
    /// Run the sweep described by the config's [sweep] section.
    Sweep(CommonArgs),
    /// Emit randomized counter test vectors.
    Vectors(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output].dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    type CmdFn = fn(&RunConfig, &Path) -> Result<()>;
    let (args, run): (&CommonArgs, CmdFn) = match &cli.command {
        Command::Train(a) => (a, cmd_train),
        Command::Eval(a) => (a, cmd_eval),
        Command::Sweep(a) => (a, cmd_sweep),
        Command::Vectors(a) => (a, cmd_vectors),
    };
    if let Err(e) = dispatch(args, run) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(args: &CommonArgs, run: fn(&RunConfig, &Path) -> Result<()>) -> Result<()> {
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = RunConfig::load(&args.config)?;
    apply_seed_env(&mut cfg)?;
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    run(&cfg, &out_dir)
}

fn apply_seed_env(cfg: &mut RunConfig) -> Result<()> {
    if let Ok(v) = std::env::var("TABSOL_SEED") {
        let seed: u64 = v
            .parse()
            .map_err(|_| Error::Config(format!("TABSOL_SEED must be an integer, got \"{v}\"")))?;
        cfg.network.seed = seed;
        cfg.schedule.seed = seed.wrapping_add(1);
    }
    Ok(())
}

/// Build the hardware run description shared by `train` and the eval check.
fn hw_run_config(cfg: &RunConfig) -> Result<HwRunConfig> {
    let target = cfg.target.to_target();
    let readout_scale = cfg
        .emulator
        .readout_scale
        .unwrap_or(bench::protocol::READOUT_SCALE_FACTOR * target.amplitude);
    let mut schedule = cfg.schedule.add_no_schedule();
    if schedule.is_empty() && cfg.emulator.add_no != 0 {
        schedule = vec![bench::AddNoPhase {
            from_iteration: 0,
            add_no: cfg.emulator.add_no,
        }];
    }
    Ok(HwRunConfig {
        network: cfg.network.to_network_config(),
        target,
        points: cfg.target.points,
        bits: cfg.emulator.bits,
        add_no_schedule: schedule,
        epochs: cfg.schedule.epochs,
        shuffle: cfg.schedule.shuffle_mode()?,
        readout_scale,
        smoothing_window: bench::protocol::SMOOTHING_WINDOW,
        record_trace: true,
    })
}

fn cmd_train(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let network = cfg.network.to_network_config();
    let target = cfg.target.to_target();
    let model_path = out_dir.join(&cfg.output.model_file);
    let trace_path = out_dir.join("trace.csv");

    if cfg.trainer.kind == "sol-sign" {
        let run_cfg = hw_run_config(cfg)?;
        let res = bench::train_sol_hw(&run_cfg, None)?;
        let model = ModelFile::from_hw(&network, &res.dlbs, run_cfg.readout_scale);
        model.save(&model_path)?;
        write_trace(&trace_path, &res.trace)?;
        println!(
            "trained {} epochs: final error {:.3}% of target RMS",
            cfg.schedule.epochs, res.last_percent
        );
    } else {
        let net = init_network(&network)?;
        let dataset = gen_target(&target, cfg.target.points)?;
        let kind = float_trainer_kind(cfg)?;
        let schedule = Schedule {
            epochs: cfg.schedule.epochs,
            mode: cfg.schedule.shuffle_mode()?,
        };
        let (weights, trace) = train_online(&net, &kind, &dataset, &schedule)?;
        let model = ModelFile::from_real(&network, &weights);
        model.save(&model_path)?;
        write_trace(&trace_path, &trace)?;
        let last = trace.records.last().map(|r| r.percent_error).unwrap_or(100.0);
        println!(
            "trained {} epochs: final error {:.3}% of target RMS",
            cfg.schedule.epochs, last
        );
    }
    println!("wrote {}", model_path.display());
    println!("wrote {}", trace_path.display());
    Ok(())
}

fn float_trainer_kind(cfg: &RunConfig) -> Result<TrainerKind> {
    let default_gain = (1u64 << cfg.emulator.bits) as f64;
    Ok(match cfg.trainer.kind.as_str() {
        "opium" => TrainerKind::OpiumFull {
            init_scale: cfg.trainer.init_scale,
        },
        "opium-normalized" => TrainerKind::OpiumNormalized {
            init_scale: cfg.trainer.init_scale,
        },
        "lms" => TrainerKind::LmsConstantGain {
            gain: cfg.trainer.gain.unwrap_or(default_gain),
        },
        other => {
            return Err(Error::Config(format!(
                "trainer kind \"{other}\" has no floating-point path"
            )))
        }
    })
}

fn cmd_eval(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let model_path = out_dir.join(&cfg.output.model_file);
    let model = ModelFile::load(&model_path)?;
    let net = init_network(&model.network)?;
    let target = cfg.target.to_target();
    let dataset = gen_target(&target, cfg.target.points)?;

    let mut predictions = Vec::with_capacity(dataset.inputs.len());
    match &model.readout {
        tabsol::model::Readout::Hw { .. } => {
            let (dlbs, scale) = model.to_dlb_array()?;
            for &x in &dataset.inputs {
                let h = net.hidden_activations_scalar(x)?;
                predictions.push(scale * dlbs.predict(h.as_slice()));
            }
        }
        tabsol::model::Readout::Real { .. } => {
            let weights = model.to_output_weights()?;
            for &x in &dataset.inputs {
                let y = tabsol::net::predict(
                    &net,
                    &weights,
                    &nalgebra::DVector::from_element(1, x),
                )?;
                predictions.push(y[0]);
            }
        }
    }

    let pct = percent_rms_error(&predictions, &dataset.targets)?;
    let mut csv = String::from("x,target,predicted\n");
    for ((x, t), p) in dataset.inputs.iter().zip(&dataset.targets).zip(&predictions) {
        csv.push_str(&format!("{x},{t},{p}\n"));
    }
    let eval_path = out_dir.join("eval.csv");
    atomic_write(&eval_path, csv.as_bytes())?;
    println!("grid error {pct:.3}% of target RMS");
    println!("wrote {}", eval_path.display());
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [sweep] section".into()))?;
    let sweep_cfg = SweepConfig {
        target: cfg.target.to_target(),
        points: cfg.target.points,
        n_seeds: sweep.n_seeds,
        base_seed: sweep.base_seed,
    };
    let sweep_path = out_dir.join("sweep.csv");

    let (result, max_epochs) = match sweep.axis.as_str() {
        "bits" => {
            let epochs = sweep.epochs.unwrap_or(bench::protocol::BITS_SWEEP_EPOCHS);
            (
                bench::sweep_bits(&sweep_cfg, cfg.network.hidden_count, &sweep.bits, epochs)?,
                epochs,
            )
        }
        "shuffle" => {
            let epochs = sweep
                .epochs
                .unwrap_or(bench::protocol::SHUFFLE_SWEEP_EPOCHS);
            (
                bench::sweep_shuffle(&sweep_cfg, &sweep.hidden_counts, epochs)?,
                epochs,
            )
        }
        "capacity" => {
            let epochs = sweep.epochs.unwrap_or(bench::protocol::CAPACITY_MAX_EPOCHS);
            let threshold = sweep
                .threshold_percent
                .unwrap_or(bench::protocol::THRESHOLD_PERCENT);
            let result = bench::sweep_capacity(&sweep_cfg, &sweep.hidden_counts, threshold, epochs)?;
            if let Some(hc) = bench::min_converging_hidden_count(&result, epochs) {
                println!("smallest converging hidden count: {hc}");
            } else {
                println!("no hidden count converged within {epochs} epochs");
            }
            (result, epochs)
        }
        "step-schedule" => {
            let epochs = sweep.epochs.unwrap_or(bench::protocol::SCHEDULE_EPOCHS);
            let mut phases = cfg.schedule.add_no_schedule();
            if phases.is_empty() {
                phases = default_step_schedule();
            }
            let (variable, fixed) =
                bench::run_step_schedule(&sweep_cfg, cfg.network.hidden_count, &phases, epochs)?;
            write_trace(&out_dir.join("variable_trace.csv"), &variable.trace)?;
            write_trace(&out_dir.join("fixed_trace.csv"), &fixed.trace)?;
            println!(
                "variable step: final {:.3}%; fixed step: final {:.3}%",
                variable.final_percent, fixed.final_percent
            );
            let result = SweepResult {
                records: vec![
                    bench::SweepRecord {
                        swept_value: "variable".into(),
                        seed: sweep.base_seed,
                        final_rms: variable.final_rms,
                        final_percent: variable.final_percent,
                        epochs_to_threshold: bench::Convergence::NotApplicable,
                    },
                    bench::SweepRecord {
                        swept_value: "fixed".into(),
                        seed: sweep.base_seed,
                        final_rms: fixed.final_rms,
                        final_percent: fixed.final_percent,
                        epochs_to_threshold: bench::Convergence::NotApplicable,
                    },
                ],
            };
            (result, epochs)
        }
        other => {
            return Err(Error::Config(format!(
                "unknown sweep axis \"{other}\""
            )))
        }
    };

    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    atomic_write(&sweep_path, &buf)?;
    for s in result.summaries(max_epochs) {
        let epochs = s
            .median_epochs
            .map(|e| format!(", median epochs {e}"))
            .unwrap_or_default();
        println!(
            "{}: mean {:.3}% (var {:.4}){epochs}",
            s.swept_value, s.mean_percent, s.var_percent
        );
    }
    println!("wrote {}", sweep_path.display());
    Ok(())
}

fn cmd_vectors(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let bits = cfg.emulator.bits;
    DlbState::new(bits, 0)?; // validate the width once
    let max_add_no = (bits - 1).min(7);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.network.seed);
    let mut lines = String::new();
    for _ in 0..cfg.output.vector_count {
        let state = DlbState {
            mag_w: rng.gen_range(0..(1u32 << bits)),
            sign_w: rng.gen(),
            add_no: rng.gen_range(0..=max_add_no),
            bits,
        };
        let line = format_vector_line(&state, rng.gen(), rng.gen());
        lines.push_str(&line);
        lines.push('\n');
    }
    let path = out_dir.join("vectors.txt");
    atomic_write(&path, lines.as_bytes())?;
    println!(
        "wrote {} ({} vectors, {}-bit counters)",
        path.display(),
        cfg.output.vector_count,
        bits
    );
    Ok(())
}

fn write_trace(path: &Path, trace: &bench::TrainingTrace) -> Result<()> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    atomic_write(path, &buf)
}
