//! Real-valued online learning rules for the readout weights, from the full
//! recursive pseudoinverse update down to the sign-sign rule, plus the batch
//! SVD pseudoinverse solver used as the offline reference.
//!
//! The rules form a simplification chain:
//!
//! ```text
//! full:        phi = (theta h) / (1 + h' theta h),  theta <- theta - phi (h' theta)
//! normalized:  phi = h / (1/c + h' h)
//! constant:    phi = h / N
//! sign-sign:   dw_i = sign(e) sign(h_i) / N
//! ```
//!
//! and every rule applies `W <- W + e phi'` with `e = y - W h`.

use nalgebra::{DMatrix, DVector};

use crate::bench::{make_schedule, Dataset, Schedule, TraceRecord, TrainingTrace};
use crate::error::{Error, Result};
use crate::net::{sign_bit, sign_value, OutputWeights, TabNetwork};

/// Running inverse of the hidden-activation autocorrelation matrix.
///
/// Initialized as `theta = c I`; a large `c` makes the recursion converge to
/// the true pseudoinverse solution.
#[derive(Debug, Clone)]
pub struct OpiumState {
    pub theta: DMatrix<f64>,
    pub init_scale: f64,
}

impl OpiumState {
    pub fn new(hidden_count: usize, init_scale: f64) -> Result<Self> {
        if init_scale <= 0.0 || !init_scale.is_finite() {
            return Err(Error::Config(format!(
                "init_scale must be positive and finite, got {init_scale}"
            )));
        }
        Ok(OpiumState {
            theta: DMatrix::identity(hidden_count, hidden_count) * init_scale,
            init_scale,
        })
    }
}

/// Which update rule to apply in [`train_online`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainerKind {
    OpiumFull { init_scale: f64 },
    OpiumNormalized { init_scale: f64 },
    LmsConstantGain { gain: f64 },
    SolSign { gain: f64 },
}

impl TrainerKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TrainerKind::OpiumFull { init_scale } | TrainerKind::OpiumNormalized { init_scale } => {
                if init_scale <= 0.0 {
                    return Err(Error::Config(format!(
                        "init_scale must be positive, got {init_scale}"
                    )));
                }
            }
            TrainerKind::LmsConstantGain { gain } | TrainerKind::SolSign { gain } => {
                if gain <= 0.0 {
                    return Err(Error::Config(format!("gain must be positive, got {gain}")));
                }
            }
        }
        Ok(())
    }
}

/// Everything one step saw and did: activation, target, prediction made with
/// the pre-update weights, error and applied gain vector. `normalizer` is the
/// scalar denominator of the step (the variable gain `N_var` for the
/// normalized rule, `N` for the constant-gain rules).
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub h: DVector<f64>,
    pub y_target: DVector<f64>,
    pub y_pred: DVector<f64>,
    pub error: DVector<f64>,
    pub phi: DVector<f64>,
    pub normalizer: f64,
}

fn check_dims(weights: &OutputWeights, h: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
    if weights.matrix.ncols() != h.len() || weights.matrix.nrows() != y.len() {
        return Err(Error::Input(format!(
            "dimension mismatch: W is {}x{}, h has length {}, y has length {}",
            weights.matrix.nrows(),
            weights.matrix.ncols(),
            h.len(),
            y.len()
        )));
    }
    Ok(())
}

/// One full recursive-pseudoinverse step.
///
/// `phi = (theta h) / (1 + h' theta h)`, `W <- W + (y - W h) phi'` and the
/// symmetric rank-one downdate `theta <- theta - (theta h)(theta h)' / (1 + h' theta h)`.
pub fn opium_step(
    state: &mut OpiumState,
    weights: &mut OutputWeights,
    h: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<StepRecord> {
    check_dims(weights, h, y)?;
    if state.theta.nrows() != h.len() {
        return Err(Error::Input(format!(
            "theta is {}x{}, h has length {}",
            state.theta.nrows(),
            state.theta.ncols(),
            h.len()
        )));
    }
    let u = &state.theta * h; // theta h
    let denom = 1.0 + h.dot(&u);
    if !denom.is_finite() || denom <= 0.0 {
        return Err(Error::Numeric(format!(
            "theta update denominator is {denom}; the inverse autocorrelation has blown up"
        )));
    }
    let phi = &u / denom;
    let y_pred = &weights.matrix * h;
    let error = y - &y_pred;
    weights.matrix += &error * phi.transpose();
    // theta - u u' / denom keeps theta exactly symmetric (f64 multiplication
    // commutes, so entry (i,j) equals entry (j,i) bit-for-bit).
    state.theta.ger(-1.0 / denom, &u, &u, 1.0);
    if state.theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("theta contains non-finite entries".into()));
    }
    Ok(StepRecord {
        h: h.clone(),
        y_target: y.clone(),
        y_pred,
        error,
        phi,
        normalizer: denom,
    })
}

/// Normalized simplification: `phi = h / (1/c + h' h)`.
pub fn opium_normalized_step(
    weights: &mut OutputWeights,
    h: &DVector<f64>,
    y: &DVector<f64>,
    init_scale: f64,
) -> Result<StepRecord> {
    check_dims(weights, h, y)?;
    if init_scale <= 0.0 {
        return Err(Error::Config(format!(
            "init_scale must be positive, got {init_scale}"
        )));
    }
    let n_var = 1.0 / init_scale + h.dot(h);
    let phi = h / n_var;
    let y_pred = &weights.matrix * h;
    let error = y - &y_pred;
    weights.matrix += &error * phi.transpose();
    Ok(StepRecord {
        h: h.clone(),
        y_target: y.clone(),
        y_pred,
        error,
        phi,
        normalizer: n_var,
    })
}

/// Constant-gain rule: `W <- W + e (h / N)'`.
pub fn lms_step(
    weights: &mut OutputWeights,
    h: &DVector<f64>,
    y: &DVector<f64>,
    gain: f64,
) -> Result<StepRecord> {
    check_dims(weights, h, y)?;
    if gain <= 0.0 {
        return Err(Error::Config(format!("gain must be positive, got {gain}")));
    }
    let phi = h / gain;
    let y_pred = &weights.matrix * h;
    let error = y - &y_pred;
    weights.matrix += &error * phi.transpose();
    Ok(StepRecord {
        h: h.clone(),
        y_target: y.clone(),
        y_pred,
        error,
        phi,
        normalizer: gain,
    })
}

/// Sign-sign rule: every weight moves by exactly `1/N`, direction given by
/// `sign(e) * sign(h_i)`. Multi-output networks apply the rule per output row
/// with that row's error sign.
pub fn sol_step(
    weights: &mut OutputWeights,
    h: &DVector<f64>,
    y: &DVector<f64>,
    gain: f64,
) -> Result<StepRecord> {
    check_dims(weights, h, y)?;
    if gain <= 0.0 {
        return Err(Error::Config(format!("gain must be positive, got {gain}")));
    }
    let y_pred = &weights.matrix * h;
    let error = y - &y_pred;
    let step = 1.0 / gain;
    for k in 0..weights.matrix.nrows() {
        let se = sign_value(sign_bit(error[k]));
        for i in 0..weights.matrix.ncols() {
            weights.matrix[(k, i)] += se * sign_value(sign_bit(h[i])) * step;
        }
    }
    let phi = h.map(|v| sign_value(sign_bit(v)) / gain);
    Ok(StepRecord {
        h: h.clone(),
        y_target: y.clone(),
        y_pred,
        error,
        phi,
        normalizer: gain,
    })
}

/// Batch minimum-norm least squares via SVD: `W' = H^+ Y`.
///
/// `h` is `n x L` (one activation row per sample), `y` is `n x K`. Singular
/// values below `rcond * sigma_max` are truncated.
pub fn svd_batch_solve(h: &DMatrix<f64>, y: &DMatrix<f64>, rcond: f64) -> Result<OutputWeights> {
    if h.nrows() == 0 || h.nrows() != y.nrows() {
        return Err(Error::Input(format!(
            "H has {} rows, Y has {} rows",
            h.nrows(),
            y.nrows()
        )));
    }
    if h.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Input("H and Y must be finite".into()));
    }
    let svd = h.clone().svd(true, true);
    let (u, vt) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numeric("SVD did not converge".into())),
    };
    let sigma_max = svd.singular_values.max();
    let tol = rcond * sigma_max;
    // W' = V S^+ U' Y
    let uty = u.transpose() * y; // r x K
    let mut scaled = uty;
    for (i, row_scale) in svd.singular_values.iter().enumerate() {
        let inv = if *row_scale > tol { 1.0 / row_scale } else { 0.0 };
        for k in 0..scaled.ncols() {
            scaled[(i, k)] *= inv;
        }
    }
    let wt = vt.transpose() * scaled; // L x K
    Ok(OutputWeights {
        matrix: wt.transpose(),
    })
}

/// Default truncation threshold for [`svd_batch_solve`].
pub const DEFAULT_RCOND: f64 = 1e-12;

/// Drive a step rule over a dataset, one sample at a time, in the order given
/// by the schedule. Weights start at zero. The trace records the per-iteration
/// instantaneous error, the RMS of the most recent full epoch of errors and
/// the percent RMS error versus the target RMS.
pub fn train_online(
    net: &TabNetwork,
    trainer: &TrainerKind,
    dataset: &Dataset,
    schedule: &Schedule,
) -> Result<(OutputWeights, TrainingTrace)> {
    trainer.validate()?;
    if dataset.inputs.is_empty() {
        return Err(Error::Input("dataset is empty".into()));
    }
    let l = net.config.hidden_count;
    let n = dataset.inputs.len();
    let target_rms = crate::bench::rms(&dataset.targets)?;

    // Frozen encoder: activations per grid point are computed once.
    let mut h_rows = Vec::with_capacity(n);
    for &x in &dataset.inputs {
        h_rows.push(net.hidden_activations_scalar(x)?);
    }

    let mut weights = OutputWeights::zeros(net.config.output_dim, l);
    let mut state = match trainer {
        TrainerKind::OpiumFull { init_scale } => Some(OpiumState::new(l, *init_scale)?),
        _ => None,
    };

    let order = make_schedule(n, schedule);
    let mut trace = TrainingTrace::default();
    let mut window: Vec<f64> = Vec::with_capacity(n);
    for (iter, &idx) in order.iter().enumerate() {
        let h = &h_rows[idx];
        let y = DVector::from_element(1, dataset.targets[idx]);
        let record = match trainer {
            TrainerKind::OpiumFull { .. } => {
                opium_step(state.as_mut().unwrap(), &mut weights, h, &y)?
            }
            TrainerKind::OpiumNormalized { init_scale } => {
                opium_normalized_step(&mut weights, h, &y, *init_scale)?
            }
            TrainerKind::LmsConstantGain { gain } => lms_step(&mut weights, h, &y, *gain)?,
            TrainerKind::SolSign { gain } => sol_step(&mut weights, h, &y, *gain)?,
        };
        let instant = record.error.norm();
        if window.len() == n {
            window.remove(0);
        }
        window.push(instant);
        let win_rms = crate::bench::rms(&window)?;
        trace.records.push(TraceRecord {
            iteration: iter as u64,
            epoch: (iter / n) as u32,
            instant_error: instant,
            rms_error: win_rms,
            percent_error: if target_rms > 0.0 {
                100.0 * win_rms / target_rms
            } else {
                0.0
            },
        });
    }
    Ok((weights, trace))
}
