//! Bit-exact emulation of the digital learning block: one sign/magnitude
//! counter per hidden-to-output connection, updated by the XOR of the error
//! sign and the activation sign.
//!
//! Update rule per clock:
//!
//! ```text
//! add_count = 1 << add_no
//! decr      = signE ^ signH
//! if signW ^ decr { magW -= add_count } else { magW += add_count }
//! ```
//!
//! A subtraction past zero reflects: the sign bit flips and the magnitude
//! becomes the overshoot (`magW <- add_count - magW`), which keeps the signed
//! value arithmetic exact. An addition past the counter maximum saturates.
//! The represented weight is `(-1)^signW * magW / 2^bits`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{sign_bit, TabNetwork};
use crate::trainers::StepRecord;
use nalgebra::DVector;

/// One connection's counter state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DlbState {
    /// Magnitude counter, `0 ..= 2^bits - 1`.
    pub mag_w: u32,
    /// Weight sign bit; `true` (1) is negative.
    pub sign_w: bool,
    /// Step register, 0..=7; the update moves the counter by `2^add_no`.
    pub add_no: u8,
    /// Counter width in bits.
    pub bits: u8,
}

impl DlbState {
    pub fn new(bits: u8, add_no: u8) -> Result<Self> {
        if !(4..=16).contains(&bits) {
            return Err(Error::Config(format!(
                "counter width must be 4..=16 bits, got {bits}"
            )));
        }
        check_add_no(bits, add_no)?;
        Ok(DlbState {
            mag_w: 0,
            sign_w: false,
            add_no,
            bits,
        })
    }

    /// Largest representable magnitude, `2^bits - 1`.
    #[inline]
    pub fn max_mag(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    /// Weight normalizer `N = 2^bits`; one counter LSB is a weight of `1/N`.
    #[inline]
    pub fn normalizer(&self) -> f64 {
        (1u64 << self.bits) as f64
    }

    /// `(-1)^signW * magW / 2^bits`.
    #[inline]
    pub fn weight_value(&self) -> f64 {
        let v = self.mag_w as f64 / self.normalizer();
        if self.sign_w {
            -v
        } else {
            v
        }
    }

    /// One clock of the update rule. Total on all valid states.
    #[inline]
    pub fn update(self, sign_e: bool, sign_h: bool) -> DlbState {
        let add_count = 1u32 << self.add_no;
        let decr = sign_e ^ sign_h;
        let mut next = self;
        if self.sign_w ^ decr {
            if add_count > self.mag_w {
                // Underflow: flip sign, magnitude is the overshoot.
                next.sign_w = !self.sign_w;
                next.mag_w = add_count - self.mag_w;
            } else {
                next.mag_w = self.mag_w - add_count;
            }
        } else {
            next.mag_w = (self.mag_w + add_count).min(self.max_mag());
        }
        next
    }
}

fn check_add_no(bits: u8, add_no: u8) -> Result<()> {
    if add_no > 7 {
        return Err(Error::Config(format!(
            "add_no must be 0..=7, got {add_no}"
        )));
    }
    if bits < add_no + 1 {
        return Err(Error::Config(format!(
            "add_no {add_no} does not fit a {bits}-bit counter"
        )));
    }
    Ok(())
}

/// One counter per hidden neuron (single-output configuration). All states
/// share the same width and step register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlbArray {
    pub states: Vec<DlbState>,
}

impl DlbArray {
    pub fn new(count: usize, bits: u8, add_no: u8) -> Result<Self> {
        let proto = DlbState::new(bits, add_no)?;
        Ok(DlbArray {
            states: vec![proto; count],
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn bits(&self) -> u8 {
        self.states.first().map(|s| s.bits).unwrap_or(13)
    }

    /// Load a new value into the shared step register; counters keep their
    /// values.
    pub fn set_add_no(&mut self, value: u8) -> Result<()> {
        check_add_no(self.bits(), value)?;
        for s in &mut self.states {
            s.add_no = value;
        }
        Ok(())
    }

    /// Current real-valued weights.
    pub fn weights(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.weight_value()).collect()
    }

    /// Readout with the current counters: `sum_i w_i h_i`.
    pub fn predict(&self, h: &[f64]) -> f64 {
        self.states
            .iter()
            .zip(h)
            .map(|(s, &hi)| s.weight_value() * hi)
            .sum()
    }

    /// Clock every counter once with a shared error sign.
    pub fn update_all(&mut self, sign_e: bool, h: &[f64]) {
        for (s, &hi) in self.states.iter_mut().zip(h) {
            *s = s.update(sign_e, sign_bit(hi));
        }
    }
}

/// One full hardware training step on precomputed activations: predict with
/// the pre-update counters, derive the error sign, clock every counter.
pub fn sol_hw_step_activations(dlbs: &mut DlbArray, h: &[f64], y_target: f64) -> StepRecord {
    let y_pred = dlbs.predict(h);
    let error = y_target - y_pred;
    let sign_e = sign_bit(error);
    let before = dlbs.weights();
    dlbs.update_all(sign_e, h);
    let after = dlbs.weights();
    let phi = DVector::from_iterator(h.len(), before.iter().zip(&after).map(|(b, a)| a - b));
    StepRecord {
        h: DVector::from_row_slice(h),
        y_target: DVector::from_element(1, y_target),
        y_pred: DVector::from_element(1, y_pred),
        error: DVector::from_element(1, error),
        phi,
        normalizer: dlbs.states.first().map(|s| s.normalizer()).unwrap_or(1.0),
    }
}

/// As [`sol_hw_step_activations`], but computing the activations from the
/// network (single-input, single-output configuration).
pub fn sol_hw_step(
    net: &TabNetwork,
    dlbs: &mut DlbArray,
    x: f64,
    y_target: f64,
) -> Result<StepRecord> {
    if dlbs.len() != net.config.hidden_count {
        return Err(Error::Input(format!(
            "DLB array has {} states, network has {} hidden neurons",
            dlbs.len(),
            net.config.hidden_count
        )));
    }
    let h = net.hidden_activations_scalar(x)?;
    Ok(sol_hw_step_activations(dlbs, h.as_slice(), y_target))
}

/// One line of the HDL testbench stimulus format:
/// `mag_w_in sign_w_in add_no sign_e sign_h mag_w_out sign_w_out`, decimal.
pub fn format_vector_line(before: &DlbState, sign_e: bool, sign_h: bool) -> String {
    let after = before.update(sign_e, sign_h);
    format!(
        "{} {} {} {} {} {} {}",
        before.mag_w,
        before.sign_w as u8,
        before.add_no,
        sign_e as u8,
        sign_h as u8,
        after.mag_w,
        after.sign_w as u8
    )
}
