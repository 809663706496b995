//! Trained-model persistence.
//!
//! A model file stores the network hyperparameters (the frozen encoder is
//! reconstructed from them bit-identically) plus the trained readout: either
//! a real-valued matrix or the raw counter states of the hardware emulator.
//! Files are JSON; `f64` values round-trip exactly through serde's
//! shortest-representation formatting. Writes go through a temporary file in
//! the destination directory followed by a rename, so a crash never leaves a
//! half-written model behind.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dlb::{DlbArray, DlbState};
use crate::error::{Error, Result};
use crate::net::{NetworkConfig, OutputWeights};
use nalgebra::DMatrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Readout payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Readout {
    /// Real-valued `rows x cols` matrix, row-major.
    Real {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    },
    /// Counter states of the hardware emulator plus the output scale in nA.
    Hw {
        bits: u8,
        readout_scale: f64,
        counters: Vec<DlbState>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub network: NetworkConfig,
    pub readout: Readout,
}

impl ModelFile {
    pub fn from_real(network: &NetworkConfig, weights: &OutputWeights) -> Self {
        let m = &weights.matrix;
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            network: network.clone(),
            readout: Readout::Real {
                rows: m.nrows(),
                cols: m.ncols(),
                data,
            },
        }
    }

    pub fn from_hw(network: &NetworkConfig, dlbs: &DlbArray, readout_scale: f64) -> Self {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            network: network.clone(),
            readout: Readout::Hw {
                bits: dlbs.bits(),
                readout_scale,
                counters: dlbs.states.clone(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::Input(format!(
                "unsupported model format version {} (expected {})",
                self.version, MODEL_FORMAT_VERSION
            )));
        }
        self.network.validate()?;
        match &self.readout {
            Readout::Real { rows, cols, data } => {
                if rows * cols != data.len() {
                    return Err(Error::Input(format!(
                        "readout claims {rows}x{cols} but carries {} values",
                        data.len()
                    )));
                }
                if *cols != self.network.hidden_count || *rows != self.network.output_dim {
                    return Err(Error::Input(format!(
                        "readout shape {rows}x{cols} does not match network ({}x{})",
                        self.network.output_dim, self.network.hidden_count
                    )));
                }
            }
            Readout::Hw {
                bits,
                readout_scale,
                counters,
            } => {
                if counters.len() != self.network.hidden_count {
                    return Err(Error::Input(format!(
                        "{} counters for {} hidden neurons",
                        counters.len(),
                        self.network.hidden_count
                    )));
                }
                if !readout_scale.is_finite() || *readout_scale <= 0.0 {
                    return Err(Error::Input(format!(
                        "readout_scale must be positive and finite, got {readout_scale}"
                    )));
                }
                for (i, s) in counters.iter().enumerate() {
                    if s.bits != *bits {
                        return Err(Error::Input(format!(
                            "counter {i} has width {} but the model declares {bits}",
                            s.bits
                        )));
                    }
                    DlbState::new(s.bits, s.add_no)?;
                    if s.mag_w > s.max_mag() {
                        return Err(Error::Input(format!(
                            "counter {i} magnitude {} exceeds the {bits}-bit maximum",
                            s.mag_w
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Rebuild the real readout matrix (real models only).
    pub fn to_output_weights(&self) -> Result<OutputWeights> {
        match &self.readout {
            Readout::Real { rows, cols, data } => Ok(OutputWeights {
                matrix: DMatrix::from_row_slice(*rows, *cols, data),
            }),
            Readout::Hw { .. } => Err(Error::Input(
                "model holds counter states, not a real readout".into(),
            )),
        }
    }

    /// Rebuild the counter array (hardware models only).
    pub fn to_dlb_array(&self) -> Result<(DlbArray, f64)> {
        match &self.readout {
            Readout::Hw {
                readout_scale,
                counters,
                ..
            } => Ok((
                DlbArray {
                    states: counters.clone(),
                },
                *readout_scale,
            )),
            Readout::Real { .. } => Err(Error::Input(
                "model holds a real readout, not counter states".into(),
            )),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numeric(format!("model serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::Input(format!("model parse: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    /// Atomic save: write to a temporary sibling, then rename into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = self.to_json()?;
        atomic_write(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Write bytes to `path` via a temporary file in the same directory plus a
/// rename, so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(format!(".tmp.{}", std::process::id()));
    let tmp_path = std::path::PathBuf::from(tmp_name);
    let write = (|| {
        use std::io::Write;
        let mut f = std::fs::File::create(&tmp_path)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp_path, path)
    })();
    if write.is_err() {
        let _ = std::fs::remove_file(&tmp_path);
    }
    write.map_err(Error::Io)
}
