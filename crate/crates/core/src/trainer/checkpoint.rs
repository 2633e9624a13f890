//! Training checkpoints and loss-curve export.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, TrainConfig, TrainOutcome};
use crate::generator::LearnedModel;
use crate::{Error, Result};

/// Learned model plus optimizer state and loss curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: LearnedModel,
    pub adam: AdamState,
    pub config: TrainConfig,
    pub initial_train_loss: f64,
    pub train_loss: Vec<f64>,
    /// `null` entries mark epochs without a validation set.
    pub val_loss: Vec<Option<f64>>,
}

impl Checkpoint {
    pub fn from_outcome(outcome: &TrainOutcome, config: &TrainConfig, d: usize, dt: f64) -> Result<Self> {
        Ok(Checkpoint {
            model: LearnedModel::from_params(&outcome.params, d, dt)?,
            adam: outcome.adam.clone(),
            config: config.clone(),
            initial_train_loss: outcome.initial_train_loss,
            train_loss: outcome.train_loss.clone(),
            val_loss: outcome.val_loss.iter().map(|v| v.is_finite().then_some(*v)).collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Checkpoint = serde_json::from_str(&text)?;
        c.model.params()?;
        Ok(c)
    }
}

/// `epoch,train_loss,val_loss` rows; epoch 0 is the initial loss.
pub fn write_loss_curves(path: &Path, initial: f64, train: &[f64], val: &[f64]) -> Result<()> {
    let mut s = String::from("epoch,train_loss,val_loss\n");
    let _ = writeln!(s, "0,{initial:.16e},");
    for (i, (t, v)) in train.iter().zip(val).enumerate() {
        let v = if v.is_finite() { format!("{v:.16e}") } else { String::new() };
        let _ = writeln!(s, "{},{t:.16e},{v}", i + 1);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
