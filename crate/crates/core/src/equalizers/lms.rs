//! LMS-adapted FFE&DFE baseline.

use serde::{Deserialize, Serialize};

use crate::channel::ReceivedSymbols;
use crate::error::{Error, Result};
use crate::txgen::{SymbolFrame, ALPHABET};

use super::features::fill_feature;
use super::{check_aligned, slice_level, EqTapConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmsParams {
    /// Step size, normalized by the mean power of the regressor.
    pub step: f64,
    /// Passes over the training block.
    pub epochs: usize,
}

impl Default for LmsParams {
    fn default() -> Self {
        Self { step: 1e-3, epochs: 3 }
    }
}

impl LmsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step >= 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "LMS step must be nonnegative, got {}",
                self.step
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmsModel {
    pub ffe_weights: Vec<f64>,
    pub dfe_weights: Vec<f64>,
    pub config: EqTapConfig,
    pub step_size: f64,
}

impl LmsModel {
    /// Centre FFE tap at one, everything else zero: a plain slicer.
    pub fn initial(config: EqTapConfig, step_size: f64) -> Self {
        let mut ffe_weights = vec![0.0; config.ffe_taps];
        ffe_weights[config.half_window()] = 1.0;
        Self {
            ffe_weights,
            dfe_weights: vec![0.0; config.dfe_taps],
            config,
            step_size,
        }
    }

    fn output(&self, fv: &[f64]) -> f64 {
        let (x, d) = fv.split_at(self.config.ffe_taps);
        let ff: f64 = self.ffe_weights.iter().zip(x).map(|(w, x)| w * x).sum();
        let fb: f64 = self.dfe_weights.iter().zip(d).map(|(w, d)| w * d).sum();
        ff + fb
    }
}

/// Windowed MSE at the end of training exceeded the one at the start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonconvergenceWarning {
    pub initial_mse: f64,
    pub final_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmsTraining {
    pub model: LmsModel,
    pub warning: Option<NonconvergenceWarning>,
}

/// Trains FFE and DFE weights on the first `train_length` symbols.
///
/// Training feeds the true symbols into the DFE taps. Each update is
/// `w += step * e * u / (eps + mean(u^2))` with `e = d(k) - y(k)`.
pub fn lms_train(
    rx: &ReceivedSymbols,
    labels: &SymbolFrame,
    cfg: &EqTapConfig,
    train_length: usize,
    params: &LmsParams,
) -> Result<LmsTraining> {
    cfg.validate()?;
    params.validate()?;
    check_aligned(rx, labels)?;
    if train_length > rx.len() {
        return Err(Error::TooShort(format!(
            "train_length {train_length} exceeds {} received symbols",
            rx.len()
        )));
    }
    if train_length <= cfg.warmup() {
        return Err(Error::TooShort(format!(
            "train_length {train_length} does not cover the {}-symbol warm-up",
            cfg.warmup()
        )));
    }
    let x = &rx.values[..train_length];
    let mut model = LmsModel::initial(*cfg, params.step);
    let dim = cfg.dim();
    let mut fv = vec![0.0; dim];
    let mut feedback = vec![0.0; cfg.dfe_taps];
    let mut sq_errors = Vec::with_capacity(train_length * params.epochs);

    for _ in 0..params.epochs {
        for k in 0..train_length {
            for (j, slot) in feedback.iter_mut().enumerate() {
                *slot = k.checked_sub(j + 1).map_or(0.0, |i| labels.symbols[i]);
            }
            fill_feature(x, k, cfg, &feedback, &mut fv);
            let e = labels.symbols[k] - model.output(&fv);
            sq_errors.push(e * e);
            let power = fv.iter().map(|v| v * v).sum::<f64>() / dim as f64;
            let g = params.step * e / (power + 1e-12);
            let (xs, ds) = fv.split_at(cfg.ffe_taps);
            for (w, u) in model.ffe_weights.iter_mut().zip(xs) {
                *w += g * u;
            }
            for (w, u) in model.dfe_weights.iter_mut().zip(ds) {
                *w += g * u;
            }
        }
    }

    let window = (sq_errors.len() / 4).clamp(1, 500);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let initial_mse = mean(&sq_errors[..window]);
    let final_mse = mean(&sq_errors[sq_errors.len() - window..]);
    let warning = (final_mse > initial_mse).then_some(NonconvergenceWarning { initial_mse, final_mse });
    if let Some(w) = warning {
        log::warn!(
            "LMS did not converge: windowed MSE {:.4e} -> {:.4e}",
            w.initial_mse,
            w.final_mse
        );
    }
    Ok(LmsTraining { model, warning })
}

/// Equalizes with frozen weights, slicing to the nearest level and feeding
/// the decisions back through the DFE taps.
pub fn lms_equalize(rx: &ReceivedSymbols, model: &LmsModel) -> Result<SymbolFrame> {
    let cfg = model.config;
    if model.ffe_weights.len() != cfg.ffe_taps || model.dfe_weights.len() != cfg.dfe_taps {
        return Err(Error::Dimension {
            expected: cfg.dim(),
            actual: model.ffe_weights.len() + model.dfe_weights.len(),
        });
    }
    if rx.len() <= cfg.half_window() {
        return Err(Error::TooShort(format!(
            "{} symbols for a {}-tap FFE window",
            rx.len(),
            cfg.ffe_taps
        )));
    }
    let mut levels = Vec::with_capacity(rx.len());
    let mut feedback = vec![0.0; cfg.dfe_taps];
    let mut fv = vec![0.0; cfg.dim()];
    for k in 0..rx.len() {
        fill_feature(&rx.values, k, &cfg, &feedback, &mut fv);
        let level = slice_level(model.output(&fv));
        levels.push(level);
        if !feedback.is_empty() {
            feedback.rotate_right(1);
            feedback[0] = ALPHABET[level as usize];
        }
    }
    Ok(SymbolFrame::from_levels(levels))
}
