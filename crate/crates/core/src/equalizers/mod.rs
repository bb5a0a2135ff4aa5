//! Receivers: the LMS-adapted FFE&DFE baseline and the linear-SVM equalizer
//! built on decision-feedback feature vectors.

mod features;
mod lms;
mod svm;

pub use features::{build_train_features, fill_feature, FeatureMatrix};
pub use lms::{lms_equalize, lms_train, LmsModel, LmsParams, LmsTraining, NonconvergenceWarning};
pub use svm::{
    hinge_objective, svm_classify, svm_equalize, svm_equalize_genie, svm_train, train_binary, Hyperplane,
    OrdinalWarning, SvmModel, SvmParams, SvmSolver, TrainingMeta, BIAS_FEATURE, MIN_DUAL_UPDATES,
};

use serde::{Deserialize, Serialize};

use crate::channel::ReceivedSymbols;
use crate::error::{Error, Result};
use crate::txgen::SymbolFrame;

/// FFE window length (`2m + 1`) and DFE depth (`n`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EqTapConfig {
    pub ffe_taps: usize,
    pub dfe_taps: usize,
}

impl EqTapConfig {
    pub const LIGHTWEIGHT: EqTapConfig = EqTapConfig {
        ffe_taps: 9,
        dfe_taps: 3,
    };
    pub const ENHANCED: EqTapConfig = EqTapConfig {
        ffe_taps: 31,
        dfe_taps: 5,
    };

    pub fn new(ffe_taps: usize, dfe_taps: usize) -> Result<Self> {
        let cfg = Self { ffe_taps, dfe_taps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ffe_taps == 0 || self.ffe_taps.is_multiple_of(2) {
            return Err(Error::InvalidTaps(format!(
                "ffe_taps must be odd, got {}",
                self.ffe_taps
            )));
        }
        Ok(())
    }

    /// Half window `m`.
    pub fn half_window(&self) -> usize {
        self.ffe_taps / 2
    }

    /// Feature vector length `2m + 1 + n`.
    pub fn dim(&self) -> usize {
        self.ffe_taps + self.dfe_taps
    }

    /// Warm-up symbols excluded from error counting.
    pub fn warmup(&self) -> usize {
        self.half_window().max(self.dfe_taps)
    }
}

/// Nearest-level decision with thresholds at -2, 0, +2; ties go to the lower level.
pub fn slice_level(y: f64) -> u8 {
    if y <= -2.0 {
        0
    } else if y <= 0.0 {
        1
    } else if y <= 2.0 {
        2
    } else {
        3
    }
}

/// Memoryless slicer receiver.
pub fn slicer_equalize(rx: &ReceivedSymbols) -> SymbolFrame {
    SymbolFrame::from_levels(rx.values.iter().map(|&v| slice_level(v)).collect())
}

pub(crate) fn check_aligned(rx: &ReceivedSymbols, labels: &SymbolFrame) -> Result<()> {
    if !rx.aligned {
        return Err(Error::Alignment("received symbols are not delay-compensated".into()));
    }
    if rx.len() != labels.len() {
        return Err(Error::Alignment(format!(
            "{} received symbols vs {} labels",
            rx.len(),
            labels.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        assert_eq!(EqTapConfig::LIGHTWEIGHT.dim(), 12);
        assert_eq!(EqTapConfig::ENHANCED.dim(), 36);
        assert_eq!(EqTapConfig::ENHANCED.half_window(), 15);
        assert_eq!(EqTapConfig::LIGHTWEIGHT.warmup(), 4);
        assert!(EqTapConfig::new(10, 2).is_err());
        assert!(EqTapConfig::new(0, 2).is_err());
        assert!(EqTapConfig::new(1, 0).is_ok());
    }

    #[test]
    fn slicer_midpoints_tie_low() {
        assert_eq!(slice_level(-2.0), 0);
        assert_eq!(slice_level(-1.999), 1);
        assert_eq!(slice_level(0.0), 1);
        assert_eq!(slice_level(2.0), 2);
        assert_eq!(slice_level(2.5), 3);
        let out = slicer_equalize(&ReceivedSymbols::aligned(vec![-2.9, 0.8]));
        assert_eq!(out.symbols, vec![-3.0, 1.0]);
    }
}
