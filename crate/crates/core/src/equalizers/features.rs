use crate::channel::ReceivedSymbols;
use crate::error::{Error, Result};
use crate::txgen::SymbolFrame;

use super::{check_aligned, EqTapConfig};

/// Row-major matrix of feature vectors `[x(k-m) .. x(k+m), d(k-1) .. d(k-n)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub config: EqTapConfig,
    pub rows: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim())
    }
}

/// Writes the feature vector for symbol `k` into `out`.
///
/// `feedback[j]` holds `d(k-1-j)`; samples outside `x` and missing feedback
/// entries are zero.
pub fn fill_feature(x: &[f64], k: usize, cfg: &EqTapConfig, feedback: &[f64], out: &mut [f64]) {
    let m = cfg.half_window();
    let (ffe, dfe) = out.split_at_mut(cfg.ffe_taps);
    for (i, slot) in ffe.iter_mut().enumerate() {
        // x(k - m + i)
        *slot = (k + i)
            .checked_sub(m)
            .and_then(|idx| x.get(idx))
            .copied()
            .unwrap_or(0.0);
    }
    for (j, slot) in dfe.iter_mut().enumerate() {
        *slot = feedback.get(j).copied().unwrap_or(0.0);
    }
}

/// Training feature vectors for every `k` in `[m, len - m)`, with the true
/// symbols in the feedback slots. Returns the matrix and the level label of
/// each row.
pub fn build_train_features(
    rx: &ReceivedSymbols,
    labels: &SymbolFrame,
    cfg: &EqTapConfig,
) -> Result<(FeatureMatrix, Vec<u8>)> {
    cfg.validate()?;
    check_aligned(rx, labels)?;
    let m = cfg.half_window();
    let len = rx.len();
    if len < 2 * m + 1 || len <= cfg.dfe_taps {
        return Err(Error::TooShort(format!(
            "{len} symbols for a {}-tap FFE / {}-tap DFE window",
            cfg.ffe_taps, cfg.dfe_taps
        )));
    }
    let dim = cfg.dim();
    let rows = len - 2 * m;
    let mut data = vec![0.0; rows * dim];
    let mut feedback = vec![0.0; cfg.dfe_taps];
    for (r, out) in data.chunks_exact_mut(dim).enumerate() {
        let k = r + m;
        for (j, slot) in feedback.iter_mut().enumerate() {
            *slot = (k.checked_sub(j + 1)).map(|i| labels.symbols[i]).unwrap_or(0.0);
        }
        fill_feature(&rx.values, k, cfg, &feedback, out);
    }
    let targets = labels.level_index[m..len - m].to_vec();
    Ok((
        FeatureMatrix {
            config: *cfg,
            rows,
            data,
        },
        targets,
    ))
}
