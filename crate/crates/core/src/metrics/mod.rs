//! Error counting, FEC bookkeeping and the sweep drivers.

mod report;
mod sweep;

pub use report::{write_csv, CSV_HEADER};
pub use sweep::{
    evaluate_equalizer, simulate, sweep_snr, sweep_training_length, threshold_crossing, EqOutcome, EqualizerKind,
    EqualizerSpec, Scenario, SeedRun, SweepPoint, XKind,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::txgen::{SymbolFrame, GRAY};

/// Pre-FEC BER thresholds.
pub struct FecThresholds;

impl FecThresholds {
    pub const RELAXED: f64 = 1e-2;
    pub const STRICT: f64 = 1e-3;
    /// Error floor level reported for the SVM receiver with saturation.
    pub const FLOOR: f64 = 3e-4;

    pub const ALL: [(&'static str, f64); 3] = [
        ("relaxed", Self::RELAXED),
        ("strict", Self::STRICT),
        ("floor", Self::FLOOR),
    ];
}

/// Minimum bit errors for a BER point to count as reliable.
pub const MIN_RELIABLE_ERRORS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerResult {
    pub bit_errors: u64,
    pub symbol_errors: u64,
    pub bits_total: u64,
    pub symbols_total: u64,
    pub ber: f64,
    pub ser: f64,
    pub skip_prefix: usize,
}

impl BerResult {
    pub fn from_counts(bit_errors: u64, symbol_errors: u64, symbols_total: u64, skip_prefix: usize) -> Self {
        let bits_total = 2 * symbols_total;
        let ratio = |e: u64, n: u64| if n == 0 { 0.0 } else { e as f64 / n as f64 };
        Self {
            bit_errors,
            symbol_errors,
            bits_total,
            symbols_total,
            ber: ratio(bit_errors, bits_total),
            ser: ratio(symbol_errors, symbols_total),
            skip_prefix,
        }
    }

    /// Pools the counts of two results.
    pub fn merge(&self, other: &BerResult) -> BerResult {
        BerResult::from_counts(
            self.bit_errors + other.bit_errors,
            self.symbol_errors + other.symbol_errors,
            self.symbols_total + other.symbols_total,
            self.skip_prefix,
        )
    }

    pub fn low_confidence(&self) -> bool {
        self.bit_errors < MIN_RELIABLE_ERRORS
    }
}

/// Compares decided and true symbols after dropping `skip_prefix` warm-up symbols.
pub fn count_errors(decided: &SymbolFrame, truth: &SymbolFrame, skip_prefix: usize) -> Result<BerResult> {
    if decided.len() != truth.len() {
        return Err(Error::Alignment(format!(
            "{} decided symbols vs {} true symbols",
            decided.len(),
            truth.len()
        )));
    }
    if skip_prefix >= truth.len() {
        return Err(Error::TooShort(format!(
            "skip prefix {skip_prefix} leaves nothing of {} symbols",
            truth.len()
        )));
    }
    let (mut bit_errors, mut symbol_errors) = (0u64, 0u64);
    for (&d, &t) in decided.level_index[skip_prefix..]
        .iter()
        .zip(&truth.level_index[skip_prefix..])
    {
        if d != t {
            symbol_errors += 1;
            let (a, b) = (GRAY[d as usize], GRAY[t as usize]);
            bit_errors += ((a.0 ^ b.0) + (a.1 ^ b.1)) as u64;
        }
    }
    Ok(BerResult::from_counts(
        bit_errors,
        symbol_errors,
        (truth.len() - skip_prefix) as u64,
        skip_prefix,
    ))
}
