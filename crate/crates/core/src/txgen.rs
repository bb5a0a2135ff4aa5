//! Transmit side: PRBS15 bit source, Gray-coded PAM4 mapping, upsampling and
//! root-raised-cosine pulse shaping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter;

/// Period of the PRBS15 sequence, 2^15 - 1.
pub const PRBS15_PERIOD: usize = (1 << 15) - 1;

/// PAM4 amplitude alphabet, indexed by level.
pub const ALPHABET: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];

/// Gray code of each level as the bit pair (msb, lsb).
pub const GRAY: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 1), (1, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitOrigin {
    Prbs15,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSequence {
    pub bits: Vec<u8>,
    pub origin: BitOrigin,
}

impl BitSequence {
    /// Wraps externally supplied bits; any nonzero value is read as 1.
    pub fn external(bits: impl IntoIterator<Item = u8>) -> Self {
        Self {
            bits: bits.into_iter().map(|b| (b != 0) as u8).collect(),
            origin: BitOrigin::External,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Ground-truth PAM4 symbols together with the bits that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: Vec<f64>,
    pub source_bits: BitSequence,
    pub level_index: Vec<u8>,
}

impl SymbolFrame {
    /// Builds a frame from level indices in `0..4`, regenerating the Gray bits.
    ///
    /// Panics if any index is outside `0..4`.
    pub fn from_levels(levels: Vec<u8>) -> Self {
        let mut bits = Vec::with_capacity(2 * levels.len());
        for &l in &levels {
            let (hi, lo) = GRAY[l as usize];
            bits.push(hi);
            bits.push(lo);
        }
        Self {
            symbols: levels.iter().map(|&l| ALPHABET[l as usize]).collect(),
            source_bits: BitSequence {
                bits,
                origin: BitOrigin::External,
            },
            level_index: levels,
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Sub-frame covering `range` of symbol indices.
    pub fn slice(&self, range: std::ops::Range<usize>) -> SymbolFrame {
        SymbolFrame {
            symbols: self.symbols[range.clone()].to_vec(),
            source_bits: BitSequence {
                bits: self.source_bits.bits[2 * range.start..2 * range.end].to_vec(),
                origin: self.source_bits.origin,
            },
            level_index: self.level_index[range].to_vec(),
        }
    }
}

/// Uniformly sampled real waveform.
///
/// `delay` is the accumulated group delay (in samples) of every filter the
/// waveform went through; symbol `k` sits at sample `k * sps + delay`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sps: usize,
    pub symbol_count: usize,
    pub delay: usize,
}

impl Waveform {
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }
}

/// Level index of an amplitude that is exactly on the alphabet.
pub fn level_of(amplitude: f64) -> Option<u8> {
    ALPHABET.iter().position(|&a| a == amplitude).map(|i| i as u8)
}

/// Fibonacci LFSR for x^15 + x^14 + 1.
///
/// Each step emits the feedback bit, so the output is the maximal-length
/// sequence of period 32767 for any nonzero 15-bit seed.
pub fn prbs15_generate(seed: u32, length: usize) -> Result<BitSequence> {
    if seed == 0 || seed > 0x7fff {
        return Err(Error::InvalidSeed(seed));
    }
    let mut state = seed as u16;
    let bits = (0..length)
        .map(|_| {
            let fb = ((state >> 14) ^ (state >> 13)) & 1;
            state = ((state << 1) | fb) & 0x7fff;
            fb as u8
        })
        .collect();
    Ok(BitSequence {
        bits,
        origin: BitOrigin::Prbs15,
    })
}

/// Maps bit pairs to Gray-coded PAM4 levels.
pub fn map_pam4(bits: &BitSequence) -> Result<SymbolFrame> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::OddBitCount(bits.len()));
    }
    let level_index: Vec<u8> = bits
        .bits
        .chunks_exact(2)
        .map(|pair| match (pair[0], pair[1]) {
            (0, 0) => 0,
            (0, 1) => 1,
            (1, 1) => 2,
            _ => 3,
        })
        .collect();
    Ok(SymbolFrame {
        symbols: level_index.iter().map(|&l| ALPHABET[l as usize]).collect(),
        source_bits: bits.clone(),
        level_index,
    })
}

/// Inverse of [`map_pam4`]: recovers the Gray bits from the level indices.
pub fn demap_pam4(frame: &SymbolFrame) -> BitSequence {
    let mut bits = Vec::with_capacity(2 * frame.len());
    for &l in &frame.level_index {
        let (hi, lo) = GRAY[l as usize];
        bits.push(hi);
        bits.push(lo);
    }
    BitSequence {
        bits,
        origin: frame.source_bits.origin,
    }
}

/// Root-raised-cosine taps, `span_symbols * sps + 1` long, unit energy.
pub fn rrc_taps(rolloff: f64, span_symbols: usize, sps: usize) -> Result<Vec<f64>> {
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(Error::InvalidRolloff(rolloff));
    }
    if span_symbols == 0 || !span_symbols.is_multiple_of(2) {
        return Err(Error::InvalidSpan(span_symbols));
    }
    if sps == 0 {
        return Err(Error::InvalidSps { sps, min: 1 });
    }
    let len = span_symbols * sps + 1;
    let center = (len / 2) as f64;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| rrc_impulse((i as f64 - center) / sps as f64, rolloff))
        .collect();
    let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|t| *t /= norm);
    // Enforce exact symmetry; the two halves can differ in the last ulp.
    for i in 0..len / 2 {
        let avg = 0.5 * (taps[i] + taps[len - 1 - i]);
        taps[i] = avg;
        taps[len - 1 - i] = avg;
    }
    Ok(taps)
}

/// Continuous-time RRC impulse response at `t` symbol periods (unnormalized).
fn rrc_impulse(t: f64, beta: f64) -> f64 {
    use std::f64::consts::{FRAC_1_SQRT_2, PI};
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let singular = 1.0 / (4.0 * beta);
    if (t.abs() - singular).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta * FRAC_1_SQRT_2 * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Impulse train: sample `k * sps` carries symbol `k`, the rest are zero.
pub fn upsample(frame: &SymbolFrame, sps: usize) -> Result<Waveform> {
    if sps == 0 {
        return Err(Error::InvalidSps { sps, min: 1 });
    }
    let mut samples = vec![0.0; frame.len() * sps];
    for (k, &s) in frame.symbols.iter().enumerate() {
        samples[k * sps] = s;
    }
    Ok(Waveform {
        samples,
        sps,
        symbol_count: frame.len(),
        delay: 0,
    })
}

/// Pulse-shapes a waveform by linear convolution with `taps`.
pub fn shape(wave: &Waveform, taps: &[f64]) -> Result<Waveform> {
    filter::filter_waveform(wave, taps)
}

/// Transmitter settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxConfig {
    pub prbs_seed: u32,
    pub rolloff: f64,
    pub span_symbols: usize,
    pub sps: usize,
}

impl Default for TxConfig {
    fn default() -> Self {
        Self {
            prbs_seed: 1,
            rolloff: 0.1,
            span_symbols: 32,
            sps: 4,
        }
    }
}

impl TxConfig {
    pub fn validate(&self) -> Result<()> {
        prbs15_generate(self.prbs_seed, 0)?;
        if !(0.01..=1.0).contains(&self.rolloff) {
            return Err(Error::InvalidRolloff(self.rolloff));
        }
        if self.span_symbols == 0 || !self.span_symbols.is_multiple_of(2) {
            return Err(Error::InvalidSpan(self.span_symbols));
        }
        if self.sps < 2 {
            return Err(Error::InvalidSps { sps: self.sps, min: 2 });
        }
        Ok(())
    }

    pub fn pulse(&self) -> Result<Vec<f64>> {
        rrc_taps(self.rolloff, self.span_symbols, self.sps)
    }
}

/// PRBS15 symbol frame of `n_symbols` PAM4 symbols.
pub fn prbs_frame(seed: u32, n_symbols: usize) -> Result<SymbolFrame> {
    map_pam4(&prbs15_generate(seed, 2 * n_symbols)?)
}

/// Full transmit chain for an already mapped frame: upsample then RRC shape.
pub fn transmit(frame: &SymbolFrame, cfg: &TxConfig) -> Result<Waveform> {
    cfg.validate()?;
    shape(&upsample(frame, cfg.sps)?, &cfg.pulse()?)
}
