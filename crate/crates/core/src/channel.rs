//! Discrete-time stand-in for the bandwidth-limited O/E link: Gaussian-shaped
//! low-pass ISI filter, optional tanh saturation, additive white Gaussian
//! noise, receive matched filter and symbol-rate sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::filter;
use crate::txgen::{self, SymbolFrame, TxConfig, Waveform};

/// 13 GHz of 3 dB bandwidth on a 50 GBaud PAM4 line.
pub const DEFAULT_F3DB_NORM: f64 = 0.26;

/// Low-pass filter length in symbols; the filter has `8 * sps + 1` taps.
const LOWPASS_SPAN_SYMBOLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nonlinearity {
    pub sat_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// 3 dB bandwidth as a fraction of the symbol rate.
    pub f3db_norm: f64,
    /// SNR of the noisy waveform in dB; `f64::INFINITY` disables noise.
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub nonlinearity: Option<Nonlinearity>,
    /// Sampling phase in samples, `0..sps`.
    pub timing_offset: usize,
    pub rng_seed: u64,
    /// Apply the RRC matched filter before sampling.
    pub matched_filter: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            f3db_norm: DEFAULT_F3DB_NORM,
            snr_db: f64::INFINITY,
            nonlinearity: None,
            timing_offset: 0,
            rng_seed: 1,
            matched_filter: true,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self, sps: usize) -> Result<()> {
        let max = 0.5 * sps as f64;
        if !(self.f3db_norm > 0.0 && self.f3db_norm < max) {
            return Err(Error::InvalidBandwidth {
                f3db_norm: self.f3db_norm,
                max,
            });
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter(format!(
                "snr_db must be finite or +inf, got {}",
                self.snr_db
            )));
        }
        if let Some(nl) = self.nonlinearity {
            if !(nl.sat_level > 0.0 && nl.sat_level.is_finite()) {
                return Err(Error::InvalidSaturation(nl.sat_level));
            }
        }
        if self.timing_offset >= sps {
            return Err(Error::InvalidTimingOffset {
                offset: self.timing_offset,
                sps,
            });
        }
        Ok(())
    }
}

/// Serializes `f64::INFINITY` as the string `"inf"`, which JSON cannot carry
/// as a number.
pub mod snr_serde {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(SnrVisitor)
    }

    pub fn parse(text: &str) -> Option<f64> {
        match text.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
            other => other.parse().ok().filter(|v: &f64| v.is_finite()),
        }
    }

    struct SnrVisitor;

    impl Visitor<'_> for SnrVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number of dB or \"inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            parse(v).ok_or_else(|| E::custom(format!("invalid SNR {v:?}")))
        }
    }

    /// Same encoding for a list of SNR values.
    pub mod vec {
        use serde::de::{SeqAccess, Visitor};
        use serde::ser::SerializeSeq;
        use serde::{Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&Wrapped(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            struct SeqVisitor;
            impl<'de> Visitor<'de> for SeqVisitor {
                type Value = Vec<f64>;
                fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                    f.write_str("a list of dB values")
                }
                fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Vec<f64>, A::Error> {
                    let mut out = Vec::new();
                    while let Some(Wrapped(x)) = seq.next_element()? {
                        out.push(x);
                    }
                    Ok(out)
                }
            }
            d.deserialize_seq(SeqVisitor)
        }

        struct Wrapped(f64);

        impl serde::Serialize for Wrapped {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                super::serialize(&self.0, s)
            }
        }

        impl<'de> serde::Deserialize<'de> for Wrapped {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                super::deserialize(d).map(Wrapped)
            }
        }
    }
}

/// Receiver samples at one value per transmitted symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSymbols {
    pub values: Vec<f64>,
    /// Set once filter delays have been compensated.
    pub aligned: bool,
}

impl ReceivedSymbols {
    /// Symbol-rate samples that need no alignment (already at one sample per symbol).
    pub fn aligned(values: Vec<f64>) -> Self {
        Self { values, aligned: true }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> ReceivedSymbols {
        ReceivedSymbols {
            values: self.values[range].to_vec(),
            aligned: self.aligned,
        }
    }

    /// SHA-256 over the little-endian bytes of every value, hex encoded.
    pub fn stream_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for v in &self.values {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// FIR approximation of a Gaussian magnitude response with `|H(f3db_norm)|^2 = 1/2`.
///
/// The Gaussian frequency response `exp(-2 pi^2 sigma^2 f^2)` maps to a
/// Gaussian impulse response of width `sigma = sqrt(ln 2) / (2 pi f3db)`
/// symbols; it is sampled at `sps`, truncated to 8 symbols and scaled to unit
/// DC gain.
pub fn lowpass_taps(cfg: &ChannelConfig, sps: usize) -> Result<Vec<f64>> {
    if sps == 0 {
        return Err(Error::InvalidSps { sps, min: 1 });
    }
    let max = 0.5 * sps as f64;
    if !(cfg.f3db_norm > 0.0 && cfg.f3db_norm < max) {
        return Err(Error::InvalidBandwidth {
            f3db_norm: cfg.f3db_norm,
            max,
        });
    }
    let sigma = std::f64::consts::LN_2.sqrt() / (2.0 * std::f64::consts::PI * cfg.f3db_norm) * sps as f64;
    let half = (LOWPASS_SPAN_SYMBOLS * sps / 2) as isize;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|n| (-(n as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    Ok(taps)
}

/// Convolves the waveform with the channel impulse response.
pub fn apply_isi(wave: &Waveform, taps: &[f64]) -> Result<Waveform> {
    filter::filter_waveform(wave, taps)
}

/// Adds white Gaussian noise with variance `mean_power / 10^(snr_db / 10)`.
///
/// `snr_db = +inf` returns the input untouched. The noise stream is a
/// ChaCha8 generator seeded with `seed`.
pub fn add_awgn(wave: &Waveform, snr_db: f64, seed: u64) -> Waveform {
    if snr_db == f64::INFINITY {
        return wave.clone();
    }
    let sigma = (wave.mean_power() / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = wave
        .samples
        .iter()
        .map(|&s| {
            let n: f64 = StandardNormal.sample(&mut rng);
            s + sigma * n
        })
        .collect();
    Waveform {
        samples,
        ..wave.clone()
    }
}

/// Memoryless soft saturation `sat_level * tanh(x / sat_level)`.
pub fn soa_nonlinearity(wave: &Waveform, sat_level: f64) -> Result<Waveform> {
    if sat_level.is_nan() || sat_level <= 0.0 {
        return Err(Error::InvalidSaturation(sat_level));
    }
    Ok(Waveform {
        samples: wave
            .samples
            .iter()
            .map(|&x| sat_level * (x / sat_level).tanh())
            .collect(),
        ..wave.clone()
    })
}

/// Picks sample `k * sps + timing_offset + delay` for every symbol `k`.
pub fn downsample(wave: &Waveform, timing_offset: usize) -> Result<ReceivedSymbols> {
    if timing_offset >= wave.sps {
        return Err(Error::InvalidTimingOffset {
            offset: timing_offset,
            sps: wave.sps,
        });
    }
    let values = (0..wave.symbol_count)
        .map(|k| {
            let idx = k * wave.sps + timing_offset + wave.delay;
            wave.samples.get(idx).copied().unwrap_or(0.0)
        })
        .collect();
    Ok(ReceivedSymbols { values, aligned: true })
}

/// End-to-end link: upsample, RRC shape, low-pass ISI, optional saturation,
/// AWGN, RRC matched filter (when enabled) and symbol-rate sampling.
pub fn run_link(frame: &SymbolFrame, tx: &TxConfig, ch: &ChannelConfig) -> Result<ReceivedSymbols> {
    tx.validate()?;
    ch.validate(tx.sps)?;
    let pulse = tx.pulse()?;
    let mut wave = txgen::shape(&txgen::upsample(frame, tx.sps)?, &pulse)?;
    wave = apply_isi(&wave, &lowpass_taps(ch, tx.sps)?)?;
    if let Some(nl) = ch.nonlinearity {
        wave = soa_nonlinearity(&wave, nl.sat_level)?;
    }
    wave = add_awgn(&wave, ch.snr_db, ch.rng_seed);
    if ch.matched_filter {
        wave = filter::filter_waveform(&wave, &pulse)?;
    }
    downsample(&wave, ch.timing_offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::magnitude_response;
    use crate::txgen::{prbs_frame, rrc_taps, upsample};

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    #[test]
    fn lowpass_dc_gain_and_length() {
        let cfg = ChannelConfig::default();
        let taps = lowpass_taps(&cfg, 4).unwrap();
        assert_eq!(taps.len(), 33);
        assert!((taps.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lowpass_minus_three_db_point() {
        // Accurate while the Gaussian spans more than a few samples
        // (f3db_norm / sps <= 0.2).
        for sps in [2, 4, 8] {
            for f3 in [0.1, 0.2, 0.26, 0.4, 0.6, 0.8, 1.2, 1.6] {
                if f3 / sps as f64 > 0.2 {
                    continue;
                }
                let cfg = ChannelConfig {
                    f3db_norm: f3,
                    ..Default::default()
                };
                let taps = lowpass_taps(&cfg, sps).unwrap();
                let h = db(magnitude_response(&taps, f3 / sps as f64));
                assert!((-3.2..=-2.8).contains(&h), "sps {sps} f3 {f3}: {h} dB");
            }
        }
    }

    #[test]
    fn lowpass_wide_band_is_near_allpass() {
        let cfg = ChannelConfig {
            f3db_norm: 0.49 * 4.0,
            ..Default::default()
        };
        let taps = lowpass_taps(&cfg, 4).unwrap();
        let center = taps.len() / 2;
        let dist: f64 = taps
            .iter()
            .enumerate()
            .map(|(i, &t)| if i == center { (1.0 - t).abs() } else { t.abs() })
            .fold(0.0, f64::max);
        assert!(dist < 0.01, "peak distortion {dist}");
    }

    #[test]
    fn lowpass_rejects_out_of_range_bandwidth() {
        for f3 in [0.0, -0.1, 2.0, 5.0] {
            let cfg = ChannelConfig {
                f3db_norm: f3,
                ..Default::default()
            };
            assert!(matches!(lowpass_taps(&cfg, 4), Err(Error::InvalidBandwidth { .. })));
        }
    }

    #[test]
    fn isi_identity_and_associativity() {
        let frame = prbs_frame(5, 200).unwrap();
        let w = upsample(&frame, 4).unwrap();
        assert_eq!(apply_isi(&w, &[1.0]).unwrap().samples, w.samples);

        let taps = lowpass_taps(&ChannelConfig::default(), 4).unwrap();
        let twice = apply_isi(&apply_isi(&w, &taps).unwrap(), &taps).unwrap();
        let once = apply_isi(&w, &filter::convolve(&taps, &taps)).unwrap();
        assert_eq!(twice.delay, once.delay);
        let err = twice
            .samples
            .iter()
            .zip(&once.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9);
        assert_eq!(apply_isi(&w, &[]), Err(Error::EmptyFilter));
    }

    #[test]
    fn isi_closes_the_eye() {
        let levels: Vec<u8> = (0..50).map(|k| if k % 2 == 0 { 3 } else { 0 }).collect();
        let frame = SymbolFrame::from_levels(levels);
        let tx = TxConfig::default();
        let pulse = tx.pulse().unwrap();
        let shaped = txgen::shape(&upsample(&frame, 4).unwrap(), &pulse).unwrap();
        let opening = |w: &Waveform| {
            let rx = downsample(&filter::filter_waveform(w, &pulse).unwrap(), 0).unwrap();
            // interior symbols only, away from the start-up transient
            let vals = &rx.values[10..40];
            let lo_max = vals.iter().step_by(2).skip(1).fold(f64::MAX, |a, &v| a.min(v));
            let hi_min = vals.iter().skip(1).step_by(2).fold(f64::MIN, |a, &v| a.max(v));
            lo_max.min(-hi_min)
        };
        let clean = opening(&shaped);
        let taps = lowpass_taps(&ChannelConfig::default(), 4).unwrap();
        let filtered = opening(&apply_isi(&shaped, &taps).unwrap());
        assert!(filtered < clean, "filtered {filtered} vs clean {clean}");
    }

    #[test]
    fn awgn_infinite_snr_and_determinism() {
        let frame = prbs_frame(5, 500).unwrap();
        let w = upsample(&frame, 4).unwrap();
        assert_eq!(add_awgn(&w, f64::INFINITY, 9), w);
        assert_eq!(add_awgn(&w, 10.0, 9), add_awgn(&w, 10.0, 9));
        assert_ne!(add_awgn(&w, 10.0, 9), add_awgn(&w, 10.0, 10));
    }

    #[test]
    fn awgn_empirical_snr() {
        let frame = prbs_frame(11, 250_000).unwrap();
        let w = upsample(&frame, 4).unwrap();
        assert_eq!(w.samples.len(), 1_000_000);
        for target in [0.0, 12.5, 25.0] {
            let noisy = add_awgn(&w, target, 3);
            let noise: Vec<f64> = noisy.samples.iter().zip(&w.samples).map(|(a, b)| a - b).collect();
            let n = noise.len() as f64;
            let np = noise.iter().map(|x| x * x).sum::<f64>() / n;
            let snr = 10.0 * (w.mean_power() / np).log10();
            assert!((snr - target).abs() < 0.1, "target {target} measured {snr}");
            let mean = noise.iter().sum::<f64>() / n;
            assert!(mean.abs() < 3.0 * np.sqrt() / n.sqrt());
        }
    }

    #[test]
    fn saturation_closed_forms() {
        let w = Waveform {
            samples: vec![-3.0, -1.5, 0.0, 0.7, 3.0],
            sps: 1,
            symbol_count: 5,
            delay: 0,
        };
        let lin = soa_nonlinearity(&w, 1e6).unwrap();
        assert!(lin.samples.iter().zip(&w.samples).all(|(a, b)| (a - b).abs() < 1e-9));
        let at = soa_nonlinearity(
            &Waveform {
                samples: vec![2.5],
                ..w.clone()
            },
            2.5,
        )
        .unwrap();
        assert!((at.samples[0] - 2.5 * 1f64.tanh()).abs() < 1e-15);
        assert!((1f64.tanh() - 0.7616).abs() < 1e-4);
        assert!(soa_nonlinearity(&w, 0.0).is_err());
    }

    #[test]
    fn downsample_identity_and_bounds() {
        let w = Waveform {
            samples: vec![1.0, -3.0, 3.0],
            sps: 1,
            symbol_count: 3,
            delay: 0,
        };
        let rx = downsample(&w, 0).unwrap();
        assert_eq!(rx.values, w.samples);
        assert!(rx.aligned);
        let w4 = Waveform { sps: 4, ..w.clone() };
        assert_eq!(
            downsample(&w4, 4),
            Err(Error::InvalidTimingOffset { offset: 4, sps: 4 })
        );
    }

    #[test]
    fn nyquist_cascade_recovers_symbols() {
        let frame = prbs_frame(9, 400).unwrap();
        // Truncation of the RRC tails is the only ISI source; 1024 symbols
        // pushes it below 1e-8.
        let taps = rrc_taps(0.5, 1024, 4).unwrap();
        let shaped = txgen::shape(&upsample(&frame, 4).unwrap(), &taps).unwrap();
        let matched = filter::filter_waveform(&shaped, &taps).unwrap();
        let rx = downsample(&matched, 0).unwrap();
        let err = rx
            .values
            .iter()
            .zip(&frame.symbols)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
    }

    #[test]
    fn stream_hash_tracks_content() {
        let a = ReceivedSymbols::aligned(vec![1.0, 2.0]);
        let b = ReceivedSymbols::aligned(vec![1.0, 2.0]);
        let c = ReceivedSymbols::aligned(vec![1.0, 2.000001]);
        assert_eq!(a.stream_hash(), b.stream_hash());
        assert_ne!(a.stream_hash(), c.stream_hash());
        assert_eq!(a.stream_hash().len(), 64);
    }

    #[test]
    fn snr_text_forms() {
        assert_eq!(snr_serde::parse("inf"), Some(f64::INFINITY));
        assert_eq!(snr_serde::parse("+Infinity"), Some(f64::INFINITY));
        assert_eq!(snr_serde::parse("12.5"), Some(12.5));
        assert_eq!(snr_serde::parse("-inf"), None);
        assert_eq!(snr_serde::parse("abc"), None);
    }
}
