//! FIR filtering shared by the transmitter and the channel.

use crate::error::{Error, Result};
use crate::txgen::Waveform;

/// Full linear convolution of `x` with `h`; output length is `x.len() + h.len() - 1`.
///
/// Zero input samples are skipped, which makes filtering an upsampled
/// impulse train roughly `sps` times cheaper.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut y = vec![0.0; x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (yj, &hj) in y[i..i + h.len()].iter_mut().zip(h) {
            *yj += xi * hj;
        }
    }
    y
}

/// Filters a waveform and accumulates the filter's group delay into the
/// waveform's delay field so symbol instants stay addressable.
pub fn filter_waveform(wave: &Waveform, taps: &[f64]) -> Result<Waveform> {
    if taps.is_empty() {
        return Err(Error::EmptyFilter);
    }
    Ok(Waveform {
        samples: convolve(&wave.samples, taps),
        sps: wave.sps,
        symbol_count: wave.symbol_count,
        delay: wave.delay + (taps.len() - 1) / 2,
    })
}

/// Magnitude of the DTFT of `taps` at `freq` cycles per sample.
pub fn magnitude_response(taps: &[f64], freq: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq;
    let (re, im) = taps.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, &h)| {
        let phase = w * n as f64;
        (re + h * phase.cos(), im - h * phase.sin())
    });
    re.hypot(im)
}
