use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Brick-wall band-pass in the frequency domain: forward FFT, zero every bin
/// whose frequency lies outside `[lo, hi]`, inverse FFT, keep the real part.
///
/// Bin `k` of an `n`-point transform has frequency `min(k, n - k) * fs / n`,
/// so the mask is symmetric and the output stays real.
#[derive(Clone)]
pub struct BandPass {
    len: usize,
    keep: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for BandPass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BandPass")
            .field("len", &self.len)
            .field("kept_bins", &self.keep.iter().filter(|k| **k).count())
            .finish()
    }
}

impl BandPass {
    pub fn new(len: usize, fs: f64, lo: f64, hi: f64) -> Result<Self> {
        if len < 2 {
            return Err(Error::Shape(format!("band-pass needs >= 2 samples, got {len}")));
        }
        if !(fs > 0.0 && lo >= 0.0 && lo < hi && hi < fs / 2.0) {
            return Err(Error::InvalidBand { lo, hi, fs });
        }
        let keep = (0..len)
            .map(|k| {
                let f = k.min(len - k) as f64 * fs / len as f64;
                f >= lo && f <= hi
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            keep,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn apply(&self, signal: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; signal.len()];
        self.apply_into(signal, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, signal: &[f64], out: &mut [f64]) -> Result<()> {
        if signal.len() != self.len || out.len() != self.len {
            return Err(Error::Shape(format!(
                "band-pass planned for {} samples, got {}",
                self.len,
                signal.len()
            )));
        }
        if let Some(bad) = signal.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("signal sample {bad}")));
        }
        let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (bin, keep) in buf.iter_mut().zip(&self.keep) {
            if !keep {
                *bin = Complex::new(0.0, 0.0);
            }
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        for (o, c) in out.iter_mut().zip(&buf) {
            *o = c.re * scale;
        }
        Ok(())
    }
}

pub fn bandpass_fft(signal: &[f64], fs: f64, lo: f64, hi: f64) -> Result<Vec<f64>> {
    BandPass::new(signal.len(), fs, lo, hi)?.apply(signal)
}
