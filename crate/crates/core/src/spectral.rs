//! Short-time Fourier analysis.
//!
//! Frames are cut from a reflection-padded signal (when centered), tapered
//! with a periodic Hann window and transformed with an iterative radix-2 FFT.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioClip;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("window length {0} is too short (need at least 2)")]
    InvalidLength(usize),
    #[error("transform length {0} is not a power of two >= 2")]
    NonPowerOfTwoLength(usize),
    #[error("invalid frame plan: {0}")]
    InvalidPlan(String),
    #[error("signal of {len} samples is shorter than one {frame_size}-sample frame")]
    SignalTooShort { len: usize, frame_size: usize },
    #[error("signal is empty")]
    EmptySignal,
}

/// Framing parameters for the STFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramePlan {
    frame_size: usize,
    hop_size: usize,
    centered: bool,
}

impl Default for FramePlan {
    fn default() -> Self {
        Self {
            frame_size: 1024,
            hop_size: 512,
            centered: true,
        }
    }
}

impl FramePlan {
    pub fn new(frame_size: usize, hop_size: usize, centered: bool) -> Result<Self, SpectralError> {
        if frame_size < 2 || !frame_size.is_power_of_two() {
            return Err(SpectralError::InvalidPlan(format!(
                "frame size {frame_size} must be a power of two >= 2"
            )));
        }
        if hop_size == 0 || hop_size > frame_size {
            return Err(SpectralError::InvalidPlan(format!(
                "hop size {hop_size} must lie in 1..={frame_size}"
            )));
        }
        Ok(Self {
            frame_size,
            hop_size,
            centered,
        })
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn hop_size(&self) -> usize {
        self.hop_size
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    pub fn n_bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> Result<usize, SpectralError> {
        if len == 0 {
            return Err(SpectralError::EmptySignal);
        }
        if self.centered {
            Ok(1 + len / self.hop_size)
        } else if len < self.frame_size {
            Err(SpectralError::SignalTooShort {
                len,
                frame_size: self.frame_size,
            })
        } else {
            Ok(1 + (len - self.frame_size) / self.hop_size)
        }
    }
}

/// Periodic (DFT-even) Hann window: `w[i] = 0.5 (1 - cos(2 pi i / n))`.
pub fn hann_window(n: usize) -> Result<Vec<f64>, SpectralError> {
    if n < 2 {
        return Err(SpectralError::InvalidLength(n));
    }
    Ok((0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
        .collect())
}

/// Mirror index into `[0, len)` without repeating the edge sample.
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= len as isize {
        m = period - m;
    }
    m as usize
}

/// Cuts `samples` into frames according to `plan`.
pub fn frame_signal(samples: &[f64], plan: &FramePlan) -> Result<Vec<Vec<f64>>, SpectralError> {
    let n_frames = plan.frame_count(samples.len())?;
    let pad = if plan.centered {
        (plan.frame_size / 2) as isize
    } else {
        0
    };
    let frames = (0..n_frames)
        .map(|t| {
            let start = (t * plan.hop_size) as isize - pad;
            (0..plan.frame_size as isize)
                .map(|j| samples[reflect_index(start + j, samples.len())])
                .collect()
        })
        .collect();
    Ok(frames)
}

/// Precomputed twiddles and bit-reversal permutation for one transform size.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self, SpectralError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(SpectralError::NonPowerOfTwoLength(n));
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| i.reverse_bits() >> (usize::BITS - bits))
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Ok(Self { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Forward transform in place: `X[m] = sum_n x[n] exp(-2 pi i m n / N)`.
    pub fn forward(&self, data: &mut [Complex64]) -> Result<(), SpectralError> {
        self.transform(data, false)
    }

    /// Unnormalized inverse; divide by `N` to recover the input.
    pub fn inverse(&self, data: &mut [Complex64]) -> Result<(), SpectralError> {
        self.transform(data, true)
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) -> Result<(), SpectralError> {
        if data.len() != self.n {
            return Err(SpectralError::NonPowerOfTwoLength(data.len()));
        }
        for i in 0..self.n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
        Ok(())
    }
}

/// Out-of-place forward FFT.
pub fn fft(x: &[Complex64]) -> Result<Vec<Complex64>, SpectralError> {
    let plan = FftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.forward(&mut out)?;
    Ok(out)
}

/// Frames x bins matrix of `|X[m]|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    pub values: Vec<Vec<f64>>,
    pub bin_freqs_hz: Vec<f64>,
}

impl PowerSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.values.len()
    }

    pub fn n_bins(&self) -> usize {
        self.bin_freqs_hz.len()
    }
}

/// Reusable window + FFT plan for a fixed frame plan.
#[derive(Debug, Clone)]
pub struct SpectrumAnalyzer {
    plan: FramePlan,
    window: Vec<f64>,
    fft: FftPlan,
}

impl SpectrumAnalyzer {
    pub fn new(plan: FramePlan) -> Result<Self, SpectralError> {
        Ok(Self {
            window: hann_window(plan.frame_size)?,
            fft: FftPlan::new(plan.frame_size)?,
            plan,
        })
    }

    pub fn plan(&self) -> &FramePlan {
        &self.plan
    }

    pub fn bin_freqs(&self, sample_rate_hz: u32) -> Vec<f64> {
        let n = self.plan.frame_size as f64;
        (0..self.plan.n_bins())
            .map(|k| k as f64 * sample_rate_hz as f64 / n)
            .collect()
    }

    /// Power spectrum of one time-domain frame (windowed internally).
    pub fn frame_power(&self, frame: &[f64]) -> Result<Vec<f64>, SpectralError> {
        let mut buf: Vec<Complex64> = frame
            .iter()
            .zip(&self.window)
            .map(|(x, w)| Complex64::new(x * w, 0.0))
            .collect();
        self.fft.forward(&mut buf)?;
        Ok(buf[..self.plan.n_bins()].iter().map(|c| c.norm_sqr()).collect())
    }

    /// Power spectrogram of already-cut frames.
    pub fn power_of_frames(
        &self,
        frames: &[Vec<f64>],
        sample_rate_hz: u32,
    ) -> Result<PowerSpectrogram, SpectralError> {
        let values = frames
            .iter()
            .map(|f| self.frame_power(f))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PowerSpectrogram {
            values,
            bin_freqs_hz: self.bin_freqs(sample_rate_hz),
        })
    }

    pub fn power_spectrogram(&self, clip: &AudioClip) -> Result<PowerSpectrogram, SpectralError> {
        let frames = frame_signal(clip.samples(), &self.plan)?;
        self.power_of_frames(&frames, clip.sample_rate_hz())
    }
}

pub fn power_spectrogram(
    clip: &AudioClip,
    plan: &FramePlan,
) -> Result<PowerSpectrogram, SpectralError> {
    SpectrumAnalyzer::new(*plan)?.power_spectrogram(clip)
}
