//! MFCC and spectral-descriptor extraction.
//!
//! Per clip the pipeline is: frame -> Hann -> FFT -> power -> mel filterbank
//! -> natural log -> orthonormal DCT-II, keeping cepstral orders 0..13. Zero
//! crossing rate, centroid, bandwidth and rolloff are computed per frame on
//! the same frames. Every per-frame quantity is then averaged over the clip.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioClip;
use crate::spectral::{frame_signal, FramePlan, PowerSpectrogram, SpectralError, SpectrumAnalyzer};

/// Number of cepstral coefficients kept per frame.
pub const N_MFCC: usize = 13;
/// Length of a clip-level feature vector: 13 MFCC means and 4 descriptors.
pub const FEATURE_DIM: usize = N_MFCC + 4;

/// Column names in feature order.
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "mfcc_0", "mfcc_1", "mfcc_2", "mfcc_3", "mfcc_4", "mfcc_5", "mfcc_6", "mfcc_7", "mfcc_8",
    "mfcc_9", "mfcc_10", "mfcc_11", "mfcc_12", "zcr", "centroid", "bandwidth", "rolloff",
];

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("negative frequency {0} Hz")]
    NegativeFrequency(f64),
    #[error("negative mel value {0}")]
    NegativeMel(f64),
    #[error("filter {filter} has no positive weight: {n_mels} filters is too many for this resolution")]
    TooManyFilters { filter: usize, n_mels: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("frame of length {0} is too short for a zero-crossing rate")]
    FrameTooShort(usize),
    #[error("length mismatch: {0} power bins vs {1} frequencies")]
    LengthMismatch(usize, usize),
    #[error("rolloff fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// `m = 2595 log10(1 + f / 700)`.
pub fn hz_to_mel(f: f64) -> Result<f64, FeatureError> {
    if f < 0.0 || f.is_nan() {
        return Err(FeatureError::NegativeFrequency(f));
    }
    Ok(2595.0 * (1.0 + f / 700.0).log10())
}

/// Exact inverse of [`hz_to_mel`].
pub fn mel_to_hz(m: f64) -> Result<f64, FeatureError> {
    if m < 0.0 || m.is_nan() {
        return Err(FeatureError::NegativeMel(m));
    }
    Ok(700.0 * (10f64.powf(m / 2595.0) - 1.0))
}

/// Triangular filters with peaks equally spaced on the mel axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Vec<Vec<f64>>,
    /// The `n_mels + 2` band edges / peaks in Hz.
    pub breaks_hz: Vec<f64>,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Center frequency of each filter.
    pub fn centers_hz(&self) -> &[f64] {
        &self.breaks_hz[1..self.breaks_hz.len() - 1]
    }

    /// `weights . power` for one frame.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Filterbank spanning 0 Hz to Nyquist.
pub fn build_mel_filterbank(
    n_mels: usize,
    n_bins: usize,
    sample_rate_hz: u32,
) -> Result<MelFilterbank, FeatureError> {
    build_mel_filterbank_in_range(n_mels, n_bins, sample_rate_hz, 0.0, sample_rate_hz as f64 / 2.0)
}

pub fn build_mel_filterbank_in_range(
    n_mels: usize,
    n_bins: usize,
    sample_rate_hz: u32,
    f_min_hz: f64,
    f_max_hz: f64,
) -> Result<MelFilterbank, FeatureError> {
    if n_mels == 0 {
        return Err(FeatureError::InvalidConfig("n_mels must be at least 1".into()));
    }
    if n_bins < 2 {
        return Err(FeatureError::InvalidConfig(format!("{n_bins} bins is too few")));
    }
    let nyquist = sample_rate_hz as f64 / 2.0;
    if !(0.0 <= f_min_hz && f_min_hz < f_max_hz && f_max_hz <= nyquist) {
        return Err(FeatureError::InvalidConfig(format!(
            "band [{f_min_hz}, {f_max_hz}] Hz must lie within [0, {nyquist}]"
        )));
    }
    let frame_size = 2 * (n_bins - 1);
    let bin_freqs: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * sample_rate_hz as f64 / frame_size as f64)
        .collect();

    let mel_lo = hz_to_mel(f_min_hz)?;
    let mel_hi = hz_to_mel(f_max_hz)?;
    let step = (mel_hi - mel_lo) / (n_mels + 1) as f64;
    let mut breaks_hz = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + step * i as f64))
        .collect::<Result<Vec<_>, _>>()?;
    // pin the band edges exactly; the mel round trip drifts by an ulp or two
    breaks_hz[0] = f_min_hz;
    breaks_hz[n_mels + 1] = f_max_hz;

    let mut weights = Vec::with_capacity(n_mels);
    for j in 0..n_mels {
        let (lo, mid, hi) = (breaks_hz[j], breaks_hz[j + 1], breaks_hz[j + 2]);
        let row: Vec<f64> = bin_freqs
            .iter()
            .map(|&f| {
                if f <= lo || f >= hi {
                    0.0
                } else if f <= mid {
                    (f - lo) / (mid - lo)
                } else {
                    (hi - f) / (hi - mid)
                }
            })
            .collect();
        if !row.iter().any(|&w| w > 0.0) {
            return Err(FeatureError::TooManyFilters { filter: j, n_mels });
        }
        weights.push(row);
    }
    Ok(MelFilterbank {
        weights,
        breaks_hz,
        f_min_hz,
        f_max_hz,
    })
}

/// Rows `0..n_out` of the orthonormal DCT-II matrix of size `n_in`.
pub fn dct_ii_matrix(n_out: usize, n_in: usize) -> Vec<Vec<f64>> {
    let n = n_in as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            (0..n_in)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                .collect()
        })
        .collect()
}

/// Cepstral coefficients for every frame of `spec`, shape `n_frames x n_mfcc`.
pub fn mfcc_frames(
    spec: &PowerSpectrogram,
    fb: &MelFilterbank,
    n_mfcc: usize,
    log_floor: f64,
) -> Result<Vec<Vec<f64>>, FeatureError> {
    if fb.n_bins() != spec.n_bins() {
        return Err(FeatureError::DimensionMismatch(format!(
            "filterbank expects {} bins, spectrogram has {}",
            fb.n_bins(),
            spec.n_bins()
        )));
    }
    if n_mfcc == 0 || n_mfcc > fb.n_mels() {
        return Err(FeatureError::DimensionMismatch(format!(
            "cannot keep {n_mfcc} coefficients from {} mel bands",
            fb.n_mels()
        )));
    }
    if !(log_floor > 0.0) {
        return Err(FeatureError::InvalidConfig("log floor must be positive".into()));
    }
    let dct = dct_ii_matrix(n_mfcc, fb.n_mels());
    Ok(spec
        .values
        .iter()
        .map(|power| {
            let log_mel: Vec<f64> = fb
                .apply(power)
                .into_iter()
                .map(|e| e.max(log_floor).ln())
                .collect();
            dct.iter()
                .map(|row| row.iter().zip(&log_mel).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect())
}

/// Fraction of adjacent pairs whose sign differs (zero counts as non-negative).
pub fn zero_crossing_rate(frame: &[f64]) -> Result<f64, FeatureError> {
    if frame.len() < 2 {
        return Err(FeatureError::FrameTooShort(frame.len()));
    }
    let crossings = frame
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    Ok(crossings as f64 / (frame.len() - 1) as f64)
}

fn check_lengths(power: &[f64], freqs: &[f64]) -> Result<(), FeatureError> {
    if power.len() != freqs.len() {
        return Err(FeatureError::LengthMismatch(power.len(), freqs.len()));
    }
    Ok(())
}

/// Magnitude-weighted mean frequency; 0 for an all-zero spectrum.
pub fn spectral_centroid(power_bins: &[f64], bin_freqs_hz: &[f64]) -> Result<f64, FeatureError> {
    check_lengths(power_bins, bin_freqs_hz)?;
    let (mut weighted, mut total) = (0.0, 0.0);
    for (p, f) in power_bins.iter().zip(bin_freqs_hz) {
        let mag = p.sqrt();
        weighted += f * mag;
        total += mag;
    }
    Ok(if total > 0.0 { weighted / total } else { 0.0 })
}

/// Magnitude-weighted standard deviation of frequency around `centroid_hz`.
pub fn spectral_bandwidth(
    power_bins: &[f64],
    bin_freqs_hz: &[f64],
    centroid_hz: f64,
) -> Result<f64, FeatureError> {
    check_lengths(power_bins, bin_freqs_hz)?;
    let (mut spread, mut total) = (0.0, 0.0);
    for (p, f) in power_bins.iter().zip(bin_freqs_hz) {
        let mag = p.sqrt();
        spread += mag * (f - centroid_hz).powi(2);
        total += mag;
    }
    Ok(if total > 0.0 { (spread / total).sqrt() } else { 0.0 })
}

/// Lowest bin frequency whose cumulative power reaches `q` of the total.
pub fn spectral_rolloff(power_bins: &[f64], bin_freqs_hz: &[f64], q: f64) -> Result<f64, FeatureError> {
    check_lengths(power_bins, bin_freqs_hz)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(FeatureError::InvalidFraction(q));
    }
    let total: f64 = power_bins.iter().sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let target = q * total;
    let mut cumulative = 0.0;
    for (p, f) in power_bins.iter().zip(bin_freqs_hz) {
        cumulative += p;
        if cumulative >= target {
            return Ok(*f);
        }
    }
    // rounding can leave the running sum a hair below q * total
    Ok(*bin_freqs_hz.last().unwrap_or(&0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub frame_plan: FramePlan,
    pub n_mels: usize,
    pub rolloff_fraction: f64,
    pub log_floor: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            frame_plan: FramePlan::default(),
            n_mels: 40,
            rolloff_fraction: 0.85,
            log_floor: 1e-10,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.rolloff_fraction > 0.0 && self.rolloff_fraction < 1.0) {
            return Err(FeatureError::InvalidFraction(self.rolloff_fraction));
        }
        if self.n_mels < N_MFCC {
            return Err(FeatureError::InvalidConfig(format!(
                "n_mels = {} is fewer than the {N_MFCC} kept coefficients",
                self.n_mels
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(FeatureError::InvalidConfig("log floor must be positive".into()));
        }
        Ok(())
    }
}

/// Clip-level summary: frame means of every per-frame feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mfcc: [f64; N_MFCC],
    pub zcr: f64,
    pub centroid_hz: f64,
    pub bandwidth_hz: f64,
    pub rolloff_hz: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        out[..N_MFCC].copy_from_slice(&self.mfcc);
        out[N_MFCC] = self.zcr;
        out[N_MFCC + 1] = self.centroid_hz;
        out[N_MFCC + 2] = self.bandwidth_hz;
        out[N_MFCC + 3] = self.rolloff_hz;
        out
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, FeatureError> {
        if values.len() != FEATURE_DIM {
            return Err(FeatureError::DimensionMismatch(format!(
                "expected {FEATURE_DIM} values, got {}",
                values.len()
            )));
        }
        let mut mfcc = [0.0; N_MFCC];
        mfcc.copy_from_slice(&values[..N_MFCC]);
        Ok(Self {
            mfcc,
            zcr: values[N_MFCC],
            centroid_hz: values[N_MFCC + 1],
            bandwidth_hz: values[N_MFCC + 2],
            rolloff_hz: values[N_MFCC + 3],
        })
    }
}

/// Extraction state shared across clips of one sample rate.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: ExtractionConfig,
    analyzer: SpectrumAnalyzer,
    filterbank: MelFilterbank,
    sample_rate_hz: u32,
}

impl FeatureExtractor {
    pub fn new(config: ExtractionConfig, sample_rate_hz: u32) -> Result<Self, FeatureError> {
        config.validate()?;
        let analyzer = SpectrumAnalyzer::new(config.frame_plan)?;
        let filterbank =
            build_mel_filterbank(config.n_mels, config.frame_plan.n_bins(), sample_rate_hz)?;
        Ok(Self {
            config,
            analyzer,
            filterbank,
            sample_rate_hz,
        })
    }

    pub fn config(&self) -> &ExtractionConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Per-frame MFCC matrix of a clip.
    pub fn mfcc_matrix(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>, FeatureError> {
        self.check_rate(clip)?;
        let spec = self.analyzer.power_spectrogram(clip)?;
        mfcc_frames(&spec, &self.filterbank, N_MFCC, self.config.log_floor)
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureVector, FeatureError> {
        self.check_rate(clip)?;
        let frames = frame_signal(clip.samples(), &self.config.frame_plan)?;
        let spec = self.analyzer.power_of_frames(&frames, self.sample_rate_hz)?;
        let mfcc = mfcc_frames(&spec, &self.filterbank, N_MFCC, self.config.log_floor)?;

        let n = frames.len() as f64;
        let mut out = FeatureVector {
            mfcc: [0.0; N_MFCC],
            zcr: 0.0,
            centroid_hz: 0.0,
            bandwidth_hz: 0.0,
            rolloff_hz: 0.0,
        };
        for row in &mfcc {
            for (acc, c) in out.mfcc.iter_mut().zip(row) {
                *acc += c;
            }
        }
        for (frame, power) in frames.iter().zip(&spec.values) {
            let centroid = spectral_centroid(power, &spec.bin_freqs_hz)?;
            out.zcr += zero_crossing_rate(frame)?;
            out.centroid_hz += centroid;
            out.bandwidth_hz += spectral_bandwidth(power, &spec.bin_freqs_hz, centroid)?;
            out.rolloff_hz +=
                spectral_rolloff(power, &spec.bin_freqs_hz, self.config.rolloff_fraction)?;
        }
        out.mfcc.iter_mut().for_each(|c| *c /= n);
        out.zcr /= n;
        out.centroid_hz /= n;
        out.bandwidth_hz /= n;
        out.rolloff_hz /= n;
        Ok(out)
    }

    fn check_rate(&self, clip: &AudioClip) -> Result<(), FeatureError> {
        if clip.sample_rate_hz() != self.sample_rate_hz {
            return Err(FeatureError::DimensionMismatch(format!(
                "extractor built for {} Hz, clip is {} Hz",
                self.sample_rate_hz,
                clip.sample_rate_hz()
            )));
        }
        Ok(())
    }
}

pub fn extract_clip_features(
    clip: &AudioClip,
    cfg: &ExtractionConfig,
) -> Result<FeatureVector, FeatureError> {
    FeatureExtractor::new(*cfg, clip.sample_rate_hz())?.extract(clip)
}
