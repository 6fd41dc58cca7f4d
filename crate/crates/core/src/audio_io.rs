//! RIFF/WAVE decoding into mono floating-point clips.
//!
//! Only 16-bit integer PCM is understood. Stereo input is averaged down to
//! mono and every sample is divided by 32768, so `-32768` maps to `-1.0`
//! exactly and `+32767` lands just below `1.0`.

use std::path::Path;

use thiserror::Error;

/// Sample rate every clip admitted to the pipeline must have.
pub const CANONICAL_SAMPLE_RATE: u32 = 44_100;

const PCM_FORMAT_TAG: u16 = 1;
const FULL_SCALE: f64 = 32768.0;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("truncated data: {0}")]
    TruncatedData(String),
    #[error("unsupported channel count {0} (only mono and stereo are accepted)")]
    UnsupportedChannelCount(u16),
    #[error("unsupported sample rate {0} Hz (expected {CANONICAL_SAMPLE_RATE} Hz)")]
    UnsupportedFormat(u32),
    #[error("clip contains no samples")]
    EmptyClip,
    #[error("sample {index} = {value} lies outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Interleaved integer PCM exactly as stored in the data chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcmData {
    pub channels: u16,
    pub bits_per_sample: u16,
    pub sample_rate: u32,
    pub samples: Vec<i16>,
}

impl PcmData {
    pub fn frames(&self) -> usize {
        if self.channels == 0 {
            0
        } else {
            self.samples.len() / self.channels as usize
        }
    }
}

/// A validated mono waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
    source_path: String,
}

impl AudioClip {
    /// Builds a clip, checking that it is non-empty and every sample lies in `[-1, 1]`.
    pub fn new(
        samples: Vec<f64>,
        sample_rate_hz: u32,
        source_path: impl Into<String>,
    ) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::EmptyClip);
        }
        if sample_rate_hz == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(-1.0..=1.0).contains(*s))
        {
            return Err(AudioError::SampleOutOfRange { index, value });
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            source_path: source_path.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Returns a copy with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self, AudioError> {
        Self::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate_hz,
            self.source_path.clone(),
        )
    }
}

fn read_u16(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

struct FormatChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits_per_sample: u16,
}

/// Parses a RIFF/WAVE byte buffer holding 16-bit PCM.
///
/// Chunks other than `fmt ` and `data` are skipped. The `fmt ` chunk must
/// precede `data`.
pub fn decode_wav(bytes: &[u8]) -> Result<PcmData, AudioError> {
    if bytes.len() < 12 {
        return Err(AudioError::MalformedHeader(format!(
            "{} bytes is too short for a RIFF header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(AudioError::MalformedHeader(format!(
            "expected RIFF magic, found {:?}",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedHeader(format!(
            "expected WAVE form type, found {:?}",
            String::from_utf8_lossy(&bytes[8..12])
        )));
    }

    let mut pos = 12;
    let mut format: Option<FormatChunk> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + size > bytes.len() {
                    return Err(AudioError::MalformedHeader(format!(
                        "fmt chunk of {size} bytes is incomplete"
                    )));
                }
                format = Some(FormatChunk {
                    format_tag: read_u16(bytes, body),
                    channels: read_u16(bytes, body + 2),
                    sample_rate: read_u32(bytes, body + 4),
                    block_align: read_u16(bytes, body + 12),
                    bits_per_sample: read_u16(bytes, body + 14),
                });
            }
            b"data" => {
                let fmt = format.ok_or_else(|| {
                    AudioError::MalformedHeader("data chunk precedes fmt chunk".into())
                })?;
                return decode_data(&fmt, &bytes[body..], size);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
    Err(AudioError::MalformedHeader("no data chunk found".into()))
}

fn decode_data(fmt: &FormatChunk, rest: &[u8], declared: usize) -> Result<PcmData, AudioError> {
    if fmt.format_tag != PCM_FORMAT_TAG {
        return Err(AudioError::UnsupportedEncoding(format!(
            "format tag {} is not integer PCM",
            fmt.format_tag
        )));
    }
    if fmt.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} bits per sample (only 16 is supported)",
            fmt.bits_per_sample
        )));
    }
    if fmt.channels == 0 {
        return Err(AudioError::MalformedHeader("zero channels".into()));
    }
    let frame_bytes = 2 * fmt.channels as usize;
    if fmt.block_align as usize != frame_bytes {
        return Err(AudioError::MalformedHeader(format!(
            "block align {} disagrees with {} channels of 16-bit samples",
            fmt.block_align, fmt.channels
        )));
    }
    if rest.len() < declared {
        return Err(AudioError::TruncatedData(format!(
            "data chunk declares {declared} bytes but only {} remain",
            rest.len()
        )));
    }
    if !declared.is_multiple_of(frame_bytes) {
        return Err(AudioError::TruncatedData(format!(
            "data chunk of {declared} bytes ends inside a sample frame"
        )));
    }
    let samples = rest[..declared]
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect();
    Ok(PcmData {
        channels: fmt.channels,
        bits_per_sample: fmt.bits_per_sample,
        sample_rate: fmt.sample_rate,
        samples,
    })
}

/// Converts decoded PCM into a normalized mono clip at the canonical rate.
pub fn downmix_to_mono(pcm: &PcmData, source_path: &str) -> Result<AudioClip, AudioError> {
    if pcm.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} bits per sample",
            pcm.bits_per_sample
        )));
    }
    if pcm.sample_rate != CANONICAL_SAMPLE_RATE {
        return Err(AudioError::UnsupportedFormat(pcm.sample_rate));
    }
    let samples: Vec<f64> = match pcm.channels {
        1 => pcm.samples.iter().map(|&s| s as f64 / FULL_SCALE).collect(),
        2 => pcm
            .samples
            .chunks_exact(2)
            .map(|lr| (lr[0] as f64 + lr[1] as f64) / 2.0 / FULL_SCALE)
            .collect(),
        n => return Err(AudioError::UnsupportedChannelCount(n)),
    };
    AudioClip::new(samples, pcm.sample_rate, source_path)
}

/// Reads, decodes and downmixes a WAV file.
pub fn read_clip(path: &Path) -> Result<AudioClip, AudioError> {
    let bytes = std::fs::read(path).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let pcm = decode_wav(&bytes)?;
    downmix_to_mono(&pcm, &path.display().to_string())
}

/// Encodes interleaved 16-bit samples as a canonical 44-byte-header WAV.
pub fn encode_wav(pcm: &PcmData) -> Vec<u8> {
    let data_len = (pcm.samples.len() * 2) as u32;
    let block_align = pcm.channels * 2;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT_TAG.to_le_bytes());
    out.extend_from_slice(&pcm.channels.to_le_bytes());
    out.extend_from_slice(&pcm.sample_rate.to_le_bytes());
    out.extend_from_slice(&(pcm.sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in &pcm.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

/// Quantizes a mono clip back to 16-bit PCM (round to nearest, saturating).
pub fn clip_to_pcm(clip: &AudioClip) -> PcmData {
    let samples = clip
        .samples()
        .iter()
        .map(|&s| (s * FULL_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16)
        .collect();
    PcmData {
        channels: 1,
        bits_per_sample: 16,
        sample_rate: clip.sample_rate_hz(),
        samples,
    }
}
