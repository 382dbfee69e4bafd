//! Audio containers and 16-bit PCM WAV input/output.
//!
//! Decoding is deliberately narrow: RIFF WAV, 16-bit integer PCM, mono or
//! stereo. Everything else is rejected with an explicit error so that a
//! mis-encoded corpus fails loudly instead of producing garbage features.

use crate::error::{Error, Result};
use std::path::Path;

/// Sample rates the feature front end accepts. Frame arithmetic works at the
/// native rate; nothing is resampled.
pub const SUPPORTED_SAMPLE_RATES: [u32; 4] = [8000, 16000, 44100, 48000];

/// Decoded audio: per-channel samples scaled to `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct AudioBuffer {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Build a buffer from per-channel sample vectors.
    ///
    /// All channels must have equal length, samples must be finite and in
    /// `[-1, 1]`, and the sample rate must be one of the supported rates.
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() || channels.len() > 2 {
            return Err(Error::Config(format!(
                "expected 1 or 2 channels, got {}",
                channels.len()
            )));
        }
        if !SUPPORTED_SAMPLE_RATES.contains(&sample_rate) {
            return Err(Error::Config(format!(
                "unsupported sample rate {sample_rate} (supported: {SUPPORTED_SAMPLE_RATES:?})"
            )));
        }
        let len = channels[0].len();
        for (i, ch) in channels.iter().enumerate() {
            if ch.len() != len {
                return Err(Error::Config(format!(
                    "channel {i} has {} samples, channel 0 has {len}",
                    ch.len()
                )));
            }
            if ch.iter().any(|s| !s.is_finite() || s.abs() > 1.0) {
                return Err(Error::Config(format!(
                    "channel {i} contains samples outside [-1, 1]"
                )));
            }
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn num_samples(&self) -> usize {
        self.channels[0].len()
    }

    pub fn duration_s(&self) -> f64 {
        self.num_samples() as f64 / self.sample_rate as f64
    }

    /// Samples of one channel. Panics on an out-of-range channel index;
    /// callers validate indices at the API boundary.
    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    /// Decode a 16-bit PCM RIFF WAV file.
    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = hound::WavReader::open(path)
            .map_err(|e| Error::WavFormat(format!("{}: {e}", path.display())))?;
        let spec = reader.spec();
        if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
            return Err(Error::WavFormat(format!(
                "{}: only 16-bit integer PCM is supported (got {:?} {} bit)",
                path.display(),
                spec.sample_format,
                spec.bits_per_sample
            )));
        }
        if spec.channels == 0 || spec.channels > 2 {
            return Err(Error::WavFormat(format!(
                "{}: expected 1 or 2 channels, got {}",
                path.display(),
                spec.channels
            )));
        }
        let n_channels = spec.channels as usize;
        let mut channels = vec![Vec::new(); n_channels];
        for (i, sample) in reader.into_samples::<i16>().enumerate() {
            let s = sample.map_err(|e| Error::WavFormat(format!("{}: {e}", path.display())))?;
            channels[i % n_channels].push(s as f64 / 32768.0);
        }
        Self::new(channels, spec.sample_rate)
    }

    /// Write the buffer as a 16-bit PCM WAV file.
    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let spec = hound::WavSpec {
            channels: self.channel_count() as u16,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(path, spec)
            .map_err(|e| Error::WavFormat(format!("{}: {e}", path.display())))?;
        for i in 0..self.num_samples() {
            for ch in &self.channels {
                let v = (ch[i] * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
                writer
                    .write_sample(v)
                    .map_err(|e| Error::WavFormat(format!("{}: {e}", path.display())))?;
            }
        }
        writer
            .finalize()
            .map_err(|e| Error::WavFormat(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}
