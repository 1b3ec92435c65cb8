//! WAV reading (16-bit PCM or 32-bit float, mono or stereo) and 16-bit
//! writing.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use taanseg_core::dsp::AudioClip;

use crate::error::{IoError, Result};

const I16_SCALE: f64 = 32768.0;

fn hound_err(path: &Path, e: hound::Error) -> IoError {
    match e {
        hound::Error::IoError(io) => IoError::io(path, io),
        hound::Error::Unsupported => IoError::format(path, "unsupported WAV encoding (only PCM 16-bit and float 32-bit)"),
        other => IoError::format(path, other.to_string()),
    }
}

/// Reads a WAV file, averaging channels to mono and scaling to `[-1, 1]`
/// (`i16 / 32768`).
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let mut reader = WavReader::open(path).map_err(|e| hound_err(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(IoError::format(path, format!("{channels} channels; expected mono or stereo")));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / I16_SCALE))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| hound_err(path, e))?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| hound_err(path, e))?,
        (fmt, bits) => {
            return Err(IoError::format(
                path,
                format!("{bits}-bit {fmt:?} samples; expected 16-bit PCM or 32-bit float"),
            ))
        }
    };
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    };
    Ok(AudioClip::new(mono, spec.sample_rate)?)
}

/// Quantizes to 16-bit PCM with rounding and clipping.
pub fn to_i16(x: f64) -> i16 {
    (x * I16_SCALE).round().clamp(-32768.0, 32767.0) as i16
}

pub fn write_wav(clip: &AudioClip, path: &Path) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec).map_err(|e| hound_err(path, e))?;
    for &s in clip.samples() {
        w.write_sample(to_i16(s)).map_err(|e| hound_err(path, e))?;
    }
    w.finalize().map_err(|e| hound_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_maps_below_one() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        for v in [32767i16, -32768, 0] {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.samples(), &[32767.0 / 32768.0, -1.0, 0.0]);
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 16000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        for _ in 0..4 {
            w.write_sample(0.5f32).unwrap();
            w.write_sample(-0.5f32).unwrap();
        }
        w.finalize().unwrap();
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.samples(), &[0.0; 4]);
    }

    #[test]
    fn silence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.wav");
        write_wav(&AudioClip::new(vec![0.0; 8000], 8000).unwrap(), &p).unwrap();
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.len(), 8000);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn other_encodings_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("24.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(1i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(IoError::Format { .. })));
    }

    #[test]
    fn quantizer_clips() {
        assert_eq!(to_i16(1.0), 32767);
        assert_eq!(to_i16(-2.0), -32768);
        assert_eq!(to_i16(0.5), 16384);
    }
}
