//! Minimal RIFF/WAVE reader and writer: PCM16 and IEEE float32, mono or
//! multi-channel (averaged to mono at read time).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::real::Real;

use super::AudioBuffer;

/// Sample encoding for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

fn read_u16(data: &[u8], off: usize, what: &str) -> Result<u16> {
    data.get(off..off + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| Error::TruncatedChunk(what.into()))
}

fn read_u32(data: &[u8], off: usize, what: &str) -> Result<u32> {
    data.get(off..off + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::TruncatedChunk(what.into()))
}

/// Read a WAVE file into a mono buffer. Multi-channel input is averaged;
/// PCM16 samples map to [-1, 1) by dividing by 32768.
pub fn read_wav<F: Real>(path: impl AsRef<Path>) -> Result<AudioBuffer<F>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let data = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if data.len() < 12 || &data[0..4] != b"RIFF" || &data[8..12] != b"WAVE" {
        return Err(Error::NotWave(path.display().to_string()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut payload: Option<&[u8]> = None;
    let mut off = 12;
    while off + 8 <= data.len() {
        let id = &data[off..off + 4];
        let size = read_u32(&data, off + 4, "chunk size")? as usize;
        let body = data
            .get(off + 8..off + 8 + size)
            .ok_or_else(|| Error::TruncatedChunk(format!("{:?}", String::from_utf8_lossy(id))))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::TruncatedChunk("fmt ".into()));
                }
                let mut format = read_u16(body, 0, "fmt tag")?;
                let channels = read_u16(body, 2, "channels")?;
                let rate = read_u32(body, 4, "sample rate")?;
                let bits = read_u16(body, 14, "bits per sample")?;
                // WAVE_FORMAT_EXTENSIBLE carries the real tag in the GUID.
                if format == 0xFFFE && size >= 26 {
                    format = read_u16(body, 24, "extensible sub-format")?;
                }
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => payload = Some(body),
            _ => {}
        }
        off += 8 + size + (size & 1);
    }

    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| Error::TruncatedChunk("missing fmt chunk".into()))?;
    let payload = payload.ok_or_else(|| Error::TruncatedChunk("missing data chunk".into()))?;
    if channels == 0 {
        return Err(Error::UnsupportedEncoding("zero channels".into()));
    }

    let interleaved: Vec<F> = match (format, bits) {
        (1, 16) => payload
            .chunks_exact(2)
            .map(|b| {
                let v = i16::from_le_bytes([b[0], b[1]]);
                F::from_f64_lossy(v as f64 / 32768.0)
            })
            .collect(),
        (3, 32) => payload
            .chunks_exact(4)
            .map(|b| F::from_f64_lossy(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64))
            .collect(),
        (f, b) => {
            return Err(Error::UnsupportedEncoding(format!(
                "format tag {f}, {b} bits per sample"
            )))
        }
    };

    let ch = channels as usize;
    let n_frames = interleaved.len() / ch;
    let inv_ch = F::one() / F::from_usize_lossy(ch);
    let mono: Vec<F> = (0..n_frames)
        .map(|i| {
            let mut acc = F::zero();
            for c in 0..ch {
                acc += interleaved[i * ch + c];
            }
            acc * inv_ch
        })
        .collect();

    AudioBuffer::new(mono, rate)
}

/// Write a mono buffer as a standard WAVE file. PCM16 clamps samples to
/// [-1, 1 - 1/32768] before quantizing.
pub fn write_wav<F: Real>(
    buffer: &AudioBuffer<F>,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<()> {
    let path = path.as_ref();
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let bytes = encode_wav(buffer, encoding);
    let mut file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(&bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Serialize a buffer to in-memory WAVE bytes.
pub fn encode_wav<F: Real>(buffer: &AudioBuffer<F>, encoding: WavEncoding) -> Vec<u8> {
    let n = buffer.len();
    let (format_tag, bytes_per_sample): (u16, usize) = match encoding {
        WavEncoding::Pcm16 => (1, 2),
        WavEncoding::Float32 => (3, 4),
    };
    let data_size = n * bytes_per_sample;
    let mut out = Vec::with_capacity(44 + data_size);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_size) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&buffer.sample_rate().to_le_bytes());
    let byte_rate = buffer.sample_rate() * bytes_per_sample as u32;
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes()); // block align
    out.extend_from_slice(&((bytes_per_sample * 8) as u16).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_size as u32).to_le_bytes());
    match encoding {
        WavEncoding::Pcm16 => {
            let lo = -1.0f64;
            let hi = 1.0 - 1.0 / 32768.0;
            for &s in buffer.samples() {
                let v = s.to_f64_lossy().clamp(lo, hi);
                let q = (v * 32768.0).round() as i16;
                out.extend_from_slice(&q.to_le_bytes());
            }
        }
        WavEncoding::Float32 => {
            for &s in buffer.samples() {
                out.extend_from_slice(&(s.to_f64_lossy() as f32).to_le_bytes());
            }
        }
    }
    out
}
