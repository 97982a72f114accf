//! Canonical byte formats for trained models and encoded streams.
//!
//! Model: magic `ESPK`, version u16 LE, eight u32 LE header fields
//! (sample_rate, window, hop, n_mels, codebook_size, n_levels, n_groups,
//! griffin_lim_iters), then codebooks as f32 LE row-major, ordered
//! group-major then level-major.
//!
//! Stream: magic `ESPC`, version u16 LE, header (sample_rate u32, hop
//! u32, window u32, n_mels u16, codebook_size u32, n_levels u16,
//! n_levels_used u16, n_groups u16, n_frames u32), then codes as u16 LE,
//! frame-major then group then level.

use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::quantizer::{Codebook, CodeSequence, GrvqQuantizer, RvqQuantizer};
use crate::real::Real;

use super::{EncodedStream, SpectralCodec, StreamHeader};

pub const MODEL_MAGIC: [u8; 4] = *b"ESPK";
pub const STREAM_MAGIC: [u8; 4] = *b"ESPC";
pub const FORMAT_VERSION: u16 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated(what.into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(Error::BadMagic {
                expected,
                got: [got[0], got[1], got[2], got[3]],
            });
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u16("version")?;
        if v != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(v));
        }
        Ok(())
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let s = self.take(2, what)?;
        Ok(u16::from_le_bytes([s[0], s[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let s = self.take(4, what)?;
        Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        let s = self.take(4, what)?;
        Ok(f32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    }

    fn done(&self, what: &str) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::CorruptCodes(format!(
                "{what}: {} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Serialize a codec. Byte-identical across save/load/save because
/// codebooks are canonicalized to f32 at train time.
pub fn save_model<F: Real>(codec: &SpectralCodec<F>) -> Vec<u8> {
    let q = codec.quantizer();
    let group_dim = codec.n_mels() / q.n_groups();
    let mut out = Vec::with_capacity(
        30 + q.n_groups() * q.n_levels() * q.codebook_size() * group_dim * 4,
    );
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [
        codec.sample_rate(),
        codec.analysis().window_size as u32,
        codec.analysis().hop as u32,
        codec.n_mels() as u32,
        q.codebook_size() as u32,
        q.n_levels() as u32,
        q.n_groups() as u32,
        codec.griffin_lim_iters() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for g in 0..q.n_groups() {
        for l in 0..q.n_levels() {
            for row in q.group(g).codebook(l).rows() {
                for &v in row {
                    out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
                }
            }
        }
    }
    out
}

/// Reconstruct a codec from [`save_model`] bytes; the mel pseudo-inverse
/// is recomputed from the header.
pub fn load_model<F: Real>(bytes: &[u8]) -> Result<SpectralCodec<F>> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    r.version()?;
    let sample_rate = r.u32("sample_rate")?;
    let window = r.u32("window")? as usize;
    let hop = r.u32("hop")? as usize;
    let n_mels = r.u32("n_mels")? as usize;
    let codebook_size = r.u32("codebook_size")? as usize;
    let n_levels = r.u32("n_levels")? as usize;
    let n_groups = r.u32("n_groups")? as usize;
    let griffin_lim_iters = r.u32("griffin_lim_iters")? as usize;
    if sample_rate == 0 {
        return Err(Error::InvalidSampleRate(sample_rate as i64));
    }
    if n_groups == 0 || n_mels == 0 || n_mels % n_groups != 0 {
        return Err(Error::InvalidArgument(format!(
            "n_mels {n_mels} incompatible with {n_groups} groups"
        )));
    }
    let stft = StftConfig::new(window, hop)?;
    let group_dim = n_mels / n_groups;

    let mut groups = Vec::with_capacity(n_groups);
    for _ in 0..n_groups {
        let mut books = Vec::with_capacity(n_levels);
        for _ in 0..n_levels {
            let mut rows = Vec::with_capacity(codebook_size);
            for _ in 0..codebook_size {
                let mut row = Vec::with_capacity(group_dim);
                for _ in 0..group_dim {
                    row.push(F::from_f64_lossy(r.f32("codebook entry")? as f64));
                }
                rows.push(row);
            }
            books.push(Codebook::from_rows(rows)?);
        }
        groups.push(RvqQuantizer::from_codebooks(books)?);
    }
    r.done("model")?;
    SpectralCodec::from_parts(
        stft,
        n_mels,
        sample_rate,
        GrvqQuantizer::from_groups(groups)?,
        griffin_lim_iters,
    )
}

/// Serialize an encoded stream. Payload size is exactly
/// `n_frames * n_levels_used * n_groups * 2` bytes.
pub fn save_stream(stream: &EncodedStream) -> Vec<u8> {
    let h = &stream.header;
    let mut out = Vec::with_capacity(31 + stream.codes.raw().len() * 2);
    out.extend_from_slice(&STREAM_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&h.sample_rate.to_le_bytes());
    out.extend_from_slice(&h.hop.to_le_bytes());
    out.extend_from_slice(&h.window.to_le_bytes());
    out.extend_from_slice(&h.n_mels.to_le_bytes());
    out.extend_from_slice(&h.codebook_size.to_le_bytes());
    out.extend_from_slice(&h.n_levels.to_le_bytes());
    out.extend_from_slice(&h.n_levels_used.to_le_bytes());
    out.extend_from_slice(&h.n_groups.to_le_bytes());
    out.extend_from_slice(&h.n_frames.to_le_bytes());
    for &c in stream.codes.raw() {
        out.extend_from_slice(&(c as u16).to_le_bytes());
    }
    out
}

/// Parse [`save_stream`] bytes, validating code indices against the header.
pub fn load_stream(bytes: &[u8]) -> Result<EncodedStream> {
    let mut r = Reader::new(bytes);
    r.magic(STREAM_MAGIC)?;
    r.version()?;
    let header = StreamHeader {
        sample_rate: r.u32("sample_rate")?,
        hop: r.u32("hop")?,
        window: r.u32("window")?,
        n_mels: r.u16("n_mels")?,
        codebook_size: r.u32("codebook_size")?,
        n_levels: r.u16("n_levels")?,
        n_levels_used: r.u16("n_levels_used")?,
        n_groups: r.u16("n_groups")?,
        n_frames: r.u32("n_frames")?,
    };
    if header.hop == 0 || header.sample_rate == 0 {
        return Err(Error::HeaderMismatch("zero hop or sample rate".into()));
    }
    let n = header.n_frames as usize * header.n_groups as usize * header.n_levels_used as usize;
    let mut codes = Vec::with_capacity(n);
    for _ in 0..n {
        codes.push(r.u16("code")? as u32);
    }
    r.done("stream")?;
    let frame_rate = header.sample_rate as f64 / header.hop as f64;
    let codes = CodeSequence::new(
        codes,
        header.n_frames as usize,
        header.n_groups as usize,
        header.n_levels_used as usize,
        header.codebook_size as usize,
        frame_rate,
    )?;
    EncodedStream::new(header, codes, false)
}
