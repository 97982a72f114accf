//! Bitrate arithmetic and the random bitrate-control draw.

use rand::Rng;

/// Number of quantizer levels needed to hit `target_bps`:
/// `round(target / (log2(B) * frame_rate))`, clamped to `[1, max_levels]`.
pub fn levels_for_bitrate(
    target_bps: f64,
    codebook_size: usize,
    frame_rate: f64,
    max_levels: usize,
) -> usize {
    assert!(target_bps > 0.0, "target bitrate must be positive");
    assert!(frame_rate > 0.0, "frame rate must be positive");
    assert!(codebook_size >= 2, "codebook size must be >= 2");
    let bits_per_code = (codebook_size as f64).log2();
    let levels = (target_bps / (bits_per_code * frame_rate)).round() as i64;
    levels.clamp(1, max_levels as i64) as usize
}

/// Uniform draw from a set of bitrates, reproducible from the caller's
/// seeded RNG stream.
pub fn sample_bitrate<R: Rng>(choices: &[u64], rng: &mut R) -> Option<u64> {
    if choices.is_empty() {
        return None;
    }
    Some(choices[rng.gen_range(0..choices.len())])
}
