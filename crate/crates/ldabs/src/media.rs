//! Video model: bitrate ladder, chunk manifests, GOP frame structure and
//! semantic (latent + metadata) size accounting.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("invalid bitrate ladder: {0}")]
    InvalidLadder(String),
    #[error("invalid GOP structure: {0}")]
    InvalidGop(String),
    #[error("invalid semantic profile: {0}")]
    InvalidProfile(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
}

/// Ascending set of available encoding bitrates in kbps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitrateLadder {
    pub bitrates_kbps: Vec<u32>,
}

impl BitrateLadder {
    pub fn new(bitrates_kbps: Vec<u32>) -> Result<Self, MediaError> {
        if bitrates_kbps.len() < 2 {
            return Err(MediaError::InvalidLadder("need at least two bitrates".into()));
        }
        for w in bitrates_kbps.windows(2) {
            if w[1] <= w[0] {
                return Err(MediaError::InvalidLadder(format!(
                    "bitrates must strictly ascend, {} after {}",
                    w[1], w[0]
                )));
            }
        }
        if bitrates_kbps[0] == 0 {
            return Err(MediaError::InvalidLadder("bitrates must be positive".into()));
        }
        Ok(Self { bitrates_kbps })
    }

    /// The de-facto research-standard six-rung ladder.
    pub fn standard() -> Self {
        Self::new(vec![300, 750, 1200, 1850, 2850, 4300]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.bitrates_kbps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bitrates_kbps.is_empty()
    }

    pub fn min_kbps(&self) -> u32 {
        self.bitrates_kbps[0]
    }

    pub fn max_kbps(&self) -> u32 {
        *self.bitrates_kbps.last().unwrap()
    }

    pub fn index_of(&self, kbps: u32) -> Option<usize> {
        self.bitrates_kbps.iter().position(|&b| b == kbps)
    }
}

/// Frame kinds of a compressed video stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameType {
    /// Independently coded reference frame.
    I,
    /// Forward-predicted frame.
    P,
    /// Bidirectionally predicted frame.
    B,
}

/// Repeating I/P/B frame pattern plus the raster geometry it codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GopStructure {
    /// Frame-type pattern, e.g. "IBBPBBPBBPBB"; must start with 'I'.
    pub pattern: String,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
}

impl GopStructure {
    pub fn new(pattern: &str, width: u32, height: u32, fps: f64) -> Result<Self, MediaError> {
        if pattern.is_empty() {
            return Err(MediaError::InvalidGop("pattern must not be empty".into()));
        }
        if !pattern.starts_with('I') {
            return Err(MediaError::InvalidGop(format!(
                "pattern must start with 'I', got {pattern:?}"
            )));
        }
        if let Some(bad) = pattern.chars().find(|c| !matches!(c, 'I' | 'P' | 'B')) {
            return Err(MediaError::InvalidGop(format!("invalid frame type {bad:?}")));
        }
        if width == 0 || height == 0 || fps <= 0.0 {
            return Err(MediaError::InvalidGop("width, height and fps must be positive".into()));
        }
        Ok(Self { pattern: pattern.to_string(), width, height, fps })
    }

    /// 720p @ 24 fps with the common broadcast GOP.
    pub fn standard() -> Self {
        Self::new("IBBPBBPBBPBB", 1280, 720, 24.0).unwrap()
    }

    /// Number of frames a chunk of `duration_s` seconds carries.
    pub fn frames_per_chunk(&self, duration_s: f64) -> usize {
        ((self.fps * duration_s).ceil() as usize).max(1)
    }

    /// Frame types of the first `count` frames, cycling the pattern.
    pub fn frame_types(&self, count: usize) -> impl Iterator<Item = FrameType> + '_ {
        self.pattern
            .chars()
            .map(|c| match c {
                'I' => FrameType::I,
                'P' => FrameType::P,
                _ => FrameType::B,
            })
            .cycle()
            .take(count)
    }
}

/// Sizing model for semantic transmission: latent geometry for I-frames and
/// adjustment-metadata byte budgets for dependent frames, plus the byte
/// allocation weights used to apportion encoded chunk bytes across frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticProfile {
    /// Spatial reduction per axis applied by the latent encoder.
    pub downsample_factor: u32,
    pub latent_channels: u32,
    pub bytes_per_latent_element: f64,
    pub metadata_bytes_p: u64,
    pub metadata_bytes_b: u64,
    pub frame_weight_i: f64,
    pub frame_weight_p: f64,
    pub frame_weight_b: f64,
}

impl Default for SemanticProfile {
    /// 8x spatial reduction into 4 channels of 8-bit latents, 2 KiB / 1 KiB
    /// metadata per P/B frame, and an 8:2:1 intra-chunk byte split.
    fn default() -> Self {
        Self {
            downsample_factor: 8,
            latent_channels: 4,
            bytes_per_latent_element: 1.0,
            metadata_bytes_p: 2048,
            metadata_bytes_b: 1024,
            frame_weight_i: 8.0,
            frame_weight_p: 2.0,
            frame_weight_b: 1.0,
        }
    }
}

impl SemanticProfile {
    pub fn validate(&self) -> Result<(), MediaError> {
        if self.downsample_factor < 1 || self.latent_channels < 1 {
            return Err(MediaError::InvalidProfile(
                "downsample_factor and latent_channels must be >= 1".into(),
            ));
        }
        if self.bytes_per_latent_element <= 0.0
            || self.metadata_bytes_p == 0
            || self.metadata_bytes_b == 0
        {
            return Err(MediaError::InvalidProfile("byte quantities must be positive".into()));
        }
        if self.frame_weight_i <= 0.0 || self.frame_weight_p <= 0.0 || self.frame_weight_b <= 0.0 {
            return Err(MediaError::InvalidProfile("frame weights must be positive".into()));
        }
        Ok(())
    }

    fn weight(&self, ty: FrameType) -> f64 {
        match ty {
            FrameType::I => self.frame_weight_i,
            FrameType::P => self.frame_weight_p,
            FrameType::B => self.frame_weight_b,
        }
    }
}

/// Per-chunk, per-bitrate description of a video: sizes, optional perceptual
/// quality scores, and the GOP layout shared by all chunks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkManifest {
    pub ladder: BitrateLadder,
    /// Chunk duration in seconds.
    pub chunk_duration_s: f64,
    /// sizes_bytes[k][m]: bytes of chunk k encoded at ladder rung m.
    pub sizes_bytes: Vec<Vec<u64>>,
    /// Optional perceptual scores, non-decreasing across the ladder.
    pub quality: Option<Vec<Vec<f64>>>,
    pub gop: GopStructure,
}

impl ChunkManifest {
    pub fn validate(&self) -> Result<(), MediaError> {
        if self.sizes_bytes.is_empty() {
            return Err(MediaError::InvalidManifest("need at least one chunk".into()));
        }
        if self.chunk_duration_s <= 0.0 {
            return Err(MediaError::InvalidManifest("chunk duration must be positive".into()));
        }
        let m = self.ladder.len();
        for (k, row) in self.sizes_bytes.iter().enumerate() {
            if row.len() != m {
                return Err(MediaError::InvalidManifest(format!(
                    "chunk {k}: {} sizes for {m} bitrates",
                    row.len()
                )));
            }
            if row[0] == 0 {
                return Err(MediaError::InvalidManifest(format!("chunk {k}: zero size")));
            }
            for w in row.windows(2) {
                if w[1] <= w[0] {
                    return Err(MediaError::InvalidManifest(format!(
                        "chunk {k}: sizes must strictly increase across bitrates"
                    )));
                }
            }
        }
        if let Some(q) = &self.quality {
            if q.len() != self.sizes_bytes.len() {
                return Err(MediaError::InvalidManifest("quality rows != chunk count".into()));
            }
            for (k, row) in q.iter().enumerate() {
                if row.len() != m {
                    return Err(MediaError::InvalidManifest(format!(
                        "chunk {k}: quality row length mismatch"
                    )));
                }
                for w in row.windows(2) {
                    if w[1] < w[0] {
                        return Err(MediaError::InvalidManifest(format!(
                            "chunk {k}: quality must be non-decreasing across bitrates"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn chunk_count(&self) -> usize {
        self.sizes_bytes.len()
    }

    /// Perceptual score of (chunk, rung): the stored column when present,
    /// otherwise the log-utility ln(a_m / a_1) so scoring stays
    /// self-consistent without external data.
    pub fn quality_score(&self, chunk: usize, rung: usize) -> f64 {
        match &self.quality {
            Some(q) => q[chunk][rung],
            None => {
                let a = self.ladder.bitrates_kbps[rung] as f64;
                (a / self.ladder.min_kbps() as f64).ln()
            }
        }
    }

    pub fn frames_per_chunk(&self) -> usize {
        self.gop.frames_per_chunk(self.chunk_duration_s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MediaError> {
        let m: ChunkManifest = serde_json::from_str(text)
            .map_err(|e| MediaError::InvalidManifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }
}

/// Generates a synthetic manifest: nominal chunk size is bitrate x duration,
/// perturbed per chunk by a seeded uniform factor in
/// [1 - size_noise, 1 + size_noise] shared across the ladder (preserving the
/// size monotonicity invariant), with quality[k][m] = ln(a_m / a_1).
pub fn generate_manifest(
    seed: u64,
    ladder: BitrateLadder,
    chunk_count: usize,
    chunk_duration_s: f64,
    gop: GopStructure,
    size_noise: f64,
) -> Result<ChunkManifest, MediaError> {
    if chunk_count == 0 {
        return Err(MediaError::InvalidManifest("chunk count must be >= 1".into()));
    }
    if !(0.0..0.5).contains(&size_noise) {
        return Err(MediaError::InvalidManifest(format!(
            "size_noise must be in [0, 0.5), got {size_noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_kbps = ladder.min_kbps() as f64;
    let mut sizes = Vec::with_capacity(chunk_count);
    let mut quality = Vec::with_capacity(chunk_count);
    for _ in 0..chunk_count {
        let factor = if size_noise > 0.0 {
            rng.gen_range(1.0 - size_noise..=1.0 + size_noise)
        } else {
            1.0
        };
        let row: Vec<u64> = ladder
            .bitrates_kbps
            .iter()
            .map(|&kbps| {
                let nominal_bytes = kbps as f64 * 1000.0 * chunk_duration_s / 8.0;
                (nominal_bytes * factor).round() as u64
            })
            .collect();
        sizes.push(row);
        quality.push(
            ladder.bitrates_kbps.iter().map(|&kbps| (kbps as f64 / min_kbps).ln()).collect(),
        );
    }
    let manifest = ChunkManifest {
        ladder,
        chunk_duration_s,
        sizes_bytes: sizes,
        quality: Some(quality),
        gop,
    };
    manifest.validate()?;
    Ok(manifest)
}

/// Apportions `chunk_bytes` across the chunk's frames proportionally to the
/// per-type weights, using largest-remainder rounding so the byte sum is
/// conserved exactly.
pub fn frame_sizes(
    chunk_bytes: u64,
    gop: &GopStructure,
    frame_count: usize,
    profile: &SemanticProfile,
) -> Vec<(FrameType, u64)> {
    let types: Vec<FrameType> = gop.frame_types(frame_count).collect();
    let total_weight: f64 = types.iter().map(|&t| profile.weight(t)).sum();
    let mut floors = Vec::with_capacity(types.len());
    let mut remainders = Vec::with_capacity(types.len());
    let mut assigned = 0u64;
    for &ty in &types {
        let ideal = chunk_bytes as f64 * profile.weight(ty) / total_weight;
        let floor = ideal.floor() as u64;
        floors.push(floor);
        remainders.push(ideal - floor as f64);
        assigned += floor;
    }
    let mut order: Vec<usize> = (0..types.len()).collect();
    order.sort_by(|&a, &b| remainders[b].partial_cmp(&remainders[a]).unwrap().then(a.cmp(&b)));
    let mut leftover = chunk_bytes - assigned;
    for &i in &order {
        if leftover == 0 {
            break;
        }
        floors[i] += 1;
        leftover -= 1;
    }
    types.into_iter().zip(floors).collect()
}

/// Bytes of one I-frame latent: ceil(width/f) x ceil(height/f) x channels x
/// bytes-per-element, rounded up to whole bytes.
pub fn latent_size(gop: &GopStructure, profile: &SemanticProfile) -> u64 {
    let f = profile.downsample_factor as u64;
    let w = (gop.width as u64).div_ceil(f);
    let h = (gop.height as u64).div_ceil(f);
    let elements = w * h * profile.latent_channels as u64;
    (elements as f64 * profile.bytes_per_latent_element).ceil() as u64
}

/// Bytes actually transmitted for one chunk in semantic mode: a latent per
/// I-frame plus fixed metadata per P/B frame. Depends only on the frame
/// structure, never on the encoded chunk size.
pub fn semantic_chunk_size(
    gop: &GopStructure,
    frame_count: usize,
    profile: &SemanticProfile,
) -> u64 {
    let latent = latent_size(gop, profile);
    gop.frame_types(frame_count)
        .map(|ty| match ty {
            FrameType::I => latent,
            FrameType::P => profile.metadata_bytes_p,
            FrameType::B => profile.metadata_bytes_b,
        })
        .sum()
}

/// Ratio of semantic transmission bytes to encoded chunk bytes. May exceed 1
/// for pathological profiles; reported, not clamped.
pub fn compression_ratio(
    chunk_bytes: u64,
    gop: &GopStructure,
    frame_count: usize,
    profile: &SemanticProfile,
) -> f64 {
    debug_assert!(chunk_bytes > 0);
    semantic_chunk_size(gop, frame_count, profile) as f64 / chunk_bytes as f64
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn frame_bytes_are_conserved(chunk_bytes in 1u64..10_000_000,
                                     frames in 1usize..200,
                                     wi in 0.5f64..16.0,
                                     wp in 0.1f64..8.0,
                                     wb in 0.1f64..8.0) {
            let gop = GopStructure::new("IBBPBBPBBPBB", 640, 360, 24.0).unwrap();
            let profile = SemanticProfile {
                frame_weight_i: wi,
                frame_weight_p: wp,
                frame_weight_b: wb,
                ..SemanticProfile::default()
            };
            let sizes = frame_sizes(chunk_bytes, &gop, frames, &profile);
            prop_assert_eq!(sizes.iter().map(|&(_, b)| b).sum::<u64>(), chunk_bytes);
        }

        #[test]
        fn generated_sizes_stay_monotone(seed in 0u64..500, noise in 0.0f64..0.49) {
            let m = generate_manifest(seed, BitrateLadder::standard(), 6, 4.0,
                                      GopStructure::standard(), noise).unwrap();
            for row in &m.sizes_bytes {
                for w in row.windows(2) {
                    prop_assert!(w[1] > w[0]);
                }
            }
        }

        #[test]
        fn semantic_size_increases_in_channels(channels in 1u32..16) {
            let gop = GopStructure::standard();
            let frames = gop.frames_per_chunk(4.0);
            let mut lo = SemanticProfile::default();
            lo.latent_channels = channels;
            let mut hi = lo.clone();
            hi.latent_channels = channels + 1;
            prop_assert!(
                semantic_chunk_size(&gop, frames, &hi) > semantic_chunk_size(&gop, frames, &lo)
            );
        }
    }
}
