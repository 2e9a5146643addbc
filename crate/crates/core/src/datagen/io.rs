//! Dataset container.
//!
//! ```text
//! magic        8 bytes  "SPARKDS1"
//! version      u32      (1)
//! height       u32
//! width        u32
//! channels     u32
//! episodes     u32
//! channel table: per channel  u32 byte length + UTF-8 name
//! stats:         per channel  f64 mean, f64 std
//! per episode:
//!   δ length   u32, then δ as f64
//!   split      u8       (0 in-domain, 1 out-of-domain)
//!   seed       u64
//!   T_total    u32
//!   payload    T_total·H·W·channels f64, row-major [t][node][channel]
//! crc32        u32      over every preceding byte
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Result, SparkError};
use crate::tensor::Tensor;

use super::{ChannelStats, Episode, EpisodeDataset, GeneratorKind, Split};

pub const MAGIC: &[u8; 8] = b"SPARKDS1";
pub const VERSION: u32 = 1;

pub fn encode_dataset(ds: &EpisodeDataset) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u32(ds.height as u32);
    w.u32(ds.width as u32);
    w.u32(ds.channels.len() as u32);
    w.u32(ds.episodes.len() as u32);
    for name in &ds.channels {
        w.str(name);
    }
    for s in &ds.stats {
        w.f64(s.mean);
        w.f64(s.std);
    }
    for ep in &ds.episodes {
        w.u32(ep.params.len() as u32);
        w.f64s(&ep.params);
        w.u8(ep.split.tag());
        w.u64(ep.seed);
        w.u32(ep.len() as u32);
        w.f64s(ep.frames.data());
    }
    w.finish()
}

pub fn decode_dataset(bytes: &[u8]) -> Result<EpisodeDataset> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(8, "magic")?;
    if magic != MAGIC {
        return Err(SparkError::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(magic),
            std::str::from_utf8(MAGIC).expect("ascii magic")
        )));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(SparkError::Version {
            found: version,
            expected: VERSION,
        });
    }
    let height = r.u32("height")? as usize;
    let width = r.u32("width")? as usize;
    let channels = r.u32("channel count")? as usize;
    let count = r.u32("episode count")? as usize;
    if height == 0 || width == 0 || channels == 0 {
        return Err(SparkError::Format("zero grid extent or channel count".into()));
    }
    let names = (0..channels)
        .map(|_| r.str("channel name"))
        .collect::<Result<Vec<_>>>()?;
    let mut stats = Vec::with_capacity(channels);
    for _ in 0..channels {
        let mean = r.f64("normalization stats")?;
        let std = r.f64("normalization stats")?;
        stats.push(ChannelStats { mean, std });
    }
    let generator = GeneratorKind::from_channels(&names)
        .ok_or_else(|| SparkError::Format(format!("unknown channel set {names:?}")))?;
    let nodes = height * width;
    let mut episodes = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let plen = r.u32("parameter length")? as usize;
        let params = r.f64s(plen, "parameters")?;
        let tag = r.u8("split tag")?;
        let split = Split::from_tag(tag).ok_or_else(|| SparkError::Format(format!("unknown split tag {tag}")))?;
        let seed = r.u64("seed")?;
        let t_total = r.u32("frame count")? as usize;
        let payload = r.f64s(t_total * nodes * channels, "episode payload")?;
        let frames = Tensor::new(vec![t_total, nodes, channels], payload)
            .map_err(|_| SparkError::Format("episode with zero frames".into()))?;
        episodes.push(Episode {
            params,
            frames,
            generator,
            seed,
            split,
        });
    }
    r.verify_trailer()?;
    Ok(EpisodeDataset {
        height,
        width,
        channels: names,
        stats,
        episodes,
    })
}

pub fn save_dataset(ds: &EpisodeDataset, path: &Path) -> Result<()> {
    std::fs::write(path, encode_dataset(ds))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<EpisodeDataset> {
    decode_dataset(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, DatasetConfig, NavierStokesConfig, OodRule};
    use crate::grid::GridGraph;

    fn small() -> EpisodeDataset {
        let cfg = DatasetConfig {
            params: vec![vec![1e-3], vec![1e-4]],
            ood_rule: OodRule::Explicit { out: vec![vec![1e-4]] },
            episodes_per_param: 1,
            navier_stokes: NavierStokesConfig {
                frames: 2,
                steps_per_frame: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        generate_dataset(&cfg, &GridGraph::periodic(4, 4).unwrap(), 1, 1).unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let ds = small();
        let bytes = encode_dataset(&ds);
        let back = decode_dataset(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(encode_dataset(&back), bytes);
    }

    #[test]
    fn distinct_errors_for_each_corruption() {
        let bytes = encode_dataset(&small());

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_dataset(&bad_magic), Err(SparkError::Format(_))));

        let mut bad_version = bytes.clone();
        bad_version[8] = 9;
        assert!(matches!(
            decode_dataset(&bad_version),
            Err(SparkError::Version { found: 9, .. })
        ));

        let truncated = &bytes[..bytes.len() - 20];
        assert!(matches!(decode_dataset(truncated), Err(SparkError::Truncated(_))));

        let mut flipped = bytes.clone();
        let mid = bytes.len() - 40;
        flipped[mid] ^= 0x01;
        assert!(matches!(decode_dataset(&flipped), Err(SparkError::Checksum { .. })));
    }
}
