//! Binary accumulator checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | field                                   |
//! |-------:|-----:|-----------------------------------------|
//! | 0      | 8    | magic `CMBECACC`                        |
//! | 8      | 4    | format version (`u32`, currently 1)     |
//! | 12     | 4    | reserved, zero                          |
//! | 16     | 8    | config hash (`u64`)                     |
//! | 24     | 8    | lattice cells `M` (`u64`)               |
//! | 32     | 8    | number `L` of `f64` values that follow  |
//! | 40     | 8 L  | payload                                 |
//!
//! The payload is the snapshot count `S` followed by `S` accumulator records in
//! the order of [`EnsembleAccumulator::to_flat`].

use std::fs;
use std::io::Write;
use std::path::Path;

use super::ensemble::EnsembleAccumulator;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CMBECACC";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 40;

pub fn save_checkpoint(path: &Path, config_hash: u64, snapshots: &[EnsembleAccumulator]) -> Result<()> {
    let m = snapshots.first().map_or(0, |a| a.m_cells);
    let mut payload = vec![snapshots.len() as f64];
    for acc in snapshots {
        payload.extend(acc.to_flat());
    }
    let mut bytes = Vec::with_capacity(HEADER_LEN + 8 * payload.len());
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&0u32.to_le_bytes());
    bytes.extend_from_slice(&config_hash.to_le_bytes());
    bytes.extend_from_slice(&(m as u64).to_le_bytes());
    bytes.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    for v in payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    // write then rename so an interrupted save never leaves a torn file
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, expected_hash: u64, expected_cells: usize) -> Result<Vec<EnsembleAccumulator>> {
    let bytes = fs::read(path)?;
    if bytes.len() < HEADER_LEN || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not an accumulator checkpoint".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let hash = u64_at(16);
    if hash != expected_hash {
        return Err(Error::Checkpoint(format!(
            "config hash {hash:016x} does not match this run ({expected_hash:016x})"
        )));
    }
    let m = u64_at(24) as usize;
    if m != expected_cells {
        return Err(Error::Checkpoint(format!("checkpoint has {m} cells, run has {expected_cells}")));
    }
    let len = u64_at(32) as usize;
    if bytes.len() != HEADER_LEN + 8 * len {
        return Err(Error::Checkpoint(format!("payload truncated: expected {len} values")));
    }
    let values: Vec<f64> =
        bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let count = values.first().copied().unwrap_or(0.0) as usize;
    let rec = EnsembleAccumulator::flat_len(m);
    if values.len() != 1 + count * rec {
        return Err(Error::Checkpoint("payload length does not match the snapshot count".into()));
    }
    values[1..].chunks_exact(rec).map(EnsembleAccumulator::from_flat).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<EnsembleAccumulator> {
        let mut a = EnsembleAccumulator::new(3, 1);
        a.count = 5;
        a.n_re = vec![0.1, 0.2, 0.3];
        a.moments = [1.0, 2.0, 3.0];
        let mut b = a.clone();
        b.pair_re = vec![9.0, 8.0, 7.0];
        vec![a, b]
    }

    #[test]
    fn round_trip_and_header_layout() {
        let path = std::env::temp_dir().join(format!("cmbec-ckpt-{}.bin", std::process::id()));
        save_checkpoint(&path, 0xdead_beef, &sample()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"CMBECACC");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 0xdead_beef);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 3);
        let len = u64::from_le_bytes(bytes[32..40].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 40 + 8 * len);
        assert_eq!(load_checkpoint(&path, 0xdead_beef, 3).unwrap(), sample());
        assert!(load_checkpoint(&path, 1, 3).is_err());
        assert!(load_checkpoint(&path, 0xdead_beef, 4).is_err());
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(load_checkpoint(&path, 0xdead_beef, 3).is_err());
        std::fs::remove_file(&path).unwrap();
    }
}
