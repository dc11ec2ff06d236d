//! Binary container for TT trains.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "MXTT" | u32 version | u32 dtype | u32 m | (m+1) × u64 ranks | m × u64 dims | cores
//! ```
//!
//! `dtype = 1` means 64-bit floats. Cores follow in order, each row-major over
//! `(r_{j−1}, N_j, r_j)`. The truncation log and schedule go to a JSON
//! sidecar next to the binary file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_train::{RankSchedule, TTCore, TTTrain, TruncationStep};

pub const MAGIC: &[u8; 4] = b"MXTT";
pub const VERSION: u32 = 1;
pub const DTYPE_F64_LE: u32 = 1;

/// Largest core count or dimension accepted when reading, to reject corrupt
/// headers before allocating.
const MAX_HEADER_VALUE: u64 = 1 << 32;

pub fn write_train<W: Write>(mut w: W, train: &TTTrain) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&DTYPE_F64_LE.to_le_bytes())?;
    w.write_all(&(train.m() as u32).to_le_bytes())?;
    for r in train.ranks() {
        w.write_all(&(r as u64).to_le_bytes())?;
    }
    for n in train.mode_dims() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for core in &train.cores {
        for v in &core.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let v = u64::from_le_bytes(b);
    if v > MAX_HEADER_VALUE {
        return Err(Error::Format(format!("header value {v} out of range")));
    }
    Ok(v as usize)
}

/// Reads cores only; the truncation log lives in the sidecar.
pub fn read_train<R: Read>(mut r: R) -> Result<TTTrain> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dtype = read_u32(&mut r)?;
    if dtype != DTYPE_F64_LE {
        return Err(Error::Format(format!("unsupported element type {dtype}")));
    }
    let m = read_u32(&mut r)? as usize;
    if m == 0 {
        return Err(Error::Format("train without cores".into()));
    }
    let ranks = (0..=m).map(|_| read_u64(&mut r)).collect::<Result<Vec<_>>>()?;
    let dims = (0..m).map(|_| read_u64(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut cores = Vec::with_capacity(m);
    for j in 0..m {
        let len = ranks[j]
            .checked_mul(dims[j])
            .and_then(|v| v.checked_mul(ranks[j + 1]))
            .ok_or_else(|| Error::Format("core size overflows".into()))?;
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        cores.push(TTCore::new(ranks[j], dims[j], ranks[j + 1], data)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after last core".into()));
    }
    TTTrain::from_cores(cores).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub ranks: Vec<usize>,
    pub mode_dims: Vec<usize>,
    pub truncation_log: Vec<TruncationStep>,
    pub schedule: Option<RankSchedule>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes the binary container at `path` and the sidecar beside it.
pub fn save(path: &Path, train: &TTTrain) -> Result<()> {
    write_train(BufWriter::new(File::create(path)?), train)?;
    let sidecar = Sidecar {
        ranks: train.ranks(),
        mode_dims: train.mode_dims(),
        truncation_log: train.truncation_log.clone(),
        schedule: train.schedule.clone(),
    };
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(sidecar_path(path), text)?;
    Ok(())
}

/// Reads a container and, when present, its sidecar.
pub fn load(path: &Path) -> Result<TTTrain> {
    let mut train = read_train(BufReader::new(File::open(path)?))?;
    let side = sidecar_path(path);
    if side.exists() {
        let sidecar: Sidecar =
            serde_json::from_str(&std::fs::read_to_string(side)?).map_err(|e| Error::Format(e.to_string()))?;
        if sidecar.ranks != train.ranks() || sidecar.mode_dims != train.mode_dims() {
            return Err(Error::Format("sidecar does not match container".into()));
        }
        train.truncation_log = sidecar.truncation_log;
        train.schedule = sidecar.schedule;
    }
    Ok(train)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DenseTensor;
    use crate::tensor_train::{tt_svd, TtPolicy};

    fn sample_train() -> TTTrain {
        let data: Vec<f64> = (0..60).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let t = DenseTensor::from_vec(&[3, 4, 5], data).unwrap();
        tt_svd(&t, &TtPolicy::FixedRanks(vec![2, 3])).unwrap()
    }

    #[test]
    fn header_layout() {
        let train = sample_train();
        let mut buf = Vec::new();
        write_train(&mut buf, &train).unwrap();
        assert_eq!(&buf[..4], b"MXTT");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 3);
        let header = 16 + 4 * 8 + 3 * 8;
        let entries = 3 * 2 + 2 * 4 * 3 + 3 * 5;
        assert_eq!(buf.len(), header + entries * 8);
    }

    #[test]
    fn bit_exact_round_trip() {
        let train = sample_train();
        let mut buf = Vec::new();
        write_train(&mut buf, &train).unwrap();
        let back = read_train(buf.as_slice()).unwrap();
        assert_eq!(back.cores, train.cores);
        let mut again = Vec::new();
        write_train(&mut again, &back).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn file_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.mxtt");
        let train = sample_train();
        save(&path, &train).unwrap();
        assert!(sidecar_path(&path).exists());
        assert_eq!(load(&path).unwrap(), train);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let train = sample_train();
        let mut buf = Vec::new();
        write_train(&mut buf, &train).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_train(bad.as_slice()), Err(Error::Format(_))));
        assert!(read_train(&buf[..buf.len() - 3]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_train(long.as_slice()), Err(Error::Format(_))));
    }
}
