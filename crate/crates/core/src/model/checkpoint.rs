//! Binary checkpoint container. All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes   "CSTACKPT"
//! version      u32       1
//! config_len   u32       byte length of the config document
//! config       UTF-8     ModelConfig as JSON
//! count        u32       number of tensors
//! per tensor, in ModelParams::named order:
//!   name_len   u32
//!   name       UTF-8
//!   rank       u32
//!   dims       u64 × rank
//!   values     f64 × product(dims)
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{ModelConfig, ModelError, ModelParams};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CSTACKPT";
const VERSION: u32 = 1;

fn corrupt(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

pub fn write_checkpoint(params: &ModelParams, out: &mut impl Write) -> Result<(), ModelError> {
    let config = serde_json::to_vec(&params.config).map_err(|e| corrupt(e.to_string()))?;
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(config.len() as u32).to_le_bytes())?;
    out.write_all(&config)?;
    let named = params.named();
    out.write_all(&(named.len() as u32).to_le_bytes())?;
    for (name, t) in named {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.rank() as u32).to_le_bytes())?;
        for &d in t.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn utf8(&mut self, n: usize) -> Result<&'a str, ModelError> {
        std::str::from_utf8(self.take(n)?).map_err(|e| corrupt(e.to_string()))
    }
}

pub fn read_checkpoint(input: &mut impl Read) -> Result<ModelParams, ModelError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(corrupt("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let config_len = r.u32()? as usize;
    let config: ModelConfig =
        serde_json::from_str(r.utf8(config_len)?).map_err(|e| corrupt(format!("config: {e}")))?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = r.utf8(name_len)?.to_string();
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(usize::try_from(r.u64()?).map_err(|_| corrupt("dimension overflow"))?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| corrupt("size overflow"))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| corrupt("size overflow"))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| corrupt(format!("{name}: {e}")))?;
        tensors.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    ModelParams::from_named(&config, tensors)
}

/// Writes atomically: a sibling temporary file is renamed into place.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<(), ModelError> {
    let mut buf = Vec::new();
    write_checkpoint(params, &mut buf)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, ModelError> {
    read_checkpoint(&mut fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::AttentionMode;
    use crate::model::ConvSpec;
    use crate::skeleton::stream_rng;

    fn tiny() -> ModelParams {
        let c = ModelConfig {
            frames: 4,
            joints: 25,
            interp_joints: 5,
            convs: [ConvSpec::new(2, 3, 1, 1), ConvSpec::new(2, 3, 2, 1), ConvSpec::new(2, 2, 1, 0)],
            fc_widths: [4, 3],
            num_classes: 2,
            mode: AttentionMode::WithoutT,
            center: false,
        };
        ModelParams::init(&c, &mut stream_rng(1, 2)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let p = tiny();
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        let back = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(back, p);
        let mut again = Vec::new();
        write_checkpoint(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_corruption() {
        let mut buf = Vec::new();
        write_checkpoint(&tiny(), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&mut bad.as_slice()).is_err());
        let truncated = &buf[..buf.len() - 3];
        assert!(read_checkpoint(&mut &truncated[..]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_checkpoint(&mut extra.as_slice()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let p = tiny();
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), p);
        assert!(!path.with_extension("tmp").exists());
    }
}
