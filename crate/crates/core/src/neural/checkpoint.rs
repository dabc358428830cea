//! Binary checkpoint: magic, version, JSON header, name/shape manifest,
//! then little-endian f32 weights and optional Adam moments.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainConfig};
use super::model::{Model, ParamStore};
use super::train::AdamState;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SEAMCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    train: Option<TrainConfig>,
    step: usize,
    optimizer: bool,
}

pub struct Checkpoint {
    pub model: Model,
    pub train: Option<TrainConfig>,
    pub adam: Option<AdamState>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("value {v} does not fit in 32 bits")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_blob(out: &mut Vec<u8>, values: &[Array2<f64>]) {
    for a in values {
        for x in a.iter() {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
}

pub fn to_bytes(model: &Model, train: Option<&TrainConfig>, adam: Option<&AdamState>) -> Result<Vec<u8>> {
    let header = Header {
        model: model.config.clone(),
        train: train.cloned(),
        step: adam.map_or(0, |a| a.step),
        optimizer: adam.is_some(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION as usize)?;
    put_u32(&mut out, json.len())?;
    out.extend_from_slice(&json);
    put_u32(&mut out, model.params.len())?;
    for (name, v) in model.params.names.iter().zip(&model.params.values) {
        put_u32(&mut out, name.len())?;
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, v.nrows())?;
        put_u32(&mut out, v.ncols())?;
    }
    put_blob(&mut out, &model.params.values);
    if let Some(a) = adam {
        put_blob(&mut out, &a.m);
        put_blob(&mut out, &a.v);
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn blob(&mut self, shapes: &[(usize, usize)]) -> Result<Vec<Array2<f64>>> {
        shapes
            .iter()
            .map(|&(r, c)| {
                let raw = self.take(r * c * 4)?;
                let vals =
                    raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64).collect();
                Ok(Array2::from_shape_vec((r, c), vals).expect("shape matches length"))
            })
            .collect()
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let len = r.u32()?;
    let header: Header = serde_json::from_slice(r.take(len)?)?;
    let count = r.u32()?;
    let mut names = Vec::with_capacity(count);
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let n = r.u32()?;
        let name =
            std::str::from_utf8(r.take(n)?).map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
        names.push(name.to_string());
        shapes.push((r.u32()?, r.u32()?));
    }
    let values = r.blob(&shapes)?;
    let adam = if header.optimizer {
        Some(AdamState { m: r.blob(&shapes)?, v: r.blob(&shapes)?, step: header.step })
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let model = Model::from_params(header.model, ParamStore { names, values })?;
    Ok(Checkpoint { model, train: header.train, adam })
}

pub fn save(
    path: impl AsRef<Path>,
    model: &Model,
    train: Option<&TrainConfig>,
    adam: Option<&AdamState>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model, train, adam)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_f32_values() {
        let m = Model::new(ModelConfig::tiny(16), 7).unwrap();
        let adam = AdamState { m: m.params.zeros_like(), v: m.params.zeros_like(), step: 42 };
        let bytes = to_bytes(&m, Some(&TrainConfig::default()), Some(&adam)).unwrap();
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back.model.config, m.config);
        assert_eq!(back.adam.as_ref().unwrap().step, 42);
        assert_eq!(back.train, Some(TrainConfig::default()));
        for (a, b) in m.params.values.iter().zip(&back.model.params.values) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
        assert_eq!(to_bytes(&back.model, back.train.as_ref(), back.adam.as_ref()).unwrap(), bytes);
    }

    #[test]
    fn corrupt_files_rejected() {
        let m = Model::new(ModelConfig::tiny(16), 7).unwrap();
        let bytes = to_bytes(&m, None, None).unwrap();
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(from_bytes(&magic).is_err());
    }
}
