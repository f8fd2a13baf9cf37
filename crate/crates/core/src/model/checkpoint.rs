//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `RTCKPT01`, a little-endian `u64` header
//! length, a JSON header (metadata plus array names and shapes), then
//! every array as little-endian `f64`, student arrays first. Values are
//! stored bit-for-bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, NamedArray, ParamSet};
use crate::error::{Error, Result};
use crate::losses::PairLoss;

const MAGIC: &[u8; 8] = b"RTCKPT01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub step: usize,
    pub alpha: f64,
    pub loss: PairLoss,
    pub margin: f64,
    #[serde(default)]
    pub consistency_weight: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub student: ParamSet,
    pub teacher: ParamSet,
}

#[derive(Serialize, Deserialize)]
struct ArrayHeader {
    set: String,
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: CheckpointMeta,
    arrays: Vec<ArrayHeader>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut arrays = Vec::new();
        for (set, params) in [("student", &self.student), ("teacher", &self.teacher)] {
            for a in params.arrays() {
                arrays.push(ArrayHeader {
                    set: set.to_string(),
                    name: a.name.clone(),
                    shape: a.shape.clone(),
                });
            }
        }
        let header = serde_json::to_vec(&Header {
            meta: self.meta.clone(),
            arrays,
        })
        .expect("checkpoint header serializes");
        let n = self.student.num_scalars() + self.teacher.num_scalars();
        let mut out = Vec::with_capacity(16 + header.len() + 8 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for v in self.student.iter_scalars().chain(self.teacher.iter_scalars()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing checkpoint magic"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut cursor = 16 + hlen;
        let mut student = Vec::new();
        let mut teacher = Vec::new();
        for a in header.arrays {
            let n: usize = a.shape.iter().product();
            let raw = bytes
                .get(cursor..cursor + 8 * n)
                .ok_or_else(|| bad("truncated array data"))?;
            cursor += 8 * n;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let arr = NamedArray {
                name: a.name,
                shape: a.shape,
                data,
            };
            match a.set.as_str() {
                "student" => student.push(arr),
                "teacher" => teacher.push(arr),
                other => return Err(Error::Checkpoint(format!("unknown parameter set {other:?}"))),
            }
        }
        if cursor != bytes.len() {
            return Err(bad("trailing bytes after arrays"));
        }
        Ok(Self {
            meta: header.meta,
            student: ParamSet::new(student),
            teacher: ParamSet::new(teacher),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::Resolution;
    use crate::model::TraversabilityNet;
    use crate::rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = ModelConfig {
            encoder_widths: vec![2, 3],
            skip_connections: true,
            input_resolution: Resolution::new(16, 20),
        };
        let net = TraversabilityNet::new(cfg.clone()).unwrap();
        let student = net.init_params(&mut rng::seeded(1));
        let mut teacher = net.init_params(&mut rng::seeded(2));
        teacher.arrays_mut()[0].data[0] = f64::from_bits(0x3ff0_0000_0000_0001);
        let ckpt = Checkpoint {
            meta: CheckpointMeta {
                model: cfg,
                step: 12,
                alpha: 0.99,
                loss: PairLoss::Rizz,
                margin: 0.5,
                consistency_weight: 1.0,
                seed: 7,
            },
            student,
            teacher,
        };
        let back = Checkpoint::from_bytes(&ckpt.to_bytes()).unwrap();
        assert_eq!(back, ckpt);
        for (a, b) in back.teacher.iter_scalars().zip(ckpt.teacher.iter_scalars()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let mut bytes = ckpt.to_bytes();
        bytes.pop();
        assert!(Checkpoint::from_bytes(&bytes).is_err());
        assert!(Checkpoint::from_bytes(b"nonsense").is_err());
    }
}
