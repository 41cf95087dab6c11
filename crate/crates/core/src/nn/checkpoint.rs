//! Versioned JSON checkpoints. Parameter arrays are stored as base64 of
//! little-endian `f64` bytes, so a load reproduces every bit.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{Architecture, InputScaling, ParamSet, PolicyParams, ValueParams};
use super::tensor::Tensor;
use crate::error::{read_file, write_file, Error, Result};

const FORMAT: &str = "crlnav-actor-critic";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: String,
}

impl TensorRecord {
    pub fn encode(name: &str, t: &Tensor) -> Self {
        let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        TensorRecord {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            data: STANDARD.encode(bytes),
        }
    }

    pub fn decode(&self) -> Result<Tensor> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::CheckpointMismatch(format!("{}: {e}", self.name)))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::CheckpointMismatch(format!("{}: truncated data", self.name)));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Tensor::new(self.shape.clone(), data)
    }
}

pub fn encode_params<P: ParamSet>(p: &P) -> Vec<TensorRecord> {
    p.names()
        .iter()
        .zip(p.tensors())
        .map(|(n, t)| TensorRecord::encode(n, t))
        .collect()
}

/// Overwrites `p` with `records`, which must match by name and shape.
pub fn decode_into<P: ParamSet>(p: &mut P, records: &[TensorRecord]) -> Result<()> {
    let names = p.names();
    if names.len() != records.len() {
        return Err(Error::CheckpointMismatch(format!(
            "expected {} tensors, found {}",
            names.len(),
            records.len()
        )));
    }
    for ((name, slot), rec) in names.iter().zip(p.tensors_mut()).zip(records) {
        if &rec.name != name || rec.shape != slot.shape() {
            return Err(Error::CheckpointMismatch(format!(
                "tensor {} {:?} where {name} {:?} was expected",
                rec.name,
                rec.shape,
                slot.shape()
            )));
        }
        *slot = rec.decode()?;
    }
    Ok(())
}

/// Trained actor and critic.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: PolicyParams,
    pub value: ValueParams,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    architecture: Architecture,
    scaling: InputScaling,
    actor: Vec<TensorRecord>,
    critic: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn architecture(&self) -> &Architecture {
        &self.policy.arch
    }

    pub fn to_json(&self) -> String {
        let file = CheckpointFile {
            format: FORMAT.into(),
            version: VERSION,
            architecture: self.policy.arch.clone(),
            scaling: self.policy.scaling.clone(),
            actor: encode_params(&self.policy),
            critic: encode_params(&self.value),
        };
        serde_json::to_string_pretty(&file).expect("checkpoint serialises")
    }

    /// Parses a checkpoint, refusing it when `expected` is given and differs
    /// from the stored architecture.
    pub fn from_json(text: &str, expected: Option<&Architecture>) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text)
            .map_err(|e| Error::CheckpointMismatch(e.to_string()))?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(Error::CheckpointMismatch(format!(
                "unsupported format {} v{}",
                file.format, file.version
            )));
        }
        if let Some(arch) = expected {
            if arch != &file.architecture {
                return Err(Error::CheckpointMismatch(format!(
                    "stored architecture {:?} differs from {arch:?}",
                    file.architecture
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut policy = PolicyParams::init(&file.architecture, file.scaling.clone(), &mut rng)?;
        let mut value = ValueParams::init(&file.architecture, file.scaling, &mut rng)?;
        decode_into(&mut policy, &file.actor)?;
        decode_into(&mut value, &file.critic)?;
        Ok(Checkpoint { policy, value })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json())
    }

    pub fn load(path: &Path, expected: Option<&Architecture>) -> Result<Self> {
        Checkpoint::from_json(&read_file(path)?, expected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Architecture {
        Architecture {
            raster_size: 8,
            conv_channels: vec![2, 2],
            vector_width: 4,
            trunk_width: 5,
            ..Default::default()
        }
    }

    fn checkpoint(arch: &Architecture) -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = InputScaling { offset: vec![0.5; 9], scale: vec![2.0; 9] };
        Checkpoint {
            policy: PolicyParams::init(arch, s.clone(), &mut rng).unwrap(),
            value: ValueParams::init(arch, s, &mut rng).unwrap(),
        }
    }

    #[test]
    fn bit_exact_round_trip() {
        let c = checkpoint(&small());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        c.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path, Some(&small())).unwrap(), c);
    }

    #[test]
    fn refuses_other_architecture() {
        let c = checkpoint(&small());
        let other = Architecture { trunk_width: 6, ..small() };
        assert!(matches!(
            Checkpoint::from_json(&c.to_json(), Some(&other)),
            Err(Error::CheckpointMismatch(_))
        ));
    }

    #[test]
    fn refuses_tampered_shapes() {
        let c = checkpoint(&small());
        let mut file: CheckpointFile = serde_json::from_str(&c.to_json()).unwrap();
        file.actor[0].shape = vec![1];
        let text = serde_json::to_string(&file).unwrap();
        assert!(Checkpoint::from_json(&text, None).is_err());
    }
}
