//! Binary parameter checkpoints.
//!
//! Layout: an 8-byte magic, the model kind, the four architecture dimensions,
//! the training seed, a 32-byte configuration hash, then each parameter
//! tensor as a little-endian `f64` array with a length prefix. `f64` bytes
//! round-trip losslessly, so save → load → forward is bit-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{GcnParams, ModelKind, ModelParams, ParamSet, SgcParams};
use crate::{DenseMatrix, Error, Result};

const MAGIC: &[u8; 8] = b"ADAGNNC1";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub k_layers: usize,
    pub in_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub seed: u64,
    pub config_hash: [u8; 32],
    pub params: ParamSet,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(match ckpt.kind {
        ModelKind::AdagnnSym => 0,
        ModelKind::AdagnnRw => 1,
        ModelKind::Gcn => 2,
        ModelKind::Sgc => 3,
    });
    for dim in [ckpt.k_layers, ckpt.in_dim, ckpt.hidden, ckpt.classes] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    buf.extend_from_slice(&ckpt.seed.to_le_bytes());
    buf.extend_from_slice(&ckpt.config_hash);
    let tensors = ckpt.params.tensors();
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        buf.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::CheckpointFormat("bad magic".into()));
    }
    let kind = match r.u8()? {
        0 => ModelKind::AdagnnSym,
        1 => ModelKind::AdagnnRw,
        2 => ModelKind::Gcn,
        3 => ModelKind::Sgc,
        other => return Err(Error::CheckpointFormat(format!("unknown kind {other}"))),
    };
    let k_layers = r.u32()? as usize;
    let in_dim = r.u32()? as usize;
    let hidden = r.u32()? as usize;
    let classes = r.u32()? as usize;
    let seed = r.u64()?;
    let mut config_hash = [0u8; 32];
    config_hash.copy_from_slice(r.take(32)?);
    let n_tensors = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let len = r.u64()? as usize;
        let mut t = Vec::with_capacity(len);
        for _ in 0..len {
            t.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
        }
        tensors.push(t);
    }

    let params = rebuild_params(kind, k_layers, in_dim, hidden, classes, tensors)?;
    Ok(Checkpoint {
        kind,
        k_layers,
        in_dim,
        hidden,
        classes,
        seed,
        config_hash,
        params,
    })
}

fn rebuild_params(
    kind: ModelKind,
    k: usize,
    f: usize,
    h: usize,
    c: usize,
    tensors: Vec<Vec<f64>>,
) -> Result<ParamSet> {
    let matrix = |t: Vec<f64>, rows: usize, cols: usize| -> Result<DenseMatrix> {
        DenseMatrix::from_shape_vec((rows, cols), t)
            .map_err(|_| Error::CheckpointFormat("tensor length does not match dimensions".into()))
    };
    match kind {
        ModelKind::AdagnnSym | ModelKind::AdagnnRw => {
            if tensors.len() != k + 2 {
                return Err(Error::CheckpointFormat(format!(
                    "expected {} tensors, found {}",
                    k + 2,
                    tensors.len()
                )));
            }
            let mut it = tensors.into_iter();
            let mut phi = Vec::with_capacity(k);
            for layer in 0..k {
                let want = if layer == 0 { f } else { h };
                let v = it.next().unwrap();
                if v.len() != want {
                    return Err(Error::CheckpointFormat(format!(
                        "phi[{layer}] has length {}, expected {want}",
                        v.len()
                    )));
                }
                phi.push(v);
            }
            let theta = matrix(it.next().unwrap(), f, h)?;
            let w_out = matrix(it.next().unwrap(), h, c)?;
            Ok(ParamSet::Adagnn(ModelParams {
                k_layers: k,
                in_dim: f,
                hidden: h,
                classes: c,
                phi,
                theta,
                w_out,
            }))
        }
        ModelKind::Gcn => {
            if tensors.len() != k {
                return Err(Error::CheckpointFormat(format!(
                    "expected {k} tensors, found {}",
                    tensors.len()
                )));
            }
            let mut weights = Vec::with_capacity(k);
            for (i, t) in tensors.into_iter().enumerate() {
                let rows = if i == 0 { f } else { h };
                let cols = if i == k - 1 { c } else { h };
                weights.push(matrix(t, rows, cols)?);
            }
            Ok(ParamSet::Gcn(GcnParams {
                k_layers: k,
                in_dim: f,
                hidden: h,
                classes: c,
                weights,
            }))
        }
        ModelKind::Sgc => {
            if tensors.len() != 1 {
                return Err(Error::CheckpointFormat(format!(
                    "expected 1 tensor, found {}",
                    tensors.len()
                )));
            }
            let w = matrix(tensors.into_iter().next().unwrap(), f, c)?;
            Ok(ParamSet::Sgc(SgcParams {
                k_steps: k,
                in_dim: f,
                classes: c,
                w,
            }))
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::CheckpointFormat("truncated file".into()));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = ModelParams::init(3, 7, 5, 4, 123);
        let ckpt = Checkpoint {
            kind: ModelKind::AdagnnSym,
            k_layers: 3,
            in_dim: 7,
            hidden: 5,
            classes: 4,
            seed: 123,
            config_hash: [7u8; 32],
            params: ParamSet::Adagnn(params),
        };
        save_checkpoint(&path, &ckpt).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.kind, ckpt.kind);
        assert_eq!(loaded.seed, ckpt.seed);
        assert_eq!(loaded.config_hash, ckpt.config_hash);
        assert_eq!(loaded.params, ckpt.params);

        save_checkpoint(&path, &loaded).unwrap();
        let twice = load_checkpoint(&path).unwrap();
        assert_eq!(twice.params, ckpt.params);
    }

    #[test]
    fn gcn_and_sgc_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        for (kind, params, k) in [
            (ModelKind::Gcn, ParamSet::Gcn(GcnParams::init(4, 6, 3, 2, 1)), 4),
            (ModelKind::Sgc, ParamSet::Sgc(SgcParams::init(2, 6, 2, 1)), 2),
        ] {
            let path = dir.path().join(format!("{kind}.ckpt"));
            let ckpt = Checkpoint {
                kind,
                k_layers: k,
                in_dim: 6,
                hidden: 3,
                classes: 2,
                seed: 0,
                config_hash: [0u8; 32],
                params,
            };
            save_checkpoint(&path, &ckpt).unwrap();
            assert_eq!(load_checkpoint(&path).unwrap().params, ckpt.params);
        }
    }

    #[test]
    fn missing_and_corrupt_files_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_checkpoint(&dir.path().join("nope.ckpt")),
            Err(Error::MissingFile(_))
        ));
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTMAGIC rest").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::CheckpointFormat(_))
        ));
    }
}
