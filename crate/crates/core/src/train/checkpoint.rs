//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "VSEPCKPT"
//! version    u32
//! value size u8       4 (f32) or 8 (f64)
//! config     u32 length + UTF-8 TOML of the TrainingConfig
//! step       u64
//! 3 groups   generator, d_c, d_a, each:
//!   name     u32 length + UTF-8
//!   count    u32
//!   params   count × (name, u32 rank, rank × u64 dims, raw values)
//!   adam     u64 t, f64 beta1, f64 beta2, f64 eps, m values, v values
//! crc32      u32 over every preceding byte
//! ```

use std::path::Path;

use super::{TrainError, TrainState, TrainingConfig};
use crate::autodiff::{AdamConfig, AdamState, Tensor};
use crate::models::ParamSet;
use crate::real::Real;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"VSEPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

const GROUPS: [&str; 3] = ["generator", "d_c", "d_a"];

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_values<T: Real>(out: &mut Vec<u8>, t: &Tensor<T>) {
    for &v in t.data() {
        v.write_le(out);
    }
}

/// Serializes a training state.
pub fn encode<T: Real>(state: &TrainState<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(T::BYTES as u8);
    put_str(&mut out, &state.config.to_toml_string());
    out.extend_from_slice(&state.step.to_le_bytes());
    let groups: [(&ParamSet<T>, &AdamState<T>); 3] = [
        (&state.generator.params, &state.opt_g),
        (&state.d_c.params, &state.opt_dc),
        (&state.d_a.params, &state.opt_da),
    ];
    for (name, (params, opt)) in GROUPS.iter().zip(groups) {
        put_str(&mut out, name);
        out.extend_from_slice(&(params.len() as u32).to_le_bytes());
        for (pname, t) in params.names().iter().zip(params.tensors()) {
            put_str(&mut out, pname);
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            put_values(&mut out, t);
        }
        out.extend_from_slice(&opt.step.to_le_bytes());
        for x in [opt.config.beta1, opt.config.beta2, opt.config.eps] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for t in opt.m.iter().chain(&opt.v) {
            put_values(&mut out, t);
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TrainError> {
        if self.bytes.len() - self.pos < n {
            return Err(TrainError::Corrupt(format!("unexpected end of data at byte {}", self.pos)));
        }
        self.pos += n;
        Ok(&self.bytes[self.pos - n..self.pos])
    }

    fn u32(&mut self) -> Result<u32, TrainError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, TrainError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, TrainError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, TrainError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| TrainError::Corrupt("invalid UTF-8 string".into()))
    }

    fn values<T: Real>(&mut self, shape: &[usize]) -> Result<Tensor<T>, TrainError> {
        let n: usize = shape.iter().product();
        let raw = self.take(n.checked_mul(T::BYTES).ok_or_else(|| TrainError::Corrupt("tensor too large".into()))?)?;
        let data = raw.chunks_exact(T::BYTES).map(T::read_le).collect();
        Tensor::new(shape.to_vec(), data).map_err(|e| TrainError::Corrupt(e.to_string()))
    }
}

/// Parses a checkpoint, checking the checksum, version, value size and that
/// the stored parameters match the shapes implied by the stored config.
pub fn decode<T: Real>(bytes: &[u8]) -> Result<TrainState<T>, TrainError> {
    if bytes.len() < CHECKPOINT_MAGIC.len() + 4 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(TrainError::Corrupt("missing checkpoint magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(TrainError::Version { found: version, expected: CHECKPOINT_VERSION });
    }
    if bytes.len() < 17 {
        return Err(TrainError::Corrupt("truncated header".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("4 bytes")) {
        return Err(TrainError::Corrupt("checksum mismatch (truncated or modified file)".into()));
    }
    let mut r = Reader { bytes: body, pos: 12 };
    let size = r.take(1)?[0];
    if size as usize != T::BYTES {
        return Err(TrainError::Precision { found: size, expected: T::BYTES as u8 });
    }
    let config = TrainingConfig::from_toml_str(&r.string()?).map_err(|e| TrainError::Corrupt(e.to_string()))?;
    let step = r.u64()?;
    let mut state = TrainState::<T>::new(config)?;
    state.step = step;
    let TrainState { generator, d_c, d_a, opt_g, opt_dc, opt_da, .. } = &mut state;
    let groups: [(&mut ParamSet<T>, &mut AdamState<T>); 3] =
        [(&mut generator.params, opt_g), (&mut d_c.params, opt_dc), (&mut d_a.params, opt_da)];
    for (expected_name, (params, opt)) in GROUPS.iter().zip(groups) {
        let name = r.string()?;
        if name != *expected_name {
            return Err(TrainError::Corrupt(format!("expected group `{expected_name}`, found `{name}`")));
        }
        let count = r.u32()? as usize;
        if count != params.len() {
            return Err(TrainError::Corrupt(format!("group `{name}` has {count} tensors, config implies {}", params.len())));
        }
        for i in 0..count {
            let pname = r.string()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            if pname != params.names()[i] || shape != params.tensors()[i].shape() {
                return Err(TrainError::Corrupt(format!(
                    "tensor {pname} {shape:?} does not match {} {:?}",
                    params.names()[i],
                    params.tensors()[i].shape()
                )));
            }
            params.tensors_mut()[i] = r.values(&shape)?;
        }
        opt.step = r.u64()?;
        opt.config = AdamConfig { beta1: r.f64()?, beta2: r.f64()?, eps: r.f64()? };
        for i in 0..2 * count {
            let shape = params.tensors()[i % count].shape().to_vec();
            let t = r.values(&shape)?;
            if i < count {
                opt.m[i] = t;
            } else {
                opt.v[i - count] = t;
            }
        }
    }
    if r.pos != body.len() {
        return Err(TrainError::Corrupt(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(state)
}

pub fn save_checkpoint<T: Real>(state: &TrainState<T>, path: &Path) -> Result<(), TrainError> {
    std::fs::write(path, encode(state)).map_err(|source| TrainError::Io { path: path.to_path_buf(), source })
}

/// Reads a checkpoint into a fresh state; the caller's state is never touched.
pub fn load_checkpoint<T: Real>(path: &Path) -> Result<TrainState<T>, TrainError> {
    let bytes = std::fs::read(path).map_err(|source| TrainError::Io { path: path.to_path_buf(), source })?;
    decode(&bytes)
}

/// Like [`load_checkpoint`], but fails unless the stored model and audio
/// settings equal those of `expected`.
pub fn load_checkpoint_matching<T: Real>(path: &Path, expected: &TrainingConfig) -> Result<TrainState<T>, TrainError> {
    let state = load_checkpoint::<T>(path)?;
    let (found, wanted) = (state.config.model_signature(), expected.model_signature());
    if found != wanted {
        return Err(TrainError::ConfigMismatch { found, expected: wanted });
    }
    Ok(state)
}
