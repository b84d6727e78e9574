//! `LDNN` model files.
//!
//! Layout (little-endian): magic `LDNN`, u16 version, u16 number of dims,
//! u32 dims, one activation byte per layer, f32 input shift and scale per
//! input, then for each layer its row-major f32 weights followed by its
//! biases, and finally a u32-length-prefixed JSON metadata trailer.

use std::io::{Read, Write};
use std::path::Path;

use super::{Activation, Layer, MlpModel, ModelMeta};
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"LDNN";
pub const MODEL_VERSION: u16 = 1;

fn put_f32s<W: Write>(w: &mut W, v: &[f32]) -> Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_model<W: Write>(mut w: W, model: &MlpModel) -> Result<()> {
    model.validate()?;
    let dims = model.dims();
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&(dims.len() as u16).to_le_bytes())?;
    for d in &dims {
        w.write_all(&(*d as u32).to_le_bytes())?;
    }
    for l in &model.layers {
        w.write_all(&[l.activation.to_byte()])?;
    }
    put_f32s(&mut w, &model.shift)?;
    put_f32s(&mut w, &model.scale)?;
    for l in &model.layers {
        put_f32s(&mut w, &l.weights)?;
        put_f32s(&mut w, &l.bias)?;
    }
    let json = serde_json::to_vec(&model.meta)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|_| Error::Format("truncated model file".into()))?;
        Ok(b)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        (0..n)
            .map(|_| Ok(f32::from_le_bytes(self.bytes()?)))
            .collect()
    }
}

pub fn read_model<R: Read>(r: R) -> Result<MlpModel> {
    let mut r = Reader { inner: r };
    let magic: [u8; 4] = r.bytes()?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format(format!("bad model magic {magic:?}")));
    }
    let version = u16::from_le_bytes(r.bytes()?);
    if version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "model version {version}, expected {MODEL_VERSION}"
        )));
    }
    let n = u16::from_le_bytes(r.bytes()?) as usize;
    if !(2..=64).contains(&n) {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let dims = (0..n)
        .map(|_| Ok(u32::from_le_bytes(r.bytes()?) as usize))
        .collect::<Result<Vec<_>>>()?;
    if dims.iter().any(|&d| d == 0 || d > 1 << 16) {
        return Err(Error::Format(format!("implausible layer dims {dims:?}")));
    }
    let acts = (1..n)
        .map(|_| Activation::from_byte(r.bytes::<1>()?[0]))
        .collect::<Result<Vec<_>>>()?;
    let shift = r.f32s(dims[0])?;
    let scale = r.f32s(dims[0])?;
    let mut layers = Vec::with_capacity(n - 1);
    for (i, act) in acts.into_iter().enumerate() {
        let mut l = Layer::zeros(dims[i], dims[i + 1], act);
        l.weights = r.f32s(l.weights.len())?;
        l.bias = r.f32s(l.n_out)?;
        layers.push(l);
    }
    let len = u32::from_le_bytes(r.bytes()?) as usize;
    let mut json = vec![0u8; len];
    r.inner
        .read_exact(&mut json)
        .map_err(|_| Error::Format("truncated model metadata".into()))?;
    let meta: ModelMeta = serde_json::from_slice(&json)?;
    let model = MlpModel {
        layers,
        shift,
        scale,
        meta,
    };
    model
        .validate()
        .map_err(|e| Error::Format(format!("model file invalid: {e}")))?;
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &MlpModel) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    read_model(std::io::BufReader::new(std::fs::File::open(path)?))
}
