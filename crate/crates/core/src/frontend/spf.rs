//! Spectrum batch files.
//!
//! Binary layout (little-endian): magic `SPF1`, u32 frame count, then 61
//! float32 dB values per frame. A JSON sidecar (`<file>.json`) records band
//! edges and calibration.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BinningPlan, CalibrationSpec, SpectrumFrame, N_BANDS};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SPF1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpfSidecar {
    pub band_edges: Vec<f64>,
    pub calibration: CalibrationSpec,
    pub frames: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_frames<W: Write>(mut w: W, frames: &[SpectrumFrame]) -> Result<()> {
    w.write_all(MAGIC)?;
    let n = u32::try_from(frames.len()).map_err(|_| Error::invalid("too many frames"))?;
    w.write_all(&n.to_le_bytes())?;
    for f in frames {
        for v in f.to_f32() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_frames<R: Read>(mut r: R) -> Result<Vec<SpectrumFrame>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated spectrum file header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad spectrum magic {magic:?}")));
    }
    let mut n = [0u8; 4];
    r.read_exact(&mut n)
        .map_err(|_| Error::Format("truncated spectrum file header".into()))?;
    let n = u32::from_le_bytes(n) as usize;
    let mut buf = vec![0u8; N_BANDS * 4];
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for i in 0..n {
        r.read_exact(&mut buf)
            .map_err(|_| Error::Format(format!("spectrum file truncated at frame {i} of {n}")))?;
        let vals: Vec<f32> = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        out.push(SpectrumFrame::from_f32(&vals)?);
    }
    Ok(out)
}

/// Write `path` and its JSON sidecar.
pub fn save(
    path: impl AsRef<Path>,
    frames: &[SpectrumFrame],
    plan: &BinningPlan,
    cal: &CalibrationSpec,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_frames(&mut w, frames)?;
    w.flush()?;
    let side = SpfSidecar {
        band_edges: plan.edges.clone(),
        calibration: *cal,
        frames: frames.len(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(&side)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Vec<SpectrumFrame>> {
    let f = std::fs::File::open(path.as_ref())?;
    read_frames(std::io::BufReader::new(f))
}

pub fn load_sidecar(path: impl AsRef<Path>) -> Result<Option<SpfSidecar>> {
    let p = sidecar_path(path.as_ref());
    if !p.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_slice(&std::fs::read(p)?)?))
}
