//! `LDS1` dataset files.
//!
//! Layout (little-endian): magic `LDS1`, u32 header length, UTF-8 JSON
//! header, then `record_count` records of 61 f32 band levels, one f32 phon
//! label and one category byte.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Category, DatasetRecord};
use crate::frontend::{SpectrumFrame, N_BANDS};
use crate::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"LDS1";

/// Identifies the label generator family written into headers.
pub const ORACLE_KIND: &str = "roex-excitation-v1";

const RECORD_BYTES: usize = N_BANDS * 4 + 4 + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub oracle_version: String,
    /// Hash of the oracle calibration; `None` for purely imported labels.
    pub calibration_hash: Option<String>,
    pub seed: Option<u64>,
    pub record_count: usize,
    pub category_counts: BTreeMap<String, usize>,
    /// Free-form provenance (resolved config, input hashes).
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

pub fn category_counts(records: &[DatasetRecord]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry(r.category.name().to_string()).or_insert(0) += 1;
    }
    m
}

impl Dataset {
    pub fn new(
        records: Vec<DatasetRecord>,
        calibration_hash: Option<String>,
        seed: Option<u64>,
    ) -> Self {
        let header = DatasetHeader {
            oracle_version: ORACLE_KIND.to_string(),
            calibration_hash,
            seed,
            record_count: records.len(),
            category_counts: category_counts(&records),
            provenance: BTreeMap::new(),
        };
        Self { header, records }
    }

    /// Concatenate datasets; headers are merged (seed kept only if equal).
    pub fn concat(parts: Vec<Dataset>) -> Result<Self> {
        let mut records = Vec::new();
        let mut hash: Option<Option<String>> = None;
        let mut seed: Option<Option<u64>> = None;
        let mut provenance = BTreeMap::new();
        for p in parts {
            match (&hash, &p.header.calibration_hash) {
                (Some(Some(a)), Some(b)) if a != b => {
                    return Err(Error::invalid(
                        "datasets labeled by different oracle calibrations",
                    ))
                }
                (None, h) | (Some(None), h) => hash = Some(h.clone()),
                _ => {}
            }
            seed = match seed {
                None => Some(p.header.seed),
                Some(s) if s == p.header.seed => Some(s),
                Some(_) => Some(None),
            };
            provenance.extend(p.header.provenance);
            records.extend(p.records);
        }
        let mut ds = Dataset::new(records, hash.flatten(), seed.flatten());
        ds.header.provenance = provenance;
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_dataset(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref())?;
        read_dataset(std::io::BufReader::new(f))
    }
}

pub fn write_dataset<W: Write>(mut w: W, ds: &Dataset) -> Result<()> {
    let mut header = ds.header.clone();
    header.record_count = ds.records.len();
    header.category_counts = category_counts(&ds.records);
    let json = serde_json::to_vec(&header)?;
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(RECORD_BYTES);
    for r in &ds.records {
        buf.clear();
        for v in r.spectrum.to_f32() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&r.phon.to_le_bytes());
        buf.push(r.category.to_byte());
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<Dataset> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated dataset header".into()))?;
    if &magic != DATASET_MAGIC {
        return Err(Error::Format(format!("bad dataset magic {magic:?}")));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)
        .map_err(|_| Error::Format("truncated dataset header".into()))?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut json)
        .map_err(|_| Error::Format("truncated dataset header".into()))?;
    let header: DatasetHeader = serde_json::from_slice(&json)?;

    let mut buf = [0u8; RECORD_BYTES];
    let mut records = Vec::with_capacity(header.record_count.min(1 << 22));
    let mut levels = [0f32; N_BANDS];
    for i in 0..header.record_count {
        r.read_exact(&mut buf).map_err(|_| {
            Error::Format(format!(
                "dataset truncated at record {i} of {}",
                header.record_count
            ))
        })?;
        for (l, c) in levels.iter_mut().zip(buf.chunks_exact(4)) {
            *l = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        }
        let o = N_BANDS * 4;
        let phon = f32::from_le_bytes([buf[o], buf[o + 1], buf[o + 2], buf[o + 3]]);
        records.push(DatasetRecord {
            spectrum: SpectrumFrame::from_f32(&levels)?,
            phon,
            category: Category::from_byte(buf[o + 4])?,
        });
    }
    Ok(Dataset { header, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_record() -> impl Strategy<Value = DatasetRecord> {
        (
            proptest::collection::vec(-10.0f32..140.0, N_BANDS),
            0.0f32..130.0,
            0u8..6,
        )
            .prop_map(|(l, phon, c)| DatasetRecord {
                spectrum: SpectrumFrame::from_f32(&l).unwrap(),
                phon,
                category: Category::from_byte(c).unwrap(),
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip(records in proptest::collection::vec(arb_record(), 0..20), seed in any::<u64>()) {
            let ds = Dataset::new(records, Some("abc".into()), Some(seed));
            let mut buf = Vec::new();
            write_dataset(&mut buf, &ds).unwrap();
            let back = read_dataset(&buf[..]).unwrap();
            prop_assert_eq!(back, ds);
        }
    }

    #[test]
    fn record_layout() {
        let ds = Dataset::new(
            vec![DatasetRecord {
                spectrum: SpectrumFrame::filled(1.5),
                phon: 42.0,
                category: Category::Notched,
            }],
            None,
            None,
        );
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        assert_eq!(&buf[..4], b"LDS1");
        let hlen = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
        let rec = &buf[8 + hlen..];
        assert_eq!(rec.len(), RECORD_BYTES);
        assert_eq!(&rec[..4], &1.5f32.to_le_bytes());
        assert_eq!(&rec[244..248], &42.0f32.to_le_bytes());
        assert_eq!(rec[248], 5);
    }

    #[test]
    fn corrupt_files_rejected() {
        let ds = Dataset::new(
            vec![
                DatasetRecord {
                    spectrum: SpectrumFrame::filled(1.0),
                    phon: 1.0,
                    category: Category::Tone,
                };
                3
            ],
            None,
            Some(1),
        );
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        assert!(read_dataset(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[3] = b'2';
        assert!(read_dataset(&bad[..]).is_err());
    }
}
