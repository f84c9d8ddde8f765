//! Line-oriented dataset files.
//!
//! The first line is a JSON header; every following line is one JSON record
//! holding a channel sample and, optionally, a solver label. Complex numbers
//! are `[re, im]` pairs. Floats use shortest round-trip formatting so a
//! write/read cycle is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSample, DEFAULT_BANDWIDTH_HZ};
use crate::cplx::{CVec, C64};
use crate::error::{Error, Result};
use crate::Scenario;

pub const DATASET_FORMAT: &str = "wsrnet-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub scenario: Scenario,
    /// Number of records.
    pub l: usize,
    /// Link count (interference channel only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub k_t: usize,
    pub k_r: usize,
    /// Per-BS antenna counts when every record shares them; `None` for mixed sets.
    pub nt: Option<Vec<usize>>,
    pub weighted: bool,
    pub bandwidth_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_solver: Option<String>,
}

/// Flags fixed for a whole file.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub scenario: Scenario,
    pub weighted: bool,
    pub bandwidth_hz: f64,
    pub label_solver: Option<String>,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        DatasetMeta {
            scenario: Scenario::Ic,
            weighted: false,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            label_solver: None,
        }
    }
}

/// One sample plus optional reduced-space label. For the cooperative
/// scenario the label is stored BS-major (`j * k_r + k`).
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub sample: ChannelSample,
    pub solution: Option<Vec<CVec>>,
    pub half_distance_km: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    index: usize,
    nt: Vec<usize>,
    h: Vec<Vec<Vec<[f64; 2]>>>,
    alpha: Vec<f64>,
    sigma2: Vec<f64>,
    power: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    half_distance_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solution: Option<Vec<Vec<[f64; 2]>>>,
}

fn to_pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn from_pairs(v: &[[f64; 2]]) -> CVec {
    v.iter().map(|&[re, im]| C64::new(re, im)).collect()
}

impl RawRecord {
    fn from_record(index: usize, r: &DatasetRecord) -> Self {
        RawRecord {
            index,
            nt: r.sample.nt.clone(),
            h: r.sample
                .h
                .iter()
                .map(|row| row.iter().map(|v| to_pairs(v)).collect())
                .collect(),
            alpha: r.sample.alpha.clone(),
            sigma2: r.sample.sigma2.clone(),
            power: r.sample.power.clone(),
            half_distance_km: r.half_distance_km,
            solution: r
                .solution
                .as_ref()
                .map(|s| s.iter().map(|v| to_pairs(v)).collect()),
        }
    }

    fn into_record(self) -> DatasetRecord {
        DatasetRecord {
            sample: ChannelSample {
                h: self
                    .h
                    .iter()
                    .map(|row| row.iter().map(|v| from_pairs(v)).collect())
                    .collect(),
                alpha: self.alpha,
                sigma2: self.sigma2,
                power: self.power,
                nt: self.nt,
            },
            solution: self
                .solution
                .map(|s| s.iter().map(|v| from_pairs(v)).collect()),
            half_distance_km: self.half_distance_km,
        }
    }
}

pub fn build_header(meta: &DatasetMeta, records: &[DatasetRecord]) -> Result<DatasetHeader> {
    let first = records
        .first()
        .ok_or_else(|| Error::invalid("cannot write an empty dataset"))?;
    let k_t = first.sample.num_tx();
    let k_r = first.sample.num_rx();
    if meta.scenario == Scenario::Ic && k_t != k_r {
        return Err(Error::invalid(
            "interference-channel samples need equal BS and UE counts",
        ));
    }
    for (i, r) in records.iter().enumerate() {
        r.sample
            .validate()
            .map_err(|e| Error::invalid(format!("record {i}: {e}")))?;
        if r.sample.num_tx() != k_t || r.sample.num_rx() != k_r {
            return Err(Error::invalid(format!(
                "record {i} has a different network size"
            )));
        }
    }
    let shared_nt = records.iter().all(|r| r.sample.nt == first.sample.nt);
    Ok(DatasetHeader {
        format: DATASET_FORMAT.to_string(),
        version: DATASET_VERSION,
        scenario: meta.scenario,
        l: records.len(),
        k: (meta.scenario == Scenario::Ic).then_some(k_t),
        k_t,
        k_r,
        nt: shared_nt.then(|| first.sample.nt.clone()),
        weighted: meta.weighted,
        bandwidth_hz: meta.bandwidth_hz,
        label_solver: meta.label_solver.clone(),
    })
}

pub fn write_dataset(
    path: impl AsRef<Path>,
    meta: &DatasetMeta,
    records: &[DatasetRecord],
) -> Result<DatasetHeader> {
    let header = build_header(meta, records)?;
    let mut out = BufWriter::new(File::create(path)?);
    write_lines(&mut out, &header, records)?;
    out.flush()?;
    Ok(header)
}

fn write_lines<W: Write>(
    out: &mut W,
    header: &DatasetHeader,
    records: &[DatasetRecord],
) -> Result<()> {
    let to_io = |e: serde_json::Error| Error::Io(e.into());
    serde_json::to_writer(&mut *out, header).map_err(to_io)?;
    out.write_all(b"\n")?;
    for (i, r) in records.iter().enumerate() {
        serde_json::to_writer(&mut *out, &RawRecord::from_record(i, r)).map_err(to_io)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn parse_header(line: &str) -> Result<DatasetHeader> {
    let header: DatasetHeader =
        serde_json::from_str(line).map_err(|e| Error::Header(e.to_string()))?;
    if header.format != DATASET_FORMAT {
        return Err(Error::Header(format!(
            "unknown format tag {:?}",
            header.format
        )));
    }
    if header.version != DATASET_VERSION {
        return Err(Error::Header(format!(
            "unsupported version {}",
            header.version
        )));
    }
    Ok(header)
}

/// Reads only the header line.
pub fn read_header(path: impl AsRef<Path>) -> Result<DatasetHeader> {
    let mut line = String::new();
    BufReader::new(File::open(path)?).read_line(&mut line)?;
    if line.trim().is_empty() {
        return Err(Error::Header("file is empty".into()));
    }
    parse_header(&line)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_from(BufReader::new(File::open(path)?))
}

fn read_from<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => parse_header(&line?)?,
        None => return Err(Error::Header("file is empty".into())),
    };
    let mut records = Vec::with_capacity(header.l);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            record: idx,
            message: e.to_string(),
        })?;
        if raw.index != idx {
            return Err(Error::Parse {
                record: idx,
                message: format!("record carries index {}", raw.index),
            });
        }
        let rec = raw.into_record();
        rec.sample.validate().map_err(|e| Error::Parse {
            record: idx,
            message: e.to_string(),
        })?;
        if rec.sample.num_tx() != header.k_t || rec.sample.num_rx() != header.k_r {
            return Err(Error::Parse {
                record: idx,
                message: "network size differs from header".into(),
            });
        }
        records.push(rec);
    }
    if records.len() != header.l {
        return Err(Error::Parse {
            record: records.len(),
            message: format!(
                "header announces {} records, found {}",
                header.l,
                records.len()
            ),
        });
    }
    Ok(Dataset { header, records })
}
