//! Dataset file formats.
//!
//! * CSV interchange: columns `f0..f{m-1},t,y` plus a JSON sidecar
//!   (`<file>.meta.json`) holding the schema and propensity table.
//! * Binary columnar: little-endian, 32-bit codes and treatments, 64-bit
//!   float outcomes.
//!
//! Binary layout:
//!
//! ```text
//! magic      8 bytes  "TAPOLDS\0"
//! version    u32
//! m          u32      feature count
//! k          u32      arm count
//! card       u32 x m
//! prop       f64 x k
//! n          u64
//! features   u32 x n, one block per feature
//! treatment  u32 x n
//! outcome    f64 x n
//! ```
//!
//! Truth sidecars for generated data hold the potential-outcome matrix and
//! are bound to their dataset by its content hash (the SHA-256 of the
//! binary encoding above):
//!
//! ```text
//! magic      8 bytes  "TAPOLTR\0"
//! version    u32
//! k          u32
//! n          u64
//! dataset    32 bytes SHA-256 of the dataset's binary encoding
//! outcomes   f64 x n, one block per arm
//! checksum   32 bytes SHA-256 of everything above
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, Schema};
use crate::error::{Error, Result};
use crate::synth::SyntheticTruth;

pub const DATASET_MAGIC: &[u8; 8] = b"TAPOLDS\0";
pub const FORMAT_VERSION: u32 = 1;
pub const TRUTH_MAGIC: &[u8; 8] = b"TAPOLTR\0";

/// Sidecar metadata written next to a CSV dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub cardinalities: Vec<u32>,
    pub arm_count: usize,
    pub propensities: Vec<f64>,
    pub n_rows: usize,
    pub schema_hash: String,
}

impl DatasetMeta {
    pub fn of(d: &Dataset) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            cardinalities: d.schema().cardinalities.clone(),
            arm_count: d.arm_count(),
            propensities: d.propensities().to_vec(),
            n_rows: d.n_rows(),
            schema_hash: d.schema_hash(),
        }
    }
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_csv(d: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let m = d.feature_count();
    let mut header: Vec<String> = (0..m).map(|f| format!("f{f}")).collect();
    header.push("t".into());
    header.push("y".into());
    w.write_record(&header).map_err(csv_err)?;
    let mut rec: Vec<String> = vec![String::new(); m + 2];
    for i in 0..d.n_rows() {
        for (f, slot) in rec.iter_mut().take(m).enumerate() {
            *slot = d.code(i, f).to_string();
        }
        rec[m] = d.treatment(i).to_string();
        rec[m + 1] = d.outcome(i).to_string();
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    let meta = DatasetMeta::of(d);
    std::fs::write(meta_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(meta_path(path))?)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset format version {}",
            meta.format_version
        )));
    }
    let schema = Schema::new(meta.cardinalities.clone(), meta.arm_count)?;
    let m = schema.feature_count();
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let headers = r.headers().map_err(csv_err)?.clone();
    let expected: Vec<String> = (0..m)
        .map(|f| format!("f{f}"))
        .chain(["t".to_string(), "y".to_string()])
        .collect();
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Format(format!(
            "CSV header must be {}",
            expected.join(",")
        )));
    }
    let mut features = vec![Vec::with_capacity(meta.n_rows); m];
    let mut treatment = Vec::with_capacity(meta.n_rows);
    let mut outcome = Vec::with_capacity(meta.n_rows);
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |what: &str| Error::Format(format!("row {i}: cannot parse {what}"));
        for (f, col) in features.iter_mut().enumerate() {
            col.push(rec[f].trim().parse::<u32>().map_err(|_| bad(&format!("f{f}")))?);
        }
        treatment.push(rec[m].trim().parse::<u32>().map_err(|_| bad("t"))?);
        outcome.push(rec[m + 1].trim().parse::<f64>().map_err(|_| bad("y"))?);
    }
    if treatment.len() != meta.n_rows {
        return Err(Error::Format(format!(
            "metadata declares {} rows, CSV has {}",
            meta.n_rows,
            treatment.len()
        )));
    }
    let d = Dataset::from_columns(schema, meta.propensities, features, treatment, outcome)?;
    if d.schema_hash() != meta.schema_hash {
        return Err(Error::SchemaHashMismatch {
            left: meta.schema_hash,
            right: d.schema_hash(),
        });
    }
    Ok(d)
}

pub fn write_binary(d: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_binary_to(d, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_binary_to<W: Write>(d: &Dataset, w: &mut W) -> std::io::Result<()> {
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(d.feature_count() as u32).to_le_bytes())?;
    w.write_all(&(d.arm_count() as u32).to_le_bytes())?;
    for c in &d.schema().cardinalities {
        w.write_all(&c.to_le_bytes())?;
    }
    for p in d.propensities() {
        w.write_all(&p.to_le_bytes())?;
    }
    w.write_all(&(d.n_rows() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(d.n_rows() * 8);
    for col in d.feature_columns() {
        buf.clear();
        col.iter().for_each(|c| buf.extend_from_slice(&c.to_le_bytes()));
        w.write_all(&buf)?;
    }
    buf.clear();
    d.treatments()
        .iter()
        .for_each(|t| buf.extend_from_slice(&t.to_le_bytes()));
    w.write_all(&buf)?;
    buf.clear();
    d.outcomes()
        .iter()
        .for_each(|y| buf.extend_from_slice(&y.to_le_bytes()));
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_binary(&bytes)
}

pub fn decode_binary(bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader { bytes, pos: 0 };
    if r.take(8)? != DATASET_MAGIC {
        return Err(Error::Format("not a binary dataset file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dataset format version {version}")));
    }
    let m = r.u32()? as usize;
    let k = r.u32()? as usize;
    let cards = (0..m).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let props = (0..k).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let n = usize::try_from(r.u64()?).map_err(|_| Error::Format("row count too large".into()))?;
    let schema = Schema::new(cards, k)?;
    let expected = n
        .checked_mul(4 * m + 4 + 8)
        .ok_or_else(|| Error::Format("row count too large".into()))?;
    if r.remaining() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {expected}",
            r.remaining()
        )));
    }
    let mut features = Vec::with_capacity(m);
    for _ in 0..m {
        features.push((0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?);
    }
    let treatment = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let outcome = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    Dataset::from_columns(schema, props, features, treatment, outcome)
}

/// Loads a dataset by extension (`.csv` or binary otherwise) and rejects it
/// if any invariant is broken.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let d = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(path)?
    } else {
        read_binary(path)?
    };
    d.ensure_valid()?;
    Ok(d)
}

pub fn encode_truth(truth: &SyntheticTruth, d: &Dataset) -> Result<Vec<u8>> {
    truth.check_aligned(d)?;
    let (n, k) = (truth.n_rows(), truth.arm_count());
    let mut out = Vec::with_capacity(8 + 4 + 4 + 8 + 32 + 8 * n * k + 32);
    out.extend_from_slice(TRUTH_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    let bound = hex::decode(d.content_hash()).expect("content hash is hex");
    out.extend_from_slice(&bound);
    for j in 0..k {
        for i in 0..n {
            out.extend_from_slice(&truth.outcomes(i)[j].to_le_bytes());
        }
    }
    let sum = Sha256::digest(&out);
    out.extend_from_slice(&sum);
    Ok(out)
}

/// Decodes a truth sidecar, returning it with the content hash of the
/// dataset it was written for.
pub fn decode_truth(bytes: &[u8]) -> Result<(SyntheticTruth, String)> {
    if bytes.len() < 32 {
        return Err(Error::Format("truth file too short".into()));
    }
    let (body, sum) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != sum {
        return Err(Error::Format("truth file checksum mismatch".into()));
    }
    let mut r = ByteReader { bytes: body, pos: 0 };
    if r.take(8)? != TRUTH_MAGIC {
        return Err(Error::Format("not a truth file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported truth format version {version}")));
    }
    let k = r.u32()? as usize;
    let n = usize::try_from(r.u64()?).map_err(|_| Error::Format("row count too large".into()))?;
    let bound = hex::encode(r.take(32)?);
    if Some(r.remaining()) != n.checked_mul(8 * k) {
        return Err(Error::Format("truth payload has the wrong size".into()));
    }
    let cols = (0..k)
        .map(|_| (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut po = Vec::with_capacity(n * k);
    for i in 0..n {
        po.extend(cols.iter().map(|c| c[i]));
    }
    Ok((SyntheticTruth::new(k, po)?, bound))
}

pub fn write_truth(truth: &SyntheticTruth, d: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, encode_truth(truth, d)?)?;
    Ok(())
}

/// Reads a truth sidecar and checks that it belongs to `d`.
pub fn read_truth(path: &Path, d: &Dataset) -> Result<SyntheticTruth> {
    let (truth, bound) = decode_truth(&std::fs::read(path)?)?;
    let actual = d.content_hash();
    if bound != actual {
        return Err(Error::Misaligned(format!(
            "truth file was written for dataset {bound}, not {actual}"
        )));
    }
    truth.check_aligned(d)?;
    Ok(truth)
}

pub(crate) struct ByteReader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let schema = Schema::new(vec![3, 2], 3).unwrap();
        Dataset::new(
            schema,
            vec![0.5, 0.25, 0.25],
            vec![vec![0, 2, 1, 1], vec![1, 0, 0, 1]],
            vec![0, 2, 1, 0],
            vec![0.0, 1.5, 7.0, 1e-3],
        )
        .unwrap()
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample();
        let c = dir.path().join("d.csv");
        let b = dir.path().join("d.bin");
        write_csv(&d, &c).unwrap();
        write_binary(&d, &b).unwrap();
        assert_eq!(load_dataset(&c).unwrap(), d);
        assert_eq!(load_dataset(&b).unwrap(), d);
        assert!(meta_path(&c).exists());
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let mut bytes = Vec::new();
        write_binary_to(&sample(), &mut bytes).unwrap();
        bytes.pop();
        assert!(matches!(decode_binary(&bytes), Err(Error::Format(_))));
        assert!(decode_binary(b"garbage!").is_err());
    }

    #[test]
    fn truth_round_trip_is_bound_to_its_dataset() {
        let d = sample();
        let truth = SyntheticTruth::new(3, (0..12).map(|v| v as f64 * 0.5).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.truth");
        write_truth(&truth, &d, &p).unwrap();
        assert_eq!(read_truth(&p, &d).unwrap(), truth);
        let other = d.map_outcomes(|y| y + 1.0);
        assert!(matches!(read_truth(&p, &other), Err(Error::Misaligned(_))));
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[60] ^= 1;
        assert!(matches!(decode_truth(&bytes), Err(Error::Format(_))));
        let mut bin = Vec::new();
        write_binary_to(&d, &mut bin).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bin)), d.content_hash());
    }

    #[test]
    fn binary_header_is_little_endian() {
        let mut bytes = Vec::new();
        write_binary_to(&sample(), &mut bytes).unwrap();
        assert_eq!(&bytes[..8], DATASET_MAGIC);
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[2, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &[3, 0, 0, 0]);
    }
}
