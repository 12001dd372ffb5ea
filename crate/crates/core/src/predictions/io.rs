//! Binary (`CLBX`) and CSV prediction files.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "CLBX"
//! 4       2     version (u16) = 1
//! 6       1     kind flag (u8): 0 = logits, 1 = probabilities
//! 7       4     N (u32)
//! 11      4     K (u32)
//! 15      ...   N records of K f32 scores followed by one i32 label
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{PredictionSet, ScoreKind};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CLBX";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 15;

pub fn encode_logits(preds: &PredictionSet) -> Vec<u8> {
    let k = preds.n_classes();
    let mut out = Vec::with_capacity(HEADER_LEN + preds.n_samples() * (k + 1) * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(preds.kind().flag());
    out.extend_from_slice(&(preds.n_samples() as u32).to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    for (row, &label) in preds.rows().zip(preds.labels()) {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend_from_slice(&(label as i32).to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode_logits(bytes: &[u8]) -> Result<PredictionSet> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let kind = ScoreKind::from_flag(bytes[6])?;
    let n = u32_at(bytes, 7) as usize;
    let k = u32_at(bytes, 11) as usize;
    let record = (k + 1) * 4;
    let expected = n
        .checked_mul(record)
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::InvalidInput(format!("header N={n}, K={k} overflows")))?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes {
            extra: bytes.len() - expected,
        });
    }

    let mut scores = Vec::with_capacity(n * k);
    let mut labels = Vec::with_capacity(n);
    for (row, rec) in bytes[HEADER_LEN..].chunks_exact(record).enumerate() {
        for cell in rec[..k * 4].chunks_exact(4) {
            scores.push(f32::from_le_bytes(cell.try_into().unwrap()) as f64);
        }
        let label = i32::from_le_bytes(rec[k * 4..].try_into().unwrap());
        if label < 0 || label as usize >= k {
            return Err(Error::LabelOutOfRange {
                row,
                label: label as i64,
                n_classes: k,
            });
        }
        labels.push(label as usize);
    }
    PredictionSet::new(scores, labels, k, kind)
}

pub fn read_logits_file(path: impl AsRef<Path>) -> Result<PredictionSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_logits(&bytes)
}

pub fn write_logits_file(preds: &PredictionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_logits(preds)).map_err(|e| Error::io(path, e))
}

/// Reads `label,s0,...,s{K-1}` rows. The score kind is never inferred.
pub fn read_csv_predictions(path: impl AsRef<Path>, kind: ScoreKind) -> Result<PredictionSet> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, kind)
}

pub(crate) fn parse_csv(reader: impl std::io::Read, kind: ScoreKind) -> Result<PredictionSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::BadHeader(e.to_string()))?
        .clone();
    let width = header.len();
    if width < 3 || &header[0] != "label" {
        return Err(Error::BadHeader(
            "expected `label,s0,...,s{K-1}` with K >= 2".into(),
        ));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("s{i}") {
            return Err(Error::BadHeader(format!(
                "column {} is `{name}`, expected `s{i}`",
                i + 1
            )));
        }
    }
    let k = width - 1;

    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for result in rdr.records() {
        let rec = result.map_err(|e| Error::BadHeader(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != width {
            return Err(Error::RaggedRow {
                line,
                expected: width,
                found: rec.len(),
            });
        }
        let label: i64 = rec[0].parse().map_err(|_| Error::NonNumeric {
            line,
            column: 0,
            text: rec[0].to_string(),
        })?;
        if label < 0 || label as usize >= k {
            return Err(Error::LabelOutOfRange {
                row: labels.len(),
                label,
                n_classes: k,
            });
        }
        labels.push(label as usize);
        for (column, cell) in rec.iter().enumerate().skip(1) {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                line,
                column,
                text: cell.to_string(),
            })?;
            scores.push(v);
        }
    }
    PredictionSet::new(scores, labels, k, kind)
}

/// Writes the CSV layout read by [`read_csv_predictions`]. Scores are
/// printed at `f32` precision, matching the binary format.
pub fn write_csv_predictions(preds: &PredictionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("label");
    for i in 0..preds.n_classes() {
        out.push_str(&format!(",s{i}"));
    }
    out.push('\n');
    for (row, label) in preds.rows().zip(preds.labels()) {
        out.push_str(&label.to_string());
        for &v in row {
            out.push_str(&format!(",{}", v as f32));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
