//! File formats.
//!
//! All binary formats are little-endian and start with a 4-byte magic and a
//! `u16` version. Readers reject unknown versions and check every declared
//! count against the remaining byte length before allocating.
//!
//! ```text
//! HAP1  magic "HAP1" | version u16 = 1 | num_classes u16 | dim u32 | count u64
//!       count x { sample_id u64 | model_answer i16 | true_label i16 | dim x f32 }
//!       (-1 marks an absent answer or label)
//!
//! LIB1  magic "LIB1" | version u16 = 1 | theta f64 | dim u32 | count u64
//!       count x dim x f32 (unit rows, insertion order)
//!
//! HED1  magic "HED1" | version u16 = 1 | temperature f64 | top_a u32
//!       | num_classes u16 | library_size u64
//!       num_classes x library_size x f64 (row-major)
//! ```
//!
//! CSV tables are UTF-8 with a header row; reals are printed with 9
//! significant digits:
//!
//! | kind      | columns                      |
//! |-----------|------------------------------|
//! | cpl       | `sample_id,cpl`              |
//! | confusion | `d1,d2,ci,trials` (empty `ci` for absent rows) |
//! | roc       | `epsilon,auroc`              |
//! | accuracy  | `layer,theta,k,accuracy`     |
//! | size      | `theta,size`                 |

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::{ConfusionMatrix, CplScore};
use crate::error::{Error, Result};
use crate::library::{ActivationRecord, LibraryNetwork};
use crate::readout::PredictionHead;

pub const HAP_MAGIC: [u8; 4] = *b"HAP1";
pub const LIB_MAGIC: [u8; 4] = *b"LIB1";
pub const HED_MAGIC: [u8; 4] = *b"HED1";
pub const FORMAT_VERSION: u16 = 1;

pub const HAP_HEADER_LEN: usize = 20;

/// The contents of one per-layer pattern file.
#[derive(Debug, Clone, PartialEq)]
pub struct HapFile {
    pub num_classes: u16,
    pub dim: u32,
    pub records: Vec<ActivationRecord>,
}

impl HapFile {
    /// Infers `dim` from the first record (0 when empty).
    pub fn new(num_classes: u16, records: Vec<ActivationRecord>) -> Self {
        let dim = records.first().map_or(0, |r| r.features.len() as u32);
        Self {
            num_classes,
            dim,
            records,
        }
    }

    fn record_len(&self) -> usize {
        12 + 4 * self.dim as usize
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::TruncatedFile);
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn i16(&mut self) -> Result<i16> {
        Ok(i16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn preamble(&mut self, magic: [u8; 4]) -> Result<()> {
        let found = self.array::<4>()?;
        if found != magic {
            return Err(Error::BadMagic {
                expected: magic,
                found,
            });
        }
        let version = self.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION,
                found: version,
            });
        }
        Ok(())
    }

    /// Checks that `count` items of `item_len` bytes fit in what is left.
    fn expect_items(&self, count: u64, item_len: usize) -> Result<usize> {
        let needed = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(item_len));
        match needed {
            Some(n) if n <= self.bytes.len() => Ok(count as usize),
            _ => Err(Error::TruncatedFile),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(Error::TrailingData(self.bytes.len()))
        }
    }
}

fn label_to_wire(label: Option<usize>, sample_id: u64, num_classes: u16) -> Result<i16> {
    match label {
        None => Ok(-1),
        Some(l) if l < num_classes as usize => Ok(l as i16),
        Some(l) => Err(Error::LabelOutOfRange {
            sample_id,
            label: i16::try_from(l).unwrap_or(i16::MAX),
            num_classes,
        }),
    }
}

fn label_from_wire(label: i16, sample_id: u64, num_classes: u16) -> Result<Option<usize>> {
    match label {
        -1 => Ok(None),
        l if l >= 0 && (l as u16) < num_classes => Ok(Some(l as usize)),
        l => Err(Error::LabelOutOfRange {
            sample_id,
            label: l,
            num_classes,
        }),
    }
}

pub fn encode_haps(file: &HapFile) -> Result<Vec<u8>> {
    if file.num_classes as usize > i16::MAX as usize {
        return Err(Error::InvalidConfig(format!(
            "{} classes do not fit the signed label field",
            file.num_classes
        )));
    }
    let mut out = Vec::with_capacity(HAP_HEADER_LEN + file.records.len() * file.record_len());
    out.extend_from_slice(&HAP_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&file.num_classes.to_le_bytes());
    out.extend_from_slice(&file.dim.to_le_bytes());
    out.extend_from_slice(&(file.records.len() as u64).to_le_bytes());
    for rec in &file.records {
        if rec.features.len() != file.dim as usize {
            return Err(Error::DimensionMismatch {
                expected: file.dim as usize,
                found: rec.features.len(),
            }
            .for_record(rec.sample_id));
        }
        out.extend_from_slice(&rec.sample_id.to_le_bytes());
        let answer = label_to_wire(rec.model_answer, rec.sample_id, file.num_classes)?;
        let label = label_to_wire(rec.true_label, rec.sample_id, file.num_classes)?;
        out.extend_from_slice(&answer.to_le_bytes());
        out.extend_from_slice(&label.to_le_bytes());
        for &x in &rec.features {
            let x = x as f32;
            if !x.is_finite() {
                return Err(Error::NonFiniteFeature {
                    sample_id: rec.sample_id,
                });
            }
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_haps(bytes: &[u8]) -> Result<HapFile> {
    let mut r = Reader { bytes };
    r.preamble(HAP_MAGIC)?;
    let num_classes = r.u16()?;
    let dim = r.u32()?;
    let count = r.u64()?;
    let record_len = 12usize
        .checked_add(4usize.saturating_mul(dim as usize))
        .ok_or(Error::TruncatedFile)?;
    let count = r.expect_items(count, record_len)?;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let sample_id = r.u64()?;
        let model_answer = label_from_wire(r.i16()?, sample_id, num_classes)?;
        let true_label = label_from_wire(r.i16()?, sample_id, num_classes)?;
        let mut features = Vec::with_capacity(dim as usize);
        for _ in 0..dim {
            let x = r.f32()?;
            if !x.is_finite() {
                return Err(Error::NonFiniteFeature { sample_id });
            }
            features.push(f64::from(x));
        }
        records.push(ActivationRecord {
            sample_id,
            layer_id: 0,
            features,
            model_answer,
            true_label,
        });
    }
    r.finish()?;
    Ok(HapFile {
        num_classes,
        dim,
        records,
    })
}

pub fn write_hap_file(path: impl AsRef<Path>, file: &HapFile) -> Result<()> {
    fs::write(path, encode_haps(file)?)?;
    Ok(())
}

pub fn read_hap_file(path: impl AsRef<Path>) -> Result<HapFile> {
    decode_haps(&fs::read(path)?)
}

pub fn encode_library(lib: &LibraryNetwork) -> Result<Vec<u8>> {
    let dim = u32::try_from(lib.dim())
        .map_err(|_| Error::InvalidConfig(format!("dimension {} exceeds u32", lib.dim())))?;
    let mut out = Vec::with_capacity(26 + 4 * lib.raw_rows().len());
    out.extend_from_slice(&LIB_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&lib.theta().to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(lib.size() as u64).to_le_bytes());
    for &x in lib.raw_rows() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    Ok(out)
}

/// Decodes a library. The result is frozen.
pub fn decode_library(bytes: &[u8]) -> Result<LibraryNetwork> {
    let mut r = Reader { bytes };
    r.preamble(LIB_MAGIC)?;
    let theta = r.f64()?;
    let dim = r.u32()? as usize;
    let count = r.u64()?;
    if dim == 0 {
        return Err(Error::InvalidConfig("library dimension is 0".into()));
    }
    let row_len = dim.checked_mul(4).ok_or(Error::TruncatedFile)?;
    let count = r.expect_items(count, row_len)?;
    let mut rows = Vec::with_capacity(count * dim);
    for _ in 0..count * dim {
        rows.push(f64::from(r.f32()?));
    }
    r.finish()?;
    LibraryNetwork::from_rows(theta, dim, rows)
}

pub fn save_library(path: impl AsRef<Path>, lib: &LibraryNetwork) -> Result<()> {
    fs::write(path, encode_library(lib)?)?;
    Ok(())
}

pub fn load_library(path: impl AsRef<Path>) -> Result<LibraryNetwork> {
    decode_library(&fs::read(path)?)
}

pub fn encode_head(head: &PredictionHead) -> Result<Vec<u8>> {
    let num_classes = u16::try_from(head.num_classes())
        .map_err(|_| Error::InvalidConfig("num_classes exceeds u16".into()))?;
    let top_a = u32::try_from(head.top_a())
        .map_err(|_| Error::InvalidConfig("top_a exceeds u32".into()))?;
    let mut out = Vec::with_capacity(32 + 8 * head.weights().len());
    out.extend_from_slice(&HED_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&head.temperature().to_le_bytes());
    out.extend_from_slice(&top_a.to_le_bytes());
    out.extend_from_slice(&num_classes.to_le_bytes());
    out.extend_from_slice(&(head.library_size() as u64).to_le_bytes());
    for w in head.weights() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_head(bytes: &[u8]) -> Result<PredictionHead> {
    let mut r = Reader { bytes };
    r.preamble(HED_MAGIC)?;
    let temperature = r.f64()?;
    let top_a = r.u32()? as usize;
    let num_classes = r.u16()? as usize;
    let library_size = r.u64()?;
    let cells = library_size
        .checked_mul(num_classes as u64)
        .ok_or(Error::TruncatedFile)?;
    let cells = r.expect_items(cells, 8)?;
    let mut weights = Vec::with_capacity(cells);
    for _ in 0..cells {
        let w = r.f64()?;
        if !w.is_finite() {
            return Err(Error::NonFinite {
                index: weights.len(),
            });
        }
        weights.push(w);
    }
    r.finish()?;
    PredictionHead::from_weights(
        num_classes,
        library_size as usize,
        temperature,
        top_a,
        weights,
    )
}

pub fn save_head(path: impl AsRef<Path>, head: &PredictionHead) -> Result<()> {
    fs::write(path, encode_head(head)?)?;
    Ok(())
}

pub fn load_head(path: impl AsRef<Path>) -> Result<PredictionHead> {
    decode_head(&fs::read(path)?)
}

/// Formats a real with 9 significant digits, like C's `%.9g`.
pub fn fmt_sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            fixed
        }
    } else {
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!(
            "{mantissa}e{}{:02}",
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyRow {
    pub layer: usize,
    pub theta: f64,
    pub k: usize,
    pub accuracy: f64,
}

/// A plot-data table; see the module docs for column layouts.
#[derive(Debug, Clone, Copy)]
pub enum CsvTable<'a> {
    Cpl(&'a [CplScore]),
    Confusion(&'a ConfusionMatrix),
    Roc(&'a [(f64, f64)]),
    Accuracy(&'a [AccuracyRow]),
    Size(&'a [(f64, usize)]),
}

pub fn render_csv(table: CsvTable<'_>) -> String {
    let mut out = String::new();
    match table {
        CsvTable::Cpl(rows) => {
            out.push_str("sample_id,cpl\n");
            for r in rows {
                let _ = writeln!(out, "{},{}", r.sample_id, fmt_sig9(r.value));
            }
        }
        CsvTable::Confusion(cm) => {
            out.push_str("d1,d2,ci,trials\n");
            let c = cm.num_classes();
            for d1 in 0..c {
                for d2 in 0..c {
                    let ci = cm.get(d1, d2).map(fmt_sig9).unwrap_or_default();
                    let _ = writeln!(out, "{d1},{d2},{ci},{}", cm.trial_counts()[d1]);
                }
            }
        }
        CsvTable::Roc(rows) => {
            out.push_str("epsilon,auroc\n");
            for (eps, auc) in rows {
                let _ = writeln!(out, "{},{}", fmt_sig9(*eps), fmt_sig9(*auc));
            }
        }
        CsvTable::Accuracy(rows) => {
            out.push_str("layer,theta,k,accuracy\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    r.layer,
                    fmt_sig9(r.theta),
                    r.k,
                    fmt_sig9(r.accuracy)
                );
            }
        }
        CsvTable::Size(rows) => {
            out.push_str("theta,size\n");
            for (theta, size) in rows {
                let _ = writeln!(out, "{},{size}", fmt_sig9(*theta));
            }
        }
    }
    out
}

pub fn emit_csv(path: impl AsRef<Path>, table: CsvTable<'_>) -> Result<()> {
    fs::write(path, render_csv(table))?;
    Ok(())
}

/// Reads a `sample_id,cpl` table.
pub fn read_cpl_csv(path: impl AsRef<Path>) -> Result<Vec<CplScore>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("sample_id,cpl") => {}
        other => {
            return Err(Error::InvalidConfig(format!(
                "expected header \"sample_id,cpl\", found {other:?}"
            )))
        }
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::InvalidConfig(format!("malformed cpl row {}: {line:?}", i + 2));
            let (id, value) = line.split_once(',').ok_or_else(bad)?;
            let sample_id = id.trim().parse().map_err(|_| bad())?;
            let value: f64 = value.trim().parse().map_err(|_| bad())?;
            if !value.is_finite() {
                return Err(bad());
            }
            Ok(CplScore {
                sample_id,
                value,
                num_layer_pairs: 0,
            })
        })
        .collect()
}
