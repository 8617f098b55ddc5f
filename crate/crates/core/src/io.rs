//! File formats: plain matrices (text and binary), parcellation label files,
//! feature CSV and a helper for 17-significant-digit number output.
//!
//! Text matrix: a `rows cols` header line followed by `rows` lines of
//! whitespace-separated decimals (row-major).
//!
//! Binary matrix (`.bin`): two little-endian `u64` counts (rows, cols) and then
//! `rows * cols` little-endian `f64` values in row-major order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::models::PairedDataset;
use crate::pairing::Parcellation;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |cause| IoError::Io { path: path.to_path_buf(), cause }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { path: path.to_path_buf(), line, message: message.into() }
}

/// Decimal with 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Binary matrices are recognised by the `.bin` extension.
pub fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let result = if is_binary(path) {
        (|| {
            w.write_all(&(m.nrows() as u64).to_le_bytes())?;
            w.write_all(&(m.ncols() as u64).to_le_bytes())?;
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    w.write_all(&m[(r, c)].to_le_bytes())?;
                }
            }
            w.flush()
        })()
    } else {
        (|| {
            writeln!(w, "{} {}", m.nrows(), m.ncols())?;
            for r in 0..m.nrows() {
                let line: Vec<String> = (0..m.ncols()).map(|c| fmt_f64(m[(r, c)])).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
            w.flush()
        })()
    };
    result.map_err(io_err(path))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, IoError> {
    let src = MatrixFile::open(path)?;
    src.read_columns(0, src.cols)
}

/// Matrix file opened for column-block access.
#[derive(Debug, Clone)]
pub struct MatrixFile {
    path: PathBuf,
    pub rows: usize,
    pub cols: usize,
    binary: bool,
}

impl MatrixFile {
    pub fn open(path: &Path) -> Result<Self, IoError> {
        let binary = is_binary(path);
        let (rows, cols) = if binary {
            let mut f = File::open(path).map_err(io_err(path))?;
            let mut hdr = [0u8; 16];
            f.read_exact(&mut hdr).map_err(io_err(path))?;
            let rows = u64::from_le_bytes(hdr[..8].try_into().unwrap()) as usize;
            let cols = u64::from_le_bytes(hdr[8..].try_into().unwrap()) as usize;
            let len = f.metadata().map_err(io_err(path))?.len();
            let expected = 16 + 8 * (rows as u64) * (cols as u64);
            if len != expected {
                return Err(parse_err(path, 0, format!("expected {expected} bytes for {rows}x{cols}, found {len}")));
            }
            (rows, cols)
        } else {
            let f = File::open(path).map_err(io_err(path))?;
            let mut first = String::new();
            BufReader::new(f).read_line(&mut first).map_err(io_err(path))?;
            parse_header(path, &first)?
        };
        Ok(Self { path: path.to_path_buf(), rows, cols, binary })
    }

    /// Columns `start..start+count` as a `rows × count` matrix.
    pub fn read_columns(&self, start: usize, count: usize) -> Result<DMatrix<f64>, IoError> {
        let path = self.path.as_path();
        if start + count > self.cols {
            return Err(parse_err(path, 0, format!("column block {start}+{count} exceeds {} columns", self.cols)));
        }
        let mut out = DMatrix::zeros(self.rows, count);
        if self.binary {
            let mut f = BufReader::new(File::open(path).map_err(io_err(path))?);
            let mut buf = vec![0u8; 8 * count];
            for r in 0..self.rows {
                let offset = 16 + 8 * (r * self.cols + start) as u64;
                f.seek(SeekFrom::Start(offset)).map_err(io_err(path))?;
                f.read_exact(&mut buf).map_err(io_err(path))?;
                for c in 0..count {
                    out[(r, c)] = f64::from_le_bytes(buf[8 * c..8 * c + 8].try_into().unwrap());
                }
            }
        } else {
            let f = BufReader::new(File::open(path).map_err(io_err(path))?);
            let mut lines = f.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
            lines.next();
            let mut r = 0;
            for (lineno, line) in lines {
                let line = line.map_err(io_err(path))?;
                if r >= self.rows {
                    return Err(parse_err(path, lineno + 1, "more rows than the header declares"));
                }
                let mut n = 0;
                for (c, tok) in line.split_whitespace().enumerate() {
                    n += 1;
                    if c >= start && c < start + count {
                        out[(r, c - start)] = tok.parse().map_err(|_| parse_err(path, lineno + 1, format!("bad number '{tok}'")))?;
                    }
                }
                if n != self.cols {
                    return Err(parse_err(path, lineno + 1, format!("expected {} values, found {n}", self.cols)));
                }
                r += 1;
            }
            if r != self.rows {
                return Err(parse_err(path, 0, format!("header declares {} rows, found {r}", self.rows)));
            }
        }
        Ok(out)
    }
}

fn parse_header(path: &Path, line: &str) -> Result<(usize, usize), IoError> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    match toks.as_slice() {
        [r, c] => match (r.parse(), c.parse()) {
            (Ok(r), Ok(c)) => Ok((r, c)),
            _ => Err(parse_err(path, 1, format!("bad header '{}'", line.trim()))),
        },
        _ => Err(parse_err(path, 1, "header must be 'rows cols'")),
    }
}

/// One 1-based region label per line.
pub fn read_parcellation(path: &Path) -> Result<Parcellation, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        labels.push(t.parse::<usize>().map_err(|_| parse_err(path, i + 1, format!("bad region label '{t}'")))?);
    }
    Parcellation::new(labels).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn write_parcellation(path: &Path, parc: &Parcellation) -> Result<(), IoError> {
    let mut s = String::new();
    for l in parc.labels() {
        s.push_str(&format!("{l}\n"));
    }
    std::fs::write(path, s).map_err(io_err(path))
}

/// One line of a pairs list: two subject files and the pair's label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairEntry {
    pub a: PathBuf,
    pub b: PathBuf,
    pub label: u8,
}

fn parse_label(tok: &str) -> Option<u8> {
    match tok {
        "1" | "MZ" => Some(1),
        "0" | "DZ" => Some(0),
        _ => None,
    }
}

/// Pairs list: `subject_a subject_b label` per line, `#` starts a comment.
/// Relative paths are resolved against the list's directory.
pub fn read_pairs_list(path: &Path) -> Result<Vec<PairEntry>, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        let [a, b, label] = toks.as_slice() else {
            return Err(parse_err(path, i + 1, "expected 'subject_a subject_b label'"));
        };
        let label = parse_label(label).ok_or_else(|| parse_err(path, i + 1, format!("label '{label}' is not 0/1")))?;
        out.push(PairEntry { a: base.join(a), b: base.join(b), label });
    }
    if out.is_empty() {
        return Err(parse_err(path, 0, "no pairs listed"));
    }
    Ok(out)
}

/// Feature CSV: header `region_1,…,region_M,label`, then one pair per row.
pub fn write_features(path: &Path, data: &PairedDataset) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    (|| {
        let header: Vec<String> = (1..=data.dim()).map(|k| format!("region_{k}")).collect();
        writeln!(w, "{},label", header.join(","))?;
        for (x, t) in data.features().iter().zip(data.labels()) {
            let row: Vec<String> = x.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{},{t}", row.join(","))?;
        }
        w.flush()
    })()
    .map_err(io_err(path))
}

/// Reads feature CSV; a non-numeric first line is treated as a header.
pub fn read_features(path: &Path) -> Result<PairedDataset, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        if i == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let (label, values) = fields.split_last().ok_or_else(|| parse_err(path, i + 1, "empty row"))?;
        let label = parse_label(label).ok_or_else(|| parse_err(path, i + 1, format!("label '{label}' is not 0/1")))?;
        let row = values
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| parse_err(path, i + 1, format!("bad number '{v}'"))))
            .collect::<Result<Vec<_>, _>>()?;
        features.push(row);
        labels.push(label);
    }
    PairedDataset::new(features, labels).map_err(|e| parse_err(path, 0, e.to_string()))
}
