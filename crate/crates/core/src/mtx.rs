//! Matrix Market reader and writer (real `coordinate` and `array` formats with
//! `general` or `symmetric` symmetry) and problem bundles built from them.
//!
//! A bundle is a directory holding `A.mtx`, `b.mtx`, and optionally `B.mtx` and
//! `c.mtx`. Matrix-valued `b` or `c` files are reduced to their first column.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{LtiSystem, LyapunovProblem, SylvesterProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxFormat {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MtxData {
    /// Zero-based `(row, col, value)` entries in full (expanded) storage.
    Coordinate(Vec<(usize, usize, f64)>),
    Array(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MtxMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: MtxData,
}

impl MtxMatrix {
    pub fn format(&self) -> MtxFormat {
        match self.data {
            MtxData::Coordinate(_) => MtxFormat::Coordinate,
            MtxData::Array(_) => MtxFormat::Array,
        }
    }

    pub fn nnz(&self) -> usize {
        match &self.data {
            MtxData::Coordinate(t) => t.len(),
            MtxData::Array(m) => m.len(),
        }
    }

    /// Dense copy; duplicate coordinate entries are summed.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.data {
            MtxData::Array(m) => m.clone(),
            MtxData::Coordinate(t) => {
                let mut m = DMatrix::zeros(self.rows, self.cols);
                for &(i, j, v) in t {
                    m[(i, j)] += v;
                }
                m
            }
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        MtxMatrix { rows: m.nrows(), cols: m.ncols(), data: MtxData::Array(m.clone()) }
    }

    /// Coordinate form holding the nonzeros of `m`.
    pub fn sparse_from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        MtxMatrix { rows: m.nrows(), cols: m.ncols(), data: MtxData::Coordinate(t) }
    }
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::MatrixMarket { line, message: message.into() }
}

fn parse_index(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| err(line, format!("missing {what}")))?;
    tok.parse::<usize>()
        .map_err(|_| err(line, format!("cannot parse {what} `{tok}`")))
}

fn parse_value(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| err(line, "missing value"))?;
    tok.parse::<f64>()
        .map_err(|_| err(line, format!("cannot parse value `{tok}`")))
}

pub fn parse_matrix_market(text: &str) -> Result<MtxMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(err(1, "header must read `%%MatrixMarket matrix <format> <field> <symmetry>`"));
    }
    let format = match fields[2].as_str() {
        "coordinate" => MtxFormat::Coordinate,
        "array" => MtxFormat::Array,
        other => return Err(err(1, format!("unsupported format `{other}`"))),
    };
    match fields[3].as_str() {
        "real" | "double" | "integer" => {}
        other => return Err(err(1, format!("non-real field `{other}`"))),
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(err(1, format!("unsupported symmetry `{other}`"))),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body.next().ok_or_else(|| err(1, "missing size line"))?;
    let mut tok = size.split_whitespace();
    let rows = parse_index(tok.next(), size_line, "row count")?;
    let cols = parse_index(tok.next(), size_line, "column count")?;
    if symmetric && rows != cols {
        return Err(err(size_line, "symmetric matrix must be square"));
    }

    match format {
        MtxFormat::Coordinate => {
            let nnz = parse_index(tok.next(), size_line, "entry count")?;
            let mut entries = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
            let mut seen = 0;
            let mut last_line = size_line;
            for (ln, l) in body {
                last_line = ln;
                if seen == nnz {
                    return Err(err(ln, format!("more than the declared {nnz} entries")));
                }
                let mut t = l.split_whitespace();
                let i = parse_index(t.next(), ln, "row index")?;
                let j = parse_index(t.next(), ln, "column index")?;
                let v = parse_value(t.next(), ln)?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(err(ln, format!("index ({i},{j}) outside declared {rows}x{cols}")));
                }
                if symmetric && j > i {
                    return Err(err(ln, format!("entry ({i},{j}) above the diagonal in a symmetric file")));
                }
                entries.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    entries.push((j - 1, i - 1, v));
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(err(last_line, format!("declared {nnz} entries, found {seen}")));
            }
            Ok(MtxMatrix { rows, cols, data: MtxData::Coordinate(entries) })
        }
        MtxFormat::Array => {
            let expected = if symmetric { rows * (rows + 1) / 2 } else { rows * cols };
            let mut values = Vec::with_capacity(expected);
            let mut last_line = size_line;
            for (ln, l) in body {
                last_line = ln;
                for t in l.split_whitespace() {
                    if values.len() == expected {
                        return Err(err(ln, format!("more than the declared {expected} values")));
                    }
                    values.push(parse_value(Some(t), ln)?);
                }
            }
            if values.len() != expected {
                return Err(err(
                    last_line,
                    format!("declared {expected} values, found {}", values.len()),
                ));
            }
            let m = if symmetric {
                let mut m = DMatrix::zeros(rows, cols);
                let mut it = values.into_iter();
                for j in 0..cols {
                    for i in j..rows {
                        let v = it.next().unwrap_or_default();
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
                m
            } else {
                DMatrix::from_vec(rows, cols, values)
            };
            Ok(MtxMatrix { rows, cols, data: MtxData::Array(m) })
        }
    }
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<MtxMatrix> {
    parse_matrix_market(&fs::read_to_string(path)?)
}

/// General-symmetry text with values at 17 significant digits.
pub fn format_matrix_market(m: &MtxMatrix) -> String {
    let mut out = String::new();
    match &m.data {
        MtxData::Coordinate(t) => {
            out.push_str("%%MatrixMarket matrix coordinate real general\n");
            let _ = writeln!(out, "{} {} {}", m.rows, m.cols, t.len());
            for &(i, j, v) in t {
                let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v);
            }
        }
        MtxData::Array(a) => {
            out.push_str("%%MatrixMarket matrix array real general\n");
            let _ = writeln!(out, "{} {}", m.rows, m.cols);
            for v in a.iter() {
                let _ = writeln!(out, "{v:.16e}");
            }
        }
    }
    out
}

pub fn write_matrix_market(path: impl AsRef<Path>, m: &MtxMatrix) -> Result<()> {
    fs::write(path, format_matrix_market(m))?;
    Ok(())
}

fn first_column(m: &MtxMatrix) -> DVector<f64> {
    m.to_dense().column(0).into_owned()
}

/// Contents of a problem directory.
#[derive(Debug, Clone)]
pub struct ProblemBundle {
    pub a: DMatrix<f64>,
    pub b_op: Option<DMatrix<f64>>,
    pub b: DVector<f64>,
    pub c: Option<DVector<f64>>,
    /// Columns in the original `b.mtx` before reduction to the first one.
    pub input_columns: usize,
}

impl ProblemBundle {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let a = load_matrix_market(dir.join("A.mtx"))?.to_dense();
        let b_file = load_matrix_market(dir.join("b.mtx"))?;
        let input_columns = b_file.cols;
        let b = first_column(&b_file);
        let b_op = match dir.join("B.mtx") {
            p if p.exists() => Some(load_matrix_market(p)?.to_dense()),
            _ => None,
        };
        let c = match dir.join("c.mtx") {
            p if p.exists() => {
                let c = load_matrix_market(p)?;
                // an output matrix is stored as rows x n
                let dense = c.to_dense();
                Some(if dense.nrows() == 1 && dense.ncols() > 1 {
                    dense.row(0).transpose()
                } else {
                    dense.column(0).into_owned()
                })
            }
            _ => None,
        };
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                context: "columns of A.mtx",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                context: "rows of b.mtx against A.mtx",
                expected: a.nrows(),
                found: b.len(),
            });
        }
        Ok(ProblemBundle { a, b_op, b, c, input_columns })
    }

    pub fn lyapunov(&self) -> Result<LyapunovProblem> {
        LyapunovProblem::new(self.a.clone(), self.b.clone())
    }

    /// Uses `B.mtx` and `c.mtx` when present, else the Lyapunov pair `B = A^T`, `c = b`.
    pub fn sylvester(&self) -> Result<SylvesterProblem> {
        let b_op = self.b_op.clone().unwrap_or_else(|| self.a.transpose());
        let c = self.c.clone().unwrap_or_else(|| self.b.clone());
        SylvesterProblem::new(self.a.clone(), b_op, self.b.clone(), c)
    }

    pub fn lti(&self) -> Result<LtiSystem> {
        LtiSystem::new(self.a.clone(), self.b.clone(), self.c.clone().unwrap_or_else(|| self.b.clone()))
    }
}

pub fn write_bundle(dir: impl AsRef<Path>, sys: &LtiSystem) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_matrix_market(dir.join("A.mtx"), &MtxMatrix::sparse_from_dense(&sys.a))?;
    let col = |v: &DVector<f64>| MtxMatrix::from_dense(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()));
    write_matrix_market(dir.join("b.mtx"), &col(&sys.b))?;
    write_matrix_market(dir.join("c.mtx"), &col(&sys.c))?;
    Ok(())
}
