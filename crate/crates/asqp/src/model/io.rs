//! Problem file reading and writing.
//!
//! A problem file is a UTF-8 JSON object with the fields
//!
//! ```text
//! n   variable count (positive integer)
//! Q   n x n Hessian, row-major array of arrays
//! q   linear term, length n
//! A   equality matrix, array of length-n rows (optional, default empty)
//! b   equality right-hand side, one entry per row of A
//! G   inequality matrix, array of length-n rows (optional, default empty)
//! h   inequality right-hand side, one entry per row of G
//! x0  optional starting point, length n
//! ```
//!
//! Parsing is strict: unknown fields are rejected and every defect is
//! reported with the name of the offending field. Shape checks run before any
//! matrix is materialized, so a hostile `n` cannot trigger a large
//! allocation.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};

use crate::model::QpProblem;

/// Problem file defect, carrying the first offending field.
#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("invalid JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("problem file: {0}")]
    Structure(String),
    #[error("field `{field}`: {detail}")]
    Field { field: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ParseError {
    fn field(field: impl Into<String>, detail: impl Into<String>) -> Self {
        ParseError::Field { field: field.into(), detail: detail.into() }
    }
}

const KNOWN_FIELDS: [&str; 8] = ["n", "Q", "q", "A", "b", "G", "h", "x0"];

/// Parses a problem from JSON text.
pub fn parse_problem_str(text: &str) -> Result<QpProblem, ParseError> {
    let value: Value = serde_json::from_str(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| ParseError::Structure("document must be a JSON object".into()))?;

    for key in obj.keys() {
        if !KNOWN_FIELDS.contains(&key.as_str()) {
            return Err(ParseError::field(key, "unknown field"));
        }
    }

    let n = parse_dim(obj)?;
    let hess = parse_matrix(obj, "Q", Some(n), n)?;
    let lin = parse_vector(obj, "q", n)?;
    let a_eq = parse_matrix(obj, "A", None, n)?;
    let b_eq = parse_rhs(obj, "b", a_eq.nrows())?;
    let a_ineq = parse_matrix(obj, "G", None, n)?;
    let b_ineq = parse_rhs(obj, "h", a_ineq.nrows())?;
    let x0 = match obj.get("x0") {
        None | Some(Value::Null) => None,
        Some(_) => Some(parse_vector(obj, "x0", n)?),
    };

    Ok(QpProblem { hess, lin, a_eq, b_eq, a_ineq, b_ineq, x0 })
}

/// Reads and parses a problem file.
pub fn read_problem_file(path: impl AsRef<Path>) -> Result<QpProblem, ParseError> {
    let text = std::fs::read_to_string(path)?;
    parse_problem_str(&text)
}

/// Serializes a problem to pretty-printed JSON. Values survive a round trip
/// bit-exactly.
pub fn problem_to_json(problem: &QpProblem) -> String {
    let rows = |m: &DMatrix<f64>| -> Value {
        Value::Array(
            (0..m.nrows())
                .map(|i| Value::Array((0..m.ncols()).map(|j| json_num(m[(i, j)])).collect()))
                .collect(),
        )
    };
    let vec = |v: &DVector<f64>| -> Value {
        Value::Array(v.iter().map(|&x| json_num(x)).collect())
    };

    let mut obj = Map::new();
    obj.insert("n".into(), Value::from(problem.n() as u64));
    obj.insert("Q".into(), rows(&problem.hess));
    obj.insert("q".into(), vec(&problem.lin));
    obj.insert("A".into(), rows(&problem.a_eq));
    obj.insert("b".into(), vec(&problem.b_eq));
    obj.insert("G".into(), rows(&problem.a_ineq));
    obj.insert("h".into(), vec(&problem.b_ineq));
    if let Some(x0) = &problem.x0 {
        obj.insert("x0".into(), vec(x0));
    }
    serde_json::to_string_pretty(&Value::Object(obj)).expect("serializing finite floats")
}

/// Writes a problem file (see [`problem_to_json`]).
pub fn write_problem_file(path: impl AsRef<Path>, problem: &QpProblem) -> Result<(), ParseError> {
    std::fs::write(path, problem_to_json(problem) + "\n")?;
    Ok(())
}

fn json_num(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .expect("problem data must be finite")
}

fn parse_dim(obj: &Map<String, Value>) -> Result<usize, ParseError> {
    let v = obj
        .get("n")
        .ok_or_else(|| ParseError::field("n", "missing"))?;
    let n = v
        .as_u64()
        .ok_or_else(|| ParseError::field("n", "must be a positive integer"))?;
    if n == 0 {
        return Err(ParseError::field("n", "must be at least 1"));
    }
    usize::try_from(n).map_err(|_| ParseError::field("n", "too large"))
}

fn parse_number(field: &str, index: String, v: &Value) -> Result<f64, ParseError> {
    v.as_f64()
        .ok_or_else(|| ParseError::field(format!("{field}{index}"), "must be a number"))
}

fn parse_vector(obj: &Map<String, Value>, field: &str, len: usize) -> Result<DVector<f64>, ParseError> {
    let v = obj
        .get(field)
        .ok_or_else(|| ParseError::field(field, "missing"))?;
    let arr = v
        .as_array()
        .ok_or_else(|| ParseError::field(field, "must be an array of numbers"))?;
    if arr.len() != len {
        return Err(ParseError::field(
            field,
            format!("has length {}, expected {len}", arr.len()),
        ));
    }
    let mut out = DVector::zeros(len);
    for (i, item) in arr.iter().enumerate() {
        out[i] = parse_number(field, format!("[{i}]"), item)?;
    }
    Ok(out)
}

/// Right-hand side paired with a constraint matrix: may be absent only when
/// the matrix has no rows.
fn parse_rhs(obj: &Map<String, Value>, field: &str, len: usize) -> Result<DVector<f64>, ParseError> {
    if obj.get(field).is_none() && len == 0 {
        return Ok(DVector::zeros(0));
    }
    parse_vector(obj, field, len)
}

/// Parses a row-major matrix with `cols` columns. `rows` pins the row count
/// when the shape is dictated by `n`; otherwise the row count comes from the
/// data (and the paired right-hand side is checked against it). Constraint
/// matrices (`rows` of `None`) may be absent, which reads as zero rows.
fn parse_matrix(
    obj: &Map<String, Value>,
    field: &str,
    rows: Option<usize>,
    cols: usize,
) -> Result<DMatrix<f64>, ParseError> {
    let v = match obj.get(field) {
        Some(v) => v,
        None if rows.is_none() => return Ok(DMatrix::zeros(0, cols)),
        None => return Err(ParseError::field(field, "missing")),
    };
    let arr = v
        .as_array()
        .ok_or_else(|| ParseError::field(field, "must be an array of rows"))?;
    if let Some(expected) = rows {
        if arr.len() != expected {
            return Err(ParseError::field(
                field,
                format!("has {} rows, expected {expected}", arr.len()),
            ));
        }
    }
    let nrows = arr.len();
    let mut data = Vec::with_capacity(nrows * cols);
    for (i, row) in arr.iter().enumerate() {
        let row_arr = row
            .as_array()
            .ok_or_else(|| ParseError::field(format!("{field}[{i}]"), "must be an array"))?;
        if row_arr.len() != cols {
            return Err(ParseError::field(
                format!("{field}[{i}]"),
                format!("has length {}, expected {cols}", row_arr.len()),
            ));
        }
        for (j, item) in row_arr.iter().enumerate() {
            data.push(parse_number(field, format!("[{i}][{j}]"), item)?);
        }
    }
    Ok(DMatrix::from_row_slice(nrows, cols, &data))
}
