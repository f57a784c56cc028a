//! JSON documents for matrices: `{"n": 2, "data": [[[re, im], ...], ...], "tag": ...}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{c64, ComplexMatrix, MAX_DIM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub n: usize,
    pub data: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl From<&ComplexMatrix> for MatrixDocument {
    fn from(m: &ComplexMatrix) -> Self {
        let n = m.dim();
        let data = (0..n)
            .map(|i| (0..n).map(|j| [m.get(i, j).re, m.get(i, j).im]).collect())
            .collect();
        Self { n, data, tag: None }
    }
}

impl From<ComplexMatrix> for MatrixDocument {
    fn from(m: ComplexMatrix) -> Self {
        Self::from(&m)
    }
}

impl TryFrom<MatrixDocument> for ComplexMatrix {
    type Error = Error;

    fn try_from(doc: MatrixDocument) -> Result<Self> {
        doc.to_matrix()
    }
}

impl MatrixDocument {
    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let schema = |path: String, message: String| Error::Schema { path, message };
        if self.n == 0 || self.n > MAX_DIM {
            return Err(schema("n".into(), format!("must be in 1..={MAX_DIM}, got {}", self.n)));
        }
        if self.data.len() != self.n {
            return Err(schema("data".into(), format!("expected {} rows, found {}", self.n, self.data.len())));
        }
        for (i, row) in self.data.iter().enumerate() {
            if row.len() != self.n {
                return Err(schema(
                    format!("data[{i}]"),
                    format!("expected {} entries, found {}", self.n, row.len()),
                ));
            }
            for (j, z) in row.iter().enumerate() {
                if !(z[0].is_finite() && z[1].is_finite()) {
                    return Err(schema(format!("data[{i}][{j}]"), "entry is not finite".into()));
                }
            }
        }
        ComplexMatrix::new(nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| {
            c64(self.data[i][j][0], self.data[i][j][1])
        }))
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Schema { path: format!("line {} column {}", e.line(), e.column()), message: e.to_string() }
}

/// Parses a JSON value into a [`MatrixDocument`], reporting the first
/// offending field by path.
pub fn document_from_value(value: &Value, path: &str) -> Result<MatrixDocument> {
    let err = |p: String, m: &str| Error::Schema { path: p, message: m.to_string() };
    let obj = value.as_object().ok_or_else(|| err(path.into(), "expected an object"))?;
    let n = obj
        .get("n")
        .and_then(Value::as_u64)
        .ok_or_else(|| err(format!("{path}.n"), "expected a non-negative integer"))? as usize;
    let rows = obj
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| err(format!("{path}.data"), "expected an array of rows"))?;
    let mut data = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| err(format!("{path}.data[{i}]"), "expected an array"))?;
        let mut out = Vec::with_capacity(row.len());
        for (j, z) in row.iter().enumerate() {
            let here = format!("{path}.data[{i}][{j}]");
            let pair = z.as_array().filter(|p| p.len() == 2).ok_or_else(|| err(here.clone(), "expected [re, im]"))?;
            let re = pair[0].as_f64().ok_or_else(|| err(here.clone(), "real part is not a number"))?;
            let im = pair[1].as_f64().ok_or_else(|| err(here.clone(), "imaginary part is not a number"))?;
            out.push([re, im]);
        }
        data.push(out);
    }
    let tag = match obj.get("tag") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(err(format!("{path}.tag"), "expected a string")),
    };
    Ok(MatrixDocument { n, data, tag })
}

pub fn parse_document(text: &str) -> Result<MatrixDocument> {
    let value: Value = serde_json::from_str(text).map_err(json_error)?;
    document_from_value(&value, "$")
}

/// Parses and validates a matrix document.
pub fn parse_matrix(text: &str) -> Result<ComplexMatrix> {
    parse_document(text)?.to_matrix()
}

pub fn matrix_to_json(m: &ComplexMatrix) -> String {
    serde_json::to_string(&MatrixDocument::from(m)).expect("matrix documents serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_identity_and_imaginary_diagonal() {
        let i2 = parse_matrix(r#"{"n":2,"data":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#).unwrap();
        assert_eq!(i2, ComplexMatrix::identity(2));
        let d = parse_matrix(r#"{"n":2,"data":[[[0,1],[0,0]],[[0,0],[0,-1]]]}"#).unwrap();
        assert_eq!(d, ComplexMatrix::diag(&[c64(0.0, 1.0), c64(0.0, -1.0)]));
    }

    #[test]
    fn reports_schema_paths() {
        let e = parse_matrix(r#"{"n":3,"data":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#).unwrap_err();
        assert!(matches!(e, Error::Schema { ref path, .. } if path == "data"), "{e:?}");
        let e = parse_matrix(r#"{"n":2,"data":[[[1,0],[0,0]],[[0,0],[1]]]}"#).unwrap_err();
        assert!(matches!(e, Error::Schema { ref path, .. } if path == "$.data[1][1]"), "{e:?}");
        let e = parse_matrix("{\"n\":2,\n\"data\": [}").unwrap_err();
        assert!(matches!(e, Error::Schema { ref path, .. } if path.starts_with("line 2")), "{e:?}");
    }

    #[test]
    fn round_trips_exactly() {
        let m = ComplexMatrix::from_fn(3, |i, j| c64(i as f64 * 0.1 + 1e-17, j as f64 / 3.0));
        assert_eq!(parse_matrix(&matrix_to_json(&m)).unwrap(), m);
    }
}
