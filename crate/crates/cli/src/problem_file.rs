//! The JSON problem format.
//!
//! Complex entries are `[re, im]` pairs and matrices are arrays of rows. The
//! canonical text form has sorted keys, no whitespace, and every float
//! written with 17 significant digits, so parsing and re-serializing a
//! canonical file reproduces it byte for byte.

use std::collections::BTreeMap;
use std::io;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, Serializer};
use serde_json::Value;
use sparsact::{CompletionData, Mask, Matrix, Model, PlantModel};

use crate::error::CliError;

/// Rows of `[re, im]` pairs.
pub type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Actuator,
    Completion,
    Sensor,
}

/// On-disk problem description.
///
/// For `sensor` problems `A` and `C` describe the estimated system, `V` is
/// the process-noise covariance and `R` the `p×p` measurement-noise
/// covariance; `B` and `Q` are unused and `m` must equal `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: Kind,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<RawMatrix>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<RawMatrix>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<RawMatrix>,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<RawMatrix>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<RawMatrix>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<RawMatrix>,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<Vec<u8>>>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<RawMatrix>,
}

/// Writes floats as `{:.16e}`, which round-trips every finite `f64`.
struct Canonical;

impl Formatter for Canonical {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Canonical text of any serializable value, newline-terminated.
pub fn to_canonical_json<S: Serialize>(value: &S) -> Result<Vec<u8>, CliError> {
    // Going through `Value` sorts object keys.
    let value = serde_json::to_value(value).map_err(|e| CliError::Internal(e.into()))?;
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, Canonical);
    value.serialize(&mut ser).map_err(|e| CliError::Internal(e.into()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn matrix_to_raw(m: &Matrix) -> RawMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

/// JSON value of a matrix in the problem-file layout.
pub fn matrix_value(m: &Matrix) -> Value {
    serde_json::to_value(matrix_to_raw(m)).expect("finite matrices serialize")
}

fn check_finite(field: &str, m: &Matrix) -> Result<(), CliError> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(CliError::input(format!("field `{field}` contains non-finite entries")))
    }
}

fn raw_to_matrix(field: &str, raw: &RawMatrix, rows: usize, cols: usize) -> Result<Matrix, CliError> {
    if raw.len() != rows {
        return Err(CliError::input(format!("field `{field}`: expected {rows} rows, found {}", raw.len())));
    }
    if let Some((i, row)) = raw.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(CliError::input(format!("field `{field}`: row {i} has {} entries, expected {cols}", row.len())));
    }
    let m = Matrix::from_fn(rows, cols, |i, j| Complex::new(raw[i][j][0], raw[i][j][1]));
    check_finite(field, &m)?;
    Ok(m)
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::input(format!("malformed problem file: {e}")))
    }

    pub fn to_canonical(&self) -> Result<Vec<u8>, CliError> {
        to_canonical_json(self)
    }

    fn required(&self, field: &str, rows: usize, cols: usize) -> Result<Matrix, CliError> {
        let raw = match field {
            "A" => &self.a,
            "B" => &self.b,
            "C" => &self.c,
            "V" => &self.v,
            "Q" => &self.q,
            "R" => &self.r,
            "G" => &self.g,
            _ => unreachable!("unknown matrix field {field}"),
        };
        let raw = raw.as_ref().ok_or_else(|| CliError::input(format!("missing field `{field}` (required for kind {:?})", self.kind)))?;
        raw_to_matrix(field, raw, rows, cols)
    }

    fn expect_kind(&self, kinds: &[Kind]) -> Result<(), CliError> {
        if kinds.contains(&self.kind) {
            Ok(())
        } else {
            Err(CliError::input(format!("field `kind`: expected one of {kinds:?}, found {:?}", self.kind)))
        }
    }

    /// The plant of an actuator or completion problem.
    pub fn model(&self) -> Result<Model, CliError> {
        self.expect_kind(&[Kind::Actuator, Kind::Completion])?;
        let (n, m, p) = (self.n, self.m, self.p);
        let model = PlantModel::new(
            self.required("A", n, n)?,
            self.required("B", n, m)?,
            self.required("C", p, n)?,
            self.required("V", n, n)?,
            self.required("Q", n, n)?,
            self.required("R", m, m)?,
        )?;
        Ok(model)
    }

    /// Mask and data of a completion problem.
    pub fn completion(&self) -> Result<CompletionData<f64>, CliError> {
        self.expect_kind(&[Kind::Completion])?;
        let p = self.p;
        let e = self.e.as_ref().ok_or_else(|| CliError::input("missing field `E` (required for kind Completion)"))?;
        if e.len() != p || e.iter().any(|row| row.len() != p) {
            return Err(CliError::input(format!("field `E`: expected a {p}x{p} array")));
        }
        if e.iter().flatten().any(|&v| v > 1) {
            return Err(CliError::input("field `E`: entries must be 0 or 1"));
        }
        let mask = Mask::from_fn(p, p, |i, j| e[i][j] == 1);
        if !mask.is_symmetric() {
            return Err(CliError::input("field `E`: mask must be symmetric (E_ij = E_ji)"));
        }
        let g = self.required("G", p, p)?;
        Ok(CompletionData::new(mask, g)?)
    }

    /// `(A_s, C, V_d, V_η)` of a sensor problem.
    pub fn sensor(&self) -> Result<(Matrix, Matrix, Matrix, Matrix), CliError> {
        self.expect_kind(&[Kind::Sensor])?;
        let (n, p) = (self.n, self.p);
        if self.m != p {
            return Err(CliError::input(format!("field `m`: sensor problems need m = p, found m = {} and p = {p}", self.m)));
        }
        Ok((self.required("A", n, n)?, self.required("C", p, n)?, self.required("V", n, n)?, self.required("R", p, p)?))
    }

    pub fn from_model(kind: Kind, model: &Model) -> Self {
        ProblemFile {
            kind,
            n: model.n(),
            m: model.m(),
            p: model.p(),
            a: Some(matrix_to_raw(&model.a)),
            b: Some(matrix_to_raw(&model.b)),
            c: Some(matrix_to_raw(&model.c)),
            v: Some(matrix_to_raw(&model.v)),
            q: Some(matrix_to_raw(&model.q)),
            r: Some(matrix_to_raw(&model.r)),
            e: None,
            g: None,
        }
    }

    pub fn from_completion(model: &Model, data: &CompletionData<f64>) -> Self {
        let p = data.p();
        let e = (0..p).map(|i| (0..p).map(|j| u8::from(data.e.get(i, j))).collect()).collect();
        ProblemFile { e: Some(e), g: Some(matrix_to_raw(&data.g)), ..Self::from_model(Kind::Completion, model) }
    }

    pub fn from_sensor(a_s: &Matrix, c: &Matrix, v_d: &Matrix, v_eta: &Matrix) -> Self {
        ProblemFile {
            kind: Kind::Sensor,
            n: a_s.nrows(),
            m: c.nrows(),
            p: c.nrows(),
            a: Some(matrix_to_raw(a_s)),
            b: None,
            c: Some(matrix_to_raw(c)),
            v: Some(matrix_to_raw(v_d)),
            q: None,
            r: Some(matrix_to_raw(v_eta)),
            e: None,
            g: None,
        }
    }
}

/// Object with sorted keys, for result files.
pub type JsonObject = BTreeMap<String, Value>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -0.0, 1.0, 1e-300, 123456.789, f64::MAX, f64::MIN_POSITIVE, std::f64::consts::PI] {
            let mut out = Vec::new();
            Canonical.write_f64(&mut out, v).unwrap();
            let text = String::from_utf8(out).unwrap();
            let back: f64 = serde_json::from_str(&text).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{text}");
        }
    }

    #[test]
    fn keys_are_sorted() {
        let f = ProblemFile::from_model(Kind::Actuator, &sparsact::random_stable_model(1, 3, 2, 1).unwrap());
        let text = String::from_utf8(f.to_canonical().unwrap()).unwrap();
        let pos: Vec<usize> = ["\"A\"", "\"B\"", "\"C\"", "\"Q\"", "\"R\"", "\"V\"", "\"kind\"", "\"m\"", "\"n\"", "\"p\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(!text.contains(' '));
    }

    #[test]
    fn missing_matrix_is_named() {
        let mut f = ProblemFile::from_model(Kind::Actuator, &sparsact::random_stable_model(1, 3, 2, 1).unwrap());
        f.q = None;
        let err = f.model().unwrap_err();
        assert!(err.to_string().contains("`Q`"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }
}
