//! Structured verification results and their JSON encoding.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{Map, Value};

/// How a check's observed value relates to its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Passes when `max_residual <= tolerance`.
    UpperBound,
    /// Passes when `max_residual > tolerance`; `max_residual` then holds the
    /// worst (smallest) observed value, e.g. a minimum eigenvalue.
    LowerBound,
    /// Recorded for inspection only; always passes.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub kind: CheckKind,
    pub max_residual: f64,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub worst_point: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl CheckRecord {
    pub fn upper(name: impl Into<String>, max_residual: f64, tolerance: f64) -> Self {
        CheckRecord {
            name: name.into(),
            kind: CheckKind::UpperBound,
            max_residual,
            tolerance: Some(tolerance),
            // NaN never passes
            pass: max_residual <= tolerance,
            worst_point: None,
            detail: None,
        }
    }

    pub fn lower(name: impl Into<String>, min_value: f64, threshold: f64) -> Self {
        CheckRecord {
            name: name.into(),
            kind: CheckKind::LowerBound,
            max_residual: min_value,
            tolerance: Some(threshold),
            pass: min_value > threshold,
            worst_point: None,
            detail: None,
        }
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        CheckRecord {
            name: name.into(),
            kind: CheckKind::Info,
            max_residual: value,
            tolerance: None,
            pass: true,
            worst_point: None,
            detail: None,
        }
    }

    /// A hard failure that produced no number (e.g. a singular matrix).
    pub fn failed(name: impl Into<String>, message: impl Into<String>) -> Self {
        CheckRecord {
            name: name.into(),
            kind: CheckKind::UpperBound,
            max_residual: f64::INFINITY,
            tolerance: None,
            pass: false,
            worst_point: None,
            detail: Some(Value::String(message.into())),
        }
    }

    pub fn at(mut self, z: Option<f64>) -> Self {
        self.worst_point = z;
        self
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Map::is_empty")]
    pub data: Map<String, Value>,
    pub wall_time_s: f64,
}

impl VerificationReport {
    pub fn new(command: impl Into<String>) -> Self {
        VerificationReport {
            command: command.into(),
            config: None,
            checks: Vec::new(),
            pass: true,
            warnings: Vec::new(),
            data: Map::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn push(&mut self, check: CheckRecord) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    /// Appends another report's checks, warnings and data.
    pub fn absorb(&mut self, other: VerificationReport) {
        for check in other.checks {
            self.push(check);
        }
        self.warnings.extend(other.warnings);
        self.data.extend(other.data);
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn insert_data(&mut self, key: impl Into<String>, value: Value) {
        self.data.insert(key.into(), value);
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failing(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        to_json_string(self)
    }
}

/// Pretty JSON with every float printed to 17 significant digits.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitsFormatter::default());
    value
        .serialize(&mut ser)
        .expect("serializing a report to memory cannot fail");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

#[derive(Default)]
struct SigDigitsFormatter {
    pretty: PrettyFormatter<'static>,
}

impl Formatter for SigDigitsFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.pretty.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.pretty.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(writer)
    }
}

/// Row-major matrix with explicit dimensions, for reports.
pub fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Value {
    let entries: Vec<f64> = (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
        .collect();
    serde_json::json!({ "rows": m.nrows(), "cols": m.ncols(), "entries": entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_pass_tracks_checks() {
        let mut r = VerificationReport::new("t");
        r.push(CheckRecord::upper("a", 1e-12, 1e-10));
        assert!(r.pass);
        r.push(CheckRecord::lower("b", 0.0, 1e-12));
        assert!(!r.pass);
        r.push(CheckRecord::info("c", 5.0));
        assert!(!r.pass);
        assert_eq!(r.failing().count(), 1);
        assert!(!CheckRecord::upper("nan", f64::NAN, 1.0).pass);
    }

    #[test]
    fn floats_use_17_significant_digits() {
        let json = to_json_string(&serde_json::json!({ "x": 0.1, "y": [1.0, -2.5e-7] }));
        assert!(json.contains("1.0000000000000001e-1"), "{json}");
        assert!(json.contains("-2.4999999999999999e-7"), "{json}");
        let back: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
        assert_eq!(back["y"][1].as_f64(), Some(-2.5e-7));
    }

    #[test]
    fn matrix_row_major() {
        let m = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let v = matrix_json(&m);
        assert_eq!(v["entries"][1].as_f64(), Some(2.0));
        assert_eq!(v["rows"], 2);
    }
}
