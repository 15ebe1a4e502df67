//! Minimal numeric CSV: one `#` comment line with the tool version and
//! config hash, a header row, then comma-separated rows with LF endings.
//!
//! Floats use Rust's shortest round-trip formatting, so values re-parse to
//! the same bits and output is independent of locale.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Field {
    Int(u64),
    Float(f64),
    Flag(bool),
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as u64)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Int(v)
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Flag(v)
    }
}

pub fn comment_line(hash: &str) -> String {
    format!("# matconc {} config_hash={hash}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone)]
pub struct CsvTable {
    buf: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(hash: &str, header: &[&str]) -> Self {
        let mut buf = comment_line(hash);
        buf.push('\n');
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self {
            buf,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[Field]) {
        assert_eq!(fields.len(), self.columns, "row width must match the header");
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            let _ = match f {
                Field::Int(v) => write!(self.buf, "{v}"),
                // `{:?}` is the shortest representation that round-trips.
                Field::Float(v) => write!(self.buf, "{v:?}"),
                Field::Flag(v) => write!(self.buf, "{}", u8::from(*v)),
            };
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}
