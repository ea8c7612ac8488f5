//! CSV reports with a `#`-prefixed header block.

use std::fmt::Write as _;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Csv {
    header: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// Formats a float so that it parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl Csv {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Csv {
        Csv {
            header: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.header.push((key.into(), value.to_string()));
        self
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn push_numbers(&mut self, cells: &[f64]) {
        self.push_row(cells.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn header(&self) -> &[(String, String)] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Header lines, then the column row and the data rows.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            for (i, line) in v.lines().enumerate() {
                if i == 0 {
                    let _ = writeln!(out, "# {k}={line}");
                } else if line.is_empty() {
                    out.push_str("#\n");
                } else {
                    let _ = writeln!(out, "#   {line}");
                }
            }
            if v.is_empty() {
                let _ = writeln!(out, "# {k}=");
            }
        }
        out.push_str(&self.body());
        out
    }

    /// Everything below the header block.
    pub fn body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}
