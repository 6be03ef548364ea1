//! Tabular data files and the run report.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Format;

/// Named float columns; complex values occupy a `_re`/`_im` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// `name_re`, `name_im`.
pub fn complex_columns(name: &str) -> [String; 2] {
    [format!("{name}_re"), format!("{name}_im")]
}

pub fn split(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Twelve digits after the point; scientific notation outside [1e-4, 1e12).
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0.000000000000".to_string()
    } else if !(1e-4..1e12).contains(&a) && a.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x:.12}")
    }
}

pub fn write_csv<W: Write>(table: &Table, mut w: W) -> io::Result<()> {
    writeln!(w, "{}", table.columns.join(","))?;
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|&x| format_float(x)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_json<W: Write>(table: &Table, mut w: W) -> io::Result<()> {
    if let Some(bad) = table.rows.iter().flatten().find(|x| !x.is_finite()) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("non-finite value {bad} in table"),
        ));
    }
    serde_json::to_writer(&mut w, table)?;
    writeln!(w)
}

/// Writes `table` as `dir/stem.csv` or `dir/stem.json`.
pub fn emit_output(table: &Table, format: Format, dir: &Path, stem: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(table, &mut buf)?,
        Format::Json => write_json(table, &mut buf)?,
    }
    fs::write(&path, buf)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(table: &Table, format: Format) -> String {
        let mut buf = Vec::new();
        match format {
            Format::Csv => write_csv(table, &mut buf).unwrap(),
            Format::Json => write_json(table, &mut buf).unwrap(),
        }
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn complex_cells() {
        let [re, im] = complex_columns("val");
        let mut t = Table::with_columns(vec![re, im]);
        t.push(split(Complex64::new(1.0, 0.5)).to_vec());
        assert_eq!(text(&t, Format::Csv), "val_re,val_im\n1.000000000000,0.500000000000\n");
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(text(&Table::new(&["x", "t"]), Format::Csv), "x,t\n");
    }

    #[test]
    fn float_formats() {
        assert_eq!(format_float(-0.0), "0.000000000000");
        assert_eq!(format_float(2.5e-7), "2.50000000000e-7");
        assert_eq!(format_float(-3.0), "-3.000000000000");
        assert_eq!(format_float(1e13), "1.00000000000e13");
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![0.1 + 0.2, std::f64::consts::PI]);
        t.push(vec![1e-300, -7.0 / 3.0]);
        let back: Table = serde_json::from_str(&text(&t, Format::Json)).unwrap();
        assert_eq!(back, t);
        for (x, y) in back.rows.iter().flatten().zip(t.rows.iter().flatten()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn json_rejects_non_finite() {
        let mut t = Table::new(&["a"]);
        t.push(vec![f64::NAN]);
        assert!(write_json(&t, Vec::new()).is_err());
    }
}
