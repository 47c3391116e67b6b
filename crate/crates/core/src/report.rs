//! Run directories: CSV tables at six significant digits, JSON at full
//! precision, and a manifest describing how the run was produced.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Shortest decimal rendering of `x` rounded to six significant digits.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    let plain = format!("{rounded}");
    let exp = rounded.abs().log10().floor();
    if !(-5.0..16.0).contains(&exp) {
        return format!("{rounded:e}");
    }
    plain
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i128),
    Float(f64),
    Missing,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => sig6(*x),
            Cell::Missing => String::new(),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Float)
    }
}

macro_rules! int_cell {
    ($($t:ty),*) => {$(
        impl From<$t> for Cell {
            fn from(i: $t) -> Self {
                Cell::Int(i as i128)
            }
        }
    )*};
}
int_cell!(u32, u64, usize, i64);

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

/// Output directory of one run; records every file it writes.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path)
            .map_err(|e| Error::Io(format!("creating {}: {e}", path.display())))?;
        Ok(Self {
            path: path.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path.join(name);
        let f = File::create(&p).map_err(|e| Error::Io(format!("writing {}: {e}", p.display())))?;
        if !self.files.iter().any(|n| n == name) {
            self.files.push(name.to_string());
        }
        Ok(BufWriter::new(f))
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.open(name)?);
        let io = |e: csv::Error| Error::Io(format!("{name}: {e}"));
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r.iter().map(Cell::render)).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value)
            .map_err(|e| Error::Io(format!("{name}: {e}")))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let mut w = self.open(name)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    /// Write a raw stream through `f`.
    pub fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let mut w = self.open(name)?;
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(1.276340141667), "1.27634");
        assert_eq!(sig6(323277.0), "323277");
        assert_eq!(sig6(9430.4), "9430.4");
        assert_eq!(sig6(0.1 + 0.2), "0.3");
        assert_eq!(sig6(-2.5e-9), "-2.5e-9");
        assert_eq!(sig6(1.23456789e20), "1.23457e20");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(f64::NAN), "nan");
    }

    #[test]
    fn writes_csv_and_json() {
        let dir = std::env::temp_dir().join(format!("semianon-report-{}", std::process::id()));
        let mut run = RunDir::create(&dir).unwrap();
        run.write_csv(
            "t.csv",
            &["name", "x", "k"],
            &[
                vec!["a".into(), 1.0f64.into(), 3u32.into()],
                vec!["b".into(), Cell::Missing, 4u64.into()],
            ],
        )
        .unwrap();
        run.write_json("t.json", &[0.1f64 + 0.2]).unwrap();
        assert_eq!(run.files(), ["t.csv", "t.json"]);
        let csv = fs::read_to_string(dir.join("t.csv")).unwrap();
        assert_eq!(csv, "name,x,k\na,1,3\nb,,4\n");
        let json = fs::read_to_string(dir.join("t.json")).unwrap();
        assert!(json.contains("0.30000000000000004"));
        fs::remove_dir_all(dir).unwrap();
    }
}
