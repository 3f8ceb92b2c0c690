//! File formats and atomic output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ndarray::Array2;
use serde::de::DeserializeOwned;
use tempfile::NamedTempFile;

/// Fixed 17-significant-digit rendering.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Comma-separated rows without a header.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut data = Vec::new();
    let mut cols = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        if *cols.get_or_insert(record.len()) != record.len() {
            bail!("{}: row {} has {} fields", path.display(), i + 1, record.len());
        }
        for field in record.iter() {
            data.push(
                field
                    .parse::<f64>()
                    .with_context(|| format!("{}: row {}: bad number {field:?}", path.display(), i + 1))?,
            );
        }
    }
    let cols = cols.unwrap_or(0);
    if cols == 0 {
        bail!("{}: empty matrix", path.display());
    }
    Ok(Array2::from_shape_vec((data.len() / cols, cols), data)?)
}

/// One value per line; blank lines are ignored.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .with_context(|| format!("{}: line {}", path.display(), i + 1))
        })
        .collect()
}

pub fn vector_text(v: &[f64]) -> String {
    v.iter().fold(String::new(), |mut out, x| {
        let _ = writeln!(out, "{}", fmt_f64(*x));
        out
    })
}

pub fn json_text<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// Named outputs of one command.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Writes every file through a temporary in `dir` and renames it into
    /// place; with no directory, prints the first file to stdout.
    pub fn commit(self, dir: Option<&Path>) -> Result<Vec<PathBuf>> {
        let Some(dir) = dir else {
            if let Some((_, contents)) = self.files.first() {
                std::io::stdout().write_all(contents.as_bytes())?;
            }
            return Ok(Vec::new());
        };
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let mut tmp = NamedTempFile::new_in(dir)?;
            tmp.write_all(contents.as_bytes())?;
            tmp.as_file().sync_all()?;
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            tmp.persist(&path).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_and_vector_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("x.csv");
        fs::write(&m, "1, 2\n3,4.5\n").unwrap();
        let x = read_matrix(&m).unwrap();
        assert_eq!(x, ndarray::array![[1.0, 2.0], [3.0, 4.5]]);
        fs::write(&m, "1,2\n3\n").unwrap();
        assert!(read_matrix(&m).is_err());

        let v = dir.path().join("y.txt");
        fs::write(&v, vector_text(&[0.1, -2.0, 1e-300])).unwrap();
        assert_eq!(read_vector(&v).unwrap(), vec![0.1, -2.0, 1e-300]);
    }

    #[test]
    fn commit_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::default();
        out.add("a.txt", "a".into());
        out.add("b.txt", "b".into());
        let written = out.commit(Some(dir.path())).unwrap();
        assert_eq!(written.len(), 2);
        assert_eq!(fs::read_to_string(dir.path().join("b.txt")).unwrap(), "b");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
