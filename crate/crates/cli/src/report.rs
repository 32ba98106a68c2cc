use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use crate::CliResult;

/// Where reports go: text summary or JSON on stdout, files under `--out`.
#[derive(Debug, Clone)]
pub struct Output {
    dir: Option<PathBuf>,
    json: bool,
}

impl Output {
    pub fn new(dir: Option<PathBuf>, json: bool) -> Self {
        Self { dir, json }
    }

    fn path(&self, name: &str) -> CliResult<Option<PathBuf>> {
        match &self.dir {
            None => Ok(None),
            Some(d) => {
                fs::create_dir_all(d)?;
                Ok(Some(d.join(name)))
            }
        }
    }

    /// Writes the main report of a command and echoes it if `--json` was given.
    pub fn report<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        if let Some(p) = self.path(name)? {
            fs::write(p, &text)?;
        }
        if self.json {
            print!("{text}");
        }
        Ok(())
    }

    pub fn csv<I>(&self, name: &str, header: Vec<String>, rows: I) -> CliResult<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let Some(p) = self.path(name)? else {
            return Ok(());
        };
        let mut w = csv::WriterBuilder::new().flexible(true).from_path(p)?;
        w.write_record(&header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Text summary line; suppressed under `--json` so stdout stays parseable.
    pub fn line(&self, s: impl AsRef<str>) {
        if !self.json {
            println!("{}", s.as_ref());
        }
    }
}

pub fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn coords_header(prefix: &[&str], dim: usize) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain((0..dim).map(|k| format!("z{k}")))
        .collect()
}

pub fn num(v: f64) -> String {
    format!("{v}")
}
