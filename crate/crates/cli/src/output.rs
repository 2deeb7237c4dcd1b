//! Output files: every artifact carries the crate version and the SHA-256
//! digest of the configuration it came from.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub artifact: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
}

pub struct Sink {
    pub dir: PathBuf,
    pub prefix: String,
    pub meta: Meta,
}

pub fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Sink {
    pub fn new(dir: PathBuf, prefix: String, config_text: &str, seed: u64) -> std::io::Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            prefix,
            meta: Meta {
                artifact: "nls-jitter",
                version: VERSION,
                config_sha256: digest(config_text),
                seed,
            },
        })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}", self.prefix))
    }

    pub fn header(&self) -> String {
        format!(
            "# {} {} config_sha256={} seed={}",
            self.meta.artifact, self.meta.version, self.meta.config_sha256, self.meta.seed
        )
    }

    pub fn create(&self, suffix: &str) -> std::io::Result<(PathBuf, BufWriter<File>)> {
        let p = self.path(suffix);
        Ok((p.clone(), BufWriter::new(File::create(p)?)))
    }

    /// CSV with the provenance header, extra comment lines, column header
    /// and rows.
    pub fn csv(&self, suffix: &str, comments: &[String], header: &str, rows: &[String]) -> std::io::Result<PathBuf> {
        let (p, mut w) = self.create(suffix)?;
        writeln!(w, "{}", self.header())?;
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{r}")?;
        }
        w.flush()?;
        Ok(p)
    }

    /// JSON object `{"meta": .., <key>: value}`.
    pub fn json<T: Serialize>(&self, suffix: &str, key: &str, value: &T) -> std::io::Result<(PathBuf, String)> {
        let mut obj = serde_json::Map::new();
        obj.insert("meta".into(), serde_json::to_value(&self.meta)?);
        obj.insert(key.into(), serde_json::to_value(value)?);
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(obj))?;
        let p = self.path(suffix);
        fs::write(&p, format!("{text}\n"))?;
        Ok((p, text))
    }

    /// Gnuplot script plotting columns of `data` (1-based) against column 1.
    pub fn gnuplot(
        &self,
        suffix: &str,
        data: &Path,
        title: &str,
        xlabel: &str,
        columns: &[(usize, &str)],
    ) -> std::io::Result<PathBuf> {
        let (p, mut w) = self.create(suffix)?;
        let file = data.file_name().and_then(|s| s.to_str()).unwrap_or("data.csv");
        writeln!(w, "{}", self.header())?;
        writeln!(w, "set datafile separator ','")?;
        writeln!(w, "set datafile commentschars '#'")?;
        writeln!(w, "set key autotitle columnhead")?;
        writeln!(w, "set title '{title}'")?;
        writeln!(w, "set xlabel '{xlabel}'")?;
        let plots: Vec<String> = columns
            .iter()
            .map(|(c, name)| format!("'{file}' using 1:{c} with linespoints title '{name}'"))
            .collect();
        writeln!(w, "plot {}", plots.join(", \\\n     "))?;
        w.flush()?;
        Ok(p)
    }
}
