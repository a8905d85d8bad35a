//! Writing run outputs: a JSON manifest, CSV series and edge-list graphs.
//!
//! Everything except `timing.json` is a function of the resolved config and
//! the seed, so repeated runs produce identical bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use trifree::Graph;

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a C,
    pub results: &'a R,
    pub files: &'a [String],
}

/// Collects files under one output directory and writes the manifest last.
pub struct Emitter {
    dir: PathBuf,
    files: Vec<String>,
}

impl Emitter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value).with_context(|| format!("writing {}", path.display()))?;
        writeln!(w)?;
        w.flush().with_context(|| format!("writing {}", path.display()))
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_writer(self.open(name)?);
        for r in rows {
            w.serialize(r).with_context(|| format!("writing {}", path.display()))?;
        }
        w.flush().with_context(|| format!("writing {}", path.display()))
    }

    pub fn graph(&mut self, name: &str, g: &Graph) -> Result<()> {
        let path = self.dir.join(name);
        let w = self.open(name)?;
        g.write_edge_list(w).with_context(|| format!("writing {}", path.display()))
    }

    pub fn manifest<C: Serialize, R: Serialize>(self, command: &str, seed: u64, config: &C, results: &R) -> Result<PathBuf> {
        let m = Manifest {
            tool: "trifree",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            results,
            files: &self.files,
        };
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&m)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Wall-clock time, kept out of the manifest so the manifest stays
    /// reproducible.
    pub fn timing(&self, seconds: f64) -> Result<()> {
        let path = self.dir.join(TIMING);
        let text = serde_json::to_string_pretty(&serde_json::json!({ "wall_time_s": seconds }))?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// Writes a manifest plus one CSV of records into `dir`.
pub fn emit_results<C: Serialize, T: Serialize>(
    dir: &Path,
    command: &str,
    seed: u64,
    config: &C,
    records: &[T],
) -> Result<PathBuf> {
    let mut e = Emitter::create(dir)?;
    e.csv("records.csv", records)?;
    e.manifest(command, seed, config, &serde_json::json!({ "records": records.len() }))
}
