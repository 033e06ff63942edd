//! Output files and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliResult;

/// One CSV cell.
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64.
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Text(String::new()), Cell::Num)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Record of one invocation, written as `manifest.json` next to the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub stages: Vec<StageTiming>,
    pub files: Vec<FileDigest>,
}

/// Directory receiving a command's files, tracking what was written.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
    stages: Vec<StageTiming>,
    stage_start: Instant,
}

impl Output {
    pub fn create(dir: PathBuf) -> CliResult<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, files: Vec::new(), stages: Vec::new(), stage_start: Instant::now() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Closes the current stage under `name`.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(StageTiming { stage: name.into(), seconds: (now - self.stage_start).as_secs_f64() });
        self.stage_start = now;
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<Cell>>) -> CliResult<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(self.dir.join(name), text)?;
        self.files.push(name.into());
        Ok(())
    }

    /// Digests every written file and writes `manifest.json`.
    pub fn finish(self, command: &str, config: &ExperimentConfig) -> CliResult<RunManifest> {
        let mut files = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let bytes = std::fs::read(self.dir.join(name))?;
            files.push(FileDigest {
                path: name.clone(),
                sha256: hex::encode(Sha256::digest(&bytes)),
                bytes: bytes.len() as u64,
            });
        }
        let manifest = RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            config: config.clone(),
            stages: self.stages,
            files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(manifest)
    }
}

/// Digests listed in a manifest, for comparing runs.
pub fn read_digests(dir: &Path) -> CliResult<Vec<(String, String)>> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    Ok(value["files"]
        .as_array()
        .map(|files| {
            files
                .iter()
                .map(|f| {
                    (
                        f["path"].as_str().unwrap_or_default().to_string(),
                        f["sha256"].as_str().unwrap_or_default().to_string(),
                    )
                })
                .collect()
        })
        .unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_significant_digits() {
        assert_eq!(Cell::Num(0.1).render(), "1.0000000000000001e-1");
        let back: f64 = Cell::Num(std::f64::consts::PI).render().parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn manifest_lists_digests_of_written_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Output::create(dir.path().to_path_buf()).unwrap();
        out.csv("a.csv", &["x"], vec![vec![1.5.into()]]).unwrap();
        let manifest = out.finish("test", &ExperimentConfig::default()).unwrap();
        assert_eq!(manifest.files.len(), 1);
        let digests = read_digests(dir.path()).unwrap();
        assert_eq!(digests[0].0, "a.csv");
        assert_eq!(digests[0].1.len(), 64);
    }
}
