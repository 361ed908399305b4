use std::path::{Path, PathBuf};

use ridgemargin::experiments::write_csv;

use crate::config::{RunConfig, RunInfo};
use crate::CliError;

/// Names every file of one run as `<command>_<timestamp>_<seedhash>.*`.
pub struct RunOutput {
    dir: PathBuf,
    stem: String,
    command: &'static str,
    timestamp: String,
    written: Vec<String>,
}

/// Short stable tag for a seed (splitmix64 finalizer).
pub fn seed_hash(seed: u64) -> String {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    format!("{:08x}", (z ^ (z >> 31)) >> 32)
}

impl RunOutput {
    pub fn new(command: &'static str, cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg.output.dir.clone();
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        let timestamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
        let stem = format!("{command}_{timestamp}_{}", seed_hash(cfg.experiment.seed));
        Ok(Self {
            dir,
            stem,
            command,
            timestamp,
            written: Vec::new(),
        })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    fn record(&mut self, p: &Path) {
        let name = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        eprintln!("wrote {}", p.display());
        self.written.push(name);
    }

    pub fn csv(&mut self, cfg: &RunConfig, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        if !cfg.output.csv {
            return Ok(());
        }
        let p = self.path(".csv");
        write_csv(&p, header, rows)?;
        self.record(&p);
        Ok(())
    }

    pub fn dump(&mut self, cfg: &RunConfig, problem: &ridgemargin::ProblemSpec) -> Result<(), CliError> {
        if !cfg.output.dump {
            return Ok(());
        }
        let p = self.path("_dataset");
        let ds = ridgemargin::model::sample_dataset(problem, cfg.experiment.seed, 0);
        let spectrum_ref = serde_json::to_string(&cfg.problem.spectrum).map_err(ridgemargin::Error::from)?;
        ds.dump(&p, problem.law(), &spectrum_ref)?;
        self.record(&p);
        Ok(())
    }

    /// Writes the effective config plus run details; loadable as a config.
    pub fn manifest(mut self, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let p = self.path(".json");
        let mut echo = cfg.clone();
        echo.run = Some(RunInfo {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.experiment.seed,
            timestamp: std::mem::take(&mut self.timestamp),
            files: std::mem::take(&mut self.written),
        });
        let text = serde_json::to_string_pretty(&echo).map_err(ridgemargin::Error::from)?;
        std::fs::write(&p, text).map_err(ridgemargin::Error::from)?;
        eprintln!("wrote {}", p.display());
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_hash_is_stable_and_distinct() {
        assert_eq!(seed_hash(0), seed_hash(0));
        assert_ne!(seed_hash(0), seed_hash(1));
        assert_eq!(seed_hash(42).len(), 8);
    }
}
