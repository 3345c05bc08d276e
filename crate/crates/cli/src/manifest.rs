//! Per-run manifest written next to the outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ensemble_lab::experiments::SigmaWindow;
use ensemble_lab::model::load_model;
use ensemble_lab::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridInfo {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub r: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    /// SHA-256 of the canonical (re-serialized) model config.
    pub config_digest: String,
    pub config_path: String,
    pub tool_version: &'static str,
    pub started_at: String,
    pub grid: Option<GridInfo>,
    pub sigma_window: Option<SigmaWindow>,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

/// Hex SHA-256 of the model's canonical TOML form.
pub fn config_digest(path: &Path) -> Result<String> {
    let model = load_model::<f64>(path)?;
    Ok(format!(
        "{:x}",
        Sha256::digest(model.to_toml_string().as_bytes())
    ))
}

impl RunManifest {
    pub fn start(command: &'static str, config: &Path) -> Result<Self> {
        Ok(Self {
            command,
            config_digest: config_digest(config)?,
            config_path: config.display().to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            started_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            grid: None,
            sigma_window: None,
            seed: None,
            wall_time_s: 0.0,
            outputs: Vec::new(),
        })
    }

    pub fn with_grid(mut self, n: usize, r: f64) -> Self {
        self.grid = Some(GridInfo { n, r });
        self
    }

    pub fn with_window(mut self, w: SigmaWindow) -> Self {
        self.sigma_window = Some(w);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path, outputs: Vec<PathBuf>, clock: Instant) -> Result<()> {
        self.wall_time_s = clock.elapsed().as_secs_f64();
        self.outputs = outputs
            .iter()
            .map(|p| {
                p.file_name().map_or_else(
                    || p.display().to_string(),
                    |f| f.to_string_lossy().into_owned(),
                )
            })
            .collect();
        let text =
            serde_json::to_string_pretty(&self).map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}
