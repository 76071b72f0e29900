//! Layered configuration: flags, then `CLOUDFORECAST_*` environment
//! variables (handled by clap), then the config file, then defaults.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use cloudforecast_core::geo::Coordinate;
use cloudforecast_core::measurement::{ProbeConfig, SyntheticNetworkModel};
use cloudforecast_core::scoring::ScoringConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    /// Deterministic latency model over great-circle distance
    #[default]
    Synthetic,
    /// Probe every leg's destination from this machine
    Local,
    /// Ask a probe agent in each region to probe the workflow nodes
    Agent,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalVantage {
    #[serde(default = "default_local_id")]
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

fn default_local_id() -> String {
    "local".into()
}

impl Default for LocalVantage {
    /// St Andrews, Scotland.
    fn default() -> Self {
        LocalVantage {
            id: default_local_id(),
            lat: 56.3398,
            lon: -2.7967,
        }
    }
}

impl LocalVantage {
    pub fn coordinate(&self) -> Result<Coordinate> {
        Ok(Coordinate::new(self.lat, self.lon)?)
    }
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub probe_mode: Option<ProbeMode>,
    pub regions: Option<PathBuf>,
    pub locations: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub ttl_s: Option<u64>,
    pub seed: Option<u64>,
    pub agent_port: Option<u16>,
    /// probe_host or region id -> agent base URL
    pub agents: HashMap<String, String>,
    pub local: Option<LocalVantage>,
    pub scoring: Option<ScoringConfig>,
    pub probe: Option<ProbeConfig>,
    pub model: Option<SyntheticNetworkModel>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| cloudforecast_core::Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }
}
