//! Client for probe agents running inside candidate regions.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Measurement, MeasurementProvider, ProbeConfig};
use crate::candidate::Metric;
use crate::error::{Error, Result};
use crate::geo::RegionCatalog;

/// Body returned by `/v1/ping` and `/v1/http`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReply {
    pub ok: bool,
    pub rtts_ms: Vec<f64>,
    pub failures: u32,
}

/// Asks the agent co-located with the region endpoint of each pair to
/// probe the other endpoint.
pub struct AgentProvider {
    /// probe_host -> agent base URL
    agents: HashMap<String, String>,
    config: ProbeConfig,
    client: reqwest::blocking::Client,
}

impl AgentProvider {
    pub fn new(agents: HashMap<String, String>, config: ProbeConfig) -> Result<Self> {
        // the agent needs the full probe budget plus time to answer
        let budget =
            Duration::from_millis(config.timeout_ms * u64::from(config.samples_per_pair) + 2000);
        let client = reqwest::blocking::Client::builder()
            .timeout(budget)
            .build()
            .map_err(|e| Error::Http(e.to_string()))?;
        Ok(AgentProvider {
            agents,
            config,
            client,
        })
    }

    /// One agent per region at `http://<probe_host>:<port>`, with explicit
    /// `overrides` (probe_host -> base URL) taking precedence.
    pub fn for_catalog(
        catalog: &RegionCatalog,
        port: u16,
        overrides: &HashMap<String, String>,
        config: ProbeConfig,
    ) -> Result<Self> {
        let agents = catalog
            .regions()
            .iter()
            .map(|r| {
                let url = overrides
                    .get(&r.probe_host)
                    .or_else(|| overrides.get(&r.id))
                    .cloned()
                    .unwrap_or_else(|| format!("http://{}:{port}", r.probe_host));
                (r.probe_host.clone(), url)
            })
            .collect();
        Self::new(agents, config)
    }

    fn query(&self, base: &str, metric: Metric, target: &str) -> Result<AgentReply> {
        let (path, key) = match metric {
            Metric::Ping => ("ping", "host"),
            Metric::HttpRtt => ("http", "url"),
            Metric::Distance => return Err(Error::Config("agents do not measure distance".into())),
        };
        let url = format!("{}/v1/{path}", base.trim_end_matches('/'));
        let samples = self.config.samples_per_pair.to_string();
        let timeout = self.config.timeout_ms.to_string();
        self.client
            .get(url)
            .query(&[
                (key, target),
                ("samples", &samples),
                ("timeout_ms", &timeout),
            ])
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json::<AgentReply>())
            .map_err(|e| Error::Http(e.to_string()))
    }
}

impl MeasurementProvider for AgentProvider {
    fn measure(&self, src: &str, dst: &str, metric: Metric) -> Result<Measurement> {
        let (base, target) = match (self.agents.get(src), self.agents.get(dst)) {
            (Some(b), _) => (b, dst),
            (None, Some(b)) => (b, src),
            (None, None) => {
                return Err(Error::Config(format!(
                    "no probe agent for either of {src}, {dst}"
                )));
            }
        };
        let failed = || Measurement::failed(src, dst, metric, self.config.samples_per_pair);
        let m = match self.query(base, metric, target) {
            Ok(reply) => match self.config.aggregator.apply(&reply.rtts_ms) {
                Some(v) if reply.ok => {
                    Measurement::ok(src, dst, metric, v, reply.rtts_ms.len() as u32)
                        .with_note(format!("agent {base} ({} failed)", reply.failures))
                }
                _ => failed().with_note(format!("agent {base}: no replies")),
            },
            Err(e) => failed().with_note(format!("agent {base} unreachable: {e}")),
        };
        Ok(m)
    }

    fn describe(&self, metric: Metric) -> String {
        format!("agent {metric} probe")
    }
}
