//! A bare-bones orchestrator: simulated or live execution of a workflow
//! from one vantage point, and the speedup experiment built on it.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{resolve_location, Coordinate, LocationTable, RegionCatalog};
use crate::measurement::{
    collect_locations, MeasurementStore, ProbeConfig, ProviderSet, SyntheticNetworkModel,
};
use crate::scoring::{rank_regions, ScoringConfig};
use crate::workflow::{topological_order, WorkflowNode, WorkflowSpec};

/// Where the orchestrator runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vantage {
    pub id: String,
    pub location: Coordinate,
}

impl Vantage {
    pub fn new(id: impl Into<String>, location: Coordinate) -> Self {
        Vantage {
            id: id.into(),
            location,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Simulated,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub workflow: String,
    pub vantage: String,
    pub makespan_ms: f64,
    pub finish_ms: BTreeMap<String, f64>,
    pub transport: Transport,
}

fn node_location(node: &WorkflowNode, locations: &LocationTable) -> Result<Coordinate> {
    match node.location {
        Some(c) => Ok(c),
        None => resolve_location(&node.endpoint, locations, None),
    }
}

/// Orchestrator-mediated timing: every edge `u -> v` costs
/// `lat(u, vantage) + lat(vantage, v)` and a node starts once all of its
/// inputs have arrived. Transfers never contend with each other.
pub fn simulate_execution(
    spec: &WorkflowSpec,
    vantage: &Vantage,
    model: &SyntheticNetworkModel,
    locations: &LocationTable,
) -> Result<ExecutionResult> {
    let order = topological_order(spec)?;
    let mut to_vantage = HashMap::new();
    for n in &spec.nodes {
        let lat = model.latency_between(node_location(n, locations)?, vantage.location);
        to_vantage.insert(n.id.as_str(), lat);
    }
    let preds = spec.predecessors();

    let mut finish: BTreeMap<String, f64> = BTreeMap::new();
    for id in &order {
        let node = spec.node(id).expect("ordered ids exist");
        let ready = preds
            .get(id.as_str())
            .into_iter()
            .flatten()
            .map(|e| finish[&e.from] + to_vantage[e.from.as_str()] + to_vantage[id.as_str()])
            .fold(0.0, f64::max);
        finish.insert(id.clone(), ready + node.service_time_ms);
    }
    let makespan_ms = finish.values().copied().fold(0.0, f64::max);
    Ok(ExecutionResult {
        workflow: spec.name.clone(),
        vantage: vantage.id.clone(),
        makespan_ms,
        finish_ms: finish,
        transport: Transport::Simulated,
    })
}

/// Bytes a node is asked to produce: its largest outgoing payload.
fn output_bytes(spec: &WorkflowSpec, id: &str) -> u64 {
    spec.edges
        .iter()
        .filter(|e| e.from == id)
        .map(|e| (e.payload_kb * 1024.0).round() as u64)
        .max()
        .unwrap_or(0)
}

/// Runs the workflow against stub nodes, dispatching each node once all
/// of its inputs have come back through this process. At most
/// `max_parallel_probes` requests are in flight.
pub fn live_execute(
    spec: &WorkflowSpec,
    node_urls: &HashMap<String, String>,
    config: &ProbeConfig,
) -> Result<ExecutionResult> {
    config.validate()?;
    let order = topological_order(spec)?;
    let mut requests = HashMap::new();
    for id in &order {
        let base = node_urls.get(id).ok_or_else(|| Error::NodeUnreachable {
            node: id.clone(),
            reason: "no URL configured".into(),
        })?;
        let node = spec.node(id).expect("ordered ids exist");
        requests.insert(
            id.clone(),
            format!(
                "{}/work?delay_ms={}&bytes={}",
                base.trim_end_matches('/'),
                node.service_time_ms.round() as u64,
                output_bytes(spec, id)
            ),
        );
    }

    let per_request = Duration::from_millis(config.timeout_ms)
        + Duration::from_millis(
            spec.nodes
                .iter()
                .map(|n| n.service_time_ms as u64)
                .max()
                .unwrap_or(0),
        );
    let client = reqwest::blocking::Client::builder()
        .timeout(per_request)
        .build()
        .map_err(|e| Error::Http(e.to_string()))?;

    let mut waiting: HashMap<&str, usize> = order.iter().map(|id| (id.as_str(), 0)).collect();
    let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
    for e in &spec.edges {
        *waiting.get_mut(e.to.as_str()).unwrap() += 1;
        children
            .entry(e.from.as_str())
            .or_default()
            .push(e.to.as_str());
    }
    let mut ready: VecDeque<&str> = order
        .iter()
        .map(String::as_str)
        .filter(|id| waiting[id] == 0)
        .collect();

    let start = Instant::now();
    let mut finish = BTreeMap::new();
    let mut failure = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(&str, std::result::Result<usize, String>)>();
        let mut in_flight = 0usize;
        loop {
            while failure.is_none() && in_flight < config.max_parallel_probes {
                let Some(id) = ready.pop_front() else { break };
                let tx = tx.clone();
                let client = &client;
                let url = &requests[id];
                scope.spawn(move || {
                    let outcome = client
                        .get(url)
                        .send()
                        .and_then(|r| r.error_for_status())
                        .and_then(|r| r.bytes())
                        .map(|b| b.len())
                        .map_err(|e| e.to_string());
                    let _ = tx.send((id, outcome));
                });
                in_flight += 1;
            }
            if in_flight == 0 {
                break;
            }
            let (id, outcome) = rx.recv().expect("workers hold a sender");
            in_flight -= 1;
            match outcome {
                Ok(_payload) => {
                    finish.insert(id.to_owned(), start.elapsed().as_secs_f64() * 1e3);
                    for &c in children.get(id).into_iter().flatten() {
                        let w = waiting.get_mut(c).unwrap();
                        *w -= 1;
                        if *w == 0 {
                            ready.push_back(c);
                        }
                    }
                }
                Err(reason) => {
                    failure.get_or_insert(Error::NodeUnreachable {
                        node: id.to_owned(),
                        reason,
                    });
                }
            }
        }
    });
    if let Some(err) = failure {
        return Err(err);
    }

    Ok(ExecutionResult {
        workflow: spec.name.clone(),
        vantage: "local".into(),
        makespan_ms: finish.values().copied().fold(0.0, f64::max),
        finish_ms: finish,
        transport: Transport::Live,
    })
}

/// `(baseline / candidate - 1) * 100`.
pub fn speedup_percent(baseline_ms: f64, candidate_ms: f64) -> Result<f64> {
    for v in [baseline_ms, candidate_ms] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonPositive(v));
        }
    }
    Ok((baseline_ms / candidate_ms - 1.0) * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub workflow: String,
    pub baseline_ms: f64,
    pub best_region: String,
    pub best_ms: f64,
    pub speedup_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub mean_speedup_percent: f64,
}

impl ExperimentReport {
    pub fn from_rows(rows: Vec<ExperimentRow>) -> Self {
        let mean_speedup_percent = if rows.is_empty() {
            0.0
        } else {
            rows.iter().map(|r| r.speedup_pct).sum::<f64>() / rows.len() as f64
        };
        ExperimentReport {
            rows,
            mean_speedup_percent,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("workflow,baseline_ms,best_region,best_ms,speedup_pct\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.3},{},{:.3},{:.3}",
                r.workflow, r.baseline_ms, r.best_region, r.best_ms, r.speedup_pct
            );
        }
        out
    }

    /// Whitespace-separated `index label speedup_pct` rows for bar plots.
    pub fn to_chart_data(&self) -> String {
        let mut out = String::from("# index workflow speedup_pct\n");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(out, "{} {} {:.3}", i, r.workflow, r.speedup_pct);
        }
        out
    }

    pub fn summary(&self) -> String {
        let (lo, hi) = self
            .rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.speedup_pct), hi.max(r.speedup_pct))
            });
        format!(
            "workflows: {}\nspeedup range: {:.2}% to {:.2}%\nmean speedup: {:.2}%\n",
            self.rows.len(),
            lo,
            hi,
            self.mean_speedup_percent
        )
    }
}

/// Ranks regions for each workflow under the synthetic model, then
/// simulates it at `local` and at the rank-1 region.
pub fn run_experiment(
    specs: &[WorkflowSpec],
    catalog: &RegionCatalog,
    model: &SyntheticNetworkModel,
    local: &Vantage,
    config: &ScoringConfig,
    extra_locations: &LocationTable,
) -> Result<ExperimentReport> {
    model.validate()?;
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let locations = collect_locations(spec, catalog, extra_locations);
        let providers = ProviderSet::synthetic(*model, locations.clone());
        let store = MeasurementStore::new(u64::MAX / 1000);
        let report = rank_regions(spec, catalog, &store, &providers, config)?;
        let best = report.best().expect("catalog is non-empty");
        let region = catalog
            .get(&best.region)
            .expect("ranked ids come from the catalog");

        let baseline = simulate_execution(spec, local, model, &locations)?;
        let at_best = simulate_execution(
            spec,
            &Vantage::new(&region.id, region.location),
            model,
            &locations,
        )?;
        rows.push(ExperimentRow {
            workflow: spec.name.clone(),
            baseline_ms: baseline.makespan_ms,
            best_region: region.id.clone(),
            best_ms: at_best.makespan_ms,
            speedup_pct: speedup_percent(baseline.makespan_ms, at_best.makespan_ms)?,
        });
    }
    Ok(ExperimentReport::from_rows(rows))
}
