//! Graph scores, the distance shortlist, final scores and the ranked report.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::candidate::{
    build_candidate_graph, measurement_pairs, sorted_metrics, CandidateGraph, Metric,
};
use crate::error::{Error, Result};
use crate::geo::RegionCatalog;
use crate::measurement::{Measurement, MeasurementProvider, MeasurementStore};
use crate::workflow::WorkflowSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphScore {
    pub region: String,
    pub metric: Metric,
    pub value: f64,
    pub failed_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    /// Regions kept after the distance stage; `None` keeps the whole catalog.
    pub shortlist_n: Option<usize>,
    pub weight_ping: f64,
    pub weight_http: f64,
    /// Added once per failed edge measurement.
    pub failure_penalty: f64,
    pub metrics: Vec<Metric>,
    pub max_parallel_probes: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            shortlist_n: None,
            weight_ping: 1.0,
            weight_http: 1.0,
            failure_penalty: 1.0e8,
            metrics: Metric::ALL.to_vec(),
            max_parallel_probes: 8,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        let weights_ok = [self.weight_ping, self.weight_http]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0);
        if !weights_ok || self.weight_ping + self.weight_http <= 0.0 {
            return Err(Error::Config(
                "weights must be non-negative with a positive sum".into(),
            ));
        }
        if !(self.failure_penalty.is_finite() && self.failure_penalty >= 0.0) {
            return Err(Error::Config("failure_penalty must be non-negative".into()));
        }
        if self.shortlist_n == Some(0) {
            return Err(Error::Config("shortlist_n must be positive".into()));
        }
        sorted_metrics(&self.metrics)?;
        Ok(())
    }
}

/// Sums edge weights; a failed measurement contributes `failure_penalty`.
pub fn score_graph(
    graph: &CandidateGraph,
    lookup: &dyn Fn(&str, &str) -> Option<Measurement>,
    failure_penalty: f64,
) -> Result<GraphScore> {
    let mut value = 0.0;
    let mut failed_edges = 0;
    for e in &graph.edges {
        let m = lookup(&e.src, &e.dst).ok_or_else(|| Error::MissingMeasurement {
            src: e.src.clone(),
            dst: e.dst.clone(),
            metric: graph.metric,
        })?;
        match m.value() {
            Some(v) => value += v,
            None => {
                value += failure_penalty;
                failed_edges += 1;
            }
        }
    }
    Ok(GraphScore {
        region: graph.region.id.clone(),
        metric: graph.metric,
        value,
        failed_edges,
    })
}

fn by_value_then_id(a: &GraphScore, b: &GraphScore) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then_with(|| a.region.cmp(&b.region))
}

/// The `n` regions with the smallest distance scores, and the rest, both
/// in ascending distance order (ties by region id).
pub fn shortlist_by_distance(
    distance_scores: &[GraphScore],
    n: usize,
) -> (Vec<String>, Vec<String>) {
    let mut sorted: Vec<&GraphScore> = distance_scores.iter().collect();
    sorted.sort_by(|a, b| by_value_then_id(a, b));
    let cut = n.min(sorted.len());
    let ids = |s: &[&GraphScore]| s.iter().map(|g| g.region.clone()).collect::<Vec<_>>();
    (ids(&sorted[..cut]), ids(&sorted[cut..]))
}

pub fn final_score(ping: &GraphScore, http: &GraphScore, config: &ScoringConfig) -> Result<f64> {
    if ping.region != http.region {
        return Err(Error::RegionMismatch(
            ping.region.clone(),
            http.region.clone(),
        ));
    }
    Ok(config.weight_ping * ping.value + config.weight_http * http.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub rank: usize,
    pub region: String,
    pub final_score: f64,
    pub shortlisted: bool,
    pub distance_score: Option<GraphScore>,
    pub ping_score: Option<GraphScore>,
    pub http_score: Option<GraphScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub metric: Metric,
    pub source: String,
    pub measurements: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub workflow: String,
    pub entries: Vec<RankingEntry>,
    pub config: ScoringConfig,
    pub provenance: Vec<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
}

impl RankingReport {
    pub fn best(&self) -> Option<&RankingEntry> {
        self.entries.first()
    }

    pub fn order(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.region.as_str()).collect()
    }

    pub fn from_json(document: &str) -> Result<Self> {
        serde_json::from_str(document).map_err(Error::from_json)
    }
}

/// Measures every region's candidate graph for `metric` and scores it.
#[allow(clippy::too_many_arguments)]
fn score_regions(
    spec: &WorkflowSpec,
    catalog: &RegionCatalog,
    region_ids: &[String],
    metric: Metric,
    store: &MeasurementStore,
    provider: &dyn MeasurementProvider,
    config: &ScoringConfig,
    provenance: &mut Vec<Provenance>,
) -> Result<Vec<GraphScore>> {
    let graphs: Vec<CandidateGraph> = region_ids
        .iter()
        .map(|id| build_candidate_graph(spec, catalog.get(id).expect("id from catalog"), metric))
        .collect();

    let mut pairs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for g in &graphs {
        for p in measurement_pairs(g) {
            if seen.insert(p.clone()) {
                pairs.push(p);
            }
        }
    }
    store.populate(&pairs, metric, provider, config.max_parallel_probes)?;

    let symmetric = provider.is_symmetric(metric);
    let lookup = |s: &str, d: &str| store.get(s, d, metric, symmetric);
    let failures = pairs
        .iter()
        .filter(|(s, d)| lookup(s, d).is_some_and(|m| !m.success))
        .count();
    provenance.push(Provenance {
        metric,
        source: provider.describe(metric),
        measurements: pairs.len(),
        failures,
    });
    graphs
        .iter()
        .map(|g| score_graph(g, &lookup, config.failure_penalty))
        .collect()
}

/// Distance stage over every region, then ping/HTTP stages over the
/// shortlist. Shortlisted regions are ranked by final score, the rest
/// follow by distance.
pub fn rank_regions(
    spec: &WorkflowSpec,
    catalog: &RegionCatalog,
    store: &MeasurementStore,
    providers: &dyn MeasurementProvider,
    config: &ScoringConfig,
) -> Result<RankingReport> {
    config.validate()?;
    let metrics = sorted_metrics(&config.metrics)?;
    let all_ids: Vec<String> = catalog.regions().iter().map(|r| r.id.clone()).collect();
    let mut provenance = Vec::new();

    let distance: Option<Vec<GraphScore>> = if metrics.contains(&Metric::Distance) {
        Some(score_regions(
            spec,
            catalog,
            &all_ids,
            Metric::Distance,
            store,
            providers,
            config,
            &mut provenance,
        )?)
    } else {
        None
    };
    let (shortlist, remainder) = match &distance {
        Some(scores) => shortlist_by_distance(scores, config.shortlist_n.unwrap_or(catalog.len())),
        None => (all_ids.clone(), Vec::new()),
    };

    let mut stage = |metric: Metric| -> Result<Option<Vec<GraphScore>>> {
        if !metrics.contains(&metric) {
            return Ok(None);
        }
        score_regions(
            spec,
            catalog,
            &shortlist,
            metric,
            store,
            providers,
            config,
            &mut provenance,
        )
        .map(Some)
    };
    let ping = stage(Metric::Ping)?;
    let http = stage(Metric::HttpRtt)?;

    let find = |scores: &Option<Vec<GraphScore>>, id: &str| {
        scores
            .as_ref()
            .and_then(|s| s.iter().find(|g| g.region == id).cloned())
    };

    let mut short_entries = Vec::with_capacity(shortlist.len());
    for id in &shortlist {
        let (p, h) = (find(&ping, id), find(&http, id));
        let d = find(&distance, id);
        let final_score = match (&p, &h) {
            (Some(p), Some(h)) => final_score(p, h, config)?,
            (Some(p), None) => config.weight_ping * p.value,
            (None, Some(h)) => config.weight_http * h.value,
            (None, None) => d.as_ref().map_or(0.0, |d| d.value),
        };
        short_entries.push(RankingEntry {
            rank: 0,
            region: id.clone(),
            final_score,
            shortlisted: true,
            distance_score: d,
            ping_score: p,
            http_score: h,
        });
    }
    short_entries.sort_by(|a, b| {
        a.final_score
            .total_cmp(&b.final_score)
            .then_with(|| a.region.cmp(&b.region))
    });

    // remainder is already in distance order
    let rest = remainder.iter().map(|id| {
        let d = find(&distance, id);
        RankingEntry {
            rank: 0,
            region: id.clone(),
            final_score: d.as_ref().map_or(0.0, |d| d.value),
            shortlisted: false,
            distance_score: d,
            ping_score: None,
            http_score: None,
        }
    });

    let mut entries: Vec<RankingEntry> = short_entries.into_iter().chain(rest).collect();
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }

    Ok(RankingReport {
        workflow: spec.name.clone(),
        entries,
        config: config.clone(),
        provenance,
        generated_at: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "table" => Ok(ReportFormat::Table),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

fn opt_value(s: &Option<GraphScore>) -> String {
    s.as_ref()
        .map(|g| format!("{:.3}", g.value))
        .unwrap_or_default()
}

fn opt_failed(s: &Option<GraphScore>) -> String {
    s.as_ref()
        .map(|g| g.failed_edges.to_string())
        .unwrap_or_default()
}

pub fn render_report(report: &RankingReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_string_pretty(report).expect("report serializes");
            out.push('\n');
            out
        }
        ReportFormat::Csv => {
            let mut out = String::from(
                "rank,region,final_score,shortlisted,distance_km,distance_failed,ping_ms,ping_failed,http_ms,http_failed\n",
            );
            for e in &report.entries {
                let _ = writeln!(
                    out,
                    "{},{},{:.3},{},{},{},{},{},{},{}",
                    e.rank,
                    e.region,
                    e.final_score,
                    e.shortlisted,
                    opt_value(&e.distance_score),
                    opt_failed(&e.distance_score),
                    opt_value(&e.ping_score),
                    opt_failed(&e.ping_score),
                    opt_value(&e.http_score),
                    opt_failed(&e.http_score),
                );
            }
            out
        }
        ReportFormat::Table => {
            let rows: Vec<[String; 4]> = report
                .entries
                .iter()
                .map(|e| {
                    [
                        e.rank.to_string(),
                        e.region.clone(),
                        format!("{:.3}", e.final_score),
                        if e.shortlisted { "yes" } else { "no" }.to_string(),
                    ]
                })
                .collect();
            let header = ["rank", "region", "final_score", "shortlisted"].map(String::from);
            let mut widths = header.clone().map(|h| h.len());
            for r in &rows {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.len());
                }
            }
            let line = |cells: &[String; 4]| {
                format!(
                    "{:>w0$}  {:<w1$}  {:>w2$}  {:<w3$}",
                    cells[0],
                    cells[1],
                    cells[2],
                    cells[3],
                    w0 = widths[0],
                    w1 = widths[1],
                    w2 = widths[2],
                    w3 = widths[3]
                )
                .trim_end()
                .to_owned()
            };
            let mut out = line(&header);
            out.push('\n');
            for r in &rows {
                out.push_str(&line(r));
                out.push('\n');
            }
            out
        }
    }
}
