//! Edge weights per metric.
//!
//! A [`MeasurementProvider`] produces one [`Measurement`] for an ordered
//! endpoint pair. Providers come in four flavours: great-circle distance,
//! a deterministic synthetic latency model, live probes from the local
//! machine, and remote probe agents. [`MeasurementStore`] caches results
//! with a TTL and can persist them between runs.

mod agent;
mod probe;
mod store;
mod synthetic;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::candidate::Metric;
use crate::error::{Error, Result};
use crate::geo::{haversine_km, resolve_location, LocationTable, RegionCatalog};
use crate::workflow::WorkflowSpec;

pub use agent::{AgentProvider, AgentReply};
pub use probe::{
    echo_samples, http_samples, measure_http_rtt, measure_latency, EchoMethod, LocalProbeProvider,
};
pub use store::MeasurementStore;
pub use synthetic::{synthetic_measure, SyntheticNetworkModel, SyntheticProvider};

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// One observation for an ordered endpoint pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub src: String,
    pub dst: String,
    pub metric: Metric,
    /// Kilometres for distance, milliseconds otherwise. Meaningless when
    /// `success` is false.
    pub value: f64,
    pub samples: u32,
    pub success: bool,
    /// Unix epoch milliseconds.
    pub taken_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Measurement {
    pub fn ok(src: &str, dst: &str, metric: Metric, value: f64, samples: u32) -> Self {
        Measurement {
            src: src.to_owned(),
            dst: dst.to_owned(),
            metric,
            value,
            samples: samples.max(1),
            success: true,
            taken_at: now_ms(),
            note: None,
        }
    }

    pub fn failed(src: &str, dst: &str, metric: Metric, samples: u32) -> Self {
        Measurement {
            success: false,
            value: 0.0,
            ..Measurement::ok(src, dst, metric, 0.0, samples)
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// The value, if it can be trusted.
    pub fn value(&self) -> Option<f64> {
        self.success.then_some(self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Mean,
    Median,
    Min,
}

impl Aggregator {
    /// `None` for an empty sample set.
    pub fn apply(self, samples: &[f64]) -> Option<f64> {
        if samples.is_empty() {
            return None;
        }
        Some(match self {
            Aggregator::Mean => samples.iter().sum::<f64>() / samples.len() as f64,
            Aggregator::Min => samples.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregator::Median => {
                let mut s = samples.to_vec();
                s.sort_by(f64::total_cmp);
                let mid = s.len() / 2;
                if s.len().is_multiple_of(2) {
                    (s[mid - 1] + s[mid]) / 2.0
                } else {
                    s[mid]
                }
            }
        })
    }
}

impl std::str::FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Aggregator::Mean),
            "median" => Ok(Aggregator::Median),
            "min" => Ok(Aggregator::Min),
            other => Err(Error::Config(format!("unknown aggregator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub samples_per_pair: u32,
    pub timeout_ms: u64,
    pub aggregator: Aggregator,
    pub max_parallel_probes: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            samples_per_pair: 5,
            timeout_ms: 3000,
            aggregator: Aggregator::Mean,
            max_parallel_probes: 8,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_pair == 0 || self.timeout_ms == 0 || self.max_parallel_probes == 0 {
            return Err(Error::Config(
                "samples_per_pair, timeout_ms and max_parallel_probes must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Source of edge weights for ordered endpoint pairs.
pub trait MeasurementProvider: Send + Sync {
    fn measure(&self, src: &str, dst: &str, metric: Metric) -> Result<Measurement>;

    /// Whether `(a, b)` and `(b, a)` may share one cached measurement.
    fn is_symmetric(&self, _metric: Metric) -> bool {
        true
    }

    /// Short provenance label for reports.
    fn describe(&self, metric: Metric) -> String;
}

impl<P: MeasurementProvider + ?Sized> MeasurementProvider for Arc<P> {
    fn measure(&self, src: &str, dst: &str, metric: Metric) -> Result<Measurement> {
        (**self).measure(src, dst, metric)
    }

    fn is_symmetric(&self, metric: Metric) -> bool {
        (**self).is_symmetric(metric)
    }

    fn describe(&self, metric: Metric) -> String {
        (**self).describe(metric)
    }
}

/// Great-circle distance between resolved endpoint coordinates.
#[derive(Debug, Clone)]
pub struct DistanceProvider {
    pub locations: LocationTable,
}

impl DistanceProvider {
    pub fn new(locations: LocationTable) -> Self {
        DistanceProvider { locations }
    }
}

pub fn measure_distance(src: &str, dst: &str, locations: &LocationTable) -> Result<Measurement> {
    let a = resolve_location(src, locations, None)?;
    let b = resolve_location(dst, locations, None)?;
    Ok(Measurement::ok(
        src,
        dst,
        Metric::Distance,
        haversine_km(a, b),
        1,
    ))
}

impl MeasurementProvider for DistanceProvider {
    fn measure(&self, src: &str, dst: &str, metric: Metric) -> Result<Measurement> {
        match metric {
            Metric::Distance => measure_distance(src, dst, &self.locations),
            other => Err(Error::Config(format!(
                "distance provider cannot measure {other}"
            ))),
        }
    }

    fn describe(&self, _metric: Metric) -> String {
        "haversine".into()
    }
}

/// Routes each metric to its own provider.
pub struct ProviderSet {
    providers: HashMap<Metric, Arc<dyn MeasurementProvider>>,
}

impl ProviderSet {
    pub fn new(
        distance: Arc<dyn MeasurementProvider>,
        ping: Arc<dyn MeasurementProvider>,
        http: Arc<dyn MeasurementProvider>,
    ) -> Self {
        ProviderSet {
            providers: HashMap::from([
                (Metric::Distance, distance),
                (Metric::Ping, ping),
                (Metric::HttpRtt, http),
            ]),
        }
    }

    /// The same provider for every metric.
    pub fn uniform(provider: Arc<dyn MeasurementProvider>) -> Self {
        Self::new(provider.clone(), provider.clone(), provider)
    }

    pub fn synthetic(model: SyntheticNetworkModel, locations: LocationTable) -> Self {
        Self::uniform(Arc::new(SyntheticProvider::new(model, locations)))
    }

    fn get(&self, metric: Metric) -> &dyn MeasurementProvider {
        self.providers[&metric].as_ref()
    }
}

impl MeasurementProvider for ProviderSet {
    fn measure(&self, src: &str, dst: &str, metric: Metric) -> Result<Measurement> {
        self.get(metric).measure(src, dst, metric)
    }

    fn is_symmetric(&self, metric: Metric) -> bool {
        self.get(metric).is_symmetric(metric)
    }

    fn describe(&self, metric: Metric) -> String {
        self.get(metric).describe(metric)
    }
}

/// Fixed measurements, looked up by ordered pair and then by reversed pair.
/// Useful for replaying recorded probes.
#[derive(Debug, Clone, Default)]
pub struct RecordedProvider {
    entries: HashMap<(String, String, Metric), Measurement>,
}

impl RecordedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, m: Measurement) {
        self.entries
            .insert((m.src.clone(), m.dst.clone(), m.metric), m);
    }
}

impl FromIterator<Measurement> for RecordedProvider {
    fn from_iter<I: IntoIterator<Item = Measurement>>(iter: I) -> Self {
        let mut p = RecordedProvider::new();
        for m in iter {
            p.insert(m);
        }
        p
    }
}

impl MeasurementProvider for RecordedProvider {
    fn measure(&self, src: &str, dst: &str, metric: Metric) -> Result<Measurement> {
        let key = (src.to_owned(), dst.to_owned(), metric);
        let rev = (dst.to_owned(), src.to_owned(), metric);
        self.entries
            .get(&key)
            .or_else(|| self.entries.get(&rev))
            .map(|m| Measurement {
                src: src.to_owned(),
                dst: dst.to_owned(),
                ..m.clone()
            })
            .ok_or_else(|| Error::MissingMeasurement {
                src: src.to_owned(),
                dst: dst.to_owned(),
                metric,
            })
    }

    fn describe(&self, _metric: Metric) -> String {
        "recorded".into()
    }
}

/// Every coordinate known for a workflow and catalog: workflow node
/// locations (keyed by endpoint host), region probe hosts, then `extra`
/// for anything still missing.
pub fn collect_locations(
    spec: &WorkflowSpec,
    catalog: &RegionCatalog,
    extra: &LocationTable,
) -> LocationTable {
    let mut table = LocationTable::new();
    for n in &spec.nodes {
        if let Some(c) = n.location {
            table.insert(&n.endpoint, c);
        }
    }
    for r in catalog.regions() {
        table.insert(&r.probe_host, r.location);
    }
    table.merge_missing(extra);
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Coordinate;

    #[test]
    fn aggregator_examples() {
        assert_eq!(
            Aggregator::Mean.apply(&[1.0, 2.0, 3.0, 4.0, 5.0]),
            Some(3.0)
        );
        assert_eq!(Aggregator::Min.apply(&[30.0, 10.0, 20.0]), Some(10.0));
        assert_eq!(Aggregator::Median.apply(&[30.0, 10.0, 20.0]), Some(20.0));
        assert_eq!(Aggregator::Median.apply(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(Aggregator::Mean.apply(&[]), None);
    }

    #[test]
    fn distance_examples() {
        let mut t = LocationTable::new();
        t.insert("a", Coordinate { lat: 0.0, lon: 0.0 });
        t.insert(
            "b",
            Coordinate {
                lat: 0.0,
                lon: 180.0,
            },
        );
        t.insert("a2", Coordinate { lat: 0.0, lon: 0.0 });
        assert_eq!(measure_distance("a", "a2", &t).unwrap().value, 0.0);
        let m = measure_distance("a", "b", &t).unwrap();
        assert!((m.value - std::f64::consts::PI * 6371.0).abs() < 1e-9);
        assert!(m.success && m.samples == 1);
        assert!(matches!(
            measure_distance("a", "zzz", &t),
            Err(Error::UnknownLocation(_))
        ));
    }

    #[test]
    fn probe_config_validation() {
        assert!(ProbeConfig::default().validate().is_ok());
        let bad = ProbeConfig {
            samples_per_pair: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn recorded_provider_falls_back_to_reverse() {
        let p: RecordedProvider = [Measurement::ok("a", "b", Metric::Ping, 7.0, 1)]
            .into_iter()
            .collect();
        let m = p.measure("b", "a", Metric::Ping).unwrap();
        assert_eq!((m.src.as_str(), m.dst.as_str(), m.value), ("b", "a", 7.0));
        assert!(p.measure("a", "b", Metric::HttpRtt).is_err());
    }
}
