use serde::{Deserialize, Serialize};

use super::{Measurement, MeasurementProvider};
use crate::candidate::Metric;
use crate::error::{Error, Result};
use crate::geo::{haversine_km, resolve_location, Coordinate, LocationTable};

/// Deterministic latency as an affine function of great-circle distance.
/// No jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticNetworkModel {
    pub base_latency_ms: f64,
    pub ms_per_100km: f64,
    pub http_overhead_ms: f64,
}

impl Default for SyntheticNetworkModel {
    fn default() -> Self {
        SyntheticNetworkModel {
            base_latency_ms: 5.0,
            ms_per_100km: 1.0,
            http_overhead_ms: 20.0,
        }
    }
}

impl SyntheticNetworkModel {
    /// A network where every transfer is free.
    pub fn zero() -> Self {
        SyntheticNetworkModel {
            base_latency_ms: 0.0,
            ms_per_100km: 0.0,
            http_overhead_ms: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.base_latency_ms,
            self.ms_per_100km,
            self.http_overhead_ms,
        ];
        if fields.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config(
                "synthetic model parameters must be non-negative".into(),
            ))
        }
    }

    pub fn ping_ms(&self, km: f64) -> f64 {
        self.base_latency_ms + self.ms_per_100km * (km / 100.0)
    }

    pub fn http_ms(&self, km: f64) -> f64 {
        self.ping_ms(km) + self.http_overhead_ms
    }

    pub fn latency_between(&self, a: Coordinate, b: Coordinate) -> f64 {
        self.ping_ms(haversine_km(a, b))
    }
}

pub fn synthetic_measure(
    src: &str,
    dst: &str,
    metric: Metric,
    model: &SyntheticNetworkModel,
    locations: &LocationTable,
) -> Result<Measurement> {
    let km = haversine_km(
        resolve_location(src, locations, None)?,
        resolve_location(dst, locations, None)?,
    );
    let value = match metric {
        Metric::Distance => km,
        Metric::Ping => model.ping_ms(km),
        Metric::HttpRtt => model.http_ms(km),
    };
    Ok(Measurement::ok(src, dst, metric, value, 1).with_note("synthetic"))
}

#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    pub model: SyntheticNetworkModel,
    pub locations: LocationTable,
}

impl SyntheticProvider {
    pub fn new(model: SyntheticNetworkModel, locations: LocationTable) -> Self {
        SyntheticProvider { model, locations }
    }
}

impl MeasurementProvider for SyntheticProvider {
    fn measure(&self, src: &str, dst: &str, metric: Metric) -> Result<Measurement> {
        synthetic_measure(src, dst, metric, &self.model, &self.locations)
    }

    fn describe(&self, metric: Metric) -> String {
        match metric {
            Metric::Distance => "haversine".into(),
            _ => format!(
                "synthetic(base={}ms, slope={}ms/100km, http=+{}ms)",
                self.model.base_latency_ms, self.model.ms_per_100km, self.model.http_overhead_ms
            ),
        }
    }
}
