//! Coordinates, great-circle distance, static geolocation and the region catalog.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// The bundled catalog of candidate regions.
pub const DEFAULT_CATALOG: &str = include_str!("../data/regions.default");

/// A position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coordinate {
    pub lat: f64,
    pub lon: f64,
}

impl Coordinate {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let c = Coordinate { lat, lon };
        if c.is_valid() {
            Ok(c)
        } else {
            Err(Error::InvalidCoordinate { lat, lon })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Great-circle distance between two coordinates on a sphere of radius
/// [`EARTH_RADIUS_KM`].
///
/// Longitudes enter only through `sin²(Δλ/2)`, so the ±180° seam needs no
/// special casing.
pub fn haversine_km(a: Coordinate, b: Coordinate) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();

    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Extracts the host part of a hostname or URL (`http://host:80/x` -> `host`).
pub fn host_of(endpoint: &str) -> String {
    let endpoint = endpoint.trim();
    let parsed = if endpoint.contains("://") {
        url::Url::parse(endpoint)
    } else {
        url::Url::parse(&format!("http://{endpoint}"))
    };
    match parsed.ok().and_then(|u| u.host_str().map(str::to_owned)) {
        Some(host) => host.trim_matches(|c| c == '[' || c == ']').to_owned(),
        None => endpoint.to_owned(),
    }
}

/// Static hostname -> coordinate table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationTable {
    entries: BTreeMap<String, Coordinate>,
}

impl LocationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(document: &str) -> Result<Self> {
        let table: LocationTable = serde_json::from_str(document).map_err(Error::from_json)?;
        for (host, c) in &table.entries {
            if host.is_empty() {
                return Err(Error::Config("empty hostname in location table".into()));
            }
            Coordinate::new(c.lat, c.lon)?;
        }
        Ok(table)
    }

    /// Inserts under the bare host of `endpoint`. Empty hostnames are ignored.
    pub fn insert(&mut self, endpoint: &str, at: Coordinate) {
        let host = host_of(endpoint);
        if !host.is_empty() {
            self.entries.insert(host, at);
        }
    }

    pub fn get(&self, endpoint: &str) -> Option<Coordinate> {
        self.entries
            .get(endpoint)
            .or_else(|| self.entries.get(&host_of(endpoint)))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Copies every entry of `other` that is not already present.
    pub fn merge_missing(&mut self, other: &LocationTable) {
        for (host, c) in &other.entries {
            self.entries.entry(host.clone()).or_insert(*c);
        }
    }
}

pub fn resolve_location(
    endpoint: &str,
    table: &LocationTable,
    fallback: Option<Coordinate>,
) -> Result<Coordinate> {
    table
        .get(endpoint)
        .or(fallback)
        .ok_or_else(|| Error::UnknownLocation(endpoint.to_owned()))
}

/// A candidate orchestrator location.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: String,
    pub probe_host: String,
    pub location: Coordinate,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionRecord {
    id: String,
    probe_host: String,
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDocument {
    regions: Vec<RegionRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionCatalog {
    regions: Vec<Region>,
}

impl RegionCatalog {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        let mut seen = HashSet::new();
        for r in &regions {
            if r.id.is_empty() || r.probe_host.is_empty() {
                return Err(Error::Config(
                    "region id and probe_host must be non-empty".into(),
                ));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateRegion(r.id.clone()));
            }
            Coordinate::new(r.location.lat, r.location.lon)?;
        }
        Ok(RegionCatalog { regions })
    }

    pub fn load(document: &str) -> Result<Self> {
        let doc: CatalogDocument = serde_json::from_str(document).map_err(Error::from_json)?;
        Self::new(
            doc.regions
                .into_iter()
                .map(|r| Region {
                    id: r.id,
                    probe_host: r.probe_host,
                    location: Coordinate {
                        lat: r.lat,
                        lon: r.lon,
                    },
                })
                .collect(),
        )
    }

    pub fn bundled() -> Self {
        Self::load(DEFAULT_CATALOG).expect("bundled region catalog is valid")
    }

    pub fn render(&self) -> String {
        let doc = CatalogDocument {
            regions: self
                .regions
                .iter()
                .map(|r| RegionRecord {
                    id: r.id.clone(),
                    probe_host: r.probe_host.clone(),
                    lat: r.location.lat,
                    lon: r.location.lon,
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("catalog serializes");
        out.push('\n');
        out
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn get(&self, id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }
}
