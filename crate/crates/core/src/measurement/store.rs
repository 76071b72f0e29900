use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{now_ms, Measurement, MeasurementProvider};
use crate::candidate::Metric;
use crate::error::{Error, Result};

type Key = (String, String, Metric);
type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

#[derive(Serialize, Deserialize)]
struct Record {
    stored_at: u64,
    measurement: Measurement,
}

/// TTL cache of measurements keyed by `(src, dst, metric)`.
///
/// Symmetric metrics are stored under the lexicographically ordered pair.
/// Concurrent callers may race on the same key; both probe and the last
/// write wins.
pub struct MeasurementStore {
    entries: Mutex<HashMap<Key, Record>>,
    ttl_ms: u64,
    clock: Clock,
}

impl fmt::Debug for MeasurementStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeasurementStore")
            .field("len", &self.len())
            .field("ttl_ms", &self.ttl_ms)
            .finish()
    }
}

impl MeasurementStore {
    pub fn new(ttl_s: u64) -> Self {
        Self::with_clock(ttl_s, Arc::new(now_ms))
    }

    /// `clock` returns the current time in milliseconds.
    pub fn with_clock(ttl_s: u64, clock: Clock) -> Self {
        MeasurementStore {
            entries: Mutex::new(HashMap::new()),
            ttl_ms: ttl_s.max(1).saturating_mul(1000),
            clock,
        }
    }

    fn key(src: &str, dst: &str, metric: Metric, symmetric: bool) -> Key {
        if symmetric && dst < src {
            (dst.to_owned(), src.to_owned(), metric)
        } else {
            (src.to_owned(), dst.to_owned(), metric)
        }
    }

    fn live(&self, rec: &Record) -> bool {
        (self.clock)().saturating_sub(rec.stored_at) < self.ttl_ms
    }

    /// Unexpired entry for the pair, oriented as requested.
    pub fn get(
        &self,
        src: &str,
        dst: &str,
        metric: Metric,
        symmetric: bool,
    ) -> Option<Measurement> {
        let key = Self::key(src, dst, metric, symmetric);
        let entries = self.entries.lock().unwrap();
        let rec = entries.get(&key).filter(|r| self.live(r))?;
        Some(Measurement {
            src: src.to_owned(),
            dst: dst.to_owned(),
            ..rec.measurement.clone()
        })
    }

    pub fn insert(&self, mut m: Measurement, symmetric: bool) {
        let key = Self::key(&m.src, &m.dst, m.metric, symmetric);
        // stored orientation matches the key so a reloaded file keys identically
        m.src.clone_from(&key.0);
        m.dst.clone_from(&key.1);
        let rec = Record {
            stored_at: (self.clock)(),
            measurement: m,
        };
        self.entries.lock().unwrap().insert(key, rec);
    }

    /// Cached value if live, otherwise asks `provider` and caches the answer.
    pub fn get_or_measure(
        &self,
        src: &str,
        dst: &str,
        metric: Metric,
        provider: &dyn MeasurementProvider,
    ) -> Result<Measurement> {
        let symmetric = provider.is_symmetric(metric);
        if let Some(m) = self.get(src, dst, metric, symmetric) {
            return Ok(m);
        }
        let m = provider.measure(src, dst, metric)?;
        self.insert(m.clone(), symmetric);
        Ok(m)
    }

    /// Measures every pair, at most `parallel` provider calls in flight.
    pub fn populate(
        &self,
        pairs: &[(String, String)],
        metric: Metric,
        provider: &dyn MeasurementProvider,
        parallel: usize,
    ) -> Result<()> {
        let parallel = parallel.max(1);
        if parallel == 1 || pairs.len() <= 1 {
            for (s, d) in pairs {
                self.get_or_measure(s, d, metric, provider)?;
            }
            return Ok(());
        }
        let next = std::sync::atomic::AtomicUsize::new(0);
        std::thread::scope(|scope| {
            let workers: Vec<_> = (0..parallel.min(pairs.len()))
                .map(|_| {
                    scope.spawn(|| -> Result<()> {
                        loop {
                            let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                            let Some((s, d)) = pairs.get(i) else {
                                return Ok(());
                            };
                            self.get_or_measure(s, d, metric, provider)?;
                        }
                    })
                })
                .collect();
            workers
                .into_iter()
                .try_for_each(|w| w.join().expect("probe worker panicked"))
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Loads a cache file written by [`save`](Self::save). A missing file
    /// yields an empty store.
    pub fn load(path: &Path, ttl_s: u64) -> Result<Self> {
        let store = Self::new(ttl_s);
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(store),
            Err(e) => return Err(e.into()),
        };
        {
            let mut entries = store.entries.lock().unwrap();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: Record = serde_json::from_str(line).map_err(|e| Error::Syntax {
                    line: i + 1,
                    column: e.column(),
                    message: e.to_string(),
                })?;
                let m = &rec.measurement;
                let key = (m.src.clone(), m.dst.clone(), m.metric);
                entries.insert(key, rec);
            }
        }
        Ok(store)
    }

    /// Writes one JSON record per key, replacing the file atomically.
    pub fn save(&self, path: &Path) -> Result<()> {
        let entries = self.entries.lock().unwrap();
        let mut keys: Vec<&Key> = entries.keys().collect();
        keys.sort();
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
            for k in keys {
                let rec = &entries[k];
                if !self.live(rec) {
                    continue;
                }
                serde_json::to_writer(&mut f, rec).map_err(std::io::Error::from)?;
                f.write_all(b"\n")?;
            }
            f.flush()?;
        }
        fs::rename(tmp, path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

    struct Counting {
        calls: AtomicUsize,
        symmetric: bool,
    }

    impl Counting {
        fn new(symmetric: bool) -> Self {
            Counting {
                calls: AtomicUsize::new(0),
                symmetric,
            }
        }
        fn calls(&self) -> usize {
            self.calls.load(Ordering::SeqCst)
        }
    }

    impl MeasurementProvider for Counting {
        fn measure(&self, src: &str, dst: &str, metric: Metric) -> Result<Measurement> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(Measurement::ok(src, dst, metric, n as f64 + 1.0, 1))
        }
        fn is_symmetric(&self, _metric: Metric) -> bool {
            self.symmetric
        }
        fn describe(&self, _metric: Metric) -> String {
            "counting".into()
        }
    }

    fn manual_clock() -> (Arc<AtomicU64>, Clock) {
        let t = Arc::new(AtomicU64::new(1_000));
        let c = t.clone();
        (t, Arc::new(move || c.load(Ordering::SeqCst)))
    }

    #[test]
    fn hit_within_ttl() {
        let (_, clock) = manual_clock();
        let store = MeasurementStore::with_clock(60, clock);
        let p = Counting::new(true);
        store.get_or_measure("a", "b", Metric::Ping, &p).unwrap();
        store.get_or_measure("a", "b", Metric::Ping, &p).unwrap();
        assert_eq!(p.calls(), 1);
    }

    #[test]
    fn expired_entry_is_remeasured() {
        let (t, clock) = manual_clock();
        let store = MeasurementStore::with_clock(60, clock);
        let p = Counting::new(true);
        store.get_or_measure("a", "b", Metric::Ping, &p).unwrap();
        t.fetch_add(60_000, Ordering::SeqCst);
        assert!(store.get("a", "b", Metric::Ping, true).is_none());
        let m = store.get_or_measure("a", "b", Metric::Ping, &p).unwrap();
        assert_eq!(p.calls(), 2);
        assert_eq!(m.value, 2.0);
    }

    #[test]
    fn symmetric_canonicalization() {
        let store = MeasurementStore::new(60);
        let p = Counting::new(true);
        store.get_or_measure("a", "b", Metric::Ping, &p).unwrap();
        let m = store.get_or_measure("b", "a", Metric::Ping, &p).unwrap();
        assert_eq!(p.calls(), 1);
        assert_eq!((m.src.as_str(), m.dst.as_str()), ("b", "a"));

        let directed = Counting::new(false);
        store
            .get_or_measure("c", "d", Metric::HttpRtt, &directed)
            .unwrap();
        store
            .get_or_measure("d", "c", Metric::HttpRtt, &directed)
            .unwrap();
        assert_eq!(directed.calls(), 2);
    }

    #[test]
    fn distinct_metrics_are_distinct_keys() {
        let store = MeasurementStore::new(60);
        let p = Counting::new(true);
        store.get_or_measure("a", "b", Metric::Ping, &p).unwrap();
        store.get_or_measure("a", "b", Metric::HttpRtt, &p).unwrap();
        assert_eq!(p.calls(), 2);
    }

    #[test]
    fn parallel_populate_probes_each_pair() {
        let store = MeasurementStore::new(60);
        let p = Counting::new(true);
        let pairs: Vec<_> = (0..20)
            .map(|i| (format!("s{i}"), "hub".to_string()))
            .collect();
        store.populate(&pairs, Metric::Ping, &p, 4).unwrap();
        assert_eq!(store.len(), 20);
        assert_eq!(p.calls(), 20);
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let store = MeasurementStore::new(3600);
        store.insert(Measurement::ok("b", "a", Metric::Ping, 12.5, 5), true);
        store.insert(Measurement::failed("x", "y", Metric::HttpRtt, 5), false);
        store.save(&path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 2);

        let loaded = MeasurementStore::load(&path, 3600).unwrap();
        assert_eq!(
            loaded.get("a", "b", Metric::Ping, true).unwrap().value,
            12.5
        );
        assert!(
            !loaded
                .get("x", "y", Metric::HttpRtt, false)
                .unwrap()
                .success
        );
        assert!(MeasurementStore::load(&dir.path().join("missing"), 10)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn cache_law_property() {
        use proptest::prelude::*;
        proptest!(|(calls in proptest::collection::vec((0u8..4, 0u8..4, 0usize..3), 1..60))| {
            let store = MeasurementStore::new(3600);
            let p = Counting::new(true);
            let mut keys = std::collections::HashSet::new();
            for (a, b, m) in calls {
                let (a, b) = (a.to_string(), b.to_string());
                let metric = Metric::ALL[m];
                keys.insert((a.clone().min(b.clone()), a.clone().max(b.clone()), metric));
                store.get_or_measure(&a, &b, metric, &p).unwrap();
            }
            prop_assert!(p.calls() <= keys.len());
        });
    }
}
