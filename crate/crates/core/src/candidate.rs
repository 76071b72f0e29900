//! Candidate graphs: every workflow data flow routed through one region.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Region, RegionCatalog};
use crate::workflow::{WorkflowEdge, WorkflowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Distance,
    Ping,
    HttpRtt,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Distance, Metric::Ping, Metric::HttpRtt];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Distance => "distance",
            Metric::Ping => "ping",
            Metric::HttpRtt => "http_rtt",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Metric::Distance => "km",
            Metric::Ping | Metric::HttpRtt => "ms",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "distance" => Ok(Metric::Distance),
            "ping" | "latency" => Ok(Metric::Ping),
            "http_rtt" | "http" => Ok(Metric::HttpRtt),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Leg {
    ToOrchestrator,
    FromOrchestrator,
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Leg::ToOrchestrator => "to_orchestrator",
            Leg::FromOrchestrator => "from_orchestrator",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEdge {
    pub src: String,
    pub dst: String,
    pub origin_edge: WorkflowEdge,
    pub leg: Leg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGraph {
    pub region: Region,
    pub metric: Metric,
    pub edges: Vec<CandidateEdge>,
}

impl CandidateGraph {
    /// Identity of the orchestrator endpoint in this graph.
    pub fn orchestrator(&self) -> &str {
        &self.region.probe_host
    }

    /// One `src -> dst [leg, from->to]` line per edge.
    pub fn dump(&self) -> String {
        let mut out = format!("# region={} metric={}\n", self.region.id, self.metric);
        for e in &self.edges {
            out.push_str(&format!(
                "{} -> {} [{}, {}->{}]\n",
                e.src, e.dst, e.leg, e.origin_edge.from, e.origin_edge.to
            ));
        }
        out
    }
}

/// Splits each workflow edge `u -> v` into `u -> region` and `region -> v`.
pub fn build_candidate_graph(
    spec: &WorkflowSpec,
    region: &Region,
    metric: Metric,
) -> CandidateGraph {
    let endpoint = |id: &str| {
        spec.node(id)
            .map(|n| n.endpoint.clone())
            .unwrap_or_else(|| id.to_owned())
    };
    let hub = region.probe_host.clone();
    let edges = spec
        .edges
        .iter()
        .flat_map(|e| {
            [
                CandidateEdge {
                    src: endpoint(&e.from),
                    dst: hub.clone(),
                    origin_edge: e.clone(),
                    leg: Leg::ToOrchestrator,
                },
                CandidateEdge {
                    src: hub.clone(),
                    dst: endpoint(&e.to),
                    origin_edge: e.clone(),
                    leg: Leg::FromOrchestrator,
                },
            ]
        })
        .collect();
    CandidateGraph {
        region: region.clone(),
        metric,
        edges,
    }
}

/// Cross product of catalog regions and metrics, regions outermost and
/// metrics in `distance < ping < http_rtt` order.
pub fn enumerate_candidates(
    spec: &WorkflowSpec,
    catalog: &RegionCatalog,
    metrics: &[Metric],
) -> Result<Vec<CandidateGraph>> {
    let metrics = sorted_metrics(metrics)?;
    Ok(catalog
        .regions()
        .iter()
        .flat_map(|r| {
            metrics
                .iter()
                .map(move |m| build_candidate_graph(spec, r, *m))
        })
        .collect())
}

/// Validates a metric list (non-empty, no repeats) and sorts it.
pub fn sorted_metrics(metrics: &[Metric]) -> Result<Vec<Metric>> {
    if metrics.is_empty() {
        return Err(Error::NoMetrics);
    }
    let mut seen = HashSet::new();
    for m in metrics {
        if !seen.insert(*m) {
            return Err(Error::DuplicateMetric(*m));
        }
    }
    let mut out = metrics.to_vec();
    out.sort();
    Ok(out)
}

/// Distinct ordered `(src, dst)` pairs in first-appearance order.
pub fn measurement_pairs(graph: &CandidateGraph) -> Vec<(String, String)> {
    let mut seen = HashSet::new();
    graph
        .edges
        .iter()
        .filter(|e| seen.insert((e.src.as_str(), e.dst.as_str())))
        .map(|e| (e.src.clone(), e.dst.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Coordinate;
    use crate::workflow::{
        generate_random_workflow, parse_workflow, Role, WorkflowNode, WorkflowPattern,
    };
    use proptest::prelude::*;

    fn pipeline() -> WorkflowSpec {
        parse_workflow(include_str!("../data/image-pipeline.workflow")).unwrap()
    }

    fn region(id: &str) -> Region {
        Region {
            id: id.into(),
            probe_host: format!("{id}.probe"),
            location: Coordinate { lat: 0.0, lon: 0.0 },
        }
    }

    #[test]
    fn pipeline_star_around_region() {
        let g = build_candidate_graph(&pipeline(), &region("us-east-1"), Metric::Ping);
        let pairs: Vec<_> = g
            .edges
            .iter()
            .map(|e| (e.src.as_str(), e.dst.as_str(), e.leg))
            .collect();
        assert_eq!(
            pairs,
            [
                (
                    "upload.wikimedia.org",
                    "us-east-1.probe",
                    Leg::ToOrchestrator
                ),
                (
                    "us-east-1.probe",
                    "planetlab1.cs.princeton.edu",
                    Leg::FromOrchestrator
                ),
                (
                    "planetlab1.cs.princeton.edu",
                    "us-east-1.probe",
                    Leg::ToOrchestrator
                ),
                (
                    "us-east-1.probe",
                    "planetlab1.surrey.sfu.ca",
                    Leg::FromOrchestrator
                ),
            ]
        );
        assert_eq!(measurement_pairs(&g).len(), 4);
        assert!(g.dump().contains(
            "upload.wikimedia.org -> us-east-1.probe [to_orchestrator, wikimedia->princeton]"
        ));
    }

    #[test]
    fn single_node_has_no_edges() {
        let spec = WorkflowSpec::new(
            "one",
            vec![WorkflowNode::new("a", "a", Role::Source)],
            vec![],
        )
        .unwrap();
        let g = build_candidate_graph(&spec, &region("r"), Metric::Distance);
        assert!(g.edges.is_empty());
        assert!(measurement_pairs(&g).is_empty());
    }

    #[test]
    fn fan_out_expansion_matches_rule() {
        let pool: Vec<_> = (0..3)
            .map(|i| WorkflowNode::new(format!("n{i}"), format!("h{i}"), Role::Service))
            .collect();
        let spec = generate_random_workflow(WorkflowPattern::FanOut, 3, &pool, 0).unwrap();
        let r = region("r");
        let g = build_candidate_graph(&spec, &r, Metric::HttpRtt);
        // expected: for each workflow edge, (from -> R), (R -> to)
        let endpoint = |id: &str| spec.node(id).unwrap().endpoint.clone();
        let expected: Vec<(String, String)> = spec
            .edges
            .iter()
            .flat_map(|e| {
                [
                    (endpoint(&e.from), r.probe_host.clone()),
                    (r.probe_host.clone(), endpoint(&e.to)),
                ]
            })
            .collect();
        let got: Vec<_> = g
            .edges
            .iter()
            .map(|e| (e.src.clone(), e.dst.clone()))
            .collect();
        assert_eq!(got, expected);
        assert_eq!(got.len(), 4);
        // hub -> R appears twice in the graph but once as a probe pair
        assert_eq!(measurement_pairs(&g).len(), 3);
    }

    #[test]
    fn enumeration_counts_and_order() {
        let spec = pipeline();
        assert_eq!(
            enumerate_candidates(&spec, &RegionCatalog::bundled(), &Metric::ALL)
                .unwrap()
                .len(),
            24
        );

        let one = RegionCatalog::new(vec![region("a")]).unwrap();
        assert_eq!(
            enumerate_candidates(&spec, &one, &[Metric::Ping])
                .unwrap()
                .len(),
            1
        );

        let three = RegionCatalog::new(vec![region("c"), region("a"), region("b")]).unwrap();
        let got: Vec<_> = enumerate_candidates(&spec, &three, &[Metric::HttpRtt, Metric::Distance])
            .unwrap()
            .iter()
            .map(|g| (g.region.id.clone(), g.metric))
            .collect();
        let mut expected = Vec::new();
        for r in ["c", "a", "b"] {
            for m in [Metric::Distance, Metric::HttpRtt] {
                expected.push((r.to_owned(), m));
            }
        }
        assert_eq!(got, expected);

        assert!(matches!(
            enumerate_candidates(&spec, &one, &[Metric::Ping, Metric::Ping]),
            Err(Error::DuplicateMetric(Metric::Ping))
        ));
        assert!(matches!(
            enumerate_candidates(&spec, &one, &[]),
            Err(Error::NoMetrics)
        ));
    }

    #[test]
    fn metric_names() {
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
        assert!("bandwidth".parse::<Metric>().is_err());
    }

    proptest! {
        #[test]
        fn star_law(n in 1usize..=13, seed: u64, pat in prop::sample::select(WorkflowPattern::ALL.to_vec())) {
            let pool: Vec<_> = (0..13)
                .map(|i| WorkflowNode::new(format!("n{i}"), format!("h{i}"), Role::Service))
                .collect();
            let spec = generate_random_workflow(pat, n, &pool, seed).unwrap();
            let r = region("hub");
            let a = build_candidate_graph(&spec, &r, Metric::Ping);
            let b = build_candidate_graph(&spec, &r, Metric::Distance);
            prop_assert_eq!(a.edges.len(), 2 * spec.edges.len());
            prop_assert!(a.edges.iter().all(|e| (e.src == r.probe_host) ^ (e.dst == r.probe_host)));
            prop_assert_eq!(&a.edges, &b.edges);
            prop_assert!(measurement_pairs(&a).len() <= a.edges.len());
        }
    }
}
