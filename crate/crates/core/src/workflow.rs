//! Workflow DAG model: parsing, validation, ordering and random generation.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Coordinate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Service,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowNode {
    pub id: String,
    pub endpoint: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Coordinate>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub service_time_ms: f64,
}

impl WorkflowNode {
    pub fn new(id: impl Into<String>, endpoint: impl Into<String>, role: Role) -> Self {
        WorkflowNode {
            id: id.into(),
            endpoint: endpoint.into(),
            role,
            location: None,
            service_time_ms: 0.0,
        }
    }

    pub fn at(mut self, lat: f64, lon: f64) -> Self {
        self.location = Some(Coordinate { lat, lon });
        self
    }

    pub fn service_time(mut self, ms: f64) -> Self {
        self.service_time_ms = ms;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowEdge {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub payload_kb: f64,
}

impl WorkflowEdge {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        WorkflowEdge {
            from: from.into(),
            to: to.into(),
            payload_kb: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowSpec {
    pub name: String,
    pub nodes: Vec<WorkflowNode>,
    pub edges: Vec<WorkflowEdge>,
}

/// One broken workflow invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyId,
    DuplicateId(String),
    EmptyEndpoint(String),
    NegativeServiceTime(String),
    InvalidLocation(String),
    SelfLoop(String),
    NegativePayload {
        from: String,
        to: String,
    },
    DanglingEdge {
        from: String,
        to: String,
        missing: String,
    },
    /// Members of one strongly connected component, sorted.
    Cycle(Vec<String>),
    SourceWithInputs(String),
    Disconnected,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId => write!(f, "node with empty id"),
            Violation::DuplicateId(id) => write!(f, "duplicate node id `{id}`"),
            Violation::EmptyEndpoint(id) => write!(f, "node `{id}` has an empty endpoint"),
            Violation::NegativeServiceTime(id) => {
                write!(f, "node `{id}` has a negative or non-finite service time")
            }
            Violation::InvalidLocation(id) => write!(f, "node `{id}` has an invalid location"),
            Violation::SelfLoop(id) => write!(f, "self-loop on `{id}`"),
            Violation::NegativePayload { from, to } => {
                write!(f, "edge {from} -> {to} has a negative payload")
            }
            Violation::DanglingEdge { from, to, missing } => {
                write!(f, "dangling edge {from} -> {to}: unknown node `{missing}`")
            }
            Violation::Cycle(ids) => write!(f, "cycle {{{}}}", ids.join(",")),
            Violation::SourceWithInputs(id) => write!(f, "source node `{id}` has incoming edges"),
            Violation::Disconnected => write!(f, "workflow is not weakly connected"),
        }
    }
}

impl WorkflowSpec {
    /// Builds a spec and checks every invariant.
    pub fn new(
        name: impl Into<String>,
        nodes: Vec<WorkflowNode>,
        edges: Vec<WorkflowEdge>,
    ) -> Result<Self> {
        let spec = WorkflowSpec {
            name: name.into(),
            nodes,
            edges,
        };
        let violations = validate_dag(&spec);
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(Error::Invalid(violations))
        }
    }

    pub fn node(&self, id: &str) -> Option<&WorkflowNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn render(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("workflow serializes");
        out.push('\n');
        out
    }

    /// Incoming edges keyed by target id.
    pub fn predecessors(&self) -> HashMap<&str, Vec<&WorkflowEdge>> {
        let mut preds: HashMap<&str, Vec<&WorkflowEdge>> = HashMap::new();
        for e in &self.edges {
            preds.entry(e.to.as_str()).or_default().push(e);
        }
        preds
    }
}

pub fn parse_workflow(document: &str) -> Result<WorkflowSpec> {
    let spec: WorkflowSpec = serde_json::from_str(document).map_err(Error::from_json)?;
    let violations = validate_dag(&spec);
    if violations.is_empty() {
        Ok(spec)
    } else {
        Err(Error::Invalid(violations))
    }
}

/// Returns every invariant violation; an empty list means the spec is valid.
pub fn validate_dag(spec: &WorkflowSpec) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut ids = HashSet::new();
    for n in &spec.nodes {
        if n.id.is_empty() {
            out.push(Violation::EmptyId);
        } else if !ids.insert(n.id.as_str()) {
            out.push(Violation::DuplicateId(n.id.clone()));
        }
        if n.endpoint.trim().is_empty() {
            out.push(Violation::EmptyEndpoint(n.id.clone()));
        }
        if !(n.service_time_ms.is_finite() && n.service_time_ms >= 0.0) {
            out.push(Violation::NegativeServiceTime(n.id.clone()));
        }
        if n.location.is_some_and(|c| !c.is_valid()) {
            out.push(Violation::InvalidLocation(n.id.clone()));
        }
    }

    let mut adjacency: BTreeMap<&str, Vec<&str>> = ids.iter().map(|id| (*id, Vec::new())).collect();
    let mut has_input = HashSet::new();
    for e in &spec.edges {
        if e.from == e.to {
            out.push(Violation::SelfLoop(e.from.clone()));
            continue;
        }
        if !(e.payload_kb.is_finite() && e.payload_kb >= 0.0) {
            out.push(Violation::NegativePayload {
                from: e.from.clone(),
                to: e.to.clone(),
            });
        }
        let mut dangling = false;
        for end in [&e.from, &e.to] {
            if !ids.contains(end.as_str()) {
                out.push(Violation::DanglingEdge {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    missing: end.clone(),
                });
                dangling = true;
            }
        }
        if !dangling {
            adjacency
                .get_mut(e.from.as_str())
                .unwrap()
                .push(e.to.as_str());
            has_input.insert(e.to.as_str());
        }
    }

    for scc in strongly_connected(&adjacency) {
        if scc.len() > 1 {
            out.push(Violation::Cycle(scc));
        }
    }

    for n in &spec.nodes {
        if n.role == Role::Source && has_input.contains(n.id.as_str()) {
            out.push(Violation::SourceWithInputs(n.id.clone()));
        }
    }

    if ids.len() >= 2 && !weakly_connected(&adjacency) {
        out.push(Violation::Disconnected);
    }
    out
}

/// Tarjan's algorithm; each component is returned sorted, components in
/// order of their smallest member.
fn strongly_connected<'a>(adjacency: &BTreeMap<&'a str, Vec<&'a str>>) -> Vec<Vec<String>> {
    struct State<'a> {
        index: HashMap<&'a str, usize>,
        low: HashMap<&'a str, usize>,
        stack: Vec<&'a str>,
        on_stack: HashSet<&'a str>,
        next: usize,
        out: Vec<Vec<String>>,
    }

    fn visit<'a>(v: &'a str, adj: &BTreeMap<&'a str, Vec<&'a str>>, st: &mut State<'a>) {
        st.index.insert(v, st.next);
        st.low.insert(v, st.next);
        st.next += 1;
        st.stack.push(v);
        st.on_stack.insert(v);
        for &w in &adj[v] {
            if !st.index.contains_key(w) {
                visit(w, adj, st);
                let lw = st.low[w];
                let lv = st.low.get_mut(v).unwrap();
                *lv = (*lv).min(lw);
            } else if st.on_stack.contains(w) {
                let iw = st.index[w];
                let lv = st.low.get_mut(v).unwrap();
                *lv = (*lv).min(iw);
            }
        }
        if st.low[v] == st.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().unwrap();
                st.on_stack.remove(w);
                comp.push(w.to_owned());
                if w == v {
                    break;
                }
            }
            comp.sort();
            st.out.push(comp);
        }
    }

    let mut st = State {
        index: HashMap::new(),
        low: HashMap::new(),
        stack: Vec::new(),
        on_stack: HashSet::new(),
        next: 0,
        out: Vec::new(),
    };
    for &v in adjacency.keys() {
        if !st.index.contains_key(v) {
            visit(v, adjacency, &mut st);
        }
    }
    st.out.sort();
    st.out
}

fn weakly_connected(adjacency: &BTreeMap<&str, Vec<&str>>) -> bool {
    let mut undirected: HashMap<&str, Vec<&str>> = HashMap::new();
    for (&u, vs) in adjacency {
        for &v in vs {
            undirected.entry(u).or_default().push(v);
            undirected.entry(v).or_default().push(u);
        }
    }
    let Some(&start) = adjacency.keys().next() else {
        return true;
    };
    let mut seen = HashSet::from([start]);
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &v in undirected.get(u).into_iter().flatten() {
            if seen.insert(v) {
                stack.push(v);
            }
        }
    }
    seen.len() == adjacency.len()
}

/// Kahn's algorithm, always emitting the lexicographically smallest ready id.
pub fn topological_order(spec: &WorkflowSpec) -> Result<Vec<String>> {
    let mut indegree: BTreeMap<&str, usize> =
        spec.nodes.iter().map(|n| (n.id.as_str(), 0)).collect();
    let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
    for e in &spec.edges {
        if !indegree.contains_key(e.from.as_str()) || !indegree.contains_key(e.to.as_str()) {
            continue;
        }
        *indegree.get_mut(e.to.as_str()).unwrap() += 1;
        children
            .entry(e.from.as_str())
            .or_default()
            .push(e.to.as_str());
    }

    let mut ready: BinaryHeap<Reverse<&str>> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| Reverse(*id))
        .collect();
    let mut order = Vec::with_capacity(indegree.len());
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u.to_owned());
        for &v in children.get(u).into_iter().flatten() {
            let d = indegree.get_mut(v).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push(Reverse(v));
            }
        }
    }

    if order.len() < indegree.len() {
        let done: HashSet<&str> = order.iter().map(String::as_str).collect();
        let stuck = indegree
            .keys()
            .filter(|id| !done.contains(*id))
            .map(|id| id.to_string())
            .collect();
        return Err(Error::Cycle(stuck));
    }
    Ok(order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowPattern {
    Sequential,
    FanIn,
    FanOut,
    Mixed,
}

impl WorkflowPattern {
    pub const ALL: [WorkflowPattern; 4] = [
        WorkflowPattern::Sequential,
        WorkflowPattern::FanIn,
        WorkflowPattern::FanOut,
        WorkflowPattern::Mixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WorkflowPattern::Sequential => "sequential",
            WorkflowPattern::FanIn => "fan_in",
            WorkflowPattern::FanOut => "fan_out",
            WorkflowPattern::Mixed => "mixed",
        }
    }
}

impl fmt::Display for WorkflowPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WorkflowPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sequential" => Ok(WorkflowPattern::Sequential),
            "fan_in" => Ok(WorkflowPattern::FanIn),
            "fan_out" => Ok(WorkflowPattern::FanOut),
            "mixed" => Ok(WorkflowPattern::Mixed),
            other => Err(Error::Config(format!("unknown workflow pattern `{other}`"))),
        }
    }
}

/// Draws `node_count` distinct nodes from `pool` and wires them into the
/// requested pattern. Identical arguments always give identical output.
pub fn generate_random_workflow(
    pattern: WorkflowPattern,
    node_count: usize,
    node_pool: &[WorkflowNode],
    seed: u64,
) -> Result<WorkflowSpec> {
    if node_count == 0 {
        return Err(Error::Config("node_count must be at least 1".into()));
    }
    if node_pool.len() < node_count {
        return Err(Error::InsufficientPool {
            needed: node_count,
            available: node_pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<WorkflowNode> = node_pool
        .choose_multiple(&mut rng, node_count)
        .cloned()
        .collect();
    let ids: Vec<String> = nodes.iter().map(|n| n.id.clone()).collect();

    let pairs: Vec<(usize, usize)> = match pattern {
        WorkflowPattern::Sequential => (1..node_count).map(|i| (i - 1, i)).collect(),
        WorkflowPattern::FanOut => (1..node_count).map(|i| (0, i)).collect(),
        WorkflowPattern::FanIn => (0..node_count.saturating_sub(1))
            .map(|i| (i, node_count - 1))
            .collect(),
        WorkflowPattern::Mixed => mixed_edges(node_count, &mut rng),
    };

    let edges: Vec<WorkflowEdge> = pairs
        .into_iter()
        .map(|(a, b)| WorkflowEdge::new(ids[a].clone(), ids[b].clone()))
        .collect();
    let with_input: HashSet<&str> = edges.iter().map(|e| e.to.as_str()).collect();
    for n in &mut nodes {
        n.role = if with_input.contains(n.id.as_str()) {
            Role::Service
        } else {
            Role::Source
        };
    }

    WorkflowSpec::new(format!("{pattern}-{node_count}-s{seed}"), nodes, edges)
}

/// Chains randomly sized sequential, fan-out and fan-in segments onto a
/// growing frontier. Edges always run from older to newer nodes or from a
/// fresh source into a fresh sink, so the result is acyclic and connected.
fn mixed_edges(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    let mut frontier = vec![0usize];
    let mut next = 1usize;
    while next < n {
        let remaining = n - next;
        let size = rng.gen_range(1..=remaining.min(4));
        match rng.gen_range(0..3) {
            // fan-in: size-1 fresh sources plus the frontier feed one fresh sink
            2 if size >= 2 => {
                let sink = next + size - 1;
                for &f in &frontier {
                    edges.push((f, sink));
                }
                for src in next..sink {
                    edges.push((src, sink));
                }
                frontier = vec![sink];
            }
            // fan-out from the newest frontier node
            1 if size >= 2 => {
                let hub = frontier.pop().expect("frontier is never empty");
                for child in next..next + size {
                    edges.push((hub, child));
                    frontier.push(child);
                }
            }
            _ => {
                for &f in &frontier {
                    edges.push((f, next));
                }
                for i in next + 1..next + size {
                    edges.push((i - 1, i));
                }
                frontier = vec![next + size - 1];
            }
        }
        next += size;
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn pipeline() -> WorkflowSpec {
        parse_workflow(include_str!("../data/image-pipeline.workflow")).unwrap()
    }

    fn pool(n: usize) -> Vec<WorkflowNode> {
        (0..n)
            .map(|i| {
                WorkflowNode::new(
                    format!("n{i:02}"),
                    format!("node{i}.example"),
                    Role::Service,
                )
                .at(i as f64, -(i as f64))
                .service_time(i as f64)
            })
            .collect()
    }

    fn spec_of(ids: &[&str], edges: &[(&str, &str)]) -> WorkflowSpec {
        WorkflowSpec {
            name: "t".into(),
            nodes: ids
                .iter()
                .map(|id| WorkflowNode::new(*id, format!("{id}.example"), Role::Service))
                .collect(),
            edges: edges
                .iter()
                .map(|(a, b)| WorkflowEdge::new(*a, *b))
                .collect(),
        }
    }

    #[test]
    fn pipeline_parses() {
        let spec = pipeline();
        assert_eq!(spec.nodes.len(), 3);
        assert_eq!(spec.edges.len(), 2);
        assert!(validate_dag(&spec).is_empty());
        assert_eq!(
            topological_order(&spec).unwrap(),
            ["wikimedia", "princeton", "sfu"]
        );
    }

    #[test]
    fn two_cycle_is_rejected() {
        let doc = r#"{"name": "c", "nodes": [
            {"id": "A", "endpoint": "a", "role": "service"},
            {"id": "B", "endpoint": "b", "role": "service"}],
            "edges": [{"from": "A", "to": "B"}, {"from": "B", "to": "A"}]}"#;
        match parse_workflow(doc) {
            Err(Error::Invalid(v)) => {
                assert!(v.contains(&Violation::Cycle(vec!["A".into(), "B".into()])))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_node_is_valid() {
        let doc = r#"{"name": "one", "nodes": [{"id": "A", "endpoint": "a", "role": "source"}], "edges": []}"#;
        let spec = parse_workflow(doc).unwrap();
        assert_eq!(spec.nodes[0].service_time_ms, 0.0);
        assert_eq!(spec.nodes[0].location, None);
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_workflow("{\n  \"name\": \"x\",\n  \"nodes\": [,]\n}") {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_workflow(r#"{"name": "x", "nodes": [], "edges": [], "extra": 1}"#),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn three_cycle_and_dangling_are_both_reported() {
        let mut spec = spec_of(&["A", "B", "C"], &[("A", "B"), ("B", "C"), ("C", "A")]);
        assert_eq!(
            validate_dag(&spec),
            [Violation::Cycle(vec!["A".into(), "B".into(), "C".into()])]
        );
        spec.edges.push(WorkflowEdge::new("A", "X"));
        let v = validate_dag(&spec);
        assert!(v.contains(&Violation::DanglingEdge {
            from: "A".into(),
            to: "X".into(),
            missing: "X".into()
        }));
        assert!(v.iter().any(|x| matches!(x, Violation::Cycle(_))));
    }

    #[test]
    fn other_violations() {
        let mut spec = spec_of(&["A", "A", "B"], &[]);
        spec.nodes[0].role = Role::Source;
        spec.nodes[2].endpoint = " ".into();
        spec.nodes[2].service_time_ms = -1.0;
        spec.edges.push(WorkflowEdge::new("B", "A"));
        spec.edges.push(WorkflowEdge::new("B", "B"));
        let v = validate_dag(&spec);
        assert!(v.contains(&Violation::DuplicateId("A".into())));
        assert!(v.contains(&Violation::EmptyEndpoint("B".into())));
        assert!(v.contains(&Violation::NegativeServiceTime("B".into())));
        assert!(v.contains(&Violation::SourceWithInputs("A".into())));
        assert!(v.contains(&Violation::SelfLoop("B".into())));

        let disconnected = spec_of(&["A", "B"], &[]);
        assert_eq!(validate_dag(&disconnected), [Violation::Disconnected]);
    }

    #[test]
    fn lexicographic_tie_break() {
        let spec = spec_of(&["B", "A"], &[]);
        // disconnected but still orderable
        assert_eq!(topological_order(&spec).unwrap(), ["A", "B"]);
    }

    /// Every topological order of the DAG, by brute-force permutation.
    fn all_orders(spec: &WorkflowSpec) -> Vec<Vec<String>> {
        fn permute(rest: &mut Vec<String>, acc: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
            if rest.is_empty() {
                out.push(acc.clone());
                return;
            }
            for i in 0..rest.len() {
                let x = rest.remove(i);
                acc.push(x.clone());
                permute(rest, acc, out);
                acc.pop();
                rest.insert(i, x);
            }
        }
        let mut perms = Vec::new();
        let mut ids: Vec<String> = spec.nodes.iter().map(|n| n.id.clone()).collect();
        permute(&mut ids, &mut Vec::new(), &mut perms);
        perms
            .into_iter()
            .filter(|p| {
                spec.edges.iter().all(|e| {
                    p.iter().position(|x| *x == e.from) < p.iter().position(|x| *x == e.to)
                })
            })
            .collect()
    }

    #[test]
    fn diamond_matches_brute_force_least_order() {
        let spec = spec_of(
            &["D", "C", "B", "A"],
            &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")],
        );
        let least = all_orders(&spec).into_iter().min().unwrap();
        assert_eq!(least, ["A", "B", "C", "D"]);
        assert_eq!(topological_order(&spec).unwrap(), least);
    }

    #[test]
    fn cycle_fails_ordering() {
        let spec = spec_of(&["A", "B"], &[("A", "B"), ("B", "A")]);
        assert!(matches!(topological_order(&spec), Err(Error::Cycle(_))));
    }

    #[test]
    fn generator_examples() {
        let p = pool(20);
        let seq = generate_random_workflow(WorkflowPattern::Sequential, 5, &p, 1).unwrap();
        assert_eq!((seq.nodes.len(), seq.edges.len()), (5, 4));

        let fo = generate_random_workflow(WorkflowPattern::FanOut, 2, &p, 0).unwrap();
        assert_eq!(fo.edges.len(), 1);
        assert_eq!(
            fo.nodes.iter().filter(|n| n.role == Role::Source).count(),
            1
        );

        let a = generate_random_workflow(WorkflowPattern::Mixed, 13, &p, 7).unwrap();
        let b = generate_random_workflow(WorkflowPattern::Mixed, 13, &p, 7).unwrap();
        assert_eq!(a.render(), b.render());

        assert!(matches!(
            generate_random_workflow(WorkflowPattern::Sequential, 21, &p, 0),
            Err(Error::InsufficientPool {
                needed: 21,
                available: 20
            })
        ));
        assert!(generate_random_workflow(WorkflowPattern::Sequential, 0, &p, 0).is_err());
    }

    #[test]
    fn fan_shapes() {
        let p = pool(20);
        let fi = generate_random_workflow(WorkflowPattern::FanIn, 6, &p, 3).unwrap();
        let sink = &fi.edges[0].to;
        assert!(fi.edges.iter().all(|e| &e.to == sink));
        let fo = generate_random_workflow(WorkflowPattern::FanOut, 6, &p, 3).unwrap();
        let hub = &fo.edges[0].from;
        assert!(fo.edges.iter().all(|e| &e.from == hub));
    }

    fn pattern() -> impl Strategy<Value = WorkflowPattern> {
        prop::sample::select(WorkflowPattern::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn generated_workflows_are_valid(pat in pattern(), n in 1usize..=16, seed: u64) {
            let spec = generate_random_workflow(pat, n, &pool(16), seed).unwrap();
            prop_assert!(validate_dag(&spec).is_empty());
            prop_assert_eq!(spec.nodes.len(), n);
            if pat != WorkflowPattern::Mixed {
                prop_assert_eq!(spec.edges.len(), n - 1);
            }
            let order = topological_order(&spec).unwrap();
            let mut sorted = order.clone();
            sorted.sort();
            let mut ids: Vec<_> = spec.nodes.iter().map(|n| n.id.clone()).collect();
            ids.sort();
            prop_assert_eq!(sorted, ids);
            for e in &spec.edges {
                let pf = order.iter().position(|x| *x == e.from);
                let pt = order.iter().position(|x| *x == e.to);
                prop_assert!(pf < pt);
            }
        }

        #[test]
        fn render_parse_round_trip(pat in pattern(), n in 1usize..=13, seed: u64) {
            let spec = generate_random_workflow(pat, n, &pool(13), seed).unwrap();
            prop_assert_eq!(parse_workflow(&spec.render()).unwrap(), spec);
        }
    }
}
