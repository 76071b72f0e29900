//! Pre-deployment placement analysis for workflow orchestrators.
//!
//! Given a DAG workflow of web services and a catalog of candidate cloud
//! regions, every data flow is routed through each candidate region in
//! turn and the resulting star-shaped graphs are weighted by great-circle
//! distance, echo latency and HTTP round-trip time. Regions are
//! shortlisted by distance and ranked by the combined latency score. A
//! small orchestrator simulates or runs the workflow to check rankings.

pub mod candidate;
pub mod error;
pub mod executor;
pub mod geo;
pub mod measurement;
pub mod scoring;
pub mod service;
pub mod workflow;

pub use candidate::{
    build_candidate_graph, enumerate_candidates, measurement_pairs, CandidateGraph, Metric,
};
pub use error::{Error, Result};
pub use executor::{
    run_experiment, simulate_execution, speedup_percent, ExperimentReport, Vantage,
};
pub use geo::{haversine_km, Coordinate, LocationTable, Region, RegionCatalog};
pub use measurement::{
    Measurement, MeasurementProvider, MeasurementStore, ProbeConfig, ProviderSet,
    SyntheticNetworkModel,
};
pub use scoring::{rank_regions, render_report, RankingReport, ReportFormat, ScoringConfig};
pub use workflow::{
    generate_random_workflow, parse_workflow, topological_order, validate_dag, WorkflowPattern,
    WorkflowSpec,
};
