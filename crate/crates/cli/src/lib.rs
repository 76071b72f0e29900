//! Command-line front end: `analyze`, `probe`, `generate`, `simulate`,
//! `experiment`, `agent` and `node`.

pub mod config;
pub mod recipe;

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cloudforecast_core::candidate::{enumerate_candidates, Metric};
use cloudforecast_core::executor::{
    live_execute, run_experiment, simulate_execution, ExperimentReport, Vantage,
};
use cloudforecast_core::geo::{LocationTable, RegionCatalog};
use cloudforecast_core::measurement::{
    collect_locations, AgentProvider, Aggregator, DistanceProvider, LocalProbeProvider,
    MeasurementProvider, MeasurementStore, ProbeConfig, ProviderSet, SyntheticNetworkModel,
    SyntheticProvider,
};
use cloudforecast_core::scoring::{rank_regions, render_report, ReportFormat, ScoringConfig};
use cloudforecast_core::service::BackgroundServer;
use cloudforecast_core::workflow::{
    generate_random_workflow, parse_workflow, WorkflowNode, WorkflowPattern, WorkflowSpec,
};
use cloudforecast_core::Error as CoreError;

pub use config::{FileConfig, LocalVantage, ProbeMode};
pub use recipe::Recipe;

/// Bundled node pool used by `generate` and `experiment`.
pub const DEFAULT_POOL: &str = include_str!("../data/pool.default");
/// Bundled experiment recipe: nine workflows over the sizes 2 to 13.
pub const DEFAULT_RECIPE: &str = include_str!("../data/recipe.default");

pub fn bundled_pool() -> Vec<WorkflowNode> {
    serde_json::from_str(DEFAULT_POOL).expect("bundled pool is valid")
}

#[derive(Debug, Parser)]
#[command(
    name = "cloudforecast",
    version,
    about = "Rank cloud regions for hosting a workflow orchestrator"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct GlobalArgs {
    /// Where latency numbers come from [default: synthetic]
    #[arg(long, global = true, value_enum, env = "CLOUDFORECAST_PROBE_MODE")]
    pub probe_mode: Option<ProbeMode>,

    /// Region catalog file [default: bundled 8-region catalog]
    #[arg(short, long, global = true, env = "CLOUDFORECAST_REGIONS")]
    pub regions: Option<PathBuf>,

    /// Write the main output here instead of stdout
    #[arg(short, long, global = true)]
    pub out: Option<PathBuf>,

    /// Report format for analyze: table, json or csv [default: table]
    #[arg(short, long, global = true, env = "CLOUDFORECAST_FORMAT")]
    pub format: Option<String>,

    /// Random seed for generation [default: 0, or the recipe's seed]
    #[arg(long, global = true, env = "CLOUDFORECAST_SEED")]
    pub seed: Option<u64>,

    /// JSON configuration file
    #[arg(long, global = true, env = "CLOUDFORECAST_CONFIG")]
    pub config: Option<PathBuf>,

    /// Omit timestamps from output
    #[arg(long, global = true)]
    pub no_timestamps: bool,
}

#[derive(Debug, Args, Default, Clone)]
pub struct Tuning {
    /// Comma-separated metrics: distance, ping, http_rtt [default: all three]
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<Metric>>,

    /// Regions kept after the distance stage [default: whole catalog]
    #[arg(long)]
    pub shortlist: Option<usize>,

    /// Weight of the summed ping score [default: 1.0]
    #[arg(long)]
    pub weight_ping: Option<f64>,

    /// Weight of the summed HTTP round-trip score [default: 1.0]
    #[arg(long)]
    pub weight_http: Option<f64>,

    /// Score added per failed edge measurement [default: 1e8]
    #[arg(long)]
    pub failure_penalty: Option<f64>,

    /// Probes per endpoint pair [default: 5]
    #[arg(long, env = "CLOUDFORECAST_SAMPLES")]
    pub samples: Option<u32>,

    /// Per-probe timeout in milliseconds [default: 3000]
    #[arg(long, env = "CLOUDFORECAST_TIMEOUT_MS")]
    pub timeout_ms: Option<u64>,

    /// Sample aggregator: mean, median or min [default: mean]
    #[arg(long)]
    pub aggregator: Option<Aggregator>,

    /// Concurrent probes [default: 8]
    #[arg(long)]
    pub parallel: Option<usize>,

    /// Synthetic model: fixed latency per leg in ms [default: 5.0]
    #[arg(long)]
    pub base_latency_ms: Option<f64>,

    /// Synthetic model: latency per 100 km in ms [default: 1.0]
    #[arg(long)]
    pub ms_per_100km: Option<f64>,

    /// Synthetic model: HTTP overhead over ping in ms [default: 20.0]
    #[arg(long)]
    pub http_overhead_ms: Option<f64>,

    /// Hostname -> coordinate table for endpoints without a location
    #[arg(long, env = "CLOUDFORECAST_LOCATIONS")]
    pub locations: Option<PathBuf>,

    /// Measurement cache file reused across runs
    #[arg(long, env = "CLOUDFORECAST_CACHE")]
    pub cache: Option<PathBuf>,

    /// Cache entry lifetime in seconds [default: 3600]
    #[arg(long)]
    pub ttl_s: Option<u64>,

    /// Port of the probe agent on each region's probe host [default: 9001]
    #[arg(long)]
    pub agent_port: Option<u16>,

    /// Latitude of the local vantage [default: 56.3398]
    #[arg(long, allow_negative_numbers = true)]
    pub local_lat: Option<f64>,

    /// Longitude of the local vantage [default: -2.7967]
    #[arg(long, allow_negative_numbers = true)]
    pub local_lon: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank the catalog's regions for a workflow
    Analyze {
        /// Workflow file
        #[arg(short, long)]
        workflow: PathBuf,
        /// Also write every candidate graph as an edge list here
        #[arg(long)]
        dump_graphs: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Measure a single endpoint pair
    Probe {
        #[arg(long)]
        src: String,
        #[arg(long)]
        dst: String,
        /// distance, ping or http_rtt
        #[arg(long, default_value = "ping")]
        metric: Metric,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Generate a random workflow
    Generate {
        /// sequential, fan_in, fan_out or mixed
        #[arg(short, long)]
        pattern: WorkflowPattern,
        /// Number of nodes (at least 1)
        #[arg(short, long, value_parser = clap::value_parser!(u64).range(1..))]
        nodes: u64,
        /// Node pool file [default: bundled pool]
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Time a workflow orchestrated from one vantage
    Simulate {
        #[arg(short, long)]
        workflow: PathBuf,
        /// `local` or a region id from the catalog
        #[arg(long, default_value = "local")]
        vantage: String,
        /// Run against stub nodes instead of the synthetic model
        #[arg(long)]
        live: bool,
        /// JSON map of node id -> stub node base URL (with --live)
        #[arg(long)]
        nodes: Option<PathBuf>,
        /// Live repetitions, mean reported
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        repeat: u32,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Speedup of the rank-1 region over local orchestration
    Experiment {
        /// Experiment recipe [default: bundled recipe]
        #[arg(long, conflicts_with = "workflows")]
        recipe: Option<PathBuf>,
        /// Directory of workflow files instead of a recipe
        #[arg(long)]
        workflows: Option<PathBuf>,
        /// Node pool for recipe generation [default: bundled pool]
        #[arg(long)]
        pool: Option<PathBuf>,
        /// Also write bar-chart data here
        #[arg(long)]
        chart: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Serve the probe-agent protocol
    Agent {
        #[arg(long, default_value = "127.0.0.1:9001")]
        listen: String,
    },
    /// Serve the stub workflow node protocol
    Node {
        #[arg(long, default_value = "127.0.0.1:9002")]
        listen: String,
    },
}

/// Error whose exit code was decided where it happened.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// 2 for invalid input, 3 for unresolvable locations, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::UnknownLocation(_) | CoreError::MissingMeasurement { .. }) => 3,
        Some(
            CoreError::Syntax { .. }
            | CoreError::Invalid(_)
            | CoreError::Cycle(_)
            | CoreError::InsufficientPool { .. }
            | CoreError::InvalidCoordinate { .. }
            | CoreError::DuplicateRegion(_)
            | CoreError::EmptyCatalog
            | CoreError::DuplicateMetric(_)
            | CoreError::NoMetrics
            | CoreError::Config(_),
        ) => 2,
        _ => 1,
    }
}

/// Everything a command needs after merging all configuration layers.
pub struct Settings {
    pub probe_mode: ProbeMode,
    pub catalog: RegionCatalog,
    pub locations: LocationTable,
    pub scoring: ScoringConfig,
    pub probe: ProbeConfig,
    pub model: SyntheticNetworkModel,
    pub cache: Option<PathBuf>,
    pub ttl_s: u64,
    pub agent_port: u16,
    pub agents: HashMap<String, String>,
    pub local: LocalVantage,
    pub seed: Option<u64>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

impl Settings {
    pub fn resolve(global: &GlobalArgs, tuning: &Tuning) -> Result<Self> {
        let file = match &global.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };

        let catalog = match global.regions.as_ref().or(file.regions.as_ref()) {
            Some(p) => RegionCatalog::load(&read(p)?)?,
            None => RegionCatalog::bundled(),
        };
        let locations = match tuning.locations.as_ref().or(file.locations.as_ref()) {
            Some(p) => LocationTable::parse(&read(p)?)?,
            None => LocationTable::new(),
        };

        let mut scoring = file.scoring.unwrap_or_default();
        if let Some(m) = &tuning.metrics {
            scoring.metrics = m.clone();
        }
        scoring.shortlist_n = tuning.shortlist.or(scoring.shortlist_n);
        scoring.weight_ping = tuning.weight_ping.unwrap_or(scoring.weight_ping);
        scoring.weight_http = tuning.weight_http.unwrap_or(scoring.weight_http);
        scoring.failure_penalty = tuning.failure_penalty.unwrap_or(scoring.failure_penalty);

        let mut probe = file.probe.unwrap_or_default();
        probe.samples_per_pair = tuning.samples.unwrap_or(probe.samples_per_pair);
        probe.timeout_ms = tuning.timeout_ms.unwrap_or(probe.timeout_ms);
        probe.aggregator = tuning.aggregator.unwrap_or(probe.aggregator);
        probe.max_parallel_probes = tuning.parallel.unwrap_or(probe.max_parallel_probes);
        scoring.max_parallel_probes = probe.max_parallel_probes;

        let mut model = file.model.unwrap_or_default();
        model.base_latency_ms = tuning.base_latency_ms.unwrap_or(model.base_latency_ms);
        model.ms_per_100km = tuning.ms_per_100km.unwrap_or(model.ms_per_100km);
        model.http_overhead_ms = tuning.http_overhead_ms.unwrap_or(model.http_overhead_ms);

        let mut local = file.local.unwrap_or_default();
        local.lat = tuning.local_lat.unwrap_or(local.lat);
        local.lon = tuning.local_lon.unwrap_or(local.lon);

        // reject bad combinations before any network activity
        scoring.validate()?;
        probe.validate()?;
        model.validate()?;
        local.coordinate()?;

        Ok(Settings {
            probe_mode: global.probe_mode.or(file.probe_mode).unwrap_or_default(),
            catalog,
            locations,
            scoring,
            probe,
            model,
            cache: tuning.cache.clone().or(file.cache),
            ttl_s: tuning.ttl_s.or(file.ttl_s).unwrap_or(3600),
            agent_port: tuning.agent_port.or(file.agent_port).unwrap_or(9001),
            agents: file.agents,
            local,
            seed: global.seed.or(file.seed),
        })
    }

    pub fn providers(&self, locations: LocationTable) -> Result<ProviderSet> {
        let distance: Arc<dyn MeasurementProvider> =
            Arc::new(DistanceProvider::new(locations.clone()));
        Ok(match self.probe_mode {
            ProbeMode::Synthetic => {
                let synthetic = Arc::new(SyntheticProvider::new(self.model, locations));
                ProviderSet::new(distance, synthetic.clone(), synthetic)
            }
            ProbeMode::Local => {
                let local = Arc::new(LocalProbeProvider::new(self.probe));
                ProviderSet::new(distance, local.clone(), local)
            }
            ProbeMode::Agent => {
                let agent = Arc::new(AgentProvider::for_catalog(
                    &self.catalog,
                    self.agent_port,
                    &self.agents,
                    self.probe,
                )?);
                ProviderSet::new(distance, agent.clone(), agent)
            }
        })
    }

    fn store(&self) -> Result<MeasurementStore> {
        Ok(match &self.cache {
            Some(p) => MeasurementStore::load(p, self.ttl_s)?,
            None => MeasurementStore::new(self.ttl_s),
        })
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load_workflow(path: &Path) -> Result<WorkflowSpec> {
    let text = read(path)?;
    parse_workflow(&text).with_context(|| format!("in workflow {}", path.display()))
}

fn load_pool(path: Option<&Path>) -> Result<Vec<WorkflowNode>> {
    match path {
        Some(p) => serde_json::from_str(&read(p)?)
            .map_err(|e| anyhow!(CoreError::Config(format!("node pool {}: {e}", p.display())))),
        None => Ok(bundled_pool()),
    }
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn cmd_analyze(
    global: &GlobalArgs,
    workflow: &Path,
    dump_graphs: Option<&Path>,
    tuning: &Tuning,
) -> Result<()> {
    let format: ReportFormat = global.format.as_deref().unwrap_or("table").parse()?;
    let settings = Settings::resolve(global, tuning)?;
    let spec = load_workflow(workflow)?;

    if let Some(path) = dump_graphs {
        let graphs = enumerate_candidates(&spec, &settings.catalog, &settings.scoring.metrics)?;
        let text: String = graphs.iter().map(|g| g.dump()).collect();
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }

    let locations = collect_locations(&spec, &settings.catalog, &settings.locations);
    let providers = settings.providers(locations)?;
    let store = settings.store()?;
    let mut report = rank_regions(
        &spec,
        &settings.catalog,
        &store,
        &providers,
        &settings.scoring,
    )?;
    if let Some(p) = &settings.cache {
        store.save(p)?;
    }
    if !global.no_timestamps {
        report.generated_at = Some(now_ms());
    }
    emit(global.out.as_deref(), &render_report(&report, format))
}

pub fn cmd_probe(
    global: &GlobalArgs,
    src: &str,
    dst: &str,
    metric: Metric,
    tuning: &Tuning,
) -> Result<()> {
    let settings = Settings::resolve(global, tuning)?;
    let mut locations = settings.locations.clone();
    for r in settings.catalog.regions() {
        locations.insert(&r.probe_host, r.location);
    }
    let providers = settings.providers(locations)?;
    let store = settings.store()?;
    let mut m = store.get_or_measure(src, dst, metric, &providers)?;
    if let Some(p) = &settings.cache {
        store.save(p)?;
    }
    if global.no_timestamps {
        m.taken_at = 0;
    }
    emit(
        global.out.as_deref(),
        &format!("{}\n", serde_json::to_string_pretty(&m)?),
    )
}

pub fn cmd_generate(
    global: &GlobalArgs,
    pattern: WorkflowPattern,
    nodes: u64,
    pool: Option<&Path>,
) -> Result<()> {
    let pool = load_pool(pool)?;
    let spec = generate_random_workflow(pattern, nodes as usize, &pool, global.seed.unwrap_or(0))?;
    emit(global.out.as_deref(), &spec.render())
}

pub fn cmd_simulate(
    global: &GlobalArgs,
    workflow: &Path,
    vantage: &str,
    live: bool,
    nodes: Option<&Path>,
    repeat: u32,
    tuning: &Tuning,
) -> Result<()> {
    let settings = Settings::resolve(global, tuning)?;
    let spec = load_workflow(workflow)?;

    if live {
        let Some(nodes) = nodes else {
            bail!(UsageError("--live needs --nodes <file>".into()));
        };
        let urls: HashMap<String, String> = serde_json::from_str(&read(nodes)?).map_err(|e| {
            anyhow!(CoreError::Config(format!(
                "node map {}: {e}",
                nodes.display()
            )))
        })?;
        let mut runs = Vec::new();
        for _ in 0..repeat {
            runs.push(live_execute(&spec, &urls, &settings.probe)?);
        }
        let mean = runs.iter().map(|r| r.makespan_ms).sum::<f64>() / runs.len() as f64;
        let body =
            serde_json::json!({ "workflow": spec.name, "mean_makespan_ms": mean, "runs": runs });
        return emit(
            global.out.as_deref(),
            &format!("{}\n", serde_json::to_string_pretty(&body)?),
        );
    }

    let at = if vantage == settings.local.id {
        Vantage::new(&settings.local.id, settings.local.coordinate()?)
    } else {
        let r = settings
            .catalog
            .get(vantage)
            .ok_or_else(|| UsageError(format!("unknown vantage `{vantage}`")))?;
        Vantage::new(&r.id, r.location)
    };
    let locations = collect_locations(&spec, &settings.catalog, &settings.locations);
    let result = simulate_execution(&spec, &at, &settings.model, &locations)?;
    emit(
        global.out.as_deref(),
        &format!("{}\n", serde_json::to_string_pretty(&result)?),
    )
}

pub fn cmd_experiment(
    global: &GlobalArgs,
    recipe: Option<&Path>,
    workflows: Option<&Path>,
    pool: Option<&Path>,
    chart: Option<&Path>,
    tuning: &Tuning,
) -> Result<ExperimentReport> {
    let mut settings = Settings::resolve(global, tuning)?;
    if settings.probe_mode != ProbeMode::Synthetic {
        bail!(UsageError(
            "experiment runs under --probe-mode synthetic only".into()
        ));
    }

    let specs = match workflows {
        Some(dir) => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .with_context(|| format!("reading {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            paths.sort();
            paths
                .iter()
                .map(|p| load_workflow(p))
                .collect::<Result<Vec<_>>>()?
        }
        None => {
            let recipe = match recipe {
                Some(p) => Recipe::parse(&read(p)?)?,
                None => Recipe::parse(DEFAULT_RECIPE)?,
            };
            if let Some(local) = &recipe.local {
                if tuning.local_lat.is_none() && tuning.local_lon.is_none() {
                    settings.local = local.clone();
                }
            }
            let pool = match (pool, &recipe.pool) {
                (Some(p), _) => load_pool(Some(p))?,
                (None, Some(nodes)) => nodes.clone(),
                (None, None) => bundled_pool(),
            };
            recipe.generate(&pool, settings.seed)?
        }
    };
    if specs.is_empty() {
        bail!(UsageError("no workflows to run".into()));
    }

    let local = Vantage::new(&settings.local.id, settings.local.coordinate()?);
    let report = run_experiment(
        &specs,
        &settings.catalog,
        &settings.model,
        &local,
        &settings.scoring,
        &settings.locations,
    )?;
    if let Some(p) = chart {
        std::fs::write(p, report.to_chart_data())
            .with_context(|| format!("writing {}", p.display()))?;
    }
    emit(global.out.as_deref(), &report.to_csv())?;
    if global.out.is_some() {
        print!("{}", report.summary());
    } else {
        eprint!("{}", report.summary());
    }
    Ok(report)
}

fn serve_forever(server: BackgroundServer) -> Result<()> {
    tracing::info!("listening on {}", server.url());
    eprintln!("listening on {}", server.url());
    loop {
        std::thread::park();
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Analyze {
            workflow,
            dump_graphs,
            tuning,
        } => cmd_analyze(g, workflow, dump_graphs.as_deref(), tuning),
        Command::Probe {
            src,
            dst,
            metric,
            tuning,
        } => cmd_probe(g, src, dst, *metric, tuning),
        Command::Generate {
            pattern,
            nodes,
            pool,
        } => cmd_generate(g, *pattern, *nodes, pool.as_deref()),
        Command::Simulate {
            workflow,
            vantage,
            live,
            nodes,
            repeat,
            tuning,
        } => cmd_simulate(
            g,
            workflow,
            vantage,
            *live,
            nodes.as_deref(),
            *repeat,
            tuning,
        ),
        Command::Experiment {
            recipe,
            workflows,
            pool,
            chart,
            tuning,
        } => cmd_experiment(
            g,
            recipe.as_deref(),
            workflows.as_deref(),
            pool.as_deref(),
            chart.as_deref(),
            tuning,
        )
        .map(drop),
        Command::Agent { listen } => serve_forever(
            BackgroundServer::agent(listen).with_context(|| format!("binding {listen}"))?,
        ),
        Command::Node { listen } => serve_forever(
            BackgroundServer::node(listen).with_context(|| format!("binding {listen}"))?,
        ),
    }
}
