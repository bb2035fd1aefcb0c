use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use sdaas::harness::{
    plan_one, run_experiment, summarize, write_raw_csv, write_summary_csv, Algorithm,
    ExperimentConfig, NetworkSource, Variant,
};
use sdaas::network::{load_network, save_network};
use sdaas::{
    generate_random_network, generate_requests, validate_itinerary, DeliveryRequest,
    DronePerformance, GeneratorParams, Itinerary, NodeId, PlanError, PlannerConfig, SkywayNetwork,
    Violation,
};

#[derive(Parser)]
#[command(name = "sdaas", version, about = "Swarm drone delivery planning on skyway networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random connected network as JSON.
    GenNetwork {
        #[arg(long, default_value_t = 30)]
        nodes: usize,
        #[arg(long, default_value_t = 0.12)]
        density: f64,
        #[arg(long, default_value_t = 1)]
        pads_min: u32,
        #[arg(long, default_value_t = 4)]
        pads_max: u32,
        #[arg(long, default_value_t = 50.0)]
        km_min: f64,
        #[arg(long, default_value_t = 400.0)]
        km_max: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Draw random delivery requests for a network, as a JSON array.
    GenRequests {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        max_packages: usize,
        #[arg(long, default_value_t = 5.0)]
        max_weight: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Plan one request and print the itinerary as JSON.
    Plan {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        source: u32,
        #[arg(long)]
        destination: u32,
        /// Package weights in kg, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        weights: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Algo::Sequential)]
        algorithm: Algo,
        #[arg(long, default_value_t = 1)]
        lookahead: usize,
        #[arg(long, default_value_t = 2)]
        max_splits: usize,
        #[arg(long, default_value_t = 60.0)]
        window: f64,
        #[arg(long)]
        cooperative: bool,
        #[arg(long, default_value_t = 0.0)]
        reserve: f64,
        #[arg(long, default_value_t = 10_000)]
        path_budget: usize,
    },
    /// Run an experiment grid from a JSON config and write CSVs.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Raw per-request rows; stdout when omitted.
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Record planner wall-clock (makes output run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Re-simulate an itinerary and check its invariants.
    Validate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        itinerary: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Sequential,
    Parallel,
    Dijkstra,
    BruteForce,
}

impl From<Algo> for Algorithm {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Sequential => Algorithm::Sequential,
            Algo::Parallel => Algorithm::Parallel,
            Algo::Dijkstra => Algorithm::Dijkstra,
            Algo::BruteForce => Algorithm::BruteForce,
        }
    }
}

fn sink(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn read_network(path: &Path) -> anyhow::Result<SkywayNetwork> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(load_network(f)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::GenNetwork {
            nodes,
            density,
            pads_min,
            pads_max,
            km_min,
            km_max,
            seed,
            out,
        } => {
            let net = generate_random_network(&GeneratorParams {
                nodes,
                edge_density: density,
                pads_min,
                pads_max,
                km_min,
                km_max,
                seed,
            })?;
            let mut w = sink(&out)?;
            save_network(&net, &mut w)?;
            writeln!(w)?;
        }
        Cmd::GenRequests {
            network,
            count,
            seed,
            max_packages,
            max_weight,
            out,
        } => {
            let net = read_network(&network)?;
            let reqs = generate_requests(&net, count, seed, max_packages, max_weight)?;
            let mut w = sink(&out)?;
            serde_json::to_writer_pretty(&mut w, &reqs)?;
            writeln!(w)?;
        }
        Cmd::Plan {
            network,
            source,
            destination,
            weights,
            algorithm,
            lookahead,
            max_splits,
            window,
            cooperative,
            reserve,
            path_budget,
        } => {
            let net = read_network(&network)?;
            let request = DeliveryRequest {
                source: NodeId(source),
                destination: NodeId(destination),
                package_weights_kg: weights,
            };
            let config = PlannerConfig {
                lookahead,
                max_splits,
                arrival_window_minutes: window,
                cooperative,
                reserve_percent: reserve,
                ..PlannerConfig::default()
            };
            let perf = DronePerformance::default();
            let it = plan_one(
                &net,
                &request,
                &perf,
                &Variant::of(algorithm.into()),
                &config,
                path_budget,
            )?;
            println!("{}", it.to_json_string());
        }
        Cmd::Bench {
            config,
            raw,
            summary,
            timing,
        } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: ExperimentConfig =
                serde_json::from_str(&text).context("parsing experiment config")?;
            cfg.timing |= timing;
            if let NetworkSource::File { file } = &mut cfg.network {
                if file.is_relative() {
                    if let Some(dir) = config.parent() {
                        *file = dir.join(&*file);
                    }
                }
            }
            let (_, _, rows) = run_experiment(&cfg)?;
            write_raw_csv(&rows, sink(&raw)?)?;
            if let Some(p) = summary {
                write_summary_csv(&summarize(&rows), sink(&Some(p))?)?;
            }
        }
        Cmd::Validate { network, itinerary } => {
            let net = read_network(&network)?;
            let text = std::fs::read_to_string(&itinerary)
                .with_context(|| format!("reading {}", itinerary.display()))?;
            let it = Itinerary::from_json_str(&text).context("parsing itinerary")?;
            let perf = DronePerformance::default();
            validate_itinerary(&net, &perf, &it)?;
            println!("ok");
        }
    }
    Ok(())
}

fn error_name(e: &anyhow::Error) -> &'static str {
    if let Some(p) = e.downcast_ref::<PlanError>() {
        return p.name();
    }
    if let Some(v) = e.downcast_ref::<Violation>() {
        return v.name();
    }
    "Error"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e:#}", error_name(&e));
            ExitCode::FAILURE
        }
    }
}
