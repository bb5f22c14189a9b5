use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use oac_kmeans::experiment::{self, ExperimentSpec, ResourceParams, Variant};
use oac_kmeans::phy::ChannelKind;
use oac_kmeans::scenario::Scenario;

/// Federated k-means over a simulated wireless channel with non-coherent
/// over-the-air aggregation.
#[derive(Debug, Parser)]
#[command(version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print uplink resource counts with and without over-the-air aggregation.
    Resources(ResourceArgs),
    /// Generate the scenario and write its dataset as x,y,ed_index CSV.
    ExportScenario {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "points.csv")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON experiment description; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    beta: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    digits: Vec<u32>,
    #[arg(long = "snr-db", value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Vec<f64>,
    /// awgn, flat or selective
    #[arg(long, value_delimiter = ',')]
    channel: Vec<ChannelKind>,
    #[arg(long, value_delimiter = ',')]
    smin: Vec<u64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Sum updates exactly instead of over the air.
    #[arg(long)]
    perfect_aggregation: bool,
    #[arg(long)]
    baseline_only: bool,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved experiment as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Args)]
struct ResourceArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 100)]
    clusters: usize,
    #[arg(long, default_value_t = 100)]
    eds: usize,
    #[arg(long, default_value_t = 5)]
    beta: u32,
    #[arg(long, default_value_t = 2)]
    digits: u32,
    #[arg(long, default_value_t = 1.0)]
    r_bits: f64,
    #[arg(long, default_value_t = 0.2)]
    r_compression: f64,
    #[arg(long, default_value_t = 8.0)]
    n_bits: f64,
}

fn load_spec(path: Option<&PathBuf>) -> Result<ExperimentSpec> {
    match path {
        Some(p) => ExperimentSpec::from_json_file(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentSpec::default()),
    }
}

/// Replaces one field of every variant by each of `values`, keeping the
/// first occurrence of duplicates.
fn override_axis<T: Copy>(variants: Vec<Variant>, values: &[T], set: impl Fn(&mut Variant, T)) -> Vec<Variant> {
    if values.is_empty() {
        return variants;
    }
    let mut out: Vec<Variant> = Vec::new();
    for v in variants {
        for &x in values {
            let mut w = v;
            set(&mut w, x);
            if !out.iter().any(|o| o.label() == w.label()) {
                out.push(w);
            }
        }
    }
    out
}

fn resolve(args: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = load_spec(args.config.as_ref())?;
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if let Some(rounds) = args.rounds {
        spec.algorithm.rounds = rounds;
    }
    if let Some(mu) = args.mu {
        spec.algorithm.learning_rate = mu;
    }
    if let Some(alpha) = args.alpha {
        spec.algorithm.alpha = alpha;
    }
    if let Some(reps) = args.reps {
        spec.repetitions = reps;
    }
    if let Some(out) = &args.out {
        spec.output_dir = out.clone();
    }
    spec.baseline_only |= args.baseline_only;

    let mut v = std::mem::take(&mut spec.variants);
    v = override_axis(v, &args.beta, |v, x| v.beta = x);
    v = override_axis(v, &args.digits, |v, x| v.digits = x);
    v = override_axis(v, &args.snr_db, |v, x| v.snr_db = Some(x));
    v = override_axis(v, &args.channel, |v, x| v.channel = x);
    v = override_axis(v, &args.smin, |v, x| v.s_min = x);
    if args.perfect_aggregation {
        v = override_axis(v, &[true], |v, x| v.perfect = x);
    }
    spec.variants = v;
    spec.validate()?;
    Ok(spec)
}

fn run(args: &RunArgs) -> Result<()> {
    let spec = resolve(args)?;
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&spec)?);
        return Ok(());
    }
    let manifest = experiment::run_experiment(&spec)
        .with_context(|| format!("running experiment into {}", spec.output_dir.display()))?;

    println!("baseline final loss {:.3}", manifest.baseline_final_loss);
    for v in &manifest.variants {
        let mean = v.final_losses.iter().sum::<f64>() / v.final_losses.len() as f64;
        println!("{:<36} mean final loss {mean:.3}", v.label);
    }
    println!("results written to {}", spec.output_dir.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Some(Command::Resources(a)) => {
            let r = experiment::resource_report(&ResourceParams {
                dim: a.dim,
                num_clusters: a.clusters,
                num_eds: a.eds,
                beta: a.beta,
                digits: a.digits,
                r_bits: a.r_bits,
                r_compression: a.r_compression,
                n_bits: a.n_bits,
            })?;
            println!("oac_resources {}", r.oac);
            println!("non_oac_resources {}", r.non_oac);
        }
        Some(Command::ExportScenario { config, out }) => {
            let spec = load_spec(config.as_ref())?;
            let scenario = Scenario::generate(&spec.scenario)?;
            scenario.export_csv(&out)?;
            println!("{} points written to {}", scenario.pooled.len(), out.display());
        }
        None => run(&cli.run)?,
    }
    Ok(())
}
