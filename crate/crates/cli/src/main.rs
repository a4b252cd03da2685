use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use goals_core::data::make_noisy_quadratic;
use goals_core::harness::analysis::{linspace, relative_robustness, snngpp_histogram};
use goals_core::harness::sweep::{
    accuracies_from_manifest, manifest_row, read_accuracy_table, read_manifest, sweep_configs, write_manifest,
};
use goals_core::harness::{train_run, RunConfig};
use goals_core::network::{gradient_check, MlpArchitecture};
use goals_core::{Error, StochasticOracle};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "goals",
    version,
    about = "Gradient-only line searches under dynamic mini-batch sub-sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one training job.
    Train(TrainArgs),
    /// Run every strategy x batch size x seed combination.
    Sweep(SweepArgs),
    /// Aggregate accuracies into a relative-robustness table.
    Robustness(RobustnessArgs),
    /// Sign-change histogram of a noisy quadratic's directional derivative.
    Histogram(HistogramArgs),
    /// Compare backpropagation against central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set strategy=gos`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Train on a reproducible random subset of this many samples.
    #[arg(long)]
    train_subset: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let cfg = self.load_unchecked()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Like `load`, for sweeps that still override some fields.
    fn load_unchecked(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                RunConfig::parse_unchecked(&text)?
            }
            None => RunConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(n) = self.train_subset {
            cfg.train_subset = Some(n);
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Where to write the run CSV; overrides `output`. Stdout when neither is set.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    strategies: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    batch_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RobustnessArgs {
    /// CSV of `strategy,problem,optimizer,accuracy`.
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    table: Option<PathBuf>,
    /// Sweep manifest; accuracies are final test accuracies averaged over seeds.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct HistogramArgs {
    #[arg(long, default_value_t = 2.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    batch: usize,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 4.0)]
    hi: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Layer sizes such as `4,8,3`; repeatable. Defaults to three small nets.
    #[arg(long = "sizes", value_name = "SIZES")]
    sizes: Vec<String>,
    #[arg(long, default_value_t = 20)]
    coords: usize,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_data_error() {
        EXIT_DATA
    } else {
        EXIT_CONFIG
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            message: e.to_string(),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn train(args: &TrainArgs) -> Result<u8, Error> {
    let mut cfg = args.config.load()?;
    if let Some(out) = &args.output {
        cfg.output = Some(out.clone());
    }
    let log = train_run(&cfg)?;
    write_or_print(cfg.output.as_deref(), &log.to_csv_string())?;
    if log.diverged {
        eprintln!("run diverged after {} evaluations", log.total_evals());
        return Ok(EXIT_DIVERGED);
    }
    Ok(0)
}

fn sweep(args: &SweepArgs) -> Result<u8, Error> {
    let base = args.config.load_unchecked()?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::Io {
        path: args.out_dir.clone(),
        message: e.to_string(),
    })?;
    let configs = sweep_configs(&base, &args.strategies, &args.batch_sizes, &args.seeds, &args.out_dir);
    for cfg in &configs {
        cfg.validate()?;
    }
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let log = train_run(cfg)?;
        let path = cfg.output.as_ref().expect("sweep sets output");
        log.save(path)?;
        eprintln!(
            "{} {} b{} seed {}: {} evaluations{}",
            cfg.strategy,
            cfg.direction,
            cfg.batch_size,
            cfg.seed,
            log.total_evals(),
            if log.diverged { ", diverged" } else { "" }
        );
        rows.push(manifest_row(cfg));
    }
    write_manifest(&args.out_dir.join("manifest.csv"), &rows)?;
    Ok(0)
}

fn robustness(args: &RobustnessArgs) -> Result<u8, Error> {
    let entries = match (&args.table, &args.manifest) {
        (Some(t), _) => read_accuracy_table(t)?,
        (None, Some(m)) => accuracies_from_manifest(&read_manifest(m)?)?,
        (None, None) => return Err(Error::Config("pass --table or --manifest".into())),
    };
    let table = relative_robustness(&entries)?;
    write_or_print(args.output.as_deref(), &table.to_csv())?;
    Ok(0)
}

fn histogram(args: &HistogramArgs) -> Result<u8, Error> {
    let problem = make_noisy_quadratic(args.mu, args.sigma, args.samples, args.seed)?;
    let mut oracle = StochasticOracle::new(&problem, args.batch, args.seed.wrapping_add(1))?;
    let grid = linspace(args.lo, args.hi, args.points);
    let h = snngpp_histogram(&mut oracle, &[0.0], &[1.0], &grid, args.trials)?;
    let mut out = String::from("alpha_lo,alpha_hi,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        out.push_str(&format!("{},{},{c}\n", h.grid[i], h.grid[i + 1]));
    }
    write_or_print(args.output.as_deref(), &out)?;
    eprintln!(
        "full-batch optimum {}, median crossing {}",
        problem.full_batch_optimum(),
        h.median().map_or_else(|| "none".into(), |m| m.to_string())
    );
    Ok(0)
}

fn parse_sizes(s: &str) -> Result<Vec<usize>, Error> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad layer size `{v}`")))
        })
        .collect()
}

fn gradcheck(args: &GradcheckArgs) -> Result<u8, Error> {
    let nets: Vec<Vec<usize>> = if args.sizes.is_empty() {
        vec![vec![4, 8, 3], vec![4, 8, 8, 3], vec![10, 16, 8, 5]]
    } else {
        args.sizes.iter().map(|s| parse_sizes(s)).collect::<Result<_, _>>()?
    };
    let mut ok = true;
    for sizes in nets {
        let arch = MlpArchitecture::new(sizes.clone())?;
        let check = gradient_check(&arch, args.coords, args.step, args.seed)?;
        let pass = check.max_relative_error <= args.tolerance;
        ok &= pass;
        println!(
            "{}: max relative error {:.3e} over {} coordinates: {}",
            sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("-"),
            check.max_relative_error,
            check.coordinates.len(),
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok(if ok { 0 } else { EXIT_CONFIG })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::Robustness(a) => robustness(a),
        Command::Histogram(a) => histogram(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
