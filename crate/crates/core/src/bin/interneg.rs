use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use interneg::pipeline::{self, Ratio, RunConfig};
use interneg::synth::{generate, OodMode, WorldSpec};
use interneg::{Error, Result, SelectionMode};

#[derive(Parser)]
#[command(
    name = "interneg",
    version,
    about = "Inter-modal negative label OOD detection"
)]
struct Cli {
    /// JSON config file (a run config, or a world spec for `synth`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for data-parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic embedding world.
    Synth(SynthArgs),
    /// Build proxies and select negative texts.
    Select(RunArgs),
    /// Score every test sample and write scores.tsv.
    Score {
        #[command(flatten)]
        run: RunArgs,
        /// Write the final extra-negative pool here (EMB1 + .tsv).
        #[arg(long, value_name = "PATH")]
        dump_pool: Option<PathBuf>,
    },
    /// Score and evaluate against ground truth.
    Eval(RunArgs),
    /// Evaluate at several ID:OOD ratios.
    Imbalance {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated ratios, e.g. 1:10,1:1,10:1.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<Ratio>>,
    },
    /// Check the inversion gradient and convergence.
    InvertTest {
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 20)]
        cases: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Inter,
    Intra,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// Library defaults: N=16, M=2000, K=2000, tau=1, beta=0.35.
    Default,
    /// Settings calibrated for the synthetic reference world.
    Reference,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ood {
    Far,
    Near,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    ood_mode: Option<Ood>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Defaults used when no config file is given.
    #[arg(long, value_enum, default_value = "default")]
    profile: Profile,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    sample_n: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    capacity: Option<usize>,
    /// Score with the dynamic extra-negative pool.
    #[arg(long, conflicts_with = "no_stream")]
    stream: bool,
    #[arg(long)]
    no_stream: bool,
    #[arg(long)]
    permutation_seed: Option<u64>,
    /// Use a saved selection instead of selecting.
    #[arg(long)]
    negatives: Option<PathBuf>,
}

fn run_config(cli: &Cli, args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => match args.profile {
            Profile::Default => RunConfig::default(),
            Profile::Reference => RunConfig::reference_fixture(),
        },
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.inversion.seed = seed;
        cfg.encoder.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(v) = &args.manifest {
        cfg.manifest = v.clone();
    }
    if let Some(v) = args.mode {
        cfg.mode = match v {
            Mode::Inter => SelectionMode::InterModal,
            Mode::Intra => SelectionMode::IntraModalBaseline,
        };
    }
    if let Some(v) = args.m {
        cfg.m = v;
    }
    if let Some(v) = args.sample_n {
        cfg.sample_n = v;
    }
    if let Some(v) = args.tau {
        cfg.tau = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = v;
    }
    if let Some(v) = args.capacity {
        cfg.capacity = v;
    }
    if args.stream {
        cfg.stream = true;
    }
    if args.no_stream {
        cfg.stream = false;
    }
    if args.permutation_seed.is_some() {
        cfg.permutation_seed = args.permutation_seed;
    }
    if args.negatives.is_some() {
        cfg.negatives = args.negatives.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let mut spec = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => WorldSpec::reference(),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(mode) = args.ood_mode {
        spec.ood_mode = match mode {
            Ood::Far => OodMode::Far,
            Ood::Near => OodMode::Near,
        };
    }
    if let Some(d) = args.dim {
        spec.dim = d;
    }
    if let Some(c) = args.classes {
        spec.classes = c;
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("fixture"));
    let world = generate(&spec)?;
    world.write(&dir)?;
    println!(
        "wrote {}",
        dir.join(interneg::synth::MANIFEST_FILE).display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Synth(args) => synth(cli, args),
        Command::Select(args) => {
            let cfg = run_config(cli, args)?;
            let prepared = pipeline::cmd_select(&cfg)?;
            println!(
                "selected {} negatives into {}",
                prepared.negatives.len(),
                cfg.out.display()
            );
            Ok(())
        }
        Command::Score { run, dump_pool } => {
            let cfg = run_config(cli, run)?;
            let scored = pipeline::cmd_score(&cfg, dump_pool.as_deref())?;
            println!(
                "scored {} samples into {}",
                scored.records.len(),
                cfg.out.join("scores.tsv").display()
            );
            Ok(())
        }
        Command::Eval(args) => {
            let cfg = run_config(cli, args)?;
            let report = pipeline::cmd_eval(&cfg)?;
            println!(
                "auroc {:.6} fpr95 {:.6} ({} ID, {} OOD)",
                report.auroc, report.fpr95, report.n_id, report.n_ood
            );
            Ok(())
        }
        Command::Imbalance { run, ratios } => {
            let cfg = run_config(cli, run)?;
            let ratios = ratios.clone().unwrap_or_else(Ratio::standard);
            for (ratio, report) in pipeline::cmd_imbalance(&cfg, &ratios)? {
                println!(
                    "{ratio}\tauroc {:.6}\tfpr95 {:.6}",
                    report.auroc, report.fpr95
                );
            }
            Ok(())
        }
        Command::InvertTest { dim, cases } => {
            let check = pipeline::invert_check(*dim, *cases, cli.seed.unwrap_or(0))?;
            println!("{}", serde_json::to_string_pretty(&check)?);
            match (check.gradient_pass, check.convergence_pass) {
                (true, true) => Ok(()),
                (false, _) => Err(Error::CheckFailed(format!(
                    "gradient relative error {:e}",
                    check.worst_relative_error
                ))),
                (true, false) => Err(Error::CheckFailed(format!(
                    "final cosine {}",
                    check.worst_final_cosine
                ))),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
