//! `catlab` command-line front end.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use catlab_core::bench::{
    run_grid, write_outputs, write_reports, ExperimentGrid, RunOptions, WorkerPool,
};
use catlab_core::data::{load_csv, load_raw_columns, Schema};
use catlab_core::encoders::{fit_encoder, EncoderKind, EncoderSpec};
use catlab_core::guide::{recommend, GuidanceQuery, ModelFamily};
use catlab_core::metrics::{minaspl, read_records};
use catlab_core::models::{ModelKind, ModelSpec};
use catlab_core::synth::{run_aspl_sweep, Equation, SynthConfig};
use catlab_core::theory::{verify, Suite};

#[derive(Parser)]
#[command(name = "catlab", version, about = "Categorical encoder laboratory")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one encoder on one column and write its level table as CSV.
    Encode(EncodeArgs),
    /// Run a samples-per-level sweep on a synthetic season dataset.
    Sweep(SweepArgs),
    /// Run the theory check suites.
    Verify(VerifyArgs),
    /// Run a benchmark grid from a config file.
    Bench(BenchArgs),
    /// Recommend encoders for a model family and data sufficiency.
    Guide(GuideArgs),
    /// Rebuild the reports from an existing records.csv.
    Report(ReportArgs),
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    encoder: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    column: String,
    /// Numeric target column, required by target encoders.
    #[arg(long)]
    target: Option<String>,
    /// Schema sidecar; its target is used when --target is absent.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// TOML file with encoder hyperparameters (`kind` is taken from --encoder).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EquationArg {
    Eq3,
    Eq5,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "eq3")]
    equation: EquationArg,
    #[arg(long, default_value = "onehot")]
    encoder: String,
    /// Defaults to lnr for eq3 and rf for eq5.
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated ASPL values; defaults to 5,10,...,100.
    #[arg(long, value_delimiter = ',')]
    aspl: Option<Vec<usize>>,
    #[arg(long, default_value_t = 30)]
    seeds: usize,
    #[arg(long, default_value_t = 1000)]
    test_size: usize,
    /// Noise standard deviation for eq3.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Directory for sweep_rows.csv and sweep_aggregate.csv; the aggregate
    /// goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Theorem1,
    Splits,
    Contiguity,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: SuiteArg,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write per-instance rows as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record zero times so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Ati,
    Tree,
    Other,
}

#[derive(Args)]
struct GuideArgs {
    #[arg(long, value_enum)]
    model_family: FamilyArg,
    /// Required unless --csv and --schema are given.
    #[arg(long)]
    min_aspl: Option<f64>,
    #[arg(long)]
    time_sensitive: bool,
    /// Compute minASPL from this dataset.
    #[arg(long, requires = "schema")]
    csv: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode(a) => encode(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => run_verify(a),
        Command::Bench(a) => bench(a),
        Command::Guide(a) => guide(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn encode(a: EncodeArgs) -> Result<ExitCode> {
    let kind: EncoderKind = a.encoder.parse()?;
    let mut spec = match &a.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let mut s =
                EncoderSpec::from_config_str(&format!("kind = \"{}\"\n{text}", kind.name()))?;
            s.kind = kind;
            s
        }
        None => EncoderSpec::new(kind),
    };
    spec.kind = kind;
    let target = match (&a.target, &a.schema) {
        (Some(t), _) => Some(t.clone()),
        (None, Some(s)) => Some(Schema::from_file(s)?.target),
        (None, None) => None,
    };
    if kind.needs_target() && target.is_none() {
        bail!("encoder `{}` needs --target or --schema", kind.name());
    }
    let mut names = vec![a.column.clone()];
    names.extend(target.clone());
    let cols = load_raw_columns(&a.input, &names)?;
    let mut levels = Vec::new();
    let mut ys = Vec::new();
    for (i, cell) in cols[0].iter().enumerate() {
        let Some(level) = cell else { continue };
        if target.is_some() {
            let Some(raw) = &cols[1][i] else { continue };
            let y: f64 = raw.parse().with_context(|| {
                format!("target cell `{raw}` on data row {} is not a number", i + 1)
            })?;
            ys.push(y);
        }
        levels.push(level.as_str());
    }
    let y = if kind.needs_target() {
        Some(ys.as_slice())
    } else {
        None
    };
    let enc = fit_encoder(&spec, &levels, y)?;
    enc.write_audit_csv(output(a.out.as_deref())?)?;
    Ok(ExitCode::SUCCESS)
}

fn sweep(a: SweepArgs) -> Result<ExitCode> {
    let equation = match a.equation {
        EquationArg::Eq3 => Equation::Eq3,
        EquationArg::Eq5 => Equation::Eq5,
    };
    let model_kind: ModelKind = match &a.model {
        Some(m) => m.parse()?,
        None if equation == Equation::Eq3 => ModelKind::Lnr,
        None => ModelKind::Rf,
    };
    let encoder = EncoderSpec::new(a.encoder.parse()?);
    let mut config = SynthConfig::new(equation);
    if let Some(v) = a.aspl {
        config.aspl_values = v;
    }
    config.seeds_per_aspl = a.seeds;
    config.test_size = a.test_size;
    config.noise_sigma = a.sigma;
    config.seed = a.seed;
    let pool = WorkerPool::new(a.workers)?;
    let table = pool.install(|| run_aspl_sweep(&config, &ModelSpec::new(model_kind), &encoder))?;
    match &a.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            table.write_rows(File::create(dir.join("sweep_rows.csv"))?)?;
            table.write_aggregate(File::create(dir.join("sweep_aggregate.csv"))?)?;
            eprintln!(
                "wrote sweep_rows.csv and sweep_aggregate.csv to {}",
                dir.display()
            );
        }
        None => table.write_aggregate(io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn run_verify(a: VerifyArgs) -> Result<ExitCode> {
    let suite = match a.suite {
        SuiteArg::Theorem1 => Suite::Theorem1,
        SuiteArg::Splits => Suite::Splits,
        SuiteArg::Contiguity => Suite::Contiguity,
        SuiteArg::All => Suite::All,
    };
    let report = verify(suite, a.trials, a.seed)?;
    if let Some(p) = &a.out {
        report.write_csv(File::create(p).with_context(|| format!("creating {}", p.display()))?)?;
    }
    print!("{}", report.summary());
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn bench(a: BenchArgs) -> Result<ExitCode> {
    let mut grid = ExperimentGrid::from_file(&a.config)?;
    if let Some(s) = a.seed {
        grid.seed = s;
    }
    let out = a
        .out
        .or_else(|| grid.out.clone())
        .unwrap_or_else(|| PathBuf::from("bench_out"));
    let records = run_grid(
        &grid,
        RunOptions {
            workers: a.workers,
            timing: !a.no_timing,
        },
    )?;
    let summary = write_outputs(&out, &records)?;
    print!("{summary}");
    eprintln!("wrote {} records to {}", records.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn guide(a: GuideArgs) -> Result<ExitCode> {
    let min_aspl = match (a.min_aspl, &a.csv, &a.schema) {
        (Some(v), _, _) => v,
        (None, Some(csv), Some(schema)) => {
            let table = load_csv(csv, &Schema::from_file(schema)?)?;
            let v = minaspl(&table)?;
            println!("minASPL from {}: {v}", csv.display());
            v
        }
        _ => bail!("give --min-aspl, or --csv with --schema"),
    };
    let family = match a.model_family {
        FamilyArg::Ati => ModelFamily::Ati,
        FamilyArg::Tree => ModelFamily::Tree,
        FamilyArg::Other => ModelFamily::Other,
    };
    let rec = recommend(&GuidanceQuery {
        model_family: family,
        min_aspl,
        time_sensitive: a.time_sensitive,
    })?;
    print!("{rec}");
    Ok(ExitCode::SUCCESS)
}

fn report(a: ReportArgs) -> Result<ExitCode> {
    let file =
        File::open(&a.records).with_context(|| format!("opening {}", a.records.display()))?;
    let records = read_records(file)?;
    print!("{}", write_reports(&a.out, &records)?);
    Ok(ExitCode::SUCCESS)
}
