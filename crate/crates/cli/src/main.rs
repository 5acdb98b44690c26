//! `impute`: simulate missingness, impute CSV files and run seeded
//! benchmark experiments.
//!
//! Exit codes: 0 success, 2 invalid spec or arguments, 3 data error,
//! 4 some runs failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use impute_core::data::{
    read_csv, read_mask_csv, write_csv, write_csv_string, write_incomplete_csv, write_mask_csv, CsvOptions, DataError,
    IncompleteDataset, Sidecar,
};
use impute_core::engine::{run_ablation, run_hyperimpute};
use impute_core::harness::{
    convergence_report, gnuplot_script, make_synth, parse_method_list, parse_selection_log, parse_trace,
    run_experiment, selection_report, sensitivity_sweep, sweep_csv, DatasetSource, ExperimentReport,
    ExperimentSpec, HarnessError, Method, SpecError, Stratum, SweepAxis, SynthKind, TaggedLog,
};
use impute_core::learners::LearnerClass;
use impute_core::search::SearchStrategy;
use impute_core::simulate::{simulate, Mechanism, MissingnessSpec};

#[derive(Parser)]
#[command(name = "impute", version, about = "Iterative imputation with per-column model search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mask a complete CSV with a missingness mechanism.
    Simulate(SimulateArgs),
    /// Impute the missing cells of a CSV.
    Impute(ImputeArgs),
    /// Run a seeded multi-run benchmark.
    Benchmark(ExperimentArgs),
    /// Run the ablation suite (defaults the method list to every setting).
    Ablate(AblateArgs),
    /// Rerun an experiment along one axis.
    Sweep(SweepArgs),
    /// Tally selected learner classes from experiment outputs.
    SelectionReport(SelectionArgs),
    /// Flatten convergence traces into a plot-ready CSV.
    ConvergenceReport(ConvergenceArgs),
    /// Write a synthetic complete dataset.
    MakeSynth(SynthArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Complete CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[arg(long, default_value = "mcar")]
    mechanism: String,
    #[arg(long, default_value_t = 0.3)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `masked.csv` and `mask.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct StrategyArgs {
    /// naive, random or hyperband.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    eta: Option<u32>,
    #[arg(long)]
    max_resource: Option<u32>,
    /// Sample count of the random strategy.
    #[arg(long)]
    n_samples: Option<usize>,
}

#[derive(Args)]
struct ImputeArgs {
    /// CSV with empty or NA cells.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Optional 0/1 mask CSV; cells marked 0 are treated as missing too.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value = "hyperimpute")]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML experiment config whose `[engine]` table is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Imputed CSV.
    #[arg(long)]
    out: PathBuf,
    /// Selection log JSON, for engine methods.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Convergence trace JSON, for engine methods.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// TOML experiment config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Complete CSV used as ground truth.
    #[arg(long, conflicts_with = "synth")]
    data: Option<PathBuf>,
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Synthetic generator name instead of a CSV.
    #[arg(long)]
    synth: Option<String>,
    #[arg(long, default_value_t = 1000)]
    synth_n: usize,
    #[arg(long, default_value_t = 5)]
    synth_d: usize,
    /// Comma-separated mechanisms.
    #[arg(long)]
    mechanism: Option<String>,
    /// Comma-separated rates.
    #[arg(long)]
    rate: Option<String>,
    /// Number of seeds per cell.
    #[arg(long)]
    seeds: Option<usize>,
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated methods, e.g. `hyperimpute,mean,knn(k=5)`.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Class kept by the wo_flexibility setting.
    #[arg(long, default_value = "random_forest")]
    wo_flexibility_class: String,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// sample_count, feature_count or rate.
    #[arg(long)]
    axis: String,
    /// Comma-separated grid values.
    #[arg(long)]
    grid: String,
}

#[derive(Args)]
struct SelectionArgs {
    /// Experiment output directories or selection log files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// rate, sample_count or iteration.
    #[arg(long, default_value = "iteration")]
    by: String,
    /// Only runs of this method.
    #[arg(long)]
    method: Option<String>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Experiment output directories or trace files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script plotting this column.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
    #[arg(long, default_value = "objective")]
    plot_column: String,
}

#[derive(Args)]
struct SynthArgs {
    /// gaussian, benchmark, linear, nonlinear or mixed_signal.
    #[arg(long, default_value = "gaussian")]
    kind: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    d: usize,
    /// Correlation parameter of the gaussian generator.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Spec(String),
    Data(String),
    RunsFailed(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Spec(_) => 2,
            Failure::Data(_) => 3,
            Failure::RunsFailed(_) => 4,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Spec(_) => Failure::Spec(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Failure::Spec(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn spec_err(m: impl std::fmt::Display) -> Failure {
    Failure::Spec(m.to_string())
}

fn write_file(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn csv_options(sidecar: Option<&PathBuf>) -> Result<CsvOptions, Failure> {
    Ok(CsvOptions {
        sidecar: sidecar.map(Sidecar::read).transpose()?,
        ..CsvOptions::default()
    })
}

fn parse_mechanism(text: &str) -> Result<Mechanism, Failure> {
    Mechanism::parse(text).ok_or_else(|| spec_err(format!("unknown mechanism '{text}'")))
}

fn apply_strategy(base: SearchStrategy, args: &StrategyArgs) -> Result<SearchStrategy, Failure> {
    let (eta0, r0) = match base {
        SearchStrategy::Hyperband { eta, max_resource } => (eta, max_resource),
        _ => (3, 27),
    };
    let strategy = match args.strategy.as_deref().map(str::to_ascii_lowercase).as_deref() {
        Some("naive") => SearchStrategy::Naive,
        Some("random") => SearchStrategy::Random {
            n_samples: args.n_samples.unwrap_or(20),
        },
        Some("hyperband") => SearchStrategy::Hyperband {
            eta: args.eta.unwrap_or(eta0),
            max_resource: args.max_resource.unwrap_or(r0),
        },
        Some(other) => return Err(spec_err(format!("unknown strategy '{other}'"))),
        None => match base {
            SearchStrategy::Hyperband { .. } => SearchStrategy::Hyperband {
                eta: args.eta.unwrap_or(eta0),
                max_resource: args.max_resource.unwrap_or(r0),
            },
            SearchStrategy::Random { n_samples } => SearchStrategy::Random {
                n_samples: args.n_samples.unwrap_or(n_samples),
            },
            SearchStrategy::Naive => SearchStrategy::Naive,
        },
    };
    strategy.validate().map_err(spec_err)?;
    Ok(strategy)
}

fn build_spec(args: &ExperimentArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &args.config {
        Some(path) => ExperimentSpec::from_toml_file(path)?,
        None => ExperimentSpec::default(),
    };
    if let Some(path) = &args.data {
        spec.dataset = Some(DatasetSource::File {
            path: path.clone(),
            sidecar: args.sidecar.clone(),
        });
    }
    if let Some(name) = &args.synth {
        let generator = SynthKind::parse(name).ok_or_else(|| spec_err(format!("unknown generator '{name}'")))?;
        spec.dataset = Some(DatasetSource::Synth {
            generator,
            n: args.synth_n,
            d: args.synth_d,
            seed: args.seed.unwrap_or(spec.seed),
        });
    }
    if let Some(m) = &args.mechanism {
        spec.mechanisms = m.split(',').map(parse_mechanism).collect::<Result<_, _>>()?;
    }
    if let Some(r) = &args.rate {
        spec.rates = r
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| spec_err(format!("invalid rate '{v}'"))))
            .collect::<Result<_, _>>()?;
    }
    if let Some(n) = args.seeds {
        spec.n_seeds = n;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(m) = &args.methods {
        spec.methods = parse_method_list(m).map_err(spec_err)?;
    }
    if let Some(w) = args.workers {
        spec.workers = w;
    }
    if let Some(o) = &args.out {
        spec.out = Some(o.clone());
    }
    spec.engine.strategy = apply_strategy(spec.engine.strategy, &args.strategy)?;
    spec.validate()?;
    Ok(spec)
}

fn finish_report(report: &ExperimentReport) -> Outcome {
    println!("{}", report.summary_csv().trim_end());
    let failed = report.runs.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        for r in report.runs.iter().filter(|r| r.failed()) {
            eprintln!(
                "run failed: {} {} {} #{}: {}",
                r.mechanism.name(),
                r.rate,
                r.method,
                r.run,
                r.error.as_deref().unwrap_or("")
            );
        }
        return Err(Failure::RunsFailed(failed));
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Outcome {
    let ds = read_csv(&args.data, &csv_options(args.sidecar.as_ref())?)?;
    if ds.mask().n_missing() > 0 {
        return Err(Failure::Data("input must be complete".into()));
    }
    let spec = MissingnessSpec::new(parse_mechanism(&args.mechanism)?, args.rate, args.seed);
    spec.validate().map_err(spec_err)?;
    let values = ds.values().to_owned();
    let mask = simulate(values.view(), &spec).map_err(|e| Failure::Data(e.to_string()))?;
    let masked = IncompleteDataset::new(values, mask.clone(), ds.schema().clone())?;
    fs::create_dir_all(&args.out).map_err(|e| Failure::Data(e.to_string()))?;
    write_incomplete_csv(&masked, args.out.join("masked.csv"))?;
    write_mask_csv(&mask, ds.names(), args.out.join("mask.csv"))?;
    eprintln!(
        "masked {} of {} cells",
        mask.n_missing(),
        masked.n_rows() * masked.n_cols()
    );
    Ok(())
}

fn cmd_impute(args: ImputeArgs) -> Outcome {
    let mut ds = read_csv(&args.data, &csv_options(args.sidecar.as_ref())?)?;
    if let Some(path) = &args.mask {
        let (names, mask) = read_mask_csv(path)?;
        if names != ds.names() {
            return Err(Failure::Data("mask header does not match the data header".into()));
        }
        let mask = ds.mask().intersect(&mask)?;
        ds = IncompleteDataset::new(ds.values().to_owned(), mask, ds.schema().clone())?;
    }
    let mut engine = match &args.config {
        Some(path) => ExperimentSpec::from_toml_file(path)?.engine,
        None => Default::default(),
    };
    engine.strategy = apply_strategy(engine.strategy, &args.strategy)?;
    engine.validate().map_err(spec_err)?;
    let method: Method = args.method.parse().map_err(spec_err)?;
    let output = match method {
        Method::HyperImpute => run_hyperimpute(&ds, &engine, args.seed),
        Method::Ablation(setting) => run_ablation(&ds, setting, &engine, args.seed, Default::default()),
        Method::Baseline(kind) => {
            let imputed = impute_core::baselines::run_baseline(&ds, kind, &engine, args.seed)
                .map_err(|e| Failure::Data(e.to_string()))?;
            write_csv(&imputed, &args.out)?;
            return Ok(());
        }
    }
    .map_err(|e| Failure::Data(e.to_string()))?;
    write_file(&args.out, &write_csv_string(&output.imputed)?)?;
    if let Some(p) = &args.log {
        write_file(p, &serde_json::to_string_pretty(&output.log).expect("log serializes"))?;
    }
    if let Some(p) = &args.trace {
        write_file(p, &serde_json::to_string_pretty(&output.trace).expect("trace serializes"))?;
    }
    eprintln!(
        "{} iterations, stop: {:?}, {} learner fits",
        output.trace.iterations(),
        output.trace.stop,
        output.stats.fits()
    );
    Ok(())
}

fn cmd_benchmark(args: ExperimentArgs) -> Outcome {
    let spec = build_spec(&args)?;
    let outcome = run_experiment(&spec)?;
    finish_report(&outcome.report)
}

fn cmd_ablate(args: AblateArgs) -> Outcome {
    let class = LearnerClass::parse(&args.wo_flexibility_class)
        .ok_or_else(|| spec_err(format!("unknown class '{}'", args.wo_flexibility_class)))?;
    let mut spec = build_spec(&args.experiment)?;
    if args.experiment.methods.is_none() && args.experiment.config.is_none() {
        spec.methods = Method::ablation_suite(class);
    }
    let outcome = run_experiment(&spec)?;
    finish_report(&outcome.report)
}

fn cmd_sweep(args: SweepArgs) -> Outcome {
    let axis = SweepAxis::parse(&args.axis).ok_or_else(|| spec_err(format!("unknown axis '{}'", args.axis)))?;
    let grid: Vec<f64> = args
        .grid
        .split(',')
        .map(|v| v.trim().parse().map_err(|_| spec_err(format!("invalid grid value '{v}'"))))
        .collect::<Result<_, _>>()?;
    let spec = build_spec(&args.experiment)?;
    let points = sensitivity_sweep(&spec, axis, &grid)?;
    let table = sweep_csv(&points);
    match &spec.out {
        Some(dir) => write_file(&dir.join("sweep.csv"), &table)?,
        None => print!("{table}"),
    }
    let failed: usize = points
        .iter()
        .map(|p| p.outcome.report.runs.iter().filter(|r| r.failed()).count())
        .sum();
    if failed > 0 {
        return Err(Failure::RunsFailed(failed));
    }
    Ok(())
}

/// Selection logs and traces referenced by an experiment directory.
fn experiment_runs(dir: &Path, method: Option<&Method>) -> Result<Vec<(ExperimentReport, usize)>, Failure> {
    let report = ExperimentReport::from_json(&read_file(&dir.join("report.json"))?)?;
    let picked: Vec<usize> = report
        .runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.selection_file.is_some() && method.is_none_or(|m| &r.method == m))
        .map(|(i, _)| i)
        .collect();
    Ok(picked.into_iter().map(|i| (report.clone(), i)).collect())
}

fn output(out: Option<&PathBuf>, text: &str) -> Outcome {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_selection_report(args: SelectionArgs) -> Outcome {
    let by = Stratum::parse(&args.by).ok_or_else(|| spec_err(format!("unknown stratum '{}'", args.by)))?;
    let method: Option<Method> = args.method.as_deref().map(str::parse).transpose().map_err(spec_err)?;
    let mut logs = Vec::new();
    for input in &args.inputs {
        if input.is_dir() {
            for (report, i) in experiment_runs(input, method.as_ref())? {
                let run = &report.runs[i];
                let path = input.join(run.selection_file.as_ref().expect("filtered"));
                logs.push(TaggedLog {
                    rate: Some(run.rate),
                    sample_count: Some(report.dataset.rows),
                    log: parse_selection_log(&read_file(&path)?)?,
                });
            }
        } else {
            logs.push(TaggedLog::untagged(parse_selection_log(&read_file(input)?)?));
        }
    }
    let report = selection_report(&logs, by)?;
    output(args.out.as_ref(), &report.to_csv())
}

fn cmd_convergence_report(args: ConvergenceArgs) -> Outcome {
    let method: Option<Method> = args.method.as_deref().map(str::parse).transpose().map_err(spec_err)?;
    let mut traces = Vec::new();
    for input in &args.inputs {
        if input.is_dir() {
            for (report, i) in experiment_runs(input, method.as_ref())? {
                let run = &report.runs[i];
                let path = input.join(run.trace_file.as_ref().expect("engine runs have traces"));
                traces.push((run.stem(), parse_trace(&read_file(&path)?)?));
            }
        } else {
            let label = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            traces.push((label, parse_trace(&read_file(input)?)?));
        }
    }
    let refs: Vec<(String, &_)> = traces.iter().map(|(l, t)| (l.clone(), t)).collect();
    let table = convergence_report(&refs);
    output(args.out.as_ref(), &table)?;
    if let Some(script) = &args.gnuplot {
        let csv_name = args
            .out
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "convergence.csv".into());
        let png = script.with_extension("png").display().to_string();
        write_file(script, &gnuplot_script(&csv_name, &args.plot_column, &png))?;
    }
    Ok(())
}

fn cmd_make_synth(args: SynthArgs) -> Outcome {
    let kind = match SynthKind::parse(&args.kind) {
        Some(SynthKind::Gaussian { .. }) if !(args.rho.abs() < 1.0) => {
            return Err(spec_err("rho must lie in (-1, 1)"));
        }
        Some(SynthKind::Gaussian { .. }) => SynthKind::Gaussian { rho: args.rho },
        Some(k) => k,
        None => return Err(spec_err(format!("unknown generator '{}'", args.kind))),
    };
    if args.n < 1 || kind.width(args.d) < 2 {
        return Err(spec_err("need n >= 1 and at least 2 columns"));
    }
    let (values, schema) = make_synth(kind, args.n, args.d, args.seed);
    let mask = impute_core::data::Mask::all_observed(values.nrows(), values.ncols());
    let ds = IncompleteDataset::new(values, mask, schema)?;
    write_incomplete_csv(&ds, &args.out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Impute(a) => cmd_impute(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::SelectionReport(a) => cmd_selection_report(a),
        Command::ConvergenceReport(a) => cmd_convergence_report(a),
        Command::MakeSynth(a) => cmd_make_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Spec(m) => eprintln!("error: {m}"),
                Failure::Data(m) => eprintln!("error: {m}"),
                Failure::RunsFailed(n) => eprintln!("{n} run(s) failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
