use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use limid_core::benchmarks::{
    family_closed_form, gen_chd, nmonitoring, pigfarm, solve_per_prior, BenchmarkError, ChdParams, ChdSolver, Parameters,
};
use limid_core::emit::{read_solution, write_lp, write_mps, EmitError};
use limid_core::formulation::{
    build_improved, build_original, predicted_improved, predicted_original, stats, FormulationError, FormulationKind,
    FormulationStats, ImprovedOptions, LowerBoundMode, ModelIR, OriginalOptions,
};
use limid_core::io::{DiagramDocument, IoError};
use limid_core::paths::{enumerate_paths, PathError, PathTable, DEFAULT_PATH_CAP};
use limid_core::solvers::{brute_force, spu_multistart, SolverError, DEFAULT_STRATEGY_CAP};

const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Serialize)]
#[command(name = "limid", version, about = "Influence diagram to MILP compiler and strategy solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Check a diagram file and summarize it
    Validate { file: PathBuf },
    /// Print model sizes of both formulations
    Stats(StatsArgs),
    /// Write a formulation as an LP or MPS file
    Emit(EmitArgs),
    /// Find a strategy with brute force or SPU, or import a solver's solution
    Solve(SolveArgs),
    /// Compare brute force and SPU on random benchmark instances (CSV)
    Bench(BenchArgs),
    /// Write a benchmark instance as a diagram file
    Generate(GenerateArgs),
    /// Solve the CHD testing model once per prior risk level
    Chd(ChdArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Formulation {
    Original,
    Improved,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LowerBound {
    Auto,
    On,
    Off,
}

#[derive(Args, Serialize)]
struct ModelFlags {
    /// Lower-bound rows of the original formulation
    #[arg(long, value_enum, default_value = "auto")]
    lower_bound: LowerBound,
    /// Drop the probability row from the improved formulation
    #[arg(long)]
    no_probcut: bool,
    /// Add the probability row to the original formulation
    #[arg(long)]
    original_probcut: bool,
    /// Maximum number of candidate paths to enumerate
    #[arg(long, default_value_t = DEFAULT_PATH_CAP as u64)]
    path_cap: u64,
}

#[derive(Args, Serialize)]
struct StatsArgs {
    file: PathBuf,
    /// Only this formulation (default: both)
    #[arg(long, value_enum)]
    formulation: Option<Formulation>,
    #[command(flatten)]
    model: ModelFlags,
    /// Print JSON instead of a table
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Lp,
    Mps,
}

#[derive(Args, Serialize)]
struct EmitArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value = "improved")]
    formulation: Formulation,
    #[arg(long, value_enum, default_value = "lp")]
    format: Format,
    /// Output path (default: standard output)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum Method {
    Brute,
    Spu,
}

#[derive(Args, Serialize)]
struct SolveArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value = "spu")]
    method: Method,
    #[arg(long, default_value_t = 10)]
    restarts: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Map an external solver's `name value` solution back to a strategy
    #[arg(long)]
    import_solution: Option<PathBuf>,
    /// Maximum number of strategies brute force may examine
    #[arg(long, default_value_t = DEFAULT_STRATEGY_CAP as u64)]
    strategy_cap: u64,
    #[arg(long, default_value_t = DEFAULT_PATH_CAP as u64)]
    path_cap: u64,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Family {
    Pigfarm,
    Nmonitoring,
}

impl Family {
    fn generate(self, n: usize, params: Parameters) -> limid_core::diagram::InfluenceDiagram {
        match self {
            Family::Pigfarm => pigfarm(n, params),
            Family::Nmonitoring => nmonitoring(n, params),
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum BenchMethod {
    Brute,
    Spu,
    Both,
}

#[derive(Args, Serialize)]
struct BenchArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    instances: u64,
    /// Instance i is generated from seed + i
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "both")]
    method: BenchMethod,
    #[arg(long, default_value_t = 10)]
    restarts: u64,
    /// Utilities on [-1, 1] instead of [0, 1]
    #[arg(long)]
    signed: bool,
    /// Leave the wall-time column empty so output is byte-reproducible
    #[arg(long)]
    no_timing: bool,
    #[arg(long, default_value_t = DEFAULT_STRATEGY_CAP as u64)]
    strategy_cap: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GenFamily {
    Pigfarm,
    Nmonitoring,
    Chd,
}

#[derive(Args, Serialize)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: GenFamily,
    /// Family size; risk levels for CHD
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random parameters instead of the documented defaults
    #[arg(long)]
    random: bool,
    #[arg(long)]
    signed: bool,
    /// CHD only: pin the prior risk level
    #[arg(long)]
    prior_level: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ChdArgs {
    #[arg(long, default_value_t = 6)]
    risk_levels: usize,
    #[arg(long, value_enum, default_value = "brute")]
    method: Method,
    #[arg(long, default_value_t = 10)]
    restarts: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

/// Failure with its exit status.
enum Failure {
    Validation(String),
    Capacity(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Capacity(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Capacity(m) | Failure::Io(m) => m,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Parse(_) => Failure::Io(e.to_string()),
            IoError::Paths(p) => p.into(),
            IoError::Diagram(_) => Failure::Validation(e.to_string()),
        }
    }
}

impl From<PathError> for Failure {
    fn from(e: PathError) -> Self {
        match e {
            PathError::PathExplosion { .. } => Failure::Capacity(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::StrategySpaceTooLarge { .. } => Failure::Capacity(e.to_string()),
            SolverError::TableMismatch => Failure::Validation(e.to_string()),
        }
    }
}

impl From<FormulationError> for Failure {
    fn from(e: FormulationError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<EmitError> for Failure {
    fn from(e: EmitError) -> Self {
        match e {
            EmitError::UnknownVariable { .. } | EmitError::Malformed { .. } => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<BenchmarkError> for Failure {
    fn from(e: BenchmarkError) -> Self {
        match e {
            BenchmarkError::Paths(p) => p.into(),
            BenchmarkError::Solver(s) => s.into(),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load(path: &Path) -> Result<DiagramDocument, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    Ok(DiagramDocument::from_json_str(&text)?)
}

fn paths_of(doc: &DiagramDocument, cap: u64) -> Result<PathTable, Failure> {
    Ok(enumerate_paths(&doc.diagram, &doc.enumeration_options(cap as u128))?)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn provenance(flags: &impl Serialize) -> serde_json::Value {
    json!({ "toolkit_version": TOOLKIT_VERSION, "flags": flags })
}

fn plural(n: usize, word: &str) -> String {
    format!("{n} {word}{}", if n == 1 { "" } else { "s" })
}

fn build(doc: &DiagramDocument, table: &PathTable, kind: Formulation, flags: &ModelFlags) -> Result<ModelIR, Failure> {
    Ok(match kind {
        Formulation::Original => build_original(
            &doc.diagram,
            table,
            OriginalOptions {
                lower_bound: match flags.lower_bound {
                    LowerBound::Auto => LowerBoundMode::Auto,
                    LowerBound::On => LowerBoundMode::On,
                    LowerBound::Off => LowerBoundMode::Off,
                },
                probability_cut: flags.original_probcut,
            },
        )?,
        Formulation::Improved => {
            build_improved(&doc.diagram, table, ImprovedOptions { probability_cut: !flags.no_probcut })?
        }
    })
}

fn validate(file: &Path) -> Result<(), Failure> {
    let doc = load(file)?;
    let d = &doc.diagram;
    println!("{}, {}, |S|={}", plural(d.path_len(), "path node"), plural(d.value_nodes().len(), "value node"), d.path_count());
    println!("{} chance, {} decision", d.chance_nodes().len(), d.decision_nodes().len());
    for w in d.warnings() {
        println!("{w}");
    }
    if !doc.forbidden.is_empty() {
        println!("{}", plural(doc.forbidden.len(), "forbidden pattern"));
    }
    Ok(())
}

#[derive(Serialize)]
struct StatsRow {
    formulation: FormulationKind,
    #[serde(flatten)]
    stats: FormulationStats,
    predicted: u128,
    family_closed_form: Option<u128>,
}

fn cmd_stats(args: &StatsArgs) -> Result<(), Failure> {
    let doc = load(&args.file)?;
    let table = paths_of(&doc, args.model.path_cap)?;
    let kinds = match args.formulation {
        Some(k) => vec![k],
        None => vec![Formulation::Original, Formulation::Improved],
    };
    let mut rows = Vec::new();
    for kind in kinds {
        let model = build(&doc, &table, kind, &args.model)?;
        let (fk, predicted) = match kind {
            Formulation::Original => (FormulationKind::Original, predicted_original(&doc.diagram)),
            Formulation::Improved => (FormulationKind::Improved, predicted_improved(&doc.diagram)),
        };
        let family = doc.family.as_ref().and_then(|f| family_closed_form(&f.name, f.n, fk));
        rows.push(StatsRow { formulation: fk, stats: stats(&model), predicted, family_closed_form: family });
    }
    if args.json {
        let mut out = provenance(args);
        out["paths"] = json!(table.len());
        out["formulations"] = json!(rows);
        println!("{}", serde_json::to_string_pretty(&out).unwrap());
        return Ok(());
    }
    println!("|S|={} effective={} |D|={}", doc.diagram.path_count(), table.len(), doc.diagram.decision_nodes().len());
    println!(
        "{:<10} {:>8} {:>10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10}",
        "form", "binary", "continuous", "rows", "bounds", "onehot", "local", "lower", "probcut", "total", "predicted"
    );
    for r in &rows {
        let s = &r.stats;
        println!(
            "{:<10} {:>8} {:>10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10}",
            r.formulation.to_string(),
            s.n_binary,
            s.n_continuous,
            s.n_constraints,
            s.n_bounds,
            s.one_hot_rows,
            s.local_rows,
            s.lower_bound_rows,
            s.probability_cut_rows,
            s.headline_total,
            r.predicted
        );
        if let Some(c) = r.family_closed_form {
            let verdict = if c == s.headline_total as u128 { "matches" } else { "differs" };
            println!("  family closed form {c}: {verdict}");
            if c != s.headline_total as u128 && r.formulation == FormulationKind::Original && s.lower_bound_rows == 0 {
                println!("  (the closed form counts lower-bound rows; rerun with --lower-bound on)");
            }
        }
    }
    if let [o, i] = rows.as_slice() {
        let (o, i) = (o.stats.headline_total, i.stats.headline_total);
        let cmp = if i < o { "smaller" } else if i == o { "equal" } else { "larger" };
        println!("improved is {cmp} than original ({i} vs {o})");
    }
    Ok(())
}

fn cmd_emit(args: &EmitArgs) -> Result<(), Failure> {
    let doc = load(&args.file)?;
    let table = paths_of(&doc, args.model.path_cap)?;
    let model = build(&doc, &table, args.formulation, &args.model)?;
    let text = match args.format {
        Format::Lp => write_lp(&model),
        Format::Mps => write_mps(&model)?,
    };
    write_output(args.out.as_deref(), &text)?;
    let s = stats(&model);
    eprintln!(
        "{} formulation: {} binary, {} continuous, {} rows",
        model.kind(),
        s.n_binary,
        s.n_continuous,
        s.n_constraints
    );
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Failure> {
    let doc = load(&args.file)?;
    let d = &doc.diagram;
    let table = paths_of(&doc, args.path_cap)?;
    let mut out = provenance(args);
    if let Some(path) = &args.import_solution {
        let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        let model = build_improved(d, &table, ImprovedOptions::default())?;
        let report = read_solution(&model, d, &table, &text)?;
        out["method"] = json!("import");
        out["expected_utility"] = json!(report.expected_utility);
        out["file_objective"] = json!(report.file_objective);
        out["warnings"] = json!(report.warnings);
        out["strategy"] = report.strategy.to_json(d);
    } else if args.method == Method::Brute {
        let r = brute_force(d, &table, args.strategy_cap as u128)?;
        out["method"] = json!("brute");
        out["expected_utility"] = json!(r.expected_utility);
        out["examined"] = json!(r.examined.to_string());
        out["strategy"] = r.strategy.to_json(d);
    } else {
        let r = spu_multistart(d, &table, args.restarts, args.seed)?;
        out["method"] = json!("spu");
        out["expected_utility"] = json!(r.best.expected_utility);
        out["best_restart"] = json!(r.best_restart);
        out["trace"] = json!(r.best.trace);
        out["restarts"] = json!(r.restarts);
        out["strategy"] = r.best.strategy.to_json(d);
    }
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    instance: u64,
    seed: u64,
    paths: u128,
    brute_eu: Option<f64>,
    spu_eu: Option<f64>,
    spu_moves: Option<usize>,
    spu_wall_ms: Option<f64>,
    #[serde(rename = "match")]
    matched: Option<bool>,
    toolkit_version: &'static str,
    flags: String,
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let flags = serde_json::to_string(args).unwrap();
    let rows: Vec<BenchRow> = (0..args.instances)
        .into_par_iter()
        .map(|i| -> Result<BenchRow, Failure> {
            let seed = args.seed.wrapping_add(i);
            let d = args.family.generate(args.n, Parameters::Random { seed, signed: args.signed });
            let table = enumerate_paths(&d, &Default::default())?;
            let brute = match args.method {
                BenchMethod::Spu => None,
                _ => match brute_force(&d, &table, args.strategy_cap as u128) {
                    Ok(r) => Some(r.expected_utility),
                    Err(SolverError::StrategySpaceTooLarge { .. }) => None,
                    Err(e) => return Err(e.into()),
                },
            };
            let (spu_eu, moves, wall) = if args.method == BenchMethod::Brute {
                (None, None, None)
            } else {
                let started = Instant::now();
                let r = spu_multistart(&d, &table, args.restarts, seed)?;
                let ms = started.elapsed().as_secs_f64() * 1e3;
                (Some(r.best.expected_utility), Some(r.best.trace.len()), (!args.no_timing).then_some(ms))
            };
            let matched = match (brute, spu_eu) {
                (Some(b), Some(s)) => Some((b - s).abs() <= 1e-9 * b.abs().max(1.0)),
                _ => None,
            };
            Ok(BenchRow {
                instance: i,
                seed,
                paths: d.path_count(),
                brute_eu: brute,
                spu_eu,
                spu_moves: moves,
                spu_wall_ms: wall,
                matched,
                toolkit_version: TOOLKIT_VERSION,
                flags: flags.clone(),
            })
        })
        .collect::<Result<_, _>>()?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| Failure::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
    write_output(args.out.as_deref(), &String::from_utf8(bytes).expect("csv is utf-8"))?;
    let hits = rows.iter().filter(|r| r.matched == Some(true)).count();
    let compared = rows.iter().filter(|r| r.matched.is_some()).count();
    if compared > 0 {
        eprintln!("spu matched brute force on {hits} of {compared} instances");
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Failure> {
    let params = if args.random {
        Parameters::Random { seed: args.seed, signed: args.signed }
    } else {
        Parameters::Default
    };
    let doc = match args.family {
        GenFamily::Pigfarm => DiagramDocument::new(pigfarm(args.n, params)).with_family("pigfarm", args.n),
        GenFamily::Nmonitoring => DiagramDocument::new(nmonitoring(args.n, params)).with_family("nmonitoring", args.n),
        GenFamily::Chd => {
            let model = gen_chd(&ChdParams { risk_levels: args.n, ..Default::default() }, args.prior_level)?;
            DiagramDocument { diagram: model.diagram, forbidden: model.forbidden, fixed: model.fixed, family: None }
        }
    };
    write_output(args.out.as_deref(), &doc.to_json_string())
}

fn cmd_chd(args: &ChdArgs) -> Result<(), Failure> {
    let params = ChdParams { risk_levels: args.risk_levels, ..Default::default() };
    let solver = match args.method {
        Method::Brute => ChdSolver::BruteForce,
        Method::Spu => ChdSolver::Spu { restarts: args.restarts, seed: args.seed },
    };
    let results = solve_per_prior(&params, solver)?;
    if args.json {
        let mut out = provenance(args);
        out["params"] = json!(params);
        out["levels"] = json!(results);
        println!("{}", serde_json::to_string_pretty(&out).unwrap());
    } else {
        println!("{:>6} {:>8} {:>10} {:>12}", "level", "risk", "first", "net EU");
        for r in &results {
            println!("{:>6} {:>7.1}% {:>10} {:>12.6}", r.level, 100.0 * r.risk, r.first_test, r.net_expected_utility);
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate { file } => validate(file),
        Command::Stats(a) => cmd_stats(a),
        Command::Emit(a) => cmd_emit(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Chd(a) => cmd_chd(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
