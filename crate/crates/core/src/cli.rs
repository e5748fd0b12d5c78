//! The `gradecast` command line: `generate`, `train`, `predict`, `evaluate`,
//! `influence` and `gridsearch`.
//!
//! Settings resolve in three layers: built-in defaults, then an optional
//! TOML file (`--config`), then explicit flags. Outputs are written to a
//! temporary file next to the destination and renamed into place.
//! Exit codes: 0 on success, 1 on invalid input or configuration, 2 when a
//! computation or I/O operation fails.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use crate::baseline::{TrainConfig, Variant};
use crate::data::{parse_records, RecordSet};
use crate::error::{Error, Result};
use crate::eval::{format_table, predict_batch, report, MetricsReport};
use crate::experiment::{
    gridsearch, holdout, sweep_terms, write_leaderboard, GridSpec, Method, MethodSpec, TrainedModel,
};
use crate::influence::{export_graph, read_course_names, restrict_to, top_influences, GraphFormat};
use crate::mftci::{fit, MftciHyper};
use crate::predictor::GradePredictor;
use crate::scale::LetterScale;
use crate::synthetic::{generate_synthetic, SyntheticConfig};

/// Environment variable holding the log filter, e.g. `info` or `gradecast=debug`.
pub const LOG_ENV: &str = "GRADECAST_LOG";

#[derive(Debug, Parser)]
#[command(name = "gradecast", version, about = "Next-term grade prediction with course-wise influence")]
struct Cli {
    /// Letter ladder as a `letter,points` CSV, highest grade first.
    #[arg(long, global = true, value_name = "CSV")]
    scale: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a synthetic dataset with planted factors and influence.
    Generate(GenerateArgs),
    /// Fit a model and save it as JSON.
    Train(TrainArgs),
    /// Predict grades for candidate (student, course, term) rows.
    Predict(PredictArgs),
    /// Score a saved model, or train-and-score methods on held-out terms.
    Evaluate(EvaluateArgs),
    /// Export the strongest learned course influences as a graph.
    Influence(InfluenceArgs),
    /// Train every point of a hyperparameter grid and rank by MAE.
    Gridsearch(GridsearchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mftci,
    Mf,
    Mf0,
    Nmf,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Mftci => Method::Mftci,
            MethodArg::Mf => Method::Baseline(Variant::Mf),
            MethodArg::Mf0 => Method::Baseline(Variant::Mf0),
            MethodArg::Nmf => Method::Baseline(Variant::Nmf),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Dot,
    Json,
}

impl From<FormatArg> for GraphFormat {
    fn from(f: FormatArg) -> GraphFormat {
        match f {
            FormatArg::Dot => GraphFormat::Dot,
            FormatArg::Json => GraphFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    /// One held-out term, given by `--test-term`.
    Single,
    /// The last three terms, each trained on everything before it.
    Sweep,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Destination for the grade CSV.
    #[arg(long)]
    out: PathBuf,
    /// Destination for the planted parameters (JSON).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    students: Option<usize>,
    #[arg(long)]
    courses: Option<usize>,
    #[arg(long)]
    terms: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    courses_per_term: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    influence_scale: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
}

/// Hyperparameter overrides shared by `train` and `evaluate`. Baselines use
/// `--k`, `--gamma`, `--uv-lr` (their SGD step), `--epochs` and `--init-scale`.
#[derive(Debug, Args, Default)]
struct HyperArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Step size of the influence-matrix update.
    #[arg(long)]
    lr: Option<f64>,
    /// SGD step for the latent factors.
    #[arg(long)]
    uv_lr: Option<f64>,
    /// Preceding terms feeding the influence terms (1 or 2).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    prev_terms: Option<u8>,
    #[arg(long)]
    inner_uv_iters: Option<usize>,
    #[arg(long)]
    inner_a_iters: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    residual_tol: Option<f64>,
    /// Keep U and V non-negative.
    #[arg(long)]
    nonneg: bool,
    /// Baseline epochs.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    init_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "mftci")]
    method: MethodArg,
    /// Grade CSV.
    #[arg(long)]
    data: PathBuf,
    /// Train only on terms before this one.
    #[arg(long)]
    test_term: Option<u32>,
    /// Destination for the model JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-iteration objective and residuals (influence model only).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Grade CSV supplying each student's earlier terms.
    #[arg(long, alias = "data")]
    history: PathBuf,
    /// CSV with `student_id,course_id` and optionally `term`.
    #[arg(long)]
    candidates: PathBuf,
    /// Term for candidate rows without a `term` column.
    #[arg(long)]
    term: Option<u32>,
    /// Destination for the prediction CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// A saved model to score against `--data`.
    #[arg(long, conflicts_with = "method")]
    model: Option<PathBuf>,
    /// Methods to train and score on held-out terms; repeatable.
    #[arg(long, value_enum, required_unless_present = "model")]
    method: Vec<MethodArg>,
    /// Grade CSV.
    #[arg(long)]
    data: PathBuf,
    /// Earlier grades for a saved model (defaults to `--data`).
    #[arg(long, requires = "model")]
    history: Option<PathBuf>,
    #[arg(long)]
    test_term: Option<u32>,
    #[arg(long, value_enum, default_value = "single")]
    protocol: ProtocolArg,
    /// Destination for the JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Destination for the aligned text table (always printed to stdout).
    #[arg(long)]
    table: Option<PathBuf>,
    /// Per-row predictions CSV (single held-out term only).
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    group_by_tag: bool,
    #[arg(long)]
    exclude_cold_start: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Debug, Args)]
struct InfluenceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 20)]
    top: usize,
    #[arg(long, value_enum, default_value = "dot")]
    format: FormatArg,
    /// `course_id,display_name` CSV for node labels.
    #[arg(long)]
    names: Option<PathBuf>,
    /// Keep only courses taken under this tag in `--data`.
    #[arg(long, requires = "data")]
    tag: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Destination file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridsearchArgs {
    #[arg(long)]
    data: PathBuf,
    /// Validation term; training uses the terms before it.
    #[arg(long)]
    valid_term: u32,
    /// Grid TOML (see README).
    #[arg(long)]
    grid: PathBuf,
    /// Destination for the leaderboard CSV.
    #[arg(long)]
    out: PathBuf,
    /// Replaces the grid's seed axis with this single seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// Contents of a `--config` TOML file. Every section is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides every section's `rng_seed`.
    pub seed: Option<u64>,
    pub synthetic: SyntheticConfig,
    pub mftci: MftciHyper,
    pub baseline: TrainConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                require_file(p)?;
                Self::from_toml(&std::fs::read_to_string(p)?)
            }
            None => Ok(RunConfig::default()),
        }
    }

    fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed.or(self.seed) {
            self.seed = Some(s);
            self.synthetic.rng_seed = s;
            self.mftci.rng_seed = s;
            self.baseline.rng_seed = s;
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let scale = match &cli.scale {
        Some(p) => {
            require_file(p)?;
            LetterScale::from_csv(BufReader::new(File::open(p)?))?
        }
        None => LetterScale::default(),
    };
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a, &scale),
        Command::Predict(a) => cmd_predict(a, &scale),
        Command::Evaluate(a) => cmd_evaluate(a, &scale),
        Command::Influence(a) => cmd_influence(a, &scale),
        Command::Gridsearch(a) => cmd_gridsearch(a, &scale),
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("input file `{}` does not exist", path.display())))
    }
}

fn load_records(path: &Path, scale: &LetterScale) -> Result<RecordSet> {
    require_file(path)?;
    parse_records(BufReader::new(File::open(path)?), scale)
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    require_file(path)?;
    TrainedModel::read_json(BufReader::new(File::open(path)?))
}

/// Writes `bytes` to a temporary file in the destination directory, then
/// renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_or_print(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let mut config = RunConfig::load(a.config.as_deref())?;
    config.apply_seed(a.seed);
    let mut cfg = config.synthetic;
    let set = |dst: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut cfg.n_students, a.students);
    set(&mut cfg.m_courses, a.courses);
    set(&mut cfg.n_terms, a.terms);
    set(&mut cfg.true_rank, a.rank);
    set(&mut cfg.courses_per_term, a.courses_per_term);
    cfg.noise_sigma = a.noise.unwrap_or(cfg.noise_sigma);
    cfg.influence_density = a.density.unwrap_or(cfg.influence_density);
    cfg.influence_scale = a.influence_scale.unwrap_or(cfg.influence_scale);
    cfg.decay_alpha = a.alpha.unwrap_or(cfg.decay_alpha);

    let (records, truth) = generate_synthetic(&cfg)?;
    let csv = format!("# seed={}\n{}", cfg.rng_seed, records.to_csv());
    write_atomic(&a.out, csv.as_bytes())?;
    if let Some(path) = &a.truth {
        let mut buf = Vec::new();
        truth.write_json(&mut buf)?;
        write_atomic(path, &buf)?;
    }
    info!("wrote {} records to {}", records.len(), a.out.display());
    Ok(())
}

impl HyperArgs {
    fn apply(&self, config: &RunConfig, method: Method) -> MethodSpec {
        let mut h = config.mftci.clone();
        let mut b = config.baseline.clone();
        if let Some(k) = self.k {
            h.k = k;
            b.k = k;
        }
        if let Some(g) = self.gamma {
            h.gamma = g;
            b.gamma = g;
        }
        if let Some(lr) = self.uv_lr {
            h.uv_lr = lr;
            b.learning_rate = lr;
        }
        if let Some(s) = self.init_scale {
            h.init_scale = s;
            b.init_scale = s;
        }
        h.tau = self.tau.unwrap_or(h.tau);
        h.lambda = self.lambda.unwrap_or(h.lambda);
        h.rho = self.rho.unwrap_or(h.rho);
        h.alpha = self.alpha.unwrap_or(h.alpha);
        h.lr = self.lr.unwrap_or(h.lr);
        h.previous_terms = self.prev_terms.map_or(h.previous_terms, usize::from);
        h.inner_uv_iters = self.inner_uv_iters.unwrap_or(h.inner_uv_iters);
        h.inner_a_iters = self.inner_a_iters.unwrap_or(h.inner_a_iters);
        h.outer_max_iters = self.max_iters.unwrap_or(h.outer_max_iters);
        h.residual_tol = self.residual_tol.unwrap_or(h.residual_tol);
        h.nonneg_factors |= self.nonneg;
        b.max_epochs = self.epochs.unwrap_or(b.max_epochs);
        match method {
            Method::Mftci => MethodSpec::mftci(h),
            Method::Baseline(v) => MethodSpec::baseline(v, b),
        }
    }
}

fn resolve_spec(config: Option<&Path>, seed: Option<u64>, hyper: &HyperArgs, method: Method) -> Result<MethodSpec> {
    let mut config = RunConfig::load(config)?;
    config.apply_seed(seed);
    let spec = hyper.apply(&config, method);
    match method {
        Method::Mftci => spec.hyper.validate()?,
        Method::Baseline(_) => spec.baseline.validate()?,
    }
    Ok(spec)
}

fn spec_seed(spec: &MethodSpec) -> u64 {
    match spec.method {
        Method::Mftci => spec.hyper.rng_seed,
        Method::Baseline(_) => spec.baseline.rng_seed,
    }
}

fn model_seed(model: &TrainedModel) -> u64 {
    match model {
        TrainedModel::Mftci(m) => m.hyper.rng_seed,
        TrainedModel::Baseline(m) => m.train_config.rng_seed,
    }
}

fn cmd_train(a: TrainArgs, scale: &LetterScale) -> Result<()> {
    let spec = resolve_spec(a.config.as_deref(), a.seed, &a.hyper, a.method.into())?;
    if a.trace.is_some() && spec.method != Method::Mftci {
        return Err(Error::InvalidConfig("--trace applies to the influence model only".into()));
    }
    let data = load_records(&a.data, scale)?;
    let train = match a.test_term {
        Some(t) => data.split_by_term(t)?.0,
        None => data,
    };
    let model = match spec.method {
        Method::Mftci => {
            let (model, state) = fit(&train, spec.hyper.clone())?;
            info!("fit finished after {} outer iterations", state.iterations());
            if let Some(path) = &a.trace {
                let mut buf = Vec::new();
                state.write_trace_csv(&mut buf)?;
                write_atomic(path, &buf)?;
            }
            TrainedModel::Mftci(model)
        }
        Method::Baseline(_) => spec.train(&train)?,
    };
    let mut buf = Vec::new();
    model.write_json(&mut buf)?;
    write_atomic(&a.out, &buf)?;
    info!("wrote {} model to {}", model.method_name(), a.out.display());
    Ok(())
}

#[derive(Debug, Deserialize)]
struct Candidate {
    student_id: String,
    course_id: String,
    #[serde(default)]
    term: Option<u32>,
}

#[derive(Debug, Serialize)]
struct PredictionOut<'a> {
    student_id: &'a str,
    course_id: &'a str,
    term: u32,
    predicted: f64,
    letter: &'a str,
    cold_start: bool,
}

fn cmd_predict(a: PredictArgs, scale: &LetterScale) -> Result<()> {
    let model = load_model(&a.model)?;
    let history = load_records(&a.history, scale)?;
    require_file(&a.candidates)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(BufReader::new(File::open(&a.candidates)?));
    let mut candidates = Vec::new();
    for (i, row) in rdr.deserialize::<Candidate>().enumerate() {
        let c = row?;
        let term = c.term.or(a.term).ok_or_else(|| Error::Malformed {
            line: i as u64 + 2,
            message: "no term column and no --term given".into(),
        })?;
        candidates.push((c.student_id, c.course_id, term));
    }
    if candidates.is_empty() {
        return Err(Error::Empty);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for (sid, cid, term) in &candidates {
        let p = model.predict_for(sid, cid, *term, &history);
        w.serialize(PredictionOut {
            student_id: sid,
            course_id: cid,
            term: *term,
            predicted: p.grade,
            letter: scale.points_to_letter(p.grade)?,
            cold_start: p.cold_start,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_or_print(a.out.as_deref(), &bytes)
}

/// One labelled evaluation in a report file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationEntry {
    pub method: String,
    pub test_term: Option<u32>,
    pub seed: u64,
    pub metrics: MetricsReport,
}

/// The JSON written by `evaluate --report`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub results: Vec<EvaluationEntry>,
}

fn cmd_evaluate(a: EvaluateArgs, scale: &LetterScale) -> Result<()> {
    let data = load_records(&a.data, scale)?;
    let mut entries = Vec::new();
    let mut batches = Vec::new();
    if let Some(path) = &a.model {
        if a.protocol == ProtocolArg::Sweep {
            return Err(Error::InvalidConfig("--protocol sweep trains models; use --method".into()));
        }
        let model = load_model(path)?;
        let history = match &a.history {
            Some(p) => load_records(p, scale)?,
            None => data.clone(),
        };
        let targets = match a.test_term {
            Some(t) => data.split_by_term(t)?.1,
            None => data.clone(),
        };
        let mut batch = predict_batch(&model, &targets, &history);
        if a.exclude_cold_start {
            batch = batch.without_cold_start();
        }
        entries.push(EvaluationEntry {
            method: model.method_name(),
            test_term: a.test_term,
            seed: model_seed(&model),
            metrics: report(&batch, scale, a.group_by_tag)?,
        });
        batches.push(batch);
    } else {
        let terms = match (a.protocol, a.test_term) {
            (ProtocolArg::Sweep, None) => sweep_terms(&data),
            (ProtocolArg::Sweep, Some(_)) => {
                return Err(Error::InvalidConfig("--test-term conflicts with --protocol sweep".into()))
            }
            (ProtocolArg::Single, Some(t)) => vec![t],
            (ProtocolArg::Single, None) => {
                return Err(Error::InvalidConfig("--method needs --test-term or --protocol sweep".into()))
            }
        };
        if terms.is_empty() {
            return Err(Error::InvalidConfig("no term has earlier training history".into()));
        }
        let specs = a
            .method
            .iter()
            .map(|&m| resolve_spec(a.config.as_deref(), a.seed, &a.hyper, m.into()))
            .collect::<Result<Vec<_>>>()?;
        for &t in &terms {
            for spec in &specs {
                let result = holdout(&data, t, spec, a.exclude_cold_start, a.group_by_tag)?;
                entries.push(EvaluationEntry {
                    method: result.model.method_name(),
                    test_term: Some(t),
                    seed: spec_seed(spec),
                    metrics: result.report,
                });
                batches.push(result.batch);
            }
        }
    }

    let labelled: Vec<(String, MetricsReport)> = entries
        .iter()
        .map(|e| {
            let label = match e.test_term {
                Some(t) if a.protocol == ProtocolArg::Sweep => format!("{} (term {t})", e.method),
                _ => e.method.clone(),
            };
            (label, e.metrics.clone())
        })
        .collect();
    let table = format_table(&labelled);
    print!("{table}");
    if let Some(path) = &a.table {
        write_atomic(path, table.as_bytes())?;
    }
    if let Some(path) = &a.predictions {
        if batches.len() != 1 {
            return Err(Error::InvalidConfig(
                "--predictions needs exactly one method and one held-out term".into(),
            ));
        }
        write_atomic(path, batches[0].to_csv().as_bytes())?;
    }
    if let Some(path) = &a.report {
        let json = serde_json::to_vec_pretty(&EvaluationReport { results: entries })?;
        write_atomic(path, &json)?;
    }
    Ok(())
}

fn cmd_influence(a: InfluenceArgs, scale: &LetterScale) -> Result<()> {
    if a.top == 0 {
        return Err(Error::InvalidConfig("--top must be at least 1".into()));
    }
    let model = match load_model(&a.model)? {
        TrainedModel::Mftci(m) => m,
        TrainedModel::Baseline(_) => {
            return Err(Error::InvalidConfig("baseline models have no influence matrix".into()))
        }
    };
    let edges = match (&a.tag, &a.data) {
        (Some(tag), Some(data)) => {
            let tagged = load_records(data, scale)?.filter_tag(tag)?;
            restrict_to(&model, a.top, |course| tagged.course_index(course).is_some())
        }
        _ => top_influences(&model, a.top),
    };
    let names = match &a.names {
        Some(p) => {
            require_file(p)?;
            Some(read_course_names(BufReader::new(File::open(p)?))?)
        }
        None => None,
    };
    let text = export_graph(&edges, a.format.into(), names.as_ref())?;
    write_or_print(a.out.as_deref(), text.as_bytes())
}

fn cmd_gridsearch(a: GridsearchArgs, scale: &LetterScale) -> Result<()> {
    require_file(&a.grid)?;
    let mut grid = GridSpec::from_toml(&std::fs::read_to_string(&a.grid)?)?;
    if let Some(seed) = a.seed {
        grid.seed = vec![seed];
    }
    let data = load_records(&a.data, scale)?;
    let rows = gridsearch(&data, a.valid_term, &grid)?;
    let mut buf = Vec::new();
    write_leaderboard(&rows, &mut buf)?;
    write_atomic(&a.out, &buf)?;
    if let Some(best) = rows.first() {
        println!(
            "best of {} points: {} k={} gamma={} mae={:.4} rmse={:.4}",
            rows.len(),
            best.method,
            best.k,
            best.gamma,
            best.mae,
            best.rmse
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_sections_are_optional() {
        let cfg = RunConfig::from_toml("seed = 3\n[mftci]\nk = 4\n").unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.mftci.k, 4);
        assert_eq!(cfg.mftci.tau, MftciHyper::default().tau);
        assert_eq!(cfg.baseline, TrainConfig::default());
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(RunConfig::from_toml("sede = 3\n").is_err());
        assert!(RunConfig::from_toml("[mftci]\ntua = 1.0\n").is_err());
    }

    #[test]
    fn flag_seed_overrides_config_seed() {
        let mut cfg = RunConfig::from_toml("seed = 3\n").unwrap();
        cfg.apply_seed(Some(9));
        assert_eq!((cfg.mftci.rng_seed, cfg.baseline.rng_seed, cfg.synthetic.rng_seed), (9, 9, 9));
        let mut cfg = RunConfig::from_toml("seed = 3\n").unwrap();
        cfg.apply_seed(None);
        assert_eq!(cfg.mftci.rng_seed, 3);
    }

    #[test]
    fn flags_override_config() {
        let cfg = RunConfig::from_toml("[mftci]\nk = 4\ngamma = 0.5\n").unwrap();
        let flags = HyperArgs {
            k: Some(7),
            prev_terms: Some(1),
            ..Default::default()
        };
        let spec = flags.apply(&cfg, Method::Mftci);
        assert_eq!((spec.hyper.k, spec.hyper.gamma, spec.hyper.previous_terms), (7, 0.5, 1));
        let spec = flags.apply(&cfg, Method::Baseline(Variant::Mf0));
        assert_eq!(spec.baseline.k, 7);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["gradecast", "--help"]), 0);
        assert_eq!(run(["gradecast", "frobnicate"]), 1);
        assert_eq!(
            run(["gradecast", "train", "--data", "x.csv", "--out", "m.json", "--prev-terms", "3"]),
            1
        );
        assert_eq!(run(["gradecast", "train", "--data", "/nonexistent.csv", "--out", "m.json"]), 1);
    }
}
