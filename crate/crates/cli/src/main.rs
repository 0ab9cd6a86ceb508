use bbglm::elimination::{backward_eliminate, expand_terms, EliminationConfig, FactorDummies};
use bbglm::engine::{init_thread_pool, parse_contrast, run_posterior_on, PosteriorConfig};
use bbglm::glm::{
    build_design, fit_ml, parse_terms, DesignTemplate, Family, GroupedDesign, IwlsOptions, ModelSpec, Start,
};
use bbglm::io::report::{write_bands_csv, write_density_csv, write_draws_csv, Report, ReportMeta};
use bbglm::io::{bundled, grid::parse_grid, Dataset, SchemaHints};
use bbglm::summaries::{band_table, classical_intervals, kde, summarize, summarize_vector, Ecdf, MIN_SUMMARY_DRAWS};
use bbglm::support::{Normalization, WeightScheme};
use bbglm::{Error, SupportTable};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const THREADS_ENV: &str = "BBGLM_THREADS";

/// Bayesian-bootstrap posteriors for GLM coefficients.
///
/// `--data` takes a CSV path or `bundled:income`, `bundled:vaso`,
/// `bundled:absence`. Reports are JSON; curves and draws are CSV.
#[derive(Parser, Debug)]
#[command(name = "bbglm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distinct rows and their multiplicities.
    Tabulate(TabulateArgs),
    /// Maximum-likelihood fit by IWLS.
    Fit(FitArgs),
    /// Posterior draws of the coefficients.
    Bb(BbArgs),
    /// ML and posterior bands for the fitted mean over a grid.
    Bands(BandsArgs),
    /// ECDF and kernel density of one column of draws or data.
    Density(DensityArgs),
    /// Backward elimination by posterior |mean|/sd.
    Eliminate(EliminateArgs),
    /// Classical intervals for a mean.
    MeanCi(MeanCiArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV file or bundled:NAME.
    #[arg(long)]
    data: String,
    /// Derived numeric column `name=expr` (repeatable), e.g. `lv=log(volume)`.
    #[arg(long = "derive")]
    derive: Vec<String>,
    /// Treat a column as categorical even if it is numeric (repeatable).
    #[arg(long = "categorical")]
    categorical: Vec<String>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, Error> {
        let hints = SchemaHints {
            categorical: self.categorical.clone(),
        };
        let mut ds = bundled::resolve(&self.data, &hints)?;
        for d in &self.derive {
            ds.derive(d)?;
        }
        Ok(ds)
    }
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long)]
    response: String,
    /// Binomial denominators column.
    #[arg(long)]
    trials: Option<String>,
    /// Comma-separated terms: `x`, `f` (all dummies), `f=level`, `a:b`.
    #[arg(long, default_value = "")]
    terms: String,
    #[arg(long)]
    no_intercept: bool,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec, Error> {
        if self.trials.is_some() && self.family != Family::BinomialLogit {
            return Err(Error::InvalidArgument("--trials requires --family binomial".into()));
        }
        let mut spec = ModelSpec::new(&self.response).with_terms(parse_terms(&self.terms)?);
        if let Some(t) = &self.trials {
            spec = spec.with_trials(t);
        }
        if self.no_intercept {
            spec = spec.without_intercept();
        }
        Ok(spec)
    }
}

#[derive(Args, Debug)]
struct PosteriorArgs {
    #[arg(long, default_value_t = bbglm::engine::DEFAULT_SUMMARY_DRAWS)]
    draws: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value_t = NormArg::N)]
    normalization: NormArg,
    /// Keep going when more than 1% of draws fail.
    #[arg(long)]
    accept_exclusions: bool,
    /// Use the observed multiplicities as every weight vector (test hook).
    #[arg(long, hide = true)]
    equal_weights: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NormArg {
    /// Weights sum to the sample size.
    N,
    /// Weights sum to one.
    One,
}

impl PosteriorArgs {
    fn config(&self) -> PosteriorConfig {
        PosteriorConfig {
            normalization: match self.normalization {
                NormArg::N => Normalization::SumToN,
                NormArg::One => Normalization::SumToOne,
            },
            scheme: if self.equal_weights {
                WeightScheme::Equal
            } else {
                WeightScheme::BayesianBootstrap
            },
            accept_exclusions: self.accept_exclusions,
            ..PosteriorConfig::new(self.draws, self.seed)
        }
    }
}

#[derive(Args, Debug)]
struct TabulateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Columns forming the tie key (default: all).
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BbArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    posterior: PosteriorArgs,
    /// Linear combination to summarize, e.g. `lv-lr` (repeatable).
    #[arg(long)]
    contrast: Vec<String>,
    #[arg(long)]
    out_draws: Option<PathBuf>,
    #[arg(long)]
    out_summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BandsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    posterior: PosteriorArgs,
    /// `col=lo:hi:count` or `col=v1|v2`, comma-separated; numeric columns only.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    out_report: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["draws", "data"]))]
struct DensityArgs {
    /// Draws CSV written by `bb --out-draws`.
    #[arg(long)]
    draws: Option<PathBuf>,
    /// Data CSV or bundled:NAME.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    column: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    out_report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EliminateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long)]
    response: String,
    /// Candidate columns. With --factors, products of aliases joined by
    /// `:` (e.g. `C,S,C:S,A,C:A`); otherwise ordinary terms. Defaults to the
    /// documented candidate set for bundled:absence.
    #[arg(long)]
    candidates: Option<String>,
    /// Factor aliases `alias=column`, comma-separated.
    #[arg(long)]
    factors: Option<String>,
    /// Columns never dropped.
    #[arg(long, value_delimiter = ',')]
    pin: Vec<String>,
    #[arg(long, default_value_t = 2.0)]
    threshold: f64,
    #[arg(long, default_value_t = bbglm::engine::DEFAULT_SUMMARY_DRAWS)]
    draws_per_step: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MeanCiArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    response: String,
    #[arg(long)]
    population_size: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn emit<R: serde::Serialize>(report: &Report<R>, out: Option<&Path>) -> Result<(), Failure> {
    let text = report.to_json()?;
    match out {
        Some(p) => bbglm::io::report::write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Writes a report carrying the failure status of a posterior run.
fn failure_report(kind: &str, ds: &Dataset, config: &PosteriorConfig, e: Error, out: Option<&Path>) -> Failure {
    let failure = Failure::from(e);
    if out.is_some() {
        let mut meta = ReportMeta::new(kind, ds.source());
        meta.master_seed = Some(config.master_seed);
        meta.draws_requested = Some(config.draws);
        meta.draws_effective = Some(0);
        meta.excluded = Some(config.draws);
        let result = json!({"status": "failed", "error": failure.message});
        if let Err(w) = emit(&Report::new(meta, result), out) {
            return w;
        }
    }
    failure
}

fn tabulate(args: &TabulateArgs) -> Result<(), Failure> {
    let ds = args.data.load()?;
    let columns: Vec<&str> = if args.columns.is_empty() {
        ds.names()
    } else {
        args.columns.iter().map(String::as_str).collect()
    };
    let table = SupportTable::tabulate(&ds.raw_records(&columns)?)?;
    let rows: Vec<Value> = table
        .rows()
        .iter()
        .zip(table.counts())
        .map(|(r, c)| json!({"values": r, "count": c}))
        .collect();
    let mut meta = ReportMeta::new("tabulate", ds.source());
    meta.terms = columns.iter().map(|c| c.to_string()).collect();
    let result = json!({
        "columns": columns,
        "n": table.n(),
        "d": table.d(),
        "rows": rows,
        "index_map": table.index_map(),
    });
    emit(&Report::new(meta, result), args.out.as_deref())
}

fn fit(args: &FitArgs) -> Result<(), Failure> {
    let ds = args.model.data.load()?;
    let spec = args.model.spec()?;
    let design = GroupedDesign::<f64>::from_dataset(&ds, &spec)?;
    let f = fit_ml(&design, args.model.family, Start::Default, &IwlsOptions::default())?;
    let names = design.names();
    let mut meta = ReportMeta::new("fit", ds.source());
    meta.family = Some(args.model.family);
    meta.terms = names.clone();
    let coefficients: Vec<Value> = names
        .iter()
        .zip(f.beta.iter().zip(&f.se))
        .map(|(n, (b, s))| json!({"name": n, "estimate": b, "se": s}))
        .collect();
    let result = json!({
        "status": f.status.to_string(),
        "converged": f.converged,
        "iterations": f.iterations,
        "deviance": f.deviance,
        "dispersion": f.dispersion,
        "n": design.support.n(),
        "support_rows": design.support.d(),
        "coefficients": coefficients,
    });
    emit(&Report::new(meta, result), args.out.as_deref())?;
    if f.is_ok() {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            message: format!("fit status {}", f.status),
        })
    }
}

fn bb(args: &BbArgs) -> Result<(), Failure> {
    let ds = args.model.data.load()?;
    let spec = args.model.spec()?;
    let design = GroupedDesign::<f64>::from_dataset(&ds, &spec)?;
    let config = args.posterior.config();
    let draws = match run_posterior_on(&design, args.model.family, &config, Start::Default) {
        Ok(d) => d,
        Err(e) => {
            return Err(failure_report(
                "posterior",
                &ds,
                &config,
                e,
                args.out_summary.as_deref(),
            ))
        }
    };
    if let Some(p) = &args.out_draws {
        write_draws_csv(p, &draws)?;
    }
    let m = draws.effective();
    let means: Vec<f64> = (0..draws.n_params())
        .map(|k| draws.beta.column(k).sum() / m as f64)
        .collect();
    let summary = if m >= MIN_SUMMARY_DRAWS {
        Some(summarize(&draws, args.posterior.level)?)
    } else {
        None
    };
    let contrasts = args
        .contrast
        .iter()
        .map(|text| {
            let c = parse_contrast(&draws.names, text)?;
            let values = draws.functional_draws(c.view())?;
            let s = if m >= MIN_SUMMARY_DRAWS {
                Some(summarize_vector(text, &values, args.posterior.level)?)
            } else {
                None
            };
            Ok(json!({"contrast": text, "summary": s}))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let ml: Vec<Value> = draws
        .names
        .iter()
        .zip(draws.ml.beta.iter().zip(&draws.ml.se))
        .map(|(n, (b, s))| json!({"name": n, "estimate": b, "se": s}))
        .collect();
    let result = json!({
        "level": args.posterior.level,
        "normalization": draws.normalization,
        "scheme": draws.scheme,
        "status_counts": draws.status_counts(),
        "excluded_draws": draws.excluded,
        "ml": ml,
        "means": draws.names.iter().zip(&means).map(|(n, v)| json!({"name": n, "mean": v})).collect::<Vec<_>>(),
        "summary": summary,
        "contrasts": contrasts,
    });
    let meta = ReportMeta::new("posterior", ds.source()).with_draws(&draws);
    emit(&Report::new(meta, result), args.out_summary.as_deref())
}

fn bands(args: &BandsArgs) -> Result<(), Failure> {
    let ds = args.model.data.load()?;
    let spec = args.model.spec()?;
    let design = build_design::<f64>(&ds, &spec)?.grouped()?;
    let config = args.posterior.config();
    let draws = match run_posterior_on(&design, args.model.family, &config, Start::Default) {
        Ok(d) => d,
        Err(e) => return Err(failure_report("bands", &ds, &config, e, args.out_report.as_deref())),
    };
    let grid_ds = parse_grid(&args.grid)?;
    let template = DesignTemplate::from_spec(&ds, &spec)?;
    let x = template.evaluate::<f64>(&grid_ds)?;
    let curves = draws.curve_draws(x.view())?;
    let grid_columns: Vec<String> = grid_ds.names().iter().map(|s| s.to_string()).collect();
    let mut grid = ndarray::Array2::<f64>::zeros((grid_ds.nrows(), grid_columns.len()));
    for (j, c) in grid_columns.iter().enumerate() {
        for (i, v) in grid_ds.numeric(c)?.iter().enumerate() {
            grid[[i, j]] = *v;
        }
    }
    let table = band_table(
        &draws.ml,
        x.view(),
        curves.view(),
        grid_columns,
        grid,
        args.posterior.level,
    )?;
    write_bands_csv(&args.out, &table)?;
    if let Some(p) = &args.out_report {
        let meta = ReportMeta::new("bands", ds.source()).with_draws(&draws);
        emit(&Report::new(meta, &table), Some(p))?;
    }
    Ok(())
}

fn density(args: &DensityArgs) -> Result<(), Failure> {
    let (ds, kind) = match (&args.draws, &args.data) {
        (Some(p), _) => (Dataset::read_csv(p, &SchemaHints::default())?, "draws"),
        (None, Some(d)) => (bundled::resolve(d, &SchemaHints::default())?, "data"),
        (None, None) => unreachable!("clap requires one input"),
    };
    let xs = ds.numeric(&args.column)?;
    let ecdf = Ecdf::new(xs)?;
    let curve = kde(xs)?;
    write_density_csv(&args.out, &ecdf, &curve)?;
    if let Some(p) = &args.out_report {
        let mut meta = ReportMeta::new("density", ds.source());
        meta.terms = vec![args.column.clone()];
        let result = json!({
            "input": kind,
            "column": args.column,
            "count": xs.len(),
            "bandwidth": curve.bandwidth,
            "grid_points": curve.grid.len(),
        });
        emit(&Report::new(meta, result), Some(p))?;
    }
    Ok(())
}

fn eliminate(args: &EliminateArgs) -> Result<(), Failure> {
    let ds = args.data.load()?;
    let terms = match (&args.factors, &args.candidates) {
        (Some(f), Some(c)) => {
            let factors = f
                .split(',')
                .map(|pair| {
                    let (alias, column) = pair
                        .split_once('=')
                        .ok_or_else(|| Error::Parse(format!("expected alias=column, got `{pair}`")))?;
                    FactorDummies::from_column(&ds, alias.trim(), column.trim())
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let products: Vec<Vec<String>> = c
                .split(',')
                .map(|p| p.split(':').map(|a| a.trim().to_string()).collect())
                .collect();
            expand_terms(&factors, &products)?
        }
        (None, Some(c)) => parse_terms(c)?,
        (Some(_), None) => return Err(Error::InvalidArgument("--factors needs --candidates".into()).into()),
        (None, None) if args.data.data == "bundled:absence" => bundled::absence_candidates(&ds)?,
        (None, None) => return Err(Error::InvalidArgument("--candidates is required".into()).into()),
    };
    if terms.is_empty() {
        return Err(Error::EmptyCandidates.into());
    }
    let spec = ModelSpec::new(&args.response).with_terms(terms);
    let config = EliminationConfig {
        level: args.level,
        pinned: args.pin.clone(),
        ..EliminationConfig::new(args.threshold, args.draws_per_step, args.seed)
    };
    let (trace, failure) = match backward_eliminate::<f64>(&ds, &spec, args.family, &config) {
        Ok(t) => (t, None),
        Err(e) => {
            let code = if e.reason.is_numerical() { 2 } else { 1 };
            let message = e.reason.to_string();
            (e.trace, Some(Failure { code, message }))
        }
    };
    let mut meta = ReportMeta::new("elimination", ds.source());
    meta.master_seed = Some(args.seed);
    meta.family = Some(args.family);
    meta.terms = trace.final_terms();
    let last = trace.steps.last();
    meta.draws_requested = Some(last.map_or(0, |s| s.summary.draws_effective + s.excluded));
    meta.draws_effective = Some(last.map_or(0, |s| s.summary.draws_effective));
    meta.excluded = Some(last.map_or(0, |s| s.excluded));
    let result = json!({
        "status": failure.as_ref().map_or("ok".to_string(), |f| f.message.clone()),
        "trace": trace,
    });
    emit(&Report::new(meta, result), args.out.as_deref())?;
    failure.map_or(Ok(()), Err)
}

fn mean_ci(args: &MeanCiArgs) -> Result<(), Failure> {
    let ds = args.data.load()?;
    let ys = ds.numeric(&args.response)?;
    let ci = classical_intervals(ys, args.level, args.population_size)?;
    let mut meta = ReportMeta::new("mean-ci", ds.source());
    meta.terms = vec![args.response.clone()];
    emit(&Report::new(meta, ci), args.out.as_deref())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Tabulate(a) => tabulate(a),
        Command::Fit(a) => fit(a),
        Command::Bb(a) => bb(a),
        Command::Bands(a) => bands(a),
        Command::Density(a) => density(a),
        Command::Eliminate(a) => eliminate(a),
        Command::MeanCi(a) => mean_ci(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = init_thread_pool(n) {
                    eprintln!("bbglm: {e}");
                }
            }
            _ => {
                eprintln!("bbglm: {THREADS_ENV} must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("bbglm: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
