//! The `tradegrav` command line.
//!
//! Exit codes: 0 success, 2 usage or schema problems, 3 computation
//! infeasible (empty panel, singular design, degenerate predictor, ...).
//! Machine-readable output goes to standard output (or `--out`), diagnostics
//! to standard error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::domain::{build_panel, world_gdp, CountryYearGdp, CountryYearIndex, TradeFlow, WorldGdpMode};
use crate::econometrics::{
    f_test_panel_effects, fixed_effects, hausman, pooled, random_effects, regression_f_test,
    t_test_equals, wald_joint_test, CovarianceKind, EstimationResult, EstimatorOptions, Method,
    TestResult,
};
use crate::error::{Error, Result};
use crate::gravity::{identification_alpha, predict_trade, Direction, ModelParams, ModelSpec};
use crate::io::{self, AssemblySummary, EstimateBundle, EstimationReport, Format, IdentificationReport, Report, TradabilityReport};
use crate::synth::{self, GenConfig, RecoverySummary};
use crate::tradability::{index_series, relative_tradability};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tradegrav", version, about = "Tradability index and gravity-equation panel estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sector relative tradability and per-country tradability index.
    Tradability(TradabilityArgs),
    /// Estimate the log-linear gravity equation on a trade panel.
    Estimate(EstimateArgs),
    /// No-intercept regression of actual on model-predicted trade.
    Identify(IdentifyArgs),
    /// Write a synthetic world as trade, GDP and index CSVs.
    Simulate(SimulateArgs),
    /// Monte Carlo recovery experiment on synthetic worlds.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum FormatArg {
    Json,
    Tsv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Tsv => Format::Tsv,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TradabilityArgs {
    /// CSV `sector,world_gdp_share_pct,world_trade_share_pct`.
    #[arg(long)]
    pub world_sectors: PathBuf,
    /// CSV `country,year,sector,gdp_share`.
    #[arg(long)]
    pub country_shares: Option<PathBuf>,
    /// Also write the index as `country,year,index` for `estimate --lambda`.
    #[arg(long)]
    pub index_csv: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PanelInputArgs {
    /// CSV `exporter,importer,year,value_usd`.
    #[arg(long)]
    pub trade: PathBuf,
    /// CSV `country,year,gdp_usd`.
    #[arg(long)]
    pub gdp: PathBuf,
    /// Fixed world GDP instead of the sum over sample countries.
    #[arg(long)]
    pub world_gdp: Option<f64>,
    /// Inclusive year range, e.g. `2000-2009`.
    #[arg(long, value_parser = parse_years)]
    pub years: Option<RangeInclusive<i32>>,
}

fn parse_years(s: &str) -> std::result::Result<RangeInclusive<i32>, String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("expected FROM-TO, got `{s}`"))?;
    let a: i32 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: i32 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a > b {
        return Err(format!("empty year range {a}-{b}"));
    }
    Ok(a..=b)
}

impl PanelInputArgs {
    fn world_mode(&self) -> Result<WorldGdpMode> {
        match self.world_gdp {
            None => Ok(WorldGdpMode::SumOfSample),
            Some(v) if v > 0.0 && v.is_finite() => Ok(WorldGdpMode::Exogenous(v)),
            Some(v) => Err(Error::InvalidWorldGdp(v)),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum EstimatorArg {
    Fe,
    Re,
    Pooled,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: PanelInputArgs,
    /// CSV `country,year,index` (0–100 scale).
    #[arg(long)]
    pub lambda: PathBuf,
    #[arg(long, value_enum, default_value_t = EstimatorArg::All)]
    pub estimator: EstimatorArg,
    /// Cluster standard errors by directed pair.
    #[arg(long)]
    pub cluster: bool,
    /// Dump the regression variables as TSV for external plotting.
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum ModelArg {
    Perfect,
    ImperfectUniform,
    ImperfectPair,
    Tradability,
}

impl From<ModelArg> for ModelSpec {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Perfect => ModelSpec::PerfectSpecialization,
            ModelArg::ImperfectUniform => ModelSpec::ImperfectUniform,
            ModelArg::ImperfectPair => ModelSpec::ImperfectPair,
            ModelArg::Tradability => ModelSpec::Tradability,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub input: PanelInputArgs,
    #[arg(long, value_enum, default_value_t = ModelArg::Perfect)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_a: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_b: f64,
    /// Per-country index CSV for the tradability model.
    #[arg(long, conflicts_with = "lambda_value")]
    pub lambda: Option<PathBuf>,
    /// One λ (a fraction) for every exporter.
    #[arg(long)]
    pub lambda_value: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenArgs {
    /// `key=value` file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub countries: Option<usize>,
    #[arg(long)]
    pub years: Option<usize>,
    #[arg(long)]
    pub first_year: Option<i32>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub fixed_lambda: bool,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub pair_sigma: Option<f64>,
    #[arg(long)]
    pub correlate_effects: bool,
    #[arg(long)]
    pub effect_loading: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub gen: GenArgs,
    /// Directory receiving `trade.csv`, `gdp.csv` and `index.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub gen: GenArgs,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Include every replication in the report.
    #[arg(long)]
    pub details: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Resolved generator settings plus the replication count from a config file.
fn gen_config(args: &GenArgs) -> Result<(GenConfig, Option<usize>)> {
    let mut cfg = GenConfig::default();
    let mut replications = None;
    let mut seed_given = false;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        for (line_no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value", line_no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = |_| Error::InvalidConfig(format!("line {}: bad value for `{k}`", line_no + 1));
            match k {
                "seed" => {
                    cfg.seed = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                    seed_given = true;
                }
                "n_countries" => cfg.n_countries = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                "n_years" => cfg.n_years = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                "first_year" => cfg.first_year = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                "replications" => {
                    replications = Some(v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?)
                }
                "lambda_varies_by_year" | "correlate_effects_with_regressors" => {
                    let b: bool = v.parse().map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?;
                    if k == "lambda_varies_by_year" {
                        cfg.lambda_varies_by_year = b;
                    } else {
                        cfg.correlate_effects_with_regressors = b;
                    }
                }
                _ => {
                    let x: f64 = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
                    match k {
                        "lambda_min" => cfg.lambda_range.0 = x,
                        "lambda_max" => cfg.lambda_range.1 = x,
                        "gdp_log_min" => cfg.gdp_log_range.0 = x,
                        "gdp_log_max" => cfg.gdp_log_range.1 = x,
                        "growth_mean" => cfg.gdp_growth.0 = x,
                        "growth_sd" => cfg.gdp_growth.1 = x,
                        "sigma_noise" => cfg.sigma_noise = x,
                        "pair_effect_sigma" => cfg.pair_effect_sigma = x,
                        "effect_loading" => cfg.effect_loading = x,
                        other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
                    }
                }
            }
        }
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
        seed_given = true;
    }
    if !seed_given {
        return Err(Error::InvalidConfig("a seed is required (--seed or `seed=` in --config)".into()));
    }
    if let Some(v) = args.countries {
        cfg.n_countries = v;
    }
    if let Some(v) = args.years {
        cfg.n_years = v;
    }
    if let Some(v) = args.first_year {
        cfg.first_year = v;
    }
    if let Some(v) = args.lambda_min {
        cfg.lambda_range.0 = v;
    }
    if let Some(v) = args.lambda_max {
        cfg.lambda_range.1 = v;
    }
    if args.fixed_lambda {
        cfg.lambda_varies_by_year = false;
    }
    if let Some(v) = args.sigma {
        cfg.sigma_noise = v;
    }
    if let Some(v) = args.pair_sigma {
        cfg.pair_effect_sigma = v;
    }
    if args.correlate_effects {
        cfg.correlate_effects_with_regressors = true;
    }
    if let Some(v) = args.effect_loading {
        cfg.effect_loading = v;
    }
    cfg.validate()?;
    Ok((cfg, replications))
}

/// Parses `args` (including the program name) and runs one command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Schema(_)
        | Error::Io(_)
        | Error::InvalidConfig(_)
        | Error::NegativeShare { .. }
        | Error::DivisionByZeroShare { .. }
        | Error::EmptyTable
        | Error::SectorMismatch { .. }
        | Error::InvalidWorldGdp(_) => EXIT_USAGE,
        _ => EXIT_INFEASIBLE,
    }
}

pub fn execute(command: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match command {
        Command::Tradability(a) => cmd_tradability(a, stdout, stderr),
        Command::Estimate(a) => cmd_estimate(a, stdout, stderr),
        Command::Identify(a) => cmd_identify(a, stdout, stderr),
        Command::Simulate(a) => cmd_simulate(a, stdout, stderr),
        Command::Verify(a) => cmd_verify(a, stdout, stderr),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit<R: Report + ?Sized>(report: &R, output: &OutputArgs, stdout: &mut dyn Write) -> Result<()> {
    let bytes = io::write_report(report, output.format.into());
    write_bytes(&bytes, output.out.as_deref(), stdout)
}

fn write_bytes(bytes: &[u8], path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => stdout.write_all(bytes).map_err(Error::from),
    }
}

fn note_ingest(stderr: &mut dyn Write, what: &str, report: &io::IngestReport) {
    if report.rows_dropped > 0 {
        let _ = writeln!(
            stderr,
            "{what}: dropped {} of {} rows {:?}",
            report.rows_dropped, report.rows_read, report.drop_reasons
        );
    }
}

pub fn cmd_tradability(args: &TradabilityArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let rows = io::read_world_sectors_csv(open(&args.world_sectors)?)?;
    let table = relative_tradability(&rows)?;
    let series = match &args.country_shares {
        None => None,
        Some(path) => {
            let (shares, report) = io::read_country_sector_shares_csv(open(path)?)?;
            note_ingest(stderr, "country shares", &report);
            Some(index_series(&shares, &table)?)
        }
    };
    if let Some(path) = &args.index_csv {
        let records: Vec<CountryYearIndex> = series
            .iter()
            .flat_map(|s| s.by_country_year.iter())
            .map(|((c, y), v)| CountryYearIndex {
                country: c.clone(),
                year: *y,
                index: *v,
            })
            .collect();
        write_bytes(io::write_index_csv(&records).as_bytes(), Some(path), stdout)?;
    }
    emit(&TradabilityReport::new(&table, series.as_ref()), &args.output, stdout)
}

fn read_panel_inputs(
    input: &PanelInputArgs,
    stderr: &mut dyn Write,
) -> Result<(Vec<TradeFlow>, Vec<CountryYearGdp>)> {
    let (flows, r) = io::read_trade_csv(open(&input.trade)?)?;
    note_ingest(stderr, "trade", &r);
    let (gdps, r) = io::read_gdp_csv(open(&input.gdp)?)?;
    note_ingest(stderr, "gdp", &r);
    Ok((flows, gdps))
}

fn block_tests(r: &EstimationResult) -> Result<Vec<TestResult>> {
    let mut tests = Vec::new();
    match r.method {
        Method::RandomEffects => tests.push(wald_joint_test(r)?),
        _ => tests.push(regression_f_test(r)?),
    }
    for i in r.slope_range() {
        tests.push(t_test_equals(r, i, 1.0)?);
    }
    Ok(tests)
}

pub fn cmd_estimate(args: &EstimateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let (flows, gdps) = read_panel_inputs(&args.input, stderr)?;
    let (lambdas, r) = io::read_index_csv(open(&args.lambda)?)?;
    note_ingest(stderr, "lambda", &r);
    let (panel, assembly) = build_panel(&flows, &gdps, &lambdas, args.input.years.clone(), args.input.world_mode()?)?;
    if assembly.rows_dropped > 0 {
        let _ = writeln!(
            stderr,
            "assembly: dropped {} of {} flows {:?}",
            assembly.rows_dropped, assembly.flows_in, assembly.drop_reasons
        );
    }
    if let Some(path) = &args.emit_plot_data {
        let mut tsv = String::from("exporter\timporter\tyear\tln_trade\tln_lambda_exporter\tln_mass\n");
        for o in panel.observations() {
            let (e, i) = panel.pair_label(o.pair_id).unwrap_or(("", ""));
            tsv.push_str(&format!(
                "{e}\t{i}\t{}\t{:?}\t{:?}\t{:?}\n",
                o.year, o.ln_trade, o.ln_lambda_exporter, o.ln_mass
            ));
        }
        write_bytes(tsv.as_bytes(), Some(path), stdout)?;
    }

    let opts = EstimatorOptions {
        covariance: if args.cluster {
            CovarianceKind::ClusterByGroup
        } else {
            CovarianceKind::Conventional
        },
    };
    let want = |e: EstimatorArg| args.estimator == e || args.estimator == EstimatorArg::All;
    // A requested estimator must succeed; auxiliary fits only feed comparison tests.
    let fit = |wanted: bool, r: Result<EstimationResult>, stderr: &mut dyn Write| -> Result<Option<EstimationResult>> {
        match r {
            Ok(r) => Ok(Some(r)),
            Err(e) if !wanted => {
                let _ = writeln!(stderr, "note: auxiliary fit unavailable: {e}");
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };
    let po = fit(want(EstimatorArg::Pooled) || want(EstimatorArg::Fe), pooled(&panel, &opts), stderr)?;
    let fe = fit(want(EstimatorArg::Fe) || want(EstimatorArg::Re), fixed_effects(&panel, &opts), stderr)?;
    let re = fit(want(EstimatorArg::Re), random_effects(&panel, &opts), stderr)?;

    let mut results = Vec::new();
    for (r, e) in [(&po, EstimatorArg::Pooled), (&fe, EstimatorArg::Fe), (&re, EstimatorArg::Re)] {
        if let (Some(r), true) = (r, want(e)) {
            results.push(EstimationReport::new(r, block_tests(r)?));
        }
    }
    let mut tests = Vec::new();
    if let (Some(fe), Some(re)) = (&fe, &re) {
        tests.push(hausman(fe, re)?);
    }
    if let (Some(po), Some(fe)) = (&po, &fe) {
        tests.push(f_test_panel_effects(po, fe)?);
    }
    let bundle = EstimateBundle {
        results,
        tests,
        assembly: AssemblySummary::from(&assembly),
    };
    emit(&bundle, &args.output, stdout)
}

pub fn cmd_identify(args: &IdentifyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let (flows, gdps) = read_panel_inputs(&args.input, stderr)?;
    let spec: ModelSpec = args.model.into();
    let lambdas: Option<HashMap<(String, i32), f64>> = match &args.lambda {
        None => None,
        Some(p) => {
            let (idx, r) = io::read_index_csv(open(p)?)?;
            note_ingest(stderr, "lambda", &r);
            Some(idx.into_iter().map(|i| ((i.country, i.year), i.index / 100.0)).collect())
        }
    };
    if spec == ModelSpec::Tradability && lambdas.is_none() && args.lambda_value.is_none() {
        return Err(Error::InvalidConfig("tradability model needs --lambda or --lambda-value".into()));
    }
    let gdp: HashMap<(&str, i32), f64> = gdps.iter().map(|g| ((g.country.as_str(), g.year), g.gdp)).collect();
    let world_mode = args.input.world_mode()?;
    let mut world: HashMap<i32, Option<f64>> = HashMap::new();

    let mut assembly = AssemblySummary {
        flows_in: flows.len(),
        ..Default::default()
    };
    let drop = |a: &mut AssemblySummary, reason: &str| {
        a.rows_dropped += 1;
        *a.drop_reasons.entry(reason.to_string()).or_default() += 1;
    };
    let mut actual = Vec::new();
    let mut predicted = Vec::new();
    let mut negative = 0usize;
    for f in &flows {
        if let Some(r) = &args.input.years {
            if !r.contains(&f.year) {
                drop(&mut assembly, "out_of_year_range");
                continue;
            }
        }
        let (Some(&ya), Some(&yb)) = (gdp.get(&(f.exporter.as_str(), f.year)), gdp.get(&(f.importer.as_str(), f.year)))
        else {
            drop(&mut assembly, "missing_gdp");
            continue;
        };
        let Some(yw) = *world.entry(f.year).or_insert_with(|| world_gdp(&gdps, f.year, world_mode).ok()) else {
            drop(&mut assembly, "missing_world_gdp");
            continue;
        };
        let lam = |c: &str| match (&lambdas, args.lambda_value) {
            (Some(m), _) => m.get(&(c.to_string(), f.year)).copied(),
            (None, Some(v)) => Some(v),
            (None, None) => Some(1.0),
        };
        let (Some(lambda_a), Some(lambda_b)) = (lam(&f.exporter), lam(&f.importer)) else {
            drop(&mut assembly, "missing_lambda");
            continue;
        };
        let params = ModelParams {
            gamma_a: args.gamma_a,
            gamma_b: args.gamma_b,
            lambda_a,
            lambda_b,
        };
        let value = match predict_trade(spec, &params, ya, yb, yw, Direction::ExportOfA) {
            Ok(p) => p.value,
            Err(Error::NegativePrediction { value }) => {
                negative += 1;
                value
            }
            Err(Error::LogDomain { .. }) => {
                drop(&mut assembly, "nonpositive_gdp");
                continue;
            }
            Err(e) => return Err(e),
        };
        actual.push(f.value);
        predicted.push(value);
    }
    assembly.rows_emitted = actual.len();
    if negative > 0 {
        let _ = writeln!(stderr, "warning: {negative} negative predictions (gamma_b < gamma_a)");
    }
    let result = identification_alpha(&actual, &predicted)?;
    let model = args.model.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    emit(&IdentificationReport::new(&model, &result, assembly), &args.output, stdout)
}

#[derive(Debug, Serialize)]
struct SimulateManifest {
    seed: u64,
    countries: usize,
    years: usize,
    flows: usize,
    files: Vec<String>,
}

pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> Result<()> {
    let (cfg, _) = gen_config(&args.gen)?;
    let world = synth::generate_world(&cfg)?;
    let flows = synth::generate_flows(&world);
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::Io(format!("{}: {e}", args.out_dir.display())))?;
    let files = [
        ("trade.csv", io::write_trade_csv(&flows)),
        ("gdp.csv", io::write_gdp_csv(&world.gdp_records())),
        ("index.csv", io::write_index_csv(&world.index_records())),
    ];
    let mut names = Vec::new();
    for (name, body) in &files {
        let path = args.out_dir.join(name);
        write_bytes(body.as_bytes(), Some(&path), stdout)?;
        names.push(path.display().to_string());
    }
    let manifest = SimulateManifest {
        seed: cfg.seed,
        countries: cfg.n_countries,
        years: cfg.n_years,
        flows: flows.len(),
        files: names,
    };
    let mut s = serde_json::to_string(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    stdout.write_all(s.as_bytes())?;
    Ok(())
}

/// Absolute tolerance for noise-free recovery of `(0, 1, 1)`.
pub const NOISELESS_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_REPLICATIONS: usize = 100;

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub config: GenConfig,
    pub noiseless_max_abs_error: f64,
    pub noiseless_pass: bool,
    pub summary: RecoverySummary,
}

impl Report for VerifyReport {
    fn write_tsv(&self, out: &mut String) {
        use std::fmt::Write as _;
        let s = &self.summary;
        let f = io::fmt_real;
        let _ = writeln!(out, "seed\t{}", self.config.seed);
        let _ = writeln!(out, "noiseless_max_abs_error\t{}", f(self.noiseless_max_abs_error));
        let _ = writeln!(out, "noiseless_pass\t{}", self.noiseless_pass);
        let _ = writeln!(out, "replications\t{}", s.replications);
        let _ = writeln!(out, "succeeded\t{}", s.succeeded);
        for (name, b) in [("pooled", s.mean_pooled), ("fixed_effects", s.mean_fixed_effects), ("random_effects", s.mean_random_effects)] {
            let _ = writeln!(out, "mean_{name}\t{}\t{}\t{}", f(b[0]), f(b[1]), f(b[2]));
        }
        let _ = writeln!(out, "coverage_fixed_effects\t{}\t{}", f(s.coverage_fixed_effects[0]), f(s.coverage_fixed_effects[1]));
        let _ = writeln!(out, "coverage_random_effects\t{}\t{}", f(s.coverage_random_effects[0]), f(s.coverage_random_effects[1]));
        let _ = writeln!(out, "hausman_rejection_rate\t{}", f(s.hausman_rejection_rate));
        let _ = writeln!(out, "f_panel_rejection_rate\t{}", f(s.f_panel_rejection_rate));
        for (i, e) in &s.failures {
            let _ = writeln!(out, "failure\t{i}\t{e}");
        }
    }
}

/// Largest deviation from `(0, 1, 1)` over every estimator on a noise-free world.
pub fn noiseless_recovery_error(cfg: &GenConfig) -> Result<f64> {
    let clean = GenConfig {
        sigma_noise: 0.0,
        pair_effect_sigma: 0.0,
        correlate_effects_with_regressors: false,
        ..cfg.clone()
    };
    let o = synth::run_replication(&clean, 0)?;
    Ok([o.pooled, o.fixed_effects, o.random_effects]
        .iter()
        .flat_map(|b| [b[0].abs(), (b[1] - 1.0).abs(), (b[2] - 1.0).abs()])
        .fold(0.0, f64::max))
}

pub fn cmd_verify(args: &VerifyArgs, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> Result<()> {
    let (cfg, from_file) = gen_config(&args.gen)?;
    let n = args.replications.or(from_file).unwrap_or(DEFAULT_REPLICATIONS);
    let noiseless_max_abs_error = noiseless_recovery_error(&cfg)?;
    let mut summary = synth::recovery_experiment(&cfg, n)?;
    if !args.details {
        summary.outcomes.clear();
    }
    let noiseless_pass = noiseless_max_abs_error < NOISELESS_TOLERANCE;
    let report = VerifyReport {
        config: cfg,
        noiseless_max_abs_error,
        noiseless_pass,
        summary,
    };
    emit(&report, &args.output, stdout)?;
    if noiseless_pass {
        Ok(())
    } else {
        Err(Error::InconsistentInputs(format!(
            "noise-free recovery error {noiseless_max_abs_error:e} exceeds {NOISELESS_TOLERANCE:e}"
        )))
    }
}
