use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use maxent_quantile::bandwidth::{
    h_cross_validate, h_rule_of_thumb, plugin_from_data, BandwidthRule,
};
use maxent_quantile::cond_dist::{
    cdf_curve, fit_cdf_with, lag_embed, ConditionalCdf, LaggedSample, Weighting,
};
use maxent_quantile::io::{
    backtest, backtest_csv, emit_plot_data, format_g17, json_of, read_csv, to_json_string,
    BacktestConfig, ColumnSelector, PlotMeta, TimeSeries,
};
use maxent_quantile::maxent::{build_constraint_vector, solve_lambda};
use maxent_quantile::montecarlo::{
    consistency_experiment, coverage_experiment, normality_experiment, simulate_ar1, Ar1Spec,
    CoverageConfig, Innovation, DEFAULT_BURN_IN,
};
use maxent_quantile::quantile::{prediction_interval, quantile};
use maxent_quantile::{Error, KernelFamily, KernelSpec};
use serde_json::{json, Value};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "mxq",
    version,
    about = "Maximum-entropy conditional quantile forecasting for time series"
)]
struct Cli {
    /// Kernel family: epanechnikov, triweight or uniform.
    #[arg(long, global = true, default_value = "epanechnikov")]
    kernel: KernelFamily,
    /// Bandwidth: a positive number, or `auto` for the data-driven choice.
    #[arg(long, global = true, default_value = "auto")]
    bandwidth: BandwidthArg,
    /// Base seed for simulations.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Write the result to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Describe the bandwidth choice and other defaults on stderr.
    #[arg(long, global = true)]
    explain: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate an AR(1) series.
    Simulate(SimulateArgs),
    /// Conditional CDF on a grid of z values.
    FitCdf {
        #[command(flatten)]
        data: DataArgs,
        /// Grid `lo:hi:steps`; defaults to the response range.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<Grid>,
    },
    /// Maximum-entropy weights at a conditioning point.
    Weights {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Conditional quantile.
    Quantile {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
    },
    /// Equal-tailed prediction interval.
    Interval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Rolling backtest over the last observations of a series.
    Backtest {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 5)]
        holdout: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Method used when `--bandwidth auto`.
        #[arg(long, value_enum, default_value = "rot")]
        method: Method,
        /// Candidate bandwidths for `--method cv`.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<Grid>,
    },
    /// Data-driven bandwidth selection.
    Bandwidth {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "rot")]
        method: Method,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        /// Candidate bandwidths for `--method cv`.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<Grid>,
    },
    /// Interval coverage on simulated AR(1) data.
    Coverage {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 495)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        holdout: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 400)]
        reps: usize,
        /// CSV of per-forecast records.
        #[arg(long)]
        raw: Option<PathBuf>,
    },
    /// Standardized CDF estimation errors on simulated Gaussian AR(1) data.
    Normality {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        at: f64,
        #[arg(long, default_value_t = 0.5)]
        z: f64,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        /// CSV of per-replication standardized errors.
        #[arg(long)]
        raw: Option<PathBuf>,
    },
    /// Quantile RMSE across increasing sample sizes.
    Consistency {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "200,800,3200")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long, default_value_t = 0.0)]
        at: f64,
        #[arg(long, default_value_t = 100)]
        reps: usize,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    /// CSV file holding the series.
    #[arg(long)]
    input: PathBuf,
    /// Column index (0-based) or header name.
    #[arg(long, default_value = "0")]
    column: ColumnSelector,
    /// Forecast horizon m: pairs (X_t, X_{t+m}).
    #[arg(long, default_value_t = 1)]
    horizon: usize,
}

#[derive(Args, Debug)]
struct DataArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Conditioning value y; defaults to the last observation.
    #[arg(long, allow_hyphen_values = true)]
    at: Option<f64>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, default_value_t = 0.76, allow_hyphen_values = true)]
    phi: f64,
    /// Innovations: `gaussian` or `t:<df>`.
    #[arg(long, default_value = "gaussian")]
    innov: InnovationArg,
    /// Innovation scale.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 500)]
    n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Plugin,
    Rot,
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BandwidthArg {
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for BandwidthArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(BandwidthArg::Auto);
        }
        match s.parse::<f64>() {
            Ok(h) if h.is_finite() && h > 0.0 => Ok(BandwidthArg::Fixed(h)),
            _ => Err(format!("expected a positive number or 'auto', got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum InnovationArg {
    Gaussian,
    StudentT(f64),
}

impl std::str::FromStr for InnovationArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.to_ascii_lowercase();
        if lower == "gaussian" || lower == "normal" {
            return Ok(InnovationArg::Gaussian);
        }
        let df = lower
            .strip_prefix("t:")
            .or_else(|| lower.strip_prefix("student-t:"))
            .and_then(|d| d.parse::<f64>().ok());
        match df {
            Some(df) if df > 0.0 && df.is_finite() => Ok(InnovationArg::StudentT(df)),
            _ => Err(format!("expected 'gaussian' or 't:<df>', got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Grid(Vec<f64>);

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || format!("expected 'lo:hi:steps', got '{s}'");
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite()) || steps == 0 || (steps > 1 && hi <= lo) {
            return Err(bad());
        }
        Ok(Grid(linspace(lo, hi, steps)))
    }
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    let d = (hi - lo) / (steps - 1) as f64;
    (0..steps)
        .map(|i| {
            if i + 1 == steps {
                hi
            } else {
                lo + d * i as f64
            }
        })
        .collect()
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(e) if e.is_data() => EXIT_DATA,
            CliError::Core(_) => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(args) => simulate(cli, args),
        Command::FitCdf { data, grid } => fit_cdf_cmd(cli, data, grid.as_ref()),
        Command::Weights { data } => weights(cli, data),
        Command::Quantile { data, tau } => quantile_cmd(cli, data, *tau),
        Command::Interval { data, alpha } => interval(cli, data, *alpha),
        Command::Backtest {
            input,
            holdout,
            alpha,
            method,
            grid,
        } => backtest_cmd(cli, input, *holdout, *alpha, *method, grid.as_ref()),
        Command::Bandwidth {
            data,
            method,
            tau,
            grid,
        } => bandwidth_cmd(cli, data, *method, *tau, grid.as_ref()),
        Command::Coverage {
            model,
            n,
            holdout,
            alpha,
            reps,
            raw,
        } => coverage(cli, model, *n, *holdout, *alpha, *reps, raw.as_deref()),
        Command::Normality {
            model,
            n,
            at,
            z,
            reps,
            raw,
        } => normality(cli, model, *n, *at, *z, *reps, raw.as_deref()),
        Command::Consistency {
            model,
            ns,
            tau,
            at,
            reps,
        } => consistency(cli, model, ns, *tau, *at, *reps),
    }
}

fn emit(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Core(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(cli: &Cli, value: &Value) -> CliResult<()> {
    let mut text = to_json_string(value);
    text.push('\n');
    emit(cli, &text)
}

fn explain(cli: &Cli, msg: &str) {
    if cli.explain {
        eprintln!("explain: {msg}");
    }
}

fn load(input: &InputArgs) -> CliResult<(TimeSeries, LaggedSample)> {
    let series = read_csv(&input.input, &input.column)?;
    if series.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: series.len(),
        }
        .into());
    }
    let samples = lag_embed(series.values(), input.horizon)?;
    Ok((series, samples))
}

fn conditioning_point(series: &TimeSeries, data: &DataArgs) -> f64 {
    data.at.unwrap_or_else(|| series.values()[series.len() - 1])
}

/// Bandwidth for single-point commands: the fixed value, or the rule of thumb.
fn point_bandwidth(cli: &Cli, samples: &LaggedSample) -> CliResult<f64> {
    match cli.bandwidth {
        BandwidthArg::Fixed(h) => {
            explain(
                cli,
                &format!("bandwidth fixed by --bandwidth at {}", format_g17(h)),
            );
            Ok(h)
        }
        BandwidthArg::Auto => {
            let h = h_rule_of_thumb(samples)?.h;
            explain(
                cli,
                &format!(
                    "no bandwidth given; using the rule of thumb 1.06·min(sd, IQR/1.349)·n^(-1/5) over the \
                     conditioning values, h = {} (override with --bandwidth <h>, or see the `bandwidth` command)",
                    format_g17(h)
                ),
            );
            Ok(h)
        }
    }
}

fn fit(cli: &Cli, data: &DataArgs) -> CliResult<(TimeSeries, LaggedSample, f64, ConditionalCdf)> {
    let (series, samples) = load(&data.input)?;
    let y = conditioning_point(&series, data);
    if data.at.is_none() {
        explain(
            cli,
            &format!("conditioning on the last observation y = {}", format_g17(y)),
        );
    }
    let h = point_bandwidth(cli, &samples)?;
    let spec = KernelSpec::new(cli.kernel, h)?;
    let f = fit_cdf_with(&samples, y, &spec, Weighting::MaxEntropy)?;
    Ok((series, samples, y, f))
}

fn status_of(f: &ConditionalCdf) -> &'static str {
    f.weights().map(|w| w.status.as_str()).unwrap_or("solved")
}

fn model_spec(model: &ModelArgs, n: usize, seed: u64) -> Ar1Spec {
    let innovation = match model.innov {
        InnovationArg::Gaussian => Innovation::Gaussian { sd: model.sigma },
        InnovationArg::StudentT(df) => Innovation::StudentT {
            df,
            scale: model.sigma,
        },
    };
    Ar1Spec {
        phi: model.phi,
        innovation,
        n,
        burn_in: model.burn_in,
        seed,
    }
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> CliResult<()> {
    let spec = model_spec(&args.model, args.n, cli.seed);
    let values = simulate_ar1(&spec)?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("value\n");
            for v in &values {
                out.push_str(&format_g17(*v));
                out.push('\n');
            }
            emit(cli, &out)
        }
        Format::Json => emit_json(cli, &json!({ "spec": spec, "values": values })),
    }
}

fn fit_cdf_cmd(cli: &Cli, data: &DataArgs, grid: Option<&Grid>) -> CliResult<()> {
    let (_, samples, y, f) = fit(cli, data)?;
    let zs = match grid {
        Some(g) => g.0.clone(),
        None => {
            let atoms = f.atoms();
            let (lo, hi) = (atoms[0], atoms[atoms.len() - 1]);
            let pad = 0.05 * (hi - lo).max(1e-8);
            linspace(lo - pad, hi + pad, 201)
        }
    };
    let curve = cdf_curve(&f, &zs)?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let meta = PlotMeta {
                kernel: cli.kernel,
                h: f.bandwidth(),
                y,
                n: samples.len(),
            };
            match &cli.output {
                Some(path) => {
                    let side = emit_plot_data(&curve, &meta, path)?;
                    explain(cli, &format!("metadata written to {}", side.display()));
                    Ok(())
                }
                None => emit(cli, &maxent_quantile::io::curve_csv(&curve)),
            }
        }
        Format::Json => emit_json(
            cli,
            &json!({
                "kernel": cli.kernel,
                "h": f.bandwidth(),
                "y": y,
                "n": samples.len(),
                "effective_n": f.effective_n(),
                "status": status_of(&f),
                "z": zs,
                "fhat": curve.iter().map(|c| c.1).collect::<Vec<_>>(),
            }),
        ),
    }
}

fn weights(cli: &Cli, data: &DataArgs) -> CliResult<()> {
    let (series, samples) = load(&data.input)?;
    let y = conditioning_point(&series, data);
    let h = point_bandwidth(cli, &samples)?;
    let cv = build_constraint_vector(&samples, y, &KernelSpec::new(cli.kernel, h)?)?;
    let w = solve_lambda(&cv)?;
    let footer = json!({
        "lambda": w.lambda,
        "k": w.k,
        "residual": w.residual,
        "status": w.status.as_str(),
    });
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("index,y_i,a_i,p_i\n");
            for (i, ((yi, ai), pi)) in samples
                .regressors()
                .iter()
                .zip(cv.values())
                .zip(&w.p)
                .enumerate()
            {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    i + 1,
                    format_g17(*yi),
                    format_g17(*ai),
                    format_g17(*pi)
                ));
            }
            out.push_str("# ");
            out.push_str(&to_json_string(&footer));
            out.push('\n');
            emit(cli, &out)
        }
        Format::Json => emit_json(
            cli,
            &json!({
                "y": y,
                "h": h,
                "lambda": w.lambda,
                "k": w.k,
                "residual": w.residual,
                "status": w.status.as_str(),
                "entropy": w.entropy(),
                "a": cv.values(),
                "p": w.p,
            }),
        ),
    }
}

fn require_json(cli: &Cli, command: &str) -> CliResult<()> {
    if cli.format == Some(Format::Csv) {
        return Err(CliError::Usage(format!(
            "{command} only supports --format json"
        )));
    }
    Ok(())
}

fn quantile_cmd(cli: &Cli, data: &DataArgs, tau: f64) -> CliResult<()> {
    require_json(cli, "quantile")?;
    let (_, _, y, f) = fit(cli, data)?;
    let q = quantile(&f, tau)?;
    emit_json(
        cli,
        &json!({
            "tau": tau,
            "value": q,
            "y": y,
            "h": f.bandwidth(),
            "effective_n": f.effective_n(),
            "status": status_of(&f),
        }),
    )
}

fn interval(cli: &Cli, data: &DataArgs, alpha: f64) -> CliResult<()> {
    require_json(cli, "interval")?;
    let (_, _, y, f) = fit(cli, data)?;
    let pi = prediction_interval(&f, alpha)?;
    emit_json(
        cli,
        &json!({
            "alpha": alpha,
            "lower": pi.lower,
            "upper": pi.upper,
            "y": y,
            "h": f.bandwidth(),
            "effective_n": f.effective_n(),
            "status": status_of(&f),
        }),
    )
}

/// Geometric grid around the rule of thumb, used when cv gets no `--grid`.
fn default_cv_grid(samples: &LaggedSample) -> CliResult<Vec<f64>> {
    let h = h_rule_of_thumb(samples)?.h;
    Ok((-6..=6).map(|k| h * 2f64.powf(k as f64 / 3.0)).collect())
}

fn backtest_cmd(
    cli: &Cli,
    input: &InputArgs,
    holdout: usize,
    alpha: f64,
    method: Method,
    grid: Option<&Grid>,
) -> CliResult<()> {
    let series = read_csv(&input.input, &input.column)?;
    let bandwidth = match (cli.bandwidth, method) {
        (BandwidthArg::Fixed(h), _) => BandwidthRule::Fixed(h),
        (BandwidthArg::Auto, Method::Rot) => BandwidthRule::RuleOfThumb,
        (BandwidthArg::Auto, Method::Plugin) => BandwidthRule::PlugIn,
        (BandwidthArg::Auto, Method::Cv) => match grid {
            // A grid derived from the whole series would leak the holdout.
            Some(g) => BandwidthRule::CrossValidation { grid: g.0.clone() },
            None => {
                return Err(CliError::Usage(
                    "backtest --method cv needs --grid lo:hi:steps".into(),
                ))
            }
        },
    };
    explain(
        cli,
        &format!(
            "each held-out step is fitted on earlier observations only and conditioned on the observed value \
             {} step(s) before it; bandwidth rule '{}' is re-resolved per step",
            input.horizon,
            bandwidth.name()
        ),
    );
    let cfg = BacktestConfig {
        holdout,
        alpha,
        horizon: input.horizon,
        family: cli.kernel,
        bandwidth,
    };
    let report = backtest(&series, &cfg)?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => emit(cli, &backtest_csv(&report)),
        Format::Json => {
            let mut text = json_of(&report)?;
            text.push('\n');
            emit(cli, &text)
        }
    }
}

fn bandwidth_cmd(
    cli: &Cli,
    data: &DataArgs,
    method: Method,
    tau: f64,
    grid: Option<&Grid>,
) -> CliResult<()> {
    require_json(cli, "bandwidth")?;
    let (series, samples) = load(&data.input)?;
    let y = conditioning_point(&series, data);
    let plan = match method {
        Method::Rot => h_rule_of_thumb(&samples)?,
        Method::Plugin => {
            explain(cli, "plug-in pilot bandwidth is the rule of thumb");
            plugin_from_data(&samples, y, tau, cli.kernel)?
        }
        Method::Cv => {
            let grid = match grid {
                Some(g) => g.0.clone(),
                None => default_cv_grid(&samples)?,
            };
            h_cross_validate(&samples, tau, &grid, data.input.horizon, cli.kernel)?
        }
    };
    let mut text = json_of(&plan)?;
    text.push('\n');
    emit(cli, &text)
}

fn auto_rule(cli: &Cli) -> BandwidthRule {
    match cli.bandwidth {
        BandwidthArg::Fixed(h) => BandwidthRule::Fixed(h),
        BandwidthArg::Auto => BandwidthRule::RuleOfThumb,
    }
}

fn write_raw(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Core(e.into()))
}

fn opt_g17(x: Option<f64>) -> String {
    x.map(format_g17).unwrap_or_default()
}

fn coverage(
    cli: &Cli,
    model: &ModelArgs,
    n: usize,
    holdout: usize,
    alpha: f64,
    reps: usize,
    raw: Option<&Path>,
) -> CliResult<()> {
    require_json(cli, "coverage")?;
    let spec = model_spec(model, n, cli.seed);
    let cfg = CoverageConfig {
        family: cli.kernel,
        bandwidth: auto_rule(cli),
        ..CoverageConfig::new(alpha, holdout, reps)
    };
    let report = coverage_experiment(&spec, &cfg)?;
    if let Some(path) = raw {
        let mut out = String::from("replication,step,true_value,lower,upper,contained\n");
        for r in &report.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.replication,
                r.step,
                format_g17(r.truth),
                opt_g17(r.lower),
                opt_g17(r.upper),
                r.contained.map(|c| c.to_string()).unwrap_or_default()
            ));
        }
        write_raw(path, &out)?;
    }
    let mut text = json_of(&report)?;
    text.push('\n');
    emit(cli, &text)
}

fn gaussian_only(model: &ModelArgs, command: &str) -> CliResult<()> {
    if model.innov != InnovationArg::Gaussian {
        return Err(CliError::Usage(format!(
            "{command} needs Gaussian innovations (its reference values are closed-form)"
        )));
    }
    Ok(())
}

fn normality(
    cli: &Cli,
    model: &ModelArgs,
    n: usize,
    y: f64,
    z: f64,
    reps: usize,
    raw: Option<&Path>,
) -> CliResult<()> {
    require_json(cli, "normality")?;
    gaussian_only(model, "normality")?;
    let spec = model_spec(model, n, cli.seed);
    let report = normality_experiment(&spec, y, z, reps, cli.kernel)?;
    if let Some(path) = raw {
        let mut out = String::from("standardized_error\n");
        for e in &report.standardized_errors {
            out.push_str(&format_g17(*e));
            out.push('\n');
        }
        write_raw(path, &out)?;
    }
    let mut text = json_of(&report)?;
    text.push('\n');
    emit(cli, &text)
}

fn consistency(
    cli: &Cli,
    model: &ModelArgs,
    ns: &[usize],
    tau: f64,
    y: f64,
    reps: usize,
) -> CliResult<()> {
    require_json(cli, "consistency")?;
    gaussian_only(model, "consistency")?;
    let spec = model_spec(model, 1, cli.seed);
    let report = consistency_experiment(&spec, tau, y, ns, reps, cli.kernel)?;
    let mut text = json_of(&report)?;
    text.push('\n');
    emit(cli, &text)
}
