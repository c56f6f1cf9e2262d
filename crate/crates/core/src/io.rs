//! Series ingestion, the rolling backtest and output formatting.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::bandwidth::BandwidthRule;
use crate::cond_dist::{fit_cdf, lag_embed};
use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::quantile::prediction_interval;

/// An ordered series of finite observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    name: Option<String>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row });
        }
        Ok(Self { values, name: None })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for ColumnSelector {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.to_string()),
        })
    }
}

impl std::fmt::Display for ColumnSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColumnSelector::Index(i) => write!(f, "{i}"),
            ColumnSelector::Name(n) => f.write_str(n),
        }
    }
}

/// Reads one numeric column of a comma-separated file.
///
/// The first row is a header when its selected cell is not a number; a
/// column selected by name always requires a header. Rows are 1-based file
/// rows in error messages.
pub fn read_csv(path: impl AsRef<Path>, column: &ColumnSelector) -> Result<TimeSeries> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(e.to_string()))?;

    let mut records = reader.records().enumerate().peekable();
    let mut idx = match column {
        ColumnSelector::Index(i) => Some(*i),
        ColumnSelector::Name(_) => None,
    };
    let mut name = None;

    if let Some((_, first)) = records.peek() {
        let first = first.as_ref().map_err(|e| Error::Io(e.to_string()))?;
        let is_header = match column {
            ColumnSelector::Index(i) => first.get(*i).is_some_and(|c| c.parse::<f64>().is_err()),
            ColumnSelector::Name(n) => {
                idx = first.iter().position(|c| c == n);
                if idx.is_none() {
                    return Err(Error::Parse {
                        row: 1,
                        column: n.clone(),
                        message: "column not found in header".into(),
                    });
                }
                true
            }
        };
        if is_header {
            name = idx.and_then(|i| first.get(i)).map(str::to_string);
            records.next();
        }
    }
    let idx = idx.expect("column index resolved");

    let mut values = Vec::new();
    for (i, rec) in records {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        let cell = rec.get(idx).ok_or_else(|| Error::Parse {
            row,
            column: column.to_string(),
            message: "missing cell".into(),
        })?;
        if cell.is_empty() {
            return Err(Error::Parse {
                row,
                column: column.to_string(),
                message: "empty cell".into(),
            });
        }
        let v: f64 = cell.parse().map_err(|_| Error::Parse {
            row,
            column: column.to_string(),
            message: format!("'{cell}' is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { row });
        }
        values.push(v);
    }
    let series = TimeSeries { values, name: None };
    Ok(match name {
        Some(n) => series.with_name(n),
        None => series,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub holdout: usize,
    pub alpha: f64,
    pub horizon: usize,
    pub family: KernelFamily,
    pub bandwidth: BandwidthRule,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            holdout: 5,
            alpha: 0.05,
            horizon: 1,
            family: KernelFamily::Epanechnikov,
            bandwidth: BandwidthRule::RuleOfThumb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestRow {
    /// 1-based position of the forecast target in the series.
    pub index: usize,
    pub truth: f64,
    pub conditioning: f64,
    pub bandwidth: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub contained: Option<bool>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub alpha: f64,
    pub level: f64,
    pub rows: Vec<BacktestRow>,
    pub hits: usize,
    pub evaluated: usize,
    pub hit_rate: f64,
    pub mean_width: f64,
}

/// Rolling-origin evaluation of the last `holdout` observations.
///
/// The forecast of observation `t` with horizon `m` reads only
/// `series[..=t - m]`: it is fitted on those observations and conditioned on
/// `series[t - m]`.
pub fn backtest(series: &TimeSeries, cfg: &BacktestConfig) -> Result<BacktestReport> {
    backtest_values(series.values(), cfg)
}

/// [`backtest`] on raw values, without the finiteness check on the series.
pub fn backtest_values(values: &[f64], cfg: &BacktestConfig) -> Result<BacktestReport> {
    if cfg.holdout == 0 {
        return Err(Error::InvalidSpec("holdout must be at least 1".into()));
    }
    if cfg.horizon == 0 {
        return Err(Error::InvalidSpec("horizon must be at least 1".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidAlpha(cfg.alpha));
    }
    let needed = cfg.holdout + cfg.horizon + 11;
    if values.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: values.len(),
        });
    }
    let first = values.len() - cfg.holdout;
    let rows: Vec<BacktestRow> = (first..values.len())
        .map(|t| backtest_step(&values[..=t - cfg.horizon], values[t], t, cfg))
        .collect();

    let mut hits = 0;
    let mut evaluated = 0;
    let mut width = 0.0;
    for row in &rows {
        if let (Some(c), Some(lo), Some(hi)) = (row.contained, row.lower, row.upper) {
            evaluated += 1;
            hits += c as usize;
            width += hi - lo;
        }
    }
    Ok(BacktestReport {
        alpha: cfg.alpha,
        level: 1.0 - cfg.alpha,
        rows,
        hits,
        evaluated,
        hit_rate: if evaluated > 0 {
            hits as f64 / evaluated as f64
        } else {
            f64::NAN
        },
        mean_width: if evaluated > 0 {
            width / evaluated as f64
        } else {
            f64::NAN
        },
    })
}

fn backtest_step(history: &[f64], truth: f64, t: usize, cfg: &BacktestConfig) -> BacktestRow {
    let y = *history.last().expect("history is nonempty");
    let mut row = BacktestRow {
        index: t + 1,
        truth,
        conditioning: y,
        bandwidth: None,
        lower: None,
        upper: None,
        contained: None,
        status: "error".into(),
        error: None,
    };
    let result = (|| {
        let samples = lag_embed(history, cfg.horizon)?;
        let h =
            cfg.bandwidth
                .resolve(&samples, y, 1.0 - cfg.alpha / 2.0, cfg.horizon, cfg.family)?;
        let fit = fit_cdf(&samples, y, &KernelSpec::new(cfg.family, h)?)?;
        let pi = prediction_interval(&fit, cfg.alpha)?;
        let status = fit
            .weights()
            .map_or("uniform", |w| w.status.as_str())
            .to_string();
        Ok::<_, Error>((h, pi, status))
    })();
    match result {
        Ok((h, pi, status)) => {
            row.bandwidth = Some(h);
            row.lower = Some(pi.lower);
            row.upper = Some(pi.upper);
            row.contained = Some(pi.contains(truth));
            row.status = status;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// `%.17g`: 17 significant digits, exponent form outside `[1e-4, 1e17)`.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        let fixed = format!("{:.*}", decimals, x);
        strip_zeros(&fixed)
    } else {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Serializes JSON with every float printed by [`format_g17`]. Non-finite
/// floats become `null`.
pub fn to_json_string(value: &Value) -> String {
    let mut out = String::new();
    write_json(value, &mut out);
    out
}

fn write_json(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().unwrap();
                if f.is_finite() {
                    out.push_str(&format_g17(f));
                } else {
                    out.push_str("null");
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_json(v, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push(':');
                write_json(v, out);
            }
            out.push('}');
        }
    }
}

/// JSON text of any serializable report, floats at 17 significant digits.
pub fn json_of<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
    Ok(to_json_string(&v))
}

fn opt(x: Option<f64>) -> String {
    x.map(format_g17).unwrap_or_default()
}

/// CSV rendering of a backtest, with a trailing `#` summary line.
pub fn backtest_csv(report: &BacktestReport) -> String {
    let mut out =
        String::from("index,true_value,conditioning,bandwidth,lower,upper,contained,status\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.index,
            format_g17(r.truth),
            format_g17(r.conditioning),
            opt(r.bandwidth),
            opt(r.lower),
            opt(r.upper),
            r.contained.map(|c| c.to_string()).unwrap_or_default(),
            r.status,
        ));
    }
    out.push_str(&format!(
        "# summary hits={} evaluated={} hit_rate={} mean_width={} level={}\n",
        report.hits,
        report.evaluated,
        format_g17(report.hit_rate),
        format_g17(report.mean_width),
        format_g17(report.level),
    ));
    out
}

/// Metadata written next to plot data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotMeta {
    pub kernel: KernelFamily,
    pub h: f64,
    pub y: f64,
    pub n: usize,
}

/// CSV text `z,fhat` for a curve, in grid order.
pub fn curve_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("z,fhat\n");
    for &(z, f) in curve {
        out.push_str(&format_g17(z));
        out.push(',');
        out.push_str(&format_g17(f));
        out.push('\n');
    }
    out
}

/// Path of the metadata sidecar for `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes `curve` as CSV to `path` and a one-line JSON sidecar with `meta`
/// to [`sidecar_path`].
pub fn emit_plot_data(curve: &[(f64, f64)], meta: &PlotMeta, path: &Path) -> Result<PathBuf> {
    File::create(path)?.write_all(curve_csv(curve).as_bytes())?;
    let side = sidecar_path(path);
    let mut line = json_of(meta)?;
    line.push('\n');
    File::create(&side)?.write_all(line.as_bytes())?;
    Ok(side)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_plain_column() {
        let f = write_tmp("1\n2\n3\n");
        let s = read_csv(f.path(), &ColumnSelector::Index(0)).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.name(), None);
    }

    #[test]
    fn detects_header() {
        let f = write_tmp("t,v\n0,1.5\n1,2.5\n");
        let s = read_csv(f.path(), &"v".parse().unwrap()).unwrap();
        assert_eq!(s.values(), &[1.5, 2.5]);
        assert_eq!(s.name(), Some("v"));
        let s = read_csv(f.path(), &ColumnSelector::Index(1)).unwrap();
        assert_eq!(s.values(), &[1.5, 2.5]);
    }

    #[test]
    fn reports_bad_cells() {
        let f = write_tmp("v\n1\nabc\n3\n");
        match read_csv(f.path(), &ColumnSelector::Index(0)) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("1\n\n2\n");
        // Blank lines are skipped by the reader; an empty cell is not.
        assert!(read_csv(f.path(), &ColumnSelector::Index(0)).is_ok());
        let f = write_tmp("a,b\n1,\n");
        assert!(matches!(
            read_csv(f.path(), &ColumnSelector::Index(1)),
            Err(Error::Parse { row: 2, .. })
        ));
        let f = write_tmp("1\ninf\n");
        assert_eq!(
            read_csv(f.path(), &ColumnSelector::Index(0)),
            Err(Error::NonFiniteValue { row: 2 })
        );
        assert!(matches!(
            read_csv("/nonexistent/file.csv", &ColumnSelector::Index(0)),
            Err(Error::FileNotFound(_))
        ));
        let f = write_tmp("a,b\n1,2\n");
        assert!(read_csv(f.path(), &"c".parse().unwrap()).is_err());
    }

    #[test]
    fn constant_series_collapses() {
        let s = TimeSeries::new(vec![2.5; 40]).unwrap();
        let cfg = BacktestConfig {
            holdout: 1,
            bandwidth: BandwidthRule::Fixed(1.0),
            ..Default::default()
        };
        let r = backtest(&s, &cfg).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!((r.rows[0].lower, r.rows[0].upper), (Some(2.5), Some(2.5)));
        assert_eq!(r.rows[0].contained, Some(true));

        // The rule of thumb has no scale to work with; the step reports it.
        let r = backtest(
            &s,
            &BacktestConfig {
                holdout: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.rows[0].error.is_some());
        assert_eq!(r.evaluated, 0);
    }

    #[test]
    fn backtest_too_short() {
        let s = TimeSeries::new((0..10).map(f64::from).collect()).unwrap();
        assert!(matches!(
            backtest(&s, &BacktestConfig::default()),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn g17_formatting() {
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(-2.5), "-2.5");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(123456.0), "123456");
        for x in [0.1, 1.0 / 3.0, -7.25e-9, 6.02e23, 2.3753, 1e-300] {
            assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_uses_g17() {
        let v = serde_json::json!({"a": 0.1, "b": [1, 2.0], "c": "x", "d": null});
        assert_eq!(
            to_json_string(&v),
            r#"{"a":0.10000000000000001,"b":[1,2],"c":"x","d":null}"#
        );
    }

    #[test]
    fn plot_data_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let meta = PlotMeta {
            kernel: KernelFamily::Epanechnikov,
            h: 0.5,
            y: 0.0,
            n: 10,
        };
        emit_plot_data(&[], &meta, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "z,fhat\n");

        let curve = [(0.0, 0.0), (1.0, 0.5), (2.0, 1.0)];
        let side = emit_plot_data(&curve, &meta, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let text = String::from_utf8(first.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(1).unwrap().starts_with("0,"));
        let side_text = std::fs::read_to_string(&side).unwrap();
        assert_eq!(side_text.lines().count(), 1);
        assert!(side_text.contains("\"kernel\":\"epanechnikov\""));
        emit_plot_data(&curve, &meta, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }
}
