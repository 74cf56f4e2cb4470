//! Flat-file ingestion and report emission.
//!
//! All readers take any `Read` source. The first row must be the exact
//! header for the schema; malformed data rows are skipped and tallied in an
//! [`IngestReport`] rather than aborting the read.
//!
//! Schemas:
//!
//! | file              | header                                            | units            |
//! |-------------------|---------------------------------------------------|------------------|
//! | trade             | `exporter,importer,year,value_usd`                | current USD      |
//! | GDP               | `country,year,gdp_usd`                            | current USD      |
//! | world sectors     | `sector,world_gdp_share_pct,world_trade_share_pct`| percent          |
//! | country sectors   | `country,year,sector,gdp_share`                   | fraction in [0,1]|
//! | tradability index | `country,year,index`                              | 0–100            |

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::domain::{AssemblyReport, CountryYearGdp, CountryYearIndex, TradeFlow};
use crate::econometrics::{EstimationResult, TestResult};
use crate::error::{Error, Result};
use crate::gravity::IdentificationResult;
use crate::tradability::{CountrySectorShares, IndexSeries, SectorRow, TradabilityTable};

pub const TRADE_HEADER: [&str; 4] = ["exporter", "importer", "year", "value_usd"];
pub const GDP_HEADER: [&str; 3] = ["country", "year", "gdp_usd"];
pub const WORLD_SECTORS_HEADER: [&str; 3] = ["sector", "world_gdp_share_pct", "world_trade_share_pct"];
pub const COUNTRY_SHARES_HEADER: [&str; 4] = ["country", "year", "sector", "gdp_share"];
pub const INDEX_HEADER: [&str; 3] = ["country", "year", "index"];

/// Allowed deviation of a country's sector shares from summing to one.
pub const SHARE_SUM_RANGE: (f64, f64) = (0.9, 1.1);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub drop_reasons: BTreeMap<String, usize>,
}

impl IngestReport {
    fn drop_row(&mut self, reason: &str) {
        self.drop_rows(reason, 1);
    }

    fn drop_rows(&mut self, reason: &str, n: usize) {
        self.rows_dropped += n;
        *self.drop_reasons.entry(reason.to_string()).or_default() += n;
    }
}

/// Data rows as owned strings, with per-row decoding failures already
/// reduced to a reason.
struct Rows {
    rows: Vec<std::result::Result<Vec<String>, &'static str>>,
}

fn read_rows<R: Read>(source: R, header: &[&str]) -> Result<Rows> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.byte_records();
    let first = match records.next() {
        None => return Err(Error::Schema(format!("empty input; expected header `{}`", header.join(",")))),
        Some(Err(e)) => return Err(csv_error(e)),
        Some(Ok(r)) => r,
    };
    let found: Vec<String> = first
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let s = String::from_utf8_lossy(f);
            let s = if i == 0 { s.trim_start_matches('\u{feff}') } else { &s };
            s.to_string()
        })
        .collect();
    if found.iter().map(String::as_str).ne(header.iter().copied()) {
        let missing = header.iter().find(|h| !found.iter().any(|f| f == *h));
        return Err(Error::Schema(match missing {
            Some(col) => format!("missing column `{col}`; expected header `{}`", header.join(",")),
            None => format!(
                "header `{}` does not match expected `{}`",
                found.join(","),
                header.join(",")
            ),
        }));
    }
    let mut rows = Vec::new();
    for rec in records {
        let row = match rec {
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => return Err(csv_error(e)),
                _ => Err("malformed_row"),
            },
            Ok(r) if r.len() == 1 && r[0].is_empty() => continue,
            Ok(r) if r.len() != header.len() => Err("wrong_field_count"),
            Ok(r) => r
                .iter()
                .map(|f| std::str::from_utf8(f).map(|s| s.trim().to_string()))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| "invalid_utf8"),
        };
        rows.push(row);
    }
    Ok(Rows { rows })
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        other => Error::Schema(format!("{other:?}")),
    }
}

fn parse_year(s: &str) -> std::result::Result<i32, &'static str> {
    s.parse().map_err(|_| "invalid_year")
}

fn parse_real(s: &str) -> std::result::Result<f64, &'static str> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err("invalid_number"),
    }
}

pub fn read_trade_csv<R: Read>(source: R) -> Result<(Vec<TradeFlow>, IngestReport)> {
    let rows = read_rows(source, &TRADE_HEADER)?;
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut flows = Vec::new();
    for row in rows.rows {
        report.rows_read += 1;
        let parsed = row.and_then(|f| {
            if f[0].is_empty() || f[1].is_empty() {
                return Err("empty_country");
            }
            let year = parse_year(&f[2])?;
            let value = parse_real(&f[3])?;
            if value < 0.0 {
                return Err("negative_value");
            }
            if f[0] == f[1] {
                return Err("self_trade");
            }
            Ok(TradeFlow {
                exporter: f[0].clone(),
                importer: f[1].clone(),
                year,
                value,
            })
        });
        match parsed {
            Ok(flow) => {
                if seen.insert((flow.exporter.clone(), flow.importer.clone(), flow.year)) {
                    flows.push(flow);
                } else {
                    report.drop_row("duplicate_key");
                }
            }
            Err(reason) => report.drop_row(reason),
        }
    }
    Ok((flows, report))
}

pub fn read_gdp_csv<R: Read>(source: R) -> Result<(Vec<CountryYearGdp>, IngestReport)> {
    let rows = read_rows(source, &GDP_HEADER)?;
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in rows.rows {
        report.rows_read += 1;
        let parsed = row.and_then(|f| {
            if f[0].is_empty() {
                return Err("empty_country");
            }
            let year = parse_year(&f[1])?;
            let gdp = parse_real(&f[2])?;
            if gdp <= 0.0 {
                return Err("nonpositive_gdp");
            }
            Ok(CountryYearGdp {
                country: f[0].clone(),
                year,
                gdp,
            })
        });
        match parsed {
            Ok(g) if seen.insert((g.country.clone(), g.year)) => out.push(g),
            Ok(_) => report.drop_row("duplicate_key"),
            Err(reason) => report.drop_row(reason),
        }
    }
    Ok((out, report))
}

/// Reads a precomputed tradability index (0–100 scale).
pub fn read_index_csv<R: Read>(source: R) -> Result<(Vec<CountryYearIndex>, IngestReport)> {
    let rows = read_rows(source, &INDEX_HEADER)?;
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in rows.rows {
        report.rows_read += 1;
        let parsed = row.and_then(|f| {
            if f[0].is_empty() {
                return Err("empty_country");
            }
            let year = parse_year(&f[1])?;
            let index = parse_real(&f[2])?;
            if index <= 0.0 {
                return Err("nonpositive_index");
            }
            if index > 100.0 {
                return Err("index_out_of_range");
            }
            Ok(CountryYearIndex {
                country: f[0].clone(),
                year,
                index,
            })
        });
        match parsed {
            Ok(i) if seen.insert((i.country.clone(), i.year)) => out.push(i),
            Ok(_) => report.drop_row("duplicate_key"),
            Err(reason) => report.drop_row(reason),
        }
    }
    Ok((out, report))
}

/// Reads the world sector table. Unlike the panel inputs, any bad row is an error.
pub fn read_world_sectors_csv<R: Read>(source: R) -> Result<Vec<SectorRow>> {
    let rows = read_rows(source, &WORLD_SECTORS_HEADER)?;
    let mut out = Vec::new();
    for (i, row) in rows.rows.into_iter().enumerate() {
        let line = i + 2;
        let f = row.map_err(|r| Error::Schema(format!("line {line}: {r}")))?;
        let gdp = parse_real(&f[1]).map_err(|r| Error::Schema(format!("line {line}: {r}")))?;
        let trade = parse_real(&f[2]).map_err(|r| Error::Schema(format!("line {line}: {r}")))?;
        if gdp < 0.0 || trade < 0.0 {
            return Err(Error::NegativeShare { sector: f[0].clone() });
        }
        out.push(SectorRow::new(f[0].clone(), gdp, trade));
    }
    Ok(out)
}

/// Reads per-country sector shares, grouped by `(country, year)` in key order.
/// A group whose shares do not sum into [`SHARE_SUM_RANGE`] is dropped whole.
pub fn read_country_sector_shares_csv<R: Read>(
    source: R,
) -> Result<(Vec<CountrySectorShares>, IngestReport)> {
    let rows = read_rows(source, &COUNTRY_SHARES_HEADER)?;
    let mut report = IngestReport::default();
    let mut groups: BTreeMap<(String, i32), BTreeMap<String, f64>> = BTreeMap::new();
    let mut group_rows: BTreeMap<(String, i32), usize> = BTreeMap::new();
    for row in rows.rows {
        report.rows_read += 1;
        let parsed = row.and_then(|f| {
            if f[0].is_empty() || f[2].is_empty() {
                return Err("empty_label");
            }
            let year = parse_year(&f[1])?;
            let share = parse_real(&f[3])?;
            if !(0.0..=1.0).contains(&share) {
                return Err("share_out_of_unit_interval");
            }
            Ok((f[0].clone(), year, f[2].clone(), share))
        });
        match parsed {
            Ok((country, year, sector, share)) => {
                let key = (country, year);
                let g = groups.entry(key.clone()).or_default();
                if g.contains_key(&sector) {
                    report.drop_row("duplicate_key");
                    continue;
                }
                g.insert(sector, share);
                *group_rows.entry(key).or_default() += 1;
            }
            Err(reason) => report.drop_row(reason),
        }
    }
    let mut out = Vec::new();
    for ((country, year), shares) in groups {
        let sum: f64 = shares.values().sum();
        if shares.is_empty() {
            continue;
        }
        if sum < SHARE_SUM_RANGE.0 || sum > SHARE_SUM_RANGE.1 {
            report.drop_rows("share_sum_out_of_range", group_rows[&(country.clone(), year)]);
            continue;
        }
        out.push(CountrySectorShares { country, year, shares });
    }
    Ok((out, report))
}

fn csv_line(fields: &[&str]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

pub fn write_trade_csv(flows: &[TradeFlow]) -> String {
    let mut out = csv_line(&TRADE_HEADER);
    for f in flows {
        let _ = writeln!(out, "{},{},{},{:?}", f.exporter, f.importer, f.year, f.value);
    }
    out
}

pub fn write_gdp_csv(gdps: &[CountryYearGdp]) -> String {
    let mut out = csv_line(&GDP_HEADER);
    for g in gdps {
        let _ = writeln!(out, "{},{},{:?}", g.country, g.year, g.gdp);
    }
    out
}

pub fn write_index_csv(index: &[CountryYearIndex]) -> String {
    let mut out = csv_line(&INDEX_HEADER);
    for i in index {
        let _ = writeln!(out, "{},{},{:?}", i.country, i.year, i.index);
    }
    out
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Tsv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "tsv" => Ok(Format::Tsv),
            other => Err(Error::InvalidConfig(format!("unknown format `{other}`"))),
        }
    }
}

/// Rounds to 10 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.9e}").parse().unwrap_or(x)
}

/// Text form of a report real: 10 significant digits, `NaN`, `inf` or `-inf`.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        serde_json::Number::from_f64(round_sig(x))
            .map(|n| n.to_string())
            .unwrap_or_else(|| x.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub method: String,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_obs: usize,
    pub n_groups: usize,
    pub df_resid: usize,
    pub ssr: f64,
    pub covariance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_u: Option<f64>,
    pub warnings: Vec<String>,
    pub tests: Vec<TestResult>,
}

impl EstimationReport {
    pub fn new(result: &EstimationResult, tests: Vec<TestResult>) -> Self {
        Self {
            method: result.method.label().to_string(),
            names: result.names.clone(),
            coefficients: result.coefficients.clone(),
            std_errors: result.std_errors.clone(),
            n_obs: result.n_obs,
            n_groups: result.n_groups,
            df_resid: result.df_resid,
            ssr: result.ssr,
            covariance: match result.covariance_kind {
                crate::econometrics::CovarianceKind::Conventional => "conventional".into(),
                crate::econometrics::CovarianceKind::ClusterByGroup => "cluster_by_pair".into(),
            },
            theta: result.theta,
            sigma2_e: result.variance_components.map(|v| v.sigma2_e),
            sigma2_u: result.variance_components.map(|v| v.sigma2_u),
            warnings: result.warnings.clone(),
            tests,
        }
    }
}

/// Output of the `estimate` command: one block per estimator plus the tests
/// that compare estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateBundle {
    pub results: Vec<EstimationReport>,
    pub tests: Vec<TestResult>,
    pub assembly: AssemblySummary,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssemblySummary {
    pub flows_in: usize,
    pub rows_emitted: usize,
    pub rows_dropped: usize,
    pub drop_reasons: BTreeMap<String, usize>,
}

impl From<&AssemblyReport> for AssemblySummary {
    fn from(r: &AssemblyReport) -> Self {
        Self {
            flows_in: r.flows_in,
            rows_emitted: r.rows_emitted,
            rows_dropped: r.rows_dropped,
            drop_reasons: r.drop_reasons.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorReportRow {
    pub sector: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    pub relative_tradability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReportRow {
    pub country: String,
    pub year: i32,
    pub index: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary_index: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageReportRow {
    pub country: String,
    pub mean: f64,
    pub years: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradabilityReport {
    pub sectors: Vec<SectorReportRow>,
    pub normalizer: String,
    pub index: Vec<IndexReportRow>,
    pub averages: Vec<AverageReportRow>,
}

impl TradabilityReport {
    pub fn new(table: &TradabilityTable, series: Option<&IndexSeries>) -> Self {
        let sectors = table
            .entries()
            .iter()
            .map(|e| SectorReportRow {
                sector: e.sector.clone(),
                ratio: e.ratio,
                result: e.classification.map(|c| c.label().to_string()),
                relative_tradability: e.relative_tradability,
            })
            .collect();
        let (index, averages) = match series {
            None => (Vec::new(), Vec::new()),
            Some(s) => (
                s.by_country_year
                    .iter()
                    .map(|((c, y), v)| IndexReportRow {
                        country: c.clone(),
                        year: *y,
                        index: *v,
                        binary_index: s.binary_by_country_year.get(&(c.clone(), *y)).copied(),
                    })
                    .collect(),
                s.averages
                    .iter()
                    .map(|(c, a)| AverageReportRow {
                        country: c.clone(),
                        mean: a.mean,
                        years: a.years,
                    })
                    .collect(),
            ),
        };
        Self {
            sectors,
            normalizer: table.normalizer().sector.clone(),
            index,
            averages,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub model: String,
    pub alpha: f64,
    pub std_error: f64,
    pub n_obs: usize,
    pub ssr: f64,
    pub tests: Vec<TestResult>,
    pub assembly: AssemblySummary,
}

impl IdentificationReport {
    pub fn new(model: &str, r: &IdentificationResult, assembly: AssemblySummary) -> Self {
        Self {
            model: model.to_string(),
            alpha: r.alpha,
            std_error: r.std_error,
            n_obs: r.n,
            ssr: r.ssr,
            tests: vec![r.test_alpha_one.clone()],
            assembly,
        }
    }
}

/// Anything `write_report` can emit.
pub trait Report: Serialize {
    fn write_tsv(&self, out: &mut String);
}

fn tsv_tests(out: &mut String, tests: &[TestResult]) {
    out.push_str("test\tstatistic\tdf\tp_value\n");
    for t in tests {
        let df: Vec<String> = t.df.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            t.name,
            fmt_real(t.statistic),
            df.join(","),
            fmt_real(t.p_value)
        );
    }
}

impl Report for EstimationReport {
    fn write_tsv(&self, out: &mut String) {
        let _ = writeln!(out, "# estimation\t{}", self.method);
        out.push_str("coefficient\testimate\tstd_error\n");
        for ((n, b), se) in self.names.iter().zip(&self.coefficients).zip(&self.std_errors) {
            let _ = writeln!(out, "{n}\t{}\t{}", fmt_real(*b), fmt_real(*se));
        }
        let _ = writeln!(out, "n_obs\t{}", self.n_obs);
        let _ = writeln!(out, "n_groups\t{}", self.n_groups);
        let _ = writeln!(out, "df_resid\t{}", self.df_resid);
        let _ = writeln!(out, "ssr\t{}", fmt_real(self.ssr));
        let _ = writeln!(out, "covariance\t{}", self.covariance);
        if let Some(t) = self.theta {
            let _ = writeln!(out, "theta\t{}", fmt_real(t));
        }
        if let (Some(e), Some(u)) = (self.sigma2_e, self.sigma2_u) {
            let _ = writeln!(out, "sigma2_e\t{}", fmt_real(e));
            let _ = writeln!(out, "sigma2_u\t{}", fmt_real(u));
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning\t{w}");
        }
        tsv_tests(out, &self.tests);
    }
}

impl Report for EstimateBundle {
    fn write_tsv(&self, out: &mut String) {
        for r in &self.results {
            r.write_tsv(out);
            out.push('\n');
        }
        out.push_str("# comparison\n");
        tsv_tests(out, &self.tests);
        out.push_str("\n# assembly\n");
        let _ = writeln!(out, "flows_in\t{}", self.assembly.flows_in);
        let _ = writeln!(out, "rows_emitted\t{}", self.assembly.rows_emitted);
        let _ = writeln!(out, "rows_dropped\t{}", self.assembly.rows_dropped);
        for (reason, n) in &self.assembly.drop_reasons {
            let _ = writeln!(out, "dropped:{reason}\t{n}");
        }
    }
}

impl Report for TradabilityReport {
    fn write_tsv(&self, out: &mut String) {
        out.push_str("# sectors\nsector\tratio\tresult\trelative_tradability\n");
        for s in &self.sectors {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                s.sector,
                s.ratio.map(fmt_real).unwrap_or_default(),
                s.result.as_deref().unwrap_or(""),
                fmt_real(s.relative_tradability)
            );
        }
        out.push_str("\n# index\ncountry\tyear\tindex\tbinary_index\n");
        for i in &self.index {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                i.country,
                i.year,
                fmt_real(i.index),
                i.binary_index.map(fmt_real).unwrap_or_default()
            );
        }
        out.push_str("\n# averages\ncountry\tmean\tyears\n");
        for a in &self.averages {
            let _ = writeln!(out, "{}\t{}\t{}", a.country, fmt_real(a.mean), a.years);
        }
    }
}

impl Report for IdentificationReport {
    fn write_tsv(&self, out: &mut String) {
        let _ = writeln!(out, "# identification\t{}", self.model);
        let _ = writeln!(out, "alpha\t{}", fmt_real(self.alpha));
        let _ = writeln!(out, "std_error\t{}", fmt_real(self.std_error));
        let _ = writeln!(out, "n_obs\t{}", self.n_obs);
        let _ = writeln!(out, "ssr\t{}", fmt_real(self.ssr));
        tsv_tests(out, &self.tests);
    }
}

impl Report for Vec<TestResult> {
    fn write_tsv(&self, out: &mut String) {
        tsv_tests(out, self);
    }
}

fn round_json(v: &mut serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round_sig(x))) {
                    *n = r;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Deterministic serialization; reals carry 10 significant digits and
/// non-finite reals become `null` in JSON.
pub fn write_report<R: Report + ?Sized>(report: &R, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut v = serde_json::to_value(report).unwrap_or(serde_json::Value::Null);
            round_json(&mut v);
            let mut s = v.to_string();
            s.push('\n');
            s.into_bytes()
        }
        Format::Tsv => {
            let mut s = String::new();
            report.write_tsv(&mut s);
            s.into_bytes()
        }
    }
}

pub fn parse_estimate_bundle(bytes: &[u8]) -> Result<EstimateBundle> {
    serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()))
}

pub fn parse_estimation_report(bytes: &[u8]) -> Result<EstimationReport> {
    serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()))
}
