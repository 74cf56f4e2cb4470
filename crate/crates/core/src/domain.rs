//! Core value types and assembly of the log-linear estimation panel.
//!
//! A panel row is one directed exporter → importer flow in one year, carrying
//! `ln X_ab`, `ln λ_a` and `ln(Y_a·Y_b/Y_w)`. Rows whose logarithms would be
//! undefined (zero trade, missing GDP or tradability) are dropped and counted.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryYearGdp {
    pub country: String,
    pub year: i32,
    /// Current US dollars.
    pub gdp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeFlow {
    pub exporter: String,
    pub importer: String,
    pub year: i32,
    /// Current US dollars.
    pub value: f64,
}

/// Tradability index of one country in one year, on the 0–100 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryYearIndex {
    pub country: String,
    pub year: i32,
    pub index: f64,
}

/// How `Y_w` is obtained for a year.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WorldGdpMode {
    /// Sum of the GDPs of every sample country observed in that year.
    #[default]
    SumOfSample,
    /// A fixed, externally supplied world GDP.
    Exogenous(f64),
}

pub fn world_gdp(gdps: &[CountryYearGdp], year: i32, mode: WorldGdpMode) -> Result<f64> {
    let mut seen = false;
    let mut total = 0.0;
    for g in gdps.iter().filter(|g| g.year == year) {
        seen = true;
        total += g.gdp;
    }
    if !seen {
        return Err(Error::MissingYear(year));
    }
    match mode {
        WorldGdpMode::SumOfSample => {
            if total > 0.0 && total.is_finite() {
                Ok(total)
            } else {
                Err(Error::InvalidWorldGdp(total))
            }
        }
        WorldGdpMode::Exogenous(v) if v > 0.0 && v.is_finite() => Ok(v),
        WorldGdpMode::Exogenous(v) => Err(Error::InvalidWorldGdp(v)),
    }
}

/// Opaque key of a directed (exporter, importer) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairId(pub u32);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub pair_id: PairId,
    pub year: i32,
    pub ln_trade: f64,
    pub ln_lambda_exporter: f64,
    /// `ln(Y_a·Y_b/Y_w)`.
    pub ln_mass: f64,
}

impl PanelObservation {
    pub fn regressors(&self) -> [f64; 2] {
        [self.ln_lambda_exporter, self.ln_mass]
    }
}

pub const REGRESSOR_NAMES: [&str; 2] = ["ln_lambda_exporter", "ln_mass"];

/// Possibly unbalanced panel, observations sorted by `(pair_id, year)` so
/// that every group is a contiguous run.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    observations: Vec<PanelObservation>,
    group_count: usize,
    regressor_names: Vec<String>,
    pair_labels: BTreeMap<PairId, (String, String)>,
}

impl PanelDataset {
    /// Builds a panel from arbitrary observations. Fails on an empty input or
    /// any non-finite value.
    pub fn new(mut observations: Vec<PanelObservation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyPanel);
        }
        for o in &observations {
            if !(o.ln_trade.is_finite() && o.ln_lambda_exporter.is_finite() && o.ln_mass.is_finite()) {
                return Err(Error::InconsistentInputs(format!(
                    "non-finite value in pair {} year {}",
                    o.pair_id.0, o.year
                )));
            }
        }
        observations.sort_by_key(|o| (o.pair_id, o.year));
        let group_count = observations
            .iter()
            .map(|o| o.pair_id)
            .collect::<BTreeSet<_>>()
            .len();
        Ok(Self {
            observations,
            group_count,
            regressor_names: REGRESSOR_NAMES.iter().map(|s| s.to_string()).collect(),
            pair_labels: BTreeMap::new(),
        })
    }

    pub fn observations(&self) -> &[PanelObservation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn regressor_names(&self) -> &[String] {
        &self.regressor_names
    }

    /// `(exporter, importer)` for a pair, when the panel was assembled from flows.
    pub fn pair_label(&self, id: PairId) -> Option<(&str, &str)> {
        self.pair_labels
            .get(&id)
            .map(|(e, i)| (e.as_str(), i.as_str()))
    }

    /// Group sizes in pair order.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.group_count);
        let mut last = None;
        for o in &self.observations {
            if last == Some(o.pair_id) {
                *sizes.last_mut().unwrap() += 1;
            } else {
                sizes.push(1);
                last = Some(o.pair_id);
            }
        }
        sizes
    }
}

/// Counts of flows that did not make it into the panel.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AssemblyReport {
    pub flows_in: usize,
    pub rows_emitted: usize,
    pub rows_dropped: usize,
    pub drop_reasons: BTreeMap<String, usize>,
}

impl AssemblyReport {
    fn drop(&mut self, reason: &str) {
        self.rows_dropped += 1;
        *self.drop_reasons.entry(reason.to_string()).or_default() += 1;
    }
}

/// Assembles the regression panel.
///
/// `lambdas` are on the 0–100 index scale and enter as `ln(index/100)`.
pub fn build_panel(
    flows: &[TradeFlow],
    gdps: &[CountryYearGdp],
    lambdas: &[CountryYearIndex],
    year_range: Option<RangeInclusive<i32>>,
    world_mode: WorldGdpMode,
) -> Result<(PanelDataset, AssemblyReport)> {
    let gdp: HashMap<(&str, i32), f64> = gdps
        .iter()
        .map(|g| ((g.country.as_str(), g.year), g.gdp))
        .collect();
    let lambda: HashMap<(&str, i32), f64> = lambdas
        .iter()
        .map(|l| ((l.country.as_str(), l.year), l.index))
        .collect();
    let mut world: HashMap<i32, Option<f64>> = HashMap::new();

    let mut key_count: HashMap<(&str, &str, i32), usize> = HashMap::new();
    for f in flows {
        *key_count
            .entry((f.exporter.as_str(), f.importer.as_str(), f.year))
            .or_default() += 1;
    }

    let mut report = AssemblyReport {
        flows_in: flows.len(),
        ..Default::default()
    };
    // (exporter, importer, year) -> row, ordered so assembly ignores input order
    let mut rows: BTreeMap<(&str, &str, i32), (f64, f64, f64)> = BTreeMap::new();
    for f in flows {
        if let Some(r) = &year_range {
            if !r.contains(&f.year) {
                report.drop("out_of_year_range");
                continue;
            }
        }
        if f.exporter == f.importer {
            report.drop("self_trade");
            continue;
        }
        if key_count[&(f.exporter.as_str(), f.importer.as_str(), f.year)] > 1 {
            report.drop("duplicate_flow");
            continue;
        }
        if !(f.value > 0.0 && f.value.is_finite()) {
            report.drop("nonpositive_trade");
            continue;
        }
        let (Some(&ya), Some(&yb)) = (
            gdp.get(&(f.exporter.as_str(), f.year)),
            gdp.get(&(f.importer.as_str(), f.year)),
        ) else {
            report.drop("missing_gdp");
            continue;
        };
        if !(ya > 0.0 && yb > 0.0) {
            report.drop("nonpositive_gdp");
            continue;
        }
        let Some(&lam) = lambda.get(&(f.exporter.as_str(), f.year)) else {
            report.drop("missing_lambda");
            continue;
        };
        if !(lam > 0.0 && lam.is_finite()) {
            report.drop("nonpositive_lambda");
            continue;
        }
        let yw = *world
            .entry(f.year)
            .or_insert_with(|| world_gdp(gdps, f.year, world_mode).ok());
        let Some(yw) = yw else {
            report.drop("missing_world_gdp");
            continue;
        };
        let ln_mass = ya.ln() + yb.ln() - yw.ln();
        rows.insert(
            (f.exporter.as_str(), f.importer.as_str(), f.year),
            (f.value.ln(), (lam / 100.0).ln(), ln_mass),
        );
    }

    let mut pair_ids: BTreeMap<(&str, &str), PairId> = BTreeMap::new();
    let mut observations = Vec::with_capacity(rows.len());
    for ((exp, imp, year), (ln_trade, ln_lambda_exporter, ln_mass)) in rows {
        let next = PairId(pair_ids.len() as u32);
        let pair_id = *pair_ids.entry((exp, imp)).or_insert(next);
        observations.push(PanelObservation {
            pair_id,
            year,
            ln_trade,
            ln_lambda_exporter,
            ln_mass,
        });
    }
    report.rows_emitted = observations.len();
    if observations.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let mut panel = PanelDataset::new(observations)?;
    panel.pair_labels = pair_ids
        .into_iter()
        .map(|((e, i), id)| (id, (e.to_string(), i.to_string())))
        .collect();
    Ok((panel, report))
}
