//! Sector tradability and the per-country tradability index.
//!
//! A sector's ratio is its world trade share over its world GDP share. The
//! relative tradability (RT) rescales ratios so the most tradable sector reads
//! 100, and a country's index is the GDP-share-weighted sum of sector RTs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of the world sector table. Shares are in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorRow {
    pub sector: String,
    pub world_gdp_share: f64,
    pub world_trade_share: f64,
}

impl SectorRow {
    pub fn new(sector: impl Into<String>, world_gdp_share: f64, world_trade_share: f64) -> Self {
        Self {
            sector: sector.into(),
            world_gdp_share,
            world_trade_share,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Tradable,
    NonTradable,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::Tradable => "Tradable",
            Classification::NonTradable => "Non-tradable",
        }
    }
}

pub fn sector_ratio(row: &SectorRow) -> Result<f64> {
    if row.world_gdp_share < 0.0 || row.world_trade_share < 0.0 {
        return Err(Error::NegativeShare {
            sector: row.sector.clone(),
        });
    }
    if row.world_gdp_share == 0.0 {
        return Err(Error::DivisionByZeroShare {
            sector: row.sector.clone(),
        });
    }
    Ok(row.world_trade_share / row.world_gdp_share)
}

/// Strict: a ratio of exactly 1 is non-tradable.
pub fn classify(ratio: f64) -> Classification {
    if ratio > 1.0 {
        Classification::Tradable
    } else {
        Classification::NonTradable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorEntry {
    pub sector: String,
    /// Absent when the table was built from a relative-tradability column alone.
    pub ratio: Option<f64>,
    pub classification: Option<Classification>,
    /// 0–100.
    pub relative_tradability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradabilityTable {
    entries: Vec<SectorEntry>,
    /// Index of the sector that defines 100 (first maximum in input order).
    normalizer: usize,
}

impl TradabilityTable {
    /// Normalizes raw ratios so the largest one maps to exactly 100.
    pub fn from_ratios<S: Into<String>>(ratios: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let pairs: Vec<(String, f64)> = ratios.into_iter().map(|(s, r)| (s.into(), r)).collect();
        if pairs.is_empty() {
            return Err(Error::EmptyTable);
        }
        if let Some((s, _)) = pairs.iter().find(|(_, r)| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::NegativeShare { sector: s.clone() });
        }
        let mut normalizer = 0;
        for (i, (_, r)) in pairs.iter().enumerate() {
            if *r > pairs[normalizer].1 {
                normalizer = i;
            }
        }
        let max = pairs[normalizer].1;
        let entries = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (sector, ratio))| SectorEntry {
                sector,
                ratio: Some(ratio),
                classification: Some(classify(ratio)),
                relative_tradability: if i == normalizer {
                    100.0
                } else if max > 0.0 {
                    100.0 * ratio / max
                } else {
                    100.0
                },
            })
            .collect();
        Ok(Self { entries, normalizer })
    }

    /// Wraps an already-computed relative tradability column, e.g. a published one.
    pub fn from_relative<S: Into<String>>(column: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let entries: Vec<SectorEntry> = column
            .into_iter()
            .map(|(s, rt)| SectorEntry {
                sector: s.into(),
                ratio: None,
                classification: None,
                relative_tradability: rt,
            })
            .collect();
        if entries.is_empty() {
            return Err(Error::EmptyTable);
        }
        if let Some(e) = entries
            .iter()
            .find(|e| !(0.0..=100.0).contains(&e.relative_tradability))
        {
            return Err(Error::InconsistentInputs(format!(
                "relative tradability of `{}` outside [0, 100]",
                e.sector
            )));
        }
        let mut normalizer = 0;
        for (i, e) in entries.iter().enumerate() {
            if e.relative_tradability > entries[normalizer].relative_tradability {
                normalizer = i;
            }
        }
        Ok(Self { entries, normalizer })
    }

    pub fn entries(&self) -> &[SectorEntry] {
        &self.entries
    }

    pub fn normalizer(&self) -> &SectorEntry {
        &self.entries[self.normalizer]
    }

    pub fn get(&self, sector: &str) -> Option<&SectorEntry> {
        self.entries.iter().find(|e| e.sector == sector)
    }
}

pub fn relative_tradability(rows: &[SectorRow]) -> Result<TradabilityTable> {
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let ratios = rows
        .iter()
        .map(|r| Ok((r.sector.clone(), sector_ratio(r)?)))
        .collect::<Result<Vec<_>>>()?;
    TradabilityTable::from_ratios(ratios)
}

/// Sector composition of one country's GDP in one year; shares are fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountrySectorShares {
    pub country: String,
    pub year: i32,
    pub shares: BTreeMap<String, f64>,
}

/// `λ_c = Σ_s share_s · RT_s`, on the 0–100 scale.
pub fn country_index(shares: &CountrySectorShares, table: &TradabilityTable) -> Result<f64> {
    shares.shares.iter().try_fold(0.0, |acc, (sector, share)| {
        let entry = table.get(sector).ok_or_else(|| Error::SectorMismatch {
            sector: sector.clone(),
        })?;
        Ok(acc + share * entry.relative_tradability)
    })
}

/// The binary alternative: 100 × the GDP share of sectors classified tradable.
pub fn binary_index(shares: &CountrySectorShares, table: &TradabilityTable) -> Result<f64> {
    shares.shares.iter().try_fold(0.0, |acc, (sector, share)| {
        let entry = table.get(sector).ok_or_else(|| Error::SectorMismatch {
            sector: sector.clone(),
        })?;
        match entry.classification {
            Some(Classification::Tradable) => Ok(acc + 100.0 * share),
            Some(Classification::NonTradable) => Ok(acc),
            None => Err(Error::InconsistentInputs(format!(
                "sector `{sector}` has no classification"
            ))),
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryAverage {
    pub mean: f64,
    pub years: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndexSeries {
    pub by_country_year: BTreeMap<(String, i32), f64>,
    pub binary_by_country_year: BTreeMap<(String, i32), f64>,
    pub averages: BTreeMap<String, CountryAverage>,
}

pub fn index_series(all: &[CountrySectorShares], table: &TradabilityTable) -> Result<IndexSeries> {
    let mut series = IndexSeries::default();
    let has_classes = table.entries.iter().all(|e| e.classification.is_some());
    for s in all {
        let key = (s.country.clone(), s.year);
        series.by_country_year.insert(key.clone(), country_index(s, table)?);
        if has_classes {
            series.binary_by_country_year.insert(key, binary_index(s, table)?);
        }
    }
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for ((country, _), v) in &series.by_country_year {
        let e = sums.entry(country.as_str()).or_default();
        e.0 += v;
        e.1 += 1;
    }
    series.averages = sums
        .into_iter()
        .map(|(c, (sum, n))| {
            (
                c.to_string(),
                CountryAverage {
                    mean: sum / n as f64,
                    years: n,
                },
            )
        })
        .collect();
    Ok(series)
}
