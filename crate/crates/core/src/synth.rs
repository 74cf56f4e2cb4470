//! Synthetic worlds drawn from the tradability gravity model.
//!
//! Each country splits its GDP into tradable and non-tradable output, with
//! `λ = tradable / GDP`. Exports are
//!
//! ```text
//! X_ab,t = λ_a,t · Y_a,t·Y_b,t / Y_w,t · exp(u_ab) · exp(ε_ab,t)
//! ```
//!
//! with `Y_w` the sum over generated countries, `u_ab` a directed-pair effect
//! and `ε ~ N(0, σ²)`, so the log-linear gravity regression with
//! `β = (0, 1, 1)` is the exact data-generating process.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64`. Independent quantities use separate ChaCha streams so
//! that, for example, changing the λ range never perturbs the GDP draws.
//! ChaCha output is specified bit-for-bit, so worlds reproduce across
//! platforms.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{build_panel, CountryYearGdp, CountryYearIndex, TradeFlow, WorldGdpMode};
use crate::econometrics::{
    f_test_panel_effects, fixed_effects, hausman, pooled, random_effects, t_test_equals,
    EstimationResult, EstimatorOptions,
};
use crate::error::{Error, Result};

const STREAM_GDP: u64 = 0;
const STREAM_LAMBDA: u64 = 1;
const STREAM_EFFECTS: u64 = 2;
const STREAM_NOISE: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_countries: usize,
    pub n_years: usize,
    pub first_year: i32,
    /// Bounds of the uniform λ draw, a sub-interval of (0, 1].
    pub lambda_range: (f64, f64),
    /// Redraw λ every year; otherwise λ is fixed per country.
    pub lambda_varies_by_year: bool,
    /// Bounds of the uniform draw of initial log GDP (natural log, USD).
    pub gdp_log_range: (f64, f64),
    /// Mean and standard deviation of annual log GDP growth.
    pub gdp_growth: (f64, f64),
    pub sigma_noise: f64,
    pub pair_effect_sigma: f64,
    /// Shift pair effects by `effect_loading` standard deviations of the
    /// pair's mean `ln(Y_a·Y_b/Y_w)`, violating the random-effects assumption.
    pub correlate_effects_with_regressors: bool,
    pub effect_loading: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_countries: 40,
            n_years: 10,
            first_year: 2000,
            lambda_range: (0.04, 0.15),
            lambda_varies_by_year: true,
            gdp_log_range: (23.0, 30.0),
            gdp_growth: (0.03, 0.05),
            sigma_noise: 0.5,
            pair_effect_sigma: 0.5,
            correlate_effects_with_regressors: false,
            effect_loading: 1.0,
            seed: 20_000_101,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_countries < 2 {
            return bad(format!("n_countries = {} (need ≥ 2)", self.n_countries));
        }
        if self.n_years < 1 {
            return bad("n_years must be ≥ 1".into());
        }
        let (lo, hi) = self.lambda_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad(format!("lambda_range ({lo}, {hi}) not inside (0, 1]"));
        }
        let (glo, ghi) = self.gdp_log_range;
        if !(glo.is_finite() && ghi.is_finite() && glo <= ghi) {
            return bad(format!("gdp_log_range ({glo}, {ghi}) is empty"));
        }
        let sigmas = [self.gdp_growth.1, self.sigma_noise, self.pair_effect_sigma];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) || !self.gdp_growth.0.is_finite() {
            return bad("standard deviations must be finite and ≥ 0".into());
        }
        if !self.effect_loading.is_finite() {
            return bad("effect_loading must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCountry {
    pub name: String,
    /// Per year, aligned with `SyntheticWorld::years`.
    pub tradable_output: Vec<f64>,
    pub nontradable_output: Vec<f64>,
}

impl SyntheticCountry {
    pub fn gdp(&self, t: usize) -> f64 {
        self.tradable_output[t] + self.nontradable_output[t]
    }

    pub fn lambda(&self, t: usize) -> f64 {
        self.tradable_output[t] / self.gdp(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub countries: Vec<SyntheticCountry>,
    pub years: Vec<i32>,
    /// Directed-pair effects `u_ab`, keyed by (exporter, importer) index.
    pub pair_effects: BTreeMap<(usize, usize), f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated standard deviation")
}

pub fn generate_world(config: &GenConfig) -> Result<SyntheticWorld> {
    config.validate()?;
    let n = config.n_countries;
    let years: Vec<i32> = (0..config.n_years as i32).map(|t| config.first_year + t).collect();

    let mut gdp_rng = stream(config.seed, STREAM_GDP);
    let growth = Normal::new(config.gdp_growth.0, config.gdp_growth.1).expect("validated growth");
    let log_gdp: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut path = Vec::with_capacity(years.len());
            let mut g = uniform(&mut gdp_rng, config.gdp_log_range);
            for t in 0..years.len() {
                if t > 0 {
                    g += growth.sample(&mut gdp_rng);
                }
                path.push(g);
            }
            path
        })
        .collect();

    let mut lambda_rng = stream(config.seed, STREAM_LAMBDA);
    let lambdas: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let base = uniform(&mut lambda_rng, config.lambda_range);
            (0..years.len())
                .map(|t| {
                    if config.lambda_varies_by_year && t > 0 {
                        uniform(&mut lambda_rng, config.lambda_range)
                    } else {
                        base
                    }
                })
                .collect()
        })
        .collect();

    let countries: Vec<SyntheticCountry> = (0..n)
        .map(|c| {
            let (tradable, nontradable) = log_gdp[c]
                .iter()
                .zip(&lambdas[c])
                .map(|(lg, lam)| {
                    let y = lg.exp();
                    (lam * y, (1.0 - lam) * y)
                })
                .unzip();
            SyntheticCountry {
                name: format!("C{c:03}"),
                tradable_output: tradable,
                nontradable_output: nontradable,
            }
        })
        .collect();

    let mut effect_rng = stream(config.seed, STREAM_EFFECTS);
    let eff = normal(config.pair_effect_sigma);
    let mut pair_effects = BTreeMap::new();
    for a in 0..n {
        for b in (0..n).filter(|&b| b != a) {
            pair_effects.insert((a, b), eff.sample(&mut effect_rng));
        }
    }
    if config.correlate_effects_with_regressors {
        let world: Vec<f64> = (0..years.len())
            .map(|t| countries.iter().map(|c| c.gdp(t)).sum::<f64>().ln())
            .collect();
        let mean_mass: BTreeMap<(usize, usize), f64> = pair_effects
            .keys()
            .map(|&(a, b)| {
                let m = (0..years.len())
                    .map(|t| log_gdp[a][t] + log_gdp[b][t] - world[t])
                    .sum::<f64>()
                    / years.len() as f64;
                ((a, b), m)
            })
            .collect();
        let k = mean_mass.len() as f64;
        let mu = mean_mass.values().sum::<f64>() / k;
        let sd = (mean_mass.values().map(|m| (m - mu).powi(2)).sum::<f64>() / k).sqrt();
        if sd > 0.0 {
            for (key, u) in pair_effects.iter_mut() {
                *u += config.effect_loading * (mean_mass[key] - mu) / sd;
            }
        }
    }

    Ok(SyntheticWorld {
        countries,
        years,
        pair_effects,
        noise_sigma: config.sigma_noise,
        seed: config.seed,
    })
}

impl SyntheticWorld {
    pub fn world_gdp(&self, t: usize) -> f64 {
        self.countries.iter().map(|c| c.gdp(t)).sum()
    }

    pub fn gdp_records(&self) -> Vec<CountryYearGdp> {
        let mut out = Vec::with_capacity(self.countries.len() * self.years.len());
        for (t, &year) in self.years.iter().enumerate() {
            for c in &self.countries {
                out.push(CountryYearGdp {
                    country: c.name.clone(),
                    year,
                    gdp: c.gdp(t),
                });
            }
        }
        out
    }

    /// λ on the 0–100 index scale.
    pub fn index_records(&self) -> Vec<CountryYearIndex> {
        let mut out = Vec::with_capacity(self.countries.len() * self.years.len());
        for (t, &year) in self.years.iter().enumerate() {
            for c in &self.countries {
                out.push(CountryYearIndex {
                    country: c.name.clone(),
                    year,
                    index: 100.0 * c.lambda(t),
                });
            }
        }
        out
    }
}

/// One flow per ordered pair per year; noise comes from the world's seed.
pub fn generate_flows(world: &SyntheticWorld) -> Vec<TradeFlow> {
    let mut rng = stream(world.seed, STREAM_NOISE);
    let noise = normal(world.noise_sigma);
    let n = world.countries.len();
    let mut flows = Vec::with_capacity(n * (n - 1) * world.years.len());
    for (t, &year) in world.years.iter().enumerate() {
        let yw = world.world_gdp(t);
        for (a, ca) in world.countries.iter().enumerate() {
            for (b, cb) in world.countries.iter().enumerate() {
                if a == b {
                    continue;
                }
                let u = world.pair_effects[&(a, b)];
                let e = if world.noise_sigma > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                let mut value = ca.lambda(t) * ca.gdp(t) * cb.gdp(t) / yw;
                if u != 0.0 || e != 0.0 {
                    value *= (u + e).exp();
                }
                flows.push(TradeFlow {
                    exporter: ca.name.clone(),
                    importer: cb.name.clone(),
                    year,
                    value,
                });
            }
        }
    }
    flows
}

/// Seed of replication `index`, a SplitMix64 mix of the base seed and index.
pub fn replication_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Everything recorded for one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationOutcome {
    pub index: usize,
    pub seed: u64,
    pub pooled: [f64; 3],
    pub fixed_effects: [f64; 3],
    pub random_effects: [f64; 3],
    /// p-values of `β₁ = 1` and `β₂ = 1`.
    pub fe_p_unit: [f64; 2],
    pub re_p_unit: [f64; 2],
    pub hausman_p: f64,
    pub f_panel_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverySummary {
    pub replications: usize,
    pub succeeded: usize,
    pub failures: Vec<(usize, String)>,
    pub mean_pooled: [f64; 3],
    pub mean_fixed_effects: [f64; 3],
    pub mean_random_effects: [f64; 3],
    /// Largest `|β̂ − (0, 1, 1)|` over replications and estimators (slopes
    /// only for fixed effects when pair effects are present).
    pub max_abs_error_slopes: f64,
    /// Share of replications whose 95% interval contains 1, per slope.
    pub coverage_fixed_effects: [f64; 2],
    pub coverage_random_effects: [f64; 2],
    pub hausman_rejection_rate: f64,
    pub f_panel_rejection_rate: f64,
    pub outcomes: Vec<ReplicationOutcome>,
}

pub const SIGNIFICANCE: f64 = 0.05;

fn triple(r: &EstimationResult) -> [f64; 3] {
    [r.coefficients[0], r.coefficients[1], r.coefficients[2]]
}

pub fn run_replication(config: &GenConfig, index: usize) -> Result<ReplicationOutcome> {
    let seed = replication_seed(config.seed, index);
    let cfg = GenConfig { seed, ..config.clone() };
    let world = generate_world(&cfg)?;
    let flows = generate_flows(&world);
    let (panel, _) = build_panel(
        &flows,
        &world.gdp_records(),
        &world.index_records(),
        None,
        WorldGdpMode::SumOfSample,
    )?;
    let opts = EstimatorOptions::default();
    let po = pooled(&panel, &opts)?;
    let fe = fixed_effects(&panel, &opts)?;
    let re = random_effects(&panel, &opts)?;
    let h = hausman(&fe, &re)?;
    let f = f_test_panel_effects(&po, &fe)?;
    let p = |r: &EstimationResult, i| t_test_equals(r, i, 1.0).map(|t| t.p_value);
    Ok(ReplicationOutcome {
        index,
        seed,
        pooled: triple(&po),
        fixed_effects: triple(&fe),
        random_effects: triple(&re),
        fe_p_unit: [p(&fe, 1)?, p(&fe, 2)?],
        re_p_unit: [p(&re, 1)?, p(&re, 2)?],
        hausman_p: h.p_value,
        f_panel_p: f.p_value,
    })
}

/// Runs `n_replications` independent seeded replications in parallel.
/// Failed replications are recorded, not fatal.
pub fn recovery_experiment(config: &GenConfig, n_replications: usize) -> Result<RecoverySummary> {
    config.validate()?;
    if n_replications == 0 {
        return Err(Error::InvalidConfig("n_replications must be ≥ 1".into()));
    }
    let results: Vec<(usize, Result<ReplicationOutcome>)> = (0..n_replications)
        .into_par_iter()
        .map(|i| (i, run_replication(config, i)))
        .collect();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    let m = outcomes.len().max(1) as f64;
    let mean = |f: fn(&ReplicationOutcome) -> [f64; 3]| {
        let mut acc = [0.0; 3];
        for o in &outcomes {
            for (a, v) in acc.iter_mut().zip(f(o)) {
                *a += v / m;
            }
        }
        acc
    };
    let rate = |f: &dyn Fn(&ReplicationOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / m;
    let max_abs_error_slopes = outcomes
        .iter()
        .flat_map(|o| {
            [o.pooled, o.fixed_effects, o.random_effects]
                .into_iter()
                .flat_map(|b| [(b[1] - 1.0).abs(), (b[2] - 1.0).abs()])
        })
        .fold(0.0, f64::max);
    Ok(RecoverySummary {
        replications: n_replications,
        succeeded: outcomes.len(),
        mean_pooled: mean(|o| o.pooled),
        mean_fixed_effects: mean(|o| o.fixed_effects),
        mean_random_effects: mean(|o| o.random_effects),
        max_abs_error_slopes,
        coverage_fixed_effects: [
            rate(&|o| o.fe_p_unit[0] >= SIGNIFICANCE),
            rate(&|o| o.fe_p_unit[1] >= SIGNIFICANCE),
        ],
        coverage_random_effects: [
            rate(&|o| o.re_p_unit[0] >= SIGNIFICANCE),
            rate(&|o| o.re_p_unit[1] >= SIGNIFICANCE),
        ],
        hausman_rejection_rate: rate(&|o| o.hausman_p < SIGNIFICANCE),
        f_panel_rejection_rate: rate(&|o| o.f_panel_p < SIGNIFICANCE),
        failures,
        outcomes,
    })
}

/// Kolmogorov–Smirnov distance between a sample and Uniform(0, 1).
pub fn ks_uniform_distance(sample: &[f64]) -> f64 {
    let mut s: Vec<f64> = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GenConfig {
        GenConfig {
            n_countries: 3,
            n_years: 2,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_world() {
        let a = generate_world(&small()).unwrap();
        let b = generate_world(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(generate_flows(&a), generate_flows(&b));
    }

    #[test]
    fn unit_lambda_range() {
        let w = generate_world(&GenConfig {
            lambda_range: (1.0, 1.0),
            ..small()
        })
        .unwrap();
        for c in &w.countries {
            assert!(c.nontradable_output.iter().all(|s| *s == 0.0));
            assert!((0..2).all(|t| c.lambda(t) == 1.0));
        }
    }

    #[test]
    fn zero_pair_sigma_gives_zero_effects() {
        let w = generate_world(&GenConfig {
            pair_effect_sigma: 0.0,
            ..small()
        })
        .unwrap();
        assert!(w.pair_effects.values().all(|u| *u == 0.0));
    }

    #[test]
    fn flow_counts() {
        let w = generate_world(&small()).unwrap();
        assert_eq!(generate_flows(&w).len(), 12);
    }

    #[test]
    fn noiseless_flows_are_gravity_predictions_and_homogeneous() {
        use crate::gravity::{predict_trade, Direction, ModelParams, ModelSpec};
        let cfg = GenConfig {
            sigma_noise: 0.0,
            pair_effect_sigma: 0.0,
            ..small()
        };
        let w = generate_world(&cfg).unwrap();
        let flows = generate_flows(&w);
        let mut i = 0;
        for t in 0..2 {
            for a in 0..3 {
                for b in (0..3).filter(|&b| b != a) {
                    let p = ModelParams {
                        lambda_a: w.countries[a].lambda(t),
                        ..Default::default()
                    };
                    let want = predict_trade(
                        ModelSpec::Tradability,
                        &p,
                        w.countries[a].gdp(t),
                        w.countries[b].gdp(t),
                        w.world_gdp(t),
                        Direction::ExportOfA,
                    )
                    .unwrap()
                    .value;
                    assert!((flows[i].value - want).abs() <= 1e-12 * want);
                    i += 1;
                }
            }
        }

        let mut doubled = w.clone();
        for c in &mut doubled.countries {
            c.tradable_output.iter_mut().for_each(|v| *v *= 2.0);
            c.nontradable_output.iter_mut().for_each(|v| *v *= 2.0);
        }
        for (x, y) in generate_flows(&w).iter().zip(generate_flows(&doubled)) {
            assert!((2.0 * x.value - y.value).abs() <= 1e-12 * y.value);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(generate_world(&GenConfig { n_countries: 1, ..small() }).is_err());
        assert!(generate_world(&GenConfig { lambda_range: (0.0, 0.5), ..small() }).is_err());
        assert!(generate_world(&GenConfig { sigma_noise: -1.0, ..small() }).is_err());
        assert!(recovery_experiment(&small(), 0).is_err());
    }

    #[test]
    fn ks_distance_examples() {
        assert!((ks_uniform_distance(&[0.5]) - 0.5).abs() < 1e-15);
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_uniform_distance(&grid) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn replication_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| replication_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
    }
}
