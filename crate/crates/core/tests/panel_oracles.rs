//! Panel estimators against independent constructions: dummy-variable OLS,
//! explicit GLS with the block covariance, and the limiting cases of the
//! random-effects weight.

mod common;

use common::{lsdv, panel_from_sizes, random_unbalanced};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use tradegrav::domain::{PairId, PanelDataset, PanelObservation};
use tradegrav::econometrics::dist::{tail_probability, Distribution};
use tradegrav::econometrics::{
    fixed_effects, hausman, ols, pooled, random_effects, random_effects_with_components, regression_f_test,
    within_transform, EstimatorOptions, VarianceComponents,
};
use tradegrav::synth::ks_uniform_distance;

#[test]
fn fixed_effects_match_dummy_variable_ols() {
    for seed in 0..20 {
        let panel = random_unbalanced(seed);
        let fe = fixed_effects(&panel, &EstimatorOptions::default()).unwrap();
        let (slopes, ssr) = lsdv(&panel);
        for (a, b) in fe.slopes().iter().zip(&slopes) {
            assert!((a - b).abs() < 1e-8, "seed {seed}: {a} vs {b}");
        }
        assert!((fe.ssr - ssr).abs() < 1e-8 * ssr.max(1.0), "seed {seed}");
        let k = 2;
        assert_eq!(fe.df_resid, panel.len() - panel.group_count() - k);
    }
}

/// GLS with `Ω_g = σ²_e I + σ²_u J` built explicitly per group.
fn explicit_gls(panel: &PanelDataset, c: VarianceComponents) -> (DVector<f64>, DMatrix<f64>) {
    let obs = panel.observations();
    let n = obs.len();
    let x = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => obs[i].ln_lambda_exporter,
        _ => obs[i].ln_mass,
    });
    let y = DVector::from_iterator(n, obs.iter().map(|o| o.ln_trade));
    let mut omega = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if obs[i].pair_id == obs[j].pair_id {
                omega[(i, j)] = c.sigma2_u + if i == j { c.sigma2_e } else { 0.0 };
            }
        }
    }
    let w = omega.try_inverse().unwrap();
    let xtwx = x.transpose() * &w * &x;
    let b = xtwx.clone().cholesky().unwrap().solve(&(x.transpose() * &w * &y));
    let r = &y - &x * &b;
    // the quasi-demeaned regression sees residual variance σ²_e r'Ω⁻¹r / df
    let s2 = c.sigma2_e * (r.transpose() * &w * &r)[(0, 0)] / (n - 3) as f64;
    let cov = (xtwx * c.sigma2_e).try_inverse().unwrap() * s2;
    (b, cov)
}

#[test]
fn random_effects_match_explicit_gls() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let panel = panel_from_sizes(&mut rng, &[3, 5, 2, 4, 4, 6], 1.0);
    for (e, u) in [(1.0, 2.0), (0.3, 0.05), (2.0, 0.0), (0.5, 40.0)] {
        let c = VarianceComponents {
            sigma2_e: e,
            sigma2_u: u,
        };
        let re = random_effects_with_components(&panel, c, &EstimatorOptions::default()).unwrap();
        let (b, cov) = explicit_gls(&panel, c);
        for j in 0..3 {
            assert!((re.coefficients[j] - b[j]).abs() < 1e-9, "({e},{u}) coef {j}");
            for l in 0..3 {
                let scale = cov[(j, l)].abs().max(1e-12);
                assert!((re.covariance[(j, l)] - cov[(j, l)]).abs() < 1e-7 * scale.max(1.0), "({e},{u}) cov");
            }
        }
    }
}

#[test]
fn zero_group_variance_is_pooled() {
    let panel = random_unbalanced(11);
    let po = pooled(&panel, &EstimatorOptions::default()).unwrap();
    let c = VarianceComponents {
        sigma2_e: 0.7,
        sigma2_u: 0.0,
    };
    let re = random_effects_with_components(&panel, c, &EstimatorOptions::default()).unwrap();
    assert_eq!(re.theta, Some(0.0));
    for (a, b) in re.coefficients.iter().zip(&po.coefficients) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn huge_group_variance_approaches_within() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let panel = panel_from_sizes(&mut rng, &[8; 30], 1.0);
    let fe = fixed_effects(&panel, &EstimatorOptions::default()).unwrap();
    let c = VarianceComponents {
        sigma2_e: 1.0,
        sigma2_u: 1e6,
    };
    let re = random_effects_with_components(&panel, c, &EstimatorOptions::default()).unwrap();
    for (a, b) in re.slopes().iter().zip(fe.slopes()) {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }
}

#[test]
fn random_effects_weight_interpolates() {
    // balanced T = 4: θ = 1 − sqrt(σ²_e / (σ²_e + 4σ²_u))
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let panel = panel_from_sizes(&mut rng, &[4; 12], 1.0);
    let opts = EstimatorOptions::default();
    for (theta, sigma2_u) in [(0.0, 0.0), (0.5, 0.75), (1.0 - 1e-6, (1e12 - 1.0) / 4.0)] {
        let c = VarianceComponents {
            sigma2_e: 1.0,
            sigma2_u,
        };
        let re = random_effects_with_components(&panel, c, &opts).unwrap();
        assert!((re.theta.unwrap() - theta).abs() < 1e-9);
        // near θ = 1 the explicit Ω is too ill-conditioned to invert, so the
        // within estimator is the reference there
        let reference: Vec<f64> = if theta < 0.9 {
            explicit_gls(&panel, c).0.iter().skip(1).copied().collect()
        } else {
            fixed_effects(&panel, &opts).unwrap().slopes().to_vec()
        };
        for (a, b) in re.slopes().iter().zip(&reference) {
            assert!((a - b).abs() < 1e-6, "θ {theta}: {a} vs {b}");
        }
    }
}

#[test]
fn estimated_random_effects_have_an_interior_weight() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let panel = panel_from_sizes(&mut rng, &[6; 40], 1.0);
    let re = random_effects(&panel, &EstimatorOptions::default()).unwrap();
    let theta = re.theta.unwrap();
    assert!(theta > 0.0 && theta < 1.0);
    let c = re.variance_components.unwrap();
    assert!(c.sigma2_e > 0.0 && c.sigma2_u > 0.0);
}

#[test]
fn regression_f_p_values_are_uniform_under_the_null() {
    let z = Normal::new(0.0, 1.0).unwrap();
    let p: Vec<f64> = (0..200u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let n = 40;
            let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { z.sample(&mut rng) });
            let y = DVector::from_fn(n, |_, _| z.sample(&mut rng));
            let r = ols(&x, &y, true).unwrap();
            regression_f_test(&r).unwrap().p_value
        })
        .collect();
    let d = ks_uniform_distance(&p);
    assert!(d < 0.1, "KS distance {d}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn within_slopes_ignore_group_constants(seed in 0u64..10_000, shift in prop::collection::vec(-50.0f64..50.0, 50)) {
        let panel = random_unbalanced(seed);
        let fe = fixed_effects(&panel, &EstimatorOptions::default()).unwrap();
        let shifted: Vec<PanelObservation> = panel
            .observations()
            .iter()
            .map(|o| PanelObservation { ln_trade: o.ln_trade + shift[o.pair_id.0 as usize], ..o.clone() })
            .collect();
        let fe2 = fixed_effects(&PanelDataset::new(shifted).unwrap(), &EstimatorOptions::default()).unwrap();
        for (a, b) in fe.slopes().iter().zip(fe2.slopes()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn covariances_are_symmetric_psd(seed in 0u64..10_000) {
        let panel = random_unbalanced(seed);
        let opts = EstimatorOptions::default();
        for r in [pooled(&panel, &opts).unwrap(), fixed_effects(&panel, &opts).unwrap()] {
            let v = &r.covariance;
            prop_assert!((v - v.transpose()).abs().max() < 1e-12 * v.abs().max().max(1.0));
            prop_assert!(v.clone().symmetric_eigenvalues().iter().all(|&e| e > -1e-12 * v.abs().max()));
        }
    }

    #[test]
    fn within_residuals_are_orthogonal(seed in 0u64..10_000) {
        let panel = random_unbalanced(seed);
        let fe = fixed_effects(&panel, &EstimatorOptions::default()).unwrap();
        let w = within_transform(&panel);
        let b = DVector::from_column_slice(fe.slopes());
        let r = &w.y - &w.x * &b;
        let g = w.x.transpose() * &r;
        prop_assert!(g.amax() < 1e-8 * w.x.norm() * w.y.norm().max(1.0));
    }

    #[test]
    fn hausman_is_nonnegative_when_the_difference_is_psd(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = rng.random_range(8..=40);
        let sizes: Vec<usize> = (0..groups).map(|_| rng.random_range(2..=8)).collect();
        let panel = panel_from_sizes(&mut rng, &sizes, 1.0);
        let opts = EstimatorOptions::default();
        let fe = fixed_effects(&panel, &opts).unwrap();
        let re = random_effects(&panel, &opts).unwrap();
        let diff = fe.slope_covariance() - re.slope_covariance();
        let psd = diff.symmetric_eigenvalues().iter().all(|&e| e >= 0.0);
        let h = hausman(&fe, &re).unwrap();
        if psd {
            prop_assert!(h.statistic >= 0.0);
        }
        prop_assert!((0.0..=1.0).contains(&h.p_value));
    }

    #[test]
    fn tails_are_monotone(a in 0.0f64..50.0, b in 0.0f64..50.0, d1 in 0.5f64..40.0, d2 in 0.5f64..40.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for dist in [Distribution::ChiSquared(d1), Distribution::FisherF(d1, d2), Distribution::StudentT(d2)] {
            let p_lo = tail_probability(dist, lo).unwrap();
            let p_hi = tail_probability(dist, hi).unwrap();
            prop_assert!(p_hi <= p_lo + 1e-15, "{dist:?}: {p_lo} then {p_hi}");
        }
    }

    #[test]
    fn noise_free_within_recovery(seed in 0u64..10_000, b1 in 0.2f64..2.0, b2 in 0.2f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Normal::new(0.0, 1.0).unwrap();
        let mut obs = Vec::new();
        for g in 0..rng.random_range(3..30u32) {
            let effect = 3.0 * z.sample(&mut rng);
            for year in 0..rng.random_range(2..9) {
                let l: f64 = rng.random_range(-3.0..-1.0);
                let m: f64 = rng.random_range(40.0..50.0);
                obs.push(PanelObservation {
                    pair_id: PairId(g),
                    year,
                    ln_trade: -1.5 + b1 * l + b2 * m + effect,
                    ln_lambda_exporter: l,
                    ln_mass: m,
                });
            }
        }
        let fe = fixed_effects(&PanelDataset::new(obs).unwrap(), &EstimatorOptions::default()).unwrap();
        prop_assert!((fe.slopes()[0] - b1).abs() < 1e-6);
        prop_assert!((fe.slopes()[1] - b2).abs() < 1e-6);
    }
}
