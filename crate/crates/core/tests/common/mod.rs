//! Fixtures and reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use tradegrav::domain::{PairId, PanelDataset, PanelObservation};

/// Random panel with pair effects; `sizes[g]` observations in group `g`.
pub fn panel_from_sizes(rng: &mut ChaCha8Rng, sizes: &[usize], effect_sd: f64) -> PanelDataset {
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut obs = Vec::new();
    for (g, &t) in sizes.iter().enumerate() {
        let effect = effect_sd * z.sample(rng);
        let base_l = rng.random_range(-3.0..-1.5);
        let base_m = rng.random_range(40.0..50.0);
        for year in 0..t {
            let l = base_l + 0.3 * z.sample(rng);
            let m = base_m + 0.1 * year as f64 + 0.5 * z.sample(rng);
            obs.push(PanelObservation {
                pair_id: PairId(g as u32),
                year: 2000 + year as i32,
                ln_trade: 0.2 + l + m + effect + 0.4 * z.sample(rng),
                ln_lambda_exporter: l,
                ln_mass: m,
            });
        }
    }
    PanelDataset::new(obs).unwrap()
}

pub fn random_unbalanced(seed: u64) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = rng.random_range(4..=50);
    let sizes: Vec<usize> = (0..groups).map(|_| rng.random_range(2..=10)).collect();
    panel_from_sizes(&mut rng, &sizes, 1.0)
}

/// Slopes and ssr of OLS on `[x, group dummies]`, solved through the normal
/// equations with a Cholesky factor.
pub fn lsdv(panel: &PanelDataset) -> (Vec<f64>, f64) {
    let obs = panel.observations();
    let n = obs.len();
    let g = panel.group_count();
    let mut ids: Vec<u32> = obs.iter().map(|o| o.pair_id.0).collect();
    ids.dedup();
    let x = DMatrix::from_fn(n, 2 + g, |i, j| match j {
        0 => obs[i].ln_lambda_exporter,
        1 => obs[i].ln_mass,
        _ => f64::from(obs[i].pair_id.0 == ids[j - 2]),
    });
    let y = DVector::from_iterator(n, obs.iter().map(|o| o.ln_trade));
    let b = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * &y));
    let r = &y - &x * &b;
    (vec![b[0], b[1]], r.norm_squared())
}

/// Nodes and weights of `n`-point Gauss–Legendre on `[-1, 1]`, by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `∫_a^∞ g(t) dt` through `t = a + u/(1−u)`, composite Gauss–Legendre on
/// `u ∈ [0, 1]`.
pub fn integrate_to_infinity(g: &dyn Fn(f64) -> f64, a: f64) -> f64 {
    let rule = gauss_legendre(20);
    let h = |u: f64| {
        let w = 1.0 - u;
        g(a + u / w) / (w * w)
    };
    let panels = 400;
    let width = 1.0 / panels as f64;
    (0..panels)
        .map(|i| {
            let mid = (i as f64 + 0.5) * width;
            rule.iter().map(|(x, w)| w * h(mid + 0.5 * width * x)).sum::<f64>() * 0.5 * width
        })
        .sum()
}

/// Upper tail of a density on `[0, ∞)` after `t = s²`, which removes the
/// power singularity at the origin.
pub fn tail_on_half_line(density: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let g = |s: f64| 2.0 * s * density(s * s);
    integrate_to_infinity(&g, x.sqrt()) / integrate_to_infinity(&g, 0.0)
}

pub fn tail_on_line(density: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let total = 2.0 * integrate_to_infinity(density, 0.0);
    if x >= 0.0 {
        integrate_to_infinity(density, x) / total
    } else {
        1.0 - integrate_to_infinity(density, -x) / total
    }
}

pub fn grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..30).map(move |i| lo + (hi - lo) * i as f64 / 29.0)
}
