//! Pooled, within (fixed effects) and Swamy–Arora random-effects estimators
//! for possibly unbalanced panels.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::{cluster_covariance, least_squares, LeastSquares};
use super::{CovarianceKind, EstimationResult, EstimatorOptions, Method};
use crate::domain::PanelDataset;
use crate::error::{Error, Result};

/// Response, slope regressors and contiguous group ranges of a panel.
struct Design {
    y: DVector<f64>,
    x: DMatrix<f64>,
    groups: Vec<Range<usize>>,
    names: Vec<String>,
}

impl Design {
    fn from_panel(panel: &PanelDataset) -> Self {
        let obs = panel.observations();
        let n = obs.len();
        let k = 2;
        let y = DVector::from_iterator(n, obs.iter().map(|o| o.ln_trade));
        let x = DMatrix::from_fn(n, k, |i, j| obs[i].regressors()[j]);
        let mut groups = Vec::with_capacity(panel.group_count());
        let mut start = 0;
        for size in panel.group_sizes() {
            groups.push(start..start + size);
            start += size;
        }
        Self {
            y,
            x,
            groups,
            names: panel.regressor_names().to_vec(),
        }
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn k(&self) -> usize {
        self.x.ncols()
    }
}

fn group_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn with_intercept(x: &DMatrix<f64>, intercept: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let (n, k) = x.shape();
    DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { intercept(i) } else { x[(i, j - 1)] })
}

/// Group-demeaned response and regressors.
#[derive(Debug, Clone)]
pub struct WithinData {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub groups: Vec<Range<usize>>,
}

fn demean(values: &mut [f64], groups: &[Range<usize>], add_back: f64) {
    for g in groups {
        let m = group_mean(&values[g.clone()]);
        for v in &mut values[g.clone()] {
            *v = *v - m + add_back;
        }
    }
}

pub fn within_transform(panel: &PanelDataset) -> WithinData {
    let d = Design::from_panel(panel);
    within_of(&d, false)
}

fn within_of(d: &Design, add_grand_mean: bool) -> WithinData {
    let mut y: Vec<f64> = d.y.iter().copied().collect();
    let grand = if add_grand_mean { group_mean(&y) } else { 0.0 };
    demean(&mut y, &d.groups, grand);
    let mut x = d.x.clone();
    for j in 0..d.k() {
        let mut col: Vec<f64> = x.column(j).iter().copied().collect();
        let grand = if add_grand_mean { group_mean(&col) } else { 0.0 };
        demean(&mut col, &d.groups, grand);
        x.column_mut(j).copy_from_slice(&col);
    }
    WithinData {
        y: DVector::from_vec(y),
        x,
        groups: d.groups.clone(),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    method: Method,
    d: &Design,
    x_used: &DMatrix<f64>,
    fit: LeastSquares,
    df_resid: usize,
    opts: &EstimatorOptions,
    theta: Option<f64>,
    warnings: Vec<String>,
) -> EstimationResult {
    let covariance = match opts.covariance {
        CovarianceKind::Conventional => &fit.xtx_inv * (fit.ssr / df_resid as f64),
        CovarianceKind::ClusterByGroup => {
            cluster_covariance(x_used, &fit.residuals, &fit.xtx_inv, &d.groups, df_resid)
        }
    };
    let mut names = vec!["const".to_string()];
    names.extend(d.names.iter().cloned());
    let mut result = EstimationResult {
        method,
        names,
        coefficients: fit.coefficients.iter().copied().collect(),
        covariance,
        std_errors: Vec::new(),
        n_obs: d.n(),
        n_groups: d.groups.len(),
        ssr: fit.ssr,
        df_resid,
        intercept: true,
        theta,
        variance_components: None,
        covariance_kind: opts.covariance,
        warnings,
    };
    result.refresh_std_errors();
    result
}

/// OLS of the log-linear equation ignoring the panel structure.
pub fn pooled(panel: &PanelDataset, opts: &EstimatorOptions) -> Result<EstimationResult> {
    let d = Design::from_panel(panel);
    pooled_of(&d, opts)
}

fn pooled_of(d: &Design, opts: &EstimatorOptions) -> Result<EstimationResult> {
    let x = with_intercept(&d.x, |_| 1.0);
    let fit = least_squares(&x, &d.y)?;
    let df = d.n() - d.k() - 1;
    Ok(finish(Method::Pooled, d, &x, fit, df, opts, None, Vec::new()))
}

/// Within estimator. Slopes come from the group-demeaned data; the reported
/// intercept is the grand mean of `y − Xβ̂`, obtained by adding the grand
/// means back before the regression. `df_resid = N − G − k`.
pub fn fixed_effects(panel: &PanelDataset, opts: &EstimatorOptions) -> Result<EstimationResult> {
    let d = Design::from_panel(panel);
    fixed_effects_of(&d, opts)
}

fn fixed_effects_of(d: &Design, opts: &EstimatorOptions) -> Result<EstimationResult> {
    let n = d.n();
    let g = d.groups.len();
    let k = d.k();
    let w = within_of(d, true);
    for j in 0..k {
        let centered = {
            let col = d.x.column(j);
            let m = col.mean();
            col.map(|v| v - m).norm()
        };
        let within = {
            let col = w.x.column(j);
            let m = col.mean();
            col.map(|v| v - m).norm()
        };
        if within <= 1e-10 * centered.max(d.x.column(j).norm()) {
            return Err(Error::CollinearWithinGroups {
                name: d.names[j].clone(),
            });
        }
    }
    if n <= g + k {
        return Err(Error::TooFewObservations { n, k: g + k });
    }
    let x = with_intercept(&w.x, |_| 1.0);
    let fit = least_squares(&x, &w.y)?;
    Ok(finish(
        Method::FixedEffects,
        d,
        &x,
        fit,
        n - g - k,
        opts,
        None,
        Vec::new(),
    ))
}

/// Idiosyncratic and group-level error variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub sigma2_e: f64,
    pub sigma2_u: f64,
}

/// Swamy–Arora components for an unbalanced panel: `σ²_e` from the within
/// residuals, `σ²_u` from the between regression on group means net of
/// `σ²_e / T̄`, with `T̄` the harmonic mean group size. A negative `σ²_u` is
/// clamped to zero and reported in the returned warning.
pub fn swamy_arora_components(panel: &PanelDataset) -> Result<(VarianceComponents, Option<String>)> {
    let d = Design::from_panel(panel);
    swamy_arora_of(&d)
}

fn swamy_arora_of(d: &Design) -> Result<(VarianceComponents, Option<String>)> {
    let k = d.k();
    let g = d.groups.len();
    if g <= k + 1 {
        return Err(Error::TooFewGroups {
            groups: g,
            params: k + 1,
        });
    }
    let fe = fixed_effects_of(d, &EstimatorOptions::default())?;
    let sigma2_e = fe.sigma2();

    let ybar = DVector::from_iterator(g, d.groups.iter().map(|r| d.y.rows(r.start, r.len()).mean()));
    let xbar = DMatrix::from_fn(g, k, |i, j| {
        let r = &d.groups[i];
        d.x.view((r.start, j), (r.len(), 1)).mean()
    });
    let between = least_squares(&with_intercept(&xbar, |_| 1.0), &ybar)?;
    let harmonic_t = g as f64 / d.groups.iter().map(|r| 1.0 / r.len() as f64).sum::<f64>();
    let raw_u = between.ssr / (g - k - 1) as f64 - sigma2_e / harmonic_t;
    if raw_u < 0.0 {
        Ok((
            VarianceComponents {
                sigma2_e,
                sigma2_u: 0.0,
            },
            Some(format!("negative sigma2_u estimate {raw_u:.6e} clamped to zero")),
        ))
    } else {
        Ok((
            VarianceComponents {
                sigma2_e,
                sigma2_u: raw_u,
            },
            None,
        ))
    }
}

/// Feasible GLS with estimated Swamy–Arora variance components.
pub fn random_effects(panel: &PanelDataset, opts: &EstimatorOptions) -> Result<EstimationResult> {
    let d = Design::from_panel(panel);
    let (components, warning) = swamy_arora_of(&d)?;
    let mut r = random_effects_of(&d, components, opts)?;
    r.warnings.extend(warning);
    Ok(r)
}

/// GLS with given variance components: each group is quasi-demeaned by
/// `θ_g = 1 − sqrt(σ²_e / (σ²_e + T_g σ²_u))`.
pub fn random_effects_with_components(
    panel: &PanelDataset,
    components: VarianceComponents,
    opts: &EstimatorOptions,
) -> Result<EstimationResult> {
    let d = Design::from_panel(panel);
    random_effects_of(&d, components, opts)
}

fn random_effects_of(
    d: &Design,
    components: VarianceComponents,
    opts: &EstimatorOptions,
) -> Result<EstimationResult> {
    let VarianceComponents { sigma2_e, sigma2_u } = components;
    if !(sigma2_e >= 0.0 && sigma2_u >= 0.0) {
        return Err(Error::InconsistentInputs(format!(
            "variance components must be nonnegative: {components:?}"
        )));
    }
    let (n, k) = (d.n(), d.k());
    if n <= k + 1 {
        return Err(Error::TooFewObservations { n, k: k + 1 });
    }
    let thetas: Vec<f64> = d
        .groups
        .iter()
        .map(|r| {
            if sigma2_u == 0.0 {
                0.0
            } else {
                1.0 - (sigma2_e / (sigma2_e + r.len() as f64 * sigma2_u)).sqrt()
            }
        })
        .collect();
    let mut y = d.y.clone();
    let mut x = with_intercept(&d.x, |_| 1.0);
    for (r, &theta) in d.groups.iter().zip(&thetas) {
        if theta == 0.0 {
            continue;
        }
        let my = y.rows(r.start, r.len()).mean();
        y.rows_mut(r.start, r.len()).add_scalar_mut(-theta * my);
        for j in 0..=k {
            let mx = x.view((r.start, j), (r.len(), 1)).mean();
            x.view_mut((r.start, j), (r.len(), 1)).add_scalar_mut(-theta * mx);
        }
    }
    let fit = least_squares(&x, &y)?;
    let theta = thetas.iter().sum::<f64>() / thetas.len() as f64;
    let mut r = finish(
        Method::RandomEffects,
        d,
        &x,
        fit,
        n - k - 1,
        opts,
        Some(theta),
        Vec::new(),
    );
    r.variance_components = Some(components);
    Ok(r)
}
