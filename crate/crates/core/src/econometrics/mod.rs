//! Panel estimators and hypothesis tests for the log-linear gravity equation.

pub mod dist;
mod hypothesis;
mod linalg;
mod panel;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use hypothesis::{
    f_test_panel_effects, hausman, regression_f_test, t_test_equals, wald_joint_test,
};
pub use linalg::{least_squares, ols, LeastSquares, RANK_TOLERANCE};
pub use panel::{
    fixed_effects, pooled, random_effects, random_effects_with_components, swamy_arora_components,
    within_transform, VarianceComponents, WithinData,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Plain least squares on an arbitrary design.
    Ols,
    Pooled,
    FixedEffects,
    RandomEffects,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Pooled => "pooled",
            Method::FixedEffects => "fixed_effects",
            Method::RandomEffects => "random_effects",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CovarianceKind {
    /// `s²(XᵀX)⁻¹`.
    #[default]
    Conventional,
    /// Sandwich estimator clustered on the panel group.
    ClusterByGroup,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EstimatorOptions {
    pub covariance: CovarianceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub method: Method,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub std_errors: Vec<f64>,
    pub n_obs: usize,
    pub n_groups: usize,
    pub ssr: f64,
    pub df_resid: usize,
    /// When set, coefficient 0 is the intercept and the rest are slopes.
    pub intercept: bool,
    /// Mean of the per-group quasi-demeaning weights (random effects only).
    pub theta: Option<f64>,
    pub variance_components: Option<VarianceComponents>,
    pub covariance_kind: CovarianceKind,
    pub warnings: Vec<String>,
}

impl EstimationResult {
    /// Index range of the slope coefficients.
    pub fn slope_range(&self) -> std::ops::Range<usize> {
        let start = usize::from(self.intercept);
        start..self.coefficients.len()
    }

    pub fn slopes(&self) -> &[f64] {
        &self.coefficients[self.slope_range()]
    }

    pub fn slope_names(&self) -> &[String] {
        &self.names[self.slope_range()]
    }

    pub fn slope_covariance(&self) -> DMatrix<f64> {
        let r = self.slope_range();
        self.covariance
            .view((r.start, r.start), (r.len(), r.len()))
            .into_owned()
    }

    /// Residual variance `ssr / df_resid`.
    pub fn sigma2(&self) -> f64 {
        if self.df_resid == 0 {
            f64::NAN
        } else {
            self.ssr / self.df_resid as f64
        }
    }

    pub(crate) fn refresh_std_errors(&mut self) {
        self.std_errors = (0..self.covariance.nrows())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect();
    }
}

/// Outcome of a named hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    /// One entry for chi-squared and t, two for F.
    pub df: Vec<usize>,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}
