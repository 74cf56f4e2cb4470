use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::{CovarianceKind, EstimationResult, Method};
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
/// Applied to the column-equilibrated design so the decision does not depend
/// on the units of individual regressors.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares fit by Householder QR.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: DVector<f64>,
    /// `(XᵀX)⁻¹ = R⁻¹R⁻ᵀ`, used only for the covariance.
    pub xtx_inv: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub ssr: f64,
}

pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InconsistentInputs(format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    if n <= k || k == 0 {
        return Err(Error::TooFewObservations { n, k });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    check_rank(&r)?;

    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let qty = qty.rows(0, k).into_owned();
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign { column: k - 1 })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::SingularDesign { column: k - 1 })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let residuals = y - x * &coefficients;
    let ssr = residuals.norm_squared();
    Ok(LeastSquares {
        coefficients,
        xtx_inv,
        residuals,
        ssr,
    })
}

fn check_rank(r: &DMatrix<f64>) -> Result<()> {
    let k = r.ncols();
    let mut scaled = r.clone();
    for j in 0..k {
        let norm = r.column(j).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::SingularDesign { column: j });
        }
        scaled.column_mut(j).scale_mut(1.0 / norm);
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    if sv.min() > RANK_TOLERANCE * max {
        return Ok(());
    }
    // With unpivoted QR, a small |R_jj| marks the first column lying in the
    // span of its predecessors.
    let column = (0..k)
        .find(|&j| scaled[(j, j)].abs() <= RANK_TOLERANCE * max)
        .unwrap_or_else(|| {
            (0..k)
                .min_by(|&a, &b| scaled[(a, a)].abs().total_cmp(&scaled[(b, b)].abs()))
                .unwrap()
        });
    Err(Error::SingularDesign { column })
}

/// Group-clustered sandwich covariance with the usual small-sample factor
/// `G/(G−1) · (N−1)/(N−K)`.
pub(crate) fn cluster_covariance(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    xtx_inv: &DMatrix<f64>,
    groups: &[Range<usize>],
    df_resid: usize,
) -> DMatrix<f64> {
    let (n, k) = x.shape();
    let mut meat = DMatrix::zeros(k, k);
    for g in groups {
        let score = x.rows(g.start, g.len()).transpose() * residuals.rows(g.start, g.len());
        meat += &score * score.transpose();
    }
    let g = groups.len() as f64;
    let factor = if g > 1.0 && df_resid > 0 {
        g / (g - 1.0) * (n as f64 - 1.0) / df_resid as f64
    } else {
        1.0
    };
    xtx_inv * meat * xtx_inv * factor
}

/// Ordinary least squares. When `intercept_included`, column 0 of `x` is the
/// constant and is excluded from the slope tests.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, intercept_included: bool) -> Result<EstimationResult> {
    let fit = least_squares(x, y)?;
    let (n, k) = x.shape();
    let df_resid = n - k;
    let s2 = fit.ssr / df_resid as f64;
    let names = (0..k)
        .map(|j| {
            if intercept_included && j == 0 {
                "const".to_string()
            } else {
                format!("x{j}")
            }
        })
        .collect();
    let mut result = EstimationResult {
        method: Method::Ols,
        names,
        coefficients: fit.coefficients.iter().copied().collect(),
        covariance: &fit.xtx_inv * s2,
        std_errors: Vec::new(),
        n_obs: n,
        n_groups: 0,
        ssr: fit.ssr,
        df_resid,
        intercept: intercept_included,
        theta: None,
        variance_components: None,
        covariance_kind: CovarianceKind::Conventional,
        warnings: Vec::new(),
    };
    result.refresh_std_errors();
    Ok(result)
}
