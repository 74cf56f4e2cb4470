use nalgebra::{DMatrix, DVector};

use super::dist::{tail_probability, Distribution};
use super::{EstimationResult, TestResult};
use crate::error::{Error, Result};

/// Hausman test of random against fixed effects over the shared slopes.
///
/// When `V_FE − V_RE` is not positive definite the quadratic form is taken
/// with a pseudo-inverse and the result carries a warning.
pub fn hausman(fe: &EstimationResult, re: &EstimationResult) -> Result<TestResult> {
    let (bf, br) = (fe.slopes(), re.slopes());
    if bf.len() != br.len() || bf.is_empty() {
        return Err(Error::IncompatibleResults(format!(
            "{} vs {} slopes",
            bf.len(),
            br.len()
        )));
    }
    if fe.slope_names() != re.slope_names() {
        return Err(Error::IncompatibleResults(format!(
            "slope names differ: {:?} vs {:?}",
            fe.slope_names(),
            re.slope_names()
        )));
    }
    let k = bf.len();
    let d = DVector::from_iterator(k, bf.iter().zip(br).map(|(a, b)| a - b));
    let v = fe.slope_covariance() - re.slope_covariance();
    let v = (&v + v.transpose()) * 0.5;

    let (statistic, warning) = match v.clone().cholesky() {
        Some(chol) => (d.dot(&chol.solve(&d)), None),
        None => {
            let pinv = pseudo_inverse(&v);
            (
                (d.transpose() * pinv * &d)[(0, 0)],
                Some("variance difference is not positive definite; pseudo-inverse used".to_string()),
            )
        }
    };
    let p_value = if statistic > 0.0 {
        tail_probability(Distribution::ChiSquared(k as f64), statistic)?
    } else {
        1.0
    };
    Ok(TestResult {
        name: "hausman".into(),
        statistic,
        df: vec![k],
        p_value,
        warning,
    })
}

fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let max = svd.singular_values.max();
    let eps = super::RANK_TOLERANCE * max;
    // nalgebra's pseudo_inverse only errors when U/Vᵀ were not computed
    svd.pseudo_inverse(eps).expect("svd computed with u and v_t")
}

/// Per-observation residual sum of squares treated as an exact fit.
const ZERO_SSR_PER_OBS: f64 = 1e-20;

/// F test of the null that all group effects are zero (pooled vs within).
pub fn f_test_panel_effects(pooled: &EstimationResult, fe: &EstimationResult) -> Result<TestResult> {
    if pooled.n_obs != fe.n_obs || pooled.slopes().len() != fe.slopes().len() {
        return Err(Error::InconsistentInputs(
            "pooled and fixed-effects fits cover different data".into(),
        ));
    }
    let g = fe.n_groups;
    if g < 2 {
        return Err(Error::InconsistentInputs(format!(
            "{g} group(s): no panel effect to test"
        )));
    }
    // Below `floor` a residual sum of squares is rounding noise of an exact fit.
    let floor = ZERO_SSR_PER_OBS * fe.n_obs as f64;
    let tol = 1e-10 * pooled.ssr.max(fe.ssr) + floor;
    if pooled.ssr < fe.ssr - tol {
        return Err(Error::InconsistentInputs(format!(
            "pooled ssr {} below fixed-effects ssr {}",
            pooled.ssr, fe.ssr
        )));
    }
    let df1 = g - 1;
    let df2 = fe.df_resid;
    let gain = (pooled.ssr - fe.ssr).max(0.0);
    let (statistic, p_value, warning) = if fe.ssr <= floor {
        if gain <= floor {
            (0.0, 1.0, None)
        } else {
            (f64::MAX, 0.0, Some("saturated: zero residual sum of squares".into()))
        }
    } else {
        let f = (gain / df1 as f64) / (fe.ssr / df2 as f64);
        (f, tail_probability(Distribution::FisherF(df1 as f64, df2 as f64), f)?, None)
    };
    Ok(TestResult {
        name: "f_panel_effects".into(),
        statistic,
        df: vec![df1, df2],
        p_value,
        warning,
    })
}

/// Joint F test that every slope is zero, `F = β̂ᵀV⁻¹β̂ / k`.
///
/// An exact fit has no residual variance; the statistic then saturates at
/// `f64::MAX` with p = 0 and a warning.
pub fn regression_f_test(result: &EstimationResult) -> Result<TestResult> {
    let k = result.slopes().len();
    if k == 0 {
        return Err(Error::InconsistentInputs("no slopes to test".into()));
    }
    let df = vec![k, result.df_resid];
    if result.ssr == 0.0 {
        let zero = result.slopes().iter().all(|b| *b == 0.0);
        return Ok(TestResult {
            name: "f_regression".into(),
            statistic: if zero { 0.0 } else { f64::MAX },
            df,
            p_value: if zero { 1.0 } else { 0.0 },
            warning: Some("saturated: zero residual sum of squares".into()),
        });
    }
    let w = quadratic_form(result)?;
    let f = w / k as f64;
    let p_value = tail_probability(Distribution::FisherF(k as f64, result.df_resid as f64), f)?;
    Ok(TestResult {
        name: "f_regression".into(),
        statistic: f,
        df,
        p_value,
        warning: None,
    })
}

/// Wald chi-squared test that every slope is zero.
pub fn wald_joint_test(result: &EstimationResult) -> Result<TestResult> {
    let k = result.slopes().len();
    if k == 0 {
        return Err(Error::InconsistentInputs("no slopes to test".into()));
    }
    let w = quadratic_form(result)?;
    Ok(TestResult {
        name: "wald_chi2".into(),
        statistic: w,
        df: vec![k],
        p_value: tail_probability(Distribution::ChiSquared(k as f64), w)?,
        warning: None,
    })
}

fn quadratic_form(result: &EstimationResult) -> Result<f64> {
    let b = DVector::from_column_slice(result.slopes());
    let v = result.slope_covariance();
    let chol = v.cholesky().ok_or(Error::SingularCovariance)?;
    Ok(b.dot(&chol.solve(&b)).max(0.0))
}

/// Two-sided t test of `coefficient[index] = hypothesized` on `df_resid`.
pub fn t_test_equals(result: &EstimationResult, index: usize, hypothesized: f64) -> Result<TestResult> {
    let len = result.coefficients.len();
    if index >= len {
        return Err(Error::IndexOutOfRange { index, len });
    }
    let diff = result.coefficients[index] - hypothesized;
    let se = result.std_errors[index];
    let t = if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        f64::INFINITY.copysign(diff)
    };
    let p_value = if result.df_resid == 0 {
        return Err(Error::InvalidDistribution("t test with zero residual df".into()));
    } else if t.is_infinite() {
        0.0
    } else {
        (2.0 * tail_probability(Distribution::StudentT(result.df_resid as f64), t.abs())?).min(1.0)
    };
    Ok(TestResult {
        name: format!("t_{}_eq_{}", result.names[index], hypothesized),
        statistic: t,
        df: vec![result.df_resid],
        p_value,
        warning: None,
    })
}
