//! Gravity-equation predictions and the identification regression.

use serde::{Deserialize, Serialize};

use crate::econometrics::dist::{tail_probability, Distribution};
use crate::econometrics::TestResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelSpec {
    /// `X_ab = Y_a·Y_b/Y_w`.
    PerfectSpecialization,
    /// `X_ab = (1 − γ_a)·Y_a·Y_b/Y_w`.
    ImperfectUniform,
    /// `X_ab = (γ_b − γ_a)·Y_a·Y_b/Y_w`.
    ImperfectPair,
    /// Exports `λ_a·Y_a·Y_b/Y_w`, imports `λ_b·Y_a·Y_b/Y_w`.
    Tradability,
}

impl std::str::FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" | "perfect-specialization" => Ok(ModelSpec::PerfectSpecialization),
            "imperfect-uniform" => Ok(ModelSpec::ImperfectUniform),
            "imperfect-pair" => Ok(ModelSpec::ImperfectPair),
            "tradability" => Ok(ModelSpec::Tradability),
            other => Err(Error::InvalidConfig(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma_a: 0.0,
            gamma_b: 0.0,
            lambda_a: 1.0,
            lambda_b: 1.0,
        }
    }
}

impl ModelParams {
    fn validate(&self, spec: ModelSpec) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} = {v} outside [0, 1]")))
            }
        };
        match spec {
            ModelSpec::PerfectSpecialization => Ok(()),
            ModelSpec::ImperfectUniform => unit("gamma_a", self.gamma_a),
            ModelSpec::ImperfectPair => {
                unit("gamma_a", self.gamma_a)?;
                unit("gamma_b", self.gamma_b)
            }
            ModelSpec::Tradability => {
                unit("lambda_a", self.lambda_a)?;
                unit("lambda_b", self.lambda_b)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    ExportOfA,
    ImportOfA,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityPrediction {
    pub direction: Direction,
    pub value: f64,
}

/// Predicted trade between `a` and `b`.
///
/// A negative `ImperfectPair` prediction (`γ_b < γ_a`) is returned as
/// `Error::NegativePrediction` carrying the signed value.
pub fn predict_trade(
    spec: ModelSpec,
    params: &ModelParams,
    y_a: f64,
    y_b: f64,
    y_w: f64,
    direction: Direction,
) -> Result<GravityPrediction> {
    for (name, v) in [("y_a", y_a), ("y_b", y_b), ("y_w", y_w)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::LogDomain { name, value: v });
        }
    }
    params.validate(spec)?;
    let mass = y_a * y_b / y_w;
    let value = match (spec, direction) {
        (ModelSpec::PerfectSpecialization, _) => mass,
        (ModelSpec::ImperfectUniform, _) => (1.0 - params.gamma_a) * mass,
        (ModelSpec::ImperfectPair, _) => (params.gamma_b - params.gamma_a) * mass,
        (ModelSpec::Tradability, Direction::ExportOfA) => params.lambda_a * mass,
        (ModelSpec::Tradability, Direction::ImportOfA) => params.lambda_b * mass,
    };
    if value < 0.0 {
        return Err(Error::NegativePrediction { value });
    }
    Ok(GravityPrediction { direction, value })
}

/// Regressors `[1, ln λ_a, ln(Y_a·Y_b/Y_w)]` of the log-linear gravity equation.
pub fn log_design_row(y_a: f64, y_b: f64, y_w: f64, lambda_a: f64) -> Result<[f64; 3]> {
    for (name, v) in [("y_a", y_a), ("y_b", y_b), ("y_w", y_w), ("lambda_a", lambda_a)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::LogDomain { name, value: v });
        }
    }
    Ok([1.0, lambda_a.ln(), y_a.ln() + y_b.ln() - y_w.ln()])
}

/// `e^β₀ · λ_a^β₁ · (Y_a·Y_b/Y_w)^β₂`, the level form of the log-linear equation.
pub fn log_linear_prediction(coefficients: [f64; 3], row: [f64; 3]) -> f64 {
    row.iter()
        .zip(coefficients)
        .map(|(x, b)| x * b)
        .sum::<f64>()
        .exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentificationResult {
    pub alpha: f64,
    pub std_error: f64,
    pub n: usize,
    pub ssr: f64,
    /// Two-sided t-test of `α = 1`.
    pub test_alpha_one: TestResult,
}

/// No-intercept slope of actual on predicted trade.
pub fn identification_alpha(actual: &[f64], predicted: &[f64]) -> Result<IdentificationResult> {
    if actual.len() != predicted.len() {
        return Err(Error::InconsistentInputs(format!(
            "{} actual flows vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    let n = actual.len();
    let sxx: f64 = predicted.iter().map(|p| p * p).sum();
    if n < 2 || !(sxx > 0.0 && sxx.is_finite()) {
        return Err(Error::DegenerateRegressor);
    }
    let sxy: f64 = actual.iter().zip(predicted).map(|(a, p)| a * p).sum();
    let alpha = sxy / sxx;
    let ssr: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - alpha * p).powi(2))
        .sum();
    let df = (n - 1) as f64;
    let std_error = (ssr / df / sxx).sqrt();
    let t = if std_error > 0.0 {
        (alpha - 1.0) / std_error
    } else if alpha == 1.0 {
        0.0
    } else {
        f64::INFINITY.copysign(alpha - 1.0)
    };
    let p = if t.is_finite() {
        2.0 * tail_probability(Distribution::StudentT(df), t.abs())?
    } else {
        0.0
    };
    let test_alpha_one = TestResult {
        name: "t_alpha_eq_1".into(),
        statistic: t,
        df: vec![n - 1],
        p_value: p.min(1.0),
        warning: None,
    };
    Ok(IdentificationResult {
        alpha,
        std_error,
        n,
        ssr,
        test_alpha_one,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EX: Direction = Direction::ExportOfA;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn prediction_examples() {
        let p = ModelParams::default();
        let v = predict_trade(ModelSpec::PerfectSpecialization, &p, 2.0, 3.0, 10.0, EX).unwrap().value;
        assert!(approx(v, 0.6));

        let p = ModelParams { lambda_a: 0.5, ..Default::default() };
        let v = predict_trade(ModelSpec::Tradability, &p, 2.0, 3.0, 10.0, EX).unwrap().value;
        assert!(approx(v, 0.3));

        let p = ModelParams { gamma_a: 0.2, gamma_b: 0.6, ..Default::default() };
        let v = predict_trade(ModelSpec::ImperfectPair, &p, 2.0, 3.0, 10.0, EX).unwrap().value;
        assert!(approx(v, 0.24));

        let p = ModelParams { gamma_a: 1.0, ..Default::default() };
        let v = predict_trade(ModelSpec::ImperfectUniform, &p, 2.0, 3.0, 10.0, EX).unwrap().value;
        assert_eq!(v, 0.0);
    }

    #[test]
    fn import_direction_uses_partner_lambda() {
        let p = ModelParams { lambda_a: 0.5, lambda_b: 0.25, ..Default::default() };
        let v = predict_trade(ModelSpec::Tradability, &p, 2.0, 3.0, 10.0, Direction::ImportOfA).unwrap().value;
        assert!(approx(v, 0.15));
    }

    #[test]
    fn negative_pair_prediction_is_flagged_with_sign() {
        let p = ModelParams { gamma_a: 0.6, gamma_b: 0.2, ..Default::default() };
        match predict_trade(ModelSpec::ImperfectPair, &p, 2.0, 3.0, 10.0, EX) {
            Err(Error::NegativePrediction { value }) => assert!(approx(value, -0.24)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn design_row_examples() {
        let r = log_design_row(2.0, 3.0, 10.0, 0.5).unwrap();
        assert_eq!(r[0], 1.0);
        assert!(approx(r[1], 0.5f64.ln()));
        assert!(approx(r[2], 0.6f64.ln()));
        assert_eq!(log_design_row(2.0, 3.0, 10.0, 1.0).unwrap()[1], 0.0);
        assert!(log_design_row(2.0, 5.0, 10.0, 0.3).unwrap()[2].abs() < 1e-15);
        assert!(matches!(log_design_row(0.0, 3.0, 10.0, 0.5), Err(Error::LogDomain { .. })));
    }

    #[test]
    fn alpha_examples() {
        let pred = [1.0, 2.0, 3.0];
        let r = identification_alpha(&pred, &pred).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.ssr, 0.0);

        let half: Vec<f64> = pred.iter().map(|p| 0.5 * p).collect();
        assert!(approx(identification_alpha(&half, &pred).unwrap().alpha, 0.5));

        assert!(approx(identification_alpha(&[2.0, 3.0], &[1.0, 1.0]).unwrap().alpha, 2.5));
        assert_eq!(identification_alpha(&[1.0, 2.0], &[0.0, 0.0]), Err(Error::DegenerateRegressor));
        assert_eq!(identification_alpha(&[1.0], &[1.0]), Err(Error::DegenerateRegressor));
    }

    proptest! {
        #[test]
        fn perfect_specialization_is_symmetric(a in 1e-3f64..1e3, b in 1e-3f64..1e3, w in 1e-3f64..1e3) {
            let p = ModelParams::default();
            let ab = predict_trade(ModelSpec::PerfectSpecialization, &p, a, b, w, EX).unwrap().value;
            let ba = predict_trade(ModelSpec::PerfectSpecialization, &p, b, a, w, EX).unwrap().value;
            prop_assert!(approx(ab, ba));
        }

        #[test]
        fn predictions_are_homogeneous(a in 1e-3f64..1e3, b in 1e-3f64..1e3, w in 1e-3f64..1e3, c in 1e-3f64..1e3, lam in 0.01f64..1.0) {
            let p = ModelParams { lambda_a: lam, lambda_b: lam, gamma_a: 0.1, gamma_b: 0.3 };
            for spec in [ModelSpec::PerfectSpecialization, ModelSpec::ImperfectUniform, ModelSpec::ImperfectPair, ModelSpec::Tradability] {
                let base = predict_trade(spec, &p, a, b, w, EX).unwrap().value;
                let scaled = predict_trade(spec, &p, c * a, c * b, c * w, EX).unwrap().value;
                prop_assert!((scaled - c * base).abs() <= 1e-10 * (c * base).abs().max(1e-300));
            }
        }

        #[test]
        fn log_linear_unit_slopes_match_tradability(a in 1e-3f64..1e3, b in 1e-3f64..1e3, w in 1e-3f64..1e3, lam in 0.01f64..1.0) {
            let p = ModelParams { lambda_a: lam, ..Default::default() };
            let level = predict_trade(ModelSpec::Tradability, &p, a, b, w, EX).unwrap().value;
            let via_logs = log_linear_prediction([0.0, 1.0, 1.0], log_design_row(a, b, w, lam).unwrap());
            prop_assert!((level - via_logs).abs() <= 1e-12 * level);
        }

        #[test]
        fn unit_lambda_reduces_to_perfect_specialization(a in 1e-3f64..1e3, b in 1e-3f64..1e3, w in 1e-3f64..1e3) {
            let p = ModelParams::default();
            let t = predict_trade(ModelSpec::Tradability, &p, a, b, w, EX).unwrap().value;
            let s = predict_trade(ModelSpec::PerfectSpecialization, &p, a, b, w, EX).unwrap().value;
            prop_assert_eq!(t, s);
        }
    }
}
