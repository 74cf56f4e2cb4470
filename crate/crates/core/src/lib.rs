//! Tradability-augmented gravity equation of bilateral trade.
//!
//! * [`tradability`] turns world sector shares into relative tradabilities and
//!   per-country tradability indices.
//! * [`gravity`] predicts trade under perfect, imperfect and tradability
//!   specialization models and runs the no-intercept identification regression.
//! * [`domain`] assembles the log-linear estimation panel
//!   `ln X_ab = β₀ + β₁ ln λ_a + β₂ ln(Y_a·Y_b/Y_w) + ε`.
//! * [`econometrics`] estimates it by pooled OLS, fixed and random effects and
//!   carries the hypothesis tests (Hausman, panel-effect F, joint F / Wald, t).
//! * [`synth`] draws synthetic worlds from the model for validation.
//! * [`io`] reads the CSV inputs and writes JSON/TSV reports; [`cli`] wires it
//!   all into the `tradegrav` binary.

pub mod cli;
pub mod domain;
pub mod econometrics;
mod error;
pub mod gravity;
pub mod io;
pub mod synth;
pub mod tradability;

pub use error::{Error, Result};
