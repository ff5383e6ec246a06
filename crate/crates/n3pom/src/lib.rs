//! Continuous ordinal regression with neural varying coefficients.
//!
//! The model represents the logit of the conditional cumulative probability
//! P(H <= u | X = x) as a(u) + <b(u), x>, where a is a monotone piecewise
//! linear intercept and each coefficient b_k is a single-hidden-layer
//! network of the response threshold u. Training alternates mini-batch
//! gradient ascent on the weighted log-likelihood with a weight-rescaling
//! projection that keeps the predicted CCP non-decreasing on a covariate
//! ball of radius eta.
//!
//! Modules:
//! - [`model`]: parameters and all forward evaluations (CCP, density,
//!   marginal effects);
//! - [`monotonicity`]: the sufficient condition and the projection;
//! - [`gradients`]: analytic gradients plus a finite-difference oracle;
//! - [`trainer`]: the projected stochastic training loop;
//! - [`baseline`]: discrete proportional/non-proportional odds fits and the
//!   distillation initialization;
//! - [`datagen`]: synthetic data, discretization, perturbation, CSV I/O;
//! - [`eval`]: grid MSE, replicate aggregation, audits, and the benchmark
//!   harness.

pub mod baseline;
pub mod datagen;
pub mod eval;
pub mod gradients;
pub mod model;
pub mod monotonicity;
pub mod trainer;

pub use baseline::{fit_discrete, init_from_discrete, BaselineError, DiscreteFit, InitOptions};
pub use datagen::{
    discretize, generate_synthetic, load_csv, perturb, sample_covariates, sample_response,
    CovariateLaw, DataError, Dataset, ResponseVariant, SyntheticSpec,
};
pub use eval::{
    aggregate_replicates, audit_monotonicity, grid_mse, run_benchmark, BenchConfig, BenchReport,
    EvalError, Grid, MonotonicityAudit,
};
pub use gradients::{
    finite_difference_gradient, grad_f, grad_f_slope, grad_loglik, GradientError, ParamGradient,
};
pub use model::{Activation, CoefficientNet, InterceptParams, ModelError, N3pomModel};
pub use monotonicity::{check_condition, project, MonotonicityReport};
pub use trainer::{
    compute_zeta, fit, fit_observed, full_loglik, minibatch_schedule, TrainConfig, TrainError,
    TrainTrace, WeightMode,
};
