//! Global sensitivity analysis and uncertainty quantification.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`factors`] declares the uncertain inputs and maps unit-cube coordinates
//!    to factor units.
//! 2. [`design`] builds quasi-random, radial and one-factor-at-a-time designs.
//! 3. [`harness`] runs a model (analytic or external program) over a design.
//! 4. [`estimators`] turns an evaluation batch into uncertainty summaries,
//!    first-order and total-effect indices, moment-independent indices, and
//!    bootstrap intervals.
//! 5. [`selection`] uses total-effect indices to select regressors and to rank
//!    features by grouped permutation.
//! 6. [`experiments`] reproduces the one-factor-at-a-time coverage collapse and
//!    the complexity/error trade-off.
//! 7. [`audit`] keeps the seven-rule sensitivity-auditing checklist.

pub mod audit;
pub mod design;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod factors;
pub mod harness;
pub mod selection;

pub use audit::{
    attach_sa_evidence, new_checklist, render_report, AuditChecklist, ReportFormat, RuleStatus,
};
pub use design::{
    oat_design, plain_design, plain_design_with, radial_design, radial_design_with, DesignKind,
    DesignMatrix, OatDesign, RowTag, Sampler,
};
pub use error::{Error, Result};
pub use estimators::{
    analyze_radial, uncertainty_analysis, AnalysisOptions, BootstrapConfig, Interval,
    SensitivityResult, UncertaintyResult,
};
pub use experiments::{
    oat_missed_interaction, oat_volume_ratio, oneill_curve, ComplexityCurve, OatAuditResult,
};
pub use factors::{inverse_transform, Distribution, FactorSet, FactorSpec};
pub use harness::{
    evaluate, evaluate_with, BuiltinModel, EvaluateOptions, EvaluationBatch, ExternalModel,
    FailurePolicy, Model, ModelRef, RowFailure,
};
pub use selection::{
    group_permutation_importance, ti_variable_selection, Criterion, PermutationImportance,
    Predictor, SelectionMode, SelectionProblem, SelectionResult,
};
