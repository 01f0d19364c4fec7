//! Two runnable demonstrations: the coverage collapse of one-factor-at-a-time
//! designs as the dimension grows, and the U-shaped error of models of
//! increasing complexity.

mod oat;
mod oneill;

pub use oat::{
    oat_missed_interaction, oat_volume_mc, oat_volume_ratio, OatAuditOptions, OatAuditResult,
    OatFactorEffect, DEFAULT_MC_POINTS,
};
pub use oneill::{oneill_curve, ComplexityCurve, OneillSetup, ARGMIN_TOLERANCE, CONDITION_WARNING};
