//! Stability certificates for positive multi-order fractional delay systems:
//! Mittag-Leffler evaluation, a predictor-corrector solver, structural checks,
//! certificate construction and trajectory verification.

pub mod quad;
pub mod special;
pub mod model;
pub mod solver;
pub mod trajectory;
pub mod checks;
pub mod certificate;
pub mod verify;
pub mod config;
pub mod pipeline;
