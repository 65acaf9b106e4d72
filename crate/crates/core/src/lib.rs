//! Two-speed branching Brownian motion laboratory.
//!
//! The law of the maximum and related extremal statistics are computed two
//! independent ways: an exact event-driven particle simulator with pruning
//! ([`engine`]) and a finite-difference solver for the time-inhomogeneous
//! F-KPP equation ([`fkpp`]). [`stats`] turns both into fitted limit objects
//! and [`oracle`] holds closed-form cross-checks.

pub mod acceptance;
pub mod config;
pub mod engine;
pub mod error;
pub mod fkpp;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod record;
pub mod rng;
pub mod runner;
pub mod stats;

pub use error::{Error, Result};
pub use model::{BranchingLaw, CorrectionPrediction, LogForm, Shape, Sign, SpeedProfile};
