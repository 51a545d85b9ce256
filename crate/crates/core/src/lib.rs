//! Metamorphic testing for trajectory-producing robot task controllers.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: poses, trajectories and the discrete Fréchet distance.
//! - [`scene`]: scenes, objects, prompts and test cases.
//! - [`sim`]: a deterministic kinematic world with a scripted pick-and-place
//!   controller and injectable faults.
//! - [`oracles`]: symbolic task-success oracles and failure diagnosis.
//! - [`mt`]: the five metamorphic relations and the campaign runner.
//! - [`analytics`]: threshold calibration, Venn overlap, violation rates and
//!   report emission.
//! - [`cli`]: the `trajmt` command-line front end.

pub mod analytics;
pub mod canonical;
pub mod cli;
pub mod config;
pub mod error;
pub mod generator;
pub mod geometry;
pub mod mt;
pub mod oracles;
pub mod scene;
pub mod sim;

pub use error::{Error, Result};
