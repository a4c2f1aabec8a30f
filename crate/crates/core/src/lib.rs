//! Batched reconstruction of fine-resolution particle trajectories from
//! coarse flow samples.
//!
//! The pipeline groups each trajectory into runs of four points, fits three
//! cubic segments per group with a constant 4×5 coefficient matrix, batches
//! that product over all trajectories through a block-diagonal operator, and
//! evaluates every segment at a fixed set of parameter ticks with one matrix
//! product per segment plane.
//!
//! ```
//! use splineflow::flow_model::{generate_flow, FlowField};
//! use splineflow::pipeline::{fit_flow, FitOptions};
//! use splineflow::evaluator::assemble_snapshot;
//!
//! let field = FlowField::uniform(1.0);
//! let flow = generate_flow(&field, 2, 7, 1.0).unwrap();
//! let coeffs = fit_flow(&flow, &FitOptions::default()).unwrap();
//! let snap = assemble_snapshot(&coeffs, 10).unwrap();
//! assert_eq!(snap.points_per_trajectory(), 61);
//! ```

pub mod analysis;
pub mod batch_sparse;
pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod evaluator;
pub mod flow_model;
pub mod io;
pub mod partitioner;
pub mod pipeline;
pub mod spline_kernel;

pub use error::{Error, Result};

/// A sample position in centimeters. Two-dimensional flows keep `z = 0`.
pub type Point = [f64; 3];
