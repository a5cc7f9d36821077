//! Action spectra, Ekeland–Hofer–Zehnder and Gutt–Hutchings capacities of
//! strongly convex bodies in R^{2n}, computed from Clarke's dual functional on
//! Fourier loops.
//!
//! The runnable examples are the main tour of the crate:
//!
//! ```text
//! cargo run --release --example body_calculus   # gauge, conjugate, transforms
//! cargo run --release --example oracle          # closed-form ellipsoid capacities
//! cargo run --release --example profile         # admissible smoothing profiles
//! cargo run --release --example spectrum        # multistart action spectrum
//! cargo run --release --example orbit           # closed characteristic from a minimizer
//! cargo run --release --example index           # transverse indices from reduced Hessians
//! cargo run --release --example capacities      # c_1..c_k against the oracle
//! cargo run --release --example besse_zoll      # Besse / Zoll verdicts
//! cargo run --release --example gradcheck       # finite-difference table
//! cargo run --release --example converge        # truncation and grid sweep
//! ```
//!
//! A minimal session:
//!
//! ```
//! use symcap::body::ConvexBody;
//! use symcap::pipeline::{analyze, PipelineOptions};
//!
//! let body = ConvexBody::ellipsoid(&[1.0, 2.0]).unwrap();
//! let opts = PipelineOptions { l_max: 8, grid: 64, ..PipelineOptions::default() };
//! let an = analyze(&body, &opts).unwrap();
//! assert!((an.capacities.values()[0] - 1.0).abs() < 1e-9);
//! ```

pub mod body;
pub mod capacities;
pub mod checks;
pub mod cli;
pub mod dual;
pub mod error;
pub mod linalg;
pub mod loops;
pub mod pipeline;
pub mod profile;
pub mod solver;
pub mod spectrum;

pub use error::{Error, Result};
