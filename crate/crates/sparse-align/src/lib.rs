//! Sparse, interpretable alignments between two sets of items (text spans
//! or vectors) via constrained optimal transport.
//!
//! The pipeline: build a [`ot::CostMatrix`] (possibly from text through
//! [`textio`]), pick a [`constraints::ConstraintSpec`], and call
//! [`constraints::solve_constrained`]. Cardinality constraints are
//! compiled into an augmented square problem (replicas and dummy nodes),
//! solved with the entropically regularized solver in [`sinkhorn`], and
//! rounded back to a sparse plan whose active pairs are the alignment.
//! Small-instance oracles, Birkhoff decomposition, and perturbation
//! checks live in [`exact`]; rationale extraction and its scoring in
//! [`rationale`]; retrieval metrics in [`metrics`].
//!
//! ```
//! use sparse_align::constraints::{solve_constrained, ConstraintSpec};
//! use sparse_align::ot::{CostMatrix, SolverConfig};
//!
//! let c = CostMatrix::from_rows(&[
//!     vec![0.1, 0.9, 0.8],
//!     vec![0.9, 0.2, 0.7],
//!     vec![0.8, 0.7, 0.3],
//! ])?;
//! let out = solve_constrained(&c, &ConstraintSpec::exact_k(3), &SolverConfig::default())?;
//! let pairs: Vec<(usize, usize)> = out.active_pairs.iter().map(|p| (p.0, p.1)).collect();
//! assert_eq!(pairs, vec![(0, 0), (1, 1), (2, 2)]);
//! # Ok::<(), sparse_align::Error>(())
//! ```

pub mod constraints;
pub mod error;
pub mod exact;
pub mod metrics;
pub mod ot;
pub mod rationale;
pub mod sinkhorn;
pub mod textio;

pub use error::{Error, Result};
