//! Robust stability certificates for networks of LTI agents coupled through
//! uncertain links.
//!
//! The crate assembles the monolithic, neighbourhood and link-wise IQC
//! conditions for a network, turns each into a KYP LMI, and solves it with
//! Clarabel. A frequency-grid sweep and a time-domain simulator serve as
//! independent cross-checks.

// `!(a < b)` comparisons are deliberate: they reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

// links the system BLAS/LAPACK that Clarabel's SDP support needs
use openblas_src as _;

pub mod certificate;
pub mod cli;
pub mod graph;
pub mod kyp;
pub mod lti;
pub mod multiplier;
pub mod netfile;
pub mod sim;
pub mod sparse;

pub use graph::{GraphError, NetworkGraph, StructuralMatrices};
pub use lti::{Frequency, LtiError, StateSpace};
pub use kyp::{certify_network, KypOptions, Method, Verdict};
pub use netfile::{parse_network_file, NetworkFile, ReportFile};
