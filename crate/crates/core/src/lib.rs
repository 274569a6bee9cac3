//! Two-photon polarization tomography and entanglement verification.
//!
//! The crate reconstructs two-qubit polarization states from measured
//! coincidence probabilities and quantifies how entangled (or not) the result
//! is. The pieces fit together as a pipeline:
//!
//! * [`counts`] — raw coincidence counts, second-order correlation values,
//!   and the normalization schemes that turn them into probabilities;
//! * [`tomo`] — measurement settings, linear inversion, and maximum-likelihood
//!   reconstruction of a physical density matrix;
//! * [`qstate`] — the density-matrix type itself plus the linear algebra it
//!   needs (a self-contained Hermitian eigensolver among other things);
//! * [`metrics`] — tangle, concurrence, entanglement of formation, linear
//!   entropy, partial-transpose and largest-eigenvalue tests, degrees of
//!   polarization and correlation;
//! * [`mcerr`] — Monte-Carlo uncertainty propagation and unpolarized-background
//!   subtraction;
//! * [`fitstats`] — weighted constant/sinusoid fits and sigma distances for
//!   comparing measured curves against model expectations;
//! * [`io`] — the JSON/CSV wire formats shared with the command-line tool;
//! * [`fixtures`] — the bundled reference data set used by the verification
//!   suite and available to downstream tests.

pub mod counts;
pub mod fitstats;
pub mod fixtures;
pub mod io;
pub mod mcerr;
pub mod metrics;
pub mod qstate;
pub mod tomo;

pub use metrics::{MetricsReport, DEFAULT_DOP_THRESHOLD};
pub use qstate::{bell_state, tensor, BellKind, ComplexMatrix, DensityMatrix, Photon, PureState};
pub use tomo::{max_likelihood, MLConfig, MeasurementSet, ProbabilityRecord, SettingLabel};
