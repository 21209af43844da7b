//! Numerical tolerances shared across the crate.

/// Relative eigenvalue threshold separating range from kernel.
pub const RANK_TOL: f64 = 1e-9;
/// Eigenvalues above `-PSD_FLOOR` count as nonnegative.
pub const PSD_FLOOR: f64 = 1e-10;
/// Product expectations within this distance of zero are treated as zero.
pub const ZERO_TOL: f64 = 1e-9;
/// Entrywise Hermiticity tolerance for in-memory construction.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Entrywise Hermiticity tolerance when reading operators from files.
pub const JSON_HERMITIAN_TOL: f64 = 1e-9;
/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-12;
/// Gram-matrix eigenvalue threshold used for span dimensions.
pub const SPAN_TOL: f64 = 1e-8;
/// Two unit tensors with overlap modulus above `1 - DEDUP_TOL` are the same ray.
pub const DEDUP_TOL: f64 = 1e-8;
/// A value is counted as a detection when below `-DETECTION_TOL`.
pub const DETECTION_TOL: f64 = 1e-10;
