//! Edge-state decomposition and entanglement witnesses for bipartite systems.
//!
//! A PPT state `ρ` splits as `ρ = (1 − p)·σ_sep + p·δ` with `δ` an edge state:
//! no product vector `|e,f⟩` has `|e,f⟩ ∈ R(δ)` and `|e,f*⟩ ∈ R(δ^{T_B})`. Edge
//! states yield nondecomposable witnesses, which can be sharpened by
//! subtracting decomposable operators and converted to positive maps.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomposition;
pub mod error;
pub mod family;
pub mod linalg;
pub mod maps;
pub mod operator;
pub mod product_search;
pub mod sample;
pub mod tol;
pub mod witness;

pub use decomposition::{decompose_edge, is_edge, EdgeDecomposition};
pub use error::{Error, Result};
pub use family::{rho_b, scan_family};
pub use maps::{detect_via_map, witness_to_map, ChoiMap};
pub use operator::{ppt_check, BipartiteDims, DensityMatrix, HermitianOperator, ProductVector, Subsystem};
pub use product_search::{collect_zero_set, min_product_expectation, ZeroSet};
pub use witness::{construct_edge_witness, optimize_witness, OptimizeOptions, WitnessReport};
