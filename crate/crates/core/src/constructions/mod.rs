//! Finite-stage versions of the two-group construction: free stages,
//! `u/v` gadgets, divisibility chains, the guess registry, the isomorphism
//! family along the index tree, and projections.

mod build;
mod projections;
mod registry;
mod zchain;

pub use build::{
    build_truncated_pair, check_family, evaluate_ii2, extend_over_zchain, extension_exists, select_k, Build, BuildOptions, GenName, FamilyCheck, GuessScript, HSpec, KCase, KForm,
    StageClass, ZChain,
};
pub use projections::{build_projections, canonical_ladders, check_standard_form, y_set, ProjectionSystem};
pub use registry::{update_w_registry, validate_upsilon, WName, WRegistry};
pub use zchain::{
    adjoin_z_chain, ball, extension_obstruction, gadget_height, gadget_iso, nonzero_int, obstruction_at, select_prime,
    vectors_with_l1, ChainData, Triple, TripleEnumerator,
};
