//! Tree-indexed Ehrenfeucht–Fraïssé games over finitely presented abelian
//! groups, together with a finite-stage builder for filtrations of
//! ω₁-separable-style groups: gadgets, z-chains, projections, obstruction
//! checks and level-preserving isomorphism search.

pub mod cli;
pub mod constructions;
pub mod efgame;
pub mod equivalences;
pub mod error;
pub mod trees;
pub mod abgroup;
pub mod zlinalg;

pub use error::{Error, Result};
