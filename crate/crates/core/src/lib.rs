//! Block diagonalization of semidefinite programs that are invariant under
//! the action of a finite permutation group.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`permgroup`] — permutation groups given by generators, orbits of the
//!   action on pairs, and the canonical 0/1 basis of the commutant algebra.
//! * [`numkernel`] — the dense complex linear algebra the decomposer needs
//!   (clustered Hermitian eigendecomposition, weighted orthonormalization).
//! * [`decomposer`] — the randomized decomposition of `C^X` into irreducible
//!   group spaces, the matrix-unit basis of the commutant, and the expansion
//!   coefficients that realize the block diagonalization.
//! * [`sdpreduce`] — reduction of an invariant SDP to its block form, real
//!   embedding, SDPA export, and lifting of block solutions.
//! * [`terwilliger`] — the exact closed-form block diagonalization of the
//!   commutant of the symmetric group acting on binary words (the
//!   Terwilliger algebra of the binary Hamming scheme), in rational
//!   arithmetic with symbolic square roots; doubles as a cross-validation
//!   oracle for the numeric pipeline.

// Orbit-indexed tables are walked by index in several places; the index
// is shared across parallel structures, so iterator chains read worse.
#![allow(clippy::needless_range_loop)]

pub mod decomposer;
pub mod error;
pub mod numkernel;
pub mod permgroup;
pub mod sdpa;
pub mod sdpreduce;
pub mod terwilliger;

pub use decomposer::{BlockImage, Decomposition, IrreducibleSpace};
pub use error::{Error, Result};
pub use numkernel::HermitianSpectrum;
pub use permgroup::{GroupAction, PairOrbits, Permutation};
pub use sdpreduce::{InvariantSdp, RealReducedSdp, ReducedSdp};
pub use terwilliger::{QuadExact, Rational, TerwilligerTables};

/// Complex scalar used by all numeric modules.
pub type Complex = num_complex::Complex<f64>;

/// Dense complex matrix used by all numeric modules.
pub type CMatrix = nalgebra::DMatrix<Complex>;

/// Dense complex vector.
pub type CVector = nalgebra::DVector<Complex>;
