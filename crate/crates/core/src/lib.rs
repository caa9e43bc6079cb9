//! Quantum Hamiltonian relaxation of the little noncommutative Grothendieck problem:
//! maximize `Σ_{(u,v)∈E} ⟨C_uv, R_u R_vᵀ⟩` over `R_v ∈ O(n)` or `SO(n)`.
//!
//! Each vertex variable is embedded as a fermionic Gaussian state on `n` qubits (or
//! `n-1` qubits for rotations after projecting to even parity). The objective becomes
//! a sparse Hamiltonian whose extremal states are rounded back to group elements.
//! Classical SDP relaxations with Gaussian rounding serve as the baseline.

pub mod approx_ratio;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod free_fermion;
pub mod hamiltonian;
pub mod instance;
pub mod orthlin;
pub mod pauli;
pub mod rng;
pub mod rounding;
pub mod sdp;
pub mod sparse;

pub use error::{Error, Result};
pub use orthlin::Group;
