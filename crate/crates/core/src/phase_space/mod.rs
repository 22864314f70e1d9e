//! Quadratic Hamiltonians, their linear symplectic flows, and the
//! Weyl–Wigner–Moyal algebra on polynomial phase-space symbols.
//!
//! Phase-space vectors are always ordered with the momentum block first:
//! `z = (p_0, …, p_{d-1}, q_0, …, q_{d-1})`.

mod hamiltonian;
mod symbol;

pub use hamiltonian::{flow_jacobian, symplectic_adjoint, symplectic_form, FlowJacobian, QuadraticHamiltonian};
pub use symbol::{moyal_bracket, poisson_bracket, star_product, PolynomialSymbol};
