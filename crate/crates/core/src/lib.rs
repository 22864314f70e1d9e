//! Noise-averaged quantum dynamics in phase space.
//!
//! Quadratic Hamiltonians driven by a classical random force field, averaged
//! over noise realisations, in the Wigner representation. Includes the
//! averaged semigroup on Wigner functions, a Monte Carlo sampler, and an
//! oscillator coupled to a harmonic heat bath.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod heat_bath;
pub mod linalg;
pub mod monte_carlo;
pub mod noise;
pub mod phase_space;
pub mod quad;
pub mod semigroup;
pub mod special;

pub use error::{Error, Result};
pub use phase_space::{
    flow_jacobian, moyal_bracket, poisson_bracket, star_product, FlowJacobian, PolynomialSymbol,
    QuadraticHamiltonian,
};
pub use noise::{CovarianceSpec, CurvatureTable, DiffusionMatrix, FieldSampler, SpectralAtom};
pub use semigroup::{
    classical_evolve, evolve_wigner, propagate_moments, q_density, smearing_covariance, CharacteristicFn, Direction,
    GaussianMoments, GridGeometry, MomentSnapshot, SmearingCovariance, WignerGrid,
};
pub use heat_bath::{
    discretize_bath, finite_n_moments, longtime_limits, reduced_moments, thermal_values, BathCorrelation, BathSpec,
    GreenFunction, LongTimeLimits, ReducedDynamics, ReducedMoments, SpectralDensity, ThermalMethod, ThermalValues,
};
pub use monte_carlo::{
    classical_trajectory, simulate_classical, simulate_total_system, Estimate, MomentEstimate, ObservableMoments,
    SimulationConfig,
};
