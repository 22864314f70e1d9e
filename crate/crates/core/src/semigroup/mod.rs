//! The exact averaged dynamics: smearing covariances, the characteristic
//! function of the smearing measure, moment propagation and evolution of
//! sampled Wigner functions.

mod evolve;
mod grid;
mod moments;
mod smearing;

pub use evolve::{classical_evolve, evolve_wigner, q_density, ESCAPE_TOLERANCE};
pub use grid::{GridGeometry, WignerGrid};
pub use moments::{
    energy_rate, free_d_poly, free_q4_gaussian, free_q4_moment, propagate_moments, GaussianMoments, MomentSnapshot,
};
pub use smearing::{smearing_by_quadrature, smearing_covariance, CharacteristicFn, Direction, SmearingCovariance};
