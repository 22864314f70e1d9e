//! An oscillator coupled linearly to a harmonic heat bath, with and without
//! the random force field.

mod bath;
mod correlation;
mod green;
mod reduced;
mod spectral;
mod thermal;

pub use bath::{
    default_cutoff, discretize_bath, finite_n_moments, BathSpec, FiniteNMoments, NormalModes, SystemFunctions,
};
pub use correlation::{beta_eff, BathCorrelation};
pub use green::{green_hat, GreenFunction};
pub use reduced::{reduced_moments, ReducedDynamics, ReducedMoments};
pub use spectral::{faddeeva, SpectralDensity};
pub(crate) use thermal::force_strength as position_force_strength;
pub use thermal::{
    g_square_norm, gdot_square_norm, longtime_limits, parseval_check, thermal_p2, thermal_q2, thermal_values,
    InequalityChain, LongTimeLimits, ParsevalCheck, ThermalMethod, ThermalValues,
};
