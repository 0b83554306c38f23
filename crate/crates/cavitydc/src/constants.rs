//! Physical constants (2019 SI where exact, CODATA otherwise). SI units throughout.

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permeability, H/m. Fixed here at the classical 4π×10⁻⁷ value.
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Planck constant, J·s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Bohr magneton, J/T (CODATA 2018).
pub const BOHR_MAGNETON: f64 = 9.274_010_0783e-24;

/// Tesla per gauss.
pub const TESLA_PER_GAUSS: f64 = 1.0e-4;
