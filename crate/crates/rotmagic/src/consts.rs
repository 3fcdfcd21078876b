//! Physical constants (SI, CODATA 2018) and unit conversion factors.

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / std::f64::consts::TAU;
pub const C: f64 = 299_792_458.0;
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Nuclear magneton, J/T.
pub const MU_N: f64 = 5.050_783_746_1e-27;

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// 1 debye in C m.
pub const DEBYE: f64 = 3.335_640_951_98e-30;
/// 1 gauss in tesla.
pub const GAUSS: f64 = 1e-4;
/// 1 kV/cm in V/m.
pub const KV_PER_CM: f64 = 1e5;
/// 1 W/cm^2 in W/m^2.
pub const W_PER_CM2: f64 = 1e4;

/// 1 h*kHz/(W/cm^2) in J/(W/m^2); the I/O unit for polarizabilities.
pub const ALPHA_UNIT: f64 = PLANCK * 1e3 / W_PER_CM2;
