//! CODATA 2018 physical constants (SI units).
//!
//! Every derived number in the crate goes through this table.

use std::f64::consts::PI;

/// Planck constant h (J s), exact.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant ħ (J s).
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Boltzmann constant k_B (J/K), exact.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Bohr magneton μ_B (J/T).
pub const BOHR_MAGNETON: f64 = 9.274_010_0783e-24;
/// Nuclear magneton μ_N (J/T).
pub const NUCLEAR_MAGNETON: f64 = 5.050_783_7461e-27;
/// Vacuum permeability μ₀ (N/A²).
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Speed of light in vacuum (m/s), exact.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Free-electron g-factor (magnitude).
pub const G_FREE_ELECTRON: f64 = 2.002_319_304_362_56;
/// Proton gyromagnetic ratio γ_p / 2π (Hz/T).
pub const PROTON_GYROMAGNETIC_HZ_PER_T: f64 = 42.577_478_518e6;

/// Seconds in a Julian year.
pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

/// Electron gyromagnetic ratio γ_e / 2π (Hz/T) for a given g-factor.
pub fn electron_gyromagnetic_hz_per_t(g_e: f64) -> f64 {
    g_e * BOHR_MAGNETON / PLANCK
}

/// Angular frequency (rad/s) from an ordinary frequency (Hz).
#[inline]
pub fn to_angular(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

/// Ordinary frequency (Hz) from an angular frequency (rad/s).
#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}
