//! Unit conversions at the I/O boundary and physical constants.
//!
//! Every routine in this crate works in angular units (rad/s). Ordinary
//! frequencies in Hz only appear at the edges, converted with
//! [`hz_to_rad`] / [`rad_to_hz`].

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[inline]
pub fn hz_to_rad<T: Real>(f: T) -> T {
    f * T::two_pi()
}

#[inline]
pub fn rad_to_hz<T: Real>(w: T) -> T {
    w / T::two_pi()
}

/// Power in dBm to watts.
pub fn dbm_to_watt<T: Real>(dbm: T) -> T {
    T::lit(1e-3) * T::lit(10.0).powf(dbm / T::lit(10.0))
}

pub fn watt_to_dbm<T: Real>(w: T) -> T {
    T::lit(10.0) * (w / T::lit(1e-3)).log10()
}

/// Power ratio in dB to a linear factor.
pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

pub fn linear_to_db<T: Real>(x: T) -> T {
    T::lit(10.0) * x.log10()
}

pub const HBAR: f64 = 1.054_571_817e-34;
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Electron gyromagnetic ratio divided by 2π, in Hz/T.
pub const GAMMA_E_HZ_PER_T: f64 = 28.0e9;

/// Physical constants used by the microscopic and calibration routines.
///
/// Defaults are CODATA ħ and μ₀ with γ_e = 2π × 28.0 GHz/T; all three can be
/// overridden from the run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants<T> {
    /// Reduced Planck constant, J·s.
    pub hbar: T,
    /// Vacuum permeability, T·m/A.
    pub mu0: T,
    /// Electron gyromagnetic ratio, rad/(s·T).
    pub gamma_e: T,
}

impl<T: Real> Default for Constants<T> {
    fn default() -> Self {
        Self {
            hbar: T::lit(HBAR),
            mu0: T::lit(MU0),
            gamma_e: hz_to_rad(T::lit(GAMMA_E_HZ_PER_T)),
        }
    }
}
