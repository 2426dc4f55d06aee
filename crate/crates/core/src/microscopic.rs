//! Phenomenological rates from material, geometry and optical drive.
//!
//! The zero-point field of the cavity and the static bias field are both
//! commonly written B₀; here they are `zpf_field` and `bias_field`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::units::Constants;

/// Ferromagnetic sample and cavity description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialGeometry<T> {
    /// Net spin density n, m⁻³.
    pub spin_density: T,
    /// Verdet constant, rad/m.
    pub verdet: T,
    /// Optical path length through the sample, m.
    pub sample_length: T,
    /// Sample volume V_s, m³.
    pub sample_volume: T,
    /// Cavity mode volume V, m³.
    pub cavity_volume: T,
    /// Gilbert damping constant α.
    pub gilbert_alpha: T,
    /// Gyromagnetic ratio γ_e, rad/(s·T).
    pub gyromagnetic_ratio: T,
    /// Bare Kittel angular frequency ω_K, rad/s.
    pub bare_kittel_freq: T,
}

/// Non-fatal geometry inconsistencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeometryWarning {
    /// The optical path is longer than the diameter of a sphere of the
    /// stated sample volume.
    PathExceedsSphereDiameter { path: f64, diameter: f64 },
}

impl<T: Real> MaterialGeometry<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spin_density", self.spin_density),
            ("verdet", self.verdet),
            ("sample_length", self.sample_length),
            ("sample_volume", self.sample_volume),
            ("cavity_volume", self.cavity_volume),
            ("gyromagnetic_ratio", self.gyromagnetic_ratio),
            ("bare_kittel_freq", self.bare_kittel_freq),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::param(name, "must be finite and strictly positive"));
            }
        }
        if !(self.gilbert_alpha >= T::zero()) {
            return Err(Error::param("gilbert_alpha", "must be non-negative"));
        }
        Ok(())
    }

    /// Total number of spins N = n V_s.
    pub fn spin_count(&self) -> T {
        self.spin_density * self.sample_volume
    }

    /// Diameter of a sphere with the sample volume.
    pub fn equivalent_sphere_diameter(&self) -> T {
        let three_over_four_pi = T::lit(3.0) / (T::lit(4.0) * T::PI());
        T::two() * (three_over_four_pi * self.sample_volume).cbrt()
    }

    pub fn warnings(&self) -> Vec<GeometryWarning> {
        let d = self.equivalent_sphere_diameter();
        if self.sample_length > d {
            vec![GeometryWarning::PathExceedsSphereDiameter {
                path: self.sample_length.as_f64(),
                diameter: d.as_f64(),
            }]
        } else {
            Vec::new()
        }
    }
}

/// Volume of a sphere of the given radius.
pub fn sphere_volume<T: Real>(radius: T) -> T {
    T::lit(4.0) / T::lit(3.0) * T::PI() * radius * radius * radius
}

/// Strong optical drive (carrier) of the Faraday interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalDriveParams<T> {
    /// Power P₀, W.
    pub power: T,
    /// Carrier angular frequency Ω₀, rad/s.
    pub carrier_angular_freq: T,
}

impl<T: Real> OpticalDriveParams<T> {
    pub fn new(power: T, carrier_angular_freq: T) -> Result<Self> {
        if !(power >= T::zero()) || !power.is_finite() {
            return Err(Error::param("power", "must be finite and non-negative"));
        }
        if !(carrier_angular_freq > T::zero()) {
            return Err(Error::param("carrier_angular_freq", "must be strictly positive"));
        }
        Ok(Self {
            power,
            carrier_angular_freq,
        })
    }

    /// Photon flux |β|² = P₀ / ħΩ₀, s⁻¹.
    pub fn photon_flux(&self, hbar: T) -> T {
        self.power / (hbar * self.carrier_angular_freq)
    }
}

/// Static bias and its linear tuning by the coil current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldBias<T> {
    /// Static bias field B₀ from the permanent magnets, T.
    pub bias_field: T,
    /// Coil tuning dB₀/dI, T/A.
    pub field_per_current: T,
    /// Anchor current I₀, A.
    pub reference_current: T,
    /// Kittel frequency at the anchor current ω_m(I₀), rad/s.
    pub reference_kittel_freq: T,
}

impl<T: Real> FieldBias<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.field_per_current.is_finite() {
            return Err(Error::param("field_per_current", "must be finite"));
        }
        if !(self.bias_field >= T::zero()) {
            return Err(Error::param("bias_field", "must be non-negative"));
        }
        if !(self.reference_kittel_freq > T::zero()) {
            return Err(Error::param("reference_kittel_freq", "must be strictly positive"));
        }
        Ok(())
    }

    /// Current at which the Kittel mode reaches `omega`.
    pub fn current_for(&self, omega: T, gamma_e: T) -> T {
        self.reference_current + (omega - self.reference_kittel_freq) / (gamma_e * self.field_per_current)
    }
}

/// Zero-point magnetic field amplitude `√(μ₀ħω_c / 2V)` of a cavity mode, T.
pub fn zero_point_field<T: Real>(cavity_volume: T, omega_c: T, c: &Constants<T>) -> T {
    (c.mu0 * c.hbar * omega_c / (T::two() * cavity_volume)).sqrt()
}

/// Single-spin coupling g₀ = γ_e B/√2; only the co-rotating half of the
/// linearly polarized cavity field drives the precession.
pub fn single_spin_coupling<T: Real>(zpf_field: T, gamma_e: T) -> T {
    gamma_e * zpf_field / T::SQRT_2()
}

/// Collectively enhanced coupling g = g₀ √(n V_s).
pub fn collective_coupling<T: Real>(g0: T, spin_density: T, sample_volume: T) -> Result<T> {
    let n = spin_density * sample_volume;
    if !(n >= T::one()) {
        return Err(Error::Precondition(format!("spin count N = {n:e} must be at least 1")));
    }
    Ok(g0 * n.sqrt())
}

/// First-principles g for a sample filling the cavity field, multiplied by
/// an explicit mode-overlap factor (1.0 = uniform field).
pub fn predicted_coupling<T: Real>(
    geom: &MaterialGeometry<T>,
    omega_c: T,
    overlap_factor: T,
    c: &Constants<T>,
) -> Result<T> {
    let b = zero_point_field(geom.cavity_volume, omega_c, c);
    let g0 = single_spin_coupling(b, geom.gyromagnetic_ratio);
    Ok(overlap_factor * collective_coupling(g0, geom.spin_density, geom.sample_volume)?)
}

/// Faraday coupling constant from the Verdet constant, `φ_F = 𝒱l = Gnl/4`.
pub fn verdet_to_coupling_constant<T: Real>(verdet: T, spin_density: T) -> Result<T> {
    if !(spin_density > T::zero()) {
        return Err(Error::param("spin_density", "must be strictly positive"));
    }
    Ok(T::lit(4.0) * verdet / spin_density)
}

/// Magnon–light rate ζ = G² l² n P₀ / (16 V_s ħ Ω₀), rad/s.
pub fn zeta_from_coupling_constant<T: Real>(
    coupling_constant: T,
    geom: &MaterialGeometry<T>,
    drive: &OpticalDriveParams<T>,
    c: &Constants<T>,
) -> T {
    let g = coupling_constant;
    let l = geom.sample_length;
    g * g * l * l * geom.spin_density * drive.photon_flux(c.hbar) / (T::lit(16.0) * geom.sample_volume)
}

/// Intrinsic magnon dissipation γ = 2αω_m.
pub fn gamma_from_gilbert<T: Real>(alpha: T, omega_m: T) -> T {
    T::two() * alpha * omega_m
}

/// Inverse of [`gamma_from_gilbert`].
pub fn gilbert_from_gamma<T: Real>(gamma: T, omega_m: T) -> T {
    gamma / (T::two() * omega_m)
}

/// Damping-shifted precession frequency ω_m = ω_K / (1 + α²).
pub fn kittel_shift<T: Real>(omega_k: T, alpha: T) -> T {
    omega_k / (T::one() + alpha * alpha)
}

/// Affine Kittel tuning `ω_m(I) = ω_m(I₀) + γ_e (dB₀/dI)(I - I₀)`.
pub fn kittel_freq_from_current<T: Real>(bias: &FieldBias<T>, gamma_e: T, current: T) -> T {
    bias.reference_kittel_freq + gamma_e * bias.field_per_current * (current - bias.reference_current)
}
