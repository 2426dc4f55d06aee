//! Closed-form input–output response of the cavity/Kittel-mode hybrid.
//!
//! All quantities are angular (rad/s). The noise operators of the
//! Heisenberg–Langevin equations are dropped; only mean-field responses are
//! computed.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::units::hz_to_rad;

/// Complex response value: dimensionless for S-parameters, seconds for
/// susceptibilities.
pub type ComplexResponse<T> = Complex<T>;

/// Denominators smaller than this fraction of their typical magnitude are
/// reported as singular.
pub const SINGULAR_REL_TOL: f64 = 1e-15;

/// Rates and frequencies of the hybrid system, all in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams<T> {
    /// Cavity resonance ω_c.
    pub omega_c: T,
    /// Kittel-mode resonance ω_m.
    pub omega_m: T,
    /// Cavity internal loss κ.
    pub kappa: T,
    /// Cavity external (port) coupling κ_c.
    pub kappa_c: T,
    /// Magnon intrinsic dissipation γ.
    pub gamma: T,
    /// Magnon–photon coupling g.
    pub g: T,
    /// Magnon–light parametric coupling ζ.
    pub zeta: T,
}

impl<T: Real> SystemParams<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(omega_c: T, omega_m: T, kappa: T, kappa_c: T, gamma: T, g: T, zeta: T) -> Result<Self> {
        let p = Self {
            omega_c,
            omega_m,
            kappa,
            kappa_c,
            gamma,
            g,
            zeta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from ordinary frequencies in Hz (each value is
    /// multiplied by 2π).
    #[allow(clippy::too_many_arguments)]
    pub fn from_hz(f_c: T, f_m: T, kappa: T, kappa_c: T, gamma: T, g: T, zeta: T) -> Result<Self> {
        Self::new(
            hz_to_rad(f_c),
            hz_to_rad(f_m),
            hz_to_rad(kappa),
            hz_to_rad(kappa_c),
            hz_to_rad(gamma),
            hz_to_rad(g),
            hz_to_rad(zeta),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("omega_c", self.omega_c),
            ("omega_m", self.omega_m),
            ("kappa", self.kappa),
            ("kappa_c", self.kappa_c),
            ("gamma", self.gamma),
            ("g", self.g),
            ("zeta", self.zeta),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        for (name, v) in [("omega_c", self.omega_c), ("omega_m", self.omega_m)] {
            if v <= T::zero() {
                return Err(Error::param(name, "must be strictly positive"));
            }
        }
        for (name, v) in [
            ("kappa", self.kappa),
            ("kappa_c", self.kappa_c),
            ("gamma", self.gamma),
            ("g", self.g),
            ("zeta", self.zeta),
        ] {
            if v < T::zero() {
                return Err(Error::param(name, "must be non-negative"));
            }
        }
        // Rotating-frame validity: each rate below the carrier it damps or couples.
        let carrier_min = self.omega_c.min(self.omega_m);
        let checks = [
            ("kappa", self.kappa, self.omega_c),
            ("kappa_c", self.kappa_c, self.omega_c),
            ("gamma", self.gamma, self.omega_m),
            ("g", self.g, carrier_min),
            ("zeta", self.zeta, self.omega_m),
        ];
        for (name, rate, carrier) in checks {
            if rate >= carrier {
                return Err(Error::param(
                    name,
                    format!("rate {rate:e} rad/s is not below its carrier {carrier:e} rad/s"),
                ));
            }
        }
        Ok(())
    }

    /// Total cavity loss κ + κ_c.
    #[inline]
    pub fn kappa_total(&self) -> T {
        self.kappa + self.kappa_c
    }

    pub fn detunings(&self, omega: T) -> Detunings<T> {
        Detunings {
            delta_c: omega - self.omega_c,
            delta_m: omega - self.omega_m,
        }
    }
}

/// Probe detunings from the cavity and Kittel resonances, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detunings<T> {
    pub delta_c: T,
    pub delta_m: T,
}

impl<T: Real> Detunings<T> {
    pub fn new(delta_c: T, delta_m: T) -> Result<Self> {
        if !delta_c.is_finite() || !delta_m.is_finite() {
            return Err(Error::param("detunings", "must be finite"));
        }
        Ok(Self { delta_c, delta_m })
    }

    pub fn flipped(self) -> Self {
        Self {
            delta_c: -self.delta_c,
            delta_m: -self.delta_m,
        }
    }
}

/// Lorentzian susceptibility `[-i(ω - ω_res) + Γ/2]⁻¹`.
pub fn susceptibility<T: Real>(omega_res: T, width: T, omega: T) -> Result<Complex<T>> {
    let den = Complex::new(width * T::half(), -(omega - omega_res));
    if den.re == T::zero() && den.im == T::zero() {
        return Err(Error::Singular {
            omega: omega.as_f64(),
            what: "lossless mode driven exactly on resonance",
        });
    }
    Ok(den.inv())
}

/// Cavity susceptibility χ_c(ω).
pub fn chi_c<T: Real>(p: &SystemParams<T>, omega: T) -> Result<Complex<T>> {
    susceptibility(p.omega_c, p.kappa_total(), omega)
}

/// Kittel-mode susceptibility χ_m(ω).
pub fn chi_m<T: Real>(p: &SystemParams<T>, omega: T) -> Result<Complex<T>> {
    susceptibility(p.omega_m, p.gamma, omega)
}

/// `1/(χ_c χ_m) + g²`, the common denominator of every hybrid response,
/// with a magnitude scale for the singularity test.
fn hybrid_denominator<T: Real>(p: &SystemParams<T>, omega: T) -> Result<Complex<T>> {
    let inv_c = Complex::new(p.kappa_total() * T::half(), -(omega - p.omega_c));
    let inv_m = Complex::new(p.gamma * T::half(), -(omega - p.omega_m));
    let g2 = p.g * p.g;
    let den = inv_c * inv_m + g2;
    let scale = inv_c.norm() * inv_m.norm() + g2;
    if !(den.norm() > T::lit(SINGULAR_REL_TOL) * scale) {
        return Err(Error::Singular {
            omega: omega.as_f64(),
            what: "vanishing hybrid denominator 1 + g²χ_mχ_c",
        });
    }
    Ok(den)
}

/// Microwave reflection S₁₁(ω) of the hybridized cavity.
///
/// Evaluated in the cleared form
/// `[(iΔ_c - (κ-κ_c)/2)(iΔ_m - γ/2) + g²] / [(iΔ_c - (κ+κ_c)/2)(iΔ_m - γ/2) + g²]`,
/// which stays finite at ω = ω_m even for γ = 0.
pub fn s11_hybrid<T: Real>(p: &SystemParams<T>, omega: T) -> Result<Complex<T>> {
    let den = hybrid_denominator(p, omega)?;
    let dc = omega - p.omega_c;
    let dm = omega - p.omega_m;
    let magnon = Complex::new(-p.gamma * T::half(), dm);
    let num = Complex::new(-(p.kappa - p.kappa_c) * T::half(), dc) * magnon + p.g * p.g;
    // den = (-iΔ_c + K/2)(-iΔ_m + γ/2) + g² = (iΔ_c - K/2)(iΔ_m - γ/2) + g².
    Ok(num / den)
}

/// Reflection of the bare Kittel mode seen through a coupling coil.
pub fn s11_coil<T: Real>(omega_m: T, gamma: T, gamma_c: T, omega: T) -> Result<Complex<T>> {
    if gamma < T::zero() || gamma_c < T::zero() {
        return Err(Error::param("gamma", "coil model rates must be non-negative"));
    }
    let d = omega - omega_m;
    let den = Complex::new(-(gamma_c + gamma) * T::half(), d);
    if den.re == T::zero() && den.im == T::zero() {
        return Err(Error::Singular {
            omega: omega.as_f64(),
            what: "lossless, uncoupled Kittel mode on resonance",
        });
    }
    Ok(Complex::new((gamma_c - gamma) * T::half(), d) / den)
}

/// Shared microwave↔light conversion kernel
/// `i g √(κ_c ζ) χ_m χ_c / (1 + g² χ_m χ_c)`.
pub fn conversion_kernel<T: Real>(p: &SystemParams<T>, omega: T) -> Result<Complex<T>> {
    let den = hybrid_denominator(p, omega)?;
    let amp = p.g * (p.kappa_c * p.zeta).sqrt();
    Ok(Complex::new(T::zero(), amp) / den)
}

/// Microwave → light amplitude, Stokes sideband at Ω₀ − ω.
pub fn mw_to_light_stokes<T: Real>(p: &SystemParams<T>, omega: T) -> Result<Complex<T>> {
    conversion_kernel(p, omega)
}

/// Microwave → light amplitude, anti-Stokes sideband at Ω₀ + ω. Identical to
/// the Stokes amplitude.
pub fn mw_to_light_anti_stokes<T: Real>(p: &SystemParams<T>, omega: T) -> Result<Complex<T>> {
    conversion_kernel(p, omega)
}

/// Measured microwave→light coefficient S_LM(ω) with detection gain η:
/// the heterodyne sum `√η/(2i)` × (Stokes + anti-Stokes).
pub fn s_lm<T: Real>(p: &SystemParams<T>, eta: T, omega: T) -> Result<Complex<T>> {
    if eta < T::zero() || !eta.is_finite() {
        return Err(Error::param("eta", "must be finite and non-negative"));
    }
    let k = conversion_kernel(p, omega)?;
    Ok(k * Complex::new(T::zero(), -eta.sqrt()))
}

/// Light → microwave amplitude for the parametric (Stokes) process, microwave
/// at ω_a = Ω₀ − Ω.
pub fn s_ml_plus<T: Real>(p: &SystemParams<T>, omega_a: T) -> Result<Complex<T>> {
    Ok(-conversion_kernel(p, omega_a)?)
}

/// Light → microwave amplitude for the beam-splitter process, microwave at
/// ω_b = Ω − Ω₀.
pub fn s_ml_minus<T: Real>(p: &SystemParams<T>, omega_b: T) -> Result<Complex<T>> {
    conversion_kernel(p, omega_b)
}

/// Cooperativity C = 4g² / ((κ_c + κ) γ).
pub fn cooperativity<T: Real>(p: &SystemParams<T>) -> Result<T> {
    if p.gamma == T::zero() {
        return Err(Error::DivisionByZero("cooperativity needs gamma > 0"));
    }
    if p.kappa_total() == T::zero() {
        return Err(Error::DivisionByZero("cooperativity needs kappa + kappa_c > 0"));
    }
    Ok(T::lit(4.0) * p.g * p.g / (p.kappa_total() * p.gamma))
}

/// Photon conversion efficiency expressed through the cooperativity and
/// the normalized detunings x = Δ_c/(κ_c+κ), y = Δ_m/γ.
///
/// `|S⁺_ML|² = P / [(C + 1 - 4xy)² + (2x + 2y)²]` with
/// `P = 4C κ_c ζ / ((κ_c+κ) γ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyForm<T> {
    pub cooperativity: T,
    pub prefactor: T,
    pub kappa_total: T,
    pub gamma: T,
}

impl<T: Real> EfficiencyForm<T> {
    pub fn new(p: &SystemParams<T>) -> Result<Self> {
        let c = cooperativity(p)?;
        let prefactor = T::lit(4.0) * c * p.kappa_c * p.zeta / (p.kappa_total() * p.gamma);
        Ok(Self {
            cooperativity: c,
            prefactor,
            kappa_total: p.kappa_total(),
            gamma: p.gamma,
        })
    }

    /// Denominator of the efficiency in normalized coordinates. Quadratic in
    /// each coordinate separately.
    #[inline]
    pub fn denominator(&self, x: T, y: T) -> T {
        let a = self.cooperativity + T::one() - T::lit(4.0) * x * y;
        let b = T::two() * (x + y);
        a * a + b * b
    }

    #[inline]
    pub fn at_normalized(&self, x: T, y: T) -> T {
        self.prefactor / self.denominator(x, y)
    }

    pub fn normalize(&self, det: Detunings<T>) -> (T, T) {
        (det.delta_c / self.kappa_total, det.delta_m / self.gamma)
    }

    pub fn denormalize(&self, x: T, y: T) -> Detunings<T> {
        Detunings {
            delta_c: x * self.kappa_total,
            delta_m: y * self.gamma,
        }
    }

    pub fn at(&self, det: Detunings<T>) -> T {
        let (x, y) = self.normalize(det);
        self.at_normalized(x, y)
    }

    /// Value on resonance, Δ_c = Δ_m = 0.
    pub fn resonant(&self) -> T {
        let c1 = self.cooperativity + T::one();
        self.prefactor / (c1 * c1)
    }
}

/// Light→microwave photon conversion efficiency |S⁺_ML|² at given detunings.
pub fn efficiency_detuned<T: Real>(p: &SystemParams<T>, det: Detunings<T>) -> Result<T> {
    Ok(EfficiencyForm::new(p)?.at(det))
}

/// Efficiency at Δ_c = Δ_m = 0: `4C κ_cζ/((κ_c+κ)γ) / (C+1)²`.
pub fn resonant_efficiency<T: Real>(p: &SystemParams<T>) -> Result<T> {
    Ok(EfficiencyForm::new(p)?.resonant())
}

/// Lossless normal-mode frequencies `ω̄ ∓ √(g² + δ²)`, lower branch first.
pub fn normal_mode_frequencies<T: Real>(p: &SystemParams<T>) -> (T, T) {
    let mean = (p.omega_c + p.omega_m) * T::half();
    let delta = (p.omega_c - p.omega_m) * T::half();
    let split = p.g.hypot(delta);
    (mean - split, mean + split)
}

/// Complex normal mode: resonance frequency and energy linewidth, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalMode<T> {
    pub frequency: T,
    pub linewidth: T,
}

/// Eigenvalues of the lossy coupled-mode matrix
/// `[[ω_c - i(κ+κ_c)/2, g], [g, ω_m - iγ/2]]`, sorted by frequency.
pub fn lossy_normal_modes<T: Real>(p: &SystemParams<T>) -> [NormalMode<T>; 2] {
    let a = Complex::new(p.omega_c, -p.kappa_total() * T::half());
    let b = Complex::new(p.omega_m, -p.gamma * T::half());
    let mean = (a + b) * T::half();
    let half_diff = (a - b) * T::half();
    let root = (half_diff * half_diff + p.g * p.g).sqrt();
    let mut modes = [mean - root, mean + root].map(|l| NormalMode {
        frequency: l.re,
        linewidth: -T::two() * l.im,
    });
    if modes[0].frequency > modes[1].frequency {
        modes.swap(0, 1);
    }
    modes
}

/// Power transmission |S₂₁(ω)|² through the cavity from a weak auxiliary
/// port coupled at κ₁ to the main port at κ_c.
pub fn s21_cavity<T: Real>(omega_c: T, kappa: T, kappa_c: T, kappa_1: T, omega: T) -> Result<T> {
    if kappa < T::zero() || kappa_c < T::zero() || kappa_1 < T::zero() {
        return Err(Error::param("kappa", "cavity rates must be non-negative"));
    }
    let total = kappa_1 + kappa_c + kappa;
    let d = omega - omega_c;
    let half = total * T::half();
    let den = d * d + half * half;
    if den == T::zero() {
        return Err(Error::DivisionByZero("lossless cavity transmission on resonance"));
    }
    Ok(kappa_1 * kappa_c / den)
}
