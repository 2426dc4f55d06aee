//! Shot-noise-referenced extraction of the Faraday coupling and ζ, and
//! transfer-function calibration of the microwave detection chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microscopic::{zeta_from_coupling_constant, MaterialGeometry, OpticalDriveParams};
use crate::model::s21_cavity;
use crate::scalar::Real;
use crate::units::Constants;

/// Largest relative mismatch between γ and γ_c accepted as critical coupling.
pub const CRITICAL_COUPLING_TOL: f64 = 0.1;

/// Bins with |S₂₁|² at or below this are excluded from transfer-function
/// extraction.
pub const S21_THRESHOLD: f64 = 1e-8;

/// One shot-noise-limited Faraday measurement of coil-driven magnons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseRun<T> {
    /// Microwave power driving the coil, W.
    pub microwave_power: T,
    /// Probe photon flux |β|², s⁻¹.
    pub probe_photon_flux: T,
    /// Spectrum-analyzer resolution bandwidth Δω, rad/s.
    pub resolution_bandwidth: T,
    /// Coil–Kittel coupling γ_c, rad/s.
    pub coil_coupling: T,
    /// Kittel frequency ω_m, rad/s.
    pub magnon_freq: T,
    /// Measured signal-to-shot-noise ratio (linear).
    pub measured_snr: T,
    /// Electronic noise PSD already removed from the measurement, W/Hz.
    pub electronic_noise_psd: Option<T>,
}

impl<T: Real> ShotNoiseRun<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("microwave_power", self.microwave_power),
            ("probe_photon_flux", self.probe_photon_flux),
            ("resolution_bandwidth", self.resolution_bandwidth),
            ("coil_coupling", self.coil_coupling),
            ("magnon_freq", self.magnon_freq),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::param(name, "must be finite and strictly positive"));
            }
        }
        if !(self.measured_snr > T::zero()) || !self.measured_snr.is_finite() {
            return Err(Error::param("measured_snr", "must be finite and strictly positive"));
        }
        Ok(())
    }
}

/// Coherent magnon number weight P_i / (ħ ω_m γ_c) of the δ-line at ω_m,
/// valid for resonant drive at critical coupling.
///
/// `gamma` is the intrinsic Kittel damping; the formula is refused when it
/// differs from `gamma_c` by more than 10%.
pub fn magnon_spectral_density<T: Real>(
    microwave_power: T,
    omega_m: T,
    gamma_c: T,
    gamma: T,
    c: &Constants<T>,
) -> Result<T> {
    if !(gamma_c > T::zero()) {
        return Err(Error::param("gamma_c", "must be strictly positive"));
    }
    if (gamma - gamma_c).abs() > T::lit(CRITICAL_COUPLING_TOL) * gamma_c {
        return Err(Error::Precondition(format!(
            "magnon number density requires critical coupling; gamma = {gamma:e}, gamma_c = {gamma_c:e}"
        )));
    }
    Ok(microwave_power / (c.hbar * omega_m * gamma_c))
}

/// SNR = G² l² |β|² n P_i / (8 V_s ħ ω_m γ_c Δω).
pub fn predict_snr<T: Real>(
    coupling_constant: T,
    geom: &MaterialGeometry<T>,
    run: &ShotNoiseRun<T>,
    c: &Constants<T>,
) -> T {
    coupling_constant * coupling_constant * snr_per_coupling_sq(geom, run, c)
}

fn snr_per_coupling_sq<T: Real>(geom: &MaterialGeometry<T>, run: &ShotNoiseRun<T>, c: &Constants<T>) -> T {
    let l = geom.sample_length;
    l * l * run.probe_photon_flux * geom.spin_density * run.microwave_power
        / (T::lit(8.0) * geom.sample_volume * c.hbar * run.magnon_freq * run.coil_coupling * run.resolution_bandwidth)
}

/// Result of a shot-noise calibration with a full echo of its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseCalibration<T> {
    /// Faraday coupling constant G, m².
    pub coupling_constant: T,
    /// Magnon–light rate ζ at the supplied drive, rad/s.
    pub zeta: T,
    pub run: ShotNoiseRun<T>,
    pub geometry: MaterialGeometry<T>,
    pub drive: OpticalDriveParams<T>,
}

impl<T: Real> ShotNoiseCalibration<T> {
    /// ζ divided by a reference value (e.g. a literature number).
    pub fn discrepancy_ratio(&self, reference_zeta: T) -> T {
        self.zeta / reference_zeta
    }
}

/// Inverts the SNR relation for G, then evaluates ζ for `drive`.
pub fn snr_to_zeta<T: Real>(
    run: &ShotNoiseRun<T>,
    geom: &MaterialGeometry<T>,
    drive: &OpticalDriveParams<T>,
    c: &Constants<T>,
) -> Result<ShotNoiseCalibration<T>> {
    if !(run.measured_snr > T::zero()) {
        return Err(Error::param("measured_snr", "must be strictly positive"));
    }
    run.validate()?;
    geom.validate()?;
    let g = (run.measured_snr / snr_per_coupling_sq(geom, run, c)).sqrt();
    let zeta = zeta_from_coupling_constant(g, geom, drive, c);
    Ok(ShotNoiseCalibration {
        coupling_constant: g,
        zeta,
        run: *run,
        geometry: *geom,
        drive: *drive,
    })
}

/// Shot-noise-normalized photodetector spectrum S_VV(ω)Δω on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageSpectrum<T> {
    /// Angular frequency of each bin, rad/s.
    pub omega: Vec<T>,
    /// Power within each resolution bandwidth.
    pub power: Vec<T>,
    /// Index of the bin holding the magnon line.
    pub signal_bin: usize,
    /// Shot-noise floor |β|²Δω/2.
    pub floor: T,
}

impl<T: Real> VoltageSpectrum<T> {
    /// Signal-to-floor ratio of the magnon bin.
    pub fn snr(&self) -> T {
        (self.power[self.signal_bin] - self.floor) / self.floor
    }
}

/// Builds the Faraday-signal spectrum: a flat shot-noise floor |β|²Δω/2
/// plus the coherent magnon line `G²l²|β|⁴ N P_i / (16 V_s² ħ ω_m γ_c)`
/// concentrated in the single bin nearest ω_m. The probe flux is the
/// drive's photon flux.
#[allow(clippy::too_many_arguments)]
pub fn svv_spectrum<T: Real>(
    coupling_constant: T,
    geom: &MaterialGeometry<T>,
    drive: &OpticalDriveParams<T>,
    microwave_power: T,
    omega_m: T,
    gamma_c: T,
    resolution_bandwidth: T,
    omega_grid: &[T],
    c: &Constants<T>,
) -> Result<VoltageSpectrum<T>> {
    if omega_grid.is_empty() {
        return Err(Error::InvalidInput("empty frequency grid".into()));
    }
    let (signal_bin, nearest) = omega_grid
        .iter()
        .enumerate()
        .map(|(i, &w)| (i, (w - omega_m).abs()))
        .fold((0, T::infinity()), |acc, x| if x.1 < acc.1 { x } else { acc });
    if nearest > resolution_bandwidth * T::half() {
        return Err(Error::Precondition(format!(
            "grid has no bin within half a resolution bandwidth of omega_m = {omega_m:e} rad/s"
        )));
    }
    let beta2 = drive.photon_flux(c.hbar);
    let floor = beta2 * resolution_bandwidth * T::half();
    let n_spins = geom.spin_count();
    let l = geom.sample_length;
    let g = coupling_constant;
    let signal = g * g * l * l * beta2 * beta2 * n_spins * microwave_power
        / (T::lit(16.0) * geom.sample_volume * geom.sample_volume * c.hbar * omega_m * gamma_c);
    let mut power = vec![floor; omega_grid.len()];
    power[signal_bin] = floor + signal;
    Ok(VoltageSpectrum {
        omega: omega_grid.to_vec(),
        power,
        signal_bin,
        floor,
    })
}

/// Bin-wise difference with clamp-and-flag for over-subtraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSubtraction<T> {
    pub psd: Vec<T>,
    /// Bins clamped to zero because the electronic noise was not below the total.
    pub clamped: Vec<usize>,
}

pub fn subtract_electronic_noise<T: Real>(total: &[T], electronic: &[T]) -> Result<NoiseSubtraction<T>> {
    if total.len() != electronic.len() {
        return Err(Error::GridMismatch(format!(
            "total spectrum has {} bins, electronic noise has {}",
            total.len(),
            electronic.len()
        )));
    }
    let mut clamped = Vec::new();
    let psd = total
        .iter()
        .zip(electronic)
        .enumerate()
        .map(|(i, (&t, &e))| {
            let d = t - e;
            if d > T::zero() {
                d
            } else {
                // equal values flag as well: nothing above the electronic floor
                clamped.push(i);
                T::zero()
            }
        })
        .collect();
    Ok(NoiseSubtraction { psd, clamped })
}

/// Signal-to-floor ratio of a measured spectrum: the floor is the median of
/// all bins except `signal_bin`.
pub fn spectrum_snr<T: Real>(psd: &[T], signal_bin: usize) -> Result<T> {
    if signal_bin >= psd.len() || psd.len() < 2 {
        return Err(Error::InvalidInput("signal bin outside spectrum".into()));
    }
    let mut rest: Vec<T> = psd
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != signal_bin)
        .map(|(_, &v)| v)
        .collect();
    rest.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = rest.len();
    let floor = if m % 2 == 1 {
        rest[m / 2]
    } else {
        (rest[m / 2 - 1] + rest[m / 2]) * T::half()
    };
    if !(floor > T::zero()) {
        return Err(Error::DivisionByZero("spectrum floor is zero"));
    }
    Ok((psd[signal_bin] - floor) / floor)
}

/// Cavity parameters needed to predict the calibration-tone transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityPorts<T> {
    pub omega_c: T,
    pub kappa: T,
    pub kappa_c: T,
    /// Auxiliary (antenna-pin) port coupling κ₁.
    pub kappa_1: T,
}

/// Calibration-tone sweep through the auxiliary port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCalibration<T> {
    /// Tone angular frequencies, strictly increasing, rad/s.
    pub omega: Vec<T>,
    /// Tone power delivered to the auxiliary port per bin, W.
    pub tone_power_in: Vec<T>,
    /// Power read at the spectrum analyzer per bin, W.
    pub measured_power: Vec<T>,
    pub cavity: CavityPorts<T>,
}

impl<T: Real> ChainCalibration<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.omega.len();
        if self.tone_power_in.len() != n || self.measured_power.len() != n {
            return Err(Error::GridMismatch(format!(
                "frequency, tone and measured arrays differ in length ({n}, {}, {})",
                self.tone_power_in.len(),
                self.measured_power.len()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidInput("empty calibration sweep".into()));
        }
        if self.omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "calibration bins must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Per-bin chain transfer function T_a(ω).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction<T> {
    pub omega: Vec<T>,
    /// `None` where the bin was excluded.
    pub t_a: Vec<Option<T>>,
    /// Bins whose |S₂₁|² fell at or below the threshold.
    pub excluded: Vec<usize>,
}

impl<T: Real> TransferFunction<T> {
    /// Refers a power measured at the analyzer back to the cavity output.
    pub fn refer_to_cavity(&self, bin: usize, measured_power: T) -> Option<T> {
        self.t_a.get(bin).copied().flatten().map(|t| measured_power / t)
    }
}

/// T_a(ω) = P_m / (|S₂₁|² P_i) on every bin with |S₂₁|² above
/// [`S21_THRESHOLD`]. Bins with a non-positive result are excluded too.
pub fn extract_transfer_function<T: Real>(cal: &ChainCalibration<T>) -> Result<TransferFunction<T>> {
    cal.validate()?;
    let cav = cal.cavity;
    let mut excluded = Vec::new();
    let mut t_a = Vec::with_capacity(cal.omega.len());
    for (i, &w) in cal.omega.iter().enumerate() {
        let s21 = s21_cavity(cav.omega_c, cav.kappa, cav.kappa_c, cav.kappa_1, w)?;
        let p_in = cal.tone_power_in[i];
        if !(s21 > T::lit(S21_THRESHOLD)) || !(p_in > T::zero()) {
            excluded.push(i);
            t_a.push(None);
            continue;
        }
        let t = cal.measured_power[i] / (s21 * p_in);
        if t > T::zero() && t.is_finite() {
            t_a.push(Some(t));
        } else {
            excluded.push(i);
            t_a.push(None);
        }
    }
    Ok(TransferFunction {
        omega: cal.omega.clone(),
        t_a,
        excluded,
    })
}

/// Photon-number conversion efficiency from powers:
/// `(P_mw / ħω_a) / (P_opt / ħΩ)`, both integrated over the same bandwidth.
/// The microwave power must already be referred to the cavity output.
pub fn efficiency_from_powers<T: Real>(
    optical_power_in: T,
    optical_freq: T,
    microwave_power_out: T,
    microwave_freq: T,
    bandwidth: T,
    c: &Constants<T>,
) -> Result<T> {
    for (name, v) in [
        ("optical_power_in", optical_power_in),
        ("optical_freq", optical_freq),
        ("microwave_freq", microwave_freq),
        ("bandwidth", bandwidth),
    ] {
        if !(v > T::zero()) {
            return Err(Error::param(name, "must be strictly positive"));
        }
    }
    if !(microwave_power_out >= T::zero()) {
        return Err(Error::param("microwave_power_out", "must be non-negative"));
    }
    let mw_flux = microwave_power_out / (c.hbar * microwave_freq);
    let opt_flux = optical_power_in / (c.hbar * optical_freq);
    Ok(mw_flux / opt_flux)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microscopic::sphere_volume;
    use crate::units::{db_to_linear, dbm_to_watt, hz_to_rad, rad_to_hz};

    fn geom() -> MaterialGeometry<f64> {
        MaterialGeometry {
            spin_density: 2.1e28,
            verdet: 380.0,
            sample_length: 0.75e-3,
            sample_volume: sphere_volume(0.38e-3),
            cavity_volume: 21e-3 * 19e-3 * 3e-3,
            gilbert_alpha: 5.3e-5,
            gyromagnetic_ratio: hz_to_rad(28e9),
            bare_kittel_freq: hz_to_rad(9.5e9),
        }
    }

    fn run() -> ShotNoiseRun<f64> {
        ShotNoiseRun {
            microwave_power: dbm_to_watt(-41.0),
            probe_photon_flux: 1.2e17,
            resolution_bandwidth: hz_to_rad(100.0),
            coil_coupling: hz_to_rad(1.5e6),
            magnon_freq: hz_to_rad(9.5e9),
            measured_snr: db_to_linear(36.8),
            electronic_noise_psd: None,
        }
    }

    fn drive() -> OpticalDriveParams<f64> {
        OpticalDriveParams::new(0.015, hz_to_rad(200e12)).unwrap()
    }

    #[test]
    fn spectral_density_values() {
        let c = Constants::default();
        let (wm, gc) = (hz_to_rad(9.5e9), hz_to_rad(1.5e6));
        let w: f64 = magnon_spectral_density(dbm_to_watt(-41.0), wm, gc, gc, &c).unwrap();
        assert!((w - 1.34e9).abs() / 1.34e9 < 0.01, "{w:e}");
        assert_eq!(magnon_spectral_density(0.0, wm, gc, gc, &c).unwrap(), 0.0);
        let w2 = magnon_spectral_density(2.0 * dbm_to_watt(-41.0), wm, gc, gc, &c).unwrap();
        assert!((w2 / w - 2.0).abs() < 1e-14);
        assert!(matches!(
            magnon_spectral_density(1e-8, wm, gc, 1.2 * gc, &c),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn snr_scaling() {
        let c = Constants::default();
        assert_eq!(predict_snr(0.0, &geom(), &run(), &c), 0.0);
        let a = predict_snr(5e-26, &geom(), &run(), &c);
        let b = predict_snr(1e-25, &geom(), &run(), &c);
        assert!((b / a - 4.0).abs() < 1e-12);
    }

    #[test]
    fn snr_to_zeta_round_trip_and_scaling() {
        let c = Constants::default();
        let g0 = 7.2e-26;
        let mut r = run();
        r.measured_snr = predict_snr(g0, &geom(), &r, &c);
        let cal = snr_to_zeta(&r, &geom(), &drive(), &c).unwrap();
        let want = zeta_from_coupling_constant(g0, &geom(), &drive(), &c);
        assert!((cal.zeta - want).abs() / want < 1e-10);
        assert!((cal.coupling_constant - g0).abs() / g0 < 1e-10);

        let mut r2 = r;
        r2.measured_snr *= 2.0;
        let cal2 = snr_to_zeta(&r2, &geom(), &drive(), &c).unwrap();
        assert!((cal2.zeta / cal.zeta - 2.0).abs() < 1e-12);

        r2.measured_snr = 0.0;
        assert!(snr_to_zeta(&r2, &geom(), &drive(), &c).is_err());
    }

    #[test]
    fn appendix_inputs_give_zeta_in_band() {
        let c = Constants::default();
        let cal = snr_to_zeta(&run(), &geom(), &drive(), &c).unwrap();
        let z = rad_to_hz(cal.zeta);
        assert!(z > 0.12e-3 && z < 0.50e-3, "{z:e}");
        let ratio = cal.discrepancy_ratio(hz_to_rad(0.25e-3));
        assert!(ratio > 0.5 && ratio < 2.0);
    }

    #[test]
    fn svv_peak_over_floor_is_snr() {
        let c = Constants::default();
        let wm = hz_to_rad(9.5e9);
        let grid: Vec<f64> = (-50..=50).map(|k| wm + hz_to_rad(100.0) * k as f64).collect();
        let d = drive();
        let mut r = run();
        r.probe_photon_flux = d.photon_flux(c.hbar);
        let spec = svv_spectrum(
            7.2e-26,
            &geom(),
            &d,
            r.microwave_power,
            wm,
            r.coil_coupling,
            r.resolution_bandwidth,
            &grid,
            &c,
        )
        .unwrap();
        let want = predict_snr(7.2e-26, &geom(), &r, &c);
        assert!((spec.snr() - want).abs() / want < 1e-12);
        assert_eq!(spec.signal_bin, 50);
        let off: Vec<f64> = spec
            .power
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != 50)
            .map(|(_, &v)| v)
            .collect();
        let (mx, mn) = off.iter().fold((f64::MIN, f64::MAX), |(a, b), &v| (a.max(v), b.min(v)));
        assert_eq!(mx / mn, 1.0);

        let flat = svv_spectrum(
            0.0,
            &geom(),
            &d,
            r.microwave_power,
            wm,
            r.coil_coupling,
            r.resolution_bandwidth,
            &grid,
            &c,
        )
        .unwrap();
        assert!(flat.power.iter().all(|&v| v == flat.floor));

        let d2 = OpticalDriveParams::new(0.030, d.carrier_angular_freq).unwrap();
        let s2 = svv_spectrum(
            7.2e-26,
            &geom(),
            &d2,
            r.microwave_power,
            wm,
            r.coil_coupling,
            r.resolution_bandwidth,
            &grid,
            &c,
        )
        .unwrap();
        assert!((s2.floor / spec.floor - 2.0).abs() < 1e-12);

        let far: Vec<f64> = grid.iter().map(|w| w + 1e9).collect();
        assert!(svv_spectrum(
            7.2e-26,
            &geom(),
            &d,
            r.microwave_power,
            wm,
            r.coil_coupling,
            r.resolution_bandwidth,
            &far,
            &c
        )
        .is_err());
    }

    #[test]
    fn electronic_noise_subtraction() {
        let total = vec![2.0, 2.0, 12.0, 2.0, 2.0];
        let id = subtract_electronic_noise(&total, &[0.0; 5]).unwrap();
        assert_eq!(id.psd, total);
        assert!(id.clamped.is_empty());

        let same = subtract_electronic_noise(&total, &total).unwrap();
        assert!(same.psd.iter().all(|&v| v == 0.0));
        assert_eq!(same.clamped, vec![0, 1, 2, 3, 4]);

        let before = spectrum_snr(&total, 2).unwrap();
        let sub = subtract_electronic_noise(&total, &[1.0; 5]).unwrap();
        let after = spectrum_snr(&sub.psd, 2).unwrap();
        assert_eq!(before, 5.0);
        assert_eq!(after, 10.0);

        assert!(matches!(
            subtract_electronic_noise(&total, &[1.0; 4]),
            Err(Error::GridMismatch(_))
        ));
    }

    fn cavity() -> CavityPorts<f64> {
        CavityPorts {
            omega_c: hz_to_rad(10.45e9),
            kappa: hz_to_rad(3.3e6),
            kappa_c: hz_to_rad(25e6),
            kappa_1: hz_to_rad(42e3),
        }
    }

    #[test]
    fn transfer_function_round_trip() {
        let cav = cavity();
        let omega: Vec<f64> = (0..201)
            .map(|k| cav.omega_c + hz_to_rad(1e6) * (k as f64 - 100.0))
            .collect();
        let truth: Vec<f64> = (0..201).map(|k| 1e5 * (1.0 + 0.3 * (k as f64 * 0.1).sin())).collect();
        let p_in = vec![1e-6; 201];
        let p_m: Vec<f64> = omega
            .iter()
            .zip(&truth)
            .map(|(&w, &t)| t * s21_cavity(cav.omega_c, cav.kappa, cav.kappa_c, cav.kappa_1, w).unwrap() * 1e-6)
            .collect();
        let cal = ChainCalibration {
            omega: omega.clone(),
            tone_power_in: p_in.clone(),
            measured_power: p_m.clone(),
            cavity: cav,
        };
        let tf = extract_transfer_function(&cal).unwrap();
        assert!(tf.excluded.is_empty());
        for (got, want) in tf.t_a.iter().zip(&truth) {
            assert!((got.unwrap() - want).abs() / want < 1e-12);
        }
        let doubled = ChainCalibration {
            omega,
            tone_power_in: p_in.iter().map(|p| 2.0 * p).collect(),
            measured_power: p_m.iter().map(|p| 2.0 * p).collect(),
            cavity: cav,
        };
        let tf2 = extract_transfer_function(&doubled).unwrap();
        for (a, b) in tf.t_a.iter().zip(&tf2.t_a) {
            assert!((a.unwrap() - b.unwrap()).abs() / a.unwrap() < 1e-14);
        }
    }

    #[test]
    fn transfer_function_excludes_dark_bins() {
        let mut cav = cavity();
        cav.kappa_1 = hz_to_rad(1.0);
        let omega = vec![cav.omega_c - 1e9, cav.omega_c, cav.omega_c + 1e9];
        let cal = ChainCalibration {
            omega,
            tone_power_in: vec![1.0; 3],
            measured_power: vec![1.0; 3],
            cavity: cav,
        };
        let tf = extract_transfer_function(&cal).unwrap();
        assert_eq!(tf.excluded, vec![0, 2]);
        assert!(tf.t_a[1].is_some());

        let bad = ChainCalibration {
            omega: vec![2.0, 1.0],
            tone_power_in: vec![1.0; 2],
            measured_power: vec![1.0; 2],
            cavity: cav,
        };
        assert!(extract_transfer_function(&bad).is_err());
    }

    #[test]
    fn photon_efficiency() {
        let c = Constants::default();
        let (om, wa) = (hz_to_rad(200e12), hz_to_rad(10.8e9));
        let p_opt: f64 = 0.015;
        let p_mw = p_opt * wa / om;
        assert!((efficiency_from_powers(p_opt, om, p_mw, wa, hz_to_rad(10.0), &c).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(efficiency_from_powers(p_opt, om, 0.0, wa, 1.0, &c).unwrap(), 0.0);
        // 1e-10 photon efficiency at 15 mW and 200 THz corresponds to ~8.1e-17 W at 10.8 GHz.
        let p = 1e-10 * p_opt * wa / om;
        assert!((p - 8.1e-17).abs() / 8.1e-17 < 0.01);
        assert!((efficiency_from_powers(p_opt, om, p, wa, 1.0, &c).unwrap() - 1e-10).abs() < 1e-22);
    }
}
