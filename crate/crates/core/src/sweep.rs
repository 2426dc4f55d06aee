//! Two-dimensional spectra over probe frequency and coil current.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microscopic::{kittel_freq_from_current, FieldBias};
use crate::model::{efficiency_detuned, s11_hybrid, s_lm, SystemParams};
use crate::scalar::Real;
use crate::units::hz_to_rad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SweepQuantity {
    S11Power,
    S11Complex,
    SlmPower,
    SlmComplex,
    /// Light→microwave efficiency |S⁺_ML|² with the probe at ω.
    Efficiency,
}

impl SweepQuantity {
    pub fn is_complex(self) -> bool {
        matches!(self, SweepQuantity::S11Complex | SweepQuantity::SlmComplex)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SweepQuantity::S11Power => "S11_POWER",
            SweepQuantity::S11Complex => "S11_COMPLEX",
            SweepQuantity::SlmPower => "SLM_POWER",
            SweepQuantity::SlmComplex => "SLM_COMPLEX",
            SweepQuantity::Efficiency => "EFFICIENCY",
        }
    }
}

/// Row-major sweep values, one row per current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepValues<T> {
    Real(Vec<Vec<T>>),
    Complex(Vec<Vec<Complex<T>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid<T> {
    /// Probe frequencies, Hz.
    pub freq_axis: Vec<T>,
    /// Coil currents, A.
    pub current_axis: Vec<T>,
    pub quantity: SweepQuantity,
    pub values: SweepValues<T>,
}

impl<T: Real> SweepGrid<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("freq_axis", &self.freq_axis), ("current_axis", &self.current_axis)] {
            if axis.is_empty() {
                return Err(Error::InvalidInput(format!("{name} is empty")));
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidInput(format!("{name} not strictly increasing")));
            }
        }
        let (rows, cols) = (self.current_axis.len(), self.freq_axis.len());
        let shape_ok = match &self.values {
            SweepValues::Real(v) => v.len() == rows && v.iter().all(|r| r.len() == cols),
            SweepValues::Complex(v) => v.len() == rows && v.iter().all(|r| r.len() == cols),
        };
        if !shape_ok {
            return Err(Error::GridMismatch(format!("values must be {rows} x {cols}")));
        }
        let finite = match &self.values {
            SweepValues::Real(v) => v.iter().flatten().all(|x| x.is_finite()),
            SweepValues::Complex(v) => v.iter().flatten().all(|x| x.re.is_finite() && x.im.is_finite()),
        };
        if !finite {
            return Err(Error::InvalidInput("non-finite sweep value".into()));
        }
        Ok(())
    }

    /// Real-valued row `i`; complex quantities are returned as |value|².
    pub fn power_row(&self, i: usize) -> Vec<T> {
        match &self.values {
            SweepValues::Real(v) => v[i].clone(),
            SweepValues::Complex(v) => v[i].iter().map(|z| z.norm_sqr()).collect(),
        }
    }
}

/// Axes of a sweep. Frequencies in Hz, currents in A; both inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec<T> {
    pub freq_start: T,
    pub freq_stop: T,
    pub freq_points: usize,
    pub current_start: T,
    pub current_stop: T,
    pub current_points: usize,
    pub quantity: SweepQuantity,
    /// Amplification factor applied to S_LM quantities.
    pub eta: T,
}

/// One row of `quantity` on `freq_hz` for fixed parameters.
pub enum Row<T> {
    Real(Vec<T>),
    Complex(Vec<Complex<T>>),
}

pub fn evaluate_row<T: Real>(p: &SystemParams<T>, quantity: SweepQuantity, eta: T, freq_hz: &[T]) -> Result<Row<T>> {
    let omega = freq_hz.iter().map(|&f| hz_to_rad(f));
    match quantity {
        SweepQuantity::S11Complex => omega.map(|w| s11_hybrid(p, w)).collect::<Result<_>>().map(Row::Complex),
        SweepQuantity::SlmComplex => omega.map(|w| s_lm(p, eta, w)).collect::<Result<_>>().map(Row::Complex),
        SweepQuantity::S11Power => omega
            .map(|w| s11_hybrid(p, w).map(|z| z.norm_sqr()))
            .collect::<Result<_>>()
            .map(Row::Real),
        SweepQuantity::SlmPower => omega
            .map(|w| s_lm(p, eta, w).map(|z| z.norm_sqr()))
            .collect::<Result<_>>()
            .map(Row::Real),
        SweepQuantity::Efficiency => omega
            .map(|w| efficiency_detuned(p, p.detunings(w)))
            .collect::<Result<_>>()
            .map(Row::Real),
    }
}

/// Inclusive evenly spaced axis; a single point sits at `start`.
pub fn axis<T: Real>(start: T, stop: T, n: usize) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::param("points", "must be at least 1"));
    }
    if !(start.is_finite() && stop.is_finite()) || (n > 1 && !(stop > start)) {
        return Err(Error::param("axis", "needs finite bounds with stop > start"));
    }
    Ok(crate::fitting::linspace(start, stop, n))
}

/// Evaluates `spec.quantity` on the frequency × current grid, moving the
/// Kittel frequency with the coil current. Rows run in parallel.
pub fn run_sweep<T: Real>(
    p: &SystemParams<T>,
    bias: &FieldBias<T>,
    gamma_e: T,
    spec: &SweepSpec<T>,
) -> Result<SweepGrid<T>> {
    p.validate()?;
    bias.validate()?;
    let freq_axis = axis(spec.freq_start, spec.freq_stop, spec.freq_points)?;
    let current_axis = axis(spec.current_start, spec.current_stop, spec.current_points)?;
    let rows: Vec<Row<T>> = current_axis
        .par_iter()
        .map(|&current| {
            let locate = |e: Error| Error::At {
                current: current.as_f64(),
                freq_hz: match &e {
                    Error::Singular { omega, .. } => omega / std::f64::consts::TAU,
                    _ => f64::NAN,
                },
                source: Box::new(e),
            };
            let mut q = *p;
            q.omega_m = kittel_freq_from_current(bias, gamma_e, current);
            if !(q.omega_m > T::zero()) {
                return Err(locate(Error::param("omega_m", "Kittel frequency must stay positive")));
            }
            evaluate_row(&q, spec.quantity, spec.eta, &freq_axis).map_err(locate)
        })
        .collect::<Result<_>>()?;
    let values = if spec.quantity.is_complex() {
        SweepValues::Complex(
            rows.into_iter()
                .map(|r| match r {
                    Row::Complex(v) => v,
                    Row::Real(_) => unreachable!(),
                })
                .collect(),
        )
    } else {
        SweepValues::Real(
            rows.into_iter()
                .map(|r| match r {
                    Row::Real(v) => v,
                    Row::Complex(_) => unreachable!(),
                })
                .collect(),
        )
    };
    Ok(SweepGrid {
        freq_axis,
        current_axis,
        quantity: spec.quantity,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{local_maxima, local_minima};
    use crate::model::resonant_efficiency;
    use crate::units::rad_to_hz;

    fn setup() -> (SystemParams<f64>, FieldBias<f64>, f64) {
        let p = SystemParams::from_hz(10.45e9, 10.45e9, 3.3e6, 25e6, 1.1e6, 63e6, 0.18e-3).unwrap();
        let gamma_e = hz_to_rad(28e9);
        let bias = FieldBias {
            bias_field: 0.37,
            field_per_current: 0.05,
            reference_current: 0.4,
            reference_kittel_freq: p.omega_c,
        };
        (p, bias, gamma_e)
    }

    fn spec(q: SweepQuantity) -> SweepSpec<f64> {
        SweepSpec {
            freq_start: 10.2e9,
            freq_stop: 10.7e9,
            freq_points: 501,
            current_start: 0.0,
            current_stop: 0.8,
            current_points: 17,
            quantity: q,
            eta: 1.0,
        }
    }

    #[test]
    fn anticrossing_topology() {
        let (p, bias, ge) = setup();
        let grid = run_sweep(&p, &bias, ge, &spec(SweepQuantity::S11Power)).unwrap();
        grid.validate().unwrap();
        let row = grid.power_row(8);
        assert_eq!(grid.current_axis[8], 0.4);
        let mut m = local_minima(&row);
        m.truncate(2);
        m.sort();
        let split = grid.freq_axis[m[1]] - grid.freq_axis[m[0]];
        assert!((split / rad_to_hz(2.0 * p.g) - 1.0).abs() < 0.05, "{split}");
        // far from degeneracy the cavity dip sits near ω_c
        let far = grid.power_row(0);
        let i = local_minima(&far)[0];
        assert!((grid.freq_axis[i] - 10.45e9).abs() < 20e6);
    }

    #[test]
    fn slm_peaks_at_s11_dips() {
        let (p, bias, ge) = setup();
        let s = run_sweep(&p, &bias, ge, &spec(SweepQuantity::S11Power)).unwrap();
        let l = run_sweep(&p, &bias, ge, &spec(SweepQuantity::SlmPower)).unwrap();
        for r in 0..s.current_axis.len() {
            let mut dips = local_minima(&s.power_row(r));
            dips.truncate(2);
            dips.sort();
            let mut peaks = local_maxima(&l.power_row(r));
            peaks.truncate(2);
            peaks.sort();
            assert_eq!(dips.len(), peaks.len());
            for (a, b) in dips.iter().zip(&peaks) {
                assert!(a.abs_diff(*b) <= 1, "row {r}: {a} {b}");
            }
        }
    }

    #[test]
    fn efficiency_on_upper_branch_beats_resonance() {
        let (p, bias, ge) = setup();
        // Δ_c = 320 MHz, Δ_m = 12 MHz
        let wm = p.omega_c + hz_to_rad(308e6);
        let current = bias.current_for(wm, ge);
        let s = SweepSpec {
            freq_start: 10.45e9 + 320e6,
            freq_stop: 10.45e9 + 321e6,
            freq_points: 2,
            current_start: current,
            current_stop: current + 1e-6,
            current_points: 2,
            quantity: SweepQuantity::Efficiency,
            eta: 1.0,
        };
        let g = run_sweep(&p, &bias, ge, &s).unwrap();
        let e = g.power_row(0)[0];
        assert!(e / resonant_efficiency(&p).unwrap() > 100.0);
    }

    #[test]
    fn rows_match_direct_evaluation() {
        let (p, bias, ge) = setup();
        let grid = run_sweep(&p, &bias, ge, &spec(SweepQuantity::S11Complex)).unwrap();
        let SweepValues::Complex(v) = &grid.values else {
            panic!()
        };
        let mut q = p;
        q.omega_m = kittel_freq_from_current(&bias, ge, grid.current_axis[3]);
        for (j, &f) in grid.freq_axis.iter().enumerate().step_by(97) {
            assert_eq!(v[3][j], s11_hybrid(&q, hz_to_rad(f)).unwrap());
        }
    }

    #[test]
    fn negative_kittel_frequency_located() {
        let (p, mut bias, ge) = setup();
        bias.field_per_current = 10.0;
        let err = run_sweep(&p, &bias, ge, &spec(SweepQuantity::S11Power)).unwrap_err();
        assert!(matches!(err, Error::At { current, .. } if current == 0.0));
        assert!(!err.is_numerical());
    }
}
