//! Parameter recovery from complex spectra and synthetic trace generation.
//!
//! Residuals are the real and imaginary parts of `model - data`, so phase
//! wrapping near deep dips never enters the cost.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{dip_width, local_maxima, local_minima};
use crate::lsq::{self, fd_step, psd_pseudo_inverse, LeastSquaresProblem, LsqConfig};
use crate::model::{s11_coil, s11_hybrid, s_lm, SystemParams};
use crate::scalar::Real;
use crate::units::{hz_to_rad, rad_to_hz};

/// Minimum number of samples in a trace.
pub const MIN_TRACE_LEN: usize = 8;

/// Absolute finite-difference floor for rates, rad/s.
pub const RATE_FD_FLOOR: f64 = 1e-3;
/// Difference step for center frequencies and linewidths, as a fraction of
/// the narrowest feature in the trace.
pub const CENTER_FD_REL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TraceKind {
    S11Hybrid,
    S11Coil,
    SLm,
    PowerOnly,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::S11Hybrid => "S11_HYBRID",
            TraceKind::S11Coil => "S11_COIL",
            TraceKind::SLm => "S_LM",
            TraceKind::PowerOnly => "POWER_ONLY",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TraceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "S11_HYBRID" => Ok(TraceKind::S11Hybrid),
            "S11_COIL" => Ok(TraceKind::S11Coil),
            "S_LM" | "SLM" => Ok(TraceKind::SLm),
            "POWER_ONLY" => Ok(TraceKind::PowerOnly),
            other => Err(Error::InvalidInput(format!("unknown trace kind `{other}`"))),
        }
    }
}

/// Sampled complex spectrum. Frequencies are in Hz; power-only traces keep
/// the power in the real part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace<T> {
    pub freq: Vec<T>,
    pub value: Vec<Complex<T>>,
    pub kind: TraceKind,
    pub meta: BTreeMap<String, String>,
}

impl<T: Real> SpectrumTrace<T> {
    pub fn new(freq: Vec<T>, value: Vec<Complex<T>>, kind: TraceKind) -> Result<Self> {
        let t = Self {
            freq,
            value,
            kind,
            meta: BTreeMap::new(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freq.len() != self.value.len() {
            return Err(Error::GridMismatch(format!(
                "{} frequencies but {} values",
                self.freq.len(),
                self.value.len()
            )));
        }
        if self.freq.len() < MIN_TRACE_LEN {
            return Err(Error::InvalidInput(format!(
                "trace needs at least {MIN_TRACE_LEN} samples, got {}",
                self.freq.len()
            )));
        }
        if let Some(i) = self.freq.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!(
                "frequencies not strictly increasing at sample {}",
                i + 1
            )));
        }
        if let Some(i) = self
            .value
            .iter()
            .zip(&self.freq)
            .position(|(v, f)| !(v.re.is_finite() && v.im.is_finite() && f.is_finite()))
        {
            return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    pub fn omega(&self) -> Vec<T> {
        self.freq.iter().map(|&f| hz_to_rad(f)).collect()
    }

    fn magnitude(&self) -> Vec<T> {
        self.value.iter().map(|v| v.norm()).collect()
    }
}

/// Response models that can generate or be fitted to a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SignalModel<T> {
    /// Hybrid-cavity reflection S₁₁.
    Hybrid(SystemParams<T>),
    /// Microwave→light coefficient `e^{iφ} S_LM(ω; η)`.
    Conversion { params: SystemParams<T>, eta: T, phase: T },
    /// Bare Kittel mode seen through a coupling coil.
    Coil { omega_m: T, gamma: T, gamma_c: T },
    /// |value|² of the inner model, stored in the real part.
    Power(Box<SignalModel<T>>),
}

impl<T: Real> SignalModel<T> {
    pub fn kind(&self) -> TraceKind {
        match self {
            SignalModel::Hybrid(_) => TraceKind::S11Hybrid,
            SignalModel::Conversion { .. } => TraceKind::SLm,
            SignalModel::Coil { .. } => TraceKind::S11Coil,
            SignalModel::Power(_) => TraceKind::PowerOnly,
        }
    }

    pub fn evaluate(&self, omega: T) -> Result<Complex<T>> {
        match self {
            SignalModel::Hybrid(p) => s11_hybrid(p, omega),
            SignalModel::Conversion { params, eta, phase } => {
                Ok(s_lm(params, *eta, omega)? * Complex::from_polar(T::one(), *phase))
            }
            SignalModel::Coil {
                omega_m,
                gamma,
                gamma_c,
            } => s11_coil(*omega_m, *gamma, *gamma_c, omega),
            SignalModel::Power(inner) => Ok(Complex::new(inner.evaluate(omega)?.norm_sqr(), T::zero())),
        }
    }

    pub fn params(&self) -> Option<&SystemParams<T>> {
        match self {
            SignalModel::Hybrid(p) => Some(p),
            SignalModel::Conversion { params, .. } => Some(params),
            SignalModel::Coil { .. } => None,
            SignalModel::Power(inner) => inner.params(),
        }
    }
}

/// Samples `model` on `freq_hz` and adds independent Gaussian noise of
/// standard deviation `noise_sigma` to each quadrature (power-only traces:
/// to the power). Deterministic for a given seed.
pub fn synthesize_trace<T: Real>(
    model: &SignalModel<T>,
    freq_hz: &[T],
    noise_sigma: T,
    seed: u64,
) -> Result<SpectrumTrace<T>> {
    if !(noise_sigma >= T::zero()) {
        return Err(Error::param("noise_sigma", "must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = model.kind();
    let mut value = Vec::with_capacity(freq_hz.len());
    for &f in freq_hz {
        let mut v = model.evaluate(hz_to_rad(f))?;
        if noise_sigma > T::zero() {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            v.re = v.re + noise_sigma * T::lit(a);
            if kind != TraceKind::PowerOnly {
                v.im = v.im + noise_sigma * T::lit(b);
            }
        }
        value.push(v);
    }
    let mut trace = SpectrumTrace::new(freq_hz.to_vec(), value, kind)?;
    trace.meta.insert("source".into(), "synthetic".into());
    trace.meta.insert("seed".into(), seed.to_string());
    trace.meta.insert("noise_sigma".into(), format!("{noise_sigma:e}"));
    Ok(trace)
}

/// Evenly spaced grid of `n` points from `start` to `stop` inclusive.
pub fn linspace<T: Real>(start: T, stop: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / T::from_usize(n - 1).unwrap();
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        stop
                    } else {
                        start + step * T::from_usize(i).unwrap()
                    }
                })
                .collect()
        }
    }
}

/// Names of every fittable quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    OmegaC,
    OmegaM,
    Kappa,
    KappaC,
    Gamma,
    G,
    /// Composite ηζ of conversion fits.
    EtaZeta,
    /// Global phase nuisance of conversion fits.
    Phase,
    /// Coil coupling γ_c.
    GammaC,
}

impl FitParam {
    pub fn name(self) -> &'static str {
        match self {
            FitParam::OmegaC => "omega_c",
            FitParam::OmegaM => "omega_m",
            FitParam::Kappa => "kappa",
            FitParam::KappaC => "kappa_c",
            FitParam::Gamma => "gamma",
            FitParam::G => "g",
            FitParam::EtaZeta => "eta_zeta",
            FitParam::Phase => "phase",
            FitParam::GammaC => "gamma_c",
        }
    }

    /// True for quantities in rad/s (reported in Hz at the boundary).
    pub fn is_angular(self) -> bool {
        !matches!(self, FitParam::Phase)
    }

    fn is_rate(self) -> bool {
        matches!(
            self,
            FitParam::Kappa | FitParam::KappaC | FitParam::Gamma | FitParam::G | FitParam::GammaC | FitParam::EtaZeta
        )
    }
}

impl std::str::FromStr for FitParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "omega_c" => FitParam::OmegaC,
            "omega_m" => FitParam::OmegaM,
            "kappa" => FitParam::Kappa,
            "kappa_c" => FitParam::KappaC,
            "gamma" => FitParam::Gamma,
            "g" => FitParam::G,
            "eta_zeta" => FitParam::EtaZeta,
            "phase" => FitParam::Phase,
            "gamma_c" => FitParam::GammaC,
            other => return Err(Error::InvalidInput(format!("unknown fit parameter `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingRegime {
    Under,
    Critical,
    Over,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// Iteration limit reached; the result is the best point seen.
    NotConverged,
    /// Cavity and magnon labels cannot be told apart from a single trace.
    AmbiguousModeLabels,
    /// The data carry no information on this parameter.
    Unidentifiable(FitParam),
    /// Initial resonances lay outside the trace and were re-seeded from its dips.
    Reseeded,
}

/// Outcome of a spectrum fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub kind: TraceKind,
    /// Fitted model; evaluating it reproduces the best-fit curve.
    pub model: SignalModel<T>,
    /// Composite ηζ (conversion fits only), rad/s.
    pub eta_zeta: Option<T>,
    /// Coupling regime (coil fits only).
    pub regime: Option<CouplingRegime>,
    /// Free parameters, in covariance order.
    pub names: Vec<FitParam>,
    /// Fitted values in internal units (rad/s, rad).
    pub values: Vec<T>,
    pub covariance: Vec<Vec<T>>,
    /// √Σ|model − data|².
    pub residual_norm: T,
    pub converged: bool,
    pub iterations: usize,
    pub flags: Vec<FitFlag>,
}

impl<T: Real> FitResult<T> {
    pub fn params(&self) -> Option<&SystemParams<T>> {
        self.model.params()
    }

    pub fn value(&self, p: FitParam) -> Option<T> {
        self.names.iter().position(|&n| n == p).map(|i| self.values[i])
    }

    pub fn std_err(&self, p: FitParam) -> Option<T> {
        self.names
            .iter()
            .position(|&n| n == p)
            .map(|i| self.covariance[i][i].max(T::zero()).sqrt())
    }

    /// Value converted for output: Hz for angular quantities, rad for the phase.
    pub fn boundary_value(&self, p: FitParam) -> Option<T> {
        self.value(p).map(|v| if p.is_angular() { rad_to_hz(v) } else { v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    pub lsq: LsqConfig<T>,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            lsq: LsqConfig::default(),
        }
    }
}

/// Full parameter state shared by all fit kinds.
#[derive(Debug, Clone, Copy)]
struct State<T> {
    sys: SystemParams<T>,
    /// √(ηζ)
    amp: T,
    phase: T,
    gamma_c: T,
}

impl<T: Real> State<T> {
    fn get(&self, p: FitParam) -> T {
        match p {
            FitParam::OmegaC => self.sys.omega_c,
            FitParam::OmegaM => self.sys.omega_m,
            FitParam::Kappa => self.sys.kappa,
            FitParam::KappaC => self.sys.kappa_c,
            FitParam::Gamma => self.sys.gamma,
            FitParam::G => self.sys.g,
            FitParam::EtaZeta => self.amp,
            FitParam::Phase => self.phase,
            FitParam::GammaC => self.gamma_c,
        }
    }

    fn set(&mut self, p: FitParam, v: T) {
        match p {
            FitParam::OmegaC => self.sys.omega_c = v,
            FitParam::OmegaM => self.sys.omega_m = v,
            FitParam::Kappa => self.sys.kappa = v,
            FitParam::KappaC => self.sys.kappa_c = v,
            FitParam::Gamma => self.sys.gamma = v,
            FitParam::G => self.sys.g = v,
            FitParam::EtaZeta => self.amp = v,
            FitParam::Phase => self.phase = v,
            FitParam::GammaC => self.gamma_c = v,
        }
    }

    fn model(&self, kind: TraceKind) -> SignalModel<T> {
        match kind {
            TraceKind::S11Hybrid => SignalModel::Hybrid(self.sys),
            TraceKind::SLm => {
                let mut sys = self.sys;
                sys.zeta = self.amp * self.amp;
                SignalModel::Conversion {
                    params: sys,
                    eta: T::one(),
                    phase: self.phase,
                }
            }
            TraceKind::S11Coil => SignalModel::Coil {
                omega_m: self.sys.omega_m,
                gamma: self.sys.gamma,
                gamma_c: self.gamma_c,
            },
            TraceKind::PowerOnly => SignalModel::Power(Box::new(SignalModel::Hybrid(self.sys))),
        }
    }
}

struct SpectrumProblem<'a, T> {
    omega: Vec<T>,
    data: &'a [Complex<T>],
    kind: TraceKind,
    base: State<T>,
    free: Vec<FitParam>,
    /// Narrowest linewidth or sample spacing at the start, rad/s.
    feature_width: T,
}

fn feature_width<T: Real>(s: &State<T>, kind: TraceKind, omega: &[T]) -> T {
    let mut widths = vec![s.sys.gamma.abs()];
    if kind == TraceKind::S11Coil {
        widths.push(s.sys.gamma.abs() + s.gamma_c.abs());
    } else {
        widths.push(s.sys.kappa_total().abs());
    }
    widths.extend(omega.windows(2).map(|w| (w[1] - w[0]).abs()));
    widths
        .into_iter()
        .filter(|w| *w > T::zero())
        .fold(T::infinity(), |a, b| a.min(b))
}

impl<T: Real> SpectrumProblem<'_, T> {
    fn state(&self, p: &[T]) -> State<T> {
        // Rates enter through their magnitude so difference stencils may
        // straddle zero.
        let mut s = self.base;
        for (&name, &v) in self.free.iter().zip(p) {
            s.set(name, if name.is_rate() { v.abs() } else { v });
        }
        s
    }
}

impl<T: Real> LeastSquaresProblem<T> for SpectrumProblem<'_, T> {
    fn residuals(&self, p: &[T]) -> Result<Vec<T>> {
        let model = self.state(p).model(self.kind);
        let power_only = self.kind == TraceKind::PowerOnly;
        let mut r = Vec::with_capacity(self.omega.len() * 2);
        for (&w, d) in self.omega.iter().zip(self.data) {
            let m = model.evaluate(w)?;
            r.push(m.re - d.re);
            if !power_only {
                r.push(m.im - d.im);
            }
        }
        Ok(r)
    }

    fn fd_step(&self, index: usize, value: T) -> T {
        match self.free[index] {
            FitParam::Phase => fd_step(value, T::lit(1e-6)),
            FitParam::EtaZeta => fd_step(value, T::lit(1e-12)),
            // a step relative to ω itself would be coarse against narrow lines
            FitParam::OmegaC | FitParam::OmegaM => {
                (T::lit(CENTER_FD_REL) * self.feature_width).max(T::lit(64.0) * T::epsilon() * value.abs())
            }
            // small rates next to a large g² lose their difference to
            // cancellation; step on the linewidth scale but stay clear of zero
            FitParam::Kappa | FitParam::KappaC | FitParam::Gamma | FitParam::GammaC => {
                let h = fd_step(value, T::lit(RATE_FD_FLOOR)).max(T::lit(CENTER_FD_REL) * self.feature_width);
                h.min(T::half() * value.abs()).max(T::lit(RATE_FD_FLOOR))
            }
            _ => fd_step(value, T::lit(RATE_FD_FLOOR)),
        }
    }

    fn typical(&self, index: usize, value: T) -> T {
        match self.free[index] {
            FitParam::Phase => T::one(),
            FitParam::EtaZeta => value.abs().max(T::lit(1e-12)),
            _ => value.abs().max(T::one()),
        }
    }
}

impl<T: Real> State<T> {
    fn of(model: &SignalModel<T>) -> Self {
        let zero = T::zero();
        match model {
            SignalModel::Hybrid(p) => Self {
                sys: *p,
                amp: zero,
                phase: zero,
                gamma_c: zero,
            },
            SignalModel::Power(inner) => Self::of(inner),
            SignalModel::Conversion { params, eta, phase } => Self {
                sys: *params,
                amp: (*eta * params.zeta).sqrt(),
                phase: *phase,
                gamma_c: zero,
            },
            SignalModel::Coil {
                omega_m,
                gamma,
                gamma_c,
            } => Self {
                sys: SystemParams {
                    omega_c: *omega_m,
                    omega_m: *omega_m,
                    kappa: zero,
                    kappa_c: zero,
                    gamma: *gamma,
                    g: zero,
                    zeta: zero,
                },
                amp: zero,
                phase: zero,
                gamma_c: *gamma_c,
            },
        }
    }
}

/// Difference Jacobian the fitter uses for `model` on `freq_hz`: rows
/// alternate real and imaginary parts (real only for power traces),
/// columns follow `free` in the fitter's internal units (rad/s, and √(ηζ)
/// for [`FitParam::EtaZeta`]).
pub fn model_jacobian<T: Real>(model: &SignalModel<T>, free: &[FitParam], freq_hz: &[T]) -> Result<lsq::Matrix<T>> {
    let omega: Vec<T> = freq_hz.iter().map(|&f| hz_to_rad(f)).collect();
    let kind = model.kind();
    let base = State::of(model);
    let zeros = vec![Complex::new(T::zero(), T::zero()); omega.len()];
    let problem = SpectrumProblem {
        feature_width: feature_width(&base, kind, &omega),
        omega,
        data: &zeros,
        kind,
        base,
        free: free.to_vec(),
    };
    let start: Vec<T> = free.iter().map(|&p| base.get(p)).collect();
    let steps: Vec<T> = start.iter().enumerate().map(|(i, &x)| problem.fd_step(i, x)).collect();
    lsq::jacobian_fd(|p| problem.residuals(p), &start, &steps)
}

/// Parameters whose full-scale change moves the model by less than this
/// RMS amount are reported unidentifiable.
const SENSITIVITY_FLOOR: f64 = 1e-9;

fn run_fit<T: Real>(
    trace: &SpectrumTrace<T>,
    kind: TraceKind,
    init: State<T>,
    free: Vec<FitParam>,
    opts: &FitOptions<T>,
    mut flags: Vec<FitFlag>,
) -> Result<FitResult<T>> {
    trace.validate()?;
    if trace.len() < free.len() {
        return Err(Error::InvalidInput(format!(
            "degenerate trace: {} points for {} parameters",
            trace.len(),
            free.len()
        )));
    }
    let omega = trace.omega();
    let feature_width = feature_width(&init, kind, &omega);
    let problem = SpectrumProblem {
        omega,
        data: &trace.value,
        kind,
        base: init,
        free: free.clone(),
        feature_width,
    };
    let start: Vec<T> = free.iter().map(|&p| init.get(p)).collect();
    let report = lsq::minimize(&problem, &start, &opts.lsq)?;
    let state = problem.state(&report.params);

    let dof = report.residual_count.saturating_sub(free.len()).max(1);
    let sigma2 = report.cost / T::from_usize(dof).unwrap();
    let gram = report.jacobian.gram();
    let (inv, weak) = psd_pseudo_inverse(&gram, T::lit(1e-13));
    let mut covariance = inv.to_nested();
    for row in covariance.iter_mut() {
        for v in row.iter_mut() {
            *v = *v * sigma2;
        }
    }

    let rms_count = T::from_usize(report.residual_count).unwrap().sqrt();
    for (i, &name) in free.iter().enumerate() {
        let col = report.jacobian.column(i);
        let sens = col.iter().fold(T::zero(), |s, &x| s + x * x).sqrt() / rms_count;
        let scale = problem.typical(i, report.params[i]);
        if sens * scale < T::lit(SENSITIVITY_FLOOR) || weak.contains(&i) {
            flags.push(FitFlag::Unidentifiable(name));
        }
    }
    if !report.converged {
        flags.push(FitFlag::NotConverged);
    }

    // fold rates onto their magnitude, then report ηζ rather than its root
    let mut values = report.params.clone();
    for i in 0..free.len() {
        if free[i].is_rate() && values[i] < T::zero() {
            values[i] = -values[i];
            for j in 0..free.len() {
                covariance[i][j] = -covariance[i][j];
                covariance[j][i] = -covariance[j][i];
            }
        }
    }
    let mut eta_zeta = None;
    if let Some(i) = free.iter().position(|&p| p == FitParam::EtaZeta) {
        let a = values[i];
        values[i] = a * a;
        let d = T::two() * a;
        for j in 0..free.len() {
            covariance[i][j] = covariance[i][j] * d;
            covariance[j][i] = covariance[j][i] * d;
        }
        eta_zeta = Some(a * a);
    } else if kind == TraceKind::SLm {
        eta_zeta = Some(state.amp * state.amp);
    }

    Ok(FitResult {
        kind,
        model: state.model(kind),
        eta_zeta,
        regime: None,
        names: free,
        values,
        covariance,
        residual_norm: report.cost.sqrt(),
        converged: report.converged,
        iterations: report.iterations,
        flags,
    })
}

/// Seeds all six hybrid parameters from the two deepest |S₁₁| dips:
/// resonances at their midpoint, g from half their separation, and the
/// loss split from the dip width and depth (assuming over-coupling).
pub fn initial_guess_s11_hybrid<T: Real>(trace: &SpectrumTrace<T>) -> Result<SystemParams<T>> {
    trace.validate()?;
    let omega = trace.omega();
    let mag2: Vec<T> = match trace.kind {
        TraceKind::PowerOnly => trace.value.iter().map(|v| v.re).collect(),
        _ => trace.value.iter().map(|v| v.norm_sqr()).collect(),
    };
    let minima = local_minima(&mag2);
    let (lo, hi) = match minima.as_slice() {
        [a, b, ..] => ((*a).min(*b), (*a).max(*b)),
        _ => {
            return Err(Error::InvalidInput(
                "need two reflection dips to seed a hybrid fit".into(),
            ))
        }
    };
    let mid = (omega[lo] + omega[hi]) * T::half();
    let g = (omega[hi] - omega[lo]) * T::half();
    let baseline = mag2.iter().fold(T::zero(), |m, &v| m.max(v)).max(T::one());
    let widths: Vec<T> = [lo, hi]
        .iter()
        .filter_map(|&i| dip_width(&omega, &mag2, i, baseline))
        .collect();
    let width = if widths.is_empty() {
        g * T::lit(0.2)
    } else {
        widths.iter().fold(T::zero(), |s, &w| s + w) / T::from_usize(widths.len()).unwrap()
    };
    let depth = ((mag2[lo] + mag2[hi]) * T::half() / baseline).sqrt().min(T::lit(0.99));
    // per-mode external and internal loss from |S| = (ext - int)/(ext + int)
    let ext = width * (T::one() + depth) * T::half();
    let int = width * (T::one() - depth) * T::half();
    let kappa_c = T::two() * ext;
    let kappa = int;
    let gamma = int;
    SystemParams::new(mid, mid, kappa, kappa_c, gamma, g, T::zero())
}

/// Seeds (ω_m, γ, γ_c) from the deepest coil-reflection dip.
pub fn initial_guess_coil<T: Real>(trace: &SpectrumTrace<T>) -> Result<(T, T, T)> {
    trace.validate()?;
    let omega = trace.omega();
    let mag2: Vec<T> = trace.value.iter().map(|v| v.norm_sqr()).collect();
    let Some(&i) = local_minima(&mag2).first() else {
        return Err(Error::InvalidInput("no reflection dip to seed a coil fit".into()));
    };
    let width =
        dip_width(&omega, &mag2, i, T::one()).unwrap_or_else(|| (omega[omega.len() - 1] - omega[0]) * T::lit(0.1));
    let s = mag2[i].sqrt().min(T::lit(0.99));
    Ok((
        omega[i],
        width * (T::one() - s) * T::half(),
        width * (T::one() + s) * T::half(),
    ))
}

fn outside<T: Real>(w: T, omega: &[T]) -> bool {
    w < omega[0] || w > omega[omega.len() - 1]
}

const HYBRID_FREE: [FitParam; 6] = [
    FitParam::OmegaC,
    FitParam::OmegaM,
    FitParam::Kappa,
    FitParam::KappaC,
    FitParam::Gamma,
    FitParam::G,
];

fn hybrid_flags<T: Real>(res: &mut FitResult<T>) {
    if let Some(p) = res.params() {
        if (p.omega_c - p.omega_m).abs() < p.g {
            res.flags.push(FitFlag::AmbiguousModeLabels);
        }
    }
}

fn reseed_if_outside<T: Real>(
    trace: &SpectrumTrace<T>,
    init: &SystemParams<T>,
    flags: &mut Vec<FitFlag>,
) -> Result<SystemParams<T>> {
    let omega = trace.omega();
    let mut p = *init;
    if outside(p.omega_c, &omega) || outside(p.omega_m, &omega) {
        let seed = initial_guess_s11_hybrid(trace)?;
        p.omega_c = seed.omega_c;
        p.omega_m = seed.omega_m;
        flags.push(FitFlag::Reseeded);
    }
    Ok(p)
}

/// Fits (ω_c, ω_m, κ, κ_c, γ, g) to a hybrid-cavity S₁₁ trace.
pub fn fit_s11_hybrid<T: Real>(
    trace: &SpectrumTrace<T>,
    init: &SystemParams<T>,
    opts: &FitOptions<T>,
) -> Result<FitResult<T>> {
    if trace.kind != TraceKind::S11Hybrid {
        return Err(Error::InvalidInput(format!(
            "expected an S11_HYBRID trace, got {}",
            trace.kind
        )));
    }
    trace.validate()?;
    let mut flags = Vec::new();
    let sys = reseed_if_outside(trace, init, &mut flags)?;
    let state = State {
        sys,
        amp: T::zero(),
        phase: T::zero(),
        gamma_c: T::zero(),
    };
    let mut res = run_fit(trace, TraceKind::S11Hybrid, state, HYBRID_FREE.to_vec(), opts, flags)?;
    hybrid_flags(&mut res);
    Ok(res)
}

/// Fits the hybrid parameters to a power-only |S₁₁|² trace. Phase is
/// absent, so under- and over-coupled solutions are indistinguishable and
/// the branch nearest `init` is returned.
pub fn fit_s11_power<T: Real>(
    trace: &SpectrumTrace<T>,
    init: &SystemParams<T>,
    opts: &FitOptions<T>,
) -> Result<FitResult<T>> {
    if trace.kind != TraceKind::PowerOnly {
        return Err(Error::InvalidInput(format!(
            "expected a POWER_ONLY trace, got {}",
            trace.kind
        )));
    }
    trace.validate()?;
    let mut flags = Vec::new();
    let sys = reseed_if_outside(trace, init, &mut flags)?;
    let state = State {
        sys,
        amp: T::zero(),
        phase: T::zero(),
        gamma_c: T::zero(),
    };
    let mut res = run_fit(trace, TraceKind::PowerOnly, state, HYBRID_FREE.to_vec(), opts, flags)?;
    hybrid_flags(&mut res);
    Ok(res)
}

/// Fits a microwave→light trace. Free parameters are the six hybrid
/// parameters minus `fixed`, plus the composite ηζ and a global phase.
/// At least one of κ, κ_c must be fixed: S_LM only constrains their sum
/// apart from the amplitude, which ηζ absorbs.
pub fn fit_s_lm<T: Real>(
    trace: &SpectrumTrace<T>,
    init: &SystemParams<T>,
    fixed: &[FitParam],
    opts: &FitOptions<T>,
) -> Result<FitResult<T>> {
    if trace.kind != TraceKind::SLm {
        return Err(Error::InvalidInput(format!(
            "expected an S_LM trace, got {}",
            trace.kind
        )));
    }
    trace.validate()?;
    if !fixed.contains(&FitParam::Kappa) && !fixed.contains(&FitParam::KappaC) {
        return Err(Error::InvalidInput(
            "S_LM fits cannot separate kappa from kappa_c; fix at least one of them".into(),
        ));
    }
    let mut flags = Vec::new();
    let mut sys = *init;
    let omega = trace.omega();
    if outside(sys.omega_c, &omega) || outside(sys.omega_m, &omega) {
        let mag: Vec<T> = trace.magnitude();
        let peaks = local_maxima(&mag);
        if let [a, b, ..] = peaks.as_slice() {
            let mid = (omega[*a] + omega[*b]) * T::half();
            sys.omega_c = mid;
            sys.omega_m = mid;
            flags.push(FitFlag::Reseeded);
        }
    }
    if !(sys.g > T::zero()) || !(sys.kappa_c > T::zero()) {
        return Err(Error::InvalidInput(
            "S_LM fit needs g > 0 and kappa_c > 0 in the initial guess".into(),
        ));
    }

    // Best complex scale for the fixed shape gives the ηζ and phase seeds.
    let mut shape_sys = sys;
    shape_sys.zeta = T::one();
    let mut num = Complex::new(T::zero(), T::zero());
    let mut den = T::zero();
    for (&w, d) in omega.iter().zip(&trace.value) {
        let f = s_lm(&shape_sys, T::one(), w)?;
        num = num + f.conj() * d;
        den = den + f.norm_sqr();
    }
    let scale = if den > T::zero() {
        num / den
    } else {
        Complex::new(T::one(), T::zero())
    };
    let state = State {
        sys,
        amp: scale.norm().sqrt(),
        phase: scale.arg(),
        gamma_c: T::zero(),
    };
    let mut free: Vec<FitParam> = HYBRID_FREE.iter().copied().filter(|p| !fixed.contains(p)).collect();
    free.push(FitParam::EtaZeta);
    free.push(FitParam::Phase);
    let res = run_fit(trace, TraceKind::SLm, state, free, opts, flags)?;
    Ok(res)
}

/// Initial values for a coil-reflection fit, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoilInit<T> {
    pub omega_m: T,
    pub gamma: T,
    pub gamma_c: T,
}

/// Relative |γ_c − γ| treated as critical coupling.
pub const CRITICAL_REL_TOL: f64 = 0.01;

/// Fits (ω_m, γ, γ_c) to a coil reflection trace and classifies the
/// coupling regime.
pub fn fit_s11_coil<T: Real>(
    trace: &SpectrumTrace<T>,
    init: &CoilInit<T>,
    opts: &FitOptions<T>,
) -> Result<FitResult<T>> {
    if trace.kind != TraceKind::S11Coil {
        return Err(Error::InvalidInput(format!(
            "expected an S11_COIL trace, got {}",
            trace.kind
        )));
    }
    trace.validate()?;
    let mut sys = SystemParams {
        omega_c: init.omega_m,
        omega_m: init.omega_m,
        kappa: T::zero(),
        kappa_c: T::zero(),
        gamma: init.gamma,
        g: T::zero(),
        zeta: T::zero(),
    };
    let mut flags = Vec::new();
    let mut gamma_c = init.gamma_c;
    if outside(init.omega_m, &trace.omega()) {
        if let Ok((w, g, gc)) = initial_guess_coil(trace) {
            sys.omega_m = w;
            if !(sys.gamma > T::zero()) {
                sys.gamma = g;
            }
            if !(gamma_c > T::zero()) {
                gamma_c = gc;
            }
            flags.push(FitFlag::Reseeded);
        }
    }
    let state = State {
        sys,
        amp: T::zero(),
        phase: T::zero(),
        gamma_c,
    };
    let free = vec![FitParam::OmegaM, FitParam::Gamma, FitParam::GammaC];
    let mut res = run_fit(trace, TraceKind::S11Coil, state, free, opts, flags)?;
    if let SignalModel::Coil { gamma, gamma_c, .. } = res.model {
        if !(gamma_c > T::zero()) && !res.flags.contains(&FitFlag::Unidentifiable(FitParam::Gamma)) {
            res.flags.push(FitFlag::Unidentifiable(FitParam::Gamma));
        }
        let var = res.covariance[1][1] + res.covariance[2][2] - T::two() * res.covariance[1][2];
        let tol = (T::lit(CRITICAL_REL_TOL) * (gamma + gamma_c)).max(T::two() * var.max(T::zero()).sqrt());
        let diff = gamma_c - gamma;
        res.regime = Some(if diff.abs() <= tol {
            CouplingRegime::Critical
        } else if diff > T::zero() {
            CouplingRegime::Over
        } else {
            CouplingRegime::Under
        });
    }
    Ok(res)
}

/// Dispatches on the trace kind. `init` seeds hybrid and conversion fits;
/// coil fits take (ω_m, γ, γ_c) from `coil_init` or the trace itself.
pub fn fit_trace<T: Real>(
    trace: &SpectrumTrace<T>,
    init: Option<&SystemParams<T>>,
    coil_init: Option<&CoilInit<T>>,
    fixed: &[FitParam],
    opts: &FitOptions<T>,
) -> Result<FitResult<T>> {
    let seeded = |t: &SpectrumTrace<T>| -> Result<SystemParams<T>> {
        match init {
            Some(p) => Ok(*p),
            None => initial_guess_s11_hybrid(t),
        }
    };
    match trace.kind {
        TraceKind::S11Hybrid => fit_s11_hybrid(trace, &seeded(trace)?, opts),
        TraceKind::PowerOnly => fit_s11_power(trace, &seeded(trace)?, opts),
        TraceKind::SLm => {
            let p = init.ok_or_else(|| Error::InvalidInput("S_LM fits need an initial system block".into()))?;
            fit_s_lm(trace, p, fixed, opts)
        }
        TraceKind::S11Coil => {
            let ci = match coil_init {
                Some(c) => *c,
                None => {
                    let (w, g, gc) = initial_guess_coil(trace)?;
                    CoilInit {
                        omega_m: w,
                        gamma: g,
                        gamma_c: gc,
                    }
                }
            };
            fit_s11_coil(trace, &ci, opts)
        }
    }
}

/// Fits `seeds.len()` independent noisy realizations of `truth` in
/// parallel, each started from `init`.
pub fn monte_carlo_s11_hybrid<T: Real>(
    truth: &SystemParams<T>,
    init: &SystemParams<T>,
    freq_hz: &[T],
    noise_sigma: T,
    seeds: &[u64],
    opts: &FitOptions<T>,
) -> Result<Vec<FitResult<T>>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let trace = synthesize_trace(&SignalModel::Hybrid(*truth), freq_hz, noise_sigma, seed)?;
            fit_s11_hybrid(&trace, init, opts)
        })
        .collect()
}
