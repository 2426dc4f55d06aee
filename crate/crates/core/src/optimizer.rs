//! Search for the detunings that maximize light→microwave conversion.
//!
//! Everything runs in normalized coordinates x = Δ_c/(κ+κ_c), y = Δ_m/γ,
//! where the reciprocal efficiency is a quartic polynomial.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Detunings, EfficiencyForm, SystemParams};
use crate::scalar::Real;

/// Default coarse grid points per axis.
pub const DEFAULT_GRID_POINTS: usize = 201;
/// Refinement stops when the relative step falls below this.
pub const REFINE_REL_STEP: f64 = 1e-10;
const MAX_NEWTON: usize = 500;
/// Finite-difference step in normalized detuning units.
pub const GRADIENT_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HessianDefiniteness {
    Max,
    Min,
    Saddle,
    Degenerate,
}

/// Half-widths of the search box in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpan<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> SearchSpan<T> {
    /// ±3√C on both axes (±3 when C < 1).
    pub fn default_for(cooperativity: T) -> Self {
        let s = T::lit(3.0) * cooperativity.max(T::one()).sqrt();
        Self { x: s, y: s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport<T> {
    /// Optimal detunings, rad/s.
    pub det: Detunings<T>,
    /// Same point in normalized units (x, y).
    pub normalized: (T, T),
    pub efficiency: T,
    /// |∇η|/η in normalized units at the optimum.
    pub gradient_norm: T,
    pub hessian_definiteness: HessianDefiniteness,
    pub gain_over_resonant: T,
    pub resonant_efficiency: T,
    pub cooperativity: T,
    /// Iterations used by the refinement.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions<T> {
    /// `None` uses [`SearchSpan::default_for`].
    pub span: Option<SearchSpan<T>>,
    pub grid_points: usize,
    pub rel_step: T,
}

impl<T: Real> Default for OptimizerOptions<T> {
    fn default() -> Self {
        Self {
            span: None,
            grid_points: DEFAULT_GRID_POINTS,
            rel_step: T::lit(REFINE_REL_STEP),
        }
    }
}

fn axis<T: Real>(span: T, n: usize) -> Vec<T> {
    let step = T::two() * span / T::from_usize(n - 1).unwrap();
    (0..n).map(|i| -span + step * T::from_usize(i).unwrap()).collect()
}

/// Brute-force maximum of the efficiency on an `n × n` grid over ±span.
/// Returns (ix, iy, x, y, efficiency); ties keep the first cell.
pub fn grid_maximum<T: Real>(form: &EfficiencyForm<T>, span: SearchSpan<T>, n: usize) -> (usize, usize, T, T, T) {
    let xs = axis(span.x, n);
    let ys = axis(span.y, n);
    let rows: Vec<(usize, T)> = xs
        .par_iter()
        .map(|&x| {
            let mut best = (0, T::neg_infinity());
            for (j, &y) in ys.iter().enumerate() {
                let v = form.at_normalized(x, y);
                if v > best.1 {
                    best = (j, v);
                }
            }
            best
        })
        .collect();
    let mut best = (0, 0, T::neg_infinity());
    for (i, &(j, v)) in rows.iter().enumerate() {
        if v > best.2 {
            best = (i, j, v);
        }
    }
    (best.0, best.1, xs[best.0], ys[best.1], best.2)
}

/// Gradient and Hessian of the reciprocal-efficiency denominator
/// D = (C + 1 − 4xy)² + 4(x + y)², exact since D is a polynomial.
fn denominator_derivatives<T: Real>(form: &EfficiencyForm<T>, x: T, y: T) -> ([T; 2], [T; 3]) {
    let four = T::lit(4.0);
    let eight = T::lit(8.0);
    let a = form.cooperativity + T::one();
    let r = a - four * x * y;
    let s = x + y;
    let grad = [-eight * y * r + eight * s, -eight * x * r + eight * s];
    let hxx = T::lit(32.0) * y * y + eight;
    let hyy = T::lit(32.0) * x * x + eight;
    let hxy = -eight * a + T::lit(64.0) * x * y + eight;
    (grad, [hxx, hxy, hyy])
}

/// Minimizes the denominator starting from the grid estimate s0 = x + y.
///
/// With s = x + y and t = x − y, D = (C + 1 − s² + t²)² + 4s². For fixed
/// s the best t² is max(0, s² − C − 1), which leaves a one-dimensional
/// profile in s; that is searched by safeguarded Newton on its derivative.
/// Searching in (x, y) directly crawls along the curved ridge 4xy ≈ C + 1
/// once C is large.
fn refine<T: Real>(form: &EfficiencyForm<T>, s0: T, rel_step: T) -> Result<(T, T, usize)> {
    let a = form.cooperativity + T::one();
    let four = T::lit(4.0);
    // profile derivative and curvature for s² < a (the minimum lies there)
    let slope = |s: T| four * s * (s * s - a + T::two());
    let curve = |s: T| T::lit(12.0) * s * s - four * a + T::lit(8.0);
    let edge = a.sqrt();
    let mut lo = edge * T::lit(1e-12);
    let mut hi = edge;
    if !(slope(lo) < T::zero()) {
        // profile rises from s = 0: the optimum is on resonance
        return Ok((T::zero(), T::zero(), 0));
    }
    let mut s = s0.abs().max(lo).min(hi);
    for iter in 1..=MAX_NEWTON {
        let g = slope(s);
        if g < T::zero() {
            lo = s;
        } else {
            hi = s;
        }
        let h = curve(s);
        let newton = s - g / h;
        let next = if h > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * T::half()
        };
        let step = (next - s).abs() / next.abs().max(T::one());
        s = next;
        if step < rel_step || hi - lo <= T::lit(4.0) * T::epsilon() * hi {
            // a last Newton step squares the remaining error, which matters
            // because the profile curvature grows like C
            let polished = s - slope(s) / curve(s);
            if curve(s) > T::zero() && polished > lo && polished < hi {
                s = polished;
            }
            let t2 = (s * s - a).max(T::zero());
            let t = t2.sqrt();
            return Ok(((s + t) * T::half(), (s - t) * T::half(), iter));
        }
    }
    Err(Error::Numerical(format!(
        "refinement did not converge in {MAX_NEWTON} iterations"
    )))
}

/// Central-difference gradient of η in normalized units, divided by η at
/// the point.
pub fn stationarity_residual<T: Real>(p: &SystemParams<T>, det: Detunings<T>) -> Result<(T, T)> {
    let form = EfficiencyForm::new(p)?;
    let (x, y) = form.normalize(det);
    Ok(normalized_gradient(&form, x, y))
}

fn normalized_gradient<T: Real>(form: &EfficiencyForm<T>, x: T, y: T) -> (T, T) {
    let h = T::lit(GRADIENT_STEP);
    let e = form.at_normalized(x, y);
    if !(e > T::zero()) {
        return (T::zero(), T::zero());
    }
    let gx = (form.at_normalized(x + h, y) - form.at_normalized(x - h, y)) / (T::two() * h);
    let gy = (form.at_normalized(x, y + h) - form.at_normalized(x, y - h)) / (T::two() * h);
    (gx / e, gy / e)
}

/// Five-point-stencil gradient of η in normalized units, divided by η.
pub fn gradient_five_point<T: Real>(p: &SystemParams<T>, det: Detunings<T>, h: T) -> Result<(T, T)> {
    let form = EfficiencyForm::new(p)?;
    let (x, y) = form.normalize(det);
    let e = form.at_normalized(x, y);
    if !(e > T::zero()) {
        return Ok((T::zero(), T::zero()));
    }
    let stencil = |f: &dyn Fn(T) -> T, t: T| {
        (f(t - T::two() * h) - T::lit(8.0) * f(t - h) + T::lit(8.0) * f(t + h) - f(t + T::two() * h))
            / (T::lit(12.0) * h)
    };
    let gx = stencil(&|s| form.at_normalized(s, y), x);
    let gy = stencil(&|s| form.at_normalized(x, s), y);
    Ok((gx / e, gy / e))
}

/// Classifies the stationary point at (x, y) from the exact Hessian of
/// the denominator: a minimum of D is a maximum of η.
pub fn classify_hessian<T: Real>(form: &EfficiencyForm<T>, x: T, y: T) -> HessianDefiniteness {
    if !(form.prefactor > T::zero()) {
        return HessianDefiniteness::Degenerate;
    }
    let (_, [hxx, hxy, hyy]) = denominator_derivatives(form, x, y);
    let mean = (hxx + hyy) * T::half();
    let r = ((hxx - hyy) * T::half()).hypot(hxy);
    let big = if mean >= T::zero() { mean + r } else { mean - r };
    if big == T::zero() {
        return HessianDefiniteness::Degenerate;
    }
    // the small eigenvalue from the determinant avoids cancellation
    let small = (hxx * hyy - hxy * hxy) / big;
    if small.abs() <= T::lit(1e-14) * big.abs() {
        HessianDefiniteness::Degenerate
    } else if small * big < T::zero() {
        HessianDefiniteness::Saddle
    } else if big > T::zero() {
        HessianDefiniteness::Max
    } else {
        HessianDefiniteness::Min
    }
}

/// Locates the global efficiency maximum. The landscape is symmetric under
/// (Δ_c, Δ_m) → (−Δ_c, −Δ_m); the representative with Δ_c + Δ_m ≥ 0 is
/// returned. A zero cooperativity gives a flat landscape, reported as
/// `Degenerate` at zero detuning.
pub fn find_optimum<T: Real>(p: &SystemParams<T>, opts: &OptimizerOptions<T>) -> Result<OptimumReport<T>> {
    let form = EfficiencyForm::new(p)?;
    let c = form.cooperativity;
    let resonant = form.resonant();
    if c == T::zero() || form.prefactor == T::zero() {
        return Ok(OptimumReport {
            det: Detunings {
                delta_c: T::zero(),
                delta_m: T::zero(),
            },
            normalized: (T::zero(), T::zero()),
            efficiency: T::zero(),
            gradient_norm: T::zero(),
            hessian_definiteness: HessianDefiniteness::Degenerate,
            gain_over_resonant: T::one(),
            resonant_efficiency: resonant,
            cooperativity: c,
            iterations: 0,
        });
    }
    if opts.grid_points < 3 {
        return Err(Error::param("grid_points", "need at least 3 points per axis"));
    }
    let span = opts.span.unwrap_or_else(|| SearchSpan::default_for(c));
    if !(span.x > T::zero() && span.y > T::zero()) {
        return Err(Error::param("span", "must be positive"));
    }
    let n = opts.grid_points;
    let (i, j, x0, y0, _) = grid_maximum(&form, span, n);
    if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
        return Err(Error::SpanTooSmall {
            x: x0.as_f64(),
            y: y0.as_f64(),
        });
    }
    let (mut x, mut y, iterations) = refine(&form, x0 + y0, opts.rel_step)?;
    if x.abs() > span.x || y.abs() > span.y {
        return Err(Error::SpanTooSmall {
            x: x.as_f64(),
            y: y.as_f64(),
        });
    }
    if x + y < T::zero() || (x + y == T::zero() && x < T::zero()) {
        x = -x;
        y = -y;
    }
    // the exact optimum at the origin would otherwise carry a signed zero
    x = x + T::zero();
    y = y + T::zero();
    let efficiency = form.at_normalized(x, y);
    let (gx, gy) = normalized_gradient(&form, x, y);
    Ok(OptimumReport {
        det: form.denormalize(x, y),
        normalized: (x, y),
        efficiency,
        gradient_norm: gx.hypot(gy),
        hessian_definiteness: classify_hessian(&form, x, y),
        gain_over_resonant: efficiency / resonant,
        resonant_efficiency: resonant,
        cooperativity: c,
        iterations,
    })
}

/// Efficiency on a rectangular detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape<T> {
    /// Cavity detunings Δ_c, rad/s.
    pub delta_c: Vec<T>,
    /// Magnon detunings Δ_m, rad/s.
    pub delta_m: Vec<T>,
    /// `efficiency[i][j]` at (delta_c[i], delta_m[j]).
    pub efficiency: Vec<Vec<T>>,
}

impl<T: Real> Landscape<T> {
    /// Largest value and its (i, j) cell.
    pub fn maximum(&self) -> (usize, usize, T) {
        let mut best = (0, 0, T::neg_infinity());
        for (i, row) in self.efficiency.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        best
    }
}

/// Grid for [`efficiency_landscape`]: ±span in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSpec<T> {
    pub span: SearchSpan<T>,
    pub points_c: usize,
    pub points_m: usize,
}

pub fn efficiency_landscape<T: Real>(p: &SystemParams<T>, spec: &LandscapeSpec<T>) -> Result<Landscape<T>> {
    let form = EfficiencyForm::new(p)?;
    if spec.points_c < 2 || spec.points_m < 2 {
        return Err(Error::param("points", "need at least 2 points per axis"));
    }
    if !(spec.span.x.is_finite() && spec.span.y.is_finite() && spec.span.x > T::zero() && spec.span.y > T::zero()) {
        return Err(Error::param("span", "must be finite and positive"));
    }
    let xs = axis(spec.span.x, spec.points_c);
    let ys = axis(spec.span.y, spec.points_m);
    let efficiency = xs
        .par_iter()
        .map(|&x| ys.iter().map(|&y| form.at_normalized(x, y)).collect())
        .collect();
    Ok(Landscape {
        delta_c: xs.iter().map(|&x| x * form.kappa_total).collect(),
        delta_m: ys.iter().map(|&y| y * form.gamma).collect(),
        efficiency,
    })
}

/// Best probe frequency with the Kittel frequency held at `p.omega_m`
/// (fixed coil current).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedOptimum<T> {
    /// Optimal probe frequency, rad/s.
    pub omega: T,
    pub det: Detunings<T>,
    pub efficiency: T,
    /// Ratio to the unconstrained maximum.
    pub fraction_of_unconstrained: T,
}

/// Vertex of the parabola through (t - h, a), (t, b), (t + h, c).
fn parabola_vertex<T: Real>(t: T, h: T, a: T, b: T, c: T) -> Option<T> {
    let curv = a - T::two() * b + c;
    if !(curv > T::zero()) {
        return None;
    }
    Some(t + h * (a - c) / (T::two() * curv))
}

/// Maximizes η over the probe frequency alone, with Δ_c = ω − ω_c and
/// Δ_m = ω − ω_m. The search covers ω_c ± `span` (rad/s) with `points`
/// samples before parabolic refinement.
pub fn optimum_at_fixed_magnon<T: Real>(
    p: &SystemParams<T>,
    span: T,
    points: usize,
    unconstrained: &OptimumReport<T>,
) -> Result<ConstrainedOptimum<T>> {
    let form = EfficiencyForm::new(p)?;
    if points < 3 || !(span > T::zero()) {
        return Err(Error::param("span", "need positive span and at least 3 points"));
    }
    let eff = |w: T| form.at(p.detunings(w));
    let grid: Vec<T> = axis(span, points).into_iter().map(|d| p.omega_c + d).collect();
    let mut k = 0;
    for (i, &w) in grid.iter().enumerate() {
        if eff(w) > eff(grid[k]) {
            k = i;
        }
    }
    let mut w = grid[k];
    let mut h = (grid[1] - grid[0]) * T::half();
    // parabola steps on 1/η inside a halving bracket
    for _ in 0..200 {
        let (a, b, c) = (T::one() / eff(w - h), T::one() / eff(w), T::one() / eff(w + h));
        match parabola_vertex(w, h, a, b, c) {
            Some(v) if (v - w).abs() <= h => w = v,
            _ => {
                if a < b && a <= c {
                    w = w - h;
                } else if c < b {
                    w = w + h;
                }
            }
        }
        h = h * T::half();
        if h < w.abs() * T::lit(1e-15) {
            break;
        }
    }
    let efficiency = eff(w);
    Ok(ConstrainedOptimum {
        omega: w,
        det: p.detunings(w),
        efficiency,
        fraction_of_unconstrained: if unconstrained.efficiency > T::zero() {
            efficiency / unconstrained.efficiency
        } else {
            T::one()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cooperativity;
    use crate::units::rad_to_hz;

    fn paper() -> SystemParams<f64> {
        SystemParams::from_hz(10.45e9, 10.45e9, 3.3e6, 25e6, 1.1e6, 63e6, 0.18e-3).unwrap()
    }

    #[test]
    fn paper_operating_point() {
        let p = paper();
        let r = find_optimum(&p, &OptimizerOptions::default()).unwrap();
        let dc = rad_to_hz(r.det.delta_c);
        let dm = rad_to_hz(r.det.delta_m);
        assert!((288e6..=352e6).contains(&dc), "{dc}");
        assert!((10.8e6..=13.2e6).contains(&dm), "{dm}");
        assert!(r.gradient_norm < 1e-6);
        assert_eq!(r.hessian_definiteness, HessianDefiniteness::Max);
        let c = cooperativity(&p).unwrap();
        let (x, y) = r.normalized;
        assert!((x - y).abs() < 1e-6);
        assert!((4.0 * x * x / (c - 1.0) - 1.0).abs() < 1e-6);
        assert!((r.gain_over_resonant - (c + 1.0).powi(2) / (4.0 * c)).abs() < 1e-6 * r.gain_over_resonant);
    }

    #[test]
    fn weak_coupling_optimum_at_origin() {
        let mut p = paper();
        p.g = 0.3 * (p.kappa_total() * p.gamma).sqrt() / 2.0;
        let r = find_optimum(&p, &OptimizerOptions::default()).unwrap();
        assert!(r.normalized.0.abs() < 1e-9 && r.normalized.1.abs() < 1e-9);
        assert!((r.gain_over_resonant - 1.0).abs() < 1e-12);
        assert_eq!(r.hessian_definiteness, HessianDefiniteness::Max);
    }

    #[test]
    fn zero_coupling_is_degenerate() {
        let mut p = paper();
        p.g = 0.0;
        let r = find_optimum(&p, &OptimizerOptions::default()).unwrap();
        assert_eq!(r.hessian_definiteness, HessianDefiniteness::Degenerate);
        assert_eq!(r.efficiency, 0.0);
    }

    #[test]
    fn small_span_is_an_error() {
        let opts = OptimizerOptions {
            span: Some(SearchSpan { x: 5.0, y: 5.0 }),
            ..Default::default()
        };
        assert!(matches!(find_optimum(&paper(), &opts), Err(Error::SpanTooSmall { .. })));
    }

    #[test]
    fn origin_is_not_the_maximum_when_strongly_coupled() {
        let p = paper();
        let (gx, gy) = stationarity_residual(
            &p,
            Detunings {
                delta_c: 0.0,
                delta_m: 0.0,
            },
        )
        .unwrap();
        assert_eq!((gx, gy), (0.0, 0.0));
        let form = EfficiencyForm::new(&p).unwrap();
        assert_eq!(classify_hessian(&form, 0.0, 0.0), HessianDefiniteness::Saddle);
    }

    #[test]
    fn grid_doubling_invariance() {
        let p = paper();
        let a = find_optimum(&p, &OptimizerOptions::default()).unwrap();
        let b = find_optimum(
            &p,
            &OptimizerOptions {
                grid_points: 401,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((a.det.delta_c - b.det.delta_c).abs() / a.det.delta_c < 1e-6);
        assert!((a.det.delta_m - b.det.delta_m).abs() / a.det.delta_m < 1e-6);
        assert!((a.efficiency - b.efficiency).abs() / a.efficiency < 1e-6);
    }

    #[test]
    fn landscape_symmetry_and_maximum() {
        let p = paper();
        let spec = LandscapeSpec {
            span: SearchSpan { x: 20.0, y: 20.0 },
            points_c: 81,
            points_m: 81,
        };
        let l = efficiency_landscape(&p, &spec).unwrap();
        let n = 81;
        for i in 0..n {
            for j in 0..n {
                assert_eq!(l.efficiency[i][j], l.efficiency[n - 1 - i][n - 1 - j]);
            }
        }
        let r = find_optimum(&p, &OptimizerOptions::default()).unwrap();
        let (i, j, _) = l.maximum();
        let cell_c = l.delta_c[1] - l.delta_c[0];
        let cell_m = l.delta_m[1] - l.delta_m[0];
        // the grid maximum may land on either member of the symmetric pair
        let (dc, dm) = if l.delta_c[i] < 0.0 {
            (-l.delta_c[i], -l.delta_m[j])
        } else {
            (l.delta_c[i], l.delta_m[j])
        };
        assert!((dc - r.det.delta_c).abs() <= cell_c);
        assert!((dm - r.det.delta_m).abs() <= cell_m);
    }

    #[test]
    fn constrained_matches_unconstrained_on_optimal_trajectory() {
        let mut p = paper();
        let r = find_optimum(&p, &OptimizerOptions::default()).unwrap();
        p.omega_m = p.omega_c + r.det.delta_c - r.det.delta_m;
        let c = optimum_at_fixed_magnon(&p, 20.0 * p.kappa_total(), 4001, &r).unwrap();
        assert!((c.fraction_of_unconstrained - 1.0).abs() < 1e-9, "{c:?}");
        assert!((c.det.delta_c - r.det.delta_c).abs() / r.det.delta_c < 1e-5);
    }

    #[test]
    fn five_point_agrees_with_central() {
        let p = paper();
        let det = Detunings {
            delta_c: 3.0 * p.kappa_total(),
            delta_m: -2.0 * p.gamma,
        };
        let a = stationarity_residual(&p, det).unwrap();
        let b = gradient_five_point(&p, det, 1e-3).unwrap();
        assert!((a.0 - b.0).abs() <= 1e-6 * b.0.abs().max(1e-3));
        assert!((a.1 - b.1).abs() <= 1e-6 * b.1.abs().max(1e-3));
    }
}
