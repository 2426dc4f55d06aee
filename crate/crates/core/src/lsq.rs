//! Damped least squares (Levenberg–Marquardt) with finite-difference
//! Jacobians and a few small dense linear-algebra helpers.
//!
//! Problems here have at most a handful of parameters, so the normal
//! equations are solved directly after Jacobi (unit-diagonal) scaling.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative finite-difference step.
pub const FD_REL_STEP: f64 = 1e-6;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// JᵀJ.
    pub fn gram(&self) -> Matrix<T> {
        let n = self.cols;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = T::zero();
                for r in 0..self.rows {
                    s = s + self.get(r, i) * self.get(r, j);
                }
                a.set(i, j, s);
                a.set(j, i, s);
            }
        }
        a
    }

    /// Jᵀv.
    pub fn t_mul(&self, v: &[T]) -> Vec<T> {
        (0..self.cols)
            .map(|c| (0..self.rows).fold(T::zero(), |s, r| s + self.get(r, c) * v[r]))
            .collect()
    }

    pub fn to_nested(&self) -> Vec<Vec<T>> {
        (0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].to_vec())
            .collect()
    }
}

/// Central-difference step `max(rel·|x|, floor)`.
pub fn fd_step<T: Real>(x: T, floor: T) -> T {
    (T::lit(FD_REL_STEP) * x.abs()).max(floor)
}

/// Central finite-difference Jacobian of a vector function.
pub fn jacobian_fd<T, F>(f: F, params: &[T], steps: &[T]) -> Result<Matrix<T>>
where
    T: Real,
    F: Fn(&[T]) -> Result<Vec<T>>,
{
    if steps.len() != params.len() {
        return Err(Error::InvalidInput("one step per parameter required".into()));
    }
    let mut p = params.to_vec();
    let mut jac: Option<Matrix<T>> = None;
    for (j, &h) in steps.iter().enumerate() {
        let x = params[j];
        p[j] = x + h;
        let plus = f(&p)?;
        p[j] = x - h;
        let minus = f(&p)?;
        p[j] = x;
        // the actual spacing, after rounding of x ± h
        let span = (x + h) - (x - h);
        let m = jac.get_or_insert_with(|| Matrix::zeros(plus.len(), params.len()));
        if plus.len() != m.rows || minus.len() != m.rows {
            return Err(Error::Numerical("residual length changed between evaluations".into()));
        }
        for r in 0..m.rows {
            m.set(r, j, (plus[r] - minus[r]) / span);
        }
    }
    jac.ok_or_else(|| Error::InvalidInput("no parameters".into()))
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
pub fn cholesky_solve<T: Real>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s = s - l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Some(x)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix whose columns are the eigenvectors.
pub fn symmetric_eigen<T: Real>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, T::one());
    }
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off = off + m.get(i, j) * m.get(i, j);
            }
        }
        let diag = (0..n).fold(T::zero(), |s, i| s + m.get(i, i) * m.get(i, i));
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (T::two() * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| m.get(i, i)).collect(), v)
}

/// Moore–Penrose inverse of a symmetric positive semidefinite matrix,
/// computed after unit-diagonal scaling. Also returns the indices of
/// parameters dominating the discarded (near-null) directions.
pub fn psd_pseudo_inverse<T: Real>(a: &Matrix<T>, rel_cutoff: T) -> (Matrix<T>, Vec<usize>) {
    let n = a.rows;
    let scale: Vec<T> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d > T::zero() {
                d.sqrt()
            } else {
                T::one()
            }
        })
        .collect();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, a.get(i, j) / (scale[i] * scale[j]));
        }
    }
    let (vals, vecs) = symmetric_eigen(&s);
    let vmax = vals.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let mut inv = Matrix::zeros(n, n);
    let mut weak = Vec::new();
    for (k, &lam) in vals.iter().enumerate() {
        if !(lam > rel_cutoff * vmax) {
            // the parameter with the largest weight in this null direction
            let (idx, _) = (0..n)
                .map(|i| (i, vecs.get(i, k).abs()))
                .fold((0, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !weak.contains(&idx) {
                weak.push(idx);
            }
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                let v = inv.get(i, j) + vecs.get(i, k) * vecs.get(j, k) / lam;
                inv.set(i, j, v);
            }
        }
    }
    for i in 0..n {
        if a.get(i, i) == T::zero() && !weak.contains(&i) {
            weak.push(i);
        }
        for j in 0..n {
            inv.set(i, j, inv.get(i, j) / (scale[i] * scale[j]));
        }
    }
    weak.sort_unstable();
    (inv, weak)
}

/// A nonlinear least-squares problem over a real parameter vector.
pub trait LeastSquaresProblem<T: Real> {
    fn residuals(&self, params: &[T]) -> Result<Vec<T>>;

    /// Finite-difference step for parameter `index` at `value`.
    fn fd_step(&self, index: usize, value: T) -> T;

    /// Magnitude used to judge relative step size for `index`.
    fn typical(&self, index: usize, value: T) -> T {
        let _ = index;
        value.abs()
    }

    /// Projects a trial point back into the feasible set.
    fn project(&self, params: &mut [T]) {
        let _ = params;
    }
}

/// Stopping rules and damping schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqConfig<T> {
    pub max_iter: usize,
    /// Converged when every accepted relative step is below this.
    pub step_tol: T,
    /// Converged when |Jᵀr| falls below this fraction of its initial value.
    pub grad_tol: T,
    pub initial_damping: T,
    /// Damping multiplier after a rejected step.
    pub damping_up: T,
    /// Damping multiplier after an accepted step.
    pub damping_down: T,
}

impl<T: Real> Default for LsqConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 500,
            step_tol: T::lit(1e-9),
            grad_tol: T::lit(1e-9),
            initial_damping: T::lit(1e-3),
            damping_up: T::lit(10.0),
            damping_down: T::lit(0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqReport<T> {
    pub params: Vec<T>,
    /// Sum of squared residuals at `params`.
    pub cost: T,
    pub residual_count: usize,
    pub jacobian: Matrix<T>,
    pub gradient_norm: T,
    pub initial_gradient_norm: T,
    pub iterations: usize,
    pub converged: bool,
}

fn sum_sq<T: Real>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |s, &x| s + x * x)
}

fn norm<T: Real>(v: &[T]) -> T {
    sum_sq(v).sqrt()
}

fn jacobian_of<T: Real, P: LeastSquaresProblem<T>>(problem: &P, p: &[T]) -> Result<Matrix<T>> {
    let steps: Vec<T> = p.iter().enumerate().map(|(i, &x)| problem.fd_step(i, x)).collect();
    jacobian_fd(|q| problem.residuals(q), p, &steps)
}

/// Minimizes the sum of squared residuals with multiplicatively adapted
/// Marquardt damping. Never fails once the initial point evaluates: a run
/// that hits `max_iter` returns the best point with `converged = false`.
pub fn minimize<T: Real, P: LeastSquaresProblem<T>>(
    problem: &P,
    init: &[T],
    cfg: &LsqConfig<T>,
) -> Result<LsqReport<T>> {
    let n = init.len();
    let mut p = init.to_vec();
    problem.project(&mut p);
    let mut r = problem.residuals(&p)?;
    if r.len() < n {
        return Err(Error::InvalidInput(format!(
            "{} residuals cannot determine {n} parameters",
            r.len()
        )));
    }
    let mut cost = sum_sq(&r);
    let mut jac = jacobian_of(problem, &p)?;
    let mut grad = jac.t_mul(&r);
    let g0 = norm(&grad);
    let mut lambda = cfg.initial_damping;
    let mut converged = g0 == T::zero();
    let mut iterations = 0;

    while !converged && iterations < cfg.max_iter {
        iterations += 1;
        let a = jac.gram();
        let scale: Vec<T> = (0..n)
            .map(|i| {
                let d = a.get(i, i);
                if d > T::zero() {
                    d.sqrt()
                } else {
                    T::one()
                }
            })
            .collect();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, a.get(i, j) / (scale[i] * scale[j]));
            }
            m.set(i, i, m.get(i, i) + lambda);
        }
        let rhs: Vec<T> = (0..n).map(|i| -grad[i] / scale[i]).collect();
        let Some(z) = cholesky_solve(&m, &rhs) else {
            lambda = lambda * cfg.damping_up;
            continue;
        };
        let step: Vec<T> = z.iter().zip(&scale).map(|(&zi, &s)| zi / s).collect();
        let mut trial: Vec<T> = p.iter().zip(&step).map(|(&a, &b)| a + b).collect();
        problem.project(&mut trial);
        let rel_step = (0..n)
            .map(|i| (trial[i] - p[i]).abs() / problem.typical(i, p[i]).max(T::min_positive_value()))
            .fold(T::zero(), T::max);

        let trial_r = match problem.residuals(&trial) {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                lambda = lambda * cfg.damping_up;
                continue;
            }
            Err(e) => return Err(e),
        };
        let trial_cost = sum_sq(&trial_r);
        if trial_cost.is_finite() && trial_cost < cost {
            p = trial;
            r = trial_r;
            cost = trial_cost;
            lambda = (lambda * cfg.damping_down).max(T::lit(1e-12));
            jac = jacobian_of(problem, &p)?;
            grad = jac.t_mul(&r);
            if rel_step < cfg.step_tol || norm(&grad) < cfg.grad_tol * g0 || cost == T::zero() {
                converged = true;
            }
        } else {
            if rel_step < cfg.step_tol {
                // no representable improvement left
                converged = true;
            }
            lambda = lambda * cfg.damping_up;
            if lambda > T::lit(1e30) {
                break;
            }
        }
    }

    let gradient_norm = norm(&grad);
    Ok(LsqReport {
        params: p,
        cost,
        residual_count: r.len(),
        jacobian: jac,
        gradient_norm,
        initial_gradient_norm: g0,
        iterations,
        converged,
    })
}
