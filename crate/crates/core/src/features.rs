//! Dip/peak location and phase unwrapping on sampled spectra.

use crate::scalar::Real;

/// Indices of strict interior local minima, deepest first.
pub fn local_minima<T: Real>(v: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] < v[i - 1] && v[i] <= v[i + 1])
        .collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
    idx
}

/// Indices of strict interior local maxima, highest first.
pub fn local_maxima<T: Real>(v: &[T]) -> Vec<usize> {
    let neg: Vec<T> = v.iter().map(|&x| -x).collect();
    local_minima(&neg)
}

/// Index of the smallest element (first on ties).
pub fn argmin<T: Real>(v: &[T]) -> Option<usize> {
    v.iter()
        .enumerate()
        .fold(None, |best: Option<(usize, T)>, (i, &x)| match best {
            Some((_, b)) if !(x < b) => best,
            _ => Some((i, x)),
        })
        .map(|(i, _)| i)
}

pub fn argmax<T: Real>(v: &[T]) -> Option<usize> {
    let neg: Vec<T> = v.iter().map(|&x| -x).collect();
    argmin(&neg)
}

/// Removes 2π jumps from a phase sequence.
pub fn unwrap_phase<T: Real>(phase: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = T::zero();
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let d = p - phase[i - 1];
            if d > T::PI() {
                offset = offset - T::two_pi();
            } else if d < -T::PI() {
                offset = offset + T::two_pi();
            }
        }
        out.push(p + offset);
    }
    out
}

/// Full width at the level halfway between `baseline` and the dip floor
/// `v[i]`, measured on the abscissa `x`. `None` when a side never recovers
/// within the data.
pub fn dip_width<T: Real>(x: &[T], v: &[T], i: usize, baseline: T) -> Option<T> {
    let level = (baseline + v[i]) * T::half();
    let mut l = i;
    while l > 0 && v[l] < level {
        l -= 1;
    }
    let mut r = i;
    while r + 1 < v.len() && v[r] < level {
        r += 1;
    }
    if v[l] < level || v[r] < level {
        return None;
    }
    let interp = |a: usize, b: usize| {
        let (va, vb) = (v[a], v[b]);
        if vb == va {
            x[a]
        } else {
            x[a] + (x[b] - x[a]) * (level - va) / (vb - va)
        }
    };
    Some(interp(r - 1, r) - interp(l + 1, l))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minima_sorted_by_depth() {
        let v = [1.0, 0.5, 1.0, 0.2, 1.0, 0.7, 1.0];
        assert_eq!(local_minima(&v), vec![3, 1, 5]);
        assert_eq!(local_maxima(&v), vec![2, 4]);
        assert_eq!(argmin(&v), Some(3));
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), Some(1));
    }

    #[test]
    fn unwrap_removes_jumps() {
        let raw: Vec<f64> = (0..100)
            .map(|k| (k as f64 * 0.2).rem_euclid(std::f64::consts::TAU) - 3.0)
            .collect();
        let u = unwrap_phase(&raw);
        for w in u.windows(2) {
            assert!((w[1] - w[0] - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn lorentzian_dip_width() {
        let x: Vec<f64> = (0..2001).map(|k| (k as f64 - 1000.0) * 0.01).collect();
        let w = 2.0;
        let v: Vec<f64> = x.iter().map(|&t| 1.0 - 0.8 / (1.0 + (2.0 * t / w).powi(2))).collect();
        let got = dip_width(&x, &v, 1000, 1.0).unwrap();
        assert!((got - w).abs() < 1e-3);
    }
}
