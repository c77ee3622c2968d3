//! Extreme eigenvalues of a Hermitian map given only by its action, via
//! Lanczos with full reorthogonalization.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative residual tolerance for the extreme Ritz pairs.
pub const EIGEN_TOL: f64 = 1e-6;
/// Cap on Lanczos steps; the Krylov space is exhausted after `dim` anyway.
pub const EIGEN_MAX_STEPS: usize = 10_000;

/// Smallest and largest Ritz values with their residual norms `||Av - θv||`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremes<T> {
    pub min: T,
    pub min_resid: T,
    pub max: T,
    pub max_resid: T,
    pub steps: usize,
}

/// Runs Lanczos from a seeded random start until both extreme Ritz pairs
/// have residual below `EIGEN_TOL · max(reference, |θ|)`, or the Krylov
/// space becomes invariant.
pub fn lanczos_extremes<T: Real>(
    apply: impl Fn(&[Complex<T>]) -> Vec<Complex<T>>,
    dim: usize,
    reference: T,
    seed: u64,
) -> Result<Extremes<T>> {
    if dim == 0 {
        return Err(Error::Config("eigenproblem of dimension 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + seed);
    let mut q: Vec<Complex<T>> = (0..dim)
        .map(|_| Complex::new(T::lit(rng.random_range(-1.0..1.0)), T::lit(rng.random_range(-1.0..1.0))))
        .collect();
    let n = norm(&q);
    q.iter_mut().for_each(|x| *x /= n);

    let tol = T::lit(EIGEN_TOL);
    let breakdown = T::epsilon() * T::lit(1e2) * reference.max(T::min_positive_value());
    let mut basis = vec![q];
    let mut alpha: Vec<T> = Vec::new();
    let mut beta: Vec<T> = Vec::new();
    loop {
        let k = basis.len() - 1;
        let mut w = apply(&basis[k]);
        alpha.push(inner(&basis[k], &w).re);
        for _ in 0..2 {
            for v in &basis {
                let h = inner(v, &w);
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= b * h);
            }
        }
        let b = norm(&w);
        let steps = alpha.len();
        let (min, s_min) = ritz_pair(&alpha, &beta, 0);
        let (max, s_max) = ritz_pair(&alpha, &beta, steps - 1);
        if steps == dim || b <= breakdown {
            return Ok(Extremes { min, min_resid: T::zero(), max, max_resid: T::zero(), steps });
        }
        let (min_resid, max_resid) = (b * s_min.abs(), b * s_max.abs());
        if min_resid <= tol * reference.max(min.abs()) && max_resid <= tol * reference.max(max.abs()) {
            return Ok(Extremes { min, min_resid, max, max_resid, steps });
        }
        if steps >= EIGEN_MAX_STEPS {
            return Err(Error::NoConvergence { iterations: steps });
        }
        w.iter_mut().for_each(|x| *x /= b);
        beta.push(b);
        basis.push(w);
    }
}

fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

fn norm<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|x| x.norm_sqr()).fold(T::zero(), |s, x| s + x).sqrt()
}

/// Eigenvalue `index` (ascending) of the symmetric tridiagonal matrix with
/// diagonal `alpha` and off-diagonal `beta`, and the last component of its
/// unit eigenvector.
fn ritz_pair<T: Real>(alpha: &[T], beta: &[T], index: usize) -> (T, T) {
    let theta = tridiag_eigenvalue(alpha, beta, index);
    (theta, last_component(alpha, beta, theta))
}

/// Number of eigenvalues strictly below `x` (Sturm sequence).
fn sturm_count<T: Real>(alpha: &[T], beta: &[T], x: T) -> usize {
    let tiny = T::min_positive_value();
    let mut count = 0;
    let mut d = T::one();
    for i in 0..alpha.len() {
        let off = if i == 0 { T::zero() } else { beta[i - 1] * beta[i - 1] / d };
        d = alpha[i] - x - off;
        if d == T::zero() {
            d = -tiny;
        }
        if d < T::zero() {
            count += 1;
        }
    }
    count
}

fn tridiag_eigenvalue<T: Real>(alpha: &[T], beta: &[T], index: usize) -> T {
    let m = alpha.len();
    let radius = |i: usize| {
        let l = if i > 0 { beta[i - 1].abs() } else { T::zero() };
        let r = if i + 1 < m { beta[i].abs() } else { T::zero() };
        l + r
    };
    let mut lo = (0..m).map(|i| alpha[i] - radius(i)).fold(T::infinity(), T::min);
    let mut hi = (0..m).map(|i| alpha[i] + radius(i)).fold(T::neg_infinity(), T::max);
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, beta, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}

/// Inverse iteration with a slightly perturbed shift.
fn last_component<T: Real>(alpha: &[T], beta: &[T], theta: T) -> T {
    let m = alpha.len();
    if m == 1 {
        return T::one();
    }
    let scale = alpha.iter().chain(beta).fold(T::zero(), |s, x| s.max(x.abs())).max(T::min_positive_value());
    let shift = theta + scale * T::epsilon() * T::lit(4.0);
    let guard = scale * T::epsilon();
    let mut v = vec![T::one(); m];
    for _ in 0..3 {
        // Thomas algorithm on (T - shift I) s = v.
        let mut diag: Vec<T> = alpha.iter().map(|a| *a - shift).collect();
        let mut rhs = v.clone();
        for i in 1..m {
            if diag[i - 1].abs() < guard {
                diag[i - 1] = guard;
            }
            let f = beta[i - 1] / diag[i - 1];
            diag[i] -= f * beta[i - 1];
            let carry = f * rhs[i - 1];
            rhs[i] -= carry;
        }
        if diag[m - 1].abs() < guard {
            diag[m - 1] = guard;
        }
        v[m - 1] = rhs[m - 1] / diag[m - 1];
        for i in (0..m - 1).rev() {
            v[i] = (rhs[i] - beta[i] * v[i + 1]) / diag[i];
        }
        let n = v.iter().fold(T::zero(), |s, x| s + *x * *x).sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    }
    v[m - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_apply(d: Vec<f64>) -> impl Fn(&[Complex<f64>]) -> Vec<Complex<f64>> {
        move |v| v.iter().zip(&d).map(|(x, s)| x * *s).collect()
    }

    #[test]
    fn tridiagonal_eigenvalues() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        assert!((tridiag_eigenvalue::<f64>(&[2.0, 2.0], &[1.0], 0) - 1.0).abs() < 1e-14);
        assert!((tridiag_eigenvalue::<f64>(&[2.0, 2.0], &[1.0], 1) - 3.0).abs() < 1e-14);
        assert!((last_component::<f64>(&[2.0, 2.0], &[1.0], 3.0).abs() - 0.5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn diagonal_spectrum() {
        let d: Vec<f64> = (0..40).map(|i| 0.5 + i as f64 / 40.0).collect();
        let e = lanczos_extremes(diag_apply(d), 40, 1.0, 3).unwrap();
        assert!((e.max - 1.475).abs() < 1e-10, "{e:?}");
        assert!((e.min - 0.5).abs() < 1e-10, "{e:?}");
    }

    #[test]
    fn clustered_top() {
        let mut d = vec![1.0, 1.0 + 1e-4, 1.0 + 2e-4];
        d.extend((0..20).map(|i| 0.1 + i as f64 * 0.01));
        let e = lanczos_extremes(diag_apply(d), 23, 1.0, 9).unwrap();
        assert!((e.max - (1.0 + 2e-4)).abs() < 1e-9, "{e:?}");
        assert!(e.max + e.max_resid >= 1.0 + 2e-4 - 1e-15);
    }

    #[test]
    fn f32_works() {
        let e = lanczos_extremes(|v: &[Complex<f32>]| v.iter().map(|x| x * 2.0).collect(), 5, 1.0, 0).unwrap();
        assert!((e.max - 2.0).abs() < 1e-5 && (e.min - 2.0).abs() < 1e-5);
    }
}
