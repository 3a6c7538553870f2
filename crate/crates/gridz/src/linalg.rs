//! Dense linear-algebra kernels shared by the identification routines.
//!
//! Everything here works on dynamically sized nalgebra matrices over a
//! [`Scalar`]. The two workhorses are:
//!
//! * [`lstsq`] — minimum-norm linear least squares through a thin QR followed
//!   by an SVD of the triangular factor. Regressions are never solved through
//!   normal equations; the SVD supplies the rank decision and the condition
//!   number that error reporting needs.
//! * [`logm`] — principal real matrix logarithm by inverse scaling and
//!   squaring: repeated Denman–Beavers square roots bring the iterate close
//!   to the identity, then an [8/8] Padé approximant (in Gauss–Legendre
//!   partial-fraction form) evaluates `log(I + Y)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{fl, lower, Scalar};

/// Result of a least-squares solve.
#[derive(Debug, Clone)]
pub struct Lstsq<T: Scalar = f64> {
    /// Minimum-norm solution `X` of `min ||A X - B||_F`.
    pub solution: DMatrix<T>,
    /// Singular values of `A` in decreasing order.
    pub singular_values: DVector<T>,
    /// Number of singular values above `rcond * sigma_max`.
    pub rank: usize,
    /// `sigma_max / sigma_min` (infinite when `A` is exactly singular).
    pub condition: f64,
}

/// Minimum-norm least squares `min ||A X - B||_F` via QR + SVD.
///
/// `rcond` is the relative pseudo-inversion threshold: singular values below
/// `rcond * sigma_max` are treated as zero, so rank-deficient problems yield
/// the minimum-norm solution instead of blowing up.
pub fn lstsq<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, rcond: T) -> Result<Lstsq<T>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::invalid("lstsq: empty coefficient matrix"));
    }
    if a.nrows() != b.nrows() {
        return Err(Error::invalid(format!(
            "lstsq: A has {} rows but B has {}",
            a.nrows(),
            b.nrows()
        )));
    }

    // Reduce tall problems with a thin QR first; singular values are
    // preserved and the SVD then runs on an ncols x ncols triangle.
    let (reduced, rhs) = if a.nrows() > a.ncols() {
        let qr = a.clone().qr();
        let qt_b = qr.q().transpose() * b;
        (qr.unpack_r(), qt_b)
    } else {
        (a.clone(), b.clone())
    };

    let svd = reduced.svd(true, true);
    let sigma = svd.singular_values.clone();
    let sigma_max = sigma.max();
    let eps = rcond * sigma_max;
    let rank = sigma.iter().filter(|s| **s > eps).count();
    let sigma_min = if sigma.is_empty() { T::zero() } else { sigma[sigma.len() - 1] };
    let condition = if sigma_min > T::zero() {
        lower(sigma_max / sigma_min)
    } else {
        f64::INFINITY
    };

    let solution = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::Numerical(format!("lstsq: SVD solve failed: {e}")))?;

    Ok(Lstsq { solution, singular_values: sigma, rank, condition })
}

/// Maximum absolute column sum (operator 1-norm).
pub fn one_norm<T: Scalar>(m: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for j in 0..m.ncols() {
        let mut s = T::zero();
        for i in 0..m.nrows() {
            s += m[(i, j)].abs();
        }
        if s > worst {
            worst = s;
        }
    }
    worst
}

/// 8-point Gauss–Legendre rule on [0, 1] as (node, weight) pairs.
///
/// Applied to `Y (I + t Y)^{-1}` this evaluates the [8/8] Padé approximant of
/// `log(I + Y)`, accurate to well below f64 round-off for `||Y|| <= 0.25`.
const GL8: [(f64, f64); 8] = [
    (0.019855071751231856, 0.050614268145188129),
    (0.101666761293186630, 0.111190517226687235),
    (0.237233795041835510, 0.156853322938943643),
    (0.408282678752175097, 0.181341891689180991),
    (0.591717321247824903, 0.181341891689180991),
    (0.762766204958164490, 0.156853322938943643),
    (0.898333238706813370, 0.111190517226687235),
    (0.980144928248768144, 0.050614268145188129),
];

/// Principal real matrix logarithm.
///
/// Preconditions: square input with no eigenvalue on the closed negative real
/// axis (the principal real logarithm does not exist there). Violations are
/// reported as [`Error::Conversion`] naming the offending eigenvalue.
pub fn logm<T: Scalar>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !a.is_square() {
        return Err(Error::invalid("logm: matrix must be square"));
    }
    let n = a.nrows();
    if n == 0 {
        return Err(Error::invalid("logm: empty matrix"));
    }

    for lam in a.complex_eigenvalues().iter() {
        let mag = (lam.re * lam.re + lam.im * lam.im).sqrt();
        let axis_tol = fl::<T>(1e-12) * if mag > T::zero() { mag } else { T::one() };
        if lam.re <= axis_tol && lam.im.abs() <= axis_tol {
            return Err(Error::Conversion(format!(
                "eigenvalue {:.6e}{:+.6e}i lies on the closed negative real axis; \
                 principal matrix logarithm undefined",
                lower(lam.re),
                lower(lam.im)
            )));
        }
    }

    let identity = DMatrix::<T>::identity(n, n);
    let mut x = a.clone();
    let mut roots = 0u32;
    let target = fl::<T>(0.25);
    while one_norm(&(&x - &identity)) > target {
        if roots >= 64 {
            return Err(Error::Numerical(
                "logm: inverse scaling did not contract the iterate".into(),
            ));
        }
        x = sqrtm_denman_beavers(&x)?;
        roots += 1;
    }

    let y = &x - &identity;
    let mut acc = DMatrix::<T>::zeros(n, n);
    for (node, weight) in GL8 {
        let shifted = &identity + &y * fl::<T>(node);
        let term = shifted
            .lu()
            .solve(&y)
            .ok_or_else(|| Error::Numerical("logm: singular Padé denominator".into()))?;
        acc += term * fl::<T>(weight);
    }

    Ok(acc * fl::<T>(f64::powi(2.0, roots as i32)))
}

/// Denman–Beavers iteration for the principal matrix square root.
fn sqrtm_denman_beavers<T: Scalar>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<T>::identity(n, n);
    let tol = T::default_epsilon() * fl::<T>(16.0);

    for _ in 0..60 {
        let y_inv = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("sqrtm: singular iterate".into()))?;
        let z_inv = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("sqrtm: singular iterate".into()))?;
        let y_next = (&y + z_inv) * fl::<T>(0.5);
        let z_next = (&z + y_inv) * fl::<T>(0.5);

        let denom = one_norm(&y_next);
        let delta = one_norm(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if denom > T::zero() && delta / denom < tol {
            return Ok(y);
        }
    }
    Err(Error::Numerical("sqrtm: Denman–Beavers iteration did not converge".into()))
}
