//! Subspace state-space identification (MOESP family, past-data instruments).
//!
//! The extended observability range is recovered from block-Hankel data
//! matrices: future outputs are projected onto the orthogonal complement of
//! the future inputs (removing the direct feedthrough term), using the past
//! inputs and outputs as instruments. `A` and `C` come from the shift
//! structure of the dominant left singular vectors; `B`, `D` and the initial
//! state follow from one linear-in-the-parameters output regression. All
//! projections run through QR/SVD factorizations, never normal equations.

use super::RegressionData;
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::scalar::{fl, lower, Scalar};
use crate::ss::DiscreteStateSpace;
use nalgebra::{ComplexField, DMatrix, DVector};

/// Result of a subspace identification run.
#[derive(Debug, Clone)]
pub struct SubspaceModel<T: Scalar = f64> {
    /// Identified discrete-time state-space model.
    pub ss: DiscreteStateSpace<T>,
    /// Singular values of the projected data matrix (descending); the decay
    /// after index `order - 1` indicates how well-determined the order is.
    pub singular_values: Vec<T>,
    /// Estimated initial state of the fitting record (the model is only
    /// defined up to a state-basis change, so this matches `ss`'s basis).
    pub initial_state: DVector<T>,
    /// Set when the singular-value gap at the requested order is weak
    /// (ratio below 1.5), i.e. the order choice is not well supported.
    pub order_gap_warning: bool,
    /// Set when the estimated `A` has spectral radius above one.
    pub unstable: bool,
}

/// Stacks `n_block_rows` shifted copies of the channel matrix `x` (channels
/// as rows, samples as columns) starting at sample `first`, `j` columns wide.
fn block_hankel<T: Scalar>(
    x: &DMatrix<T>,
    first: usize,
    n_block_rows: usize,
    j: usize,
) -> DMatrix<T> {
    let ch = x.nrows();
    let mut h = DMatrix::<T>::zeros(n_block_rows * ch, j);
    for br in 0..n_block_rows {
        for col in 0..j {
            for c in 0..ch {
                h[(br * ch + c, col)] = x[(c, first + br + col)];
            }
        }
    }
    h
}

fn spectral_radius_of<T: Scalar>(a: &DMatrix<T>) -> T {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.modulus())
        .fold(T::zero(), |acc, x| if x > acc { x } else { acc })
}

/// Identifies a discrete-time state-space model of the requested `order`
/// from input/output data, using `block_rows` Hankel block rows (must exceed
/// the order; larger values average more data per singular direction).
pub fn subspace_identify<T: Scalar>(
    data: &RegressionData<T>,
    order: usize,
    block_rows: usize,
) -> Result<SubspaceModel<T>> {
    let m = data.n_outputs();
    let p = data.n_inputs();
    let n = order;
    let r = block_rows;
    if n == 0 {
        return Err(Error::invalid("model order must be at least 1"));
    }
    if r < n + 1 {
        return Err(Error::invalid(format!(
            "need block_rows >= order + 1 (got {r} for order {n})"
        )));
    }
    let n_s = data.len();
    if n_s < 2 * r {
        return Err(Error::invalid("record shorter than the Hankel window"));
    }
    let j = n_s - 2 * r + 1;
    let min_cols = 2 * r * (m + p);
    if j < min_cols {
        return Err(Error::invalid(format!(
            "need at least {} samples for order {n} with {r} block rows; got {n_s}",
            2 * r - 1 + min_cols
        )));
    }

    // Past/future block-Hankel matrices and the instrument stack.
    let u_past = block_hankel(&data.u, 0, r, j);
    let y_past = block_hankel(&data.y, 0, r, j);
    let u_fut = block_hankel(&data.u, r, r, j);
    let y_fut = block_hankel(&data.y, r, r, j);
    let mut instruments = DMatrix::<T>::zeros(r * (p + m), j);
    instruments.rows_mut(0, r * p).copy_from(&u_past);
    instruments.rows_mut(r * p, r * m).copy_from(&y_past);

    // Project the future outputs onto the orthogonal complement of the
    // future inputs, then correlate with the instruments:
    //   G = Y_f (I - Q1 Q1') Phi'   with Q1 an orthonormal basis of U_f'.
    let q1 = u_fut.transpose().qr().q(); // j x (r p)
    let yf_phit = &y_fut * instruments.transpose(); // (r m) x r(p+m)
    let correlation_scale = yf_phit.norm();
    let yf_q1 = &y_fut * &q1;
    let q1t_phit = q1.transpose() * instruments.transpose();
    let g = yf_phit - yf_q1 * q1t_phit;

    let svd = g.svd(true, false);
    let singular_values: Vec<T> = svd.singular_values.iter().copied().collect();
    if n > singular_values.len() {
        return Err(Error::invalid("order exceeds the projected matrix rank bound"));
    }
    // The requested order must be supported by singular values that stand
    // clear of the floating-point floor of the projection (relative to the
    // unprojected correlation magnitude); otherwise the data carry no
    // dynamic content at this order (e.g. a purely static relation).
    if singular_values[n - 1] <= fl::<T>(1e-10) * correlation_scale {
        return Err(Error::DegenerateModel(
            "requested order exceeds the numerical rank of the data".into(),
        ));
    }
    let order_gap_warning = n < singular_values.len()
        && singular_values[n] > T::zero()
        && singular_values[n - 1] / singular_values[n] < fl::<T>(1.5);

    // Extended observability estimate O_r = U1 * S1^(1/2).
    let u_mat = svd.u.as_ref().expect("left singular vectors requested");
    let mut obs = DMatrix::<T>::zeros(r * m, n);
    for c in 0..n {
        let s = singular_values[c].sqrt();
        for row in 0..r * m {
            obs[(row, c)] = u_mat[(row, c)] * s;
        }
    }
    let c_hat = obs.rows(0, m).into_owned();
    let a_hat = lstsq(
        &obs.rows(0, (r - 1) * m).into_owned(),
        &obs.rows(m, (r - 1) * m).into_owned(),
        fl::<T>(1e-10),
    )?
    .solution;

    let rho = spectral_radius_of(&a_hat);
    let unstable = rho > T::one();
    let unknowns = n * p + m * p + n;
    // For unstable estimates, cap the output-regression horizon so powers of
    // A stay bounded (growth limited to ~1e8) while keeping the regression
    // comfortably overdetermined.
    let horizon = if unstable {
        let k_growth = (fl::<T>(1e8).ln() / rho.ln()).floor();
        let k_growth = lower(k_growth).max(1.0) as usize;
        let k_min = unknowns.div_ceil(m) + n + 10;
        n_s.min(k_growth.max(k_min))
    } else {
        n_s
    };

    // Joint regression for B, D and x0: the output is linear in them,
    //   y(k) = sum_l C Xi_l(k) b_l + sum_l u_l(k) d_l + C A^k x0,
    // with Xi_l(k+1) = A Xi_l(k) + u_l(k) I tracking the input history.
    let rows = m * horizon;
    let mut reg = DMatrix::<T>::zeros(rows, unknowns);
    let mut rhs = DMatrix::<T>::zeros(rows, 1);
    let mut xi: Vec<DMatrix<T>> = vec![DMatrix::<T>::zeros(n, n); p];
    let mut a_pow = DMatrix::<T>::identity(n, n);
    for k in 0..horizon {
        for (l, xi_l) in xi.iter().enumerate() {
            let c_xi = &c_hat * xi_l;
            reg.view_mut((m * k, l * n), (m, n)).copy_from(&c_xi);
            for rr in 0..m {
                reg[(m * k + rr, n * p + l * m + rr)] = data.u[(l, k)];
            }
        }
        let c_pow = &c_hat * &a_pow;
        reg.view_mut((m * k, n * p + m * p), (m, n)).copy_from(&c_pow);
        for rr in 0..m {
            rhs[(m * k + rr, 0)] = data.y[(rr, k)];
        }
        for (l, xi_l) in xi.iter_mut().enumerate() {
            let mut next = &a_hat * &*xi_l;
            let ul = data.u[(l, k)];
            for d in 0..n {
                next[(d, d)] += ul;
            }
            *xi_l = next;
        }
        a_pow = &a_hat * a_pow;
    }
    let theta = lstsq(&reg, &rhs, fl::<T>(1e-10))?.solution;

    let mut b_hat = DMatrix::<T>::zeros(n, p);
    for l in 0..p {
        for i in 0..n {
            b_hat[(i, l)] = theta[(l * n + i, 0)];
        }
    }
    let mut d_hat = DMatrix::<T>::zeros(m, p);
    for l in 0..p {
        for i in 0..m {
            d_hat[(i, l)] = theta[(n * p + l * m + i, 0)];
        }
    }
    let initial_state =
        DVector::<T>::from_iterator(n, (0..n).map(|i| theta[(n * p + m * p + i, 0)]));

    let ss = DiscreteStateSpace::new(a_hat, b_hat, c_hat, d_hat, data.dt)?;
    Ok(SubspaceModel { ss, singular_values, initial_state, order_gap_warning, unstable })
}
