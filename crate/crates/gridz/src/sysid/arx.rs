//! MIMO ARX identification by prediction-error least squares.
//!
//! Model structure (matrix polynomials in the delay operator):
//! `y(k) + A_1 y(k-1) + ... + A_na y(k-na) = B_1 u(k-1) + ... + B_nb u(k-nb) + e(k)`,
//! with the leading output coefficient normalized to the identity. The
//! one-step-ahead predictor is linear in the coefficients, so the estimate is
//! a single multivariate least-squares solve via orthogonal factorization.

use super::RegressionData;
use crate::error::{Error, Result};
use crate::freq::TransferModel;
use crate::linalg::lstsq;
use crate::scalar::{fl, lower, Scalar};
use crate::ss::DiscreteStateSpace;
use nalgebra::{Complex, DMatrix, DVector, Matrix2};

/// Identified ARX model.
#[derive(Debug, Clone, PartialEq)]
pub struct ArxModel<T: Scalar = f64> {
    /// Output (autoregressive) order.
    pub na: usize,
    /// Input (exogenous) order.
    pub nb: usize,
    /// Output coefficient matrices A_1..A_na, each m x m.
    pub a_coeffs: Vec<DMatrix<T>>,
    /// Input coefficient matrices B_1..B_nb, each m x p.
    pub b_coeffs: Vec<DMatrix<T>>,
    /// Sample interval, seconds.
    pub dt: T,
    /// Sample covariance of the one-step prediction errors, m x m.
    pub residual_covariance: DMatrix<T>,
}

impl<T: Scalar> ArxModel<T> {
    /// Validated constructor.
    pub fn new(
        a_coeffs: Vec<DMatrix<T>>,
        b_coeffs: Vec<DMatrix<T>>,
        dt: T,
        residual_covariance: DMatrix<T>,
    ) -> Result<Self> {
        if a_coeffs.is_empty() && b_coeffs.is_empty() {
            return Err(Error::invalid("model needs at least one coefficient block"));
        }
        if dt <= T::zero() {
            return Err(Error::invalid("sample interval dt must be positive"));
        }
        let m = residual_covariance.nrows();
        if residual_covariance.ncols() != m {
            return Err(Error::invalid("residual covariance must be square"));
        }
        for a in &a_coeffs {
            if a.nrows() != m || a.ncols() != m {
                return Err(Error::invalid("A coefficients must be m x m"));
            }
        }
        let p = b_coeffs.first().map_or(m, |b| b.ncols());
        for b in &b_coeffs {
            if b.nrows() != m || b.ncols() != p {
                return Err(Error::invalid("B coefficients must be m x p"));
            }
        }
        Ok(Self {
            na: a_coeffs.len(),
            nb: b_coeffs.len(),
            a_coeffs,
            b_coeffs,
            dt,
            residual_covariance,
        })
    }

    /// Number of output channels.
    pub fn n_outputs(&self) -> usize {
        self.residual_covariance.nrows()
    }

    /// Number of input channels.
    pub fn n_inputs(&self) -> usize {
        self.b_coeffs.first().map_or(self.n_outputs(), |b| b.ncols())
    }

    /// First sample index with a full regressor available.
    pub fn min_lag(&self) -> usize {
        self.na.max(self.nb)
    }

    /// Evaluates G(z) = A(z)^-1 B(z) at a complex point `z`.
    pub fn transfer_at(&self, z: Complex<T>) -> Result<DMatrix<Complex<T>>> {
        let m = self.n_outputs();
        let p = self.n_inputs();
        let zinv = Complex::new(T::one(), T::zero()) / z;
        let mut a = DMatrix::<Complex<T>>::identity(m, m);
        let mut w = Complex::new(T::one(), T::zero());
        for ai in &self.a_coeffs {
            w *= zinv;
            for i in 0..m {
                for j in 0..m {
                    a[(i, j)] += w * Complex::new(ai[(i, j)], T::zero());
                }
            }
        }
        let mut b = DMatrix::<Complex<T>>::zeros(m, p);
        let mut w = Complex::new(T::one(), T::zero());
        for bj in &self.b_coeffs {
            w *= zinv;
            for i in 0..m {
                for j in 0..p {
                    b[(i, j)] += w * Complex::new(bj[(i, j)], T::zero());
                }
            }
        }
        a.lu()
            .solve(&b)
            .ok_or_else(|| Error::Numerical(format!("A(z) singular at z = {z}")))
    }

    /// Deterministic observer-form state-space realization (order
    /// m * max(na, nb); use a minimal realization to strip the padding).
    ///
    /// With L = max(na, nb) and zero-padded coefficient blocks, the states
    /// satisfy `x_i(k+1) = x_{i+1}(k) - A_i y(k) + B_i u(k)` with
    /// `y(k) = x_1(k)`, reproducing `y = A(z)^-1 B(z) u` exactly.
    pub fn to_state_space(&self) -> Result<DiscreteStateSpace<T>> {
        let m = self.n_outputs();
        let p = self.n_inputs();
        let l = self.min_lag().max(1);
        let n = m * l;
        let mut a = DMatrix::<T>::zeros(n, n);
        let mut b = DMatrix::<T>::zeros(n, p);
        for i in 0..l {
            if i + 1 < l {
                for r in 0..m {
                    a[(i * m + r, (i + 1) * m + r)] = T::one();
                }
            }
            if i < self.na {
                let blk = &self.a_coeffs[i];
                for r in 0..m {
                    for c in 0..m {
                        a[(i * m + r, c)] = -blk[(r, c)] + a[(i * m + r, c)];
                    }
                }
            }
            if i < self.nb {
                b.view_mut((i * m, 0), (m, p)).copy_from(&self.b_coeffs[i]);
            }
        }
        let mut c = DMatrix::<T>::zeros(m, n);
        for r in 0..m {
            c[(r, r)] = T::one();
        }
        DiscreteStateSpace::new(a, b, c, DMatrix::zeros(m, p), self.dt)
    }
}

impl<T: Scalar> TransferModel<T> for ArxModel<T> {
    fn impedance_at(&self, f_hz: T) -> Result<Matrix2<Complex<T>>> {
        if self.n_outputs() != 2 || self.n_inputs() != 2 {
            return Err(Error::invalid("impedance evaluation expects a 2x2 model"));
        }
        let nyquist = fl::<T>(0.5) / self.dt;
        if f_hz >= nyquist {
            return Err(Error::invalid(format!(
                "frequency {} Hz is at or above the Nyquist rate {} Hz",
                lower(f_hz),
                lower(nyquist)
            )));
        }
        let theta = T::two_pi() * f_hz * self.dt;
        let z = Complex::new(theta.cos(), theta.sin());
        let g = self.transfer_at(z)?;
        Ok(Matrix2::new(g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]))
    }
}

/// Fits an ARX model of orders `(na, nb)` by least squares on the regression
/// rows k = max(na, nb) .. N (no zero padding, avoiding transient bias).
///
/// The regressor is `phi(k) = [-y(k-1); ..; -y(k-na); u(k-1); ..; u(k-nb)]`
/// and the joint solve uses QR/SVD, never normal equations. A rank-deficient
/// regressor is accepted only when the data are still fit essentially
/// exactly (e.g. an identically zero output); otherwise the condition number
/// is reported as an error.
pub fn arx_identify<T: Scalar>(
    data: &RegressionData<T>,
    na: usize,
    nb: usize,
) -> Result<ArxModel<T>> {
    let m = data.n_outputs();
    let p = data.n_inputs();
    if na + nb == 0 {
        return Err(Error::invalid("need na + nb >= 1"));
    }
    let n_cols = na * m + nb * p;
    let n_s = data.len();
    if n_s <= 4 * n_cols {
        return Err(Error::invalid(format!(
            "need more than {} samples for orders ({na},{nb}); got {n_s}",
            4 * n_cols
        )));
    }
    let kmin = na.max(nb);
    let n_reg = n_s - kmin;
    let mut phi = DMatrix::<T>::zeros(n_reg, n_cols);
    let mut rhs = DMatrix::<T>::zeros(n_reg, m);
    for t in 0..n_reg {
        let k = kmin + t;
        for i in 1..=na {
            for r in 0..m {
                phi[(t, (i - 1) * m + r)] = -data.y[(r, k - i)];
            }
        }
        for j in 1..=nb {
            for r in 0..p {
                phi[(t, na * m + (j - 1) * p + r)] = data.u[(r, k - j)];
            }
        }
        for r in 0..m {
            rhs[(t, r)] = data.y[(r, k)];
        }
    }
    let sol = lstsq(&phi, &rhs, fl::<T>(1e-10))?;
    if sol.rank < n_cols {
        let residual = (&rhs - &phi * &sol.solution).norm();
        let scale = rhs.norm();
        if scale > T::zero() && residual > fl::<T>(1e-8) * scale {
            return Err(Error::IllConditioned { condition: lower(sol.condition) });
        }
    }
    let theta = sol.solution;
    let mut a_coeffs = Vec::with_capacity(na);
    for i in 0..na {
        a_coeffs.push(theta.rows(i * m, m).transpose());
    }
    let mut b_coeffs = Vec::with_capacity(nb);
    for j in 0..nb {
        b_coeffs.push(theta.rows(na * m + j * p, p).transpose());
    }
    let resid = &rhs - &phi * &theta;
    let cov = resid.transpose() * &resid / fl::<T>(n_reg as f64);
    ArxModel::new(a_coeffs, b_coeffs, data.dt, cov)
}

/// Pole radius above which prefilter poles are pulled back inside the unit
/// circle so the all-pole weighting filter stays stable and bounded.
const MAX_PREFILTER_POLE_RADIUS: f64 = 0.9995;

/// Least-squares ARX fit refined by iterative denominator prefiltering
/// (the classical Steiglitz-McBride scheme).
///
/// The plain equation-error fit weights the frequency response error by
/// |A(e^{j omega})|^2. When the system poles crowd the unit circle - the
/// normal situation for a lightly damped plant sampled well above its
/// resonances - that weight collapses at low frequencies and the fit there
/// is dominated by noise. Each refinement pass filters input and output by
/// the stabilized inverse of the current common denominator det A(z) and
/// refits, which asymptotically flattens the weighting. Because the
/// iteration is not globally convergent, every candidate (including the
/// plain fit) is scored by its free-run simulation error on the raw data
/// and the best one is returned, with its residual covariance recomputed on
/// the raw data. With `refinements = 0` this is exactly [`arx_identify`];
/// on data the plain fit explains essentially exactly, the plain fit wins
/// and nothing changes.
///
/// Supports the scalar and 2x2 cases (the grid application).
pub fn arx_identify_prefiltered<T: Scalar>(
    data: &RegressionData<T>,
    na: usize,
    nb: usize,
    refinements: usize,
) -> Result<ArxModel<T>> {
    if data.n_outputs() > 2 {
        return Err(Error::invalid("prefiltered identification supports m <= 2 outputs"));
    }
    let plain = arx_identify(data, na, nb)?;
    if refinements == 0 {
        return Ok(plain);
    }
    let mut best_err = arx_simulation_error(&plain, data)?;
    let mut best = plain.clone();
    let mut current = plain;
    for _ in 0..refinements {
        // A degenerate or ill-conditioned refinement step ends the search;
        // the best candidate so far is still valid.
        let Ok(den) = common_denominator(&current) else { break };
        let poles = stabilized_poles(&den);
        let mut u = data.u.clone();
        let mut y = data.y.clone();
        all_pole_filter_rows(&mut u, &poles);
        all_pole_filter_rows(&mut y, &poles);
        // The inverse filter has very uneven gain; a common rescale keeps
        // the regression in a comfortable floating-point range without
        // changing the fitted coefficients.
        let scale = T::one() / row_rms_max(&u).max(fl::<T>(1e-300));
        u *= scale;
        y *= scale;
        let filtered = RegressionData { u, y, dt: data.dt };
        let Ok(candidate) = arx_identify(&filtered, na, nb) else { break };
        let err = arx_simulation_error(&candidate, data)?;
        if err < best_err {
            best_err = err;
            best = candidate.clone();
        }
        current = candidate;
    }
    let pred = arx_predict(&best, data)?;
    let n_reg = pred.residuals.ncols();
    let cov = &pred.residuals * pred.residuals.transpose() / fl::<T>(n_reg as f64);
    ArxModel::new(best.a_coeffs, best.b_coeffs, best.dt, cov)
}

/// Mean squared free-run simulation error of `model` over `data`: the model
/// is driven by the recorded inputs only (zero initial history) and compared
/// against the recorded outputs. Saturates instead of overflowing when the
/// model is unstable, so it is safe as a selection criterion.
pub fn arx_simulation_error<T: Scalar>(
    model: &ArxModel<T>,
    data: &RegressionData<T>,
) -> Result<T> {
    let m = model.n_outputs();
    let p = model.n_inputs();
    if data.n_outputs() != m || data.n_inputs() != p {
        return Err(Error::invalid("data channel counts do not match the model"));
    }
    let n = data.len();
    let saturation = fl::<T>(1e30);
    let mut sim = DMatrix::<T>::zeros(m, n);
    let mut acc = DVector::<T>::zeros(m);
    let mut total = T::zero();
    for k in 0..n {
        acc.fill(T::zero());
        for (i, ai) in model.a_coeffs.iter().enumerate() {
            if k > i {
                acc.gemv(-T::one(), ai, &sim.column(k - 1 - i), T::one());
            }
        }
        for (j, bj) in model.b_coeffs.iter().enumerate() {
            if k > j {
                acc.gemv(T::one(), bj, &data.u.column(k - 1 - j), T::one());
            }
        }
        for r in 0..m {
            sim[(r, k)] = acc[r];
            let e = data.y[(r, k)] - acc[r];
            total += e * e;
        }
        if !lower(total).is_finite() || total > saturation {
            return Ok(saturation);
        }
    }
    Ok(total / fl::<T>((n * m) as f64))
}

/// Common denominator det A(z) of a scalar or 2x2 ARX model, ascending
/// powers of z^-1 (leading coefficient 1).
fn common_denominator<T: Scalar>(model: &ArxModel<T>) -> Result<Vec<T>> {
    let m = model.n_outputs();
    let a_poly = |i: usize, j: usize| -> Vec<T> {
        let mut c = vec![T::zero(); model.na + 1];
        c[0] = if i == j { T::one() } else { T::zero() };
        for (k, ak) in model.a_coeffs.iter().enumerate() {
            c[k + 1] = ak[(i, j)];
        }
        c
    };
    let det = match m {
        1 => a_poly(0, 0),
        2 => poly_sub(
            &conv(&a_poly(0, 0), &a_poly(1, 1)),
            &conv(&a_poly(0, 1), &a_poly(1, 0)),
        ),
        _ => return Err(Error::invalid("common denominator supports m <= 2 outputs")),
    };
    let det = poly_trim(det);
    if det.iter().all(|&c| c == T::zero()) {
        return Err(Error::DegenerateModel("det A(z) is identically zero".into()));
    }
    Ok(det)
}

/// Squared modulus of a complex number over a generic real scalar.
fn cnorm_sqr<T: Scalar>(p: Complex<T>) -> T {
    p.re * p.re + p.im * p.im
}

/// z-plane roots of `1 + c1 z^-1 + ... + cD z^-D` via the companion matrix,
/// with every radius clamped to [`MAX_PREFILTER_POLE_RADIUS`].
fn stabilized_poles<T: Scalar>(den: &[T]) -> Vec<Complex<T>> {
    let d = den.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let mut comp = DMatrix::<T>::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = T::one();
    }
    for i in 0..d {
        comp[(0, i)] = -den[i + 1] / den[0];
    }
    let rmax = fl::<T>(MAX_PREFILTER_POLE_RADIUS);
    comp.complex_eigenvalues()
        .iter()
        .map(|&p| {
            let r = cnorm_sqr(p).sqrt();
            if r >= rmax {
                p * Complex::new(rmax / r, T::zero())
            } else {
                p
            }
        })
        .collect()
}

/// Filters every row of `mat` in place by the all-pole system whose poles
/// are `poles`, applied as a cascade of real first/second-order sections
/// with zero initial conditions. Conjugate pairs are matched by proximity.
fn all_pole_filter_rows<T: Scalar>(mat: &mut DMatrix<T>, poles: &[Complex<T>]) {
    let tiny = fl::<T>(1e-12);
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        if used[i] {
            continue;
        }
        let p = poles[i];
        if p.im.abs() > tiny {
            let radius = cnorm_sqr(p).sqrt();
            let mut partner = None;
            for (j, q) in poles.iter().enumerate().skip(i + 1) {
                if !used[j] && cnorm_sqr(*q - p.conj()).sqrt() < fl::<T>(1e-8) * (T::one() + radius)
                {
                    partner = Some(j);
                    break;
                }
            }
            // A lone complex eigenvalue can only come from rounding; treat
            // its real part as a first-order section.
            let Some(j) = partner else {
                used[i] = true;
                second_order_section(mat, -p.re, T::zero());
                continue;
            };
            used[i] = true;
            used[j] = true;
            second_order_section(mat, -(p.re + p.re), cnorm_sqr(p));
        } else {
            used[i] = true;
            second_order_section(mat, -p.re, T::zero());
        }
    }
}

/// In-place all-pole recursion `w(k) = x(k) - s1 w(k-1) - s2 w(k-2)` on
/// every row of `mat`.
fn second_order_section<T: Scalar>(mat: &mut DMatrix<T>, s1: T, s2: T) {
    for r in 0..mat.nrows() {
        let mut w1 = T::zero();
        let mut w2 = T::zero();
        for k in 0..mat.ncols() {
            let w = mat[(r, k)] - s1 * w1 - s2 * w2;
            w2 = w1;
            w1 = w;
            mat[(r, k)] = w;
        }
    }
}

/// Largest root-mean-square over the rows of `mat`.
fn row_rms_max<T: Scalar>(mat: &DMatrix<T>) -> T {
    let n = fl::<T>(mat.ncols() as f64);
    let mut best = T::zero();
    for r in 0..mat.nrows() {
        let mut acc = T::zero();
        for k in 0..mat.ncols() {
            acc += mat[(r, k)] * mat[(r, k)];
        }
        best = best.max((acc / n).sqrt());
    }
    best
}

/// One-step-ahead predictions of a model over a data set.
#[derive(Debug, Clone, PartialEq)]
pub struct ArxPrediction<T: Scalar = f64> {
    /// Index of the first predicted sample (equal to max(na, nb)).
    pub start: usize,
    /// Predicted outputs, m x (N - start).
    pub predictions: DMatrix<T>,
    /// Prediction errors y - y_hat, m x (N - start).
    pub residuals: DMatrix<T>,
}

/// Evaluates the one-step-ahead predictor of `model` over `data`.
pub fn arx_predict<T: Scalar>(
    model: &ArxModel<T>,
    data: &RegressionData<T>,
) -> Result<ArxPrediction<T>> {
    let m = model.n_outputs();
    let p = model.n_inputs();
    if data.n_outputs() != m || data.n_inputs() != p {
        return Err(Error::invalid("data channel counts do not match the model"));
    }
    let kmin = model.min_lag();
    if data.len() <= kmin {
        return Err(Error::invalid("data shorter than the regression lags"));
    }
    let n_reg = data.len() - kmin;
    let mut predictions = DMatrix::<T>::zeros(m, n_reg);
    let mut residuals = DMatrix::<T>::zeros(m, n_reg);
    let mut acc = DVector::<T>::zeros(m);
    for t in 0..n_reg {
        let k = kmin + t;
        acc.fill(T::zero());
        for (i, ai) in model.a_coeffs.iter().enumerate() {
            acc.gemv(-T::one(), ai, &data.y.column(k - 1 - i), T::one());
        }
        for (j, bj) in model.b_coeffs.iter().enumerate() {
            acc.gemv(T::one(), bj, &data.u.column(k - 1 - j), T::one());
        }
        for r in 0..m {
            predictions[(r, t)] = acc[r];
            residuals[(r, t)] = data.y[(r, k)] - acc[r];
        }
    }
    Ok(ArxPrediction { start: kmin, predictions, residuals })
}

/// Rational 2x2 (or scalar) transfer matrix in powers of z^-1 with per-entry
/// numerator/denominator coefficient lists (index = power of z^-1).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTransferMatrix<T: Scalar = f64> {
    /// Numerator coefficients per entry, m x p.
    pub num: Vec<Vec<Vec<T>>>,
    /// Denominator coefficients per entry (monic: leading coefficient 1).
    pub den: Vec<Vec<Vec<T>>>,
    /// Sample interval, seconds.
    pub dt: T,
}

impl<T: Scalar> DiscreteTransferMatrix<T> {
    /// Validated constructor: rectangular entry grid, monic denominators.
    pub fn new(num: Vec<Vec<Vec<T>>>, den: Vec<Vec<Vec<T>>>, dt: T) -> Result<Self> {
        if dt <= T::zero() {
            return Err(Error::invalid("sample interval dt must be positive"));
        }
        let m = num.len();
        if m == 0 || den.len() != m {
            return Err(Error::invalid("numerator/denominator grids differ in shape"));
        }
        let p = num[0].len();
        for i in 0..m {
            if num[i].len() != p || den[i].len() != p {
                return Err(Error::invalid("numerator/denominator grids differ in shape"));
            }
            for j in 0..p {
                let d = &den[i][j];
                if d.is_empty() || d[0] != T::one() {
                    return Err(Error::invalid(format!(
                        "denominator of entry ({i},{j}) is not monic"
                    )));
                }
                if num[i][j].is_empty() {
                    return Err(Error::invalid("empty numerator"));
                }
            }
        }
        Ok(Self { num, den, dt })
    }

    /// Number of output channels.
    pub fn n_outputs(&self) -> usize {
        self.num.len()
    }

    /// Number of input channels.
    pub fn n_inputs(&self) -> usize {
        self.num[0].len()
    }

    /// Evaluates the matrix at a complex point `z`.
    pub fn transfer_at(&self, z: Complex<T>) -> Result<DMatrix<Complex<T>>> {
        let m = self.n_outputs();
        let p = self.n_inputs();
        let zinv = Complex::new(T::one(), T::zero()) / z;
        let mut g = DMatrix::<Complex<T>>::zeros(m, p);
        for i in 0..m {
            for j in 0..p {
                let n = eval_zinv(&self.num[i][j], zinv);
                let d = eval_zinv(&self.den[i][j], zinv);
                if d.norm_sqr() == T::zero() {
                    return Err(Error::Numerical(format!(
                        "denominator of entry ({i},{j}) vanishes at z = {z}"
                    )));
                }
                g[(i, j)] = n / d;
            }
        }
        Ok(g)
    }
}

impl<T: Scalar> TransferModel<T> for DiscreteTransferMatrix<T> {
    fn impedance_at(&self, f_hz: T) -> Result<Matrix2<Complex<T>>> {
        if self.n_outputs() != 2 || self.n_inputs() != 2 {
            return Err(Error::invalid("impedance evaluation expects a 2x2 model"));
        }
        let nyquist = fl::<T>(0.5) / self.dt;
        if f_hz >= nyquist {
            return Err(Error::invalid(format!(
                "frequency {} Hz is at or above the Nyquist rate {} Hz",
                lower(f_hz),
                lower(nyquist)
            )));
        }
        let theta = T::two_pi() * f_hz * self.dt;
        let z = Complex::new(theta.cos(), theta.sin());
        let g = self.transfer_at(z)?;
        Ok(Matrix2::new(g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]))
    }
}

fn eval_zinv<T: Scalar>(coeffs: &[T], zinv: Complex<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for &c in coeffs.iter().rev() {
        acc = acc * zinv + Complex::new(c, T::zero());
    }
    acc
}

fn conv<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn poly_add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len().max(b.len())];
    for (i, &ai) in a.iter().enumerate() {
        out[i] += ai;
    }
    for (i, &bi) in b.iter().enumerate() {
        out[i] += bi;
    }
    out
}

fn poly_sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len().max(b.len())];
    for (i, &ai) in a.iter().enumerate() {
        out[i] += ai;
    }
    for (i, &bi) in b.iter().enumerate() {
        out[i] -= bi;
    }
    out
}

/// Drops exactly-zero high-order coefficients (never approximate
/// cancellation); keeps at least one coefficient.
fn poly_trim<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    while v.len() > 1 && *v.last().unwrap() == T::zero() {
        v.pop();
    }
    v
}

/// Converts an ARX model into an explicit rational transfer matrix
/// G(z) = A(z)^-1 B(z) with the common denominator det A(z); supports scalar
/// and 2x2 output dimensions (the grid case).
pub fn arx_to_tf<T: Scalar>(model: &ArxModel<T>) -> Result<DiscreteTransferMatrix<T>> {
    let m = model.n_outputs();
    let p = model.n_inputs();
    if m > 2 {
        return Err(Error::invalid("transfer-matrix conversion supports m <= 2 outputs"));
    }
    // Entry polynomials of A(z) (identity plus the A_i blocks) and B(z).
    let a_poly = |i: usize, j: usize| -> Vec<T> {
        let mut c = vec![T::zero(); model.na + 1];
        c[0] = if i == j { T::one() } else { T::zero() };
        for (k, ak) in model.a_coeffs.iter().enumerate() {
            c[k + 1] = ak[(i, j)];
        }
        c
    };
    let b_poly = |i: usize, j: usize| -> Vec<T> {
        let mut c = vec![T::zero(); model.nb + 1];
        for (k, bk) in model.b_coeffs.iter().enumerate() {
            c[k + 1] = bk[(i, j)];
        }
        c
    };
    let (det, adj): (Vec<T>, Vec<Vec<Vec<T>>>) = if m == 1 {
        (a_poly(0, 0), vec![vec![vec![T::one()]]])
    } else {
        let det = poly_sub(
            &conv(&a_poly(0, 0), &a_poly(1, 1)),
            &conv(&a_poly(0, 1), &a_poly(1, 0)),
        );
        let neg = |v: Vec<T>| v.into_iter().map(|x| -x).collect::<Vec<T>>();
        let adj = vec![
            vec![a_poly(1, 1), neg(a_poly(0, 1))],
            vec![neg(a_poly(1, 0)), a_poly(0, 0)],
        ];
        (det, adj)
    };
    let det = poly_trim(det);
    if det.iter().all(|&c| c == T::zero()) {
        return Err(Error::DegenerateModel("det A(z) is identically zero".into()));
    }
    let mut num = vec![vec![Vec::new(); p]; m];
    for i in 0..m {
        for j in 0..p {
            let mut acc = vec![T::zero()];
            for (k, adj_ik) in adj[i].iter().enumerate() {
                acc = poly_add(&acc, &conv(adj_ik, &b_poly(k, j)));
            }
            num[i][j] = poly_trim(acc);
        }
    }
    let den = vec![vec![det.clone(); p]; m];
    DiscreteTransferMatrix::new(num, den, model.dt)
}
