//! Continuous- and discrete-time MIMO linear state-space models.
//!
//! Provides the model containers shared by the grid simulator and the
//! identification algorithms, plus the structural operations on them:
//! zero-order-hold discretization, bilinear / matrix-logarithm
//! discrete-to-continuous conversion, Kalman minimal realization, transfer
//! evaluation, and deterministic time stepping.

use crate::error::{Error, Result};
use crate::linalg::logm;
use crate::scalar::{fl, Scalar};
use nalgebra::{Complex, ComplexField, DMatrix, DVector};

fn default_labels(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

fn validate_dims<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    d: &DMatrix<T>,
) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
    }
    if b.nrows() != n {
        return Err(Error::invalid(format!("B has {} rows, expected {n}", b.nrows())));
    }
    if c.ncols() != n {
        return Err(Error::invalid(format!("C has {} columns, expected {n}", c.ncols())));
    }
    if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
        return Err(Error::invalid(format!(
            "D must be {}x{}, got {}x{}",
            c.nrows(),
            b.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    Ok(())
}

/// Evaluates C (w I - A)^-1 B + D for a complex frequency point `w`.
fn transfer_common<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    d: &DMatrix<T>,
    w: Complex<T>,
) -> Result<DMatrix<Complex<T>>> {
    let n = a.nrows();
    let mut resolvent = a.map(|x| -Complex::new(x, T::zero()));
    for i in 0..n {
        resolvent[(i, i)] += w;
    }
    let bc = b.map(|x| Complex::new(x, T::zero()));
    let lu = resolvent.lu();
    let x = lu
        .solve(&bc)
        .ok_or_else(|| Error::Numerical(format!("resolvent singular at w = {w}")))?;
    let cc = c.map(|x| Complex::new(x, T::zero()));
    let dc = d.map(|x| Complex::new(x, T::zero()));
    Ok(cc * x + dc)
}

/// Continuous-time LTI model dx/dt = A x + B u, y = C x + D u.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousStateSpace<T: Scalar = f64> {
    /// State matrix, n x n.
    pub a: DMatrix<T>,
    /// Input matrix, n x p.
    pub b: DMatrix<T>,
    /// Output matrix, m x n.
    pub c: DMatrix<T>,
    /// Feedthrough matrix, m x p.
    pub d: DMatrix<T>,
    /// Input channel names (length p).
    pub input_labels: Vec<String>,
    /// Output channel names (length m).
    pub output_labels: Vec<String>,
}

impl<T: Scalar> ContinuousStateSpace<T> {
    /// Validated constructor with default channel labels `u1..`, `y1..`.
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>) -> Result<Self> {
        validate_dims(&a, &b, &c, &d)?;
        let (p, m) = (b.ncols(), c.nrows());
        Ok(Self { a, b, c, d, input_labels: default_labels("u", p), output_labels: default_labels("y", m) })
    }

    /// Replaces the channel labels.
    pub fn with_labels(mut self, inputs: &[&str], outputs: &[&str]) -> Result<Self> {
        if inputs.len() != self.n_inputs() || outputs.len() != self.n_outputs() {
            return Err(Error::invalid("label counts must match channel counts"));
        }
        self.input_labels = inputs.iter().map(|s| s.to_string()).collect();
        self.output_labels = outputs.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Eigenvalues of A.
    pub fn eigenvalues(&self) -> Vec<Complex<T>> {
        self.a.clone().complex_eigenvalues().iter().copied().collect()
    }

    /// True when every eigenvalue has a strictly negative real part.
    pub fn is_hurwitz(&self) -> bool {
        self.eigenvalues().iter().all(|l| l.re < T::zero())
    }

    /// Largest eigenvalue real part (stability margin diagnostic).
    pub fn max_real_eigenvalue(&self) -> T {
        self.eigenvalues()
            .iter()
            .map(|l| l.re)
            .fold(fl::<T>(f64::NEG_INFINITY), |acc, x| if x > acc { x } else { acc })
    }

    /// Transfer matrix G(s) = C (sI - A)^-1 B + D at a complex point `s`.
    pub fn transfer_at(&self, s: Complex<T>) -> Result<DMatrix<Complex<T>>> {
        transfer_common(&self.a, &self.b, &self.c, &self.d, s)
    }

    /// DC gain D - C A^-1 B (requires A nonsingular).
    pub fn dc_gain(&self) -> Result<DMatrix<T>> {
        let lu = self.a.clone().lu();
        let x = lu
            .solve(&self.b)
            .ok_or_else(|| Error::Numerical("A is singular; DC gain undefined".into()))?;
        Ok(&self.d - &self.c * x)
    }
}

/// Discrete-time LTI model x(k+1) = A x(k) + B u(k), y(k) = C x(k) + D u(k).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStateSpace<T: Scalar = f64> {
    /// State matrix, n x n.
    pub a: DMatrix<T>,
    /// Input matrix, n x p.
    pub b: DMatrix<T>,
    /// Output matrix, m x n.
    pub c: DMatrix<T>,
    /// Feedthrough matrix, m x p.
    pub d: DMatrix<T>,
    /// Sample interval, seconds.
    pub dt: T,
    /// Input channel names (length p).
    pub input_labels: Vec<String>,
    /// Output channel names (length m).
    pub output_labels: Vec<String>,
}

impl<T: Scalar> DiscreteStateSpace<T> {
    /// Validated constructor with default channel labels.
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>, dt: T) -> Result<Self> {
        validate_dims(&a, &b, &c, &d)?;
        if dt <= T::zero() {
            return Err(Error::invalid("sample interval dt must be positive"));
        }
        let (p, m) = (b.ncols(), c.nrows());
        Ok(Self {
            a,
            b,
            c,
            d,
            dt,
            input_labels: default_labels("u", p),
            output_labels: default_labels("y", m),
        })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Eigenvalues of A.
    pub fn eigenvalues(&self) -> Vec<Complex<T>> {
        self.a.clone().complex_eigenvalues().iter().copied().collect()
    }

    /// Largest eigenvalue magnitude.
    pub fn spectral_radius(&self) -> T {
        self.eigenvalues()
            .iter()
            .map(|l| l.modulus())
            .fold(T::zero(), |acc, x| if x > acc { x } else { acc })
    }

    /// True when every eigenvalue lies strictly inside the unit circle.
    pub fn is_schur_stable(&self) -> bool {
        self.spectral_radius() < T::one()
    }

    /// Transfer matrix G(z) = C (zI - A)^-1 B + D at a complex point `z`.
    pub fn transfer_at(&self, z: Complex<T>) -> Result<DMatrix<Complex<T>>> {
        transfer_common(&self.a, &self.b, &self.c, &self.d, z)
    }

    /// Steps the recursion over an input sequence (one column per sample)
    /// from initial state `x0` (zero if `None`); returns outputs as one
    /// column per sample.
    pub fn simulate(&self, u: &DMatrix<T>, x0: Option<&DVector<T>>) -> Result<DMatrix<T>> {
        let (n, p, m) = (self.n_states(), self.n_inputs(), self.n_outputs());
        if u.nrows() != p {
            return Err(Error::invalid(format!("input has {} rows, model expects {p}", u.nrows())));
        }
        let steps = u.ncols();
        let mut x = match x0 {
            Some(v) => {
                if v.len() != n {
                    return Err(Error::invalid(format!("x0 has length {}, expected {n}", v.len())));
                }
                v.clone()
            }
            None => DVector::zeros(n),
        };
        let mut x_next = DVector::zeros(n);
        let mut y = DMatrix::zeros(m, steps);
        for k in 0..steps {
            let uk = u.column(k);
            let mut yk = y.column_mut(k);
            yk.gemv(T::one(), &self.c, &x, T::zero());
            yk.gemv(T::one(), &self.d, &uk, T::one());
            x_next.gemv(T::one(), &self.a, &x, T::zero());
            x_next.gemv(T::one(), &self.b, &uk, T::one());
            std::mem::swap(&mut x, &mut x_next);
        }
        Ok(y)
    }
}

/// Exact zero-order-hold discretization at sample interval `dt`.
///
/// Computed through the augmented matrix exponential
/// `exp([[A, B], [0, 0]] dt) = [[A_d, B_d], [0, I]]`, which equals
/// `A^-1 (A_d - I) B` when A is nonsingular but needs no invertibility.
pub fn discretize_zoh<T: Scalar>(ss: &ContinuousStateSpace<T>, dt: T) -> Result<DiscreteStateSpace<T>> {
    if dt <= T::zero() {
        return Err(Error::invalid("sample interval dt must be positive"));
    }
    let (n, p) = (ss.n_states(), ss.n_inputs());
    let mut aug = DMatrix::<T>::zeros(n + p, n + p);
    aug.view_mut((0, 0), (n, n)).copy_from(&(ss.a.clone() * dt));
    aug.view_mut((0, n), (n, p)).copy_from(&(ss.b.clone() * dt));
    let e = aug.exp();
    let a_d = e.view((0, 0), (n, n)).into_owned();
    let b_d = e.view((0, n), (n, p)).into_owned();
    let mut out = DiscreteStateSpace::new(a_d, b_d, ss.c.clone(), ss.d.clone(), dt)?;
    out.input_labels = ss.input_labels.clone();
    out.output_labels = ss.output_labels.clone();
    Ok(out)
}

/// Conversion rule used by [`d2c`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum D2cMethod {
    /// Inverse Tustin transform; exact on the bilinear frequency mapping.
    Bilinear,
    /// Principal matrix logarithm; exact inverse of ZOH discretization.
    MatrixLog,
}

/// Discrete-to-continuous conversion.
///
/// * `Bilinear`: `A_c = (2/dt) (A_d + I)^-1 (A_d - I)` with the
///   transfer-preserving companions `B_c = (2/sqrt(dt)) (A_d+I)^-1 B_d`,
///   `C_c = (2/sqrt(dt)) C_d (A_d+I)^-1`, `D_c = D_d - C_d (A_d+I)^-1 B_d`,
///   so that `G_c((2/dt)(z-1)/(z+1)) = G_d(z)` exactly. Requires no
///   eigenvalue of `A_d` at -1.
/// * `MatrixLog`: `A_c = log(A_d)/dt` and `B_c` from the ZOH integral
///   (equivalently `A_c (A_d - I)^-1 B_d`); C and D unchanged. Requires no
///   eigenvalue of `A_d` on the closed negative real axis.
pub fn d2c<T: Scalar>(ss: &DiscreteStateSpace<T>, method: D2cMethod) -> Result<ContinuousStateSpace<T>> {
    let n = ss.n_states();
    let out = match method {
        D2cMethod::Bilinear => {
            for l in ss.eigenvalues() {
                if (l + Complex::new(T::one(), T::zero())).modulus()
                    <= fl::<T>(1e-10) * (T::one() + l.modulus())
                {
                    return Err(Error::Conversion(format!(
                        "bilinear conversion undefined: eigenvalue {l} of A_d lies at -1"
                    )));
                }
            }
            let mut m = ss.a.clone();
            for i in 0..n {
                m[(i, i)] += T::one();
            }
            let lu = m.clone().lu();
            let lut = m.transpose().lu();
            let two_over_dt = fl::<T>(2.0) / ss.dt;
            let two_over_sqrt = fl::<T>(2.0) / ss.dt.sqrt();
            let mut a_min_i = ss.a.clone();
            for i in 0..n {
                a_min_i[(i, i)] -= T::one();
            }
            let inv_ad = lu
                .solve(&a_min_i)
                .ok_or_else(|| Error::Conversion("A_d + I is numerically singular".into()))?;
            let inv_bd = lu
                .solve(&ss.b)
                .ok_or_else(|| Error::Conversion("A_d + I is numerically singular".into()))?;
            let c_inv = lut
                .solve(&ss.c.transpose())
                .ok_or_else(|| Error::Conversion("A_d + I is numerically singular".into()))?
                .transpose();
            let a_c = inv_ad * two_over_dt;
            let b_c = &inv_bd * two_over_sqrt;
            let c_c = &c_inv * two_over_sqrt;
            let d_c = &ss.d - &ss.c * inv_bd;
            ContinuousStateSpace::new(a_c, b_c, c_c, d_c)?
        }
        D2cMethod::MatrixLog => {
            let log_ad = logm(&ss.a)?;
            let a_c = log_ad / ss.dt;
            // Psi = integral over [0, dt] of exp(A_c tau) dtau, via the
            // augmented exponential; B_d = Psi B_c.
            let mut aug = DMatrix::<T>::zeros(2 * n, 2 * n);
            aug.view_mut((0, 0), (n, n)).copy_from(&(a_c.clone() * ss.dt));
            for i in 0..n {
                aug[(i, n + i)] = ss.dt;
            }
            let e = aug.exp();
            let psi = e.view((0, n), (n, n)).into_owned();
            let b_c = psi.lu().solve(&ss.b).ok_or_else(|| {
                Error::Conversion("ZOH input integral is singular; cannot recover B".into())
            })?;
            ContinuousStateSpace::new(a_c, b_c, ss.c.clone(), ss.d.clone())?
        }
    };
    let mut out = out;
    out.input_labels = ss.input_labels.clone();
    out.output_labels = ss.output_labels.clone();
    Ok(out)
}

/// Orthonormal basis of the Krylov (reachability) subspace of (A, B): the
/// column space of [B, AB, ..., A^(n-1) B], with rank decided by singular
/// values above `tol_rel * sigma_max`.
fn krylov_basis<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, tol_rel: T) -> DMatrix<T> {
    let n = a.nrows();
    let p = b.ncols();
    let mut k = DMatrix::<T>::zeros(n, n.max(1) * p);
    let mut block = b.clone();
    for j in 0..n.max(1) {
        k.view_mut((0, j * p), (n, p)).copy_from(&block);
        if j + 1 < n {
            block = a * &block;
        }
    }
    let svd = k.svd(true, false);
    let smax = svd.singular_values.max();
    let rank = if smax <= T::zero() {
        0
    } else {
        svd.singular_values.iter().filter(|&&s| s > tol_rel * smax).count()
    };
    let u = svd.u.expect("SVD with U requested");
    u.columns(0, rank).into_owned()
}

/// Kalman minimal realization of (A, B, C): removes unreachable then
/// unobservable state directions via orthogonal projections.
fn minreal_matrices<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    tol_rel: T,
) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>) {
    // Reachable subspace.
    let v = krylov_basis(a, b, tol_rel);
    let a1 = v.transpose() * a * &v;
    let b1 = v.transpose() * b;
    let c1 = c * &v;
    // Observable subspace of the reachable part (dual problem).
    let w = krylov_basis(&a1.transpose(), &c1.transpose(), tol_rel);
    let a2 = w.transpose() * a1 * &w;
    let b2 = w.transpose() * b1;
    let c2 = c1 * &w;
    (a2, b2, c2)
}

/// Default relative rank tolerance for minimal realization.
pub fn minreal_default_tol<T: Scalar>() -> T {
    fl::<T>(1e-8)
}

impl<T: Scalar> DiscreteStateSpace<T> {
    /// Minimal realization (Kalman decomposition by orthogonal rank tests at
    /// relative tolerance `tol_rel`); preserves the transfer function, dt,
    /// feedthrough, and labels.
    pub fn minimal_realization(&self, tol_rel: T) -> Result<Self> {
        let (a, b, c) = minreal_matrices(&self.a, &self.b, &self.c, tol_rel);
        let mut out = DiscreteStateSpace::new(a, b, c, self.d.clone(), self.dt)?;
        out.input_labels = self.input_labels.clone();
        out.output_labels = self.output_labels.clone();
        Ok(out)
    }
}

impl<T: Scalar> ContinuousStateSpace<T> {
    /// Minimal realization (Kalman decomposition by orthogonal rank tests at
    /// relative tolerance `tol_rel`); preserves the transfer function,
    /// feedthrough, and labels.
    pub fn minimal_realization(&self, tol_rel: T) -> Result<Self> {
        let (a, b, c) = minreal_matrices(&self.a, &self.b, &self.c, tol_rel);
        let mut out = ContinuousStateSpace::new(a, b, c, self.d.clone())?;
        out.input_labels = self.input_labels.clone();
        out.output_labels = self.output_labels.clone();
        Ok(out)
    }
}

/// Markov parameter `C A^k B` (plus D at k = 0 handled by callers); shared by
/// tests and the subspace verifier.
pub fn markov_parameter<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    k: usize,
) -> DMatrix<T> {
    let mut block = b.clone();
    for _ in 0..k {
        block = a * &block;
    }
    c * block
}

/// Solves the discrete-time equilibrium x = A x + B u for a constant input
/// (continuous analog: x_eq = -A^-1 B u).
pub fn continuous_equilibrium<T: Scalar>(
    ss: &ContinuousStateSpace<T>,
    u: &DVector<T>,
) -> Result<DVector<T>> {
    if u.len() != ss.n_inputs() {
        return Err(Error::invalid("equilibrium input dimension mismatch"));
    }
    let rhs = -(&ss.b * u);
    ss.a.clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("A is singular; equilibrium undefined".into()))
}
