//! Akaike-criterion order selection for ARX models.
//!
//! The score is the multivariate AIC
//! `N * ln det(Sigma_hat) + 2 d`, where `Sigma_hat` is the one-step
//! prediction-error covariance recomputed on the scoring data and `d` is the
//! number of estimated coefficients. Lower is better; the 2d term penalizes
//! the log-likelihood gain that extra coefficients always buy.

use super::arx::{arx_identify, arx_predict, ArxModel};
use super::RegressionData;
use crate::error::{Error, Result};
use crate::scalar::{fl, Scalar};

/// AIC evaluation of one candidate model.
#[derive(Debug, Clone, PartialEq)]
pub struct AicScore<T: Scalar = f64> {
    /// Output order of the scored model.
    pub na: usize,
    /// Input order of the scored model.
    pub nb: usize,
    /// AIC value (negative infinity for an exact fit).
    pub value: T,
    /// Set when the residuals vanish to working precision, which makes the
    /// log-determinant unbounded below; such models win outright.
    pub exact_fit: bool,
    /// Number of estimated coefficients `d = na m^2 + nb m p`.
    pub n_params: usize,
}

/// Scores `model` on `data` by the Akaike information criterion.
pub fn aic_score<T: Scalar>(model: &ArxModel<T>, data: &RegressionData<T>) -> Result<AicScore<T>> {
    let m = model.n_outputs();
    let p = model.n_inputs();
    let pred = arx_predict(model, data)?;
    let n_rows = pred.residuals.ncols();
    let cov = &pred.residuals * pred.residuals.transpose() / fl::<T>(n_rows as f64);
    let n_params = model.na * m * m + model.nb * m * p;

    let trace = (0..m).fold(T::zero(), |acc, i| acc + cov[(i, i)]);
    let mut mean_sq_y = T::zero();
    for v in data.y.iter() {
        mean_sq_y += *v * *v;
    }
    mean_sq_y /= fl::<T>((data.y.len()) as f64);
    let exact_fit = trace <= fl::<T>(1e-20) * mean_sq_y;

    let value = if exact_fit {
        fl::<T>(f64::NEG_INFINITY)
    } else {
        let det = cov.determinant();
        if det <= T::zero() {
            // A singular (but nonzero) residual covariance: some output
            // direction is fit exactly, so the likelihood is unbounded.
            fl::<T>(f64::NEG_INFINITY)
        } else {
            fl::<T>(n_rows as f64) * det.ln() + fl::<T>(2.0 * n_params as f64)
        }
    };
    Ok(AicScore { na: model.na, nb: model.nb, value, exact_fit, n_params })
}

/// Fits every `(na, nb)` candidate on `data`, scores each by AIC, and
/// returns the winning model along with all scores (in the order the
/// candidates were given).
///
/// Ties — including multiple exact fits — resolve to the least complex
/// candidate (smallest `na + nb`, then smallest `na`).
pub fn select_order<T: Scalar>(
    data: &RegressionData<T>,
    candidates: &[(usize, usize)],
) -> Result<(ArxModel<T>, Vec<AicScore<T>>)> {
    if candidates.is_empty() {
        return Err(Error::invalid("need at least one order candidate"));
    }
    let mut models = Vec::with_capacity(candidates.len());
    let mut scores = Vec::with_capacity(candidates.len());
    for &(na, nb) in candidates {
        let model = arx_identify(data, na, nb)?;
        scores.push(aic_score(&model, data)?);
        models.push(model);
    }
    // Visit candidates from least to most complex so that a strict-less
    // argmin leaves ties with the simplest model.
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by_key(|&i| (candidates[i].0 + candidates[i].1, candidates[i].0));
    let mut best = order[0];
    for &i in &order[1..] {
        if scores[i].value < scores[best].value {
            best = i;
        }
    }
    Ok((models.swap_remove(best), scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::generate_rbs;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn scalar_arx_data(
        a: &[f64],
        b: &[f64],
        n: usize,
        seed: u64,
        noise: f64,
    ) -> RegressionData<f64> {
        let u = generate_rbs::<f64>(seed, n, 1.0, 1000.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919).wrapping_add(1));
        let normal = Normal::new(0.0, noise.max(1e-300)).unwrap();
        let mut y = vec![0.0; n];
        for k in 1..n {
            let mut acc = 0.0;
            for (i, &ai) in a.iter().enumerate() {
                if k > i {
                    acc -= ai * y[k - 1 - i];
                }
            }
            for (j, &bj) in b.iter().enumerate() {
                if k > j {
                    acc += bj * u.samples[k - 1 - j];
                }
            }
            if noise > 0.0 {
                acc += normal.sample(&mut rng);
            }
            y[k] = acc;
        }
        RegressionData::new(
            DMatrix::from_row_slice(1, n, &u.samples),
            DMatrix::from_row_slice(1, n, &y),
            1e-3,
        )
        .unwrap()
    }

    #[test]
    fn aic_difference_of_nested_identical_fits_is_twice_the_parameter_gap() {
        // Fit (2,1); then append an exactly-zero B2 block. Both models have
        // the same lags and identical residuals, so the AIC values differ by
        // exactly 2 * (extra parameters).
        let data = scalar_arx_data(&[-0.8], &[0.5], 1500, 3, 0.1);
        let slim = arx_identify(&data, 2, 1).unwrap();
        let padded = ArxModel::new(
            slim.a_coeffs.clone(),
            vec![slim.b_coeffs[0].clone(), DMatrix::zeros(1, 1)],
            slim.dt,
            slim.residual_covariance.clone(),
        )
        .unwrap();
        let s1 = aic_score(&slim, &data).unwrap();
        let s2 = aic_score(&padded, &data).unwrap();
        assert!(!s1.exact_fit && !s2.exact_fit);
        assert_eq!(s2.n_params - s1.n_params, 1);
        assert!(
            (s2.value - s1.value - 2.0).abs() <= 1e-9,
            "delta {}",
            s2.value - s1.value
        );
    }

    #[test]
    fn exact_fit_is_flagged_and_scores_minus_infinity() {
        let data = scalar_arx_data(&[-0.8], &[0.5], 600, 5, 0.0);
        let model = arx_identify(&data, 1, 1).unwrap();
        let score = aic_score(&model, &data).unwrap();
        assert!(score.exact_fit);
        assert_eq!(score.value, f64::NEG_INFINITY);
    }

    #[test]
    fn monte_carlo_selection_finds_the_true_order() {
        // True system is second order; AIC must pick (2,2) from the
        // candidate ladder in at least 90 percent of independent trials.
        let candidates = [(1usize, 1usize), (2, 2), (4, 4), (8, 8)];
        let mut hits = 0;
        for trial in 0..50u64 {
            let data = scalar_arx_data(&[-1.5, 0.7], &[1.0, 0.5], 2000, 1000 + trial, 1e-2);
            let (model, scores) = select_order(&data, &candidates).unwrap();
            assert_eq!(scores.len(), candidates.len());
            if model.na == 2 && model.nb == 2 {
                hits += 1;
            }
        }
        assert!(hits >= 45, "true order recovered only {hits}/50 times");
    }

    #[test]
    fn single_candidate_is_returned_with_its_score() {
        let data = scalar_arx_data(&[-0.5], &[1.0], 600, 7, 0.05);
        let (model, scores) = select_order(&data, &[(3, 2)]).unwrap();
        assert_eq!((model.na, model.nb), (3, 2));
        assert_eq!(scores.len(), 1);
        assert_eq!((scores[0].na, scores[0].nb), (3, 2));
    }

    #[test]
    fn exact_fit_ties_resolve_to_the_simpler_model() {
        // Noiseless first-order data: both candidates interpolate, so both
        // score minus infinity; the less complex (4,4) must win over (8,8).
        let data = scalar_arx_data(&[-0.9], &[0.3], 1200, 9, 0.0);
        let (model, scores) = select_order(&data, &[(8, 8), (4, 4)]).unwrap();
        assert!(scores.iter().all(|s| s.exact_fit));
        assert_eq!((model.na, model.nb), (4, 4));
        // Scores stay in the caller's candidate order.
        assert_eq!((scores[0].na, scores[0].nb), (8, 8));
        assert_eq!((scores[1].na, scores[1].nb), (4, 4));
    }
}
