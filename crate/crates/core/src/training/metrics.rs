//! Regression metrics: MAE, MSE, MSLE, R² and SMAPE.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("MSLE undefined for values <= -1, got {0}")]
    MsleDomain(f64),
}

/// The five-metric bundle reported per station.
///
/// `msle` is absent when no evaluated target admits a logarithmic error
/// (it needs non-negative physical quantities).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub mse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub msle: Option<f64>,
    pub r2: f64,
    pub smape: f64,
}

fn check(y: &[f64], yhat: &[f64]) -> Result<(), MetricsError> {
    if y.is_empty() {
        return Err(MetricsError::Empty);
    }
    if y.len() != yhat.len() {
        return Err(MetricsError::LengthMismatch(y.len(), yhat.len()));
    }
    Ok(())
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64, MetricsError> {
    check(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64, MetricsError> {
    check(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// Mean squared log1p error; every input must exceed −1.
pub fn msle(y: &[f64], yhat: &[f64]) -> Result<f64, MetricsError> {
    check(y, yhat)?;
    let mut sum = 0.0;
    for (&a, &b) in y.iter().zip(yhat) {
        if a <= -1.0 {
            return Err(MetricsError::MsleDomain(a));
        }
        if b <= -1.0 {
            return Err(MetricsError::MsleDomain(b));
        }
        let d = a.ln_1p() - b.ln_1p();
        sum += d * d;
    }
    Ok(sum / y.len() as f64)
}

/// R² = 1 − Σ(y−ŷ)²/Σ(y−ȳ)², with ȳ the mean of `y` itself. A constant
/// target gives 1 for a perfect fit and −∞ otherwise.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64, MetricsError> {
    check(y, yhat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let ss_tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Ok(if ss_res == 0.0 { 1.0 } else { f64::NEG_INFINITY });
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// SMAPE in percent, bounded in [0, 200]. Pairs where both values are
/// exactly zero contribute zero error.
pub fn smape(y: &[f64], yhat: &[f64]) -> Result<f64, MetricsError> {
    check(y, yhat)?;
    let mut sum = 0.0;
    for (&a, &b) in y.iter().zip(yhat) {
        let denom = (a.abs() + b.abs()) / 2.0;
        if denom > 0.0 {
            sum += (a - b).abs() / denom;
        }
    }
    Ok(100.0 * sum / y.len() as f64)
}

/// All five metrics on one pair of flattened value slices.
pub fn compute(y: &[f64], yhat: &[f64]) -> Result<MetricsReport, MetricsError> {
    Ok(MetricsReport {
        mae: mae(y, yhat)?,
        mse: mse(y, yhat)?,
        msle: Some(msle(y, yhat)?),
        r2: r2(y, yhat)?,
        smape: smape(y, yhat)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction() {
        let y = [1.0, 2.0, 3.0];
        let r = compute(&y, &y).unwrap();
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.mse, 0.0);
        assert_eq!(r.msle, Some(0.0));
        assert_eq!(r.r2, 1.0);
        assert_eq!(r.smape, 0.0);
    }

    #[test]
    fn hand_computed_fixture() {
        // worked by hand from the definitions:
        // mae = (1+0+1)/3, mse = (1+0+1)/3,
        // msle = ((ln2−ln3)² + 0 + (ln4−ln3)²)/3 = 0.082388,
        // r2 = 1 − 2/2 = 0, smape = (100/3)(2/3 + 0 + 2/5) = 35.556
        let y = [1.0, 2.0, 3.0];
        let yhat = [2.0, 2.0, 2.0];
        let r = compute(&y, &yhat).unwrap();
        assert_abs_diff_eq!(r.mae, 0.6667, epsilon = 1e-4);
        assert_abs_diff_eq!(r.mse, 0.6667, epsilon = 1e-4);
        assert_abs_diff_eq!(r.msle.unwrap(), 0.08238, epsilon = 1e-4);
        assert_abs_diff_eq!(r.r2, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.smape, 35.556, epsilon = 1e-3);
    }

    #[test]
    fn mean_predictor_scores_exactly_zero_r2() {
        let y = [3.0, 7.0, 11.0, -2.0, 4.5];
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let yhat = vec![mean; y.len()];
        assert_eq!(r2(&y, &yhat).unwrap(), 0.0);
    }

    #[test]
    fn msle_rejects_values_at_or_below_minus_one() {
        assert!(matches!(
            msle(&[0.5, -1.0], &[0.5, 0.5]),
            Err(MetricsError::MsleDomain(_))
        ));
        assert!(matches!(
            msle(&[0.5], &[-1.5]),
            Err(MetricsError::MsleDomain(_))
        ));
        assert!(msle(&[-0.99], &[-0.5]).unwrap().is_finite());
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert!(matches!(mae(&[], &[]), Err(MetricsError::Empty)));
        assert!(matches!(
            mae(&[1.0], &[1.0, 2.0]),
            Err(MetricsError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn smape_both_zero_convention() {
        assert_eq!(smape(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn smape_is_symmetric_and_bounded(
            y in proptest::collection::vec(0.01f64..100.0, 1..40),
            scale in 0.01f64..3.0,
        ) {
            let yhat: Vec<f64> = y.iter().map(|v| v * scale).collect();
            let a = smape(&y, &yhat).unwrap();
            let b = smape(&yhat, &y).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
            prop_assert!((0.0..=200.0).contains(&a));
        }

        #[test]
        fn r2_never_exceeds_one(
            y in proptest::collection::vec(-50.0f64..50.0, 2..40),
            noise in proptest::collection::vec(-10.0f64..10.0, 40),
        ) {
            let yhat: Vec<f64> = y.iter().zip(&noise).map(|(a, n)| a + n).collect();
            let r = r2(&y, &yhat).unwrap();
            prop_assert!(r <= 1.0);
        }

        #[test]
        fn msle_finite_above_minus_one(
            y in proptest::collection::vec(-0.999f64..100.0, 1..30),
            yhat in proptest::collection::vec(-0.999f64..100.0, 30),
        ) {
            let yhat = &yhat[..y.len()];
            prop_assert!(msle(&y, yhat).unwrap().is_finite());
        }
    }
}
