use serde::{Deserialize, Serialize};

use super::{check_paired, mean};
use crate::error::{Error, Result};

/// A fitted line `y = intercept + slope * x`.
///
/// On log10 axes this is the replicative risk function used for RBERS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    /// `y - (intercept + slope * x)`, in input order.
    pub residuals: Vec<f64>,
    /// Weighted coefficient of determination for weighted fits.
    pub r_squared: f64,
    pub weighted: bool,
    pub weights: Option<Vec<f64>>,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    pub fn n(&self) -> usize {
        self.residuals.len()
    }
}

fn fit(x: &[f64], y: &[f64], w: Option<&[f64]>) -> Result<RegressionFit> {
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let total: f64 = (0..x.len()).map(weight).sum();
    let (mx, my) = match w {
        None => (mean(x), mean(y)),
        Some(w) => (
            x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total,
            y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total,
        ),
    };
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        let wi = weight(i);
        sxx += wi * dx * dx;
        sxy += wi * dx * dy;
        syy += wi * dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ConstantInput("x"));
    }
    if syy == 0.0 {
        return Err(Error::ConstantInput("y"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| b - (intercept + slope * a))
        .collect();
    let sse: f64 = residuals
        .iter()
        .enumerate()
        .map(|(i, e)| weight(i) * e * e)
        .sum();
    Ok(RegressionFit {
        slope,
        intercept,
        residuals,
        r_squared: (1.0 - sse / syy).clamp(0.0, 1.0),
        weighted: w.is_some(),
        weights: w.map(<[f64]>::to_vec),
    })
}

/// Ordinary least squares of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    check_paired(x, y, 3)?;
    fit(x, y, None)
}

/// Minimizes sum w_i (y_i - a - b x_i)^2. The reported r_squared is
/// 1 - sum w e^2 / sum w (y - ybar_w)^2.
pub fn weighted_ols(x: &[f64], y: &[f64], w: &[f64]) -> Result<RegressionFit> {
    check_paired(x, y, 3)?;
    if w.len() != x.len() {
        return Err(Error::LengthMismatch(x.len(), w.len()));
    }
    if let Some((index, &value)) = w
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(Error::NonPositiveWeight { index, value });
    }
    fit(x, y, Some(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::pearson_coefficient;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.5];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let f = ols(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(!f.weighted && f.weights.is_none());
    }

    #[test]
    fn r_squared_is_squared_pearson() {
        let x = [1.0, 2.0, 4.0, 7.0, 8.0];
        let y = [2.0, 1.0, 5.0, 6.0, 9.0];
        let f = ols(&x, &y).unwrap();
        let r = pearson_coefficient(&x, &y).unwrap();
        assert!((f.r_squared - r * r).abs() < 1e-12);
        assert!(f.residuals.iter().sum::<f64>().abs() < 1e-9 * 5.0);
    }

    #[test]
    fn uniform_weights_match_ols() {
        let x = [1.0, 2.0, 4.0, 7.0, 8.0];
        let y = [2.0, 1.0, 5.0, 6.0, 9.0];
        let a = ols(&x, &y).unwrap();
        let b = weighted_ols(&x, &y, &[3.0; 5]).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-12);
        assert!((a.intercept - b.intercept).abs() < 1e-12);
        assert!((a.r_squared - b.r_squared).abs() < 1e-12);
        assert!(b.weighted);
    }

    #[test]
    fn dominant_weight_pins_the_line() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 5.0, 2.0, 8.0, 3.0];
        let w = [1.0, 1.0, 1e6, 1.0, 1.0];
        let f = weighted_ols(&x, &y, &w).unwrap();
        assert!((f.predict(3.0) - 2.0).abs() < 1e-3);
    }

    #[test]
    fn errors() {
        assert_eq!(
            ols(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err(),
            Error::ConstantInput("x")
        );
        assert!(matches!(
            weighted_ols(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0], &[1.0, 0.0, 1.0]).unwrap_err(),
            Error::NonPositiveWeight { index: 1, .. }
        ));
        assert!(matches!(
            ols(&[1.0, 2.0], &[1.0, 2.0]).unwrap_err(),
            Error::TooFewObservations { .. }
        ));
    }
}
