use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::{check_paired, mean, permutation};
use crate::error::{Error, Result};

/// Largest sample for which Spearman p-values are enumerated exactly.
pub const EXACT_SPEARMAN_MAX_N: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pearson,
    Spearman,
}

/// How a p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    TApprox,
    ExactPermutation,
    SampledPermutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub coefficient: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub ci_level: Option<f64>,
    /// Set when |r| = 1 and the interval collapses onto the point estimate.
    #[serde(default)]
    pub ci_degenerate: bool,
    /// Two-sided.
    pub p_value: f64,
    pub method: Method,
    pub p_method: PMethod,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInterval {
    pub low: f64,
    pub high: f64,
    pub degenerate: bool,
}

/// Sample Pearson coefficient. Errors on constant input.
pub fn pearson_coefficient(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y, 2)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ConstantInput("x"));
    }
    if syy == 0.0 {
        return Err(Error::ConstantInput("y"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    // exactly linear data can land a few ulps short of +/-1
    if 1.0 - r.abs() <= 4.0 * f64::EPSILON {
        return Ok(r.signum());
    }
    Ok(r)
}

/// Two-sided p-value for H0: rho = 0 via t = r sqrt((n-2)/(1-r^2)) on n-2
/// degrees of freedom.
pub fn students_t_two_sided(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

fn normal_quantile(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// Fisher z-transform interval: tanh(atanh(r) +/- z / sqrt(n - 3)).
pub fn fisher_ci(r: f64, n: usize, level: f64) -> Result<FisherInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    if n < 4 {
        return Err(Error::TooFewObservations { needed: 4, got: n });
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("correlation out of range: {r}")));
    }
    if r.abs() == 1.0 {
        return Ok(FisherInterval {
            low: r,
            high: r,
            degenerate: true,
        });
    }
    let z = r.atanh();
    let half = normal_quantile(level) / ((n - 3) as f64).sqrt();
    Ok(FisherInterval {
        low: (z - half).tanh(),
        high: (z + half).tanh(),
        degenerate: false,
    })
}

/// Pearson correlation with a Fisher CI (when n >= 4) and a t-approximation
/// p-value.
pub fn pearson(x: &[f64], y: &[f64], ci_level: f64) -> Result<CorrelationResult> {
    check_paired(x, y, 3)?;
    let r = pearson_coefficient(x, y)?;
    let n = x.len();
    let ci = if n >= 4 {
        Some(fisher_ci(r, n, ci_level)?)
    } else {
        None
    };
    Ok(CorrelationResult {
        coefficient: r,
        ci_low: ci.map(|c| c.low),
        ci_high: ci.map(|c| c.high),
        ci_level: ci.map(|_| ci_level),
        ci_degenerate: ci.is_some_and(|c| c.degenerate),
        p_value: students_t_two_sided(r, n),
        method: Method::Pearson,
        p_method: PMethod::TApprox,
        n,
    })
}

/// 1-based ranks; tied values share the mean of their rank positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation. The p-value is enumerated exactly for
/// n <= 9 and t-approximated above that. No interval is reported.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    check_paired(x, y, 3)?;
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let rho = pearson_coefficient(&rx, &ry)?;
    let n = x.len();
    let (p_value, p_method) = if n <= EXACT_SPEARMAN_MAX_N {
        (
            permutation::exact_on_ranks(&rx, &ry),
            PMethod::ExactPermutation,
        )
    } else {
        (students_t_two_sided(rho, n), PMethod::TApprox)
    };
    Ok(CorrelationResult {
        coefficient: rho,
        ci_low: None,
        ci_high: None,
        ci_level: None,
        ci_degenerate: false,
        p_value,
        method: Method::Spearman,
        p_method,
        n,
    })
}

/// Fraction of variance explained: the squared Pearson coefficient.
pub fn explained_variation(result: &CorrelationResult) -> Result<f64> {
    match result.method {
        Method::Pearson => Ok(result.coefficient * result.coefficient),
        Method::Spearman => Err(Error::Domain(
            "explained variation is defined for Pearson correlations only".into(),
        )),
    }
}
