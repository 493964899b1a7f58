use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::{average_ranks, pearson_coefficient, Method};
use super::{check_paired, mean};
use crate::error::{Error, Result};
use crate::rng::substream;

/// Exact enumeration visits n! orderings; capped here.
pub const EXACT_PERMUTATION_MAX_N: usize = 10;

// Relative slack when comparing a permuted statistic with the observed one,
// so that orderings tying the observed value are not lost to rounding.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMode {
    Exact,
    Sampled { count: u64, seed: u64 },
}

/// Centered copies plus the norm product, so each permuted coefficient is a
/// single dot product.
struct Prepared {
    xc: Vec<f64>,
    yc: Vec<f64>,
    denom: f64,
    observed: f64,
}

impl Prepared {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let (mx, my) = (mean(x), mean(y));
        let xc: Vec<f64> = x.iter().map(|v| v - mx).collect();
        let yc: Vec<f64> = y.iter().map(|v| v - my).collect();
        let sxx: f64 = xc.iter().map(|v| v * v).sum();
        let syy: f64 = yc.iter().map(|v| v * v).sum();
        let denom = sxx.sqrt() * syy.sqrt();
        let observed = dot(&xc, &yc) / denom;
        Self {
            xc,
            yc,
            denom,
            observed,
        }
    }

    fn threshold(&self) -> f64 {
        self.observed.abs() * (1.0 - TIE_EPS) - f64::EPSILON
    }

    fn is_extreme(&self, permuted_y: &[f64], threshold: f64) -> bool {
        (dot(&self.xc, permuted_y) / self.denom).abs() >= threshold
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Enumerates every ordering of `y` (Heap's algorithm) and returns the
/// fraction whose |r| reaches the observed |r|, identity included.
fn exact(prep: &Prepared) -> f64 {
    let n = prep.yc.len();
    let threshold = prep.threshold();
    let mut y = prep.yc.clone();
    let mut c = vec![0usize; n];
    let mut total: u64 = 1;
    let mut hits: u64 = u64::from(prep.is_extreme(&y, threshold));
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                y.swap(0, i);
            } else {
                y.swap(c[i], i);
            }
            total += 1;
            hits += u64::from(prep.is_extreme(&y, threshold));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

fn sampled(prep: &Prepared, count: u64, seed: u64) -> f64 {
    let threshold = prep.threshold();
    let hits: u64 = (0..count)
        .into_par_iter()
        .map_init(
            || prep.yc.clone(),
            |y, k| {
                y.copy_from_slice(&prep.yc);
                y.shuffle(&mut substream(seed, k));
                u64::from(prep.is_extreme(y, threshold))
            },
        )
        .sum();
    (hits + 1) as f64 / (count + 1) as f64
}

/// Exact two-sided permutation p-value for a Spearman coefficient, given
/// the rank vectors.
pub(crate) fn exact_on_ranks(rx: &[f64], ry: &[f64]) -> f64 {
    exact(&Prepared::new(rx, ry))
}

/// Two-sided permutation p-value: the share of permutations of `y` whose
/// |statistic| is at least the observed one. Exact mode includes the
/// identity in the enumeration; sampled mode counts it once in numerator
/// and denominator.
pub fn permutation_pvalue(
    x: &[f64],
    y: &[f64],
    statistic: Method,
    mode: PermutationMode,
) -> Result<f64> {
    check_paired(x, y, 2)?;
    // validates non-constant input
    pearson_coefficient(x, y)?;
    let prep = match statistic {
        Method::Pearson => Prepared::new(x, y),
        Method::Spearman => Prepared::new(&average_ranks(x), &average_ranks(y)),
    };
    match mode {
        PermutationMode::Exact => {
            if x.len() > EXACT_PERMUTATION_MAX_N {
                return Err(Error::PermutationTooLarge {
                    n: x.len(),
                    max: EXACT_PERMUTATION_MAX_N,
                });
            }
            Ok(exact(&prep))
        }
        PermutationMode::Sampled { count, seed } => {
            if count == 0 {
                return Err(Error::Domain(
                    "sampled permutation count must be positive".into(),
                ));
            }
            Ok(sampled(&prep, count, seed))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_enumeration() {
        // identity and full reversal reach |r| = 1; 2 of 6 orderings
        let p = permutation_pvalue(
            &[1.0, 2.0, 3.0],
            &[1.0, 2.0, 3.0],
            Method::Pearson,
            PermutationMode::Exact,
        )
        .unwrap();
        assert!((p - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn constant_and_oversize_inputs() {
        assert_eq!(
            permutation_pvalue(
                &[1.0, 2.0, 3.0],
                &[5.0, 5.0, 5.0],
                Method::Pearson,
                PermutationMode::Exact
            )
            .unwrap_err(),
            Error::ConstantInput("y")
        );
        let x: Vec<f64> = (0..11).map(f64::from).collect();
        assert!(matches!(
            permutation_pvalue(&x, &x, Method::Spearman, PermutationMode::Exact).unwrap_err(),
            Error::PermutationTooLarge { n: 11, max: 10 }
        ));
    }

    #[test]
    fn sampled_is_deterministic_per_seed() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0, 3.0];
        let y = [2.0, 3.0, 1.0, 9.0, 4.0, 4.5, 6.0];
        let mode = PermutationMode::Sampled {
            count: 5000,
            seed: 42,
        };
        let a = permutation_pvalue(&x, &y, Method::Pearson, mode).unwrap();
        let b = permutation_pvalue(&x, &y, Method::Pearson, mode).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn exact_counts_every_ordering() {
        // |rho| >= 0 holds for all 4! orderings
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 1.0, 3.0];
        let p = permutation_pvalue(&x, &y, Method::Spearman, PermutationMode::Exact).unwrap();
        assert_eq!(p, 1.0);
    }
}
