//! Extra-risk scores and the two-cluster D/R split.
//!
//! ERS is the product of the log10 coordinates of a tissue on the
//! (lscd, risk) plane. Risk is at most 1 and lscd is above 1, so the score is
//! non-positive; values closer to zero carry more evidence of risk beyond
//! what stem-cell divisions account for. RBERS is the vertical residual
//! above the replicative risk function (the log-log regression line).

use serde::{Deserialize, Serialize};

use crate::data::{csv_field, CohortDataset};
use crate::error::{Error, Result};
use crate::fmt::sci17;
use crate::stats::RegressionFit;

/// Samples per contour polyline.
pub const CONTOUR_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cluster {
    /// Deterministic: environment or inheritance dominates.
    D,
    /// Replicative.
    R,
}

impl std::fmt::Display for Cluster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Cluster::D => "D",
            Cluster::R => "R",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub name: String,
    pub ers: f64,
    pub rbers: f64,
    pub cluster_kmeans: Cluster,
    pub cluster_ward: Cluster,
}

fn check_domain(r: f64, lscd: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("risk must lie in (0, 1], got {r}")));
    }
    if !(lscd > 1.0 && lscd.is_finite()) {
        return Err(Error::Domain(format!(
            "lscd must exceed 1 for a meaningful extra-risk score, got {lscd}"
        )));
    }
    Ok(())
}

/// log10(r) * log10(lscd).
pub fn ers(r: f64, lscd: f64) -> Result<f64> {
    check_domain(r, lscd)?;
    Ok(r.log10() * lscd.log10())
}

/// log10(r) minus the fitted line evaluated at log10(lscd).
pub fn rbers(r: f64, lscd: f64, fit: &RegressionFit) -> Result<f64> {
    check_domain(r, lscd)?;
    Ok(r.log10() - fit.predict(lscd.log10()))
}

/// Conversion from one time unit to a finer one: `factor` target units per
/// source unit (80 years per lifespan, say).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitConversion {
    factor: f64,
    pub from_unit: String,
    pub to_unit: String,
}

impl UnitConversion {
    pub fn new(
        factor: f64,
        from_unit: impl Into<String>,
        to_unit: impl Into<String>,
    ) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Domain(format!(
                "unit factor must be positive, got {factor}"
            )));
        }
        Ok(Self {
            factor,
            from_unit: from_unit.into(),
            to_unit: to_unit.into(),
        })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }
}

/// Expresses risk and lscd per target unit: both are divided by the factor.
pub fn rescale_units(dataset: &CohortDataset, conv: &UnitConversion) -> Result<CohortDataset> {
    let t = conv.factor;
    let records = dataset
        .records()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.lifetime_risk /= t;
            r.lscd /= t;
            r
        })
        .collect();
    dataset.with_records(records, conv.to_unit.clone())
}

/// ERS of per-unit values, converting back to the source unit before taking
/// logs. Equal to the ERS of the unrescaled record.
pub fn ers_unit_aware(r_per_unit: f64, lscd_per_unit: f64, conv: &UnitConversion) -> Result<f64> {
    ers(r_per_unit * conv.factor, lscd_per_unit * conv.factor)
}

/// Points of the level set `ers = level` on the (log10 lscd, log10 risk)
/// plane, sampled at [`CONTOUR_SAMPLES`] evenly spaced x in `[x_min, x_max]`.
/// Only x > 0 is sampled.
pub fn ers_contour(level: f64, x_min: f64, x_max: f64) -> Vec<(f64, f64)> {
    let lo = x_min.max(f64::MIN_POSITIVE);
    if x_max <= lo {
        return Vec::new();
    }
    let step = (x_max - lo) / (CONTOUR_SAMPLES - 1) as f64;
    (0..CONTOUR_SAMPLES)
        .map(|i| {
            let x = if i + 1 == CONTOUR_SAMPLES {
                x_max
            } else {
                lo + step * i as f64
            };
            (x, level / x)
        })
        .collect()
}

fn check_clusterable(scores: &[f64]) -> Result<()> {
    if scores.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: scores.len(),
        });
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite score".into()));
    }
    if scores.iter().all(|v| *v == scores[0]) {
        return Err(Error::ConstantInput("scores"));
    }
    Ok(())
}

/// Sum over both clusters of squared deviations from the cluster mean.
pub fn within_cluster_sse(scores: &[f64], labels: &[Cluster]) -> f64 {
    [Cluster::D, Cluster::R]
        .iter()
        .map(|c| {
            let members: Vec<f64> = scores
                .iter()
                .zip(labels)
                .filter(|(_, l)| *l == c)
                .map(|(s, _)| *s)
                .collect();
            if members.is_empty() {
                return 0.0;
            }
            let m = members.iter().sum::<f64>() / members.len() as f64;
            members.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
        })
        .sum()
}

/// Globally optimal two-means partition of 1-D scores.
///
/// An optimal 2-partition of points on a line is a split of the sorted
/// sequence, so all n-1 split points are scanned. The upper group (higher
/// mean) is labelled D.
pub fn kmeans2_1d(scores: &[f64]) -> Result<Vec<Cluster>> {
    check_clusterable(scores)?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| scores[i]).collect();

    let mut sum = vec![0.0; n + 1];
    let mut sum_sq = vec![0.0; n + 1];
    for (i, v) in sorted.iter().enumerate() {
        sum[i + 1] = sum[i] + v;
        sum_sq[i + 1] = sum_sq[i] + v * v;
    }
    let sse = |a: usize, b: usize| {
        let k = (b - a) as f64;
        let s = sum[b] - sum[a];
        (sum_sq[b] - sum_sq[a] - s * s / k).max(0.0)
    };

    let mut best = (f64::INFINITY, 1);
    for split in 1..n {
        // a split between equal values is never better than one beside them
        if sorted[split] == sorted[split - 1] {
            continue;
        }
        let cost = sse(0, split) + sse(split, n);
        if cost < best.0 {
            best = (cost, split);
        }
    }
    let mut labels = vec![Cluster::R; n];
    for &i in &order[best.1..] {
        labels[i] = Cluster::D;
    }
    Ok(labels)
}

struct Group {
    members: Vec<usize>,
    sum: f64,
    first: usize,
}

impl Group {
    fn mean(&self) -> f64 {
        self.sum / self.members.len() as f64
    }
}

/// Agglomerative clustering with Ward's minimum-variance linkage, cut at two
/// clusters. Equal-cost merges go to the pair whose smallest original index
/// is lowest.
pub fn ward2(scores: &[f64]) -> Result<Vec<Cluster>> {
    check_clusterable(scores)?;
    let mut groups: Vec<Group> = scores
        .iter()
        .enumerate()
        .map(|(i, &v)| Group {
            members: vec![i],
            sum: v,
            first: i,
        })
        .collect();

    while groups.len() > 2 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                let (ga, gb) = (&groups[a], &groups[b]);
                let (na, nb) = (ga.members.len() as f64, gb.members.len() as f64);
                let diff = ga.mean() - gb.mean();
                let cost = na * nb / (na + nb) * diff * diff;
                let key = (ga.first.min(gb.first), ga.first.max(gb.first));
                let better = match best {
                    None => true,
                    Some((c, k, _, _)) => cost < c || (cost == c && key < k),
                };
                if better {
                    best = Some((cost, key, a, b));
                }
            }
        }
        let (_, _, a, b) = best.expect("at least two groups");
        let gb = groups.remove(b);
        let ga = &mut groups[a];
        ga.members.extend(gb.members);
        ga.sum += gb.sum;
        ga.first = ga.first.min(gb.first);
    }

    let d_group = if groups[0].mean() > groups[1].mean() {
        0
    } else {
        1
    };
    let mut labels = vec![Cluster::R; scores.len()];
    for &i in &groups[d_group].members {
        labels[i] = Cluster::D;
    }
    Ok(labels)
}

/// ERS, RBERS and both cluster labels per record, in dataset order.
pub fn score_table(dataset: &CohortDataset, fit: &RegressionFit) -> Result<Vec<ScoreRecord>> {
    let mut ers_values = Vec::with_capacity(dataset.len());
    let mut rbers_values = Vec::with_capacity(dataset.len());
    for r in dataset.records() {
        let e =
            ers(r.lifetime_risk, r.lscd).map_err(|e| Error::Domain(format!("{}: {e}", r.name)))?;
        ers_values.push(e);
        rbers_values.push(rbers(r.lifetime_risk, r.lscd, fit)?);
    }
    let km = kmeans2_1d(&ers_values)?;
    let wd = ward2(&ers_values)?;
    Ok(dataset
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| ScoreRecord {
            name: r.name.clone(),
            ers: ers_values[i],
            rbers: rbers_values[i],
            cluster_kmeans: km[i],
            cluster_ward: wd[i],
        })
        .collect())
}

pub fn write_scores_csv(scores: &[ScoreRecord]) -> String {
    let mut out = String::from("name,ers,rbers,cluster_kmeans,cluster_ward\n");
    for s in scores {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_field(&s.name),
            sci17(s.ers),
            sci17(s.rbers),
            s.cluster_kmeans,
            s.cluster_ward
        ));
    }
    out
}
