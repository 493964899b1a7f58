//! End-to-end analyses over ingested datasets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{write_cohort_csv, write_radiation_csv, CohortDataset, RadiationRecord};
use crate::error::{Error, Result};
use crate::multistage::{predicted_lifetime_risk_with, RiskModel};
use crate::scores::{score_table, ScoreRecord};
use crate::stats::{
    explained_variation, ols, pearson, spearman, weighted_ols, CorrelationResult, RegressionFit,
};

pub const DEFAULT_CI_LEVEL: f64 = 0.95;
/// Driver mutation probability per cell division.
pub const DEFAULT_DRIVER_MUTATION_RATE: f64 = 5e-7;
pub const DEFAULT_DRIVER_COUNT: usize = 3;

/// Tissues for which two drivers are assumed instead of three. Matched as
/// case-insensitive substrings of the record name.
pub const TWO_DRIVER_TISSUES: [&str; 7] = [
    "osteosarcoma",
    "ovarian germ cell",
    "glioblastoma",
    "medulloblastoma",
    "gallbladder",
    "medullary",
    "follicular",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure1Report {
    pub n: usize,
    pub pearson_loglog: CorrelationResult,
    pub spearman_loglog: CorrelationResult,
    pub pearson_raw: CorrelationResult,
    /// Log-log OLS fit; the replicative risk function.
    pub fit: RegressionFit,
    pub explained_loglog: f64,
    /// Squared Fisher-interval endpoints of `pearson_loglog`.
    pub explained_loglog_ci: Option<(f64, f64)>,
    pub explained_raw: f64,
    /// Log-log fit weighted by untransformed lifetime risk.
    pub weighted_fit: RegressionFit,
    pub weighted_explained: f64,
    /// 10^intercept: risk at one lifetime division.
    pub intercept_risk: f64,
}

fn squared_interval(low: f64, high: f64) -> (f64, f64) {
    if low >= 0.0 {
        (low * low, high * high)
    } else if high <= 0.0 {
        (high * high, low * low)
    } else {
        (0.0, (low * low).max(high * high))
    }
}

/// Correlations and fits on the (lscd, risk) plane, raw and log10.
///
/// Inputs are put in a canonical order before any summation so the numbers do
/// not depend on record order; residuals are reported in record order.
pub fn analyze_figure1(dataset: &CohortDataset) -> Result<Figure1Report> {
    let n = dataset.len();
    if n < 4 {
        return Err(Error::TooFewObservations { needed: 4, got: n });
    }
    let recs = dataset.records();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        recs[a]
            .lscd
            .total_cmp(&recs[b].lscd)
            .then(recs[a].lifetime_risk.total_cmp(&recs[b].lifetime_risk))
    });
    let raw_x: Vec<f64> = order.iter().map(|&i| recs[i].lscd).collect();
    let raw_y: Vec<f64> = order.iter().map(|&i| recs[i].lifetime_risk).collect();
    let x: Vec<f64> = raw_x.iter().map(|v| v.log10()).collect();
    let y: Vec<f64> = raw_y.iter().map(|v| v.log10()).collect();

    let pearson_loglog = pearson(&x, &y, DEFAULT_CI_LEVEL)?;
    let spearman_loglog = spearman(&x, &y)?;
    let pearson_raw = pearson(&raw_x, &raw_y, DEFAULT_CI_LEVEL)?;

    let restore = |mut fit: RegressionFit| {
        let mut residuals = vec![0.0; n];
        let mut weights = fit.weights.as_ref().map(|_| vec![0.0; n]);
        for (k, &i) in order.iter().enumerate() {
            residuals[i] = fit.residuals[k];
            if let (Some(w), Some(src)) = (weights.as_mut(), fit.weights.as_ref()) {
                w[i] = src[k];
            }
        }
        fit.residuals = residuals;
        fit.weights = weights;
        fit
    };
    let fit = restore(ols(&x, &y)?);
    let weighted_fit = restore(weighted_ols(&x, &y, &raw_y)?);

    let explained_loglog_ci = match (pearson_loglog.ci_low, pearson_loglog.ci_high) {
        (Some(lo), Some(hi)) => Some(squared_interval(lo, hi)),
        _ => None,
    };
    Ok(Figure1Report {
        n,
        explained_loglog: explained_variation(&pearson_loglog)?,
        explained_loglog_ci,
        explained_raw: explained_variation(&pearson_raw)?,
        weighted_explained: weighted_fit.r_squared,
        intercept_risk: 10f64.powf(fit.intercept),
        pearson_loglog,
        spearman_loglog,
        pearson_raw,
        fit,
        weighted_fit,
    })
}

/// Spearman correlations of radiation excess risk against division and
/// stem-cell counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiationReport {
    pub n: usize,
    pub ear_vs_lscd: CorrelationResult,
    pub err_vs_lscd: CorrelationResult,
    pub ear_vs_s: CorrelationResult,
    pub err_vs_s: CorrelationResult,
    pub ear_vs_sd_product: CorrelationResult,
    pub err_vs_sd_product: CorrelationResult,
}

pub fn analyze_radiation(records: &[RadiationRecord]) -> Result<RadiationReport> {
    if records.len() < 3 {
        return Err(Error::TooFewObservations {
            needed: 3,
            got: records.len(),
        });
    }
    let col = |f: fn(&RadiationRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let (ear, err) = (col(|r| r.ear), col(|r| r.err));
    let (lscd, s, sd) = (col(|r| r.lscd), col(|r| r.s), col(|r| r.sd_product));
    let named = |label: &str, a: &[f64], b: &[f64]| {
        spearman(a, b).map_err(|e| Error::Domain(format!("{label}: {e}")))
    };
    Ok(RadiationReport {
        n: records.len(),
        ear_vs_lscd: named("EAR vs lscd", &ear, &lscd)?,
        err_vs_lscd: named("ERR vs lscd", &err, &lscd)?,
        ear_vs_s: named("EAR vs s", &ear, &s)?,
        err_vs_s: named("ERR vs s", &err, &s)?,
        ear_vs_sd_product: named("EAR vs s*d", &ear, &sd)?,
        err_vs_sd_product: named("ERR vs s*d", &err, &sd)?,
    })
}

/// Required drivers for a tissue when no override is given.
pub fn default_driver_count(name: &str) -> usize {
    let lower = name.to_lowercase();
    if TWO_DRIVER_TISSUES.iter().any(|k| lower.contains(k)) {
        2
    } else {
        DEFAULT_DRIVER_COUNT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub name: String,
    pub drivers: usize,
    pub turnovers: f64,
    pub predicted_risk: f64,
    pub observed_risk: f64,
    /// log10(observed / predicted); absent when the prediction is zero.
    pub log10_ratio: Option<f64>,
    pub out_of_domain: bool,
    pub clamped: bool,
    pub regime_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub u: f64,
    pub model: RiskModel,
    pub entries: Vec<PredictionEntry>,
    /// Tissues whose prediction is within one log10 unit of the observation.
    pub within_one_log10: usize,
}

/// Replicative-only lifetime risk per tissue against the observed risk.
pub fn predict_tr2(
    dataset: &CohortDataset,
    turnovers: &BTreeMap<String, f64>,
    u: f64,
    n_map: &BTreeMap<String, usize>,
) -> Result<PredictionReport> {
    predict_tr2_with(RiskModel::ArmitageDoll, dataset, turnovers, u, n_map)
}

pub fn predict_tr2_with(
    model: RiskModel,
    dataset: &CohortDataset,
    turnovers: &BTreeMap<String, f64>,
    u: f64,
    n_map: &BTreeMap<String, usize>,
) -> Result<PredictionReport> {
    let mut entries = Vec::with_capacity(dataset.len());
    for r in dataset.records() {
        let d = *turnovers
            .get(&r.name)
            .ok_or_else(|| Error::MissingTurnover(r.name.clone()))?;
        let s = r.s.ok_or_else(|| Error::MissingStemCells(r.name.clone()))?;
        let drivers = n_map
            .get(&r.name)
            .copied()
            .unwrap_or_else(|| default_driver_count(&r.name));
        let pred = predicted_lifetime_risk_with(model, s, d, u, drivers)?;
        let out_of_domain = pred.risk <= 0.0;
        entries.push(PredictionEntry {
            name: r.name.clone(),
            drivers,
            turnovers: d,
            predicted_risk: pred.risk,
            observed_risk: r.lifetime_risk,
            log10_ratio: (!out_of_domain).then(|| (r.lifetime_risk / pred.risk).log10()),
            out_of_domain,
            clamped: pred.clamped,
            regime_warning: pred.regime_warning,
        });
    }
    let within_one_log10 = entries
        .iter()
        .filter(|e| e.log10_ratio.is_some_and(|v| v.abs() <= 1.0))
        .count();
    Ok(PredictionReport {
        u,
        model,
        entries,
        within_one_log10,
    })
}

/// `name,predicted_risk,observed_risk,log10_ratio`
pub fn write_prediction_csv(report: &PredictionReport) -> String {
    use crate::fmt::sci17;
    let mut out = String::from("name,predicted_risk,observed_risk,log10_ratio\n");
    for e in &report.entries {
        out.push_str(&format!(
            "{},{},{},{}\n",
            crate::data::csv_field(&e.name),
            sci17(e.predicted_risk),
            sci17(e.observed_risk),
            e.log10_ratio.map(sci17).unwrap_or_default()
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportOptions {
    /// Per-tissue turnovers; predictions are produced only when present.
    pub turnovers: Option<BTreeMap<String, f64>>,
    /// Driver mutation probability; defaults to [`DEFAULT_DRIVER_MUTATION_RATE`].
    pub u: Option<f64>,
    pub n_map: BTreeMap<String, usize>,
    pub risk_model: RiskModel,
    /// Recorded in the metadata.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub version: String,
    pub dataset_sha256: String,
    pub radiation_sha256: Option<String>,
    pub unit_label: String,
    pub ci_level: f64,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub approximate_merges: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub metadata: ReportMetadata,
    pub n_records: usize,
    pub figure1: Figure1Report,
    pub scores: Vec<ScoreRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radiation: Option<RadiationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PredictionReport>,
}

impl FullReport {
    /// Pretty JSON with every real written to 17 significant digits.
    pub fn to_json(&self) -> String {
        crate::fmt::to_json_string(self)
    }
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Content hash of a dataset's canonical CSV form.
pub fn dataset_hash(dataset: &CohortDataset) -> String {
    sha256_hex(&write_cohort_csv(dataset))
}

pub fn full_report(
    dataset: &CohortDataset,
    radiation: Option<&[RadiationRecord]>,
    options: &ReportOptions,
) -> Result<FullReport> {
    let figure1 = analyze_figure1(dataset)?;
    let scores = score_table(dataset, &figure1.fit)?;
    let radiation_report = radiation.map(analyze_radiation).transpose()?;
    let prediction = match &options.turnovers {
        Some(t) => Some(predict_tr2_with(
            options.risk_model,
            dataset,
            t,
            options.u.unwrap_or(DEFAULT_DRIVER_MUTATION_RATE),
            &options.n_map,
        )?),
        None => None,
    };
    Ok(FullReport {
        metadata: ReportMetadata {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_sha256: dataset_hash(dataset),
            radiation_sha256: radiation.map(|r| sha256_hex(&write_radiation_csv(r))),
            unit_label: dataset.unit_label().to_string(),
            ci_level: DEFAULT_CI_LEVEL,
            seed: options.seed,
            approximate_merges: dataset.approximate_merges().to_vec(),
        },
        n_records: dataset.len(),
        figure1,
        scores,
        radiation: radiation_report,
        prediction,
    })
}
