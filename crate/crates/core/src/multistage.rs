//! Multistage incidence without clonal expansion.
//!
//! A stem-cell lineage must acquire its required driver mutations in order;
//! the i-th is gained at a division with probability `u[i]`. For small
//! `u * t` the incidence in a tissue of `s` stem cells that still needs `n`
//! drivers is `s * u1 * ... * un * t^(n-1) / (n-1)!`. Radiation is modelled
//! as supplying one driver, so an exposed group needs `n` drivers while the
//! control group needs `n + 1`.

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sci17;
use crate::rng::{substream, GENERATOR_NAME};

/// Above this `u * t` the small-rate approximations are flagged.
pub const REGIME_WARN_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistageParams {
    s: f64,
    u: Vec<f64>,
    n: usize,
}

impl MultistageParams {
    pub fn new(s: f64, u: Vec<f64>, n: usize) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!(
                "stem-cell count must be positive, got {s}"
            )));
        }
        if n == 0 {
            return Err(Error::Domain("at least one driver is required".into()));
        }
        if u.len() < n {
            return Err(Error::Domain(format!(
                "{n} drivers need at least {n} mutation probabilities, got {}",
                u.len()
            )));
        }
        if let Some(bad) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!(
                "mutation probability out of [0, 1]: {bad}"
            )));
        }
        Ok(Self { s, u, n })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// True when some `u_i * t` used at horizon `t` exceeds
    /// [`REGIME_WARN_THRESHOLD`].
    pub fn outside_small_rate_regime(&self, t: f64) -> bool {
        self.u.iter().any(|u| u * t > REGIME_WARN_THRESHOLD)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be positive, got {t}")))
    }
}

/// Incidence in the exposed group: `s u1..un t^(n-1) / (n-1)!`.
pub fn incidence_exposed(p: &MultistageParams, t: f64) -> Result<f64> {
    check_time(t)?;
    let n = p.n;
    let prod: f64 = p.u[..n].iter().product();
    Ok(p.s * prod * t.powi(n as i32 - 1) / factorial(n - 1))
}

/// Incidence in the unexposed group: `s u1..u(n+1) t^n / n!`.
pub fn incidence_control(p: &MultistageParams, t: f64) -> Result<f64> {
    check_time(t)?;
    let n = p.n;
    if p.u.len() < n + 1 {
        return Err(Error::Domain(format!(
            "control incidence needs {} mutation probabilities, got {}",
            n + 1,
            p.u.len()
        )));
    }
    let prod: f64 = p.u[..=n].iter().product();
    Ok(p.s * prod * t.powi(n as i32) / factorial(n))
}

/// Excess relative risk `(n - u t) / (u t)`, decreasing in t.
pub fn err(n: usize, u_next: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if !(u_next > 0.0 && u_next <= 1.0) {
        return Err(Error::Domain(format!(
            "u_next must lie in (0, 1], got {u_next}"
        )));
    }
    let ut = u_next * t;
    Ok((n as f64 - ut) / ut)
}

/// Excess absolute rate `I_s(t) (1 - u t / n)`.
pub fn ear(p: &MultistageParams, u_next: f64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u_next) {
        return Err(Error::Domain(format!(
            "u_next must lie in [0, 1], got {u_next}"
        )));
    }
    Ok(incidence_exposed(p, t)? * (1.0 - u_next * t / p.n as f64))
}

/// Closed form used for lifetime-risk prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskModel {
    /// `s (u d)^n / n!`
    #[default]
    ArmitageDoll,
    /// `s C(d, n) u^n`, for cross-checking.
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPrediction {
    /// Clamped to [0, 1].
    pub risk: f64,
    pub unclamped: f64,
    pub clamped: bool,
    /// `u * turnovers` above [`REGIME_WARN_THRESHOLD`].
    pub regime_warning: bool,
}

/// Lifetime risk from replicative mutations alone, with time replaced by the
/// number of cell turnovers `d`.
pub fn predicted_lifetime_risk(s: f64, turnovers: f64, u: f64, n: usize) -> Result<RiskPrediction> {
    predicted_lifetime_risk_with(RiskModel::ArmitageDoll, s, turnovers, u, n)
}

pub fn predicted_lifetime_risk_with(
    model: RiskModel,
    s: f64,
    turnovers: f64,
    u: f64,
    n: usize,
) -> Result<RiskPrediction> {
    if n < 1 {
        return Err(Error::Domain("driver count must be at least 1".into()));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!(
            "stem-cell count must be positive, got {s}"
        )));
    }
    if !(turnovers > 0.0 && turnovers.is_finite()) {
        return Err(Error::Domain(format!(
            "turnovers must be positive, got {turnovers}"
        )));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!(
            "mutation probability out of [0, 1]: {u}"
        )));
    }
    let raw = match model {
        RiskModel::ArmitageDoll => s * (u * turnovers).powi(n as i32) / factorial(n),
        RiskModel::Binomial => {
            let choose: f64 = (0..n)
                .map(|k| (turnovers - k as f64).max(0.0) / (k + 1) as f64)
                .product();
            s * choose * u.powi(n as i32)
        }
    };
    let risk = raw.clamp(0.0, 1.0);
    Ok(RiskPrediction {
        risk,
        unclamped: raw,
        clamped: risk != raw,
        regime_warning: u * turnovers > REGIME_WARN_THRESHOLD,
    })
}

/// Which driver count the simulated lineages need.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// `n` drivers.
    #[default]
    Exposed,
    /// `n + 1` drivers.
    Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub lineages: u64,
    /// Time horizon in divisions.
    pub divisions: u64,
    pub seed: u64,
    /// Division counts at which the curve is reported.
    pub record_grid: Vec<u64>,
    #[serde(default)]
    pub mode: SimMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub t: u64,
    pub cumulative_fraction: f64,
    /// Binomial standard error of the fraction.
    pub stderr: f64,
    /// Lineages transformed by time t.
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCurve {
    pub lineages: u64,
    pub drivers_required: usize,
    pub seed: u64,
    pub generator: String,
    pub points: Vec<SimPoint>,
}

/// Divisions until a success with per-division probability `u`, or `None`
/// when it can never happen.
fn waiting_time<R: RngExt>(rng: &mut R, u: f64) -> Option<u64> {
    if u <= 0.0 {
        return None;
    }
    if u >= 1.0 {
        return Some(1);
    }
    let uniform = 1.0 - rng.random::<f64>(); // (0, 1]
    let k = (uniform.ln() / (-u).ln_1p()).floor();
    if k >= u64::MAX as f64 {
        None
    } else {
        Some(k as u64 + 1)
    }
}

/// Division at which one lineage acquires its last required driver, if it
/// does so within the horizon.
fn lineage_completion(seed: u64, index: u64, u: &[f64], horizon: u64) -> Option<u64> {
    let mut rng = substream(seed, index);
    let mut t: u64 = 0;
    for &ui in u {
        t = t.saturating_add(waiting_time(&mut rng, ui)?);
        if t > horizon {
            return None;
        }
    }
    Some(t)
}

/// Simulates independent lineages accumulating drivers one division at a
/// time and reports the cumulative transformed fraction on the grid.
///
/// Each lineage draws from its own substream of `(seed, lineage index)`, so
/// the curve is identical for any number of worker threads.
pub fn simulate_cohort(p: &MultistageParams, cfg: &SimConfig) -> Result<SimCurve> {
    if cfg.record_grid.is_empty() {
        return Err(Error::Domain("record grid is empty".into()));
    }
    if cfg.lineages == 0 || cfg.divisions == 0 {
        return Err(Error::Domain(
            "lineages and divisions must be at least 1".into(),
        ));
    }
    if let Some(t) = cfg.record_grid.iter().find(|t| **t > cfg.divisions) {
        return Err(Error::Domain(format!(
            "grid point {t} lies beyond the horizon of {} divisions",
            cfg.divisions
        )));
    }
    let required = match cfg.mode {
        SimMode::Exposed => p.n,
        SimMode::Control => p.n + 1,
    };
    if p.u.len() < required {
        return Err(Error::Domain(format!(
            "{required} drivers need {required} mutation probabilities, got {}",
            p.u.len()
        )));
    }
    let u = &p.u[..required];
    let horizon = cfg.divisions;
    let bins = horizon as usize + 1;

    let counts = (0..cfg.lineages)
        .into_par_iter()
        .fold(
            || vec![0u64; bins],
            |mut acc, i| {
                if let Some(t) = lineage_completion(cfg.seed, i, u, horizon) {
                    acc[t as usize] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let mut cumulative = counts;
    for t in 1..bins {
        cumulative[t] += cumulative[t - 1];
    }
    let m = cfg.lineages as f64;
    let points = cfg
        .record_grid
        .iter()
        .map(|&t| {
            let events = cumulative[t as usize];
            let f = events as f64 / m;
            SimPoint {
                t,
                cumulative_fraction: f,
                stderr: (f * (1.0 - f) / m).sqrt(),
                events,
            }
        })
        .collect();
    Ok(SimCurve {
        lineages: cfg.lineages,
        drivers_required: required,
        seed: cfg.seed,
        generator: GENERATOR_NAME.to_string(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardEstimate {
    pub t_start: u64,
    pub t_end: u64,
    /// New cases per division per lineage still untransformed at `t_start`.
    pub hazard: f64,
    /// Cases within the window.
    pub events: u64,
}

/// Discrete hazard between consecutive grid points of a curve.
pub fn discrete_hazards(curve: &SimCurve) -> Vec<HazardEstimate> {
    curve
        .points
        .windows(2)
        .filter(|w| w[1].t > w[0].t)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let at_risk = (curve.lineages - a.events) as f64;
            let events = b.events - a.events;
            HazardEstimate {
                t_start: a.t,
                t_end: b.t,
                hazard: events as f64 / ((b.t - a.t) as f64 * at_risk),
                events,
            }
        })
        .collect()
}

/// `t,cumulative_fraction,stderr,events`, preceded by `#` comment lines.
pub fn write_curve_csv(curve: &SimCurve, metadata: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in metadata {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    out.push_str("t,cumulative_fraction,stderr,events\n");
    for p in &curve.points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.t,
            sci17(p.cumulative_fraction),
            sci17(p.stderr),
            p.events
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(s: f64, u: &[f64], n: usize) -> MultistageParams {
        MultistageParams::new(s, u.to_vec(), n).unwrap()
    }

    #[test]
    fn incidence_examples() {
        let p = params(10.0, &[0.1], 1);
        for t in [0.5, 3.0, 100.0] {
            assert!((incidence_exposed(&p, t).unwrap() - 1.0).abs() < 1e-15);
        }
        let p = params(1.0, &[0.1, 0.1], 2);
        assert!((incidence_exposed(&p, 4.0).unwrap() - 0.04).abs() < 1e-15);
        let p = params(1.0, &[0.1, 0.1], 1);
        assert!((incidence_control(&p, 2.0).unwrap() - 0.02).abs() < 1e-15);
        assert!(incidence_exposed(&p, 0.0).is_err());
        assert!(incidence_control(&params(1.0, &[0.1], 1), 2.0).is_err());
    }

    #[test]
    fn ratio_matches_err() {
        let p = params(1.0, &[0.3, 0.01], 1);
        let (is, ic) = (
            incidence_exposed(&p, 10.0).unwrap(),
            incidence_control(&p, 10.0).unwrap(),
        );
        assert!((is / ic - 10.0).abs() < 1e-12);
        assert!(((is - ic) / ic - err(1, 0.01, 10.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn err_examples() {
        assert!((err(2, 0.01, 10.0).unwrap() - 19.0).abs() < 1e-12);
        assert!(err(2, 0.01, 200.0).unwrap().abs() < 1e-15);
        let grid: Vec<f64> = (1..=200).map(f64::from).collect();
        let vals: Vec<f64> = grid.iter().map(|t| err(2, 0.01, *t).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!(err(2, 0.01, 0.0).is_err());
    }

    #[test]
    fn ear_examples() {
        let p = params(1.0, &[0.1, 0.1], 2);
        assert!(ear(&p, 0.5, 4.0).unwrap().abs() < 1e-15);
        assert!((ear(&p, 0.001, 4.0).unwrap() - 0.039_92).abs() < 1e-15);
        // increasing while u t <= n - 1
        let p = params(1.0, &[0.01, 0.02, 0.005], 3);
        let vals: Vec<f64> = (1..=400)
            .map(|t| ear(&p, 0.005, f64::from(t)).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn prediction_examples() {
        assert_eq!(predicted_lifetime_risk(1e8, 1e3, 0.0, 3).unwrap().risk, 0.0);
        let p = predicted_lifetime_risk(1e8, 1e3, 5e-7, 3).unwrap();
        assert!((p.risk - 2.083_333_333_333_333e-3).abs() < 1e-15);
        assert!(!p.clamped && !p.regime_warning);
        let p = predicted_lifetime_risk(1.0, 1e6, 1e-6, 1).unwrap();
        assert!((p.risk - 1.0).abs() < 1e-12);
        let p = predicted_lifetime_risk(10.0, 1e6, 1e-6, 1).unwrap();
        assert!(p.clamped && p.risk == 1.0 && p.regime_warning);
        assert!(predicted_lifetime_risk(1.0, 1.0, 0.1, 0).is_err());
    }

    #[test]
    fn binomial_mode_agrees_when_drivers_few() {
        let a = predicted_lifetime_risk_with(RiskModel::ArmitageDoll, 1e8, 1e4, 5e-7, 3).unwrap();
        let b = predicted_lifetime_risk_with(RiskModel::Binomial, 1e8, 1e4, 5e-7, 3).unwrap();
        assert!(((a.risk - b.risk) / a.risk).abs() < 0.01);
    }

    fn cfg(lineages: u64, divisions: u64, grid: Vec<u64>) -> SimConfig {
        SimConfig {
            lineages,
            divisions,
            seed: 11,
            record_grid: grid,
            mode: SimMode::Exposed,
        }
    }

    #[test]
    fn certain_and_impossible_mutation() {
        let c =
            simulate_cohort(&params(1.0, &[1.0, 1.0], 2), &cfg(500, 5, vec![1, 2, 3, 5])).unwrap();
        let f: Vec<f64> = c.points.iter().map(|p| p.cumulative_fraction).collect();
        assert_eq!(f, [0.0, 1.0, 1.0, 1.0]);
        let c = simulate_cohort(&params(1.0, &[0.0], 1), &cfg(500, 50, vec![1, 25, 50])).unwrap();
        assert!(c.points.iter().all(|p| p.events == 0));
    }

    #[test]
    fn control_mode_needs_extra_driver() {
        let p = params(1.0, &[1.0, 1.0, 1.0], 2);
        let mut c = cfg(10, 5, vec![2, 3]);
        c.mode = SimMode::Control;
        let curve = simulate_cohort(&p, &c).unwrap();
        assert_eq!(curve.drivers_required, 3);
        assert_eq!(curve.points[0].events, 0);
        assert_eq!(curve.points[1].events, 10);
        assert!(simulate_cohort(&params(1.0, &[1.0, 1.0], 2), &c).is_err());
    }

    #[test]
    fn sim_config_errors() {
        let p = params(1.0, &[0.1], 1);
        assert!(simulate_cohort(&p, &cfg(10, 5, vec![])).is_err());
        assert!(simulate_cohort(&p, &cfg(10, 5, vec![6])).is_err());
        assert!(simulate_cohort(&p, &cfg(0, 5, vec![1])).is_err());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let p = params(1.0, &[0.01, 0.02], 2);
        let c = cfg(20_000, 300, (0..=300).step_by(30).collect());
        assert_eq!(
            simulate_cohort(&p, &c).unwrap(),
            simulate_cohort(&p, &c).unwrap()
        );
    }

    #[test]
    fn curve_csv_layout() {
        let c = simulate_cohort(&params(1.0, &[1.0], 1), &cfg(4, 2, vec![0, 1])).unwrap();
        let text = write_curve_csv(&c, &[("seed".into(), "11".into())]);
        assert_eq!(
            text,
            "# seed: 11\nt,cumulative_fraction,stderr,events\n\
             0,0.0000000000000000e0,0.0000000000000000e0,0\n\
             1,1.0000000000000000e0,0.0000000000000000e0,4\n"
        );
    }

    #[test]
    fn params_validation() {
        assert!(MultistageParams::new(0.0, vec![0.1], 1).is_err());
        assert!(MultistageParams::new(1.0, vec![0.1], 2).is_err());
        assert!(MultistageParams::new(1.0, vec![1.5], 1).is_err());
        assert!(MultistageParams::new(1.0, vec![0.1], 0).is_err());
        assert!(params(1.0, &[0.2], 1).outside_small_rate_regime(1.0));
    }
}
