//! Per-protocol monthly attack-frequency model.
//!
//! `logit π = α₀ + α₁·z` where `z` is log TVL standardized over the
//! protocol's own training panel.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::datamodel::{MonthlyPanelRow, YearMonth};
use crate::error::{Error, Result};
use crate::glm::{
    self, fit_logistic, hosmer_lemeshow, observed_information, HlResult, LogisticFit,
    LogisticOptions, Penalty, Standardization,
};
use crate::numerics::{cholesky_inverse, cholesky_lower, logistic, normal_quantile};

pub const HL_GROUPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingWindow {
    pub start: YearMonth,
    pub end: YearMonth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyModel {
    pub protocol_id: String,
    pub alpha0: f64,
    /// Zero when the covariate was dropped (`cov_sd == 0`).
    pub alpha1: f64,
    /// Mean of log TVL over the training panel.
    pub cov_mean: f64,
    /// Sample standard deviation of log TVL; zero means log TVL was constant
    /// and the model is intercept-only.
    pub cov_sd: f64,
    /// Standard errors of (α₀, α₁); absent for penalized fits.
    pub se: Option<[f64; 2]>,
    pub converged: bool,
    pub penalty: Option<Penalty>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
    pub window: TrainingWindow,
    pub n_months: usize,
    pub n_events: usize,
    /// Absent when too few distinct fitted probabilities exist for the test.
    pub hl: Option<HlResult>,
}

impl FrequencyModel {
    pub fn covariate_dropped(&self) -> bool {
        self.cov_sd == 0.0
    }

    pub fn standardize(&self, log_tvl: f64) -> f64 {
        Standardization { mean: self.cov_mean, sd: self.cov_sd }.apply(log_tvl)
    }

    pub fn linear_predictor(&self, log_tvl: f64) -> f64 {
        self.alpha0 + self.alpha1 * self.standardize(log_tvl)
    }
}

struct PanelDesign {
    x: DMatrix<f64>,
    y: Vec<bool>,
    scaling: Standardization,
}

fn panel_design(rows: &[&MonthlyPanelRow]) -> PanelDesign {
    let scaling = Standardization::of_column(rows.iter().map(|r| r.log_tvl));
    let width = usize::from(scaling.sd > 0.0);
    let x = DMatrix::from_fn(rows.len(), width, |i, _| rows[i].log_tvl);
    PanelDesign { x, y: rows.iter().map(|r| r.event).collect(), scaling }
}

fn coefficients(fit: &LogisticFit, scaling: Standardization) -> (f64, f64) {
    if scaling.sd > 0.0 {
        (fit.coefficients[0], fit.coefficients[1])
    } else {
        (fit.coefficients[0], 0.0)
    }
}

/// Fits the frequency model to one protocol's monthly panel and attaches the
/// Hosmer–Lemeshow result at the default grouping.
pub fn fit_frequency(panel: &[MonthlyPanelRow]) -> Result<FrequencyModel> {
    fit_frequency_with(panel, &LogisticOptions::default())
}

pub fn fit_frequency_with(panel: &[MonthlyPanelRow], opts: &LogisticOptions) -> Result<FrequencyModel> {
    let first = panel.first().ok_or_else(|| Error::InsufficientData("empty panel".into()))?;
    let protocol_id = first.protocol_id.clone();
    if panel.iter().any(|r| r.protocol_id != protocol_id) {
        return Err(Error::domain("panel mixes several protocols"));
    }
    if panel.len() < 2 {
        return Err(Error::InsufficientData(format!("{protocol_id}: a single month of data")));
    }
    let n_events = panel.iter().filter(|r| r.event).count();
    if n_events == 0 {
        return Err(Error::NoEvents(protocol_id));
    }
    let rows: Vec<&MonthlyPanelRow> = panel.iter().collect();
    let design = panel_design(&rows);
    let opts = LogisticOptions { standardize: true, ..*opts };
    let fit = fit_logistic(&design.x, &design.y, &opts)?;
    let hl = match hosmer_lemeshow(&fit, &design.x, &design.y, HL_GROUPS) {
        Ok(hl) => Some(hl),
        Err(Error::TestNotApplicable(_)) => None,
        Err(e) => return Err(e),
    };
    let (alpha0, alpha1) = coefficients(&fit, design.scaling);
    let se = fit.standard_errors.as_ref().map(|se| [se[0], se.get(1).copied().unwrap_or(0.0)]);
    let start = panel.iter().map(|r| r.month).min().expect("nonempty");
    let end = panel.iter().map(|r| r.month).max().expect("nonempty");
    Ok(FrequencyModel {
        protocol_id,
        alpha0,
        alpha1,
        cov_mean: design.scaling.mean,
        cov_sd: design.scaling.sd,
        se,
        converged: fit.converged,
        penalty: fit.penalty,
        fallback_reason: fit.fallback_reason,
        window: TrainingWindow { start, end },
        n_months: panel.len(),
        n_events,
        hl,
    })
}

/// Attack probability for next month's exposure `tvl_next` (USD).
pub fn predict_attack_probability(model: &FrequencyModel, tvl_next: f64) -> Result<f64> {
    if !(tvl_next > 0.0 && tvl_next.is_finite()) {
        return Err(Error::domain(format!("TVL must be positive, got {tvl_next}")));
    }
    Ok(glm::clamp_open_unit(logistic(model.linear_predictor(tvl_next.ln()))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeerInterval {
    pub low: f64,
    pub point: f64,
    pub high: f64,
}

/// 95% Wald interval for the attack probability of a protocol without its
/// own incident history, from a logistic model fitted to pooled peer panels.
/// The interval is built on the linear predictor and mapped through the
/// inverse logit.
pub fn peer_interval(peer_panels: &[Vec<MonthlyPanelRow>], tvl_next: f64) -> Result<PeerInterval> {
    if !(tvl_next > 0.0 && tvl_next.is_finite()) {
        return Err(Error::domain(format!("TVL must be positive, got {tvl_next}")));
    }
    let rows: Vec<&MonthlyPanelRow> = peer_panels.iter().flatten().collect();
    if rows.is_empty() {
        return Err(Error::InsufficientData("no peer panels".into()));
    }
    if !rows.iter().any(|r| r.event) {
        return Err(Error::NoEvents("pooled peer panels".into()));
    }
    let design = panel_design(&rows);
    let fit = fit_logistic(&design.x, &design.y, &LogisticOptions::default())?;
    let covariance = match fit.covariance_matrix() {
        Some(c) => c,
        None => {
            // penalized fit: invert the observed information at the estimate
            let info = observed_information(&fit, &design.x)?;
            cholesky_inverse(&cholesky_lower(&info)?)
        }
    };
    let z = design.scaling.apply(tvl_next.ln());
    let row: Vec<f64> = if design.scaling.sd > 0.0 { vec![1.0, z] } else { vec![1.0] };
    let eta: f64 = row.iter().zip(&fit.coefficients).map(|(a, b)| a * b).sum();
    let mut var = 0.0;
    for i in 0..row.len() {
        for j in 0..row.len() {
            var += row[i] * covariance[(i, j)] * row[j];
        }
    }
    let half_width = normal_quantile(0.975) * var.max(0.0).sqrt();
    Ok(PeerInterval {
        low: logistic(eta - half_width),
        point: logistic(eta),
        high: logistic(eta + half_width),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{logit, standard_normal, RngStream};
    use rand::Rng;

    fn panel(id: &str, log_tvl: &[f64], events: &[bool]) -> Vec<MonthlyPanelRow> {
        let start: YearMonth = "2015-01".parse().unwrap();
        let mut month = start;
        log_tvl
            .iter()
            .zip(events)
            .map(|(&l, &e)| {
                let row = MonthlyPanelRow { protocol_id: id.into(), month, event: e, log_tvl: l };
                month = month.succ();
                row
            })
            .collect()
    }

    fn simulated(id: &str, n: usize, alpha: (f64, f64), seed: u64) -> Vec<MonthlyPanelRow> {
        let mut rng = RngStream::new(seed, 1).rng();
        let log_tvl: Vec<f64> = (0..n).map(|_| 20.0 + 1.5 * standard_normal(&mut rng)).collect();
        let s = Standardization::of_column(log_tvl.iter().copied());
        let events: Vec<bool> = log_tvl
            .iter()
            .map(|l| rng.random::<f64>() < logistic(alpha.0 + alpha.1 * s.apply(*l)))
            .collect();
        panel(id, &log_tvl, &events)
    }

    #[test]
    fn zero_events_and_tiny_panels() {
        let p = panel("A", &[1.0, 2.0, 3.0], &[false; 3]);
        assert!(matches!(fit_frequency(&p), Err(Error::NoEvents(_))));
        let p = panel("A", &[1.0], &[true]);
        assert!(matches!(fit_frequency(&p), Err(Error::InsufficientData(_))));
        assert!(fit_frequency(&[]).is_err());
    }

    #[test]
    fn constant_tvl_reduces_to_event_rate() {
        let events: Vec<bool> = (0..48).map(|i| i % 8 == 0).collect();
        let p = panel("A", &[17.0; 48], &events);
        let m = fit_frequency(&p).unwrap();
        assert!(m.covariate_dropped());
        assert_eq!(m.alpha1, 0.0);
        assert!(m.hl.is_none());
        for tvl in [1e3, 2.4e7, 1e12] {
            let pi = predict_attack_probability(&m, tvl).unwrap();
            assert!((pi - 6.0 / 48.0).abs() < 1e-6);
        }
    }

    #[test]
    fn prediction_at_training_mean_is_inverse_logit_of_intercept() {
        let p = simulated("F", 600, (-2.7188, -0.2449), 17);
        let m = fit_frequency(&p).unwrap();
        let pi = predict_attack_probability(&m, m.cov_mean.exp()).unwrap();
        assert!((pi - logistic(m.alpha0)).abs() < 1e-14);
        assert!(predict_attack_probability(&m, 0.0).is_err());
        assert!(predict_attack_probability(&m, -1.0).is_err());
    }

    #[test]
    fn monotone_in_tvl_for_positive_slope() {
        let p = simulated("G", 800, (-3.0, 1.0), 4);
        let m = fit_frequency(&p).unwrap();
        assert!(m.alpha1 > 0.0);
        let probs: Vec<f64> =
            [1e6, 1e7, 1e8, 1e9, 1e10].iter().map(|t| predict_attack_probability(&m, *t).unwrap()).collect();
        assert!(probs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn refit_is_bit_identical() {
        let p = simulated("A", 300, (-3.7792, 0.2164), 8);
        assert_eq!(fit_frequency(&p).unwrap(), fit_frequency(&p).unwrap());
    }

    #[test]
    fn single_peer_interval_centres_on_its_prediction() {
        let p = simulated("B", 400, (-3.4162, -0.1657), 12);
        let own = fit_frequency(&p).unwrap();
        let tvl = 3e8;
        let iv = peer_interval(&[p], tvl).unwrap();
        let point = predict_attack_probability(&own, tvl).unwrap();
        assert!((iv.point - point).abs() < 1e-12);
        assert!(iv.low < point && point < iv.high);
        let mid = 0.5 * (logit(iv.low) + logit(iv.high));
        assert!((mid - logit(point)).abs() < 1e-9);
    }

    #[test]
    fn peer_interval_ordering_on_random_pools() {
        for seed in 0..100u64 {
            let k = 1 + (seed % 3) as usize;
            let pools: Vec<_> = (0..k)
                .map(|j| simulated(&format!("P{j}"), 120, (-2.5, 0.3), seed * 10 + j as u64))
                .collect();
            let iv = peer_interval(&pools, 10f64.powf(7.0 + (seed % 5) as f64)).unwrap();
            assert!(0.0 <= iv.low && iv.low <= iv.point && iv.point <= iv.high && iv.high <= 1.0);
        }
    }

    #[test]
    fn peer_interval_without_events() {
        let p = panel("A", &[1.0, 2.0, 3.0], &[false; 3]);
        assert!(matches!(peer_interval(&[p], 1e6), Err(Error::NoEvents(_))));
    }
}
