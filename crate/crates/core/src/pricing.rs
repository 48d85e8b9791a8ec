//! One-month premiums under the expectation and standard-deviation principles.
//!
//! With `N ~ Bernoulli(π^F)` and loss `Y` given an attack,
//! `E(L) = π^F·E(Y)` and `Var(L) = π^F·E(Y²) − (π^F)²·E(Y)²`. The premiums are
//! `(1 + θ)·E(L)` and `E(L) + θ·SD(L)`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::datamodel::Chain;
use crate::error::{Error, Result};
use crate::frequency::{predict_attack_probability, FrequencyModel};
use crate::severity::{loss_fraction, predict_total_loss_prob, ratio_moments, RatioMoments, SeverityModel};
use crate::numerics::RngStream;

pub const DEFAULT_THETA: f64 = 0.5;

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

fn check_tvl(tvl: f64) -> Result<()> {
    if tvl > 0.0 && tvl.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("TVL must be positive, got {tvl}")))
    }
}

/// `π^F · tvl · ((1 − π^S)·E(R*) + π^S)`.
pub fn expected_loss(attack_prob: f64, tvl: f64, total_loss_prob: f64, mean_r: f64) -> Result<f64> {
    check_probability("attack probability", attack_prob)?;
    check_probability("total-loss probability", total_loss_prob)?;
    check_probability("mean partial ratio", mean_r)?;
    check_tvl(tvl)?;
    Ok(attack_prob * tvl * loss_fraction(total_loss_prob, mean_r))
}

/// `E(Y²) = tvl² · ((1 − π^S)·E(R*²) + π^S)`.
pub fn severity_second_moment(
    model: &SeverityModel,
    chain: Chain,
    tvl: f64,
    when: NaiveDate,
    n_samples: usize,
    rng: RngStream,
) -> Result<f64> {
    let pi_s = predict_total_loss_prob(model, chain, tvl, when)?;
    if pi_s == 1.0 {
        return Ok(tvl * tvl);
    }
    let m = ratio_moments(model, tvl, n_samples, rng)?;
    Ok(tvl * tvl * loss_fraction(pi_s, m.second_moment_r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McMeta {
    pub n_samples: usize,
    pub seed: u64,
    pub stream_id: u64,
    /// Monte Carlo noise drove the variance negative and it was set to 0.
    pub variance_clamped: bool,
    /// E(Y²) was unavailable and replaced by its upper bound tvl·E(Y), so the
    /// SD premium is conservative.
    pub second_moment_bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiumQuote {
    pub protocol_id: String,
    /// π^F
    pub attack_prob: f64,
    /// Expected fraction of TVL lost given an attack.
    pub loss_pct: f64,
    /// E(Y²)/tvl²
    pub loss_sq_pct: f64,
    pub total_loss_prob: Option<f64>,
    pub tvl: f64,
    pub coverage_fraction: f64,
    pub theta: f64,
    pub expectation_premium_usd: f64,
    pub sd_premium_usd: f64,
    pub expectation_premium_pct: f64,
    pub sd_premium_pct: f64,
    pub mc_meta: McMeta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingOptions {
    pub theta: f64,
    pub n_samples: usize,
    /// Date at which the severity time covariate is evaluated.
    pub when: NaiveDate,
    /// Share of each loss the cover pays; 1 means full TVL, no deductible or limit.
    pub coverage_fraction: f64,
}

impl PricingOptions {
    pub fn new(when: NaiveDate) -> Self {
        PricingOptions {
            theta: DEFAULT_THETA,
            n_samples: crate::severity::DEFAULT_RATIO_SAMPLES,
            when,
            coverage_fraction: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::Config(format!("theta must be nonnegative, got {}", self.theta)));
        }
        if !(self.coverage_fraction > 0.0 && self.coverage_fraction <= 1.0) {
            return Err(Error::Config(format!("coverage fraction must lie in (0, 1], got {}", self.coverage_fraction)));
        }
        Ok(())
    }
}

/// Inputs that fully determine a quote once Monte Carlo is done.
#[derive(Debug, Clone, PartialEq)]
pub struct QuoteInputs {
    pub protocol_id: String,
    pub attack_prob: f64,
    pub tvl: f64,
    /// E(Y)/tvl
    pub loss_fraction: f64,
    /// E(Y²)/tvl²; `None` uses the bound E(Y²) ≤ tvl·E(Y).
    pub loss_sq_fraction: Option<f64>,
    pub total_loss_prob: Option<f64>,
}

/// Both premiums from attack probability and the first two moments of the
/// loss ratio given an attack.
pub fn quote_from_inputs(inputs: &QuoteInputs, theta: f64, coverage_fraction: f64, meta: McMeta) -> Result<PremiumQuote> {
    check_probability("attack probability", inputs.attack_prob)?;
    check_probability("loss fraction", inputs.loss_fraction)?;
    check_tvl(inputs.tvl)?;
    let (m2, bounded) = match inputs.loss_sq_fraction {
        Some(m2) => {
            check_probability("squared loss fraction", m2)?;
            (m2, false)
        }
        None => (inputs.loss_fraction, true),
    };
    let p = inputs.attack_prob;
    let c = coverage_fraction;
    let tvl = inputs.tvl;
    let mean_frac = c * p * inputs.loss_fraction;
    let var_frac = c * c * (p * m2 - p * p * inputs.loss_fraction * inputs.loss_fraction);
    let clamped = var_frac < 0.0;
    let sd_frac = var_frac.max(0.0).sqrt();
    let expectation_pct = (1.0 + theta) * mean_frac;
    let sd_pct = mean_frac + theta * sd_frac;
    Ok(PremiumQuote {
        protocol_id: inputs.protocol_id.clone(),
        attack_prob: p,
        loss_pct: inputs.loss_fraction,
        loss_sq_pct: m2,
        total_loss_prob: inputs.total_loss_prob,
        tvl,
        coverage_fraction: c,
        theta,
        expectation_premium_usd: expectation_pct * tvl,
        sd_premium_usd: sd_pct * tvl,
        expectation_premium_pct: expectation_pct,
        sd_premium_pct: sd_pct,
        mc_meta: McMeta { variance_clamped: clamped, second_moment_bounded: bounded, ..meta },
    })
}

/// Loss-ratio moments given an attack for one exposure.
pub fn loss_moments(
    severity: &SeverityModel,
    chain: Chain,
    tvl: f64,
    when: NaiveDate,
    n_samples: usize,
    rng: RngStream,
) -> Result<(f64, RatioMoments)> {
    let pi_s = predict_total_loss_prob(severity, chain, tvl, when)?;
    let moments = ratio_moments(severity, tvl, n_samples, rng)?;
    Ok((pi_s, moments))
}

/// Quote for one protocol with fitted frequency and severity models.
pub fn price(
    protocol_id: &str,
    chain: Chain,
    tvl: f64,
    frequency: &FrequencyModel,
    severity: &SeverityModel,
    opts: &PricingOptions,
    rng: RngStream,
) -> Result<PremiumQuote> {
    let attack_prob = predict_attack_probability(frequency, tvl)?;
    price_with_attack_prob(protocol_id, chain, tvl, attack_prob, severity, opts, rng)
}

/// Like [`price`] but with the attack probability supplied directly, e.g.
/// from a peer interval.
pub fn price_with_attack_prob(
    protocol_id: &str,
    chain: Chain,
    tvl: f64,
    attack_prob: f64,
    severity: &SeverityModel,
    opts: &PricingOptions,
    rng: RngStream,
) -> Result<PremiumQuote> {
    opts.validate()?;
    let (pi_s, m) = loss_moments(severity, chain, tvl, opts.when, opts.n_samples, rng)?;
    let inputs = QuoteInputs {
        protocol_id: protocol_id.to_string(),
        attack_prob,
        tvl,
        loss_fraction: loss_fraction(pi_s, m.mean_r),
        loss_sq_fraction: Some(loss_fraction(pi_s, m.second_moment_r)),
        total_loss_prob: Some(pi_s),
    };
    let meta = McMeta {
        n_samples: opts.n_samples,
        seed: rng.seed,
        stream_id: rng.stream_id,
        variance_clamped: false,
        second_moment_bounded: false,
    };
    quote_from_inputs(&inputs, opts.theta, opts.coverage_fraction, meta)
}
