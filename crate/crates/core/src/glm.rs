//! Regression engine: logistic regression by IRLS with an elastic-net
//! fallback, least squares on logit-transformed proportions, the
//! Hosmer–Lemeshow calibration test and quantile residuals.
//!
//! Designs passed in here never include the intercept column; it is added
//! internally and always occupies coefficient slot 0.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    chi_square_sf, cholesky_inverse, cholesky_lower, cholesky_solve, logistic, logit,
    normal_cdf, normal_quantile,
};

/// Standardized-scale coefficient magnitude treated as divergence.
pub const BLOWUP_LIMIT: f64 = 15.0;
/// Condition number of the (diagonally scaled) information matrix treated as separation.
pub const CONDITION_LIMIT: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub lambda: f64,
    pub alpha_mix: f64,
}

impl Default for Penalty {
    fn default() -> Self {
        Penalty { lambda: 1e-3, alpha_mix: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub fallback_penalty: Penalty,
    /// Report coefficients on the standardized covariate scale. When false the
    /// fit still runs on standardized columns internally but reports raw-scale
    /// coefficients.
    pub standardize: bool,
    /// Skip plain maximum likelihood and go straight to the penalized fit.
    pub force_penalty: bool,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            max_iter: 100,
            tol: 1e-8,
            fallback_penalty: Penalty::default(),
            standardize: true,
            force_penalty: false,
        }
    }
}

/// Column centring and scaling. `sd == 0` marks a constant column whose
/// standardized value is taken as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

impl Standardization {
    pub const IDENTITY: Standardization = Standardization { mean: 0.0, sd: 1.0 };

    pub fn apply(&self, x: f64) -> f64 {
        if self.sd > 0.0 {
            (x - self.mean) / self.sd
        } else {
            0.0
        }
    }

    pub fn of_column(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count();
        if n == 0 {
            return Standardization { mean: 0.0, sd: 0.0 };
        }
        let mean = values.clone().sum::<f64>() / n as f64;
        if n < 2 {
            return Standardization { mean, sd: 0.0 };
        }
        let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        // numerically constant columns
        let sd = if sd <= 1e-12 * mean.abs().max(1.0) { 0.0 } else { sd };
        Standardization { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    /// Intercept first.
    pub coefficients: Vec<f64>,
    /// Absent on the penalized path.
    pub standard_errors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    pub converged: bool,
    pub iterations: usize,
    pub penalty: Option<Penalty>,
    /// Why the penalized path was taken, if it was.
    pub fallback_reason: Option<String>,
    /// Per-covariate scaling applied before the linear predictor. Identity
    /// entries when coefficients are on the raw scale.
    pub covariate_standardization: Vec<Standardization>,
    pub log_likelihood: f64,
    /// Objective value after every accepted iteration.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl LogisticFit {
    pub fn n_covariates(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn is_penalized(&self) -> bool {
        self.penalty.is_some()
    }

    pub fn linear_predictor(&self, covariates: &[f64]) -> Result<f64> {
        if covariates.len() != self.n_covariates() {
            return Err(Error::domain(format!(
                "expected {} covariates, got {}",
                self.n_covariates(),
                covariates.len()
            )));
        }
        let mut eta = self.coefficients[0];
        for ((b, s), x) in self.coefficients[1..]
            .iter()
            .zip(&self.covariate_standardization)
            .zip(covariates)
        {
            eta += b * s.apply(*x);
        }
        Ok(eta)
    }

    pub fn covariance_matrix(&self) -> Option<DMatrix<f64>> {
        self.covariance.as_ref().map(|rows| {
            let p = rows.len();
            DMatrix::from_fn(p, p, |i, j| rows[i][j])
        })
    }
}

/// Probability strictly inside (0, 1).
pub fn predict_logistic(fit: &LogisticFit, covariates: &[f64]) -> Result<f64> {
    let eta = fit.linear_predictor(covariates)?;
    Ok(clamp_open_unit(logistic(eta)))
}

pub fn clamp_open_unit(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Covariates standardized column by column, with a leading intercept column.
struct WorkingDesign {
    z: DMatrix<f64>,
    scaling: Vec<Standardization>,
}

impl WorkingDesign {
    fn new(x: &DMatrix<f64>) -> Self {
        let (n, k) = x.shape();
        let scaling: Vec<Standardization> =
            (0..k).map(|j| Standardization::of_column(x.column(j).iter().copied())).collect();
        let z = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { scaling[j - 1].apply(x[(i, j - 1)]) });
        WorkingDesign { z, scaling }
    }

    /// Maps standardized-scale coefficients (or a covariance) to raw scale.
    fn to_raw_transform(&self) -> DMatrix<f64> {
        let p = self.scaling.len() + 1;
        let mut t = DMatrix::zeros(p, p);
        t[(0, 0)] = 1.0;
        for (j, s) in self.scaling.iter().enumerate() {
            if s.sd > 0.0 {
                t[(j + 1, j + 1)] = 1.0 / s.sd;
                t[(0, j + 1)] = -s.mean / s.sd;
            }
        }
        t
    }
}

fn negative_log_likelihood(z: &DMatrix<f64>, y: &[bool], beta: &[f64]) -> f64 {
    let mut nll = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let eta = linear(z, i, beta);
        // log(1 + e^eta) - y*eta, stable for either sign
        let softplus = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
        nll += softplus - if yi { eta } else { 0.0 };
    }
    nll
}

fn linear(z: &DMatrix<f64>, i: usize, beta: &[f64]) -> f64 {
    beta.iter().enumerate().map(|(j, b)| z[(i, j)] * b).sum()
}

/// Gradient of the log-likelihood and the Fisher information at `beta`.
fn score_and_information(z: &DMatrix<f64>, y: &[bool], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let p = beta.len();
    let mut grad = vec![0.0; p];
    let mut info = DMatrix::zeros(p, p);
    for (i, &yi) in y.iter().enumerate() {
        let mu = logistic(linear(z, i, beta));
        let w = mu * (1.0 - mu);
        let r = if yi { 1.0 } else { 0.0 } - mu;
        for a in 0..p {
            let za = z[(i, a)];
            grad[a] += za * r;
            for b in 0..=a {
                info[(a, b)] += w * za * z[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[(b, a)] = info[(a, b)];
        }
    }
    (grad, info)
}

fn scaled_condition_number(info: &DMatrix<f64>) -> f64 {
    let p = info.nrows();
    let d: Vec<f64> = (0..p).map(|i| info[(i, i)].max(0.0).sqrt()).collect();
    if d.iter().any(|v| *v == 0.0) {
        return f64::INFINITY;
    }
    let scaled = DMatrix::from_fn(p, p, |i, j| info[(i, j)] / (d[i] * d[j]));
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

struct MleOutcome {
    beta: Vec<f64>,
    covariance: DMatrix<f64>,
    iterations: usize,
    nll: f64,
    trace: Vec<f64>,
}

fn initial_beta(y: &[bool], p: usize) -> Vec<f64> {
    let rate = y.iter().filter(|v| **v).count() as f64 / y.len() as f64;
    let mut beta = vec![0.0; p];
    beta[0] = logit(rate);
    beta
}

/// Newton–Raphson (IRLS) with step halving. Returns the reason for giving up
/// when the penalized path should take over.
fn irls(z: &DMatrix<f64>, y: &[bool], opts: &LogisticOptions) -> std::result::Result<MleOutcome, String> {
    let n = y.len() as f64;
    let p = z.ncols();
    let mut beta = initial_beta(y, p);
    let mut nll = negative_log_likelihood(z, y, &beta);
    let mut trace = vec![nll];
    for iteration in 0..=opts.max_iter {
        let (grad, info) = score_and_information(z, y, &beta);
        let grad_norm = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        let chol = cholesky_lower(&info).map_err(|_| "singular information matrix".to_string())?;
        if grad_norm <= opts.tol * n.max(1.0) {
            let cond = scaled_condition_number(&info);
            if cond > CONDITION_LIMIT {
                return Err(format!("information matrix condition number {cond:.3e} exceeds limit"));
            }
            return Ok(MleOutcome {
                beta,
                covariance: cholesky_inverse(&chol),
                iterations: iteration,
                nll,
                trace,
            });
        }
        if iteration == opts.max_iter {
            break;
        }
        let step = cholesky_solve(&chol, &grad);
        let mut t = 1.0;
        let mut candidate;
        let mut candidate_nll;
        loop {
            candidate = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect::<Vec<_>>();
            candidate_nll = negative_log_likelihood(z, y, &candidate);
            if candidate_nll <= nll || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        if candidate_nll > nll {
            // no descent possible: the objective is flat to rounding
            let cond = scaled_condition_number(&info);
            if cond > CONDITION_LIMIT {
                return Err(format!("information matrix condition number {cond:.3e} exceeds limit"));
            }
            return Ok(MleOutcome {
                beta,
                covariance: cholesky_inverse(&chol),
                iterations: iteration,
                nll,
                trace,
            });
        }
        beta = candidate;
        nll = candidate_nll;
        trace.push(nll);
        let biggest = beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if biggest > BLOWUP_LIMIT {
            return Err(format!(
                "coefficient magnitude {biggest:.2} exceeds {BLOWUP_LIMIT} (separation suspected)"
            ));
        }
    }
    Err(format!("no convergence within {} iterations", opts.max_iter))
}

fn elastic_net_penalty(beta: &[f64], pen: &Penalty) -> f64 {
    beta[1..]
        .iter()
        .map(|b| pen.lambda * (pen.alpha_mix * b.abs() + 0.5 * (1.0 - pen.alpha_mix) * b * b))
        .sum()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

struct PenalizedOutcome {
    beta: Vec<f64>,
    converged: bool,
    iterations: usize,
    nll: f64,
    trace: Vec<f64>,
}

/// Minimizes `nll/n + λ(α‖β‖₁ + (1−α)/2‖β‖²)` (intercept unpenalized) by
/// proximal Newton: each outer step solves the penalized quadratic model by
/// coordinate descent and is accepted only if the objective does not rise.
fn penalized_logistic(z: &DMatrix<f64>, y: &[bool], pen: &Penalty, tol: f64) -> PenalizedOutcome {
    const MAX_OUTER: usize = 1000;
    const MAX_SWEEPS: usize = 10_000;
    let n = y.len() as f64;
    let p = z.ncols();
    let objective = |b: &[f64]| negative_log_likelihood(z, y, b) / n + elastic_net_penalty(b, pen);

    let mut beta = initial_beta(y, p);
    let mut obj = objective(&beta);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0;
    for outer in 0..MAX_OUTER {
        iterations = outer + 1;
        let (score, info) = score_and_information(z, y, &beta);
        // quadratic model of nll/n around beta
        let g: Vec<f64> = score.iter().map(|s| -s / n).collect();
        let h = info / n;

        let mut b = beta.clone();
        for _ in 0..MAX_SWEEPS {
            let mut max_change = 0.0f64;
            for j in 0..p {
                let mut q = g[j];
                for k in 0..p {
                    q += h[(j, k)] * (b[k] - beta[k]);
                }
                let hjj = h[(j, j)];
                let new = if j == 0 {
                    if hjj > 0.0 {
                        b[0] - q / hjj
                    } else {
                        b[0]
                    }
                } else {
                    let denom = hjj + pen.lambda * (1.0 - pen.alpha_mix);
                    if denom > 0.0 {
                        soft_threshold(hjj * b[j] - q, pen.lambda * pen.alpha_mix) / denom
                    } else {
                        b[j]
                    }
                };
                max_change = max_change.max((new - b[j]).abs());
                b[j] = new;
            }
            if max_change < 1e-13 {
                break;
            }
        }

        let direction: Vec<f64> = b.iter().zip(&beta).map(|(a, c)| a - c).collect();
        let mut t = 1.0;
        let mut candidate;
        let mut candidate_obj;
        loop {
            candidate = beta.iter().zip(&direction).map(|(c, d)| c + t * d).collect::<Vec<_>>();
            candidate_obj = objective(&candidate);
            if candidate_obj <= obj || t < 1e-12 {
                break;
            }
            t *= 0.5;
        }
        if candidate_obj > obj {
            converged = true;
            break;
        }
        let change = candidate.iter().zip(&beta).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        beta = candidate;
        obj = candidate_obj;
        trace.push(obj);
        if change < tol {
            converged = true;
            break;
        }
    }
    let nll = negative_log_likelihood(z, y, &beta);
    PenalizedOutcome { beta, converged, iterations, nll, trace }
}

fn check_design(x: &DMatrix<f64>, n_response: usize) -> Result<()> {
    let (n, k) = x.shape();
    if n != n_response {
        return Err(Error::domain(format!("design has {n} rows but response has {n_response}")));
    }
    if n < k + 2 {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {} coefficients",
            k + 1
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("design contains non-finite values"));
    }
    Ok(())
}

/// Logistic regression of `response` on the columns of `x` (no intercept
/// column; one is added).
///
/// Plain maximum likelihood is tried first. Divergence, coefficients beyond
/// [`BLOWUP_LIMIT`] on the standardized scale, or an information matrix worse
/// conditioned than [`CONDITION_LIMIT`] hand the problem to the elastic-net
/// fit with `opts.fallback_penalty`; such fits carry no standard errors.
pub fn fit_logistic(x: &DMatrix<f64>, response: &[bool], opts: &LogisticOptions) -> Result<LogisticFit> {
    check_design(x, response.len())?;
    let events = response.iter().filter(|v| **v).count();
    if events == 0 {
        return Err(Error::DegenerateResponse(0));
    }
    if events == response.len() {
        return Err(Error::DegenerateResponse(1));
    }
    let design = WorkingDesign::new(x);
    let k = x.ncols();

    let mle = if opts.force_penalty {
        Err("penalized fit requested".to_string())
    } else {
        irls(&design.z, response, opts)
    };

    let transform = if opts.standardize { None } else { Some(design.to_raw_transform()) };
    let reported_scaling = if opts.standardize {
        design.scaling.clone()
    } else {
        vec![Standardization::IDENTITY; k]
    };
    let to_reported = |beta: &[f64]| -> Vec<f64> {
        match &transform {
            Some(t) => (t * nalgebra::DVector::from_column_slice(beta)).iter().copied().collect(),
            None => beta.to_vec(),
        }
    };

    match mle {
        Ok(out) => {
            let cov = match &transform {
                Some(t) => t * &out.covariance * t.transpose(),
                None => out.covariance.clone(),
            };
            let se = (0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
            Ok(LogisticFit {
                coefficients: to_reported(&out.beta),
                standard_errors: Some(se),
                covariance: Some((0..cov.nrows()).map(|i| cov.row(i).iter().copied().collect()).collect()),
                converged: true,
                iterations: out.iterations,
                penalty: None,
                fallback_reason: None,
                covariate_standardization: reported_scaling,
                log_likelihood: -out.nll,
                objective_trace: out.trace,
            })
        }
        Err(reason) => {
            let pen = opts.fallback_penalty;
            let out = penalized_logistic(&design.z, response, &pen, opts.tol);
            Ok(LogisticFit {
                coefficients: to_reported(&out.beta),
                standard_errors: None,
                covariance: None,
                converged: out.converged,
                iterations: out.iterations,
                penalty: Some(pen),
                fallback_reason: Some(reason),
                covariate_standardization: reported_scaling,
                log_likelihood: -out.nll,
                objective_trace: out.trace,
            })
        }
    }
}

/// Observed information `XᵀWX` at the fitted coefficients, on the fit's own
/// coefficient scale.
pub fn observed_information(fit: &LogisticFit, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    if k != fit.n_covariates() {
        return Err(Error::domain("design width does not match the fit"));
    }
    let p = k + 1;
    let mut info = DMatrix::zeros(p, p);
    let mut row = vec![0.0; p];
    for i in 0..n {
        row[0] = 1.0;
        for j in 0..k {
            row[j + 1] = fit.covariate_standardization[j].apply(x[(i, j)]);
        }
        let eta: f64 = row.iter().zip(&fit.coefficients).map(|(a, b)| a * b).sum();
        let mu = logistic(eta);
        let w = mu * (1.0 - mu);
        for a in 0..p {
            for b in 0..p {
                info[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    Ok(info)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLogitFit {
    /// Intercept first.
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Residual variance on the logit scale, RSS / (n − p).
    pub sigma2: f64,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    pub n_obs: usize,
}

impl LinearLogitFit {
    pub fn fitted_mean(&self, covariates: &[f64]) -> Result<f64> {
        if covariates.len() + 1 != self.coefficients.len() {
            return Err(Error::domain("covariate count does not match the fit"));
        }
        Ok(self.coefficients[0]
            + self.coefficients[1..].iter().zip(covariates).map(|(b, x)| b * x).sum::<f64>())
    }
}

/// Ordinary least squares of `logit(response)` on `x` plus an intercept.
pub fn fit_linear_on_logit(x: &DMatrix<f64>, response: &[f64]) -> Result<LinearLogitFit> {
    let (n, k) = x.shape();
    if n != response.len() {
        return Err(Error::domain(format!("design has {n} rows but response has {}", response.len())));
    }
    if let Some(r) = response.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::domain(format!("proportion {r} is not strictly inside (0, 1)")));
    }
    let p = k + 1;
    if n <= p {
        return Err(Error::InsufficientData(format!("{n} observations for {p} coefficients")));
    }
    let target: Vec<f64> = response.iter().map(|r| logit(*r)).collect();
    let design = WorkingDesign::new(x);
    if design.scaling.iter().any(|s| s.sd == 0.0) {
        return Err(Error::RankDeficient);
    }
    let z = &design.z;
    let ztz = z.transpose() * z;
    if scaled_condition_number(&ztz) > 1e12 {
        return Err(Error::RankDeficient);
    }
    let chol = cholesky_lower(&ztz).map_err(|_| Error::RankDeficient)?;
    let zty: Vec<f64> = (0..p).map(|j| (0..n).map(|i| z[(i, j)] * target[i]).sum()).collect();
    let beta_std = cholesky_solve(&chol, &zty);

    let residuals: Vec<f64> = (0..n).map(|i| target[i] - linear(z, i, &beta_std)).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let sigma2 = rss / (n - p) as f64;

    let t = design.to_raw_transform();
    let beta = &t * nalgebra::DVector::from_column_slice(&beta_std);
    let cov = &t * cholesky_inverse(&chol) * t.transpose() * sigma2;
    Ok(LinearLogitFit {
        coefficients: beta.iter().copied().collect(),
        standard_errors: (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect(),
        sigma2,
        residuals,
        n_obs: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HlResult {
    #[serde(rename = "stat")]
    pub statistic: f64,
    pub df: u32,
    #[serde(rename = "p")]
    pub p_value: f64,
    pub groups_used: usize,
}

/// Hosmer–Lemeshow test for a fitted logistic model on `(x, response)`.
pub fn hosmer_lemeshow(fit: &LogisticFit, x: &DMatrix<f64>, response: &[bool], groups: usize) -> Result<HlResult> {
    if x.nrows() != response.len() {
        return Err(Error::domain("design and response lengths differ"));
    }
    let mut row = vec![0.0; x.ncols()];
    let probs = (0..x.nrows())
        .map(|i| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = x[(i, j)];
            }
            predict_logistic(fit, &row)
        })
        .collect::<Result<Vec<f64>>>()?;
    hosmer_lemeshow_from_probabilities(&probs, response, groups)
}

/// Hosmer–Lemeshow test from fitted probabilities.
///
/// Observations are sorted by fitted probability and cut into `groups`
/// near-equal groups without splitting ties. Groups whose expected count is 0
/// or equal to their size are merged into a neighbour. The statistic is
/// referred to χ² with `groups_used − 2` degrees of freedom.
pub fn hosmer_lemeshow_from_probabilities(probs: &[f64], response: &[bool], groups: usize) -> Result<HlResult> {
    if groups < 3 {
        return Err(Error::domain("Hosmer-Lemeshow needs at least 3 groups"));
    }
    if probs.len() != response.len() || probs.is_empty() {
        return Err(Error::domain("probabilities and response must be nonempty and equal length"));
    }
    let mut order: Vec<(f64, bool)> = probs.iter().copied().zip(response.iter().copied()).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = order.len();

    // (n_g, observed, expected)
    let mut cells: Vec<(usize, f64, f64)> = Vec::with_capacity(groups);
    let mut start = 0;
    for g in 0..groups {
        if start >= n {
            break;
        }
        let target = ((n * (g + 1)) as f64 / groups as f64).round() as usize;
        let mut end = target.max(start + 1).min(n);
        while end < n && order[end].0 == order[end - 1].0 {
            end += 1;
        }
        if g == groups - 1 {
            end = n;
        }
        let slice = &order[start..end];
        let observed = slice.iter().filter(|(_, y)| *y).count() as f64;
        let expected: f64 = slice.iter().map(|(p, _)| p).sum();
        cells.push((slice.len(), observed, expected));
        start = end;
    }

    let degenerate = |c: &(usize, f64, f64)| {
        let nf = c.0 as f64;
        c.2 <= 1e-12 * nf || c.2 >= nf * (1.0 - 1e-12)
    };
    while cells.len() > 1 {
        let Some(i) = cells.iter().position(degenerate) else { break };
        let j = if i + 1 < cells.len() { i + 1 } else { i - 1 };
        let (lo, hi) = (i.min(j), i.max(j));
        let merged = (cells[lo].0 + cells[hi].0, cells[lo].1 + cells[hi].1, cells[lo].2 + cells[hi].2);
        cells[lo] = merged;
        cells.remove(hi);
    }
    if cells.len() < 3 {
        return Err(Error::TestNotApplicable(format!(
            "only {} usable groups after tie handling and merging",
            cells.len()
        )));
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(ng, o, e)| {
            let pbar = e / ng as f64;
            (o - e).powi(2) / (e * (1.0 - pbar))
        })
        .sum();
    let df = (cells.len() - 2) as u32;
    Ok(HlResult { statistic, df, p_value: chi_square_sf(statistic, df)?, groups_used: cells.len() })
}

/// Standard-normal quantile residuals of a logit-normal fit:
/// `Φ⁻¹(F(logit r; fitted mean, σ²))` with F the normal CDF.
pub fn quantile_residuals(fit: &LinearLogitFit, x: &DMatrix<f64>, response: &[f64]) -> Result<Vec<f64>> {
    if x.nrows() != response.len() {
        return Err(Error::domain("design and response lengths differ"));
    }
    if !(fit.sigma2 > 0.0) {
        return Err(Error::domain("quantile residuals need a positive residual variance"));
    }
    let sigma = fit.sigma2.sqrt();
    let mut row = vec![0.0; x.ncols()];
    response
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::domain(format!("proportion {r} is not strictly inside (0, 1)")));
            }
            for (j, v) in row.iter_mut().enumerate() {
                *v = x[(i, j)];
            }
            let z = (logit(r) - fit.fitted_mean(&row)?) / sigma;
            // evaluate through the lower tail for accuracy on both sides
            Ok(if z > 0.0 {
                -normal_quantile(normal_cdf(-z).max(f64::MIN_POSITIVE))
            } else {
                normal_quantile(normal_cdf(z).max(f64::MIN_POSITIVE))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{standard_normal, RngStream};
    use rand::Rng;

    fn simulate_logistic(n: usize, beta: (f64, f64), seed: u64) -> (DMatrix<f64>, Vec<bool>) {
        let mut rng = RngStream::new(seed, 0).rng();
        let xs: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let y = xs.iter().map(|x| rng.random::<f64>() < logistic(beta.0 + beta.1 * x)).collect();
        (DMatrix::from_column_slice(n, 1, &xs), y)
    }

    #[test]
    fn balanced_intercept_only_gives_zero() {
        let x = DMatrix::<f64>::zeros(50, 0);
        let y: Vec<bool> = (0..50).map(|i| i % 2 == 0).collect();
        let fit = fit_logistic(&x, &y, &LogisticOptions::default()).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-6);
        assert!(fit.penalty.is_none());
        assert!((predict_logistic(&fit, &[]).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn degenerate_response_is_an_error() {
        let x = DMatrix::from_fn(10, 1, |i, _| i as f64);
        assert!(matches!(
            fit_logistic(&x, &[false; 10], &LogisticOptions::default()),
            Err(Error::DegenerateResponse(0))
        ));
        assert!(matches!(
            fit_logistic(&x, &[true; 10], &LogisticOptions::default()),
            Err(Error::DegenerateResponse(1))
        ));
    }

    #[test]
    fn separation_triggers_penalized_fallback() {
        let x = DMatrix::from_fn(40, 1, |i, _| i as f64 - 19.5);
        let y: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let fit = fit_logistic(&x, &y, &LogisticOptions::default()).unwrap();
        assert_eq!(fit.penalty, Some(Penalty::default()));
        assert!(fit.standard_errors.is_none());
        assert!(fit.fallback_reason.is_some());
        assert!(fit.coefficients.iter().all(|c| c.is_finite()));
        assert!(fit.coefficients[1] > 0.0);
    }

    #[test]
    fn constant_covariate_goes_penalized_not_error() {
        let x = DMatrix::from_element(30, 1, 4.0);
        let y: Vec<bool> = (0..30).map(|i| i % 3 == 0).collect();
        let fit = fit_logistic(&x, &y, &LogisticOptions::default()).unwrap();
        assert!(fit.is_penalized());
        assert_eq!(fit.coefficients[1], 0.0);
        assert!((predict_logistic(&fit, &[4.0]).unwrap() - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn objective_is_monotone() {
        let (x, y) = simulate_logistic(500, (-1.0, 0.7), 3);
        let fit = fit_logistic(&x, &y, &LogisticOptions::default()).unwrap();
        assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        let forced = LogisticOptions { force_penalty: true, ..Default::default() };
        let fit = fit_logistic(&x, &y, &forced).unwrap();
        assert!(fit.converged);
        assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn penalized_solution_satisfies_optimality() {
        let (x, y) = simulate_logistic(400, (-0.5, 1.2), 11);
        let pen = Penalty { lambda: 0.05, alpha_mix: 0.5 };
        let opts = LogisticOptions { force_penalty: true, fallback_penalty: pen, ..Default::default() };
        let fit = fit_logistic(&x, &y, &opts).unwrap();
        // KKT on the standardized scale
        let design = WorkingDesign::new(&x);
        let (score, _) = score_and_information(&design.z, &y, &fit.coefficients);
        let n = y.len() as f64;
        assert!((score[0] / n).abs() < 1e-7);
        let b = fit.coefficients[1];
        let kkt = -score[1] / n + pen.lambda * ((1.0 - pen.alpha_mix) * b + pen.alpha_mix * b.signum());
        assert!(kkt.abs() < 1e-7, "kkt residual {kkt}");
    }

    #[test]
    fn standardization_invariance() {
        let (x, y) = simulate_logistic(300, (-0.8, 0.9), 5);
        let raw = x.map(|v| 3.0 * v + 20.0);
        let raw_fit = fit_logistic(&raw, &y, &LogisticOptions { standardize: false, ..Default::default() }).unwrap();
        let std_fit = fit_logistic(&raw, &y, &LogisticOptions::default()).unwrap();
        for v in [10.0, 17.3, 20.0, 26.5] {
            let a = predict_logistic(&raw_fit, &[v]).unwrap();
            let b = predict_logistic(&std_fit, &[v]).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        // raw-scale SEs are the standardized SEs mapped through the scaling
        let sd = std_fit.covariate_standardization[0].sd;
        let se_raw = raw_fit.standard_errors.as_ref().unwrap()[1];
        let se_std = std_fit.standard_errors.as_ref().unwrap()[1];
        assert!((se_raw * sd - se_std).abs() < 1e-9);
    }

    #[test]
    fn prediction_stays_inside_unit_interval() {
        let fit = LogisticFit {
            coefficients: vec![0.0, 1.0],
            standard_errors: None,
            covariance: None,
            converged: true,
            iterations: 0,
            penalty: None,
            fallback_reason: None,
            covariate_standardization: vec![Standardization::IDENTITY],
            log_likelihood: 0.0,
            objective_trace: vec![],
        };
        for x in [-1e6, -800.0, 0.0, 50.0, 1e6] {
            let p = predict_logistic(&fit, &[x]).unwrap();
            assert!(p > 0.0 && p < 1.0, "x={x} p={p}");
        }
        assert!(predict_logistic(&fit, &[]).is_err());
    }

    #[test]
    fn reference_protocol_a_predictions() {
        let fit = LogisticFit {
            coefficients: vec![-3.7792, 0.2164],
            standard_errors: None,
            covariance: None,
            converged: true,
            iterations: 0,
            penalty: None,
            fallback_reason: None,
            covariate_standardization: vec![Standardization { mean: 20.0, sd: 2.0 }],
            log_likelihood: 0.0,
            objective_trace: vec![],
        };
        let at_mean = predict_logistic(&fit, &[20.0]).unwrap();
        assert!((at_mean - 0.02233).abs() < 1e-4);
        assert_eq!(at_mean, logistic(-3.7792));
        let shifted = predict_logistic(&fit, &[20.0 + 0.3458 * 2.0]).unwrap();
        assert!((shifted - 0.024025).abs() < 1e-4);
    }

    #[test]
    fn noiseless_logit_linear_recovery() {
        let xs: Vec<f64> = (0..40).map(|i| -3.0 + i as f64 * 0.2).collect();
        let r: Vec<f64> = xs.iter().map(|x| logistic(2.0 - 0.5 * x)).collect();
        let fit = fit_linear_on_logit(&DMatrix::from_column_slice(40, 1, &xs), &r).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((fit.coefficients[1] + 0.5).abs() < 1e-10);
        assert!(fit.sigma2.abs() < 1e-10);
        assert!(fit.residuals.iter().sum::<f64>().abs() < 1e-8);
    }

    #[test]
    fn linear_logit_errors() {
        let x = DMatrix::from_element(10, 1, 3.0);
        let r = vec![0.3; 10];
        assert!(matches!(fit_linear_on_logit(&x, &r), Err(Error::RankDeficient)));
        let x = DMatrix::from_fn(10, 1, |i, _| i as f64);
        let mut r = vec![0.3; 10];
        r[4] = 1.0;
        assert!(matches!(fit_linear_on_logit(&x, &r), Err(Error::Domain(_))));
        r[4] = 0.0;
        assert!(matches!(fit_linear_on_logit(&x, &r), Err(Error::Domain(_))));
        let x = DMatrix::from_fn(2, 1, |i, _| i as f64);
        assert!(fit_linear_on_logit(&x, &[0.2, 0.4]).is_err());
    }

    #[test]
    fn hl_perfect_agreement() {
        // each group's observed count equals its expected count
        let mut probs = Vec::new();
        let mut y = Vec::new();
        for g in 0..10 {
            let p = 0.05 + 0.09 * g as f64;
            for i in 0..20 {
                probs.push(p);
                y.push((i as f64) < p * 20.0 - 1e-9);
            }
        }
        // make expected counts integral
        let probs: Vec<f64> = probs
            .chunks(20)
            .zip(y.chunks(20))
            .flat_map(|(_, ys)| {
                let o = ys.iter().filter(|v| **v).count() as f64 / 20.0;
                vec![o; 20]
            })
            .collect();
        let hl = hosmer_lemeshow_from_probabilities(&probs, &y, 10).unwrap();
        assert!(hl.statistic.abs() < 1e-12);
        assert_eq!(hl.p_value, 1.0);
        assert_eq!(hl.groups_used, 10);
        assert_eq!(hl.df, 8);
    }

    #[test]
    fn hl_is_order_invariant() {
        let (x, y) = simulate_logistic(300, (-0.4, 0.8), 21);
        let fit = fit_logistic(&x, &y, &LogisticOptions::default()).unwrap();
        let a = hosmer_lemeshow(&fit, &x, &y, 10).unwrap();
        let perm: Vec<usize> = (0..300).map(|i| (i * 7 + 3) % 300).collect();
        let xp = DMatrix::from_fn(300, 1, |i, _| x[(perm[i], 0)]);
        let yp: Vec<bool> = perm.iter().map(|&i| y[i]).collect();
        let b = hosmer_lemeshow(&fit, &xp, &yp, 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hl_ties_and_inapplicable() {
        let probs = vec![0.2; 100];
        let y: Vec<bool> = (0..100).map(|i| i % 5 == 0).collect();
        assert!(matches!(
            hosmer_lemeshow_from_probabilities(&probs, &y, 10),
            Err(Error::TestNotApplicable(_))
        ));
        let mut probs = vec![0.1; 50];
        probs.extend(vec![0.3; 30]);
        probs.extend(vec![0.6; 20]);
        let y: Vec<bool> = (0..100).map(|i| i % 4 == 0).collect();
        let hl = hosmer_lemeshow_from_probabilities(&probs, &y, 10).unwrap();
        assert_eq!(hl.groups_used, 3);
        assert_eq!(hl.df, 1);
        assert!(hosmer_lemeshow_from_probabilities(&probs, &y, 2).is_err());
    }

    #[test]
    fn quantile_residual_basics() {
        let fit = LinearLogitFit {
            coefficients: vec![1.0, -0.5],
            standard_errors: vec![0.0, 0.0],
            sigma2: 4.0,
            residuals: vec![],
            n_obs: 0,
        };
        let x = DMatrix::from_column_slice(3, 1, &[2.0, 0.0, 4.0]);
        let r = vec![0.5, logistic(1.0 + 2.0 * 1.5), logistic(-1.0 - 2.0 * 0.25)];
        let q = quantile_residuals(&fit, &x, &r).unwrap();
        assert_eq!(q.len(), 3);
        assert!(q[0].abs() < 1e-12);
        assert!((q[1] - 1.5).abs() < 1e-9);
        assert!((q[2] + 0.25).abs() < 1e-9);
        assert!(quantile_residuals(&fit, &x, &[0.5, 1.0, 0.2]).is_err());
    }
}
