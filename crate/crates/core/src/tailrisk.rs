//! Portfolio aggregate loss by Monte Carlo, with VaR and CTE.
//!
//! Replicates are generated in fixed-size blocks. Block `b` always draws from
//! substream `b` of the caller's stream and blocks are concatenated in index
//! order before sorting, so the sample does not depend on the worker count.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::Portfolio;
use crate::dependence::{CopulaSampler, CopulaSpec};
use crate::error::{Error, Result};
use crate::frequency::{predict_attack_probability, FrequencyModel};
use crate::numerics::{standard_normal, RngStream};
use crate::severity::{RatioSampler, SeverityModel};

pub const MIN_SIMS: usize = 10_000;
pub const DEFAULT_SIMS: usize = 1_000_000;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
const BLOCK: usize = 1 << 16;
/// Below this many tail draws a bootstrap CTE is averaged draw by draw.
const EXPLICIT_TAIL_DRAWS: u64 = 1_000;

/// One protocol's contribution to the aggregate loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Exposure {
    pub protocol_id: String,
    pub tvl: f64,
    pub attack_prob: f64,
    pub severity: RatioSampler,
}

impl Exposure {
    pub fn new(protocol_id: &str, tvl: f64, attack_prob: f64, severity: RatioSampler) -> Result<Self> {
        if !(tvl > 0.0 && tvl.is_finite()) {
            return Err(Error::domain(format!("{protocol_id}: TVL must be positive, got {tvl}")));
        }
        if !(0.0..=1.0).contains(&attack_prob) {
            return Err(Error::domain(format!("{protocol_id}: attack probability {attack_prob} outside [0, 1]")));
        }
        Ok(Exposure { protocol_id: protocol_id.to_string(), tvl, attack_prob, severity })
    }
}

/// Exposures for every portfolio protocol, in portfolio order. `tvls` gives
/// next month's TVL per protocol.
pub fn exposures_from_models(
    portfolio: &Portfolio,
    tvls: &[f64],
    frequency: &BTreeMap<String, FrequencyModel>,
    severity: &SeverityModel,
    when: NaiveDate,
) -> Result<Vec<Exposure>> {
    if tvls.len() != portfolio.dim() {
        return Err(Error::Config(format!("{} TVLs for {} protocols", tvls.len(), portfolio.dim())));
    }
    portfolio
        .protocols
        .iter()
        .zip(tvls)
        .map(|(p, &tvl)| {
            let model = frequency
                .get(&p.id)
                .ok_or_else(|| Error::Config(format!("no frequency model for protocol {}", p.id)))?;
            let attack_prob = predict_attack_probability(model, tvl)?;
            Exposure::new(&p.id, tvl, attack_prob, severity.sampler(p.chain, tvl, when)?)
        })
        .collect()
}

fn simulate_block(exposures: &[Exposure], copula: Option<&CopulaSpec>, len: usize, stream: RngStream) -> Result<Vec<f64>> {
    let mut rng = stream.rng();
    let d = exposures.len();
    let probs: Vec<f64> = exposures.iter().map(|e| e.attack_prob).collect();
    let mut sampler = copula.map(|c| CopulaSampler::new(&probs, c)).transpose()?;
    let mut attacked = vec![false; d];
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        match sampler.as_mut() {
            Some(s) => s.draw_into(&mut rng, &mut attacked),
            None => {
                for (n, p) in attacked.iter_mut().zip(&probs) {
                    *n = rng.random::<f64>() < *p;
                }
            }
        }
        let mut s = 0.0;
        for (e, &n) in exposures.iter().zip(&attacked) {
            if n {
                s += e.tvl * e.severity.draw(&mut rng);
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// Sorted sample of the aggregate monthly loss `S = Σ L_i`.
///
/// With a copula the attack indicators are coupled through it, otherwise they
/// are independent. Loss ratios are independent across protocols either way.
/// `workers == 0` uses all available cores.
pub fn simulate_aggregate(
    exposures: &[Exposure],
    copula: Option<&CopulaSpec>,
    n_sims: usize,
    stream: RngStream,
    workers: usize,
) -> Result<Vec<f64>> {
    if n_sims < MIN_SIMS {
        return Err(Error::domain(format!("need at least {MIN_SIMS} simulations, got {n_sims}")));
    }
    if let Some(c) = copula {
        if c.dim() != exposures.len() {
            return Err(Error::Config(format!(
                "copula has dimension {} but the portfolio has {} protocols",
                c.dim(),
                exposures.len()
            )));
        }
    }
    let n_blocks = n_sims.div_ceil(BLOCK);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let blocks: Vec<Vec<f64>> = pool.install(|| {
        (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let len = BLOCK.min(n_sims - b * BLOCK);
                simulate_block(exposures, copula, len, stream.substream(b as u64))
            })
            .collect::<Result<_>>()
    })?;
    let mut sample = blocks.concat();
    sample.sort_unstable_by(f64::total_cmp);
    Ok(sample)
}

fn check_level(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("level must lie in (0, 1), got {q}")))
    }
}

/// 1-based rank `⌈n·q⌉`. Products that land within rounding of an integer are
/// treated as that integer, so e.g. n = 100, q = 0.9 gives 90, not 91.
fn var_rank(n: usize, q: f64) -> usize {
    let x = n as f64 * q;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, n)
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    if sample.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::domain("sample must be sorted ascending and free of NaN"));
    }
    Ok(())
}

/// `inf{s : F_n(s) ≥ q}` on a sorted sample, i.e. the ⌈n·q⌉-th order statistic.
pub fn value_at_risk(sample: &[f64], q: f64) -> Result<f64> {
    check_level(q)?;
    check_sample(sample)?;
    Ok(sample[var_rank(sample.len(), q) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMeasure {
    pub value: f64,
    /// No sample value exceeded VaR, so the CTE fell back to VaR.
    pub degenerate: bool,
}

/// Mean of sample values strictly above `VaR_q`; `VaR_q` itself when nothing
/// exceeds it.
pub fn conditional_tail_expectation(sample: &[f64], q: f64) -> Result<f64> {
    Ok(cte_detail(sample, q)?.value)
}

pub fn cte_detail(sample: &[f64], q: f64) -> Result<TailMeasure> {
    let var = value_at_risk(sample, q)?;
    let start = sample.partition_point(|&v| v <= var);
    let tail = &sample[start..];
    if tail.is_empty() {
        return Ok(TailMeasure { value: var, degenerate: true });
    }
    Ok(TailMeasure { value: tail.iter().sum::<f64>() / tail.len() as f64, degenerate: false })
}

/// Suffix sums of values and squares over `sample[base..]`.
struct TailSums {
    base: usize,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl TailSums {
    fn new(sample: &[f64], base: usize) -> Self {
        let m = sample.len() - base;
        let mut s1 = vec![0.0; m + 1];
        let mut s2 = vec![0.0; m + 1];
        for i in (0..m).rev() {
            let v = sample[base + i];
            s1[i] = s1[i + 1] + v;
            s2[i] = s2[i + 1] + v * v;
        }
        TailSums { base, s1, s2 }
    }

    /// (Σ x, Σ x²) over `sample[from..]`.
    fn from(&self, sample: &[f64], from: usize) -> (f64, f64) {
        if from >= self.base {
            (self.s1[from - self.base], self.s2[from - self.base])
        } else {
            sample[from..].iter().fold((0.0, 0.0), |(a, b), v| (a + v, b + v * v))
        }
    }
}

/// Bootstrap standard errors of (VaR_q, CTE_q) for each level.
///
/// Resampling from the empirical law is done through order statistics: the
/// k-th smallest of n resampled values is `x_(⌈n·U⌉)` with `U ~ Beta(k, n−k+1)`,
/// and given `U` the n − k larger resampled values are images of independent
/// uniforms on `(U, 1)`. The tail mean is drawn exactly when few values exceed
/// the resampled VaR and from its normal limit otherwise.
pub fn bootstrap_standard_errors(
    sample: &[f64],
    levels: &[f64],
    resamples: usize,
    stream: RngStream,
) -> Result<Vec<(f64, f64)>> {
    check_sample(sample)?;
    for &q in levels {
        check_level(q)?;
    }
    if resamples < 2 {
        return Err(Error::domain("bootstrap needs at least two resamples"));
    }
    let n = sample.len();
    let nf = n as f64;
    let min_rank = levels.iter().map(|&q| var_rank(n, q)).min().unwrap_or(n);
    // U(k) concentrates within a few sd of k/n; leave a wide margin
    let margin = (50.0 * nf.sqrt()) as usize + 100;
    let sums = TailSums::new(sample, min_rank.saturating_sub(margin));

    levels
        .iter()
        .enumerate()
        .map(|(li, &q)| {
            let k = var_rank(n, q);
            let beta = Beta::new(k as f64, (n - k + 1) as f64)
                .map_err(|e| Error::Numerical(format!("beta law for rank {k}: {e}")))?;
            let mut rng = stream.substream(li as u64).rng();
            let mut vars = Vec::with_capacity(resamples);
            let mut ctes = Vec::with_capacity(resamples);
            for _ in 0..resamples {
                let u: f64 = beta.sample(&mut rng);
                let idx = ((nf * u).ceil() as usize).clamp(1, n) - 1;
                let var = sample[idx];
                let j0 = sample.partition_point(|&v| v <= var);
                let cte = if j0 == n || k == n {
                    var
                } else {
                    let p_in = ((1.0 - j0 as f64 / nf) / (1.0 - u)).clamp(0.0, 1.0);
                    let m = Binomial::new((n - k) as u64, p_in)
                        .map_err(|e| Error::Numerical(format!("binomial tail count: {e}")))?
                        .sample(&mut rng);
                    if m == 0 {
                        var
                    } else if m <= EXPLICIT_TAIL_DRAWS {
                        let total: f64 = (0..m).map(|_| sample[rng.random_range(j0..n)]).sum();
                        total / m as f64
                    } else {
                        let c = (n - j0) as f64;
                        let (s1, s2) = sums.from(sample, j0);
                        let mu = s1 / c;
                        let var_tail = (s2 / c - mu * mu).max(0.0);
                        mu + (var_tail / m as f64).sqrt() * standard_normal(&mut rng)
                    }
                };
                vars.push(var);
                ctes.push(cte);
            }
            Ok((sample_sd(&vars), sample_sd(&ctes)))
        })
        .collect()
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DependenceMode {
    On,
    Off,
    #[default]
    Both,
}

/// Risk measures for one dependence assumption, one entry per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMeasures {
    pub var: Vec<f64>,
    pub cte: Vec<f64>,
    pub var_pct: Vec<f64>,
    pub cte_pct: Vec<f64>,
    pub se_var: Vec<f64>,
    pub se_cte: Vec<f64>,
    pub cte_degenerate: Vec<bool>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub levels: Vec<f64>,
    pub dependent: Option<ModeMeasures>,
    pub independent: Option<ModeMeasures>,
    pub total_tvl: f64,
    pub n_sims: usize,
    pub seed: u64,
    pub stream_id: u64,
    pub bootstrap_resamples: usize,
    pub copula_repaired: bool,
}

fn measures(sample: &[f64], levels: &[f64], total_tvl: f64, stream: RngStream) -> Result<ModeMeasures> {
    let mut out = ModeMeasures {
        var: Vec::new(),
        cte: Vec::new(),
        var_pct: Vec::new(),
        cte_pct: Vec::new(),
        se_var: Vec::new(),
        se_cte: Vec::new(),
        cte_degenerate: Vec::new(),
        mean: sample.iter().sum::<f64>() / sample.len() as f64,
    };
    for &q in levels {
        let var = value_at_risk(sample, q)?;
        let cte = cte_detail(sample, q)?;
        out.var.push(var);
        out.cte.push(cte.value);
        out.var_pct.push(var / total_tvl);
        out.cte_pct.push(cte.value / total_tvl);
        out.cte_degenerate.push(cte.degenerate);
    }
    for (se_var, se_cte) in bootstrap_standard_errors(sample, levels, BOOTSTRAP_RESAMPLES, stream)? {
        out.se_var.push(se_var);
        out.se_cte.push(se_cte);
    }
    Ok(out)
}

/// VaR and CTE at each level with and/or without frequency dependence.
///
/// The dependent run uses substream 0 of `stream`, the independent run
/// substream 1, and their bootstraps substreams 2 and 3.
pub fn risk_report(
    exposures: &[Exposure],
    copula: &CopulaSpec,
    mode: DependenceMode,
    levels: &[f64],
    n_sims: usize,
    stream: RngStream,
    workers: usize,
) -> Result<RiskReport> {
    if levels.is_empty() {
        return Err(Error::Config("no risk levels requested".into()));
    }
    for &q in levels {
        check_level(q).map_err(|_| Error::Config(format!("risk level {q} outside (0, 1)")))?;
    }
    let total_tvl: f64 = exposures.iter().map(|e| e.tvl).sum();
    let run = |dep: bool| -> Result<ModeMeasures> {
        let (sim, boot) = if dep { (0, 2) } else { (1, 3) };
        let sample = simulate_aggregate(exposures, dep.then_some(copula), n_sims, stream.substream(sim), workers)?;
        measures(&sample, levels, total_tvl, stream.substream(boot))
    };
    let dependent = matches!(mode, DependenceMode::On | DependenceMode::Both).then(|| run(true)).transpose()?;
    let independent = matches!(mode, DependenceMode::Off | DependenceMode::Both).then(|| run(false)).transpose()?;
    Ok(RiskReport {
        levels: levels.to_vec(),
        dependent,
        independent,
        total_tvl,
        n_sims,
        seed: stream.seed,
        stream_id: stream.stream_id,
        bootstrap_resamples: BOOTSTRAP_RESAMPLES,
        copula_repaired: copula.repaired,
    })
}
