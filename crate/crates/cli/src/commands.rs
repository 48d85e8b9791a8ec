//! The six subcommands. Each reads its inputs, runs the library, and writes
//! its reports into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use defirisk::datamodel::{
    build_monthly_panel, derive_loss_ratio, effective_tvl, load_incidents, load_tvl, IncidentRecord, MonthlyPanelRow,
    ParseReport, Portfolio, ProtocolSpec, TvlObservation, YearMonth,
};
use defirisk::dependence::build_copula;
use defirisk::frequency::{fit_frequency, peer_interval, predict_attack_probability, FrequencyModel, TrainingWindow};
use defirisk::glm::{clamp_open_unit, hosmer_lemeshow_from_probabilities, HlResult};
use defirisk::numerics::{logistic, logit, std_normal_quantile, RngStream};
use defirisk::pricing::{price_with_attack_prob, quote_from_inputs, McMeta, PremiumQuote, PricingOptions, QuoteInputs};
use defirisk::severity::{
    default_window, fit_severity_detailed, predict_total_loss_prob, SeverityModel, SeverityOptions, DEFAULT_RATIO_SAMPLES,
};
use defirisk::tailrisk::{risk_report, Exposure, ModeMeasures, RiskReport, DEFAULT_SIMS};
use defirisk::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{ensure_dir, remove_stale, write_json, write_table, Cell, Table};
use crate::summary::{summarize, summary_table};

pub const SEVERITY_MODEL_FILE: &str = "severity_model.json";

// Stream ids keep the pricing and simulation draws independent of each other.
const PRICING_STREAM: u64 = 0;
const SIMULATION_STREAM: u64 = 1;

pub fn frequency_file(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("frequency_{id}.json"))
}

pub fn peer_file(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("peer_{id}.json"))
}

/// Attack probability for a protocol without incidents, borrowed from peers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerEstimate {
    pub protocol_id: String,
    pub tvl: f64,
    pub peers: Vec<String>,
    pub low: f64,
    pub point: f64,
    pub high: f64,
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn report_rejections(what: &str, report: &ParseReport) {
    if !report.rejected.is_empty() {
        warn(&format!("{what}: {} of {} rows rejected", report.rejected.len(), report.total_rows));
        for r in &report.rejected {
            eprintln!("  line {}: {}", r.line, r.reason);
        }
    }
}

struct Inputs {
    incidents: Option<(Vec<IncidentRecord>, ParseReport)>,
    tvl: Option<(Vec<TvlObservation>, ParseReport)>,
}

impl Inputs {
    fn load(cfg: &RunConfig, need_incidents: bool, need_tvl: bool) -> Result<Self> {
        let incidents = match (&cfg.incidents, need_incidents) {
            (Some(p), _) => Some(load_incidents(p)?),
            (None, true) => return Err(Error::Config("this command needs --incidents".into())),
            (None, false) => None,
        };
        let tvl = match (&cfg.tvl, need_tvl) {
            (Some(p), _) => Some(load_tvl(p)?),
            (None, true) => return Err(Error::Config("this command needs --tvl".into())),
            (None, false) => None,
        };
        if let Some((_, r)) = &incidents {
            report_rejections("incidents", r);
        }
        if let Some((_, r)) = &tvl {
            report_rejections("tvl", r);
        }
        Ok(Inputs { incidents, tvl })
    }

    fn incidents(&self) -> &[IncidentRecord] {
        self.incidents.as_ref().map_or(&[], |(v, _)| v)
    }

    fn tvl(&self) -> &[TvlObservation] {
        self.tvl.as_ref().map_or(&[], |(v, _)| v)
    }

    fn write_report(&self, dir: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Ingestion<'a> {
            incidents: Option<&'a ParseReport>,
            tvl: Option<&'a ParseReport>,
        }
        let doc = Ingestion { incidents: self.incidents.as_ref().map(|x| &x.1), tvl: self.tvl.as_ref().map(|x| &x.1) };
        write_json(&dir.join("ingestion_report.json"), &doc)
    }
}

fn load_portfolio(cfg: &RunConfig) -> Result<Portfolio> {
    Portfolio::load(cfg.require(&cfg.portfolio, "portfolio")?)
}

/// Exposure for pricing: the portfolio's TVL, else the latest observation.
fn exposure_tvl(p: &ProtocolSpec, tvl: &[TvlObservation], upto: Option<YearMonth>) -> Result<f64> {
    if let Some(v) = p.tvl {
        return Ok(v);
    }
    tvl.iter()
        .filter(|o| o.protocol_id == p.id && upto.is_none_or(|u| o.month <= u))
        .max_by_key(|o| o.month)
        .map(|o| o.tvl_usd)
        .ok_or_else(|| Error::Config(format!("no TVL for protocol {}: set `tvl` in the portfolio or pass --tvl", p.id)))
}

// ---------------------------------------------------------------- frequency

pub fn fit_frequency_cmd(cfg: &RunConfig) -> Result<()> {
    let portfolio = load_portfolio(cfg)?;
    let inputs = Inputs::load(cfg, true, true)?;
    let window_end = match cfg.window_end {
        Some(m) => m,
        None => inputs
            .tvl()
            .iter()
            .map(|o| o.month)
            .max()
            .ok_or_else(|| Error::Config("TVL file has no observations".into()))?,
    };
    ensure_dir(&cfg.output)?;
    inputs.write_report(&cfg.output)?;

    let panels: Vec<Vec<MonthlyPanelRow>> = portfolio
        .protocols
        .iter()
        .map(|p| build_monthly_panel(inputs.incidents(), inputs.tvl(), p, window_end))
        .collect::<Result<_>>()?;
    let fits: Vec<Option<FrequencyModel>> = panels
        .iter()
        .map(|panel| match fit_frequency(panel) {
            Ok(m) => Ok(Some(m)),
            Err(Error::NoEvents(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (i, p) in portfolio.protocols.iter().enumerate() {
        let tvl_next = exposure_tvl(p, inputs.tvl(), Some(window_end))?;
        let ffile = frequency_file(&cfg.output, &p.id);
        let pfile = peer_file(&cfg.output, &p.id);
        let mut row: Vec<Cell> = vec![p.id.clone().into(), p.chain.as_str().into()];
        match &fits[i] {
            Some(m) => {
                write_json(&ffile, m)?;
                remove_stale(&pfile)?;
                let prob = predict_attack_probability(m, tvl_next)?;
                let se = m.se.map(|s| (s[0], s[1]));
                row.extend([
                    "fitted".into(),
                    m.alpha0.into(),
                    m.alpha1.into(),
                    Cell::from(se.map(|s| s.0)),
                    Cell::from(se.map(|s| s.1)),
                    m.penalty.is_some().into(),
                    Cell::from(m.hl.as_ref().map(|h| h.statistic)),
                    Cell::from(m.hl.as_ref().map(|h| h.p_value)),
                    m.n_months.into(),
                    m.n_events.into(),
                    tvl_next.into(),
                    prob.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                ]);
            }
            None => {
                remove_stale(&ffile)?;
                let fitted: Vec<usize> = (0..fits.len()).filter(|&j| fits[j].is_some()).collect();
                let same_chain: Vec<usize> =
                    fitted.iter().copied().filter(|&j| portfolio.protocols[j].chain == p.chain).collect();
                let peers = if same_chain.is_empty() { fitted } else { same_chain };
                let head: [Cell; 9] = [
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    panels[i].len().into(),
                    0usize.into(),
                ];
                if peers.is_empty() {
                    remove_stale(&pfile)?;
                    warn(&format!("{}: no events and no peer with events; no attack probability", p.id));
                    row.push("no_events".into());
                    row.extend(head);
                    row.extend([tvl_next.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
                } else {
                    let peer_panels: Vec<Vec<MonthlyPanelRow>> = peers.iter().map(|&j| panels[j].clone()).collect();
                    let iv = peer_interval(&peer_panels, tvl_next)?;
                    let est = PeerEstimate {
                        protocol_id: p.id.clone(),
                        tvl: tvl_next,
                        peers: peers.iter().map(|&j| portfolio.protocols[j].id.clone()).collect(),
                        low: iv.low,
                        point: iv.point,
                        high: iv.high,
                    };
                    write_json(&pfile, &est)?;
                    row.push("peer".into());
                    row.extend(head);
                    row.extend([
                        tvl_next.into(),
                        iv.point.into(),
                        iv.low.into(),
                        iv.high.into(),
                        est.peers.join(";").into(),
                    ]);
                }
            }
        }
        row.push(window_end.to_string().into());
        rows.push(row);
    }
    let table = Table {
        header: vec![
            "protocol_id",
            "chain",
            "status",
            "alpha0",
            "alpha1",
            "se_alpha0",
            "se_alpha1",
            "penalized",
            "hl_stat",
            "hl_p",
            "n_months",
            "n_events",
            "tvl_next",
            "attack_prob",
            "peer_low",
            "peer_high",
            "peers",
            "window_end",
        ],
        rows,
    };
    write_table(&cfg.output, "frequency_report", cfg.format, &table)?;
    Ok(())
}

// ----------------------------------------------------------------- severity

fn severity_options(cfg: &RunConfig) -> SeverityOptions {
    let d = default_window();
    SeverityOptions {
        window: TrainingWindow { start: cfg.severity_start.unwrap_or(d.start), end: cfg.severity_end.unwrap_or(d.end) },
        ..SeverityOptions::default()
    }
}

/// Theoretical vs sample quantiles for a normal QQ plot.
fn qq_table(residuals: &[f64]) -> Result<Table> {
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let rows = sorted
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let q = std_normal_quantile((i as f64 + 0.5) / n)?;
            Ok(vec![(i + 1).into(), q.into(), r.into()])
        })
        .collect::<Result<_>>()?;
    Ok(Table { header: vec!["index", "theoretical_quantile", "sample_quantile"], rows })
}

pub fn fit_severity_cmd(cfg: &RunConfig) -> Result<()> {
    let inputs = Inputs::load(cfg, true, false)?;
    ensure_dir(&cfg.output)?;
    inputs.write_report(&cfg.output)?;
    let all = inputs.incidents();
    let positive: Vec<IncidentRecord> = all.iter().filter(|r| r.loss_usd > 0.0).cloned().collect();
    let zero_losses = all.len() - positive.len();
    if zero_losses > 0 {
        warn(&format!("{zero_losses} zero-loss incidents excluded from the severity fit"));
    }
    let opts = severity_options(cfg);
    let report = fit_severity_detailed(&positive, &opts)?;
    let model = &report.model;
    for w in &model.warnings {
        warn(&format!("severity: {w}"));
    }
    write_json(&cfg.output.join(SEVERITY_MODEL_FILE), model)?;

    #[derive(Serialize)]
    struct Diagnostics<'a> {
        n_incidents: usize,
        n_total_losses: usize,
        n_partial_losses: usize,
        zero_losses_excluded: usize,
        total_loss_only: bool,
        total_loss_constant: Option<f64>,
        hl: Option<&'a HlResult>,
        warnings: &'a [String],
    }
    write_json(
        &cfg.output.join("severity_diagnostics.json"),
        &Diagnostics {
            n_incidents: model.n_incidents,
            n_total_losses: model.n_total_losses,
            n_partial_losses: model.n_partial_losses,
            zero_losses_excluded: zero_losses,
            total_loss_only: model.is_total_loss_only(),
            total_loss_constant: model.total_loss_constant,
            hl: model.hl.as_ref(),
            warnings: &model.warnings,
        },
    )?;

    let ratios = Table {
        header: vec!["protocol_id", "date", "chain", "loss_usd", "tvl_usd", "ratio", "total_loss"],
        rows: report
            .used
            .iter()
            .zip(&report.ratios)
            .map(|(&i, &r)| {
                let rec = &positive[i];
                vec![
                    rec.protocol_id.clone().into(),
                    rec.date.to_string().into(),
                    rec.chain.as_str().into(),
                    rec.loss_usd.into(),
                    rec.tvl_usd.into(),
                    r.into(),
                    (r >= 1.0).into(),
                ]
            })
            .collect(),
    };
    write_table(&cfg.output, "loss_ratios", cfg.format, &ratios)?;
    write_table(&cfg.output, "quantile_residuals", cfg.format, &qq_table(&report.quantile_residuals)?)?;
    Ok(())
}

// ------------------------------------------------------------------ pricing

fn load_severity(cfg: &RunConfig) -> Result<SeverityModel> {
    let path = cfg.models.join(SEVERITY_MODEL_FILE);
    if !path.exists() {
        return Err(Error::Config(format!("missing severity model {}; run fit-severity first", path.display())));
    }
    read_json(&path)
}

fn pricing_date(cfg: &RunConfig, severity: &SeverityModel) -> NaiveDate {
    cfg.pricing_date.unwrap_or_else(|| severity.window.end.succ().first_day())
}

/// Attack probability from, in order: an override, a fitted frequency model,
/// a peer estimate.
fn attack_probability(cfg: &RunConfig, p: &ProtocolSpec, tvl: f64) -> Result<f64> {
    if let Some(o) = cfg.overrides.get(&p.id) {
        return Ok(o.attack_prob);
    }
    let f = frequency_file(&cfg.models, &p.id);
    if f.exists() {
        let m: FrequencyModel = read_json(&f)?;
        return predict_attack_probability(&m, tvl);
    }
    let peer = peer_file(&cfg.models, &p.id);
    if peer.exists() {
        let est: PeerEstimate = read_json(&peer)?;
        if (est.tvl - tvl).abs() > 1e-9 * tvl {
            warn(&format!("{}: peer estimate was made at TVL {} but pricing uses {tvl}", p.id, est.tvl));
        }
        return Ok(est.point);
    }
    Err(Error::Config(format!(
        "missing frequency model for protocol {} in {}; run fit-frequency or supply an override",
        p.id,
        cfg.models.display()
    )))
}

fn exposures_tvl(cfg: &RunConfig, portfolio: &Portfolio) -> Result<Vec<f64>> {
    let tvl = match &cfg.tvl {
        Some(p) => load_tvl(p)?.0,
        None => Vec::new(),
    };
    portfolio.protocols.iter().map(|p| exposure_tvl(p, &tvl, cfg.window_end)).collect()
}

pub fn price_cmd(cfg: &RunConfig) -> Result<()> {
    let portfolio = load_portfolio(cfg)?;
    let tvls = exposures_tvl(cfg, &portfolio)?;
    let theta = cfg.theta.unwrap_or(portfolio.loading_theta);
    let n_samples = cfg.n_samples.unwrap_or(DEFAULT_RATIO_SAMPLES);
    let needs_severity =
        portfolio.protocols.iter().any(|p| cfg.overrides.get(&p.id).is_none_or(|o| o.loss_fraction.is_none()));
    let severity = needs_severity.then(|| load_severity(cfg)).transpose()?;
    let stream = RngStream::new(cfg.seed, PRICING_STREAM);
    ensure_dir(&cfg.output)?;

    let mut quotes: Vec<PremiumQuote> = Vec::new();
    for (i, (p, &tvl)) in portfolio.protocols.iter().zip(&tvls).enumerate() {
        let attack = attack_probability(cfg, p, tvl)?;
        let sub = stream.substream(i as u64);
        let q = match cfg.overrides.get(&p.id).and_then(|o| o.loss_fraction.map(|l| (l, o.loss_sq_fraction))) {
            Some((loss, loss_sq)) => {
                let inputs = QuoteInputs {
                    protocol_id: p.id.clone(),
                    attack_prob: attack,
                    tvl,
                    loss_fraction: loss,
                    loss_sq_fraction: loss_sq,
                    total_loss_prob: None,
                };
                let meta = McMeta {
                    n_samples: 0,
                    seed: sub.seed,
                    stream_id: sub.stream_id,
                    variance_clamped: false,
                    second_moment_bounded: false,
                };
                quote_from_inputs(&inputs, theta, cfg.coverage_fraction, meta)?
            }
            None => {
                let sev = severity.as_ref().expect("loaded when needed");
                let opts = PricingOptions { theta, n_samples, when: pricing_date(cfg, sev), coverage_fraction: cfg.coverage_fraction };
                price_with_attack_prob(&p.id, p.chain, tvl, attack, sev, &opts, sub)?
            }
        };
        if q.mc_meta.second_moment_bounded {
            warn(&format!("{}: no second moment given; SD premium uses the bound E(Y^2) <= TVL * E(Y)", p.id));
        }
        if q.mc_meta.variance_clamped {
            warn(&format!("{}: negative variance estimate clamped to zero", p.id));
        }
        quotes.push(q);
    }
    let pct = |v: f64| Cell::Num(100.0 * v);
    let table = Table {
        header: vec![
            "protocol_id",
            "tvl",
            "attack_prob",
            "total_loss_prob",
            "loss_pct",
            "loss_sq_pct",
            "theta",
            "expectation_usd",
            "expectation_pct",
            "sd_usd",
            "sd_pct",
            "n_samples",
            "seed",
        ],
        rows: quotes
            .iter()
            .map(|q| {
                vec![
                    q.protocol_id.clone().into(),
                    q.tvl.into(),
                    q.attack_prob.into(),
                    q.total_loss_prob.into(),
                    pct(q.loss_pct),
                    pct(q.loss_sq_pct),
                    q.theta.into(),
                    q.expectation_premium_usd.into(),
                    pct(q.expectation_premium_pct),
                    q.sd_premium_usd.into(),
                    pct(q.sd_premium_pct),
                    q.mc_meta.n_samples.into(),
                    q.mc_meta.seed.into(),
                ]
            })
            .collect(),
    };
    write_table(&cfg.output, "quotes", cfg.format, &table)?;
    Ok(())
}

// --------------------------------------------------------------- simulation

pub fn simulate_cmd(cfg: &RunConfig) -> Result<()> {
    let portfolio = load_portfolio(cfg)?;
    let tvls = exposures_tvl(cfg, &portfolio)?;
    let severity = load_severity(cfg)?;
    let when = pricing_date(cfg, &severity);
    let copula = build_copula(&portfolio.similarity)?;
    if copula.repaired {
        warn(&format!(
            "similarity matrix is not positive definite; using the nearest correlation matrix (Frobenius shift {:e})",
            copula.frobenius_shift
        ));
    }
    for p in &portfolio.protocols {
        if cfg.overrides.get(&p.id).is_some_and(|o| o.loss_fraction.is_some() || o.loss_sq_fraction.is_some()) {
            warn(&format!("{}: loss overrides are ignored by simulate; losses come from the severity model", p.id));
        }
    }
    let exposures: Vec<Exposure> = portfolio
        .protocols
        .iter()
        .zip(&tvls)
        .map(|(p, &tvl)| {
            let attack = attack_probability(cfg, p, tvl)?;
            Exposure::new(&p.id, tvl, attack, severity.sampler(p.chain, tvl, when)?)
        })
        .collect::<Result<_>>()?;
    let n_sims = cfg.n_samples.unwrap_or(DEFAULT_SIMS);
    let report = risk_report(
        &exposures,
        &copula,
        cfg.dependence,
        &cfg.levels,
        n_sims,
        RngStream::new(cfg.seed, SIMULATION_STREAM),
        cfg.workers,
    )?;
    ensure_dir(&cfg.output)?;
    write_table(&cfg.output, "risk_report", cfg.format, &risk_table(&report))?;
    Ok(())
}

fn risk_table(r: &RiskReport) -> Table {
    let get = |m: &Option<ModeMeasures>, f: fn(&ModeMeasures) -> &Vec<f64>, k: usize| -> Cell {
        m.as_ref().map_or(Cell::Empty, |m| f(m)[k].into())
    };
    let rows = r
        .levels
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let (d, i) = (&r.dependent, &r.independent);
            vec![
                q.into(),
                get(d, |m| &m.var, k),
                get(i, |m| &m.var, k),
                get(d, |m| &m.cte, k),
                get(i, |m| &m.cte, k),
                get(d, |m| &m.var_pct, k),
                get(i, |m| &m.var_pct, k),
                get(d, |m| &m.cte_pct, k),
                get(i, |m| &m.cte_pct, k),
                get(d, |m| &m.se_var, k),
                get(i, |m| &m.se_var, k),
                get(d, |m| &m.se_cte, k),
                get(i, |m| &m.se_cte, k),
                r.total_tvl.into(),
                r.n_sims.into(),
                r.seed.into(),
            ]
        })
        .collect();
    Table {
        header: vec![
            "level",
            "var_dep",
            "var_indep",
            "cte_dep",
            "cte_indep",
            "var_dep_frac",
            "var_indep_frac",
            "cte_dep_frac",
            "cte_indep_frac",
            "se_var_dep",
            "se_var_indep",
            "se_cte_dep",
            "se_cte_indep",
            "total_tvl",
            "n_sims",
            "seed",
        ],
        rows,
    }
}

// ---------------------------------------------------------------------- gof

fn hl_row(model: &str, id: &str, n: usize, hl: Result<HlResult>) -> Result<Vec<Cell>> {
    let mut row: Vec<Cell> = vec![model.into(), id.into(), n.into()];
    match hl {
        Ok(h) => row.extend([h.statistic.into(), u64::from(h.df).into(), h.p_value.into(), h.groups_used.into(), Cell::Empty]),
        Err(Error::TestNotApplicable(why)) => {
            row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, why.into()]);
        }
        Err(e) => return Err(e),
    }
    Ok(row)
}

pub fn gof_cmd(cfg: &RunConfig) -> Result<()> {
    let inputs = Inputs::load(cfg, true, false)?;
    let mut rows = Vec::new();

    if let (Some(path), Some((tvl, _))) = (&cfg.portfolio, &inputs.tvl) {
        let portfolio = Portfolio::load(path)?;
        for p in &portfolio.protocols {
            let f = frequency_file(&cfg.models, &p.id);
            if !f.exists() {
                continue;
            }
            let m: FrequencyModel = read_json(&f)?;
            let panel = build_monthly_panel(inputs.incidents(), tvl, p, m.window.end)?;
            let panel: Vec<&MonthlyPanelRow> = panel.iter().filter(|r| r.month >= m.window.start).collect();
            let probs: Vec<f64> = panel.iter().map(|r| clamp_open_unit(logistic(m.linear_predictor(r.log_tvl)))).collect();
            let y: Vec<bool> = panel.iter().map(|r| r.event).collect();
            rows.push(hl_row("frequency", &p.id, y.len(), hosmer_lemeshow_from_probabilities(&probs, &y, cfg.hl_groups))?);
        }
    }

    let mut residuals = Vec::new();
    let sev_path = cfg.models.join(SEVERITY_MODEL_FILE);
    if sev_path.exists() {
        let model: SeverityModel = read_json(&sev_path)?;
        let used: Vec<&IncidentRecord> = inputs
            .incidents()
            .iter()
            .filter(|r| {
                let m = YearMonth::of_date(r.date);
                r.loss_usd > 0.0 && model.window.start <= m && m <= model.window.end
            })
            .collect();
        let mut probs = Vec::with_capacity(used.len());
        let mut y = Vec::with_capacity(used.len());
        for r in &used {
            let tvl = effective_tvl(r);
            let ratio = derive_loss_ratio(r)?;
            probs.push(predict_total_loss_prob(&model, r.chain, tvl, r.date)?);
            y.push(ratio >= 1.0);
            if let (Some(g), Some(s2)) = (model.gamma, model.sigma2) {
                if ratio < 1.0 && s2 > 0.0 {
                    residuals.push((logit(ratio) - g[0] - g[1] * tvl.ln()) / s2.sqrt());
                }
            }
        }
        let hl = if model.total_loss_constant.is_some() {
            Err(Error::TestNotApplicable("total-loss probability is a constant".into()))
        } else {
            hosmer_lemeshow_from_probabilities(&probs, &y, cfg.hl_groups)
        };
        rows.push(hl_row("severity_total_loss", "all", y.len(), hl)?);
    }

    if rows.is_empty() {
        return Err(Error::Config(format!("no fitted models found in {}", cfg.models.display())));
    }
    ensure_dir(&cfg.output)?;
    let table = Table { header: vec!["model", "protocol_id", "n", "stat", "df", "p", "groups_used", "note"], rows };
    write_table(&cfg.output, "gof", cfg.format, &table)?;
    write_table(&cfg.output, "gof_quantile_residuals", cfg.format, &qq_table(&residuals)?)?;
    Ok(())
}

// ---------------------------------------------------------------- summarize

pub fn summarize_cmd(cfg: &RunConfig) -> Result<()> {
    let inputs = Inputs::load(cfg, true, false)?;
    let rows = summarize(inputs.incidents());
    if rows.is_empty() {
        eprintln!("notice: incident file is empty; summary has no rows");
    }
    ensure_dir(&cfg.output)?;
    inputs.write_report(&cfg.output)?;
    write_table(&cfg.output, "summary", cfg.format, &summary_table(&rows))?;
    Ok(())
}
