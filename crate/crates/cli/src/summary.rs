//! Descriptive statistics of an incident file: counts and loss summaries by
//! year, issue type, chain and chain × year.

use std::collections::BTreeMap;

use chrono::Datelike;
use defirisk::datamodel::IncidentRecord;

use crate::output::{Cell, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub dimension: &'static str,
    pub group: String,
    pub count: usize,
    pub median_usd: f64,
    pub mean_usd: f64,
    /// Sample SD; absent for a single incident.
    pub sd_usd: Option<f64>,
    /// Log summaries cover positive losses only.
    pub mean_log_usd: Option<f64>,
    pub sd_log_usd: Option<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some((xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn summarize_group(dimension: &'static str, group: String, losses: &[f64]) -> GroupSummary {
    let logs: Vec<f64> = losses.iter().filter(|l| **l > 0.0).map(|l| l.ln()).collect();
    GroupSummary {
        dimension,
        group,
        count: losses.len(),
        median_usd: median(losses),
        mean_usd: mean(losses),
        sd_usd: sample_sd(losses),
        mean_log_usd: (!logs.is_empty()).then(|| mean(&logs)),
        sd_log_usd: sample_sd(&logs),
    }
}

/// Summaries in a fixed order: overall, then each dimension with groups
/// sorted by name. Empty input gives an empty list.
pub fn summarize(incidents: &[IncidentRecord]) -> Vec<GroupSummary> {
    if incidents.is_empty() {
        return Vec::new();
    }
    type Key = fn(&IncidentRecord) -> String;
    let dims: [(&'static str, Key); 4] = [
        ("year", |r| r.date.year().to_string()),
        ("issue_type", |r| r.issue_type.as_str().to_string()),
        ("chain", |r| r.chain.as_str().to_string()),
        ("chain_year", |r| format!("{}:{}", r.chain.as_str(), r.date.year())),
    ];
    let all: Vec<f64> = incidents.iter().map(|r| r.loss_usd).collect();
    let mut out = vec![summarize_group("all", "all".into(), &all)];
    for (dim, key) in dims {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in incidents {
            groups.entry(key(r)).or_default().push(r.loss_usd);
        }
        out.extend(groups.into_iter().map(|(g, losses)| summarize_group(dim, g, &losses)));
    }
    out
}

pub fn summary_table(rows: &[GroupSummary]) -> Table {
    Table {
        header: vec!["dimension", "group", "count", "median_usd", "mean_usd", "sd_usd", "mean_log_usd", "sd_log_usd"],
        rows: rows
            .iter()
            .map(|s| {
                vec![
                    s.dimension.into(),
                    s.group.clone().into(),
                    s.count.into(),
                    s.median_usd.into(),
                    s.mean_usd.into(),
                    s.sd_usd.into(),
                    s.mean_log_usd.into(),
                    s.sd_log_usd.into(),
                ]
            })
            .collect::<Vec<Vec<Cell>>>(),
    }
}
