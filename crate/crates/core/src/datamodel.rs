//! Domain records, file ingestion and the monthly frequency panel.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{matrix_from_rows, SYMMETRY_TOL};

pub const INCIDENT_HEADER: [&str; 6] =
    ["protocol_id", "date", "chain", "issue_type", "loss_usd", "tvl_usd"];
pub const TVL_HEADER: [&str; 3] = ["protocol_id", "month", "tvl_usd"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Chain {
    Eth,
    Bsc,
    Other,
}

impl Chain {
    /// Unknown chains map to `Other`.
    pub fn parse_lenient(s: &str) -> Chain {
        match s.trim().to_ascii_uppercase().as_str() {
            "ETH" => Chain::Eth,
            "BSC" => Chain::Bsc,
            _ => Chain::Other,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Chain::Eth => "ETH",
            Chain::Bsc => "BSC",
            Chain::Other => "OTHER",
        }
    }

    pub const ALL: [Chain; 3] = [Chain::Bsc, Chain::Eth, Chain::Other];
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueType {
    AccessControl,
    FlashLoan,
    Oracle,
    Phishing,
    Reentrancy,
    Other,
}

impl IssueType {
    /// Unknown issue types map to `Other`. Case, hyphens and spaces are ignored.
    pub fn parse_lenient(s: &str) -> IssueType {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| if c == '-' || c == ' ' { '_' } else { c.to_ascii_lowercase() })
            .collect();
        match norm.as_str() {
            "access_control" => IssueType::AccessControl,
            "flash_loan" => IssueType::FlashLoan,
            "oracle" => IssueType::Oracle,
            "phishing" => IssueType::Phishing,
            "reentrancy" => IssueType::Reentrancy,
            _ => IssueType::Other,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            IssueType::AccessControl => "access_control",
            IssueType::FlashLoan => "flash_loan",
            IssueType::Oracle => "oracle",
            IssueType::Phishing => "phishing",
            IssueType::Reentrancy => "reentrancy",
            IssueType::Other => "other",
        }
    }
}

/// Calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::domain(format!("month {month} out of range")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn of_date(date: NaiveDate) -> Self {
        YearMonth { year: date.year(), month: date.month() }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    fn index(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_index(i: i64) -> Self {
        YearMonth { year: i.div_euclid(12) as i32, month: (i.rem_euclid(12) + 1) as u32 }
    }

    pub fn succ(&self) -> Self {
        Self::from_index(self.index() + 1)
    }

    /// Number of months from `self` to `end`, both inclusive; zero if `end` precedes `self`.
    pub fn months_through(&self, end: YearMonth) -> usize {
        (end.index() - self.index() + 1).max(0) as usize
    }

    pub fn first_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid year-month")
    }

    pub fn range_inclusive(self, end: YearMonth) -> impl Iterator<Item = YearMonth> {
        (self.index()..=end.index()).map(YearMonth::from_index)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Schema(format!("invalid month `{s}` (expected YYYY-MM)"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month).map_err(|_| bad())
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub protocol_id: String,
    pub date: NaiveDate,
    pub chain: Chain,
    pub issue_type: IssueType,
    pub loss_usd: f64,
    /// TVL one day before the attack, when known.
    pub tvl_usd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvlObservation {
    pub protocol_id: String,
    pub month: YearMonth,
    pub tvl_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub id: String,
    pub chain: Chain,
    pub inception: YearMonth,
    #[serde(default)]
    pub description: String,
    /// Exposure used for pricing and simulation. When absent the latest
    /// observed monthly TVL is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tvl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub protocols: Vec<ProtocolSpec>,
    pub similarity: Vec<Vec<f64>>,
    #[serde(rename = "theta")]
    pub loading_theta: f64,
}

impl Portfolio {
    pub fn new(protocols: Vec<ProtocolSpec>, similarity: Vec<Vec<f64>>, loading_theta: f64) -> Result<Self> {
        let p = Portfolio { protocols, similarity, loading_theta };
        p.validate()?;
        Ok(p)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: Portfolio =
            serde_json::from_str(s).map_err(|e| Error::Schema(format!("portfolio JSON: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_json_str(&text)
    }

    pub fn dim(&self) -> usize {
        self.protocols.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.protocols.len();
        if d == 0 {
            return Err(Error::Config("portfolio has no protocols".into()));
        }
        let mut seen = HashSet::new();
        for p in &self.protocols {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::Config(format!("duplicate protocol id `{}`", p.id)));
            }
            if let Some(tvl) = p.tvl {
                if !(tvl > 0.0 && tvl.is_finite()) {
                    return Err(Error::Config(format!("protocol `{}` has nonpositive tvl", p.id)));
                }
            }
        }
        if !(self.loading_theta > 0.0 && self.loading_theta.is_finite()) {
            return Err(Error::Config(format!("theta must be positive, got {}", self.loading_theta)));
        }
        if self.similarity.len() != d {
            return Err(Error::Config(format!(
                "similarity matrix has {} rows for {d} protocols",
                self.similarity.len()
            )));
        }
        let m = matrix_from_rows(&self.similarity).map_err(|e| Error::Config(e.to_string()))?;
        for i in 0..d {
            if (m[(i, i)] - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::Config(format!("similarity diagonal entry {i} is not 1")));
            }
            for j in 0..d {
                let v = m[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("similarity entry ({i}, {j}) = {v} outside [0, 1]")));
                }
                if (v - m[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::Config(format!("similarity is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.protocols.iter().position(|p| p.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyPanelRow {
    pub protocol_id: String,
    pub month: YearMonth,
    pub event: bool,
    pub log_tvl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRow {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParseReport {
    pub total_rows: usize,
    pub accepted: usize,
    pub rejected: Vec<RejectedRow>,
    /// Accepted incident rows with a zero loss; they carry no severity information.
    pub zero_loss_lines: Vec<u64>,
}

fn open_csv(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::Schema(format!("{}: unreadable header: {e}", path.display())))?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Schema(format!(
            "{}: header `{}` does not match `{}`",
            path.display(),
            got.join(","),
            expected.join(",")
        )));
    }
    Ok(reader)
}

fn parse_amount(field: &str, name: &str) -> std::result::Result<f64, String> {
    let v: f64 = field.parse().map_err(|_| format!("{name} `{field}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{name} `{field}` is not finite"));
    }
    if v < 0.0 {
        return Err(format!("{name} {v} is negative"));
    }
    Ok(v)
}

fn parse_incident(rec: &csv::StringRecord) -> std::result::Result<IncidentRecord, String> {
    if rec.len() != INCIDENT_HEADER.len() {
        return Err(format!("expected {} fields, found {}", INCIDENT_HEADER.len(), rec.len()));
    }
    let protocol_id = rec[0].to_string();
    if protocol_id.is_empty() {
        return Err("empty protocol_id".into());
    }
    let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
        .map_err(|_| format!("date `{}` is not YYYY-MM-DD", &rec[1]))?;
    let loss_usd = parse_amount(&rec[4], "loss_usd")?;
    let tvl_usd = if rec[5].is_empty() { None } else { Some(parse_amount(&rec[5], "tvl_usd")?) };
    Ok(IncidentRecord {
        protocol_id,
        date,
        chain: Chain::parse_lenient(&rec[2]),
        issue_type: IssueType::parse_lenient(&rec[3]),
        loss_usd,
        tvl_usd,
    })
}

/// Reads an incidents CSV. Unparseable rows are reported, never dropped silently.
pub fn load_incidents(path: &Path) -> Result<(Vec<IncidentRecord>, ParseReport)> {
    let mut reader = open_csv(path, &INCIDENT_HEADER)?;
    let mut report = ParseReport::default();
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i as u64 + 2;
        report.total_rows += 1;
        let parsed = row.map_err(|e| e.to_string()).and_then(|r| parse_incident(&r));
        match parsed {
            Ok(rec) => {
                if rec.loss_usd == 0.0 {
                    report.zero_loss_lines.push(line);
                }
                out.push(rec);
                report.accepted += 1;
            }
            Err(reason) => report.rejected.push(RejectedRow { line, reason }),
        }
    }
    Ok((out, report))
}

pub fn load_tvl(path: &Path) -> Result<(Vec<TvlObservation>, ParseReport)> {
    let mut reader = open_csv(path, &TVL_HEADER)?;
    let mut report = ParseReport::default();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let line = i as u64 + 2;
        report.total_rows += 1;
        let parsed = row.map_err(|e| e.to_string()).and_then(|r| {
            if r.len() != TVL_HEADER.len() {
                return Err(format!("expected {} fields, found {}", TVL_HEADER.len(), r.len()));
            }
            if r[0].is_empty() {
                return Err("empty protocol_id".into());
            }
            let month: YearMonth = r[1].parse().map_err(|e: Error| e.to_string())?;
            let tvl_usd = parse_amount(&r[2], "tvl_usd")?;
            if !seen.insert((r[0].to_string(), month)) {
                return Err(format!("duplicate observation for {} in {month}", &r[0]));
            }
            Ok(TvlObservation { protocol_id: r[0].to_string(), month, tvl_usd })
        });
        match parsed {
            Ok(obs) => {
                out.push(obs);
                report.accepted += 1;
            }
            Err(reason) => report.rejected.push(RejectedRow { line, reason }),
        }
    }
    Ok((out, report))
}

/// One row per month from inception through `window_end`. Several incidents
/// in the same month collapse to a single event.
pub fn build_monthly_panel(
    incidents: &[IncidentRecord],
    tvl: &[TvlObservation],
    protocol: &ProtocolSpec,
    window_end: YearMonth,
) -> Result<Vec<MonthlyPanelRow>> {
    if window_end < protocol.inception {
        return Err(Error::InsufficientData(format!(
            "window end {window_end} precedes inception {} of {}",
            protocol.inception, protocol.id
        )));
    }
    let by_month: BTreeMap<YearMonth, f64> = tvl
        .iter()
        .filter(|o| o.protocol_id == protocol.id)
        .map(|o| (o.month, o.tvl_usd))
        .collect();
    let event_months: BTreeSet<YearMonth> = incidents
        .iter()
        .filter(|r| r.protocol_id == protocol.id)
        .map(|r| YearMonth::of_date(r.date))
        .collect();

    protocol
        .inception
        .range_inclusive(window_end)
        .map(|month| {
            let tvl_usd = *by_month.get(&month).ok_or_else(|| Error::TvlGap {
                protocol: protocol.id.clone(),
                month: month.to_string(),
            })?;
            if !(tvl_usd > 0.0) {
                return Err(Error::domain(format!(
                    "TVL for {} in {month} is zero; log TVL undefined",
                    protocol.id
                )));
            }
            Ok(MonthlyPanelRow {
                protocol_id: protocol.id.clone(),
                month,
                event: event_months.contains(&month),
                log_tvl: tvl_usd.ln(),
            })
        })
        .collect()
}

/// Fraction of TVL lost, in (0, 1]. Missing or zero TVL counts as a total
/// loss, and losses recorded above TVL clip to 1.
pub fn derive_loss_ratio(incident: &IncidentRecord) -> Result<f64> {
    if !(incident.loss_usd > 0.0) {
        return Err(Error::domain(format!(
            "incident for {} on {} has no positive loss",
            incident.protocol_id, incident.date
        )));
    }
    Ok(match incident.tvl_usd {
        Some(tvl) if tvl > 0.0 => (incident.loss_usd / tvl).min(1.0),
        _ => 1.0,
    })
}

/// TVL used as the severity covariate. When TVL is missing or zero the lost
/// funds stand in for it, consistent with treating the event as a total loss.
pub fn effective_tvl(incident: &IncidentRecord) -> f64 {
    match incident.tvl_usd {
        Some(tvl) if tvl > 0.0 => tvl,
        _ => incident.loss_usd,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn incident(id: &str, date: &str, loss: f64, tvl: Option<f64>) -> IncidentRecord {
        IncidentRecord {
            protocol_id: id.into(),
            date: NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap(),
            chain: Chain::Eth,
            issue_type: IssueType::Other,
            loss_usd: loss,
            tvl_usd: tvl,
        }
    }

    fn protocol(id: &str, inception: &str) -> ProtocolSpec {
        ProtocolSpec {
            id: id.into(),
            chain: Chain::Eth,
            inception: ym(inception),
            description: String::new(),
            tvl: None,
        }
    }

    fn flat_tvl(id: &str, from: &str, to: &str, v: f64) -> Vec<TvlObservation> {
        ym(from)
            .range_inclusive(ym(to))
            .map(|month| TvlObservation { protocol_id: id.into(), month, tvl_usd: v })
            .collect()
    }

    #[test]
    fn incidents_csv_parsing() {
        let f = write_tmp(
            "protocol_id,date,chain,issue_type,loss_usd,tvl_usd\n\
             P1,2022-03-29,ETH,other,600000000,\n\
             P2,2021-01-05,SOLANA,flash loan,1000,5000\n\
             P3,2021-01-05,BSC,oracle,-5,\n\
             P4,2021-13-05,BSC,oracle,5,\n\
             P5,2021-02-05,bsc,Reentrancy,0,10\n\
             P6,2021-02-05,bsc\n",
        );
        let (recs, report) = load_incidents(f.path()).unwrap();
        assert_eq!(report.total_rows, 6);
        assert_eq!(recs.len(), 3);
        assert_eq!(report.accepted + report.rejected.len(), report.total_rows);
        assert_eq!(recs[0].tvl_usd, None);
        assert_eq!(recs[0].loss_usd, 600_000_000.0);
        assert_eq!(recs[1].chain, Chain::Other);
        assert_eq!(recs[1].issue_type, IssueType::FlashLoan);
        assert_eq!(recs[2].chain, Chain::Bsc);
        assert_eq!(recs[2].issue_type, IssueType::Reentrancy);
        assert_eq!(report.zero_loss_lines, vec![6]);
        let lines: Vec<u64> = report.rejected.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![4, 5, 7]);
        assert!(report.rejected[0].reason.contains("negative"));
    }

    #[test]
    fn header_and_missing_file_errors() {
        let f = write_tmp("protocol,date,chain,issue_type,loss_usd,tvl_usd\n");
        assert!(matches!(load_incidents(f.path()), Err(Error::Schema(_))));
        assert!(matches!(
            load_incidents(Path::new("/nonexistent/incidents.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn tvl_csv_rejects_duplicates() {
        let f = write_tmp("protocol_id,month,tvl_usd\nA,2020-05,10\nA,2020-05,11\nA,2020-6,3\nA,2020-06,3\n");
        let (obs, report) = load_tvl(f.path()).unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(report.rejected.len(), 2);
        assert!(report.rejected[0].reason.contains("duplicate"));
    }

    #[test]
    fn panel_without_incidents() {
        let p = protocol("A", "2020-05");
        let tvl = flat_tvl("A", "2020-05", "2020-07", 1e6);
        let panel = build_monthly_panel(&[], &tvl, &p, ym("2020-07")).unwrap();
        assert_eq!(panel.len(), 3);
        assert!(panel.iter().all(|r| !r.event));
    }

    #[test]
    fn same_month_incidents_collapse() {
        let p = protocol("A", "2021-06");
        let tvl = flat_tvl("A", "2021-06", "2021-10", 1e6);
        let incidents = vec![
            incident("A", "2021-08-02", 10.0, None),
            incident("A", "2021-08-30", 20.0, None),
            incident("B", "2021-09-01", 20.0, None),
        ];
        let panel = build_monthly_panel(&incidents, &tvl, &p, ym("2021-10")).unwrap();
        let events: Vec<bool> = panel.iter().map(|r| r.event).collect();
        assert_eq!(events, vec![false, false, true, false, false]);
    }

    #[test]
    fn log_tvl_is_natural_log() {
        let p = protocol("A", "2020-01");
        let tvl = flat_tvl("A", "2020-01", "2020-01", 10f64.exp());
        let panel = build_monthly_panel(&[], &tvl, &p, ym("2020-01")).unwrap();
        assert_eq!(panel[0].log_tvl, 10.0);
    }

    #[test]
    fn panel_gap_and_zero_tvl_errors() {
        let p = protocol("A", "2020-01");
        let mut tvl = flat_tvl("A", "2020-01", "2020-04", 5.0);
        tvl.remove(2);
        match build_monthly_panel(&[], &tvl, &p, ym("2020-04")) {
            Err(Error::TvlGap { month, .. }) => assert_eq!(month, "2020-03"),
            other => panic!("expected gap, got {other:?}"),
        }
        let mut tvl = flat_tvl("A", "2020-01", "2020-02", 5.0);
        tvl[1].tvl_usd = 0.0;
        assert!(matches!(build_monthly_panel(&[], &tvl, &p, ym("2020-02")), Err(Error::Domain(_))));
    }

    #[test]
    fn loss_ratio_rules() {
        assert_eq!(derive_loss_ratio(&incident("A", "2021-01-01", 5e6, None)).unwrap(), 1.0);
        assert_eq!(derive_loss_ratio(&incident("A", "2021-01-01", 2e6, Some(8e6))).unwrap(), 0.25);
        assert_eq!(derive_loss_ratio(&incident("A", "2021-01-01", 9e6, Some(8e6))).unwrap(), 1.0);
        assert_eq!(derive_loss_ratio(&incident("A", "2021-01-01", 9e6, Some(0.0))).unwrap(), 1.0);
        assert!(derive_loss_ratio(&incident("A", "2021-01-01", 0.0, Some(8e6))).is_err());
        assert_eq!(effective_tvl(&incident("A", "2021-01-01", 7.0, None)), 7.0);
    }

    #[test]
    fn year_month_arithmetic() {
        assert_eq!(ym("2020-12").succ(), ym("2021-01"));
        assert_eq!(ym("2020-05").months_through(ym("2020-07")), 3);
        assert_eq!(ym("2020-05").months_through(ym("2020-04")), 0);
        assert!("2020-13".parse::<YearMonth>().is_err());
        assert!("20-01".parse::<YearMonth>().is_err());
        assert_eq!(ym("2019-11").to_string(), "2019-11");
    }

    #[test]
    fn portfolio_validation() {
        let good = r#"{"protocols":[{"id":"A","chain":"ETH","inception":"2020-05","description":"x"},
                                    {"id":"B","chain":"BSC","inception":"2020-11","description":"y"}],
                       "similarity":[[1.0,0.3],[0.3,1.0]],"theta":0.5}"#;
        let p = Portfolio::from_json_str(good).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.index_of("B"), Some(1));
        let asym = good.replace("[[1.0,0.3],[0.3,1.0]]", "[[1.0,0.3],[0.2,1.0]]");
        assert!(Portfolio::from_json_str(&asym).is_err());
        let neg = good.replace("[[1.0,0.3],[0.3,1.0]]", "[[1.0,-0.3],[-0.3,1.0]]");
        assert!(Portfolio::from_json_str(&neg).is_err());
        let theta = good.replace("\"theta\":0.5", "\"theta\":0");
        assert!(Portfolio::from_json_str(&theta).is_err());
        let dup = good.replace("\"id\":\"B\"", "\"id\":\"A\"");
        assert!(Portfolio::from_json_str(&dup).is_err());
        let dim = good.replace("[[1.0,0.3],[0.3,1.0]]", "[[1.0]]");
        assert!(Portfolio::from_json_str(&dim).is_err());
    }
}
