//! Batch attacks over a corpus and the reports they produce.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use raf_core::attack::{raf_attack, AttackConfig, AttackError, AttackStatus};
use raf_core::landmarks::LandmarkSet;
use raf_core::oracle::{Oracle, OracleError};
use raf_core::warp::{Image, WarpFunction};

use crate::corpus::{Corpus, CorpusItem};
use crate::HarnessError;

pub const CSV_HEADER: [&str; 6] = [
    "label",
    "status",
    "queries_used",
    "success_function",
    "success_scale",
    "final_delta",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Dodge,
    Impersonation,
    Failed,
    Error,
}

impl From<AttackStatus> for RowStatus {
    fn from(s: AttackStatus) -> Self {
        match s {
            AttackStatus::Dodge => RowStatus::Dodge,
            AttackStatus::Impersonation => RowStatus::Impersonation,
            AttackStatus::Failed => RowStatus::Failed,
        }
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowStatus::Dodge => "dodge",
            RowStatus::Impersonation => "impersonation",
            RowStatus::Failed => "failed",
            RowStatus::Error => "error",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub item: String,
    pub label: String,
    pub status: RowStatus,
    pub queries_used: u32,
    pub success_function: Option<WarpFunction>,
    pub success_scale: Option<f64>,
    pub final_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Successful attacks per warping function and outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateCount {
    pub function: WarpFunction,
    pub status: RowStatus,
    pub count: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config: AttackConfig,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<AggregateCount>,
    pub total_queries: u64,
}

impl CampaignReport {
    pub fn from_rows(config: AttackConfig, rows: Vec<ReportRow>) -> Self {
        let mut counts: BTreeMap<(WarpFunction, RowStatus), u32> = BTreeMap::new();
        for row in &rows {
            if let (Some(f), RowStatus::Dodge | RowStatus::Impersonation) = (row.success_function, row.status) {
                *counts.entry((f, row.status)).or_default() += 1;
            }
        }
        let aggregates = counts
            .into_iter()
            .map(|((function, status), count)| AggregateCount {
                function,
                status,
                count,
            })
            .collect();
        let total_queries = rows.iter().map(|r| r.queries_used as u64).sum();
        Self {
            config,
            rows,
            aggregates,
            total_queries,
        }
    }

    pub fn count(&self, status: RowStatus) -> usize {
        self.rows.iter().filter(|r| r.status == status).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| HarnessError::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            let opt = |v: Option<String>| v.unwrap_or_default();
            w.write_record([
                r.label.clone(),
                r.status.to_string(),
                r.queries_used.to_string(),
                opt(r.success_function.map(|f| f.to_string())),
                opt(r.success_scale.map(|s| s.to_string())),
                opt(r.final_delta.map(|d| d.to_string())),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(HarnessError::Config(format!("unknown report format {s:?}"))),
        }
    }
}

pub fn write_report(report: &CampaignReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Csv => report.to_csv()?,
        ReportFormat::Json => report.to_json(),
    };
    std::fs::write(path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<CampaignReport, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

/// Oracle constructor called once per corpus item.
pub type OracleFactory<'a> = dyn Fn() -> Result<Box<dyn Oracle + Send>, OracleError> + Sync + 'a;

fn error_row(item: &CorpusItem, queries_used: u32, err: impl fmt::Display) -> ReportRow {
    ReportRow {
        item: item.stem.clone(),
        label: item.label.clone(),
        status: RowStatus::Error,
        queries_used,
        success_function: None,
        success_scale: None,
        final_delta: None,
        error: Some(err.to_string()),
    }
}

fn attack_item(item: &CorpusItem, factory: &OracleFactory<'_>, config: &AttackConfig) -> ReportRow {
    let image = match Image::read_png(&item.image) {
        Ok(i) => i,
        Err(e) => return error_row(item, 0, e),
    };
    let landmarks = match LandmarkSet::read_sidecar(&item.landmarks) {
        Ok(l) => l,
        Err(e) => return error_row(item, 0, e),
    };
    let mut oracle = match factory() {
        Ok(o) => o,
        Err(e) => return error_row(item, 0, e),
    };
    match raf_attack(&image, &landmarks, &item.label, &mut oracle, config) {
        Ok(outcome) => {
            let success = outcome.success_spec();
            ReportRow {
                item: item.stem.clone(),
                label: item.label.clone(),
                status: outcome.status.into(),
                queries_used: outcome.queries_used,
                success_function: success.map(|s| s.function),
                success_scale: success.map(|s| s.scale),
                final_delta: Some(outcome.final_delta),
                error: None,
            }
        }
        Err(AttackError::Interrupted { queries_used, reason }) => error_row(item, queries_used, reason),
        Err(e) => error_row(item, 0, e),
    }
}

/// Attacks every corpus item with its own fresh query ledger. Rows come back
/// in corpus order whatever the worker count.
pub fn run_campaign(
    corpus: &Corpus,
    factory: &OracleFactory<'_>,
    config: &AttackConfig,
    parallelism: usize,
) -> Result<CampaignReport, HarnessError> {
    if parallelism == 0 {
        return Err(HarnessError::Config("parallelism must be at least 1".into()));
    }
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let rows: Vec<ReportRow> = pool.install(|| {
        corpus
            .items
            .par_iter()
            .map(|item| attack_item(item, factory, config))
            .collect()
    });
    Ok(CampaignReport::from_rows(config.clone(), rows))
}
