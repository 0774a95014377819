//! Funding-history CSV files and basis analytics.
//!
//! Schema: `timestamp,spot,futures_price,funding_rate,kind` with RFC 3339
//! timestamps, `.` decimals and a mandatory header. Rows must have strictly
//! increasing timestamps and positive prices.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::continuous::{ct_price, CtPriceInputs};
use crate::discrete::{dt_funding_cashflow, dt_price, DtPriceInputs, FuturesKind};
use crate::error::PricingError;
use crate::model::{ContractKind, ContractSpec, FundingSpec, GbmModel, RateEnvironment, TimeMode};

pub const HEADER: [&str; 5] = ["timestamp", "spot", "futures_price", "funding_rate", "kind"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FundingHistoryRow {
    pub timestamp: DateTime<Utc>,
    pub spot: f64,
    pub futures_price: f64,
    /// Realized funding rate for the period ending at `timestamp`.
    pub funding_rate: f64,
    pub kind: ContractKind,
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("line {line}, column `{column}`: cannot parse `{value}`: {reason}")]
    Parse {
        line: u64,
        column: &'static str,
        value: String,
        reason: String,
    },
    #[error("line {line}, column `{column}`: {value} must be positive")]
    NonPositive {
        line: u64,
        column: &'static str,
        value: f64,
    },
    #[error("line {line}: timestamp {current} does not come after {previous}")]
    NonIncreasing {
        line: u64,
        previous: String,
        current: String,
    },
    #[error("header must be `{}`, found `{found}`", HEADER.join(","))]
    BadHeader { found: String },
    #[error("no data rows")]
    Empty,
    #[error("line {line}: row kind `{found}` does not match contract kind `{expected}`")]
    KindMismatch {
        line: u64,
        expected: ContractKind,
        found: ContractKind,
    },
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

impl HistoryError {
    /// True for failures of the input file itself rather than of the
    /// contract it is checked against.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, HistoryError::KindMismatch { .. } | HistoryError::Pricing(_))
    }
}

pub type HistoryResult<T> = std::result::Result<T, HistoryError>;

pub fn ingest_funding_history(path: impl AsRef<Path>) -> HistoryResult<Vec<FundingHistoryRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| HistoryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_funding_history(file)
}

pub fn read_funding_history(reader: impl Read) -> HistoryResult<Vec<FundingHistoryRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let csv_err = |e: csv::Error| HistoryError::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().map(str::trim).ne(HEADER.iter().copied()) {
        return Err(HistoryError::BadHeader {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut rows: Vec<FundingHistoryRow> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let parse_err = |column: &'static str, value: &str, reason: String| HistoryError::Parse {
            line,
            column,
            value: value.to_string(),
            reason,
        };
        let number = |i: usize| -> HistoryResult<f64> {
            let raw = field(i);
            raw.parse::<f64>()
                .map_err(|e| parse_err(HEADER[i], raw, e.to_string()))
        };
        let price = |i: usize| -> HistoryResult<f64> {
            let v = number(i)?;
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(HistoryError::NonPositive {
                    line,
                    column: HEADER[i],
                    value: v,
                })
            }
        };

        let timestamp = DateTime::parse_from_rfc3339(field(0))
            .map_err(|e| parse_err(HEADER[0], field(0), e.to_string()))?
            .with_timezone(&Utc);
        let spot = price(1)?;
        let futures_price = price(2)?;
        let funding_rate = number(3)?;
        if !funding_rate.is_finite() {
            return Err(parse_err(HEADER[3], field(3), "must be finite".into()));
        }
        let kind = field(4)
            .parse::<ContractKind>()
            .map_err(|e| parse_err(HEADER[4], field(4), e))?;

        if let Some(prev) = rows.last() {
            if timestamp <= prev.timestamp {
                return Err(HistoryError::NonIncreasing {
                    line,
                    previous: format_timestamp(&prev.timestamp),
                    current: format_timestamp(&timestamp),
                });
            }
        }
        rows.push(FundingHistoryRow {
            timestamp,
            spot,
            futures_price,
            funding_rate,
            kind,
        });
    }
    if rows.is_empty() {
        return Err(HistoryError::Empty);
    }
    Ok(rows)
}

fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Writes rows in the ingestion format. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_funding_history(rows: &[FundingHistoryRow], writer: impl Write) -> HistoryResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| HistoryError::Csv {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            format_timestamp(&r.timestamp),
            r.spot.to_string(),
            r.futures_price.to_string(),
            r.funding_rate.to_string(),
            r.kind.tag().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|source| HistoryError::Io {
        path: "<writer>".into(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisReport {
    /// `futures / spot - 1` per row.
    pub realized: Vec<f64>,
    /// `f(x) / x - 1` from the closed form of the contract.
    pub theoretical: Vec<f64>,
    pub deviation: Vec<f64>,
    pub mean_deviation: f64,
    pub max_abs_deviation: f64,
}

fn futures_kind(kind: ContractKind) -> HistoryResult<FuturesKind> {
    match kind {
        ContractKind::Linear => Ok(FuturesKind::Linear),
        ContractKind::Inverse => Ok(FuturesKind::Inverse),
        _ => Err(PricingError::UnsupportedRepresentation(
            "basis analytics cover linear and inverse contracts",
        )
        .into()),
    }
}

/// Closed-form futures price of a linear or inverse contract at `spot`.
pub fn theoretical_price(
    env: &RateEnvironment,
    funding: &FundingSpec,
    kind: FuturesKind,
    spot: f64,
) -> Result<f64, PricingError> {
    match env.mode() {
        TimeMode::DiscreteTime => {
            Ok(dt_price(kind, &DtPriceInputs::new(*env, *funding, spot)?)?.value)
        }
        TimeMode::ContinuousTime => {
            // linear and inverse prices do not depend on volatility
            let model = GbmModel::scalar(spot, 0.0)?;
            Ok(ct_price(kind, &CtPriceInputs::new(*env, *funding, model)?)?.value)
        }
    }
}

fn check_kinds(rows: &[FundingHistoryRow], expected: ContractKind) -> HistoryResult<()> {
    if rows.is_empty() {
        return Err(HistoryError::Empty);
    }
    for (i, r) in rows.iter().enumerate() {
        if r.kind != expected {
            return Err(HistoryError::KindMismatch {
                line: i as u64 + 2,
                expected,
                found: r.kind,
            });
        }
    }
    Ok(())
}

/// Realized against theoretical basis for every row. Row line numbers in
/// errors assume the rows came from a file with a header.
pub fn basis_report(
    rows: &[FundingHistoryRow],
    env: &RateEnvironment,
    contract: &ContractSpec,
) -> HistoryResult<BasisReport> {
    check_kinds(rows, contract.kind())?;
    let kind = futures_kind(contract.kind())?;
    let mut realized = Vec::with_capacity(rows.len());
    let mut theoretical = Vec::with_capacity(rows.len());
    for r in rows {
        realized.push(r.futures_price / r.spot - 1.0);
        let f = theoretical_price(env, contract.funding(), kind, r.spot)?;
        theoretical.push(f / r.spot - 1.0);
    }
    let deviation: Vec<f64> = realized.iter().zip(&theoretical).map(|(a, b)| a - b).collect();
    let mean_deviation = deviation.iter().sum::<f64>() / deviation.len() as f64;
    let max_abs_deviation = deviation.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(BasisReport {
        realized,
        theoretical,
        deviation,
        mean_deviation,
        max_abs_deviation,
    })
}

/// Funding cash flow to a long position at the end of each period, computed
/// from the futures and spot prices at its start. The last row opens no
/// period.
pub fn funding_schedule(
    rows: &[FundingHistoryRow],
    contract: &ContractSpec,
) -> HistoryResult<Vec<f64>> {
    check_kinds(rows, contract.kind())?;
    let kind = futures_kind(contract.kind())?;
    let n = rows.len().saturating_sub(1);
    rows[..n]
        .iter()
        .map(|r| Ok(dt_funding_cashflow(kind, r.futures_price, r.spot, contract.funding())?))
        .collect()
}
