//! Data behind the futures-to-spot ratio curves and the everlasting call
//! comparison.

use std::io::Write;
use std::str::FromStr;

use crate::discrete::{dt_price, DtPriceInputs, FuturesKind};
use crate::error::{PricingError, Result};
use crate::everlasting::{
    everlasting_call, everlasting_call_delta, european_call, european_call_delta,
    BsEverlastingInputs,
};
use crate::model::{FundingSpec, RateEnvironment, EIGHT_HOURS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    /// Linear `f/x` against `kappa`.
    FuturesRatio,
    /// Inverse `f_I/x` against `kappa`.
    InverseRatio,
    /// Everlasting against European call, prices and deltas.
    EverlastingCall,
}

impl FromStr for FigureId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fig2" => Ok(FigureId::FuturesRatio),
            "fig-inverse" => Ok(FigureId::InverseRatio),
            "fig3" => Ok(FigureId::EverlastingCall),
            other => Err(format!(
                "unknown figure `{other}` (expected fig2, fig-inverse or fig3)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FigureData {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv(&self, writer: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Annual `(r_a, r_b)` pairs of the ratio curves, from highest to lowest
/// spread. Multiply by [`EIGHT_HOURS`] for per-period rates.
pub const RATE_CONFIGS: [(f64, f64); 5] = [(0.10, 0.0), (0.05, 0.0), (0.0, 0.0), (0.0, 0.05), (0.0, 0.10)];

pub const KAPPA_RANGE: (f64, f64) = (0.2, 1.0);

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(PricingError::invalid("points", n as f64, "need at least two"));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect())
}

fn ratio_column(r_a: f64, r_b: f64) -> String {
    format!("ra_{r_a:.2}_rb_{r_b:.2}")
}

/// `f/x` with `iota = 0` over an evenly spaced `kappa` grid, one column per
/// rate configuration.
pub fn futures_ratio_curves(kind: FuturesKind, points: usize) -> Result<FigureData> {
    let grid = linspace(KAPPA_RANGE.0, KAPPA_RANGE.1, points)?;
    let mut columns = vec!["kappa".to_string()];
    columns.extend(RATE_CONFIGS.iter().map(|&(a, b)| ratio_column(a, b)));
    let envs = RATE_CONFIGS
        .iter()
        .map(|&(a, b)| RateEnvironment::discrete(a * EIGHT_HOURS, b * EIGHT_HOURS))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(points);
    for kappa in grid {
        let funding = FundingSpec::new(kappa, 0.0)?;
        let mut row = vec![kappa];
        for env in &envs {
            row.push(dt_price(kind, &DtPriceInputs::new(*env, funding, 1.0)?)?.value);
        }
        rows.push(row);
    }
    Ok(FigureData { columns, rows })
}

/// Everlasting call with `kappa = 1`, strike 1, unit volatility and zero
/// rates, next to the European call maturing at `1 / kappa`, on `[0, 2]`.
pub fn everlasting_call_curves(points: usize) -> Result<FigureData> {
    let (kappa, strike, sigma) = (1.0, 1.0, 1.0);
    let env = RateEnvironment::continuous(0.0, 0.0)?;
    let columns = [
        "spot",
        "everlasting_call",
        "european_call",
        "everlasting_delta",
        "european_delta",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::with_capacity(points);
    for x in linspace(0.0, 2.0, points)? {
        let inputs = BsEverlastingInputs::new(env, kappa, strike, sigma, x)?;
        let t = 1.0 / kappa;
        rows.push(vec![
            x,
            everlasting_call(&inputs)?,
            european_call(x, strike, 0.0, 0.0, sigma, t),
            everlasting_call_delta(&inputs)?,
            european_call_delta(x, strike, 0.0, 0.0, sigma, t),
        ]);
    }
    Ok(FigureData { columns, rows })
}

pub fn figure(id: FigureId, points: usize) -> Result<FigureData> {
    match id {
        FigureId::FuturesRatio => futures_ratio_curves(FuturesKind::Linear, points),
        FigureId::InverseRatio => futures_ratio_curves(FuturesKind::Inverse, points),
        FigureId::EverlastingCall => everlasting_call_curves(points),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_curves_flat_without_spread() {
        let fig = futures_ratio_curves(FuturesKind::Linear, 5).unwrap();
        assert_eq!(fig.columns.len(), 6);
        let kappa = fig.column("kappa").unwrap();
        assert_eq!((kappa[0], kappa[4]), (0.2, 1.0));
        assert!(fig.column("ra_0.00_rb_0.00").unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn everlasting_endpoints() {
        let fig = everlasting_call_curves(21).unwrap();
        let c = fig.column("everlasting_call").unwrap();
        assert_eq!(c[0], 0.0);
        assert!((c[20] - 7.0 / 6.0).abs() < 1e-14);
        assert!((c[10] - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(fig.column("european_delta").unwrap()[0], 0.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let fig = figure("fig-inverse".parse().unwrap(), 3).unwrap();
        let mut buf = Vec::new();
        fig.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("kappa,ra_0.10_rb_0.00,"));
        assert!("fig9".parse::<FigureId>().is_err());
    }
}
