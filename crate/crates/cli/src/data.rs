//! CSV ingestion and the bundled synthetic price series.

use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use htm_core::stable::{LinearConfig, LinearSimulator};
use htm_core::{rng, Kernel, StableParams};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Transform {
    None,
    /// `r_i = ln(p_{i+1} / p_i)`.
    LogReturn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub id: String,
    /// One date per value when the file has a `date` column.
    pub dates: Option<Vec<NaiveDate>>,
    pub values: Vec<f64>,
    pub transform: Transform,
    /// Data rows read from the file.
    pub rows: usize,
}

const DATE_COLUMNS: [&str; 3] = ["date", "timestamp", "time"];

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

/// Reads `column` of a headed CSV file. A column named `date`, `timestamp`
/// or `time` is parsed as ISO-8601 dates and must be strictly increasing.
/// Row numbers in errors count data rows from 1.
pub fn ingest_csv(path: &Path, column: &str, transform: Transform) -> Result<Dataset, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    ingest_str(&text, &path.display().to_string(), column, transform)
}

pub fn ingest_str(text: &str, id: &str, column: &str, transform: Transform) -> Result<Dataset, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| data_err(format!("{id}: {e}")))?.clone();
    let col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| data_err(format!("{id}: no column '{column}' (have: {})", headers.iter().collect::<Vec<_>>().join(", "))))?;
    let date_col = headers
        .iter()
        .position(|h| DATE_COLUMNS.contains(&h.to_ascii_lowercase().as_str()));

    let mut values = Vec::new();
    let mut dates = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| data_err(format!("{id}: row {row}: {e}")))?;
        let raw = rec.get(col).unwrap_or("");
        let v: f64 = raw
            .parse()
            .map_err(|_| data_err(format!("{id}: row {row}: '{raw}' in column '{column}' is not a number")))?;
        if !v.is_finite() {
            return Err(data_err(format!("{id}: row {row}: value is not finite")));
        }
        if transform == Transform::LogReturn && v <= 0.0 {
            return Err(data_err(format!("{id}: row {row}: price {v} must be positive for log returns")));
        }
        if let Some(dc) = date_col {
            let s = rec.get(dc).unwrap_or("");
            let d = NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .map_err(|_| data_err(format!("{id}: row {row}: '{s}' is not an ISO-8601 date")))?;
            if let Some(prev) = dates.last() {
                if d <= *prev {
                    return Err(data_err(format!("{id}: row {row}: date {d} does not increase")));
                }
            }
            dates.push(d);
        }
        values.push(v);
    }
    let rows = values.len();
    if rows == 0 {
        return Err(data_err(format!("{id}: no data rows")));
    }
    let (values, dates) = match transform {
        Transform::None => (values, dates),
        Transform::LogReturn => (
            values.windows(2).map(|w| (w[1] / w[0]).ln()).collect(),
            dates.into_iter().skip(1).collect(),
        ),
    };
    Ok(Dataset {
        id: id.to_string(),
        dates: date_col.map(|_| dates),
        values,
        transform,
        rows,
    })
}

/// Parameters of the bundled synthetic series.
pub const SYNTHETIC_ALPHA: f64 = 1.56;
pub const SYNTHETIC_DELTA: f64 = 1.0474;
pub const SYNTHETIC_C: f64 = 0.0019;
pub const SYNTHETIC_PRICES: usize = 1131;
pub const SYNTHETIC_SEED: u64 = 20130304;
pub const SYNTHETIC_ID: &str = "synthetic_open_prices (simulated, not market data)";

/// The bundled file, `data/synthetic_open_prices.csv`.
pub const SYNTHETIC_CSV: &str = include_str!("../data/synthetic_open_prices.csv");

/// Regenerates the bundled file: log returns of the causal series moving
/// average at the parameters above, accumulated from a price of 25 on
/// business days from 2013-03-04, printed with six decimals.
pub fn synthetic_prices_csv() -> String {
    let kernel = Kernel::causal_series(SYNTHETIC_C, SYNTHETIC_DELTA).expect("valid kernel");
    let params = StableParams::new(SYNTHETIC_ALPHA, 1.0).expect("valid params");
    let sim = LinearSimulator::new(&kernel, params, SYNTHETIC_PRICES - 1, &LinearConfig::default()).expect("simulator");
    let returns = sim.simulate(&mut rng::stream(SYNTHETIC_SEED, 0));

    let mut out = String::from("date,open\n");
    let mut date = NaiveDate::from_ymd_opt(2013, 3, 4).expect("valid date");
    let mut log_price = 25f64.ln();
    for i in 0..SYNTHETIC_PRICES {
        if i > 0 {
            log_price += returns[i - 1];
            date = next_business_day(date);
        }
        out.push_str(&format!("{date},{:.6}\n", log_price.exp()));
    }
    out
}

fn next_business_day(d: NaiveDate) -> NaiveDate {
    let mut n = d.succ_opt().expect("date in range");
    while matches!(n.weekday(), Weekday::Sat | Weekday::Sun) {
        n = n.succ_opt().expect("date in range");
    }
    n
}

/// Log returns of the bundled series.
pub fn synthetic_dataset() -> Result<Dataset, CliError> {
    ingest_str(SYNTHETIC_CSV, SYNTHETIC_ID, "open", Transform::LogReturn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_log_returns() {
        let e = std::f64::consts::E;
        let text = format!("date,open\n2020-01-01,1\n2020-01-02,{e}\n2020-01-03,{}\n", e * e);
        let d = ingest_str(&text, "t", "open", Transform::LogReturn).unwrap();
        assert_eq!(d.values.len(), 2);
        assert!((d.values[0] - 1.0).abs() < 1e-15 && (d.values[1] - 1.0).abs() < 1e-15);
        assert_eq!(d.rows, 3);
    }

    #[test]
    fn identity_is_bit_exact() {
        let text = "x,y\n1,0.1\n2,-3.25e-7\n3,17\n";
        let d = ingest_str(text, "t", "y", Transform::None).unwrap();
        assert_eq!(d.values, vec![0.1, -3.25e-7, 17.0]);
        assert!(d.dates.is_none());
    }

    #[test]
    fn failures_name_the_row() {
        let e = ingest_str("open\n1\nx\n", "t", "open", Transform::None).unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
        let e = ingest_str("open\n1\n-2\n", "t", "open", Transform::LogReturn).unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
        let e = ingest_str("date,open\n2020-01-02,1\n2020-01-01,2\n", "t", "open", Transform::None).unwrap_err();
        assert!(e.to_string().contains("does not increase"), "{e}");
        assert!(ingest_str("a\n1\n", "t", "open", Transform::None).is_err());
    }

    #[test]
    fn bundled_series_is_reproducible() {
        assert_eq!(synthetic_prices_csv(), SYNTHETIC_CSV);
        let d = synthetic_dataset().unwrap();
        assert_eq!(d.rows, SYNTHETIC_PRICES);
        assert_eq!(d.values.len(), SYNTHETIC_PRICES - 1);
    }
}
