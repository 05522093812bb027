//! Error statistics between module prices and reference prices.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("empty sample")]
    EmptySample,
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub asset: String,
    pub timestamp: i64,
    pub predicted: f64,
    pub reference: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorStats {
    pub n: usize,
    pub mse: f64,
    pub mean_err: f64,
    /// Sample SD (n − 1); absent for a single point.
    pub sd: Option<f64>,
    /// Mean absolute percentage error over points with reference > 0.
    pub mape_pct: Option<f64>,
    pub n_pct: usize,
}

/// Stats over one flat list of points. Pooling is this same function over
/// the concatenation of all assets.
pub fn error_stats(points: &[SamplePoint]) -> Result<ErrorStats, BenchError> {
    let n = points.len();
    if n == 0 {
        return Err(BenchError::EmptySample);
    }
    let errs: Vec<f64> = points.iter().map(|p| p.predicted - p.reference).collect();
    let mse = errs.iter().map(|e| e * e).sum::<f64>() / n as f64;
    let mean_err = errs.iter().sum::<f64>() / n as f64;
    let sd = (n > 1).then(|| (errs.iter().map(|e| (e - mean_err).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    let pct: Vec<f64> = points
        .iter()
        .filter(|p| p.reference > 0.0)
        .map(|p| ((p.predicted - p.reference) / p.reference).abs())
        .collect();
    let n_pct = pct.len();
    let mape_pct = (n_pct > 0).then(|| 100.0 * pct.iter().sum::<f64>() / n_pct as f64);
    Ok(ErrorStats {
        n,
        mse,
        mean_err,
        sd,
        mape_pct,
        n_pct,
    })
}

pub fn per_asset_stats(points: &[SamplePoint]) -> Result<BTreeMap<String, ErrorStats>, BenchError> {
    let mut groups: BTreeMap<&str, Vec<SamplePoint>> = BTreeMap::new();
    for p in points {
        groups.entry(&p.asset).or_default().push(p.clone());
    }
    groups
        .into_iter()
        .map(|(a, pts)| error_stats(&pts).map(|s| (a.to_string(), s)))
        .collect()
}

pub fn pooled_stats(points: &[SamplePoint]) -> Result<ErrorStats, BenchError> {
    error_stats(points)
}

/// CSV `asset,timestamp,predicted,reference`.
pub fn read_samples(reader: impl Read) -> Result<Vec<SamplePoint>, BenchError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| BenchError::Csv(format!("row {}: {e}", i + 1))))
        .collect()
}

/// Fixed-width table, one row per asset plus the pooled row.
pub fn render_table(points: &[SamplePoint]) -> Result<String, BenchError> {
    let per = per_asset_stats(points)?;
    let all = pooled_stats(points)?;
    let mut out = String::new();
    let _ = writeln!(out, "{:<46} {:>6} {:>14} {:>12} {:>9}", "asset", "n", "MSE", "SD", "MAPE%");
    let fmt_opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into());
    let mut row = |name: &str, s: &ErrorStats| {
        let _ = writeln!(
            out,
            "{:<46} {:>6} {:>14.6e} {:>12} {:>9}",
            name,
            s.n,
            s.mse,
            fmt_opt(s.sd, 3),
            fmt_opt(s.mape_pct, 2)
        );
    };
    for (a, s) in &per {
        row(a, s);
    }
    row("ALL", &all);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(asset: &str, predicted: f64, reference: f64) -> SamplePoint {
        SamplePoint {
            asset: asset.into(),
            timestamp: 0,
            predicted,
            reference,
        }
    }

    #[test]
    fn exact_predictions() {
        let s = error_stats(&[sp("a", 5.0, 5.0), sp("a", 2.0, 2.0)]).unwrap();
        assert_eq!((s.mse, s.sd, s.mape_pct), (0.0, Some(0.0), Some(0.0)));
    }

    #[test]
    fn hand_computed() {
        let s = error_stats(&[sp("a", 101.0, 100.0), sp("a", 99.0, 100.0)]).unwrap();
        assert_eq!(s.mse, 1.0);
        assert_eq!(s.mean_err, 0.0);
        assert!((s.sd.unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!((s.mape_pct.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_and_empty() {
        let s = error_stats(&[sp("a", 3.0, 1.0)]).unwrap();
        assert_eq!((s.mse, s.sd), (4.0, None));
        assert_eq!(error_stats(&[]), Err(BenchError::EmptySample));
    }

    #[test]
    fn nonpositive_reference_only_skips_mape() {
        let s = error_stats(&[sp("a", 1.0, 0.0), sp("a", 2.0, 2.0)]).unwrap();
        assert_eq!((s.n, s.n_pct, s.mse), (2, 1, 0.5));
        assert_eq!(s.mape_pct, Some(0.0));
    }

    #[test]
    fn csv_and_table() {
        let csv = "asset,timestamp,predicted,reference\nA,1,101,100\nA,2,99,100\nB,1,1,1\n";
        let pts = read_samples(csv.as_bytes()).unwrap();
        assert_eq!(pts.len(), 3);
        let t = render_table(&pts).unwrap();
        assert_eq!(t.lines().count(), 4);
        assert!(t.lines().last().unwrap().starts_with("ALL"));
        assert!(read_samples("asset,timestamp,predicted,reference\nA,x,1,1\n".as_bytes()).is_err());
    }
}
