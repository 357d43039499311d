//! From daily closing prices to unit-Fréchet block-maxima pairs.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_sig, write_atomic};
use crate::models::FrechetPair;

pub const WEEK_RULE: &str = "iso-8601 week of the later price's date";
pub const TIE_RULE: &str = "average ranks";

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub label: String,
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
}

impl PriceSeries {
    pub fn new(label: impl Into<String>, dates: Vec<NaiveDate>, closes: Vec<f64>) -> Result<Self> {
        if dates.len() != closes.len() {
            return Err(Error::Data("dates and closes differ in length".into()));
        }
        for (i, w) in dates.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::Data(format!("dates not strictly increasing at row {}", i + 1)));
            }
        }
        if let Some((i, p)) = closes.iter().enumerate().find(|(_, p)| !(**p > 0.0) || !p.is_finite()) {
            return Err(Error::Data(format!("non-positive price {p} at row {i}")));
        }
        Ok(Self {
            label: label.into(),
            dates,
            closes,
        })
    }

    /// Reads a CSV with at least `Date` (YYYY-MM-DD) and `Close` columns.
    /// Rows with a missing close, or a `Volume` of zero, are dropped and
    /// counted in the log.
    pub fn read_csv(path: &Path, label: impl Into<String>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
        let header = r.headers()?.clone();
        let col = |name: &str| header.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
        let date_col = col("Date").ok_or_else(|| Error::Data(format!("{}: no Date column", path.display())))?;
        let close_col = col("Close").ok_or_else(|| Error::Data(format!("{}: no Close column", path.display())))?;
        let volume_col = col("Volume");
        let (mut dates, mut closes) = (Vec::new(), Vec::new());
        let mut dropped = 0usize;
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
            let close_s = field(close_col);
            let volume_zero = volume_col.is_some_and(|c| field(c).parse::<f64>().is_ok_and(|v| v == 0.0));
            if is_missing(close_s) || volume_zero {
                dropped += 1;
                continue;
            }
            let date = NaiveDate::parse_from_str(field(date_col), "%Y-%m-%d")
                .map_err(|e| Error::Data(format!("{}: row {}: bad date: {e}", path.display(), row + 1)))?;
            let close: f64 = close_s
                .parse()
                .map_err(|e| Error::Data(format!("{}: row {}: bad close: {e}", path.display(), row + 1)))?;
            if !(close > 0.0) || !close.is_finite() {
                return Err(Error::Data(format!(
                    "{}: row {}: non-positive price {close}",
                    path.display(),
                    row + 1
                )));
            }
            dates.push(date);
            closes.push(close);
        }
        if dropped > 0 {
            log::info!("{}: dropped {dropped} rows with missing close or zero volume", path.display());
        }
        Self::new(label, dates, closes)
    }

    /// Negative log returns dated by the later of the two prices.
    pub fn dated_losses(&self) -> Result<Vec<(NaiveDate, f64)>> {
        let r = negative_log_returns(&self.closes)?;
        Ok(self.dates[1..].iter().copied().zip(r).collect())
    }
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("null") || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na")
}

/// `r_t = -(ln p_t - ln p_{t-1})`.
pub fn negative_log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if let Some((i, p)) = prices.iter().enumerate().find(|(_, p)| !(**p > 0.0)) {
        return Err(Error::Data(format!("non-positive price {p} at row {i}")));
    }
    Ok(prices.windows(2).map(|w| -(w[1] / w[0]).ln()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMaximaSeries {
    pub label: String,
    pub block_ids: Vec<String>,
    pub maxima: Vec<f64>,
    pub block_rule: String,
}

fn iso_week(d: NaiveDate) -> (i32, u32) {
    let w = d.iso_week();
    (w.year(), w.week())
}

/// Weekly maxima of both series over the ISO weeks present in both.
pub fn componentwise_block_maxima(
    a: &[(NaiveDate, f64)],
    b: &[(NaiveDate, f64)],
    labels: (&str, &str),
) -> Result<(BlockMaximaSeries, BlockMaximaSeries)> {
    let weekly = |s: &[(NaiveDate, f64)]| {
        let mut m: BTreeMap<(i32, u32), f64> = BTreeMap::new();
        for (d, v) in s {
            let e = m.entry(iso_week(*d)).or_insert(f64::NEG_INFINITY);
            *e = e.max(*v);
        }
        m
    };
    let (wa, wb) = (weekly(a), weekly(b));
    let only_a = wa.keys().filter(|k| !wb.contains_key(k)).count();
    let only_b = wb.keys().filter(|k| !wa.contains_key(k)).count();
    if only_a + only_b > 0 {
        log::info!("dropped {only_a} weeks only in {} and {only_b} only in {}", labels.0, labels.1);
    }
    let common: Vec<(i32, u32)> = wa.keys().filter(|k| wb.contains_key(k)).copied().collect();
    if common.is_empty() {
        return Err(Error::Data("the two series share no week".into()));
    }
    let ids: Vec<String> = common.iter().map(|(y, w)| format!("{y}-W{w:02}")).collect();
    let mk = |label: &str, m: &BTreeMap<(i32, u32), f64>| BlockMaximaSeries {
        label: label.to_string(),
        block_ids: ids.clone(),
        maxima: common.iter().map(|k| m[k]).collect(),
        block_rule: WEEK_RULE.to_string(),
    };
    Ok((mk(labels.0, &wa), mk(labels.1, &wb)))
}

/// Average ranks (1-based) of `v`.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    ranks
}

/// `-1 / ln(rank / (m + 1))` with average ranks.
pub fn empirical_frechet_transform(values: &[f64]) -> Result<Vec<f64>> {
    let m = values.len();
    if m < 2 {
        return Err(Error::Data(format!("need at least 2 values for the empirical transform, got {m}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value in empirical transform".into()));
    }
    let denom = (m + 1) as f64;
    Ok(average_ranks(values).into_iter().map(|r| -1.0 / (r / denom).ln()).collect())
}

/// Kolmogorov–Smirnov distance of `exp(-1/z)` from the uniform law.
pub fn frechet_ks_distance(z: &[f64]) -> f64 {
    let mut u: Vec<f64> = z.iter().map(|v| (-1.0 / v).exp()).collect();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, v)| ((i as f64 + 1.0) / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max)
}

/// The empirical distribution of one margin, for mapping new values to the
/// Fréchet scale and back. Between observed values the CDF is interpolated
/// linearly; outside it is held flat and the result is flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMargin {
    /// Distinct observed values, increasing.
    pub values: Vec<f64>,
    /// `F̂` at each distinct value, `average rank / (m + 1)`.
    pub probs: Vec<f64>,
    pub m: usize,
}

/// A mapped value and whether it fell outside the observed range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mapped {
    pub value: f64,
    pub extrapolated: bool,
}

impl EmpiricalMargin {
    pub fn new(raw: &[f64]) -> Result<Self> {
        let m = raw.len();
        if m < 2 {
            return Err(Error::Data("an empirical margin needs at least 2 values".into()));
        }
        let ranks = average_ranks(raw);
        let mut pairs: Vec<(f64, f64)> = raw.iter().copied().zip(ranks).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.dedup_by(|a, b| a.0 == b.0);
        let denom = (m + 1) as f64;
        Ok(Self {
            values: pairs.iter().map(|p| p.0).collect(),
            probs: pairs.iter().map(|p| p.1 / denom).collect(),
            m,
        })
    }

    /// Original scale to unit Fréchet.
    pub fn to_frechet(&self, v: f64) -> Mapped {
        let (p, extrapolated) = interpolate(&self.values, &self.probs, v);
        if extrapolated {
            log::warn!("value {v} outside the observed range; empirical CDF held at {p}");
        }
        Mapped {
            value: -1.0 / p.ln(),
            extrapolated,
        }
    }

    /// Unit Fréchet back to the original scale.
    pub fn from_frechet(&self, z: f64) -> Mapped {
        let p = (-1.0 / z).exp();
        let (v, extrapolated) = interpolate(&self.probs, &self.values, p);
        if extrapolated {
            log::warn!("Fréchet value {z} beyond the observed range; held at {v}");
        }
        Mapped { value: v, extrapolated }
    }
}

// Piecewise-linear interpolation of (xs, ys) at t, flat outside; xs increasing.
fn interpolate(xs: &[f64], ys: &[f64], t: f64) -> (f64, bool) {
    let n = xs.len();
    if t < xs[0] {
        return (ys[0], true);
    }
    if t > xs[n - 1] {
        return (ys[n - 1], true);
    }
    let i = xs.partition_point(|v| *v <= t);
    if i == 0 {
        return (ys[0], false);
    }
    if i >= n {
        return (ys[n - 1], false);
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let f = (t - x0) / (x1 - x0);
    (ys[i - 1] + f * (ys[i] - ys[i - 1]), false)
}

/// Everything needed to map between original and Fréchet margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSidecar {
    pub m: usize,
    pub week_rule: String,
    pub tie_rule: String,
    pub x_label: String,
    pub y_label: String,
    pub block_ids: Vec<String>,
    pub x_raw: Vec<f64>,
    pub y_raw: Vec<f64>,
}

impl TransformSidecar {
    pub fn x_margin(&self) -> Result<EmpiricalMargin> {
        EmpiricalMargin::new(&self.x_raw)
    }

    pub fn y_margin(&self) -> Result<EmpiricalMargin> {
        EmpiricalMargin::new(&self.y_raw)
    }
}

/// Losses of `x_series` (covariate) and `y_series` (response), weekly
/// maxima, then the empirical Fréchet transform of each margin.
pub fn transform_prices(x_series: &PriceSeries, y_series: &PriceSeries) -> Result<(Vec<FrechetPair>, TransformSidecar)> {
    let (bx, by) = componentwise_block_maxima(
        &x_series.dated_losses()?,
        &y_series.dated_losses()?,
        (&x_series.label, &y_series.label),
    )?;
    let zx = empirical_frechet_transform(&bx.maxima)?;
    let zy = empirical_frechet_transform(&by.maxima)?;
    let m = zx.len();
    let bound = 1.36 / (m as f64).sqrt();
    for (label, z) in [(&bx.label, &zx), (&by.label, &zy)] {
        let d = frechet_ks_distance(z);
        if d > bound {
            log::warn!("{label}: Fréchet pseudo-observations fail the KS self-check ({d} > {bound})");
        }
    }
    let pairs = zx.iter().zip(&zy).map(|(x, y)| FrechetPair { x: *x, y: *y }).collect();
    let sidecar = TransformSidecar {
        m,
        week_rule: WEEK_RULE.into(),
        tie_rule: TIE_RULE.into(),
        x_label: bx.label,
        y_label: by.label,
        block_ids: bx.block_ids,
        x_raw: bx.maxima,
        y_raw: by.maxima,
    };
    Ok((pairs, sidecar))
}

/// CSV with header `x,y`, values at 12 significant digits.
pub fn pairs_to_csv_string(pairs: &[FrechetPair]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y"])?;
    for p in pairs {
        w.write_record([fmt_sig(p.x), fmt_sig(p.y)])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_pairs_csv(path: &Path, pairs: &[FrechetPair]) -> Result<()> {
    write_atomic(path, pairs_to_csv_string(pairs)?.as_bytes())
}

pub fn read_pairs_csv(path: &Path) -> Result<Vec<FrechetPair>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let col = |n: &str| header.iter().position(|h| h.trim() == n);
    let (cx, cy) = match (col("x"), col("y")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Data(format!("{}: expected columns x,y", path.display()))),
    };
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), i + 1)))
        };
        let (x, y) = (num(cx)?, num(cy)?);
        out.push(
            FrechetPair::new(x, y).map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn log_return_examples() {
        assert_eq!(negative_log_returns(&[100.0, 100.0]).unwrap(), vec![0.0]);
        assert!((negative_log_returns(&[100.0, 90.0]).unwrap()[0] - 0.105_360_515_657_826_3).abs() < 1e-15);
        assert!((negative_log_returns(&[100.0, 110.0]).unwrap()[0] + 0.095_310_179_804_324_9).abs() < 1e-15);
        assert!(negative_log_returns(&[100.0, 0.0]).is_err());
    }

    #[test]
    fn weekly_maxima_pairing() {
        // 2024-01-01 is a Monday; 2024-01-08 opens the next ISO week.
        let a = vec![(d("2024-01-01"), 1.0), (d("2024-01-02"), 3.0), (d("2024-01-03"), 2.0), (d("2024-01-08"), 7.0)];
        let b = vec![(d("2024-01-01"), 5.0), (d("2024-01-03"), 4.0), (d("2024-01-05"), 4.0)];
        let (ma, mb) = componentwise_block_maxima(&a, &b, ("a", "b")).unwrap();
        assert_eq!(ma.maxima, vec![3.0]);
        assert_eq!(mb.maxima, vec![5.0]);
        assert_eq!(ma.block_ids, vec!["2024-W01".to_string()]);
        assert!(componentwise_block_maxima(&a[3..], &b, ("a", "b")).is_err());
    }

    #[test]
    fn iso_weeks_cross_year_boundaries() {
        // 2020-12-31 (Thu) and 2021-01-01 (Fri) are both in 2020-W53.
        let a = vec![(d("2020-12-31"), 1.0), (d("2021-01-01"), 2.0)];
        let (ma, _) = componentwise_block_maxima(&a, &a, ("a", "b")).unwrap();
        assert_eq!(ma.block_ids, vec!["2020-W53".to_string()]);
        assert_eq!(ma.maxima, vec![2.0]);
    }

    #[test]
    fn frechet_transform_examples() {
        let v: Vec<f64> = (1..=9).map(|i| i as f64).collect();
        let z = empirical_frechet_transform(&v).unwrap();
        assert!((z[8] - 9.491_221_581_029_905).abs() < 1e-12);
        assert!((z[4] - std::f64::consts::LOG2_E).abs() < 1e-12);
        let t = empirical_frechet_transform(&[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert_eq!(t[1], t[2]);
        assert!(empirical_frechet_transform(&[1.0]).is_err());
        let mut order_in: Vec<usize> = (0..9).collect();
        let shuffled = [4.0, 1.0, 9.0, 3.0, 3.0, 7.0, 2.0, 8.0, 5.0];
        let out = empirical_frechet_transform(&shuffled).unwrap();
        order_in.sort_by(|a, b| shuffled[*a].total_cmp(&shuffled[*b]));
        assert!(order_in.windows(2).all(|w| out[w[0]] <= out[w[1]]));
    }

    #[test]
    fn margin_round_trip_and_extrapolation() {
        let raw = [0.01, 0.03, 0.02, 0.05, 0.04];
        let m = EmpiricalMargin::new(&raw).unwrap();
        let z = m.to_frechet(0.03);
        assert!(!z.extrapolated);
        assert!((z.value - (-1.0 / (3.0f64 / 6.0).ln())).abs() < 1e-12);
        let back = m.from_frechet(z.value);
        assert!((back.value - 0.03).abs() < 1e-12);
        let mid = m.to_frechet(0.025);
        assert!((m.from_frechet(mid.value).value - 0.025).abs() < 1e-12);
        assert!(m.to_frechet(0.5).extrapolated);
        assert!(m.from_frechet(1e6).extrapolated);
        assert_eq!(m.from_frechet(1e6).value, 0.05);
    }

    #[test]
    fn csv_ingestion_drops_nulls_and_zero_volume() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        std::fs::write(
            &p,
            "Date,Open,Close,Volume\n2024-01-01,1,100,10\n2024-01-02,1,null,10\n2024-01-03,1,101,0\n2024-01-04,1,99,5\n",
        )
        .unwrap();
        let s = PriceSeries::read_csv(&p, "t").unwrap();
        assert_eq!(s.closes, vec![100.0, 99.0]);
        std::fs::write(&p, "Date,Close\n2024-01-01,100\n2024-01-02,-3\n").unwrap();
        let e = PriceSeries::read_csv(&p, "t").unwrap_err().to_string();
        assert!(e.contains("row 2"), "{e}");
        std::fs::write(&p, "Day,Close\n2024-01-01,100\n").unwrap();
        assert!(PriceSeries::read_csv(&p, "t").is_err());
    }

    #[test]
    fn pairs_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.csv");
        let pairs = vec![FrechetPair { x: 1.0 / 3.0, y: 2.0 }, FrechetPair { x: 7.25, y: 0.1 }];
        write_pairs_csv(&p, &pairs).unwrap();
        let back = read_pairs_csv(&p).unwrap();
        assert_eq!(back[0].x, crate::io::round_sig(1.0 / 3.0));
        let p2 = dir.path().join("again.csv");
        write_pairs_csv(&p2, &back).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
    }
}
