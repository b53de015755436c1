//! Third-country instrument construction: correlation screening of monthly
//! exchange-rate fluctuations with geographic exclusion, and the one-month
//! lagged rate used by the supply-side regression.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::month::Month;
use crate::panel::MonthSeries;
use crate::scalar::{conv_usize, Scalar};

/// Currency code to region label.
pub type RegionMap = BTreeMap<String, String>;

/// One selected instrument currency with its screening correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentChoice<T: Scalar> {
    pub currency: String,
    pub correlation: T,
    pub region: String,
}

/// Instruments chosen for one target currency, strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentAssignment<T: Scalar> {
    pub target: String,
    pub instruments: Vec<InstrumentChoice<T>>,
    pub method: String,
}

/// Parses `currency,region` rows.
pub fn parse_regions<R: Read>(reader: R, source: &str) -> Result<RegionMap> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut map = RegionMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Data(format!("{source}: {e}")))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() < 2 || row[0].is_empty() || row[1].is_empty() {
            return Err(Error::Parse {
                path: source.to_string(),
                line,
                message: "expected currency,region".into(),
            });
        }
        if map.insert(row[0].to_string(), row[1].to_string()).is_some() {
            return Err(Error::Integrity(format!(
                "{source}: duplicate region entry for {}",
                &row[0]
            )));
        }
    }
    Ok(map)
}

/// Loads a `currency,region` file.
pub fn load_regions(path: &Path) -> Result<RegionMap> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_regions(file, &path.display().to_string())
}

/// Log first differences of a strictly positive series:
/// `out[t] = ln(s[t+1] / s[t])`.
pub fn log_changes<T: Scalar>(series: &[T]) -> Result<Vec<T>> {
    if series.len() < 2 {
        return Err(Error::Domain(format!(
            "log_changes needs at least 2 points, got {}",
            series.len()
        )));
    }
    if let Some(bad) = series.iter().find(|v| **v <= T::zero()) {
        return Err(Error::Domain(format!("log_changes requires positive values, got {bad}")));
    }
    Ok(series.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Log first differences of a monthly series, keyed by the later month of
/// each consecutive pair.
pub fn log_changes_series<T: Scalar>(series: &MonthSeries<T>) -> Result<MonthSeries<T>> {
    let entries: Vec<(Month, T)> = series.iter().map(|(m, v)| (*m, *v)).collect();
    let values: Vec<T> = entries.iter().map(|(_, v)| *v).collect();
    let diffs = log_changes(&values)?;
    Ok(entries.iter().skip(1).map(|(m, _)| *m).zip(diffs).collect())
}

/// Pearson correlation of two equal-length samples.
pub fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() || a.len() < 3 {
        return Err(Error::Domain(format!(
            "pearson needs equal-length samples of at least 3 points, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = conv_usize::<T>(a.len());
    let mean_a = a.iter().fold(T::zero(), |s, v| s + *v) / n;
    let mean_b = b.iter().fold(T::zero(), |s, v| s + *v) / n;
    let mut cov = T::zero();
    let mut var_a = T::zero();
    let mut var_b = T::zero();
    for (x, y) in a.iter().zip(b) {
        let dx = *x - mean_a;
        let dy = *y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a.is_zero() || var_b.is_zero() {
        return Err(Error::Degenerate("zero variance on correlation overlap".into()));
    }
    let r = cov / (var_a * var_b).sqrt();
    // guard against round-off outside [-1, 1]
    Ok(r.min(T::one()).max(-T::one()))
}

/// Pearson correlation of two monthly series on their overlapping months.
pub fn correlation<T: Scalar>(a: &MonthSeries<T>, b: &MonthSeries<T>) -> Result<T> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (m, x) in a {
        if let Some(y) = b.get(m) {
            xs.push(*x);
            ys.push(*y);
        }
    }
    if xs.len() < 3 {
        return Err(Error::Domain(format!(
            "correlation overlap has {} months, need at least 3",
            xs.len()
        )));
    }
    pearson(&xs, &ys)
}

/// Selects the `k` candidates most correlated (in absolute value) with the
/// target among candidates from geographically distinct regions.
///
/// `series` maps currency codes to monthly fluctuation series and must
/// include the target; every candidate must appear in `regions`. Ties are
/// broken by currency code so the selection is deterministic.
pub fn select_instruments<T: Scalar>(
    target: &str,
    series: &BTreeMap<String, MonthSeries<T>>,
    regions: &RegionMap,
    k: usize,
) -> Result<InstrumentAssignment<T>> {
    if k == 0 {
        return Err(Error::Selection("instrument count k must be at least 1".into()));
    }
    let target_series = series
        .get(target)
        .ok_or_else(|| Error::Selection(format!("no series for target currency {target}")))?;
    let target_region = regions
        .get(target)
        .ok_or_else(|| Error::Selection(format!("no region for target currency {target}")))?;

    let mut scored: Vec<InstrumentChoice<T>> = Vec::new();
    for (code, cand) in series {
        if code == target {
            continue;
        }
        let region = regions
            .get(code)
            .ok_or_else(|| Error::Selection(format!("no region for candidate currency {code}")))?;
        if region == target_region {
            continue;
        }
        let r = correlation(target_series, cand)?;
        scored.push(InstrumentChoice {
            currency: code.clone(),
            correlation: r,
            region: region.clone(),
        });
    }
    if scored.len() < k {
        return Err(Error::Selection(format!(
            "target {target}: only {} candidates outside region {target_region}, need {k}",
            scored.len()
        )));
    }
    scored.sort_by(|a, b| {
        b.correlation
            .abs()
            .partial_cmp(&a.correlation.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.currency.cmp(&b.currency))
    });
    scored.truncate(k);
    Ok(InstrumentAssignment {
        target: target.to_string(),
        instruments: scored,
        method: "abs-correlation screen on log changes, distinct region".into(),
    })
}

/// How to treat month gaps when lagging a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapPolicy {
    /// Drop the first observation after a gap (no valid predecessor month).
    #[default]
    Drop,
    /// Treat any month gap as an error.
    Error,
}

/// One-month lag of a monthly series: the value at month `t` is the series
/// value at `t - 1`. The first month has no lag and is always dropped.
pub fn lagged_instrument<T: Scalar>(
    series: &MonthSeries<T>,
    policy: GapPolicy,
) -> Result<MonthSeries<T>> {
    let mut out = MonthSeries::new();
    let mut first = true;
    for (&month, _) in series {
        match series.get(&month.prev()) {
            Some(&prev_value) => {
                out.insert(month, prev_value);
            }
            None if first => {}
            None => match policy {
                GapPolicy::Drop => {}
                GapPolicy::Error => {
                    return Err(Error::Data(format!(
                        "month gap before {month} while lagging series"
                    )))
                }
            },
        }
        first = false;
    }
    Ok(out)
}

/// CSV report of instrument assignments: `target,rank,instrument,correlation,region`.
pub fn assignments_csv<T: Scalar>(assignments: &[InstrumentAssignment<T>]) -> String {
    let mut out = String::from("target,rank,instrument,correlation,region\n");
    for a in assignments {
        for (rank, choice) in a.instruments.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                a.target,
                rank + 1,
                choice.currency,
                choice.correlation,
                choice.region
            ));
        }
    }
    out
}
