//! Monthly panel construction: trade, exchange-rate, and commodity-price
//! ingestion, cross rates, log transforms, regime assignment, shares, and
//! unit values.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::month::Month;
use crate::scalar::{conv, Scalar};

/// One partner-month trade flow, as reported by the importing country.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeRecord<T: Scalar> {
    pub partner: String,
    pub month: Month,
    pub value_usd: T,
    pub quantity_kg: Option<T>,
}

/// Monthly average units of `currency` per US dollar.
#[derive(Debug, Clone, PartialEq)]
pub struct FxQuote<T: Scalar> {
    pub currency: String,
    pub month: Month,
    pub per_usd: T,
}

/// A monthly series keyed by calendar month.
pub type MonthSeries<T> = BTreeMap<Month, T>;

/// One row of the estimation panel, in logs.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelObservation<T: Scalar> {
    pub partner: String,
    pub month: Month,
    /// Log export value (current USD).
    pub ln_x: T,
    /// Log bilateral rate: importer currency per exporter currency unit.
    pub ln_e: T,
    /// Log global cash commodity price (USD), common across partners.
    pub ln_p_lme: T,
    /// Log CIF unit value, present only when a positive quantity is reported.
    pub ln_uv: Option<T>,
    pub regime: String,
}

/// Named inclusive month interval assigning observations to a regime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegimeSpec {
    pub name: String,
    pub start: Month,
    pub end: Month,
}

impl RegimeSpec {
    pub fn contains(&self, month: Month) -> bool {
        self.start <= month && month <= self.end
    }
}

/// Months admitted by the loaders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleWindow {
    pub start: Month,
    pub end: Month,
}

impl SampleWindow {
    pub fn new(start: Month, end: Month) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!(
                "sample window start {start} is after end {end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, month: Month) -> bool {
        self.start <= month && month <= self.end
    }
}

impl Default for SampleWindow {
    /// Coverage window of the bundled monthly schemas: May 2010 - Dec 2022.
    fn default() -> Self {
        Self {
            start: Month::new(2010, 5).unwrap(),
            end: Month::new(2022, 12).unwrap(),
        }
    }
}

/// Parsed and validated source data.
#[derive(Debug, Clone)]
pub struct Sources<T: Scalar> {
    pub trade: Vec<TradeRecord<T>>,
    /// Rows dropped because the reported value was not positive (the log is
    /// undefined there).
    pub dropped_nonpositive: usize,
    pub fx: Vec<FxQuote<T>>,
    pub lme: MonthSeries<T>,
}

/// Partner code to currency code mapping. Every partner in the trade data
/// must be mapped; there is no fallback.
pub type CurrencyMap = BTreeMap<String, String>;

fn parse_err(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_field_f64(source: &str, line: u64, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(source, line, format!("invalid {what}: '{field}'")))?;
    if !v.is_finite() {
        return Err(parse_err(source, line, format!("non-finite {what}: '{field}'")));
    }
    Ok(v)
}

fn parse_month_field(source: &str, line: u64, field: &str) -> Result<Month> {
    field
        .trim()
        .parse()
        .map_err(|e| parse_err(source, line, format!("{e}")))
}

/// Result of loading the trade file.
#[derive(Debug, Clone)]
pub struct TradeLoad<T: Scalar> {
    pub records: Vec<TradeRecord<T>>,
    pub dropped_nonpositive: usize,
}

/// Parses `partner,month,value_usd,quantity_kg` rows. Rows with nonpositive
/// value are dropped and counted; duplicate (partner, month) keys are an
/// integrity error.
pub fn parse_trade<T: Scalar, R: Read>(
    reader: R,
    source: &str,
    window: &SampleWindow,
) -> Result<TradeLoad<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut records = Vec::new();
    let mut dropped = 0usize;
    let mut seen: BTreeSet<(String, Month)> = BTreeSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Data(format!("{source}: {e}")))?;
        let line = record_line(&row);
        if row.len() < 3 {
            return Err(parse_err(source, line, "expected partner,month,value_usd[,quantity_kg]"));
        }
        let partner = row[0].to_string();
        if partner.is_empty() {
            return Err(parse_err(source, line, "empty partner code"));
        }
        let month = parse_month_field(source, line, &row[1])?;
        if !window.contains(month) {
            return Err(parse_err(
                source,
                line,
                format!("month {month} outside sample window {}..{}", window.start, window.end),
            ));
        }
        let value = parse_field_f64(source, line, &row[2], "value_usd")?;
        let quantity = match row.get(3).map(str::trim) {
            None | Some("") => None,
            Some(q) => {
                let q = parse_field_f64(source, line, q, "quantity_kg")?;
                if q < 0.0 {
                    return Err(parse_err(source, line, format!("negative quantity_kg: {q}")));
                }
                Some(q)
            }
        };
        if !seen.insert((partner.clone(), month)) {
            return Err(Error::Integrity(format!(
                "{source}: duplicate trade record for ({partner}, {month})"
            )));
        }
        if value <= 0.0 {
            dropped += 1;
            continue;
        }
        records.push(TradeRecord {
            partner,
            month,
            value_usd: conv::<T>(value),
            quantity_kg: quantity.map(conv::<T>),
        });
    }
    Ok(TradeLoad {
        records,
        dropped_nonpositive: dropped,
    })
}

/// Parses `currency,month,per_usd` rows; quotes must be strictly positive.
pub fn parse_fx<T: Scalar, R: Read>(reader: R, source: &str) -> Result<Vec<FxQuote<T>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut quotes = Vec::new();
    let mut seen: BTreeSet<(String, Month)> = BTreeSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Data(format!("{source}: {e}")))?;
        let line = record_line(&row);
        if row.len() < 3 {
            return Err(parse_err(source, line, "expected currency,month,per_usd"));
        }
        let currency = row[0].to_string();
        if currency.is_empty() {
            return Err(parse_err(source, line, "empty currency code"));
        }
        let month = parse_month_field(source, line, &row[1])?;
        let per_usd = parse_field_f64(source, line, &row[2], "per_usd")?;
        if per_usd <= 0.0 {
            return Err(parse_err(source, line, format!("per_usd must be positive: {per_usd}")));
        }
        if !seen.insert((currency.clone(), month)) {
            return Err(Error::Integrity(format!(
                "{source}: duplicate fx quote for ({currency}, {month})"
            )));
        }
        quotes.push(FxQuote {
            currency,
            month,
            per_usd: conv::<T>(per_usd),
        });
    }
    Ok(quotes)
}

/// Parses `month,usd_per_tonne` rows into a monthly series.
pub fn parse_lme<T: Scalar, R: Read>(reader: R, source: &str) -> Result<MonthSeries<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut series = MonthSeries::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Data(format!("{source}: {e}")))?;
        let line = record_line(&row);
        if row.len() < 2 {
            return Err(parse_err(source, line, "expected month,usd_per_tonne"));
        }
        let month = parse_month_field(source, line, &row[0])?;
        let price = parse_field_f64(source, line, &row[1], "usd_per_tonne")?;
        if price <= 0.0 {
            return Err(parse_err(source, line, format!("price must be positive: {price}")));
        }
        if series.insert(month, conv::<T>(price)).is_some() {
            return Err(Error::Integrity(format!("{source}: duplicate price for {month}")));
        }
    }
    Ok(series)
}

/// Parses `name,start,end` regime rows.
pub fn parse_regimes<R: Read>(reader: R, source: &str) -> Result<Vec<RegimeSpec>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut specs = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Data(format!("{source}: {e}")))?;
        let line = record_line(&row);
        if row.len() < 3 {
            return Err(parse_err(source, line, "expected name,start,end"));
        }
        let name = row[0].to_string();
        let start = parse_month_field(source, line, &row[1])?;
        let end = parse_month_field(source, line, &row[2])?;
        if start > end {
            return Err(parse_err(source, line, format!("regime '{name}' has start after end")));
        }
        specs.push(RegimeSpec { name, start, end });
    }
    Ok(specs)
}

/// Checks that regimes are non-overlapping and jointly cover `window`.
pub fn validate_regimes(specs: &[RegimeSpec], window: &SampleWindow) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("no regimes defined".into()));
    }
    let mut sorted: Vec<&RegimeSpec> = specs.iter().collect();
    sorted.sort_by_key(|s| s.start);
    for pair in sorted.windows(2) {
        if pair[1].start <= pair[0].end {
            return Err(Error::Config(format!(
                "regimes '{}' and '{}' overlap",
                pair[0].name, pair[1].name
            )));
        }
        if pair[1].start.months_since(pair[0].end) > 1 {
            return Err(Error::Config(format!(
                "gap between regimes '{}' and '{}'",
                pair[0].name, pair[1].name
            )));
        }
    }
    if sorted[0].start > window.start || sorted[sorted.len() - 1].end < window.end {
        return Err(Error::Config(format!(
            "regimes cover {}..{} but the sample window is {}..{}",
            sorted[0].start,
            sorted[sorted.len() - 1].end,
            window.start,
            window.end
        )));
    }
    Ok(())
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Loads and validates the three source files.
pub fn load_sources<T: Scalar>(
    trade_path: &Path,
    fx_path: &Path,
    lme_path: &Path,
    window: &SampleWindow,
) -> Result<Sources<T>> {
    let trade = parse_trade(open(trade_path)?, &trade_path.display().to_string(), window)?;
    let fx = parse_fx(open(fx_path)?, &fx_path.display().to_string())?;
    let lme = parse_lme(open(lme_path)?, &lme_path.display().to_string())?;
    Ok(Sources {
        trade: trade.records,
        dropped_nonpositive: trade.dropped_nonpositive,
        fx,
        lme,
    })
}

/// Loads `name,start,end` regimes from a file.
pub fn load_regimes(path: &Path) -> Result<Vec<RegimeSpec>> {
    parse_regimes(open(path)?, &path.display().to_string())
}

/// Bilateral cross rate: units of the importer currency per unit of the
/// exporter currency, from the two dollar quotes.
pub fn cross_rate<T: Scalar>(currency_per_usd: T, exporter_per_usd: T) -> Result<T> {
    if currency_per_usd <= T::zero() || exporter_per_usd <= T::zero() {
        return Err(Error::Domain(format!(
            "cross_rate requires positive quotes, got ({currency_per_usd}, {exporter_per_usd})"
        )));
    }
    Ok(currency_per_usd / exporter_per_usd)
}

/// The assembled estimation panel, sorted by (partner, month).
#[derive(Debug, Clone, PartialEq)]
pub struct Panel<T: Scalar> {
    pub observations: Vec<PanelObservation<T>>,
}

impl<T: Scalar> Default for Panel<T> {
    fn default() -> Self {
        Self {
            observations: Vec::new(),
        }
    }
}

impl<T: Scalar> Panel<T> {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn partners(&self) -> Vec<String> {
        let set: BTreeSet<&str> =
            self.observations.iter().map(|o| o.partner.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }
}

/// Groups fx quotes into per-currency monthly series.
pub fn fx_series<T: Scalar>(fx: &[FxQuote<T>]) -> BTreeMap<String, MonthSeries<T>> {
    let mut map: BTreeMap<String, MonthSeries<T>> = BTreeMap::new();
    for q in fx {
        map.entry(q.currency.clone()).or_default().insert(q.month, q.per_usd);
    }
    map
}

/// Builds the log panel from validated sources.
///
/// Every partner must be mapped to a currency and every trade month must be
/// covered by both exchange-rate series and the commodity price series;
/// coverage failures are reported together, listing all gaps.
pub fn build_panel<T: Scalar>(
    trade: &[TradeRecord<T>],
    fx: &[FxQuote<T>],
    lme: &MonthSeries<T>,
    regimes: &[RegimeSpec],
    currencies: &CurrencyMap,
    exporter_currency: &str,
) -> Result<Panel<T>> {
    let by_currency = fx_series(fx);
    let exporter = by_currency.get(exporter_currency).ok_or_else(|| {
        Error::Coverage(format!("no fx quotes for exporter currency {exporter_currency}"))
    })?;

    let mut gaps: Vec<String> = Vec::new();
    let mut observations = Vec::with_capacity(trade.len());
    for rec in trade {
        let currency = match currencies.get(&rec.partner) {
            Some(c) => c,
            None => {
                return Err(Error::Integrity(format!(
                    "partner {} has no currency mapping",
                    rec.partner
                )))
            }
        };
        let partner_quote = by_currency.get(currency).and_then(|s| s.get(&rec.month));
        let exporter_quote = exporter.get(&rec.month);
        let lme_price = lme.get(&rec.month);
        if partner_quote.is_none() {
            gaps.push(format!("fx {currency} @ {}", rec.month));
        }
        if exporter_quote.is_none() {
            gaps.push(format!("fx {exporter_currency} @ {}", rec.month));
        }
        if lme_price.is_none() {
            gaps.push(format!("lme @ {}", rec.month));
        }
        let (Some(&pq), Some(&eq), Some(&lp)) = (partner_quote, exporter_quote, lme_price) else {
            continue;
        };
        let regime = regimes
            .iter()
            .find(|r| r.contains(rec.month))
            .map(|r| r.name.clone())
            .ok_or_else(|| {
                Error::Data(format!("month {} not covered by any regime", rec.month))
            })?;
        let rate = cross_rate(pq, eq)?;
        let ln_uv = match rec.quantity_kg {
            Some(q) if q > T::zero() => Some((rec.value_usd / q).ln()),
            _ => None,
        };
        observations.push(PanelObservation {
            partner: rec.partner.clone(),
            month: rec.month,
            ln_x: rec.value_usd.ln(),
            ln_e: rate.ln(),
            ln_p_lme: lp.ln(),
            ln_uv,
            regime,
        });
    }
    if !gaps.is_empty() {
        gaps.sort();
        gaps.dedup();
        return Err(Error::Coverage(format!("missing series values: {}", gaps.join("; "))));
    }
    observations.sort_by(|a, b| (a.partner.as_str(), a.month).cmp(&(b.partner.as_str(), b.month)));
    Ok(Panel { observations })
}

/// Partitions the panel by regime label. Every named regime appears in the
/// result, possibly with an empty sub-panel.
pub fn split_by_regime<T: Scalar>(
    panel: &Panel<T>,
    regimes: &[RegimeSpec],
) -> BTreeMap<String, Panel<T>> {
    let mut map: BTreeMap<String, Panel<T>> = regimes
        .iter()
        .map(|r| (r.name.clone(), Panel::default()))
        .collect();
    for obs in &panel.observations {
        map.entry(obs.regime.clone()).or_default().observations.push(obs.clone());
    }
    map
}

/// Partner shares of total trade value over an inclusive month range.
///
/// Only partners with positive totals appear; shares sum to one.
pub fn compute_shares<T: Scalar>(
    trade: &[TradeRecord<T>],
    start: Month,
    end: Month,
) -> Result<BTreeMap<String, T>> {
    if start > end {
        return Err(Error::Domain(format!("share period {start}..{end} is empty")));
    }
    let mut totals: BTreeMap<String, T> = BTreeMap::new();
    for rec in trade {
        if rec.month >= start && rec.month <= end {
            *totals.entry(rec.partner.clone()).or_insert_with(T::zero) += rec.value_usd;
        }
    }
    totals.retain(|_, v| *v > T::zero());
    let grand: T = totals.values().fold(T::zero(), |acc, v| acc + *v);
    if grand <= T::zero() {
        return Err(Error::Data(format!("no positive trade in period {start}..{end}")));
    }
    Ok(totals.into_iter().map(|(p, v)| (p, v / grand)).collect())
}

/// Per-record unit value in USD/kg, missing where no positive quantity is
/// reported. The output is aligned with the input records.
pub fn compute_unit_values<T: Scalar>(trade: &[TradeRecord<T>]) -> Vec<Option<T>> {
    trade
        .iter()
        .map(|rec| match rec.quantity_kg {
            Some(q) if q > T::zero() => Some(rec.value_usd / q),
            _ => None,
        })
        .collect()
}
