//! Flat key-value configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment line; keys with a
//! `currency.` prefix build the partner-to-currency map. Paths are resolved
//! relative to the configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use elastiv::dgp::{DgpParams, McEstimator};
use elastiv::month::Month;
use elastiv::panel::{CurrencyMap, SampleWindow};
use elastiv::{Error, Result};

/// Raw parsed key-value pairs plus the directory for path resolution.
#[derive(Debug, Clone)]
pub struct KeyValues {
    values: BTreeMap<String, String>,
    base_dir: PathBuf,
    path: PathBuf,
}

impl KeyValues {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "{}:{}: expected 'key = value', got '{line}'",
                    path.display(),
                    idx + 1
                )));
            };
            let key = key.trim().to_string();
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!(
                    "{}:{}: duplicate key '{key}'",
                    path.display(),
                    idx + 1
                )));
            }
        }
        Ok(Self {
            values,
            base_dir,
            path: path.to_path_buf(),
        })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| {
            Error::Config(format!("{}: missing required key '{key}'", self.path.display()))
        })
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, raw: &str) -> Result<T> {
        raw.parse().map_err(|_| {
            Error::Config(format!(
                "{}: key '{key}' has invalid value '{raw}'",
                self.path.display()
            ))
        })
    }

    fn get_parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            Some(raw) => self.parse(key, raw),
            None => Ok(default),
        }
    }

    fn resolve(&self, raw: &str) -> PathBuf {
        let p = Path::new(raw);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn require_path(&self, key: &str) -> Result<PathBuf> {
        let path = self.resolve(self.require(key)?);
        if !path.exists() {
            return Err(Error::Config(format!(
                "{}: key '{key}' references missing file {}",
                self.path.display(),
                path.display()
            )));
        }
        Ok(path)
    }

    fn float_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .split(',')
                .map(|part| self.parse::<f64>(key, part.trim()))
                .collect(),
        }
    }
}

/// Configuration for the data-driven commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub trade: PathBuf,
    pub fx: PathBuf,
    pub lme: PathBuf,
    pub regions: PathBuf,
    pub regimes: PathBuf,
    pub out: PathBuf,
    pub currencies: CurrencyMap,
    pub exporter_currency: String,
    pub k: usize,
    pub bandwidth: usize,
    pub omega_grid: Vec<f64>,
    pub window: SampleWindow,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let kv = KeyValues::load(path)?;
        let mut currencies = CurrencyMap::new();
        for (key, value) in &kv.values {
            if let Some(partner) = key.strip_prefix("currency.") {
                currencies.insert(partner.to_string(), value.clone());
            }
        }
        if currencies.is_empty() {
            return Err(Error::Config(format!(
                "{}: no 'currency.<partner>' mappings defined",
                path.display()
            )));
        }
        let window_start: Month =
            kv.get_parsed("window_start", SampleWindow::default().start)?;
        let window_end: Month = kv.get_parsed("window_end", SampleWindow::default().end)?;
        let k = kv.get_parsed("k", 2usize)?;
        let bandwidth = kv.get_parsed("bandwidth", 2usize)?;
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(Self {
            trade: kv.require_path("trade")?,
            fx: kv.require_path("fx")?,
            lme: kv.require_path("lme")?,
            regions: kv.require_path("regions")?,
            regimes: kv.require_path("regimes")?,
            out: kv.resolve(kv.get("out").unwrap_or("out")),
            currencies,
            exporter_currency: kv.get("exporter_currency").unwrap_or("CDF").to_string(),
            k,
            bandwidth,
            omega_grid: kv.float_list("omega_grid", &[0.0, 0.089])?,
            window: SampleWindow::new(window_start, window_end)?,
        })
    }
}

/// Configuration for the synthetic-data commands.
#[derive(Debug, Clone)]
pub struct DgpConfig {
    pub params: DgpParams<f64>,
    pub seed: u64,
    pub reps: usize,
    pub estimator: McEstimator,
    pub bandwidth: usize,
    pub out: PathBuf,
}

fn per_partner(kv: &KeyValues, key: &str, partners: usize, default: Vec<f64>) -> Result<Vec<f64>> {
    let list = kv.float_list(key, &default)?;
    if list.len() == 1 {
        Ok(vec![list[0]; partners])
    } else if list.len() == partners {
        Ok(list)
    } else {
        Err(Error::Config(format!(
            "key '{key}' has {} entries, expected 1 or {partners}",
            list.len()
        )))
    }
}

impl DgpConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let kv = KeyValues::load(path)?;
        let partners: usize = kv.get_parsed("partners", 6)?;
        let months: usize = kv.get_parsed("months", 40)?;
        let eta: f64 = kv.get_parsed("eta", -3.47)?;
        let omega: f64 = kv.get_parsed("omega", 0.0)?;
        let mut params = DgpParams::baseline(eta, omega, partners, months);
        params.delta = kv.get_parsed("delta", params.delta)?;
        params.alpha = per_partner(&kv, "alpha", partners, params.alpha.clone())?;
        params.tau = per_partner(&kv, "tau", partners, params.tau.clone())?;
        params.sigma_u = kv.get_parsed("sigma_u", params.sigma_u)?;
        params.sigma_v = kv.get_parsed("sigma_v", params.sigma_v)?;
        params.fx_sigma = kv.get_parsed("fx_sigma", params.fx_sigma)?;
        params.fx_noise = kv.get_parsed("fx_noise", params.fx_noise)?;
        params.instrument_loading =
            kv.get_parsed("instrument_loading", params.instrument_loading)?;
        params.instrument_sigma = kv.get_parsed("instrument_sigma", params.instrument_sigma)?;
        params.kappa = kv.get_parsed("kappa", params.kappa)?;
        params.lme_loading = kv.get_parsed("lme_loading", params.lme_loading)?;
        params.lme_sigma = kv.get_parsed("lme_sigma", params.lme_sigma)?;
        params.lme_base = kv.get_parsed("lme_base", params.lme_base)?;
        params.n_instruments = kv.get_parsed("instruments", params.n_instruments)?;
        params.start = kv.get_parsed("start_month", params.start)?;
        let estimator = match kv.get("estimator").unwrap_or("fe-iv") {
            "fe-iv" => McEstimator::FeIv,
            "fe-ols" => McEstimator::FeOls,
            "iv-and-ols" => McEstimator::IvAndOls,
            "supply" => McEstimator::Supply,
            other => {
                return Err(Error::Config(format!(
                    "unknown estimator '{other}' (expected fe-iv, fe-ols, iv-and-ols, supply)"
                )))
            }
        };
        params.validate()?;
        Ok(Self {
            params,
            seed: kv.get_parsed("seed", 42u64)?,
            reps: kv.get_parsed("reps", 500usize)?,
            estimator,
            bandwidth: kv.get_parsed("bandwidth", 2usize)?,
            out: kv.resolve(kv.get("out").unwrap_or("out")),
        })
    }
}
