//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::Path;

use elastiv::dgp::{instrument_name, monte_carlo, simulate_panel, McSpec, McSummary};
use elastiv::estimator::{fe_iv, EstimationSpec, ExtraColumns};
use elastiv::instruments::{
    assignments_csv, load_regions, log_changes_series, select_instruments, InstrumentAssignment,
};
use elastiv::month::Month;
use elastiv::panel::{
    build_panel, compute_shares, cross_rate, fx_series, load_regimes, load_sources,
    split_by_regime, validate_regimes, MonthSeries, Panel, RegimeSpec,
};
use elastiv::report;
use elastiv::structural::estimate_supply;
use elastiv::{Error, Result};

use crate::config::{DgpConfig, RunConfig};

/// Writes a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct LoadedData {
    panel: Panel<f64>,
    regimes: Vec<RegimeSpec>,
    fx: BTreeMap<String, MonthSeries<f64>>,
    regions: elastiv::instruments::RegionMap,
    dropped_nonpositive: usize,
}

fn load_all(cfg: &RunConfig) -> Result<LoadedData> {
    let sources = load_sources::<f64>(&cfg.trade, &cfg.fx, &cfg.lme, &cfg.window)?;
    let regimes = load_regimes(&cfg.regimes)?;
    validate_regimes(&regimes, &cfg.window)?;
    let regions = load_regions(&cfg.regions)?;
    let panel = build_panel(
        &sources.trade,
        &sources.fx,
        &sources.lme,
        &regimes,
        &cfg.currencies,
        &cfg.exporter_currency,
    )?;
    Ok(LoadedData {
        panel,
        regimes,
        fx: fx_series(&sources.fx),
        regions,
        dropped_nonpositive: sources.dropped_nonpositive,
    })
}

/// Screens instruments for every partner currency present in the panel.
fn screen_for_panel(
    data: &LoadedData,
    cfg: &RunConfig,
) -> Result<BTreeMap<String, InstrumentAssignment<f64>>> {
    // Candidate pool: fluctuation series of every quoted currency except the
    // exporter's own.
    let mut changes: BTreeMap<String, MonthSeries<f64>> = BTreeMap::new();
    for (code, series) in &data.fx {
        if code == &cfg.exporter_currency {
            continue;
        }
        changes.insert(code.clone(), log_changes_series(series)?);
    }
    let mut assignments = BTreeMap::new();
    for partner in data.panel.partners() {
        let currency = cfg
            .currencies
            .get(&partner)
            .ok_or_else(|| Error::Integrity(format!("partner {partner} has no currency mapping")))?;
        let assignment = select_instruments(currency, &changes, &data.regions, cfg.k)?;
        assignments.insert(partner, assignment);
    }
    Ok(assignments)
}

/// Builds the per-row instrument columns (`iv1`..`ivk`) from the assigned
/// third-country currencies, as log cross rates against the exporter unit.
fn instrument_columns(
    panel: &Panel<f64>,
    assignments: &BTreeMap<String, InstrumentAssignment<f64>>,
    fx: &BTreeMap<String, MonthSeries<f64>>,
    exporter: &str,
    k: usize,
) -> Result<ExtraColumns<f64>> {
    let exporter_series = fx
        .get(exporter)
        .ok_or_else(|| Error::Coverage(format!("no fx quotes for exporter currency {exporter}")))?;
    let mut extra = ExtraColumns::new();
    for r in 0..k {
        let mut column = Vec::with_capacity(panel.len());
        for obs in &panel.observations {
            let value = assignments
                .get(&obs.partner)
                .and_then(|a| a.instruments.get(r))
                .and_then(|choice| {
                    let quote = fx.get(&choice.currency)?.get(&obs.month)?;
                    let base = exporter_series.get(&obs.month)?;
                    cross_rate(*quote, *base).ok().map(|e| e.ln())
                });
            column.push(value);
        }
        extra.insert(instrument_name(r), column);
    }
    Ok(extra)
}

pub fn cmd_estimate(cfg: &RunConfig) -> Result<()> {
    let data = load_all(cfg)?;
    if data.dropped_nonpositive > 0 {
        eprintln!("note: dropped {} nonpositive-value trade rows", data.dropped_nonpositive);
    }
    let assignments = screen_for_panel(&data, cfg)?;
    let mut regimes = data.regimes.clone();
    regimes.sort_by_key(|r| r.start);
    let sub_panels = split_by_regime(&data.panel, &regimes);

    let mut results = Vec::new();
    let mut regime_names = Vec::new();
    for regime in &regimes {
        let sub = &sub_panels[&regime.name];
        if sub.is_empty() {
            eprintln!("note: regime '{}' has no observations; skipped", regime.name);
            continue;
        }
        let extra =
            instrument_columns(sub, &assignments, &data.fx, &cfg.exporter_currency, cfg.k)?;
        let instruments = (0..cfg.k).map(instrument_name).collect();
        let mut spec = EstimationSpec::reduced_form(instruments, cfg.bandwidth);
        spec.regime = Some(regime.name.clone());
        let result = fe_iv(sub, &extra, &spec)?;
        eprintln!(
            "regime '{}': n={} groups={} dropped_singletons={} dropped_missing={}",
            regime.name, result.n, result.n_groups, result.dropped_singleton_rows,
            result.dropped_missing
        );
        regime_names.push(regime.name.clone());
        results.push(result);
    }
    if results.is_empty() {
        return Err(Error::Data("no regime has any observations".into()));
    }
    let omegas = cfg.omega_grid.clone();
    let cells = report::collect_cells(&results, &omegas)?;
    let table = report::format_results_table(&cells, &regime_names, &omegas);
    let csv = report::results_csv(&cells);
    write_atomic(&cfg.out.join("results.txt"), &table)?;
    write_atomic(&cfg.out.join("results.csv"), &csv)?;
    print!("{table}");
    println!("wrote {}", cfg.out.join("results.csv").display());
    Ok(())
}

pub fn cmd_supply(cfg: &RunConfig) -> Result<()> {
    let data = load_all(cfg)?;
    let result = estimate_supply(&data.panel, cfg.bandwidth)?;
    let cells = report::collect_supply_cells(&result);
    let table = report::format_supply_table(&cells);
    let csv = report::supply_csv(&cells);
    write_atomic(&cfg.out.join("supply.txt"), &table)?;
    write_atomic(&cfg.out.join("supply.csv"), &csv)?;
    print!("{table}");
    println!("wrote {}", cfg.out.join("supply.csv").display());
    Ok(())
}

pub fn cmd_shares(cfg: &RunConfig) -> Result<()> {
    let sources = load_sources::<f64>(&cfg.trade, &cfg.fx, &cfg.lme, &cfg.window)?;
    let regimes = load_regimes(&cfg.regimes)?;
    validate_regimes(&regimes, &cfg.window)?;
    let mut regimes = regimes;
    regimes.sort_by_key(|r| r.start);
    let mut blocks = Vec::new();
    for regime in &regimes {
        match compute_shares(&sources.trade, regime.start, regime.end) {
            Ok(shares) => blocks.push((
                regime.name.clone(),
                shares.into_iter().collect::<Vec<_>>(),
            )),
            Err(Error::Data(_)) => {
                eprintln!("warning: period '{}' has no positive trade; omitted", regime.name);
            }
            Err(e) => return Err(e),
        }
    }
    let csv = report::shares_csv(&blocks);
    write_atomic(&cfg.out.join("shares.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn cmd_select_instruments(cfg: &RunConfig) -> Result<()> {
    let data = load_all(cfg)?;
    let assignments = screen_for_panel(&data, cfg)?;
    let list: Vec<InstrumentAssignment<f64>> = assignments
        .iter()
        .map(|(partner, a)| {
            let mut named = a.clone();
            named.target = format!("{partner}:{}", a.target);
            named
        })
        .collect();
    let csv = assignments_csv(&list);
    write_atomic(&cfg.out.join("instruments.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn currency_code(j: usize) -> String {
    format!("C{:03}", j + 1)
}

fn instrument_currency_code(j: usize, r: usize) -> String {
    format!("Z{:03}{}", j + 1, (b'A' + r as u8) as char)
}

/// Emits a synthetic data set in the standard file schemas, plus a
/// ready-to-run configuration and the hidden truth.
pub fn cmd_simulate(cfg: &DgpConfig) -> Result<()> {
    let sim = simulate_panel(&cfg.params, cfg.seed)?;
    let params = &cfg.params;
    let out = &cfg.out;
    let months: Vec<Month> = (0..params.months)
        .map(|t| Month::from_index(params.start.index() + t as i64))
        .collect();
    let window_start = months[0];
    let window_end = *months.last().unwrap();

    // trade.csv
    let mut trade = String::from("partner,month,value_usd,quantity_kg\n");
    for obs in &sim.panel.observations {
        let value = obs.ln_x.exp();
        let quantity = (obs.ln_x - obs.ln_uv.expect("synthetic rows carry unit values")).exp();
        trade.push_str(&format!("{},{},{value},{quantity}\n", obs.partner, obs.month));
    }
    write_atomic(&out.join("trade.csv"), &trade)?;

    // fx.csv: partner currencies, instrument currencies, exporter unit.
    let mut fx = String::from("currency,month,per_usd\n");
    for (j, code) in (0..params.partners).map(|j| (j, currency_code(j))) {
        for (t, month) in months.iter().enumerate() {
            let row = j * params.months + t;
            let rate = sim.panel.observations[row].ln_e.exp();
            fx.push_str(&format!("{code},{month},{rate}\n"));
        }
    }
    for j in 0..params.partners {
        for r in 0..params.n_instruments {
            let code = instrument_currency_code(j, r);
            for (t, month) in months.iter().enumerate() {
                let row = j * params.months + t;
                let rate = sim.instruments[r][row].exp();
                fx.push_str(&format!("{code},{month},{rate}\n"));
            }
        }
    }
    for month in &months {
        fx.push_str(&format!("CDF,{month},1\n"));
    }
    write_atomic(&out.join("fx.csv"), &fx)?;

    // lme.csv
    let mut lme = String::from("month,usd_per_tonne\n");
    for (t, month) in months.iter().enumerate() {
        let price = sim.panel.observations[t].ln_p_lme.exp();
        lme.push_str(&format!("{month},{price}\n"));
    }
    write_atomic(&out.join("lme.csv"), &lme)?;

    // regimes.csv: one regime spanning the sample.
    let regimes = format!("name,start,end\nAll,{window_start},{window_end}\n");
    write_atomic(&out.join("regimes.csv"), &regimes)?;

    // regions.csv: partner currencies in one region, instruments in another.
    let mut regions = String::from("currency,region\nCDF,Home\n");
    for j in 0..params.partners {
        regions.push_str(&format!("{},East\n", currency_code(j)));
    }
    for j in 0..params.partners {
        for r in 0..params.n_instruments {
            regions.push_str(&format!("{},West\n", instrument_currency_code(j, r)));
        }
    }
    write_atomic(&out.join("regions.csv"), &regions)?;

    // Ready-to-run configuration for the estimation commands.
    let mut conf = String::new();
    conf.push_str("trade = trade.csv\nfx = fx.csv\nlme = lme.csv\n");
    conf.push_str("regions = regions.csv\nregimes = regimes.csv\n");
    conf.push_str("out = results\n");
    conf.push_str("exporter_currency = CDF\n");
    conf.push_str(&format!("k = {}\n", params.n_instruments));
    conf.push_str(&format!("bandwidth = {}\n", cfg.bandwidth));
    conf.push_str("omega_grid = 0\n");
    conf.push_str(&format!("window_start = {window_start}\nwindow_end = {window_end}\n"));
    for j in 0..params.partners {
        conf.push_str(&format!(
            "currency.{} = {}\n",
            params.partner_code(j),
            currency_code(j)
        ));
    }
    write_atomic(&out.join("run.conf"), &conf)?;

    // Hidden truth for validation.
    let truth = serde_json::json!({
        "eta": params.eta,
        "omega": params.omega,
        "delta": params.delta,
        "true_beta": sim.truth.true_beta,
        "kappa": params.kappa,
        "partners": params.partners,
        "months": params.months,
        "instruments": params.n_instruments,
        "seed": cfg.seed,
    });
    write_atomic(&out.join("truth.json"), &format!("{truth:#}\n"))?;

    println!(
        "wrote synthetic panel ({} partners x {} months) to {}",
        params.partners,
        params.months,
        out.display()
    );
    println!("estimate it with: elastiv estimate --config {}", out.join("run.conf").display());
    Ok(())
}

fn mc_summary_json(summary: &McSummary<f64>) -> serde_json::Value {
    let reduced = |s: &elastiv::dgp::McReducedForm<f64>| {
        serde_json::json!({
            "mean_beta": s.beta.mean,
            "sd_beta": s.beta.sd,
            "mc_se": s.beta.mc_se,
            "wald_eta_zero_reject_5": s.wald_eta_zero_reject_5,
            "overid_reject_5": s.overid_reject_5,
        })
    };
    serde_json::json!({
        "reps": summary.reps,
        "failures": summary.failures,
        "true_beta": summary.true_beta,
        "true_omega": summary.true_omega,
        "fe_iv": summary.fe_iv.as_ref().map(reduced),
        "fe_ols": summary.fe_ols.as_ref().map(reduced),
        "supply": summary.supply.map(|s| serde_json::json!({
            "mean_omega": s.omega.mean,
            "sd_omega": s.omega.sd,
            "mc_se": s.omega.mc_se,
            "omega_significant_5": s.omega_significant_5,
        })),
    })
}

pub fn cmd_mc(cfg: &DgpConfig) -> Result<()> {
    let spec = McSpec {
        reps: cfg.reps,
        bandwidth: cfg.bandwidth,
        estimator: cfg.estimator,
    };
    let summary = monte_carlo(&cfg.params, &spec, cfg.seed)?;
    let json = mc_summary_json(&summary);
    let text = format!("{json:#}\n");
    write_atomic(&cfg.out.join("mc_summary.json"), &text)?;
    print!("{text}");
    Ok(())
}
