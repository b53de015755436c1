//! End-to-end pipeline on synthetic data: generate, export through the CSV
//! schemas, re-ingest, screen instruments, estimate, and recover the truth.

use std::collections::BTreeMap;

use elastiv::dgp::{simulate_panel, DgpParams};
use elastiv::estimator::{fe_iv, EstimationSpec};
use elastiv::instruments::{log_changes_series, select_instruments, RegionMap};
use elastiv::month::Month;
use elastiv::panel::{
    build_panel, cross_rate, fx_series, parse_fx, parse_lme, parse_regimes, parse_trade,
    validate_regimes, CurrencyMap, SampleWindow,
};
use elastiv::report;
use elastiv::structural::{estimate_supply, eta_from_beta};

fn currency_code(j: usize) -> String {
    format!("C{:03}", j + 1)
}

fn instrument_code(j: usize, r: usize) -> String {
    format!("Z{:03}{}", j + 1, (b'A' + r as u8) as char)
}

/// Renders a synthetic panel through the exact trade/fx/lme CSV schemas.
fn export_csvs(params: &DgpParams<f64>, seed: u64) -> (String, String, String, String) {
    let sim = simulate_panel(params, seed).unwrap();
    let months: Vec<Month> = (0..params.months)
        .map(|t| Month::from_index(params.start.index() + t as i64))
        .collect();

    let mut trade = String::from("partner,month,value_usd,quantity_kg\n");
    for obs in &sim.panel.observations {
        let value = obs.ln_x.exp();
        let quantity = (obs.ln_x - obs.ln_uv.unwrap()).exp();
        trade.push_str(&format!("{},{},{value},{quantity}\n", obs.partner, obs.month));
    }

    let mut fx = String::from("currency,month,per_usd\n");
    for j in 0..params.partners {
        for (t, month) in months.iter().enumerate() {
            let rate = sim.panel.observations[j * params.months + t].ln_e.exp();
            fx.push_str(&format!("{},{month},{rate}\n", currency_code(j)));
        }
    }
    for j in 0..params.partners {
        for r in 0..params.n_instruments {
            for (t, month) in months.iter().enumerate() {
                let rate = sim.instruments[r][j * params.months + t].exp();
                fx.push_str(&format!("{},{month},{rate}\n", instrument_code(j, r)));
            }
        }
    }
    for month in &months {
        fx.push_str(&format!("CDF,{month},1\n"));
    }

    let mut lme = String::from("month,usd_per_tonne\n");
    for (t, month) in months.iter().enumerate() {
        lme.push_str(&format!("{month},{}\n", sim.panel.observations[t].ln_p_lme.exp()));
    }

    let regimes = format!(
        "name,start,end\nAll,{},{}\n",
        months[0],
        months.last().unwrap()
    );
    (trade, fx, lme, regimes)
}

#[test]
fn csv_round_trip_preserves_the_panel() {
    let params = DgpParams::baseline(-3.47, 0.0, 4, 24);
    let sim = simulate_panel(&params, 31).unwrap();
    let (trade_csv, fx_csv, lme_csv, regimes_csv) = export_csvs(&params, 31);

    let window = SampleWindow::new(params.start, Month::from_index(params.start.index() + 23))
        .unwrap();
    let trade = parse_trade::<f64, _>(trade_csv.as_bytes(), "trade.csv", &window).unwrap();
    assert_eq!(trade.records.len(), sim.panel.len());
    assert_eq!(trade.dropped_nonpositive, 0);
    let fx = parse_fx::<f64, _>(fx_csv.as_bytes(), "fx.csv").unwrap();
    let lme = parse_lme::<f64, _>(lme_csv.as_bytes(), "lme.csv").unwrap();
    let regimes = parse_regimes(regimes_csv.as_bytes(), "regimes.csv").unwrap();
    validate_regimes(&regimes, &window).unwrap();

    let currencies: CurrencyMap = (0..params.partners)
        .map(|j| (params.partner_code(j), currency_code(j)))
        .collect();
    let panel = build_panel(&trade.records, &fx, &lme, &regimes, &currencies, "CDF").unwrap();
    assert_eq!(panel.len(), sim.panel.len());
    for (a, b) in panel.observations.iter().zip(&sim.panel.observations) {
        assert_eq!(a.partner, b.partner);
        assert_eq!(a.month, b.month);
        assert!((a.ln_x - b.ln_x).abs() < 1e-12, "ln_x drift {} vs {}", a.ln_x, b.ln_x);
        assert!((a.ln_e - b.ln_e).abs() < 1e-12);
        assert!((a.ln_p_lme - b.ln_p_lme).abs() < 1e-12);
        let (ua, ub) = (a.ln_uv.unwrap(), b.ln_uv.unwrap());
        assert!((ua - ub).abs() < 1e-12);
    }
}

#[test]
fn full_pipeline_recovers_the_demand_elasticity() {
    // Exogenous-rate configuration so the correlation screen can see the
    // latent factor; long panel to pin the estimate down.
    let mut params = DgpParams::baseline(-3.47, 0.0, 6, 120);
    params.kappa = 0.0;
    let (trade_csv, fx_csv, lme_csv, regimes_csv) = export_csvs(&params, 99);

    let window = SampleWindow::new(
        params.start,
        Month::from_index(params.start.index() + params.months as i64 - 1),
    )
    .unwrap();
    let trade = parse_trade::<f64, _>(trade_csv.as_bytes(), "trade.csv", &window).unwrap();
    let fx = parse_fx::<f64, _>(fx_csv.as_bytes(), "fx.csv").unwrap();
    let lme = parse_lme::<f64, _>(lme_csv.as_bytes(), "lme.csv").unwrap();
    let regimes = parse_regimes(regimes_csv.as_bytes(), "regimes.csv").unwrap();
    let currencies: CurrencyMap = (0..params.partners)
        .map(|j| (params.partner_code(j), currency_code(j)))
        .collect();
    let panel = build_panel(&trade.records, &fx, &lme, &regimes, &currencies, "CDF").unwrap();

    // Correlation screening with geographic exclusion, exactly as the CLI
    // runs it: partner currencies sit in one region, instrument series in
    // another, the exporter unit outside the pool.
    let mut regions = RegionMap::new();
    let by_currency = fx_series(&fx);
    let mut changes = BTreeMap::new();
    for code in by_currency.keys() {
        if code == "CDF" {
            regions.insert(code.clone(), "Home".into());
            continue;
        }
        let region = if code.starts_with('C') { "East" } else { "West" };
        regions.insert(code.clone(), region.into());
        changes.insert(code.clone(), log_changes_series(&by_currency[code]).unwrap());
    }
    let mut extra = elastiv::estimator::ExtraColumns::new();
    let mut instrument_names = Vec::new();
    for r in 0..2usize {
        instrument_names.push(format!("iv{}", r + 1));
        extra.insert(format!("iv{}", r + 1), vec![None; panel.len()]);
    }
    let exporter = by_currency.get("CDF").unwrap();
    for j in 0..params.partners {
        let target = currency_code(j);
        let assignment = select_instruments(&target, &changes, &regions, 2).unwrap();
        // With an exogenous rate the screen finds this partner's own
        // instrument series.
        for choice in &assignment.instruments {
            assert!(
                choice.currency.starts_with(&format!("Z{:03}", j + 1)),
                "partner {j} got instrument {}",
                choice.currency
            );
            assert_ne!(choice.region, "East");
        }
        let partner = params.partner_code(j);
        for (row, obs) in panel.observations.iter().enumerate() {
            if obs.partner != partner {
                continue;
            }
            for (r, choice) in assignment.instruments.iter().enumerate() {
                let quote = by_currency[&choice.currency][&obs.month];
                let base = exporter[&obs.month];
                let value = cross_rate(quote, base).unwrap().ln();
                extra.get_mut(&format!("iv{}", r + 1)).unwrap()[row] = Some(value);
            }
        }
    }

    let spec = EstimationSpec::reduced_form(instrument_names, 2);
    let result = fe_iv(&panel, &extra, &spec).unwrap();
    let (beta, se) = result.coef("ln_e").unwrap();
    let eta = eta_from_beta(beta, 0.0).unwrap();
    assert!(
        (eta - (-3.47)).abs() < 4.0 * se,
        "eta = {eta} too far from -3.47 (se = {se})"
    );
    let diag = result.diagnostics.as_ref().unwrap();
    assert!(diag.weak_id_f > 16.38, "weak F = {}", diag.weak_id_f);
    assert!(diag.underid_lm_p < 0.01);
    let overid_p = diag.overid.p.unwrap();
    assert!(overid_p > 0.01, "overid p = {overid_p}");

    // The report built from this result carries every table number in the
    // CSV at full precision.
    let cells = report::collect_cells(&[result], &[0.0]).unwrap();
    let csv = report::results_csv(&cells);
    let table = report::format_results_table(&cells, &["all".to_string()], &[0.0]);
    for line in csv.lines().skip(1) {
        let mut parts = line.splitn(3, ',');
        let (_, item, raw) =
            (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap());
        if item == "coef_ln_e" {
            let v: f64 = raw.parse().unwrap();
            assert_eq!(v, beta);
            assert!(table.contains(&format!("{v:.2}")));
        }
    }

    // Supply side on the same panel: flat-supply truth, so the slope is
    // insignificant and near zero.
    let supply = estimate_supply(&panel, 2).unwrap();
    assert!(
        supply.omega_hat.abs() < 4.0 * supply.omega_se + 0.02,
        "omega_hat = {} (se {})",
        supply.omega_hat,
        supply.omega_se
    );
    assert!(supply.weak_id_f > 10.0);
}

#[test]
fn f32_pipeline_matches_f64_loosely() {
    // The stack is generic over the scalar; a reduced-precision run lands
    // near the f64 estimate.
    let params64 = DgpParams::<f64>::baseline(-2.5, 0.0, 4, 30);
    let sim64 = simulate_panel(&params64, 7).unwrap();
    let params32 = DgpParams::<f32>::baseline(-2.5, 0.0, 4, 30);
    let sim32 = simulate_panel(&params32, 7).unwrap();

    let spec64 = EstimationSpec::reduced_form(sim64.instrument_names(), 2);
    let r64 = fe_iv(&sim64.panel, &sim64.instrument_columns(), &spec64).unwrap();
    let spec32 = EstimationSpec::reduced_form(sim32.instrument_names(), 2);
    let r32 = fe_iv(&sim32.panel, &sim32.instrument_columns(), &spec32).unwrap();

    let (b64, _) = r64.coef("ln_e").unwrap();
    let (b32, _) = r32.coef("ln_e").unwrap();
    assert!(
        (b64 - b32 as f64).abs() < 1e-3,
        "f64 {b64} vs f32 {b32}"
    );
}
