//! Synthetic data generator for the structural demand/supply system, plus
//! the Monte Carlo harness that validates the estimators against known
//! parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::diagnostics::wald_eta_zero;
use crate::error::{Error, Result};
use crate::estimator::{fe_iv, fe_ols, EstimationSpec, ExtraColumns};
use crate::month::Month;
use crate::panel::{Panel, PanelObservation};
use crate::scalar::{conv, conv_usize, Scalar};
use crate::structural::estimate_supply;

/// Parameters of the synthetic structural system.
///
/// The latent factor drives both the bilateral rate and its instruments
/// (relevance); instrument noise is independent of the structural shocks
/// (exclusion); `kappa` loads the demand shock into the rate, creating the
/// endogeneity the IV step is meant to fix.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpParams<T: Scalar> {
    /// Demand elasticity.
    pub eta: T,
    /// Inverse-supply slope in value terms, in [0, 1).
    pub omega: T,
    /// Inverse-supply intercept.
    pub delta: T,
    /// Demand intercept per partner (length = `partners`).
    pub alpha: Vec<T>,
    /// Iceberg wedge per partner (each >= 1).
    pub tau: Vec<T>,
    /// Demand shock scale.
    pub sigma_u: T,
    /// Supply shock scale (common across partners within a month).
    pub sigma_v: T,
    /// Random-walk innovation scale of the latent rate factor.
    pub fx_sigma: T,
    /// Idiosyncratic noise added to the log rate.
    pub fx_noise: T,
    /// Loading of the latent factor into each instrument.
    pub instrument_loading: T,
    /// Instrument noise scale (controls relevance).
    pub instrument_sigma: T,
    /// Endogeneity knob: loading of the demand shock into the log rate.
    pub kappa: T,
    /// Loading of the log commodity price into the demand intercept.
    pub lme_loading: T,
    /// Random-walk innovation scale of the log commodity price.
    pub lme_sigma: T,
    /// Log commodity price starting level.
    pub lme_base: T,
    pub partners: usize,
    pub months: usize,
    pub n_instruments: usize,
    pub start: Month,
}

impl<T: Scalar> DgpParams<T> {
    /// A baseline configuration with spread intercepts and common wedges.
    pub fn baseline(eta: T, omega: T, partners: usize, months: usize) -> Self {
        let alpha = (0..partners)
            .map(|j| conv::<T>(8.0) + conv::<T>(0.4) * conv_usize::<T>(j))
            .collect();
        let tau = vec![conv::<T>(1.2); partners];
        Self {
            eta,
            omega,
            delta: conv::<T>(0.5),
            alpha,
            tau,
            sigma_u: conv::<T>(0.3),
            sigma_v: conv::<T>(0.1),
            fx_sigma: conv::<T>(0.08),
            fx_noise: conv::<T>(0.02),
            instrument_loading: T::one(),
            instrument_sigma: conv::<T>(0.02),
            kappa: T::zero(),
            lme_loading: conv::<T>(0.5),
            lme_sigma: conv::<T>(0.05),
            lme_base: conv::<T>(9.9),
            partners,
            months,
            n_instruments: 2,
            start: Month::new(2010, 5).unwrap(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.partners == 0 {
            return Err(Error::Config("partners must be >= 1".into()));
        }
        if self.months < 3 {
            return Err(Error::Config("months must be >= 3".into()));
        }
        if self.n_instruments == 0 {
            return Err(Error::Config("n_instruments must be >= 1".into()));
        }
        if self.alpha.len() != self.partners || self.tau.len() != self.partners {
            return Err(Error::Config(format!(
                "alpha/tau need one entry per partner ({} expected)",
                self.partners
            )));
        }
        if self.omega < T::zero() || self.omega >= T::one() {
            return Err(Error::Config(format!("omega must lie in [0, 1), got {}", self.omega)));
        }
        for (name, v) in [
            ("sigma_u", self.sigma_u),
            ("sigma_v", self.sigma_v),
            ("fx_sigma", self.fx_sigma),
            ("fx_noise", self.fx_noise),
            ("instrument_sigma", self.instrument_sigma),
            ("lme_sigma", self.lme_sigma),
        ] {
            if v < T::zero() {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.tau.iter().any(|t| *t < T::one()) {
            return Err(Error::Config("every tau must be >= 1".into()));
        }
        if self.reduced_form_denominator().abs() < conv::<T>(1e-12) {
            return Err(Error::Singular(
                "1 - omega*(1+eta) = 0; the system cannot be solved for the export value".into(),
            ));
        }
        Ok(())
    }

    fn reduced_form_denominator(&self) -> T {
        T::one() - self.omega * (T::one() + self.eta)
    }

    /// Rate coefficient of the implied reduced form.
    pub fn true_beta(&self) -> T {
        (T::one() + self.eta) / self.reduced_form_denominator()
    }

    pub fn partner_code(&self, j: usize) -> String {
        format!("P{:03}", j + 1)
    }
}

/// Hidden truth retained alongside a generated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth<T: Scalar> {
    pub true_beta: T,
    /// Demand shock per observation, in panel row order.
    pub demand_shocks: Vec<T>,
    /// Supply shock per month index 0..months.
    pub supply_shocks: Vec<T>,
    /// Log exporter price per observation.
    pub ln_p_exp: Vec<T>,
}

/// A generated panel with its instruments and hidden truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanel<T: Scalar> {
    pub panel: Panel<T>,
    /// Instrument columns aligned with the panel rows.
    pub instruments: Vec<Vec<T>>,
    pub truth: SyntheticTruth<T>,
}

impl<T: Scalar> SyntheticPanel<T> {
    /// Instrument columns in the form the design builder takes.
    pub fn instrument_columns(&self) -> ExtraColumns<T> {
        let mut extra = ExtraColumns::new();
        for (r, col) in self.instruments.iter().enumerate() {
            extra.insert(
                instrument_name(r),
                col.iter().map(|v| Some(*v)).collect(),
            );
        }
        extra
    }

    pub fn instrument_names(&self) -> Vec<String> {
        (0..self.instruments.len()).map(instrument_name).collect()
    }
}

pub fn instrument_name(r: usize) -> String {
    format!("iv{}", r + 1)
}

fn draw<T: Scalar, R: Rng>(rng: &mut R) -> T {
    conv::<T>(rng.sample::<f64, _>(StandardNormal))
}

/// Simulates the structural system.
///
/// For each partner and month the latent factor follows a driftless random
/// walk; the log rate adds the endogeneity loading and noise; instruments
/// load on the factor with independent noise. The export value solves the
/// demand/supply system in closed form, and the exporter price and unit
/// value follow from the inverse supply relation.
pub fn simulate_panel<T: Scalar>(params: &DgpParams<T>, seed: u64) -> Result<SyntheticPanel<T>> {
    params.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let j_count = params.partners;
    let t_count = params.months;
    let denom = params.reduced_form_denominator();
    let one_plus_eta = T::one() + params.eta;

    // Common series first, in a fixed draw order.
    let mut lme = Vec::with_capacity(t_count);
    let mut level = params.lme_base;
    for _ in 0..t_count {
        level += params.lme_sigma * draw::<T, _>(&mut rng);
        lme.push(level);
    }
    let supply_shocks: Vec<T> =
        (0..t_count).map(|_| params.sigma_v * draw::<T, _>(&mut rng)).collect();

    let mut observations = Vec::with_capacity(j_count * t_count);
    let mut instruments: Vec<Vec<T>> =
        vec![Vec::with_capacity(j_count * t_count); params.n_instruments];
    let mut demand_shocks = Vec::with_capacity(j_count * t_count);
    let mut ln_p_exp_all = Vec::with_capacity(j_count * t_count);

    for j in 0..j_count {
        let partner = params.partner_code(j);
        let u_j: Vec<T> = (0..t_count).map(|_| params.sigma_u * draw::<T, _>(&mut rng)).collect();
        let mut factor = Vec::with_capacity(t_count);
        let mut f = T::zero();
        for _ in 0..t_count {
            f += params.fx_sigma * draw::<T, _>(&mut rng);
            factor.push(f);
        }
        let e_noise: Vec<T> =
            (0..t_count).map(|_| params.fx_noise * draw::<T, _>(&mut rng)).collect();
        let z_noise: Vec<Vec<T>> = (0..params.n_instruments)
            .map(|_| (0..t_count).map(|_| params.instrument_sigma * draw::<T, _>(&mut rng)).collect())
            .collect();

        for t in 0..t_count {
            let u = u_j[t];
            let v = supply_shocks[t];
            let ln_e = factor[t] + params.kappa * u + e_noise[t];
            let alpha_jt = params.alpha[j] + params.lme_loading * lme[t];
            let ln_x = (alpha_jt + one_plus_eta * (ln_e + params.delta + v) + u) / denom;
            let ln_p_exp = params.delta + params.omega * ln_x + v;
            let ln_uv = ln_p_exp + params.tau[j].ln();
            observations.push(PanelObservation {
                partner: partner.clone(),
                month: Month::from_index(params.start.index() + t as i64),
                ln_x,
                ln_e,
                ln_p_lme: lme[t],
                ln_uv: Some(ln_uv),
                regime: "All".into(),
            });
            for (r, noise) in z_noise.iter().enumerate() {
                instruments[r].push(params.instrument_loading * factor[t] + noise[t]);
            }
            demand_shocks.push(u);
            ln_p_exp_all.push(ln_p_exp);
        }
    }

    Ok(SyntheticPanel {
        panel: Panel { observations },
        instruments,
        truth: SyntheticTruth {
            true_beta: params.true_beta(),
            demand_shocks,
            supply_shocks,
            ln_p_exp: ln_p_exp_all,
        },
    })
}

/// Which estimators a Monte Carlo run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McEstimator {
    FeIv,
    FeOls,
    /// Both reduced-form estimators on the same draws, for bias contrasts.
    IvAndOls,
    Supply,
}

/// Monte Carlo run settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSpec {
    pub reps: usize,
    pub bandwidth: usize,
    pub estimator: McEstimator,
}

/// Location/dispersion summary of one estimated parameter across reps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McStat<T: Scalar> {
    pub mean: T,
    pub sd: T,
    /// Monte Carlo standard error of the mean.
    pub mc_se: T,
}

impl<T: Scalar> McStat<T> {
    fn from_samples(samples: &[T]) -> Option<Self> {
        if samples.len() < 2 {
            return None;
        }
        let n = conv_usize::<T>(samples.len());
        let mean = samples.iter().fold(T::zero(), |s, v| s + *v) / n;
        let ss = samples.iter().fold(T::zero(), |s, v| s + (*v - mean) * (*v - mean));
        let sd = (ss / (n - T::one())).sqrt();
        Some(Self {
            mean,
            sd,
            mc_se: sd / n.sqrt(),
        })
    }
}

/// Per-estimator Monte Carlo outcome for the reduced-form coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McReducedForm<T: Scalar> {
    pub beta: McStat<T>,
    /// Share of reps rejecting the zero-elasticity null at the 5% level.
    pub wald_eta_zero_reject_5: T,
    /// Share of reps rejecting instrument validity at 5%, when over-identified.
    pub overid_reject_5: Option<T>,
}

/// Supply-side Monte Carlo outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSupply<T: Scalar> {
    pub omega: McStat<T>,
    /// Share of reps where omega is significant at the 5% level.
    pub omega_significant_5: T,
}

/// Monte Carlo summary across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary<T: Scalar> {
    pub reps: usize,
    pub failures: usize,
    pub true_beta: T,
    pub true_omega: T,
    pub fe_iv: Option<McReducedForm<T>>,
    pub fe_ols: Option<McReducedForm<T>>,
    pub supply: Option<McSupply<T>>,
}

/// SplitMix64 step, used to derive independent per-replication seeds.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `rep` under `master`; deterministic and independent
/// of execution order.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    splitmix64(master ^ (rep as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct RepOutcome<T: Scalar> {
    iv_beta: Option<T>,
    iv_wald_reject: Option<bool>,
    iv_overid_reject: Option<bool>,
    ols_beta: Option<T>,
    ols_wald_reject: Option<bool>,
    omega: Option<T>,
    omega_significant: Option<bool>,
}

fn run_rep<T: Scalar>(
    params: &DgpParams<T>,
    spec: &McSpec,
    seed: u64,
) -> Result<RepOutcome<T>> {
    let sim = simulate_panel(params, seed)?;
    let mut outcome = RepOutcome {
        iv_beta: None,
        iv_wald_reject: None,
        iv_overid_reject: None,
        ols_beta: None,
        ols_wald_reject: None,
        omega: None,
        omega_significant: None,
    };
    let five_pct = conv::<T>(0.05);
    let run_iv = matches!(spec.estimator, McEstimator::FeIv | McEstimator::IvAndOls);
    let run_ols = matches!(spec.estimator, McEstimator::FeOls | McEstimator::IvAndOls);
    if run_iv {
        let est_spec =
            EstimationSpec::reduced_form(sim.instrument_names(), spec.bandwidth);
        let extra = sim.instrument_columns();
        let result = fe_iv(&sim.panel, &extra, &est_spec)?;
        let (beta, _) = result.coef("ln_e").expect("rate coefficient present");
        outcome.iv_beta = Some(beta);
        if let Some(diag) = &result.diagnostics {
            outcome.iv_wald_reject = Some(diag.wald_eta_zero.p < five_pct);
            outcome.iv_overid_reject = diag.overid.p.map(|p| p < five_pct);
        }
    }
    if run_ols {
        let result = fe_ols(&sim.panel, spec.bandwidth, None)?;
        let idx = result.names.iter().position(|n| n == "ln_e").expect("rate column");
        let beta = result.beta[idx];
        let var = result.vcov[(idx, idx)];
        outcome.ols_beta = Some(beta);
        outcome.ols_wald_reject = Some(wald_eta_zero(beta, var)?.p < five_pct);
    }
    if matches!(spec.estimator, McEstimator::Supply) {
        let supply = estimate_supply(&sim.panel, spec.bandwidth)?;
        outcome.omega = Some(supply.omega_hat);
        outcome.omega_significant = Some(supply.omega_p < five_pct);
    }
    Ok(outcome)
}

fn share<T: Scalar>(hits: usize, total: usize) -> T {
    if total == 0 {
        T::zero()
    } else {
        conv_usize::<T>(hits) / conv_usize::<T>(total)
    }
}

/// Runs the Monte Carlo and summarizes the replications. Failed replications
/// are counted and excluded from the summary statistics.
pub fn monte_carlo<T: Scalar>(
    params: &DgpParams<T>,
    spec: &McSpec,
    master_seed: u64,
) -> Result<McSummary<T>> {
    if spec.reps < 2 {
        return Err(Error::Config(format!(
            "Monte Carlo needs at least 2 replications, got {}",
            spec.reps
        )));
    }
    params.validate()?;
    let mut failures = 0usize;
    let mut iv_betas = Vec::new();
    let mut iv_wald_hits = 0usize;
    let mut iv_wald_total = 0usize;
    let mut overid_hits = 0usize;
    let mut overid_total = 0usize;
    let mut ols_betas = Vec::new();
    let mut ols_wald_hits = 0usize;
    let mut ols_wald_total = 0usize;
    let mut omegas = Vec::new();
    let mut omega_sig_hits = 0usize;
    let mut omega_sig_total = 0usize;

    for rep in 0..spec.reps {
        let seed = replication_seed(master_seed, rep);
        match run_rep(params, spec, seed) {
            Ok(outcome) => {
                if let Some(b) = outcome.iv_beta {
                    iv_betas.push(b);
                }
                if let Some(hit) = outcome.iv_wald_reject {
                    iv_wald_total += 1;
                    iv_wald_hits += usize::from(hit);
                }
                if let Some(hit) = outcome.iv_overid_reject {
                    overid_total += 1;
                    overid_hits += usize::from(hit);
                }
                if let Some(b) = outcome.ols_beta {
                    ols_betas.push(b);
                }
                if let Some(hit) = outcome.ols_wald_reject {
                    ols_wald_total += 1;
                    ols_wald_hits += usize::from(hit);
                }
                if let Some(w) = outcome.omega {
                    omegas.push(w);
                }
                if let Some(hit) = outcome.omega_significant {
                    omega_sig_total += 1;
                    omega_sig_hits += usize::from(hit);
                }
            }
            Err(_) => failures += 1,
        }
    }

    let fe_iv_summary = McStat::from_samples(&iv_betas).map(|beta| McReducedForm {
        beta,
        wald_eta_zero_reject_5: share(iv_wald_hits, iv_wald_total),
        overid_reject_5: (overid_total > 0).then(|| share(overid_hits, overid_total)),
    });
    let fe_ols_summary = McStat::from_samples(&ols_betas).map(|beta| McReducedForm {
        beta,
        wald_eta_zero_reject_5: share(ols_wald_hits, ols_wald_total),
        overid_reject_5: None,
    });
    let supply_summary = McStat::from_samples(&omegas).map(|omega| McSupply {
        omega,
        omega_significant_5: share(omega_sig_hits, omega_sig_total),
    });

    Ok(McSummary {
        reps: spec.reps,
        failures,
        true_beta: params.true_beta(),
        true_omega: params.omega,
        fe_iv: fe_iv_summary,
        fe_ols: fe_ols_summary,
        supply: supply_summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn shockless_flat_supply_has_closed_form() {
        let mut params = DgpParams::<f64>::baseline(-3.47, 0.0, 3, 12);
        params.sigma_u = 0.0;
        params.sigma_v = 0.0;
        params.lme_loading = 0.0;
        let sim = simulate_panel(&params, 9).unwrap();
        for (row, obs) in sim.panel.observations.iter().enumerate() {
            let j = row / params.months;
            let expected = params.alpha[j] + (1.0 + params.eta) * (obs.ln_e + params.delta);
            assert_relative_eq!(obs.ln_x, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn plug_back_identities_recover_the_drawn_shocks() {
        let mut params = DgpParams::<f64>::baseline(-3.47, 0.089, 4, 20);
        params.kappa = 0.4;
        let sim = simulate_panel(&params, 1234).unwrap();
        for (row, obs) in sim.panel.observations.iter().enumerate() {
            let j = row / params.months;
            let t = row % params.months;
            let alpha_jt = params.alpha[j] + params.lme_loading * obs.ln_p_lme;
            // Demand relation in value terms.
            let u = obs.ln_x - alpha_jt - (1.0 + params.eta) * (obs.ln_e + sim.truth.ln_p_exp[row]);
            assert_relative_eq!(u, sim.truth.demand_shocks[row], epsilon = 1e-10);
            // Inverse supply relation.
            let v = sim.truth.ln_p_exp[row] - params.delta - params.omega * obs.ln_x;
            assert_relative_eq!(v, sim.truth.supply_shocks[t], epsilon = 1e-10);
            // Unit value carries the iceberg wedge.
            let uv = obs.ln_uv.unwrap();
            assert_relative_eq!(
                uv,
                sim.truth.ln_p_exp[row] + params.tau[j].ln(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let params = DgpParams::<f64>::baseline(-2.0, 0.1, 3, 15);
        let a = simulate_panel(&params, 77).unwrap();
        let b = simulate_panel(&params, 77).unwrap();
        assert_eq!(a, b);
        let c = simulate_panel(&params, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn law_of_one_price_holds_exactly_under_flat_supply() {
        let params = DgpParams::<f64>::baseline(-3.47, 0.0, 5, 10);
        let sim = simulate_panel(&params, 5).unwrap();
        // With omega = 0 the exporter price is delta + v_t, common across
        // partners within each month.
        for t in 0..params.months {
            let reference = sim.truth.ln_p_exp[t];
            for j in 1..params.partners {
                let row = j * params.months + t;
                assert_eq!(sim.truth.ln_p_exp[row], reference);
            }
        }
    }

    #[test]
    fn singular_configuration_is_rejected() {
        // omega*(1+eta) = 1 at eta = 1/omega - 1.
        let params = DgpParams::<f64>::baseline(9.0, 0.1, 2, 10);
        assert!(matches!(simulate_panel(&params, 1), Err(Error::Singular(_))));
    }

    #[test]
    fn validation_rejects_bad_scales_and_sizes() {
        let mut params = DgpParams::<f64>::baseline(-2.0, 0.0, 2, 10);
        params.sigma_u = -0.1;
        assert!(params.validate().is_err());
        let mut params = DgpParams::<f64>::baseline(-2.0, 0.0, 2, 2);
        params.months = 2;
        assert!(params.validate().is_err());
        let mut params = DgpParams::<f64>::baseline(-2.0, 0.0, 2, 10);
        params.tau[0] = 0.5;
        assert!(params.validate().is_err());
    }

    #[test]
    fn reduced_form_regression_recovers_true_beta_in_the_large_t_limit() {
        // Long panel, exogenous rate: the within regression of ln_x on ln_e
        // must approach (1+eta)/(1-omega(1+eta)).
        let mut params = DgpParams::<f64>::baseline(-3.47, 0.089, 2, 2000);
        params.kappa = 0.0;
        let sim = simulate_panel(&params, 3141).unwrap();
        let result = fe_ols(&sim.panel, 0, None).unwrap();
        let (beta, _) = result.coef("ln_e").unwrap();
        assert!(
            (beta - sim.truth.true_beta).abs() < 0.05,
            "beta = {beta}, truth = {}",
            sim.truth.true_beta
        );
    }

    #[test]
    fn replication_seeds_are_distinct_and_deterministic() {
        let a: Vec<u64> = (0..50).map(|r| replication_seed(42, r)).collect();
        let b: Vec<u64> = (0..50).map(|r| replication_seed(42, r)).collect();
        assert_eq!(a, b);
        let mut dedup = a.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), a.len());
    }

    #[test]
    fn monte_carlo_smoke_run_summarizes_iv_and_ols() {
        let mut params = DgpParams::<f64>::baseline(-3.47, 0.0, 4, 24);
        params.kappa = 0.6;
        let spec = McSpec {
            reps: 20,
            bandwidth: 2,
            estimator: McEstimator::IvAndOls,
        };
        let summary = monte_carlo(&params, &spec, 99).unwrap();
        assert_eq!(summary.failures, 0);
        let iv = summary.fe_iv.unwrap();
        let ols = summary.fe_ols.unwrap();
        // With a strong endogeneity loading the OLS bias dominates.
        let iv_bias = (iv.beta.mean - summary.true_beta).abs();
        let ols_bias = (ols.beta.mean - summary.true_beta).abs();
        assert!(ols_bias > iv_bias, "ols bias {ols_bias} vs iv bias {iv_bias}");
    }

    #[test]
    fn monte_carlo_rejects_single_rep() {
        let params = DgpParams::<f64>::baseline(-2.0, 0.0, 3, 12);
        let spec = McSpec {
            reps: 1,
            bandwidth: 2,
            estimator: McEstimator::FeIv,
        };
        assert!(monte_carlo(&params, &spec, 1).is_err());
    }

    #[test]
    fn failed_replications_are_counted_not_dropped() {
        // A bandwidth as long as the within-group series makes the HAC step
        // fail in every replication; the harness must record that.
        let params = DgpParams::<f64>::baseline(-2.0, 0.0, 3, 4);
        let spec = McSpec {
            reps: 5,
            bandwidth: 4,
            estimator: McEstimator::FeIv,
        };
        let summary = monte_carlo(&params, &spec, 2).unwrap();
        assert_eq!(summary.failures, 5);
        assert!(summary.fe_iv.is_none());
    }
}
