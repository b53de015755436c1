//! Structural recovery: mapping the reduced-form rate coefficient to the
//! demand elasticity, the supply-slope/elasticity correspondence, the
//! attenuation bound, and the supply-side 2SLS pipeline on unit values.

use std::collections::BTreeMap;

use crate::diagnostics::{underid_lm, weak_id_f};
use crate::error::{Error, Result};
use crate::estimator::{build_design, hac_vcov, tsls, EstimationSpec, ExtraColumns};
use crate::instruments::{lagged_instrument, GapPolicy};
use crate::panel::{MonthSeries, Panel};
use crate::scalar::{conv, Scalar};

/// Structural parameters of the demand/supply system.
///
/// `omega` is the inverse-supply slope in value terms, tied to the supply
/// elasticity by omega * (1 + epsilon) = 1; `tau` holds the per-partner
/// iceberg wedges (>= 1), which the estimation absorbs into intercepts.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralParams<T: Scalar> {
    pub eta: T,
    pub omega: T,
    pub epsilon: Option<T>,
    pub delta: T,
    pub gamma_lme: T,
    pub alpha: BTreeMap<String, T>,
    pub tau: BTreeMap<String, T>,
}

impl<T: Scalar> StructuralParams<T> {
    pub fn validate(&self) -> Result<()> {
        if let Some(eps) = self.epsilon {
            let residual = self.omega * (T::one() + eps) - T::one();
            if residual.abs() > conv::<T>(1e-12) {
                return Err(Error::Domain(format!(
                    "omega and epsilon are inconsistent: omega*(1+epsilon) - 1 = {residual}"
                )));
            }
        }
        for (partner, tau) in &self.tau {
            if *tau < T::one() {
                return Err(Error::Domain(format!(
                    "iceberg wedge for {partner} is {tau}, must be >= 1"
                )));
            }
        }
        Ok(())
    }
}

/// Demand elasticity implied by the reduced-form rate coefficient:
/// eta = beta / (1 + omega * beta) - 1. At omega = 0 this is beta - 1.
pub fn eta_from_beta<T: Scalar>(beta: T, omega: T) -> Result<T> {
    check_omega(omega)?;
    let denom = T::one() + omega * beta;
    if denom <= T::zero() {
        return Err(Error::Singular(format!(
            "1 + omega*beta = {denom} <= 0; supply/demand configuration is inconsistent"
        )));
    }
    Ok(beta / denom - T::one())
}

/// Reduced-form rate coefficient implied by the structural parameters:
/// beta = (1 + eta) / (1 - omega * (1 + eta)).
pub fn beta_from_eta<T: Scalar>(eta: T, omega: T) -> Result<T> {
    check_omega(omega)?;
    let denom = T::one() - omega * (T::one() + eta);
    if denom.is_zero() {
        return Err(Error::Singular(
            "1 - omega*(1+eta) = 0; the reduced form is undefined".into(),
        ));
    }
    Ok((T::one() + eta) / denom)
}

fn check_omega<T: Scalar>(omega: T) -> Result<()> {
    if omega < T::zero() || omega >= T::one() {
        return Err(Error::Domain(format!("omega must lie in [0, 1), got {omega}")));
    }
    Ok(())
}

/// Supply elasticity from the inverse-supply slope: epsilon = 1/omega - 1.
///
/// omega = 0 corresponds to infinitely elastic supply and is rejected here;
/// callers report that case symbolically.
pub fn epsilon_from_omega<T: Scalar>(omega: T) -> Result<T> {
    if omega <= T::zero() || omega > T::one() {
        return Err(Error::Domain(format!(
            "epsilon is defined for omega in (0, 1], got {omega}"
        )));
    }
    Ok(T::one() / omega - T::one())
}

/// Comparison of the reduced-form magnitude against the structural one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttenuationReport<T: Scalar> {
    pub beta_abs: T,
    pub one_plus_eta_abs: T,
    pub bound_holds: bool,
    /// False when the preconditions (eta < -1, omega > 0) fail.
    pub applicable: bool,
}

/// Checks the conservative-bound inequality |beta| < |1 + eta| for elastic
/// demand and upward-sloping inverse supply.
pub fn attenuation_report<T: Scalar>(eta: T, omega: T) -> Result<AttenuationReport<T>> {
    let one_plus_eta = T::one() + eta;
    if one_plus_eta >= T::zero() || omega <= T::zero() {
        return Ok(AttenuationReport {
            beta_abs: T::zero(),
            one_plus_eta_abs: one_plus_eta.abs(),
            bound_holds: false,
            applicable: false,
        });
    }
    let beta = beta_from_eta(eta, omega)?;
    let beta_abs = beta.abs();
    let one_plus_eta_abs = one_plus_eta.abs();
    Ok(AttenuationReport {
        beta_abs,
        one_plus_eta_abs,
        bound_holds: beta_abs < one_plus_eta_abs,
        applicable: true,
    })
}

/// Supply-side 2SLS estimates on the unit-value subsample.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplyResult<T: Scalar> {
    pub omega_hat: T,
    pub omega_se: T,
    pub omega_p: T,
    pub gamma_hat: T,
    pub gamma_se: T,
    pub intercept: T,
    pub intercept_se: T,
    pub n: usize,
    pub n_groups: usize,
    pub r2_centered: T,
    pub weak_id_f: T,
    pub underid_lm_p: T,
    /// Implied supply elasticity, when omega_hat lands in (0, 1].
    pub epsilon_hat: Option<T>,
}

/// Inverse-supply 2SLS: log unit value on log export value (instrumented by
/// the one-month-lagged log rate) and the log commodity price, with a
/// constant and HAC errors. Restricted to rows carrying a unit value.
pub fn estimate_supply<T: Scalar>(panel: &Panel<T>, bandwidth: usize) -> Result<SupplyResult<T>> {
    if panel.is_empty() {
        return Err(Error::Data("empty panel for supply estimation".into()));
    }
    if !panel.observations.iter().any(|o| o.ln_uv.is_some()) {
        return Err(Error::Data(
            "no unit values in the panel; supply estimation needs positive quantities".into(),
        ));
    }
    // One-month lag of the log rate, per partner.
    let mut by_partner: BTreeMap<&str, MonthSeries<T>> = BTreeMap::new();
    for obs in &panel.observations {
        by_partner.entry(obs.partner.as_str()).or_default().insert(obs.month, obs.ln_e);
    }
    let mut lagged: BTreeMap<&str, MonthSeries<T>> = BTreeMap::new();
    for (partner, series) in &by_partner {
        lagged.insert(partner, lagged_instrument(series, GapPolicy::Drop)?);
    }
    let lag_column: Vec<Option<T>> = panel
        .observations
        .iter()
        .map(|o| lagged.get(o.partner.as_str()).and_then(|s| s.get(&o.month)).copied())
        .collect();
    let mut extra = ExtraColumns::new();
    extra.insert("lag_ln_e".into(), lag_column);

    let spec = EstimationSpec {
        dependent: "ln_uv".into(),
        endogenous: Some("ln_x".into()),
        exogenous: vec!["const".into(), "ln_p_lme".into()],
        instruments: vec!["lag_ln_e".into()],
        bandwidth,
        regime: None,
    };
    let (design, _) = build_design(panel, &extra, &spec)?;
    let est = tsls(&design.y, &design.x, &design.z, &design.x_names, &design.z_names)?;
    let vcov = hac_vcov(
        &design.x,
        &design.z,
        &est.residuals,
        &design.groups,
        &design.times,
        bandwidth,
    )?;
    // x columns: [ln_x, const, ln_p_lme]
    let omega_hat = est.beta[0];
    let omega_se = vcov[(0, 0)].max(T::zero()).sqrt();
    let intercept = est.beta[1];
    let intercept_se = vcov[(1, 1)].max(T::zero()).sqrt();
    let gamma_hat = est.beta[2];
    let gamma_se = vcov[(2, 2)].max(T::zero()).sqrt();
    let omega_p = if omega_se > T::zero() {
        let t = omega_hat / omega_se;
        crate::dist::chi2_sf(t * t, 1)?
    } else {
        T::zero()
    };
    // Centered R^2 from the structural residuals.
    let n = design.n();
    let mean_y = design.y.iter().fold(T::zero(), |s, v| s + *v) / conv::<T>(n as f64);
    let tss = design.y.iter().fold(T::zero(), |s, v| s + (*v - mean_y) * (*v - mean_y));
    let rss = est.residuals.dot(&est.residuals);
    let r2_centered = if tss > T::zero() { T::one() - rss / tss } else { T::zero() };

    let weak_f = weak_id_f(&design, bandwidth)?;
    let underid_p = underid_lm(&design)?;
    let epsilon_hat = if omega_hat > T::zero() && omega_hat <= T::one() {
        Some(epsilon_from_omega(omega_hat)?)
    } else {
        None
    };

    Ok(SupplyResult {
        omega_hat,
        omega_se,
        omega_p,
        gamma_hat,
        gamma_se,
        intercept,
        intercept_se,
        n,
        n_groups: design.n_groups(),
        r2_centered,
        weak_id_f: weak_f,
        underid_lm_p: underid_p,
        epsilon_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn eta_from_beta_flat_supply_is_exactly_beta_minus_one() {
        for beta in [-26.22, 3.06, -0.47, -2.47] {
            assert_eq!(eta_from_beta(beta, 0.0).unwrap(), beta - 1.0);
        }
    }

    #[test]
    fn zero_beta_forces_unit_negative_elasticity() {
        for omega in [0.0, 0.1, 0.45] {
            assert_eq!(eta_from_beta(0.0, omega).unwrap(), -1.0);
        }
    }

    #[test]
    fn eta_from_beta_sloped_supply_matches_forward_substitution() {
        // Frozen numeric inversion target, then verified by forward map.
        let eta = eta_from_beta(-2.47, 0.089).unwrap();
        assert_relative_eq!(eta, -4.16597664611559, epsilon = 1e-10);
        let beta = beta_from_eta(eta, 0.089).unwrap();
        assert_relative_eq!(beta, -2.47, epsilon = 1e-12);
    }

    #[test]
    fn beta_from_eta_examples() {
        assert_eq!(beta_from_eta(-1.0, 0.3).unwrap(), 0.0);
        assert_eq!(beta_from_eta(-27.22, 0.0).unwrap(), -26.22);
        assert_relative_eq!(
            beta_from_eta(-3.47, 0.089).unwrap(),
            -2.02487231827386,
            epsilon = 1e-12
        );
    }

    #[test]
    fn singular_configurations_are_rejected() {
        // 1 - omega*(1+eta) = 0 at eta = 1/omega - 1.
        assert!(matches!(beta_from_eta(3.0, 0.25), Err(Error::Singular(_))));
        // Backward map outside the invertibility region.
        assert!(matches!(eta_from_beta(-20.0, 0.3), Err(Error::Singular(_))));
        // omega outside [0, 1).
        assert!(eta_from_beta(1.0, -0.1).is_err());
        assert!(beta_from_eta(1.0, 1.0).is_err());
    }

    #[test]
    fn epsilon_examples() {
        assert_relative_eq!(epsilon_from_omega(0.089).unwrap(), 10.2359550561798, epsilon = 1e-10);
        assert_eq!(epsilon_from_omega(1.0).unwrap(), 0.0);
        assert_eq!(epsilon_from_omega(0.5).unwrap(), 1.0);
        assert!(epsilon_from_omega(0.0).is_err());
        assert!(epsilon_from_omega(1.5).is_err());
    }

    #[test]
    fn omega_epsilon_round_trip() {
        for omega in [0.01f64, 0.089, 0.3, 0.77, 1.0] {
            let eps = epsilon_from_omega(omega).unwrap();
            assert!((omega * (1.0 + eps) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn attenuation_derived_example() {
        let report = attenuation_report(-3.47, 0.089).unwrap();
        assert!(report.applicable);
        assert!(report.bound_holds);
        assert_relative_eq!(report.beta_abs, 2.02487231827386, epsilon = 1e-10);
        assert_relative_eq!(report.one_plus_eta_abs, 2.47, epsilon = 1e-12);
    }

    #[test]
    fn attenuation_boundary_is_flagged_not_applicable() {
        let report = attenuation_report(-1.0, 0.5).unwrap();
        assert!(!report.applicable);
        assert!(!report.bound_holds);
    }

    #[test]
    fn attenuation_holds_on_the_grid() {
        // Exhaustive grid oracle over the applicable region.
        let mut eta = -30.0;
        while eta <= -1.01 {
            let mut omega = 0.05;
            while omega <= 0.5 {
                let report = attenuation_report(eta, omega).unwrap();
                assert!(report.applicable && report.bound_holds, "eta={eta}, omega={omega}");
                omega += 0.05;
            }
            eta += 0.37;
        }
    }

    #[test]
    fn structural_params_validation() {
        let mut params = StructuralParams::<f64> {
            eta: -3.47,
            omega: 0.089,
            epsilon: Some(1.0 / 0.089 - 1.0),
            delta: 0.5,
            gamma_lme: 1.0,
            alpha: BTreeMap::new(),
            tau: [("MY".to_string(), 1.2)].into_iter().collect(),
        };
        assert!(params.validate().is_ok());
        params.epsilon = Some(5.0);
        assert!(params.validate().is_err());
        params.epsilon = None;
        params.tau.insert("CN".into(), 0.8);
        assert!(params.validate().is_err());
    }

    proptest! {
        #[test]
        fn inversion_round_trip(eta in -30.0f64..5.0, omega in 0.0f64..0.5) {
            let denom = 1.0 - omega * (1.0 + eta);
            prop_assume!(denom > 1e-6);
            let beta = beta_from_eta(eta, omega).unwrap();
            let eta_back = eta_from_beta(beta, omega).unwrap();
            prop_assert!((eta_back - eta).abs() <= 1e-10, "eta={eta}, back={eta_back}");
        }

        #[test]
        fn attenuation_is_monotone_in_omega(eta in -30.0f64..-1.05) {
            let mut prev = beta_from_eta(eta, 0.0).unwrap().abs();
            for i in 1..10 {
                let omega = i as f64 * 0.05;
                let cur = beta_from_eta(eta, omega).unwrap().abs();
                prop_assert!(cur < prev, "not decreasing at omega={omega} for eta={eta}");
                prev = cur;
            }
        }
    }
}
