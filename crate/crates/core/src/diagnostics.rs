//! Weak-identification, under-identification, over-identification, and
//! elasticity-hypothesis tests for the IV estimates.

use nalgebra::{DMatrix, DVector};

use crate::dist::chi2_sf;
use crate::error::{Error, Result};
use crate::estimator::{bartlett_long_run, Design};
use crate::linalg::{lstsq, quad_form_inv, solve_spd};
use crate::scalar::{conv, conv_usize, Scalar};

/// Weak-instrument critical value quoted for the 10% threshold with a single
/// endogenous regressor.
pub const STOCK_YOGO_REF: f64 = 16.38;

/// Over-identification test outcome. `p` is absent in the just-identified
/// case, where the statistic is degenerate at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OveridTest<T: Scalar> {
    pub j: T,
    pub df: usize,
    pub p: Option<T>,
}

impl<T: Scalar> OveridTest<T> {
    pub fn is_just_identified(&self) -> bool {
        self.df == 0
    }
}

/// Elasticity hypothesis test outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldTest<T: Scalar> {
    pub stat: T,
    pub p: T,
}

/// The per-regime diagnostics block.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsBundle<T: Scalar> {
    pub weak_id_f: T,
    pub overid: OveridTest<T>,
    pub underid_lm_p: T,
    pub wald_eta_zero: WaldTest<T>,
    pub stock_yogo_ref: T,
}

/// Robust first-stage F statistic on the excluded instruments.
///
/// The first stage regresses the single endogenous column on the full
/// instrument matrix; its HAC covariance feeds a Wald statistic on the
/// excluded-instrument coefficients, divided by their count. With one
/// endogenous regressor this is the rank-based weak-identification F.
pub fn weak_id_f<T: Scalar>(design: &Design<T>, bandwidth: usize) -> Result<T> {
    if design.n_endog != 1 {
        return Err(Error::Identification(format!(
            "weak-identification F supports exactly one endogenous regressor, got {}",
            design.n_endog
        )));
    }
    if design.n_excluded == 0 {
        return Err(Error::Identification(
            "weak-identification F needs at least one excluded instrument".into(),
        ));
    }
    let endog: DVector<T> = design.x.column(0).into_owned();
    let pi = lstsq(&design.z, &endog, &design.z_names)?;
    let residuals = &endog - &design.z * &pi;
    // HAC covariance of the first-stage OLS coefficients.
    let mut moments = design.z.clone();
    for t in 0..moments.nrows() {
        let u = residuals[t];
        for j in 0..moments.ncols() {
            moments[(t, j)] *= u;
        }
    }
    let s_mat = bartlett_long_run(&moments, &design.groups, bandwidth)?;
    let ztz = design.z.transpose() * &design.z;
    let bread = solve_spd(&ztz, &s_mat, "Z'Z")?;
    let vcov = solve_spd(&ztz, &bread.transpose(), "Z'Z")?;
    // Wald on the excluded block.
    let q = design.n_excluded;
    let pi_excl = DVector::from_fn(q, |i, _| pi[i]);
    let v_excl = DMatrix::from_fn(q, q, |i, j| vcov[(i, j)]);
    let wald = quad_form_inv(&v_excl, &pi_excl, "first-stage coefficient covariance")?;
    Ok(wald / conv_usize::<T>(q))
}

/// HAC-weighted over-identification J test.
///
/// J = n * gbar' W^{-1} gbar with gbar the mean moment vector Z'u/n and W
/// the Bartlett long-run variance of the per-observation moments.
pub fn overid_j<T: Scalar>(
    design: &Design<T>,
    residuals: &DVector<T>,
    bandwidth: usize,
) -> Result<OveridTest<T>> {
    if design.n_excluded < design.n_endog {
        return Err(Error::Identification(
            "over-identification test needs at least as many excluded instruments as endogenous regressors"
                .into(),
        ));
    }
    let n = design.n();
    let n_scalar = conv_usize::<T>(n);
    let mut moments = design.z.clone();
    for t in 0..n {
        let u = residuals[t];
        for j in 0..moments.ncols() {
            moments[(t, j)] *= u;
        }
    }
    let s_mat = bartlett_long_run(&moments, &design.groups, bandwidth)?;
    let w = &s_mat / n_scalar;
    let gbar = (design.z.transpose() * residuals) / n_scalar;
    let j = n_scalar * quad_form_inv(&w, &gbar, "moment long-run variance")?;
    let df = design.n_excluded - design.n_endog;
    let p = if df == 0 { None } else { Some(chi2_sf(j.max(T::zero()), df)?) };
    Ok(OveridTest { j, df, p })
}

/// Under-identification LM test p-value.
///
/// Partials the included exogenous columns out of the endogenous regressor
/// and the excluded instruments, then refers n * R-squared of the residual
/// regression to chi-squared with one degree of freedom per instrument.
pub fn underid_lm<T: Scalar>(design: &Design<T>) -> Result<T> {
    if design.n_endog != 1 {
        return Err(Error::Identification(format!(
            "under-identification LM supports exactly one endogenous regressor, got {}",
            design.n_endog
        )));
    }
    if design.n_excluded == 0 {
        return Err(Error::Identification(
            "under-identification LM needs at least one excluded instrument".into(),
        ));
    }
    let n = design.n();
    let n_exog = design.x.ncols() - design.n_endog;
    let endog: DVector<T> = design.x.column(0).into_owned();
    let excluded = design.z.columns(0, design.n_excluded).into_owned();
    let (endog_resid, excl_resid) = if n_exog > 0 {
        let exog = design.x.columns(design.n_endog, n_exog).into_owned();
        let exog_names = design.x_names[design.n_endog..].to_vec();
        let coef_e = lstsq(&exog, &endog, &exog_names)?;
        let endog_resid = &endog - &exog * coef_e;
        let mut excl_resid = excluded.clone();
        for j in 0..design.n_excluded {
            let col: DVector<T> = excluded.column(j).into_owned();
            let coef = lstsq(&exog, &col, &exog_names)?;
            excl_resid.set_column(j, &(&col - &exog * coef));
        }
        (endog_resid, excl_resid)
    } else {
        (endog, excluded)
    };
    let tss = endog_resid.dot(&endog_resid);
    if tss <= T::zero() {
        return Err(Error::Degenerate(
            "endogenous regressor has no variation after partialling".into(),
        ));
    }
    let excl_names: Vec<String> = design.z_names[..design.n_excluded].to_vec();
    let gamma = lstsq(&excl_resid, &endog_resid, &excl_names)?;
    let fit_resid = &endog_resid - &excl_resid * gamma;
    let rss = fit_resid.dot(&fit_resid);
    let r2 = (T::one() - rss / tss).max(T::zero());
    let lm = conv_usize::<T>(n) * r2;
    chi2_sf(lm, design.n_excluded)
}

/// Wald test that the demand elasticity is zero.
///
/// Under the flat-supply reading the elasticity is the rate coefficient
/// minus one, so the null pins that coefficient at one; the statistic is
/// referred to chi-squared with one degree of freedom.
pub fn wald_eta_zero<T: Scalar>(beta: T, var_beta: T) -> Result<WaldTest<T>> {
    if var_beta <= T::zero() {
        return Err(Error::Domain(format!(
            "Wald test needs a positive variance, got {var_beta}"
        )));
    }
    let dev = beta - T::one();
    let stat = dev * dev / var_beta;
    let p = chi2_sf(stat, 1)?;
    Ok(WaldTest { stat, p })
}

/// Assembles the full diagnostics block for an instrumented design.
pub fn compute_bundle<T: Scalar>(
    design: &Design<T>,
    residuals: &DVector<T>,
    beta_endog: T,
    var_endog: T,
    bandwidth: usize,
) -> Result<DiagnosticsBundle<T>> {
    Ok(DiagnosticsBundle {
        weak_id_f: weak_id_f(design, bandwidth)?,
        overid: overid_j(design, residuals, bandwidth)?,
        underid_lm_p: underid_lm(design)?,
        wald_eta_zero: wald_eta_zero(beta_endog, var_endog)?,
        stock_yogo_ref: conv::<T>(STOCK_YOGO_REF),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{hac_vcov, tsls};
    use approx::assert_relative_eq;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    /// Deterministic pseudo-random stream for test fixtures.
    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self
                .0
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((self.0 >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        }
    }

    fn iv_design(n: usize, n_excl: usize, seed: u64) -> (Design<f64>, DVector<f64>) {
        let mut rng = Lcg(seed);
        let mut endog = DMatrix::zeros(n, 1);
        let mut excluded = DMatrix::zeros(n, n_excl);
        let mut exog = DMatrix::zeros(n, 1);
        let mut y = DVector::zeros(n);
        for t in 0..n {
            let f = rng.next();
            for j in 0..n_excl {
                excluded[(t, j)] = f + 0.3 * rng.next();
            }
            endog[(t, 0)] = f + 0.3 * rng.next();
            exog[(t, 0)] = rng.next();
            y[t] = 2.0 * endog[(t, 0)] - 1.0 * exog[(t, 0)] + 0.5 * rng.next();
        }
        let groups = vec![0usize; n];
        let times: Vec<i64> = (0..n as i64).collect();
        let excl_names: Vec<String> = (0..n_excl).map(|j| format!("z{j}")).collect();
        let design = Design::from_blocks(
            y.clone(),
            endog,
            names(&["x_end"]),
            exog,
            names(&["w"]),
            excluded,
            excl_names,
            groups,
            times,
        )
        .unwrap();
        (design, y)
    }

    #[test]
    fn single_instrument_f_is_squared_t_ratio() {
        let (design, _) = iv_design(40, 1, 7);
        let f = weak_id_f(&design, 2).unwrap();
        // Recompute the first stage by hand and form (c / se)^2.
        let endog: DVector<f64> = design.x.column(0).into_owned();
        let pi = lstsq(&design.z, &endog, &design.z_names).unwrap();
        let resid = &endog - &design.z * &pi;
        let vcov = hac_vcov(&design.z, &design.z, &resid, &design.groups, &design.times, 2).unwrap();
        let t2 = pi[0] * pi[0] / vcov[(0, 0)];
        assert_relative_eq!(f, t2, epsilon = 1e-10);
    }

    #[test]
    fn two_orthonormal_instruments_match_quadratic_form_oracle() {
        // Orthonormal instruments; known first-stage fit with HC0 weights.
        let n = 6usize;
        let sqrt_n = (n as f64).sqrt();
        let mut z = DMatrix::zeros(n, 2);
        for t in 0..n {
            z[(t, 0)] = if t % 2 == 0 { 1.0 } else { -1.0 } / sqrt_n;
            z[(t, 1)] = if t < n / 2 { 1.0 } else { -1.0 } / sqrt_n;
        }
        let endog = DVector::from_fn(n, |t, _| {
            3.0 * z[(t, 0)] + 1.0 * z[(t, 1)] + 0.1 * ((t * t) as f64).sin()
        });
        let design = Design::from_blocks(
            endog.clone(),
            DMatrix::from_column_slice(n, 1, endog.as_slice()),
            names(&["x_end"]),
            DMatrix::zeros(n, 0),
            vec![],
            z.clone(),
            names(&["z0", "z1"]),
            vec![0; n],
            (0..n as i64).collect(),
        )
        .unwrap();
        let f = weak_id_f(&design, 0).unwrap();

        // Oracle: explicit quadratic-form Wald with HC0 covariance.
        let pi = lstsq(&z, &endog, &names(&["z0", "z1"])).unwrap();
        let resid = &endog - &z * &pi;
        let ztz_inv = (z.transpose() * &z).try_inverse().unwrap();
        let mut meat = DMatrix::zeros(2, 2);
        for t in 0..n {
            for a in 0..2 {
                for b in 0..2 {
                    meat[(a, b)] += z[(t, a)] * z[(t, b)] * resid[t] * resid[t];
                }
            }
        }
        let v = &ztz_inv * meat * &ztz_inv;
        let wald = (pi.transpose() * v.try_inverse().unwrap() * &pi)[(0, 0)];
        assert_relative_eq!(f, wald / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn weak_id_requires_excluded_instruments() {
        let (mut design, _) = iv_design(20, 1, 3);
        // Strip the excluded instrument: make Z just the exogenous column.
        design.z = design.x.columns(1, 1).into_owned();
        design.z_names = names(&["w"]);
        design.n_excluded = 0;
        assert!(matches!(weak_id_f(&design, 0), Err(Error::Identification(_))));
    }

    #[test]
    fn just_identified_j_is_zero_with_flag() {
        let (design, y) = iv_design(40, 1, 11);
        let est = tsls(&y, &design.x, &design.z, &design.x_names, &design.z_names).unwrap();
        let test = overid_j(&design, &est.residuals, 2).unwrap();
        assert!(test.is_just_identified());
        assert!(test.j.abs() <= 1e-8, "J = {}", test.j);
        assert!(test.p.is_none());
    }

    #[test]
    fn overid_j_invariant_to_instrument_rescaling() {
        let (design, y) = iv_design(60, 2, 13);
        let est = tsls(&y, &design.x, &design.z, &design.x_names, &design.z_names).unwrap();
        let base = overid_j(&design, &est.residuals, 2).unwrap();

        let mut scaled = design.clone();
        for t in 0..scaled.z.nrows() {
            scaled.z[(t, 0)] *= -37.5;
        }
        let est2 = tsls(&y, &scaled.x, &scaled.z, &scaled.x_names, &scaled.z_names).unwrap();
        let rescaled = overid_j(&scaled, &est2.residuals, 2).unwrap();
        assert!((base.j - rescaled.j).abs() <= 1e-8, "{} vs {}", base.j, rescaled.j);
        assert_eq!(base.df, 1);
    }

    #[test]
    fn perfectly_relevant_instrument_has_tiny_underid_p() {
        let n = 60usize;
        let mut rng = Lcg(17);
        let z_col: Vec<f64> = (0..n).map(|_| rng.next()).collect();
        let endog = DMatrix::from_column_slice(n, 1, &z_col);
        let z = DMatrix::from_column_slice(n, 1, &z_col);
        let y = DVector::from_fn(n, |t, _| 1.5 * z_col[t]);
        let design = Design::from_blocks(
            y,
            endog,
            names(&["x_end"]),
            DMatrix::zeros(n, 0),
            vec![],
            z,
            names(&["z"]),
            vec![0; n],
            (0..n as i64).collect(),
        )
        .unwrap();
        let p = underid_lm(&design).unwrap();
        assert!(p < 1e-8, "p = {p}");
    }

    #[test]
    fn wald_eta_zero_reconstructs_reported_p_values() {
        // From rounded coefficient/SE pairs; chi-squared(1) reference.
        let cases: [(f64, f64, f64, f64); 2] = [
            (3.06, 2.18, 0.343, 0.01),
            (-0.47, 1.86, 0.429, 0.01),
        ];
        for (beta, se, expected_p, tol) in cases {
            let test = wald_eta_zero(beta, se * se).unwrap();
            assert!(
                (test.p - expected_p).abs() <= tol,
                "beta={beta}: p={} vs {expected_p}",
                test.p
            );
        }
        let strong = wald_eta_zero(-26.22, 6.50f64 * 6.50).unwrap();
        assert!(strong.p < 0.001, "p = {}", strong.p);
    }

    #[test]
    fn wald_at_the_null_point_is_one() {
        let test = wald_eta_zero(1.0, 0.5).unwrap();
        assert_eq!(test.stat, 0.0);
        assert_eq!(test.p, 1.0);
    }

    #[test]
    fn wald_rejects_nonpositive_variance() {
        assert!(wald_eta_zero(2.0, 0.0).is_err());
        assert!(wald_eta_zero(2.0, -1.0).is_err());
    }
}
