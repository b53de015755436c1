//! The estimation engine: within (fixed-effects) transform, OLS, two-stage
//! least squares, and Bartlett-kernel HAC covariance, composed into the
//! fixed-effects IV estimator used throughout the pipeline.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::diagnostics::{self, DiagnosticsBundle};
use crate::error::{Error, Result};
use crate::linalg::{check_full_rank, lstsq, solve_spd, symmetrize};
use crate::panel::Panel;
use crate::scalar::{conv_usize, Scalar};

/// A stacked regression design with instruments and panel structure.
///
/// Regressors are ordered endogenous-first; the instrument matrix holds the
/// excluded instruments first, followed by the included exogenous columns
/// (which instrument themselves). Rows must be sorted by (group, time).
#[derive(Debug, Clone)]
pub struct Design<T: Scalar> {
    pub y: DVector<T>,
    pub x: DMatrix<T>,
    pub z: DMatrix<T>,
    pub n_endog: usize,
    pub n_excluded: usize,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    pub groups: Vec<usize>,
    pub times: Vec<i64>,
}

impl<T: Scalar> Design<T> {
    /// Assembles a design from column blocks, sharing the exogenous block
    /// between regressors and instruments.
    pub fn from_blocks(
        y: DVector<T>,
        endog: DMatrix<T>,
        endog_names: Vec<String>,
        exog: DMatrix<T>,
        exog_names: Vec<String>,
        excluded: DMatrix<T>,
        excluded_names: Vec<String>,
        groups: Vec<usize>,
        times: Vec<i64>,
    ) -> Result<Self> {
        let n = y.len();
        let n_endog = endog.ncols();
        let n_excluded = excluded.ncols();
        let mut x = DMatrix::zeros(n, n_endog + exog.ncols());
        x.columns_mut(0, n_endog).copy_from(&endog);
        x.columns_mut(n_endog, exog.ncols()).copy_from(&exog);
        let mut z = DMatrix::zeros(n, n_excluded + exog.ncols());
        z.columns_mut(0, n_excluded).copy_from(&excluded);
        z.columns_mut(n_excluded, exog.ncols()).copy_from(&exog);
        let mut x_names = endog_names;
        x_names.extend(exog_names.iter().cloned());
        let mut z_names = excluded_names;
        z_names.extend(exog_names);
        let design = Self {
            y,
            x,
            z,
            n_endog,
            n_excluded,
            x_names,
            z_names,
            groups,
            times,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_groups(&self) -> usize {
        let mut ids: Vec<usize> = self.groups.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if self.x.nrows() != n || self.z.nrows() != n {
            return Err(Error::Data("design row counts differ".into()));
        }
        if self.groups.len() != n || self.times.len() != n {
            return Err(Error::Data("group/time index length differs from rows".into()));
        }
        if self.z.ncols() < self.x.ncols() {
            return Err(Error::Identification(format!(
                "{} instrument columns cannot identify {} regressors",
                self.z.ncols(),
                self.x.ncols()
            )));
        }
        if self.x_names.len() != self.x.ncols() || self.z_names.len() != self.z.ncols() {
            return Err(Error::Data("design column names out of sync".into()));
        }
        for i in 1..n {
            let prev = (self.groups[i - 1], self.times[i - 1]);
            let cur = (self.groups[i], self.times[i]);
            if cur < prev {
                return Err(Error::Data("design rows not sorted by (group, time)".into()));
            }
            if cur == prev {
                return Err(Error::Data(format!(
                    "duplicate (group, time) row at position {i}"
                )));
            }
        }
        Ok(())
    }

    /// Contiguous row ranges per group; rows are sorted, so each group is one
    /// segment.
    fn segments(&self) -> Vec<(usize, usize)> {
        segments_of(&self.groups)
    }
}

fn segments_of(groups: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0usize;
    for i in 1..=groups.len() {
        if i == groups.len() || groups[i] != groups[start] {
            out.push((start, i));
            start = i;
        }
    }
    out
}

/// Row bookkeeping from the within transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WithinReport {
    pub dropped_rows: usize,
    pub dropped_groups: usize,
    pub n_groups: usize,
}

/// Demeans every column of y, X, and Z within each group, dropping
/// singleton groups (they carry no within variation).
pub fn within_transform<T: Scalar>(design: &Design<T>) -> Result<(Design<T>, WithinReport)> {
    design.validate()?;
    let segments = design.segments();
    let keep: Vec<(usize, usize)> = segments.iter().copied().filter(|(s, e)| e - s >= 2).collect();
    let dropped_groups = segments.len() - keep.len();
    let dropped_rows: usize = segments
        .iter()
        .filter(|(s, e)| e - s < 2)
        .map(|(s, e)| e - s)
        .sum();
    if keep.is_empty() {
        return Err(Error::NoWithinVariation(
            "every group is a singleton after sorting; nothing to demean".into(),
        ));
    }
    let n: usize = keep.iter().map(|(s, e)| e - s).sum();
    let mut y = DVector::zeros(n);
    let mut x = DMatrix::zeros(n, design.x.ncols());
    let mut z = DMatrix::zeros(n, design.z.ncols());
    let mut groups = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let mut row = 0usize;
    for &(s, e) in &keep {
        let len = conv_usize::<T>(e - s);
        let y_mean = (s..e).fold(T::zero(), |acc, i| acc + design.y[i]) / len;
        let x_means: Vec<T> = (0..design.x.ncols())
            .map(|j| (s..e).fold(T::zero(), |acc, i| acc + design.x[(i, j)]) / len)
            .collect();
        let z_means: Vec<T> = (0..design.z.ncols())
            .map(|j| (s..e).fold(T::zero(), |acc, i| acc + design.z[(i, j)]) / len)
            .collect();
        for i in s..e {
            y[row] = design.y[i] - y_mean;
            for j in 0..design.x.ncols() {
                x[(row, j)] = design.x[(i, j)] - x_means[j];
            }
            for j in 0..design.z.ncols() {
                z[(row, j)] = design.z[(i, j)] - z_means[j];
            }
            groups.push(design.groups[i]);
            times.push(design.times[i]);
            row += 1;
        }
    }
    let demeaned = Design {
        y,
        x,
        z,
        n_endog: design.n_endog,
        n_excluded: design.n_excluded,
        x_names: design.x_names.clone(),
        z_names: design.z_names.clone(),
        groups,
        times,
    };
    Ok((
        demeaned,
        WithinReport {
            dropped_rows,
            dropped_groups,
            n_groups: keep.len(),
        },
    ))
}

/// Estimator tag carried by coefficient estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ols,
    Tsls,
}

/// Point estimates with a covariance matrix and residuals.
#[derive(Debug, Clone)]
pub struct CoefficientEstimates<T: Scalar> {
    pub names: Vec<String>,
    pub beta: DVector<T>,
    /// Classical covariance; the panel pipeline replaces it with HAC.
    pub vcov: DMatrix<T>,
    pub residuals: DVector<T>,
    pub n: usize,
    pub n_groups: usize,
    pub method: Method,
}

impl<T: Scalar> CoefficientEstimates<T> {
    pub fn se(&self, i: usize) -> T {
        self.vcov[(i, i)].max(T::zero()).sqrt()
    }
}

fn classical_vcov<T: Scalar>(
    gram: &DMatrix<T>,
    rss: T,
    n: usize,
    k: usize,
    what: &str,
) -> Result<DMatrix<T>> {
    let dof = if n > k { n - k } else { 1 };
    let sigma2 = rss / conv_usize::<T>(dof);
    let chol = nalgebra::Cholesky::new(gram.clone())
        .ok_or_else(|| Error::Numeric(format!("{what} Gram matrix not positive definite")))?;
    Ok(symmetrize(&(chol.inverse() * sigma2)))
}

/// Ordinary least squares of `y` on `x`.
pub fn ols<T: Scalar>(
    y: &DVector<T>,
    x: &DMatrix<T>,
    names: &[String],
) -> Result<CoefficientEstimates<T>> {
    if y.len() != x.nrows() {
        return Err(Error::Data("y and X row counts differ".into()));
    }
    let beta = lstsq(x, y, names)?;
    let residuals = y - x * &beta;
    let rss = residuals.dot(&residuals);
    let gram = x.transpose() * x;
    let vcov = classical_vcov(&gram, rss, y.len(), x.ncols(), "OLS")?;
    Ok(CoefficientEstimates {
        names: names.to_vec(),
        beta,
        vcov,
        residuals,
        n: y.len(),
        n_groups: 1,
        method: Method::Ols,
    })
}

/// Two-stage least squares of `y` on `x` with instrument matrix `z`.
///
/// Residuals are computed against the original regressors, not the
/// first-stage fitted values.
pub fn tsls<T: Scalar>(
    y: &DVector<T>,
    x: &DMatrix<T>,
    z: &DMatrix<T>,
    x_names: &[String],
    z_names: &[String],
) -> Result<CoefficientEstimates<T>> {
    if y.len() != x.nrows() || y.len() != z.nrows() {
        return Err(Error::Data("y, X, Z row counts differ".into()));
    }
    if z.ncols() < x.ncols() {
        return Err(Error::Identification(format!(
            "under-identified: {} instruments for {} regressors",
            z.ncols(),
            x.ncols()
        )));
    }
    check_full_rank(z, z_names)?;
    check_full_rank(x, x_names)?;
    // First stage: project X onto the column space of Z.
    let ztz = z.transpose() * z;
    let ztx = z.transpose() * x;
    let first_stage = solve_spd(&ztz, &ztx, "Z'Z")?;
    let x_hat = z * &first_stage;
    let beta = match lstsq(&x_hat, y, x_names) {
        Ok(b) => b,
        Err(Error::Collinear { columns }) => {
            return Err(Error::Identification(format!(
                "projected regressors are collinear ({}); instruments do not span the design",
                columns.join(", ")
            )))
        }
        Err(e) => return Err(e),
    };
    let residuals = y - x * &beta;
    let rss = residuals.dot(&residuals);
    let gram = x_hat.transpose() * &x_hat;
    let vcov = classical_vcov(&gram, rss, y.len(), x.ncols(), "2SLS")?;
    Ok(CoefficientEstimates {
        names: x_names.to_vec(),
        beta,
        vcov,
        residuals,
        n: y.len(),
        n_groups: 1,
        method: Method::Tsls,
    })
}

/// Bartlett long-run covariance of a moment series, with lagged products
/// taken within groups only. `moments` rows follow the design's row order.
pub fn bartlett_long_run<T: Scalar>(
    moments: &DMatrix<T>,
    groups: &[usize],
    bandwidth: usize,
) -> Result<DMatrix<T>> {
    if moments.nrows() != groups.len() {
        return Err(Error::Data("moment rows and group index length differ".into()));
    }
    let segments = segments_of(groups);
    let max_len = segments.iter().map(|(s, e)| e - s).max().unwrap_or(0);
    if bandwidth >= max_len {
        return Err(Error::Bandwidth {
            bandwidth,
            max_len,
        });
    }
    let q = moments.ncols();
    let mut s_mat = DMatrix::<T>::zeros(q, q);
    // Lag 0: sum of outer products.
    for t in 0..moments.nrows() {
        let row = moments.row(t);
        for a in 0..q {
            for b in 0..q {
                s_mat[(a, b)] += row[a] * row[b];
            }
        }
    }
    // Lags 1..=L with Bartlett weights, within group segments.
    for lag in 1..=bandwidth {
        let weight =
            T::one() - conv_usize::<T>(lag) / conv_usize::<T>(bandwidth + 1);
        let mut gamma = DMatrix::<T>::zeros(q, q);
        for &(start, end) in &segments {
            for t in (start + lag)..end {
                let cur = moments.row(t);
                let prev = moments.row(t - lag);
                for a in 0..q {
                    for b in 0..q {
                        gamma[(a, b)] += cur[a] * prev[b];
                    }
                }
            }
        }
        let sym = &gamma + gamma.transpose();
        s_mat += sym * weight;
    }
    Ok(symmetrize(&s_mat))
}

/// HAC sandwich covariance for the 2SLS estimator, built from the moment
/// series z_t * u_t with Bartlett weights up to `bandwidth` lags.
///
/// With `bandwidth` 0 this reduces to the heteroskedasticity-only (HC0)
/// sandwich; with `z == x` it covers fixed-effects OLS.
pub fn hac_vcov<T: Scalar>(
    x: &DMatrix<T>,
    z: &DMatrix<T>,
    residuals: &DVector<T>,
    groups: &[usize],
    times: &[i64],
    bandwidth: usize,
) -> Result<DMatrix<T>> {
    let n = residuals.len();
    if x.nrows() != n || z.nrows() != n || groups.len() != n || times.len() != n {
        return Err(Error::Data("HAC input row counts differ".into()));
    }
    for i in 1..n {
        if (groups[i], times[i]) <= (groups[i - 1], times[i - 1]) {
            return Err(Error::Data("HAC rows not sorted by (group, time)".into()));
        }
    }
    // Moment contributions g_t = z_t * u_t.
    let mut moments = z.clone();
    for t in 0..n {
        let u = residuals[t];
        for j in 0..z.ncols() {
            moments[(t, j)] *= u;
        }
    }
    let s_mat = bartlett_long_run(&moments, groups, bandwidth)?;
    // Bread: (X'P_Z X)^{-1} X'Z (Z'Z)^{-1}, written via two SPD solves.
    let ztz = z.transpose() * z;
    let ztx = z.transpose() * x;
    let a = solve_spd(&ztz, &ztx, "Z'Z")?; // (Z'Z)^{-1} Z'X
    let gram = ztx.transpose() * &a; // X'Z(Z'Z)^{-1}Z'X
    let bread = solve_spd(&gram, &a.transpose(), "projected Gram")?; // k x q
    Ok(symmetrize(&(&bread * s_mat * bread.transpose())))
}

/// Named columns appended to a panel for design construction; each vector is
/// aligned with the panel's observations, `None` marking a missing value.
pub type ExtraColumns<T> = BTreeMap<String, Vec<Option<T>>>;

/// Variable selection for one estimation run.
#[derive(Debug, Clone)]
pub struct EstimationSpec {
    pub dependent: String,
    /// Endogenous regressor; empty means none (plain fixed-effects OLS).
    pub endogenous: Option<String>,
    pub exogenous: Vec<String>,
    /// Excluded instrument columns. Empty with an endogenous regressor is an
    /// identification error; empty without one means Z = X.
    pub instruments: Vec<String>,
    pub bandwidth: usize,
    pub regime: Option<String>,
}

impl EstimationSpec {
    /// The main reduced-form specification: log export value on the log
    /// bilateral rate (endogenous) and the log commodity price, instrumented
    /// by the named excluded columns.
    pub fn reduced_form(instruments: Vec<String>, bandwidth: usize) -> Self {
        Self {
            dependent: "ln_x".into(),
            endogenous: Some("ln_e".into()),
            exogenous: vec!["ln_p_lme".into()],
            instruments,
            bandwidth,
            regime: None,
        }
    }
}

/// Design construction bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignMeta {
    pub dropped_missing: usize,
}

fn resolve_column<T: Scalar>(
    name: &str,
    panel: &Panel<T>,
    extra: &ExtraColumns<T>,
    row: usize,
) -> Result<Option<T>> {
    let obs = &panel.observations[row];
    Ok(match name {
        "ln_x" => Some(obs.ln_x),
        "ln_e" => Some(obs.ln_e),
        "ln_p_lme" => Some(obs.ln_p_lme),
        "ln_uv" => obs.ln_uv,
        "const" => Some(T::one()),
        other => match extra.get(other) {
            Some(col) => col.get(row).copied().flatten(),
            None => return Err(Error::Config(format!("unknown design column '{other}'"))),
        },
    })
}

/// Builds a sorted regression design from a panel plus extra columns,
/// dropping rows where any required value is missing.
pub fn build_design<T: Scalar>(
    panel: &Panel<T>,
    extra: &ExtraColumns<T>,
    spec: &EstimationSpec,
) -> Result<(Design<T>, DesignMeta)> {
    if panel.is_empty() {
        return Err(Error::Data("empty panel".into()));
    }
    for (name, col) in extra {
        if col.len() != panel.len() {
            return Err(Error::Data(format!(
                "extra column '{name}' has {} rows, panel has {}",
                col.len(),
                panel.len()
            )));
        }
    }
    let endog_names: Vec<String> = spec.endogenous.iter().cloned().collect();
    let mut needed: Vec<String> = vec![spec.dependent.clone()];
    needed.extend(endog_names.iter().cloned());
    needed.extend(spec.exogenous.iter().cloned());
    needed.extend(spec.instruments.iter().cloned());

    let mut rows: Vec<(usize, Vec<T>)> = Vec::new();
    let mut dropped = 0usize;
    'rows: for i in 0..panel.len() {
        let mut values = Vec::with_capacity(needed.len());
        for name in &needed {
            match resolve_column(name, panel, extra, i)? {
                Some(v) => values.push(v),
                None => {
                    dropped += 1;
                    continue 'rows;
                }
            }
        }
        rows.push((i, values));
    }
    if rows.is_empty() {
        return Err(Error::Data("no rows with complete data for the design".into()));
    }
    let partner_ids: BTreeMap<&str, usize> = {
        let mut partners: Vec<&str> = rows
            .iter()
            .map(|(i, _)| panel.observations[*i].partner.as_str())
            .collect();
        partners.sort_unstable();
        partners.dedup();
        partners.into_iter().enumerate().map(|(k, p)| (p, k)).collect()
    };
    rows.sort_by_key(|(i, _)| {
        let obs = &panel.observations[*i];
        (partner_ids[obs.partner.as_str()], obs.month.index())
    });

    let n = rows.len();
    let n_endog = endog_names.len();
    let n_exog = spec.exogenous.len();
    let n_excl = spec.instruments.len();
    let mut y = DVector::zeros(n);
    let mut endog = DMatrix::zeros(n, n_endog);
    let mut exog = DMatrix::zeros(n, n_exog);
    let mut excluded = DMatrix::zeros(n, n_excl);
    let mut groups = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    for (r, (i, values)) in rows.iter().enumerate() {
        let obs = &panel.observations[*i];
        let mut it = values.iter().copied();
        y[r] = it.next().unwrap();
        for j in 0..n_endog {
            endog[(r, j)] = it.next().unwrap();
        }
        for j in 0..n_exog {
            exog[(r, j)] = it.next().unwrap();
        }
        for j in 0..n_excl {
            excluded[(r, j)] = it.next().unwrap();
        }
        groups.push(partner_ids[obs.partner.as_str()]);
        times.push(obs.month.index());
    }
    let design = Design::from_blocks(
        y,
        endog,
        endog_names,
        exog,
        spec.exogenous.clone(),
        excluded,
        spec.instruments.clone(),
        groups,
        times,
    )?;
    Ok((design, DesignMeta { dropped_missing: dropped }))
}

/// A finished panel estimation: coefficients with HAC covariance plus the
/// diagnostics block.
#[derive(Debug, Clone)]
pub struct EstimationResult<T: Scalar> {
    pub regime: String,
    pub names: Vec<String>,
    pub beta: DVector<T>,
    pub vcov: DMatrix<T>,
    pub n: usize,
    pub n_groups: usize,
    pub dropped_singleton_rows: usize,
    pub dropped_missing: usize,
    /// Present when the specification has excluded instruments.
    pub diagnostics: Option<DiagnosticsBundle<T>>,
}

impl<T: Scalar> EstimationResult<T> {
    pub fn se(&self, i: usize) -> T {
        self.vcov[(i, i)].max(T::zero()).sqrt()
    }

    pub fn coef(&self, name: &str) -> Option<(T, T)> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| (self.beta[i], self.se(i)))
    }
}

/// Fixed-effects IV: within transform, then 2SLS, then HAC covariance, with
/// weak-identification, over-identification, under-identification, and
/// elasticity diagnostics.
///
/// Without an endogenous regressor the same path estimates fixed-effects OLS
/// (Z = X) and the instrument diagnostics are skipped.
pub fn fe_iv<T: Scalar>(
    panel: &Panel<T>,
    extra: &ExtraColumns<T>,
    spec: &EstimationSpec,
) -> Result<EstimationResult<T>> {
    if spec.endogenous.is_some() && spec.instruments.is_empty() {
        return Err(Error::Identification(
            "an endogenous regressor needs at least one excluded instrument".into(),
        ));
    }
    let (design, meta) = build_design(panel, extra, spec)?;
    let (within, report) = within_transform(&design)?;
    let est = tsls(&within.y, &within.x, &within.z, &within.x_names, &within.z_names)?;
    let vcov = hac_vcov(
        &within.x,
        &within.z,
        &est.residuals,
        &within.groups,
        &within.times,
        spec.bandwidth,
    )?;
    let diagnostics = if within.n_excluded > 0 {
        let var_endog = vcov[(0, 0)];
        Some(diagnostics::compute_bundle(
            &within,
            &est.residuals,
            est.beta[0],
            var_endog,
            spec.bandwidth,
        )?)
    } else {
        None
    };
    Ok(EstimationResult {
        regime: spec.regime.clone().unwrap_or_else(|| "all".into()),
        names: est.names,
        beta: est.beta,
        vcov,
        n: within.n(),
        n_groups: report.n_groups,
        dropped_singleton_rows: report.dropped_rows,
        dropped_missing: meta.dropped_missing,
        diagnostics,
    })
}

/// Convenience wrapper: fixed-effects OLS on the reduced form (no
/// instruments; the endogenous column is treated as exogenous).
pub fn fe_ols<T: Scalar>(
    panel: &Panel<T>,
    bandwidth: usize,
    regime: Option<String>,
) -> Result<EstimationResult<T>> {
    let spec = EstimationSpec {
        dependent: "ln_x".into(),
        endogenous: None,
        exogenous: vec!["ln_e".into(), "ln_p_lme".into()],
        instruments: Vec::new(),
        bandwidth,
        regime,
    };
    fe_iv(panel, &ExtraColumns::new(), &spec)
}
