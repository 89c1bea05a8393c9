//! VAR(p) estimation by multivariate least squares and recursive point
//! forecasting.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::eval::ForecastPath;
use crate::lsq;
use crate::panel::{build_design, hstack, DeterministicSpec, TimeSeriesPanel};

/// Numerical guards shared by the VAR and VECM estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Ceiling on the column-equilibrated design condition diagnostic.
    pub max_condition: f64,
    /// Ceiling on the condition of correlation-scaled product-moment matrices.
    pub max_moment_condition: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_condition: lsq::DEFAULT_MAX_CONDITION,
            max_moment_condition: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ForecastOptions {
    /// Floor every forecast at 0 MW.
    pub clip_nonnegative: bool,
}

/// `Y_t = Ψ X_t + Σ_k Φ_k Y_{t-k} + ε_t`
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    /// `Φ_1..Φ_p`, each `d x d`.
    pub phi: Vec<DMatrix<f64>>,
    /// `d x m`
    pub psi: DMatrix<f64>,
    pub det: DeterministicSpec,
    /// Residual cross-products divided by the effective sample size.
    pub resid_cov: DMatrix<f64>,
}

impl VarModel {
    pub fn new(
        phi: Vec<DMatrix<f64>>,
        psi: DMatrix<f64>,
        det: DeterministicSpec,
        resid_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let d = psi.nrows();
        if psi.ncols() != det.columns() {
            return Err(Error::InvalidInput(format!(
                "psi has {} columns, deterministic term needs {}",
                psi.ncols(),
                det.columns()
            )));
        }
        if phi.iter().any(|m| m.shape() != (d, d)) || resid_cov.shape() != (d, d) {
            return Err(Error::InvalidInput("coefficient blocks must be d x d".into()));
        }
        Ok(Self {
            phi,
            psi,
            det,
            resid_cov,
        })
    }

    pub fn p(&self) -> usize {
        self.phi.len()
    }

    pub fn dim(&self) -> usize {
        self.psi.nrows()
    }

    /// One evaluation of the level equation. `lags[k]` holds `Y_{t-1-k}`.
    /// Lag terms are accumulated first, then the deterministic term.
    pub fn one_step(&self, lags: &[&[f64]], t: usize) -> Vec<f64> {
        let d = self.dim();
        let x = self.det.row(t);
        (0..d)
            .map(|i| {
                let mut acc = 0.0;
                for (phi, y) in self.phi.iter().zip(lags) {
                    for j in 0..d {
                        acc += phi[(i, j)] * y[j];
                    }
                }
                for (c, xc) in x.iter().enumerate() {
                    acc += self.psi[(i, c)] * xc;
                }
                acc
            })
            .collect()
    }

    /// In-sample one-step predictions for rows `p..n_obs` of `panel`.
    pub fn fitted(&self, panel: &TimeSeriesPanel) -> Result<DMatrix<f64>> {
        let p = self.p();
        let n = panel.n_obs();
        if n <= p {
            return Err(Error::InsufficientHistory {
                needed: p + 1,
                available: n,
            });
        }
        let rows: Vec<Vec<f64>> = (0..n).map(|t| panel.row(t)).collect();
        let mut out = DMatrix::zeros(n - p, self.dim());
        for t in p..n {
            let lags: Vec<&[f64]> = (1..=p).map(|k| rows[t - k].as_slice()).collect();
            let y = self.one_step(&lags, t);
            for (j, v) in y.into_iter().enumerate() {
                out[(t - p, j)] = v;
            }
        }
        Ok(out)
    }
}

pub fn fit_var(panel: &TimeSeriesPanel, p: usize, det: DeterministicSpec) -> Result<VarModel> {
    fit_var_with(panel, p, det, &FitOptions::default())
}

pub fn fit_var_with(
    panel: &TimeSeriesPanel,
    p: usize,
    det: DeterministicSpec,
    opts: &FitOptions,
) -> Result<VarModel> {
    let d = panel.dim();
    let m = det.columns();
    let needed = p + d * p + m + 1;
    if p == 0 {
        return Err(Error::InvalidInput("lag order must be at least 1".into()));
    }
    if panel.n_obs() < needed {
        return Err(Error::InsufficientData {
            needed,
            available: panel.n_obs(),
        });
    }
    let design = build_design(panel, p, det)?;
    let x = hstack(&[&design.lag_block, &design.deterministic_block]);
    let ls = lsq::solve(&x, &design.response, opts.max_condition)?;

    let phi = (0..p)
        .map(|k| ls.coef.rows(k * d, d).transpose())
        .collect();
    let psi = ls.coef.rows(d * p, m).transpose();
    let resid_cov = cross_product(&ls.resid, design.effective_n());
    VarModel::new(phi, psi, det, resid_cov)
}

/// `E'E / n`, symmetrized.
pub(crate) fn cross_product(resid: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let c = resid.transpose() * resid / n as f64;
    (&c + c.transpose()) * 0.5
}

pub fn forecast_var(model: &VarModel, history: &TimeSeriesPanel, horizon: usize) -> Result<ForecastPath> {
    forecast_var_with(model, history, horizon, ForecastOptions::default())
}

/// Recursive plug-in forecasts: step `h` feeds predicted values back in
/// place of unobserved lags.
pub fn forecast_var_with(
    model: &VarModel,
    history: &TimeSeriesPanel,
    horizon: usize,
    opts: ForecastOptions,
) -> Result<ForecastPath> {
    let p = model.p();
    let n = history.n_obs();
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    if n < p {
        return Err(Error::InsufficientHistory {
            needed: p,
            available: n,
        });
    }
    if history.dim() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "history has {} regions, model {}",
            history.dim(),
            model.dim()
        )));
    }
    // newest first
    let mut buf: Vec<Vec<f64>> = (1..=p).map(|k| history.row(n - k)).collect();
    let mut values = DMatrix::zeros(horizon, model.dim());
    for h in 0..horizon {
        let lags: Vec<&[f64]> = buf.iter().map(Vec::as_slice).collect();
        let next = model.one_step(&lags, n + h);
        for (j, v) in next.iter().enumerate() {
            values[(h, j)] = if opts.clip_nonnegative { v.max(0.0) } else { *v };
        }
        if p > 0 {
            buf.pop();
            buf.insert(0, next);
        }
    }
    Ok(ForecastPath::new(values, n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::test_support::{gaussian_panel, simulate_var};

    #[test]
    fn noiseless_diagonal_recovery() {
        let mut rows = vec![vec![3.0, -2.0]];
        for _ in 0..40 {
            let last = rows.last().unwrap();
            rows.push(vec![0.5 * last[0], 0.3 * last[1]]);
        }
        let panel = TimeSeriesPanel::from_rows(&rows).unwrap();
        let m = fit_var(&panel, 1, DeterministicSpec::None).unwrap();
        let truth = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.3]);
        assert!((&m.phi[0] - truth).abs().max() <= 1e-10);
    }

    #[test]
    fn white_noise_coefficients_shrink_with_n() {
        let avg_norm = |n: usize| -> f64 {
            (0..20)
                .map(|s| {
                    let panel = gaussian_panel(n, 2, 100 + s);
                    fit_var(&panel, 1, DeterministicSpec::Constant).unwrap().phi[0].norm()
                })
                .sum::<f64>()
                / 20.0
        };
        let small = avg_norm(200);
        let large = avg_norm(5000);
        // sampling sd of each entry is ~1/sqrt(n); four entries
        assert!(small < 4.0 * 2.0 / 200f64.sqrt(), "{small}");
        assert!(large < 4.0 * 2.0 / 5000f64.sqrt(), "{large}");
        assert!(large < small);
    }

    #[test]
    fn var2_matches_normal_equations_oracle() {
        let phi1 = DMatrix::from_row_slice(3, 3, &[0.4, 0.1, 0.0, -0.1, 0.3, 0.2, 0.05, 0.0, 0.5]);
        let phi2 = DMatrix::from_row_slice(3, 3, &[0.1, 0.0, 0.05, 0.0, -0.2, 0.0, 0.1, 0.1, 0.1]);
        let panel = simulate_var(&[phi1, phi2], 600, 42);
        let m = fit_var(&panel, 2, DeterministicSpec::Constant).unwrap();

        // textbook (X'X)^{-1} X'Y built row by row
        let y = panel.values();
        let n = panel.n_obs();
        let k = 7;
        let mut xtx = DMatrix::<f64>::zeros(k, k);
        let mut xty = DMatrix::<f64>::zeros(k, 3);
        for t in 2..n {
            let mut x = Vec::with_capacity(k);
            for lag in 1..=2 {
                x.extend((0..3).map(|j| y[(t - lag, j)]));
            }
            x.push(1.0);
            for a in 0..k {
                for b in 0..k {
                    xtx[(a, b)] += x[a] * x[b];
                }
                for j in 0..3 {
                    xty[(a, j)] += x[a] * y[(t, j)];
                }
            }
        }
        let b = xtx.cholesky().unwrap().solve(&xty);
        for lag in 0..2 {
            let oracle = b.rows(lag * 3, 3).transpose();
            assert!((&m.phi[lag] - oracle).abs().max() <= 1e-8);
        }
        let psi = b.rows(6, 1).transpose();
        assert!((&m.psi - psi).abs().max() <= 1e-8);
    }

    #[test]
    fn residuals_orthogonal_to_regressors() {
        for seed in 0..5 {
            let panel = gaussian_panel(300, 3, seed).cumulative();
            let m = fit_var(&panel, 3, DeterministicSpec::Constant).unwrap();
            let design = build_design(&panel, 3, DeterministicSpec::Constant).unwrap();
            let resid = &design.response - m.fitted(&panel).unwrap();
            let x = hstack(&[&design.lag_block, &design.deterministic_block]);
            let scale = x.norm() * resid.norm();
            assert!((x.transpose() * resid).abs().max() <= 1e-6 * scale.max(1.0));
        }
    }

    #[test]
    fn resid_cov_is_symmetric_psd() {
        let panel = gaussian_panel(400, 3, 7).cumulative();
        let m = fit_var(&panel, 2, DeterministicSpec::Constant).unwrap();
        assert_eq!(m.resid_cov, m.resid_cov.transpose());
        let ev = m.resid_cov.clone().symmetric_eigenvalues();
        assert!(ev.iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn identity_dynamics_persist_last_observation() {
        let m = VarModel::new(
            vec![DMatrix::identity(3, 3)],
            DMatrix::zeros(3, 0),
            DeterministicSpec::None,
            DMatrix::identity(3, 3),
        )
        .unwrap();
        let hist = gaussian_panel(10, 3, 1);
        let path = forecast_var(&m, &hist, 8).unwrap();
        for h in 0..8 {
            assert_eq!(path.values.row(h), hist.values().row(9));
        }
        assert_eq!(path.origin_index, 9);
    }

    #[test]
    fn pure_mean_model_forecasts_constant() {
        let c = DMatrix::from_column_slice(2, 1, &[4.5, -1.25]);
        let m = VarModel::new(
            vec![DMatrix::zeros(2, 2)],
            c.clone(),
            DeterministicSpec::Constant,
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let path = forecast_var(&m, &gaussian_panel(5, 2, 2), 6).unwrap();
        for h in 0..6 {
            assert_eq!(path.values[(h, 0)], 4.5);
            assert_eq!(path.values[(h, 1)], -1.25);
        }
    }

    #[test]
    fn forecast_matches_brute_force_recursion() {
        let phi1 = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.4]);
        let phi2 = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.1, 0.3]);
        let panel = simulate_var(&[phi1, phi2], 500, 3);
        let m = fit_var(&panel, 2, DeterministicSpec::Constant).unwrap();
        let path = forecast_var(&m, &panel, 8).unwrap();

        let n = panel.n_obs();
        let mut ext: Vec<Vec<f64>> = (0..n).map(|t| panel.row(t)).collect();
        for h in 0..8 {
            let t = n + h;
            let mut next = vec![0.0; 2];
            for (i, v) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..2 {
                    for j in 0..2 {
                        acc += m.phi[k][(i, j)] * ext[t - 1 - k][j];
                    }
                }
                acc += m.psi[(i, 0)];
                *v = acc;
            }
            ext.push(next);
        }
        for h in 0..8 {
            for j in 0..2 {
                assert_eq!(path.values[(h, j)], ext[n + h][j]);
            }
        }
    }

    #[test]
    fn one_step_forecast_equals_fitted_equation() {
        let panel = gaussian_panel(200, 2, 5).cumulative();
        let m = fit_var(&panel, 3, DeterministicSpec::Constant).unwrap();
        // history ending at row t-1 predicts row t exactly as the fitted equation
        for t in [3usize, 50, 199] {
            let hist = panel.window(0, t).unwrap();
            let path = forecast_var(&m, &hist, 1).unwrap();
            let fitted = m.fitted(&panel).unwrap();
            assert_eq!(path.values.row(0), fitted.row(t - 3));
        }
    }

    #[test]
    fn relabeling_permutes_coefficients() {
        let panel = gaussian_panel(300, 3, 11).cumulative();
        let order = [1usize, 2, 0];
        let a = fit_var(&panel, 2, DeterministicSpec::Constant).unwrap();
        let b = fit_var(&panel.permute_regions(&order).unwrap(), 2, DeterministicSpec::Constant).unwrap();
        for k in 0..2 {
            for (i, &oi) in order.iter().enumerate() {
                for (j, &oj) in order.iter().enumerate() {
                    assert!((b.phi[k][(i, j)] - a.phi[k][(oi, oj)]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn clipping_is_opt_in() {
        let m = VarModel::new(
            vec![DMatrix::zeros(1, 1)],
            DMatrix::from_element(1, 1, -3.0),
            DeterministicSpec::Constant,
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let hist = gaussian_panel(3, 1, 0);
        assert_eq!(forecast_var(&m, &hist, 2).unwrap().values[(0, 0)], -3.0);
        let clipped = forecast_var_with(&m, &hist, 2, ForecastOptions { clip_nonnegative: true }).unwrap();
        assert_eq!(clipped.values[(1, 0)], 0.0);
    }

    #[test]
    fn error_paths() {
        let panel = gaussian_panel(10, 2, 0);
        assert!(matches!(
            fit_var(&panel, 7, DeterministicSpec::Constant),
            Err(Error::InsufficientData { .. })
        ));
        let constant = TimeSeriesPanel::from_rows(&vec![vec![1.0, 2.0]; 50]).unwrap();
        assert!(matches!(
            fit_var(&constant, 1, DeterministicSpec::Constant),
            Err(Error::SingularDesign { .. })
        ));
        let m = fit_var(&gaussian_panel(100, 2, 1), 3, DeterministicSpec::None).unwrap();
        assert!(matches!(
            forecast_var(&m, &panel.window(0, 2).unwrap(), 4),
            Err(Error::InsufficientHistory { needed: 3, available: 2 })
        ));
    }
}
