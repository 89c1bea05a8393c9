//! Johansen reduced-rank estimation of vector error correction models and
//! conversion to and from the VAR representation.
//!
//! `ΔY_t = Ψ X_t + α βᵀ Y_{t-1} + Σ_{k=1}^{p-1} Γ_k ΔY_{t-k} + ε_t`
//!
//! The constant enters unrestricted. Cointegrating vectors are normalized so
//! that `βᵀ S11 β = I`; forecasts depend only on `span(β)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::eval::ForecastPath;
use crate::lsq;
use crate::panel::{build_design, hstack, DeterministicSpec, TimeSeriesPanel};
use crate::var::{cross_product, forecast_var_with, FitOptions, ForecastOptions, VarModel};

#[derive(Debug, Clone, PartialEq)]
pub struct VecmModel {
    /// `d x r` loadings.
    pub alpha: DMatrix<f64>,
    /// `d x r` cointegrating vectors.
    pub beta: DMatrix<f64>,
    /// `Γ_1..Γ_{p-1}`
    pub gamma: Vec<DMatrix<f64>>,
    /// `d x m`
    pub psi: DMatrix<f64>,
    pub det: DeterministicSpec,
    /// Johansen eigenvalues, descending in `[0, 1)`. Empty for models built by
    /// [`var_to_vecm`] or when the moment matrices were singular at rank 0.
    pub eigenvalues: Vec<f64>,
    pub resid_cov: DMatrix<f64>,
}

impl VecmModel {
    pub fn rank(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn p(&self) -> usize {
        self.gamma.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.alpha.nrows()
    }

    /// `Π = α βᵀ`
    pub fn pi(&self) -> DMatrix<f64> {
        &self.alpha * self.beta.transpose()
    }
}

/// First stage of the Johansen procedure for one `(panel, p, det)`: the
/// concentrated regressions and the solved eigenproblem. Models of every
/// rank are read off the same stage.
#[derive(Debug, Clone)]
pub struct JohansenStage {
    d: usize,
    p: usize,
    det: DeterministicSpec,
    /// Coefficients of `ΔY_t` and `Y_{t-1}` on `[lagged differences | det]`.
    b0: DMatrix<f64>,
    b1: DMatrix<f64>,
    s00: DMatrix<f64>,
    s01: DMatrix<f64>,
    s11: DMatrix<f64>,
    eigen: std::result::Result<(Vec<f64>, DMatrix<f64>), Error>,
}

impl JohansenStage {
    pub fn new(panel: &TimeSeriesPanel, p: usize, det: DeterministicSpec, opts: &FitOptions) -> Result<Self> {
        let d = panel.dim();
        let m = det.columns();
        if p == 0 {
            return Err(Error::InvalidInput("lag order must be at least 1".into()));
        }
        let needed = p + d * p + m + 1;
        if panel.n_obs() < needed {
            return Err(Error::InsufficientData {
                needed,
                available: panel.n_obs(),
            });
        }
        let design = build_design(panel, p, det)?;
        let n = design.effective_n();
        let z = hstack(&[&design.diff_lag_block, &design.deterministic_block]);
        let rhs = hstack(&[&design.diff_response, &design.lagged_level]);
        let ls = lsq::solve(&z, &rhs, opts.max_condition)?;

        let r0 = ls.resid.columns(0, d);
        let r1 = ls.resid.columns(d, d);
        let nf = n as f64;
        let s00 = symmetrize(r0.transpose() * r0 / nf);
        let s11 = symmetrize(r1.transpose() * r1 / nf);
        let s01 = r0.transpose() * r1 / nf;
        let eigen = solve_eigenproblem(&s00, &s01, &s11, opts.max_moment_condition);

        Ok(Self {
            d,
            p,
            det,
            b0: ls.coef.columns(0, d).into_owned(),
            b1: ls.coef.columns(d, d).into_owned(),
            s00,
            s01,
            s11,
            eigen,
        })
    }

    /// Eigenvalues of `λ S11 v = S10 S00⁻¹ S01 v`, descending.
    pub fn eigenvalues(&self) -> Result<&[f64]> {
        self.eigen.as_ref().map(|(ev, _)| ev.as_slice()).map_err(Clone::clone)
    }

    /// Product-moment matrices `(S00, S01, S11)`.
    pub fn moments(&self) -> (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>) {
        (&self.s00, &self.s01, &self.s11)
    }

    pub fn model(&self, r: usize) -> Result<VecmModel> {
        let d = self.d;
        if r > d {
            return Err(Error::InvalidRank { rank: r, dim: d });
        }
        let (eigenvalues, beta) = match (&self.eigen, r) {
            (Ok((ev, vecs)), _) => (ev.clone(), vecs.columns(0, r).into_owned()),
            (Err(_), 0) => (Vec::new(), DMatrix::zeros(d, 0)),
            (Err(e), _) => return Err(e.clone()),
        };

        // α = S01 β (βᵀ S11 β)⁻¹
        let alpha = if r == 0 {
            DMatrix::zeros(d, 0)
        } else {
            let gram = symmetrize(beta.transpose() * &self.s11 * &beta);
            let chol = gram.cholesky().ok_or(Error::SingularMoments {
                which: "beta'S11beta",
                condition: f64::INFINITY,
            })?;
            chol.solve(&(beta.transpose() * self.s01.transpose())).transpose()
        };
        let pi = &alpha * beta.transpose();

        // short-run and deterministic coefficients given β (Frisch-Waugh)
        let c = &self.b0 - &self.b1 * pi.transpose();
        let gamma = (0..self.p - 1)
            .map(|k| c.rows(k * d, d).transpose())
            .collect();
        let psi = c.rows(d * (self.p - 1), self.det.columns()).transpose();

        let s10 = self.s01.transpose();
        let cov = &self.s00 - &self.s01 * pi.transpose() - &pi * &s10 + &pi * &self.s11 * pi.transpose();

        Ok(VecmModel {
            alpha,
            beta,
            gamma,
            psi,
            det: self.det,
            eigenvalues,
            resid_cov: symmetrize(cov),
        })
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Condition of the correlation-scaled version of a symmetric PSD matrix,
/// together with the scaling and its eigen decomposition.
fn scaled_eigen(
    s: &DMatrix<f64>,
    which: &'static str,
    max_condition: f64,
) -> Result<(Vec<f64>, SymmetricEigen<f64, nalgebra::Dyn>)> {
    let d = s.nrows();
    let mut scale = Vec::with_capacity(d);
    for i in 0..d {
        let v = s[(i, i)];
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::SingularMoments {
                which,
                condition: f64::INFINITY,
            });
        }
        scale.push(1.0 / v.sqrt());
    }
    let corr = DMatrix::from_fn(d, d, |i, j| s[(i, j)] * scale[i] * scale[j]);
    let eig = corr.symmetric_eigen();
    let hi = eig.eigenvalues.max();
    let lo = eig.eigenvalues.min();
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= max_condition) {
        return Err(Error::SingularMoments { which, condition });
    }
    Ok((scale, eig))
}

fn solve_eigenproblem(
    s00: &DMatrix<f64>,
    s01: &DMatrix<f64>,
    s11: &DMatrix<f64>,
    max_condition: f64,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let d = s11.nrows();
    scaled_eigen(s00, "S00", max_condition)?;
    let (scale, eig11) = scaled_eigen(s11, "S11", max_condition)?;

    // F with Fᵀ S11 F = I: F = D U Λ^{-1/2} for the correlation-scaled S11
    let mut f = DMatrix::zeros(d, d);
    for c in 0..d {
        let w = 1.0 / eig11.eigenvalues[c].sqrt();
        for i in 0..d {
            f[(i, c)] = scale[i] * eig11.eigenvectors[(i, c)] * w;
        }
    }

    let chol00 = s00.clone().cholesky().ok_or(Error::SingularMoments {
        which: "S00",
        condition: f64::INFINITY,
    })?;
    let s00_inv_s01 = chol00.solve(s01);
    let s10_s00_inv_s01 = s01.transpose() * s00_inv_s01;
    let reduced = symmetrize(f.transpose() * s10_s00_inv_s01 * &f);
    let eig = reduced.symmetric_eigen();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut values = Vec::with_capacity(d);
    let mut vectors = DMatrix::zeros(d, d);
    for (c, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src].clamp(0.0, 1.0 - f64::EPSILON));
        let mut v = &f * eig.eigenvectors.column(src);
        // sign convention: largest-magnitude entry positive
        let lead = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if lead < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(c, &v);
    }
    Ok((values, vectors))
}

pub fn fit_vecm(panel: &TimeSeriesPanel, p: usize, r: usize, det: DeterministicSpec) -> Result<VecmModel> {
    fit_vecm_with(panel, p, r, det, &FitOptions::default())
}

pub fn fit_vecm_with(
    panel: &TimeSeriesPanel,
    p: usize,
    r: usize,
    det: DeterministicSpec,
    opts: &FitOptions,
) -> Result<VecmModel> {
    if r > panel.dim() {
        return Err(Error::InvalidRank {
            rank: r,
            dim: panel.dim(),
        });
    }
    JohansenStage::new(panel, p, det, opts)?.model(r)
}

/// `Φ_1 = I + Π + Γ_1`, `Φ_k = Γ_k − Γ_{k−1}`, `Φ_p = −Γ_{p−1}`.
pub fn vecm_to_var(model: &VecmModel) -> VarModel {
    let d = model.dim();
    let p = model.p();
    let eye = DMatrix::<f64>::identity(d, d);
    let pi = model.pi();
    let mut phi = Vec::with_capacity(p);
    if p == 1 {
        phi.push(&eye + &pi);
    } else {
        phi.push(&eye + &pi + &model.gamma[0]);
        for k in 1..p - 1 {
            phi.push(&model.gamma[k] - &model.gamma[k - 1]);
        }
        phi.push(-&model.gamma[p - 2]);
    }
    VarModel {
        phi,
        psi: model.psi.clone(),
        det: model.det,
        resid_cov: model.resid_cov.clone(),
    }
}

/// `Π = −I + Σ Φ_k`, `Γ_k = −Σ_{j>k} Φ_j`, factored as `α = Π`, `β = I`.
pub fn var_to_vecm(model: &VarModel) -> VecmModel {
    let d = model.dim();
    let p = model.p();
    let mut pi = -DMatrix::<f64>::identity(d, d);
    for phi in &model.phi {
        pi += phi;
    }
    let gamma = (1..p)
        .map(|k| {
            let mut g = DMatrix::zeros(d, d);
            for phi in &model.phi[k..] {
                g -= phi;
            }
            g
        })
        .collect();
    VecmModel {
        alpha: pi,
        beta: DMatrix::identity(d, d),
        gamma,
        psi: model.psi.clone(),
        det: model.det,
        eigenvalues: Vec::new(),
        resid_cov: model.resid_cov.clone(),
    }
}

pub fn forecast_vecm(model: &VecmModel, history: &TimeSeriesPanel, horizon: usize) -> Result<ForecastPath> {
    forecast_vecm_with(model, history, horizon, ForecastOptions::default())
}

pub fn forecast_vecm_with(
    model: &VecmModel,
    history: &TimeSeriesPanel,
    horizon: usize,
    opts: ForecastOptions,
) -> Result<ForecastPath> {
    forecast_var_with(&vecm_to_var(model), history, horizon, opts)
}

/// In-sample residuals of the `ΔY_t` equation.
pub fn difference_residuals(model: &VecmModel, panel: &TimeSeriesPanel) -> Result<DMatrix<f64>> {
    let design = build_design(panel, model.p(), model.det)?;
    let fitted = vecm_to_var(model).fitted(panel)?;
    Ok(&design.response - fitted)
}

/// Residual covariance recomputed from in-sample residuals.
pub fn empirical_resid_cov(model: &VecmModel, panel: &TimeSeriesPanel) -> Result<DMatrix<f64>> {
    let e = difference_residuals(model, panel)?;
    Ok(cross_product(&e, e.nrows()))
}
