//! Synthetic cointegrated data: a Gaussian VECM simulated forward.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{DeterministicSpec, TimeSeriesPanel};
use crate::var::VarModel;
use crate::vecm::{vecm_to_var, VecmModel};

/// Steps simulated and discarded before the returned sample.
pub const BURN_IN: usize = 200;

/// Tolerance on `| |root| - 1 |` for a companion root to count as a unit root.
pub const UNIT_ROOT_TOL: f64 = 1e-6;

/// Data-generating process `ΔY_t = α βᵀ Y_{t-1} + Σ Γ_k ΔY_{t-k} + ε_t`,
/// `ε_t ~ N(0, noise_cov)`. Matrices are stored row-major as nested lists so
/// the spec reads naturally in TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub d: usize,
    pub r_true: usize,
    pub p_true: usize,
    /// `d x r_true`
    pub alpha: Vec<Vec<f64>>,
    /// `d x r_true`
    pub beta: Vec<Vec<f64>>,
    /// `p_true - 1` matrices, each `d x d`
    #[serde(default)]
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub noise_cov: Vec<Vec<f64>>,
    pub n_obs: usize,
    pub seed: u64,
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecDiagnostics {
    /// Companion-matrix root moduli, descending.
    pub root_moduli: Vec<f64>,
    pub unit_roots: usize,
}

fn to_matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidSpec(format!("{what} must be {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl DgpSpec {
    /// `d` independent Gaussian random walks with unit variance.
    pub fn random_walk(d: usize, n_obs: usize, seed: u64) -> Self {
        Self {
            d,
            r_true: 0,
            p_true: 1,
            alpha: vec![Vec::new(); d],
            beta: vec![Vec::new(); d],
            gamma: Vec::new(),
            noise_cov: from_matrix(&DMatrix::identity(d, d)),
            n_obs,
            seed,
            initial: vec![0.0; d],
        }
    }

    /// Stationary VAR(1) `Y_t = 0.5 Y_{t-1} + ε_t` written with `r = d`.
    pub fn stationary(d: usize, n_obs: usize, seed: u64) -> Self {
        Self {
            d,
            r_true: d,
            p_true: 1,
            alpha: from_matrix(&(DMatrix::identity(d, d) * -0.5)),
            beta: from_matrix(&DMatrix::identity(d, d)),
            gamma: Vec::new(),
            noise_cov: from_matrix(&DMatrix::identity(d, d)),
            n_obs,
            seed,
            initial: vec![0.0; d],
        }
    }

    /// Four correlated regions, two cointegrating relations, one lagged
    /// difference. Used throughout the test-suite.
    pub fn cointegrated_d4_r2(n_obs: usize, seed: u64) -> Self {
        let beta = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.5],
            vec![0.5, 1.0],
            vec![0.0, -1.0],
        ];
        let alpha = vec![
            vec![-0.15, 0.0],
            vec![0.1, -0.05],
            vec![0.0, -0.1],
            vec![0.05, 0.1],
        ];
        let gamma = vec![vec![
            vec![0.3, 0.1, 0.0, 0.0],
            vec![0.0, 0.2, 0.0, 0.1],
            vec![0.1, 0.0, 0.25, 0.0],
            vec![0.0, 0.0, 0.05, 0.3],
        ]];
        let noise_cov = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.4 }).collect())
            .collect();
        Self {
            d: 4,
            r_true: 2,
            p_true: 2,
            alpha,
            beta,
            gamma,
            noise_cov,
            n_obs,
            seed,
            initial: vec![50.0; 4],
        }
    }

    pub fn alpha_matrix(&self) -> Result<DMatrix<f64>> {
        to_matrix(&self.alpha, self.d, self.r_true, "alpha")
    }

    pub fn beta_matrix(&self) -> Result<DMatrix<f64>> {
        to_matrix(&self.beta, self.d, self.r_true, "beta")
    }

    /// The DGP as a VECM without deterministic terms.
    pub fn to_vecm(&self) -> Result<VecmModel> {
        if self.d == 0 || self.p_true == 0 || self.r_true > self.d {
            return Err(Error::InvalidSpec("need d >= 1, p_true >= 1, r_true <= d".into()));
        }
        if self.gamma.len() != self.p_true - 1 {
            return Err(Error::InvalidSpec(format!(
                "expected {} gamma matrices, got {}",
                self.p_true - 1,
                self.gamma.len()
            )));
        }
        let gamma = self
            .gamma
            .iter()
            .map(|g| to_matrix(g, self.d, self.d, "gamma"))
            .collect::<Result<Vec<_>>>()?;
        let noise = to_matrix(&self.noise_cov, self.d, self.d, "noise_cov")?;
        Ok(VecmModel {
            alpha: self.alpha_matrix()?,
            beta: self.beta_matrix()?,
            gamma,
            psi: DMatrix::zeros(self.d, 0),
            det: DeterministicSpec::None,
            eigenvalues: Vec::new(),
            resid_cov: noise,
        })
    }
}

/// Stacked `dp x dp` companion matrix of a VAR.
pub fn companion(model: &VarModel) -> DMatrix<f64> {
    let d = model.dim();
    let p = model.p();
    let mut c = DMatrix::zeros(d * p, d * p);
    for (k, phi) in model.phi.iter().enumerate() {
        c.view_mut((0, k * d), (d, d)).copy_from(phi);
    }
    for i in d..d * p {
        c[(i, i - d)] = 1.0;
    }
    c
}

pub fn validate_spec(spec: &DgpSpec) -> Result<SpecDiagnostics> {
    let var = vecm_to_var(&spec.to_vecm()?);
    let roots = companion(&var).complex_eigenvalues();
    let mut root_moduli: Vec<f64> = roots.iter().map(|z| z.norm()).collect();
    root_moduli.sort_by(|a, b| b.total_cmp(a));
    let unit_roots = root_moduli.iter().filter(|m| (*m - 1.0).abs() <= UNIT_ROOT_TOL).count();
    Ok(SpecDiagnostics {
        root_moduli,
        unit_roots,
    })
}

/// Lower factor `L` with `L Lᵀ = cov` for a symmetric PSD matrix (zero
/// Symmetric square root `L` with `L Lᵀ = cov` for a PSD matrix (zero
fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = cov.nrows();
    if (cov - cov.transpose()).abs().max() > 1e-12 * cov.abs().max().max(1.0) {
        return Err(Error::InvalidSpec("noise_cov must be symmetric".into()));
    }
    let eig = cov.clone().symmetric_eigen();
    let floor = -1e-12 * eig.eigenvalues.abs().max().max(1.0);
    if eig.eigenvalues.iter().any(|&v| v < floor) {
        return Err(Error::InvalidSpec("noise_cov must be positive semidefinite".into()));
    }
    let mut l = eig.eigenvectors.clone();
    for c in 0..d {
        let s = eig.eigenvalues[c].max(0.0).sqrt();
        l.column_mut(c).scale_mut(s);
    }
    Ok(l)
}

pub fn generate(spec: &DgpSpec) -> Result<TimeSeriesPanel> {
    let diag = validate_spec(spec)?;
    if diag.root_moduli.first().is_some_and(|&m| m > 1.0 + UNIT_ROOT_TOL) {
        return Err(Error::InvalidSpec(format!(
            "explosive dynamics: largest companion root modulus {:.6}",
            diag.root_moduli[0]
        )));
    }
    let expected = spec.d - spec.r_true;
    if diag.unit_roots != expected {
        return Err(Error::InvalidSpec(format!(
            "expected {expected} unit roots for rank {}, found {}",
            spec.r_true, diag.unit_roots
        )));
    }
    if spec.initial.len() != spec.d {
        return Err(Error::InvalidSpec("initial must have d entries".into()));
    }
    if spec.n_obs == 0 {
        return Err(Error::InvalidSpec("n_obs must be positive".into()));
    }

    let vecm = spec.to_vecm()?;
    let var = vecm_to_var(&vecm);
    let chol = psd_factor(&vecm.resid_cov)?;
    let d = spec.d;
    let p = var.p();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // pre-sample: p copies of the initial level, so lagged differences are 0
    let total = BURN_IN + spec.n_obs;
    let mut path: Vec<Vec<f64>> = vec![spec.initial.clone(); p];
    path.reserve(total);
    let mut z = vec![0.0; d];
    for t in 0..total {
        let lags: Vec<&[f64]> = (1..=p).map(|k| path[path.len() - k].as_slice()).collect();
        let mut next = var.one_step(&lags, t);
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for (i, v) in next.iter_mut().enumerate() {
            for (j, zj) in z.iter().enumerate() {
                *v += chol[(i, j)] * zj;
            }
        }
        path.push(next);
    }
    let rows = &path[path.len() - spec.n_obs..];
    TimeSeriesPanel::from_rows(rows)
}

/// Fixtures shared by unit and integration tests.
pub mod test_support {
    use super::*;

    /// i.i.d. standard normal panel.
    pub fn gaussian_panel(n: usize, d: usize, seed: u64) -> TimeSeriesPanel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
        TimeSeriesPanel::from_values(values).unwrap()
    }

    /// Simulates a zero-mean VAR with unit-variance independent innovations.
    pub fn simulate_var(phi: &[DMatrix<f64>], n: usize, seed: u64) -> TimeSeriesPanel {
        let d = phi[0].nrows();
        let model = VarModel::new(
            phi.to_vec(),
            DMatrix::zeros(d, 0),
            DeterministicSpec::None,
            DMatrix::identity(d, d),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = phi.len();
        let mut path: Vec<Vec<f64>> = vec![vec![0.0; d]; p];
        for t in 0..n + BURN_IN {
            let lags: Vec<&[f64]> = (1..=p).map(|k| path[path.len() - k].as_slice()).collect();
            let mut next = model.one_step(&lags, t);
            for v in next.iter_mut() {
                *v += { let x: f64 = StandardNormal.sample(&mut rng); x };
            }
            path.push(next);
        }
        TimeSeriesPanel::from_rows(&path[path.len() - n..]).unwrap()
    }

    /// Random VAR(p) with companion spectral radius below one, constant term.
    pub fn random_stable_var(d: usize, p: usize, seed: u64) -> VarModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |scale: f64| DMatrix::from_fn(d, d, |_, _| scale * { let x: f64 = StandardNormal.sample(&mut rng); x });
        let mut phi: Vec<DMatrix<f64>> = (0..p).map(|_| draw(1.0)).collect();
        let psi = DMatrix::from_fn(d, 1, |i, _| 1.0 + i as f64);
        let mut model = VarModel::new(phi.clone(), psi.clone(), DeterministicSpec::Constant, DMatrix::identity(d, d)).unwrap();
        let radius = companion(&model).complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        // scaling Φ_k by s^k scales every companion root by s
        let s = 0.9 / radius.max(1e-12);
        for (k, m) in phi.iter_mut().enumerate() {
            *m *= s.powi(k as i32 + 1);
        }
        model = VarModel::new(phi, psi, DeterministicSpec::Constant, DMatrix::identity(d, d)).unwrap();
        model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex_oracle::*;

    /// Independent root oracle: characteristic polynomial of the companion
    /// matrix by Faddeev-LeVerrier, roots by Durand-Kerner iteration.
    mod num_complex_oracle {
        use nalgebra::DMatrix;

        pub fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
            // monic coefficients c[0]=1, c[k] of λ^{n-k}
            let n = a.nrows();
            let mut c = vec![1.0];
            let mut m = DMatrix::<f64>::zeros(n, n);
            let eye = DMatrix::<f64>::identity(n, n);
            for k in 1..=n {
                m = a * &m + &eye * c[k - 1];
                let am = a * &m;
                c.push(-am.trace() / k as f64);
            }
            c
        }

        pub fn roots(c: &[f64]) -> Vec<(f64, f64)> {
            let n = c.len() - 1;
            let eval = |z: (f64, f64)| -> (f64, f64) {
                let mut acc = (0.0, 0.0);
                for &ck in c {
                    acc = (acc.0 * z.0 - acc.1 * z.1 + ck, acc.0 * z.1 + acc.1 * z.0);
                }
                acc
            };
            let mut z: Vec<(f64, f64)> = (0..n)
                .map(|k| {
                    let ang = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
                    (0.9 * ang.cos(), 0.9 * ang.sin())
                })
                .collect();
            for _ in 0..5000 {
                for i in 0..n {
                    let num = eval(z[i]);
                    let mut den = (1.0, 0.0);
                    for j in 0..n {
                        if i != j {
                            let diff = (z[i].0 - z[j].0, z[i].1 - z[j].1);
                            den = (den.0 * diff.0 - den.1 * diff.1, den.0 * diff.1 + den.1 * diff.0);
                        }
                    }
                    let dn = den.0 * den.0 + den.1 * den.1;
                    if dn == 0.0 {
                        continue;
                    }
                    let q = ((num.0 * den.0 + num.1 * den.1) / dn, (num.1 * den.0 - num.0 * den.1) / dn);
                    z[i] = (z[i].0 - q.0, z[i].1 - q.1);
                }
            }
            z
        }
    }

    #[test]
    fn random_walk_spec_has_unit_roots() {
        let diag = validate_spec(&DgpSpec::random_walk(2, 10, 0)).unwrap();
        assert_eq!(diag.unit_roots, 2);
        assert!(diag.root_moduli.iter().all(|m| (m - 1.0).abs() < 1e-12));
    }

    #[test]
    fn stationary_spec_inside_unit_circle() {
        let diag = validate_spec(&DgpSpec::stationary(3, 10, 0)).unwrap();
        assert_eq!(diag.unit_roots, 0);
        assert!(diag.root_moduli.iter().all(|&m| m < 1.0));
    }

    #[test]
    fn library_spec_unit_roots_match_polynomial_oracle() {
        let spec = DgpSpec::cointegrated_d4_r2(100, 0);
        let diag = validate_spec(&spec).unwrap();
        assert_eq!(diag.unit_roots, 2);
        let comp = companion(&vecm_to_var(&spec.to_vecm().unwrap()));
        let roots = roots(&char_poly(&comp));
        let mut moduli: Vec<f64> = roots.iter().map(|(re, im)| (re * re + im * im).sqrt()).collect();
        moduli.sort_by(|a, b| b.total_cmp(a));
        // a double root at 1 is only resolved to ~sqrt(eps)
        let oracle_units = moduli.iter().filter(|m| (*m - 1.0).abs() < 1e-5).count();
        assert_eq!(oracle_units, 2);
        for (a, b) in diag.root_moduli.iter().zip(&moduli) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        assert!(moduli[2] < 1.0 - 1e-3);
    }

    #[test]
    fn zero_noise_zero_dynamics_is_constant() {
        let mut spec = DgpSpec::random_walk(3, 50, 1);
        spec.noise_cov = vec![vec![0.0; 3]; 3];
        spec.initial = vec![1.0, 2.0, 3.0];
        let panel = generate(&spec).unwrap();
        for t in 0..50 {
            assert_eq!(panel.row(t), vec![1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn same_seed_same_panel() {
        let a = generate(&DgpSpec::cointegrated_d4_r2(300, 7)).unwrap();
        let b = generate(&DgpSpec::cointegrated_d4_r2(300, 7)).unwrap();
        let c = generate(&DgpSpec::cointegrated_d4_r2(300, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn random_walk_variance_grows_linearly() {
        // Var(Y_n - Y_0) = n for a unit random walk; the returned first row
        // already carries the burn-in, so look at increments from it
        let reps = 400;
        for &n in &[50usize, 200] {
            let mut sum_sq = 0.0;
            for s in 0..reps {
                let panel = generate(&DgpSpec::random_walk(1, n + 1, s)).unwrap();
                let inc = panel.values()[(n, 0)] - panel.values()[(0, 0)];
                sum_sq += inc * inc;
            }
            let var = sum_sq / reps as f64;
            // sd of the variance estimate is sqrt(2/reps)·n
            assert!((var / n as f64 - 1.0).abs() < 4.0 * (2.0 / reps as f64).sqrt(), "n={n} var={var}");
        }
    }

    #[test]
    fn cointegrating_combinations_have_bounded_variance() {
        let spec = DgpSpec::cointegrated_d4_r2(2000, 0);
        let beta = spec.beta_matrix().unwrap();
        let mut early = 0.0;
        let mut late = 0.0;
        let mut level_late = 0.0;
        let reps = 50;
        for s in 0..reps {
            let mut sp = spec.clone();
            sp.seed = s;
            let panel = generate(&sp).unwrap();
            let ec = panel.values() * &beta;
            early += ec.row(100).norm_squared();
            late += ec.row(1999).norm_squared();
            level_late += (panel.values().row(1999) - panel.values().row(0)).norm_squared();
        }
        let (early, late, level_late) = (early / reps as f64, late / reps as f64, level_late / reps as f64);
        // stationary combinations: same spread early and late; levels wander
        assert!(late < 2.0 * early && early < 2.0 * late, "{early} {late}");
        assert!(level_late > 20.0 * late);
    }

    #[test]
    fn explosive_and_malformed_specs_rejected() {
        let mut spec = DgpSpec::stationary(2, 10, 0);
        spec.alpha = vec![vec![0.5, 0.0], vec![0.0, 0.5]];
        assert!(matches!(generate(&spec), Err(Error::InvalidSpec(_))));
        let mut bad = DgpSpec::random_walk(2, 10, 0);
        bad.noise_cov = vec![vec![1.0]];
        assert!(matches!(generate(&bad), Err(Error::InvalidSpec(_))));
        // declared rank inconsistent with the unit-root count
        let mut wrong = DgpSpec::stationary(2, 10, 0);
        wrong.r_true = 2;
        wrong.alpha = vec![vec![0.0, 0.0], vec![0.0, -0.5]];
        assert!(matches!(generate(&wrong), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn spec_roundtrips_through_toml() {
        let spec = DgpSpec::cointegrated_d4_r2(1234, 99);
        let text = toml::to_string(&spec).unwrap();
        let back: DgpSpec = toml::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
