//! Model state and hyperparameters.
//!
//! The chain graph couples k responses and p predictors through a Gaussian
//! core: given predictors x, the (possibly latent) response vector w follows
//! a multivariate normal with precision matrix Omega and natural parameter
//! eta = mu + Bᵀx, i.e. mean Omega⁻¹(mu + Bᵀx). Off-diagonal entries of
//! Omega are response–response conditional dependencies; entries of B are
//! predictor→response dependencies. Sparsity comes from Laplace-type priors:
//! Gaussian scale mixtures (auxiliary tau² variances) on B entries and on
//! Omega off-diagonals, exponential priors on the Omega diagonal, with the
//! shrinkage rates lambda_beta / lambda_omega carrying Gamma hyperpriors —
//! a single shared rate per block, or one rate per entry in the adaptive
//! variant.

use crate::error::{Error, Result};
use crate::ingest::DesignMatrices;
use crate::links::Link;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Phi^{-1}(0.75): the latent-scale magnitude assigned to each binary
/// observation at initialization.
pub(crate) const PROBIT_INIT: f64 = 0.674_489_750_196_081_7;

/// Hyperparameters shared by all sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Gamma hyperprior shape for lambda_beta.
    pub r_beta: f64,
    /// Gamma hyperprior rate for lambda_beta.
    pub delta_beta: f64,
    /// Gamma hyperprior shape for lambda_omega.
    pub r_omega: f64,
    /// Gamma hyperprior rate for lambda_omega.
    pub delta_omega: f64,
    /// Per-entry shrinkage rates instead of shared scalars.
    pub adaptive: bool,
    /// Prior precision of the intercept block; 0 is the default improper
    /// flat prior. Positive values give mu a N(0, 1/precision) prior, which
    /// joint-distribution tests need.
    pub mu_prior_precision: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            r_beta: 1.0,
            delta_beta: 0.01,
            r_omega: 1.0,
            delta_omega: 0.01,
            adaptive: false,
            mu_prior_precision: 0.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_beta", self.r_beta),
            ("delta_beta", self.delta_beta),
            ("r_omega", self.r_omega),
            ("delta_omega", self.delta_omega),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::DomainError {
                    what: "hyperparams",
                    detail: format!("{name} must be positive and finite, got {v}"),
                });
            }
        }
        if self.mu_prior_precision < 0.0 || !self.mu_prior_precision.is_finite() {
            return Err(Error::DomainError {
                what: "hyperparams",
                detail: format!(
                    "mu_prior_precision must be nonnegative and finite, got {}",
                    self.mu_prior_precision
                ),
            });
        }
        Ok(())
    }
}

/// A shrinkage-rate block: one shared rate, or one rate per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shrinkage {
    Scalar(f64),
    PerEntry(DMatrix<f64>),
}

impl Shrinkage {
    /// Rate applying to entry (i, j).
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        match self {
            Shrinkage::Scalar(v) => *v,
            Shrinkage::PerEntry(m) => m[(i, j)],
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, Shrinkage::PerEntry(_))
    }

    /// Flatten to CSV/report order. For the Omega block pass
    /// `upper_triangular = true` to emit i ≤ j entries only.
    pub fn flatten(&self, upper_triangular: bool) -> Vec<f64> {
        match self {
            Shrinkage::Scalar(v) => vec![*v],
            Shrinkage::PerEntry(m) => {
                let mut out = Vec::new();
                for i in 0..m.nrows() {
                    let j0 = if upper_triangular { i } else { 0 };
                    for j in j0..m.ncols() {
                        out.push(m[(i, j)]);
                    }
                }
                out
            }
        }
    }
}

/// Full sampler state for one chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainState {
    /// k_eff × k_eff response-block precision matrix (SPD).
    pub omega: DMatrix<f64>,
    /// p × k_eff predictor coefficients on the natural-parameter scale.
    pub b: DMatrix<f64>,
    /// k_eff intercept (natural parameter).
    pub mu: DVector<f64>,
    /// n × k_eff latent Gaussian block; `None` under the identity link.
    pub z: Option<DMatrix<f64>>,
    /// p × k_eff scale-mixture variances for B.
    pub tau2_b: DMatrix<f64>,
    /// k_eff × k_eff symmetric scale-mixture variances for Omega
    /// off-diagonals (diagonal entries unused, kept at 0).
    pub tau2_omega: DMatrix<f64>,
    pub lambda_beta: Shrinkage,
    pub lambda_omega: Shrinkage,
    /// Per-coordinate random-walk proposal scales (log / logit links).
    pub mh_step: Option<DMatrix<f64>>,
    /// Acceptance counts for the current adaptation batch.
    pub mh_accept: Option<DMatrix<u32>>,
    /// Sweeps accumulated in the current adaptation batch.
    pub mh_batch_fill: u32,
    /// Completed adaptation batches (drives the diminishing step size).
    pub mh_batches: u32,
}

impl ChainState {
    pub fn k_eff(&self) -> usize {
        self.omega.nrows()
    }

    pub fn p(&self) -> usize {
        self.b.nrows()
    }

    /// Check every block for finiteness and positivity where required.
    pub fn assert_finite(&self) -> Result<()> {
        let all_finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !all_finite(&self.omega)
            || !all_finite(&self.b)
            || !self.mu.iter().all(|v| v.is_finite())
            || !self.z.as_ref().is_none_or(all_finite)
        {
            return Err(Error::breakdown("non-finite entry in chain state"));
        }
        if !self.tau2_b.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::breakdown("tau2_b left (0, inf)"));
        }
        Ok(())
    }
}

/// Deterministic initial state for a design.
///
/// Omega starts at the identity, B at zero, all mixture variances and
/// shrinkage rates at one. The latent block starts at a link-specific
/// transform of the observations (probit: ±Phi⁻¹(0.75) by class; log:
/// ln(y+0.5); logit: log-ratio of (y+0.5) against the reference category),
/// and mu at the column means of the resulting Gaussian block.
pub fn init_state(design: &DesignMatrices, hyper: &Hyperparams) -> Result<ChainState> {
    hyper.validate()?;
    let n = design.n();
    let k = design.k_eff();
    let p = design.p();
    if k == 0 {
        return Err(Error::dims("no responses in the Gaussian core"));
    }

    let z = match design.link {
        Link::Identity => None,
        Link::Probit => {
            let mut z = DMatrix::zeros(n, k);
            for i in 0..n {
                for j in 0..k {
                    z[(i, j)] = if design.y[(i, j)] > 0.5 {
                        PROBIT_INIT
                    } else {
                        -PROBIT_INIT
                    };
                }
            }
            Some(z)
        }
        Link::Log => {
            let mut z = DMatrix::zeros(n, k);
            for i in 0..n {
                for j in 0..k {
                    z[(i, j)] = (design.y[(i, j)] + 0.5).ln();
                }
            }
            Some(z)
        }
        Link::Logit => {
            let reference = design.k_raw() - 1;
            let mut z = DMatrix::zeros(n, k);
            for i in 0..n {
                let denom = design.y[(i, reference)] + 0.5;
                for j in 0..k {
                    z[(i, j)] = ((design.y[(i, j)] + 0.5) / denom).ln();
                }
            }
            Some(z)
        }
    };

    let w = z.as_ref().unwrap_or(&design.y);
    let mut mu = DVector::zeros(k);
    if n > 0 {
        for j in 0..k {
            mu[j] = w.column(j).sum() / n as f64;
        }
    }

    let (lambda_beta, lambda_omega) = if hyper.adaptive {
        (
            Shrinkage::PerEntry(DMatrix::from_element(p, k, 1.0)),
            Shrinkage::PerEntry(DMatrix::from_element(k, k, 1.0)),
        )
    } else {
        (Shrinkage::Scalar(1.0), Shrinkage::Scalar(1.0))
    };

    let needs_mh = matches!(design.link, Link::Log | Link::Logit);
    Ok(ChainState {
        omega: DMatrix::identity(k, k),
        b: DMatrix::zeros(p, k),
        mu,
        z,
        tau2_b: DMatrix::from_element(p, k, 1.0),
        tau2_omega: {
            let mut m = DMatrix::from_element(k, k, 1.0);
            m.fill_diagonal(0.0);
            m
        },
        lambda_beta,
        lambda_omega,
        mh_step: needs_mh.then(|| DMatrix::from_element(n, k, 1.0)),
        mh_accept: needs_mh.then(|| DMatrix::from_element(n, k, 0u32)),
        mh_batch_fill: 0,
        mh_batches: 0,
    })
}

/// Retained draws of the reported blocks (mixture variances are auxiliary
/// and not stored).
#[derive(Debug, Clone, Default)]
pub struct PosteriorDraws {
    pub omegas: Vec<DMatrix<f64>>,
    pub bs: Vec<DMatrix<f64>>,
    pub mus: Vec<DVector<f64>>,
    pub lambda_betas: Vec<Shrinkage>,
    pub lambda_omegas: Vec<Shrinkage>,
}

impl PosteriorDraws {
    pub fn push(&mut self, state: &ChainState) {
        self.omegas.push(state.omega.clone());
        self.bs.push(state.b.clone());
        self.mus.push(state.mu.clone());
        self.lambda_betas.push(state.lambda_beta.clone());
        self.lambda_omegas.push(state.lambda_omega.clone());
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

// ---- stable parameter labels (1-indexed, upper triangle for Omega) ----

pub fn omega_labels(k: usize) -> Vec<String> {
    let mut out = Vec::new();
    for i in 1..=k {
        for j in i..=k {
            out.push(format!("omega[{i},{j}]"));
        }
    }
    out
}

pub fn omega_to_row(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let mut out = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in i..k {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn b_labels(p: usize, k: usize) -> Vec<String> {
    let mut out = Vec::new();
    for i in 1..=p {
        for j in 1..=k {
            out.push(format!("b[{i},{j}]"));
        }
    }
    out
}

pub fn b_to_row(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn mu_labels(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("mu[{j}]")).collect()
}

pub fn lambda_labels(p: usize, k: usize, adaptive: bool) -> Vec<String> {
    if !adaptive {
        return vec!["lambda_beta".into(), "lambda_omega".into()];
    }
    let mut out = Vec::new();
    for i in 1..=p {
        for j in 1..=k {
            out.push(format!("lambda_beta[{i},{j}]"));
        }
    }
    for i in 1..=k {
        for j in i..=k {
            out.push(format!("lambda_omega[{i},{j}]"));
        }
    }
    out
}

pub fn lambda_to_row(beta: &Shrinkage, omega: &Shrinkage) -> Vec<f64> {
    let mut out = beta.flatten(false);
    out.extend(omega.flatten(true));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn probit_design() -> DesignMatrices {
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = DMatrix::from_row_slice(3, 1, &[0.1, -0.2, 0.3]);
        DesignMatrices::from_parts(y, x, Link::Probit).unwrap()
    }

    #[test]
    fn init_matches_contract() {
        let d = probit_design();
        let s = init_state(&d, &Hyperparams::default()).unwrap();
        assert_eq!(s.omega, DMatrix::identity(2, 2));
        assert!(s.b.iter().all(|v| *v == 0.0));
        assert!(s.tau2_b.iter().all(|v| *v == 1.0));
        let z = s.z.as_ref().unwrap();
        assert!((z[(0, 0)] - 0.674).abs() < 1e-3);
        assert!((z[(0, 1)] + 0.674).abs() < 1e-3);
        // mu = column means of the initialized latent block
        assert!((s.mu[0] - z.column(0).sum() / 3.0).abs() < 1e-15);
        assert!(s.mh_step.is_none());
    }

    #[test]
    fn init_log_and_logit_transforms() {
        let y = DMatrix::from_row_slice(2, 3, &[3.0, 0.0, 5.0, 1.0, 2.0, 1.0]);
        let x = DMatrix::zeros(2, 0);
        let d = DesignMatrices::from_parts(y.clone(), x.clone(), Link::Log).unwrap();
        let s = init_state(&d, &Hyperparams::default()).unwrap();
        assert!((s.z.as_ref().unwrap()[(0, 0)] - 3.5f64.ln()).abs() < 1e-15);
        assert!(s.mh_step.is_some());

        let d = DesignMatrices::from_parts(y, x, Link::Logit).unwrap();
        let s = init_state(&d, &Hyperparams::default()).unwrap();
        assert_eq!(s.k_eff(), 2);
        let z = s.z.as_ref().unwrap();
        assert!((z[(0, 0)] - (3.5f64 / 5.5).ln()).abs() < 1e-15);
        assert!((z[(0, 1)] - (0.5f64 / 5.5).ln()).abs() < 1e-15);
    }

    #[test]
    fn adaptive_init_builds_rate_matrices() {
        let d = probit_design();
        let hyper = Hyperparams {
            adaptive: true,
            ..Default::default()
        };
        let s = init_state(&d, &hyper).unwrap();
        match &s.lambda_beta {
            Shrinkage::PerEntry(m) => assert_eq!((m.nrows(), m.ncols()), (1, 2)),
            _ => panic!("expected per-entry"),
        }
        assert!(s.lambda_omega.is_adaptive());
    }

    #[test]
    fn init_is_deterministic() {
        let d = probit_design();
        let a = init_state(&d, &Hyperparams::default()).unwrap();
        let b = init_state(&d, &Hyperparams::default()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn bad_hyperparams_rejected() {
        let d = probit_design();
        let hyper = Hyperparams {
            delta_beta: 0.0,
            ..Default::default()
        };
        assert!(init_state(&d, &hyper).is_err());
    }

    #[test]
    fn label_order_is_stable() {
        assert_eq!(
            omega_labels(3),
            vec![
                "omega[1,1]",
                "omega[1,2]",
                "omega[1,3]",
                "omega[2,2]",
                "omega[2,3]",
                "omega[3,3]"
            ]
        );
        assert_eq!(b_labels(2, 2), vec!["b[1,1]", "b[1,2]", "b[2,1]", "b[2,2]"]);
        assert_eq!(
            lambda_labels(1, 2, true),
            vec![
                "lambda_beta[1,1]",
                "lambda_beta[1,2]",
                "lambda_omega[1,1]",
                "lambda_omega[1,2]",
                "lambda_omega[2,2]"
            ]
        );
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(omega_to_row(&m), vec![1.0, 2.0, 4.0]);
    }
}
