//! Synthetic chain-graph data with known ground truth, for recovery
//! benchmarks.
//!
//! The true precision matrix is the AR(1)-style band matrix with unit
//! diagonal and 0.4 on the first off-diagonals (positive definite for any
//! dimension); the true coefficient matrix has a configurable fraction of
//! ±1 entries, the rest zero. Latent Gaussian rows follow the CAR form
//! w_i ~ N(Σ·Bᵀx_i, Σ) with standard-normal predictors, and observations
//! derive from w per link (identity passthrough, probit thresholding,
//! Poisson counts with mean e^w, multinomial compositions against a
//! reference category).

use crate::error::{Error, Result};
use crate::ingest::{ColumnData, DataTable};
use crate::links::Link;
use crate::rng::RngStream;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

/// Generator settings. `b_frac` is the expected fraction of nonzero
/// coefficient entries; `logit_total` is the per-row count total for
/// compositional data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub k: usize,
    pub p: usize,
    pub n: usize,
    pub link: Link,
    pub seed: u64,
    pub b_frac: f64,
    pub logit_total: u64,
}

impl SimConfig {
    pub fn new(k: usize, p: usize, n: usize, link: Link, seed: u64) -> Self {
        SimConfig {
            k,
            p,
            n,
            link,
            seed,
            b_frac: 0.3,
            logit_total: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::dims(format!(
                "simulation needs k ≥ 1 and n ≥ 1 (got k={}, n={})",
                self.k, self.n
            )));
        }
        if self.link == Link::Logit && self.k < 2 {
            return Err(Error::LogitNeedsTwoResponses);
        }
        if !(0.0..=1.0).contains(&self.b_frac) {
            return Err(Error::dims(format!(
                "b_frac must lie in [0,1], got {}",
                self.b_frac
            )));
        }
        if self.link == Link::Logit && self.logit_total == 0 {
            return Err(Error::dims("logit_total must be positive"));
        }
        Ok(())
    }

    /// Dimension of the Gaussian core (k − 1 under the logit link).
    pub fn k_core(&self) -> usize {
        if self.link == Link::Logit {
            self.k - 1
        } else {
            self.k
        }
    }
}

/// Ground truth written alongside the generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTruth {
    pub config: SimConfig,
    pub k_core: usize,
    /// True precision matrix (k_core × k_core), row-major.
    pub omega: Vec<Vec<f64>>,
    /// True coefficients (p × k_core), row-major.
    pub b: Vec<Vec<f64>>,
}

impl SimTruth {
    pub fn omega_matrix(&self) -> DMatrix<f64> {
        let k = self.k_core;
        DMatrix::from_fn(k, k, |i, j| self.omega[i][j])
    }

    pub fn b_matrix(&self) -> DMatrix<f64> {
        let k = self.k_core;
        DMatrix::from_fn(self.config.p, k, |i, j| self.b[i][j])
    }
}

/// Band precision: unit diagonal, 0.4 on the first off-diagonals.
pub fn band_precision(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else if i.abs_diff(j) == 1 {
            0.4
        } else {
            0.0
        }
    })
}

fn multinomial_row<R: Rng>(rng: &mut R, total: u64, probs: &[f64]) -> Result<Vec<u64>> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = total;
    let mut denom = 1.0;
    for (c, prob) in probs.iter().enumerate() {
        if c + 1 == probs.len() {
            out[c] = remaining;
            break;
        }
        if remaining == 0 {
            break;
        }
        let q = (prob / denom).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::DomainError {
                what: "multinomial draw",
                detail: e.to_string(),
            })?
            .sample(rng);
        out[c] = draw;
        remaining -= draw;
        denom = (denom - prob).max(f64::MIN_POSITIVE);
    }
    Ok(out)
}

/// Generate a dataset plus its ground truth. Deterministic in the seed.
/// Response columns are named y1..yk, predictors x1..xp.
pub fn simulate(config: &SimConfig) -> Result<(DataTable, SimTruth)> {
    config.validate()?;
    let kc = config.k_core();
    let (n, p, k) = (config.n, config.p, config.k);
    let mut rng = RngStream::new(config.seed, 0);

    let omega = band_precision(kc);
    let sigma = Cholesky::new(omega.clone())
        .ok_or_else(|| Error::breakdown("band precision is positive definite by construction"))?
        .inverse();
    let chol_sigma =
        Cholesky::new(sigma.clone()).ok_or_else(|| Error::breakdown("covariance Cholesky"))?;

    let mut b = DMatrix::zeros(p, kc);
    for i in 0..p {
        for j in 0..kc {
            if rng.gen::<f64>() < config.b_frac {
                b[(i, j)] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            }
        }
    }

    let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));

    // w_i = Σ·Bᵀx_i + L·z, the CAR mean plus correlated noise
    let mut w = DMatrix::zeros(n, kc);
    for i in 0..n {
        let eta = if p > 0 {
            b.tr_mul(&x.row(i).transpose())
        } else {
            DVector::zeros(kc)
        };
        let mean = &sigma * eta;
        let z = DVector::from_fn(kc, |_, _| StandardNormal.sample(&mut rng));
        let noise = chol_sigma.l() * z;
        for j in 0..kc {
            w[(i, j)] = mean[j] + noise[j];
        }
    }

    let mut y = DMatrix::zeros(n, k);
    match config.link {
        Link::Identity => y.copy_from(&w),
        Link::Probit => {
            for i in 0..n {
                for j in 0..k {
                    y[(i, j)] = if w[(i, j)] > 0.0 { 1.0 } else { 0.0 };
                }
            }
        }
        Link::Log => {
            for i in 0..n {
                for j in 0..k {
                    let lambda = w[(i, j)].exp().clamp(1e-12, 1e8);
                    let draw = Poisson::new(lambda)
                        .map_err(|e| Error::DomainError {
                            what: "poisson draw",
                            detail: e.to_string(),
                        })?
                        .sample(&mut rng);
                    y[(i, j)] = draw.round();
                }
            }
        }
        Link::Logit => {
            for i in 0..n {
                // softmax over [w_i, 0] with the last category as reference
                let mut logits: Vec<f64> = (0..kc).map(|j| w[(i, j)]).collect();
                logits.push(0.0);
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut probs: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = probs.iter().sum();
                for p in probs.iter_mut() {
                    *p /= s;
                }
                debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let counts = multinomial_row(&mut rng, config.logit_total, &probs)?;
                for j in 0..k {
                    y[(i, j)] = counts[j] as f64;
                }
            }
        }
    }

    let mut names = Vec::with_capacity(k + p);
    let mut columns = Vec::with_capacity(k + p);
    for j in 0..k {
        names.push(format!("y{}", j + 1));
        columns.push(ColumnData::Numeric(y.column(j).iter().copied().collect()));
    }
    for j in 0..p {
        names.push(format!("x{}", j + 1));
        columns.push(ColumnData::Numeric(x.column(j).iter().copied().collect()));
    }
    let table = DataTable::from_columns(names, columns);

    let truth = SimTruth {
        config: config.clone(),
        k_core: kc,
        omega: (0..kc)
            .map(|i| (0..kc).map(|j| omega[(i, j)]).collect())
            .collect(),
        b: (0..p)
            .map(|i| (0..kc).map(|j| b[(i, j)]).collect())
            .collect(),
    };
    Ok((table, truth))
}

/// The formula matching a simulated table: `y1 + … + yk ~ x1 + … + xp`.
pub fn formula_for(config: &SimConfig) -> String {
    let ys: Vec<String> = (1..=config.k).map(|j| format!("y{j}")).collect();
    let xs: Vec<String> = (1..=config.p).map(|j| format!("x{j}")).collect();
    format!("{} ~ {}", ys.join(" + "), xs.join(" + "))
}
