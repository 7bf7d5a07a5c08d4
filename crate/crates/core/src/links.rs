//! Response links and latent-data updates.
//!
//! Identity treats the responses as the Gaussian block directly. The other
//! links put a latent Gaussian z between the chain-graph core and the
//! observations: probit thresholds it against zero (binary y), log drives a
//! Poisson mean exp(z) (count y), and logit drives multinomial category
//! probabilities through an additive log-ratio against the last response
//! (compositional count y).
//!
//! Given the rest of the state, row i of the latent block has the Gaussian
//! conditional z_ij | z_{i,-j} ~ N((eta_ij − Σ_{l≠j} ω_jl z_il) / ω_jj,
//! 1/ω_jj) from the core, tilted by the observation likelihood. Probit keeps
//! the draw exact (truncated normal); log and logit use a per-coordinate
//! random-walk Metropolis step whose scale adapts toward a 0.44 acceptance
//! rate during burn-in (Robbins–Monro on the log scale, batches of 50
//! sweeps).

use crate::dist::sample_truncnorm_sign;
use crate::ingest::DesignMatrices;
use crate::model::ChainState;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Sweeps per adaptation batch.
pub const MH_BATCH: u32 = 50;
/// Target acceptance rate for the coordinate-wise random walk.
pub const MH_TARGET: f64 = 0.44;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Identity,
    Probit,
    Log,
    Logit,
}

impl Link {
    pub fn as_str(&self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Probit => "probit",
            Link::Log => "log",
            Link::Logit => "logit",
        }
    }

    pub fn has_latent(&self) -> bool {
        !matches!(self, Link::Identity)
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Link {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(Link::Identity),
            "probit" => Ok(Link::Probit),
            "log" => Ok(Link::Log),
            "logit" => Ok(Link::Logit),
            other => Err(format!(
                "unknown link '{other}' (expected identity, probit, log, or logit)"
            )),
        }
    }
}

/// eta = 1 muᵀ + X B, the natural parameter for every observation.
pub(crate) fn natural_parameter(state: &ChainState, design: &DesignMatrices) -> DMatrix<f64> {
    let n = design.n();
    let k = state.k_eff();
    let mut eta = DMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..k {
            eta[(i, j)] = state.mu[j];
        }
    }
    if design.p() > 0 {
        eta += &design.x * &state.b;
    }
    eta
}

/// Mean and variance of z_ij given the other coordinates of row i.
#[inline]
fn conditional_normal(
    state: &ChainState,
    z: &DMatrix<f64>,
    eta_ij: f64,
    i: usize,
    j: usize,
) -> (f64, f64) {
    let k = state.k_eff();
    let mut cross = 0.0;
    for l in 0..k {
        if l != j {
            cross += state.omega[(j, l)] * z[(i, l)];
        }
    }
    let var = 1.0 / state.omega[(j, j)];
    ((eta_ij - cross) * var, var)
}

/// One full pass over the latent block for the active link.
///
/// `adapt` enables proposal-scale adaptation and should be true only during
/// burn-in; after burn-in the scales freeze so the chain is a fixed Markov
/// kernel.
pub fn update_latent<R: Rng>(
    state: &mut ChainState,
    design: &DesignMatrices,
    rng: &mut R,
    adapt: bool,
) {
    match design.link {
        Link::Identity => {}
        Link::Probit => update_probit(state, design, rng),
        Link::Log => update_metropolis(state, design, rng, adapt, Link::Log),
        Link::Logit => update_metropolis(state, design, rng, adapt, Link::Logit),
    }
}

fn update_probit<R: Rng>(state: &mut ChainState, design: &DesignMatrices, rng: &mut R) {
    let eta = natural_parameter(state, design);
    let mut z = state.z.take().expect("probit link carries a latent block");
    for i in 0..design.n() {
        for j in 0..design.k_eff() {
            let (mean, var) = conditional_normal(state, &z, eta[(i, j)], i, j);
            let positive = design.y[(i, j)] > 0.5;
            z[(i, j)] = sample_truncnorm_sign(rng, mean, var.sqrt(), positive);
        }
    }
    state.z = Some(z);
}

/// Observation log-likelihood contribution of z_ij, up to z-free constants.
///
/// log: y·z − exp(z) (Poisson with mean e^z).
/// logit: y_ij·z − N_i·log(e^z + Σ_{l≠j} e^{z_il} + 1), the multinomial
/// log-likelihood of row i as a function of z_ij alone (the +1 is the
/// reference category).
#[inline]
fn obs_loglik(link: Link, y_ij: f64, row_total: f64, rest_logsum: f64, z: f64) -> f64 {
    match link {
        Link::Log => y_ij * z - z.exp(),
        Link::Logit => {
            let m = rest_logsum.max(z);
            let lse = m + ((rest_logsum - m).exp() + (z - m).exp()).ln();
            y_ij * z - row_total * lse
        }
        _ => unreachable!("metropolis update only runs for log/logit"),
    }
}

fn update_metropolis<R: Rng>(
    state: &mut ChainState,
    design: &DesignMatrices,
    rng: &mut R,
    adapt: bool,
    link: Link,
) {
    let eta = natural_parameter(state, design);
    let mut z = state.z.take().expect("link carries a latent block");
    let mut steps = state.mh_step.take().expect("link carries proposal scales");
    let mut accepts = state.mh_accept.take().expect("link carries accept counts");
    let k = design.k_eff();

    for i in 0..design.n() {
        let row_total = if link == Link::Logit {
            design.y.row(i).sum()
        } else {
            0.0
        };
        for j in 0..k {
            let (mean, var) = conditional_normal(state, &z, eta[(i, j)], i, j);
            // log-sum-exp of the other latent coordinates plus the reference 0
            let rest_logsum = if link == Link::Logit {
                let mut m = 0.0f64;
                for l in 0..k {
                    if l != j {
                        m = m.max(z[(i, l)]);
                    }
                }
                let mut s = (-m).exp();
                for l in 0..k {
                    if l != j {
                        s += (z[(i, l)] - m).exp();
                    }
                }
                m + s.ln()
            } else {
                0.0
            };

            let cur = z[(i, j)];
            let noise: f64 = StandardNormal.sample(rng);
            let prop = cur + steps[(i, j)] * noise;
            let log_ratio = obs_loglik(link, design.y[(i, j)], row_total, rest_logsum, prop)
                - obs_loglik(link, design.y[(i, j)], row_total, rest_logsum, cur)
                + (-(prop - mean).powi(2) + (cur - mean).powi(2)) / (2.0 * var);
            if log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio {
                z[(i, j)] = prop;
                accepts[(i, j)] += 1;
            }
        }
    }

    if adapt {
        state.mh_batch_fill += 1;
        if state.mh_batch_fill >= MH_BATCH {
            state.mh_batches += 1;
            let delta = (1.0 / f64::from(state.mh_batches).sqrt()).min(0.1);
            for idx in 0..steps.len() {
                let rate = f64::from(accepts[idx]) / f64::from(MH_BATCH);
                let log_step = steps[idx].ln() + if rate > MH_TARGET { delta } else { -delta };
                steps[idx] = log_step.clamp(-8.0, 8.0).exp();
                accepts[idx] = 0;
            }
            state.mh_batch_fill = 0;
        }
    }

    state.z = Some(z);
    state.mh_step = Some(steps);
    state.mh_accept = Some(accepts);
}
