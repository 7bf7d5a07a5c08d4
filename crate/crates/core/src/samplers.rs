//! One-sweep Gibbs kernels.
//!
//! Likelihood (CAR form): w_i ~ N(Σ(μ + Bᵀx_i), Σ) with Σ = Ω⁻¹, so
//! log p(W | Ω, B, μ) = (n/2)·log|Ω| − ½tr(SΩ) + Σ_i w_iᵀη_i − ½tr(HΩ⁻¹),
//! where S = WᵀW, η = 1μᵀ + XB and H = ηᵀη. Priors: b_ij | τ² ~ N(0, τ²)
//! with τ² ~ Exp(λ_β²/2) (a Laplace scale mixture), the same mixture on the
//! Ω off-diagonals, Exp(λ_Ω/2) on the Ω diagonal restricted to the positive
//! definite cone, flat (or optionally Gaussian) prior on μ, and Gamma
//! hyperpriors on the shrinkage rates.
//!
//! One sweep updates, in order: tau2_B; B (column-wise Gaussian); μ
//! (Gaussian); Ω (column-partition block updates: Gaussian off-diagonal
//! vector, then generalized-inverse-Gaussian Schur complement, which keeps
//! Ω positive definite by construction); λ_Ω followed immediately by
//! tau2_Omega; λ_β. The shrinkage rates are drawn with their mixture
//! variances integrated out, which makes the (λ, τ) pair a joint block
//! draw — λ_Ω/tau2_Omega are adjacent within the sweep, and λ_β at the
//! sweep end is adjacent to the next sweep's opening tau2_B draw.

use crate::error::{Error, Result};
use crate::ingest::DesignMatrices;
use crate::model::{ChainState, Hyperparams, Shrinkage};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::dist::{sample_gig, sample_inverse_gaussian};

/// Coefficients closer to zero than this use the limiting Gamma draw for
/// their mixture variance instead of the inverse-Gaussian conditional.
const TINY_COEF: f64 = 1e-10;

/// Cholesky with the documented jitter policy: on failure add
/// 1e-10·trace/dim to the diagonal, retry at most 3 times, then give up.
/// `what` names the matrix in the error if every attempt fails.
pub fn chol_spd(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let dim = m.nrows();
    let jitter = 1e-10 * m.trace() / dim.max(1) as f64;
    let mut padded = m.clone();
    for _ in 0..3 {
        for d in 0..dim {
            padded[(d, d)] += jitter;
        }
        if let Some(c) = Cholesky::new(padded.clone()) {
            return Ok(c);
        }
    }
    Err(Error::breakdown(what))
}

/// Draw x ~ N(Q⁻¹·linear, Q⁻¹) given the Cholesky factor of Q.
fn sample_mvn_prec<R: Rng>(
    rng: &mut R,
    chol: &Cholesky<f64, Dyn>,
    linear: &DVector<f64>,
) -> Result<DVector<f64>> {
    let mean = chol.solve(linear);
    let noise_std = DVector::from_fn(linear.len(), |_, _| StandardNormal.sample(rng));
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&noise_std)
        .ok_or_else(|| Error::breakdown("triangular solve in Gaussian block draw"))?;
    Ok(mean + noise)
}

fn draw_gamma<R: Rng>(rng: &mut R, shape: f64, rate: f64) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::DomainError {
        what: "gamma draw",
        detail: format!("shape {shape}, rate {rate}: {e}"),
    })?;
    Ok(g.sample(rng).max(f64::MIN_POSITIVE))
}

/// Mixture variance τ² | coefficient, rate. The conditional of 1/τ² is
/// inverse-Gaussian(λ/|coef|, λ²); at coef ≈ 0 it degenerates to
/// τ² ~ Gamma(1/2, rate λ²/2).
fn draw_tau2<R: Rng>(rng: &mut R, coef_abs: f64, lambda: f64) -> Result<f64> {
    if coef_abs < TINY_COEF {
        let t = draw_gamma(rng, 0.5, lambda * lambda / 2.0)?;
        Ok(t.max(f64::MIN_POSITIVE))
    } else {
        let inv = sample_inverse_gaussian(rng, lambda / coef_abs, lambda * lambda)?;
        Ok((1.0 / inv).max(f64::MIN_POSITIVE))
    }
}

fn eta_matrix(mu: &DVector<f64>, b: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let k = mu.len();
    let mut eta = DMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..k {
            eta[(i, j)] = mu[j];
        }
    }
    if x.ncols() > 0 {
        eta += x * b;
    }
    eta
}

fn check_shrinkage(state: &ChainState, hyper: &Hyperparams, kernel: &'static str) -> Result<()> {
    if state.lambda_beta.is_adaptive() != hyper.adaptive
        || state.lambda_omega.is_adaptive() != hyper.adaptive
    {
        return Err(Error::DomainError {
            what: kernel,
            detail: "state shrinkage layout disagrees with hyper.adaptive".into(),
        });
    }
    Ok(())
}

/// One CAR-LASSO sweep (shared scalar shrinkage rates).
///
/// Leaves the latent block untouched; the links module owns it.
pub fn sweep_carlasso<R: Rng>(
    state: &mut ChainState,
    design: &DesignMatrices,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<()> {
    if hyper.adaptive {
        return Err(Error::DomainError {
            what: "sweep_carlasso",
            detail: "adaptive hyperparameters require sweep_caralasso".into(),
        });
    }
    check_shrinkage(state, hyper, "sweep_carlasso")?;
    let z = state.z.take();
    let out = sweep_impl(
        state,
        z.as_ref().unwrap_or(&design.y),
        &design.x,
        hyper,
        rng,
        true,
    );
    state.z = z;
    out
}

/// One adaptive CAR-LASSO sweep (per-entry shrinkage rates).
pub fn sweep_caralasso<R: Rng>(
    state: &mut ChainState,
    design: &DesignMatrices,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<()> {
    if !hyper.adaptive {
        return Err(Error::DomainError {
            what: "sweep_caralasso",
            detail: "non-adaptive hyperparameters require sweep_carlasso".into(),
        });
    }
    check_shrinkage(state, hyper, "sweep_caralasso")?;
    let z = state.z.take();
    let out = sweep_impl(
        state,
        z.as_ref().unwrap_or(&design.y),
        &design.x,
        hyper,
        rng,
        true,
    );
    state.z = z;
    out
}

/// One Bayesian graphical LASSO sweep: Ω and μ only, no predictors.
/// Adaptivity follows `hyper.adaptive` exactly as in the CAR kernels.
pub fn sweep_bglasso<R: Rng>(
    state: &mut ChainState,
    y: &DMatrix<f64>,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<()> {
    check_shrinkage(state, hyper, "sweep_bglasso")?;
    let empty = DMatrix::zeros(y.nrows(), 0);
    sweep_impl(state, y, &empty, hyper, rng, false)
}

fn sweep_impl<R: Rng>(
    state: &mut ChainState,
    w: &DMatrix<f64>,
    x: &DMatrix<f64>,
    hyper: &Hyperparams,
    rng: &mut R,
    update_b: bool,
) -> Result<()> {
    let n = w.nrows();
    let k = state.k_eff();
    let p = if update_b { state.p() } else { 0 };
    if w.ncols() != k {
        return Err(Error::dims(format!(
            "Gaussian block has {} columns, state expects {k}",
            w.ncols()
        )));
    }
    if update_b && x.nrows() != n {
        return Err(Error::dims(format!(
            "predictor block has {} rows, response block {n}",
            x.nrows()
        )));
    }

    // Fresh covariance at sweep start; maintained in O(k²) during the
    // column updates below.
    let mut sigma =
        chol_spd(&state.omega, "precision matrix lost positive definiteness")?.inverse();

    // (1) tau2_B | B, lambda_beta
    if update_b {
        for i in 0..p {
            for j in 0..k {
                let rate = state.lambda_beta.rate(i, j);
                state.tau2_b[(i, j)] = draw_tau2(rng, state.b[(i, j)].abs(), rate)?;
            }
        }
    }

    let ones = DVector::from_element(n, 1.0);
    let (xtw, s_x, sx1) = if p > 0 {
        (x.tr_mul(w), x.tr_mul(x), x.tr_mul(&ones))
    } else {
        (
            DMatrix::zeros(0, k),
            DMatrix::zeros(0, 0),
            DVector::zeros(0),
        )
    };

    // (2) B, one response column at a time:
    // Q_l = Σ_ll·XᵀX + diag(1/τ²_·l),
    // r_l = (XᵀW)_·l − (Σμ)_l·Xᵀ1 − Σ_{m≠l} Σ_lm·XᵀX·b_m.
    if update_b && p > 0 {
        let sig_mu = &sigma * &state.mu;
        for l in 0..k {
            let mut q = &s_x * sigma[(l, l)];
            for i in 0..p {
                q[(i, i)] += 1.0 / state.tau2_b[(i, l)];
            }
            let mut cross = DVector::zeros(p);
            for m in 0..k {
                if m != l {
                    cross.axpy(sigma[(l, m)], &state.b.column(m), 1.0);
                }
            }
            let mut r = xtw.column(l).clone_owned();
            r.axpy(-sig_mu[l], &sx1, 1.0);
            r -= &s_x * cross;
            let chol = chol_spd(&q, "coefficient-column conditional precision")?;
            let col = sample_mvn_prec(rng, &chol, &r)?;
            state.b.set_column(l, &col);
        }
    }

    // (3) μ: precision n·Σ + ρ·I, linear Wᵀ1 − Σ·Bᵀ·Xᵀ1.
    {
        let mut q = &sigma * n as f64;
        for d in 0..k {
            q[(d, d)] += hyper.mu_prior_precision;
        }
        let mut r = w.tr_mul(&ones);
        if p > 0 {
            r -= &sigma * (state.b.tr_mul(&sx1));
        }
        let chol = chol_spd(&q, "intercept conditional precision")?;
        state.mu = sample_mvn_prec(rng, &chol, &r)?;
    }

    // (4) Ω column by column. For column j with β = ω_{-j,j} and Schur
    // complement γ = ω_jj − βᵀΩ₁₁⁻¹β (so Ω stays SPD iff γ > 0):
    //   β | γ ~ N(Q⁻¹r, Q⁻¹), Q = (s_jj+λ_d)V + diag(1/τ²) + (1/γ)VH₁₁V,
    //                         r = −s_{-j,j} + (1/γ)Vh_{-j,j},
    //   γ | β ~ GIG(n/2 + 1, s_jj + λ_d, q), q = uᵀH₁₁u − 2h_{-j,j}ᵀu + h_jj,
    // where V = Ω₁₁⁻¹ (from Σ in O(k²)) and u = Vβ.
    let s = w.tr_mul(w);
    let no_x = DMatrix::zeros(n, 0);
    let eta = eta_matrix(&state.mu, &state.b, if update_b { x } else { &no_x });
    let h = eta.tr_mul(&eta);

    for j in 0..k {
        let rest: Vec<usize> = (0..k).filter(|&t| t != j).collect();
        let m = k - 1;
        let gamma_cur = 1.0 / sigma[(j, j)];
        let v = DMatrix::from_fn(m, m, |a, b| {
            let (ia, ib) = (rest[a], rest[b]);
            sigma[(ia, ib)] - sigma[(ia, j)] * sigma[(ib, j)] / sigma[(j, j)]
        });
        let lam_diag = match &state.lambda_omega {
            Shrinkage::Scalar(v) => *v,
            Shrinkage::PerEntry(mm) => mm[(j, j)],
        };
        let a_gig = s[(j, j)] + lam_diag;

        let h11 = DMatrix::from_fn(m, m, |a, b| h[(rest[a], rest[b])]);
        let h12 = DVector::from_fn(m, |a, _| h[(rest[a], j)]);

        let (beta, u) = if m > 0 {
            let vh11v = &v * &h11 * &v;
            let mut q = &v * a_gig + vh11v / gamma_cur;
            for (a, &ia) in rest.iter().enumerate() {
                q[(a, a)] += 1.0 / state.tau2_omega[(ia, j)];
            }
            let mut r = DVector::from_fn(m, |a, _| -s[(rest[a], j)]);
            r += (&v * &h12) / gamma_cur;
            let chol = chol_spd(&q, "precision-column conditional")?;
            let beta = sample_mvn_prec(rng, &chol, &r)?;
            let u = &v * &beta;
            (beta, u)
        } else {
            (DVector::zeros(0), DVector::zeros(0))
        };

        let mut q_gig = h[(j, j)];
        if m > 0 {
            q_gig += u.dot(&(&h11 * &u)) - 2.0 * h12.dot(&u);
        }
        let gamma = sample_gig(rng, n as f64 / 2.0 + 1.0, a_gig, q_gig.max(0.0))?;

        state.omega[(j, j)] = gamma + beta.dot(&u);
        for (a, &ia) in rest.iter().enumerate() {
            state.omega[(ia, j)] = beta[a];
            state.omega[(j, ia)] = beta[a];
        }
        sigma[(j, j)] = 1.0 / gamma;
        for (a, &ia) in rest.iter().enumerate() {
            sigma[(ia, j)] = -u[a] / gamma;
            sigma[(j, ia)] = sigma[(ia, j)];
        }
        for (a, &ia) in rest.iter().enumerate() {
            for (b, &ib) in rest.iter().enumerate() {
                sigma[(ia, ib)] = v[(a, b)] + u[a] * u[b] / gamma;
            }
        }
    }

    #[cfg(debug_assertions)]
    {
        let scale = state.omega.trace().abs().max(1.0);
        for i in 0..k {
            for j in 0..k {
                debug_assert!(
                    (state.omega[(i, j)] - state.omega[(j, i)]).abs() <= 1e-12 * scale,
                    "asymmetric precision after column updates"
                );
            }
        }
        debug_assert!(
            chol_spd(&state.omega, "post-sweep positive-definiteness check").is_ok(),
            "precision lost positive definiteness"
        );
    }

    // (5) λ_Ω with the mixture variances integrated out (Laplace form on
    // off-diagonals, Exp(λ/2) on the diagonal)…
    match &mut state.lambda_omega {
        Shrinkage::Scalar(lam) => {
            let mut sum_off = 0.0;
            let mut sum_diag = 0.0;
            for i in 0..k {
                sum_diag += state.omega[(i, i)];
                for j in (i + 1)..k {
                    sum_off += state.omega[(i, j)].abs();
                }
            }
            let shape = hyper.r_omega + (k * (k + 1)) as f64 / 2.0;
            let rate = hyper.delta_omega + sum_off + 0.5 * sum_diag;
            *lam = draw_gamma(rng, shape, rate)?;
        }
        Shrinkage::PerEntry(rates) => {
            for i in 0..k {
                for j in i..k {
                    let rate = if i == j {
                        hyper.delta_omega + state.omega[(i, i)] / 2.0
                    } else {
                        hyper.delta_omega + state.omega[(i, j)].abs()
                    };
                    let v = draw_gamma(rng, hyper.r_omega + 1.0, rate)?;
                    rates[(i, j)] = v;
                    rates[(j, i)] = v;
                }
            }
        }
    }

    // …(6) immediately followed by tau2_Omega | λ_Ω, Ω so the pair is a
    // joint draw of (λ, τ) given Ω.
    for i in 0..k {
        for j in (i + 1)..k {
            let rate = state.lambda_omega.rate(i, j);
            let t = draw_tau2(rng, state.omega[(i, j)].abs(), rate)?;
            state.tau2_omega[(i, j)] = t;
            state.tau2_omega[(j, i)] = t;
        }
    }

    // (7) λ_β, likewise with tau2_B integrated out; the opening tau2_B
    // draw of the next sweep completes that block.
    if update_b {
        match &mut state.lambda_beta {
            Shrinkage::Scalar(lam) => {
                let sum_abs: f64 = state.b.iter().map(|v| v.abs()).sum();
                let shape = hyper.r_beta + (p * k) as f64;
                *lam = draw_gamma(rng, shape, hyper.delta_beta + sum_abs)?;
            }
            Shrinkage::PerEntry(rates) => {
                for i in 0..p {
                    for j in 0..k {
                        rates[(i, j)] = draw_gamma(
                            rng,
                            hyper.r_beta + 1.0,
                            hyper.delta_beta + state.b[(i, j)].abs(),
                        )?;
                    }
                }
            }
        }
    }

    Ok(())
}
