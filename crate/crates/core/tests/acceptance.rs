//! Release acceptance suite. Each criterion is one test that prints a single
//! `PASS criterion N — ...` line with the measured quantities (visible under
//! `--nocapture`); a failed assertion is the FAIL signal. Every seed is
//! fixed, so the whole suite is reproducible run to run.
//!
//! Criterion 1 is the master correctness test: a Geweke joint-distribution
//! comparison of exact prior draws against successive-conditional draws
//! through the library's own transition kernels, for every kernel × link ×
//! shrinkage-mode combination.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp, Gamma, Poisson, StandardNormal};

use carlasso::inference::{fit, DataSource, FitRequest, McmcControls};
use carlasso::ingest::{ColumnData, DataTable, DesignMatrices};
use carlasso::links::{update_latent, Link};
use carlasso::model::{init_state, ChainState, Hyperparams, Shrinkage};
use carlasso::rng::RngStream;
use carlasso::samplers::{chol_spd, sweep_bglasso, sweep_caralasso, sweep_carlasso};
use carlasso::sim::{formula_for, simulate, SimConfig};

// ---------------------------------------------------------------------------
// small statistics helpers
// ---------------------------------------------------------------------------

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Batch-means standard error of the mean; robust to autocorrelation.
fn batch_se(xs: &[f64], batches: usize) -> f64 {
    let b = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|i| mean(&xs[i * b..(i + 1) * b]))
        .collect();
    let grand = mean(&means);
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (var / batches as f64).sqrt()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Mann–Whitney AUC with midranks for ties.
fn auc(scores: &[f64], is_positive: &[bool]) -> f64 {
    assert_eq!(scores.len(), is_positive.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for t in i..=j {
            ranks[idx[t]] = midrank;
        }
        i = j + 1;
    }
    let n_pos = is_positive.iter().filter(|&&f| f).count() as f64;
    let n_neg = scores.len() as f64 - n_pos;
    assert!(
        n_pos > 0.0 && n_neg > 0.0,
        "degenerate truth labels: {n_pos} positives, {n_neg} negatives"
    );
    let rank_sum: f64 = ranks
        .iter()
        .zip(is_positive)
        .filter(|(_, &f)| f)
        .map(|(r, _)| r)
        .sum();
    (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

/// Parse `name[i,j]` labels into 1-based indices.
fn bracket_indices(label: &str) -> (usize, usize) {
    let open = label.find('[').expect("label has no bracket");
    let close = label.find(']').expect("label has no closing bracket");
    let mut parts = label[open + 1..close].split(',');
    let i = parts.next().unwrap().trim().parse().unwrap();
    let j = parts.next().unwrap().trim().parse().unwrap();
    (i, j)
}

fn draw_gamma<R: Rng>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate).unwrap().sample(rng)
}

fn draw_exp<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    Exp::new(rate).unwrap().sample(rng)
}

fn draw_normal<R: Rng>(rng: &mut R, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sd * z
}

/// Sequential-binomial multinomial draw; returns counts as floats.
fn multinomial_row<R: Rng>(rng: &mut R, total: u64, probs: &[f64]) -> Vec<f64> {
    let k = probs.len();
    let mut out = vec![0.0; k];
    let mut remaining = total;
    let mut rest = 1.0f64;
    for j in 0..k.saturating_sub(1) {
        if remaining == 0 || rest <= 0.0 {
            break;
        }
        let p = (probs[j] / rest).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, p).unwrap().sample(rng);
        out[j] = draw as f64;
        remaining -= draw;
        rest -= probs[j];
    }
    out[k - 1] = remaining as f64;
    out
}

// ---------------------------------------------------------------------------
// criterion 1 — Geweke joint-distribution test
// ---------------------------------------------------------------------------

const GW_N: usize = 5;
const GW_K: usize = 3; // Gaussian core; the logit link observes k+1 categories
const GW_P: usize = 2;
const GW_DRAWS: usize = 10_000;
const GW_BATCHES: usize = 100;
const GW_LOGIT_TOTALS: [u64; GW_N] = [11, 7, 13, 9, 12];

/// Count-link regeneration caps the Poisson mean at e^69. Under the harness
/// priors the latent mean exceeds 69 in at most a few cells per thousand
/// sweeps (seed-dependent; often zero), the affected draws are still
/// astronomically large counts, and the cap damps those excursions instead
/// of feeding them — the log-link z-scores are indistinguishable across
/// seeds with zero and with ~50 capped cells.
const GW_LOG_CAP: f64 = 69.0;

/// Priors chosen so every link is well behaved — λ_Ω concentrates near 0.5
/// (precision diagonals around 4, keeping the latent scale moderate for the
/// count link) and λ_β near 1.5 (coefficients of order one) — and so every
/// test function below has stable batch-means standard errors: shape 12 on
/// both Gamma hyperpriors keeps E[λ⁻⁸] finite, hence finite eighth moments
/// for b and ω and a finite-variance SE estimator for the squared probes.
fn gw_hyper(adaptive: bool) -> Hyperparams {
    Hyperparams {
        r_beta: 12.0,
        delta_beta: 8.0,
        r_omega: 12.0,
        delta_omega: 24.0,
        adaptive,
        mu_prior_precision: 1.0,
    }
}

fn draw_shrinkage<R: Rng>(
    rng: &mut R,
    adaptive: bool,
    shape: f64,
    rate: f64,
    rows: usize,
    cols: usize,
    symmetric: bool,
) -> Shrinkage {
    if !adaptive {
        return Shrinkage::Scalar(draw_gamma(rng, shape, rate));
    }
    let mut m = DMatrix::zeros(rows, cols);
    if symmetric {
        for i in 0..rows {
            for j in i..cols {
                let v = draw_gamma(rng, shape, rate);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
    } else {
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = draw_gamma(rng, shape, rate);
            }
        }
    }
    Shrinkage::PerEntry(m)
}

/// One exact draw from the model prior. The positive-definite restriction on
/// Ω is enforced by joint rejection over (λ_Ω, τ²_Ω, Ω), which preserves the
/// exact restricted joint — including the effect of the truncation on the
/// λ_Ω marginal that the sampler's Gamma conditional implies.
fn gw_prior_state<R: Rng>(k: usize, p: usize, hyper: &Hyperparams, rng: &mut R) -> ChainState {
    let lambda_beta = draw_shrinkage(
        rng,
        hyper.adaptive,
        hyper.r_beta,
        hyper.delta_beta,
        p,
        k,
        false,
    );
    let tau2_b = DMatrix::from_fn(p, k, |i, j| {
        draw_exp(rng, lambda_beta.rate(i, j).powi(2) / 2.0)
    });
    let b = DMatrix::from_fn(p, k, |i, j| draw_normal(rng, tau2_b[(i, j)].sqrt()));
    let mu = DVector::from_fn(k, |_, _| {
        draw_normal(rng, hyper.mu_prior_precision.sqrt().recip())
    });

    let mut attempts = 0usize;
    let (lambda_omega, tau2_omega, omega) = loop {
        attempts += 1;
        assert!(
            attempts <= 1_000_000,
            "prior rejection rate implausibly low"
        );
        let lam = draw_shrinkage(
            rng,
            hyper.adaptive,
            hyper.r_omega,
            hyper.delta_omega,
            k,
            k,
            true,
        );
        let mut tau2 = DMatrix::zeros(k, k);
        let mut om = DMatrix::zeros(k, k);
        for i in 0..k {
            om[(i, i)] = draw_exp(rng, lam.rate(i, i) / 2.0);
            for j in (i + 1)..k {
                let t = draw_exp(rng, lam.rate(i, j).powi(2) / 2.0);
                tau2[(i, j)] = t;
                tau2[(j, i)] = t;
                let v = draw_normal(rng, t.sqrt());
                om[(i, j)] = v;
                om[(j, i)] = v;
            }
        }
        if Cholesky::new(om.clone()).is_some() {
            break (lam, tau2, om);
        }
    };

    ChainState {
        omega,
        b,
        mu,
        z: None,
        tau2_b,
        tau2_omega,
        lambda_beta,
        lambda_omega,
        mh_step: None,
        mh_accept: None,
        mh_batch_fill: 0,
        mh_batches: 0,
    }
}

/// Regenerate the Gaussian block and the observations from the current
/// parameters — an exact Gibbs step for the data given the state.
fn gw_regen_data<R: Rng>(
    state: &ChainState,
    x: &DMatrix<f64>,
    link: Link,
    cap_events: &mut usize,
    rng: &mut R,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let k = state.k_eff();
    let sigma = chol_spd(&state.omega, "regen omega").unwrap().inverse();
    let lsig = chol_spd(&sigma, "regen sigma").unwrap().l();
    let xb = x * &state.b;
    let mut w = DMatrix::zeros(n, k);
    for i in 0..n {
        let eta_i = &state.mu + xb.row(i).transpose();
        let mean = &sigma * eta_i;
        let noise = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let wi = mean + &lsig * noise;
        w.row_mut(i).copy_from(&wi.transpose());
    }

    let y = match link {
        Link::Identity => w.clone(),
        Link::Probit => w.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
        Link::Log => DMatrix::from_fn(n, k, |i, j| {
            let v = w[(i, j)];
            if v > GW_LOG_CAP {
                *cap_events += 1;
            }
            let rate = v.min(GW_LOG_CAP).exp().max(1e-300);
            Poisson::new(rate).unwrap().sample(rng)
        }),
        Link::Logit => {
            let mut y = DMatrix::zeros(n, k + 1);
            for i in 0..n {
                let mut logits: Vec<f64> = (0..k).map(|j| w[(i, j)]).collect();
                logits.push(0.0); // reference category
                let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut probs: Vec<f64> = logits.iter().map(|v| (v - top).exp()).collect();
                let total: f64 = probs.iter().sum();
                for p in probs.iter_mut() {
                    *p /= total;
                }
                let row = multinomial_row(rng, GW_LOGIT_TOTALS[i], &probs);
                for (j, c) in row.iter().enumerate() {
                    y[(i, j)] = *c;
                }
            }
            y
        }
    };
    (w, y)
}

fn shrink_probe(s: &Shrinkage, i: usize, j: usize) -> f64 {
    match s {
        Shrinkage::Scalar(v) => *v,
        Shrinkage::PerEntry(m) => m[(i, j)],
    }
}

struct GewekeCombo {
    name: &'static str,
    link: Link,
    adaptive: bool,
    bglasso: bool,
}

struct GewekeResult {
    max_abs_z: f64,
    n_fns: usize,
    secs: f64,
    cap_events: usize,
}

fn run_geweke_combo(idx: usize, combo: &GewekeCombo) -> GewekeResult {
    let start = Instant::now();
    let k = GW_K;
    let p = if combo.bglasso { 0 } else { GW_P };
    let n = GW_N;
    let hyper = gw_hyper(combo.adaptive);
    let mut rng = RngStream::new(90_210, idx as u64);
    // fixed design with a mild offset so both B and μ carry signal
    let x = DMatrix::from_fn(n, p, |_, _| {
        0.3 + 0.5 * rng.sample::<f64, _>(StandardNormal)
    });

    // Test functions probe every parameter block. They avoid the τ² mixture
    // variances on purpose: the shrinkage rates are partially collapsed
    // draws, so at the recording point (sweep end) every marginal that
    // excludes τ²_B is exact while τ²_B itself lags by half a sweep.
    type Probe = Box<dyn Fn(&ChainState) -> f64>;
    let mut fns: Vec<(&'static str, Probe)> = vec![
        ("omega[1,1]", Box::new(|s: &ChainState| s.omega[(0, 0)])),
        ("omega[1,2]", Box::new(|s: &ChainState| s.omega[(0, 1)])),
        (
            "omega[1,2]^2",
            Box::new(|s: &ChainState| s.omega[(0, 1)] * s.omega[(0, 1)]),
        ),
        ("mu[1]", Box::new(|s: &ChainState| s.mu[0])),
        ("mu[1]^2", Box::new(|s: &ChainState| s.mu[0] * s.mu[0])),
        (
            "lambda_omega",
            Box::new(|s: &ChainState| shrink_probe(&s.lambda_omega, 0, 1)),
        ),
    ];
    if p > 0 {
        fns.push(("b[1,1]", Box::new(|s: &ChainState| s.b[(0, 0)])));
        fns.push((
            "b[1,1]^2",
            Box::new(|s: &ChainState| s.b[(0, 0)] * s.b[(0, 0)]),
        ));
        fns.push((
            "lambda_beta",
            Box::new(|s: &ChainState| shrink_probe(&s.lambda_beta, 0, 0)),
        ));
    }

    // side 1: independent draws from the exact prior
    let mut prior: Vec<Vec<f64>> = vec![Vec::with_capacity(GW_DRAWS); fns.len()];
    for _ in 0..GW_DRAWS {
        let s = gw_prior_state(k, p, &hyper, &mut rng);
        for (col, f) in prior.iter_mut().zip(&fns) {
            col.push((f.1)(&s));
        }
    }

    // side 2: the successive-conditional chain. Each iteration regenerates
    // (w, y) from the current parameters, then applies the library's latent
    // update and parameter sweep — the kernels under test.
    let mut cap_events = 0usize;
    let mut state = gw_prior_state(k, p, &hyper, &mut rng);
    let (w0, y0) = gw_regen_data(&state, &x, combo.link, &mut cap_events, &mut rng);
    let mut design = DesignMatrices::from_parts(y0, x.clone(), combo.link).unwrap();
    if combo.link != Link::Identity {
        state.z = Some(w0);
    }
    if matches!(combo.link, Link::Log | Link::Logit) {
        state.mh_step = Some(DMatrix::from_element(n, k, 0.8));
        state.mh_accept = Some(DMatrix::zeros(n, k));
    }
    let mut chain: Vec<Vec<f64>> = vec![Vec::with_capacity(GW_DRAWS); fns.len()];
    for _ in 0..GW_DRAWS {
        let (w, y) = gw_regen_data(&state, &x, combo.link, &mut cap_events, &mut rng);
        design.y = y;
        if combo.link != Link::Identity {
            state.z = Some(w);
        }
        update_latent(&mut state, &design, &mut rng, false);
        if combo.bglasso {
            sweep_bglasso(&mut state, &design.y, &hyper, &mut rng).unwrap();
        } else if combo.adaptive {
            sweep_caralasso(&mut state, &design, &hyper, &mut rng).unwrap();
        } else {
            sweep_carlasso(&mut state, &design, &hyper, &mut rng).unwrap();
        }
        for (col, f) in chain.iter_mut().zip(&fns) {
            col.push((f.1)(&state));
        }
    }

    let mut max_abs_z = 0.0f64;
    for (i, (name, _)) in fns.iter().enumerate() {
        let mp = mean(&prior[i]);
        let mc = mean(&chain[i]);
        let se = (batch_se(&prior[i], GW_BATCHES).powi(2)
            + batch_se(&chain[i], GW_BATCHES).powi(2))
        .sqrt();
        let z = (mp - mc) / se;
        assert!(
            z.abs() < 4.0,
            "criterion 1: {} / {name}: |z| = {:.2} (prior {mp:.4} vs chain {mc:.4})",
            combo.name,
            z.abs()
        );
        max_abs_z = max_abs_z.max(z.abs());
    }
    GewekeResult {
        max_abs_z,
        n_fns: fns.len(),
        secs: start.elapsed().as_secs_f64(),
        cap_events,
    }
}

#[test]
fn criterion_1_geweke_joint_distribution() {
    let combos = [
        GewekeCombo {
            name: "carlasso/identity",
            link: Link::Identity,
            adaptive: false,
            bglasso: false,
        },
        GewekeCombo {
            name: "carlasso/probit",
            link: Link::Probit,
            adaptive: false,
            bglasso: false,
        },
        GewekeCombo {
            name: "carlasso/log",
            link: Link::Log,
            adaptive: false,
            bglasso: false,
        },
        GewekeCombo {
            name: "carlasso/logit",
            link: Link::Logit,
            adaptive: false,
            bglasso: false,
        },
        GewekeCombo {
            name: "caralasso/identity",
            link: Link::Identity,
            adaptive: true,
            bglasso: false,
        },
        GewekeCombo {
            name: "caralasso/probit",
            link: Link::Probit,
            adaptive: true,
            bglasso: false,
        },
        GewekeCombo {
            name: "caralasso/log",
            link: Link::Log,
            adaptive: true,
            bglasso: false,
        },
        GewekeCombo {
            name: "caralasso/logit",
            link: Link::Logit,
            adaptive: true,
            bglasso: false,
        },
        GewekeCombo {
            name: "bglasso",
            link: Link::Identity,
            adaptive: false,
            bglasso: true,
        },
        GewekeCombo {
            name: "bglasso/adaptive",
            link: Link::Identity,
            adaptive: true,
            bglasso: true,
        },
    ];
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut total_fns = 0usize;
    let mut caps = 0usize;
    for (idx, combo) in combos.iter().enumerate() {
        let r = run_geweke_combo(idx, combo);
        assert!(
            r.secs < 600.0,
            "criterion 1: {} took {:.0} s (limit 600)",
            combo.name,
            r.secs
        );
        println!(
            "  criterion 1 · {:<20} max|z| = {:.2} over {} test functions ({:.1} s{})",
            combo.name,
            r.max_abs_z,
            r.n_fns,
            r.secs,
            if r.cap_events > 0 {
                format!(", {} capped count means", r.cap_events)
            } else {
                String::new()
            }
        );
        worst = worst.max(r.max_abs_z);
        total_fns += r.n_fns;
        caps += r.cap_events;
    }
    println!(
        "PASS criterion 1 — Geweke joint distribution: max|z| = {:.2} across {} combos / {} test functions, {} draws per side, {} capped count means ({:.0} s)",
        worst,
        combos.len(),
        total_fns,
        GW_DRAWS,
        caps,
        start.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// criterion 2 — conjugate quadrature oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_conjugate_quadrature_oracle() {
    let start = Instant::now();
    // k = 1, p = 0, identity link. With μ pinned at 0 (huge prior precision)
    // and λ_Ω pinned at 2 (Gamma with mean 2 and sd 2e-4), the ω posterior
    // is Gamma(n/2 + 1, (Σy² + λ)/2) exactly.
    let y_vals = [0.9, -1.3, 0.4, 2.1, -0.6, 1.0, -1.7, 0.3];
    let n = y_vals.len();
    let lambda0 = 2.0;
    let hyper = Hyperparams {
        r_beta: 1.0,
        delta_beta: 0.01,
        r_omega: 1e8,
        delta_omega: 1e8 / lambda0,
        adaptive: false,
        mu_prior_precision: 1e12,
    };
    let y = DMatrix::from_fn(n, 1, |i, _| y_vals[i]);
    let design = DesignMatrices::from_parts(y, DMatrix::zeros(n, 0), Link::Identity).unwrap();
    let mut state = init_state(&design, &hyper).unwrap();
    let mut rng = RngStream::new(777, 0);
    let total = 50_000;
    let burn = 2_000;
    let mut draws = Vec::with_capacity(total - burn);
    for t in 0..total {
        sweep_carlasso(&mut state, &design, &hyper, &mut rng).unwrap();
        if t >= burn {
            draws.push(state.omega[(0, 0)]);
        }
    }
    let chain_mean = mean(&draws);

    // 1-D Simpson quadrature of the posterior mean on (0, 50]
    let s2: f64 = y_vals.iter().map(|v| v * v).sum();
    let shape = n as f64 / 2.0 + 1.0;
    let rate = (s2 + lambda0) / 2.0;
    let log_g = |w: f64| (shape - 1.0) * w.ln() - rate * w;
    let center = log_g((shape - 1.0) / rate); // log-density at the mode
    let (a, b0, m) = (1e-9, 50.0, 500_000usize);
    let h = (b0 - a) / m as f64;
    let (mut mass, mut first) = (0.0f64, 0.0f64);
    for i in 0..=m {
        let w = a + i as f64 * h;
        let weight = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let g = (log_g(w) - center).exp();
        mass += weight * g;
        first += weight * g * w;
    }
    let quad_mean = first / mass;

    // cross-check the quadrature against the closed-form Gamma mean
    let analytic = shape / rate;
    assert!(
        ((quad_mean - analytic) / analytic).abs() < 1e-6,
        "quadrature self-check failed: {quad_mean} vs {analytic}"
    );

    let rel = ((chain_mean - quad_mean) / quad_mean).abs();
    let secs = start.elapsed().as_secs_f64();
    assert!(
        rel < 0.02,
        "criterion 2: chain mean {chain_mean:.5} vs quadrature {quad_mean:.5} ({:.2}% off)",
        100.0 * rel
    );
    assert!(secs < 30.0, "criterion 2 took {secs:.1} s (limit 30)");
    println!(
        "PASS criterion 2 — conjugate oracle: chain mean ω = {:.4} vs quadrature {:.4} (Δ = {:.2}%, {} sweeps, {:.1} s)",
        chain_mean,
        quad_mean,
        100.0 * rel,
        total,
        secs
    );
}

// ---------------------------------------------------------------------------
// criterion 3 — network recovery AUC on simulated data
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_network_recovery_auc() {
    let start = Instant::now();
    let mut auc_resp = Vec::new();
    let mut auc_pred = Vec::new();
    for rep in 0..20u64 {
        let cfg = SimConfig::new(6, 4, 300, Link::Identity, 31_100 + rep);
        let (table, truth) = simulate(&cfg).unwrap();
        let request = FitRequest {
            formula: formula_for(&cfg),
            data: DataSource::Table(table),
            link: Link::Identity,
            hyper: Hyperparams::default(),
            controls: McmcControls {
                n_iter: 4_000,
                n_burn_in: 1_000,
                thin_by: 10,
                seed: 600 + rep,
                chains: 1,
            },
            ci_level: 0.9,
        };
        let out = fit(&request).unwrap().summary;

        let om_true = truth.omega_matrix();
        let pc = &out.partial_correlation;
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for (label, m) in pc.labels.iter().zip(&pc.mean) {
            let (i, j) = bracket_indices(label);
            scores.push(m.abs());
            labels.push(om_true[(i - 1, j - 1)].abs() > 1e-12);
        }
        auc_resp.push(auc(&scores, &labels));

        let b_true = truth.b_matrix();
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for (label, m) in out.b.labels.iter().zip(&out.b.mean) {
            let (i, j) = bracket_indices(label);
            scores.push(m.abs());
            labels.push(b_true[(i - 1, j - 1)].abs() > 1e-12);
        }
        auc_pred.push(auc(&scores, &labels));
    }
    let med_resp = median(auc_resp);
    let med_pred = median(auc_pred);
    let secs = start.elapsed().as_secs_f64();
    assert!(
        med_resp >= 0.90,
        "criterion 3: resp-resp median AUC {med_resp:.3} < 0.90"
    );
    assert!(
        med_pred >= 0.90,
        "criterion 3: pred-resp median AUC {med_pred:.3} < 0.90"
    );
    assert!(secs < 1_200.0, "criterion 3 took {secs:.0} s (limit 1200)");
    println!(
        "PASS criterion 3 — network recovery: median AUC {:.3} (resp-resp) / {:.3} (pred-resp) over 20 replicate fits ({:.0} s)",
        med_resp, med_pred, secs
    );
}

// ---------------------------------------------------------------------------
// criterion 4 — adaptive shrinkage separates active from null coefficients
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_adaptive_shrinkage_ordering() {
    let start = Instant::now();
    let n = 120usize;
    let mut wins = 0usize;
    for rep in 0..20u64 {
        let mut rng = RngStream::new(41_000 + rep, 0);
        // Two responses with identity precision; predictor 1 drives response
        // 1 with unit effect, predictor 2 touches nothing.
        let x = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DMatrix::from_fn(n, 2, |i, j| {
            let signal = if j == 0 { x[(i, 0)] } else { 0.0 };
            signal + rng.sample::<f64, _>(StandardNormal)
        });
        let table = DataTable::from_columns(
            vec!["y1".into(), "y2".into(), "x1".into(), "x2".into()],
            vec![
                ColumnData::Numeric(y.column(0).iter().cloned().collect()),
                ColumnData::Numeric(y.column(1).iter().cloned().collect()),
                ColumnData::Numeric(x.column(0).iter().cloned().collect()),
                ColumnData::Numeric(x.column(1).iter().cloned().collect()),
            ],
        );
        let request = FitRequest {
            formula: "y1 + y2 ~ x1 + x2".into(),
            data: DataSource::Table(table),
            link: Link::Identity,
            hyper: Hyperparams {
                adaptive: true,
                ..Hyperparams::default()
            },
            controls: McmcControls {
                n_iter: 1_500,
                n_burn_in: 500,
                thin_by: 5,
                seed: 90 + rep,
                chains: 1,
            },
            ci_level: 0.9,
        };
        let out = fit(&request).unwrap().summary;
        let lam = &out.lambda;
        let value = |target: &str| -> f64 {
            let pos = lam
                .labels
                .iter()
                .position(|l| l == target)
                .unwrap_or_else(|| panic!("missing label {target}"));
            lam.mean[pos]
        };
        let active = value("lambda_beta[1,1]");
        let null = value("lambda_beta[2,1]");
        if null > active {
            wins += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(
        wins >= 16,
        "criterion 4: null λ exceeded active λ in only {wins}/20 replicates"
    );
    println!(
        "PASS criterion 4 — adaptive shrinkage: null-coefficient λ exceeded active in {}/20 replicates ({:.0} s)",
        wins, secs
    );
}

// ---------------------------------------------------------------------------
// criterion 5 — CLI workflow replay on the bundled gut-analog data
// ---------------------------------------------------------------------------

const GUT_FORMULA: &str =
    "Alistipes + Bacteroides + Eubacterium + Parabacteroides + all_others ~ BMI + Age + Gender + Stratum";

fn run_gut_fit(out_dir: &Path) -> f64 {
    let exe = env!("CARGO_BIN_EXE_carlasso");
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/gut_analog.csv");
    let start = Instant::now();
    let status = Command::new(exe)
        .args([
            "fit",
            "--formula",
            GUT_FORMULA,
            "--data",
            data,
            "--link",
            "logit",
            "--adaptive",
            "--n-iter",
            "5000",
            "--burn-in",
            "1000",
            "--thin",
            "10",
            "--seed",
            "42",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .expect("failed to launch the CLI");
    assert!(
        status.status.success(),
        "fit exited with {:?}: {}",
        status.status.code(),
        String::from_utf8_lossy(&status.stderr)
    );
    start.elapsed().as_secs_f64()
}

#[test]
fn criterion_5_workflow_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let fit_dir = tmp.path().join("fit");
    let secs = run_gut_fit(&fit_dir);
    assert!(
        secs < 300.0,
        "criterion 5: fit took {secs:.0} s (limit 300)"
    );

    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(fit_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["metadata"]["n_draws_stored"], 500);
    assert_eq!(summary["metadata"]["k_raw"], 5);
    assert_eq!(summary["metadata"]["k_eff"], 4);
    let omega_labels = summary["omega"]["labels"].as_array().unwrap();
    assert_eq!(omega_labels.len(), 10, "expected a 4×4 upper triangle");

    let exe = env!("CARGO_BIN_EXE_carlasso");
    let dot_path = tmp.path().join("network.dot");
    let status = Command::new(exe)
        .args([
            "graph",
            "--fit",
            fit_dir.to_str().unwrap(),
            "--format",
            "dot",
            "--out",
            dot_path.to_str().unwrap(),
        ])
        .output()
        .expect("failed to launch the CLI");
    assert!(
        status.status.success(),
        "graph exited with {:?}: {}",
        status.status.code(),
        String::from_utf8_lossy(&status.stderr)
    );
    let dot = std::fs::read_to_string(&dot_path).unwrap();
    assert_eq!(dot.matches("shape=circle").count(), 5, "response nodes");
    assert_eq!(dot.matches("shape=triangle").count(), 4, "predictor nodes");
    let mut edges = 0usize;
    for line in dot.lines().filter(|l| l.contains("color=")) {
        edges += 1;
        assert!(
            line.contains("#D62728") || line.contains("#1F77B4"),
            "unexpected edge color in {line}"
        );
    }
    assert!(edges > 0, "graph export produced no edges");
    println!(
        "PASS criterion 5 — workflow replay: logit fit in {:.1} s, 500 draws, 4×4 Ω, DOT with 5 circles / 4 triangles / {} signed edges",
        secs, edges
    );
}

// ---------------------------------------------------------------------------
// criterion 6 — same-seed reruns are byte-identical
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    run_gut_fit(&dir_a);
    run_gut_fit(&dir_b);
    let files = [
        "summary.json",
        "chain_0/omega.csv",
        "chain_0/b.csv",
        "chain_0/mu.csv",
        "chain_0/lambda.csv",
        "chain_0/metadata.json",
    ];
    for f in files {
        let a = std::fs::read(dir_a.join(f)).unwrap();
        let b = std::fs::read(dir_b.join(f)).unwrap();
        assert!(a == b, "criterion 6: {f} differs between same-seed runs");
    }
    println!(
        "PASS criterion 6 — determinism: {} output files byte-identical across same-seed reruns",
        files.len()
    );
}

// ---------------------------------------------------------------------------
// criterion 7 — robustness fuzz: SPD and finite through 10⁵ sweeps
// ---------------------------------------------------------------------------

fn fuzz_checks(state: &ChainState) {
    state.assert_finite().unwrap();
    chol_spd(&state.omega, "fuzz omega").unwrap();
    let k = state.k_eff();
    for i in 0..k {
        for j in (i + 1)..k {
            let t2 = state.tau2_omega[(i, j)];
            assert!(t2.is_finite() && t2 > 0.0, "tau2_omega[{i},{j}] = {t2}");
        }
    }
    for v in state
        .lambda_beta
        .flatten(false)
        .iter()
        .chain(state.lambda_omega.flatten(true).iter())
    {
        assert!(v.is_finite() && *v > 0.0, "shrinkage rate = {v}");
    }
}

#[test]
fn criterion_7_robustness_fuzz() {
    let start = Instant::now();
    let mut total_sweeps = 0usize;
    let mut configs = 0usize;

    // identity-link tranche: every kernel over random shapes, scales,
    // hyperparameters, and degenerate data (n = 0, constant columns).
    for t in 0..100u64 {
        let mut rng = RngStream::new(52_000 + t, 0);
        let k = 1 + (t % 4) as usize;
        let bglasso = t % 3 == 2;
        let p = if bglasso { 0 } else { (t % 4) as usize };
        let n = [0usize, 1, 2, 3, 6, 9, 12][(t % 7) as usize];
        let adaptive = t % 2 == 0;
        let scale = [1.0, 1.0, 50.0][((t / 7) % 3) as usize];
        let hyper = Hyperparams {
            r_beta: [0.5, 1.0, 6.0][(t % 3) as usize],
            delta_beta: [0.01, 1.0, 4.0][((t / 3) % 3) as usize],
            r_omega: [0.5, 1.0, 6.0][((t / 2) % 3) as usize],
            delta_omega: [0.01, 1.0, 4.0][((t / 5) % 3) as usize],
            adaptive,
            mu_prior_precision: 0.7, // keeps the n = 0 posterior proper
        };
        let mut y = DMatrix::from_fn(n, k, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        if t % 13 == 0 {
            for i in 0..n {
                y[(i, 0)] = 3.0; // constant response column
            }
        }
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let design = DesignMatrices::from_parts(y, x, Link::Identity).unwrap();
        let mut state = init_state(&design, &hyper).unwrap();
        let sweeps = 700;
        for _ in 0..sweeps {
            if bglasso {
                sweep_bglasso(&mut state, &design.y, &hyper, &mut rng).unwrap();
            } else if adaptive {
                sweep_caralasso(&mut state, &design, &hyper, &mut rng).unwrap();
            } else {
                sweep_carlasso(&mut state, &design, &hyper, &mut rng).unwrap();
            }
            fuzz_checks(&state);
        }
        total_sweeps += sweeps;
        configs += 1;
    }

    // latent-link tranche: interleaved latent updates, adaptation on and off
    for t in 0..30u64 {
        let mut rng = RngStream::new(53_000 + t, 0);
        let link = [Link::Probit, Link::Log, Link::Logit][(t % 3) as usize];
        let k_raw = 2 + (t % 3) as usize;
        let p = (t % 3) as usize;
        let n = 1 + (t % 8) as usize;
        let adaptive = t % 2 == 1;
        let y = match link {
            Link::Probit => {
                DMatrix::from_fn(n, k_raw, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
            }
            Link::Log => {
                DMatrix::from_fn(n, k_raw, |_, _| Poisson::new(3.0).unwrap().sample(&mut rng))
            }
            Link::Logit => {
                let probs = vec![1.0 / k_raw as f64; k_raw];
                let mut y = DMatrix::zeros(n, k_raw);
                for i in 0..n {
                    let row = multinomial_row(&mut rng, 15, &probs);
                    for (j, c) in row.iter().enumerate() {
                        y[(i, j)] = *c;
                    }
                }
                y
            }
            Link::Identity => unreachable!(),
        };
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let design = DesignMatrices::from_parts(y, x, link).unwrap();
        let hyper = Hyperparams {
            adaptive,
            mu_prior_precision: 0.7,
            ..Hyperparams::default()
        };
        let mut state = init_state(&design, &hyper).unwrap();
        let sweeps = 1_000;
        for s in 0..sweeps {
            update_latent(&mut state, &design, &mut rng, s % 2 == 0);
            if adaptive {
                sweep_caralasso(&mut state, &design, &hyper, &mut rng).unwrap();
            } else {
                sweep_carlasso(&mut state, &design, &hyper, &mut rng).unwrap();
            }
            fuzz_checks(&state);
        }
        total_sweeps += sweeps;
        configs += 1;
    }

    let secs = start.elapsed().as_secs_f64();
    assert!(total_sweeps >= 100_000, "only {total_sweeps} sweeps");
    println!(
        "PASS criterion 7 — robustness fuzz: {} sweeps across {} configurations, SPD and finite after every sweep ({:.0} s)",
        total_sweeps, configs, secs
    );
}

// ---------------------------------------------------------------------------
// criterion 8 — distributional unit oracles
// ---------------------------------------------------------------------------

fn laplace_cdf(x: f64, rate: f64) -> f64 {
    if x < 0.0 {
        0.5 * (rate * x).exp()
    } else {
        1.0 - 0.5 * (-rate * x).exp()
    }
}

#[test]
fn criterion_8_distributional_oracles() {
    use carlasso::dist::{sample_inverse_gaussian, sample_truncnorm_sign};
    let start = Instant::now();
    let n = 1_000_000usize;
    let mut rng = RngStream::new(88_001, 0);

    // inverse-Gaussian mean
    let mut acc = 0.0;
    for _ in 0..n {
        acc += sample_inverse_gaussian(&mut rng, 1.0, 1.0).unwrap();
    }
    let ig_mean = acc / n as f64;
    assert!(
        (0.997..=1.003).contains(&ig_mean),
        "IG(1,1) mean = {ig_mean}"
    );

    // inverse-Gaussian variance: mean³/shape = 8
    let draws: Vec<f64> = (0..n)
        .map(|_| sample_inverse_gaussian(&mut rng, 2.0, 1.0).unwrap())
        .collect();
    let m = mean(&draws);
    let ig_var = draws.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    assert!(
        (ig_var - 8.0).abs() / 8.0 < 0.05,
        "IG(2,1) variance = {ig_var}"
    );

    // domain guard
    assert!(sample_inverse_gaussian(&mut rng, -1.0, 1.0).is_err());

    // half-normal mean of the sign-truncated normal sampler: √(2/π)
    let mut acc = 0.0;
    for _ in 0..n {
        acc += sample_truncnorm_sign(&mut rng, 0.0, 1.0, true);
    }
    let tn_mean = acc / n as f64;
    let half_normal = (2.0 / std::f64::consts::PI).sqrt();
    assert!(
        (tn_mean - half_normal).abs() < 0.002,
        "half-normal mean = {tn_mean}"
    );

    // Laplace scale mixture: τ² ~ Exp(λ²/2), b | τ² ~ N(0, τ²) marginalizes
    // to Laplace(λ); compare the empirical CDF against the closed form.
    let lam = 1.5;
    let mut xs: Vec<f64> = (0..n)
        .map(|_| {
            let t2 = draw_exp(&mut rng, lam * lam / 2.0);
            draw_normal(&mut rng, t2.sqrt())
        })
        .collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sup = 0.0f64;
    for (i, v) in xs.iter().enumerate() {
        let f = laplace_cdf(*v, lam);
        sup = sup
            .max((f - i as f64 / n as f64).abs())
            .max((f - (i + 1) as f64 / n as f64).abs());
    }
    assert!(sup < 0.005, "Laplace mixture sup-CDF gap = {sup}");

    println!(
        "PASS criterion 8 — distribution oracles: IG mean {:.4}, IG variance {:.3}, half-normal mean {:.4}, Laplace sup-CDF gap {:.4} ({:.0} s)",
        ig_mean,
        ig_var,
        tn_mean,
        sup,
        start.elapsed().as_secs_f64()
    );
}
