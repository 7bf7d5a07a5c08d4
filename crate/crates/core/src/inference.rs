//! Fit orchestration: burn-in, thinning, multi-chain runs, diagnostics,
//! posterior summaries, and the on-disk fit directory.
//!
//! A fit directory contains `summary.json` (the [`CarlassoOut`] document)
//! plus one `chain_<c>/` subdirectory per chain holding `omega.csv`,
//! `b.csv`, `mu.csv`, `lambda.csv` (rows = stored draws, columns = flattened
//! parameter entries under stable labels) and a `metadata.json` sidecar.
//! Floats are written in shortest round-trip form, so reading a fit
//! directory back recovers every draw bitwise.

use crate::error::{Error, Result};
use crate::formula::{parse_formula, render, validate_against_table};
use crate::ingest::{build_design, read_csv, DataTable, DesignMatrices};
use crate::links::{update_latent, Link};
use crate::model::{
    b_labels, b_to_row, init_state, lambda_labels, lambda_to_row, mu_labels, omega_labels,
    omega_to_row, ChainState, Hyperparams, PosteriorDraws, Shrinkage,
};
use crate::rng::RngStream;
use crate::samplers::{sweep_caralasso, sweep_carlasso};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Sweep counts, thinning, seeding, and chain multiplicity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcControls {
    /// Post-burn-in sweeps; every `thin_by`-th state is stored.
    pub n_iter: usize,
    pub n_burn_in: usize,
    pub thin_by: usize,
    pub seed: u64,
    pub chains: usize,
}

impl Default for McmcControls {
    fn default() -> Self {
        McmcControls {
            n_iter: 5000,
            n_burn_in: 1000,
            thin_by: 10,
            seed: 42,
            chains: 1,
        }
    }
}

impl McmcControls {
    pub fn stored_per_chain(&self) -> usize {
        self.n_iter / self.thin_by
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.thin_by == 0 {
            return Err(Error::DomainError {
                what: "mcmc controls",
                detail: format!(
                    "n_iter ({}) and thin_by ({}) must be positive",
                    self.n_iter, self.thin_by
                ),
            });
        }
        if self.chains == 0 {
            return Err(Error::DomainError {
                what: "mcmc controls",
                detail: "at least one chain is required".into(),
            });
        }
        if self.stored_per_chain() < 10 {
            return Err(Error::InsufficientDraws {
                draws: self.stored_per_chain(),
            });
        }
        Ok(())
    }
}

/// Where the data comes from: a CSV on disk or an in-memory table.
#[derive(Debug, Clone)]
pub enum DataSource {
    Path(PathBuf),
    Table(DataTable),
}

/// Everything needed to reproduce one fit.
#[derive(Debug, Clone)]
pub struct FitRequest {
    pub formula: String,
    pub data: DataSource,
    pub link: Link,
    pub hyper: Hyperparams,
    pub controls: McmcControls,
    /// Equal-tailed credible-interval level for the summaries.
    pub ci_level: f64,
}

impl FitRequest {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.controls.validate()?;
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::BadCiLevel {
                level: self.ci_level,
            });
        }
        Ok(())
    }
}

///// Progress callback: (chain index, sweeps done, total sweeps).
pub type Progress<'a> = &'a (dyn Fn(usize, usize, usize) + Sync);

/// One chain's retained draws plus its sampling-phase MH acceptance rate
/// (None for links without a Metropolis step).
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub chain: usize,
    pub draws: PosteriorDraws,
    pub mh_acceptance: Option<f64>,
}

/// Entrywise posterior summaries for one parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub labels: Vec<String>,
    pub mean: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub ess: Vec<f64>,
}

/// Reproducibility and interpretation metadata carried with every fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub formula: String,
    pub link: Link,
    pub adaptive: bool,
    pub seed: u64,
    pub chains: usize,
    pub n_iter: usize,
    pub n_burn_in: usize,
    pub thin_by: usize,
    pub draws_per_chain: usize,
    pub n_draws_stored: usize,
    pub ci_level: f64,
    pub n: usize,
    pub k_raw: usize,
    pub k_eff: usize,
    pub p: usize,
    pub response_labels: Vec<String>,
    /// Responses backing the Gaussian core (drops the logit reference).
    pub core_response_labels: Vec<String>,
    pub predictor_labels: Vec<String>,
    pub x_means: Vec<f64>,
    pub x_scales: Vec<f64>,
    pub y_centering: Option<Vec<f64>>,
    pub hyper: Hyperparams,
    pub mh_acceptance: Option<f64>,
    pub notes: Vec<String>,
    /// Wall-clock seconds; excluded from serialization so rerunning a fit
    /// with the same seed yields byte-identical output files.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

/// Posterior summaries for every reported block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlassoOut {
    pub metadata: FitMetadata,
    pub omega: BlockSummary,
    pub b: BlockSummary,
    pub mu: BlockSummary,
    pub lambda: BlockSummary,
    pub partial_correlation: BlockSummary,
}

/// Flattened upper-triangle position of (i, j) with i ≤ j.
pub(crate) fn tri_index(k: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < k);
    i * k - i * (i + 1) / 2 + j
}

/// (i, j) pairs with i < j in label order.
pub(crate) fn offdiag_pairs(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            out.push((i, j));
        }
    }
    out
}

pub(crate) fn partial_corr_labels(k: usize) -> Vec<String> {
    offdiag_pairs(k)
        .iter()
        .map(|(i, j)| format!("partial_corr[{},{}]", i + 1, j + 1))
        .collect()
}

fn partial_corr_row(omega: &DMatrix<f64>) -> Vec<f64> {
    offdiag_pairs(omega.nrows())
        .iter()
        .map(|&(i, j)| -omega[(i, j)] / (omega[(i, i)] * omega[(j, j)]).sqrt())
        .collect()
}

impl CarlassoOut {
    /// Posterior-mean precision matrix, reassembled symmetric.
    pub fn omega_mean_matrix(&self) -> DMatrix<f64> {
        let k = self.metadata.k_eff;
        let mut m = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = self.omega.mean[tri_index(k, i, j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Posterior-mean coefficient matrix (p × k_eff).
    pub fn b_mean_matrix(&self) -> DMatrix<f64> {
        let (p, k) = (self.metadata.p, self.metadata.k_eff);
        DMatrix::from_fn(p, k, |i, j| self.b.mean[i * k + j])
    }
}

/// Everything a fit produces: the summary document and the raw chains.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub summary: CarlassoOut,
    pub chains: Vec<ChainRun>,
}

fn sweep_dispatch<R: rand::Rng>(
    state: &mut ChainState,
    design: &DesignMatrices,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<()> {
    if hyper.adaptive {
        sweep_caralasso(state, design, hyper, rng)
    } else {
        sweep_carlasso(state, design, hyper, rng)
    }
}

fn run_one_chain(
    design: &DesignMatrices,
    hyper: &Hyperparams,
    ctl: &McmcControls,
    chain: usize,
    progress: Option<Progress>,
) -> Result<ChainRun> {
    let mut rng = RngStream::new(ctl.seed, chain as u64);
    let mut state = init_state(design, hyper)?;
    let total = ctl.n_burn_in + ctl.n_iter;
    let tick = (total / 10).max(1);
    let mut done = 0usize;
    let report = |done: usize| {
        if let Some(cb) = progress {
            if done.is_multiple_of(tick) || done == total {
                cb(chain, done, total);
            }
        }
    };

    for _ in 0..ctl.n_burn_in {
        update_latent(&mut state, design, &mut rng, true);
        sweep_dispatch(&mut state, design, hyper, &mut rng)?;
        done += 1;
        report(done);
    }

    // Adaptation freezes here; reset the acceptance counters so the
    // reported rate reflects the sampling phase only.
    if let Some(acc) = state.mh_accept.as_mut() {
        acc.fill(0);
    }
    state.mh_batch_fill = 0;

    let mut draws = PosteriorDraws::default();
    for t in 0..ctl.n_iter {
        update_latent(&mut state, design, &mut rng, false);
        sweep_dispatch(&mut state, design, hyper, &mut rng)?;
        if (t + 1) % ctl.thin_by == 0 {
            draws.push(&state);
        }
        done += 1;
        report(done);
    }

    let mh_acceptance = state.mh_accept.as_ref().map(|acc| {
        let hits: u64 = acc.iter().map(|v| u64::from(*v)).sum();
        hits as f64 / (acc.len() as f64 * ctl.n_iter as f64)
    });

    Ok(ChainRun {
        chain,
        draws,
        mh_acceptance,
    })
}

/// Run the requested chains one after another on the current thread.
pub fn run_chains_seq(
    design: &DesignMatrices,
    hyper: &Hyperparams,
    ctl: &McmcControls,
    progress: Option<Progress>,
) -> Result<Vec<ChainRun>> {
    (0..ctl.chains)
        .map(|c| run_one_chain(design, hyper, ctl, c, progress))
        .collect()
}

/// Run the requested chains, one worker per chain. Results are identical
/// to [`run_chains_seq`] for the same controls: every chain owns its own
/// seeded stream, so scheduling cannot change any draw. The environment
/// variable `CARLASSO_THREADS` caps the worker count.
#[cfg(feature = "parallel")]
pub fn run_chains(
    design: &DesignMatrices,
    hyper: &Hyperparams,
    ctl: &McmcControls,
    progress: Option<Progress>,
) -> Result<Vec<ChainRun>> {
    use rayon::prelude::*;
    if ctl.chains == 1 {
        return run_chains_seq(design, hyper, ctl, progress);
    }
    let work = || {
        (0..ctl.chains)
            .into_par_iter()
            .map(|c| run_one_chain(design, hyper, ctl, c, progress))
            .collect::<Result<Vec<_>>>()
    };
    match std::env::var("CARLASSO_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|t| *t > 0)
    {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Other(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn run_chains(
    design: &DesignMatrices,
    hyper: &Hyperparams,
    ctl: &McmcControls,
    progress: Option<Progress>,
) -> Result<Vec<ChainRun>> {
    run_chains_seq(design, hyper, ctl, progress)
}

/// Run the full pipeline: parse, bind, build design, sample, summarize.
pub fn fit(request: &FitRequest) -> Result<FitOutput> {
    fit_with_progress(request, None)
}

pub fn fit_with_progress(request: &FitRequest, progress: Option<Progress>) -> Result<FitOutput> {
    let start = Instant::now();
    request.validate()?;
    let owned_table;
    let table = match &request.data {
        DataSource::Path(p) => {
            owned_table = read_csv(p)?;
            &owned_table
        }
        DataSource::Table(t) => t,
    };
    let spec = parse_formula(&request.formula)?;
    let bound = validate_against_table(&spec, table)?;
    let design = build_design(table, &bound, request.link)?;
    if design.n() < 2 {
        return Err(Error::TooFewRows { n: design.n() });
    }

    let runs = run_chains(&design, &request.hyper, &request.controls, progress)?;
    let mut summary = summarize_chains(
        &runs,
        metadata_for(&render(&spec), &design, request),
        request.ci_level,
    )?;
    summary.metadata.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(FitOutput {
        summary,
        chains: runs,
    })
}

fn metadata_for(formula: &str, design: &DesignMatrices, request: &FitRequest) -> FitMetadata {
    FitMetadata {
        formula: formula.to_string(),
        link: request.link,
        adaptive: request.hyper.adaptive,
        seed: request.controls.seed,
        chains: request.controls.chains,
        n_iter: request.controls.n_iter,
        n_burn_in: request.controls.n_burn_in,
        thin_by: request.controls.thin_by,
        draws_per_chain: request.controls.stored_per_chain(),
        n_draws_stored: request.controls.stored_per_chain() * request.controls.chains,
        ci_level: request.ci_level,
        n: design.n(),
        k_raw: design.k_raw(),
        k_eff: design.k_eff(),
        p: design.p(),
        response_labels: design.response_labels.clone(),
        core_response_labels: design.core_response_labels().to_vec(),
        predictor_labels: design.predictor_labels.clone(),
        x_means: design.x_means.as_slice().to_vec(),
        x_scales: design.x_scales.as_slice().to_vec(),
        y_centering: if request.link == Link::Identity {
            Some(design.y_centering.clone())
        } else {
            None
        },
        hyper: request.hyper.clone(),
        mh_acceptance: None,
        notes: vec![
            "Coefficients are reported on the standardized predictor scale; dummy predictor columns are centered only.".into(),
            "n_iter counts post-burn-in sweeps; every thin_by-th sweep is stored.".into(),
            "Graph edge selection uses equal-tailed credible intervals, an extension beyond posterior-mean reporting.".into(),
        ],
        runtime_seconds: 0.0,
    }
}

/// Geyer initial-positive-sequence effective sample size:
/// ESS = N / (1 + 2·Σρ̂_t), truncating at the first lag pair whose
/// autocorrelation sum is nonpositive; clamped to (0, N]. A zero-variance
/// chain reports N by convention.
pub fn effective_sample_size(chain: &[f64]) -> Result<f64> {
    let n = chain.len();
    if n < 10 {
        return Err(Error::InsufficientDraws { draws: n });
    }
    let nf = n as f64;
    let mean = chain.iter().sum::<f64>() / nf;
    let var = chain.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    if var <= 0.0 || !var.is_finite() {
        return Ok(nf);
    }
    let autocorr = |lag: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..(n - lag) {
            s += (chain[i] - mean) * (chain[i + lag] - mean);
        }
        s / (nf * var)
    };
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = autocorr(lag) + autocorr(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    Ok((nf / (1.0 + 2.0 * sum)).clamp(f64::MIN_POSITIVE, nf))
}

fn ess_tolerant(chain: &[f64]) -> f64 {
    if chain.len() < 10 {
        chain.len() as f64
    } else {
        effective_sample_size(chain).unwrap_or(chain.len() as f64)
    }
}

/// Linear-interpolation quantile over an ascending-sorted slice
/// (the common order-statistic rule: h = (n−1)·q).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize_block(
    per_chain_rows: &[Vec<Vec<f64>>],
    labels: Vec<String>,
    level: f64,
) -> BlockSummary {
    let width = labels.len();
    let mut mean = Vec::with_capacity(width);
    let mut ci_lower = Vec::with_capacity(width);
    let mut ci_upper = Vec::with_capacity(width);
    let mut ess = Vec::with_capacity(width);
    let q_lo = (1.0 - level) / 2.0;
    let q_hi = 1.0 - q_lo;
    for col in 0..width {
        let mut pooled = Vec::new();
        let mut ess_sum = 0.0;
        for chain_rows in per_chain_rows {
            let series: Vec<f64> = chain_rows.iter().map(|r| r[col]).collect();
            ess_sum += ess_tolerant(&series);
            pooled.extend_from_slice(&series);
        }
        let m = pooled.iter().sum::<f64>() / pooled.len() as f64;
        pooled.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        mean.push(m);
        ci_lower.push(quantile_sorted(&pooled, q_lo));
        ci_upper.push(quantile_sorted(&pooled, q_hi));
        ess.push(ess_sum);
    }
    BlockSummary {
        labels,
        mean,
        ci_lower,
        ci_upper,
        ess,
    }
}

/// Pool chains into entrywise posterior summaries. ESS is summed over
/// chains (each chain contributes its own autocorrelation-discounted
/// count); CIs and means pool all stored draws.
pub fn summarize_chains(
    runs: &[ChainRun],
    mut metadata: FitMetadata,
    level: f64,
) -> Result<CarlassoOut> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::BadCiLevel { level });
    }
    if runs.is_empty() || runs.iter().any(|r| r.draws.is_empty()) {
        return Err(Error::InsufficientDraws { draws: 0 });
    }
    let k = metadata.k_eff;
    let p = metadata.p;
    let adaptive = metadata.adaptive;

    let rows = |f: &dyn Fn(&PosteriorDraws, usize) -> Vec<f64>| -> Vec<Vec<Vec<f64>>> {
        runs.iter()
            .map(|run| (0..run.draws.len()).map(|d| f(&run.draws, d)).collect())
            .collect()
    };

    let omega_rows = rows(&|d, i| omega_to_row(&d.omegas[i]));
    let b_rows = rows(&|d, i| b_to_row(&d.bs[i]));
    let mu_rows = rows(&|d, i| d.mus[i].as_slice().to_vec());
    let lambda_rows = rows(&|d, i| lambda_to_row(&d.lambda_betas[i], &d.lambda_omegas[i]));
    let pc_rows = rows(&|d, i| partial_corr_row(&d.omegas[i]));

    let rates: Vec<f64> = runs.iter().filter_map(|r| r.mh_acceptance).collect();
    metadata.mh_acceptance = if rates.is_empty() {
        None
    } else {
        Some(rates.iter().sum::<f64>() / rates.len() as f64)
    };
    metadata.draws_per_chain = runs[0].draws.len();
    metadata.n_draws_stored = runs.iter().map(|r| r.draws.len()).sum();

    Ok(CarlassoOut {
        omega: summarize_block(&omega_rows, omega_labels(k), level),
        b: summarize_block(&b_rows, b_labels(p, k), level),
        mu: summarize_block(&mu_rows, mu_labels(k), level),
        lambda: summarize_block(&lambda_rows, lambda_labels(p, k, adaptive), level),
        partial_correlation: summarize_block(&pc_rows, partial_corr_labels(k), level),
        metadata,
    })
}

// ---- fit-directory IO ----

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChainFileMeta {
    chain: usize,
    seed: u64,
    n_draws: usize,
    mh_acceptance: Option<f64>,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::io(path.to_path_buf(), e)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path.to_path_buf(), io),
        other => Error::ChainFileCorrupt {
            path: path.to_path_buf(),
            detail: format!("{other:?}"),
        },
    }
}

fn write_block_csv<I>(path: &Path, labels: &[String], rows: I) -> Result<()>
where
    I: Iterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(labels).map_err(|e| csv_err(path, e))?;
    for row in rows {
        debug_assert_eq!(row.len(), labels.len());
        w.write_record(row.iter().map(|v| format!("{v}")))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn read_block_csv(path: &Path, expected_labels: &[String]) -> Result<Vec<Vec<f64>>> {
    if !path.exists() {
        return Err(Error::FitDirIncomplete {
            path: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
            missing: path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        });
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got
        != expected_labels
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>()
    {
        return Err(Error::ChainFileCorrupt {
            path: path.to_path_buf(),
            detail: format!("unexpected column labels (found {} columns)", got.len()),
        });
    }
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != expected_labels.len() {
            return Err(Error::ChainFileCorrupt {
                path: path.to_path_buf(),
                detail: format!(
                    "row {} has {} fields, expected {}",
                    idx + 2,
                    rec.len(),
                    expected_labels.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(rec.len());
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::ChainFileCorrupt {
                path: path.to_path_buf(),
                detail: format!(
                    "row {}, column '{}': cannot parse '{}' as a number",
                    idx + 2,
                    expected_labels[col],
                    field
                ),
            })?;
            row.push(v);
        }
        out.push(row);
    }
    Ok(out)
}

/// Write `summary.json` plus per-chain CSVs into `dir` (created if absent).
pub fn write_fit_dir(dir: &Path, output: &FitOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let meta = &output.summary.metadata;
    let (k, p, adaptive) = (meta.k_eff, meta.p, meta.adaptive);

    let summary_path = dir.join("summary.json");
    let mut buf = serde_json::to_vec_pretty(&output.summary)
        .map_err(|e| Error::Other(format!("summary serialization: {e}")))?;
    buf.push(b'\n');
    fs::write(&summary_path, buf).map_err(|e| io_err(&summary_path, e))?;

    for run in &output.chains {
        let cdir = dir.join(format!("chain_{}", run.chain));
        fs::create_dir_all(&cdir).map_err(|e| io_err(&cdir, e))?;
        write_block_csv(
            &cdir.join("omega.csv"),
            &omega_labels(k),
            run.draws.omegas.iter().map(omega_to_row),
        )?;
        if p > 0 {
            write_block_csv(
                &cdir.join("b.csv"),
                &b_labels(p, k),
                run.draws.bs.iter().map(b_to_row),
            )?;
        }
        write_block_csv(
            &cdir.join("mu.csv"),
            &mu_labels(k),
            run.draws.mus.iter().map(|m| m.as_slice().to_vec()),
        )?;
        write_block_csv(
            &cdir.join("lambda.csv"),
            &lambda_labels(p, k, adaptive),
            run.draws
                .lambda_betas
                .iter()
                .zip(run.draws.lambda_omegas.iter())
                .map(|(lb, lo)| lambda_to_row(lb, lo)),
        )?;
        let chain_meta = ChainFileMeta {
            chain: run.chain,
            seed: meta.seed,
            n_draws: run.draws.len(),
            mh_acceptance: run.mh_acceptance,
        };
        let meta_path = cdir.join("metadata.json");
        let mut mbuf = serde_json::to_vec_pretty(&chain_meta)
            .map_err(|e| Error::Other(format!("chain metadata serialization: {e}")))?;
        mbuf.push(b'\n');
        fs::write(&meta_path, mbuf).map_err(|e| io_err(&meta_path, e))?;
    }
    Ok(())
}

/// A fit directory loaded back into memory.
#[derive(Debug, Clone)]
pub struct LoadedFit {
    pub summary: CarlassoOut,
    pub chains: Vec<PosteriorDraws>,
}

/// Read `summary.json` and every chain's CSVs, reconstructing the draws
/// bitwise.
pub fn read_fit_dir(dir: &Path) -> Result<LoadedFit> {
    let summary_path = dir.join("summary.json");
    if !summary_path.exists() {
        return Err(Error::FitDirIncomplete {
            path: dir.to_path_buf(),
            missing: "summary.json".into(),
        });
    }
    let text = fs::read_to_string(&summary_path).map_err(|e| io_err(&summary_path, e))?;
    let summary: CarlassoOut =
        serde_json::from_str(&text).map_err(|e| Error::ChainFileCorrupt {
            path: summary_path.clone(),
            detail: format!("summary schema: {e}"),
        })?;
    let meta = &summary.metadata;
    let (k, p, adaptive) = (meta.k_eff, meta.p, meta.adaptive);

    let mut chains = Vec::with_capacity(meta.chains);
    for c in 0..meta.chains {
        let cdir = dir.join(format!("chain_{c}"));
        if !cdir.is_dir() {
            return Err(Error::FitDirIncomplete {
                path: dir.to_path_buf(),
                missing: format!("chain_{c}/"),
            });
        }
        let omega_rows = read_block_csv(&cdir.join("omega.csv"), &omega_labels(k))?;
        let b_rows = if p > 0 {
            read_block_csv(&cdir.join("b.csv"), &b_labels(p, k))?
        } else {
            vec![Vec::new(); omega_rows.len()]
        };
        let mu_rows = read_block_csv(&cdir.join("mu.csv"), &mu_labels(k))?;
        let lambda_rows = read_block_csv(&cdir.join("lambda.csv"), &lambda_labels(p, k, adaptive))?;
        let n_draws = omega_rows.len();
        if b_rows.len() != n_draws || mu_rows.len() != n_draws || lambda_rows.len() != n_draws {
            return Err(Error::ChainFileCorrupt {
                path: cdir,
                detail: "chain CSVs disagree on the number of stored draws".into(),
            });
        }

        let mut draws = PosteriorDraws::default();
        for d in 0..n_draws {
            let mut om = DMatrix::zeros(k, k);
            for i in 0..k {
                for j in i..k {
                    let v = omega_rows[d][tri_index(k, i, j)];
                    om[(i, j)] = v;
                    om[(j, i)] = v;
                }
            }
            draws.omegas.push(om);
            draws
                .bs
                .push(DMatrix::from_fn(p, k, |i, j| b_rows[d][i * k + j]));
            draws.mus.push(DVector::from_row_slice(&mu_rows[d]));
            let (lb, lo) = if adaptive {
                let beta = DMatrix::from_fn(p, k, |i, j| lambda_rows[d][i * k + j]);
                let mut om_rates = DMatrix::zeros(k, k);
                for i in 0..k {
                    for j in i..k {
                        let v = lambda_rows[d][p * k + tri_index(k, i, j)];
                        om_rates[(i, j)] = v;
                        om_rates[(j, i)] = v;
                    }
                }
                (Shrinkage::PerEntry(beta), Shrinkage::PerEntry(om_rates))
            } else {
                (
                    Shrinkage::Scalar(lambda_rows[d][0]),
                    Shrinkage::Scalar(lambda_rows[d][1]),
                )
            };
            draws.lambda_betas.push(lb);
            draws.lambda_omegas.push(lo);
        }
        chains.push(draws);
    }
    Ok(LoadedFit { summary, chains })
}
