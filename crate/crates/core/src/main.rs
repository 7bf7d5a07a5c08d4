//! `carlasso` — fit sparse chain-graph models from the command line and
//! export the inferred network.
//!
//! Exit codes: 0 success, 1 pipeline failure (I/O, bad data, sampler
//! breakdown), 2 flag misuse (clap errors and invalid parameter values).

use carlasso::error::Error;
use carlasso::graph::{build_graph, export_graph, ExportFormat, InclusionRule};
use carlasso::inference::{
    fit_with_progress, read_fit_dir, write_fit_dir, BlockSummary, DataSource, FitRequest,
    McmcControls,
};
use carlasso::ingest::write_csv;
use carlasso::links::Link;
use carlasso::model::Hyperparams;
use carlasso::sim::{simulate, SimConfig};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "carlasso",
    version,
    about = "Sparse chain-graph models: LASSO-regularized precision and coefficient \
             estimation for multivariate responses, with network export"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a model and write posterior summaries plus chain draws to a directory
    Fit(FitArgs),
    /// Print a digest of a saved fit directory
    Summary(SummaryArgs),
    /// Build the inferred chain graph from a saved fit and export it
    Graph(GraphArgs),
    /// Generate a synthetic dataset with known ground truth
    Simulate(SimArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Model formula, e.g. "y1 + y2 ~ x1 + x2"
    #[arg(long)]
    formula: String,
    /// CSV file with a header row
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Link::Identity)]
    link: Link,
    /// Per-entry shrinkage rates instead of two shared ones
    #[arg(long)]
    adaptive: bool,
    /// Post-burn-in sweeps
    #[arg(long = "n-iter", default_value_t = 5000)]
    n_iter: usize,
    #[arg(long = "burn-in", default_value_t = 1000)]
    burn_in: usize,
    /// Keep every thin-th sweep
    #[arg(long, default_value_t = 10)]
    thin: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Independent chains (streamed from the same seed)
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Equal-tailed credible-interval level for summaries
    #[arg(long = "ci-level", default_value_t = 0.9)]
    ci_level: f64,
    /// Shape of the Gamma prior on the coefficient shrinkage rate
    #[arg(long = "r-beta", default_value_t = 1.0)]
    r_beta: f64,
    /// Rate of the Gamma prior on the coefficient shrinkage rate
    #[arg(long = "delta-beta", default_value_t = 0.01)]
    delta_beta: f64,
    /// Shape of the Gamma prior on the precision shrinkage rate
    #[arg(long = "r-omega", default_value_t = 1.0)]
    r_omega: f64,
    /// Rate of the Gamma prior on the precision shrinkage rate
    #[arg(long = "delta-omega", default_value_t = 0.01)]
    delta_omega: f64,
    /// Gaussian prior precision on the intercept (0 = flat)
    #[arg(long = "mu-precision", default_value_t = 0.0)]
    mu_precision: f64,
    /// Output directory; an existing fit there is replaced on success
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummaryArgs {
    /// Fit directory written by `carlasso fit`
    #[arg(long)]
    fit: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    /// Fit directory written by `carlasso fit`
    #[arg(long)]
    fit: PathBuf,
    #[arg(long, value_enum, default_value_t = ExportFormat::Dot)]
    format: ExportFormat,
    /// Credible level for edge selection (defaults to the fit's level)
    #[arg(long = "ci-level")]
    ci_level: Option<f64>,
    /// Include edges by |posterior mean| ≥ threshold instead of CI exclusion
    #[arg(long = "min-abs-weight")]
    min_abs_weight: Option<f64>,
    /// Output file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    /// Response columns
    #[arg(long)]
    k: usize,
    /// Predictor columns
    #[arg(long)]
    p: usize,
    /// Rows
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value_t = Link::Identity)]
    link: Link,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Expected fraction of nonzero coefficient entries
    #[arg(long = "b-frac", default_value_t = 0.3)]
    b_frac: f64,
    /// Per-row count total for the logit link
    #[arg(long = "logit-total", default_value_t = 50)]
    logit_total: u64,
    /// Output directory for data.csv and truth.json
    #[arg(long)]
    out: PathBuf,
}

/// An error carrying the process exit code it should produce.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(err: Error) -> Self {
        CliError {
            code: 2,
            message: err.to_string(),
        }
    }

    fn pipeline(err: Error) -> Self {
        CliError {
            code: 1,
            message: err.to_string(),
        }
    }
}

/// Restore the default SIGPIPE disposition so piping into a consumer that
/// exits early (`carlasso summary | head`) terminates this process quietly
/// instead of panicking on a closed stdout.
fn reset_sigpipe() {
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Fit(args) => cmd_fit(args),
        Cmd::Summary(args) => cmd_summary(args),
        Cmd::Graph(args) => cmd_graph(args),
        Cmd::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Reject an `--out` target we must not clobber: anything that is not a
/// previous fit/simulation directory (marker file present) or an empty dir.
fn check_out_dir(out: &Path, marker: &str) -> Result<(), Error> {
    if !out.exists() {
        return Ok(());
    }
    if !out.is_dir() || !(out.join(marker).is_file() || dir_is_empty(out)?) {
        return Err(Error::OutDirOccupied {
            path: out.to_path_buf(),
        });
    }
    Ok(())
}

fn dir_is_empty(dir: &Path) -> Result<bool, Error> {
    let mut entries = fs::read_dir(dir).map_err(|e| Error::io(dir.to_path_buf(), e))?;
    Ok(entries.next().is_none())
}

/// Create a staging directory next to `out` so the final rename stays on
/// one filesystem.
fn staging_dir(out: &Path) -> Result<tempfile::TempDir, Error> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(parent.clone(), e))?;
    tempfile::Builder::new()
        .prefix(".carlasso-stage-")
        .tempdir_in(&parent)
        .map_err(|e| Error::io(parent, e))
}

/// Atomically move the fully written staging directory into place,
/// replacing a previous run if the marker confirms that is what it was.
fn swap_into_place(stage: tempfile::TempDir, out: &Path, marker: &str) -> Result<(), Error> {
    check_out_dir(out, marker)?;
    if out.exists() {
        fs::remove_dir_all(out).map_err(|e| Error::io(out.to_path_buf(), e))?;
    }
    let stage_path = stage.keep();
    match fs::rename(&stage_path, out) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_dir_all(&stage_path);
            Err(Error::io(out.to_path_buf(), e))
        }
    }
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let request = FitRequest {
        formula: args.formula,
        data: DataSource::Path(args.data),
        link: args.link,
        hyper: Hyperparams {
            r_beta: args.r_beta,
            delta_beta: args.delta_beta,
            r_omega: args.r_omega,
            delta_omega: args.delta_omega,
            adaptive: args.adaptive,
            mu_prior_precision: args.mu_precision,
        },
        controls: McmcControls {
            n_iter: args.n_iter,
            n_burn_in: args.burn_in,
            thin_by: args.thin,
            seed: args.seed,
            chains: args.chains,
        },
        ci_level: args.ci_level,
    };
    // Flag-value problems are usage errors; everything past this point is a
    // pipeline failure.
    request.validate().map_err(CliError::usage)?;
    check_out_dir(&args.out, "summary.json").map_err(CliError::pipeline)?;

    let total_chains = request.controls.chains;
    let progress = |chain: usize, done: usize, total: usize| {
        eprintln!(
            "chain {}/{}: {done}/{total} sweeps ({}%)",
            chain + 1,
            total_chains,
            100 * done / total.max(1)
        );
    };
    let output = fit_with_progress(&request, Some(&progress)).map_err(CliError::pipeline)?;

    let stage = staging_dir(&args.out).map_err(CliError::pipeline)?;
    write_fit_dir(stage.path(), &output).map_err(CliError::pipeline)?;
    swap_into_place(stage, &args.out, "summary.json").map_err(CliError::pipeline)?;

    let meta = &output.summary.metadata;
    eprintln!(
        "fit complete in {:.1}s: {} chains × {} stored draws, n={}, k={}, p={}",
        meta.runtime_seconds, meta.chains, meta.draws_per_chain, meta.n, meta.k_eff, meta.p
    );
    if let Some(rate) = meta.mh_acceptance {
        eprintln!("latent Metropolis acceptance rate: {rate:.3}");
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn print_block(title: &str, block: &BlockSummary, ci_level: f64) {
    if block.labels.is_empty() {
        return;
    }
    println!("\n{title} (mean, {:.0}% CI, ESS):", 100.0 * ci_level);
    let width = block.labels.iter().map(|l| l.len()).max().unwrap_or(0);
    for i in 0..block.labels.len() {
        println!(
            "  {:width$}  {:>10.4}  [{:>10.4}, {:>10.4}]  {:>8.1}",
            block.labels[i], block.mean[i], block.ci_lower[i], block.ci_upper[i], block.ess[i],
        );
    }
}

fn cmd_summary(args: SummaryArgs) -> Result<(), CliError> {
    let loaded = read_fit_dir(&args.fit).map_err(CliError::pipeline)?;
    let meta = &loaded.summary.metadata;

    println!("formula:   {}", meta.formula);
    println!(
        "model:     link={}, {}",
        meta.link,
        if meta.adaptive {
            "adaptive shrinkage"
        } else {
            "shared shrinkage rates"
        }
    );
    println!(
        "data:      n={}, responses={} ({} in Gaussian core), predictors={}",
        meta.n, meta.k_raw, meta.k_eff, meta.p
    );
    println!(
        "sampling:  {} chains × {} sweeps (burn-in {}, thin {}), seed {}, {} draws stored",
        meta.chains, meta.n_iter, meta.n_burn_in, meta.thin_by, meta.seed, meta.n_draws_stored
    );
    if let Some(rate) = meta.mh_acceptance {
        println!("latent MH: acceptance {rate:.3}");
    }
    for note in &meta.notes {
        println!("note:      {note}");
    }

    print_block(
        "partial correlations",
        &loaded.summary.partial_correlation,
        meta.ci_level,
    );
    print_block("coefficients", &loaded.summary.b, meta.ci_level);
    print_block("intercepts", &loaded.summary.mu, meta.ci_level);
    print_block("shrinkage rates", &loaded.summary.lambda, meta.ci_level);
    Ok(())
}

fn cmd_graph(args: GraphArgs) -> Result<(), CliError> {
    if let Some(level) = args.ci_level {
        if !(level > 0.0 && level < 1.0) {
            return Err(CliError::usage(Error::BadCiLevel { level }));
        }
    }
    if let Some(t) = args.min_abs_weight {
        if t.is_nan() || t < 0.0 {
            return Err(CliError::usage(Error::DomainError {
                what: "graph threshold",
                detail: format!("min-abs-weight must be nonnegative, got {t}"),
            }));
        }
    }

    let loaded = read_fit_dir(&args.fit).map_err(CliError::pipeline)?;
    let level = args.ci_level.unwrap_or(loaded.summary.metadata.ci_level);
    let rule = match args.min_abs_weight {
        Some(t) => InclusionRule::MinAbsWeight(t),
        None => InclusionRule::CiExcludesZero,
    };
    let graph = build_graph(&loaded.summary.metadata, &loaded.chains, level, rule)
        .map_err(CliError::pipeline)?;

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::pipeline(Error::io(parent.to_path_buf(), e)))?;
        }
    }
    export_graph(&graph, args.format, &args.out).map_err(CliError::pipeline)?;

    println!(
        "wrote {}: {} nodes, {} of {} edges included",
        args.out.display(),
        graph.node_count(),
        graph.included_edge_count(),
        graph.edges.len()
    );
    Ok(())
}

fn cmd_simulate(args: SimArgs) -> Result<(), CliError> {
    let config = SimConfig {
        k: args.k,
        p: args.p,
        n: args.n,
        link: args.link,
        seed: args.seed,
        b_frac: args.b_frac,
        logit_total: args.logit_total,
    };
    // Invalid dimensions are usage errors.
    config.validate().map_err(CliError::usage)?;
    check_out_dir(&args.out, "truth.json").map_err(CliError::pipeline)?;

    let (table, truth) = simulate(&config).map_err(CliError::pipeline)?;

    let stage = staging_dir(&args.out).map_err(CliError::pipeline)?;
    write_csv(&table, &stage.path().join("data.csv")).map_err(CliError::pipeline)?;
    let truth_json = serde_json::to_string_pretty(&truth)
        .map_err(|e| CliError::pipeline(Error::Other(format!("truth serialization: {e}"))))?;
    fs::write(stage.path().join("truth.json"), truth_json + "\n")
        .map_err(|e| CliError::pipeline(Error::io(stage.path().join("truth.json"), e)))?;
    swap_into_place(stage, &args.out, "truth.json").map_err(CliError::pipeline)?;

    println!(
        "wrote {}: data.csv ({} rows × {} columns) and truth.json",
        args.out.display(),
        config.n,
        config.k + config.p
    );
    Ok(())
}
