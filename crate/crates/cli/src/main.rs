//! `rnaphase` command-line front end.
//!
//! Exit codes: 0 success, 1 internal or check failure, 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rnaphase::error::{AnalysisError, ModelError, SingularityError, StructureError};
use rnaphase::folding::{
    count_candidates_sweep, fold_full, fold_sparse, FoldOptions, PairingRule, Sequence, Sweep,
};
use rnaphase::sampler::{
    fit_discrete_pmf, fit_gaussian_pmf, fit_rayleigh_pmf, histogram_csv, limit_pmf_for_tau, Law,
    LawFit, SampleBatch, Sampler,
};
use rnaphase::series::{brute_force_enumerate, WeightedSeries, BRUTE_FORCE_LIMIT, MIN_BLOCK};
use rnaphase::singularity::{classify, tune_to_critical, Regime, RegimeReport, DEFAULT_TOL};
use rnaphase::stats::{normal_cdf, rayleigh_cdf};
use rnaphase::{EnergyParams, Execution, ParamName, ScaledReal, SecondaryStructure};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rnaphase", version, about = "Loop-energy RNA structure model: counting, regimes, sampling, folding")]
struct Cli {
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weighted counts S[n], C[n] and r(n) = C[n]/S[n] as CSV.
    Count(CountArgs),
    /// Locate the singularities and report the regime as JSON.
    Classify(ClassifyArgs),
    /// Tune one parameter to the critical point and print the parameter file.
    Tune(TuneArgs),
    /// Boltzmann-sample structures and fit the block-count law.
    Sample(SampleArgs),
    /// Maximum-score structure of a sequence.
    Fold(FoldArgs),
    /// Full against sparse folding on random sequences.
    Bench(BenchArgs),
    /// Tree of irreducible blocks of a structure, or tree statistics of samples.
    Tree(TreeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Subcritical,
    Supercritical,
}

#[derive(Args)]
struct ParamArgs {
    /// Parameter file with `name = value` lines; `subcritical` and `supercritical` name the built-in sets.
    #[arg(long)]
    params: Option<String>,
    /// Built-in parameter set.
    #[arg(long, value_enum, conflicts_with = "params")]
    preset: Option<Preset>,
    /// Override one value, e.g. `--set gamma1=-6.5` or `--set v=2`.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct CountArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1000)]
    nmax: usize,
    /// Compare against exhaustive enumeration for every n up to this length.
    #[arg(long, value_name = "N")]
    oracle_check: Option<usize>,
    /// Also write the block-count table for these lengths.
    #[arg(long, value_delimiter = ',')]
    blocks: Vec<usize>,
    #[arg(long, requires = "blocks")]
    blocks_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Tune this parameter to criticality first.
    #[arg(long, requires = "bracket")]
    tune: Option<ParamName>,
    #[arg(long, num_args = 2, allow_negative_numbers = true, value_names = ["LO", "HI"])]
    bracket: Vec<f64>,
    /// Where to write the tuned parameter file.
    #[arg(long, requires = "tune")]
    tuned_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Free parameter.
    free: ParamName,
    #[arg(long, num_args = 2, allow_negative_numbers = true, required = true, value_names = ["LO", "HI"])]
    bracket: Vec<f64>,
    /// JSON record of the tuning run.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawChoice {
    /// Pick by the regime of the parameters.
    Auto,
    Discrete,
    Gaussian,
    Rayleigh,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    law: LawChoice,
    /// Per-sample CSV (`sample_id,X,G,arcs`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Histogram CSV (`k,empirical,exact,limit_law`).
    #[arg(long)]
    hist: Option<PathBuf>,
    /// Fit JSON; printed to stdout when absent.
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Skip the exact block-count distribution.
    #[arg(long)]
    no_exact: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Wobble,
    Any,
    None,
}

#[derive(Args)]
struct FoldArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, conflicts_with = "fasta", required_unless_present = "fasta")]
    seq: Option<String>,
    #[arg(long)]
    fasta: Option<PathBuf>,
    /// Candidate-list recursion.
    #[arg(long)]
    sparse: bool,
    /// No interior-loop cap (n <= 120).
    #[arg(long)]
    uncapped: bool,
    #[arg(long, value_enum, default_value = "wobble")]
    rule: Rule,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_delimiter = ',', default_value = "100,200,400,800")]
    lengths: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Leave the wall-clock columns empty (deterministic output).
    #[arg(long)]
    no_timing: bool,
    /// JSON with per-length summaries and slope fits.
    #[arg(long)]
    fits: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Dot-bracket structure.
    #[arg(long, conflicts_with = "sample", required_unless_present = "sample")]
    structure: Option<String>,
    /// Sample structures of this length and report median tree statistics.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

enum CliError {
    Usage(String),
    Internal(String),
}

type CliResult<T = ()> = Result<T, CliError>;

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<StructureError> for CliError {
    fn from(e: StructureError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SingularityError> for CliError {
    fn from(e: SingularityError) -> Self {
        match e {
            SingularityError::BracketNoSignChange { .. } | SingularityError::NonMonotone { .. } | SingularityError::Model(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::TooLarge { .. }
            | AnalysisError::OutOfTable { .. }
            | AnalysisError::Structure(_)
            | AnalysisError::Degenerate(_) => CliError::Usage(e.to_string()),
            AnalysisError::Singularity(s) => s.into(),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads(cli.threads) {
        return report(e);
    }
    let result = match cli.command {
        Command::Count(a) => cmd_count(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Fold(a) => cmd_fold(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Tree(a) => cmd_tree(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    match e {
        CliError::Usage(m) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        CliError::Internal(m) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: Option<usize>) -> CliResult {
    match threads {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string())),
        None => Ok(()),
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: Option<usize>) -> CliResult {
    if threads.is_some_and(|t| t > 1) {
        eprintln!("warning: built without the `parallel` feature, running on one thread");
    }
    Ok(())
}

/// Resolved parameters plus a label for the provenance header.
struct Resolved {
    params: EnergyParams,
    source: String,
}

impl ParamArgs {
    fn resolve(&self) -> CliResult<Resolved> {
        let (mut params, mut source) = match (&self.params, self.preset) {
            (Some(path), _) if !Path::new(path).exists() && path == "subcritical" => {
                (EnergyParams::subcritical(), "preset subcritical".to_string())
            }
            (Some(path), _) if !Path::new(path).exists() && path == "supercritical" => {
                (EnergyParams::supercritical(), "preset supercritical".to_string())
            }
            (Some(path), _) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
                (EnergyParams::parse(&text)?, format!("file {path}"))
            }
            (None, Some(Preset::Supercritical)) => (EnergyParams::supercritical(), "preset supercritical".into()),
            (None, _) => (EnergyParams::subcritical(), "preset subcritical".into()),
        };
        for o in &self.overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("override `{o}` is not NAME=VALUE")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("override `{o}` has a non-numeric value")))?;
            params = match key.trim() {
                "v" => params.with_weights(value, params.p())?,
                "p" => params.with_weights(params.v(), value)?,
                name => params.with(name.parse()?, value)?,
            };
            source.push_str(&format!(", {}", o.trim()));
        }
        Ok(Resolved { params, source })
    }
}

fn header(command: &str, r: &Resolved, extra: &[(&str, String)]) -> Vec<String> {
    let mut h = vec![
        format!("rnaphase {} {command}", env!("CARGO_PKG_VERSION")),
        format!("params ({}): {}", r.source, r.params.summary()),
    ];
    h.extend(extra.iter().map(|(k, v)| format!("{k}: {v}")));
    h
}

fn write_out(path: Option<&Path>, content: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

fn cmd_count(a: CountArgs) -> CliResult {
    let r = a.params.resolve()?;
    let oracle_n = a.oracle_check.unwrap_or(0);
    if oracle_n > BRUTE_FORCE_LIMIT {
        return Err(CliError::Usage(format!("--oracle-check is limited to n <= {BRUTE_FORCE_LIMIT}")));
    }
    let nmax = a.nmax.max(oracle_n).max(a.blocks.iter().copied().max().unwrap_or(0));
    let series = WeightedSeries::<ScaledReal>::compute(&r.params, nmax);
    let h = header("count", &r, &[("nmax", a.nmax.to_string())]);
    let mut csv = series.to_csv(&h);
    if nmax > a.nmax {
        // keep exactly nmax + 1 data rows
        let keep = csv.lines().count() - (nmax - a.nmax);
        csv = csv.lines().take(keep).map(|l| format!("{l}\n")).collect();
    }
    let mut oracle_ok = true;
    if let Some(limit) = a.oracle_check {
        let table = series.blocks(limit / MIN_BLOCK, Execution::default());
        let mut worst: f64 = 0.0;
        for n in 0..=limit {
            let bf = brute_force_enumerate(n, &r.params)?;
            let mut e = ScaledReal::rel_diff(series.s()[n], bf.s).max(ScaledReal::rel_diff(series.c()[n], bf.c));
            for (k, &w) in bf.sk.iter().enumerate() {
                e = e.max(ScaledReal::rel_diff(table.get(n, k), w));
            }
            worst = worst.max(e);
            csv.push_str(&format!("# oracle n={n} structures={} max_rel_err={e:.3e}\n", bf.structures));
        }
        oracle_ok = worst < 1e-9;
        csv.push_str(&format!(
            "# oracle {}: max relative error {worst:.3e} for n <= {limit}\n",
            if oracle_ok { "agrees" } else { "DISAGREES" }
        ));
    }
    write_out(a.out.as_deref(), &csv)?;
    if !a.blocks.is_empty() {
        let kmax = a.blocks.iter().max().copied().unwrap_or(0) / MIN_BLOCK;
        let table = series.blocks(kmax, Execution::default());
        let h = header("count --blocks", &r, &[("lengths", format!("{:?}", a.blocks))]);
        let out = table.to_csv(series.s(), &a.blocks, &h);
        write_out(a.blocks_out.as_deref(), &out)?;
    }
    if oracle_ok {
        Ok(())
    } else {
        Err(CliError::Internal("series disagrees with exhaustive enumeration".into()))
    }
}

fn bracket(v: &[f64]) -> (f64, f64) {
    (v[0], v[1])
}

fn cmd_classify(a: ClassifyArgs) -> CliResult {
    let r = a.params.resolve()?;
    let out = match a.tune {
        None => {
            let report = classify(&r.params, a.tol)?;
            json!({ "source": r.source, "report": report })
        }
        Some(free) => {
            let tuned = tune_to_critical(&r.params, free, bracket(&a.bracket))?;
            let report = classify(&tuned.params, a.tol)?;
            if let Some(path) = &a.tuned_out {
                let file = tuned_param_file(&r, &tuned.params, free, tuned.gap);
                write_out(Some(path), &file)?;
            }
            json!({ "source": r.source, "tune": tuned, "report": report })
        }
    };
    write_out(a.out.as_deref(), &to_json(&out))
}

fn tuned_param_file(r: &Resolved, params: &EnergyParams, free: ParamName, gap: f64) -> String {
    let mut s = String::new();
    for line in header("tune", r, &[("free", free.to_string()), ("gap", format!("{gap:e}"))]) {
        s.push_str(&format!("# {line}\n"));
    }
    s.push_str(&params.to_param_file());
    s
}

fn cmd_tune(a: TuneArgs) -> CliResult {
    let r = a.params.resolve()?;
    let tuned = tune_to_critical(&r.params, a.free, bracket(&a.bracket))?;
    if let Some(path) = &a.report {
        let report = classify(&tuned.params, DEFAULT_TOL)?;
        write_out(Some(path), &to_json(&json!({ "source": r.source, "tune": tuned, "report": report })))?;
    }
    write_out(a.out.as_deref(), &tuned_param_file(&r, &tuned.params, a.free, tuned.gap))
}

/// `P(X = k)` of a continuous law read off at half-integers.
fn discretize(cdf: impl Fn(f64) -> f64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| {
            let lo = if k == 0 { 0.0 } else { cdf(k as f64 - 0.5) };
            cdf(k as f64 + 0.5) - lo
        })
        .collect()
}

fn cmd_sample(a: SampleArgs) -> CliResult {
    let r = a.params.resolve()?;
    if a.count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    let exec = Execution::default();
    let report: RegimeReport = classify(&r.params, DEFAULT_TOL)?;
    let law = match a.law {
        LawChoice::Auto => match report.regime {
            Regime::Subcritical => Law::DiscreteLimit,
            Regime::Supercritical => Law::Gaussian,
            Regime::Critical => Law::Rayleigh,
        },
        LawChoice::Discrete => Law::DiscreteLimit,
        LawChoice::Gaussian => Law::Gaussian,
        LawChoice::Rayleigh => Law::Rayleigh,
    };
    let series = WeightedSeries::<ScaledReal>::compute(&r.params, a.n);
    let batch: SampleBatch = Sampler::from_series(&series).sample(a.n, a.count, a.seed, false, exec);
    let pmf = batch.block_pmf();
    let exact = if a.no_exact {
        None
    } else {
        Some(series.blocks(a.n / MIN_BLOCK, exec).pmf(a.n, series.s()[a.n])?)
    };
    let len = exact.as_ref().map_or(pmf.len(), |e| e.len()).max(pmf.len());
    let (fit, limit): (LawFit, Vec<f64>) = match law {
        Law::DiscreteLimit => {
            let q = limit_pmf_for_tau(report.tau_h, len - 1);
            (fit_discrete_pmf(&pmf, &q, a.n, a.count), q)
        }
        Law::Gaussian => {
            let fit = fit_gaussian_pmf(&pmf, a.n, a.count)?;
            let (m, sd) = (fit.mean, fit.variance.sqrt());
            (fit, discretize(|x| normal_cdf((x - m) / sd), len))
        }
        Law::Rayleigh => {
            let fit = fit_rayleigh_pmf(&pmf, a.n, a.count)?;
            let sigma = fit.sigma.expect("rayleigh fit sets sigma");
            let root_n = (a.n as f64).sqrt();
            (fit, discretize(|x| rayleigh_cdf(x / root_n, sigma), len))
        }
    };
    let h = header(
        "sample",
        &r,
        &[
            ("n", a.n.to_string()),
            ("count", a.count.to_string()),
            ("seed", a.seed.to_string()),
            ("regime", report.regime.to_string()),
            ("law", format!("{law:?}")),
        ],
    );
    if let Some(path) = &a.out {
        write_out(Some(path), &batch.to_csv(&h))?;
    }
    if let Some(path) = &a.hist {
        write_out(Some(path), &histogram_csv(&pmf, exact.as_deref(), Some(&limit), &h))?;
    }
    let exact_tv = exact.as_ref().map(|e| rnaphase::stats::total_variation(&pmf, e));
    let out = json!({
        "provenance": h,
        "params": r.params,
        "seed": a.seed,
        "regime": report.regime,
        "tau_h": report.tau_h,
        "fit": fit,
        "tv_to_exact": exact_tv,
    });
    write_out(a.fit.as_deref(), &to_json(&out))
}

fn cmd_fold(a: FoldArgs) -> CliResult {
    let r = a.params.resolve()?;
    let seq = match (&a.seq, &a.fasta) {
        (Some(s), _) => Sequence::new(s)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            Sequence::parse_fasta(&text)?
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let opts = FoldOptions {
        max_interior: if a.uncapped { None } else { FoldOptions::default().max_interior },
        rule: match a.rule {
            Rule::Wobble => PairingRule::WatsonCrickWobble,
            Rule::Any => PairingRule::Any,
            Rule::None => PairingRule::None,
        },
    };
    let result = if a.sparse {
        fold_sparse(&seq, &r.params, opts)?
    } else {
        fold_full(&seq, &r.params, opts)?
    };
    let out = if a.json {
        to_json(&json!({
            "params": r.params,
            "sequence": seq.as_str(),
            "structure": result.structure.to_dot_bracket(),
            "score": result.score(),
            "variant": if a.sparse { "sparse" } else { "full" },
            "options": opts,
            "stats": result.stats,
        }))
    } else {
        format!(
            "{}\n{} {:.4}\n# {} intervals={} candidates={} cells={}\n",
            seq,
            result.structure.to_dot_bracket(),
            result.score(),
            if a.sparse { "sparse" } else { "full" },
            result.stats.intervals,
            result.stats.candidates,
            result.stats.cells
        )
    };
    write_out(None, &out)
}

fn sweep_json(sweep: &Sweep, h: &[String]) -> serde_json::Value {
    json!({
        "provenance": h,
        "params": sweep.params,
        "seed": sweep.seed,
        "summary": sweep.summary,
        "candidate_slope": sweep.candidate_slope,
        "interval_slope": sweep.interval_slope,
        "full_time_slope": sweep.full_time_slope,
        "sparse_time_slope": sweep.sparse_time_slope,
    })
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let r = a.params.resolve()?;
    if a.lengths.is_empty() || a.trials == 0 {
        return Err(CliError::Usage("need at least one length and one trial".into()));
    }
    let sweep = count_candidates_sweep(
        &a.lengths,
        a.trials,
        &r.params,
        FoldOptions::default(),
        a.seed,
        Execution::default(),
    )?;
    let h = header(
        "bench",
        &r,
        &[
            ("lengths", format!("{:?}", a.lengths)),
            ("trials", a.trials.to_string()),
            ("seed", a.seed.to_string()),
        ],
    );
    write_out(a.out.as_deref(), &sweep.to_csv(&h, !a.no_timing))?;
    if let Some(path) = &a.fits {
        write_out(Some(path), &to_json(&sweep_json(&sweep, &h)))?;
    }
    Ok(())
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] + v[m]) as f64 / 2.0
    }
}

fn cmd_tree(a: TreeArgs) -> CliResult {
    if let Some(db) = &a.structure {
        let s: SecondaryStructure = SecondaryStructure::parse_dot_bracket(db.trim())?;
        let tree = s.to_tree();
        let out = if a.json {
            let mut j = tree.to_json();
            j.push('\n');
            j
        } else {
            let st = tree.stats();
            format!("# nodes={} roots={} depth={}\n{}", st.nodes, st.roots, st.depth, tree.to_text())
        };
        return write_out(None, &out);
    }
    let n = a.sample.expect("clap requires one input");
    if a.count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    let r = a.params.resolve()?;
    let batch = Sampler::new(&r.params, n).sample(n, a.count, a.seed, true, Execution::default());
    let stats: Vec<_> = batch
        .structures
        .as_ref()
        .expect("structures kept")
        .iter()
        .map(|s| s.to_tree().stats())
        .collect();
    let h = header(
        "tree",
        &r,
        &[("n", n.to_string()), ("count", a.count.to_string()), ("seed", a.seed.to_string())],
    );
    let out = json!({
        "provenance": h,
        "params": r.params,
        "seed": a.seed,
        "n": n,
        "count": a.count,
        "median_nodes": median(stats.iter().map(|s| s.nodes).collect()),
        "median_roots": median(stats.iter().map(|s| s.roots).collect()),
        "median_depth": median(stats.iter().map(|s| s.depth).collect()),
    });
    write_out(None, &to_json(&out))
}
