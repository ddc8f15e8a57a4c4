//! `evalab` command-line front end.

mod output;
mod resolve;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use evalab::constructions::{build, Recipe};
use evalab::distributions::{coverage_profile, hellinger_sq, kl, renyi, restricted_kl, tv};
use evalab::experiments::{
    run_trials_detailed, sample_complexity_probe, with_workers, write_trial_csv, ProbeTarget, TrialConfig,
};
use evalab::scores::{fixed_test_metric, ScoreSpec};
use evalab::test_families::{fat_shattering_dim, ipm_exact, vc_dimension};
use serde_json::Value;

use crate::output::{format_significant, write_json, Manifest, SeedSource};
use crate::resolve::{load_distribution, load_family, load_json, load_sample, load_test_function, read_text, Resolver};

pub const SEED_ENV: &str = "EVALAB_SEED";

#[derive(Debug)]
pub enum CliError {
    /// Malformed input or configuration (exit 2).
    Input(String),
    /// A library error; exit 3 when it is a size cap, 2 otherwise.
    Library(evalab::Error),
    Io(String),
}

impl From<evalab::Error> for CliError {
    fn from(e: evalab::Error) -> Self {
        CliError::Library(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Library(e) if e.is_infeasible() => 3,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Io(msg) => f.write_str(msg),
            CliError::Library(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "evalab", version, about = "Evaluability experiments for generative-model metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricKind {
    Tv,
    Kl,
    Renyi,
    Hellinger2,
    Coverage,
    Rkl,
    Ipm,
    Fixed,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a metric between two distributions. `p` plays the ground
    /// truth: kl, renyi and rkl are computed as D(p || q), coverage as the
    /// coverage profile of q with respect to p.
    Metric {
        #[arg(long, value_enum)]
        kind: MetricKind,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        n: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
        /// Family file or built-in name (e.g. all_binary_4).
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        g: Option<PathBuf>,
    },
    /// Score a model on a sample. With `--q2` both candidates are scored
    /// (required for the Scheffé score).
    Score {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        q2: Option<PathBuf>,
        #[arg(long)]
        sample: PathBuf,
    },
    /// VC dimension (binary families) and fat-shattering dimension.
    Dims {
        /// Family file or built-in name (e.g. all_binary_4).
        #[arg(long)]
        family: String,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Build an adversarial construction bundle.
    Construct {
        #[arg(long)]
        recipe: String,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an evaluability experiment.
    Trial {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_report: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep sample sizes for an estimability or evaluability target.
    Probe {
        #[arg(long)]
        config: PathBuf,
        /// Comma- or space-separated ascending sample sizes.
        #[arg(long)]
        m_grid: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Metric { kind, alpha, n, beta, p, q, family, g } => {
            let value = cmd_metric(kind, alpha, n, beta, &p, &q, family.as_deref(), g.as_deref())?;
            println!("{}", format_significant(value));
            Ok(())
        }
        Command::Score { spec, q, q2, sample } => cmd_score(&spec, &q, q2.as_deref(), &sample),
        Command::Dims { family, gamma } => cmd_dims(&family, gamma),
        Command::Construct { recipe, params, out } => cmd_construct(&recipe, &params, &out),
        Command::Trial { config, out_report, out_csv, threads, seed } => {
            cmd_trial(&config, &out_report, &out_csv, threads, seed)
        }
        Command::Probe { config, m_grid, out, threads, seed } => cmd_probe(&config, &m_grid, &out, threads, seed),
    }
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Input(format!("this metric needs --{flag}")))
}

#[allow(clippy::too_many_arguments)]
fn cmd_metric(
    kind: MetricKind,
    alpha: Option<f64>,
    n: Option<f64>,
    beta: Option<f64>,
    p: &Path,
    q: &Path,
    family: Option<&str>,
    g: Option<&Path>,
) -> Result<f64, CliError> {
    let p = load_distribution(p)?;
    let q = load_distribution(q)?;
    Ok(match kind {
        MetricKind::Tv => tv(&p, &q)?,
        MetricKind::Kl => kl(&p, &q)?,
        MetricKind::Renyi => renyi(&p, &q, need(alpha, "alpha")?)?,
        MetricKind::Hellinger2 => hellinger_sq(&p, &q)?,
        MetricKind::Coverage => coverage_profile(&q, &p, need(n, "n")?)?,
        MetricKind::Rkl => restricted_kl(&p, &q, need(beta, "beta")?)?,
        MetricKind::Ipm => {
            let family = load_family(need(family, "family")?, Path::new(""))?;
            ipm_exact(&p, &q, &family)?.value
        }
        MetricKind::Fixed => fixed_test_metric(&p, &q, &load_test_function(need(g, "g")?)?)?,
    })
}

fn cmd_score(spec: &Path, q: &Path, q2: Option<&Path>, sample: &Path) -> Result<(), CliError> {
    let doc: Value = load_json(spec, "score spec")?;
    let mut resolver = Resolver::new(spec, &Value::Null)?;
    let resolved = resolver.trial_config(&serde_json::json!({ "score": doc }))?;
    let spec: ScoreSpec = Resolver::finish(resolved["score"].clone(), "score spec")?;
    let q = load_distribution(q)?;
    let sample = load_sample(sample, q.domain())?;
    match q2 {
        Some(q2) => {
            let q2 = load_distribution(q2)?;
            let (a, b) = spec.score_pair(&q, &q2, &sample)?;
            println!("{}\n{}", format_significant(a), format_significant(b));
        }
        None => println!("{}", format_significant(spec.score(&q, &sample)?)),
    }
    Ok(())
}

fn cmd_dims(family: &str, gamma: Option<f64>) -> Result<(), CliError> {
    let family = load_family(family, Path::new(""))?;
    if !family.is_binary() && gamma.is_none() {
        return Err(CliError::Input("family is not binary; pass --gamma for the fat-shattering dimension".into()));
    }
    if family.is_binary() {
        println!("vc={}", vc_dimension(&family)?);
    }
    if let Some(gamma) = gamma {
        println!("fat={}", fat_shattering_dim(&family, gamma)?);
    }
    Ok(())
}

fn cmd_construct(recipe: &str, params_path: &Path, out: &Path) -> Result<(), CliError> {
    let recipe: Recipe = recipe.parse()?;
    let params: BTreeMap<String, f64> = load_json(params_path, "parameter table")?;
    let bundle = build(recipe, &params)?;
    let checks = bundle.verify()?;
    write_json(out, &bundle)?;
    for check in &checks {
        println!(
            "{} [{}] computed {}",
            check.description,
            if check.holds { "ok" } else { "FAILED" },
            format_significant(check.computed)
        );
    }
    let mut manifest = Manifest::new("construct");
    manifest.inputs.push(params_path.to_path_buf());
    manifest.parameters = serde_json::to_value(&bundle.parameters).expect("parameters serialize");
    manifest.outputs.push(out.to_path_buf());
    manifest.write_next_to(out)?;
    if checks.iter().all(|c| c.holds) {
        Ok(())
    } else {
        Err(CliError::Input("bundle facts do not hold".into()))
    }
}

/// `--seed` beats `EVALAB_SEED`, which beats the config's own seed.
fn resolve_seed(flag: Option<u64>, config_seed: Option<u64>, manifest: &mut Manifest) -> Result<u64, CliError> {
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(text) => Some(
            text.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Input(format!("{SEED_ENV} must be an unsigned integer, got `{text}`")))?,
        ),
        Err(_) => None,
    };
    manifest.flag_seed = flag;
    manifest.env_seed = env_seed;
    let (seed, source) = match (flag, env_seed, config_seed) {
        (Some(s), _, _) => (s, SeedSource::Flag),
        (None, Some(s), _) => (s, SeedSource::Env),
        (None, None, Some(s)) => (s, SeedSource::Config),
        (None, None, None) => return Err(CliError::Input("no seed: set master_seed, --seed or EVALAB_SEED".into())),
    };
    manifest.master_seed = Some(seed);
    manifest.seed_source = Some(source);
    Ok(seed)
}

fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    match threads {
        Some(0) => Err(CliError::Input("--threads must be at least 1".into())),
        Some(n) => Ok(with_workers(n, f)?),
        None => Ok(f()),
    }
}

fn cmd_trial(
    config_path: &Path,
    out_report: &Path,
    out_csv: &Path,
    threads: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let doc: Value = resolve::parse_json(&read_text(config_path)?, "trial config")?;
    let mut manifest = Manifest::new("trial");
    let config_seed = doc.get("master_seed").and_then(Value::as_u64);
    let master_seed = resolve_seed(seed, config_seed, &mut manifest)?;
    let mut resolver = Resolver::new(config_path, &doc)?;
    let mut resolved = resolver.trial_config(&doc)?;
    resolved["master_seed"] = Value::from(master_seed);
    let config: TrialConfig = Resolver::finish(resolved, "trial config")?;
    config.validate()?;

    let (report, rows) = in_pool(threads, || run_trials_detailed(&config))??;
    write_json(out_report, &report)?;
    let file = std::fs::File::create(out_csv)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", out_csv.display())))?;
    write_trial_csv(&rows, file)?;
    println!(
        "implication_failure_rate={} misrank_rate={} tie_rate={}",
        format_significant(report.implication_failure_rate.rate),
        format_significant(report.misrank_rate.rate),
        format_significant(report.tie_rate.rate)
    );

    manifest.inputs = resolver.inputs;
    manifest.threads = threads;
    manifest.parameters = serde_json::json!({
        "m": config.m,
        "trials": config.trials,
        "c": config.c,
        "eps": config.eps,
        "metric": config.metric.name(),
        "score": config.score.name(),
    });
    manifest.outputs = vec![out_report.to_path_buf(), out_csv.to_path_buf()];
    manifest.write_next_to(out_report)?;
    manifest.write_next_to(out_csv)?;
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| CliError::Input(format!("bad grid entry `{s}`"))))
        .collect()
}

fn cmd_probe(
    config_path: &Path,
    m_grid: &str,
    out: &Path,
    threads: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let doc: Value = resolve::parse_json(&read_text(config_path)?, "probe config")?;
    let mut manifest = Manifest::new("probe");
    let seed = resolve_seed(seed, doc.get("seed").and_then(Value::as_u64), &mut manifest)?;
    let delta = doc
        .get("delta")
        .and_then(Value::as_f64)
        .ok_or_else(|| CliError::Input("probe config needs a numeric `delta`".into()))?;
    let trials = doc
        .get("trials")
        .and_then(Value::as_u64)
        .ok_or_else(|| CliError::Input("probe config needs an integer `trials`".into()))? as usize;
    let target = doc.get("target").ok_or_else(|| CliError::Input("probe config needs a `target`".into()))?;
    let mut resolver = Resolver::new(config_path, &doc)?;
    let target: ProbeTarget = Resolver::finish(resolver.probe_target(target)?, "probe target")?;
    let grid = parse_grid(m_grid)?;

    let report = in_pool(threads, || sample_complexity_probe(&target, delta, &grid, trials, seed))??;
    write_json(out, &report)?;
    match report.m_star {
        Some(m) => println!("m_star={m}"),
        None => println!("m_star=none"),
    }

    manifest.inputs = resolver.inputs;
    manifest.threads = threads;
    manifest.parameters = serde_json::json!({ "delta": delta, "trials": trials, "m_grid": grid });
    manifest.outputs = vec![out.to_path_buf()];
    manifest.write_next_to(out)?;
    Ok(())
}
