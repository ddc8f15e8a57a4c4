//! Monte-Carlo harness for the evaluability and estimability definitions.
//!
//! Every trial derives its own seeds from `(master_seed, trial index)`, runs
//! independently on the rayon pool, and is aggregated in trial order, so a
//! report depends only on its config and never on the number of workers.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    coverage_profile, ensure_same_domain, hellinger_sq, kl, renyi, restricted_kl, sample, tv, DiscreteDistribution,
    Domain,
};
use crate::error::{Error, Result};
use crate::float_serde;
use crate::scores::{fixed_test_metric, scheffe_select, ScoreSpec, TestFunction};
use crate::test_families::{all_binary_family, ipm_exact, FunctionFamily};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Two-sided 95% normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

/// A metric `f(q, q*)`; smaller is better, `q*` is the ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    Tv,
    /// `KL(q* ‖ q)`.
    Kl,
    /// `D_α(q* ‖ q)`.
    Renyi { alpha: f64 },
    #[serde(rename = "hellinger2")]
    Hellinger2,
    /// Coverage profile of `q` w.r.t. `q*` at ratio `n`.
    Coverage { n: f64 },
    /// β-restricted `KL(q* ‖ q)`.
    RestrictedKl { beta: f64 },
    Ipm { family: FunctionFamily },
    FixedTest { g: TestFunction },
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Tv => "tv",
            Metric::Kl => "kl",
            Metric::Renyi { .. } => "renyi",
            Metric::Hellinger2 => "hellinger2",
            Metric::Coverage { .. } => "coverage",
            Metric::RestrictedKl { .. } => "restricted_kl",
            Metric::Ipm { .. } => "ipm",
            Metric::FixedTest { .. } => "fixed_test",
        }
    }

    pub fn evaluate(&self, q: &DiscreteDistribution, qstar: &DiscreteDistribution) -> Result<f64> {
        match self {
            Metric::Tv => tv(q, qstar),
            Metric::Kl => kl(qstar, q),
            Metric::Renyi { alpha } => renyi(qstar, q, *alpha),
            Metric::Hellinger2 => hellinger_sq(q, qstar),
            Metric::Coverage { n } => coverage_profile(q, qstar, *n),
            Metric::RestrictedKl { beta } => restricted_kl(qstar, q, *beta),
            Metric::Ipm { family } => Ok(ipm_exact(q, qstar, family)?.value),
            Metric::FixedTest { g } => fixed_test_metric(q, qstar, g),
        }
    }
}

/// How the ground truth is chosen for each trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruthSelector {
    Fixed { distribution: DiscreteDistribution },
    /// Re-drawn uniformly every trial.
    UniformOver { distributions: Vec<DiscreteDistribution> },
}

impl GroundTruthSelector {
    pub fn members(&self) -> &[DiscreteDistribution] {
        match self {
            GroundTruthSelector::Fixed { distribution } => std::slice::from_ref(distribution),
            GroundTruthSelector::UniformOver { distributions } => distributions,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            GroundTruthSelector::Fixed { .. } => 0,
            GroundTruthSelector::UniformOver { distributions } => rng.random_range(0..distributions.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub schema_version: u32,
    pub q1: DiscreteDistribution,
    pub q2: DiscreteDistribution,
    pub selector: GroundTruthSelector,
    pub metric: Metric,
    pub score: ScoreSpec,
    pub m: usize,
    pub trials: usize,
    pub c: f64,
    pub eps: f64,
    pub master_seed: u64,
}

impl TrialConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        q1: DiscreteDistribution,
        q2: DiscreteDistribution,
        selector: GroundTruthSelector,
        metric: Metric,
        score: ScoreSpec,
        m: usize,
        trials: usize,
        c: f64,
        eps: f64,
        master_seed: u64,
    ) -> Self {
        TrialConfig { schema_version: REPORT_SCHEMA_VERSION, q1, q2, selector, metric, score, m, trials, c, eps, master_seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.trials == 0 {
            return Err(Error::InvalidParameters("m and trials must be at least 1".into()));
        }
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameters(format!("c must be >= 1, got {}", self.c)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameters(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if self.selector.members().is_empty() {
            return Err(Error::InvalidParameters("ground-truth selector is empty".into()));
        }
        ensure_same_domain(self.q1.domain(), self.q2.domain())?;
        for qstar in self.selector.members() {
            ensure_same_domain(self.q1.domain(), qstar.domain())?;
        }
        Ok(())
    }
}

/// A Bernoulli rate with its Wilson 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub count: usize,
    pub trials: usize,
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl RateEstimate {
    pub fn new(count: usize, trials: usize) -> Self {
        let (lower, upper) = wilson_interval(count, trials);
        let rate = if trials == 0 { 0.0 } else { count as f64 / trials as f64 };
        RateEstimate { count, trials, rate, lower, upper }
    }
}

/// Wilson score interval at 95% confidence. Returns `(0, 1)` for zero
/// trials.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    /// Mean over finite values; `inf` when every value is infinite.
    #[serde(with = "float_serde")]
    pub mean: f64,
    #[serde(with = "float_serde")]
    pub min: f64,
    #[serde(with = "float_serde")]
    pub max: f64,
    pub infinite_count: usize,
}

impl ScoreSummary {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut sum = 0.0;
        let mut finite = 0usize;
        let mut infinite_count = 0usize;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            min = min.min(v);
            max = max.max(v);
            if v.is_finite() {
                sum += v;
                finite += 1;
            } else {
                infinite_count += 1;
            }
        }
        let mean = if finite == 0 { f64::INFINITY } else { sum / finite as f64 };
        ScoreSummary { mean, min, max, infinite_count }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthMetrics {
    pub index: usize,
    pub draws: usize,
    #[serde(with = "float_serde")]
    pub metric_q1: f64,
    #[serde(with = "float_serde")]
    pub metric_q2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub schema_version: u32,
    pub trials: usize,
    /// The score prefers a candidate (strictly smaller score, ties to `q1`)
    /// whose metric exceeds `c` times the other's plus `eps`.
    pub implication_failure_rate: RateEstimate,
    /// Score and metric both strictly prefer, and disagree.
    pub misrank_rate: RateEstimate,
    pub tie_rate: RateEstimate,
    /// `s(q1, S) ≤ s(q2, S)`.
    pub first_preferred_rate: RateEstimate,
    pub ground_truths: Vec<GroundTruthMetrics>,
    pub score_q1: ScoreSummary,
    pub score_q2: ScoreSummary,
    pub config: TrialConfig,
}

/// One CSV row per trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub ground_truth: usize,
    #[serde(with = "float_serde")]
    pub score_q1: f64,
    #[serde(with = "float_serde")]
    pub score_q2: f64,
    #[serde(with = "float_serde")]
    pub metric_q1: f64,
    #[serde(with = "float_serde")]
    pub metric_q2: f64,
    pub failure: bool,
    pub misrank: bool,
    pub tie: bool,
}

const TRUTH_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;
const EXTRA_STREAM: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless per-trial seed.
pub fn trial_seed(master_seed: u64, trial: usize, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ trial as u64) ^ stream)
}

fn trial_rng(master_seed: u64, trial: usize, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(master_seed, trial, stream))
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameters(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// `(pref, other)` decision rule shared by every trial.
fn judge(s1: f64, s2: f64, f1: f64, f2: f64, c: f64, eps: f64) -> (bool, bool, bool) {
    let tie = s1 == s2;
    let (f_pref, f_other) = if s1 <= s2 { (f1, f2) } else { (f2, f1) };
    let failure = f_pref > c * f_other + eps;
    let misrank = (s1 < s2 && f1 > f2) || (s2 < s1 && f2 > f1);
    (failure, misrank, tie)
}

pub fn run_trials(config: &TrialConfig) -> Result<TrialReport> {
    Ok(run_trials_detailed(config)?.0)
}

pub fn run_trials_with_workers(config: &TrialConfig, workers: usize) -> Result<TrialReport> {
    with_workers(workers, || run_trials(config))?
}

/// Like [`run_trials`] but also returns the per-trial rows.
pub fn run_trials_detailed(config: &TrialConfig) -> Result<(TrialReport, Vec<TrialRow>)> {
    config.validate()?;
    let members = config.selector.members();
    let metric_table: Vec<(f64, f64)> = members
        .iter()
        .map(|qstar| Ok((config.metric.evaluate(&config.q1, qstar)?, config.metric.evaluate(&config.q2, qstar)?)))
        .collect::<Result<_>>()?;

    let rows: Vec<TrialRow> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let truth = config.selector.draw(&mut trial_rng(config.master_seed, t, TRUTH_STREAM));
            let mut rng = trial_rng(config.master_seed, t, SAMPLE_STREAM);
            let s = crate::distributions::sample_with(&members[truth], config.m, &mut rng)?;
            let (s1, s2) = config.score.score_pair(&config.q1, &config.q2, &s)?;
            let (f1, f2) = metric_table[truth];
            let (failure, misrank, tie) = judge(s1, s2, f1, f2, config.c, config.eps);
            Ok(TrialRow {
                trial: t,
                ground_truth: truth,
                score_q1: s1,
                score_q2: s2,
                metric_q1: f1,
                metric_q2: f2,
                failure,
                misrank,
                tie,
            })
        })
        .collect::<Result<_>>()?;

    let n = rows.len();
    let count = |pred: fn(&TrialRow) -> bool| rows.iter().filter(|r| pred(r)).count();
    let mut draws = vec![0usize; members.len()];
    for row in &rows {
        draws[row.ground_truth] += 1;
    }
    let report = TrialReport {
        schema_version: REPORT_SCHEMA_VERSION,
        trials: n,
        implication_failure_rate: RateEstimate::new(count(|r| r.failure), n),
        misrank_rate: RateEstimate::new(count(|r| r.misrank), n),
        tie_rate: RateEstimate::new(count(|r| r.tie), n),
        first_preferred_rate: RateEstimate::new(count(|r| r.score_q1 <= r.score_q2), n),
        ground_truths: metric_table
            .iter()
            .enumerate()
            .map(|(index, &(metric_q1, metric_q2))| GroundTruthMetrics { index, draws: draws[index], metric_q1, metric_q2 })
            .collect(),
        score_q1: ScoreSummary::from_values(rows.iter().map(|r| r.score_q1)),
        score_q2: ScoreSummary::from_values(rows.iter().map(|r| r.score_q2)),
        config: config.clone(),
    };
    Ok((report, rows))
}

pub fn write_trial_csv<W: Write>(rows: &[TrialRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row).map_err(|e| Error::InvalidParameters(format!("csv write failed: {e}")))?;
    }
    w.flush().map_err(|e| Error::InvalidParameters(format!("csv write failed: {e}")))?;
    Ok(())
}

pub fn read_trial_csv<R: Read>(reader: R) -> Result<Vec<TrialRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|row| row.map_err(|e| Error::InvalidParameters(format!("csv read failed: {e}"))))
        .collect()
}

/// Fraction of trials where the score strictly prefers the candidate with
/// the strictly larger metric value.
#[allow(clippy::too_many_arguments)]
pub fn estimate_misranking(
    q1: &DiscreteDistribution,
    q2: &DiscreteDistribution,
    selector: &GroundTruthSelector,
    metric: &Metric,
    score: &ScoreSpec,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<RateEstimate> {
    let config = TrialConfig::new(
        q1.clone(),
        q2.clone(),
        selector.clone(),
        metric.clone(),
        score.clone(),
        m,
        trials,
        1.0,
        0.5,
        seed,
    );
    Ok(run_trials(&config)?.misrank_rate)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimabilityReport {
    #[serde(with = "float_serde")]
    pub metric_value: f64,
    #[serde(with = "float_serde")]
    pub eps: f64,
    /// Fraction of trials with `|s(q, S) − f(q, q*)| > eps`.
    pub exceedance: RateEstimate,
    #[serde(with = "float_serde")]
    pub mean_abs_deviation: f64,
    #[serde(with = "float_serde")]
    pub max_abs_deviation: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn check_estimability(
    metric: &Metric,
    score: &ScoreSpec,
    qstar: &DiscreteDistribution,
    q: &DiscreteDistribution,
    m: usize,
    trials: usize,
    eps: f64,
    seed: u64,
) -> Result<EstimabilityReport> {
    if m == 0 || trials == 0 {
        return Err(Error::InvalidParameters("m and trials must be at least 1".into()));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidParameters(format!("eps must be positive, got {eps}")));
    }
    ensure_same_domain(q.domain(), qstar.domain())?;
    let metric_value = metric.evaluate(q, qstar)?;
    let deviations: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t, SAMPLE_STREAM);
            let s = crate::distributions::sample_with(qstar, m, &mut rng)?;
            let value = score.score(q, &s)?;
            Ok(if value == metric_value { 0.0 } else { (value - metric_value).abs() })
        })
        .collect::<Result<_>>()?;
    let exceed = deviations.iter().filter(|&&d| d.is_nan() || d > eps).count();
    let finite: Vec<f64> = deviations.iter().copied().filter(|d| d.is_finite()).collect();
    let mean_abs_deviation = if finite.len() == deviations.len() {
        finite.iter().sum::<f64>() / finite.len() as f64
    } else {
        f64::INFINITY
    };
    Ok(EstimabilityReport {
        metric_value,
        eps,
        exceedance: RateEstimate::new(exceed, trials),
        mean_abs_deviation,
        max_abs_deviation: deviations.iter().copied().fold(0.0, f64::max),
    })
}

/// What a sample-complexity sweep measures at each `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeTarget {
    /// Deviation exceedance of `score` against `metric`.
    Estimability {
        metric: Metric,
        score: ScoreSpec,
        qstar: DiscreteDistribution,
        q: DiscreteDistribution,
        eps: f64,
    },
    /// Implication failure rate of a trial config; its `m` is overridden by
    /// the grid.
    Evaluability { config: TrialConfig },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub m: usize,
    pub failure: RateEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub schema_version: u32,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Smallest grid entry whose empirical failure rate is at most `delta`.
    pub m_star: Option<usize>,
    pub sweep: Vec<ProbePoint>,
}

pub fn sample_complexity_probe(
    target: &ProbeTarget,
    delta: f64,
    m_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if m_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if m_grid.windows(2).any(|w| w[0] >= w[1]) || m_grid[0] == 0 {
        return Err(Error::InvalidParameters("m grid must be positive and strictly ascending".into()));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameters(format!("delta must lie in [0, 1], got {delta}")));
    }
    let sweep = m_grid
        .iter()
        .map(|&m| {
            let failure = match target {
                ProbeTarget::Estimability { metric, score, qstar, q, eps } => {
                    check_estimability(metric, score, qstar, q, m, trials, *eps, seed)?.exceedance
                }
                ProbeTarget::Evaluability { config } => {
                    let config = TrialConfig { m, trials, master_seed: seed, ..config.clone() };
                    run_trials(&config)?.implication_failure_rate
                }
            };
            Ok(ProbePoint { m, failure })
        })
        .collect::<Result<Vec<_>>>()?;
    let m_star = sweep.iter().find(|p| p.failure.rate <= delta).map(|p| p.m);
    Ok(ProbeReport { schema_version: REPORT_SCHEMA_VERSION, delta, trials, seed, m_star, sweep })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreLawDistance {
    /// Largest gap between the two empirical score CDFs.
    pub estimate: f64,
    /// `min(1, m · tv(p1, p2))`.
    pub analytic_bound: f64,
    /// `2 √(ln(4/0.05) / (2T))`.
    pub slack: f64,
    pub within_bound: bool,
}

/// Compares the law of `s(q, S)` under `S ~ p1^m` and `S ~ p2^m`.
pub fn score_distribution_distance(
    score: &ScoreSpec,
    q: &DiscreteDistribution,
    p1: &DiscreteDistribution,
    p2: &DiscreteDistribution,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<ScoreLawDistance> {
    if m == 0 || trials == 0 {
        return Err(Error::InvalidParameters("m and trials must be at least 1".into()));
    }
    ensure_same_domain(q.domain(), p1.domain())?;
    ensure_same_domain(q.domain(), p2.domain())?;
    let draw = |p: &DiscreteDistribution, stream: u64| -> Result<Vec<f64>> {
        let mut values = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(seed, t, stream);
                score.score(q, &crate::distributions::sample_with(p, m, &mut rng)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        values.sort_by(f64::total_cmp);
        Ok(values)
    };
    let a = draw(p1, SAMPLE_STREAM)?;
    let b = draw(p2, EXTRA_STREAM)?;
    let estimate = ks_distance(&a, &b);
    let analytic_bound = (m as f64 * tv(p1, p2)?).min(1.0);
    let slack = 2.0 * ((4.0f64 / 0.05).ln() / (2.0 * trials as f64)).sqrt();
    Ok(ScoreLawDistance { estimate, analytic_bound, slack, within_bound: estimate <= analytic_bound + slack })
}

/// Sup-distance between the empirical CDFs of two sorted samples.
fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => if x.total_cmp(&y).is_le() { x } else { y },
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i].total_cmp(&next).is_le() {
            i += 1;
        }
        while j < b.len() && b[j].total_cmp(&next).is_le() {
            j += 1;
        }
        best = best.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    best
}

/// A draw from the flat Dirichlet on `domain`.
pub fn random_distribution<R: Rng + ?Sized>(domain: &Domain, rng: &mut R) -> Result<DiscreteDistribution> {
    let raw: Vec<f64> = (0..domain.len()).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    DiscreteDistribution::with_domain(domain.clone(), raw.into_iter().map(|x| x / total).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheffeGuaranteeReport {
    pub points: usize,
    pub m: usize,
    pub c: f64,
    pub eps: f64,
    pub seed: u64,
    /// Trials where the winner `ĥ` satisfies
    /// `d_F(ĥ, q*) ≤ c · min_i d_F(q_i, q*) + eps`.
    pub success: RateEstimate,
}

/// Per trial draws fresh `q*, q1, q2` from the flat Dirichlet on `points`
/// labels, runs the Scheffé test with the all-binary family on `m` samples,
/// and checks the weak-evaluability guarantee.
pub fn scheffe_guarantee(points: usize, m: usize, trials: usize, c: f64, eps: f64, seed: u64) -> Result<ScheffeGuaranteeReport> {
    if m == 0 || trials == 0 {
        return Err(Error::InvalidParameters("m and trials must be at least 1".into()));
    }
    let domain = Domain::indexed(points)?;
    let family = all_binary_family(domain.clone())?;
    let flags: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t, TRUTH_STREAM);
            let qstar = random_distribution(&domain, &mut rng)?;
            let q1 = random_distribution(&domain, &mut rng)?;
            let q2 = random_distribution(&domain, &mut rng)?;
            let s = sample(&qstar, m, trial_seed(seed, t, SAMPLE_STREAM))?;
            let winner = scheffe_select(&q1, &q2, &s, &family)?.pick(&q1, &q2).clone();
            let d_win = ipm_exact(&winner, &qstar, &family)?.value;
            let d_best = ipm_exact(&q1, &qstar, &family)?.value.min(ipm_exact(&q2, &qstar, &family)?.value);
            Ok(d_win <= c * d_best + eps)
        })
        .collect::<Result<_>>()?;
    Ok(ScheffeGuaranteeReport {
        points,
        m,
        c,
        eps,
        seed,
        success: RateEstimate::new(flags.iter().filter(|&&ok| ok).count(), trials),
    })
}
