//! Score functions `s(q, S_eval)`: quantities computable from a model and a
//! finite evaluation sample.

use serde::{Deserialize, Serialize};

use crate::distributions::ratio_at_least;
use crate::distributions::{empirical_distribution, ensure_same_domain, Dataset, DiscreteDistribution, Domain};
use crate::error::{Error, Result};
use crate::test_families::{ipm_exact, FunctionFamily};

/// A real-valued test `g` over the domain; values may be arbitrarily large.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TestFunctionRepr", try_from = "TestFunctionRepr")]
pub struct TestFunction {
    domain: Domain,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TestFunctionRepr {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl From<TestFunction> for TestFunctionRepr {
    fn from(g: TestFunction) -> Self {
        TestFunctionRepr { labels: g.domain.labels().to_vec(), values: g.values }
    }
}

impl TryFrom<TestFunctionRepr> for TestFunction {
    type Error = Error;

    fn try_from(repr: TestFunctionRepr) -> Result<Self> {
        if repr.labels.len() != repr.values.len() {
            return Err(Error::LengthMismatch { labels: repr.labels.len(), values: repr.values.len() });
        }
        TestFunction::new(Domain::new(repr.labels)?, repr.values)
    }
}

impl TestFunction {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self> {
        if domain.len() != values.len() {
            return Err(Error::LengthMismatch { labels: domain.len(), values: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(TestFunction { domain, values })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max |g(x)|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Which score function to apply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreSpec {
    Nll,
    Perplexity,
    EmpiricalIpm { family: FunctionFamily },
    ScheffeIpm { family: FunctionFamily },
    Coverage { n: f64 },
    FixedTest { g: TestFunction },
}

impl ScoreSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ScoreSpec::Nll => "nll",
            ScoreSpec::Perplexity => "perplexity",
            ScoreSpec::EmpiricalIpm { .. } => "empirical_ipm",
            ScoreSpec::ScheffeIpm { .. } => "scheffe_ipm",
            ScoreSpec::Coverage { .. } => "coverage",
            ScoreSpec::FixedTest { .. } => "fixed_test",
        }
    }

    /// Scores a single model. The Scheffé score is defined relative to a
    /// candidate pair and is only available through [`ScoreSpec::score_pair`].
    pub fn score(&self, q: &DiscreteDistribution, sample: &Dataset) -> Result<f64> {
        match self {
            ScoreSpec::Nll => nll_score(q, sample),
            ScoreSpec::Perplexity => perplexity(q, sample),
            ScoreSpec::EmpiricalIpm { family } => empirical_ipm_score(q, sample, family),
            ScoreSpec::ScheffeIpm { .. } => {
                Err(Error::InvalidParameters("the Scheffé score needs a candidate pair".into()))
            }
            ScoreSpec::Coverage { n } => coverage_score(q, sample, *n),
            ScoreSpec::FixedTest { g } => fixed_test_score(q, sample, g),
        }
    }

    pub fn score_pair(&self, q1: &DiscreteDistribution, q2: &DiscreteDistribution, sample: &Dataset) -> Result<(f64, f64)> {
        match self {
            ScoreSpec::ScheffeIpm { family } => scheffe_scores(q1, q2, sample, family),
            _ => Ok((self.score(q1, sample)?, self.score(q2, sample)?)),
        }
    }
}

fn counts_over(sample: &Dataset, domain: &Domain) -> Result<Vec<usize>> {
    if sample.domain() == domain {
        return Ok(sample.counts());
    }
    let mut counts = vec![0; domain.len()];
    for label in sample.labels() {
        let i = domain.index_of(label).ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        counts[i] += 1;
    }
    Ok(counts)
}

/// `nll(q, S) = −(1/m) Σ ln q(x_i)`; `+inf` if any sample point has zero
/// likelihood.
pub fn nll_score(q: &DiscreteDistribution, sample: &Dataset) -> Result<f64> {
    let counts = counts_over(sample, q.domain())?;
    let mut total = 0.0;
    for (&c, &p) in counts.iter().zip(q.probs()) {
        if c == 0 {
            continue;
        }
        if p == 0.0 {
            return Ok(f64::INFINITY);
        }
        total -= c as f64 * p.ln();
    }
    Ok(total / sample.len() as f64)
}

/// `exp(nll)`. Same ordering of models as base-2 perplexity.
pub fn perplexity(q: &DiscreteDistribution, sample: &Dataset) -> Result<f64> {
    nll_score(q, sample).map(f64::exp)
}

/// `d_F(q, q̂)` against the empirical distribution of the sample.
pub fn empirical_ipm_score(q: &DiscreteDistribution, sample: &Dataset, family: &FunctionFamily) -> Result<f64> {
    ensure_same_domain(q.domain(), sample.domain())?;
    let empirical = empirical_distribution(sample, q.domain())?;
    Ok(ipm_exact(q, &empirical, family)?.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    First,
    Second,
}

/// Result of the two-candidate minimum-distance test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheffeOutcome {
    pub winner: Candidate,
    /// Row of the family separating the two candidates best.
    pub witness_index: usize,
    pub empirical_mean: f64,
    pub first_gap: f64,
    pub second_gap: f64,
}

impl ScheffeOutcome {
    pub fn pick<'a>(&self, q1: &'a DiscreteDistribution, q2: &'a DiscreteDistribution) -> &'a DiscreteDistribution {
        match self.winner {
            Candidate::First => q1,
            Candidate::Second => q2,
        }
    }
}

/// Scheffé selection: take the member `φ*` of `F` that witnesses
/// `d_F(q1, q2)` and keep the candidate whose mean of `φ*` is closer to the
/// sample mean of `φ*`. Ties go to `q1`.
pub fn scheffe_select(
    q1: &DiscreteDistribution,
    q2: &DiscreteDistribution,
    sample: &Dataset,
    family: &FunctionFamily,
) -> Result<ScheffeOutcome> {
    ensure_same_domain(q1.domain(), sample.domain())?;
    let witness_index = ipm_exact(q1, q2, family)?.witness_index;
    let phi = family.row(witness_index);
    let empirical_mean = sample.points().iter().map(|&i| phi[i]).sum::<f64>() / sample.len() as f64;
    let first_gap = (q1.expectation(phi) - empirical_mean).abs();
    let second_gap = (q2.expectation(phi) - empirical_mean).abs();
    let winner = if first_gap <= second_gap { Candidate::First } else { Candidate::Second };
    Ok(ScheffeOutcome { winner, witness_index, empirical_mean, first_gap, second_gap })
}

/// `d_F(ĥ, q)` where `ĥ` is the Scheffé winner of the pair.
pub fn scheffe_score(
    q: &DiscreteDistribution,
    q1: &DiscreteDistribution,
    q2: &DiscreteDistribution,
    sample: &Dataset,
    family: &FunctionFamily,
) -> Result<f64> {
    if q != q1 && q != q2 {
        return Err(Error::CandidateNotInPair);
    }
    let winner = scheffe_select(q1, q2, sample, family)?.pick(q1, q2).clone();
    Ok(ipm_exact(&winner, q, family)?.value)
}

/// Scheffé scores of both candidates from a single selection.
pub fn scheffe_scores(
    q1: &DiscreteDistribution,
    q2: &DiscreteDistribution,
    sample: &Dataset,
    family: &FunctionFamily,
) -> Result<(f64, f64)> {
    let outcome = scheffe_select(q1, q2, sample, family)?;
    let winner = outcome.pick(q1, q2);
    Ok((ipm_exact(winner, q1, family)?.value, ipm_exact(winner, q2, family)?.value))
}

/// Plug-in coverage score `Σ_x q̂(x)·1[q̂(x)/q(x) ≥ N]`, summed over the
/// observed support (where `q̂` is nonzero).
pub fn coverage_score(q: &DiscreteDistribution, sample: &Dataset, n: f64) -> Result<f64> {
    if n.is_nan() || n < 1.0 {
        return Err(Error::InvalidParameters(format!("coverage threshold N must be >= 1, got {n}")));
    }
    ensure_same_domain(q.domain(), sample.domain())?;
    let m = sample.len() as f64;
    Ok(sample
        .counts()
        .iter()
        .zip(q.probs())
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &p)| (c as f64 / m, p))
        .filter(|&(freq, p)| ratio_at_least(freq, p, n))
        .map(|(freq, _)| freq)
        .sum())
}

/// `|(1/m) Σ g(x_i) − E_q g|`.
pub fn fixed_test_score(q: &DiscreteDistribution, sample: &Dataset, g: &TestFunction) -> Result<f64> {
    ensure_same_domain(q.domain(), sample.domain())?;
    ensure_same_domain(q.domain(), g.domain())?;
    let sample_mean = sample.points().iter().map(|&i| g.values[i]).sum::<f64>() / sample.len() as f64;
    Ok((sample_mean - q.expectation(&g.values)).abs())
}

/// Fixed statistical test `|E_p g − E_q g|`.
pub fn fixed_test_metric(p: &DiscreteDistribution, q: &DiscreteDistribution, g: &TestFunction) -> Result<f64> {
    ensure_same_domain(p.domain(), q.domain())?;
    ensure_same_domain(p.domain(), g.domain())?;
    Ok((p.expectation(&g.values) - q.expectation(&g.values)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{kl, sample as draw, tv};
    use crate::test_families::all_binary_family;

    fn dist(p: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::from_probs(p.to_vec()).unwrap()
    }

    fn sample_of(q: &DiscreteDistribution, points: &[usize]) -> Dataset {
        Dataset::new(q.domain().clone(), points.to_vec()).unwrap()
    }

    #[test]
    fn nll_examples() {
        let u = dist(&[0.5, 0.5]);
        let s = sample_of(&u, &[0, 1, 1, 0, 0]);
        assert!((nll_score(&u, &s).unwrap() - 2f64.ln()).abs() < 1e-15);
        let q = dist(&[1.0, 0.0]);
        assert_eq!(nll_score(&q, &sample_of(&q, &[0, 1])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn nll_gap_on_the_tv_construction() {
        let (p, r, m) = (0.2, 0.5, 25.0f64);
        let q1 = dist(&[1.0 - p - r, p, r]);
        let q2 = dist(&[1.0 - p * (-m).exp(), p * (-m).exp(), 0.0]);
        let s = sample_of(&q1, &[0; 10]);
        let gap = nll_score(&q2, &s).unwrap() - nll_score(&q1, &s).unwrap();
        let expected = ((1.0 - p - r) / (1.0 - p * (-m).exp())).ln();
        assert!((gap - expected).abs() < 1e-12);
        assert!(gap < 0.0);
    }

    #[test]
    fn nll_maps_labels_and_rejects_unknown_ones() {
        let q = DiscreteDistribution::new(vec!["a".into(), "b".into()], vec![0.25, 0.75]).unwrap();
        let other = Domain::new(vec!["b".into(), "z".into()]).unwrap();
        let s = Dataset::from_labels(other.clone(), &["b", "b"]).unwrap();
        assert!((nll_score(&q, &s).unwrap() + 0.75f64.ln()).abs() < 1e-15);
        let bad = Dataset::from_labels(other, &["z"]).unwrap();
        assert_eq!(nll_score(&q, &bad), Err(Error::UnknownLabel("z".into())));
    }

    #[test]
    fn perplexity_examples() {
        let u = dist(&[0.5, 0.5]);
        assert!((perplexity(&u, &sample_of(&u, &[0, 1, 1])).unwrap() - 2.0).abs() < 1e-12);
        let point = dist(&[1.0, 0.0]);
        assert_eq!(perplexity(&point, &sample_of(&point, &[0, 0])).unwrap(), 1.0);
        assert_eq!(perplexity(&point, &sample_of(&point, &[0, 1])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn nll_minus_empirical_nll_is_kl() {
        let q = dist(&[0.1, 0.2, 0.3, 0.4]);
        let s = draw(&dist(&[0.4, 0.3, 0.2, 0.1]), 257, 11).unwrap();
        let empirical = empirical_distribution(&s, q.domain()).unwrap();
        let lhs = nll_score(&q, &s).unwrap() - nll_score(&empirical, &s).unwrap();
        assert!((lhs - kl(&empirical, &q).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn empirical_ipm_examples() {
        let q = dist(&[0.25, 0.25, 0.5]);
        let family = all_binary_family(q.domain().clone()).unwrap();
        assert!(empirical_ipm_score(&q, &sample_of(&q, &[0, 1, 2, 2]), &family).unwrap() < 1e-15);

        let s = sample_of(&q, &[0, 0, 0, 1, 2]);
        let empirical = empirical_distribution(&s, q.domain()).unwrap();
        let score = empirical_ipm_score(&q, &s, &family).unwrap();
        assert!((score - tv(&q, &empirical).unwrap()).abs() < 1e-15);

        let constant = FunctionFamily::new(q.domain().clone(), vec![vec![1.0; 3]]).unwrap();
        assert!(empirical_ipm_score(&q, &s, &constant).unwrap() < 1e-15);
    }

    #[test]
    fn scheffe_tie_goes_to_first() {
        let q = dist(&[0.3, 0.7]);
        let family = all_binary_family(q.domain().clone()).unwrap();
        let outcome = scheffe_select(&q, &q, &sample_of(&q, &[0, 1]), &family).unwrap();
        assert_eq!(outcome.winner, Candidate::First);
    }

    #[test]
    fn scheffe_prefers_the_truth_with_high_probability() {
        // tv(q1, q2) = 0.5 and the witness statistic has range 1, so by
        // Hoeffding P(wrong winner) <= exp(-2 m 0.25^2) = e^-62.5 at m = 500.
        let q1 = dist(&[0.6, 0.3, 0.1]);
        let q2 = dist(&[0.1, 0.3, 0.6]);
        assert!((tv(&q1, &q2).unwrap() - 0.5).abs() < 1e-12);
        let family = all_binary_family(q1.domain().clone()).unwrap();
        for seed in 0..50 {
            let s = draw(&q1, 500, seed).unwrap();
            assert_eq!(scheffe_select(&q1, &q2, &s, &family).unwrap().winner, Candidate::First);
        }
    }

    #[test]
    fn scheffe_score_examples() {
        let q1 = dist(&[0.6, 0.3, 0.1]);
        let q2 = dist(&[0.1, 0.3, 0.6]);
        let family = all_binary_family(q1.domain().clone()).unwrap();
        let s = draw(&q1, 2000, 5).unwrap();
        assert_eq!(scheffe_score(&q1, &q1, &q2, &s, &family).unwrap(), 0.0);
        let d12 = ipm_exact(&q1, &q2, &family).unwrap().value;
        assert!((scheffe_score(&q2, &q1, &q2, &s, &family).unwrap() - d12).abs() < 1e-15);
        assert_eq!(scheffe_scores(&q1, &q2, &s, &family).unwrap(), (0.0, d12));

        let outsider = dist(&[0.2, 0.2, 0.6]);
        assert_eq!(scheffe_score(&outsider, &q1, &q2, &s, &family), Err(Error::CandidateNotInPair));
    }

    #[test]
    fn scheffe_scores_tie_for_an_equidistant_truth() {
        let q1 = dist(&[0.75, 0.25]);
        let q2 = dist(&[0.25, 0.75]);
        let family = all_binary_family(q1.domain().clone()).unwrap();
        let s = sample_of(&q1, &[0, 1]);
        let (a, b) = scheffe_scores(&q1, &q2, &s, &family).unwrap();
        // The tie picks q1, so q1 scores 0 and q2 scores d_F(q1, q2).
        assert_eq!(a, 0.0);
        assert_eq!(b, 0.5);
    }

    #[test]
    fn coverage_score_examples() {
        let q = dist(&[0.25, 0.75]);
        let s = sample_of(&q, &[0, 1, 1, 1]);
        assert_eq!(coverage_score(&q, &s, 2.0).unwrap(), 0.0);

        let q1 = dist(&[0.45, 0.55]);
        let s = sample_of(&q1, &[0; 10]);
        assert_eq!(coverage_score(&q1, &s, 2.0).unwrap(), 1.0);

        // x1 is never observed, so it contributes nothing even though
        // q1(x1)/q(x1) would clear the threshold.
        let q = dist(&[0.5, 0.5]);
        let s = sample_of(&q, &[0, 0]);
        assert_eq!(coverage_score(&q, &s, 2.0).unwrap(), 1.0);
        assert_eq!(coverage_score(&q, &s, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn coverage_score_counts_model_null_points() {
        let q = dist(&[1.0, 0.0]);
        let s = sample_of(&q, &[0, 1, 1, 1]);
        assert_eq!(coverage_score(&q, &s, 100.0).unwrap(), 0.75);
    }

    #[test]
    fn fixed_test_examples() {
        let q = dist(&[0.5, 0.5]);
        let constant = TestFunction::new(q.domain().clone(), vec![3.0, 3.0]).unwrap();
        assert!(fixed_test_score(&q, &sample_of(&q, &[0, 1, 1]), &constant).unwrap() < 1e-15);

        let indicator = TestFunction::new(q.domain().clone(), vec![1.0, 0.0]).unwrap();
        let s = sample_of(&q, &[0, 1, 1, 1]);
        assert!((fixed_test_score(&q, &s, &indicator).unwrap() - 0.25).abs() < 1e-15);

        let a = dist(&[1.0, 0.0]);
        let b = dist(&[0.0, 1.0]);
        let g = TestFunction::new(a.domain().clone(), vec![-4.0, 6.0]).unwrap();
        assert_eq!(fixed_test_metric(&a, &b, &g).unwrap(), 10.0);
        assert_eq!(fixed_test_metric(&a, &a, &g).unwrap(), 0.0);
    }

    #[test]
    fn fixed_test_pair_metric() {
        // q1 = (1/sqrt B, 1 - 1/sqrt B), q2 = (0, 1), g = ((B+1) g2, g2).
        let b = 100.0f64;
        let q1 = dist(&[1.0 / b.sqrt(), 1.0 - 1.0 / b.sqrt()]);
        let q2 = dist(&[0.0, 1.0]);
        let g = TestFunction::new(q1.domain().clone(), vec![b + 1.0, 1.0]).unwrap();
        let value = fixed_test_metric(&q1, &q2, &g).unwrap();
        assert!((value - 10.0).abs() < 1e-12);
        assert!(value >= (b - 1.0) / b.sqrt());
    }

    #[test]
    fn test_function_rejects_non_finite() {
        let d = Domain::indexed(2).unwrap();
        assert_eq!(TestFunction::new(d, vec![1.0, f64::NAN]), Err(Error::NonFinite { index: 1 }));
    }

    #[test]
    fn score_spec_dispatch() {
        let q = dist(&[0.5, 0.5]);
        let s = sample_of(&q, &[0, 1]);
        assert_eq!(ScoreSpec::Nll.score(&q, &s).unwrap(), 2f64.ln());
        let family = all_binary_family(q.domain().clone()).unwrap();
        assert!(ScoreSpec::ScheffeIpm { family: family.clone() }.score(&q, &s).is_err());
        assert!(ScoreSpec::ScheffeIpm { family }.score_pair(&q, &q, &s).is_ok());
        let text = serde_json::to_string(&ScoreSpec::Coverage { n: 2.0 }).unwrap();
        assert_eq!(text, r#"{"kind":"coverage","n":2.0}"#);
    }
}
