//! Finite discrete distributions, samples drawn from them, and the direct
//! divergences between them.
//!
//! All logarithms are natural. Perplexity elsewhere in the crate is the
//! exponential of the natural-log nll; a base-2 perplexity induces the same
//! ordering of models.

mod divergence;

pub(crate) use divergence::ratio_at_least;

pub use divergence::{
    check_delta_close, check_lower_bound, check_margin, coverage_profile, hellinger_sq, kl,
    kl_restricted_to, renyi, restricted_kl, restricted_kl_with_witness, tv, RESTRICTED_KL_SUPPORT_CAP,
};

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack accepted on the input sum before a vector is rejected as unnormalized.
pub const INPUT_NORMALIZATION_SLACK: f64 = 1e-9;

/// An ordered set of distinct point labels.
///
/// Cloning is cheap; equality short-circuits on shared storage.
#[derive(Clone)]
pub struct Domain(Arc<[String]>);

impl Domain {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Domain(labels.into()))
    }

    /// Domain `x0, x1, …, x{n-1}`.
    pub fn indexed(n: usize) -> Result<Self> {
        Domain::new((0..n).map(|i| format!("x{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn label(&self, index: usize) -> &str {
        &self.0[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

pub(crate) fn ensure_same_domain(a: &Domain, b: &Domain) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DomainMismatch)
    }
}

/// A probability vector over a finite labeled domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "DistributionRepr", try_from = "DistributionRepr")]
pub struct DiscreteDistribution {
    domain: Domain,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl From<DiscreteDistribution> for DistributionRepr {
    fn from(d: DiscreteDistribution) -> Self {
        DistributionRepr { labels: d.domain.labels().to_vec(), probs: d.probs }
    }
}

impl TryFrom<DistributionRepr> for DiscreteDistribution {
    type Error = Error;

    fn try_from(repr: DistributionRepr) -> Result<Self> {
        DiscreteDistribution::new(repr.labels, repr.probs)
    }
}

impl DiscreteDistribution {
    /// Validates and builds a distribution. Input whose sum is within 1e-9 of
    /// one is rescaled to sum to one; anything further off is rejected.
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(Error::LengthMismatch { labels: labels.len(), values: probs.len() });
        }
        Self::with_domain(Domain::new(labels)?, probs)
    }

    pub fn with_domain(domain: Domain, mut probs: Vec<f64>) -> Result<Self> {
        if domain.len() != probs.len() {
            return Err(Error::LengthMismatch { labels: domain.len(), values: probs.len() });
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if value < 0.0 {
                return Err(Error::NegativeProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > INPUT_NORMALIZATION_SLACK {
            return Err(Error::NotNormalized { sum });
        }
        if sum != 1.0 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(DiscreteDistribution { domain, probs })
    }

    /// Distribution over the indexed domain `x0, x1, …`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        Self::with_domain(Domain::indexed(probs.len())?, probs)
    }

    pub fn uniform(domain: Domain) -> Self {
        let n = domain.len();
        DiscreteDistribution { domain, probs: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(domain: Domain, index: usize) -> Result<Self> {
        if index >= domain.len() {
            return Err(Error::InvalidParameters(format!(
                "point index {index} outside a domain of {} points",
                domain.len()
            )));
        }
        let mut probs = vec![0.0; domain.len()];
        probs[index] = 1.0;
        Ok(DiscreteDistribution { domain, probs })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn labels(&self) -> &[String] {
        self.domain.labels()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn prob_of(&self, label: &str) -> Result<f64> {
        self.domain
            .index_of(label)
            .map(|i| self.probs[i])
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Indices of points with positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&i| self.probs[i] > 0.0).collect()
    }

    /// Expectation of a per-point function given as a slice over the domain.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    fn cumulative(&self) -> Vec<f64> {
        self.probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }
}

/// An ordered sample of domain points.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    domain: Domain,
    points: Vec<usize>,
}

impl Dataset {
    pub fn new(domain: Domain, points: Vec<usize>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(&bad) = points.iter().find(|&&i| i >= domain.len()) {
            return Err(Error::UnknownLabel(format!("#{bad}")));
        }
        Ok(Dataset { domain, points })
    }

    pub fn from_labels<S: AsRef<str>>(domain: Domain, labels: &[S]) -> Result<Self> {
        let lookup: std::collections::HashMap<&str, usize> =
            domain.labels().iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let points = labels
            .iter()
            .map(|l| {
                lookup
                    .get(l.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownLabel(l.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(domain, points)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Point indices into the domain, in sample order.
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.points.iter().map(|&i| self.domain.label(i))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.domain.len()];
        for &i in &self.points {
            counts[i] += 1;
        }
        counts
    }
}

/// Draws `m` i.i.d. points from `q` by inverse-CDF over the fixed label
/// order. The same `(q, m, seed)` always yields the same dataset.
pub fn sample(q: &DiscreteDistribution, m: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(q, m, &mut rng)
}

pub fn sample_with<R: Rng + ?Sized>(q: &DiscreteDistribution, m: usize, rng: &mut R) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    let cdf = q.cumulative();
    // Rounding can leave the last cumulative value a hair below 1.
    let last_positive = q.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let points = (0..m)
        .map(|_| {
            let u: f64 = rng.random();
            cdf.partition_point(|&c| c <= u).min(last_positive)
        })
        .collect();
    Ok(Dataset { domain: q.domain.clone(), points })
}

/// Empirical frequencies of `sample` over `domain`. Labels are matched by
/// name when the sample was drawn over a different (but compatible) domain.
pub fn empirical_distribution(sample: &Dataset, domain: &Domain) -> Result<DiscreteDistribution> {
    let m = sample.len() as f64;
    let mut probs = vec![0.0; domain.len()];
    if sample.domain == *domain {
        for (p, c) in probs.iter_mut().zip(sample.counts()) {
            *p = c as f64 / m;
        }
    } else {
        let counts = sample.counts();
        for (i, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
            let label = sample.domain.label(i);
            let j = domain.index_of(label).ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
            probs[j] = c as f64 / m;
        }
    }
    DiscreteDistribution::with_domain(domain.clone(), probs)
}

/// A restriction set `E` over a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetMask {
    domain: Domain,
    members: Vec<bool>,
}

impl SubsetMask {
    pub fn from_indices(domain: Domain, indices: &[usize]) -> Result<Self> {
        let mut members = vec![false; domain.len()];
        for &i in indices {
            if i >= domain.len() {
                return Err(Error::UnknownLabel(format!("#{i}")));
            }
            members[i] = true;
        }
        Ok(SubsetMask { domain, members })
    }

    pub fn from_labels<S: AsRef<str>>(domain: Domain, labels: &[S]) -> Result<Self> {
        let indices = labels
            .iter()
            .map(|l| domain.index_of(l.as_ref()).ok_or_else(|| Error::UnknownLabel(l.as_ref().to_string())))
            .collect::<Result<Vec<_>>>()?;
        Self::from_indices(domain, &indices)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members[index]
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.members.len()).filter(|&i| self.members[i]).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.indices().into_iter().map(|i| self.domain.label(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn make_distribution_examples() {
        let u = DiscreteDistribution::new(labels(&["a", "b"]), vec![0.5, 0.5]).unwrap();
        assert_eq!(u.probs(), &[0.5, 0.5]);
        assert!(matches!(
            DiscreteDistribution::new(labels(&["a", "b"]), vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        let point = DiscreteDistribution::new(labels(&["a"]), vec![1.0]).unwrap();
        assert_eq!(point.support(), vec![0]);
    }

    #[test]
    fn make_distribution_rejections() {
        assert!(matches!(
            DiscreteDistribution::new(labels(&["a", "b"]), vec![1.5, -0.5]),
            Err(Error::NegativeProbability { index: 1, .. })
        ));
        assert_eq!(
            DiscreteDistribution::new(labels(&["a", "a"]), vec![0.5, 0.5]),
            Err(Error::DuplicateLabel("a".into()))
        );
        assert!(matches!(
            DiscreteDistribution::new(labels(&["a"]), vec![0.5, 0.5]),
            Err(Error::LengthMismatch { .. })
        ));
        assert_eq!(DiscreteDistribution::new(vec![], vec![]), Err(Error::EmptyDomain));
    }

    #[test]
    fn small_slack_is_renormalized() {
        let d = DiscreteDistribution::new(labels(&["a", "b", "c"]), vec![0.1, 0.2, 0.7 + 5e-10]).unwrap();
        let sum: f64 = d.probs().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sampling_a_point_mass() {
        let q = DiscreteDistribution::new(labels(&["a", "b"]), vec![1.0, 0.0]).unwrap();
        let s = sample(&q, 5, 1234).unwrap();
        assert_eq!(s.labels().collect::<Vec<_>>(), vec!["a"; 5]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let q = DiscreteDistribution::from_probs(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(sample(&q, 100, 7).unwrap(), sample(&q, 100, 7).unwrap());
        assert_ne!(sample(&q, 100, 7).unwrap(), sample(&q, 100, 8).unwrap());
    }

    #[test]
    fn sampling_never_hits_null_points() {
        let q = DiscreteDistribution::from_probs(vec![0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        let counts = sample(&q, 10_000, 3).unwrap().counts();
        assert_eq!(counts[0] + counts[2] + counts[4], 0);
    }

    #[test]
    fn uniform_frequency_within_binomial_tail() {
        // P(|K/m - 1/2| > 0.05) <= 2 exp(-2 m 0.05^2) = 2 e^-50 at m = 1e4.
        let q = DiscreteDistribution::new(labels(&["a", "b"]), vec![0.5, 0.5]).unwrap();
        for seed in 0..20 {
            let s = sample(&q, 10_000, seed).unwrap();
            let freq = s.counts()[0] as f64 / 1e4;
            assert!((0.45..=0.55).contains(&freq), "seed {seed}: {freq}");
        }
    }

    #[test]
    fn empirical_distribution_counts() {
        let domain = Domain::new(labels(&["a", "b", "c"])).unwrap();
        let s = Dataset::from_labels(domain.clone(), &["a", "a", "b"]).unwrap();
        let e = empirical_distribution(&s, &domain).unwrap();
        assert_eq!(e.probs(), &[2.0 / 3.0, 1.0 / 3.0, 0.0]);

        let single = Domain::new(labels(&["a"])).unwrap();
        let s = Dataset::from_labels(single.clone(), &["a"]).unwrap();
        assert_eq!(empirical_distribution(&s, &single).unwrap().probs(), &[1.0]);
    }

    #[test]
    fn empirical_distribution_maps_labels_across_domains() {
        let small = Domain::new(labels(&["b", "a"])).unwrap();
        let big = Domain::new(labels(&["a", "b", "c"])).unwrap();
        let s = Dataset::from_labels(small, &["a", "b", "b", "b"]).unwrap();
        let e = empirical_distribution(&s, &big).unwrap();
        assert_eq!(e.probs(), &[0.25, 0.75, 0.0]);

        let other = Domain::new(labels(&["a"])).unwrap();
        assert_eq!(empirical_distribution(&s, &other), Err(Error::UnknownLabel("b".into())));
    }

    #[test]
    fn dataset_rejects_unknown_labels_and_empty_samples() {
        let domain = Domain::new(labels(&["a"])).unwrap();
        assert_eq!(Dataset::from_labels(domain.clone(), &["z"]), Err(Error::UnknownLabel("z".into())));
        assert_eq!(Dataset::new(domain, vec![]), Err(Error::EmptyDataset));
    }

    #[test]
    fn json_round_trip() {
        let d = DiscreteDistribution::new(labels(&["a", "b"]), vec![0.25, 0.75]).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(text, r#"{"labels":["a","b"],"probs":[0.25,0.75]}"#);
        let back: DiscreteDistribution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<DiscreteDistribution>(r#"{"labels":["a"],"probs":[0.9]}"#).is_err());
    }
}
