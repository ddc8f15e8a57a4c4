//! Builders for the adversarial distribution families used to separate
//! evaluable from non-evaluable metrics. Every bundle carries the closed-form
//! facts about its own distributions so that callers (tests, the CLI,
//! experiment configs) can re-verify them from one source.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    check_delta_close, coverage_profile, kl, renyi, restricted_kl, tv, DiscreteDistribution, Domain,
};
use crate::error::{Error, Result};
use crate::float_serde;
use crate::scores::{fixed_test_metric, TestFunction};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

/// Absolute tolerance for `exact` facts.
pub const EXACT_FACT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    Renyi,
    Kl,
    Coverage,
    #[serde(rename = "fixedtest")]
    FixedTest,
    #[serde(rename = "tvnll")]
    TvNll,
    #[serde(rename = "rkl")]
    RestrictedKl,
}

impl std::str::FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "renyi" => Ok(Recipe::Renyi),
            "kl" => Ok(Recipe::Kl),
            "coverage" => Ok(Recipe::Coverage),
            "fixedtest" => Ok(Recipe::FixedTest),
            "tvnll" => Ok(Recipe::TvNll),
            "rkl" => Ok(Recipe::RestrictedKl),
            other => Err(Error::InvalidParameters(format!("unknown recipe `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Exact,
    Lower,
    StrictLower,
    Upper,
}

/// A quantity computable from the bundle's own distributions, referenced by
/// role name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantity {
    Tv { p: String, q: String },
    Kl { p: String, q: String },
    Renyi { p: String, q: String, alpha: f64 },
    Coverage { model: String, truth: String, n: f64 },
    RestrictedKl { p: String, q: String, beta: f64 },
    /// Uses the bundle's test function.
    FixedTest { p: String, q: String },
    /// `1 − (1 − d(label))^m`: chance that `label` appears in `m` draws.
    HitProbability { dist: String, label: String, m: u64 },
    /// `tv(worse, truth) − c·tv(better, truth) − eps`.
    TvGap { worse: String, better: String, truth: String, c: f64, eps: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticFact {
    pub description: String,
    pub quantity: Quantity,
    #[serde(with = "float_serde")]
    pub value: f64,
    pub bound: BoundKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactCheck {
    pub description: String,
    #[serde(with = "float_serde")]
    pub computed: f64,
    #[serde(with = "float_serde")]
    pub value: f64,
    pub bound: BoundKind,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionBundle {
    pub schema_version: u32,
    pub recipe: Recipe,
    pub parameters: BTreeMap<String, f64>,
    pub distributions: BTreeMap<String, DiscreteDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunction>,
    pub facts: Vec<AnalyticFact>,
}

impl ConstructionBundle {
    pub fn get(&self, role: &str) -> Result<&DiscreteDistribution> {
        self.distributions
            .get(role)
            .ok_or_else(|| Error::InvalidParameters(format!("bundle has no distribution `{role}`")))
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).copied()
    }

    pub fn evaluate(&self, quantity: &Quantity) -> Result<f64> {
        match quantity {
            Quantity::Tv { p, q } => tv(self.get(p)?, self.get(q)?),
            Quantity::Kl { p, q } => kl(self.get(p)?, self.get(q)?),
            Quantity::Renyi { p, q, alpha } => renyi(self.get(p)?, self.get(q)?, *alpha),
            Quantity::Coverage { model, truth, n } => coverage_profile(self.get(model)?, self.get(truth)?, *n),
            Quantity::RestrictedKl { p, q, beta } => restricted_kl(self.get(p)?, self.get(q)?, *beta),
            Quantity::FixedTest { p, q } => {
                let g = self
                    .test_function
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameters("bundle has no test function".into()))?;
                fixed_test_metric(self.get(p)?, self.get(q)?, g)
            }
            Quantity::HitProbability { dist, label, m } => {
                let mass = self.get(dist)?.prob_of(label)?;
                Ok(1.0 - (1.0 - mass).powf(*m as f64))
            }
            Quantity::TvGap { worse, better, truth, c, eps } => {
                let truth = self.get(truth)?;
                Ok(tv(self.get(worse)?, truth)? - c * tv(self.get(better)?, truth)? - eps)
            }
        }
    }

    /// Recomputes every fact from the distributions.
    pub fn verify(&self) -> Result<Vec<FactCheck>> {
        self.facts
            .iter()
            .map(|fact| {
                let computed = self.evaluate(&fact.quantity)?;
                let holds = match fact.bound {
                    BoundKind::Exact => {
                        computed == fact.value || (computed - fact.value).abs() <= EXACT_FACT_TOLERANCE
                    }
                    BoundKind::Lower => computed >= fact.value,
                    BoundKind::StrictLower => computed > fact.value,
                    BoundKind::Upper => computed <= fact.value,
                };
                Ok(FactCheck {
                    description: fact.description.clone(),
                    computed,
                    value: fact.value,
                    bound: fact.bound,
                    holds,
                })
            })
            .collect()
    }

    pub fn all_facts_hold(&self) -> Result<bool> {
        Ok(self.verify()?.iter().all(|c| c.holds))
    }
}

fn fact(description: impl Into<String>, quantity: Quantity, value: f64, bound: BoundKind) -> AnalyticFact {
    AnalyticFact { description: description.into(), quantity, value, bound }
}

fn role(name: &str) -> String {
    name.to_string()
}

fn three_point(domain: &Domain, probs: [f64; 3]) -> Result<DiscreteDistribution> {
    DiscreteDistribution::with_domain(domain.clone(), probs.to_vec())
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameters(msg.into())
}

/// The pair `q1 = (1 − η − ηe^−M, ηe^−M, η)`, `q2 = (1 − η − ηe^−M, η, ηe^−M)`.
fn flipped_pair(eta: f64, m: f64) -> Result<(Domain, DiscreteDistribution, DiscreteDistribution)> {
    let small = eta * (-m).exp();
    let bulk = 1.0 - eta - small;
    if bulk.is_nan() || bulk < 0.0 {
        return Err(invalid(format!("eta = {eta} leaves negative mass on x0")));
    }
    let domain = Domain::indexed(3)?;
    let q1 = three_point(&domain, [bulk, small, eta])?;
    let q2 = three_point(&domain, [bulk, eta, small])?;
    Ok((domain, q1, q2))
}

/// Two distributions that agree on the bulk point `x0` and swap tiny masses
/// on `x1`, `x2`; with `η = e^{−(α−1)M/2}` both Rényi divergences exceed
/// `M/2` while the pair is invisible in samples that miss `{x1, x2}`.
pub fn renyi_pair(alpha: f64, m: f64) -> Result<ConstructionBundle> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if !(m >= 2.0 && m.is_finite()) {
        return Err(invalid(format!("M must be >= 2, got {m}")));
    }
    let eta = (-(alpha - 1.0) * m / 2.0).exp();
    let (_, q1, q2) = flipped_pair(eta, m)?;
    let facts = vec![
        fact(
            "renyi(q2 || q1) >= M/2",
            Quantity::Renyi { p: role("q2"), q: role("q1"), alpha },
            m / 2.0,
            BoundKind::Lower,
        ),
        fact(
            "renyi(q1 || q2) >= M/2",
            Quantity::Renyi { p: role("q1"), q: role("q2"), alpha },
            m / 2.0,
            BoundKind::Lower,
        ),
        fact(
            "tv(q1, q2) = eta (1 - e^-M)",
            Quantity::Tv { p: role("q1"), q: role("q2") },
            eta * (1.0 - (-m).exp()),
            BoundKind::Exact,
        ),
    ];
    Ok(ConstructionBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        recipe: Recipe::Renyi,
        parameters: BTreeMap::from([("alpha".into(), alpha), ("M".into(), m), ("eta".into(), eta)]),
        distributions: BTreeMap::from([(role("q1"), q1), (role("q2"), q2)]),
        test_function: None,
        facts,
    })
}

/// Same shape as [`renyi_pair`] with `η = 2/M`, so
/// `KL(q1‖q2) = KL(q2‖q1) = ηM(1 − e^−M) = 2(1 − e^−M)`.
pub fn kl_pair(m: f64) -> Result<ConstructionBundle> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid(format!("M must be positive, got {m}")));
    }
    let eta = 2.0 / m;
    if eta >= 1.0 {
        return Err(invalid(format!("eta = 2/M = {eta} leaves no mass on x0")));
    }
    let (_, q1, q2) = flipped_pair(eta, m)?;
    let value = eta * m * (1.0 - (-m).exp());
    let facts = vec![
        fact("KL(q1 || q2) = eta M (1 - e^-M)", Quantity::Kl { p: role("q1"), q: role("q2") }, value, BoundKind::Exact),
        fact("KL(q2 || q1) = eta M (1 - e^-M)", Quantity::Kl { p: role("q2"), q: role("q1") }, value, BoundKind::Exact),
    ];
    Ok(ConstructionBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        recipe: Recipe::Kl,
        parameters: BTreeMap::from([("M".into(), m), ("eta".into(), eta)]),
        distributions: BTreeMap::from([(role("q1"), q1), (role("q2"), q2)]),
        test_function: None,
        facts,
    })
}

/// Candidate `q1 = ((1−γ)/N, ·)` with ground truths `q2 = (1−γ, γ)` and
/// `q3 = (1−γ−η, γ+η)`: `q2`'s bulk point sits exactly on the ratio
/// threshold for `q1`, `q3`'s sits just below it.
pub fn coverage_triple(n: f64, gamma: f64, eta: f64) -> Result<ConstructionBundle> {
    if !(n >= 2.0 && n.is_finite()) {
        return Err(invalid(format!("N must be >= 2, got {n}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(eta > 0.0 && eta < gamma / 10.0 && eta < 1.0 - gamma) {
        return Err(invalid(format!("eta must lie in (0, gamma/10) and leave mass on x0, got {eta}")));
    }
    let domain = Domain::indexed(2)?;
    let bulk = (1.0 - gamma) / n;
    let q1 = DiscreteDistribution::with_domain(domain.clone(), vec![bulk, 1.0 - bulk])?;
    let q2 = DiscreteDistribution::with_domain(domain.clone(), vec![1.0 - gamma, gamma])?;
    let q3 = DiscreteDistribution::with_domain(domain, vec![1.0 - gamma - eta, gamma + eta])?;
    let facts = vec![
        fact(
            "coverage(q1; truth q2) >= 1 - gamma",
            Quantity::Coverage { model: role("q1"), truth: role("q2"), n },
            1.0 - gamma,
            BoundKind::Lower,
        ),
        fact(
            "coverage(q1; truth q3) = 0",
            Quantity::Coverage { model: role("q1"), truth: role("q3"), n },
            0.0,
            BoundKind::Exact,
        ),
        fact("tv(q2, q3) = eta", Quantity::Tv { p: role("q2"), q: role("q3") }, eta, BoundKind::Exact),
    ];
    Ok(ConstructionBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        recipe: Recipe::Coverage,
        parameters: BTreeMap::from([("N".into(), n), ("gamma".into(), gamma), ("eta".into(), eta)]),
        distributions: BTreeMap::from([(role("q1"), q1), (role("q2"), q2), (role("q3"), q3)]),
        test_function: None,
        facts,
    })
}

/// `q1 = (1/√B, 1 − 1/√B)`, `q2 = (0, 1)` and `g = ((B+1)·g2, g2)`, so
/// `|g(x1)| > B|g(x2)|`. The test gap is `|g(x1) − g(x2)|/√B = √B·|g2|`.
pub fn fixed_test_pair(b: f64, g2: f64) -> Result<ConstructionBundle> {
    if !(b > 1.0 && b.is_finite()) {
        return Err(invalid(format!("B must exceed 1, got {b}")));
    }
    if !(g2 != 0.0 && g2.is_finite()) {
        return Err(invalid(format!("g(x2) must be finite and nonzero, got {g2}")));
    }
    let domain = Domain::indexed(2)?;
    let rare = 1.0 / b.sqrt();
    let q1 = DiscreteDistribution::with_domain(domain.clone(), vec![rare, 1.0 - rare])?;
    let q2 = DiscreteDistribution::with_domain(domain.clone(), vec![0.0, 1.0])?;
    let g = TestFunction::new(domain, vec![(b + 1.0) * g2, g2])?;
    let gap = (g.values()[0] - g.values()[1]).abs() / b.sqrt();
    let facts = vec![
        fact(
            "fixed_test(q1, q2) = |g(x1) - g(x2)| / sqrt(B)",
            Quantity::FixedTest { p: role("q1"), q: role("q2") },
            gap,
            BoundKind::Exact,
        ),
        fact(
            "fixed_test(q1, q2) >= (B - 1)/sqrt(B) |g(x2)|",
            Quantity::FixedTest { p: role("q1"), q: role("q2") },
            (b - 1.0) / b.sqrt() * g2.abs(),
            BoundKind::Lower,
        ),
    ];
    Ok(ConstructionBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        recipe: Recipe::FixedTest,
        parameters: BTreeMap::from([("B".into(), b), ("g2".into(), g2)]),
        distributions: BTreeMap::from([(role("q1"), q1), (role("q2"), q2)]),
        test_function: Some(g),
        facts,
    })
}

/// `2|ln(1 − p − r)|/p` for the TV/nll construction.
pub fn tv_nll_min_m(c: f64, eps: f64) -> f64 {
    let p = (1.0 - eps) / (4.0 * c);
    let r = (1.0 + eps) / 2.0 - p / 2.0;
    2.0 * (1.0 - p - r).ln().abs() / p
}

/// Ground truth `q* = (1−p, p, 0)`, a model `q1` that moves mass `r` onto
/// the null point `x2`, and a model `q2` that nearly drops `x1`. With
/// `p = (1−ε)/(4c)` and `r = (1+ε)/2 − p/2`, `q1` is worse in TV by more
/// than the `(c, ε)` slack yet wins on nll once `x1` shows up.
///
/// `m = None` picks the smallest admissible `M` plus one.
pub fn tv_nll_triple(c: f64, eps: f64, m: Option<f64>) -> Result<ConstructionBundle> {
    if !(c >= 1.0 && c.is_finite()) {
        return Err(invalid(format!("c must be >= 1, got {c}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    let p = (1.0 - eps) / (4.0 * c);
    let r = (1.0 + eps) / 2.0 - p / 2.0;
    let min_m = tv_nll_min_m(c, eps);
    let m = m.unwrap_or(min_m + 1.0);
    if !(m > min_m && m.is_finite()) {
        return Err(invalid(format!("M must exceed 2|ln(1-p-r)|/p = {min_m}, got {m}")));
    }
    let domain = Domain::indexed(3)?;
    let qstar = three_point(&domain, [1.0 - p, p, 0.0])?;
    let q1 = three_point(&domain, [1.0 - p - r, p, r])?;
    let q2 = three_point(&domain, [1.0 - p * (-m).exp(), p * (-m).exp(), 0.0])?;
    let facts = vec![
        fact("tv(q1, q*) = r", Quantity::Tv { p: role("q1"), q: role("qstar") }, r, BoundKind::Exact),
        fact(
            "tv(q2, q*) = p (1 - e^-M)",
            Quantity::Tv { p: role("q2"), q: role("qstar") },
            p * (1.0 - (-m).exp()),
            BoundKind::Exact,
        ),
        fact(
            "tv(q1, q*) > c tv(q2, q*) + eps",
            Quantity::TvGap { worse: role("q1"), better: role("q2"), truth: role("qstar"), c, eps },
            0.0,
            BoundKind::StrictLower,
        ),
    ];
    Ok(ConstructionBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        recipe: Recipe::TvNll,
        parameters: BTreeMap::from([
            ("c".into(), c),
            ("eps".into(), eps),
            ("M".into(), m),
            ("p".into(), p),
            ("r".into(), r),
        ]),
        distributions: BTreeMap::from([(role("qstar"), qstar), (role("q1"), q1), (role("q2"), q2)]),
        test_function: None,
        facts,
    })
}

/// `2(1/(1−β) + ln 2)` for the restricted-KL construction.
pub fn restricted_kl_min_m(beta: f64) -> f64 {
    2.0 * (1.0 / (1.0 - beta) + std::f64::consts::LN_2)
}

/// Sample size used for the hit-probability fact of
/// [`restricted_kl_triple`].
pub const RESTRICTED_KL_FACT_SAMPLE_SIZE: u64 = 50;

/// `q* = ((1−β)/2, (1−β)/2, β)`; `q1` matches `q*` on `x2` but starves `x0`;
/// `q2 = (½, ½, 0)` is perfect once `x2` is discarded but has zero
/// likelihood on it.
///
/// `m = None` picks the smallest admissible `M` plus one.
pub fn restricted_kl_triple(beta: f64, m: Option<f64>) -> Result<ConstructionBundle> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::BetaOutOfRange(beta));
    }
    let min_m = restricted_kl_min_m(beta);
    let m = m.unwrap_or(min_m + 1.0);
    if !(m > min_m && m.is_finite()) {
        return Err(invalid(format!("M must exceed 2(1/(1-beta) + ln 2) = {min_m}, got {m}")));
    }
    let domain = Domain::indexed(3)?;
    let half = (1.0 - beta) / 2.0;
    let e = (-m).exp();
    let qstar = three_point(&domain, [half, half, beta])?;
    let q1 = three_point(&domain, [(1.0 - beta) * e, (1.0 - beta) * (1.0 - e), beta])?;
    let q2 = three_point(&domain, [0.5, 0.5, 0.0])?;
    let n = RESTRICTED_KL_FACT_SAMPLE_SIZE;
    let facts = vec![
        fact(
            "restricted_kl(q*, q2) = 0",
            Quantity::RestrictedKl { p: role("qstar"), q: role("q2"), beta },
            0.0,
            BoundKind::Exact,
        ),
        fact(
            "restricted_kl(q*, q1) >= (1 - beta)(M/2 - ln 2)",
            Quantity::RestrictedKl { p: role("qstar"), q: role("q1"), beta },
            (1.0 - beta) * (m / 2.0 - std::f64::consts::LN_2),
            BoundKind::Lower,
        ),
        fact(
            format!("P[x2 in S], |S| = {n}, equals 1 - (1 - beta)^{n}"),
            Quantity::HitProbability { dist: role("qstar"), label: "x2".into(), m: n },
            1.0 - (1.0 - beta).powf(n as f64),
            BoundKind::Exact,
        ),
    ];
    Ok(ConstructionBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        recipe: Recipe::RestrictedKl,
        parameters: BTreeMap::from([("beta".into(), beta), ("M".into(), m)]),
        distributions: BTreeMap::from([(role("qstar"), qstar), (role("q1"), q1), (role("q2"), q2)]),
        test_function: None,
        facts,
    })
}

/// Builds a bundle from a recipe and a parameter table (the CLI's
/// `construct` input). Recognized names: `alpha`, `M`, `N`, `gamma`, `eta`,
/// `B`, `g2`, `c`, `eps`, `beta`.
pub fn build(recipe: Recipe, params: &BTreeMap<String, f64>) -> Result<ConstructionBundle> {
    let need = |name: &str| {
        params.get(name).copied().ok_or_else(|| invalid(format!("missing parameter `{name}`")))
    };
    let optional = |name: &str| params.get(name).copied();
    match recipe {
        Recipe::Renyi => renyi_pair(need("alpha")?, need("M")?),
        Recipe::Kl => kl_pair(need("M")?),
        Recipe::Coverage => coverage_triple(need("N")?, need("gamma")?, need("eta")?),
        Recipe::FixedTest => fixed_test_pair(need("B")?, optional("g2").unwrap_or(1.0)),
        Recipe::TvNll => tv_nll_triple(need("c")?, need("eps")?, optional("M")),
        Recipe::RestrictedKl => restricted_kl_triple(need("beta")?, optional("M")),
    }
}

const DELTA_CLOSE_ATTEMPTS: usize = 10_000;

/// A random `q` with `(1−Δ) q* ≤ q ≤ (1+Δ) q*` pointwise: each mass is
/// scaled by an independent factor from `[1−Δ, 1+Δ]`, renormalized, and the
/// draw is rejected until the band holds. The band shrinks by half after
/// every 10 000 rejections.
pub fn delta_close_pair(qstar: &DiscreteDistribution, delta: f64, seed: u64) -> Result<DiscreteDistribution> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(invalid(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spread = delta;
    loop {
        for _ in 0..DELTA_CLOSE_ATTEMPTS {
            let scaled: Vec<f64> =
                qstar.probs().iter().map(|&p| p * rng.random_range(1.0 - spread..=1.0 + spread)).collect();
            let total: f64 = scaled.iter().sum();
            let probs = scaled.into_iter().map(|p| p / total).collect();
            let q = DiscreteDistribution::with_domain(qstar.domain().clone(), probs)?;
            if check_delta_close(qstar, &q, delta)? {
                return Ok(q);
            }
        }
        spread /= 2.0;
        if spread < f64::EPSILON {
            return Ok(qstar.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{check_lower_bound, check_margin, hellinger_sq};

    fn assert_facts_hold(bundle: &ConstructionBundle) {
        for check in bundle.verify().unwrap() {
            assert!(check.holds, "{check:?}");
        }
    }

    #[test]
    fn renyi_pair_examples() {
        let b = renyi_pair(2.0, 4.0).unwrap();
        let eta = b.parameter("eta").unwrap();
        assert!((eta - (-2.0f64).exp()).abs() < 1e-15);
        let value = renyi(b.get("q2").unwrap(), b.get("q1").unwrap(), 2.0).unwrap();
        assert!((value - 2.1104).abs() < 5e-5);
        assert_facts_hold(&b);

        let b = renyi_pair(2.0, 40.0).unwrap();
        for q in b.distributions.values() {
            assert!(q.prob(1) + q.prob(2) < 4.1e-9);
        }
        assert_facts_hold(&b);
    }

    #[test]
    fn renyi_pair_rejections() {
        assert_eq!(renyi_pair(1.0, 4.0).unwrap_err(), Error::AlphaOutOfRange(1.0));
        assert!(renyi_pair(2.0, 1.5).is_err());
        assert!(renyi_pair(1.01, 2.0).is_err());
    }

    #[test]
    fn kl_pair_examples() {
        let b = kl_pair(10.0).unwrap();
        let expected = 2.0 * (1.0 - (-10.0f64).exp());
        assert!((kl(b.get("q1").unwrap(), b.get("q2").unwrap()).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 1.99991).abs() < 1e-5);
        assert_eq!(
            kl(b.get("q1").unwrap(), b.get("q2").unwrap()).unwrap(),
            kl(b.get("q2").unwrap(), b.get("q1").unwrap()).unwrap()
        );
        assert_facts_hold(&b);
        assert!(matches!(kl_pair(2.0), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn coverage_triple_examples() {
        let b = coverage_triple(2.0, 0.1, 0.001).unwrap();
        assert_facts_hold(&b);
        assert!(check_lower_bound(b.get("q2").unwrap(), 0.1));
        for alpha in [1e-9, 0.1, 1.0] {
            assert!(!check_margin(b.get("q2").unwrap(), b.get("q1").unwrap(), 2.0, alpha).unwrap());
        }
        assert!(coverage_triple(2.0, 0.1, 0.02).is_err());
        assert!(coverage_triple(1.5, 0.1, 0.001).is_err());
    }

    #[test]
    fn fixed_test_pair_examples() {
        let b = fixed_test_pair(100.0, 1.0).unwrap();
        assert_facts_hold(&b);
        let value = b.evaluate(&Quantity::FixedTest { p: "q1".into(), q: "q2".into() }).unwrap();
        assert!((value - 10.0).abs() < 1e-12);
        // (1 - 1/sqrt B)^m >= 1 - m/sqrt B for every m.
        let q1 = b.get("q1").unwrap();
        for m in [1, 5, 10, 50] {
            assert!(q1.prob(1).powi(m) >= 1.0 - m as f64 / 10.0);
        }
        assert!(fixed_test_pair(1.0, 1.0).is_err());
        assert!(fixed_test_pair(10.0, 0.0).is_err());
    }

    #[test]
    fn tv_nll_triple_examples() {
        let b = tv_nll_triple(1.0, 0.2, Some(25.0)).unwrap();
        assert!((b.parameter("p").unwrap() - 0.2).abs() < 1e-15);
        assert!((b.parameter("r").unwrap() - 0.5).abs() < 1e-15);
        assert_facts_hold(&b);

        let b = tv_nll_triple(2.0, 0.2, None).unwrap();
        assert!((b.parameter("p").unwrap() - 0.1).abs() < 1e-15);
        assert!((b.parameter("r").unwrap() - 0.55).abs() < 1e-15);
        assert!((tv_nll_min_m(2.0, 0.2) - 20.0 * 0.35f64.ln().abs()).abs() < 1e-12);
        assert!((b.parameter("M").unwrap() - 22.0).abs() < 0.01);
        assert_facts_hold(&b);
        assert!(tv_nll_triple(2.0, 0.2, Some(20.0)).is_err());
    }

    #[test]
    fn restricted_kl_triple_examples() {
        let b = restricted_kl_triple(0.25, Some(5.0)).unwrap();
        assert_facts_hold(&b);
        let hit = b
            .evaluate(&Quantity::HitProbability { dist: "qstar".into(), label: "x2".into(), m: 50 })
            .unwrap();
        assert!((hit - (1.0 - 0.75f64.powi(50))).abs() < 1e-15);
        assert!(hit > 0.9999994);
        assert_eq!(b.get("q1").unwrap().prob(2), b.get("qstar").unwrap().prob(2));
        assert!(restricted_kl_triple(0.25, Some(4.0)).is_err());
        assert_eq!(restricted_kl_triple(0.5, None).unwrap_err(), Error::BetaOutOfRange(0.5));
    }

    #[test]
    fn build_dispatches_by_name() {
        let params = BTreeMap::from([("alpha".to_string(), 2.0), ("M".to_string(), 4.0)]);
        let b = build("renyi".parse().unwrap(), &params).unwrap();
        assert_eq!(b, renyi_pair(2.0, 4.0).unwrap());
        assert!(build(Recipe::Kl, &BTreeMap::new()).is_err());
        assert!("bogus".parse::<Recipe>().is_err());
    }

    #[test]
    fn bundle_json_round_trip() {
        let b = fixed_test_pair(100.0, 1.0).unwrap();
        let text = serde_json::to_string_pretty(&b).unwrap();
        let back: ConstructionBundle = serde_json::from_str(&text).unwrap();
        assert_eq!(back, b);
        assert!(back.all_facts_hold().unwrap());
    }

    #[test]
    fn tampered_bundle_fails_verification() {
        let mut b = coverage_triple(2.0, 0.1, 0.001).unwrap();
        b.facts[2].value = 0.5;
        assert!(!b.all_facts_hold().unwrap());
    }

    #[test]
    fn delta_close_examples() {
        let qstar = DiscreteDistribution::uniform(Domain::indexed(10).unwrap());
        for seed in 0..20 {
            let q = delta_close_pair(&qstar, 0.005, seed).unwrap();
            assert!(check_delta_close(&qstar, &q, 0.005).unwrap());
            assert!(tv(&qstar, &q).unwrap() <= 0.0025);
        }
        let tiny = delta_close_pair(&qstar, 1e-14, 3).unwrap();
        assert!(tv(&qstar, &tiny).unwrap() < 1e-13);
        assert!(delta_close_pair(&qstar, 0.5, 0).is_err());
        assert!(hellinger_sq(&qstar, &delta_close_pair(&qstar, 0.1, 9).unwrap()).unwrap() > 0.0);
    }

    #[test]
    fn delta_close_on_skewed_truth() {
        let qstar = DiscreteDistribution::from_probs(vec![0.7, 0.2, 0.05, 0.05, 0.0]).unwrap();
        let q = delta_close_pair(&qstar, 0.05, 1).unwrap();
        assert!(check_delta_close(&qstar, &q, 0.05).unwrap());
        assert_eq!(q.prob(4), 0.0);
    }
}
