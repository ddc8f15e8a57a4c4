use super::{ensure_same_domain, DiscreteDistribution, SubsetMask};
use crate::error::{Error, Result};

/// Largest support searched exhaustively by [`restricted_kl`].
pub const RESTRICTED_KL_SUPPORT_CAP: usize = 22;

/// Relative slack on the inclusive likelihood-ratio threshold `q*/q >= N`.
pub(crate) const RATIO_THRESHOLD_SLACK: f64 = 1e-12;

/// Slack on the subset-mass constraint `p(E) >= 1 - beta`.
const MASS_CONSTRAINT_SLACK: f64 = 1e-12;

/// `q*(x) / q(x) >= n`, inclusive, with `+inf` when `q(x) = 0 < q*(x)`.
pub(crate) fn ratio_at_least(numerator: f64, denominator: f64, n: f64) -> bool {
    numerator >= n * denominator * (1.0 - RATIO_THRESHOLD_SLACK)
}

/// Total variation distance `½ Σ |p(x) − q(x)|`.
pub fn tv(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    ensure_same_domain(p.domain(), q.domain())?;
    let l1: f64 = p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * l1).min(1.0))
}

/// `KL(p ‖ q) = Σ p ln(p/q)`, `+inf` when `p` is not absolutely continuous
/// with respect to `q`.
pub fn kl(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    ensure_same_domain(p.domain(), q.domain())?;
    let mut total = 0.0;
    for (&a, &b) in p.probs().iter().zip(q.probs()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += a * (a / b).ln();
    }
    Ok(total.max(0.0))
}

/// Rényi divergence of order `alpha > 1`,
/// `(1/(α−1)) ln Σ p(x)^α q(x)^(1−α)`, where `p` plays the ground truth.
///
/// Evaluated in log space so that extreme ratios do not overflow before the
/// logarithm is taken.
pub fn renyi(p: &DiscreteDistribution, q: &DiscreteDistribution, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    ensure_same_domain(p.domain(), q.domain())?;
    let mut log_terms = Vec::with_capacity(p.len());
    for (&a, &b) in p.probs().iter().zip(q.probs()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        log_terms.push(alpha * a.ln() + (1.0 - alpha) * b.ln());
    }
    let max = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_terms.iter().map(|t| (t - max).exp()).sum();
    Ok(((max + sum.ln()) / (alpha - 1.0)).max(0.0))
}

/// Squared Hellinger distance `1 − Σ √(p q)`.
pub fn hellinger_sq(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    ensure_same_domain(p.domain(), q.domain())?;
    let affinity: f64 = p.probs().iter().zip(q.probs()).map(|(a, b)| (a * b).sqrt()).sum();
    Ok((1.0 - affinity).clamp(0.0, 1.0))
}

/// Coverage profile `P_{x∼q*}[q*(x)/q(x) ≥ N]` of model `q`.
///
/// The threshold is inclusive and a point with `q(x) = 0 < q*(x)` has ratio
/// `+inf`, so it always counts.
pub fn coverage_profile(q: &DiscreteDistribution, qstar: &DiscreteDistribution, n: f64) -> Result<f64> {
    if n.is_nan() || n < 1.0 {
        return Err(Error::InvalidParameters(format!("coverage threshold N must be >= 1, got {n}")));
    }
    ensure_same_domain(q.domain(), qstar.domain())?;
    Ok(qstar
        .probs()
        .iter()
        .zip(q.probs())
        .filter(|(&s, &m)| s > 0.0 && ratio_at_least(s, m, n))
        .map(|(&s, _)| s)
        .sum())
}

/// KL divergence between the conditionals `p(·|E)` and `q(·|E)`.
pub fn kl_restricted_to(p: &DiscreteDistribution, q: &DiscreteDistribution, subset: &SubsetMask) -> Result<f64> {
    ensure_same_domain(p.domain(), q.domain())?;
    ensure_same_domain(p.domain(), subset.domain())?;
    let members = subset.indices();
    let p_mass: f64 = members.iter().map(|&i| p.prob(i)).sum();
    if p_mass <= 0.0 {
        return Err(Error::InvalidParameters("restriction set has zero mass under p".into()));
    }
    let mut weighted = 0.0;
    let mut q_mass = 0.0;
    for &i in &members {
        let (a, b) = (p.prob(i), q.prob(i));
        q_mass += b;
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        weighted += a * (a / b).ln();
    }
    Ok(conditional_kl(weighted, p_mass, q_mass))
}

// KL(p_E ‖ q_E) = (1/P) Σ_E p ln(p/q) − ln P + ln Q.
fn conditional_kl(weighted: f64, p_mass: f64, q_mass: f64) -> f64 {
    if weighted.is_infinite() {
        return f64::INFINITY;
    }
    (weighted / p_mass - p_mass.ln() + q_mass.ln()).max(0.0)
}

/// β-restricted KL: the minimum of [`kl_restricted_to`] over every
/// `E ⊆ supp(p)` with `p(E) ≥ 1 − β`.
pub fn restricted_kl(p: &DiscreteDistribution, q: &DiscreteDistribution, beta: f64) -> Result<f64> {
    restricted_kl_with_witness(p, q, beta).map(|(value, _)| value)
}

/// [`restricted_kl`] together with the minimizing subset. Among equal values
/// the subset with the smallest bitmask over the support order wins.
pub fn restricted_kl_with_witness(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    beta: f64,
) -> Result<(f64, SubsetMask)> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::BetaOutOfRange(beta));
    }
    ensure_same_domain(p.domain(), q.domain())?;
    let support = p.support();
    if support.len() > RESTRICTED_KL_SUPPORT_CAP {
        return Err(Error::SupportTooLarge { size: support.len(), cap: RESTRICTED_KL_SUPPORT_CAP });
    }
    let p_mass: Vec<f64> = support.iter().map(|&i| p.prob(i)).collect();
    let q_mass: Vec<f64> = support.iter().map(|&i| q.prob(i)).collect();
    let terms: Vec<f64> = p_mass
        .iter()
        .zip(&q_mass)
        .map(|(&a, &b)| if b == 0.0 { f64::INFINITY } else { a * (a / b).ln() })
        .collect();

    let required = 1.0 - beta - MASS_CONSTRAINT_SLACK;
    let mut best = (f64::INFINITY, None::<u32>);
    for mask in 1u32..(1u32 << support.len()) {
        let (mut pe, mut qe, mut weighted) = (0.0, 0.0, 0.0);
        let mut bits = mask;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            pe += p_mass[j];
            qe += q_mass[j];
            weighted += terms[j];
            bits &= bits - 1;
        }
        if pe < required {
            continue;
        }
        let value = conditional_kl(weighted, pe, qe);
        if best.1.is_none() || value < best.0 {
            best = (value, Some(mask));
        }
    }
    // supp(p) itself always has mass 1 >= 1 - beta.
    let mask = best.1.expect("full support is always feasible");
    let members: Vec<usize> = (0..support.len()).filter(|&j| mask & (1 << j) != 0).map(|j| support[j]).collect();
    Ok((best.0, SubsetMask::from_indices(p.domain().clone(), &members)?))
}

/// Every point in `supp(q*)` has mass at least `gamma`.
pub fn check_lower_bound(qstar: &DiscreteDistribution, gamma: f64) -> bool {
    qstar.probs().iter().filter(|&&p| p > 0.0).all(|&p| p >= gamma)
}

/// `(q*, q)` have an `(N, alpha)` margin: `|q*(x)/q(x) − N| ≥ alpha` on
/// `supp(q*)`. An infinite ratio satisfies the margin.
pub fn check_margin(qstar: &DiscreteDistribution, q: &DiscreteDistribution, n: f64, alpha: f64) -> Result<bool> {
    ensure_same_domain(qstar.domain(), q.domain())?;
    Ok(qstar
        .probs()
        .iter()
        .zip(q.probs())
        .filter(|(&s, _)| s > 0.0)
        .all(|(&s, &m)| m == 0.0 || (s / m - n).abs() >= alpha))
}

/// `(1 − Δ) q*(x) ≤ q(x) ≤ (1 + Δ) q*(x)` for every point.
pub fn check_delta_close(qstar: &DiscreteDistribution, q: &DiscreteDistribution, delta: f64) -> Result<bool> {
    ensure_same_domain(qstar.domain(), q.domain())?;
    Ok(qstar
        .probs()
        .iter()
        .zip(q.probs())
        .all(|(&s, &m)| (1.0 - delta) * s <= m && m <= (1.0 + delta) * s))
}
