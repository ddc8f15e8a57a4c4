//! Tabular families of `[0, 1]`-valued test functions, exact IPM suprema,
//! and brute-force VC / γ-fat-shattering dimension search.
//!
//! Families are explicit matrices (rows = member functions, columns = domain
//! points), which makes every supremum over the family an exact finite
//! maximum. Exponential searches are capped and report
//! [`Error::DomainTooLarge`] / [`Error::TooManyFunctions`] instead of
//! running away.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::distributions::{ensure_same_domain, DiscreteDistribution, Domain};
use crate::error::{Error, Result};

/// Largest domain for which `all_binary_family` / `no_taxonomy_family` are
/// materialized (2^16 rows).
pub const MAX_BINARY_POINTS: usize = 16;
/// Largest domain searched by [`vc_dimension`].
pub const VC_DOMAIN_CAP: usize = 24;
/// Largest domain searched by [`fat_shattering_dim`].
pub const FAT_DOMAIN_CAP: usize = 16;

const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "FamilyRepr", try_from = "FamilyRepr")]
pub struct FunctionFamily {
    domain: Domain,
    rows: Vec<Vec<f64>>,
    is_binary: bool,
}

#[derive(Serialize, Deserialize)]
struct FamilyRepr {
    labels: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl From<FunctionFamily> for FamilyRepr {
    fn from(f: FunctionFamily) -> Self {
        FamilyRepr { labels: f.domain.labels().to_vec(), rows: f.rows }
    }
}

impl TryFrom<FamilyRepr> for FunctionFamily {
    type Error = Error;

    fn try_from(repr: FamilyRepr) -> Result<Self> {
        FunctionFamily::new(Domain::new(repr.labels)?, repr.rows)
    }
}

impl FunctionFamily {
    pub fn new(domain: Domain, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(rows.len());
        let mut is_binary = true;
        for (r, row) in rows.iter().enumerate() {
            if row.len() != domain.len() {
                return Err(Error::LengthMismatch { labels: domain.len(), values: row.len() });
            }
            for (c, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::EntryOutOfRange { row: r, col: c, value: v });
                }
                is_binary &= v == 0.0 || v == 1.0;
            }
            // +0.0 and -0.0 are the same test value.
            let key = row.iter().map(|v| (v + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::DuplicateRow(r));
            }
        }
        Ok(FunctionFamily { domain, rows, is_binary })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.rows[index]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.is_binary
    }

    /// Adds members, skipping rows already present.
    pub fn extended(&self, extra: Vec<Vec<f64>>) -> Result<Self> {
        let mut rows = self.rows.clone();
        for row in extra {
            if !rows.contains(&row) {
                rows.push(row);
            }
        }
        FunctionFamily::new(self.domain.clone(), rows)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpmResult {
    pub value: f64,
    pub witness_index: usize,
}

/// `d_F(p, q) = max_φ |E_p φ − E_q φ|`, with the lowest maximizing row as
/// witness.
pub fn ipm_exact(p: &DiscreteDistribution, q: &DiscreteDistribution, family: &FunctionFamily) -> Result<IpmResult> {
    ensure_same_domain(p.domain(), q.domain())?;
    ensure_same_domain(p.domain(), family.domain())?;
    let diff: Vec<f64> = p.probs().iter().zip(q.probs()).map(|(a, b)| a - b).collect();
    let mut best = IpmResult { value: -1.0, witness_index: 0 };
    for (index, row) in family.rows.iter().enumerate() {
        let gap = row.iter().zip(&diff).map(|(f, d)| f * d).sum::<f64>().abs();
        if gap > best.value {
            best = IpmResult { value: gap, witness_index: index };
        }
    }
    Ok(best)
}

fn binary_rows(n: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..1usize << n)
        .map(|code| (0..n).map(|j| if code >> (n - 1 - j) & 1 == 1 { scale } else { 0.0 }).collect())
        .collect()
}

/// Every `{0,1}`-valued function on the domain, in lexicographic row order.
pub fn all_binary_family(domain: Domain) -> Result<FunctionFamily> {
    if domain.len() > MAX_BINARY_POINTS {
        return Err(Error::TooManyFunctions { n: domain.len(), cap: MAX_BINARY_POINTS });
    }
    let rows = binary_rows(domain.len(), 1.0);
    FunctionFamily::new(domain, rows)
}

/// `{1[x ≥ t]}` over the domain order, including the all-zero and all-one
/// functions: `n + 1` rows in lexicographic order.
pub fn threshold_family(domain: Domain) -> Result<FunctionFamily> {
    let n = domain.len();
    let rows = (0..=n).rev().map(|t| (0..n).map(|j| if j >= t { 1.0 } else { 0.0 }).collect()).collect();
    FunctionFamily::new(domain, rows)
}

/// Point indicators `{1_x}` in lexicographic row order (last point first).
pub fn singleton_family(domain: Domain) -> Result<FunctionFamily> {
    let n = domain.len();
    let rows = (0..n).rev().map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    FunctionFamily::new(domain, rows)
}

/// Indicators of intervals `[a, b]` of the domain order together with their
/// complements (and the empty / full sets). VC dimension 3 once the domain
/// has at least 4 points.
pub fn interval_family(domain: Domain) -> Result<FunctionFamily> {
    let n = domain.len();
    let mut rows: Vec<Vec<f64>> = vec![vec![0.0; n]];
    for a in 0..n {
        for b in a..n {
            let inside: Vec<f64> = (0..n).map(|j| if (a..=b).contains(&j) { 1.0 } else { 0.0 }).collect();
            let outside = inside.iter().map(|v| 1.0 - v).collect();
            rows.push(inside);
            rows.push(outside);
        }
    }
    rows.sort_by(|x, y| x.partial_cmp(y).expect("finite entries"));
    rows.dedup();
    FunctionFamily::new(domain, rows)
}

/// One block of the scaled family used to show there is no finite taxonomy
/// of IPM sample complexities: `{(1/k)·h : h ∈ {0,1}^{n_k}}` on a fresh
/// `n_k`-point domain labelled `k{k}_{i}`.
pub fn no_taxonomy_family(k: usize, n_k: usize) -> Result<FunctionFamily> {
    if k == 0 || n_k == 0 {
        return Err(Error::InvalidParameters("k and n_k must be at least 1".into()));
    }
    if n_k > MAX_BINARY_POINTS {
        return Err(Error::TooManyFunctions { n: n_k, cap: MAX_BINARY_POINTS });
    }
    let domain = Domain::new((0..n_k).map(|i| format!("k{k}_{i}")).collect())?;
    FunctionFamily::new(domain, binary_rows(n_k, 1.0 / k as f64))
}

/// Disjoint union of several [`no_taxonomy_family`] blocks: each member is
/// `(1/k)·h` on block `k` and zero elsewhere. The all-zero function appears
/// once.
pub fn no_taxonomy_union(blocks: &[(usize, usize)]) -> Result<FunctionFamily> {
    let parts = blocks.iter().map(|&(k, n)| no_taxonomy_family(k, n)).collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = parts.iter().flat_map(|f| f.domain.labels().iter().cloned()).collect();
    let width = labels.len();
    let mut rows = Vec::new();
    let mut offset = 0;
    for part in &parts {
        for row in &part.rows {
            let mut full = vec![0.0; width];
            full[offset..offset + row.len()].copy_from_slice(row);
            if !rows.contains(&full) {
                rows.push(full);
            }
        }
        offset += part.domain.len();
    }
    FunctionFamily::new(Domain::new(labels)?, rows)
}

/// Size of the largest subset shattered by a binary family.
pub fn vc_dimension(family: &FunctionFamily) -> Result<usize> {
    if !family.is_binary {
        return Err(Error::NotBinary);
    }
    let n = family.domain.len();
    if n > VC_DOMAIN_CAP {
        return Err(Error::DomainTooLarge { size: n, cap: VC_DOMAIN_CAP });
    }
    let masks: Vec<u32> = family
        .rows
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, &v)| v == 1.0).fold(0u32, |m, (j, _)| m | 1 << j))
        .collect();

    let shattered = |set: u32| -> bool {
        let positions: Vec<u32> = (0..n as u32).filter(|j| set >> j & 1 == 1).collect();
        let mut hit = vec![false; 1 << positions.len()];
        let mut distinct = 0;
        for &m in &masks {
            let code = positions.iter().enumerate().fold(0usize, |c, (b, &j)| c | ((m >> j & 1) as usize) << b);
            if !hit[code] {
                hit[code] = true;
                distinct += 1;
                if distinct == hit.len() {
                    return true;
                }
            }
        }
        false
    };

    // Shattered sets are closed under taking subsets, so every shattered set
    // of size d + 1 extends a shattered set of size d by a larger element.
    let mut level = vec![0u32];
    let mut dim = 0;
    while (1usize << (dim + 1)) <= masks.len() {
        let mut next = Vec::new();
        for &set in &level {
            let start = if set == 0 { 0 } else { 32 - set.leading_zeros() as usize };
            for x in start..n {
                let candidate = set | 1 << x;
                if shattered(candidate) {
                    next.push(candidate);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        dim += 1;
        level = next;
    }
    Ok(dim)
}

/// Size of the largest γ-fat-shattered subset.
///
/// Candidate thresholds per point are the attained values and the midpoints
/// of attained pairs. This is complete: if some `r` works with witness rows
/// whose low values peak at `a` and high values bottom out at `b`, then
/// `b − a ≥ 2γ` and `(a + b)/2` works with the same witnesses.
pub fn fat_shattering_dim(family: &FunctionFamily, gamma: f64) -> Result<usize> {
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    let n = family.domain.len();
    if n > FAT_DOMAIN_CAP {
        return Err(Error::DomainTooLarge { size: n, cap: FAT_DOMAIN_CAP });
    }
    let options: Vec<Vec<ThresholdOption>> = (0..n).map(|x| threshold_options(family, x, gamma)).collect();

    // A config pairs each chosen point (ascending) with one of its options.
    let mut level: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    let mut dim = 0;
    while (1usize << (dim + 1)) <= family.len() {
        let mut next = Vec::new();
        for config in &level {
            let start = config.last().map_or(0, |&(x, _)| x + 1);
            for x in start..n {
                for o in 0..options[x].len() {
                    let mut candidate = config.clone();
                    candidate.push((x, o));
                    if gamma_shattered(family.len(), &options, &candidate) {
                        next.push(candidate);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        dim += 1;
        level = next;
    }
    Ok(dim)
}

/// Per-row classification of one point against one threshold.
struct ThresholdOption {
    high: Vec<bool>,
    low: Vec<bool>,
}

fn threshold_options(family: &FunctionFamily, x: usize, gamma: f64) -> Vec<ThresholdOption> {
    let mut values: Vec<f64> = family.rows.iter().map(|r| r[x]).collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite entries"));
    values.dedup();
    let mut candidates = values.clone();
    for (i, &a) in values.iter().enumerate() {
        for &b in &values[i + 1..] {
            candidates.push(0.5 * (a + b));
        }
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    candidates.dedup();

    candidates
        .into_iter()
        .filter_map(|r| {
            let high: Vec<bool> = family.rows.iter().map(|row| row[x] >= r + gamma - THRESHOLD_SLACK).collect();
            let low: Vec<bool> = family.rows.iter().map(|row| row[x] <= r - gamma + THRESHOLD_SLACK).collect();
            (high.contains(&true) && low.contains(&true)).then_some(ThresholdOption { high, low })
        })
        .collect()
}

fn gamma_shattered(rows: usize, options: &[Vec<ThresholdOption>], config: &[(usize, usize)]) -> bool {
    let mut hit = vec![false; 1 << config.len()];
    let mut distinct = 0;
    'rows: for r in 0..rows {
        let mut code = 0usize;
        for (b, &(x, o)) in config.iter().enumerate() {
            let opt = &options[x][o];
            if opt.high[r] {
                code |= 1 << b;
            } else if !opt.low[r] {
                continue 'rows;
            }
        }
        if !hit[code] {
            hit[code] = true;
            distinct += 1;
            if distinct == hit.len() {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain(n: usize) -> Domain {
        Domain::indexed(n).unwrap()
    }

    #[test]
    fn constant_family_has_zero_ipm() {
        let f = FunctionFamily::new(domain(3), vec![vec![1.0; 3]]).unwrap();
        let p = DiscreteDistribution::with_domain(domain(3), vec![0.7, 0.2, 0.1]).unwrap();
        let q = DiscreteDistribution::with_domain(domain(3), vec![0.1, 0.1, 0.8]).unwrap();
        assert!(ipm_exact(&p, &q, &f).unwrap().value < 1e-15);
    }

    #[test]
    fn singleton_ipm_is_max_coordinate_gap() {
        let d = domain(4);
        let p = DiscreteDistribution::with_domain(d.clone(), vec![0.4, 0.1, 0.3, 0.2]).unwrap();
        let q = DiscreteDistribution::with_domain(d.clone(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let f = singleton_family(d).unwrap();
        let r = ipm_exact(&p, &q, &f).unwrap();
        assert!((r.value - 0.3).abs() < 1e-15);
        // Rows run from the last point backwards; point 0 is the last row.
        assert_eq!(r.witness_index, 3);
    }

    #[test]
    fn witness_is_lowest_maximizing_row() {
        let d = domain(2);
        let p = DiscreteDistribution::with_domain(d.clone(), vec![1.0, 0.0]).unwrap();
        let q = DiscreteDistribution::with_domain(d.clone(), vec![0.0, 1.0]).unwrap();
        // Rows 00, 01, 10, 11: both 01 and 10 reach 1.
        let r = ipm_exact(&p, &q, &all_binary_family(d).unwrap()).unwrap();
        assert_eq!(r, IpmResult { value: 1.0, witness_index: 1 });
    }

    #[test]
    fn family_validation() {
        assert_eq!(FunctionFamily::new(domain(2), vec![]), Err(Error::EmptyFamily));
        assert!(matches!(
            FunctionFamily::new(domain(2), vec![vec![0.0, 1.5]]),
            Err(Error::EntryOutOfRange { row: 0, col: 1, .. })
        ));
        assert_eq!(
            FunctionFamily::new(domain(2), vec![vec![0.0, 1.0], vec![0.0, 1.0]]),
            Err(Error::DuplicateRow(1))
        );
        assert!(!FunctionFamily::new(domain(2), vec![vec![0.5, 1.0]]).unwrap().is_binary());
    }

    #[test]
    fn builders() {
        let all = all_binary_family(domain(2)).unwrap();
        assert_eq!(all.rows(), &[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        let thresholds = threshold_family(domain(5)).unwrap();
        assert_eq!(thresholds.len(), 6);
        assert_eq!(thresholds.row(0), &[0.0; 5]);
        assert_eq!(thresholds.row(1), &[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(thresholds.row(5), &[1.0; 5]);
        assert_eq!(singleton_family(domain(7)).unwrap().len(), 7);
        assert!(matches!(all_binary_family(domain(17)), Err(Error::TooManyFunctions { .. })));
    }

    #[test]
    fn no_taxonomy_blocks() {
        let k1 = no_taxonomy_family(1, 2).unwrap();
        assert_eq!(k1.rows(), all_binary_family(k1.domain().clone()).unwrap().rows());
        let k2 = no_taxonomy_family(2, 3).unwrap();
        assert_eq!(k2.len(), 8);
        assert!(k2.rows().iter().flatten().all(|&v| v == 0.0 || v == 0.5));
        let k4 = no_taxonomy_family(4, 1).unwrap();
        assert_eq!(k4.rows(), &[vec![0.0], vec![0.25]]);
        assert_eq!(fat_shattering_dim(&k4, 0.2).unwrap(), 0);
        assert!(matches!(no_taxonomy_family(2, 17), Err(Error::TooManyFunctions { .. })));
    }

    #[test]
    fn vc_examples() {
        for n in 1..=5 {
            assert_eq!(vc_dimension(&all_binary_family(domain(n)).unwrap()).unwrap(), n);
        }
        assert_eq!(vc_dimension(&threshold_family(domain(5)).unwrap()).unwrap(), 1);
        let single = FunctionFamily::new(domain(4), vec![vec![0.0, 1.0, 1.0, 0.0]]).unwrap();
        assert_eq!(vc_dimension(&single).unwrap(), 0);
        assert_eq!(vc_dimension(&singleton_family(domain(6)).unwrap()).unwrap(), 1);
        assert_eq!(vc_dimension(&interval_family(domain(8)).unwrap()).unwrap(), 3);
    }

    #[test]
    fn vc_errors() {
        let half = FunctionFamily::new(domain(2), vec![vec![0.5, 0.0]]).unwrap();
        assert_eq!(vc_dimension(&half), Err(Error::NotBinary));
        let wide = threshold_family(domain(25)).unwrap();
        assert_eq!(vc_dimension(&wide), Err(Error::DomainTooLarge { size: 25, cap: VC_DOMAIN_CAP }));
    }

    #[test]
    fn fat_shattering_examples() {
        let k2 = no_taxonomy_family(2, 3).unwrap();
        assert_eq!(fat_shattering_dim(&k2, 0.2).unwrap(), 3);
        assert_eq!(fat_shattering_dim(&k2, 0.25).unwrap(), 3);
        assert_eq!(fat_shattering_dim(&k2, 0.3).unwrap(), 0);
        for n in 1..=4 {
            assert_eq!(fat_shattering_dim(&all_binary_family(domain(n)).unwrap(), 0.4).unwrap(), n);
        }
        let constant = FunctionFamily::new(domain(3), vec![vec![0.3; 3]]).unwrap();
        assert_eq!(fat_shattering_dim(&constant, 0.01).unwrap(), 0);
        assert_eq!(fat_shattering_dim(&constant, 0.0), Err(Error::GammaOutOfRange(0.0)));
        assert_eq!(fat_shattering_dim(&constant, 0.6), Err(Error::GammaOutOfRange(0.6)));
    }

    #[test]
    fn fat_shattering_thirds() {
        let k3 = no_taxonomy_family(3, 2).unwrap();
        assert_eq!(fat_shattering_dim(&k3, 1.0 / 6.0).unwrap(), 2);
        assert_eq!(fat_shattering_dim(&k3, 1.0 / 6.0 + 1e-9).unwrap(), 0);
    }

    #[test]
    fn union_dimension_is_the_widest_coarse_block() {
        let f = no_taxonomy_union(&[(1, 2), (2, 3), (4, 2)]).unwrap();
        assert_eq!(f.domain().len(), 7);
        assert_eq!(f.len(), 4 + 8 + 4 - 2);
        // Members live on one block each, so no set straddling two blocks
        // can take the all-high labeling.
        assert_eq!(fat_shattering_dim(&f, 0.1).unwrap(), 3);
        assert_eq!(fat_shattering_dim(&f, 0.3).unwrap(), 2);
        let only_fine = no_taxonomy_union(&[(4, 3), (8, 2)]).unwrap();
        assert_eq!(fat_shattering_dim(&only_fine, 0.1).unwrap(), 3);
        assert_eq!(fat_shattering_dim(&only_fine, 0.13).unwrap(), 0);
    }

    #[test]
    fn json_round_trip() {
        let f = no_taxonomy_family(2, 2).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let back: FunctionFamily = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
    }
}
