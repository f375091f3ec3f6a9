use crate::special::normal_two_sided;
use crate::{Result, StatsError};

/// Below this smaller-sample size the p-value comes from the exact
/// permutation distribution of U; at or above it, from the normal
/// approximation with tie and continuity corrections.
pub const EXACT_THRESHOLD: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// Pairs with `x > y`, ties counted as one half.
    pub u_x: f64,
    pub u_y: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Mann-Whitney U test for two independent samples.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(StatsError::InvalidArgument("NaN in sample".into()));
    }
    let (n1, n2) = (x.len(), y.len());
    let doubled = doubled_midranks(x, y);
    let rank_sum_x2: u64 = doubled[..n1].iter().sum();
    // 2 * U_x = 2 * R_x - n1 (n1 + 1)
    let u_x = (rank_sum_x2 as f64 - (n1 * (n1 + 1)) as f64) / 2.0;
    let u_y = (n1 * n2) as f64 - u_x;

    let exact = n1.min(n2) < EXACT_THRESHOLD;
    let p = if exact {
        exact_p(&doubled, n1, rank_sum_x2)
    } else {
        normal_p(&doubled, n1, n2, u_x)
    };
    Ok(MannWhitney { u_x, u_y, p, exact })
}

/// Doubled midranks (always integers) of the pooled sample, x first then y.
fn doubled_midranks(x: &[f64], y: &[f64]) -> Vec<u64> {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));

    let mut ranks = vec![0u64; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j share the midrank (i + 1 + j) / 2
        let r2 = (i + 1 + j) as u64;
        for &k in &order[i..j] {
            ranks[k] = r2;
        }
        i = j;
    }
    ranks
}

fn tie_groups(doubled: &[u64]) -> Vec<usize> {
    let mut sorted = doubled.to_vec();
    sorted.sort_unstable();
    sorted
        .chunk_by(|a, b| a == b)
        .map(|c| c.len())
        .filter(|&t| t > 1)
        .collect()
}

fn normal_p(doubled: &[u64], n1: usize, n2: usize, u_x: f64) -> f64 {
    let n = (n1 + n2) as f64;
    let (n1, n2) = (n1 as f64, n2 as f64);
    let ties: f64 = tie_groups(doubled)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let mu = n1 * n2 / 2.0;
    let z = ((u_x - mu).abs() - 0.5).max(0.0) / var.sqrt();
    normal_two_sided(z).min(1.0)
}

/// Exact two-sided p from the permutation distribution of the doubled
/// rank sum of the first `n1` observations. Ties are handled by enumerating
/// over the observed midranks.
fn exact_p(doubled: &[u64], n1: usize, observed: u64) -> f64 {
    let n = doubled.len();
    // run the recursion on the smaller group; the null distribution of the
    // other group's rank sum is the mirror image
    let (k, observed) = if n1 <= n - n1 {
        (n1, observed)
    } else {
        let total: u64 = doubled.iter().sum();
        (n - n1, total - observed)
    };
    let max_sum: u64 = {
        let mut r = doubled.to_vec();
        r.sort_unstable();
        r[n - k..].iter().sum()
    };
    let width = max_sum as usize + 1;

    // ways[j][s]: number of j-subsets of the elements seen so far whose
    // doubled ranks sum to s
    let mut ways = vec![vec![0f64; width]; k + 1];
    ways[0][0] = 1.0;
    for &r in doubled {
        let r = r as usize;
        for j in (1..=k).rev() {
            let (lo, hi) = ways.split_at_mut(j);
            let prev = &lo[j - 1];
            let cur = &mut hi[0];
            for s in (r..width).rev() {
                let add = prev[s - r];
                if add != 0.0 {
                    cur[s] += add;
                }
            }
        }
    }
    let dist = &ways[k];
    let total: f64 = dist.iter().sum();
    let obs = observed as usize;
    let lower: f64 = dist[..=obs].iter().sum::<f64>() / total;
    let upper: f64 = dist[obs..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_separation() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u_x, 0.0);
        assert_eq!(r.u_y, 9.0);
        assert!(r.exact);
        // two of the 20 equally likely splits are at least this extreme
        assert!((r.p - 0.1).abs() < 1e-12);
    }

    #[test]
    fn interleaved() {
        let r = mann_whitney_u(&[1.0, 3.0, 5.0], &[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(r.u_x, 3.0);
        // scipy.stats.mannwhitneyu(method="exact")
        assert!((r.p - 0.7).abs() < 1e-12);
    }

    #[test]
    fn exact_against_reference() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0]).unwrap();
        assert!((r.p - 0.057_142_857_142_857_14).abs() < 1e-12);
        let r = mann_whitney_u(&[1.0, 4.0, 2.0, 9.0, 7.0], &[3.0, 5.0, 6.0, 8.0, 10.0, 11.0]).unwrap();
        assert_eq!(r.u_x, 8.0);
        assert!((r.p - 0.246_753_246_753_246_72).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_against_reference() {
        // scipy.stats.mannwhitneyu(method="asymptotic", use_continuity=True)
        let a: Vec<f64> = (1..=10).map(f64::from).collect();
        let b: Vec<f64> = (1..=12).map(|v| f64::from(v) + 3.5).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert!(!r.exact);
        assert_eq!(r.u_x, 21.0);
        assert!((r.p - 0.011_129_227_614_007_952).abs() < 1e-9);

        let a = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let b = [2.0, 3.0, 4.0, 4.0, 5.0, 6.0, 6.0, 7.0, 8.0, 9.0, 9.0];
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.u_x, 26.5);
        assert!((r.p - 0.046_822_506_878_053_45).abs() < 1e-9);
    }

    #[test]
    fn all_tied() {
        let r = mann_whitney_u(&[2.0; 4], &[2.0; 5]).unwrap();
        assert_eq!(r.u_x, 10.0);
        assert_eq!(r.p, 1.0);
        let r = mann_whitney_u(&[2.0; 9], &[2.0; 8]).unwrap();
        assert_eq!(r.u_x, 36.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn empty_input() {
        assert_eq!(mann_whitney_u(&[], &[1.0]), Err(StatsError::EmptyInput));
    }
}
