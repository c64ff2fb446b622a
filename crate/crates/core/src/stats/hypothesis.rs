use super::special::{normal_two_sided, student_t_two_sided};
use super::StatsError;

/// Largest sample handled by exact enumeration in [`signed_rank_test`].
pub const EXACT_SIGNED_RANK_MAX: usize = 20;

fn ln_choose(n: u64, k: u64) -> f64 {
    let lf = |m: u64| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    lf(n) - lf(k) - lf(n - k)
}

/// Exact two-sided sign test on win counts (ties already dropped).
pub fn sign_test(wins_a: u64, wins_b: u64) -> Result<f64, StatsError> {
    let n = wins_a + wins_b;
    if n == 0 {
        return Err(StatsError::Empty);
    }
    let k = wins_a.min(wins_b);
    let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
    let terms: Vec<f64> = (0..=k).map(|i| ln_choose(n, i) + ln_half_n).collect();
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tail = top.exp() * terms.iter().map(|t| (t - top).exp()).sum::<f64>();
    Ok((2.0 * tail).min(1.0))
}

/// Average ranks (1-based) of `values`, doubled so ties stay integral.
fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // Average of ranks i+1..=j+1, doubled.
        let r = (i + 1 + j + 1) as u64;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Signed-rank statistic prepared from differences: doubled ranks of
/// `|d|` and the doubled positive-rank sum.
#[derive(Debug, Clone)]
pub struct RankedDiffs {
    pub ranks: Vec<u64>,
    pub w_plus: u64,
}

pub fn rank_diffs(diffs: &[f64]) -> Result<RankedDiffs, StatsError> {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nz.is_empty() {
        return Err(StatsError::AllZeroDiffs);
    }
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let w_plus = nz
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    Ok(RankedDiffs { ranks, w_plus })
}

/// Two-sided Wilcoxon signed-rank test. Zeros are dropped; tied `|d|`
/// share average ranks. Exact for up to 20 nonzero differences, normal
/// approximation with tie and continuity correction above.
pub fn signed_rank_test(diffs: &[f64]) -> Result<f64, StatsError> {
    let rd = rank_diffs(diffs)?;
    let n = rd.ranks.len();
    if n <= EXACT_SIGNED_RANK_MAX {
        return Ok(exact_signed_rank_p(&rd));
    }
    let nf = n as f64;
    let w = rd.w_plus as f64 / 2.0;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = rd.ranks.clone();
    sorted.sort_unstable();
    for g in sorted.chunk_by(|a, b| a == b) {
        let t = g.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(normal_two_sided(z))
}

/// Exact null distribution of the doubled statistic by subset-sum counting.
fn exact_signed_rank_p(rd: &RankedDiffs) -> f64 {
    let total: u64 = rd.ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in &rd.ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let w = rd.w_plus as usize;
    let le: u64 = counts[..=w].iter().sum();
    let ge: u64 = counts[w..].iter().sum();
    let all = 2f64.powi(rd.ranks.len() as i32);
    (2.0 * le.min(ge) as f64 / all).min(1.0)
}

/// Two-sided paired t-test on differences.
pub fn paired_t_test(diffs: &[f64]) -> Result<f64, StatsError> {
    let n = diffs.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let t = mean * nf.sqrt() / sd;
    Ok(student_t_two_sided(t, nf - 1.0))
}

#[cfg(test)]
mod unit {
    use super::*;
    use proptest::prelude::*;

    fn binom_oracle(a: u64, b: u64) -> f64 {
        let n = a + b;
        let k = a.min(b);
        let mut c: u128 = 1;
        let mut sum: u128 = 0;
        for i in 0..=k {
            if i > 0 {
                c = c * (n - i + 1) as u128 / i as u128;
            }
            sum += c;
        }
        (2.0 * sum as f64 / 2f64.powi(n as i32)).min(1.0)
    }

    #[test]
    fn sign_examples() {
        assert!((sign_test(10, 0).unwrap() - 2.0 / 1024.0).abs() < 1e-15);
        assert_eq!(sign_test(5, 5).unwrap(), 1.0);
        assert!((sign_test(8, 2).unwrap() - 0.109_375).abs() < 1e-15);
        assert_eq!(sign_test(0, 0), Err(StatsError::Empty));
    }

    #[test]
    fn sign_matches_binomial_sums() {
        for n in 1..=25u64 {
            for a in 0..=n {
                let p = sign_test(a, n - a).unwrap();
                assert!((p - binom_oracle(a, n - a)).abs() <= 1e-13, "{a}/{n}");
            }
        }
    }

    fn brute_signed_rank(diffs: &[f64]) -> f64 {
        let rd = rank_diffs(diffs).unwrap();
        let n = rd.ranks.len();
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            let w: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| rd.ranks[i]).sum();
            le += (w <= rd.w_plus) as u64;
            ge += (w >= rd.w_plus) as u64;
        }
        (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
    }

    #[test]
    fn signed_rank_examples() {
        assert!((signed_rank_test(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap() - 0.0625).abs() < 1e-15);
        assert_eq!(signed_rank_test(&[1.0, -1.0, 2.0, -2.0, 3.5, -3.5]).unwrap(), 1.0);
        assert_eq!(signed_rank_test(&[0.0, 0.0]), Err(StatsError::AllZeroDiffs));
    }

    proptest! {
        #[test]
        fn signed_rank_matches_enumeration(
            diffs in proptest::collection::vec(
                prop_oneof![(-5i32..=5).prop_map(|v| v as f64), -10.0f64..10.0],
                1..=12,
            )
        ) {
            prop_assume!(diffs.iter().any(|d| *d != 0.0));
            let p = signed_rank_test(&diffs).unwrap();
            prop_assert!((p - brute_signed_rank(&diffs)).abs() <= 1e-12);
        }

        #[test]
        fn rank_tests_scale_invariant(
            diffs in proptest::collection::vec(-10.0f64..10.0, 2..30),
            k in 1u32..8,
        ) {
            prop_assume!(diffs.iter().any(|d| *d != 0.0));
            let c = f64::from(1u32 << k);
            let scaled: Vec<f64> = diffs.iter().map(|d| d * c).collect();
            prop_assert_eq!(signed_rank_test(&diffs).unwrap(), signed_rank_test(&scaled).unwrap());
        }
    }

    #[test]
    fn large_sample_uses_normal_approximation() {
        let d: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let p = signed_rank_test(&d).unwrap();
        // W = 465, mean 232.5, var 2363.75: z = (232.5 - 0.5) / 48.618...
        let z = 232.0 / 2363.75f64.sqrt();
        assert!((p - normal_two_sided(z)).abs() < 1e-15);
        assert!(p < 1e-5);
    }

    #[test]
    fn t_examples() {
        assert_eq!(paired_t_test(&[1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(paired_t_test(&[1.0, 1.0, 1.0, 1.0]), Err(StatsError::ZeroVariance));
        assert_eq!(paired_t_test(&[1.0]), Err(StatsError::TooFewSamples(1)));
        let p = paired_t_test(&[2.1, 1.9, 2.0, 2.2, 1.8]).unwrap();
        assert!(p < 1e-4, "{p}");
    }
}
