use std::fmt;

use super::hypothesis::{paired_t_test, sign_test, signed_rank_test};
use super::StatsError;

/// Per-function mean values of one method, in a shared function order.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: String,
    pub means: Vec<f64>,
}

impl MethodResult {
    pub fn new(method: impl Into<String>, means: Vec<f64>) -> Self {
        Self {
            method: method.into(),
            means,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Test {
    Sign,
    SignedRank,
    T,
}

impl Test {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Sign => "s",
            Self::SignedRank => "sr",
            Self::T => "t",
        }
    }
}

/// One cell of the pairwise matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseCell {
    /// `None` on equal win counts.
    pub winner: Option<String>,
    pub wins: (f64, f64),
    pub significant: Vec<Test>,
    pub p_values: [Option<f64>; 3],
}

impl PairwiseCell {
    pub fn tags(&self) -> Vec<&'static str> {
        self.significant.iter().map(|t| t.tag()).collect()
    }
}

impl fmt::Display for PairwiseCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{}]",
            self.winner.as_deref().unwrap_or("tie"),
            self.tags().join(",")
        )
    }
}

/// Compares two methods over the same functions: a function is won by the
/// lower mean (exact ties count half each), the winner needs strictly more
/// wins, and each test is flagged when its two-sided p is below `alpha`.
pub fn compare_pair(a: &MethodResult, b: &MethodResult, alpha: f64) -> Result<PairwiseCell, StatsError> {
    if a.means.len() != b.means.len() {
        return Err(StatsError::LengthMismatch(a.means.len(), b.means.len()));
    }
    let (mut wa, mut wb) = (0u64, 0u64);
    let mut ties = 0u64;
    for (x, y) in a.means.iter().zip(&b.means) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => wa += 1,
            std::cmp::Ordering::Greater => wb += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    let wins = (wa as f64 + 0.5 * ties as f64, wb as f64 + 0.5 * ties as f64);
    let winner = match wa.cmp(&wb) {
        std::cmp::Ordering::Greater => Some(a.method.clone()),
        std::cmp::Ordering::Less => Some(b.method.clone()),
        std::cmp::Ordering::Equal => None,
    };
    let diffs: Vec<f64> = a.means.iter().zip(&b.means).map(|(x, y)| x - y).collect();
    let p_values = [
        sign_test(wa, wb).ok(),
        signed_rank_test(&diffs).ok(),
        paired_t_test(&diffs).ok(),
    ];
    let significant = [Test::Sign, Test::SignedRank, Test::T]
        .into_iter()
        .zip(p_values)
        .filter(|(_, p)| p.is_some_and(|p| p < alpha))
        .map(|(t, _)| t)
        .collect();
    Ok(PairwiseCell {
        winner,
        wins,
        significant,
        p_values,
    })
}

/// Upper-triangular matrix: one `(i, j, cell)` per pair `i < j`, in method
/// order.
pub fn pairwise_matrix(
    results: &[MethodResult],
    alpha: f64,
) -> Result<Vec<(usize, usize, PairwiseCell)>, StatsError> {
    let mut out = Vec::new();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            out.push((i, j, compare_pair(&results[i], &results[j], alpha)?));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod unit {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dominant_method() {
        let a = MethodResult::new("ga", (0..17).map(|i| i as f64).collect());
        let b = MethodResult::new("mc", (0..17).map(|i| i as f64 + 1.0 + (i % 3) as f64).collect());
        let c = compare_pair(&a, &b, 0.05).unwrap();
        assert_eq!(c.winner.as_deref(), Some("ga"));
        assert!(c.significant.contains(&Test::Sign));
        assert!(c.significant.contains(&Test::SignedRank));
        assert_eq!(c.wins, (17.0, 0.0));
    }

    #[test]
    fn identical_is_tie_without_tags() {
        let a = MethodResult::new("mc", vec![1.0, 2.0, 3.0]);
        let c = compare_pair(&a, &a.clone(), 0.05).unwrap();
        assert_eq!(c.winner, None);
        assert!(c.significant.is_empty());
        assert_eq!(c.to_string(), "tie[]");
        assert_eq!(c.wins, (1.5, 1.5));
    }

    #[test]
    fn narrow_win_has_no_tags() {
        let a: Vec<f64> = (0..17).map(|i| if i < 9 { 1.0 } else { 2.0 }).collect();
        let b: Vec<f64> = (0..17).map(|i| if i < 9 { 1.1 } else { 1.9 }).collect();
        let c = compare_pair(&MethodResult::new("sa", a), &MethodResult::new("ea", b), 0.05).unwrap();
        assert_eq!(c.to_string(), "sa[]");
    }

    #[test]
    fn length_mismatch() {
        let a = MethodResult::new("a", vec![1.0]);
        let b = MethodResult::new("b", vec![1.0, 2.0]);
        assert!(compare_pair(&a, &b, 0.05).is_err());
    }

    #[test]
    fn matrix_is_upper_triangular_in_order() {
        let rs: Vec<MethodResult> = (0..4).map(|k| MethodResult::new(format!("m{k}"), vec![k as f64; 3])).collect();
        let m = pairwise_matrix(&rs, 0.05).unwrap();
        let idx: Vec<(usize, usize)> = m.iter().map(|(i, j, _)| (*i, *j)).collect();
        assert_eq!(idx, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    proptest! {
        #[test]
        fn antisymmetric(
            pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..25)
        ) {
            let a = MethodResult::new("a", pairs.iter().map(|p| p.0).collect());
            let b = MethodResult::new("b", pairs.iter().map(|p| p.1).collect());
            let ab = compare_pair(&a, &b, 0.05).unwrap();
            let ba = compare_pair(&b, &a, 0.05).unwrap();
            prop_assert_eq!(ab.winner, ba.winner);
            prop_assert_eq!(ab.significant, ba.significant);
        }
    }
}
