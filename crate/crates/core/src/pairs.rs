//! Lexicographic indexing of unordered item pairs `{lo, hi}`, `lo < hi`.

/// Number of unordered pairs over `n` items.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Index of `{lo, hi}` in the lexicographic order (0,1), (0,2), ..., (n-2,n-1).
#[inline]
pub fn pair_index(n: usize, lo: usize, hi: usize) -> usize {
    debug_assert!(lo < hi && hi < n);
    lo * (2 * n - lo - 1) / 2 + (hi - lo - 1)
}

#[inline]
fn row_start(n: usize, lo: usize) -> usize {
    lo * (2 * n - lo - 1) / 2
}

/// Inverse of [`pair_index`].
pub fn pair_from_index(n: usize, idx: usize) -> (usize, usize) {
    debug_assert!(idx < pair_count(n));
    // Solve lo*(2n-lo-1)/2 <= idx from a float estimate, then correct.
    let nf = n as f64;
    let b = 2.0 * nf - 1.0;
    let est = ((b - (b * b - 8.0 * idx as f64).max(0.0).sqrt()) / 2.0).floor();
    let mut lo = (est.max(0.0) as usize).min(n.saturating_sub(2));
    while lo > 0 && row_start(n, lo) > idx {
        lo -= 1;
    }
    while lo + 1 < n - 1 && row_start(n, lo + 1) <= idx {
        lo += 1;
    }
    let hi = idx - row_start(n, lo) + lo + 1;
    (lo, hi)
}

#[inline]
pub fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip_small() {
        for n in 2..40 {
            let mut expected = 0;
            for lo in 0..n {
                for hi in lo + 1..n {
                    assert_eq!(pair_index(n, lo, hi), expected);
                    assert_eq!(pair_from_index(n, expected), (lo, hi));
                    expected += 1;
                }
            }
            assert_eq!(expected, pair_count(n));
        }
    }

    #[test]
    fn index_round_trip_large() {
        let n = 100_000;
        let total = pair_count(n);
        for idx in [0, 1, n - 2, n - 1, total / 3, total / 2, total - 2, total - 1] {
            let (lo, hi) = pair_from_index(n, idx);
            assert_eq!(pair_index(n, lo, hi), idx);
        }
    }
}
