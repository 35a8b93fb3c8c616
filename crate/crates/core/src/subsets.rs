//! Lexicographic enumeration of fixed-size subsets of `0..n`, with random
//! access by rank so that enumeration can be split into independent chunks.

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// The subset of rank `rank` (0-based) in lexicographic order.
pub fn unrank(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut x = 0;
    for pos in 0..k {
        loop {
            let count = binomial(n - x - 1, k - pos - 1).expect("rank within range");
            if rank < count {
                out.push(x);
                x += 1;
                break;
            }
            rank -= count;
            x += 1;
        }
    }
    out
}

/// Advances `c` to its lexicographic successor; returns false at the end.
pub fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(60, 3), Some(34220));
        assert_eq!(binomial(80, 3), Some(82160));
        assert_eq!(binomial(5, 0), Some(1));
        assert_eq!(binomial(3, 5), Some(0));
        assert!(binomial(400, 200).is_none());
    }

    #[test]
    fn unrank_matches_sequential_order() {
        let (n, k) = (7, 3);
        let mut c: Vec<usize> = (0..k).collect();
        let mut rank = 0u128;
        loop {
            assert_eq!(unrank(n, k, rank), c);
            rank += 1;
            if !next_combination(&mut c, n) {
                break;
            }
        }
        assert_eq!(rank, binomial(n, k).unwrap());
    }

    #[test]
    fn empty_subset() {
        let mut c: Vec<usize> = vec![];
        assert!(!next_combination(&mut c, 4));
        assert_eq!(unrank(4, 0, 0), Vec::<usize>::new());
    }
}
