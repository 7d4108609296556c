//! Order-fixed floating point reductions.
//!
//! Every sum in the crate goes through [`pairwise_sum`]. The summation tree
//! depends only on the slice length, so the result is bit-identical whether
//! the halves are evaluated on one thread or many.

/// Leaves at or below this length are summed left to right.
const LEAF: usize = 32;
/// Subtrees above this length are handed to `rayon::join`.
const PAR_THRESHOLD: usize = 1 << 15;

pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, &v| acc + v);
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    if values.len() > PAR_THRESHOLD {
        let (a, b) = rayon::join(|| pairwise_sum(lo), || pairwise_sum(hi));
        a + b
    } else {
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

/// Pairwise sum of `f(i)` for `i in 0..len`, with the same tree shape as
/// [`pairwise_sum`] on a materialised slice.
pub fn pairwise_sum_by<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    fn go<F: Fn(usize) -> f64 + Sync>(start: usize, len: usize, f: &F) -> f64 {
        if len <= LEAF {
            return (start..start + len).fold(0.0, |acc, i| acc + f(i));
        }
        let half = len / 2;
        if len > PAR_THRESHOLD {
            let (a, b) = rayon::join(|| go(start, half, f), || go(start + half, len - half, f));
            a + b
        } else {
            go(start, half, f) + go(start + half, len - half, f)
        }
    }
    go(0, len, &f)
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_integers_exactly() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
        assert_eq!(pairwise_sum_by(1000, |i| (i + 1) as f64), 500500.0);
    }

    #[test]
    fn slice_and_closure_forms_agree_bitwise() {
        let v: Vec<f64> = (0..100_003).map(|i| ((i as f64) * 0.37).sin() * 1e-3).collect();
        assert_eq!(pairwise_sum(&v).to_bits(), pairwise_sum_by(v.len(), |i| v[i]).to_bits());
    }

    #[test]
    fn independent_of_thread_count() {
        let v: Vec<f64> = (0..200_001).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| pairwise_sum(&v));
        let b = four.install(|| pairwise_sum(&v));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
