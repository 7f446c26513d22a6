//! OTSU threshold by exhaustive search in exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;

/// Between-class variance `w0 w1 (mu0 - mu1)^2 / n^2` for the split
/// `0..=t | t+1..=255`, or `None` when one class is empty.
pub fn between_class_variance(hist: &[u64; 256], t: usize) -> Option<BigRational> {
    let int = |v: u128| BigRational::from_integer(BigInt::from(v));
    let n: u128 = hist.iter().map(|&c| c as u128).sum();
    let w0: u128 = hist[..=t].iter().map(|&c| c as u128).sum();
    let w1 = n - w0;
    if w0 == 0 || w1 == 0 {
        return None;
    }
    let s0: u128 = (0..=t).map(|i| i as u128 * hist[i] as u128).sum();
    let s1: u128 = (t + 1..256).map(|i| i as u128 * hist[i] as u128).sum();
    let mu0 = int(s0) / int(w0);
    let mu1 = int(s1) / int(w1);
    let diff = mu0 - mu1;
    Some(int(w0) * int(w1) * diff.clone() * diff / (int(n) * int(n)))
}

/// Threshold maximizing the between-class variance over all 256
/// candidates, smallest on ties; `None` when at most one bin is occupied.
pub fn brute_force_otsu(hist: &[u64; 256]) -> Option<u8> {
    if hist.iter().filter(|&&c| c > 0).count() <= 1 {
        return None;
    }
    let mut best: Option<(usize, BigRational)> = None;
    for t in 0..256 {
        if let Some(v) = between_class_variance(hist, t) {
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((t, v));
            }
        }
    }
    best.map(|(t, _)| t as u8)
}
