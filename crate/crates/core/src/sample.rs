//! Deterministic low-discrepancy sampling of open boxes.
//!
//! Points come from a Halton sequence whose coordinates are rotated by a
//! seeded random shift (Cranley–Patterson rotation), so the same seed always
//! yields the same points while different seeds give independent-looking
//! sets. A margin proportional to each side length is kept clear of every
//! face.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_COUNT: usize = 100;
pub const DEFAULT_SEED: u64 = 42;
/// Fraction of each side length excluded at both ends.
pub const DEFAULT_MARGIN: f64 = 1e-3;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * factor;
        index /= base;
        factor *= inv;
    }
    out
}

/// `count` points in the box `bounds`, each coordinate kept at least
/// `margin × width` away from the faces.
///
/// # Panics
/// If the box has more than 16 sides.
pub fn sample_box(bounds: &[(f64, f64)], count: usize, seed: u64, margin: f64) -> Vec<Vec<f64>> {
    assert!(bounds.len() <= PRIMES.len(), "at most {} dimensions", PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = bounds.iter().map(|_| rng.gen::<f64>()).collect();
    (1..=count as u64)
        .map(|k| {
            bounds
                .iter()
                .enumerate()
                .map(|(d, &(lo, hi))| {
                    let u = (radical_inverse(k, PRIMES[d]) + shift[d]).fract();
                    let w = hi - lo;
                    lo + w * (margin + (1.0 - 2.0 * margin) * u)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn deterministic_and_inside_margin() {
        let b = [(0.0, 1.0), (-3.0, 5.0)];
        let a = sample_box(&b, 50, 7, 0.01);
        assert_eq!(a, sample_box(&b, 50, 7, 0.01));
        assert_ne!(a, sample_box(&b, 50, 8, 0.01));
        for p in &a {
            assert!(p[0] >= 0.01 && p[0] <= 0.99);
            assert!(p[1] >= -3.0 + 0.08 && p[1] <= 5.0 - 0.08);
        }
    }
}
