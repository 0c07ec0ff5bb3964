//! Random points distributed according to the reference measures.

use rand::Rng;

use crate::systems::{SymbolicWord, TorusPoint};
use crate::Real;

/// `n` independent Lebesgue-distributed points of the torus.
pub fn lebesgue<T: Real, R: Rng>(rng: &mut R, n: usize) -> Vec<TorusPoint<T>> {
    (0..n).map(|_| lebesgue_in_box(rng, [0.0, 0.0], 1.0)).collect()
}

/// A Lebesgue-distributed point of the square `corner + [0, width)^2`.
pub fn lebesgue_in_box<T: Real, R: Rng>(rng: &mut R, corner: [f64; 2], width: f64) -> TorusPoint<T> {
    let x = corner[0] + width * rng.random::<f64>();
    let y = corner[1] + width * rng.random::<f64>();
    TorusPoint::new(T::lit(x), T::lit(y))
}

/// A Bernoulli(`p`) word determined to `len` symbols and continued by zeros.
pub fn bernoulli_word<R: Rng>(rng: &mut R, p: f64, len: usize) -> SymbolicWord {
    let prefix: Vec<u8> = (0..len).map(|_| u8::from(rng.random::<f64>() < p)).collect();
    SymbolicWord::with_constant_tail(prefix, 0).expect("binary symbols")
}

pub fn bernoulli_words<R: Rng>(rng: &mut R, p: f64, len: usize, n: usize) -> Vec<SymbolicWord> {
    (0..n).map(|_| bernoulli_word(rng, p, len)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bernoulli_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = bernoulli_word(&mut rng, 0.3, 100_000);
        let ones = w.take(100_000).iter().filter(|&&s| s == 1).count() as f64 / 1e5;
        assert!((ones - 0.3).abs() < 0.005);
    }

    #[test]
    fn lebesgue_in_unit_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<TorusPoint<f64>> = lebesgue(&mut rng, 1000);
        let mean = pts.iter().map(|p| p.x()).sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.05);
    }
}
