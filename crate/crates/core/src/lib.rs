//! Historic (irregular) points of Birkhoff averages on hyperbolic systems.
//!
//! The crate glues orbit segments that follow two invariant measures in
//! alternation, shadows the resulting pseudo-orbit by a true orbit, and
//! measures the outcome: oscillation of Birkhoff averages, distance of
//! empirical measures to the targets in a weak-* metric, and Bowen and
//! Katok entropies of the glued sets. Systems are linear hyperbolic toral
//! maps (the cat map), the Katok map, and the full 2-shift.
//!
//! Numerics are generic over [`Real`] (`f32`, `f64`); weights and schedule
//! constants are exact rationals. The aliases below fix `f64`.

pub mod cli;
pub mod entropy;
pub mod gluing;
pub mod historic;
pub mod hyperbolicity;
pub mod linalg;
pub mod measures;
mod scalar;
pub mod systems;

pub use scalar::Real;

/// Exact mixture weight.
pub type Weight = num_rational::Ratio<i64>;
pub type TorusPoint = systems::TorusPoint<f64>;
pub type CatMap = systems::LinearToralMap<f64>;
pub type KatokMap = systems::KatokMap<f64>;
pub type Shift = systems::FullShift<f64>;
pub type TorusMeasure = measures::AtomicMeasure<systems::TorusPoint<f64>, f64>;
pub type WordMeasure = measures::AtomicMeasure<systems::SymbolicWord, f64>;
pub type TorusBasis = measures::TestBasis<systems::TorusPoint<f64>>;
pub type WordBasis = measures::TestBasis<systems::SymbolicWord>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolicity::lyapunov_exponents;
    use crate::systems::{DynamicalSystem, LinearToralMap};

    #[test]
    fn aliases_and_single_precision_agree() {
        let cat = CatMap::cat_map();
        let x = TorusPoint::new(0.2, 0.7);
        let single = LinearToralMap::<f32>::cat_map();
        let xs = systems::TorusPoint::<f32>::new(0.2, 0.7);
        let a = lyapunov_exponents(&cat, &x, 50).unwrap().exponents;
        let b = lyapunov_exponents(&single, &xs, 50).unwrap().exponents;
        assert!((a[0] - b[0]).abs() < 1e-5 && (a[1] - b[1]).abs() < 1e-5);
        let y = cat.apply(&x).unwrap();
        let ys = single.apply(&xs).unwrap();
        assert!((y.x() - ys.x() as f64).abs() < 1e-6);
        assert_eq!(Weight::new(2, 4), Weight::new(1, 2));
    }
}
