//! Probability measures on the state spaces: finitely supported measures,
//! empirical measures, a few exact reference measures, the metric `D` that
//! metrizes weak-* convergence, and rational convex approximations.
//!
//! Every measure is compared through its vector of integrals against a
//! truncated test family, so atomic, exact and streamed measures share one
//! metric.

mod atomic;
mod basis;
mod rational;
pub mod sampling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use atomic::{empirical_measure, AtomicMeasure, EmpiricalError};
pub use basis::{BasisFunction, BasisPoint, TestBasis, CYLINDER_BASIS_VERSION, TRIG_BASIS_VERSION};
pub use rational::{rational_approximation, ConvexCombination, RationalCombination};

use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("measure has no atoms")]
    Empty,
    #[error("atom weight {0} is not a positive finite number")]
    BadWeight(f64),
    #[error("weights sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("{measure} has no exact integral for {function}")]
    Unsupported { measure: String, function: String },
    #[error("moment vector built for basis {found} with {len} terms cannot be used with {expected} at truncation {needed}")]
    BasisMismatch { expected: String, found: String, needed: usize, len: usize },
    #[error("target accuracy 1/{k} is below the basis truncation error 2^-{truncation}; need truncation >= {required}")]
    Infeasible { k: usize, truncation: usize, required: usize },
}

/// Integrals `(int phi_1, ..., int phi_I)` of a measure, tagged with the
/// basis that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector<T> {
    pub basis_version: String,
    pub values: Vec<T>,
    pub label: String,
}

/// Anything whose integrals against a test family can be computed.
pub trait Moments<P, T: Real> {
    fn moments(&self, basis: &TestBasis<P>) -> Result<Vec<T>, MeasureError>;
}

impl<P: BasisPoint<T>, T: Real> Moments<P, T> for AtomicMeasure<P, T> {
    fn moments(&self, basis: &TestBasis<P>) -> Result<Vec<T>, MeasureError> {
        let n = basis.truncation();
        let mut acc = vec![T::zero(); n];
        let mut buf = vec![T::zero(); n];
        for (p, w) in self.atoms() {
            basis.eval(p, &mut buf);
            for (a, v) in acc.iter_mut().zip(&buf) {
                *a = *a + *w * *v;
            }
        }
        Ok(acc)
    }
}

impl<P, T: Real> Moments<P, T> for MomentVector<T> {
    fn moments(&self, basis: &TestBasis<P>) -> Result<Vec<T>, MeasureError> {
        if self.basis_version != basis.version() || self.values.len() < basis.truncation() {
            return Err(MeasureError::BasisMismatch {
                expected: basis.version().into(),
                found: self.basis_version.clone(),
                needed: basis.truncation(),
                len: self.values.len(),
            });
        }
        Ok(self.values[..basis.truncation()].to_vec())
    }
}

/// Measures the toolkit can name.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure<P, T> {
    Atomic(AtomicMeasure<P, T>),
    /// Haar measure: Lebesgue on the torus, Bernoulli(1/2, 1/2) on the shift.
    Uniform,
    /// Product measure on the shift with `P(x_i = 1) = p`.
    Bernoulli { p: T },
    Moments(MomentVector<T>),
}

impl<P, T: Real> Measure<P, T> {
    pub fn label(&self) -> String
    where
        P: crate::systems::StatePoint,
    {
        match self {
            Measure::Atomic(m) => m.label().to_string(),
            Measure::Uniform => "uniform".into(),
            Measure::Bernoulli { p } => format!("bernoulli({p})"),
            Measure::Moments(v) => v.label.clone(),
        }
    }

    fn exact_integral(&self, f: &BasisFunction) -> Option<T> {
        match (self, f) {
            (Measure::Uniform, BasisFunction::Trig { m1: 0, m2: 0, sine: false }) => Some(T::one()),
            (Measure::Uniform, BasisFunction::Trig { .. }) => Some(T::zero()),
            (Measure::Uniform, BasisFunction::Cylinder { word }) => Some(T::lit(0.5).powi(word.len() as i32)),
            (Measure::Bernoulli { p }, BasisFunction::Cylinder { word }) => Some(
                word.iter()
                    .map(|&s| if s == 1 { *p } else { T::one() - *p })
                    .fold(T::one(), |a, b| a * b),
            ),
            _ => None,
        }
    }
}

impl<P: BasisPoint<T>, T: Real> Moments<P, T> for Measure<P, T> {
    fn moments(&self, basis: &TestBasis<P>) -> Result<Vec<T>, MeasureError> {
        match self {
            Measure::Atomic(m) => m.moments(basis),
            Measure::Moments(v) => v.moments(basis),
            _ => basis
                .functions()
                .iter()
                .map(|f| {
                    self.exact_integral(f).ok_or_else(|| MeasureError::Unsupported {
                        measure: self.label(),
                        function: f.to_string(),
                    })
                })
                .collect(),
        }
    }
}

/// Value of the truncated metric together with the bound on the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricD<T> {
    pub value: T,
    pub truncation_bound: f64,
}

/// `sum_{i<=I} |a_i - b_i| / (2^{i+1} ||phi_i||)` on precomputed integrals.
pub fn metric_d_from_moments<P, T: Real>(a: &[T], b: &[T], basis: &TestBasis<P>) -> T {
    let n = basis.truncation();
    assert!(a.len() >= n && b.len() >= n, "moment vectors shorter than the basis");
    (0..n)
        .map(|i| (a[i] - b[i]).abs() * T::lit(basis.weight(i + 1)))
        .sum()
}

/// The metric `D(mu, nu)` truncated at the basis length.
pub fn metric_d<P, T: Real>(
    mu: &impl Moments<P, T>,
    nu: &impl Moments<P, T>,
    basis: &TestBasis<P>,
) -> Result<MetricD<T>, MeasureError> {
    let a = mu.moments(basis)?;
    let b = nu.moments(basis)?;
    Ok(MetricD { value: metric_d_from_moments(&a, &b, basis), truncation_bound: basis.truncation_bound() })
}

/// Running sums of basis values along an orbit, giving the moments of
/// `E_n(x)` at every `n` without storing the orbit.
#[derive(Debug, Clone)]
pub struct MomentAccumulator<T> {
    sums: Vec<T>,
    buf: Vec<T>,
    count: usize,
    version: String,
}

impl<T: Real> MomentAccumulator<T> {
    pub fn new<P>(basis: &TestBasis<P>) -> Self {
        let n = basis.truncation();
        Self { sums: vec![T::zero(); n], buf: vec![T::zero(); n], count: 0, version: basis.version().into() }
    }

    pub fn push<P: BasisPoint<T>>(&mut self, basis: &TestBasis<P>, p: &P) {
        basis.eval(p, &mut self.buf);
        for (s, v) in self.sums.iter_mut().zip(&self.buf) {
            *s = *s + *v;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn snapshot(&self) -> MomentVector<T> {
        let n = T::from_count(self.count.max(1));
        MomentVector {
            basis_version: self.version.clone(),
            values: self.sums.iter().map(|s| *s / n).collect(),
            label: format!("empirical n={}", self.count),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{DynamicalSystem, LinearToralMap, SymbolicWord, TorusPoint};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Tp = TorusPoint<f64>;

    fn random_measure(rng: &mut ChaCha8Rng) -> AtomicMeasure<Tp, f64> {
        let n = rng.random_range(1..6);
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
        let total: f64 = raw.iter().sum();
        let atoms = raw
            .iter()
            .map(|w| (TorusPoint::new(rng.random(), rng.random()), w / total))
            .collect();
        AtomicMeasure::new(atoms, "random").unwrap()
    }

    #[test]
    fn brute_force_two_diracs() {
        let basis = TestBasis::<Tp>::trig(8);
        let a = AtomicMeasure::<Tp, f64>::dirac(TorusPoint::new(0.0, 0.0));
        let b = AtomicMeasure::<Tp, f64>::dirac(TorusPoint::new(0.5, 0.0));
        let d = metric_d(&a, &b, &basis).unwrap().value;
        // Functions in order: 1, cos x, sin x, cos y, sin y, cos(x+y), sin(x+y), cos(x-y).
        let fs: [fn(f64, f64) -> f64; 8] = [
            |_, _| 1.0,
            |x, _| (std::f64::consts::TAU * x).cos(),
            |x, _| (std::f64::consts::TAU * x).sin(),
            |_, y| (std::f64::consts::TAU * y).cos(),
            |_, y| (std::f64::consts::TAU * y).sin(),
            |x, y| (std::f64::consts::TAU * (x + y)).cos(),
            |x, y| (std::f64::consts::TAU * (x + y)).sin(),
            |x, y| (std::f64::consts::TAU * (x - y)).cos(),
        ];
        let mut want = 0.0;
        for (i, f) in fs.iter().enumerate() {
            want += (f(0.0, 0.0) - f(0.5, 0.0)).abs() / 2f64.powi(i as i32 + 2);
        }
        assert!((d - want).abs() < 1e-15, "{d} vs {want}");
        // cos x, cos(x+y), cos(x-y) each differ by 2.
        assert!((want - (2.0 / 8.0 + 2.0 / 128.0 + 2.0 / 512.0)).abs() < 1e-15);
    }

    #[test]
    fn metric_axioms_on_random_triples() {
        let basis = TestBasis::<Tp>::trig(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (a, b, c) = (random_measure(&mut rng), random_measure(&mut rng), random_measure(&mut rng));
            let ab = metric_d(&a, &b, &basis).unwrap().value;
            let ba = metric_d(&b, &a, &basis).unwrap().value;
            let bc = metric_d(&b, &c, &basis).unwrap().value;
            let ac = metric_d(&a, &c, &basis).unwrap().value;
            assert_eq!(ab, ba);
            assert!(ac <= ab + bc + 1e-12);
            assert!((0.0..=1.0).contains(&ab));
            assert_eq!(metric_d(&a, &a, &basis).unwrap().value, 0.0);
        }
    }

    #[test]
    fn truncation_tail_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in [4usize, 8, 16] {
            let small = TestBasis::<Tp>::trig(i);
            let large = TestBasis::<Tp>::trig(2 * i);
            for _ in 0..200 {
                let (a, b) = (random_measure(&mut rng), random_measure(&mut rng));
                let ds = metric_d(&a, &b, &small).unwrap();
                let dl = metric_d(&a, &b, &large).unwrap().value;
                assert!(dl >= ds.value && dl - ds.value <= ds.truncation_bound);
            }
        }
    }

    #[test]
    fn pushforward_moves_little_mass() {
        let cat = LinearToralMap::<f64>::cat_map();
        let basis = TestBasis::<Tp>::trig(16);
        let x = TorusPoint::new(0.1234, 0.5678);
        for n in [10usize, 100, 1000] {
            let a = empirical_measure(&cat, &x, n).unwrap();
            let b = empirical_measure(&cat, &cat.apply(&x).unwrap(), n).unwrap();
            assert!(metric_d(&a, &b, &basis).unwrap().value <= 2.0 / n as f64);
        }
    }

    #[test]
    fn generic_cat_orbit_equidistributes() {
        let cat = LinearToralMap::<f64>::cat_map();
        let x = TorusPoint::new(0.31830988618, 0.2718281828);
        let m = empirical_measure(&cat, &x, 100_000).unwrap();
        let v = m.integrate(|p| (std::f64::consts::TAU * p.x()).cos());
        assert!(v.abs() < 0.02, "{v}");
    }

    #[test]
    fn exact_reference_measures() {
        let basis = TestBasis::<SymbolicWord>::cylinders(6);
        let u = Measure::<SymbolicWord, f64>::Uniform.moments(&basis).unwrap();
        assert_eq!(u, vec![0.5, 0.5, 0.25, 0.25, 0.25, 0.25]);
        let b = Measure::<SymbolicWord, f64>::Bernoulli { p: 0.25 }.moments(&basis).unwrap();
        assert_eq!(b, vec![0.75, 0.25, 0.5625, 0.1875, 0.1875, 0.0625]);
        let tb = TestBasis::<Tp>::trig(5);
        assert!(Measure::<Tp, f64>::Bernoulli { p: 0.5 }.moments(&tb).is_err());
        assert_eq!(Measure::<Tp, f64>::Uniform.moments(&tb).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn accumulator_matches_empirical_measure() {
        let cat = LinearToralMap::<f64>::cat_map();
        let basis = TestBasis::<Tp>::trig(16);
        let x = TorusPoint::new(0.2, 0.7);
        let orbit = cat.orbit(&x, 500).unwrap();
        let mut acc = MomentAccumulator::new(&basis);
        for p in &orbit {
            acc.push(&basis, p);
        }
        let m = AtomicMeasure::uniform(orbit, "").unwrap();
        let d = metric_d(&m, &acc.snapshot(), &basis).unwrap().value;
        assert!(d < 1e-13);
        let other = TestBasis::<SymbolicWord>::cylinders(4);
        assert!(acc.snapshot().moments(&other).is_err());
    }

    proptest! {
        #[test]
        fn integrate_is_affine(t in 0.01f64..0.99, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = (random_measure(&mut rng), random_measure(&mut rng));
            let mix = AtomicMeasure::convex_combination(&[(&a, t), (&b, 1.0 - t)], "mix").unwrap();
            let phi = |p: &Tp| (std::f64::consts::TAU * p.x()).cos() + p.y();
            let lhs = mix.integrate(phi);
            let rhs = t * a.integrate(phi) + (1.0 - t) * b.integrate(phi);
            prop_assert!((lhs - rhs).abs() < 1e-14);
        }

        #[test]
        fn metric_is_bounded_by_one(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let basis = TestBasis::<Tp>::trig(32);
            let (a, b) = (random_measure(&mut rng), random_measure(&mut rng));
            let d = metric_d(&a, &b, &basis).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
