use num_rational::Ratio;
use num_traits::ToPrimitive;

use super::{metric_d_from_moments, BasisPoint, Measure, MeasureError, Moments, TestBasis};
use crate::Real;

/// `sum_j w_j m_j` with real weights; the finitely decomposed stand-in for
/// an invariant measure and its ergodic decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexCombination<P, T> {
    components: Vec<(Measure<P, T>, T)>,
}

impl<P, T: Real> ConvexCombination<P, T> {
    pub fn new(components: Vec<(Measure<P, T>, T)>) -> Result<Self, MeasureError> {
        if components.is_empty() {
            return Err(MeasureError::Empty);
        }
        let mut total = T::zero();
        for (_, w) in &components {
            if !(*w >= T::zero()) || !w.is_finite() {
                return Err(MeasureError::BadWeight(w.as_f64()));
            }
            total = total + *w;
        }
        if (total - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(16.0)) {
            return Err(MeasureError::NotNormalized(total.as_f64()));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(Measure<P, T>, T)] {
        &self.components
    }
}

fn mix_moments<P: BasisPoint<T>, T: Real>(
    parts: impl Iterator<Item = (Vec<T>, T)>,
    n: usize,
) -> Vec<T> {
    let mut acc = vec![T::zero(); n];
    for (m, w) in parts {
        for (a, v) in acc.iter_mut().zip(m) {
            *a = *a + w * v;
        }
    }
    acc
}

impl<P: BasisPoint<T>, T: Real> Moments<P, T> for ConvexCombination<P, T> {
    fn moments(&self, basis: &TestBasis<P>) -> Result<Vec<T>, MeasureError> {
        let parts = self
            .components
            .iter()
            .map(|(m, w)| m.moments(basis).map(|v| (v, *w)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(mix_moments::<P, T>(parts.into_iter(), basis.truncation()))
    }
}

/// `sum_j a_j m_j` with exact rational weights, plus the accuracy certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalCombination<P, T> {
    pub components: Vec<(Measure<P, T>, Ratio<i64>)>,
    pub k: usize,
    /// Largest `|a_j - w_j|` against the approximated weights.
    pub max_weight_error: f64,
    /// `D` between the input and this combination, evaluated directly.
    pub distance: T,
    /// A priori bound `(1/2) sum_j |a_j - w_j|` on the same distance.
    pub distance_bound: f64,
}

impl<P, T: Real> RationalCombination<P, T> {
    pub fn weights(&self) -> Vec<Ratio<i64>> {
        self.components.iter().map(|(_, a)| *a).collect()
    }

    /// Least common denominator of the weights.
    pub fn common_denominator(&self) -> i64 {
        self.components
            .iter()
            .fold(1i64, |l, (_, a)| num_integer::lcm(l, *a.denom()))
    }
}

impl<P: BasisPoint<T>, T: Real> Moments<P, T> for RationalCombination<P, T> {
    fn moments(&self, basis: &TestBasis<P>) -> Result<Vec<T>, MeasureError> {
        let parts = self
            .components
            .iter()
            .map(|(m, a)| m.moments(basis).map(|v| (v, T::lit(a.to_f64().unwrap_or(0.0)))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(mix_moments::<P, T>(parts.into_iter(), basis.truncation()))
    }
}

/// Weights with a small exact denominator, if every weight has one.
fn exact_rationals(weights: &[f64]) -> Option<Vec<Ratio<i64>>> {
    let rs = weights
        .iter()
        .map(|&w| {
            Ratio::<i64>::approximate_float(w)
                .filter(|r| *r.denom() <= 1 << 20 && r.to_f64() == Some(w))
        })
        .collect::<Option<Vec<_>>>()?;
    (rs.iter().copied().sum::<Ratio<i64>>() == Ratio::from_integer(1)).then_some(rs)
}

/// Largest-remainder rounding of `weights` to multiples of `1/q` summing to 1.
fn round_to_denominator(weights: &[f64], q: i64) -> Vec<Ratio<i64>> {
    let scaled: Vec<f64> = weights.iter().map(|w| w * q as f64).collect();
    let mut nums: Vec<i64> = scaled.iter().map(|x| x.floor() as i64).collect();
    let missing = q - nums.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = scaled[a] - scaled[a].floor();
        let fb = scaled[b] - scaled[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &j in order.iter().cycle().take(missing.max(0) as usize) {
        nums[j] += 1;
    }
    nums.into_iter().map(|n| Ratio::new(n, q)).collect()
}

/// Rational weights `a_j` with `|a_j - w_j| < 1/(3 k s)` (`s` components)
/// and the smallest common denominator found by increasing search; the
/// resulting combination is within `1/k` of the input in `D`.
pub fn rational_approximation<P: BasisPoint<T>, T: Real>(
    nu: &ConvexCombination<P, T>,
    k: usize,
    basis: &TestBasis<P>,
) -> Result<RationalCombination<P, T>, MeasureError> {
    assert!(k >= 1, "approximation order must be at least 1");
    let target = 1.0 / k as f64;
    if target < basis.truncation_bound() {
        let required = (k as f64).log2().ceil() as usize + 1;
        return Err(MeasureError::Infeasible { k, truncation: basis.truncation(), required });
    }
    let weights: Vec<f64> = nu.components().iter().map(|(_, w)| w.as_f64()).collect();
    let s = weights.len();
    let tol = 1.0 / (3.0 * k as f64 * s as f64);
    let rational = match exact_rationals(&weights) {
        Some(r) => r,
        None => {
            let mut q = 1i64;
            loop {
                let r = round_to_denominator(&weights, q);
                let ok = r
                    .iter()
                    .zip(&weights)
                    .all(|(a, w)| (a.to_f64().unwrap() - w).abs() < tol);
                if ok {
                    break r;
                }
                q += 1;
            }
        }
    };
    let errors: Vec<f64> = rational.iter().zip(&weights).map(|(a, w)| (a.to_f64().unwrap() - w).abs()).collect();
    let components = nu
        .components()
        .iter()
        .zip(&rational)
        .map(|((m, _), a)| (m.clone(), *a))
        .collect();
    let mut out = RationalCombination {
        components,
        k,
        max_weight_error: errors.iter().cloned().fold(0.0, f64::max),
        distance: T::zero(),
        distance_bound: 0.5 * errors.iter().sum::<f64>(),
    };
    let a = nu.moments(basis)?;
    let b = out.moments(basis)?;
    out.distance = metric_d_from_moments(&a, &b, basis);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::AtomicMeasure;
    use crate::systems::{SymbolicWord, TorusPoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Tp = TorusPoint<f64>;

    fn two_diracs(w: f64) -> ConvexCombination<Tp, f64> {
        ConvexCombination::new(vec![
            (Measure::Atomic(AtomicMeasure::dirac(TorusPoint::new(0.0, 0.0))), w),
            (Measure::Atomic(AtomicMeasure::dirac(TorusPoint::new(0.5, 0.25))), 1.0 - w),
        ])
        .unwrap()
    }

    #[test]
    fn irrational_weight() {
        let basis = TestBasis::<Tp>::trig(16);
        let w = 1.0 / 2f64.sqrt();
        let r = rational_approximation(&two_diracs(w), 10, &basis).unwrap();
        let a = r.weights();
        assert!((a[0].to_f64().unwrap() - w).abs() < 1.0 / 60.0);
        assert!((a[1].to_f64().unwrap() - (1.0 - w)).abs() < 1.0 / 60.0);
        assert_eq!(a[0] + a[1], Ratio::from_integer(1));
        assert!(r.distance <= 0.1 && r.distance <= r.distance_bound + 1e-15);
    }

    #[test]
    fn rational_input_unchanged() {
        let basis = TestBasis::<Tp>::trig(16);
        let r = rational_approximation(&two_diracs(0.375), 3, &basis).unwrap();
        assert_eq!(r.weights(), vec![Ratio::new(3, 8), Ratio::new(5, 8)]);
        assert_eq!(r.distance, 0.0);
    }

    #[test]
    fn order_one_always_feasible() {
        let basis = TestBasis::<Tp>::trig(1);
        let r = rational_approximation(&two_diracs(0.123456789), 1, &basis).unwrap();
        assert!(r.distance <= 1.0);
    }

    #[test]
    fn infeasible_when_truncation_too_coarse() {
        let basis = TestBasis::<Tp>::trig(4);
        match rational_approximation(&two_diracs(0.3), 100, &basis) {
            Err(MeasureError::Infeasible { required, .. }) => assert_eq!(required, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_mixtures_reach_one_over_k() {
        let basis = TestBasis::<SymbolicWord>::cylinders(16);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for k in 1..=50 {
            let w: f64 = rng.random();
            let p: f64 = rng.random();
            let nu = ConvexCombination::new(vec![
                (Measure::Bernoulli { p }, w),
                (Measure::Atomic(AtomicMeasure::dirac(SymbolicWord::constant(1))), 1.0 - w),
            ])
            .unwrap();
            let r = rational_approximation(&nu, k, &basis).unwrap();
            assert!(r.distance <= 1.0 / k as f64);
            assert!(r.max_weight_error < 1.0 / (6.0 * k as f64));
        }
    }
}
