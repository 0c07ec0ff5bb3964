use std::collections::HashMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::MeasureError;
use crate::systems::{DynamicalSystem, StatePoint, SystemError};
use crate::Real;

/// Finitely supported probability measure `sum_j w_j delta_{p_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure<P, T> {
    atoms: Vec<(P, T)>,
    label: String,
}

fn weight_tolerance<T: Real>(n: usize) -> T {
    T::lit(1e-12).max(T::epsilon() * T::from_count(n.max(1)) * T::lit(4.0))
}

impl<P: StatePoint, T: Real> AtomicMeasure<P, T> {
    /// Merges coincident atoms and checks the weights form a probability vector.
    pub fn new(atoms: Vec<(P, T)>, label: impl Into<String>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        let mut index: HashMap<P::Key, usize> = HashMap::with_capacity(atoms.len());
        let mut merged: Vec<(P, T)> = Vec::with_capacity(atoms.len());
        let mut total = T::zero();
        for (p, w) in atoms {
            if !(w > T::zero()) || !w.is_finite() {
                return Err(MeasureError::BadWeight(w.as_f64()));
            }
            total = total + w;
            match index.entry(p.dedup_key()) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    let slot = &mut merged[*e.get()].1;
                    *slot = *slot + w;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(merged.len());
                    merged.push((p, w));
                }
            }
        }
        if (total - T::one()).abs() > weight_tolerance::<T>(merged.len()) {
            return Err(MeasureError::NotNormalized(total.as_f64()));
        }
        Ok(Self { atoms: merged, label: label.into() })
    }

    pub fn dirac(p: P) -> Self {
        Self { atoms: vec![(p, T::one())], label: "dirac".into() }
    }

    /// Equal mass on every listed point (repeats accumulate).
    pub fn uniform(points: Vec<P>, label: impl Into<String>) -> Result<Self, MeasureError> {
        if points.is_empty() {
            return Err(MeasureError::Empty);
        }
        let n = T::from_count(points.len());
        let mut index: HashMap<P::Key, usize> = HashMap::new();
        let mut counted: Vec<(P, usize)> = Vec::new();
        for p in points {
            match index.entry(p.dedup_key()) {
                std::collections::hash_map::Entry::Occupied(e) => counted[*e.get()].1 += 1,
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(counted.len());
                    counted.push((p, 1));
                }
            }
        }
        let atoms = counted.into_iter().map(|(p, c)| (p, T::from_count(c) / n)).collect();
        Ok(Self { atoms, label: label.into() })
    }

    /// `sum_j c_j mu_j` for a probability vector `c`.
    pub fn convex_combination(parts: &[(&Self, T)], label: impl Into<String>) -> Result<Self, MeasureError> {
        let atoms = parts
            .iter()
            .filter(|(_, c)| *c > T::zero())
            .flat_map(|(m, c)| m.atoms.iter().map(move |(p, w)| (p.clone(), *w * *c)))
            .collect();
        Self::new(atoms, label)
    }

    pub fn atoms(&self) -> &[(P, T)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn total_mass(&self) -> T {
        self.atoms.iter().map(|(_, w)| *w).sum()
    }

    pub fn integrate(&self, phi: impl Fn(&P) -> T) -> T {
        self.atoms.iter().map(|(p, w)| *w * phi(p)).sum()
    }

    /// Mass of the set `{p : pred(p)}`.
    pub fn mass_where(&self, pred: impl Fn(&P) -> bool) -> T {
        self.atoms.iter().filter(|(p, _)| pred(p)).map(|(_, w)| *w).sum()
    }
}

/// `E_n(x) = (1/n) sum_{i<n} delta_{f^i x}`.
pub fn empirical_measure<S: DynamicalSystem>(
    system: &S,
    x: &S::Point,
    n: usize,
) -> Result<AtomicMeasure<S::Point, S::Scalar>, EmpiricalError> {
    if n == 0 {
        return Err(EmpiricalError::ZeroLength);
    }
    let orbit = system.orbit(x, n)?;
    AtomicMeasure::uniform(orbit, format!("empirical n={n}")).map_err(EmpiricalError::Measure)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmpiricalError {
    #[error("empirical measure needs n >= 1")]
    ZeroLength,
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Measure(MeasureError),
}

#[derive(Serialize, Deserialize)]
struct AtomRecord<P> {
    point: P,
    weight: String,
}

#[derive(Serialize, Deserialize)]
struct MeasureRecord<P> {
    label: String,
    atoms: Vec<AtomRecord<P>>,
}

impl<P: StatePoint + Serialize, T: Real> Serialize for AtomicMeasure<P, T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Borrowed<'a, P> {
            label: &'a str,
            atoms: Vec<AtomRecord<&'a P>>,
        }
        Borrowed {
            label: &self.label,
            atoms: self
                .atoms
                .iter()
                .map(|(p, w)| AtomRecord { point: p, weight: w.to_string() })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de, P: StatePoint + DeserializeOwned, T: Real> Deserialize<'de> for AtomicMeasure<P, T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let rec = MeasureRecord::<P>::deserialize(deserializer)?;
        let atoms = rec
            .atoms
            .into_iter()
            .map(|a| {
                a.weight
                    .parse::<T>()
                    .map(|w| (a.point, w))
                    .map_err(|_| D::Error::custom(format!("bad weight {:?}", a.weight)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        AtomicMeasure::new(atoms, rec.label).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{FullShift, LinearToralMap, SymbolicWord, TorusPoint};

    #[test]
    fn fixed_point_gives_dirac() {
        let cat = LinearToralMap::<f64>::cat_map();
        let m = empirical_measure(&cat, &TorusPoint::origin(), 50).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.atoms()[0].1, 1.0);
    }

    #[test]
    fn period_two_orbit_splits_evenly() {
        let sh = FullShift::<f64>::new();
        let x: SymbolicWord = "(01)".parse().unwrap();
        let m = empirical_measure(&sh, &x, 4).unwrap();
        assert_eq!(m.len(), 2);
        for (_, w) in m.atoms() {
            assert_eq!(*w, 0.5);
        }
    }

    #[test]
    fn integrate_basics() {
        let a = TorusPoint::new(0.1, 0.2);
        let b = TorusPoint::new(0.7, 0.2);
        let m = AtomicMeasure::<_, f64>::new(vec![(a, 0.5), (b, 0.5)], "pair").unwrap();
        assert_eq!(m.integrate(|_| 3.0), 3.0);
        assert_eq!(m.integrate(|p| if p.x() > 0.5 { 1.0 } else { 0.0 }), 0.5);
        assert_eq!(AtomicMeasure::<_, f64>::dirac(a).integrate(|p| p.x()), 0.1);
    }

    #[test]
    fn rejects_bad_weights() {
        let a = TorusPoint::new(0.1, 0.2);
        assert!(AtomicMeasure::<_, f64>::new(vec![(a, 0.6)], "").is_err());
        assert!(AtomicMeasure::<_, f64>::new(vec![(a, 1.5), (a, -0.5)], "").is_err());
        assert!(AtomicMeasure::<TorusPoint<f64>, f64>::new(vec![], "").is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let m = AtomicMeasure::<_, f64>::new(
            vec![(TorusPoint::new(0.1, 0.2), 1.0 / 3.0), (TorusPoint::new(0.3, 0.9), 2.0 / 3.0)],
            "thirds",
        )
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: AtomicMeasure<TorusPoint<f64>, f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(s.contains("\"0.3333333333333333\""));
    }
}
