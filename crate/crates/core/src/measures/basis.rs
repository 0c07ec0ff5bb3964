//! Countable test families used by the metric `D` on probability measures.

use std::fmt;
use std::marker::PhantomData;

use serde::{Deserialize, Serialize};

use crate::systems::{StatePoint, SymbolicWord, TorusPoint};
use crate::Real;

/// One function of a test family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisFunction {
    /// `cos 2pi(m1 x + m2 y)` or `sin 2pi(m1 x + m2 y)`; `(0, 0, cos)` is the constant 1.
    Trig { m1: i64, m2: i64, sine: bool },
    /// Indicator of the cylinder of words starting with `word`.
    Cylinder { word: Vec<u8> },
}

impl BasisFunction {
    pub fn sup_norm(&self) -> f64 {
        1.0
    }
}

impl fmt::Display for BasisFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisFunction::Trig { m1: 0, m2: 0, .. } => write!(f, "1"),
            BasisFunction::Trig { m1, m2, sine } => {
                write!(f, "{}(2pi({m1}x+{m2}y))", if *sine { "sin" } else { "cos" })
            }
            BasisFunction::Cylinder { word } => {
                let s: String = word.iter().map(|&b| char::from(b'0' + b)).collect();
                write!(f, "1[{s}]")
            }
        }
    }
}

/// Points that can evaluate the functions of their test family.
pub trait BasisPoint<T: Real>: StatePoint {
    fn eval_basis(&self, functions: &[BasisFunction], out: &mut [T]);
}

impl<T: Real> BasisPoint<T> for TorusPoint<T> {
    fn eval_basis(&self, functions: &[BasisFunction], out: &mut [T]) {
        let tau = T::TAU();
        for (f, o) in functions.iter().zip(out.iter_mut()) {
            *o = match f {
                BasisFunction::Trig { m1, m2, sine } => {
                    let arg = tau * (T::lit(*m1 as f64) * self.x() + T::lit(*m2 as f64) * self.y());
                    if *sine {
                        arg.sin()
                    } else {
                        arg.cos()
                    }
                }
                BasisFunction::Cylinder { .. } => unreachable!("cylinder functions are not defined on the torus"),
            };
        }
    }
}

impl<T: Real> BasisPoint<T> for SymbolicWord {
    fn eval_basis(&self, functions: &[BasisFunction], out: &mut [T]) {
        let depth = functions
            .iter()
            .map(|f| match f {
                BasisFunction::Cylinder { word } => word.len(),
                BasisFunction::Trig { .. } => unreachable!("trigonometric functions are not defined on the shift"),
            })
            .max()
            .unwrap_or(0);
        let mut buf = [0u8; 64];
        let head: Vec<u8>;
        let head: &[u8] = if depth <= buf.len() {
            for (i, b) in buf[..depth].iter_mut().enumerate() {
                *b = self.symbol(i);
            }
            &buf[..depth]
        } else {
            head = self.take(depth);
            &head
        };
        for (f, o) in functions.iter().zip(out.iter_mut()) {
            if let BasisFunction::Cylinder { word } = f {
                *o = if head.starts_with(word) { T::one() } else { T::zero() };
            }
        }
    }
}

/// The first `I` functions `phi_1, ..., phi_I` of a fixed enumeration, with
/// their sup norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestBasis<P> {
    version: String,
    functions: Vec<BasisFunction>,
    norms: Vec<f64>,
    #[serde(skip)]
    _point: PhantomData<fn() -> P>,
}

pub const TRIG_BASIS_VERSION: &str = "trig-v1";
pub const CYLINDER_BASIS_VERSION: &str = "cylinder-v1";

/// Integer frequencies up to sign, enumerated by `|m1|+|m2|`, then
/// `max(|m1|,|m2|)`, then `m1` and `m2` descending.
fn frequencies() -> impl Iterator<Item = (i64, i64)> {
    (1i64..).flat_map(|l1| {
        let mut level: Vec<(i64, i64)> = (-l1..=l1)
            .flat_map(|m1| {
                let r = l1 - m1.abs();
                let mut v = vec![(m1, r)];
                if r != 0 {
                    v.push((m1, -r));
                }
                v
            })
            .filter(|&(m1, m2)| m1 > 0 || (m1 == 0 && m2 > 0))
            .collect();
        level.sort_by_key(|&(m1, m2)| (m1.abs().max(m2.abs()), -m1, -m2));
        level.into_iter()
    })
}

impl<P> TestBasis<P> {
    pub fn truncation(&self) -> usize {
        self.functions.len()
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Weight `1 / (2^{i+1} ||phi_i||)` of the `i`-th term (1-based `i`).
    pub fn weight(&self, i: usize) -> f64 {
        1.0 / (2f64.powi(i as i32 + 1) * self.norms[i - 1])
    }

    /// Upper bound on the omitted terms `i > I`.
    pub fn truncation_bound(&self) -> f64 {
        2f64.powi(-(self.truncation() as i32))
    }

    fn from_functions(version: &str, functions: Vec<BasisFunction>) -> Self {
        let norms = functions.iter().map(BasisFunction::sup_norm).collect();
        Self { version: version.into(), functions, norms, _point: PhantomData }
    }
}

impl<T: Real> TestBasis<TorusPoint<T>> {
    /// `1, cos 2pi x, sin 2pi x, cos 2pi y, sin 2pi y, cos 2pi(x+y), ...`.
    pub fn trig(truncation: usize) -> Self {
        assert!(truncation >= 1, "basis truncation must be at least 1");
        let mut fs = vec![BasisFunction::Trig { m1: 0, m2: 0, sine: false }];
        for (m1, m2) in frequencies() {
            if fs.len() >= truncation {
                break;
            }
            fs.push(BasisFunction::Trig { m1, m2, sine: false });
            fs.push(BasisFunction::Trig { m1, m2, sine: true });
        }
        fs.truncate(truncation);
        Self::from_functions(TRIG_BASIS_VERSION, fs)
    }
}

impl TestBasis<SymbolicWord> {
    /// Cylinder indicators `1[0], 1[1], 1[00], 1[01], ...`.
    pub fn cylinders(truncation: usize) -> Self {
        assert!(truncation >= 1, "basis truncation must be at least 1");
        let mut fs = Vec::with_capacity(truncation);
        'outer: for depth in 1usize.. {
            for code in 0u64..(1 << depth) {
                if fs.len() == truncation {
                    break 'outer;
                }
                let word = (0..depth).map(|i| ((code >> (depth - 1 - i)) & 1) as u8).collect();
                fs.push(BasisFunction::Cylinder { word });
            }
        }
        Self::from_functions(CYLINDER_BASIS_VERSION, fs)
    }
}

impl<P> TestBasis<P> {
    pub fn eval<T: Real>(&self, p: &P, out: &mut [T])
    where
        P: BasisPoint<T>,
    {
        p.eval_basis(&self.functions, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_order() {
        let b = TestBasis::<TorusPoint<f64>>::trig(16);
        let names: Vec<String> = b.functions().iter().map(|f| f.to_string()).collect();
        assert_eq!(
            names[..8],
            [
                "1",
                "cos(2pi(1x+0y))",
                "sin(2pi(1x+0y))",
                "cos(2pi(0x+1y))",
                "sin(2pi(0x+1y))",
                "cos(2pi(1x+1y))",
                "sin(2pi(1x+1y))",
                "cos(2pi(1x+-1y))",
            ]
        );
        assert_eq!(b.truncation(), 16);
        let mut seen = std::collections::HashSet::new();
        for f in b.functions() {
            assert!(seen.insert(f.clone()));
        }
    }

    #[test]
    fn cylinder_order() {
        let b = TestBasis::<SymbolicWord>::cylinders(7);
        let names: Vec<String> = b.functions().iter().map(|f| f.to_string()).collect();
        assert_eq!(names, ["1[0]", "1[1]", "1[00]", "1[01]", "1[10]", "1[11]", "1[000]"]);
        let x: SymbolicWord = "01(1)".parse().unwrap();
        let mut out = [0.0f64; 7];
        b.eval(&x, &mut out);
        assert_eq!(out, [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn trig_values() {
        let b = TestBasis::<TorusPoint<f64>>::trig(5);
        let mut out = [0.0; 5];
        b.eval(&TorusPoint::new(0.25, 0.5), &mut out);
        let want = [1.0, 0.0, 1.0, -1.0, 0.0];
        for (a, w) in out.iter().zip(want) {
            assert!((a - w).abs() < 1e-15);
        }
    }
}
