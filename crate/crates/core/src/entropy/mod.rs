//! Bowen balls, separated and spanning sets, Katok's measure-theoretic
//! entropy, Bowen's entropy of arbitrary sets, and the entropy distribution
//! principle.
//!
//! All optima are replaced by greedy covers; every estimate records which
//! way that biases it.

mod bowen;
mod cover;
mod edp;
mod index;
mod katok;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bowen::{bowen_set_entropy, BowenSetConfig, BowenSetResult};
pub use cover::{greedy_max_coverage, greedy_weighted_cover, GreedyCover};
pub use edp::{edp_certify, EdpConfig, EdpResult};
pub use index::{bowen_distance, coverage_lists, within_bowen, BowenIndex, OrbitTable};
pub use katok::{cover_counts, katok_entropy, CountRecord, KatokConfig, SampleKind};

use crate::systems::{DynamicalSystem, StatePoint, SystemError};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntropyError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("invalid entropy parameter: {0}")]
    InvalidParameter(String),
    #[error("sample of {sample} atoms cannot resolve {count} balls at n={n}; need at least {required}")]
    SampleTooSmall { n: usize, count: usize, sample: usize, required: usize },
    #[error("sample point {index} lies in no candidate Bowen ball at n={n}")]
    Uncoverable { index: usize, n: usize },
    #[error("measure {index} has total mass {mass}, not 1")]
    NotNormalized { index: usize, mass: f64 },
}

/// `B_n(x, eps) = {y : d(f^i x, f^i y) < eps for 0 <= i < n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowenBallSpec<P> {
    pub center: P,
    pub n: usize,
    pub eps: f64,
}

impl<P: StatePoint> BowenBallSpec<P> {
    pub fn new(center: P, n: usize, eps: f64) -> Result<Self, EntropyError> {
        if n == 0 || !(eps > 0.0) {
            return Err(EntropyError::InvalidParameter(format!("Bowen ball needs n >= 1 and eps > 0, got n={n} eps={eps}")));
        }
        Ok(Self { center, n, eps })
    }
}

pub fn bowen_ball_membership<S: DynamicalSystem>(
    system: &S,
    ball: &BowenBallSpec<S::Point>,
    y: &S::Point,
) -> Result<bool, SystemError> {
    let eps = S::Scalar::lit(ball.eps);
    let mut a = ball.center.clone();
    let mut b = y.clone();
    for i in 0..ball.n {
        if system.distance(&a, &b) >= eps {
            return Ok(false);
        }
        if i + 1 < ball.n {
            a = system.apply(&a)?;
            b = system.apply(&b)?;
        }
    }
    Ok(true)
}

/// A finite cover by Bowen balls of lengths at least `n_min`, priced at
/// exponent `s`: `value = sum_B exp(-n_B s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverCertificate<P> {
    pub cover: Vec<BowenBallSpec<P>>,
    pub s: f64,
    pub n_min: usize,
    pub value: f64,
}

impl<P> CoverCertificate<P> {
    pub fn recompute_value(&self) -> f64 {
        self.cover.iter().map(|b| (-(b.n as f64) * self.s).exp()).sum()
    }

    pub fn is_consistent(&self) -> bool {
        self.cover.iter().all(|b| b.n >= self.n_min) && self.recompute_value() == self.value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyMethod {
    SeparatedCount,
    Katok,
    BowenCover,
}

/// Direction in which the greedy surrogate moves the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bias {
    /// Greedy covers over-count minimal covers.
    Upper,
    /// Greedy separated sets under-count maximal ones.
    Lower,
    /// Growth-rate estimates where both counts carry the same greedy bias.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyParams {
    pub eps: f64,
    pub delta: Option<f64>,
    pub n_list: Vec<usize>,
    pub sample_size: usize,
    pub candidate_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Nats per iterate.
    pub value: f64,
    pub method: EntropyMethod,
    pub params: EntropyParams,
    pub bias: Bias,
    pub counts: Vec<CountRecord>,
    pub notes: Vec<String>,
}

/// Greedy maximal `(n, eps)`-separated subset of `points`, in input order.
/// Its size is a lower bound for the largest separated subset.
pub fn max_separated<S: DynamicalSystem>(
    system: &S,
    points: &[S::Point],
    n: usize,
    eps: f64,
) -> Result<Vec<usize>, EntropyError> {
    let table = OrbitTable::build(system, points, n.max(1))?;
    Ok(separated_in_table(system, &table, n, eps))
}

pub(crate) fn separated_in_table<S: DynamicalSystem>(
    system: &S,
    table: &OrbitTable<S::Point>,
    n: usize,
    eps: f64,
) -> Vec<usize> {
    let mut index = BowenIndex::new(n, eps);
    let mut kept = Vec::new();
    for i in 0..table.rows() {
        if !index.any_within(system, table, table.row(i)) {
            index.insert(i as u32, table.row(i));
            kept.push(i);
        }
    }
    kept
}

/// Greedy cover of `sample` by Bowen balls centred at `centers`; returns
/// the chosen center indices.
pub fn min_spanning<S: DynamicalSystem>(
    system: &S,
    centers: &[S::Point],
    sample: &[S::Point],
    n: usize,
    eps: f64,
) -> Result<Vec<usize>, EntropyError> {
    let ct = OrbitTable::build(system, centers, n)?;
    let st = OrbitTable::build(system, sample, n)?;
    let sets = coverage_lists(system, &ct.all_rows(), &st, n, eps);
    let mut hit = vec![false; sample.len()];
    sets.iter().flatten().for_each(|&e| hit[e as usize] = true);
    if let Some(index) = hit.iter().position(|h| !h) {
        return Err(EntropyError::Uncoverable { index, n });
    }
    let w = vec![1.0; sample.len()];
    Ok(greedy_max_coverage(&sets, &w, sample.len() as f64).chosen)
}

/// Least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{FullShift, LinearToralMap, SymbolicWord, TorusPoint};

    pub(crate) fn cylinder_reps(n: usize) -> Vec<SymbolicWord> {
        (0..1u32 << n)
            .map(|c| {
                let w: Vec<u8> = (0..n).rev().map(|i| ((c >> i) & 1) as u8).collect();
                SymbolicWord::with_constant_tail(w, 0).unwrap()
            })
            .collect()
    }

    #[test]
    fn membership_examples() {
        let sh = FullShift::<f64>::new();
        let x: SymbolicWord = "(0)".parse().unwrap();
        let y: SymbolicWord = "1(0)".parse().unwrap();
        let ball = BowenBallSpec::new(x.clone(), 1, 0.5).unwrap();
        assert!(bowen_ball_membership(&sh, &ball, &x).unwrap());
        assert!(!bowen_ball_membership(&sh, &ball, &y).unwrap());

        let cat = LinearToralMap::<f64>::cat_map();
        let c = TorusPoint::new(0.3, 0.4);
        let y = c.translate(cat.stable().scale(1e-6));
        let ball = BowenBallSpec::new(c, 10, 0.01).unwrap();
        assert!(bowen_ball_membership(&cat, &ball, &y).unwrap());
        let z = c.translate(cat.unstable().scale(1e-6));
        assert!(!bowen_ball_membership(&cat, &BowenBallSpec::new(c, 12, 0.01).unwrap(), &z).unwrap());
    }

    #[test]
    fn shift_separated_and_spanning_counts_are_exact() {
        let sh = FullShift::<f64>::new();
        for n in 1..=12 {
            let reps = cylinder_reps(n);
            assert_eq!(max_separated(&sh, &reps, n, 0.5).unwrap().len(), 1 << n);
            assert_eq!(min_spanning(&sh, &reps, &reps, n, 0.5).unwrap().len(), 1 << n);
            assert_eq!(max_separated(&sh, &reps, n, 0.75).unwrap().len(), 1 << n);
        }
    }

    #[test]
    fn trivial_counts() {
        let cat = LinearToralMap::<f64>::cat_map();
        let one = vec![TorusPoint::new(0.1, 0.1)];
        assert_eq!(max_separated(&cat, &one, 5, 0.1).unwrap().len(), 1);
        let grid: Vec<TorusPoint<f64>> = (0..64 * 64)
            .map(|i| TorusPoint::new((i % 64) as f64 / 64.0, (i / 64) as f64 / 64.0))
            .collect();
        assert_eq!(max_separated(&cat, &grid, 1, 1.0).unwrap().len(), 1);
        assert_eq!(min_spanning(&cat, &grid, &grid, 1, 1.0).unwrap().len(), 1);
    }

    #[test]
    fn uncoverable_sample_is_reported() {
        let cat = LinearToralMap::<f64>::cat_map();
        let centers = vec![TorusPoint::new(0.1, 0.1)];
        let sample = vec![TorusPoint::new(0.1, 0.1), TorusPoint::new(0.6, 0.6)];
        assert_eq!(
            min_spanning(&cat, &centers, &sample, 2, 0.05),
            Err(EntropyError::Uncoverable { index: 1, n: 2 })
        );
    }

    #[test]
    fn certificate_value_recomputes() {
        let cert = CoverCertificate {
            cover: vec![BowenBallSpec { center: 0u8, n: 3, eps: 0.5 }, BowenBallSpec { center: 1u8, n: 4, eps: 0.5 }],
            s: 0.7,
            n_min: 3,
            value: 0.0,
        };
        assert!(!cert.is_consistent());
        let cert = CoverCertificate { value: cert.recompute_value(), ..cert };
        assert!(cert.is_consistent());
        assert!((cert.value - (-2.1f64).exp() - (-2.8f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn slope_of_line() {
        assert!((least_squares_slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 2.0).abs() < 1e-15);
    }
}
