//! Birkhoff averages along single orbits: oscillation of the running
//! averages, the set of limit measures, and the block-support diagnostic.

use serde::{Deserialize, Serialize};

use crate::measures::{
    empirical_measure, metric_d_from_moments, AtomicMeasure, BasisPoint, EmpiricalError, MomentAccumulator,
    MomentVector, TestBasis,
};
use crate::systems::{DynamicalSystem, OrbitIter, StatePoint, SystemError};
use crate::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HistoricError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("orbit ended after {got} points, {needed} needed")]
    ShortOrbit { needed: usize, got: usize },
}

/// `(1/n) sum_{i<n} phi(f^i x)`.
pub fn birkhoff_average<S: DynamicalSystem>(
    system: &S,
    x: &S::Point,
    phi: impl Fn(&S::Point) -> f64,
    n: usize,
) -> Result<f64, SystemError> {
    assert!(n >= 1, "Birkhoff average needs n >= 1");
    let mut cur = x.clone();
    let mut sum = 0.0;
    for i in 0..n {
        sum += phi(&cur);
        if i + 1 < n {
            cur = system.apply(&cur)?;
        }
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricConfig {
    pub n_max: usize,
    /// Averages before this index are ignored; defaults to `n_max / 10`.
    pub burn_in: Option<usize>,
    /// Oscillation above which the orbit is flagged historic.
    pub threshold: f64,
    /// Approximate number of trace samples kept (log-spaced).
    pub trace_points: usize,
    /// Extra indices at which the running average is recorded exactly.
    pub checkpoints: Vec<usize>,
}

impl Default for HistoricConfig {
    fn default() -> Self {
        Self { n_max: 100_000, burn_in: None, threshold: 0.1, trace_points: 512, checkpoints: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricReport {
    pub label: String,
    pub n_max: usize,
    pub burn_in: usize,
    /// `(n, average of the first n values)`, log-spaced plus checkpoints.
    pub trace: Vec<(usize, f64)>,
    /// Smallest and largest running average over `[burn_in, n_max]`.
    pub tail_min: f64,
    pub tail_max: f64,
    pub gap: f64,
    pub historic: bool,
    /// Running averages at the requested checkpoints.
    pub checkpoints: Vec<(usize, f64)>,
    /// Largest `|avg_{n+1} - avg_n| (n + 1) / (2 sup|phi|)` seen; at most 1.
    pub drift_ratio: f64,
}

impl HistoricReport {
    /// CSV with header `n,average`.
    pub fn trace_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "average"])?;
        for (n, a) in &self.trace {
            w.write_record([n.to_string(), a.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn log_spaced(n_max: usize, points: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..points.max(2))
        .map(|i| (n_max as f64).powf(i as f64 / (points.max(2) - 1) as f64).round() as usize)
        .filter(|&n| n >= 1 && n <= n_max)
        .collect();
    v.push(n_max);
    v.sort_unstable();
    v.dedup();
    v
}

/// Running averages of `phi` along the orbit of `x` and their oscillation
/// after the burn-in, as a finite-horizon surrogate for `liminf < limsup`.
pub fn detect_historic<S: DynamicalSystem>(
    system: &S,
    x: &S::Point,
    phi: impl Fn(&S::Point) -> f64,
    phi_sup: f64,
    label: impl Into<String>,
    config: &HistoricConfig,
) -> Result<HistoricReport, HistoricError> {
    let mut orbit = OrbitIter::new(system, x.clone());
    let report = detect_historic_along(orbit.by_ref(), phi, phi_sup, label, config);
    orbit.finish()?;
    report
}

/// [`detect_historic`] on an explicitly given orbit.
pub fn detect_historic_along<P>(
    orbit: impl IntoIterator<Item = P>,
    phi: impl Fn(&P) -> f64,
    phi_sup: f64,
    label: impl Into<String>,
    config: &HistoricConfig,
) -> Result<HistoricReport, HistoricError> {
    let n_max = config.n_max;
    assert!(n_max >= 1, "horizon must be positive");
    let burn_in = config.burn_in.unwrap_or(n_max / 10).max(1);
    assert!(burn_in < n_max || n_max == 1, "burn-in must be below the horizon");
    let mut marks = log_spaced(n_max, config.trace_points);
    marks.extend(config.checkpoints.iter().copied().filter(|&n| n >= 1 && n <= n_max));
    marks.sort_unstable();
    marks.dedup();
    let mut next_mark = 0;
    let mut trace = Vec::with_capacity(marks.len());
    let mut checkpoints = Vec::new();
    let mut sum = 0.0;
    let mut prev_avg = None::<f64>;
    let mut drift_ratio: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut seen = 0;
    for p in orbit.into_iter().take(n_max) {
        seen += 1;
        let n = seen;
        sum += phi(&p);
        let avg = sum / n as f64;
        if let Some(prev) = prev_avg {
            if phi_sup > 0.0 {
                drift_ratio = drift_ratio.max((avg - prev).abs() * n as f64 / (2.0 * phi_sup));
            }
        }
        prev_avg = Some(avg);
        if n >= burn_in {
            lo = lo.min(avg);
            hi = hi.max(avg);
        }
        if next_mark < marks.len() && marks[next_mark] == n {
            trace.push((n, avg));
            if config.checkpoints.contains(&n) {
                checkpoints.push((n, avg));
            }
            next_mark += 1;
        }
    }
    if seen < n_max {
        return Err(HistoricError::ShortOrbit { needed: n_max, got: seen });
    }
    let gap = hi - lo;
    Ok(HistoricReport {
        label: label.into(),
        n_max,
        burn_in,
        trace,
        tail_min: lo,
        tail_max: hi,
        gap,
        historic: gap > config.threshold,
        checkpoints,
        drift_ratio,
    })
}

/// Moments of `E_n` for every `n` in the increasing `n_grid`, in one pass.
pub fn empirical_moments_along<P: BasisPoint<T>, T: Real>(
    orbit: impl IntoIterator<Item = P>,
    basis: &TestBasis<P>,
    n_grid: &[usize],
) -> Result<Vec<MomentVector<T>>, HistoricError> {
    assert!(
        n_grid.windows(2).all(|w| w[0] < w[1]) && n_grid.first().is_none_or(|&n| n >= 1),
        "n_grid must be increasing and positive"
    );
    let Some(&n_max) = n_grid.last() else { return Ok(Vec::new()) };
    let mut acc = MomentAccumulator::new(basis);
    let mut out = Vec::with_capacity(n_grid.len());
    for p in orbit.into_iter().take(n_max) {
        acc.push(basis, &p);
        if acc.count() == n_grid[out.len()] {
            out.push(acc.snapshot());
        }
    }
    if out.len() < n_grid.len() {
        return Err(HistoricError::ShortOrbit { needed: n_max, got: acc.count() });
    }
    Ok(out)
}

/// Greedy clusters of `{E_n(x) : n in n_grid}` in the metric `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSetEstimate<T> {
    /// Moment vectors of the cluster representatives.
    pub candidates: Vec<MomentVector<T>>,
    /// The `n` whose empirical measure represents each cluster.
    pub representative_n: Vec<usize>,
    pub cluster_radius: f64,
    pub n_grid: Vec<usize>,
    /// Cluster index of each grid point.
    pub assignment: Vec<usize>,
}

impl<T: Real> LimitSetEstimate<T> {
    /// Rebuilds the representatives as atomic measures `E_n(x)`.
    pub fn representative_measures<S>(
        &self,
        system: &S,
        x: &S::Point,
    ) -> Result<Vec<AtomicMeasure<S::Point, S::Scalar>>, EmpiricalError>
    where
        S: DynamicalSystem<Scalar = T>,
    {
        self.representative_n.iter().map(|&n| empirical_measure(system, x, n)).collect()
    }
}

/// Walks the orbit once, snapshotting the empirical moments at each grid
/// point and clustering them: a snapshot joins the first representative
/// within `radius`, otherwise it starts a new cluster.
pub fn estimate_limit_set<S>(
    system: &S,
    x: &S::Point,
    basis: &TestBasis<S::Point>,
    n_grid: &[usize],
    radius: f64,
) -> Result<LimitSetEstimate<S::Scalar>, HistoricError>
where
    S: DynamicalSystem,
    S::Point: BasisPoint<S::Scalar>,
{
    let mut orbit = OrbitIter::new(system, x.clone());
    let est = estimate_limit_set_along(orbit.by_ref(), basis, n_grid, radius);
    orbit.finish()?;
    est
}

/// [`estimate_limit_set`] on an explicitly given orbit.
pub fn estimate_limit_set_along<P: BasisPoint<T>, T: Real>(
    orbit: impl IntoIterator<Item = P>,
    basis: &TestBasis<P>,
    n_grid: &[usize],
    radius: f64,
) -> Result<LimitSetEstimate<T>, HistoricError> {
    let snaps = empirical_moments_along(orbit, basis, n_grid)?;
    let mut est = LimitSetEstimate {
        candidates: Vec::new(),
        representative_n: Vec::new(),
        cluster_radius: radius,
        n_grid: n_grid.to_vec(),
        assignment: Vec::new(),
    };
    for (snap, &n) in snaps.into_iter().zip(n_grid) {
        let found = est
            .candidates
            .iter()
            .position(|c: &MomentVector<T>| metric_d_from_moments(&c.values, &snap.values, basis).as_f64() < radius);
        let idx = found.unwrap_or_else(|| {
            est.candidates.push(snap);
            est.representative_n.push(n);
            est.candidates.len() - 1
        });
        est.assignment.push(idx);
    }
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NMembershipReport {
    pub member: bool,
    /// Mass each candidate places within `region_radius` of the block sample.
    pub block_mass: Vec<f64>,
    pub tolerance: f64,
    pub region_radius: f64,
    pub note: String,
}

/// Whether some candidate limit measure puts at least `1 - tolerance` of
/// its mass within `region_radius` of the sampled block points.
pub fn n_membership_diagnostic<S: DynamicalSystem>(
    system: &S,
    candidates: &[AtomicMeasure<S::Point, S::Scalar>],
    block_sample: &[S::Point],
    region_radius: f64,
    tolerance: f64,
) -> NMembershipReport {
    let mut cells: rustc_hash::FxHashMap<u64, Vec<usize>> = Default::default();
    for (i, p) in block_sample.iter().enumerate() {
        cells.entry(p.cell(region_radius)).or_default().push(i);
    }
    let r = S::Scalar::lit(region_radius);
    let mut nbrs = Vec::new();
    let mut near = |p: &S::Point| {
        nbrs.clear();
        p.neighbor_cells(region_radius, &mut nbrs);
        nbrs.iter().any(|c| {
            cells
                .get(c)
                .is_some_and(|ids| ids.iter().any(|&i| system.distance(p, &block_sample[i]) <= r))
        })
    };
    let block_mass: Vec<f64> = candidates
        .iter()
        .map(|m| m.atoms().iter().filter(|(p, _)| near(p)).map(|(_, w)| w.as_f64()).sum())
        .collect();
    NMembershipReport {
        member: block_mass.iter().any(|&m| m >= 1.0 - tolerance),
        block_mass,
        tolerance,
        region_radius,
        note: "sample-mass surrogate: a measure nearly supported near the block sample can pass without being supported on the block".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolicity::{pesin_block_membership, PesinBlockParams};
    use crate::measures::{metric_d, sampling, Measure};
    use crate::systems::{FullShift, LinearToralMap, SymbolicWord, TorusPoint};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cos_x(p: &TorusPoint<f64>) -> f64 {
        (std::f64::consts::TAU * p.x()).cos()
    }

    #[test]
    fn averages_of_trivial_observables() {
        let cat = LinearToralMap::<f64>::cat_map();
        let x = TorusPoint::new(0.3, 0.2);
        assert_eq!(birkhoff_average(&cat, &x, |_| 2.5, 77).unwrap(), 2.5);
        let o = TorusPoint::origin();
        assert_eq!(birkhoff_average(&cat, &o, cos_x, 1000).unwrap(), 1.0);
    }

    #[test]
    fn generic_cat_point_is_not_historic() {
        let cat = LinearToralMap::<f64>::cat_map();
        let x = TorusPoint::new(0.577215664901, 0.141421356237);
        assert!(birkhoff_average(&cat, &x, cos_x, 100_000).unwrap().abs() < 0.02);
        let cfg = HistoricConfig { n_max: 100_000, ..HistoricConfig::default() };
        let r = detect_historic(&cat, &x, cos_x, 1.0, "cos", &cfg).unwrap();
        assert!(r.gap <= 0.05 && !r.historic, "{}", r.gap);
        assert!(r.drift_ratio <= 1.0);
        assert!(r.trace.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(r.trace.iter().all(|(_, a)| (-1.0..=1.0).contains(a)));
    }

    #[test]
    fn periodic_point_gap_shrinks() {
        let sh = FullShift::<f64>::new();
        let x: SymbolicWord = "(001)".parse().unwrap();
        let ind = |w: &SymbolicWord| w.symbol(0) as f64;
        let mut last = f64::INFINITY;
        for n_max in [100, 1000, 10_000] {
            let cfg = HistoricConfig { n_max, ..HistoricConfig::default() };
            let r = detect_historic(&sh, &x, ind, 1.0, "x0", &cfg).unwrap();
            assert!(r.gap < last && r.gap <= 3.0 / r.burn_in as f64);
            last = r.gap;
        }
    }

    #[test]
    fn checkpoints_and_csv() {
        let sh = FullShift::<f64>::new();
        let x: SymbolicWord = "(01)".parse().unwrap();
        let cfg = HistoricConfig { n_max: 50, checkpoints: vec![7, 20], ..HistoricConfig::default() };
        let r = detect_historic(&sh, &x, |w| w.symbol(0) as f64, 1.0, "x0", &cfg).unwrap();
        assert_eq!(r.checkpoints, vec![(7, 3.0 / 7.0), (20, 0.5)]);
        let csv = r.trace_csv().unwrap();
        assert!(csv.starts_with("n,average\n1,0\n"));
    }

    #[test]
    fn limit_sets() {
        let cat = LinearToralMap::<f64>::cat_map();
        let basis = TestBasis::<TorusPoint<f64>>::trig(16);
        let fixed = estimate_limit_set(&cat, &TorusPoint::origin(), &basis, &[10, 100, 1000], 0.05).unwrap();
        assert_eq!(fixed.candidates.len(), 1);
        let m = &fixed.representative_measures(&cat, &TorusPoint::origin()).unwrap()[0];
        assert_eq!(m.len(), 1);

        let x = TorusPoint::new(0.577215664901, 0.141421356237);
        let grid: Vec<usize> = (1..=10).map(|i| i * 10_000).collect();
        let generic = estimate_limit_set(&cat, &x, &basis, &grid, 0.05).unwrap();
        assert_eq!(generic.candidates.len(), 1);
        let d = metric_d(&generic.candidates[0], &Measure::Uniform, &basis).unwrap().value;
        assert!(d < 0.05, "{d}");
    }

    #[test]
    fn block_support_diagnostic() {
        let cat = LinearToralMap::<f64>::cat_map();
        let o = TorusPoint::origin();
        let dirac = AtomicMeasure::dirac(o);
        let far = AtomicMeasure::dirac(TorusPoint::new(0.5, 0.5));
        assert!(n_membership_diagnostic(&cat, &[dirac.clone()], &[o], 0.01, 0.05).member);
        assert!(!n_membership_diagnostic(&cat, &[far], &[o], 0.01, 0.05).member);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let params = PesinBlockParams { beta1: 0.5, beta2: 0.5, horizon: 10, ..PesinBlockParams::default() };
        let block: Vec<TorusPoint<f64>> = sampling::lebesgue(&mut rng, 10_000)
            .into_iter()
            .filter(|p| pesin_block_membership(&cat, p, &params).unwrap().member)
            .collect();
        assert_eq!(block.len(), 10_000);
        let lebesgue_like = empirical_measure(&cat, &TorusPoint::new(0.577215664901, 0.141421356237), 20_000).unwrap();
        let r = n_membership_diagnostic(&cat, &[lebesgue_like], &block, 0.02, 0.05);
        assert!(r.member, "{:?}", r.block_mass);
    }
}
