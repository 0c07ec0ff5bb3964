//! End-to-end construction of a historic point and of the ensembles `L_k`.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Pow, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::{Gluable, ShadowResult};
use super::library::{build_segment_library, LibraryConfig, SegmentLibrary};
use super::pseudo::{assemble_pseudo_orbit, Slot};
use super::schedule::{build_schedule, GluingSchedule, ScheduleConfig};
use super::{rho, GluingError, Target};
use crate::Real;
use crate::historic::{detect_historic_along, HistoricConfig, HistoricReport};
use crate::measures::{metric_d_from_moments, AtomicMeasure, BasisPoint, MomentAccumulator, Moments, TestBasis};

/// A bounded observable `phi` with a known bound on `|phi|`.
#[derive(Clone)]
pub struct Observable<P> {
    pub label: String,
    pub f: Arc<dyn Fn(&P) -> f64 + Send + Sync>,
    pub sup: f64,
}

impl<P> Observable<P> {
    pub fn new(label: impl Into<String>, sup: f64, f: impl Fn(&P) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f), sup }
    }
}

impl<P> fmt::Debug for Observable<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable").field("label", &self.label).field("sup", &self.sup).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstructParams {
    pub library: LibraryConfig,
    pub schedule: ScheduleConfig,
    /// Orbit length checked by the historic detector; defaults to `M_{k_max+1}`.
    pub horizon: Option<u64>,
    /// Defaults to `M_{k_max - 1}` (or a tenth of the horizon at `k_max = 1`).
    pub burn_in: Option<u64>,
    pub threshold: f64,
    pub trace_points: usize,
    /// Required bound on the checkpoint distances, if any.
    pub tolerance: Option<f64>,
    /// First level `q` whose checkpoint `M_q` is held to `tolerance`.
    pub verify_from: usize,
    /// Upper limit on the certified shadowing distance.
    pub shadow_limit: Option<f64>,
}

impl Default for ConstructParams {
    fn default() -> Self {
        Self {
            library: LibraryConfig::default(),
            schedule: ScheduleConfig::default(),
            horizon: None,
            burn_in: None,
            threshold: 0.1,
            trace_points: 256,
            tolerance: None,
            verify_from: 2,
            shadow_limit: None,
        }
    }
}

/// `D(E_{M_q}(z), mu_{rho(q-1)})` at the end of level `q - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub q: usize,
    pub n: u64,
    pub target: usize,
    pub distance: f64,
    /// Birkhoff average of the observable over the first `n` points.
    pub average: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructedPoint<P> {
    pub z: P,
    pub library: SegmentLibrary<P>,
    pub schedule: GluingSchedule,
    pub shadow: ShadowResult<P>,
    pub pseudo_len: u64,
    pub boundaries: u64,
    pub jumps: usize,
    pub max_jump: f64,
    pub report: HistoricReport,
    pub checkpoints: Vec<Checkpoint>,
}

fn target_moments<S>(
    targets: [&Target<S::Point, S::Scalar>; 2],
    basis: &TestBasis<S::Point>,
) -> Result<[Vec<S::Scalar>; 2], GluingError>
where
    S: Gluable,
    S::Point: BasisPoint<S::Scalar>,
{
    Ok([targets[0].combination()?.moments(basis)?, targets[1].combination()?.moments(basis)?])
}

/// Builds the library and schedule, assembles the pseudo-orbit through
/// level `k_max` taking the first segment at every slot, shadows it, and
/// follows the resulting orbit with the historic detector and the
/// checkpoint distances.
pub fn construct_historic_point<S>(
    system: &S,
    targets: [&Target<S::Point, S::Scalar>; 2],
    basis: &TestBasis<S::Point>,
    phi: &Observable<S::Point>,
    params: &ConstructParams,
) -> Result<ConstructedPoint<S::Point>, GluingError>
where
    S: Gluable,
    S::Point: BasisPoint<S::Scalar>,
{
    let k_max = params.library.k_max;
    let library = build_segment_library(system, targets, basis, &params.library)?;
    let schedule = build_schedule(&library, k_max, &params.schedule)?;
    let pseudo = assemble_pseudo_orbit(system, &library, &schedule, k_max, |_, _| 0)?;
    let shadow = system.shadow(&pseudo)?;
    if let Some(limit) = params.shadow_limit {
        if shadow.certified_local > limit {
            return Err(GluingError::ShadowBound { bound: shadow.certified_local, limit });
        }
    }
    let (pseudo_len, boundaries, jumps, max_jump) = (pseudo.len, pseudo.boundaries, pseudo.jumps.len(), pseudo.max_jump);
    drop(pseudo);

    let total = schedule.total_len(k_max);
    let horizon = params.horizon.unwrap_or(total);
    if horizon < 2 {
        return Err(GluingError::InvalidParameter(format!("horizon {horizon} is too short")));
    }
    let burn_in = params.burn_in.unwrap_or(if k_max >= 2 { schedule.m(k_max - 1) } else { horizon / 10 });
    let marks: Vec<(usize, u64)> = (2..=k_max + 1).map(|q| (q, schedule.m(q))).collect();
    let pass = horizon.max(total);
    let config = HistoricConfig {
        n_max: to_usize(horizon)?,
        burn_in: Some(to_usize(burn_in.clamp(1, horizon - 1))?),
        threshold: params.threshold,
        trace_points: params.trace_points,
        checkpoints: marks.iter().map(|&(_, m)| m as usize).filter(|&m| m as u64 <= horizon).collect(),
    };

    let moments = target_moments::<S>(targets, basis)?;
    let mut acc = MomentAccumulator::<S::Scalar>::new(basis);
    let mut sum = 0.0f64;
    let mut next = 0;
    let mut checkpoints = Vec::with_capacity(marks.len());
    let f = phi.f.clone();
    let mut feed = shadow.orbit_iter(system).take(to_usize(pass)?).inspect(|p| {
        acc.push(basis, p);
        sum += f(p);
        while next < marks.len() && acc.count() as u64 == marks[next].1 {
            let (q, n) = marks[next];
            let target = rho(q - 1);
            let d = metric_d_from_moments(&acc.snapshot().values, &moments[target - 1], basis);
            checkpoints.push(Checkpoint { q, n, target, distance: d.as_f64(), average: sum / n as f64 });
            next += 1;
        }
    });
    let report = detect_historic_along(feed.by_ref().take(config.n_max), |p| f(p), phi.sup, phi.label.clone(), &config)?;
    feed.for_each(drop);

    if let Some(tol) = params.tolerance {
        if let Some(c) = checkpoints.iter().find(|c| c.q >= params.verify_from && !(c.distance <= tol)) {
            return Err(GluingError::Verification { q: c.q, n: c.n, target: c.target, distance: c.distance, tolerance: tol });
        }
    }
    Ok(ConstructedPoint {
        z: shadow.z.clone(),
        library,
        schedule,
        shadow,
        pseudo_len,
        boundaries,
        jumps,
        max_jump,
        report,
        checkpoints,
    })
}

fn to_usize(n: u64) -> Result<usize, GluingError> {
    usize::try_from(n).map_err(|_| GluingError::TooLong { len: n, limit: usize::MAX as u64 })
}

/// `#L_k = prod_{q <= k} prod_j #W_{n(q,j)}^(T_q N_q C_{q,j})`.
pub fn ensemble_size<P>(library: &SegmentLibrary<P>, schedule: &GluingSchedule, k: usize) -> BigUint {
    let mut size = BigUint::one();
    for q in 1..=k {
        let l = schedule.level(q);
        for (j, &c) in l.copies.iter().enumerate() {
            let w = library.entry(q, j + 1).map_or(0, |e| e.starts.len());
            if w != 1 {
                size *= Pow::pow(BigUint::from(w), c * l.t);
            }
        }
    }
    size
}

/// The points of `L_k` and `alpha_k`, the uniform measure on them.
#[derive(Debug, Clone)]
pub struct Ensemble<P, T> {
    pub k: usize,
    /// `#L_k` counted with multiplicity over segment choices.
    pub size: BigUint,
    /// Whether every choice was enumerated; otherwise `points` is a sample.
    pub enumerated: bool,
    pub points: Vec<P>,
    /// Largest certified shadowing distance over the members.
    pub max_shadow_bound: f64,
    pub alpha: AtomicMeasure<P, T>,
}

/// Enumerates `L_k` when it has at most `limit` members, otherwise draws
/// `samples` members. Sample `s` picks segments at level `q` from its own
/// ChaCha8 stream, so members do not depend on the worker count.
pub fn ensemble_and_alpha<S: Gluable>(
    system: &S,
    library: &SegmentLibrary<S::Point>,
    schedule: &GluingSchedule,
    k: usize,
    limit: u64,
    samples: usize,
    seed: u64,
) -> Result<Ensemble<S::Point, S::Scalar>, GluingError> {
    let size = ensemble_size(library, schedule, k);
    if size == BigUint::from(0u8) {
        return Err(GluingError::InvalidParameter(format!("level {k} has an empty segment family")));
    }
    let small = size.to_u64().filter(|&n| n <= limit);
    let count = small.map_or(samples, |n| n as usize);
    if count == 0 {
        return Err(GluingError::InvalidParameter("ensemble sample size must be positive".into()));
    }
    let members: Vec<(S::Point, f64)> = (0..count)
        .into_par_iter()
        .map(|s| {
            let pseudo = match small {
                Some(_) => {
                    let mut code = s as u64;
                    assemble_pseudo_orbit(system, library, schedule, k, |_, w| {
                        let d = code % w as u64;
                        code /= w as u64;
                        d as usize
                    })?
                }
                None => {
                    let mut level = 0;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    assemble_pseudo_orbit(system, library, schedule, k, |slot: &Slot, w| {
                        if slot.q != level {
                            level = slot.q;
                            rng = ChaCha8Rng::seed_from_u64(seed);
                            rng.set_stream(((s as u64) << 16) | level as u64);
                        }
                        rng.random_range(0..w)
                    })?
                }
            };
            let sh = system.shadow(&pseudo)?;
            Ok((sh.z, sh.certified_local))
        })
        .collect::<Result<_, GluingError>>()?;
    let max_shadow_bound = members.iter().map(|m| m.1).fold(0.0, f64::max);
    let points: Vec<S::Point> = members.into_iter().map(|m| m.0).collect();
    let alpha = AtomicMeasure::uniform(points.clone(), format!("alpha_{k}"))?;
    Ok(Ensemble { k, size, enumerated: small.is_some(), points, max_shadow_bound, alpha })
}

/// Return time `l` in `[0, n]` with `f^l(x)` in the set and
/// `|l/n - t| < gamma`. Among several, the one closest to `t n` (the
/// smaller on ties).
pub fn return_time_check<P>(
    orbit: impl IntoIterator<Item = P>,
    in_set: impl Fn(&P) -> bool,
    n: usize,
    t: f64,
    gamma: f64,
) -> Option<usize> {
    if n == 0 {
        return None;
    }
    let centre = t * n as f64;
    let mut best: Option<(usize, f64)> = None;
    for (l, p) in orbit.into_iter().take(n + 1).enumerate() {
        if (l as f64 / n as f64 - t).abs() < gamma && in_set(&p) {
            let gap = (l as f64 - centre).abs();
            if best.is_none_or(|(_, g)| gap < g) {
                best = Some((l, gap));
            }
        }
    }
    best.map(|b| b.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gluing::{Component, ScheduleMode};
    use crate::measures::{Measure, TestBasis};
    use crate::systems::{DynamicalSystem, FullShift, LinearToralMap, SymbolicWord, TorusPoint};
    use std::collections::HashSet;

    fn fixed_word(s: u8) -> SymbolicWord {
        SymbolicWord::with_constant_tail(vec![], s).unwrap()
    }

    fn shift_targets() -> [Target<SymbolicWord, f64>; 2] {
        let t0 = Target::ergodic(
            "delta 0",
            Component::fixed(Measure::Atomic(AtomicMeasure::dirac(fixed_word(0))), vec![fixed_word(0)]),
        );
        let t1 = Target::ergodic(
            "delta 1",
            Component::fixed(Measure::Atomic(AtomicMeasure::dirac(fixed_word(1))), vec![fixed_word(1)]),
        );
        [t0, t1]
    }

    fn shift_params(k_max: usize) -> ConstructParams {
        ConstructParams {
            library: LibraryConfig { k_max, base_length: 4, length_step: 4, cell: 0.75, ..LibraryConfig::default() },
            schedule: ScheduleConfig { mode: ScheduleMode::Desk, growth: 2.0, ..ScheduleConfig::default() },
            threshold: 0.2,
            ..ConstructParams::default()
        }
    }

    #[test]
    fn alternating_fixed_points_give_a_historic_word() {
        let shift = FullShift::<f64>::new();
        let targets = shift_targets();
        let basis = TestBasis::cylinders(6);
        let phi = Observable::new("first symbol", 1.0, |w: &SymbolicWord| w.symbol(0) as f64);
        let out = construct_historic_point(&shift, [&targets[0], &targets[1]], &basis, &phi, &shift_params(4)).unwrap();
        assert_eq!(out.shadow.len, out.schedule.total_len(4));
        assert_eq!(out.checkpoints.len(), 4);
        // Oracle: the frequency of 1s at M_q counted directly on the word.
        for c in &out.checkpoints {
            let ones = (0..c.n as usize).filter(|&i| out.z.symbol(i) == 1).count();
            assert!((c.average - ones as f64 / c.n as f64).abs() < 1e-12);
            assert_eq!(c.target, rho(c.q - 1));
        }
        let lo = out.checkpoints.iter().map(|c| c.average).fold(1.0, f64::min);
        let hi = out.checkpoints.iter().map(|c| c.average).fold(0.0, f64::max);
        assert!(hi - lo > 0.5, "averages {lo}..{hi}");
        assert!(out.report.historic);
    }

    #[test]
    fn tolerance_failure_is_reported() {
        let shift = FullShift::<f64>::new();
        let targets = shift_targets();
        let basis = TestBasis::cylinders(6);
        let phi = Observable::new("first symbol", 1.0, |w: &SymbolicWord| w.symbol(0) as f64);
        let params = ConstructParams { tolerance: Some(1e-9), ..shift_params(3) };
        let err = construct_historic_point(&shift, [&targets[0], &targets[1]], &basis, &phi, &params).unwrap_err();
        assert!(matches!(err, GluingError::Verification { q: 2, .. }), "{err:?}");
    }

    fn balanced_targets() -> [Target<SymbolicWord, f64>; 2] {
        // Periodic words of period 2 and 3, each with its shift-invariant
        // measure, as two ergodic targets.
        let periodic = |w: Vec<u8>| {
            let pts: Vec<SymbolicWord> = (0..w.len())
                .map(|r| {
                    let rot: Vec<u8> = w[r..].iter().chain(&w[..r]).copied().collect();
                    SymbolicWord::periodic(rot).unwrap()
                })
                .collect();
            let mu = AtomicMeasure::uniform(pts.clone(), "periodic").unwrap();
            Component::fixed(Measure::Atomic(mu), pts)
        };
        [Target::ergodic("01", periodic(vec![0, 1])), Target::ergodic("001", periodic(vec![0, 0, 1]))]
    }

    #[test]
    fn ensemble_enumeration_matches_the_product_formula() {
        let shift = FullShift::<f64>::new();
        let targets = balanced_targets();
        let basis = TestBasis::cylinders(4);
        let cfg = LibraryConfig { k_max: 2, base_length: 6, length_step: 6, cell: 0.75, eps_sep: 0.5, ..LibraryConfig::default() };
        let lib = build_segment_library(&shift, [&targets[0], &targets[1]], &basis, &cfg).unwrap();
        let sched = build_schedule(&lib, 2, &ScheduleConfig { mode: ScheduleMode::Desk, ..ScheduleConfig::default() }).unwrap();
        let ens = ensemble_and_alpha(&shift, &lib, &sched, 1, 1_000_000, 0, 7).unwrap();
        // Oracle: count choices directly.
        let l = sched.level(1);
        let mut expect = 1u64;
        for (j, &c) in l.copies.iter().enumerate() {
            expect *= (lib.entry(1, j + 1).unwrap().starts.len() as u64).pow((c * l.t) as u32);
        }
        assert_eq!(ens.size, BigUint::from(expect));
        assert!(ens.enumerated);
        assert_eq!(ens.points.len() as u64, expect);
        let m = sched.total_len(1) as usize;
        let distinct: HashSet<Vec<u8>> = ens.points.iter().map(|p| p.take(m)).collect();
        assert_eq!(distinct.len() as u64, expect, "distinct choices give distinct words");
        assert!((ens.alpha.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_ensembles_are_reproducible() {
        let shift = FullShift::<f64>::new();
        let targets = balanced_targets();
        let basis = TestBasis::cylinders(4);
        let cfg = LibraryConfig { k_max: 2, base_length: 6, length_step: 6, cell: 0.75, ..LibraryConfig::default() };
        let lib = build_segment_library(&shift, [&targets[0], &targets[1]], &basis, &cfg).unwrap();
        let sched = build_schedule(&lib, 2, &ScheduleConfig { mode: ScheduleMode::Desk, ..ScheduleConfig::default() }).unwrap();
        let a = ensemble_and_alpha(&shift, &lib, &sched, 2, 1, 16, 3).unwrap();
        let b = ensemble_and_alpha(&shift, &lib, &sched, 2, 1, 16, 3).unwrap();
        assert!(!a.enumerated);
        assert_eq!(a.points, b.points);
    }

    fn cat() -> LinearToralMap<f64> {
        LinearToralMap::cat_map()
    }

    #[test]
    fn shadowing_a_true_orbit_returns_its_start() {
        use crate::gluing::pseudo::tests::single_piece;
        let f = cat();
        let x = TorusPoint::new(0.123, 0.456);
        let po = single_piece(&f, x, 30);
        let sh = f.shadow(&po).unwrap();
        assert!(sh.z.distance(&x) < 1e-12);
        assert_eq!(sh.max_distance, 0.0);
        assert_eq!(sh.jump_sum, 0.0);
    }

    #[test]
    fn one_jump_is_shadowed_within_the_contraction_bound() {
        use crate::gluing::pseudo::tests::two_pieces;
        let f = cat();
        let x = TorusPoint::new(0.2, 0.7);
        let e = 1e-4;
        let po = two_pieces(&f, x, 20, TorusPoint::new(e, -e), 20);
        let sh = f.shadow(&po).unwrap();
        let lam = f.lambda();
        let jump = (2.0f64).sqrt() * e;
        assert!((sh.jump_sum - jump).abs() < 1e-12);
        // Oracle: a single jump of size e, split along eigen-directions,
        // moves the shadow by at most kappa e / (1 - 1/lambda).
        assert!(sh.max_distance <= f.eigen_condition() * jump / (1.0 - 1.0 / lam) + 1e-12);
        assert!(sh.max_distance <= sh.certified_local + 1e-15);
        assert!(sh.certified_local <= sh.certified_global + 1e-15);
        // The stored orbit is a true orbit up to rounding.
        assert!(sh.orbit_defect < 1e-12);
        // And it follows the pseudo-orbit: the true orbit from x with the jump applied.
        let orbit = sh.orbit.as_ref().unwrap();
        let pseudo: Vec<TorusPoint<f64>> = po.pieces().flat_map(|p| f.orbit(&p.start, p.len).unwrap()).collect();
        for (a, b) in orbit.iter().zip(&pseudo) {
            assert!(a.distance(b) <= sh.max_distance + 1e-12);
        }
    }

    #[test]
    fn return_time_prefers_the_closest_hit() {
        let shift = FullShift::<f64>::new();
        // 0 0 1 0 0 1 ...: hits of [1] at 2, 5, 8, ...
        let x = SymbolicWord::periodic(vec![0, 0, 1]).unwrap();
        let orbit = crate::systems::OrbitIter::new(&shift, x);
        let hit = return_time_check(orbit, |w: &SymbolicWord| w.symbol(0) == 1, 12, 0.5, 0.2);
        assert_eq!(hit, Some(5));
        let orbit = crate::systems::OrbitIter::new(&shift, SymbolicWord::periodic(vec![0, 1]).unwrap());
        // Hits at 5 and 7 around 6: the smaller wins.
        assert_eq!(return_time_check(orbit, |w: &SymbolicWord| w.symbol(0) == 1, 12, 0.5, 0.2), Some(5));
        let orbit = crate::systems::OrbitIter::new(&shift, fixed_word(0));
        assert_eq!(return_time_check(orbit, |w: &SymbolicWord| w.symbol(0) == 1, 12, 0.5, 0.2), None);
        let _ = shift.name();
    }
}
