//! Segment libraries: for every level `k` and component `m_{k,j}` of the
//! level's target, a separated family of orbit segments of common length
//! whose empirical measures are within `1/k` of `m_{k,j}` and whose
//! endpoints return to the starting cell.

use std::collections::HashMap;

use num_rational::Ratio;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::{ConnectorSearch, Gluable};
use super::{rho, GluingError, Target};
use crate::entropy::max_separated;
use crate::measures::{metric_d_from_moments, rational_approximation, BasisPoint, MomentAccumulator, Moments, TestBasis};
use crate::systems::StatePoint;
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LibraryConfig {
    /// Levels `1..=k_max + 1` are built; the last one only feeds the exit
    /// transition of level `k_max`.
    pub k_max: usize,
    /// Separation scale `eps'`.
    pub eps_sep: f64,
    /// Return window `[t, (1 + gamma) t]`.
    pub gamma: f64,
    /// Mass threshold: a level reports whether its members make up at
    /// least `1 - delta` of the candidates.
    pub delta: f64,
    /// `t_k = base_length + length_step (k - 1)`.
    pub base_length: usize,
    pub length_step: usize,
    /// Partition radius: grid cells on the torus, cylinders on the shift.
    pub cell: f64,
    pub search: ConnectorSearch,
    /// Search transitions between every pair of components instead of only
    /// those the pseudo-orbit uses.
    pub all_connectors: bool,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        Self {
            k_max: 4,
            eps_sep: 0.5,
            gamma: 0.5,
            delta: 0.1,
            base_length: 8,
            length_step: 4,
            cell: 0.75,
            search: ConnectorSearch::default(),
            all_connectors: false,
        }
    }
}

impl LibraryConfig {
    pub fn validate(&self) -> Result<(), GluingError> {
        let bad = |m: String| Err(GluingError::InvalidParameter(m));
        if self.k_max == 0 {
            return bad("k_max must be at least 1".into());
        }
        if !(self.eps_sep > 0.0) {
            return bad(format!("separation scale must be positive, got {}", self.eps_sep));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.base_length == 0 {
            return bad("base length must be positive".into());
        }
        if !(self.cell > 0.0) {
            return bad(format!("cell radius must be positive, got {}", self.cell));
        }
        Ok(())
    }

    pub fn base_length_at(&self, k: usize) -> usize {
        self.base_length + self.length_step * (k - 1)
    }
}

/// The family `W_{n(k,j)}` for one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry<P> {
    pub level: usize,
    /// 1-based component index `j`.
    pub component: usize,
    pub weight: Ratio<i64>,
    pub measure: String,
    /// Base length `t_k`.
    pub base_length: usize,
    /// Segment length `n(k,j)`: the return time in the window shared by
    /// the most separated starts (smallest such time on ties).
    pub length: usize,
    pub starts: Vec<P>,
    /// `f^n(x)` for each start; these lie in the start's cell.
    pub ends: Vec<P>,
    /// `D(E_n(x), m_{k,j})` for each start.
    pub distances: Vec<f64>,
    /// Cell holding every start.
    pub cell: u64,
    pub candidates: usize,
    pub members: usize,
    pub separated: usize,
    /// `#V_n` before restricting to one cell.
    pub returning: usize,
    /// Largest `D(E_q(x), m)` over the window for the best candidate.
    pub best_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelLibrary<P> {
    pub k: usize,
    /// Index of the target this level follows.
    pub target: usize,
    /// `D` between the target and its rational approximation.
    pub approximation_distance: f64,
    pub entries: Vec<LibraryEntry<P>>,
    /// Whether members reach the `1 - delta` fraction of candidates for
    /// every component.
    pub mass_covered: bool,
}

/// A transition orbit `y, f(y), ..., f^{s-1}(y)` from the cell of one
/// component to the cell of another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connector<P> {
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub y: P,
    pub s: usize,
    pub end: P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLibrary<P> {
    pub config: LibraryConfig,
    pub levels: Vec<LevelLibrary<P>>,
    pub connectors: Vec<Connector<P>>,
}

impl<P> SegmentLibrary<P> {
    pub fn level(&self, k: usize) -> Option<&LevelLibrary<P>> {
        k.checked_sub(1).and_then(|i| self.levels.get(i))
    }

    pub fn entry(&self, k: usize, j: usize) -> Option<&LibraryEntry<P>> {
        self.level(k).and_then(|l| j.checked_sub(1).and_then(|i| l.entries.get(i)))
    }

    pub fn connector(&self, from: (usize, usize), to: (usize, usize)) -> Option<&Connector<P>> {
        self.connectors.iter().find(|c| c.from == from && c.to == to)
    }

    /// Transition time `s(k1, j1, k2, j2)`.
    pub fn transition(&self, from: (usize, usize), to: (usize, usize)) -> Option<usize> {
        self.connector(from, to).map(|c| c.s)
    }

    pub fn components(&self, k: usize) -> usize {
        self.level(k).map_or(0, |l| l.entries.len())
    }

    pub fn covers(&self, k: usize) -> bool {
        k <= self.levels.len()
    }
}

struct Evaluated<P> {
    x: P,
    worst: f64,
    /// `f^q(x)` lies in the cell of `x`, for each `q` of the window.
    returns: Vec<bool>,
}

fn evaluate<S>(
    system: &S,
    x: &S::Point,
    basis: &TestBasis<S::Point>,
    target: &[S::Scalar],
    window: (usize, usize),
    cell: f64,
) -> Result<Evaluated<S::Point>, GluingError>
where
    S: Gluable,
    S::Point: BasisPoint<S::Scalar>,
{
    let (lo, hi) = window;
    let home = x.cell(cell);
    let mut acc = MomentAccumulator::new(basis);
    let mut cur = x.clone();
    let mut worst = 0.0f64;
    let mut returns = Vec::with_capacity(hi - lo + 1);
    for q in 1..=hi {
        acc.push(basis, &cur);
        cur = system.apply(&cur)?;
        if q >= lo {
            let d = metric_d_from_moments(&acc.snapshot().values, target, basis).as_f64();
            worst = worst.max(d);
            returns.push(cur.cell(cell) == home);
        }
    }
    Ok(Evaluated { x: x.clone(), worst, returns })
}

/// Builds the segment families for levels `1..=k_max + 1`, alternating
/// between the two targets, and the transition orbits between them.
pub fn build_segment_library<S>(
    system: &S,
    targets: [&Target<S::Point, S::Scalar>; 2],
    basis: &TestBasis<S::Point>,
    config: &LibraryConfig,
) -> Result<SegmentLibrary<S::Point>, GluingError>
where
    S: Gluable,
    S::Point: BasisPoint<S::Scalar>,
{
    config.validate()?;
    let mut levels = Vec::with_capacity(config.k_max + 1);
    for k in 1..=config.k_max + 1 {
        let target = rho(k);
        let tgt = targets[target - 1];
        let combination = tgt.combination()?;
        let approx = rational_approximation(&combination, k, basis)?;
        let t = config.base_length_at(k);
        let window = (t, ((1.0 + config.gamma) * t as f64).floor() as usize);
        let mut entries = Vec::new();
        let mut covered = true;
        for (j0, ((component, _), (_, a))) in tgt.components.iter().zip(&approx.components).enumerate() {
            if a.is_zero() {
                continue;
            }
            let j = entries.len() + 1;
            let m = component.measure.moments(basis)?;
            let candidates = (component.candidates)(t);
            let evals: Vec<Evaluated<S::Point>> = candidates
                .par_iter()
                .map(|x| evaluate(system, x, basis, &m, window, config.cell))
                .collect::<Result<_, _>>()?;
            let limit = 1.0 / k as f64;
            let best = evals.iter().map(|e| e.worst).fold(f64::INFINITY, f64::min);
            let members: Vec<&Evaluated<S::Point>> =
                evals.iter().filter(|e| e.worst < limit && e.returns.iter().any(|&r| r)).collect();
            if members.is_empty() {
                return Err(GluingError::NoCandidates { k, j: j0 + 1, best });
            }
            covered &= members.len() as f64 >= (1.0 - config.delta) * candidates.len() as f64;
            let points: Vec<S::Point> = members.iter().map(|e| e.x.clone()).collect();
            let separated = max_separated(system, &points, t, config.eps_sep)?;
            let width = window.1 - window.0 + 1;
            let counts: Vec<usize> =
                (0..width).map(|i| separated.iter().filter(|&&s| members[s].returns[i]).count()).collect();
            let top = *counts.iter().max().expect("window is nonempty");
            let qi = counts.iter().position(|&c| c == top).expect("maximum is attained");
            let n = window.0 + qi;
            let v_n: Vec<usize> = separated.iter().copied().filter(|&s| members[s].returns[qi]).collect();
            let mut by_cell: HashMap<u64, usize> = HashMap::new();
            for &s in &v_n {
                *by_cell.entry(members[s].x.cell(config.cell)).or_default() += 1;
            }
            let (cell, _) = by_cell
                .iter()
                .map(|(&c, &count)| (c, count))
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .expect("V_n is nonempty");
            let starts: Vec<S::Point> =
                v_n.iter().map(|&s| members[s].x.clone()).filter(|x| x.cell(config.cell) == cell).collect();
            let ends = starts.iter().map(|x| system.iterate(x, n)).collect::<Result<Vec<_>, _>>()?;
            let distances = starts
                .iter()
                .map(|x| {
                    let mut acc = MomentAccumulator::new(basis);
                    for p in system.orbit(x, n)? {
                        acc.push(basis, &p);
                    }
                    Ok(metric_d_from_moments(&acc.snapshot().values, &m, basis).as_f64())
                })
                .collect::<Result<Vec<f64>, GluingError>>()?;
            entries.push(LibraryEntry {
                level: k,
                component: j,
                weight: *a,
                measure: component.measure.label(),
                base_length: t,
                length: n,
                starts,
                ends,
                distances,
                cell,
                candidates: candidates.len(),
                members: members.len(),
                separated: separated.len(),
                returning: v_n.len(),
                best_distance: best,
            });
        }
        levels.push(LevelLibrary {
            k,
            target,
            approximation_distance: approx.distance.as_f64(),
            entries,
            mass_covered: covered,
        });
    }
    let pairs = connector_pairs(&levels, config);
    let mut cache: HashMap<(u64, u64), (S::Point, usize)> = HashMap::new();
    let mut connectors = Vec::with_capacity(pairs.len());
    for (from, to) in pairs {
        let a = &levels[from.0 - 1].entries[from.1 - 1];
        let b = &levels[to.0 - 1].entries[to.1 - 1];
        let (y, s) = match cache.get(&(a.cell, b.cell)) {
            Some(hit) => hit.clone(),
            None => {
                let found = system.find_connector(&a.starts[0], &b.starts[0], config.cell, &config.search)?;
                let hit = found.ok_or(GluingError::NoConnector {
                    from_k: from.0,
                    from_j: from.1,
                    to_k: to.0,
                    to_j: to.1,
                    horizon: config.search.horizon,
                })?;
                cache.insert((a.cell, b.cell), hit.clone());
                hit
            }
        };
        let end = system.iterate(&y, s)?;
        connectors.push(Connector { from, to, y, s, end });
    }
    Ok(SegmentLibrary { config: config.clone(), levels, connectors })
}

fn connector_pairs<P>(levels: &[LevelLibrary<P>], config: &LibraryConfig) -> Vec<((usize, usize), (usize, usize))> {
    let mut pairs = Vec::new();
    if config.all_connectors {
        let all: Vec<(usize, usize)> =
            levels.iter().flat_map(|l| (1..=l.entries.len()).map(move |j| (l.k, j))).collect();
        for &a in &all {
            for &b in &all {
                pairs.push((a, b));
            }
        }
        return pairs;
    }
    for l in &levels[..config.k_max] {
        let s = l.entries.len();
        for j in 1..=s {
            pairs.push(((l.k, j), (l.k, j % s + 1)));
        }
        let exit = ((l.k, 1), (l.k + 1, 1));
        if !pairs.contains(&exit) {
            pairs.push(exit);
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gluing::Component;
    use crate::measures::{AtomicMeasure, Measure};
    use crate::systems::{FullShift, LinearToralMap, SymbolicWord, TorusPoint};

    fn shift_dirac(c: u8) -> Target<SymbolicWord, f64> {
        let w = SymbolicWord::constant(c);
        Target::ergodic(
            format!("delta({c})"),
            Component::fixed(Measure::Atomic(AtomicMeasure::dirac(w.clone())), vec![w]),
        )
    }

    #[test]
    fn fixed_point_words_on_the_shift() {
        let sh = FullShift::<f64>::new();
        let basis = TestBasis::cylinders(12);
        let (a, b) = (shift_dirac(0), shift_dirac(1));
        let cfg = LibraryConfig { k_max: 3, base_length: 10, length_step: 10, ..Default::default() };
        let lib = build_segment_library(&sh, [&a, &b], &basis, &cfg).unwrap();
        assert_eq!(lib.levels.len(), 4);
        for l in &lib.levels {
            assert_eq!(l.target, rho(l.k));
            let e = &l.entries[0];
            // The fixed point returns at every time, so the smallest wins.
            assert_eq!(e.length, 10 * l.k);
            assert_eq!(e.starts.len(), 1);
            assert_eq!(e.distances, vec![0.0]);
        }
        // depth-1 cylinders: one symbol to leave, one to arrive
        assert_eq!(lib.transition((1, 1), (1, 1)), Some(1));
        assert_eq!(lib.transition((1, 1), (2, 1)), Some(1));
        let c = lib.connector((1, 1), (2, 1)).unwrap();
        assert_eq!(c.y.take(2), vec![0, 1]);
        assert_eq!(c.end.symbol(0), 1);
    }

    /// `D(E_12(w^inf), uniform)` against the basis [0], [1], [00], [01],
    /// [10], [11], counted directly on the cyclic word.
    fn cyclic_distance(w: &[u8]) -> f64 {
        let n = w.len();
        let ones = w.iter().filter(|&&s| s == 1).count();
        let mut pairs = [0usize; 4];
        for i in 0..n {
            pairs[(w[i] * 2 + w[(i + 1) % n]) as usize] += 1;
        }
        let mut d = ((n - ones) as f64 / n as f64 - 0.5).abs() / 4.0 + (ones as f64 / n as f64 - 0.5).abs() / 8.0;
        for (i, c) in pairs.iter().enumerate() {
            d += (*c as f64 / n as f64 - 0.25).abs() / 2f64.powi(i as i32 + 4);
        }
        d
    }

    #[test]
    fn balanced_words_match_brute_force_count() {
        // Distinct 12-words are (12, 0.5)-separated, and self-periodic
        // words return to their first-symbol cylinder at q = 12.
        let sh = FullShift::<f64>::new();
        let basis = TestBasis::cylinders(6);
        let raw: Vec<Vec<u8>> = (0..1u32 << 12).map(|c| (0..12).map(|i| ((c >> i) & 1) as u8).collect()).collect();
        let words: Vec<SymbolicWord> = raw.iter().map(|w| SymbolicWord::self_periodic(w.clone().into()).unwrap()).collect();
        let a = Target::ergodic("uniform", Component::fixed(Measure::Uniform, words));
        let k = 7;
        let cfg = LibraryConfig { k_max: k, base_length: 12, length_step: 0, gamma: 0.05, ..Default::default() };
        let lib = build_segment_library(&sh, [&a, &a], &basis, &cfg).unwrap();
        let e = lib.entry(k, 1).unwrap();
        let ok: Vec<&Vec<u8>> = raw.iter().filter(|w| cyclic_distance(w) < 1.0 / k as f64).collect();
        assert!(ok.len() > 100 && ok.len() < 4096, "{}", ok.len());
        assert_eq!(e.members, ok.len());
        assert_eq!(e.separated, ok.len());
        assert_eq!(e.length, 12);
        let zeros = ok.iter().filter(|w| w[0] == 0).count();
        let ones = ok.len() - zeros;
        // ties go to the cylinder [0]
        assert_eq!(e.starts.len(), zeros.max(ones));
        assert_eq!(e.starts[0].symbol(0), if ones > zeros { 1 } else { 0 });
    }

    #[test]
    fn cat_map_near_fixed_point_only_short_segments() {
        let cat = LinearToralMap::<f64>::cat_map();
        let basis = TestBasis::trig(8);
        let near = TorusPoint::new(1e-6, 0.0);
        let comp = Component::fixed(Measure::Atomic(AtomicMeasure::dirac(TorusPoint::origin())), vec![near]);
        let a = Target::ergodic("origin", comp);
        let cfg = |n| LibraryConfig { k_max: 1, base_length: n, length_step: 0, gamma: 0.1, cell: 0.01, ..Default::default() };
        // lambda^n 1e-6 stays below the cell for n <= 8
        assert!(build_segment_library(&cat, [&a, &a], &basis, &cfg(6)).is_ok());
        match build_segment_library(&cat, [&a, &a], &basis, &cfg(40)) {
            Err(GluingError::NoCandidates { k: 1, j: 1, best }) => assert!(best > 0.0),
            other => panic!("{other:?}"),
        }
    }
}
