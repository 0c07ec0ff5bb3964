//! Repetition schedule: how many copies of each segment a sweep holds, how
//! many sweeps a level makes, and the resulting offsets along the orbit.
//!
//! All constants are exact integers. Two modes exist. `PaperStrict`
//! enforces the full set of growth inequalities and quickly becomes
//! astronomically long; `Desk` keeps integrality, the length identity and
//! `N_k / Y_k >= 1 - 1/k`, and replaces the growth inequalities by
//! `Y_k T_k >= c k M_k` with a configurable factor `c`.

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::library::SegmentLibrary;
use super::{rho, GluingError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    PaperStrict,
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub mode: ScheduleMode,
    /// Growth factor `c` of the desk rule `Y_k T_k >= c k M_k`.
    pub growth: f64,
    /// Longest admissible orbit `M_{k_max + 1}`.
    pub max_length: u64,
    /// Explicit multipliers `N_k` per level, checked for integrality
    /// instead of searched.
    pub multipliers: Vec<u64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { mode: ScheduleMode::Desk, growth: 2.0, max_length: 1 << 31, multipliers: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSchedule {
    pub k: usize,
    pub target: usize,
    /// Rational weights `a_{k,j}`.
    pub weights: Vec<Ratio<i64>>,
    /// Segment lengths `n(k,j)`.
    pub lengths: Vec<u64>,
    /// `C_{k,j} = a_{k,j} / n(k,j)`.
    pub rates: Vec<Ratio<i64>>,
    /// `N_k C_{k,j}` segments of component `j` per sweep.
    pub copies: Vec<u64>,
    pub n: u64,
    /// Sum of the cyclic transitions inside a sweep.
    pub x: u64,
    /// Sweep length `Y_k = N_k + X_k`.
    pub y: u64,
    /// Number of sweeps `T_k`.
    pub t: u64,
    /// `s(k, j, k, j + 1)`, cyclic in `j`.
    pub transitions: Vec<u64>,
    /// `s(k, 1, k + 1, 1)`.
    pub exit: u64,
}

/// One inequality of the certificate. `holds = None` means it involves a
/// level beyond the schedule and could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub level: usize,
    /// Whether the schedule's mode promises this inequality.
    pub enforced: bool,
    pub holds: Option<bool>,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingSchedule {
    pub mode: ScheduleMode,
    pub growth: f64,
    pub k_max: usize,
    pub levels: Vec<LevelSchedule>,
    /// `M_1, ..., M_{k_max + 1}`.
    pub offsets: Vec<u64>,
    pub certificate: Vec<Inequality>,
}

impl GluingSchedule {
    pub fn level(&self, q: usize) -> &LevelSchedule {
        &self.levels[q - 1]
    }

    /// `M_q = sum_{r < q} (T_r Y_r + s(r, 1, r + 1, 1))`, with `M_1 = 0`.
    pub fn m(&self, q: usize) -> u64 {
        self.offsets[q - 1]
    }

    /// `M_{q,i} = M_q + (i - 1) Y_q`.
    pub fn m_qi(&self, q: usize, i: u64) -> u64 {
        self.m(q) + (i - 1) * self.level(q).y
    }

    /// `M_{q,i,j} = M_{q,i} + sum_{p < j} (N_q n(q,p) C_{q,p} + s(q,p,q,p+1))`.
    pub fn m_qij(&self, q: usize, i: u64, j: usize) -> u64 {
        let l = self.level(q);
        self.m_qi(q, i) + (0..j - 1).map(|p| l.copies[p] * l.lengths[p] + l.transitions[p]).sum::<u64>()
    }

    /// `M_{q,i,j,t} = M_{q,i,j} + (t - 1) n(q,j)`.
    pub fn m_qijt(&self, q: usize, i: u64, j: usize, t: u64) -> u64 {
        self.m_qij(q, i, j) + (t - 1) * self.level(q).lengths[j - 1]
    }

    /// Length `M_{k+1}` of the pseudo-orbit through level `k`.
    pub fn total_len(&self, k: usize) -> u64 {
        self.m(k + 1)
    }

    /// Every enforced inequality holds or could not be evaluated.
    pub fn is_certified(&self) -> bool {
        self.certificate.iter().filter(|c| c.enforced).all(|c| c.holds != Some(false))
    }

    pub fn rho(&self, k: usize) -> usize {
        rho(k)
    }
}

/// Smallest positive multiple of the denominators of `rates` that is at
/// least `lower`.
pub fn minimal_multiplier(rates: &[Ratio<i64>], lower: u64) -> Option<u64> {
    let l = rates.iter().try_fold(1u64, |l, r| Some(l.lcm(&u64::try_from(*r.denom()).ok()?)))?;
    lower.max(1).div_ceil(l).checked_mul(l)
}

fn copies_for(n: u64, rates: &[Ratio<i64>]) -> Option<Vec<u64>> {
    rates
        .iter()
        .map(|r| {
            let v = Ratio::<i128>::new(*r.numer() as i128, *r.denom() as i128) * Ratio::from_integer(n as i128);
            v.is_integer().then(|| u64::try_from(v.to_integer()).ok()).flatten()
        })
        .collect()
}

struct Base {
    weights: Vec<Ratio<i64>>,
    lengths: Vec<u64>,
    rates: Vec<Ratio<i64>>,
    transitions: Vec<u64>,
    exit: u64,
    x: u64,
    /// `sum s(r1, j1, r2, j2)` over levels `<= k + 1`, when all are known.
    all_pairs: Option<u64>,
}

fn level_base<P>(library: &SegmentLibrary<P>, k: usize) -> Result<Base, GluingError> {
    let lvl = library.level(k).ok_or(GluingError::MissingLevel { have: library.levels.len(), need: k })?;
    let s = lvl.entries.len();
    let tr = |a: (usize, usize), b: (usize, usize)| {
        library.transition(a, b).map(|v| v as u64).ok_or(GluingError::NoConnector {
            from_k: a.0,
            from_j: a.1,
            to_k: b.0,
            to_j: b.1,
            horizon: library.config.search.horizon,
        })
    };
    let transitions = (1..=s).map(|j| tr((k, j), (k, j % s + 1))).collect::<Result<Vec<_>, _>>()?;
    let exit = tr((k, 1), (k + 1, 1))?;
    let x = transitions.iter().try_fold(0u64, |a, &b| a.checked_add(b)).ok_or(GluingError::Overflow { k })?;
    let weights: Vec<Ratio<i64>> = lvl.entries.iter().map(|e| e.weight).collect();
    let lengths: Vec<u64> = lvl.entries.iter().map(|e| e.length as u64).collect();
    let rates = weights.iter().zip(&lengths).map(|(a, &n)| a / Ratio::from_integer(n as i64)).collect();
    let mut all_pairs = Some(0u64);
    if library.covers(k + 1) {
        let comps: Vec<(usize, usize)> =
            (1..=k + 1).flat_map(|r| (1..=library.components(r)).map(move |j| (r, j))).collect();
        for &a in &comps {
            for &b in &comps {
                all_pairs = match (all_pairs, library.transition(a, b)) {
                    (Some(acc), Some(v)) => acc.checked_add(v as u64),
                    _ => None,
                };
            }
        }
    } else {
        all_pairs = None;
    }
    Ok(Base { weights, lengths, rates, transitions, exit, x, all_pairs })
}

fn ceil_div(a: u128, b: u128) -> u128 {
    a.div_ceil(b)
}

/// Chooses `N_k`, `Y_k`, `T_k` for levels `1..=k_max` and certifies them.
pub fn build_schedule<P>(
    library: &SegmentLibrary<P>,
    k_max: usize,
    config: &ScheduleConfig,
) -> Result<GluingSchedule, GluingError> {
    if k_max == 0 {
        return Err(GluingError::InvalidParameter("k_max must be at least 1".into()));
    }
    if !(config.growth > 0.0 && config.growth.is_finite()) {
        return Err(GluingError::InvalidParameter(format!("growth factor must be positive, got {}", config.growth)));
    }
    if !library.covers(k_max + 1) {
        return Err(GluingError::MissingLevel { have: library.levels.len(), need: k_max + 1 });
    }
    let strict = config.mode == ScheduleMode::PaperStrict;
    let bases = (1..=k_max).map(|k| level_base(library, k)).collect::<Result<Vec<_>, _>>()?;

    // Multipliers and sweep lengths.
    let mut ny = Vec::with_capacity(k_max);
    for (k0, b) in bases.iter().enumerate() {
        let k = k0 + 1;
        let lower = if strict {
            let sum = b.all_pairs.ok_or_else(|| {
                GluingError::InvalidParameter(
                    "paper-strict mode needs transitions between all components; build the library with all_connectors"
                        .into(),
                )
            })?;
            sum.checked_mul(k as u64).ok_or(GluingError::Overflow { k })?
        } else {
            b.x.checked_mul(k as u64 - 1).ok_or(GluingError::Overflow { k })?
        };
        let n = match config.multipliers.get(k0) {
            Some(&n) => {
                if copies_for(n, &b.rates).is_none() {
                    let denominator = minimal_multiplier(&b.rates, 1).ok_or(GluingError::Overflow { k })?;
                    return Err(GluingError::Integrality { k, denominator });
                }
                n
            }
            None => minimal_multiplier(&b.rates, lower).ok_or(GluingError::Overflow { k })?,
        };
        let y = n.checked_add(b.x).ok_or(GluingError::Overflow { k })?;
        ny.push((n, y));
    }

    // Repetitions and offsets.
    let mut offsets = vec![0u64];
    let mut ts: Vec<u64> = Vec::with_capacity(k_max);
    let mut mass = 0u128; // sum_{r < k} Y_r T_r
    for (k0, b) in bases.iter().enumerate() {
        let k = k0 + 1;
        let (_, y) = ny[k0];
        let m_k = *offsets.last().expect("offsets start at M_1") as u128;
        let mut t = if strict {
            let mut t = ts.last().map_or(1, |&p| p as u128 + 1);
            t = t.max(ceil_div(k as u128 * m_k, y as u128));
            if let Some(&(_, y_next)) = ny.get(k0 + 1) {
                let need = (k as u128 + 1) * y_next as u128;
                if need > mass {
                    t = t.max(ceil_div(need - mass, y as u128));
                }
            }
            t
        } else {
            let want = (config.growth * k as f64 * m_k as f64).ceil();
            if !(want < u128::MAX as f64) {
                return Err(GluingError::Overflow { k });
            }
            ceil_div(want as u128, y as u128)
        };
        t = t.max(1);
        let t = u64::try_from(t).map_err(|_| GluingError::Overflow { k })?;
        let block = (y as u128) * (t as u128);
        mass += block;
        let next = m_k + block + b.exit as u128;
        let next = u64::try_from(next).map_err(|_| GluingError::Overflow { k })?;
        if next > config.max_length {
            return Err(GluingError::TooLong { len: next, limit: config.max_length });
        }
        offsets.push(next);
        ts.push(t);
    }

    let levels: Vec<LevelSchedule> = bases
        .into_iter()
        .enumerate()
        .map(|(k0, b)| {
            let (n, y) = ny[k0];
            LevelSchedule {
                k: k0 + 1,
                target: rho(k0 + 1),
                copies: copies_for(n, &b.rates).expect("multiplier clears the denominators"),
                weights: b.weights,
                lengths: b.lengths,
                rates: b.rates,
                n,
                x: b.x,
                y,
                t: ts[k0],
                transitions: b.transitions,
                exit: b.exit,
            }
        })
        .collect();
    let all_pairs: Vec<Option<u64>> = (1..=k_max)
        .map(|k| level_base(library, k).ok().and_then(|b| b.all_pairs))
        .collect();
    let mut schedule = GluingSchedule {
        mode: config.mode,
        growth: config.growth,
        k_max,
        levels,
        offsets,
        certificate: Vec::new(),
    };
    schedule.certificate = certify(&schedule, &all_pairs);
    Ok(schedule)
}

fn ineq(name: &str, level: usize, enforced: bool, holds: Option<bool>, lhs: impl ToString, rhs: impl ToString) -> Inequality {
    Inequality { name: name.into(), level, enforced, holds, lhs: lhs.to_string(), rhs: rhs.to_string() }
}

/// Evaluates every inequality of both modes on `schedule`.
pub fn certify(schedule: &GluingSchedule, all_pairs: &[Option<u64>]) -> Vec<Inequality> {
    let strict = schedule.mode == ScheduleMode::PaperStrict;
    let mut out = Vec::new();
    let k_max = schedule.k_max;
    for l in &schedule.levels {
        let k = l.k;
        let integral = l
            .rates
            .iter()
            .zip(&l.copies)
            .all(|(r, &c)| Ratio::<i128>::new(*r.numer() as i128, *r.denom() as i128) * Ratio::from_integer(l.n as i128) == Ratio::from_integer(c as i128));
        out.push(ineq("integral-copies", k, true, Some(integral), format!("N_k = {}", l.n), format!("C = {:?}", l.rates.iter().map(|r| r.to_string()).collect::<Vec<_>>())));
        let sum: u128 = l.copies.iter().zip(&l.lengths).map(|(&c, &n)| c as u128 * n as u128).sum::<u128>() + l.x as u128;
        out.push(ineq("length-identity", k, true, Some(sum == l.y as u128 && l.y == l.n + l.x), sum, l.y));
        // N / Y >= 1 - 1/k  <=>  k N >= (k - 1) Y
        let lhs = k as u128 * l.n as u128;
        let rhs = (k as u128 - 1) * l.y as u128;
        out.push(ineq("transition-fraction", k, true, Some(lhs >= rhs), format!("{}/{}", l.n, l.y), format!("1 - 1/{k}")));
        let m_k = schedule.m(k) as u128;
        let block = l.y as u128 * l.t as u128;
        let grow = block as f64 >= schedule.growth * k as f64 * m_k as f64;
        out.push(ineq("repetition-growth", k, !strict, Some(grow), block, format!("{} * {k} * {m_k}", schedule.growth)));
        let dominance = all_pairs.get(k - 1).copied().flatten().map(|s| l.n as u128 >= k as u128 * s as u128);
        out.push(ineq(
            "transition-dominance",
            k,
            strict,
            dominance,
            l.n,
            all_pairs.get(k - 1).copied().flatten().map_or("unknown".to_string(), |s| format!("{k} * {s}")),
        ));
        if k >= 2 {
            let prev = schedule.level(k - 1).t;
            out.push(ineq("increasing-repetitions", k, strict, Some(l.t > prev), l.t, prev));
        }
        // Y_{k+1} <= (1/(k+1)) sum_{r<=k} Y_r T_r
        let mass: u128 = schedule.levels[..k].iter().map(|r| r.y as u128 * r.t as u128).sum();
        let (holds, lhs) = if k < k_max {
            let y_next = schedule.level(k + 1).y as u128;
            (Some((k as u128 + 1) * y_next <= mass), y_next.to_string())
        } else {
            (None, "Y_(k+1) beyond schedule".into())
        };
        out.push(ineq("previous-mass", k, strict, holds, lhs, format!("{mass} / {}", k + 1)));
        // M_{k+1} <= Y_{k+1} T_{k+1} / (k+1)
        let m_next = schedule.m(k + 1) as u128;
        let (holds, rhs) = if k < k_max {
            let nl = schedule.level(k + 1);
            let b = nl.y as u128 * nl.t as u128;
            (Some((k as u128 + 1) * m_next <= b), format!("{b} / {}", k + 1))
        } else {
            (None, "Y_(k+1) T_(k+1) beyond schedule".into())
        };
        out.push(ineq("next-mass", k, strict, holds, m_next, rhs));
    }
    out
}
