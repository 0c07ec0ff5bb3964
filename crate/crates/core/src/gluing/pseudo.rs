//! Pseudo-orbits assembled from library segments and transition orbits.
//!
//! A pseudo-orbit through level `k` can be hundreds of millions of points
//! long, so it is stored as a palette of distinct pieces plus the sequence
//! of palette indices. Run annotations are regenerated from the layout on
//! demand.

use std::ops::Range;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::backend::Gluable;
use super::library::SegmentLibrary;
use super::schedule::GluingSchedule;
use super::GluingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaletteRole {
    Segment { level: usize, component: usize, index: usize },
    Connector { from: (usize, usize), to: (usize, usize) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteEntry<P> {
    pub start: P,
    /// `f^len(start)`.
    pub end: P,
    pub len: usize,
    pub role: PaletteRole,
}

/// Position of one segment copy `x(q, j, i, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub q: usize,
    pub i: u64,
    pub j: usize,
    pub t: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunLabel {
    Segments { q: usize, i: u64, j: usize },
    Connector { from: (usize, usize), to: (usize, usize) },
}

/// A labelled stretch of consecutive pieces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub start: u64,
    pub label: RunLabel,
    /// Range into [`PseudoOrbit::sequence`].
    pub pieces: Range<usize>,
}

/// A nonzero jump `e = d(f(x_{index-1}), x_index)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub index: u64,
    pub error: f64,
    pub level: usize,
    pub allowed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LevelLayout {
    t: u64,
    copies: Vec<u64>,
    lengths: Vec<u64>,
    /// Palette index of the transition after component `j`.
    transitions: Vec<u32>,
    exit: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoOrbit<P> {
    pub k: usize,
    pub len: u64,
    pub palette: Vec<PaletteEntry<P>>,
    /// Palette index of every piece, in orbit order.
    pub sequence: Vec<u32>,
    /// Nonzero jumps; every other step is an exact orbit step.
    pub jumps: Vec<Jump>,
    /// Number of piece boundaries, jumps or not.
    pub boundaries: u64,
    pub max_jump: f64,
    /// Allowed jump `delta_q` per level `q = 1..=k`.
    pub allowed: Vec<f64>,
    layout: Vec<LevelLayout>,
}

impl<P> PseudoOrbit<P> {
    pub fn pieces(&self) -> impl Iterator<Item = &PaletteEntry<P>> + '_ {
        self.sequence.iter().map(|&i| &self.palette[i as usize])
    }

    /// Run annotations in orbit order, generated lazily from the layout.
    pub fn runs(&self) -> Runs<'_, P> {
        Runs { po: self, q0: 0, i: 1, j: 1, stage: Stage::Segments, pos: 0, cursor: 0 }
    }

    /// Level `q` whose block contains index `n`, given the offsets `M_q`.
    pub fn level_at(&self, offsets: &[u64], n: u64) -> usize {
        offsets[..=self.k].partition_point(|&m| m <= n).clamp(1, self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Segments,
    Transition,
    Exit,
}

/// Iterator over the runs of a [`PseudoOrbit`].
pub struct Runs<'a, P> {
    po: &'a PseudoOrbit<P>,
    q0: usize,
    i: u64,
    j: usize,
    stage: Stage,
    pos: u64,
    cursor: usize,
}

impl<P> Runs<'_, P> {
    fn emit(&mut self, label: RunLabel, count: usize, len: u64) -> Run {
        let run = Run { start: self.pos, label, pieces: self.cursor..self.cursor + count };
        self.pos += len;
        self.cursor += count;
        run
    }
}

impl<P> Iterator for Runs<'_, P> {
    type Item = Run;

    fn next(&mut self) -> Option<Run> {
        let l = self.po.layout.get(self.q0)?;
        let q = self.q0 + 1;
        let s = l.copies.len();
        let (i, j) = (self.i, self.j);
        Some(match self.stage {
            Stage::Segments => {
                self.stage = Stage::Transition;
                let c = l.copies[j - 1];
                self.emit(RunLabel::Segments { q, i, j }, c as usize, c * l.lengths[j - 1])
            }
            Stage::Transition => {
                let len = self.po.palette[l.transitions[j - 1] as usize].len as u64;
                self.stage = Stage::Segments;
                self.j += 1;
                if self.j > s {
                    self.j = 1;
                    self.i += 1;
                    if self.i > l.t {
                        self.stage = Stage::Exit;
                    }
                }
                self.emit(RunLabel::Connector { from: (q, j), to: (q, j % s + 1) }, 1, len)
            }
            Stage::Exit => {
                let len = self.po.palette[l.exit as usize].len as u64;
                self.stage = Stage::Segments;
                self.q0 += 1;
                self.i = 1;
                self.j = 1;
                self.emit(RunLabel::Connector { from: (q, 1), to: (q + 1, 1) }, 1, len)
            }
        })
    }
}

/// Concatenates, for `q = 1..=k`, `T_q` sweeps of (per component `j`:
/// `N_q C_{q,j}` segments, then the transition to `j + 1`), followed by the
/// exit transition to level `q + 1`. `choose(slot, |W|)` picks the segment
/// at each slot.
pub fn assemble_pseudo_orbit<S: Gluable>(
    system: &S,
    library: &SegmentLibrary<S::Point>,
    schedule: &GluingSchedule,
    k: usize,
    mut choose: impl FnMut(&Slot, usize) -> usize,
) -> Result<PseudoOrbit<S::Point>, GluingError> {
    if k == 0 || k > schedule.k_max {
        return Err(GluingError::InvalidParameter(format!("level {k} outside 1..={}", schedule.k_max)));
    }
    if !schedule.is_certified() {
        return Err(GluingError::Inconsistent("schedule certificate has a failing enforced inequality".into()));
    }
    let delta = 3.0 * system.cell_diameter(library.config.cell);
    let mut palette: Vec<PaletteEntry<S::Point>> = Vec::new();
    // Segments enter the palette when first chosen.
    let mut used: FxHashMap<(usize, usize, usize), u32> = FxHashMap::default();
    let mut layout = Vec::with_capacity(k);
    let connector = |palette: &mut Vec<PaletteEntry<S::Point>>, from, to| -> Result<u32, GluingError> {
        let c = library.connector(from, to).ok_or(GluingError::NoConnector {
            from_k: from.0,
            from_j: from.1,
            to_k: to.0,
            to_j: to.1,
            horizon: library.config.search.horizon,
        })?;
        if let Some(i) = palette.iter().position(|e| e.role == PaletteRole::Connector { from, to }) {
            return Ok(i as u32);
        }
        palette.push(PaletteEntry { start: c.y.clone(), end: c.end.clone(), len: c.s, role: PaletteRole::Connector { from, to } });
        Ok(palette.len() as u32 - 1)
    };
    for q in 1..=k {
        let lvl = library.level(q).ok_or(GluingError::MissingLevel { have: library.levels.len(), need: q })?;
        let sched = schedule.level(q);
        if sched.copies.len() != lvl.entries.len() {
            return Err(GluingError::Inconsistent(format!("level {q}: schedule and library disagree on components")));
        }
        for e in &lvl.entries {
            if e.length as u64 != sched.lengths[e.component - 1] {
                return Err(GluingError::Inconsistent(format!("level {q}: segment length mismatch")));
            }
        }
        let s = lvl.entries.len();
        let transitions = (1..=s).map(|j| connector(&mut palette, (q, j), (q, j % s + 1))).collect::<Result<Vec<_>, _>>()?;
        let exit = connector(&mut palette, (q, 1), (q + 1, 1))?;
        layout.push(LevelLayout { t: sched.t, copies: sched.copies.clone(), lengths: sched.lengths.clone(), transitions, exit });
    }

    let expected_pieces: u64 = layout
        .iter()
        .map(|l| l.t * (l.copies.iter().sum::<u64>() + l.copies.len() as u64) + 1)
        .sum();
    let mut sequence = Vec::with_capacity(usize::try_from(expected_pieces).map_err(|_| GluingError::Overflow { k })?);
    let mut jumps = Vec::new();
    let mut boundaries = 0u64;
    let mut max_jump = 0.0f64;
    let mut pos = 0u64;
    let mut prev: Option<u32> = None;
    let mut push = |palette: &[PaletteEntry<S::Point>], idx: u32, level: usize, pos: &mut u64, sequence: &mut Vec<u32>| -> Result<(), GluingError> {
        if let Some(p) = prev {
            boundaries += 1;
            let e = system.jump_error(&palette[p as usize].end, &palette[idx as usize].start);
            if e > 0.0 {
                if !(e <= delta) {
                    return Err(GluingError::Inconsistent(format!("jump {e} at index {pos} exceeds the allowed {delta}")));
                }
                jumps.push(Jump { index: *pos, error: e, level, allowed: delta });
                max_jump = max_jump.max(e);
            }
        }
        sequence.push(idx);
        *pos += palette[idx as usize].len as u64;
        prev = Some(idx);
        Ok(())
    };
    for q in 1..=k {
        let lvl = library.level(q).expect("checked above");
        let l = &layout[q - 1];
        if pos != schedule.m(q) {
            return Err(GluingError::Inconsistent(format!("level {q} starts at {pos}, offset M_q = {}", schedule.m(q))));
        }
        for i in 1..=l.t {
            for (j0, e) in lvl.entries.iter().enumerate() {
                let j = j0 + 1;
                if pos != schedule.m_qij(q, i, j) {
                    return Err(GluingError::Inconsistent(format!(
                        "run ({q},{i},{j}) starts at {pos}, offset M_(q,i,j) = {}",
                        schedule.m_qij(q, i, j)
                    )));
                }
                let w = e.starts.len();
                for t in 1..=l.copies[j0] {
                    let slot = Slot { q, i, j, t };
                    let c = choose(&slot, w);
                    if c >= w {
                        return Err(GluingError::InvalidParameter(format!("choice {c} at {slot:?} outside 0..{w}")));
                    }
                    let idx = *used.entry((q, j0, c)).or_insert_with(|| {
                        palette.push(PaletteEntry {
                            start: e.starts[c].clone(),
                            end: e.ends[c].clone(),
                            len: e.length,
                            role: PaletteRole::Segment { level: q, component: j, index: c },
                        });
                        palette.len() as u32 - 1
                    });
                    push(&palette, idx, q, &mut pos, &mut sequence)?;
                }
                push(&palette, l.transitions[j0], q, &mut pos, &mut sequence)?;
            }
        }
        push(&palette, l.exit, q, &mut pos, &mut sequence)?;
    }
    if pos != schedule.total_len(k) {
        return Err(GluingError::Inconsistent(format!("assembled length {pos}, expected M_(k+1) = {}", schedule.total_len(k))));
    }
    Ok(PseudoOrbit {
        k,
        len: pos,
        palette,
        sequence,
        jumps,
        boundaries,
        max_jump,
        allowed: vec![delta; k],
        layout,
    })
}
