//! Orbit gluing: historic points built from orbit segments that follow two
//! target measures in alternation, with ever longer repetitions.
//!
//! The stages are a segment library (separated segment starts whose
//! empirical measures approximate the target components), a schedule of
//! lengths and repetition counts, the pseudo-orbit that concatenates
//! segments and connecting orbits, and a shadowing step that turns the
//! pseudo-orbit into a true orbit. Shadowing is exact on the full shift
//! and on linear hyperbolic toral maps; other systems are rejected.

mod backend;
mod construct;
mod library;
mod pseudo;
mod schedule;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::entropy::EntropyError;
use crate::historic::HistoricError;
use crate::measures::{ConvexCombination, Measure, MeasureError};
use crate::systems::SystemError;
use crate::Real;

pub use backend::{ConnectorSearch, Gluable, ShadowMethod, ShadowResult};
pub use construct::{
    construct_historic_point, ensemble_and_alpha, ensemble_size, return_time_check, Checkpoint,
    ConstructParams, ConstructedPoint, Ensemble, Observable,
};
pub use library::{build_segment_library, Connector, LevelLibrary, LibraryConfig, LibraryEntry, SegmentLibrary};
pub use pseudo::{assemble_pseudo_orbit, Jump, PaletteEntry, PaletteRole, PseudoOrbit, Run, RunLabel, Runs, Slot};
pub use schedule::{build_schedule, certify, minimal_multiplier, GluingSchedule, Inequality, LevelSchedule, ScheduleConfig, ScheduleMode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GluingError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Historic(#[from] HistoricError),
    #[error("invalid gluing parameter: {0}")]
    InvalidParameter(String),
    #[error("component ({k},{j}): no segment start within 1/{k} of the target; best distance {best}")]
    NoCandidates { k: usize, j: usize, best: f64 },
    #[error("no connecting orbit from ({from_k},{from_j}) to ({to_k},{to_j}) within {horizon} steps")]
    NoConnector { from_k: usize, from_j: usize, to_k: usize, to_j: usize, horizon: usize },
    #[error("the library covers levels 1..={have}, level {need} is required")]
    MissingLevel { have: usize, need: usize },
    #[error("level {k}: constants overflow 64 bits")]
    Overflow { k: usize },
    #[error("level {k}: N_k C_(k,j) cannot be integral; N_k must be a multiple of {denominator}")]
    Integrality { k: usize, denominator: u64 },
    #[error("orbit length {len} exceeds the configured limit {limit}")]
    TooLong { len: u64, limit: u64 },
    #[error("pseudo-orbit inconsistency: {0}")]
    Inconsistent(String),
    #[error("{system} has no shadowing backend")]
    Unsupported { system: String },
    #[error("certified shadowing distance {bound} exceeds {limit}")]
    ShadowBound { bound: f64, limit: f64 },
    #[error("checkpoint M_{q} = {n}: distance {distance} to mu_{target} exceeds {tolerance}")]
    Verification { q: usize, n: u64, target: usize, distance: f64, tolerance: f64 },
}

/// Candidate segment starts for a requested base length.
pub type CandidateFn<P> = Arc<dyn Fn(usize) -> Vec<P> + Send + Sync>;

/// An ergodic component of a target measure with a way to produce points
/// whose orbit segments are typical for it (periodic orbits, words,
/// samples).
#[derive(Clone)]
pub struct Component<P, T> {
    pub measure: Measure<P, T>,
    pub candidates: CandidateFn<P>,
}

impl<P, T> Component<P, T> {
    pub fn new(measure: Measure<P, T>, candidates: impl Fn(usize) -> Vec<P> + Send + Sync + 'static) -> Self {
        Self { measure, candidates: Arc::new(candidates) }
    }

    /// The same candidates at every length.
    pub fn fixed(measure: Measure<P, T>, points: Vec<P>) -> Self
    where
        P: Clone + Send + Sync + 'static,
    {
        Self::new(measure, move |_| points.clone())
    }
}

impl<P, T: fmt::Debug> fmt::Debug for Component<P, T>
where
    Measure<P, T>: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Component").field("measure", &self.measure).finish_non_exhaustive()
    }
}

/// A target invariant measure given by its ergodic decomposition.
#[derive(Debug, Clone)]
pub struct Target<P, T> {
    pub label: String,
    pub components: Vec<(Component<P, T>, T)>,
}

impl<P: Clone, T: Real> Target<P, T> {
    pub fn ergodic(label: impl Into<String>, component: Component<P, T>) -> Self {
        Self { label: label.into(), components: vec![(component, T::one())] }
    }

    pub fn mixture(label: impl Into<String>, components: Vec<(Component<P, T>, T)>) -> Result<Self, MeasureError> {
        let t = Self { label: label.into(), components };
        t.combination()?;
        Ok(t)
    }

    /// The target as a convex combination of its component measures.
    pub fn combination(&self) -> Result<ConvexCombination<P, T>, MeasureError> {
        ConvexCombination::new(self.components.iter().map(|(c, w)| (c.measure.clone(), *w)).collect())
    }
}

/// `rho(k) = (k + 1) mod 2 + 1`: odd levels follow the first target, even
/// levels the second.
pub fn rho(k: usize) -> usize {
    (k + 1) % 2 + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternator() {
        assert_eq!((1..=6).map(rho).collect::<Vec<_>>(), [1, 2, 1, 2, 1, 2]);
    }
}
