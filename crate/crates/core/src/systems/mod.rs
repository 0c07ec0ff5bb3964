//! Dynamical systems: the abstraction plus the three concrete systems the
//! toolkit runs on (linear hyperbolic toral maps such as the cat map, the
//! Katok slowed-down map, and the one-sided full 2-shift).

mod katok;
mod linear;
mod shift;
mod torus;

use std::fmt::Debug;
use std::hash::Hash;

use thiserror::Error;

pub use katok::{KatokMap, KatokParams};
pub use linear::LinearToralMap;
pub use shift::{cylinder_depth, FullShift, SymbolicWord, Tail};
pub use torus::TorusPoint;

use crate::linalg::{Mat2, Vec2};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("integrator failed at point ({x}, {y}) after flowing t={time}: step {step:e} underflowed")]
    IntegratorFailure { x: f64, y: f64, time: f64, step: f64 },
    #[error("invalid system parameter: {0}")]
    InvalidParameter(String),
}

/// A point of a compact metric state space.
///
/// Besides cloning and hashing, points expose a coarse spatial hash so the
/// entropy code can find all points within a radius without a quadratic scan.
pub trait StatePoint: Clone + Debug + Send + Sync {
    type Key: Hash + Eq + Clone + Debug + Send + Sync;

    /// Key identifying points that coincide up to the representation's
    /// resolution. Used to merge coincident atoms.
    fn dedup_key(&self) -> Self::Key;

    /// Spatial cell of this point for a grid of the given radius.
    fn cell(&self, radius: f64) -> u64;

    /// Cells that may contain points strictly closer than `radius`.
    fn neighbor_cells(&self, radius: f64, out: &mut Vec<u64>);

    /// Whether every point closer than `radius` shares the point's own
    /// cell, so `neighbor_cells` is that cell alone.
    fn ultrametric() -> bool
    where
        Self: Sized,
    {
        false
    }
}

pub trait DynamicalSystem: Send + Sync {
    type Point: StatePoint;
    type Scalar: Real;

    fn name(&self) -> &str;

    fn apply(&self, p: &Self::Point) -> Result<Self::Point, SystemError>;

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> Self::Scalar;

    /// The first `n` orbit points `x, f(x), ..., f^{n-1}(x)`.
    fn orbit(&self, x: &Self::Point, n: usize) -> Result<Vec<Self::Point>, SystemError> {
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return Ok(out);
        }
        let mut cur = x.clone();
        for _ in 1..n {
            let next = self.apply(&cur)?;
            out.push(cur);
            cur = next;
        }
        out.push(cur);
        Ok(out)
    }

    /// `f^n(x)`.
    fn iterate(&self, x: &Self::Point, n: usize) -> Result<Self::Point, SystemError> {
        let mut cur = x.clone();
        for _ in 0..n {
            cur = self.apply(&cur)?;
        }
        Ok(cur)
    }
}

/// Lazy forward orbit `x, f(x), f^2(x), ...`. Iteration stops at the first
/// failing step; [`OrbitIter::finish`] reports that failure.
pub struct OrbitIter<'a, S: DynamicalSystem> {
    system: &'a S,
    cur: Option<S::Point>,
    started: bool,
    error: Option<SystemError>,
}

impl<'a, S: DynamicalSystem> OrbitIter<'a, S> {
    pub fn new(system: &'a S, x: S::Point) -> Self {
        Self { system, cur: Some(x), started: false, error: None }
    }

    pub fn finish(self) -> Result<(), SystemError> {
        self.error.map_or(Ok(()), Err)
    }
}

impl<S: DynamicalSystem> Iterator for OrbitIter<'_, S> {
    type Item = S::Point;

    fn next(&mut self) -> Option<S::Point> {
        if self.started {
            let cur = self.cur.take()?;
            match self.system.apply(&cur) {
                Ok(p) => self.cur = Some(p),
                Err(e) => {
                    self.error = Some(e);
                    return None;
                }
            }
        }
        self.started = true;
        self.cur.clone()
    }
}

pub trait Invertible: DynamicalSystem {
    fn apply_inverse(&self, p: &Self::Point) -> Result<Self::Point, SystemError>;
}

/// Smooth surface diffeomorphism of the 2-torus with a computable derivative.
pub trait SmoothSystem: DynamicalSystem<Point = TorusPoint<<Self as DynamicalSystem>::Scalar>> {
    /// `f(x)` together with `Df_x`.
    fn step_with_jacobian(
        &self,
        x: &Self::Point,
    ) -> Result<(Self::Point, Mat2<Self::Scalar>), SystemError>;

    /// `Df^n_x = Df_{f^{n-1}x} ... Df_x`. `n = 0` gives the identity.
    fn tangent_cocycle(
        &self,
        x: &Self::Point,
        n: usize,
    ) -> Result<Mat2<Self::Scalar>, SystemError> {
        let mut acc = Mat2::identity();
        let mut cur = *x;
        for _ in 0..n {
            let (next, jac) = self.step_with_jacobian(&cur)?;
            acc = jac * acc;
            cur = next;
        }
        Ok(acc)
    }

    /// `(E^s_x, E^u_x)` when the system knows its invariant splitting in
    /// closed form.
    fn invariant_splitting(&self, _x: &Self::Point) -> Option<(Vec2<Self::Scalar>, Vec2<Self::Scalar>)> {
        None
    }
}

/// The identity map of the torus; a degenerate smooth system used as a
/// reference in exponent and block tests.
#[derive(Debug, Clone, Default)]
pub struct IdentityMap<T>(std::marker::PhantomData<T>);

impl<T: Real> IdentityMap<T> {
    pub fn new() -> Self {
        Self(std::marker::PhantomData)
    }
}

impl<T: Real> DynamicalSystem for IdentityMap<T> {
    type Point = TorusPoint<T>;
    type Scalar = T;

    fn name(&self) -> &str {
        "identity"
    }

    fn apply(&self, p: &Self::Point) -> Result<Self::Point, SystemError> {
        Ok(*p)
    }

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> T {
        a.distance(b)
    }
}

impl<T: Real> SmoothSystem for IdentityMap<T> {
    fn step_with_jacobian(&self, x: &TorusPoint<T>) -> Result<(TorusPoint<T>, Mat2<T>), SystemError> {
        Ok((*x, Mat2::identity()))
    }
}
