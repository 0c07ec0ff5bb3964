//! System-specific parts of the gluing: partition cells, connecting orbits,
//! and shadowing.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::pseudo::PseudoOrbit;
use super::GluingError;
use crate::systems::{cylinder_depth, DynamicalSystem, FullShift, KatokMap, LinearToralMap, OrbitIter, StatePoint, SymbolicWord, TorusPoint};
use crate::Real;

/// Limits for the connecting-orbit search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConnectorSearch {
    /// Longest connecting orbit tried.
    pub horizon: usize,
    /// Starts tried per cell: a `grid x grid` subgrid of the source cell.
    pub grid: usize,
    /// Shortest admissible transition time.
    pub min_len: usize,
}

impl Default for ConnectorSearch {
    fn default() -> Self {
        Self { horizon: 100_000, grid: 16, min_len: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowMethod {
    ExactLinear,
    SymbolicConcatenation,
}

/// A true orbit following a pseudo-orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowResult<P> {
    pub z: P,
    /// Stored orbit `z_n` over the pseudo-orbit length. Iterating a
    /// hyperbolic map in floating point loses the true orbit after a few
    /// dozen steps, so the linear backend keeps the orbit it solved for.
    pub orbit: Option<Vec<P>>,
    /// `d(f^n z, x_n)` per index; `None` when identically zero.
    pub distances: Option<Vec<f64>>,
    pub max_distance: f64,
    /// Bound from the correction recursions run on absolute values.
    pub certified_local: f64,
    /// `(sum |e_i|) (1 + 1/lambda) / (1 - 1/lambda)`, with rounding allowance.
    pub certified_global: f64,
    pub jump_sum: f64,
    /// `max |f(z_n) - z_{n+1}|` over the stored orbit.
    pub orbit_defect: f64,
    pub len: u64,
    pub method: ShadowMethod,
}

impl<P: StatePoint> ShadowResult<P> {
    /// The orbit of `z`: the stored orbit first, then plain iteration.
    pub fn orbit_iter<'a, S>(&'a self, system: &'a S) -> Box<dyn Iterator<Item = P> + 'a>
    where
        S: DynamicalSystem<Point = P>,
    {
        match &self.orbit {
            Some(v) => {
                let last = v.last().cloned().unwrap_or_else(|| self.z.clone());
                Box::new(v.iter().cloned().chain(OrbitIter::new(system, last).skip(1)))
            }
            None => Box::new(OrbitIter::new(system, self.z.clone())),
        }
    }
}

/// Systems the gluing construction can run on.
pub trait Gluable: DynamicalSystem {
    /// Diameter of a partition element of the grid with the given radius.
    fn cell_diameter(&self, cell: f64) -> f64;

    /// Error of jumping from `end` (a segment's image point) to `next`.
    fn jump_error(&self, end: &Self::Point, next: &Self::Point) -> f64 {
        self.distance(end, next).as_f64()
    }

    /// A point `y` in the cell of `from` and a time `s >= min_len` with
    /// `f^s(y)` in the cell of `to`.
    fn find_connector(
        &self,
        from: &Self::Point,
        to: &Self::Point,
        cell: f64,
        search: &ConnectorSearch,
    ) -> Result<Option<(Self::Point, usize)>, GluingError>;

    fn shadow(&self, pseudo: &PseudoOrbit<Self::Point>) -> Result<ShadowResult<Self::Point>, GluingError> {
        let _ = pseudo;
        Err(GluingError::Unsupported { system: self.name().to_string() })
    }
}

impl<T: Real> Gluable for FullShift<T> {
    fn cell_diameter(&self, cell: f64) -> f64 {
        0.5f64.powi(cylinder_depth(cell) as i32)
    }

    /// Segments are finite words, so concatenating them is exact.
    fn jump_error(&self, _end: &SymbolicWord, _next: &SymbolicWord) -> f64 {
        0.0
    }

    fn find_connector(
        &self,
        from: &SymbolicWord,
        to: &SymbolicWord,
        cell: f64,
        search: &ConnectorSearch,
    ) -> Result<Option<(SymbolicWord, usize)>, GluingError> {
        let d = cylinder_depth(cell);
        let s = d.max(search.min_len).max(1);
        if s > search.horizon {
            return Ok(None);
        }
        let mut w = from.take(d);
        w.resize(s, 0);
        w.extend(to.take(d));
        let y = SymbolicWord::with_constant_tail(w, 0).map_err(|e| GluingError::Inconsistent(e.to_string()))?;
        Ok(Some((y, s)))
    }

    fn shadow(&self, pseudo: &PseudoOrbit<SymbolicWord>) -> Result<ShadowResult<SymbolicWord>, GluingError> {
        let words: Vec<Vec<u8>> = pseudo.palette.iter().map(|e| e.start.take(e.len)).collect();
        let len = usize::try_from(pseudo.len).map_err(|_| GluingError::TooLong { len: pseudo.len, limit: usize::MAX as u64 })?;
        let mut z = Vec::with_capacity(len);
        for &i in &pseudo.sequence {
            z.extend_from_slice(&words[i as usize]);
        }
        if z.len() != len {
            return Err(GluingError::Inconsistent(format!("concatenation has {} symbols, expected {len}", z.len())));
        }
        let z = SymbolicWord::with_constant_tail(z, 0).map_err(|e| GluingError::Inconsistent(e.to_string()))?;
        Ok(ShadowResult {
            z,
            orbit: None,
            distances: None,
            max_distance: 0.0,
            certified_local: 0.0,
            certified_global: 0.0,
            jump_sum: 0.0,
            orbit_defect: 0.0,
            len: pseudo.len,
            method: ShadowMethod::SymbolicConcatenation,
        })
    }
}

fn torus_cell_width(cell: f64) -> f64 {
    let n = if !(cell > 0.0) || cell >= 1.0 { 1.0 } else { (1.0 / cell).floor().clamp(1.0, (1u64 << 24) as f64) };
    1.0 / n
}

fn torus_cell_diameter(cell: f64) -> f64 {
    torus_cell_width(cell) * std::f64::consts::SQRT_2
}

/// Forward search from a subgrid of the source cell, all starts advanced
/// together so the shortest transition wins.
fn torus_connector<S, T>(
    system: &S,
    from: &TorusPoint<T>,
    to: &TorusPoint<T>,
    cell: f64,
    search: &ConnectorSearch,
) -> Result<Option<(TorusPoint<T>, usize)>, GluingError>
where
    S: DynamicalSystem<Point = TorusPoint<T>>,
    T: Real,
{
    let w = torus_cell_width(cell);
    let target = to.cell(cell);
    let (cx, cy) = ((from.x().as_f64() / w).floor() * w, (from.y().as_f64() / w).floor() * w);
    let g = search.grid.max(1);
    let mut starts = vec![*from];
    for a in 0..g {
        for b in 0..g {
            let x = cx + (a as f64 + 0.5) * w / g as f64;
            let y = cy + (b as f64 + 0.5) * w / g as f64;
            starts.push(TorusPoint::new(T::lit(x), T::lit(y)));
        }
    }
    let mut cur = starts.clone();
    for s in 1..=search.horizon {
        for p in cur.iter_mut() {
            *p = system.apply(p)?;
        }
        if s >= search.min_len.max(1) {
            if let Some(i) = cur.iter().position(|p| p.cell(cell) == target) {
                return Ok(Some((starts[i], s)));
            }
        }
    }
    Ok(None)
}

impl<T: Real> Gluable for LinearToralMap<T> {
    fn cell_diameter(&self, cell: f64) -> f64 {
        torus_cell_diameter(cell)
    }

    fn find_connector(
        &self,
        from: &TorusPoint<T>,
        to: &TorusPoint<T>,
        cell: f64,
        search: &ConnectorSearch,
    ) -> Result<Option<(TorusPoint<T>, usize)>, GluingError> {
        torus_connector(self, from, to, cell, search)
    }

    /// Exact shadowing for `z_{n+1} = A z_n` on the torus. With
    /// `e_n = x_{n+1} - A x_n` and `z_n = x_n + c_n`, the correction solves
    /// `c_{n+1} = A c_n - e_n`; in eigen-coordinates the stable part is run
    /// forward from `0` and the unstable part backward from `0`, both
    /// contracting by `1/lambda` per step.
    fn shadow(&self, pseudo: &PseudoOrbit<TorusPoint<T>>) -> Result<ShadowResult<TorusPoint<T>>, GluingError> {
        let len = usize::try_from(pseudo.len).map_err(|_| GluingError::TooLong { len: pseudo.len, limit: usize::MAX as u64 })?;
        if len == 0 {
            return Err(GluingError::Inconsistent("empty pseudo-orbit".into()));
        }
        let orbits: Vec<Vec<TorusPoint<T>>> =
            pseudo.palette.iter().map(|e| self.orbit(&e.start, e.len)).collect::<Result<_, _>>()?;
        let mut x = Vec::with_capacity(len);
        for &i in &pseudo.sequence {
            x.extend_from_slice(&orbits[i as usize]);
        }
        if x.len() != len {
            return Err(GluingError::Inconsistent(format!("pseudo-orbit has {} points, expected {len}", x.len())));
        }
        let (mu_u, mu_s) = self.eigenvalues();
        let kappa = self.eigen_condition();
        let lam = self.lambda();
        // Per-step rounding allowance for the recursions below.
        let r = T::lit(8.0) * T::epsilon();
        let mut eu = vec![T::zero(); len];
        let mut es = vec![T::zero(); len];
        let mut emag = vec![T::zero(); len];
        let mut jump_sum = T::zero();
        for n in 0..len - 1 {
            let ax = self.apply(&x[n])?;
            let e = ax.delta_to(&x[n + 1]);
            if e.x != T::zero() || e.y != T::zero() {
                let (u, s) = self.eigen_coords(e);
                eu[n] = u;
                es[n] = s;
                emag[n] = e.norm();
                jump_sum = jump_sum + emag[n];
            }
        }
        let mut cs = vec![T::zero(); len];
        let mut bs = vec![T::zero(); len];
        for n in 0..len - 1 {
            cs[n + 1] = mu_s * cs[n] - es[n];
            bs[n + 1] = bs[n] / lam + kappa * emag[n] + r;
        }
        let mut cu = vec![T::zero(); len];
        let mut bu = vec![T::zero(); len];
        for n in (0..len - 1).rev() {
            cu[n] = (cu[n + 1] + eu[n]) / mu_u;
            bu[n] = (bu[n + 1] + kappa * emag[n] + r) / lam;
        }
        drop((eu, es, emag));
        let mut z = Vec::with_capacity(len);
        let mut distances = Vec::with_capacity(len);
        let (mut max_d, mut local) = (T::zero(), T::zero());
        for n in 0..len {
            let c = self.from_eigen_coords(cu[n], cs[n]);
            z.push(x[n].translate(c));
            let d = c.norm();
            distances.push(d.as_f64());
            max_d = Float::max(max_d, d);
            local = Float::max(local, bu[n] + bs[n]);
        }
        let mut defect = T::zero();
        for n in 0..len - 1 {
            defect = Float::max(defect, self.apply(&z[n])?.distance(&z[n + 1]));
        }
        let inv = T::one() / lam;
        let global = (jump_sum + T::from_count(len) * r) * kappa * (T::one() + inv) / (T::one() - inv);
        let slack = T::lit(4.0) * T::epsilon();
        if max_d > local + slack || local > global + slack {
            return Err(GluingError::Inconsistent(format!(
                "shadow bounds out of order: actual {max_d}, local {local}, global {global}"
            )));
        }
        Ok(ShadowResult {
            z: z[0],
            orbit: Some(z),
            distances: Some(distances),
            max_distance: max_d.as_f64(),
            certified_local: local.as_f64(),
            certified_global: global.as_f64(),
            jump_sum: jump_sum.as_f64(),
            orbit_defect: defect.as_f64(),
            len: pseudo.len,
            method: ShadowMethod::ExactLinear,
        })
    }
}

/// The Katok map has cells and jump errors but no shadowing backend.
impl<T: Real> Gluable for KatokMap<T> {
    fn cell_diameter(&self, cell: f64) -> f64 {
        torus_cell_diameter(cell)
    }

    fn find_connector(
        &self,
        _from: &TorusPoint<T>,
        _to: &TorusPoint<T>,
        _cell: f64,
        _search: &ConnectorSearch,
    ) -> Result<Option<(TorusPoint<T>, usize)>, GluingError> {
        Err(GluingError::Unsupported { system: self.name().to_string() })
    }
}
