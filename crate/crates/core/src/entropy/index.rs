//! Orbit tables and a spatial hash for Bowen-ball queries.
//!
//! A point `y` can only lie in `B_n(x, eps)` if `f^i y` is in a cell
//! neighbouring `f^i x` for every `i < n`. The index keys each orbit by its
//! cells at a middle iterate and at the last iterate, which pins the point
//! down in both the stable and unstable directions, and then checks
//! candidates with the exact Bowen distance. Ultrametric cells (cylinders)
//! are keyed at every iterate, so a key match is already a Bowen-ball hit.

use std::hash::Hasher;

use num_traits::{Float, Zero};
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHasher};

use crate::systems::{DynamicalSystem, StatePoint, SystemError};
use crate::Real;

/// The first `len` iterates of a list of points, stored row by row.
#[derive(Debug, Clone)]
pub struct OrbitTable<P> {
    len: usize,
    data: Vec<P>,
}

impl<P: StatePoint> OrbitTable<P> {
    pub fn build<S: DynamicalSystem<Point = P>>(
        system: &S,
        starts: &[P],
        len: usize,
    ) -> Result<Self, SystemError> {
        assert!(len >= 1, "orbit length must be positive");
        let rows: Vec<Vec<P>> = starts
            .par_iter()
            .map(|x| system.orbit(x, len))
            .collect::<Result<_, _>>()?;
        Ok(Self { len, data: rows.into_iter().flatten().collect() })
    }

    /// Orbit length stored per row.
    pub fn orbit_len(&self) -> usize {
        self.len
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.len
    }

    pub fn row(&self, i: usize) -> &[P] {
        &self.data[i * self.len..(i + 1) * self.len]
    }

    pub fn start(&self, i: usize) -> &P {
        &self.data[i * self.len]
    }
}

/// `d_n(x, y) = max_{i<n} d(f^i x, f^i y)` on precomputed orbits.
pub fn bowen_distance<S: DynamicalSystem>(system: &S, a: &[S::Point], b: &[S::Point], n: usize) -> S::Scalar {
    a[..n]
        .iter()
        .zip(&b[..n])
        .map(|(p, q)| system.distance(p, q))
        .fold(S::Scalar::zero(), |m, d| Float::max(m, d))
}

/// `d_n(x, y) < eps`, stopping at the first iterate that violates it.
pub fn within_bowen<S: DynamicalSystem>(
    system: &S,
    a: &[S::Point],
    b: &[S::Point],
    n: usize,
    eps: S::Scalar,
) -> bool {
    // The last iterate separates points fastest for expanding systems.
    if system.distance(&a[n - 1], &b[n - 1]) >= eps {
        return false;
    }
    a[..n - 1].iter().zip(&b[..n - 1]).all(|(p, q)| system.distance(p, q) < eps)
}

/// Spatial hash of orbit rows for one `(n, eps)`. Rows are keyed by the
/// cells of two orbit points, or of every orbit point when cells are
/// ultrametric.
#[derive(Debug, Clone)]
pub struct BowenIndex {
    n: usize,
    eps: f64,
    mid: usize,
    map: FxHashMap<u64, Vec<u32>>,
}

fn combine(keys: impl Iterator<Item = u64>) -> u64 {
    let mut h = FxHasher::default();
    keys.for_each(|k| h.write_u64(k));
    h.finish()
}

impl BowenIndex {
    pub fn new(n: usize, eps: f64) -> Self {
        assert!(n >= 1 && eps > 0.0, "Bowen balls need n >= 1 and eps > 0");
        Self { n, eps, mid: (n - 1) / 2, map: FxHashMap::default() }
    }

    /// Indexes every row of `table`.
    pub fn build<P: StatePoint>(table: &OrbitTable<P>, n: usize, eps: f64) -> Self {
        let mut index = Self::new(n, eps);
        for i in 0..table.rows() {
            index.insert(i as u32, table.row(i));
        }
        index
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn key<P: StatePoint>(&self, row: &[P]) -> u64 {
        if P::ultrametric() {
            combine(row[..self.n].iter().map(|p| p.cell(self.eps)))
        } else {
            combine([row[self.mid].cell(self.eps), row[self.n - 1].cell(self.eps)].into_iter())
        }
    }

    /// The cells of every iterate when cells are ultrametric. Rows with
    /// equal exact keys have the same Bowen ball.
    pub fn exact_key<P: StatePoint>(&self, row: &[P]) -> Option<Vec<u64>> {
        P::ultrametric().then(|| row[..self.n].iter().map(|p| p.cell(self.eps)).collect())
    }

    pub fn insert<P: StatePoint>(&mut self, id: u32, row: &[P]) {
        self.map.entry(self.key(row)).or_default().push(id);
    }

    /// Calls `visit` with every indexed id whose row might be within `eps`.
    pub fn for_each_candidate<P: StatePoint>(&self, row: &[P], mut visit: impl FnMut(u32)) {
        if P::ultrametric() {
            if let Some(ids) = self.map.get(&self.key(row)) {
                ids.iter().for_each(|&id| visit(id));
            }
            return;
        }
        let mut a = Vec::with_capacity(9);
        let mut b = Vec::with_capacity(9);
        row[self.mid].neighbor_cells(self.eps, &mut a);
        row[self.n - 1].neighbor_cells(self.eps, &mut b);
        a.sort_unstable();
        a.dedup();
        b.sort_unstable();
        b.dedup();
        for &ka in &a {
            for &kb in &b {
                if let Some(ids) = self.map.get(&combine([ka, kb].into_iter())) {
                    ids.iter().for_each(|&id| visit(id));
                }
            }
        }
    }

    /// Ids `j` with `d_n(row, table.row(j)) < eps`, in increasing order.
    pub fn query<S: DynamicalSystem>(
        &self,
        system: &S,
        table: &OrbitTable<S::Point>,
        row: &[S::Point],
        out: &mut Vec<u32>,
    ) {
        out.clear();
        let eps = S::Scalar::lit(self.eps);
        self.for_each_candidate(row, |id| {
            if within_bowen(system, row, table.row(id as usize), self.n, eps) {
                out.push(id);
            }
        });
        out.sort_unstable();
    }

    /// True if some indexed row is within `eps` of `row`.
    pub fn any_within<S: DynamicalSystem>(
        &self,
        system: &S,
        table: &OrbitTable<S::Point>,
        row: &[S::Point],
    ) -> bool {
        let eps = S::Scalar::lit(self.eps);
        let mut found = false;
        self.for_each_candidate(row, |id| {
            if !found && within_bowen(system, row, table.row(id as usize), self.n, eps) {
                found = true;
            }
        });
        found
    }
}

/// For each center orbit, the sample ids inside its Bowen ball.
pub fn coverage_lists<S: DynamicalSystem>(
    system: &S,
    centers: &[&[S::Point]],
    sample: &OrbitTable<S::Point>,
    n: usize,
    eps: f64,
) -> Vec<Vec<u32>> {
    let index = BowenIndex::build(sample, n, eps);
    centers
        .par_iter()
        .map_init(Vec::new, |buf, row| {
            index.query(system, sample, row, buf);
            buf.clone()
        })
        .collect()
}

impl<P: StatePoint> OrbitTable<P> {
    pub fn all_rows(&self) -> Vec<&[P]> {
        (0..self.rows()).map(|i| self.row(i)).collect()
    }
}
