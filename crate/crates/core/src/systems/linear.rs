use super::{DynamicalSystem, Invertible, SmoothSystem, SystemError, TorusPoint};
use crate::linalg::{Mat2, Vec2};
use crate::Real;
use num_traits::Float;

/// Hyperbolic automorphism of the 2-torus given by an integer matrix with
/// determinant one, e.g. the cat map `((2,1),(1,1))`.
#[derive(Debug, Clone)]
pub struct LinearToralMap<T> {
    name: String,
    int_matrix: [[i64; 2]; 2],
    int_inverse: [[i64; 2]; 2],
    matrix: Mat2<T>,
    inverse: Mat2<T>,
    /// Dominant eigenvalue modulus, `> 1`.
    lambda: T,
    unstable: Vec2<T>,
    stable: Vec2<T>,
    /// Maps a vector to its (unstable, stable) coefficients.
    to_eigen: Mat2<T>,
}

fn orient<T: Real>(v: Vec2<T>) -> Vec2<T> {
    if v.x < T::zero() || (v.x == T::zero() && v.y < T::zero()) {
        -v
    } else {
        v
    }
}

fn eigenvector<T: Real>(m: &Mat2<T>, mu: T) -> Vec2<T> {
    let [[a, b], [c, d]] = m.m;
    let c1 = Vec2::new(b, mu - a);
    let c2 = Vec2::new(mu - d, c);
    let v = if c1.norm() >= c2.norm() { c1 } else { c2 };
    orient(v.normalized().expect("hyperbolic matrix has a real eigenvector"))
}

impl<T: Real> LinearToralMap<T> {
    pub fn new(name: impl Into<String>, m: [[i64; 2]; 2]) -> Result<Self, SystemError> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det != 1 {
            return Err(SystemError::InvalidParameter(format!(
                "toral automorphism needs determinant 1, got {det}"
            )));
        }
        let tr = m[0][0] + m[1][1];
        if tr.abs() <= 2 {
            return Err(SystemError::InvalidParameter(format!(
                "matrix with trace {tr} is not hyperbolic"
            )));
        }
        let int_inverse = [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]];
        let matrix = Mat2::from_i64(m);
        let inverse = Mat2::from_i64(int_inverse);
        let t = T::from_i64(tr).expect("small trace");
        let four = T::lit(4.0);
        let disc = (t * t - four).sqrt();
        let half = T::lit(0.5);
        let (mu_u, mu_s) = if t > T::zero() {
            ((t + disc) * half, (t - disc) * half)
        } else {
            ((t - disc) * half, (t + disc) * half)
        };
        let unstable = eigenvector(&matrix, mu_u);
        let stable = eigenvector(&matrix, mu_s);
        let to_eigen = Mat2::from_columns(unstable, stable)
            .inverse()
            .expect("distinct eigenvalues give independent eigenvectors");
        Ok(Self {
            name: name.into(),
            int_matrix: m,
            int_inverse,
            matrix,
            inverse,
            lambda: mu_u.abs(),
            unstable,
            stable,
            to_eigen,
        })
    }

    /// Arnold's cat map `((2,1),(1,1))`.
    pub fn cat_map() -> Self {
        Self::new("cat-map", [[2, 1], [1, 1]]).expect("cat map is hyperbolic")
    }

    pub fn int_matrix(&self) -> [[i64; 2]; 2] {
        self.int_matrix
    }

    pub fn matrix(&self) -> Mat2<T> {
        self.matrix
    }

    pub fn inverse_matrix(&self) -> Mat2<T> {
        self.inverse
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Signed eigenvalues `(mu_u, mu_s)` with `|mu_u| = lambda > 1`.
    pub fn eigenvalues(&self) -> (T, T) {
        let tr = self.int_matrix[0][0] + self.int_matrix[1][1];
        if tr > 0 {
            (self.lambda, T::one() / self.lambda)
        } else {
            (-self.lambda, -T::one() / self.lambda)
        }
    }

    /// Largest row norm of the map to eigen-coordinates: each coordinate of
    /// `v` is at most this times `|v|`. Equal to 1 for symmetric matrices.
    pub fn eigen_condition(&self) -> T {
        let m = self.to_eigen.m;
        Float::max(m[0][0].hypot(m[0][1]), m[1][0].hypot(m[1][1]))
    }

    pub fn log_lambda(&self) -> T {
        self.lambda.ln()
    }

    pub fn unstable(&self) -> Vec2<T> {
        self.unstable
    }

    pub fn stable(&self) -> Vec2<T> {
        self.stable
    }

    pub fn is_symmetric(&self) -> bool {
        self.int_matrix[0][1] == self.int_matrix[1][0]
    }

    /// Coefficients `(u, s)` with `v = u * unstable + s * stable`.
    pub fn eigen_coords(&self, v: Vec2<T>) -> (T, T) {
        let c = self.to_eigen.apply(v);
        (c.x, c.y)
    }

    pub fn from_eigen_coords(&self, u: T, s: T) -> Vec2<T> {
        self.unstable.scale(u) + self.stable.scale(s)
    }

    fn apply_int(m: &[[i64; 2]; 2], p: &TorusPoint<T>) -> TorusPoint<T> {
        let f = |v: i64| T::from_i64(v).expect("small integer");
        TorusPoint::new(
            f(m[0][0]) * p.x() + f(m[0][1]) * p.y(),
            f(m[1][0]) * p.x() + f(m[1][1]) * p.y(),
        )
    }

    /// Integer matrix power `A^n` (exact while entries fit in `i64`).
    pub fn int_power(&self, n: u32) -> [[i64; 2]; 2] {
        let mut acc = [[1i64, 0], [0, 1]];
        for _ in 0..n {
            let a = acc;
            let m = self.int_matrix;
            acc = [
                [
                    m[0][0] * a[0][0] + m[0][1] * a[1][0],
                    m[0][0] * a[0][1] + m[0][1] * a[1][1],
                ],
                [
                    m[1][0] * a[0][0] + m[1][1] * a[1][0],
                    m[1][0] * a[0][1] + m[1][1] * a[1][1],
                ],
            ];
        }
        acc
    }
}

impl<T: Real> DynamicalSystem for LinearToralMap<T> {
    type Point = TorusPoint<T>;
    type Scalar = T;

    fn name(&self) -> &str {
        &self.name
    }

    fn apply(&self, p: &TorusPoint<T>) -> Result<TorusPoint<T>, SystemError> {
        Ok(Self::apply_int(&self.int_matrix, p))
    }

    fn distance(&self, a: &TorusPoint<T>, b: &TorusPoint<T>) -> T {
        a.distance(b)
    }
}

impl<T: Real> Invertible for LinearToralMap<T> {
    fn apply_inverse(&self, p: &TorusPoint<T>) -> Result<TorusPoint<T>, SystemError> {
        Ok(Self::apply_int(&self.int_inverse, p))
    }
}

impl<T: Real> SmoothSystem for LinearToralMap<T> {
    fn step_with_jacobian(&self, x: &TorusPoint<T>) -> Result<(TorusPoint<T>, Mat2<T>), SystemError> {
        Ok((Self::apply_int(&self.int_matrix, x), self.matrix))
    }

    fn invariant_splitting(&self, _x: &TorusPoint<T>) -> Option<(Vec2<T>, Vec2<T>)> {
        Some((self.stable, self.unstable))
    }
}
