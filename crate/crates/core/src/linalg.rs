//! Two-dimensional linear algebra used by the tangent cocycle, Lyapunov
//! exponents, and the Pesin block checks.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self.scale(T::one() / n))
        } else {
            None
        }
    }

    /// Counter-clockwise rotation by a right angle.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2<T> {
    pub m: [[T; 2]; 2],
}

impl<T: Real> Mat2<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn from_columns(c0: Vec2<T>, c1: Vec2<T>) -> Self {
        Self::new(c0.x, c1.x, c0.y, c1.y)
    }

    pub fn from_i64(m: [[i64; 2]; 2]) -> Self {
        let f = |v: i64| T::from_i64(v).expect("small integer");
        Self::new(f(m[0][0]), f(m[0][1]), f(m[1][0]), f(m[1][1]))
    }

    pub fn col(&self, j: usize) -> Vec2<T> {
        Vec2::new(self.m[0][j], self.m[1][j])
    }

    /// Kahan's fused difference of products, accurate even under cancellation.
    pub fn det(&self) -> T {
        let [[a, b], [c, d]] = self.m;
        let w = b * c;
        let e = (-b).mul_add(c, w);
        let f = a.mul_add(d, -w);
        f + e
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1]
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let inv = T::one() / d;
        Some(Self::new(
            self.m[1][1] * inv,
            -self.m[0][1] * inv,
            -self.m[1][0] * inv,
            self.m[0][0] * inv,
        ))
    }

    pub fn apply(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).abs());
            }
        }
        worst
    }

    /// Gram–Schmidt QR factorisation with a non-negative diagonal in `R`.
    pub fn qr(&self) -> (Self, Self) {
        let a0 = self.col(0);
        let a1 = self.col(1);
        let r00 = a0.norm();
        let q0 = if r00 > T::zero() {
            a0.scale(T::one() / r00)
        } else {
            Vec2::new(T::one(), T::zero())
        };
        let r01 = q0.dot(a1);
        let w = a1 - q0.scale(r01);
        // In two dimensions the second column is the rotated first one; the
        // sign of r11 then carries the orientation (det of the input).
        let q1 = q0.perp();
        let r11 = q1.dot(w);
        let (q1, r11) = if r11 < T::zero() { (-q1, -r11) } else { (q1, r11) };
        (Self::from_columns(q0, q1), Self::new(r00, r01, T::zero(), r11))
    }

    /// Singular values (descending) with the matching right singular vectors.
    pub fn svd_right(&self) -> ([T; 2], [Vec2<T>; 2]) {
        let ata = self.transpose() * *self;
        let a = ata.m[0][0];
        let b = ata.m[0][1];
        let d = ata.m[1][1];
        let half = T::lit(0.5);
        let mean = (a + d) * half;
        let rad = ((a - d) * half).hypot(b);
        let l1 = mean + rad;
        let v1 = if b.abs() > T::zero() {
            // Pick the better conditioned of the two eigenvector formulas.
            let c1 = Vec2::new(b, l1 - a);
            let c2 = Vec2::new(l1 - d, b);
            if c1.norm() >= c2.norm() {
                c1
            } else {
                c2
            }
        } else if a >= d {
            Vec2::new(T::one(), T::zero())
        } else {
            Vec2::new(T::zero(), T::one())
        };
        let v1 = v1.normalized().unwrap_or(Vec2::new(T::one(), T::zero()));
        let v2 = v1.perp();
        // s1 * s2 = |det| keeps the small value accurate when the condition
        // number is large.
        let s1 = self.apply(v1).norm();
        let s2 = if s1 > T::zero() { self.det().abs() / s1 } else { T::zero() };
        ([s1, s2], [v1, v2])
    }
}

impl<T: Real> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let a = &self.m;
        let b = &o.m;
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl<T: Real> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let a = &self.m;
        let b = &o.m;
        Self::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_reconstructs() {
        let a = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let (q, r) = a.qr();
        assert!((q * r).max_abs_diff(&a) < 1e-14);
        assert!((q.transpose() * q).max_abs_diff(&Mat2::identity()) < 1e-14);
        assert!(r.m[0][0] > 0.0 && r.m[1][1] > 0.0);
    }

    #[test]
    fn qr_keeps_orientation_in_r() {
        let a = Mat2::<f64>::new(0.0, 1.0, 1.0, 0.0);
        let (q, r) = a.qr();
        assert!((q * r).max_abs_diff(&a) < 1e-14);
        assert!((r.det() - a.det()).abs() < 1e-14 || (r.det() + a.det()).abs() < 1e-14);
    }

    #[test]
    fn svd_of_symmetric_power() {
        let a: Mat2<f64> = Mat2::from_i64([[2, 1], [1, 1]]);
        let lambda = (3.0 + 5f64.sqrt()) / 2.0;
        let mut p = Mat2::identity();
        for _ in 0..20 {
            p = p * a;
        }
        let (s, v) = p.svd_right();
        assert!((s[0] / lambda.powi(20) - 1.0).abs() < 1e-12);
        assert!((s[1] * lambda.powi(20) - 1.0).abs() < 1e-3);
        assert!(v[0].dot(v[1]).abs() < 1e-15);
    }

    #[test]
    fn inverse_of_cat_matrix() {
        let a: Mat2<f64> = Mat2::from_i64([[2, 1], [1, 1]]);
        let inv = a.inverse().unwrap();
        assert_eq!(inv, Mat2::from_i64([[1, -1], [-1, 2]]));
    }
}
