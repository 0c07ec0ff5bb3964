//! Katok's nonuniformly hyperbolic map of the 2-torus.
//!
//! Inside the disk `D_{r1}` (radius measured in the orthonormal eigenbasis
//! of the cat matrix) the linear map is replaced by the time-1 map of
//!
//! ```text
//! ds1/dt =  s1 * psi(s1^2 + s2^2) * log(lambda)
//! ds2/dt = -s2 * psi(s1^2 + s2^2) * log(lambda)
//! ```
//!
//! with `psi(u) = min(1, (u / r0)^alpha)`. Wherever `psi = 1` along a whole
//! trajectory the time-1 map is exactly the linear map, so `f` equals `A`
//! outside the disk.

use serde::{Deserialize, Serialize};

use super::{DynamicalSystem, Invertible, LinearToralMap, SmoothSystem, SystemError, TorusPoint};
use crate::linalg::{Mat2, Vec2};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KatokParams {
    /// `psi(u) = 1` for `u >= r0` (`u` is the squared eigen-radius).
    pub r0: f64,
    /// Radius of the slowdown disk.
    pub r1: f64,
    /// Exponent of the slowdown profile near the origin, in `(0, 1)`.
    pub alpha: f64,
    /// Local error tolerance per unit flow time.
    pub tolerance: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for KatokParams {
    fn default() -> Self {
        Self {
            r0: 0.001,
            r1: 0.1,
            alpha: 0.5,
            tolerance: 1e-10,
            max_step: 0.125,
            min_step: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KatokMap<T> {
    base: LinearToralMap<T>,
    params: KatokParams,
    r0: T,
    r1: T,
    alpha: T,
    log_lambda: T,
    /// Columns are the unstable and stable unit eigenvectors.
    frame: Mat2<T>,
}

impl<T: Real> KatokMap<T> {
    pub fn new(params: KatokParams) -> Result<Self, SystemError> {
        let base = LinearToralMap::cat_map();
        Self::with_base(base, params)
    }

    pub fn with_base(base: LinearToralMap<T>, params: KatokParams) -> Result<Self, SystemError> {
        let bad = |m: String| Err(SystemError::InvalidParameter(m));
        if !base.is_symmetric() {
            return bad("slowdown coordinates need an orthonormal eigenbasis (symmetric matrix)".into());
        }
        if !(params.r0 > 0.0 && params.r0 < params.r1) {
            return bad(format!("need 0 < r0 < r1, got r0={} r1={}", params.r0, params.r1));
        }
        if params.r1 * base.lambda().as_f64() >= 0.5 {
            return bad(format!("r1={} too large: lambda*r1 must stay below 1/2", params.r1));
        }
        if !(params.alpha > 0.0 && params.alpha < 1.0) {
            return bad(format!("alpha must lie in (0,1) for 1/psi to be integrable, got {}", params.alpha));
        }
        if !(params.tolerance > 0.0 && params.min_step > 0.0 && params.max_step >= params.min_step) {
            return bad("integrator tolerances must be positive".into());
        }
        let frame = Mat2::from_columns(base.unstable(), base.stable());
        Ok(Self {
            r0: T::lit(params.r0),
            r1: T::lit(params.r1),
            alpha: T::lit(params.alpha),
            log_lambda: base.log_lambda(),
            base,
            params,
            frame,
        })
    }

    pub fn params(&self) -> &KatokParams {
        &self.params
    }

    pub fn base(&self) -> &LinearToralMap<T> {
        &self.base
    }

    pub fn psi(&self, u: T) -> T {
        if u >= self.r0 {
            T::one()
        } else if u <= T::zero() {
            T::zero()
        } else {
            (u / self.r0).powf(self.alpha)
        }
    }

    /// `int_0^1 du / psi(u)` in closed form.
    pub fn psi_reciprocal_integral(&self) -> T {
        self.r0 / (T::one() - self.alpha) + T::one() - self.r0
    }

    /// True when trajectories leaving the disk boundary never reach the
    /// slowed region within unit time, which makes `f` continuous there.
    pub fn is_continuous_at_disk_boundary(&self) -> bool {
        self.r0.sqrt() < self.r1 / self.base.lambda()
    }

    /// Eigen-coordinates `(s1, s2)` of the lift of `p` nearest the origin.
    pub fn eigen_coords(&self, p: &TorusPoint<T>) -> Vec2<T> {
        self.frame.transpose().apply(p.lift())
    }

    fn field(&self, s: Vec2<T>) -> Vec2<T> {
        let g = self.psi(s.dot(s)) * self.log_lambda;
        Vec2::new(s.x * g, -s.y * g)
    }

    fn field_jacobian(&self, s: Vec2<T>) -> Mat2<T> {
        let u = s.dot(s);
        let psi = self.psi(u);
        let mut j = Mat2::new(psi, T::zero(), T::zero(), -psi);
        if u > T::zero() && u < self.r0 {
            // psi'(u) = alpha * psi(u) / u on (0, r0).
            let k = (self.alpha + self.alpha) * psi / u;
            j = j + Mat2::new(s.x * s.x, s.x * s.y, -s.y * s.x, -s.y * s.y).scale(k);
        }
        j.scale(self.log_lambda)
    }

    fn rk4(&self, s: Vec2<T>, jac: Option<Mat2<T>>, h: T) -> (Vec2<T>, Option<Mat2<T>>) {
        let half = T::lit(0.5);
        let sixth = T::one() / T::lit(6.0);
        let two = T::lit(2.0);
        let k1 = self.field(s);
        let s2 = s + k1.scale(h * half);
        let k2 = self.field(s2);
        let s3 = s + k2.scale(h * half);
        let k3 = self.field(s3);
        let s4 = s + k3.scale(h);
        let k4 = self.field(s4);
        let next = s + (k1 + k2.scale(two) + k3.scale(two) + k4).scale(h * sixth);
        let next_jac = jac.map(|m| {
            let l1 = self.field_jacobian(s) * m;
            let l2 = self.field_jacobian(s2) * (m + l1.scale(h * half));
            let l3 = self.field_jacobian(s3) * (m + l2.scale(h * half));
            let l4 = self.field_jacobian(s4) * (m + l3.scale(h));
            m + (l1 + l2.scale(two) + l3.scale(two) + l4).scale(h * sixth)
        });
        (next, next_jac)
    }

    /// Flows eigen-coordinates for signed time `time` with step-doubling
    /// RK4, optionally carrying the variational equation.
    fn flow(
        &self,
        s0: Vec2<T>,
        time: T,
        with_jacobian: bool,
    ) -> Result<(Vec2<T>, Mat2<T>), SystemError> {
        let tol = T::lit(self.params.tolerance);
        let min_step = T::lit(self.params.min_step);
        let dir = time.signum();
        let total = time.abs();
        let mut s = s0;
        let mut jac = with_jacobian.then(Mat2::identity);
        let mut done = T::zero();
        let mut h = T::lit(self.params.max_step).min(total);
        while done < total {
            h = h.min(total - done);
            let (full, _) = self.rk4(s, None, dir * h);
            let (mid, mid_jac) = self.rk4(s, jac, dir * h * T::lit(0.5));
            let (fine, fine_jac) = self.rk4(mid, mid_jac, dir * h * T::lit(0.5));
            let err = (fine - full).norm() / T::lit(15.0);
            if err <= tol * h {
                s = fine + (fine - full).scale(T::one() / T::lit(15.0));
                jac = fine_jac;
                done = done + h;
                if err < tol * h / T::lit(64.0) {
                    h = (h + h).min(T::lit(self.params.max_step));
                }
            } else {
                h = h * T::lit(0.5);
                if h < min_step {
                    let p = self.frame.apply(s);
                    return Err(SystemError::IntegratorFailure {
                        x: p.x.as_f64(),
                        y: p.y.as_f64(),
                        time: (dir * done).as_f64(),
                        step: h.as_f64(),
                    });
                }
            }
        }
        Ok((s, jac.unwrap_or_else(Mat2::identity)))
    }

    fn inside_disk(&self, s: Vec2<T>) -> bool {
        s.dot(s) < self.r1 * self.r1
    }

    fn to_torus(&self, s: Vec2<T>) -> TorusPoint<T> {
        TorusPoint::from_vec(self.frame.apply(s))
    }
}

impl<T: Real> DynamicalSystem for KatokMap<T> {
    type Point = TorusPoint<T>;
    type Scalar = T;

    fn name(&self) -> &str {
        "katok-map"
    }

    fn apply(&self, p: &TorusPoint<T>) -> Result<TorusPoint<T>, SystemError> {
        let s = self.eigen_coords(p);
        if self.inside_disk(s) {
            let (out, _) = self.flow(s, T::one(), false)?;
            Ok(self.to_torus(out))
        } else {
            self.base.apply(p)
        }
    }

    fn distance(&self, a: &TorusPoint<T>, b: &TorusPoint<T>) -> T {
        a.distance(b)
    }
}

impl<T: Real> Invertible for KatokMap<T> {
    fn apply_inverse(&self, q: &TorusPoint<T>) -> Result<TorusPoint<T>, SystemError> {
        let s = self.eigen_coords(q);
        let reach = self.r1 * self.base.lambda();
        if s.dot(s) < reach * reach {
            let (out, _) = self.flow(s, -T::one(), false)?;
            Ok(self.to_torus(out))
        } else {
            self.base.apply_inverse(q)
        }
    }
}

impl<T: Real> SmoothSystem for KatokMap<T> {
    fn step_with_jacobian(&self, p: &TorusPoint<T>) -> Result<(TorusPoint<T>, Mat2<T>), SystemError> {
        let s = self.eigen_coords(p);
        if self.inside_disk(s) {
            let (out, j) = self.flow(s, T::one(), true)?;
            let jac = self.frame * j * self.frame.transpose();
            Ok((self.to_torus(out), jac))
        } else {
            Ok((self.base.apply(p)?, self.base.matrix()))
        }
    }
}
