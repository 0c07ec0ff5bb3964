//! Finite-time Lyapunov exponents and horizon-bounded Pesin block checks.

use num_traits::{Float, One};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Mat2, Vec2};
use crate::systems::{Invertible, SmoothSystem, SystemError, TorusPoint};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HyperbolicityError {
    #[error("orbit step {step}: {source}")]
    System { step: i64, source: SystemError },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("splitting at t={t} is degenerate: angle {angle:e} below 1e-10")]
    DegenerateSplitting { t: i64, angle: f64 },
}

fn at_step(step: i64) -> impl Fn(SystemError) -> HyperbolicityError {
    move |source| HyperbolicityError::System { step, source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    /// `lambda_1 >= lambda_2`, nats per iterate.
    pub exponents: [f64; 2],
    pub n: usize,
    /// `(step, running lambda_1, running lambda_2)` at regularly spaced steps.
    pub convergence: Vec<(usize, f64, f64)>,
}

/// Lyapunov exponents over `n` steps by repeated QR of the tangent cocycle.
///
/// The orthonormal frame starts at the right singular vectors of
/// `Df^h_x`, `h = min(n, 32)`, so the leading column is already close to
/// the most expanded direction and the finite-`n` transient is small.
pub fn lyapunov_exponents<S: SmoothSystem>(
    system: &S,
    x: &TorusPoint<S::Scalar>,
    n: usize,
) -> Result<ExponentReport, HyperbolicityError> {
    if n == 0 {
        return Err(HyperbolicityError::InvalidParameter("horizon n must be at least 1".into()));
    }
    let h = n.min(32);
    let mut warm = Mat2::identity();
    let mut cur = *x;
    for i in 0..h {
        let (next, j) = system.step_with_jacobian(&cur).map_err(at_step(i as i64))?;
        warm = j * warm;
        cur = next;
    }
    let (_, [v1, v2]) = warm.svd_right();
    let mut frame = Mat2::from_columns(v1, v2);
    let mut sums = [0.0f64; 2];
    let every = (n / 256).max(1);
    let mut convergence = Vec::new();
    let mut cur = *x;
    for i in 0..n {
        let (next, j) = system.step_with_jacobian(&cur).map_err(at_step(i as i64))?;
        let (q, r) = (j * frame).qr();
        sums[0] += r.m[0][0].abs().as_f64().ln();
        sums[1] += r.m[1][1].abs().as_f64().ln();
        frame = q;
        cur = next;
        if (i + 1) % every == 0 || i + 1 == n {
            let k = (i + 1) as f64;
            convergence.push((i + 1, sums[0] / k, sums[1] / k));
        }
    }
    let l1 = sums[0] / n as f64;
    let l2 = sums[1] / n as f64;
    Ok(ExponentReport { exponents: [l1.max(l2), l1.min(l2)], n, convergence })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentClass {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub hyperbolic: bool,
}

/// `lambda^+ = min{l_i : l_i >= 0}`, `lambda^- = min{-l_i : l_i <= 0}`, with
/// `min of the empty set = 0`; hyperbolic iff both are nonzero.
pub fn lambda_plus_minus(exponents: &[f64]) -> ExponentClass {
    let min_or_zero = |it: &mut dyn Iterator<Item = f64>| it.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v)))).unwrap_or(0.0);
    let lambda_plus = min_or_zero(&mut exponents.iter().copied().filter(|&l| l >= 0.0));
    let lambda_minus = min_or_zero(&mut exponents.iter().filter(|&&l| l <= 0.0).map(|&l| -l));
    ExponentClass { lambda_plus, lambda_minus, hyperbolic: lambda_plus != 0.0 && lambda_minus != 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PesinBlockParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub k: u32,
    /// Shadowing scale `eps_0`; `eps_k = eps_0 exp(-eps k)`.
    pub eps0: f64,
    /// Conditions are tested for `|t| <= horizon` and `1 <= n <= horizon`.
    pub horizon: usize,
    /// Largest angle (radians) between `Df E_x` and `E_{fx}` accepted as invariant.
    pub invariance_tolerance: f64,
}

impl Default for PesinBlockParams {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.9, eps: 0.05, k: 1, eps0: 1.0, horizon: 50, invariance_tolerance: 1e-6 }
    }
}

impl PesinBlockParams {
    pub fn eps_k(&self) -> f64 {
        self.eps0 * (-self.eps * self.k as f64).exp()
    }

    fn validate(&self) -> Result<(), HyperbolicityError> {
        if !(self.eps > 0.0 && self.beta1 > self.eps && self.beta2 > self.eps && self.k >= 1 && self.horizon >= 1) {
            return Err(HyperbolicityError::InvalidParameter(format!(
                "need beta1, beta2 > eps > 0, k >= 1, horizon >= 1; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Worst slack of each block condition, in log scale: a condition holds
/// over the horizon iff its margin is nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockMargins {
    pub invariance: f64,
    pub stable: f64,
    pub unstable: f64,
    pub angle: f64,
}

impl BlockMargins {
    pub fn all_nonnegative(&self) -> bool {
        self.invariance >= 0.0 && self.stable >= 0.0 && self.unstable >= 0.0 && self.angle >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BlockMembershipWitness<T> {
    pub point: TorusPoint<T>,
    pub params: PesinBlockParams,
    /// `(t, E^s, E^u)` for `|t| <= horizon`.
    pub splitting: Vec<(i64, [f64; 2], [f64; 2])>,
    pub margins: BlockMargins,
    /// Membership up to the horizon.
    pub member: bool,
}

/// Orbit points and one-step Jacobians for `t` in `[-r, r]`.
struct OrbitWindow<T> {
    r: i64,
    points: Vec<TorusPoint<T>>,
    jac: Vec<Mat2<T>>,
}

impl<T: Real> OrbitWindow<T> {
    fn build<S>(system: &S, x: &TorusPoint<T>, r: usize) -> Result<Self, HyperbolicityError>
    where
        S: SmoothSystem<Scalar = T> + Invertible,
    {
        let ri = r as i64;
        let mut back = Vec::with_capacity(r);
        let mut cur = *x;
        for i in 1..=ri {
            cur = system.apply_inverse(&cur).map_err(at_step(-i))?;
            back.push(cur);
        }
        back.reverse();
        let mut points = back;
        points.push(*x);
        let mut jac = Vec::with_capacity(2 * r + 1);
        let mut cur = points[0];
        for i in 0..=2 * ri {
            let (next, j) = system.step_with_jacobian(&cur).map_err(at_step(i - ri))?;
            jac.push(j);
            if i >= ri && i < 2 * ri {
                points.push(next);
            }
            cur = if i < ri { points[(i + 1) as usize] } else { next };
        }
        Ok(Self { r: ri, points, jac })
    }

    fn idx(&self, t: i64) -> usize {
        (t + self.r) as usize
    }

    /// `Df_{f^t x}`.
    fn df(&self, t: i64) -> Mat2<T> {
        self.jac[self.idx(t)]
    }

    fn cocycle(&self, t: i64, n: usize) -> Mat2<T> {
        (0..n as i64).fold(Mat2::identity(), |acc, i| self.df(t + i) * acc)
    }
}

fn angle<T: Real>(a: Vec2<T>, b: Vec2<T>) -> f64 {
    let c = a.dot(b).abs().as_f64().min(1.0);
    let s = (a.x * b.y - a.y * b.x).abs().as_f64();
    s.atan2(c)
}

/// Finite-time splitting at `f^t x`: `E^s` is the most contracted direction
/// of `Df^H` there and `E^u` the most expanded image direction of `Df^H`
/// arriving there, `H = window.r - |t|` capped at the horizon.
fn finite_time_splitting<T: Real>(w: &OrbitWindow<T>, t: i64, h: usize) -> (Vec2<T>, Vec2<T>) {
    let forward = w.cocycle(t, h);
    let (_, [_, es]) = forward.svd_right();
    let arriving = w.cocycle(t - h as i64, h);
    let (_, [eu, _]) = arriving.transpose().svd_right();
    (es, eu)
}

/// Checks the block conditions for `Lambda_k(beta1, beta2, eps)` at `x`
/// over `|t| <= T`, `1 <= n <= T`.
pub fn pesin_block_membership<S>(
    system: &S,
    x: &TorusPoint<S::Scalar>,
    params: &PesinBlockParams,
) -> Result<BlockMembershipWitness<S::Scalar>, HyperbolicityError>
where
    S: SmoothSystem + Invertible,
{
    params.validate()?;
    let t_max = params.horizon as i64;
    let h = params.horizon;
    let w = OrbitWindow::build(system, x, 2 * params.horizon + 1)?;
    let split = |t: i64| -> (Vec2<S::Scalar>, Vec2<S::Scalar>) {
        system
            .invariant_splitting(&w.points[w.idx(t)])
            .unwrap_or_else(|| finite_time_splitting(&w, t, h))
    };
    let eps = params.eps;
    let k = params.k as f64;
    let mut margins = BlockMargins {
        invariance: f64::INFINITY,
        stable: f64::INFINITY,
        unstable: f64::INFINITY,
        angle: f64::INFINITY,
    };
    let mut splitting = Vec::with_capacity(2 * params.horizon + 1);
    let mut next_split = split(-t_max);
    for t in -t_max..=t_max {
        let (es, eu) = next_split;
        let ang = angle(es, eu);
        if ang < 1e-10 {
            return Err(HyperbolicityError::DegenerateSplitting { t, angle: ang });
        }
        splitting.push((t, [es.x.as_f64(), es.y.as_f64()], [eu.x.as_f64(), eu.y.as_f64()]));
        let slack = eps * k + eps * t.abs() as f64;
        margins.angle = margins.angle.min(ang.tan().ln() + slack);

        next_split = split(t + 1);
        let (es1, eu1) = next_split;
        let df = w.df(t);
        let defect = angle(df.apply(es), es1).max(angle(df.apply(eu), eu1));
        margins.invariance = margins.invariance.min((params.invariance_tolerance / defect.max(1e-300)).ln());

        // ||Df^n | E^s_{f^t x}|| and ||Df^{-n} | E^u_{f^t x}||, renormalised per step.
        let mut vs = es;
        let mut vu = eu;
        let mut log_s = 0.0;
        let mut log_u = 0.0;
        for n in 1..=params.horizon {
            vs = w.df(t + n as i64 - 1).apply(vs);
            let ns = vs.norm();
            log_s += ns.as_f64().ln();
            vs = vs.scale(S::Scalar::one() / ns);
            let inv = w.df(t - n as i64).inverse().expect("Jacobian of a diffeomorphism is invertible");
            vu = inv.apply(vu);
            let nu = vu.norm();
            log_u += nu.as_f64().ln();
            vu = vu.scale(S::Scalar::one() / nu);
            let nf = n as f64;
            margins.stable = margins.stable.min(slack - (params.beta1 - eps) * nf - log_s);
            margins.unstable = margins.unstable.min(slack - (params.beta2 - eps) * nf - log_u);
        }
    }
    Ok(BlockMembershipWitness { point: *x, params: *params, splitting, member: margins.all_nonnegative(), margins })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub checked: usize,
    /// `(sample index, k)` with `x` in `Lambda_k` but not in `Lambda_{k+1}`.
    pub nesting_violations: Vec<(usize, u32)>,
    /// `(sample index, k)` with `x` in `Lambda_k` but `f x` not in `Lambda_{k+1}`.
    pub image_violations: Vec<(usize, u32)>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.nesting_violations.is_empty() && self.image_violations.is_empty()
    }
}

/// Tests `Lambda_k ⊆ Lambda_{k+1}` and `f(Lambda_k) ⊆ Lambda_{k+1}` on a sample.
pub fn block_monotonicity_check<S>(
    system: &S,
    sample: &[TorusPoint<S::Scalar>],
    params: &PesinBlockParams,
    ks: std::ops::RangeInclusive<u32>,
) -> Result<MonotonicityReport, HyperbolicityError>
where
    S: SmoothSystem + Invertible,
{
    let mut report = MonotonicityReport { checked: 0, nesting_violations: Vec::new(), image_violations: Vec::new() };
    let with_k = |k| PesinBlockParams { k, ..*params };
    for (i, x) in sample.iter().enumerate() {
        let fx = system.apply(x).map_err(at_step(0))?;
        for k in ks.clone() {
            report.checked += 1;
            if !pesin_block_membership(system, x, &with_k(k))?.member {
                continue;
            }
            if !pesin_block_membership(system, x, &with_k(k + 1))?.member {
                report.nesting_violations.push((i, k));
            }
            if !pesin_block_membership(system, &fx, &with_k(k + 1))?.member {
                report.image_violations.push((i, k));
            }
        }
    }
    Ok(report)
}
