use std::fmt;
use std::marker::PhantomData;

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::StatePoint;
use crate::linalg::Vec2;
use crate::Real;

/// Point of the 2-torus `R^2 / Z^2`, coordinates kept in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint<T> {
    x: T,
    y: T,
}

fn reduce<T: Real>(v: T) -> T {
    let r = v - v.floor();
    // `v - floor(v)` rounds up to exactly 1 for tiny negative inputs.
    if r >= T::one() || r < T::zero() || r.is_nan() {
        T::zero()
    } else {
        r
    }
}

/// Representative of `v mod 1` in `[-1/2, 1/2)`.
pub(crate) fn centered<T: Real>(v: T) -> T {
    let half = T::lit(0.5);
    let r = reduce(v + half) - half;
    r
}

impl<T: Real> TorusPoint<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x: reduce(x), y: reduce(y) }
    }

    pub fn from_vec(v: Vec2<T>) -> Self {
        Self::new(v.x, v.y)
    }

    pub fn origin() -> Self {
        Self { x: T::zero(), y: T::zero() }
    }

    pub fn x(&self) -> T {
        self.x
    }

    pub fn y(&self) -> T {
        self.y
    }

    pub fn to_vec(&self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }

    /// The lift of this point closest to the origin, in `[-1/2, 1/2)^2`.
    pub fn lift(&self) -> Vec2<T> {
        Vec2::new(centered(self.x), centered(self.y))
    }

    /// Shortest displacement `other - self` on the torus.
    pub fn delta_to(&self, other: &Self) -> Vec2<T> {
        Vec2::new(centered(other.x - self.x), centered(other.y - self.y))
    }

    /// Flat torus distance.
    pub fn distance(&self, other: &Self) -> T {
        self.delta_to(other).norm()
    }

    pub fn translate(&self, v: Vec2<T>) -> Self {
        Self::new(self.x + v.x, self.y + v.y)
    }
}

fn cells_per_axis(radius: f64) -> u64 {
    if !(radius > 0.0) || radius >= 1.0 {
        return 1;
    }
    ((1.0 / radius).floor() as u64).clamp(1, 1 << 24)
}

fn axis_cell(v: f64, n: u64) -> u64 {
    ((v * n as f64).floor() as i64).clamp(0, n as i64 - 1) as u64
}

impl<T: Real> StatePoint for TorusPoint<T> {
    type Key = (i64, i64);

    fn dedup_key(&self) -> Self::Key {
        let q = |v: T| (v.as_f64() * 1e12).round() as i64 % 1_000_000_000_000;
        (q(self.x), q(self.y))
    }

    fn cell(&self, radius: f64) -> u64 {
        let n = cells_per_axis(radius);
        axis_cell(self.x.as_f64(), n) * n + axis_cell(self.y.as_f64(), n)
    }

    fn neighbor_cells(&self, radius: f64, out: &mut Vec<u64>) {
        out.clear();
        let n = cells_per_axis(radius);
        let cx = axis_cell(self.x.as_f64(), n) as i64;
        let cy = axis_cell(self.y.as_f64(), n) as i64;
        let ni = n as i64;
        for dx in -1..=1 {
            for dy in -1..=1 {
                let gx = (cx + dx).rem_euclid(ni) as u64;
                let gy = (cy + dy).rem_euclid(ni) as u64;
                let key = gx * n + gy;
                if !out.contains(&key) {
                    out.push(key);
                }
            }
        }
    }
}

impl<T: Real> Serialize for TorusPoint<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&self.x.to_string())?;
        t.serialize_element(&self.y.to_string())?;
        t.end()
    }
}

impl<'de, T: Real> Deserialize<'de> for TorusPoint<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct PointVisitor<T>(PhantomData<T>);

        impl<'de, T: Real> Visitor<'de> for PointVisitor<T> {
            type Value = TorusPoint<T>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a pair of decimal strings")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut coord = |name: &str| -> Result<T, A::Error> {
                    let s: String = seq
                        .next_element()?
                        .ok_or_else(|| de::Error::custom(format!("missing {name}")))?;
                    s.parse::<T>()
                        .map_err(|_| de::Error::custom(format!("bad decimal {s:?}")))
                };
                let x = coord("x")?;
                let y = coord("y")?;
                Ok(TorusPoint::new(x, y))
            }
        }

        d.deserialize_tuple(2, PointVisitor(PhantomData))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_into_unit_square() {
        let p = TorusPoint::new(1.5f64, -0.25);
        assert_eq!((p.x(), p.y()), (0.5, 0.75));
        let q = TorusPoint::new(-1e-300f64, 2.0);
        assert!(q.x() >= 0.0 && q.x() < 1.0);
        assert_eq!(q.y(), 0.0);
    }

    #[test]
    fn distance_wraps() {
        let a = TorusPoint::new(0.95f64, 0.5);
        let b = TorusPoint::new(0.05f64, 0.5);
        assert!((a.distance(&b) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn neighbors_cover_close_points() {
        let a = TorusPoint::new(0.999f64, 0.001);
        let b = TorusPoint::new(0.001f64, 0.999);
        let mut cells = Vec::new();
        a.neighbor_cells(0.01, &mut cells);
        assert!(cells.contains(&b.cell(0.01)));
    }

    #[test]
    fn serde_round_trip_is_bit_exact() {
        let p = TorusPoint::new(0.1f64 + 0.2, 1.0 / 3.0);
        let s = serde_json::to_string(&p).unwrap();
        let q: TorusPoint<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
