//! The one-sided full shift on two symbols.
//!
//! Points are eventually periodic words `u v v v ...`, which is all a
//! finite computation ever produces. The prefix is shared behind an `Arc`
//! so that shifting is O(1) even for words with tens of millions of symbols.

use std::fmt;
use std::marker::PhantomData;
use std::str::FromStr;
use std::sync::Arc;

use num_integer::Integer;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{DynamicalSystem, StatePoint, SystemError};
use crate::Real;

/// The eventually periodic part of a word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tail {
    Constant(u8),
    /// Repeats `block` forever, starting at `block[phase]`.
    Periodic { block: Arc<[u8]>, phase: usize },
}

impl Tail {
    fn period(&self) -> usize {
        match self {
            Tail::Constant(_) => 1,
            Tail::Periodic { block, .. } => block.len(),
        }
    }

    fn symbol(&self, j: usize) -> u8 {
        match self {
            Tail::Constant(c) => *c,
            Tail::Periodic { block, phase } => block[(phase + j) % block.len()],
        }
    }
}

#[derive(Clone)]
pub struct SymbolicWord {
    data: Arc<[u8]>,
    start: usize,
    tail: Tail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordError(pub String);

impl fmt::Display for WordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid symbolic word: {}", self.0)
    }
}

impl std::error::Error for WordError {}

fn check_symbols(s: &[u8]) -> Result<(), WordError> {
    match s.iter().find(|&&b| b > 1) {
        Some(b) => Err(WordError(format!("symbol {b} is not in {{0,1}}"))),
        None => Ok(()),
    }
}

impl SymbolicWord {
    /// `prefix` followed by `c c c ...`.
    pub fn with_constant_tail(prefix: impl Into<Arc<[u8]>>, c: u8) -> Result<Self, WordError> {
        let data = prefix.into();
        check_symbols(&data)?;
        check_symbols(&[c])?;
        Ok(Self { data, start: 0, tail: Tail::Constant(c) })
    }

    /// `prefix` followed by `block block block ...`.
    pub fn with_periodic_tail(
        prefix: impl Into<Arc<[u8]>>,
        block: impl Into<Arc<[u8]>>,
    ) -> Result<Self, WordError> {
        let data = prefix.into();
        let block = block.into();
        check_symbols(&data)?;
        check_symbols(&block)?;
        if block.is_empty() {
            return Err(WordError("periodic block must be nonempty".into()));
        }
        Ok(Self { data, start: 0, tail: Tail::Periodic { block, phase: 0 } })
    }

    pub fn constant(c: u8) -> Self {
        Self::with_constant_tail(Vec::new(), c).expect("symbol out of range")
    }

    /// The periodic point `block^infinity`.
    pub fn periodic(block: impl Into<Arc<[u8]>>) -> Result<Self, WordError> {
        Self::with_periodic_tail(Vec::<u8>::new(), block)
    }

    /// A word that repeats itself: `w w w ...`, sharing storage with `w`.
    pub fn self_periodic(word: Arc<[u8]>) -> Result<Self, WordError> {
        Self::with_periodic_tail(word.clone(), word)
    }

    pub fn symbol(&self, i: usize) -> u8 {
        let j = self.start + i;
        if j < self.data.len() {
            self.data[j]
        } else {
            self.tail.symbol(j - self.data.len())
        }
    }

    /// The first `n` symbols.
    pub fn take(&self, n: usize) -> Vec<u8> {
        (0..n).map(|i| self.symbol(i)).collect()
    }

    /// Iterates the symbols forever.
    pub fn symbols(&self) -> impl Iterator<Item = u8> + '_ {
        (0..).map(move |i| self.symbol(i))
    }

    pub fn shifted(&self, n: usize) -> Self {
        Self { data: self.data.clone(), start: self.start + n, tail: self.tail.clone() }
    }

    /// Length of the part before the periodic tail, from the current position.
    pub fn prefix_len(&self) -> usize {
        self.data.len().saturating_sub(self.start)
    }

    pub fn tail_period(&self) -> usize {
        self.tail.period()
    }

    /// First index where the words differ, or `None` if they are equal.
    pub fn first_difference(&self, other: &Self) -> Option<usize> {
        let bound = self.prefix_len().max(other.prefix_len())
            + self.tail_period().lcm(&other.tail_period());
        (0..bound).find(|&i| self.symbol(i) != other.symbol(i))
    }

    /// The first `m <= 63` symbols packed as `(1 << m) | bits`, most
    /// significant symbol first.
    pub fn cylinder_code(&self, m: usize) -> u64 {
        assert!(m <= 63, "cylinder depth {m} exceeds 63");
        let mut code = 1u64;
        for i in 0..m {
            code = (code << 1) | self.symbol(i) as u64;
        }
        code
    }

    /// Normal form `(u, v)` with `v` primitive and `u` as short as possible,
    /// so equal infinite words have equal forms.
    pub fn normal_form(&self) -> (Vec<u8>, Vec<u8>) {
        let mut u: Vec<u8> = self.data.get(self.start..).map(|s| s.to_vec()).unwrap_or_default();
        let off = self.start.saturating_sub(self.data.len());
        let p = self.tail.period();
        let mut v: Vec<u8> = (0..p).map(|j| self.tail.symbol(off + j)).collect();
        let q = (1..=p)
            .find(|&q| p % q == 0 && (q..p).all(|j| v[j] == v[j - q]))
            .unwrap_or(p);
        v.truncate(q);
        while let (Some(&a), Some(&b)) = (u.last(), v.last()) {
            if a != b {
                break;
            }
            u.pop();
            v.rotate_right(1);
        }
        (u, v)
    }
}

impl PartialEq for SymbolicWord {
    fn eq(&self, other: &Self) -> bool {
        self.first_difference(other).is_none()
    }
}

impl Eq for SymbolicWord {}

fn digits(s: &[u8]) -> String {
    s.iter().map(|&b| char::from(b'0' + b)).collect()
}

/// Written as `prefix(block)`, for example `0110(01)`.
impl fmt::Display for SymbolicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (u, v) = self.normal_form();
        write!(f, "{}({})", digits(&u), digits(&v))
    }
}

impl fmt::Debug for SymbolicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.prefix_len() > 64 {
            write!(f, "SymbolicWord({}..[{} more] tail period {})", digits(&self.take(32)), self.prefix_len() - 32, self.tail_period())
        } else {
            write!(f, "SymbolicWord({self})")
        }
    }
}

impl FromStr for SymbolicWord {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| -> Result<Vec<u8>, WordError> {
            t.chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(WordError(format!("unexpected character {c:?}"))),
                })
                .collect()
        };
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| WordError("missing '(' before periodic block".into()))?;
        let body = s[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| WordError("missing closing ')'".into()))?;
        Self::with_periodic_tail(parse(&s[..open])?, parse(body)?)
    }
}

impl Serialize for SymbolicWord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SymbolicWord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Number of leading symbols two words must share to be closer than `radius`.
pub fn cylinder_depth(radius: f64) -> usize {
    if radius > 1.0 {
        0
    } else {
        ((-radius.log2()).floor() as i64 + 1).clamp(0, 62) as usize
    }
}

impl StatePoint for SymbolicWord {
    type Key = (Vec<u8>, Vec<u8>);

    fn dedup_key(&self) -> Self::Key {
        self.normal_form()
    }

    fn cell(&self, radius: f64) -> u64 {
        self.cylinder_code(cylinder_depth(radius))
    }

    fn neighbor_cells(&self, radius: f64, out: &mut Vec<u64>) {
        out.push(self.cell(radius));
    }

    fn ultrametric() -> bool {
        true
    }
}

/// The left shift `sigma(x)_i = x_{i+1}` with `d(x, y) = 2^{-min{i : x_i != y_i}}`.
#[derive(Debug, Clone, Default)]
pub struct FullShift<T>(PhantomData<T>);

impl<T: Real> FullShift<T> {
    pub fn new() -> Self {
        Self(PhantomData)
    }
}

impl<T: Real> DynamicalSystem for FullShift<T> {
    type Point = SymbolicWord;
    type Scalar = T;

    fn name(&self) -> &str {
        "full-shift"
    }

    fn apply(&self, p: &SymbolicWord) -> Result<SymbolicWord, SystemError> {
        Ok(p.shifted(1))
    }

    fn distance(&self, a: &SymbolicWord, b: &SymbolicWord) -> T {
        match a.first_difference(b) {
            None => T::zero(),
            Some(i) => T::lit(2.0).powi(-(i.min(i32::MAX as usize) as i32)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> SymbolicWord {
        s.parse().unwrap()
    }

    #[test]
    fn shift_and_symbols() {
        let x = w("011(10)");
        assert_eq!(x.take(9), vec![0, 1, 1, 1, 0, 1, 0, 1, 0]);
        assert_eq!(x.shifted(4).take(3), vec![0, 1, 0]);
        let sh = FullShift::<f64>::new();
        assert_eq!(sh.apply(&x).unwrap(), x.shifted(1));
    }

    #[test]
    fn normal_forms_identify_equal_words() {
        assert_eq!(w("011(10)").normal_form(), (vec![0, 1, 1], vec![1, 0]));
        assert_eq!(w("0101(01)").normal_form(), (vec![], vec![0, 1]));
        assert_eq!(w("0(1010)"), w("01(01)"));
        assert_eq!(w("0(1010)").dedup_key(), w("(01)").dedup_key());
        assert_eq!(w("(0)").dedup_key(), SymbolicWord::constant(0).dedup_key());
        assert_ne!(w("(01)").dedup_key(), w("(10)").dedup_key());
        assert_eq!(w("(01)").shifted(3).dedup_key(), w("(10)").dedup_key());
        assert_eq!(w("1(0)").to_string(), "1(0)");
    }

    #[test]
    fn distances() {
        let sh = FullShift::<f64>::new();
        assert_eq!(sh.distance(&w("(0)"), &w("(1)")), 1.0);
        assert_eq!(sh.distance(&w("0001(0)"), &w("(0)")), 0.125);
        assert_eq!(sh.distance(&w("(01)"), &w("0(10)")), 0.0);
    }

    #[test]
    fn cells_group_close_points() {
        assert_eq!(cylinder_depth(1.0), 1);
        assert_eq!(cylinder_depth(0.25), 3);
        assert_eq!(cylinder_depth(0.3), 2);
        let a = w("0110(0)");
        let b = w("0111(0)");
        assert_eq!(a.cell(0.25), b.cell(0.25));
        assert_ne!(a.cell(0.125), b.cell(0.125));
    }

    #[test]
    fn serde_round_trip() {
        let x = w("0010(011)");
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, "\"0010(011)\"");
        let y: SymbolicWord = serde_json::from_str(&s).unwrap();
        assert_eq!(x, y);
        assert!("012(0)".parse::<SymbolicWord>().is_err());
        assert!("01()".parse::<SymbolicWord>().is_err());
    }

    fn word() -> impl Strategy<Value = SymbolicWord> {
        (prop::collection::vec(0u8..2, 0..12), prop::collection::vec(0u8..2, 1..5), 0usize..6)
            .prop_map(|(u, v, k)| SymbolicWord::with_periodic_tail(u, v).unwrap().shifted(k))
    }

    proptest! {
        #[test]
        fn ultrametric(a in word(), b in word(), c in word()) {
            let sh = FullShift::<f64>::new();
            let ab = sh.distance(&a, &b);
            let bc = sh.distance(&b, &c);
            let ac = sh.distance(&a, &c);
            prop_assert!(ac <= ab.max(bc));
            prop_assert_eq!(ab, sh.distance(&b, &a));
        }

        #[test]
        fn dedup_key_matches_equality(a in word(), b in word()) {
            prop_assert_eq!(a == b, a.dedup_key() == b.dedup_key());
        }

        #[test]
        fn display_round_trips(a in word()) {
            let back: SymbolicWord = a.to_string().parse().unwrap();
            prop_assert_eq!(back.dedup_key(), a.dedup_key());
        }
    }
}
