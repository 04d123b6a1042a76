//! Truncated p-adic integers, the discrete group Q_p/Z_p and exact roots of unity.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut k = 2;
    while k * k <= p {
        if p.is_multiple_of(k) {
            return false;
        }
        k += 1;
    }
    true
}

pub fn check_prime(p: u64) -> Result<()> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(Error::NotPrime(p))
    }
}

/// `p^k`, panicking on overflow (all moduli in this crate are far below `u64::MAX`).
pub fn ipow(p: u64, k: u32) -> u64 {
    p.checked_pow(k).expect("p^k overflows u64")
}

/// p-adic valuation of a nonzero integer; `None` for zero.
pub fn valuation(v: u64, p: u64) -> Option<u32> {
    if v == 0 {
        return None;
    }
    let mut m = v;
    let mut k = 0;
    while m.is_multiple_of(p) {
        m /= p;
        k += 1;
    }
    Some(k)
}

/// Valuation of a residue modulo `p^precision`, capped: `None` when the residue is zero.
pub fn valuation_mod(v: u64, p: u64, precision: u32) -> Option<u32> {
    let q = ipow(p, precision);
    valuation(v % q, p)
}

/// `|v|_p` for a residue modulo `p^precision` (zero residues have norm 0).
pub fn abs_p(v: u64, p: u64, precision: u32) -> f64 {
    match valuation_mod(v, p, precision) {
        None => 0.0,
        Some(k) => (p as f64).powi(-(k as i32)),
    }
}

#[inline]
pub fn mulmod(a: u64, b: u64, q: u64) -> u64 {
    if (a | b) >> 32 == 0 {
        a * b % q
    } else {
        ((a as u128 * b as u128) % q as u128) as u64
    }
}

/// Inverse of 2 modulo an odd modulus.
pub fn inv2(q: u64) -> u64 {
    debug_assert!(q % 2 == 1);
    q.div_ceil(2)
}

/// Element of Z_p known modulo p^N, stored with its digits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PadicInt {
    p: u64,
    precision: u32,
    value: u64,
}

impl PadicInt {
    pub fn new(p: u64, precision: u32, value: u64) -> Result<Self> {
        check_prime(p)?;
        if precision == 0 {
            return Err(Error::Domain("precision must be at least 1".into()));
        }
        let q = p
            .checked_pow(precision)
            .ok_or_else(|| Error::Domain("p^N too large".into()))?;
        Ok(PadicInt {
            p,
            precision,
            value: value % q,
        })
    }

    pub fn from_digits(p: u64, digits: &[u64]) -> Result<Self> {
        if let Some(bad) = digits.iter().find(|&&a| a >= p) {
            return Err(Error::Parse(format!("digit {bad} out of range for p={p}")));
        }
        let value = digits.iter().rev().fold(0u64, |acc, &a| acc * p + a);
        PadicInt::new(p, digits.len() as u32, value)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        ipow(self.p, self.precision)
    }

    /// Base-p digits a_0..a_{N-1}.
    pub fn digits(&self) -> Vec<u64> {
        let mut v = self.value;
        (0..self.precision)
            .map(|_| {
                let a = v % self.p;
                v /= self.p;
                a
            })
            .collect()
    }

    pub fn valuation(&self) -> Option<u32> {
        valuation(self.value, self.p)
    }

    pub fn norm(&self) -> f64 {
        abs_p(self.value, self.p, self.precision)
    }

    fn same_context(&self, other: &Self) -> Result<()> {
        if self.p != other.p || self.precision != other.precision {
            return Err(Error::Mismatch(format!(
                "p-adic contexts differ: (p={}, N={}) vs (p={}, N={})",
                self.p, self.precision, other.p, other.precision
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_context(other)?;
        let q = self.modulus();
        Ok(PadicInt {
            value: (self.value + other.value) % q,
            ..*self
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_context(other)?;
        Ok(PadicInt {
            value: mulmod(self.value, other.value, self.modulus()),
            ..*self
        })
    }

    pub fn neg(&self) -> Self {
        let q = self.modulus();
        PadicInt {
            value: (q - self.value) % q,
            ..*self
        }
    }

    /// Least significant digit first, e.g. 5 = 2 + 1·3 at N=3 is "210".
    pub fn to_digit_string(&self) -> String {
        self.digits()
            .iter()
            .map(|&a| std::char::from_digit(a as u32, 36).expect("p <= 36 for digit strings"))
            .collect()
    }

    pub fn parse_digits(p: u64, s: &str) -> Result<Self> {
        let digits = s
            .chars()
            .map(|c| {
                c.to_digit(36)
                    .map(u64::from)
                    .ok_or_else(|| Error::Parse(format!("bad digit {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if digits.is_empty() {
            return Err(Error::Parse("empty digit string".into()));
        }
        PadicInt::from_digits(p, &digits)
    }
}

/// A class num/p^level in Q_p/Z_p, always in reduced form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DualScalar {
    p: u64,
    num: u64,
    level: u32,
}

impl DualScalar {
    pub fn canonical(num: u64, level: u32, p: u64) -> Result<Self> {
        check_prime(p)?;
        let q = p
            .checked_pow(level)
            .ok_or_else(|| Error::Domain("p^level too large".into()))?;
        let mut num = num % q;
        let mut level = level;
        if num == 0 {
            return Ok(DualScalar::zero(p));
        }
        while num.is_multiple_of(p) {
            num /= p;
            level -= 1;
        }
        Ok(DualScalar { p, num, level })
    }

    /// Builds without the primality check; callers guarantee `p` prime.
    pub(crate) fn reduced(num: u64, level: u32, p: u64) -> Self {
        let mut num = num % ipow(p, level);
        let mut level = level;
        if num == 0 {
            return DualScalar::zero(p);
        }
        while num.is_multiple_of(p) {
            num /= p;
            level -= 1;
        }
        DualScalar { p, num, level }
    }

    pub fn zero(p: u64) -> Self {
        DualScalar { p, num: 0, level: 0 }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// p^level; the zero class gets norm 1.
    pub fn norm(&self) -> f64 {
        (self.p as f64).powi(self.level as i32)
    }

    /// Numerator over p^l for any l >= level.
    pub fn numerator_at(&self, l: u32) -> u64 {
        assert!(l >= self.level, "numerator_at below the class level");
        self.num * ipow(self.p, l - self.level)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.p, other.p);
        let l = self.level.max(other.level);
        DualScalar::reduced(self.numerator_at(l) + other.numerator_at(l), l, self.p)
    }

    pub fn neg(&self) -> Self {
        if self.is_zero() {
            return *self;
        }
        DualScalar {
            num: ipow(self.p, self.level) - self.num,
            ..*self
        }
    }

    pub fn scale(&self, k: u64) -> Self {
        DualScalar::reduced(mulmod(self.num, k, ipow(self.p, self.level)), self.level, self.p)
    }

    /// Canonical representative of the class modulo p^{-m}Z_p.
    pub fn reduce_mod(&self, m: u32) -> Self {
        if self.level <= m {
            return DualScalar::zero(self.p);
        }
        DualScalar::reduced(self.num % ipow(self.p, self.level - m), self.level, self.p)
    }

    pub fn parse(p: u64, s: &str) -> Result<Self> {
        let s = s.trim();
        let (a, b) = match s.split_once('/') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s, "1"),
        };
        let num: u64 = a.parse().map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let den: u64 = b.parse().map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        let level = match den {
            1 => 0,
            _ => {
                let k = valuation(den, p).unwrap_or(0);
                if ipow(p, k) != den {
                    return Err(Error::Parse(format!("denominator {den} is not a power of {p}")));
                }
                k
            }
        };
        DualScalar::canonical(num, level, p)
    }
}

impl fmt::Display for DualScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, ipow(self.p, self.level))
    }
}

impl PartialOrd for DualScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DualScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.level, self.num).cmp(&(other.level, other.num))
    }
}

/// e^{2πi num/p^level}, kept exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RootOfUnity {
    pub p: u64,
    pub num: u64,
    pub level: u32,
}

impl RootOfUnity {
    pub fn new(p: u64, num: u64, level: u32) -> Self {
        let q = ipow(p, level);
        RootOfUnity { p, num: num % q, level }
    }

    pub fn is_one(&self) -> bool {
        self.num == 0
    }

    /// The exact order p^m of the root (1 for the trivial root).
    pub fn order_level(&self) -> u32 {
        DualScalar::reduced(self.num, self.level, self.p).level()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let l = self.level.max(other.level);
        let a = self.num * ipow(self.p, l - self.level);
        let b = other.num * ipow(self.p, l - other.level);
        RootOfUnity::new(self.p, a + b, l)
    }

    pub fn to_complex(&self) -> Complex64 {
        let q = ipow(self.p, self.level) as f64;
        Complex64::from_polar(1.0, 2.0 * PI * self.num as f64 / q)
    }
}

/// Precomputed e^{2πik/q} for k < q.
#[derive(Clone, Debug)]
pub struct RootTable {
    q: u64,
    table: Vec<Complex64>,
}

impl RootTable {
    pub fn new(q: u64) -> Self {
        let table = (0..q)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / q as f64;
                Complex64::new(t.cos(), t.sin())
            })
            .collect();
        RootTable { q, table }
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn e(&self, k: u64) -> Complex64 {
        self.table[(k % self.q) as usize]
    }
}

/// The phase e^{2πi{ξ·x}_p} computed exactly.
pub fn pairing(xi: &[DualScalar], x: &[PadicInt]) -> Result<RootOfUnity> {
    if xi.len() != x.len() {
        return Err(Error::Mismatch(format!(
            "pairing of {} dual components with {} coordinates",
            xi.len(),
            x.len()
        )));
    }
    let p = match (xi.first(), x.first()) {
        (Some(a), _) => a.p(),
        (None, _) => return Err(Error::Domain("empty pairing".into())),
    };
    let m = xi.iter().map(|c| c.level()).max().unwrap_or(0);
    let q = ipow(p, m);
    let mut acc = 0u64;
    for (c, xj) in xi.iter().zip(x) {
        if c.p() != p || xj.p() != p {
            return Err(Error::Mismatch("mixed primes in pairing".into()));
        }
        if xj.precision() < c.level() {
            return Err(Error::Precision(format!(
                "coordinate known mod p^{} but dual component has level {}",
                xj.precision(),
                c.level()
            )));
        }
        acc = (acc + mulmod(c.numerator_at(m), xj.value() % q, q)) % q;
    }
    Ok(RootOfUnity::new(p, acc, m))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Checks |ω − 1| ≥ 4/p^m for a nontrivial root ω of exact order p^m.
pub fn root_bound(root: RootOfUnity) -> Result<PhaseBoundReport> {
    if root.is_one() {
        return Err(Error::Domain("the pairing is trivial".into()));
    }
    let m = root.order_level();
    let lhs = (root.to_complex() - 1.0).norm();
    let rhs = 4.0 / (root.p as f64).powi(m as i32);
    Ok(PhaseBoundReport {
        lhs,
        rhs,
        pass: lhs >= rhs,
    })
}

pub fn phase_lower_bound_check(xi: &[DualScalar], x: &[PadicInt]) -> Result<PhaseBoundReport> {
    root_bound(pairing(xi, x)?)
}
