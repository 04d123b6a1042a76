//! The four coordinate-realized compact groups and their finite quotients G/G_N.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{abs_p, check_prime, inv2, ipow, mulmod, valuation_mod, PadicInt};

/// Largest modulus p^N accepted, so that products of two residues fit in a u64.
const MAX_MODULUS: u64 = 1 << 31;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Abelian,
    Heisenberg,
    Engel4,
    G52,
}

impl GroupKind {
    pub fn name(&self) -> &'static str {
        match self {
            GroupKind::Abelian => "abelian",
            GroupKind::Heisenberg => "heisenberg",
            GroupKind::Engel4 => "engel4",
            GroupKind::G52 => "g52",
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abelian" | "zp" => Ok(GroupKind::Abelian),
            "heisenberg" | "h" => Ok(GroupKind::Heisenberg),
            "engel4" | "engel" | "b4" => Ok(GroupKind::Engel4),
            "g52" | "g5,2" => Ok(GroupKind::G52),
            other => Err(Error::InvalidGroup(format!("unknown group kind {other:?}"))),
        }
    }
}

/// A point of G/G_N: `dim` residues modulo p^N.
///
/// Coordinate order is (x1, x2, x3) with x1, x2 in Z_p^d for the Heisenberg group,
/// (x1..x4) for the Engel group and (x1..x5) for G_{5,2}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement(pub Vec<u64>);

impl Deref for GroupElement {
    type Target = [u64];

    fn deref(&self) -> &[u64] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupDescriptor {
    pub kind: GroupKind,
    pub p: u64,
    pub d: usize,
    pub level: u32,
}

impl GroupDescriptor {
    pub fn new(kind: GroupKind, p: u64, d: usize, level: u32) -> Result<Self> {
        check_prime(p)?;
        if level == 0 {
            return Err(Error::InvalidGroup("level must be at least 1".into()));
        }
        let d = match kind {
            GroupKind::Engel4 => 4,
            GroupKind::G52 => 5,
            _ => d,
        };
        if d == 0 {
            return Err(Error::InvalidGroup("d must be at least 1".into()));
        }
        let min_p = match kind {
            GroupKind::Abelian => 2,
            GroupKind::Heisenberg | GroupKind::G52 => 3,
            GroupKind::Engel4 => 5,
        };
        if p < min_p {
            return Err(Error::InvalidGroup(format!(
                "{kind} needs p larger than its nilpotency class (p >= {min_p}), got p={p}"
            )));
        }
        match p.checked_pow(level) {
            Some(q) if q <= MAX_MODULUS => {}
            _ => return Err(Error::InvalidGroup(format!("p^level too large for p={p}, level={level}"))),
        }
        Ok(GroupDescriptor { kind, p, d, level })
    }

    pub fn abelian(p: u64, d: usize, level: u32) -> Result<Self> {
        Self::new(GroupKind::Abelian, p, d, level)
    }

    pub fn heisenberg(p: u64, d: usize, level: u32) -> Result<Self> {
        Self::new(GroupKind::Heisenberg, p, d, level)
    }

    pub fn engel4(p: u64, level: u32) -> Result<Self> {
        Self::new(GroupKind::Engel4, p, 4, level)
    }

    pub fn g52(p: u64, level: u32) -> Result<Self> {
        Self::new(GroupKind::G52, p, 5, level)
    }

    /// Same group at another truncation level.
    pub fn at_level(&self, level: u32) -> Result<Self> {
        Self::new(self.kind, self.p, self.d, level)
    }

    /// Topological dimension.
    pub fn dim(&self) -> usize {
        match self.kind {
            GroupKind::Abelian => self.d,
            GroupKind::Heisenberg => 2 * self.d + 1,
            GroupKind::Engel4 => 4,
            GroupKind::G52 => 5,
        }
    }

    /// Dimension of the generating layer g/[g,g].
    pub fn kappa(&self) -> usize {
        match self.kind {
            GroupKind::Abelian => self.d,
            GroupKind::Heisenberg => 2 * self.d,
            GroupKind::Engel4 => 2,
            GroupKind::G52 => 3,
        }
    }

    /// p^N.
    pub fn modulus(&self) -> u64 {
        ipow(self.p, self.level)
    }

    /// |G/G_N| = p^{dim·N}.
    pub fn order(&self) -> usize {
        let e = self.dim() as u32 * self.level;
        usize::try_from(self.p.checked_pow(e).expect("quotient order overflows u64"))
            .expect("quotient order overflows usize")
    }

    /// |G/G_n| for n <= N.
    pub fn order_at(&self, n: u32) -> usize {
        ipow(self.p, self.dim() as u32 * n) as usize
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(vec![0; self.dim()])
    }

    pub fn element(&self, coords: &[u64]) -> Result<GroupElement> {
        if coords.len() != self.dim() {
            return Err(Error::Mismatch(format!(
                "{} coordinates for a group of dimension {}",
                coords.len(),
                self.dim()
            )));
        }
        let q = self.modulus();
        Ok(GroupElement(coords.iter().map(|&c| c % q).collect()))
    }

    pub fn to_padic(&self, x: &[u64]) -> Vec<PadicInt> {
        x.iter()
            .map(|&c| PadicInt::new(self.p, self.level, c).expect("descriptor is valid"))
            .collect()
    }

    pub fn from_padic(&self, coords: &[PadicInt]) -> Result<GroupElement> {
        if coords.iter().any(|c| c.p() != self.p || c.precision() != self.level) {
            return Err(Error::Mismatch("coordinate precision differs from the group level".into()));
        }
        self.element(&coords.iter().map(|c| c.value()).collect::<Vec<_>>())
    }

    fn check(&self, x: &[u64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Mismatch(format!(
                "element has {} coordinates, group dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Group law, written into `out` (no allocation).
    pub fn mul_into(&self, x: &[u64], y: &[u64], out: &mut [u64]) {
        let q = self.modulus();
        let add = |a: u64, b: u64| (a + b) % q;
        let mul = |a: u64, b: u64| mulmod(a, b, q);
        match self.kind {
            GroupKind::Abelian => {
                for j in 0..self.d {
                    out[j] = add(x[j], y[j]);
                }
            }
            GroupKind::Heisenberg => {
                let d = self.d;
                let mut cross = 0;
                for j in 0..d {
                    cross = add(cross, mul(x[j], y[d + j]));
                }
                for j in 0..2 * d {
                    out[j] = add(x[j], y[j]);
                }
                out[2 * d] = add(add(x[2 * d], y[2 * d]), cross);
            }
            GroupKind::Engel4 => {
                let half = inv2(q);
                let x1sq = mul(x[0], x[0]);
                let t4 = add(mul(x[0], y[2]), mul(half, mul(x1sq, y[1])));
                out[0] = add(x[0], y[0]);
                out[1] = add(x[1], y[1]);
                out[2] = add(add(x[2], y[2]), mul(x[0], y[1]));
                out[3] = add(add(x[3], y[3]), t4);
            }
            GroupKind::G52 => {
                out[0] = add(x[0], y[0]);
                out[1] = add(x[1], y[1]);
                out[2] = add(x[2], y[2]);
                out[3] = add(add(x[3], y[3]), mul(x[0], y[1]));
                out[4] = add(add(x[4], y[4]), mul(x[0], y[2]));
            }
        }
    }

    pub fn multiply(&self, x: &[u64], y: &[u64]) -> Result<GroupElement> {
        self.check(x)?;
        self.check(y)?;
        let mut out = vec![0; self.dim()];
        self.mul_into(x, y, &mut out);
        Ok(GroupElement(out))
    }

    pub fn inv_into(&self, x: &[u64], out: &mut [u64]) {
        let q = self.modulus();
        let neg = |a: u64| (q - a % q) % q;
        let add = |a: u64, b: u64| (a + b) % q;
        let mul = |a: u64, b: u64| mulmod(a, b, q);
        match self.kind {
            GroupKind::Abelian => {
                for j in 0..self.d {
                    out[j] = neg(x[j]);
                }
            }
            GroupKind::Heisenberg => {
                let d = self.d;
                let mut dot = 0;
                for j in 0..d {
                    dot = add(dot, mul(x[j], x[d + j]));
                }
                for j in 0..2 * d {
                    out[j] = neg(x[j]);
                }
                out[2 * d] = add(neg(x[2 * d]), dot);
            }
            GroupKind::Engel4 => {
                let half = inv2(q);
                let x1sq = mul(x[0], x[0]);
                out[0] = neg(x[0]);
                out[1] = neg(x[1]);
                out[2] = add(neg(x[2]), mul(x[0], x[1]));
                out[3] = add(add(neg(x[3]), mul(x[0], x[2])), neg(mul(half, mul(x1sq, x[1]))));
            }
            GroupKind::G52 => {
                out[0] = neg(x[0]);
                out[1] = neg(x[1]);
                out[2] = neg(x[2]);
                out[3] = add(neg(x[3]), mul(x[0], x[1]));
                out[4] = add(neg(x[4]), mul(x[0], x[2]));
            }
        }
    }

    pub fn inverse(&self, x: &[u64]) -> Result<GroupElement> {
        self.check(x)?;
        let mut out = vec![0; self.dim()];
        self.inv_into(x, &mut out);
        Ok(GroupElement(out))
    }

    /// Largest n <= N with x in G_n; `None` for the identity of G/G_N.
    pub fn depth(&self, x: &[u64]) -> Option<u32> {
        x.iter()
            .filter_map(|&c| valuation_mod(c, self.p, self.level))
            .min()
    }

    pub fn in_subgroup(&self, x: &[u64], n: u32) -> bool {
        let m = ipow(self.p, n.min(self.level));
        x.iter().all(|&c| c % m == 0)
    }

    /// ‖x‖_p = max_j |x_j|_p, identity ↦ 0.
    pub fn group_norm(&self, x: &[u64]) -> f64 {
        x.iter()
            .map(|&c| abs_p(c, self.p, self.level))
            .fold(0.0, f64::max)
    }

    /// |x|_G = ‖x‖_p^dim.
    pub fn vilenkin_norm(&self, x: &[u64]) -> f64 {
        self.group_norm(x).powi(self.dim() as i32)
    }

    /// ‖(x_1, …, x_κ)‖_p over the first κ coordinates.
    pub fn sub_norm(&self, x: &[u64], kappa: usize) -> Result<f64> {
        if kappa == 0 || kappa > self.dim() {
            return Err(Error::Domain(format!("kappa={kappa} outside 1..={}", self.dim())));
        }
        Ok(x[..kappa]
            .iter()
            .map(|&c| abs_p(c, self.p, self.level))
            .fold(0.0, f64::max))
    }

    /// Mixed-radix rank, coordinate 0 least significant.
    pub fn rank(&self, x: &[u64]) -> usize {
        let q = self.modulus();
        x.iter().rev().fold(0u64, |acc, &c| acc * q + c % q) as usize
    }

    pub fn unrank(&self, r: usize) -> GroupElement {
        let mut out = vec![0; self.dim()];
        self.unrank_into(r, &mut out);
        GroupElement(out)
    }

    pub fn unrank_into(&self, r: usize, out: &mut [u64]) {
        let q = self.modulus();
        let mut r = r as u64;
        for c in out.iter_mut() {
            *c = r % q;
            r /= q;
        }
    }

    /// All elements of G/G_N in rank order.
    pub fn elements(&self) -> impl Iterator<Item = GroupElement> + '_ {
        (0..self.order()).map(move |r| self.unrank(r))
    }

    /// Cell measure 1/|G/G_N| of the normalized Haar measure.
    pub fn cell_measure(&self) -> f64 {
        1.0 / self.order() as f64
    }
}

/// Flat table of all coordinates of G/G_N, with rank helpers used by the transforms.
#[derive(Clone, Debug)]
pub struct Quotient {
    pub group: GroupDescriptor,
    coords: Vec<u64>,
}

impl Quotient {
    pub fn new(group: GroupDescriptor) -> Self {
        let dim = group.dim();
        let n = group.order();
        let mut coords = vec![0; n * dim];
        for r in 0..n {
            group.unrank_into(r, &mut coords[r * dim..(r + 1) * dim]);
        }
        Quotient { group, coords }
    }

    pub fn len(&self) -> usize {
        self.group.order()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn coords(&self, r: usize) -> &[u64] {
        let dim = self.group.dim();
        &self.coords[r * dim..(r + 1) * dim]
    }

    /// Rank of the image of each element in G/G_m.
    pub fn projection(&self, m: u32) -> Vec<usize> {
        let coarse = self.group.at_level(m).expect("coarser level is valid");
        let qm = coarse.modulus();
        (0..self.len())
            .map(|r| {
                self.coords(r)
                    .iter()
                    .rev()
                    .fold(0u64, |acc, &c| acc * qm + c % qm) as usize
            })
            .collect()
    }

    /// Table of ranks of x ⋆ y^{-1}, indexed [x * |G| + y].
    pub fn right_division_table(&self) -> Vec<u32> {
        let g = &self.group;
        let n = self.len();
        let dim = g.dim();
        let mut inv = vec![0u64; n * dim];
        for r in 0..n {
            g.inv_into(self.coords(r), &mut inv[r * dim..(r + 1) * dim]);
        }
        let mut out = vec![0u32; n * n];
        let mut buf = vec![0u64; dim];
        for x in 0..n {
            for y in 0..n {
                g.mul_into(self.coords(x), &inv[y * dim..(y + 1) * dim], &mut buf);
                out[x * n + y] = g.rank(&buf) as u32;
            }
        }
        out
    }
}
