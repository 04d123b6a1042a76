//! Unitary duals of the shipped groups: parametrization, coefficients, characters,
//! tensor-product decomposition and tree export.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, GroupKind, Quotient};
use crate::padic::{inv2, ipow, mulmod, valuation, DualScalar, RootTable};
use crate::CMat;

/// An irreducible unitary representation in its canonical parametrization.
///
/// Nonabelian irreps are realized on functions of u ∈ (Z/p^M)^k with
/// (π(x)φ)(u) = e^{2πi P_x(u)} φ(u + x_1), so each matrix π(x) is monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Irrep {
    pub kind: GroupKind,
    pub p: u64,
    pub d: usize,
    pub params: Vec<DualScalar>,
    /// M: the index set is (Z/p^M)^k.
    pub index_level: u32,
    /// k: number of index coordinates (d for H_d, 1 for the other nonabelian groups).
    pub index_rank: usize,
    pub dim: usize,
    /// Smallest n with π trivial on G_n.
    pub level: u32,
}

fn max_level(params: &[DualScalar]) -> u32 {
    params.iter().map(|c| c.level()).max().unwrap_or(0)
}

fn is_reduced(c: &DualScalar, m: u32) -> bool {
    c.reduce_mod(m) == *c
}

/// Residue of a class modulo p^l as an element of Z/p^l, i.e. p^l·ξ.
fn times_p_power(c: &DualScalar, l: u32) -> u64 {
    c.numerator_at(l.max(c.level())) / ipow(c.p(), l.max(c.level()) - l)
}

/// Inverse of a unit modulo p^l.
fn inv_mod(a: u64, q: u64) -> u64 {
    let (mut t, mut new_t) = (0i128, 1i128);
    let (mut r, mut new_r) = (q as i128, a as i128);
    while new_r != 0 {
        let k = r / new_r;
        (t, new_t) = (new_t, t - k * new_t);
        (r, new_r) = (new_r, r - k * new_r);
    }
    debug_assert_eq!(r, 1, "not a unit");
    t.rem_euclid(q as i128) as u64
}

impl Irrep {
    /// Builds an irrep from a parameter vector, bringing it to canonical form where the
    /// equivalence is explicit (reductions of ξ1, ξ2 for H_d, the ξ3-normalization for B_4).
    pub fn new(g: &GroupDescriptor, params: Vec<DualScalar>) -> Result<Irrep> {
        let dim = g.dim();
        if params.len() != dim {
            return Err(Error::Mismatch(format!(
                "{} parameters for a group of dimension {dim}",
                params.len()
            )));
        }
        if params.iter().any(|c| c.p() != g.p) {
            return Err(Error::Mismatch("parameter prime differs from group prime".into()));
        }
        let p = g.p;
        let mut params = params;
        let (index_level, index_rank) = match g.kind {
            GroupKind::Abelian => (0, 0),
            GroupKind::Heisenberg => {
                let d = g.d;
                let m = params[2 * d].level();
                for c in params[..2 * d].iter_mut() {
                    *c = c.reduce_mod(m);
                }
                (m, d)
            }
            GroupKind::Engel4 => {
                let (l3, l4) = (params[2].level(), params[3].level());
                if !params[2].is_zero() && l3 <= l4 {
                    // Shift u -> u + c with c = -ξ3/ξ4 to clear ξ3.
                    let q = ipow(p, l4);
                    let a3 = params[2].numerator_at(l4);
                    let a4 = params[3].num();
                    let c = mulmod(q - a3 % q, inv_mod(a4, q), q);
                    let half = inv2(q);
                    let shift = params[2]
                        .scale(c)
                        .add(&params[3].scale(mulmod(half, mulmod(c, c, q), q)));
                    params[1] = params[1].add(&shift);
                    params[2] = DualScalar::zero(p);
                }
                if params[2].is_zero() {
                    let m = params[3].level();
                    params[0] = params[0].reduce_mod(m);
                    (m, 1)
                } else {
                    let m = params[2].level();
                    params[0] = params[0].reduce_mod(m);
                    if !is_reduced(&params[1], m) {
                        return Err(Error::Domain(format!(
                            "engel4 parameter ξ2={} is not reduced modulo p^-{m}",
                            params[1]
                        )));
                    }
                    (m, 1)
                }
            }
            GroupKind::G52 => {
                let (l4, l5) = (params[3].level(), params[4].level());
                if params[3].is_zero() && params[4].is_zero() {
                    (0, 0)
                } else if l4 > l5 {
                    params[0] = params[0].reduce_mod(l4);
                    if !is_reduced(&params[1], l4) {
                        return Err(Error::Domain(format!(
                            "g52 parameter ξ2={} is not reduced modulo p^-{l4}",
                            params[1]
                        )));
                    }
                    (l4, 1)
                } else {
                    params[0] = params[0].reduce_mod(l5);
                    if !is_reduced(&params[2], l5) {
                        return Err(Error::Domain(format!(
                            "g52 parameter ξ3={} is not reduced modulo p^-{l5}",
                            params[2]
                        )));
                    }
                    (l5, 1)
                }
            }
        };
        let index_rank = if index_level == 0 { 0 } else { index_rank };
        let dim = ipow(p, index_level * index_rank as u32) as usize;
        Ok(Irrep {
            kind: g.kind,
            p,
            d: g.d,
            level: max_level(&params),
            params,
            index_level,
            index_rank,
            dim,
        })
    }

    pub fn trivial(g: &GroupDescriptor) -> Irrep {
        Irrep::new(g, vec![DualScalar::zero(g.p); g.dim()]).expect("trivial parameters are canonical")
    }

    pub fn is_trivial(&self) -> bool {
        self.params.iter().all(|c| c.is_zero())
    }

    /// ‖π‖_p = p^{level}; the trivial representation has norm 1.
    pub fn dual_norm(&self) -> f64 {
        (self.p as f64).powi(self.level as i32)
    }

    /// Stable identifier "kind:level:params".
    pub fn id(&self) -> String {
        let mut s = format!("{}:{}:", self.kind, self.level);
        for (j, c) in self.params.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            write!(s, "{c}").expect("writing to a String");
        }
        s
    }

    pub fn parse_id(g: &GroupDescriptor, id: &str) -> Result<Irrep> {
        let mut parts = id.splitn(3, ':');
        let kind: GroupKind = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("bad irrep id {id:?}")))?
            .parse()?;
        let _level = parts.next();
        let params = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("bad irrep id {id:?}")))?;
        if kind != g.kind {
            return Err(Error::Mismatch(format!("irrep of {kind} used with {}", g.kind)));
        }
        let params = params
            .split(',')
            .map(|s| DualScalar::parse(g.p, s))
            .collect::<Result<Vec<_>>>()?;
        Irrep::new(g, params)
    }

    /// Exact evaluator of matrix entries on G/G_N for the given descriptor.
    pub fn evaluator(&self, g: &GroupDescriptor) -> Result<Evaluator<'_>> {
        if g.kind != self.kind || g.p != self.p || g.d != self.d {
            return Err(Error::Mismatch(format!("irrep {} used with group {:?}", self.id(), g)));
        }
        if self.level > g.level {
            return Err(Error::Precision(format!(
                "irrep level {} exceeds group level {}",
                self.level, g.level
            )));
        }
        let q = g.modulus();
        Ok(Evaluator {
            irrep: self,
            q,
            a: self.params.iter().map(|c| c.numerator_at(g.level)).collect(),
            pm: ipow(self.p, self.index_level),
            half: inv2(q),
            roots: None,
        })
    }

    /// Dense coefficient matrix π(x).
    pub fn matrix(&self, g: &GroupDescriptor, x: &[u64]) -> Result<CMat> {
        let ev = self.evaluator(g)?;
        let roots = RootTable::new(g.modulus());
        let mut m = CMat::zeros(self.dim, self.dim);
        let base = ev.base(x);
        for h in 0..self.dim {
            let (c, ph) = ev.entry(x, base, h);
            m[(h, c)] = roots.e(ph);
        }
        Ok(m)
    }

    /// Single matrix entry π(x)_{hh'}.
    pub fn coefficient(&self, g: &GroupDescriptor, x: &[u64], h: usize, h2: usize) -> Result<Complex64> {
        if h >= self.dim || h2 >= self.dim {
            return Err(Error::Domain(format!("index out of range for dimension {}", self.dim)));
        }
        let ev = self.evaluator(g)?;
        let (c, ph) = ev.entry(x, ev.base(x), h);
        Ok(if c == h2 {
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * ph as f64 / g.modulus() as f64)
        } else {
            Complex64::new(0.0, 0.0)
        })
    }

    /// Character as the trace of the coefficient matrix.
    pub fn character(&self, g: &GroupDescriptor, x: &[u64]) -> Result<Complex64> {
        let ev = self.evaluator(g)?;
        let roots = RootTable::new(g.modulus());
        Ok(ev.trace(x, &roots))
    }

    /// Closed-form character: Kirillov–Howe for H_d, the indicator formula for G_{5,2},
    /// e^{2πi ξ·x} for characters. `None` for B_4 irreps of dimension > 1.
    pub fn character_closed_form(&self, g: &GroupDescriptor, x: &[u64]) -> Result<Option<Complex64>> {
        let ev = self.evaluator(g)?;
        let q = g.modulus();
        let e = |k: u64| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k % q) as f64 / q as f64);
        let base = ev.base(x);
        if self.dim == 1 {
            return Ok(Some(e(base)));
        }
        let pm = ev.pm;
        Ok(match self.kind {
            GroupKind::Heisenberg => {
                let d = self.d;
                let inside = x[..2 * d].iter().all(|&c| c % pm == 0);
                Some(if inside { e(base) * self.dim as f64 } else { Complex64::new(0.0, 0.0) })
            }
            GroupKind::G52 => {
                let c = (mulmod(ev.a[3], x[1], q) + mulmod(ev.a[4], x[2], q)) % q;
                Some(if x[0].is_multiple_of(pm) && c == 0 {
                    e(base) * self.dim as f64
                } else {
                    Complex64::new(0.0, 0.0)
                })
            }
            _ => None,
        })
    }
}

/// Fast exact evaluation of the monomial matrices of one irrep on G/G_N.
pub struct Evaluator<'a> {
    irrep: &'a Irrep,
    q: u64,
    a: Vec<u64>,
    pm: u64,
    half: u64,
    roots: Option<RootTable>,
}

impl<'a> Evaluator<'a> {
    pub fn irrep(&self) -> &Irrep {
        self.irrep
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn with_roots(mut self) -> Self {
        self.roots = Some(RootTable::new(self.q));
        self
    }

    /// The x-only part Σ a_j x_j of the phase numerator.
    #[inline]
    pub fn base(&self, x: &[u64]) -> u64 {
        let q = self.q;
        self.a
            .iter()
            .zip(x)
            .fold(0u64, |acc, (&a, &c)| (acc + mulmod(a, c, q)) % q)
    }

    /// Column and phase numerator (over q) of the nonzero entry in row `h` of π(x).
    #[inline]
    pub fn entry(&self, x: &[u64], base: u64, h: usize) -> (usize, u64) {
        let ir = self.irrep;
        if ir.index_level == 0 {
            return (0, base);
        }
        let q = self.q;
        let pm = self.pm;
        match ir.kind {
            GroupKind::Heisenberg => {
                let d = ir.d;
                let mut rest = h as u64;
                let mut col = 0u64;
                let mut stride = 1u64;
                let mut dot = 0u64;
                for j in 0..d {
                    let u = rest % pm;
                    rest /= pm;
                    col += ((u + x[j] % pm) % pm) * stride;
                    stride *= pm;
                    dot = (dot + mulmod(x[d + j], u, q)) % q;
                }
                (col as usize, (base + mulmod(self.a[2 * d], dot, q)) % q)
            }
            GroupKind::Engel4 => {
                let u = h as u64;
                let col = ((u + x[0] % pm) % pm) as usize;
                let t3 = mulmod(self.a[2], mulmod(u, x[1], q), q);
                let quad = mulmod(self.half, mulmod(mulmod(u, u, q), x[1], q), q);
                let t4 = mulmod(self.a[3], (mulmod(u, x[2], q) + quad) % q, q);
                (col, (base + t3 + t4) % q)
            }
            GroupKind::G52 => {
                let u = h as u64;
                let col = ((u + x[0] % pm) % pm) as usize;
                let c = (mulmod(self.a[3], x[1], q) + mulmod(self.a[4], x[2], q)) % q;
                (col, (base + mulmod(c, u, q)) % q)
            }
            GroupKind::Abelian => (0, base),
        }
    }

    #[inline]
    pub fn root(&self, k: u64) -> Complex64 {
        match &self.roots {
            Some(t) => t.e(k),
            None => Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k % self.q) as f64 / self.q as f64),
        }
    }

    pub fn trace(&self, x: &[u64], roots: &RootTable) -> Complex64 {
        let base = self.base(x);
        let mut s = Complex64::new(0.0, 0.0);
        for h in 0..self.irrep.dim {
            let (c, ph) = self.entry(x, base, h);
            if c == h {
                s += roots.e(ph);
            }
        }
        s
    }

    /// Integer phase numerators of the diagonal, for exact eigenvalue bookkeeping.
    pub fn rows(&self, x: &[u64]) -> Vec<(usize, u64)> {
        let base = self.base(x);
        (0..self.irrep.dim).map(|h| self.entry(x, base, h)).collect()
    }

    /// χ(x) without building the matrix: closed forms where available, the diagonal otherwise.
    pub fn character_fast(&self, x: &[u64]) -> Complex64 {
        let ir = self.irrep;
        let base = self.base(x);
        if ir.dim == 1 {
            return self.root(base);
        }
        let (q, pm) = (self.q, self.pm);
        let zero = Complex64::new(0.0, 0.0);
        match ir.kind {
            GroupKind::Heisenberg => {
                if x[..2 * ir.d].iter().all(|&c| c % pm == 0) {
                    self.root(base) * ir.dim as f64
                } else {
                    zero
                }
            }
            GroupKind::G52 => {
                let c = (mulmod(self.a[3], x[1], q) + mulmod(self.a[4], x[2], q)) % q;
                if x[0].is_multiple_of(pm) && c == 0 {
                    self.root(base) * ir.dim as f64
                } else {
                    zero
                }
            }
            _ => {
                if !x[0].is_multiple_of(pm) {
                    return zero;
                }
                (0..ir.dim).map(|h| self.root(self.entry(x, base, h).1)).sum()
            }
        }
    }

    /// Phase numerator P(u) = B + A·u + C·u² (mod q) of row u, for one-index realizations.
    fn phase_polynomial(&self, x: &[u64]) -> (u64, u64, u64) {
        let q = self.q;
        let a = &self.a;
        let base = self.base(x);
        match self.irrep.kind {
            GroupKind::Heisenberg => (base, mulmod(a[2], x[1], q), 0),
            GroupKind::Engel4 => (
                base,
                (mulmod(a[2], x[1], q) + mulmod(a[3], x[2], q)) % q,
                mulmod(a[3], mulmod(self.half, x[1], q), q),
            ),
            GroupKind::G52 => (base, (mulmod(a[3], x[1], q) + mulmod(a[4], x[2], q)) % q, 0),
            GroupKind::Abelian => (base, 0, 0),
        }
    }

    /// For one-index realizations: the cycle length L of π(x) and, for each cycle, the phase
    /// sum without its L·B part. Independent of the last (central) coordinate of x.
    fn cycle_residues(&self, x: &[u64]) -> (u64, Vec<u64>) {
        let ir = self.irrep;
        let (q, pm) = (self.q, self.pm);
        let x1 = x[0] % pm;
        let (_, a, c) = self.phase_polynomial(x);
        let v = valuation(x1, ir.p).map_or(ir.index_level, |v| v.min(ir.index_level));
        let cycles = ipow(ir.p, v);
        let len = pm / cycles;
        // Σ_{t<L} (u0 + t x1)^k for k = 1, 2 by Faulhaber, reduced mod q (q < 2^32).
        let l = len as u128;
        let t1 = ((l * (l - 1) / 2) % q as u128) as u64;
        let t2 = (((l - 1) * l * (2 * l - 1) / 6) % q as u128) as u64;
        let lq = len % q;
        let (x1t1, x1x1t2) = (x1 * t1 % q, x1 * x1 % q * t2 % q);
        let res = (0..cycles)
            .map(|u0| {
                let s1 = (lq * u0 + x1t1) % q;
                let s2 = (lq * (u0 * u0 % q) % q + 2 * u0 % q * x1t1 % q + x1x1t2) % q;
                (a * s1 % q + c * s2 % q) % q
            })
            .collect();
        (len, res)
    }

    /// Multiplicity of the eigenvalue 1 of π(x), and whether π(x) = I.
    ///
    /// π(x) is monomial: each cycle of its permutation contributes the eigenvalue 1
    /// exactly once when the phases along the cycle sum to 0 mod q, and never otherwise.
    pub fn eigenvalue_one_multiplicity(&self, x: &[u64]) -> (usize, bool) {
        let ir = self.irrep;
        let q = self.q;
        if ir.dim == 1 {
            let one = self.base(x) == 0;
            return (one as usize, one);
        }
        if ir.index_rank == 1 {
            let (len, res) = self.cycle_residues(x);
            let b = self.base(x);
            let target = (q - len % q * b % q) % q;
            let count = res.iter().filter(|&&r| r == target).count();
            let identity = len == 1 && b == 0 && res.iter().all(|&r| r == 0);
            return (count, identity);
        }
        let rows = self.rows(x);
        let identity = rows.iter().enumerate().all(|(h, &(c, ph))| c == h && ph == 0);
        let mut seen = vec![false; ir.dim];
        let mut count = 0;
        for start in 0..ir.dim {
            if seen[start] {
                continue;
            }
            let mut h = start;
            let mut sum = 0u64;
            while !seen[h] {
                seen[h] = true;
                sum = (sum + rows[h].1) % q;
                h = rows[h].0;
            }
            if sum == 0 {
                count += 1;
            }
        }
        (count, identity)
    }

    /// Calls `f(t, multiplicity, identity)` for x = prefix + t·e_last, t = 0..q. The last
    /// coordinate is central and only shifts the phase by a constant, which makes this much
    /// cheaper than evaluating each point.
    pub fn eigenvalue_one_fibre(&self, prefix: &[u64], mut f: impl FnMut(u64, usize, bool)) {
        let ir = self.irrep;
        let q = self.q;
        let last = prefix.len() - 1;
        let mut x = prefix.to_vec();
        x[last] = 0;
        if ir.index_rank > 1 {
            for t in 0..q {
                x[last] = t;
                let (m, id) = self.eigenvalue_one_multiplicity(&x);
                f(t, m, id);
            }
            return;
        }
        let (len, mut res) = if ir.dim == 1 { (1, vec![0]) } else { self.cycle_residues(&x) };
        let flat = res.iter().all(|&r| r == 0);
        res.sort_unstable();
        let step = self.a[last] % q;
        let lq = len % q;
        let mut b = self.base(&x);
        for t in 0..q {
            let target = (q - lq * b % q) % q;
            let lo = res.partition_point(|&r| r < target);
            let hi = res.partition_point(|&r| r <= target);
            f(t, hi - lo, len == 1 && flat && b == 0);
            b += step;
            if b >= q {
                b -= q;
            }
        }
    }
}

// Parameter ranges used by the enumeration, as numerators over p^level.
fn all_at(p: u64, n: u32) -> Vec<DualScalar> {
    (0..ipow(p, n)).map(|a| DualScalar::reduced(a, n, p)).collect()
}

fn reduced_at(p: u64, n: u32, m: u32) -> Vec<DualScalar> {
    if m >= n {
        return vec![DualScalar::zero(p)];
    }
    (0..ipow(p, n - m)).map(|a| DualScalar::reduced(a, n, p)).collect()
}

fn exact_level(p: u64, m: u32) -> Vec<DualScalar> {
    if m == 0 {
        return vec![DualScalar::zero(p)];
    }
    (1..ipow(p, m))
        .filter(|a| a % p != 0)
        .map(|a| DualScalar::reduced(a, m, p))
        .collect()
}

fn below_level(p: u64, m: u32) -> Vec<DualScalar> {
    if m == 0 {
        return vec![];
    }
    all_at(p, m - 1)
}

fn product(factors: &[Vec<DualScalar>]) -> Vec<Vec<DualScalar>> {
    let mut out = vec![Vec::with_capacity(factors.len())];
    for f in factors {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for prefix in &out {
            for c in f {
                let mut v = prefix.clone();
                v.push(*c);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// All irreps trivial on G_n, ordered by level.
pub fn enumerate_irreps(g: &GroupDescriptor, n: u32) -> Result<Vec<Irrep>> {
    if n > g.level {
        return Err(Error::Domain(format!("dual level {n} exceeds group level {}", g.level)));
    }
    let p = g.p;
    let mut raw: Vec<Vec<DualScalar>> = Vec::new();
    match g.kind {
        GroupKind::Abelian => {
            raw = product(&vec![all_at(p, n); g.d]);
        }
        GroupKind::Heisenberg => {
            let d = g.d;
            for m in 0..=n {
                let mut factors = vec![reduced_at(p, n, m); 2 * d];
                factors.push(exact_level(p, m));
                raw.extend(product(&factors));
            }
        }
        GroupKind::Engel4 => {
            for m4 in 0..=n {
                raw.extend(product(&[
                    reduced_at(p, n, m4),
                    all_at(p, n),
                    vec![DualScalar::zero(p)],
                    exact_level(p, m4),
                ]));
            }
            for m3 in 1..=n {
                raw.extend(product(&[
                    reduced_at(p, n, m3),
                    reduced_at(p, n, m3),
                    exact_level(p, m3),
                    below_level(p, m3),
                ]));
            }
        }
        GroupKind::G52 => {
            raw.extend(product(&[
                all_at(p, n),
                all_at(p, n),
                all_at(p, n),
                vec![DualScalar::zero(p)],
                vec![DualScalar::zero(p)],
            ]));
            for m4 in 1..=n {
                raw.extend(product(&[
                    reduced_at(p, n, m4),
                    reduced_at(p, n, m4),
                    all_at(p, n),
                    exact_level(p, m4),
                    below_level(p, m4),
                ]));
            }
            for m5 in 1..=n {
                raw.extend(product(&[
                    reduced_at(p, n, m5),
                    all_at(p, n),
                    reduced_at(p, n, m5),
                    all_at(p, m5),
                    exact_level(p, m5),
                ]));
            }
        }
    }
    let mut irreps = raw
        .into_iter()
        .map(|params| Irrep::new(g, params))
        .collect::<Result<Vec<_>>>()?;
    irreps.sort_by_key(|ir| ir.level);
    Ok(irreps)
}

/// Frozen table of the irreps of level ≤ n.
#[derive(Clone, Debug)]
pub struct Dual {
    pub group: GroupDescriptor,
    pub level: u32,
    pub irreps: Vec<Irrep>,
    index: HashMap<Irrep, usize>,
}

impl Dual {
    pub fn new(g: &GroupDescriptor, n: u32) -> Result<Dual> {
        let irreps = enumerate_irreps(g, n)?;
        let index = irreps.iter().enumerate().map(|(i, ir)| (ir.clone(), i)).collect();
        Ok(Dual {
            group: *g,
            level: n,
            irreps,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.irreps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.irreps.is_empty()
    }

    pub fn position(&self, ir: &Irrep) -> Option<usize> {
        self.index.get(ir).copied()
    }

    pub fn find_id(&self, id: &str) -> Result<usize> {
        let ir = Irrep::parse_id(&self.group, id)?;
        self.position(&ir)
            .ok_or_else(|| Error::Coverage(format!("irrep {id} not in the dual ball of level {}", self.level)))
    }

    /// Irreps with ‖π‖_p = p^m.
    pub fn sphere(&self, m: u32) -> impl Iterator<Item = (usize, &Irrep)> {
        self.irreps.iter().enumerate().filter(move |(_, ir)| ir.level == m)
    }

    pub fn dimension_sum_sq(&self) -> u64 {
        self.irreps.iter().map(|ir| (ir.dim * ir.dim) as u64).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepDecomposition {
    /// Components with multiplicities, sorted by (dual norm, id).
    pub components: Vec<(Irrep, usize)>,
}

impl RepDecomposition {
    fn sorted(mut components: Vec<(Irrep, usize)>) -> Self {
        components.sort_by_key(|a| (a.0.level, a.0.id()));
        RepDecomposition { components }
    }

    pub fn total_dim(&self) -> usize {
        self.components.iter().map(|(ir, m)| ir.dim * m).sum()
    }
}

fn check_same_group(eta: &Irrep, xi: &Irrep) -> Result<()> {
    if eta.kind != xi.kind || eta.p != xi.p || eta.d != xi.d {
        return Err(Error::Mismatch("tensor product of irreps from different groups".into()));
    }
    Ok(())
}

/// Descriptor just large enough for both irreps.
fn pair_group(eta: &Irrep, xi: &Irrep) -> Result<GroupDescriptor> {
    GroupDescriptor::new(eta.kind, eta.p, eta.d, eta.level.max(xi.level).max(1))
}

/// Closed-form decomposition (⊠) for H_d and the abelian groups.
pub fn boxtimes(eta: &Irrep, xi: &Irrep) -> Result<RepDecomposition> {
    check_same_group(eta, xi)?;
    let g = pair_group(eta, xi)?;
    let sum: Vec<DualScalar> = eta.params.iter().zip(&xi.params).map(|(a, b)| a.add(b)).collect();
    match g.kind {
        GroupKind::Abelian => Ok(RepDecomposition::sorted(vec![(Irrep::new(&g, sum)?, 1)])),
        GroupKind::Heisenberg => {
            let d = g.d;
            let (me, mx) = (eta.params[2 * d].level(), xi.params[2 * d].level());
            let top = me.max(mx);
            let s3 = sum[2 * d];
            if s3.level() == top {
                let mult = ipow(g.p, me.min(mx) * d as u32) as usize;
                return Ok(RepDecomposition::sorted(vec![(Irrep::new(&g, sum)?, mult)]));
            }
            // |ξ3 + η3| < |ξ3| = |η3|: shifts γ ∈ (p^{-top}Z/Z)^{2d} modulo p^{-level(ξ3+η3)}.
            let ms = s3.level();
            let mult = ipow(g.p, ms * d as u32) as usize;
            let shifts = product(&vec![reduced_at(g.p, top, ms); 2 * d]);
            let mut comps: HashMap<Irrep, usize> = HashMap::new();
            for gamma in shifts {
                let mut params: Vec<DualScalar> =
                    sum[..2 * d].iter().zip(&gamma).map(|(a, b)| a.add(b)).collect();
                params.push(s3);
                *comps.entry(Irrep::new(&g, params)?).or_insert(0) += mult;
            }
            Ok(RepDecomposition::sorted(comps.into_iter().collect()))
        }
        _ => Err(Error::Domain(format!("no closed-form tensor law for {}", g.kind))),
    }
}

/// Decomposition by character inner products over G/G_L, L = max level.
pub fn tensor_decompose_oracle(eta: &Irrep, xi: &Irrep) -> Result<RepDecomposition> {
    check_same_group(eta, xi)?;
    let g = pair_group(eta, xi)?;
    let quotient = Quotient::new(g);
    let roots = RootTable::new(g.modulus());
    let ev_e = eta.evaluator(&g)?;
    let ev_x = xi.evaluator(&g)?;
    let prod: Vec<Complex64> = (0..quotient.len())
        .map(|r| {
            let x = quotient.coords(r);
            ev_e.trace(x, &roots) * ev_x.trace(x, &roots)
        })
        .collect();
    let total = eta.dim * xi.dim;
    let inv = 1.0 / quotient.len() as f64;
    let mut comps = Vec::new();
    let mut found = 0usize;
    for tau in enumerate_irreps(&g, g.level)? {
        if tau.dim > total {
            continue;
        }
        let ev = tau.evaluator(&g)?;
        let mut s = Complex64::new(0.0, 0.0);
        for (r, &v) in prod.iter().enumerate() {
            s += v * ev.trace(quotient.coords(r), &roots).conj();
        }
        let m = s * inv;
        let k = m.re.round();
        if (m - Complex64::new(k, 0.0)).norm() > 1e-6 {
            return Err(Error::NonInteger(format!("⟨χ_η χ_ξ, χ_{}⟩ = {m}", tau.id())));
        }
        if k >= 1.0 {
            found += k as usize * tau.dim;
            comps.push((tau, k as usize));
        }
    }
    if found != total {
        return Err(Error::NonInteger(format!(
            "decomposition accounts for dimension {found} of {total}"
        )));
    }
    Ok(RepDecomposition::sorted(comps))
}

/// ⊠ where a closed form exists, the character oracle otherwise.
pub fn tensor_decompose(eta: &Irrep, xi: &Irrep) -> Result<RepDecomposition> {
    match eta.kind {
        GroupKind::Abelian | GroupKind::Heisenberg => boxtimes(eta, xi),
        _ => tensor_decompose_oracle(eta, xi),
    }
}

/// Orthonormal change of basis U with U* (η⊗ξ)(x) U = ⊕ components, in canonical order.
#[derive(Clone, Debug)]
pub struct TensorBasis {
    pub decomposition: RepDecomposition,
    pub u: CMat,
}

impl TensorBasis {
    pub fn new(eta: &Irrep, xi: &Irrep) -> Result<TensorBasis> {
        let decomposition = tensor_decompose(eta, xi)?;
        let g = pair_group(eta, xi)?;
        let quotient = Quotient::new(g);
        let roots = RootTable::new(g.modulus());
        let ev_e = eta.evaluator(&g)?;
        let ev_x = xi.evaluator(&g)?;
        let (de, dx) = (eta.dim, xi.dim);
        let big = de * dx;
        // Monomial rows of the Kronecker product, cached for every x.
        let rows: Vec<Vec<(usize, u64)>> = (0..quotient.len())
            .map(|r| {
                let x = quotient.coords(r);
                let re = ev_e.rows(x);
                let rx = ev_x.rows(x);
                let mut out = Vec::with_capacity(big);
                for &(ce, pe) in &re {
                    for &(cx, px) in &rx {
                        out.push((ce * dx + cx, (pe + px) % g.modulus()));
                    }
                }
                out
            })
            .collect();
        let apply = |r: usize, v: &[Complex64], out: &mut [Complex64], scale: Complex64| {
            for (i, &(c, ph)) in rows[r].iter().enumerate() {
                out[i] += scale * roots.e(ph) * v[c];
            }
        };
        let inv_order = 1.0 / quotient.len() as f64;
        let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(big);
        for (tau, mult) in &decomposition.components {
            let ev = tau.evaluator(&g)?;
            let dt = tau.dim;
            let w = dt as f64 * inv_order;
            // P_00 = (d/|G|) Σ conj(τ(x)_{00}) ρ(x): projector onto first vectors of each copy.
            let mut p00 = CMat::zeros(big, big);
            for r in 0..quotient.len() {
                let x = quotient.coords(r);
                let (c, ph) = ev.entry(x, ev.base(x), 0);
                if c != 0 {
                    continue;
                }
                let s = roots.e(ph).conj() * w;
                for (i, &(cc, rph)) in rows[r].iter().enumerate() {
                    p00[(i, cc)] += s * roots.e(rph);
                }
            }
            let firsts = orthonormal_range(&p00, *mult)?;
            for v in &firsts {
                // e_a = P_{a0} v with P_{a0} = (d/|G|) Σ conj(τ(x)_{a0}) ρ(x).
                let mut block = vec![vec![Complex64::new(0.0, 0.0); big]; dt];
                for r in 0..quotient.len() {
                    let x = quotient.coords(r);
                    let base = ev.base(x);
                    // Row a of τ(x) has its nonzero in column 0 exactly when a + x1 ≡ 0.
                    for a in 0..dt {
                        let (c, ph) = ev.entry(x, base, a);
                        if c == 0 {
                            apply(r, v, &mut block[a], roots.e(ph).conj() * w);
                            break;
                        }
                    }
                }
                columns.extend(block);
            }
        }
        // P_{a0}v is orthonormal only up to accumulated rounding; two MGS passes restore it.
        for _ in 0..2 {
            for j in 0..columns.len() {
                let (done, rest) = columns.split_at_mut(j);
                let col = &mut rest[0];
                for prev in done.iter() {
                    let dot: Complex64 = prev.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
                    for (c, pv) in col.iter_mut().zip(prev) {
                        *c -= dot * pv;
                    }
                }
                let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                for c in col.iter_mut() {
                    *c /= norm;
                }
            }
        }
        let mut u = CMat::zeros(big, big);
        for (j, col) in columns.iter().enumerate() {
            for (i, &z) in col.iter().enumerate() {
                u[(i, j)] = z;
            }
        }
        Ok(TensorBasis { decomposition, u })
    }
}

/// Orthonormal basis of the range of a projector of known rank (Gram–Schmidt with pivoting).
fn orthonormal_range(p: &CMat, rank: usize) -> Result<Vec<Vec<Complex64>>> {
    let n = p.nrows();
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(rank);
    let mut cols: Vec<Vec<Complex64>> = (0..n).map(|j| p.column(j).iter().copied().collect()).collect();
    while basis.len() < rank {
        let (j, norm) = cols
            .iter()
            .enumerate()
            .map(|(j, c)| (j, c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::NonInteger("empty projector".into()))?;
        if norm < 1e-8 {
            return Err(Error::NonInteger(format!(
                "projector rank {} below expected multiplicity {rank}",
                basis.len()
            )));
        }
        let v: Vec<Complex64> = cols[j].iter().map(|z| z / norm).collect();
        for c in cols.iter_mut() {
            let dot: Complex64 = v.iter().zip(c.iter()).map(|(a, b)| a.conj() * b).sum();
            for (ci, vi) in c.iter_mut().zip(&v) {
                *ci -= dot * vi;
            }
        }
        basis.push(v);
    }
    Ok(basis)
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeNode {
    pub id: String,
    pub params: Vec<String>,
    pub dim: usize,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub edges: Vec<(String, String)>,
}

/// Drops the finest digit of every parameter: the partial sum P_{n-1}.
fn truncate_params(params: &[DualScalar], n: u32) -> Vec<DualScalar> {
    params
        .iter()
        .map(|c| {
            if c.level() < n {
                *c
            } else {
                DualScalar::reduced(times_p_power(c, n) / c.p(), n - 1, c.p())
            }
        })
        .collect()
}

/// The dual ball of level n as a tree, each node hanging below its truncation.
pub fn export_tree(g: &GroupDescriptor, n: u32) -> Result<Tree> {
    if n == 0 {
        return Err(Error::Domain("tree export needs n >= 1".into()));
    }
    let g = g.at_level(n.max(g.level))?;
    let irreps = enumerate_irreps(&g, n)?;
    let known: HashMap<Vec<DualScalar>, String> =
        irreps.iter().map(|ir| (ir.params.clone(), ir.id())).collect();
    let mut edges = Vec::new();
    for ir in irreps.iter().filter(|ir| !ir.is_trivial()) {
        let mut params = ir.params.clone();
        let mut level = ir.level;
        let parent = loop {
            params = truncate_params(&params, level);
            level -= 1;
            if let Some(id) = known.get(&params) {
                break id.clone();
            }
            if let Ok(cand) = Irrep::new(&g, params.clone()) {
                if let Some(id) = known.get(&cand.params) {
                    break id.clone();
                }
            }
        };
        edges.push((parent, ir.id()));
    }
    let nodes = irreps
        .iter()
        .map(|ir| TreeNode {
            id: ir.id(),
            params: ir.params.iter().map(|c| c.to_string()).collect(),
            dim: ir.dim,
            norm: ir.dual_norm(),
        })
        .collect();
    Ok(Tree { nodes, edges })
}

impl Tree {
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph dual {\n");
        let label: HashMap<&str, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
        for (i, node) in self.nodes.iter().enumerate() {
            writeln!(
                s,
                "  n{i} [label=\"({}) | {} | {}\"];",
                node.params.join(", "),
                node.dim,
                node.norm
            )
            .expect("writing to a String");
        }
        for (a, b) in &self.edges {
            writeln!(s, "  n{} -> n{};", label[a.as_str()], label[b.as_str()]).expect("writing to a String");
        }
        s.push_str("}\n");
        s
    }
}
