//! Group Fourier transform on G/G_N and Fourier multipliers.
//!
//! Conventions: Haar measure has total mass 1, f̂(π) = ∫ f(x) π(x)* dx,
//! f(x) = Σ d_π Tr[π(x) f̂(π)], (f*g)(x) = ∫ f(y) g(y⁻¹x) dy and (f*g)^ = ĝ·f̂.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{Dual, Irrep};
use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, Quotient};
use crate::padic::RootTable;
use crate::CMat;

/// A function on G constant on cosets of G_N, stored in rank order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub group: GroupDescriptor,
    pub level: u32,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(group: GroupDescriptor, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != group.order() {
            return Err(Error::Mismatch(format!(
                "{} values for a quotient of order {}",
                values.len(),
                group.order()
            )));
        }
        Ok(GridFunction {
            level: group.level,
            group,
            values,
        })
    }

    pub fn constant(group: GroupDescriptor, c: Complex64) -> Self {
        GridFunction {
            level: group.level,
            values: vec![c; group.order()],
            group,
        }
    }

    pub fn from_fn(group: GroupDescriptor, f: impl Fn(&[u64]) -> Complex64) -> Self {
        let q = Quotient::new(group);
        let values = (0..q.len()).map(|r| f(q.coords(r))).collect();
        GridFunction {
            level: group.level,
            group,
            values,
        }
    }

    /// Normalized indicator ε_k = |G/G_k|·1_{G_k}.
    pub fn normalized_indicator(group: GroupDescriptor, k: u32) -> Result<Self> {
        if k > group.level {
            return Err(Error::Domain(format!("indicator level {k} exceeds grid level {}", group.level)));
        }
        let scale = group.order_at(k) as f64;
        Ok(GridFunction::from_fn(group, |x| {
            if group.in_subgroup(x, k) {
                Complex64::new(scale, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    /// Character x ↦ e^{2πi{η·x}} in the coordinates of the grid.
    pub fn character(group: GroupDescriptor, eta: &[crate::padic::DualScalar]) -> Result<Self> {
        if eta.len() != group.dim() {
            return Err(Error::Mismatch("character parameter length".into()));
        }
        if eta.iter().any(|c| c.level() > group.level) {
            return Err(Error::Precision("character level exceeds grid level".into()));
        }
        let q = group.modulus();
        let a: Vec<u64> = eta.iter().map(|c| c.numerator_at(group.level)).collect();
        let roots = RootTable::new(q);
        Ok(GridFunction::from_fn(group, |x| {
            let k = a.iter().zip(x).fold(0u64, |s, (&a, &c)| (s + a * c % q) % q);
            roots.e(k)
        }))
    }

    fn check_same(&self, other: &GridFunction) -> Result<()> {
        if self.group != other.group {
            return Err(Error::Mismatch("grid functions on different groups or levels".into()));
        }
        Ok(())
    }

    /// Haar integral.
    pub fn integral(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    pub fn lr_norm(&self, r: f64) -> f64 {
        let n = self.values.len() as f64;
        (self.values.iter().map(|z| z.norm().powf(r)).sum::<f64>() / n).powf(1.0 / r)
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// x ↦ f(y⋆x).
    pub fn left_translate(&self, y: &[u64]) -> GridFunction {
        let g = self.group;
        let mut buf = vec![0u64; g.dim()];
        let q = Quotient::new(g);
        let values = (0..q.len())
            .map(|r| {
                g.mul_into(y, q.coords(r), &mut buf);
                self.values[g.rank(&buf)]
            })
            .collect();
        GridFunction { values, ..self.clone() }
    }

    /// The same function on a finer grid.
    pub fn lift(&self, level: u32) -> Result<GridFunction> {
        if level < self.level {
            return Err(Error::Domain(format!("cannot lift level {} down to {level}", self.level)));
        }
        let fine = self.group.at_level(level)?;
        let proj = Quotient::new(fine).projection(self.level);
        let values = proj.iter().map(|&r| self.values[r]).collect();
        GridFunction::new(fine, values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grid functions serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: GridFunction = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let g = GroupDescriptor::new(f.group.kind, f.group.p, f.group.d, f.group.level)?;
        if f.level != g.level {
            return Err(Error::Parse(format!("level {} differs from group level {}", f.level, g.level)));
        }
        GridFunction::new(g, f.values)
    }
}

/// A matrix-valued function on the dual ball of some level, one block per irrep.
#[derive(Clone, Debug)]
pub struct Symbol {
    pub dual: Arc<Dual>,
    pub blocks: Vec<CMat>,
}

#[derive(Serialize, Deserialize)]
struct SymbolFile {
    group: GroupDescriptor,
    level: u32,
    entries: BTreeMap<String, Vec<Vec<Complex64>>>,
}

impl Symbol {
    pub fn zeros(dual: Arc<Dual>) -> Self {
        let blocks = dual.irreps.iter().map(|ir| CMat::zeros(ir.dim, ir.dim)).collect();
        Symbol { dual, blocks }
    }

    pub fn identity(dual: Arc<Dual>) -> Self {
        Symbol::from_fn(dual, |ir| CMat::identity(ir.dim, ir.dim))
    }

    pub fn from_fn(dual: Arc<Dual>, f: impl Fn(&Irrep) -> CMat + Sync) -> Self {
        let blocks = dual.irreps.par_iter().map(&f).collect();
        Symbol { dual, blocks }
    }

    pub fn try_from_fn(dual: Arc<Dual>, f: impl Fn(&Irrep) -> Result<CMat> + Sync) -> Result<Self> {
        let blocks = dual.irreps.par_iter().map(&f).collect::<Result<Vec<_>>>()?;
        Ok(Symbol { dual, blocks })
    }

    /// φ(‖π‖_p)·I.
    pub fn radial(dual: Arc<Dual>, phi: impl Fn(&Irrep) -> Complex64 + Sync) -> Self {
        Symbol::from_fn(dual, |ir| CMat::identity(ir.dim, ir.dim) * phi(ir))
    }

    pub fn group(&self) -> GroupDescriptor {
        self.dual.group
    }

    pub fn level(&self) -> u32 {
        self.dual.level
    }

    pub fn get(&self, ir: &Irrep) -> Result<&CMat> {
        self.dual
            .position(ir)
            .map(|i| &self.blocks[i])
            .ok_or_else(|| Error::Coverage(format!("symbol has no entry for {}", ir.id())))
    }

    pub fn get_id(&self, id: &str) -> Result<&CMat> {
        Ok(&self.blocks[self.dual.find_id(id)?])
    }

    fn check_same(&self, other: &Symbol) -> Result<()> {
        if self.dual.irreps.len() != other.dual.irreps.len() || self.dual.group.kind != other.dual.group.kind {
            return Err(Error::Mismatch("symbols on different dual balls".into()));
        }
        Ok(())
    }

    /// Blockwise product σ·τ.
    pub fn compose(&self, other: &Symbol) -> Result<Symbol> {
        self.check_same(other)?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect();
        Ok(Symbol {
            dual: self.dual.clone(),
            blocks,
        })
    }

    pub fn sub(&self, other: &Symbol) -> Result<Symbol> {
        self.check_same(other)?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a - b).collect();
        Ok(Symbol {
            dual: self.dual.clone(),
            blocks,
        })
    }

    /// max over irreps of the HS norm of the blocks.
    pub fn max_block_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let entries = self
            .dual
            .irreps
            .iter()
            .zip(&self.blocks)
            .map(|(ir, b)| {
                let rows = (0..b.nrows()).map(|i| (0..b.ncols()).map(|j| b[(i, j)]).collect()).collect();
                (ir.id(), rows)
            })
            .collect();
        serde_json::to_string(&SymbolFile {
            group: self.dual.group,
            level: self.dual.level,
            entries,
        })
        .expect("symbols serialize")
    }

    pub fn from_json(s: &str) -> Result<Symbol> {
        let file: SymbolFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let g = GroupDescriptor::new(file.group.kind, file.group.p, file.group.d, file.group.level)?;
        let dual = Arc::new(Dual::new(&g, file.level)?);
        let mut blocks: Vec<Option<CMat>> = vec![None; dual.len()];
        for (id, rows) in file.entries {
            let i = dual.find_id(&id)?;
            let d = dual.irreps[i].dim;
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(Error::Parse(format!("entry {id} is not {d}×{d}")));
            }
            blocks[i] = Some(CMat::from_fn(d, d, |a, b| rows[a][b]));
        }
        let blocks = blocks
            .into_iter()
            .zip(&dual.irreps)
            .map(|(b, ir)| b.ok_or_else(|| Error::Coverage(format!("symbol file lacks {}", ir.id()))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Symbol { dual, blocks })
    }
}

struct LevelData {
    group: GroupDescriptor,
    quotient: Quotient,
    /// Rank in G/G_m of each grid point.
    projection: Vec<usize>,
}

/// Transform engine for one grid level N and one dual level n ≤ N.
pub struct Fourier {
    pub group: GroupDescriptor,
    pub dual: Arc<Dual>,
    levels: Vec<LevelData>,
}

impl Fourier {
    pub fn new(group: GroupDescriptor, n: u32) -> Result<Fourier> {
        if n > group.level {
            return Err(Error::Domain(format!(
                "dual level {n} exceeds grid level {}",
                group.level
            )));
        }
        let dual = Arc::new(Dual::new(&group, n)?);
        Fourier::with_dual(group, dual)
    }

    pub fn with_dual(group: GroupDescriptor, dual: Arc<Dual>) -> Result<Fourier> {
        if dual.level > group.level || dual.group.kind != group.kind || dual.group.p != group.p {
            return Err(Error::Mismatch("dual does not fit the grid".into()));
        }
        let full = Quotient::new(group);
        let levels = (0..=dual.level)
            .map(|m| {
                let gm = group.at_level(m.max(1))?;
                Ok(LevelData {
                    group: gm,
                    quotient: Quotient::new(gm),
                    projection: full.projection(m.max(1)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Fourier { group, dual, levels })
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.group != self.group {
            return Err(Error::Mismatch(format!(
                "function on {:?} given to a transform on {:?}",
                f.group, self.group
            )));
        }
        Ok(())
    }

    /// f̂(ξ) = (1/|G/G_N|) Σ_x f(x) π_ξ(x)* for every ξ of the dual ball.
    pub fn forward(&self, f: &GridFunction) -> Result<Symbol> {
        self.check(f)?;
        let inv = 1.0 / f.values.len() as f64;
        // Fibre sums of f over G_m-cosets: a level-m irrep only sees these.
        let averaged: Vec<Vec<Complex64>> = self
            .levels
            .iter()
            .map(|lv| {
                let mut acc = vec![Complex64::new(0.0, 0.0); lv.quotient.len()];
                for (r, &v) in f.values.iter().enumerate() {
                    acc[lv.projection[r]] += v * inv;
                }
                acc
            })
            .collect();
        let blocks = self
            .dual
            .irreps
            .par_iter()
            .map(|ir| {
                let lv = &self.levels[ir.level as usize];
                let ev = ir.evaluator(&lv.group)?.with_roots();
                let mut m = CMat::zeros(ir.dim, ir.dim);
                for (r, &v) in averaged[ir.level as usize].iter().enumerate() {
                    if v == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let x = lv.quotient.coords(r);
                    let base = ev.base(x);
                    for h in 0..ir.dim {
                        let (c, ph) = ev.entry(x, base, h);
                        m[(c, h)] += v * ev.root(ph).conj();
                    }
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Symbol {
            dual: self.dual.clone(),
            blocks,
        })
    }

    /// f(x) = Σ d_ξ Tr[π_ξ(x) σ(ξ)] over the irreps of the symbol.
    pub fn inverse(&self, s: &Symbol) -> Result<GridFunction> {
        if s.dual.group.kind != self.group.kind || s.dual.group.p != self.group.p || s.dual.group.d != self.group.d {
            return Err(Error::Mismatch("symbol from a different group".into()));
        }
        if s.dual.level > self.dual.level {
            return Err(Error::Precision(format!(
                "symbol level {} exceeds transform level {}",
                s.dual.level, self.dual.level
            )));
        }
        let per_level: Vec<Vec<Complex64>> = self
            .levels
            .par_iter()
            .enumerate()
            .map(|(m, lv)| {
                let mut acc = vec![Complex64::new(0.0, 0.0); lv.quotient.len()];
                for (ir, block) in s.dual.irreps.iter().zip(&s.blocks).filter(|(ir, _)| ir.level as usize == m) {
                    let ev = ir.evaluator(&lv.group)?.with_roots();
                    let d = ir.dim as f64;
                    for (r, slot) in acc.iter_mut().enumerate() {
                        let x = lv.quotient.coords(r);
                        let base = ev.base(x);
                        let mut t = Complex64::new(0.0, 0.0);
                        for h in 0..ir.dim {
                            let (c, ph) = ev.entry(x, base, h);
                            t += ev.root(ph) * block[(c, h)];
                        }
                        *slot += t * d;
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        let values = (0..self.group.order())
            .map(|r| {
                self.levels
                    .iter()
                    .zip(&per_level)
                    .map(|(lv, acc)| acc[lv.projection[r]])
                    .sum()
            })
            .collect();
        GridFunction::new(self.group, values)
    }

    /// T_σ f: forward, multiply σ(π)·f̂(π), inverse.
    pub fn apply(&self, sigma: &Symbol, f: &GridFunction) -> Result<GridFunction> {
        let fh = self.forward(f)?;
        let blocks = self
            .dual
            .irreps
            .iter()
            .zip(&fh.blocks)
            .map(|(ir, b)| Ok(sigma.get(ir)? * b))
            .collect::<Result<Vec<_>>>()?;
        self.inverse(&Symbol {
            dual: self.dual.clone(),
            blocks,
        })
    }
}

pub fn forward(f: &GridFunction, n: u32) -> Result<Symbol> {
    Fourier::new(f.group, n)?.forward(f)
}

pub fn inverse(s: &Symbol, level: u32) -> Result<GridFunction> {
    let g = s.group().at_level(level)?;
    Fourier::with_dual(g, s.dual.clone())?.inverse(s)
}

pub fn apply_multiplier(sigma: &Symbol, f: &GridFunction) -> Result<GridFunction> {
    if sigma.level() < f.level {
        return Err(Error::Coverage(format!(
            "symbol of level {} cannot act on a grid of level {}",
            sigma.level(),
            f.level
        )));
    }
    Fourier::new(f.group, f.level)?.apply(sigma, f)
}

#[derive(Clone, Debug, Serialize)]
pub struct PlancherelReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

pub fn plancherel(f: &GridFunction) -> Result<PlancherelReport> {
    let fh = forward(f, f.level)?;
    Ok(plancherel_with(f, &fh))
}

pub fn plancherel_with(f: &GridFunction, fh: &Symbol) -> PlancherelReport {
    let lhs = f.values.iter().map(|z| z.norm_sqr()).sum::<f64>() / f.values.len() as f64;
    let rhs = fh
        .dual
        .irreps
        .iter()
        .zip(&fh.blocks)
        .map(|(ir, b)| ir.dim as f64 * b.norm_squared())
        .sum::<f64>();
    PlancherelReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    }
}

/// (f*g)(x) = (1/|G/G_N|) Σ_y f(y) g(y⁻¹⋆x), by direct summation.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    f.check_same(g)?;
    let grp = f.group;
    let q = Quotient::new(grp);
    let dim = grp.dim();
    let n = q.len();
    let values = (0..n)
        .into_par_iter()
        .map(|xr| {
            let x = q.coords(xr);
            let mut inv = vec![0u64; dim];
            let mut buf = vec![0u64; dim];
            let mut s = Complex64::new(0.0, 0.0);
            for yr in 0..n {
                let fy = f.values[yr];
                if fy == Complex64::new(0.0, 0.0) {
                    continue;
                }
                grp.inv_into(q.coords(yr), &mut inv);
                grp.mul_into(&inv, x, &mut buf);
                s += fy * g.values[grp.rank(&buf)];
            }
            s / n as f64
        })
        .collect();
    GridFunction::new(grp, values)
}

/// f̂(π) for a single irrep.
pub fn transform_at(f: &GridFunction, ir: &Irrep) -> Result<CMat> {
    let g = f.group;
    let ev = ir.evaluator(&g)?.with_roots();
    let q = Quotient::new(g);
    let mut m = CMat::zeros(ir.dim, ir.dim);
    let inv = 1.0 / q.len() as f64;
    for (r, &v) in f.values.iter().enumerate() {
        let x = q.coords(r);
        let base = ev.base(x);
        for h in 0..ir.dim {
            let (c, ph) = ev.entry(x, base, h);
            m[(c, h)] += v * ev.root(ph).conj() * inv;
        }
    }
    Ok(m)
}
