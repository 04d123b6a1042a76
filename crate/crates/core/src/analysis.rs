//! Weighted measures and norms, the I_α sums, the lower-bound scan, Sobolev and
//! square-function norms, the Calderón–Zygmund decomposition and the multiplier certifiers.
//!
//! Exponents α are in the ‖·‖_p scale throughout; |x|_G^a = ‖x‖_p^{a·dim}.

use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{enumerate_irreps, Dual, Irrep, TensorBasis};
use crate::error::{Error, Result};
use crate::fourier::{apply_multiplier, Fourier, GridFunction, Symbol};
use crate::group::{GroupDescriptor, Quotient};
use crate::operators::{delta_of_transform_direct, delta_with, radial_calculus, RadialProfile};
use crate::padic::{ipow, valuation_mod};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    Full,
    /// ‖(x_1, …, x_κ)‖_p.
    Sub(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub alpha: f64,
    pub kind: WeightKind,
}

/// ∫_{p^k Z_p^D} ‖x‖^α dx = (1 − p^{−D}) p^{−k(α+D)} / (1 − p^{−(α+D)}).
fn ball_integral(p: u64, dim: usize, alpha: f64, k: u32) -> f64 {
    let (p, dim) = (p as f64, dim as f64);
    (1.0 - p.powf(-dim)) * p.powf(-(k as f64) * (alpha + dim)) / (1.0 - p.powf(-(alpha + dim)))
}

impl WeightSpec {
    pub fn full(alpha: f64) -> Self {
        WeightSpec {
            alpha,
            kind: WeightKind::Full,
        }
    }

    pub fn sub(alpha: f64, kappa: usize) -> Self {
        WeightSpec {
            alpha,
            kind: WeightKind::Sub(kappa),
        }
    }

    /// Weight |x|_G^a, i.e. ‖x‖_p^{a·dim}.
    pub fn from_group_scale(a: f64, dim: usize) -> Self {
        WeightSpec::full(a * dim as f64)
    }

    fn coords(&self, g: &GroupDescriptor) -> Result<usize> {
        let k = match self.kind {
            WeightKind::Full => g.dim(),
            WeightKind::Sub(k) => {
                if k == 0 || k > g.dim() {
                    return Err(Error::Domain(format!("kappa={k} outside 1..={}", g.dim())));
                }
                k
            }
        };
        if !self.alpha.is_finite() || self.alpha <= -(k as f64) {
            return Err(Error::Domain(format!(
                "weight exponent {} must exceed -{k} to be integrable at the identity",
                self.alpha
            )));
        }
        Ok(k)
    }

    /// Average of the weight over each G_N-cell, in rank order. Off the identity fibre the
    /// weight is constant on the cell; on it the exact ball integral is used.
    pub fn cell_weights(&self, g: &GroupDescriptor) -> Result<Vec<f64>> {
        let k = self.coords(g)?;
        let n = g.level;
        let p = g.p as f64;
        let centre = ball_integral(g.p, k, self.alpha, n) * p.powi((k as u32 * n) as i32);
        let q = Quotient::new(*g);
        Ok((0..q.len())
            .map(|r| {
                let depth = q.coords(r)[..k].iter().filter_map(|&c| valuation_mod(c, g.p, n)).min();
                match depth {
                    Some(v) => p.powf(-(v as f64) * self.alpha),
                    None => centre,
                }
            })
            .collect())
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::Domain(format!("exponent r = {r} must be finite and at least 1")));
    }
    Ok(())
}

/// (∫ |f|^r w dx)^{1/r} with the weight integrated exactly over each cell.
pub fn weighted_norm(f: &GridFunction, r: f64, w: &WeightSpec) -> Result<f64> {
    check_r(r)?;
    let cw = w.cell_weights(&f.group)?;
    Ok(weighted_norm_with(f, r, &cw))
}

fn weighted_norm_with(f: &GridFunction, r: f64, cw: &[f64]) -> f64 {
    let n = f.values.len() as f64;
    let s: f64 = f.values.iter().zip(cw).map(|(v, w)| v.norm().powf(r) * w).sum();
    (s / n).powf(1.0 / r)
}

/// μ_α(G_k) in closed form.
pub fn mu_alpha_ball(p: u64, dim: usize, alpha: f64, k: u32) -> f64 {
    ball_integral(p, dim, alpha, k)
}

/// Ranks of the G_m-coset of each cell (m = 0 gives a single coset).
fn coset_ranks(q: &Quotient, m: u32) -> Vec<usize> {
    if m == 0 {
        vec![0; q.len()]
    } else {
        q.projection(m)
    }
}

/// μ_w of every coset of G_m, indexed by rank in G/G_m.
pub fn coset_measures(g: &GroupDescriptor, w: &WeightSpec, m: u32) -> Result<Vec<f64>> {
    if m > g.level {
        return Err(Error::Domain(format!("coset level {m} exceeds grid level {}", g.level)));
    }
    let cw = w.cell_weights(g)?;
    let q = Quotient::new(*g);
    let ranks = coset_ranks(&q, m);
    let mut out = vec![0.0; g.order_at(m)];
    let cell = g.cell_measure();
    for (r, &c) in ranks.iter().enumerate() {
        out[c] += cw[r] * cell;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct MuAlphaReport {
    pub alpha: f64,
    /// μ_α(G_k) / |G_k|^{α/dim + 1} over k ≤ N.
    pub ball_ratio_min: f64,
    pub ball_ratio_max: f64,
    /// max over x, k of μ_α(x⋆G_k) / μ_α(x⋆G_{k+1}).
    pub doubling: f64,
    /// μ_α(G_k) / μ_α(G_k ∖ G_{k+1}) over k < N.
    pub shell_ratio_min: f64,
    pub shell_ratio_max: f64,
    /// Largest deviation of the grid value of μ_α(G_k) from the closed form.
    pub closed_form_gap: f64,
}

pub fn mu_alpha_report(g: &GroupDescriptor, alpha: f64) -> Result<MuAlphaReport> {
    let w = WeightSpec::full(alpha);
    let dim = g.dim();
    let p = g.p as f64;
    let levels: Vec<Vec<f64>> = (0..=g.level).map(|m| coset_measures(g, &w, m)).collect::<Result<_>>()?;
    let mut rep = MuAlphaReport {
        alpha,
        ball_ratio_min: f64::INFINITY,
        ball_ratio_max: 0.0,
        doubling: 0.0,
        shell_ratio_min: f64::INFINITY,
        shell_ratio_max: 0.0,
        closed_form_gap: 0.0,
    };
    for k in 0..=g.level {
        let mu = levels[k as usize][0];
        let size = p.powi(-((k as usize * dim) as i32));
        let ratio = mu / size.powf(alpha / dim as f64 + 1.0);
        rep.ball_ratio_min = rep.ball_ratio_min.min(ratio);
        rep.ball_ratio_max = rep.ball_ratio_max.max(ratio);
        rep.closed_form_gap = rep.closed_form_gap.max((mu - mu_alpha_ball(g.p, dim, alpha, k)).abs());
        if k < g.level {
            let inner = levels[k as usize + 1][0];
            let shell = mu - inner;
            rep.shell_ratio_min = rep.shell_ratio_min.min(mu / shell);
            rep.shell_ratio_max = rep.shell_ratio_max.max(mu / shell);
            // Parent of a level-(k+1) coset: reduce the rank digits modulo p^k.
            let fine = g.at_level((k + 1).max(1))?;
            let fq = Quotient::new(fine);
            let parents = coset_ranks(&fq, k);
            for (c, &par) in parents.iter().enumerate() {
                let child = levels[k as usize + 1][c];
                rep.doubling = rep.doubling.max(levels[k as usize][par] / child);
            }
        }
    }
    Ok(rep)
}

/// Per-level sums S_n(x) = Σ_{‖η‖ = p^n} d_η (d_η − Re χ_η(x)), so that
/// I_α(x) = 2 Σ_n p^{−n(α+dim)} S_n(x).
pub struct IAlphaScanner {
    pub group: GroupDescriptor,
    pub n_max: u32,
    irreps: Vec<Irrep>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IAlphaReport {
    pub alpha: f64,
    pub n_max: u32,
    pub partial_sum: f64,
    /// Tail bound from ‖η(x) − I‖²_HS ≤ 4 d_η.
    pub tail_bound: f64,
    /// The same bound with 2 d_η in place of 4 d_η.
    pub tail_bound_2d: f64,
    pub norm_power: f64,
    pub ratio_to_norm: f64,
}

/// 4(1 − p^{−dim}) p^{−α(n+1)} / (1 − p^{−α}).
pub fn i_alpha_tail_bound(p: u64, dim: usize, alpha: f64, n_max: u32) -> f64 {
    let (p, dim) = (p as f64, dim as f64);
    4.0 * (1.0 - p.powf(-dim)) * p.powf(-alpha * (n_max as f64 + 1.0)) / (1.0 - p.powf(-alpha))
}

pub fn i_alpha_from_sums(sums: &[f64], p: u64, dim: usize, alpha: f64) -> f64 {
    let p = p as f64;
    sums.iter()
        .enumerate()
        .map(|(n, s)| 2.0 * p.powf(-(n as f64) * (alpha + dim as f64)) * s)
        .sum()
}

impl IAlphaScanner {
    pub fn new(g: &GroupDescriptor, n_max: u32) -> Result<Self> {
        let group = g.at_level(n_max.max(1))?;
        let irreps = enumerate_irreps(&group, n_max)?;
        Ok(IAlphaScanner { group, n_max, irreps })
    }

    fn reduce(&self, x: &[u64]) -> Vec<u64> {
        let q = self.group.modulus();
        x.iter().map(|&c| c % q).collect()
    }

    pub fn level_sums(&self, x: &[u64]) -> Result<Vec<f64>> {
        Ok(self.level_sums_many(&[self.reduce(x)])?.remove(0))
    }

    /// Level sums at every point of G/G_{xg.level}, in rank order.
    pub fn level_sums_on(&self, xg: &GroupDescriptor) -> Result<Vec<Vec<f64>>> {
        let q = Quotient::new(*xg);
        let xs: Vec<Vec<u64>> = (0..q.len()).map(|r| self.reduce(q.coords(r))).collect();
        self.level_sums_many(&xs)
    }

    fn level_sums_many(&self, xs: &[Vec<u64>]) -> Result<Vec<Vec<f64>>> {
        let evs = self
            .irreps
            .iter()
            .map(|ir| Ok(ir.evaluator(&self.group)?.with_roots()))
            .collect::<Result<Vec<_>>>()?;
        let levels = self.n_max as usize + 1;
        Ok(xs
            .par_iter()
            .map(|x| {
                let mut s = vec![0.0; levels];
                for ev in &evs {
                    let ir = ev.irrep();
                    let d = ir.dim as f64;
                    s[ir.level as usize] += d * (d - ev.character_fast(x).re);
                }
                s
            })
            .collect())
    }

    pub fn report(&self, xg: &GroupDescriptor, x: &[u64], alpha: f64) -> Result<IAlphaReport> {
        check_i_alpha(xg, x, alpha)?;
        let sums = self.level_sums(x)?;
        Ok(self.report_from_sums(xg, x, alpha, &sums))
    }

    pub fn report_from_sums(&self, xg: &GroupDescriptor, x: &[u64], alpha: f64, sums: &[f64]) -> IAlphaReport {
        let (p, dim) = (self.group.p, self.group.dim());
        let partial_sum = i_alpha_from_sums(sums, p, dim, alpha);
        let tail_bound = i_alpha_tail_bound(p, dim, alpha, self.n_max);
        let norm_power = xg.group_norm(x).powf(alpha);
        IAlphaReport {
            alpha,
            n_max: self.n_max,
            partial_sum,
            tail_bound,
            tail_bound_2d: tail_bound / 2.0,
            norm_power,
            ratio_to_norm: partial_sum / norm_power,
        }
    }
}

fn check_i_alpha(xg: &GroupDescriptor, x: &[u64], alpha: f64) -> Result<()> {
    xg.element(x)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("α = {alpha} must be positive")));
    }
    if xg.depth(x).is_none() {
        return Err(Error::Domain("I_α is not defined at the identity".into()));
    }
    Ok(())
}

/// I_α(x) = Σ_{‖η‖ ≤ p^{n_max}} d_η ‖η‖^{−(α+dim)} ‖η(x) − I‖²_HS with its tail bound.
pub fn i_alpha(g: &GroupDescriptor, x: &[u64], alpha: f64, n_max: u32) -> Result<IAlphaReport> {
    check_i_alpha(g, x, alpha)?;
    IAlphaScanner::new(g, n_max)?.report(g, x, alpha)
}

#[derive(Clone, Debug, Serialize)]
pub struct IAlphaScanRow {
    pub alpha: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub argmin: Vec<u64>,
    pub argmax: Vec<u64>,
    pub tail_bound: f64,
}

/// Extremes of I_α(x)/‖x‖^α over every x ≠ e of G/G_N.
pub fn i_alpha_scan(g: &GroupDescriptor, alphas: &[f64], n_max: u32) -> Result<Vec<IAlphaScanRow>> {
    let scanner = IAlphaScanner::new(g, n_max)?;
    let sums = scanner.level_sums_on(g)?;
    let q = Quotient::new(*g);
    alphas
        .iter()
        .map(|&alpha| {
            let mut row = IAlphaScanRow {
                alpha,
                ratio_min: f64::INFINITY,
                ratio_max: 0.0,
                argmin: vec![],
                argmax: vec![],
                tail_bound: i_alpha_tail_bound(g.p, g.dim(), alpha, n_max),
            };
            for (r, s) in sums.iter().enumerate().skip(1) {
                let x = q.coords(r);
                check_i_alpha(g, x, alpha)?;
                let rep = scanner.report_from_sums(g, x, alpha, s);
                if rep.ratio_to_norm < row.ratio_min {
                    row.ratio_min = rep.ratio_to_norm;
                    row.argmin = x.to_vec();
                }
                if rep.ratio_to_norm > row.ratio_max {
                    row.ratio_max = rep.ratio_to_norm;
                    row.argmax = x.to_vec();
                }
            }
            Ok(row)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundViolation {
    pub irrep: String,
    pub x: Vec<u64>,
    pub multiplicity: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct IrrepLowerBound {
    pub irrep: String,
    pub dim: usize,
    /// min over x with π(x) ≠ I of (number of eigenvalues ≠ 1)/d.
    pub min_ratio: f64,
    pub max_one_multiplicity: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    pub group: GroupDescriptor,
    pub level: u32,
    pub irreps_checked: usize,
    pub pairs_checked: u64,
    pub global_c: f64,
    /// Every π(x) ≠ I has the eigenvalue 1 at most once.
    pub claim_holds: bool,
    pub violation_count: u64,
    /// The first violations found, in enumeration order.
    pub violations: Vec<LowerBoundViolation>,
    pub per_irrep: Vec<IrrepLowerBound>,
    /// The ratio 1 − p^{−dim} of the displayed constant, for comparison with `global_c`.
    pub displayed_ratio: f64,
}

const MAX_LISTED_VIOLATIONS: usize = 32;

/// Exhaustive eigenvalue-1 count for every nontrivial irrep of level ≤ n and every x of
/// G/G_{level π}. Multiplicities are exact: phases are integers modulo p^level.
pub fn lower_bound_report(g: &GroupDescriptor, n: u32) -> Result<LowerBoundReport> {
    let top = g.at_level(n.max(1))?;
    let irreps = enumerate_irreps(&top, n)?;
    let quotients: Vec<Quotient> = (1..=n.max(1))
        .map(|m| Ok(Quotient::new(g.at_level(m)?)))
        .collect::<Result<_>>()?;
    let rows: Vec<(IrrepLowerBound, u64, u64, Vec<LowerBoundViolation>)> = irreps
        .par_iter()
        .filter(|ir| !ir.is_trivial())
        .map(|ir| {
            let q = &quotients[ir.level as usize - 1];
            let ev = ir.evaluator(&q.group)?;
            let mut worst = 0usize;
            let mut pairs = 0u64;
            let mut bad = 0u64;
            let mut listed = Vec::new();
            let fibre = q.group.modulus() as usize;
            // Last coordinate is the most significant digit of the rank.
            for r in 0..q.len() / fibre {
                let prefix = q.coords(r);
                ev.eigenvalue_one_fibre(prefix, |t, mult, identity| {
                    if identity {
                        return;
                    }
                    pairs += 1;
                    worst = worst.max(mult);
                    if mult > 1 {
                        bad += 1;
                        if listed.len() < MAX_LISTED_VIOLATIONS {
                            let mut x = prefix.to_vec();
                            *x.last_mut().expect("nonempty") = t;
                            listed.push(LowerBoundViolation {
                                irrep: ir.id(),
                                x,
                                multiplicity: mult,
                                dim: ir.dim,
                            });
                        }
                    }
                });
            }
            let row = IrrepLowerBound {
                irrep: ir.id(),
                dim: ir.dim,
                min_ratio: (ir.dim - worst) as f64 / ir.dim as f64,
                max_one_multiplicity: worst,
            };
            Ok((row, pairs, bad, listed))
        })
        .collect::<Result<_>>()?;
    let mut rep = LowerBoundReport {
        group: *g,
        level: n,
        irreps_checked: rows.len(),
        pairs_checked: 0,
        global_c: 1.0,
        claim_holds: true,
        violation_count: 0,
        violations: vec![],
        per_irrep: vec![],
        displayed_ratio: 1.0 - (g.p as f64).powi(-(g.dim() as i32)),
    };
    for (row, pairs, bad, listed) in rows {
        rep.pairs_checked += pairs;
        rep.violation_count += bad;
        rep.global_c = rep.global_c.min(row.min_ratio);
        for v in listed {
            if rep.violations.len() < MAX_LISTED_VIOLATIONS {
                rep.violations.push(v);
            }
        }
        rep.per_irrep.push(row);
    }
    rep.claim_holds = rep.violation_count == 0;
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct NormEquivReport {
    pub alpha: f64,
    pub n_max: u32,
    /// ‖f‖²_{L²_α}.
    pub lhs: f64,
    /// Σ_η d_η ‖η‖^{−(α+dim)} Σ_ξ d_ξ ‖Δ_η f̂(ξ)‖²_HS over ‖η‖ ≤ p^{n_max}.
    pub rhs: f64,
    /// Bound for the omitted η: ‖f‖²_2 times the I_α tail bound.
    pub tail_bound: f64,
    pub ratio: f64,
    /// Contribution of each sphere of η.
    pub per_level: Vec<f64>,
}

/// Per-η sums d_η Σ_ξ d_ξ ‖Δ_η f̂(ξ)‖²_HS over nontrivial η of level ≤ n_max. The ξ-sum runs
/// over the full dual ball on which Δ_η f̂ can be nonzero, so only the η-sum is truncated.
#[derive(Clone, Debug)]
pub struct DifferenceSums {
    pub group: GroupDescriptor,
    pub n_max: u32,
    /// (level of η, d_η Σ_ξ d_ξ ‖Δ_η f̂(ξ)‖²).
    pub terms: Vec<(u32, f64)>,
    pub l2_squared: f64,
}

pub fn difference_sums(f: &GridFunction, n_max: u32) -> Result<DifferenceSums> {
    let fine = f.lift(f.level.max(n_max))?;
    let g = fine.group;
    let xis = enumerate_irreps(&g, g.level)?;
    let etas: Vec<&Irrep> = xis.iter().filter(|ir| !ir.is_trivial() && ir.level <= n_max).collect();
    let terms = etas
        .par_iter()
        .map(|eta| {
            let mut s = 0.0;
            for xi in &xis {
                s += xi.dim as f64 * delta_of_transform_direct(&fine, eta, xi)?.norm_squared();
            }
            Ok((eta.level, eta.dim as f64 * s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DifferenceSums {
        group: g,
        n_max,
        terms,
        l2_squared: f.lr_norm(2.0).powi(2),
    })
}

/// Compares ‖f‖²_{L²_α} with Σ_η ‖η‖^{−(α+dim)} d_η Σ_ξ d_ξ ‖Δ_η f̂(ξ)‖²_HS.
pub fn norm_equiv_check(f: &GridFunction, alpha: f64, n_max: u32) -> Result<NormEquivReport> {
    check_positive(alpha)?;
    let sums = difference_sums(f, n_max)?;
    norm_equiv_from_sums(f, &sums, alpha)
}

fn check_positive(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("α = {alpha} must be positive")));
    }
    Ok(())
}

pub fn norm_equiv_from_sums(f: &GridFunction, sums: &DifferenceSums, alpha: f64) -> Result<NormEquivReport> {
    check_positive(alpha)?;
    let lhs = weighted_norm(f, 2.0, &WeightSpec::full(alpha))?.powi(2);
    let g = sums.group;
    let dim = g.dim();
    let n_max = sums.n_max;
    let mut per_level = vec![0.0; n_max as usize + 1];
    for &(l, s) in &sums.terms {
        per_level[l as usize] += (g.p as f64).powi(l as i32).powf(-(alpha + dim as f64)) * s;
    }
    let rhs = per_level.iter().sum::<f64>();
    Ok(NormEquivReport {
        alpha,
        n_max,
        lhs,
        rhs,
        tail_bound: sums.l2_squared * i_alpha_tail_bound(g.p, dim, alpha, n_max),
        ratio: rhs / lhs,
        per_level,
    })
}

/// ‖𝔻^β f‖_{L^r}: the multiplier ⟨ξ⟩^β (or ‖ξ‖^β off the trivial sphere when homogeneous).
pub fn sobolev_norm(f: &GridFunction, beta: f64, r: f64, homogeneous: bool) -> Result<f64> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::Domain(format!("r = {r} must lie in (1, ∞)")));
    }
    let p = f.group.p as f64;
    let profile = RadialProfile::from_fn(f.group.p, f.level, |n| {
        let v = if n == 0 && homogeneous { 0.0 } else { p.powf(n as f64 * beta) };
        Complex64::new(v, 0.0)
    });
    let dual = Arc::new(Dual::new(&f.group, f.level)?);
    let sigma = radial_calculus(&profile, &dual)?;
    Ok(apply_multiplier(&sigma, f)?.lr_norm(r))
}

/// Averages of f over the cosets of G_n, as functions on the grid.
fn coset_average(f: &GridFunction, q: &Quotient, n: u32) -> Vec<Complex64> {
    let ranks = coset_ranks(q, n);
    let mut sums = vec![Complex64::new(0.0, 0.0); f.group.order_at(n)];
    for (r, &c) in ranks.iter().enumerate() {
        sums[c] += f.values[r];
    }
    let per = (f.values.len() / sums.len()) as f64;
    ranks.iter().map(|&c| sums[c] / per).collect()
}

/// f_n = Σ_{‖π‖ = p^n} d_π Tr[π(x) f̂(π)] for n = 0..=N, computed as A_n f − A_{n−1} f
/// with A_n the average over G_n-cosets.
pub fn spherical_projections(f: &GridFunction) -> Vec<GridFunction> {
    let q = Quotient::new(f.group);
    let avgs: Vec<Vec<Complex64>> = (0..=f.level).map(|n| coset_average(f, &q, n)).collect();
    (0..=f.level as usize)
        .map(|n| {
            let values = if n == 0 {
                avgs[0].clone()
            } else {
                avgs[n].iter().zip(&avgs[n - 1]).map(|(a, b)| a - b).collect()
            };
            GridFunction { values, ..f.clone() }
        })
        .collect()
}

/// Sf = (Σ_n |f_n|²)^{1/2}.
pub fn square_function(f: &GridFunction) -> GridFunction {
    let parts = spherical_projections(f);
    let values = (0..f.values.len())
        .map(|r| Complex64::new(parts.iter().map(|g| g.values[r].norm_sqr()).sum::<f64>().sqrt(), 0.0))
        .collect();
    GridFunction { values, ..f.clone() }
}

/// ‖Sf‖_{L^r_w} / ‖f‖_{L^r_w}.
pub fn lp_ratio(f: &GridFunction, r: f64, w: &WeightSpec) -> Result<f64> {
    Ok(weighted_norm(&square_function(f), r, w)? / weighted_norm(f, r, w)?)
}

/// σ_s = Σ_n s_n·1_{‖ξ‖ = p^n}.
pub fn rademacher_symbol(dual: &Arc<Dual>, signs: &[f64]) -> Result<Symbol> {
    if signs.len() <= dual.level as usize {
        return Err(Error::Coverage(format!(
            "{} signs for a dual ball of level {}",
            signs.len(),
            dual.level
        )));
    }
    Ok(Symbol::radial(dual.clone(), |ir| Complex64::new(signs[ir.level as usize], 0.0)))
}

#[derive(Clone, Debug, Serialize)]
pub struct CzPiece {
    pub function: GridFunction,
    /// Coset g_j⋆G_{m_j}: representative reduced modulo p^{m_j}, and m_j.
    pub coset: (Vec<u64>, u32),
    pub measure: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CzConstants {
    /// max_j ‖φ_j‖_{L¹_α}.
    pub integrability: f64,
    /// Σ_j ‖φ_j‖_{L¹_α} / ‖φ‖_{L¹_α}.
    pub l1_sum_ratio: f64,
    /// sup |φ_0| / γ.
    pub sup_ratio: f64,
    /// γ Σ_j μ_α(I_j) / ‖φ‖_{L¹_α}; at most 1 by construction.
    pub measure_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CzChecks {
    /// sup |φ − φ_0 − Σ φ_j|.
    pub reconstruction: f64,
    pub disjoint: bool,
    pub supported: bool,
    /// max_j |∫ φ_j|.
    pub max_mean: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CZResult {
    pub phi0: GridFunction,
    pub pieces: Vec<CzPiece>,
    pub gamma: f64,
    pub alpha: f64,
    pub constants: CzConstants,
    pub checks: CzChecks,
}

/// Stopping-time decomposition at height γ: descending from G, the maximal cosets whose
/// μ_α-average of |φ| exceeds γ become the pieces.
pub fn cz_decompose(phi: &GridFunction, gamma: f64, alpha: f64) -> Result<CZResult> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("γ = {gamma} must be positive")));
    }
    let g = phi.group;
    if !(alpha <= 0.0 && alpha > -(g.dim() as f64)) {
        return Err(Error::Domain(format!("α = {alpha} must lie in (-{}, 0]", g.dim())));
    }
    let w = WeightSpec::full(alpha);
    let cw = w.cell_weights(&g)?;
    let q = Quotient::new(g);
    let n = q.len();
    let cell = g.cell_measure();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut cosets: Vec<((Vec<u64>, u32), Vec<usize>, f64)> = Vec::new();
    for m in 0..=g.level {
        let ranks = coset_ranks(&q, m);
        let k = g.order_at(m);
        let mut mu = vec![0.0; k];
        let mut mass = vec![0.0; k];
        let mut blocked = vec![false; k];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for r in 0..n {
            let c = ranks[r];
            if owner[r].is_some() {
                blocked[c] = true;
                continue;
            }
            mu[c] += cw[r] * cell;
            mass[c] += phi.values[r].norm() * cw[r] * cell;
            members[c].push(r);
        }
        for c in 0..k {
            if blocked[c] || members[c].is_empty() || mass[c] <= gamma * mu[c] {
                continue;
            }
            let j = cosets.len();
            for &r in &members[c] {
                owner[r] = Some(j);
            }
            let pm = ipow(g.p, m);
            let rep = q.coords(members[c][0]).iter().map(|&v| v % pm).collect();
            cosets.push(((rep, m), std::mem::take(&mut members[c]), mu[c]));
        }
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut phi0 = phi.values.clone();
    let mut pieces = Vec::with_capacity(cosets.len());
    for (coset, members, measure) in cosets {
        let avg = members.iter().map(|&r| phi.values[r]).sum::<Complex64>() / members.len() as f64;
        let mut values = vec![zero; n];
        for &r in &members {
            values[r] = phi.values[r] - avg;
            phi0[r] = avg;
        }
        pieces.push(CzPiece {
            function: GridFunction { values, ..phi.clone() },
            coset,
            measure,
        });
    }
    let phi0 = GridFunction { values: phi0, ..phi.clone() };
    let total = weighted_norm_with(phi, 1.0, &cw);
    let piece_norms: Vec<f64> = pieces.iter().map(|pc| weighted_norm_with(&pc.function, 1.0, &cw)).collect();
    let ratio = |x: f64| if total > 0.0 { x / total } else { 0.0 };
    let constants = CzConstants {
        integrability: piece_norms.iter().copied().fold(0.0, f64::max),
        l1_sum_ratio: ratio(piece_norms.iter().sum()),
        sup_ratio: phi0.values.iter().map(|v| v.norm()).fold(0.0, f64::max) / gamma,
        measure_ratio: ratio(gamma * pieces.iter().map(|pc| pc.measure).sum::<f64>()),
    };
    // Checks recomputed from the output, independently of the bookkeeping above.
    let mut reconstruction: f64 = 0.0;
    for r in 0..n {
        let s = phi0.values[r] + pieces.iter().map(|pc| pc.function.values[r]).sum::<Complex64>();
        reconstruction = reconstruction.max((s - phi.values[r]).norm());
    }
    let in_coset = |r: usize, (rep, m): &(Vec<u64>, u32)| {
        let pm = ipow(g.p, *m);
        q.coords(r).iter().zip(rep).all(|(&a, &b)| a % pm == b)
    };
    let mut disjoint = true;
    let mut supported = true;
    for r in 0..n {
        let hits = pieces.iter().filter(|pc| in_coset(r, &pc.coset)).count();
        disjoint &= hits <= 1;
        for pc in &pieces {
            if pc.function.values[r] != zero && !in_coset(r, &pc.coset) {
                supported = false;
            }
        }
    }
    let checks = CzChecks {
        reconstruction,
        disjoint,
        supported,
        max_mean: pieces.iter().map(|pc| pc.function.integral().norm()).fold(0.0, f64::max),
    };
    Ok(CZResult {
        phi0,
        pieces,
        gamma,
        alpha,
        constants,
        checks,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionHRow {
    pub k: u32,
    pub l: u32,
    pub n: u32,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorollaryRow {
    pub k: u32,
    pub l: u32,
    /// sup_{y ∈ G_l} (∫_{G∖G_l} |ř_k(x⋆y⁻¹) − ř_k(x)|^t dx)^{1/t}.
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionHReport {
    pub t: f64,
    pub level: u32,
    pub table: Vec<ConditionHRow>,
    pub fitted_b: f64,
    /// `None` when every row is zero or the rows do not determine a slope.
    pub fitted_eps: Option<f64>,
    pub pass: bool,
    pub zero_tol: f64,
    pub max_measured: f64,
    pub all_zero: bool,
    pub corollary: Vec<CorollaryRow>,
    pub corollary_max: f64,
}

/// Tabulates the kernel-smoothness integrals of condition H(t) for the truncations
/// ř_k = F⁻¹[1_{‖ξ‖ ≤ p^k} σ], k ≤ K, with rows (k, l, n) for n < l, and fits
/// M ≤ B |G_n|^{−(ε + 1/t')} |G_l|^ε on log scale.
pub fn condition_h_report(sigma: &Symbol, t: f64, k_level: u32) -> Result<ConditionHReport> {
    if !(t >= 1.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t} must be finite and at least 1")));
    }
    if k_level == 0 {
        return Err(Error::Domain("grid level K must be at least 1".into()));
    }
    if sigma.level() < k_level {
        return Err(Error::Coverage(format!(
            "symbol of level {} does not reach level {k_level}",
            sigma.level()
        )));
    }
    let g = sigma.group().at_level(k_level)?;
    let dual = if sigma.level() == k_level {
        sigma.dual.clone()
    } else {
        Arc::new(Dual::new(&g, k_level)?)
    };
    let engine = Fourier::with_dual(g, dual.clone())?;
    let q = Quotient::new(g);
    let n = q.len();
    let dim = g.dim();
    let depths: Vec<u32> = (0..n).map(|r| g.depth(q.coords(r)).unwrap_or(k_level)).collect();
    let inv_n = 1.0 / n as f64;
    let mut table = Vec::new();
    let mut corollary = Vec::new();
    let mut max_abs: f64 = 0.0;
    for k in 0..=k_level {
        let blocks = dual
            .irreps
            .iter()
            .map(|ir| {
                let b = sigma.get(ir)?;
                Ok(if ir.level <= k { b.clone() } else { b * Complex64::new(0.0, 0.0) })
            })
            .collect::<Result<Vec<_>>>()?;
        let kernel = engine.inverse(&Symbol {
            dual: dual.clone(),
            blocks,
        })?;
        max_abs = max_abs.max(kernel.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
        for l in 1..=k_level {
            let ys: Vec<usize> = (0..n).filter(|&r| depths[r] >= l).collect();
            // Shell integrals for each y, then the sup over y.
            let per_y: Vec<Vec<f64>> = ys
                .par_iter()
                .map(|&yr| {
                    let mut yinv = vec![0u64; dim];
                    g.inv_into(q.coords(yr), &mut yinv);
                    let mut buf = vec![0u64; dim];
                    let mut shells = vec![0.0; l as usize];
                    for xr in 0..n {
                        let dx = depths[xr];
                        if dx >= l {
                            continue;
                        }
                        g.mul_into(q.coords(xr), &yinv, &mut buf);
                        let diff = kernel.values[g.rank(&buf)] - kernel.values[xr];
                        shells[dx as usize] += diff.norm().powf(t) * inv_n;
                    }
                    shells
                })
                .collect();
            for nn in 0..l {
                let measured = per_y
                    .iter()
                    .map(|s| s[nn as usize].powf(1.0 / t))
                    .fold(0.0, f64::max);
                table.push(ConditionHRow {
                    k,
                    l,
                    n: nn,
                    measured,
                    bound: 0.0,
                });
            }
            let value = per_y
                .iter()
                .map(|s| s.iter().sum::<f64>().powf(1.0 / t))
                .fold(0.0, f64::max);
            corollary.push(CorollaryRow { k, l, value });
        }
    }
    let zero_tol = 1e-9 * max_abs.max(f64::MIN_POSITIVE);
    let ln_p = (g.p as f64).ln();
    let inv_tp = 1.0 - 1.0 / t;
    let pts: Vec<(f64, f64)> = table
        .iter()
        .filter(|row| row.measured > zero_tol)
        .map(|row| {
            let y = row.measured.ln() - row.n as f64 * dim as f64 * inv_tp * ln_p;
            let x = -(dim as f64) * (row.l - row.n) as f64 * ln_p;
            (x, y)
        })
        .collect();
    let all_zero = pts.is_empty();
    let fitted_eps = least_squares_slope(&pts);
    let eps = fitted_eps.unwrap_or(0.0);
    let fitted_b = pts.iter().map(|&(x, y)| (y - eps * x).exp()).fold(0.0, f64::max);
    for row in table.iter_mut() {
        row.bound = fitted_b
            * (g.p as f64).powf(row.n as f64 * dim as f64 * inv_tp)
            * (g.p as f64).powf(-eps * dim as f64 * (row.l - row.n) as f64);
    }
    let pass = all_zero || (fitted_b.is_finite() && fitted_eps.is_none_or(|e| e > 0.0));
    let max_measured = table.iter().map(|r| r.measured).fold(0.0, f64::max);
    let corollary_max = corollary.iter().map(|r| r.value).fold(0.0, f64::max);
    Ok(ConditionHReport {
        t,
        level: k_level,
        table,
        fitted_b,
        fitted_eps,
        pass,
        zero_tol,
        max_measured,
        all_zero,
        corollary,
        corollary_max,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-12 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Exponent patterns of the Mikhlin-type hypotheses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MikhlinVariant {
    /// β = decay = (α + dim)/2.
    L2Alpha,
    /// β = decay = α₀ + dim/2.
    Lr,
    /// β = α₀ + dim/2, decay = α₀ + dim(3/2 − 1/t).
    LrAlpha,
    /// β = decay = (α + κ)/2, η restricted to characters of the first κ coordinates.
    Sub1,
    /// β = α₀ + κ/2, decay = α₀ + dim/2.
    Sub2,
    /// β = α₀ + dim/2, decay = α₀ + dim/2 + κ(1/t + 1/2).
    Sub3,
}

impl MikhlinVariant {
    pub const ALL: [MikhlinVariant; 6] = [
        MikhlinVariant::L2Alpha,
        MikhlinVariant::Lr,
        MikhlinVariant::LrAlpha,
        MikhlinVariant::Sub1,
        MikhlinVariant::Sub2,
        MikhlinVariant::Sub3,
    ];

    pub fn is_sub(&self) -> bool {
        matches!(self, MikhlinVariant::Sub1 | MikhlinVariant::Sub2 | MikhlinVariant::Sub3)
    }

    /// (β, decay) for exponent a (α or α₀), homogeneous dimension `dim`, layer dimension κ.
    pub fn exponents(&self, a: f64, dim: usize, kappa: usize, t: f64) -> (f64, f64) {
        let (d, k) = (dim as f64, kappa as f64);
        match self {
            MikhlinVariant::L2Alpha => ((a + d) / 2.0, (a + d) / 2.0),
            MikhlinVariant::Lr => (a + d / 2.0, a + d / 2.0),
            MikhlinVariant::LrAlpha => (a + d / 2.0, a + d * (1.5 - 1.0 / t)),
            MikhlinVariant::Sub1 => ((a + k) / 2.0, (a + k) / 2.0),
            MikhlinVariant::Sub2 => (a + k / 2.0, a + d / 2.0),
            MikhlinVariant::Sub3 => (a + d / 2.0, a + d / 2.0 + k * (1.0 / t + 0.5)),
        }
    }
}

impl FromStr for MikhlinVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "l2alpha" | "l2-alpha" => MikhlinVariant::L2Alpha,
            "lr" => MikhlinVariant::Lr,
            "lralpha" | "lr-alpha" => MikhlinVariant::LrAlpha,
            "sub1" => MikhlinVariant::Sub1,
            "sub2" => MikhlinVariant::Sub2,
            "sub3" => MikhlinVariant::Sub3,
            _ => return Err(Error::Parse(format!("unknown multiplier variant {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MikhlinReport {
    pub variant: MikhlinVariant,
    pub beta: f64,
    pub decay: f64,
    /// max ‖Δ^β_η σ(ξ)‖_op ‖ξ‖^{decay} over ‖η‖ < ‖ξ‖.
    pub constant: f64,
    pub witness: Option<(String, String)>,
    pub pairs: usize,
}

/// Best constant in ‖Δ^β_η σ(ξ)‖_op ≤ C ‖ξ‖^{−decay} over every pair ‖η‖ < ‖ξ‖ of the ball.
pub fn mikhlin_report(sigma: &Symbol, a: f64, variant: MikhlinVariant, t: f64) -> Result<MikhlinReport> {
    let g = sigma.group();
    if variant.is_sub() && g.kind != crate::group::GroupKind::Heisenberg {
        return Err(Error::InvalidGroup(format!("sub-weight variants need a heisenberg group, got {}", g.kind)));
    }
    if !(t > 1.0 && t.is_finite()) && matches!(variant, MikhlinVariant::LrAlpha | MikhlinVariant::Sub3) {
        return Err(Error::Domain(format!("t = {t} must lie in (1, ∞)")));
    }
    let kappa = g.kappa();
    let (beta, decay) = variant.exponents(a, g.dim(), kappa, t);
    if beta < 0.0 {
        return Err(Error::Domain(format!("difference order β = {beta} is negative")));
    }
    let irreps = &sigma.dual.irreps;
    let etas: Vec<&Irrep> = irreps
        .iter()
        .filter(|ir| !ir.is_trivial())
        .filter(|ir| !variant.is_sub() || (ir.dim == 1 && ir.params[kappa..].iter().all(|c| c.is_zero())))
        .collect();
    let pairs: Vec<(&Irrep, &Irrep)> = etas
        .iter()
        .flat_map(|eta| irreps.iter().filter(move |xi| eta.level < xi.level).map(move |xi| (*eta, xi)))
        .collect();
    let results = pairs
        .par_iter()
        .map(|(eta, xi)| {
            let tb = TensorBasis::new(eta, xi)?;
            let r = delta_with(&tb, eta, sigma, xi, beta)?;
            Ok(r.op_norm * xi.dual_norm().powf(decay))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut rep = MikhlinReport {
        variant,
        beta,
        decay,
        constant: 0.0,
        witness: None,
        pairs: pairs.len(),
    };
    for ((eta, xi), c) in pairs.iter().zip(results) {
        if c > rep.constant {
            rep.constant = c;
            rep.witness = Some((eta.id(), xi.id()));
        }
    }
    Ok(rep)
}
