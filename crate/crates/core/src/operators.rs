//! Symbols of the Vladimirov–Taibleson family, radial calculus and difference operators.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dual::{Dual, Irrep, TensorBasis};
use crate::error::{Error, Result};
use crate::fourier::{inverse, transform_at, Fourier, GridFunction, Symbol};
use crate::group::{GroupDescriptor, GroupKind, Quotient};
use crate::padic::{inv2, ipow, valuation, DualScalar, RootTable};
use crate::CMat;

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn check_alpha(alpha: f64, dim: usize) -> Result<()> {
    if !alpha.is_finite() {
        return Err(Error::Domain(format!("α = {alpha} is not finite")));
    }
    if alpha == 0.0 {
        return Err(Error::Pole("α = 0 makes the normalizing constant vanish".into()));
    }
    if (alpha + dim as f64).abs() < 1e-15 {
        return Err(Error::Pole(format!("α = -{dim} is a pole of the normalizing constant")));
    }
    Ok(())
}

/// Zero-order constant (1 − p^{−dim})/(1 − p^{−(α+dim)}) of the VT operator on a
/// group of homogeneous dimension `dim`.
pub fn vt_zero_order(p: u64, dim: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha, dim)?;
    let (p, dim) = (p as f64, dim as f64);
    Ok((1.0 - p.powf(-dim)) / (1.0 - p.powf(-(alpha + dim))))
}

/// Kernel constant (1 − p^α)/(1 − p^{−(α+dim)}).
pub fn vt_kernel_constant(p: u64, dim: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha, dim)?;
    let (p, dim) = (p as f64, dim as f64);
    Ok((1.0 - p.powf(alpha)) / (1.0 - p.powf(-(alpha + dim))))
}

/// Symbol of 𝔻^α: ‖ξ‖^α·I off the trivial representation, the zero-order constant on it.
pub fn vt_symbol(dual: &Arc<Dual>, alpha: f64) -> Result<Symbol> {
    let g = dual.group;
    let c0 = vt_zero_order(g.p, g.dim(), alpha)?;
    Ok(Symbol::radial(dual.clone(), |ir| {
        if ir.is_trivial() {
            real(c0)
        } else {
            real(ir.dual_norm().powf(alpha))
        }
    }))
}

/// Symbol of D^α = 𝔻^α minus its zero-order term.
pub fn vt_raw_symbol(dual: &Arc<Dual>, alpha: f64) -> Result<Symbol> {
    let g = dual.group;
    let c0 = vt_zero_order(g.p, g.dim(), alpha)?;
    Ok(Symbol::radial(dual.clone(), |ir| {
        if ir.is_trivial() {
            real(0.0)
        } else {
            real(ir.dual_norm().powf(alpha) - c0)
        }
    }))
}

/// 𝔻^α f evaluated from the hypersingular integral: the zero-order term plus
/// c·Σ_{y ∉ G_N} ‖y‖^{−(α+dim)} (f(x⋆y⁻¹) − f(x)) |G/G_N|⁻¹. The cell of the identity
/// contributes nothing since f is constant on G_N-cosets.
pub fn vt_apply_direct(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    let g = f.group;
    let dim = g.dim();
    let c0 = vt_zero_order(g.p, dim, alpha)?;
    let c = vt_kernel_constant(g.p, dim, alpha)?;
    let q = Quotient::new(g);
    let n = q.len();
    let inv_n = 1.0 / n as f64;
    let mut inverses = vec![0u64; n * dim];
    let mut weights = vec![0.0; n];
    for r in 0..n {
        let y = q.coords(r);
        g.inv_into(y, &mut inverses[r * dim..(r + 1) * dim]);
        if let Some(k) = g.depth(y) {
            weights[r] = (g.p as f64).powf(k as f64 * (alpha + dim as f64)) * inv_n;
        }
    }
    let values = (0..n)
        .into_par_iter()
        .map(|xr| {
            let x = q.coords(xr);
            let fx = f.values[xr];
            let mut buf = vec![0u64; dim];
            let mut s = Complex64::new(0.0, 0.0);
            for yr in 1..n {
                g.mul_into(x, &inverses[yr * dim..(yr + 1) * dim], &mut buf);
                s += (f.values[g.rank(&buf)] - fx) * weights[yr];
            }
            fx * c0 + s * c
        })
        .collect();
    GridFunction::new(g, values)
}

fn require_heisenberg(g: &GroupDescriptor) -> Result<()> {
    if g.kind != GroupKind::Heisenberg {
        return Err(Error::InvalidGroup(format!("operator defined on heisenberg groups only, got {}", g.kind)));
    }
    Ok(())
}

fn norm_of(t: &[u64], p: u64, level: u32) -> f64 {
    let v = t.iter().filter_map(|&c| valuation(c, p)).min().unwrap_or(level);
    (p as f64).powi(-(v.min(level) as i32))
}

/// Sub-Laplacian symbol from its integral definition applied to the matrix coefficients at e:
/// c·∫_{Z_p^{2d}} ‖t‖^{−(α+2d)} (π(exp(t·X)) − I) dt with exp(t·X) = (t_1, t_2, ½ t_1·t_2).
pub fn sub_laplacian_block_integral(g: &GroupDescriptor, ir: &Irrep, alpha: f64) -> Result<CMat> {
    require_heisenberg(g)?;
    let d = g.d;
    let kdim = 2 * d;
    let c = vt_kernel_constant(g.p, kdim, alpha)?;
    let lvl = ir.level.max(1);
    let gl = g.at_level(lvl)?;
    let ql = gl.modulus();
    let half = inv2(ql);
    let ev = ir.evaluator(&gl)?.with_roots();
    let cell = (ql as f64).powi(-(kdim as i32));
    let mut acc = CMat::zeros(ir.dim, ir.dim);
    let mut t = vec![0u64; kdim];
    let mut x = vec![0u64; 2 * d + 1];
    for r in 1..ipow(ql, kdim as u32) {
        let mut rest = r;
        for c in t.iter_mut() {
            *c = rest % ql;
            rest /= ql;
        }
        let w = norm_of(&t, g.p, lvl).powf(-(alpha + kdim as f64)) * cell;
        x[..kdim].copy_from_slice(&t);
        x[kdim] = (0..d).fold(0, |s, j| (s + t[j] * t[d + j] % ql) % ql) * half % ql;
        let base = ev.base(&x);
        for h in 0..ir.dim {
            let (col, ph) = ev.entry(&x, base, h);
            acc[(h, col)] += ev.root(ph) * w;
            acc[(h, h)] -= real(w);
        }
    }
    Ok(acc * real(c))
}

/// Abelian VT-raw eigenvalue on Z_p^{k}: ‖ω‖^α − (1−p^{−k})/(1−p^{−(α+k)}), zero at ω = 0.
fn abelian_raw(omega: &[DualScalar], p: u64, k: usize, alpha: f64) -> Result<f64> {
    let lvl = omega.iter().map(|c| c.level()).max().unwrap_or(0);
    if lvl == 0 {
        return Ok(0.0);
    }
    Ok((p as f64).powf(lvl as f64 * alpha) - vt_zero_order(p, k, alpha)?)
}

/// Sub-Laplacian symbol from the Fourier-coefficient formula
/// σ_{hh'} = p^{−Md} Σ_τ λ(τ+ξ_1, ξ_2 + ξ_3(h+h')/2) e^{−2πi τ·(h'−h)}.
pub fn sub_laplacian_block_formula(g: &GroupDescriptor, ir: &Irrep, alpha: f64) -> Result<CMat> {
    require_heisenberg(g)?;
    let d = g.d;
    let p = g.p;
    let m = ir.index_level;
    let pm = ipow(p, m);
    let (xi1, xi2, xi3) = (&ir.params[..d], &ir.params[d..2 * d], ir.params[2 * d]);
    if m == 0 {
        let mut omega = xi1.to_vec();
        omega.extend_from_slice(xi2);
        return Ok(CMat::from_element(1, 1, real(abelian_raw(&omega, p, 2 * d, alpha)?)));
    }
    let half = inv2(pm);
    let roots = RootTable::new(pm);
    let n_tau = ipow(pm, d as u32) as usize;
    let digits = |mut r: usize| -> Vec<u64> {
        (0..d)
            .map(|_| {
                let v = r as u64 % pm;
                r /= pm as usize;
                v
            })
            .collect()
    };
    let scale = 1.0 / n_tau as f64;
    let mut out = CMat::zeros(ir.dim, ir.dim);
    for hi in 0..ir.dim {
        let h = digits(hi);
        for hj in 0..ir.dim {
            let h2 = digits(hj);
            let omega2: Vec<DualScalar> = (0..d)
                .map(|j| xi2[j].add(&xi3.scale((h[j] + h2[j]) * half % pm)))
                .collect();
            let mut s = Complex64::new(0.0, 0.0);
            for ti in 0..n_tau {
                let tau = digits(ti);
                let mut omega: Vec<DualScalar> = (0..d)
                    .map(|j| xi1[j].add(&DualScalar::canonical(tau[j], m, p).expect("prime checked")))
                    .collect();
                omega.extend_from_slice(&omega2);
                let lam = abelian_raw(&omega, p, 2 * d, alpha)?;
                if lam == 0.0 {
                    continue;
                }
                let ph = (0..d).fold(0u64, |acc, j| (acc + tau[j] * ((h2[j] + pm - h[j]) % pm)) % pm);
                s += roots.e((pm - ph) % pm) * lam;
            }
            out[(hi, hj)] = s * scale;
        }
    }
    Ok(out)
}

pub fn sub_laplacian_symbol(dual: &Arc<Dual>, alpha: f64) -> Result<Symbol> {
    let g = dual.group;
    require_heisenberg(&g)?;
    Symbol::try_from_fn(dual.clone(), |ir| sub_laplacian_block_formula(&g, ir, alpha))
}

pub fn sub_laplacian_symbol_integral(dual: &Arc<Dual>, alpha: f64) -> Result<Symbol> {
    let g = dual.group;
    require_heisenberg(&g)?;
    Symbol::try_from_fn(dual.clone(), |ir| sub_laplacian_block_integral(&g, ir, alpha))
}

/// ∂^α_{X3} on π_ξ from its central integral c·∫_{Z_p} |t|^{−(α+1)} (π(exp tX_3) − I) dt.
pub fn dir_x3_block_integral(g: &GroupDescriptor, ir: &Irrep, alpha: f64) -> Result<CMat> {
    require_heisenberg(g)?;
    let c = vt_kernel_constant(g.p, 1, alpha)?;
    let lvl = ir.level.max(1);
    let gl = g.at_level(lvl)?;
    let ql = gl.modulus();
    let mut acc = CMat::zeros(ir.dim, ir.dim);
    let mut x = vec![0u64; gl.dim()];
    for t in 1..ql {
        x[2 * g.d] = t;
        let w = norm_of(&[t], g.p, lvl).powf(-(alpha + 1.0)) / ql as f64;
        acc += (ir.matrix(&gl, &x)? - CMat::identity(ir.dim, ir.dim)) * real(w);
    }
    Ok(acc * real(c))
}

/// Closed form: (|ξ_3|^α − (1−p^{−1})/(1−p^{−(α+1)}))·I when ξ_3 ≠ 0, zero otherwise.
pub fn dir_x3_block_formula(g: &GroupDescriptor, ir: &Irrep, alpha: f64) -> Result<CMat> {
    require_heisenberg(g)?;
    let lam = abelian_raw(&ir.params[2 * g.d..], g.p, 1, alpha)?;
    Ok(CMat::identity(ir.dim, ir.dim) * real(lam))
}

pub fn dir_x3_symbol(dual: &Arc<Dual>, alpha: f64) -> Result<Symbol> {
    let g = dual.group;
    require_heisenberg(&g)?;
    Symbol::try_from_fn(dual.clone(), |ir| dir_x3_block_formula(&g, ir, alpha))
}

pub fn dir_x3_symbol_integral(dual: &Arc<Dual>, alpha: f64) -> Result<Symbol> {
    let g = dual.group;
    require_heisenberg(&g)?;
    Symbol::try_from_fn(dual.clone(), |ir| dir_x3_block_integral(&g, ir, alpha))
}

/// ℒ^α = D^α_sub + ∂^α_{X3}.
pub fn script_l_symbol(dual: &Arc<Dual>, alpha: f64) -> Result<Symbol> {
    let sub = sub_laplacian_symbol(dual, alpha)?;
    let dir = dir_x3_symbol(dual, alpha)?;
    let blocks = sub.blocks.iter().zip(&dir.blocks).map(|(a, b)| a + b).collect();
    Ok(Symbol {
        dual: dual.clone(),
        blocks,
    })
}

/// Values φ(p^n) of a radial symbol, keyed by n.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub p: u64,
    pub values: BTreeMap<u32, Complex64>,
}

impl RadialProfile {
    pub fn from_fn(p: u64, max_level: u32, phi: impl Fn(u32) -> Complex64) -> Self {
        RadialProfile {
            p,
            values: (0..=max_level).map(|n| (n, phi(n))).collect(),
        }
    }

    /// Parses {"p^n": [re, im]}; keys may be written "9" or "3^2".
    pub fn from_json(p: u64, s: &str) -> Result<Self> {
        let raw: BTreeMap<String, Complex64> = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let mut values = BTreeMap::new();
        for (k, v) in raw {
            let n = match k.split_once('^') {
                Some((b, e)) => {
                    if b.trim().parse::<u64>().ok() != Some(p) {
                        return Err(Error::Parse(format!("profile key {k:?} is not a power of {p}")));
                    }
                    e.trim().parse::<u32>().map_err(|_| Error::Parse(format!("bad exponent in {k:?}")))?
                }
                None => {
                    let v: u64 = k.trim().parse().map_err(|_| Error::Parse(format!("bad profile key {k:?}")))?;
                    match valuation(v, p) {
                        Some(e) if ipow(p, e) == v => e,
                        _ if v == 1 => 0,
                        _ => return Err(Error::Parse(format!("profile key {k:?} is not a power of {p}"))),
                    }
                }
            };
            values.insert(n, v);
        }
        Ok(RadialProfile { p, values })
    }

    pub fn to_json(&self) -> String {
        let m: BTreeMap<String, Complex64> = self
            .values
            .iter()
            .map(|(&n, &v)| (ipow(self.p, n).to_string(), v))
            .collect();
        serde_json::to_string(&m).expect("profiles serialize")
    }
}

/// σ(ξ) = φ(‖ξ‖_p)·I.
pub fn radial_calculus(profile: &RadialProfile, dual: &Arc<Dual>) -> Result<Symbol> {
    if profile.p != dual.group.p {
        return Err(Error::Mismatch("profile prime differs from group prime".into()));
    }
    for n in 0..=dual.level {
        if !profile.values.contains_key(&n) {
            return Err(Error::Coverage(format!("profile has no value at norm {}", ipow(profile.p, n))));
        }
    }
    Ok(Symbol::radial(dual.clone(), |ir| profile.values[&ir.level]))
}

#[derive(Clone, Debug, Serialize)]
pub struct DiffResult {
    #[serde(skip)]
    pub block_matrix: CMat,
    pub hs_norm: f64,
    pub op_norm: f64,
}

impl DiffResult {
    fn new(block_matrix: CMat) -> Self {
        let hs_norm = block_matrix.norm();
        let op_norm = op_norm(&block_matrix);
        DiffResult {
            block_matrix,
            hs_norm,
            op_norm,
        }
    }
}

pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// σ(η⊗ξ) assembled block-diagonally in the basis of the tensor decomposition.
pub fn tensor_blocks(tb: &TensorBasis, sigma: &Symbol) -> Result<CMat> {
    let n = tb.u.nrows();
    let mut out = CMat::zeros(n, n);
    let mut at = 0;
    for (tau, mult) in &tb.decomposition.components {
        let b = sigma.get(tau)?;
        for _ in 0..*mult {
            out.view_mut((at, at), (tau.dim, tau.dim)).copy_from(b);
            at += tau.dim;
        }
    }
    Ok(out)
}

/// σ(I_{d_η}⊗ξ) in the same basis: U*(I⊗σ(ξ))U.
pub fn lifted_block(tb: &TensorBasis, eta: &Irrep, sigma_xi: &CMat) -> CMat {
    let lifted = CMat::identity(eta.dim, eta.dim).kronecker(sigma_xi);
    tb.u.adjoint() * lifted * &tb.u
}

/// Δ_η σ(ξ) for a precomputed tensor basis, norms divided by ‖η‖^β.
pub fn delta_with(tb: &TensorBasis, eta: &Irrep, sigma: &Symbol, xi: &Irrep, beta: f64) -> Result<DiffResult> {
    if beta < 0.0 {
        return Err(Error::Domain(format!("β = {beta} must be non-negative")));
    }
    let m = tensor_blocks(tb, sigma)? - lifted_block(tb, eta, sigma.get(xi)?);
    let scale = eta.dual_norm().powf(-beta);
    Ok(DiffResult::new(m * real(scale)))
}

pub fn delta(eta: &Irrep, sigma: &Symbol, xi: &Irrep, beta: f64) -> Result<DiffResult> {
    let tb = TensorBasis::new(eta, xi)?;
    delta_with(&tb, eta, sigma, xi, beta)
}

/// ∫ f(x) (η(x)*⊗ξ(x)* − I⊗ξ(x)*) dx: unitarily equivalent to Δ_η f̂(ξ) without an intertwiner.
pub fn delta_of_transform_direct(f: &GridFunction, eta: &Irrep, xi: &Irrep) -> Result<CMat> {
    let g = f.group;
    let q = Quotient::new(g);
    let ev_e = eta.evaluator(&g)?.with_roots();
    let ev_x = xi.evaluator(&g)?.with_roots();
    let (de, dx) = (eta.dim, xi.dim);
    let mut m = CMat::zeros(de * dx, de * dx);
    let inv = 1.0 / q.len() as f64;
    for (r, &v) in f.values.iter().enumerate() {
        if v == Complex64::new(0.0, 0.0) {
            continue;
        }
        let x = q.coords(r);
        let re = ev_e.rows(x);
        let rx = ev_x.rows(x);
        let v = v * inv;
        for (i, &(ce, pe)) in re.iter().enumerate() {
            let ze = ev_e.root(pe).conj();
            for (j, &(cx, px)) in rx.iter().enumerate() {
                let zx = ev_x.root(px).conj() * v;
                // Adjoint: entry (row, col) of ρ(x) lands at (col, row).
                m[(ce * dx + cx, i * dx + j)] += ze * zx;
                m[(i * dx + cx, i * dx + j)] -= zx;
            }
        }
    }
    Ok(m)
}

/// (e^{2πi{η·x}} − 1)·F^{−1}σ, scaled by ‖η‖^{−β}.
fn rt_product(eta: &[DualScalar], sigma: &Symbol, beta: f64) -> Result<GridFunction> {
    let g = sigma.group().at_level(sigma.level().max(1))?;
    if eta.len() != g.dim() {
        return Err(Error::Mismatch(format!("η has {} components, group dimension is {}", eta.len(), g.dim())));
    }
    let eta_level = eta.iter().map(|c| c.level()).max().unwrap_or(0);
    if eta_level > g.level {
        return Err(Error::Precision(format!(
            "η of level {eta_level} exceeds the symbol grid level {}",
            g.level
        )));
    }
    let kernel = inverse(sigma, g.level)?;
    let chi = GridFunction::character(g, eta)?;
    let norm = (g.p as f64).powi(eta_level as i32).powf(beta);
    let values = kernel
        .values
        .iter()
        .zip(&chi.values)
        .map(|(k, c)| k * (c - 1.0) / norm)
        .collect();
    GridFunction::new(g, values)
}

/// ⧄^β_η σ(ξ) = ‖η‖^{−β} F[(e^{2πi{η·x}} − 1)·F^{−1}σ](ξ), by grid round trip at the symbol level.
pub fn rt_delta(eta: &[DualScalar], sigma: &Symbol, beta: f64, xi: &Irrep) -> Result<DiffResult> {
    sigma.get(xi)?;
    let prod = rt_product(eta, sigma, beta)?;
    Ok(DiffResult::new(transform_at(&prod, xi)?))
}

/// ⧄^β_η σ at every ξ of the symbol's dual ball, in dual order, from one round trip.
pub fn rt_delta_all(eta: &[DualScalar], sigma: &Symbol, beta: f64) -> Result<Vec<DiffResult>> {
    let prod = rt_product(eta, sigma, beta)?;
    let fh = Fourier::with_dual(prod.group, sigma.dual.clone())?.forward(&prod)?;
    Ok(fh.blocks.into_iter().map(DiffResult::new).collect())
}
