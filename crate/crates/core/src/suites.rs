//! Verification suites behind `ultraharm verify`, each producing a JSON summary and a CSV table.

use std::fmt;
use std::io;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::analysis::{
    condition_h_report, cz_decompose, i_alpha_from_sums, lower_bound_report, lp_ratio, mikhlin_report,
    difference_sums, mu_alpha_ball, norm_equiv_from_sums, rademacher_symbol, square_function, IAlphaScanner, MikhlinVariant,
    WeightSpec,
};
use crate::dual::{boxtimes, enumerate_irreps, tensor_decompose, tensor_decompose_oracle, Dual, Irrep, TensorBasis};
use crate::error::{Error, Result};
use crate::fourier::{apply_multiplier, plancherel_with, Fourier, GridFunction, Symbol};
use crate::group::{GroupDescriptor, GroupKind, Quotient};
use crate::operators::{delta_with, lifted_block, rt_delta_all, tensor_blocks, vt_apply_direct, vt_symbol};
use crate::padic::{ipow, root_bound, DualScalar, RootOfUnity};
use crate::CMat;

/// Pair tables larger than this are sampled instead of enumerated.
const MAX_TABLE: usize = 1 << 24;
/// The direct hypersingular sum is quadratic in the grid size.
const MAX_DIRECT: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Plancherel,
    Homomorphism,
    Tensor,
    VtLocality,
    LowerBound,
    IAlpha,
    NormEquiv,
    Lp,
    Cz,
    HCondition,
    Mikhlin,
    ProductRule,
    PhaseBound,
}

impl Suite {
    pub const ALL: [Suite; 13] = [
        Suite::Plancherel,
        Suite::Homomorphism,
        Suite::Tensor,
        Suite::VtLocality,
        Suite::LowerBound,
        Suite::IAlpha,
        Suite::NormEquiv,
        Suite::Lp,
        Suite::Cz,
        Suite::HCondition,
        Suite::Mikhlin,
        Suite::ProductRule,
        Suite::PhaseBound,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Plancherel => "plancherel",
            Suite::Homomorphism => "homomorphism",
            Suite::Tensor => "tensor",
            Suite::VtLocality => "vt-locality",
            Suite::LowerBound => "lower-bound",
            Suite::IAlpha => "i-alpha",
            Suite::NormEquiv => "norm-equiv",
            Suite::Lp => "lp",
            Suite::Cz => "cz",
            Suite::HCondition => "h-condition",
            Suite::Mikhlin => "mikhlin",
            Suite::ProductRule => "product-rule",
            Suite::PhaseBound => "phase-bound",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .find(|x| x.name() == s)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unknown suite {s:?}")))
    }
}

/// Inputs shared by the suites. Unset options fall back to per-suite defaults.
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub group: GroupDescriptor,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub t: Option<f64>,
    pub samples: Option<usize>,
    /// Named symbol for the mikhlin suite; the VT symbol when absent.
    pub symbol: Option<(String, Symbol)>,
}

impl SuiteConfig {
    pub fn new(group: GroupDescriptor, seed: u64) -> Self {
        SuiteConfig {
            group,
            seed,
            alpha: None,
            t: None,
            samples: None,
            symbol: None,
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    fn samples_or(&self, n: usize) -> usize {
        self.samples.unwrap_or(n)
    }

    fn alphas_or(&self, default: &[f64]) -> Vec<f64> {
        match self.alpha {
            Some(a) => vec![a],
            None => default.to_vec(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub group: GroupDescriptor,
    pub seed: u64,
    pub pass: bool,
    pub summary: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl SuiteReport {
    fn new(suite: Suite, cfg: &SuiteConfig, columns: &[&str]) -> Self {
        SuiteReport {
            suite,
            group: cfg.group,
            seed: cfg.seed,
            pass: true,
            summary: Map::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn set(&mut self, key: &str, v: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    fn row(&mut self, cells: Vec<Value>) {
        self.rows.push(cells);
    }

    /// Records a named assertion; the suite passes iff every check does.
    fn check(&mut self, name: &str, ok: bool) {
        let checks = self
            .summary
            .entry("checks")
            .or_insert_with(|| Value::Object(Map::new()));
        if let Value::Object(m) = checks {
            m.insert(name.to_string(), Value::Bool(ok));
        }
        self.pass &= ok;
    }

    /// Compact JSON with every float written to 17 significant digits.
    pub fn to_json(&self) -> String {
        to_json_sig17(self)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(&self.columns);
        for r in &self.rows {
            let _ = w.write_record(r.iter().map(csv_cell));
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{:.16e}", v as f64)
    }
}

pub fn to_json_sig17<T: Serialize>(v: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17);
    v.serialize(&mut ser).expect("report serializes");
    String::from_utf8(out).expect("utf8")
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) if n.is_f64() => format!("{:.16e}", n.as_f64().unwrap_or(f64::NAN)),
        Value::String(s) => s.clone(),
        other => to_json_sig17(other),
    }
}

fn num(x: f64) -> Value {
    json!(x)
}

fn random_fn(g: GroupDescriptor, rng: &mut ChaCha8Rng) -> GridFunction {
    let values = (0..g.order())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    GridFunction::new(g, values).expect("sized to the group")
}

fn random_symbol(dual: &Arc<Dual>, rng: &mut ChaCha8Rng) -> Symbol {
    let blocks = dual
        .irreps
        .iter()
        .map(|ir| CMat::from_fn(ir.dim, ir.dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    Symbol {
        dual: dual.clone(),
        blocks,
    }
}

fn fold_max(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteReport> {
    match suite {
        Suite::Plancherel => plancherel_suite(cfg),
        Suite::Homomorphism => homomorphism_suite(cfg),
        Suite::Tensor => tensor_suite(cfg),
        Suite::VtLocality => vt_locality_suite(cfg),
        Suite::LowerBound => lower_bound_suite(cfg),
        Suite::IAlpha => i_alpha_suite(cfg),
        Suite::NormEquiv => norm_equiv_suite(cfg),
        Suite::Lp => lp_suite(cfg),
        Suite::Cz => cz_suite(cfg),
        Suite::HCondition => h_condition_suite(cfg),
        Suite::Mikhlin => mikhlin_suite(cfg),
        Suite::ProductRule => product_rule_suite(cfg),
        Suite::PhaseBound => phase_bound_suite(cfg),
    }
}

fn plancherel_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let g = cfg.group;
    let mut rep = SuiteReport::new(Suite::Plancherel, cfg, &["sample", "l2_squared", "dual_sum", "plancherel_gap", "inversion_residual"]);
    let engine = Fourier::new(g, g.level)?;
    let mut rng = cfg.rng();
    let (mut gap, mut inv) = (0.0f64, 0.0f64);
    for i in 0..cfg.samples_or(100) {
        let f = random_fn(g, &mut rng);
        let fh = engine.forward(&f)?;
        let pl = plancherel_with(&f, &fh);
        let back = engine.inverse(&fh)?.sup_distance(&f);
        gap = gap.max(pl.gap);
        inv = inv.max(back);
        rep.row(vec![json!(i), num(pl.lhs), num(pl.rhs), num(pl.gap), num(back)]);
    }
    rep.set("max_plancherel_gap", gap);
    rep.set("max_inversion_residual", inv);
    rep.check("plancherel_below_1e-9", gap < 1e-9);
    rep.check("inversion_below_1e-9", inv < 1e-9);
    Ok(rep)
}

/// Exact check of π(x⋆y) = π(x)π(y) on the monomial data of one irrep over all pairs of G/G_1.
fn exact_pairs(g1: &GroupDescriptor, table: &[u32], ir: &Irrep) -> Result<u64> {
    let q = Quotient::new(*g1);
    let n = q.len();
    let ev = ir.evaluator(g1)?;
    let m = ev.modulus();
    let d = ir.dim;
    let mut cols = vec![0u32; n * d];
    let mut ph = vec![0u64; n * d];
    for r in 0..n {
        for (h, (c, p)) in ev.rows(q.coords(r)).into_iter().enumerate() {
            cols[r * d + h] = c as u32;
            ph[r * d + h] = p;
        }
    }
    let mut bad = 0u64;
    for x in 0..n {
        let tx = &table[x * n..(x + 1) * n];
        for (y, &xy) in tx.iter().enumerate() {
            let xy = xy as usize;
            for h in 0..d {
                let c = cols[x * d + h] as usize;
                let mut s = ph[x * d + h] + ph[y * d + c];
                if s >= m {
                    s -= m;
                }
                if cols[y * d + c] != cols[xy * d + h] || s != ph[xy * d + h] {
                    bad += 1;
                }
            }
        }
    }
    Ok(bad)
}

fn unitarity(m: &CMat) -> f64 {
    let n = m.nrows();
    (m * m.adjoint() - CMat::identity(n, n)).norm()
}

fn homomorphism_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let g = cfg.group;
    let mut rep = SuiteReport::new(Suite::Homomorphism, cfg, &["stage", "irrep", "dim", "homomorphism", "unitarity"]);
    let mut rng = cfg.rng();
    let g1 = g.at_level(1)?;
    let q1 = Quotient::new(g1);
    let n = q1.len();
    let irreps1 = enumerate_irreps(&g1, 1)?;
    rep.set("level1_irreps", irreps1.len());
    if n * n <= MAX_TABLE {
        let mut table = vec![0u32; n * n];
        let mut buf = vec![0u64; g1.dim()];
        for x in 0..n {
            for y in 0..n {
                g1.mul_into(q1.coords(x), q1.coords(y), &mut buf);
                table[x * n + y] = g1.rank(&buf) as u32;
            }
        }
        let results = irreps1
            .par_iter()
            .map(|ir| {
                let bad = exact_pairs(&g1, &table, ir)?;
                let mut unit = 0.0f64;
                for r in 0..n {
                    unit = unit.max(unitarity(&ir.matrix(&g1, q1.coords(r))?));
                }
                Ok((bad, unit))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut bad_total = 0;
        let mut unit_max = 0.0f64;
        for (ir, (bad, unit)) in irreps1.iter().zip(results) {
            bad_total += bad;
            unit_max = unit_max.max(unit);
            rep.row(vec![json!("level1-exhaustive"), json!(ir.id()), json!(ir.dim), json!(bad), num(unit)]);
        }
        rep.set("level1_pairs", (n * n) as u64);
        rep.set("level1_mismatched_entries", bad_total);
        rep.set("level1_max_unitarity", unit_max);
        rep.check("level1_exact", bad_total == 0);
        rep.check("level1_unitary_below_1e-9", unit_max < 1e-9);
    } else {
        rep.set("level1_exhaustive", "skipped: pair table too large");
    }
    // Dense complex residuals on sampled pairs, tying the monomial data to the matrices.
    let dual = enumerate_irreps(&g, g.level)?;
    let pairs = cfg.samples_or(1000);
    let mut hom_max = 0.0f64;
    let mut unit_max = 0.0f64;
    for _ in 0..pairs {
        let x: Vec<u64> = (0..g.dim()).map(|_| rng.gen_range(0..g.modulus())).collect();
        let y: Vec<u64> = (0..g.dim()).map(|_| rng.gen_range(0..g.modulus())).collect();
        let xy = g.multiply(&x, &y)?;
        let ir = &dual[rng.gen_range(0..dual.len())];
        let (px, py) = (ir.matrix(&g, &x)?, ir.matrix(&g, &y)?);
        let h = (ir.matrix(&g, &xy)? - &px * &py).norm();
        let u = unitarity(&px);
        hom_max = hom_max.max(h);
        unit_max = unit_max.max(u);
        rep.row(vec![json!("sampled"), json!(ir.id()), json!(ir.dim), num(h), num(u)]);
    }
    rep.set("sampled_pairs", pairs);
    rep.set("sampled_max_homomorphism", hom_max);
    rep.set("sampled_max_unitarity", unit_max);
    rep.check("sampled_below_1e-9", hom_max < 1e-9 && unit_max < 1e-9);
    Ok(rep)
}

/// max_x |Σ m_τ χ_τ(x) − χ_η(x) χ_ξ(x)| over all of G/G_L.
fn character_residual(eta: &Irrep, xi: &Irrep, comps: &[(Irrep, usize)]) -> Result<f64> {
    let g = GroupDescriptor::new(eta.kind, eta.p, eta.d, eta.level.max(xi.level).max(1))?;
    let q = Quotient::new(g);
    let mut worst = 0.0f64;
    for r in 0..q.len() {
        let x = q.coords(r);
        let lhs = eta.character(&g, x)? * xi.character(&g, x)?;
        let mut rhs = Complex64::new(0.0, 0.0);
        for (tau, m) in comps {
            rhs += tau.character(&g, x)? * *m as f64;
        }
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

fn tensor_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let g = cfg.group;
    let mut rep = SuiteReport::new(Suite::Tensor, cfg, &["eta", "xi", "components", "closed_equals_oracle", "character_residual"]);
    let closed = matches!(g.kind, GroupKind::Heisenberg | GroupKind::Abelian);
    rep.set("closed_form_available", closed);
    let mut pairs: Vec<(Irrep, Irrep)> = Vec::new();
    let low = enumerate_irreps(&g, 1)?;
    for a in &low {
        for b in &low {
            pairs.push((a.clone(), b.clone()));
        }
    }
    rep.set("level1_pairs", pairs.len());
    if g.level >= 2 {
        let mut rng = cfg.rng();
        let all = enumerate_irreps(&g, g.level)?;
        let top: Vec<&Irrep> = all.iter().filter(|ir| ir.level == g.level).collect();
        let n = cfg.samples_or(100);
        for _ in 0..n {
            let a = top[rng.gen_range(0..top.len())].clone();
            let b = all[rng.gen_range(0..all.len())].clone();
            pairs.push((a, b));
        }
        rep.set("sampled_pairs", n);
    }
    let results = pairs
        .par_iter()
        .map(|(a, b)| {
            let dec = tensor_decompose(a, b)?;
            let agree = if closed { boxtimes(a, b)? == tensor_decompose_oracle(a, b)? } else { true };
            let resid = character_residual(a, b, &dec.components)?;
            let dims_ok = dec.total_dim() == a.dim * b.dim;
            Ok((dec, agree && dims_ok, resid))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all_agree = true;
    let mut worst = 0.0f64;
    for ((a, b), (dec, agree, resid)) in pairs.iter().zip(results) {
        all_agree &= agree;
        worst = worst.max(resid);
        let comps: Vec<String> = dec.components.iter().map(|(t, m)| format!("{}x{}", m, t.id())).collect();
        rep.row(vec![json!(a.id()), json!(b.id()), json!(comps.join(" ")), json!(agree), num(resid)]);
    }
    rep.set("max_character_residual", worst);
    rep.check("decompositions_agree", all_agree);
    rep.check("characters_below_1e-9", worst < 1e-9);
    Ok(rep)
}

/// All nonzero vectors of (p^{-m}Z/Z)^dim with m <= max_level.
fn dual_vectors(g: &GroupDescriptor, max_level: u32) -> Result<Vec<Vec<DualScalar>>> {
    let q = ipow(g.p, max_level);
    let dim = g.dim();
    let total = ipow(q, dim as u32);
    (1..total)
        .map(|mut r| {
            (0..dim)
                .map(|_| {
                    let c = r % q;
                    r /= q;
                    DualScalar::canonical(c, max_level, g.p)
                })
                .collect()
        })
        .collect()
}

fn vt_locality_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let g = cfg.group;
    let mut rep = SuiteReport::new(Suite::VtLocality, cfg, &["alpha", "check", "pairs", "max_deviation"]);
    let alphas = cfg.alphas_or(&[0.5, 1.0, 2.0]);
    let dual = Arc::new(Dual::new(&g, g.level)?);
    let irreps = &dual.irreps;
    let pairs: Vec<(&Irrep, &Irrep)> = irreps
        .iter()
        .filter(|e| !e.is_trivial())
        .flat_map(|e| irreps.iter().filter(move |x| e.level < x.level).map(move |x| (e, x)))
        .collect();
    let symbols = alphas.iter().map(|&a| vt_symbol(&dual, a)).collect::<Result<Vec<_>>>()?;
    let delta_max = pairs
        .par_iter()
        .map(|(e, x)| {
            let tb = TensorBasis::new(e, x)?;
            symbols
                .iter()
                .map(|s| Ok(delta_with(&tb, e, s, x, 0.0)?.hs_norm))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let etas = if g.level >= 2 { dual_vectors(&g, g.level - 1)? } else { Vec::new() };
    let mut worst = 0.0f64;
    let mut mrt_worst = 0.0f64;
    for (i, (&alpha, s)) in alphas.iter().zip(&symbols).enumerate() {
        let dm = fold_max(delta_max.iter().map(|v| v[i]));
        worst = worst.max(dm);
        rep.row(vec![num(alpha), json!("delta"), json!(pairs.len()), num(dm)]);
        let rt = etas
            .par_iter()
            .map(|eta| {
                let m = eta.iter().map(|c| c.level()).max().unwrap_or(0);
                let all = rt_delta_all(eta, s, 0.0)?;
                Ok(fold_max(irreps.iter().zip(&all).filter(|(x, _)| x.level > m).map(|(_, r)| r.hs_norm)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let rm = fold_max(rt);
        mrt_worst = mrt_worst.max(rm);
        rep.row(vec![num(alpha), json!("rt-delta"), json!(etas.len()), num(rm)]);
    }
    rep.set("max_delta", worst);
    rep.set("max_rt_delta", mrt_worst);
    rep.check("delta_below_1e-12", worst < 1e-12);
    rep.check("rt_delta_below_1e-12", mrt_worst < 1e-12);
    if g.order() <= MAX_DIRECT {
        let mut rng = cfg.rng();
        let mut gap = 0.0f64;
        for (&alpha, s) in alphas.iter().zip(&symbols) {
            for _ in 0..3 {
                let f = random_fn(g, &mut rng);
                let a = apply_multiplier(s, &f)?;
                let b = vt_apply_direct(&f, alpha)?;
                let d = a.sup_distance(&b);
                gap = gap.max(d);
                rep.row(vec![num(alpha), json!("symbol-vs-integral"), json!(1), num(d)]);
            }
        }
        rep.set("max_symbol_vs_integral", gap);
        rep.check("symbol_matches_integral_1e-9", gap < 1e-9);
    } else {
        rep.set("symbol_vs_integral", "skipped: grid too large for the direct sum");
    }
    Ok(rep)
}

fn lower_bound_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let g = cfg.group;
    let mut rep = SuiteReport::new(Suite::LowerBound, cfg, &["irrep", "dim", "min_ratio", "max_one_multiplicity"]);
    let lb = lower_bound_report(&g, g.level)?;
    for row in &lb.per_irrep {
        rep.row(vec![json!(row.irrep), json!(row.dim), num(row.min_ratio), json!(row.max_one_multiplicity)]);
    }
    rep.set("irreps_checked", lb.irreps_checked);
    rep.set("pairs_checked", lb.pairs_checked);
    rep.set("empirical_c", lb.global_c);
    rep.set("displayed_ratio", lb.displayed_ratio);
    rep.set("violation_count", lb.violation_count);
    rep.set("violations", &lb.violations);
    rep.check("at_most_one_eigenvalue_one", lb.claim_holds);
    Ok(rep)
}

fn i_alpha_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let g = cfg.group;
    let mut rep = SuiteReport::new(
        Suite::IAlpha,
        cfg,
        &["alpha", "ratio_min", "ratio_max", "argmin", "argmax", "tail_bound", "tail_bound_2d", "max_observed_tail"],
    );
    let alphas = cfg.alphas_or(&[0.5, 1.0, 2.0]);
    let n_max = g.level;
    let sums = IAlphaScanner::new(&g, n_max)?.level_sums_on(&g)?;
    let next = IAlphaScanner::new(&g, n_max + 1)?.level_sums_on(&g)?;
    let q = Quotient::new(g);
    let (p, dim) = (g.p, g.dim());
    let mut ok = true;
    for &alpha in &alphas {
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("α = {alpha} must be positive")));
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let (mut amin, mut amax) = (vec![], vec![]);
        let mut tail = 0.0f64;
        for r in 1..q.len() {
            let x = q.coords(r);
            let v = i_alpha_from_sums(&sums[r], p, dim, alpha);
            let ratio = v / g.group_norm(x).powf(alpha);
            if ratio < lo {
                lo = ratio;
                amin = x.to_vec();
            }
            if ratio > hi {
                hi = ratio;
                amax = x.to_vec();
            }
            tail = tail.max(i_alpha_from_sums(&next[r], p, dim, alpha) - v);
        }
        let bound = crate::analysis::i_alpha_tail_bound(p, dim, alpha, n_max);
        ok &= lo > 0.0 && hi.is_finite() && tail <= bound;
        rep.row(vec![num(alpha), num(lo), num(hi), json!(amin), json!(amax), num(bound), num(bound / 2.0), num(tail)]);
    }
    rep.set("n_max", n_max);
    rep.set("points", q.len() - 1);
    rep.check("ratio_bounded_and_tail_below_bound", ok);
    Ok(rep)
}

fn norm_equiv_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let g = cfg.group;
    let mut rep = SuiteReport::new(Suite::NormEquiv, cfg, &["sample", "alpha", "lhs", "rhs", "ratio", "tail_bound"]);
    let alphas = cfg.alphas_or(&[0.5, 1.0, 2.0]);
    let n_max = g.level;
    let (p, dim) = (g.p as f64, g.dim() as f64);
    let one = GridFunction::constant(g, Complex64::new(1.0, 0.0));
    let mut gap = 0.0f64;
    let one_sums = difference_sums(&one, n_max)?;
    for &alpha in &alphas {
        let r = norm_equiv_from_sums(&one, &one_sums, alpha)?;
        let rhs: f64 = (1..=n_max).map(|n| 2.0 * (1.0 - p.powf(-dim)) * p.powf(-(n as f64) * alpha)).sum();
        let lhs = mu_alpha_ball(g.p, g.dim(), alpha, 0);
        gap = gap.max((r.rhs - rhs).abs()).max((r.lhs - lhs).abs());
        rep.row(vec![json!("constant"), num(alpha), num(r.lhs), num(r.rhs), num(r.ratio), num(r.tail_bound)]);
    }
    let mut rng = cfg.rng();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..cfg.samples_or(5) {
        let f = random_fn(g, &mut rng);
        let sums = difference_sums(&f, n_max)?;
        for &alpha in &alphas {
            let r = norm_equiv_from_sums(&f, &sums, alpha)?;
            lo = lo.min(r.ratio);
            hi = hi.max(r.ratio);
            rep.row(vec![json!(i), num(alpha), num(r.lhs), num(r.rhs), num(r.ratio), num(r.tail_bound)]);
        }
    }
    rep.set("constant_function_gap", gap);
    rep.set("ratio_min", lo);
    rep.set("ratio_max", hi);
    rep.check("constant_function_closed_form", gap < 1e-9);
    rep.check("ratio_finite_positive", lo > 0.0 && hi.is_finite());
    Ok(rep)
}

fn lp_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let g = cfg.group;
    let mut rep = SuiteReport::new(Suite::Lp, cfg, &["r", "alpha", "ratio_min", "ratio_max"]);
    let mut rng = cfg.rng();
    let fs: Vec<GridFunction> = (0..cfg.samples_or(100)).map(|_| random_fn(g, &mut rng)).collect();
    let l2 = fold_max(fs.iter().map(|f| (square_function(f).lr_norm(2.0) - f.lr_norm(2.0)).abs()));
    rep.set("max_l2_gap", l2);
    rep.check("l2_isometry_1e-9", l2 < 1e-9);
    let alphas = cfg.alphas_or(&[0.0, 1.0]);
    let mut ok = true;
    for r in [1.5, 4.0] {
        for &alpha in &alphas {
            let w = WeightSpec::full(alpha);
            let ratios = fs.iter().map(|f| lp_ratio(f, r, &w)).collect::<Result<Vec<f64>>>()?;
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = fold_max(ratios.iter().copied());
            ok &= lo > 0.0 && hi.is_finite();
            rep.row(vec![num(r), num(alpha), num(lo), num(hi)]);
        }
    }
    rep.check("ratios_finite_positive", ok);
    Ok(rep)
}

fn cz_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let g = cfg.group;
    let mut rep = SuiteReport::new(
        Suite::Cz,
        cfg,
        &[
            "sample",
            "alpha",
            "gamma",
            "pieces",
            "reconstruction",
            "max_mean",
            "disjoint",
            "supported",
            "measure_ratio",
            "integrability",
            "l1_sum_ratio",
            "sup_ratio",
        ],
    );
    let dim = g.dim() as f64;
    let alphas = cfg.alphas_or(&[0.0, -dim / 3.0, -2.0 * dim / 3.0]);
    let mut rng = cfg.rng();
    let mut ok_exact = true;
    let mut ok_measure = true;
    let (mut c2, mut c3, mut c4) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..cfg.samples_or(50) {
        let mut phi = random_fn(g, &mut rng);
        for v in phi.values.iter_mut() {
            if rng.gen_bool(0.9) {
                *v *= 0.02;
            } else {
                *v *= 20.0;
            }
        }
        let alpha = alphas[i % alphas.len()];
        let gamma = rng.gen_range(0.05..3.0);
        let res = cz_decompose(&phi, gamma, alpha)?;
        let (ch, co) = (&res.checks, &res.constants);
        ok_exact &= ch.reconstruction < 1e-12 && ch.max_mean < 1e-12 && ch.disjoint && ch.supported;
        ok_measure &= co.measure_ratio <= 1.0 + 1e-12;
        c2 = c2.max(co.integrability);
        c3 = c3.max(co.l1_sum_ratio);
        c4 = c4.max(co.sup_ratio);
        rep.row(vec![
            json!(i),
            num(alpha),
            num(gamma),
            json!(res.pieces.len()),
            num(ch.reconstruction),
            num(ch.max_mean),
            json!(ch.disjoint),
            json!(ch.supported),
            num(co.measure_ratio),
            num(co.integrability),
            num(co.l1_sum_ratio),
            num(co.sup_ratio),
        ]);
    }
    rep.set("max_integrability", c2);
    rep.set("max_l1_sum_ratio", c3);
    rep.set("max_sup_ratio", c4);
    rep.check("exact_properties_1e-12", ok_exact);
    rep.check("measure_bound_constant_1", ok_measure);
    Ok(rep)
}

fn h_condition_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let g = cfg.group;
    let mut rep = SuiteReport::new(Suite::HCondition, cfg, &["symbol", "t", "k", "l", "n", "measured", "bound"]);
    let ts = match cfg.t {
        Some(t) => vec![t],
        None => vec![1.0, 1.5, 2.0],
    };
    let dual = Arc::new(Dual::new(&g, g.level)?);
    let mut rng = cfg.rng();
    let signs: Vec<f64> = (0..=g.level).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let symbols = [
        ("vt", vt_symbol(&dual, cfg.alpha.unwrap_or(1.0))?, true),
        ("rademacher", rademacher_symbol(&dual, &signs)?, true),
        ("random", random_symbol(&dual, &mut rng), false),
    ];
    let mut fits = Vec::new();
    for (name, s, must_vanish) in &symbols {
        for &t in &ts {
            let h = condition_h_report(s, t, g.level)?;
            for r in &h.table {
                rep.row(vec![json!(name), num(t), json!(r.k), json!(r.l), json!(r.n), num(r.measured), num(r.bound)]);
            }
            if *must_vanish {
                rep.check(&format!("{name}_t{t}_identically_zero"), h.all_zero);
            } else {
                rep.check(&format!("{name}_t{t}_finite_fit"), h.fitted_b.is_finite());
            }
            fits.push(json!({
                "symbol": name,
                "t": t,
                "all_zero": h.all_zero,
                "fitted_b": h.fitted_b,
                "fitted_eps": h.fitted_eps,
                "pass": h.pass,
                "max_measured": h.max_measured,
                "corollary_max": h.corollary_max,
            }));
        }
    }
    rep.set("signs", &signs);
    rep.set("fits", fits);
    Ok(rep)
}

fn mikhlin_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let g = cfg.group;
    let mut rep = SuiteReport::new(Suite::Mikhlin, cfg, &["variant", "beta", "decay", "constant", "pairs", "witness_eta", "witness_xi"]);
    let a = cfg.alpha.unwrap_or(1.0);
    let t = cfg.t.unwrap_or(1.5);
    let (name, sigma) = match &cfg.symbol {
        Some((n, s)) => (n.clone(), s.clone()),
        None => {
            let dual = Arc::new(Dual::new(&g, g.level)?);
            ("vt".to_string(), vt_symbol(&dual, a)?)
        }
    };
    rep.set("symbol", &name);
    rep.set("exponent", a);
    rep.set("t", t);
    let mut ok = true;
    for v in MikhlinVariant::ALL {
        if v.is_sub() && g.kind != GroupKind::Heisenberg {
            continue;
        }
        let m = mikhlin_report(&sigma, a, v, t)?;
        ok &= m.constant.is_finite();
        let (we, wx) = m.witness.clone().unwrap_or_default();
        rep.row(vec![json!(format!("{v:?}")), num(m.beta), num(m.decay), num(m.constant), json!(m.pairs), json!(we), json!(wx)]);
    }
    rep.check("constants_finite", ok);
    Ok(rep)
}

fn product_rule_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let g = cfg.group.at_level(1)?;
    let mut rep = SuiteReport::new(Suite::ProductRule, cfg, &["sample", "pairs", "max_hs_residual"]);
    let engine = Fourier::new(g, 1)?;
    let irreps = &engine.dual.irreps;
    let bases = irreps
        .par_iter()
        .flat_map(|e| irreps.par_iter().map(move |x| (e, x)))
        .map(|(e, x)| TensorBasis::new(e, x))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = cfg.rng();
    let mut worst = 0.0f64;
    for i in 0..cfg.samples_or(3) {
        let sigma = random_symbol(&engine.dual, &mut rng);
        let fh = engine.forward(&random_fn(g, &mut rng))?;
        let prod = sigma.compose(&fh)?;
        let mut w = 0.0f64;
        for (k, tb) in bases.iter().enumerate() {
            let (e, x) = (&irreps[k / irreps.len()], &irreps[k % irreps.len()]);
            let lhs = delta_with(tb, e, &prod, x, 0.0)?.block_matrix;
            let ds = delta_with(tb, e, &sigma, x, 0.0)?.block_matrix;
            let df = delta_with(tb, e, &fh, x, 0.0)?.block_matrix;
            let rhs = ds * tensor_blocks(tb, &fh)? + lifted_block(tb, e, sigma.get(x)?) * df;
            w = w.max((lhs - rhs).norm());
        }
        worst = worst.max(w);
        rep.row(vec![json!(i), json!(bases.len()), num(w)]);
    }
    rep.set("max_hs_residual", worst);
    rep.check("residual_below_1e-9", worst < 1e-9);
    Ok(rep)
}

fn phase_bound_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let p = cfg.group.p;
    let mut rep = SuiteReport::new(Suite::PhaseBound, cfg, &["m", "roots", "min_distance", "bound", "pass"]);
    let m_max = cfg.samples.map(|s| s as u32).unwrap_or(6);
    let mut ok = true;
    for m in 1..=m_max {
        let q = p
            .checked_pow(m)
            .filter(|&q| q <= 1 << 24)
            .ok_or_else(|| Error::Domain(format!("p^{m} too large for an exhaustive scan")))?;
        let mut lo = f64::INFINITY;
        let mut count = 0u64;
        let mut pass = true;
        for k in (1..q).filter(|k| k % p != 0) {
            let r = root_bound(RootOfUnity::new(p, k, m))?;
            pass &= r.pass;
            lo = lo.min(r.lhs);
            count += 1;
        }
        let bound = 4.0 / q as f64;
        ok &= pass;
        rep.row(vec![json!(m), json!(count), num(lo), num(bound), json!(pass)]);
    }
    rep.check("bound_holds_exhaustively", ok);
    Ok(rep)
}
