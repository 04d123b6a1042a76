//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are reported honestly as FAIL but only fail the run
//! if the failure changes character (see `Outcome::expected_shape`).

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use ultraharm::analysis::lower_bound_report;
use ultraharm::dual::{enumerate_irreps, Dual};
use ultraharm::fourier::{plancherel_with, Fourier, GridFunction};
use ultraharm::group::GroupDescriptor;
use ultraharm::operators::{script_l_symbol, sub_laplacian_symbol, sub_laplacian_symbol_integral};
use ultraharm::padic::ipow;
use ultraharm::suites::{run_suite, Suite, SuiteConfig, SuiteReport};
use ultraharm::Result;

const SEED: u64 = 20240601;
const KNOWN_FAILURES: [u32; 2] = [8, 12];

struct Outcome {
    pass: bool,
    detail: String,
    /// For known failures: the failure still looks the way it did when it was logged.
    expected_shape: bool,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome {
            pass,
            detail,
            expected_shape: false,
        }
    }
}

fn suite(s: Suite, g: GroupDescriptor) -> Result<SuiteReport> {
    run_suite(s, &SuiteConfig::new(g, SEED))
}

fn suite_with(s: Suite, g: GroupDescriptor, samples: usize) -> Result<SuiteReport> {
    let mut cfg = SuiteConfig::new(g, SEED);
    cfg.samples = Some(samples);
    run_suite(s, &cfg)
}

fn tag(g: &GroupDescriptor) -> String {
    format!("{}(p={},N={})", g.kind, g.p, g.level)
}

/// Scalar summary entries, for the report line.
fn brief(r: &SuiteReport) -> String {
    let mut parts = vec![];
    for (k, v) in &r.summary {
        match v {
            Value::Number(n) if n.is_f64() => parts.push(format!("{k}={:.3e}", n.as_f64().unwrap_or(f64::NAN))),
            Value::Number(n) => parts.push(format!("{k}={n}")),
            Value::Bool(b) => parts.push(format!("{k}={b}")),
            Value::Object(m) if k == "checks" => {
                let bad: Vec<&String> = m.iter().filter(|(_, v)| **v == Value::Bool(false)).map(|(k, _)| k).collect();
                if !bad.is_empty() {
                    parts.push(format!("failed={bad:?}"));
                }
            }
            _ => {}
        }
    }
    format!("{} {}: {}", r.suite, tag(&r.group), parts.join(" "))
}

fn num(r: &SuiteReport, key: &str) -> f64 {
    r.summary.get(key).and_then(Value::as_f64).unwrap_or(f64::NAN)
}

fn check(r: &SuiteReport, name: &str) -> bool {
    r.summary.get("checks").and_then(|c| c.get(name)) == Some(&Value::Bool(true))
}

fn suites_all(reports: Vec<SuiteReport>, extra: bool, note: String) -> Outcome {
    let pass = reports.iter().all(|r| r.pass) && extra;
    let mut lines: Vec<String> = reports.iter().map(brief).collect();
    if !note.is_empty() {
        lines.push(note);
    }
    Outcome::new(pass, lines.join("; "))
}

fn c1() -> Result<Outcome> {
    let t = Instant::now();
    // The Engel law needs p ≥ 5, so B4 is run at p = 5 only.
    let groups = [
        GroupDescriptor::heisenberg(3, 1, 2)?,
        GroupDescriptor::heisenberg(5, 1, 2)?,
        GroupDescriptor::engel4(5, 2)?,
        GroupDescriptor::g52(3, 2)?,
        GroupDescriptor::g52(5, 2)?,
    ];
    let mut reps = vec![];
    let mut counts_ok = true;
    for g in groups {
        let r = suite(Suite::Homomorphism, g)?;
        counts_ok &= check(&r, "level1_exact") && num(&r, "sampled_pairs") >= 1000.0;
        reps.push(r);
    }
    let secs = t.elapsed().as_secs_f64();
    Ok(suites_all(reps, counts_ok && secs < 60.0, format!("runtime {secs:.1}s (limit 60s)")))
}

fn c2() -> Result<Outcome> {
    let t = Instant::now();
    let g = GroupDescriptor::heisenberg(3, 1, 2)?;
    let r = suite_with(Suite::Plancherel, g, 100)?;
    let secs = t.elapsed().as_secs_f64();
    Ok(suites_all(vec![r], g.order() == 729 && secs < 10.0, format!("runtime {secs:.2}s (limit 10s)")))
}

fn c3() -> Result<Outcome> {
    let groups = [
        GroupDescriptor::abelian(3, 1, 2)?,
        GroupDescriptor::abelian(3, 2, 2)?,
        GroupDescriptor::abelian(5, 2, 2)?,
        GroupDescriptor::heisenberg(3, 1, 2)?,
        GroupDescriptor::heisenberg(5, 1, 2)?,
        GroupDescriptor::heisenberg(3, 2, 2)?,
        GroupDescriptor::engel4(5, 2)?,
        GroupDescriptor::g52(3, 2)?,
        GroupDescriptor::g52(5, 2)?,
    ];
    let mut ok = true;
    let mut bad = vec![];
    for g in groups {
        let irreps = enumerate_irreps(&g, 2)?;
        let dim = g.dim() as u32;
        let mut ball = 0u64;
        for n in 0..=2u32 {
            let sphere: u64 = irreps.iter().filter(|ir| ir.level == n).map(|ir| (ir.dim * ir.dim) as u64).sum();
            ball += sphere;
            let expect_sphere = if n == 0 { 1 } else { ipow(g.p, dim * n) - ipow(g.p, dim * (n - 1)) };
            if sphere != expect_sphere || ball != ipow(g.p, dim * n) {
                ok = false;
                bad.push(format!("{} n={n}", tag(&g)));
            }
        }
    }
    let detail = if ok {
        format!("{} groups, n ≤ 2, exact integer sums", groups.len())
    } else {
        format!("mismatch at {bad:?}")
    };
    Ok(Outcome::new(ok, detail))
}

fn c4() -> Result<Outcome> {
    let g = GroupDescriptor::heisenberg(3, 1, 2)?;
    let r = suite(Suite::Tensor, g)?;
    let ok = num(&r, "sampled_pairs") >= 100.0 && r.summary.get("closed_form_available") == Some(&Value::Bool(true));
    Ok(suites_all(vec![r], ok, String::new()))
}

fn c5() -> Result<Outcome> {
    let r = suite(Suite::VtLocality, GroupDescriptor::heisenberg(3, 1, 2)?)?;
    Ok(suites_all(vec![r], true, String::new()))
}

fn c6() -> Result<Outcome> {
    let reps = vec![
        suite(Suite::ProductRule, GroupDescriptor::heisenberg(3, 1, 1)?)?,
        suite(Suite::ProductRule, GroupDescriptor::g52(3, 1)?)?,
        suite(Suite::ProductRule, GroupDescriptor::engel4(5, 1)?)?,
    ];
    Ok(suites_all(reps, true, String::new()))
}

fn c7() -> Result<Outcome> {
    let r = suite(Suite::IAlpha, GroupDescriptor::heisenberg(3, 1, 3)?)?;
    let consts: Vec<String> = r
        .rows
        .iter()
        .map(|row| row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
        .collect();
    let note = format!("rows [{}]", consts.join(" | "));
    Ok(suites_all(vec![r], true, note))
}

fn c8() -> Result<Outcome> {
    let groups = [
        GroupDescriptor::heisenberg(3, 1, 2)?,
        GroupDescriptor::engel4(5, 2)?,
        GroupDescriptor::g52(3, 2)?,
    ];
    let mut pass = true;
    let mut shape = true;
    let mut parts = vec![];
    for g in groups {
        for n in 1..=2 {
            let rep = lower_bound_report(&g, n)?;
            pass &= rep.claim_holds;
            // Every listed counterexample is a genuine multiplicity ≥ 2.
            shape &= rep.violations.iter().all(|v| v.multiplicity >= 2) && rep.global_c > 0.0;
            let first = rep
                .violations
                .first()
                .map(|v| format!(" first={}@{:?}x{}", v.irrep, v.x, v.multiplicity))
                .unwrap_or_default();
            parts.push(format!(
                "{} n={n}: holds={} C={:.6} displayed={:.6} violations={}{first}",
                tag(&g),
                rep.claim_holds,
                rep.global_c,
                rep.displayed_ratio,
                rep.violation_count
            ));
        }
    }
    let mut o = Outcome::new(pass, parts.join("; "));
    o.expected_shape = shape && !pass;
    Ok(o)
}

fn c9() -> Result<Outcome> {
    let r = suite_with(Suite::Lp, GroupDescriptor::heisenberg(3, 1, 2)?, 100)?;
    Ok(suites_all(vec![r], true, String::new()))
}

fn c10() -> Result<Outcome> {
    let r = suite_with(Suite::Cz, GroupDescriptor::heisenberg(3, 1, 2)?, 50)?;
    Ok(suites_all(vec![r], true, String::new()))
}

fn c11() -> Result<Outcome> {
    let r = suite(Suite::HCondition, GroupDescriptor::heisenberg(3, 1, 2)?)?;
    Ok(suites_all(vec![r], true, String::new()))
}

fn singular_values(m: &ultraharm::CMat) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

fn c12() -> Result<Outcome> {
    let mut two_path = 0.0f64;
    let mut kernel_dims = std::collections::BTreeMap::new();
    let mut min_sv_l = f64::INFINITY;
    for level in 1..=2 {
        let g = GroupDescriptor::heisenberg(3, 1, level)?;
        let dual = Arc::new(Dual::new(&g, level)?);
        for alpha in [0.5, 1.0, 2.0] {
            let a = sub_laplacian_symbol(&dual, alpha)?;
            let b = sub_laplacian_symbol_integral(&dual, alpha)?;
            for (x, y) in a.blocks.iter().zip(&b.blocks) {
                two_path = two_path.max((x - y).norm());
            }
            for (ir, blk) in dual.irreps.iter().zip(&a.blocks) {
                // ‖ξ_3‖ > 1: a nonzero central parameter.
                if ir.is_trivial() || ir.params[2].level() == 0 {
                    continue;
                }
                let sv = singular_values(blk);
                let top = sv.iter().copied().fold(0.0, f64::max);
                let k = sv.iter().filter(|&&s| s <= 1e-9 * top.max(1.0)).count();
                *kernel_dims.entry(k).or_insert(0usize) += 1;
            }
            let l = script_l_symbol(&dual, alpha)?;
            for (ir, blk) in dual.irreps.iter().zip(&l.blocks) {
                if !ir.is_trivial() {
                    min_sv_l = min_sv_l.min(singular_values(blk).into_iter().fold(f64::INFINITY, f64::min));
                }
            }
        }
    }
    let kernel_ok = kernel_dims.keys().all(|&k| k == 1);
    let pass = two_path < 1e-9 && kernel_ok && min_sv_l > 1e-9;
    let mut o = Outcome::new(
        pass,
        format!(
            "two-path max diff {two_path:.3e} (<1e-9: {}); kernel dimension histogram {kernel_dims:?} (want all 1: {kernel_ok}); min singular value of script-L {min_sv_l:.3e} (>1e-9: {})",
            two_path < 1e-9,
            min_sv_l > 1e-9
        ),
    );
    // Only the kernel clause is out of reach: the sub-Laplacian blocks are invertible.
    o.expected_shape = two_path < 1e-9 && min_sv_l > 1e-9 && kernel_dims.keys().all(|&k| k == 0);
    Ok(o)
}

fn c13() -> Result<Outcome> {
    let r = suite(Suite::PhaseBound, GroupDescriptor::abelian(3, 1, 1)?)?;
    // Independent sweep straight from the definition.
    let mut worst = f64::INFINITY;
    for m in 1..=6u32 {
        let q = ipow(3, m);
        for k in (1..q).filter(|k| k % 3 != 0) {
            let th = 2.0 * std::f64::consts::PI * k as f64 / q as f64;
            let lhs = Complex64::new(th.cos() - 1.0, th.sin()).norm();
            worst = worst.min(lhs / (4.0 / q as f64));
        }
    }
    Ok(suites_all(vec![r], worst >= 1.0, format!("min |e^(2πik/3^m)−1|·3^m/4 = {worst:.6}")))
}

fn c14() -> Result<Outcome> {
    let g = GroupDescriptor::heisenberg(3, 1, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let values = (0..g.order())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let f = GridFunction::new(g, values)?;
    let t = Instant::now();
    let fh = Fourier::new(g, 3)?.forward(&f)?;
    let secs = t.elapsed().as_secs_f64();
    let pl = plancherel_with(&f, &fh);
    let gap = (pl.lhs - pl.rhs).abs();
    Ok(Outcome::new(
        secs < 120.0 && gap < 1e-9,
        format!("{} points, forward {secs:.2}s (limit 120s), Plancherel gap {gap:.3e}", g.order()),
    ))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Result<Outcome>); 14] = [
        (1, "representation validity", c1),
        (2, "Plancherel and inversion", c2),
        (3, "counting identities", c3),
        (4, "tensor calculus", c4),
        (5, "VT operator", c5),
        (6, "product rule", c6),
        (7, "I_alpha equivalence", c7),
        (8, "lower-bound property", c8),
        (9, "Littlewood-Paley", c9),
        (10, "Calderon-Zygmund", c10),
        (11, "condition H(t)", c11),
        (12, "sub-Laplacian", c12),
        (13, "abelian phase bound", c13),
        (14, "performance", c14),
    ];
    let filter: Option<u32> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let mut unexpected = 0;
    for (id, name, f) in criteria {
        if filter.is_some_and(|x| x != id) {
            continue;
        }
        let t = Instant::now();
        let o = f().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let known = KNOWN_FAILURES.contains(&id);
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && known && o.expected_shape { " [known]" } else { "" };
        println!("criterion {id:>2} {status}{note} {name} ({:.1}s): {}", t.elapsed().as_secs_f64(), o.detail);
        if !o.pass && !(known && o.expected_shape) {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
