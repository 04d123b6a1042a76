use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ultraharm::analysis::*;
use ultraharm::dual::{enumerate_irreps, Dual, Irrep};
use ultraharm::fourier::{Fourier, GridFunction, Symbol};
use ultraharm::group::{GroupDescriptor, Quotient};
use ultraharm::operators::vt_symbol;
use ultraharm::padic::{ipow, DualScalar};
use ultraharm::{CMat, Error};

fn random_fn(g: GroupDescriptor, rng: &mut ChaCha8Rng) -> GridFunction {
    let values = (0..g.order())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    GridFunction::new(g, values).unwrap()
}

fn one(g: GroupDescriptor) -> GridFunction {
    GridFunction::constant(g, Complex64::new(1.0, 0.0))
}

// Shell sum Σ_k (1 − p^{−D}) p^{−k(α+D)}, summed numerically.
fn shell_series(p: f64, dim: f64, alpha: f64) -> f64 {
    (0..400).map(|k| (1.0 - p.powf(-dim)) * p.powf(-(k as f64) * (alpha + dim))).sum()
}

#[test]
fn weighted_norm_examples() {
    let g = GroupDescriptor::heisenberg(3, 1, 2).unwrap();
    assert!((weighted_norm(&one(g), 1.0, &WeightSpec::full(0.0)).unwrap() - 1.0).abs() < 1e-14);
    for alpha in [0.5, 1.0, 2.0, -1.5] {
        let n = weighted_norm(&one(g), 2.0, &WeightSpec::full(alpha)).unwrap();
        assert!((n * n - shell_series(3.0, 3.0, alpha)).abs() < 1e-12, "α={alpha}");
        // Sub weight: the first two coordinates carry the whole weight.
        let s = weighted_norm(&one(g), 1.0, &WeightSpec::sub(alpha, 2)).unwrap();
        assert!((s - shell_series(3.0, 2.0, alpha)).abs() < 1e-12, "α={alpha}");
    }
    // Z_3 at level 1, α = 1: cells of norm 1, 1 and the identity cell average 1/4.
    let z = GroupDescriptor::abelian(3, 1, 1).unwrap();
    assert!((weighted_norm(&one(z), 1.0, &WeightSpec::full(1.0)).unwrap() - 0.75).abs() < 1e-15);
    assert!(matches!(weighted_norm(&one(z), 0.5, &WeightSpec::full(1.0)), Err(Error::Domain(_))));
    assert!(weighted_norm(&one(z), 1.0, &WeightSpec::full(-1.0)).is_err());
    // Weight in the |·|_G scale.
    let w = WeightSpec::from_group_scale(-0.5, 3);
    assert_eq!(w.alpha, -1.5);
}

#[test]
fn mu_alpha_properties() {
    for (g, alpha) in [
        (GroupDescriptor::heisenberg(3, 1, 3).unwrap(), -1.5),
        (GroupDescriptor::heisenberg(3, 1, 2).unwrap(), 1.0),
        (GroupDescriptor::engel4(5, 1).unwrap(), -2.0),
        (GroupDescriptor::abelian(3, 1, 4).unwrap(), -0.5),
    ] {
        let rep = mu_alpha_report(&g, alpha).unwrap();
        let c = (1.0 - (g.p as f64).powi(-(g.dim() as i32))) / (1.0 - (g.p as f64).powf(-(alpha + g.dim() as f64)));
        assert!((rep.ball_ratio_min - c).abs() < 1e-12 && (rep.ball_ratio_max - c).abs() < 1e-12);
        assert!(rep.closed_form_gap < 1e-13 * mu_alpha_ball(g.p, g.dim(), alpha, 0));
        assert!(rep.doubling.is_finite() && rep.doubling >= 1.0);
        assert!(rep.shell_ratio_min >= 1.0 && rep.shell_ratio_max.is_finite());
    }
    // Coset measures add up to the total.
    let g = GroupDescriptor::heisenberg(3, 1, 2).unwrap();
    let w = WeightSpec::full(-1.0);
    let total: f64 = coset_measures(&g, &w, 1).unwrap().iter().sum();
    assert!((total - mu_alpha_ball(3, 3, -1.0, 0)).abs() < 1e-13);
}

// Sphere sums of characters: Σ_{‖η‖=p^n} d_η χ_η(x) = |G/G_n| 1_{G_n}(x) − |G/G_{n−1}| 1_{G_{n−1}}(x).
// For x of depth k this gives I_α(x) = 2[p^{−(k+1)α} + (1 − p^{−dim}) Σ_{k+1<n≤n_max} p^{−nα}].
fn i_alpha_oracle(p: f64, dim: f64, alpha: f64, depth: u32, n_max: u32) -> f64 {
    if depth >= n_max {
        return 0.0;
    }
    let mut s = p.powf(-((depth + 1) as f64) * alpha);
    for n in depth + 2..=n_max {
        s += (1.0 - p.powf(-dim)) * p.powf(-(n as f64) * alpha);
    }
    2.0 * s
}

#[test]
fn i_alpha_matches_sphere_sums() {
    for (g, n_max) in [
        (GroupDescriptor::heisenberg(3, 1, 2).unwrap(), 3),
        (GroupDescriptor::g52(3, 1).unwrap(), 2),
        (GroupDescriptor::engel4(5, 1).unwrap(), 2),
        (GroupDescriptor::heisenberg(3, 2, 1).unwrap(), 1),
    ] {
        let scanner = IAlphaScanner::new(&g, n_max).unwrap();
        let sums = scanner.level_sums_on(&g).unwrap();
        let q = Quotient::new(g);
        for (r, s) in sums.iter().enumerate().skip(1) {
            let x = q.coords(r);
            let depth = g.depth(x).unwrap();
            for alpha in [0.5, 1.0, 2.0] {
                let got = i_alpha_from_sums(s, g.p, g.dim(), alpha);
                let want = i_alpha_oracle(g.p as f64, g.dim() as f64, alpha, depth, n_max);
                assert!((got - want).abs() < 1e-9 * want.max(1.0), "{:?} x={x:?}", g.kind);
            }
        }
    }
}

#[test]
fn i_alpha_abelian_brute_force() {
    // Z_3, x of norm 1/3, α = 1, characters to level 4 summed directly.
    let g = GroupDescriptor::abelian(3, 1, 1).unwrap();
    let x = [0u64];
    assert!(matches!(i_alpha(&g, &x, 1.0, 4), Err(Error::Domain(_))));
    let g = GroupDescriptor::abelian(3, 1, 2).unwrap();
    let x = [3u64];
    let rep = i_alpha(&g, &x, 1.0, 4).unwrap();
    let mut brute = 0.0;
    for a in 1..81u64 {
        let level = 4 - ultraharm::padic::valuation(a, 3).unwrap();
        let e = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * ((a * 3) % 81) as f64 / 81.0);
        brute += 3f64.powi(level as i32).powf(-2.0) * (e - 1.0).norm_sqr();
    }
    assert!((rep.partial_sum - brute).abs() < 1e-12);
    assert!((rep.norm_power - 1.0 / 3.0).abs() < 1e-15);
    assert!((rep.ratio_to_norm - brute * 3.0).abs() < 1e-12);
    assert!(rep.tail_bound > 0.0 && (rep.tail_bound_2d * 2.0 - rep.tail_bound).abs() < 1e-15);
    // The trivial irrep contributes nothing.
    let sums = IAlphaScanner::new(&g, 4).unwrap().level_sums(&x).unwrap();
    assert_eq!(sums[0], 0.0);
    assert!(i_alpha(&g, &x, 0.0, 2).is_err());
}

#[test]
fn i_alpha_tail_below_bound() {
    let g = GroupDescriptor::heisenberg(3, 1, 2).unwrap();
    let q = Quotient::new(g);
    let coarse = IAlphaScanner::new(&g, 2).unwrap().level_sums_on(&g).unwrap();
    let fine = IAlphaScanner::new(&g, 3).unwrap().level_sums_on(&g).unwrap();
    for alpha in [0.5, 1.0, 2.0] {
        let bound = i_alpha_tail_bound(3, 3, alpha, 2);
        for r in 1..q.len() {
            let tail = i_alpha_from_sums(&fine[r], 3, 3, alpha) - i_alpha_from_sums(&coarse[r], 3, 3, alpha);
            assert!(tail >= -1e-12 && tail <= bound, "tail {tail} bound {bound}");
        }
    }
    let rows = i_alpha_scan(&g, &[1.0], 3).unwrap();
    assert!(rows[0].ratio_min > 0.0 && rows[0].ratio_max.is_finite());
}

// Numeric oracle: the eigenvalue-1 multiplicity of a unitary matrix is the dimension of
// ker(π(x) − I), read off from singular values.
fn numeric_multiplicity(m: &CMat) -> (usize, bool) {
    let n = m.nrows();
    let diff = m - CMat::identity(n, n);
    let identity = diff.norm() < 1e-9;
    let sv = diff.singular_values();
    (sv.iter().filter(|&&s| s < 1e-9).count(), identity)
}

#[test]
fn eigenvalue_counts_match_numeric_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (g, samples) in [
        (GroupDescriptor::heisenberg(3, 1, 1).unwrap(), usize::MAX),
        (GroupDescriptor::g52(3, 1).unwrap(), usize::MAX),
        (GroupDescriptor::engel4(5, 1).unwrap(), 3000),
        (GroupDescriptor::heisenberg(3, 1, 2).unwrap(), 3000),
        (GroupDescriptor::heisenberg(3, 2, 1).unwrap(), 1500),
        (GroupDescriptor::engel4(5, 2).unwrap(), 300),
    ] {
        let irreps: Vec<Irrep> = enumerate_irreps(&g, g.level).unwrap();
        let q = Quotient::new(g);
        let check = |ir: &Irrep, x: &[u64]| {
            let ev = ir.evaluator(&g).unwrap();
            let fast = ev.eigenvalue_one_multiplicity(x);
            let numeric = numeric_multiplicity(&ir.matrix(&g, x).unwrap());
            assert_eq!(fast, numeric, "{} at {x:?}", ir.id());
        };
        if samples == usize::MAX {
            for ir in &irreps {
                for r in 0..q.len() {
                    check(ir, q.coords(r));
                }
            }
        } else {
            for _ in 0..samples {
                let ir = &irreps[rng.gen_range(0..irreps.len())];
                let r = rng.gen_range(0..q.len());
                check(ir, q.coords(r));
            }
        }
    }
}

#[test]
fn lower_bound_reports() {
    // Level 1 of H_1(Z_3): 3-dim irreps have 2 or 3 eigenvalues different from 1.
    let g = GroupDescriptor::heisenberg(3, 1, 1).unwrap();
    let rep = lower_bound_report(&g, 1).unwrap();
    assert!(rep.claim_holds);
    assert!((rep.global_c - 2.0 / 3.0).abs() < 1e-15);
    for row in &rep.per_irrep {
        if row.dim == 1 {
            assert_eq!(row.min_ratio, 1.0);
        } else {
            assert!(row.max_one_multiplicity <= 1);
        }
    }
    assert!((rep.displayed_ratio - 26.0 / 27.0).abs() < 1e-15);
    // Level 2: ξ_3 = 1/9 at x = (0, 3, 0) has the eigenvalue 1 three times.
    let g = GroupDescriptor::heisenberg(3, 1, 2).unwrap();
    let rep = lower_bound_report(&g, 2).unwrap();
    assert!(!rep.claim_holds);
    let ir = Irrep::parse_id(&g, "heisenberg:2:0/1,0/1,1/9").unwrap();
    let m = ir.matrix(&g, &[0, 3, 0]).unwrap();
    assert_eq!(numeric_multiplicity(&m), (3, false));
    assert!(rep.violations.iter().any(|v| v.irrep == ir.id() && v.x == vec![0, 3, 0]));
    // B_4 at level 1: the quadratic phase has two roots.
    let g = GroupDescriptor::engel4(5, 1).unwrap();
    let ir = Irrep::parse_id(&g, "engel4:1:0/1,0/1,0/1,1/5").unwrap();
    assert_eq!(numeric_multiplicity(&ir.matrix(&g, &[0, 1, 1, 0]).unwrap()), (2, false));
    assert!(!lower_bound_report(&g, 1).unwrap().claim_holds);
    // G_{5,2} at level 1 satisfies the claim.
    let g = GroupDescriptor::g52(3, 1).unwrap();
    assert!(lower_bound_report(&g, 1).unwrap().claim_holds);
}

#[test]
fn norm_equivalence_constant_function() {
    let g = GroupDescriptor::heisenberg(3, 1, 1).unwrap();
    for alpha in [0.5, 1.0, 2.0] {
        let rep = norm_equiv_check(&one(g), alpha, 1).unwrap();
        assert!((rep.lhs - shell_series(3.0, 3.0, alpha)).abs() < 1e-12);
        let rhs = 2.0 * (1.0 - 1.0 / 27.0) * 3f64.powf(-alpha);
        assert!((rep.rhs - rhs).abs() < 1e-12);
    }
    assert!(norm_equiv_check(&one(g), -1.0, 1).is_err());
}

// Per η, Σ_ξ d_ξ ‖Δ_η f̂(ξ)‖² = ∫ |f|² ‖η(x) − I‖²_HS, so the sum over η is ∫ |f|² I_α.
#[test]
fn norm_equivalence_matches_weighted_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (g, n_max) in [
        (GroupDescriptor::heisenberg(3, 1, 1).unwrap(), 1),
        (GroupDescriptor::heisenberg(3, 1, 1).unwrap(), 2),
        (GroupDescriptor::g52(3, 1).unwrap(), 1),
    ] {
        let f = random_fn(g, &mut rng);
        let q = Quotient::new(g);
        for alpha in [0.5, 1.5] {
            let rep = norm_equiv_check(&f, alpha, n_max).unwrap();
            // Cells of G/G_N off the identity are evaluated pointwise; the identity cell
            // splits into subcells when n_max > N.
            let fine = g.at_level(n_max.max(g.level)).unwrap();
            let fq = Quotient::new(fine);
            let proj = fq.projection(g.level);
            let mut expect = 0.0;
            for r in 0..fq.len() {
                let x = fq.coords(r);
                let i = match fine.depth(x) {
                    Some(k) => i_alpha_oracle(3.0, g.dim() as f64, alpha, k, n_max),
                    None => 0.0,
                };
                expect += f.values[proj[r]].norm_sqr() * i / fq.len() as f64;
            }
            assert!((rep.rhs - expect).abs() < 1e-10, "{} vs {}", rep.rhs, expect);
            assert!(rep.ratio > 0.0 && rep.ratio.is_finite());
            let _ = &q;
        }
    }
}

#[test]
fn norm_equivalence_abelian_plain_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let g = GroupDescriptor::abelian(3, 1, 2).unwrap();
    let f = random_fn(g, &mut rng);
    // Plain DFT and plain differences f̂(ξ+η) − f̂(ξ).
    let fh: Vec<Complex64> = (0..9u64)
        .map(|a| {
            (0..9u64)
                .map(|x| f.values[x as usize] * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (a * x % 9) as f64 / 9.0))
                .sum::<Complex64>()
                / 9.0
        })
        .collect();
    let norm = |a: u64| if a == 0 { 1.0 } else { 3f64.powi(2 - ultraharm::padic::valuation(a, 3).unwrap() as i32) };
    let alpha = 1.0;
    let mut brute = 0.0;
    for eta in 1..9u64 {
        let s: f64 = (0..9u64).map(|xi| (fh[((xi + eta) % 9) as usize] - fh[xi as usize]).norm_sqr()).sum();
        brute += norm(eta).powf(-(alpha + 1.0)) * s;
    }
    let rep = norm_equiv_check(&f, alpha, 2).unwrap();
    assert!((rep.rhs - brute).abs() < 1e-12);
    let lhs = weighted_norm(&f, 2.0, &WeightSpec::full(alpha)).unwrap().powi(2);
    assert!((rep.lhs - lhs).abs() < 1e-15);
}

#[test]
fn sobolev_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let g = GroupDescriptor::heisenberg(3, 1, 1).unwrap();
    let f = random_fn(g, &mut rng);
    assert!((sobolev_norm(&f, 0.0, 2.0, false).unwrap() - f.lr_norm(2.0)).abs() < 1e-12);
    assert!((sobolev_norm(&f, 0.0, 3.0, false).unwrap() - f.lr_norm(3.0)).abs() < 1e-12);
    assert!(sobolev_norm(&f, 1.0, 1.0, false).is_err());
    let z = GroupDescriptor::abelian(3, 1, 1).unwrap();
    let chi = GridFunction::character(z, &[DualScalar::parse(3, "2/3").unwrap()]).unwrap();
    let c = Complex64::new(0.5, -2.0);
    let f = GridFunction { values: chi.values.iter().map(|v| v * c).collect(), ..chi };
    for beta in [-1.0, 0.5, 2.0] {
        let s = sobolev_norm(&f, beta, 2.0, true).unwrap();
        assert!((s - 3f64.powf(beta) * c.norm()).abs() < 1e-12);
    }
    // Constant functions vanish in the homogeneous norm.
    assert!(sobolev_norm(&one(z), 1.0, 2.0, true).unwrap() < 1e-14);
    // ‖f‖_{H^{−α/2}} against ‖f‖_{L²_α}: the ratio stays bounded.
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f = random_fn(g, &mut rng);
        for alpha in [0.5, 1.0, 2.0] {
            let a = sobolev_norm(&f, -alpha / 2.0, 2.0, false).unwrap();
            let b = weighted_norm(&f, 2.0, &WeightSpec::full(alpha)).unwrap();
            worst = worst.max(a / b);
        }
    }
    assert!(worst.is_finite() && worst > 0.0);
}

// Fourier path: f_n = F⁻¹[1_{sphere n} f̂].
fn projections_by_fourier(f: &GridFunction) -> Vec<GridFunction> {
    let engine = Fourier::new(f.group, f.level).unwrap();
    let fh = engine.forward(f).unwrap();
    (0..=f.level)
        .map(|n| {
            let blocks = engine
                .dual
                .irreps
                .iter()
                .zip(&fh.blocks)
                .map(|(ir, b)| if ir.level == n { b.clone() } else { b * Complex64::new(0.0, 0.0) })
                .collect();
            engine
                .inverse(&Symbol {
                    dual: engine.dual.clone(),
                    blocks,
                })
                .unwrap()
        })
        .collect()
}

#[test]
fn square_function_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for g in [
        GroupDescriptor::heisenberg(3, 1, 2).unwrap(),
        GroupDescriptor::engel4(5, 1).unwrap(),
        GroupDescriptor::abelian(3, 2, 2).unwrap(),
    ] {
        let f = random_fn(g, &mut rng);
        let a = spherical_projections(&f);
        let b = projections_by_fourier(&f);
        for (x, y) in a.iter().zip(&b) {
            assert!(x.sup_distance(y) < 1e-9);
        }
        let s = square_function(&f);
        assert!((s.lr_norm(2.0) - f.lr_norm(2.0)).abs() < 1e-9);
        let sone = square_function(&one(g));
        assert!(sone.values.iter().all(|v| (v - 1.0).norm() < 1e-12));
        // A single-sphere function: Sf = |f|.
        let single = &b[1];
        let ss = square_function(single);
        for (u, v) in ss.values.iter().zip(&single.values) {
            assert!((u.re - v.norm()).abs() < 1e-9);
        }
    }
    let g = GroupDescriptor::heisenberg(3, 1, 2).unwrap();
    let f = random_fn(g, &mut rng);
    for (r, alpha) in [(1.5, 0.0), (4.0, 1.0)] {
        let ratio = lp_ratio(&f, r, &WeightSpec::full(alpha)).unwrap();
        assert!(ratio > 0.0 && ratio.is_finite());
    }
}

#[test]
fn cz_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let g = GroupDescriptor::heisenberg(3, 1, 2).unwrap();
    let f = random_fn(g, &mut rng);
    let max = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let res = cz_decompose(&f, max, -1.0).unwrap();
    assert!(res.pieces.is_empty());
    assert_eq!(res.phi0, f);
    // A spike at one cell: one piece containing it.
    let mut spike = GridFunction::constant(g, Complex64::new(0.0, 0.0));
    spike.values[100] = Complex64::new(1000.0, 0.0);
    let res = cz_decompose(&spike, 1.0, -0.5).unwrap();
    assert_eq!(res.pieces.len(), 1);
    let (rep, m) = &res.pieces[0].coset;
    let pm = ipow(3, *m);
    assert!(Quotient::new(g).coords(100).iter().zip(rep).all(|(&a, &b)| a % pm == b));
    assert!(cz_decompose(&f, 0.0, -1.0).is_err());
    assert!(cz_decompose(&f, 1.0, 0.5).is_err());
    assert!(cz_decompose(&f, 1.0, -3.0).is_err());
}

fn check_cz(phi: &GridFunction, gamma: f64, alpha: f64) {
    let res = cz_decompose(phi, gamma, alpha).unwrap();
    let g = phi.group;
    let q = Quotient::new(g);
    let w = WeightSpec::full(alpha);
    let mut sum = res.phi0.clone();
    for pc in &res.pieces {
        for (s, v) in sum.values.iter_mut().zip(&pc.function.values) {
            *s += v;
        }
        assert!(pc.function.integral().norm() < 1e-12);
    }
    assert!(sum.sup_distance(phi) < 1e-12);
    // Disjoint cosets, supports inside them.
    let mut cover = vec![0; q.len()];
    let mut measure = 0.0;
    for pc in &res.pieces {
        let (rep, m) = &pc.coset;
        let pm = ipow(g.p, *m);
        let mut mu = 0.0;
        let cw = w.cell_weights(&g).unwrap();
        for r in 0..q.len() {
            let inside = q.coords(r).iter().zip(rep).all(|(&a, &b)| a % pm == b);
            if inside {
                cover[r] += 1;
                mu += cw[r] / q.len() as f64;
            } else {
                assert_eq!(pc.function.values[r], Complex64::new(0.0, 0.0));
            }
        }
        assert!((mu - pc.measure).abs() < 1e-12);
        measure += mu;
    }
    assert!(cover.iter().all(|&c| c <= 1));
    let l1 = weighted_norm(phi, 1.0, &w).unwrap();
    assert!(measure <= l1 / gamma * (1.0 + 1e-12));
    assert!(res.constants.measure_ratio <= 1.0 + 1e-12);
    assert!(res.constants.l1_sum_ratio.is_finite() && res.constants.sup_ratio.is_finite());
    assert!(res.checks.disjoint && res.checks.supported);
}

#[test]
fn cz_properties_on_a_gamma_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let g = GroupDescriptor::heisenberg(3, 1, 2).unwrap();
    for i in 0..20 {
        let mut f = random_fn(g, &mut rng);
        for v in f.values.iter_mut() {
            if rng.gen_bool(0.9) {
                *v *= 0.01;
            }
        }
        let gamma = 0.05 * (1 + i) as f64;
        check_cz(&f, gamma, -[0.0, 0.5, 1.0, 2.5][i % 4]);
    }
}

#[test]
fn condition_h_vanishes_for_radial_symbols() {
    let g = GroupDescriptor::heisenberg(3, 1, 2).unwrap();
    let dual = Arc::new(Dual::new(&g, 2).unwrap());
    let vt = vt_symbol(&dual, 1.0).unwrap();
    let lp = rademacher_symbol(&dual, &[1.0, -1.0, 1.0]).unwrap();
    for sigma in [&vt, &lp] {
        for t in [1.0, 1.5, 2.0] {
            let rep = condition_h_report(sigma, t, 2).unwrap();
            assert!(rep.all_zero && rep.pass);
            assert!(rep.max_measured <= rep.zero_tol);
            assert_eq!(rep.table.len(), 3 * 3);
        }
    }
    assert!(rademacher_symbol(&dual, &[1.0]).is_err());
    assert!(condition_h_report(&vt, 0.5, 2).is_err());
    assert!(matches!(condition_h_report(&vt, 1.0, 3), Err(Error::Coverage(_))));
}

#[test]
fn condition_h_random_symbol_matches_direct_integrals() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let g = GroupDescriptor::abelian(3, 1, 3).unwrap();
    let dual = Arc::new(Dual::new(&g, 3).unwrap());
    let blocks: Vec<CMat> = dual
        .irreps
        .iter()
        .map(|_| CMat::from_element(1, 1, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    let sigma = Symbol {
        dual: dual.clone(),
        blocks: blocks.clone(),
    };
    let t = 1.5;
    let rep = condition_h_report(&sigma, t, 3).unwrap();
    assert!(rep.fitted_b.is_finite() && rep.fitted_b > 0.0);
    for row in &rep.table {
        assert!(row.measured <= row.bound * (1.0 + 1e-12) || row.measured <= rep.zero_tol);
    }
    // Direct: kernel by plain inverse DFT on Z/27, differences x − y.
    let val = |a: u64| dual.irreps.iter().position(|ir| ir.params[0].numerator_at(3) == a).unwrap();
    for k in 0..=3u32 {
        let kernel: Vec<Complex64> = (0..27u64)
            .map(|x| {
                (0..27u64)
                    .filter(|&a| dual.irreps[val(a)].level <= k)
                    .map(|a| blocks[val(a)][(0, 0)] * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (a * x % 27) as f64 / 27.0))
                    .sum()
            })
            .collect();
        let depth = |x: u64| if x == 0 { 3 } else { ultraharm::padic::valuation(x, 3).unwrap() };
        for row in rep.table.iter().filter(|r| r.k == k) {
            let mut best: f64 = 0.0;
            for y in (0..27u64).filter(|&y| depth(y) >= row.l) {
                let s: f64 = (0..27u64)
                    .filter(|&x| depth(x) == row.n)
                    .map(|x| (kernel[((x + 27 - y) % 27) as usize] - kernel[x as usize]).norm().powf(t) / 27.0)
                    .sum();
                best = best.max(s.powf(1.0 / t));
            }
            assert!((best - row.measured).abs() < 1e-9, "row {:?}", (row.k, row.l, row.n));
        }
    }
}

#[test]
fn mikhlin_constants() {
    let g = GroupDescriptor::heisenberg(3, 1, 2).unwrap();
    let dual = Arc::new(Dual::new(&g, 2).unwrap());
    let vt = vt_symbol(&dual, 1.0).unwrap();
    let id = Symbol::identity(dual.clone());
    for v in MikhlinVariant::ALL {
        for s in [&vt, &id] {
            let rep = mikhlin_report(s, 1.0, v, 1.5).unwrap();
            // Exact zero, up to roundoff blown up by ‖ξ‖^decay.
            let scale = 9f64.powf(rep.decay) * s.max_block_norm();
            assert!(rep.constant < 1e-14 * scale, "{v:?}");
            assert!(rep.pairs > 0);
        }
    }
    assert_eq!("lr-alpha".parse::<MikhlinVariant>().unwrap(), MikhlinVariant::LrAlpha);
    assert_eq!(MikhlinVariant::Sub3.exponents(1.0, 3, 2, 1.5), (2.5, 2.5 + 2.0 * (1.0 / 1.5 + 0.5)));
    // Abelian: Δ_η σ(ξ) = σ(ξ+η) − σ(ξ), compared with plain differences.
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let z = GroupDescriptor::abelian(3, 1, 2).unwrap();
    let zd = Arc::new(Dual::new(&z, 2).unwrap());
    let sigma = Symbol::from_fn(zd.clone(), |_| CMat::from_element(1, 1, Complex64::new(0.0, 0.0)));
    let blocks: Vec<CMat> = sigma
        .blocks
        .iter()
        .map(|_| CMat::from_element(1, 1, Complex64::new(rng.gen_range(-1.0..1.0), 0.0)))
        .collect();
    let sigma = Symbol { dual: zd.clone(), blocks };
    let alt = rademacher_symbol(&zd, &[1.0, -1.0, 1.0]).unwrap();
    for s in [&sigma, &alt] {
        let rep = mikhlin_report(s, 1.0, MikhlinVariant::L2Alpha, 2.0).unwrap();
        let mut brute: f64 = 0.0;
        for eta in &zd.irreps {
            for xi in &zd.irreps {
                if eta.is_trivial() || eta.level >= xi.level {
                    continue;
                }
                let sum = Irrep::new(&z, vec![eta.params[0].add(&xi.params[0])]).unwrap();
                let d = (s.get(&sum).unwrap()[(0, 0)] - s.get(xi).unwrap()[(0, 0)]).norm();
                brute = brute.max(d * eta.dual_norm().powf(-rep.beta) * xi.dual_norm().powf(rep.decay));
            }
        }
        assert!((rep.constant - brute).abs() < 1e-12);
    }
    let zs = mikhlin_report(&sigma, 1.0, MikhlinVariant::Sub1, 2.0);
    assert!(matches!(zs, Err(Error::InvalidGroup(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // The Faulhaber cycle sums agree with walking the permutation cycles row by row.
    #[test]
    fn fast_counts_match_cycle_walk(pick in 0usize..10_000, xs in proptest::collection::vec(0u64..625, 4)) {
        let g = GroupDescriptor::engel4(5, 2).unwrap();
        let irreps = enumerate_irreps(&g, 2).unwrap();
        let ir = &irreps[pick % irreps.len()];
        let ev = ir.evaluator(&g).unwrap();
        let x: Vec<u64> = xs.iter().map(|c| c % 25).collect();
        let rows = ev.rows(&x);
        let q = g.modulus();
        let mut seen = vec![false; ir.dim];
        let mut count = 0;
        for s in 0..ir.dim {
            if seen[s] { continue; }
            let (mut h, mut sum) = (s, 0u64);
            while !seen[h] { seen[h] = true; sum = (sum + rows[h].1) % q; h = rows[h].0; }
            if sum == 0 { count += 1; }
        }
        prop_assert_eq!(ev.eigenvalue_one_multiplicity(&x).0, count);
    }

    #[test]
    fn cz_invariants_hold(seed in 0u64..1000, gamma in 0.05f64..3.0, a in 0.0f64..2.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GroupDescriptor::heisenberg(3, 1, 1).unwrap();
        let f = random_fn(g, &mut rng);
        check_cz(&f, gamma, -a);
    }

    #[test]
    fn square_function_preserves_l2(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GroupDescriptor::g52(3, 1).unwrap();
        let f = random_fn(g, &mut rng);
        prop_assert!((square_function(&f).lr_norm(2.0) - f.lr_norm(2.0)).abs() < 1e-9);
    }
}
