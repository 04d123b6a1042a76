use proptest::prelude::*;
use ultraharm::group::{GroupDescriptor, GroupKind, Quotient};
use ultraharm::padic::{inv2, ipow};
use ultraharm::Error;

type Mat = Vec<Vec<u64>>;

fn matmul(a: &Mat, b: &Mat, q: u64) -> Mat {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j] % q).sum::<u64>() % q).collect())
        .collect()
}

// Unipotent matrix realizations, used as an independent check of the coordinate laws.
fn realize(g: &GroupDescriptor, x: &[u64]) -> Mat {
    let q = g.modulus();
    match g.kind {
        GroupKind::Abelian => {
            let n = g.d + 1;
            let mut m: Mat = (0..n).map(|i| (0..n).map(|j| (i == j) as u64).collect()).collect();
            for j in 0..g.d {
                m[0][j + 1] = x[j];
            }
            m
        }
        GroupKind::Heisenberg => {
            let d = g.d;
            let n = d + 2;
            let mut m: Mat = (0..n).map(|i| (0..n).map(|j| (i == j) as u64).collect()).collect();
            for j in 0..d {
                m[0][1 + j] = x[j];
                m[1 + j][n - 1] = x[d + j];
            }
            m[0][n - 1] = x[2 * d];
            m
        }
        GroupKind::Engel4 => {
            let h = x[0] * x[0] % q * inv2(q) % q;
            vec![
                vec![1, x[0], h, x[3]],
                vec![0, 1, x[0], x[2]],
                vec![0, 0, 1, x[1]],
                vec![0, 0, 0, 1],
            ]
        }
        GroupKind::G52 => vec![
            vec![1, x[0], x[3], x[4]],
            vec![0, 1, x[1], x[2]],
            vec![0, 0, 1, 0],
            vec![0, 0, 0, 1],
        ],
    }
}

fn groups() -> Vec<GroupDescriptor> {
    vec![
        GroupDescriptor::abelian(3, 2, 3).unwrap(),
        GroupDescriptor::heisenberg(3, 1, 3).unwrap(),
        GroupDescriptor::heisenberg(5, 2, 2).unwrap(),
        GroupDescriptor::engel4(5, 3).unwrap(),
        GroupDescriptor::engel4(7, 2).unwrap(),
        GroupDescriptor::g52(3, 3).unwrap(),
        GroupDescriptor::g52(5, 2).unwrap(),
    ]
}

#[test]
fn descriptors() {
    let h = GroupDescriptor::heisenberg(3, 2, 2).unwrap();
    assert_eq!((h.dim(), h.kappa(), h.order()), (5, 4, 9usize.pow(5)));
    assert_eq!(GroupDescriptor::engel4(5, 1).unwrap().kappa(), 2);
    assert_eq!(GroupDescriptor::g52(3, 1).unwrap().kappa(), 3);
    assert!(matches!(GroupDescriptor::heisenberg(4, 1, 1), Err(Error::NotPrime(4))));
    // The Engel law needs 1/2.
    assert!(GroupDescriptor::engel4(2, 2).is_err());
    assert!(GroupDescriptor::engel4(3, 1).is_err());
    assert!(GroupDescriptor::abelian(2, 1, 40).is_err());
    assert!(GroupDescriptor::g52(2, 3).is_err());
    assert!(h.at_level(0).is_err());
    assert_eq!("b4".parse::<GroupKind>().unwrap(), GroupKind::Engel4);
    assert!("sl2".parse::<GroupKind>().is_err());
    assert_eq!(h.element(&[0, 0, 0, 0, 10]).unwrap().0, vec![0, 0, 0, 0, 1]);
    assert!(h.element(&[0, 0]).is_err());
    assert!(h.multiply(&[0, 0], &[0, 0, 0, 0, 0]).is_err());
}

#[test]
fn laws_match_matrix_realizations() {
    for g in groups() {
        let q = g.modulus();
        let step = (g.order() / 400).max(1);
        for r in (0..g.order()).step_by(step) {
            let x = &g.unrank(r).0[..];
            let inv = g.inverse(x).unwrap();
            let id: Mat = realize(&g, &g.identity().0);
            assert_eq!(matmul(&realize(&g, &inv.0), &realize(&g, x), q), id, "{:?}", g.kind);
            for s in (0..g.order()).step_by(step * 7 + 1) {
                let y = &g.unrank(s).0[..];
                let xy = g.multiply(x, y).unwrap();
                assert_eq!(realize(&g, &xy.0), matmul(&realize(&g, x), &realize(&g, y), q), "{:?}", g.kind);
            }
        }
    }
}

#[test]
fn rank_and_projection() {
    let g = GroupDescriptor::engel4(5, 2).unwrap();
    let qt = Quotient::new(g);
    for r in [0usize, 1, 24, 25, 390_624] {
        assert_eq!(g.rank(&g.unrank(r).0), r);
        assert_eq!(qt.coords(r), &g.unrank(r).0[..]);
    }
    // Rank counts coordinate 0 first.
    assert_eq!(g.unrank(1).0, vec![1, 0, 0, 0]);
    assert_eq!(g.unrank(25).0, vec![0, 1, 0, 0]);
    let proj = qt.projection(1);
    let coarse = g.at_level(1).unwrap();
    for r in (0..qt.len()).step_by(97) {
        let x: Vec<u64> = qt.coords(r).iter().map(|c| c % 5).collect();
        assert_eq!(proj[r], coarse.rank(&x));
    }
    let small = GroupDescriptor::heisenberg(3, 1, 1).unwrap();
    let sq = Quotient::new(small);
    let table = sq.right_division_table();
    for x in 0..sq.len() {
        for y in 0..sq.len() {
            let yi = small.inverse(sq.coords(y)).unwrap();
            let z = small.multiply(sq.coords(x), &yi.0).unwrap();
            assert_eq!(table[x * sq.len() + y] as usize, small.rank(&z.0));
        }
    }
}

#[test]
fn norms() {
    let g = GroupDescriptor::heisenberg(3, 1, 3).unwrap();
    assert_eq!(g.depth(&[0, 0, 0]), None);
    assert_eq!(g.group_norm(&[0, 0, 0]), 0.0);
    assert_eq!(g.depth(&[9, 3, 0]), Some(1));
    assert_eq!(g.group_norm(&[9, 3, 0]), 1.0 / 3.0);
    assert_eq!(g.vilenkin_norm(&[9, 3, 0]), 1.0 / 27.0);
    assert_eq!(g.sub_norm(&[9, 0, 1], 2).unwrap(), 1.0 / 9.0);
    assert!(g.sub_norm(&[9, 0, 1], 0).is_err());
    assert!(g.in_subgroup(&[9, 18, 0], 2));
    assert!(!g.in_subgroup(&[9, 18, 1], 1));
    assert_eq!(g.cell_measure(), 1.0 / 19683.0);
}

fn arb_pair() -> impl Strategy<Value = (usize, Vec<u64>, Vec<u64>, Vec<u64>)> {
    (0..7usize, prop::collection::vec(any::<u64>(), 15)).prop_map(|(i, raw)| {
        let g = groups()[i];
        let q = g.modulus();
        let n = g.dim();
        let v: Vec<u64> = raw.iter().map(|c| c % q).collect();
        (i, v[..n].to_vec(), v[5..5 + n].to_vec(), v[10..10 + n].to_vec())
    })
}

proptest! {
    #[test]
    fn group_axioms((i, x, y, z) in arb_pair()) {
        let g = groups()[i];
        let xy = g.multiply(&x, &y).unwrap();
        let yz = g.multiply(&y, &z).unwrap();
        prop_assert_eq!(g.multiply(&xy.0, &z).unwrap(), g.multiply(&x, &yz.0).unwrap());
        let e = g.identity();
        prop_assert_eq!(&g.multiply(&x, &e.0).unwrap().0, &x);
        let xi = g.inverse(&x).unwrap();
        prop_assert_eq!(g.multiply(&xi.0, &x).unwrap(), e.clone());
        prop_assert_eq!(g.multiply(&x, &xi.0).unwrap(), e);
    }

    // ‖·‖_p is an ultrametric, inversion- and conjugation-invariant norm.
    #[test]
    fn norm_properties((i, x, y, _z) in arb_pair()) {
        let g = groups()[i];
        let xy = g.multiply(&x, &y).unwrap();
        prop_assert!(g.group_norm(&xy.0) <= g.group_norm(&x).max(g.group_norm(&y)));
        let xi = g.inverse(&x).unwrap();
        prop_assert_eq!(g.group_norm(&xi.0), g.group_norm(&x));
        let yi = g.inverse(&y).unwrap();
        let c = g.multiply(&g.multiply(&y, &x).unwrap().0, &yi.0).unwrap();
        prop_assert_eq!(g.group_norm(&c.0), g.group_norm(&x));
        // Each G_n is normal.
        for n in 0..=g.level {
            prop_assert_eq!(g.in_subgroup(&c.0, n), g.in_subgroup(&x, n));
        }
    }

    // Reduction mod p^m is a homomorphism onto G/G_m.
    #[test]
    fn reduction_is_a_homomorphism((i, x, y, _z) in arb_pair(), m in 1u32..3) {
        let g = groups()[i];
        let c = g.at_level(m.min(g.level)).unwrap();
        let pm = ipow(g.p, c.level);
        let red = |v: &[u64]| v.iter().map(|a| a % pm).collect::<Vec<_>>();
        let xy = g.multiply(&x, &y).unwrap();
        prop_assert_eq!(red(&xy.0), c.multiply(&red(&x), &red(&y)).unwrap().0);
    }
}
