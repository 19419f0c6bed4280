use std::collections::BTreeMap;

use efsep::abgroup::{are_isomorphic, is_partial_iso, GroupElement, Presentation};
use efsep::constructions::{
    build_projections, build_truncated_pair, canonical_ladders, check_family, check_standard_form, BuildOptions,
    GuessScript, HSpec, StageClass,
};
use efsep::efgame::{solve_game, GameSpec, Player, SolveOptions};
use efsep::equivalences::{is_level_preserving, search_level_preserving, stable_quotient_equiv, Filtration, SearchOptions};
use efsep::trees::{build_tree, tree_product, Tree};
use efsep::zlinalg::{hnf, snf, IntMatrix};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = IntMatrix> {
    (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-12i64..=12, r * c).prop_map(move |v| {
            let rows: Vec<&[i64]> = v.chunks(c).collect();
            IntMatrix::from_i64(&rows)
        })
    })
}

fn tree() -> impl Strategy<Value = Tree> {
    proptest::collection::vec(any::<u8>(), 1..7).prop_map(|seeds| {
        // parent[i] is a root marker or some earlier node
        let parents: Vec<Option<usize>> = seeds
            .iter()
            .enumerate()
            .map(|(i, &s)| if i == 0 || s % 4 == 0 { None } else { Some(s as usize % i) })
            .collect();
        build_tree(&parents).unwrap()
    })
}

fn small_group() -> impl Strategy<Value = Presentation> {
    proptest::sample::select(vec![vec![2], vec![3], vec![4], vec![2, 2], vec![6], vec![2, 4]])
        .prop_map(|o| Presentation::cyclic_sum(&o))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smith_form_is_a_divisor_chain(m in matrix()) {
        let s = snf(&m);
        prop_assert_eq!(s.u.mul(&m).unwrap().mul(&s.v).unwrap(), s.d.clone());
        prop_assert!(s.u.is_unimodular() && s.v.is_unimodular());
        let d = s.diagonal();
        prop_assert!(d.iter().all(|x| !x.is_negative()));
        for w in d.windows(2) {
            prop_assert!(w[1].is_zero() || (!w[0].is_zero() && (&w[1] % &w[0]).is_zero()));
        }
        for i in 0..s.d.rows() {
            for j in (0..s.d.cols()).filter(|&j| j != i) {
                prop_assert!(s.d.get(i, j).is_zero());
            }
        }
    }

    #[test]
    fn hermite_form_is_reachable(m in matrix()) {
        let (h, u) = hnf(&m);
        prop_assert!(u.is_unimodular());
        prop_assert_eq!(u.mul(&m).unwrap(), h);
    }

    #[test]
    fn row_operations_keep_the_group(m in matrix(), a in 0usize..4, b in 0usize..4, k in -5i64..=5) {
        let g = Presentation::new(m.cols(), m.clone()).unwrap();
        let mut m2 = m.clone();
        let (a, b) = (a % m.rows(), b % m.rows());
        if a != b {
            m2.add_row(a, b, &BigInt::from(k));
        }
        m2.negate_row(b);
        let h = Presentation::new(m.cols(), m2).unwrap();
        prop_assert!(are_isomorphic(&g, &h));
        prop_assert_eq!(g.invariant_factors(), h.invariant_factors());
    }

    #[test]
    fn canonical_forms_respect_addition(m in matrix(), x in proptest::collection::vec(-9i64..=9, 4), y in proptest::collection::vec(-9i64..=9, 4)) {
        let g = Presentation::new(m.cols(), m.clone()).unwrap();
        let n = m.cols();
        let (x, y) = (GroupElement::from_i64(&x[..n]), GroupElement::from_i64(&y[..n]));
        let cx = g.canonical(&x).unwrap();
        prop_assert_eq!(g.canonical(&cx).unwrap(), cx.clone());
        prop_assert!(g.equal(&x, &cx).unwrap());
        let lhs = g.canonical(&x.add(&y)).unwrap();
        let rhs = g.canonical(&cx.add(&g.canonical(&y).unwrap())).unwrap();
        prop_assert_eq!(lhs, rhs);
        prop_assert!(g.is_zero(&x.sub(&x)).unwrap());
    }

    #[test]
    fn partial_isos_are_symmetric(a in small_group(), b in small_group(), i in 0usize..64, j in 0usize..64) {
        let (ea, eb) = (a.elements(64).unwrap(), b.elements(64).unwrap());
        let (x, y) = (vec![ea[i % ea.len()].clone()], vec![eb[j % eb.len()].clone()]);
        prop_assert_eq!(is_partial_iso(&a, &b, &x, &y).unwrap(), is_partial_iso(&b, &a, &y, &x).unwrap());
        prop_assert!(is_partial_iso(&a, &a, &x, &x).unwrap());
    }

    #[test]
    fn tree_order_is_strict(t in tree()) {
        let n = t.node_count();
        for a in 0..n {
            prop_assert!(!t.is_below(a, a));
            for b in 0..n {
                prop_assert!(!(t.is_below(a, b) && t.is_below(b, a)));
                for c in 0..n {
                    if t.is_below(a, b) && t.is_below(b, c) {
                        prop_assert!(t.is_below(a, c));
                    }
                }
            }
            if let Some(p) = t.parent(a) {
                prop_assert!(t.is_below(p, a));
                prop_assert_eq!(t.height(a), t.height(p) + 1);
            }
        }
    }

    #[test]
    fn product_pairs_nodes_of_equal_height(t1 in tree(), t2 in tree()) {
        let p = tree_product(&t1, &t2);
        let count = |t: &Tree, h: usize| (0..t.node_count()).filter(|&v| t.height(v) == h).count();
        let expected: usize = (0..8).map(|h| count(&t1, h) * count(&t2, h)).sum();
        prop_assert_eq!(p.node_count(), expected);
        prop_assert!(p.depth() <= t1.depth().min(t2.depth()));
        for v in 0..p.node_count() {
            let (a, b) = p.label(v).unwrap();
            prop_assert_eq!(p.height(v), t1.height(a));
            prop_assert_eq!(t1.height(a), t2.height(b));
        }
    }

    #[test]
    fn a_group_is_equivalent_to_itself(g in small_group(), t in tree()) {
        let spec = GameSpec::finite(&g, &g, &t, 64).unwrap();
        prop_assert_eq!(solve_game(&spec, SolveOptions::default()).unwrap().winner, Player::Exists);
    }

    #[test]
    fn the_winner_ignores_side_order(a in small_group(), b in small_group(), t in tree()) {
        let w1 = solve_game(&GameSpec::finite(&a, &b, &t, 64).unwrap(), SolveOptions::default()).unwrap().winner;
        let w2 = solve_game(&GameSpec::finite(&b, &a, &t, 64).unwrap(), SolveOptions::default()).unwrap().winner;
        prop_assert_eq!(w1, w2);
        if are_isomorphic(&a, &b) {
            prop_assert_eq!(w1, Player::Exists);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn builds_are_coherent_and_in_standard_form(
        gadget_len in 1usize..4,
        chain_len in 1usize..5,
        h in proptest::sample::select(vec![
            HSpec::Family,
            HSpec::Identity { swap_x: false },
            HSpec::Identity { swap_x: true },
        ]),
    ) {
        use StageClass::*;
        let script = GuessScript {
            e0: BTreeMap::from([(1, vec![vec![0]; gadget_len])]),
            e1: BTreeMap::from([(3, h)]),
        };
        let opts = BuildOptions { gadget_len, chain_len, prime_floor: 16 };
        let b = build_truncated_pair(&Tree::chain(5), &[Free, E0, Free, E1, Free], &script, opts).unwrap();
        prop_assert!(check_family(&b).unwrap().all());
        prop_assert!(b.presentation(0).is_torsion_free() && b.presentation(1).is_torsion_free());
        let (p0, p1) = build_projections(&b).unwrap();
        for p in [&p0, &p1] {
            prop_assert!(p.check_coherence().unwrap());
            prop_assert!(check_standard_form(&b, p, &canonical_ladders(&b)).unwrap());
        }
        let (f, g) = (Filtration::from_build(&b, 0), Filtration::from_build(&b, 1));
        prop_assert!(stable_quotient_equiv(&f, &g).unwrap());
        let r = search_level_preserving(&f, &g, 2, SearchOptions::default()).unwrap();
        let iso = r.found().expect("low levels carry no chain");
        prop_assert!(is_level_preserving(iso, &f, &g).unwrap());
    }

    #[test]
    fn big_coefficients_round_trip_through_json(v in proptest::collection::vec(any::<i64>(), 0..5), shift in 0u32..80) {
        let big: Vec<BigInt> = v.iter().map(|&x| BigInt::from(x) << shift).collect();
        let e = GroupElement::new(big);
        let text = serde_json::to_string(&e).unwrap();
        prop_assert_eq!(serde_json::from_str::<GroupElement>(&text).unwrap(), e);
    }
}
