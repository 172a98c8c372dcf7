use std::collections::BTreeSet;

use linf_ramsey::baton::{
    anchor_set_one_alpha, extract_general_baton, extract_unit_baton, shift_map, GridSubset,
};
use linf_ramsey::chroma::{exact_chromatic, naive_chromatic, CopyHypergraph, DEFAULT_BUDGET};
use linf_ramsey::colorings::pigeonhole_lower_bound;
use linf_ramsey::dirichlet::{
    build_anchor_sequence, dirichlet_approx, first_subadditivity_violation_fast,
    first_subadditivity_violation_naive, gamma_set, verify_anchor_sequence, Construction,
};
use linf_ramsey::metric::{
    chebyshev_distance, find_copies, find_copies_naive, frechet_embed, grid_decompose, Baton,
    FiniteMetricSpace, PointSet,
};
use linf_ramsey::rational::{frac, int, round_half_up, Rational};
use linf_ramsey::torus::{
    counting_lower_bound, exact_cover, greedy_cover, naive_min_cover, randomized_cover, CoverInstance,
};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use proptest::prelude::*;

/// Random metric: integer weights closed under shortest paths.
fn metric_strategy(max_points: usize) -> impl Strategy<Value = FiniteMetricSpace> {
    (1..=max_points).prop_flat_map(|n| {
        prop::collection::vec(1i64..=12, n * n).prop_map(move |w| {
            let mut d: Vec<Vec<Rational>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| match i.cmp(&j) {
                            std::cmp::Ordering::Equal => int(0),
                            std::cmp::Ordering::Less => frac(w[i * n + j], 2),
                            std::cmp::Ordering::Greater => frac(w[j * n + i], 2),
                        })
                        .collect()
                })
                .collect();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let via = &d[i][k] + &d[k][j];
                        if via < d[i][j] {
                            d[i][j] = via;
                        }
                    }
                }
            }
            FiniteMetricSpace::new(d).expect("shortest-path closure is a metric")
        })
    })
}

fn small_point_set(max_points: usize, dim: usize, span: i64) -> impl Strategy<Value = PointSet> {
    prop::collection::btree_set(prop::collection::vec(0..=span, dim), 1..=max_points)
        .prop_map(|pts| PointSet::from_integer_points(pts).unwrap())
}

fn grid_subset(k: u32, n: usize, size: usize) -> impl Strategy<Value = GridSubset> {
    let total = (k as usize + 1).pow(n as u32);
    Just(()).prop_perturb(move |_, mut rng| {
        let mut idx: Vec<usize> = (0..total).collect();
        for i in 0..size {
            let j = i + (rng.next_u64() as usize) % (total - i);
            idx.swap(i, j);
        }
        let elems = idx[..size].iter().map(|&x| {
            let mut c = vec![0u32; n];
            let mut x = x;
            for slot in c.iter_mut().rev() {
                *slot = (x % (k as usize + 1)) as u32;
                x /= k as usize + 1;
            }
            c
        });
        GridSubset::new(n, k, elems).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frechet_round_trip(m in metric_strategy(8)) {
        let (points, emb) = frechet_embed(&m);
        prop_assert!(emb.verify(&points).is_ok());
        for i in 0..m.size() {
            for j in 0..m.size() {
                prop_assert_eq!(&chebyshev_distance(points.point(i), points.point(j)).unwrap(), m.dist(i, j));
            }
        }
    }

    #[test]
    fn threshold_never_exceeds_diameter(m in metric_strategy(7)) {
        prop_assume!(m.size() >= 2);
        prop_assert!(m.connectivity_threshold().unwrap() <= m.diameter().unwrap());
    }

    #[test]
    fn pruned_search_matches_naive(
        m in metric_strategy(3),
        points in small_point_set(12, 2, 3),
    ) {
        prop_assert_eq!(find_copies(&m, &points, None), find_copies_naive(&m, &points));
    }

    #[test]
    fn pruned_search_matches_naive_for_batons(
        k in 1usize..=3,
        points in small_point_set(12, 2, 3),
    ) {
        let m = FiniteMetricSpace::unit_baton(k);
        prop_assert_eq!(find_copies(&m, &points, None), find_copies_naive(&m, &points));
    }

    #[test]
    fn grid_decomposition_contains_the_set(points in small_point_set(10, 3, 6)) {
        let axes = grid_decompose(&points).unwrap();
        for (i, axis) in axes.iter().enumerate() {
            let values = axis.values();
            let projected: BTreeSet<Rational> = points.points().iter().map(|p| p[i].clone()).collect();
            prop_assert_eq!(values, projected.into_iter().collect::<Vec<_>>());
        }
    }

    #[test]
    fn shift_map_is_injective(
        set in prop::sample::select(vec![(1u32, 2usize), (1, 3), (2, 2), (2, 3), (3, 2), (3, 3)])
            .prop_flat_map(|(k, n)| {
                let total = (k as usize + 1).pow(n as u32);
                (1..=total).prop_flat_map(move |size| grid_subset(k, n, size))
            }),
    ) {
        let images: BTreeSet<Vec<u32>> = set.elems().map(|x| shift_map(&set, x).unwrap()).collect();
        prop_assert_eq!(images.len(), set.len());
    }

    #[test]
    fn extraction_succeeds_above_threshold(
        set in prop_oneof![grid_subset(2, 3, 9), grid_subset(3, 2, 10), grid_subset(1, 4, 2), grid_subset(2, 2, 5)],
    ) {
        let emb = extract_unit_baton(&set).unwrap();
        prop_assert!(emb.verify(&set.to_point_set()).is_ok());
    }

    #[test]
    fn one_alpha_anchor_gaps(num in 5i64..=40, den in 1i64..=4) {
        let alpha = frac(num, den);
        prop_assume!(alpha > int(1));
        let set = anchor_set_one_alpha(&alpha).unwrap();
        let v = set.values();
        let m = alpha.ceil().to_integer().to_usize().unwrap();
        prop_assert_eq!(v.len(), m + 2);
        for l in 1..v.len() {
            prop_assert!(&v[l] - &v[l - 1] <= int(1));
        }
        for l in 0..v.len() {
            for r in 0..v.len() {
                if &v[l] - &v[r] > int(1) || &v[r] - &v[l] > int(1) {
                    prop_assert!(l.abs_diff(r) >= 2);
                }
            }
        }
    }

    #[test]
    fn general_extraction_matches_partial_sums(
        (alpha, sub) in (3i64..=10, 1i64..=3)
            .prop_filter("alpha > 1", |(n, d)| n > d)
            .prop_flat_map(|(n, d)| {
                let alpha = frac(n, d);
                let top = anchor_set_one_alpha(&alpha).unwrap().top() as u32;
                (Just(alpha), grid_subset(top, 2, (top as usize).pow(2) + 1))
            }),
    ) {
        let anchors = anchor_set_one_alpha(&alpha).unwrap();
        let baton = Baton::new(vec![int(1), alpha.clone()]).unwrap();
        let pts: Vec<Vec<Rational>> = sub
            .elems()
            .map(|x| x.iter().map(|&c| anchors.values()[c as usize].clone()).collect())
            .collect();
        let points = PointSet::new(pts).unwrap();
        let emb = extract_general_baton(&points, &baton, &anchors).unwrap();
        let sums = baton.partial_sums();
        for s in 0..sums.len() {
            for t in 0..sums.len() {
                let want = if s < t { &sums[t] - &sums[s] } else { &sums[s] - &sums[t] };
                prop_assert_eq!(points.distance(emb.indices[s], emb.indices[t]), want);
            }
        }
    }
}

fn baton_strategy() -> impl Strategy<Value = Baton> {
    prop::collection::vec((1i64..=16, prop::sample::select(vec![1i64, 2, 3, 4])), 1..=2).prop_filter_map(
        "steps in (0, 4]",
        |raw| {
            let steps: Vec<Rational> = raw.into_iter().map(|(n, d)| frac(n, d)).filter(|s| s <= &int(4)).collect();
            if steps.is_empty() {
                None
            } else {
                Baton::new(steps).ok()
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn anchors_sit_at_rounded_indices(b in baton_strategy()) {
        let seq = build_anchor_sequence(&b, Construction::Faithful);
        prop_assert!(verify_anchor_sequence(&seq, &b).passed());
        let q = int(seq.q.unwrap() as i64);
        let g = gamma_set(&b);
        let fine = &seq.delta / int(2 * seq.m as i64);
        let c: Vec<usize> = g.values().map(|x| round_half_up(&(x * &q)).to_usize().unwrap()).collect();
        for (i, x) in g.values().enumerate() {
            prop_assert_eq!(&seq.a(c[i]), x);
        }
        for l in 1..=seq.m {
            let gap = seq.a(l) - seq.a(l - 1);
            if c.contains(&(l - 1)) {
                prop_assert!(gap > &seq.delta / int(2));
            } else {
                prop_assert!(gap >= fine.clone());
            }
        }
    }

    #[test]
    fn dirichlet_bound_is_strict(b in baton_strategy(), q0 in 1u64..200) {
        let w = dirichlet_approx(b.steps(), q0).unwrap();
        prop_assert!(w.q > q0);
        prop_assert!(w.satisfies_bound());
        let k = b.k();
        for e in &w.errors {
            let lhs = num_traits::pow(e.clone(), k) * num_traits::pow(int(w.q as i64), k + 1);
            prop_assert!(lhs < int(1));
        }
    }

    #[test]
    fn run_based_subadditivity_matches_naive(
        raw in prop::collection::vec(0i128..6, 2..60),
        breaks in prop::collection::vec(0i128..40, 0..4),
    ) {
        // piecewise affine increasing sequences with a few perturbations
        let mut a = vec![0i128];
        for (i, step) in raw.iter().enumerate() {
            let bump = if breaks.contains(&(i as i128)) { 7 } else { 0 };
            let last = *a.last().unwrap();
            a.push(last + step + bump);
        }
        prop_assert_eq!(first_subadditivity_violation_fast(&a), first_subadditivity_violation_naive(&a));
    }
}

fn hypergraph_strategy() -> impl Strategy<Value = (usize, Vec<Vec<usize>>)> {
    (2usize..=8).prop_flat_map(|n| {
        let edge = prop::collection::btree_set(0..n, 2..=3.min(n)).prop_map(|s| s.into_iter().collect::<Vec<_>>());
        (Just(n), prop::collection::vec(edge, 0..14))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn exact_coloring_matches_enumeration((n, edges) in hypergraph_strategy()) {
        let h = CopyHypergraph::new(n, edges).unwrap();
        let cert = exact_chromatic(&h, DEFAULT_BUDGET);
        prop_assert!(cert.optimal);
        prop_assert!(h.is_proper(&cert.colors));
        prop_assert_eq!(cert.color_count, naive_chromatic(&h));
    }

    #[test]
    fn adding_edges_never_lowers_the_chromatic_number((n, edges) in hypergraph_strategy(), cut in 0usize..14) {
        let cut = cut.min(edges.len());
        let smaller = CopyHypergraph::new(n, edges[..cut].to_vec()).unwrap();
        let larger = CopyHypergraph::new(n, edges).unwrap();
        prop_assert!(
            exact_chromatic(&smaller, DEFAULT_BUDGET).color_count
                <= exact_chromatic(&larger, DEFAULT_BUDGET).color_count
        );
    }

    #[test]
    fn pigeonhole_dominates_the_ratio(k in 1u32..=8, n in 1u32..=8) {
        let b = pigeonhole_lower_bound(k, n).unwrap();
        let ratio = num_traits::pow(Rational::new(BigInt::from(k + 1), BigInt::from(k)), n as usize);
        prop_assert!(Rational::from_integer(b) >= ratio);
    }

    #[test]
    fn covers_are_complete_and_ordered(m in 2u32..=4, d in 1u32..=4, n in 1u32..=3, seed in any::<u64>()) {
        prop_assume!(d <= m);
        let inst = CoverInstance::new(m, d, n).unwrap();
        let exact = exact_cover(&inst, 2_000_000).unwrap();
        let greedy = greedy_cover(&inst).unwrap();
        prop_assert!(exact.is_complete() && greedy.is_complete());
        prop_assert!(counting_lower_bound(&inst) <= exact.size as u64);
        prop_assert!(exact.optimal);
        prop_assert!(exact.size <= greedy.size);
        if d < m {
            let random = randomized_cover(&inst, seed).unwrap();
            prop_assert!(random.is_complete());
            prop_assert!(exact.size <= random.size);
        }
        if inst.points() <= 27 {
            prop_assert_eq!(exact.size, naive_min_cover(&inst));
        }
    }
}
