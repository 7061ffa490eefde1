mod support;

use cfproc_core::event_log::{ActivityId, EncodedTrace};
use cfproc_core::metrics::{diversity, dl_edit, emd, emd_histograms, histogram, lcp, norms};
use proptest::prelude::*;
use support::{osa, transport};

fn ids(t: &[u32]) -> Vec<ActivityId> {
    t.iter().map(|&i| ActivityId(i)).collect()
}

#[test]
fn dl_edit_matches_exhaustive_alignment_oracle() {
    let strings = osa::all_strings(3, 5);
    assert_eq!(strings.len(), 364);
    for a in &strings {
        let ia = ids(a);
        for b in &strings {
            assert_eq!(dl_edit(&ia, &ids(b)), osa::osa(a, b), "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn dl_edit_triangle_failures_are_only_the_osa_restriction() {
    let strings = osa::all_strings(3, 4);
    let d: Vec<Vec<usize>> =
        strings.iter().map(|a| strings.iter().map(|b| dl_edit(&ids(a), &ids(b))).collect()).collect();
    let mut failures = 0;
    for (i, a) in strings.iter().enumerate() {
        for j in 0..strings.len() {
            for (k, c) in strings.iter().enumerate() {
                if d[i][k] <= d[i][j] + d[j][k] {
                    continue;
                }
                failures += 1;
                // the unrestricted distance is a metric and never exceeds OSA
                let full = osa::unrestricted_dl(a, c, 3);
                assert!(full < d[i][k], "{a:?} {:?} {c:?}", strings[j]);
            }
        }
    }
    assert!(failures > 0);
    let (ca, ac, abc) = (ids(&[2, 0]), ids(&[0, 2]), ids(&[0, 1, 2]));
    assert_eq!((dl_edit(&ca, &ac), dl_edit(&ac, &abc), dl_edit(&ca, &abc)), (1, 1, 3));
}

fn counts(t: &[u32], bins: usize) -> Vec<u64> {
    let mut c = vec![0; bins];
    for &a in t {
        c[a as usize] += 1;
    }
    c
}

/// Scale both histograms to the common mass `|a|·|b|` so the transport
/// problem is integral; the optimum divided by that mass is the EMD.
fn emd_oracle_scaled(a: &[u32], b: &[u32], bins: usize) -> i64 {
    let (la, lb) = (a.len() as u64, b.len() as u64);
    let supply: Vec<u64> = counts(a, bins).iter().map(|c| c * lb).collect();
    let demand: Vec<u64> = counts(b, bins).iter().map(|c| c * la).collect();
    transport::min_cost_transport(&supply, &demand, &transport::unit_cost(bins))
}

#[test]
fn emd_matches_transport_oracle_exhaustively() {
    let strings: Vec<_> = osa::all_strings(5, 3).into_iter().filter(|s| !s.is_empty()).collect();
    for a in &strings {
        for b in &strings {
            let mass = (a.len() * b.len()) as f64;
            let got = emd(&ids(a), &ids(b)) * mass;
            let want = emd_oracle_scaled(a, b, 5) as f64;
            assert!((got - want).abs() < 1e-9, "{a:?} vs {b:?}: {got} vs {want}");
        }
    }
}

#[test]
fn histogram_emd_agrees_with_trace_emd() {
    let a = ids(&[0, 0, 3, 4]);
    let b = ids(&[4, 1]);
    assert_eq!(emd_histograms(&histogram(&a, 5), &histogram(&b, 5)), emd(&a, &b));
    assert_eq!(histogram(&a, 5), vec![0.5, 0.0, 0.0, 0.25, 0.25]);
}

fn brute_norms(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut l0 = 0.0;
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for i in 0..x.len() {
        if x[i] != y[i] {
            l0 += 1.0;
            l1 += (x[i] - y[i]).abs();
            l2 += (x[i] - y[i]).powi(2);
        }
    }
    (l0, l1, l2.sqrt())
}

#[test]
fn norms_match_hand_enumeration() {
    // vocab {A,B,C,EoS}, 5 rows; rows after EoS are zero
    let g = |t: &[u32]| EncodedTrace::from_activities(&ids(t), 4, 5).unwrap().matrix;
    let f = g(&[0, 1, 2, 3]);
    let cases: [(&[u32], (f64, f64, f64)); 4] = [
        (&[0, 1, 2, 3], (0.0, 0.0, 0.0)),
        (&[0, 1, 3], (3.0, 3.0, 3f64.sqrt())),
        (&[0, 2, 1, 3], (4.0, 4.0, 2.0)),
        (&[0, 1, 2, 2, 3], (3.0, 3.0, 3f64.sqrt())),
    ];
    for (t, want) in cases {
        let n = norms(&f, &g(t)).unwrap();
        assert_eq!((n.l0, n.l1, n.l2), want, "{t:?}");
        assert_eq!(brute_norms(f.as_slice(), g(t).as_slice()), want);
    }
}

#[test]
fn lcp_matches_hand_enumeration() {
    let cases: [(&[u32], &[u32], usize); 5] =
        [(&[], &[0], 0), (&[0, 1, 2], &[0, 1, 2], 3), (&[0, 1, 2], &[0, 2, 1], 1), (&[1], &[0], 0), (&[0, 1], &[0, 1, 1, 1], 2)];
    for (a, b, want) in cases {
        assert_eq!(lcp(&ids(a), &ids(b)), want, "{a:?} {b:?}");
    }
}

#[test]
fn diversity_uses_reciprocal_of_pairwise_emd() {
    let a = ids(&[0, 1]);
    let b = ids(&[0, 2]);
    let c = ids(&[2, 2]);
    // pairwise EMD: ab 0.5, ac 1.0, bc 0.5
    assert!((diversity(&[&a, &b, &c]) - 0.5).abs() < 1e-15);
    assert_eq!(diversity(&[]), 0.0);
}

fn short_trace() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..4, 0..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn distances_are_pseudo_metrics(a in short_trace(), b in short_trace()) {
        let (ia, ib) = (ids(&a), ids(&b));
        prop_assert_eq!(dl_edit(&ia, &ia), 0);
        prop_assert_eq!(emd(&ia, &ia), 0.0);
        prop_assert_eq!(dl_edit(&ia, &ib), dl_edit(&ib, &ia));
        prop_assert_eq!(emd(&ia, &ib), emd(&ib, &ia));
        prop_assert_eq!(lcp(&ia, &ib), lcp(&ib, &ia));
        let e = emd(&ia, &ib);
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert!(lcp(&ia, &ib) <= a.len().min(b.len()));
        prop_assert!(dl_edit(&ia, &ib) <= a.len().max(b.len()));
        prop_assert!(dl_edit(&ia, &ib) >= a.len().abs_diff(b.len()));
        prop_assert_eq!(dl_edit(&ia, &ib), osa::osa(&a, &b));
    }

    #[test]
    fn emd_satisfies_triangle_inequality(a in short_trace(), b in short_trace(), c in short_trace()) {
        let (ia, ib, ic) = (ids(&a), ids(&b), ids(&c));
        prop_assert!(emd(&ia, &ic) <= emd(&ia, &ib) + emd(&ib, &ic) + 1e-12);
    }

    #[test]
    fn emd_matches_transport_oracle(a in prop::collection::vec(0u32..5, 1..=8), b in prop::collection::vec(0u32..5, 1..=8)) {
        let mass = (a.len() * b.len()) as f64;
        let got = emd(&ids(&a), &ids(&b)) * mass;
        prop_assert!((got - emd_oracle_scaled(&a, &b, 5) as f64).abs() < 1e-9);
    }

    #[test]
    fn norms_are_pseudo_metrics(a in prop::collection::vec(0u32..3, 1..=4), b in prop::collection::vec(0u32..3, 1..=4)) {
        let g = |t: &[u32]| {
            let mut t = ids(t);
            t.push(ActivityId(3));
            EncodedTrace::from_activities(&t, 4, 5).unwrap().matrix
        };
        let (x, y) = (g(&a), g(&b));
        let n = norms(&x, &y).unwrap();
        let m = norms(&y, &x).unwrap();
        prop_assert_eq!(n, m);
        prop_assert!(n.l0 >= 0.0 && n.l1 >= n.l2 && n.l2 >= 0.0);
        prop_assert_eq!(brute_norms(x.as_slice(), y.as_slice()), (n.l0, n.l1, n.l2));
    }
}
