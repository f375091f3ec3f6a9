use pharmasim_stats::special::{regularized_incomplete_beta, student_t_two_sided};
use pharmasim_stats::{bonferroni, cohens_kappa, mann_whitney_u, welch_t_test};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

/// Two-sided exact p by enumerating every split of the pooled sample.
fn brute_force_exact_p(x: &[f64], y: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let n = pooled.len();
    let u_of = |xs: &[f64], ys: &[f64]| -> f64 {
        let mut u = 0.0;
        for a in xs {
            for b in ys {
                if a > b {
                    u += 1.0;
                } else if a == b {
                    u += 0.5;
                }
            }
        }
        u
    };
    let observed = u_of(x, y);
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != x.len() {
            continue;
        }
        let (xs, ys): (Vec<_>, Vec<_>) = (0..n).partition(|i| mask & (1 << i) != 0);
        let xs: Vec<f64> = xs.into_iter().map(|i| pooled[i]).collect();
        let ys: Vec<f64> = ys.into_iter().map(|i| pooled[i]).collect();
        let u = u_of(&xs, &ys);
        total += 1;
        if u <= observed + 1e-9 {
            le += 1;
        }
        if u >= observed - 1e-9 {
            ge += 1;
        }
    }
    let p = (2.0 * (le.min(ge) as f64) / total as f64).min(1.0);
    (observed, p)
}

fn small_sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..6).prop_map(f64::from), 1..7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn incomplete_beta_matches_statrs(a in 0.1f64..40.0, b in 0.1f64..40.0, x in 0.0f64..1.0) {
        let ours = regularized_incomplete_beta(a, b, x);
        let theirs = beta_reg(a, b, x);
        prop_assert!((ours - theirs).abs() < 1e-10, "I_{x}({a},{b}): {ours} vs {theirs}");
    }

    #[test]
    fn t_tail_matches_statrs(t in -12.0f64..12.0, df in 1.0f64..200.0) {
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        let theirs = 2.0 * dist.cdf(-t.abs());
        let ours = student_t_two_sided(t, df);
        prop_assert!((ours - theirs).abs() < 1e-10);
    }

    #[test]
    fn exact_mann_whitney_matches_enumeration(x in small_sample(), y in small_sample()) {
        prop_assume!(x.len() + y.len() <= 12);
        let r = mann_whitney_u(&x, &y).unwrap();
        let (u, p) = brute_force_exact_p(&x, &y);
        prop_assert_eq!(r.u_x, u);
        prop_assert!(r.exact);
        prop_assert!((r.p - p).abs() < 1e-12, "{} vs {}", r.p, p);
    }

    #[test]
    fn u_statistics_sum_to_product(
        x in prop::collection::vec(-50i32..50, 1..30),
        y in prop::collection::vec(-50i32..50, 1..30),
    ) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = y.into_iter().map(f64::from).collect();
        let r = mann_whitney_u(&x, &y).unwrap();
        prop_assert_eq!(r.u_x + r.u_y, (x.len() * y.len()) as f64);
        prop_assert!((0.0..=1.0).contains(&r.p));
    }

    #[test]
    fn welch_is_antisymmetric(
        x in prop::collection::vec(-100.0f64..100.0, 2..20),
        y in prop::collection::vec(-100.0f64..100.0, 2..20),
    ) {
        let xy = welch_t_test(&x, &y).unwrap();
        let yx = welch_t_test(&y, &x).unwrap();
        prop_assert_eq!(xy.t, -yx.t);
        prop_assert_eq!(xy.p, yx.p);
        prop_assert!((0.0..=1.0).contains(&xy.p));
    }

    #[test]
    fn kappa_symmetric_and_rename_invariant(
        pairs in prop::collection::vec((0u8..4, 0u8..4), 1..60),
    ) {
        let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        let k = cohens_kappa(&a, &b).unwrap();
        prop_assert!((k - cohens_kappa(&b, &a).unwrap()).abs() < 1e-12);
        // bijection 0->3, 1->0, 2->1, 3->2
        let rename = |v: &u8| (v + 3) % 4;
        let ra: Vec<u8> = a.iter().map(rename).collect();
        let rb: Vec<u8> = b.iter().map(rename).collect();
        prop_assert!((k - cohens_kappa(&ra, &rb).unwrap()).abs() < 1e-12);
        prop_assert!(k <= 1.0 + 1e-12);
    }

    #[test]
    fn bonferroni_monotone_and_capped(mut ps in prop::collection::vec(0.0f64..=1.0, 1..12), extra in 0usize..5) {
        ps.sort_by(f64::total_cmp);
        let m = ps.len() + extra;
        let adj = bonferroni(&ps, m).unwrap();
        for (w, (p, q)) in adj.windows(2).zip(ps.iter().zip(&adj)) {
            prop_assert!(w[0] <= w[1]);
            prop_assert!(q >= p && *q <= 1.0);
        }
    }
}
