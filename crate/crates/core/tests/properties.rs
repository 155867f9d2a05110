use infinitas::density::{extrapolate, Rule};
use infinitas::geometry::elementary_symmetric;
use infinitas::linalg::{self, dot};
use infinitas::output::{fmt_num, Table};
use infinitas::rabier::{rabier_number, LinearMap};
use infinitas::topology::sample_grassmannian;
use infinitas::{parse_polynomial, Polynomial};
use proptest::prelude::*;

fn cubic(c: &[f64]) -> Polynomial {
    let vars = ["x1".to_string(), "x2".to_string(), "x3".to_string()];
    let monos = [
        "1", "x1", "x2", "x3", "x1^2", "x1*x2", "x2*x3", "x3^2", "x1^3", "x1*x2*x3", "x2^2*x3", "x3^3",
    ];
    let text: Vec<String> = c.iter().zip(monos).map(|(a, m)| format!("({a})*{m}")).collect();
    parse_polynomial(&text.join(" + "), &vars).unwrap()
}

fn map_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..=4)
        .prop_flat_map(|q| (Just(q), q..=5))
        .prop_flat_map(|(q, p)| (Just(q), Just(p), prop::collection::vec(-3.0f64..3.0, q * p)))
}

fn build(q: usize, p: usize, v: &[f64]) -> LinearMap {
    LinearMap::from_rows(&v.chunks(p).map(|r| r.to_vec()).collect::<Vec<_>>()[..q]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jet_matches_central_differences(
        c in prop::collection::vec(-2.0f64..2.0, 12),
        x in prop::collection::vec(-1.5f64..1.5, 3),
    ) {
        let f = cubic(&c);
        let j = f.jet(&x).unwrap();
        prop_assert!((j.value - f.eval(&x)).abs() < 1e-12);
        let h = 1e-4;
        for i in 0..3 {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (f.eval(&a) - f.eval(&b)) / (2.0 * h);
            prop_assert!((fd - j.gradient[i]).abs() < 1e-6, "d{} {} vs {}", i, fd, j.gradient[i]);
            let ja = f.jet(&a).unwrap();
            let jb = f.jet(&b).unwrap();
            for k in 0..3 {
                let fd2 = (ja.gradient[k] - jb.gradient[k]) / (2.0 * h);
                prop_assert!((fd2 - j.hessian[i][k]).abs() < 1e-6);
                prop_assert_eq!(j.hessian[i][k], j.hessian[k][i]);
            }
        }
    }

    #[test]
    fn rabier_is_homogeneous((q, p, v) in map_strategy(), lambda in -10.0f64..10.0) {
        let a = build(q, p, &v);
        let nu = rabier_number(&a);
        let scaled = rabier_number(&a.scaled(lambda));
        prop_assert!((scaled - lambda.abs() * nu).abs() <= 1e-10 * (1.0 + lambda.abs() * nu));
    }

    #[test]
    fn rabier_is_monotone_under_restriction(
        (q, p, v) in map_strategy(),
        dirs in prop::collection::vec(-1.0f64..1.0, 25),
        k in 1usize..=5,
    ) {
        let a = build(q, p, &v);
        let nu = rabier_number(&a);
        let cols: Vec<Vec<f64>> = dirs.chunks(5).take(k.min(p)).map(|c| c[..p].to_vec()).collect();
        let basis = linalg::orthonormalize(&cols, 1e-9);
        prop_assume!(!basis.is_empty());
        prop_assert!(rabier_number(&a.restricted(&basis)) <= nu + 1e-8);
        let rows = linalg::orthonormalize(&a.as_mat().to_rows(), 1e-12);
        if rows.len() == q {
            prop_assert!((rabier_number(&a.restricted(&rows)) - nu).abs() <= 1e-8);
        }
    }

    #[test]
    fn grassmannian_frames_are_orthonormal(n in 1usize..=6, l in 1usize..=6, seed in any::<u64>()) {
        prop_assume!(l <= n);
        for s in sample_grassmannian(l, n, 4, seed).unwrap() {
            prop_assert_eq!(s.basis.len(), l);
            for i in 0..l {
                for j in 0..l {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot(&s.basis[i], &s.basis[j]) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn grassmannian_samples_are_reproducible(n in 2usize..=6, seed in any::<u64>()) {
        let a = sample_grassmannian(1, n, 3, seed).unwrap();
        let b = sample_grassmannian(1, n, 3, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn power_law_tails_extrapolate_exactly(
        limit in -10.0f64..10.0,
        a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
        alpha in 0.3f64..2.5,
    ) {
        let radii: Vec<f64> = (0..7).map(|j| 4.0 * 2f64.powi(j)).collect();
        let vals: Vec<f64> = radii.iter().map(|r| limit + a * r.powf(-alpha)).collect();
        let ex = extrapolate(&radii, &vals, 1e-6).unwrap();
        prop_assert!(matches!(ex.rule, Rule::PowerLaw { .. }), "{:?}", ex.rule);
        prop_assert!((ex.limit - limit).abs() < 1e-9 * (1.0 + limit.abs()), "{} vs {}", ex.limit, limit);
        prop_assert!(ex.converged);
    }

    #[test]
    fn constant_tails_are_exact(c in -100.0f64..100.0) {
        let radii = [4.0, 8.0, 16.0, 32.0];
        let ex = extrapolate(&radii, &[c; 4], 1e-6).unwrap();
        prop_assert_eq!(ex.rule, Rule::Constant);
        prop_assert_eq!(ex.limit, c);
    }

    #[test]
    fn elementary_symmetric_expands_the_product(roots in prop::collection::vec(-2.0f64..2.0, 0..6), t in -2.0f64..2.0) {
        // Π (t + r_i) = Σ e_k t^(d-k)
        let e = elementary_symmetric(&roots);
        let d = roots.len();
        prop_assert_eq!(e.len(), d + 1);
        let lhs: f64 = roots.iter().map(|r| t + r).product();
        let rhs: f64 = e.iter().enumerate().map(|(k, ek)| ek * t.powi((d - k) as i32)).sum();
        prop_assert!((lhs - rhs).abs() < 1e-9);
        prop_assert!((e[d] - roots.iter().product::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn csv_is_a_function_of_the_rows(rows in prop::collection::vec((any::<f64>(), "[a-z, \"]{0,6}"), 0..12)) {
        let build = || {
            let mut t = Table::new("# t", &["v", "s"]);
            for (v, s) in &rows {
                t.push(vec![fmt_num(*v), s.clone()]);
            }
            t.to_csv()
        };
        let a = build();
        prop_assert_eq!(&a, &build());
        prop_assert!(a.starts_with("# t\nv,s\n"));
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(&a.as_bytes()[4..]);
        let back: Vec<csv::StringRecord> = rd.records().collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (rec, (v, s)) in back.iter().zip(&rows) {
            prop_assert_eq!(&rec[1], s.as_str());
            let parsed: f64 = rec[0].parse().unwrap();
            prop_assert!(parsed == *v || (parsed.is_nan() && v.is_nan()));
        }
    }
}
