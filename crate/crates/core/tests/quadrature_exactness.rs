use asyminv::chart::ChartKind;
use asyminv::quadrature::{integrate_sphere, sphere_rule, Measure};
use proptest::prelude::*;

mod common;

use common::monomial_moment;

fn exponents(n: usize, degree: u32, raw: &[u32]) -> Vec<u32> {
    // spread a total degree ≤ `degree` over n slots
    let mut left = degree;
    let mut a = vec![0; n];
    for (i, slot) in a.iter_mut().enumerate() {
        let take = raw[i] % (left + 1);
        *slot = take;
        left -= take;
    }
    a
}

#[test]
fn moment_closed_form_sanity() {
    assert!((monomial_moment(&[0, 0, 0]) - 4.0 * std::f64::consts::PI).abs() < 1e-14);
    assert!((monomial_moment(&[2, 0, 0]) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn polynomials_up_to_degree_are_exact(
        n in 3usize..=5,
        degree in 0u32..=24,
        terms in prop::collection::vec((prop::collection::vec(0u32..30, 5), -1.0f64..1.0), 1..5),
    ) {
        let rule = sphere_rule(n, degree as usize).unwrap();
        let polys: Vec<(Vec<u32>, f64)> = terms
            .iter()
            .map(|(raw, c)| (exponents(n, degree, raw), *c))
            .collect();
        let exact: f64 = polys.iter().map(|(a, c)| c * monomial_moment(a)).sum();
        let scale: f64 = polys.iter().map(|(a, c)| {
            let even: Vec<u32> = a.iter().map(|e| e + e % 2).collect();
            c.abs() * monomial_moment(&even)
        }).sum();
        let got = integrate_sphere(
            |p| {
                Ok(polys
                    .iter()
                    .map(|(a, c)| c * a.iter().zip(&p.coords).map(|(e, x)| x.powi(*e as i32)).product::<f64>())
                    .sum())
            },
            ChartKind::Cartesian,
            1.0,
            &rule,
            Measure::Background,
        )
        .unwrap();
        prop_assert!(
            (got.value - exact).abs() <= 1e-12 * scale.max(1e-300),
            "n={} D={} got {} exact {}", n, degree, got.value, exact
        );
    }
}

#[test]
fn reduction_is_independent_of_thread_count() {
    let rule = sphere_rule(4, 30).unwrap();
    let f = |p: &asyminv::chart::ChartPoint| {
        Ok(p.coords.iter().enumerate().map(|(i, x)| ((i + 1) as f64 * x).sin()).sum::<f64>().exp())
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| integrate_sphere(f, ChartKind::Cartesian, 1.3, &rule, Measure::Background).unwrap())
    };
    let one = run(1);
    for t in [2, 3, 8] {
        let other = run(t);
        assert_eq!(one.value.to_bits(), other.value.to_bits());
        assert_eq!(one.error_estimate.to_bits(), other.error_estimate.to_bits());
    }
}
