use proptest::prelude::*;

use rsrelay::channel::{generate_channels, mrt_precoders, SystemConfig};
use rsrelay::distortion::build_coefficients;
use rsrelay::harness::format_float;
use rsrelay::oracle::water_filling;
use rsrelay::rates::{Link, LinkSet, PowerAllocation};
use rsrelay::solver::{Problem, SolverOptions};

const K: usize = 3;

fn links(seed: u64, distortion_db: f64) -> LinkSet {
    let mut config = SystemConfig::default().with_dimensions(K, 8);
    config.set_distortion(10f64.powf(distortion_db / 10.0));
    let ch = generate_channels(&config, seed).unwrap();
    let c = build_coefficients(&ch, &mrt_precoders(&ch).unwrap(), &config).unwrap();
    LinkSet::from_coefficients(&c, config.rate_prefactor)
}

/// Feasible allocation from raw weights: source and relay totals scaled into their budgets.
fn allocation(raw: &[f64], source_fill: f64, relay_fill: f64) -> PowerAllocation {
    let src: f64 = raw[..2 * K].iter().sum::<f64>().max(1e-12);
    let rel: f64 = raw[2 * K..].iter().sum::<f64>().max(1e-12);
    let s = |x: f64| x / src * source_fill;
    let r = |x: f64| x / rel * relay_fill;
    PowerAllocation::new(
        raw[..K].iter().map(|x| s(*x)).collect(),
        raw[K..2 * K].iter().map(|x| s(*x)).collect(),
        raw[2 * K..].iter().map(|x| r(*x)).collect(),
    )
}

fn powers() -> impl Strategy<Value = PowerAllocation> {
    (prop::collection::vec(0.0..1.0f64, 3 * K), 0.0..=1.0f64, 0.0..=1.0f64)
        .prop_map(|(raw, a, b)| allocation(&raw, a, b))
}

fn interior_powers() -> impl Strategy<Value = PowerAllocation> {
    (prop::collection::vec(0.05..1.0f64, 3 * K), 0.2..0.9f64, 0.2..0.9f64)
        .prop_map(|(raw, a, b)| allocation(&raw, a, b))
}

fn all_links(l: &LinkSet) -> [&Link; 3] {
    [&l.sr, &l.rd, &l.sd]
}

fn flat(p: &PowerAllocation) -> Vec<f64> {
    p.p_sr.iter().chain(&p.p_sd).chain(&p.p_rd).copied().collect()
}

fn unflat(v: &[f64]) -> PowerAllocation {
    PowerAllocation::new(v[..K].to_vec(), v[K..2 * K].to_vec(), v[2 * K..].to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn bound_is_below_the_rate_and_tight_at_the_anchor(
        seed in 0u64..1000, dist in -40.0..-10.0f64, p in powers(), anchor in powers()
    ) {
        let l = links(seed, dist);
        for link in all_links(&l) {
            for k in 0..K {
                let exact = link.rate_at(k, &p, l.prelog);
                let bound = link.surrogate_at(k, &p, &anchor, l.prelog).unwrap();
                prop_assert!(bound <= exact + 1e-10 * exact.abs().max(1.0), "{bound} > {exact}");
                let at = link.surrogate_at(k, &anchor, &anchor, l.prelog).unwrap();
                let r = link.rate_at(k, &anchor, l.prelog);
                prop_assert!((at - r).abs() <= 1e-10 * r.abs().max(1.0));
            }
        }
    }

    #[test]
    fn bound_is_concave_along_segments(
        seed in 0u64..1000, a in interior_powers(), b in interior_powers(), anchor in interior_powers()
    ) {
        let l = links(seed, -30.0);
        let mid = unflat(&flat(&a).iter().zip(flat(&b)).map(|(x, y)| 0.5 * (x + y)).collect::<Vec<_>>());
        for link in all_links(&l) {
            for k in 0..K {
                let f = |p: &PowerAllocation| link.surrogate_at(k, p, &anchor, l.prelog).unwrap();
                prop_assert!(f(&mid) >= 0.5 * (f(&a) + f(&b)) - 1e-9);
            }
        }
    }

    #[test]
    fn bound_gradient_matches_central_differences(seed in 0u64..1000, p in interior_powers(), anchor in interior_powers()) {
        let l = links(seed, -30.0);
        let x = flat(&p);
        for link in all_links(&l) {
            for k in 0..K {
                let i0 = link.interference_at(k, &anchor);
                let grad = link.surrogate_term(k, &p, i0, l.prelog).grad;
                let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(1e-12);
                for j in 0..3 * K {
                    let h = 1e-5 * x[j].max(1e-2);
                    let (mut up, mut dn) = (x.clone(), x.clone());
                    up[j] += h;
                    dn[j] -= h;
                    let f = |v: &[f64]| link.surrogate_at(k, &unflat(v), &anchor, l.prelog).unwrap();
                    let fd = (f(&up) - f(&dn)) / (2.0 * h);
                    prop_assert!((fd - grad[j]).abs() <= 1e-5 * scale, "j {j}: {fd} vs {}", grad[j]);
                }
            }
        }
    }

    #[test]
    fn interference_is_affine_and_nondecreasing(seed in 0u64..1000, p in powers(), q in powers()) {
        let l = links(seed, -20.0);
        let sum = unflat(&flat(&p).iter().zip(flat(&q)).map(|(x, y)| x + y).collect::<Vec<_>>());
        let zero = PowerAllocation::zeros(K);
        for link in all_links(&l) {
            for k in 0..K {
                let i = |x: &PowerAllocation| link.interference_at(k, x);
                let lhs = i(&sum) + i(&zero);
                prop_assert!((lhs - i(&p) - i(&q)).abs() <= 1e-12 * lhs);
                prop_assert!(i(&sum) >= i(&p) && i(&p) >= i(&zero));
            }
        }
    }

    #[test]
    fn every_rate_is_finite_and_nonnegative(seed in 0u64..1000, p in powers()) {
        let r = links(seed, -20.0).evaluate(&p);
        for x in r.r_sr.iter().chain(&r.r_rd).chain(&r.r_sd) {
            prop_assert!(x.is_finite() && *x >= 0.0);
        }
        prop_assert!(r.r_total.is_finite() && r.r_total >= 0.0);
    }

    #[test]
    fn water_filling_spends_the_budget_on_one_level(
        gains in prop::collection::vec(0.01..10.0f64, 1..8), budget in 0.01..5.0f64
    ) {
        let noise = vec![1.0; gains.len()];
        let p = water_filling(&gains, &noise, budget).unwrap();
        prop_assert!((p.iter().sum::<f64>() - budget).abs() <= 1e-9 * budget.max(1.0));
        let levels: Vec<f64> = p.iter().zip(&gains).filter(|(x, _)| **x > 0.0).map(|(x, g)| x + 1.0 / g).collect();
        let level = levels[0];
        prop_assert!(levels.iter().all(|l| (l - level).abs() <= 1e-9 * level));
        for (x, g) in p.iter().zip(&gains) {
            if *x == 0.0 {
                prop_assert!(1.0 / g >= level - 1e-9 * level);
            }
        }
    }

    #[test]
    fn printed_floats_parse_back(x in prop::num::f64::NORMAL) {
        let y: f64 = format_float(x).parse().unwrap();
        prop_assert!(((x - y) / x).abs() <= 5e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn sia_never_descends(seed in 0u64..10_000, dist in -40.0..-20.0f64) {
        let l = links(seed, dist);
        let config = SystemConfig::default().with_dimensions(K, 8);
        let opts = SolverOptions::default();
        let (p, trace) = Problem::rate_splitting(&l, &config).sia(&opts).unwrap();
        for w in trace.true_objectives.windows(2) {
            prop_assert!(w[1] >= w[0] - 10.0 * opts.inner_tol);
        }
        prop_assert!(p.is_feasible(1.0, 1.0, 1e-9));
        prop_assert!(trace.final_sum_rate >= trace.true_objectives[0] - 10.0 * opts.inner_tol);
    }
}
