use ringage::placement::ring_total_age_difference_closed_form;
use ringage::{place, ring_total_age_difference, split_total_age, system_age, Partition, PlacementStrategy, Rates};

fn unit(n: usize) -> Rates {
    Rates::unit(n).unwrap()
}

fn miniring(strategy: PlacementStrategy, n: usize, jammers: usize) -> Partition {
    Partition::from_placement(&place(strategy, n, jammers).unwrap(), n)
        .unwrap()
        .to_miniring_model()
}

#[test]
fn centre_cut_is_least_harmful() {
    for n0 in 3..=256 {
        for n in [n0, 1024] {
            let r = unit(n);
            let splits: Vec<f64> = (1..=n0 / 2).map(|m| split_total_age(n0, m, &r).unwrap()).collect();
            for (m, w) in splits.windows(2).enumerate() {
                assert!(w[1] <= w[0] + 1e-12, "n0={n0} n={n} m={}", m + 1);
            }
        }
    }
}

#[test]
fn ring_total_difference_shrinks() {
    let r = unit(1024);
    let diffs: Vec<f64> = (1..=200).map(|n0| ring_total_age_difference(n0, &r).unwrap()).collect();
    assert!(diffs.windows(2).all(|w| w[1] < w[0]));
    for (i, d) in diffs.iter().enumerate() {
        let closed = ring_total_age_difference_closed_form(i + 1, &r).unwrap();
        assert!((d - closed).abs() <= 1e-9 * closed.abs().max(1.0));
    }
}

#[test]
fn adjacent_random_equidistant_ordering_on_miniring_model() {
    for n in [8usize, 16, 33, 64, 100, 128, 256, 300, 512] {
        let r = unit(n);
        let max_jammers = ((n as f64).sqrt() * 4.0) as usize;
        for jammers in 1..=max_jammers.min(n) {
            let adj = system_age(&miniring(PlacementStrategy::Adjacent, n, jammers), &r).unwrap();
            let eq = system_age(&miniring(PlacementStrategy::Equidistant, n, jammers), &r).unwrap();
            for seed in 0..5 {
                let rnd = system_age(&miniring(PlacementStrategy::Random { seed }, n, jammers), &r).unwrap();
                assert!(adj >= rnd - 1e-12, "n={n} t={jammers} seed={seed}");
                assert!(rnd >= eq - 1e-12, "n={n} t={jammers} seed={seed}");
            }
        }
    }
}

#[test]
fn adjacent_always_isolates_all_but_one_line() {
    for n in 1..=40 {
        for jammers in 1..=n {
            let sizes = Partition::from_placement(&place(PlacementStrategy::Adjacent, n, jammers).unwrap(), n)
                .unwrap()
                .sorted_sizes();
            let mut want = vec![1; jammers - 1];
            want.push(n - jammers + 1);
            want.sort_unstable();
            assert_eq!(sizes, want);
        }
    }
}

#[test]
fn equidistant_is_balanced() {
    for n in 1..=60 {
        for jammers in 1..=n {
            let sizes = Partition::from_placement(&place(PlacementStrategy::Equidistant, n, jammers).unwrap(), n)
                .unwrap()
                .sorted_sizes();
            assert_eq!(sizes.len(), jammers);
            assert!(sizes[sizes.len() - 1] - sizes[0] <= 1, "n={n} t={jammers}: {sizes:?}");
        }
    }
}

#[test]
fn line_model_sits_inside_the_factor_two_band() {
    for n in [16usize, 64, 200] {
        let r = unit(n);
        for jammers in [1, 3, 7] {
            for strategy in [
                PlacementStrategy::Adjacent,
                PlacementStrategy::Equidistant,
                PlacementStrategy::Random { seed: 4 },
            ] {
                let p = Partition::from_placement(&place(strategy, n, jammers).unwrap(), n).unwrap();
                let line = system_age(&p, &r).unwrap();
                let ring = system_age(&p.to_miniring_model(), &r).unwrap();
                assert!(ring <= line && line <= 2.0 * ring);
            }
        }
    }
}
