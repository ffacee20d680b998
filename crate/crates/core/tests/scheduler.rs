use dppl_core::net::*;
use dppl_core::schedule::*;
use proptest::prelude::*;

fn cfg() -> PowerConfig {
    PowerConfig::paper_default()
}

fn net(tx: &[[f64; 2]], rx: &[[f64; 2]]) -> LinkNetwork {
    LinkNetwork::from_positions(tx.to_vec(), rx.to_vec(), 1.0, 2.0).unwrap()
}

/// Largest violation of `gamma_l <= SINR_l(p)` in log terms.
fn sinr_residual(n: &LinkNetwork, gamma: &[f64], powers: &[f64]) -> f64 {
    (0..n.len())
        .map(|l| {
            let interference: f64 = (0..n.len()).filter(|&j| j != l).map(|j| n.gain(j, l) * powers[j]).sum();
            let exact = n.gain(l, l) * powers[l] / (1.0 + interference);
            (gamma[l].ln() - exact.ln()).max(0.0)
        })
        .fold(0.0, f64::max)
}

#[test]
fn single_link_subproblem_uses_full_power() {
    let n = generate_network(1, 10.0, 1.0, 2.0, 4).unwrap();
    let settings = GpSettings::default();
    let start = GpIterate::uniform(&n, cfg().p_max).unwrap();
    let (next, sol) = solve_gp_subproblem(&n, &start, &settings, cfg().p_max).unwrap();
    assert!((next.powers[0] / cfg().p_max - 1.0).abs() <= 1e-4, "p* = {}", next.powers[0]);
    assert!((next.sinr_guess[0] / (n.gain(0, 0) * cfg().p_max) - 1.0).abs() <= 1e-4);
    assert!(sol.max_residual <= settings.inner_tolerance);

    // From a low start the SINR is clipped at the trust-region ceiling.
    let low = GpIterate::new(vec![1.0], vec![n.gain(0, 0)]).unwrap();
    let (next, _) = solve_gp_subproblem(&n, &low, &settings, cfg().p_max).unwrap();
    assert!((next.sinr_guess[0] / (settings.beta * n.gain(0, 0)) - 1.0).abs() <= 1e-4);
}

#[test]
fn symmetric_pair_satisfies_sinr_constraints() {
    let n = net(&[[0.0, 0.0], [3.0, 0.0]], &[[1.0, 0.0], [2.0, 0.0]]);
    let settings = GpSettings::default();
    let mut it = GpIterate::uniform(&n, cfg().p_max).unwrap();
    for _ in 0..5 {
        let (next, sol) = solve_gp_subproblem(&n, &it, &settings, cfg().p_max).unwrap();
        assert!(sinr_residual(&n, &sol.gamma, &sol.powers) <= 1e-6);
        assert!(sol.max_residual <= 1e-6);
        it = next;
    }
}

#[test]
fn subproblem_respects_trust_region() {
    let settings = GpSettings::default();
    for seed in 0..15 {
        let n = generate_network(2 + seed as usize % 9, 10.0, 1.0, 2.0, seed).unwrap();
        let mut it = GpIterate::uniform(&n, cfg().p_max).unwrap();
        for _ in 0..4 {
            let Ok((next, sol)) = solve_gp_subproblem(&n, &it, &settings, cfg().p_max) else { break };
            for l in 0..n.len() {
                let hat = it.sinr_guess[l];
                assert!(next.sinr_guess[l] <= settings.beta * hat * (1.0 + 1e-9));
                assert!(next.sinr_guess[l] >= hat / settings.beta * (1.0 - 1e-6));
                assert!(sol.gamma[l] <= settings.beta * hat * (1.0 + 1e-6));
                assert!(sol.powers[l] <= cfg().p_max * (1.0 + 1e-9));
                assert!(sol.powers[l] >= P_FLOOR_RATIO * cfg().p_max * (1.0 - 1e-9));
            }
            it = next;
        }
    }
}

#[test]
fn single_link_schedule() {
    let n = generate_network(1, 10.0, 1.0, 2.0, 11).unwrap();
    let out = gp_schedule(&n, &cfg(), &GpSettings::default()).unwrap();
    assert_eq!(out.subset, ActiveSubset::full(1));
}

#[test]
fn colocated_pair_keeps_one_link() {
    let n = net(&[[0.0, 0.0], [0.01, 0.01]], &[[1.0, 0.0], [1.01, 0.01]]);
    let out = gp_schedule(&n, &cfg(), &GpSettings::default()).unwrap();
    let (oracle, _) = exhaustive_schedule(&n, &cfg()).unwrap();
    assert_eq!(out.subset.len(), 1);
    assert_eq!(oracle.len(), 1);
    let rate = sum_rate(&n, &out.subset, &cfg());
    assert!((rate - sum_rate(&n, &oracle, &cfg())).abs() <= 1e-9);
}

#[test]
fn mirror_symmetric_pair_stays_symmetric() {
    // From equal full powers the iterates never break the symmetry.
    let n = net(&[[0.0, 0.0], [0.0, 0.01]], &[[1.0, 0.0], [1.0, 0.01]]);
    let out = gp_schedule(&n, &cfg(), &GpSettings::default()).unwrap();
    assert!((out.powers[0] - out.powers[1]).abs() <= 1e-9 * out.powers[0]);
}

#[test]
fn dense_network_schedules_proper_subset() {
    let n = generate_network(24, 10.0, 1.0, 2.0, 2024).unwrap();
    let out = gp_schedule(&n, &cfg(), &GpSettings::default()).unwrap();
    assert!(!out.subset.is_empty());
    assert!(out.subset.len() < 24, "{:?}", out.subset);
}

#[test]
fn exhaustive_two_links_by_hand() {
    let n = generate_network(2, 3.0, 1.0, 2.0, 5).unwrap();
    let c = cfg();
    let rate = |p: [f64; 2]| -> f64 {
        let g0 = n.gain(0, 0) * p[0] / (1.0 + n.gain(1, 0) * p[1]);
        let g1 = n.gain(1, 1) * p[1] / (1.0 + n.gain(0, 1) * p[0]);
        (1.0 + g0).log2() + (1.0 + g1).log2()
    };
    let candidates = [
        (vec![], rate([c.p_low, c.p_low])),
        (vec![0], rate([c.p_high, c.p_low])),
        (vec![1], rate([c.p_low, c.p_high])),
        (vec![0, 1], rate([c.p_high, c.p_high])),
    ];
    let best = candidates.iter().map(|c| c.1).fold(f64::MIN, f64::max);
    let (subset, value) = exhaustive_schedule(&n, &c).unwrap();
    assert!((value - best).abs() <= 1e-12);
    let chosen = candidates.iter().find(|x| x.0 == subset.indices()).unwrap();
    assert!((chosen.1 - best).abs() <= 1e-12);
}

#[test]
fn gp_against_oracle_on_small_networks() {
    let settings = GpSettings::default();
    let (mut gp_total, mut oracle_total) = (0.0, 0.0);
    for seed in 0..30u64 {
        let m = 2 + (seed as usize % 9);
        let n = generate_network(m, 10.0, 1.0, 2.0, 1000 + seed).unwrap();
        let out = gp_schedule(&n, &cfg(), &settings).unwrap();
        let gp = sum_rate(&n, &out.subset, &cfg());
        let (_, oracle) = exhaustive_schedule(&n, &cfg()).unwrap();
        for bits in 0..1u64 << m {
            assert!(oracle >= sum_rate(&n, &ActiveSubset::from_bits(bits, m), &cfg()) - 1e-12);
        }
        assert!(gp <= oracle + 1e-9);
        let floor = sum_rate(&n, &ActiveSubset::full(m), &cfg()).max(sum_rate(&n, &ActiveSubset::empty(), &cfg()));
        assert!(gp >= floor - 1e-9, "seed {seed}: gp {gp} floor {floor}");
        gp_total += gp;
        oracle_total += oracle;
    }
    println!("gp/oracle mean ratio {:.4}", gp_total / oracle_total);
    assert!(gp_total >= 0.95 * oracle_total);
}

#[test]
fn relaxed_sum_rate_never_drops_along_the_outer_loop() {
    let settings = GpSettings::default();
    for seed in 0..10u64 {
        let n = generate_network(12, 10.0, 1.0, 2.0, 77 + seed).unwrap();
        let out = gp_schedule(&n, &cfg(), &settings).unwrap();
        assert!(out.failure.is_none());
        let start = sinr_all(&n, &vec![cfg().p_max; 12]).iter().map(|g| (1.0 + g).log2()).sum::<f64>();
        let mut prev = start;
        for row in &out.trace {
            assert!(row.relaxed_sum_rate >= prev - 1e-6 * prev.abs(), "seed {seed} iter {}", row.iteration);
            prev = row.relaxed_sum_rate;
        }
    }
}

#[test]
fn thinning_inclusion_rate() {
    let draws = 100_000u64;
    let mut hits = [0u64; 20];
    for seed in 0..draws {
        for &i in thinning_schedule(20, 0.3, seed).unwrap().indices() {
            hits[i] += 1;
        }
    }
    for h in hits {
        let freq = h as f64 / draws as f64;
        assert!((0.295..=0.305).contains(&freq), "{freq}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn monomial_under_approximates(gamma_hat in 1e-3f64..1e4) {
        let (k, a) = monomial_params(gamma_hat).unwrap();
        prop_assert!(a > 0.0 && a < 1.0 && k > 0.0);
        prop_assert!(((1.0 + gamma_hat) - k * gamma_hat.powf(a)).abs() <= 1e-10 * (1.0 + gamma_hat));
        for i in 0..=400 {
            let g = 10f64.powf(-2.0 + i as f64 / 100.0);
            prop_assert!(1.0 + g - k * g.powf(a) >= -1e-12 * (1.0 + g));
        }
    }

    #[test]
    fn quantize_is_idempotent(powers in prop::collection::vec(0.0f64..2000.0, 1..20)) {
        let c = cfg();
        let once = quantize_powers(&powers, &c);
        let twice = quantize_powers(&c.power_vector(&once, powers.len()), &c);
        prop_assert_eq!(once, twice);
    }
}
