use dlcz_repeater::chain::{simulate_chain, simulate_elementary_link, SimConfig};
use dlcz_repeater::rate::{multiplexed_success, swap_chain, ChainParams};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Chain parameters whose elementary success probability is exactly `p0`.
fn with_p0(p0: f64, modes: u32) -> ChainParams {
    ChainParams {
        chi: p0,
        eta_fc: 1.0,
        eta_td: 1.0,
        l0: 1e-12,
        mode_count: modes,
        ..ChainParams::default()
    }
}

#[test]
fn projection_link_success_per_interval() {
    let chain = ChainParams::default();
    let s = simulate_elementary_link(&chain, 100_000, 11).unwrap();
    // 1 − (1 − 9.889392e-4)^100, evaluated by hand
    let expect: f64 = 0.094_205_53;
    let sigma = (expect * (1.0 - expect) / 1e5).sqrt();
    assert!((s.success_per_interval - expect).abs() < 3.0 * sigma, "{}", s.success_per_interval);
}

#[test]
fn waiting_times_are_geometric() {
    let chain = ChainParams::default();
    let p = multiplexed_success(9.889_392_311_583_421e-4, 100).unwrap();
    let s = simulate_elementary_link(&chain, 100_000, 12).unwrap();
    let total: u64 = s.waiting.iter().sum();
    // Bins k = 1, 2, ... while the expected count stays above 5, then a tail.
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    let mut tail_prob = 1.0;
    let mut k = 0usize;
    loop {
        let pk = p * (1.0 - p).powi(k as i32);
        if (tail_prob - pk) * total as f64 <= 5.0 {
            break;
        }
        observed.push(*s.waiting.get(k).unwrap_or(&0) as f64);
        expected.push(pk * total as f64);
        tail_prob -= pk;
        k += 1;
    }
    observed.push(s.waiting.iter().skip(k).sum::<u64>() as f64);
    expected.push(tail_prob * total as f64);
    let stat: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = (observed.len() - 1) as f64;
    let critical = ChiSquared::new(dof).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi2 {stat} over {dof} dof, critical {critical}");
    let mean_ticks = s.mean_waiting_time / s.t_cc;
    assert!((mean_ticks - 1.0 / p).abs() < 0.05 / p);
}

#[test]
fn multiplexed_success_grid_agrees() {
    for (i, p0) in [1e-4, 1e-3, 1e-2].into_iter().enumerate() {
        for (j, n) in [1u32, 12, 100].into_iter().enumerate() {
            let s = simulate_elementary_link(&with_p0(p0, n), 100_000, (10 * i + j) as u64).unwrap();
            let expect = multiplexed_success(p0, n).unwrap();
            let sigma = (expect * (1.0 - expect) / 1e5).sqrt();
            assert!((s.success_per_interval - expect).abs() <= 3.0 * sigma, "p0={p0} N={n}");
        }
    }
}

#[test]
fn twelve_modes_give_twelve_times_the_rate() {
    let one = simulate_elementary_link(&with_p0(1e-3, 1), 1_000_000, 21).unwrap();
    let twelve = simulate_elementary_link(&with_p0(1e-3, 12), 1_000_000, 22).unwrap();
    let ratio = twelve.success_per_interval / one.success_per_interval;
    let sigma = ratio
        * ((one.stderr / one.success_per_interval).powi(2)
            + (twelve.stderr / twelve.success_per_interval).powi(2))
        .sqrt();
    assert!((ratio - 12.0).abs() <= 3.0 * sigma, "{ratio} ± {sigma}");
}

#[test]
fn single_link_chain_is_generation_plus_readout() {
    for (p0, modes) in [(0.05, 1), (1e-3, 100), (0.3, 4)] {
        let chain = ChainParams { n_levels: 0, ..with_p0(p0, modes) };
        let trace = simulate_chain(&SimConfig { chain: chain.clone(), trials: 20_000, seed: 4, max_sim_time: 1.0 }).unwrap();
        assert_eq!(trace.timed_out, 0);
        // delivery needs a link (geometric) and a readout of a fresh pair (R₀)
        let analytic = swap_chain(&chain).unwrap().rate_hz;
        let expect_time = chain.t_cc() / (multiplexed_success(p0, modes).unwrap() * chain.r0);
        let mean = trace.mean_delivery_time.unwrap();
        let se = trace.rate_stderr_hz.unwrap() / trace.empirical_rate_hz.unwrap() * mean;
        assert!((mean - expect_time).abs() < 4.0 * se, "{mean} vs {expect_time}");
        let ratio = trace.empirical_rate_hz.unwrap() / analytic;
        assert!((ratio - 1.0).abs() < 0.2, "{ratio}");
        assert!(trace.delivery.attempts >= trace.delivery.successes);
    }
}

#[test]
fn one_level_with_certain_generation_matches_mean_field() {
    let chain = ChainParams {
        n_levels: 1,
        chi: 1.0,
        eta_fc: 1.0,
        l0: 1e-9,
        mode_count: 1,
        ..ChainParams::default()
    };
    let trace = simulate_chain(&SimConfig { chain: chain.clone(), trials: 20_000, seed: 8, max_sim_time: 1.0 }).unwrap();
    let analytic = swap_chain(&chain).unwrap().rate_hz;
    let ratio = trace.empirical_rate_hz.unwrap() / analytic;
    assert!((ratio - 1.0).abs() < 0.2, "{ratio}");
    let swaps = trace.levels[0];
    let f = swaps.success_fraction().unwrap();
    let sigma = (0.72f64 * 0.28 / swaps.attempts as f64).sqrt();
    assert!((f - 0.72).abs() < 4.0 * sigma, "{f}");
}

#[test]
fn nested_chain_waits_longer_than_mean_field() {
    // The slower of two sibling segments sets the pace of every swap, which
    // the mean-time recursion ignores.
    let config = SimConfig { chain: ChainParams::default(), trials: 1000, seed: 1, max_sim_time: 1e4 };
    let trace = simulate_chain(&config).unwrap();
    let analytic = trace.analytic_rate_hz.unwrap();
    let mc = trace.empirical_rate_hz.unwrap();
    assert!(mc < analytic);
    assert!(mc > 1.0);
    for (level, stats) in trace.levels.iter().enumerate() {
        assert!(stats.successes <= stats.attempts, "level {}", level + 1);
    }
    assert_eq!(trace.delivered() + trace.timed_out, trace.trials);
}

#[test]
fn trace_independent_of_worker_count() {
    let config = SimConfig {
        chain: ChainParams { n_levels: 3, ..ChainParams::default() },
        trials: 300,
        seed: 99,
        max_sim_time: 1e4,
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_chain(&config).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
    let link = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_elementary_link(&ChainParams::default(), 50_000, 3).unwrap())
    };
    assert_eq!(link(1), link(4));
}

#[test]
fn delivery_times_are_positive_tick_multiples() {
    let config = SimConfig { chain: ChainParams { n_levels: 2, ..ChainParams::default() }, trials: 500, seed: 5, max_sim_time: 1e4 };
    let trace = simulate_chain(&config).unwrap();
    for t in &trace.delivery_times {
        let k = t / trace.t_cc;
        assert!(k >= 1.0 - 1e-12 && (k - k.round()).abs() < 1e-6);
    }
    assert_eq!(trace.latency_histogram.counts.iter().sum::<u64>(), trace.delivered());
}

#[test]
fn timeouts_are_counted() {
    let chain = ChainParams { n_levels: 4, ..ChainParams::default() };
    let config = SimConfig { chain, trials: 50, seed: 6, max_sim_time: 2e-3 };
    let trace = simulate_chain(&config).unwrap();
    assert_eq!(trace.timed_out, 50);
    assert!(trace.delivery_times.is_empty());
}
