//! Property checks of the concurrence, visibility and efficiency estimators.

use dlcz_repeater::link::PmnTable;
use dlcz_repeater::metrics::{concurrence, intrinsic_efficiency, visibility, CountsRecord};
use proptest::prelude::*;

const CASES: u32 = 10_000;

fn pmn() -> impl Strategy<Value = PmnTable> {
    // Four raw weights plus slack, normalised so the table sums to at most one.
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..2.0f64)
        .prop_filter("empty table", |(a, b, c, d, _)| a + b + c + d > 1e-9)
        .prop_map(|(a, b, c, d, slack)| {
            let s = a + b + c + d + slack;
            PmnTable { p00: a / s, p01: b / s, p10: c / s, p11: d / s }
        })
}

fn record(trains: u64, ds1: &[u64], ds2: &[u64]) -> CountsRecord {
    let mut r = CountsRecord::new(1e-6, ds1.len());
    r.trains = trains;
    r.stokes_ds1.copy_from_slice(ds1);
    r.stokes_ds2.copy_from_slice(ds2);
    r
}

proptest! {
    #![proptest_config(ProptestConfig { cases: CASES, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn concurrence_is_bounded(t in pmn(), v in 0.0..=1.0f64) {
        let r = concurrence(&t, v).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.concurrence));
        let raw = (2.0 * r.coherence.abs() - 2.0 * (t.p00 * t.p11).sqrt()) / r.normalization;
        prop_assert_eq!(r.concurrence, raw.clamp(0.0, 1.0));
    }

    #[test]
    fn concurrence_ignores_common_scale(t in pmn(), v in 0.0..=1.0f64, k in 1e-3..1.0f64) {
        let a = concurrence(&t, v).unwrap().concurrence;
        let b = concurrence(&t.scaled(k), v).unwrap().concurrence;
        prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn concurrence_monotone(t in pmn(), v in 0.0..=1.0f64, dv in 0.0..=1.0f64, share in 0.0..=1.0f64) {
        let c = concurrence(&t, v).unwrap().concurrence;
        let room = 1.0 - t.total();
        let more_v = concurrence(&t, (v + dv).min(1.0)).unwrap().concurrence;
        prop_assert!(more_v >= c - 1e-15);
        let more_p11 = PmnTable { p11: t.p11 + share * room, ..t };
        prop_assert!(concurrence(&more_p11, v).unwrap().concurrence <= c + 1e-15);
        let more_p00 = PmnTable { p00: t.p00 + share * room, ..t };
        prop_assert!(concurrence(&more_p00, v).unwrap().concurrence <= c + 1e-15);
    }

    #[test]
    fn visibility_is_bounded(min in 0.0..1e6f64, extra in 0.0..1e6f64) {
        let max = min + extra;
        prop_assume!(max > 0.0);
        let v = visibility(max, min).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn visibility_ignores_common_scale(min in 0.0..1e6f64, extra in 1e-3..1e6f64, k in 1e-3..1e3f64) {
        let a = visibility(min + extra, min).unwrap();
        let b = visibility(k * (min + extra), k * min).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn visibility_monotone(min in 0.0..1e6f64, extra in 1e-3..1e6f64, d in 0.0..1e6f64) {
        let max = min + extra;
        let v = visibility(max, min).unwrap();
        prop_assert!(visibility(max + d, min).unwrap() >= v - 1e-15);
        let lower = (min - d).max(0.0);
        prop_assert!(visibility(max, lower).unwrap() >= v - 1e-15);
    }

    #[test]
    fn efficiency_bounded_and_monotone(
        t in pmn(),
        clicks in prop::collection::vec((0u64..500, 0u64..500), 1..13),
        eta_d in 0.01..=1.0f64,
        boost in 0.0..=1.0f64,
    ) {
        let trains = 1000;
        let ds1: Vec<u64> = clicks.iter().map(|c| c.0).collect();
        let ds2: Vec<u64> = clicks.iter().map(|c| c.1).collect();
        prop_assume!(ds1.iter().chain(&ds2).sum::<u64>() > 0);
        let rec = record(trains, &ds1, &ds2);
        let eta = intrinsic_efficiency(&rec, &t, eta_d).unwrap();
        prop_assert!((0.0..=1.0).contains(&eta));

        // More single clicks never lower the estimate.
        let room = 1.0 - t.total();
        let more = PmnTable { p01: t.p01 + boost * room, ..t };
        prop_assert!(intrinsic_efficiency(&rec, &more, eta_d).unwrap() >= eta - 1e-15);
        // A larger detection efficiency or more Stokes clicks never raise it.
        let higher_eta = (eta_d * (1.0 + boost)).min(1.0);
        prop_assert!(intrinsic_efficiency(&rec, &t, higher_eta).unwrap() <= eta + 1e-15);
        let ds1_more: Vec<u64> = ds1.iter().map(|c| c + 1).collect();
        let busier = record(trains, &ds1_more, &ds2);
        prop_assert!(intrinsic_efficiency(&busier, &t, eta_d).unwrap() <= eta + 1e-15);
    }

    #[test]
    fn efficiency_ignores_common_scale(
        t in pmn(),
        clicks in prop::collection::vec((0u64..500, 0u64..500), 1..13),
        eta_d in 0.01..=1.0f64,
        k in 2u64..6,
    ) {
        let ds1: Vec<u64> = clicks.iter().map(|c| c.0).collect();
        let ds2: Vec<u64> = clicks.iter().map(|c| c.1).collect();
        prop_assume!(ds1.iter().chain(&ds2).sum::<u64>() > 0);
        let base = intrinsic_efficiency(&record(10_000, &ds1, &ds2), &t.scaled(1.0 / k as f64), eta_d).unwrap();
        // k times the Stokes clicks and k times the readout probabilities.
        let ds1k: Vec<u64> = ds1.iter().map(|c| c * k).collect();
        let ds2k: Vec<u64> = ds2.iter().map(|c| c * k).collect();
        let scaled = intrinsic_efficiency(&record(10_000, &ds1k, &ds2k), &t, eta_d).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-12, "{} vs {}", base, scaled);
    }
}

#[test]
fn efficiency_reference_cases() {
    // Lossless data: every Stokes click is followed by one anti-Stokes click.
    let rec = record(1000, &[30, 20], &[25, 25]);
    let t = PmnTable { p00: 0.0, p01: 0.05, p10: 0.05, p11: 0.0 };
    assert!((intrinsic_efficiency(&rec, &t, 1.0).unwrap() - 1.0).abs() < 1e-12);
    let t = PmnTable { p00: 0.0, p01: 0.0, p10: 0.0, p11: 0.0 };
    let empty = record(1000, &[0], &[0]);
    assert!(intrinsic_efficiency(&empty, &t, 0.5).is_err());
}
