use dlcz_cli::config::{ExperimentSection, SimMode, SimSection};
use dlcz_cli::RunConfig;
use dlcz_repeater::experiment::VisibilityMethod;
use dlcz_repeater::link::calibrate::{calibrate, CalibrationTargets};
use dlcz_repeater::link::LinkParams;
use dlcz_repeater::rate::ChainParams;
use proptest::prelude::*;

fn repo_config(name: &str) -> RunConfig {
    let path = format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"));
    RunConfig::load(std::path::Path::new(&path)).unwrap()
}

#[test]
fn shipped_configs_are_valid() {
    for name in ["projection.toml", "link_calibrated.toml", "mode_scan.toml"] {
        let c = repo_config(name);
        c.chain().validate().unwrap();
        c.link().validate().unwrap();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c, "{name}");
    }
    assert_eq!(repo_config("projection.toml").chain(), ChainParams::default());
}

#[test]
fn calibrated_config_matches_the_fit() {
    let recorded = repo_config("link_calibrated.toml").link();
    let fit = calibrate(&LinkParams::default(), &CalibrationTargets::measured_link()).unwrap().params;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1e-3);
    assert!(close(recorded.detection_eff, fit.detection_eff));
    assert!(close(recorded.stokes_detection_eff, fit.stokes_detection_eff));
    assert!(close(recorded.crosstalk_eps, fit.crosstalk_eps));
    assert!(close(recorded.visibility_cap, fit.visibility_cap));
    assert_eq!(recorded.chi, fit.chi);
    assert_eq!(recorded.retrieval_eff_zero, fit.retrieval_eff_zero);
    assert_eq!(recorded.memory_lifetime, fit.memory_lifetime);
}

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn chain() -> impl Strategy<Value = ChainParams> {
    (
        (1e-3..1e4f64, 1.0..100.0f64, 0u32..12, 1e3..3e5f64),
        (unit(), unit(), unit(), 1u32..1000),
        (unit(), 1e-6..1e3f64, unit()),
    )
        .prop_map(|((l0, l_att, n_levels, fiber_speed), (eta_fc, eta_td, chi, mode_count), (r0, tau0, swap))| {
            ChainParams {
                l0,
                l_att,
                n_levels,
                fiber_speed,
                eta_fc,
                eta_td,
                chi,
                mode_count,
                r0,
                tau0,
                swap_intrinsic_factor: swap,
            }
        })
}

fn link() -> impl Strategy<Value = LinkParams> {
    (
        (unit(), 1usize..50, 1e-9..1e-6f64),
        (unit(), 1e-6..1.0f64, unit(), unit()),
        (unit(), unit(), unit(), -10.0..10.0f64, -10.0..10.0f64),
    )
        .prop_map(|((chi, mode_count, pulse), (r0, tau0, eta_d, eta_td), (vc, dark, eps, ps, pa))| LinkParams {
            chi,
            mode_count,
            pulse_interval: pulse,
            train_duration: pulse * mode_count as f64 * 1.5,
            retrieval_eff_zero: r0,
            memory_lifetime: tau0,
            detection_eff: eta_d,
            stokes_detection_eff: eta_td,
            visibility_cap: vc,
            dark_count_prob: dark,
            crosstalk_eps: eps,
            phase_s: ps,
            phase_as: pa,
        })
}

fn experiment() -> impl Strategy<Value = ExperimentSection> {
    (
        prop::collection::vec(0.0..1e4f64, 0..8),
        prop::collection::vec(1usize..100, 0..8),
        (0.0..1e3f64, 1u64..1u64 << 40, 1u64..1u64 << 40, 4usize..64, 2u32..1000, any::<bool>()),
    )
        .prop_map(|(times, modes, (t_scan, trains, fringe, phases, reps, raw))| ExperimentSection {
            storage_times_us: times,
            mode_counts: modes,
            mode_scan_storage_time_us: t_scan,
            trains,
            fringe_trains: fringe,
            fringe_phases: phases,
            bootstrap_replicates: reps,
            visibility_method: if raw { VisibilityMethod::RawBins } else { VisibilityMethod::Fit },
        })
}

fn sim() -> impl Strategy<Value = SimSection> {
    (any::<bool>(), 1u64..1u64 << 40, 1e-3..1e6f64).prop_map(|(e, trials, max)| SimSection {
        mode: if e { SimMode::ElementaryLink } else { SimMode::Chain },
        trials,
        max_sim_time_s: max,
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn configuration_round_trips(
        seed in any::<u64>(),
        chain in prop::option::of(chain()),
        sim in prop::option::of(sim()),
        link in prop::option::of(link()),
        experiment in prop::option::of(experiment()),
    ) {
        let c = RunConfig { seed, chain, sim, link, experiment };
        prop_assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }
}
