//! Simulated measurement campaigns on one elementary link.
//!
//! A campaign mirrors the laboratory procedure. For every storage time the
//! link is run many times in the number basis to tally `P_mn`, and once per
//! analyser phase in the interference basis to record a fringe. The fringe
//! gives the visibility, and together with `P_mn` the concurrence. A second
//! scan over the mode count records the multiplexed Stokes detection
//! probability `P_D^(N)`.
//!
//! Train `i` of a given kind always uses the random stream `(seed, kind, i)`,
//! whatever the storage time or mode count. Points of a scan therefore see
//! the same write trains, and differences between them come from the
//! parameter change rather than from sampling noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{fit_linear_origin, fit_sinusoid, FitError, FitResult, Samples};
use crate::link::analytic::window_detection_probability;
use crate::link::{
    detect_stokes, readout, sample_write_train, HeraldSign, LinkError, LinkParams, PmnTable,
    ReadoutBasis,
};
use crate::metrics::{
    bootstrap_concurrence_se, concurrence, intrinsic_efficiency, visibility, CountsRecord,
    MetricsError,
};
use crate::error::ParamError;
use crate::rng::{Domain, StreamFactory};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("no heralds in {trains} trains at storage time {storage_time} s")]
    NoHeralds { storage_time: f64, trains: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityMethod {
    /// Visibility of the fitted sinusoid.
    #[default]
    Fit,
    /// `(max − min) / (max + min)` of the raw phase bins.
    RawBins,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub link: LinkParams,
    pub storage_times: Vec<f64>,
    /// Mode counts of the scan, run at `mode_scan_storage_time`.
    pub mode_counts: Vec<usize>,
    pub mode_scan_storage_time: f64,
    /// Number-basis trains per point.
    pub trains: u64,
    /// Interference-basis trains per phase setting.
    pub fringe_trains: u64,
    pub fringe_phases: usize,
    pub bootstrap_replicates: u32,
    pub visibility_method: VisibilityMethod,
    pub seed: u64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            link: LinkParams::default(),
            storage_times: vec![1e-6],
            mode_counts: Vec::new(),
            mode_scan_storage_time: 1e-6,
            trains: 1_000_000,
            fringe_trains: 100_000,
            fringe_phases: 12,
            bootstrap_replicates: 200,
            visibility_method: VisibilityMethod::Fit,
            seed: 0,
        }
    }
}

/// The link at the largest of `modes`, which every smaller count truncates.
fn widest(link: &LinkParams, modes: &[usize]) -> Result<LinkParams, ExperimentError> {
    let Some(&max) = modes.iter().max() else {
        return Err(LinkError::from(ParamError::new("mode_counts", 0.0, "empty list")).into());
    };
    if modes.contains(&0) {
        return Err(LinkError::from(ParamError::new("mode_counts", 0.0, "must be at least 1")).into());
    }
    let wide = LinkParams { mode_count: max, ..link.clone() };
    wide.validate().map_err(LinkError::from)?;
    Ok(wide)
}

/// Number-basis counts for several mode counts from one set of trains.
///
/// Each train is sampled once at the largest mode count. Because every draw
/// sits at a fixed position of the train's stream, cutting it to `N` modes
/// gives exactly the train an `N`-mode run would have sampled, so entry `k`
/// equals `count_trains` at `modes[k]`.
pub fn count_trains_by_modes(
    link: &LinkParams,
    modes: &[usize],
    storage_time: f64,
    trains: u64,
    domain: Domain,
    seed: u64,
) -> Result<Vec<CountsRecord>, ExperimentError> {
    let wide = widest(link, modes)?;
    let factory = StreamFactory::new(seed);
    let fresh = || modes.iter().map(|&n| CountsRecord::new(storage_time, n)).collect::<Vec<_>>();
    let records = (0..trains)
        .into_par_iter()
        .try_fold(fresh, |mut recs, i| -> Result<Vec<CountsRecord>, LinkError> {
            let mut rng = factory.stream(domain, i);
            let train = sample_write_train(&wide, &mut rng)?;
            let clicks = detect_stokes(&train, &wide, &mut rng);
            let herald = clicks.herald(&wide);
            for (rec, &n) in recs.iter_mut().zip(modes) {
                rec.trains += 1;
                for w in clicks.windows.iter().take_while(|w| w.window < n) {
                    rec.stokes_ds1[w.window] += w.ds1 as u64;
                    rec.stokes_ds2[w.window] += w.ds2 as u64;
                }
                if let Some(h) = herald.filter(|h| h.mode_index < n) {
                    rec.heralds += 1;
                    let counts = readout(Some(&h), &train.truncated(n), storage_time, ReadoutBasis::Number, &wide, &mut rng)?;
                    let (m, k) = counts.clicks();
                    rec.coincidences[m][k] += 1;
                }
            }
            Ok(recs)
        })
        .try_reduce(fresh, |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                x.merge(y);
            }
            Ok(a)
        })?;
    Ok(records)
}

/// Counts of one link configuration in the number basis.
pub fn count_trains(
    link: &LinkParams,
    storage_time: f64,
    trains: u64,
    domain: Domain,
    seed: u64,
) -> Result<CountsRecord, ExperimentError> {
    let mut out = count_trains_by_modes(link, &[link.mode_count], storage_time, trains, domain, seed)?;
    Ok(out.remove(0))
}

/// Heralds and matching coincidences per analyser phase.
///
/// A `D_S1` herald is paired with `D_aS1` and a `D_S2` herald with `D_aS2`;
/// the two fringes coincide, so both halves of the data are pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeCounts {
    pub phases: Vec<f64>,
    pub heralds: Vec<u64>,
    pub coincidences: Vec<u64>,
}

impl FringeCounts {
    /// Coincidences per herald at each phase.
    pub fn rates(&self) -> Vec<f64> {
        self.coincidences
            .iter()
            .zip(&self.heralds)
            .map(|(&c, &h)| c as f64 / h.max(1) as f64)
            .collect()
    }
}

/// Fringes for several mode counts from one set of trains per phase; see
/// [`count_trains_by_modes`].
pub fn record_fringe_by_modes(
    link: &LinkParams,
    modes: &[usize],
    storage_time: f64,
    trains_per_phase: u64,
    phases: usize,
    seed: u64,
) -> Result<Vec<FringeCounts>, ExperimentError> {
    let wide = widest(link, modes)?;
    let factory = StreamFactory::new(seed);
    let mut out = vec![
        FringeCounts {
            phases: Vec::with_capacity(phases),
            heralds: Vec::with_capacity(phases),
            coincidences: Vec::with_capacity(phases),
        };
        modes.len()
    ];
    for k in 0..phases {
        let theta = std::f64::consts::TAU * k as f64 / phases as f64;
        let basis = ReadoutBasis::Interference { theta };
        let domain = Domain::fringe_phase(k as u32);
        let tallies = (0..trains_per_phase)
            .into_par_iter()
            .try_fold(
                || vec![(0u64, 0u64); modes.len()],
                |mut acc, i| -> Result<Vec<(u64, u64)>, LinkError> {
                    let mut rng = factory.stream(domain, i);
                    let train = sample_write_train(&wide, &mut rng)?;
                    let Some(herald) = detect_stokes(&train, &wide, &mut rng).herald(&wide) else {
                        return Ok(acc);
                    };
                    for (slot, &n) in acc.iter_mut().zip(modes) {
                        if herald.mode_index >= n {
                            continue;
                        }
                        let counts = readout(Some(&herald), &train.truncated(n), storage_time, basis, &wide, &mut rng)?;
                        let matched = match herald.heralded_sign {
                            HeraldSign::Plus => counts.first > 0,
                            HeraldSign::Minus => counts.second > 0,
                        };
                        slot.0 += 1;
                        slot.1 += matched as u64;
                    }
                    Ok(acc)
                },
            )
            .try_reduce(
                || vec![(0, 0); modes.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(&b) {
                        x.0 += y.0;
                        x.1 += y.1;
                    }
                    Ok(a)
                },
            )?;
        for (fringe, (heralds, hits)) in out.iter_mut().zip(tallies) {
            fringe.phases.push(theta);
            fringe.heralds.push(heralds);
            fringe.coincidences.push(hits);
        }
    }
    Ok(out)
}

pub fn record_fringe(
    link: &LinkParams,
    storage_time: f64,
    trains_per_phase: u64,
    phases: usize,
    seed: u64,
) -> Result<FringeCounts, ExperimentError> {
    let mut out = record_fringe_by_modes(link, &[link.mode_count], storage_time, trains_per_phase, phases, seed)?;
    Ok(out.remove(0))
}

/// Visibility and its standard error from a recorded fringe.
pub fn fringe_visibility(
    fringe: &FringeCounts,
    method: VisibilityMethod,
) -> Result<(f64, f64), ExperimentError> {
    let rates = fringe.rates();
    match method {
        VisibilityMethod::Fit => {
            // Poisson variance of a rate c/h is c/h²; weights are its inverse.
            let weights = fringe
                .coincidences
                .iter()
                .zip(&fringe.heralds)
                .map(|(&c, &h)| (h as f64).powi(2) / (c as f64).max(1.0))
                .collect();
            let samples = Samples::with_weights(fringe.phases.clone(), rates, weights)?;
            let fit = fit_sinusoid(&samples)?;
            Ok((fit.params[1], fit.std_errors[1]))
        }
        VisibilityMethod::RawBins => {
            let (hi, lo) = rates
                .iter()
                .enumerate()
                .fold((0, 0), |(hi, lo), (k, &r)| {
                    (if r > rates[hi] { k } else { hi }, if r < rates[lo] { k } else { lo })
                });
            let (a, b) = (rates[hi], rates[lo]);
            let v = visibility(a, b)?;
            let var = |k: usize| fringe.coincidences[k] as f64 / (fringe.heralds[k].max(1) as f64).powi(2);
            let s2 = (a + b).powi(4);
            let se = ((2.0 * b).powi(2) * var(hi) / s2 + (2.0 * a).powi(2) * var(lo) / s2).sqrt();
            Ok((v, se))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoragePoint {
    pub storage_time: f64,
    pub concurrence: f64,
    pub concurrence_se: f64,
    pub visibility: f64,
    pub visibility_se: f64,
    /// Intrinsic efficiency, `None` when undefined.
    pub efficiency: Option<f64>,
    pub pmn: PmnTable,
    pub record: CountsRecord,
    pub fringe: FringeCounts,
}

fn summarize(
    link: &LinkParams,
    storage_time: f64,
    plan: &ExperimentPlan,
    record: CountsRecord,
    fringe: FringeCounts,
) -> Result<StoragePoint, ExperimentError> {
    if record.heralds == 0 {
        return Err(ExperimentError::NoHeralds { storage_time, trains: record.trains });
    }
    if fringe.heralds.iter().all(|&h| h == 0) {
        return Err(ExperimentError::NoHeralds {
            storage_time,
            trains: plan.fringe_trains * plan.fringe_phases as u64,
        });
    }
    let (v, v_se) = fringe_visibility(&fringe, plan.visibility_method)?;
    let pmn = record.pmn();
    let c = concurrence(&pmn, v)?;
    let c_se = bootstrap_concurrence_se(&record, v, v_se, plan.bootstrap_replicates, plan.seed)?;
    let efficiency = match intrinsic_efficiency(&record, &pmn, link.detection_eff) {
        Ok(eta) => Some(eta),
        Err(MetricsError::Undefined(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(StoragePoint {
        storage_time,
        concurrence: c.concurrence,
        concurrence_se: c_se,
        visibility: v,
        visibility_se: v_se,
        efficiency,
        pmn,
        record,
        fringe,
    })
}

/// [`measure_point`] at each of `modes`, sharing trains between them.
pub fn measure_modes(
    link: &LinkParams,
    modes: &[usize],
    storage_time: f64,
    plan: &ExperimentPlan,
) -> Result<Vec<StoragePoint>, ExperimentError> {
    let records = count_trains_by_modes(link, modes, storage_time, plan.trains, Domain::PMN_TRAINS, plan.seed)?;
    let fringes = record_fringe_by_modes(link, modes, storage_time, plan.fringe_trains, plan.fringe_phases, plan.seed)?;
    records
        .into_iter()
        .zip(fringes)
        .map(|(record, fringe)| summarize(link, storage_time, plan, record, fringe))
        .collect()
}

/// Concurrence, visibility and efficiency at one storage time.
pub fn measure_point(
    link: &LinkParams,
    storage_time: f64,
    plan: &ExperimentPlan,
) -> Result<StoragePoint, ExperimentError> {
    let mut out = measure_modes(link, &[link.mode_count], storage_time, plan)?;
    Ok(out.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModePoint {
    pub mode_count: usize,
    /// `P_D^(N)`: Stokes clicks per train summed over windows and detectors.
    pub detection: f64,
    pub detection_se: f64,
    pub concurrence: f64,
    pub concurrence_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScan {
    pub points: Vec<ModePoint>,
    /// Line through the origin fitted to `P_D^(N)` against `N`.
    pub slope: FitResult,
    /// Single-mode detection probability of the model.
    pub expected_slope: f64,
}

/// `P_D^(N)` with its standard error from `trains` independent trains.
///
/// Each mode count draws from its own stream family, so points of the scan
/// are statistically independent.
pub fn detection_probability(
    link: &LinkParams,
    trains: u64,
    seed: u64,
) -> Result<(f64, f64), ExperimentError> {
    link.validate().map_err(LinkError::from)?;
    let factory = StreamFactory::new(seed);
    let domain = Domain::mode_scan(link.mode_count as u32);
    let (sum, sum_sq) = (0..trains)
        .into_par_iter()
        .try_fold(
            || (0u64, 0u64),
            |(s, s2), i| -> Result<(u64, u64), LinkError> {
                let mut rng = factory.stream(domain, i);
                let train = sample_write_train(link, &mut rng)?;
                let clicks: u64 = detect_stokes(&train, link, &mut rng)
                    .windows
                    .iter()
                    .map(|w| w.ds1 as u64 + w.ds2 as u64)
                    .sum();
                Ok((s + clicks, s2 + clicks * clicks))
            },
        )
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let n = trains as f64;
    let mean = sum as f64 / n;
    let var = (sum_sq as f64 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

pub fn mode_scan(plan: &ExperimentPlan) -> Result<ModeScan, ExperimentError> {
    let measured = measure_modes(&plan.link, &plan.mode_counts, plan.mode_scan_storage_time, plan)?;
    let mut points = Vec::with_capacity(plan.mode_counts.len());
    for (&n, point) in plan.mode_counts.iter().zip(measured) {
        let link = LinkParams { mode_count: n, ..plan.link.clone() };
        let (detection, detection_se) = detection_probability(&link, plan.trains, plan.seed)?;
        points.push(ModePoint {
            mode_count: n,
            detection,
            detection_se,
            concurrence: point.concurrence,
            concurrence_se: point.concurrence_se,
        });
    }
    let samples = Samples::with_weights(
        points.iter().map(|p| p.mode_count as f64).collect(),
        points.iter().map(|p| p.detection).collect(),
        points.iter().map(|p| 1.0 / p.detection_se.max(f64::MIN_POSITIVE).powi(2)).collect(),
    )?;
    Ok(ModeScan {
        slope: fit_linear_origin(&samples)?,
        expected_slope: window_detection_probability(&plan.link),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub storage_scan: Vec<StoragePoint>,
    pub mode_scan: Option<ModeScan>,
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport, ExperimentError> {
    let storage_scan = plan
        .storage_times
        .iter()
        .map(|&t| measure_point(&plan.link, t, plan))
        .collect::<Result<_, _>>()?;
    let mode_scan = if plan.mode_counts.is_empty() {
        None
    } else {
        Some(mode_scan(plan)?)
    };
    Ok(ExperimentReport { storage_scan, mode_scan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::analytic::{expected_pmn, fringe_model};

    fn plan() -> ExperimentPlan {
        ExperimentPlan {
            trains: 200_000,
            fringe_trains: 20_000,
            fringe_phases: 8,
            bootstrap_replicates: 50,
            seed: 5,
            ..ExperimentPlan::default()
        }
    }

    #[test]
    fn counts_follow_the_closed_form() {
        let link = LinkParams { crosstalk_eps: 0.5, ..LinkParams::default() };
        let rec = count_trains(&link, 1e-6, 200_000, Domain::PMN_TRAINS, 1).unwrap();
        rec.validate().unwrap();
        let got = rec.pmn();
        let want = expected_pmn(1e-6, &link);
        let n = rec.trains as f64;
        for (g, w) in [(got.p00, want.p00), (got.p01, want.p01), (got.p10, want.p10)] {
            let sigma = (w * (1.0 - w) / n).sqrt();
            assert!((g - w).abs() < 4.0 * sigma, "{g} vs {w}");
        }
    }

    #[test]
    fn shared_trains_match_separate_runs() {
        let link = LinkParams { crosstalk_eps: 0.6, dark_count_prob: 1e-3, ..LinkParams::default() };
        let modes = [1, 5, 12];
        let joint = count_trains_by_modes(&link, &modes, 2e-6, 30_000, Domain::PMN_TRAINS, 4).unwrap();
        let fringes = record_fringe_by_modes(&link, &modes, 2e-6, 5_000, 4, 4).unwrap();
        for (k, &n) in modes.iter().enumerate() {
            let single = LinkParams { mode_count: n, ..link.clone() };
            assert_eq!(joint[k], count_trains(&single, 2e-6, 30_000, Domain::PMN_TRAINS, 4).unwrap());
            assert_eq!(fringes[k], record_fringe(&single, 2e-6, 5_000, 4, 4).unwrap());
        }
        assert!(count_trains_by_modes(&link, &[], 0.0, 10, Domain::PMN_TRAINS, 0).is_err());
    }

    #[test]
    fn counting_is_deterministic() {
        let link = LinkParams::default();
        let a = count_trains(&link, 1e-6, 5000, Domain::PMN_TRAINS, 9).unwrap();
        let b = count_trains(&link, 1e-6, 5000, Domain::PMN_TRAINS, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fringe_visibility_tracks_model() {
        let link = LinkParams { visibility_cap: 0.9, crosstalk_eps: 0.3, ..LinkParams::default() };
        let fringe = record_fringe(&link, 1e-6, 100_000, 8, 2).unwrap();
        let (v, se) = fringe_visibility(&fringe, VisibilityMethod::Fit).unwrap();
        let want = fringe_model(1e-6, &link).visibility;
        assert!((v - want).abs() < 4.0 * se, "{v} ± {se} vs {want}");
        let (raw, _) = fringe_visibility(&fringe, VisibilityMethod::RawBins).unwrap();
        assert!((0.0..=1.0).contains(&raw));
    }

    #[test]
    fn silent_link_reports_no_heralds() {
        let link = LinkParams { chi: 0.0, ..LinkParams::default() };
        assert!(matches!(
            measure_point(&link, 1e-6, &plan()),
            Err(ExperimentError::NoHeralds { .. })
        ));
    }

    #[test]
    fn detection_grows_with_modes() {
        let link = LinkParams::default();
        let (one, _) = detection_probability(&LinkParams { mode_count: 1, ..link.clone() }, 200_000, 3).unwrap();
        let (twelve, se) = detection_probability(&link, 200_000, 3).unwrap();
        let p = window_detection_probability(&link);
        assert!((one - p).abs() < 5.0 * (p / 200_000.0).sqrt());
        assert!((twelve - 12.0 * p).abs() < 5.0 * se);
    }
}
