//! Monte Carlo sampling of single write trains.
//!
//! All draws come from the train's own stream (see [`crate::rng`]) at fixed
//! regions, so a train sampled with `N` modes and the same train sampled
//! with `N + 1` modes share every draw of the first `N` modes. Scans over
//! mode count or storage time thereby use common random numbers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use super::analytic::excitation_distribution;
use super::{
    Detector, HeraldEvent, HeraldOrigin, HeraldSign, LinkError, LinkParams, ModeExcitation, Node,
};
use crate::rng::{seek, Region};

/// Excited slots of one write train, ordered by mode then node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WriteTrain {
    mode_count: usize,
    excited: Vec<ModeExcitation>,
}

impl WriteTrain {
    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    /// Modes holding at least one excitation.
    pub fn excited(&self) -> &[ModeExcitation] {
        &self.excited
    }

    pub fn occupation(&self, node: Node, mode: usize) -> u8 {
        self.excited
            .iter()
            .find(|e| e.node == node && e.mode_index == mode)
            .map_or(0, |e| e.excitation_number)
    }

    /// The same train cut to its first `mode_count` modes; identical to
    /// sampling the shorter train from the same stream.
    pub fn truncated(&self, mode_count: usize) -> WriteTrain {
        let mode_count = mode_count.min(self.mode_count);
        WriteTrain {
            mode_count,
            excited: self.excited.iter().copied().filter(|e| e.mode_index < mode_count).collect(),
        }
    }

    /// Full per-mode list for one ensemble, zeros included.
    pub fn excitations(&self, node: Node) -> Vec<ModeExcitation> {
        (0..self.mode_count)
            .map(|mode_index| ModeExcitation {
                node,
                mode_index,
                excitation_number: self.occupation(node, mode_index),
            })
            .collect()
    }
}

/// Draws the spin-wave occupations of one train.
///
/// Slots `(mode, node)` are visited in the order `L0, R0, L1, R1, ...`; the
/// gap to the next excited slot is geometric, so the cost scales with the
/// number of excitations rather than with `mode_count`.
pub fn sample_write_train(
    params: &LinkParams,
    rng: &mut ChaCha8Rng,
) -> Result<WriteTrain, LinkError> {
    params.validate()?;
    let [p0, _, p2] = excitation_distribution(params.chi);
    let mut train = WriteTrain {
        mode_count: params.mode_count,
        excited: Vec::new(),
    };
    let p_excited = 1.0 - p0;
    if p_excited <= 0.0 {
        return Ok(train);
    }
    let gap = Geometric::new(p_excited).expect("probability checked above");
    let double_given_excited = p2 / p_excited;
    let slots = 2 * params.mode_count as u64;
    seek(rng, Region::Excitation);
    let mut next = 0u64;
    loop {
        let skip = gap.sample(rng);
        let slot = next.saturating_add(skip);
        if slot >= slots {
            break;
        }
        let excitation_number = if rng.random::<f64>() < double_given_excited {
            2
        } else {
            1
        };
        train.excited.push(ModeExcitation {
            node: if slot % 2 == 0 { Node::L } else { Node::R },
            mode_index: (slot / 2) as usize,
            excitation_number,
        });
        next = slot + 1;
    }
    Ok(train)
}

/// Clicks of both Stokes detectors in one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowClicks {
    pub window: usize,
    pub ds1: bool,
    pub ds2: bool,
    /// Detector credited with the herald if this window heralds.
    pub detector: Detector,
    pub origin: HeraldOrigin,
}

/// Every window of a train in which a Stokes detector clicked.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StokesClicks {
    pub windows: Vec<WindowClicks>,
}

impl StokesClicks {
    /// The earliest clicking window heralds; later clicks are ignored.
    pub fn herald(&self, params: &LinkParams) -> Option<HeraldEvent> {
        self.windows.first().map(|w| HeraldEvent {
            detector: w.detector,
            mode_index: w.window,
            herald_time: w.window as f64 * params.pulse_interval,
            heralded_sign: w.detector.sign(),
            origin: w.origin,
        })
    }
}

/// Runs the beam-splitter measurement over every window of the train.
pub fn detect_stokes(
    train: &WriteTrain,
    params: &LinkParams,
    rng: &mut ChaCha8Rng,
) -> StokesClicks {
    let mut out = StokesClicks::default();
    let dark = params.dark_count_prob;
    let eta = params.stokes_detection_eff;
    for window in 0..train.mode_count {
        let k_left = train.occupation(Node::L, window);
        let k_right = train.occupation(Node::R, window);
        let total = k_left + k_right;
        if total == 0 && dark == 0.0 {
            continue;
        }
        seek(rng, Region::Herald(window));
        // Two (survive, route) pairs per ensemble, always drawn.
        let draws: [f64; 8] = rng.random();
        let mut at_ds1 = 0u8;
        let mut at_ds2 = 0u8;
        let photons = [k_left, k_right]
            .into_iter()
            .enumerate()
            .flat_map(|(n, k)| (0..k as usize).map(move |j| 2 * (2 * n + j)));
        for slot in photons {
            if draws[slot] < eta {
                if draws[slot + 1] < 0.5 {
                    at_ds1 += 1;
                } else {
                    at_ds2 += 1;
                }
            }
        }
        let [dark1, dark2, tie]: [f64; 3] = rng.random();
        let ds1 = at_ds1 > 0 || dark1 < dark;
        let ds2 = at_ds2 > 0 || dark2 < dark;
        if !(ds1 || ds2) {
            continue;
        }
        let detector = match (ds1, ds2) {
            (true, false) => Detector::DS1,
            (false, true) => Detector::DS2,
            _ if tie < 0.5 => Detector::DS1,
            _ => Detector::DS2,
        };
        let origin = match total {
            0 => HeraldOrigin::DarkCount,
            1 => {
                let photon_there = match detector {
                    Detector::DS1 => at_ds1 > 0,
                    Detector::DS2 => at_ds2 > 0,
                };
                if photon_there {
                    HeraldOrigin::SinglePhoton
                } else {
                    HeraldOrigin::DarkCount
                }
            }
            _ => HeraldOrigin::DoubleExcitation,
        };
        out.windows.push(WindowClicks {
            window,
            ds1,
            ds2,
            detector,
            origin,
        });
    }
    out
}

/// Heralding by single-photon interference: the earliest clicking window.
pub fn herald_bsm(
    train: &WriteTrain,
    params: &LinkParams,
    rng: &mut ChaCha8Rng,
) -> Option<HeraldEvent> {
    detect_stokes(train, params, rng).herald(params)
}

/// Detector setting of the anti-Stokes analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReadoutBasis {
    /// `aS_R` on `D_aS1` and `aS_L` on `D_aS2`; measures `P_mn`.
    Number,
    /// `aS_R` and `aS_L` combined with relative phase `theta`.
    Interference { theta: f64 },
}

/// Photon numbers reaching the two anti-Stokes detectors.
///
/// In the number basis `first` counts `aS_R` (the `m` of `P_mn`) and
/// `second` counts `aS_L`; in the interference basis they count `D_aS1`
/// and `D_aS2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReadoutCounts {
    pub first: u32,
    pub second: u32,
}

impl ReadoutCounts {
    /// Threshold-detector pattern `(m, n)` with `m, n ∈ {0, 1}`.
    pub fn clicks(&self) -> (usize, usize) {
        ((self.first > 0) as usize, (self.second > 0) as usize)
    }
}

/// Reads out a heralded train.
pub fn readout(
    herald: Option<&HeraldEvent>,
    train: &WriteTrain,
    storage_time: f64,
    basis: ReadoutBasis,
    params: &LinkParams,
    rng: &mut ChaCha8Rng,
) -> Result<ReadoutCounts, LinkError> {
    let herald = herald.ok_or(LinkError::NoHerald)?;
    if herald.mode_index >= train.mode_count {
        return Err(LinkError::ModeOutOfRange {
            mode: herald.mode_index,
            mode_count: train.mode_count,
        });
    }
    if storage_time.is_nan() || storage_time < 0.0 {
        return Err(LinkError::NegativeStorageTime(storage_time));
    }
    let convert = params.retrieval(storage_time) * params.detection_eff;
    let leak = params.crosstalk_eps * params.detection_eff;
    let addressed = herald.mode_index;
    let mut counts = ReadoutCounts::default();

    // Heralded mode. Node R maps to the first detector in the number basis.
    seek(rng, Region::Readout(addressed));
    let draws: [f64; 8] = rng.random();
    let coherent = herald.origin == HeraldOrigin::SinglePhoton;
    let to_first = match basis {
        ReadoutBasis::Number => None,
        ReadoutBasis::Interference { theta } if coherent => {
            let sign = match herald.heralded_sign {
                HeraldSign::Plus => 1.0,
                HeraldSign::Minus => -1.0,
            };
            let fringe = params.visibility_cap * (theta + params.fringe_phase()).cos();
            Some(0.5 * (1.0 + sign * fringe))
        }
        ReadoutBasis::Interference { .. } => Some(0.5),
    };
    for (n, node) in [Node::L, Node::R].into_iter().enumerate() {
        for j in 0..train.occupation(node, addressed) as usize {
            let slot = 2 * (2 * n + j);
            if draws[slot] >= convert {
                continue;
            }
            let first = match to_first {
                None => node == Node::R,
                Some(p) => draws[slot + 1] < p,
            };
            if first {
                counts.first += 1;
            } else {
                counts.second += 1;
            }
        }
    }

    // Phase-mismatched spin waves of all other modes.
    if leak > 0.0 {
        for exc in train.excited().iter().filter(|e| e.mode_index != addressed) {
            seek(rng, Region::Readout(exc.mode_index));
            let draws: [f64; 12] = rng.random();
            let base = 8 + 2 * (exc.node == Node::R) as usize;
            if draws[base] < leak {
                if draws[base + 1] < 0.5 {
                    counts.first += 1;
                } else {
                    counts.second += 1;
                }
            }
        }
    }

    seek(rng, Region::Train);
    let [dark1, dark2]: [f64; 2] = rng.random();
    counts.first += (dark1 < params.dark_count_prob) as u32;
    counts.second += (dark2 < params.dark_count_prob) as u32;
    Ok(counts)
}

/// Readout in the number basis, the measurement behind `P_mn`.
pub fn readout_pmn(
    herald: Option<&HeraldEvent>,
    train: &WriteTrain,
    storage_time: f64,
    params: &LinkParams,
    rng: &mut ChaCha8Rng,
) -> Result<ReadoutCounts, LinkError> {
    readout(herald, train, storage_time, ReadoutBasis::Number, params, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Domain, StreamFactory};

    fn trains(params: &LinkParams, n: u64, seed: u64) -> impl Iterator<Item = (WriteTrain, ChaCha8Rng)> + '_ {
        let f = StreamFactory::new(seed);
        (0..n).map(move |i| {
            let mut rng = f.stream(Domain::custom(99), i);
            (sample_write_train(params, &mut rng).unwrap(), rng)
        })
    }

    fn sigma3(p: f64, n: f64) -> f64 {
        3.0 * (p * (1.0 - p) / n).sqrt()
    }

    #[test]
    fn zero_chi_leaves_every_mode_empty() {
        let p = LinkParams {
            chi: 0.0,
            ..LinkParams::default()
        };
        for (t, _) in trains(&p, 1000, 1) {
            assert!(t.excited().is_empty());
            assert!(t.excitations(Node::L).iter().all(|e| e.excitation_number == 0));
            assert_eq!(t.excitations(Node::R).len(), 12);
        }
    }

    #[test]
    fn excited_fraction_matches_chi() {
        let p = LinkParams::default();
        let n_trains = 1_000_000u64;
        let excited: usize = trains(&p, n_trains, 2).map(|(t, _)| t.excited().len()).sum();
        let slots = (n_trains * 24) as f64;
        let frac = excited as f64 / slots;
        assert!((frac - 0.01).abs() < sigma3(0.01, slots), "fraction {frac}");
    }

    #[test]
    fn two_photon_ratio_follows_truncated_geometric() {
        // p_k ∝ χ^k, so P(2)/P(1) = χ.
        let p = LinkParams {
            chi: 0.5,
            ..LinkParams::default()
        };
        let (mut ones, mut twos) = (0u64, 0u64);
        for (t, _) in trains(&p, 20_000, 3) {
            for e in t.excited() {
                match e.excitation_number {
                    1 => ones += 1,
                    2 => twos += 1,
                    _ => unreachable!(),
                }
            }
        }
        let ratio = twos as f64 / ones as f64;
        // binomial share of twos among excited: 1/3, n ≈ 1.6e5
        let n = (ones + twos) as f64;
        let share = twos as f64 / n;
        assert!((share - 1.0 / 3.0).abs() < sigma3(1.0 / 3.0, n), "ratio {ratio}");
    }

    #[test]
    fn nothing_to_detect_means_no_herald() {
        let p = LinkParams {
            chi: 0.0,
            ..LinkParams::default()
        };
        for (t, mut rng) in trains(&p, 100, 4) {
            assert!(herald_bsm(&t, &p, &mut rng).is_none());
        }
    }

    #[test]
    fn single_excitation_splits_evenly() {
        let p = LinkParams {
            stokes_detection_eff: 1.0,
            ..LinkParams::default()
        };
        let train = WriteTrain {
            mode_count: 12,
            excited: vec![ModeExcitation {
                node: Node::L,
                mode_index: 3,
                excitation_number: 1,
            }],
        };
        let f = StreamFactory::new(5);
        let n = 40_000;
        let mut ds1 = 0;
        for i in 0..n {
            let mut rng = f.stream(Domain::custom(1), i);
            let h = herald_bsm(&train, &p, &mut rng).unwrap();
            assert_eq!(h.mode_index, 3);
            assert_eq!(h.origin, HeraldOrigin::SinglePhoton);
            assert!((h.herald_time - 1.2e-6).abs() < 1e-15);
            if h.detector == Detector::DS1 {
                assert_eq!(h.heralded_sign, HeraldSign::Plus);
                ds1 += 1;
            } else {
                assert_eq!(h.heralded_sign, HeraldSign::Minus);
            }
        }
        let frac = ds1 as f64 / n as f64;
        assert!((frac - 0.5).abs() < sigma3(0.5, n as f64));
    }

    #[test]
    fn earliest_window_wins() {
        let p = LinkParams {
            stokes_detection_eff: 1.0,
            ..LinkParams::default()
        };
        let train = WriteTrain {
            mode_count: 12,
            excited: vec![
                ModeExcitation { node: Node::R, mode_index: 2, excitation_number: 1 },
                ModeExcitation { node: Node::L, mode_index: 7, excitation_number: 1 },
            ],
        };
        let mut rng = StreamFactory::new(6).stream(Domain::custom(1), 0);
        let clicks = detect_stokes(&train, &p, &mut rng);
        assert_eq!(clicks.windows.len(), 2);
        assert_eq!(clicks.herald(&p).unwrap().mode_index, 2);
    }

    #[test]
    fn double_excitation_is_kept_and_marked() {
        let p = LinkParams {
            stokes_detection_eff: 1.0,
            ..LinkParams::default()
        };
        let train = WriteTrain {
            mode_count: 12,
            excited: vec![
                ModeExcitation { node: Node::L, mode_index: 0, excitation_number: 1 },
                ModeExcitation { node: Node::R, mode_index: 0, excitation_number: 1 },
            ],
        };
        let mut rng = StreamFactory::new(6).stream(Domain::custom(1), 0);
        let h = herald_bsm(&train, &p, &mut rng).unwrap();
        assert_eq!(h.origin, HeraldOrigin::DoubleExcitation);
    }

    fn lossless_single(node: Node) -> (WriteTrain, HeraldEvent, LinkParams) {
        let p = LinkParams {
            retrieval_eff_zero: 1.0,
            detection_eff: 1.0,
            ..LinkParams::default()
        };
        let train = WriteTrain {
            mode_count: 12,
            excited: vec![ModeExcitation { node, mode_index: 5, excitation_number: 1 }],
        };
        let h = HeraldEvent {
            detector: Detector::DS1,
            mode_index: 5,
            herald_time: 2e-6,
            heralded_sign: HeraldSign::Plus,
            origin: HeraldOrigin::SinglePhoton,
        };
        (train, h, p)
    }

    #[test]
    fn lossless_readout_returns_the_photon() {
        for (node, expect) in [(Node::R, (1, 0)), (Node::L, (0, 1))] {
            let (train, h, p) = lossless_single(node);
            let mut rng = StreamFactory::new(8).stream(Domain::custom(2), 0);
            let c = readout_pmn(Some(&h), &train, 0.0, &p, &mut rng).unwrap();
            assert_eq!(c.clicks(), expect);
        }
    }

    #[test]
    fn readout_needs_a_herald() {
        let (train, _, p) = lossless_single(Node::L);
        let mut rng = StreamFactory::new(8).stream(Domain::custom(2), 0);
        assert!(matches!(
            readout_pmn(None, &train, 0.0, &p, &mut rng),
            Err(LinkError::NoHerald)
        ));
    }

    #[test]
    fn conversion_decays_with_storage() {
        let (train, h, mut p) = lossless_single(Node::R);
        p.retrieval_eff_zero = 0.707;
        let f = StreamFactory::new(9);
        let n = 50_000;
        let hits = (0..n)
            .filter(|&i| {
                let mut rng = f.stream(Domain::custom(3), i);
                readout_pmn(Some(&h), &train, p.memory_lifetime, &p, &mut rng)
                    .unwrap()
                    .first
                    > 0
            })
            .count();
        let expect = 0.707 * (-1.0f64).exp();
        assert!((expect - 0.260).abs() < 1e-3);
        let frac = hits as f64 / n as f64;
        assert!((frac - expect).abs() < sigma3(expect, n as f64), "{frac}");
    }

    #[test]
    fn coherent_photon_follows_the_fringe() {
        let (train, h, mut p) = lossless_single(Node::L);
        p.visibility_cap = 1.0;
        let mut rng = StreamFactory::new(10).stream(Domain::custom(4), 0);
        let bright = readout(Some(&h), &train, 0.0, ReadoutBasis::Interference { theta: 0.0 }, &p, &mut rng).unwrap();
        let dark = readout(Some(&h), &train, 0.0, ReadoutBasis::Interference { theta: std::f64::consts::PI }, &p, &mut rng).unwrap();
        assert_eq!(bright.clicks(), (1, 0));
        assert_eq!(dark.clicks(), (0, 1));
    }

    #[test]
    fn same_seed_same_train() {
        let p = LinkParams {
            chi: 0.2,
            ..LinkParams::default()
        };
        let a: Vec<_> = trains(&p, 50, 11).map(|(t, _)| t).collect();
        let b: Vec<_> = trains(&p, 50, 11).map(|(t, _)| t).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn more_modes_extend_the_same_train() {
        let f = StreamFactory::new(12);
        let small = LinkParams { chi: 0.1, mode_count: 4, ..LinkParams::default() };
        let big = LinkParams { chi: 0.1, mode_count: 12, ..LinkParams::default() };
        for i in 0..200 {
            let a = sample_write_train(&small, &mut f.stream(Domain::custom(5), i)).unwrap();
            let b = sample_write_train(&big, &mut f.stream(Domain::custom(5), i)).unwrap();
            let prefix: Vec<_> = b.excited().iter().filter(|e| e.mode_index < 4).copied().collect();
            assert_eq!(a.excited(), &prefix[..]);
        }
    }
}
