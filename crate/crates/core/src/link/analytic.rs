//! Exact expectations of the link model.
//!
//! The sampled model in [`super::sample`] is small enough to be evaluated in
//! closed form: per window there are nine occupation states `(k_L, k_R)`,
//! earlier windows enter only through the condition that they stayed silent,
//! and crosstalk depends on the other windows only through the generating
//! function of the number `M` of excited `(mode, node)` slots. Every result
//! here is therefore exact for the model, with no sampling error.

use super::{LinkParams, PmnTable};

/// `P(k)` for `k = 0, 1, 2` under the two-photon truncated thermal law.
pub fn excitation_distribution(chi: f64) -> [f64; 3] {
    if chi >= 1.0 {
        return [1.0 / 3.0; 3];
    }
    let norm = 1.0 - chi.powi(3);
    [
        (1.0 - chi) / norm,
        (1.0 - chi) * chi / norm,
        (1.0 - chi) * chi * chi / norm,
    ]
}

/// Fringe seen by `D_aS1` in coincidence with a `D_S1` herald.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeModel {
    /// Mean coincidence probability per `D_S1` herald.
    pub mean: f64,
    pub visibility: f64,
    /// Offset `θ₀` in `mean · (1 + V cos(θ + θ₀))`.
    pub phase: f64,
}

impl FringeModel {
    pub fn at(&self, theta: f64) -> f64 {
        self.mean * (1.0 + self.visibility * (theta + self.phase).cos())
    }
}

struct Window {
    p: [f64; 3],
    eta_s: f64,
    dark: f64,
}

impl Window {
    fn new(params: &LinkParams) -> Self {
        Self {
            p: excitation_distribution(params.chi),
            eta_s: params.stokes_detection_eff,
            dark: params.dark_count_prob,
        }
    }

    /// Occupation states with their prior probability.
    fn states(&self) -> impl Iterator<Item = (u8, u8, f64)> + '_ {
        (0..3u8).flat_map(move |l| (0..3u8).map(move |r| (l, r, self.p[l as usize] * self.p[r as usize])))
    }

    fn silent_given(&self, photons: u8) -> f64 {
        (1.0 - self.eta_s).powi(photons as i32) * (1.0 - self.dark).powi(2)
    }

    fn silent(&self) -> f64 {
        self.states().map(|(l, r, w)| w * self.silent_given(l + r)).sum()
    }

    /// `E[z^M_j]` for one ensemble slot of a window known to be silent.
    fn silent_slot_pgf(&self, z: f64) -> f64 {
        let s = 1.0 - self.eta_s;
        let h = |z: f64| self.p[0] + z * (self.p[1] * s + self.p[2] * s * s);
        h(z) / h(1.0)
    }

    fn free_slot_pgf(&self, z: f64) -> f64 {
        self.p[0] + (1.0 - self.p[0]) * z
    }

    /// `E[z^M]` over the other windows when window `i` heralds.
    fn background_pgf(&self, z: f64, i: usize, n: usize) -> f64 {
        self.silent_slot_pgf(z).powi(2 * i as i32) * self.free_slot_pgf(z).powi(2 * (n - 1 - i) as i32)
    }
}

/// Probability that a given window clicks `D_S1` or `D_S2`, counting both
/// detectors separately: the single-mode detection probability `p_D`.
pub fn window_detection_probability(params: &LinkParams) -> f64 {
    let w = Window::new(params);
    let u: f64 = w
        .p
        .iter()
        .enumerate()
        .map(|(k, pk)| pk * (1.0 - w.eta_s / 2.0).powi(k as i32))
        .sum();
    2.0 * (1.0 - (1.0 - w.dark) * u * u)
}

/// Probability that a train heralds at all, `1 - P(silent window)^N`.
pub fn herald_probability(params: &LinkParams) -> f64 {
    let w = Window::new(params);
    1.0 - w.silent().powi(params.mode_count as i32)
}

/// Probability that the herald lands in window `i`.
pub fn window_herald_probability(params: &LinkParams, i: usize) -> f64 {
    let w = Window::new(params);
    w.silent().powi(i as i32) * (1.0 - w.silent())
}

fn for_each_herald(params: &LinkParams, mut f: impl FnMut(usize, u8, u8, f64)) {
    let w = Window::new(params);
    let silent = w.silent();
    for i in 0..params.mode_count {
        let reach = silent.powi(i as i32);
        for (l, r, prior) in w.states() {
            let click = 1.0 - w.silent_given(l + r);
            if click > 0.0 {
                f(i, l, r, reach * prior * click);
            }
        }
    }
}

/// Expected raw `P_mn` table after a storage time, joint with the herald.
pub fn expected_pmn(storage_time: f64, params: &LinkParams) -> PmnTable {
    let w = Window::new(params);
    let n = params.mode_count;
    let q = params.retrieval(storage_time) * params.detection_eff;
    let a = params.crosstalk_eps * params.detection_eff;
    let d = params.dark_count_prob;
    let mut t = PmnTable { p00: 0.0, p01: 0.0, p10: 0.0, p11: 0.0 };
    for_each_herald(params, |i, l, r, weight| {
        let none = w.background_pgf(1.0 - a, i, n);
        let one_side = w.background_pgf(1.0 - a / 2.0, i, n);
        let both_dark = (1.0 - q).powi((l + r) as i32) * (1.0 - d).powi(2) * none;
        let right_dark = (1.0 - q).powi(r as i32) * (1.0 - d) * one_side;
        let left_dark = (1.0 - q).powi(l as i32) * (1.0 - d) * one_side;
        t.p00 += weight * both_dark;
        t.p01 += weight * (right_dark - both_dark);
        t.p10 += weight * (left_dark - both_dark);
        t.p11 += weight * (1.0 - right_dark - left_dark + both_dark);
    });
    t
}

/// Closed-form fringe of `D_aS1` coincidences at a storage time.
pub fn fringe_model(storage_time: f64, params: &LinkParams) -> FringeModel {
    let w = Window::new(params);
    let n = params.mode_count;
    let q = params.retrieval(storage_time) * params.detection_eff;
    let a = params.crosstalk_eps * params.detection_eff;
    let d = params.dark_count_prob;
    let (mut heralds, mut constant, mut amplitude) = (0.0, 0.0, 0.0);
    let silent = w.silent();
    for i in 0..n {
        let reach = silent.powi(i as i32);
        let quiet = (1.0 - d) * w.background_pgf(1.0 - a / 2.0, i, n);
        for (l, r, prior) in w.states() {
            let ds1 = reach * prior * (1.0 - w.silent_given(l + r)) / 2.0;
            if ds1 == 0.0 {
                continue;
            }
            heralds += ds1;
            let coherent = if l + r == 1 {
                reach * prior * w.eta_s * 0.5 * (1.0 - d / 2.0)
            } else {
                0.0
            };
            let incoherent = ds1 - coherent;
            constant += coherent * (1.0 - (1.0 - q / 2.0) * quiet);
            amplitude += coherent * (q / 2.0) * params.visibility_cap * quiet;
            constant += incoherent * (1.0 - (1.0 - q / 2.0).powi((l + r) as i32) * quiet);
        }
    }
    if heralds == 0.0 || constant == 0.0 {
        return FringeModel { mean: 0.0, visibility: 0.0, phase: params.fringe_phase() };
    }
    FringeModel {
        mean: constant / heralds,
        visibility: amplitude / constant,
        phase: params.fringe_phase(),
    }
}

/// Expected `D_aS1` coincidence probability per `D_S1` herald at phase `theta`.
pub fn fringe_expectation(theta: f64, storage_time: f64, params: &LinkParams) -> f64 {
    fringe_model(storage_time, params).at(theta)
}

/// Intrinsic efficiency the estimator converges to for this model.
pub fn expected_intrinsic_efficiency(storage_time: f64, params: &LinkParams) -> f64 {
    let pmn = expected_pmn(storage_time, params);
    let stokes = params.mode_count as f64 * window_detection_probability(params);
    (pmn.p01 + pmn.p10) / (stokes * params.detection_eff)
}
