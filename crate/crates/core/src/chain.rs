//! Discrete-event Monte Carlo of the multiplexed repeater chain.
//!
//! Time advances in communication intervals `T_cc`. Every elementary link
//! attempts generation once per interval until it holds a pair. A swap at
//! level `i` fires as soon as both child segments hold pairs and succeeds
//! with `s · R₀ · exp(−w/τ₀) · η_TD`, where `w` is the age of the older
//! child, i.e. the time since the earliest of its stored pairs was created.
//! A failed swap discards both children and they regenerate from scratch.
//! Swaps and classical signalling take no time beyond the current tick.
//!
//! Each trial runs on its own random stream `(seed, trial)`, so traces are
//! identical for any number of worker threads.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{self, ParamError};
use crate::rate::{elementary_p0, multiplexed_success, swap_chain, ChainParams, RateError};
use crate::rng::{Domain, StreamFactory};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("no link was generated in {intervals} intervals")]
    Stalled { intervals: u64 },
}

impl From<RateError> for SimError {
    fn from(e: RateError) -> Self {
        match e {
            RateError::Param(p) => SimError::Param(p),
            RateError::Stalled { .. } => SimError::Stalled { intervals: 0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub chain: ChainParams,
    pub trials: u64,
    pub seed: u64,
    /// Abort guard per trial, seconds.
    pub max_sim_time: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.chain.validate()?;
        if self.trials == 0 {
            return Err(ParamError::new("trials", 0.0, "must be at least 1"));
        }
        error::positive("max_sim_time_s", self.max_sim_time)?;
        if self.max_sim_time <= self.chain.t_cc() {
            return Err(ParamError::new(
                "max_sim_time_s",
                self.max_sim_time,
                "must exceed the communication interval",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptStats {
    pub attempts: u64,
    pub successes: u64,
}

impl AttemptStats {
    fn add(&mut self, other: &AttemptStats) {
        self.attempts += other.attempts;
        self.successes += other.successes;
    }

    pub fn success_fraction(&self) -> Option<f64> {
        (self.attempts > 0).then(|| self.successes as f64 / self.attempts as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn from_ticks(ticks: &[u64], t_cc: f64, bins: usize) -> Self {
        let max = ticks.iter().copied().max().unwrap_or(0);
        let width_ticks = max.div_ceil(bins as u64).max(1);
        let mut counts = vec![0u64; bins];
        for &t in ticks {
            let b = (((t - 1) / width_ticks) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram {
            bin_width: width_ticks as f64 * t_cc,
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub t_cc: f64,
    pub trials: u64,
    /// Delivery time of each completed trial, in trial order.
    pub delivery_times: Vec<f64>,
    pub timed_out: u64,
    /// Swap statistics for levels `1..=n`.
    pub levels: Vec<AttemptStats>,
    /// Final readout attempts.
    pub delivery: AttemptStats,
    pub mean_delivery_time: Option<f64>,
    pub empirical_rate_hz: Option<f64>,
    pub rate_stderr_hz: Option<f64>,
    /// Mean-time recursion for the same parameters, when it does not stall.
    pub analytic_rate_hz: Option<f64>,
    pub latency_histogram: Histogram,
}

impl ChainTrace {
    pub fn delivered(&self) -> u64 {
        self.delivery_times.len() as u64
    }

    pub fn timeout_fraction(&self) -> f64 {
        self.timed_out as f64 / self.trials as f64
    }
}

struct Segment {
    ready: u64,
    oldest: u64,
}

struct TrialRun<'a> {
    chain: &'a ChainParams,
    generation: Option<Geometric>,
    max_ticks: u64,
    levels: Vec<AttemptStats>,
    delivery: AttemptStats,
    rng: ChaCha8Rng,
}

struct TimedOut;

impl TrialRun<'_> {
    fn segment(&mut self, level: usize, start: u64) -> Result<Segment, TimedOut> {
        if level == 0 {
            let failures = match &self.generation {
                Some(g) => g.sample(&mut self.rng),
                None => return Err(TimedOut),
            };
            let ready = start.saturating_add(failures).saturating_add(1);
            if ready > self.max_ticks {
                return Err(TimedOut);
            }
            return Ok(Segment { ready, oldest: ready });
        }
        let mut t = start;
        loop {
            let left = self.segment(level - 1, t)?;
            let right = self.segment(level - 1, t)?;
            let now = left.ready.max(right.ready);
            let oldest = left.oldest.min(right.oldest);
            let age = (now - oldest) as f64 * self.chain.t_cc();
            let stats = &mut self.levels[level - 1];
            stats.attempts += 1;
            if self.rng.random::<f64>() < self.chain.swap_probability(age) {
                stats.successes += 1;
                return Ok(Segment { ready: now, oldest });
            }
            t = now;
        }
    }

    fn deliver(&mut self) -> Result<u64, TimedOut> {
        let top = self.chain.n_levels as usize;
        let mut t = 0;
        loop {
            let seg = self.segment(top, t)?;
            let age = (seg.ready - seg.oldest) as f64 * self.chain.t_cc();
            self.delivery.attempts += 1;
            if self.rng.random::<f64>() < self.chain.delivery_probability(age) {
                self.delivery.successes += 1;
                return Ok(seg.ready);
            }
            t = seg.ready;
        }
    }
}

struct TrialOutcome {
    ticks: Option<u64>,
    levels: Vec<AttemptStats>,
    delivery: AttemptStats,
}

/// Runs `config.trials` independent end-to-end deliveries.
pub fn simulate_chain(config: &SimConfig) -> Result<ChainTrace, SimError> {
    config.validate()?;
    let chain = &config.chain;
    let p0 = elementary_p0(chain)?;
    let p_link = multiplexed_success(p0, chain.mode_count)?;
    // Waiting for the first of N mode successes per interval is geometric
    // in the number of intervals.
    let generation = (p_link > 0.0).then(|| Geometric::new(p_link).expect("probability validated"));
    let t_cc = chain.t_cc();
    let max_ticks = (config.max_sim_time / t_cc).floor() as u64;
    let factory = StreamFactory::new(config.seed);
    let n_levels = chain.n_levels as usize;

    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut run = TrialRun {
                chain,
                generation,
                max_ticks,
                levels: vec![AttemptStats::default(); n_levels],
                delivery: AttemptStats::default(),
                rng: factory.stream(Domain::CHAIN, trial),
            };
            let ticks = run.deliver().ok();
            TrialOutcome {
                ticks,
                levels: run.levels,
                delivery: run.delivery,
            }
        })
        .collect();

    let mut levels = vec![AttemptStats::default(); n_levels];
    let mut delivery = AttemptStats::default();
    let mut ticks = Vec::new();
    for o in &outcomes {
        for (acc, l) in levels.iter_mut().zip(&o.levels) {
            acc.add(l);
        }
        delivery.add(&o.delivery);
        ticks.extend(o.ticks);
    }
    let delivery_times: Vec<f64> = ticks.iter().map(|&t| t as f64 * t_cc).collect();
    let n = delivery_times.len() as f64;
    let (mean, rate, stderr) = if delivery_times.is_empty() {
        (None, None, None)
    } else {
        let mean = delivery_times.iter().sum::<f64>() / n;
        let var = if n > 1.0 {
            delivery_times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let rate = 1.0 / mean;
        (Some(mean), Some(rate), Some(rate * (var / n).sqrt() / mean))
    };
    Ok(ChainTrace {
        t_cc,
        trials: config.trials,
        timed_out: config.trials - ticks.len() as u64,
        latency_histogram: Histogram::from_ticks(&ticks, t_cc, 50),
        delivery_times,
        levels,
        delivery,
        mean_delivery_time: mean,
        empirical_rate_hz: rate,
        rate_stderr_hz: stderr,
        analytic_rate_hz: swap_chain(chain).ok().map(|r| r.rate_hz),
    })
}

/// Outcome of simulating one elementary link interval by interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementaryStats {
    pub t_cc: f64,
    pub intervals: u64,
    pub successes: u64,
    pub success_per_interval: f64,
    /// Binomial standard error of `success_per_interval`.
    pub stderr: f64,
    /// `waiting[k]` counts waits of `k + 1` intervals between successes.
    pub waiting: Vec<u64>,
    pub mean_waiting_time: f64,
}

const ELEMENTARY_BATCH: u64 = 1 << 14;

/// Simulates `trials` consecutive attempt intervals of one link.
///
/// In each interval all `N` modes are tried as independent Bernoulli
/// events; the interval succeeds if any of them does. Waiting times are
/// measured between successes; the open stretch at the end of each batch
/// is dropped, which does not bias a memoryless process.
pub fn simulate_elementary_link(
    chain: &ChainParams,
    trials: u64,
    seed: u64,
) -> Result<ElementaryStats, SimError> {
    if trials == 0 {
        return Err(ParamError::new("trials", 0.0, "must be at least 1").into());
    }
    let p0 = elementary_p0(chain)?;
    let modes = chain.mode_count;
    let factory = StreamFactory::new(seed);
    let batches = trials.div_ceil(ELEMENTARY_BATCH);
    let per_batch: Vec<(u64, Vec<u64>)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = factory.stream(Domain::ELEMENTARY_LINK, b);
            let len = ELEMENTARY_BATCH.min(trials - b * ELEMENTARY_BATCH);
            let mut successes = 0;
            let mut waits = Vec::new();
            let mut since = 0u64;
            for _ in 0..len {
                since += 1;
                if (0..modes).any(|_| rng.random::<f64>() < p0) {
                    successes += 1;
                    waits.push(since);
                    since = 0;
                }
            }
            (successes, waits)
        })
        .collect();
    let successes: u64 = per_batch.iter().map(|(s, _)| s).sum();
    if successes == 0 {
        return Err(SimError::Stalled { intervals: trials });
    }
    let mut waiting = Vec::new();
    let (mut wait_sum, mut wait_n) = (0u64, 0u64);
    for w in per_batch.iter().flat_map(|(_, w)| w) {
        let k = (*w - 1) as usize;
        if waiting.len() <= k {
            waiting.resize(k + 1, 0);
        }
        waiting[k] += 1;
        wait_sum += w;
        wait_n += 1;
    }
    let p = successes as f64 / trials as f64;
    let t_cc = chain.t_cc();
    Ok(ElementaryStats {
        t_cc,
        intervals: trials,
        successes,
        success_per_interval: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        waiting,
        mean_waiting_time: wait_sum as f64 / wait_n as f64 * t_cc,
    })
}
