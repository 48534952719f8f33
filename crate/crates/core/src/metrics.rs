//! Figures of merit of a heralded link: concurrence, fringe visibility and
//! intrinsic retrieval efficiency.

use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ParamError;
use crate::link::PmnTable;
use crate::rng::{Domain, StreamFactory};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("estimator undefined: {0}")]
    Undefined(&'static str),
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Photon-counting tallies of one storage-time setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub storage_time: f64,
    pub trains: u64,
    /// Clicks of `D_S1` in each measurement window, over all trains.
    pub stokes_ds1: Vec<u64>,
    pub stokes_ds2: Vec<u64>,
    pub heralds: u64,
    /// Heralded trains by anti-Stokes click pattern, indexed `[m][n]`.
    pub coincidences: [[u64; 2]; 2],
}

impl CountsRecord {
    pub fn new(storage_time: f64, windows: usize) -> Self {
        Self {
            storage_time,
            trains: 0,
            stokes_ds1: vec![0; windows],
            stokes_ds2: vec![0; windows],
            heralds: 0,
            coincidences: [[0; 2]; 2],
        }
    }

    pub fn merge(&mut self, other: &CountsRecord) {
        self.trains += other.trains;
        self.heralds += other.heralds;
        for (a, b) in self.stokes_ds1.iter_mut().zip(&other.stokes_ds1) {
            *a += b;
        }
        for (a, b) in self.stokes_ds2.iter_mut().zip(&other.stokes_ds2) {
            *a += b;
        }
        for m in 0..2 {
            for n in 0..2 {
                self.coincidences[m][n] += other.coincidences[m][n];
            }
        }
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let pattern_total: u64 = self.coincidences.iter().flatten().sum();
        let largest = self
            .stokes_ds1
            .iter()
            .chain(&self.stokes_ds2)
            .chain([&self.heralds, &pattern_total])
            .max()
            .copied()
            .unwrap_or(0);
        if largest > self.trains {
            return Err(MetricsError::Contract(format!(
                "a count ({largest}) exceeds the number of trains ({})",
                self.trains
            )));
        }
        if pattern_total > self.heralds {
            return Err(MetricsError::Contract(
                "more readout patterns than heralds".into(),
            ));
        }
        Ok(())
    }

    /// `P_mn` as fractions of all trains.
    pub fn pmn(&self) -> PmnTable {
        let n = self.trains.max(1) as f64;
        let c = &self.coincidences;
        PmnTable {
            p00: c[0][0] as f64 / n,
            p01: c[0][1] as f64 / n,
            p10: c[1][0] as f64 / n,
            p11: c[1][1] as f64 / n,
        }
    }

    /// `Σ_i (P^i_DS1 + P^i_DS2)`, the multiplexed detection probability.
    pub fn stokes_detection(&self) -> f64 {
        let clicks: u64 = self.stokes_ds1.iter().chain(&self.stokes_ds2).sum();
        clicks as f64 / self.trains.max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceResult {
    pub concurrence: f64,
    /// Coherence `d = V (P01 + P10) / 2`.
    pub coherence: f64,
    /// Normalisation `P = P00 + P01 + P10 + P11`.
    pub normalization: f64,
    pub pmn: PmnTable,
    pub visibility: f64,
    pub standard_error: Option<f64>,
}

/// `C = max(0, (2|d| − 2√(P00 P11)) / P)` with `d = V (P01 + P10) / 2`.
pub fn concurrence(pmn: &PmnTable, visibility: f64) -> Result<ConcurrenceResult, MetricsError> {
    pmn.validate()?;
    crate::error::probability("visibility", visibility)?;
    let normalization = pmn.total();
    if normalization <= 0.0 {
        return Err(MetricsError::Undefined("P00 + P01 + P10 + P11 is zero"));
    }
    let coherence = visibility * (pmn.p01 + pmn.p10) / 2.0;
    let raw = (2.0 * coherence.abs() - 2.0 * (pmn.p00 * pmn.p11).sqrt()) / normalization;
    Ok(ConcurrenceResult {
        concurrence: raw.clamp(0.0, 1.0),
        coherence,
        normalization,
        pmn: *pmn,
        visibility,
        standard_error: None,
    })
}

/// Fringe visibility `(max − min) / (max + min)`.
pub fn visibility(max_counts: f64, min_counts: f64) -> Result<f64, MetricsError> {
    if !(max_counts >= 0.0 && min_counts >= 0.0) {
        return Err(ParamError::new("counts", min_counts.min(max_counts), "must be non-negative").into());
    }
    if max_counts == 0.0 {
        return Err(MetricsError::Undefined("maximum count is zero"));
    }
    if max_counts < min_counts {
        return Err(MetricsError::Contract(format!(
            "maximum {max_counts} below minimum {min_counts}"
        )));
    }
    Ok((max_counts - min_counts) / (max_counts + min_counts))
}

/// `η = (P01 + P10) / (Σ_i (P^i_DS1 + P^i_DS2) η_D)`.
///
/// Noise clicks can push the raw ratio above one; such estimates are
/// reported as one.
pub fn intrinsic_efficiency(
    record: &CountsRecord,
    pmn: &PmnTable,
    eta_d: f64,
) -> Result<f64, MetricsError> {
    crate::error::probability("eta_d", eta_d)?;
    pmn.validate()?;
    let denominator = record.stokes_detection() * eta_d;
    if denominator <= 0.0 {
        return Err(MetricsError::Undefined("no Stokes detections or zero eta_d"));
    }
    Ok(((pmn.p01 + pmn.p10) / denominator).clamp(0.0, 1.0))
}

/// Bootstrap standard error of the concurrence.
///
/// Trains are resampled with replacement, which for these statistics is a
/// multinomial redraw of the five outcome classes (no herald and the four
/// click patterns). The visibility is redrawn from a normal law with its
/// own standard error, independently of the counts.
pub fn bootstrap_concurrence_se(
    record: &CountsRecord,
    visibility: f64,
    visibility_se: f64,
    replicates: u32,
    seed: u64,
) -> Result<f64, MetricsError> {
    if replicates < 2 {
        return Err(MetricsError::Undefined("bootstrap needs at least two replicates"));
    }
    record.validate()?;
    if record.trains == 0 {
        return Err(MetricsError::Undefined("no trains to resample"));
    }
    let c = &record.coincidences;
    let classes = [c[0][0], c[0][1], c[1][0], c[1][1]];
    let n = record.trains;
    let factory = StreamFactory::new(seed);
    let v_law = Normal::new(visibility, visibility_se.max(0.0))
        .map_err(|_| ParamError::new("visibility_se", visibility_se, "not a valid spread"))?;
    let mut values = Vec::with_capacity(replicates as usize);
    for b in 0..replicates {
        let mut rng = factory.stream(Domain::BOOTSTRAP, b as u64);
        let mut left = n;
        let mut mass = 1.0;
        let mut draw = [0u64; 4];
        for (k, &count) in classes.iter().enumerate() {
            let p = count as f64 / n as f64;
            let share = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
            draw[k] = Binomial::new(left, share).expect("share clamped").sample(&mut rng);
            left -= draw[k];
            mass -= p;
        }
        let table = PmnTable {
            p00: draw[0] as f64 / n as f64,
            p01: draw[1] as f64 / n as f64,
            p10: draw[2] as f64 / n as f64,
            p11: draw[3] as f64 / n as f64,
        };
        let v = v_law.sample(&mut rng).clamp(0.0, 1.0);
        // A replicate without any heralds carries no information.
        if let Ok(r) = concurrence(&table, v) {
            values.push(r.concurrence);
        }
    }
    if values.len() < 2 {
        return Err(MetricsError::Undefined("bootstrap replicates had no heralds"));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Ok(var.sqrt())
}
