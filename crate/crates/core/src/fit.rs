//! Weighted least-squares fits of decay curves and interference fringes.
//!
//! Weights are inverse variances. When none are given, counting data are
//! assumed and the weights default to `1 / max(y, 1)`. Reported standard
//! errors come from the curvature matrix scaled by the reduced residual sum
//! of squares, so they stay meaningful when the weights are only relative.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ParamError;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("rank-deficient design: {0}")]
    RankDeficient(&'static str),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(&'static str),
    #[error("no convergence after {iterations} iterations")]
    NotConverged { iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl Samples {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, FitError> {
        Self::build(x, y, None)
    }

    pub fn with_weights(x: Vec<f64>, y: Vec<f64>, w: Vec<f64>) -> Result<Self, FitError> {
        Self::build(x, y, Some(w))
    }

    fn build(x: Vec<f64>, y: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self, FitError> {
        if x.len() != y.len() || weights.as_ref().is_some_and(|w| w.len() != x.len()) {
            return Err(ParamError::new("samples", x.len() as f64, "x, y and weights differ in length").into());
        }
        for (&xi, &yi) in x.iter().zip(&y) {
            crate::error::finite("x", xi)?;
            crate::error::finite("y", yi)?;
        }
        if let Some(w) = &weights {
            for &wi in w {
                crate::error::non_negative("weight", wi)?;
                crate::error::finite("weight", wi)?;
            }
        }
        Ok(Self { x, y, weights })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn counting_weights(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.clone(),
            None => self.y.iter().map(|y| 1.0 / y.max(1.0)).collect(),
        }
    }

    fn uniform_weights(&self) -> Vec<f64> {
        self.weights.clone().unwrap_or_else(|| vec![1.0; self.len()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub dof: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn reduced_chi2(&self) -> f64 {
        self.rss / self.dof as f64
    }
}

fn require(samples: &Samples, needed: usize) -> Result<(), FitError> {
    if samples.len() < needed {
        return Err(FitError::InsufficientData { needed, got: samples.len() });
    }
    Ok(())
}

/// Inverse of a symmetric curvature matrix, refusing singular ones.
fn invert<const P: usize>(m: SMatrix<f64, P, P>) -> Result<SMatrix<f64, P, P>, FitError> {
    let sv = DMatrix::from_iterator(P, P, m.iter().copied()).singular_values();
    let (max, min) = (sv.max(), sv.min());
    if max.is_nan() || max <= 0.0 || min <= max * 1e-13 {
        return Err(FitError::RankDeficient("design matrix is singular"));
    }
    m.try_inverse().ok_or(FitError::RankDeficient("design matrix is singular"))
}

/// `y = A · exp(−x / τ₀)`. Parameters are `[A, τ₀]`.
pub fn fit_exponential(samples: &Samples) -> Result<FitResult, FitError> {
    require(samples, 3)?;
    let w = samples.counting_weights();
    let (x, y) = (&samples.x, &samples.y);
    if x.iter().all(|&v| v == x[0]) {
        return Err(FitError::RankDeficient("all x values are equal"));
    }

    // Start from a log-linear fit of the positive points, Poisson-weighted.
    let mut ls = SMatrix::<f64, 2, 2>::zeros();
    let mut rhs = SVector::<f64, 2>::zeros();
    for i in 0..x.len() {
        if y[i] > 0.0 && w[i] > 0.0 {
            let g = SVector::<f64, 2>::new(1.0, -x[i]);
            let wi = w[i] * y[i] * y[i];
            ls += wi * g * g.transpose();
            rhs += wi * y[i].ln() * g;
        }
    }
    let seed = invert(ls)
        .map(|inv| inv * rhs)
        .map_err(|_| FitError::IllConditioned("fewer than two distinct positive points"))?;
    let mut p = SVector::<f64, 2>::new(seed[0].exp(), seed[1]);

    let residuals = |p: &SVector<f64, 2>| -> f64 {
        (0..x.len())
            .map(|i| w[i] * (y[i] - p[0] * (-p[1] * x[i]).exp()).powi(2))
            .sum()
    };
    let normal = |p: &SVector<f64, 2>| {
        let mut jtj = SMatrix::<f64, 2, 2>::zeros();
        let mut jtr = SVector::<f64, 2>::zeros();
        for i in 0..x.len() {
            let e = (-p[1] * x[i]).exp();
            let g = SVector::<f64, 2>::new(e, -p[0] * x[i] * e);
            jtj += w[i] * g * g.transpose();
            jtr += w[i] * (y[i] - p[0] * e) * g;
        }
        (jtj, jtr)
    };

    let mut lambda = 1e-3;
    let mut rss = residuals(&p);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < 200 {
        iterations += 1;
        let (jtj, jtr) = normal(&p);
        let mut damped = jtj;
        for k in 0..2 {
            damped[(k, k)] *= 1.0 + lambda;
        }
        let Ok(inv) = invert(damped) else {
            return Err(FitError::RankDeficient("no decay information in the data"));
        };
        let step = inv * jtr;
        let trial = p + step;
        let trial_rss = residuals(&trial);
        if trial_rss <= rss {
            let small = (0..2).all(|k| step[k].abs() <= 1e-10 * trial[k].abs().max(1e-300));
            p = trial;
            rss = trial_rss;
            lambda = (lambda / 10.0).max(1e-12);
            if small {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                // No downhill step exists: the current point is a minimum.
                converged = true;
                break;
            }
        }
    }

    let span = x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - x.iter().copied().fold(f64::INFINITY, f64::min);
    if (p[1] * span).abs() < 1e-9 {
        return Err(FitError::RankDeficient("data show no decay"));
    }
    if p[1] < 0.0 {
        return Err(FitError::IllConditioned("data grow instead of decaying"));
    }
    let (jtj, _) = normal(&p);
    let dof = x.len() - 2;
    let cov = invert(jtj)? * (rss / dof as f64);
    let k = p[1];
    Ok(FitResult {
        params: vec![p[0], 1.0 / k],
        std_errors: vec![cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt() / (k * k)],
        rss,
        dof,
        converged,
        iterations,
    })
}

/// `y = a · x`. Parameters are `[a]`.
///
/// A single point determines the slope; its standard error is then
/// reported as infinite.
pub fn fit_linear_origin(samples: &Samples) -> Result<FitResult, FitError> {
    require(samples, 1)?;
    let w = samples.uniform_weights();
    let (x, y) = (&samples.x, &samples.y);
    let sxx: f64 = (0..x.len()).map(|i| w[i] * x[i] * x[i]).sum();
    if sxx <= 0.0 {
        return Err(FitError::RankDeficient("all x values are zero"));
    }
    let sxy: f64 = (0..x.len()).map(|i| w[i] * x[i] * y[i]).sum();
    let a = sxy / sxx;
    let rss: f64 = (0..x.len()).map(|i| w[i] * (y[i] - a * x[i]).powi(2)).sum();
    let dof = x.len() - 1;
    let se = if dof == 0 { f64::INFINITY } else { (rss / dof as f64 / sxx).sqrt() };
    Ok(FitResult {
        params: vec![a],
        std_errors: vec![se],
        rss,
        dof,
        converged: true,
        iterations: 1,
    })
}

/// `y = ȳ · (1 + V cos(θ + θ₀))`. Parameters are `[ȳ, V, θ₀]`.
///
/// The phases must cover more than half a period, otherwise mean and
/// amplitude cannot be told apart. `V` is clipped to `[0, 1]`.
pub fn fit_sinusoid(samples: &Samples) -> Result<FitResult, FitError> {
    require(samples, 4)?;
    let w = samples.counting_weights();
    let (x, y) = (&samples.x, &samples.y);

    let tau = std::f64::consts::TAU;
    let mut phases: Vec<f64> = x.iter().map(|t| t.rem_euclid(tau)).collect();
    phases.sort_by(f64::total_cmp);
    let largest_gap = phases
        .windows(2)
        .map(|p| p[1] - p[0])
        .chain([phases[0] + tau - phases[phases.len() - 1]])
        .fold(0.0, f64::max);
    if tau - largest_gap <= std::f64::consts::PI {
        return Err(FitError::IllConditioned("phases cover half a period or less"));
    }

    let design = DMatrix::from_fn(x.len(), 3, |i, j| {
        let s = w[i].sqrt();
        s * match j {
            0 => 1.0,
            1 => x[i].cos(),
            _ => x[i].sin(),
        }
    });
    let target = DVector::from_fn(x.len(), |i, _| w[i].sqrt() * y[i]);
    let ata: SMatrix<f64, 3, 3> = (design.transpose() * &design).fixed_view::<3, 3>(0, 0).into();
    let inv = invert(ata)?;
    let atb: SVector<f64, 3> = (design.transpose() * &target).fixed_rows::<3>(0).into();
    let beta = inv * atb;
    let (a, b, c) = (beta[0], beta[1], beta[2]);
    if a <= 0.0 {
        return Err(FitError::IllConditioned("fringe mean is not positive"));
    }
    let rss = (0..x.len())
        .map(|i| w[i] * (y[i] - a - b * x[i].cos() - c * x[i].sin()).powi(2))
        .sum::<f64>();
    let dof = x.len() - 3;
    let cov = inv * (rss / dof as f64);

    let r = b.hypot(c);
    let v = r / a;
    let grad_v = if r > 0.0 {
        SVector::<f64, 3>::new(-r / (a * a), b / (r * a), c / (r * a))
    } else {
        SVector::<f64, 3>::new(0.0, 1.0 / a, 0.0)
    };
    let var_v = (grad_v.transpose() * cov * grad_v)[(0, 0)];
    let var_phase = if r > 0.0 {
        let g = SVector::<f64, 3>::new(0.0, c / (r * r), -b / (r * r));
        (g.transpose() * cov * g)[(0, 0)]
    } else {
        f64::INFINITY
    };
    Ok(FitResult {
        params: vec![a, v.clamp(0.0, 1.0), (-c).atan2(b)],
        std_errors: vec![cov[(0, 0)].sqrt(), var_v.max(0.0).sqrt(), var_phase.max(0.0).sqrt()],
        rss,
        dof,
        converged: true,
        iterations: 1,
    })
}
