//! Time grids, sampled path pairs and running suprema.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::montecarlo::{Estimate, EstimateError, EstimatorMethod};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("empty path")]
    EmptyPath,
    #[error("invalid grid: step {step}, horizon {horizon}")]
    BadGrid { step: f64, horizon: f64 },
    #[error("x has {x} points, g has {g}, grid has {grid}")]
    LengthMismatch { x: usize, g: usize, grid: usize },
    #[error("{which}[{index}] = {value} is negative or not finite")]
    BadValue {
        which: &'static str,
        index: usize,
        value: f64,
    },
    #[error("g decreases at index {index}: {prev} -> {next}")]
    NotMonotone { index: usize, prev: f64, next: f64 },
    #[error("stopping index {index} outside grid of {points} points")]
    StopOutOfRange { index: usize, points: usize },
    #[error("p must lie in (0,1), got {0}")]
    BadExponent(f64),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("csv: {0}")]
    Csv(String),
}

/// Uniform grid `t_k = k * step`, `k = 0 ..= floor(horizon / step)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    step: f64,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(step: f64, horizon: f64) -> Result<Self, PathError> {
        if !(step > 0.0 && step.is_finite() && horizon.is_finite() && horizon >= step) {
            return Err(PathError::BadGrid { step, horizon });
        }
        Ok(TimeGrid { step, horizon })
    }

    /// Grid with step `2^-level` on `[0, horizon]`.
    pub fn dyadic(level: u32, horizon: f64) -> Result<Self, PathError> {
        Self::new((-(level as f64)).exp2(), horizon)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn points(&self) -> usize {
        // Guard against horizon/step landing a hair below an integer.
        (self.horizon / self.step + 1e-9).floor() as usize + 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn last(&self) -> usize {
        self.points() - 1
    }

    /// True when the horizon is an integer number of steps.
    pub fn divides_horizon(&self) -> bool {
        let r = self.horizon / self.step;
        (r - r.round()).abs() < 1e-9
    }

    /// First grid index with `t_k >= t` (saturating at the last index).
    pub fn first_at_or_after(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let k = (t / self.step - 1e-12).ceil().max(0.0) as usize;
        k.min(self.last())
    }
}

/// A dominated process `x` and its dominating non-decreasing `g` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPair {
    x: Vec<f64>,
    g: Vec<f64>,
    grid: TimeGrid,
    g_predictable_shift: bool,
}

impl PathPair {
    pub fn new(
        x: Vec<f64>,
        g: Vec<f64>,
        grid: TimeGrid,
        g_predictable_shift: bool,
    ) -> Result<Self, PathError> {
        if x.len() != grid.points() || g.len() != grid.points() {
            return Err(PathError::LengthMismatch {
                x: x.len(),
                g: g.len(),
                grid: grid.points(),
            });
        }
        check_entries("x", &x)?;
        check_entries("g", &g)?;
        if let Some(index) = (1..g.len()).find(|&k| g[k] < g[k - 1]) {
            return Err(PathError::NotMonotone {
                index,
                prev: g[index - 1],
                next: g[index],
            });
        }
        Ok(PathPair {
            x,
            g,
            grid,
            g_predictable_shift,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn g_predictable_shift(&self) -> bool {
        self.g_predictable_shift
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_is_monotone(&self) -> bool {
        self.x.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn sup(&self) -> SupSample {
        SupSample {
            sup_x: self.x.iter().copied().fold(0.0, f64::max),
            // g is non-decreasing
            sup_g: *self.g.last().expect("non-empty"),
        }
    }

    /// Writes `t,x,g` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), PathError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "g"])
            .map_err(|e| PathError::Csv(e.to_string()))?;
        for k in 0..self.len() {
            w.write_record(&[
                format!("{}", self.grid.time(k)),
                format!("{}", self.x[k]),
                format!("{}", self.g[k]),
            ])
            .map_err(|e| PathError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| PathError::Csv(e.to_string()))
    }
}

fn check_entries(which: &'static str, v: &[f64]) -> Result<(), PathError> {
    match v.iter().enumerate().find(|(_, &e)| !(e >= 0.0 && e.is_finite())) {
        Some((index, &value)) => Err(PathError::BadValue {
            which,
            index,
            value,
        }),
        None => Ok(()),
    }
}

/// `(sup X, sup G)` of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupSample {
    pub sup_x: f64,
    pub sup_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    X,
    G,
}

/// Grid-valued stopping time; `Infinity` evaluates at the last index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StoppingIndex {
    At(usize),
    Infinity,
}

impl StoppingIndex {
    pub fn resolve(self, points: usize) -> usize {
        match self {
            StoppingIndex::At(k) => k.min(points - 1),
            StoppingIndex::Infinity => points - 1,
        }
    }
}

pub fn running_sup(path: &[f64]) -> Result<Vec<f64>, PathError> {
    if path.is_empty() {
        return Err(PathError::EmptyPath);
    }
    let mut best = f64::NEG_INFINITY;
    Ok(path
        .iter()
        .map(|&v| {
            best = best.max(v);
            best
        })
        .collect())
}

/// Estimate of `E[(sup)^p]` on the chosen side.
pub fn p_moment_of_sup(
    samples: &[SupSample],
    p: f64,
    side: Side,
    method: EstimatorMethod,
) -> Result<Estimate, PathError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(PathError::BadExponent(p));
    }
    if samples.is_empty() {
        return Err(PathError::EmptyPath);
    }
    let values: Vec<f64> = samples
        .iter()
        .map(|s| match side {
            Side::X => s.sup_x.powf(p),
            Side::G => s.sup_g.powf(p),
        })
        .collect();
    Ok(Estimate::from_values(&values, method)?)
}

pub fn evaluate_at_stopping(pair: &PathPair, tau: StoppingIndex) -> Result<(f64, f64), PathError> {
    if let StoppingIndex::At(index) = tau {
        if index >= pair.len() {
            return Err(PathError::StopOutOfRange {
                index,
                points: pair.len(),
            });
        }
    }
    let k = tau.resolve(pair.len());
    Ok((pair.x[k], pair.g[k]))
}
