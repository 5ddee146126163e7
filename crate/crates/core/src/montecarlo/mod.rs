//! Seeded Monte Carlo estimation with heavy-tail-aware estimators.
//!
//! Samples are drawn on per-index streams (see [`crate::rng`]), collected in
//! index order and reduced sequentially. Results therefore do not depend on
//! the rayon worker count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{sample_stream, SampleRng};

mod ratio;
pub use ratio::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("no samples")]
    Empty,
    #[error("median of means needs an odd block count >= 3, got {0}")]
    BadBlocks(usize),
    #[error("{samples} samples cannot fill {blocks} blocks")]
    TooFewSamples { samples: usize, blocks: usize },
    #[error("sample {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("unknown estimator method '{0}' (expected 'plain' or 'mom:<blocks>')")]
    UnknownMethod(String),
    #[error("denominator estimate {0} is not positive")]
    DegenerateDenominator(f64),
}

/// How a sample mean is turned into an [`Estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum EstimatorMethod {
    Plain,
    MedianOfMeans { blocks: usize },
}

impl EstimatorMethod {
    pub const DEFAULT_BLOCKS: usize = 31;

    pub fn median_of_means(blocks: usize) -> Result<Self, EstimateError> {
        let m = EstimatorMethod::MedianOfMeans { blocks };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        match *self {
            EstimatorMethod::Plain => Ok(()),
            EstimatorMethod::MedianOfMeans { blocks } if blocks >= 3 && blocks % 2 == 1 => Ok(()),
            EstimatorMethod::MedianOfMeans { blocks } => Err(EstimateError::BadBlocks(blocks)),
        }
    }

    /// Median of means once `(sup)^p` can have infinite variance.
    ///
    /// The Brownian-tail sup has tail index `1/p`, so the variance of its
    /// `p`-th power is finite only for `p < 1/sqrt(2)`; 0.45 leaves margin.
    pub fn default_for(p: f64) -> Self {
        if p >= 0.45 {
            EstimatorMethod::MedianOfMeans {
                blocks: Self::DEFAULT_BLOCKS,
            }
        } else {
            EstimatorMethod::Plain
        }
    }

    fn min_samples(&self) -> usize {
        match *self {
            EstimatorMethod::Plain => 1,
            EstimatorMethod::MedianOfMeans { blocks } => blocks,
        }
    }
}

impl fmt::Display for EstimatorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorMethod::Plain => write!(f, "plain"),
            EstimatorMethod::MedianOfMeans { blocks } => write!(f, "mom:{blocks}"),
        }
    }
}

impl FromStr for EstimatorMethod {
    type Err = EstimateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        if t == "plain" {
            return Ok(EstimatorMethod::Plain);
        }
        if t == "mom" {
            return Ok(EstimatorMethod::MedianOfMeans {
                blocks: Self::DEFAULT_BLOCKS,
            });
        }
        if let Some(b) = t.strip_prefix("mom:") {
            let blocks = b
                .parse::<usize>()
                .map_err(|_| EstimateError::UnknownMethod(s.to_string()))?;
            return EstimatorMethod::median_of_means(blocks);
        }
        Err(EstimateError::UnknownMethod(s.to_string()))
    }
}

impl From<EstimatorMethod> for String {
    fn from(m: EstimatorMethod) -> Self {
        m.to_string()
    }
}

impl TryFrom<String> for EstimatorMethod {
    type Error = EstimateError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// A Monte Carlo mean with its 1-sigma uncertainty.
///
/// `halfwidth` is `sd / sqrt(n)` for [`EstimatorMethod::Plain`] and
/// `sqrt(pi/2) * sd(block means) / sqrt(blocks)` for median of means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub halfwidth: f64,
    #[serde(rename = "n")]
    pub n_samples: usize,
    pub method: EstimatorMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Estimate {
    pub fn from_values(values: &[f64], method: EstimatorMethod) -> Result<Self, EstimateError> {
        method.validate()?;
        if values.is_empty() {
            return Err(EstimateError::Empty);
        }
        if values.len() < method.min_samples() {
            return Err(EstimateError::TooFewSamples {
                samples: values.len(),
                blocks: method.min_samples(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(EstimateError::NonFinite { index, value });
        }
        let (value, halfwidth) = match method {
            EstimatorMethod::Plain => {
                let (mean, sd) = mean_sd(values);
                (mean, sd / (values.len() as f64).sqrt())
            }
            EstimatorMethod::MedianOfMeans { blocks } => {
                let n = values.len();
                let mut means: Vec<f64> = (0..blocks)
                    .map(|b| {
                        let (lo, hi) = (b * n / blocks, (b + 1) * n / blocks);
                        mean_sd(&values[lo..hi]).0
                    })
                    .collect();
                let (_, sd) = mean_sd(&means);
                means.sort_by(f64::total_cmp);
                let median = means[blocks / 2];
                let hw = (std::f64::consts::FRAC_PI_2).sqrt() * sd / (blocks as f64).sqrt();
                (median, hw)
            }
        };
        Ok(Estimate {
            value,
            halfwidth,
            n_samples: values.len(),
            method,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.value *= factor;
        self.halfwidth *= factor.abs();
        self
    }

    /// `value ± k * halfwidth`.
    pub fn interval(&self, k: f64) -> (f64, f64) {
        (self.value - k * self.halfwidth, self.value + k * self.halfwidth)
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Width multiplier applied to each component of a ratio interval.
pub const RATIO_CI_WIDTHS: f64 = 3.0;

/// Ratio of two estimates with a conservative interval-arithmetic CI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub numerator: Estimate,
    pub denominator: Estimate,
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RatioEstimate {
    pub fn new(numerator: Estimate, denominator: Estimate) -> Result<Self, EstimateError> {
        if !(denominator.value > 0.0) {
            return Err(EstimateError::DegenerateDenominator(denominator.value));
        }
        let ratio = numerator.value / denominator.value;
        let (nl, nh) = numerator.interval(RATIO_CI_WIDTHS);
        let (dl, dh) = denominator.interval(RATIO_CI_WIDTHS);
        let ci_low = (nl.max(0.0) / dh).min(ratio);
        let ci_high = if dl > 0.0 {
            (nh / dl).max(ratio)
        } else {
            f64::INFINITY
        };
        Ok(RatioEstimate {
            numerator,
            denominator,
            ratio,
            ci_low,
            ci_high,
        })
    }

    /// Delta-method 1-sigma of the ratio.
    pub fn sigma(&self) -> f64 {
        let rn = if self.numerator.value != 0.0 {
            self.numerator.halfwidth / self.numerator.value
        } else {
            0.0
        };
        let rd = self.denominator.halfwidth / self.denominator.value;
        self.ratio.abs() * rn.hypot(rd)
    }

    /// Half the CI width relative to the ratio.
    pub fn relative_ci(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low) / self.ratio
    }
}

/// Draws `n` per-index samples in parallel, returned in index order.
pub fn draw_samples<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SampleRng) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(seed, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// Estimates `E[sampler]` from `n_samples` independent draws.
pub fn estimate<F>(
    sampler: F,
    n_samples: usize,
    method: EstimatorMethod,
    seed: u64,
) -> Result<Estimate, EstimateError>
where
    F: Fn(&mut SampleRng) -> f64 + Sync,
{
    method.validate()?;
    if n_samples < method.min_samples() {
        return Err(EstimateError::TooFewSamples {
            samples: n_samples,
            blocks: method.min_samples(),
        });
    }
    let values = draw_samples(n_samples, seed, |_, rng| sampler(rng));
    Ok(Estimate::from_values(&values, method)?.with_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{exp1, open_uniform};

    #[test]
    fn constant_sampler() {
        for method in [EstimatorMethod::Plain, EstimatorMethod::MedianOfMeans { blocks: 5 }] {
            let e = estimate(|_| 3.25, 100, method, 1).unwrap();
            assert_eq!(e.value, 3.25);
            assert_eq!(e.halfwidth, 0.0);
            assert_eq!(e.n_samples, 100);
        }
    }

    #[test]
    fn method_validation() {
        assert_eq!(
            EstimatorMethod::median_of_means(4),
            Err(EstimateError::BadBlocks(4))
        );
        assert!(EstimatorMethod::median_of_means(1).is_err());
        assert!(EstimatorMethod::median_of_means(3).is_ok());
        let err = estimate(|_| 1.0, 10, EstimatorMethod::MedianOfMeans { blocks: 31 }, 0);
        assert!(matches!(err, Err(EstimateError::TooFewSamples { .. })));
        assert_eq!(Estimate::from_values(&[], EstimatorMethod::Plain), Err(EstimateError::Empty));
    }

    #[test]
    fn method_parse_roundtrip() {
        for s in ["plain", "mom:31", "mom:3"] {
            let m: EstimatorMethod = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert_eq!("mom".parse::<EstimatorMethod>().unwrap().to_string(), "mom:31");
        assert!("median".parse::<EstimatorMethod>().is_err());
        let json = serde_json::to_string(&EstimatorMethod::MedianOfMeans { blocks: 7 }).unwrap();
        assert_eq!(json, "\"mom:7\"");
    }

    #[test]
    fn default_method_threshold() {
        assert_eq!(EstimatorMethod::default_for(0.3), EstimatorMethod::Plain);
        assert_eq!(
            EstimatorMethod::default_for(0.45),
            EstimatorMethod::MedianOfMeans { blocks: 31 }
        );
    }

    #[test]
    fn exp_sqrt_mean_is_gamma_three_halves() {
        let gamma_1_5 = 0.886_226_925_452_758;
        let e = estimate(|rng| exp1(rng).sqrt(), 1_000_000, EstimatorMethod::Plain, 11).unwrap();
        assert!((e.value - gamma_1_5).abs() < 3.0 * e.halfwidth, "{e:?}");
    }

    #[test]
    fn ratio_estimate_brackets() {
        let num = Estimate::from_values(&[2.0, 4.0, 6.0], EstimatorMethod::Plain).unwrap();
        let den = Estimate::from_values(&[1.0, 1.0, 1.0], EstimatorMethod::Plain).unwrap();
        let r = RatioEstimate::new(num, den).unwrap();
        assert_eq!(r.ratio, 4.0);
        assert!(r.ci_low <= r.ratio && r.ratio <= r.ci_high);
        let zero = Estimate::from_values(&[0.0], EstimatorMethod::Plain).unwrap();
        assert!(RatioEstimate::new(num, zero).is_err());
    }

    #[test]
    fn thread_count_invariance() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    estimate(
                        |rng| 1.0 / open_uniform(rng).sqrt(),
                        50_000,
                        EstimatorMethod::MedianOfMeans { blocks: 31 },
                        99,
                    )
                    .unwrap()
                })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.halfwidth.to_bits(), b.halfwidth.to_bits());
    }
}
