//! BDG-type ratio `E[<M>^{q/2}] / E[sup |M|^q]` for Brownian motion.
//!
//! With `X = <M>` and `G = sup |M|^2`, `E[X_tau] = E[M_tau^2] <= E[G_tau]`, so
//! the moment inequalities at exponent `q/2` bound the ratio; `X` is
//! non-decreasing, so the monotone constant applies.
//!
//! `sup |M|` over each grid step is refined with the exact law of the
//! Brownian bridge maximum: given endpoints `a, b` over time `h`,
//! `max = (a + b + sqrt((b-a)^2 - 2h ln U)) / 2`. Maximum and minimum of a
//! step are drawn independently.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::montecarlo::{draw_samples, Estimate, EstimateError, EstimatorMethod, RatioEstimate};
use crate::oracles::{constant, ConstantKind, OracleError};
use crate::rng::{open_uniform, std_normal, SampleRng};

/// Reference value of the optimal constant for `q = 1`.
pub const OPTIMAL_BDG_1: f64 = 1.2727;

/// Largest accepted relative change of the denominator under step halving.
pub const BIAS_LIMIT: f64 = 0.01;

/// Exit-time runs stop at this multiple of `(b - a)^2`.
const HITTING_TIME_CAP: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BdgError {
    #[error("q must lie in (0,2), got {0}")]
    BadQ(f64),
    #[error("step must be positive and below the time scale, got {0}")]
    BadStep(f64),
    #[error("fixed time must be positive, got {0}")]
    BadTime(f64),
    #[error("hitting interval must satisfy a < 0 < b, got ({a}, {b})")]
    BadInterval { a: f64, b: f64 },
    #[error(
        "step {step} too coarse: halving it changes E[sup|M|^q] by {relative:.4} (limit {limit})"
    )]
    StepTooCoarse { step: f64, relative: f64, limit: f64 },
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BmKind {
    /// Brownian motion on `[0, t]`.
    FixedTime { t: f64 },
    /// Brownian motion stopped at its exit from `(a, b)`.
    Hitting { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSpec {
    #[serde(flatten)]
    pub kind: BmKind,
    pub step: f64,
    pub q: f64,
}

impl MartingaleSpec {
    pub fn validate(&self) -> Result<(), BdgError> {
        if !(self.q > 0.0 && self.q < 2.0) {
            return Err(BdgError::BadQ(self.q));
        }
        let scale = match self.kind {
            BmKind::FixedTime { t } => {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(BdgError::BadTime(t));
                }
                t
            }
            BmKind::Hitting { a, b } => {
                if !(a < 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                    return Err(BdgError::BadInterval { a, b });
                }
                (b - a) * (b - a)
            }
        };
        if !(self.step > 0.0 && self.step <= scale / 4.0) {
            return Err(BdgError::BadStep(self.step));
        }
        Ok(())
    }

    /// `p = q/2`, the exponent of the moment inequalities.
    pub fn p(&self) -> f64 {
        0.5 * self.q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantGap {
    pub name: String,
    pub constant: f64,
    /// `constant - ratio`
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdgReport {
    pub spec: MartingaleSpec,
    pub ratio: RatioEstimate,
    /// Denominator recomputed on the grid of step `2 * spec.step`.
    pub coarse_denominator: Estimate,
    pub step_bias: f64,
    /// Ascending in `constant`.
    pub gaps: Vec<ConstantGap>,
    /// `E[sup|M|^q] / E[<M>^{q/2}]`, reported only.
    pub reverse_ratio: f64,
    pub monotone_constant: f64,
    /// `ratio <= monotone_constant + 3 sigma`.
    pub monotone_bound_holds: bool,
}

// Brownian-bridge extremes over one step.
fn bridge_max(a: f64, b: f64, h: f64, rng: &mut SampleRng) -> f64 {
    let d = b - a;
    0.5 * (a + b + (d * d - 2.0 * h * open_uniform(rng).ln()).sqrt())
}

fn bridge_min(a: f64, b: f64, h: f64, rng: &mut SampleRng) -> f64 {
    let d = b - a;
    0.5 * (a + b - (d * d - 2.0 * h * open_uniform(rng).ln()).sqrt())
}

/// `(sup|M|` at step `h`, `sup|M|` at step `2h`, `<M>` at the stop).
struct BdgSample {
    fine: f64,
    coarse: f64,
    bracket: f64,
}

fn fixed_time(t: f64, step: f64, rng: &mut SampleRng) -> BdgSample {
    let pairs = (t / (2.0 * step)).round().max(1.0) as usize;
    let h = t / (2 * pairs) as f64;
    let sd = h.sqrt();
    let (mut m, mut fine, mut coarse) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..pairs {
        let start = m;
        for _ in 0..2 {
            let next = m + sd * std_normal(rng);
            fine = fine.max(bridge_max(m, next, h, rng)).max(-bridge_min(m, next, h, rng));
            m = next;
        }
        coarse = coarse
            .max(bridge_max(start, m, 2.0 * h, rng))
            .max(-bridge_min(start, m, 2.0 * h, rng));
    }
    BdgSample {
        fine,
        coarse,
        bracket: t,
    }
}

// Sup of |M| up to exit from (a, b), with the exit detected through the
// bridge extremes of each step. None while still inside.
fn exit_sup(run_sup: f64, hi: f64, lo: f64, a: f64, b: f64) -> Option<f64> {
    if hi >= b {
        Some(run_sup.max(b))
    } else if lo <= a {
        Some(run_sup.max(-a))
    } else {
        None
    }
}

fn hitting(a: f64, b: f64, h: f64, rng: &mut SampleRng) -> BdgSample {
    let cap = ((HITTING_TIME_CAP * (b - a) * (b - a)) / (2.0 * h)).ceil() as usize;
    let sd = h.sqrt();
    let mut m = 0.0f64;
    let (mut run_fine, mut run_coarse) = (0.0f64, 0.0f64);
    let mut fine: Option<(f64, f64)> = None;
    let mut coarse: Option<f64> = None;
    let mut steps = 0usize;
    for _ in 0..cap {
        let start = m;
        for _ in 0..2 {
            let next = m + sd * std_normal(rng);
            steps += 1;
            if fine.is_none() {
                let hi = bridge_max(m, next, h, rng);
                let lo = bridge_min(m, next, h, rng);
                match exit_sup(run_fine, hi, lo, a, b) {
                    Some(s) => fine = Some((s, steps as f64 * h)),
                    None => run_fine = run_fine.max(hi).max(-lo),
                }
            }
            m = next;
        }
        if coarse.is_none() {
            let hi = bridge_max(start, m, 2.0 * h, rng);
            let lo = bridge_min(start, m, 2.0 * h, rng);
            match exit_sup(run_coarse, hi, lo, a, b) {
                Some(s) => coarse = Some(s),
                None => run_coarse = run_coarse.max(hi).max(-lo),
            }
        }
        if fine.is_some() && coarse.is_some() {
            break;
        }
    }
    let (fine, bracket) = fine.unwrap_or((run_fine, steps as f64 * h));
    BdgSample {
        fine,
        coarse: coarse.unwrap_or(run_coarse),
        bracket,
    }
}

fn simulate(spec: &MartingaleSpec, rng: &mut SampleRng) -> BdgSample {
    match spec.kind {
        BmKind::FixedTime { t } => fixed_time(t, spec.step, rng),
        BmKind::Hitting { a, b } => hitting(a, b, spec.step, rng),
    }
}

/// Relative change of the denominator between steps `2h` and `h`; errors
/// at or above [`BIAS_LIMIT`].
pub fn step_bias_check(fine: &Estimate, coarse: &Estimate, step: f64) -> Result<f64, BdgError> {
    let relative = (coarse.value - fine.value).abs() / fine.value;
    if relative < BIAS_LIMIT {
        Ok(relative)
    } else {
        Err(BdgError::StepTooCoarse {
            step,
            relative,
            limit: BIAS_LIMIT,
        })
    }
}

/// Estimates the ratio, runs the step-halving bias check and tabulates the
/// gaps to the constants.
pub fn bdg_ratio(
    spec: &MartingaleSpec,
    n_samples: usize,
    method: EstimatorMethod,
    seed: u64,
) -> Result<BdgReport, BdgError> {
    spec.validate()?;
    let q = spec.q;
    let rows = draw_samples(n_samples, seed, |_, rng| {
        let s = simulate(spec, rng);
        (s.bracket.powf(0.5 * q), s.fine.powf(q), s.coarse.powf(q))
    });
    let num: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let den: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let coarse: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let numerator = Estimate::from_values(&num, method)?.with_seed(seed);
    let denominator = Estimate::from_values(&den, method)?.with_seed(seed);
    let coarse_denominator = Estimate::from_values(&coarse, method)?.with_seed(seed);

    let step_bias = step_bias_check(&denominator, &coarse_denominator, spec.step)?;

    let ratio = RatioEstimate::new(numerator, denominator)?;
    let p = spec.p();
    let mut gaps: Vec<ConstantGap> = [
        ("lenglart", ConstantKind::Lenglart),
        ("pratelli_power", ConstantKind::PratelliPower),
        ("monotone", ConstantKind::Monotone),
    ]
    .iter()
    .map(|(name, kind)| {
        let c = constant(*kind, p)?;
        Ok(ConstantGap {
            name: name.to_string(),
            constant: c,
            gap: c - ratio.ratio,
        })
    })
    .collect::<Result<_, OracleError>>()?;
    if q == 1.0 {
        gaps.push(ConstantGap {
            name: "optimal_reference".into(),
            constant: OPTIMAL_BDG_1,
            gap: OPTIMAL_BDG_1 - ratio.ratio,
        });
    }
    gaps.sort_by(|x, y| x.constant.total_cmp(&y.constant));

    let monotone_constant = constant(ConstantKind::Monotone, p)?;
    let monotone_bound_holds = ratio.ratio <= monotone_constant + 3.0 * ratio.sigma();
    Ok(BdgReport {
        spec: *spec,
        reverse_ratio: ratio.denominator.value / ratio.numerator.value,
        ratio,
        coarse_denominator,
        step_bias,
        gaps,
        monotone_constant,
        monotone_bound_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_stream;

    fn fixed(q: f64, step: f64) -> MartingaleSpec {
        MartingaleSpec {
            kind: BmKind::FixedTime { t: 1.0 },
            step,
            q,
        }
    }

    #[test]
    fn validation() {
        assert!(matches!(fixed(2.0, 1e-3).validate(), Err(BdgError::BadQ(_))));
        assert!(matches!(fixed(1.0, 0.0).validate(), Err(BdgError::BadStep(_))));
        let bad = MartingaleSpec {
            kind: BmKind::Hitting { a: 0.5, b: 1.0 },
            step: 1e-3,
            q: 1.0,
        };
        assert!(matches!(bad.validate(), Err(BdgError::BadInterval { .. })));
    }

    #[test]
    fn bridge_extremes_bracket_endpoints() {
        let mut rng = sample_stream(3, 0);
        for _ in 0..1000 {
            let (a, b) = (std_normal(&mut rng), std_normal(&mut rng));
            assert!(bridge_max(a, b, 0.1, &mut rng) >= a.max(b));
            assert!(bridge_min(a, b, 0.1, &mut rng) <= a.min(b));
        }
    }

    #[test]
    fn sup_abs_brownian_motion_on_unit_interval() {
        // E[sup_[0,1] |B|] = sqrt(pi/2)
        let r = bdg_ratio(&fixed(1.0, 1e-3), 40_000, EstimatorMethod::Plain, 11).unwrap();
        let exact = (std::f64::consts::PI / 2.0).sqrt();
        let d = &r.ratio.denominator;
        assert!((d.value - exact).abs() < 3.0 * d.halfwidth + 2e-3, "{d:?}");
        assert_eq!(r.ratio.numerator.value, 1.0);
        assert_eq!(r.ratio.numerator.halfwidth, 0.0);
        assert!(r.monotone_bound_holds);
        assert!(r.step_bias < BIAS_LIMIT);
        let names: Vec<&str> = r.gaps.iter().map(|g| g.name.as_str()).collect();
        assert_eq!(names, ["optimal_reference", "monotone", "pratelli_power", "lenglart"]);
        assert!(r.gaps.windows(2).all(|w| w[0].gap <= w[1].gap));
    }

    #[test]
    fn hitting_sup_equals_barrier() {
        let spec = MartingaleSpec {
            kind: BmKind::Hitting { a: -1.0, b: 1.0 },
            step: 1e-3,
            q: 1.0,
        };
        let r = bdg_ratio(&spec, 5_000, EstimatorMethod::Plain, 2).unwrap();
        assert_eq!(r.ratio.denominator.value, 1.0);
        // E[sqrt(tau)] <= sqrt(E[tau]) = 1
        assert!(r.ratio.ratio < 1.0);
        assert!(r.monotone_bound_holds);
    }

    #[test]
    fn bias_check_threshold() {
        let e = |v: f64| Estimate {
            value: v,
            halfwidth: 0.0,
            n_samples: 1,
            method: EstimatorMethod::Plain,
            seed: None,
        };
        assert!(step_bias_check(&e(1.0), &e(0.995), 1e-3).is_ok());
        assert!(matches!(
            step_bias_check(&e(1.0), &e(0.98), 1e-2),
            Err(BdgError::StepTooCoarse { .. })
        ));
    }
}
