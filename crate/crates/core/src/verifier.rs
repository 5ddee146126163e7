//! Domination-pair generators and empirical checks of the moment
//! inequalities on them.
//!
//! Every generator yields pairs with `E[X_tau] <= E[G_tau]` for bounded
//! stopping times by construction. The checks estimate both sides by Monte
//! Carlo and pass when `lhs <= constant * rhs` up to three combined
//! half-widths.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constructions::{
    ceil_to_grid, discretize_pair, draw_z, exp_pair_for, hat_x, ln_gtilde,
    sample_full_extremal_with, ConstructionError, ExtremalParams, Proposal, TailMode,
};
use crate::montecarlo::{draw_samples, Estimate, EstimateError, EstimatorMethod};
use crate::oracles::{constant, ConstantKind, OracleError};
use crate::paths::{PathError, PathPair, StoppingIndex, TimeGrid};
use crate::rng::{derive_seed, exp1, SampleRng};

use rand::Rng;

/// Combined half-widths tolerated by every pass rule.
pub const PASS_WIDTHS: f64 = 3.0;

/// Dyadic level of the path attached to `Extremal` draws for stopping rules.
pub const EXTREMAL_PATH_LEVEL: u32 = 3;

const PILOT_SAMPLES: usize = 4000;
const PILOT_TAG: u64 = 0x5107;
const HIT_QUANTILES: [f64; 3] = [0.5, 0.9, 0.99];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifierError {
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("the MONOTONE constant needs non-decreasing X; generator '{0}' is not monotone")]
    NotMonotone(&'static str),
    #[error("F is not concave non-decreasing: {0}")]
    NotConcave(String),
    #[error("c must be positive, got {0}")]
    BadC(f64),
    #[error("invalid jump law: {0}")]
    BadJump(String),
    #[error("steps must be >= 1")]
    NoSteps,
}

/// Law of the i.i.d. jumps of a compensated sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpLaw {
    Constant { value: f64 },
    Bernoulli { q: f64 },
    Exponential { mean: f64 },
}

impl JumpLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            JumpLaw::Constant { value } => value,
            JumpLaw::Bernoulli { q } => q,
            JumpLaw::Exponential { mean } => mean,
        }
    }

    pub fn validate(&self) -> Result<(), VerifierError> {
        let ok = match *self {
            JumpLaw::Constant { value } => value >= 0.0 && value.is_finite(),
            JumpLaw::Bernoulli { q } => (0.0..=1.0).contains(&q),
            JumpLaw::Exponential { mean } => mean > 0.0 && mean.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(VerifierError::BadJump(format!("{self:?}")))
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Constant { value } => value,
            JumpLaw::Bernoulli { q } => {
                if rng.random::<f64>() < q {
                    1.0
                } else {
                    0.0
                }
            }
            JumpLaw::Exponential { mean } => mean * exp1(rng),
        }
    }
}

/// Bounded stopping rule on a grid path. Hitting rules stop at the last
/// index if the level is never reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StopRule {
    /// First grid time `>= t`.
    Fixed { t: f64 },
    HitX { level: f64 },
    HitG { level: f64 },
    Horizon,
}

impl StopRule {
    pub fn index(&self, pair: &PathPair) -> usize {
        let last = pair.len() - 1;
        match *self {
            StopRule::Fixed { t } => pair.grid().first_at_or_after(t).min(last),
            StopRule::HitX { level } => first_reaching(pair.x(), level).unwrap_or(last),
            StopRule::HitG { level } => first_reaching(pair.g(), level).unwrap_or(last),
            StopRule::Horizon => last,
        }
    }
}

fn first_reaching(v: &[f64], level: f64) -> Option<usize> {
    v.iter().position(|&e| e >= level)
}

fn default_step() -> f64 {
    1.0 / 64.0
}

/// Source of domination pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairGenerator {
    /// `(X^(n), G^(n))` with the Brownian tail.
    Extremal {
        p: f64,
        n: u32,
        #[serde(default)]
        tail: TailMode,
        #[serde(default)]
        proposal: Proposal,
    },
    /// `(X~, G~)` on `[0, n]` without tail.
    ExpPair {
        p: f64,
        n: u32,
        #[serde(default = "default_step")]
        step: f64,
        #[serde(default)]
        proposal: Proposal,
    },
    /// Discretized `(X^(n,N), G^(n,N))` on the grid `k 2^-level`.
    DiscreteExtremal {
        p: f64,
        n: u32,
        level: u32,
        #[serde(default)]
        proposal: Proposal,
    },
    /// `X_k = J_1 + .. + J_k`, `G_k = k E[J]`.
    CompensatedBernoulli { jump: JumpLaw, steps: usize },
    /// `X^ = X_tau 1{t >= tau}` and `G` stopped at `tau`, built from `inner`.
    HatXOf { inner: Box<PairGenerator>, rule: StopRule },
}

/// One generated pair reduced to what the checks need.
#[derive(Debug, Clone)]
pub struct Draw {
    pub ln_sup_x: f64,
    pub ln_sup_g: f64,
    pub ln_weight: f64,
    pub path: Option<PathPair>,
}

impl Draw {
    /// `w (sup X)^q`.
    pub fn weighted_x_pow(&self, q: f64) -> f64 {
        (self.ln_weight + q * self.ln_sup_x).exp()
    }

    /// `w (sup G)^q`.
    pub fn weighted_g_pow(&self, q: f64) -> f64 {
        (self.ln_weight + q * self.ln_sup_g).exp()
    }
}

impl PairGenerator {
    pub fn name(&self) -> &'static str {
        match self {
            PairGenerator::Extremal { .. } => "extremal",
            PairGenerator::ExpPair { .. } => "exp_pair",
            PairGenerator::DiscreteExtremal { .. } => "discrete_extremal",
            PairGenerator::CompensatedBernoulli { .. } => "compensated_bernoulli",
            PairGenerator::HatXOf { .. } => "hat_x_of",
        }
    }

    /// Whether every generated `X` path is non-decreasing.
    pub fn x_monotone(&self) -> bool {
        match self {
            PairGenerator::Extremal { .. } | PairGenerator::DiscreteExtremal { .. } => false,
            PairGenerator::ExpPair { .. }
            | PairGenerator::CompensatedBernoulli { .. }
            | PairGenerator::HatXOf { .. } => true,
        }
    }

    pub fn validate(&self) -> Result<(), VerifierError> {
        match self {
            PairGenerator::Extremal { p, n, .. } | PairGenerator::DiscreteExtremal { p, n, .. } => {
                ExtremalParams::new(*p, *n, 0)?;
            }
            PairGenerator::ExpPair { p, n, step, .. } => {
                ExtremalParams::new(*p, *n, 0)?;
                let grid = TimeGrid::new(*step, *n as f64)?;
                if !grid.divides_horizon() {
                    return Err(ConstructionError::GridMismatch {
                        n: *n,
                        step: *step,
                        horizon: *n as f64,
                    }
                    .into());
                }
            }
            PairGenerator::CompensatedBernoulli { jump, steps } => {
                jump.validate()?;
                if *steps == 0 {
                    return Err(VerifierError::NoSteps);
                }
            }
            PairGenerator::HatXOf { inner, .. } => inner.validate()?,
        }
        Ok(())
    }

    /// Draws one pair. Sups always refer to the whole process; `path` is
    /// filled only when `want_path` is set (or the pair is cheap).
    pub fn draw(&self, rng: &mut SampleRng, want_path: bool) -> Result<Draw, VerifierError> {
        match self {
            PairGenerator::Extremal { p, n, tail, proposal } => {
                let params = ExtremalParams::new(*p, *n, 0)?;
                if want_path {
                    let dp = discretize_pair(&params, EXTREMAL_PATH_LEVEL, *tail, *proposal, rng)?;
                    let ln_sup_x = match tail {
                        TailMode::ExactLaw => dp.realization.ln_sup_x_full(),
                        TailMode::PathSim(_) => dp.sup_x().ln(),
                    };
                    Ok(Draw {
                        ln_sup_x,
                        ln_sup_g: dp.realization.ln_sup_g(),
                        ln_weight: dp.ln_weight,
                        path: Some(dp.to_path_pair()?),
                    })
                } else {
                    let w = sample_full_extremal_with(&params, *tail, *proposal, rng)?;
                    Ok(Draw {
                        ln_sup_x: w.value.ln_sup_x_full(),
                        ln_sup_g: w.value.ln_sup_g(),
                        ln_weight: w.ln_weight,
                        path: None,
                    })
                }
            }
            PairGenerator::ExpPair { p, n, step, proposal } => {
                let (z, ln_weight) = draw_z(*proposal, *n, rng);
                let horizon = *n as f64;
                let path = if want_path {
                    let grid = TimeGrid::new(*step, horizon)?;
                    Some(exp_pair_for(*p, z, &grid)?)
                } else {
                    None
                };
                Ok(Draw {
                    ln_sup_x: if z <= horizon { z / p } else { f64::NEG_INFINITY },
                    ln_sup_g: ln_gtilde(*p, z.min(horizon)),
                    ln_weight,
                    path,
                })
            }
            PairGenerator::DiscreteExtremal { p, n, level, proposal } => {
                let params = ExtremalParams::new(*p, *n, 0)?;
                if want_path {
                    let dp = discretize_pair(&params, *level, TailMode::ExactLaw, *proposal, rng)?;
                    Ok(Draw {
                        ln_sup_x: dp.realization.ln_sup_x_full(),
                        ln_sup_g: dp.sup_g().ln(),
                        ln_weight: dp.ln_weight,
                        path: Some(dp.to_path_pair()?),
                    })
                } else {
                    // same draw order as discretize_pair
                    let w = sample_full_extremal_with(&params, TailMode::ExactLaw, *proposal, rng)?;
                    let m = ceil_to_grid(w.value.z, *level).min(*n as f64);
                    Ok(Draw {
                        ln_sup_x: w.value.ln_sup_x_full(),
                        ln_sup_g: ln_gtilde(*p, m),
                        ln_weight: w.ln_weight,
                        path: None,
                    })
                }
            }
            PairGenerator::CompensatedBernoulli { jump, steps } => {
                let mean = jump.mean();
                let mut x = Vec::with_capacity(steps + 1);
                let mut level = 0.0;
                x.push(0.0);
                for _ in 0..*steps {
                    level += jump.sample(rng);
                    x.push(level);
                }
                let g: Vec<f64> = (0..=*steps).map(|k| k as f64 * mean).collect();
                let grid = TimeGrid::new(1.0, *steps as f64)?;
                let pair = PathPair::new(x, g, grid, true)?;
                Ok(Draw {
                    ln_sup_x: level.ln(),
                    ln_sup_g: (*steps as f64 * mean).ln(),
                    ln_weight: 0.0,
                    path: Some(pair),
                })
            }
            PairGenerator::HatXOf { inner, rule } => {
                let d = inner.draw(rng, true)?;
                let base = d.path.expect("requested a path");
                let k = rule.index(&base);
                let pair = hat_x(&base, StoppingIndex::At(k))?;
                Ok(Draw {
                    ln_sup_x: pair.x()[k].ln(),
                    ln_sup_g: pair.g()[k].ln(),
                    ln_weight: d.ln_weight,
                    path: want_path.then_some(pair),
                })
            }
        }
    }
}

fn draw_all<T, F>(
    gen: &PairGenerator,
    n_samples: usize,
    seed: u64,
    want_path: bool,
    f: F,
) -> Result<Vec<T>, VerifierError>
where
    T: Send,
    F: Fn(&Draw) -> T + Sync,
{
    gen.validate()?;
    if n_samples == 0 {
        return Err(EstimateError::Empty.into());
    }
    draw_samples(n_samples, seed, |_, rng| gen.draw(rng, want_path).map(|d| f(&d)))
        .into_iter()
        .collect()
}

/// Outcome of one inequality check `lhs <= rhs_constant * rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierReport {
    pub lhs: Estimate,
    pub rhs_constant: f64,
    /// Unscaled right-hand moment.
    pub rhs: Estimate,
    pub margin: f64,
    pub pass: bool,
    pub constant_kind: Option<ConstantKind>,
}

impl VerifierReport {
    pub fn new(lhs: Estimate, rhs_constant: f64, rhs: Estimate, constant_kind: Option<ConstantKind>) -> Self {
        let margin = rhs_constant * rhs.value - lhs.value;
        let pass = passes(&lhs, rhs_constant, &rhs);
        VerifierReport {
            lhs,
            rhs_constant,
            rhs,
            margin,
            pass,
            constant_kind,
        }
    }

    /// `lhs / rhs`, to compare with `rhs_constant`.
    pub fn ratio(&self) -> f64 {
        self.lhs.value / self.rhs.value
    }

    pub fn combined_halfwidth(&self) -> f64 {
        combined(&self.lhs, self.rhs_constant, &self.rhs)
    }
}

fn combined(lhs: &Estimate, c: f64, rhs: &Estimate) -> f64 {
    lhs.halfwidth.hypot(c * rhs.halfwidth)
}

/// The pass rule: `c * rhs - lhs >= -3 sqrt(hw_lhs^2 + (c hw_rhs)^2)`.
pub fn passes(lhs: &Estimate, c: f64, rhs: &Estimate) -> bool {
    c * rhs.value - lhs.value >= -PASS_WIDTHS * combined(lhs, c, rhs)
}

/// Checks `E[(sup X)^p] <= constant(kind, p) E[(sup G)^p]`.
pub fn check_inequality(
    gen: &PairGenerator,
    p: f64,
    kind: ConstantKind,
    n_samples: usize,
    method: EstimatorMethod,
    seed: u64,
) -> Result<VerifierReport, VerifierError> {
    let c = constant(kind, p)?;
    if kind == ConstantKind::Monotone && !gen.x_monotone() {
        return Err(VerifierError::NotMonotone(gen.name()));
    }
    let pairs = draw_all(gen, n_samples, seed, false, |d| (d.weighted_x_pow(p), d.weighted_g_pow(p)))?;
    let (xs, gs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let lhs = Estimate::from_values(&xs, method)?.with_seed(seed);
    let rhs = Estimate::from_values(&gs, method)?.with_seed(seed);
    Ok(VerifierReport::new(lhs, c, rhs, Some(kind)))
}

/// Concave non-decreasing `F` with `F(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "f", rename_all = "snake_case")]
pub enum ConcaveFn {
    /// `x^p`, `0 < p <= 1`.
    Power { p: f64 },
    /// Slope `slopes[i]` on `[knots[i-1], knots[i])` with `knots[-1] = 0`.
    PiecewiseLinear { knots: Vec<f64>, slopes: Vec<f64> },
}

impl ConcaveFn {
    pub fn identity() -> Self {
        ConcaveFn::PiecewiseLinear {
            knots: Vec::new(),
            slopes: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<(), VerifierError> {
        match self {
            ConcaveFn::Power { p } if *p > 0.0 && *p <= 1.0 => Ok(()),
            ConcaveFn::Power { p } => Err(VerifierError::NotConcave(format!("exponent {p}"))),
            ConcaveFn::PiecewiseLinear { knots, slopes } => {
                if slopes.len() != knots.len() + 1 {
                    return Err(VerifierError::NotConcave(format!(
                        "{} slopes need {} knots, got {}",
                        slopes.len(),
                        slopes.len().saturating_sub(1),
                        knots.len()
                    )));
                }
                if let Some(s) = slopes.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
                    return Err(VerifierError::NotConcave(format!("negative slope {s}")));
                }
                if slopes.windows(2).any(|w| w[1] > w[0]) {
                    return Err(VerifierError::NotConcave("slopes must be non-increasing".into()));
                }
                let mut prev = 0.0;
                for &k in knots {
                    if !(k > prev) {
                        return Err(VerifierError::NotConcave(format!("knots must increase from 0, got {k}")));
                    }
                    prev = k;
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ConcaveFn::Power { p } => x.powf(*p),
            ConcaveFn::PiecewiseLinear { knots, slopes } => {
                let mut acc = 0.0;
                let mut left = 0.0;
                for (i, &s) in slopes.iter().enumerate() {
                    let right = knots.get(i).copied().unwrap_or(f64::INFINITY);
                    if x <= right {
                        return acc + s * (x - left);
                    }
                    acc += s * (right - left);
                    left = right;
                }
                acc
            }
        }
    }
}

/// One `E[F(Y_tau)] <= (1+c) E[F(G_tau)]` check per stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PratelliReport {
    pub f: ConcaveFn,
    pub c: f64,
    /// `(1+c) c^-p` for `F = x^p`: the constant this gives for `E[X^p]`.
    pub effective_constant: Option<f64>,
    pub checks: Vec<(StopRule, VerifierReport)>,
    pub pass: bool,
}

/// Pratelli's inequality with `Y = c X`, which satisfies
/// `E[Y_tau] <= c E[G_tau]` for every generator here.
pub fn check_pratelli(
    gen: &PairGenerator,
    f: &ConcaveFn,
    c: f64,
    n_samples: usize,
    method: EstimatorMethod,
    seed: u64,
) -> Result<PratelliReport, VerifierError> {
    f.validate()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(VerifierError::BadC(c));
    }
    let battery = stopping_battery(gen, seed)?;
    let rows = draw_all(gen, n_samples, seed, true, |d| {
        let path = d.path.as_ref().expect("requested a path");
        let w = d.ln_weight.exp();
        battery
            .iter()
            .map(|rule| {
                let k = rule.index(path);
                (w * f.eval(c * path.x()[k]), w * f.eval(path.g()[k]))
            })
            .collect::<Vec<_>>()
    })?;
    let mut checks = Vec::with_capacity(battery.len());
    for (j, rule) in battery.iter().enumerate() {
        let ys: Vec<f64> = rows.iter().map(|r| r[j].0).collect();
        let gs: Vec<f64> = rows.iter().map(|r| r[j].1).collect();
        let lhs = Estimate::from_values(&ys, method)?.with_seed(seed);
        let rhs = Estimate::from_values(&gs, method)?.with_seed(seed);
        checks.push((*rule, VerifierReport::new(lhs, 1.0 + c, rhs, None)));
    }
    let effective_constant = match f {
        ConcaveFn::Power { p } => Some((1.0 + c) * c.powf(-p)),
        ConcaveFn::PiecewiseLinear { .. } => None,
    };
    let pass = checks.iter().all(|(_, r)| r.pass);
    Ok(PratelliReport {
        f: f.clone(),
        c,
        effective_constant,
        checks,
        pass,
    })
}

/// Fixed times at the deciles of the path horizon, then hitting times of
/// `X` and of `G` at pilot quantiles of their path maxima.
pub fn stopping_battery(gen: &PairGenerator, seed: u64) -> Result<Vec<StopRule>, VerifierError> {
    let pilot = draw_all(gen, PILOT_SAMPLES, derive_seed(seed, PILOT_TAG), true, |d| {
        let path = d.path.as_ref().expect("requested a path");
        let sup = path.sup();
        (path.grid().horizon(), sup.sup_x, sup.sup_g)
    })?;
    let horizon = pilot[0].0;
    let mut rules: Vec<StopRule> = (1..=10)
        .map(|j| StopRule::Fixed {
            t: horizon * j as f64 / 10.0,
        })
        .collect();
    let mut xs: Vec<f64> = pilot.iter().map(|r| r.1).collect();
    let mut gs: Vec<f64> = pilot.iter().map(|r| r.2).collect();
    xs.sort_by(f64::total_cmp);
    gs.sort_by(f64::total_cmp);
    for q in HIT_QUANTILES {
        let level = quantile(&xs, q);
        if level > 0.0 {
            rules.push(StopRule::HitX { level });
        }
    }
    for q in HIT_QUANTILES {
        let level = quantile(&gs, q);
        if level > 0.0 {
            rules.push(StopRule::HitG { level });
        }
    }
    Ok(rules)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let k = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[k]
}

/// `E[X_tau]` and `E[G_tau]` for one rule.
pub fn stopped_expectations(
    gen: &PairGenerator,
    rule: StopRule,
    n_samples: usize,
    method: EstimatorMethod,
    seed: u64,
) -> Result<(Estimate, Estimate), VerifierError> {
    let rows = draw_all(gen, n_samples, seed, true, |d| {
        let path = d.path.as_ref().expect("requested a path");
        let w = d.ln_weight.exp();
        let k = rule.index(path);
        (w * path.x()[k], w * path.g()[k])
    })?;
    let (xs, gs): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    Ok((
        Estimate::from_values(&xs, method)?.with_seed(seed),
        Estimate::from_values(&gs, method)?.with_seed(seed),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub rule: StopRule,
    /// Paired estimate of `E[X_tau - G_tau]`.
    pub difference: Estimate,
    /// `difference > 3 halfwidths`.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub generator: PairGenerator,
    pub entries: Vec<AuditEntry>,
    pub any_flagged: bool,
}

/// Estimates `E[X_tau] - E[G_tau]` for every rule in `battery` (or the
/// default battery) and flags positive excesses.
pub fn domination_audit(
    gen: &PairGenerator,
    battery: Option<&[StopRule]>,
    n_samples: usize,
    seed: u64,
) -> Result<AuditReport, VerifierError> {
    let rules: Vec<StopRule> = match battery {
        Some(b) => b.to_vec(),
        None => stopping_battery(gen, seed)?,
    };
    let rows = draw_all(gen, n_samples, seed, true, |d| {
        let path = d.path.as_ref().expect("requested a path");
        let w = d.ln_weight.exp();
        rules
            .iter()
            .map(|rule| {
                let k = rule.index(path);
                w * (path.x()[k] - path.g()[k])
            })
            .collect::<Vec<_>>()
    })?;
    let mut entries = Vec::with_capacity(rules.len());
    for (j, rule) in rules.iter().enumerate() {
        let diffs: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let difference = Estimate::from_values(&diffs, EstimatorMethod::Plain)?.with_seed(seed);
        let flagged = difference.value > PASS_WIDTHS * difference.halfwidth;
        entries.push(AuditEntry {
            rule: *rule,
            difference,
            flagged,
        });
    }
    let any_flagged = entries.iter().any(|e| e.flagged);
    Ok(AuditReport {
        generator: gen.clone(),
        entries,
        any_flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_stream;

    fn bernoulli(q: f64, steps: usize) -> PairGenerator {
        PairGenerator::CompensatedBernoulli {
            jump: JumpLaw::Bernoulli { q },
            steps,
        }
    }

    #[test]
    fn constant_jumps_give_ratio_one() {
        let gen = PairGenerator::CompensatedBernoulli {
            jump: JumpLaw::Constant { value: 1.0 },
            steps: 8,
        };
        for kind in ConstantKind::ALL {
            let r = check_inequality(&gen, 0.5, kind, 100, EstimatorMethod::Plain, 1).unwrap();
            assert!(r.pass);
            assert_eq!(r.lhs.value, r.rhs.value);
            assert!((r.ratio() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn monotone_kind_rejects_brownian_tail() {
        let gen = PairGenerator::Extremal {
            p: 0.5,
            n: 3,
            tail: TailMode::ExactLaw,
            proposal: Proposal::Natural,
        };
        let err = check_inequality(&gen, 0.5, ConstantKind::Monotone, 100, EstimatorMethod::Plain, 1);
        assert!(matches!(err, Err(VerifierError::NotMonotone("extremal"))));
    }

    #[test]
    fn exponential_jumps_pass_monotone() {
        let gen = PairGenerator::CompensatedBernoulli {
            jump: JumpLaw::Exponential { mean: 1.0 },
            steps: 20,
        };
        let r = check_inequality(&gen, 0.5, ConstantKind::Monotone, 50_000, EstimatorMethod::Plain, 3)
            .unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.rhs_constant - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn report_pass_is_function_of_fields() {
        let e = |v: f64, h: f64| Estimate {
            value: v,
            halfwidth: h,
            n_samples: 10,
            method: EstimatorMethod::Plain,
            seed: None,
        };
        assert!(VerifierReport::new(e(2.0, 0.0), 1.0, e(2.0, 0.0), None).pass);
        assert!(!VerifierReport::new(e(2.1, 0.0), 1.0, e(2.0, 0.0), None).pass);
        // 0.1 excess against a combined 1-sigma of 0.05
        assert!(VerifierReport::new(e(2.1, 0.03), 1.0, e(2.0, 0.04), None).pass);
        assert!(!VerifierReport::new(e(2.3, 0.03), 1.0, e(2.0, 0.04), None).pass);
    }

    #[test]
    fn piecewise_linear_eval_and_validation() {
        let f = ConcaveFn::PiecewiseLinear {
            knots: vec![1.0, 3.0],
            slopes: vec![2.0, 1.0, 0.0],
        };
        f.validate().unwrap();
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(2.0), 3.0);
        assert_eq!(f.eval(10.0), 4.0);
        let bad = ConcaveFn::PiecewiseLinear {
            knots: vec![1.0],
            slopes: vec![1.0, 2.0],
        };
        assert!(matches!(bad.validate(), Err(VerifierError::NotConcave(_))));
        assert!(ConcaveFn::Power { p: 1.5 }.validate().is_err());
        let zero = ConcaveFn::PiecewiseLinear {
            knots: vec![],
            slopes: vec![0.0],
        };
        zero.validate().unwrap();
        assert_eq!(zero.eval(7.0), 0.0);
    }

    #[test]
    fn pratelli_identity_and_zero() {
        let gen = bernoulli(0.3, 10);
        let r = check_pratelli(&gen, &ConcaveFn::identity(), 1.0, 20_000, EstimatorMethod::Plain, 2)
            .unwrap();
        assert!(r.pass);
        for (_, c) in &r.checks {
            assert!(c.margin > 0.0);
        }
        let zero = ConcaveFn::PiecewiseLinear {
            knots: vec![],
            slopes: vec![0.0],
        };
        let r = check_pratelli(&gen, &zero, 1.0, 1000, EstimatorMethod::Plain, 2).unwrap();
        assert!(r.pass);
        assert!(r.checks.iter().all(|(_, c)| c.lhs.value == 0.0 && c.rhs.value == 0.0));
        assert!(matches!(
            check_pratelli(&gen, &zero, 0.0, 10, EstimatorMethod::Plain, 2),
            Err(VerifierError::BadC(_))
        ));
    }

    #[test]
    fn stop_rules_bounded() {
        let gen = bernoulli(0.5, 6);
        let mut rng = sample_stream(1, 0);
        let d = gen.draw(&mut rng, true).unwrap();
        let path = d.path.unwrap();
        assert_eq!(StopRule::HitX { level: 100.0 }.index(&path), 6);
        assert_eq!(StopRule::Horizon.index(&path), 6);
        assert_eq!(StopRule::Fixed { t: 2.5 }.index(&path), 3);
        assert_eq!(StopRule::HitG { level: 1.0 }.index(&path), 2);
    }

    #[test]
    fn hat_x_draws_are_monotone() {
        let gen = PairGenerator::HatXOf {
            inner: Box::new(PairGenerator::Extremal {
                p: 0.5,
                n: 3,
                tail: TailMode::ExactLaw,
                proposal: Proposal::Natural,
            }),
            rule: StopRule::Fixed { t: 2.0 },
        };
        assert!(gen.x_monotone());
        for i in 0..200 {
            let mut rng = sample_stream(5, i);
            let d = gen.draw(&mut rng, true).unwrap();
            assert!(d.path.unwrap().x_is_monotone());
        }
    }

    #[test]
    fn battery_is_deterministic() {
        let gen = bernoulli(0.3, 12);
        assert_eq!(stopping_battery(&gen, 9).unwrap(), stopping_battery(&gen, 9).unwrap());
        let b = stopping_battery(&gen, 9).unwrap();
        assert_eq!(b.iter().filter(|r| matches!(r, StopRule::Fixed { .. })).count(), 10);
    }

    #[test]
    fn generator_json_round_trip() {
        let gen = PairGenerator::HatXOf {
            inner: Box::new(PairGenerator::DiscreteExtremal {
                p: 0.5,
                n: 10,
                level: 6,
                proposal: Proposal::HorizonUniform,
            }),
            rule: StopRule::HitX { level: 3.0 },
        };
        let s = serde_json::to_string(&gen).unwrap();
        assert_eq!(serde_json::from_str::<PairGenerator>(&s).unwrap(), gen);
        let parsed: PairGenerator =
            serde_json::from_str(r#"{"kind":"compensated_bernoulli","jump":{"law":"bernoulli","q":0.3},"steps":12}"#)
                .unwrap();
        assert_eq!(parsed, bernoulli(0.3, 12));
        let ext: PairGenerator = serde_json::from_str(r#"{"kind":"extremal","p":0.5,"n":10}"#).unwrap();
        assert_eq!(
            ext,
            PairGenerator::Extremal {
                p: 0.5,
                n: 10,
                tail: TailMode::ExactLaw,
                proposal: Proposal::HorizonUniform
            }
        );
    }
}
