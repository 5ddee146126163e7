//! Samplers for the extremal domination pairs.
//!
//! With `Z ~ Exp(1)` and `A(t) = exp(t/p)`:
//!
//! * `X~_t = A(Z) 1{t >= Z}` and `G~_t = int_0^{t ^ Z} A(s) ds = p (A(t ^ Z) - 1)`;
//!   `G~` compensates the single jump of `X~`.
//! * `X^(n)` is zero up to `n`, ramps to `X~_n` on `[n, n+1]` and then follows
//!   a Brownian motion started at `X~_n`, absorbed at 0. `G^(n) = G~_{. ^ n}`.
//! * The sup of the Brownian phase started at `x` is `Y_x` with
//!   `P[Y_x >= y] = x / y` for `y >= x`, so `Y_x = x / U` exactly.
//!
//! Moments of sups are computed in log space: `A(z)^p = e^z` never overflows
//! even when `A(z)` is huge.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::paths::{PathError, PathPair, StoppingIndex, SupSample, TimeGrid};
use crate::rng::{exp1, open_uniform, std_normal};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("p must lie in (0,1), got {0}")]
    BadP(f64),
    #[error("horizon n must be >= 1")]
    BadHorizon,
    #[error("n/p = {0} overflows exp(n/p) in f64 (limit 700)")]
    Overflow(f64),
    #[error("grid must have horizon n = {n} and a step dividing it (step {step}, horizon {horizon})")]
    GridMismatch { n: u32, step: f64, horizon: f64 },
    #[error("starting level must be non-negative, got {0}")]
    NegativeStart(f64),
    #[error("stopping index INFINITY has no realized value to freeze")]
    UnboundedStop,
    #[error("{0}")]
    Path(#[from] PathError),
}

/// Exponent `p` and horizon `n` of the extremal family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalParams {
    pub p: f64,
    pub n: u32,
    pub seed: u64,
}

impl ExtremalParams {
    pub fn new(p: f64, n: u32, seed: u64) -> Result<Self, ConstructionError> {
        let params = ExtremalParams { p, n, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ConstructionError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(ConstructionError::BadP(self.p));
        }
        if self.n < 1 {
            return Err(ConstructionError::BadHorizon);
        }
        let ratio = (self.n as f64 + 1.0) / self.p;
        if ratio > 700.0 {
            return Err(ConstructionError::Overflow(ratio));
        }
        Ok(())
    }

    fn horizon(&self) -> f64 {
        self.n as f64
    }
}

/// Settings for direct simulation of the Brownian phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSimConfig {
    pub step: f64,
    /// Paths still alive after this long are cut off (sup biased low).
    pub max_time: f64,
}

impl Default for PathSimConfig {
    fn default() -> Self {
        PathSimConfig {
            step: 1e-4,
            max_time: 16.0,
        }
    }
}

/// How the sup of the Brownian phase is produced.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    #[default]
    ExactLaw,
    PathSim(PathSimConfig),
}

/// Law used to draw `Z`.
///
/// `HorizonUniform` draws `Z ~ U(0, n]` with probability `n/(n+1)` and
/// `Z = n + Exp(1)` otherwise, and carries the likelihood ratio
/// `e^{-z} / q(z)`. Under it `w * A(Z)^p 1{Z <= n} = n + 1`, so the
/// truncated Pareto(1) numerator is estimated without needing `~e^n` draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    Natural,
    #[default]
    HorizonUniform,
}

impl std::str::FromStr for Proposal {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "natural" => Ok(Proposal::Natural),
            "horizon_uniform" | "horizon-uniform" | "is" => Ok(Proposal::HorizonUniform),
            other => Err(format!("unknown proposal '{other}' (natural | horizon-uniform)")),
        }
    }
}

/// Draws `z` under `proposal`; returns `(z, ln weight)`.
pub fn draw_z<R: Rng + ?Sized>(proposal: Proposal, n: u32, rng: &mut R) -> (f64, f64) {
    match proposal {
        Proposal::Natural => (exp1(rng), 0.0),
        Proposal::HorizonUniform => {
            let nf = n as f64;
            let ln_scale = (nf + 1.0).ln();
            let pick = rng.random::<f64>();
            let u = open_uniform(rng);
            if pick < nf / (nf + 1.0) {
                let z = nf * u;
                (z, ln_scale - z)
            } else {
                (nf - u.ln(), ln_scale - nf)
            }
        }
    }
}

/// A value drawn under a [`Proposal`] with its log likelihood ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weighted<T> {
    pub value: T,
    pub ln_weight: f64,
}

impl<T> Weighted<T> {
    pub fn weight(&self) -> f64 {
        self.ln_weight.exp()
    }
}

/// One draw of the extremal construction, reduced to its sup statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalRealization {
    pub z: f64,
    /// `A(z) 1{z <= n}`
    pub x_tilde_n: f64,
    /// `G~_{n ^ z} = p (exp(min(z, n)/p) - 1)`
    pub sup_g: f64,
    /// sup of `X^(n)`
    pub sup_x_full: f64,
    pub tail_mode: TailMode,
    #[serde(skip)]
    ln_sup_x_full: f64,
    #[serde(skip)]
    p: f64,
    #[serde(skip)]
    n: u32,
}

impl ExtremalRealization {
    /// `(sup X^(n))^q`.
    pub fn sup_x_pow(&self, q: f64) -> f64 {
        (q * self.ln_sup_x_full).exp()
    }

    /// `(X~_n)^q`; for `q = p` this is `e^z 1{z <= n}`.
    pub fn x_tilde_pow(&self, q: f64) -> f64 {
        if self.z <= self.n as f64 {
            (q * self.z / self.p).exp()
        } else {
            0.0
        }
    }

    /// `(sup G^(n))^q`.
    pub fn sup_g_pow(&self, q: f64) -> f64 {
        (q * ln_gtilde(self.p, self.z.min(self.n as f64))).exp()
    }

    pub fn ln_sup_x_full(&self) -> f64 {
        self.ln_sup_x_full
    }

    pub fn ln_sup_g(&self) -> f64 {
        ln_gtilde(self.p, self.z.min(self.n as f64))
    }

    /// `ln X~_n`, `-inf` when the jump falls after the horizon.
    pub fn ln_x_tilde_n(&self) -> f64 {
        if self.z <= self.n as f64 {
            self.z / self.p
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn sup_sample(&self) -> SupSample {
        SupSample {
            sup_x: self.sup_x_full,
            sup_g: self.sup_g,
        }
    }
}

/// `ln(p (exp(m/p) - 1))`, `-inf` at `m = 0`.
pub fn ln_gtilde(p: f64, m: f64) -> f64 {
    if m <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let r = m / p;
    if r < 30.0 {
        (p * r.exp_m1()).ln()
    } else {
        p.ln() + r + (-(-r).exp()).ln_1p()
    }
}

/// `int_0^t A(s) ds = p (exp(t/p) - 1)`.
pub fn integral_of_a(p: f64, t: f64) -> f64 {
    p * (t / p).exp_m1()
}

/// Continuous non-decreasing ramp: 0 before `n`, 1 after `n + 1`, linear between.
pub fn ramp(t: f64, n: u32) -> f64 {
    (t - n as f64).clamp(0.0, 1.0)
}

/// Sup of a Brownian motion started at `x` and absorbed at 0.
pub fn sample_y<R: Rng + ?Sized>(x: f64, mode: TailMode, rng: &mut R) -> Result<f64, ConstructionError> {
    if !(x >= 0.0) {
        return Err(ConstructionError::NegativeStart(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(match mode {
        TailMode::ExactLaw => x / open_uniform(rng),
        TailMode::PathSim(cfg) => simulate_absorbed_max(x, cfg, rng),
    })
}

fn simulate_absorbed_max<R: Rng + ?Sized>(x: f64, cfg: PathSimConfig, rng: &mut R) -> f64 {
    let mut level = x;
    let mut best = x;
    let sd = cfg.step.sqrt();
    let steps = (cfg.max_time / cfg.step).ceil() as u64;
    for _ in 0..steps {
        let next = level + sd * std_normal(rng);
        if next <= 0.0 || bridge_hits_zero(level, next, cfg.step, rng) {
            break;
        }
        level = next;
        best = best.max(level);
    }
    best
}

// P[bridge from a > 0 to b > 0 over dt touches 0] = exp(-2ab/dt).
fn bridge_hits_zero<R: Rng + ?Sized>(a: f64, b: f64, dt: f64, rng: &mut R) -> bool {
    let e = 2.0 * a * b / dt;
    e < 40.0 && rng.random::<f64>() < (-e).exp()
}

/// `(X~, G~)` on `grid` with `Z ~ Exp(1)`.
pub fn sample_exp_pair<R: Rng + ?Sized>(
    params: &ExtremalParams,
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<PathPair, ConstructionError> {
    Ok(sample_exp_pair_with(params, grid, Proposal::Natural, rng)?.value.0)
}

/// `(X~, G~)` on `grid` under `proposal`; the value also carries `z`.
pub fn sample_exp_pair_with<R: Rng + ?Sized>(
    params: &ExtremalParams,
    grid: &TimeGrid,
    proposal: Proposal,
    rng: &mut R,
) -> Result<Weighted<(PathPair, f64)>, ConstructionError> {
    params.validate()?;
    if (grid.horizon() - params.horizon()).abs() > 1e-9 || !grid.divides_horizon() {
        return Err(ConstructionError::GridMismatch {
            n: params.n,
            step: grid.step(),
            horizon: grid.horizon(),
        });
    }
    let (z, ln_weight) = draw_z(proposal, params.n, rng);
    Ok(Weighted {
        value: (exp_pair_for(params.p, z, grid)?, z),
        ln_weight,
    })
}

/// Deterministic `(X~, G~)` path for a given jump time `z`.
pub fn exp_pair_for(p: f64, z: f64, grid: &TimeGrid) -> Result<PathPair, ConstructionError> {
    let jump = (z / p).exp();
    let points = grid.points();
    let mut x = Vec::with_capacity(points);
    let mut g = Vec::with_capacity(points);
    for k in 0..points {
        let t = grid.time(k);
        x.push(if t >= z { jump } else { 0.0 });
        g.push(integral_of_a(p, t.min(z)));
    }
    Ok(PathPair::new(x, g, *grid, true)?)
}

/// Draws `(Z, tail)` with `Z ~ Exp(1)`.
pub fn sample_full_extremal<R: Rng + ?Sized>(
    params: &ExtremalParams,
    tail: TailMode,
    rng: &mut R,
) -> Result<ExtremalRealization, ConstructionError> {
    Ok(sample_full_extremal_with(params, tail, Proposal::Natural, rng)?.value)
}

pub fn sample_full_extremal_with<R: Rng + ?Sized>(
    params: &ExtremalParams,
    tail: TailMode,
    proposal: Proposal,
    rng: &mut R,
) -> Result<Weighted<ExtremalRealization>, ConstructionError> {
    params.validate()?;
    let (z, ln_weight) = draw_z(proposal, params.n, rng);
    Ok(Weighted {
        value: realize(params, z, tail, rng)?,
        ln_weight,
    })
}

/// Completes a realization for a given `z`.
pub fn realize<R: Rng + ?Sized>(
    params: &ExtremalParams,
    z: f64,
    tail: TailMode,
    rng: &mut R,
) -> Result<ExtremalRealization, ConstructionError> {
    let (p, n) = (params.p, params.n);
    let alive = z <= params.horizon();
    let x_tilde_n = if alive { (z / p).exp() } else { 0.0 };
    let sup_g = integral_of_a(p, z.min(params.horizon()));
    let ln_sup_x_full = match (alive, tail) {
        (false, _) => f64::NEG_INFINITY,
        (true, TailMode::ExactLaw) => z / p - open_uniform(rng).ln(),
        (true, TailMode::PathSim(_)) => sample_y(x_tilde_n, tail, rng)?.ln(),
    };
    Ok(ExtremalRealization {
        z,
        x_tilde_n,
        sup_g,
        sup_x_full: ln_sup_x_full.exp(),
        tail_mode: tail,
        ln_sup_x_full,
        p,
        n,
    })
}

/// Remark-2.4 freeze: `X^_t = X_tau 1{t >= tau}`, `G` stopped at `tau`.
pub fn hat_x(pair: &PathPair, tau: StoppingIndex) -> Result<PathPair, ConstructionError> {
    let k = match tau {
        StoppingIndex::At(k) if k < pair.len() => k,
        StoppingIndex::At(index) => {
            return Err(PathError::StopOutOfRange {
                index,
                points: pair.len(),
            }
            .into())
        }
        StoppingIndex::Infinity => return Err(ConstructionError::UnboundedStop),
    };
    let frozen = pair.x()[k];
    let x: Vec<f64> = (0..pair.len()).map(|j| if j >= k { frozen } else { 0.0 }).collect();
    let g: Vec<f64> = (0..pair.len()).map(|j| pair.g()[j.min(k)]).collect();
    let out = PathPair::new(x, g, pair.grid(), pair.g_predictable_shift())?;
    debug_assert!(out.x_is_monotone());
    Ok(out)
}

/// Discrete-time version of `(X^(n), G^(n))` on the grid `k 2^-N`.
///
/// `x[k] = X^(n)_{k h}` for `k = 0 ..= (n+1) 2^N` (zero up to `n`, then the
/// ramp). `g[k] = g[k-1] + 1{z > (k-1) h} int_{(k-1)h ^ n}^{kh ^ n} A`, i.e.
/// `G~` with `z` rounded up to the grid: it only uses `1{z > (k-1)h}`, so it
/// is known one step ahead, and `g[k] >= G^(n)_{kh}`.
///
/// With a path-simulated tail the Brownian phase is appended to `x` on the
/// same grid; with the exact law its sup is carried in `tail_sup`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePair {
    pub level: u32,
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub tail_sup: f64,
    pub realization: ExtremalRealization,
    pub ln_weight: f64,
}

impl DiscretePair {
    pub fn step(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn sup_x(&self) -> f64 {
        self.x.iter().copied().fold(self.tail_sup, f64::max)
    }

    pub fn sup_g(&self) -> f64 {
        *self.g.last().expect("non-empty")
    }

    pub fn to_path_pair(&self) -> Result<PathPair, ConstructionError> {
        let grid = TimeGrid::new(self.step(), (self.x.len() - 1) as f64 * self.step())?;
        Ok(PathPair::new(self.x.clone(), self.g.clone(), grid, true)?)
    }
}

/// Smallest grid time `>= z` on the dyadic grid of `level`.
pub fn ceil_to_grid(z: f64, level: u32) -> f64 {
    let scale = (level as f64).exp2();
    (z * scale).ceil() / scale
}

/// `(sup_k X^(n,N)_k)^q, (sup_k G^(n,N)_k)^q` in closed form (exact-law tail).
pub fn discrete_sup_pow(r: &ExtremalRealization, level: u32, q: f64) -> (f64, f64) {
    let m = ceil_to_grid(r.z, level).min(r.n as f64);
    (r.sup_x_pow(q), (q * ln_gtilde(r.p, m)).exp())
}

pub fn discretize_pair<R: Rng + ?Sized>(
    params: &ExtremalParams,
    level: u32,
    tail: TailMode,
    proposal: Proposal,
    rng: &mut R,
) -> Result<DiscretePair, ConstructionError> {
    Ok(discretize_levels(params, &[level], tail, proposal, rng)?.remove(0))
}

/// Discretizes one realization at several levels. A path-simulated tail is
/// drawn once on the finest grid and subsampled, so the grid sup of `x` is
/// monotone in the level for every realization.
pub fn discretize_levels<R: Rng + ?Sized>(
    params: &ExtremalParams,
    levels: &[u32],
    tail: TailMode,
    proposal: Proposal,
    rng: &mut R,
) -> Result<Vec<DiscretePair>, ConstructionError> {
    params.validate()?;
    let finest = levels.iter().copied().max().unwrap_or(0);
    let (z, ln_weight) = draw_z(proposal, params.n, rng);
    let realization = realize(params, z, TailMode::ExactLaw, rng)?;

    let fine_tail: Vec<f64> = match tail {
        TailMode::ExactLaw => Vec::new(),
        TailMode::PathSim(cfg) => {
            let h = (-(finest as f64)).exp2();
            grid_brownian_phase(realization.x_tilde_n, h, cfg.max_time, rng)
        }
    };

    levels
        .iter()
        .map(|&level| {
            let scale = (level as f64).exp2();
            let h = 1.0 / scale;
            let last = ((params.n as f64 + 1.0) * scale).round() as usize;
            let zc = ceil_to_grid(z, level);
            let mut x = Vec::with_capacity(last + 1);
            let mut g = Vec::with_capacity(last + 1);
            for k in 0..=last {
                let t = k as f64 * h;
                x.push(ramp(t, params.n) * realization.x_tilde_n);
                g.push(integral_of_a(params.p, t.min(zc).min(params.n as f64)));
            }
            let tail_sup = match tail {
                TailMode::ExactLaw => realization.sup_x_full,
                TailMode::PathSim(_) => {
                    let stride = 1usize << (finest - level);
                    let g_end = *g.last().expect("non-empty");
                    let mut best = realization.x_tilde_n;
                    for v in fine_tail.iter().skip(stride - 1).step_by(stride) {
                        x.push(*v);
                        g.push(g_end);
                        best = best.max(*v);
                    }
                    best
                }
            };
            Ok(DiscretePair {
                level,
                x,
                g,
                tail_sup,
                realization,
                ln_weight,
            })
        })
        .collect()
}

/// Brownian motion from `x0` on a grid of step `h`, absorbed at 0 (absorption
/// between grid points via the bridge crossing law). Returns the values after
/// the start, ending with a 0 once absorbed.
pub fn grid_brownian_phase<R: Rng + ?Sized>(x0: f64, h: f64, max_time: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::new();
    if x0 <= 0.0 {
        return out;
    }
    let sd = h.sqrt();
    let steps = (max_time / h).ceil() as usize;
    let mut level = x0;
    for _ in 0..steps {
        let next = level + sd * std_normal(rng);
        if next <= 0.0 || bridge_hits_zero(level, next, h, rng) {
            out.push(0.0);
            break;
        }
        level = next;
        out.push(level);
    }
    out
}
