//! Globally adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate drops below `max(abs_tol, rel_tol * |I|)`. Known kinks should be
//! passed as breakpoints so no panel straddles them.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error(
        "quadrature did not converge on [{lo}, {hi}]: estimate {estimate:e}, \
         error {error:e} after {intervals} intervals"
    )]
    NonConvergence {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
        intervals: usize,
    },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid integration range [{lo}, {hi}]")]
    BadRange { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Panel, QuadError> {
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(centre);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite { x: centre });
    }
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let (xl, xr) = (centre - dx, centre + dx);
        let (fl, fr) = (f(xl), f(xr));
        if !fl.is_finite() {
            return Err(QuadError::NonFinite { x: xl });
        }
        if !fr.is_finite() {
            return Err(QuadError::NonFinite { x: xr });
        }
        k += WGK[j] * (fl + fr);
        if j % 2 == 1 {
            g += WG[j / 2] * (fl + fr);
        }
    }
    Ok(Panel {
        lo,
        hi,
        value: k * half,
        error: ((k - g) * half).abs(),
    })
}

/// Integrates `f` over `[lo, hi]`, starting from panels split at `breaks`
/// (points outside the open range are ignored).
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult, QuadError> {
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(QuadError::BadRange { lo, hi });
    }
    if hi == lo {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut left = lo;
    for right in cuts.into_iter().chain(std::iter::once(hi)) {
        heap.push(kronrod(&f, left, right)?);
        left = right;
    }

    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            return Ok(QuadResult {
                value,
                error,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.lo + worst.hi);
        if heap.len() + 2 > opts.max_intervals || mid <= worst.lo || mid >= worst.hi {
            return Err(QuadError::NonConvergence {
                lo,
                hi,
                estimate: value,
                error,
                intervals: heap.len() + 1,
            });
        }
        heap.push(kronrod(&f, worst.lo, mid)?);
        heap.push(kronrod(&f, mid, worst.hi)?);
    }
}

/// Integrates `f` over `[lo, inf)` through `u = lo + s/(1-s)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    opts: QuadOptions,
) -> Result<QuadResult, QuadError> {
    let mapped = |s: f64| {
        let one_minus = 1.0 - s;
        let u = lo + s / one_minus;
        let v = f(u) / (one_minus * one_minus);
        // the integrand must decay at infinity; 0 * inf at s -> 1 is treated as 0
        if v.is_nan() && !u.is_finite() {
            0.0
        } else {
            v
        }
    };
    integrate(mapped, 0.0, 1.0, &[], opts)
}
