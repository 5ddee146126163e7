//! Closed-form constants, exact moments and quadrature oracles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{integrate, integrate_to_infinity, QuadError, QuadOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("p must lie in (0,1), got {0}")]
    BadP(f64),
    #[error("lambda must be positive, got {0}")]
    BadLambda(f64),
    #[error("argument must be non-negative, got {0}")]
    Negative(f64),
    #[error("invalid law parameter: {0}")]
    BadLaw(String),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
}

fn check_p(p: f64) -> Result<(), OracleError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(OracleError::BadP(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantKind {
    /// `p^-p / (1-p)`
    Lenglart,
    /// `p^-p`
    Monotone,
    /// `(1-p)^-(1-p) p^-p`
    PratelliPower,
    /// `(2-p) / (1-p)`
    LenglartOriginal,
}

impl ConstantKind {
    pub const ALL: [ConstantKind; 4] = [
        ConstantKind::Lenglart,
        ConstantKind::Monotone,
        ConstantKind::PratelliPower,
        ConstantKind::LenglartOriginal,
    ];
}

impl std::str::FromStr for ConstantKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "lenglart" => Ok(ConstantKind::Lenglart),
            "monotone" => Ok(ConstantKind::Monotone),
            "pratelli_power" | "pratelli" => Ok(ConstantKind::PratelliPower),
            "lenglart_original" | "original" => Ok(ConstantKind::LenglartOriginal),
            other => Err(format!("unknown constant kind '{other}'")),
        }
    }
}

pub fn constant(kind: ConstantKind, p: f64) -> Result<f64, OracleError> {
    check_p(p)?;
    let monotone = p.powf(-p);
    Ok(match kind {
        ConstantKind::Lenglart => monotone / (1.0 - p),
        ConstantKind::Monotone => monotone,
        ConstantKind::PratelliPower => (1.0 - p).powf(-(1.0 - p)) * monotone,
        ConstantKind::LenglartOriginal => (2.0 - p) / (1.0 - p),
    })
}

/// `lambda^-p (lambda + 1 - p)`; minimized at `lambda = p`.
pub fn lambda_bound(p: f64, lambda: f64) -> Result<f64, OracleError> {
    check_p(p)?;
    if !(lambda > 0.0) {
        return Err(OracleError::BadLambda(lambda));
    }
    Ok(lambda.powf(-p) * (lambda + 1.0 - p))
}

/// Constant `(1+c) c^-p` obtained from the power-function Pratelli bound
/// after rescaling `G` by `c`.
pub fn pratelli_power_constant(p: f64, c: f64) -> Result<f64, OracleError> {
    check_p(p)?;
    if !(c > 0.0) {
        return Err(OracleError::BadLambda(c));
    }
    Ok((1.0 + c) * c.powf(-p))
}

/// Minimizer `p / (1-p)` of [`pratelli_power_constant`].
pub fn pratelli_optimal_c(p: f64) -> Result<f64, OracleError> {
    check_p(p)?;
    Ok(p / (1.0 - p))
}

/// `E[X~_t^p] = t`.
pub fn xtilde_sup_moment(_p: f64, t: f64) -> Result<f64, OracleError> {
    if !(t >= 0.0) {
        return Err(OracleError::Negative(t));
    }
    Ok(t)
}

/// `E[G~_t^p] = int_0^inf (p (e^{min(t,x)/p} - 1))^p e^-x dx`.
///
/// On `x <= t` the integrand reduces to `p^p (1 - e^{-x/p})^p`; the part past
/// the kink at `x = t` is `e^-t (p (e^{t/p} - 1))^p = p^p (1 - e^{-t/p})^p`.
pub fn gtilde_sup_moment(p: f64, t: f64) -> Result<f64, OracleError> {
    check_p(p)?;
    if !(t >= 0.0) {
        return Err(OracleError::Negative(t));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let shape = |x: f64| (-(-x / p).exp_m1()).powf(p);
    let opts = QuadOptions {
        abs_tol: 1e-11,
        rel_tol: 1e-13,
        ..QuadOptions::default()
    };
    let body = integrate(shape, 0.0, t, &[], opts)?.value;
    let value = p.powf(p) * (body + shape(t));
    debug_assert!(value <= p.powf(p) * (t + 1.0) * (1.0 + 1e-12));
    Ok(value)
}

/// `E[Y_x^p] = x^p / (1-p)`.
pub fn y_sup_moment(p: f64, x: f64) -> Result<f64, OracleError> {
    check_p(p)?;
    if !(x >= 0.0) {
        return Err(OracleError::Negative(x));
    }
    Ok(x.powf(p) / (1.0 - p))
}

/// `E[(sup X^(n))^p] = n / (1-p)`.
pub fn full_extremal_sup_moment(p: f64, n: u32) -> Result<f64, OracleError> {
    check_p(p)?;
    Ok(n as f64 / (1.0 - p))
}

/// Laws with exact CDF and truncated mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentLaw {
    Uniform,
    Exponential,
    PointMass(f64),
    /// Pareto with scale 1 and tail index `alpha > 1`.
    Pareto(f64),
}

impl std::str::FromStr for MomentLaw {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64, String> {
            a.ok_or_else(|| format!("law '{name}' needs a parameter, e.g. {name}:2"))?
                .parse::<f64>()
                .map_err(|e| e.to_string())
        };
        match name {
            "uniform" => Ok(MomentLaw::Uniform),
            "exp" | "exponential" => Ok(MomentLaw::Exponential),
            "point" | "point_mass" => Ok(MomentLaw::PointMass(num(arg)?)),
            "pareto" => Ok(MomentLaw::Pareto(num(arg)?)),
            other => Err(format!("unknown law '{other}' (uniform | exp | point:<c> | pareto:<alpha>)")),
        }
    }
}

impl MomentLaw {
    fn validate(&self) -> Result<(), OracleError> {
        match *self {
            MomentLaw::PointMass(c) if !(c > 0.0 && c.is_finite()) => {
                Err(OracleError::BadLaw(format!("point mass location {c} must be positive")))
            }
            MomentLaw::Pareto(a) if !(a > 1.0 && a.is_finite()) => {
                Err(OracleError::BadLaw(format!("pareto index {a} must exceed 1")))
            }
            _ => Ok(()),
        }
    }

    /// `P[Z >= z]`.
    pub fn survival(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 1.0;
        }
        match *self {
            MomentLaw::Uniform => (1.0 - z).max(0.0),
            MomentLaw::Exponential => (-z).exp(),
            MomentLaw::PointMass(c) => {
                if z <= c {
                    1.0
                } else {
                    0.0
                }
            }
            MomentLaw::Pareto(a) => {
                if z <= 1.0 {
                    1.0
                } else {
                    z.powf(-a)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MomentLaw::Uniform => 0.5,
            MomentLaw::Exponential => 1.0,
            MomentLaw::PointMass(c) => c,
            MomentLaw::Pareto(a) => a / (a - 1.0),
        }
    }

    /// `E[Z ^ u]`.
    pub fn truncated_mean(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match *self {
            MomentLaw::Uniform => {
                if u >= 1.0 {
                    0.5
                } else {
                    u - 0.5 * u * u
                }
            }
            MomentLaw::Exponential => -(-u).exp_m1(),
            MomentLaw::PointMass(c) => c.min(u),
            MomentLaw::Pareto(a) => {
                if u <= 1.0 {
                    u
                } else {
                    a / (a - 1.0) - u.powf(1.0 - a) / (a - 1.0)
                }
            }
        }
    }

    /// Point where `E[Z ^ u]` stops being `u`-linear or the support ends.
    fn kink(&self) -> f64 {
        match *self {
            MomentLaw::PointMass(c) => c,
            _ => 1.0,
        }
    }

    /// `E[Z^p]` against the law itself (density or atom).
    fn direct_moment(&self, p: f64, opts: QuadOptions) -> Result<f64, OracleError> {
        Ok(match *self {
            MomentLaw::PointMass(c) => c.powf(p),
            MomentLaw::Uniform => integrate(|z: f64| z.powf(p), 0.0, 1.0, &[], opts)?.value,
            MomentLaw::Exponential => {
                let head = integrate(|z: f64| z.powf(p) * (-z).exp(), 0.0, 1.0, &[], opts)?.value;
                head + integrate_to_infinity(|z: f64| z.powf(p) * (-z).exp(), 1.0, opts)?.value
            }
            MomentLaw::Pareto(a) => {
                integrate_to_infinity(|z: f64| z.powf(p) * a * z.powf(-a - 1.0), 1.0, opts)?.value
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub law: MomentLaw,
    pub p: f64,
    /// `E[Z^p]` integrated against the law.
    pub direct: f64,
    /// `int_0^inf P[Z >= u^{1/p}] du`
    pub tail_integral: f64,
    /// `p (1-p) int_0^inf E[Z ^ u] u^{p-2} du`
    pub truncated_mean_integral: f64,
    pub max_discrepancy: f64,
}

/// Evaluates both integral representations of `E[Z^p]` and the direct moment.
pub fn check_moment_identities(law: MomentLaw, p: f64) -> Result<IdentityReport, OracleError> {
    check_p(p)?;
    law.validate()?;
    let opts = QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        max_intervals: 8000,
    };
    let direct = law.direct_moment(p, opts)?;

    // P[Z >= u^{1/p}]: constant 1 below kink^p, integrated piecewise above it.
    let b = law.kink().powf(p);
    let tail = |u: f64| law.survival(u.powf(1.0 / p));
    let tail_integral = integrate(tail, 0.0, b, &[], opts)?.value
        + match law {
            MomentLaw::Uniform | MomentLaw::PointMass(_) => 0.0,
            _ => integrate_to_infinity(tail, b, opts)?.value,
        };

    // Below the kink substitute u = v^{1/p}: the integrand becomes
    // (1/p) E[Z ^ v^{1/p}] v^{-1/p}, which is bounded at 0. Above it subtract
    // the mean, whose contribution mean * a^{p-1}/(1-p) is exact.
    let a = law.kink();
    let head = integrate(
        |v: f64| {
            if v == 0.0 {
                return 1.0 / p;
            }
            let u = v.powf(1.0 / p);
            law.truncated_mean(u) / (p * u)
        },
        0.0,
        a.powf(p),
        &[],
        opts,
    )?
    .value;
    let mean = law.mean();
    let excess = match law {
        MomentLaw::Uniform | MomentLaw::PointMass(_) => 0.0,
        _ => integrate_to_infinity(|u: f64| (law.truncated_mean(u) - mean) * u.powf(p - 2.0), a, opts)?.value,
    };
    let truncated_mean_integral =
        p * (1.0 - p) * (head + excess + mean * a.powf(p - 1.0) / (1.0 - p));

    let vals = [direct, tail_integral, truncated_mean_integral];
    let max_discrepancy = vals
        .iter()
        .flat_map(|x| vals.iter().map(move |y| (x - y).abs()))
        .fold(0.0, f64::max);
    Ok(IdentityReport {
        law,
        p,
        direct,
        tail_integral,
        truncated_mean_integral,
        max_discrepancy,
    })
}
