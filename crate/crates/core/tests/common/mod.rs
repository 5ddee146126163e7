//! Exhaustive enumeration of Bernoulli jump paths, used as an exact oracle
//! for the compensated-sum generator.

#![allow(dead_code)]

/// One outcome sequence with its probability.
pub struct Outcome {
    pub prob: f64,
    /// `x[k] = J_1 + .. + J_k`, `k = 0 ..= steps`.
    pub x: Vec<f64>,
    /// `g[k] = k q`.
    pub g: Vec<f64>,
}

pub fn enumerate(q: f64, steps: usize) -> Vec<Outcome> {
    assert!(steps <= 20);
    (0u32..1 << steps)
        .map(|bits| {
            let mut x = vec![0.0];
            let mut prob = 1.0;
            let mut level = 0.0;
            for j in 0..steps {
                if bits >> j & 1 == 1 {
                    level += 1.0;
                    prob *= q;
                } else {
                    prob *= 1.0 - q;
                }
                x.push(level);
            }
            let g = (0..=steps).map(|k| k as f64 * q).collect();
            Outcome { prob, x, g }
        })
        .collect()
}

/// `E[f(outcome)]`.
pub fn expect<F: Fn(&Outcome) -> f64>(outcomes: &[Outcome], f: F) -> f64 {
    outcomes.iter().map(|o| o.prob * f(o)).sum()
}

/// First index with `v[k] >= level`, else the last index.
pub fn hit(v: &[f64], level: f64) -> usize {
    v.iter().position(|&e| e >= level).unwrap_or(v.len() - 1)
}

pub fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}
