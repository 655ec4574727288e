//! Small statistics helpers for detection-rate estimation.

use std::collections::BTreeMap;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n` trials. `None` when
/// `n == 0`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> Option<(f64, f64)> {
    if n == 0 {
        return None;
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The bounds are exactly 0 and 1 at the extremes; avoid rounding there.
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    Some((lo, hi))
}

/// Binomial standard error `sqrt(p (1 - p) / n)` at the reference value `p`.
pub fn standard_error(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Plug-in mutual information estimator over joint symbol counts, in bits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JointCounts {
    counts: BTreeMap<(u8, u8), u64>,
    total: u64,
}

impl JointCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, a: u8, b: u8) {
        *self.counts.entry((a, b)).or_default() += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &JointCounts) {
        for (&key, &c) in &other.counts {
            *self.counts.entry(key).or_default() += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn mutual_information(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        let mut left: BTreeMap<u8, u64> = BTreeMap::new();
        let mut right: BTreeMap<u8, u64> = BTreeMap::new();
        for (&(a, b), &c) in &self.counts {
            *left.entry(a).or_default() += c;
            *right.entry(b).or_default() += c;
        }
        let mi: f64 = self
            .counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&(a, b), &c)| {
                let pab = c as f64 / n;
                let pa = left[&a] as f64 / n;
                let pb = right[&b] as f64 / n;
                pab * (pab / (pa * pb)).log2()
            })
            .sum();
        mi.max(0.0)
    }
}

/// Ordinary least squares fit `y = slope * x + intercept`, with R^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}
