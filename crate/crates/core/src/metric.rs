//! Monte Carlo estimates over the dilation parameter, the exact grid mean,
//! the bad-set measure bound and the Hausdorff dimension formula.
//!
//! Every random draw comes from ChaCha20 keyed by the master seed with the
//! sample (or block) index as stream number, and all aggregation is exact
//! integer arithmetic, so results do not depend on thread count or order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{Alpha, Ratio};
use crate::energy::{autocorrelation, EnergyReport};
use crate::error::{Error, Result};
use crate::fourier::gcd_exponential_bound;
use crate::paircorr::{count_close_pairs, dilate, Residues};
use crate::report::BoundCheckReport;
use crate::seqgen::Sequence;

/// Largest prime modulus accepted by the grid mean check.
pub const GRID_LIMIT: u64 = 20_000_000;
const MEASURE_BLOCK: u64 = 4096;

/// The random generator for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `2(N-1)s/N`, the mean of `R2` over `alpha`.
pub fn target_mean(n: usize, s: Ratio) -> f64 {
    2.0 * (n as f64 - 1.0) * s.to_f64() / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub spec: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(serialize_with = "crate::report::ser_display")]
    pub s: Ratio,
    pub samples: u64,
    pub seed: u64,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub target_mean: f64,
}

/// Mean and sample variance of `R2([-s, s], alpha, N)` over uniformly
/// random `B`-bit fixed-point `alpha`.
pub fn variance_estimate(seq: &Sequence, s: Ratio, samples: u64, seed: u64, bits: u32) -> Result<VarianceEstimate> {
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be positive".into()));
    }
    let n = seq.len();
    let counts: Vec<u64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let alpha = Alpha::random_from(&mut sample_rng(seed, i), bits);
            count_close_pairs(Residues::from_points(&dilate(&alpha, seq))?, s)
        })
        .collect::<Result<_>>()?;
    let s1: u128 = counts.iter().map(|&c| c as u128).sum();
    let s2: u128 = counts.iter().map(|&c| (c as u128).pow(2)).sum();
    let k = samples as u128;
    let nf = n as f64;
    let mean = s1 as f64 / (samples as f64 * nf);
    let variance = if samples < 2 { 0.0 } else { (k * s2 - s1 * s1) as f64 / ((k * (k - 1)) as f64 * nf * nf) };
    Ok(VarianceEstimate {
        spec: seq.spec().to_string(),
        n,
        s,
        samples,
        seed,
        mean,
        variance,
        stderr: (variance / samples as f64).sqrt(),
        target_mean: target_mean(n, s),
    })
}

/// `lhs` = estimated variance, `rhs = E N^-3 exp(kappa_hat ...)`.
pub fn variance_bound_check(est: &VarianceEstimate, energy: &EnergyReport, kappa_hat: f64, pass_constant: f64) -> Result<BoundCheckReport> {
    if est.n < 20 {
        return Err(Error::InvalidInput("the bound needs N >= 20".into()));
    }
    if est.n != energy.n {
        return Err(Error::InvalidInput(format!("estimate has N = {} but energy has N = {}", est.n, energy.n)));
    }
    let n = est.n as f64;
    let rhs = energy.e as f64 / (n * n * n) * gcd_exponential_bound(est.n, kappa_hat);
    Ok(BoundCheckReport::new(est.variance, rhs, pass_constant))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionBound {
    pub d: f64,
    pub epsilon: f64,
    pub bound: f64,
}

/// `(d + 3 - eps) / (d + 3)`.
pub fn dimension_bound(d: f64, epsilon: f64) -> Result<DimensionBound> {
    if !(d >= 1.0 && d.is_finite()) {
        return Err(Error::InvalidInput("d must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon <= d + 3.0) {
        return Err(Error::InvalidInput("epsilon must lie in (0, d + 3]".into()));
    }
    Ok(DimensionBound { d, epsilon, bound: (d + 3.0 - epsilon) / (d + 3.0) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureCheck {
    pub difference_set_size: usize,
    pub samples: u64,
    pub seed: u64,
    pub hits: u64,
    pub stderr: f64,
    /// `lhs <= rhs + 3 stderr`.
    pub pass: bool,
    pub report: BoundCheckReport,
}

/// Estimates `mes{alpha : min_{m != n in B} ||m alpha - n alpha|| < eps/|B - B|}`
/// against the bound `2 eps`.
pub fn measure_check(set: &[u128], epsilon: f64, samples: u64, seed: u64) -> Result<MeasureCheck> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput("epsilon must lie in (0, 1)".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be positive".into()));
    }
    if set.len() < 2 {
        return Err(Error::InvalidInput("B needs at least two elements".into()));
    }
    // |B - B| is translation invariant, so shift into the sequence range
    let lo = *set.iter().min().unwrap();
    let shifted = Sequence::from_set(set.iter().map(|&v| v - lo + 1).collect())?;
    let profile = autocorrelation(&shifted)?;
    let size = profile.difference_set_size();
    let diffs: Vec<u64> = profile.positive().iter().map(|&(k, _)| k as u64).collect();
    // ||k alpha|| < delta  <=>  dist * |B - B| < eps * 2^64 on the 64-bit circle
    let limit = epsilon * 2f64.powi(64);
    let blocks = samples.div_ceil(MEASURE_BLOCK);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut rng = sample_rng(seed, blk);
            let count = MEASURE_BLOCK.min(samples - blk * MEASURE_BLOCK);
            (0..count)
                .filter(|_| {
                    let alpha: u64 = rng.random();
                    diffs.iter().any(|&k| {
                        let x = k.wrapping_mul(alpha);
                        let dist = x.min(x.wrapping_neg());
                        (dist as f64) * (size as f64) < limit
                    })
                })
                .count() as u64
        })
        .sum();
    let p = hits as f64 / samples as f64;
    let stderr = (p * (1.0 - p) / samples as f64).sqrt();
    let report = BoundCheckReport::new(p, 2.0 * epsilon, 1.0);
    Ok(MeasureCheck { difference_set_size: size, samples, seed, hits, stderr, pass: p <= 2.0 * epsilon + 3.0 * stderr, report })
}

/// Deterministic primality by trial division.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = 7u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) || n.is_multiple_of(d + 4) {
            return false;
        }
        d += 6;
    }
    true
}

pub fn next_prime(mut n: u64) -> u64 {
    while !is_prime(n) {
        n += 1;
    }
    n
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMeanCheck {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(serialize_with = "crate::report::ser_display")]
    pub s: Ratio,
    /// Prime modulus of the grid `alpha = j/Q`.
    pub q: u64,
    /// Sum of ordered close-pair counts over the grid.
    pub total_count: u128,
    /// `N (N - 1) (2 floor(Q s/N) + 1)`, what every nonzero difference contributes.
    pub predicted_count: u128,
    pub grid_mean: f64,
    pub target_mean: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Averages `R2` over all `alpha = j/Q`, `0 <= j < Q`, for a prime
/// `Q > 2 max(A) N/s`. Since `Q` divides no difference, each pair is close
/// for exactly `2 floor(Q s/N) + 1` values of `j`, and the grid mean lies
/// within `N/Q` of `2(N - 1)s/N`.
pub fn grid_mean_check(seq: &Sequence, s: Ratio) -> Result<GridMeanCheck> {
    let n = seq.len();
    if n < 2 {
        return Err(Error::InvalidInput("N must be at least 2".into()));
    }
    if 2 * s.num() as u128 > n as u128 * s.den() as u128 {
        return Err(Error::InvalidInput("need 2s <= N".into()));
    }
    let floor_q = (2 * seq.max() * n as u128 * s.den() as u128 / s.num() as u128).max(1000);
    if floor_q >= GRID_LIMIT as u128 {
        return Err(Error::CapExceeded { what: "grid modulus", value: floor_q, cap: GRID_LIMIT as u128 });
    }
    let q = next_prime(floor_q as u64 + 1);
    let total_count: u128 = (0..q)
        .into_par_iter()
        .map(|j| {
            // residues over the common denominator q, also for j = 0
            let pos = seq.values().iter().map(|&a| (a % q as u128 * j as u128 % q as u128) as u64).collect();
            count_close_pairs(Residues::Rational { pos, q }, s).map(|c| c as u128)
        })
        .collect::<Result<Vec<u128>>>()?
        .into_iter()
        .sum();
    let width = q as u128 * s.num() as u128 / (n as u128 * s.den() as u128);
    let predicted_count = (n * (n - 1)) as u128 * (2 * width + 1);
    let grid_mean = total_count as f64 / (q as f64 * n as f64);
    let target = target_mean(n, s);
    let tolerance = n as f64 / q as f64;
    Ok(GridMeanCheck {
        n,
        s,
        q,
        total_count,
        predicted_count,
        grid_mean,
        target_mean: target,
        tolerance,
        pass: total_count == predicted_count && (grid_mean - target).abs() <= tolerance,
    })
}
