//! Additive energy through the difference profile.
//!
//! With `d(k) = |A ∩ (A + k)|` one has `E(A) = sum_k d(k)^2`: the quadruple
//! equation `a + b = c + d` is rewritten as `a - c = d - b`. The profile is
//! computed by one of three independent routes (direct difference counting,
//! FFT autocorrelation of the indicator, and a quartic brute force) which must
//! agree exactly.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seqgen::{generate, Sequence, SequenceSpec};

/// Largest N accepted by the quadratic counting path.
pub const DEFAULT_QUADRATIC_CAP: usize = 200_000;
/// Largest `max - min` accepted by the convolution path.
pub const CONVOLUTION_SPAN_LIMIT: u128 = 1 << 26;
/// Largest number of `(pair, multiplier)` products in the solution counter.
pub const DEFAULT_RZ_CAP: u128 = 20_000_000;

const ORACLE_CAP: usize = 128;
const CHUNK_TARGET: usize = 1 << 22;
const DENSE_SPAN_LIMIT: u128 = 1 << 24;
const AUTO_CONVOLUTION_SPAN: u128 = 1 << 22;
const CONVOLUTION_TOLERANCE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyAlgorithm {
    /// Counting map over all positive differences.
    Hash,
    /// FFT autocorrelation of the indicator on `[min, max]`.
    Convolution,
    /// Exhaustive quadruple enumeration, `N <= 128`.
    Oracle,
    /// Convolution for dense sets, counting otherwise.
    Auto,
}

impl EnergyAlgorithm {
    pub fn tag(self) -> &'static str {
        match self {
            EnergyAlgorithm::Hash => "hash",
            EnergyAlgorithm::Convolution => "convolution",
            EnergyAlgorithm::Oracle => "oracle",
            EnergyAlgorithm::Auto => "auto",
        }
    }
}

impl std::str::FromStr for EnergyAlgorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hash" => EnergyAlgorithm::Hash,
            "convolution" => EnergyAlgorithm::Convolution,
            "oracle" => EnergyAlgorithm::Oracle,
            "auto" => EnergyAlgorithm::Auto,
            _ => return Err(Error::Parse(format!("unknown energy algorithm `{s}`"))),
        })
    }
}

/// `k -> d(k)` for `k > 0` with `d(k) > 0`, sorted by `k`. Negative shifts
/// follow from `d(-k) = d(k)` and `d(0) = |A|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AutocorrelationProfile {
    n: usize,
    positive: Vec<(u128, u64)>,
}

impl AutocorrelationProfile {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn positive(&self) -> &[(u128, u64)] {
        &self.positive
    }

    pub fn get(&self, k: i128) -> u64 {
        if k == 0 {
            return self.n as u64;
        }
        let k = k.unsigned_abs();
        match self.positive.binary_search_by_key(&k, |&(key, _)| key) {
            Ok(i) => self.positive[i].1,
            Err(_) => 0,
        }
    }

    /// `sum_k d(k)` over all `k`; always `|A|^2`.
    pub fn total(&self) -> u128 {
        self.n as u128 + 2 * self.positive.iter().map(|&(_, d)| d as u128).sum::<u128>()
    }

    /// `sum_k d(k)^2`.
    pub fn energy(&self) -> u128 {
        let n = self.n as u128;
        n * n + 2 * self.positive.iter().map(|&(_, d)| (d as u128).pow(2)).sum::<u128>()
    }

    pub fn max_nonzero(&self) -> u64 {
        self.positive.iter().map(|&(_, d)| d).max().unwrap_or(0)
    }

    /// `|A - A|`, counting 0 and both signs.
    pub fn difference_set_size(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            2 * self.positive.len() + 1
        }
    }
}

fn span(values: &[u128]) -> u128 {
    match (values.first(), values.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0,
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::CapExceeded { what: "N for the quadratic difference path", value: n as u128, cap: cap as u128 });
    }
    Ok(())
}

/// Emits `(k, d(k))` for every positive difference in increasing `k`.
fn difference_runs(values: &[u128], mut emit: impl FnMut(u128, u64)) {
    let n = values.len();
    if n < 2 {
        return;
    }
    let sp = span(values);
    let pairs = n * (n - 1) / 2;
    if sp <= DENSE_SPAN_LIMIT && sp <= 8 * pairs as u128 {
        let base = values[0];
        let offs: Vec<usize> = values.iter().map(|&v| (v - base) as usize).collect();
        let mut counts = vec![0u32; sp as usize + 1];
        for (i, &a) in offs.iter().enumerate() {
            for &b in &offs[i + 1..] {
                counts[b - a] += 1;
            }
        }
        for (k, &c) in counts.iter().enumerate().skip(1) {
            if c > 0 {
                emit(k as u128, c as u64);
            }
        }
    } else if sp <= u64::MAX as u128 {
        chunked_runs::<u64>(values, pairs, &mut emit);
    } else {
        chunked_runs::<u128>(values, pairs, &mut emit);
    }
}

/// Range-partitioned counting: each pass gathers the differences in one
/// value window `[lo, hi)`, sorts them and reports run lengths, so memory
/// stays near `CHUNK_TARGET` entries whatever the number of pairs.
fn chunked_runs<T>(values: &[u128], pairs: usize, emit: &mut impl FnMut(u128, u64))
where
    T: Copy + Ord + TryFrom<u128> + Into<u128>,
{
    let n = values.len();
    let chunks = pairs.div_ceil(CHUNK_TARGET);
    let mut bounds: Vec<u128> = Vec::new();
    if chunks > 1 {
        // quantiles of a deterministic sample of differences
        let samples = (64 * chunks).min(pairs);
        let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut sample: Vec<u128> = (0..samples)
            .map(|_| {
                let i = (next() % n as u64) as usize;
                let mut j = (next() % n as u64) as usize;
                if i == j {
                    j = (j + 1) % n;
                }
                values[i.max(j)] - values[i.min(j)]
            })
            .collect();
        sample.sort_unstable();
        bounds = (1..chunks).map(|c| sample[c * samples / chunks]).collect();
        bounds.dedup();
    }
    bounds.push(u128::MAX);

    let mut next_j: Vec<usize> = (1..=n).collect();
    let mut buf: Vec<T> = Vec::with_capacity(CHUNK_TARGET.min(pairs));
    for &hi in &bounds {
        buf.clear();
        for i in 0..n {
            let a = values[i];
            let mut j = next_j[i];
            while j < n && values[j] - a < hi {
                buf.push(T::try_from(values[j] - a).ok().expect("difference fits"));
                j += 1;
            }
            next_j[i] = j;
        }
        buf.sort_unstable();
        let mut start = 0;
        while start < buf.len() {
            let k = buf[start];
            let mut end = start + 1;
            while end < buf.len() && buf[end] == k {
                end += 1;
            }
            emit(k.into(), (end - start) as u64);
            start = end;
        }
    }
}

/// Autocorrelation of the indicator by FFT; entry `k` is `d(k)` for
/// `0 <= k <= span`.
fn convolution_profile(values: &[u128]) -> Result<Vec<u64>> {
    let sp = span(values);
    if sp > CONVOLUTION_SPAN_LIMIT {
        return Err(Error::SpanTooLarge { span: sp, limit: CONVOLUTION_SPAN_LIMIT });
    }
    let width = sp as usize + 1;
    let len = (2 * width).next_power_of_two();
    let mut buf = vec![Complex::new(0.0f64, 0.0); len];
    for &v in values {
        buf[(v - values[0]) as usize].re = 1.0;
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = len as f64;
    let mut out = Vec::with_capacity(width);
    for (bin, z) in buf.iter().enumerate() {
        let x = z.re / scale;
        let r = x.round();
        let deviation = (x - r).abs().max((z.im / scale).abs());
        if deviation > CONVOLUTION_TOLERANCE || r < 0.0 {
            return Err(Error::ConvolutionInexact { bin, deviation });
        }
        if bin < width {
            out.push(r as u64);
        }
    }
    Ok(out)
}

pub fn autocorrelation(seq: &Sequence) -> Result<AutocorrelationProfile> {
    autocorrelation_with(seq, EnergyAlgorithm::Auto, DEFAULT_QUADRATIC_CAP)
}

pub fn autocorrelation_with(seq: &Sequence, algorithm: EnergyAlgorithm, cap: usize) -> Result<AutocorrelationProfile> {
    let values = seq.values();
    let n = values.len();
    let positive = match resolve(values, algorithm) {
        EnergyAlgorithm::Convolution => convolution_profile(values)?
            .into_iter()
            .enumerate()
            .skip(1)
            .filter(|&(_, d)| d > 0)
            .map(|(k, d)| (k as u128, d))
            .collect(),
        EnergyAlgorithm::Oracle => {
            if n > ORACLE_CAP {
                return Err(Error::CapExceeded { what: "N for the oracle", value: n as u128, cap: ORACLE_CAP as u128 });
            }
            let mut diffs: Vec<u128> = Vec::new();
            for &a in values {
                for &b in values {
                    if a > b {
                        diffs.push(a - b);
                    }
                }
            }
            diffs.sort_unstable();
            let mut out: Vec<(u128, u64)> = Vec::new();
            for k in diffs {
                match out.last_mut() {
                    Some((key, c)) if *key == k => *c += 1,
                    _ => out.push((k, 1)),
                }
            }
            out
        }
        _ => {
            check_cap(n, cap)?;
            let mut out = Vec::new();
            difference_runs(values, |k, d| out.push((k, d)));
            out
        }
    };
    Ok(AutocorrelationProfile { n, positive })
}

fn resolve(values: &[u128], algorithm: EnergyAlgorithm) -> EnergyAlgorithm {
    if algorithm != EnergyAlgorithm::Auto {
        return algorithm;
    }
    let n = values.len() as u128;
    let sp = span(values);
    if sp <= AUTO_CONVOLUTION_SPAN && n * n > 4 * sp.max(1) && n >= 64 {
        EnergyAlgorithm::Convolution
    } else {
        EnergyAlgorithm::Hash
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnergyReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "E")]
    pub e: u128,
    pub algorithm: &'static str,
}

/// `E(A) = #{(a, b, c, d) in A^4 : a + b = c + d}`.
pub fn energy(seq: &Sequence, algorithm: EnergyAlgorithm) -> Result<EnergyReport> {
    let values = seq.values();
    let n = values.len();
    let algo = resolve(values, algorithm);
    let e = match algo {
        EnergyAlgorithm::Oracle => {
            if n > ORACLE_CAP {
                return Err(Error::CapExceeded { what: "N for the oracle", value: n as u128, cap: ORACLE_CAP as u128 });
            }
            let mut count: u128 = 0;
            for &a in values {
                for &b in values {
                    for &c in values {
                        for &d in values {
                            count += (a + b == c + d) as u128;
                        }
                    }
                }
            }
            count
        }
        EnergyAlgorithm::Convolution => {
            let nn = n as u128;
            nn * nn + 2 * convolution_profile(values)?.iter().skip(1).map(|&d| (d as u128).pow(2)).sum::<u128>()
        }
        _ => {
            check_cap(n, DEFAULT_QUADRATIC_CAP)?;
            let mut acc: u128 = 0;
            difference_runs(values, |_, d| acc += (d as u128).pow(2));
            (n as u128).pow(2) + 2 * acc
        }
    };
    Ok(EnergyReport { n, e, algorithm: algo.tag() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "E")]
    pub e: u128,
    pub log2n: f64,
    pub log2e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub spec: String,
    pub points: Vec<ScanPoint>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    (slope, intercept, (rss / m).sqrt())
}

/// Energies of the truncations `A_N` for dyadic `N` and the fitted exponent
/// of `E(A_N)` against `N`.
pub fn energy_scan(spec: &SequenceSpec, ns: &[usize], algorithm: EnergyAlgorithm) -> Result<ExponentFit> {
    if ns.len() < 4 {
        return Err(Error::InvalidInput("energy scan needs at least 4 values of N".into()));
    }
    if let Some(&bad) = ns.iter().find(|n| !n.is_power_of_two() || **n < 2) {
        return Err(Error::InvalidInput(format!("N = {bad} is not dyadic")));
    }
    let reports: Vec<EnergyReport> = ns
        .par_iter()
        .map(|&n| generate(spec, n).and_then(|seq| energy(&seq, algorithm)))
        .collect::<Result<_>>()?;
    let points: Vec<ScanPoint> = reports
        .iter()
        .map(|r| ScanPoint { n: r.n, e: r.e, log2n: (r.n as f64).log2(), log2e: (r.e as f64).log2() })
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| p.log2n).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.log2e).collect();
    let (slope, intercept, residual) = least_squares(&xs, &ys);
    Ok(ExponentFit { spec: spec.to_string(), points, slope, intercept, residual })
}

/// `r(n, A) = #{(a, b) in A^2 : a - b = n}`, `n != 0`.
pub fn representation_count(seq: &Sequence, n: i128) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidInput("n = 0 has |A| representations; pass a nonzero n".into()));
    }
    let k = n.unsigned_abs();
    let values = seq.values();
    Ok(values.iter().filter(|&&b| b.checked_add(k).is_some_and(|a| values.binary_search(&a).is_ok())).count() as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyUpperBound {
    #[serde(rename = "E")]
    pub e: u128,
    /// `max_n r(n, A)` including `n = 0`, i.e. `|A|`.
    pub max_rep: u64,
    pub max_rep_nonzero: u64,
    /// `E <= |A|^2 max_n r(n, A)`.
    pub displayed: crate::report::BoundCheckReport,
    /// Same with the maximum over `n != 0`.
    pub nonzero: crate::report::BoundCheckReport,
}

pub fn energy_upper_bound_check(seq: &Sequence) -> Result<EnergyUpperBound> {
    let profile = autocorrelation(seq)?;
    let e = profile.energy();
    let n = seq.len() as u128;
    let max_nz = profile.max_nonzero();
    let max_all = (n as u64).max(max_nz);
    let check = |m: u64| crate::report::BoundCheckReport::new(e as f64, (n * n * m as u128) as f64, 1.0);
    Ok(EnergyUpperBound { e, max_rep: max_all, max_rep_nonzero: max_nz, displayed: check(max_all), nonzero: check(max_nz) })
}

/// Number of positive divisors by trial division.
pub fn divisor_count(n: u64) -> u64 {
    assert!(n > 0, "divisor_count needs a positive integer");
    let mut count = 0;
    let mut d = 1u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            count += if d * d == n { 1 } else { 2 };
        }
        d += 1;
    }
    count
}

/// Number of `(n1, n2, x1, y1, x2, y2)` with `1 <= |n_i| <= m`,
/// `x_i != y_i` and `n1 (a(x1) - a(y1)) = n2 (a(x2) - a(y2))`.
pub fn rz_solution_count(seq: &Sequence, m: u64, cap: u128) -> Result<u128> {
    if m == 0 {
        return Err(Error::InvalidInput("M must be positive".into()));
    }
    let values = seq.values();
    let n = values.len() as u128;
    let products = n * n.saturating_sub(1) / 2 * m as u128;
    if products > cap {
        return Err(Error::CapExceeded { what: "N(N-1)/2 * M", value: products, cap });
    }
    let mut buf: Vec<u128> = Vec::with_capacity(products as usize);
    for (i, &a) in values.iter().enumerate() {
        for &b in &values[i + 1..] {
            let v = b - a;
            for mult in 1..=m as u128 {
                buf.push(v.checked_mul(mult).ok_or_else(|| Error::InvalidInput("product overflows 128 bits".into()))?);
            }
        }
    }
    buf.sort_unstable();
    // each positive product w arises from (pair, n > 0, +v) and (pair, n < 0, -v);
    // the negative products mirror the positive ones
    let mut sum_sq: u128 = 0;
    let mut start = 0;
    while start < buf.len() {
        let mut end = start + 1;
        while end < buf.len() && buf[end] == buf[start] {
            end += 1;
        }
        sum_sq += ((end - start) as u128).pow(2);
        start = end;
    }
    Ok(8 * sum_sq)
}
