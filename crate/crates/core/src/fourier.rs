//! Fourier coefficients of the periodized interval indicator and GCD sums.
//!
//! `c_n = sin(2 pi n s / N) / (pi n)` are the coefficients of the indicator
//! of `[-s/N, s/N]` on the circle. Everything here is floating point; the
//! sine arguments are reduced exactly in integers first so that `c_n`
//! vanishes exactly whenever `2ns/N` is an integer.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::arith::{gcd_u128, gcd_u64, Ratio};
use crate::error::{Error, Result};
use crate::report::BoundCheckReport;

/// Largest period of `h -> |c_{n1} c_{n2}|` summed over the full range.
pub const PERIODIC_LIMIT: u128 = 1 << 28;
/// Largest number of `h` terms in one dyadic shell.
const SHELL_MAX_TERMS: u128 = 1 << 32;
/// Relative slack allowed when comparing a float against its analytic bound.
pub const FLOAT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FourierCoefficients {
    pub s: Ratio,
    pub n: u64,
}

impl FourierCoefficients {
    pub fn new(s: Ratio, n: u64) -> Result<Self> {
        if s.is_zero() || n == 0 {
            return Err(Error::InvalidInput("need s > 0 and N >= 1".into()));
        }
        Ok(FourierCoefficients { s, n })
    }

    /// `2s/N`, the mean of the indicator.
    pub fn c0(&self) -> f64 {
        2.0 * self.s.to_f64() / self.n as f64
    }

    /// `s/N` as the reduced pair `(num, den)`.
    fn width(&self) -> (u128, u128) {
        let num = self.s.num() as u128;
        let den = self.s.den() as u128 * self.n as u128;
        let g = gcd_u128(num, den);
        (num / g, den / g)
    }

    /// `2s/N` as the reduced pair `(num, den)`.
    fn double_width(&self) -> (u128, u128) {
        let (num, den) = self.width();
        let g = gcd_u128(2 * num, den);
        (2 * num / g, den / g)
    }

    /// `c_k`; `c_0 = 2s/N`.
    pub fn coefficient(&self, k: i64) -> f64 {
        if k == 0 {
            return self.c0();
        }
        let (num, den) = self.width();
        let r = (k.unsigned_abs() as u128 % den) * (num % den) % den;
        signed_sin_two_pi(r, den) / (PI * k.unsigned_abs() as f64)
    }

    pub fn bound(&self, k: i64) -> f64 {
        if k == 0 {
            self.c0()
        } else {
            self.c0().min(1.0 / k.unsigned_abs() as f64)
        }
    }
}

/// `sin(2 pi r / d)` for `0 <= r < d`, exactly zero at the half periods.
fn signed_sin_two_pi(r: u128, d: u128) -> f64 {
    if r == 0 || 2 * r == d {
        return 0.0;
    }
    if 2 * r > d {
        return -signed_sin_two_pi(d - r, d);
    }
    // 0 < r < d/2; fold around the peak for accuracy near pi
    let folded = if 4 * r > d { d - 2 * r } else { 2 * r };
    (PI * folded as f64 / d as f64).sin()
}

/// `|sin(pi r / d)|` for integer `r`.
fn abs_sin_pi(r: u128, d: u128) -> f64 {
    let r = r % d;
    if r == 0 {
        return 0.0;
    }
    let r = r.min(d - r);
    (PI * r as f64 / d as f64).sin()
}

/// Trigamma `psi_1(x) = sum_{t >= 0} 1/(x + t)^2` for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    assert!(x > 0.0, "trigamma needs a positive argument");
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    // asymptotic series with Bernoulli numbers
    let tail = 1.0 / x + z / 2.0 + (z / x) * (1.0 / 6.0 - z * (1.0 / 30.0 - z * (1.0 / 42.0 - z * (1.0 / 30.0 - z * 5.0 / 66.0))));
    acc + tail
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcdSumInput {
    m: Vec<u64>,
    b: Vec<f64>,
}

impl GcdSumInput {
    pub fn new(m: Vec<u64>, b: Vec<f64>) -> Result<Self> {
        if m.is_empty() || m.len() != b.len() {
            return Err(Error::InvalidInput("m and b must be nonempty and of equal length".into()));
        }
        if m.contains(&0) {
            return Err(Error::InvalidInput("m must be positive".into()));
        }
        let mut seen = std::collections::HashMap::new();
        for (i, &v) in m.iter().enumerate() {
            if let Some(&j) = seen.get(&v) {
                return Err(Error::Duplicate { first: j + 1, second: i + 1 });
            }
            seen.insert(v, i);
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("b must be finite".into()));
        }
        let norm: f64 = b.iter().map(|x| x * x).sum();
        if norm > 1.0 + FLOAT_SLACK {
            return Err(Error::InvalidInput(format!("sum of b^2 is {norm} > 1")));
        }
        Ok(GcdSumInput { m, b })
    }

    /// `m` with the uniform weights `1/sqrt(M)`.
    pub fn uniform(m: Vec<u64>) -> Result<Self> {
        let w = 1.0 / (m.len() as f64).sqrt();
        let b = vec![w; m.len()];
        GcdSumInput::new(m, b)
    }

    pub fn m(&self) -> &[u64] {
        &self.m
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// `sum_{k, l} b_k b_l gcd(m_k, m_l) / sqrt(m_k m_l)`.
pub fn gcd_sum(input: &GcdSumInput) -> f64 {
    let m = &input.m;
    let b = &input.b;
    let roots: Vec<f64> = m.iter().map(|&x| (x as f64).sqrt()).collect();
    let rows: Vec<f64> = (0..m.len())
        .into_par_iter()
        .map(|k| {
            let mut row = b[k] * b[k];
            for l in k + 1..m.len() {
                row += 2.0 * b[k] * b[l] * gcd_u64(m[k], m[l]) as f64 / (roots[k] * roots[l]);
            }
            row
        })
        .collect();
    rows.iter().sum()
}

/// `exp(kappa sqrt(log M log log log M) / sqrt(log log M))`.
pub fn gcd_exponential_bound(m: usize, kappa: f64) -> f64 {
    let l1 = (m as f64).ln();
    let l2 = l1.ln();
    let l3 = l2.ln();
    (kappa * (l1 * l3).sqrt() / l2.sqrt()).exp()
}

pub fn gcd_sum_bound_check(input: &GcdSumInput, kappa: f64, pass_constant: f64) -> Result<BoundCheckReport> {
    if input.len() < 20 {
        return Err(Error::InvalidInput("the exponential bound needs M >= 20".into()));
    }
    if kappa < 0.0 {
        return Err(Error::InvalidInput("kappa must be nonnegative".into()));
    }
    Ok(BoundCheckReport::new(gcd_sum(input), gcd_exponential_bound(input.len(), kappa), pass_constant))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairRange {
    /// All `n1, n2 != 0`.
    Full,
    /// `(2^m - 1) N < |n1|, |n2| <= (2^(m+1) - 1) N`.
    Dyadic(u32),
}

/// `(|w|/g, |v|/g)`, the multipliers of `h` in `|n1|` and `|n2|`.
fn multipliers(v: i64, w: i64) -> Result<(u128, u128, u64)> {
    if v == 0 || w == 0 {
        return Err(Error::InvalidInput("v and w must be nonzero".into()));
    }
    let (av, aw) = (v.unsigned_abs(), w.unsigned_abs());
    let g = gcd_u64(av, aw);
    Ok(((aw / g) as u128, (av / g) as u128, g))
}

/// `sum |c_{n1} c_{n2}|` over the nonzero solutions of `n1 v = n2 w`.
///
/// The solutions are `n1 = h w/g`, `n2 = h v/g`. Over the full range the
/// summand `|sin(..)||sin(..)|` is periodic in `h` with the period `P` of
/// `2s/N`, and `sum_h f(h)/h^2 = P^-2 sum_{j <= P} f(j) psi_1(j/P)` is exact
/// up to rounding. Periods above `PERIODIC_LIMIT` are refused.
pub fn coefficient_pair_sum(v: i64, w: i64, fc: &FourierCoefficients, range: PairRange) -> Result<f64> {
    let (a, b, _) = multipliers(v, w)?;
    let (num, den) = fc.double_width();
    let term = |h: u128| abs_sin_pi(h % den * a % den * num, den) * abs_sin_pi(h % den * b % den * num, den);
    let scale = 2.0 / (PI * PI * a as f64 * b as f64);
    match range {
        PairRange::Dyadic(m) => {
            if m > 40 {
                return Err(Error::InvalidInput("dyadic index m must be at most 40".into()));
            }
            let n = fc.n as u128;
            let lo_edge = ((1u128 << m) - 1) * n;
            let hi_edge = ((1u128 << (m + 1)) - 1) * n;
            let lo = (lo_edge / a + 1).max(lo_edge / b + 1);
            let hi = (hi_edge / a).min(hi_edge / b);
            if hi.saturating_sub(lo) > SHELL_MAX_TERMS {
                return Err(Error::CapExceeded { what: "dyadic h-range", value: hi - lo, cap: SHELL_MAX_TERMS });
            }
            if hi < lo {
                return Ok(0.0);
            }
            let sum: f64 = (lo..=hi).map(|h| term(h) / (h as f64).powi(2)).sum();
            Ok(scale * sum)
        }
        PairRange::Full => {
            if den > PERIODIC_LIMIT {
                return Err(Error::CapExceeded { what: "period of 2s/N", value: den, cap: PERIODIC_LIMIT });
            }
            let p = den as f64;
            // fixed-size blocks keep the float summation order independent of the thread count
            let sum: f64 = (0..den.div_ceil(1 << 16))
                .into_par_iter()
                .map(|blk| {
                    let start = blk * (1 << 16) + 1;
                    (start..=(start + (1 << 16) - 1).min(den)).map(|j| term(j) * trigamma(j as f64 / p)).sum::<f64>()
                })
                .collect::<Vec<f64>>()
                .iter()
                .sum();
            Ok(scale * sum / (p * p))
        }
    }
}

fn check_n(fc: &FourierCoefficients) -> Result<()> {
    if fc.n < 3 {
        return Err(Error::InvalidInput("need N >= 3 so that log N > 1".into()));
    }
    Ok(())
}

/// `lhs = coefficient_pair_sum` (full range), `rhs = log N (s/N) gcd/sqrt|vw|`.
pub fn cnto_gcd_check(v: i64, w: i64, fc: &FourierCoefficients, pass_constant: f64) -> Result<BoundCheckReport> {
    check_n(fc)?;
    let (_, _, g) = multipliers(v, w)?;
    let lhs = coefficient_pair_sum(v, w, fc, PairRange::Full)?;
    let vw = (v.unsigned_abs() as f64) * (w.unsigned_abs() as f64);
    let rhs = (fc.n as f64).ln() * fc.s.to_f64() / fc.n as f64 * g as f64 / vw.sqrt();
    Ok(BoundCheckReport::new(lhs, rhs, pass_constant))
}

/// `lhs` restricted to the `m`-th dyadic shell, `rhs = 2^-m gcd/sqrt|vw|`.
pub fn cnto_gcd_dyadic_check(v: i64, w: i64, fc: &FourierCoefficients, m: u32, pass_constant: f64) -> Result<BoundCheckReport> {
    check_n(fc)?;
    if m == 0 {
        return Err(Error::InvalidInput("dyadic index m must be at least 1".into()));
    }
    let (_, _, g) = multipliers(v, w)?;
    let lhs = coefficient_pair_sum(v, w, fc, PairRange::Dyadic(m))?;
    let vw = (v.unsigned_abs() as f64) * (w.unsigned_abs() as f64);
    let rhs = 0.5f64.powi(m as i32) * g as f64 / vw.sqrt();
    Ok(BoundCheckReport::new(lhs, rhs, pass_constant))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeCheck {
    /// 1: `|h| <= T1`, 2: `T1 < |h| <= T2`, 3: `|h| > T2`, with
    /// `T1 = N g/(s max|v,w|)` and `T2 = N g/(s min|v,w|)`.
    pub regime: u8,
    pub n1: i128,
    pub n2: i128,
    #[serde(flatten)]
    pub report: BoundCheckReport,
}

/// Checks `|c_{n1} c_{n2}|` against the bound of the regime `h` falls in.
pub fn regime_bounds_check(v: i64, w: i64, h: i64, fc: &FourierCoefficients) -> Result<RegimeCheck> {
    if h == 0 {
        return Err(Error::InvalidInput("h must be nonzero".into()));
    }
    let (a, b, g) = multipliers(v, w)?;
    let n1 = h as i128 * (w / g as i64) as i128;
    let n2 = h as i128 * (v / g as i64) as i128;
    let ah = h.unsigned_abs() as u128;
    let (hi, lo) = (v.unsigned_abs().max(w.unsigned_abs()) as u128, v.unsigned_abs().min(w.unsigned_abs()) as u128);
    // |h| s max <= N g, in integers: |h| s_num max <= N g s_den
    let scale = fc.n as u128 * g as u128 * fc.s.den() as u128;
    let sn = fc.s.num() as u128;
    let regime = if ah * sn * hi <= scale {
        1
    } else if ah * sn * lo <= scale {
        2
    } else {
        3
    };
    let (k1, k2) = match (i64::try_from(n1), i64::try_from(n2)) {
        (Ok(k1), Ok(k2)) => (k1, k2),
        _ => return Err(Error::InvalidInput("h w/g or h v/g exceeds 64 bits".into())),
    };
    let lhs = (fc.coefficient(k1) * fc.coefficient(k2)).abs();
    let two_s_n = fc.c0();
    let hf = ah as f64;
    let rhs = match regime {
        1 => two_s_n * two_s_n,
        2 => two_s_n * g as f64 / (hf * hi as f64),
        _ => 1.0 / (hf * a as f64 * hf * b as f64),
    };
    Ok(RegimeCheck { regime, n1, n2, report: BoundCheckReport::new(lhs, rhs, 1.0 + FLOAT_SLACK) })
}

/// One row of a `(v, w, m)` sweep; `m` is empty for the full range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub v: i64,
    pub w: i64,
    pub m: Option<u32>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Evaluates every `(v, w)` pair at each shell in `ms` (`None` = full range).
pub fn coefficient_sweep(pairs: &[(i64, i64)], ms: &[Option<u32>], fc: &FourierCoefficients) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(i64, i64, Option<u32>)> = pairs.iter().flat_map(|&(v, w)| ms.iter().map(move |&m| (v, w, m))).collect();
    jobs.par_iter()
        .map(|&(v, w, m)| {
            let r = match m {
                None => cnto_gcd_check(v, w, fc, f64::INFINITY)?,
                Some(m) => cnto_gcd_dyadic_check(v, w, fc, m, f64::INFINITY)?,
            };
            Ok(SweepRow { v, w, m, lhs: r.lhs, rhs: r.rhs, ratio: r.ratio })
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in rows {
        wtr.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
