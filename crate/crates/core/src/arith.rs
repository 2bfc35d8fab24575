//! Exact arithmetic on the unit circle.
//!
//! A dilation parameter is either a `B`-bit binary fraction `value / 2^B`
//! or a reduced rational `p / q`. Fractional parts `<alpha * a>` are computed
//! exactly in the same representation, so every later comparison (circle
//! distance against a threshold, gap equality) is decided without rounding.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Default number of fractional bits for fixed-point dilations.
pub const DEFAULT_BITS: u32 = 192;

/// Stein's binary GCD.
pub fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    if a == 0 {
        return b;
    }
    if b == 0 {
        return a;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == 0 {
            return a << shift;
        }
    }
}

pub fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    if a == 0 {
        return b;
    }
    if b == 0 {
        return a;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == 0 {
            return a << shift;
        }
    }
}

/// A nonnegative reduced fraction `num / den` with `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Parse("zero denominator".into()));
        }
        let g = gcd_u64(num, den).max(1);
        Ok(Ratio { num: num / g, den: den / g })
    }

    pub fn integer(n: u64) -> Self {
        Ratio { num: n, den: 1 }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl std::str::FromStr for Ratio {
    type Err = Error;

    /// Accepts `p/q`, an integer, or an exact decimal such as `1.25`.
    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some((p, q)) = t.split_once('/') {
            let p: u64 = p.trim().parse().map_err(|_| Error::Parse(format!("bad ratio `{t}`")))?;
            let q: u64 = q.trim().parse().map_err(|_| Error::Parse(format!("bad ratio `{t}`")))?;
            return Ratio::new(p, q);
        }
        let (int_part, frac_part) = match t.split_once('.') {
            Some((i, f)) => (i, f),
            None => (t, ""),
        };
        let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty()) || !all_digits(int_part) || !all_digits(frac_part) {
            return Err(Error::Parse(format!("bad ratio `{t}`")));
        }
        if frac_part.len() > 18 {
            return Err(Error::Parse(format!("too many decimal places in `{t}`")));
        }
        let den = 10u64.pow(frac_part.len() as u32);
        let int: u64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| Error::Parse(format!("bad ratio `{t}`")))? };
        let frac: u64 = if frac_part.is_empty() { 0 } else { frac_part.parse().unwrap() };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(|| Error::Parse(format!("ratio `{t}` overflows")))?;
        Ratio::new(num, den)
    }
}

/// A `B`-bit binary fraction in `[0, 1)`, `B` a multiple of 64.
///
/// Limbs are little-endian. Arithmetic wraps modulo `2^B`, which is exactly
/// arithmetic modulo 1 on the fractions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FixedFrac {
    limbs: Vec<u64>,
}

impl FixedFrac {
    pub fn zero(bits: u32) -> Self {
        assert!(bits >= 64 && bits.is_multiple_of(64), "bit width must be a positive multiple of 64");
        FixedFrac { limbs: vec![0; (bits / 64) as usize] }
    }

    pub fn from_limbs(limbs: Vec<u64>) -> Self {
        assert!(!limbs.is_empty());
        FixedFrac { limbs }
    }

    /// `value mod 2^bits`.
    pub fn from_biguint(value: &BigUint, bits: u32) -> Self {
        let mut out = Self::zero(bits);
        for (slot, digit) in out.limbs.iter_mut().zip(value.iter_u64_digits()) {
            *slot = digit;
        }
        out
    }

    /// Half of the circle, `2^(B-1)`.
    pub fn half(bits: u32) -> Self {
        let mut out = Self::zero(bits);
        *out.limbs.last_mut().unwrap() = 1 << 63;
        out
    }

    pub fn bits(&self) -> u32 {
        self.limbs.len() as u32 * 64
    }

    pub fn limbs(&self) -> &[u64] {
        &self.limbs
    }

    pub fn to_biguint(&self) -> BigUint {
        let mut bytes = Vec::with_capacity(self.limbs.len() * 8);
        for l in &self.limbs {
            bytes.extend_from_slice(&l.to_le_bytes());
        }
        BigUint::from_bytes_le(&bytes)
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    /// Most significant 64 bits.
    pub fn top_u64(&self) -> u64 {
        *self.limbs.last().unwrap()
    }

    pub fn to_f64(&self) -> f64 {
        let n = self.limbs.len();
        let hi = self.limbs[n - 1] as f64;
        let lo = if n >= 2 { self.limbs[n - 2] as f64 } else { 0.0 };
        (hi + lo / 18446744073709551616.0) / 18446744073709551616.0
    }

    /// Low `B` bits of `self * a`, i.e. the fractional part of `a * x`.
    pub fn mul_u128(&self, a: u128) -> FixedFrac {
        let n = self.limbs.len();
        let mut out = vec![0u64; n];
        let parts = [a as u64, (a >> 64) as u64];
        for (shift, &m) in parts.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let mut carry: u128 = 0;
            for i in 0..n - shift {
                let cur = out[i + shift] as u128 + (self.limbs[i] as u128) * (m as u128) + carry;
                out[i + shift] = cur as u64;
                carry = cur >> 64;
            }
        }
        FixedFrac { limbs: out }
    }

    pub fn wrapping_add(&self, other: &FixedFrac) -> FixedFrac {
        debug_assert_eq!(self.limbs.len(), other.limbs.len());
        let mut out = vec![0u64; self.limbs.len()];
        let mut carry = false;
        for i in 0..out.len() {
            let (s1, c1) = self.limbs[i].overflowing_add(other.limbs[i]);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            out[i] = s2;
            carry = c1 || c2;
        }
        FixedFrac { limbs: out }
    }

    pub fn wrapping_sub(&self, other: &FixedFrac) -> FixedFrac {
        debug_assert_eq!(self.limbs.len(), other.limbs.len());
        let mut out = vec![0u64; self.limbs.len()];
        let mut borrow = false;
        for i in 0..out.len() {
            let (d1, b1) = self.limbs[i].overflowing_sub(other.limbs[i]);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            out[i] = d2;
            borrow = b1 || b2;
        }
        FixedFrac { limbs: out }
    }

    pub fn wrapping_neg(&self) -> FixedFrac {
        FixedFrac::zero(self.bits()).wrapping_sub(self)
    }

    /// `0x`-prefixed, zero-padded, most significant digit first.
    pub fn to_hex(&self) -> String {
        let mut s = String::from("0x");
        for l in self.limbs.iter().rev() {
            s.push_str(&format!("{l:016x}"));
        }
        s
    }
}

impl Ord for FixedFrac {
    fn cmp(&self, other: &Self) -> Ordering {
        debug_assert_eq!(self.limbs.len(), other.limbs.len());
        for (a, b) in self.limbs.iter().rev().zip(other.limbs.iter().rev()) {
            match a.cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for FixedFrac {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The dilation parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Alpha {
    FixedPoint(FixedFrac),
    /// `p / q` with `0 <= p < q` and `gcd(p, q) = 1`.
    Rational { p: u64, q: u64 },
}

impl Alpha {
    /// Reduces `p / q` modulo 1 and to lowest terms.
    pub fn rational(p: i128, q: u64) -> Result<Alpha> {
        if q == 0 {
            return Err(Error::Parse("alpha denominator must be positive".into()));
        }
        let p = p.rem_euclid(q as i128) as u64;
        let g = gcd_u64(p, q);
        Ok(Alpha::Rational { p: p / g, q: q / g })
    }

    pub fn fixed(value: FixedFrac) -> Alpha {
        Alpha::FixedPoint(value)
    }

    /// `B` uniform bits from a ChaCha stream keyed by `seed`.
    pub fn random(seed: u64, bits: u32) -> Alpha {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Alpha::random_from(&mut rng, bits)
    }

    pub fn random_from<R: Rng + ?Sized>(rng: &mut R, bits: u32) -> Alpha {
        let mut v = FixedFrac::zero(bits);
        for l in v.limbs.iter_mut() {
            *l = rng.random();
        }
        Alpha::FixedPoint(v)
    }

    /// Canonical dump: hex bits for fixed point, `p/q` for rationals.
    pub fn canonical(&self) -> String {
        match self {
            Alpha::FixedPoint(v) => v.to_hex(),
            Alpha::Rational { p, q } => format!("{p}/{q}"),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Alpha::FixedPoint(v) => v.to_f64(),
            Alpha::Rational { p, q } => *p as f64 / *q as f64,
        }
    }
}

/// A point of `[0, 1)` in the same representation as the `Alpha` it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum UnitPoint {
    Fixed(FixedFrac),
    /// `num / den`, `0 <= num < den`; not necessarily reduced, so that points
    /// from one rational dilation share a denominator.
    Rational { num: u64, den: u64 },
}

impl UnitPoint {
    pub fn rational(num: u64, den: u64) -> Result<UnitPoint> {
        if den == 0 || num >= den {
            return Err(Error::InvalidInput(format!("{num}/{den} is not in [0,1)")));
        }
        Ok(UnitPoint::Rational { num, den })
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            UnitPoint::Fixed(v) => v.to_f64(),
            UnitPoint::Rational { num, den } => *num as f64 / *den as f64,
        }
    }
}

/// `<alpha * a>`, exactly.
pub fn frac_mul(alpha: &Alpha, a: u128) -> UnitPoint {
    match alpha {
        Alpha::FixedPoint(v) => UnitPoint::Fixed(v.mul_u128(a)),
        Alpha::Rational { p, q } => {
            let r = ((a % *q as u128) * *p as u128 % *q as u128) as u64;
            UnitPoint::Rational { num: r, den: *q }
        }
    }
}

/// Distance to the nearest integer of `x - y`, in the shared representation.
pub fn circle_dist(x: &UnitPoint, y: &UnitPoint) -> Result<UnitPoint> {
    match (x, y) {
        (UnitPoint::Fixed(a), UnitPoint::Fixed(b)) if a.bits() == b.bits() => {
            let d = a.wrapping_sub(b);
            let e = d.wrapping_neg();
            Ok(UnitPoint::Fixed(if d <= e { d } else { e }))
        }
        (UnitPoint::Rational { num: a, den: q }, UnitPoint::Rational { num: b, den: q2 }) if q == q2 => {
            let d = if a >= b { a - b } else { q - (b - a) };
            let d = d % q;
            Ok(UnitPoint::Rational { num: d.min(q - d), den: *q })
        }
        _ => Err(Error::MixedRepresentation),
    }
}

/// A parsed dilation together with the text it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphaSpec {
    pub text: String,
    pub alpha: Alpha,
    /// The decimal literal needed more than `B` bits and was truncated.
    pub truncated: bool,
}

/// Parses `p/q`, a decimal literal, or `random:<seed>`.
///
/// Decimals keep only their fractional part and are truncated (never
/// rounded) to `bits` bits.
pub fn parse_alpha(text: &str, bits: u32) -> Result<AlphaSpec> {
    if bits < 64 || !bits.is_multiple_of(64) {
        return Err(Error::InvalidInput(format!("precision {bits} must be a multiple of 64 and at least 64")));
    }
    let t = text.trim();
    let bad = || Error::Parse(format!("malformed alpha `{t}`"));
    let (alpha, truncated) = if let Some(seed) = t.strip_prefix("random:") {
        let seed: u64 = seed.parse().map_err(|_| bad())?;
        (Alpha::random(seed, bits), false)
    } else if let Some((p, q)) = t.split_once('/') {
        let p: i128 = p.trim().parse().map_err(|_| bad())?;
        let q: u64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(Error::Parse("alpha denominator is zero".into()));
        }
        (Alpha::rational(p, q)?, false)
    } else {
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty()) || !digits(int_part) || !digits(frac_part) {
            return Err(bad());
        }
        let scale = BigUint::from(10u32).pow(frac_part.len() as u32);
        let mut frac = if frac_part.is_empty() { BigUint::zero() } else { frac_part.parse::<BigUint>().map_err(|_| bad())? };
        if neg && !frac.is_zero() {
            frac = &scale - frac;
        }
        let shifted = frac << bits as usize;
        let value = &shifted / &scale;
        let truncated = !(shifted % &scale).is_zero();
        (Alpha::FixedPoint(FixedFrac::from_biguint(&value, bits)), truncated)
    };
    Ok(AlphaSpec { text: t.to_string(), alpha, truncated })
}

/// `2^bits` as a big integer.
pub fn pow2(bits: u32) -> BigUint {
    BigUint::one() << bits as usize
}

/// Converts a small big integer, failing loudly if it does not fit.
pub fn biguint_to_u64(v: &BigUint) -> Option<u64> {
    v.to_u64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rat(num: u64, den: u64) -> UnitPoint {
        UnitPoint::rational(num, den).unwrap()
    }

    #[test]
    fn frac_mul_rational() {
        let a = Alpha::rational(1, 3).unwrap();
        assert_eq!(frac_mul(&a, 7), rat(1, 3));
        let a = Alpha::rational(3, 7).unwrap();
        assert_eq!(frac_mul(&a, 5), rat(1, 7));
    }

    #[test]
    fn frac_mul_fixed_half_times_two() {
        for bits in [64, 128, 192, 256] {
            let a = Alpha::FixedPoint(FixedFrac::half(bits));
            assert_eq!(frac_mul(&a, 2), UnitPoint::Fixed(FixedFrac::zero(bits)));
        }
    }

    #[test]
    fn frac_mul_fixed_matches_bigint() {
        let a = Alpha::random(11, 192);
        let Alpha::FixedPoint(v) = &a else { unreachable!() };
        for m in [1u128, 3, 1 << 70, (1u128 << 125) + 12345, u128::MAX >> 2] {
            let expect = (v.to_biguint() * BigUint::from(m)) % pow2(192);
            let UnitPoint::Fixed(got) = frac_mul(&a, m) else { unreachable!() };
            assert_eq!(got.to_biguint(), expect, "a = {m}");
        }
    }

    #[test]
    fn circle_dist_examples() {
        assert_eq!(circle_dist(&rat(7, 10), &rat(0, 10)).unwrap(), rat(3, 10));
        assert_eq!(circle_dist(&rat(1, 8), &rat(7, 8)).unwrap(), rat(2, 8));
        assert_eq!(circle_dist(&rat(4, 9), &rat(4, 9)).unwrap(), rat(0, 9));
        let x = frac_mul(&Alpha::random(1, 128), 5);
        assert_eq!(circle_dist(&x, &x).unwrap(), UnitPoint::Fixed(FixedFrac::zero(128)));
    }

    #[test]
    fn circle_dist_rejects_mixed() {
        assert_eq!(circle_dist(&rat(1, 3), &rat(1, 4)), Err(Error::MixedRepresentation));
        let f = UnitPoint::Fixed(FixedFrac::zero(64));
        assert_eq!(circle_dist(&rat(1, 3), &f), Err(Error::MixedRepresentation));
        let g = UnitPoint::Fixed(FixedFrac::zero(128));
        assert_eq!(circle_dist(&g, &f), Err(Error::MixedRepresentation));
    }

    #[test]
    fn parse_alpha_forms() {
        let r = parse_alpha("1/3", 192).unwrap();
        assert_eq!(r.alpha, Alpha::Rational { p: 1, q: 3 });
        assert!(!r.truncated);

        let h = parse_alpha("0.5", 64).unwrap();
        assert_eq!(h.alpha, Alpha::FixedPoint(FixedFrac::from_limbs(vec![1 << 63])));
        assert!(!h.truncated);

        let a = parse_alpha("random:42", 192).unwrap();
        let b = parse_alpha("random:42", 192).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.alpha, parse_alpha("random:43", 192).unwrap().alpha);
    }

    #[test]
    fn parse_alpha_truncation_flag() {
        let t = parse_alpha("0.1", 64).unwrap();
        assert!(t.truncated);
        // floor(2^64 / 10)
        assert_eq!(t.alpha, Alpha::FixedPoint(FixedFrac::from_limbs(vec![1844674407370955161])));
        assert!(!parse_alpha("3.25", 64).unwrap().truncated);
        // negative decimals wrap: <-0.25> = 0.75
        let n = parse_alpha("-0.25", 64).unwrap();
        assert_eq!(n.alpha, Alpha::FixedPoint(FixedFrac::from_limbs(vec![3 << 62])));
    }

    #[test]
    fn parse_alpha_errors() {
        assert!(parse_alpha("1/0", 192).is_err());
        assert!(parse_alpha("abc", 192).is_err());
        assert!(parse_alpha("random:x", 192).is_err());
        assert!(parse_alpha("0.5", 100).is_err());
        assert!(parse_alpha("", 192).is_err());
    }

    #[test]
    fn rational_alpha_is_reduced() {
        assert_eq!(Alpha::rational(6, 9).unwrap(), Alpha::Rational { p: 2, q: 3 });
        assert_eq!(Alpha::rational(-1, 3).unwrap(), Alpha::Rational { p: 2, q: 3 });
        assert_eq!(Alpha::rational(4, 2).unwrap(), Alpha::Rational { p: 0, q: 1 });
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!("1/2".parse::<Ratio>().unwrap(), Ratio::new(1, 2).unwrap());
        assert_eq!("0.5".parse::<Ratio>().unwrap(), Ratio::new(1, 2).unwrap());
        assert_eq!("1.3".parse::<Ratio>().unwrap(), Ratio::new(13, 10).unwrap());
        assert_eq!("3".parse::<Ratio>().unwrap(), Ratio::integer(3));
        assert!("1/0".parse::<Ratio>().is_err());
        assert!("x".parse::<Ratio>().is_err());
    }

    #[test]
    fn binary_gcd() {
        assert_eq!(gcd_u64(12, 18), 6);
        assert_eq!(gcd_u64(0, 5), 5);
        assert_eq!(gcd_u64(17, 5), 1);
        assert_eq!(gcd_u128(1 << 100, 1 << 90), 1 << 90);
    }

    proptest! {
        #[test]
        fn rational_period(q in 1u64..=50, p_raw in 0u64..1000) {
            let alpha = Alpha::rational(p_raw as i128, q).unwrap();
            for a in 1..=3 * q as u128 {
                prop_assert_eq!(frac_mul(&alpha, a + q as u128), frac_mul(&alpha, a));
            }
        }

        #[test]
        fn circle_dist_is_metric(seed in any::<u64>(), a in 1u128..1 << 100, b in 1u128..1 << 100, c in 1u128..1 << 100) {
            let alpha = Alpha::random(seed, 128);
            let (x, y, z) = (frac_mul(&alpha, a), frac_mul(&alpha, b), frac_mul(&alpha, c));
            let (UnitPoint::Fixed(dxy), UnitPoint::Fixed(dyx)) = (circle_dist(&x, &y).unwrap(), circle_dist(&y, &x).unwrap()) else { unreachable!() };
            let UnitPoint::Fixed(dyz) = circle_dist(&y, &z).unwrap() else { unreachable!() };
            let UnitPoint::Fixed(dxz) = circle_dist(&x, &z).unwrap() else { unreachable!() };
            prop_assert_eq!(&dxy, &dyx);
            prop_assert!(dxy <= FixedFrac::half(128));
            prop_assert!(dxz.to_biguint() <= dxy.to_biguint() + dyz.to_biguint());
        }

        #[test]
        fn rational_circle_dist_is_metric(q in 2u64..1000, a in 0u64..1000, b in 0u64..1000, c in 0u64..1000) {
            let (x, y, z) = (rat(a % q, q), rat(b % q, q), rat(c % q, q));
            let d = |u: &UnitPoint, v: &UnitPoint| match circle_dist(u, v).unwrap() {
                UnitPoint::Rational { num, .. } => num,
                _ => unreachable!(),
            };
            prop_assert_eq!(d(&x, &y), d(&y, &x));
            prop_assert!(2 * d(&x, &y) <= q);
            prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z));
        }

        #[test]
        fn precision_consistency(seed in any::<u64>(), a in 1u128..1 << 60) {
            let Alpha::FixedPoint(wide) = Alpha::random(seed, 256) else { unreachable!() };
            // truncate the same real number to 128 bits; the discarded low
            // half contributes less than 2^-4 units, so at most one carry
            let narrow = FixedFrac::from_limbs(wide.limbs()[2..].to_vec());
            let w = wide.mul_u128(a);
            let n = narrow.mul_u128(a);
            prop_assert!(w.top_u64().wrapping_sub(n.top_u64()) <= 1);
        }
    }
}
