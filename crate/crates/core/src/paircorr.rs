//! Pair correlations and circular gap statistics.
//!
//! `R2([-s, s], theta, N) = (1/N) #{ j != k : ||theta_j - theta_k|| <= s/N }`.
//! Points are kept in their exact representation (integers modulo `2^B` or
//! modulo `q`), the threshold `s/N` becomes the integer `floor(sM/N)` and the
//! count is obtained by sorting plus two monotone cursors.

use num_bigint::BigUint;
use serde::Serialize;

use crate::arith::{frac_mul, AlphaSpec, FixedFrac, Ratio, UnitPoint};
use crate::error::{Error, Result};
use crate::seqgen::Sequence;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCorrelationStat {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(serialize_with = "crate::report::ser_display")]
    pub s: Ratio,
    #[serde(rename = "count")]
    pub ordered_pair_count: u64,
    pub value: f64,
}

/// Points on the circle as integers modulo a common modulus.
pub(crate) enum Residues {
    Fixed { pos: Vec<FixedFrac>, bits: u32 },
    Rational { pos: Vec<u64>, q: u64 },
}

impl Residues {
    pub(crate) fn from_points(points: &[UnitPoint]) -> Result<Residues> {
        match points.first() {
            None => Err(Error::InvalidInput("no points".into())),
            Some(UnitPoint::Fixed(f)) => {
                let bits = f.bits();
                let pos = points
                    .iter()
                    .map(|p| match p {
                        UnitPoint::Fixed(v) if v.bits() == bits => Ok(v.clone()),
                        _ => Err(Error::MixedRepresentation),
                    })
                    .collect::<Result<_>>()?;
                Ok(Residues::Fixed { pos, bits })
            }
            Some(UnitPoint::Rational { den, .. }) => {
                let q = *den;
                let pos = points
                    .iter()
                    .map(|p| match p {
                        UnitPoint::Rational { num, den } if *den == q => Ok(*num),
                        _ => Err(Error::MixedRepresentation),
                    })
                    .collect::<Result<_>>()?;
                Ok(Residues::Rational { pos, q })
            }
        }
    }

    fn len(&self) -> usize {
        match self {
            Residues::Fixed { pos, .. } => pos.len(),
            Residues::Rational { pos, .. } => pos.len(),
        }
    }

    fn modulus(&self) -> BigUint {
        match self {
            Residues::Fixed { bits, .. } => crate::arith::pow2(*bits),
            Residues::Rational { q, .. } => BigUint::from(*q),
        }
    }
}

/// `floor(M * s / n)`: the largest residue distance that is `<= s/n`.
fn threshold(modulus: &BigUint, s: Ratio, n: usize) -> BigUint {
    modulus * BigUint::from(s.num()) / (BigUint::from(s.den()) * BigUint::from(n as u64))
}

/// Number of unordered pairs `i < j` of sorted residues with
/// `p_j - p_i <= t` or `p_j - p_i >= u`. Requires `t < u`.
fn sweep<T: Ord>(p: &[T], t: &T, u: Option<&T>, sub: impl Fn(&T, &T) -> T) -> u64 {
    let n = p.len();
    let mut count = 0u64;
    let mut hi = 0;
    let mut lo = 0;
    for i in 0..n {
        hi = hi.max(i + 1);
        while hi < n && sub(&p[hi], &p[i]) <= *t {
            hi += 1;
        }
        count += (hi - i - 1) as u64;
        if let Some(u) = u {
            lo = lo.max(i + 1);
            while lo < n && sub(&p[lo], &p[i]) < *u {
                lo += 1;
            }
            count += (n - lo) as u64;
        }
    }
    count
}

/// Ordered pairs `j != k` with `||theta_j - theta_k|| <= s/n` where `n` is
/// the number of points.
pub(crate) fn count_close_pairs(res: Residues, s: Ratio) -> Result<u64> {
    let n = res.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two points".into()));
    }
    if s.is_zero() {
        return Err(Error::InvalidInput("s must be positive".into()));
    }
    // 2s <= N keeps the threshold within half the circle
    let lhs = 2 * s.num() as u128;
    let rhs = n as u128 * s.den() as u128;
    if lhs > rhs {
        return Err(Error::InvalidInput(format!("s/N = {s}/{n} exceeds 1/2")));
    }
    if lhs == rhs {
        return Ok((n * (n - 1)) as u64);
    }
    let t = threshold(&res.modulus(), s, n);
    let unordered = match res {
        Residues::Fixed { mut pos, bits } => {
            pos.sort_unstable();
            let t = FixedFrac::from_biguint(&t, bits);
            let u = (!t.is_zero()).then(|| t.wrapping_neg());
            sweep(&pos, &t, u.as_ref(), |a, b| a.wrapping_sub(b))
        }
        Residues::Rational { mut pos, q } => {
            pos.sort_unstable();
            let t: u64 = t.try_into().expect("threshold below modulus");
            let u = (t > 0).then(|| q - t);
            sweep(&pos, &t, u.as_ref(), |a, b| a - b)
        }
    };
    Ok(2 * unordered)
}

/// `R2([-s, s], points, N)` with `N = points.len()`.
pub fn r2(points: &[UnitPoint], s: Ratio) -> Result<PairCorrelationStat> {
    let n = points.len();
    let count = count_close_pairs(Residues::from_points(points)?, s)?;
    Ok(PairCorrelationStat { alpha: None, spec: None, n, s, ordered_pair_count: count, value: count as f64 / n as f64 })
}

/// Fractional parts `<alpha a(x)>` for every term of `seq`.
pub fn dilate(alpha: &crate::arith::Alpha, seq: &Sequence) -> Vec<UnitPoint> {
    seq.values().iter().map(|&a| frac_mul(alpha, a)).collect()
}

/// `R2` of `<alpha a(x)>`, `x <= N`.
pub fn r2_sequence(alpha: &AlphaSpec, seq: &Sequence, s: Ratio) -> Result<PairCorrelationStat> {
    let mut stat = r2(&dilate(&alpha.alpha, seq), s)?;
    stat.alpha = Some(alpha.text.clone());
    stat.spec = Some(seq.spec().to_string());
    Ok(stat)
}

/// Sorted circular neighbour gaps, as numerators over `modulus`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapProfile {
    pub gaps: Vec<BigUint>,
    pub modulus: BigUint,
    pub distinct_gap_count: usize,
}

impl GapProfile {
    pub fn gaps_f64(&self) -> Vec<f64> {
        let m = biguint_f64(&self.modulus);
        self.gaps.iter().map(|g| biguint_f64(g) / m).collect()
    }
}

fn biguint_f64(v: &BigUint) -> f64 {
    use num_traits::ToPrimitive;
    v.to_f64().unwrap_or(f64::INFINITY)
}

pub fn gap_profile(points: &[UnitPoint]) -> Result<GapProfile> {
    let res = Residues::from_points(points)?;
    let modulus = res.modulus();
    let sorted: Vec<BigUint> = match res {
        Residues::Fixed { mut pos, .. } => {
            pos.sort_unstable();
            pos.iter().map(|p| p.to_biguint()).collect()
        }
        Residues::Rational { mut pos, .. } => {
            pos.sort_unstable();
            pos.into_iter().map(BigUint::from).collect()
        }
    };
    let mut gaps: Vec<BigUint> = sorted.windows(2).map(|w| &w[1] - &w[0]).collect();
    gaps.push(&modulus - sorted.last().unwrap() + sorted.first().unwrap());
    gaps.sort_unstable();
    let mut distinct = gaps.clone();
    distinct.dedup();
    Ok(GapProfile { distinct_gap_count: distinct.len(), gaps, modulus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{circle_dist, parse_alpha, Alpha};
    use crate::seqgen::{generate, SequenceSpec};
    use proptest::prelude::*;

    fn rats(nums: &[u64], den: u64) -> Vec<UnitPoint> {
        nums.iter().map(|&n| UnitPoint::rational(n, den).unwrap()).collect()
    }

    fn ratio(n: u64, d: u64) -> Ratio {
        Ratio::new(n, d).unwrap()
    }

    /// Direct O(N^2) count from the definition.
    fn brute(points: &[UnitPoint], s: Ratio) -> u64 {
        let n = points.len() as u64;
        let mut c = 0;
        for (j, x) in points.iter().enumerate() {
            for (k, y) in points.iter().enumerate() {
                if j == k {
                    continue;
                }
                let inside = match circle_dist(x, y).unwrap() {
                    // d/M <= s/n  <=>  d n s.den <= s.num M
                    UnitPoint::Rational { num, den } => {
                        num as u128 * n as u128 * s.den() as u128 <= s.num() as u128 * den as u128
                    }
                    UnitPoint::Fixed(d) => {
                        d.to_biguint() * BigUint::from(n * s.den()) <= BigUint::from(s.num()) * crate::arith::pow2(d.bits())
                    }
                };
                c += inside as u64;
            }
        }
        c
    }

    #[test]
    fn quarter_points() {
        let st = r2(&rats(&[0, 1, 2, 3], 4), Ratio::integer(1)).unwrap();
        assert_eq!(st.ordered_pair_count, 8);
        assert_eq!(st.value, 2.0);
    }

    #[test]
    fn two_antipodal_points() {
        let st = r2(&rats(&[0, 1], 2), ratio(1, 2)).unwrap();
        assert_eq!(st.value, 0.0);
    }

    #[test]
    fn coincident_points() {
        for n in [2usize, 5, 17] {
            let pts = rats(&vec![3; n], 7);
            assert_eq!(r2(&pts, ratio(1, 3)).unwrap().value, (n - 1) as f64);
        }
    }

    #[test]
    fn half_alpha_on_small_set() {
        let seq = Sequence::from_set(vec![1, 2, 3, 4]).unwrap();
        let alpha = parse_alpha("1/2", 192).unwrap();
        let pts = dilate(&alpha.alpha, &seq);
        let st = r2_sequence(&alpha, &seq, Ratio::integer(1)).unwrap();
        assert_eq!(st.ordered_pair_count, brute(&pts, Ratio::integer(1)));
        // {1/2, 0, 1/2, 0}: only coincident pairs are within 1/4
        assert_eq!(st.ordered_pair_count, 4);
        assert_eq!(st.value, 1.0);
    }

    #[test]
    fn zero_alpha_gives_n_minus_one() {
        let seq = generate(&SequenceSpec::Monomial(2), 30).unwrap();
        let st = r2_sequence(&parse_alpha("0/1", 192).unwrap(), &seq, Ratio::integer(2)).unwrap();
        assert_eq!(st.value, 29.0);
    }

    #[test]
    fn boundary_is_inclusive() {
        // distance exactly s/N = 1/4
        let st = r2(&rats(&[0, 1], 4), ratio(1, 2)).unwrap();
        assert_eq!(st.ordered_pair_count, 2);
        let st = r2(&rats(&[0, 1], 4), ratio(49, 100)).unwrap();
        assert_eq!(st.ordered_pair_count, 0);
    }

    #[test]
    fn threshold_half_counts_everything() {
        let pts = rats(&[0, 1, 2, 5, 9], 10);
        assert_eq!(r2(&pts, ratio(5, 2)).unwrap().ordered_pair_count, 20);
    }

    #[test]
    fn rejections() {
        assert!(r2(&[], Ratio::integer(1)).is_err());
        assert!(r2(&rats(&[0, 1], 4), Ratio::integer(2)).is_err());
        assert!(r2(&rats(&[0, 1], 4), Ratio::integer(0)).is_err());
        let mut mixed = rats(&[0], 4);
        mixed.extend(rats(&[1], 5));
        assert_eq!(r2(&mixed, ratio(1, 2)), Err(Error::MixedRepresentation));
    }

    #[test]
    fn gap_profiles() {
        let g = gap_profile(&rats(&[0, 1, 2, 3], 4)).unwrap();
        assert_eq!(g.distinct_gap_count, 1);
        assert_eq!(g.gaps, vec![BigUint::from(1u32); 4]);
        let g = gap_profile(&rats(&[0, 1], 2)).unwrap();
        assert_eq!(g.gaps_f64(), vec![0.5, 0.5]);
        assert_eq!(g.distinct_gap_count, 1);
        let g = gap_profile(&rats(&[2], 5)).unwrap();
        assert_eq!(g.gaps, vec![BigUint::from(5u32)]);
    }

    #[test]
    fn three_gaps_small() {
        let alpha = Alpha::random(3, 192);
        let seq = generate(&SequenceSpec::ArithmeticProgression { start: 1, step: 1 }, 100).unwrap();
        let g = gap_profile(&dilate(&alpha, &seq)).unwrap();
        assert!(g.distinct_gap_count <= 3);
        let total: BigUint = g.gaps.iter().sum();
        assert_eq!(total, g.modulus);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sweep_matches_brute_force_fixed(seed in any::<u64>(), n in 2usize..300, sn in 1u64..20, sd in 1u64..5) {
            let alpha = Alpha::random(seed, 128);
            let seq = generate(&SequenceSpec::Monomial(2), n).unwrap();
            let s = ratio(sn.min((n as u64 * sd) / 2).max(1), sd);
            let pts = dilate(&alpha, &seq);
            prop_assert_eq!(r2(&pts, s).unwrap().ordered_pair_count, brute(&pts, s));
        }

        #[test]
        fn sweep_matches_brute_force_rational(q in 1u64..60, nums in proptest::collection::vec(0u64..1000, 2..80), sn in 1u64..10) {
            let pts: Vec<UnitPoint> = nums.iter().map(|&v| UnitPoint::rational(v % q, q).unwrap()).collect();
            let s = ratio(sn.min(pts.len() as u64 / 2).max(1), 1);
            prop_assert_eq!(r2(&pts, s).unwrap().ordered_pair_count, brute(&pts, s));
        }

        #[test]
        fn monotone_in_s(seed in any::<u64>(), n in 4usize..200) {
            let pts = dilate(&Alpha::random(seed, 192), &generate(&SequenceSpec::Monomial(3), n).unwrap());
            let mut last = 0;
            for k in 1..=n as u64 {
                let c = r2(&pts, ratio(k, 2)).unwrap().ordered_pair_count;
                prop_assert!(c >= last);
                prop_assert_eq!(c % 2, 0);
                last = c;
            }
        }
    }
}
