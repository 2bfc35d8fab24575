//! Sequence families and the on-disk sequence format.
//!
//! Text grammar for [`SequenceSpec`] (also used in file headers and CLI flags):
//!
//! | text                      | a(x), x = 1..N                                   |
//! |---------------------------|--------------------------------------------------|
//! | `mono:<d>`                | `x^d`                                            |
//! | `poly:<c0>,<c1>,..,<cd>`  | `c0 + c1 x + .. + cd x^d`                        |
//! | `lac:<c>[:<start>]`       | `a(1) = start`, `a(x+1) = max(a(x)+1, ceil(c a(x)))` |
//! | `pow2`                    | `2^x`                                            |
//! | `ps:<beta>:<alpha>`       | `floor(beta x^alpha)`                            |
//! | `convex:triangular`       | `x(x+1)/2`                                       |
//! | `convex:powersum:<d>`     | `1^d + .. + x^d`                                 |
//! | `ap:<start>:<step>`       | `start + (x-1) step`                             |
//! | `file:<path>`             | first N values of a sequence file                |
//! | `set:<v1>,<v2>,..`        | an explicit set (sorted on input)                |
//! | `randset:<N>:<K>:<seed>`  | random subset, see [`crate::bourgain`]           |

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::arith::Ratio;
use crate::error::{Error, Result};

/// Exclusive upper bound on sequence values; keeps `frac_mul` at 192 bits
/// with at least 64 meaningful output bits.
pub const VALUE_LIMIT: u128 = 1 << 126;

const MAX_EXPONENT_DENOMINATOR: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConvexRule {
    Triangular,
    PowerSum(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SequenceSpec {
    /// Coefficients from the constant term upward.
    Polynomial(Vec<i128>),
    Monomial(u32),
    Lacunary { ratio: Ratio, start: u128 },
    PowersOfTwo,
    PiatetskiShapiro { beta: Ratio, exponent: Ratio },
    Convex(ConvexRule),
    FromFile(PathBuf),
    ArithmeticProgression { start: u128, step: u128 },
    Explicit(Vec<u128>),
    RandomSubset { n: u64, k: u64, seed: u64 },
}

impl fmt::Display for SequenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(",");
        match self {
            SequenceSpec::Polynomial(c) => write!(f, "poly:{}", join(&mut c.iter().map(|x| x.to_string()))),
            SequenceSpec::Monomial(d) => write!(f, "mono:{d}"),
            SequenceSpec::Lacunary { ratio, start } => write!(f, "lac:{ratio}:{start}"),
            SequenceSpec::PowersOfTwo => write!(f, "pow2"),
            SequenceSpec::PiatetskiShapiro { beta, exponent } => write!(f, "ps:{beta}:{exponent}"),
            SequenceSpec::Convex(ConvexRule::Triangular) => write!(f, "convex:triangular"),
            SequenceSpec::Convex(ConvexRule::PowerSum(d)) => write!(f, "convex:powersum:{d}"),
            SequenceSpec::FromFile(p) => write!(f, "file:{}", p.display()),
            SequenceSpec::ArithmeticProgression { start, step } => write!(f, "ap:{start}:{step}"),
            SequenceSpec::Explicit(v) => write!(f, "set:{}", join(&mut v.iter().map(|x| x.to_string()))),
            SequenceSpec::RandomSubset { n, k, seed } => write!(f, "randset:{n}:{k}:{seed}"),
        }
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad {what} `{s}`")))
}

impl FromStr for SequenceSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim();
        let (kind, rest) = t.split_once(':').unwrap_or((t, ""));
        let parts: Vec<&str> = if rest.is_empty() { vec![] } else { rest.split(':').collect() };
        let spec = match (kind, parts.as_slice()) {
            ("mono", [d]) => SequenceSpec::Monomial(parse_num(d, "degree")?),
            ("poly", [c]) => SequenceSpec::Polynomial(
                c.split(',').map(|x| parse_num(x, "coefficient")).collect::<Result<_>>()?,
            ),
            ("lac", [c]) => SequenceSpec::Lacunary { ratio: c.parse()?, start: 1 },
            ("lac", [c, s]) => SequenceSpec::Lacunary { ratio: c.parse()?, start: parse_num(s, "start")? },
            ("pow2", []) => SequenceSpec::PowersOfTwo,
            ("ps", [b, a]) => SequenceSpec::PiatetskiShapiro { beta: b.parse()?, exponent: a.parse()? },
            ("convex", ["triangular"]) => SequenceSpec::Convex(ConvexRule::Triangular),
            ("convex", ["powersum", d]) => SequenceSpec::Convex(ConvexRule::PowerSum(parse_num(d, "degree")?)),
            ("ap", [a, d]) => SequenceSpec::ArithmeticProgression { start: parse_num(a, "start")?, step: parse_num(d, "step")? },
            ("file", _) if !rest.is_empty() => SequenceSpec::FromFile(PathBuf::from(rest)),
            ("set", [v]) => SequenceSpec::Explicit(v.split(',').map(|x| parse_num(x, "value")).collect::<Result<_>>()?),
            ("randset", [n, k, s]) => SequenceSpec::RandomSubset {
                n: parse_num(n, "N")?,
                k: parse_num(k, "K")?,
                seed: parse_num(s, "seed")?,
            },
            _ => return Err(Error::Parse(format!("unknown sequence spec `{t}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl SequenceSpec {
    /// Parameter range checks that do not depend on N.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        match self {
            SequenceSpec::Polynomial(c) => {
                if c.len() < 2 {
                    return bad("polynomial must have degree >= 1".into());
                }
                if *c.last().unwrap() <= 0 {
                    return bad("polynomial leading coefficient must be positive".into());
                }
            }
            SequenceSpec::Monomial(d) if *d == 0 => return bad("monomial degree must be >= 1".into()),
            SequenceSpec::Lacunary { ratio, start } => {
                if ratio.num() <= ratio.den() {
                    return bad(format!("lacunary ratio {ratio} must exceed 1"));
                }
                if *start == 0 {
                    return bad("lacunary start must be >= 1".into());
                }
            }
            SequenceSpec::PiatetskiShapiro { beta, exponent } => {
                if beta.is_zero() {
                    return bad("beta must be positive".into());
                }
                // 1 < alpha < 3/2
                if exponent.num() <= exponent.den() || 2 * exponent.num() >= 3 * exponent.den() {
                    return bad(format!("exponent {exponent} must lie in (1, 3/2)"));
                }
                // beta * alpha >= 1 makes floor(beta x^alpha) strictly increasing
                if (beta.num() as u128) * (exponent.num() as u128) < (beta.den() as u128) * (exponent.den() as u128) {
                    return bad("beta * exponent must be >= 1".into());
                }
                if exponent.den() > MAX_EXPONENT_DENOMINATOR {
                    return bad(format!("exponent denominator {} exceeds {MAX_EXPONENT_DENOMINATOR}", exponent.den()));
                }
            }
            SequenceSpec::Convex(ConvexRule::PowerSum(0)) => return bad("power-sum degree must be >= 1".into()),
            SequenceSpec::ArithmeticProgression { start, step } => {
                if *start == 0 || *step == 0 {
                    return bad("progression start and step must be >= 1".into());
                }
            }
            SequenceSpec::RandomSubset { n, k, .. }
                if (*k < 2 || n < k) => {
                    return bad("random subset needs K >= 2 and N >= K".into());
                }
            _ => {}
        }
        Ok(())
    }
}

/// A finite list of distinct positive integers with its provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    values: Vec<u128>,
    spec: SequenceSpec,
}

impl Sequence {
    /// Wraps values that must already be strictly increasing and in range.
    pub fn new(values: Vec<u128>, spec: SequenceSpec) -> Result<Self> {
        check_values(&values)?;
        Ok(Sequence { values, spec })
    }

    /// An explicit set; input order is irrelevant, duplicates are rejected.
    pub fn from_set(mut values: Vec<u128>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty set".into()));
        }
        values.sort_unstable();
        if let Some(i) = values.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::Duplicate { first: i + 1, second: i + 2 });
        }
        let spec = SequenceSpec::Explicit(values.clone());
        Sequence::new(values, spec)
    }

    pub fn values(&self) -> &[u128] {
        &self.values
    }

    pub fn spec(&self) -> &SequenceSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First `n` elements.
    pub fn truncate(&self, n: usize) -> Sequence {
        Sequence { values: self.values[..n.min(self.values.len())].to_vec(), spec: self.spec.clone() }
    }

    pub fn max(&self) -> u128 {
        *self.values.last().unwrap_or(&0)
    }

    pub fn min(&self) -> u128 {
        *self.values.first().unwrap_or(&0)
    }
}

/// Checks range and strict increase, naming colliding indices (1-based).
fn check_values(values: &[u128]) -> Result<()> {
    if let Some(i) = values.iter().position(|&v| v == 0 || v >= VALUE_LIMIT) {
        return Err(Error::ValueOutOfRange(i + 1));
    }
    if let Some(i) = values.windows(2).position(|w| w[0] >= w[1]) {
        let mut seen: HashMap<u128, usize> = HashMap::new();
        for (j, &v) in values.iter().enumerate() {
            if let Some(&first) = seen.get(&v) {
                return Err(Error::Duplicate { first: first + 1, second: j + 1 });
            }
            seen.insert(v, j);
        }
        return Err(Error::NotIncreasing(i + 2));
    }
    Ok(())
}

fn out_of_range(x: u64) -> Error {
    Error::ValueOutOfRange(x as usize)
}

fn in_range(v: Option<u128>, x: u64) -> Result<u128> {
    match v {
        Some(v) if v < VALUE_LIMIT => Ok(v),
        _ => Err(out_of_range(x)),
    }
}

/// `floor(beta * x^(u/v))` exactly, as the integer `v`-th root of
/// `floor(bn^v x^u / bd^v)`.
fn floor_power(beta: Ratio, exponent: Ratio, x: u64) -> BigUint {
    let v = exponent.den() as u32;
    let u = exponent.num() as u32;
    let num = BigUint::from(beta.num()).pow(v) * BigUint::from(x).pow(u);
    let den = BigUint::from(beta.den()).pow(v);
    (num / den).nth_root(v)
}

fn eval_polynomial(coeffs: &[i128], x: u64) -> Option<i128> {
    let x = x as i128;
    coeffs.iter().rev().try_fold(0i128, |acc, &c| acc.checked_mul(x)?.checked_add(c))
}

/// All values of an enumerated family (file, explicit set, random subset).
pub fn materialize(spec: &SequenceSpec) -> Result<Sequence> {
    match spec {
        SequenceSpec::FromFile(path) => {
            let values = read_values(path)?;
            Sequence::new(values, spec.clone())
        }
        SequenceSpec::Explicit(v) => Sequence::from_set(v.clone()),
        SequenceSpec::RandomSubset { n, k, seed } => {
            let params = crate::bourgain::RandomSetParams::new(*n, *k, *seed)?;
            Ok(crate::bourgain::sample_set(&params)?.sequence)
        }
        _ => Err(Error::InvalidInput(format!("`{spec}` is an infinite family; give N"))),
    }
}

/// The first `n` terms of `spec`.
pub fn generate(spec: &SequenceSpec, n: usize) -> Result<Sequence> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::InvalidInput("N must be at least 2".into()));
    }
    let xs = 1..=n as u64;
    let values: Vec<u128> = match spec {
        SequenceSpec::Monomial(d) => xs.map(|x| in_range((x as u128).checked_pow(*d), x)).collect::<Result<_>>()?,
        SequenceSpec::Polynomial(c) => xs
            .map(|x| match eval_polynomial(c, x) {
                Some(v) if v >= 1 && (v as u128) < VALUE_LIMIT => Ok(v as u128),
                _ => Err(out_of_range(x)),
            })
            .collect::<Result<_>>()?,
        SequenceSpec::Lacunary { ratio, start } => {
            let mut out = Vec::with_capacity(n);
            let mut a = *start;
            for x in 1..=n as u64 {
                if a >= VALUE_LIMIT {
                    return Err(out_of_range(x));
                }
                out.push(a);
                let scaled = a.checked_mul(ratio.num() as u128).ok_or_else(|| out_of_range(x + 1))?;
                a = (a + 1).max(scaled.div_ceil(ratio.den() as u128));
            }
            out
        }
        SequenceSpec::PowersOfTwo => xs.map(|x| in_range(1u128.checked_shl(x as u32), x)).collect::<Result<_>>()?,
        SequenceSpec::PiatetskiShapiro { beta, exponent } => xs
            .map(|x| in_range(floor_power(*beta, *exponent, x).to_u128(), x))
            .collect::<Result<_>>()?,
        SequenceSpec::Convex(ConvexRule::Triangular) => {
            xs.map(|x| in_range((x as u128).checked_mul(x as u128 + 1).map(|v| v / 2), x)).collect::<Result<_>>()?
        }
        SequenceSpec::Convex(ConvexRule::PowerSum(d)) => {
            let mut acc: u128 = 0;
            let mut out = Vec::with_capacity(n);
            for x in xs {
                acc = in_range((x as u128).checked_pow(*d).and_then(|p| acc.checked_add(p)), x)?;
                out.push(acc);
            }
            out
        }
        SequenceSpec::ArithmeticProgression { start, step } => xs
            .map(|x| in_range(step.checked_mul(x as u128 - 1).and_then(|v| v.checked_add(*start)), x))
            .collect::<Result<_>>()?,
        SequenceSpec::FromFile(_) | SequenceSpec::Explicit(_) | SequenceSpec::RandomSubset { .. } => {
            let all = materialize(spec)?;
            if all.len() < n {
                return Err(Error::InvalidInput(format!("`{spec}` has only {} values, {n} requested", all.len())));
            }
            return Ok(all.truncate(n));
        }
    };
    let seq = Sequence::new(values, spec.clone())?;
    if let SequenceSpec::Convex(_) = spec {
        if let (false, Some(i)) = validate_convex(seq.values()) {
            return Err(Error::NotConvex(i));
        }
    }
    Ok(seq)
}

/// Strictly positive second differences. Returns the first interior index
/// `x` (1-based) where `a(x) - a(x-1) >= a(x+1) - a(x)`.
pub fn validate_convex(values: &[u128]) -> (bool, Option<usize>) {
    for (i, w) in values.windows(3).enumerate() {
        // a(x+1) + a(x-1) > 2 a(x), without signed arithmetic
        if w[2] + w[0] <= 2 * w[1] {
            return (false, Some(i + 2));
        }
    }
    (true, None)
}

pub const FILE_MAGIC: &str = "# pairlab-seq v1";

pub fn write_sequence<W: Write>(seq: &Sequence, mut out: W) -> Result<()> {
    writeln!(out, "{FILE_MAGIC} {}", seq.spec())?;
    for v in seq.values() {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

pub fn save_sequence(seq: &Sequence, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_sequence(seq, std::io::BufWriter::new(f))
}

/// Reads one decimal integer per line; `#` lines are comments.
pub fn parse_values<R: BufRead>(input: R) -> Result<Vec<u128>> {
    let mut values = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: u128 = t.parse().map_err(|_| Error::Parse(format!("line {}: `{t}` is not an integer", lineno + 1)))?;
        values.push(v);
    }
    check_values(&values)?;
    if values.is_empty() {
        return Err(Error::InvalidInput("sequence file is empty".into()));
    }
    Ok(values)
}

pub fn read_values(path: &Path) -> Result<Vec<u128>> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_values(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gen(text: &str, n: usize) -> Vec<u128> {
        generate(&text.parse().unwrap(), n).unwrap().values().to_vec()
    }

    #[test]
    fn basic_families() {
        assert_eq!(gen("mono:2", 4), vec![1, 4, 9, 16]);
        assert_eq!(gen("pow2", 4), vec![2, 4, 8, 16]);
        assert_eq!(gen("ap:3:5", 4), vec![3, 8, 13, 18]);
        assert_eq!(gen("poly:1,0,2", 3), vec![3, 9, 19]);
        assert_eq!(gen("convex:triangular", 5), vec![1, 3, 6, 10, 15]);
        assert_eq!(gen("convex:powersum:2", 4), vec![1, 5, 14, 30]);
        assert_eq!(gen("lac:2", 5), vec![1, 2, 4, 8, 16]);
        assert_eq!(gen("lac:3/2:1", 6), vec![1, 2, 3, 5, 8, 12]);
    }

    #[test]
    fn piatetski_shapiro_matches_float_oracle() {
        // x^1.3 for x <= 5 is far from integers, so f64 is a safe oracle here
        let oracle: Vec<u128> = (1..=5).map(|x: i32| (x as f64).powf(1.3).floor() as u128).collect();
        assert_eq!(oracle, vec![1, 2, 4, 6, 8]);
        assert_eq!(gen("ps:1:1.3", 5), oracle);
        // larger x against a 1e-9 margin check
        let exact = gen("ps:1:13/10", 2000);
        for (i, &v) in exact.iter().enumerate() {
            let f = ((i + 1) as f64).powf(1.3);
            if (f - f.round()).abs() > 1e-9 {
                assert_eq!(v, f.floor() as u128, "x = {}", i + 1);
            }
        }
    }

    #[test]
    fn piatetski_shapiro_parameter_checks() {
        assert!("ps:1:1.5".parse::<SequenceSpec>().is_err());
        assert!("ps:1:1".parse::<SequenceSpec>().is_err());
        assert!("ps:1/2:1.3".parse::<SequenceSpec>().is_err());
        assert!("ps:1:1.2".parse::<SequenceSpec>().is_ok());
    }

    #[test]
    fn degenerate_polynomial_names_collision() {
        // x^2 - 3x + 10: a(1) = 8, a(2) = 8
        let spec: SequenceSpec = "poly:10,-3,1".parse().unwrap();
        assert_eq!(generate(&spec, 5), Err(Error::Duplicate { first: 1, second: 2 }));
        // x^2 - 2x + 3: 2, 3, 6, ... fine
        assert_eq!(gen("poly:3,-2,1", 3), vec![2, 3, 6]);
    }

    #[test]
    fn value_cap() {
        assert_eq!(generate(&SequenceSpec::PowersOfTwo, 125).unwrap().max(), 1 << 125);
        assert_eq!(generate(&SequenceSpec::PowersOfTwo, 126), Err(Error::ValueOutOfRange(126)));
        assert!(generate(&SequenceSpec::Monomial(40), 10).is_err());
    }

    #[test]
    fn bad_specs() {
        for t in ["mono:0", "lac:1", "lac:1/2", "ap:0:1", "poly:1", "poly:1,-1", "nope", "convex:powersum:0"] {
            assert!(t.parse::<SequenceSpec>().is_err(), "{t}");
        }
        assert!(generate(&SequenceSpec::Monomial(2), 1).is_err());
    }

    #[test]
    fn spec_text_round_trip() {
        for t in ["mono:3", "poly:1,2,3", "lac:3/2:5", "pow2", "ps:1:13/10", "convex:triangular", "convex:powersum:3", "ap:1:1", "set:1,2,5", "randset:64:4:9"] {
            let spec: SequenceSpec = t.parse().unwrap();
            assert_eq!(spec.to_string(), t);
        }
    }

    #[test]
    fn convexity() {
        assert_eq!(validate_convex(&[1, 4, 9, 16]), (true, None));
        assert_eq!(validate_convex(&[1, 2, 3, 4]), (false, Some(2)));
        assert_eq!(validate_convex(&[1, 2, 4, 8, 16]), (true, None));
    }

    #[test]
    fn explicit_sets() {
        let s = Sequence::from_set(vec![5, 1, 3]).unwrap();
        assert_eq!(s.values(), &[1, 3, 5]);
        assert!(matches!(Sequence::from_set(vec![1, 2, 2]), Err(Error::Duplicate { .. })));
        assert!(Sequence::from_set(vec![0, 2]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sq.txt");
        let original = generate(&SequenceSpec::Monomial(3), 50).unwrap();
        save_sequence(&original, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# pairlab-seq v1 mono:3\n"));

        let spec = SequenceSpec::FromFile(path.clone());
        let loaded = generate(&spec, 50).unwrap();
        assert_eq!(loaded.values(), original.values());

        let path2 = dir.path().join("sq2.txt");
        save_sequence(&loaded, &path2).unwrap();
        let again = generate(&SequenceSpec::FromFile(path2), 50).unwrap();
        assert_eq!(again.values(), original.values());
        assert!(generate(&spec, 51).is_err());
    }

    #[test]
    fn file_rejects_unsorted() {
        let r = parse_values("1\n3\n2\n".as_bytes());
        assert_eq!(r, Err(Error::NotIncreasing(3)));
        let r = parse_values("1\n3\n3\n".as_bytes());
        assert_eq!(r, Err(Error::Duplicate { first: 2, second: 3 }));
        assert!(parse_values("# only a header\n".as_bytes()).is_err());
        assert!(parse_values("1\nx\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn monomials_match_bigint_powers(d in 1u32..=5, n in 2usize..=100) {
            let seq = generate(&SequenceSpec::Monomial(d), n).unwrap();
            for (i, &v) in seq.values().iter().enumerate() {
                let expect = BigUint::from(i as u64 + 1).pow(d);
                prop_assert_eq!(BigUint::from(v), expect);
            }
        }

        #[test]
        fn lacunary_ratio_holds(num in 11u64..40, start in 1u128..1000, n in 2usize..60) {
            let ratio = Ratio::new(num, 10).unwrap();
            let seq = match generate(&SequenceSpec::Lacunary { ratio, start }, n) {
                Ok(seq) => seq,
                Err(e) => {
                    prop_assert!(matches!(e, Error::ValueOutOfRange(_)));
                    return Ok(());
                }
            };
            for w in seq.values().windows(2) {
                // a(x+1) / a(x) >= c, cross-multiplied
                prop_assert!(w[1] * ratio.den() as u128 >= w[0] * ratio.num() as u128);
            }
        }
    }
}
