//! Random sets with flat autocorrelation and their pair-correlation blow-up.
//!
//! `A = {KN + n : 1 <= n <= KN, xi_n = 1}` with independent `xi_n` of mean
//! `1/K`. Such sets have energy `O(N^3/K)` yet, at `alpha = p/q` with small
//! `q`, every multiple of `q` below `KN/10` is a difference with multiplicity
//! about `N/K`, which forces `R2([-1, 1], alpha)` up to order `K`.

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{circle_dist, frac_mul, gcd_u64, pow2, Alpha, FixedFrac, Ratio, UnitPoint};
use crate::energy::{autocorrelation, AutocorrelationProfile};
use crate::error::{Error, Result};
use crate::paircorr::{dilate, r2};
use crate::report::BoundCheckReport;
use crate::seqgen::{Sequence, SequenceSpec};

/// Largest number of Bernoulli slots `K N` drawn by `sample_set`.
pub const SLOT_LIMIT: u64 = 1 << 32;
const MAX_RESAMPLES: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RandomSetParams {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "K")]
    pub k: u64,
    pub seed: u64,
}

impl RandomSetParams {
    pub fn new(n: u64, k: u64, seed: u64) -> Result<Self> {
        if k < 2 || n < k {
            return Err(Error::InvalidInput(format!("need K >= 2 and N >= K (got N = {n}, K = {k})")));
        }
        match n.checked_mul(k) {
            Some(slots) if slots <= SLOT_LIMIT => Ok(RandomSetParams { n, k, seed }),
            _ => Err(Error::CapExceeded { what: "K N slots", value: n as u128 * k as u128, cap: SLOT_LIMIT as u128 }),
        }
    }

    pub fn slots(&self) -> u64 {
        self.n * self.k
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledSet {
    pub sequence: Sequence,
    /// Number of empty draws that were redrawn on the next stream.
    pub resamples: u64,
}

/// Draws `A`; the draw on stream `r` of the seeded generator is used, where
/// `r` counts the empty draws before it.
pub fn sample_set(params: &RandomSetParams) -> Result<SampledSet> {
    let slots = params.slots();
    for resamples in 0..MAX_RESAMPLES {
        let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
        rng.set_stream(resamples);
        let values: Vec<u128> = (1..=slots).filter(|_| rng.random_range(0..params.k) == 0).map(|n| (slots + n) as u128).collect();
        if !values.is_empty() {
            let spec = SequenceSpec::RandomSubset { n: params.n, k: params.k, seed: params.seed };
            return Ok(SampledSet { sequence: Sequence::new(values, spec)?, resamples });
        }
    }
    Err(Error::InvalidInput(format!("{MAX_RESAMPLES} consecutive empty draws")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaSixReport {
    pub size: usize,
    /// `max_{k != 0} d(k)`.
    pub max_auto: u64,
    /// `min_{0 < |k| < KN/10} d(k)`; absent when the range is empty.
    pub min_auto_in_range: Option<u64>,
    /// `max_auto <= 2N/K`.
    pub pass_i: bool,
    /// `min_auto_in_range > N/(2K)`.
    pub pass_ii: bool,
    /// `N/2 <= |A| <= 2N`.
    pub pass_iii: bool,
    pub pass_all: bool,
}

/// `min d(k)` over `0 < k < KN/10`, zero-count shifts included.
fn min_in_range(profile: &AutocorrelationProfile, slots: u128) -> Option<u64> {
    let mut expected: u128 = 1;
    let mut min: Option<u64> = None;
    for &(k, d) in profile.positive() {
        if 10 * k >= slots {
            break;
        }
        if k != expected {
            return Some(0);
        }
        min = Some(min.map_or(d, |m: u64| m.min(d)));
        expected += 1;
    }
    if 10 * expected < slots {
        // a shift inside the range is missing from the profile
        return Some(0);
    }
    min
}

pub fn lemma6_check_profile(profile: &AutocorrelationProfile, n: u64, k: u64) -> LemmaSixReport {
    let (n, k) = (n as u128, k as u128);
    let size = profile.size();
    let max_auto = profile.max_nonzero();
    let min_auto_in_range = min_in_range(profile, n * k);
    let pass_i = max_auto as u128 * k <= 2 * n;
    let pass_ii = min_auto_in_range.is_none_or(|m| 2 * k * m as u128 > n);
    let pass_iii = 2 * size as u128 >= n && size as u128 <= 2 * n;
    LemmaSixReport { size, max_auto, min_auto_in_range, pass_i, pass_ii, pass_iii, pass_all: pass_i && pass_ii && pass_iii }
}

/// Checks the three properties of a good random set for scale `N`, density `1/K`.
pub fn lemma6_check(a: &Sequence, n: u64, k: u64) -> Result<LemmaSixReport> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidInput("N and K must be positive".into()));
    }
    Ok(lemma6_check_profile(&autocorrelation(a)?, n, k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBoundCheck {
    #[serde(rename = "E")]
    pub e: u128,
    /// `8 N^3 / K`.
    pub e_bound: f64,
    #[serde(flatten)]
    pub report: BoundCheckReport,
}

/// `E(A) <= 8 N^3 / K`, compared exactly; requires property (i).
pub fn energy_bound_check(a: &Sequence, params: &RandomSetParams) -> Result<EnergyBoundCheck> {
    let profile = autocorrelation(a)?;
    energy_bound_from_profile(&profile, params)
}

fn energy_bound_from_profile(profile: &AutocorrelationProfile, params: &RandomSetParams) -> Result<EnergyBoundCheck> {
    let lemma = lemma6_check_profile(profile, params.n, params.k);
    if !lemma.pass_i {
        return Err(Error::InvalidInput("the energy bound presumes max d(k) <= 2N/K".into()));
    }
    let e = profile.energy();
    let n = params.n as u128;
    let e_bound = 8.0 * (n as f64).powi(3) / params.k as f64;
    let mut report = BoundCheckReport::new(e as f64, e_bound, 1.0);
    report.pass = e * params.k as u128 <= 8 * n * n * n;
    Ok(EnergyBoundCheck { e, e_bound, report })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub alpha: String,
    pub size: usize,
    /// Ordered pairs with `||(a - b) alpha|| <= 1/|A|`, from `sum_k d(k) 1(..)`.
    pub count_autocorrelation: u64,
    /// The same count from the sorted sweep over the points.
    pub count_direct: u64,
    pub identity_holds: bool,
    #[serde(rename = "R2")]
    pub value: f64,
    /// `K / 20`.
    pub threshold: f64,
    pub pass: bool,
}

/// Counts close pairs through the autocorrelation profile.
fn autocorrelation_count(profile: &AutocorrelationProfile, alpha: &Alpha) -> Result<u64> {
    let size = profile.size() as u64;
    let (zero, fixed_threshold) = match alpha {
        Alpha::FixedPoint(v) => {
            let bits = v.bits();
            (UnitPoint::Fixed(FixedFrac::zero(bits)), FixedFrac::from_biguint(&(pow2(bits) / BigUint::from(size)), bits))
        }
        Alpha::Rational { q, .. } => (UnitPoint::Rational { num: 0, den: *q }, FixedFrac::zero(64)),
    };
    let close = |k: u128| -> Result<bool> {
        Ok(match circle_dist(&frac_mul(alpha, k), &zero)? {
            UnitPoint::Rational { num, den } => num as u128 * size as u128 <= den as u128,
            UnitPoint::Fixed(d) => d <= fixed_threshold,
        })
    };
    let mut count = 0u64;
    for &(k, d) in profile.positive() {
        if close(k)? {
            count += 2 * d;
        }
    }
    Ok(count)
}

fn blowup_with_profile(a: &Sequence, profile: &AutocorrelationProfile, k: u64, alpha: &Alpha) -> Result<BlowupReport> {
    let size = a.len();
    if size < 2 {
        return Err(Error::InvalidInput("A needs at least two elements".into()));
    }
    let count_autocorrelation = autocorrelation_count(profile, alpha)?;
    let count_direct = r2(&dilate(alpha, a), Ratio::integer(1))?.ordered_pair_count;
    Ok(BlowupReport {
        alpha: alpha.canonical(),
        size,
        count_autocorrelation,
        count_direct,
        identity_holds: count_autocorrelation == count_direct,
        value: count_direct as f64 / size as f64,
        threshold: k as f64 / 20.0,
        pass: 20 * count_direct as u128 >= k as u128 * size as u128,
    })
}

fn check_fraction(params: &RandomSetParams, p: i64, q: u64) -> Result<()> {
    if q == 0 || q as u128 * params.k as u128 >= params.n as u128 {
        return Err(Error::InvalidInput(format!("need 0 < q < N/K (got q = {q})")));
    }
    if gcd_u64(p.unsigned_abs(), q) != 1 {
        return Err(Error::InvalidInput(format!("{p}/{q} is not in lowest terms")));
    }
    Ok(())
}

/// `R2([-1, 1], p/q, A)` computed both ways, exactly at `alpha = p/q`.
pub fn blowup_experiment(a: &Sequence, params: &RandomSetParams, q: u64, p: i64) -> Result<BlowupReport> {
    check_fraction(params, p, q)?;
    let profile = autocorrelation(a)?;
    blowup_with_profile(a, &profile, params.k, &Alpha::rational(p as i128, q)?)
}

/// A `bits`-bit point within `1/(K N)^2` of `p/q`, drawn from `rng`.
pub fn alpha_near<R: Rng + ?Sized>(p: i64, q: u64, params: &RandomSetParams, bits: u32, rng: &mut R) -> Alpha {
    let modulus = pow2(bits);
    let center = (BigUint::from(p.rem_euclid(q as i64) as u64) << bits as usize) / q;
    let kn = params.k as u128 * params.n as u128;
    let radius = &modulus / BigUint::from(kn * kn);
    let mut draw = BigUint::ZERO;
    for _ in 0..bits / 64 + 1 {
        draw = (draw << 64usize) + BigUint::from(rng.random::<u64>());
    }
    let offset = if radius == BigUint::ZERO { BigUint::ZERO } else { draw % &radius };
    let value = if rng.random::<bool>() { (center + offset) % &modulus } else { (center + &modulus - offset) % &modulus };
    Alpha::FixedPoint(FixedFrac::from_biguint(&value, bits))
}

/// Same as `blowup_experiment` at an `alpha` sampled from the interval
/// around `p/q` instead of its center.
pub fn blowup_experiment_near(a: &Sequence, params: &RandomSetParams, q: u64, p: i64, bits: u32, seed: u64) -> Result<BlowupReport> {
    check_fraction(params, p, q)?;
    let alpha = alpha_near(p, q, params, bits, &mut ChaCha20Rng::seed_from_u64(seed));
    let profile = autocorrelation(a)?;
    blowup_with_profile(a, &profile, params.k, &alpha)
}

/// `R2([-1, 1], alpha, A)` computed both ways at an arbitrary `alpha`.
pub fn r2_identity_check(a: &Sequence, params: &RandomSetParams, alpha: &Alpha) -> Result<BlowupReport> {
    let profile = autocorrelation(a)?;
    blowup_with_profile(a, &profile, params.k, alpha)
}

/// One row per `(j, seed)` of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignRow {
    pub j: usize,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "K")]
    pub k: u64,
    pub seed: u64,
    pub size: usize,
    pub max_auto: u64,
    pub min_auto: Option<u64>,
    #[serde(rename = "E")]
    pub e: u128,
    #[serde(rename = "E_bound")]
    pub e_bound: f64,
    pub alpha: String,
    #[serde(rename = "R2")]
    pub r2: f64,
    pub threshold: f64,
    pub pass: bool,
}

pub const CAMPAIGN_HEADER: [&str; 13] = ["j", "N", "K", "seed", "size", "max_auto", "min_auto", "E", "E_bound", "alpha", "R2", "threshold", "pass"];

/// Lemma checks, energy and blow-up at `alpha = 1/floor(N/(2K))` for every
/// `(N_j, K_j)` and seed. `pass` requires all three lemma properties and the
/// blow-up threshold.
pub fn run_campaign(schedule: &[(u64, u64)], seeds: &[u64]) -> Result<Vec<CampaignRow>> {
    let jobs: Vec<(usize, u64, u64, u64)> =
        schedule.iter().enumerate().flat_map(|(j, &(n, k))| seeds.iter().map(move |&seed| (j, n, k, seed))).collect();
    jobs.par_iter()
        .map(|&(j, n, k, seed)| {
            let params = RandomSetParams::new(n, k, seed)?;
            let set = sample_set(&params)?.sequence;
            let profile = autocorrelation(&set)?;
            let lemma = lemma6_check_profile(&profile, n, k);
            let q = (n / (2 * k)).max(1);
            let blow = blowup_with_profile(&set, &profile, k, &Alpha::rational(1, q)?)?;
            Ok(CampaignRow {
                j,
                n,
                k,
                seed,
                size: set.len(),
                max_auto: lemma.max_auto,
                min_auto: lemma.min_auto_in_range,
                e: profile.energy(),
                e_bound: 8.0 * (n as f64).powi(3) / k as f64,
                alpha: blow.alpha,
                r2: blow.value,
                threshold: blow.threshold,
                pass: lemma.pass_all && blow.pass && blow.identity_holds,
            })
        })
        .collect()
}

pub fn write_campaign_csv<W: std::io::Write>(rows: &[CampaignRow], out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    wtr.write_record(CAMPAIGN_HEADER).map_err(io)?;
    for r in rows {
        wtr.serialize(r).map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}
