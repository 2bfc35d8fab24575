//! The `pairlab` command line.
//!
//! Every run prints one JSON object `{version, command, config, ..result}`
//! (or CSV preceded by `# key=value` lines). `config` holds every resolved
//! option, and feeding the output back through `--config` reproduces it
//! byte for byte.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::arith::{parse_alpha, Ratio, DEFAULT_BITS};
use crate::bourgain::{self, RandomSetParams, CAMPAIGN_HEADER};
use crate::energy::{self, EnergyAlgorithm};
use crate::error::{Error, Result};
use crate::fourier::{self, FourierCoefficients, GcdSumInput};
use crate::metric;
use crate::paircorr::{self, gap_profile, r2_sequence};
use crate::seqgen::{generate, materialize, Sequence, SequenceSpec};

pub const THREADS_ENV: &str = "PAIRLAB_THREADS";

/// Exit status and captured output of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn fail(code: i32, msg: impl std::fmt::Display) -> Outcome {
        Outcome { code, stdout: String::new(), stderr: format!("error: {msg}\n") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "pairlab", version, about = "Pair correlation, additive energy and GCD-sum experiments", args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output encoding.
    #[arg(long, global = true, default_value = "json")]
    format: Format,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: $PAIRLAB_THREADS, else all cores). Never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Prepend options from a `key=value` file or an emitted JSON result.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a sequence. CSV columns: x, a.
    Gen(SeqOnly),
    /// Pair correlation R2([-s, s], alpha, N).
    R2(R2Args),
    /// Circular gaps of <alpha a(x)>. CSV columns: gap, length, multiplicity.
    Gaps(GapArgs),
    /// Additive energy E(A_N).
    Energy(EnergyArgs),
    /// Energy over dyadic N with a log-log fit. CSV columns: N, E, log2n, log2e.
    EnergyScan(ScanArgs),
    /// Autocorrelation profile d(k), k >= 0. CSV columns: k, d.
    Autocorr(SeqOnly),
    /// Solutions of n1 (a(x1) - a(y1)) = n2 (a(x2) - a(y2)), 1 <= |n_i| <= M.
    RzCount(RzArgs),
    /// GCD sum with optional exponential bound check.
    Gcdsum(GcdArgs),
    /// Coefficient pair sums against their bounds. CSV columns: v, w, m, lhs, rhs, ratio.
    CoeffCheck(CoeffArgs),
    /// Monte Carlo mean and variance of R2 over alpha.
    Variance(VarianceArgs),
    /// Exact grid average of R2, optionally with a Monte Carlo mean.
    MeanCheck(MeanArgs),
    /// Sample a random set and check the three flatness properties.
    BourgainLemma(LemmaArgs),
    /// R2 of a random set at alpha = p/q, computed two ways.
    BourgainBlowup(BlowupArgs),
    /// Campaign over a (N, K) schedule and seeds.
    /// CSV columns: j, N, K, seed, size, max_auto, min_auto, E, E_bound, alpha, R2, threshold, pass.
    BourgainCampaign(CampaignArgs),
    /// Measure of alpha with a small difference ||(m - n) alpha|| < eps/|B - B|.
    MeasureCheck(MeasureArgs),
    /// Hausdorff dimension bound (d + 3 - eps)/(d + 3).
    DimBound(DimArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::R2(_) => "r2",
            Command::Gaps(_) => "gaps",
            Command::Energy(_) => "energy",
            Command::EnergyScan(_) => "energy-scan",
            Command::Autocorr(_) => "autocorr",
            Command::RzCount(_) => "rz-count",
            Command::Gcdsum(_) => "gcdsum",
            Command::CoeffCheck(_) => "coeff-check",
            Command::Variance(_) => "variance",
            Command::MeanCheck(_) => "mean-check",
            Command::BourgainLemma(_) => "bourgain-lemma",
            Command::BourgainBlowup(_) => "bourgain-blowup",
            Command::BourgainCampaign(_) => "bourgain-campaign",
            Command::MeasureCheck(_) => "measure-check",
            Command::DimBound(_) => "dim-bound",
        }
    }

    fn config(&self) -> Value {
        let v = match self {
            Command::Gen(a) | Command::Autocorr(a) => serde_json::to_value(a),
            Command::R2(a) => serde_json::to_value(a),
            Command::Gaps(a) => serde_json::to_value(a),
            Command::Energy(a) => serde_json::to_value(a),
            Command::EnergyScan(a) => serde_json::to_value(a),
            Command::RzCount(a) => serde_json::to_value(a),
            Command::Gcdsum(a) => serde_json::to_value(a),
            Command::CoeffCheck(a) => serde_json::to_value(a),
            Command::Variance(a) => serde_json::to_value(a),
            Command::MeanCheck(a) => serde_json::to_value(a),
            Command::BourgainLemma(a) => serde_json::to_value(a),
            Command::BourgainBlowup(a) => serde_json::to_value(a),
            Command::BourgainCampaign(a) => serde_json::to_value(a),
            Command::MeasureCheck(a) => serde_json::to_value(a),
            Command::DimBound(a) => serde_json::to_value(a),
        };
        v.expect("arguments serialize")
    }
}

/// Where the sequence comes from: `--set`, or `--spec` with `--N`.
#[derive(Args, Debug, Clone, Serialize)]
struct SeqArgs {
    /// Family, e.g. mono:2, poly:0,1,1, lac:2, pow2, ps:1:13/10, convex:triangular, ap:1:1, file:<path>, randset:N:K:seed.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<String>,
    /// Explicit comma-separated set of positive integers.
    #[arg(long, conflicts_with = "spec")]
    #[serde(skip_serializing_if = "Option::is_none")]
    set: Option<String>,
    /// Number of terms (truncates enumerated families).
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
}

impl SeqArgs {
    fn load(&self) -> Result<Sequence> {
        let seq = match (&self.set, &self.spec) {
            (Some(set), _) => Sequence::from_set(parse_list::<u128>(set, "set")?)?,
            (None, Some(spec)) => {
                let spec: SequenceSpec = spec.parse()?;
                match spec {
                    SequenceSpec::FromFile(_) | SequenceSpec::Explicit(_) | SequenceSpec::RandomSubset { .. } => materialize(&spec)?,
                    _ => {
                        let n = self.n.ok_or_else(|| Error::InvalidInput(format!("`{spec}` needs --N")))?;
                        return generate(&spec, n);
                    }
                }
            }
            (None, None) => return Err(Error::InvalidInput("give --spec or --set".into())),
        };
        Ok(match self.n {
            Some(n) if n > seq.len() => return Err(Error::InvalidInput(format!("--N {n} exceeds the {} available terms", seq.len()))),
            Some(n) => seq.truncate(n),
            None => seq,
        })
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct SeqOnly {
    #[command(flatten)]
    #[serde(flatten)]
    seq: SeqArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct R2Args {
    #[command(flatten)]
    #[serde(flatten)]
    seq: SeqArgs,
    /// `p/q`, a decimal, or `random:<seed>`.
    #[arg(long)]
    alpha: String,
    /// Window half-width in units of 1/N (rational).
    #[arg(long, default_value = "1")]
    s: String,
    /// Fixed-point precision in bits (multiple of 64).
    #[arg(long, default_value_t = DEFAULT_BITS)]
    bits: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
struct GapArgs {
    #[command(flatten)]
    #[serde(flatten)]
    seq: SeqArgs,
    #[arg(long)]
    alpha: String,
    #[arg(long, default_value_t = DEFAULT_BITS)]
    bits: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
struct EnergyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    seq: SeqArgs,
    /// hash, convolution, oracle or auto.
    #[arg(long, default_value = "auto")]
    algorithm: String,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ScanArgs {
    #[arg(long)]
    spec: String,
    /// Comma-separated powers of two.
    #[arg(long = "Ns", default_value = "16,32,64,128,256,512,1024")]
    #[serde(rename = "Ns")]
    ns: String,
    #[arg(long, default_value = "auto")]
    algorithm: String,
}

#[derive(Args, Debug, Clone, Serialize)]
struct RzArgs {
    #[command(flatten)]
    #[serde(flatten)]
    seq: SeqArgs,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    m: u64,
    /// Largest N(N-1)/2 * M allowed.
    #[arg(long, default_value_t = energy::DEFAULT_RZ_CAP)]
    cap: u128,
}

#[derive(Args, Debug, Clone, Serialize)]
struct GcdArgs {
    /// Distinct positive integers, comma-separated.
    #[arg(long)]
    m: String,
    /// Weights (default uniform 1/sqrt(M)).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<String>,
    /// Evaluate the exponential bound at this kappa (needs M >= 20).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pass_constant: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CoeffArgs {
    /// `v:w` pairs, comma-separated.
    #[arg(long, default_value = "1:1")]
    pairs: String,
    /// `full` and/or dyadic indices m >= 1, comma-separated.
    #[arg(long, default_value = "full")]
    shells: String,
    #[arg(long, default_value = "1")]
    s: String,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    n: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct VarianceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    seq: SeqArgs,
    #[arg(long, default_value = "1")]
    s: String,
    #[arg(long, default_value_t = 100)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BITS)]
    bits: u32,
    /// Also compare against E N^-3 exp(..) at this constant (needs N >= 20).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa_hat: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct MeanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    seq: SeqArgs,
    #[arg(long, default_value = "1")]
    s: String,
    /// Monte Carlo samples for the sampled mean (0 skips it).
    #[arg(long, default_value_t = 0)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BITS)]
    bits: u32,
    /// Skip the exact grid average.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    skip_grid: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
struct LemmaArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    n: u64,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    k: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum AlphaMode {
    /// alpha = p/q exactly.
    Exact,
    /// alpha drawn within 1/(KN)^2 of p/q.
    Near,
}

#[derive(Args, Debug, Clone, Serialize)]
struct BlowupArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    n: u64,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    k: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Denominator (default floor(N/(2K))).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<u64>,
    #[arg(long, default_value_t = 1)]
    p: i64,
    #[arg(long, default_value = "exact")]
    alpha_mode: AlphaMode,
    #[arg(long, default_value_t = DEFAULT_BITS)]
    bits: u32,
    /// Seed for the near-mode draw.
    #[arg(long, default_value_t = 0)]
    alpha_seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CampaignArgs {
    /// `N:K` entries, comma-separated (default N_j = 2^(8+2j), K_j = 2+j, j <= 4).
    #[arg(long, default_value = "256:2,1024:3,4096:4,16384:5,65536:6")]
    schedule: String,
    /// Seeds, comma-separated.
    #[arg(long, default_value = "1")]
    seeds: String,
}

#[derive(Args, Debug, Clone, Serialize)]
struct MeasureArgs {
    #[command(flatten)]
    #[serde(flatten)]
    seq: SeqArgs,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct DimArgs {
    #[arg(long)]
    d: f64,
    #[arg(long)]
    eps: f64,
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| Error::Parse(format!("bad {what} entry `{t}`"))))
        .collect()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

/// A command's output: top-level fields plus an optional table.
struct Output {
    fields: Map<String, Value>,
    table: Option<(Vec<String>, Vec<Value>)>,
}

impl Output {
    fn fields(v: Value) -> Output {
        match v {
            Value::Object(m) => Output { fields: m, table: None },
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                Output { fields: m, table: None }
            }
        }
    }

    fn with_table<T: Serialize>(mut self, columns: &[&str], rows: &[T]) -> Output {
        self.table = Some((columns.iter().map(|c| c.to_string()).collect(), rows.iter().map(to_value).collect()));
        self
    }

    fn insert(&mut self, key: &str, v: Value) {
        self.fields.insert(key.to_string(), v);
    }
}

fn run(cmd: &Command) -> Result<Output> {
    Ok(match cmd {
        Command::Gen(a) => {
            let seq = a.seq.load()?;
            #[derive(Serialize)]
            struct Row {
                x: usize,
                a: u128,
            }
            let rows: Vec<Row> = seq.values().iter().enumerate().map(|(i, &v)| Row { x: i + 1, a: v }).collect();
            Output::fields(serde_json::json!({ "spec": seq.spec().to_string(), "N": seq.len() })).with_table(&["x", "a"], &rows)
        }
        Command::R2(a) => {
            let seq = a.seq.load()?;
            let alpha = parse_alpha(&a.alpha, a.bits)?;
            let s: Ratio = a.s.parse()?;
            let stat = r2_sequence(&alpha, &seq, s)?;
            let mut out = Output::fields(to_value(&stat));
            out.insert("alpha_canonical", Value::String(alpha.alpha.canonical()));
            out.insert("truncated", Value::Bool(alpha.truncated));
            out
        }
        Command::Gaps(a) => {
            let seq = a.seq.load()?;
            let alpha = parse_alpha(&a.alpha, a.bits)?;
            let prof = gap_profile(&paircorr::dilate(&alpha.alpha, &seq))?;
            #[derive(Serialize)]
            struct Row {
                gap: String,
                length: f64,
                multiplicity: usize,
            }
            let lengths = prof.gaps_f64();
            let mut rows: Vec<Row> = Vec::new();
            for (g, len) in prof.gaps.iter().zip(lengths) {
                match rows.last_mut() {
                    Some(r) if r.gap == g.to_string() => r.multiplicity += 1,
                    _ => rows.push(Row { gap: g.to_string(), length: len, multiplicity: 1 }),
                }
            }
            Output::fields(serde_json::json!({
                "N": seq.len(),
                "modulus": prof.modulus.to_string(),
                "distinct_gap_count": prof.distinct_gap_count,
            }))
            .with_table(&["gap", "length", "multiplicity"], &rows)
        }
        Command::Energy(a) => {
            let seq = a.seq.load()?;
            Output::fields(to_value(&energy::energy(&seq, a.algorithm.parse()?)?))
        }
        Command::EnergyScan(a) => {
            let spec: SequenceSpec = a.spec.parse()?;
            let algo: EnergyAlgorithm = a.algorithm.parse()?;
            let fit = energy::energy_scan(&spec, &parse_list::<usize>(&a.ns, "Ns")?, algo)?;
            Output::fields(serde_json::json!({
                "spec": fit.spec,
                "slope": fit.slope,
                "intercept": fit.intercept,
                "residual": fit.residual,
            }))
            .with_table(&["N", "E", "log2n", "log2e"], &fit.points)
        }
        Command::Autocorr(a) => {
            let seq = a.seq.load()?;
            let prof = energy::autocorrelation(&seq)?;
            #[derive(Serialize)]
            struct Row {
                k: u128,
                d: u64,
            }
            let rows: Vec<Row> = std::iter::once(Row { k: 0, d: prof.size() as u64 })
                .chain(prof.positive().iter().map(|&(k, d)| Row { k, d }))
                .collect();
            Output::fields(serde_json::json!({
                "N": prof.size(),
                "E": prof.energy(),
                "max_auto": prof.max_nonzero(),
                "difference_set_size": prof.difference_set_size(),
            }))
            .with_table(&["k", "d"], &rows)
        }
        Command::RzCount(a) => {
            let seq = a.seq.load()?;
            let count = energy::rz_solution_count(&seq, a.m, a.cap)?;
            Output::fields(serde_json::json!({ "N": seq.len(), "M": a.m, "count": count }))
        }
        Command::Gcdsum(a) => {
            let m = parse_list::<u64>(&a.m, "m")?;
            let input = match &a.b {
                Some(b) => GcdSumInput::new(m, parse_list::<f64>(b, "b")?)?,
                None => GcdSumInput::uniform(m)?,
            };
            let mut out = Output::fields(serde_json::json!({ "M": input.len(), "value": fourier::gcd_sum(&input) }));
            if let Some(kappa) = a.kappa {
                out.insert("bound", to_value(&fourier::gcd_sum_bound_check(&input, kappa, a.pass_constant)?));
            }
            out
        }
        Command::CoeffCheck(a) => {
            let fc = FourierCoefficients::new(a.s.parse()?, a.n)?;
            let pairs: Vec<(i64, i64)> = a
                .pairs
                .split(',')
                .map(|p| {
                    let (v, w) = p.trim().split_once(':').ok_or_else(|| Error::Parse(format!("bad pair `{p}`")))?;
                    let parse = |t: &str| t.trim().parse::<i64>().map_err(|_| Error::Parse(format!("bad pair `{p}`")));
                    Ok((parse(v)?, parse(w)?))
                })
                .collect::<Result<_>>()?;
            let shells: Vec<Option<u32>> = a
                .shells
                .split(',')
                .map(|t| match t.trim() {
                    "full" => Ok(None),
                    m => m.parse::<u32>().map(Some).map_err(|_| Error::Parse(format!("bad shell `{m}`"))),
                })
                .collect::<Result<_>>()?;
            let rows = fourier::coefficient_sweep(&pairs, &shells, &fc)?;
            let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
            Output::fields(serde_json::json!({ "rows_count": rows.len(), "max_ratio": max_ratio }))
                .with_table(&["v", "w", "m", "lhs", "rhs", "ratio"], &rows)
        }
        Command::Variance(a) => {
            let seq = a.seq.load()?;
            let est = metric::variance_estimate(&seq, a.s.parse()?, a.samples, a.seed, a.bits)?;
            let mut out = Output::fields(to_value(&est));
            if let Some(kappa_hat) = a.kappa_hat {
                let e = energy::energy(&seq, EnergyAlgorithm::Auto)?;
                out.insert("E", to_value(&e.e));
                out.insert("bound", to_value(&metric::variance_bound_check(&est, &e, kappa_hat, f64::INFINITY)?));
            }
            out
        }
        Command::MeanCheck(a) => {
            let seq = a.seq.load()?;
            let s: Ratio = a.s.parse()?;
            let mut out = Output::fields(serde_json::json!({
                "N": seq.len(),
                "s": s.to_string(),
                "target_mean": metric::target_mean(seq.len(), s),
            }));
            if !a.skip_grid {
                out.insert("grid", to_value(&metric::grid_mean_check(&seq, s)?));
            }
            if a.samples > 0 {
                let est = metric::variance_estimate(&seq, s, a.samples, a.seed, a.bits)?;
                let within = (est.mean - est.target_mean).abs() <= 4.0 * est.stderr;
                out.insert(
                    "monte_carlo",
                    serde_json::json!({ "samples": est.samples, "seed": est.seed, "mean": est.mean, "stderr": est.stderr, "within_4_stderr": within }),
                );
            }
            out
        }
        Command::BourgainLemma(a) => {
            let params = RandomSetParams::new(a.n, a.k, a.seed)?;
            let sampled = bourgain::sample_set(&params)?;
            let report = bourgain::lemma6_check(&sampled.sequence, a.n, a.k)?;
            let mut out = Output::fields(to_value(&report));
            out.insert("resamples", to_value(&sampled.resamples));
            if report.pass_i {
                out.insert("energy_bound", to_value(&bourgain::energy_bound_check(&sampled.sequence, &params)?));
            }
            out
        }
        Command::BourgainBlowup(a) => {
            let params = RandomSetParams::new(a.n, a.k, a.seed)?;
            let set = bourgain::sample_set(&params)?.sequence;
            let q = a.q.unwrap_or(a.n / (2 * a.k));
            let report = match a.alpha_mode {
                AlphaMode::Exact => bourgain::blowup_experiment(&set, &params, q, a.p)?,
                AlphaMode::Near => bourgain::blowup_experiment_near(&set, &params, q, a.p, a.bits, a.alpha_seed)?,
            };
            let mut out = Output::fields(to_value(&report));
            out.insert("lemma", to_value(&bourgain::lemma6_check(&set, a.n, a.k)?));
            out
        }
        Command::BourgainCampaign(a) => {
            let schedule: Vec<(u64, u64)> = a
                .schedule
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|e| {
                    let bad = || Error::Parse(format!("bad schedule entry `{e}`"));
                    let (n, k) = e.split_once(':').ok_or_else(bad)?;
                    Ok((n.trim().parse().map_err(|_| bad())?, k.trim().parse().map_err(|_| bad())?))
                })
                .collect::<Result<_>>()?;
            let seeds = parse_list::<u64>(&a.seeds, "seeds")?;
            let rows = bourgain::run_campaign(&schedule, &seeds)?;
            let passed = rows.iter().filter(|r| r.pass).count();
            let fraction = if rows.is_empty() { 0.0 } else { passed as f64 / rows.len() as f64 };
            Output::fields(serde_json::json!({ "entries": rows.len(), "passed": passed, "pass_fraction": fraction }))
                .with_table(&CAMPAIGN_HEADER, &rows)
        }
        Command::MeasureCheck(a) => {
            let seq = a.seq.load()?;
            Output::fields(to_value(&metric::measure_check(seq.values(), a.eps, a.samples, a.seed)?))
        }
        Command::DimBound(a) => Output::fields(to_value(&metric::dimension_bound(a.d, a.eps)?)),
    })
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Flattens nested objects to dotted keys.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, val) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, val, out);
            }
        }
        other => out.push((prefix.to_string(), scalar_text(other))),
    }
}

fn render(command: &str, config: &Value, output: Output, format: Format) -> Result<String> {
    let version = env!("CARGO_PKG_VERSION");
    match format {
        Format::Json => {
            let mut top = Map::new();
            top.insert("version".into(), Value::String(version.into()));
            top.insert("command".into(), Value::String(command.into()));
            top.insert("config".into(), config.clone());
            for (k, v) in output.fields {
                top.insert(k, v);
            }
            if let Some((_, rows)) = output.table {
                top.insert("rows".into(), Value::Array(rows));
            }
            let mut text = serde_json::to_string_pretty(&Value::Object(top)).map_err(|e| Error::Io(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
        Format::Csv => {
            let mut text = format!("# version={version}\n# command={command}\n");
            let mut cfg = Vec::new();
            flatten("", config, &mut cfg);
            for (k, v) in cfg {
                text.push_str(&format!("# {k}={v}\n"));
            }
            let mut wtr = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(e.to_string());
            match output.table {
                Some((columns, rows)) => {
                    let mut fields = Vec::new();
                    flatten("", &Value::Object(output.fields), &mut fields);
                    for (k, v) in fields {
                        text.push_str(&format!("## {k}={v}\n"));
                    }
                    wtr.write_record(&columns).map_err(io)?;
                    for row in &rows {
                        let cells: Vec<String> = columns.iter().map(|c| row.get(c).map(scalar_text).unwrap_or_default()).collect();
                        wtr.write_record(&cells).map_err(io)?;
                    }
                }
                None => {
                    let mut fields = Vec::new();
                    flatten("", &Value::Object(output.fields), &mut fields);
                    wtr.write_record(fields.iter().map(|(k, _)| k)).map_err(io)?;
                    wtr.write_record(fields.iter().map(|(_, v)| v)).map_err(io)?;
                }
            }
            let body = wtr.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            text.push_str(&String::from_utf8(body).map_err(|e| Error::Io(e.to_string()))?);
            Ok(text)
        }
    }
}

/// Optional command plus `(key, value)` entries.
type ConfigFile = (Option<String>, Vec<(String, String)>);

/// Reads `(command, [(key, value)])` from a config file: either JSON with
/// `command` and `config` members, or `key=value` lines (a leading `# ` is
/// allowed, so emitted CSV works too; `##` lines hold results and are skipped).
fn read_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("config {}: {e}", path.display())))?;
        let command = v.get("command").and_then(Value::as_str).map(str::to_string);
        let mut entries = Vec::new();
        if let Some(Value::Object(m)) = v.get("config") {
            for (k, val) in m {
                if !val.is_null() {
                    entries.push((k.clone(), scalar_text(val)));
                }
            }
        }
        return Ok((command, entries));
    }
    let mut command = None;
    let mut entries = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with("##") {
            continue;
        }
        let line = line.strip_prefix('#').map(str::trim).unwrap_or(line);
        let Some((k, v)) = line.split_once('=') else { continue };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.contains(',') || k.contains(' ') {
            continue;
        }
        match k {
            "command" => command = Some(v.to_string()),
            "version" => {}
            _ => entries.push((k.to_string(), v.to_string())),
        }
    }
    Ok((command, entries))
}

/// Index of the subcommand, skipping global flags and their values.
fn subcommand_position(args: &[String]) -> Option<usize> {
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        if !a.starts_with('-') {
            return Some(i);
        }
        i += if GLOBAL_VALUED.contains(&a.as_str()) { 2 } else { 1 };
    }
    None
}

const GLOBAL_VALUED: [&str; 3] = ["--format", "--out", "--threads"];

/// Splices config entries in as flags right after the subcommand, so that
/// later flags on the command line override them.
fn expand_config(argv: &[String]) -> Result<Vec<String>> {
    let mut rest: Vec<String> = Vec::new();
    let mut config: Option<PathBuf> = None;
    let mut iter = argv.iter().skip(1);
    while let Some(a) = iter.next() {
        if a == "--config" {
            let p = iter.next().ok_or_else(|| Error::InvalidInput("--config needs a path".into()))?;
            config = Some(PathBuf::from(p));
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a.clone());
        }
    }
    let prog = argv.first().cloned().unwrap_or_else(|| "pairlab".into());
    let Some(path) = config else {
        return Ok(std::iter::once(prog).chain(rest).collect());
    };
    let (command, entries) = read_config(&path)?;
    let flags: Vec<String> = entries.into_iter().flat_map(|(k, v)| [format!("--{}", k.replace('_', "-")), v]).collect();
    let sub_pos = subcommand_position(&rest);
    let mut out = vec![prog];
    match (sub_pos, command) {
        (Some(i), _) => {
            out.extend(rest[..=i].iter().cloned());
            out.extend(flags);
            out.extend(rest[i + 1..].iter().cloned());
        }
        (None, Some(cmd)) => {
            out.push(cmd);
            out.extend(flags);
            out.extend(rest);
        }
        (None, None) => return Err(Error::InvalidInput("no subcommand given and none in the config".into())),
    }
    Ok(out)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(t) = flag {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map(Some).map_err(|_| Error::InvalidInput(format!("{THREADS_ENV}={v} is not a count"))),
        _ => Ok(None),
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        2
    } else {
        1
    }
}

/// Runs one invocation; `argv[0]` is the program name.
pub fn dispatch(argv: &[String]) -> Outcome {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => return Outcome::fail(exit_code(&e), e),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => Outcome { code: 0, stdout: text, stderr: String::new() },
                _ => Outcome { code: 2, stdout: String::new(), stderr: text },
            };
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => return Outcome::fail(2, e),
    };
    let mut config = cli.command.config();
    if let Value::Object(m) = &mut config {
        m.insert("format".into(), to_value(&cli.format));
    }
    let work = || run(&cli.command).and_then(|out| render(cli.command.name(), &config, out, cli.format));
    let result = match threads {
        Some(0) => return Outcome::fail(2, "--threads must be positive"),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(work),
            Err(e) => return Outcome::fail(1, e),
        },
        None => work(),
    };
    match result {
        Ok(text) => match &cli.out {
            Some(path) => match std::fs::write(path, &text) {
                Ok(()) => Outcome { code: 0, stdout: String::new(), stderr: String::new() },
                Err(e) => Outcome::fail(1, format!("cannot write {}: {e}", path.display())),
            },
            None => Outcome { code: 0, stdout: text, stderr: String::new() },
        },
        Err(e) => Outcome::fail(exit_code(&e), e),
    }
}
