//! Python bindings. Results come back as plain dicts with the same keys as
//! the CLI's JSON output.

use pairlab::arith::DEFAULT_BITS;
use pairlab::bourgain::{self, RandomSetParams};
use pairlab::energy::{self as energy_mod, EnergyAlgorithm};
use pairlab::fourier::{self, FourierCoefficients, GcdSumInput, PairRange};
use pairlab::{metric, paircorr, parse_alpha, Ratio, SequenceSpec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

fn err(e: pairlab::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any().unbind(),
            (None, Some(i)) => i.into_pyobject(py)?.into_any().unbind(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any().unbind()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

fn dict<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    to_py(py, &serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?)
}

fn ratio(s: &str) -> PyResult<Ratio> {
    s.parse().map_err(err)
}

/// A strictly increasing sequence of positive integers.
#[pyclass(name = "Sequence", frozen)]
struct PySequence {
    inner: pairlab::Sequence,
}

#[pymethods]
impl PySequence {
    /// Builds `N` terms of a family such as `"mono:2"` or `"ps:1:13/10"`.
    #[staticmethod]
    fn generate(spec: &str, n: usize) -> PyResult<Self> {
        let spec: SequenceSpec = spec.parse().map_err(err)?;
        Ok(PySequence { inner: pairlab::generate(&spec, n).map_err(err)? })
    }

    /// Builds a sequence from distinct positive integers in any order.
    #[staticmethod]
    fn from_set(values: Vec<u128>) -> PyResult<Self> {
        Ok(PySequence { inner: pairlab::Sequence::from_set(values).map_err(err)? })
    }

    /// Draws the random subset of `[KN, 2KN)` with density `1/K`.
    #[staticmethod]
    fn random_subset(n: u64, k: u64, seed: u64) -> PyResult<Self> {
        let params = RandomSetParams::new(n, k, seed).map_err(err)?;
        Ok(PySequence { inner: bourgain::sample_set(&params).map_err(err)?.sequence })
    }

    fn values(&self) -> Vec<u128> {
        self.inner.values().to_vec()
    }

    fn spec(&self) -> String {
        self.inner.spec().to_string()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Sequence({}, N={})", self.inner.spec(), self.inner.len())
    }
}

/// `R2([-s, s], alpha, N)`; `alpha` is `p/q`, a decimal or `random:<seed>`.
#[pyfunction]
#[pyo3(signature = (seq, alpha, s = "1", bits = DEFAULT_BITS))]
fn r2(py: Python<'_>, seq: &PySequence, alpha: &str, s: &str, bits: u32) -> PyResult<Py<PyAny>> {
    let alpha = parse_alpha(alpha, bits).map_err(err)?;
    dict(py, &paircorr::r2_sequence(&alpha, &seq.inner, ratio(s)?).map_err(err)?)
}

/// Number of distinct circular gaps of `{alpha a(x)}`.
#[pyfunction]
#[pyo3(signature = (seq, alpha, bits = DEFAULT_BITS))]
fn distinct_gap_count(seq: &PySequence, alpha: &str, bits: u32) -> PyResult<usize> {
    let alpha = parse_alpha(alpha, bits).map_err(err)?;
    Ok(paircorr::gap_profile(&paircorr::dilate(&alpha.alpha, &seq.inner)).map_err(err)?.distinct_gap_count)
}

/// Additive energy; `algorithm` is hash, convolution, oracle or auto.
#[pyfunction]
#[pyo3(signature = (seq, algorithm = "auto"))]
fn energy(py: Python<'_>, seq: &PySequence, algorithm: &str) -> PyResult<Py<PyAny>> {
    let algo: EnergyAlgorithm = algorithm.parse().map_err(err)?;
    dict(py, &energy_mod::energy(&seq.inner, algo).map_err(err)?)
}

/// Nonzero autocorrelation values `[(k, d(k))]` for `k > 0`.
#[pyfunction]
fn autocorrelation(seq: &PySequence) -> PyResult<Vec<(u128, u64)>> {
    Ok(energy_mod::autocorrelation(&seq.inner).map_err(err)?.positive().to_vec())
}

/// Slope of `log2 E` against `log2 N` over powers of two.
#[pyfunction]
#[pyo3(signature = (spec, ns, algorithm = "auto"))]
fn energy_scan(py: Python<'_>, spec: &str, ns: Vec<usize>, algorithm: &str) -> PyResult<Py<PyAny>> {
    let spec: SequenceSpec = spec.parse().map_err(err)?;
    dict(py, &energy_mod::energy_scan(&spec, &ns, algorithm.parse().map_err(err)?).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (seq, m, cap = energy_mod::DEFAULT_RZ_CAP))]
fn rz_solution_count(seq: &PySequence, m: u64, cap: u128) -> PyResult<u128> {
    energy_mod::rz_solution_count(&seq.inner, m, cap).map_err(err)
}

/// `sum b_k b_l gcd(m_k, m_l)/sqrt(m_k m_l)`, with uniform weights by default.
#[pyfunction]
#[pyo3(signature = (m, b = None))]
fn gcd_sum(m: Vec<u64>, b: Option<Vec<f64>>) -> PyResult<f64> {
    let input = match b {
        Some(b) => GcdSumInput::new(m, b),
        None => GcdSumInput::uniform(m),
    }
    .map_err(err)?;
    Ok(fourier::gcd_sum(&input))
}

#[pyfunction]
#[pyo3(signature = (m, kappa, b = None, pass_constant = 1.0))]
fn gcd_sum_bound_check(py: Python<'_>, m: Vec<u64>, kappa: f64, b: Option<Vec<f64>>, pass_constant: f64) -> PyResult<Py<PyAny>> {
    let input = match b {
        Some(b) => GcdSumInput::new(m, b),
        None => GcdSumInput::uniform(m),
    }
    .map_err(err)?;
    dict(py, &fourier::gcd_sum_bound_check(&input, kappa, pass_constant).map_err(err)?)
}

/// `c_k = sin(2 pi k s/N)/(pi k)`, `c_0 = 2s/N`.
#[pyfunction]
fn coefficient(s: &str, n: u64, k: i64) -> PyResult<f64> {
    Ok(FourierCoefficients::new(ratio(s)?, n).map_err(err)?.coefficient(k))
}

/// Sum of `|c_{n1} c_{n2}|` over `n1 v = n2 w`, all of it or dyadic shell `m`.
#[pyfunction]
#[pyo3(signature = (v, w, s, n, m = None))]
fn coefficient_pair_sum(v: i64, w: i64, s: &str, n: u64, m: Option<u32>) -> PyResult<f64> {
    let fc = FourierCoefficients::new(ratio(s)?, n).map_err(err)?;
    let range = m.map_or(PairRange::Full, PairRange::Dyadic);
    fourier::coefficient_pair_sum(v, w, &fc, range).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (v, w, s, n, m = None, pass_constant = 1.0))]
fn cnto_gcd_check(py: Python<'_>, v: i64, w: i64, s: &str, n: u64, m: Option<u32>, pass_constant: f64) -> PyResult<Py<PyAny>> {
    let fc = FourierCoefficients::new(ratio(s)?, n).map_err(err)?;
    let report = match m {
        None => fourier::cnto_gcd_check(v, w, &fc, pass_constant),
        Some(m) => fourier::cnto_gcd_dyadic_check(v, w, &fc, m, pass_constant),
    };
    dict(py, &report.map_err(err)?)
}

#[pyfunction]
fn regime_bounds_check(py: Python<'_>, v: i64, w: i64, h: i64, s: &str, n: u64) -> PyResult<Py<PyAny>> {
    let fc = FourierCoefficients::new(ratio(s)?, n).map_err(err)?;
    dict(py, &fourier::regime_bounds_check(v, w, h, &fc).map_err(err)?)
}

/// Monte Carlo mean and variance of `R2` over random `alpha`.
#[pyfunction]
#[pyo3(signature = (seq, s = "1", samples = 100, seed = 0, bits = DEFAULT_BITS))]
fn variance_estimate(py: Python<'_>, seq: &PySequence, s: &str, samples: u64, seed: u64, bits: u32) -> PyResult<Py<PyAny>> {
    dict(py, &metric::variance_estimate(&seq.inner, ratio(s)?, samples, seed, bits).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (seq, s = "1"))]
fn grid_mean_check(py: Python<'_>, seq: &PySequence, s: &str) -> PyResult<Py<PyAny>> {
    dict(py, &metric::grid_mean_check(&seq.inner, ratio(s)?).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (set, eps, samples = 100_000, seed = 0))]
fn measure_check(py: Python<'_>, set: Vec<u128>, eps: f64, samples: u64, seed: u64) -> PyResult<Py<PyAny>> {
    dict(py, &metric::measure_check(&set, eps, samples, seed).map_err(err)?)
}

#[pyfunction]
fn dimension_bound(py: Python<'_>, d: f64, eps: f64) -> PyResult<Py<PyAny>> {
    dict(py, &metric::dimension_bound(d, eps).map_err(err)?)
}

/// The three flatness properties of a random set.
#[pyfunction]
fn lemma6_check(py: Python<'_>, seq: &PySequence, n: u64, k: u64) -> PyResult<Py<PyAny>> {
    dict(py, &bourgain::lemma6_check(&seq.inner, n, k).map_err(err)?)
}

/// `R2([-1, 1], p/q, A)` for the random set `(N, K, seed)`, computed two ways.
#[pyfunction]
#[pyo3(signature = (n, k, seed, q = None, p = 1))]
fn blowup_experiment(py: Python<'_>, n: u64, k: u64, seed: u64, q: Option<u64>, p: i64) -> PyResult<Py<PyAny>> {
    let params = RandomSetParams::new(n, k, seed).map_err(err)?;
    let set = bourgain::sample_set(&params).map_err(err)?.sequence;
    dict(py, &bourgain::blowup_experiment(&set, &params, q.unwrap_or(n / (2 * k)), p).map_err(err)?)
}

#[pyfunction]
fn run_campaign(py: Python<'_>, schedule: Vec<(u64, u64)>, seeds: Vec<u64>) -> PyResult<Py<PyAny>> {
    dict(py, &bourgain::run_campaign(&schedule, &seeds).map_err(err)?)
}

/// Runs the command line in-process and returns `(exit_code, stdout, stderr)`.
#[pyfunction]
fn cli(args: Vec<String>) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("pairlab".to_string()).chain(args).collect();
    let out = pairlab::cli::dispatch(&argv);
    (out.code, out.stdout, out.stderr)
}

#[pymodule]
#[pyo3(name = "pairlab")]
fn pairlab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySequence>()?;
    m.add_function(wrap_pyfunction!(r2, m)?)?;
    m.add_function(wrap_pyfunction!(distinct_gap_count, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(autocorrelation, m)?)?;
    m.add_function(wrap_pyfunction!(energy_scan, m)?)?;
    m.add_function(wrap_pyfunction!(rz_solution_count, m)?)?;
    m.add_function(wrap_pyfunction!(gcd_sum, m)?)?;
    m.add_function(wrap_pyfunction!(gcd_sum_bound_check, m)?)?;
    m.add_function(wrap_pyfunction!(coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(coefficient_pair_sum, m)?)?;
    m.add_function(wrap_pyfunction!(cnto_gcd_check, m)?)?;
    m.add_function(wrap_pyfunction!(regime_bounds_check, m)?)?;
    m.add_function(wrap_pyfunction!(variance_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(grid_mean_check, m)?)?;
    m.add_function(wrap_pyfunction!(measure_check, m)?)?;
    m.add_function(wrap_pyfunction!(dimension_bound, m)?)?;
    m.add_function(wrap_pyfunction!(lemma6_check, m)?)?;
    m.add_function(wrap_pyfunction!(blowup_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
