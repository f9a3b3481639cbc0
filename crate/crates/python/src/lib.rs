//! Python bindings. Tag streams cross the boundary as parallel lists of
//! channels and tick counts; reports come back as plain classes or text.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use triplet_lab::cli::{self, RunConfig};
use triplet_lab::gaussian::{self, VarianceSet};
use triplet_lab::pump::{self, FPScan, ScanSettings};
use triplet_lab::rng::SeedTree;
use triplet_lab::tags::{self, StatsOptions};
use triplet_lab::ttag::{TimeTag, TICK_NS};
use triplet_lab::witness::{self, BandwidthConvention, EnergyTimeInput, Provenance, WitnessReport};

fn err(e: triplet_lab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn stream(channels: &[u8], ticks: &[u64]) -> PyResult<Vec<TimeTag>> {
    if channels.len() != ticks.len() {
        return Err(PyValueError::new_err(format!(
            "channels ({}) and ticks ({}) differ in length",
            channels.len(),
            ticks.len()
        )));
    }
    Ok(channels
        .iter()
        .zip(ticks)
        .map(|(&c, &t)| TimeTag::new(c, t))
        .collect())
}

#[pyclass(name = "Witness", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyWitness(WitnessReport);

#[pymethods]
impl PyWitness {
    #[getter]
    fn classification(&self) -> String {
        self.0.classification.to_string()
    }
    #[getter]
    fn products(&self) -> [f64; 3] {
        self.0.product_values
    }
    #[getter]
    fn sums(&self) -> [f64; 3] {
        self.0.sum_values
    }
    #[getter]
    fn triple_sum(&self) -> f64 {
        self.0.triple_sum_value
    }
    #[getter]
    fn additive(&self) -> [f64; 3] {
        self.0.additive_vlf_values
    }
    fn to_text(&self) -> String {
        self.0.to_text()
    }
    fn __repr__(&self) -> String {
        format!(
            "Witness({}, sums={:?}, triple_sum={})",
            self.classification(),
            self.0.sum_values,
            self.0.triple_sum_value
        )
    }
}

#[pyclass(name = "Variances", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyVariances(VarianceSet);

#[pymethods]
impl PyVariances {
    /// Standard deviations of x2-x1, x3-x2, x3-x1.
    #[getter]
    fn dx(&self) -> [f64; 3] {
        self.0.dx()
    }
    #[getter]
    fn dpsum(&self) -> f64 {
        self.0.dpsum
    }
    fn __repr__(&self) -> String {
        format!("Variances(dx={:?}, dpsum={})", self.0.dx(), self.0.dpsum)
    }
}

/// Variances and witness of a Gaussian mixture given as state-file text,
/// or of a named example: "sqrt2", "sqrt6".
#[pyfunction]
fn gaussian_witness(state: &str) -> PyResult<(PyVariances, PyWitness)> {
    let mix = match state {
        "sqrt2" => gaussian::sqrt2_counterexample(),
        "sqrt6" => gaussian::sqrt6_counterexample(),
        text => gaussian::parse_state(text).map_err(err)?,
    };
    let (v, w) = cli::gaussian_witness(&mix).map_err(err)?;
    Ok((PyVariances(v), PyWitness(w)))
}

/// Witness from timing spreads (ns) and a pump bandwidth (MHz).
#[pyfunction]
#[pyo3(signature = (dt21, dt32, dt31, bandwidth_mhz, convention = "angular"))]
fn energy_time_witness(
    dt21: f64,
    dt32: f64,
    dt31: f64,
    bandwidth_mhz: f64,
    convention: &str,
) -> PyResult<PyWitness> {
    let convention = match convention {
        "angular" => BandwidthConvention::Angular,
        "direct" => BandwidthConvention::Direct,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown convention {other:?}, expected \"angular\" or \"direct\""
            )))
        }
    };
    let input = EnergyTimeInput {
        dt21,
        dt32,
        dt31,
        domega: convention.to_rad_per_ns(bandwidth_mhz),
        uncertainties: None,
        provenance: Provenance::Measured,
    };
    witness::evaluate_energy_time(&input)
        .map(PyWitness)
        .map_err(err)
}

/// Simulates a run from config text (TOML, empty for defaults).
/// Returns `(channels, ticks)`.
#[pyfunction]
#[pyo3(signature = (config = "", seed = None))]
fn simulate(config: &str, seed: Option<u64>) -> PyResult<(Vec<u8>, Vec<u64>)> {
    let mut cfg = RunConfig::parse(config).map_err(err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let sim = cli::run_simulation(&cfg).map_err(err)?;
    Ok(sim.tags.iter().map(|t| (t.channel, t.tick)).unzip())
}

/// Three-fold coincidences as `(t1, t2, t3)` tick tuples.
#[pyfunction]
#[pyo3(signature = (channels, ticks, window = tags::DEFAULT_WINDOW))]
fn find_triples(channels: Vec<u8>, ticks: Vec<u64>, window: u64) -> PyResult<Vec<(u64, u64, u64)>> {
    let s = stream(&channels, &ticks)?;
    let found = tags::find_triples(&s, window).map_err(err)?;
    Ok(found.iter().map(|e| (e.t1, e.t2, e.t3)).collect())
}

/// Timing spreads of a tag stream as `(dt, dt_err)` for 21, 32, 31 in ns.
#[pyfunction]
#[pyo3(signature = (channels, ticks, window = tags::DEFAULT_WINDOW, seed = 1))]
fn timing_stats(
    channels: Vec<u8>,
    ticks: Vec<u64>,
    window: u64,
    seed: u64,
) -> PyResult<[(f64, f64); 3]> {
    let s = stream(&channels, &ticks)?;
    let found = tags::find_triples(&s, window).map_err(err)?;
    let h = tags::histogram2d(&found, window);
    let opts = StatsOptions {
        tick_ns: TICK_NS,
        ..StatsOptions::default()
    };
    let t = tags::timing_stats(&h, &opts, &SeedTree::new(seed).child("analysis")).map_err(err)?;
    Ok([
        (t.dt21, t.dt21_err),
        (t.dt32, t.dt32_err),
        (t.dt31, t.dt31_err),
    ])
}

/// A simulated Fabry-Perot scan as `(offsets_mhz, intensities)`.
#[pyfunction]
#[pyo3(signature = (bandwidth_mhz, seed = 1))]
fn simulate_scan(bandwidth_mhz: f64, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let scan = pump::simulate_scan(bandwidth_mhz, &ScanSettings::default(), seed).map_err(err)?;
    Ok((scan.offsets_mhz, scan.intensities))
}

/// Source bandwidth (MHz) fitted to a scan.
#[pyfunction]
#[pyo3(signature = (offsets_mhz, intensities, instrument_width = ScanSettings::default().instrument_width))]
fn estimate_bandwidth(
    offsets_mhz: Vec<f64>,
    intensities: Vec<f64>,
    instrument_width: f64,
) -> PyResult<f64> {
    let scan = FPScan {
        offsets_mhz,
        intensities,
        timestamp: 0.0,
    };
    pump::estimate_bandwidth(&scan, instrument_width)
        .map(|e| e.bandwidth)
        .map_err(err)
}

/// Runs the reproduction sections (all when empty) and returns
/// `(passed, table)`.
#[pyfunction]
#[pyo3(signature = (seed = 1, sections = Vec::new()))]
fn reproduce(py: Python<'_>, seed: u64, sections: Vec<String>) -> PyResult<(bool, String)> {
    let r = py.detach(|| cli::reproduce(seed, &sections)).map_err(err)?;
    Ok((r.passed(), r.to_table()))
}

#[pymodule]
fn triplet_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWitness>()?;
    m.add_class::<PyVariances>()?;
    m.add("TICK_NS", TICK_NS)?;
    m.add_function(wrap_pyfunction!(gaussian_witness, m)?)?;
    m.add_function(wrap_pyfunction!(energy_time_witness, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(find_triples, m)?)?;
    m.add_function(wrap_pyfunction!(timing_stats, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_scan, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    Ok(())
}
