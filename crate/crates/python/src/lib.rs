//! Python bindings for the `mpspectra` core crate.
//!
//! Matrices cross the boundary as lists of rows, complex points as Python
//! `complex`, and structured reports as plain dicts.

use mpspectra::conditions::{self, FamilyKind, SweepSpec, TestMatrixFamily};
use mpspectra::nalgebra::{DMatrix, DVector};
use mpspectra::resolvent;
use mpspectra::sampling;
use mpspectra::{Complex64, ComplexPoint, Error, ModelKind, Seed};
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyMemoryError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(mpspectra_py, ConfigError, PyValueError);
create_exception!(mpspectra_py, DomainError, PyValueError);
create_exception!(mpspectra_py, NumericalError, PyArithmeticError);
create_exception!(mpspectra_py, ResourceError, PyMemoryError);

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Config(_) => ConfigError::new_err(msg),
        Error::Domain(_) => DomainError::new_err(msg),
        Error::Numerical { .. } => NumericalError::new_err(msg),
        Error::Resource(_) => ResourceError::new_err(msg),
        Error::Io(_) => pyo3::exceptions::PyOSError::new_err(msg),
    }
}

fn point(z: Complex64) -> PyResult<ComplexPoint> {
    ComplexPoint::new(z.re, z.im).map_err(py_err)
}

fn seed(value: u64, stream: u64) -> Seed {
    Seed { value, stream }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(DomainError::new_err(
            "matrix rows must all have the same length",
        ));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Serializes `value` and hands it to `json.loads`, so nested reports arrive
/// as ordinary Python containers.
fn to_python<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| ConfigError::new_err(format!("{what}: {e}")))
}

/// The Marchenko-Pastur law with ratio `c`.
#[pyclass(name = "MpLaw", frozen)]
struct PyMpLaw(mpspectra::MpLaw);

#[pymethods]
impl PyMpLaw {
    #[new]
    fn new(c: f64) -> PyResult<Self> {
        mpspectra::MpLaw::new(c).map(PyMpLaw).map_err(py_err)
    }

    #[getter]
    fn c(&self) -> f64 {
        self.0.ratio()
    }

    #[getter]
    fn lower_edge(&self) -> f64 {
        self.0.lower_edge()
    }

    #[getter]
    fn upper_edge(&self) -> f64 {
        self.0.upper_edge()
    }

    #[getter]
    fn atom(&self) -> f64 {
        self.0.atom()
    }

    fn support(&self) -> (f64, f64) {
        self.0.support()
    }

    fn density(&self, x: f64) -> f64 {
        self.0.density(x)
    }

    fn continuous_mass(&self) -> PyResult<f64> {
        self.0.continuous_mass().map_err(py_err)
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.0.cdf(x).map_err(py_err)
    }

    fn quantile(&self, u: f64) -> PyResult<f64> {
        self.0.quantile(u).map_err(py_err)
    }

    /// `s(z)`, the Stieltjes transform of the law, for `Im z > 0`.
    fn stieltjes(&self, z: Complex64) -> PyResult<Complex64> {
        Ok(self.0.stieltjes(point(z)?).map_err(py_err)?.s)
    }

    /// `S(z) = c s(z)`, the root of `z S^2 + (z - 1 + c) S + c = 0`.
    fn stieltjes_normalized(&self, z: Complex64) -> PyResult<Complex64> {
        Ok(self.0.stieltjes(point(z)?).map_err(py_err)?.normalized)
    }

    /// Boundary value of `s` on the real axis.
    fn stieltjes_real(&self, x: f64) -> PyResult<Complex64> {
        Ok(self.0.stieltjes_real(x).map_err(py_err)?.s)
    }

    fn __repr__(&self) -> String {
        format!("MpLaw(c={})", self.0.ratio())
    }
}

/// A column distribution in dimension `p`, e.g.
/// `ColumnModel("scalar_mixture", 100, base="iid_gaussian")`.
#[pyclass(name = "ColumnModel", frozen)]
struct PyColumnModel(mpspectra::ColumnModel);

fn simple_kind(name: &str) -> PyResult<ModelKind> {
    from_json(&format!(r#"{{"kind":"{name}"}}"#), "model kind")
}

#[pymethods]
impl PyColumnModel {
    #[new]
    #[pyo3(signature = (kind, p, *, q=None, coefficients=None, truncation=sampling::DEFAULT_FILTER_TRUNCATION, base=None))]
    fn new(
        kind: &str,
        p: usize,
        q: Option<f64>,
        coefficients: Option<Vec<f64>>,
        truncation: usize,
        base: Option<&str>,
    ) -> PyResult<Self> {
        let kind = match kind {
            "iid_sparse_spike" => ModelKind::IidSparseSpike { q },
            "linear_filter" => ModelKind::LinearFilter {
                coefficients,
                truncation,
            },
            "scalar_mixture" => ModelKind::ScalarMixture {
                base: Box::new(simple_kind(base.unwrap_or("iid_gaussian"))?),
            },
            other => simple_kind(other)?,
        };
        mpspectra::ColumnModel::new(kind, p)
            .map(PyColumnModel)
            .map_err(py_err)
    }

    /// Parses `{"kind": {...}, "p": ...}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        from_json(text, "column model").map(PyColumnModel)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().name()
    }

    #[getter]
    fn label(&self) -> String {
        self.0.kind().label()
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }

    #[getter]
    fn has_iid_entries(&self) -> bool {
        self.0.kind().has_iid_entries()
    }

    #[pyo3(signature = (seed, stream=0))]
    fn sample_column(&self, seed: u64, stream: u64) -> Vec<f64> {
        sampling::sample_column(&self.0, self::seed(seed, stream))
            .as_slice()
            .to_vec()
    }

    /// The `p x n` sample as a list of rows.
    #[pyo3(signature = (n, seed, stream=0))]
    fn sample_matrix(&self, n: usize, seed: u64, stream: u64) -> PyResult<Vec<Vec<f64>>> {
        let x = sampling::sample_matrix(&self.0, n, self::seed(seed, stream)).map_err(py_err)?;
        Ok(rows(&x))
    }

    /// Spectrum of `n^-1 X X^T` for a fresh sample, without copying `X` to Python.
    #[pyo3(signature = (n, seed, stream=0))]
    fn sample_spectrum(&self, n: usize, seed: u64, stream: u64) -> PyResult<PySpectrum> {
        let x = sampling::sample_matrix(&self.0, n, self::seed(seed, stream)).map_err(py_err)?;
        mpspectra::esd(&x).map(PySpectrum).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("ColumnModel({}, p={})", self.0.kind().label(), self.0.p())
    }
}

/// Eigenvalues of a sample covariance matrix together with its sample size.
#[pyclass(name = "Spectrum", frozen)]
struct PySpectrum(mpspectra::Spectrum);

#[pymethods]
impl PySpectrum {
    #[new]
    fn new(eigenvalues: Vec<f64>, n: usize) -> PyResult<Self> {
        mpspectra::Spectrum::from_eigenvalues(eigenvalues, n)
            .map(PySpectrum)
            .map_err(py_err)
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues().to_vec()
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn ratio(&self) -> f64 {
        self.0.ratio()
    }

    fn empirical_stieltjes(&self, z: Complex64) -> PyResult<Complex64> {
        Ok(self.0.empirical_stieltjes(point(z)?))
    }

    fn normalized_stieltjes(&self, z: Complex64) -> PyResult<Complex64> {
        Ok(self.0.normalized_stieltjes(point(z)?))
    }

    fn empirical_cdf(&self, x: f64) -> f64 {
        self.0.empirical_cdf(x)
    }

    fn ks_distance(&self, law: &PyMpLaw) -> PyResult<f64> {
        self.0.ks_distance(&law.0).map_err(py_err)
    }

    fn fixed_point_residual(&self, z: Complex64) -> PyResult<Complex64> {
        Ok(resolvent::fixed_point_residual(&self.0, point(z)?))
    }

    fn __len__(&self) -> usize {
        self.0.p()
    }

    fn __repr__(&self) -> String {
        format!("Spectrum(p={}, n={})", self.0.p(), self.0.n())
    }
}

/// Spectrum of `n^-1 X X^T` for a `p x n` matrix given as rows.
#[pyfunction]
fn esd(x: Vec<Vec<f64>>) -> PyResult<PySpectrum> {
    mpspectra::esd(&matrix(x)?).map(PySpectrum).map_err(py_err)
}

#[pyfunction]
fn quantile_spectrum(law: &PyMpLaw, p: usize, n: usize) -> PyResult<PySpectrum> {
    mpspectra::spectra::quantile_spectrum(&law.0, p, n)
        .map(PySpectrum)
        .map_err(py_err)
}

fn probe(c: Vec<Vec<f64>>, x: Vec<f64>, z: Complex64) -> PyResult<mpspectra::ResolventProbe> {
    mpspectra::ResolventProbe::new(matrix(c)?, DVector::from_vec(x), point(z)?).map_err(py_err)
}

/// The five resolvent bounds for a symmetric PSD `c`, vector `x` and point `z`.
#[pyfunction]
fn check_lemma1<'py>(
    py: Python<'py>,
    c: Vec<Vec<f64>>,
    x: Vec<f64>,
    z: Complex64,
) -> PyResult<Bound<'py, PyAny>> {
    to_python(py, &resolvent::check_lemma1(&probe(c, x, z)?))
}

#[pyfunction]
fn sherman_morrison_gap(c: Vec<Vec<f64>>, x: Vec<f64>, z: Complex64) -> PyResult<f64> {
    Ok(resolvent::sherman_morrison_gap(&probe(c, x, z)?))
}

/// `columns` holds `n + 1` vectors of equal length.
#[pyfunction]
fn trace_identity_residual(columns: Vec<Vec<f64>>, z: Complex64, n: usize) -> PyResult<f64> {
    let cols: Vec<DVector<f64>> = columns.into_iter().map(DVector::from_vec).collect();
    resolvent::trace_identity_residual(&cols, point(z)?, n).map_err(py_err)
}

fn estimate<'py>(
    py: Python<'py>,
    e: &mpspectra::stats::McEstimate,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean", e.mean)?;
    d.set_item("std_error", e.std_error)?;
    d.set_item("trials", e.trials)?;
    Ok(d)
}

/// Mean of `((x^T A x - tr A) / p)^2` over `trials` draws of `(x, A)`;
/// `family` is JSON such as `{"kind": "identity"}`.
#[pyfunction]
#[pyo3(signature = (model, trials, seed, family="{\"kind\":\"identity\"}"))]
fn quadform_deviation<'py>(
    py: Python<'py>,
    model: &PyColumnModel,
    trials: usize,
    seed: u64,
    family: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: FamilyKind = from_json(family, "test matrix family")?;
    let family = TestMatrixFamily::new(kind, model.0.p()).map_err(py_err)?;
    let e = conditions::quadform_deviation(&model.0, &family, trials, Seed::new(seed))
        .map_err(py_err)?;
    estimate(py, &e)
}

#[pyfunction]
#[pyo3(signature = (model, trials, seed, epsilon=0.5))]
fn lindeberg_statistic<'py>(
    py: Python<'py>,
    model: &PyColumnModel,
    trials: usize,
    seed: u64,
    epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = conditions::lindeberg_statistic(&model.0, epsilon, trials, Seed::new(seed))
        .map_err(py_err)?;
    let d = estimate(py, &r.monte_carlo)?;
    d.set_item("exact", r.exact)?;
    Ok(d)
}

/// One statistic swept over `p_grid`; returns the report as a dict with a
/// `verdict` entry for quadratic-form sweeps.
#[pyfunction]
#[pyo3(signature = (model_kind, p_grid, statistic, trials, seed, family="{\"kind\":\"identity\"}", epsilon=0.5, threshold=0.05))]
#[allow(clippy::too_many_arguments)]
fn condition_sweep<'py>(
    py: Python<'py>,
    model_kind: &str,
    p_grid: Vec<usize>,
    statistic: &str,
    trials: usize,
    seed: u64,
    family: &str,
    epsilon: f64,
    threshold: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = SweepSpec {
        model: from_json(model_kind, "model kind")?,
        p_grid,
        trials,
        seed: Seed::new(seed),
    };
    let report = match statistic {
        "quad_form_deviation" => spec.quadform_deviation(&from_json(family, "test matrix family")?),
        "lindeberg" => spec.lindeberg(epsilon),
        "weighted_squares" => spec.weighted_squares(),
        "off_diag_moment" => spec.offdiag_moment().map(|(r, _)| r),
        other => return Err(ConfigError::new_err(format!("unknown statistic {other:?}"))),
    }
    .map_err(py_err)?;
    let out = to_python(py, &report)?;
    if statistic == "quad_form_deviation" {
        let verdict = conditions::assess_concentration(&report, threshold);
        out.set_item("verdict", to_python(py, &verdict)?)?;
    }
    Ok(out)
}

#[pyfunction]
fn mp_support(c: f64) -> PyResult<(f64, f64)> {
    mpspectra::mp_law::mp_support(c).map_err(py_err)
}

#[pyfunction]
fn mp_density(x: f64, c: f64) -> PyResult<f64> {
    mpspectra::mp_law::mp_density(x, c).map_err(py_err)
}

#[pyfunction]
fn mp_atom(c: f64) -> PyResult<f64> {
    mpspectra::mp_law::mp_atom(c).map_err(py_err)
}

#[pyfunction]
fn mp_cdf(x: f64, c: f64) -> PyResult<f64> {
    mpspectra::mp_law::mp_cdf(x, c).map_err(py_err)
}

/// Returns `(s, S)` with `S = c s`.
#[pyfunction]
fn mp_stieltjes(z: Complex64, c: f64) -> PyResult<(Complex64, Complex64)> {
    let v = mpspectra::mp_law::mp_stieltjes(point(z)?, c).map_err(py_err)?;
    Ok((v.s, v.normalized))
}

#[pymodule]
fn mpspectra_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DomainError", py.get_type::<DomainError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add("ResourceError", py.get_type::<ResourceError>())?;
    m.add_class::<PyMpLaw>()?;
    m.add_class::<PyColumnModel>()?;
    m.add_class::<PySpectrum>()?;
    m.add_function(wrap_pyfunction!(esd, m)?)?;
    m.add_function(wrap_pyfunction!(quantile_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(check_lemma1, m)?)?;
    m.add_function(wrap_pyfunction!(sherman_morrison_gap, m)?)?;
    m.add_function(wrap_pyfunction!(trace_identity_residual, m)?)?;
    m.add_function(wrap_pyfunction!(quadform_deviation, m)?)?;
    m.add_function(wrap_pyfunction!(lindeberg_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(condition_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(mp_support, m)?)?;
    m.add_function(wrap_pyfunction!(mp_density, m)?)?;
    m.add_function(wrap_pyfunction!(mp_atom, m)?)?;
    m.add_function(wrap_pyfunction!(mp_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(mp_stieltjes, m)?)?;
    Ok(())
}
