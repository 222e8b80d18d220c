//! Python bindings: form factors, self-energies, decay poles, survival
//! amplitudes and the Zeno/inverse-Zeno analysis.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use zeno_core::amplitude::{survival_closed_form_lorentzian, SpectralOptions};
use zeno_core::formfactor::FormFactor as CoreFormFactor;
use zeno_core::model::{DecayModel as CoreModel, SurvivalModel};
use zeno_core::resolvent::{self, PoleData};
use zeno_core::selfenergy::{self, Sheet};
use zeno_core::zeno;
use zeno_core::Error;

create_exception!(zeno_py, NumericalError, PyException, "A computation failed to reach its accuracy target.");
create_exception!(zeno_py, NoDecayError, PyException, "The level does not decay.");

fn to_py(e: Error) -> PyErr {
    let msg = format!("[{}] {e}", e.kind());
    match e {
        Error::InvalidParameter(_) | Error::OutOfRange { .. } | Error::OnCut { .. } | Error::ContinuationUnsupported(_) => {
            PyValueError::new_err(msg)
        }
        Error::NoDecay(_) | Error::InfiniteZenoTime => NoDecayError::new_err(msg),
        _ => NumericalError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for zeno_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(frozen, skip_from_py_object, module = "zeno_py")]
#[derive(Clone)]
struct FormFactor {
    inner: CoreFormFactor,
}

#[pymethods]
impl FormFactor {
    #[staticmethod]
    fn lorentzian(lam: f64, bandwidth: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreFormFactor::lorentzian(lam, bandwidth).py_err()?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (lam, bandwidth, p, q, threshold = 0.0))]
    fn threshold_power_law(lam: f64, bandwidth: f64, p: f64, q: f64, threshold: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreFormFactor::threshold_power_law(lam, bandwidth, threshold, p, q).py_err()?,
        })
    }

    /// `samples` is a sequence of `(omega, g2)` pairs with increasing omega.
    #[staticmethod]
    fn tabulated(bandwidth: f64, samples: Vec<(f64, f64)>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreFormFactor::tabulated(bandwidth, &samples).py_err()?,
        })
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family().name()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda()
    }

    #[getter]
    fn bandwidth(&self) -> f64 {
        self.inner.bandwidth()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold()
    }

    fn support(&self) -> (f64, f64) {
        self.inner.support()
    }

    fn g2(&self, omega: f64) -> PyResult<f64> {
        self.inner.coupling_strength_squared(omega).py_err()
    }

    fn zeno_time(&self) -> PyResult<f64> {
        self.inner.zeno_time().py_err()
    }

    fn __repr__(&self) -> String {
        format!(
            "FormFactor(family={}, lam={}, bandwidth={})",
            self.family(),
            self.inner.lambda(),
            self.inner.bandwidth()
        )
    }
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "zeno_py")]
#[derive(Clone)]
struct Pole {
    e_pole: Complex64,
    shift: f64,
    gamma0: f64,
    z_renorm: f64,
    residue: Complex64,
    residual: f64,
    /// `(energy, weight)` of real poles outside the continuum.
    bound_states: Vec<(f64, f64)>,
}

impl From<&PoleData> for Pole {
    fn from(p: &PoleData) -> Self {
        Self {
            e_pole: p.e_pole,
            shift: p.shift_delta,
            gamma0: p.gamma0,
            z_renorm: p.z_renorm,
            residue: p.residue,
            residual: p.residual,
            bound_states: p.bound_states.iter().map(|b| (b.energy, b.weight)).collect(),
        }
    }
}

#[pymethods]
impl Pole {
    fn __repr__(&self) -> String {
        format!("Pole(e_pole={}, gamma0={}, z_renorm={})", self.e_pole, self.gamma0, self.z_renorm)
    }
}

fn parse_sheet(sheet: &str) -> PyResult<Sheet> {
    match sheet {
        "first" => Ok(Sheet::First),
        "second" => Ok(Sheet::Second),
        other => Err(PyValueError::new_err(format!("sheet must be 'first' or 'second', got {other:?}"))),
    }
}

/// `(Σ(E), Σ'(E))` on the requested sheet.
#[pyfunction]
#[pyo3(signature = (ff, e, sheet = "first"))]
fn self_energy(ff: &FormFactor, e: Complex64, sheet: &str) -> PyResult<(Complex64, Complex64)> {
    let v = selfenergy::self_energy(&ff.inner, e, parse_sheet(sheet)?).py_err()?;
    Ok((v.value, v.derivative))
}

#[pyfunction]
fn find_pole(ff: &FormFactor, omega_a: f64) -> PyResult<Pole> {
    Ok(Pole::from(&resolvent::find_pole(&ff.inner, omega_a).py_err()?))
}

#[pyfunction]
fn golden_rule_rate(ff: &FormFactor, omega_a: f64) -> f64 {
    resolvent::golden_rule_rate(&ff.inner, omega_a).rate
}

/// Closed-form Lorentzian amplitudes on a time grid.
#[pyfunction]
fn lorentzian_amplitudes(lam: f64, bandwidth: f64, omega_a: f64, times: Vec<f64>) -> PyResult<Vec<Complex64>> {
    Ok(survival_closed_form_lorentzian(lam, bandwidth, omega_a, &times).py_err()?.amplitudes)
}

#[pyfunction]
fn repeated_survival(p: f64, n: u64) -> PyResult<f64> {
    zeno::repeated_survival(p, n).py_err()
}

#[pyclass(frozen, module = "zeno_py")]
struct DecayModel {
    inner: CoreModel,
}

#[pymethods]
impl DecayModel {
    /// Closed form for Lorentzian form factors, spectral integral otherwise.
    /// `tolerance` is the absolute accuracy target of spectral amplitudes.
    #[new]
    #[pyo3(signature = (ff, omega_a, tolerance = None))]
    fn new(py: Python<'_>, ff: &FormFactor, omega_a: f64, tolerance: Option<f64>) -> PyResult<Self> {
        let mut opts = SpectralOptions::default();
        if let Some(t) = tolerance {
            opts.tolerance = t;
        }
        let ff = ff.inner.clone();
        let inner = py.detach(|| CoreModel::with_options(&ff, omega_a, opts)).py_err()?;
        Ok(Self { inner })
    }

    fn amplitude(&self, t: f64) -> PyResult<Complex64> {
        self.inner.amplitude(t).py_err()
    }

    fn survival(&self, t: f64) -> PyResult<f64> {
        self.inner.survival(t).py_err()
    }

    fn survivals(&self, py: Python<'_>, times: Vec<f64>) -> PyResult<Vec<f64>> {
        py.detach(|| times.iter().map(|&t| self.inner.survival(t)).collect::<zeno_core::Result<_>>())
            .py_err()
    }

    #[getter]
    fn pole(&self) -> PyResult<Pole> {
        Ok(Pole::from(self.inner.pole().py_err()?))
    }

    fn zeno_time(&self) -> PyResult<f64> {
        self.inner.zeno_time().py_err()
    }

    fn effective_rate(&self, tau: f64) -> PyResult<f64> {
        zeno::effective_rate(&self.inner, tau).py_err()
    }

    fn rate_curve(&self, py: Python<'_>, taus: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(py.detach(|| zeno::effective_rate_curve(&self.inner, &taus)).py_err()?.gammas)
    }

    /// `"zeno"`, `"inverse_zeno"` or `"natural"`.
    fn classify(&self, tau: f64) -> PyResult<&'static str> {
        Ok(zeno::classify_regime(&self.inner, tau).py_err()?.name())
    }

    #[pyo3(signature = (tau_max = None, grid_points = zeno::DEFAULT_GRID_POINTS))]
    fn transition<'py>(&self, py: Python<'py>, tau_max: Option<f64>, grid_points: usize) -> PyResult<Bound<'py, PyDict>> {
        let r = py
            .detach(|| {
                let tau_max = match tau_max {
                    Some(t) => t,
                    None => zeno::default_tau_max(&self.inner)?,
                };
                zeno::find_transition_time(&self.inner, tau_max, grid_points)
            })
            .py_err()?;
        let d = PyDict::new(py);
        d.set_item("tau_star", r.tau_star)?;
        d.set_item("all_roots", r.all_roots)?;
        d.set_item("z_renorm", r.z_renorm)?;
        d.set_item("criterion_z_less_1", r.criterion_z_less_1)?;
        d.set_item("lorentzian_asymmetry_holds", r.lorentzian_asymmetry_holds)?;
        d.set_item("tau_max_searched", r.tau_max_searched)?;
        d.set_item("grid_points", r.grid_points)?;
        d.set_item("jump_time", r.jump_time)?;
        d.set_item("zeno_time", r.zeno_time)?;
        d.set_item("gamma0", r.gamma0)?;
        Ok(d)
    }

    fn existence_criteria<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = zeno::existence_criteria(&self.inner).py_err()?;
        let d = PyDict::new(py);
        d.set_item("z_less_1", c.z_less_1)?;
        d.set_item("asymmetry", c.asymmetry)?;
        d.set_item("near_boundary", c.near_boundary)?;
        d.set_item("z_renorm", c.z_renorm)?;
        Ok(d)
    }

    fn characteristic_scales<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = zeno::characteristic_scales(&self.inner).py_err()?;
        let d = PyDict::new(py);
        d.set_item("zeno_time", s.zeno_time)?;
        d.set_item("jump_time", s.jump_time)?;
        d.set_item("bandwidth_time", s.bandwidth_time)?;
        d.set_item("jump_to_bandwidth", s.jump_to_bandwidth)?;
        d.set_item("golden_rule_jump_time", s.golden_rule_jump_time)?;
        d.set_item("threshold_ratio", s.threshold_ratio)?;
        Ok(d)
    }
}

#[pymodule]
fn zeno_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<FormFactor>()?;
    m.add_class::<Pole>()?;
    m.add_class::<DecayModel>()?;
    m.add_function(wrap_pyfunction!(self_energy, m)?)?;
    m.add_function(wrap_pyfunction!(find_pole, m)?)?;
    m.add_function(wrap_pyfunction!(golden_rule_rate, m)?)?;
    m.add_function(wrap_pyfunction!(lorentzian_amplitudes, m)?)?;
    m.add_function(wrap_pyfunction!(repeated_survival, m)?)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add("NoDecayError", m.py().get_type::<NoDecayError>())?;
    Ok(())
}
