//! Python bindings: networks, certificates, attacks and the experiment
//! subcommands.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::stablenet as sn;
use sn::attacks::{pgd_l2, AttackConfig};
use sn::blocks::{jacobian_norm_probe, load_checkpoint, save_checkpoint};
use sn::config::Configurable;
use sn::experiments::{inverse, lyapunov, oscillator, robust, swissroll, verify};
use sn::invprob::{build_invnet, tikhonov_lipschitz, ForwardModel};
use sn::numkit::{power_method, spectral_norm_oracle};
use sn::{Error, Matrix, Vector};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::Parse(_) | Error::Format { .. } => PyValueError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(to_py)
}

/// A feed-forward network of stability-aware blocks.
#[pyclass(name = "Network", module = "stablenet")]
struct PyNetwork {
    inner: sn::blocks::Network,
}

#[pymethods]
impl PyNetwork {
    /// Untrained InvNet: lift, `n_blocks` non-expansive blocks, project and a
    /// scale clamped to the budget.
    #[staticmethod]
    #[pyo3(signature = (lipschitz, n_blocks=5, lift_dim=10, seed=0))]
    fn invnet(lipschitz: f64, n_blocks: usize, lift_dim: usize, seed: u64) -> PyResult<Self> {
        let mut rng = sn::rng::seeded(seed);
        Ok(PyNetwork { inner: build_invnet(&mut rng, lipschitz, n_blocks, lift_dim).map_err(to_py)? })
    }

    /// Untrained Swiss-roll classifier (`hnn`, `resnet` or `mlp`).
    #[staticmethod]
    #[pyo3(signature = (arch="hnn", layers=12, seed=0))]
    fn swissroll_classifier(arch: &str, layers: usize, seed: u64) -> PyResult<Self> {
        let cfg = swissroll::SwissRollConfig {
            arch: swissroll::Architecture::parse(arch).map_err(to_py)?,
            layers,
            seed,
            ..Default::default()
        };
        Ok(PyNetwork { inner: swissroll::build_classifier(&cfg).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyNetwork { inner: load_checkpoint(&path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.inner, &path).map_err(to_py)
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.forward(&Vector::from(x)).map_err(to_py)?.into_vec())
    }

    /// Product of per-block Lipschitz bounds.
    fn lipschitz_bound(&self) -> PyResult<f64> {
        sn::stability::composed_lipschitz_bound(&self.inner).map_err(to_py)
    }

    /// Spectral norm of the input-output Jacobian at `x`.
    fn jacobian_norm(&self, x: Vec<f64>) -> PyResult<f64> {
        jacobian_norm_probe(&self.inner, &Vector::from(x), 0, self.inner.len()).map_err(to_py)
    }

    fn step_counts(&self) -> Vec<usize> {
        self.inner.step_counts()
    }

    fn block_kinds(&self) -> Vec<&'static str> {
        self.inner.blocks().iter().map(|b| b.kind()).collect()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    #[getter]
    fn lipschitz_budget(&self) -> Option<f64> {
        self.inner.lipschitz_budget
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Network({})", self.block_kinds().join(", "))
    }
}

/// Power-method estimate of the spectral norm.
#[pyfunction]
#[pyo3(signature = (rows, iterations=100, seed=0))]
fn spectral_norm(rows: Vec<Vec<f64>>, iterations: usize, seed: u64) -> PyResult<f64> {
    let a = matrix(rows)?;
    let u0 = sn::rng::normal_vector(&mut sn::rng::seeded(seed), a.cols());
    Ok(power_method(&a, &u0, iterations).map_err(to_py)?.norm)
}

/// Spectral norm from a Jacobi eigensolve of `AᵀA`.
#[pyfunction]
fn spectral_norm_exact(rows: Vec<Vec<f64>>) -> PyResult<f64> {
    spectral_norm_oracle(&matrix(rows)?).map_err(to_py)
}

/// `(class, margin)` of a logit vector.
#[pyfunction]
fn margin(logits: Vec<f64>) -> PyResult<(usize, f64)> {
    sn::stability::margin(&Vector::from(logits)).map_err(to_py)
}

/// `(class, margin, radius)` with radius `margin / 2L`.
#[pyfunction]
fn certified_radius(net: &PyNetwork, x: Vec<f64>, lipschitz: f64) -> PyResult<(usize, f64, f64)> {
    let c = sn::stability::certified_radius(&net.inner, &Vector::from(x), lipschitz).map_err(to_py)?;
    Ok((c.predicted_class, c.margin, c.radius))
}

/// ℓ²-PGD adversarial point for `(x, label)`.
#[pyfunction]
#[pyo3(signature = (net, x, label, epsilon, n_iter=100))]
fn pgd_attack(net: &PyNetwork, x: Vec<f64>, label: usize, epsilon: f64, n_iter: usize) -> PyResult<Vec<f64>> {
    let cfg = AttackConfig::new(epsilon, n_iter);
    Ok(pgd_l2(&net.inner, &Vector::from(x), label, &cfg).map_err(to_py)?.point.into_vec())
}

/// Lipschitz constant of the Tikhonov reconstruction map.
#[pyfunction]
#[pyo3(signature = (tau, epsilon=0.25))]
fn tikhonov_lipschitz_constant(tau: f64, epsilon: f64) -> PyResult<f64> {
    let model = ForwardModel::new(epsilon, 0.0).map_err(to_py)?;
    Ok(tikhonov_lipschitz(&model, tau))
}

#[pyfunction]
#[pyo3(signature = (epsilon=0.25))]
fn condition_number(epsilon: f64) -> PyResult<f64> {
    Ok(ForwardModel::new(epsilon, 0.0).map_err(to_py)?.condition_number())
}

/// `(euler_energy, symplectic_energy)` series on the harmonic oscillator.
#[pyfunction]
fn oscillator_energies(h: f64, steps: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let cfg = oscillator::OscillatorConfig { h, steps, ..Default::default() };
    let run = oscillator::run(&cfg).map_err(to_py)?;
    let energy = |t: &sn::ode::Trajectory| t.states.iter().map(sn::ode::oscillator_energy).collect();
    Ok((energy(&run.euler), energy(&run.symplectic)))
}

/// `(inputs, labels)` of the embedded Swiss roll.
#[pyfunction]
#[pyo3(signature = (n, noise=0.05, seed=0))]
fn swiss_roll(n: usize, noise: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let ds = sn::data::swiss_roll(n, noise, seed);
    (ds.inputs.into_iter().map(Vector::into_vec).collect(), ds.labels)
}

fn configured<C: Configurable + Default>(config: Option<BTreeMap<String, String>>) -> PyResult<C> {
    let mut cfg = C::default();
    for (k, v) in config.unwrap_or_default() {
        cfg.set(&k, &v).map_err(to_py)?;
    }
    Ok(cfg)
}

/// Runs a CLI subcommand into `out_dir` with `key=value` overrides and
/// returns the names of the files written. `verify` additionally needs
/// the `checkpoint` key.
#[pyfunction]
#[pyo3(signature = (subcommand, out_dir, config=None))]
fn run_command(
    subcommand: &str,
    out_dir: PathBuf,
    config: Option<BTreeMap<String, String>>,
) -> PyResult<Vec<String>> {
    let manifest = match subcommand {
        "oscillator" => sn::cli::cmd_oscillator(&configured::<oscillator::OscillatorConfig>(config)?, &out_dir),
        "swissroll" => sn::cli::cmd_swissroll(&configured::<swissroll::SwissRollConfig>(config)?, &out_dir),
        "inverse" => sn::cli::cmd_inverse(&configured::<inverse::InverseConfig>(config)?, &out_dir),
        "robust" => sn::cli::cmd_robust(&configured::<robust::RobustConfig>(config)?, &out_dir),
        "lyapunov" => sn::cli::cmd_lyapunov(&configured::<lyapunov::LyapunovConfig>(config)?, &out_dir),
        "verify" => {
            let mut config = config.unwrap_or_default();
            let checkpoint = config
                .remove("checkpoint")
                .ok_or_else(|| PyValueError::new_err("verify needs a checkpoint entry"))?;
            let inputs = config.remove("inputs").map(PathBuf::from);
            let cfg = configured::<verify::VerifyConfig>(Some(config))?;
            sn::cli::cmd_verify(checkpoint.as_ref(), inputs.as_deref(), &cfg, &out_dir)
        }
        other => return Err(PyValueError::new_err(format!("unknown subcommand {other:?}"))),
    };
    Ok(manifest.map_err(to_py)?.outputs)
}

#[pymodule]
#[pyo3(name = "stablenet")]
fn stablenet_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(spectral_norm, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_norm_exact, m)?)?;
    m.add_function(wrap_pyfunction!(margin, m)?)?;
    m.add_function(wrap_pyfunction!(certified_radius, m)?)?;
    m.add_function(wrap_pyfunction!(pgd_attack, m)?)?;
    m.add_function(wrap_pyfunction!(tikhonov_lipschitz_constant, m)?)?;
    m.add_function(wrap_pyfunction!(condition_number, m)?)?;
    m.add_function(wrap_pyfunction!(oscillator_energies, m)?)?;
    m.add_function(wrap_pyfunction!(swiss_roll, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
