//! Python bindings: workspaces, editing commands, interpretation, Hausdorff
//! distance, model fitting and synthesis.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyModule;

use turtle_synth::engine::{self, SynthesisRequest};
use turtle_synth::{
    enumerate_commands, fit_bigram as fit_bigram_table, fit_lambdas as fit_lambda_pair, hausdorff as hausdorff_dist,
    hausdorff_below as hausdorff_below_threshold, interpret, parse_commands, semantically_equal, Algorithm,
    CommandModel, EditCommand, Point, RenderConfig,
};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn points(v: Vec<(f64, f64)>) -> Vec<Point> {
    v.into_iter().map(|(x, y)| Point::new(x, y)).collect()
}

fn tuples(v: &[Point]) -> Vec<(f64, f64)> {
    v.iter().map(|p| (p.x, p.y)).collect()
}

fn parse_all(commands: &[String]) -> PyResult<Vec<EditCommand>> {
    commands
        .iter()
        .map(|c| c.parse::<EditCommand>().map_err(value_error))
        .collect()
}

fn render_config(move_length: f64, sample_step: f64) -> PyResult<RenderConfig> {
    if !(move_length > 0.0 && sample_step > 0.0 && sample_step <= move_length) {
        return Err(PyValueError::new_err("need 0 < sample_step <= move_length"));
    }
    Ok(RenderConfig {
        move_length,
        sample_step,
    })
}

/// A turtle workspace built by replaying editor commands.
#[pyclass(name = "Workspace", module = "turtle_synth_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyWorkspace {
    inner: turtle_synth::Workspace,
    commands: Vec<EditCommand>,
}

#[pymethods]
impl PyWorkspace {
    #[new]
    #[pyo3(signature = (commands = Vec::new()))]
    fn new(commands: Vec<String>) -> PyResult<Self> {
        let parsed = parse_all(&commands)?;
        let inner = turtle_synth::replay(&parsed).map_err(value_error)?;
        Ok(PyWorkspace {
            inner,
            commands: parsed,
        })
    }

    /// Parse a program text with one command per line.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let parsed = parse_commands(text).map_err(|(line, e)| value_error(format!("line {line}: {e}")))?;
        let inner = turtle_synth::replay(&parsed).map_err(value_error)?;
        Ok(PyWorkspace {
            inner,
            commands: parsed,
        })
    }

    /// A new workspace with one more command applied.
    fn apply(&self, command: &str) -> PyResult<Self> {
        let c: EditCommand = command.parse().map_err(value_error)?;
        let inner = self.inner.apply(&c).map_err(value_error)?;
        let mut commands = self.commands.clone();
        commands.push(c);
        Ok(PyWorkspace { inner, commands })
    }

    /// Every feasible command, in canonical order.
    fn successors(&self) -> Vec<String> {
        enumerate_commands(&self.inner).iter().map(|c| c.to_string()).collect()
    }

    #[getter]
    fn commands(&self) -> Vec<String> {
        self.commands.iter().map(|c| c.to_string()).collect()
    }

    /// Structural listing as JSON: one list per root chain.
    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner.view()).expect("serialisable view")
    }

    #[pyo3(signature = (move_length = 50.0, sample_step = 5.0))]
    fn interpret(&self, move_length: f64, sample_step: f64) -> PyResult<Vec<(f64, f64)>> {
        Ok(tuples(
            &interpret(&self.inner, &render_config(move_length, sample_step)?).points,
        ))
    }

    /// Whether both workspaces draw the same picture.
    fn draws_like(&self, other: &PyWorkspace) -> bool {
        semantically_equal(&self.inner, &other.inner, &RenderConfig::default())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Workspace({} blocks, {} commands)",
            self.inner.len(),
            self.commands.len()
        )
    }
}

/// Symmetric Hausdorff distance between two point lists.
#[pyfunction]
fn hausdorff(x: Vec<(f64, f64)>, y: Vec<(f64, f64)>) -> PyResult<f64> {
    hausdorff_dist(&points(x), &points(y)).map_err(value_error)
}

/// Whether the Hausdorff distance is strictly below `alpha`.
#[pyfunction]
fn hausdorff_below(x: Vec<(f64, f64)>, y: Vec<(f64, f64)>, alpha: f64) -> PyResult<bool> {
    hausdorff_below_threshold(&points(x), &points(y), alpha).map_err(value_error)
}

/// Smoothed tag transition table: six rows (start, get, remove, connect,
/// change, separate) of five probabilities.
#[pyfunction]
fn fit_bigram(sequences: Vec<Vec<String>>) -> PyResult<Vec<Vec<f64>>> {
    let parsed: Vec<Vec<EditCommand>> = sequences.iter().map(|s| parse_all(s)).collect::<PyResult<_>>()?;
    Ok(fit_bigram_table(&parsed).rows().iter().map(|r| r.to_vec()).collect())
}

/// `(lambda_last, lambda_next_to_last)` estimated from command sequences.
#[pyfunction]
fn fit_lambdas(sequences: Vec<Vec<String>>) -> PyResult<(f64, f64)> {
    let parsed: Vec<Vec<EditCommand>> = sequences.iter().map(|s| parse_all(s)).collect::<PyResult<_>>()?;
    let est = fit_lambda_pair(&parsed);
    Ok((est.lambda_last, est.lambda_next_to_last))
}

/// Run a synthesis and return the response as a JSON string (the same
/// document the CLI and HTTP service produce).
#[pyfunction]
#[pyo3(signature = (commands, trajectory, algorithm = "idps", budget = 50_000, cost = 6, seed = 0, model_json = None))]
#[allow(clippy::too_many_arguments)]
fn synthesize(
    py: Python<'_>,
    commands: Vec<String>,
    trajectory: Vec<(f64, f64)>,
    algorithm: &str,
    budget: usize,
    cost: usize,
    seed: u64,
    model_json: Option<&str>,
) -> PyResult<String> {
    let algorithm: Algorithm = algorithm.parse().map_err(value_error)?;
    let model = match model_json {
        Some(text) => {
            let file: turtle_synth::models::ModelFile = serde_json::from_str(text).map_err(value_error)?;
            CommandModel::try_from(file).map_err(value_error)?
        }
        None => CommandModel::default(),
    };
    let req = SynthesisRequest {
        commands,
        trajectory: points(trajectory),
        algorithm,
        budget,
        cost,
        seed,
        move_length: RenderConfig::default().move_length,
        sample_step: RenderConfig::default().sample_step,
    };
    let prepared = engine::prepare(&req).map_err(value_error)?;
    let resp = py.detach(|| engine::run_prepared(&prepared, &model, 1));
    Ok(serde_json::to_string(&resp).expect("serialisable response"))
}

#[pymodule]
fn turtle_synth_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWorkspace>()?;
    m.add_function(wrap_pyfunction!(hausdorff, m)?)?;
    m.add_function(wrap_pyfunction!(hausdorff_below, m)?)?;
    m.add_function(wrap_pyfunction!(fit_bigram, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lambdas, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    Ok(())
}
