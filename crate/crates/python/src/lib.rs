//! Python bindings: latents, environments, tasks, IPLW and AUCCESS.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use simground::exploration::{normalise_sensitivities, StrategyKind, StrategySpec};
use simground::experiment::read_surface;
use simground::grounding::CemConfig;
use simground::physics::{EnvironmentSpec, LatentFactors as CoreLatents};
use simground::tasks::{self, Family, Scale, Split, TaskSpec};
use simground::transfer::{self, AuccessReport};
use simground::workflow::{run_iplw as core_run_iplw, IplwConfig, DEFAULT_CANDIDATE_POOL};

fn err(e: simground::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = simground::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

#[pyclass(name = "LatentFactors", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyLatents(CoreLatents);

#[pymethods]
impl PyLatents {
    #[new]
    fn new(density: f64, friction: f64, restitution: f64) -> PyResult<Self> {
        CoreLatents::new(density, friction, restitution).map(Self).map_err(err)
    }

    /// Ground-truth latents of a task family.
    #[staticmethod]
    fn truth(family: &str) -> PyResult<Self> {
        Ok(Self(parse::<Family>(family)?.true_latents()))
    }

    #[getter]
    fn density(&self) -> f64 {
        self.0.density
    }
    #[getter]
    fn friction(&self) -> f64 {
        self.0.friction
    }
    #[getter]
    fn restitution(&self) -> f64 {
        self.0.restitution
    }

    fn __repr__(&self) -> String {
        format!(
            "LatentFactors(density={}, friction={}, restitution={})",
            self.0.density, self.0.friction, self.0.restitution
        )
    }
}

#[pyclass(name = "Environment", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyEnv(EnvironmentSpec);

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (latents, damping = 1.0))]
    fn new(latents: PyLatents, damping: f64) -> PyResult<Self> {
        EnvironmentSpec::new(latents.0, damping).map(Self).map_err(err)
    }
    #[getter]
    fn damping(&self) -> f64 {
        self.0.damping
    }
    #[getter]
    fn latents(&self) -> PyLatents {
        PyLatents(self.0.latents)
    }
}

/// Summary of one rollout.
#[pyclass(name = "Outcome", frozen, get_all)]
pub struct PyOutcome {
    pub solved: bool,
    pub progress: f64,
    pub collisions: u32,
    pub rolling_steps: u32,
    pub steps: u32,
    pub frames: usize,
}

#[pyclass(name = "Task", frozen)]
pub struct PyTask(TaskSpec);

#[pymethods]
impl PyTask {
    #[new]
    #[pyo3(signature = (family, id, scale = "desk"))]
    fn new(family: &str, id: usize, scale: &str) -> PyResult<Self> {
        tasks::build_task(parse(family)?, id, parse(scale)?)
            .map(Self)
            .map_err(err)
    }
    #[getter]
    fn id(&self) -> usize {
        self.0.id
    }
    #[getter]
    fn family(&self) -> &'static str {
        self.0.family.as_str()
    }
    #[getter]
    fn split(&self) -> String {
        self.0.split.to_string()
    }
    fn action_space_size(&self) -> usize {
        self.0.action_space_size()
    }
    fn simulate(&self, action: usize, env: PyEnv) -> PyResult<PyOutcome> {
        let traj = self.0.simulate(action, &env.0).map_err(err)?;
        Ok(PyOutcome {
            solved: tasks::goal_achieved(&self.0, &traj),
            progress: tasks::progress_score(&self.0, &traj),
            collisions: traj.ball_collisions,
            rolling_steps: traj.total_rolling_steps(),
            steps: traj.steps,
            frames: traj.frames.len(),
        })
    }
    fn __repr__(&self) -> String {
        format!("Task({}, {})", self.0.family.as_str(), self.0.id)
    }
}

/// Task ids of a family, optionally restricted to one split.
#[pyfunction]
#[pyo3(signature = (family, split = None))]
fn task_ids(family: &str, split: Option<&str>) -> PyResult<Vec<usize>> {
    let family: Family = parse(family)?;
    let split: Option<Split> = split.map(parse).transpose()?;
    Ok((0..family.task_count())
        .filter(|&id| split.is_none_or(|s| family.split_of(id) == s))
        .collect())
}

/// Action-type selection probabilities from raw sensitivities.
#[pyfunction]
fn normalise(sensitivities: Vec<f64>) -> PyResult<Vec<f64>> {
    normalise_sensitivities(&sensitivities).map_err(err)
}

/// AUCCESS from per-task first-solve attempts (1-based, None if unsolved).
#[pyfunction]
fn auccess_from_first_solves(first_solve: Vec<Option<usize>>) -> PyResult<f64> {
    let ids = (0..first_solve.len()).collect();
    AuccessReport::from_first_solves(ids, first_solve)
        .map(|r| r.auccess)
        .map_err(err)
}

/// Runs IPLW against a damped copy of the family's true environment.
/// Returns the final estimate and the number of real rollouts spent.
#[pyfunction]
#[pyo3(signature = (family, strategy, seed = 50, rounds = 10, actions_per_round = 50,
                    real_damping = 0.8, surface = None, scale = "desk"))]
#[allow(clippy::too_many_arguments)]
fn run_iplw(
    py: Python<'_>,
    family: &str,
    strategy: &str,
    seed: u64,
    rounds: usize,
    actions_per_round: usize,
    real_damping: f64,
    surface: Option<std::path::PathBuf>,
    scale: &str,
) -> PyResult<(PyLatents, usize)> {
    let family: Family = parse(family)?;
    let scale: Scale = parse(scale)?;
    let strategy = match parse::<StrategyKind>(strategy)? {
        StrategyKind::Gradient => {
            let path = surface.ok_or_else(|| PyValueError::new_err("gradient needs a surface file"))?;
            StrategySpec::gradient(read_surface(&path).map_err(err)?)
        }
        k => StrategySpec::new(k),
    }
    .map_err(err)?;
    let truth = family.true_latents();
    let cfg = IplwConfig {
        strategy,
        actions_per_round,
        max_rounds: rounds,
        min_residual: 1e-3,
        candidate_pool: DEFAULT_CANDIDATE_POOL,
        cem: match scale {
            Scale::Desk => CemConfig::desk(family),
            Scale::Full => CemConfig::full(family),
        },
        real_env: EnvironmentSpec::new(truth, real_damping).map_err(err)?,
        sim_env: EnvironmentSpec::ideal(truth),
        seed,
    };
    let train = tasks::build_tasks(family, scale, Some(Split::Train)).map_err(err)?;
    let (theta, log) = py
        .detach(|| core_run_iplw(&train, &cfg))
        .map_err(err)?;
    Ok((PyLatents(theta), log.real_rollouts))
}

/// Jump-start AUCCESS of a ranker trained in the ideal simulator under
/// `theta`, judged against the true environment at `real_damping`.
#[pyfunction]
#[pyo3(signature = (family, theta, real_damping = 0.8, split = "test", scale = "desk"))]
fn jump_start(
    py: Python<'_>,
    family: &str,
    theta: PyLatents,
    real_damping: f64,
    split: &str,
    scale: &str,
) -> PyResult<f64> {
    let family: Family = parse(family)?;
    let tasks = tasks::build_tasks(family, parse(scale)?, Some(parse(split)?)).map_err(err)?;
    let real = EnvironmentSpec::new(family.true_latents(), real_damping).map_err(err)?;
    py.detach(|| {
        let ranker = transfer::train_sim_ranker(&theta.0, &tasks);
        transfer::auccess(&ranker, &real, &tasks)
    })
    .map(|r| r.auccess)
    .map_err(err)
}

#[pymodule]
fn simground_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLatents>()?;
    m.add_class::<PyEnv>()?;
    m.add_class::<PyTask>()?;
    m.add_class::<PyOutcome>()?;
    m.add_function(wrap_pyfunction!(task_ids, m)?)?;
    m.add_function(wrap_pyfunction!(normalise, m)?)?;
    m.add_function(wrap_pyfunction!(auccess_from_first_solves, m)?)?;
    m.add_function(wrap_pyfunction!(run_iplw, m)?)?;
    m.add_function(wrap_pyfunction!(jump_start, m)?)?;
    Ok(())
}
