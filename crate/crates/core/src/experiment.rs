//! Closed-loop runs of the online controller and its frozen-data baseline,
//! trace files, per-window metrics and the product benchmark.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::behavioral::{BehavioralModel, ConstraintBox, ProductKernel};
use crate::convolution::{predicted_flop_cost, TransformLength};
use crate::error::{Error, Result};
use crate::hankel::{is_persistently_exciting, BlockHankelView, PersistenceReport, Signal};
use crate::plant::{generate_random_system, DriftSpec, PlantModel, PlantSnapshot, ReferenceSchedule, SeedLineage};
use crate::rng::{counter_rng, STREAM_EXCITATION};
use crate::solver::{
    default_step_size, estimate_h_norm, online_step_with_residual, static_step_with_residual, Boxes,
    SaddleParams, SolverState, TrackingCost,
};

/// Attempts at drawing a persistently exciting excitation sequence.
pub const BOOTSTRAP_ATTEMPTS: usize = 10;

/// Power iterations used when the step size is chosen automatically.
pub const NORM_ITERATIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ControllerMode {
    /// Data windows slide with every applied input.
    #[default]
    #[serde(rename = "odeepc")]
    Online,
    /// Data windows stay at their bootstrap contents.
    #[serde(rename = "gradient-deepc")]
    Frozen,
}

impl ControllerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Online => "odeepc",
            Self::Frozen => "gradient-deepc",
        }
    }
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControllerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "odeepc" => Ok(Self::Online),
            "gradient-deepc" => Ok(Self::Frozen),
            other => Err(Error::Config(format!(
                "unknown mode `{other}`, expected odeepc or gradient-deepc"
            ))),
        }
    }
}

/// Which output sample is appended to `y_ini` at a control application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    /// The plant output.
    #[default]
    Measured,
    /// The solver's predicted `y_0`.
    Iterate,
}

/// Fixed step size, or one derived from a power-iteration estimate of `‖H‖₂`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepSize {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for StepSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Fixed(a) => s.serialize_f64(*a),
        }
    }
}

impl<'de> Deserialize<'de> for StepSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(a) if a > 0.0 && a.is_finite() => Ok(Self::Fixed(a)),
            Raw::Number(a) => Err(serde::de::Error::custom(format!("alpha must be positive, got {a}"))),
            Raw::Text(t) if t == "auto" => Ok(Self::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "alpha must be a positive number or \"auto\", got \"{t}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
    /// Every entry of `x₀`.
    pub initial_state: f64,
    pub drift_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub mode: ControllerMode,
    pub n_inner: usize,
    pub t_ini: usize,
    pub horizon: usize,
    pub kappa: usize,
    pub eps_g: f64,
    pub eps_nu: f64,
    pub alpha: StepSize,
    pub q_weight: f64,
    pub r_weight: f64,
    pub input_bound: f64,
    pub feedback: Feedback,
    pub hankel_update: bool,
    /// Data windows stop sliding while `‖u₀ − u₀_prev‖∞` is below this.
    pub halt_threshold: f64,
    pub kernel: ProductKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub total_steps: u64,
    /// Bootstrap inputs are i.i.d. uniform on `[−a, a]`.
    pub excitation_amplitude: f64,
    pub reference_hold: u64,
    pub reference_low: f64,
    pub reference_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub system: u64,
    pub drift: u64,
    pub reference: u64,
    pub excitation: u64,
}

impl Seeds {
    /// All four seeds derived from one.
    pub fn from_base(seed: u64) -> Self {
        Self {
            system: seed,
            drift: seed.wrapping_add(1),
            reference: seed.wrapping_add(2),
            excitation: seed.wrapping_add(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    pub controller: ControllerConfig,
    pub scenario: ScenarioConfig,
    pub seeds: Seeds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::full_size()
    }
}

impl ExperimentConfig {
    /// Ten states, ten inputs and outputs, `N_I = 50`, `T_ini = 20`,
    /// `N = 120`, `κ = 1651`, `ε_g = 0.1`.
    pub fn full_size() -> Self {
        Self {
            plant: PlantConfig {
                states: 10,
                inputs: 10,
                outputs: 10,
                initial_state: 0.0,
                drift_bound: 1e-4,
            },
            controller: ControllerConfig {
                mode: ControllerMode::Online,
                n_inner: 50,
                t_ini: 20,
                horizon: 120,
                kappa: 1651,
                eps_g: 0.1,
                eps_nu: 0.1,
                alpha: StepSize::Auto,
                q_weight: 1.0,
                r_weight: 0.0,
                input_bound: 1.0,
                feedback: Feedback::Measured,
                hankel_update: true,
                halt_threshold: 0.0,
                kernel: ProductKernel::Fft,
            },
            scenario: ScenarioConfig {
                total_steps: 3000,
                excitation_amplitude: 1.0,
                reference_hold: 1000,
                reference_low: 0.0,
                reference_high: 0.1,
            },
            seeds: Seeds::from_base(1),
        }
    }

    /// Two states, one input and output, short horizon.
    pub fn small() -> Self {
        let mut cfg = Self::full_size();
        cfg.plant.states = 2;
        cfg.plant.inputs = 1;
        cfg.plant.outputs = 1;
        cfg.controller.t_ini = 4;
        cfg.controller.horizon = 10;
        cfg.controller.kappa = 60;
        cfg
    }

    pub fn t_tot(&self) -> usize {
        self.controller.t_ini + self.controller.horizon
    }

    /// Raw dataset length `T = κ + T_ini + N − 1`.
    pub fn dataset_len(&self) -> usize {
        self.controller.kappa + self.t_tot() - 1
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = Seeds::from_base(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.plant;
        let c = &self.controller;
        let s = &self.scenario;
        let positive = [
            ("plant.states", p.states),
            ("plant.inputs", p.inputs),
            ("plant.outputs", p.outputs),
            ("controller.n_inner", c.n_inner),
            ("controller.t_ini", c.t_ini),
            ("controller.horizon", c.horizon),
            ("controller.kappa", c.kappa),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{key} must be positive")));
            }
        }
        for (key, v) in [("controller.eps_g", c.eps_g), ("controller.eps_nu", c.eps_nu), ("controller.input_bound", c.input_bound)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{key} must be positive, got {v}")));
            }
        }
        for (key, v) in [
            ("controller.q_weight", c.q_weight),
            ("controller.r_weight", c.r_weight),
            ("controller.halt_threshold", c.halt_threshold),
            ("plant.drift_bound", p.drift_bound),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{key} must be nonnegative, got {v}")));
            }
        }
        if c.q_weight == 0.0 && c.r_weight == 0.0 {
            return Err(Error::Config("q_weight and r_weight cannot both be zero".into()));
        }
        if s.reference_hold == 0 || !(s.reference_low <= s.reference_high) {
            return Err(Error::Config(
                "scenario needs reference_hold > 0 and reference_low <= reference_high".into(),
            ));
        }
        let rows = p.inputs * self.t_tot();
        if c.kappa < rows {
            return Err(Error::Config(format!(
                "kappa = {} cannot give full row rank {} = inputs * (t_ini + horizon)",
                c.kappa, rows
            )));
        }
        Ok(())
    }

    pub fn drift_spec(&self) -> DriftSpec {
        DriftSpec {
            per_step_fraction_bound: self.plant.drift_bound,
            rng_seed: self.seeds.drift,
        }
    }

    pub fn reference_schedule(&self) -> Result<ReferenceSchedule> {
        ReferenceSchedule::new(
            self.scenario.reference_hold,
            self.scenario.reference_low,
            self.scenario.reference_high,
            self.plant.outputs,
            self.seeds.reference,
        )
    }

    fn cost_at(&self, schedule: &ReferenceSchedule, t: u64) -> Result<TrackingCost> {
        let c = &self.controller;
        TrackingCost::weighted(
            schedule.horizon(t, c.horizon),
            &vec![c.q_weight; self.plant.outputs],
            &vec![c.r_weight; self.plant.inputs],
            c.horizon,
        )
    }
}

/// Open-loop data used to build the first behavioral model, and the plant as
/// it stands after producing it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Signal,
    pub outputs: Signal,
    pub plant: PlantModel,
    pub lineage: SeedLineage,
    pub persistence: PersistenceReport,
    pub attempts: usize,
}

pub const INPUTS_FILE: &str = "inputs.csv";
pub const OUTPUTS_FILE: &str = "outputs.csv";
pub const PLANT_FILE: &str = "plant.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Draws i.i.d. uniform inputs on the input box, simulates the plant from
/// `x₀` and keeps the first draw whose inputs are persistently exciting of
/// order `T_ini + N`.
pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let p = &cfg.plant;
    let mut plant = generate_random_system(p.states, p.inputs, p.outputs, cfg.seeds.system)?;
    plant.x.fill(p.initial_state);
    let len = cfg.dataset_len();
    let bound = cfg.scenario.excitation_amplitude;
    let mut last = None;
    for attempt in 0..BOOTSTRAP_ATTEMPTS {
        let mut rng = counter_rng(cfg.seeds.excitation, STREAM_EXCITATION, attempt as u64);
        let u: Vec<f64> = (0..len * p.inputs).map(|_| rng.gen_range(-bound..=bound)).collect();
        let inputs = Signal::new(p.inputs, u)?;
        let report = is_persistently_exciting(&inputs, cfg.t_tot())?;
        if !report.exciting {
            last = Some(report);
            continue;
        }
        let mut sim = plant.clone();
        let mut y = Vec::with_capacity(len * p.outputs);
        for k in 0..len {
            y.extend(sim.step(inputs.sample(k))?);
        }
        let outputs = Signal::new(p.outputs, y)?;
        return Ok(Dataset {
            inputs,
            outputs,
            plant: sim,
            lineage: SeedLineage {
                system_seed: cfg.seeds.system,
                drift_seed: cfg.seeds.drift,
                drift_steps: 0,
            },
            persistence: report,
            attempts: attempt + 1,
        });
    }
    let report = last.expect("at least one attempt");
    Err(Error::NotPersistentlyExciting {
        order: report.order,
        rank: report.rank,
        rows: report.rows,
    })
}

/// Structured-text record next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library: String,
    pub version: String,
    pub kind: String,
    /// Step size actually used, if a controller ran.
    pub alpha_used: Option<f64>,
    pub dataset_len: usize,
    pub persistence_rank: Option<usize>,
    pub persistence_rows: Option<usize>,
    pub bootstrap_attempts: Option<usize>,
    pub outcome: Option<String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(kind: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            library: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            kind: kind.into(),
            alpha_used: None,
            dataset_len: cfg.dataset_len(),
            persistence_rank: None,
            persistence_rows: None,
            bootstrap_attempts: None,
            outcome: None,
            config: cfg.clone(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
    }
}

impl Dataset {
    /// Writes the input/output CSV pair, the plant snapshot and a manifest.
    pub fn write(&self, dir: impl AsRef<Path>, cfg: &ExperimentConfig) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.inputs.write_csv(dir.join(INPUTS_FILE))?;
        self.outputs.write_csv(dir.join(OUTPUTS_FILE))?;
        self.plant.to_snapshot(self.lineage).write(dir.join(PLANT_FILE))?;
        let mut manifest = Manifest::new("dataset", cfg);
        manifest.persistence_rank = Some(self.persistence.rank);
        manifest.persistence_rows = Some(self.persistence.rows);
        manifest.bootstrap_attempts = Some(self.attempts);
        manifest.write(dir.join(MANIFEST_FILE))
    }

    /// Reads a dataset directory and re-runs the persistence check.
    pub fn read(dir: impl AsRef<Path>, order: usize) -> Result<Self> {
        let dir = dir.as_ref();
        let inputs = Signal::read_csv(dir.join(INPUTS_FILE))?;
        let outputs = Signal::read_csv(dir.join(OUTPUTS_FILE))?;
        let snapshot = PlantSnapshot::read(dir.join(PLANT_FILE))?;
        let persistence = is_persistently_exciting(&inputs, order)?;
        Ok(Self {
            inputs,
            outputs,
            plant: snapshot.to_plant()?,
            lineage: snapshot.lineage,
            persistence,
            attempts: 0,
        })
    }

    pub fn exists(dir: impl AsRef<Path>) -> bool {
        let dir = dir.as_ref();
        [INPUTS_FILE, OUTPUTS_FILE, PLANT_FILE].iter().all(|f| dir.join(f).is_file())
    }
}

/// One solver iteration.
///
/// `cost` and `violation` are evaluated at the iterate the step started
/// from, against the problem instance `t` it was solving. `u0` is that
/// iterate's first input block; `y0` the most recent plant output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub tau: u64,
    pub t: u64,
    pub cost: f64,
    pub violation: f64,
    pub u0: Vec<f64>,
    pub y0: Vec<f64>,
    /// Wall time of the control period this iteration belongs to.
    pub block_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub inputs: usize,
    pub outputs: usize,
    pub records: Vec<RunRecord>,
}

impl RunTrace {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["tau".to_string(), "t".into(), "cost".into(), "violation".into()];
        h.extend((0..self.inputs).map(|i| format!("u0_{i}")));
        h.extend((0..self.outputs).map(|i| format!("y0_{i}")));
        h.push("block_ms".into());
        h
    }
}

/// Result of a closed-loop run. A run that stops early keeps its partial
/// trace and the reason in `halted`.
#[derive(Debug)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub alpha: f64,
    pub halted: Option<Error>,
    pub plant: PlantModel,
    pub model: BehavioralModel,
    pub state: SolverState,
}

impl RunOutcome {
    pub fn manifest(&self, cfg: &ExperimentConfig, dataset: &Dataset) -> Manifest {
        let mut m = Manifest::new("run", cfg);
        m.alpha_used = Some(self.alpha);
        m.persistence_rank = Some(dataset.persistence.rank);
        m.persistence_rows = Some(dataset.persistence.rows);
        m.bootstrap_attempts = Some(dataset.attempts);
        m.outcome = Some(match &self.halted {
            None => "completed".into(),
            Some(e) => format!("halted: {e}"),
        });
        m
    }
}

/// Runs the controller selected by `cfg.controller.mode` on a fresh dataset.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let dataset = generate_dataset(cfg)?;
    run_with_dataset(cfg, &dataset)
}

pub fn run_odeepc(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    cfg.controller.mode = ControllerMode::Online;
    run(&cfg)
}

pub fn run_gradient_deepc(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    cfg.controller.mode = ControllerMode::Frozen;
    run(&cfg)
}

/// Builds the model from `dataset` and picks the step size.
pub fn prepare(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<(BehavioralModel, f64)> {
    cfg.validate()?;
    let c = &cfg.controller;
    if !dataset.persistence.exciting {
        return Err(Error::NotPersistentlyExciting {
            order: dataset.persistence.order,
            rank: dataset.persistence.rank,
            rows: dataset.persistence.rows,
        });
    }
    let model = BehavioralModel::unchecked(&dataset.inputs, &dataset.outputs, c.t_ini, c.horizon)?.with_kernel(c.kernel);
    if model.kappa() != c.kappa {
        return Err(Error::Config(format!(
            "dataset gives kappa = {} but the configuration asks for {}",
            model.kappa(),
            c.kappa
        )));
    }
    let alpha = match c.alpha {
        StepSize::Fixed(a) => a,
        StepSize::Auto => {
            let schedule = cfg.reference_schedule()?;
            let cost = cfg.cost_at(&schedule, 0)?;
            let params = SaddleParams::new(1.0, c.eps_g, c.eps_nu)?;
            default_step_size(estimate_h_norm(&model, NORM_ITERATIONS)?, &cost, &params)
        }
    };
    Ok((model, alpha))
}

/// The control loop: `N_I − 1` static iterations per control period, then
/// the input is applied, the measurements (and, online, the data windows)
/// advance and one shifted iteration is taken against the new instance.
pub fn run_with_dataset(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<RunOutcome> {
    let (mut model, alpha) = prepare(cfg, dataset)?;
    let c = &cfg.controller;
    let (m, p) = (cfg.plant.inputs, cfg.plant.outputs);
    let dims = model.dims();
    let params = SaddleParams::new(alpha, c.eps_g, c.eps_nu)?;
    let boxes = Boxes {
        input: ConstraintBox::uniform(dims.u_len(), -c.input_bound, c.input_bound)?,
        output: ConstraintBox::unbounded(dims.y_len()),
    };
    let schedule = cfg.reference_schedule()?;
    let drift = cfg.drift_spec();
    let mut plant = dataset.plant.clone();
    let mut state = SolverState::zeros(&dims);
    let mut trace = RunTrace::new(m, p);
    let mut y_last = dataset.outputs.sample(dataset.outputs.len() - 1).to_vec();
    let mut u_prev: Option<Vec<f64>> = None;
    let mut tau: u64 = 1;
    let mut halted = None;
    let mut cost = cfg.cost_at(&schedule, 0)?;

    'outer: for t in 0..cfg.scenario.total_steps {
        let started = Instant::now();
        let block_start = trace.records.len();
        for _ in 1..c.n_inner {
            let value = cost.value(&state.u, &state.y);
            let u0 = state.first_input(m).to_vec();
            match static_step_with_residual(&model, &state, &cost, &params, &boxes) {
                Ok(out) => {
                    trace.records.push(record(tau, t, value, out.residual_norm, u0, &y_last));
                    state = out.state;
                }
                Err(e) => {
                    halted = Some(with_iteration(e, tau));
                    break 'outer;
                }
            }
            tau += 1;
        }

        let u0 = state.first_input(m).to_vec();
        let y_meas = match plant.step(&u0) {
            Ok(y) => y,
            Err(e) => {
                halted = Some(e);
                break;
            }
        };
        let y_new = match c.feedback {
            Feedback::Measured => y_meas.clone(),
            Feedback::Iterate => state.first_output(p).to_vec(),
        };
        y_last = y_meas;
        let steady = u_prev.as_ref().is_some_and(|prev| {
            prev.iter().zip(&u0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < c.halt_threshold
        });
        let slide = c.mode == ControllerMode::Online && c.hankel_update && !steady;
        model = model.advance_measurements(&u0, &y_new, slide)?;
        plant.apply_drift(&drift, t);
        u_prev = Some(u0);

        cost = cfg.cost_at(&schedule, t + 1)?;
        let shifted_cost_value = {
            let s = crate::solver::shift_state(&state, &dims)?;
            cost.value(&s.u, &s.y)
        };
        let u0 = state.first_input(m).to_vec();
        match online_step_with_residual(&model, &state, &cost, &params, &boxes) {
            Ok(out) => {
                trace
                    .records
                    .push(record(tau, t + 1, shifted_cost_value, out.residual_norm, u0, &y_last));
                state = out.state;
            }
            Err(e) => {
                halted = Some(with_iteration(e, tau));
                break;
            }
        }
        tau += 1;
        let ms = started.elapsed().as_secs_f64() * 1e3;
        for r in &mut trace.records[block_start..] {
            r.block_ms = ms;
        }
    }

    Ok(RunOutcome {
        trace,
        alpha,
        halted,
        plant,
        model,
        state,
    })
}

fn record(tau: u64, t: u64, cost: f64, violation: f64, u0: Vec<f64>, y0: &[f64]) -> RunRecord {
    RunRecord {
        tau,
        t,
        cost,
        violation,
        u0,
        y0: y0.to_vec(),
        block_ms: 0.0,
    }
}

fn with_iteration(e: Error, tau: u64) -> Error {
    match e {
        Error::Divergence { reason, dump, .. } => Error::Divergence {
            iteration: tau,
            reason,
            dump,
        },
        other => other,
    }
}

/// Cost and constraint statistics over the iterations driven by one
/// reference value.
///
/// With a look-ahead horizon the reference drawn for window `w` first
/// enters the cost at instance `w·hold − (N − 1)`, so segment `w` spans
/// instances `[w·hold − (N−1), (w+1)·hold − (N−1))`, clipped at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSummary {
    pub window: u64,
    pub records: usize,
    pub first_cost: f64,
    pub peak_cost: f64,
    pub terminal_cost: f64,
    pub mean_violation: f64,
}

pub fn summarize_windows(trace: &RunTrace, hold: u64, horizon: usize) -> Vec<WindowSummary> {
    let lead = horizon.saturating_sub(1) as u64;
    let segment = |t: u64| (t + lead) / hold;
    let mut out: Vec<WindowSummary> = Vec::new();
    let mut violation_sum = 0.0;
    for r in &trace.records {
        let w = segment(r.t);
        match out.last_mut() {
            Some(s) if s.window == w => {
                s.records += 1;
                s.peak_cost = s.peak_cost.max(r.cost);
                s.terminal_cost = r.cost;
                violation_sum += r.violation;
                s.mean_violation = violation_sum / s.records as f64;
            }
            _ => {
                violation_sum = r.violation;
                out.push(WindowSummary {
                    window: w,
                    records: 1,
                    first_cost: r.cost,
                    peak_cost: r.cost,
                    terminal_cost: r.cost,
                    mean_violation: r.violation,
                });
            }
        }
    }
    out
}

/// Sidecar manifest path for a trace file.
pub fn manifest_path(trace_path: &Path) -> PathBuf {
    let mut name = trace_path.file_stem().unwrap_or_default().to_os_string();
    name.push(".manifest.toml");
    trace_path.with_file_name(name)
}

/// Writes the trace CSV and, next to it, the manifest.
pub fn emit_trace(trace: &RunTrace, path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace.header())?;
    for r in &trace.records {
        let mut row = vec![r.tau.to_string(), r.t.to_string(), r.cost.to_string(), r.violation.to_string()];
        row.extend(r.u0.iter().chain(&r.y0).map(f64::to_string));
        row.push(r.block_ms.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    manifest.write(manifest_path(path))
}

/// Reads a trace CSV back; channel counts come from the header.
pub fn parse_trace(path: impl AsRef<Path>) -> Result<RunTrace> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    let inputs = names.iter().filter(|n| n.starts_with("u0_")).count();
    let outputs = names.iter().filter(|n| n.starts_with("y0_")).count();
    let mut trace = RunTrace::new(inputs, outputs);
    let expected = trace.header();
    if names != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Parse(format!("unexpected trace header {names:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
    let int = |s: &str| s.parse::<u64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
    for row in r.records() {
        let row = row?;
        let f: Vec<&str> = row.iter().collect();
        let u_end = 4 + inputs;
        let y_end = u_end + outputs;
        trace.records.push(RunRecord {
            tau: int(f[0])?,
            t: int(f[1])?,
            cost: num(f[2])?,
            violation: num(f[3])?,
            u0: f[4..u_end].iter().map(|s| num(s)).collect::<Result<_>>()?,
            y0: f[u_end..y_end].iter().map(|s| num(s)).collect::<Result<_>>()?,
            block_ms: num(f[y_end])?,
        });
    }
    Ok(trace)
}

/// One benchmark shape: `d` channels, depth `L`, `κ` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchSize {
    pub d: usize,
    pub depth: usize,
    pub kappa: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub d: usize,
    pub depth: usize,
    pub kappa: usize,
    /// Median time of one `H v` plus one `Hᵀ w`, FFT path.
    pub fast_ms: f64,
    /// Same with an explicit matrix; `None` when it would not fit the
    /// memory budget.
    pub dense_ms: Option<f64>,
    pub predicted_cost: f64,
}

impl BenchRow {
    pub fn speedup(&self) -> Option<f64> {
        self.dense_ms.map(|d| d / self.fast_ms)
    }
}

/// Largest dense matrix the benchmark will materialize, in entries.
pub const BENCH_DENSE_LIMIT: usize = 1 << 24;

/// Doubling sizes `L = κ = 2⁸ … 2¹⁴` for a single channel, then the
/// stacked input/output matrix at the default dimensions (twenty channels,
/// depth 140, 1651 columns).
pub fn default_bench_sizes() -> Vec<BenchSize> {
    let mut v: Vec<BenchSize> = (8..=14)
        .map(|k| BenchSize {
            d: 1,
            depth: 1 << k,
            kappa: 1 << k,
        })
        .collect();
    v.push(BenchSize {
        d: 20,
        depth: 140,
        kappa: 1651,
    });
    v
}

fn time_ms(mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    // repeat until the sample is long enough to be above timer noise
    let mut reps = 1usize;
    loop {
        let start = Instant::now();
        for _ in 0..reps {
            f()?;
        }
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        if elapsed >= 10.0 || reps >= 1 << 16 {
            return Ok(elapsed / reps as f64);
        }
        reps *= 2;
    }
}

fn fastest(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Times one forward plus one transpose product per size, fast and dense.
/// Trials run in rounds over all sizes so slow changes in machine load
/// spread evenly across the table; each size reports its fastest trial.
pub fn bench_products(sizes: &[BenchSize], trials: usize, seed: u64) -> Result<Vec<BenchRow>> {
    struct Case {
        view: BlockHankelView,
        v: Vec<f64>,
        w: Vec<f64>,
        dense: Option<nalgebra::DMatrix<f64>>,
        fast: Vec<f64>,
        dense_ms: Vec<f64>,
    }
    let trials = trials.max(1);
    let mut cases = Vec::with_capacity(sizes.len());
    for (i, size) in sizes.iter().enumerate() {
        let mut rng = counter_rng(seed, STREAM_EXCITATION, i as u64);
        let len = size.kappa + size.depth - 1;
        let sig = Signal::new(size.d, (0..len * size.d).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        let view = BlockHankelView::new(&sig, size.depth, TransformLength::PowerOfTwo)?;
        let v: Vec<f64> = (0..view.cols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..view.rows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        view.mul_vec(&v)?;
        view.transpose_mul_vec(&w)?;
        let dense = (view.rows() * view.cols() <= BENCH_DENSE_LIMIT).then(|| view.materialize());
        cases.push(Case {
            view,
            v,
            w,
            dense,
            fast: Vec::with_capacity(trials),
            dense_ms: Vec::with_capacity(trials),
        });
    }
    for _ in 0..trials {
        for c in &mut cases {
            let (view, v, w) = (&c.view, &c.v, &c.w);
            c.fast.push(time_ms(|| {
                std::hint::black_box(view.mul_vec(v)?);
                std::hint::black_box(view.transpose_mul_vec(w)?);
                Ok(())
            })?);
            if let Some(h) = &c.dense {
                let dv = nalgebra::DVector::from_column_slice(v);
                let dw = nalgebra::DVector::from_column_slice(w);
                c.dense_ms.push(time_ms(|| {
                    std::hint::black_box(h * &dv);
                    std::hint::black_box(h.tr_mul(&dw));
                    Ok(())
                })?);
            }
        }
    }
    Ok(sizes
        .iter()
        .zip(cases)
        .map(|(size, c)| BenchRow {
            d: size.d,
            depth: size.depth,
            kappa: size.kappa,
            fast_ms: fastest(&c.fast),
            dense_ms: c.dense.is_some().then(|| fastest(&c.dense_ms)),
            predicted_cost: size.d as f64 * predicted_flop_cost(size.depth, size.kappa),
        })
        .collect())
}

pub fn write_bench_csv(rows: &[BenchRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["d", "L", "kappa", "fast_ms", "dense_ms", "predicted_cost"])?;
    for r in rows {
        w.write_record([
            r.d.to_string(),
            r.depth.to_string(),
            r.kappa.to_string(),
            r.fast_ms.to_string(),
            r.dense_ms.map(|d| d.to_string()).unwrap_or_default(),
            r.predicted_cost.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
