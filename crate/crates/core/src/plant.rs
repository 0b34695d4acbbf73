//! Discrete-time state-space plants, random system generation, parameter
//! drift and piecewise-constant reference schedules.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::{counter_rng, STREAM_DRIFT, STREAM_REFERENCE, STREAM_SYSTEM};

/// Maximum regeneration attempts for random systems.
pub const GENERATION_ATTEMPTS: usize = 10;

/// `x_{t+1} = A x_t + B u_t`, `y_t = C x_t + D u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub x: DVector<f64>,
}

impl PlantModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        x: DVector<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        check_len("plant A columns", n, a.ncols())?;
        check_len("plant B rows", n, b.nrows())?;
        check_len("plant C columns", n, c.ncols())?;
        check_len("plant D rows", c.nrows(), d.nrows())?;
        check_len("plant D columns", b.ncols(), d.ncols())?;
        check_len("plant state", n, x.len())?;
        Ok(Self { a, b, c, d, x })
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Returns `y_t = C x_t + D u_t`, then advances `x ← A x_t + B u_t`.
    pub fn step(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("plant input", self.inputs(), u.len())?;
        let u = DVector::from_column_slice(u);
        let y = &self.c * &self.x + &self.d * &u;
        let next = &self.a * &self.x + &self.b * &u;
        if next.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::PlantDivergence(format!(
                "non-finite state after input {:?}",
                u.as_slice()
            )));
        }
        self.x = next;
        Ok(y.data.into())
    }

    pub fn controllability_matrix(&self) -> DMatrix<f64> {
        let (n, m) = (self.states(), self.inputs());
        let mut k = DMatrix::zeros(n, n * m);
        let mut block = self.b.clone();
        for i in 0..n {
            k.columns_mut(i * m, m).copy_from(&block);
            block = &self.a * block;
        }
        k
    }

    pub fn observability_matrix(&self) -> DMatrix<f64> {
        let (n, p) = (self.states(), self.outputs());
        let mut o = DMatrix::zeros(n * p, n);
        let mut block = self.c.clone();
        for i in 0..n {
            o.rows_mut(i * p, p).copy_from(&block);
            block = block * &self.a;
        }
        o
    }

    pub fn is_controllable(&self) -> bool {
        full_rank(&self.controllability_matrix(), self.states())
    }

    pub fn is_observable(&self) -> bool {
        full_rank(&self.observability_matrix(), self.states())
    }

    /// Applies one step of multiplicative drift to `A` and `B`.
    pub fn apply_drift(&mut self, spec: &DriftSpec, step: u64) {
        if spec.per_step_fraction_bound == 0.0 {
            return;
        }
        let bound = spec.per_step_fraction_bound;
        let mut rng = counter_rng(spec.rng_seed, STREAM_DRIFT, step);
        // column-major traversal of A then B fixes the draw order
        for v in self.a.iter_mut().chain(self.b.iter_mut()) {
            let frac: f64 = rng.gen_range(-bound..=bound);
            *v *= 1.0 + frac;
        }
    }

    pub fn to_snapshot(&self, lineage: SeedLineage) -> PlantSnapshot {
        let row_major = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
        PlantSnapshot {
            states: self.states(),
            inputs: self.inputs(),
            outputs: self.outputs(),
            a: row_major(&self.a),
            b: row_major(&self.b),
            c: row_major(&self.c),
            d: row_major(&self.d),
            x: self.x.as_slice().to_vec(),
            lineage,
        }
    }
}

fn full_rank(m: &DMatrix<f64>, want: usize) -> bool {
    let sv = m.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let tol = 1e-10 * m.nrows().max(m.ncols()) as f64 * smax;
    sv.iter().filter(|&&s| s > tol).count() >= want
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

fn random_unit_norm(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..=1.0));
    let norm = spectral_norm(&m);
    m / norm
}

/// Random `(A, B, C)` with unit spectral norms, `D = 0` and `x = 0`,
/// accepted only when controllable and observable.
pub fn generate_random_system(n: usize, m: usize, p: usize, seed: u64) -> Result<PlantModel> {
    if n == 0 || m == 0 || p == 0 {
        return Err(Error::InvalidArgument("plant dimensions must be positive".into()));
    }
    for attempt in 0..GENERATION_ATTEMPTS {
        let mut rng = counter_rng(seed, STREAM_SYSTEM, attempt as u64);
        let a = random_unit_norm(&mut rng, n, n);
        let b = random_unit_norm(&mut rng, n, m);
        let c = random_unit_norm(&mut rng, p, n);
        let plant = PlantModel::new(a, b, c, DMatrix::zeros(p, m), DVector::zeros(n))?;
        if plant.is_controllable() && plant.is_observable() {
            return Ok(plant);
        }
    }
    Err(Error::GenerationFailed {
        attempts: GENERATION_ATTEMPTS,
    })
}

/// Per-step multiplicative drift of every entry of `A` and `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    /// Bound on `|Δa / a|` per step; `1e-4` is a drift of at most 0.01 %.
    pub per_step_fraction_bound: f64,
    pub rng_seed: u64,
}

impl DriftSpec {
    pub fn none() -> Self {
        Self {
            per_step_fraction_bound: 0.0,
            rng_seed: 0,
        }
    }
}

/// Drifted copy of `plant` for time step `step`.
pub fn drift(plant: &PlantModel, spec: &DriftSpec, step: u64) -> PlantModel {
    let mut next = plant.clone();
    next.apply_drift(spec, step);
    next
}

/// Piecewise-constant reference redrawn uniformly every `hold_iterations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSchedule {
    pub hold_iterations: u64,
    pub low: f64,
    pub high: f64,
    pub dim: usize,
    pub rng_seed: u64,
}

impl ReferenceSchedule {
    pub fn new(hold_iterations: u64, low: f64, high: f64, dim: usize, rng_seed: u64) -> Result<Self> {
        if hold_iterations == 0 || !(low <= high) {
            return Err(Error::InvalidArgument(
                "reference schedule needs a positive hold and low <= high".into(),
            ));
        }
        Ok(Self {
            hold_iterations,
            low,
            high,
            dim,
            rng_seed,
        })
    }

    pub fn window(&self, t: u64) -> u64 {
        t / self.hold_iterations
    }

    /// Stacked `r_t, …, r_{t+N-1}`.
    pub fn horizon(&self, t: u64, horizon: usize) -> Vec<f64> {
        (0..horizon as u64).flat_map(|k| reference_at(self, t + k)).collect()
    }
}

pub fn reference_at(schedule: &ReferenceSchedule, t: u64) -> Vec<f64> {
    let mut rng = counter_rng(schedule.rng_seed, STREAM_REFERENCE, schedule.window(t));
    (0..schedule.dim)
        .map(|_| {
            if schedule.low == schedule.high {
                schedule.low
            } else {
                rng.gen_range(schedule.low..schedule.high)
            }
        })
        .collect()
}

/// Seeds needed to regenerate a plant snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub system_seed: u64,
    pub drift_seed: u64,
    pub drift_steps: u64,
}

/// Plain-text plant record: dimensions, row-major matrices and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSnapshot {
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub x: Vec<f64>,
    pub lineage: SeedLineage,
}

impl PlantSnapshot {
    pub fn to_plant(&self) -> Result<PlantModel> {
        let (n, m, p) = (self.states, self.inputs, self.outputs);
        let mat = |rows: usize, cols: usize, data: &[f64], what: &'static str| {
            check_len(what, rows * cols, data.len())?;
            Ok::<_, Error>(DMatrix::from_row_slice(rows, cols, data))
        };
        PlantModel::new(
            mat(n, n, &self.a, "snapshot A")?,
            mat(n, m, &self.b, "snapshot B")?,
            mat(p, n, &self.c, "snapshot C")?,
            mat(p, m, &self.d, "snapshot D")?,
            DVector::from_column_slice(&self.x),
        )
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
