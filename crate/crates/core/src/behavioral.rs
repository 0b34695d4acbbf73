//! Data-driven system model built from recorded input/output trajectories.
//!
//! The stacked matrix `H = [U_p; U_f; Y_p; Y_f]` consists of the depth
//! `T_tot = T_ini + N` block Hankel matrices of the input and output data.
//! Any length-`T_tot` trajectory of the (LTI, controllable) plant is `H·g` for
//! some `g`; the first `T_ini` samples pin the initial condition and the last
//! `N` are the prediction.

use std::ops::Range;

use crate::convolution::TransformLength;
use crate::error::{check_len, Error, Result};
use crate::hankel::{is_persistently_exciting, shift_up, BlockHankelView, PersistenceReport, ShiftSpec, Signal};

/// Entrywise bounds; infinite bounds are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ConstraintBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len("ConstraintBox::new", lower.len(), upper.len())?;
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::InvalidArgument(format!(
                "box bound {i}: lower {} exceeds upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// The same interval on every entry.
    pub fn uniform(len: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; len], vec![upper; len])
    }

    pub fn unbounded(len: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; len],
            upper: vec![f64::INFINITY; len],
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.len()
            && v
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    /// Whether `v` lies strictly inside the box (no active bound).
    pub fn is_interior(&self, v: &[f64]) -> bool {
        v.len() == self.len()
            && v
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| lo < x && x < hi)
    }
}

/// Which product path [`BehavioralModel`] uses for `H·g` and `Hᵀ·ν`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductKernel {
    #[default]
    Fft,
    Dense,
}

/// Sizes of the blocks of `H`, `h` and the solver iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub inputs: usize,
    pub outputs: usize,
    pub t_ini: usize,
    pub horizon: usize,
    pub kappa: usize,
}

impl Dims {
    pub fn t_tot(&self) -> usize {
        self.t_ini + self.horizon
    }

    pub fn u_len(&self) -> usize {
        self.inputs * self.horizon
    }

    pub fn y_len(&self) -> usize {
        self.outputs * self.horizon
    }

    /// Rows of `H`, i.e. the length of `h` and `ν`.
    pub fn rows(&self) -> usize {
        (self.inputs + self.outputs) * self.t_tot()
    }

    pub fn u_rows(&self) -> usize {
        self.inputs * self.t_tot()
    }

    /// Rows of `U_f` inside the stacked `H`.
    pub fn u_future(&self) -> Range<usize> {
        self.inputs * self.t_ini..self.u_rows()
    }

    /// Rows of `Y_f` inside the stacked `H`.
    pub fn y_future(&self) -> Range<usize> {
        self.u_rows() + self.outputs * self.t_ini..self.rows()
    }

    /// Length of the stacked iterate `z = (u, y, g, ν)`.
    pub fn z_len(&self) -> usize {
        self.u_len() + self.y_len() + self.kappa + self.rows()
    }
}

/// `H = [U_p; U_f; Y_p; Y_f]` together with the measured initial trajectory.
#[derive(Debug, Clone)]
pub struct BehavioralModel {
    u_hankel: BlockHankelView,
    y_hankel: BlockHankelView,
    t_ini: usize,
    horizon: usize,
    u_ini: Vec<f64>,
    y_ini: Vec<f64>,
    kernel: ProductKernel,
    persistence: Option<PersistenceReport>,
}

impl BehavioralModel {
    /// Builds the model and requires the inputs to be persistently exciting of
    /// order `T_ini + N`. The initial trajectory defaults to the last `T_ini`
    /// samples of the data.
    pub fn new(inputs: &Signal, outputs: &Signal, t_ini: usize, horizon: usize) -> Result<Self> {
        let mut model = Self::unchecked(inputs, outputs, t_ini, horizon)?;
        let report = is_persistently_exciting(inputs, t_ini + horizon)?;
        if !report.exciting {
            return Err(Error::NotPersistentlyExciting {
                order: report.order,
                rank: report.rank,
                rows: report.rows,
            });
        }
        model.persistence = Some(report);
        Ok(model)
    }

    /// Builds the model without the persistence-of-excitation check.
    pub fn unchecked(inputs: &Signal, outputs: &Signal, t_ini: usize, horizon: usize) -> Result<Self> {
        Self::with_transform(inputs, outputs, t_ini, horizon, TransformLength::default())
    }

    pub fn with_transform(
        inputs: &Signal,
        outputs: &Signal,
        t_ini: usize,
        horizon: usize,
        length: TransformLength,
    ) -> Result<Self> {
        check_len("BehavioralModel: output samples", inputs.len(), outputs.len())?;
        if t_ini == 0 || horizon == 0 {
            return Err(Error::InvalidArgument("T_ini and N must be positive".into()));
        }
        let t_tot = t_ini + horizon;
        let u_hankel = BlockHankelView::new(inputs, t_tot, length)?;
        let y_hankel = BlockHankelView::new(outputs, t_tot, length)?;
        let tail = inputs.len() - t_ini;
        let u_ini = inputs.as_slice()[tail * inputs.dim()..].to_vec();
        let y_ini = outputs.as_slice()[tail * outputs.dim()..].to_vec();
        Ok(Self {
            u_hankel,
            y_hankel,
            t_ini,
            horizon,
            u_ini,
            y_ini,
            kernel: ProductKernel::Fft,
            persistence: None,
        })
    }

    /// Replaces the measured initial trajectory (oldest sample first).
    pub fn with_initial_trajectory(mut self, u_ini: Vec<f64>, y_ini: Vec<f64>) -> Result<Self> {
        check_len("u_ini", self.inputs() * self.t_ini, u_ini.len())?;
        check_len("y_ini", self.outputs() * self.t_ini, y_ini.len())?;
        self.u_ini = u_ini;
        self.y_ini = y_ini;
        Ok(self)
    }

    pub fn with_kernel(mut self, kernel: ProductKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn kernel(&self) -> ProductKernel {
        self.kernel
    }

    pub fn dims(&self) -> Dims {
        Dims {
            inputs: self.inputs(),
            outputs: self.outputs(),
            t_ini: self.t_ini,
            horizon: self.horizon,
            kappa: self.kappa(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.u_hankel.dim()
    }

    pub fn outputs(&self) -> usize {
        self.y_hankel.dim()
    }

    pub fn t_ini(&self) -> usize {
        self.t_ini
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn kappa(&self) -> usize {
        self.u_hankel.cols()
    }

    pub fn u_ini(&self) -> &[f64] {
        &self.u_ini
    }

    pub fn y_ini(&self) -> &[f64] {
        &self.y_ini
    }

    pub fn u_hankel(&self) -> &BlockHankelView {
        &self.u_hankel
    }

    pub fn y_hankel(&self) -> &BlockHankelView {
        &self.y_hankel
    }

    /// Persistence report recorded at construction, if the check ran.
    pub fn persistence(&self) -> Option<&PersistenceReport> {
        self.persistence.as_ref()
    }

    /// Dense `H`, stacked `[U; Y]`.
    pub fn materialize(&self) -> nalgebra::DMatrix<f64> {
        let u = self.u_hankel.materialize();
        let y = self.y_hankel.materialize();
        let mut h = nalgebra::DMatrix::zeros(u.nrows() + y.nrows(), u.ncols());
        h.rows_mut(0, u.nrows()).copy_from(&u);
        h.rows_mut(u.nrows(), y.nrows()).copy_from(&y);
        h
    }

    /// `H·g = [U·g; Y·g]`.
    pub fn apply_h(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_H", self.kappa(), g.len())?;
        let (mut out, yg) = match self.kernel {
            ProductKernel::Fft => (self.u_hankel.mul_vec(g)?, self.y_hankel.mul_vec(g)?),
            ProductKernel::Dense => (
                self.u_hankel.dense_mul_vec(g)?,
                self.y_hankel.dense_mul_vec(g)?,
            ),
        };
        out.extend(yg);
        Ok(out)
    }

    /// `Hᵀ·ν = Uᵀ·ν_u + Yᵀ·ν_y`.
    pub fn apply_h_transpose(&self, nu: &[f64]) -> Result<Vec<f64>> {
        let dims = self.dims();
        check_len("apply_H_transpose", dims.rows(), nu.len())?;
        let (nu_u, nu_y) = nu.split_at(dims.u_rows());
        let (mut out, part) = match self.kernel {
            ProductKernel::Fft => (
                self.u_hankel.transpose_mul_vec(nu_u)?,
                self.y_hankel.transpose_mul_vec(nu_y)?,
            ),
            ProductKernel::Dense => (
                self.u_hankel.dense_transpose_mul_vec(nu_u)?,
                self.y_hankel.dense_transpose_mul_vec(nu_y)?,
            ),
        };
        out.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    /// `h = [u_ini; u; y_ini; y]`.
    pub fn assemble_rhs(&self, u: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let dims = self.dims();
        check_len("assemble_rhs: u", dims.u_len(), u.len())?;
        check_len("assemble_rhs: y", dims.y_len(), y.len())?;
        let mut h = Vec::with_capacity(dims.rows());
        h.extend_from_slice(&self.u_ini);
        h.extend_from_slice(u);
        h.extend_from_slice(&self.y_ini);
        h.extend_from_slice(y);
        Ok(h)
    }

    /// Shifts the newest measured pair into `u_ini`/`y_ini`; with
    /// `update_hankel` both data windows also slide by one sample.
    pub fn advance_measurements(&self, u_new: &[f64], y_new: &[f64], update_hankel: bool) -> Result<Self> {
        let (m, p) = (self.inputs(), self.outputs());
        check_len("advance_measurements: u", m, u_new.len())?;
        check_len("advance_measurements: y", p, y_new.len())?;
        let mut u_ini = shift_up(ShiftSpec::new(self.t_ini, m), &self.u_ini)?;
        u_ini[(self.t_ini - 1) * m..].copy_from_slice(u_new);
        let mut y_ini = shift_up(ShiftSpec::new(self.t_ini, p), &self.y_ini)?;
        y_ini[(self.t_ini - 1) * p..].copy_from_slice(y_new);
        let (u_hankel, y_hankel) = if update_hankel {
            (
                self.u_hankel.slide_window(u_new)?,
                self.y_hankel.slide_window(y_new)?,
            )
        } else {
            (self.u_hankel.clone(), self.y_hankel.clone())
        };
        Ok(Self {
            u_hankel,
            y_hankel,
            t_ini: self.t_ini,
            horizon: self.horizon,
            u_ini,
            y_ini,
            kernel: self.kernel,
            persistence: if update_hankel { None } else { self.persistence.clone() },
        })
    }
}
