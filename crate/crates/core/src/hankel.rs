//! Block Hankel matrices over vector-valued signals.
//!
//! A depth-`L` block Hankel matrix over a `d`-channel signal `w_1..w_T` has
//! `κ = T - L + 1` columns and block `(i, j)` equal to `w_{i+j-1}`. Rows are
//! laid out channel-fastest: row `i·d + c` holds channel `c` of block row `i`.
//!
//! [`BlockHankelView`] never stores the matrix. It references a window of an
//! append-only sample log and multiplies through one FFT kernel per channel,
//! built lazily and dropped whenever the window moves.

use std::path::Path;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;

use crate::convolution::{CirculantEmbedding, PlanPair, TransformLength};
use crate::error::{check_len, Error, Result};

/// Samples of a `d`-channel signal, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    dim: usize,
    data: Vec<f64>,
}

impl Signal {
    /// Wraps time-major data (`data[t·dim + c]`).
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("signal needs at least one channel".into()));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "signal data of length {} is not a positive multiple of {dim} channels",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let dim = samples.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(dim * samples.len());
        for s in samples {
            check_len("Signal::from_samples", dim, s.len())?;
            data.extend_from_slice(s);
        }
        Self::new(dim, data)
    }

    /// A scalar signal.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.dim).copied().collect()
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<()> {
        check_len("Signal::push", self.dim, sample.len())?;
        self.data.extend_from_slice(sample);
        Ok(())
    }

    /// Writes `t,ch0,ch1,...` CSV, one row per time step.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim).map(|c| format!("ch{c}")));
        w.write_record(&header)?;
        for t in 0..self.len() {
            let mut row = vec![t.to_string()];
            row.extend(self.sample(t).iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let dim = header.len().saturating_sub(1);
        if header.get(0) != Some("t") || dim == 0 {
            return Err(Error::Parse("signal CSV must start with a `t` column".into()));
        }
        for (c, name) in header.iter().skip(1).enumerate() {
            if name != format!("ch{c}") {
                return Err(Error::Parse(format!("unexpected column `{name}`")));
            }
        }
        let mut data = Vec::new();
        for (t, rec) in r.records().enumerate() {
            let rec = rec?;
            let stamp: usize = rec[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad time stamp `{}`", &rec[0])))?;
            if stamp != t {
                return Err(Error::Parse(format!("time stamp {stamp} out of order at row {t}")));
            }
            for field in rec.iter().skip(1) {
                data.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad sample `{field}`")))?,
                );
            }
        }
        Self::new(dim, data)
    }
}

/// Append-only storage shared by successive windows of a sliding view.
#[derive(Debug)]
struct SampleLog {
    data: RwLock<Vec<f64>>,
}

/// Per-channel FFT kernels for one window.
#[derive(Debug)]
struct BlockKernel {
    plans: Arc<PlanPair>,
    forward: Vec<CirculantEmbedding>,
    transpose: Vec<CirculantEmbedding>,
}

/// Depth-`L`, `κ`-column block Hankel matrix over a window of samples.
#[derive(Debug)]
pub struct BlockHankelView {
    log: Arc<SampleLog>,
    start: usize,
    dim: usize,
    depth: usize,
    cols: usize,
    length: TransformLength,
    kernel: OnceLock<Arc<BlockKernel>>,
    dense: OnceLock<Arc<DMatrix<f64>>>,
}

impl Clone for BlockHankelView {
    fn clone(&self) -> Self {
        let kernel = OnceLock::new();
        if let Some(k) = self.kernel.get() {
            let _ = kernel.set(k.clone());
        }
        let dense = OnceLock::new();
        if let Some(d) = self.dense.get() {
            let _ = dense.set(d.clone());
        }
        Self {
            log: self.log.clone(),
            start: self.start,
            dim: self.dim,
            depth: self.depth,
            cols: self.cols,
            length: self.length,
            kernel,
            dense,
        }
    }
}

/// Builds the depth-`depth` block Hankel view over `sig`.
pub fn build_hankel(sig: &Signal, depth: usize) -> Result<BlockHankelView> {
    BlockHankelView::new(sig, depth, TransformLength::default())
}

impl BlockHankelView {
    pub fn new(sig: &Signal, depth: usize, length: TransformLength) -> Result<Self> {
        if depth == 0 || depth > sig.len() {
            return Err(Error::InvalidDepth {
                depth,
                length: sig.len(),
            });
        }
        Ok(Self {
            log: Arc::new(SampleLog {
                data: RwLock::new(sig.as_slice().to_vec()),
            }),
            start: 0,
            dim: sig.dim(),
            depth,
            cols: sig.len() - depth + 1,
            length,
            kernel: OnceLock::new(),
            dense: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.dim * self.depth
    }

    /// Number of samples in the generating window, `depth + cols - 1`.
    pub fn window_len(&self) -> usize {
        self.depth + self.cols - 1
    }

    pub fn transform_length(&self) -> TransformLength {
        self.length
    }

    /// Copy of the generating window as a signal, oldest sample first.
    pub fn window(&self) -> Signal {
        let data = self.log.data.read().expect("sample log poisoned");
        let lo = self.start * self.dim;
        let hi = lo + self.window_len() * self.dim;
        Signal {
            dim: self.dim,
            data: data[lo..hi].to_vec(),
        }
    }

    pub fn materialize(&self) -> DMatrix<f64> {
        let w = self.window();
        let d = self.dim;
        DMatrix::from_fn(self.rows(), self.cols, |r, j| {
            let (i, c) = (r / d, r % d);
            w.data[(i + j) * d + c]
        })
    }

    fn dense(&self) -> &Arc<DMatrix<f64>> {
        self.dense.get_or_init(|| Arc::new(self.materialize()))
    }

    fn kernel(&self) -> Result<&Arc<BlockKernel>> {
        if let Some(k) = self.kernel.get() {
            return Ok(k);
        }
        let built = Arc::new(self.build_kernel()?);
        Ok(self.kernel.get_or_init(|| built))
    }

    fn build_kernel(&self) -> Result<BlockKernel> {
        let w = self.window();
        let plans = PlanPair::new(self.length.resolve(self.window_len()))?;
        let mut forward = Vec::with_capacity(self.dim);
        let mut transpose = Vec::with_capacity(self.dim);
        for c in 0..self.dim {
            let seq = w.channel(c);
            forward.push(CirculantEmbedding::with_plans(
                self.depth,
                self.cols,
                &seq,
                plans.clone(),
            )?);
            transpose.push(CirculantEmbedding::with_plans(
                self.cols,
                self.depth,
                &seq,
                plans.clone(),
            )?);
        }
        Ok(BlockKernel {
            plans,
            forward,
            transpose,
        })
    }

    /// Fast `H·v`: one scalar circulant product per channel, sharing the
    /// spectrum of the reversed input, then interleaved channel-fastest.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("block_hankel_vec", self.cols, v.len())?;
        let k = self.kernel()?;
        let ve = k.plans.reversed_spectrum(v)?;
        let mut out = vec![0.0; self.rows()];
        for (c, emb) in k.forward.iter().enumerate() {
            let y = emb.apply_spectrum(&ve)?;
            for (i, val) in y.into_iter().enumerate() {
                out[i * self.dim + c] = val;
            }
        }
        Ok(out)
    }

    /// Fast `Hᵀ·w`: channel contributions are summed in the frequency domain
    /// (in channel order) before a single inverse transform.
    pub fn transpose_mul_vec(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("block_hankel_transpose_vec", self.rows(), w.len())?;
        let k = self.kernel()?;
        let mut acc = vec![Complex64::new(0.0, 0.0); k.plans.forward.spectrum_len()];
        let mut slice = vec![0.0; self.depth];
        for (c, emb) in k.transpose.iter().enumerate() {
            for (i, s) in slice.iter_mut().enumerate() {
                *s = w[i * self.dim + c];
            }
            let we = k.plans.reversed_spectrum(&slice)?;
            for ((a, x), y) in acc.iter_mut().zip(emb.spectrum()).zip(&we) {
                *a += x * y;
            }
        }
        k.plans.inverse_truncated(&mut acc, self.cols)
    }

    /// Dense `H·v` against the materialized matrix (cached on first use).
    pub fn dense_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("dense block Hankel product", self.cols, v.len())?;
        let out = &**self.dense() * DVector::from_column_slice(v);
        Ok(out.data.into())
    }

    pub fn dense_transpose_mul_vec(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("dense block Hankel transpose product", self.rows(), w.len())?;
        let out = self.dense().tr_mul(&DVector::from_column_slice(w));
        Ok(out.data.into())
    }

    /// Drops the oldest sample of the window and appends `newest`.
    ///
    /// When this view is the newest window of its log, the sample is appended
    /// in place and the returned view shares the log; older views keep their
    /// own bounds and stay valid. A slide from any other view (or a log that
    /// has grown well past one window) starts a fresh log.
    pub fn slide_window(&self, newest: &[f64]) -> Result<Self> {
        check_len("slide_window", self.dim, newest.len())?;
        let win = self.window_len();
        let end = (self.start + win) * self.dim;
        let shared = {
            let mut data = self.log.data.write().expect("sample log poisoned");
            if data.len() == end && self.start < 4 * win {
                data.extend_from_slice(newest);
                true
            } else {
                false
            }
        };
        let (log, start) = if shared {
            (self.log.clone(), self.start + 1)
        } else {
            let mut data = self.window().data;
            data.drain(..self.dim);
            data.extend_from_slice(newest);
            (
                Arc::new(SampleLog {
                    data: RwLock::new(data),
                }),
                0,
            )
        };
        Ok(Self {
            log,
            start,
            dim: self.dim,
            depth: self.depth,
            cols: self.cols,
            length: self.length,
            kernel: OnceLock::new(),
            dense: OnceLock::new(),
        })
    }
}

/// Fast block Hankel product, see [`BlockHankelView::mul_vec`].
pub fn block_hankel_vec(hb: &BlockHankelView, v: &[f64]) -> Result<Vec<f64>> {
    hb.mul_vec(v)
}

/// Fast block Hankel transpose product, see [`BlockHankelView::transpose_mul_vec`].
pub fn block_hankel_transpose_vec(hb: &BlockHankelView, w: &[f64]) -> Result<Vec<f64>> {
    hb.transpose_mul_vec(w)
}

/// Outcome of a persistence-of-excitation test.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceReport {
    pub exciting: bool,
    pub order: usize,
    pub rank: usize,
    pub rows: usize,
    pub cols: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub tolerance: f64,
}

impl PersistenceReport {
    /// `σ_min / σ_max` over the leading `rows` singular values.
    pub fn gap(&self) -> f64 {
        if self.sigma_max > 0.0 {
            self.sigma_min / self.sigma_max
        } else {
            0.0
        }
    }
}

/// Tests whether the depth-`order` Hankel matrix of `sig` has full row rank.
///
/// Singular values count toward the rank when they exceed
/// `1e-10 · max(rows, cols) · σ_max`.
pub fn is_persistently_exciting(sig: &Signal, order: usize) -> Result<PersistenceReport> {
    let view = BlockHankelView::new(sig, order, TransformLength::default())?;
    let h = view.materialize();
    let (rows, cols) = h.shape();
    let sv = h.singular_values();
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let tolerance = 1e-10 * rows.max(cols) as f64 * sigma_max;
    let rank = sv.iter().filter(|&&s| s > tolerance).count();
    let mut sorted: Vec<f64> = sv.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // σ_min of the row space: the rows-th largest singular value, zero when
    // there are fewer columns than rows.
    let sigma_min = sorted.get(rows - 1).copied().unwrap_or(0.0);
    Ok(PersistenceReport {
        exciting: rank == rows,
        order,
        rank,
        rows,
        cols,
        sigma_max,
        sigma_min,
        tolerance,
    })
}

/// Block shift `S_{m,n}`: `m` blocks of `n` entries moved up by one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShiftSpec {
    pub blocks: usize,
    pub blocksize: usize,
}

impl ShiftSpec {
    pub fn new(blocks: usize, blocksize: usize) -> Self {
        Self { blocks, blocksize }
    }

    pub fn len(&self) -> usize {
        self.blocks * self.blocksize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn shift_up(spec: ShiftSpec, v: &[f64]) -> Result<Vec<f64>> {
    check_len("shift_up", spec.len(), v.len())?;
    let mut out = vec![0.0; v.len()];
    let n = spec.blocksize;
    out[..v.len() - n].copy_from_slice(&v[n..]);
    Ok(out)
}

/// Window slide, see [`BlockHankelView::slide_window`].
pub fn slide_window(hb: &BlockHankelView, newest: &[f64]) -> Result<BlockHankelView> {
    hb.slide_window(newest)
}
