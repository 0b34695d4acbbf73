//! FFT-based products for scalar Hankel matrices.
//!
//! A Hankel matrix `H ∈ R^{n×m}` with generating sequence `h_1..h_{n+m-1}`
//! satisfies `H·v = T·rev(v)` for the Toeplitz matrix `T = H·Π`. `T` sits in
//! the upper-left block of an `(n+m-1)`-point circulant `C` whose first column
//! is
//!
//! ```text
//! c = (h_m, h_{m+1}, …, h_{n+m-1}, h_1, …, h_{m-1})
//! ```
//!
//! so `H·v` is the first `n` entries of `IFFT(FFT(c) ∘ FFT(v_e))` with
//! `v_e = (v_m, …, v_1, 0, …, 0)`. The circulant diagonalizes under the DFT,
//! which brings the product down to `O((n+m) log(n+m))`.
//!
//! The transform may be padded past `n+m-1`: the wrapped tail of `c` is moved
//! to the end of the padded buffer, which keeps the first `n` outputs intact.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{check_len, Error, Result};

/// Imaginary residue below which IFFT output is treated as real.
pub const IMAG_RESIDUE_LIMIT: f64 = 1e-10;

thread_local! {
    static REAL_PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
    static SCRATCH: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
    static WORK: RefCell<(Vec<f64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

/// Per-thread real and complex work buffers of the requested lengths.
fn with_work<T>(real: usize, complex: usize, f: impl FnOnce(&mut [f64], &mut [Complex64]) -> T) -> T {
    WORK.with(|w| {
        let mut w = w.borrow_mut();
        let (r, c) = &mut *w;
        if r.len() < real {
            r.resize(real, 0.0);
        }
        if c.len() < complex {
            c.resize(complex, Complex64::new(0.0, 0.0));
        }
        f(&mut r[..real], &mut c[..complex])
    })
}

fn with_scratch<T>(len: usize, f: impl FnOnce(&mut [Complex64]) -> T) -> T {
    SCRATCH.with(|s| {
        let mut s = s.borrow_mut();
        if s.len() < len {
            s.resize(len, Complex64::new(0.0, 0.0));
        }
        f(&mut s[..len])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// How the circular transform length is chosen for an `n×m` Hankel product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransformLength {
    /// Exactly `n + m - 1` points.
    Exact,
    /// Smallest power of two `>= n + m - 1`.
    #[default]
    PowerOfTwo,
}

impl TransformLength {
    pub fn resolve(self, min_len: usize) -> usize {
        match self {
            TransformLength::Exact => min_len,
            TransformLength::PowerOfTwo => min_len.next_power_of_two(),
        }
    }
}

enum PlanKind {
    Forward(Arc<dyn RealToComplex<f64>>),
    Inverse(Arc<dyn ComplexToReal<f64>>),
}

/// A real-input DFT of fixed length in one direction.
///
/// Plans are reentrant: scratch space is per thread, so one plan may serve
/// concurrent transforms.
pub struct DftPlan {
    length: usize,
    direction: Direction,
    kind: PlanKind,
}

impl fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DftPlan")
            .field("length", &self.length)
            .field("direction", &self.direction)
            .finish()
    }
}

impl DftPlan {
    pub fn new(length: usize, direction: Direction) -> Result<Self> {
        if length == 0 {
            return Err(Error::InvalidArgument("DFT length must be positive".into()));
        }
        let kind = REAL_PLANNER.with(|planner| {
            let mut planner = planner.borrow_mut();
            match direction {
                Direction::Forward => PlanKind::Forward(planner.plan_fft_forward(length)),
                Direction::Inverse => PlanKind::Inverse(planner.plan_fft_inverse(length)),
            }
        });
        Ok(Self {
            length,
            direction,
            kind,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Number of retained (non-redundant) spectrum bins, `length/2 + 1`.
    pub fn spectrum_len(&self) -> usize {
        self.length / 2 + 1
    }

    /// Forward transform of a real vector; returns the half spectrum.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<Complex64>> {
        check_len("DftPlan::forward", self.length, input.len())?;
        let mut buf = input.to_vec();
        let mut out = vec![Complex64::new(0.0, 0.0); self.spectrum_len()];
        self.forward_into(&mut buf, &mut out)?;
        Ok(out)
    }

    /// Normalized inverse transform of a half spectrum back to a real vector.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Result<Vec<f64>> {
        check_len("DftPlan::inverse", self.spectrum_len(), spectrum.len())?;
        let mut buf = spectrum.to_vec();
        let mut out = vec![0.0; self.length];
        self.inverse_into(&mut buf, &mut out)?;
        let scale = 1.0 / self.length as f64;
        out.iter_mut().for_each(|x| *x *= scale);
        Ok(out)
    }

    /// Forward transform; `input` is used as scratch and left unspecified.
    pub(crate) fn forward_into(&self, input: &mut [f64], out: &mut [Complex64]) -> Result<()> {
        match &self.kind {
            PlanKind::Forward(plan) => with_scratch(plan.get_scratch_len(), |scratch| {
                plan.process_with_scratch(input, out, scratch)
            })
            .map_err(|e| Error::Fft(e.to_string())),
            PlanKind::Inverse(_) => Err(Error::InvalidArgument(
                "forward transform requested from an inverse plan".into(),
            )),
        }
    }

    /// Unnormalized inverse transform; `spectrum` is used as scratch.
    ///
    /// The imaginary parts of the DC and Nyquist bins are the only places a
    /// non-Hermitian residue can hide in a half spectrum. They are dropped when
    /// below [`IMAG_RESIDUE_LIMIT`] (relative to the spectrum scale) and raise
    /// [`Error::ImaginaryResidue`] otherwise.
    pub(crate) fn inverse_into(&self, spectrum: &mut [Complex64], out: &mut [f64]) -> Result<()> {
        let plan = match &self.kind {
            PlanKind::Inverse(plan) => plan,
            PlanKind::Forward(_) => {
                return Err(Error::InvalidArgument(
                    "inverse transform requested from a forward plan".into(),
                ))
            }
        };
        let scale = spectrum
            .iter()
            .map(|z| z.re.abs().max(z.im.abs()))
            .fold(1.0, f64::max);
        let last = spectrum.len() - 1;
        let mut edges = vec![0];
        if self.length % 2 == 0 {
            edges.push(last);
        }
        for k in edges {
            let residue = spectrum[k].im.abs() / scale;
            if residue > IMAG_RESIDUE_LIMIT {
                return Err(Error::ImaginaryResidue {
                    residue,
                    limit: IMAG_RESIDUE_LIMIT,
                });
            }
            spectrum[k].im = 0.0;
        }
        with_scratch(plan.get_scratch_len(), |scratch| plan.process_with_scratch(spectrum, out, scratch))
            .map_err(|e| Error::Fft(e.to_string()))
    }
}

/// Forward/inverse plan pair for one transform length.
#[derive(Debug)]
pub(crate) struct PlanPair {
    pub forward: DftPlan,
    pub inverse: DftPlan,
}

impl PlanPair {
    pub fn new(length: usize) -> Result<Arc<Self>> {
        Ok(Arc::new(Self {
            forward: DftPlan::new(length, Direction::Forward)?,
            inverse: DftPlan::new(length, Direction::Inverse)?,
        }))
    }

    pub fn length(&self) -> usize {
        self.forward.length()
    }

    /// Spectrum of `(v_m, …, v_1, 0, …)` padded to the plan length.
    pub fn reversed_spectrum(&self, v: &[f64]) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.forward.spectrum_len()];
        with_work(self.length(), 0, |buf, _| {
            let (head, tail) = buf.split_at_mut(v.len());
            for (dst, src) in head.iter_mut().zip(v.iter().rev()) {
                *dst = *src;
            }
            tail.fill(0.0);
            self.forward.forward_into(buf, &mut out)
        })?;
        Ok(out)
    }

    /// `IFFT(a ∘ b)`, normalized, truncated to the first `take` entries.
    pub fn inverse_product(
        &self,
        a: &[Complex64],
        b: &[Complex64],
        take: usize,
    ) -> Result<Vec<f64>> {
        with_work(self.length(), a.len(), |out, prod| {
            for ((p, x), y) in prod.iter_mut().zip(a).zip(b) {
                *p = x * y;
            }
            self.finish_inverse(prod, out, take)
        })
    }

    pub fn inverse_truncated(&self, spectrum: &mut [Complex64], take: usize) -> Result<Vec<f64>> {
        with_work(self.length(), 0, |out, _| self.finish_inverse(spectrum, out, take))
    }

    fn finish_inverse(&self, spectrum: &mut [Complex64], out: &mut [f64], take: usize) -> Result<Vec<f64>> {
        self.inverse.inverse_into(spectrum, out)?;
        let scale = 1.0 / self.length() as f64;
        Ok(out[..take].iter().map(|x| x * scale).collect())
    }
}

/// Scalar Hankel matrix `H[i][j] = seq[i + j]` (zero-based), never materialized
/// outside of tests and the dense benchmark path.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarHankel {
    seq: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl ScalarHankel {
    pub fn new(seq: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(
                "Hankel matrix needs at least one row and one column".into(),
            ));
        }
        check_len("ScalarHankel::new", rows + cols - 1, seq.len())?;
        Ok(Self { seq, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seq(&self) -> &[f64] {
        &self.seq
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.seq[i + j]
    }

    /// Same generating sequence with rows and columns swapped.
    pub fn transpose(&self) -> Self {
        Self {
            seq: self.seq.clone(),
            rows: self.cols,
            cols: self.rows,
        }
    }

    pub fn materialize(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.entry(i, j))
    }
}

/// Circulant embedding of a Hankel matrix with its DFT cached.
#[derive(Debug, Clone)]
pub struct CirculantEmbedding {
    rows: usize,
    cols: usize,
    c: Vec<f64>,
    spectrum: Vec<Complex64>,
    plans: Arc<PlanPair>,
}

impl CirculantEmbedding {
    pub fn new(h: &ScalarHankel, length: TransformLength) -> Result<Self> {
        let plans = PlanPair::new(length.resolve(h.seq.len()))?;
        Self::with_plans(h.rows, h.cols, &h.seq, plans)
    }

    /// Builds the embedding for a `rows×cols` Hankel matrix over `seq` using
    /// an existing plan pair whose length is at least `rows + cols - 1`.
    pub(crate) fn with_plans(
        rows: usize,
        cols: usize,
        seq: &[f64],
        plans: Arc<PlanPair>,
    ) -> Result<Self> {
        let c = circulant_column(seq, cols);
        let spectrum = Self::padded_spectrum(&c, rows, &plans)?;
        Ok(Self {
            rows,
            cols,
            c,
            spectrum,
            plans,
        })
    }

    fn padded_spectrum(c: &[f64], rows: usize, plans: &PlanPair) -> Result<Vec<Complex64>> {
        let len = plans.length();
        let mut buf = vec![0.0; len];
        buf[..rows].copy_from_slice(&c[..rows]);
        let tail = &c[rows..];
        buf[len - tail.len()..].copy_from_slice(tail);
        let mut out = vec![Complex64::new(0.0, 0.0); plans.forward.spectrum_len()];
        plans.forward.forward_into(&mut buf, &mut out)?;
        Ok(out)
    }

    /// First column of the circulant, `(h_m, …, h_{n+m-1}, h_1, …, h_{m-1})`.
    pub fn column(&self) -> &[f64] {
        &self.c
    }

    /// Cached `FFT(c)` half spectrum at the (possibly padded) transform length.
    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn transform_len(&self) -> usize {
        self.plans.length()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("CirculantEmbedding::apply", self.cols, v.len())?;
        let ve = self.plans.reversed_spectrum(v)?;
        self.apply_spectrum(&ve)
    }

    /// Product given a precomputed spectrum of the reversed, padded vector.
    pub(crate) fn apply_spectrum(&self, ve: &[Complex64]) -> Result<Vec<f64>> {
        self.plans.inverse_product(&self.spectrum, ve, self.rows)
    }
}

/// Rotates the generating sequence so entry `m-1` comes first.
fn circulant_column(seq: &[f64], cols: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(seq.len());
    c.extend_from_slice(&seq[cols - 1..]);
    c.extend_from_slice(&seq[..cols - 1]);
    c
}

/// `H·v` via circulant embedding at the default transform length.
pub fn hankel_vec(h: &ScalarHankel, v: &[f64]) -> Result<Vec<f64>> {
    hankel_vec_with(h, v, TransformLength::default())
}

pub fn hankel_vec_with(h: &ScalarHankel, v: &[f64], length: TransformLength) -> Result<Vec<f64>> {
    check_len("hankel_vec", h.cols, v.len())?;
    CirculantEmbedding::new(h, length)?.apply(v)
}

/// `Hᵀ·w`. The transpose of a Hankel matrix is the Hankel matrix over the
/// same sequence with the shape swapped.
pub fn hankel_transpose_vec(h: &ScalarHankel, w: &[f64]) -> Result<Vec<f64>> {
    hankel_transpose_vec_with(h, w, TransformLength::default())
}

pub fn hankel_transpose_vec_with(
    h: &ScalarHankel,
    w: &[f64],
    length: TransformLength,
) -> Result<Vec<f64>> {
    check_len("hankel_transpose_vec", h.rows, w.len())?;
    hankel_vec_with(&h.transpose(), w, length)
}

/// Circular convolution `IFFT(FFT(a) ∘ FFT(b))` of two equal-length real vectors.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_len("fft_convolve", a.len(), b.len())?;
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let n = a.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    inv.process(&mut prod);
    let scale = 1.0 / n as f64;
    let magnitude = prod.iter().map(|z| z.re.abs()).fold(1.0, f64::max) * scale;
    let residue = prod.iter().map(|z| z.im.abs()).fold(0.0, f64::max) * scale / magnitude;
    if residue > IMAG_RESIDUE_LIMIT {
        return Err(Error::ImaginaryResidue {
            residue,
            limit: IMAG_RESIDUE_LIMIT,
        });
    }
    Ok(prod.into_iter().map(|z| z.re * scale).collect())
}

/// Flop model of one Hankel product: `15 L log₂ L + 6 L`, `L = n + m - 1`.
pub fn predicted_flop_cost(n: usize, m: usize) -> f64 {
    let len = (n + m).saturating_sub(1).max(1) as f64;
    15.0 * len * len.log2() + 6.0 * len
}
