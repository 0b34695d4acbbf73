//! Dense reference implementations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use odeepc::hankel::Signal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_signal(rng: &mut ChaCha8Rng, dim: usize, len: usize) -> Signal {
    Signal::new(dim, random_vec(rng, dim * len)).unwrap()
}

/// Block Hankel matrix written out entry by entry from raw samples.
pub fn dense_hankel(samples: &[f64], dim: usize, depth: usize) -> DMatrix<f64> {
    let len = samples.len() / dim;
    let cols = len - depth + 1;
    DMatrix::from_fn(dim * depth, cols, |r, j| {
        let (i, c) = (r / dim, r % dim);
        samples[(i + j) * dim + c]
    })
}

/// `S_{blocks, size}`: identity shifted up by one block, last block zero.
pub fn shift_matrix(blocks: usize, size: usize) -> DMatrix<f64> {
    let n = blocks * size;
    DMatrix::from_fn(n, n, |i, j| if j == i + size { 1.0 } else { 0.0 })
}

pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    m
}

pub fn vstack(parts: &[&DVector<f64>]) -> DVector<f64> {
    let data: Vec<f64> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    DVector::from_vec(data)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = want.iter().map(|b| b * b).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Everything a dense iteration needs: `H = [U_p; U_f; Y_p; Y_f]` as one
/// matrix, the measured initial trajectory and the problem data.
#[derive(Clone)]
pub struct DenseProblem {
    pub m: usize,
    pub p: usize,
    pub t_ini: usize,
    pub horizon: usize,
    pub u_data: Vec<f64>,
    pub y_data: Vec<f64>,
    pub u_ini: DVector<f64>,
    pub y_ini: DVector<f64>,
    pub reference: DVector<f64>,
    pub q: f64,
    pub r: f64,
    pub alpha: f64,
    pub eps_g: f64,
    pub eps_nu: f64,
    pub u_bound: f64,
}

#[derive(Clone, Debug)]
pub struct DenseState {
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    pub g: DVector<f64>,
    pub nu: DVector<f64>,
}

impl DenseState {
    pub fn to_vec(&self) -> Vec<f64> {
        vstack(&[&self.u, &self.y, &self.g, &self.nu]).data.into()
    }
}

impl DenseProblem {
    pub fn t_tot(&self) -> usize {
        self.t_ini + self.horizon
    }

    pub fn h_matrix(&self) -> DMatrix<f64> {
        let u = dense_hankel(&self.u_data, self.m, self.t_tot());
        let y = dense_hankel(&self.y_data, self.p, self.t_tot());
        let mut h = DMatrix::zeros(u.nrows() + y.nrows(), u.ncols());
        h.rows_mut(0, u.nrows()).copy_from(&u);
        h.rows_mut(u.nrows(), y.nrows()).copy_from(&y);
        h
    }

    pub fn rhs(&self, u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        vstack(&[&self.u_ini, u, &self.y_ini, y])
    }

    /// Projected descent in `(u, y, g)`, ascent in `ν`, all at the old point.
    pub fn step(&self, h: &DMatrix<f64>, z: &DenseState) -> DenseState {
        let a = self.alpha;
        let (mi, pi) = (self.m * self.t_ini, self.p * self.t_ini);
        let mu = self.m * self.horizon;
        let nu_u = z.nu.rows(mi, mu).into_owned();
        let nu_y = z.nu.rows(mi + mu + pi, self.p * self.horizon).into_owned();
        let grad_u = &z.u * (2.0 * self.r);
        let grad_y = (&z.y - &self.reference) * (2.0 * self.q);
        let b = self.u_bound;
        let u = (&z.u - (grad_u - nu_u) * a).map(|v| v.clamp(-b, b));
        let y = &z.y - (grad_y - nu_y) * a;
        let g = &z.g - (h.transpose() * &z.nu + &z.g * self.eps_g) * a;
        let nu = &z.nu + (h * &z.g - self.rhs(&z.u, &z.y) - &z.nu * self.eps_nu) * a;
        DenseState { u, y, g, nu }
    }

    /// Control application: the data matrix and initial trajectory advance
    /// by the newest pair through shift matrices, then the shifted iterate
    /// takes one step against the new instance.
    pub fn advance(&mut self, h: &DMatrix<f64>, z: &DenseState, u_new: &[f64], y_new: &[f64], reference: DVector<f64>) -> (DMatrix<f64>, DenseState) {
        let (m, p, tt) = (self.m, self.p, self.t_tot());
        let kappa = h.ncols();
        let su = shift_matrix(tt, m);
        let sy = shift_matrix(tt, p);
        let sk = shift_matrix(kappa, 1);
        let urows = m * tt;
        let u_mat = h.rows(0, urows).into_owned();
        let y_mat = h.rows(urows, p * tt).into_owned();
        let mut add = DMatrix::zeros(h.nrows(), kappa);
        let mut u_last = u_mat.rows(urows - m, m) * sk.transpose();
        u_last.column_mut(kappa - 1).copy_from_slice(u_new);
        let mut y_last = y_mat.rows(p * tt - p, p) * sk.transpose();
        y_last.column_mut(kappa - 1).copy_from_slice(y_new);
        add.rows_mut(urows - m, m).copy_from(&u_last);
        add.rows_mut(h.nrows() - p, p).copy_from(&y_last);
        let h_next = block_diag(&su, &sy) * h + add;

        let mut u_ini = shift_matrix(self.t_ini, m) * &self.u_ini;
        u_ini.rows_mut(m * (self.t_ini - 1), m).copy_from_slice(u_new);
        let mut y_ini = shift_matrix(self.t_ini, p) * &self.y_ini;
        y_ini.rows_mut(p * (self.t_ini - 1), p).copy_from_slice(y_new);
        self.u_ini = u_ini;
        self.y_ini = y_ini;
        self.u_data.drain(..m);
        self.u_data.extend_from_slice(u_new);
        self.y_data.drain(..p);
        self.y_data.extend_from_slice(y_new);
        self.reference = reference;

        let shifted = DenseState {
            u: shift_matrix(self.horizon, m) * &z.u,
            y: shift_matrix(self.horizon, p) * &z.y,
            g: z.g.clone(),
            nu: block_diag(&su, &sy) * &z.nu,
        };
        let next = self.step(&h_next, &shifted);
        (h_next, next)
    }
}
