//! Primal-dual iteration on the regularized Lagrangian
//!
//! ```text
//! L(u, y, g, ν) = f(u, y) + ε_g/2 ‖g‖² + νᵀ(H g − h) − ε_ν/2 ‖ν‖²
//! ```
//!
//! with `h = [u_ini; u; y_ini; y]`. One iteration is a projected gradient
//! descent step in `(u, y, g)` and an ascent step in `ν`, all evaluated at the
//! current iterate. The `ν` entries that multiply the decision variables are
//! the rows of `U_f` and `Y_f`; the past rows only act through `Hᵀν`.

use nalgebra::{DMatrix, DVector};

use crate::behavioral::{BehavioralModel, ConstraintBox, Dims};
use crate::error::{check_len, Error, Result};
use crate::hankel::{shift_up, ShiftSpec};

/// Iterates larger than this in max-norm are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// Default ceiling on the dimension of dense saddle operators.
pub const DENSE_LIMIT: usize = 2_000;

/// The primal-dual iterate `z = (u, y, g, ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub g: Vec<f64>,
    pub nu: Vec<f64>,
}

impl SolverState {
    pub fn zeros(dims: &Dims) -> Self {
        Self {
            u: vec![0.0; dims.u_len()],
            y: vec![0.0; dims.y_len()],
            g: vec![0.0; dims.kappa],
            nu: vec![0.0; dims.rows()],
        }
    }

    pub fn check_dims(&self, dims: &Dims) -> Result<()> {
        check_len("state u", dims.u_len(), self.u.len())?;
        check_len("state y", dims.y_len(), self.y.len())?;
        check_len("state g", dims.kappa, self.g.len())?;
        check_len("state nu", dims.rows(), self.nu.len())
    }

    /// Stacked `z`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.u.len() + self.y.len() + self.g.len() + self.nu.len());
        z.extend_from_slice(&self.u);
        z.extend_from_slice(&self.y);
        z.extend_from_slice(&self.g);
        z.extend_from_slice(&self.nu);
        z
    }

    pub fn from_vec(dims: &Dims, z: &[f64]) -> Result<Self> {
        check_len("SolverState::from_vec", dims.z_len(), z.len())?;
        let (u, rest) = z.split_at(dims.u_len());
        let (y, rest) = rest.split_at(dims.y_len());
        let (g, nu) = rest.split_at(dims.kappa);
        Ok(Self {
            u: u.to_vec(),
            y: y.to_vec(),
            g: g.to_vec(),
            nu: nu.to_vec(),
        })
    }

    pub fn norm_inf(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.y)
            .chain(&self.g)
            .chain(&self.nu)
            .fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// First input block `u_0`.
    pub fn first_input(&self, inputs: usize) -> &[f64] {
        &self.u[..inputs]
    }

    pub fn first_output(&self, outputs: usize) -> &[f64] {
        &self.y[..outputs]
    }
}

/// Step size and regularization weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleParams {
    pub alpha: f64,
    pub eps_g: f64,
    pub eps_nu: f64,
}

impl SaddleParams {
    pub fn new(alpha: f64, eps_g: f64, eps_nu: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("eps_g", eps_g), ("eps_nu", eps_nu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { alpha, eps_g, eps_nu })
    }
}

/// `f(u, y) = Σ q_i (y_i − r_i)² + Σ r_i u_i²` with diagonal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingCost {
    pub reference: Vec<f64>,
    pub q_weight: Vec<f64>,
    pub r_weight: Vec<f64>,
}

impl TrackingCost {
    /// Pure output tracking `Σ ‖y_k − r_k‖²`.
    pub fn tracking(reference: Vec<f64>, u_len: usize) -> Self {
        let q_weight = vec![1.0; reference.len()];
        Self {
            reference,
            q_weight,
            r_weight: vec![0.0; u_len],
        }
    }

    /// Per-channel weights repeated across the horizon.
    pub fn weighted(reference: Vec<f64>, q: &[f64], r: &[f64], horizon: usize) -> Result<Self> {
        check_len("TrackingCost: reference", q.len() * horizon, reference.len())?;
        if q.iter().chain(r).any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidArgument("cost weights must be nonnegative".into()));
        }
        Ok(Self {
            reference,
            q_weight: q.repeat(horizon),
            r_weight: r.repeat(horizon),
        })
    }

    pub fn value(&self, u: &[f64], y: &[f64]) -> f64 {
        let ty: f64 = y
            .iter()
            .zip(&self.reference)
            .zip(&self.q_weight)
            .map(|((y, r), q)| q * (y - r) * (y - r))
            .sum();
        let tu: f64 = u.iter().zip(&self.r_weight).map(|(u, r)| r * u * u).sum();
        ty + tu
    }

    fn check(&self, dims: &Dims) -> Result<()> {
        check_len("cost reference", dims.y_len(), self.reference.len())?;
        check_len("cost q_weight", dims.y_len(), self.q_weight.len())?;
        check_len("cost r_weight", dims.u_len(), self.r_weight.len())
    }
}

/// Input and output boxes over the whole horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Boxes {
    pub input: ConstraintBox,
    pub output: ConstraintBox,
}

impl Boxes {
    pub fn unbounded(dims: &Dims) -> Self {
        Self {
            input: ConstraintBox::unbounded(dims.u_len()),
            output: ConstraintBox::unbounded(dims.y_len()),
        }
    }
}

/// Euclidean projection onto a box (entrywise clamp).
pub fn project_box(v: &[f64], b: &ConstraintBox) -> Vec<f64> {
    v.iter()
        .zip(b.lower().iter().zip(b.upper()))
        .map(|(x, (lo, hi))| x.max(*lo).min(*hi))
        .collect()
}

/// `(∇_u f, ∇_y f) = (2 r_w u, 2 q_w (y − r))`.
pub fn cost_gradient(cost: &TrackingCost, u: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let gu = u.iter().zip(&cost.r_weight).map(|(u, w)| 2.0 * w * u).collect();
    let gy = y
        .iter()
        .zip(&cost.reference)
        .zip(&cost.q_weight)
        .map(|((y, r), q)| 2.0 * q * (y - r))
        .collect();
    (gu, gy)
}

pub fn lagrangian_value(
    model: &BehavioralModel,
    state: &SolverState,
    cost: &TrackingCost,
    params: &SaddleParams,
) -> Result<f64> {
    let dims = model.dims();
    state.check_dims(&dims)?;
    cost.check(&dims)?;
    let hg = model.apply_h(&state.g)?;
    let h = model.assemble_rhs(&state.u, &state.y)?;
    let coupling: f64 = state
        .nu
        .iter()
        .zip(hg.iter().zip(&h))
        .map(|(n, (a, b))| n * (a - b))
        .sum();
    Ok(cost.value(&state.u, &state.y) + 0.5 * params.eps_g * dot(&state.g, &state.g) + coupling
        - 0.5 * params.eps_nu * dot(&state.nu, &state.nu))
}

/// Result of one iteration along with the constraint residual it observed.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SolverState,
    /// `‖H g − h‖₂` at the point the step was evaluated.
    pub residual_norm: f64,
}

/// One static iteration against a fixed `H` and `h`.
pub fn static_step(
    model: &BehavioralModel,
    state: &SolverState,
    cost: &TrackingCost,
    params: &SaddleParams,
    boxes: &Boxes,
) -> Result<SolverState> {
    static_step_with_residual(model, state, cost, params, boxes).map(|o| o.state)
}

pub fn static_step_with_residual(
    model: &BehavioralModel,
    state: &SolverState,
    cost: &TrackingCost,
    params: &SaddleParams,
    boxes: &Boxes,
) -> Result<StepOutcome> {
    saddle_update(model, state, cost, params, boxes)
}

/// Warm-start shift applied when the horizon advances: `u`, `y` drop their
/// first block, `ν_u` and `ν_y` drop the first block of their `T_tot`
/// blocks. `g` is left as is.
pub fn shift_state(state: &SolverState, dims: &Dims) -> Result<SolverState> {
    state.check_dims(dims)?;
    let (nu_u, nu_y) = state.nu.split_at(dims.u_rows());
    let mut nu = shift_up(ShiftSpec::new(dims.t_tot(), dims.inputs), nu_u)?;
    nu.extend(shift_up(ShiftSpec::new(dims.t_tot(), dims.outputs), nu_y)?);
    Ok(SolverState {
        u: shift_up(ShiftSpec::new(dims.horizon, dims.inputs), &state.u)?,
        y: shift_up(ShiftSpec::new(dims.horizon, dims.outputs), &state.y)?,
        g: state.g.clone(),
        nu,
    })
}

/// One online iteration after the model has advanced to the next time
/// instant: shift the iterate, then take the same step against the new
/// `H` and `h` (whose data slots come from `model_next`).
pub fn online_step(
    model_next: &BehavioralModel,
    state: &SolverState,
    cost_next: &TrackingCost,
    params: &SaddleParams,
    boxes: &Boxes,
) -> Result<SolverState> {
    online_step_with_residual(model_next, state, cost_next, params, boxes).map(|o| o.state)
}

pub fn online_step_with_residual(
    model_next: &BehavioralModel,
    state: &SolverState,
    cost_next: &TrackingCost,
    params: &SaddleParams,
    boxes: &Boxes,
) -> Result<StepOutcome> {
    let shifted = shift_state(state, &model_next.dims())?;
    saddle_update(model_next, &shifted, cost_next, params, boxes)
}

fn saddle_update(
    model: &BehavioralModel,
    state: &SolverState,
    cost: &TrackingCost,
    params: &SaddleParams,
    boxes: &Boxes,
) -> Result<StepOutcome> {
    let dims = model.dims();
    state.check_dims(&dims)?;
    cost.check(&dims)?;
    check_len("input box", dims.u_len(), boxes.input.len())?;
    check_len("output box", dims.y_len(), boxes.output.len())?;
    let a = params.alpha;

    let (gu, gy) = cost_gradient(cost, &state.u, &state.y);
    let nu_u = &state.nu[dims.u_future()];
    let nu_y = &state.nu[dims.y_future()];
    let u: Vec<f64> = state
        .u
        .iter()
        .zip(gu.iter().zip(nu_u))
        .map(|(x, (grad, n))| x - a * (grad - n))
        .collect();
    let y: Vec<f64> = state
        .y
        .iter()
        .zip(gy.iter().zip(nu_y))
        .map(|(x, (grad, n))| x - a * (grad - n))
        .collect();

    let htnu = model.apply_h_transpose(&state.nu)?;
    let g = state
        .g
        .iter()
        .zip(&htnu)
        .map(|(g, v)| g - a * (v + params.eps_g * g))
        .collect();

    let hg = model.apply_h(&state.g)?;
    let h = model.assemble_rhs(&state.u, &state.y)?;
    let mut residual = 0.0;
    let nu = state
        .nu
        .iter()
        .zip(hg.iter().zip(&h))
        .map(|(n, (hg, h))| {
            let r = hg - h;
            residual += r * r;
            n + a * (r - params.eps_nu * n)
        })
        .collect();

    let next = SolverState {
        u: project_box(&u, &boxes.input),
        y: project_box(&y, &boxes.output),
        g,
        nu,
    };
    guard_divergence(&next)?;
    Ok(StepOutcome {
        state: next,
        residual_norm: residual.sqrt(),
    })
}

fn guard_divergence(state: &SolverState) -> Result<()> {
    let norm = state.norm_inf();
    if !norm.is_finite() || norm > DIVERGENCE_LIMIT {
        return Err(Error::Divergence {
            iteration: 0,
            reason: format!("iterate max-norm {norm:e} exceeds {DIVERGENCE_LIMIT:e}"),
            dump: state.to_vec(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ρ(α)` together with whether it certifies a contraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contraction {
    pub rho: f64,
    pub contracts: bool,
}

/// `ρ(α) = √(1 + α²σ² − 2αη)`.
pub fn contraction_factor(alpha: f64, sigma_psi: f64, eta: f64) -> Result<Contraction> {
    if alpha < 0.0 || sigma_psi < 0.0 || eta < 0.0 {
        return Err(Error::InvalidArgument(
            "contraction factor arguments must be nonnegative".into(),
        ));
    }
    let radicand = 1.0 + alpha * alpha * sigma_psi * sigma_psi - 2.0 * alpha * eta;
    if radicand < 0.0 {
        // rounding can push an exact zero slightly negative
        if radicand > -1e-12 {
            return Ok(Contraction {
                rho: 0.0,
                contracts: true,
            });
        }
        return Err(Error::NegativeRadicand(radicand));
    }
    let rho = radicand.sqrt();
    Ok(Contraction {
        rho,
        contracts: rho < 1.0,
    })
}

/// Lipschitz and strong-monotonicity constants of the saddle map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleConstants {
    pub sigma_psi: f64,
    pub eta: f64,
}

impl SaddleConstants {
    /// Step size minimizing `ρ(α)`, namely `η / σ²`.
    pub fn optimal_alpha(&self) -> f64 {
        self.eta / (self.sigma_psi * self.sigma_psi)
    }
}

/// Dense affine form `Ψ(z) = M z + b` of the unconstrained saddle map, so
/// that one iteration (boxes inactive) is `z ← z − α Ψ(z)`.
pub fn saddle_operator(
    model: &BehavioralModel,
    cost: &TrackingCost,
    params: &SaddleParams,
    limit: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let dims = model.dims();
    cost.check(&dims)?;
    let n = dims.z_len();
    if n > limit {
        return Err(Error::UnsupportedSize { dim: n, limit });
    }
    let (nu_len, ylen, kappa) = (dims.u_len(), dims.y_len(), dims.kappa);
    let og = nu_len + ylen;
    let on = og + kappa;
    let h = model.materialize();
    let mut m = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for i in 0..nu_len {
        m[(i, i)] = 2.0 * cost.r_weight[i];
        let row = on + dims.u_future().start + i;
        m[(i, row)] = -1.0;
        m[(row, i)] = 1.0;
    }
    for i in 0..ylen {
        let k = nu_len + i;
        m[(k, k)] = 2.0 * cost.q_weight[i];
        b[k] = -2.0 * cost.q_weight[i] * cost.reference[i];
        let row = on + dims.y_future().start + i;
        m[(k, row)] = -1.0;
        m[(row, k)] = 1.0;
    }
    for i in 0..kappa {
        m[(og + i, og + i)] = params.eps_g;
    }
    for r in 0..dims.rows() {
        m[(on + r, on + r)] = params.eps_nu;
        for j in 0..kappa {
            m[(og + j, on + r)] = h[(r, j)];
            m[(on + r, og + j)] = -h[(r, j)];
        }
    }
    let data = model.assemble_rhs(&vec![0.0; nu_len], &vec![0.0; ylen])?;
    for (r, v) in data.into_iter().enumerate() {
        b[on + r] = v;
    }
    Ok((m, b))
}

/// `σ_Ψ = ‖M‖₂` and `η = λ_min((M + Mᵀ)/2)` of the dense saddle operator.
pub fn estimate_saddle_constants(
    model: &BehavioralModel,
    cost: &TrackingCost,
    params: &SaddleParams,
) -> Result<SaddleConstants> {
    estimate_saddle_constants_with_limit(model, cost, params, DENSE_LIMIT)
}

pub fn estimate_saddle_constants_with_limit(
    model: &BehavioralModel,
    cost: &TrackingCost,
    params: &SaddleParams,
    limit: usize,
) -> Result<SaddleConstants> {
    let (m, _) = saddle_operator(model, cost, params, limit)?;
    let sigma_psi = m.singular_values().iter().copied().fold(0.0, f64::max);
    let sym = (&m + m.transpose()) * 0.5;
    let eta = sym
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(SaddleConstants { sigma_psi, eta })
}

/// `‖H‖₂` by power iteration on `HᵀH`, using whichever product kernel the
/// model is configured for. Starts from the all-ones vector.
pub fn estimate_h_norm(model: &BehavioralModel, iterations: usize) -> Result<f64> {
    let kappa = model.kappa();
    let mut v = vec![1.0 / (kappa as f64).sqrt(); kappa];
    let mut sigma = 0.0;
    for _ in 0..iterations.max(1) {
        let w = model.apply_h_transpose(&model.apply_h(&v)?)?;
        let norm = dot(&w, &w).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        sigma = norm.sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
    }
    Ok(sigma)
}

/// Step size `η / σ²` built from bounds that need only `‖H‖₂`.
///
/// `η` is the smallest positive diagonal weight among `2q`, `2r`, `ε_g`,
/// `ε_ν` and `σ² ≥ ‖H‖² + 1 + (largest diagonal weight)²` bounds the squared
/// norm of the saddle operator. A zero input weight leaves `u` without
/// curvature of its own, so it is skipped when picking `η`.
pub fn default_step_size(h_norm: f64, cost: &TrackingCost, params: &SaddleParams) -> f64 {
    let diag = cost
        .q_weight
        .iter()
        .chain(&cost.r_weight)
        .map(|w| 2.0 * w)
        .chain([params.eps_g, params.eps_nu]);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for w in diag.filter(|&w| w > 0.0) {
        lo = lo.min(w);
        hi = hi.max(w);
    }
    lo / (h_norm * h_norm + 1.0 + hi * hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::Signal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_model() -> BehavioralModel {
        // m = p = 1, T_ini = N = 1, κ = 2
        let u = Signal::scalar(&[1.0, 2.0, 3.0]).unwrap();
        let y = Signal::scalar(&[0.5, -1.0, 2.0]).unwrap();
        BehavioralModel::unchecked(&u, &y, 1, 1).unwrap()
    }

    fn random_model(seed: u64) -> BehavioralModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Signal::new(1, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let y = Signal::new(1, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        BehavioralModel::unchecked(&u, &y, 2, 2).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, dims: &Dims) -> SolverState {
        let z: Vec<f64> = (0..dims.z_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SolverState::from_vec(dims, &z).unwrap()
    }

    #[test]
    fn params_must_be_positive() {
        assert!(SaddleParams::new(0.1, 0.1, 0.1).is_ok());
        assert!(SaddleParams::new(0.0, 0.1, 0.1).is_err());
        assert!(SaddleParams::new(0.1, -1.0, 0.1).is_err());
        assert!(SaddleParams::new(0.1, 0.1, f64::NAN).is_err());
    }

    #[test]
    fn projection_examples() {
        let b = ConstraintBox::uniform(2, -1.0, 1.0).unwrap();
        assert_eq!(project_box(&[2.0, -3.0], &b), vec![1.0, -1.0]);
        assert_eq!(project_box(&[0.5, -0.25], &b), vec![0.5, -0.25]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lo: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..0.0)).collect();
        let hi: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b = ConstraintBox::new(lo.clone(), hi.clone()).unwrap();
        let v: Vec<f64> = (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let p = project_box(&v, &b);
        for i in 0..20 {
            assert_eq!(p[i], f64::min(f64::max(v[i], lo[i]), hi[i]));
        }
    }

    #[test]
    fn gradient_examples() {
        let c = TrackingCost::tracking(vec![1.0], 1);
        let (gu, gy) = cost_gradient(&c, &[0.7], &[3.0]);
        assert_eq!(gy, vec![4.0]);
        assert_eq!(gu, vec![0.0]);
        let (gu, gy) = cost_gradient(&c, &[0.0], &[1.0]);
        assert_eq!((gu, gy), (vec![0.0], vec![0.0]));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reference: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = TrackingCost::weighted(reference, &[0.5, 2.0], &[0.3], 3).unwrap();
        let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (gu, gy) = cost_gradient(&c, &u, &y);
        let h = 1e-5;
        for i in 0..3 {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[i] += h;
            um[i] -= h;
            let fd = (c.value(&up, &y) - c.value(&um, &y)) / (2.0 * h);
            assert!((fd - gu[i]).abs() < 1e-6);
        }
        for i in 0..6 {
            let (mut yp, mut ym) = (y.clone(), y.clone());
            yp[i] += h;
            ym[i] -= h;
            let fd = (c.value(&u, &yp) - c.value(&u, &ym)) / (2.0 * h);
            assert!((fd - gy[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn lagrangian_term_isolation() {
        let md = tiny_model();
        let dims = md.dims();
        let p = SaddleParams::new(0.1, 0.2, 0.3).unwrap();
        let zero_cost = TrackingCost::tracking(vec![0.0], 1);
        let md0 = md.clone().with_initial_trajectory(vec![0.0], vec![0.0]).unwrap();
        let z = SolverState::zeros(&dims);
        assert_eq!(lagrangian_value(&md0, &z, &zero_cost, &p).unwrap(), 0.0);

        let cost = TrackingCost::tracking(vec![0.25], 1);
        let mut s = SolverState::zeros(&dims);
        s.u = vec![0.4];
        s.y = vec![-0.5];
        let l = lagrangian_value(&md, &s, &cost, &p).unwrap();
        assert!((l - cost.value(&s.u, &s.y)).abs() < 1e-15);
    }

    #[test]
    fn lagrangian_matches_dense_terms() {
        let md = random_model(2);
        let dims = md.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_state(&mut rng, &dims);
        let reference: Vec<f64> = (0..dims.y_len()).map(|_| rng.gen_range(0.0..0.1)).collect();
        let cost = TrackingCost::tracking(reference.clone(), dims.u_len());
        let p = SaddleParams::new(0.1, 0.2, 0.3).unwrap();
        let h = md.materialize();
        let g = DVector::from_column_slice(&s.g);
        let nu = DVector::from_column_slice(&s.nu);
        let rhs = DVector::from_column_slice(&md.assemble_rhs(&s.u, &s.y).unwrap());
        let f: f64 = s.y.iter().zip(&reference).map(|(y, r)| (y - r).powi(2)).sum();
        let want = f + 0.1 * g.norm_squared() + nu.dot(&(&h * &g - rhs)) - 0.15 * nu.norm_squared();
        let got = lagrangian_value(&md, &s, &cost, &p).unwrap();
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn zero_step_is_identity() {
        let md = random_model(3);
        let dims = md.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_state(&mut rng, &dims);
        let cost = TrackingCost::tracking(vec![0.05; dims.y_len()], dims.u_len());
        let p = SaddleParams {
            alpha: 0.0,
            eps_g: 0.1,
            eps_nu: 0.1,
        };
        let next = static_step(&md, &s, &cost, &p, &Boxes::unbounded(&dims)).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn one_step_from_zero_by_hand() {
        // H = [[1,2],[2,3],[0.5,-1],[-1,2]], u_ini = 3, y_ini = 2, r = 1
        let md = tiny_model();
        let dims = md.dims();
        let cost = TrackingCost::tracking(vec![1.0], 1);
        let p = SaddleParams::new(0.5, 0.1, 0.2).unwrap();
        let next = static_step(&md, &SolverState::zeros(&dims), &cost, &p, &Boxes::unbounded(&dims)).unwrap();
        // u: 0 − 0.5·(0 − 0) = 0; y: 0 − 0.5·(2·(0 − 1) − 0) = 1
        assert_eq!(next.u, vec![0.0]);
        assert_eq!(next.y, vec![1.0]);
        // g: 0 − 0.5·(Hᵀ·0 + 0.1·0) = 0
        assert_eq!(next.g, vec![0.0, 0.0]);
        // ν: 0 + 0.5·(H·0 − h − 0) = −0.5·(u_ini, u, y_ini, y) = −0.5·(3, 0, 2, 0)
        assert_eq!(next.nu, vec![-1.5, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn boxes_are_respected() {
        let md = random_model(4);
        let dims = md.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = random_state(&mut rng, &dims);
        let cost = TrackingCost::tracking(vec![3.0; dims.y_len()], dims.u_len());
        let boxes = Boxes {
            input: ConstraintBox::uniform(dims.u_len(), -0.1, 0.1).unwrap(),
            output: ConstraintBox::uniform(dims.y_len(), -0.2, 0.2).unwrap(),
        };
        let p = SaddleParams::new(0.2, 0.1, 0.1).unwrap();
        for _ in 0..50 {
            s = static_step(&md, &s, &cost, &p, &boxes).unwrap();
            assert!(boxes.input.contains(&s.u));
            assert!(boxes.output.contains(&s.y));
        }
    }

    #[test]
    fn divergence_is_reported() {
        let md = random_model(5);
        let dims = md.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = random_state(&mut rng, &dims);
        let cost = TrackingCost::tracking(vec![0.0; dims.y_len()], dims.u_len());
        let p = SaddleParams::new(50.0, 0.1, 0.1).unwrap();
        let boxes = Boxes::unbounded(&dims);
        let err = (0..200)
            .find_map(|_| match static_step(&md, &s, &cost, &p, &boxes) {
                Ok(next) => {
                    s = next;
                    None
                }
                Err(e) => Some(e),
            })
            .expect("large step must diverge");
        match err {
            Error::Divergence { dump, .. } => assert_eq!(dump.len(), dims.z_len()),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn shift_drops_first_blocks() {
        let md = random_model(6);
        let dims = md.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_state(&mut rng, &dims);
        let sh = shift_state(&s, &dims).unwrap();
        assert_eq!(&sh.u[..dims.u_len() - 1], &s.u[1..]);
        assert_eq!(sh.u[dims.u_len() - 1], 0.0);
        assert_eq!(sh.g, s.g);
        let ur = dims.u_rows();
        assert_eq!(&sh.nu[..ur - 1], &s.nu[1..ur]);
        assert_eq!(sh.nu[ur - 1], 0.0);
        assert_eq!(&sh.nu[ur..dims.rows() - 1], &s.nu[ur + 1..]);
    }

    #[test]
    fn contraction_examples() {
        assert_eq!(contraction_factor(0.0, 3.0, 1.0).unwrap().rho, 1.0);
        let c = contraction_factor(1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.rho, 0.0);
        assert!(c.contracts);
        assert!(matches!(
            contraction_factor(1.0, 0.5, 1.0),
            Err(Error::NegativeRadicand(_))
        ));
        assert!(contraction_factor(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn optimal_alpha_minimizes_rho() {
        let k = SaddleConstants {
            sigma_psi: 3.0,
            eta: 0.5,
        };
        let best = contraction_factor(k.optimal_alpha(), k.sigma_psi, k.eta).unwrap().rho;
        for i in 1..2000 {
            let alpha = i as f64 * 1e-4;
            let rho = contraction_factor(alpha, k.sigma_psi, k.eta).unwrap().rho;
            assert!(rho >= best - 1e-12, "alpha {alpha}");
        }
    }

    #[test]
    fn pure_regularization_constants() {
        // H = 0, weights q = r = ε/2: the operator is ε·I plus a skew part.
        let u = Signal::scalar(&[0.0; 5]).unwrap();
        let md = BehavioralModel::unchecked(&u, &u, 1, 2).unwrap();
        let dims = md.dims();
        let eps = 0.3;
        let cost = TrackingCost::weighted(vec![0.0; 2], &[eps / 2.0], &[eps / 2.0], 2).unwrap();
        let p = SaddleParams::new(0.1, eps, eps).unwrap();
        let k = estimate_saddle_constants(&md, &cost, &p).unwrap();
        assert!((k.eta - eps).abs() < 1e-12);
        // no cost at all leaves the (u, y) directions with zero curvature
        let cost = TrackingCost::weighted(vec![0.0; 2], &[0.0], &[0.0], 2).unwrap();
        let k = estimate_saddle_constants(&md, &cost, &p).unwrap();
        assert!(k.eta.abs() < 1e-12);
        let _ = dims;
    }

    #[test]
    fn dense_limit_is_enforced() {
        let md = random_model(7);
        let dims = md.dims();
        let cost = TrackingCost::tracking(vec![0.0; dims.y_len()], dims.u_len());
        let p = SaddleParams::new(0.1, 0.1, 0.1).unwrap();
        assert!(matches!(
            estimate_saddle_constants_with_limit(&md, &cost, &p, 5),
            Err(Error::UnsupportedSize { .. })
        ));
    }

    #[test]
    fn operator_reproduces_unconstrained_step() {
        let md = random_model(9);
        let dims = md.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_state(&mut rng, &dims);
        let reference: Vec<f64> = (0..dims.y_len()).map(|_| rng.gen_range(0.0..0.1)).collect();
        let cost = TrackingCost::weighted(reference, &[1.0], &[0.2], dims.horizon).unwrap();
        let p = SaddleParams::new(0.05, 0.1, 0.1).unwrap();
        let (m, b) = saddle_operator(&md, &cost, &p, DENSE_LIMIT).unwrap();
        let z = DVector::from_vec(s.to_vec());
        let want = &z - (&m * &z + &b) * p.alpha;
        let got = static_step(&md, &s, &cost, &p, &Boxes::unbounded(&dims)).unwrap();
        let diff = (DVector::from_vec(got.to_vec()) - want).amax();
        assert!(diff < 1e-12);
    }

    #[test]
    fn power_iteration_matches_dense_norm() {
        let model = random_model(21);
        let dense = model.materialize().singular_values().iter().copied().fold(0.0, f64::max);
        let est = estimate_h_norm(&model, 500).unwrap();
        assert!((est - dense).abs() < 1e-8 * dense);
    }

    #[test]
    fn default_step_contracts() {
        let model = random_model(22);
        let dims = model.dims();
        let cost = TrackingCost::weighted(vec![0.0; dims.y_len()], &[1.0], &[0.1], dims.horizon).unwrap();
        let params = SaddleParams::new(1.0, 0.1, 0.1).unwrap();
        let alpha = default_step_size(estimate_h_norm(&model, 500).unwrap(), &cost, &params);
        let k = estimate_saddle_constants(&model, &cost, &params).unwrap();
        assert!(contraction_factor(alpha, k.sigma_psi, k.eta).unwrap().contracts);
    }
}
