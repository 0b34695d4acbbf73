//! Run the regularized primal-dual iteration on one problem instance and
//! watch it contract toward the saddle point.

use odeepc::behavioral::ConstraintBox;
use odeepc::hankel::Signal;
use odeepc::plant::generate_random_system;
use odeepc::solver::{
    contraction_factor, estimate_saddle_constants, saddle_operator, static_step, Boxes, SaddleParams, SolverState,
    TrackingCost,
};
use odeepc::BehavioralModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> odeepc::Result<()> {
    let mut plant = generate_random_system(2, 1, 1, 5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = u.iter().map(|&v| plant.step(&[v]).map(|y| y[0])).collect::<odeepc::Result<_>>()?;
    let model = BehavioralModel::new(&Signal::scalar(&u)?, &Signal::scalar(&y)?, 3, 4)?;
    let dims = model.dims();
    let cost = TrackingCost::weighted(vec![0.3, -0.2, 0.1, 0.4], &[1.0], &[0.5], 4)?;

    let k = estimate_saddle_constants(&model, &cost, &SaddleParams::new(1.0, 0.5, 0.5)?)?;
    let alpha = k.optimal_alpha();
    let rho = contraction_factor(alpha, k.sigma_psi, k.eta)?.rho;
    println!("sigma = {:.3}, eta = {:.3}, alpha* = {alpha:.3e}, rho = {rho:.6}", k.sigma_psi, k.eta);

    let params = SaddleParams::new(alpha, 0.5, 0.5)?;
    let (m, b) = saddle_operator(&model, &cost, &params, 4000)?;
    let star = m.lu().solve(&(-b)).expect("saddle operator is invertible");
    let boxes = Boxes {
        input: ConstraintBox::uniform(dims.u_len(), -10.0, 10.0)?,
        output: ConstraintBox::unbounded(dims.y_len()),
    };
    let mut state = SolverState::zeros(&dims);
    for it in 0..=2000 {
        if it % 250 == 0 {
            let d: f64 = state.to_vec().iter().zip(star.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            println!("iteration {it:>5}: distance {d:.3e}, bound {:.3e}", rho.powi(it));
        }
        state = static_step(&model, &state, &cost, &params, &boxes)?;
    }
    Ok(())
}
