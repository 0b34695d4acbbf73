//! Build a data-driven model of a plant and predict a trajectory from it.

use nalgebra::DVector;
use odeepc::hankel::Signal;
use odeepc::plant::generate_random_system;
use odeepc::BehavioralModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> odeepc::Result<()> {
    let (t_ini, horizon) = (4, 8);
    let mut plant = generate_random_system(3, 1, 1, 11)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u: Vec<f64> = (0..80).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = u.iter().map(|&v| plant.step(&[v]).map(|y| y[0])).collect::<odeepc::Result<_>>()?;
    let model = BehavioralModel::new(&Signal::scalar(&u)?, &Signal::scalar(&y)?, t_ini, horizon)?;
    println!("kappa = {}, H has {} rows", model.kappa(), model.dims().rows());

    // past window plus a chosen future input; solve for g, read off the
    // predicted future output and compare with the plant
    let u_tot: Vec<f64> = (0..t_ini + horizon).map(|t| (0.4 * t as f64).cos()).collect();
    let mut probe = plant.clone();
    let y_tot: Vec<f64> = u_tot.iter().map(|&v| probe.step(&[v]).map(|y| y[0])).collect::<odeepc::Result<_>>()?;
    let h = model.materialize();
    let rows = 2 * t_ini + horizon;
    let known: Vec<usize> = (0..rows).collect();
    let a = h.select_rows(&known);
    let b = DVector::from_vec([&u_tot[..], &y_tot[..t_ini]].concat());
    let g = a.svd(true, true).solve(&b, 1e-10).map_err(|e| odeepc::Error::InvalidArgument(e.into()))?;
    let predicted = model.apply_h(g.as_slice())?;
    for k in 0..horizon {
        println!("k={k} plant {:+.5} model {:+.5}", y_tot[t_ini + k], predicted[rows + k]);
    }
    Ok(())
}
