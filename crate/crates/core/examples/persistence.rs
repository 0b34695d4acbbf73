//! Check whether an input sequence is persistently exciting.

use odeepc::hankel::{is_persistently_exciting, Signal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> odeepc::Result<()> {
    let order = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sine: Vec<f64> = (0..200).map(|t| (0.3 * t as f64).sin()).collect();
    let constant = vec![1.0; 200];
    for (name, values) in [("uniform noise", noise), ("single sine", sine), ("constant", constant)] {
        let r = is_persistently_exciting(&Signal::scalar(&values)?, order)?;
        println!(
            "{name:<14} order {order}: rank {}/{} exciting={} sigma_min={:.2e}",
            r.rank, r.rows, r.exciting, r.sigma_min
        );
    }
    Ok(())
}
