//! Generate a random plant, simulate it, let it drift and save a snapshot.

use odeepc::plant::{generate_random_system, DriftSpec, PlantSnapshot, SeedLineage};

fn main() -> odeepc::Result<()> {
    let mut plant = generate_random_system(4, 2, 2, 21)?;
    println!(
        "n={} m={} p={} controllable={} observable={}",
        plant.states(),
        plant.inputs(),
        plant.outputs(),
        plant.is_controllable(),
        plant.is_observable()
    );
    for t in 0..5 {
        let y = plant.step(&[1.0, -0.5])?;
        println!("t={t} y={y:.4?}");
    }
    let spec = DriftSpec {
        per_step_fraction_bound: 1e-3,
        rng_seed: 22,
    };
    let before = plant.clone();
    for t in 0..100 {
        plant.apply_drift(&spec, t);
    }
    let moved = (&plant.a - &before.a).norm() / before.a.norm();
    println!("relative change of A after 100 drift steps: {moved:.3e}");

    let path = std::env::temp_dir().join("odeepc-plant.toml");
    plant.to_snapshot(SeedLineage { system_seed: 21, drift_seed: 22, drift_steps: 100 }).write(&path)?;
    let back = PlantSnapshot::read(&path)?.to_plant()?;
    println!("snapshot {} restores A exactly: {}", path.display(), back.a == plant.a);
    Ok(())
}
