//! Closed-loop tracking on a small drifting plant, online against frozen
//! data. Pass `--full` for the full-size configuration (slow).

use odeepc::experiment::{generate_dataset, run_with_dataset, summarize_windows, ControllerMode, ExperimentConfig};

fn main() -> odeepc::Result<()> {
    let full = std::env::args().any(|a| a == "--full");
    let mut cfg = if full { ExperimentConfig::full_size() } else { ExperimentConfig::small() };
    if !full {
        cfg.scenario.total_steps = 600;
        cfg.scenario.reference_hold = 200;
    }
    let dataset = generate_dataset(&cfg)?;
    println!(
        "dataset of {} samples, persistence rank {}/{}",
        dataset.inputs.len(),
        dataset.persistence.rank,
        dataset.persistence.rows
    );
    for mode in [ControllerMode::Online, ControllerMode::Frozen] {
        cfg.controller.mode = mode;
        let out = run_with_dataset(&cfg, &dataset)?;
        println!("{mode}: alpha {:.3e}, {} iterations, halted {:?}", out.alpha, out.trace.len(), out.halted);
        for w in summarize_windows(&out.trace, cfg.scenario.reference_hold, cfg.controller.horizon) {
            println!(
                "  window {}: cost {:.3e} -> {:.3e} (peak {:.3e}), mean violation {:.3e}",
                w.window, w.first_cost, w.terminal_cost, w.peak_cost, w.mean_violation
            );
        }
    }
    Ok(())
}
