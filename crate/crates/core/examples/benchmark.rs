//! Time FFT-based against dense Hankel products across sizes.

use odeepc::experiment::{bench_products, loglog_slope, BenchSize};

fn main() -> odeepc::Result<()> {
    let mut sizes: Vec<BenchSize> = (8..=12).map(|k| BenchSize { d: 1, depth: 1 << k, kappa: 1 << k }).collect();
    sizes.push(BenchSize { d: 20, depth: 140, kappa: 1651 });
    let rows = bench_products(&sizes, 3, 1)?;
    for r in &rows {
        println!(
            "d={:<3} L={:<5} kappa={:<5} fast {:>8.4} ms  dense {:>9}  speedup {}",
            r.d,
            r.depth,
            r.kappa,
            r.fast_ms,
            r.dense_ms.map_or("-".into(), |d| format!("{d:.4} ms")),
            r.speedup().map_or("-".into(), |s| format!("{s:.1}x"))
        );
    }
    let scalar: Vec<_> = rows.iter().filter(|r| r.d == 1).collect();
    let x: Vec<f64> = scalar.iter().map(|r| r.depth as f64).collect();
    let y: Vec<f64> = scalar.iter().map(|r| r.fast_ms).collect();
    println!("log-log slope of the fast path: {:.3}", loglog_slope(&x, &y));
    Ok(())
}
