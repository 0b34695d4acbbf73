//! Multiply a block Hankel matrix and its transpose by vectors without
//! forming the matrix, and compare against the dense product.

use odeepc::convolution::TransformLength;
use odeepc::hankel::{BlockHankelView, Signal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> odeepc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (dim, depth, len) = (3, 40, 400);
    let samples: Vec<f64> = (0..dim * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let signal = Signal::new(dim, samples)?;
    let view = BlockHankelView::new(&signal, depth, TransformLength::PowerOfTwo)?;
    println!("H is {} x {} ({} channels, depth {})", view.rows(), view.cols(), dim, depth);

    let v: Vec<f64> = (0..view.cols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..view.rows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let err = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    let hv = view.mul_vec(&v)?;
    println!("|Hv - dense|      = {:.2e}", err(&hv, &view.dense_mul_vec(&v)?));
    let htw = view.transpose_mul_vec(&w)?;
    println!("|H^T w - dense|   = {:.2e}", err(&htw, &view.dense_transpose_mul_vec(&w)?));

    // a new sample slides the window by one column
    let slid = view.slide_window(&[0.5, -0.5, 0.25])?;
    let hv = slid.mul_vec(&v)?;
    println!("after one slide   = {:.2e}", err(&hv, &slid.dense_mul_vec(&v)?));
    Ok(())
}
