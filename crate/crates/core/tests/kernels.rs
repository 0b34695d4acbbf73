mod common;

use nalgebra::DVector;
use odeepc::convolution::{
    fft_convolve, hankel_transpose_vec, hankel_transpose_vec_with, hankel_vec, hankel_vec_with, ScalarHankel,
    TransformLength,
};
use odeepc::hankel::{slide_window, BlockHankelView, Signal};
use proptest::prelude::*;

use common::*;

fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn scalar_case() -> impl Strategy<Value = (Vec<f64>, usize, usize, Vec<f64>, Vec<f64>)> {
    (1usize..48, 1usize..48).prop_flat_map(|(n, m)| (values(n + m - 1), Just(n), Just(m), values(m), values(n)))
}

fn block_case() -> impl Strategy<Value = (Vec<f64>, usize, usize, Vec<f64>, Vec<f64>)> {
    (1usize..4, 1usize..20, 1usize..30).prop_flat_map(|(d, n, m)| {
        (values(d * (n + m - 1)), Just(d), Just(n), values(m), values(d * n))
    })
}

fn dense_mv(m: &nalgebra::DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).data.into()
}

fn dense_tmv(m: &nalgebra::DMatrix<f64>, w: &[f64]) -> Vec<f64> {
    m.tr_mul(&DVector::from_column_slice(w)).data.into()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #[test]
    fn scalar_products_match_dense((seq, n, m, v, w) in scalar_case()) {
        let h = ScalarHankel::new(seq, n, m).unwrap();
        let dense = h.materialize();
        for length in [TransformLength::Exact, TransformLength::PowerOfTwo] {
            prop_assert!(rel_err(&hankel_vec_with(&h, &v, length).unwrap(), &dense_mv(&dense, &v)) < 1e-10);
            prop_assert!(rel_err(&hankel_transpose_vec_with(&h, &w, length).unwrap(), &dense_tmv(&dense, &w)) < 1e-10);
        }
    }

    #[test]
    fn block_products_match_dense((samples, d, n, v, w) in block_case()) {
        let sig = Signal::new(d, samples.clone()).unwrap();
        let view = BlockHankelView::new(&sig, n, TransformLength::PowerOfTwo).unwrap();
        let dense = dense_hankel(&samples, d, n);
        prop_assert!(rel_err(&view.mul_vec(&v).unwrap(), &dense_mv(&dense, &v)) < 1e-10);
        prop_assert!(rel_err(&view.transpose_mul_vec(&w).unwrap(), &dense_tmv(&dense, &w)) < 1e-10);
    }

    #[test]
    fn products_are_linear((seq, n, m, v, _w) in scalar_case(), b in values(47), s in -3.0f64..3.0) {
        let h = ScalarHankel::new(seq, n, m).unwrap();
        let b = &b[..m];
        let combo: Vec<f64> = v.iter().zip(b).map(|(x, y)| x + s * y).collect();
        let lhs = hankel_vec(&h, &combo).unwrap();
        let hv = hankel_vec(&h, &v).unwrap();
        let hb = hankel_vec(&h, b).unwrap();
        let rhs: Vec<f64> = hv.iter().zip(&hb).map(|(x, y)| x + s * y).collect();
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn transpose_is_adjoint((samples, d, n, v, w) in block_case()) {
        let sig = Signal::new(d, samples).unwrap();
        let view = BlockHankelView::new(&sig, n, TransformLength::Exact).unwrap();
        let left = dot(&view.mul_vec(&v).unwrap(), &w);
        let right = dot(&v, &view.transpose_mul_vec(&w).unwrap());
        prop_assert!((left - right).abs() <= 1e-10 * (1.0 + left.abs()));
    }

    #[test]
    fn slide_matches_rebuilt_window((samples, d, n, v, w) in block_case(), newest in values(3)) {
        let sig = Signal::new(d, samples.clone()).unwrap();
        let view = BlockHankelView::new(&sig, n, TransformLength::PowerOfTwo).unwrap();
        let slid = slide_window(&view, &newest[..d]).unwrap();
        let mut moved = samples[d..].to_vec();
        moved.extend_from_slice(&newest[..d]);
        let dense = dense_hankel(&moved, d, n);
        prop_assert_eq!(slid.materialize(), dense.clone());
        prop_assert!(rel_err(&slid.mul_vec(&v).unwrap(), &dense_mv(&dense, &v)) < 1e-10);
        prop_assert!(rel_err(&slid.transpose_mul_vec(&w).unwrap(), &dense_tmv(&dense, &w)) < 1e-10);
    }

    #[test]
    fn circular_convolution_matches_direct(ab in (1usize..40).prop_flat_map(|n| (values(n), values(n)))) {
        let (a, b) = ab;
        let n = a.len();
        let mut want = vec![0.0; n];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                want[(i + j) % n] += x * y;
            }
        }
        prop_assert!(max_abs_diff(&fft_convolve(&a, &b).unwrap(), &want) < 1e-10);
    }
}

#[test]
fn repeated_slides_stay_exact() {
    let mut r = rng(3);
    let (d, n, m) = (3, 7, 40);
    let mut samples = random_vec(&mut r, d * (n + m - 1));
    let sig = Signal::new(d, samples.clone()).unwrap();
    let mut view = BlockHankelView::new(&sig, n, TransformLength::PowerOfTwo).unwrap();
    for _ in 0..500 {
        let newest = random_vec(&mut r, d);
        view = view.slide_window(&newest).unwrap();
        samples.drain(..d);
        samples.extend_from_slice(&newest);
    }
    let v = random_vec(&mut r, m);
    let dense = dense_hankel(&samples, d, n);
    assert!(rel_err(&view.mul_vec(&v).unwrap(), &dense_mv(&dense, &v)) < 1e-10);
    assert_eq!(view.window().as_slice(), &samples[..]);
}

#[test]
fn transpose_of_scalar_swaps_shape() {
    let h = ScalarHankel::new((0..9).map(f64::from).collect(), 4, 6).unwrap();
    let w = vec![1.0, -1.0, 0.5, 2.0];
    assert!(max_abs_diff(&hankel_transpose_vec(&h, &w).unwrap(), &hankel_vec(&h.transpose(), &w).unwrap()) < 1e-12);
}
