#![allow(dead_code)]

pub mod jacobi;

use qicert::rng;
use qicert::DenseMatrix;
use rand::Rng;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut g = rng::stream(seed, "test-matrix", 0);
    let data = (0..rows * cols)
        .map(|_| g.random_range(-1.0..1.0))
        .collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

pub fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
    let a = random_matrix(n, n, seed);
    let mut s = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, 0.5 * (a.get(i, j) + a.get(j, i))).unwrap();
        }
    }
    s
}
