//! Rough timings for the linear-algebra kernels the simulator leans on.
//! Run with `cargo run --release --example bench_kernels`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use std::time::Instant;

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);

    for dim in [256usize, 1024] {
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..=i {
                let x: f64 = rng.gen_range(-1.0..1.0);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        let t0 = Instant::now();
        let eig = SymmetricEigen::new(m.clone());
        println!("symmetric eigen {dim}x{dim}: {:.2?} (lambda0 = {:.3})", t0.elapsed(), eig.eigenvalues[0]);
    }

    for dim in [128usize, 256] {
        let a = DMatrix::<Complex64>::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let b = a.clone();
        let t0 = Instant::now();
        let reps = 20;
        let mut acc = Complex64::new(0.0, 0.0);
        for _ in 0..reps {
            let c = &a * &b;
            acc += c[(0, 0)];
        }
        let dt = t0.elapsed().as_secs_f64() / reps as f64;
        let gflops = 8.0 * (dim as f64).powi(3) / dt / 1e9;
        println!("complex gemm {dim}x{dim}: {:.3} ms/op, {gflops:.2} Gflop/s ({acc:.1})", dt * 1e3);
    }

    let (rows, cols) = (256usize, 128);
    let a = DMatrix::<Complex64>::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let t0 = Instant::now();
    let svd = a.clone().svd(true, true);
    println!("complex svd {rows}x{cols}: {:.2?} (sigma0 = {:.3})", t0.elapsed(), svd.singular_values[0]);

    let t0 = Instant::now();
    let qr = a.clone().qr();
    println!("complex qr {rows}x{cols}: {:.2?} (r00 = {:.3})", t0.elapsed(), qr.r()[(0, 0)]);

    // Sparse matvec at N = 15 (dim 32768), the Krylov workhorse.
    let n = 15usize;
    let dim = 1 << n;
    let diag: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1500.0)).collect();
    let state: Vec<Complex64> =
        (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    let t0 = Instant::now();
    let reps = 50;
    for _ in 0..reps {
        for k in 0..dim {
            out[k] = state[k] * diag[k];
        }
        for k in 0..dim {
            let amp = state[k] * 3.14;
            for i in 0..n {
                out[k ^ (1 << i)] += amp;
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64() / reps as f64;
    println!("sparse matvec N=15: {:.3} ms/op ({:.2})", dt * 1e3, out[0].re);
}
