//! Small shared numerics: a dense matrix exponential and a derivative-free
//! minimizer.

use nalgebra::DMatrix;

use crate::scalar::{rf, Real};

/// Matrix exponential by scaling and squaring with a 6th-order Padé
/// approximant; sized for the small generators used in this crate.
pub(crate) fn expm<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let norm = a.iter().fold(T::zero(), |acc, &x| acc + x.abs());
    let scale_pow = if norm > rf(0.5) {
        (norm / rf(0.5)).log2().ceil().to_f64() as i32
    } else {
        0
    };
    let scaled = a / rf::<T>(2f64.powi(scale_pow));
    let ident = DMatrix::<T>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b: [f64; 7] = [1.0, 0.5, 1.0 / 9.0, 1.0 / 72.0, 1.0 / 1008.0, 1.0 / 30240.0, 1.0 / 665280.0];
    let u = &scaled * (&ident * rf::<T>(b[1]) + &a2 * rf::<T>(b[3]) + &a4 * rf::<T>(b[5]));
    let v = &ident * rf::<T>(b[0]) + &a2 * rf::<T>(b[2]) + &a4 * rf::<T>(b[4]) + &a6 * rf::<T>(b[6]);
    let num = &v + &u;
    let den = &v - &u;
    let mut result = den.lu().solve(&num).expect("Padé denominator invertible");
    for _ in 0..scale_pow {
        result = &result * &result;
    }
    result
}

/// Plain Nelder-Mead minimizer; deterministic for a fixed start.
pub(crate) fn nelder_mead<T: Real>(
    f: &dyn Fn(&[T]) -> T,
    start: &[T],
    tol: T,
    max_iter: usize,
) -> (Vec<T>, T) {
    let dim = start.len();
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), f(start)));
    for k in 0..dim {
        let mut p = start.to_vec();
        let step = if p[k].abs() > rf(1e-8) { p[k] * rf(0.25) } else { rf(0.1) };
        p[k] += step;
        let value = f(&p);
        simplex.push((p, value));
    }
    let (alpha, gamma, rho, sigma) = (rf::<T>(1.0), rf::<T>(2.0), rf::<T>(0.5), rf::<T>(0.5));
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite objective"));
        if (simplex[dim].1 - simplex[0].1).abs() <= tol * (T::one() + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<T> = (0..dim)
            .map(|k| {
                simplex[..dim].iter().map(|(p, _)| p[k]).fold(T::zero(), |a, b| a + b) / rf(dim as f64)
            })
            .collect();
        let worst = simplex[dim].clone();
        let reflect: Vec<T> =
            centroid.iter().zip(&worst.0).map(|(&c, &w)| c + alpha * (c - w)).collect();
        let fr = f(&reflect);
        if fr < simplex[0].1 {
            let expand: Vec<T> =
                centroid.iter().zip(&reflect).map(|(&c, &r)| c + gamma * (r - c)).collect();
            let fe = f(&expand);
            simplex[dim] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflect, fr);
        } else {
            let contract: Vec<T> =
                centroid.iter().zip(&worst.0).map(|(&c, &w)| c + rho * (w - c)).collect();
            let fc = f(&contract);
            if fc < worst.1 {
                simplex[dim] = (contract, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<T> =
                        best.iter().zip(&entry.0).map(|(&b, &p)| b + sigma * (p - b)).collect();
                    let value = f(&shrunk);
                    *entry = (shrunk, value);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite objective"));
    let (p, value) = simplex.swap_remove(0);
    (p, value)
}
