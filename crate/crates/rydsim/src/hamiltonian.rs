//! The Ising-like spin-1/2 chain Hamiltonian in the 2^N product basis.
//!
//! `H = H_0 + H_I` with the diagonal interaction/detuning part
//! `H_0 = Σ_{i>j} V_ij n̂_i n̂_j − (Δ/2) Σ_i σ̂_z^i` and the drive
//! `H_I = (Ω/2) Σ_i σ̂_x^i`. Basis index = integer value of the spin
//! bitstring (up = 1) with site 1 as the most significant bit, matching the
//! census ordering. All entries are real in this basis, so the operator is
//! stored as a real symmetric matrix: a diagonal plus a uniform amplitude
//! `Ω/2` on every single-spin-flip pair.

use nalgebra::DMatrix;
use num_complex::Complex;
use thiserror::Error;

use crate::geometry::InteractionMatrix;
use crate::scalar::{rf, Real};

/// Default atom-count cap for dense 2^N × 2^N workflows.
pub const DEFAULT_DENSE_CAP: usize = 14;

#[derive(Debug, Error, PartialEq)]
pub enum HamiltonianError {
    #[error("dimension overflow: N = {n} exceeds the dense cap {cap}")]
    DimensionOverflow { n: usize, cap: usize },
    #[error("state length {got} does not match dimension {want}")]
    LengthMismatch { got: usize, want: usize },
}

/// Drive and interaction parameters defining the postquench Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpinSystem<T: Real> {
    v: InteractionMatrix<T>,
    omega: T,
    delta: T,
}

impl<T: Real> SpinSystem<T> {
    /// `omega` and `delta` in rad/μs.
    pub fn new(v: InteractionMatrix<T>, omega: T, delta: T) -> Self {
        assert!(omega >= T::zero(), "Rabi frequency must be nonnegative");
        Self { v, omega, delta }
    }

    pub fn n(&self) -> usize {
        self.v.n()
    }

    pub fn dim(&self) -> usize {
        1usize << self.n()
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn interactions(&self) -> &InteractionMatrix<T> {
        &self.v
    }

    /// Same drive on a different interaction matrix.
    pub fn with_interactions(&self, v: InteractionMatrix<T>) -> Self {
        Self { v, omega: self.omega, delta: self.delta }
    }

    /// Same interactions with a different drive.
    pub fn with_drive(&self, omega: T, delta: T) -> Self {
        Self { v: self.v.clone(), omega, delta }
    }
}

/// Matrix-free sparse form: diagonal entries plus `Ω/2` between basis states
/// differing by exactly one spin flip.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian<T: Real> {
    n: usize,
    diag: Vec<T>,
    omega_half: T,
}

/// Assemble the sparse operator for any `N` (the diagonal costs 2^N · N²/2).
pub fn build_hamiltonian<T: Real>(sys: &SpinSystem<T>) -> SparseHamiltonian<T> {
    let n = sys.n();
    let dim = sys.dim();
    let half_delta = sys.delta / rf(2.0);
    let mut diag = vec![T::zero(); dim];
    for (s, out) in diag.iter_mut().enumerate() {
        let mut e = T::zero();
        for i in 0..n {
            if s & (1 << (n - 1 - i)) == 0 {
                e += half_delta; // σ_z = −1
                continue;
            }
            e -= half_delta; // σ_z = +1
            for j in i + 1..n {
                if s & (1 << (n - 1 - j)) != 0 {
                    e += sys.v.get(i, j);
                }
            }
        }
        *out = e;
    }
    SparseHamiltonian { n, diag, omega_half: sys.omega / rf(2.0) }
}

impl<T: Real> SparseHamiltonian<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diag
    }

    /// `out = H · state` for a complex amplitude vector.
    pub fn apply(&self, state: &[Complex<T>], out: &mut [Complex<T>]) -> Result<(), HamiltonianError> {
        let dim = self.dim();
        if state.len() != dim || out.len() != dim {
            return Err(HamiltonianError::LengthMismatch { got: state.len(), want: dim });
        }
        for (k, o) in out.iter_mut().enumerate() {
            *o = state[k] * self.diag[k];
        }
        if self.omega_half != T::zero() {
            for k in 0..dim {
                let amp = state[k] * self.omega_half;
                for i in 0..self.n {
                    let flipped = k ^ (1 << i);
                    out[flipped] += amp;
                }
            }
        }
        Ok(())
    }

    /// Convenience allocating form of [`SparseHamiltonian::apply`].
    pub fn apply_vec(&self, state: &[Complex<T>]) -> Result<Vec<Complex<T>>, HamiltonianError> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); state.len()];
        self.apply(state, &mut out)?;
        Ok(out)
    }

    /// Expectation value `⟨state|H|state⟩` (real up to rounding).
    pub fn expectation(&self, state: &[Complex<T>]) -> Result<T, HamiltonianError> {
        let h_state = self.apply_vec(state)?;
        let mut acc = T::zero();
        for (a, b) in state.iter().zip(&h_state) {
            acc += (a.conj() * b).re;
        }
        Ok(acc)
    }

    /// Dense real symmetric matrix, capped by `cap` atoms.
    pub fn to_dense(&self, cap: usize) -> Result<DMatrix<T>, HamiltonianError> {
        if self.n > cap {
            return Err(HamiltonianError::DimensionOverflow { n: self.n, cap });
        }
        let dim = self.dim();
        let mut h = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            h[(k, k)] = self.diag[k];
            for i in 0..self.n {
                h[(k, k ^ (1 << i))] = self.omega_half;
            }
        }
        Ok(h)
    }

    /// Nonzero entries as `(row, col, value)` triplets, diagonal first.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let dim = self.dim();
        let diag = self.diag.iter().enumerate().filter_map(|(k, &v)| (v != T::zero()).then_some((k, k, v)));
        let offdiag = (0..dim).flat_map(move |k| {
            (0..self.n).filter_map(move |i| {
                (self.omega_half != T::zero()).then_some((k, k ^ (1 << i), self.omega_half))
            })
        });
        diag.chain(offdiag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_chain, interaction_matrix};
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn system(n: usize, theta: f64, omega: f64, delta: f64) -> SpinSystem<f64> {
        let geom = build_chain(n, 4.0, theta).unwrap();
        let v = interaction_matrix(&geom, 470.0).unwrap().with_v12_override(20.0).unwrap();
        SpinSystem::new(v, omega, delta)
    }

    #[test]
    fn single_atom_eigenvalues() {
        let geom = build_chain(1, 4.0, 180.0).unwrap();
        let v = interaction_matrix(&geom, 470.0).unwrap();
        let sys = SpinSystem::new(v, 2.0, 0.0);
        let h = build_hamiltonian(&sys).to_dense(14).unwrap();
        let eig = nalgebra::SymmetricEigen::new(h);
        let mut evals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        evals.sort_by(f64::total_cmp);
        assert_relative_eq!(evals[0], -1.0, max_relative = 1e-12);
        assert_relative_eq!(evals[1], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn blockaded_pair_has_collective_rabi_frequency() {
        // Restricted to {|↓↓⟩, (|↑↓⟩+|↓↑⟩)/√2} the drive matrix element is
        // √2·Ω/2, i.e. a collective Rabi frequency of √2·Ω.
        let sys = system(2, 180.0, 2.0, 0.0);
        let h = build_hamiltonian(&sys);
        let down = [Complex64::new(1.0, 0.0), Complex64::ZERO, Complex64::ZERO, Complex64::ZERO];
        let h_down = h.apply_vec(&down).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // ⟨W|H|↓↓⟩ with |W⟩ = (|01⟩ + |10⟩)/√2
        let w_amp = s * (h_down[0b01] + h_down[0b10]);
        assert_relative_eq!(w_amp.re, 2.0 * std::f64::consts::SQRT_2 / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn hermitian_by_construction() {
        let sys = system(5, 60.0, 2.0, 0.7);
        let h = build_hamiltonian(&sys).to_dense(14).unwrap();
        let diff = (&h - h.transpose()).norm();
        assert_eq!(diff, 0.0);
    }

    #[test]
    fn apply_matches_trivial_cases() {
        let sys = system(4, 180.0, 2.0, 0.0);
        let h = build_hamiltonian(&sys);
        let mut down = vec![Complex64::ZERO; 16];
        down[0] = Complex64::new(1.0, 0.0);
        let out = h.apply_vec(&down).unwrap();
        // H|↓…↓⟩ = (Ω/2) Σ_i |…↑_i…⟩ and zero diagonal at Δ = 0.
        assert_eq!(out[0], Complex64::ZERO);
        for i in 0..4 {
            assert_relative_eq!(out[1 << i].re, 1.0, max_relative = 1e-12);
        }
        assert_relative_eq!(h.expectation(&down).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn matrix_free_matches_dense_product() {
        let sys = system(10, 60.0, 2.0, 0.4);
        let h = build_hamiltonian(&sys);
        let dense = h.to_dense(14).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let state: Vec<Complex64> =
            (0..1024).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let fast = h.apply_vec(&state).unwrap();
        let sv = nalgebra::DVector::from_iterator(1024, state.iter().copied());
        let slow = dense.map(|x| Complex64::new(x, 0.0)) * sv;
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).norm() <= 1e-12 * slow.norm());
        }
    }

    #[test]
    fn diagonal_energy_formula() {
        let sys = system(3, 180.0, 0.0, 0.8);
        let h = build_hamiltonian(&sys);
        // |↑↑↓⟩ = index 0b110: V_12 − (Δ/2)(1 + 1 − 1)
        let v12 = sys.interactions().get(0, 1);
        assert_relative_eq!(h.diagonal()[0b110], v12 - 0.4, max_relative = 1e-12);
        // Trace of H equals the sum of the diagonal regardless of Ω.
        let sys = system(3, 180.0, 2.0, 0.8);
        let dense = build_hamiltonian(&sys).to_dense(14).unwrap();
        assert_relative_eq!(dense.trace(), build_hamiltonian(&sys).diagonal().iter().sum::<f64>(), max_relative = 1e-12);
    }

    #[test]
    fn length_mismatch_rejected() {
        let sys = system(3, 180.0, 1.0, 0.0);
        let h = build_hamiltonian(&sys);
        assert!(h.apply_vec(&vec![Complex64::ZERO; 7]).is_err());
    }

    #[test]
    fn dense_cap_enforced() {
        let sys = system(6, 180.0, 1.0, 0.0);
        assert_eq!(
            build_hamiltonian(&sys).to_dense(5).unwrap_err(),
            HamiltonianError::DimensionOverflow { n: 6, cap: 5 }
        );
    }
}
