//! Open-system evolution with pure dephasing, plus Monte-Carlo averaging
//! over Lorentzian shot-to-shot drive noise.
//!
//! The dissipator has one jump operator per atom, `L_i = √(γ/2) σ_z^i`, and
//! one collective operator `L_c = √(γ_c/2) Σ_i σ_z^i`. All of them are
//! diagonal in the computational basis, so the full dissipator acts as an
//! elementwise (Hadamard) multiplication on the density matrix:
//!
//! ```text
//! L(ρ)_{jk} = −[γ·hamming(j,k) + γ_c·(Δpopcount)²]·ρ_{jk}
//! ```
//!
//! Evolution therefore splits into two exactly solvable pieces — the unitary
//! conjugation `U ρ U†` from the Hamiltonian eigendecomposition and the
//! elementwise dephasing decay — combined in a Strang step. Both factor maps
//! are completely positive and trace preserving, so trace and positivity are
//! exact at machine precision at every substep, and the splitting error
//! vanishes with `γ = γ_c = 0`.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::census::BlockadeCensus;
use crate::hamiltonian::SpinSystem;
use crate::scalar::{cis, rf, Real};
use crate::statevec::{
    output_grid, quench_evolve, EvolveError, EvolveMethod, ObservableTrace, QuenchOptions, Spectrum,
};

/// Default atom-count cap for density-matrix evolution.
pub const DEFAULT_DENSITY_CAP: usize = 10;

#[derive(Debug, Error)]
pub enum LindbladError {
    #[error("dimension overflow: N = {n} exceeds the density-matrix cap {cap}")]
    DimensionOverflow { n: usize, cap: usize },
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
}

/// Dephasing rates and Lorentzian shot-to-shot widths of the drive.
///
/// Rates are angular (rad/μs); the Lorentzian centers and half-widths are
/// ordinary frequencies in MHz, matching how the calibration is quoted.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel<T: Real> {
    pub gamma: T,
    pub gamma_c: T,
    pub omega0_mhz: T,
    pub d_omega_mhz: T,
    pub delta0_mhz: T,
    pub d_delta_mhz: T,
    pub shots: usize,
    pub seed: u64,
    /// Lorentzian truncation in units of the half-width.
    pub tail_cut: T,
}

impl<T: Real> NoiseModel<T> {
    /// Noiseless model (single shot, zero widths and rates).
    pub fn none(omega0_mhz: T, delta0_mhz: T) -> Self {
        Self {
            gamma: T::zero(),
            gamma_c: T::zero(),
            omega0_mhz,
            d_omega_mhz: T::zero(),
            delta0_mhz,
            d_delta_mhz: T::zero(),
            shots: 1,
            seed: 0,
            tail_cut: rf(20.0),
        }
    }

    pub fn validate(&self) -> Result<(), LindbladError> {
        if self.gamma < T::zero() || self.gamma_c < T::zero() {
            return Err(LindbladError::InvalidNoise("dephasing rates must be nonnegative".into()));
        }
        if self.d_omega_mhz < T::zero() || self.d_delta_mhz < T::zero() {
            return Err(LindbladError::InvalidNoise("Lorentzian widths must be nonnegative".into()));
        }
        if self.shots < 1 {
            return Err(LindbladError::InvalidNoise("shot count must be >= 1".into()));
        }
        if self.tail_cut <= T::zero() {
            return Err(LindbladError::InvalidNoise("tail cut must be positive".into()));
        }
        Ok(())
    }
}

/// Hermitian, unit-trace density matrix in the 2^N product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    m: DMatrix<Complex<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// `|ψ⟩⟨ψ|` of a normalized pure state.
    pub fn pure(state: &[Complex<T>]) -> Self {
        let dim = state.len();
        let m = DMatrix::from_fn(dim, dim, |j, k| state[j] * state[k].conj());
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.m
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).map(|k| self.m[(k, k)].re).fold(T::zero(), |a, b| a + b)
    }

    /// Smallest diagonal population (diagnostic for positivity).
    pub fn min_population(&self) -> T {
        (0..self.dim())
            .map(|k| self.m[(k, k)].re)
            .fold(T::from_f64(f64::INFINITY).unwrap(), |a, b| a.min(b))
    }

    /// Hermiticity, trace and population checks at the contract tolerances.
    pub fn validate(&self) -> Result<(), LindbladError> {
        let herm_dev = (0..self.dim())
            .flat_map(|j| (0..=j).map(move |k| (j, k)))
            .map(|(j, k)| (self.m[(j, k)] - self.m[(k, j)].conj()).norm_sqr().sqrt())
            .fold(T::zero(), |a, b| a.max(b));
        if herm_dev > rf(1e-10) {
            return Err(LindbladError::InvalidNoise(format!(
                "density matrix not Hermitian: deviation {:e}",
                herm_dev.to_f64()
            )));
        }
        if (self.trace() - T::one()).abs() > rf(1e-8) {
            return Err(LindbladError::InvalidNoise(format!("trace deviates: {:e}", (self.trace() - T::one()).to_f64())));
        }
        if self.min_population() < rf(-1e-8) {
            return Err(LindbladError::InvalidNoise(format!(
                "negative population {:e}",
                self.min_population().to_f64()
            )));
        }
        Ok(())
    }
}

/// Options shared by the density-matrix evolutions.
#[derive(Debug, Clone)]
pub struct LindbladOptions<'a, T: Real> {
    pub t_max: T,
    pub dt_out: T,
    /// Strang substeps per output interval; `None` picks 1 for the pure
    /// unitary case and `dt_out/0.002 μs` otherwise.
    pub substeps: Option<usize>,
    pub census: Option<&'a BlockadeCensus>,
    pub density_cap: usize,
    pub dense_cap: usize,
}

impl<T: Real> LindbladOptions<'_, T> {
    pub fn new(t_max: T, dt_out: T) -> Self {
        Self {
            t_max,
            dt_out,
            substeps: None,
            census: None,
            density_cap: DEFAULT_DENSITY_CAP,
            dense_cap: crate::hamiltonian::DEFAULT_DENSE_CAP,
        }
    }
}

/// Integrate `dρ/dt = −i[H,ρ] + L(ρ)` for the dephasing dissipator and
/// sample observables on the output grid. Uses `noise` only for the rates;
/// shot-to-shot widths belong to [`monte_carlo_quench`].
pub fn lindblad_evolve<T: Real>(
    sys: &SpinSystem<T>,
    noise: &NoiseModel<T>,
    opts: &LindbladOptions<'_, T>,
) -> Result<ObservableTrace<T>, LindbladError> {
    noise.validate()?;
    let n = sys.n();
    if n > opts.density_cap {
        return Err(LindbladError::DimensionOverflow { n, cap: opts.density_cap });
    }
    let dim = sys.dim();
    let times = output_grid(opts.t_max, opts.dt_out);
    let substeps = opts.substeps.unwrap_or_else(|| {
        if noise.gamma == T::zero() && noise.gamma_c == T::zero() {
            1
        } else {
            ((opts.dt_out / rf(0.002)).ceil().to_f64() as usize).max(1)
        }
    });
    let dt = opts.dt_out / rf(substeps as f64);

    // Unitary factor: U(dt) = V exp(−iΛdt) Vᵀ from the real eigenbasis.
    let spectrum = Spectrum::of(sys, opts.density_cap)?;
    let u_dt = propagator(&spectrum, dt);
    let u_dt_dag = u_dt.adjoint();

    // Dephasing factor: elementwise exp(M·dt/2) with
    // M_{jk} = −γ·hamming − γ_c·(Δpopcount)².
    let half_decay = DMatrix::<T>::from_fn(dim, dim, |j, k| {
        let ham = rf::<T>((j ^ k).count_ones() as f64);
        let dpc = rf::<T>(j.count_ones() as f64) - rf::<T>(k.count_ones() as f64);
        let m = -(noise.gamma * ham + noise.gamma_c * dpc * dpc);
        (m * dt / rf(2.0)).exp()
    });

    let mut rho = DensityMatrix::pure(&crate::statevec::all_down_state::<T>(n));
    let n_t = rf::<T>(n as f64);
    let mut f_r = Vec::with_capacity(times.len());
    let mut m2 = Vec::with_capacity(times.len());
    let mut p_rows = Vec::with_capacity(times.len());
    let mut cm2_rows = opts.census.map(|_| Vec::with_capacity(times.len()));
    for step in 0..times.len() {
        if step > 0 {
            for _ in 0..substeps {
                hadamard_mul(&mut rho.m, &half_decay);
                rho.m = &u_dt * &rho.m * &u_dt_dag;
                hadamard_mul(&mut rho.m, &half_decay);
            }
        }
        let mut p = vec![T::zero(); n + 1];
        for k in 0..dim {
            p[(k as u64).count_ones() as usize] += rho.m[(k, k)].re;
        }
        let mut mean = T::zero();
        let mut second = T::zero();
        for (level, &prob) in p.iter().enumerate() {
            let lv = rf::<T>(level as f64);
            mean += lv * prob;
            second += lv * lv * prob;
        }
        f_r.push(mean / n_t);
        m2.push(second / (n_t * n_t));
        p_rows.push(p);
        if let Some(rows) = cm2_rows.as_mut() {
            let census = opts.census.expect("rows exist only with census");
            rows.push(census.configs().iter().map(|&c| rho.m[(c as usize, c as usize)].re).collect());
        }
    }
    Ok(ObservableTrace { times, f_r, m2, p: p_rows, cm2: cm2_rows })
}

/// One sampled shot of the Monte-Carlo average.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShotSample {
    pub shot: usize,
    pub omega_mhz: f64,
    pub delta_mhz: f64,
}

/// Backend used per Monte-Carlo shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McBackend {
    /// Density-matrix evolution with the model's dephasing rates.
    Lindblad,
    /// Pure-state evolution (no dephasing, inhomogeneous noise only).
    Statevec,
}

/// Average the quench over Lorentzian draws of (Ω, Δ).
///
/// Each shot draws from truncated Lorentzians via a counter-based stream
/// derived from `(seed, shot)`, so the result is deterministic regardless of
/// how shots are scheduled; traces are reduced pairwise in shot order.
pub fn monte_carlo_quench<T: Real>(
    sys: &SpinSystem<T>,
    noise: &NoiseModel<T>,
    opts: &LindbladOptions<'_, T>,
    backend: McBackend,
) -> Result<(ObservableTrace<T>, Vec<ShotSample>), LindbladError> {
    noise.validate()?;
    let samples: Vec<ShotSample> = (0..noise.shots)
        .map(|shot| {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            rng.set_stream(shot as u64);
            let omega_mhz = sample_positive_lorentzian(
                noise.omega0_mhz.to_f64(),
                noise.d_omega_mhz.to_f64(),
                noise.tail_cut.to_f64(),
                &mut rng,
            );
            let delta_mhz = sample_lorentzian(
                noise.delta0_mhz.to_f64(),
                noise.d_delta_mhz.to_f64(),
                noise.tail_cut.to_f64(),
                &mut rng,
            );
            ShotSample { shot, omega_mhz, delta_mhz }
        })
        .collect();

    let traces: Vec<ObservableTrace<T>> = samples
        .par_iter()
        .map(|s| {
            let shot_sys = sys.with_drive(
                T::two_pi() * rf(s.omega_mhz),
                T::two_pi() * rf(s.delta_mhz),
            );
            match backend {
                McBackend::Lindblad => lindblad_evolve(&shot_sys, noise, opts),
                McBackend::Statevec => {
                    let method = if shot_sys.n() <= opts.dense_cap {
                        EvolveMethod::DenseEigen
                    } else {
                        EvolveMethod::ExpmKrylov
                    };
                    let mut qopts = QuenchOptions::new(opts.t_max, opts.dt_out, method);
                    qopts.census = opts.census;
                    qopts.dense_cap = opts.dense_cap;
                    Ok(quench_evolve(&shot_sys, &qopts)?)
                }
            }
        })
        .collect::<Result<_, _>>()?;
    let average = ObservableTrace::average(&traces).expect("at least one shot");
    Ok((average, samples))
}

/// Truncated Lorentzian draw by inverse CDF on a restricted angle range.
fn sample_lorentzian<R: Rng>(center: f64, width: f64, tail_cut: f64, rng: &mut R) -> f64 {
    if width == 0.0 {
        return center;
    }
    let bound = tail_cut.atan();
    let phi = rng.gen_range(-bound..bound);
    center + width * phi.tan()
}

/// Same, redrawing until the sample is positive (Ω must stay physical).
fn sample_positive_lorentzian<R: Rng>(center: f64, width: f64, tail_cut: f64, rng: &mut R) -> f64 {
    if width == 0.0 {
        return center;
    }
    for _ in 0..10_000 {
        let x = sample_lorentzian(center, width, tail_cut, rng);
        if x > 0.0 {
            return x;
        }
    }
    center
}

/// `U(dt)` as a dense complex matrix from the real spectrum.
fn propagator<T: Real>(spectrum: &Spectrum<T>, dt: T) -> DMatrix<Complex<T>> {
    let dim = spectrum.eigenvalues.len();
    // V · diag(exp(−iλdt)) · Vᵀ, assembled with two real multiplications.
    let phases: Vec<Complex<T>> = spectrum.eigenvalues.iter().map(|&l| cis(-l * dt)).collect();
    let v = &spectrum.eigenvectors;
    let mut scaled_re = v.clone();
    let mut scaled_im = v.clone();
    for (col, phase) in phases.iter().enumerate() {
        let mut cr = scaled_re.column_mut(col);
        cr *= phase.re;
        let mut ci = scaled_im.column_mut(col);
        ci *= phase.im;
    }
    let re = &scaled_re * v.transpose();
    let im = &scaled_im * v.transpose();
    DMatrix::from_fn(dim, dim, |j, k| Complex::new(re[(j, k)], im[(j, k)]))
}

fn hadamard_mul<T: Real>(rho: &mut DMatrix<Complex<T>>, factor: &DMatrix<T>) {
    for (r, &f) in rho.iter_mut().zip(factor.iter()) {
        *r *= f;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_chain, interaction_matrix};
    use approx::assert_relative_eq;

    const TAU: f64 = std::f64::consts::TAU;

    fn system(n: usize, omega_mhz: f64) -> SpinSystem<f64> {
        let geom = build_chain(n, 4.0, 180.0).unwrap();
        let v = interaction_matrix(&geom, 470.0).unwrap();
        let v = if n >= 2 { v.with_v12_override(20.0).unwrap() } else { v };
        SpinSystem::new(v, TAU * omega_mhz, 0.0)
    }

    #[test]
    fn unitary_limit_matches_statevec() {
        let sys = system(5, 1.0);
        let noise = NoiseModel::none(1.0, 0.0);
        let opts = LindbladOptions::new(1.5, 0.02);
        let lind = lindblad_evolve(&sys, &noise, &opts).unwrap();
        let sv = quench_evolve(&sys, &QuenchOptions::new(1.5, 0.02, EvolveMethod::DenseEigen)).unwrap();
        let max_diff = lind
            .f_r
            .iter()
            .zip(&sv.f_r)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_diff < 1e-6, "max |Δf_R| = {max_diff:e}");
    }

    #[test]
    fn single_atom_envelope_decays_at_two_over_gamma() {
        // Driven two-level atom with pure dephasing: the Bloch equations give
        // P_up = (1 − cos(Ωt)·e^{−γt/2})/2, i.e. decay time 2/γ ≈ 15.9 μs.
        let sys = system(1, 1.0);
        let gamma = TAU * 0.02;
        let mut noise = NoiseModel::none(1.0, 0.0);
        noise.gamma = gamma;
        let opts = LindbladOptions::new(10.0, 0.02);
        let trace = lindblad_evolve(&sys, &noise, &opts).unwrap();
        let tau = 2.0 / gamma;
        for (t, f) in trace.times.iter().zip(&trace.f_r) {
            let expect = (1.0 - (TAU * t).cos() * (-t / tau).exp()) / 2.0;
            assert!((f - expect).abs() < 2e-4, "P_up({t}) = {f} vs {expect}");
        }
    }

    #[test]
    fn trace_and_positivity_preserved_with_noise() {
        let sys = system(6, 1.0);
        let mut noise = NoiseModel::none(1.0, 0.0);
        noise.gamma = TAU * 0.02;
        noise.gamma_c = TAU * 0.016;
        let opts = LindbladOptions::new(3.0, 0.05);
        let trace = lindblad_evolve(&sys, &noise, &opts).unwrap();
        assert!(trace.check_probability_sums(1e-8));
        assert!(trace.p.iter().flatten().all(|&p| p >= -1e-8));
    }

    #[test]
    fn populations_frozen_without_drive() {
        // All jump operators commute with σ_z, so at Ω = 0 the populations
        // never move.
        let sys = system(3, 0.0);
        let mut noise = NoiseModel::none(0.0, 0.0);
        noise.gamma = TAU * 0.05;
        let opts = LindbladOptions::new(2.0, 0.1);
        let trace = lindblad_evolve(&sys, &noise, &opts).unwrap();
        for row in &trace.p {
            assert_relative_eq!(row[0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_widths_reduce_to_single_run() {
        let sys = system(2, 1.0);
        let mut noise = NoiseModel::none(1.0, 0.0);
        noise.shots = 4;
        let opts = LindbladOptions::new(1.0, 0.02);
        let (mc, samples) = monte_carlo_quench(&sys, &noise, &opts, McBackend::Statevec).unwrap();
        assert!(samples.iter().all(|s| s.omega_mhz == 1.0 && s.delta_mhz == 0.0));
        let mut qopts = QuenchOptions::new(1.0, 0.02, EvolveMethod::DenseEigen);
        qopts.census = None;
        let single = quench_evolve(&sys.with_drive(TAU, 0.0), &qopts).unwrap();
        for (a, b) in mc.f_r.iter().zip(&single.f_r) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn shot_average_is_linear_in_seed_ranges() {
        // Mean of two disjoint shot blocks, weighted by block size, equals
        // the combined mean.
        let sys = system(2, 1.0);
        let mut noise = NoiseModel::none(1.04, 0.0);
        noise.d_omega_mhz = 0.08;
        noise.d_delta_mhz = 0.1;
        noise.seed = 42;
        let opts = LindbladOptions::new(0.5, 0.05);

        noise.shots = 6;
        let (all, _) = monte_carlo_quench(&sys, &noise, &opts, McBackend::Statevec).unwrap();

        // The first 4 and last 2 shots, reusing the same per-shot streams.
        let traces: Vec<ObservableTrace<f64>> = (0..6u64)
            .map(|shot| {
                let mut rng = ChaCha8Rng::seed_from_u64(42);
                rng.set_stream(shot);
                let omega = sample_positive_lorentzian(1.04, 0.08, 20.0, &mut rng);
                let delta = sample_lorentzian(0.0, 0.1, 20.0, &mut rng);
                let shot_sys = sys.with_drive(TAU * omega, TAU * delta);
                quench_evolve(&shot_sys, &QuenchOptions::new(0.5, 0.05, EvolveMethod::DenseEigen)).unwrap()
            })
            .collect();
        let head = ObservableTrace::average(&traces[..4]).unwrap();
        let tail = ObservableTrace::average(&traces[4..]).unwrap();
        for k in 0..all.times.len() {
            let combined = (4.0 * head.f_r[k] + 2.0 * tail.f_r[k]) / 6.0;
            assert_relative_eq!(all.f_r[k], combined, epsilon = 1e-12);
        }
    }

    #[test]
    fn lorentzian_sampler_respects_truncation_and_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let x = sample_lorentzian(0.0, 0.1, 20.0, &mut rng);
            assert!(x.abs() <= 0.1 * 20.0 + 1e-12);
            let w = sample_positive_lorentzian(1.04, 0.08, 20.0, &mut rng);
            assert!(w > 0.0 && (w - 1.04).abs() <= 0.08 * 20.0 + 1e-12);
        }
    }

    #[test]
    fn invalid_noise_rejected() {
        let mut noise = NoiseModel::<f64>::none(1.0, 0.0);
        noise.d_omega_mhz = -0.1;
        assert!(noise.validate().is_err());
        let mut noise = NoiseModel::<f64>::none(1.0, 0.0);
        noise.shots = 0;
        assert!(noise.validate().is_err());
    }

    #[test]
    fn density_cap_enforced() {
        let sys = system(6, 1.0);
        let noise = NoiseModel::none(1.0, 0.0);
        let mut opts = LindbladOptions::new(1.0, 0.02);
        opts.density_cap = 5;
        assert!(matches!(
            lindblad_evolve(&sys, &noise, &opts),
            Err(LindbladError::DimensionOverflow { n: 6, cap: 5 })
        ));
    }

    #[test]
    fn density_matrix_validation() {
        let rho = DensityMatrix::pure(&crate::statevec::all_down_state::<f64>(3));
        rho.validate().unwrap();
        assert_relative_eq!(rho.trace(), 1.0, epsilon = 1e-14);
        assert!(rho.min_population() >= 0.0);
    }
}
