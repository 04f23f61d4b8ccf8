//! Pure-state quench evolution and observable extraction.
//!
//! The quench starts from `|↓…↓⟩` and evolves unitarily under the chain
//! Hamiltonian. Two propagators cover the size range: a full real-symmetric
//! eigendecomposition for small chains (exact at every output time) and an
//! adaptive Lanczos/Krylov exponential for larger ones, with a per-substep
//! error tolerance independent of the output grid.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use thiserror::Error;

use crate::census::BlockadeCensus;
use crate::hamiltonian::{build_hamiltonian, HamiltonianError, SparseHamiltonian, SpinSystem};
use crate::scalar::{rf, Real};

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("dimension overflow: N = {n} exceeds cap {cap} for {what}")]
    DimensionOverflow { n: usize, cap: usize, what: &'static str },
    #[error("Krylov propagation failed to converge: {0}")]
    ConvergenceFailure(String),
    #[error("averaging window contains no samples")]
    EmptyWindow,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
}

/// Propagator choice for [`quench_evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolveMethod {
    /// Full eigendecomposition; exact, memory-bound at 2^N × 2^N.
    DenseEigen,
    /// Adaptive Lanczos exponential on the matrix-free operator.
    ExpmKrylov,
}

/// Time series of the quench observables on the output grid.
///
/// `p[t]` covers excitation numbers `0..p_levels`; for the quantum backends
/// that is the full `0..=N` range, so `f_R = Σ n P_n / N` holds exactly.
/// `cm2[t][m]` is the occupation of the `m`-th census configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableTrace<T: Real> {
    pub times: Vec<T>,
    pub f_r: Vec<T>,
    pub m2: Vec<T>,
    pub p: Vec<Vec<T>>,
    pub cm2: Option<Vec<Vec<T>>>,
}

/// Time averages over `t >= t_relax`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState<T: Real> {
    pub t_relax: T,
    pub f_r_bar: T,
    pub m2_bar: T,
    pub p_eq: Vec<T>,
    pub cm2_eq: Option<Vec<T>>,
}

/// Evolution parameters beyond the spin system itself.
#[derive(Debug, Clone)]
pub struct QuenchOptions<'a, T: Real> {
    pub t_max: T,
    pub dt_out: T,
    pub method: EvolveMethod,
    /// Census to resolve `|C_m|²` against; omit to skip the per-config trace.
    pub census: Option<&'a BlockadeCensus>,
    /// Initial amplitudes; defaults to `|↓…↓⟩`.
    pub initial: Option<Vec<Complex<T>>>,
    pub dense_cap: usize,
    pub krylov_tol: T,
    pub krylov_m_max: usize,
}

impl<T: Real> QuenchOptions<'_, T> {
    pub fn new(t_max: T, dt_out: T, method: EvolveMethod) -> Self {
        Self {
            t_max,
            dt_out,
            method,
            census: None,
            initial: None,
            dense_cap: crate::hamiltonian::DEFAULT_DENSE_CAP,
            krylov_tol: rf(1e-10),
            krylov_m_max: 48,
        }
    }
}

/// Output times `0, dt_out, 2·dt_out, …` up to and including `t_max`.
pub fn output_grid<T: Real>(t_max: T, dt_out: T) -> Vec<T> {
    let steps = (t_max / dt_out + rf(1e-9)).floor().to_f64() as usize;
    (0..=steps).map(|k| rf::<T>(k as f64) * dt_out).collect()
}

/// Excitation-number distribution of an amplitude vector, plus per-config
/// occupations when a census is supplied.
pub fn excitation_distribution<T: Real>(
    state: &[Complex<T>],
    n: usize,
    census: Option<&BlockadeCensus>,
) -> (Vec<T>, Option<Vec<T>>) {
    let mut p = vec![T::zero(); n + 1];
    for (k, amp) in state.iter().enumerate() {
        p[(k as u64).count_ones() as usize] += amp.norm_sqr();
    }
    let cm2 = census.map(|c| c.configs().iter().map(|&m| state[m as usize].norm_sqr()).collect());
    (p, cm2)
}

/// Arithmetic means of all observables over samples with `t >= t_relax`.
pub fn steady_average<T: Real>(trace: &ObservableTrace<T>, t_relax: T) -> Result<SteadyState<T>, EvolveError> {
    let idx: Vec<usize> =
        (0..trace.times.len()).filter(|&k| trace.times[k] >= t_relax - rf(1e-12)).collect();
    if idx.is_empty() {
        return Err(EvolveError::EmptyWindow);
    }
    let count = rf::<T>(idx.len() as f64);
    let mean = |series: &[T]| idx.iter().map(|&k| series[k]).fold(T::zero(), |a, b| a + b) / count;
    let levels = trace.p.first().map_or(0, Vec::len);
    let mut p_eq = vec![T::zero(); levels];
    for &k in &idx {
        for (dst, &v) in p_eq.iter_mut().zip(&trace.p[k]) {
            *dst += v;
        }
    }
    for v in &mut p_eq {
        *v /= count;
    }
    let cm2_eq = trace.cm2.as_ref().map(|cm2| {
        let cols = cm2.first().map_or(0, Vec::len);
        let mut eq = vec![T::zero(); cols];
        for &k in &idx {
            for (dst, &v) in eq.iter_mut().zip(&cm2[k]) {
                *dst += v;
            }
        }
        for v in &mut eq {
            *v /= count;
        }
        eq
    });
    Ok(SteadyState { t_relax, f_r_bar: mean(&trace.f_r), m2_bar: mean(&trace.m2), p_eq, cm2_eq })
}

impl<T: Real> ObservableTrace<T> {
    /// Number of excitation levels in `p` (n_max + 1).
    pub fn p_levels(&self) -> usize {
        self.p.first().map_or(0, Vec::len)
    }

    /// Cumulative running mean of `f_R` from `t = 0`.
    pub fn f_r_running_average(&self) -> Vec<T> {
        let mut acc = T::zero();
        self.f_r
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                acc += v;
                acc / rf::<T>((k + 1) as f64)
            })
            .collect()
    }

    /// Pointwise mean of several traces on a shared grid, pairwise-summed in
    /// index order so the result is independent of how shots were scheduled.
    pub fn average(traces: &[ObservableTrace<T>]) -> Option<ObservableTrace<T>> {
        fn pairwise<T: Real, F: Fn(&ObservableTrace<T>) -> Vec<T> + Copy>(
            traces: &[ObservableTrace<T>],
            get: F,
        ) -> Vec<T> {
            if traces.len() == 1 {
                return get(&traces[0]);
            }
            let mid = traces.len() / 2;
            let a = pairwise(&traces[..mid], get);
            let b = pairwise(&traces[mid..], get);
            a.into_iter().zip(b).map(|(x, y)| x + y).collect()
        }
        let first = traces.first()?;
        let count = rf::<T>(traces.len() as f64);
        let scale = |v: Vec<T>| v.into_iter().map(|x| x / count).collect::<Vec<T>>();
        let levels = first.p_levels();
        let p = (0..levels)
            .map(|n| scale(pairwise(traces, move |t| t.p.iter().map(|row| row[n]).collect())))
            .collect::<Vec<_>>();
        let p = (0..first.times.len()).map(|k| p.iter().map(|col| col[k]).collect()).collect();
        let cm2 = first.cm2.as_ref().map(|c0| {
            let cols = c0.first().map_or(0, Vec::len);
            let by_col: Vec<Vec<T>> = (0..cols)
                .map(|m| {
                    scale(pairwise(traces, move |t| {
                        t.cm2.as_ref().expect("all traces carry cm2").iter().map(|row| row[m]).collect()
                    }))
                })
                .collect();
            (0..first.times.len()).map(|k| by_col.iter().map(|col| col[k]).collect()).collect()
        });
        Some(ObservableTrace {
            times: first.times.clone(),
            f_r: scale(pairwise(traces, |t| t.f_r.clone())),
            m2: scale(pairwise(traces, |t| t.m2.clone())),
            p,
            cm2,
        })
    }

    /// Probability bookkeeping: `Σ_n P_n = 1 ± tol` at every time.
    pub fn check_probability_sums(&self, tol: T) -> bool {
        self.p.iter().all(|row| {
            let s = row.iter().fold(T::zero(), |a, &b| a + b);
            (s - T::one()).abs() <= tol
        })
    }
}

/// Build a trace by sampling a state-producing closure on the output grid.
fn trace_from_states<T: Real>(
    n: usize,
    times: Vec<T>,
    census: Option<&BlockadeCensus>,
    mut state_at: impl FnMut(usize) -> Result<Vec<Complex<T>>, EvolveError>,
) -> Result<ObservableTrace<T>, EvolveError> {
    let n_t = rf::<T>(n as f64);
    let mut f_r = Vec::with_capacity(times.len());
    let mut m2 = Vec::with_capacity(times.len());
    let mut p_rows = Vec::with_capacity(times.len());
    let mut cm2_rows = census.map(|_| Vec::with_capacity(times.len()));
    for k in 0..times.len() {
        let state = state_at(k)?;
        let (p, cm2) = excitation_distribution(&state, n, census);
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
        if let (Some(rows), Some(c)) = (cm2_rows.as_mut(), cm2) {
            rows.push(c);
        }
    }
    Ok(ObservableTrace { times, f_r, m2, p: p_rows, cm2: cm2_rows })
}

/// All-down initial state in the 2^N basis.
pub fn all_down_state<T: Real>(n: usize) -> Vec<Complex<T>> {
    let mut psi = vec![Complex::new(T::zero(), T::zero()); 1 << n];
    psi[0] = Complex::new(T::one(), T::zero());
    psi
}

/// Evolve the quench and sample observables on the output grid.
pub fn quench_evolve<T: Real>(
    sys: &SpinSystem<T>,
    opts: &QuenchOptions<'_, T>,
) -> Result<ObservableTrace<T>, EvolveError> {
    if opts.t_max <= T::zero() || opts.dt_out <= T::zero() {
        return Err(EvolveError::InvalidParameter("t_max and dt_out must be > 0".into()));
    }
    let n = sys.n();
    let dim = sys.dim();
    let psi0 = match &opts.initial {
        Some(v) => {
            if v.len() != dim {
                return Err(HamiltonianError::LengthMismatch { got: v.len(), want: dim }.into());
            }
            v.clone()
        }
        None => all_down_state(n),
    };
    let times = output_grid(opts.t_max, opts.dt_out);
    match opts.method {
        EvolveMethod::DenseEigen => {
            if n > opts.dense_cap {
                return Err(EvolveError::DimensionOverflow { n, cap: opts.dense_cap, what: "dense-eigen" });
            }
            let spec = Spectrum::of(sys, opts.dense_cap)?;
            trace_from_states(n, times.clone(), opts.census, |k| Ok(spec.state_at(&psi0, times[k])))
        }
        EvolveMethod::ExpmKrylov => {
            let h = build_hamiltonian(sys);
            let mut psi = psi0;
            let mut prev_k = 0usize;
            trace_from_states(n, times.clone(), opts.census, |k| {
                if k > 0 {
                    let dt = times[k] - times[prev_k];
                    krylov_propagate(&h, &mut psi, dt, opts.krylov_tol, opts.krylov_m_max)?;
                    prev_k = k;
                    renormalize(&mut psi);
                }
                Ok(psi.clone())
            })
        }
    }
}

fn renormalize<T: Real>(psi: &mut [Complex<T>]) {
    let norm = psi.iter().map(|a| a.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt();
    if norm > T::zero() {
        for a in psi.iter_mut() {
            *a /= norm;
        }
    }
}

/// Eigendecomposition of the (real symmetric) Hamiltonian with ascending
/// eigenvalues and matching orthonormal eigenvector columns.
pub struct Spectrum<T: Real> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: DMatrix<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn of(sys: &SpinSystem<T>, cap: usize) -> Result<Self, EvolveError> {
        let h = build_hamiltonian(sys).to_dense(cap)?;
        let eig = SymmetricEigen::new(h);
        let dim = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite eigenvalues"));
        let eigenvalues: Vec<T> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut eigenvectors = DMatrix::zeros(dim, dim);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(Self { eigenvalues, eigenvectors })
    }

    /// Expansion coefficients `c_α = ⟨α|ψ⟩` of a complex state.
    pub fn coefficients(&self, psi: &[Complex<T>]) -> Vec<Complex<T>> {
        let dim = psi.len();
        let re = DVector::from_iterator(dim, psi.iter().map(|a| a.re));
        let im = DVector::from_iterator(dim, psi.iter().map(|a| a.im));
        let cr = self.eigenvectors.transpose() * re;
        let ci = self.eigenvectors.transpose() * im;
        (0..dim).map(|k| Complex::new(cr[k], ci[k])).collect()
    }

    /// `exp(−iHt)|ψ0⟩` assembled in the eigenbasis.
    pub fn state_at(&self, psi0: &[Complex<T>], t: T) -> Vec<Complex<T>> {
        let dim = psi0.len();
        let c = self.coefficients(psi0);
        let mut wr = DVector::zeros(dim);
        let mut wi = DVector::zeros(dim);
        for k in 0..dim {
            let phase = crate::scalar::cis(-self.eigenvalues[k] * t);
            let w = c[k] * phase;
            wr[k] = w.re;
            wi[k] = w.im;
        }
        let re = &self.eigenvectors * wr;
        let im = &self.eigenvectors * wi;
        (0..dim).map(|k| Complex::new(re[k], im[k])).collect()
    }
}

/// Full diagonalization: ascending eigenvalues and orthonormal eigenvectors.
pub fn full_spectrum<T: Real>(sys: &SpinSystem<T>, cap: usize) -> Result<(Vec<T>, DMatrix<T>), EvolveError> {
    let spec = Spectrum::of(sys, cap)?;
    Ok((spec.eigenvalues, spec.eigenvectors))
}

/// Advance `psi` by `exp(−iH·dt)` with adaptive Lanczos substeps.
pub fn krylov_propagate<T: Real>(
    h: &SparseHamiltonian<T>,
    psi: &mut Vec<Complex<T>>,
    dt: T,
    tol: T,
    m_max: usize,
) -> Result<(), EvolveError> {
    let mut remaining = dt;
    let mut sub = dt;
    let min_sub = dt * rf(1e-6);
    let mut guard = 0usize;
    while remaining > rf(1e-15) {
        let step = if sub < remaining { sub } else { remaining };
        match lanczos_exp_step(h, psi, step, tol, m_max)? {
            Some(next) => {
                *psi = next;
                remaining -= step;
            }
            None => {
                sub = step / rf(2.0);
                if sub < min_sub {
                    return Err(EvolveError::ConvergenceFailure(format!(
                        "substep fell below {:e} of the output interval",
                        1e-6
                    )));
                }
            }
        }
        guard += 1;
        if guard > 1_000_000 {
            return Err(EvolveError::ConvergenceFailure("substep iteration limit".into()));
        }
    }
    Ok(())
}

/// One Lanczos exponential step; `None` when the subspace cap is reached
/// before the a-posteriori error estimate drops under `tol`.
fn lanczos_exp_step<T: Real>(
    h: &SparseHamiltonian<T>,
    psi: &[Complex<T>],
    dt: T,
    tol: T,
    m_max: usize,
) -> Result<Option<Vec<Complex<T>>>, EvolveError> {
    let dim = psi.len();
    let beta0 = norm(psi);
    if beta0 == T::zero() {
        return Ok(Some(psi.to_vec()));
    }
    let mut basis: Vec<Vec<Complex<T>>> = Vec::with_capacity(m_max);
    basis.push(psi.iter().map(|a| a / beta0).collect());
    let mut alpha: Vec<T> = Vec::new();
    let mut beta: Vec<T> = Vec::new();
    let mut w = vec![Complex::new(T::zero(), T::zero()); dim];
    for m in 0..m_max {
        h.apply(&basis[m], &mut w)?;
        if m > 0 {
            let b = beta[m - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[m - 1]) {
                *wi -= vi * b;
            }
        }
        let a = basis[m].iter().zip(&w).map(|(v, x)| (v.conj() * x).re).fold(T::zero(), |s, t| s + t);
        for (wi, vi) in w.iter_mut().zip(&basis[m]) {
            *wi -= vi * a;
        }
        alpha.push(a);
        // One full reorthogonalization pass keeps the basis clean enough
        // for the exponential without the cost of doing it twice.
        for v in &basis {
            let overlap = v.iter().zip(&w).fold(Complex::new(T::zero(), T::zero()), |s, (vi, wi)| {
                s + vi.conj() * *wi
            });
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= vi * overlap;
            }
        }
        let b = norm(&w);
        // Happy breakdown: the Krylov space is invariant, result exact.
        let breakdown = b <= rf::<T>(1e-14) * alpha.iter().fold(T::zero(), |s, &x| s.max(x.abs()));
        let (y, err) = exp_tridiagonal(&alpha, &beta, dt, b);
        if breakdown || err <= tol {
            let mut out = vec![Complex::new(T::zero(), T::zero()); dim];
            for (j, v) in basis.iter().enumerate() {
                let c = y[j] * beta0;
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += vi * c;
                }
            }
            return Ok(Some(out));
        }
        if m + 1 == m_max {
            return Ok(None);
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Ok(None)
}

/// `y = exp(−i T dt) e_1` for the real symmetric tridiagonal `T`, plus the
/// standard residual-style error estimate `|β_m · y_m|·dt`-scaled.
fn exp_tridiagonal<T: Real>(alpha: &[T], beta: &[T], dt: T, beta_last: T) -> (Vec<Complex<T>>, T) {
    let m = alpha.len();
    let mut tri = DMatrix::<T>::zeros(m, m);
    for (k, &a) in alpha.iter().enumerate() {
        tri[(k, k)] = a;
    }
    for (k, &b) in beta.iter().enumerate() {
        tri[(k, k + 1)] = b;
        tri[(k + 1, k)] = b;
    }
    let eig = SymmetricEigen::new(tri);
    // y = Q exp(−i Λ dt) Qᵀ e_1
    let q = &eig.eigenvectors;
    let mut y = vec![Complex::new(T::zero(), T::zero()); m];
    for col in 0..m {
        let weight = q[(0, col)];
        let phase = crate::scalar::cis(-eig.eigenvalues[col] * dt);
        for (row, yi) in y.iter_mut().enumerate() {
            *yi += phase * (weight * q[(row, col)]);
        }
    }
    let err = (beta_last * y[m - 1].norm_sqr().sqrt()).abs();
    (y, err)
}

fn norm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|a| a.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt()
}
