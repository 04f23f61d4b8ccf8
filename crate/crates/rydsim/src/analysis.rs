//! Post-processing: spectral peaks, scaling-law fits, ETH diagnostics.

use nalgebra::DMatrix;
use num_complex::Complex;
use thiserror::Error;

use crate::hamiltonian::{build_hamiltonian, SpinSystem};
use crate::scalar::{cis, rf, Real};
use crate::statevec::{all_down_state, EvolveError, ObservableTrace, Spectrum};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("window too short: {got} samples, need at least {need}")]
    WindowTooShort { got: usize, need: usize },
    #[error("need at least {need} points with distinct alpha")]
    InsufficientPoints { need: usize },
    #[error("scaling fit requires positive alpha and f_R values")]
    NonpositiveValue,
    #[error(transparent)]
    Evolve(#[from] EvolveError),
}

/// One steady-state point of the `f̄_R ∝ α^ν` scaling law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint<T: Real> {
    /// Dimensionless drive/interaction parameter `∝ Ω / n_eff⁶` at fixed d, C6.
    pub alpha: T,
    pub f_r_bar: T,
    pub theta_deg: T,
    pub n: usize,
}

/// Spectral data of the postquench Hamiltonian against the initial state.
#[derive(Debug, Clone)]
pub struct EthDiagnostics<T: Real> {
    pub e_alpha: Vec<T>,
    /// `⟨α| n̂_site |α⟩` per eigenstate.
    pub n_diag: Vec<T>,
    /// Binned `Σ_α |C_α|² δ(E − E_α)` as (bin center, mass) pairs.
    pub rho_e: Vec<(T, T)>,
    /// Exact `⟨H⟩` in the initial state.
    pub mean_e: T,
    /// Exact `sqrt(⟨H²⟩ − ⟨H⟩²)` in the initial state.
    pub sigma_e: T,
}

/// Dominant oscillation frequency of `f_R` in MHz over `window = [t0, t1]`.
///
/// Periodogram of the mean-subtracted series on a zero-padded grid, largest
/// nonzero-frequency peak refined by quadratic interpolation.
pub fn dominant_frequency<T: Real>(
    trace: &ObservableTrace<T>,
    window: (T, T),
) -> Result<T, AnalysisError> {
    let samples: Vec<T> = trace
        .times
        .iter()
        .zip(&trace.f_r)
        .filter(|(&t, _)| t >= window.0 - rf(1e-12) && t <= window.1 + rf(1e-12))
        .map(|(_, &f)| f)
        .collect();
    if samples.len() < 16 {
        return Err(AnalysisError::WindowTooShort { got: samples.len(), need: 16 });
    }
    let dt = trace.times[1] - trace.times[0];
    let mean = samples.iter().fold(T::zero(), |a, &b| a + b) / rf(samples.len() as f64);
    let centered: Vec<T> = samples.iter().map(|&x| x - mean).collect();

    // Zero-pad to 8× the next power of two for a fine frequency grid.
    let padded = (8 * samples.len().next_power_of_two()).max(256);
    let spectrum: Vec<T> = (0..padded / 2 + 1)
        .map(|k| {
            let mut acc = Complex::new(T::zero(), T::zero());
            let w = -T::two_pi() * rf::<T>(k as f64) / rf(padded as f64);
            for (j, &x) in centered.iter().enumerate() {
                acc += cis(w * rf(j as f64)) * x;
            }
            acc.norm_sqr()
        })
        .collect();
    let peak = (1..spectrum.len() - 1)
        .max_by(|&a, &b| spectrum[a].partial_cmp(&spectrum[b]).expect("finite power"))
        .expect("spectrum has interior bins");
    // Quadratic refinement around the peak bin.
    let (ym, y0, yp) = (spectrum[peak - 1], spectrum[peak], spectrum[peak + 1]);
    let denom = ym - y0 * rf(2.0) + yp;
    let shift = if denom.abs() > T::zero() {
        ((ym - yp) / denom / rf(2.0)).clamp(rf(-0.5), rf(0.5))
    } else {
        T::zero()
    };
    Ok((rf::<T>(peak as f64) + shift) / (rf::<T>(padded as f64) * dt))
}

/// Least-squares exponent of `log f̄_R` vs `log α` with a 95% confidence
/// half-width from the t-distribution.
pub fn scaling_fit<T: Real>(points: &[ScalingPoint<T>]) -> Result<(T, T), AnalysisError> {
    let mut alphas: Vec<T> = points.iter().map(|p| p.alpha).collect();
    alphas.sort_by(|a, b| a.partial_cmp(b).expect("finite alpha"));
    alphas.dedup_by(|a, b| (*a - *b).abs() <= rf(1e-15));
    if alphas.len() < 3 {
        return Err(AnalysisError::InsufficientPoints { need: 3 });
    }
    if points.iter().any(|p| p.alpha <= T::zero() || p.f_r_bar <= T::zero()) {
        return Err(AnalysisError::NonpositiveValue);
    }
    let n = rf::<T>(points.len() as f64);
    let xs: Vec<T> = points.iter().map(|p| p.alpha.ln()).collect();
    let ys: Vec<T> = points.iter().map(|p| p.f_r_bar.ln()).collect();
    let xbar = xs.iter().fold(T::zero(), |a, &b| a + b) / n;
    let ybar = ys.iter().fold(T::zero(), |a, &b| a + b) / n;
    let sxx = xs.iter().map(|&x| (x - xbar) * (x - xbar)).fold(T::zero(), |a, b| a + b);
    let sxy = xs.iter().zip(&ys).map(|(&x, &y)| (x - xbar) * (y - ybar)).fold(T::zero(), |a, b| a + b);
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let df = points.len() - 2;
    let ci = if df == 0 {
        T::zero()
    } else {
        let sse = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .fold(T::zero(), |a, b| a + b);
        let se = (sse / rf(df as f64) / sxx).sqrt();
        se * rf(student_t_975(df))
    };
    Ok((slope, ci))
}

/// Two-sided 97.5% quantile of Student's t.
fn student_t_975(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179,
        2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
        2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    TABLE.get(df - 1).copied().unwrap_or(1.96)
}

/// Full diagonalization against `|↓…↓⟩`: diagonal matrix elements of the
/// site occupation, the weighted energy distribution, and the exact moments
/// of `H` in the initial state.
pub fn eth_diagnostics<T: Real>(
    sys: &SpinSystem<T>,
    site: usize,
    dense_cap: usize,
    min_bins: usize,
) -> Result<EthDiagnostics<T>, AnalysisError> {
    let n = sys.n();
    assert!(site < n, "site index out of range");
    let spectrum = Spectrum::of(sys, dense_cap)?;
    let dim = sys.dim();
    let site_mask = 1usize << (n - 1 - site);

    let mut n_diag = Vec::with_capacity(dim);
    for col in 0..dim {
        let v = spectrum.eigenvectors.column(col);
        let mut occ = T::zero();
        for k in 0..dim {
            if k & site_mask != 0 {
                occ += v[k] * v[k];
            }
        }
        n_diag.push(occ);
    }

    // C_α = ⟨α|↓…↓⟩ is the first row of the eigenvector matrix.
    let weights: Vec<T> = (0..dim).map(|col| {
        let c = spectrum.eigenvectors[(0, col)];
        c * c
    }).collect();

    // Exact moments from one operator application.
    let h = build_hamiltonian(sys);
    let psi0 = all_down_state::<T>(n);
    let h_psi = h.apply_vec(&psi0).expect("dimension matches");
    let mean_e = h_psi[0].re;
    let h2: T = h_psi.iter().map(|a| a.norm_sqr()).fold(T::zero(), |a, b| a + b);
    let sigma_e = (h2 - mean_e * mean_e).max(T::zero()).sqrt();

    let rho_e = weighted_histogram(&spectrum.eigenvalues, &weights, min_bins);
    Ok(EthDiagnostics { e_alpha: spectrum.eigenvalues, n_diag, rho_e, mean_e, sigma_e })
}

/// Freedman-Diaconis binning of a weighted sample, with a bin-count floor.
fn weighted_histogram<T: Real>(values: &[T], weights: &[T], min_bins: usize) -> Vec<(T, T)> {
    let total = weights.iter().fold(T::zero(), |a, &b| a + b);
    let lo = values[0];
    let hi = values[values.len() - 1];
    let range = hi - lo;
    if range <= T::zero() {
        return vec![(lo, T::one())];
    }
    // Weighted quartiles (values are already ascending).
    let quantile = |q: T| -> T {
        let target = q * total;
        let mut acc = T::zero();
        for (&v, &w) in values.iter().zip(weights) {
            acc += w;
            if acc >= target {
                return v;
            }
        }
        hi
    };
    let iqr = quantile(rf(0.75)) - quantile(rf(0.25));
    let neff = rf::<T>(values.len() as f64);
    let fd_width = rf::<T>(2.0) * iqr / neff.powf(T::one() / rf(3.0));
    let bins = if fd_width > T::zero() {
        ((range / fd_width).ceil().to_f64() as usize).max(min_bins)
    } else {
        min_bins
    };
    let width = range / rf(bins as f64);
    let mut hist = vec![T::zero(); bins];
    for (&v, &w) in values.iter().zip(weights) {
        let idx = (((v - lo) / width).floor().to_f64() as usize).min(bins - 1);
        hist[idx] += w / total;
    }
    hist.into_iter()
        .enumerate()
        .map(|(k, mass)| (lo + width * (rf::<T>(k as f64) + rf(0.5)), mass))
        .collect()
}

impl<T: Real> EthDiagnostics<T> {
    /// Mean of the binned ρ(E).
    pub fn rho_mean(&self) -> T {
        self.rho_e.iter().map(|&(c, m)| c * m).fold(T::zero(), |a, b| a + b)
    }

    /// Standard deviation of the binned ρ(E).
    pub fn rho_std(&self) -> T {
        let mean = self.rho_mean();
        self.rho_e
            .iter()
            .map(|&(c, m)| (c - mean) * (c - mean) * m)
            .fold(T::zero(), |a, b| a + b)
            .max(T::zero())
            .sqrt()
    }

    /// Total histogram mass (should be 1 up to rounding).
    pub fn rho_total(&self) -> T {
        self.rho_e.iter().map(|&(_, m)| m).fold(T::zero(), |a, b| a + b)
    }

    /// Sample standard deviation of `n_diag` over eigenstates within
    /// `|E| <= e_cut`, the ETH smoothness probe.
    pub fn n_diag_scatter(&self, e_cut: T) -> T {
        let vals: Vec<T> = self
            .e_alpha
            .iter()
            .zip(&self.n_diag)
            .filter(|(&e, _)| e.abs() <= e_cut)
            .map(|(_, &d)| d)
            .collect();
        if vals.len() < 2 {
            return T::zero();
        }
        let n = rf::<T>(vals.len() as f64);
        let mean = vals.iter().fold(T::zero(), |a, &b| a + b) / n;
        (vals.iter().map(|&v| (v - mean) * (v - mean)).fold(T::zero(), |a, b| a + b)
            / (n - T::one()))
        .sqrt()
    }
}

/// Scaling parameter `α = (Ω/2π) / (|C6| (n_eff d)⁶ / d⁶)` reduced to the
/// `Ω/n_eff⁶` form; any fixed proportionality constant drops out of the
/// fitted exponent.
pub fn scaling_alpha<T: Real>(omega: T, n_eff: T) -> T {
    let n6 = n_eff * n_eff * n_eff;
    omega / (n6 * n6)
}

/// The matrix type returned by diagonalization helpers, re-exported for
/// downstream signatures.
pub type EigenBasis<T> = DMatrix<T>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_chain, interaction_matrix};
    use crate::statevec::output_grid;
    use approx::assert_relative_eq;

    fn synthetic_trace(freq_mhz: f64, t_max: f64, dt: f64, offset: f64) -> ObservableTrace<f64> {
        let times = output_grid(t_max, dt);
        let f_r: Vec<f64> =
            times.iter().map(|t| offset + 0.3 * (std::f64::consts::TAU * freq_mhz * t).sin()).collect();
        let n = times.len();
        ObservableTrace { times, f_r, m2: vec![0.0; n], p: vec![vec![1.0]; n], cm2: None }
    }

    #[test]
    fn synthetic_sine_peak() {
        let trace = synthetic_trace(1.414, 3.0, 0.02, 0.0);
        let f = dominant_frequency(&trace, (0.0, 3.0)).unwrap();
        assert!((f - 1.414).abs() / 1.414 < 0.01, "f = {f}");
    }

    #[test]
    fn offset_and_time_shift_invariance() {
        let a = dominant_frequency(&synthetic_trace(1.0, 3.0, 0.02, 0.0), (0.0, 3.0)).unwrap();
        let b = dominant_frequency(&synthetic_trace(1.0, 3.0, 0.02, 5.0), (0.0, 3.0)).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-9);
        // Same window length, shifted start.
        let c = dominant_frequency(&synthetic_trace(1.0, 5.0, 0.02, 0.0), (2.0, 5.0)).unwrap();
        assert!((a - c).abs() / a < 0.02);
    }

    #[test]
    fn short_window_rejected() {
        let trace = synthetic_trace(1.0, 3.0, 0.02, 0.0);
        assert!(matches!(
            dominant_frequency(&trace, (0.0, 0.1)),
            Err(AnalysisError::WindowTooShort { .. })
        ));
    }

    #[test]
    fn exact_power_law_recovered() {
        let points: Vec<ScalingPoint<f64>> = (1..=6)
            .map(|k| {
                let alpha = k as f64 * 0.1;
                ScalingPoint { alpha, f_r_bar: alpha.powf(0.2), theta_deg: 0.0, n: 0 }
            })
            .collect();
        let (nu, ci) = scaling_fit(&points).unwrap();
        assert_relative_eq!(nu, 0.2, max_relative = 1e-12);
        assert!(ci < 1e-12);

        // Duplicating the whole set leaves the exponent unchanged.
        let doubled: Vec<_> = points.iter().chain(&points).copied().collect();
        let (nu2, _) = scaling_fit(&doubled).unwrap();
        assert_relative_eq!(nu, nu2, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_scaling_inputs_rejected() {
        let p = ScalingPoint { alpha: 1.0, f_r_bar: 0.5, theta_deg: 0.0, n: 0 };
        assert!(matches!(
            scaling_fit(&[p, p, p]),
            Err(AnalysisError::InsufficientPoints { .. })
        ));
        let bad = ScalingPoint { alpha: -1.0, f_r_bar: 0.5, theta_deg: 0.0, n: 0 };
        let q = ScalingPoint { alpha: 2.0, f_r_bar: 0.5, theta_deg: 0.0, n: 0 };
        assert!(matches!(
            scaling_fit(&[p, q, bad]),
            Err(AnalysisError::NonpositiveValue)
        ));
    }

    #[test]
    fn eth_moments_match_analytics() {
        let geom = build_chain(8, 4.0, 180.0).unwrap();
        let v = interaction_matrix(&geom, 470.0).unwrap().with_v12_override(20.0).unwrap();
        let omega = std::f64::consts::TAU;
        let sys = crate::hamiltonian::SpinSystem::new(v, omega, 0.0);
        let diag = eth_diagnostics(&sys, 4, 14, 25).unwrap();
        assert!(diag.mean_e.abs() < 1e-10);
        assert_relative_eq!(diag.sigma_e, omega * (8.0f64).sqrt() / 2.0, max_relative = 1e-10);
        assert_relative_eq!(diag.rho_total(), 1.0, epsilon = 1e-9);
        assert!((diag.rho_mean().abs()) < 0.1 * diag.sigma_e);
        assert!((diag.rho_std() - diag.sigma_e).abs() / diag.sigma_e < 0.1);
        assert!(diag.n_diag.iter().all(|&x| (-1e-9..=1.0 + 1e-9).contains(&x)));
    }
}
