//! The birth-death master equation for the excitation-number probabilities.
//!
//! Relaxation of `P_n(t)` after the quench obeys
//!
//! ```text
//! ∂_t P_n = P_{n+1} Γ_{n+1→n} + P_{n-1} Γ_{n-1→n} − P_n (Γ_{n→n-1} + Γ_{n→n+1})
//! ```
//!
//! with rates of the form `Γ_{n→n±1}(t) = 2 Ω² t · T_{n→n±1}` and
//! time-independent coefficients `T`. Half of the `2·n_max` coefficients
//! come from the detailed-balance ratios of the measured steady state; the
//! other half from a least-squares fit against the early-time `P_n(t)` data.
//! In the rescaled time `τ = Ω²t²` the equation has constant coefficients,
//! so integration reduces to a matrix exponential of the birth-death
//! generator.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::numeric::{expm, nelder_mead};
use crate::scalar::{rf, Real};
use crate::statevec::ObservableTrace;

#[derive(Debug, Error)]
pub enum MasterEqError {
    #[error("degenerate distribution: fewer than two levels carry weight")]
    DegenerateDistribution,
    #[error("insufficient data: {got} samples, need at least {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("rate fit failed: {0}")]
    FitFailure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("ratio for transition {n}→{m} is undefined and no fallback was provided")]
    UndefinedRatio { n: usize, m: usize },
}

/// Provenance of a balance ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioProvenance {
    /// Retrieved from a measured (or simulated) steady distribution.
    Measured,
    /// Filled from the census counts ν_{n−1}/ν_n.
    Theoretical,
}

/// Detailed-balance rate ratios `r_n = Γ_{n→n−1}/Γ_{n−1→n} = P_eq_{n−1}/P_eq_n`
/// for `n = 1…n_max`; entries are `None` where the steady weight vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceRatios<T: Real> {
    ratios: Vec<Option<T>>,
    provenance: Vec<Option<RatioProvenance>>,
}

/// Retrieve the balance ratios from a steady excitation distribution.
///
/// Levels with `P_eq_n <= eps` leave the corresponding ratio undefined.
pub fn balance_ratios<T: Real>(p_eq: &[T], eps: T) -> Result<BalanceRatios<T>, MasterEqError> {
    if p_eq.iter().filter(|&&p| p > eps).count() < 2 {
        return Err(MasterEqError::DegenerateDistribution);
    }
    if p_eq.iter().any(|&p| p < -eps) {
        return Err(MasterEqError::InvalidParameter("negative steady weight".into()));
    }
    let mut ratios = Vec::with_capacity(p_eq.len() - 1);
    let mut provenance = Vec::with_capacity(p_eq.len() - 1);
    for n in 1..p_eq.len() {
        if p_eq[n] > eps {
            ratios.push(Some(p_eq[n - 1] / p_eq[n]));
            provenance.push(Some(RatioProvenance::Measured));
        } else {
            ratios.push(None);
            provenance.push(None);
        }
    }
    Ok(BalanceRatios { ratios, provenance })
}

impl<T: Real> BalanceRatios<T> {
    /// Build directly, e.g. from census counts (all entries theoretical).
    pub fn from_counts(nu: &[u64]) -> Self {
        let ratios = (1..nu.len())
            .map(|n| {
                (nu[n] > 0).then(|| {
                    T::from_u64(nu[n - 1]).expect("count fits scalar")
                        / T::from_u64(nu[n]).expect("count fits scalar")
                })
            })
            .collect::<Vec<_>>();
        let provenance =
            ratios.iter().map(|r| r.map(|_| RatioProvenance::Theoretical)).collect();
        Self { ratios, provenance }
    }

    pub fn n_max(&self) -> usize {
        self.ratios.len()
    }

    pub fn get(&self, n: usize) -> Option<T> {
        self.ratios[n - 1]
    }

    pub fn provenance(&self, n: usize) -> Option<RatioProvenance> {
        self.provenance[n - 1]
    }

    /// Replace undefined tail entries with census ratios `ν_{n−1}/ν_n`,
    /// flagging them as theoretical.
    pub fn fill_undefined_from_counts(&mut self, nu: &[u64]) {
        for n in 1..=self.n_max() {
            if self.ratios[n - 1].is_none() && n < nu.len() && nu[n] > 0 {
                self.ratios[n - 1] = Some(
                    T::from_u64(nu[n - 1]).expect("count fits scalar")
                        / T::from_u64(nu[n]).expect("count fits scalar"),
                );
                self.provenance[n - 1] = Some(RatioProvenance::Theoretical);
            }
        }
    }

    /// All ratios as plain values; errors on the first undefined entry.
    pub fn dense(&self) -> Result<Vec<T>, MasterEqError> {
        self.ratios
            .iter()
            .enumerate()
            .map(|(k, r)| r.ok_or(MasterEqError::UndefinedRatio { n: k + 1, m: k }))
            .collect()
    }
}

/// The fitted master-equation model: `2·n_max` rate coefficients plus the
/// drive frequency entering `Γ(t) = 2Ω²t·T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterEquationModel<T: Real> {
    /// `T_{n→n+1}` for `n = 0…n_max−1`.
    pub t_up: Vec<T>,
    /// `T_{n→n−1}` for `n = 1…n_max` (index `k` holds `k+1 → k`).
    pub t_down: Vec<T>,
    /// Ratios the down-rates were tied to.
    pub ratios: Vec<T>,
    /// Rabi frequency in rad/μs.
    pub omega: T,
    /// Root-mean-square residual of the early-time fit, when fitted.
    pub fit_residual: Option<T>,
}

impl<T: Real> MasterEquationModel<T> {
    pub fn n_max(&self) -> usize {
        self.t_up.len()
    }

    /// Assemble from up-coefficients and detailed-balance ratios.
    pub fn from_rates(t_up: Vec<T>, ratios: Vec<T>, omega: T) -> Result<Self, MasterEqError> {
        if t_up.len() != ratios.len() {
            return Err(MasterEqError::InvalidParameter(
                "need one ratio per up-rate (2·n_max coefficients total)".into(),
            ));
        }
        if t_up.iter().any(|&t| t < T::zero()) || ratios.iter().any(|&r| r <= T::zero()) {
            return Err(MasterEqError::InvalidParameter("rates must be nonnegative, ratios positive".into()));
        }
        let t_down: Vec<T> = t_up.iter().zip(&ratios).map(|(&u, &r)| u * r).collect();
        Ok(Self { t_up, t_down, ratios, omega, fit_residual: None })
    }

    /// Birth-death generator in the rescaled time `τ = Ω²t²`.
    fn generator(&self) -> DMatrix<T> {
        let levels = self.n_max() + 1;
        let mut g = DMatrix::zeros(levels, levels);
        for k in 0..self.n_max() {
            let up = self.t_up[k];
            g[(k + 1, k)] += up;
            g[(k, k)] -= up;
            let down = self.t_down[k];
            g[(k, k + 1)] += down;
            g[(k + 1, k + 1)] -= down;
        }
        g
    }

    /// Stationary distribution implied by the ratios (detailed-balance fixed
    /// point of the birth-death chain), normalized.
    pub fn stationary_distribution(&self) -> Vec<T> {
        let mut pi = vec![T::one()];
        for &r in &self.ratios {
            let last = *pi.last().expect("nonempty");
            pi.push(last / r);
        }
        let total = pi.iter().fold(T::zero(), |a, &b| a + b);
        pi.into_iter().map(|x| x / total).collect()
    }

    /// JSON per the serialization contract:
    /// `{n_max, omega_MHz, T_up, T_down, ratios, fit_residual}`.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Repr {
            n_max: usize,
            #[serde(rename = "omega_MHz")]
            omega_mhz: f64,
            #[serde(rename = "T_up")]
            t_up: Vec<f64>,
            #[serde(rename = "T_down")]
            t_down: Vec<f64>,
            ratios: Vec<f64>,
            fit_residual: Option<f64>,
        }
        serde_json::to_value(Repr {
            n_max: self.n_max(),
            omega_mhz: (self.omega / T::two_pi()).to_f64(),
            t_up: self.t_up.iter().map(|t| t.to_f64()).collect(),
            t_down: self.t_down.iter().map(|t| t.to_f64()).collect(),
            ratios: self.ratios.iter().map(|r| r.to_f64()).collect(),
            fit_residual: self.fit_residual.map(|r| r.to_f64()),
        })
        .expect("model serializes")
    }
}

/// Integrate the master equation from `p0` over `times`, reporting the
/// distribution and the derived `f_R`, `M2` for an `n_atoms`-site chain.
///
/// Exact per output time: `P(t) = exp(G · Ω² t²) P(0)` where `G` is the
/// constant generator in rescaled time.
pub fn integrate_master<T: Real>(
    model: &MasterEquationModel<T>,
    p0: &[T],
    times: &[T],
    n_atoms: usize,
) -> Result<ObservableTrace<T>, MasterEqError> {
    let levels = model.n_max() + 1;
    if p0.len() != levels {
        return Err(MasterEqError::InvalidParameter(format!(
            "initial distribution has {} levels, model has {levels}",
            p0.len()
        )));
    }
    let total = p0.iter().fold(T::zero(), |a, &b| a + b);
    if (total - T::one()).abs() > rf(1e-9) {
        return Err(MasterEqError::InvalidParameter("initial distribution not normalized".into()));
    }
    let g = model.generator();
    let p0v = nalgebra::DVector::from_row_slice(p0);
    let n_t = rf::<T>(n_atoms as f64);
    let mut p_rows = Vec::with_capacity(times.len());
    let mut f_r = Vec::with_capacity(times.len());
    let mut m2 = Vec::with_capacity(times.len());
    for &t in times {
        let tau = model.omega * model.omega * t * t;
        let p = expm(&(&g * tau)) * &p0v;
        let mut mean = T::zero();
        let mut second = T::zero();
        for (level, &prob) in p.iter().enumerate() {
            let lv = rf::<T>(level as f64);
            mean += lv * prob;
            second += lv * lv * prob;
        }
        f_r.push(mean / n_t);
        m2.push(second / (n_t * n_t));
        p_rows.push(p.iter().copied().collect());
    }
    Ok(ObservableTrace { times: times.to_vec(), f_r, m2, p: p_rows, cm2: None })
}

/// Fit the `n_max` up-coefficients against early-time `P_n(t)` data, tying
/// the down-coefficients to the supplied detailed-balance ratios.
///
/// `times`/`p_rows` must start at `t = 0` with `P_0 = 1` and stay below the
/// first coherent extremum. Nonlinear least squares over all levels jointly,
/// Nelder-Mead restarts from five seeded initial guesses; ties in the final
/// residual break toward the lower restart index.
pub fn fit_rates<T: Real>(
    times: &[T],
    p_rows: &[Vec<T>],
    ratios: &BalanceRatios<T>,
    omega: T,
    residual_threshold: T,
) -> Result<MasterEquationModel<T>, MasterEqError> {
    if times.len() < 5 {
        return Err(MasterEqError::InsufficientData { got: times.len(), need: 5 });
    }
    if times.len() != p_rows.len() {
        return Err(MasterEqError::InvalidParameter("times and rows disagree".into()));
    }
    if times[0].abs() > rf(1e-12) || (p_rows[0][0] - T::one()).abs() > rf(1e-2) {
        return Err(MasterEqError::InvalidParameter("data must start at t = 0 with P_0 = 1".into()));
    }
    if omega < T::zero() {
        return Err(MasterEqError::InvalidParameter("omega must be nonnegative".into()));
    }
    let r = ratios.dense()?;
    let n_max = r.len();
    // Fold any data levels beyond n_max into the top level so probability is
    // conserved in the comparison (those carry negligible early weight).
    let data: Vec<Vec<T>> = p_rows
        .iter()
        .map(|row| {
            let mut out = vec![T::zero(); n_max + 1];
            for (level, &p) in row.iter().enumerate() {
                out[level.min(n_max)] += p;
            }
            out
        })
        .collect();

    // Rates out of levels the data never populates are unidentifiable; fit
    // only up to the highest level with mass and pin the rest to zero.
    let k_star = (0..=n_max)
        .rev()
        .find(|&level| data.iter().any(|row| row[level] > rf(1e-10)))
        .unwrap_or(0);
    let n_fit = (k_star + 1).min(n_max);

    // Moment-based scale for the initial guess: P_1(t) ≈ Ω²t²·T_{0→1}.
    let mut scale = T::zero();
    let mut count = 0usize;
    for (k, row) in data.iter().enumerate().skip(1) {
        let tau = omega * omega * times[k] * times[k];
        if row[1] > rf(1e-9) && row[1] < rf(0.5) && tau > T::zero() {
            scale += row[1] / tau;
            count += 1;
        }
    }
    let t0 = if count > 0 { scale / rf(count as f64) } else { rf(0.25) };

    let expand = |x: &[T]| -> Vec<T> {
        let mut t_up: Vec<T> = x.iter().map(|&v| v * v).collect();
        t_up.resize(n_max, T::zero());
        t_up
    };
    let objective = |x: &[T]| -> T {
        let model = MasterEquationModel::from_rates(expand(x), r.clone(), omega).expect("positive ratios");
        let g = model.generator();
        let mut p = nalgebra::DVector::zeros(n_max + 1);
        for (level, slot) in data[0].iter().enumerate() {
            p[level] = *slot;
        }
        let p0 = p.clone();
        let mut sse = T::zero();
        for (k, row) in data.iter().enumerate().skip(1) {
            let tau = omega * omega * times[k] * times[k];
            p = expm(&(&g * tau)) * &p0;
            for (level, &d) in row.iter().enumerate() {
                let diff = p[level] - d;
                sse += diff * diff;
            }
        }
        sse
    };

    // Parameters are square roots of the coefficients so rates stay
    // nonnegative without constraints; a frozen chain fits to exactly zero.
    let base: Vec<T> = (0..n_fit).map(|_| t0.max(rf(1e-6)).sqrt()).collect();
    let mut best: Option<(T, Vec<T>)> = None;
    for restart in 0..5 {
        let factor = rf::<T>([1.0, 0.4, 2.5, 0.1, 6.0][restart]).sqrt();
        let init: Vec<T> = base.iter().map(|&b| b * factor).collect();
        let (x, value) = nelder_mead(&objective, &init, rf(1e-12), 400 * (n_max + 1));
        let better = match &best {
            None => true,
            Some((v, _)) => value < *v,
        };
        if better {
            best = Some((value, x));
        }
    }
    let (sse, x) = best.expect("at least one restart ran");
    let samples = rf::<T>(((times.len() - 1) * (n_max + 1)) as f64);
    let rms = (sse / samples).sqrt();
    if rms > residual_threshold {
        return Err(MasterEqError::FitFailure(format!(
            "rms residual {:.3e} above threshold {:.3e}",
            rms.to_f64(),
            residual_threshold.to_f64()
        )));
    }
    let mut model = MasterEquationModel::from_rates(expand(&x), r, omega)?;
    model.fit_residual = Some(rms);
    Ok(model)
}
