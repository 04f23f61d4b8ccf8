//! Chain geometry and van der Waals interactions.
//!
//! Chains are planar: the first atom sits at the origin, the chain
//! propagates along +x, and zigzag offsets alternate in ±y. A bending angle
//! `theta` of 180° gives the linear chain; 60° gives the close-packed zigzag
//! where next-nearest neighbors are as close as nearest ones.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::{rf, Real};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("atoms {0} and {1} coincide")]
    CoincidentAtoms(usize, usize),
}

/// Planar zigzag chain of `n` atoms with spacing `d` (μm) and bending angle
/// `theta_deg` (degrees).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainGeometry<T: Real> {
    n: usize,
    d: T,
    theta_deg: T,
    positions: Vec<[T; 2]>,
}

/// Symmetric pair-interaction matrix in rad/μs, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix<T: Real> {
    v: DMatrix<T>,
    c6: T,
}

/// Build the chain for the placement convention above.
///
/// The interior angle at every internal vertex equals `theta_deg`, so
/// consecutive bond directions tilt by ±(180° − θ)/2 around the chain axis.
pub fn build_chain<T: Real>(n: usize, d: T, theta_deg: T) -> Result<ChainGeometry<T>, GeometryError> {
    if n < 1 {
        return Err(GeometryError::InvalidParameter("atom count must be >= 1".into()));
    }
    if d <= T::zero() {
        return Err(GeometryError::InvalidParameter("spacing d must be > 0".into()));
    }
    if theta_deg <= T::zero() || theta_deg > rf(180.0) {
        return Err(GeometryError::InvalidParameter(
            "bending angle must lie in (0, 180] degrees".into(),
        ));
    }
    // Half-opening of the bond direction relative to +x.
    let alpha = (rf::<T>(180.0) - theta_deg) * T::pi() / rf(360.0);
    let (dx, dy) = (d * alpha.cos(), d * alpha.sin());
    let mut positions = Vec::with_capacity(n);
    let mut p = [T::zero(), T::zero()];
    positions.push(p);
    for k in 0..n.saturating_sub(1) {
        p[0] += dx;
        p[1] += if k % 2 == 0 { dy } else { -dy };
        positions.push(p);
    }
    Ok(ChainGeometry { n, d, theta_deg, positions })
}

impl<T: Real> ChainGeometry<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> T {
        self.d
    }

    pub fn theta_deg(&self) -> T {
        self.theta_deg
    }

    pub fn positions(&self) -> &[[T; 2]] {
        &self.positions
    }

    /// Euclidean distance between atoms `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> T {
        let (a, b) = (self.positions[i], self.positions[j]);
        let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
        (dx * dx + dy * dy).sqrt()
    }

    /// Copy with Gaussian position jitter of width `sigma` (μm) on both
    /// coordinates, standing in for thermal atomic motion. `sigma = 0`
    /// returns the ideal geometry.
    pub fn jittered<R: rand::Rng>(&self, sigma: T, rng: &mut R) -> ChainGeometry<T> {
        if sigma == T::zero() {
            return self.clone();
        }
        let mut out = self.clone();
        for p in &mut out.positions {
            p[0] += sigma * rf::<T>(standard_normal(rng));
            p[1] += sigma * rf::<T>(standard_normal(rng));
        }
        out
    }

    /// JSON export: `{N, d_um, theta_deg, positions: [[x, y], …]}`.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Repr {
            #[serde(rename = "N")]
            n: usize,
            d_um: f64,
            theta_deg: f64,
            positions: Vec<[f64; 2]>,
        }
        serde_json::to_value(Repr {
            n: self.n,
            d_um: self.d.to_f64(),
            theta_deg: self.theta_deg.to_f64(),
            positions: self.positions.iter().map(|p| [p[0].to_f64(), p[1].to_f64()]).collect(),
        })
        .expect("geometry serializes")
    }
}

/// Box-Muller draw; avoids pulling in a distributions dependency for one use.
fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Pairwise interactions `V_ij = 2π |C6| / r_ij^6` in rad/μs.
///
/// `c6_ghz_um6` is the magnitude of the C6 coefficient in GHz·μm⁶ with the
/// repulsive sign convention already applied.
pub fn interaction_matrix<T: Real>(
    geom: &ChainGeometry<T>,
    c6_ghz_um6: T,
) -> Result<InteractionMatrix<T>, GeometryError> {
    if c6_ghz_um6 <= T::zero() {
        return Err(GeometryError::InvalidParameter("|C6| must be > 0".into()));
    }
    let n = geom.n();
    let c6_mhz = c6_ghz_um6 * rf(1000.0);
    let mut v = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let r = geom.distance(i, j);
            if r == T::zero() {
                return Err(GeometryError::CoincidentAtoms(j, i));
            }
            let r2 = r * r;
            let vij = T::two_pi() * c6_mhz / (r2 * r2 * r2);
            v[(i, j)] = vij;
            v[(j, i)] = vij;
        }
    }
    Ok(InteractionMatrix { v, c6: c6_ghz_um6 })
}

impl<T: Real> InteractionMatrix<T> {
    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    pub fn c6_ghz_um6(&self) -> T {
        self.c6
    }

    /// Pair energy in rad/μs.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.v[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.v
    }

    /// Nearest-neighbor interaction `V_12` in rad/μs.
    pub fn v12(&self) -> T {
        if self.n() < 2 {
            T::zero()
        } else {
            self.v[(0, 1)]
        }
    }

    /// Keep only couplings between sites at chain distance `<= reach`,
    /// zeroing the rest. `reach = 2` gives the reduced V12/V13 model used by
    /// the TEBD backend.
    pub fn truncated(&self, reach: usize) -> InteractionMatrix<T> {
        let mut v = self.v.clone();
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                if i.abs_diff(j) > reach {
                    v[(i, j)] = T::zero();
                }
            }
        }
        InteractionMatrix { v, c6: self.c6 }
    }

    /// Rescale all pair energies so `V_12` equals `v12_mhz` (ordinary MHz).
    ///
    /// The quoted nearest-neighbor strength of the experiment is far below
    /// the direct C6/d⁶ value, so runs pin `V_12` and scale the rest of the
    /// matrix with it.
    pub fn with_v12_override(mut self, v12_mhz: T) -> Result<Self, GeometryError> {
        if v12_mhz <= T::zero() {
            return Err(GeometryError::InvalidParameter("V12 override must be > 0".into()));
        }
        let current = self.v12();
        if current == T::zero() {
            return Err(GeometryError::InvalidParameter(
                "V12 override needs at least two atoms".into(),
            ));
        }
        let scale = T::two_pi() * v12_mhz / current;
        self.v *= scale;
        self.c6 *= scale;
        Ok(self)
    }
}

/// Blockade radius in μm: the distance at which the pair interaction equals
/// the drive energy scale, `r_B = (|C6| / 2πΩ)^{1/6}` in the convention that
/// gives 6.5 μm at Ω/2π = 1 MHz and |C6| = 470 GHz·μm⁶.
pub fn blockade_radius<T: Real>(c6_ghz_um6: T, omega: T) -> Result<T, GeometryError> {
    if omega <= T::zero() {
        return Err(GeometryError::InvalidParameter("Rabi frequency must be > 0".into()));
    }
    if c6_ghz_um6 < T::zero() {
        return Err(GeometryError::InvalidParameter("|C6| must be >= 0".into()));
    }
    // C6 in MHz·μm⁶ over Ω in rad/μs: equals |C6|/(2π f_Ω) with f in MHz.
    Ok((c6_ghz_um6 * rf(1000.0) / omega).powf(T::one() / rf(6.0)))
}

/// Effective one-dimensional atom density per μm:
/// `n_eff = n_∥/2 + min(n_∥/2, n_⊥)` with `n_∥ = 1/(d sin θ/2)` and
/// `n_⊥ = 1/(d cos θ/2)`; θ = 180° is the `n_eff = 1/d` limit.
pub fn effective_density<T: Real>(theta_deg: T, d: T) -> Result<T, GeometryError> {
    if theta_deg <= T::zero() || theta_deg > rf(180.0) {
        return Err(GeometryError::InvalidParameter(
            "bending angle must lie in (0, 180] degrees".into(),
        ));
    }
    if d <= T::zero() {
        return Err(GeometryError::InvalidParameter("spacing d must be > 0".into()));
    }
    let half = theta_deg * T::pi() / rf(360.0);
    let n_par = T::one() / (d * half.sin());
    let cos_half = half.cos();
    let half_par = n_par / rf(2.0);
    let n_perp_min = if cos_half <= T::zero() {
        half_par // θ = 180: n_⊥ diverges, the min saturates at n_∥/2
    } else {
        half_par.min(T::one() / (d * cos_half))
    };
    Ok(half_par + n_perp_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn collinear_chain_positions() {
        let g = build_chain::<f64>(3, 4.0, 180.0).unwrap();
        let expect = [[0.0, 0.0], [4.0, 0.0], [8.0, 0.0]];
        for (p, e) in g.positions().iter().zip(expect) {
            assert_relative_eq!(p[0], e[0], max_relative = 1e-12);
            assert!(p[1].abs() < 1e-12);
        }
    }

    #[test]
    fn sixty_degree_next_nearest_equals_d() {
        let g = build_chain::<f64>(3, 4.0, 60.0).unwrap();
        assert_relative_eq!(g.distance(0, 2), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn invariants_hold_for_long_zigzag() {
        let g = build_chain::<f64>(25, 4.0, 60.0).unwrap();
        for i in 0..24 {
            assert_relative_eq!(g.distance(i, i + 1), 4.0, max_relative = 1e-12);
        }
        // Interior angle from the two adjacent bond vectors.
        for i in 1..24 {
            let p = g.positions();
            let u = [p[i - 1][0] - p[i][0], p[i - 1][1] - p[i][1]];
            let w = [p[i + 1][0] - p[i][0], p[i + 1][1] - p[i][1]];
            let cos = (u[0] * w[0] + u[1] * w[1]) / (4.0 * 4.0);
            let angle = cos.acos().to_degrees();
            assert!((angle - 60.0).abs() < 1e-9, "interior angle {angle}");
        }
        for i in 0..23 {
            assert_relative_eq!(g.distance(i, i + 2), 2.0 * 4.0 * 30f64.to_radians().sin(), max_relative = 1e-12);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(build_chain::<f64>(0, 4.0, 180.0).is_err());
        assert!(build_chain::<f64>(3, 0.0, 180.0).is_err());
        assert!(build_chain::<f64>(3, 4.0, 0.0).is_err());
        assert!(build_chain::<f64>(3, 4.0, 180.1).is_err());
    }

    #[test]
    fn interaction_ratios_match_geometry() {
        let linear = build_chain::<f64>(3, 4.0, 180.0).unwrap();
        let v = interaction_matrix(&linear, 470.0).unwrap();
        assert_relative_eq!(v.get(0, 2) / v.get(0, 1), 1.0 / 64.0, max_relative = 1e-12);

        let zigzag = build_chain::<f64>(3, 4.0, 60.0).unwrap();
        let v = interaction_matrix(&zigzag, 470.0).unwrap();
        assert_relative_eq!(v.get(0, 2) / v.get(0, 1), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn v12_magnitude_from_direct_formula() {
        // 470000/4096 MHz ≈ 114.7 MHz in ordinary-frequency units.
        let g = build_chain::<f64>(2, 4.0, 180.0).unwrap();
        let v = interaction_matrix(&g, 470.0).unwrap();
        let v12_mhz = v.v12() / std::f64::consts::TAU;
        assert_relative_eq!(v12_mhz, 470_000.0 / 4096.0, max_relative = 1e-12);
    }

    #[test]
    fn v12_override_rescales_everything() {
        let g = build_chain::<f64>(4, 4.0, 180.0).unwrap();
        let v = interaction_matrix(&g, 470.0).unwrap().with_v12_override(20.0).unwrap();
        assert_relative_eq!(v.v12() / std::f64::consts::TAU, 20.0, max_relative = 1e-12);
        assert_relative_eq!(v.get(0, 2) / v.get(0, 1), 1.0 / 64.0, max_relative = 1e-12);
    }

    #[test]
    fn blockade_radius_matches_quoted_value() {
        let omega = std::f64::consts::TAU * 1.0; // Ω/2π = 1 MHz
        let rb = blockade_radius(470.0, omega).unwrap();
        assert!((rb - 6.5).abs() < 0.05, "r_B = {rb}");
        // Ω × 64 halves r_B.
        let rb64 = blockade_radius(470.0, omega * 64.0).unwrap();
        assert_relative_eq!(rb64, rb / 2.0, max_relative = 1e-12);
        // |C6| → 0 collapses the radius.
        assert_relative_eq!(blockade_radius(0.0, omega).unwrap(), 0.0);
        assert!(blockade_radius(470.0, 0.0).is_err());
    }

    #[test]
    fn effective_density_reference_values() {
        assert_relative_eq!(effective_density(180.0, 4.0).unwrap(), 0.25, max_relative = 1e-12);
        assert_relative_eq!(effective_density(60.0, 4.0).unwrap(), 0.5, max_relative = 1e-12);
        // θ → 0 limit: n_eff/n_∥ → 1/2 (the correction is O(sin θ/2)).
        let theta = 1e-5;
        let n_par = 1.0 / (4.0 * (theta / 2.0f64).to_radians().sin());
        assert_relative_eq!(effective_density(theta, 4.0).unwrap() / n_par, 0.5, max_relative = 1e-6);
    }

    proptest! {
        #[test]
        fn v13_over_v12_closed_form(theta in 45.0f64..=180.0) {
            let g = build_chain::<f64>(3, 4.0, theta).unwrap();
            let v = interaction_matrix(&g, 470.0).unwrap();
            let expect = (2.0 * (theta / 2.0).to_radians().sin()).powi(-6);
            prop_assert!((v.get(0, 2) / v.get(0, 1) - expect).abs() <= 1e-9 * expect);
        }

        #[test]
        fn blockade_radius_monotonic(omega in 0.1f64..100.0, c6 in 1.0f64..1000.0) {
            let r = blockade_radius(c6, omega).unwrap();
            prop_assert!(blockade_radius(c6, omega * 1.5).unwrap() < r);
            prop_assert!(blockade_radius(c6 * 1.5, omega).unwrap() > r);
        }

        #[test]
        fn effective_density_continuous(theta in 1.0f64..179.0) {
            let d = 4.0;
            let a = effective_density(theta, d).unwrap();
            let b = effective_density(theta + 1e-6, d).unwrap();
            prop_assert!((a - b).abs() < 1e-4);
        }

        #[test]
        fn interactions_decrease_with_distance(n in 3usize..10, theta in 45.0f64..=180.0) {
            let g = build_chain::<f64>(n, 4.0, theta).unwrap();
            let v = interaction_matrix(&g, 470.0).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if i == j { continue; }
                    for k in 0..n {
                        if k == i || k == j { continue; }
                        if g.distance(i, j) < g.distance(i, k) {
                            prop_assert!(v.get(i, j) >= v.get(i, k));
                        }
                    }
                }
            }
        }
    }
}
