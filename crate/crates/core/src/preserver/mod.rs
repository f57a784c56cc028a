//! Recovery of spectrum-preserving maps from black-box queries.
//!
//! A preserver of `BʳABˢ + BˢABʳ` (one factor of rank at most one) has the
//! canonical form `λ T X T⁻¹` or `λ T Xᵗ T⁻¹` with `λᵐ = 1`, `m = r + s + 1`,
//! and on Hermitian matrices `ξ U X U*` or `ξ U Xᵗ U*` with `ξ = ±1`.

mod frame;
mod hypothesis;
mod map;
mod similarity;
mod wigner;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, ComplexMatrix, ToleranceConfig, C64};
use crate::random::{conditioned_matrix, random_unitary};

pub use frame::recover_full;
pub use hypothesis::{verify_hypothesis, verify_hypothesis_selfadjoint, Counterexample, HypothesisReport};
pub use map::{unit, BlackBoxMap, LinearMapTable, MapDocument};
pub use similarity::{recover_2x2, recover_similarity, CkRecovery};
pub use wigner::recover_selfadjoint;

/// Largest accepted condition number of a recovered `T`.
pub const MAX_CONDITION: f64 = 1e6;
/// Largest distance to an m-th root of unity before snapping.
pub const ROOT_SNAP_TOL: f64 = 1e-6;
/// Largest accepted validation residual.
pub const VALIDATION_TOL: f64 = 1e-6;
pub const UNITARY_TOL: f64 = 1e-8;

/// `Φ(X) = λ T X T⁻¹` (or with `Xᵗ`); for `unitary` models `T` is unitary
/// and `λ = ξ ∈ {−1, 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreserverModel {
    pub lambda: C64,
    pub transform: ComplexMatrix,
    pub transposed: bool,
    #[serde(default)]
    pub unitary: bool,
    /// Product order `r + s + 1`.
    pub m: u32,
    /// Worst relative mismatch seen during validation.
    pub residual: f64,
}

impl PreserverModel {
    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let inverse = if self.unitary { self.transform.adjoint() } else { self.transform.inverse()? };
        Ok(self.apply_with_inverse(x, &inverse))
    }

    pub(crate) fn apply_with_inverse(&self, x: &ComplexMatrix, inverse: &ComplexMatrix) -> ComplexMatrix {
        let inner = if self.transposed { x.transpose() } else { x.clone() };
        (&(&self.transform * &inner) * inverse).scale(self.lambda)
    }
}

/// Settings shared by the recovery pipelines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub seed: u64,
    /// Random pairs drawn by the hypothesis check.
    pub hypothesis_trials: usize,
    /// Random inputs on which a candidate model is compared with the map.
    pub validation_probes: usize,
    /// Probe re-draws allowed when a frame comes out singular.
    pub budget: usize,
    pub tol: ToleranceConfig,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            seed: 0x7072_6573,
            hypothesis_trials: 100,
            validation_probes: 20,
            budget: 16,
            tol: ToleranceConfig::default(),
        }
    }
}

/// Dispatches to the 2x2 vectorization route for `n = 2` and to the frame
/// route otherwise.
pub fn recover(phi: &BlackBoxMap, r: u32, s: u32, opts: &RecoveryOptions) -> Result<PreserverModel> {
    if phi.dim() == 2 {
        recover_2x2(phi, r, s, opts).map(|ck| ck.model)
    } else {
        recover_full(phi, r, s, opts)
    }
}

pub(crate) fn check_exponents(r: u32, s: u32) -> Result<u32> {
    if r >= s || s as usize >= crate::jordan::MAX_ORDER {
        return Err(Error::BadExponents { r, s });
    }
    Ok(r + s + 1)
}

/// `min_{|c| = 1} ‖c·a/‖a‖ − b/‖b‖‖_F`.
pub fn projective_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let (na, nb) = (a.frobenius_norm(), b.frobenius_norm());
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 0.0 } else { 1.0 };
    }
    let inner: C64 = a.as_dmatrix().iter().zip(b.as_dmatrix().iter()).map(|(x, y)| x.conj() * y).sum();
    let c = if inner.norm() > 0.0 { inner / inner.norm() } else { c64(1.0, 0.0) };
    // direct difference; 2 - 2cos loses half the digits
    let diff = a.as_dmatrix() * (c / na) - b.as_dmatrix() / c64(nb, 0.0);
    diff.norm()
}

/// Nearest m-th root of unity, if `z` lies within `ROOT_SNAP_TOL` of it.
pub fn snap_to_root(z: C64, m: u32) -> Result<C64> {
    let m = m.max(1);
    let step = std::f64::consts::TAU / m as f64;
    let k = (z.arg() / step).round();
    let root = C64::from_polar(1.0, k * step);
    if (z - root).norm() > ROOT_SNAP_TOL {
        return Err(Error::ScalarNotRootOfUnity(format!("{z} (m = {m})")));
    }
    // exact values where the angle is a multiple of a quarter turn
    let snapped = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    Ok(c64(snapped(root.re), snapped(root.im)))
}

/// Unit Frobenius norm, first entry of modulus above `1e-8` made positive real.
pub fn normalize_transform(t: &ComplexMatrix) -> ComplexMatrix {
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return t.clone();
    }
    let scaled = t.scale(c64(1.0 / norm, 0.0));
    unphase(&scaled)
}

/// Rotates the first entry of modulus above `1e-8` onto the positive reals.
pub(crate) fn unphase(t: &ComplexMatrix) -> ComplexMatrix {
    let n = t.dim();
    let lead = (0..n * n).map(|k| t.get(k / n, k % n)).find(|z| z.norm() > 1e-8);
    match lead {
        Some(z) => t.scale(z.conj() / z.norm()),
        None => t.clone(),
    }
}

/// Random canonical-form model: `λ` a uniformly chosen m-th root of unity and
/// `T` with condition number `max_cond`.
pub fn random_model(rng: &mut impl Rng, n: usize, m: u32, transposed: bool, max_cond: f64) -> PreserverModel {
    let k = rng.random_range(0..m.max(1));
    let raw = C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / m.max(1) as f64);
    // same representative the recovery snaps to
    let lambda = snap_to_root(raw, m).unwrap_or(raw);
    let t = if n == 1 { ComplexMatrix::identity(1) } else { conditioned_matrix(rng, n, max_cond) };
    PreserverModel { lambda, transform: t, transposed, unitary: false, m, residual: 0.0 }
}

/// Random unitary model with `ξ = −1` drawn only when `m` is even.
pub fn random_unitary_model(rng: &mut impl Rng, n: usize, m: u32, transposed: bool) -> PreserverModel {
    let xi = if m % 2 == 0 && rng.random::<bool>() { -1.0 } else { 1.0 };
    PreserverModel {
        lambda: c64(xi, 0.0),
        transform: random_unitary(rng, n),
        transposed,
        unitary: true,
        m,
        residual: 0.0,
    }
}

/// Largest relative mismatch `‖Φ(X) − model(X)‖ / ‖Φ(X)‖` over `probes`.
pub(crate) fn model_residual(
    phi: &BlackBoxMap,
    model: &PreserverModel,
    probes: &[ComplexMatrix],
) -> Result<f64> {
    let inverse = if model.unitary { model.transform.adjoint() } else { model.transform.inverse()? };
    let mut worst = 0.0f64;
    for x in probes {
        let observed = phi.apply(x)?;
        let predicted = model.apply_with_inverse(x, &inverse);
        let scale = observed.frobenius_norm().max(predicted.frobenius_norm()).max(f64::MIN_POSITIVE);
        worst = worst.max((&observed - &predicted).frobenius_norm() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, rng_for};

    #[test]
    fn projective_distance_ignores_scalars() {
        let mut rng = rng_for(1, 0);
        let a = gaussian_matrix(&mut rng, 3);
        let b = a.scale(c64(-2.0, 5.0));
        assert!(projective_distance(&a, &b) < 1e-12);
        let c = gaussian_matrix(&mut rng, 3);
        assert!(projective_distance(&a, &c) > 0.1);
        // orthogonal unit matrices sit at distance sqrt 2
        let e = unit(2, 0, 0);
        let f = unit(2, 1, 1);
        assert!((projective_distance(&e, &f) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn snapping_accepts_roots_only() {
        assert_eq!(snap_to_root(c64(1e-9, 1.0 + 1e-9), 4).unwrap(), c64(0.0, 1.0));
        assert_eq!(snap_to_root(c64(-1.0, 0.0), 2).unwrap(), c64(-1.0, 0.0));
        assert!(matches!(snap_to_root(c64(-1.0, 0.0), 3), Err(Error::ScalarNotRootOfUnity(_))));
        assert!(snap_to_root(c64(1.0 + 1e-5, 0.0), 3).is_err());
        let w = C64::from_polar(1.0, std::f64::consts::TAU / 5.0);
        assert!((snap_to_root(w * c64(1.0, 1e-8), 5).unwrap() - w).norm() < 1e-15);
    }

    #[test]
    fn normalization_is_canonical() {
        let mut rng = rng_for(2, 0);
        let t = gaussian_matrix(&mut rng, 3);
        let a = normalize_transform(&t);
        let b = normalize_transform(&t.scale(c64(0.3, -4.0)));
        assert!((&a - &b).frobenius_norm() < 1e-12);
        assert!((a.frobenius_norm() - 1.0).abs() < 1e-12);
        assert!(a.get(0, 0).im.abs() < 1e-15 && a.get(0, 0).re > 0.0);
    }

    #[test]
    fn generated_models_have_valid_scalars() {
        let mut rng = rng_for(3, 0);
        for m in 2..7u32 {
            let model = random_model(&mut rng, 4, m, false, 1e3);
            assert!((model.lambda.powu(m) - c64(1.0, 0.0)).norm() < 1e-12);
            let u = random_unitary_model(&mut rng, 3, m, true);
            assert!((u.lambda.powu(m) - c64(1.0, 0.0)).norm() < 1e-12);
        }
    }
}
