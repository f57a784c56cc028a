use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_exponents, BlackBoxMap};
use crate::error::Result;
use crate::jordan::two_slot_product;
use crate::linalg::decomp;
use crate::linalg::{c64, cluster_at_scale, outer, spectra_equal, spectral_distance, ComplexMatrix, Spectrum, ToleranceConfig};
use crate::random::{gaussian_matrix, gaussian_vector, random_hermitian, random_idempotent_pair, rng_for};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trial: usize,
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub expected: Spectrum,
    pub observed: Spectrum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub trials: usize,
    pub passes: usize,
    /// Largest Hausdorff distance between the two spectra, relative to the
    /// larger of `max(1, ρ, ‖BʳABˢ‖₂ + ‖BˢABʳ‖₂)` over the two products.
    pub max_mismatch: f64,
    /// Every failing pair, in trial order.
    pub failures: Vec<Counterexample>,
}

impl HypothesisReport {
    pub fn holds(&self) -> bool {
        self.passes == self.trials
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        self.failures.first()
    }
}

struct Outcome {
    mismatch: f64,
    failure: Option<Counterexample>,
}

/// Checks `σ(Φ(B)ʳΦ(A)Φ(B)ˢ + ...) = σ(BʳABˢ + ...)` on seeded pairs in which
/// `A` or `B` has rank at most one. Trial kinds cycle through: `A = B` a
/// rank-one idempotent, `A` rank one, `B` rank one, `A = 0`, `B = 0`, both
/// rank one.
pub fn verify_hypothesis(
    phi: &BlackBoxMap,
    r: u32,
    s: u32,
    trials: usize,
    seed: u64,
    tol: &ToleranceConfig,
) -> Result<HypothesisReport> {
    check_exponents(r, s)?;
    let n = phi.dim();
    run(trials, |trial| {
        let mut rng = rng_for(seed, trial as u64);
        let (a, b) = general_pair(&mut rng, n, trial % 6)?;
        compare(phi, &a, &b, r, s, trial, tol)
    })
}

/// Self-adjoint variant: both factors Hermitian, the distinguished one
/// `±x x*` or zero.
pub fn verify_hypothesis_selfadjoint(
    phi: &BlackBoxMap,
    r: u32,
    s: u32,
    trials: usize,
    seed: u64,
    tol: &ToleranceConfig,
) -> Result<HypothesisReport> {
    check_exponents(r, s)?;
    let n = phi.dim();
    run(trials, |trial| {
        let mut rng = rng_for(seed, trial as u64);
        let (a, b) = hermitian_pair(&mut rng, n, trial % 6)?;
        compare(phi, &a, &b, r, s, trial, tol)
    })
}

fn run(trials: usize, one: impl Fn(usize) -> Result<Outcome> + Sync + Send) -> Result<HypothesisReport> {
    let outcomes: Vec<Outcome> = (0..trials).into_par_iter().map(one).collect::<Result<_>>()?;
    let passes = outcomes.iter().filter(|o| o.failure.is_none()).count();
    let max_mismatch = outcomes.iter().map(|o| o.mismatch).fold(0.0, f64::max);
    let failures = outcomes.into_iter().filter_map(|o| o.failure).collect();
    Ok(HypothesisReport { trials, passes, max_mismatch, failures })
}

fn compare(
    phi: &BlackBoxMap,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    r: u32,
    s: u32,
    trial: usize,
    tol: &ToleranceConfig,
) -> Result<Outcome> {
    let (pa, pb) = (phi.apply(a)?, phi.apply(b)?);
    let expected = normwise_spectrum(&two_slot_product(a, b, r, s)?, factor_bound(a, b, r, s), tol)?;
    let observed = normwise_spectrum(&two_slot_product(&pa, &pb, r, s)?, factor_bound(&pa, &pb, r, s), tol)?;
    let scale = expected.scale.max(observed.scale);
    let distance = spectral_distance(&expected, &observed);
    let mismatch = if distance == 0.0 { 0.0 } else { distance / scale.max(f64::MIN_POSITIVE) };
    let failure = (!spectra_equal(&expected, &observed, tol))
        .then(|| Counterexample { trial, a: a.clone(), b: b.clone(), expected, observed });
    Ok(Outcome { mismatch, failure })
}

/// `‖BʳABˢ‖₂ + ‖BˢABʳ‖₂`; the sum can cancel far below its terms, and the
/// rounding error follows the terms.
fn factor_bound(a: &ComplexMatrix, b: &ComplexMatrix, r: u32, s: u32) -> f64 {
    let (br, bs) = (b.pow(r), b.pow(s));
    (&(&br * a) * &bs).spectral_norm() + (&(&bs * a) * &br).spectral_norm()
}

/// Schur eigenvalues of a product whose summands have norm `bound`.
///
/// The image side is a similarity transform of the product, so its
/// eigenvalues carry errors of order `eps κ(T) bound`. Zero detection and the
/// matching scale use `max(1, ρ, bound)`; distinctness stays relative to
/// `max(1, ρ)` so that small genuine eigenvalues are not merged into zero.
/// Low-rank compression is skipped because for non-normal images a small
/// singular value need not belong to a zero eigenvalue.
fn normwise_spectrum(m: &ComplexMatrix, bound: f64, tol: &ToleranceConfig) -> Result<Spectrum> {
    let raw = decomp::eigenvalues(m.as_dmatrix())?;
    let rho = raw.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let scale = rho.max(bound);
    let collapsed: Vec<_> = raw.iter().map(|&z| if z.norm() <= tol.zero * scale { c64(0.0, 0.0) } else { z }).collect();
    let mut spectrum = cluster_at_scale(&collapsed, rho, tol).to_spectrum();
    spectrum.scale = scale;
    Ok(spectrum)
}

fn rank_one(rng: &mut impl Rng, n: usize) -> Result<ComplexMatrix> {
    outer(&gaussian_vector(rng, n), &gaussian_vector(rng, n))
}

fn general_pair(rng: &mut impl Rng, n: usize, kind: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    Ok(match kind {
        0 => {
            let (x, f) = random_idempotent_pair(rng, n);
            let p = outer(&x, &f)?;
            (p.clone(), p)
        }
        1 => (rank_one(rng, n)?, gaussian_matrix(rng, n)),
        2 => (gaussian_matrix(rng, n), rank_one(rng, n)?),
        3 => (ComplexMatrix::zeros(n), gaussian_matrix(rng, n)),
        4 => (gaussian_matrix(rng, n), ComplexMatrix::zeros(n)),
        _ => (rank_one(rng, n)?, rank_one(rng, n)?),
    })
}

fn hermitian_rank_one(rng: &mut impl Rng, n: usize) -> Result<ComplexMatrix> {
    let x = gaussian_vector(rng, n);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    Ok(outer(&x, &x.conjugate())?.scale(c64(sign, 0.0)))
}

fn hermitian_pair(rng: &mut impl Rng, n: usize, kind: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    Ok(match kind {
        0 => {
            let x = gaussian_vector(rng, n).normalize();
            let p = outer(&x, &x.conjugate())?;
            (p.clone(), p)
        }
        1 => (hermitian_rank_one(rng, n)?, random_hermitian(rng, n)),
        2 => (random_hermitian(rng, n), hermitian_rank_one(rng, n)?),
        3 => (ComplexMatrix::zeros(n), random_hermitian(rng, n)),
        4 => (random_hermitian(rng, n), ComplexMatrix::zeros(n)),
        _ => (hermitian_rank_one(rng, n)?, hermitian_rank_one(rng, n)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preserver::{random_model, random_unitary_model, unit};

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn identity_and_canonical_forms_pass() {
        let report = verify_hypothesis(&BlackBoxMap::identity(3), 0, 2, 60, 1, &tol()).unwrap();
        assert!(report.holds() && report.max_mismatch < 1e-12);
        let mut rng = rng_for(9, 0);
        for (transposed, (r, s)) in [(false, (1, 2)), (true, (0, 1)), (true, (2, 3))] {
            let model = random_model(&mut rng, 4, r + s + 1, transposed, 1e2);
            let phi = BlackBoxMap::from_model(&model).unwrap();
            let report = verify_hypothesis(&phi, r, s, 60, 2, &tol()).unwrap();
            assert!(report.holds(), "{report:?}");
            assert!(report.max_mismatch < 1e-8);
        }
        let model = random_unitary_model(&mut rng, 3, 4, true);
        let phi = BlackBoxMap::from_model(&model).unwrap();
        assert!(verify_hypothesis_selfadjoint(&phi, 1, 2, 60, 3, &tol()).unwrap().holds());
    }

    #[test]
    fn doubling_fails_on_an_idempotent_pair() {
        let phi = BlackBoxMap::new(3, |x| x.scale(c64(2.0, 0.0)));
        let report = verify_hypothesis(&phi, 0, 2, 12, 4, &tol()).unwrap();
        let ce = report.counterexample().expect("doubling is not a preserver");
        assert_eq!(ce.trial, 0);
        assert_eq!(ce.a, ce.b);
        // spectra scale by 2^m = 8
        let e = ce.expected.nonzero();
        let o = ce.observed.nonzero();
        assert_eq!((e.len(), o.len()), (1, 1));
        assert!((o[0] - e[0] * 8.0).norm() < 1e-9 * o[0].norm());
    }

    #[test]
    fn shifted_identity_fails_on_a_zero_factor() {
        let e11 = unit(3, 0, 0);
        let phi = BlackBoxMap::new(3, move |x| x + &e11);
        let report = verify_hypothesis(&phi, 1, 2, 12, 5, &tol()).unwrap();
        assert!(!report.holds());
        assert!(report.max_mismatch > 1e-3);
    }

    #[test]
    fn report_is_deterministic() {
        let phi = BlackBoxMap::new(2, |x| x.transpose().scale(c64(0.0, 1.0)));
        let a = verify_hypothesis(&phi, 0, 1, 30, 6, &tol()).unwrap();
        let b = verify_hypothesis(&phi, 0, 1, 30, 6, &tol()).unwrap();
        assert_eq!(a, b);
        // i^2 = -1, so i·Xᵗ is not a preserver for m = 2
        assert!(!a.holds());
    }
}
