//! Seeded random generators. Every stream is derived from a `(seed, index)`
//! pair so parallel trials reproduce regardless of scheduling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c64, pairing, ComplexMatrix, CVector, C64};

pub type TrialRng = ChaCha8Rng;

pub fn rng_for(seed: u64, stream: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard complex normal: real and imaginary parts `N(0, 1/2)`.
pub fn complex_normal(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_dmatrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn gaussian_matrix(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |_, _| complex_normal(rng))
}

pub fn gaussian_vector(rng: &mut impl Rng, n: usize) -> CVector {
    DVector::from_fn(n, |_, _| complex_normal(rng))
}

/// Haar-distributed unitary via QR with the phases of `R` removed.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let qr = gaussian_dmatrix(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    ComplexMatrix::from_fn(n, |i, j| q[(i, j)])
}

/// `G1 G2ᵀ` with `n x k` Gaussian factors, rank `k` almost surely.
pub fn matrix_of_rank(rng: &mut impl Rng, n: usize, k: usize) -> ComplexMatrix {
    let g1 = gaussian_dmatrix(rng, n, k);
    let g2 = gaussian_dmatrix(rng, k, n);
    let m = g1 * g2;
    ComplexMatrix::from_fn(n, |i, j| m[(i, j)])
}

/// `U Σ V*` with singular values log-uniform in `[1, max_cond]`, both ends attained.
pub fn conditioned_matrix(rng: &mut impl Rng, n: usize, max_cond: f64) -> ComplexMatrix {
    let u = random_unitary(rng, n);
    let v = random_unitary(rng, n);
    let log_max = max_cond.ln();
    let sigma: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => 1.0,
            _ if i == n - 1 => max_cond,
            _ => (rng.random::<f64>() * log_max).exp(),
        })
        .collect();
    &(&u * &ComplexMatrix::diag_real(&sigma)) * &v.adjoint()
}

/// Real number with modulus in `[lo, hi]` and random sign.
pub fn signed_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let x = lo + (hi - lo) * rng.random::<f64>();
    if rng.random::<bool>() {
        x
    } else {
        -x
    }
}

/// Hermitian matrix `U diag(λ) U*` with `k` nonzero real eigenvalues of modulus in `[0.5, 2]`.
pub fn hermitian_of_rank(rng: &mut impl Rng, n: usize, k: usize) -> ComplexMatrix {
    let u = random_unitary(rng, n);
    let d: Vec<f64> = (0..n).map(|i| if i < k { signed_uniform(rng, 0.5, 2.0) } else { 0.0 }).collect();
    let m = &(&u * &ComplexMatrix::diag_real(&d)) * &u.adjoint();
    let h = (m.as_dmatrix() + m.as_dmatrix().adjoint()) * c64(0.5, 0.0);
    ComplexMatrix::from_fn(n, |i, j| h[(i, j)])
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let g = gaussian_dmatrix(rng, n, n);
    let h = (&g + g.adjoint()) * c64(0.5, 0.0);
    ComplexMatrix::from_fn(n, |i, j| h[(i, j)])
}

/// Unit vector `x` and covector `f` with `<x, f> = 1`, rejecting draws whose
/// normalized pairing has modulus below `0.1`.
pub fn random_idempotent_pair(rng: &mut impl Rng, n: usize) -> (CVector, CVector) {
    loop {
        let x = gaussian_vector(rng, n).normalize();
        let f = gaussian_vector(rng, n).normalize();
        let p = pairing(&x, &f);
        if p.norm() >= 0.1 {
            return (x, f / p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = complex_normal(&mut rng_for(5, 1));
        let b = complex_normal(&mut rng_for(5, 1));
        let c = complex_normal(&mut rng_for(5, 2));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unitary_is_unitary() {
        let u = random_unitary(&mut rng_for(1, 0), 6);
        let e = &(&u.adjoint() * &u) - &ComplexMatrix::identity(6);
        assert!(e.frobenius_norm() < 1e-12);
    }

    #[test]
    fn conditioned_matrix_hits_target() {
        let t = conditioned_matrix(&mut rng_for(2, 0), 5, 1e3);
        assert!((t.condition_number() - 1e3).abs() < 1e-6);
    }

    #[test]
    fn idempotent_pair_pairs_to_one() {
        let (x, f) = random_idempotent_pair(&mut rng_for(3, 0), 4);
        assert!((pairing(&x, &f) - c64(1.0, 0.0)).norm() < 1e-12);
    }
}
