//! Recovering a hidden operator from the spectra of its products with
//! rank-one idempotents.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::idempotent::RankOneFunctional;
use crate::jordan::two_slot_product;
use crate::linalg::{c64, decomp, pairing, spectra_equal, spectrum, ComplexMatrix, CVector, Spectrum, ToleranceConfig, C64};
use crate::random::{gaussian_vector, rng_for};

type Query<'a> = dyn Fn(&ComplexMatrix) -> Result<Spectrum> + Send + Sync + 'a;

/// A black box answering `P ↦ σ(PʳAPˢ + PˢAPʳ)` for a hidden `A`.
pub struct SpectralOracle<'a> {
    n: usize,
    r: u32,
    s: u32,
    query: Box<Query<'a>>,
    count: AtomicUsize,
}

impl<'a> SpectralOracle<'a> {
    /// Exponents are unordered; `(0, 0)` is rejected.
    pub fn new(
        n: usize,
        r: u32,
        s: u32,
        query: impl Fn(&ComplexMatrix) -> Result<Spectrum> + Send + Sync + 'a,
    ) -> Result<Self> {
        let (r, s) = (r.min(s), r.max(s));
        if s == 0 {
            return Err(Error::BadExponents { r, s });
        }
        if n < 2 {
            return Err(Error::PreconditionViolated("dimension must be at least 2".into()));
        }
        Ok(Self { n, r, s, query: Box::new(query), count: AtomicUsize::new(0) })
    }

    /// Forward evaluation against a known matrix.
    pub fn from_matrix(a: ComplexMatrix, r: u32, s: u32, tol: ToleranceConfig) -> Result<Self> {
        let n = a.dim();
        let (lo, hi) = (r.min(s), r.max(s));
        Self::new(n, r, s, move |p| spectrum(&two_slot_product(&a, p, lo, hi)?, &tol))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn exponents(&self) -> (u32, u32) {
        (self.r, self.s)
    }

    pub fn query(&self, p: &RankOneFunctional) -> Result<Spectrum> {
        if p.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: p.dim() });
        }
        self.count.fetch_add(1, Ordering::Relaxed);
        (self.query)(&p.matrix())
    }

    pub fn queries(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryOptions {
    /// Query budget for the random probes used when `r = 0`.
    pub budget: usize,
    pub seed: u64,
    pub tol: ToleranceConfig,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { budget: 4096, seed: 0x7265_636f, tol: ToleranceConfig::default() }
    }
}

/// The probes `eᵢ ⊗ eᵢ` and `(eᵢ + eⱼ) ⊗ eᵢ` for `i ≠ j`.
pub fn probe_family(n: usize) -> Vec<RankOneFunctional> {
    let one = c64(1.0, 0.0);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x: Vec<(usize, C64)> = if i == j { vec![(i, one)] } else { vec![(i, one), (j, one)] };
            out.push(RankOneFunctional::basis(n, &x, &[(i, one)]).expect("basis vectors are nonzero"));
        }
    }
    out
}

/// Coefficients of `⟨Ax, f⟩ = Σ fᵢ Aᵢⱼ xⱼ` in the row-major entries of `A`.
pub fn probe_row(p: &RankOneFunctional) -> Vec<C64> {
    let n = p.dim();
    let (x, f) = (p.x(), p.f());
    (0..n * n).map(|k| f[k / n] * x[k % n]).collect()
}

fn solve(rows: &[Vec<C64>], rhs: &[C64], n: usize, tol: &ToleranceConfig) -> Result<ComplexMatrix> {
    let m = DMatrix::from_fn(rows.len(), n * n, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(rhs);
    let (sol, rank) = decomp::least_squares(&m, &b, tol.rank);
    if rank < n * n {
        return Err(Error::SingularSystem { rank, needed: n * n });
    }
    ComplexMatrix::new(DMatrix::from_fn(n, n, |i, j| sol[i * n + j]))
}

fn nonzero_values(sp: &Spectrum) -> Vec<C64> {
    sp.nonzero()
}

fn recover_first_moment_branch(oracle: &SpectralOracle, tol: &ToleranceConfig) -> Result<ComplexMatrix> {
    let n = oracle.dim();
    let probes = probe_family(n);
    let spectra: Vec<Result<Spectrum>> = probes.par_iter().map(|p| oracle.query(p)).collect();
    let mut rhs = Vec::with_capacity(probes.len());
    for sp in spectra {
        // PᵣAPˢ = ⟨Ax,f⟩P, so the product is 2⟨Ax,f⟩P
        let nz = nonzero_values(&sp?);
        match nz.as_slice() {
            [] => rhs.push(c64(0.0, 0.0)),
            [v] => rhs.push(v / 2.0),
            _ => return Err(Error::DegenerateInput("probe spectrum has more than one nonzero point".into())),
        }
    }
    let rows: Vec<_> = probes.iter().map(probe_row).collect();
    solve(&rows, &rhs, n, tol)
}

/// What a single `r = 0` probe says about `⟨Ax, f⟩`.
enum Reading {
    Known(C64),
    /// One nonzero point `ν`: either repeated (`⟨Ax,f⟩ = ν`) or simple
    /// with `⟨Ax,f⟩ = ν/2`.
    Ambiguous(C64),
}

fn read_r_zero(sp: &Spectrum) -> Result<Reading> {
    let nz = nonzero_values(sp);
    Ok(match nz.as_slice() {
        [] => Reading::Known(c64(0.0, 0.0)),
        [v] => Reading::Ambiguous(*v),
        [a, b] => Reading::Known((a + b) / 2.0),
        _ => return Err(Error::DegenerateInput("probe spectrum has more than two nonzero points".into())),
    })
}

/// `r = 0`: random idempotent probes. Probes with two nonzero points (or
/// none) determine `⟨Ax,f⟩`; if no probe ever shows two points, both
/// readings of the single point are solved and checked against the oracle.
fn recover_r_zero(oracle: &SpectralOracle, opts: &RecoveryOptions) -> Result<ComplexMatrix> {
    let n = oracle.dim();
    let needed = n * n;
    let target = needed + needed / 2 + n;
    let mut known: Vec<(RankOneFunctional, C64)> = Vec::new();
    let mut ambiguous: Vec<(RankOneFunctional, C64, Spectrum)> = Vec::new();
    let mut split_seen = false;
    let mut issued = 0;
    let batch = needed.max(16);
    while issued < opts.budget {
        let end = (issued + batch).min(opts.budget);
        let answers: Vec<Result<(RankOneFunctional, Spectrum)>> = (issued..end)
            .into_par_iter()
            .map(|t| {
                let p = RankOneFunctional::random(&mut rng_for(opts.seed, t as u64), n);
                let sp = oracle.query(&p)?;
                Ok((p, sp))
            })
            .collect();
        issued = end;
        for a in answers {
            let (p, sp) = a?;
            match read_r_zero(&sp)? {
                Reading::Known(m) => {
                    split_seen |= !sp.is_zero();
                    known.push((p, m));
                }
                Reading::Ambiguous(v) => ambiguous.push((p, v, sp)),
            }
        }
        if split_seen && known.len() >= target {
            let rows: Vec<_> = known.iter().map(|(p, _)| probe_row(p)).collect();
            let rhs: Vec<_> = known.iter().map(|(_, m)| *m).collect();
            return solve(&rows, &rhs, n, &opts.tol);
        }
        if !split_seen && known.len() + ambiguous.len() >= target && ambiguous.len() >= 2 * n {
            break;
        }
    }
    if split_seen {
        return Err(Error::InsufficientGenericity(issued));
    }
    if ambiguous.is_empty() {
        // every probe answered {0}
        let rows: Vec<_> = known.iter().map(|(p, _)| probe_row(p)).collect();
        let rhs: Vec<_> = known.iter().map(|(_, m)| *m).collect();
        return solve(&rows, &rhs, n, &opts.tol);
    }
    // either A² = 0 (every point repeated) or A is scalar (every point simple)
    let mut rows: Vec<_> = known.iter().map(|(p, _)| probe_row(p)).collect();
    rows.extend(ambiguous.iter().map(|(p, _, _)| probe_row(p)));
    let mut consistent = Vec::new();
    for factor in [1.0, 0.5] {
        let mut rhs: Vec<_> = known.iter().map(|(_, m)| *m).collect();
        rhs.extend(ambiguous.iter().map(|(_, v, _)| v * factor));
        let cand = solve(&rows, &rhs, n, &opts.tol)?;
        let check = SpectralOracle::from_matrix(cand.clone(), 0, oracle.s, opts.tol.clone())?;
        let agrees = ambiguous.iter().take(4 * n).all(|(p, _, sp)| {
            check.query(p).map(|c| spectra_equal(&c, sp, &opts.tol)).unwrap_or(false)
        });
        if agrees {
            consistent.push(cand);
        }
    }
    match consistent.len() {
        1 => Ok(consistent.pop().unwrap()),
        _ => Err(Error::InsufficientGenericity(issued)),
    }
}

/// Recovers the hidden matrix behind `oracle`.
pub fn recover_matrix(oracle: &SpectralOracle, opts: &RecoveryOptions) -> Result<ComplexMatrix> {
    opts.tol.validate()?;
    if oracle.r >= 1 {
        recover_first_moment_branch(oracle, &opts.tol)
    } else {
        recover_r_zero(oracle, opts)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Proportionality {
    Proportional { lambda: C64 },
    Not,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProportionalityReport {
    pub verdict: Proportionality,
    /// Least-squares `λ` minimizing `‖A′ − λA‖_F`.
    pub lambda: C64,
    pub residual: f64,
    pub pattern_trials: usize,
    pub pattern_mismatches: usize,
}

/// Relative residual accepted for `A′ = λA`.
pub const PROPORTIONALITY_TOL: f64 = 1e-10;

/// Idempotent `x ⊗ f` with `⟨Ax, f⟩ = 0`, when `x` and `Ax` are independent.
fn annihilating_idempotent(a: &ComplexMatrix, x: &CVector, g: &CVector) -> Option<RankOneFunctional> {
    let ax = a.mul_vec(x);
    // f = g + αx̄ + β(Ax)‾ with fᵀx = 1 and fᵀAx = 0
    let xb = x.map(|z| z.conj());
    let axb = ax.map(|z| z.conj());
    let m = nalgebra::Matrix2::new(pairing(x, &xb), pairing(x, &axb), pairing(&ax, &xb), pairing(&ax, &axb));
    let rhs = nalgebra::Vector2::new(c64(1.0, 0.0) - pairing(x, g), -pairing(&ax, g));
    let sol = m.try_inverse()? * rhs;
    let f = g + &xb * sol[0] + &axb * sol[1];
    RankOneFunctional::new(x.clone(), f).ok().filter(|p| p.is_idempotent())
}

/// Tests `A′ = λA` by least squares and cross-checks that `⟨Ax,f⟩` and
/// `⟨A′x,f⟩` vanish together on random idempotents.
pub fn proportionality_check(
    a: &ComplexMatrix,
    a_prime: &ComplexMatrix,
    trials: usize,
    seed: u64,
    tol: &ToleranceConfig,
) -> Result<ProportionalityReport> {
    if a.dim() != a_prime.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: a_prime.dim() });
    }
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::PreconditionViolated("A must be nonzero".into()));
    }
    let lambda: C64 = a.as_dmatrix().dotc(a_prime.as_dmatrix()) / (norm * norm);
    let residual = (a_prime - &a.scale(lambda)).frobenius_norm();
    let scale = norm.max(a_prime.frobenius_norm());
    let n = a.dim();
    let mut mismatches = 0;
    for t in 0..trials {
        let mut rng = rng_for(seed, t as u64);
        let x = gaussian_vector(&mut rng, n).normalize();
        let g = gaussian_vector(&mut rng, n);
        let probe = if t % 2 == 0 { annihilating_idempotent(a, &x, &g) } else { None };
        let p = match probe {
            Some(p) => p,
            None => RankOneFunctional::random(&mut rng, n),
        };
        let s = p.x().norm() * p.f().norm();
        let z1 = pairing(&a.mul_vec(p.x()), p.f()).norm() <= tol.zero.sqrt() * norm * s;
        let z2 = pairing(&a_prime.mul_vec(p.x()), p.f()).norm() <= tol.zero.sqrt() * a_prime.frobenius_norm().max(norm) * s;
        if z1 != z2 {
            mismatches += 1;
        }
    }
    let verdict = if residual <= PROPORTIONALITY_TOL * scale && mismatches == 0 {
        Proportionality::Proportional { lambda }
    } else {
        Proportionality::Not
    };
    Ok(ProportionalityReport { verdict, lambda, residual, pattern_trials: trials, pattern_mismatches: mismatches })
}
