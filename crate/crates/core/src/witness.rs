//! Spectral characterization of rank-one operators.
//!
//! For `A` of rank at least two a *witness* is a matrix `B` of rank at most
//! three such that `BʳABˢ + BˢABʳ` has three distinct nonzero eigenvalues.
//! The explicit constructions work in a frame: columns `W` and rows `G` with
//! `GW = I`, and `B = W B̂ G`. For `r ≥ 1` the product is `W (B̂ʳ Â B̂ˢ +
//! B̂ˢ Â B̂ʳ) G` with `Â = G A W`; for `r = 0` the frame spans an
//! `A`-invariant subspace, so the product is block triangular. Every candidate
//! is verified on the actual `A` before it is reported.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jordan::two_slot_product;
use crate::linalg::decomp::{self, svd};
use crate::linalg::{c64, eigenvalues, rank, spectrum, ComplexMatrix, Spectrum, ToleranceConfig, C64};
use crate::random::{complex_normal, gaussian_dmatrix, gaussian_vector, rng_for};

/// Which case of the case analysis produced a witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// Rank ≥ 3: triangular invertible 3×3 compression, diagonal `B̂`.
    RankThreeDiagonal,
    /// Rank 2 with two nonzero eigenvalues: rotation block plus `d`.
    TwoNonzeroRotation,
    /// Rank 2 with one nonzero eigenvalue, `r ≥ 1`.
    SingleNonzeroShear,
    /// Rank 2 with one nonzero eigenvalue, `r = 0`: root of a fixed matrix.
    SingleNonzeroRoot,
    /// Rank-2 nilpotent with `s = 2r`: `B̂ʳ` is a cyclic permutation.
    NilpotentCyclic,
    /// Rank-2 nilpotent with `s ≠ 2r`: `B̂` diagonal in a chosen eigenbasis.
    NilpotentEigenbasis,
    /// Rank-2 nilpotent, `r = 0`: root of a fixed matrix.
    NilpotentRoot,
    /// Rank-2 square-zero, `r ≥ 1`: rotation by `π/(2(r+s))` plus `d`.
    SquareZeroRotation,
    /// `r = 0`, rank ≥ 3: frame `[x, Ax, A²x]` and a root of `C(t)`.
    KrylovCompanion,
    /// `r = 0`, rank ≥ 3, no cyclic triple: invariant triangular block.
    InvariantTriangular,
    /// `r = 0`, scalar `A`: `B = diag(1, 2, 3) ⊕ 0`.
    ScalarDiagonal,
    /// `r = 0`, square-zero of rank ≥ 3: `Bˢ = [[D, D], [0, 0]]`.
    SquareZeroBlock,
    /// Self-adjoint, diagonal on three eigenvectors.
    HermitianDiagonal,
    /// Self-adjoint rank 2 with `rs ≠ 0`: `[d] ⊕ B₁`.
    HermitianRankTwo,
    /// Self-adjoint rank 2 with `r = 0`: `[b] ⊕ (projection block)`.
    HermitianProjection,
    /// Self-adjoint, `r = 0`: projection onto a Lanczos pair.
    HermitianTridiagonal,
    /// Self-adjoint scalar `A`, `r = 0`.
    HermitianScalar,
    /// Random rank-≤3 search.
    Search,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessReport {
    pub witness: ComplexMatrix,
    pub product: ComplexMatrix,
    pub spectrum: Spectrum,
    pub distinct_nonzero_count: usize,
    pub construction: Construction,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", content = "report")]
pub enum Verdict {
    RankOne,
    NotRankOne(Box<WitnessReport>),
    SquareZeroRank2,
    Inconclusive,
}

/// Canonical forms of rank-2 operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankTwoForm {
    /// `[[a,0,b],[0,0,0],[0,0,c]]`, `ac ≠ 0`.
    TwoNonzero,
    /// `[[a,0,0],[0,0,1],[0,0,0]]`, `a ≠ 0`.
    OneNonzero,
    /// `[[0,1,0],[0,0,1],[0,0,0]]`.
    Nilpotent,
    /// `[[0₂, I₂], [0₂, 0₂]]`.
    SquareZero,
}

/// Seed for the deterministic vectors some constructions need.
const FRAME_SEED: u64 = 0x6a6f_7264_616e;

fn check_exponents(r: u32, s: u32) -> Result<()> {
    if s <= r {
        return Err(Error::BadExponents { r, s });
    }
    Ok(())
}

fn dm(rows: &[&[f64]]) -> DMatrix<C64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| c64(rows[i][j], 0.0))
}

/// Biorthogonal frame `W` (columns) and `G` (rows) with `GW = I`.
struct Frame {
    w: DMatrix<C64>,
    g: DMatrix<C64>,
}

impl Frame {
    fn new(w: DMatrix<C64>) -> Result<Self> {
        let sv = decomp::singular_values(&w);
        let k = w.ncols();
        if sv.len() < k || sv[k - 1] <= 1e-10 * sv[0] {
            return Err(Error::CanonicalFormNotReached("frame vectors are dependent".into()));
        }
        let g = decomp::pinv(&w, 1e-12);
        Ok(Self { w, g })
    }

    fn with_dual(w: DMatrix<C64>, g: DMatrix<C64>) -> Self {
        Self { w, g }
    }

    fn compress(&self, a: &DMatrix<C64>) -> DMatrix<C64> {
        &self.g * a * &self.w
    }

    fn lift(&self, bhat: &DMatrix<C64>) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.w * bhat * &self.g)
    }
}

/// Backward error of the eigensolver, in units of `n · eps · ‖M‖₂`.
const BACKWARD_FACTOR: f64 = 100.0;

fn find_root(parent: &mut [usize], i: usize) -> usize {
    let mut root = i;
    while parent[root] != root {
        root = parent[root];
    }
    parent[i] = root;
    root
}

fn components(points: &[C64], radius: f64) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..points.len()).collect();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[i] - points[j]).norm() <= radius {
                let (a, b) = (find_root(&mut parent, i), find_root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    (0..points.len()).map(|i| find_root(&mut parent, i)).collect()
}

/// Distinct nonzero eigenvalues of `product` after merging groups that a
/// defective eigenvalue could produce: a Jordan block of size `g` splits by
/// up to `(c eps)^{1/g} ‖M‖₂`, so any `g` or more eigenvalues linked at that
/// radius count once.
fn certified_distinct_nonzero(product: &ComplexMatrix, scale: f64, tol: &ToleranceConfig) -> Result<usize> {
    let raw: Vec<C64> =
        eigenvalues(product, tol)?.into_iter().filter(|z| z.norm() > tol.zero * scale).collect();
    let norm = product.spectral_norm();
    let backward = BACKWARD_FACTOR * product.dim() as f64 * f64::EPSILON;
    let mut parent = components(&raw, tol.distinct * scale);
    for g in 2..=raw.len() {
        let linked = components(&raw, backward.powf(1.0 / g as f64) * norm);
        for root in 0..raw.len() {
            let members: Vec<usize> = (0..raw.len()).filter(|&i| linked[i] == root).collect();
            if members.len() >= g {
                for &i in &members[1..] {
                    let (a, b) = (find_root(&mut parent, members[0]), find_root(&mut parent, i));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut roots: Vec<usize> = (0..raw.len()).map(|i| find_root(&mut parent, i)).collect();
    roots.sort_unstable();
    roots.dedup();
    Ok(roots.len())
}

fn evaluate(
    a: &ComplexMatrix,
    b: ComplexMatrix,
    r: u32,
    s: u32,
    tol: &ToleranceConfig,
    construction: Construction,
) -> Result<Option<WitnessReport>> {
    if !b.is_finite() || rank(&b, tol) > 3 {
        return Ok(None);
    }
    let product = two_slot_product(a, &b, r, s)?;
    let spectrum = spectrum(&product, tol)?;
    let count = certified_distinct_nonzero(&product, spectrum.scale, tol)?;
    if count < 3 {
        return Ok(None);
    }
    Ok(Some(WitnessReport { witness: b, product, spectrum, distinct_nonzero_count: count, construction }))
}

/// Tries candidates in order and returns the first verified witness.
fn first_verified(
    a: &ComplexMatrix,
    r: u32,
    s: u32,
    tol: &ToleranceConfig,
    construction: Construction,
    candidates: impl IntoIterator<Item = Result<ComplexMatrix>>,
) -> Result<Option<WitnessReport>> {
    for b in candidates {
        match b {
            Ok(b) => {
                if let Some(rep) = evaluate(a, b, r, s, tol, construction)? {
                    return Ok(Some(rep));
                }
            }
            Err(Error::NonConvergence(n)) => return Err(Error::NonConvergence(n)),
            Err(_) => continue,
        }
    }
    Ok(None)
}

fn free_parameters() -> impl Iterator<Item = f64> + Clone {
    (1..=24).map(|d| d as f64)
}

fn rotation_plus(theta: f64, d: f64, size: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(size, size);
    m[(0, 0)] = c64(theta.cos(), 0.0);
    m[(0, 1)] = c64(-theta.sin(), 0.0);
    m[(1, 0)] = c64(theta.sin(), 0.0);
    m[(1, 1)] = c64(theta.cos(), 0.0);
    m[(2, 2)] = c64(d, 0.0);
    m
}

fn is_scalar(a: &ComplexMatrix, tol: &ToleranceConfig) -> bool {
    let n = a.dim();
    let mean = a.trace() / n as f64;
    let dev = a - &ComplexMatrix::identity(n).scale(mean);
    dev.frobenius_norm() <= tol.zero * a.frobenius_norm()
}

fn is_square_zero(a: &ComplexMatrix, tol: &ToleranceConfig) -> bool {
    let norm = a.frobenius_norm();
    (a * a).frobenius_norm() <= tol.zero * norm * norm
}

/// Classifies a rank-2 matrix into one of the four canonical forms.
pub fn rank_two_form(a: &ComplexMatrix, tol: &ToleranceConfig) -> Result<RankTwoForm> {
    let an = a.as_dmatrix().clone();
    let d = svd(&an);
    if decomp::numerical_rank(&d.sigma, tol.rank) != 2 {
        return Err(Error::PreconditionViolated("matrix does not have rank 2".into()));
    }
    let (x, y) = rank_factors(&d);
    let k = y.adjoint() * &x;
    let ks = decomp::singular_values(&k);
    let top = d.sigma[0];
    Ok(if ks[0] <= tol.zero * top {
        RankTwoForm::SquareZero
    } else if ks[1] > tol.zero * top {
        RankTwoForm::TwoNonzero
    } else if k.trace().norm() > tol.zero * top {
        RankTwoForm::OneNonzero
    } else {
        RankTwoForm::Nilpotent
    })
}

/// `A = X Y*` from the leading two singular triplets.
fn rank_factors(d: &decomp::Svd) -> (DMatrix<C64>, DMatrix<C64>) {
    let mut x = d.u.columns(0, 2).into_owned();
    for j in 0..2 {
        x.column_mut(j).scale_mut(d.sigma[j]);
    }
    (x, d.v.columns(0, 2).into_owned())
}

fn columns(cols: &[nalgebra::DVector<C64>]) -> DMatrix<C64> {
    DMatrix::from_columns(cols)
}

/// Frame realizing the canonical form, with residual check of `G A W`.
fn rank_two_frame(an: &DMatrix<C64>, form: RankTwoForm, tol: &ToleranceConfig) -> Result<(Frame, DMatrix<C64>)> {
    let d = svd(an);
    let (x, y) = rank_factors(&d);
    let frame = match form {
        RankTwoForm::TwoNonzero => {
            let u2 = d.u.columns(0, 2).into_owned();
            let m = u2.adjoint() * an * &u2;
            let (q, _) = decomp::schur(&m)?;
            let basis = &u2 * q;
            let kernel = decomp::null_space(an, tol.rank);
            Frame::new(columns(&[basis.column(0).into_owned(), kernel.column(0).into_owned(), basis.column(1).into_owned()]))?
        }
        RankTwoForm::OneNonzero => {
            let k = y.adjoint() * &x;
            let kd = svd(&k);
            let u = &x * kd.u.column(0);
            let e2 = &x * kd.v.column(1);
            let e3 = decomp::pinv(an, tol.rank) * &e2;
            Frame::new(columns(&[u, e2, e3]))?
        }
        RankTwoForm::Nilpotent => {
            let a2 = an * an;
            let e3 = svd(&a2).v.column(0).into_owned();
            let e2 = an * &e3;
            let e1 = an * &e2;
            Frame::new(columns(&[e1, e2, e3]))?
        }
        RankTwoForm::SquareZero => {
            let f1 = d.u.column(0).into_owned();
            let f2 = d.u.column(1).into_owned();
            let p = decomp::pinv(an, tol.rank);
            let f3 = &p * &f1;
            let f4 = &p * &f2;
            let g2 = &f4 - &f2;
            Frame::new(columns(&[f1, f3, f4, g2]))?
        }
    };
    let l = frame.compress(an);
    let ideal = match form {
        RankTwoForm::TwoNonzero => {
            let mut m = DMatrix::zeros(3, 3);
            m[(0, 0)] = l[(0, 0)];
            m[(0, 2)] = l[(0, 2)];
            m[(2, 2)] = l[(2, 2)];
            m
        }
        RankTwoForm::OneNonzero => {
            let mut m = dm(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]);
            m[(0, 0)] = l[(0, 0)];
            m
        }
        RankTwoForm::Nilpotent => dm(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]),
        RankTwoForm::SquareZero => dm(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 1.0],
            &[0.0, 0.0, -1.0, -1.0],
        ]),
    };
    if (&l - &ideal).norm() > 1e-7 * l.norm() {
        return Err(Error::CanonicalFormNotReached(format!("{form:?} frame residual too large")));
    }
    // invariance of the frame span (needed for r = 0)
    let drift = an * &frame.w - &frame.w * &ideal;
    if drift.norm() > 1e-7 * frame.w.norm() {
        return Err(Error::CanonicalFormNotReached(format!("{form:?} frame is not invariant")));
    }
    Ok((frame, ideal))
}

fn rank_two_witness(
    a: &ComplexMatrix,
    r: u32,
    s: u32,
    tol: &ToleranceConfig,
) -> Result<Option<WitnessReport>> {
    let form = rank_two_form(a, tol)?;
    let an = a.as_dmatrix().clone();
    let (frame, _) = rank_two_frame(&an, form, tol)?;
    let m = r + s;
    match (form, r) {
        (RankTwoForm::TwoNonzero, 0) => {
            let angles: Vec<f64> = (0..=s).map(|j| (2 * j + 1) as f64 * PI / (2 * s + 1) as f64).collect();
            let cands: Vec<_> = angles
                .iter()
                .flat_map(|&t| free_parameters().map(move |d| (t, d)))
                .map(|(t, d)| Ok(frame.lift(&rotation_plus(t, d, 3))))
                .collect();
            first_verified(a, r, s, tol, Construction::TwoNonzeroRotation, cands)
        }
        (RankTwoForm::TwoNonzero, _) => {
            // B̂ˢ = -I₂ ⊕ dˢ needs θ an odd multiple of π/s; the two rotation
            // eigenvalues stay distinct only if cos 2rθ ≠ 0.
            let angles: Vec<f64> = (0..s)
                .map(|j| (2 * j + 1) as f64 * PI / s as f64)
                .filter(|t| (2.0 * r as f64 * t).cos().abs() > tol.distinct)
                .filter(|t| 1.0 - (r as f64 * t).cos().powi(2) > tol.distinct)
                .collect();
            let cands: Vec<_> = angles
                .iter()
                .flat_map(|&t| free_parameters().map(move |d| (t, d)))
                .map(|(t, d)| Ok(frame.lift(&rotation_plus(t, d, 3))))
                .collect();
            first_verified(a, r, s, tol, Construction::TwoNonzeroRotation, cands)
        }
        (RankTwoForm::OneNonzero, 0) => {
            let cands: Vec<_> = free_parameters()
                .map(|d| {
                    let c = dm(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 2.0 * d, 2.0]]);
                    decomp::principal_root(&c, s).map(|b| frame.lift(&b))
                })
                .collect();
            first_verified(a, r, s, tol, Construction::SingleNonzeroRoot, cands)
        }
        (RankTwoForm::OneNonzero, _) => {
            let cands: Vec<_> = free_parameters()
                .map(|d| Ok(frame.lift(&dm(&[&[d, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 1.0, 1.0]]))))
                .collect();
            first_verified(a, r, s, tol, Construction::SingleNonzeroShear, cands)
        }
        (RankTwoForm::Nilpotent, 0) => {
            let c = dm(&[&[0.0, 0.0, 0.0], &[1.0, 1.0, 0.0], &[0.0, 2.0, 2.0]]);
            let cand = decomp::principal_root(&c, s).map(|b| frame.lift(&b));
            first_verified(a, r, s, tol, Construction::NilpotentRoot, [cand])
        }
        (RankTwoForm::Nilpotent, _) if s == 2 * r => {
            let p = dm(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
            let cand = decomp::principal_root(&p, r).map(|b| frame.lift(&b));
            first_verified(a, r, s, tol, Construction::NilpotentCyclic, [cand])
        }
        (RankTwoForm::Nilpotent, _) => {
            let t1 = 2.0 * PI / s as f64;
            let t2 = 4.0 * PI / s as f64;
            let e1 = C64::from_polar(1.0, r as f64 * t1);
            let e2 = C64::from_polar(1.0, r as f64 * t2);
            let mut l = dm(&[&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0]]);
            l[(1, 1)] = e1;
            l[(2, 2)] = e2;
            let targets = [(c64(1.0, 0.0), c64(1.0, 0.0)), (e1, C64::from_polar(1.0, t1)), (e2, C64::from_polar(1.0, t2))];
            let cand = decomp::spectral_function(&l, |z| {
                targets
                    .iter()
                    .min_by(|p, q| (p.0 - z).norm().total_cmp(&(q.0 - z).norm()))
                    .map(|p| p.1)
                    .unwrap()
            })
            .map(|b| frame.lift(&b));
            first_verified(a, r, s, tol, Construction::NilpotentEigenbasis, [cand])
        }
        (RankTwoForm::SquareZero, 0) => Err(Error::PreconditionViolated(
            "square-zero rank-2 matrices admit no witness when r = 0".into(),
        )),
        (RankTwoForm::SquareZero, _) => {
            let theta = PI / (2.0 * m as f64);
            let cands: Vec<_> = free_parameters().map(|d| Ok(frame.lift(&rotation_plus(theta, d, 4)))).collect();
            first_verified(a, r, s, tol, Construction::SquareZeroRotation, cands)
        }
    }
}

/// Diagonal `B̂ = Q diag(1, b₂, b₃) Q*` candidates over the free parameters.
fn diagonal_candidates(frame: &Frame, q: &DMatrix<C64>) -> Vec<Result<ComplexMatrix>> {
    let mut out = Vec::new();
    for b2 in free_parameters().take(8) {
        for b3 in free_parameters().take(8) {
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                c64(1.0, 0.0),
                c64(b2, 0.0),
                c64(b3, 0.0),
            ]));
            out.push(Ok(frame.lift(&(q * d * q.adjoint()))));
        }
    }
    out
}

/// Rank ≥ 3 and `r ≥ 1`: `W` spans the top three right singular vectors and
/// the dual `G` is chosen so that the compression `G A W` is invertible.
fn rank_three_witness(a: &ComplexMatrix, r: u32, s: u32, tol: &ToleranceConfig) -> Result<Option<WitnessReport>> {
    let an = a.as_dmatrix().clone();
    let n = a.dim();
    let d = svd(&an);
    let v3 = d.v.columns(0, 3).into_owned();
    let u3 = d.u.columns(0, 3).into_owned();
    let perp = DMatrix::identity(n, n) - &v3 * v3.adjoint();
    let mut rng = rng_for(FRAME_SEED, 0);
    let mut duals = vec![DMatrix::zeros(3, n), u3.adjoint()];
    for _ in 0..4 {
        duals.push(gaussian_dmatrix(&mut rng, 3, n));
    }
    let mut best: Option<(f64, DMatrix<C64>)> = None;
    for y in duals {
        let g = v3.adjoint() + y * &perp;
        let score = decomp::singular_values(&(&g * &u3))[2] / decomp::singular_values(&g)[0];
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, g));
        }
        if score >= 1e-2 {
            break;
        }
    }
    let (score, g) = best.unwrap();
    if score <= 1e-8 {
        return Err(Error::CanonicalFormNotReached("no invertible 3x3 compression".into()));
    }
    let frame = Frame::with_dual(v3, g);
    let (q, _) = decomp::schur(&frame.compress(&an))?;
    first_verified(a, r, s, tol, Construction::RankThreeDiagonal, diagonal_candidates(&frame, &q))
}

/// Deterministic vectors for constructions that need a generic start.
fn generic_vectors(n: usize, count: usize) -> Vec<nalgebra::DVector<C64>> {
    (0..count).map(|i| gaussian_vector(&mut rng_for(FRAME_SEED, 100 + i as u64), n).normalize()).collect()
}

fn krylov_witness(a: &ComplexMatrix, s: u32, tol: &ToleranceConfig) -> Result<Option<WitnessReport>> {
    let an = a.as_dmatrix().clone();
    for x in generic_vectors(a.dim(), 4) {
        let ax = &an * &x;
        let a2x = &an * &ax;
        let w = columns(&[x, ax, a2x]);
        let sv = decomp::singular_values(&w);
        if sv[2] <= 1e-6 * sv[0] {
            continue;
        }
        let frame = Frame::new(w)?;
        let cands: Vec<_> = (0..40)
            .map(|j| {
                let t = 0.5f64.powi(j);
                let c = dm(&[&[2.0 * t, 1.0, 0.0], &[0.0, t, 2.0], &[0.0, 0.0, 0.0]]);
                decomp::principal_root(&c, s).map(|b| frame.lift(&b))
            })
            .collect();
        if let Some(rep) = first_verified(a, 0, s, tol, Construction::KrylovCompanion, cands)? {
            return Ok(Some(rep));
        }
    }
    Ok(None)
}

/// Leading invariant block of a Schur form holding three nonzero eigenvalues.
fn invariant_witness(a: &ComplexMatrix, s: u32, tol: &ToleranceConfig) -> Result<Option<WitnessReport>> {
    let an = a.as_dmatrix().clone();
    let (mut q, mut t) = decomp::schur(&an)?;
    let scale = (0..a.dim()).map(|i| t[(i, i)].norm()).fold(1e-300, f64::max);
    let k = decomp::reorder_schur(&mut q, &mut t, |z| z.norm() > tol.zero * scale);
    if k < 3 {
        return Ok(None);
    }
    let w = q.columns(0, 3).into_owned();
    let frame = Frame::with_dual(w.clone(), w.adjoint());
    first_verified(a, 0, s, tol, Construction::InvariantTriangular, diagonal_candidates(&frame, &DMatrix::identity(3, 3)))
}

fn scalar_witness(a: &ComplexMatrix, s: u32, tol: &ToleranceConfig, construction: Construction) -> Result<Option<WitnessReport>> {
    let mut d = vec![0.0; a.dim()];
    d[..3].copy_from_slice(&[1.0, 2.0, 3.0]);
    first_verified(a, 0, s, tol, construction, [Ok(ComplexMatrix::diag_real(&d))])
}

fn not_reached(what: &str) -> Error {
    Error::CanonicalFormNotReached(format!("{what} construction did not verify"))
}

/// Builds a witness following the explicit case analysis.
///
/// Requires rank ≥ 2, `s > r ≥ 0`, dimension ≥ 3 and, when `r = 0`, `A² ≠ 0`.
pub fn construct_witness(a: &ComplexMatrix, r: u32, s: u32, tol: &ToleranceConfig) -> Result<WitnessReport> {
    check_exponents(r, s)?;
    if a.dim() < 3 {
        return Err(Error::PreconditionViolated("dimension must be at least 3".into()));
    }
    let k = rank(a, tol);
    if k <= 1 {
        return Err(Error::PreconditionViolated(format!("rank {k} admits no witness")));
    }
    if r == 0 && is_square_zero(a, tol) {
        return Err(Error::PreconditionViolated("A² = 0 with r = 0".into()));
    }
    let found = if k == 2 {
        rank_two_witness(a, r, s, tol)?
    } else if r >= 1 {
        rank_three_witness(a, r, s, tol)?
    } else if is_scalar(a, tol) {
        scalar_witness(a, s, tol, Construction::ScalarDiagonal)?
    } else {
        match krylov_witness(a, s, tol)? {
            Some(rep) => Some(rep),
            None => invariant_witness(a, s, tol)?,
        }
    };
    found.ok_or_else(|| not_reached("witness"))
}

/// `r = 0` witness for square-zero `A` of rank ≥ 3: on the frame
/// `[x₁, x₂, x₃, Ax₁, Ax₂, Ax₃]`, `A` acts as `[[0, 0], [I, 0]]` and
/// `Bˢ = [[D, D], [0, 0]]` with `D = diag(1, 2, 3)`.
pub fn construct_square_zero_witness(a: &ComplexMatrix, s: u32, tol: &ToleranceConfig) -> Result<WitnessReport> {
    check_exponents(0, s)?;
    if a.dim() < 6 || rank(a, tol) < 3 || !is_square_zero(a, tol) {
        return Err(Error::PreconditionViolated("needs A² = 0 with rank ≥ 3".into()));
    }
    let an = a.as_dmatrix().clone();
    let v3 = svd(&an).v.columns(0, 3).into_owned();
    let av3 = &an * &v3;
    let mut w = DMatrix::zeros(a.dim(), 6);
    w.columns_mut(0, 3).copy_from(&v3);
    w.columns_mut(3, 3).copy_from(&av3);
    let frame = Frame::new(w)?;
    let mut bhat = DMatrix::zeros(6, 6);
    for i in 0..3 {
        let root = c64(((i + 1) as f64).powf(1.0 / s as f64), 0.0);
        bhat[(i, i)] = root;
        bhat[(i, i + 3)] = root;
    }
    first_verified(a, 0, s, tol, Construction::SquareZeroBlock, [Ok(frame.lift(&bhat))])?
        .ok_or_else(|| not_reached("square-zero"))
}

fn lift_orthonormal(w: &DMatrix<C64>, bhat: &DMatrix<C64>) -> ComplexMatrix {
    let b = w * bhat * w.adjoint();
    ComplexMatrix::wrap((&b + b.adjoint()) * c64(0.5, 0.0))
}

fn real_diag(d: &[f64]) -> DMatrix<C64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d.len(), d.iter().map(|&x| c64(x, 0.0))))
}

/// Self-adjoint `B = W diag(1, b₂, b₃) W*` over three eigenvectors of `A`
/// with nonzero eigenvalues.
fn hermitian_diagonal(a: &ComplexMatrix, r: u32, s: u32, tol: &ToleranceConfig, vecs: &DMatrix<C64>) -> Result<Option<WitnessReport>> {
    let w = vecs.columns(0, 3).into_owned();
    let mut cands = Vec::new();
    for b2 in free_parameters().take(8) {
        for b3 in free_parameters().take(8) {
            cands.push(Ok(lift_orthonormal(&w, &real_diag(&[1.0, b2, b3]))));
        }
    }
    first_verified(a, r, s, tol, Construction::HermitianDiagonal, cands)
}

/// Witness for self-adjoint `A`; the witness is self-adjoint as well.
pub fn construct_witness_selfadjoint(a: &ComplexMatrix, r: u32, s: u32, tol: &ToleranceConfig) -> Result<WitnessReport> {
    check_exponents(r, s)?;
    let n = a.dim();
    if n < 3 {
        return Err(Error::PreconditionViolated("dimension must be at least 3".into()));
    }
    if !a.is_hermitian(1e-10) {
        return Err(Error::PreconditionViolated("matrix is not self-adjoint".into()));
    }
    let k = rank(a, tol);
    if k <= 1 {
        return Err(Error::PreconditionViolated(format!("rank {k} admits no witness")));
    }
    let an = a.as_dmatrix().clone();
    let (vals, vecs) = decomp::hermitian_eigen(&an);
    let found = if k == 2 {
        // eigenvectors u₁, u₂ for the nonzero eigenvalues, u₃ in the kernel
        let w = columns(&[vecs.column(0).into_owned(), vecs.column(1).into_owned(), vecs.column(n - 1).into_owned()]);
        let cands: Vec<_> = free_parameters()
            .map(|d| {
                let mut bhat = if r == 0 {
                    real_diag(&[0.0, 0.5, 0.5])
                } else {
                    dm(&[&[0.0, 0.0, 0.0], &[0.0, 3.0, 1.0], &[0.0, 1.0, 3.0]])
                };
                if r == 0 {
                    bhat[(1, 2)] = c64(0.5, 0.0);
                    bhat[(2, 1)] = c64(0.5, 0.0);
                }
                bhat[(0, 0)] = c64(d, 0.0);
                Ok(lift_orthonormal(&w, &bhat))
            })
            .collect();
        let tag = if r == 0 { Construction::HermitianProjection } else { Construction::HermitianRankTwo };
        first_verified(a, r, s, tol, tag, cands)?
    } else if r >= 1 {
        hermitian_diagonal(a, r, s, tol, &vecs)?
    } else if is_scalar(a, tol) {
        scalar_witness(a, s, tol, Construction::HermitianScalar)?
    } else {
        let mut found = None;
        for x1 in generic_vectors(n, 4) {
            let ax1 = &an * &x1;
            let a1 = x1.dotc(&ax1);
            let v = &ax1 - &x1 * a1;
            let a2 = v.norm();
            let scale = a.spectral_norm();
            if a1.norm() <= 1e-6 * scale || a2 <= 1e-6 * scale {
                continue;
            }
            let x2 = v / c64(a2, 0.0);
            let ax2 = &an * &x2;
            let b2 = x2.dotc(&ax2);
            let b3 = (&ax2 - &x1 * c64(a2, 0.0) - &x2 * b2).norm();
            if b3 <= 1e-6 * scale {
                continue;
            }
            let w = columns(&[x1.clone(), x2]);
            let b = lift_orthonormal(&w, &DMatrix::identity(2, 2));
            if let Some(rep) = first_verified(a, 0, s, tol, Construction::HermitianTridiagonal, [Ok(b)])? {
                found = Some(rep);
                break;
            }
        }
        match found {
            Some(rep) => Some(rep),
            None if vals.iter().filter(|v| v.abs() > tol.zero).count() >= 3 => hermitian_diagonal(a, r, s, tol, &vecs)?,
            None => None,
        }
    };
    found.ok_or_else(|| not_reached("self-adjoint witness"))
}

/// Random rank-≤3 candidate: `G₁G₂` with `n×3`, `3×n` Gaussian factors,
/// or `G diag(real) G*` when a self-adjoint witness is required.
fn search_candidate(rng: &mut impl Rng, n: usize, hermitian: bool) -> ComplexMatrix {
    if hermitian {
        let g = gaussian_dmatrix(rng, n, 3);
        let d = real_diag(&[rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal)]);
        lift_orthonormal(&g, &d)
    } else {
        ComplexMatrix::wrap(gaussian_dmatrix(rng, n, 3) * gaussian_dmatrix(rng, 3, n))
    }
}

/// Randomized witness search over `budget` trials; the first success in
/// trial order is returned, independent of thread scheduling.
pub fn search_witness(
    a: &ComplexMatrix,
    r: u32,
    s: u32,
    budget: usize,
    seed: u64,
    hermitian: bool,
    tol: &ToleranceConfig,
) -> Result<Option<WitnessReport>> {
    check_exponents(r, s)?;
    let n = a.dim();
    let hits: Vec<Result<Option<WitnessReport>>> = (0..budget)
        .into_par_iter()
        .map(|t| {
            let b = search_candidate(&mut rng_for(seed, t as u64), n, hermitian);
            evaluate(a, b, r, s, tol, Construction::Search)
        })
        .collect();
    for h in hits {
        if let Some(rep) = h? {
            return Ok(Some(rep));
        }
    }
    Ok(None)
}

/// Decides whether `A` has rank one from product spectra alone, falling back
/// to search when the explicit construction fails and never mislabeling.
pub fn classify_rank_one(
    a: &ComplexMatrix,
    r: u32,
    s: u32,
    budget: usize,
    seed: u64,
    tol: &ToleranceConfig,
) -> Result<Verdict> {
    check_exponents(r, s)?;
    if a.dim() < 3 {
        return Err(Error::PreconditionViolated("dimension must be at least 3".into()));
    }
    if a.max_abs() == 0.0 {
        return Err(Error::PreconditionViolated("matrix is zero".into()));
    }
    let k = rank(a, tol);
    let witness_free = k == 1 || (r == 0 && k == 2 && is_square_zero(a, tol));
    if witness_free {
        // a witness here means the tolerances are misconfigured for this input
        if search_witness(a, r, s, budget, seed, false, tol)?.is_some() {
            return Ok(Verdict::Inconclusive);
        }
        return Ok(if k == 1 { Verdict::RankOne } else { Verdict::SquareZeroRank2 });
    }
    let constructed = if r == 0 && is_square_zero(a, tol) {
        construct_square_zero_witness(a, s, tol)
    } else {
        construct_witness(a, r, s, tol)
    };
    match constructed {
        Ok(rep) => return Ok(Verdict::NotRankOne(Box::new(rep))),
        Err(Error::CanonicalFormNotReached(_)) | Err(Error::PreconditionViolated(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(match search_witness(a, r, s, budget, seed, false, tol)? {
        Some(rep) => Verdict::NotRankOne(Box::new(rep)),
        None => Verdict::Inconclusive,
    })
}

/// Outcome of a negative fuzz campaign.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FuzzReport {
    pub trials: usize,
    pub max_distinct_nonzero: usize,
    pub offending: Option<FuzzFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FuzzFailure {
    pub trial: usize,
    pub witness: ComplexMatrix,
    pub spectrum: Spectrum,
}

/// Trial matrices: full-rank Gaussian, rank ≤ 3 factors, proof-shaped
/// blocks in a random frame, and self-adjoint rank ≤ 3.
fn fuzz_candidate(rng: &mut impl Rng, n: usize, trial: usize) -> ComplexMatrix {
    let b = match trial % 4 {
        0 => ComplexMatrix::wrap(gaussian_dmatrix(rng, n, n)),
        1 => search_candidate(rng, n, false),
        2 => {
            let k = 3.min(n);
            let w = gaussian_dmatrix(rng, n, k);
            let g = decomp::pinv(&w, 1e-12);
            let d: f64 = 0.5 + 2.0 * rng.random::<f64>();
            let theta: f64 = PI * rng.random::<f64>();
            let shape = match (trial / 4) % 4 {
                0 => rotation_plus(theta, d, 3),
                1 => dm(&[&[d, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 1.0, 1.0]]),
                2 => dm(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]),
                _ => DMatrix::from_fn(3, 3, |i, j| if i == j { complex_normal(rng) } else { c64(0.0, 0.0) }),
            };
            let shape = shape.view((0, 0), (k, k)).into_owned();
            ComplexMatrix::wrap(&w * shape * g)
        }
        _ => search_candidate(rng, n, true),
    };
    let norm = b.frobenius_norm();
    if norm > 0.0 {
        b.scale(c64(1.0 / norm, 0.0))
    } else {
        b
    }
}

/// Checks that no trial `B` yields more than two distinct nonzero eigenvalues.
pub fn rank_one_fuzz_negative(
    a: &ComplexMatrix,
    r: u32,
    s: u32,
    trials: usize,
    seed: u64,
    tol: &ToleranceConfig,
) -> Result<FuzzReport> {
    check_exponents(r, s)?;
    let n = a.dim();
    let counts: Vec<Result<(usize, ComplexMatrix, Spectrum)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let b = fuzz_candidate(&mut rng_for(seed, t as u64), n, t);
            let prod = two_slot_product(a, &b, r, s)?;
            let sp = spectrum(&prod, tol)?;
            Ok((certified_distinct_nonzero(&prod, sp.scale, tol)?, b, sp))
        })
        .collect();
    let mut report = FuzzReport { trials, max_distinct_nonzero: 0, offending: None };
    for (t, c) in counts.into_iter().enumerate() {
        let (count, b, sp) = c?;
        report.max_distinct_nonzero = report.max_distinct_nonzero.max(count);
        if count > 2 && report.offending.is_none() {
            report.offending = Some(FuzzFailure { trial: t, witness: b, spectrum: sp });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{spectra_equal, Spectrum};
    use crate::random::{conditioned_matrix, hermitian_of_rank, matrix_of_rank};

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn embed(rows: &[&[f64]], n: usize) -> ComplexMatrix {
        ComplexMatrix::embed(&dm(rows), n)
    }

    fn assert_spectrum_contains(rep: &WitnessReport, expected: &[C64]) {
        let s = rep.spectrum.scale;
        for e in expected {
            assert!(rep.spectrum.contains(*e, 1e-9 * s), "{e} missing from {:?}", rep.spectrum.values);
        }
        assert_eq!(rep.spectrum.nonzero().len(), expected.len());
    }

    #[test]
    fn nilpotent_cyclic_case() {
        let a = embed(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]], 4);
        let rep = construct_witness(&a, 1, 2, &tol()).unwrap();
        assert_eq!(rep.construction, Construction::NilpotentCyclic);
        let root = 2f64.powf(1.0 / 3.0);
        let expected: Vec<C64> = (0..3).map(|k| C64::from_polar(root, 2.0 * PI * k as f64 / 3.0)).collect();
        assert_spectrum_contains(&rep, &expected);
    }

    #[test]
    fn single_nonzero_shear_case() {
        let a = embed(&[&[0.7, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]], 3);
        let rep = construct_witness(&a, 1, 2, &tol()).unwrap();
        assert_eq!(rep.construction, Construction::SingleNonzeroShear);
        let root = 2.0 * 2f64.sqrt();
        let nz = rep.spectrum.nonzero();
        assert!(rep.spectrum.contains(c64(3.0 + root, 0.0), 1e-9 * rep.spectrum.scale), "{nz:?}");
        assert!(rep.spectrum.contains(c64(3.0 - root, 0.0), 1e-9 * rep.spectrum.scale), "{nz:?}");
    }

    #[test]
    fn r_zero_nilpotent_gives_one_two_three() {
        for s in 1..4 {
            let a = embed(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]], 5);
            let rep = construct_witness(&a, 0, s, &tol()).unwrap();
            assert_eq!(rep.construction, Construction::NilpotentRoot);
            assert_spectrum_contains(&rep, &[c64(1.0, 0.0), c64(2.0, 0.0), c64(3.0, 0.0)]);
        }
    }

    #[test]
    fn forms_are_detected_in_random_frames() {
        let mut rng = rng_for(21, 0);
        let t = conditioned_matrix(&mut rng, 5, 10.0);
        let ti = t.inverse().unwrap();
        let cases = [
            (embed(&[&[1.0, 0.0, 0.5], &[0.0, 0.0, 0.0], &[0.0, 0.0, -2.0]], 5), RankTwoForm::TwoNonzero),
            (embed(&[&[1.5, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]], 5), RankTwoForm::OneNonzero),
            (embed(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]], 5), RankTwoForm::Nilpotent),
            (embed(&[&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0], &[0.0; 4], &[0.0; 4]], 5), RankTwoForm::SquareZero),
        ];
        for (a, form) in cases {
            let a = &(&t * &a) * &ti;
            assert_eq!(rank_two_form(&a, &tol()).unwrap(), form);
            for (r, s) in [(1, 2), (2, 3), (1, 3), (2, 5), (0, 1), (0, 2)] {
                if r == 0 && form == RankTwoForm::SquareZero {
                    continue;
                }
                let rep = construct_witness(&a, r, s, &tol()).unwrap_or_else(|e| panic!("{form:?} {r} {s}: {e}"));
                assert!(rep.distinct_nonzero_count >= 3);
                assert!(rank(&rep.witness, &tol()) <= 3);
            }
        }
    }

    #[test]
    fn rotation_case_fails_over_when_cosine_vanishes() {
        // (r, s) = (1, 4): cos 2rθ = 0 for every odd multiple θ of π/4
        let a = embed(&[&[1.0, 0.0, 0.5], &[0.0, 0.0, 0.0], &[0.0, 0.0, -2.0]], 4);
        assert!(matches!(construct_witness(&a, 1, 4, &tol()), Err(Error::CanonicalFormNotReached(_))));
        let v = classify_rank_one(&a, 1, 4, 200, 3, &tol()).unwrap();
        assert!(matches!(v, Verdict::NotRankOne(ref rep) if rep.construction == Construction::Search));
    }

    #[test]
    fn rank_three_and_r_zero_cases() {
        let mut rng = rng_for(22, 0);
        for n in 3..7 {
            let a = matrix_of_rank(&mut rng, n, 3);
            for (r, s) in [(1, 2), (2, 3), (0, 1), (0, 2)] {
                let rep = construct_witness(&a, r, s, &tol()).unwrap();
                assert!(rep.distinct_nonzero_count >= 3);
            }
        }
        let rep = construct_witness(&ComplexMatrix::diag_real(&[1.0, 2.0, 3.0, 0.0]), 1, 2, &tol()).unwrap();
        assert_eq!(rep.construction, Construction::RankThreeDiagonal);
        let scalar = ComplexMatrix::identity(4).scale(c64(0.0, 2.0));
        assert_eq!(construct_witness(&scalar, 0, 2, &tol()).unwrap().construction, Construction::ScalarDiagonal);
    }

    #[test]
    fn quadratic_operator_uses_invariant_block() {
        // A² = A: every Krylov triple is dependent
        let a = ComplexMatrix::diag_real(&[1.0, 1.0, 1.0, 0.0, 0.0]);
        let rep = construct_witness(&a, 0, 2, &tol()).unwrap();
        assert_eq!(rep.construction, Construction::InvariantTriangular);
    }

    #[test]
    fn square_zero_rank_three_separator() {
        let mut a = DMatrix::zeros(6, 6);
        for i in 0..3 {
            a[(i + 3, i)] = c64(1.0, 0.0);
        }
        let a = ComplexMatrix::wrap(a);
        let rep = construct_square_zero_witness(&a, 2, &tol()).unwrap();
        assert_eq!(rank(&rep.product, &tol()), 6);
        let expected: Vec<C64> = [1.0, 2.0, 3.0].iter().map(|&x| c64(x, 0.0)).collect();
        assert_spectrum_contains(&rep, &expected);
        assert!(matches!(construct_witness(&a, 0, 2, &tol()), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn selfadjoint_cases() {
        let mut rng = rng_for(23, 0);
        for (r, s) in [(1, 2), (0, 1), (0, 2), (2, 3)] {
            for k in 2..5 {
                let a = hermitian_of_rank(&mut rng, 5, k);
                let rep = construct_witness_selfadjoint(&a, r, s, &tol()).unwrap();
                assert!(rep.witness.is_hermitian(1e-12));
                assert!(rep.distinct_nonzero_count >= 3);
            }
        }
        let scalar = ComplexMatrix::identity(4).scale(c64(-1.5, 0.0));
        let rep = construct_witness_selfadjoint(&scalar, 0, 2, &tol()).unwrap();
        assert_spectrum_contains(&rep, &[c64(-3.0, 0.0), c64(-12.0, 0.0), c64(-27.0, 0.0)]);
    }

    #[test]
    fn witness_is_deterministic() {
        let a = matrix_of_rank(&mut rng_for(24, 0), 5, 2);
        let x = construct_witness(&a, 1, 2, &tol()).unwrap();
        let y = construct_witness(&a, 1, 2, &tol()).unwrap();
        assert_eq!(x.witness, y.witness);
    }

    #[test]
    fn classify_examples() {
        let e11 = ComplexMatrix::diag_real(&[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(classify_rank_one(&e11, 1, 2, 100, 1, &tol()).unwrap(), Verdict::RankOne);
        let sz = embed(&[&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0], &[0.0; 4], &[0.0; 4]], 5);
        assert_eq!(classify_rank_one(&sz, 0, 2, 100, 1, &tol()).unwrap(), Verdict::SquareZeroRank2);
        let d = ComplexMatrix::diag_real(&[1.0, 2.0, 3.0, 0.0]);
        assert!(matches!(classify_rank_one(&d, 1, 2, 100, 1, &tol()).unwrap(), Verdict::NotRankOne(_)));
        assert!(matches!(classify_rank_one(&d, 2, 2, 100, 1, &tol()), Err(Error::BadExponents { .. })));
    }

    #[test]
    fn fuzz_on_square_zero_rank_two_matches_block() {
        let sz = embed(&[&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0], &[0.0; 4], &[0.0; 4]], 5);
        let rep = rank_one_fuzz_negative(&sz, 0, 2, 300, 9, &tol()).unwrap();
        assert!(rep.max_distinct_nonzero <= 2 && rep.offending.is_none());
        let zero = rank_one_fuzz_negative(&ComplexMatrix::zeros(4), 1, 2, 50, 9, &tol()).unwrap();
        assert_eq!(zero.max_distinct_nonzero, 0);
    }

    #[test]
    fn square_zero_rank_two_product_sees_only_lower_block() {
        let a = embed(&[&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0], &[0.0; 4], &[0.0; 4]], 5);
        let t = tol();
        for trial in 0..200 {
            let b = search_candidate(&mut rng_for(31, trial), 5, trial % 2 == 0);
            let bs = b.pow(2);
            let block = ComplexMatrix::wrap(bs.as_dmatrix().view((2, 0), (2, 2)).into_owned());
            let lhs = spectrum(&two_slot_product(&a, &b, 0, 2).unwrap(), &t).unwrap();
            let rhs = spectrum(&block, &t).unwrap();
            let keep = |sp: &Spectrum, scale: f64| Spectrum {
                values: sp.nonzero().into_iter().filter(|z| z.norm() > 1e-6 * scale).collect(),
                scale,
            };
            let scale = lhs.scale.max(rhs.scale);
            assert!(spectra_equal(&keep(&lhs, scale), &keep(&rhs, scale), &t), "{lhs:?} vs {rhs:?}");
        }
    }
}
