//! Thin wrappers over nalgebra factorizations plus the few dense routines it
//! lacks: Schur reordering, triangular eigenvectors, principal matrix roots
//! and complement bases.

use nalgebra::{DMatrix, DVector, Schur};

use super::matrix::{c64, C64};
use crate::error::{Error, Result};

/// Singular value decomposition with singular values sorted descending.
pub struct Svd {
    pub u: DMatrix<C64>,
    pub sigma: Vec<f64>,
    /// Columns are right singular vectors.
    pub v: DMatrix<C64>,
}

/// One-sided Jacobi SVD. nalgebra's bidiagonal complex SVD returns
/// inaccurate factors for some rank-deficient inputs, so it is not used.
pub fn svd(m: &DMatrix<C64>) -> Svd {
    if m.nrows() < m.ncols() {
        let t = jacobi_svd(&m.adjoint());
        return Svd { u: t.v, sigma: t.sigma, v: t.u };
    }
    if m.nrows() > 2 * m.ncols() {
        // QR first so the rotations act on a square factor
        let qr = m.clone().qr();
        let (q, r) = (qr.q(), qr.r());
        let t = jacobi_svd(&r);
        return Svd { u: q * t.u, sigma: t.sigma, v: t.v };
    }
    jacobi_svd(m)
}

const JACOBI_SWEEPS: usize = 80;

/// Tall-or-square input; returns thin `u` (m x n) and square `v` (n x n).
fn jacobi_svd(m: &DMatrix<C64>) -> Svd {
    let (rows, n) = m.shape();
    let mut u = m.clone();
    let mut v = DMatrix::<C64>::identity(n, n);
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dotc(&u.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // rotate (u_p, u_q e^{-i phi}) by the real Jacobi rotation
                for mat in [&mut u, &mut v] {
                    for r in 0..mat.nrows() {
                        let a = mat[(r, p)];
                        let b = mat[(r, q)] * phase.conj();
                        mat[(r, p)] = a * c - b * s;
                        mat[(r, q)] = a * s + b * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let top = sigma.iter().copied().fold(0.0, f64::max);
    let mut uu = DMatrix::zeros(rows, n);
    let mut vv = DMatrix::zeros(n, n);
    let mut filled = 0;
    for (k, &j) in order.iter().enumerate() {
        vv.set_column(k, &v.column(j));
        if sigma[j] > f64::EPSILON * top * n as f64 && sigma[j] > 0.0 {
            uu.set_column(k, &(u.column(j) / c64(sigma[j], 0.0)));
            filled = k + 1;
        }
    }
    complete_orthonormal(&mut uu, filled);
    sigma = order.iter().map(|&j| sigma[j]).collect();
    Svd { u: uu, sigma, v: vv }
}

/// Replaces columns `from..` with an orthonormal completion of the leading block.
fn complete_orthonormal(u: &mut DMatrix<C64>, from: usize) {
    let (rows, cols) = u.shape();
    let mut k = from;
    let mut e = 0;
    while k < cols && e < rows {
        let mut cand = DVector::<C64>::zeros(rows);
        cand[e] = c64(1.0, 0.0);
        e += 1;
        for _ in 0..2 {
            for j in 0..k {
                let proj = u.column(j).dotc(&cand);
                cand -= u.column(j) * proj;
            }
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            u.set_column(k, &(cand / c64(norm, 0.0)));
            k += 1;
        }
    }
}

pub fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    svd(m).sigma
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(sigma: &[f64], rel_tol: f64) -> usize {
    match sigma.first() {
        Some(&top) if top > 0.0 => sigma.iter().filter(|&&s| s > rel_tol * top).count(),
        _ => 0,
    }
}

/// Complex Schur form `m = q t q*`.
pub fn schur(m: &DMatrix<C64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let n = m.nrows();
    let s = Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1))
        .ok_or(Error::NonConvergence(n))?;
    let (q, mut t) = s.unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = c64(0.0, 0.0);
        }
    }
    Ok((q, t))
}

pub fn eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let (_, t) = schur(m)?;
    Ok((0..m.nrows()).map(|i| t[(i, i)]).collect())
}

/// Swaps adjacent diagonal entries `i`, `i+1` of the triangular factor.
fn swap_adjacent(q: &mut DMatrix<C64>, t: &mut DMatrix<C64>, i: usize) {
    let t11 = t[(i, i)];
    let t22 = t[(i + 1, i + 1)];
    let x0 = t[(i, i + 1)];
    let x1 = t22 - t11;
    let norm = (x0.norm_sqr() + x1.norm_sqr()).sqrt();
    if norm == 0.0 {
        return;
    }
    let c = x0 / norm;
    let s = x1 / norm;
    // g = [[c, -conj(s)], [s, conj(c)]], first column is the eigenvector for t22
    let g = [[c, -s.conj()], [s, c.conj()]];
    let n = t.nrows();
    for r in 0..n {
        let a = t[(r, i)];
        let b = t[(r, i + 1)];
        t[(r, i)] = a * g[0][0] + b * g[1][0];
        t[(r, i + 1)] = a * g[0][1] + b * g[1][1];
        let a = q[(r, i)];
        let b = q[(r, i + 1)];
        q[(r, i)] = a * g[0][0] + b * g[1][0];
        q[(r, i + 1)] = a * g[0][1] + b * g[1][1];
    }
    for col in 0..n {
        let a = t[(i, col)];
        let b = t[(i + 1, col)];
        t[(i, col)] = g[0][0].conj() * a + g[1][0].conj() * b;
        t[(i + 1, col)] = g[0][1].conj() * a + g[1][1].conj() * b;
    }
    t[(i + 1, i)] = c64(0.0, 0.0);
}

/// Moves every diagonal entry accepted by `select` to the leading block,
/// keeping relative order. Returns the number of selected entries.
pub fn reorder_schur(
    q: &mut DMatrix<C64>,
    t: &mut DMatrix<C64>,
    select: impl Fn(C64) -> bool,
) -> usize {
    let n = t.nrows();
    let mut next = 0;
    for k in 0..n {
        if select(t[(k, k)]) {
            let mut pos = k;
            while pos > next {
                swap_adjacent(q, t, pos - 1);
                pos -= 1;
            }
            next += 1;
        }
    }
    next
}

/// Eigenvectors of an upper triangular matrix with distinct diagonal, as columns.
fn triangular_eigenvectors(t: &DMatrix<C64>) -> DMatrix<C64> {
    let n = t.nrows();
    let mut y = DMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = c64(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = c64(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            y[(i, k)] = -acc / (t[(i, i)] - lambda);
        }
        let norm = y.column(k).norm();
        y.column_mut(k).unscale_mut(norm);
    }
    y
}

/// Principal branch `z^(1/s)`, with `0^(1/s) = 0`.
pub fn principal_root_scalar(z: C64, s: u32) -> C64 {
    if z.norm() == 0.0 {
        return c64(0.0, 0.0);
    }
    C64::from_polar(z.norm().powf(1.0 / s as f64), z.arg() / s as f64)
}

/// Applies `f` to the eigenvalues of a diagonalizable `c` whose eigenvalues
/// are pairwise distinct: returns `V f(Λ) V⁻¹` for `c = V Λ V⁻¹`.
pub fn spectral_function(c: &DMatrix<C64>, f: impl Fn(C64) -> C64) -> Result<DMatrix<C64>> {
    let n = c.nrows();
    let (q, t) = schur(c)?;
    let scale = c.norm().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (t[(i, i)] - t[(j, j)]).norm() <= 1e-8 * scale {
                return Err(Error::DegenerateInput(
                    "matrix function requires pairwise distinct eigenvalues".into(),
                ));
            }
        }
    }
    let v = &q * triangular_eigenvectors(&t);
    let v_inv = v.clone().try_inverse().ok_or(Error::Singular)?;
    let fd = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| f(t[(i, i)])));
    Ok(&v * fd * v_inv)
}

/// A matrix `b` with `b^s = c` for diagonalizable `c` with pairwise distinct
/// eigenvalues, using principal scalar roots on the eigenbasis.
pub fn principal_root(c: &DMatrix<C64>, s: u32) -> Result<DMatrix<C64>> {
    if s == 1 {
        return Ok(c.clone());
    }
    let n = c.nrows();
    let b = spectral_function(c, |z| principal_root_scalar(z, s))?;
    let mut check = DMatrix::identity(n, n);
    for _ in 0..s {
        check = &check * &b;
    }
    if (&check - c).norm() > 1e-8 * c.norm().max(1.0) {
        return Err(Error::DegenerateInput("matrix root lost accuracy".into()));
    }
    Ok(b)
}

/// Orthonormal basis (columns) of the null space of `m`, with singular values
/// at most `rel_tol * sigma_max` treated as zero.
pub fn null_space(m: &DMatrix<C64>, rel_tol: f64) -> DMatrix<C64> {
    let cols = m.ncols();
    let padded;
    let m = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        padded = p;
        &padded
    } else {
        m
    };
    let d = svd(m);
    let rank = numerical_rank(&d.sigma, rel_tol);
    d.v.columns(rank, cols - rank).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the column span of `w`.
pub fn orthogonal_complement(w: &DMatrix<C64>, rel_tol: f64) -> DMatrix<C64> {
    let n = w.nrows();
    if w.ncols() == 0 {
        return DMatrix::identity(n, n);
    }
    null_space(&w.adjoint(), rel_tol)
}

/// Orthonormal basis of the column span of `w`.
pub fn orthonormal_basis(w: &DMatrix<C64>, rel_tol: f64) -> DMatrix<C64> {
    let d = svd(w);
    let rank = numerical_rank(&d.sigma, rel_tol);
    d.u.columns(0, rank).into_owned()
}

/// Moore-Penrose pseudo-inverse with singular values at most
/// `rel_tol * sigma_max` dropped.
pub fn pinv(m: &DMatrix<C64>, rel_tol: f64) -> DMatrix<C64> {
    let d = svd(m);
    let rank = numerical_rank(&d.sigma, rel_tol);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for k in 0..rank {
        out += d.v.column(k) * d.u.column(k).adjoint() * c64(1.0 / d.sigma[k], 0.0);
    }
    out
}

/// Eigenpairs of a Hermitian matrix, ordered by decreasing modulus.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let h = (m + m.adjoint()) * c64(0.5, 0.0);
    let e = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[b].abs().total_cmp(&e.eigenvalues[a].abs()));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |i, k| e.eigenvectors[(i, order[k])]);
    (vals, vecs)
}

/// Left singular vector of the largest singular value (unit norm).
pub fn dominant_left_vector(m: &DMatrix<C64>) -> DVector<C64> {
    svd(m).u.column(0).into_owned()
}

/// Least-squares solution of `a x = b` via SVD, reporting the numerical rank.
pub fn least_squares(a: &DMatrix<C64>, b: &DVector<C64>, rel_tol: f64) -> (DVector<C64>, usize) {
    let d = svd(a);
    let rank = numerical_rank(&d.sigma, rel_tol);
    let mut x = DVector::zeros(a.ncols());
    for k in 0..rank {
        let coeff = d.u.column(k).dotc(b) / c64(d.sigma[k], 0.0);
        x += d.v.column(k) * coeff;
    }
    (x, rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(d: &Svd) -> DMatrix<C64> {
        let k = d.sigma.len();
        let sig = DMatrix::from_diagonal(&DVector::from_iterator(k, d.sigma.iter().map(|&x| c64(x, 0.0))));
        &d.u * sig * d.v.adjoint()
    }

    #[test]
    fn svd_is_accurate_on_rank_deficient_jordan_sums() {
        // A P³ + P³ A for an idempotent P: a rank-2 input on which the
        // bidiagonal complex SVD used to lose four digits
        use crate::random::{gaussian_dmatrix, random_idempotent_pair, rng_for};
        let mut rng = rng_for(40, 3);
        let a = gaussian_dmatrix(&mut rng, 5, 5);
        for t in 0..50 {
            let (x, f) = random_idempotent_pair(&mut rng_for(0x7265_636f, t), 5);
            let p = &x * f.transpose();
            let p3 = &p * &p * &p;
            let m = &a * &p3 + &p3 * &a;
            let d = svd(&m);
            assert!((reconstruct(&d) - &m).norm() <= 1e-13 * m.norm());
            let d1 = svd(&(&a * &p + &p * &a));
            assert!((d.sigma[1] - d1.sigma[1]).abs() <= 1e-12 * d.sigma[0]);
        }
    }

    #[test]
    fn svd_shapes() {
        use crate::random::{gaussian_dmatrix, rng_for};
        let mut rng = rng_for(41, 0);
        for (r, c) in [(3, 5), (5, 3), (4, 4), (1, 3), (40, 6), (6, 40)] {
            let m = gaussian_dmatrix(&mut rng, r, c);
            let d = svd(&m);
            assert_eq!(d.sigma.len(), r.min(c));
            assert!((reconstruct(&d) - &m).norm() <= 1e-13 * m.norm());
            assert!(d.sigma.windows(2).all(|w| w[0] >= w[1]));
            let k = r.min(c);
            let gram = d.u.adjoint() * &d.u;
            assert!((gram - DMatrix::<C64>::identity(k, k)).norm() <= 1e-12);
        }
        // tall and rank deficient: the QR path must keep the null vector exact
        let left = gaussian_dmatrix(&mut rng, 30, 4);
        let right = gaussian_dmatrix(&mut rng, 4, 5);
        let m = &left * &right;
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.ncols(), 1);
        assert!((&m * ns).norm() <= 1e-12 * m.norm());
    }

    fn upper(vals: &[[f64; 3]; 3]) -> DMatrix<C64> {
        DMatrix::from_fn(3, 3, |i, j| c64(vals[i][j], 0.0))
    }

    #[test]
    fn reorder_moves_selected_to_front() {
        let m = upper(&[[0.0, 1.0, 2.0], [0.0, 3.0, 1.0], [0.0, 0.0, 0.0]]);
        let (mut q, mut t) = schur(&m).unwrap();
        let k = reorder_schur(&mut q, &mut t, |z| z.norm() > 1e-9);
        assert_eq!(k, 1);
        assert!((t[(0, 0)] - c64(3.0, 0.0)).norm() < 1e-12);
        let back = &q * &t * q.adjoint();
        assert!((back - &m).norm() < 1e-12);
        assert!(t[(1, 0)].norm() == 0.0 && t[(2, 0)].norm() == 0.0);
    }

    #[test]
    fn principal_root_reproduces_matrix() {
        let c = upper(&[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 2.0]]);
        for s in 1..5 {
            let b = principal_root(&c, s).unwrap();
            let mut p = DMatrix::identity(3, 3);
            for _ in 0..s {
                p = &p * &b;
            }
            assert!((p - &c).norm() < 1e-10);
        }
    }

    #[test]
    fn principal_root_rejects_repeated_eigenvalues() {
        let c = DMatrix::<C64>::identity(2, 2);
        assert!(principal_root(&upper(&[[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]), 2).is_err());
        assert!(principal_root(&c, 1).is_ok());
    }

    #[test]
    fn null_space_of_rank_deficient() {
        let m = upper(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]]);
        let ns = null_space(&m, 1e-12);
        assert_eq!(ns.ncols(), 1);
        assert!((&m * ns.column(0)).norm() < 1e-12);
    }
}
