//! Linear-table recovery: scalar, branch and intertwiner of a map known to be
//! `λ·(inner automorphism or anti-automorphism)`, and the 2x2 vectorization
//! route that produces such a table from a black box.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{
    check_exponents, model_residual, normalize_transform, snap_to_root, unit, BlackBoxMap, LinearMapTable,
    PreserverModel, RecoveryOptions, MAX_CONDITION, ROOT_SNAP_TOL, VALIDATION_TOL,
};
use crate::error::{Error, Result};
use crate::jordan::two_slot_product;
use crate::linalg::decomp::svd;
use crate::linalg::{c64, spectrum, ComplexMatrix, C64};
use crate::random::{gaussian_matrix, random_unitary, rng_for};

/// Relative residual below which `Ψ′` counts as (anti-)multiplicative.
const MULTIPLICATIVE_TOL: f64 = 1e-8;
/// Singular values below this fraction of the largest span the intertwiner space.
const NULL_TOL: f64 = 1e-8;
/// Frames with a larger condition number are re-drawn.
const FRAME_CONDITION: f64 = 1e8;
/// Agreement required between `Φ̂` and `Φ` on fresh probes.
const CK_AGREEMENT: f64 = 1e-8;
const CK_CHECKS: usize = 100;

/// `λ`, the branch and `T` for a linear table `Ψ = λ T (·) T⁻¹` or `λ T (·)ᵗ T⁻¹`.
pub fn recover_similarity(psi: &LinearMapTable, m: u32, opts: &RecoveryOptions) -> Result<PreserverModel> {
    let n = psi.dim();
    let lambda = common_scalar(psi, m)?;
    if n == 1 {
        let model = PreserverModel {
            lambda,
            transform: ComplexMatrix::identity(1),
            transposed: false,
            unitary: false,
            m,
            residual: 0.0,
        };
        let residual = table_residual(psi, &model, opts)?;
        return finish(model, residual);
    }
    let inv = lambda.inv();
    let scaled = |x: &ComplexMatrix| psi.apply(x).scale(inv);

    let mut rng = rng_for(opts.seed, 0x6d75_6c74);
    let a = gaussian_matrix(&mut rng, n);
    let b = gaussian_matrix(&mut rng, n);
    let (pa, pb, pab) = (scaled(&a), scaled(&b), scaled(&(&a * &b)));
    let denom = pa.frobenius_norm() * pb.frobenius_norm();
    let forward = (&pab - &(&pa * &pb)).frobenius_norm() / denom;
    let backward = (&pab - &(&pb * &pa)).frobenius_norm() / denom;
    let transposed = if forward <= MULTIPLICATIVE_TOL {
        false
    } else if backward <= MULTIPLICATIVE_TOL {
        true
    } else {
        return Err(Error::AmbiguousForm);
    };

    let t = intertwiner(psi, inv, transposed)?;
    let model = PreserverModel { lambda, transform: t, transposed, unitary: false, m, residual: 0.0 };
    let cond = model.transform.condition_number();
    if !(cond < MAX_CONDITION) {
        return Err(Error::SingularFrame);
    }
    let residual = table_residual(psi, &model, opts)?;
    finish(model, residual)
}

fn finish(mut model: PreserverModel, residual: f64) -> Result<PreserverModel> {
    if !(residual <= VALIDATION_TOL) {
        return Err(Error::ValidationFailed { residual });
    }
    model.residual = residual;
    Ok(model)
}

/// `λ` from `tr Ψ(P)` on the idempotents `E_ii` and `E_ii + E_ji`, required
/// to agree across all of them.
fn common_scalar(psi: &LinearMapTable, m: u32) -> Result<C64> {
    let n = psi.dim();
    let mut traces = Vec::with_capacity(n * n);
    for i in 0..n {
        traces.push(psi.image(i, i).trace());
        for j in (0..n).filter(|&j| j != i) {
            traces.push(psi.image(i, i).trace() + psi.image(j, i).trace());
        }
    }
    let lambda = snap_to_root(traces[0], m)?;
    if let Some(z) = traces.iter().find(|z| (*z - lambda).norm() > ROOT_SNAP_TOL) {
        return Err(Error::FrameInconsistent(format!("idempotent traces {} and {z} disagree", traces[0])));
    }
    Ok(lambda)
}

/// Unit-norm solution of `T X − Ψ′(X) T = 0` over the matrix units (`Xᵗ` in
/// place of `X` on the transposed branch). Unknowns are the entries of `T`
/// in row-major order.
fn intertwiner(psi: &LinearMapTable, inv: C64, transposed: bool) -> Result<ComplexMatrix> {
    let n = psi.dim();
    let nn = n * n;
    let d = svd(&intertwiner_system(psi, inv, transposed));
    let top = d.sigma[0];
    let null = d.sigma.iter().filter(|&&x| x <= NULL_TOL * top).count();
    if null != 1 {
        return Err(Error::NullSpaceDimension(null));
    }
    let v = d.v.column(nn - 1);
    Ok(normalize_transform(&ComplexMatrix::from_fn(n, |i, j| v[i * n + j])))
}

fn intertwiner_system(psi: &LinearMapTable, inv: C64, transposed: bool) -> DMatrix<C64> {
    let n = psi.dim();
    let nn = n * n;
    let mut system = DMatrix::<C64>::zeros(nn * nn, nn);
    for k in 0..n {
        for l in 0..n {
            let image = psi.image(k, l).scale(inv);
            // X = E_kl, or its transpose E_lk
            let (xk, xl) = if transposed { (l, k) } else { (k, l) };
            let block = (k * n + l) * nn;
            for a in 0..n {
                // (T X)_{a, xl} = T_{a, xk}
                system[(block + a * n + xl, a * n + xk)] += c64(1.0, 0.0);
                for b in 0..n {
                    for c in 0..n {
                        system[(block + a * n + b, c * n + b)] -= image.get(a, c);
                    }
                }
            }
        }
    }
    system
}

fn table_residual(psi: &LinearMapTable, model: &PreserverModel, opts: &RecoveryOptions) -> Result<f64> {
    let n = psi.dim();
    let map = BlackBoxMap::from_table(psi.clone());
    let mut probes: Vec<ComplexMatrix> = (0..n * n).map(|k| unit(n, k / n, k % n)).collect();
    let mut rng = rng_for(opts.seed, 0x7661_6c69);
    probes.extend((0..opts.validation_probes).map(|_| gaussian_matrix(&mut rng, n)));
    model_residual(&map, model, &probes)
}

/// Output of the 2x2 route: the linear table `Φ̂` and its classification.
#[derive(Clone, Debug)]
pub struct CkRecovery {
    pub table: LinearMapTable,
    pub model: PreserverModel,
    /// Frames drawn before a non-singular one was found.
    pub attempts: usize,
    /// Largest relative gap between `Φ̂` and `Φ` on fresh probes.
    pub agreement: f64,
}

/// Row-major vectorization `(x11, x12, x21, x22)`.
fn vectorize(x: &ComplexMatrix) -> DVector<C64> {
    DVector::from_fn(4, |k, _| x.get(k / 2, k % 2))
}

fn unvectorize(v: &DVector<C64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, |i, j| v[2 * i + j])
}

/// Rank-one orthogonal projections onto `e1`, `e2`, `e1 + e2`, `e1 + i e2`,
/// rotated by `v`.
fn projection_frame(v: &ComplexMatrix) -> Vec<ComplexMatrix> {
    let h = 0.5;
    let base = [
        [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]],
        [[h, 0.0], [h, 0.0], [h, 0.0], [h, 0.0]],
        [[h, 0.0], [0.0, -h], [0.0, h], [h, 0.0]],
    ];
    base.iter()
        .map(|p| {
            let m = ComplexMatrix::from_fn(2, |i, j| c64(p[2 * i + j][0], p[2 * i + j][1]));
            &(v * &m) * &v.adjoint()
        })
        .collect()
}

/// `B` such that every `A_jʳ B A_jˢ + A_jˢ B A_jʳ` has two distinct eigenvalues.
fn generic_probe(rng: &mut impl Rng, frame: &[ComplexMatrix], r: u32, s: u32, opts: &RecoveryOptions) -> Result<Option<ComplexMatrix>> {
    for _ in 0..32 {
        let b = gaussian_matrix(rng, 2);
        let mut generic = true;
        for a in frame {
            if spectrum(&two_slot_product(&b, a, r, s)?, &opts.tol)?.len() != 2 {
                generic = false;
                break;
            }
        }
        if generic {
            return Ok(Some(b));
        }
    }
    Ok(None)
}

fn rows_of(vectors: &[DVector<C64>]) -> DMatrix<C64> {
    DMatrix::from_fn(vectors.len(), 4, |i, j| vectors[i][j])
}

fn columns_of(vectors: &[DVector<C64>]) -> DMatrix<C64> {
    DMatrix::from_fn(4, vectors.len(), |i, j| vectors[j][i])
}

fn cond(m: &DMatrix<C64>) -> f64 {
    let sigma = svd(m).sigma;
    let lo = sigma[sigma.len() - 1];
    if lo == 0.0 {
        f64::INFINITY
    } else {
        sigma[0] / lo
    }
}

/// One vectorization pass over the frame `A_j`: `Φ̂` with
/// `v(Φ̂(B)ᵗ) = R̂⁻¹ R v(Bᵗ)`. `None` when a frame matrix is singular or no
/// generic probes were found.
fn ck_pass(
    phi: &BlackBoxMap,
    frame: &[ComplexMatrix],
    rng: &mut impl Rng,
    r: u32,
    s: u32,
    opts: &RecoveryOptions,
) -> Result<Option<LinearMapTable>> {
    let m = r + s + 1;
    let mut probes = Vec::with_capacity(4);
    for _ in 0..4 {
        match generic_probe(rng, frame, r, s, opts)? {
            Some(b) => probes.push(b),
            None => return Ok(None),
        }
    }
    let images = frame.iter().map(|a| phi.apply(a)).collect::<Result<Vec<_>>>()?;
    let r_mat = rows_of(&frame.iter().map(vectorize).collect::<Vec<_>>());
    let r_hat = rows_of(&images.iter().map(|y| vectorize(&y.pow(m - 1))).collect::<Vec<_>>());
    let t_mat = columns_of(&probes.iter().map(|b| vectorize(&b.transpose())).collect::<Vec<_>>());
    let probe_images = probes.iter().map(|b| phi.apply(b)).collect::<Result<Vec<_>>>()?;
    let t_hat = columns_of(&probe_images.iter().map(|y| vectorize(&y.transpose())).collect::<Vec<_>>());
    if !(cond(&r_hat) < FRAME_CONDITION && cond(&t_hat) < FRAME_CONDITION && cond(&t_mat) < FRAME_CONDITION) {
        return Ok(None);
    }
    // the trace identity on the probes is the hypothesis at work; measured
    // against the factor norms, which bound the rounding in both products
    let lhs = &r_mat * &t_mat;
    let size = (r_mat.norm() * t_mat.norm()).max(r_hat.norm() * t_hat.norm());
    let gap = (&lhs - &r_hat * &t_hat).norm() / size;
    if !(gap <= CK_AGREEMENT) {
        return Err(Error::NotPreserver(format!("trace identity fails on the probe frame ({gap:e})")));
    }
    let Some(r_hat_inv) = r_hat.try_inverse() else { return Ok(None) };
    let transfer = r_hat_inv * &r_mat;
    let table_images = (0..4)
        .map(|k| {
            let (i, j) = (k / 2, k % 2);
            // v(E_ijᵗ) = v(E_ji) is the unit vector at 2j + i
            unvectorize(&transfer.column(2 * j + i).into_owned()).transpose()
        })
        .collect();
    LinearMapTable::new(2, table_images).map(Some)
}

/// Rough `(transposed, T)` for a table close to a canonical form, with no
/// tolerance checks; used only to precondition the second pass.
fn rough_form(psi: &LinearMapTable, opts: &RecoveryOptions) -> Option<(bool, ComplexMatrix)> {
    let lambda = psi.image(0, 0).trace();
    if !(lambda.norm() > 0.5) {
        return None;
    }
    let inv = lambda.inv();
    let mut rng = rng_for(opts.seed, 0x7072_6563);
    let a = gaussian_matrix(&mut rng, 2);
    let b = gaussian_matrix(&mut rng, 2);
    let scaled = |x: &ComplexMatrix| psi.apply(x).scale(inv);
    let (pa, pb, pab) = (scaled(&a), scaled(&b), scaled(&(&a * &b)));
    let forward = (&pab - &(&pa * &pb)).frobenius_norm();
    let backward = (&pab - &(&pb * &pa)).frobenius_norm();
    let transposed = backward < forward;
    let d = svd(&intertwiner_system(psi, inv, transposed));
    let v = d.v.column(3);
    let t = ComplexMatrix::from_fn(2, |i, j| v[i * 2 + j]);
    let t_inv = t.inverse().ok()?;
    t_inv.is_finite().then_some((transposed, t))
}

/// Recovers a preserver on `M_2` from four projections `A_j` via the trace
/// identity `tr(A_j B) = tr(Φ(A_j)^{m−1} Φ(B))`: with `R` holding `v(A_j)` and
/// `R̂` holding `v(Φ(A_j)^{m−1})` as rows, `R v(Bᵗ) = R̂ v(Φ(B)ᵗ)`, so
/// `Φ̂` is the linear map `v(Φ̂(B)ᵗ) = R̂⁻¹ R v(Bᵗ)`.
///
/// `R̂` inherits the conditioning of `T` squared, so a second pass repeats
/// the construction on the rank-one idempotents `T₀⁻¹ A_j T₀` (transposed on
/// that branch), where `T₀` is read off the first table; their images are
/// close to orthogonal projections.
pub fn recover_2x2(phi: &BlackBoxMap, r: u32, s: u32, opts: &RecoveryOptions) -> Result<CkRecovery> {
    let m = check_exponents(r, s)?;
    if phi.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: phi.dim() });
    }
    for attempt in 0..opts.budget.max(1) {
        let mut rng = rng_for(opts.seed, 0x636b_0000 + attempt as u64);
        let v = if attempt == 0 { ComplexMatrix::identity(2) } else { random_unitary(&mut rng, 2) };
        let frame = projection_frame(&v);
        let Some(first) = ck_pass(phi, &frame, &mut rng, r, s, opts)? else { continue };
        let Some((transposed, t0)) = rough_form(&first, opts) else { continue };
        let t0_inv = t0.inverse()?;
        let adapted: Vec<ComplexMatrix> = frame
            .iter()
            .map(|p| {
                let a = &(&t0_inv * p) * &t0;
                if transposed {
                    a.transpose()
                } else {
                    a
                }
            })
            .collect();
        let Some(table) = ck_pass(phi, &adapted, &mut rng, r, s, opts)? else { continue };

        let mut agreement = 0.0f64;
        for _ in 0..CK_CHECKS {
            let x = gaussian_matrix(&mut rng, 2);
            let observed = phi.apply(&x)?;
            let predicted = table.apply(&x);
            agreement = agreement.max((&observed - &predicted).frobenius_norm() / observed.frobenius_norm());
        }
        if !(agreement <= CK_AGREEMENT) {
            return Err(Error::NotPreserver(format!("linear extension disagrees with the map ({agreement:e})")));
        }
        let mut model = recover_similarity(&table, m, opts)?;
        model.residual = model.residual.max(agreement);
        return Ok(CkRecovery { table, model, attempts: attempt + 1, agreement });
    }
    Err(Error::SingularFrame)
}
