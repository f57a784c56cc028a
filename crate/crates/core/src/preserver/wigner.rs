//! Unitary recovery on Hermitian matrices from images of rank-one projections.

use nalgebra::{DMatrix, DVector};

use super::{
    check_exponents, model_residual, unphase, verify_hypothesis_selfadjoint, BlackBoxMap, PreserverModel,
    RecoveryOptions, ROOT_SNAP_TOL, UNITARY_TOL, VALIDATION_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::decomp::hermitian_eigen;
use crate::linalg::{c64, outer, ComplexMatrix, C64};
use crate::random::{random_hermitian, rng_for};

const HERMITIAN_TOL: f64 = 1e-10;
const RANK_ONE_TOL: f64 = 1e-8;
/// Allowed defect in `|⟨y_x, y_x′⟩| = |⟨x, x′⟩|`.
const OVERLAP_TOL: f64 = 1e-7;

/// `ξ` and the unit vector `y` with `Φ(x x*) = ξ y y*`.
fn projection_image(phi: &BlackBoxMap, x: &DVector<C64>, m: u32) -> Result<(f64, DVector<C64>)> {
    let y = phi.apply(&outer(x, &x.conjugate())?)?;
    if !y.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::NotSelfAdjointImage);
    }
    let (vals, vecs) = hermitian_eigen(y.as_dmatrix());
    if vals.get(1).is_some_and(|v2| v2.abs() > RANK_ONE_TOL * vals[0].abs()) {
        return Err(Error::NotRankOnePreserving("image of a projection does not have rank one".into()));
    }
    let xi = vals[0];
    let snapped = xi.signum();
    if !((xi - snapped).abs() <= ROOT_SNAP_TOL) {
        return Err(Error::NotRankOnePreserving(format!("image of a unit projection has trace {xi}")));
    }
    if m % 2 == 1 && snapped < 0.0 {
        return Err(Error::NotRankOnePreserving(format!("sign -1 is not an m-th root of unity for m = {m}")));
    }
    Ok((snapped, vecs.column(0).into_owned()))
}

/// Recovers `ξ` and `U` with `Φ(A) = ξ U A U*` or `ξ U Aᵗ U*` on Hermitian `A`.
///
/// `U e_j` is fixed up to phase by `Φ(e_j e_j*)`; the phase relative to
/// `U e_1` comes from the image of the projection onto `(e_1 + e_j)/√2`, and
/// the image for `(e_1 + i e_j)/√2` separates the linear case from the
/// conjugate-linear one, which is reported as the transposed form.
pub fn recover_selfadjoint(phi: &BlackBoxMap, r: u32, s: u32, opts: &RecoveryOptions) -> Result<PreserverModel> {
    let m = check_exponents(r, s)?;
    let n = phi.dim();
    let basis = |j: usize| DVector::from_fn(n, |i, _| if i == j { c64(1.0, 0.0) } else { c64(0.0, 0.0) });
    let h = std::f64::consts::FRAC_1_SQRT_2;

    let mut xi = None;
    let mut sign = |value: f64| -> Result<()> {
        match xi {
            None => xi = Some(value),
            Some(v) if v != value => {
                return Err(Error::FrameInconsistent("projection images change sign".into()));
            }
            _ => {}
        }
        Ok(())
    };

    let mut columns: Vec<DVector<C64>> = Vec::with_capacity(n);
    let (x0, u1) = projection_image(phi, &basis(0), m)?;
    sign(x0)?;
    columns.push(u1.clone());
    let mut conjugate = None;
    for j in 1..n {
        let (xj, yj) = projection_image(phi, &basis(j), m)?;
        sign(xj)?;
        let (xw, w) = projection_image(phi, &((basis(0) + basis(j)) * c64(h, 0.0)), m)?;
        sign(xw)?;
        let a = u1.dotc(&w);
        let b = yj.dotc(&w);
        if !((a.norm() - h).abs() <= OVERLAP_TOL && (b.norm() - h).abs() <= OVERLAP_TOL) {
            return Err(Error::FrameInconsistent(format!("transition probabilities at e{j} do not match")));
        }
        let phase = (b / a) / (b / a).norm();
        let uj = yj * phase;

        let (xc, c) = projection_image(phi, &((basis(0) + basis(j) * c64(0.0, 1.0)) * c64(h, 0.0)), m)?;
        sign(xc)?;
        let linear = ((&u1 + &uj * c64(0.0, 1.0)) * c64(h, 0.0)).dotc(&c).norm();
        let anti = ((&u1 - &uj * c64(0.0, 1.0)) * c64(h, 0.0)).dotc(&c).norm();
        let this = if (linear - 1.0).abs() <= OVERLAP_TOL {
            false
        } else if (anti - 1.0).abs() <= OVERLAP_TOL {
            true
        } else {
            return Err(Error::FrameInconsistent(format!("complex probe at e{j} fits neither form")));
        };
        if conjugate.is_some_and(|c| c != this) {
            return Err(Error::FrameInconsistent("linear and conjugate-linear probes mixed".into()));
        }
        conjugate = Some(this);
        columns.push(uj);
    }
    let xi = xi.unwrap_or(1.0);
    let u = unphase(&ComplexMatrix::new(DMatrix::from_columns(&columns))?);
    let defect = (&(&u.adjoint() * &u) - &ComplexMatrix::identity(n)).frobenius_norm();
    if !(defect <= UNITARY_TOL) {
        return Err(Error::ValidationFailed { residual: defect });
    }
    let mut model = PreserverModel {
        lambda: c64(xi, 0.0),
        transform: u,
        transposed: conjugate.unwrap_or(false),
        unitary: true,
        m,
        residual: 0.0,
    };

    let mut rng = rng_for(opts.seed, 0x7769_676e);
    let probes: Vec<ComplexMatrix> = (0..opts.validation_probes.max(1)).map(|_| random_hermitian(&mut rng, n)).collect();
    for p in &probes {
        if !phi.apply(p)?.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::NotSelfAdjointImage);
        }
    }
    let report = verify_hypothesis_selfadjoint(phi, r, s, opts.hypothesis_trials, opts.seed, &opts.tol)?;
    if !report.holds() {
        return Err(Error::NotPreserver(format!(
            "{} of {} hypothesis probes fail",
            report.trials - report.passes,
            report.trials
        )));
    }
    let residual = model_residual(phi, &model, &probes)?.max(report.max_mismatch);
    if !(residual <= VALIDATION_TOL) {
        return Err(Error::ValidationFailed { residual });
    }
    model.residual = residual;
    Ok(model)
}
