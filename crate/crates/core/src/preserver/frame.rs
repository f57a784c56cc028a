//! Frame recovery on `M_n`: images of the idempotents `e_i ⊗ e_i` fix the
//! columns of `T` up to scalars, images of `(e_i + e_j) ⊗ e_i` fix the
//! scalars.

use nalgebra::{DMatrix, DVector};

use super::{
    check_exponents, model_residual, normalize_transform, snap_to_root, unit, verify_hypothesis, BlackBoxMap,
    PreserverModel, RecoveryOptions, MAX_CONDITION, ROOT_SNAP_TOL, VALIDATION_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::decomp::{least_squares, svd};
use crate::linalg::{c64, ComplexMatrix, C64};
use crate::random::{gaussian_matrix, rng_for};

/// Second singular value allowed in a rank-one image, relative to the first.
const RANK_ONE_TOL: f64 = 1e-8;
/// Relative residual allowed when a frame vector is expanded in two columns.
const SPAN_TOL: f64 = 1e-7;
/// Smallest accepted relative weight of a column in a frame expansion.
const WEIGHT_TOL: f64 = 1e-6;

/// Probe `(e_i + e_j) ⊗ e_i = E_ii + E_ji`; `i == j` gives `E_ii`.
fn probe(n: usize, i: usize, j: usize) -> ComplexMatrix {
    if i == j {
        unit(n, i, i)
    } else {
        unit(n, i, i) + unit(n, j, i)
    }
}

/// Image of a rank-one idempotent: its trace `μ` and the range vector.
struct Image {
    mu: C64,
    range: DVector<C64>,
}

fn analyse(y: &ComplexMatrix, m: u32, label: &str) -> Result<Image> {
    let d = svd(y.as_dmatrix());
    if !(d.sigma[0] > 0.0) || d.sigma.get(1).is_some_and(|&s2| s2 > RANK_ONE_TOL * d.sigma[0]) {
        return Err(Error::NotRankOnePreserving(format!("image of {label} does not have rank one")));
    }
    let mu = y.trace();
    if !((mu.powu(m) - c64(1.0, 0.0)).norm() <= ROOT_SNAP_TOL) {
        return Err(Error::NotRankOnePreserving(format!("image of {label} has trace {mu}, not an m-th root of unity")));
    }
    let q = y.scale(mu.inv());
    let defect = (&(&q * &q) - &q).frobenius_norm();
    if !(defect <= RANK_ONE_TOL * q.frobenius_norm().powi(2).max(1.0)) {
        return Err(Error::NotRankOnePreserving(format!("image of {label} is not a multiple of an idempotent")));
    }
    Ok(Image { mu, range: d.u.column(0).into_owned() })
}

/// Recovers `λ`, the branch and `T` from black-box queries on `M_n`.
///
/// The hypothesis is checked first and its failure is a hard error. Both
/// branches are attempted (the transposed one runs the same frame procedure
/// on `X -> Φ(Xᵗ)`); a branch is kept only if it validates, and when both
/// fail the smallest residual is reported.
pub fn recover_full(phi: &BlackBoxMap, r: u32, s: u32, opts: &RecoveryOptions) -> Result<PreserverModel> {
    let m = check_exponents(r, s)?;
    let n = phi.dim();
    let report = verify_hypothesis(phi, r, s, opts.hypothesis_trials, opts.seed, &opts.tol)?;
    if !report.holds() {
        let trial = report.counterexample().map_or(0, |c| c.trial);
        return Err(Error::NotPreserver(format!(
            "{} of {} hypothesis probes fail (first at trial {trial}, mismatch {:e})",
            report.trials - report.passes,
            report.trials,
            report.max_mismatch
        )));
    }

    // every probe image must be μ times a rank-one idempotent with a common μ
    let mut images = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            images.push(analyse(&phi.apply(&probe(n, i, j))?, m, &format!("(e{i}+e{j})⊗e{i}"))?);
            if i != j {
                let transposed = probe(n, i, j).transpose();
                images.push(analyse(&phi.apply(&transposed)?, m, &format!("e{i}⊗(e{i}+e{j})"))?);
            }
        }
    }
    let lambda = snap_to_root(images[0].mu, m)?;
    if let Some(img) = images.iter().find(|img| (img.mu - lambda).norm() > ROOT_SNAP_TOL) {
        return Err(Error::FrameInconsistent(format!("idempotent images scale by {} and {}", lambda, img.mu)));
    }

    let mut rng = rng_for(opts.seed, 0x6672_616d);
    let validation: Vec<ComplexMatrix> = (0..opts.validation_probes.max(1)).map(|_| gaussian_matrix(&mut rng, n)).collect();
    if n == 1 {
        let model = PreserverModel {
            lambda,
            transform: ComplexMatrix::identity(1),
            transposed: false,
            unitary: false,
            m,
            residual: 0.0,
        };
        return accept(phi, model, &validation, report.max_mismatch);
    }

    let mut best: Option<Error> = None;
    let mut accepted: Vec<PreserverModel> = Vec::new();
    for transposed in [false, true] {
        let branch = if transposed { phi.composed_with_transpose() } else { phi.clone() };
        let attempt = frame_transform(&branch, n, m).and_then(|t| {
            let model = PreserverModel { lambda, transform: t, transposed, unitary: false, m, residual: 0.0 };
            accept(phi, model, &validation, report.max_mismatch)
        });
        match attempt {
            Ok(model) => accepted.push(model),
            Err(e) => best = Some(prefer(best, e)),
        }
    }
    accepted
        .into_iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .ok_or_else(|| best.unwrap_or(Error::ValidationFailed { residual: f64::INFINITY }))
}

/// Keeps the more informative of two branch failures: a validation residual
/// beats a frame error, and the smaller residual wins.
fn prefer(current: Option<Error>, next: Error) -> Error {
    match (current, next) {
        (None, e) => e,
        (Some(Error::ValidationFailed { residual: a }), Error::ValidationFailed { residual: b }) => {
            Error::ValidationFailed { residual: a.min(b) }
        }
        (Some(e @ Error::ValidationFailed { .. }), _) => e,
        (Some(_), e @ Error::ValidationFailed { .. }) => e,
        (Some(e), _) => e,
    }
}

fn accept(
    phi: &BlackBoxMap,
    mut model: PreserverModel,
    validation: &[ComplexMatrix],
    spectral_mismatch: f64,
) -> Result<PreserverModel> {
    let residual = model_residual(phi, &model, validation)?.max(spectral_mismatch);
    if !(residual <= VALIDATION_TOL) {
        return Err(Error::ValidationFailed { residual });
    }
    if !(model.transform.condition_number() < MAX_CONDITION) {
        return Err(Error::SingularFrame);
    }
    model.residual = residual;
    Ok(model)
}

/// `T` for a map assumed to be `λ T X T⁻¹`: column `i` spans the range of
/// `Φ(E_ii)`, and the range of `Φ(E_ii + E_ji)` is `c_i t_i + c_j t_j`.
fn frame_transform(phi: &BlackBoxMap, n: usize, m: u32) -> Result<ComplexMatrix> {
    let range = |i: usize, j: usize| -> Result<DVector<C64>> {
        Ok(analyse(&phi.apply(&probe(n, i, j))?, m, "frame probe")?.range)
    };
    let columns: Vec<DVector<C64>> = (0..n).map(|i| range(i, i)).collect::<Result<_>>()?;
    let mut scalars = vec![c64(1.0, 0.0); n];
    for j in 1..n {
        let (alpha, beta) = expand(&range(0, j)?, &columns[0], &columns[j])?;
        scalars[j] = beta / alpha;
    }
    for i in 1..n {
        for j in (0..n).filter(|&j| j != i) {
            let (alpha, beta) = expand(&range(i, j)?, &columns[i], &columns[j])?;
            let predicted = scalars[j] / scalars[i];
            let observed = beta / alpha;
            if !((observed - predicted).norm() <= SPAN_TOL * predicted.norm().max(1.0)) {
                return Err(Error::FrameInconsistent(format!(
                    "pair ({i}, {j}): relative scalar {observed} against {predicted}"
                )));
            }
        }
    }
    let t = DMatrix::from_fn(n, n, |a, i| columns[i][a] * scalars[i]);
    Ok(normalize_transform(&ComplexMatrix::new(t)?))
}

/// Coefficients of `w = α u + β v`, rejecting poor fits and vanishing weights.
fn expand(w: &DVector<C64>, u: &DVector<C64>, v: &DVector<C64>) -> Result<(C64, C64)> {
    let basis = DMatrix::from_columns(&[u.clone(), v.clone()]);
    let (x, rank) = least_squares(&basis, w, 1e-10);
    if rank < 2 {
        return Err(Error::FrameInconsistent("frame columns are parallel".into()));
    }
    let fit = (&basis * &x - w).norm() / w.norm();
    let (alpha, beta) = (x[0], x[1]);
    let weight = alpha.norm().min(beta.norm()) / alpha.norm().max(beta.norm());
    if !(fit <= SPAN_TOL) || !(weight >= WEIGHT_TOL) {
        return Err(Error::FrameInconsistent(format!("frame vector outside the expected span (fit {fit:e})")));
    }
    Ok((alpha, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preserver::{projective_distance, random_model};

    fn opts() -> RecoveryOptions {
        RecoveryOptions::default()
    }

    #[test]
    fn identity_on_m3() {
        let model = recover_full(&BlackBoxMap::identity(3), 0, 2, &opts()).unwrap();
        assert_eq!(model.lambda, c64(1.0, 0.0));
        assert!(!model.transposed);
        assert!(projective_distance(&model.transform, &ComplexMatrix::identity(3)) < 1e-10);
    }

    #[test]
    fn scalar_i_with_m_four() {
        let mut rng = rng_for(21, 0);
        let mut model = random_model(&mut rng, 5, 4, false, 1e3);
        model.lambda = c64(0.0, 1.0);
        let phi = BlackBoxMap::from_model(&model).unwrap();
        let got = recover_full(&phi, 1, 2, &opts()).unwrap();
        assert_eq!(got.lambda, c64(0.0, 1.0));
        assert!(!got.transposed);
        assert!(projective_distance(&got.transform, &model.transform) < 1e-6);
        assert!(got.residual < 1e-6);
    }

    #[test]
    fn transposed_branch() {
        let mut rng = rng_for(22, 0);
        let model = random_model(&mut rng, 4, 3, true, 1e2);
        let phi = BlackBoxMap::from_model(&model).unwrap();
        let got = recover_full(&phi, 0, 2, &opts()).unwrap();
        assert!(got.transposed);
        assert!((got.lambda - model.lambda).norm() < 1e-15);
        assert!(projective_distance(&got.transform, &model.transform) < 1e-6);
    }

    #[test]
    fn one_dimensional_map() {
        let phi = BlackBoxMap::new(1, |x| x.scale(c64(-1.0, 0.0)));
        let got = recover_full(&phi, 0, 1, &opts()).unwrap();
        assert_eq!(got.lambda, c64(-1.0, 0.0));
        // -1 is not a cube root of unity
        assert!(matches!(recover_full(&phi, 0, 2, &opts()), Err(Error::NotPreserver(_))));
    }

    #[test]
    fn non_preservers_are_rejected() {
        let e11 = unit(3, 0, 0);
        for phi in [
            BlackBoxMap::new(3, |x| x.scale(c64(2.0, 0.0))),
            BlackBoxMap::new(3, move |x| x + &e11),
        ] {
            assert!(matches!(recover_full(&phi, 0, 2, &opts()), Err(Error::NotPreserver(_))));
        }
    }
}
