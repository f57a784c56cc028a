//! Rank-one idempotents `x ⊗ f` and the Jordan product `AP + PA`.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, outer, pairing, rank, spectrum, CVector, ComplexMatrix, ToleranceConfig, C64};
use crate::random::{gaussian_vector, random_idempotent_pair, rng_for};

/// Pairing tolerance for the idempotent flag.
pub const IDEMPOTENT_TOL: f64 = 1e-10;

/// The rank-one operator `x ⊗ f : y ↦ ⟨y, f⟩ x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "FunctionalDocument", try_from = "FunctionalDocument")]
pub struct RankOneFunctional {
    x: CVector,
    f: CVector,
    pairing: C64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FunctionalDocument {
    x: Vec<C64>,
    f: Vec<C64>,
}

impl From<RankOneFunctional> for FunctionalDocument {
    fn from(p: RankOneFunctional) -> Self {
        Self { x: p.x.iter().copied().collect(), f: p.f.iter().copied().collect() }
    }
}

impl TryFrom<FunctionalDocument> for RankOneFunctional {
    type Error = Error;
    fn try_from(d: FunctionalDocument) -> Result<Self> {
        Self::new(DVector::from_vec(d.x), DVector::from_vec(d.f))
    }
}

impl RankOneFunctional {
    pub fn new(x: CVector, f: CVector) -> Result<Self> {
        // validates dimensions and nonzero factors
        outer(&x, &f)?;
        let pairing = pairing(&x, &f);
        Ok(Self { x, f, pairing })
    }

    /// `x ⊗ f / ⟨x, f⟩`; fails when the pairing vanishes.
    pub fn idempotent(x: CVector, f: CVector) -> Result<Self> {
        let p = pairing(&x, &f);
        if p.norm() <= 1e-12 * x.norm() * f.norm() {
            return Err(Error::NotIdempotent(format!("{p}")));
        }
        Self::new(x, f / p)
    }

    /// `eᵢ ⊗ eⱼᵀ` style probes from coordinate vectors.
    pub fn basis(n: usize, x: &[(usize, C64)], f: &[(usize, C64)]) -> Result<Self> {
        let mut xv = CVector::zeros(n);
        let mut fv = CVector::zeros(n);
        for &(i, z) in x {
            xv[i] += z;
        }
        for &(i, z) in f {
            fv[i] += z;
        }
        Self::new(xv, fv)
    }

    pub fn random(rng: &mut impl Rng, n: usize) -> Self {
        let (x, f) = random_idempotent_pair(rng, n);
        Self::new(x, f).expect("random factors are nonzero")
    }

    pub fn x(&self) -> &CVector {
        &self.x
    }

    pub fn f(&self) -> &CVector {
        &self.f
    }

    pub fn pairing(&self) -> C64 {
        self.pairing
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_idempotent(&self) -> bool {
        (self.pairing - 1.0).norm() <= IDEMPOTENT_TOL
    }

    pub fn matrix(&self) -> ComplexMatrix {
        outer(&self.x, &self.f).expect("factors validated at construction")
    }

    /// `u = Ax − λx` and `g = Aᵀf − λf` with `λ = ⟨Ax, f⟩`.
    pub fn residuals(&self, a: &ComplexMatrix) -> (CVector, CVector) {
        let lambda = pairing(&a.mul_vec(&self.x), &self.f);
        let u = a.mul_vec(&self.x) - &self.x * lambda;
        let g = a.transpose().mul_vec(&self.f) - &self.f * lambda;
        (u, g)
    }

    fn require_idempotent(&self) -> Result<()> {
        if self.is_idempotent() {
            Ok(())
        } else {
            Err(Error::NotIdempotent(format!("{}", self.pairing)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigClass {
    RepeatedNonzero,
    TwoDistinctNonzero,
    Other,
}

/// Classification of `AP + PA` with the two roots of
/// `t² − 2⟨Ax,f⟩t − (⟨A²x,f⟩ − ⟨Ax,f⟩²)`, which are `⟨Ax,f⟩ ± √⟨A²x,f⟩`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigAnalysis {
    pub class: EigClass,
    pub first_moment: C64,
    pub second_moment: C64,
    pub roots: [C64; 2],
}

/// `(⟨Ax, f⟩, ⟨A²x, f⟩)`.
pub fn moments(a: &ComplexMatrix, p: &RankOneFunctional) -> (C64, C64) {
    let ax = a.mul_vec(&p.x);
    let a2x = a.mul_vec(&ax);
    (pairing(&ax, &p.f), pairing(&a2x, &p.f))
}

/// Scale used to decide whether a moment is zero: `‖A‖ᵏ ‖x‖ ‖f‖`.
fn moment_scale(a: &ComplexMatrix, p: &RankOneFunctional, power: i32) -> f64 {
    a.frobenius_norm().powi(power) * p.x.norm() * p.f.norm()
}

pub fn jordan_eig_class(a: &ComplexMatrix, p: &RankOneFunctional, tol: &ToleranceConfig) -> Result<EigAnalysis> {
    p.require_idempotent()?;
    if a.dim() != p.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: p.dim() });
    }
    let (m1, m2) = moments(a, p);
    let s1 = moment_scale(a, p, 1);
    let s2 = moment_scale(a, p, 2);
    let m1_nonzero = m1.norm() > tol.zero * s1;
    let m2_nonzero = m2.norm() > tol.zero * s2;
    let split = (m2 - m1 * m1).norm() > tol.zero * s2;
    let class = if m2_nonzero && split {
        EigClass::TwoDistinctNonzero
    } else if m1_nonzero && !m2_nonzero {
        EigClass::RepeatedNonzero
    } else {
        EigClass::Other
    };
    let root = m2.sqrt();
    Ok(EigAnalysis { class, first_moment: m1, second_moment: m2, roots: [m1 + root, m1 - root] })
}

/// Smallest ratio `predicate / scale` over both genericity predicates.
fn generic_margin(a: &ComplexMatrix, p: &RankOneFunctional) -> f64 {
    let (m1, m2) = moments(a, p);
    let s = moment_scale(a, p, 2);
    m2.norm().min((m2 - m1 * m1).norm()) / s
}

fn distance(p: &RankOneFunctional, q: &RankOneFunctional) -> f64 {
    (&p.matrix() - &q.matrix()).frobenius_norm()
}

/// `x ⊗ f` direction choices for one perturbation step.
enum Step {
    Covector(CVector),
    Vector(CVector),
    Both(CVector, CVector),
}

impl Step {
    fn apply(&self, p: &RankOneFunctional, eps: f64) -> Option<RankOneFunctional> {
        let e = c64(eps, 0.0);
        let (x, f) = match self {
            Step::Covector(h) => (p.x.clone(), &p.f + h * e),
            Step::Vector(u) => (&p.x + u * e, p.f.clone()),
            Step::Both(u, h) => (&p.x + u * e, &p.f + h * e),
        };
        RankOneFunctional::idempotent(x, f).ok()
    }

}

fn conj(v: &CVector) -> CVector {
    v.map(|z| z.conj())
}

fn unit_orthogonal_to(x: &CVector, seed: u64) -> CVector {
    let mut rng = rng_for(seed, 0);
    loop {
        let g = gaussian_vector(&mut rng, x.len());
        let w = &g - x * (x.dotc(&g) / x.norm_squared());
        if w.norm() > 1e-3 * g.norm() {
            return w.normalize();
        }
    }
}

/// Direction choices for a degenerate `P` with respect to `A`, in the
/// order the case analysis prescribes, each scaled to `‖P‖`.
fn proof_steps(a: &ComplexMatrix, p: &RankOneFunctional, tol: &ToleranceConfig) -> Vec<Step> {
    let (_, m2) = moments(a, p);
    let s2 = moment_scale(a, p, 2);
    let a2 = a * a;
    let xn = p.x.norm();
    let fnorm = p.f.norm();
    let mut steps = Vec::new();
    if m2.norm() <= tol.distinct * s2 {
        let a2x = a2.mul_vec(&p.x);
        let a2tf = a2.transpose().mul_vec(&p.f);
        if a2x.norm() > tol.zero * a2.frobenius_norm() * xn {
            steps.push(Step::Covector(conj(&a2x).normalize() * c64(fnorm, 0.0)));
        }
        if a2tf.norm() > tol.zero * a2.frobenius_norm() * fnorm {
            steps.push(Step::Vector(conj(&a2tf).normalize() * c64(xn, 0.0)));
        }
        let d = crate::linalg::decomp::svd(a2.as_dmatrix());
        let u = d.v.column(0).into_owned() * c64(xn, 0.0);
        let h = conj(&d.u.column(0).into_owned()) * c64(fnorm, 0.0);
        steps.push(Step::Both(u, h));
    } else {
        // ⟨A²x,f⟩ = ⟨Ax,f⟩² ≠ 0: move x along u independent of x with ⟨Au,f⟩ ≠ 0
        let atf = conj(&a.transpose().mul_vec(&p.f));
        let u = &atf - &p.x * (p.x.dotc(&atf) / p.x.norm_squared());
        let u = if u.norm() > 1e-3 * atf.norm() {
            u.normalize()
        } else {
            (&p.x.normalize() + unit_orthogonal_to(&p.x, 7)).normalize()
        };
        steps.push(Step::Vector(u * c64(xn, 0.0)));
    }
    // generic fallbacks if the prescribed direction is degenerate to first order
    for k in 0..4u64 {
        let mut rng = rng_for(0x7065_7274, k);
        let u = gaussian_vector(&mut rng, p.dim()).normalize() * c64(xn, 0.0);
        let h = gaussian_vector(&mut rng, p.dim()).normalize() * c64(fnorm, 0.0);
        steps.push(Step::Vector(u.clone()));
        steps.push(Step::Covector(h.clone()));
        // eigenvector x of A and eigencovector f of Aᵀ need both factors moved
        steps.push(Step::Both(u, h));
    }
    steps
}

/// Number of halvings in the `ε` scan.
const EPS_STEPS: i32 = 60;
/// Accepted margins stay this many zero thresholds clear of zero.
const MARGIN_FLOOR: f64 = 10.0;

/// Perturbs `P` into an idempotent within `delta` at which every `AᵢQ + QAᵢ`
/// has two distinct nonzero eigenvalues. An already generic `P` is returned
/// unchanged.
pub fn perturb_to_generic(
    ops: &[ComplexMatrix],
    p: &RankOneFunctional,
    delta: f64,
    tol: &ToleranceConfig,
) -> Result<RankOneFunctional> {
    p.require_idempotent()?;
    if ops.is_empty() || ops.len() > 3 {
        return Err(Error::PreconditionViolated(format!("expected 1 to 3 operators, got {}", ops.len())));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::PreconditionViolated("delta must be positive".into()));
    }
    for (i, a) in ops.iter().enumerate() {
        if a.dim() != p.dim() {
            return Err(Error::DimensionMismatch { expected: p.dim(), found: a.dim() });
        }
        let norm = a.frobenius_norm();
        if (a * a).frobenius_norm() <= tol.zero * norm * norm {
            return Err(Error::PreconditionViolated(format!("operator {i} squares to zero")));
        }
        let mean = a.trace() / a.dim() as f64;
        if (a - &ComplexMatrix::identity(a.dim()).scale(mean)).frobenius_norm() <= tol.zero * norm {
            return Err(Error::PreconditionViolated(format!("operator {i} is scalar; no idempotent is generic for it")));
        }
    }
    let mut q = p.clone();
    for i in 0..ops.len() {
        if generic_margin(&ops[i], &q) > tol.distinct {
            continue;
        }
        // unspent budget is shared by the operators still to be moved
        let pending = ops[i..].iter().filter(|a| generic_margin(a, &q) <= tol.distinct).count();
        let budget = (delta - distance(p, &q)) / pending as f64;
        let held: Vec<f64> = ops[..i].iter().map(|a| generic_margin(a, &q)).collect();
        let mut next = None;
        'steps: for step in proof_steps(&ops[i], &q, tol) {
            for k in 1..=EPS_STEPS {
                let eps = budget * 0.5f64.powi(k);
                let Some(cand) = step.apply(&q, eps) else { continue };
                if distance(&q, &cand) >= budget {
                    continue;
                }
                // below the zero threshold the predicates are rounding noise
                if generic_margin(&ops[i], &cand) < MARGIN_FLOOR * tol.zero {
                    continue;
                }
                if ops[..i].iter().zip(&held).all(|(a, &h)| generic_margin(a, &cand) >= 0.5 * h) {
                    next = Some(cand);
                    break 'steps;
                }
            }
        }
        q = next.ok_or_else(|| Error::DegenerateInput(format!("no generic perturbation for operator {i}")))?;
    }
    Ok(q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrthogonalityMode {
    Direct,
    Witness,
}

/// Whether `(PR + RP) / 2` is a rank-one idempotent at tolerance.
fn half_jordan_is_rank_one_idempotent(p: &ComplexMatrix, r: &ComplexMatrix, tol: &ToleranceConfig) -> bool {
    let j = (p * r + r * p).scale(c64(0.5, 0.0));
    rank(&j, tol) == 1 && (j.trace() - 1.0).norm() <= tol.distinct * j.frobenius_norm().max(1.0)
}

/// Decides `PQ = QP = 0` for idempotents with `σ(PQ + QP) = {0}`, either
/// directly or by looking for `R` that makes both half Jordan products
/// rank-one idempotents.
pub fn orthogonality_test(
    p: &RankOneFunctional,
    q: &RankOneFunctional,
    mode: OrthogonalityMode,
    budget: usize,
    seed: u64,
    tol: &ToleranceConfig,
) -> Result<bool> {
    p.require_idempotent()?;
    q.require_idempotent()?;
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), found: q.dim() });
    }
    let (pm, qm) = (p.matrix(), q.matrix());
    let jordan = &pm * &qm + &qm * &pm;
    if !spectrum(&jordan, tol)?.is_zero() {
        return Err(Error::HypothesisViolated("σ(PQ + QP) ≠ {0}".into()));
    }
    let scale = pm.frobenius_norm() * qm.frobenius_norm();
    match mode {
        OrthogonalityMode::Direct => {
            Ok((&pm * &qm).frobenius_norm() <= tol.zero * scale && (&qm * &pm).frobenius_norm() <= tol.zero * scale)
        }
        OrthogonalityMode::Witness => Ok(find_orthogonality_witness(p, q, budget, seed, tol).is_none()),
    }
}

/// An `R ∈ I₁` with `(PR + RP)/2` and `(QR + RQ)/2` both in `I₁`.
pub fn find_orthogonality_witness(
    p: &RankOneFunctional,
    q: &RankOneFunctional,
    budget: usize,
    seed: u64,
    tol: &ToleranceConfig,
) -> Option<RankOneFunctional> {
    let (pm, qm) = (p.matrix(), q.matrix());
    let works = |r: &RankOneFunctional| {
        let rm = r.matrix();
        half_jordan_is_rank_one_idempotent(&pm, &rm, tol) && half_jordan_is_rank_one_idempotent(&qm, &rm, tol)
    };
    // PQ = ⟨y,f⟩ x⊗g and QP = ⟨x,g⟩ y⊗f
    let scale = p.x.norm() * p.f.norm() * q.x.norm() * q.f.norm();
    let yf = pairing(&q.x, &p.f);
    let xg = pairing(&p.x, &q.f);
    let mut proof = Vec::new();
    if yf.norm() * p.x.norm() * q.f.norm() > tol.zero * scale {
        proof.push(RankOneFunctional::idempotent(q.x.clone(), p.f.clone()));
    }
    if xg.norm() * q.x.norm() * p.f.norm() > tol.zero * scale {
        proof.push(RankOneFunctional::idempotent(p.x.clone(), q.f.clone()));
    }
    if let Some(r) = proof.into_iter().flatten().find(|r| works(r)) {
        return Some(r);
    }
    (0..budget).map(|t| RankOneFunctional::random(&mut rng_for(seed, t as u64), p.dim())).find(|r| works(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectrum;
    use crate::random::gaussian_matrix;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn e(n: usize, i: usize) -> CVector {
        let mut v = CVector::zeros(n);
        v[i] = c64(1.0, 0.0);
        v
    }

    #[test]
    fn identity_is_other() {
        let p = RankOneFunctional::random(&mut rng_for(1, 0), 4);
        let eig = jordan_eig_class(&ComplexMatrix::identity(4), &p, &tol()).unwrap();
        assert_eq!(eig.class, EigClass::Other);
        let sp = spectrum(&p.matrix().scale(c64(2.0, 0.0)), &tol()).unwrap();
        assert_eq!(sp.nonzero().len(), 1);
    }

    #[test]
    fn repeated_eigenvalue_case() {
        // Ax = λx + u with ⟨A²x, f⟩ = 0: A = [[λ, -λ], [λ, -λ]] ⊕ [1], x = f = e1
        let lam = 1.5;
        let a = ComplexMatrix::from_real_rows(&[&[lam, -lam, 0.0], &[lam, -lam, 0.0], &[0.0, 0.0, 1.0]]);
        let p = RankOneFunctional::new(e(3, 0), e(3, 0)).unwrap();
        let eig = jordan_eig_class(&a, &p, &tol()).unwrap();
        assert_eq!(eig.class, EigClass::RepeatedNonzero);
        assert!((eig.roots[0] - lam).norm() < 1e-12 && (eig.roots[1] - lam).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_idempotent() {
        let p = RankOneFunctional::new(e(3, 0), e(3, 0) * c64(2.0, 0.0)).unwrap();
        assert!(matches!(jordan_eig_class(&ComplexMatrix::identity(3), &p, &tol()), Err(Error::NotIdempotent(_))));
    }

    #[test]
    fn generic_p_is_unchanged() {
        let a = gaussian_matrix(&mut rng_for(2, 0), 4);
        let p = RankOneFunctional::random(&mut rng_for(2, 1), 4);
        assert!(generic_margin(&a, &p) > tol().distinct);
        assert_eq!(perturb_to_generic(&[a], &p, 1e-3, &tol()).unwrap(), p);
    }

    #[test]
    fn shift_is_made_generic() {
        // A e2 = e1, A e3 = e2: A² = e1 ⊗ e3, so ⟨A² e1, e1⟩ = 0 with A² ≠ 0
        let a = ComplexMatrix::from_real_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]);
        let p = RankOneFunctional::new(e(3, 0), e(3, 0)).unwrap();
        let q = perturb_to_generic(std::slice::from_ref(&a), &p, 1e-3, &tol()).unwrap();
        assert!(distance(&p, &q) < 1e-3);
        assert!(q.is_idempotent());
        assert_eq!(jordan_eig_class(&a, &q, &tol()).unwrap().class, EigClass::TwoDistinctNonzero);
    }

    #[test]
    fn each_degenerate_branch_recovers() {
        let t = tol();
        // ⟨A²x,f⟩ = ⟨Ax,f⟩² ≠ 0
        let a = ComplexMatrix::diag_real(&[2.0, 1.0, 3.0]);
        let p = RankOneFunctional::new(e(3, 0), e(3, 0)).unwrap();
        // A²x = 0 but A²ᵀf ≠ 0
        let b = ComplexMatrix::from_real_rows(&[&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let bb = &b * &ComplexMatrix::diag_real(&[0.0, 1.0, 1.0]);
        // A²x = 0 and A²ᵀf = 0
        let c = ComplexMatrix::from_real_rows(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
        for op in [a, bb, c] {
            let q = perturb_to_generic(std::slice::from_ref(&op), &p, 1e-2, &t).unwrap();
            assert!(distance(&p, &q) < 1e-2);
            assert_eq!(jordan_eig_class(&op, &q, &t).unwrap().class, EigClass::TwoDistinctNonzero);
        }
    }

    #[test]
    fn square_zero_operator_is_rejected() {
        let a = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let p = RankOneFunctional::new(e(2, 0), e(2, 0)).unwrap();
        assert!(matches!(perturb_to_generic(&[a], &p, 1e-3, &tol()), Err(Error::PreconditionViolated(_))));
        let p3 = RankOneFunctional::new(e(3, 0), e(3, 0)).unwrap();
        let scalar = ComplexMatrix::identity(3).scale(c64(2.0, 0.0));
        assert!(matches!(perturb_to_generic(&[scalar], &p3, 1e-3, &tol()), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn orthogonality_examples() {
        let t = tol();
        let p = RankOneFunctional::new(e(3, 0), e(3, 0)).unwrap();
        let q = RankOneFunctional::new(e(3, 1), e(3, 1)).unwrap();
        for mode in [OrthogonalityMode::Direct, OrthogonalityMode::Witness] {
            assert!(orthogonality_test(&p, &q, mode, 200, 1, &t).unwrap());
        }
        let q2 = RankOneFunctional::new(e(3, 0) + e(3, 1), e(3, 1)).unwrap();
        for mode in [OrthogonalityMode::Direct, OrthogonalityMode::Witness] {
            assert!(!orthogonality_test(&p, &q2, mode, 200, 1, &t).unwrap());
        }
        let r = find_orthogonality_witness(&p, &q2, 0, 1, &t).unwrap();
        let expected = outer(&(e(3, 0) + e(3, 1)), &e(3, 0)).unwrap();
        assert!((&r.matrix() - &expected).frobenius_norm() < 1e-12);
        let bad = RankOneFunctional::new(e(3, 0) + e(3, 1), e(3, 0)).unwrap();
        assert!(matches!(
            orthogonality_test(&p, &bad, OrthogonalityMode::Direct, 0, 1, &t),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn residuals_are_annihilated() {
        let a = gaussian_matrix(&mut rng_for(3, 0), 5);
        let p = RankOneFunctional::random(&mut rng_for(3, 1), 5);
        let (u, g) = p.residuals(&a);
        assert!(pairing(&u, p.f()).norm() < 1e-12 * u.norm() * p.f().norm() * 10.0);
        assert!(pairing(p.x(), &g).norm() < 1e-12 * g.norm() * p.x().norm() * 10.0);
    }

    #[test]
    fn serde_round_trip() {
        let p = RankOneFunctional::random(&mut rng_for(4, 0), 3);
        let s = serde_json::to_string(&p).unwrap();
        let back: RankOneFunctional = serde_json::from_str(&s).unwrap();
        assert_eq!(back.x(), p.x());
    }
}
