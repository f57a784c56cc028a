//! Seeded fuzz campaigns, one per characterization, each checked against an
//! oracle that does not share code with the implementation under test.
//!
//! Trial `t` of a campaign with seed `s` draws everything from
//! `rng_for(s, t)`, so any failure replays with [`run_trial`].

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::idempotent::{
    find_orthogonality_witness, jordan_eig_class, moments, orthogonality_test, perturb_to_generic, EigClass,
    OrthogonalityMode, RankOneFunctional,
};
use crate::io::MatrixDocument;
use crate::jordan::two_slot_product;
use crate::linalg::decomp::singular_values;
use crate::linalg::{
    c64, distinct_nonzero_count, pairing, spectrum, spectrum_detail, ComplexMatrix, CVector, Spectrum,
    ToleranceConfig, C64,
};
use crate::preserver::{
    projective_distance, random_model, random_unitary_model, recover, recover_2x2, recover_selfadjoint,
    verify_hypothesis, verify_hypothesis_selfadjoint, BlackBoxMap, PreserverModel, RecoveryOptions,
};
use crate::random::{
    conditioned_matrix, gaussian_matrix, gaussian_vector, hermitian_of_rank, random_idempotent_pair, rng_for,
    signed_uniform, TrialRng,
};
use crate::reconstruction::{self, recover_matrix, SpectralOracle};
use crate::witness::{classify_rank_one, construct_witness_selfadjoint, rank_one_fuzz_negative, RankTwoForm, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Campaign {
    /// Rank one against witnesses, `r ≥ 1`.
    RankCharacterization,
    /// Rank one against witnesses, `r = 0`.
    JordanRankCharacterization,
    /// The `r = 0` witness-free classes.
    SquareZeroExceptions,
    /// Hidden-matrix recovery from idempotent product spectra.
    Reconstruction,
    /// Moment predicates for `AP + PA` against an eigensolver.
    IdempotentSpectra,
    /// Perturbation of an idempotent into the generic set.
    GenericDensity,
    /// Orthogonality of idempotents from Jordan data.
    Orthogonality,
    /// Self-adjoint witnesses.
    SelfAdjointRank,
    /// 2x2 vectorization recovery.
    TwoByTwoRecovery,
    /// Similarity and transpose-similarity recovery.
    SimilarityRecovery,
    /// Unitary recovery on Hermitian matrices.
    UnitaryRecovery,
}

impl Campaign {
    pub const ALL: [Campaign; 11] = [
        Campaign::RankCharacterization,
        Campaign::JordanRankCharacterization,
        Campaign::SquareZeroExceptions,
        Campaign::Reconstruction,
        Campaign::IdempotentSpectra,
        Campaign::GenericDensity,
        Campaign::Orthogonality,
        Campaign::SelfAdjointRank,
        Campaign::TwoByTwoRecovery,
        Campaign::SimilarityRecovery,
        Campaign::UnitaryRecovery,
    ];

    /// Exponent pairs cycled through when none are fixed.
    pub fn default_exponents(self) -> &'static [(u32, u32)] {
        match self {
            Campaign::RankCharacterization => &[(1, 2), (1, 3), (2, 3)],
            Campaign::JordanRankCharacterization | Campaign::SquareZeroExceptions => &[(0, 1), (0, 2), (0, 3)],
            Campaign::Reconstruction | Campaign::SelfAdjointRank => &[(0, 1), (0, 2), (1, 2), (2, 3)],
            Campaign::IdempotentSpectra | Campaign::GenericDensity | Campaign::Orthogonality => &[(0, 1)],
            Campaign::TwoByTwoRecovery | Campaign::SimilarityRecovery | Campaign::UnitaryRecovery => {
                &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]
            }
        }
    }

    fn min_dim(self) -> usize {
        match self {
            Campaign::RankCharacterization
            | Campaign::JordanRankCharacterization
            | Campaign::SquareZeroExceptions
            | Campaign::SelfAdjointRank => 3,
            Campaign::TwoByTwoRecovery => 2,
            Campaign::SimilarityRecovery | Campaign::UnitaryRecovery => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CampaignConfig {
    /// Matrix dimension; ignored by the 2x2 campaign.
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Fixed exponents; `None` cycles through the campaign defaults.
    pub exponents: Option<(u32, u32)>,
    /// Search budget handed to witness searches.
    pub budget: usize,
    pub tol: ToleranceConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self { n: 4, trials: 100, seed: 1, exponents: None, budget: 64, tol: ToleranceConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CampaignFailure {
    pub trial: usize,
    pub seed: u64,
    pub r: u32,
    pub s: u32,
    pub inputs: Vec<MatrixDocument>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Spectrum>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<Spectrum>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CampaignReport {
    pub campaign: Campaign,
    pub trials: usize,
    pub passes: usize,
    pub failures: Vec<CampaignFailure>,
    pub tolerance: ToleranceConfig,
    pub wall_time_ms: f64,
}

impl CampaignReport {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `cfg.trials` trials in parallel; the report lists failures in trial order.
pub fn run_campaign(campaign: Campaign, cfg: &CampaignConfig) -> Result<CampaignReport> {
    check_config(campaign, cfg)?;
    let start = Instant::now();
    let outcomes: Vec<Option<CampaignFailure>> =
        (0..cfg.trials).into_par_iter().map(|t| run_trial(campaign, cfg, t)).collect::<Result<_>>()?;
    let failures: Vec<CampaignFailure> = outcomes.into_iter().flatten().collect();
    Ok(CampaignReport {
        campaign,
        trials: cfg.trials,
        passes: cfg.trials - failures.len(),
        failures,
        tolerance: cfg.tol,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn check_config(campaign: Campaign, cfg: &CampaignConfig) -> Result<()> {
    cfg.tol.validate()?;
    let n = dimension(campaign, cfg);
    if n < campaign.min_dim() || n > 8 {
        return Err(Error::PreconditionViolated(format!(
            "dimension {n} outside {}..=8 for this campaign",
            campaign.min_dim()
        )));
    }
    if let Some((r, s)) = cfg.exponents {
        if r >= s || s > 16 {
            return Err(Error::BadExponents { r, s });
        }
        let zero_only = matches!(campaign, Campaign::JordanRankCharacterization | Campaign::SquareZeroExceptions);
        if (zero_only && r != 0) || (campaign == Campaign::RankCharacterization && r == 0) {
            return Err(Error::BadExponents { r, s });
        }
    }
    Ok(())
}

fn dimension(campaign: Campaign, cfg: &CampaignConfig) -> usize {
    if campaign == Campaign::TwoByTwoRecovery {
        2
    } else {
        cfg.n
    }
}

/// One trial, replayable from `(cfg.seed, trial)`. Library errors inside a
/// trial are reported as failures; only configuration errors propagate.
pub fn run_trial(campaign: Campaign, cfg: &CampaignConfig, trial: usize) -> Result<Option<CampaignFailure>> {
    check_config(campaign, cfg)?;
    let defaults = campaign.default_exponents();
    let (r, s) = cfg.exponents.unwrap_or(defaults[trial % defaults.len()]);
    let mut ctx = Trial {
        rng: rng_for(cfg.seed, trial as u64),
        n: dimension(campaign, cfg),
        r,
        s,
        trial,
        round: trial / if cfg.exponents.is_some() { 1 } else { defaults.len() },
        cfg,
        inputs: Vec::new(),
    };
    let outcome = match campaign {
        Campaign::RankCharacterization | Campaign::JordanRankCharacterization => ctx.rank_characterization(),
        Campaign::SquareZeroExceptions => ctx.square_zero_exceptions(),
        Campaign::Reconstruction => ctx.reconstruction(),
        Campaign::IdempotentSpectra => ctx.idempotent_spectra(),
        Campaign::GenericDensity => ctx.generic_density(),
        Campaign::Orthogonality => ctx.orthogonality(),
        Campaign::SelfAdjointRank => ctx.self_adjoint_rank(),
        Campaign::TwoByTwoRecovery => ctx.recovery(RecoveryKind::TwoByTwo),
        Campaign::SimilarityRecovery => ctx.recovery(RecoveryKind::Similarity),
        Campaign::UnitaryRecovery => ctx.recovery(RecoveryKind::Unitary),
    };
    let (expected, observed, detail) = match outcome {
        Ok(Check::Pass) => return Ok(None),
        Ok(Check::Fail { expected, observed, detail }) => (expected, observed, detail),
        Err(e) => (None, None, format!("error: {e}")),
    };
    Ok(Some(CampaignFailure { trial, seed: cfg.seed, r, s, inputs: ctx.inputs, expected, observed, detail }))
}

enum Check {
    Pass,
    Fail { expected: Option<Spectrum>, observed: Option<Spectrum>, detail: String },
}

impl Check {
    fn fail(detail: impl Into<String>) -> Self {
        Check::Fail { expected: None, observed: None, detail: detail.into() }
    }

    fn require(ok: bool, detail: impl FnOnce() -> String) -> Self {
        if ok {
            Check::Pass
        } else {
            Check::fail(detail())
        }
    }
}

#[derive(Clone, Copy)]
enum RecoveryKind {
    TwoByTwo,
    Similarity,
    Unitary,
}

struct Trial<'a> {
    rng: TrialRng,
    n: usize,
    r: u32,
    s: u32,
    trial: usize,
    /// Trial index with the exponent cycle divided out.
    round: usize,
    cfg: &'a CampaignConfig,
    inputs: Vec<MatrixDocument>,
}

impl Trial<'_> {
    fn record(&mut self, label: &str, m: &ComplexMatrix) {
        self.inputs.push(MatrixDocument::from(m).with_tag(label));
    }

    fn tol(&self) -> &ToleranceConfig {
        &self.cfg.tol
    }

    fn sub_seed(&self) -> u64 {
        self.cfg.seed ^ (self.trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }

    fn rank_characterization(&mut self) -> Result<Check> {
        let zero = self.r == 0;
        let pool: Vec<MatrixClass> = if zero {
            vec![
                MatrixClass::RankOne,
                MatrixClass::RankTwo(RankTwoForm::TwoNonzero),
                MatrixClass::RankTwo(RankTwoForm::OneNonzero),
                MatrixClass::RankTwo(RankTwoForm::Nilpotent),
                MatrixClass::RankThreePlus,
                MatrixClass::Scalar,
                MatrixClass::SquareZeroRankThree,
            ]
        } else {
            vec![
                MatrixClass::RankOne,
                MatrixClass::RankTwo(RankTwoForm::TwoNonzero),
                MatrixClass::RankTwo(RankTwoForm::OneNonzero),
                MatrixClass::RankTwo(RankTwoForm::Nilpotent),
                MatrixClass::RankTwo(RankTwoForm::SquareZero),
                MatrixClass::RankThreePlus,
            ]
        };
        let pool: Vec<MatrixClass> = pool.into_iter().filter(|c| c.min_dim() <= self.n).collect();
        let class = pool[self.round % pool.len()];
        let a = class.sample(&mut self.rng, self.n);
        self.record("a", &a);
        self.classify(&a)
    }

    fn classify(&mut self, a: &ComplexMatrix) -> Result<Check> {
        let expected = verdict_oracle(a, self.r);
        let verdict = classify_rank_one(a, self.r, self.s, self.cfg.budget, self.sub_seed(), self.tol())?;
        let got = match &verdict {
            Verdict::RankOne => VerdictKind::RankOne,
            Verdict::SquareZeroRank2 => VerdictKind::SquareZeroRank2,
            Verdict::NotRankOne(_) => VerdictKind::NotRankOne,
            Verdict::Inconclusive => return Ok(Check::fail(format!("inconclusive; oracle says {expected:?}"))),
        };
        if got != expected {
            return Ok(Check::fail(format!("classified {got:?}, oracle says {expected:?}")));
        }
        if let Verdict::NotRankOne(report) = verdict {
            self.record("witness", &report.witness);
            return check_witness(a, &report.witness, self.r, self.s, false, self.tol());
        }
        Ok(Check::Pass)
    }

    fn square_zero_exceptions(&mut self) -> Result<Check> {
        let class = match self.round % 3 {
            0 => MatrixClass::SquareZeroRankTwo,
            1 => MatrixClass::RankOne,
            _ if self.n >= MatrixClass::SquareZeroRankThree.min_dim() => MatrixClass::SquareZeroRankThree,
            _ => MatrixClass::RankTwo(RankTwoForm::OneNonzero),
        };
        let class = if class.min_dim() > self.n { MatrixClass::RankOne } else { class };
        let a = class.sample(&mut self.rng, self.n);
        self.record("a", &a);
        let check = self.classify(&a)?;
        if !matches!(check, Check::Pass) || verdict_oracle(&a, self.r) == VerdictKind::NotRankOne {
            return Ok(check);
        }
        let fuzz = rank_one_fuzz_negative(&a, self.r, self.s, self.cfg.budget, self.sub_seed(), self.tol())?;
        Ok(match fuzz.offending {
            None => Check::Pass,
            Some(f) => {
                self.record("b", &f.witness);
                Check::Fail {
                    expected: None,
                    observed: Some(f.spectrum),
                    detail: format!("trial {} of the negative fuzz found a witness", f.trial),
                }
            }
        })
    }

    fn reconstruction(&mut self) -> Result<Check> {
        let n = self.n;
        let a = match self.round % 4 {
            0 => gaussian_matrix(&mut self.rng, n),
            1 => MatrixClass::RankTwo(RankTwoForm::TwoNonzero).sample(&mut self.rng, n.max(3)),
            2 => square_zero_of_rank(&mut self.rng, n, (n / 2).max(1)),
            _ => hermitian_of_rank(&mut self.rng, n, n),
        };
        if a.dim() != n {
            // rank-two forms need three dimensions
            return Ok(Check::Pass);
        }
        self.record("a", &a);
        let oracle = SpectralOracle::from_matrix(a.clone(), self.r, self.s, *self.tol())?;
        let opts = reconstruction::RecoveryOptions { seed: self.sub_seed(), tol: *self.tol(), ..Default::default() };
        let got = recover_matrix(&oracle, &opts)?;
        let err = (&got - &a).frobenius_norm() / a.frobenius_norm();
        if !(err <= 1e-8) {
            self.record("recovered", &got);
            return Ok(Check::fail(format!("relative recovery error {err:e}")));
        }
        Ok(Check::Pass)
    }

    fn idempotent_spectra(&mut self) -> Result<Check> {
        let (a, p) = eig_class_pair(&mut self.rng, self.n, self.round % 4);
        self.record("a", &a);
        self.record("p", &p.matrix());
        let analysis = jordan_eig_class(&a, &p, self.tol())?;
        let pm = p.matrix();
        let product = &(&a * &pm) + &(&pm * &a);
        let detail = spectrum_detail(&product, self.tol())?;
        let scale = detail.scale;
        // class read off the computed eigenvalues and their multiplicities
        let nonzero: Vec<(C64, usize)> =
            detail.clusters.iter().copied().filter(|(v, _)| v.norm() > self.tol().zero * scale).collect();
        let direct = match nonzero.as_slice() {
            [(_, 2)] => EigClass::RepeatedNonzero,
            [(_, 1), (_, 1)] => EigClass::TwoDistinctNonzero,
            _ => EigClass::Other,
        };
        let observed = detail.to_spectrum();
        if direct != analysis.class {
            return Ok(Check::Fail {
                expected: None,
                observed: Some(observed),
                detail: format!("predicate class {:?}, eigensolver class {direct:?}", analysis.class),
            });
        }
        let trace_gap = (product.trace() - analysis.first_moment * 2.0).norm();
        if !(trace_gap <= 1e-12 * product.frobenius_norm().max(1.0)) {
            return Ok(Check::fail(format!("trace differs from 2<Ax,f> by {trace_gap:e}")));
        }
        if direct == EigClass::Other {
            return Ok(Check::Pass);
        }
        // the repeated root is ⟨Ax,f⟩; the root formula would add √(rounding noise)
        let predicted: Vec<C64> = if direct == EigClass::RepeatedNonzero {
            vec![analysis.first_moment]
        } else {
            analysis.roots.to_vec()
        };
        let radius = 1e-8 * scale;
        let matched = predicted.len() == nonzero.len()
            && predicted.iter().all(|z| nonzero.iter().any(|(v, _)| (v - z).norm() <= radius))
            && nonzero.iter().all(|(v, _)| predicted.iter().any(|z| (v - z).norm() <= radius));
        Ok(if matched {
            Check::Pass
        } else {
            Check::Fail {
                expected: Some(Spectrum { values: predicted, scale }),
                observed: Some(observed),
                detail: "predicted roots do not match the eigensolver".into(),
            }
        })
    }

    fn generic_density(&mut self) -> Result<Check> {
        const DELTA: f64 = 1e-3;
        let n = self.n;
        let (x, f) = random_idempotent_pair(&mut self.rng, n);
        let p = RankOneFunctional::idempotent(x.clone(), f.clone())?;
        let mut ops: Vec<ComplexMatrix> = (0..3).map(|_| gaussian_matrix(&mut self.rng, n)).collect();
        if self.trial % 2 == 1 {
            // first operator degenerate at P: ⟨A²x, f⟩ = 0
            ops[0] = degenerate_at(&mut self.rng, &x, &f);
        }
        for (i, a) in ops.iter().enumerate() {
            self.record(&format!("a{}", i + 1), a);
        }
        self.record("p", &p.matrix());
        let q = perturb_to_generic(&ops, &p, DELTA, self.tol())?;
        let dist = (&p.matrix() - &q.matrix()).frobenius_norm();
        if !(dist < DELTA) {
            return Ok(Check::fail(format!("perturbation moved {dist:e}")));
        }
        if (pairing(q.x(), q.f()) - 1.0).norm() > 1e-10 {
            return Ok(Check::fail("perturbed functional is not idempotent"));
        }
        for (i, a) in ops.iter().enumerate() {
            let (m1, m2) = moments(a, &q);
            let scale = a.frobenius_norm().powi(2) * q.x().norm() * q.f().norm();
            let margin = m2.norm().min((m2 - m1 * m1).norm()) / scale;
            if !(margin > 0.0) || jordan_eig_class(a, &q, self.tol())?.class != EigClass::TwoDistinctNonzero {
                return Ok(Check::fail(format!("operator {} not generic after perturbation (margin {margin:e})", i + 1)));
            }
        }
        Ok(Check::Pass)
    }

    fn orthogonality(&mut self) -> Result<Check> {
        let orthogonal = self.trial % 2 == 0;
        let (p, q) = idempotent_pair_with_zero_jordan(&mut self.rng, self.n, orthogonal)?;
        self.record("p", &p.matrix());
        self.record("q", &q.matrix());
        let seed = self.sub_seed();
        let direct = orthogonality_test(&p, &q, OrthogonalityMode::Direct, self.cfg.budget, seed, self.tol())?;
        let witness = orthogonality_test(&p, &q, OrthogonalityMode::Witness, self.cfg.budget, seed, self.tol())?;
        if direct != orthogonal || witness != orthogonal {
            return Ok(Check::fail(format!(
                "constructed orthogonal = {orthogonal}, direct = {direct}, witness = {witness}"
            )));
        }
        if !orthogonal && find_orthogonality_witness(&p, &q, 0, seed, self.tol()).is_none() {
            return Ok(Check::fail("no witness without search"));
        }
        Ok(Check::Pass)
    }

    fn self_adjoint_rank(&mut self) -> Result<Check> {
        let n = self.n;
        let kind = self.round % 4;
        let a = match kind {
            0 => hermitian_of_rank(&mut self.rng, n, 1),
            1 => hermitian_of_rank(&mut self.rng, n, 2),
            2 => {
                let k = self.rng.random_range(3..=n);
                hermitian_of_rank(&mut self.rng, n, k)
            }
            _ => ComplexMatrix::identity(n).scale(c64(signed_uniform(&mut self.rng, 0.5, 2.0), 0.0)),
        };
        self.record("a", &a);
        if kind == 0 {
            let fuzz = rank_one_fuzz_negative(&a, self.r, self.s, self.cfg.budget, self.sub_seed(), self.tol())?;
            return Ok(Check::require(fuzz.offending.is_none(), || "rank-one self-adjoint A has a witness".into()));
        }
        if self.r > 0 && kind == 3 {
            // scalar A is covered by the r = 0 construction only
            return Ok(Check::Pass);
        }
        let report = construct_witness_selfadjoint(&a, self.r, self.s, self.tol())?;
        self.record("witness", &report.witness);
        if !report.witness.is_hermitian(1e-10 * report.witness.frobenius_norm().max(1.0)) {
            return Ok(Check::fail("witness is not self-adjoint"));
        }
        check_witness(&a, &report.witness, self.r, self.s, true, self.tol())
    }

    fn recovery(&mut self, kind: RecoveryKind) -> Result<Check> {
        let (n, m) = (self.n, self.r + self.s + 1);
        let transposed = self.trial % 2 == 1;
        let truth = match kind {
            RecoveryKind::Unitary => random_unitary_model(&mut self.rng, n, m, transposed),
            _ => random_model(&mut self.rng, n, m, transposed, 1e3),
        };
        self.record("transform", &truth.transform);
        let phi = BlackBoxMap::from_model(&truth)?;
        let opts = RecoveryOptions { seed: self.sub_seed(), tol: *self.tol(), ..Default::default() };
        let got = match kind {
            RecoveryKind::TwoByTwo => {
                let ck = recover_2x2(&phi, self.r, self.s, &opts)?;
                let worst = table_agreement(&phi, &ck.table, &mut self.rng)?;
                if !(worst <= 1e-8) {
                    return Ok(Check::fail(format!("linear table disagrees with the map by {worst:e}")));
                }
                ck.model
            }
            RecoveryKind::Similarity => recover(&phi, self.r, self.s, &opts)?,
            RecoveryKind::Unitary => recover_selfadjoint(&phi, self.r, self.s, &opts)?,
        };
        if let Some(problem) = model_mismatch(&truth, &got) {
            return Ok(Check::fail(problem));
        }
        let seed = self.sub_seed() ^ 0x5eed;
        let report = match kind {
            RecoveryKind::Unitary => verify_hypothesis_selfadjoint(&phi, self.r, self.s, 100, seed, self.tol())?,
            _ => verify_hypothesis(&phi, self.r, self.s, 100, seed, self.tol())?,
        };
        Ok(match report.counterexample() {
            None => Check::Pass,
            Some(ce) => {
                self.inputs.push(MatrixDocument::from(&ce.a).with_tag("probe_a"));
                self.inputs.push(MatrixDocument::from(&ce.b).with_tag("probe_b"));
                Check::Fail {
                    expected: Some(ce.expected.clone()),
                    observed: Some(ce.observed.clone()),
                    detail: format!("{} of 100 validation probes mismatch", report.trials - report.passes),
                }
            }
        })
    }
}

/// Differences between a generated model and its recovery, if any.
pub fn model_mismatch(truth: &PreserverModel, got: &PreserverModel) -> Option<String> {
    if got.lambda != truth.lambda {
        return Some(format!("scalar {} recovered as {}", truth.lambda, got.lambda));
    }
    if got.transposed != truth.transposed {
        return Some(format!("transposed = {} recovered as {}", truth.transposed, got.transposed));
    }
    let d = projective_distance(&got.transform, &truth.transform);
    if !(d <= 1e-6) {
        return Some(format!("projective distance {d:e}"));
    }
    if !(got.residual <= 1e-6) {
        return Some(format!("residual {:e}", got.residual));
    }
    None
}

fn table_agreement(
    phi: &BlackBoxMap,
    table: &crate::preserver::LinearMapTable,
    rng: &mut TrialRng,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = gaussian_matrix(rng, 2);
        let (want, have) = (phi.apply(&x)?, table.apply(&x));
        worst = worst.max((&want - &have).frobenius_norm() / want.frobenius_norm().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// The witness is genuine: rank ≤ 3 and at least three distinct nonzero
/// eigenvalues in the product, both recomputed here.
fn check_witness(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    r: u32,
    s: u32,
    hermitian_product: bool,
    tol: &ToleranceConfig,
) -> Result<Check> {
    let product = two_slot_product(a, b, r, s)?;
    let sp = spectrum(&product, tol)?;
    let count = distinct_nonzero_count(&sp, tol);
    let sv = singular_values(b.as_dmatrix());
    let b_rank = sv.iter().filter(|&&x| x > 1e-9 * sv[0]).count();
    if b_rank > 3 || count < 3 {
        return Ok(Check::Fail {
            expected: None,
            observed: Some(sp),
            detail: format!("witness rank {b_rank}, {count} distinct nonzero eigenvalues"),
        });
    }
    if hermitian_product && sp.values.iter().any(|v| v.im.abs() > 1e-8 * sp.scale) {
        return Ok(Check::fail("self-adjoint product has non-real eigenvalues"));
    }
    Ok(Check::Pass)
}

/// Verdict classes as decided by the oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    RankOne,
    NotRankOne,
    SquareZeroRank2,
}

/// Verdict from the singular values of `A` and the norm of `A²` alone.
pub fn verdict_oracle(a: &ComplexMatrix, r: u32) -> VerdictKind {
    let sv = singular_values(a.as_dmatrix());
    let k = sv.iter().filter(|&&x| x > 1e-9 * sv[0]).count();
    let square = (a * a).frobenius_norm();
    let square_zero = square <= 1e-9 * a.frobenius_norm().powi(2);
    match k {
        1 => VerdictKind::RankOne,
        2 if r == 0 && square_zero => VerdictKind::SquareZeroRank2,
        _ => VerdictKind::NotRankOne,
    }
}

/// Matrix classes used by the characterization campaigns, each placed in a
/// random frame with condition number at most 10.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixClass {
    RankOne,
    RankTwo(RankTwoForm),
    RankThreePlus,
    SquareZeroRankTwo,
    SquareZeroRankThree,
    Scalar,
}

impl MatrixClass {
    pub fn min_dim(self) -> usize {
        match self {
            MatrixClass::RankTwo(RankTwoForm::SquareZero) | MatrixClass::SquareZeroRankTwo => 4,
            MatrixClass::SquareZeroRankThree => 6,
            _ => 3,
        }
    }

    /// A random member of the class in dimension `n ≥ min_dim()`.
    pub fn sample(self, rng: &mut impl Rng, n: usize) -> ComplexMatrix {
        assert!(n >= self.min_dim(), "{self:?} needs dimension {}", self.min_dim());
        let mut block = DMatrix::<C64>::zeros(n, n);
        match self {
            MatrixClass::RankOne => {
                let x = gaussian_vector(rng, n);
                let f = gaussian_vector(rng, n);
                return crate::linalg::outer(&x, &f).expect("gaussian vectors are nonzero");
            }
            MatrixClass::RankTwo(RankTwoForm::TwoNonzero) => {
                block[(0, 0)] = nonzero_scalar(rng);
                block[(0, 2)] = crate::random::complex_normal(rng);
                block[(2, 2)] = nonzero_scalar(rng);
            }
            MatrixClass::RankTwo(RankTwoForm::OneNonzero) => {
                block[(0, 0)] = nonzero_scalar(rng);
                block[(1, 2)] = c64(1.0, 0.0);
            }
            MatrixClass::RankTwo(RankTwoForm::Nilpotent) => {
                block[(0, 1)] = c64(1.0, 0.0);
                block[(1, 2)] = c64(1.0, 0.0);
            }
            MatrixClass::RankTwo(RankTwoForm::SquareZero) | MatrixClass::SquareZeroRankTwo => {
                block[(0, 2)] = c64(1.0, 0.0);
                block[(1, 3)] = c64(1.0, 0.0);
            }
            MatrixClass::SquareZeroRankThree => {
                for i in 0..3 {
                    block[(3 + i, i)] = c64(1.0, 0.0);
                }
            }
            MatrixClass::RankThreePlus => {
                let k = rng.random_range(3..=n);
                return crate::random::matrix_of_rank(rng, n, k);
            }
            MatrixClass::Scalar => {
                let z = nonzero_scalar(rng);
                return ComplexMatrix::identity(n).scale(z);
            }
        }
        in_random_frame(rng, &ComplexMatrix::wrap(block))
    }
}

/// Random phase, modulus in `[0.5, 2]`.
fn nonzero_scalar(rng: &mut impl Rng) -> C64 {
    let z = crate::random::complex_normal(rng);
    z / z.norm() * (0.5 + 1.5 * rng.random::<f64>())
}

fn in_random_frame(rng: &mut impl Rng, block: &ComplexMatrix) -> ComplexMatrix {
    let w = conditioned_matrix(rng, block.dim(), 10.0);
    let w_inv = w.inverse().expect("conditioned matrices are invertible");
    &(&w * block) * &w_inv
}

/// Square-zero matrix of rank `k ≤ n/2` in a random frame.
fn square_zero_of_rank(rng: &mut impl Rng, n: usize, k: usize) -> ComplexMatrix {
    let mut block = DMatrix::<C64>::zeros(n, n);
    for i in 0..k.min(n / 2) {
        block[(i, n / 2 + i)] = c64(1.0, 0.0);
    }
    in_random_frame(rng, &ComplexMatrix::wrap(block))
}

/// `(A, P)` for the moment-predicate campaign. Kinds: generic; a repeated
/// nonzero eigenvalue (`⟨A²x,f⟩ = 0 ≠ ⟨Ax,f⟩`); `⟨A²x,f⟩ = ⟨Ax,f⟩² ≠ 0`;
/// both moments zero. The special kinds are built at `x = f = e₁` and moved
/// by a random similarity.
fn eig_class_pair(rng: &mut impl Rng, n: usize, kind: usize) -> (ComplexMatrix, RankOneFunctional) {
    if kind == 0 {
        let (x, f) = random_idempotent_pair(rng, n);
        return (gaussian_matrix(rng, n), RankOneFunctional::idempotent(x, f).expect("pairing is one"));
    }
    let mut a = gaussian_matrix(rng, n).into_dmatrix();
    match kind {
        1 => {
            // λ² + Σ a₁ₖ aₖ₁ = 0 on the first entry of A²
            let lambda = nonzero_scalar(rng);
            a[(0, 0)] = lambda;
            let rest: C64 = (2..n).map(|k| a[(0, k)] * a[(k, 0)]).sum();
            a[(0, 1)] = c64(1.0, 0.0);
            a[(1, 0)] = -(lambda * lambda + rest);
        }
        2 => {
            // μ on e₁, e₁ invariant for A and Aᵗ
            let mu = nonzero_scalar(rng);
            for k in 1..n {
                a[(0, k)] = c64(0.0, 0.0);
                a[(k, 0)] = c64(0.0, 0.0);
            }
            a[(0, 0)] = mu;
        }
        _ => {
            for k in 0..n {
                a[(0, k)] = c64(0.0, 0.0);
            }
        }
    }
    let w = conditioned_matrix(rng, n, 10.0);
    let w_inv = w.inverse().expect("conditioned matrices are invertible");
    let a = &(&w * &ComplexMatrix::wrap(a)) * &w_inv;
    // P = W e₁ ⊗ (W⁻ᵀ e₁)
    let x = w.as_dmatrix().column(0).into_owned();
    let f = w_inv.as_dmatrix().row(0).transpose();
    (a, RankOneFunctional::idempotent(x, f).expect("pairing is one"))
}

/// An operator with `⟨A²x, f⟩ = 0`, `A² ≠ 0` and `A` not scalar.
fn degenerate_at(rng: &mut impl Rng, x: &CVector, f: &CVector) -> ComplexMatrix {
    let n = x.len();
    loop {
        let a = gaussian_matrix(rng, n);
        // A + t u vᵗ with u = x, vᵗ chosen so the quadratic in t is solvable
        let ax = a.mul_vec(x);
        let (m1, m2) = (pairing(&ax, f), pairing(&a.mul_vec(&ax), f));
        // with B = A + t x fᵗ: ⟨B²x,f⟩ = m2 + 2 t m1 + t² (⟨x,f⟩ = 1)
        let disc = (m1 * m1 - m2).sqrt();
        let t = if (-m1 + disc).norm() <= (-m1 - disc).norm() { -m1 + disc } else { -m1 - disc };
        let b = &a + &crate::linalg::outer(x, f).expect("nonzero").scale(t);
        let bx = b.mul_vec(x);
        if pairing(&b.mul_vec(&bx), f).norm() <= 1e-12 * b.frobenius_norm().powi(2) && (&b * &b).frobenius_norm() > 1e-3 {
            return b;
        }
    }
}

/// Idempotents with `σ(PQ + QP) = {0}`: `⟨y,f⟩ = 0` always, and `⟨x,g⟩ = 0`
/// exactly when `orthogonal`.
fn idempotent_pair_with_zero_jordan(
    rng: &mut impl Rng,
    n: usize,
    orthogonal: bool,
) -> Result<(RankOneFunctional, RankOneFunctional)> {
    let (x, f) = random_idempotent_pair(rng, n);
    // y with ⟨y, f⟩ = 0
    let y0 = gaussian_vector(rng, n);
    let y = &y0 - &x * pairing(&y0, &f);
    let g0 = gaussian_vector(rng, n);
    let g = if orthogonal {
        // ⟨x, g⟩ = 0 and ⟨y, g⟩ = 1: solve in the span of conj(x), conj(y)
        let (xb, yb) = (x.map(|z| z.conj()), y.map(|z| z.conj()));
        let m = nalgebra::Matrix2::new(pairing(&x, &xb), pairing(&x, &yb), pairing(&y, &xb), pairing(&y, &yb));
        let rhs = nalgebra::Vector2::new(-pairing(&x, &g0), c64(1.0, 0.0) - pairing(&y, &g0));
        let sol = m.try_inverse().ok_or(Error::Singular)? * rhs;
        g0 + xb * sol[0] + yb * sol[1]
    } else {
        let scale = pairing(&y, &g0);
        g0 / scale
    };
    Ok((RankOneFunctional::idempotent(x, f)?, RankOneFunctional::idempotent(y, g)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, trials: usize) -> CampaignConfig {
        CampaignConfig { n, trials, seed: 11, ..Default::default() }
    }

    #[test]
    fn every_campaign_passes_a_short_run() {
        for campaign in Campaign::ALL {
            let n = if campaign == Campaign::SquareZeroExceptions { 6 } else { 4 };
            let report = run_campaign(campaign, &cfg(n, 24)).unwrap();
            assert!(report.all_passed(), "{campaign:?}: {:#?}", report.failures);
            assert_eq!(report.passes, 24);
        }
    }

    #[test]
    fn trials_replay_and_reports_are_deterministic() {
        let c = cfg(5, 12);
        let mut a = run_campaign(Campaign::IdempotentSpectra, &c).unwrap();
        let mut b = run_campaign(Campaign::IdempotentSpectra, &c).unwrap();
        a.wall_time_ms = 0.0;
        b.wall_time_ms = 0.0;
        assert_eq!(a, b);
        assert_eq!(run_trial(Campaign::IdempotentSpectra, &c, 3).unwrap(), None);
    }

    #[test]
    fn failures_carry_inputs() {
        // a zero tolerance window breaks the moment classification on purpose
        let mut c = cfg(4, 8);
        c.tol = ToleranceConfig::new(0.5, 0.9, 1e-9, 1e-7).unwrap();
        let report = run_campaign(Campaign::IdempotentSpectra, &c).unwrap();
        assert!(!report.all_passed());
        let first = &report.failures[0];
        assert_eq!(first.inputs.len(), 2);
        let replay = run_trial(Campaign::IdempotentSpectra, &c, first.trial).unwrap();
        assert_eq!(replay.as_ref(), Some(first));
    }

    #[test]
    fn oracle_classes() {
        let mut rng = rng_for(12, 0);
        assert_eq!(verdict_oracle(&MatrixClass::RankOne.sample(&mut rng, 4), 0), VerdictKind::RankOne);
        let sz = MatrixClass::SquareZeroRankTwo.sample(&mut rng, 5);
        assert_eq!(verdict_oracle(&sz, 0), VerdictKind::SquareZeroRank2);
        assert_eq!(verdict_oracle(&sz, 1), VerdictKind::NotRankOne);
        assert_eq!(verdict_oracle(&MatrixClass::Scalar.sample(&mut rng, 3), 0), VerdictKind::NotRankOne);
    }

    #[test]
    fn bad_configuration_is_rejected() {
        let mut c = cfg(9, 1);
        assert!(run_campaign(Campaign::Reconstruction, &c).is_err());
        c.n = 4;
        c.exponents = Some((1, 2));
        assert!(run_campaign(Campaign::SquareZeroExceptions, &c).is_err());
        c.exponents = Some((2, 2));
        assert!(run_campaign(Campaign::Reconstruction, &c).is_err());
    }
}
