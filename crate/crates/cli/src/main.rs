//! `jordan-spectra` command-line front end.
//!
//! Every command writes line-delimited JSON: a versioned header record, then
//! result records. Exit status 0 means every check passed, 1 means a
//! mathematical counterexample or failed check, 2 means a usage or input error.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use jordan_spectra::campaign::{model_mismatch, run_campaign, Campaign, CampaignConfig};
use jordan_spectra::io::{parse_matrix, MatrixDocument};
use jordan_spectra::jordan::{general_product, ProductSignature};
use jordan_spectra::linalg::{spectrum, ComplexMatrix, Spectrum, ToleranceConfig};
use jordan_spectra::preserver::{
    projective_distance, recover, recover_selfadjoint, verify_hypothesis, verify_hypothesis_selfadjoint,
    MapDocument, PreserverModel, RecoveryOptions,
};
use jordan_spectra::reconstruction::{self, recover_matrix, SpectralOracle};
use jordan_spectra::witness::{classify_rank_one, construct_witness, construct_witness_selfadjoint, Verdict};
use jordan_spectra::Error;

const FORMAT: &str = "jordan-spectra-report";
const VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "jordan-spectra", version, about = "Spectra of generalized Jordan products and preserver recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
struct TolArgs {
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_zero: f64,
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol_distinct: f64,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_rank: f64,
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol_match: f64,
}

#[derive(Args)]
struct Exponents {
    #[arg(long)]
    r: u32,
    #[arg(long)]
    s: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue representatives of a matrix.
    Spectrum {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// `T_{i1}...T_{im} + T_{im}...T_{i1}`; one `--in` per distinct index.
    Product {
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        signature: String,
    },
    /// Decide rank one from product spectra.
    ClassifyRank {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        exp: Exponents,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        budget: usize,
    },
    /// Explicit witness construction.
    Witness {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        exp: Exponents,
        /// Use the self-adjoint construction.
        #[arg(long)]
        selfadjoint: bool,
    },
    /// Seeded fuzz campaign.
    Fuzz {
        #[arg(long)]
        lemma: String,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        budget: usize,
        #[arg(long, requires = "s")]
        r: Option<u32>,
        #[arg(long, requires = "r")]
        s: Option<u32>,
    },
    /// Recover a matrix from the spectra of its products with idempotents.
    Reconstruct {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        exp: Exponents,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4096)]
        budget: usize,
    },
    /// Recover the canonical form of a map document.
    Recover {
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        exp: Exponents,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        budget: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// The map acts on Hermitian matrices.
        #[arg(long)]
        selfadjoint: bool,
    },
    /// Check the spectral hypothesis for a map document.
    Verify {
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        exp: Exponents,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        selfadjoint: bool,
    },
}

/// Accepted `--lemma` ids.
fn parse_lemma(id: &str) -> Option<Campaign> {
    Some(match id {
        "2.3" => Campaign::RankCharacterization,
        "2.4" => Campaign::JordanRankCharacterization,
        "2.5" => Campaign::SquareZeroExceptions,
        "2.6" => Campaign::Reconstruction,
        "2.8" => Campaign::IdempotentSpectra,
        "2.9" => Campaign::GenericDensity,
        "2.10" => Campaign::Orthogonality,
        "3.4" => Campaign::SelfAdjointRank,
        "ck" => Campaign::TwoByTwoRecovery,
        "thm2.2" => Campaign::SimilarityRecovery,
        "thm3.1" => Campaign::UnitaryRecovery,
        _ => return None,
    })
}

/// Outcome of a command: records to print and whether every check passed.
struct Outcome {
    records: Vec<Value>,
    passed: bool,
}

impl Outcome {
    fn new(passed: bool, records: Vec<Value>) -> Self {
        Self { records, passed }
    }
}

/// An input or usage problem (exit 2) as opposed to a failed check (exit 1).
#[derive(Debug)]
struct UsageError(anyhow::Error);

fn usage(e: impl Into<anyhow::Error>) -> UsageError {
    UsageError(e.into())
}

fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::Schema { .. }
            | Error::NotSquare { .. }
            | Error::DimensionOutOfRange(_)
            | Error::NonFinite { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidTolerance(_)
            | Error::InvalidSignature(_)
            | Error::BadExponents { .. }
            | Error::PreconditionViolated(_)
    )
}

/// Library errors split into usage errors and failed-check records.
fn classify_error(e: Error) -> Result<Outcome, UsageError> {
    if is_usage(&e) {
        return Err(usage(e));
    }
    Ok(Outcome::new(false, vec![json!({ "record": "error", "error": error_name(&e), "message": e.to_string() })]))
}

fn error_name(e: &Error) -> String {
    let debug = format!("{e:?}");
    debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
}

fn read_matrix(path: &PathBuf) -> Result<ComplexMatrix, UsageError> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
    parse_matrix(&text).with_context(|| format!("parsing {}", path.display())).map_err(usage)
}

fn read_map(path: &PathBuf) -> Result<MapDocument, UsageError> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(usage)
}

fn doc(m: &ComplexMatrix) -> Value {
    serde_json::to_value(MatrixDocument::from(m)).expect("documents serialize")
}

fn spectrum_value(s: &Spectrum) -> Value {
    serde_json::to_value(s).expect("spectra serialize")
}

fn model_value(model: &PreserverModel) -> Value {
    let mut v = serde_json::to_value(MapDocument::from_model(model)).expect("models serialize");
    v["m"] = json!(model.m);
    v["residual"] = json!(model.residual);
    v
}

fn run(cli: &Cli, tol: &ToleranceConfig) -> Result<Outcome, UsageError> {
    match &cli.command {
        Command::Spectrum { input } => {
            let a = read_matrix(input)?;
            match spectrum(&a, tol) {
                Ok(sp) => Ok(Outcome::new(true, vec![json!({ "record": "spectrum", "spectrum": spectrum_value(&sp) })])),
                Err(e) => classify_error(e),
            }
        }
        Command::Product { inputs, signature } => {
            let sig: ProductSignature = signature.parse().map_err(usage)?;
            let ops = inputs.iter().map(read_matrix).collect::<Result<Vec<_>, _>>()?;
            let product = general_product(&sig, &ops).map_err(usage)?;
            match spectrum(&product, tol) {
                Ok(sp) => Ok(Outcome::new(
                    true,
                    vec![json!({
                        "record": "product",
                        "signature": sig.seq(),
                        "r": sig.r(),
                        "s": sig.s(),
                        "product": doc(&product),
                        "spectrum": spectrum_value(&sp),
                    })],
                )),
                Err(e) => classify_error(e),
            }
        }
        Command::ClassifyRank { input, exp, seed, budget } => {
            let a = read_matrix(input)?;
            let verdict = match classify_rank_one(&a, exp.r, exp.s, *budget, *seed, tol) {
                Ok(v) => v,
                Err(e) => return classify_error(e),
            };
            let (name, passed, report) = match &verdict {
                Verdict::RankOne => ("RankOne", true, Value::Null),
                Verdict::SquareZeroRank2 => ("SquareZeroRank2", true, Value::Null),
                Verdict::NotRankOne(rep) => ("NotRankOne", true, witness_value(rep)),
                Verdict::Inconclusive => ("Inconclusive", false, Value::Null),
            };
            Ok(Outcome::new(passed, vec![json!({ "record": "verdict", "verdict": name, "witness": report })]))
        }
        Command::Witness { input, exp, selfadjoint } => {
            let a = read_matrix(input)?;
            let built = if *selfadjoint {
                construct_witness_selfadjoint(&a, exp.r, exp.s, tol)
            } else {
                construct_witness(&a, exp.r, exp.s, tol)
            };
            match built {
                Ok(rep) => {
                    let passed = rep.distinct_nonzero_count >= 3;
                    Ok(Outcome::new(passed, vec![json!({ "record": "witness", "witness": witness_value(&rep) })]))
                }
                Err(e) => classify_error(e),
            }
        }
        Command::Fuzz { lemma, n, trials, seed, budget, r, s } => {
            let campaign = parse_lemma(lemma).ok_or_else(|| usage(anyhow::anyhow!("unknown lemma id {lemma:?}")))?;
            let cfg = CampaignConfig {
                n: *n,
                trials: *trials,
                seed: *seed,
                exponents: r.zip(*s),
                budget: *budget,
                tol: *tol,
            };
            let report = run_campaign(campaign, &cfg).map_err(usage)?;
            let mut records: Vec<Value> = report
                .failures
                .iter()
                .map(|f| {
                    let mut v = serde_json::to_value(f).expect("failures serialize");
                    v["record"] = json!("failure");
                    v
                })
                .collect();
            records.push(json!({
                "record": "summary",
                "lemma": lemma,
                "campaign": report.campaign,
                "trials": report.trials,
                "passes": report.passes,
                "failures": report.failures.len(),
                "tolerance": report.tolerance,
                "wall_time_ms": report.wall_time_ms,
            }));
            Ok(Outcome::new(report.all_passed(), records))
        }
        Command::Reconstruct { input, exp, seed, budget } => {
            let a = read_matrix(input)?;
            let oracle = SpectralOracle::from_matrix(a.clone(), exp.r, exp.s, *tol).map_err(usage)?;
            let opts = reconstruction::RecoveryOptions { budget: *budget, seed: *seed, tol: *tol };
            match recover_matrix(&oracle, &opts) {
                Ok(got) => {
                    let norm = a.frobenius_norm();
                    let err = if norm == 0.0 { got.frobenius_norm() } else { (&got - &a).frobenius_norm() / norm };
                    Ok(Outcome::new(
                        err <= 1e-8,
                        vec![json!({
                            "record": "reconstruction",
                            "recovered": doc(&got),
                            "relative_error": err,
                            "queries": oracle.queries(),
                        })],
                    ))
                }
                Err(e) => classify_error(e),
            }
        }
        Command::Recover { map, exp, seed, budget, trials, selfadjoint } => {
            let document = read_map(map)?;
            let phi = document.to_map().map_err(usage)?;
            let opts = RecoveryOptions {
                seed: *seed,
                budget: *budget,
                hypothesis_trials: *trials,
                tol: *tol,
                ..Default::default()
            };
            let got = if *selfadjoint {
                recover_selfadjoint(&phi, exp.r, exp.s, &opts)
            } else {
                recover(&phi, exp.r, exp.s, &opts)
            };
            let model = match got {
                Ok(m) => m,
                Err(e) => return classify_error(e),
            };
            let mut record = json!({ "record": "model", "model": model_value(&model), "queries": phi.calls() });
            let mut passed = true;
            if let MapDocument::Generator { lambda, transform, transposed, unitary } = &document {
                let truth = PreserverModel {
                    lambda: jordan_spectra::linalg::c64(lambda[0], lambda[1]),
                    transform: transform.to_matrix().map_err(usage)?,
                    transposed: *transposed,
                    unitary: *unitary,
                    m: model.m,
                    residual: 0.0,
                };
                let mismatch = model_mismatch(&truth, &model);
                record["generator_match"] = json!(mismatch.is_none());
                record["projective_distance"] = json!(projective_distance(&model.transform, &truth.transform));
                if let Some(problem) = mismatch {
                    record["mismatch"] = json!(problem);
                    passed = false;
                }
            }
            Ok(Outcome::new(passed, vec![record]))
        }
        Command::Verify { map, exp, trials, seed, selfadjoint } => {
            let phi = read_map(map)?.to_map().map_err(usage)?;
            let report = if *selfadjoint {
                verify_hypothesis_selfadjoint(&phi, exp.r, exp.s, *trials, *seed, tol)
            } else {
                verify_hypothesis(&phi, exp.r, exp.s, *trials, *seed, tol)
            };
            let report = match report {
                Ok(r) => r,
                Err(e) => return classify_error(e),
            };
            let mut records = Vec::new();
            if let Some(ce) = report.counterexample() {
                records.push(json!({
                    "record": "counterexample",
                    "trial": ce.trial,
                    "seed": seed,
                    "a": doc(&ce.a),
                    "b": doc(&ce.b),
                    "expected": spectrum_value(&ce.expected),
                    "observed": spectrum_value(&ce.observed),
                }));
            }
            records.push(json!({
                "record": "summary",
                "trials": report.trials,
                "passes": report.passes,
                "max_mismatch": report.max_mismatch,
            }));
            Ok(Outcome::new(report.holds(), records))
        }
    }
}

fn witness_value(rep: &jordan_spectra::witness::WitnessReport) -> Value {
    json!({
        "witness": doc(&rep.witness),
        "product": doc(&rep.product),
        "spectrum": spectrum_value(&rep.spectrum),
        "distinct_nonzero_count": rep.distinct_nonzero_count,
        "construction": rep.construction,
    })
}

fn header(cli: &Cli, tol: &ToleranceConfig) -> Value {
    let command = match &cli.command {
        Command::Spectrum { .. } => "spectrum",
        Command::Product { .. } => "product",
        Command::ClassifyRank { .. } => "classify-rank",
        Command::Witness { .. } => "witness",
        Command::Fuzz { .. } => "fuzz",
        Command::Reconstruct { .. } => "reconstruct",
        Command::Recover { .. } => "recover",
        Command::Verify { .. } => "verify",
    };
    let mut h = json!({ "record": "header", "format": FORMAT, "version": VERSION, "command": command, "tolerance": tol });
    match &cli.command {
        Command::Fuzz { lemma, n, trials, seed, budget, r, s } => {
            h["lemma"] = json!(lemma);
            h["n"] = json!(n);
            h["trials"] = json!(trials);
            h["seed"] = json!(seed);
            h["budget"] = json!(budget);
            h["r"] = json!(r);
            h["s"] = json!(s);
        }
        Command::ClassifyRank { exp, seed, .. }
        | Command::Reconstruct { exp, seed, .. }
        | Command::Recover { exp, seed, .. }
        | Command::Verify { exp, seed, .. } => {
            h["r"] = json!(exp.r);
            h["s"] = json!(exp.s);
            h["seed"] = json!(seed);
        }
        Command::Witness { exp, .. } => {
            h["r"] = json!(exp.r);
            h["s"] = json!(exp.s);
        }
        _ => {}
    }
    h
}

fn emit(out: &Option<PathBuf>, lines: &[Value]) -> io::Result<()> {
    let mut text = String::new();
    for line in lines {
        text.push_str(&serde_json::to_string(line).expect("records serialize"));
        text.push('\n');
    }
    match out {
        Some(path) => fs::write(path, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let t = &cli.tol;
    let tol = match ToleranceConfig::new(t.tol_zero, t.tol_distinct, t.tol_rank, t.tol_match) {
        Ok(tol) => tol,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match run(&cli, &tol) {
        Ok(o) => o,
        Err(UsageError(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let mut lines = vec![header(&cli, &tol)];
    lines.extend(outcome.records);
    if let Err(e) = emit(&cli.out, &lines) {
        eprintln!("error: writing report: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(if outcome.passed { 0 } else { 1 })
}
