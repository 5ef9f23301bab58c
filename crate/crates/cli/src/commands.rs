use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use rnchain::compiled::{
    branch_count, compiled_score, decrypted_correlation, eps_ns_audit, run_protocol, transcripts_to_jsonl,
    ProverProgram, Scheme,
};
use rnchain::dilation::{stinespring_minimal, verify_dilation};
use rnchain::games::{classical_value, eval_commuting, seesaw_quantum_value, Correlation, Game, TensorStrategy};
use rnchain::radon_nikodym::{chain_k, rn_derivative, Stage};
use rnchain::sequential::{convert, convert_generalized, eval_sequential, SequentialStrategy};
use rnchain::{CpMap, Tolerance};

use crate::io::{load, relative_to, to_json, write, CliResult, Failure};

/// Settings shared by every command.
pub struct Context {
    pub tol: Tolerance,
    pub seed: u64,
    pub cap: Option<u128>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Classical,
    Seesaw,
}

pub fn value(
    ctx: &Context,
    game: &Path,
    mode: Mode,
    dims: &[usize],
    restarts: usize,
    witness: Option<&Path>,
) -> CliResult<Value> {
    let g: Game = load(game)?;
    match mode {
        Mode::Classical => {
            let cap = ctx.cap.unwrap_or(rnchain::games::DEFAULT_ENUMERATION_CAP);
            let cv = classical_value(&g, cap)?;
            if let Some(path) = witness {
                write(path, &to_json(&cv.assignment))?;
            }
            Ok(json!({
                "mode": "classical",
                "value": cv.value,
                "assignment": cv.assignment,
                "witness": witness,
            }))
        }
        Mode::Seesaw => {
            let dims = if dims.is_empty() {
                vec![2; g.players()]
            } else {
                dims.to_vec()
            };
            let out = seesaw_quantum_value(&g, &dims, restarts, ctx.seed)?;
            if let Some(path) = witness {
                write(path, &to_json::<TensorStrategy>(&out.strategy))?;
            }
            Ok(json!({
                "mode": "seesaw",
                "value": out.value,
                "dims": dims,
                "restarts": restarts,
                "seed": ctx.seed,
                "sweeps": out.history.len() - 1,
                "best_restart": out.restart,
                "witness": witness,
            }))
        }
    }
}

pub fn dilate(ctx: &Context, map: &Path) -> CliResult<Value> {
    let t: CpMap = load(map)?;
    let d = stinespring_minimal(&t, &ctx.tol)?;
    let report = verify_dilation(&d, &ctx.tol);
    Ok(json!({
        "dilation_dim": d.dil_dim,
        "dilation": d,
        "report": report,
        "max_residual": report.max_residual(),
    }))
}

pub fn rn(ctx: &Context, s: &Path, r: &Path) -> CliResult<Value> {
    let s: CpMap = load(s)?;
    let r: CpMap = load(r)?;
    let dil = stinespring_minimal(&r, &ctx.tol)?;
    let d = rn_derivative(&s, &dil, &ctx.tol)?;
    let report = d.verify(&s, &ctx.tol);
    Ok(json!({
        "dilation_dim": dil.dil_dim,
        "derivative": d.d,
        "report": report,
    }))
}

#[derive(Serialize, Deserialize)]
struct ChainInput {
    stages: Vec<Stage>,
    #[serde(default)]
    generalized: bool,
}

pub fn chain(ctx: &Context, input: &Path) -> CliResult<Value> {
    let ChainInput { stages, generalized } = load(input)?;
    let rep = chain_k(&stages, generalized, &ctx.tol)?;
    let report = rep.verify(&stages, &ctx.tol);
    Ok(json!({
        "generalized": generalized,
        "representation": rep,
        "report": report,
        "max_residual": report.max_residual(),
    }))
}

pub fn convert_cmd(ctx: &Context, strategy: &Path, generalized: bool) -> CliResult<Value> {
    let s: SequentialStrategy = load(strategy)?;
    let conv = if generalized {
        convert_generalized(&s, &ctx.tol)?
    } else {
        convert(&s, &ctx.tol)?
    };
    let direct = eval_sequential(&s, &ctx.tol)?;
    let via = eval_commuting(&conv.strategy, &ctx.tol)?;
    let diff = direct.max_diff(&via)?;
    Ok(json!({
        "strategy": conv.strategy,
        "ons": conv.ons,
        "residuals": conv.report,
        "max_residual": conv.report.max_residual(),
        "correlation_diff": diff,
    }))
}

#[derive(Deserialize)]
struct RunDescriptor {
    game: PathBuf,
    prover: PathBuf,
    scheme: Scheme,
}

pub fn simulate(ctx: &Context, descriptor: &Path, eps: f64, transcripts: Option<&Path>) -> CliResult<Value> {
    let run: RunDescriptor = load(descriptor)?;
    let g: Game = load(&relative_to(descriptor, &run.game))?;
    let p: ProverProgram = load(&relative_to(descriptor, &run.prover))?;
    let e = run.scheme.as_dyn();
    let cap = ctx.cap.unwrap_or(rnchain::compiled::DEFAULT_BRANCH_CAP);
    let ts = run_protocol(&g, &p, e, cap)?;
    if let Some(path) = transcripts {
        write(path, &transcripts_to_jsonl(&ts))?;
    }
    let c = decrypted_correlation(&ts, e, &g);
    let score = compiled_score(&g, &c)?;
    let audit = eps_ns_audit(&c, eps);
    Ok(json!({
        "scheme": e.name(),
        "branches": branch_count(&g, &p, e)?.to_string(),
        "transcripts": ts.len(),
        "score": score,
        "correlation": c,
        "audit": audit,
    }))
}

pub fn audit(correlation: &Path, eps: f64) -> CliResult<Value> {
    let c: Correlation = load(correlation)?;
    if c.p.len() != c.num_input_tuples() * c.num_output_tuples() {
        return Err(Failure::validation(format!(
            "{}: field `p` has {} entries, expected {}",
            correlation.display(),
            c.p.len(),
            c.num_input_tuples() * c.num_output_tuples()
        )));
    }
    Ok(serde_json::to_value(eps_ns_audit(&c, eps)).expect("report serializes"))
}
