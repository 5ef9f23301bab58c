//! Whole-pipeline runs over the bundled JSON inputs in `data/`.

use std::fs;
use std::path::PathBuf;

use serde::de::DeserializeOwned;

use rnchain::compiled::{
    compiled_score, decrypted_correlation, eps_ns_audit, run_protocol, ProverProgram, Scheme, DEFAULT_BRANCH_CAP,
};
use rnchain::cpmaps::dominates;
use rnchain::dilation::{stinespring_minimal, verify_dilation};
use rnchain::games::{classical_value, eval_commuting, Game, DEFAULT_ENUMERATION_CAP};
use rnchain::radon_nikodym::{chain_k, Stage};
use rnchain::sequential::library::{chsh_steering_strategy, mermin_sequential_strategy};
use rnchain::sequential::{convert, eval_sequential, SequentialStrategy};
use rnchain::{CpMap, Error, Tolerance};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn load<T: DeserializeOwned>(name: &str) -> T {
    let text = fs::read_to_string(data(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn tol() -> Tolerance {
    Tolerance::default()
}

#[derive(serde::Deserialize)]
struct ChainInput {
    stages: Vec<Stage>,
    generalized: bool,
}

#[derive(serde::Deserialize)]
struct RunDescriptor {
    game: String,
    prover: String,
    scheme: Scheme,
}

#[test]
fn bundled_games_have_classical_value_three_quarters() {
    for name in ["chsh.json", "mermin3.json"] {
        let g: Game = load(name);
        assert_eq!(
            classical_value(&g, DEFAULT_ENUMERATION_CAP).unwrap().value,
            0.75,
            "{name}"
        );
    }
}

#[test]
fn bundled_strategies_match_the_library() {
    let pairs = [
        ("chsh_steering.json", chsh_steering_strategy()),
        ("mermin_sequential.json", mermin_sequential_strategy()),
    ];
    for (name, lib) in pairs {
        let s: SequentialStrategy = load(name);
        let from_file = eval_sequential(&s, &tol()).unwrap();
        let from_lib = eval_sequential(&lib, &tol()).unwrap();
        assert!(from_file.max_diff(&from_lib).unwrap() < 1e-9, "{name}");
    }
}

#[test]
fn bundled_strategies_convert() {
    for name in ["chsh_steering.json", "mermin_sequential.json", "uniform_3p.json"] {
        let s: SequentialStrategy = load(name);
        let conv = convert(&s, &tol()).unwrap();
        assert!(conv.report.max_residual() < 1e-8, "{name}");
        let gap = eval_sequential(&s, &tol())
            .unwrap()
            .max_diff(&eval_commuting(&conv.strategy, &tol()).unwrap())
            .unwrap();
        assert!(gap < 1e-7, "{name}");
    }
    let bad: SequentialStrategy = load("signalling_counterexample.json");
    assert!(matches!(convert(&bad, &tol()), Err(Error::NotOns { .. })));
}

#[test]
fn bundled_maps_dilate_and_compare() {
    let id: CpMap = load("identity_2.json");
    let dep: CpMap = load("depolarizing_2.json");
    for t in [&id, &dep] {
        let d = stinespring_minimal(t, &tol()).unwrap();
        let r = verify_dilation(&d, &tol());
        assert!(r.max_residual() < 1e-9);
        assert_eq!(r.minimality_defect, 0);
    }
    assert!(!dominates(&dep, &id, &tol()).unwrap());
    assert!(dominates(&dep.scaled(4.0), &id.scaled(1.0), &tol()).unwrap());
}

#[test]
fn bundled_chain_verifies() {
    let input: ChainInput = load("chain_mermin.json");
    let rep = chain_k(&input.stages, input.generalized, &tol()).unwrap();
    assert!(rep.verify(&input.stages, &tol()).max_residual() < 1e-8);
}

#[test]
fn bundled_protocol_runs() {
    let tsirelson = (std::f64::consts::PI / 8.0).cos().powi(2);
    let expected = [
        ("run_identity_chsh.json", Some(tsirelson), true),
        ("run_identity_mermin.json", Some(1.0), true),
        ("run_xorpad_echo.json", None, true),
        ("run_identity_copying.json", None, false),
    ];
    for (name, score, passes) in expected {
        let run: RunDescriptor = load(name);
        let g: Game = load(&run.game);
        let p: ProverProgram = load(&run.prover);
        p.validate(&tol()).unwrap();
        let e = run.scheme.as_dyn();
        let ts = run_protocol(&g, &p, e, DEFAULT_BRANCH_CAP).unwrap();
        let c = decrypted_correlation(&ts, e, &g);
        if let Some(v) = score {
            assert!((compiled_score(&g, &c).unwrap() - v).abs() < 1e-9, "{name}");
        }
        assert_eq!(eps_ns_audit(&c, 1e-9).pass, passes, "{name}");
    }
}
