//! Regenerates the JSON files under `data/`.

use std::fs;
use std::path::Path;

use rnchain::compiled::ProverProgram;
use rnchain::games::library::{chsh, mermin3};
use rnchain::sequential::chain_stages;
use rnchain::sequential::library::{
    chsh_steering_strategy, mermin_sequential_strategy, signalling_counterexample, uniform_strategy,
};
use rnchain::{CpMap, Tolerance};
use serde::Serialize;
use serde_json::json;

fn save<T: Serialize>(dir: &Path, name: &str, value: &T) {
    let mut text = serde_json::to_string_pretty(value).unwrap();
    text.push('\n');
    fs::write(dir.join(name), text).unwrap();
    println!("wrote data/{name}");
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    fs::create_dir_all(&dir).unwrap();
    let tol = Tolerance::default();

    save(&dir, "chsh.json", &chsh());
    save(&dir, "mermin3.json", &mermin3());

    let steering = chsh_steering_strategy();
    let mermin = mermin_sequential_strategy();
    save(&dir, "chsh_steering.json", &steering);
    save(&dir, "mermin_sequential.json", &mermin);
    save(&dir, "uniform_3p.json", &uniform_strategy(2, &[2, 2, 2], &[2, 2, 2]));
    save(&dir, "signalling_counterexample.json", &signalling_counterexample());

    save(&dir, "identity_2.json", &CpMap::identity(2));
    save(&dir, "depolarizing_2.json", &CpMap::depolarizing(2));
    let stages = chain_stages(&mermin, &tol).unwrap();
    save(
        &dir,
        "chain_mermin.json",
        &json!({ "stages": stages, "generalized": false }),
    );

    save(
        &dir,
        "prover_chsh_honest.json",
        &ProverProgram::from_sequential(&steering, &tol).unwrap(),
    );
    save(
        &dir,
        "prover_mermin_honest.json",
        &ProverProgram::from_sequential(&mermin, &tol).unwrap(),
    );
    save(
        &dir,
        "prover_ciphertext_echo.json",
        &ProverProgram::copying(&[2, 2], &[2, 2]),
    );

    let runs = [
        (
            "run_identity_chsh.json",
            "prover_chsh_honest.json",
            "chsh.json",
            "identity",
        ),
        (
            "run_identity_mermin.json",
            "prover_mermin_honest.json",
            "mermin3.json",
            "identity",
        ),
        (
            "run_xorpad_echo.json",
            "prover_ciphertext_echo.json",
            "chsh.json",
            "xorpad",
        ),
        (
            "run_identity_copying.json",
            "prover_ciphertext_echo.json",
            "chsh.json",
            "identity",
        ),
    ];
    for (name, prover, game, scheme) in runs {
        save(&dir, name, &json!({ "game": game, "prover": prover, "scheme": scheme }));
    }
}
