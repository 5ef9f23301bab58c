use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::strategy::{ons_check, OnsReport, SequentialStrategy};
use crate::cpmaps::CpMap;
use crate::error::{Error, Result};
use crate::games::CommutingStrategy;
use crate::numerics::{CMatrix, Tolerance};
use crate::radon_nikodym::{chain_k, ChainReport, CommutingRepresentation, Family, Stage};

/// Defects above `ONS_FACTOR · abs_eq` make a strategy non-convertible.
pub const ONS_FACTOR: f64 = 100.0;

/// Everything produced by a conversion: the strategy, the underlying
/// representation and the residuals measured on it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Conversion {
    pub strategy: CommutingStrategy,
    pub representation: CommutingRepresentation,
    pub report: ChainReport,
    pub ons: OnsReport,
}

fn keyed<T: Clone>(rows: impl IntoIterator<Item = Vec<T>>) -> Family<T> {
    rows.into_iter()
        .enumerate()
        .map(|(x, row)| {
            let arms: BTreeMap<String, T> = row.into_iter().enumerate().map(|(a, v)| (a.to_string(), v)).collect();
            (x.to_string(), arms)
        })
        .collect()
}

fn dense(fam: &Family<CMatrix>, inputs: usize, outputs: usize) -> Vec<Vec<CMatrix>> {
    (0..inputs)
        .map(|x| {
            let arms = &fam[&x.to_string()];
            (0..outputs).map(|a| arms[&a.to_string()].clone()).collect()
        })
        .collect()
}

fn average(maps: &[CpMap]) -> Result<CpMap> {
    let total = CpMap::sum_all(maps)?.expect("at least one input");
    Ok(total.scaled(1.0 / maps.len() as f64))
}

/// Chain input for a sequential strategy: functionals `tr(σ_{a|x} ·)`
/// dominated by the input-averaged reduced state, then the Heisenberg
/// arms of each stage dominated by its input-averaged summed channel.
pub fn chain_stages(s: &SequentialStrategy, tol: &Tolerance) -> Result<Vec<Stage>> {
    let mut rows = Vec::with_capacity(s.assemblage.len());
    for row in &s.assemblage {
        rows.push(
            row.iter()
                .map(|sigma| CpMap::functional(&sigma.hermitian_part(), tol))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let reduced = s.reduced_states();
    let mean = CMatrix::sum(&reduced)
        .expect("nonempty")
        .scale_real(1.0 / reduced.len() as f64)
        .hermitian_part();
    let mut stages = vec![Stage::new(keyed(rows), CpMap::functional(&mean, tol)?)?];
    for stage in &s.instruments {
        let rows: Vec<Vec<CpMap>> = stage
            .iter()
            .map(|inst| {
                (0..inst.len())
                    .map(|b| inst.arm(&b.to_string()).expect("validated labels").adjoint())
                    .collect()
            })
            .collect();
        let summed: Vec<CpMap> = stage.iter().map(|inst| inst.summed().adjoint()).collect();
        stages.push(Stage::new(keyed(rows), average(&summed)?)?);
    }
    Ok(stages)
}

fn assemble(
    s: &SequentialStrategy,
    rep: CommutingRepresentation,
    stages: &[Stage],
    ons: OnsReport,
    tol: &Tolerance,
) -> Conversion {
    let inputs = s.inputs();
    let outputs = s.outputs();
    let mut povms: Vec<Vec<Vec<CMatrix>>> = rep
        .families
        .iter()
        .enumerate()
        .map(|(i, fam)| dense(fam, inputs[i], outputs[i]))
        .collect();
    povms.push(
        s.final_povm
            .iter()
            .map(|povm| povm.iter().map(|c| rep.represent(c).hermitian_part()).collect())
            .collect(),
    );
    let report = rep.verify(stages, tol);
    let strategy = CommutingStrategy {
        dim: rep.dim_k,
        povms,
        state: rep.v.clone(),
    };
    Conversion {
        strategy,
        representation: rep,
        report,
        ons,
    }
}

/// Commuting-operator realization of an operationally no-signalling
/// sequential strategy, built with the chain rule.
pub fn convert(s: &SequentialStrategy, tol: &Tolerance) -> Result<Conversion> {
    s.validate(tol)?;
    let ons = ons_check(s, ONS_FACTOR * tol.abs_eq);
    if !ons.pass {
        return Err(Error::NotOns {
            state_defect: ons.state_defect,
            instrument_defects: ons.instrument_defects,
        });
    }
    let stages = chain_stages(s, tol)?;
    let rep = chain_k(&stages, false, tol)?;
    Ok(assemble(s, rep, &stages, ons, tol))
}

/// Like [`convert`], but the middle stages are only required to be
/// no-signalling on the dilation built so far: domination is checked after
/// pushing through the previous representation, and the resulting POVMs
/// must close to the identity.
pub fn convert_generalized(s: &SequentialStrategy, tol: &Tolerance) -> Result<Conversion> {
    s.validate(tol)?;
    let ons = ons_check(s, ONS_FACTOR * tol.abs_eq);
    let threshold = ONS_FACTOR * tol.abs_eq;
    if ons.state_defect > threshold {
        return Err(Error::NotOns {
            state_defect: ons.state_defect,
            instrument_defects: ons.instrument_defects,
        });
    }
    let stages = chain_stages(s, tol)?;
    let rep = chain_k(&stages, true, tol)?;
    let out = assemble(s, rep, &stages, ons, tol);
    let closure = closure_per_stage(&out.representation);
    if closure.iter().any(|&c| c > threshold) {
        return Err(Error::NotOns {
            state_defect: out.ons.state_defect,
            instrument_defects: closure[1..].to_vec(),
        });
    }
    Ok(out)
}

fn closure_per_stage(rep: &CommutingRepresentation) -> Vec<f64> {
    let id = CMatrix::identity(rep.dim_k);
    rep.families
        .iter()
        .map(|fam| {
            fam.values()
                .map(|arms| CMatrix::sum(arms.values()).expect("nonempty").max_diff(&id))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Commuting-operator strategy reproducing `eval_sequential(s)`.
pub fn to_commuting(s: &SequentialStrategy, tol: &Tolerance) -> Result<CommutingStrategy> {
    convert(s, tol).map(|c| c.strategy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::library::{chsh, mermin3};
    use crate::games::{eval_commuting, score};
    use crate::random::seeded;
    use crate::sequential::eval_sequential;
    use crate::sequential::library::{
        chsh_steering_strategy, mermin_sequential_strategy, random_ons_strategy, signalling_counterexample,
        uniform_strategy,
    };

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn round_trip(s: &SequentialStrategy) -> (f64, Conversion) {
        let conv = convert(s, &tol()).unwrap();
        let direct = eval_sequential(s, &tol()).unwrap();
        let via = eval_commuting(&conv.strategy, &tol()).unwrap();
        (direct.max_diff(&via).unwrap(), conv)
    }

    #[test]
    fn steering_chsh_round_trip() {
        let (diff, conv) = round_trip(&chsh_steering_strategy());
        assert!(diff <= 1e-9, "{diff}");
        assert!(conv.report.max_residual() <= 1e-9);
        let c = eval_commuting(&conv.strategy, &tol()).unwrap();
        assert!((score(&chsh(), &c).unwrap() - 0.8535533905932737).abs() < 1e-9);
    }

    #[test]
    fn uniform_three_players_gives_scalar_operators() {
        let s = uniform_strategy(2, &[2, 2, 2], &[2, 2, 2]);
        let (diff, conv) = round_trip(&s);
        assert!(diff < 1e-12);
        for fam in &conv.representation.families {
            for f in fam.values().flat_map(|arms| arms.values()) {
                let id = CMatrix::identity(f.rows()).scale_real(0.5);
                assert!(f.max_diff(&id) < 1e-10);
            }
        }
        let c = eval_commuting(&conv.strategy, &tol()).unwrap();
        assert!(c.p.iter().all(|&v| (v - 0.125).abs() < 1e-12));
    }

    #[test]
    fn random_three_player_round_trip() {
        let mut rng = seeded(21);
        for _ in 0..3 {
            let s = random_ons_strategy(&mut rng, 2, &[2, 2, 2], &[2, 2, 2]);
            let (diff, conv) = round_trip(&s);
            assert!(diff <= 1e-7, "{diff}");
            assert!(conv.report.cross_commutator <= 1e-8);
            assert!(conv.report.povm_closure <= 1e-9);
        }
    }

    #[test]
    fn mermin_sequential_round_trip() {
        let s = mermin_sequential_strategy();
        let (diff, conv) = round_trip(&s);
        assert!(diff <= 1e-7);
        let c = eval_commuting(&conv.strategy, &tol()).unwrap();
        assert!((score(&mermin3(), &c).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn generalized_agrees_on_ons_input() {
        let mut rng = seeded(5);
        let s = random_ons_strategy(&mut rng, 2, &[2, 2, 2], &[2, 2, 2]);
        let a = convert(&s, &tol()).unwrap();
        let b = convert_generalized(&s, &tol()).unwrap();
        let ca = eval_commuting(&a.strategy, &tol()).unwrap();
        let cb = eval_commuting(&b.strategy, &tol()).unwrap();
        assert!(ca.max_diff(&cb).unwrap() < 1e-9);
    }

    #[test]
    fn signalling_is_rejected() {
        let err = to_commuting(&signalling_counterexample(), &tol()).unwrap_err();
        match err {
            Error::NotOns { state_defect, .. } => assert!((state_defect - 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            convert_generalized(&signalling_counterexample(), &tol()),
            Err(Error::NotOns { .. })
        ));
    }

    #[test]
    fn signalling_instruments_are_rejected() {
        let mut s = uniform_strategy(2, &[1, 2, 1], &[1, 1, 2]);
        // y = 1 resets to |1⟩⟨1|, y = 0 keeps the state
        let reset = CpMap::from_kraus(
            2,
            2,
            vec![
                CMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]),
                CMatrix::from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]]),
            ],
        )
        .unwrap();
        let mut arms = BTreeMap::new();
        arms.insert("0".to_string(), reset);
        s.instruments[0][1] = crate::cpmaps::Instrument::new(arms, &tol()).unwrap();
        assert!(matches!(convert(&s, &tol()), Err(Error::NotOns { .. })));
        assert!(matches!(
            convert_generalized(&s, &tol()),
            Err(Error::NotOns { .. } | Error::NotDominated { .. })
        ));
    }
}
