use std::collections::BTreeMap;

use rand::Rng;

use super::strategy::SequentialStrategy;
use crate::cpmaps::{CpMap, Instrument};
use crate::error::{Error, Result};
use crate::games::library::{chsh_optimal_strategy, ghz_mermin_strategy, observable_povm, pauli_z};
use crate::games::TensorStrategy;
use crate::numerics::{eig_hermitian, partial_trace, sqrt_psd, CMatrix, Tolerance};
use crate::random::{environment_instrument, random_channel_kraus, random_density, random_povm};

fn labelled(maps: Vec<CpMap>) -> Instrument {
    let arms: BTreeMap<String, CpMap> = maps.into_iter().enumerate().map(|(b, m)| (b.to_string(), m)).collect();
    Instrument::from_arms(arms).expect("arms share a shape")
}

/// Sequential form of a tensor-product strategy. The first player's
/// measurement steers the rest of the state; each middle player measures
/// its own factor and resets it to `|0⟩`; the last player measures the
/// last factor.
pub fn sequential_from_tensor(s: &TensorStrategy, tol: &Tolerance) -> Result<SequentialStrategy> {
    s.validate(tol)?;
    let k = s.dims.len();
    if k < 2 {
        return Err(Error::InvalidStrategy("need at least two players".into()));
    }
    let rest = &s.dims[1..];
    let dim: usize = rest.iter().product();
    let rho = CMatrix::projector(&s.state);
    let keep: Vec<usize> = (1..k).collect();

    let assemblage = s.povms[0]
        .iter()
        .map(|povm| {
            povm.iter()
                .map(|m| {
                    let op = m.kron(&CMatrix::identity(dim));
                    Ok(partial_trace(&(op * &rho), &s.dims, &keep)?.hermitian_part())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut instruments = Vec::with_capacity(k - 2);
    for p in 1..k - 1 {
        let d = s.dims[p];
        let left = CMatrix::identity(s.dims[1..p].iter().product());
        let right = CMatrix::identity(s.dims[p + 1..].iter().product());
        let reset = CMatrix::basis_vector(d, 0);
        let mut stage = Vec::with_capacity(s.povms[p].len());
        for povm in &s.povms[p] {
            let mut arms = Vec::with_capacity(povm.len());
            for m in povm {
                let e = eig_hermitian(m, tol)?;
                let kraus = (0..d)
                    .filter(|&t| e.values[t] > 0.0)
                    .map(|t| {
                        let w = e.vector(t).scale_real(e.values[t].sqrt());
                        left.kron(&(&reset * w.adjoint())).kron(&right)
                    })
                    .collect();
                arms.push(CpMap::from_kraus(dim, dim, kraus)?);
            }
            stage.push(labelled(arms));
        }
        instruments.push(stage);
    }

    let before = CMatrix::identity(dim / s.dims[k - 1]);
    let final_povm = s.povms[k - 1]
        .iter()
        .map(|povm| povm.iter().map(|m| before.kron(m)).collect())
        .collect();
    Ok(SequentialStrategy {
        dim,
        assemblage,
        instruments,
        final_povm,
    })
}

/// Optimal CHSH strategy in steering form: `σ_{a|x} = A_{a|x}ᵀ/2` on
/// Bob's qubit.
pub fn chsh_steering_strategy() -> SequentialStrategy {
    sequential_from_tensor(&chsh_optimal_strategy(), &Tolerance::default()).expect("valid strategy")
}

/// GHZ/Mermin strategy in sequential form on `C⁴`, the middle player
/// measuring and resetting the first qubit.
pub fn mermin_sequential_strategy() -> SequentialStrategy {
    sequential_from_tensor(&ghz_mermin_strategy(), &Tolerance::default()).expect("valid strategy")
}

/// Everything uniform: `σ_{a|x} = 1/(d·|A|)`, arms `ρ ↦ ρ/|B|`, effects
/// `1/|C|`.
pub fn uniform_strategy(dim: usize, inputs: &[usize], outputs: &[usize]) -> SequentialStrategy {
    assert!(inputs.len() >= 2 && inputs.len() == outputs.len());
    let k = inputs.len();
    let id = CMatrix::identity(dim);
    let sigma = id.scale_real(1.0 / (dim * outputs[0]) as f64);
    let assemblage = vec![vec![sigma; outputs[0]]; inputs[0]];
    let instruments = (1..k - 1)
        .map(|p| {
            let arm = CpMap::from_kraus(dim, dim, vec![id.scale_real(1.0 / (outputs[p] as f64).sqrt())])
                .expect("square Kraus");
            vec![labelled(vec![arm; outputs[p]]); inputs[p]]
        })
        .collect();
    let effect = id.scale_real(1.0 / outputs[k - 1] as f64);
    let final_povm = vec![vec![effect; outputs[k - 1]]; inputs[k - 1]];
    SequentialStrategy {
        dim,
        assemblage,
        instruments,
        final_povm,
    }
}

/// Random operationally no-signalling strategy on `M_dim`: assemblage
/// `√σ̄ M_{a|x} √σ̄` for a full-rank `σ̄` and random POVMs, middle stages
/// obtained by measuring the environment of one shared channel per stage
/// with an input-dependent POVM, random final POVMs.
pub fn random_ons_strategy<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    inputs: &[usize],
    outputs: &[usize],
) -> SequentialStrategy {
    assert!(inputs.len() >= 2 && inputs.len() == outputs.len());
    let tol = Tolerance::default();
    let k = inputs.len();
    let mean = random_density(rng, dim, dim);
    let root = sqrt_psd(&mean, &tol).expect("density is Hermitian");
    let assemblage = (0..inputs[0])
        .map(|_| {
            random_povm(rng, dim, outputs[0])
                .into_values()
                .map(|m| (&root * m * &root).hermitian_part())
                .collect()
        })
        .collect();
    let mut instruments = Vec::with_capacity(k - 2);
    for p in 1..k - 1 {
        let kraus = random_channel_kraus(rng, dim, dim, 2);
        instruments.push(
            (0..inputs[p])
                .map(|_| environment_instrument(&kraus, &random_povm(rng, 2, outputs[p])))
                .collect(),
        );
    }
    let final_povm = (0..inputs[k - 1])
        .map(|_| povm_vec(random_povm(rng, dim, outputs[k - 1])))
        .collect();
    SequentialStrategy {
        dim,
        assemblage,
        instruments,
        final_povm,
    }
}

fn povm_vec(map: BTreeMap<String, CMatrix>) -> Vec<CMatrix> {
    let n = map.len();
    (0..n).map(|c| map[&c.to_string()].clone()).collect()
}

/// Two-player qubit strategy whose reduced state reveals the input:
/// `σ_{0|x} = |x⟩⟨x|`, `σ_{1|x} = 0`, final measurement in `Z`.
pub fn signalling_counterexample() -> SequentialStrategy {
    let zero = CMatrix::zeros(2, 2);
    SequentialStrategy {
        dim: 2,
        assemblage: vec![
            vec![CMatrix::diag_real(&[1.0, 0.0]), zero.clone()],
            vec![CMatrix::diag_real(&[0.0, 1.0]), zero],
        ],
        instruments: vec![],
        final_povm: vec![observable_povm(&pauli_z())],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{eval_tensor, flatten};
    use crate::random::seeded;
    use crate::sequential::{eval_sequential, ons_check};

    #[test]
    fn steering_assemblage_is_transposed_observable() {
        let s = chsh_steering_strategy();
        let alice = &chsh_optimal_strategy().povms[0];
        for (x, povm) in alice.iter().enumerate() {
            for (a, effect) in povm.iter().enumerate() {
                let expected = effect.transpose().scale_real(0.5);
                assert!(s.assemblage[x][a].max_diff(&expected) < 1e-15);
            }
        }
    }

    #[test]
    fn sequential_form_matches_tensor_evaluation() {
        let tol = Tolerance::default();
        for t in [chsh_optimal_strategy(), ghz_mermin_strategy()] {
            let s = sequential_from_tensor(&t, &tol).unwrap();
            let a = eval_tensor(&t, &tol).unwrap();
            let b = eval_sequential(&s, &tol).unwrap();
            assert!(a.max_diff(&b).unwrap() < 1e-12);
            assert!(ons_check(&s, 1e-12).pass);
        }
    }

    #[test]
    fn random_strategies_are_ons_and_valid() {
        let mut rng = seeded(8);
        let tol = Tolerance::default();
        for _ in 0..5 {
            let s = random_ons_strategy(&mut rng, 2, &[2, 3, 2, 2], &[2, 2, 3, 2]);
            assert!(s.validate(&tol).is_ok());
            assert!(ons_check(&s, 1e-12).pass);
            let c = eval_sequential(&s, &tol).unwrap();
            assert!(c.validity_defect() < 1e-12);
            assert!(c.get(flatten(&[1, 1, 2, 1], &[2, 2, 3, 2]), 0) >= 0.0);
        }
    }
}
