//! Randomized invariants. Each case draws a seed and a size, builds its
//! inputs from the seeded generators and checks one identity.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng;

use rnchain::compiled::{
    decrypted_correlation, run_protocol, EncryptionScheme, Identity, ProverProgram, XorPad, DEFAULT_BRANCH_CAP,
};
use rnchain::cpmaps::{dominates, instrument_from_circuit};
use rnchain::dilation::{intertwining_unitary, stinespring_minimal, stinespring_with_symbol_order};
use rnchain::games::library::trivial_game;
use rnchain::games::{
    classical_value, deterministic_correlation, eval_commuting, eval_commuting_ordered, eval_tensor, score,
    seesaw_quantum_value, Correlation, Game, DEFAULT_ENUMERATION_CAP,
};
use rnchain::numerics::{commutant_basis, eig_hermitian, pinv};
use rnchain::radon_nikodym::{chain_k, lift, rn_derivative};
use rnchain::random::{random_cp_map, random_hermitian, random_instrument, random_matrix, random_unitary, stream};
use rnchain::sequential::library::random_ons_strategy;
use rnchain::sequential::{chain_stages, convert, eval_sequential, ons_check, to_commuting, ONS_FACTOR};
use rnchain::{CMatrix, CpMap, Error, Tolerance};

fn tol() -> Tolerance {
    Tolerance::default()
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), n in 1usize..=16) {
        let mut rng = stream(seed, 0);
        let a = random_hermitian(&mut rng, n);
        let e = eig_hermitian(&a, &tol()).unwrap();
        prop_assert!(e.reconstruct_with(|x| x).max_diff(&a) <= 1e-9 * a.max_abs().max(1.0));
        prop_assert!(e.vectors.unitarity_defect() <= 1e-9);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pseudo_inverse_is_a_generalized_inverse(seed in any::<u64>(), rows in 1usize..=6, cols in 1usize..=6, rank in 1usize..=6) {
        let mut rng = stream(seed, 0);
        let r = rank.min(rows).min(cols);
        let a = random_matrix(&mut rng, rows, r) * random_matrix(&mut rng, r, cols);
        let p = pinv(&a, &tol());
        prop_assert!((&a * &p * &a).max_diff(&a) <= 1e-8 * a.max_abs().max(1.0));
        prop_assert!((&p * &a * &p).max_diff(&p) <= 1e-8 * p.max_abs().max(1.0));
    }

    #[test]
    fn kron_is_associative(seed in any::<u64>(), a in 1usize..=3, b in 1usize..=3, c in 1usize..=3) {
        let mut rng = stream(seed, 0);
        let x = random_matrix(&mut rng, a, b);
        let y = random_matrix(&mut rng, b, c);
        let z = random_matrix(&mut rng, c, a);
        prop_assert!(x.kron(&y).kron(&z).max_diff(&x.kron(&y.kron(&z))) <= 1e-12);
    }

    #[test]
    fn choi_and_kraus_round_trip(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3, k in 1usize..=4) {
        let mut rng = stream(seed, 0);
        let t = random_cp_map(&mut rng, n, m, k);
        let back = CpMap::from_choi(n, m, t.choi(), &tol()).unwrap();
        prop_assert!(back.choi().max_diff(t.choi()) <= 1e-10);
        prop_assert!(back.kraus().len() <= (n * m).min(k));
        let x = random_matrix(&mut rng, n, n);
        prop_assert!(back.apply(&x).unwrap().max_diff(&t.apply(&x).unwrap()) <= 1e-10);
    }

    #[test]
    fn mutual_domination_means_equal_maps(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3) {
        let mut rng = stream(seed, 0);
        let t = random_cp_map(&mut rng, n, m, 2);
        let same = CpMap::from_choi(n, m, t.choi(), &tol()).unwrap();
        prop_assert!(dominates(&t, &same, &tol()).unwrap() && dominates(&same, &t, &tol()).unwrap());
        let bigger = t.scaled(1.01);
        prop_assert!(dominates(&bigger, &t, &tol()).unwrap());
        prop_assert!(!dominates(&t, &bigger, &tol()).unwrap());
    }

    #[test]
    fn instrument_adjoint_is_unital(seed in any::<u64>(), d in 1usize..=4, outcomes in 1usize..=4) {
        let mut rng = stream(seed, 0);
        let inst = random_instrument(&mut rng, d, outcomes);
        let unit = inst.summed().adjoint().apply(&CMatrix::identity(d)).unwrap();
        prop_assert!(unit.max_diff(&CMatrix::identity(d)) <= 1e-10);
        prop_assert!(inst.trace_preservation_defect() <= 1e-10);
    }

    #[test]
    fn purified_adjoint_is_multiplicative(seed in any::<u64>(), d in 1usize..=3, k in 1usize..=3) {
        let mut rng = stream(seed, 0);
        let u = random_unitary(&mut rng, k * d);
        let corrections: BTreeMap<String, CMatrix> =
            (0..k).map(|a| (a.to_string(), random_unitary(&mut rng, d))).collect();
        let circuit = instrument_from_circuit(&u, k, &corrections, &tol()).unwrap();
        let x = random_matrix(&mut rng, d, d);
        let y = random_matrix(&mut rng, d, d);
        for label in corrections.keys() {
            let px = circuit.purified_adjoint(label, &x).unwrap();
            let py = circuit.purified_adjoint(label, &y).unwrap();
            let pxy = circuit.purified_adjoint(label, &(&x * &y)).unwrap();
            prop_assert!((&px * &py).max_diff(&pxy) <= 1e-10);
            prop_assert!(circuit.purified_adjoint(label, &x.adjoint()).unwrap().max_diff(&px.adjoint()) <= 1e-10);
        }
    }

    #[test]
    fn minimal_dilations_are_unitarily_equivalent(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3, k in 1usize..=4) {
        let mut rng = stream(seed, 0);
        let t = random_cp_map(&mut rng, n, m, k);
        let d1 = stinespring_minimal(&t, &tol()).unwrap();
        let order: Vec<usize> = (0..n * n * m).rev().collect();
        let d2 = stinespring_with_symbol_order(&t, &order, &tol()).unwrap();
        prop_assert_eq!(d1.dil_dim, d2.dil_dim);
        prop_assert!(d1.dil_dim <= n * n * m);
        let w = intertwining_unitary(&d1, &d2, &tol()).unwrap();
        prop_assert!(w.unitarity_defect() <= 1e-8);
        prop_assert!((&w * &d1.v).max_diff(&d2.v) <= 1e-8);
        for (p1, p2) in d1.rep.iter().zip(&d2.rep) {
            prop_assert!((&w * p1 * w.adjoint()).max_diff(p2) <= 1e-8);
        }
    }

    #[test]
    fn derivative_is_unique_across_dilations(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3) {
        let mut rng = stream(seed, 0);
        let r = random_cp_map(&mut rng, n, m, 3);
        let d1 = stinespring_minimal(&r, &tol()).unwrap();
        let order: Vec<usize> = (0..n * n * m).rev().collect();
        let d2 = stinespring_with_symbol_order(&r, &order, &tol()).unwrap();
        let w = intertwining_unitary(&d1, &d2, &tol()).unwrap();
        // a part of R built from a positive contraction in the first commutant
        let mut h = CMatrix::zeros(d1.dil_dim, d1.dil_dim);
        for b in commutant_basis(&d1.rep, d1.dil_dim, &tol()).unwrap() {
            h += &b.scale_real(rng.random_range(-1.0..1.0));
        }
        let h = h.hermitian_part();
        let p = (&CMatrix::identity(d1.dil_dim) + &h.scale_real(1.0 / h.op_norm().max(1e-12))).scale_real(0.5);
        let part = CpMap::from_linear_fn(n, m, |a| d1.v.adjoint() * &p * d1.represent(a).unwrap() * &d1.v, &tol()).unwrap();
        let rn1 = rn_derivative(&part, &d1, &tol()).unwrap();
        let rn2 = rn_derivative(&part, &d2, &tol()).unwrap();
        prop_assert!(rn1.d.max_diff(&p) <= 1e-7);
        prop_assert!((&w * &rn1.d * w.adjoint()).max_diff(&rn2.d) <= 1e-7);
    }

    #[test]
    fn lift_is_a_positive_star_homomorphism(seed in any::<u64>(), n in 1usize..=3, p in 1usize..=2, k in 2usize..=3) {
        let mut rng = stream(seed, 0);
        let t1 = random_cp_map(&mut rng, n, p, 2);
        let w = random_unitary(&mut rng, p * k);
        let kraus = t1
            .kraus()
            .iter()
            .flat_map(|kr| (0..k).map(move |j| kr.kron(&CMatrix::basis_vector(k, j))))
            .map(|kr| &w * kr)
            .collect();
        let t = CpMap::from_kraus(n, p * k, kraus).unwrap();
        let dil = stinespring_minimal(&t, &tol()).unwrap();
        let embed = |b: &CMatrix| &w * CMatrix::identity(p).kron(b) * w.adjoint();
        let x = embed(&random_matrix(&mut rng, k, k));
        let y = embed(&random_matrix(&mut rng, k, k));
        let lx = lift(&x, &dil, &tol()).unwrap();
        let ly = lift(&y, &dil, &tol()).unwrap();
        prop_assert!(lift(&(&x * &y), &dil, &tol()).unwrap().max_diff(&(&lx * &ly)) <= 1e-9);
        prop_assert!(lift(&x.adjoint(), &dil, &tol()).unwrap().max_diff(&lx.adjoint()) <= 1e-9);
        let sum = lift(&(&x + &y), &dil, &tol()).unwrap();
        prop_assert!(sum.max_diff(&(&lx + &ly)) <= 1e-9);
        let pos = lift(&(&x * x.adjoint()), &dil, &tol()).unwrap();
        prop_assert!(eig_hermitian(&pos.hermitian_part(), &tol()).unwrap().min() >= -1e-9);
    }

    #[test]
    fn chain_families_are_povms(seed in any::<u64>(), k in 2usize..=4, outcomes in 2usize..=3) {
        let mut rng = stream(seed, 0);
        let s = random_ons_strategy(&mut rng, 2, &vec![2; k], &vec![outcomes; k]);
        let stages = chain_stages(&s, &tol()).unwrap();
        let rep = chain_k(&stages, false, &tol()).unwrap();
        let report = rep.verify(&stages, &tol());
        prop_assert!(report.povm_closure <= 1e-9);
        prop_assert!(report.max_residual() <= 1e-8);
        prop_assert_eq!(rep.families.len(), k - 1);
        prop_assert_eq!(rep.v.shape(), (rep.dim_k, 1));
        prop_assert!(report.v_norm_sq <= report.dominant_norm_bound + 1e-9);
    }

    #[test]
    fn score_is_affine(seed in any::<u64>(), t in 0.0f64..=1.0) {
        let mut rng = stream(seed, 0);
        let g = random_game(&mut rng, &[2, 3], &[2, 2]);
        let c1 = random_correlation(&mut rng, &g);
        let c2 = random_correlation(&mut rng, &g);
        let mix = Correlation::mixture(&[(t, &c1), (1.0 - t, &c2)]).unwrap();
        let expected = t * score(&g, &c1).unwrap() + (1.0 - t) * score(&g, &c2).unwrap();
        prop_assert!((score(&g, &mix).unwrap() - expected).abs() <= 1e-12);
    }

    #[test]
    fn classical_value_bounds_deterministic_scores(seed in any::<u64>()) {
        let mut rng = stream(seed, 0);
        let g = random_game(&mut rng, &[2, 2], &[2, 2]);
        let best = classical_value(&g, DEFAULT_ENUMERATION_CAP).unwrap();
        let witnessed = score(&g, &deterministic_correlation(&g, &best.assignment)).unwrap();
        prop_assert!((witnessed - best.value).abs() <= 1e-12);
        let assignment: Vec<Vec<usize>> = g
            .inputs()
            .iter()
            .zip(g.outputs())
            .map(|(&nx, &na)| (0..nx).map(|_| rng.random_range(0..na)).collect())
            .collect();
        prop_assert!(score(&g, &deterministic_correlation(&g, &assignment)).unwrap() <= best.value + 1e-12);
    }

    #[test]
    fn eval_commuting_ignores_player_order(seed in any::<u64>(), k in 2usize..=3) {
        let mut rng = stream(seed, 0);
        let s = random_ons_strategy(&mut rng, 2, &vec![2; k], &vec![2; k]);
        let c = to_commuting(&s, &tol()).unwrap();
        let natural = eval_commuting(&c, &tol()).unwrap();
        let reversed: Vec<usize> = (0..k).rev().collect();
        prop_assert!(eval_commuting_ordered(&c, &reversed).max_diff(&natural).unwrap() <= 1e-8);
    }

    #[test]
    fn conversion_preserves_the_correlation(seed in any::<u64>(), k in 2usize..=4) {
        let mut rng = stream(seed, 0);
        let inputs: Vec<usize> = (0..k).map(|_| rng.random_range(1..=2)).collect();
        let outputs: Vec<usize> = (0..k).map(|_| rng.random_range(2..=3)).collect();
        let s = random_ons_strategy(&mut rng, 2, &inputs, &outputs);
        let conv = convert(&s, &tol()).unwrap();
        let gap = eval_sequential(&s, &tol()).unwrap().max_diff(&eval_commuting(&conv.strategy, &tol()).unwrap()).unwrap();
        prop_assert!(gap <= 1e-7);
        prop_assert!(conv.strategy.commutation_defect() <= 1e-8);
    }

    #[test]
    fn signalling_assemblages_are_rejected(seed in any::<u64>(), t in 0.01f64..=1.0) {
        let mut rng = stream(seed, 0);
        let mut s = random_ons_strategy(&mut rng, 2, &[2, 2], &[2, 2]);
        // pull input 1's reduced state towards |0⟩⟨0|
        let target = CMatrix::projector(&CMatrix::basis_vector(2, 0));
        for (a, sigma) in s.assemblage[1].iter_mut().enumerate() {
            let moved = if a == 0 { target.scale_real(t) } else { CMatrix::zeros(2, 2) };
            *sigma = &sigma.scale_real(1.0 - t) + &moved;
        }
        let defect = ons_check(&s, ONS_FACTOR * tol().abs_eq).state_defect;
        prop_assume!(defect > ONS_FACTOR * tol().abs_eq);
        let is_not_ons = matches!(to_commuting(&s, &tol()), Err(Error::NotOns { .. }));
        prop_assert!(is_not_ons);
    }

    #[test]
    fn schemes_decrypt_what_they_encrypt(qbits in 0u32..=3, abits in 0u32..=3) {
        let (q, a) = (1usize << qbits, 1usize << abits);
        for e in [&Identity as &dyn EncryptionScheme, &XorPad] {
            let keys = e.key_space(q, a).unwrap();
            for key in 0..keys {
                let mut answers: Vec<usize> = (0..e.answer_ciphertext_space(a))
                    .map(|alpha| e.decrypt_answer(key, alpha, q, a))
                    .collect();
                answers.sort_unstable();
                answers.dedup();
                prop_assert_eq!(answers.len(), a);
                for x in 0..q {
                    for r in 0..e.randomness_space(q) {
                        let c = e.encrypt(key, x, r, q, a);
                        prop_assert!(c < e.ciphertext_space(q));
                        prop_assert_eq!(e.decrypt(key, c, q, a), x);
                    }
                }
            }
        }
    }

    #[test]
    fn xorpad_ciphertexts_are_uniform(qbits in 1u32..=3, abits in 0u32..=2) {
        let (q, a) = (1usize << qbits, 1usize << abits);
        let keys = XorPad.key_space(q, a).unwrap();
        let expected: Vec<usize> = vec![keys / XorPad.ciphertext_space(q); XorPad.ciphertext_space(q)];
        for x in 0..q {
            let mut counts = vec![0usize; XorPad.ciphertext_space(q)];
            for key in 0..keys {
                counts[XorPad.encrypt(key, x, 0, q, a)] += 1;
            }
            prop_assert_eq!(&counts, &expected);
        }
    }

    #[test]
    fn transparent_compilation_is_exact(seed in any::<u64>(), k in 2usize..=3) {
        let mut rng = stream(seed, 0);
        let s = random_ons_strategy(&mut rng, 2, &vec![2; k], &vec![2; k]);
        let g = trivial_game(vec![2; k], vec![2; k]);
        let p = ProverProgram::from_sequential(&s, &tol()).unwrap();
        let ts = run_protocol(&g, &p, &Identity, DEFAULT_BRANCH_CAP).unwrap();
        let c = decrypted_correlation(&ts, &Identity, &g);
        prop_assert!(c.max_diff(&eval_sequential(&s, &tol()).unwrap()).unwrap() <= 1e-9);
        prop_assert!(c.validity_defect() <= 1e-9);
    }

    #[test]
    fn random_provers_give_valid_correlations(seed in any::<u64>()) {
        let mut rng = stream(seed, 0);
        let g = trivial_game(vec![2, 2], vec![2, 2]);
        let p = ProverProgram::random(&mut rng, 2, &[2, 2], &[2, 2]);
        for e in [&Identity as &dyn EncryptionScheme, &XorPad] {
            let ts = run_protocol(&g, &p, e, DEFAULT_BRANCH_CAP).unwrap();
            prop_assert!(decrypted_correlation(&ts, e, &g).validity_defect() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn seesaw_value_is_attained_by_its_strategy(seed in any::<u64>()) {
        let mut rng = stream(seed, 0);
        let g = random_game(&mut rng, &[2, 2], &[2, 2]);
        let out = seesaw_quantum_value(&g, &[2, 2], 3, seed).unwrap();
        let achieved = score(&g, &eval_tensor(&out.strategy, &tol()).unwrap()).unwrap();
        prop_assert!((achieved - out.value).abs() <= 1e-9);
        prop_assert!(out.value <= 1.0);
        prop_assert!(out.history.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }
}

fn random_game<R: Rng>(rng: &mut R, inputs: &[usize], outputs: &[usize]) -> Game {
    let nx: usize = inputs.iter().product();
    let weights: Vec<f64> = (0..nx).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let na: usize = outputs.iter().product();
    let predicate: Vec<u8> = (0..nx * na).map(|_| rng.random_bool(0.5) as u8).collect();
    Game::new(
        inputs.to_vec(),
        outputs.to_vec(),
        weights.iter().map(|w| w / total).collect(),
        predicate,
    )
    .unwrap()
}

fn random_correlation<R: Rng>(rng: &mut R, g: &Game) -> Correlation {
    let na = g.num_output_tuples();
    let rows: Vec<Vec<f64>> = (0..g.num_input_tuples())
        .map(|_| {
            let w: Vec<f64> = (0..na).map(|_| rng.random_range(0.0..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|v| v / total).collect()
        })
        .collect();
    Correlation::from_fn(g.outputs().to_vec(), g.inputs().to_vec(), |a, x| rows[x][a])
}

// Found by the player-order property: the stage-2 spanning matrix is wide with
// repeated singular values.
#[test]
fn three_player_conversion_with_degenerate_spanning_matrix() {
    let mut rng = stream(6_979_083_950_799_705_886, 0);
    let s = random_ons_strategy(&mut rng, 2, &[2; 3], &[2; 3]);
    let c = to_commuting(&s, &tol()).unwrap();
    assert!(c.validate(&tol()).is_ok());
    let natural = eval_commuting(&c, &tol()).unwrap();
    assert!(eval_commuting_ordered(&c, &[2, 1, 0]).max_diff(&natural).unwrap() <= 1e-8);
}
