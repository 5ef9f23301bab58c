use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prover::ProverProgram;
use super::scheme::EncryptionScheme;
use crate::error::{Error, Result};
use crate::games::{flatten, input_sensitivity, marginal, ns_check, score, unflatten, Correlation, Game, NsReport};
use crate::numerics::{CMatrix, Tolerance};

pub const DEFAULT_BRANCH_CAP: u128 = 1 << 16;

/// One fully specified run of the compiled protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    /// Plaintext questions `x⃗`.
    pub questions: Vec<usize>,
    /// Keys of the encrypted rounds.
    pub keys: Vec<usize>,
    /// Encryption randomness of the encrypted rounds.
    pub randomness: Vec<usize>,
    /// What the prover received in the encrypted rounds.
    pub ciphertexts: Vec<usize>,
    /// Encrypted answers for every round but the last, plain last answer.
    pub answers: Vec<usize>,
    pub weight: f64,
}

/// Round `r` shape: (labels the prover may receive, answers it may give).
fn round_shapes(g: &Game, e: &dyn EncryptionScheme) -> Vec<(usize, usize)> {
    let k = g.players();
    (0..k)
        .map(|r| {
            if r + 1 < k {
                (
                    e.ciphertext_space(g.inputs()[r]),
                    e.answer_ciphertext_space(g.outputs()[r]),
                )
            } else {
                (g.inputs()[r], g.outputs()[r])
            }
        })
        .collect()
}

/// Number of branches `run_protocol` would enumerate.
pub fn branch_count(g: &Game, p: &ProverProgram, e: &dyn EncryptionScheme) -> Result<u128> {
    let k = g.players();
    let mut total = g.num_input_tuples() as u128;
    for r in 0..k {
        let (q, a) = (g.inputs()[r], g.outputs()[r]);
        let per_round = if r + 1 < k {
            e.key_space(q, a)? as u128 * e.randomness_space(q) as u128 * p.answers(r) as u128
        } else {
            p.answers(r) as u128
        };
        total = total.saturating_mul(per_round);
    }
    Ok(total)
}

/// Exact enumeration of the compiled protocol: for each question tuple
/// (uniform prior) the verifier encrypts rounds `1..k−1` under fresh keys
/// and randomness, the prover answers with its instruments, and the last
/// question is sent in the clear. Zero-probability branches are dropped.
pub fn run_protocol(g: &Game, p: &ProverProgram, e: &dyn EncryptionScheme, cap: u128) -> Result<Vec<Transcript>> {
    p.validate(&Tolerance::default())?;
    let k = g.players();
    if p.rounds() != k {
        return Err(Error::ShapeMismatch(format!(
            "prover has {} rounds, game has {k} players",
            p.rounds()
        )));
    }
    for (r, &(labels, answers)) in round_shapes(g, e).iter().enumerate() {
        if p.rounds[r].len() != labels || p.answers(r) != answers {
            return Err(Error::ShapeMismatch(format!(
                "round {r}: prover handles {} labels and {} answers, protocol needs {labels} and {answers}",
                p.rounds[r].len(),
                p.answers(r)
            )));
        }
    }
    let size = branch_count(g, p, e)?;
    if size > cap {
        return Err(Error::TooLarge { size, cap });
    }
    let nx = g.num_input_tuples();
    let prior = 1.0 / nx as f64;
    let per_x: Vec<Vec<Transcript>> = (0..nx)
        .into_par_iter()
        .map(|x| {
            let mut out = Vec::new();
            let start = Transcript {
                questions: unflatten(x, g.inputs()),
                keys: Vec::new(),
                randomness: Vec::new(),
                ciphertexts: Vec::new(),
                answers: Vec::new(),
                weight: prior,
            };
            explore(g, p, e, 0, &p.initial, start, &mut out);
            out
        })
        .collect();
    Ok(per_x.into_iter().flatten().collect())
}

fn explore(
    g: &Game,
    p: &ProverProgram,
    e: &dyn EncryptionScheme,
    r: usize,
    rho: &CMatrix,
    t: Transcript,
    out: &mut Vec<Transcript>,
) {
    let k = g.players();
    let (q, a) = (g.inputs()[r], g.outputs()[r]);
    let x = t.questions[r];
    if r + 1 == k {
        for ans in 0..p.answers(r) {
            let next = p.arm(r, x, ans).apply(rho).expect("validated dimensions");
            let weight = t.weight * next.trace().re;
            if weight > 0.0 {
                let mut done = t.clone();
                done.answers.push(ans);
                done.weight = weight;
                out.push(done);
            }
        }
        return;
    }
    let keys = e.key_space(q, a).expect("checked by branch_count");
    let rand = e.randomness_space(q);
    let split = 1.0 / (keys * rand) as f64;
    for key in 0..keys {
        for rr in 0..rand {
            let c = e.encrypt(key, x, rr, q, a);
            for alpha in 0..p.answers(r) {
                let next = p.arm(r, c, alpha).apply(rho).expect("validated dimensions");
                if next.max_abs() == 0.0 {
                    continue;
                }
                let mut child = t.clone();
                child.keys.push(key);
                child.randomness.push(rr);
                child.ciphertexts.push(c);
                child.answers.push(alpha);
                child.weight *= split;
                explore(g, p, e, r + 1, &next, child, out);
            }
        }
    }
}

/// Plaintext answers of a transcript.
pub fn decrypt_answers(t: &Transcript, e: &dyn EncryptionScheme, g: &Game) -> Vec<usize> {
    let k = t.answers.len();
    t.answers
        .iter()
        .enumerate()
        .map(|(r, &alpha)| {
            if r + 1 < k {
                e.decrypt_answer(t.keys[r], alpha, g.inputs()[r], g.outputs()[r])
            } else {
                alpha
            }
        })
        .collect()
}

/// `p(a⃗|x⃗)`: average over keys and randomness of the probability that the
/// answers decrypt to `a⃗`, i.e. the transcript weight of `(x⃗, a⃗)`
/// divided by the weight of `x⃗`.
pub fn decrypted_correlation(ts: &[Transcript], e: &dyn EncryptionScheme, g: &Game) -> Correlation {
    let nx = g.num_input_tuples();
    let mut c = Correlation {
        outputs: g.outputs().to_vec(),
        inputs: g.inputs().to_vec(),
        p: vec![0.0; nx * g.num_output_tuples()],
    };
    let mut mass = vec![0.0; nx];
    for t in ts {
        let x = flatten(&t.questions, g.inputs());
        let a = flatten(&decrypt_answers(t, e, g), g.outputs());
        c.set(a, x, c.get(a, x) + t.weight);
        mass[x] += t.weight;
    }
    for (i, v) in c.p.iter_mut().enumerate() {
        let m = mass[i % nx];
        if m > 0.0 {
            *v /= m;
        }
    }
    c
}

pub fn compiled_score(g: &Game, c: &Correlation) -> Result<f64> {
    score(g, c)
}

/// No-signalling audit split along the protocol's time order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub ns: NsReport,
    /// Entry `i`: dependence of the later rounds' answers on question `i`.
    pub forward: Vec<f64>,
    /// Entry `i`: dependence of the earlier rounds' answers on question `i`.
    pub backward: Vec<f64>,
    pub pass: bool,
}

pub fn eps_ns_audit(c: &Correlation, eps: f64) -> AuditReport {
    let k = c.inputs.len();
    let directional = |keep: Vec<usize>, i: usize| {
        if keep.is_empty() {
            0.0
        } else {
            input_sensitivity(&marginal(c, &keep), &c.inputs, i)
        }
    };
    let forward = (0..k).map(|i| directional((i + 1..k).collect(), i)).collect();
    let backward = (0..k).map(|i| directional((0..i).collect(), i)).collect();
    let ns = ns_check(c, eps);
    let pass = ns.pass;
    AuditReport {
        ns,
        forward,
        backward,
        pass,
    }
}

/// One JSON object per line.
pub fn transcripts_to_jsonl(ts: &[Transcript]) -> String {
    let mut out = String::new();
    for t in ts {
        out.push_str(&serde_json::to_string(t).expect("transcripts serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiled::{Identity, XorPad};
    use crate::games::library::{chsh, mermin3, trivial_game};
    use crate::random::seeded;
    use crate::sequential::eval_sequential;
    use crate::sequential::library::{chsh_steering_strategy, mermin_sequential_strategy};

    const CAP: u128 = DEFAULT_BRANCH_CAP;

    #[test]
    fn constant_prover_is_deterministic() {
        let g = chsh();
        let p = ProverProgram::constant(&[2, 2], &[2, 2], 1);
        let ts = run_protocol(&g, &p, &Identity, CAP).unwrap();
        assert_eq!(ts.len(), 4);
        assert!(ts
            .iter()
            .all(|t| t.answers == vec![1, 1] && (t.weight - 0.25).abs() < 1e-15));
        let c = decrypted_correlation(&ts, &Identity, &g);
        assert_eq!(c.get(3, 2), 1.0);
    }

    #[test]
    fn xorpad_echo_is_uniform() {
        let g = trivial_game(vec![2, 2], vec![2, 2]);
        let p = ProverProgram::echo(&[2, 2], &[2, 2]);
        let ts = run_protocol(&g, &p, &XorPad, CAP).unwrap();
        // each x: 4 keys in round one, answer determined, two last answers
        // collapse to the echoed plaintext
        assert_eq!(ts.len(), 16);
        for x in 0..4 {
            let pads: Vec<usize> = ts
                .iter()
                .filter(|t| flatten(&t.questions, &[2, 2]) == x)
                .map(|t| t.ciphertexts[0])
                .collect();
            assert_eq!(pads.iter().filter(|&&c| c == 0).count(), 2);
        }
        let c = decrypted_correlation(&ts, &XorPad, &g);
        for x in 0..4 {
            let y = x % 2;
            for a in 0..4 {
                let av = unflatten(a, &[2, 2]);
                let expected = if av[1] == y { 0.5 } else { 0.0 };
                assert!((c.get(a, x) - expected).abs() < 1e-15);
            }
        }
        assert!(eps_ns_audit(&c, 1e-12).pass);
    }

    #[test]
    fn honest_provers_reproduce_sequential_correlations() {
        let tol = Tolerance::default();
        for (g, s, value) in [
            (chsh(), chsh_steering_strategy(), 0.5 + 0.5 / 2f64.sqrt()),
            (mermin3(), mermin_sequential_strategy(), 1.0),
        ] {
            let p = ProverProgram::from_sequential(&s, &tol).unwrap();
            let ts = run_protocol(&g, &p, &Identity, CAP).unwrap();
            let total: f64 = ts.iter().map(|t| t.weight).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let c = decrypted_correlation(&ts, &Identity, &g);
            let direct = eval_sequential(&s, &tol).unwrap();
            assert!(c.max_diff(&direct).unwrap() <= 1e-9);
            assert!((compiled_score(&g, &c).unwrap() - value).abs() < 1e-9);
        }
    }

    #[test]
    fn audit_directions() {
        let g = trivial_game(vec![2, 2], vec![2, 2]);
        let p = ProverProgram::copying(&[2, 2], &[2, 2]);
        let c = decrypted_correlation(&run_protocol(&g, &p, &Identity, CAP).unwrap(), &Identity, &g);
        let audit = eps_ns_audit(&c, 1e-9);
        assert!(!audit.pass);
        assert!((audit.forward[0] - 1.0).abs() < 1e-12);
        assert!(audit.backward.iter().all(|&d| d <= 1e-12));

        let mut rng = seeded(9);
        let q = ProverProgram::random(&mut rng, 2, &[2, 2, 2], &[2, 2, 2]);
        let g3 = trivial_game(vec![2, 2, 2], vec![2, 2, 2]);
        let c = decrypted_correlation(&run_protocol(&g3, &q, &Identity, CAP).unwrap(), &Identity, &g3);
        assert!(eps_ns_audit(&c, 1e-9).backward.iter().all(|&d| d <= 1e-12));
        let c = decrypted_correlation(&run_protocol(&g3, &q, &XorPad, CAP).unwrap(), &XorPad, &g3);
        let audit = eps_ns_audit(&c, 1e-12);
        assert!(audit.pass, "{audit:?}");
    }

    #[test]
    fn caps_and_shapes() {
        let g = trivial_game(vec![2, 2], vec![2, 2]);
        let p = ProverProgram::echo(&[2, 2], &[2, 2]);
        assert!(matches!(
            run_protocol(&g, &p, &XorPad, 8),
            Err(Error::TooLarge { size: 64, cap: 8 })
        ));
        let q = ProverProgram::echo(&[2, 2, 2], &[2, 2, 2]);
        assert!(matches!(
            run_protocol(&g, &q, &Identity, CAP),
            Err(Error::ShapeMismatch(_))
        ));
        let odd = trivial_game(vec![3, 2], vec![2, 2]);
        let r = ProverProgram::echo(&[3, 2], &[2, 2]);
        assert!(matches!(
            run_protocol(&odd, &r, &XorPad, CAP),
            Err(Error::UnsupportedLabelSpace(_))
        ));
    }

    #[test]
    fn jsonl_and_repeatability() {
        let g = chsh();
        let mut rng = seeded(3);
        let p = ProverProgram::random(&mut rng, 2, &[2, 2], &[2, 2]);
        let a = run_protocol(&g, &p, &XorPad, CAP).unwrap();
        let b = run_protocol(&g, &p, &XorPad, CAP).unwrap();
        assert_eq!(a, b);
        let text = transcripts_to_jsonl(&a);
        assert_eq!(text.lines().count(), a.len());
        let first: Transcript = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first, a[0]);
    }
}
