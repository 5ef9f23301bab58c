use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cpmaps::{CpMap, Instrument};
use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, min_eigenvalue, CMatrix, Tolerance};
use crate::random::{random_density, random_instrument};
use crate::sequential::SequentialStrategy;

/// Single quantum prover: an initial state and, for every round, one
/// instrument per received label whose arms are the answer labels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProverProgram {
    pub initial: CMatrix,
    /// `rounds[r][label]`.
    pub rounds: Vec<Vec<Instrument>>,
}

fn labelled(maps: Vec<CpMap>) -> Instrument {
    let arms: BTreeMap<String, CpMap> = maps.into_iter().enumerate().map(|(b, m)| (b.to_string(), m)).collect();
    Instrument::from_arms(arms).expect("arms share a shape")
}

/// Classical deterministic transition `|i⟩ ↦ |next(i)⟩` restricted to
/// the memory states `i` with `answer(i) = a`.
fn classical_arm(memory: usize, next_memory: usize, a: usize, rule: &dyn Fn(usize) -> (usize, usize)) -> CpMap {
    let mut k = CMatrix::zeros(next_memory, memory);
    for i in 0..memory {
        let (ans, next) = rule(i);
        if ans == a {
            k[(next, i)] = crate::numerics::ONE;
        }
    }
    CpMap::from_kraus(memory, next_memory, vec![k]).expect("shapes agree")
}

impl ProverProgram {
    pub fn rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn state_dim(&self) -> usize {
        self.initial.rows()
    }

    /// Number of answer labels in round `r`.
    pub fn answers(&self, r: usize) -> usize {
        self.rounds[r].first().map_or(0, Instrument::len)
    }

    /// Instrument applied in round `r` on receiving `label`.
    pub fn arm(&self, r: usize, label: usize, answer: usize) -> &CpMap {
        self.rounds[r][label]
            .arm(&answer.to_string())
            .expect("validated answer labels")
    }

    pub fn validate(&self, tol: &Tolerance) -> Result<()> {
        let bad = |m: String| Error::InvalidStrategy(m);
        let d = self.initial.rows();
        if !self.initial.is_square() || d == 0 {
            return Err(bad("initial state must be a nonempty square matrix".into()));
        }
        let low = min_eigenvalue(&self.initial, &tol.loosened(10.0))
            .map_err(|_| bad("initial state is not Hermitian".into()))?;
        let tr = self.initial.trace().re;
        if low < -tol.psd_floor || (tr - 1.0).abs() > tol.abs_eq {
            return Err(bad(format!("initial state has eigenvalue {low:.3e} and trace {tr}")));
        }
        if self.rounds.is_empty() {
            return Err(bad("prover has no rounds".into()));
        }
        let mut dim = d;
        for (r, round) in self.rounds.iter().enumerate() {
            let Some(first) = round.first() else {
                return Err(bad(format!("round {r} has no instruments")));
            };
            let (n, out) = (first.len(), first.out_dim());
            for (label, inst) in round.iter().enumerate() {
                let labels_ok = (0..n).all(|b| inst.arm(&b.to_string()).is_some());
                if inst.len() != n || !labels_ok {
                    return Err(bad(format!("round {r} label {label}: answer labels must be 0..{n}")));
                }
                if inst.in_dim() != dim || inst.out_dim() != out {
                    return Err(bad(format!(
                        "round {r} label {label}: instrument maps M_{} to M_{}, expected M_{dim} to M_{out}",
                        inst.in_dim(),
                        inst.out_dim()
                    )));
                }
                let defect = inst.trace_preservation_defect();
                if defect > tol.abs_eq {
                    return Err(bad(format!(
                        "round {r} label {label}: arms are trace preserving only within {defect:.3e}"
                    )));
                }
            }
            dim = out;
        }
        Ok(())
    }

    /// Honest prover running a sequential strategy in the clear. Round one
    /// prepares `σ_{a|x}/tr σ_{a|x}` and reports `a` with probability
    /// `tr σ_{a|x}`; middle rounds apply the strategy's instruments; the
    /// last round measures the final POVM.
    pub fn from_sequential(s: &SequentialStrategy, tol: &Tolerance) -> Result<Self> {
        s.validate(tol)?;
        let d = s.dim;
        let first = s
            .assemblage
            .iter()
            .map(|row| {
                let arms = row
                    .iter()
                    .map(|sigma| {
                        let e = eig_hermitian(&sigma.hermitian_part(), tol)?;
                        let mut kraus = Vec::new();
                        for (t, &lambda) in e.values.iter().enumerate() {
                            if lambda <= 0.0 {
                                continue;
                            }
                            let v = e.vector(t).scale_real(lambda.sqrt());
                            for j in 0..d {
                                kraus.push(&v * CMatrix::basis_vector(d, j).adjoint());
                            }
                        }
                        CpMap::from_kraus(d, d, kraus)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(labelled(arms))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rounds = vec![first];
        rounds.extend(s.instruments.iter().cloned());
        let last = s
            .final_povm
            .iter()
            .map(|povm| {
                let arms = povm
                    .iter()
                    .map(|c| CpMap::functional(&c.hermitian_part(), tol))
                    .collect::<Result<Vec<_>>>()?;
                Ok(labelled(arms))
            })
            .collect::<Result<Vec<_>>>()?;
        rounds.push(last);
        Ok(Self {
            initial: CMatrix::projector(&CMatrix::basis_vector(d, 0)),
            rounds,
        })
    }

    /// Answers the fixed `label` in every round whatever it receives.
    pub fn constant(labels: &[usize], answers: &[usize], label: usize) -> Self {
        let rounds = labels
            .iter()
            .zip(answers)
            .map(|(&nl, &na)| {
                let arms = (0..na).map(|a| classical_arm(1, 1, a, &|_| (label, 0))).collect();
                vec![labelled(arms); nl]
            })
            .collect();
        Self {
            initial: CMatrix::identity(1),
            rounds,
        }
    }

    /// Answers the received label (reduced modulo the answer count).
    pub fn echo(labels: &[usize], answers: &[usize]) -> Self {
        let rounds = labels
            .iter()
            .zip(answers)
            .map(|(&nl, &na)| {
                (0..nl)
                    .map(|c| labelled((0..na).map(|a| classical_arm(1, 1, a, &|_| (c % na, 0))).collect()))
                    .collect()
            })
            .collect();
        Self {
            initial: CMatrix::identity(1),
            rounds,
        }
    }

    /// Remembers the first received label and answers it (modulo the answer
    /// count) in every round.
    pub fn copying(labels: &[usize], answers: &[usize]) -> Self {
        let memory = labels[0];
        let mut rounds = Vec::with_capacity(labels.len());
        rounds.push(
            (0..labels[0])
                .map(|c| {
                    labelled(
                        (0..answers[0])
                            .map(|a| classical_arm(1, memory, a, &|_| (c % answers[0], c)))
                            .collect(),
                    )
                })
                .collect(),
        );
        for (&nl, &na) in labels.iter().zip(answers).skip(1) {
            let arms = (0..na)
                .map(|a| classical_arm(memory, memory, a, &|i| (i % na, i)))
                .collect();
            rounds.push(vec![labelled(arms); nl]);
        }
        Self {
            initial: CMatrix::identity(1),
            rounds,
        }
    }

    /// Random quantum prover on `C^dim`: random initial state and an
    /// independent random instrument for every round and label.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize, labels: &[usize], answers: &[usize]) -> Self {
        let initial = random_density(rng, dim, dim);
        let rounds = labels
            .iter()
            .zip(answers)
            .map(|(&nl, &na)| (0..nl).map(|_| random_instrument(rng, dim, na)).collect())
            .collect();
        Self { initial, rounds }
    }
}
