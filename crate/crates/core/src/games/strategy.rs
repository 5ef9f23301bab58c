use serde::{Deserialize, Serialize};

use super::game::{unflatten, Correlation};
use crate::error::{Error, Result};
use crate::numerics::{identity_defect, min_eigenvalue, CMatrix, Tolerance};

/// `povms[player][input][outcome]`.
pub type PovmFamily = Vec<Vec<Vec<CMatrix>>>;

/// Tensor-product strategy: player `i` measures on `C^{dims[i]}` and the
/// shared state lives on the tensor product in player order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorStrategy {
    pub dims: Vec<usize>,
    pub povms: PovmFamily,
    pub state: CMatrix,
}

/// Commuting-operator strategy on a single space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommutingStrategy {
    pub dim: usize,
    pub povms: PovmFamily,
    pub state: CMatrix,
}

fn check_povms(povms: &PovmFamily, dims: &[usize], tol: &Tolerance) -> Result<()> {
    for (p, (family, &d)) in povms.iter().zip(dims).enumerate() {
        if family.is_empty() {
            return Err(Error::InvalidStrategy(format!("player {p} has no inputs")));
        }
        for (x, povm) in family.iter().enumerate() {
            if povm.is_empty() {
                return Err(Error::InvalidStrategy(format!("player {p} input {x} has no outcomes")));
            }
            if let Some(m) = povm.iter().find(|m| m.shape() != (d, d)) {
                return Err(Error::InvalidStrategy(format!(
                    "player {p} input {x}: effect is {}x{}, expected {d}x{d}",
                    m.rows(),
                    m.cols()
                )));
            }
            for (a, m) in povm.iter().enumerate() {
                let low = min_eigenvalue(m, &tol.loosened(10.0)).map_err(|_| {
                    Error::InvalidStrategy(format!("player {p} input {x} outcome {a}: effect is not Hermitian"))
                })?;
                if low < -tol.psd_floor {
                    return Err(Error::InvalidStrategy(format!(
                        "player {p} input {x} outcome {a}: eigenvalue {low:.3e}"
                    )));
                }
            }
            let closure = identity_defect(&CMatrix::sum(povm).expect("nonempty"));
            if closure > tol.abs_eq {
                return Err(Error::InvalidStrategy(format!(
                    "player {p} input {x}: effects sum to identity only within {closure:.3e}"
                )));
            }
        }
    }
    Ok(())
}

fn check_state(state: &CMatrix, dim: usize, tol: &Tolerance) -> Result<()> {
    if state.shape() != (dim, 1) {
        return Err(Error::InvalidStrategy(format!(
            "state is {}x{}, expected a column of length {dim}",
            state.rows(),
            state.cols()
        )));
    }
    let norm = state.frobenius();
    if (norm - 1.0).abs() > tol.abs_eq {
        return Err(Error::InvalidStrategy(format!("state has norm {norm}")));
    }
    Ok(())
}

/// Input and output label-set sizes of a POVM family.
pub fn label_sets(povms: &PovmFamily) -> Result<(Vec<usize>, Vec<usize>)> {
    let inputs: Vec<usize> = povms.iter().map(Vec::len).collect();
    let mut outputs = Vec::with_capacity(povms.len());
    for (p, family) in povms.iter().enumerate() {
        let n = family.first().map_or(0, Vec::len);
        if family.iter().any(|povm| povm.len() != n) {
            return Err(Error::InvalidStrategy(format!(
                "player {p} uses different outcome counts for different inputs"
            )));
        }
        outputs.push(n);
    }
    Ok((inputs, outputs))
}

impl TensorStrategy {
    pub fn validate(&self, tol: &Tolerance) -> Result<()> {
        if self.povms.len() != self.dims.len() {
            return Err(Error::InvalidStrategy(format!(
                "{} POVM families for {} players",
                self.povms.len(),
                self.dims.len()
            )));
        }
        check_povms(&self.povms, &self.dims, tol)?;
        label_sets(&self.povms)?;
        check_state(&self.state, self.dims.iter().product(), tol)
    }

    /// Same strategy with every effect embedded as `1 ⊗ ⋯ ⊗ M ⊗ ⋯ ⊗ 1`.
    pub fn to_commuting(&self) -> CommutingStrategy {
        let total: usize = self.dims.iter().product();
        let povms = self
            .povms
            .iter()
            .enumerate()
            .map(|(p, family)| {
                let left: usize = self.dims[..p].iter().product();
                let right: usize = self.dims[p + 1..].iter().product();
                family
                    .iter()
                    .map(|povm| {
                        povm.iter()
                            .map(|m| CMatrix::identity(left).kron(m).kron(&CMatrix::identity(right)))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        CommutingStrategy {
            dim: total,
            povms,
            state: self.state.clone(),
        }
    }
}

impl CommutingStrategy {
    pub fn validate(&self, tol: &Tolerance) -> Result<()> {
        let dims = vec![self.dim; self.povms.len()];
        check_povms(&self.povms, &dims, tol)?;
        label_sets(&self.povms)?;
        check_state(&self.state, self.dim, tol)
    }

    /// Largest `‖[M^{(i)}, M^{(j)}]‖` over effects of different players.
    pub fn commutation_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, fi) in self.povms.iter().enumerate() {
            for fj in &self.povms[i + 1..] {
                for m in fi.iter().flatten() {
                    for n in fj.iter().flatten() {
                        worst = worst.max(m.commutator(n).op_norm());
                    }
                }
            }
        }
        worst
    }
}

/// `p(a⃗|x⃗) = ⟨ψ| M¹_{a₁|x₁} ⊗ ⋯ ⊗ M^k_{a_k|x_k} |ψ⟩`.
pub fn eval_tensor(s: &TensorStrategy, tol: &Tolerance) -> Result<Correlation> {
    s.validate(tol)?;
    Ok(eval_commuting_unchecked(&s.to_commuting()))
}

/// Commutation threshold for accepting a commuting strategy, relative to
/// `abs_eq`.
pub const COMMUTATION_FACTOR: f64 = 100.0;

/// `p(a⃗|x⃗) = ⟨ψ| M¹_{a₁|x₁} ⋯ M^k_{a_k|x_k} |ψ⟩`; rejects strategies whose
/// cross-player commutators exceed `100·abs_eq`.
pub fn eval_commuting(s: &CommutingStrategy, tol: &Tolerance) -> Result<Correlation> {
    s.validate(tol)?;
    let defect = s.commutation_defect();
    if defect > COMMUTATION_FACTOR * tol.abs_eq {
        return Err(Error::NotCommuting { defect });
    }
    Ok(eval_commuting_unchecked(s))
}

/// Evaluation in an explicit player order (a permutation of `0..k`).
pub fn eval_commuting_ordered(s: &CommutingStrategy, order: &[usize]) -> Correlation {
    let (inputs, outputs) = label_sets(&s.povms).expect("validated strategy");
    let bra = s.state.adjoint();
    Correlation::from_fn(outputs.clone(), inputs.clone(), |a, x| {
        let av = unflatten(a, &outputs);
        let xv = unflatten(x, &inputs);
        let mut vec = s.state.clone();
        // rightmost factor acts first
        for &p in order.iter().rev() {
            vec = &s.povms[p][xv[p]][av[p]] * vec;
        }
        (&bra * vec)[(0, 0)].re
    })
}

fn eval_commuting_unchecked(s: &CommutingStrategy) -> Correlation {
    let order: Vec<usize> = (0..s.povms.len()).collect();
    eval_commuting_ordered(s, &order)
}
