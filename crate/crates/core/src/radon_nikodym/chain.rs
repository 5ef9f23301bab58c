use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::derivative::{commutant_defect, lift_unchecked, solve_derivative};
use crate::cpmaps::{domination_margin, CpMap};
use crate::dilation::{stinespring_minimal, Dilation};
use crate::error::{Error, Result};
use crate::numerics::{min_eigenvalue, CMatrix, Tolerance};

/// Input label → outcome label → operator (or map).
pub type Family<T> = BTreeMap<String, BTreeMap<String, T>>;

/// One link of the chain: dominated maps `S_{a|x}` and their dominant `R`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stage {
    pub families: Family<CpMap>,
    pub dominant: CpMap,
}

impl Stage {
    pub fn new(families: Family<CpMap>, dominant: CpMap) -> Result<Self> {
        for arms in families.values() {
            for s in arms.values() {
                s.check_same_dims(&dominant)?;
            }
        }
        Ok(Self { families, dominant })
    }

    /// Splits `R` into `outcomes` equal parts for each of `inputs` labels.
    pub fn uniform(dominant: CpMap, inputs: usize, outcomes: usize) -> Self {
        let part = dominant.scaled(1.0 / outcomes as f64);
        let arms: BTreeMap<String, CpMap> = (0..outcomes).map(|a| (a.to_string(), part.clone())).collect();
        let families = (0..inputs).map(|x| (x.to_string(), arms.clone())).collect();
        Self { families, dominant }
    }
}

/// `(K, π, V, {F})`: one Hilbert space carrying commuting POVM families, a
/// representation of the last algebra and an intertwiner.
#[derive(Clone, Debug)]
pub struct CommutingRepresentation {
    pub dim_k: usize,
    /// Dimension `n` of the last algebra `M_n`; `π(E_ij)` sits at `i·n + j`.
    pub algebra_dim: usize,
    pub rep: Vec<CMatrix>,
    pub v: CMatrix,
    pub families: Vec<Family<CMatrix>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    /// `max ‖Σ_a F_{a|x} − 1‖_max` over stages and inputs.
    pub povm_closure: f64,
    /// Most negative eigenvalue over all `F` (zero when all are PSD).
    pub min_eigenvalue: f64,
    /// `max ‖[F, F′]‖` over operators of different stages.
    pub cross_commutator: f64,
    /// `max ‖[F, π(E_ij)]‖`.
    pub rep_commutator: f64,
    /// `max ‖V* F¹⋯F^{k−1} π(E_ij) V − S¹∘⋯∘S^{k−1}(E_ij)‖_max` over all
    /// label tuples.
    pub reconstruction: f64,
    /// `‖V‖²`.
    pub v_norm_sq: f64,
    /// `∏ ‖R^{(i)}(1)‖`, the asserted bound on `‖V‖²`.
    pub dominant_norm_bound: f64,
}

impl ChainReport {
    pub fn max_residual(&self) -> f64 {
        self.povm_closure
            .max(-self.min_eigenvalue.min(0.0))
            .max(self.cross_commutator)
            .max(self.rep_commutator)
            .max(self.reconstruction)
    }
}

impl CommutingRepresentation {
    pub fn rep_unit(&self, i: usize, j: usize) -> &CMatrix {
        &self.rep[i * self.algebra_dim + j]
    }

    pub fn represent(&self, a: &CMatrix) -> CMatrix {
        let n = self.algebra_dim;
        let mut out = CMatrix::zeros(self.dim_k, self.dim_k);
        for i in 0..n {
            for j in 0..n {
                out += &self.rep_unit(i, j).scale(a[(i, j)]);
            }
        }
        out
    }

    /// Residuals of the commuting-representation invariants against the
    /// stages it was built from.
    pub fn verify(&self, stages: &[Stage], tol: &Tolerance) -> ChainReport {
        let id = CMatrix::identity(self.dim_k);
        let mut povm_closure = 0.0f64;
        let mut lowest = 0.0f64;
        for fam in &self.families {
            for arms in fam.values() {
                let total = CMatrix::sum(arms.values()).expect("families are nonempty");
                povm_closure = povm_closure.max(total.max_diff(&id));
                for f in arms.values() {
                    let m = min_eigenvalue(f, &tol.loosened(100.0)).unwrap_or(f64::NEG_INFINITY);
                    lowest = lowest.min(m);
                }
            }
        }
        let flat: Vec<(usize, &CMatrix)> = self
            .families
            .iter()
            .enumerate()
            .flat_map(|(i, fam)| fam.values().flat_map(|arms| arms.values()).map(move |f| (i, f)))
            .collect();
        let mut cross = 0.0f64;
        for (a, (si, f)) in flat.iter().enumerate() {
            for (sj, g) in &flat[a + 1..] {
                if si != sj {
                    cross = cross.max(f.commutator(g).op_norm());
                }
            }
        }
        let mut rep_comm = 0.0f64;
        for (_, f) in &flat {
            for p in &self.rep {
                rep_comm = rep_comm.max(f.commutator(p).op_norm());
            }
        }
        let v_norm = self.v.op_norm();
        ChainReport {
            povm_closure,
            min_eigenvalue: lowest,
            cross_commutator: cross,
            rep_commutator: rep_comm,
            reconstruction: self.reconstruction_residual(stages),
            v_norm_sq: v_norm * v_norm,
            dominant_norm_bound: stages
                .iter()
                .map(|s| s.dominant.image_of_identity().op_norm())
                .product(),
        }
    }

    fn reconstruction_residual(&self, stages: &[Stage]) -> f64 {
        let n = self.algebra_dim;
        let mut worst = 0.0f64;
        let mut tuples: Vec<(CMatrix, Option<CpMap>)> = vec![(CMatrix::identity(self.dim_k), None)];
        for (fam_ops, stage) in self.families.iter().zip(stages) {
            let mut next = Vec::new();
            for (prod, composed) in &tuples {
                for (x, arms) in &stage.families {
                    for (a, s) in arms {
                        let f = &fam_ops[x][a];
                        let comp = match composed {
                            None => s.clone(),
                            Some(c) => c.compose(s).expect("stages chain in dimension"),
                        };
                        next.push((prod * f, Some(comp)));
                    }
                }
            }
            tuples = next;
        }
        for (prod, composed) in &tuples {
            let composed = composed.as_ref().expect("at least one stage");
            let left = self.v.adjoint() * prod;
            for i in 0..n {
                for j in 0..n {
                    let got = &left * self.rep_unit(i, j) * &self.v;
                    let want = composed
                        .apply(&CMatrix::matrix_unit(n, i, j))
                        .expect("matrix units have the domain shape");
                    worst = worst.max(got.max_diff(&want));
                }
            }
        }
        worst
    }
}

/// `π_{prev} ∘ T` as a map into the dilation space of `prev`.
fn push_forward(prev: &Dilation, t: &CpMap, tol: &Tolerance) -> Result<CpMap> {
    let n = t.in_dim();
    let k = prev.dil_dim;
    let size = n * k;
    let mut choi = CMatrix::zeros(size, size);
    for j in 0..n {
        for jp in 0..n {
            let image = t.apply(&CMatrix::matrix_unit(n, j, jp))?;
            choi.set_block(j * k, jp * k, &prev.represent(&image)?);
        }
    }
    CpMap::from_choi(n, k, &choi.hermitian_part(), tol)
}

/// Chain rule for two stages.
pub fn chain2(stage1: &Stage, stage2: &Stage, generalized: bool, tol: &Tolerance) -> Result<CommutingRepresentation> {
    chain_k(&[stage1.clone(), stage2.clone()], generalized, tol)
}

/// Chain rule for `k − 1` stages: dilate `R¹`, take derivatives, then for
/// each later stage dilate `π ∘ R^{(i)}`, take derivatives of `π ∘ S^{(i)}`
/// and lift every earlier family through the new dilation.
///
/// With `generalized` the per-stage condition `S ≤ R` is replaced by
/// `π ∘ S ≤ π ∘ R` on the current dilation.
pub fn chain_k(stages: &[Stage], generalized: bool, tol: &Tolerance) -> Result<CommutingRepresentation> {
    let Some(first) = stages.first() else {
        return Err(Error::DimensionMismatch("chain needs at least one stage".into()));
    };
    for w in stages.windows(2) {
        if w[1].dominant.out_dim() != w[0].dominant.in_dim() {
            return Err(Error::DimensionMismatch(format!(
                "stage maps into M_{} but the previous stage acts on M_{}",
                w[1].dominant.out_dim(),
                w[0].dominant.in_dim()
            )));
        }
    }
    check_domination(&first.families, &first.dominant, tol)?;
    if !generalized {
        for stage in &stages[1..] {
            check_domination(&stage.families, &stage.dominant, tol)?;
        }
    }

    let mut dil = stinespring_minimal(&first.dominant, tol)?;
    let mut families = vec![derivatives(&first.families, &dil, tol)?];
    let mut v_total = dil.v.clone();

    for stage in &stages[1..] {
        let pushed = push_forward(&dil, &stage.dominant, tol)?;
        let mut pushed_families: Family<CpMap> = BTreeMap::new();
        for (x, arms) in &stage.families {
            let mut out = BTreeMap::new();
            for (a, s) in arms {
                out.insert(a.clone(), push_forward(&dil, s, tol)?);
            }
            pushed_families.insert(x.clone(), out);
        }
        check_domination(&pushed_families, &pushed, tol)?;
        let next = stinespring_minimal(&pushed, tol)?;
        let new_family = derivatives(&pushed_families, &next, tol)?;
        for fam in families.iter_mut() {
            for arms in fam.values_mut() {
                for f in arms.values_mut() {
                    let defect = commutant_defect(f, &pushed);
                    if defect > 100.0 * tol.abs_eq {
                        return Err(Error::NotInCommutant { defect });
                    }
                    *f = lift_unchecked(f, &next, tol).hermitian_part();
                }
            }
        }
        families.push(new_family);
        v_total = &next.v * &v_total;
        dil = next;
    }

    Ok(CommutingRepresentation {
        dim_k: dil.dil_dim,
        algebra_dim: dil.algebra_dim(),
        rep: dil.rep,
        v: v_total,
        families,
    })
}

fn check_domination(families: &Family<CpMap>, dominant: &CpMap, tol: &Tolerance) -> Result<()> {
    for arms in families.values() {
        for s in arms.values() {
            let margin = domination_margin(dominant, s, tol)?;
            if margin < -tol.psd_floor {
                return Err(Error::NotDominated { min_eigenvalue: margin });
            }
        }
    }
    Ok(())
}

fn derivatives(families: &Family<CpMap>, dil: &Dilation, tol: &Tolerance) -> Result<Family<CMatrix>> {
    let mut out = BTreeMap::new();
    for (x, arms) in families {
        let mut ops = BTreeMap::new();
        for (a, s) in arms {
            ops.insert(a.clone(), solve_derivative(s, dil, tol)?);
        }
        out.insert(x.clone(), ops);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct CommutingRepresentationRepr {
    dim_k: usize,
    rep: BTreeMap<String, CMatrix>,
    v: CMatrix,
    families: Vec<Family<CMatrix>>,
}

impl Serialize for CommutingRepresentation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.algebra_dim;
        let rep = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (format!("{i},{j}"), self.rep_unit(i, j).clone()))
            .collect();
        CommutingRepresentationRepr {
            dim_k: self.dim_k,
            rep,
            v: self.v.clone(),
            families: self.families.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CommutingRepresentation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = CommutingRepresentationRepr::deserialize(deserializer)?;
        let n = (repr.rep.len() as f64).sqrt().round() as usize;
        if n * n != repr.rep.len() {
            return Err(D::Error::custom("rep must hold n² matrix units"));
        }
        let mut rep = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let key = format!("{i},{j}");
                rep.push(
                    repr.rep
                        .get(&key)
                        .cloned()
                        .ok_or_else(|| D::Error::custom(format!("rep is missing key {key:?}")))?,
                );
            }
        }
        Ok(Self {
            dim_k: repr.dim_k,
            algebra_dim: n,
            rep,
            v: repr.v,
            families: repr.families,
        })
    }
}
