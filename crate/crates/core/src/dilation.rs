//! Minimal Stinespring and GNS dilations built from the Gram form on
//! `M_n ⊙ C^m`.
//!
//! A symbol `E_ij ⊙ e_k` has index `(i·n + j)·m + k`. Its Gram matrix is
//! `G[(α,k),(β,l)] = T(E_α* E_β)[k,l]`; the quotient by null vectors is
//! realized by the eigenpairs of `G` above `rank_cut · λ_max`, and a symbol
//! vector `w` has dilation coordinates `diag(√λ) U* w`.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cpmaps::CpMap;
use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, rank, CMatrix, Tolerance};

/// Stinespring triple `(K, π, V)` with `T(a) = V* π(a) V`.
#[derive(Clone, Debug)]
pub struct Dilation {
    pub dil_dim: usize,
    /// `π(E_ij)` stored at `i·n + j`.
    pub rep: Vec<CMatrix>,
    pub v: CMatrix,
    pub source: CpMap,
}

impl Dilation {
    /// Assembles a dilation from explicit parts (no minimality assumed).
    pub fn from_parts(source: CpMap, rep: Vec<CMatrix>, v: CMatrix) -> Result<Self> {
        let n = source.in_dim();
        let k = v.rows();
        if rep.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} representation images for an algebra with {} matrix units",
                rep.len(),
                n * n
            )));
        }
        if v.cols() != source.out_dim() {
            return Err(Error::DimensionMismatch(format!(
                "intertwiner has {} columns, map acts into M_{}",
                v.cols(),
                source.out_dim()
            )));
        }
        if let Some(p) = rep.iter().find(|p| p.shape() != (k, k)) {
            return Err(Error::DimensionMismatch(format!(
                "representation image is {}x{}, dilation space has dimension {k}",
                p.rows(),
                p.cols()
            )));
        }
        Ok(Self {
            dil_dim: k,
            rep,
            v,
            source,
        })
    }

    /// Dimension `n` of the represented algebra `M_n`.
    pub fn algebra_dim(&self) -> usize {
        self.source.in_dim()
    }

    pub fn rep_unit(&self, i: usize, j: usize) -> &CMatrix {
        &self.rep[i * self.algebra_dim() + j]
    }

    /// `π(a) = Σ a_ij π(E_ij)`.
    pub fn represent(&self, a: &CMatrix) -> Result<CMatrix> {
        let n = self.algebra_dim();
        if a.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "element is {}x{}, represented algebra is M_{n}",
                a.rows(),
                a.cols()
            )));
        }
        let mut out = CMatrix::zeros(self.dil_dim, self.dil_dim);
        for i in 0..n {
            for j in 0..n {
                let c = a[(i, j)];
                if c.norm() != 0.0 {
                    out += &self.rep_unit(i, j).scale(c);
                }
            }
        }
        Ok(out)
    }

    /// Columns `π(E_α) V e_k` in symbol order: the dilation coordinates of
    /// every symbol `E_α ⊙ e_k`.
    pub fn spanning_matrix(&self) -> CMatrix {
        let n2 = self.rep.len();
        let m = self.v.cols();
        let mut w = CMatrix::zeros(self.dil_dim, n2 * m);
        for (alpha, p) in self.rep.iter().enumerate() {
            w.set_block(0, alpha * m, &(p * &self.v));
        }
        w
    }
}

/// Full symbol-space Gram matrix `I_n ⊗ Choi(T)` in symbol order.
pub fn gram_matrix(t: &CpMap) -> CMatrix {
    let n = t.in_dim();
    CMatrix::identity(n).kron(t.choi())
}

pub fn stinespring_minimal(t: &CpMap, tol: &Tolerance) -> Result<Dilation> {
    let order: Vec<usize> = (0..t.in_dim() * t.in_dim() * t.out_dim()).collect();
    dilate_with_order(t, &order, tol)
}

/// Same construction with the symbol basis enumerated in `order`; yields a
/// unitarily equivalent dilation.
#[doc(hidden)]
pub fn stinespring_with_symbol_order(t: &CpMap, order: &[usize], tol: &Tolerance) -> Result<Dilation> {
    let size = t.in_dim() * t.in_dim() * t.out_dim();
    let mut seen = vec![false; size];
    if order.len() != size
        || order
            .iter()
            .any(|&i| i >= size || std::mem::replace(&mut seen[i], true))
    {
        return Err(Error::DimensionMismatch(format!(
            "symbol order must be a permutation of 0..{size}"
        )));
    }
    dilate_with_order(t, order, tol)
}

fn dilate_with_order(t: &CpMap, order: &[usize], tol: &Tolerance) -> Result<Dilation> {
    let n = t.in_dim();
    let m = t.out_dim();
    let size = n * n * m;
    let choi_min = crate::numerics::min_eigenvalue(t.choi(), &tol.loosened(10.0))?;
    if choi_min < -tol.psd_floor {
        return Err(Error::NotCP {
            min_eigenvalue: choi_min,
        });
    }
    // G in the permuted symbol basis: G'[p, q] = G[order[p], order[q]]
    let g = gram_matrix(t);
    let g = CMatrix::from_fn(size, size, |p, q| g[(order[p], order[q])]).hermitian_part();
    let e = eig_hermitian(&g, &tol.loosened(10.0))?;
    let top = e.max();
    let kept: Vec<usize> = (0..size)
        .filter(|&k| top > 0.0 && e.values[k] > tol.rank_cut * top)
        .collect();
    let r = kept.len();

    // J = Λ^{1/2} U*, J⁺ = U Λ^{-1/2}, mapped back to natural symbol order
    let mut j_mat = CMatrix::zeros(r, size);
    let mut j_pinv = CMatrix::zeros(size, r);
    for (row, &k) in kept.iter().enumerate() {
        let s = e.values[k].sqrt();
        for p in 0..size {
            let u = e.vectors[(p, k)];
            j_mat[(row, order[p])] = u.conj() * s;
            j_pinv[(order[p], row)] = u / s;
        }
    }

    // π(E_ab) = Σ_{d,l} J[:, (a,d,l)] J⁺[(b,d,l), :]
    let block = n * m;
    let mut rep = Vec::with_capacity(n * n);
    for a in 0..n {
        let ja = j_mat.view(0, a * block, r, block);
        for b in 0..n {
            let jb = j_pinv.view(b * block, 0, block, r);
            rep.push(&ja * &jb);
        }
    }

    // V e_l = J (1 ⊙ e_l) = Σ_i J[:, (i,i,l)]
    let mut v = CMatrix::zeros(r, m);
    for i in 0..n {
        let alpha = i * n + i;
        for l in 0..m {
            for row in 0..r {
                v[(row, l)] += j_mat[(row, alpha * m + l)];
            }
        }
    }

    Ok(Dilation {
        dil_dim: r,
        rep,
        v,
        source: t.clone(),
    })
}

/// GNS triple of the state `a ↦ tr(ρ a)`; `v` is the cyclic unit vector Ω.
pub fn gns(rho: &CMatrix, tol: &Tolerance) -> Result<Dilation> {
    if !rho.is_square() {
        return Err(Error::NotState(format!("{}x{} is not square", rho.rows(), rho.cols())));
    }
    let defect = rho.hermiticity_defect();
    if defect > tol.abs_eq {
        return Err(Error::NotState(format!("not Hermitian (defect {defect:.3e})")));
    }
    let trace = rho.trace().re;
    if (trace - 1.0).abs() > tol.abs_eq {
        return Err(Error::NotState(format!("trace is {trace}")));
    }
    let lowest = crate::numerics::min_eigenvalue(rho, tol)?;
    if lowest < -tol.psd_floor {
        return Err(Error::NotState(format!("negative eigenvalue {lowest:.3e}")));
    }
    let phi = CpMap::functional(rho, tol)?;
    stinespring_minimal(&phi, tol)
}

/// Residuals of the dilation invariants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationReport {
    /// `max ‖π(E_ij)π(E_kl) − δ_jk π(E_il)‖_max`.
    pub homomorphism: f64,
    /// `max ‖π(E_ij)* − π(E_ji)‖_max`.
    pub adjoint: f64,
    /// `max ‖V*π(E_ij)V − T(E_ij)‖_max`.
    pub reconstruction: f64,
    /// `dil_dim − rank span{π(E_ij) V e_k}`.
    pub minimality_defect: usize,
    /// `|‖V‖² − ‖T(1)‖|`.
    pub norm_match: f64,
}

impl DilationReport {
    pub fn max_residual(&self) -> f64 {
        self.homomorphism
            .max(self.adjoint)
            .max(self.reconstruction)
            .max(self.norm_match)
    }
}

pub fn verify_dilation(d: &Dilation, tol: &Tolerance) -> DilationReport {
    let n = d.algebra_dim();
    let mut homomorphism = 0.0f64;
    let mut adjoint = 0.0f64;
    let mut reconstruction = 0.0f64;
    let zero = CMatrix::zeros(d.dil_dim, d.dil_dim);
    for i in 0..n {
        for j in 0..n {
            let pij = d.rep_unit(i, j);
            adjoint = adjoint.max(pij.adjoint().max_diff(d.rep_unit(j, i)));
            let image = d
                .source
                .apply(&CMatrix::matrix_unit(n, i, j))
                .expect("matrix units have the domain shape");
            reconstruction = reconstruction.max((d.v.adjoint() * pij * &d.v).max_diff(&image));
            for k in 0..n {
                for l in 0..n {
                    let prod = pij * d.rep_unit(k, l);
                    let expected = if j == k { d.rep_unit(i, l) } else { &zero };
                    homomorphism = homomorphism.max(prod.max_diff(expected));
                }
            }
        }
    }
    let span_rank = rank(&d.spanning_matrix(), tol);
    let v_norm = d.v.op_norm();
    DilationReport {
        homomorphism,
        adjoint,
        reconstruction,
        minimality_defect: d.dil_dim.saturating_sub(span_rank),
        norm_match: (v_norm * v_norm - d.source.image_of_identity().op_norm()).abs(),
    }
}

/// The unitary `W` with `W π₁(a) V₁ = π₂(a) V₂`, solved on the spanning
/// sets of two minimal dilations of the same map.
pub fn intertwining_unitary(d1: &Dilation, d2: &Dilation, tol: &Tolerance) -> Result<CMatrix> {
    if d1.dil_dim != d2.dil_dim || d1.rep.len() != d2.rep.len() || d1.v.cols() != d2.v.cols() {
        return Err(Error::DimensionMismatch("dilations have different shapes".into()));
    }
    let w1 = d1.spanning_matrix();
    let w2 = d2.spanning_matrix();
    Ok(&w2 * crate::numerics::pinv(&w1, tol))
}

#[derive(Serialize, Deserialize)]
struct DilationRepr {
    dil_dim: usize,
    rep: BTreeMap<String, CMatrix>,
    v: CMatrix,
    source: CpMap,
}

impl Serialize for Dilation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.algebra_dim();
        let rep = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (format!("{i},{j}"), self.rep_unit(i, j).clone()))
            .collect();
        DilationRepr {
            dil_dim: self.dil_dim,
            rep,
            v: self.v.clone(),
            source: self.source.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Dilation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = DilationRepr::deserialize(deserializer)?;
        let n = repr.source.in_dim();
        let mut rep = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let key = format!("{i},{j}");
                let img = repr
                    .rep
                    .get(&key)
                    .ok_or_else(|| D::Error::custom(format!("rep is missing key {key:?}")))?;
                rep.push(img.clone());
            }
        }
        let d = Dilation::from_parts(repr.source, rep, repr.v).map_err(D::Error::custom)?;
        if d.dil_dim != repr.dil_dim {
            return Err(D::Error::custom("dil_dim disagrees with the intertwiner"));
        }
        Ok(d)
    }
}
