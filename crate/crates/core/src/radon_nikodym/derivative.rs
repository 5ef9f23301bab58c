use serde::{Deserialize, Serialize};

use crate::cpmaps::{domination_margin, CpMap};
use crate::dilation::{gram_matrix, Dilation};
use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, pinv, CMatrix, Tolerance};

/// Derivative `D ∈ π(A)′` with `S(a) = V* D π(a) V`.
#[derive(Clone, Debug)]
pub struct RnDerivative<'a> {
    pub d: CMatrix,
    pub dilation: &'a Dilation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `max ‖[D, π(E_ij)]‖`.
    pub commutator: f64,
    /// `max ‖V* D π(E_ij) V − S(E_ij)‖_max`.
    pub reconstruction: f64,
}

impl RnDerivative<'_> {
    pub fn verify(&self, s: &CpMap, tol: &Tolerance) -> RnReport {
        let dil = self.dilation;
        let n = dil.algebra_dim();
        let e = eig_hermitian(&self.d.hermitian_part(), tol).expect("hermitian part is Hermitian");
        let mut commutator = 0.0f64;
        let mut reconstruction = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let p = dil.rep_unit(i, j);
                commutator = commutator.max(self.d.commutator(p).op_norm());
                let got = dil.v.adjoint() * &self.d * p * &dil.v;
                let want = s
                    .apply(&CMatrix::matrix_unit(n, i, j))
                    .expect("matrix units have the domain shape");
                reconstruction = reconstruction.max(got.max_diff(&want));
            }
        }
        RnReport {
            min_eigenvalue: e.min(),
            max_eigenvalue: e.max(),
            commutator,
            reconstruction,
        }
    }
}

/// Radon–Nikodym derivative of `s ≤ dil.source` on a minimal dilation,
/// solved from the pairings `⟨π(b)Vg, D π(a)Vh⟩ = ⟨g, S(b*a)h⟩`.
pub fn rn_derivative<'a>(s: &CpMap, dil: &'a Dilation, tol: &Tolerance) -> Result<RnDerivative<'a>> {
    let margin = domination_margin(&dil.source, s, tol)?;
    if margin < -tol.psd_floor {
        return Err(Error::NotDominated { min_eigenvalue: margin });
    }
    let d = solve_derivative(s, dil, tol)?;
    Ok(RnDerivative { d, dilation: dil })
}

/// Derivative without the domination pre-check; the spectral band check
/// still applies.
pub(crate) fn solve_derivative(s: &CpMap, dil: &Dilation, tol: &Tolerance) -> Result<CMatrix> {
    let w = dil.spanning_matrix();
    let w_pinv = pinv(&w, tol);
    let target = gram_matrix(s);
    let raw = (w_pinv.adjoint() * target * &w_pinv).hermitian_part();
    clip_unit_interval(&raw, tol)
}

/// Clips a spectrum within `[−psd_floor, 1 + psd_floor]` to `[0, 1]`.
fn clip_unit_interval(d: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
    if d.rows() == 0 {
        return Ok(d.clone());
    }
    let e = eig_hermitian(d, &tol.loosened(10.0))?;
    let (min, max) = (e.min(), e.max());
    if min < -tol.psd_floor || max > 1.0 + tol.psd_floor {
        return Err(Error::RangeViolation { min, max });
    }
    if min >= 0.0 && max <= 1.0 {
        return Ok(d.clone());
    }
    Ok(e.reconstruct_with(|x| x.clamp(0.0, 1.0)).hermitian_part())
}

/// Derivatives of a finite decomposition `Σ_i S_i = R`; they sum to the
/// identity on the dilation space.
pub fn rn_decomposition<'a>(parts: &[CpMap], dil: &'a Dilation, tol: &Tolerance) -> Result<Vec<RnDerivative<'a>>> {
    let total = CpMap::sum_all(parts.iter())?.ok_or_else(|| Error::DimensionMismatch("empty decomposition".into()))?;
    total.check_same_dims(&dil.source)?;
    let defect = total.choi().max_diff(dil.source.choi());
    if defect > tol.abs_eq {
        return Err(Error::SumMismatch { defect });
    }
    for part in parts {
        let lowest = crate::numerics::min_eigenvalue(part.choi(), &tol.loosened(10.0))?;
        if lowest < -tol.psd_floor {
            return Err(Error::NotCP { min_eigenvalue: lowest });
        }
    }
    parts.iter().map(|s| rn_derivative(s, dil, tol)).collect()
}

/// Largest `‖[m, T(E_ij)]‖_max` and `‖[m, T(E_ij)*]‖_max`.
pub fn commutant_defect(m: &CMatrix, t: &CpMap) -> f64 {
    let n = t.in_dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let img = t
                .apply(&CMatrix::matrix_unit(n, i, j))
                .expect("matrix units have the domain shape");
            worst = worst
                .max(m.commutator(&img).max_abs())
                .max(m.commutator(&img.adjoint()).max_abs());
        }
    }
    worst
}

/// Lift of `m ∈ T(A)′ ∩ (T(A)*)′` to `m̄ ∈ π(A)′`, acting as
/// `a ⊙ h ↦ a ⊙ m h` on the quotient.
pub fn lift(m: &CMatrix, dil: &Dilation, tol: &Tolerance) -> Result<CMatrix> {
    let h = dil.source.out_dim();
    if m.shape() != (h, h) {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, the dilated map acts into M_{h}",
            m.rows(),
            m.cols()
        )));
    }
    let defect = commutant_defect(m, &dil.source);
    if defect > 100.0 * tol.abs_eq {
        return Err(Error::NotInCommutant { defect });
    }
    Ok(lift_unchecked(m, dil, tol))
}

pub(crate) fn lift_unchecked(m: &CMatrix, dil: &Dilation, tol: &Tolerance) -> CMatrix {
    let w = dil.spanning_matrix();
    let w_pinv = pinv(&w, tol);
    let amplified = CMatrix::identity(dil.rep.len()).kron(m);
    w * amplified * w_pinv
}
