use std::collections::BTreeMap;

use num_complex::Complex64;

use super::instrument::Instrument;
use super::map::CpMap;
use crate::error::{Error, Result};
use crate::numerics::{svd, CMatrix, Tolerance, I, ONE};

/// Four factors with `L* B R = ¼ Σ_j i^j V_j* B V_j`:
/// `V₁ = L − iR`, `V₂ = L − R`, `V₃ = L + iR`, `V₄ = L + R`.
pub fn wittstock_decompose(l: &CMatrix, r: &CMatrix) -> Result<[CMatrix; 4]> {
    if l.shape() != r.shape() {
        return Err(Error::DimensionMismatch(format!(
            "L is {}x{} but R is {}x{}",
            l.rows(),
            l.cols(),
            r.rows(),
            r.cols()
        )));
    }
    let ir = r.scale(I);
    Ok([l - &ir, l - r, l + &ir, l + r])
}

/// `¼ Σ_j i^j V_j* B V_j`.
pub fn wittstock_reconstruct(parts: &[CMatrix; 4], b: &CMatrix) -> CMatrix {
    let mut phase = ONE;
    let mut acc = CMatrix::zeros(parts[0].cols(), parts[0].cols());
    for v in parts {
        phase *= I;
        acc += &(v.adjoint() * b * v).scale(phase);
    }
    acc.scale_real(0.25)
}

/// Unitary `W = [[D, √(1−DD*)], [√(1−D*D), −D*]]` whose top-left corner is
/// the contraction `D`.
pub fn egervary_unitary_dilation(d: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
    if !d.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square contraction, got {}x{}",
            d.rows(),
            d.cols()
        )));
    }
    let norm = d.op_norm();
    if norm > 1.0 + tol.abs_eq {
        return Err(Error::NotContraction { norm });
    }
    let n = d.rows();
    // both defect roots from one SVD `D = U Σ Y*`, so that
    // `D* √(1−DD*) = √(1−D*D) D*` holds to roundoff
    let f = svd(d);
    let u = f.u;
    let y = f.v_t.adjoint();
    let defect: Vec<f64> = f
        .values
        .iter()
        .map(|&s| (1.0 - s.min(1.0) * s.min(1.0)).sqrt())
        .collect();
    let root = CMatrix::diag_real(&defect);
    let top_right = &u * &root * u.adjoint();
    let bottom_left = &y * &root * y.adjoint();
    let mut w = CMatrix::zeros(2 * n, 2 * n);
    w.set_block(0, 0, d);
    w.set_block(0, n, &top_right);
    w.set_block(n, 0, &bottom_left);
    w.set_block(n, n, &(-d.adjoint()));
    Ok(w)
}

/// Instrument realized by a unitary on `C^k ⊗ C^d` (measured register
/// first, prepared in `|0⟩`), a computational-basis measurement of the
/// register and an outcome-dependent unitary correction:
/// `ρ ↦ Tr₁[(Π_a ⊗ V_a) U (|0⟩⟨0| ⊗ ρ) U* (Π_a ⊗ V_a*)]`.
#[derive(Clone, Debug)]
pub struct CircuitInstrument {
    pub instrument: Instrument,
    u: CMatrix,
    outcome_dim: usize,
    corrections: BTreeMap<String, CMatrix>,
    index: BTreeMap<String, usize>,
}

impl CircuitInstrument {
    pub fn unitary(&self) -> &CMatrix {
        &self.u
    }

    pub fn system_dim(&self) -> usize {
        self.u.rows() / self.outcome_dim
    }

    /// Heisenberg image on the full register space,
    /// `M ↦ U* (Π_a ⊗ V_a* M V_a) U`; a *-homomorphism.
    pub fn purified_adjoint(&self, label: &str, m: &CMatrix) -> Result<CMatrix> {
        let a = *self
            .index
            .get(label)
            .ok_or_else(|| Error::DimensionMismatch(format!("unknown outcome label {label:?}")))?;
        let d = self.system_dim();
        if m.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, system is {d}-dimensional",
                m.rows(),
                m.cols()
            )));
        }
        let v = &self.corrections[label];
        let pi = CMatrix::matrix_unit(self.outcome_dim, a, a);
        let inner = pi.kron(&(v.adjoint() * m * v));
        Ok(self.u.adjoint() * inner * &self.u)
    }

    /// `(⟨0| ⊗ 1) X (|0⟩ ⊗ 1)`: compresses a register-space operator to the
    /// system.
    pub fn compress(&self, x: &CMatrix) -> CMatrix {
        let d = self.system_dim();
        x.view(0, 0, d, d)
    }
}

pub fn instrument_from_circuit(
    u: &CMatrix,
    outcome_dim: usize,
    corrections: &BTreeMap<String, CMatrix>,
    tol: &Tolerance,
) -> Result<CircuitInstrument> {
    if outcome_dim == 0 || !u.is_square() || !u.rows().is_multiple_of(outcome_dim) {
        return Err(Error::DimensionMismatch(format!(
            "unitary of size {}x{} does not factor over an outcome register of size {outcome_dim}",
            u.rows(),
            u.cols()
        )));
    }
    let defect = u.unitarity_defect();
    if defect > tol.abs_eq {
        return Err(Error::NotUnitary { defect });
    }
    let d = u.rows() / outcome_dim;
    let labels: Vec<String> = (0..outcome_dim).map(|a| a.to_string()).collect();
    let mut arms = BTreeMap::new();
    let mut index = BTreeMap::new();
    for (a, label) in labels.iter().enumerate() {
        let v = corrections
            .get(label)
            .ok_or_else(|| Error::DimensionMismatch(format!("no correction unitary for outcome {label:?}")))?;
        if v.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "correction for outcome {label:?} is {}x{}, expected {d}x{d}",
                v.rows(),
                v.cols()
            )));
        }
        let defect = v.unitarity_defect();
        if defect > tol.abs_eq {
            return Err(Error::NotUnitary { defect });
        }
        // K_a = V_a (⟨a| ⊗ 1) U (|0⟩ ⊗ 1)
        let block = u.view(a * d, 0, d, d);
        arms.insert(label.clone(), CpMap::from_kraus(d, d, vec![v * block])?);
        index.insert(label.clone(), a);
    }
    if corrections.len() != outcome_dim {
        return Err(Error::DimensionMismatch(format!(
            "{} corrections for {outcome_dim} outcomes",
            corrections.len()
        )));
    }
    Ok(CircuitInstrument {
        instrument: Instrument::new(arms, tol)?,
        u: u.clone(),
        outcome_dim,
        corrections: corrections.clone(),
        index,
    })
}

/// Swap of two equal tensor factors.
pub fn swap(d: usize) -> CMatrix {
    let n = d * d;
    CMatrix::from_fn(n, n, |r, c| {
        let (i, j) = (c / d, c % d);
        if r == j * d + i {
            ONE
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ZERO;
    use crate::random::{random_matrix, random_unitary, seeded};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn identity_corrections(k: usize, d: usize) -> BTreeMap<String, CMatrix> {
        (0..k).map(|a| (a.to_string(), CMatrix::identity(d))).collect()
    }

    #[test]
    fn wittstock_trivial_cases() {
        let mut rng = seeded(2);
        let b = random_matrix(&mut rng, 3, 3);
        let id = CMatrix::identity(3);
        let parts = wittstock_decompose(&id, &id).unwrap();
        assert!(wittstock_reconstruct(&parts, &b).max_diff(&b) < 1e-14);
        let parts = wittstock_decompose(&id, &CMatrix::zeros(3, 3)).unwrap();
        assert!(wittstock_reconstruct(&parts, &b).max_abs() < 1e-14);
        assert!(wittstock_decompose(&id, &CMatrix::identity(2)).is_err());
    }

    #[test]
    fn wittstock_random_rectangular() {
        let mut rng = seeded(9);
        for _ in 0..10 {
            let l = random_matrix(&mut rng, 4, 2);
            let r = random_matrix(&mut rng, 4, 2);
            let b = random_matrix(&mut rng, 4, 4);
            let parts = wittstock_decompose(&l, &r).unwrap();
            let expected = l.adjoint() * &b * &r;
            assert!(wittstock_reconstruct(&parts, &b).max_diff(&expected) < 1e-12);
        }
    }

    #[test]
    fn egervary_zero_and_identity() {
        let w = egervary_unitary_dilation(&CMatrix::zeros(2, 2), &tol()).unwrap();
        let mut expected = CMatrix::zeros(4, 4);
        expected.set_block(0, 2, &CMatrix::identity(2));
        expected.set_block(2, 0, &CMatrix::identity(2));
        assert!(w.max_diff(&expected) < 1e-15);
        let w = egervary_unitary_dilation(&CMatrix::identity(2), &tol()).unwrap();
        assert!(w.unitarity_defect() < 1e-15);
        assert!(w.view(0, 0, 2, 2).max_diff(&CMatrix::identity(2)) < 1e-15);
        assert!(w.view(0, 2, 2, 2).max_abs() < 1e-7);
    }

    #[test]
    fn egervary_complex_diagonal() {
        let d = CMatrix::diag(&[Complex64::new(0.3, 0.0), Complex64::new(0.0, -0.8)]);
        let w = egervary_unitary_dilation(&d, &tol()).unwrap();
        assert!(w.unitarity_defect() < 1e-12);
        assert_eq!(w.view(0, 0, 2, 2), d);
    }

    #[test]
    fn egervary_rejects_expansion() {
        let d = CMatrix::identity(2).scale_real(1.5);
        assert!(matches!(
            egervary_unitary_dilation(&d, &tol()),
            Err(Error::NotContraction { .. })
        ));
    }

    #[test]
    fn circuit_identity_unitary() {
        let c = instrument_from_circuit(&CMatrix::identity(4), 2, &identity_corrections(2, 2), &tol()).unwrap();
        let id = CpMap::identity(2);
        assert!(c.instrument.arm("0").unwrap().choi().max_diff(id.choi()) < 1e-15);
        assert!(c.instrument.arm("1").unwrap().choi().max_abs() < 1e-15);
    }

    #[test]
    fn circuit_swap_measures_input() {
        let mut rng = seeded(12);
        let mut corr = BTreeMap::new();
        corr.insert("0".to_string(), random_unitary(&mut rng, 2));
        corr.insert("1".to_string(), random_unitary(&mut rng, 2));
        let c = instrument_from_circuit(&swap(2), 2, &corr, &tol()).unwrap();
        let rho = CMatrix::from_rows(&[
            &[ONE * 0.6, Complex64::new(0.1, 0.2)],
            &[Complex64::new(0.1, -0.2), ONE * 0.4],
        ]);
        for (a, label) in ["0", "1"].iter().enumerate() {
            let v = &corr[*label];
            let ket0 = CMatrix::basis_vector(2, 0);
            let expected = CMatrix::projector(&(v * &ket0)).scale(rho[(a, a)]);
            let got = c.instrument.arm(label).unwrap().apply(&rho).unwrap();
            assert!(got.max_diff(&expected) < 1e-14);
        }
    }

    #[test]
    fn purified_adjoint_is_multiplicative_and_compresses_to_arm_adjoint() {
        let mut rng = seeded(21);
        let u = random_unitary(&mut rng, 6);
        let corr: BTreeMap<String, CMatrix> = (0..3).map(|a| (a.to_string(), random_unitary(&mut rng, 2))).collect();
        let c = instrument_from_circuit(&u, 3, &corr, &tol()).unwrap();
        for label in ["0", "1", "2"] {
            let m1 = random_matrix(&mut rng, 2, 2);
            let m2 = random_matrix(&mut rng, 2, 2);
            let lhs = c.purified_adjoint(label, &(m1.adjoint() * &m2)).unwrap();
            let rhs = c.purified_adjoint(label, &m1).unwrap().adjoint() * c.purified_adjoint(label, &m2).unwrap();
            assert!(lhs.max_diff(&rhs) < 1e-10);
            let arm_adj = c.instrument.arm(label).unwrap().adjoint();
            let compressed = c.compress(&c.purified_adjoint(label, &m1).unwrap());
            assert!(compressed.max_diff(&arm_adj.apply(&m1).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn circuit_rejects_non_unitary() {
        let bad = CMatrix::identity(4).scale_real(2.0);
        assert!(matches!(
            instrument_from_circuit(&bad, 2, &identity_corrections(2, 2), &tol()),
            Err(Error::NotUnitary { .. })
        ));
        let mut corr = identity_corrections(2, 2);
        corr.insert("1".into(), CMatrix::from_rows(&[&[ONE, ONE], &[ZERO, ONE]]));
        assert!(instrument_from_circuit(&CMatrix::identity(4), 2, &corr, &tol()).is_err());
    }

    #[test]
    fn swap_is_an_involution() {
        let s = swap(3);
        assert!((&s * &s).max_diff(&CMatrix::identity(9)) < 1e-15);
    }
}
