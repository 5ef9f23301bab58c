use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, min_eigenvalue, CMatrix, Tolerance};

/// Completely positive map `M_n → M_m`, `a ↦ Σ_k K_k a K_k*`.
///
/// The Choi matrix `Σ_{jj'} E_jj' ⊗ T(E_jj')` is cached; its entry at
/// `(j·m + k, j'·m + l)` is `T(E_jj')[k, l]`.
#[derive(Clone, Debug)]
pub struct CpMap {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<CMatrix>,
    choi: CMatrix,
}

impl CpMap {
    pub fn from_kraus(in_dim: usize, out_dim: usize, kraus: Vec<CMatrix>) -> Result<Self> {
        if let Some(k) = kraus.iter().find(|k| k.shape() != (out_dim, in_dim)) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator is {}x{}, expected {out_dim}x{in_dim}",
                k.rows(),
                k.cols()
            )));
        }
        if kraus.iter().any(|k| !k.is_finite()) {
            return Err(Error::DimensionMismatch("non-finite Kraus entry".into()));
        }
        let choi = choi_of(in_dim, out_dim, &kraus);
        Ok(Self {
            in_dim,
            out_dim,
            kraus,
            choi,
        })
    }

    /// Kraus extraction from a Choi matrix. Eigenvalues in `(−psd_floor, 0)`
    /// are clipped; anything more negative is a genuine CP violation.
    pub fn from_choi(in_dim: usize, out_dim: usize, choi: &CMatrix, tol: &Tolerance) -> Result<Self> {
        let n = in_dim * out_dim;
        if choi.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix is {}x{}, expected {n}x{n}",
                choi.rows(),
                choi.cols()
            )));
        }
        let e = eig_hermitian(choi, tol)?;
        let lowest = e.min();
        if lowest < -tol.psd_floor {
            return Err(Error::NotCP { min_eigenvalue: lowest });
        }
        let cut = tol.rank_cut * e.max().max(0.0);
        let mut kraus = Vec::new();
        for (idx, &lambda) in e.values.iter().enumerate() {
            if lambda <= cut || lambda <= 0.0 {
                continue;
            }
            let s = lambda.sqrt();
            kraus.push(CMatrix::from_fn(out_dim, in_dim, |k, j| {
                e.vectors[(j * out_dim + k, idx)] * s
            }));
        }
        Self::from_kraus(in_dim, out_dim, kraus)
    }

    /// Tabulates a linear map on matrix units and extracts Kraus operators.
    pub fn from_linear_fn(
        in_dim: usize,
        out_dim: usize,
        f: impl Fn(&CMatrix) -> CMatrix,
        tol: &Tolerance,
    ) -> Result<Self> {
        let n = in_dim * out_dim;
        let mut choi = CMatrix::zeros(n, n);
        for j in 0..in_dim {
            for jp in 0..in_dim {
                let image = f(&CMatrix::matrix_unit(in_dim, j, jp));
                if image.shape() != (out_dim, out_dim) {
                    return Err(Error::DimensionMismatch(format!(
                        "map image is {}x{}, expected {out_dim}x{out_dim}",
                        image.rows(),
                        image.cols()
                    )));
                }
                choi.set_block(j * out_dim, jp * out_dim, &image);
            }
        }
        Self::from_choi(in_dim, out_dim, &choi, tol)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_kraus(n, n, vec![CMatrix::identity(n)]).expect("shapes agree")
    }

    pub fn zero(in_dim: usize, out_dim: usize) -> Self {
        Self::from_kraus(in_dim, out_dim, vec![]).expect("shapes agree")
    }

    /// `a ↦ U a U*`.
    pub fn conjugation(u: &CMatrix) -> Self {
        Self::from_kraus(u.cols(), u.rows(), vec![u.clone()]).expect("shapes agree")
    }

    /// Completely depolarizing map `a ↦ tr(a)·I/n` on `M_n`.
    pub fn depolarizing(n: usize) -> Self {
        let s = 1.0 / (n as f64).sqrt();
        let kraus = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| CMatrix::matrix_unit(n, i, j).scale_real(s))
            .collect();
        Self::from_kraus(n, n, kraus).expect("shapes agree")
    }

    /// `a ↦ tr(ρ a)` as a map into `M_1`; Kraus factors `√λ ⟨v|`.
    pub fn functional(rho: &CMatrix, tol: &Tolerance) -> Result<Self> {
        let n = rho.rows();
        let e = eig_hermitian(rho, tol)?;
        if e.min() < -tol.psd_floor {
            return Err(Error::NotCP {
                min_eigenvalue: e.min(),
            });
        }
        let cut = tol.rank_cut * e.max().max(0.0);
        let kraus = (0..n)
            .filter(|&k| e.values[k] > cut && e.values[k] > 0.0)
            .map(|k| e.vector(k).adjoint().scale_real(e.values[k].sqrt()))
            .collect();
        Self::from_kraus(n, 1, kraus)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    pub fn kraus_rank(&self, tol: &Tolerance) -> usize {
        crate::numerics::rank(&self.choi, tol)
    }

    pub fn apply(&self, a: &CMatrix) -> Result<CMatrix> {
        if a.shape() != (self.in_dim, self.in_dim) {
            return Err(Error::DimensionMismatch(format!(
                "input is {}x{}, map acts on M_{}",
                a.rows(),
                a.cols(),
                self.in_dim
            )));
        }
        let mut out = CMatrix::zeros(self.out_dim, self.out_dim);
        for k in &self.kraus {
            out += &(k * a * k.adjoint());
        }
        Ok(out)
    }

    /// Image of the unit `T(1)`.
    pub fn image_of_identity(&self) -> CMatrix {
        self.apply(&CMatrix::identity(self.in_dim))
            .expect("identity has the domain shape")
    }

    /// Hilbert–Schmidt dual: `tr(T*(m)·ρ) = tr(m·T(ρ))`.
    pub fn adjoint(&self) -> Self {
        let kraus = self.kraus.iter().map(CMatrix::adjoint).collect();
        Self::from_kraus(self.out_dim, self.in_dim, kraus).expect("shapes agree")
    }

    /// `self ∘ inner`, i.e. `a ↦ self(inner(a))`.
    pub fn compose(&self, inner: &CpMap) -> Result<Self> {
        if inner.out_dim != self.in_dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose M_{} → M_{} after M_{} → M_{}",
                self.in_dim, self.out_dim, inner.in_dim, inner.out_dim
            )));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * inner.kraus.len());
        for a in &self.kraus {
            for b in &inner.kraus {
                kraus.push(a * b);
            }
        }
        Self::from_kraus(inner.in_dim, self.out_dim, kraus)
    }

    /// `c·T` for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c >= 0.0, "CP maps only scale by nonnegative reals");
        let s = c.sqrt();
        let kraus = self.kraus.iter().map(|k| k.scale_real(s)).collect();
        Self::from_kraus(self.in_dim, self.out_dim, kraus).expect("shapes agree")
    }

    /// Pointwise sum (Kraus lists concatenated).
    pub fn sum(&self, other: &CpMap) -> Result<Self> {
        self.check_same_dims(other)?;
        let mut kraus = self.kraus.clone();
        kraus.extend(other.kraus.iter().cloned());
        Self::from_kraus(self.in_dim, self.out_dim, kraus)
    }

    /// Sum of equally shaped maps; `None` for an empty list.
    pub fn sum_all<'a>(maps: impl IntoIterator<Item = &'a CpMap>) -> Result<Option<Self>> {
        let mut iter = maps.into_iter();
        let Some(first) = iter.next() else {
            return Ok(None);
        };
        let mut acc = first.clone();
        for m in iter {
            acc = acc.sum(m)?;
        }
        Ok(Some(acc))
    }

    /// Drops redundant Kraus operators by re-extracting them from the Choi
    /// matrix.
    pub fn compressed(&self, tol: &Tolerance) -> Result<Self> {
        Self::from_choi(self.in_dim, self.out_dim, &self.choi, tol)
    }

    /// `‖T*(1) − 1‖_max`; zero exactly for trace-preserving maps.
    pub fn trace_preservation_defect(&self) -> f64 {
        let mut s = CMatrix::zeros(self.in_dim, self.in_dim);
        for k in &self.kraus {
            s += &(k.adjoint() * k);
        }
        s.max_diff(&CMatrix::identity(self.in_dim))
    }

    /// `‖T(1) − 1‖_max`.
    pub fn unitality_defect(&self) -> f64 {
        self.image_of_identity().max_diff(&CMatrix::identity(self.out_dim))
    }

    pub(crate) fn check_same_dims(&self, other: &CpMap) -> Result<()> {
        if (self.in_dim, self.out_dim) != (other.in_dim, other.out_dim) {
            return Err(Error::DimensionMismatch(format!(
                "maps M_{} → M_{} and M_{} → M_{} differ in shape",
                self.in_dim, self.out_dim, other.in_dim, other.out_dim
            )));
        }
        Ok(())
    }
}

fn choi_of(in_dim: usize, out_dim: usize, kraus: &[CMatrix]) -> CMatrix {
    let n = in_dim * out_dim;
    let mut choi = CMatrix::zeros(n, n);
    for k in kraus {
        let v = CMatrix::from_fn(n, 1, |idx, _| k[(idx % out_dim, idx / out_dim)]);
        choi += &(&v * v.adjoint());
    }
    choi
}

/// Smallest eigenvalue of `choi(r) − choi(s)`.
pub fn domination_margin(r: &CpMap, s: &CpMap, tol: &Tolerance) -> Result<f64> {
    r.check_same_dims(s)?;
    let diff = r.choi() - s.choi();
    min_eigenvalue(&diff, &tol.loosened(10.0))
}

/// `s ≤ r` in the completely positive order.
pub fn dominates(r: &CpMap, s: &CpMap, tol: &Tolerance) -> Result<bool> {
    Ok(domination_margin(r, s, tol)? >= -tol.psd_floor)
}

pub fn apply(t: &CpMap, a: &CMatrix) -> Result<CMatrix> {
    t.apply(a)
}

pub fn adjoint(t: &CpMap) -> CpMap {
    t.adjoint()
}

/// `s1 ∘ s2`.
pub fn compose(s1: &CpMap, s2: &CpMap) -> Result<CpMap> {
    s1.compose(s2)
}

#[derive(Serialize, Deserialize)]
struct CpMapRepr {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<CMatrix>,
}

impl Serialize for CpMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CpMapRepr {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            kraus: self.kraus.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CpMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = CpMapRepr::deserialize(deserializer)?;
        CpMap::from_kraus(repr.in_dim, repr.out_dim, repr.kraus).map_err(serde::de::Error::custom)
    }
}
