use nalgebra::DMatrix;
use num_complex::Complex64;

use super::matrix::{CMatrix, ZERO};
use super::tolerance::Tolerance;
use crate::error::{Error, Result};

/// Hermitian eigendecomposition.
#[derive(Clone, Debug)]
pub struct Eigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Columns are the eigenvectors matching `values`.
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> CMatrix {
        self.vectors.view(0, k, self.vectors.rows(), 1)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// `Σ f(λ_k) v_k v_k*`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.vectors.rows();
        let mut scaled = self.vectors.clone();
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            for i in 0..n {
                scaled[(i, k)] *= w;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// Scale-aware symmetry check shared by the spectral routines.
fn check_hermitian(a: &CMatrix, tol: &Tolerance) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let defect = a.hermiticity_defect();
    if defect > tol.abs_eq * a.max_abs().max(1.0) {
        return Err(Error::NotHermitian { defect });
    }
    Ok(())
}

fn phase_fix(v: &mut [Complex64]) {
    let peak = v.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if peak == 0.0 {
        return;
    }
    // first component that is not roundoff relative to the largest one
    if let Some(lead) = v.iter().find(|z| z.norm() > 1e-8 * peak).copied() {
        let phase = lead.conj() / lead.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

/// Sort key placing larger components first; components are snapped to a
/// grid of width `eps` so the order is total.
fn lexicographic_key(v: &[Complex64], eps: f64) -> Vec<i64> {
    v.iter()
        .flat_map(|z| [z.re, z.im])
        .map(|p| -((p / eps).round() as i64))
        .collect()
}

/// Eigenvalues sorted descending; eigenvectors phase-fixed so the first
/// significant component is real positive, ties (|Δλ| ≤ abs_eq) ordered
/// lexicographically by eigenvector, larger components first.
pub fn eig_hermitian(a: &CMatrix, tol: &Tolerance) -> Result<Eigen> {
    check_hermitian(a, tol)?;
    let n = a.rows();
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let herm = a.hermitian_part();
    let eig = herm.into_inner().symmetric_eigen();
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::NoConvergence);
    }
    let mut pairs: Vec<(f64, Vec<Complex64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<Complex64> = eig.eigenvectors.column(k).iter().copied().collect();
            phase_fix(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));

    // reorder within clusters of numerically equal eigenvalues
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (pairs[end - 1].0 - pairs[end].0).abs() <= tol.abs_eq {
            end += 1;
        }
        pairs[start..end].sort_by_cached_key(|x| lexicographic_key(&x.1, tol.abs_eq));
        start = end;
    }

    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = CMatrix::from_fn(n, n, |i, k| pairs[k].1[i]);
    Ok(Eigen { values, vectors })
}

/// Eigenvalues only, descending.
pub fn eigenvalues_hermitian(a: &CMatrix, tol: &Tolerance) -> Result<Vec<f64>> {
    check_hermitian(a, tol)?;
    let mut values: Vec<f64> = a
        .hermitian_part()
        .into_inner()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(values)
}

/// Smallest eigenvalue of a Hermitian matrix (0 for the empty matrix).
pub fn min_eigenvalue(a: &CMatrix, tol: &Tolerance) -> Result<f64> {
    Ok(eigenvalues_hermitian(a, tol)?.last().copied().unwrap_or(0.0))
}

/// PSD test against `psd_floor`.
pub fn is_psd(a: &CMatrix, tol: &Tolerance) -> bool {
    matches!(min_eigenvalue(a, tol), Ok(m) if m >= -tol.psd_floor)
}

/// Thin SVD `A = U diag(σ) V*` with `σ` descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub values: Vec<f64>,
    pub v_t: CMatrix,
}

impl Svd {
    fn reconstruct(&self) -> CMatrix {
        let sigma = CMatrix::diag_real(&self.values);
        &self.u * sigma * &self.v_t
    }
}

fn raw_svd(m: DMatrix<Complex64>, strict: bool) -> Option<Svd> {
    let svd = if strict {
        m.try_svd(true, true, f64::EPSILON, 10_000)?
    } else {
        m.svd(true, true)
    };
    let u = CMatrix::from_inner(svd.u?);
    let v_t = CMatrix::from_inner(svd.v_t?);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    Some(Svd {
        u: CMatrix::from_fn(u.rows(), order.len(), |i, k| u[(i, order[k])]),
        values: order.iter().map(|&k| svd.singular_values[k]).collect(),
        v_t: CMatrix::from_fn(order.len(), v_t.cols(), |k, j| v_t[(order[k], j)]),
    })
}

/// Thin SVD, computed on the tall orientation and checked against `a`.
/// The default nalgebra iteration can stall on wide complex matrices with
/// repeated singular values and return factors that do not reproduce `a`,
/// so a failed check retries with a strict convergence threshold.
pub fn svd(a: &CMatrix) -> Svd {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return Svd {
            u: CMatrix::zeros(r, 0),
            values: vec![],
            v_t: CMatrix::zeros(0, c),
        };
    }
    let wide = r < c;
    let tall = if wide { a.adjoint() } else { a.clone() };
    let bound = 1e-12 * tall.max_abs().max(1.0) * (r.max(c) as f64);
    let mut best: Option<(f64, Svd)> = None;
    for strict in [false, true] {
        if let Some(f) = raw_svd(tall.inner().clone(), strict) {
            let err = f.reconstruct().max_diff(&tall);
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, f));
            }
            if err <= bound {
                break;
            }
        }
    }
    let (_, f) = best.expect("at least one SVD attempt returns factors");
    if wide {
        Svd {
            u: f.v_t.adjoint(),
            values: f.values,
            v_t: f.u.adjoint(),
        }
    } else {
        f
    }
}

/// Singular values, descending.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    svd(a).values
}

/// Numerical rank: singular values above `rank_cut · σ_max`.
pub fn rank(a: &CMatrix, tol: &Tolerance) -> usize {
    let s = singular_values(a);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol.rank_cut * top).count()
}

/// Moore–Penrose pseudo-inverse; singular values at or below
/// `rank_cut · σ_max` are treated as zero.
pub fn pinv(a: &CMatrix, tol: &Tolerance) -> CMatrix {
    let (r, c) = a.shape();
    let f = svd(a);
    let top = f.values.first().copied().unwrap_or(0.0);
    let mut out = CMatrix::zeros(c, r);
    if top == 0.0 {
        return out;
    }
    for (k, &s) in f.values.iter().enumerate() {
        if s <= tol.rank_cut * top {
            continue;
        }
        let inv = 1.0 / s;
        for i in 0..c {
            let vi = f.v_t[(k, i)].conj() * inv;
            for j in 0..r {
                out[(i, j)] += vi * f.u[(j, k)].conj();
            }
        }
    }
    out
}

/// Square root of a PSD matrix; eigenvalues below zero are clipped.
pub fn sqrt_psd(a: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
    let e = eig_hermitian(a, tol)?;
    Ok(e.reconstruct_with(|x| x.max(0.0).sqrt()))
}

/// Inverse square root on the support of a PSD matrix (zero elsewhere).
pub fn inv_sqrt_psd(a: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
    let e = eig_hermitian(a, tol)?;
    let cut = tol.rank_cut * e.max().max(0.0);
    Ok(e.reconstruct_with(|x| if x > cut { 1.0 / x.sqrt() } else { 0.0 }))
}

/// Trace out every subsystem not listed in `keep`; kept factors stay in
/// their original order.
pub fn partial_trace(a: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if !a.is_square() || a.rows() != total {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but subsystem dims {:?} multiply to {total}",
            a.rows(),
            a.cols(),
            dims
        )));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch(format!(
            "subsystem index {bad} out of range for {} factors",
            dims.len()
        )));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !kept.contains(i)).collect();
    let kept_dim: usize = kept.iter().map(|&i| dims[i]).product();
    let traced_dim: usize = traced.iter().map(|&i| dims[i]).product();

    // strides of the full row-major multi-index
    let mut stride = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * dims[i + 1];
    }
    let offset = |subsystems: &[usize], mut flat: usize| -> usize {
        let mut off = 0;
        for &s in subsystems.iter().rev() {
            off += (flat % dims[s]) * stride[s];
            flat /= dims[s];
        }
        off
    };
    let kept_off: Vec<usize> = (0..kept_dim).map(|k| offset(&kept, k)).collect();
    let traced_off: Vec<usize> = (0..traced_dim).map(|t| offset(&traced, t)).collect();

    let mut out = CMatrix::zeros(kept_dim, kept_dim);
    for (r, &ro) in kept_off.iter().enumerate() {
        for (c, &co) in kept_off.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &traced_off {
                acc += a[(ro + t, co + t)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Orthonormal (Hilbert–Schmidt) basis of `{X : [X, A] = 0 for all A in ops}`.
/// The basis is Hermitian whenever `ops` is closed under adjoints.
pub fn commutant_basis(ops: &[CMatrix], dim: usize, tol: &Tolerance) -> Result<Vec<CMatrix>> {
    if let Some(op) = ops.iter().find(|op| op.shape() != (dim, dim)) {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, expected {dim}x{dim}",
            op.rows(),
            op.cols()
        )));
    }
    let n2 = dim * dim;
    // Gram of the stacked commutator map X ↦ ([X, A_k])_k in the matrix-unit basis
    let mut gram = CMatrix::zeros(n2, n2);
    for a in ops {
        let mut map = CMatrix::zeros(n2, n2);
        for p in 0..dim {
            for q in 0..dim {
                let col = p * dim + q;
                // (E_pq A − A E_pq)[i,j] = δ_ip A[q,j] − A[i,p] δ_qj
                for j in 0..dim {
                    map[(p * dim + j, col)] += a[(q, j)];
                }
                for i in 0..dim {
                    map[(i * dim + q, col)] -= a[(i, p)];
                }
            }
        }
        gram += &(map.adjoint() * &map);
    }
    let e = eig_hermitian(&gram, &Tolerance::default().loosened(1e3))?;
    let scale = e.max().max(1.0);
    let cut = tol.abs_eq.max(tol.rank_cut) * scale;
    let mut basis = Vec::new();
    for k in 0..n2 {
        if e.values[k] <= cut {
            let v = e.vector(k);
            basis.push(CMatrix::from_fn(dim, dim, |i, j| v[(i * dim + j, 0)]));
        }
    }
    if basis.is_empty() {
        return Ok(basis);
    }
    // Hermitian generators of the same span, re-orthonormalized
    let mut herm: Vec<CMatrix> = Vec::new();
    for b in &basis {
        herm.push(b.hermitian_part());
        herm.push(b.scale(Complex64::new(0.0, -1.0)).hermitian_part());
    }
    Ok(orthonormalize(&herm, basis.len(), tol))
}

/// Gram–Schmidt in the Hilbert–Schmidt inner product, stopping at `limit`.
fn orthonormalize(items: &[CMatrix], limit: usize, tol: &Tolerance) -> Vec<CMatrix> {
    let mut out: Vec<CMatrix> = Vec::new();
    for item in items {
        if out.len() == limit {
            break;
        }
        let mut w = item.clone();
        for _ in 0..2 {
            for b in &out {
                let c = hs_inner(b, &w);
                w -= &b.scale(c);
            }
        }
        let norm = w.frobenius();
        if norm > tol.abs_eq.max(1e-7) {
            out.push(w.scale_real(1.0 / norm));
        }
    }
    out
}

/// `tr(a* b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            acc += a[(i, j)].conj() * b[(i, j)];
        }
    }
    acc
}

/// Orthogonal projector onto the eigenspace of a Hermitian matrix whose
/// eigenvalues exceed `threshold`.
pub fn spectral_projector_above(a: &CMatrix, threshold: f64, tol: &Tolerance) -> Result<CMatrix> {
    let e = eig_hermitian(a, tol)?;
    Ok(e.reconstruct_with(|x| if x > threshold { 1.0 } else { 0.0 }))
}

/// Orthonormal basis (as columns) of the column space.
pub fn range_basis(a: &CMatrix, tol: &Tolerance) -> CMatrix {
    let r = a.rows();
    let f = svd(a);
    let top = f.values.first().copied().unwrap_or(0.0);
    let keep = f
        .values
        .iter()
        .filter(|&&s| top > 0.0 && s > tol.rank_cut * top)
        .count();
    CMatrix::from_fn(r, keep, |i, j| f.u[(i, j)])
}

/// `‖a − I‖_max`.
pub fn identity_defect(a: &CMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    a.max_diff(&CMatrix::identity(a.rows()))
}
