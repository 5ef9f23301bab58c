//! Dense complex linear algebra with an explicit tolerance policy.

mod decomp;
mod matrix;
mod tolerance;

pub use decomp::{
    commutant_basis, eig_hermitian, eigenvalues_hermitian, hs_inner, identity_defect, inv_sqrt_psd, is_psd,
    min_eigenvalue, partial_trace, pinv, range_basis, rank, singular_values, spectral_projector_above, sqrt_psd, svd,
    Eigen, Svd,
};
pub use matrix::{kron, CMatrix, I, ONE, ZERO};
pub use tolerance::Tolerance;
