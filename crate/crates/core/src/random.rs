//! Seeded generators for matrices, maps, instruments and strategies.
//!
//! Every generator takes an explicit RNG so that a `(seed, stream)` pair
//! fully determines its output.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cpmaps::{CpMap, Instrument};
use crate::numerics::{eig_hermitian, inv_sqrt_psd, CMatrix, Tolerance};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` of `seed`.
pub fn stream(seed: u64, index: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Ginibre matrix with i.i.d. standard complex Gaussian entries.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    random_matrix(rng, n, n).hermitian_part()
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase correction).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = random_matrix(rng, n, n).into_inner();
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = CMatrix::from_inner(q);
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            u[(i, j)] *= phase;
        }
    }
    u
}

/// Unit column vector, uniformly distributed on the sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let v = random_matrix(rng, n, 1);
    let norm = v.frobenius();
    v.scale_real(1.0 / norm)
}

/// Density matrix `GG*/tr(GG*)` with `G` of size `n × rank`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> CMatrix {
    let g = random_matrix(rng, n, rank.max(1));
    let p = &g * g.adjoint();
    let t = p.trace().re;
    p.scale_real(1.0 / t)
}

/// Contraction with operator norm drawn uniformly from `[0, 1]`; every fifth
/// draw (on average) sits exactly on the unit sphere of operator norm.
pub fn random_contraction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = random_matrix(rng, n, n);
    let target = if rng.random_bool(0.2) { 1.0 } else { rng.random::<f64>() };
    let norm = g.op_norm();
    g.scale_real(target / norm)
}

/// CP map with `kraus_count` Ginibre Kraus operators scaled to keep
/// `‖T(1)‖` of order one.
pub fn random_cp_map<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, kraus_count: usize) -> CpMap {
    let s = 1.0 / ((kraus_count.max(1) * n) as f64).sqrt();
    let kraus = (0..kraus_count)
        .map(|_| random_matrix(rng, m, n).scale_real(s))
        .collect();
    CpMap::from_kraus(n, m, kraus).expect("generated shapes agree")
}

/// Kraus operators of a random trace-preserving map `M_n → M_m`.
pub fn random_channel_kraus<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, kraus_count: usize) -> Vec<CMatrix> {
    let raw: Vec<CMatrix> = (0..kraus_count).map(|_| random_matrix(rng, m, n)).collect();
    let mut s = CMatrix::zeros(n, n);
    for k in &raw {
        s += &(k.adjoint() * k);
    }
    let fix = inv_sqrt_psd(&s, &Tolerance::default()).expect("Gram matrix is Hermitian");
    raw.iter().map(|k| k * &fix).collect()
}

pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, kraus_count: usize) -> CpMap {
    CpMap::from_kraus(n, m, random_channel_kraus(rng, n, m, kraus_count)).expect("generated shapes agree")
}

pub fn outcome_labels(count: usize) -> Vec<String> {
    (0..count).map(|a| a.to_string()).collect()
}

/// POVM `S^{-1/2} G_c S^{-1/2}` with `G_c` Wishart and `S = Σ_c G_c`.
pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, d: usize, outcomes: usize) -> BTreeMap<String, CMatrix> {
    let raw: Vec<CMatrix> = (0..outcomes)
        .map(|_| {
            let g = random_matrix(rng, d, d);
            &g * g.adjoint()
        })
        .collect();
    let s = CMatrix::sum(&raw).expect("at least one outcome");
    let fix = inv_sqrt_psd(&s, &Tolerance::default()).expect("sum is Hermitian");
    outcome_labels(outcomes)
        .into_iter()
        .zip(raw)
        .map(|(label, g)| (label, (&fix * g * &fix).hermitian_part()))
        .collect()
}

/// Projective measurement in a Haar-random basis; basis vector `j` is
/// assigned to outcome `j mod outcomes` after a random shuffle.
pub fn random_projective_povm<R: Rng + ?Sized>(rng: &mut R, d: usize, outcomes: usize) -> BTreeMap<String, CMatrix> {
    let u = random_unitary(rng, d);
    let mut order: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut effects = vec![CMatrix::zeros(d, d); outcomes];
    for (slot, &col) in order.iter().enumerate() {
        let v = u.view(0, col, d, 1);
        effects[slot % outcomes] += &CMatrix::projector(&v);
    }
    outcome_labels(outcomes).into_iter().zip(effects).collect()
}

/// Instrument obtained by measuring the environment of a channel
/// `ρ ↦ Σ_e K_e ρ K_e*` with the POVM `P_b`: arm `b` has Kraus operators
/// `Σ_e conj(w_t[e]) K_e` where `P_b = Σ_t w_t w_t*`. All such instruments
/// share the summed channel.
pub fn environment_instrument(kraus: &[CMatrix], env_povm: &BTreeMap<String, CMatrix>) -> Instrument {
    let tol = Tolerance::default();
    let (n, m) = (kraus[0].cols(), kraus[0].rows());
    let mut arms = BTreeMap::new();
    for (label, p) in env_povm {
        let e = eig_hermitian(p, &tol).expect("POVM effects are Hermitian");
        let mut arm_kraus = Vec::new();
        for (t, &lambda) in e.values.iter().enumerate() {
            if lambda <= 1e-14 {
                continue;
            }
            let w = e.vector(t).scale_real(lambda.sqrt());
            let mut l = CMatrix::zeros(m, n);
            for (idx, k) in kraus.iter().enumerate() {
                l += &k.scale(w[(idx, 0)].conj());
            }
            arm_kraus.push(l);
        }
        arms.insert(label.clone(), CpMap::from_kraus(n, m, arm_kraus).expect("shapes agree"));
    }
    Instrument::from_arms(arms).expect("arms share a shape")
}

/// Random instrument on `M_d` with a two-dimensional environment.
pub fn random_instrument<R: Rng + ?Sized>(rng: &mut R, d: usize, outcomes: usize) -> Instrument {
    let kraus = random_channel_kraus(rng, d, d, 2);
    let povm = random_povm(rng, 2, outcomes);
    environment_instrument(&kraus, &povm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::identity_defect;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = random_matrix(&mut stream(7, 0), 2, 2);
        let b = random_matrix(&mut stream(7, 0), 2, 2);
        let c = random_matrix(&mut stream(7, 1), 2, 2);
        assert_eq!(a, b);
        assert!(a.max_diff(&c) > 1e-6);
    }

    #[test]
    fn unitary_and_povm_contracts() {
        let mut rng = seeded(1);
        assert!(random_unitary(&mut rng, 5).unitarity_defect() < 1e-12);
        let povm = random_povm(&mut rng, 3, 4);
        assert!(identity_defect(&CMatrix::sum(povm.values()).unwrap()) < 1e-12);
        let pvm = random_projective_povm(&mut rng, 3, 2);
        assert!(identity_defect(&CMatrix::sum(pvm.values()).unwrap()) < 1e-12);
        for p in pvm.values() {
            assert!((p * p).max_diff(p) < 1e-12);
        }
    }

    #[test]
    fn contraction_norm_at_most_one() {
        let mut rng = seeded(3);
        for _ in 0..20 {
            assert!(random_contraction(&mut rng, 3).op_norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn environment_instruments_share_their_channel() {
        let mut rng = seeded(5);
        let kraus = random_channel_kraus(&mut rng, 2, 2, 2);
        let a = environment_instrument(&kraus, &random_povm(&mut rng, 2, 2));
        let b = environment_instrument(&kraus, &random_povm(&mut rng, 2, 3));
        assert!(a.summed().choi().max_diff(b.summed().choi()) < 1e-12);
        assert!(a.trace_preservation_defect() < 1e-12);
    }
}
