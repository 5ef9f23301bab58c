use num_complex::Complex64;

use super::game::Game;
use super::strategy::TensorStrategy;
use crate::numerics::{CMatrix, ONE, ZERO};

/// CHSH: uniform inputs, win iff `a ⊕ b = x ∧ y`.
pub fn chsh() -> Game {
    Game::from_fn(vec![2, 2], vec![2, 2], |_| 0.25, |a, x| (a[0] ^ a[1]) == (x[0] & x[1])).expect("CHSH is well formed")
}

/// Mermin–GHZ: inputs drawn uniformly from {000, 011, 101, 110}, win iff
/// `a ⊕ b ⊕ c = x ∨ y ∨ z`.
pub fn mermin3() -> Game {
    Game::from_fn(
        vec![2, 2, 2],
        vec![2, 2, 2],
        |x| if (x[0] ^ x[1] ^ x[2]) == 0 { 0.25 } else { 0.0 },
        |a, x| (a[0] ^ a[1] ^ a[2]) == (x[0] | x[1] | x[2]),
    )
    .expect("Mermin game is well formed")
}

/// `{(1 + O)/2, (1 − O)/2}` for an observable `O` with eigenvalues ±1:
/// outcome 0 is the +1 eigenspace.
pub fn observable_povm(o: &CMatrix) -> Vec<CMatrix> {
    let id = CMatrix::identity(o.rows());
    vec![(&id + o).scale_real(0.5), (&id - o).scale_real(0.5)]
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_y() -> CMatrix {
    let i = Complex64::new(0.0, 1.0);
    CMatrix::from_rows(&[&[ZERO, -i], &[i, ZERO]])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
}

/// `(|00⟩ + |11⟩)/√2`.
pub fn bell_state() -> CMatrix {
    let s = ONE * std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::column(&[s, ZERO, ZERO, s])
}

/// `(|0…0⟩ + |1…1⟩)/√2` on `k` qubits.
pub fn ghz_state(k: usize) -> CMatrix {
    let n = 1 << k;
    let s = ONE * std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(n, 1, |i, _| if i == 0 || i == n - 1 { s } else { ZERO })
}

/// Bell state with `A₀ = Z`, `A₁ = X`, `B₀ = (Z+X)/√2`, `B₁ = (Z−X)/√2`;
/// wins CHSH with probability `cos²(π/8)`.
pub fn chsh_optimal_strategy() -> TensorStrategy {
    let (x, z) = (pauli_x(), pauli_z());
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let alice = vec![observable_povm(&z), observable_povm(&x)];
    let bob = vec![
        observable_povm(&(&z + &x).scale_real(r)),
        observable_povm(&(&z - &x).scale_real(r)),
    ];
    TensorStrategy {
        dims: vec![2, 2],
        povms: vec![alice, bob],
        state: bell_state(),
    }
}

/// GHZ state, every player measures `X` on input 0 and `Y` on input 1.
pub fn ghz_mermin_strategy() -> TensorStrategy {
    let family = vec![observable_povm(&pauli_x()), observable_povm(&pauli_y())];
    TensorStrategy {
        dims: vec![2, 2, 2],
        povms: vec![family.clone(), family.clone(), family],
        state: ghz_state(3),
    }
}

/// Predicate identically one (every answer wins).
pub fn trivial_game(inputs: Vec<usize>, outputs: Vec<usize>) -> Game {
    let nx: usize = inputs.iter().product();
    Game::from_fn(inputs, outputs, |_| 1.0 / nx as f64, |_, _| true).expect("well formed")
}
