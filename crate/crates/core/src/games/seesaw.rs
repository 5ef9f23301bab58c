use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::game::{unflatten, Game};
use super::strategy::{PovmFamily, TensorStrategy};
use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, partial_trace, spectral_projector_above, sqrt_psd, CMatrix, Tolerance};
use crate::random::{outcome_labels, random_projective_povm, stream};

pub const SEESAW_GAIN_STOP: f64 = 1e-10;
pub const SEESAW_MAX_SWEEPS: usize = 500;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeesawOutcome {
    pub value: f64,
    pub strategy: TensorStrategy,
    /// Score after initialization and after each sweep of the winning restart.
    pub history: Vec<f64>,
    pub restart: usize,
}

/// Lower bound on the tensor-product value by alternating maximization:
/// each player's POVMs in turn, then the state, until the gain per sweep
/// drops below `1e-10` or 500 sweeps pass. Restart `r` draws its initial
/// projective measurements from stream `r` of `seed`.
pub fn seesaw_quantum_value(g: &Game, dims: &[usize], restarts: usize, seed: u64) -> Result<SeesawOutcome> {
    if dims.len() != g.players() {
        return Err(Error::InvalidGame(format!(
            "{} local dimensions for a {}-player game",
            dims.len(),
            g.players()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidGame("local dimensions must be at least 1".into()));
    }
    let runs: Vec<SeesawOutcome> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| run_restart(g, dims, r, seed))
        .collect();
    let mut best: Option<SeesawOutcome> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    best.value = best.value.min(1.0);
    Ok(best)
}

struct Workspace<'a> {
    game: &'a Game,
    dims: &'a [usize],
    total: usize,
    /// Nonzero `(x, a, q(x))` terms of the game operator.
    terms: Vec<(usize, usize, f64)>,
}

impl<'a> Workspace<'a> {
    fn new(game: &'a Game, dims: &'a [usize]) -> Self {
        let mut terms = Vec::new();
        for x in 0..game.num_input_tuples() {
            let qx = game.q_at(x);
            if qx == 0.0 {
                continue;
            }
            for a in 0..game.num_output_tuples() {
                if game.wins(a, x) {
                    terms.push((x, a, qx));
                }
            }
        }
        Self {
            game,
            dims,
            total: dims.iter().product(),
            terms,
        }
    }

    fn embed(&self, player: usize, m: &CMatrix) -> CMatrix {
        let left: usize = self.dims[..player].iter().product();
        let right: usize = self.dims[player + 1..].iter().product();
        CMatrix::identity(left).kron(m).kron(&CMatrix::identity(right))
    }

    fn embedded(&self, povms: &PovmFamily) -> PovmFamily {
        povms
            .iter()
            .enumerate()
            .map(|(p, fam)| {
                fam.iter()
                    .map(|povm| povm.iter().map(|m| self.embed(p, m)).collect())
                    .collect()
            })
            .collect()
    }

    /// `Σ q(x⃗) V(a⃗|x⃗) ⊗_j M^j_{a_j|x_j}`, skipping player `skip`.
    fn operator(&self, emb: &PovmFamily, skip: Option<usize>, filter: impl Fn(&[usize], &[usize]) -> bool) -> CMatrix {
        let mut acc = CMatrix::zeros(self.total, self.total);
        for &(x, a, qx) in &self.terms {
            let xv = unflatten(x, self.game.inputs());
            let av = unflatten(a, self.game.outputs());
            if !filter(&xv, &av) {
                continue;
            }
            let mut op = CMatrix::identity(self.total);
            for (p, fam) in emb.iter().enumerate() {
                if Some(p) != skip {
                    op = op * &fam[xv[p]][av[p]];
                }
            }
            acc += &op.scale_real(qx);
        }
        acc
    }

    fn game_operator(&self, emb: &PovmFamily) -> CMatrix {
        self.operator(emb, None, |_, _| true).hermitian_part()
    }

    /// `B_{x,a} = Tr_{−i}[(Σ … ⊗_{j≠i} M^j) ψψ*]` for player `i`.
    fn effective(&self, emb: &PovmFamily, player: usize, rho: &CMatrix) -> Vec<Vec<CMatrix>> {
        let ni = self.game.inputs()[player];
        let no = self.game.outputs()[player];
        (0..ni)
            .map(|x| {
                (0..no)
                    .map(|a| {
                        let op = self.operator(emb, Some(player), |xv, av| xv[player] == x && av[player] == a);
                        partial_trace(&(op * rho), self.dims, &[player])
                            .expect("dimensions agree")
                            .hermitian_part()
                    })
                    .collect()
            })
            .collect()
    }
}

/// Best POVM against effective operators `B_a`. Two outcomes: projector
/// onto the positive part of `B₀ − B₁`. More outcomes: repeated pairwise
/// splits `M_a = N^{1/2} P N^{1/2}` of `N = M_a + M_a′`, each of which can
/// only increase `Σ tr(M_a B_a)`.
fn improve_povm(current: &[CMatrix], b: &[CMatrix], tol: &Tolerance) -> Vec<CMatrix> {
    let d = current[0].rows();
    match current.len() {
        1 => vec![CMatrix::identity(d)],
        2 => {
            let p = spectral_projector_above(&(&b[0] - &b[1]).hermitian_part(), 0.0, tol).expect("Hermitian");
            let q = &CMatrix::identity(d) - &p;
            vec![p, q]
        }
        n => {
            let mut m = current.to_vec();
            for _ in 0..3 {
                for i in 0..n {
                    for j in i + 1..n {
                        let total = (&m[i] + &m[j]).hermitian_part();
                        let root = sqrt_psd(&total, tol).expect("Hermitian");
                        let diff = (&root * (&b[i] - &b[j]) * &root).hermitian_part();
                        let p = spectral_projector_above(&diff, 0.0, tol).expect("Hermitian");
                        let mi = (&root * p * &root).hermitian_part();
                        m[j] = (&total - &mi).hermitian_part();
                        m[i] = mi;
                    }
                }
            }
            m
        }
    }
}

fn top_eigenvector(g: &CMatrix, tol: &Tolerance) -> (f64, CMatrix) {
    let e = eig_hermitian(g, &tol.loosened(1e3)).expect("game operator is Hermitian");
    (e.max(), e.vector(0))
}

fn run_restart(g: &Game, dims: &[usize], restart: usize, seed: u64) -> SeesawOutcome {
    let tol = Tolerance::default();
    let ws = Workspace::new(g, dims);
    let mut rng = stream(seed, restart as u64);
    let mut povms: PovmFamily = (0..g.players())
        .map(|p| {
            (0..g.inputs()[p])
                .map(|_| {
                    let no = g.outputs()[p];
                    let map = random_projective_povm(&mut rng, dims[p], no);
                    outcome_labels(no).iter().map(|l| map[l].clone()).collect()
                })
                .collect()
        })
        .collect();
    let (mut value, mut state) = top_eigenvector(&ws.game_operator(&ws.embedded(&povms)), &tol);
    let mut history = vec![value];
    for _ in 0..SEESAW_MAX_SWEEPS {
        for p in 0..g.players() {
            let emb = ws.embedded(&povms);
            let rho = CMatrix::projector(&state);
            let b = ws.effective(&emb, p, &rho);
            for (x, povm) in povms[p].iter_mut().enumerate() {
                *povm = improve_povm(povm, &b[x], &tol);
            }
        }
        let (next, psi) = top_eigenvector(&ws.game_operator(&ws.embedded(&povms)), &tol);
        let gain = next - value;
        // keep the previous state if the eigensolver returned no improvement
        if next >= value {
            value = next;
            state = psi;
        }
        history.push(value);
        if gain < SEESAW_GAIN_STOP {
            break;
        }
    }
    SeesawOutcome {
        value,
        strategy: TensorStrategy {
            dims: dims.to_vec(),
            povms,
            state,
        },
        history,
        restart,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::library::{chsh, mermin3, trivial_game};
    use crate::games::{classical_value, eval_tensor, score, DEFAULT_ENUMERATION_CAP};

    #[test]
    fn chsh_reaches_tsirelson() {
        let out = seesaw_quantum_value(&chsh(), &[2, 2], 20, 7).unwrap();
        let target = 0.5 + 0.5 / 2f64.sqrt();
        assert!(out.value >= 0.8535 && (out.value - target).abs() < 1e-3);
        let c = eval_tensor(&out.strategy, &Tolerance::default()).unwrap();
        assert!((score(&chsh(), &c).unwrap() - out.value).abs() < 1e-9);
    }

    #[test]
    fn history_is_monotone() {
        let out = seesaw_quantum_value(&mermin3(), &[2, 2, 2], 4, 3).unwrap();
        for w in out.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        assert!((out.value - 1.0).abs() < 1e-4);
        let cv = classical_value(&mermin3(), DEFAULT_ENUMERATION_CAP).unwrap();
        assert!(cv.value <= out.value + 1e-9);
    }

    #[test]
    fn trivial_predicate_is_immediate() {
        let out = seesaw_quantum_value(&trivial_game(vec![2, 2], vec![2, 2]), &[2, 2], 1, 0).unwrap();
        assert!((out.value - 1.0).abs() < 1e-12);
        assert!(out.history.len() <= 2);
    }

    #[test]
    fn three_outcome_split_is_monotone() {
        let g = Game::from_fn(
            vec![2, 2],
            vec![3, 3],
            |_| 0.25,
            |a, x| (a[0] + a[1] + x[0] * x[1]) % 3 == 0,
        )
        .unwrap();
        let out = seesaw_quantum_value(&g, &[3, 3], 2, 11).unwrap();
        for w in out.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        let cv = classical_value(&g, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!(cv.value <= out.value + 1e-9);
    }
}
