use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major multi-index helpers over a product of finite label sets.
pub fn flatten(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

pub fn unflatten(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &n) in out.iter_mut().zip(dims).rev() {
        *slot = idx % n;
        idx /= n;
    }
    out
}

/// k-player nonlocal game.
///
/// `q` is row-major over input tuples `(x_1, …, x_k)`. `predicate` is
/// row-major over `(a_1, …, a_k, x_1, …, x_k)`, i.e. the entry for
/// `(a⃗, x⃗)` sits at `flatten(a⃗)·|X| + flatten(x⃗)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameRepr", into = "GameRepr")]
pub struct Game {
    players: usize,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    q: Vec<f64>,
    predicate: Vec<u8>,
}

#[derive(Clone, Serialize, Deserialize)]
struct GameRepr {
    players: usize,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    q: Vec<f64>,
    predicate: Vec<u8>,
}

impl TryFrom<GameRepr> for Game {
    type Error = Error;
    fn try_from(r: GameRepr) -> Result<Self> {
        Game::new(r.inputs, r.outputs, r.q, r.predicate).and_then(|g| {
            if g.players == r.players {
                Ok(g)
            } else {
                Err(Error::InvalidGame(format!(
                    "players = {} but {} input sizes given",
                    r.players, g.players
                )))
            }
        })
    }
}

impl From<Game> for GameRepr {
    fn from(g: Game) -> Self {
        GameRepr {
            players: g.players,
            inputs: g.inputs,
            outputs: g.outputs,
            q: g.q,
            predicate: g.predicate,
        }
    }
}

const Q_SUM_TOL: f64 = 1e-9;

impl Game {
    pub fn new(inputs: Vec<usize>, outputs: Vec<usize>, q: Vec<f64>, predicate: Vec<u8>) -> Result<Self> {
        let players = inputs.len();
        if players == 0 || outputs.len() != players {
            return Err(Error::InvalidGame(format!(
                "{} input sizes and {} output sizes",
                inputs.len(),
                outputs.len()
            )));
        }
        if inputs.iter().chain(&outputs).any(|&n| n == 0) {
            return Err(Error::InvalidGame("label sets must be nonempty".into()));
        }
        let nx: usize = inputs.iter().product();
        let na: usize = outputs.iter().product();
        if q.len() != nx {
            return Err(Error::InvalidGame(format!("q has {} entries, expected {nx}", q.len())));
        }
        if predicate.len() != na * nx {
            return Err(Error::InvalidGame(format!(
                "predicate has {} entries, expected {}",
                predicate.len(),
                na * nx
            )));
        }
        if let Some(bad) = q.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidGame(format!("q entry {bad} is not a probability")));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > Q_SUM_TOL {
            return Err(Error::InvalidGame(format!("q sums to {total}")));
        }
        if let Some(bad) = predicate.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidGame(format!("predicate entry {bad} is not 0 or 1")));
        }
        Ok(Self {
            players,
            inputs,
            outputs,
            q,
            predicate,
        })
    }

    /// Builds a game from closures over label tuples.
    pub fn from_fn(
        inputs: Vec<usize>,
        outputs: Vec<usize>,
        q: impl Fn(&[usize]) -> f64,
        win: impl Fn(&[usize], &[usize]) -> bool,
    ) -> Result<Self> {
        let nx: usize = inputs.iter().product();
        let na: usize = outputs.iter().product();
        let qs = (0..nx).map(|x| q(&unflatten(x, &inputs))).collect();
        let mut pred = Vec::with_capacity(na * nx);
        for a in 0..na {
            let av = unflatten(a, &outputs);
            for x in 0..nx {
                pred.push(u8::from(win(&av, &unflatten(x, &inputs))));
            }
        }
        Self::new(inputs, outputs, qs, pred)
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn num_input_tuples(&self) -> usize {
        self.q.len()
    }

    pub fn num_output_tuples(&self) -> usize {
        self.outputs.iter().product()
    }

    pub fn q_at(&self, x: usize) -> f64 {
        self.q[x]
    }

    pub fn wins(&self, a: usize, x: usize) -> bool {
        self.predicate[a * self.num_input_tuples() + x] == 1
    }

    pub fn predicate(&self) -> &[u8] {
        &self.predicate
    }
}

/// Conditional distribution `p(a⃗|x⃗)`, same flattening as the predicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub outputs: Vec<usize>,
    pub inputs: Vec<usize>,
    pub p: Vec<f64>,
}

impl Correlation {
    pub fn from_fn(outputs: Vec<usize>, inputs: Vec<usize>, f: impl Fn(usize, usize) -> f64) -> Self {
        let na: usize = outputs.iter().product();
        let nx: usize = inputs.iter().product();
        let mut p = Vec::with_capacity(na * nx);
        for a in 0..na {
            for x in 0..nx {
                p.push(f(a, x));
            }
        }
        Self { outputs, inputs, p }
    }

    pub fn uniform(outputs: Vec<usize>, inputs: Vec<usize>) -> Self {
        let na: usize = outputs.iter().product();
        Self::from_fn(outputs, inputs, |_, _| 1.0 / na as f64)
    }

    pub fn num_input_tuples(&self) -> usize {
        self.inputs.iter().product()
    }

    pub fn num_output_tuples(&self) -> usize {
        self.outputs.iter().product()
    }

    pub fn get(&self, a: usize, x: usize) -> f64 {
        self.p[a * self.num_input_tuples() + x]
    }

    pub fn set(&mut self, a: usize, x: usize, value: f64) {
        let nx = self.num_input_tuples();
        self.p[a * nx + x] = value;
    }

    /// Largest deviation from the validity constraints: entries outside
    /// `[0, 1]` and per-input sums away from one.
    pub fn validity_defect(&self) -> f64 {
        let nx = self.num_input_tuples();
        let na = self.num_output_tuples();
        let mut worst = 0.0f64;
        for &v in &self.p {
            worst = worst.max(-v).max(v - 1.0);
        }
        for x in 0..nx {
            let s: f64 = (0..na).map(|a| self.get(a, x)).sum();
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }

    pub fn max_diff(&self, other: &Correlation) -> Result<f64> {
        if self.outputs != other.outputs || self.inputs != other.inputs {
            return Err(Error::ShapeMismatch("correlations have different label sets".into()));
        }
        Ok(self
            .p
            .iter()
            .zip(&other.p)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `Σ_i w_i c_i` for correlations of equal shape.
    pub fn mixture(parts: &[(f64, &Correlation)]) -> Result<Correlation> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| Error::ShapeMismatch("empty mixture".into()))?;
        let mut out = Correlation {
            outputs: first.outputs.clone(),
            inputs: first.inputs.clone(),
            p: vec![0.0; first.p.len()],
        };
        for (w, c) in parts {
            if c.outputs != out.outputs || c.inputs != out.inputs {
                return Err(Error::ShapeMismatch(
                    "mixture of differently shaped correlations".into(),
                ));
            }
            for (o, v) in out.p.iter_mut().zip(&c.p) {
                *o += w * v;
            }
        }
        Ok(out)
    }
}

fn check_shape(g: &Game, c: &Correlation) -> Result<()> {
    if c.inputs != g.inputs || c.outputs != g.outputs || c.p.len() != g.predicate.len() {
        return Err(Error::ShapeMismatch(format!(
            "correlation has outputs {:?} / inputs {:?}, game has {:?} / {:?}",
            c.outputs, c.inputs, g.outputs, g.inputs
        )));
    }
    Ok(())
}

/// `ω(G, p) = Σ_{x⃗,a⃗} q(x⃗) V(a⃗|x⃗) p(a⃗|x⃗)`.
pub fn score(g: &Game, c: &Correlation) -> Result<f64> {
    check_shape(g, c)?;
    let nx = g.num_input_tuples();
    let mut total = 0.0;
    for a in 0..g.num_output_tuples() {
        for x in 0..nx {
            if g.wins(a, x) {
                total += g.q_at(x) * c.get(a, x);
            }
        }
    }
    Ok(total)
}

pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 24;

/// Best deterministic strategy: `assignment[i][x_i]` is player `i`'s answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalValue {
    pub value: f64,
    pub assignment: Vec<Vec<usize>>,
}

/// Exhaustive search over deterministic strategies, first maximum in
/// lexicographic order (player 1's table most significant, each table
/// read in input order).
pub fn classical_value(g: &Game, cap: u128) -> Result<ClassicalValue> {
    let mut digit_radix = Vec::new();
    for (&ni, &no) in g.inputs.iter().zip(&g.outputs) {
        digit_radix.extend(std::iter::repeat_n(no, ni));
    }
    let mut size: u128 = 1;
    for &r in &digit_radix {
        size = size.saturating_mul(r as u128);
        if size > cap {
            return Err(Error::TooLarge { size, cap });
        }
    }
    let nx = g.num_input_tuples();
    let xs: Vec<Vec<usize>> = (0..nx).map(|x| unflatten(x, &g.inputs)).collect();
    let offsets: Vec<usize> = g
        .inputs
        .iter()
        .scan(0, |acc, &n| {
            let o = *acc;
            *acc += n;
            Some(o)
        })
        .collect();

    let mut digits = vec![0usize; digit_radix.len()];
    let mut best = ClassicalValue {
        value: f64::NEG_INFINITY,
        assignment: vec![],
    };
    let mut answers = vec![0usize; g.players];
    for _ in 0..size {
        let mut value = 0.0;
        for (x, xv) in xs.iter().enumerate() {
            let qx = g.q_at(x);
            if qx == 0.0 {
                continue;
            }
            for (p, slot) in answers.iter_mut().enumerate() {
                *slot = digits[offsets[p] + xv[p]];
            }
            if g.wins(flatten(&answers, &g.outputs), x) {
                value += qx;
            }
        }
        if value > best.value {
            best.value = value;
            best.assignment = (0..g.players)
                .map(|p| digits[offsets[p]..offsets[p] + g.inputs[p]].to_vec())
                .collect();
        }
        // odometer increment, last digit fastest
        for pos in (0..digits.len()).rev() {
            digits[pos] += 1;
            if digits[pos] < digit_radix[pos] {
                break;
            }
            digits[pos] = 0;
        }
    }
    Ok(best)
}

/// Correlation of a deterministic assignment.
pub fn deterministic_correlation(g: &Game, assignment: &[Vec<usize>]) -> Correlation {
    Correlation::from_fn(g.outputs.clone(), g.inputs.clone(), |a, x| {
        let xv = unflatten(x, &g.inputs);
        let answers: Vec<usize> = xv.iter().enumerate().map(|(p, &xi)| assignment[p][xi]).collect();
        if flatten(&answers, &g.outputs) == a {
            1.0
        } else {
            0.0
        }
    })
}

/// Per-player signalling defects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsReport {
    /// Entry `i`: largest change of the other players' marginal when only
    /// player `i`'s input changes.
    pub defects: Vec<f64>,
    pub eps: f64,
    pub pass: bool,
}

/// Marginal of the players in `keep` (others' outputs summed out), indexed
/// `[kept-output tuple][full input tuple]`.
pub(crate) fn marginal(c: &Correlation, keep: &[usize]) -> Vec<Vec<f64>> {
    let nx = c.num_input_tuples();
    let kept_dims: Vec<usize> = keep.iter().map(|&p| c.outputs[p]).collect();
    let nk: usize = kept_dims.iter().product();
    let mut out = vec![vec![0.0; nx]; nk];
    for a in 0..c.num_output_tuples() {
        let av = unflatten(a, &c.outputs);
        let kv: Vec<usize> = keep.iter().map(|&p| av[p]).collect();
        let k = flatten(&kv, &kept_dims);
        for (x, slot) in out[k].iter_mut().enumerate() {
            *slot += c.get(a, x);
        }
    }
    out
}

/// Largest change of `marg` (indexed by full input tuples) when only
/// player `player`'s input varies.
pub(crate) fn input_sensitivity(marg: &[Vec<f64>], inputs: &[usize], player: usize) -> f64 {
    let nx: usize = inputs.iter().product();
    let mut worst = 0.0f64;
    for x in 0..nx {
        let xv = unflatten(x, inputs);
        if xv[player] != 0 {
            continue;
        }
        for alt in 1..inputs[player] {
            let mut yv = xv.clone();
            yv[player] = alt;
            let y = flatten(&yv, inputs);
            for row in marg {
                worst = worst.max((row[x] - row[y]).abs());
            }
        }
    }
    worst
}

/// Non-signalling check: for each player, the marginal of everyone else
/// must not depend on that player's input.
pub fn ns_check(c: &Correlation, eps: f64) -> NsReport {
    let k = c.inputs.len();
    let defects: Vec<f64> = (0..k)
        .map(|i| {
            let others: Vec<usize> = (0..k).filter(|&j| j != i).collect();
            input_sensitivity(&marginal(c, &others), &c.inputs, i)
        })
        .collect();
    let pass = defects.iter().all(|&d| d <= eps);
    NsReport { defects, eps, pass }
}
