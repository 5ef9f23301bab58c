use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cpmaps::{CpMap, Instrument};
use crate::error::{Error, Result};
use crate::games::{flatten, unflatten, Correlation};
use crate::numerics::{identity_defect, min_eigenvalue, CMatrix, Tolerance};

/// Assemblage for the first player, instruments for the middle players and
/// a POVM for the last one, all acting on `M_dim`.
///
/// Indexing is `assemblage[x][a]`, `instruments[stage][y]` (arms labelled
/// `"0"`, `"1"`, …) and `final_povm[z][c]`.
#[derive(Clone, Debug)]
pub struct SequentialStrategy {
    pub dim: usize,
    pub assemblage: Vec<Vec<CMatrix>>,
    pub instruments: Vec<Vec<Instrument>>,
    pub final_povm: Vec<Vec<CMatrix>>,
}

/// Operational no-signalling defects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnsReport {
    /// `max_{x,x′} ‖Σ_a σ_{a|x} − Σ_a σ_{a|x′}‖_max`.
    pub state_defect: f64,
    /// Per stage, `max_{y,y′}` of the Choi difference of the summed channels.
    pub instrument_defects: Vec<f64>,
    pub pass_threshold: f64,
    pub pass: bool,
}

impl OnsReport {
    pub fn max_defect(&self) -> f64 {
        self.instrument_defects.iter().fold(self.state_defect, |m, &d| m.max(d))
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidStrategy(msg)
}

fn check_effects(what: &str, effects: &[CMatrix], d: usize, tol: &Tolerance) -> Result<()> {
    for (a, m) in effects.iter().enumerate() {
        if m.shape() != (d, d) {
            return Err(invalid(format!(
                "{what} outcome {a} is {}x{}, expected {d}x{d}",
                m.rows(),
                m.cols()
            )));
        }
        let low = min_eigenvalue(m, &tol.loosened(10.0))
            .map_err(|_| invalid(format!("{what} outcome {a} is not Hermitian")))?;
        if low < -tol.psd_floor {
            return Err(invalid(format!("{what} outcome {a} has eigenvalue {low:.3e}")));
        }
    }
    Ok(())
}

fn uniform_count<T>(what: &str, rows: &[Vec<T>]) -> Result<usize> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || n == 0 {
        return Err(invalid(format!("{what} needs at least one input and one outcome")));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(invalid(format!(
            "{what} uses different outcome counts for different inputs"
        )));
    }
    Ok(n)
}

impl SequentialStrategy {
    pub fn players(&self) -> usize {
        self.instruments.len() + 2
    }

    pub fn inputs(&self) -> Vec<usize> {
        let mut v = vec![self.assemblage.len()];
        v.extend(self.instruments.iter().map(Vec::len));
        v.push(self.final_povm.len());
        v
    }

    pub fn outputs(&self) -> Vec<usize> {
        let mut v = vec![self.assemblage.first().map_or(0, Vec::len)];
        v.extend(self.instruments.iter().map(|st| st.first().map_or(0, Instrument::len)));
        v.push(self.final_povm.first().map_or(0, Vec::len));
        v
    }

    /// Arm `b` of the instrument for input `y` at middle stage `stage`.
    pub fn arm(&self, stage: usize, y: usize, b: usize) -> &CpMap {
        self.instruments[stage][y]
            .arm(&b.to_string())
            .expect("validated instrument labels")
    }

    pub fn validate(&self, tol: &Tolerance) -> Result<()> {
        let d = self.dim;
        if d == 0 {
            return Err(invalid("dimension must be positive".into()));
        }
        uniform_count("assemblage", &self.assemblage)?;
        for (x, row) in self.assemblage.iter().enumerate() {
            check_effects(&format!("assemblage input {x}"), row, d, tol)?;
            let tr = CMatrix::sum(row).expect("nonempty").trace().re;
            if (tr - 1.0).abs() > tol.abs_eq {
                return Err(invalid(format!("assemblage input {x} has total trace {tr}")));
            }
        }
        for (i, stage) in self.instruments.iter().enumerate() {
            if stage.is_empty() {
                return Err(invalid(format!("stage {i} has no inputs")));
            }
            let n = stage[0].len();
            for (y, inst) in stage.iter().enumerate() {
                let expected: Vec<String> = (0..n).map(|b| b.to_string()).collect();
                let labels: Vec<&str> = inst.labels().collect();
                if inst.len() != n || expected.iter().any(|l| !labels.contains(&l.as_str())) {
                    return Err(invalid(format!(
                        "stage {i} input {y}: outcome labels must be 0..{n} for every input"
                    )));
                }
                if inst.in_dim() != d || inst.out_dim() != d {
                    return Err(invalid(format!(
                        "stage {i} input {y}: instrument maps M_{} to M_{}, expected M_{d}",
                        inst.in_dim(),
                        inst.out_dim()
                    )));
                }
                let defect = inst.trace_preservation_defect();
                if defect > tol.abs_eq {
                    return Err(invalid(format!(
                        "stage {i} input {y}: arms are trace preserving only within {defect:.3e}"
                    )));
                }
            }
        }
        uniform_count("final POVM", &self.final_povm)?;
        for (z, povm) in self.final_povm.iter().enumerate() {
            check_effects(&format!("final POVM input {z}"), povm, d, tol)?;
            let closure = identity_defect(&CMatrix::sum(povm).expect("nonempty"));
            if closure > tol.abs_eq {
                return Err(invalid(format!(
                    "final POVM input {z} closes to identity within {closure:.3e}"
                )));
            }
        }
        Ok(())
    }

    /// `Σ_a σ_{a|x}` for each `x`.
    pub fn reduced_states(&self) -> Vec<CMatrix> {
        self.assemblage
            .iter()
            .map(|row| CMatrix::sum(row).expect("nonempty"))
            .collect()
    }
}

/// `p(a⃗|x⃗) = tr[C_{a_k|x_k} · I_{a_{k−1}|x_{k−1}} ∘ ⋯ ∘ I_{a₂|x₂}(σ_{a₁|x₁})]`.
pub fn eval_sequential(s: &SequentialStrategy, tol: &Tolerance) -> Result<Correlation> {
    s.validate(tol)?;
    let inputs = s.inputs();
    let outputs = s.outputs();
    let nx: usize = inputs.iter().product();
    let na: usize = outputs.iter().product();
    let mut p = vec![0.0; na * nx];
    for x in 0..nx {
        let xv = unflatten(x, &inputs);
        let mut branches: Vec<(Vec<usize>, CMatrix)> = s.assemblage[xv[0]]
            .iter()
            .enumerate()
            .map(|(a, sigma)| (vec![a], sigma.clone()))
            .collect();
        for stage in 0..s.instruments.len() {
            let y = xv[stage + 1];
            let mut next = Vec::with_capacity(branches.len() * outputs[stage + 1]);
            for (prefix, rho) in &branches {
                for b in 0..outputs[stage + 1] {
                    let mut labels = prefix.clone();
                    labels.push(b);
                    next.push((labels, s.arm(stage, y, b).apply(rho)?));
                }
            }
            branches = next;
        }
        let z = xv[inputs.len() - 1];
        for (prefix, rho) in &branches {
            for (c, effect) in s.final_povm[z].iter().enumerate() {
                let mut labels = prefix.clone();
                labels.push(c);
                let a = flatten(&labels, &outputs);
                p[a * nx + x] = (effect * rho).trace().re;
            }
        }
    }
    Ok(Correlation { outputs, inputs, p })
}

/// Input-independence of the reduced state and of every stage's summed
/// channel; passes when all defects are at most `eps`.
pub fn ons_check(s: &SequentialStrategy, eps: f64) -> OnsReport {
    let reduced = s.reduced_states();
    let mut state_defect = 0.0f64;
    for (i, a) in reduced.iter().enumerate() {
        for b in &reduced[i + 1..] {
            state_defect = state_defect.max(a.max_diff(b));
        }
    }
    let instrument_defects: Vec<f64> = s
        .instruments
        .iter()
        .map(|stage| {
            let chois: Vec<CMatrix> = stage.iter().map(|inst| inst.summed().choi().clone()).collect();
            let mut worst = 0.0f64;
            for (i, a) in chois.iter().enumerate() {
                for b in &chois[i + 1..] {
                    worst = worst.max(a.max_diff(b));
                }
            }
            worst
        })
        .collect();
    let pass = state_defect <= eps && instrument_defects.iter().all(|&d| d <= eps);
    OnsReport {
        state_defect,
        instrument_defects,
        pass_threshold: eps,
        pass,
    }
}

type Keyed<T> = BTreeMap<String, T>;

#[derive(Serialize, Deserialize)]
struct SequentialRepr {
    dim: usize,
    assemblage: Keyed<CMatrix>,
    instruments: Vec<Keyed<Instrument>>,
    final_povm: Keyed<Keyed<CMatrix>>,
}

fn parse_index(key: &str, what: &str) -> std::result::Result<usize, String> {
    key.trim()
        .parse()
        .map_err(|_| format!("{what} label {key:?} is not a nonnegative integer"))
}

/// Dense `0..n` vector from integer-labelled entries.
fn dense<T>(entries: Vec<(usize, T)>, what: &str) -> std::result::Result<Vec<T>, String> {
    let n = entries.len();
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    for (i, v) in entries {
        if i >= n || slots[i].is_some() {
            return Err(format!("{what} labels must be exactly 0..{n}"));
        }
        slots[i] = Some(v);
    }
    Ok(slots.into_iter().map(|s| s.expect("filled")).collect())
}

impl TryFrom<SequentialRepr> for SequentialStrategy {
    type Error = String;

    fn try_from(r: SequentialRepr) -> std::result::Result<Self, String> {
        let mut by_x: BTreeMap<usize, Vec<(usize, CMatrix)>> = BTreeMap::new();
        for (key, m) in r.assemblage {
            let (a, x) = key
                .split_once(',')
                .ok_or_else(|| format!("assemblage key {key:?} is not of the form \"a,x\""))?;
            let a = parse_index(a, "assemblage outcome")?;
            let x = parse_index(x, "assemblage input")?;
            by_x.entry(x).or_default().push((a, m));
        }
        let rows: Vec<(usize, Vec<CMatrix>)> = by_x
            .into_iter()
            .map(|(x, row)| Ok((x, dense(row, "assemblage outcome")?)))
            .collect::<std::result::Result<_, String>>()?;
        let assemblage = dense(rows, "assemblage input")?;
        let instruments = r
            .instruments
            .into_iter()
            .map(|stage| {
                let entries = stage
                    .into_iter()
                    .map(|(y, inst)| Ok((parse_index(&y, "instrument input")?, inst)))
                    .collect::<std::result::Result<Vec<_>, String>>()?;
                dense(entries, "instrument input")
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        let final_povm = dense(
            r.final_povm
                .into_iter()
                .map(|(z, povm)| {
                    let effects = povm
                        .into_iter()
                        .map(|(c, m)| Ok((parse_index(&c, "final outcome")?, m)))
                        .collect::<std::result::Result<Vec<_>, String>>()?;
                    Ok((parse_index(&z, "final input")?, dense(effects, "final outcome")?))
                })
                .collect::<std::result::Result<Vec<_>, String>>()?,
            "final input",
        )?;
        Ok(SequentialStrategy {
            dim: r.dim,
            assemblage,
            instruments,
            final_povm,
        })
    }
}

impl From<&SequentialStrategy> for SequentialRepr {
    fn from(s: &SequentialStrategy) -> Self {
        let mut assemblage = BTreeMap::new();
        for (x, row) in s.assemblage.iter().enumerate() {
            for (a, m) in row.iter().enumerate() {
                assemblage.insert(format!("{a},{x}"), m.clone());
            }
        }
        let instruments = s
            .instruments
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .enumerate()
                    .map(|(y, inst)| (y.to_string(), inst.clone()))
                    .collect()
            })
            .collect();
        let final_povm = s
            .final_povm
            .iter()
            .enumerate()
            .map(|(z, povm)| {
                (
                    z.to_string(),
                    povm.iter()
                        .enumerate()
                        .map(|(c, m)| (c.to_string(), m.clone()))
                        .collect(),
                )
            })
            .collect();
        SequentialRepr {
            dim: s.dim,
            assemblage,
            instruments,
            final_povm,
        }
    }
}

impl Serialize for SequentialStrategy {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SequentialRepr::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SequentialStrategy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = SequentialRepr::deserialize(deserializer)?;
        SequentialStrategy::try_from(repr).map_err(serde::de::Error::custom)
    }
}
