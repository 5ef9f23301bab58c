use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::map::CpMap;
use crate::error::{Error, Result};
use crate::numerics::{CMatrix, Tolerance};

/// Outcome-labelled family of CP maps whose sum is trace preserving.
/// Iteration order is lexicographic in the labels.
#[derive(Clone, Debug)]
pub struct Instrument {
    arms: BTreeMap<String, CpMap>,
}

impl Instrument {
    pub fn new(arms: BTreeMap<String, CpMap>, tol: &Tolerance) -> Result<Self> {
        let inst = Self::from_arms(arms)?;
        let defect = inst.trace_preservation_defect();
        if defect > tol.abs_eq {
            return Err(Error::SumMismatch { defect });
        }
        Ok(inst)
    }

    /// Shape checks only; trace preservation is left to the caller.
    pub fn from_arms(arms: BTreeMap<String, CpMap>) -> Result<Self> {
        let mut iter = arms.values();
        let Some(first) = iter.next() else {
            return Err(Error::DimensionMismatch("instrument has no outcomes".into()));
        };
        for arm in iter {
            first.check_same_dims(arm)?;
        }
        Ok(Self { arms })
    }

    pub fn arms(&self) -> &BTreeMap<String, CpMap> {
        &self.arms
    }

    pub fn arm(&self, label: &str) -> Option<&CpMap> {
        self.arms.get(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.arms.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn in_dim(&self) -> usize {
        self.first().in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.first().out_dim()
    }

    fn first(&self) -> &CpMap {
        self.arms.values().next().expect("instruments are nonempty")
    }

    /// The channel obtained by forgetting the outcome.
    pub fn summed(&self) -> CpMap {
        CpMap::sum_all(self.arms.values())
            .expect("arms share a shape")
            .expect("instruments are nonempty")
    }

    /// `‖Σ_a T_a*(1) − 1‖_max`.
    pub fn trace_preservation_defect(&self) -> f64 {
        self.summed().trace_preservation_defect()
    }

    /// Heisenberg-picture arms.
    pub fn adjoint_arms(&self) -> BTreeMap<String, CpMap> {
        self.arms.iter().map(|(k, v)| (k.clone(), v.adjoint())).collect()
    }
}

impl Serialize for Instrument {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.arms.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Instrument {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let arms = BTreeMap::<String, CpMap>::deserialize(deserializer)?;
        Instrument::from_arms(arms).map_err(serde::de::Error::custom)
    }
}

/// Measure-then-forget instrument of a POVM: arm `a` is `ρ ↦ tr(M_a ρ)`
/// into `M_1`.
pub fn povm_instrument(povm: &BTreeMap<String, CMatrix>, tol: &Tolerance) -> Result<Instrument> {
    let mut arms = BTreeMap::new();
    for (label, effect) in povm {
        arms.insert(label.clone(), CpMap::functional(effect, tol)?);
    }
    Instrument::new(arms, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_instrument, seeded};

    #[test]
    fn summed_adjoint_is_unital() {
        let mut rng = seeded(4);
        for _ in 0..5 {
            let inst = random_instrument(&mut rng, 2, 3);
            assert!(inst.trace_preservation_defect() < 1e-10);
            assert!(inst.summed().adjoint().unitality_defect() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_trace_preserving() {
        let mut arms = BTreeMap::new();
        arms.insert("0".to_string(), CpMap::identity(2).scaled(0.5));
        let err = Instrument::new(arms, &Tolerance::default()).unwrap_err();
        assert!(matches!(err, Error::SumMismatch { .. }));
    }

    #[test]
    fn povm_instrument_reads_probabilities() {
        let mut povm = BTreeMap::new();
        povm.insert("0".to_string(), CMatrix::diag_real(&[1.0, 0.0]));
        povm.insert("1".to_string(), CMatrix::diag_real(&[0.0, 1.0]));
        let inst = povm_instrument(&povm, &Tolerance::default()).unwrap();
        let rho = CMatrix::diag_real(&[0.25, 0.75]);
        let p1 = inst.arm("1").unwrap().apply(&rho).unwrap()[(0, 0)].re;
        assert!((p1 - 0.75).abs() < 1e-14);
    }
}
