use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::NoiseParams;
use crate::Scalar;

/// One refinement level of the coarse-to-fine proposal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleStage {
    /// Pieces per `(dx, dy, dtheta)` span. Lattice spans shorter than the
    /// request are split into single values.
    pub subdivisions: [usize; 3],
    /// Score every (object, face, noise) combination at this stage instead
    /// of drawing them uniformly. Only the first stage may enumerate.
    #[serde(default)]
    pub enumerate_discrete: bool,
}

/// Nested partitions of the contact support.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub stages: Vec<ScheduleStage>,
}

impl Default for Schedule {
    /// A 10×10×8 grid with full discrete enumeration, then two 5×5×5
    /// refinements of the chosen cell.
    fn default() -> Self {
        Self {
            stages: vec![
                ScheduleStage { subdivisions: [10, 10, 8], enumerate_discrete: true },
                ScheduleStage { subdivisions: [5, 5, 5], enumerate_discrete: false },
                ScheduleStage { subdivisions: [5, 5, 5], enumerate_discrete: false },
            ],
        }
    }
}

impl Schedule {
    pub fn new(stages: Vec<ScheduleStage>) -> Result<Self> {
        let s = Self { stages };
        s.validate()?;
        Ok(s)
    }

    /// A single undivided cell: the proposal is the prior.
    pub fn prior() -> Self {
        Self { stages: vec![ScheduleStage { subdivisions: [1, 1, 1], enumerate_discrete: false }] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidSchedule("no stages".into()));
        }
        for (t, s) in self.stages.iter().enumerate() {
            if s.subdivisions.contains(&0) {
                return Err(Error::InvalidSchedule(format!("stage {t} has a zero subdivision")));
            }
            if t > 0 && s.enumerate_discrete {
                return Err(Error::InvalidSchedule(format!("stage {t} enumerates discrete latents")));
            }
        }
        Ok(())
    }
}

/// Candidate `(p_outlier, sigma)` pairs for the sensor noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseGrid {
    pub pairs: Vec<[f64; 2]>,
}

impl NoiseGrid {
    /// Every combination of the given outlier probabilities and sigmas,
    /// sigma varying fastest.
    pub fn product(p_outlier: &[f64], sigma: &[f64]) -> Self {
        let pairs = p_outlier.iter().flat_map(|&p| sigma.iter().map(move |&s| [p, s])).collect();
        Self { pairs }
    }

    /// `p_outlier ∈ {0.05, 0.3, 0.8}` × `sigma ∈ {0.25, 0.5, 1}·sigma_max`.
    pub fn standard(sigma_max: f64) -> Self {
        Self::product(&[0.05, 0.3, 0.8], &[0.25 * sigma_max, 0.5 * sigma_max, sigma_max])
    }

    pub fn single(p_outlier: f64, sigma: f64) -> Self {
        Self { pairs: vec![[p_outlier, sigma]] }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn params<T: Scalar>(&self, i: usize) -> NoiseParams<T> {
        let [p, s] = self.pairs[i];
        NoiseParams { p_outlier: T::lit(p), sigma: T::lit(s) }
    }

    pub fn validate(&self, sigma_max: f64) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::InvalidNoise("empty noise grid".into()));
        }
        for &[p, s] in &self.pairs {
            if !((0.0..=1.0).contains(&p) && s > 0.0 && s <= sigma_max) {
                return Err(Error::InvalidNoise(format!("pair ({p}, {s}) outside the prior support")));
            }
        }
        Ok(())
    }

    /// Distinct sigmas in first-appearance order and each pair's index into
    /// them.
    pub(crate) fn sigma_table(&self) -> (Vec<f64>, Vec<usize>) {
        let mut sigmas: Vec<f64> = Vec::new();
        let index = self
            .pairs
            .iter()
            .map(|&[_, s]| match sigmas.iter().position(|&x| x.to_bits() == s.to_bits()) {
                Some(i) => i,
                None => {
                    sigmas.push(s);
                    sigmas.len() - 1
                }
            })
            .collect();
        (sigmas, index)
    }
}
