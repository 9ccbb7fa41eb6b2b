//! Monte Carlo sampling of mode evolutions and noise-free observation
//! streams.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::atemporal::{predicted_manifestations, ModeAssignment};
use crate::model::{Observation, ObservationStream, SystemModel};
use crate::stochastic::ModeDistribution;

/// Generator used for every sampled trajectory, seeded with `seed_from_u64`.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("initial distribution for component `{0}` is missing or has the wrong size")]
    MissingInitialDistribution(String),
    #[error("instant {t} is beyond the trajectory horizon {horizon}")]
    InstantOutOfRange { t: u64, horizon: u64 },
}

/// One realization of every component's chain over `t = 0..=horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledTrajectory {
    pub seed: u64,
    pub horizon: u64,
    // modes[c][t]
    modes: Vec<Vec<usize>>,
}

impl SampledTrajectory {
    pub fn component_modes(&self, component: usize) -> &[usize] {
        &self.modes[component]
    }

    pub fn assignment_at(&self, t: u64) -> ModeAssignment {
        ModeAssignment::from_indices(t, self.modes.iter().map(|m| m[t as usize]).collect())
    }
}

/// Precomputed categorical samplers for the initial distributions and each
/// matrix row.
pub struct TrajectorySampler {
    initial: Vec<WeightedIndex<f64>>,
    rows: Vec<Vec<WeightedIndex<f64>>>,
}

impl TrajectorySampler {
    pub fn new(model: &SystemModel, initials: &[ModeDistribution]) -> Result<Self, SimError> {
        let mut initial = Vec::new();
        let mut rows = Vec::new();
        for (ci, c) in model.components().iter().enumerate() {
            let dist = initials
                .get(ci)
                .filter(|d| d.len() == c.modes().len())
                .ok_or_else(|| SimError::MissingInitialDistribution(c.id().to_string()))?;
            initial.push(WeightedIndex::new(dist.probabilities()).expect("distribution has positive mass"));
            rows.push(
                (0..c.modes().len())
                    .map(|i| WeightedIndex::new(c.matrix().row(i)).expect("row has positive mass"))
                    .collect(),
            );
        }
        Ok(Self { initial, rows })
    }

    pub fn sample(&self, horizon: u64, seed: u64) -> SampledTrajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = self
            .initial
            .iter()
            .zip(&self.rows)
            .map(|(init, rows)| {
                let mut seq = Vec::with_capacity(horizon as usize + 1);
                let mut current = init.sample(&mut rng);
                seq.push(current);
                for _ in 0..horizon {
                    current = rows[current].sample(&mut rng);
                    seq.push(current);
                }
                seq
            })
            .collect();
        SampledTrajectory { seed, horizon, modes }
    }
}

pub fn sample_trajectory(
    model: &SystemModel,
    initials: &[ModeDistribution],
    horizon: u64,
    seed: u64,
) -> Result<SampledTrajectory, SimError> {
    Ok(TrajectorySampler::new(model, initials)?.sample(horizon, seed))
}

/// Pooled `(mode at t) -> (mode at t + n)` counts over a set of samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalMatrix {
    pub counts: Vec<Vec<u64>>,
    pub visits: Vec<u64>,
}

impl EmpiricalMatrix {
    /// Row-normalized frequencies; `None` for never-visited modes.
    pub fn row(&self, i: usize) -> Option<Vec<f64>> {
        let visits = self.visits[i];
        (visits > 0).then(|| self.counts[i].iter().map(|&c| c as f64 / visits as f64).collect())
    }

    pub fn rows(&self) -> Vec<Option<Vec<f64>>> {
        (0..self.visits.len()).map(|i| self.row(i)).collect()
    }
}

pub fn empirical_transition_matrix(
    samples: &[SampledTrajectory],
    model: &SystemModel,
    component: usize,
    n: u64,
) -> EmpiricalMatrix {
    let dim = model.components()[component].modes().len();
    let mut counts = vec![vec![0u64; dim]; dim];
    let mut visits = vec![0u64; dim];
    let n = n as usize;
    for s in samples {
        let seq = s.component_modes(component);
        for t in 0..seq.len().saturating_sub(n) {
            counts[seq[t]][seq[t + n]] += 1;
            visits[seq[t]] += 1;
        }
    }
    EmpiricalMatrix { counts, visits }
}

/// Observations a perfect sensor would report at each instant: the predicted
/// manifestations as present and their declared exclusive alternatives as
/// absent.
pub fn generate_observation_stream(
    traj: &SampledTrajectory,
    model: &SystemModel,
    instants: &[u64],
) -> Result<ObservationStream, SimError> {
    let instants: BTreeSet<u64> = instants.iter().copied().collect();
    let mut entries = Vec::with_capacity(instants.len());
    for t in instants {
        if t > traj.horizon {
            return Err(SimError::InstantOutOfRange {
                t,
                horizon: traj.horizon,
            });
        }
        let predicted = predicted_manifestations(&traj.assignment_at(t), model);
        let absent: BTreeSet<String> = predicted
            .iter()
            .flat_map(|a| model.exclusive_alternatives(a))
            .filter(|a| !predicted.contains(a))
            .map(str::to_string)
            .collect();
        entries.push(Observation {
            t,
            present: predicted.into_iter().map(str::to_string).collect(),
            absent,
        });
    }
    Ok(ObservationStream::new(entries).expect("instants are sorted and sets disjoint"))
}
