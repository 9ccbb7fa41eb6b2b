//! Temporal diagnosis: chains per-instant candidates into evolutions, filters
//! the steps against a plausibility threshold and ranks the surviving
//! evolutions by joint probability.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atemporal::{solve_atemporal, ExplanationCriterion, ModeAssignment, SolveError};
use crate::model::{ObservationStream, SystemModel};
use crate::revision::RevisionError;
use crate::stochastic::{ModeDistribution, TransitionMatrix, SUM_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("observation stream is empty")]
    EmptyStream,
    #[error("no atemporal diagnosis explains the observations at t = {0}")]
    NoCandidatesAtInstant(u64),
    #[error("no evolution passes the plausibility threshold")]
    NoAdmissibleEvolution,
    #[error("instants must increase: {from} -> {to}")]
    NonIncreasingInstants { from: u64, to: u64 },
    #[error("no initial distribution for component `{0}`")]
    MissingInitialDistribution(String),
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("expected {expected} weights, found {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("candidate weights sum to {0}, expected 1")]
    WeightSumViolation(f64),
    #[error("plausibility threshold {0} is outside [0, 1]")]
    InvalidSigma(f64),
    #[error("more than {0} temporal diagnoses")]
    TooManyTrajectories(u64),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Revision(#[from] RevisionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// The whole-system conditional must reach sigma.
    #[default]
    Global,
    /// Every component's n-step transition must reach sigma.
    PerComponent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    sigma: f64,
    pub mode: ThresholdMode,
}

impl Threshold {
    pub fn new(sigma: f64, mode: ThresholdMode) -> Result<Self, EngineError> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(EngineError::InvalidSigma(sigma));
        }
        Ok(Self { sigma, mode })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Applies the threshold to a step given its global value and its
    /// per-component factors.
    pub fn admits(&self, global: f64, factors: &[f64]) -> bool {
        match self.mode {
            ThresholdMode::Global => global >= self.sigma,
            ThresholdMode::PerComponent => factors.iter().all(|&f| f >= self.sigma),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiagnosticProblem {
    pub model: SystemModel,
    pub observations: ObservationStream,
    pub threshold: Threshold,
    pub criterion: ExplanationCriterion,
    pub candidate_cap: u64,
}

/// A ranked evolution: one assignment per relevant instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalDiagnosis {
    pub trajectory: Vec<ModeAssignment>,
    pub prior: f64,
    pub step_conditionals: Vec<f64>,
    pub joint_probability: f64,
}

/// Candidates at one relevant instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub t: u64,
    pub candidates: Vec<ModeAssignment>,
}

pub fn relevant_instants(obs: &ObservationStream) -> Result<Vec<u64>, EngineError> {
    if obs.is_empty() {
        return Err(EngineError::EmptyStream);
    }
    Ok(obs.entries().iter().map(|e| e.t).collect())
}

/// Marginal mode distributions induced by a weighted candidate set
/// (uniform weights when none are given).
pub fn induce_initial_distributions(
    model: &SystemModel,
    candidates: &[ModeAssignment],
    weights: Option<&[f64]>,
) -> Result<Vec<ModeDistribution>, EngineError> {
    if candidates.is_empty() {
        return Err(EngineError::EmptyCandidateSet);
    }
    let uniform;
    let weights = match weights {
        Some(w) => {
            if w.len() != candidates.len() {
                return Err(EngineError::WeightCount {
                    expected: candidates.len(),
                    found: w.len(),
                });
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE || w.iter().any(|&x| x < 0.0) {
                return Err(EngineError::WeightSumViolation(sum));
            }
            w
        }
        None => {
            uniform = vec![1.0 / candidates.len() as f64; candidates.len()];
            &uniform[..]
        }
    };
    Ok(model
        .components()
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let mut probs = vec![0.0; c.modes().len()];
            for (w, &weight) in candidates.iter().zip(weights) {
                probs[w.mode_of(ci)] += weight;
            }
            ModeDistribution::from_computed(probs)
        })
        .collect())
}

/// Initial distributions for a run: a component's declared distribution
/// when present, otherwise the distribution induced by `induce_from` (the
/// candidates at instant 0, when the run starts there), otherwise uniform over
/// the component's modes.
pub fn resolve_initials(model: &SystemModel, induce_from: Option<&[ModeAssignment]>) -> Vec<ModeDistribution> {
    let induced = induce_from.and_then(|c| induce_initial_distributions(model, c, None).ok());
    model
        .components()
        .iter()
        .enumerate()
        .map(|(ci, c)| match (c.initial_distribution(), &induced) {
            (Some(d), _) => d.clone(),
            (None, Some(ind)) => ind[ci].clone(),
            (None, None) => ModeDistribution::uniform(c.modes().len()),
        })
        .collect()
}

/// Initials for candidate layers: induced from the first layer only when it
/// sits at t = 0.
pub fn initials_for_layers(model: &SystemModel, first: &Layer) -> Vec<ModeDistribution> {
    resolve_initials(model, (first.t == 0).then_some(&first.candidates[..]))
}

/// Memoised n-step matrices per component.
pub struct PowerCache<'m> {
    model: &'m SystemModel,
    powers: HashMap<(usize, u64), TransitionMatrix>,
}

impl<'m> PowerCache<'m> {
    pub fn new(model: &'m SystemModel) -> Self {
        Self {
            model,
            powers: HashMap::new(),
        }
    }

    pub fn power(&mut self, component: usize, n: u64) -> &TransitionMatrix {
        let model = self.model;
        self.powers
            .entry((component, n))
            .or_insert_with(|| model.components()[component].matrix().power(n))
    }

    pub fn distribution_at(&mut self, component: usize, initial: &ModeDistribution, n: u64) -> ModeDistribution {
        initial
            .step(self.power(component, n))
            .expect("initial distribution matches component")
    }

    /// Per-component n-step factors of the step `prev -> next`.
    pub fn step_factors(
        &mut self,
        prev: &ModeAssignment,
        next: &ModeAssignment,
    ) -> Result<Vec<f64>, EngineError> {
        if next.t <= prev.t {
            return Err(EngineError::NonIncreasingInstants {
                from: prev.t,
                to: next.t,
            });
        }
        let n = next.t - prev.t;
        Ok((0..self.model.components().len())
            .map(|ci| self.power(ci, n).get(prev.mode_of(ci), next.mode_of(ci)))
            .collect())
    }

    pub fn prior(&mut self, w: &ModeAssignment, initials: &[ModeDistribution]) -> Result<f64, EngineError> {
        let mut prior = 1.0;
        for (ci, c) in self.model.components().iter().enumerate() {
            let initial = initials
                .get(ci)
                .filter(|d| d.len() == c.modes().len())
                .ok_or_else(|| EngineError::MissingInitialDistribution(c.id().to_string()))?;
            prior *= self.distribution_at(ci, initial, w.t).get(w.mode_of(ci));
        }
        Ok(prior)
    }
}

/// `P[W(t)] = ∏_c π_c(t)[mode of c]`, with `π_c(t) = π_c(0) P_cᵗ`.
pub fn prior_probability(
    w: &ModeAssignment,
    initials: &[ModeDistribution],
    model: &SystemModel,
) -> Result<f64, EngineError> {
    PowerCache::new(model).prior(w, initials)
}

/// `P[W(t_j) | W(t_i)] = ∏_c P_c^(t_j - t_i)[mode_i][mode_j]`.
pub fn conditional_probability(
    prev: &ModeAssignment,
    next: &ModeAssignment,
    model: &SystemModel,
) -> Result<f64, EngineError> {
    Ok(PowerCache::new(model).step_factors(prev, next)?.iter().product())
}

pub fn admissible_step(
    prev: &ModeAssignment,
    next: &ModeAssignment,
    model: &SystemModel,
    threshold: &Threshold,
) -> Result<bool, EngineError> {
    let factors = PowerCache::new(model).step_factors(prev, next)?;
    let global = factors.iter().product();
    Ok(threshold.admits(global, &factors))
}

/// Joint probability of an evolution by the recursion
/// `P[W₀ … W_k] = P[W₀ … W_{k-1}] · P[W_k | W_{k-1}]`.
pub fn joint_probability(
    trajectory: &[ModeAssignment],
    initials: &[ModeDistribution],
    model: &SystemModel,
) -> Result<f64, EngineError> {
    let Some(first) = trajectory.first() else {
        return Ok(1.0);
    };
    let mut cache = PowerCache::new(model);
    let mut joint = cache.prior(first, initials)?;
    for pair in trajectory.windows(2) {
        let factors = cache.step_factors(&pair[0], &pair[1])?;
        joint *= factors.iter().product::<f64>();
    }
    Ok(joint)
}

/// Prior, step conditionals and joint of one explicitly given evolution.
pub fn score_trajectory(
    trajectory: &[ModeAssignment],
    initials: &[ModeDistribution],
    model: &SystemModel,
) -> Result<TemporalDiagnosis, EngineError> {
    let first = trajectory.first().ok_or(EngineError::EmptyCandidateSet)?;
    let mut cache = PowerCache::new(model);
    let prior = cache.prior(first, initials)?;
    let step_conditionals = trajectory
        .windows(2)
        .map(|pair| Ok(cache.step_factors(&pair[0], &pair[1])?.iter().product()))
        .collect::<Result<Vec<f64>, EngineError>>()?;
    Ok(TemporalDiagnosis {
        trajectory: trajectory.to_vec(),
        prior,
        joint_probability: joint_probability(trajectory, initials, model)?,
        step_conditionals,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub factors: Vec<f64>,
    pub conditional: f64,
    pub admissible: bool,
}

/// Layered graph of candidates with every step between consecutive layers
/// evaluated.
#[derive(Debug, Clone)]
pub struct Trellis {
    pub layers: Vec<Layer>,
    pub initials: Vec<ModeDistribution>,
    pub priors: Vec<f64>,
    /// `edges[k]` connects layer k to layer k + 1, in (from, to) order.
    pub edges: Vec<Vec<Edge>>,
}

pub fn build_trellis(
    model: &SystemModel,
    layers: Vec<Layer>,
    initials: Vec<ModeDistribution>,
    threshold: &Threshold,
) -> Result<Trellis, EngineError> {
    let Some(first) = layers.first() else {
        return Err(EngineError::EmptyStream);
    };
    for pair in layers.windows(2) {
        if pair[1].t <= pair[0].t {
            return Err(EngineError::NonIncreasingInstants {
                from: pair[0].t,
                to: pair[1].t,
            });
        }
    }
    if let Some(layer) = layers.iter().find(|l| l.candidates.is_empty()) {
        return Err(EngineError::NoCandidatesAtInstant(layer.t));
    }
    let mut cache = PowerCache::new(model);
    let priors = first
        .candidates
        .iter()
        .map(|w| cache.prior(w, &initials))
        .collect::<Result<Vec<_>, _>>()?;

    let mut edges = Vec::with_capacity(layers.len().saturating_sub(1));
    for pair in layers.windows(2) {
        let mut layer_edges = Vec::with_capacity(pair[0].candidates.len() * pair[1].candidates.len());
        for (i, prev) in pair[0].candidates.iter().enumerate() {
            for (j, next) in pair[1].candidates.iter().enumerate() {
                let factors = cache.step_factors(prev, next)?;
                let conditional = factors.iter().product();
                layer_edges.push(Edge {
                    from: i,
                    to: j,
                    admissible: threshold.admits(conditional, &factors),
                    factors,
                    conditional,
                });
            }
        }
        edges.push(layer_edges);
    }
    Ok(Trellis {
        layers,
        initials,
        priors,
        edges,
    })
}

impl Trellis {
    /// The edge from candidate `from` of layer `k` to candidate `to` of layer `k + 1`.
    pub fn edge(&self, k: usize, from: usize, to: usize) -> &Edge {
        &self.edges[k][from * self.layers[k + 1].candidates.len() + to]
    }

    /// Every root-to-leaf path over admissible edges, ranked.
    pub fn diagnoses(&self, model: &SystemModel, cap: u64) -> Result<Vec<TemporalDiagnosis>, EngineError> {
        let mut out = Vec::new();
        let mut path = Vec::with_capacity(self.layers.len());
        for root in 0..self.layers[0].candidates.len() {
            path.push(root);
            self.walk(&mut path, &mut out, cap)?;
            path.pop();
        }
        if out.is_empty() {
            return Err(EngineError::NoAdmissibleEvolution);
        }
        rank(&mut out, model);
        Ok(out)
    }

    fn walk(&self, path: &mut Vec<usize>, out: &mut Vec<TemporalDiagnosis>, cap: u64) -> Result<(), EngineError> {
        let depth = path.len();
        if depth == self.layers.len() {
            if out.len() as u64 >= cap {
                return Err(EngineError::TooManyTrajectories(cap));
            }
            out.push(self.diagnosis_for(path));
            return Ok(());
        }
        let from = path[depth - 1];
        for to in 0..self.layers[depth].candidates.len() {
            if self.edge(depth - 1, from, to).admissible {
                path.push(to);
                self.walk(path, out, cap)?;
                path.pop();
            }
        }
        Ok(())
    }

    /// Assembles the diagnosis for a path of candidate indices.
    pub fn diagnosis_for(&self, path: &[usize]) -> TemporalDiagnosis {
        let prior = self.priors[path[0]];
        let step_conditionals: Vec<f64> = path
            .windows(2)
            .enumerate()
            .map(|(k, w)| self.edge(k, w[0], w[1]).conditional)
            .collect();
        let joint_probability = step_conditionals.iter().fold(prior, |acc, c| acc * c);
        TemporalDiagnosis {
            trajectory: path
                .iter()
                .enumerate()
                .map(|(k, &i)| self.layers[k].candidates[i].clone())
                .collect(),
            prior,
            step_conditionals,
            joint_probability,
        }
    }
}

/// Descending joint probability; ties broken by the trajectory's mode
/// sequence in component-id order.
pub fn rank(diagnoses: &mut [TemporalDiagnosis], model: &SystemModel) {
    let key = |d: &TemporalDiagnosis| -> Vec<Vec<usize>> {
        d.trajectory.iter().map(|w| w.sort_key(model)).collect()
    };
    diagnoses.sort_by(|a, b| {
        b.joint_probability
            .total_cmp(&a.joint_probability)
            .then_with(|| key(a).cmp(&key(b)))
    });
}

/// Solves the atemporal problem at each relevant instant.
pub fn candidate_layers(problem: &DiagnosticProblem) -> Result<Vec<Layer>, EngineError> {
    relevant_instants(&problem.observations)?;
    let mut layers = Vec::with_capacity(problem.observations.entries().len());
    for entry in problem.observations.entries() {
        let candidates = solve_atemporal(&problem.model, entry, problem.criterion, problem.candidate_cap)?;
        if candidates.is_empty() {
            return Err(EngineError::NoCandidatesAtInstant(entry.t));
        }
        layers.push(Layer { t: entry.t, candidates });
    }
    Ok(layers)
}

/// Builds the trellis for explicitly given candidate layers, with initial
/// distributions resolved from the model and the first layer.
pub fn trellis_for_layers(
    model: &SystemModel,
    layers: Vec<Layer>,
    threshold: &Threshold,
) -> Result<Trellis, EngineError> {
    let first = layers.first().ok_or(EngineError::EmptyStream)?;
    let initials = initials_for_layers(model, first);
    build_trellis(model, layers, initials, threshold)
}

pub fn enumerate_temporal_diagnoses(problem: &DiagnosticProblem) -> Result<Vec<TemporalDiagnosis>, EngineError> {
    let layers = candidate_layers(problem)?;
    let trellis = trellis_for_layers(&problem.model, layers, &problem.threshold)?;
    trellis.diagnoses(&problem.model, problem.candidate_cap)
}
