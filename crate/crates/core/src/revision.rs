//! Revision of stochastic predictions against the logically admitted
//! diagnoses.
//!
//! When the atemporal solver is assumed to never lose a diagnosis, the joint
//! probabilities at an instant are rescaled by `F(t) = 1 / Σ Pᵢ(t)` and the
//! per-component mode mass by `f(c, t) = 1 / Σ_{admitted m} π_c(t)[m]`.
//! Revised conditionals are scores: they can exceed 1.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::atemporal::ModeAssignment;
use crate::model::{ComponentSpec, SystemModel};
use crate::stochastic::ModeDistribution;
use crate::temporal::{rank, EngineError, Layer, PowerCache, TemporalDiagnosis, Threshold, Trellis};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RevisionError {
    #[error("all joint probabilities are zero; revision is undefined")]
    AllZeroJoints,
    #[error("component `{0}`: no admitted modes")]
    EmptyAdmitted(String),
    #[error("component `{0}`: admitted modes carry zero probability mass")]
    ZeroAdmittedMass(String),
}

/// Nonnegative revised value; may exceed 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct RevisedScore(f64);

impl RevisedScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `F(t) = 1 / Σ joints`.
pub fn normalization_factor(joints: &[f64]) -> Result<f64, RevisionError> {
    let sum: f64 = joints.iter().sum();
    if sum <= 0.0 {
        return Err(RevisionError::AllZeroJoints);
    }
    Ok(1.0 / sum)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalRevision {
    pub factor: f64,
    pub joints: Vec<RevisedScore>,
    pub conditionals: Vec<RevisedScore>,
}

pub fn revise_global(joints: &[f64], conditionals: &[f64]) -> Result<GlobalRevision, RevisionError> {
    let factor = normalization_factor(joints)?;
    let scale = |v: &[f64]| v.iter().map(|&p| RevisedScore(p * factor)).collect();
    Ok(GlobalRevision {
        factor,
        joints: scale(joints),
        conditionals: scale(conditionals),
    })
}

fn admitted_mass(
    component: &ComponentSpec,
    pi_t: &ModeDistribution,
    admitted: &BTreeSet<usize>,
) -> Result<f64, RevisionError> {
    if admitted.is_empty() {
        return Err(RevisionError::EmptyAdmitted(component.id().to_string()));
    }
    let mass: f64 = admitted.iter().map(|&m| pi_t.get(m)).sum();
    if mass <= 0.0 {
        return Err(RevisionError::ZeroAdmittedMass(component.id().to_string()));
    }
    Ok(mass)
}

/// `f(c, t) = 1 / Σ_{m ∈ admitted} π_c(t)[m]`.
pub fn component_mass_factor(
    component: &ComponentSpec,
    pi_t: &ModeDistribution,
    admitted: &BTreeSet<usize>,
) -> Result<f64, RevisionError> {
    Ok(1.0 / admitted_mass(component, pi_t, admitted)?)
}

/// `rp = pᵏ · f(c, t)`.
pub fn revise_transition(p_k: f64, factor: f64) -> RevisedScore {
    RevisedScore(p_k * factor)
}

/// Zeroes the non-admitted modes and renormalizes the rest.
pub fn posterior_component_distribution(
    component: &ComponentSpec,
    pi_t: &ModeDistribution,
    admitted: &BTreeSet<usize>,
) -> Result<ModeDistribution, RevisionError> {
    let mass = admitted_mass(component, pi_t, admitted)?;
    let probs = pi_t
        .probabilities()
        .iter()
        .enumerate()
        .map(|(m, &p)| if admitted.contains(&m) { p / mass } else { 0.0 })
        .collect();
    Ok(ModeDistribution::from_computed(probs))
}

/// Modes assigned to each component by at least one candidate.
pub fn admitted_modes(model: &SystemModel, candidates: &[ModeAssignment]) -> Vec<BTreeSet<usize>> {
    (0..model.components().len())
        .map(|ci| candidates.iter().map(|w| w.mode_of(ci)).collect())
        .collect()
}

/// One partial evolution ending at a revised instant.
#[derive(Debug, Clone, PartialEq)]
pub struct RevisedEntry {
    /// Candidate index per layer up to this instant.
    pub path: Vec<usize>,
    /// Raw conditional of the last step; `None` at the first instant.
    pub conditional: Option<f64>,
    pub revised_conditional: Option<RevisedScore>,
    /// Per-component revised transitions of the last step.
    pub revised_transitions: Vec<RevisedScore>,
    /// Joint before normalization at this instant.
    pub joint: f64,
    pub revised_joint: RevisedScore,
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevisedInstant {
    pub t: u64,
    pub normalization_factor: f64,
    /// `f(c, t)` per component.
    pub component_factors: Vec<f64>,
    /// `π_c(t)` before revision.
    pub predicted: Vec<ModeDistribution>,
    /// `π_c(t)` restricted to admitted modes.
    pub posterior: Vec<ModeDistribution>,
    pub entries: Vec<RevisedEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevisedDiagnosis {
    pub diagnosis: TemporalDiagnosis,
    pub revised_joint: RevisedScore,
    pub revised_conditionals: Vec<RevisedScore>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevisionRun {
    pub instants: Vec<RevisedInstant>,
    pub diagnoses: Vec<RevisedDiagnosis>,
}

/// Runs the trellis with revision at every relevant instant. Each instant
/// normalizes the joints of all one-step extensions of the evolutions that
/// survived so far; the threshold is then checked on the revised
/// conditional (global) or the revised per-component transitions.
pub fn revise_trellis(
    trellis: &Trellis,
    model: &SystemModel,
    threshold: &Threshold,
    cap: u64,
) -> Result<RevisionRun, EngineError> {
    let mut cache = PowerCache::new(model);
    let first: &Layer = &trellis.layers[0];

    let predicted: Vec<ModeDistribution> = trellis
        .initials
        .iter()
        .enumerate()
        .map(|(ci, init)| cache.distribution_at(ci, init, first.t))
        .collect();
    let mut instant = revise_marginals(model, first, predicted)?;
    let factor = normalization_factor(&trellis.priors)?;
    instant.normalization_factor = factor;
    instant.entries = trellis
        .priors
        .iter()
        .enumerate()
        .map(|(i, &prior)| RevisedEntry {
            path: vec![i],
            conditional: None,
            revised_conditional: None,
            revised_transitions: Vec::new(),
            joint: prior,
            revised_joint: RevisedScore(prior * factor),
            admissible: true,
        })
        .collect();

    let mut instants = vec![instant];
    for k in 1..trellis.layers.len() {
        let layer = &trellis.layers[k];
        let prev = instants.last().expect("first instant pushed");
        let gap = layer.t - trellis.layers[k - 1].t;
        let predicted: Vec<ModeDistribution> = prev
            .posterior
            .iter()
            .enumerate()
            .map(|(ci, pi)| cache.distribution_at(ci, pi, gap))
            .collect();
        let mut instant = revise_marginals(model, layer, predicted)?;

        let mut entries = Vec::new();
        for survivor in prev.entries.iter().filter(|e| e.admissible) {
            let last = *survivor.path.last().expect("paths are nonempty");
            for j in 0..layer.candidates.len() {
                if entries.len() as u64 >= cap {
                    return Err(EngineError::TooManyTrajectories(cap));
                }
                let edge = trellis.edge(k - 1, last, j);
                let mut path = survivor.path.clone();
                path.push(j);
                entries.push(RevisedEntry {
                    path,
                    conditional: Some(edge.conditional),
                    revised_conditional: None,
                    revised_transitions: edge
                        .factors
                        .iter()
                        .zip(&instant.component_factors)
                        .map(|(&p, &f)| revise_transition(p, f))
                        .collect(),
                    joint: survivor.revised_joint.value() * edge.conditional,
                    revised_joint: RevisedScore(0.0),
                    admissible: false,
                });
            }
        }
        let joints: Vec<f64> = entries.iter().map(|e| e.joint).collect();
        let factor = normalization_factor(&joints)?;
        for entry in &mut entries {
            let conditional = entry.conditional.expect("set for every step") * factor;
            let transitions: Vec<f64> = entry.revised_transitions.iter().map(|s| s.value()).collect();
            entry.revised_conditional = Some(RevisedScore(conditional));
            entry.revised_joint = RevisedScore(entry.joint * factor);
            entry.admissible = threshold.admits(conditional, &transitions);
        }
        if !entries.iter().any(|e| e.admissible) {
            return Err(EngineError::NoAdmissibleEvolution);
        }
        instant.normalization_factor = factor;
        instant.entries = entries;
        instants.push(instant);
    }

    let last = instants.last().expect("at least one instant");
    let mut diagnoses: Vec<RevisedDiagnosis> = last
        .entries
        .iter()
        .filter(|e| e.admissible)
        .map(|e| {
            let revised_conditionals = (1..e.path.len())
                .map(|k| {
                    let entry = instants[k]
                        .entries
                        .iter()
                        .find(|x| x.path[..] == e.path[..=k])
                        .expect("prefix recorded at every instant");
                    entry.revised_conditional.expect("step entries carry a conditional")
                })
                .collect();
            RevisedDiagnosis {
                diagnosis: trellis.diagnosis_for(&e.path),
                revised_joint: e.revised_joint,
                revised_conditionals,
            }
        })
        .collect();

    // order by revised joint, reusing the raw ranking's tie-break
    let mut raw: Vec<TemporalDiagnosis> = diagnoses
        .iter()
        .map(|d| TemporalDiagnosis {
            joint_probability: d.revised_joint.value(),
            ..d.diagnosis.clone()
        })
        .collect();
    rank(&mut raw, model);
    let mut ordered = Vec::with_capacity(diagnoses.len());
    for r in raw {
        let pos = diagnoses
            .iter()
            .position(|d| d.diagnosis.trajectory == r.trajectory)
            .expect("same trajectory set");
        ordered.push(diagnoses.swap_remove(pos));
    }
    Ok(RevisionRun {
        instants,
        diagnoses: ordered,
    })
}

fn revise_marginals(
    model: &SystemModel,
    layer: &Layer,
    predicted: Vec<ModeDistribution>,
) -> Result<RevisedInstant, RevisionError> {
    let admitted = admitted_modes(model, &layer.candidates);
    let mut component_factors = Vec::with_capacity(predicted.len());
    let mut posterior = Vec::with_capacity(predicted.len());
    for ((c, pi), adm) in model.components().iter().zip(&predicted).zip(&admitted) {
        component_factors.push(component_mass_factor(c, pi, adm)?);
        posterior.push(posterior_component_distribution(c, pi, adm)?);
    }
    Ok(RevisedInstant {
        t: layer.t,
        normalization_factor: 1.0,
        component_factors,
        predicted,
        posterior,
        entries: Vec::new(),
    })
}
