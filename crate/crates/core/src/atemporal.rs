//! Diagnosis at a single time point by exhaustive enumeration of mode
//! assignments.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Observation, SystemModel};

/// Default upper bound on the number of assignments enumerated per instant.
pub const DEFAULT_CANDIDATE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssignmentError {
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("component `{component}` has no mode `{mode}`")]
    UnknownMode { component: String, mode: String },
    #[error("no mode assigned to component `{0}`")]
    MissingComponent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("search space of {size} assignments exceeds the cap of {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationCriterion {
    /// Observed manifestations must be predicted, and nothing predicted may
    /// contradict the observations.
    #[default]
    Abductive,
    /// Nothing predicted may contradict the observations.
    ConsistencyBased,
}

/// One mode per component at time `t`. Modes are indexed by the model's
/// component declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeAssignment {
    pub t: u64,
    modes: Vec<usize>,
}

impl ModeAssignment {
    /// Raw constructor; `modes[i]` is the mode index of component `i`.
    pub fn from_indices(t: u64, modes: Vec<usize>) -> Self {
        Self { t, modes }
    }

    /// Builds an assignment from `(component id, mode name)` pairs, which must
    /// cover every component exactly once.
    pub fn from_names<'a, I>(model: &SystemModel, t: u64, pairs: I) -> Result<Self, AssignmentError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut modes = vec![usize::MAX; model.components().len()];
        for (component, mode) in pairs {
            let ci = model
                .component_index(component)
                .ok_or_else(|| AssignmentError::UnknownComponent(component.to_string()))?;
            let mi = model.components()[ci].mode_index(mode).ok_or_else(|| {
                AssignmentError::UnknownMode {
                    component: component.to_string(),
                    mode: mode.to_string(),
                }
            })?;
            modes[ci] = mi;
        }
        if let Some(ci) = modes.iter().position(|&m| m == usize::MAX) {
            return Err(AssignmentError::MissingComponent(
                model.components()[ci].id().to_string(),
            ));
        }
        Ok(Self { t, modes })
    }

    pub fn mode_of(&self, component: usize) -> usize {
        self.modes[component]
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn at(&self, t: u64) -> Self {
        Self {
            t,
            modes: self.modes.clone(),
        }
    }

    /// Mode indices listed in lexicographic component-id order.
    pub fn sort_key(&self, model: &SystemModel) -> Vec<usize> {
        model.id_order().iter().map(|&ci| self.modes[ci]).collect()
    }

    pub fn to_named(&self, model: &SystemModel) -> BTreeMap<String, String> {
        model
            .components()
            .iter()
            .zip(&self.modes)
            .map(|(c, &m)| (c.id().to_string(), c.modes()[m].clone()))
            .collect()
    }

    /// Compact rendering such as `{C:correct, P:occluded}`.
    pub fn display(&self, model: &SystemModel) -> String {
        let parts: Vec<String> = self
            .to_named(model)
            .into_iter()
            .map(|(c, m)| format!("{c}:{m}"))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

fn predicted_flags(w: &ModeAssignment, model: &SystemModel) -> Vec<bool> {
    let mut flags = vec![false; model.manifestations().len()];
    for rule in model.compiled_rules() {
        if rule.body.iter().all(|&(c, m)| w.mode_of(c) == m) {
            flags[rule.head] = true;
        }
    }
    flags
}

/// Heads of all rules whose bodies hold under `w`.
pub fn predicted_manifestations<'m>(w: &ModeAssignment, model: &'m SystemModel) -> BTreeSet<&'m str> {
    predicted_flags(w, model)
        .into_iter()
        .enumerate()
        .filter(|(_, on)| *on)
        .map(|(i, _)| model.atom(i))
        .collect()
}

pub fn is_explanation(
    w: &ModeAssignment,
    present: &BTreeSet<String>,
    absent: &BTreeSet<String>,
    criterion: ExplanationCriterion,
    model: &SystemModel,
) -> bool {
    let predicted = predicted_flags(w, model);
    explains(&predicted, present, absent, criterion, model)
}

fn explains(
    predicted: &[bool],
    present: &BTreeSet<String>,
    absent: &BTreeSet<String>,
    criterion: ExplanationCriterion,
    model: &SystemModel,
) -> bool {
    let is_predicted = |atom: &str| model.atom_index(atom).is_some_and(|i| predicted[i]);
    if absent.iter().any(|a| is_predicted(a)) {
        return false;
    }
    for atom in present {
        if let Some(i) = model.atom_index(atom) {
            if model.alternative_indices(i).iter().any(|&j| predicted[j]) {
                return false;
            }
        }
    }
    match criterion {
        ExplanationCriterion::ConsistencyBased => true,
        ExplanationCriterion::Abductive => present.iter().all(|a| is_predicted(a)),
    }
}

/// Number of total assignments over the model's components.
pub fn search_space_size(model: &SystemModel) -> u128 {
    model
        .components()
        .iter()
        .fold(1u128, |acc, c| acc.saturating_mul(c.modes().len() as u128))
}

/// Every total assignment explaining `obs`, in lexicographic order of
/// (component id, mode index).
pub fn solve_atemporal(
    model: &SystemModel,
    obs: &Observation,
    criterion: ExplanationCriterion,
    cap: u64,
) -> Result<Vec<ModeAssignment>, SolveError> {
    let size = search_space_size(model);
    if size > cap as u128 {
        return Err(SolveError::SearchSpaceTooLarge { size, cap });
    }
    let order = model.id_order();
    let radix: Vec<usize> = order
        .iter()
        .map(|&ci| model.components()[ci].modes().len())
        .collect();

    let mut out = Vec::new();
    let mut digits = vec![0usize; order.len()];
    let mut modes = vec![0usize; order.len()];
    loop {
        for (pos, &ci) in order.iter().enumerate() {
            modes[ci] = digits[pos];
        }
        let w = ModeAssignment::from_indices(obs.t, modes.clone());
        let predicted = predicted_flags(&w, model);
        if explains(&predicted, &obs.present, &obs.absent, criterion, model) {
            out.push(w);
        }
        // odometer, last component id varies fastest
        let mut pos = order.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < radix[pos] {
                break;
            }
            digits[pos] = 0;
        }
    }
}
