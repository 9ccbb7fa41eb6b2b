//! System description: components with their mode chains, the atemporal Horn
//! behavioral model, and time-stamped observations.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::stochastic::{
    classify_faults, FaultClassification, ModeDistribution, StochasticError, TransitionMatrix,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model declares no components")]
    NoComponents,
    #[error("component `{0}` is declared twice")]
    DuplicateComponent(String),
    #[error("component `{component}`: invalid transition matrix: {source}")]
    MatrixInvalid {
        component: String,
        #[source]
        source: StochasticError,
    },
    #[error("component `{component}`: correct mode `{mode}` is not among its modes")]
    CorrectModeMissing { component: String, mode: String },
    #[error("component `{component}`: invalid initial distribution: {source}")]
    InitialDistributionInvalid {
        component: String,
        #[source]
        source: StochasticError,
    },
    #[error("rule {rule}: unknown mode atom {mode}({component})")]
    UnknownModeAtom {
        rule: usize,
        component: String,
        mode: String,
    },
    #[error("rule {rule}: empty body")]
    EmptyRuleBody { rule: usize },
    #[error("rule {rule}: component `{component}` appears more than once in the body")]
    RepeatedComponentInBody { rule: usize, component: String },
    #[error("rule {rule}: head `{head}` is a mode atom")]
    HeadIsModeAtom { rule: usize, head: String },
    #[error("exclusivity pair {index}: `{atom}` is not the head of any rule")]
    UnknownExclusiveAtom { index: usize, atom: String },
    #[error("exclusivity pair {index}: `{atom}` is paired with itself")]
    SelfExclusive { index: usize, atom: String },
    #[error("observation {index}: time {t} does not follow the previous entry")]
    NonIncreasingTime { index: usize, t: u64 },
    #[error("observation at t = {t}: `{atom}` is both present and absent")]
    PresentAbsentOverlap { t: u64, atom: String },
    #[error("observation at t = {t}: `{atom}` is not the head of any rule")]
    UnknownManifestation { t: u64, atom: String },
}

impl ModelError {
    /// The offending element, for structured diagnostics.
    pub fn element(&self) -> String {
        use ModelError::*;
        match self {
            NoComponents => "components".into(),
            DuplicateComponent(c)
            | MatrixInvalid { component: c, .. }
            | InitialDistributionInvalid { component: c, .. } => format!("component {c}"),
            CorrectModeMissing { component, mode } => format!("component {component} mode {mode}"),
            UnknownModeAtom { rule, .. }
            | EmptyRuleBody { rule }
            | RepeatedComponentInBody { rule, .. }
            | HeadIsModeAtom { rule, .. } => format!("rules[{rule}]"),
            UnknownExclusiveAtom { index, .. } | SelfExclusive { index, .. } => {
                format!("exclusive[{index}]")
            }
            NonIncreasingTime { index, .. } => format!("observations[{index}]"),
            PresentAbsentOverlap { t, atom } | UnknownManifestation { t, atom } => {
                format!("observation t={t} atom {atom}")
            }
        }
    }

    /// Short identifier of the violated rule.
    pub fn rule(&self) -> &'static str {
        use ModelError::*;
        match self {
            NoComponents => "no_components",
            DuplicateComponent(_) => "duplicate_component",
            MatrixInvalid { .. } => "matrix_invalid",
            CorrectModeMissing { .. } => "correct_mode_missing",
            InitialDistributionInvalid { .. } => "initial_distribution_invalid",
            UnknownModeAtom { .. } => "unknown_mode_atom",
            EmptyRuleBody { .. } => "empty_rule_body",
            RepeatedComponentInBody { .. } => "repeated_component_in_body",
            HeadIsModeAtom { .. } => "head_is_mode_atom",
            UnknownExclusiveAtom { .. } => "unknown_exclusive_atom",
            SelfExclusive { .. } => "self_exclusive",
            NonIncreasingTime { .. } => "non_increasing_time",
            PresentAbsentOverlap { .. } => "present_absent_overlap",
            UnknownManifestation { .. } => "unknown_manifestation",
        }
    }
}

/// A component together with the Markov chain over its behavioral modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    id: String,
    matrix: TransitionMatrix,
    correct_mode: usize,
    initial: Option<ModeDistribution>,
}

impl ComponentSpec {
    pub fn new(
        id: impl Into<String>,
        modes: Vec<String>,
        correct_mode: &str,
        rows: Vec<Vec<f64>>,
        initial: Option<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        let matrix = TransitionMatrix::new(modes, rows).map_err(|source| ModelError::MatrixInvalid {
            component: id.clone(),
            source,
        })?;
        let correct = matrix
            .mode_index(correct_mode)
            .ok_or_else(|| ModelError::CorrectModeMissing {
                component: id.clone(),
                mode: correct_mode.to_string(),
            })?;
        let initial = match initial {
            None => None,
            Some(values) => {
                let dist = if values.len() != matrix.dim() {
                    Err(StochasticError::DimensionMismatch {
                        expected: matrix.dim(),
                        found: values.len(),
                    })
                } else {
                    ModeDistribution::new(values)
                };
                Some(dist.map_err(|source| ModelError::InitialDistributionInvalid {
                    component: id.clone(),
                    source,
                })?)
            }
        };
        Ok(Self {
            id,
            matrix,
            correct_mode: correct,
            initial,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn modes(&self) -> &[String] {
        self.matrix.modes()
    }

    pub fn mode_index(&self, mode: &str) -> Option<usize> {
        self.matrix.mode_index(mode)
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }

    pub fn correct_mode(&self) -> usize {
        self.correct_mode
    }

    pub fn correct_mode_name(&self) -> &str {
        &self.modes()[self.correct_mode]
    }

    pub fn initial_distribution(&self) -> Option<&ModeDistribution> {
        self.initial.as_ref()
    }

    pub fn classify_faults(&self) -> FaultClassification {
        classify_faults(&self.matrix, self.correct_mode_name())
            .expect("correct mode is validated on construction")
    }
}

/// The atom `mode(component)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeAtom {
    pub component: String,
    pub mode: String,
}

impl ModeAtom {
    pub fn new(component: impl Into<String>, mode: impl Into<String>) -> Self {
        Self {
            component: component.into(),
            mode: mode.into(),
        }
    }
}

impl std::fmt::Display for ModeAtom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}({})", self.mode, self.component)
    }
}

/// `body₁ ∧ … ∧ bodyₙ → head`, with mode atoms in the body and a
/// manifestation atom as head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HornRule {
    pub body: Vec<ModeAtom>,
    pub head: String,
}

impl HornRule {
    pub fn new(body: Vec<ModeAtom>, head: impl Into<String>) -> Self {
        Self {
            body,
            head: head.into(),
        }
    }
}

/// Rule with body atoms resolved to (component index, mode index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CompiledRule {
    pub(crate) body: Vec<(usize, usize)>,
    pub(crate) head: usize,
}

/// Validated system model. Components keep their declaration order; the
/// manifestation atoms are interned in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    components: Vec<ComponentSpec>,
    rules: Vec<HornRule>,
    exclusive: Vec<(String, String)>,
    atoms: Vec<String>,
    compiled: Vec<CompiledRule>,
    // alternatives[a] = atoms declared exclusive with atom a
    alternatives: Vec<Vec<usize>>,
    // component indices sorted by id
    id_order: Vec<usize>,
}

impl SystemModel {
    pub fn new(
        components: Vec<ComponentSpec>,
        rules: Vec<HornRule>,
        exclusive: Vec<(String, String)>,
    ) -> Result<Self, ModelError> {
        if components.is_empty() {
            return Err(ModelError::NoComponents);
        }
        let mut by_id: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, c) in components.iter().enumerate() {
            if by_id.insert(c.id(), i).is_some() {
                return Err(ModelError::DuplicateComponent(c.id().to_string()));
            }
        }
        let mode_atoms: BTreeSet<String> = components
            .iter()
            .flat_map(|c| c.modes().iter().map(|m| ModeAtom::new(c.id(), m.as_str()).to_string()))
            .collect();

        let atoms: Vec<String> = rules
            .iter()
            .map(|r| r.head.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let atom_index = |a: &str| atoms.binary_search_by(|x| x.as_str().cmp(a)).ok();

        let mut compiled = Vec::with_capacity(rules.len());
        for (ri, rule) in rules.iter().enumerate() {
            if rule.body.is_empty() {
                return Err(ModelError::EmptyRuleBody { rule: ri });
            }
            if mode_atoms.contains(&rule.head) {
                return Err(ModelError::HeadIsModeAtom {
                    rule: ri,
                    head: rule.head.clone(),
                });
            }
            let mut body = Vec::with_capacity(rule.body.len());
            for atom in &rule.body {
                let resolved = by_id.get(atom.component.as_str()).and_then(|&ci| {
                    components[ci].mode_index(&atom.mode).map(|mi| (ci, mi))
                });
                let Some((ci, mi)) = resolved else {
                    return Err(ModelError::UnknownModeAtom {
                        rule: ri,
                        component: atom.component.clone(),
                        mode: atom.mode.clone(),
                    });
                };
                if body.iter().any(|&(c, _)| c == ci) {
                    return Err(ModelError::RepeatedComponentInBody {
                        rule: ri,
                        component: atom.component.clone(),
                    });
                }
                body.push((ci, mi));
            }
            compiled.push(CompiledRule {
                body,
                head: atom_index(&rule.head).expect("head interned above"),
            });
        }

        let mut alternatives = vec![Vec::new(); atoms.len()];
        for (index, (a, b)) in exclusive.iter().enumerate() {
            if a == b {
                return Err(ModelError::SelfExclusive {
                    index,
                    atom: a.clone(),
                });
            }
            let ia = atom_index(a).ok_or_else(|| ModelError::UnknownExclusiveAtom {
                index,
                atom: a.clone(),
            })?;
            let ib = atom_index(b).ok_or_else(|| ModelError::UnknownExclusiveAtom {
                index,
                atom: b.clone(),
            })?;
            alternatives[ia].push(ib);
            alternatives[ib].push(ia);
        }
        for alts in &mut alternatives {
            alts.sort_unstable();
            alts.dedup();
        }

        let id_order = by_id.values().copied().collect();

        Ok(Self {
            components,
            rules,
            exclusive,
            atoms,
            compiled,
            alternatives,
            id_order,
        })
    }

    pub fn components(&self) -> &[ComponentSpec] {
        &self.components
    }

    pub fn component(&self, id: &str) -> Option<&ComponentSpec> {
        self.component_index(id).map(|i| &self.components[i])
    }

    pub fn component_index(&self, id: &str) -> Option<usize> {
        self.components.iter().position(|c| c.id() == id)
    }

    pub fn rules(&self) -> &[HornRule] {
        &self.rules
    }

    pub fn exclusive(&self) -> &[(String, String)] {
        &self.exclusive
    }

    /// All manifestation atoms (rule heads), sorted.
    pub fn manifestations(&self) -> &[String] {
        &self.atoms
    }

    pub fn is_manifestation(&self, atom: &str) -> bool {
        self.atom_index(atom).is_some()
    }

    pub(crate) fn atom_index(&self, atom: &str) -> Option<usize> {
        self.atoms.binary_search_by(|x| x.as_str().cmp(atom)).ok()
    }

    pub(crate) fn atom(&self, index: usize) -> &str {
        &self.atoms[index]
    }

    pub(crate) fn compiled_rules(&self) -> &[CompiledRule] {
        &self.compiled
    }

    /// Atoms declared mutually exclusive with `atom`.
    pub fn exclusive_alternatives(&self, atom: &str) -> Vec<&str> {
        self.atom_index(atom)
            .map(|i| self.alternatives[i].iter().map(|&j| self.atom(j)).collect())
            .unwrap_or_default()
    }

    pub(crate) fn alternative_indices(&self, atom: usize) -> &[usize] {
        &self.alternatives[atom]
    }

    /// Component indices in lexicographic order of component id.
    pub fn id_order(&self) -> &[usize] {
        &self.id_order
    }

    /// Checks that every atom in the stream is a known manifestation.
    pub fn check_observations(&self, stream: &ObservationStream) -> Result<(), ModelError> {
        for entry in stream.entries() {
            for atom in entry.present.iter().chain(&entry.absent) {
                if !self.is_manifestation(atom) {
                    return Err(ModelError::UnknownManifestation {
                        t: entry.t,
                        atom: atom.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn validate_model(
    components: Vec<ComponentSpec>,
    rules: Vec<HornRule>,
    exclusive: Vec<(String, String)>,
) -> Result<SystemModel, ModelError> {
    SystemModel::new(components, rules, exclusive)
}

/// Observations at one time point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Observation {
    pub t: u64,
    pub present: BTreeSet<String>,
    pub absent: BTreeSet<String>,
}

impl Observation {
    pub fn new<I, J, S, U>(t: u64, present: I, absent: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = U>,
        S: Into<String>,
        U: Into<String>,
    {
        Self {
            t,
            present: present.into_iter().map(Into::into).collect(),
            absent: absent.into_iter().map(Into::into).collect(),
        }
    }
}

/// Time-ordered observation entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ObservationStream {
    entries: Vec<Observation>,
}

impl ObservationStream {
    pub fn new(entries: Vec<Observation>) -> Result<Self, ModelError> {
        for (index, entry) in entries.iter().enumerate() {
            if index > 0 && entry.t <= entries[index - 1].t {
                return Err(ModelError::NonIncreasingTime { index, t: entry.t });
            }
            if let Some(atom) = entry.present.intersection(&entry.absent).next() {
                return Err(ModelError::PresentAbsentOverlap {
                    t: entry.t,
                    atom: atom.clone(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
