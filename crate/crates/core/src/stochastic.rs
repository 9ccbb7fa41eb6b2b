//! Discrete-time Markov chain kernel.
//!
//! Each component's behavioral modes evolve as a time-homogeneous DTMC. This
//! module holds the validated transition matrix, n-step powers, distribution
//! propagation, geometric sojourn times and the structural classification of
//! chain states and fault modes.

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;
use thiserror::Error;

/// Allowed deviation of a row (or distribution) sum from 1.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Allowed deviation of a self-loop from 1 for a state to count as absorbing.
pub const ABSORBING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StochasticError {
    #[error("matrix has no modes")]
    Empty,
    #[error("matrix is not square: {modes} modes but row {row} has {len} entries")]
    NotSquare { modes: usize, row: usize, len: usize },
    #[error("matrix has {modes} modes but {rows} rows")]
    RowCount { modes: usize, rows: usize },
    #[error("mode `{0}` is declared twice")]
    DuplicateMode(String),
    #[error("row {row} sums to {sum}, expected 1")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("entry ({row}, {col}) = {value} is outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("distribution entry {index} = {value} is outside [0, 1]")]
    DistributionEntryOutOfRange { index: usize, value: f64 },
    #[error("distribution sums to {0}, expected 1")]
    DistributionSum(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sojourn in an absorbing state never ends")]
    AbsorbingSojourn,
    #[error("invalid sojourn arguments: p_self = {p_self}, t = {t}")]
    InvalidSojournArgument { p_self: f64, t: u64 },
    #[error("correct mode `{0}` is not a mode of the chain")]
    NoCorrectMode(String),
}

/// Row-stochastic one-step transition matrix over an ordered list of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    modes: Vec<String>,
    // row-major, dim * dim
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// Validates and builds a matrix. `rows[i][j]` is the probability of
    /// moving from `modes[i]` to `modes[j]` in one step.
    pub fn new(modes: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, StochasticError> {
        let dim = modes.len();
        if dim == 0 {
            return Err(StochasticError::Empty);
        }
        for (i, mode) in modes.iter().enumerate() {
            if modes[..i].contains(mode) {
                return Err(StochasticError::DuplicateMode(mode.clone()));
            }
        }
        if rows.len() != dim {
            return Err(StochasticError::RowCount {
                modes: dim,
                rows: rows.len(),
            });
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for (row, values) in rows.iter().enumerate() {
            if values.len() != dim {
                return Err(StochasticError::NotSquare {
                    modes: dim,
                    row,
                    len: values.len(),
                });
            }
            for (col, &value) in values.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(StochasticError::EntryOutOfRange { row, col, value });
                }
            }
            let sum: f64 = values.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(StochasticError::RowSumViolation { row, sum });
            }
            entries.extend_from_slice(values);
        }
        Ok(Self { modes, entries })
    }

    pub fn identity(modes: Vec<String>) -> Self {
        let dim = modes.len();
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { modes, entries }
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[String] {
        &self.modes
    }

    pub fn mode_index(&self, mode: &str) -> Option<usize> {
        self.modes.iter().position(|m| m == mode)
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.dim() + to]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let dim = self.dim();
        &self.entries[i * dim..(i + 1) * dim]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| self.row(i).to_vec()).collect()
    }

    /// Matrix product `self · other`. Both operands must share the mode list.
    pub fn multiply(&self, other: &TransitionMatrix) -> Result<TransitionMatrix, StochasticError> {
        if self.dim() != other.dim() {
            return Err(StochasticError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &TransitionMatrix) -> TransitionMatrix {
        let dim = self.dim();
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for k in 0..dim {
                let a = self.entries[i * dim + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    entries[i * dim + j] += a * other.entries[k * dim + j];
                }
            }
        }
        TransitionMatrix {
            modes: self.modes.clone(),
            entries,
        }
    }

    /// n-step transition matrix by exponentiation by squaring.
    pub fn power(&self, n: u64) -> TransitionMatrix {
        let mut result = TransitionMatrix::identity(self.modes.clone());
        let mut base = self.clone();
        let mut exp = n;
        while exp > 0 {
            if exp & 1 == 1 {
                result = result.mul_unchecked(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.mul_unchecked(&base);
            }
        }
        result
    }

    /// Successor lists of the positive-entry digraph.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        (0..self.dim())
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }

    pub fn is_absorbing(&self, i: usize) -> bool {
        (self.get(i, i) - 1.0).abs() <= ABSORBING_TOLERANCE
    }
}

pub fn validate_matrix(modes: Vec<String>, rows: Vec<Vec<f64>>) -> Result<TransitionMatrix, StochasticError> {
    TransitionMatrix::new(modes, rows)
}

pub fn matrix_power(m: &TransitionMatrix, n: u64) -> TransitionMatrix {
    m.power(n)
}

/// Probability vector over a chain's ordered modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDistribution {
    probabilities: Vec<f64>,
}

impl ModeDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self, StochasticError> {
        if probabilities.is_empty() {
            return Err(StochasticError::Empty);
        }
        for (index, &value) in probabilities.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(StochasticError::DistributionEntryOutOfRange { index, value });
            }
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(StochasticError::DistributionSum(sum));
        }
        Ok(Self { probabilities })
    }

    pub fn uniform(dim: usize) -> Self {
        Self {
            probabilities: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn point(dim: usize, index: usize) -> Self {
        let mut probabilities = vec![0.0; dim];
        probabilities[index] = 1.0;
        Self { probabilities }
    }

    /// Builds a distribution from values already known to be stochastic.
    pub(crate) fn from_computed(probabilities: Vec<f64>) -> Self {
        Self { probabilities }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probabilities[i]
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Row vector times matrix.
    pub fn step(&self, m: &TransitionMatrix) -> Result<ModeDistribution, StochasticError> {
        if self.len() != m.dim() {
            return Err(StochasticError::DimensionMismatch {
                expected: m.dim(),
                found: self.len(),
            });
        }
        let dim = m.dim();
        let mut out = vec![0.0; dim];
        for (i, &p) in self.probabilities.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, slot) in out.iter_mut().enumerate() {
                *slot += p * m.get(i, j);
            }
        }
        Ok(Self::from_computed(out))
    }
}

/// `π(n) = π(0) · Pⁿ`.
pub fn propagate_distribution(
    initial: &ModeDistribution,
    m: &TransitionMatrix,
    n: u64,
) -> Result<ModeDistribution, StochasticError> {
    initial.step(&m.power(n))
}

/// Probability that a sojourn in a state with self-loop `p_self` lasts exactly
/// `t` steps: `p_self^(t-1) (1 - p_self)`.
pub fn sojourn_pmf(p_self: f64, t: u64) -> Result<f64, StochasticError> {
    if !(0.0..=1.0).contains(&p_self) || t == 0 {
        return Err(StochasticError::InvalidSojournArgument { p_self, t });
    }
    if (p_self - 1.0).abs() <= ABSORBING_TOLERANCE {
        return Err(StochasticError::AbsorbingSojourn);
    }
    Ok(powi_u64(p_self, t - 1) * (1.0 - p_self))
}

/// `P(S > t) = p_self^t`.
pub fn sojourn_survival(p_self: f64, t: u64) -> f64 {
    powi_u64(p_self, t)
}

fn powi_u64(x: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(n) => x.powi(n),
        Err(_) => x.powf(n as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLabel {
    Absorbing,
    ErgodicNonAbsorbing,
    Transient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateClassification {
    pub labels: Vec<StateLabel>,
    /// Closed communicating classes, each sorted, ordered by smallest member.
    pub ergodic_sets: Vec<Vec<usize>>,
    /// Communicating classes that can be left.
    pub transient_sets: Vec<Vec<usize>>,
}

/// Classifies chain states from the strongly connected components of the
/// positive-entry digraph. Closed components are ergodic sets; a closed
/// singleton with unit self-loop is absorbing.
pub fn classify_states(m: &TransitionMatrix) -> StateClassification {
    let dim = m.dim();
    let mut graph = DiGraph::<(), ()>::with_capacity(dim, dim * dim);
    let nodes: Vec<NodeIndex> = (0..dim).map(|_| graph.add_node(())).collect();
    let successors = m.successors();
    for (i, succ) in successors.iter().enumerate() {
        for &j in succ {
            graph.add_edge(nodes[i], nodes[j], ());
        }
    }

    let mut component_of = vec![usize::MAX; dim];
    let mut components: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|scc| {
            let mut members: Vec<usize> = scc.into_iter().map(|n| n.index()).collect();
            members.sort_unstable();
            members
        })
        .collect();
    components.sort_by_key(|c| c[0]);
    for (idx, members) in components.iter().enumerate() {
        for &s in members {
            component_of[s] = idx;
        }
    }

    let mut labels = vec![StateLabel::Transient; dim];
    let mut ergodic_sets = Vec::new();
    let mut transient_sets = Vec::new();
    for (idx, members) in components.into_iter().enumerate() {
        let closed = members
            .iter()
            .all(|&s| successors[s].iter().all(|&t| component_of[t] == idx));
        if closed {
            for &s in &members {
                labels[s] = if members.len() == 1 && m.is_absorbing(s) {
                    StateLabel::Absorbing
                } else {
                    StateLabel::ErgodicNonAbsorbing
                };
            }
            ergodic_sets.push(members);
        } else {
            transient_sets.push(members);
        }
    }

    StateClassification {
        labels,
        ergodic_sets,
        transient_sets,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FaultClass {
    pub mode: String,
    pub state: StateLabel,
    pub permanent: bool,
    pub transient: bool,
    pub reversible: bool,
    pub irreversible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FaultClassification {
    pub correct_mode: String,
    pub faults: Vec<FaultClass>,
}

/// A-priori fault taxonomy. A fault is reversible iff the correct mode is
/// reachable from it in the positive-entry digraph.
pub fn classify_faults(
    m: &TransitionMatrix,
    correct_mode: &str,
) -> Result<FaultClassification, StochasticError> {
    let correct = m
        .mode_index(correct_mode)
        .ok_or_else(|| StochasticError::NoCorrectMode(correct_mode.to_string()))?;
    let states = classify_states(m);
    let successors = m.successors();

    let faults = (0..m.dim())
        .filter(|&i| i != correct)
        .map(|i| {
            let reversible = reaches(&successors, i, correct);
            let state = states.labels[i];
            FaultClass {
                mode: m.modes()[i].clone(),
                state,
                permanent: state == StateLabel::Absorbing,
                transient: state == StateLabel::Transient,
                reversible,
                irreversible: !reversible,
            }
        })
        .collect();

    Ok(FaultClassification {
        correct_mode: correct_mode.to_string(),
        faults,
    })
}

/// Whether `target` is reachable from `from` by a path of length >= 1.
fn reaches(successors: &[Vec<usize>], from: usize, target: usize) -> bool {
    let mut seen = vec![false; successors.len()];
    let mut stack: Vec<usize> = successors[from].clone();
    while let Some(s) = stack.pop() {
        if s == target {
            return true;
        }
        if !seen[s] {
            seen[s] = true;
            stack.extend(successors[s].iter().copied().filter(|&t| !seen[t]));
        }
    }
    false
}
