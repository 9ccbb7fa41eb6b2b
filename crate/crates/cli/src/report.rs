//! JSON report shapes written to standard output.

use std::collections::BTreeMap;

use serde::Serialize;
use tempdiag::format::ObservationFile;
use tempdiag::revision::{RevisedDiagnosis, RevisionRun};
use tempdiag::stochastic::{FaultClass, ModeDistribution, StateLabel};
use tempdiag::temporal::{Layer, TemporalDiagnosis, Trellis};
use tempdiag::{ExplanationCriterion, ModeAssignment, SystemModel, ThresholdMode};

#[derive(Debug, Serialize)]
pub struct ConfigEcho {
    pub sigma: f64,
    pub threshold_mode: ThresholdMode,
    pub criterion: ExplanationCriterion,
    pub revise: bool,
    pub seed: Option<u64>,
    pub candidate_cap: u64,
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub exit_code: u8,
    pub file: Option<String>,
    pub element: String,
    pub rule: String,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct StepReport {
    pub t: u64,
    pub modes: BTreeMap<String, String>,
}

pub fn trajectory(model: &SystemModel, steps: &[ModeAssignment]) -> Vec<StepReport> {
    steps
        .iter()
        .map(|w| StepReport {
            t: w.t,
            modes: w.to_named(model),
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ComponentSummary {
    pub id: String,
    pub modes: Vec<String>,
    pub correct_mode: String,
}

#[derive(Debug, Serialize)]
pub struct ValidateReport {
    pub command: &'static str,
    pub model_file: String,
    pub components: Vec<ComponentSummary>,
    pub rules: usize,
    pub manifestations: Vec<String>,
    pub observations_file: Option<String>,
    pub relevant_instants: Option<Vec<u64>>,
    pub valid: bool,
}

#[derive(Debug, Serialize)]
pub struct StateReport {
    pub mode: String,
    pub label: StateLabel,
}

#[derive(Debug, Serialize)]
pub struct ClassifiedComponent {
    pub id: String,
    pub correct_mode: String,
    pub states: Vec<StateReport>,
    pub ergodic_sets: Vec<Vec<String>>,
    pub transient_sets: Vec<Vec<String>>,
    pub faults: Vec<FaultClass>,
}

#[derive(Debug, Serialize)]
pub struct ClassifyReport {
    pub command: &'static str,
    pub components: Vec<ClassifiedComponent>,
}

#[derive(Debug, Serialize)]
pub struct DistributionRow {
    pub t: u64,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct PropagatedComponent {
    pub id: String,
    pub modes: Vec<String>,
    pub initial_source: &'static str,
    pub table: Vec<DistributionRow>,
}

#[derive(Debug, Serialize)]
pub struct PropagateReport {
    pub command: &'static str,
    pub components: Vec<PropagatedComponent>,
}

#[derive(Debug, Serialize)]
pub struct InstantCandidates {
    pub t: u64,
    pub candidates: Vec<BTreeMap<String, String>>,
}

#[derive(Debug, Serialize)]
pub struct EdgeReport {
    pub from: usize,
    pub to: usize,
    pub conditional: f64,
    pub factors: BTreeMap<String, f64>,
    pub admissible: bool,
}

#[derive(Debug, Serialize)]
pub struct TrellisStep {
    pub from_t: u64,
    pub to_t: u64,
    pub edges: Vec<EdgeReport>,
}

#[derive(Debug, Serialize)]
pub struct NamedDistribution {
    pub id: String,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct DiagnosisReport {
    pub rank: usize,
    pub trajectory: Vec<StepReport>,
    pub prior: f64,
    pub step_conditionals: Vec<f64>,
    pub joint_probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revised_joint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revised_conditionals: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct RevisionEntryReport {
    pub path: Vec<usize>,
    pub conditional: Option<f64>,
    pub revised_conditional: Option<f64>,
    pub revised_transitions: BTreeMap<String, f64>,
    pub joint: f64,
    pub revised_joint: f64,
    pub admissible: bool,
}

#[derive(Debug, Serialize)]
pub struct RevisionInstantReport {
    pub t: u64,
    pub normalization_factor: f64,
    pub component_factors: BTreeMap<String, f64>,
    pub predicted: BTreeMap<String, Vec<f64>>,
    pub posterior: BTreeMap<String, Vec<f64>>,
    pub entries: Vec<RevisionEntryReport>,
}

#[derive(Debug, Serialize)]
pub struct RevisionReport {
    pub instants: Vec<RevisionInstantReport>,
}

#[derive(Debug, Serialize)]
pub struct DiagnoseReport {
    pub command: &'static str,
    pub config: ConfigEcho,
    pub candidate_source: &'static str,
    pub instants: Vec<InstantCandidates>,
    pub initial_distributions: Vec<NamedDistribution>,
    pub trellis: Vec<TrellisStep>,
    pub diagnoses: Vec<DiagnosisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revision: Option<RevisionReport>,
}

#[derive(Debug, Serialize)]
pub struct SimulatedTrajectory {
    pub seed: u64,
    pub modes: BTreeMap<String, Vec<String>>,
    pub observations: Vec<ObservationFile>,
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub command: &'static str,
    pub rng: &'static str,
    pub horizon: u64,
    pub instants: Vec<u64>,
    pub initial_distributions: Vec<NamedDistribution>,
    pub trajectories: Vec<SimulatedTrajectory>,
}

#[derive(Debug, Serialize)]
pub struct RankReport {
    pub command: &'static str,
    pub initial_distributions: Vec<NamedDistribution>,
    pub diagnoses: Vec<DiagnosisReport>,
}

fn per_component<T: Copy>(model: &SystemModel, values: &[T]) -> BTreeMap<String, T> {
    model
        .components()
        .iter()
        .zip(values)
        .map(|(c, &v)| (c.id().to_string(), v))
        .collect()
}

fn per_component_dist(model: &SystemModel, dists: &[ModeDistribution]) -> BTreeMap<String, Vec<f64>> {
    model
        .components()
        .iter()
        .zip(dists)
        .map(|(c, d)| (c.id().to_string(), d.probabilities().to_vec()))
        .collect()
}

pub fn named_distributions(model: &SystemModel, dists: &[ModeDistribution]) -> Vec<NamedDistribution> {
    model
        .components()
        .iter()
        .zip(dists)
        .map(|(c, d)| NamedDistribution {
            id: c.id().to_string(),
            probabilities: d.probabilities().to_vec(),
        })
        .collect()
}

pub fn instants(model: &SystemModel, layers: &[Layer]) -> Vec<InstantCandidates> {
    layers
        .iter()
        .map(|l| InstantCandidates {
            t: l.t,
            candidates: l.candidates.iter().map(|w| w.to_named(model)).collect(),
        })
        .collect()
}

pub fn trellis_steps(model: &SystemModel, trellis: &Trellis) -> Vec<TrellisStep> {
    trellis
        .edges
        .iter()
        .enumerate()
        .map(|(k, edges)| TrellisStep {
            from_t: trellis.layers[k].t,
            to_t: trellis.layers[k + 1].t,
            edges: edges
                .iter()
                .map(|e| EdgeReport {
                    from: e.from,
                    to: e.to,
                    conditional: e.conditional,
                    factors: per_component(model, &e.factors),
                    admissible: e.admissible,
                })
                .collect(),
        })
        .collect()
}

pub fn diagnoses(model: &SystemModel, ranked: &[TemporalDiagnosis]) -> Vec<DiagnosisReport> {
    ranked
        .iter()
        .enumerate()
        .map(|(i, d)| DiagnosisReport {
            rank: i + 1,
            trajectory: trajectory(model, &d.trajectory),
            prior: d.prior,
            step_conditionals: d.step_conditionals.clone(),
            joint_probability: d.joint_probability,
            revised_joint: None,
            revised_conditionals: None,
        })
        .collect()
}

pub fn revised_diagnoses(model: &SystemModel, ranked: &[RevisedDiagnosis]) -> Vec<DiagnosisReport> {
    ranked
        .iter()
        .enumerate()
        .map(|(i, r)| DiagnosisReport {
            rank: i + 1,
            trajectory: trajectory(model, &r.diagnosis.trajectory),
            prior: r.diagnosis.prior,
            step_conditionals: r.diagnosis.step_conditionals.clone(),
            joint_probability: r.diagnosis.joint_probability,
            revised_joint: Some(r.revised_joint.value()),
            revised_conditionals: Some(r.revised_conditionals.iter().map(|s| s.value()).collect()),
        })
        .collect()
}

pub fn revision(model: &SystemModel, run: &RevisionRun) -> RevisionReport {
    RevisionReport {
        instants: run
            .instants
            .iter()
            .map(|i| RevisionInstantReport {
                t: i.t,
                normalization_factor: i.normalization_factor,
                component_factors: per_component(model, &i.component_factors),
                predicted: per_component_dist(model, &i.predicted),
                posterior: per_component_dist(model, &i.posterior),
                entries: i
                    .entries
                    .iter()
                    .map(|e| RevisionEntryReport {
                        path: e.path.clone(),
                        conditional: e.conditional,
                        revised_conditional: e.revised_conditional.map(|s| s.value()),
                        revised_transitions: e
                            .revised_transitions
                            .iter()
                            .zip(model.components())
                            .map(|(s, c)| (c.id().to_string(), s.value()))
                            .collect(),
                        joint: e.joint,
                        revised_joint: e.revised_joint.value(),
                        admissible: e.admissible,
                    })
                    .collect(),
            })
            .collect(),
    }
}
