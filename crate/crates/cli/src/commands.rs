use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use tempdiag::format::{self, parse_probability, FormatError};
use tempdiag::model::ModelError;
use tempdiag::revision::revise_trellis;
use tempdiag::sim::{generate_observation_stream, SimError, TrajectorySampler, RNG_ALGORITHM};
use tempdiag::stochastic::{classify_states, propagate_distribution, ModeDistribution};
use tempdiag::temporal::{
    candidate_layers, rank, resolve_initials, score_trajectory, trellis_for_layers, DiagnosticProblem,
    EngineError, Layer, Threshold,
};
use tempdiag::SystemModel;

use crate::report::{self, ConfigEcho, ErrorBody, ErrorReport};
use crate::{Cli, Command, RunConfig};

pub struct Output {
    pub json: String,
    pub summary: String,
}

#[derive(Debug)]
pub struct CliError(pub ErrorBody);

impl CliError {
    fn new(exit_code: u8, file: Option<&Path>, element: impl Into<String>, rule: &str, message: impl ToString) -> Self {
        CliError(ErrorBody {
            exit_code,
            file: file.map(|p| p.display().to_string()),
            element: element.into(),
            rule: rule.to_string(),
            message: message.to_string(),
        })
    }

    fn format(file: &Path, err: FormatError) -> Self {
        match &err {
            FormatError::Json(e) => Self::new(1, Some(file), format!("line {} column {}", e.line(), e.column()), "malformed_json", &err),
            FormatError::Model(m) => Self::model(Some(file), m),
            FormatError::Assignment { t, .. } => Self::new(1, Some(file), format!("assignment t={t}"), "invalid_assignment", &err),
            FormatError::NonIncreasingLayer { index, .. } => {
                Self::new(1, Some(file), format!("entry[{index}]"), "non_increasing_time", &err)
            }
        }
    }

    fn model(file: Option<&Path>, err: &ModelError) -> Self {
        Self::new(1, file, err.element(), err.rule(), err)
    }

    fn engine(file: Option<&Path>, err: EngineError) -> Self {
        use EngineError::*;
        let (code, element, rule) = match &err {
            NoCandidatesAtInstant(t) => (2, format!("observation t={t}"), "no_candidates_at_instant"),
            NoAdmissibleEvolution => (2, "trellis".to_string(), "no_admissible_evolution"),
            Revision(_) => (2, "revision".to_string(), "revision_undefined"),
            Solve(_) => (3, "search_space".to_string(), "candidate_cap"),
            TooManyTrajectories(_) => (3, "trellis".to_string(), "candidate_cap"),
            EmptyStream => (1, "observations".to_string(), "empty_stream"),
            InvalidSigma(_) => (1, "--sigma".to_string(), "sigma_out_of_range"),
            NonIncreasingInstants { .. } => (1, "trajectory".to_string(), "non_increasing_time"),
            MissingInitialDistribution(c) => (1, format!("component {c}"), "missing_initial_distribution"),
            EmptyCandidateSet | WeightCount { .. } | WeightSumViolation(_) => {
                (1, "candidates".to_string(), "invalid_candidates")
            }
        };
        Self::new(code, file, element, rule, err)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ErrorReport {
            error: self.0.clone(),
        })
        .expect("error report serializes")
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::new(1, Some(path), "file", "unreadable_file", e))
}

fn load_model(path: &Path) -> Result<SystemModel, CliError> {
    format::parse_model(&read(path)?).map_err(|e| CliError::format(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn threshold(config: &RunConfig) -> Result<Threshold, CliError> {
    let sigma = parse_probability(&config.sigma)
        .map_err(|m| CliError::new(1, None, "--sigma", "sigma_not_a_number", m))?;
    Threshold::new(sigma, config.threshold_mode()).map_err(|e| CliError::engine(None, e))
}

fn declared_or_uniform(model: &SystemModel) -> (Vec<ModeDistribution>, Vec<&'static str>) {
    let sources = model
        .components()
        .iter()
        .map(|c| if c.initial_distribution().is_some() { "declared" } else { "uniform" })
        .collect();
    (resolve_initials(model, None), sources)
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let config = &cli.config;
    match &cli.command {
        Command::Validate { model, observations } => validate(model, observations.as_deref()),
        Command::Classify { model } => classify(model),
        Command::Propagate { model } => propagate(model, config),
        Command::Diagnose {
            model,
            observations,
            candidates,
        } => diagnose(model, observations.as_deref(), candidates.as_deref(), config),
        Command::Simulate {
            model,
            count,
            stream_only,
        } => simulate(model, *count, *stream_only, config),
        Command::Rank { model, trajectories } => rank_trajectories(model, trajectories),
    }
}

fn validate(model_path: &Path, obs_path: Option<&Path>) -> Result<Output, CliError> {
    let model = load_model(model_path)?;
    let mut relevant = None;
    if let Some(path) = obs_path {
        let stream = format::parse_observations(&read(path)?).map_err(|e| CliError::format(path, e))?;
        model
            .check_observations(&stream)
            .map_err(|e| CliError::model(Some(path), &e))?;
        relevant = Some(stream.entries().iter().map(|e| e.t).collect::<Vec<_>>());
    }
    let report = report::ValidateReport {
        command: "validate",
        model_file: model_path.display().to_string(),
        components: model
            .components()
            .iter()
            .map(|c| report::ComponentSummary {
                id: c.id().to_string(),
                modes: c.modes().to_vec(),
                correct_mode: c.correct_mode_name().to_string(),
            })
            .collect(),
        rules: model.rules().len(),
        manifestations: model.manifestations().to_vec(),
        observations_file: obs_path.map(|p| p.display().to_string()),
        relevant_instants: relevant.clone(),
        valid: true,
    };
    let mut summary = format!(
        "valid: {} components, {} rules\n",
        model.components().len(),
        model.rules().len()
    );
    if let Some(r) = relevant {
        let _ = writeln!(summary, "observations: {} relevant instants", r.len());
    }
    Ok(Output {
        json: to_json(&report),
        summary,
    })
}

fn classify(model_path: &Path) -> Result<Output, CliError> {
    let model = load_model(model_path)?;
    let mut summary = String::new();
    let components = model
        .components()
        .iter()
        .map(|c| {
            let states = classify_states(c.matrix());
            let faults = c.classify_faults();
            let names = |sets: &[Vec<usize>]| -> Vec<Vec<String>> {
                sets.iter()
                    .map(|s| s.iter().map(|&i| c.modes()[i].clone()).collect())
                    .collect()
            };
            for f in &faults.faults {
                let _ = writeln!(
                    summary,
                    "{}({}): {}{}",
                    f.mode,
                    c.id(),
                    if f.permanent {
                        "permanent"
                    } else if f.transient {
                        "transient"
                    } else {
                        "recurrent"
                    },
                    if f.reversible { ", reversible" } else { ", irreversible" }
                );
            }
            report::ClassifiedComponent {
                id: c.id().to_string(),
                correct_mode: c.correct_mode_name().to_string(),
                states: c
                    .modes()
                    .iter()
                    .zip(&states.labels)
                    .map(|(m, &label)| report::StateReport { mode: m.clone(), label })
                    .collect(),
                ergodic_sets: names(&states.ergodic_sets),
                transient_sets: names(&states.transient_sets),
                faults: faults.faults,
            }
        })
        .collect();
    Ok(Output {
        json: to_json(&report::ClassifyReport {
            command: "classify",
            components,
        }),
        summary,
    })
}

fn propagate(model_path: &Path, config: &RunConfig) -> Result<Output, CliError> {
    let model = load_model(model_path)?;
    let instants = config.instants.clone().unwrap_or_else(|| vec![0]);
    let (initials, sources) = declared_or_uniform(&model);
    let mut summary = String::new();
    let components = model
        .components()
        .iter()
        .zip(initials.iter().zip(sources))
        .map(|(c, (init, source))| {
            let table = instants
                .iter()
                .map(|&t| report::DistributionRow {
                    t,
                    probabilities: propagate_distribution(init, c.matrix(), t)
                        .expect("initials match the component")
                        .probabilities()
                        .to_vec(),
                })
                .collect();
            let _ = writeln!(summary, "{}: {} instants from {} initial distribution", c.id(), instants.len(), source);
            report::PropagatedComponent {
                id: c.id().to_string(),
                modes: c.modes().to_vec(),
                initial_source: source,
                table,
            }
        })
        .collect();
    Ok(Output {
        json: to_json(&report::PropagateReport {
            command: "propagate",
            components,
        }),
        summary,
    })
}

fn diagnose(
    model_path: &Path,
    obs_path: Option<&Path>,
    candidates_path: Option<&Path>,
    config: &RunConfig,
) -> Result<Output, CliError> {
    let model = load_model(model_path)?;
    let threshold = threshold(config)?;
    let (layers, source, input): (Vec<Layer>, &'static str, &Path) = match (obs_path, candidates_path) {
        (Some(path), None) => {
            let stream = format::parse_observations(&read(path)?).map_err(|e| CliError::format(path, e))?;
            model
                .check_observations(&stream)
                .map_err(|e| CliError::model(Some(path), &e))?;
            let problem = DiagnosticProblem {
                model: model.clone(),
                observations: stream,
                threshold,
                criterion: config.criterion(),
                candidate_cap: config.cap,
            };
            let layers = candidate_layers(&problem).map_err(|e| CliError::engine(Some(path), e))?;
            (layers, "observations", path)
        }
        (None, Some(path)) => {
            let layers = format::parse_candidates(&read(path)?, &model).map_err(|e| CliError::format(path, e))?;
            (layers, "candidates", path)
        }
        _ => {
            return Err(CliError::new(
                1,
                None,
                "arguments",
                "missing_input",
                "diagnose needs an observation file or --candidates",
            ))
        }
    };
    let trellis = trellis_for_layers(&model, layers, &threshold).map_err(|e| CliError::engine(Some(input), e))?;

    let (diagnoses, revision) = if config.revise {
        let run = revise_trellis(&trellis, &model, &threshold, config.cap)
            .map_err(|e| CliError::engine(Some(input), e))?;
        (report::revised_diagnoses(&model, &run.diagnoses), Some(report::revision(&model, &run)))
    } else {
        let ranked = trellis
            .diagnoses(&model, config.cap)
            .map_err(|e| CliError::engine(Some(input), e))?;
        (report::diagnoses(&model, &ranked), None)
    };

    let mut summary = format!(
        "{} temporal diagnoses over {} relevant instants (sigma = {}, {:?})\n",
        diagnoses.len(),
        trellis.layers.len(),
        threshold.sigma(),
        threshold.mode
    );
    if let Some(top) = diagnoses.first() {
        let steps: Vec<String> = top
            .trajectory
            .iter()
            .map(|s| {
                let modes: Vec<String> = s.modes.iter().map(|(c, m)| format!("{c}:{m}")).collect();
                format!("t={} {{{}}}", s.t, modes.join(", "))
            })
            .collect();
        let _ = writeln!(summary, "most probable: {} (joint {})", steps.join(" -> "), top.joint_probability);
    }

    let report = report::DiagnoseReport {
        command: "diagnose",
        config: ConfigEcho {
            sigma: threshold.sigma(),
            threshold_mode: threshold.mode,
            criterion: config.criterion(),
            revise: config.revise,
            seed: config.seed,
            candidate_cap: config.cap,
        },
        candidate_source: source,
        instants: report::instants(&model, &trellis.layers),
        initial_distributions: report::named_distributions(&model, &trellis.initials),
        trellis: report::trellis_steps(&model, &trellis),
        diagnoses,
        revision,
    };
    Ok(Output {
        json: to_json(&report),
        summary,
    })
}

fn simulate(model_path: &Path, count: u64, stream_only: bool, config: &RunConfig) -> Result<Output, CliError> {
    let model = load_model(model_path)?;
    let horizon = config
        .horizon
        .ok_or_else(|| CliError::new(1, None, "--horizon", "missing_horizon", "simulate needs --horizon"))?;
    let instants = config.instants.clone().unwrap_or_else(|| (0..=horizon).collect());
    let seed = config.seed.unwrap_or(0);
    let (initials, _) = declared_or_uniform(&model);
    let sampler = TrajectorySampler::new(&model, &initials)
        .map_err(|e| CliError::new(1, Some(model_path), "initial_distribution", "missing_initial_distribution", e))?;

    let mut trajectories = Vec::new();
    for k in 0..count.max(1) {
        let traj = sampler.sample(horizon, seed.wrapping_add(k));
        let stream = generate_observation_stream(&traj, &model, &instants).map_err(|e| match e {
            SimError::InstantOutOfRange { t, .. } => {
                CliError::new(1, None, format!("--instants {t}"), "instant_out_of_range", e)
            }
            other => CliError::new(1, None, "simulation", "simulation_failed", other),
        })?;
        let modes: BTreeMap<String, Vec<String>> = model
            .components()
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                (
                    c.id().to_string(),
                    traj.component_modes(ci).iter().map(|&m| c.modes()[m].clone()).collect(),
                )
            })
            .collect();
        trajectories.push(report::SimulatedTrajectory {
            seed: traj.seed,
            modes,
            observations: format::stream_to_file(&stream),
        });
    }
    let summary = format!(
        "{} trajectories, horizon {horizon}, {RNG_ALGORITHM} seeds from {seed}\n",
        trajectories.len()
    );
    let json = if stream_only {
        to_json(&trajectories[0].observations)
    } else {
        to_json(&report::SimulateReport {
            command: "simulate",
            rng: RNG_ALGORITHM,
            horizon,
            instants,
            initial_distributions: report::named_distributions(&model, &initials),
            trajectories,
        })
    };
    Ok(Output { json, summary })
}

fn rank_trajectories(model_path: &Path, traj_path: &Path) -> Result<Output, CliError> {
    let model = load_model(model_path)?;
    let trajectories = format::parse_trajectories(&read(traj_path)?, &model).map_err(|e| CliError::format(traj_path, e))?;
    if let Some(i) = trajectories.iter().position(|t| t.is_empty()) {
        return Err(CliError::new(1, Some(traj_path), format!("trajectories[{i}]"), "empty_trajectory", "trajectory has no steps"));
    }
    let all_start_at_zero = trajectories.iter().all(|t| t[0].t == 0);
    let mut firsts = Vec::new();
    for t in &trajectories {
        if !firsts.contains(&t[0]) {
            firsts.push(t[0].clone());
        }
    }
    let initials = resolve_initials(&model, (all_start_at_zero && !firsts.is_empty()).then_some(&firsts[..]));
    let mut scored = trajectories
        .iter()
        .map(|t| score_trajectory(t, &initials, &model))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::engine(Some(traj_path), e))?;
    rank(&mut scored, &model);
    let summary = format!("{} trajectories ranked\n", scored.len());
    Ok(Output {
        json: to_json(&report::RankReport {
            command: "rank",
            initial_distributions: report::named_distributions(&model, &initials),
            diagnoses: report::diagnoses(&model, &scored),
        }),
        summary,
    })
}
