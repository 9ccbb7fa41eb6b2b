//! JSON file formats for models, observation streams, explicit candidate
//! layers and trajectories.
//!
//! Probabilities may be written as JSON numbers or as strings holding either
//! a decimal or an exact fraction `"a/b"`.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::atemporal::{AssignmentError, ModeAssignment};
use crate::model::{ComponentSpec, HornRule, ModeAtom, ModelError, Observation, ObservationStream, SystemModel};
use crate::temporal::Layer;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("assignment at t = {t}: {source}")]
    Assignment {
        t: u64,
        #[source]
        source: AssignmentError,
    },
    #[error("layer {index}: time {t} does not follow the previous layer")]
    NonIncreasingLayer { index: usize, t: u64 },
}

/// Parses `"a/b"` exactly (integers below 2^53) or a decimal literal.
pub fn parse_probability(text: &str) -> Result<f64, String> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: u64 = num.trim().parse().map_err(|_| format!("bad numerator in `{text}`"))?;
        let den: u64 = den.trim().parse().map_err(|_| format!("bad denominator in `{text}`"))?;
        if den == 0 {
            return Err(format!("zero denominator in `{text}`"));
        }
        const EXACT: u64 = 1 << 53;
        if num > EXACT || den > EXACT {
            return Err(format!("fraction `{text}` exceeds exact integer range"));
        }
        return Ok(num as f64 / den as f64);
    }
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("`{text}` is not a probability"))
}

/// A probability as it appears in files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probability(pub f64);

impl<'de> Deserialize<'de> for Probability {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(v) => Ok(Probability(v)),
            Repr::Text(s) => parse_probability(&s).map(Probability).map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.0)
    }
}

fn unwrap_probs(v: Vec<Probability>) -> Vec<f64> {
    v.into_iter().map(|p| p.0).collect()
}

fn wrap_probs(v: &[f64]) -> Vec<Probability> {
    v.iter().copied().map(Probability).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentFile {
    pub id: String,
    pub modes: Vec<String>,
    pub correct_mode: String,
    pub matrix: Vec<Vec<Probability>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_distribution: Option<Vec<Probability>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomFile {
    pub component: String,
    pub mode: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleFile {
    pub body: Vec<AtomFile>,
    pub head: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub components: Vec<ComponentFile>,
    #[serde(default)]
    pub rules: Vec<RuleFile>,
    #[serde(default)]
    pub exclusive: Vec<[String; 2]>,
}

impl ModelFile {
    pub fn from_model(model: &SystemModel) -> Self {
        Self {
            components: model
                .components()
                .iter()
                .map(|c| ComponentFile {
                    id: c.id().to_string(),
                    modes: c.modes().to_vec(),
                    correct_mode: c.correct_mode_name().to_string(),
                    matrix: c.matrix().rows().iter().map(|r| wrap_probs(r)).collect(),
                    initial_distribution: c.initial_distribution().map(|d| wrap_probs(d.probabilities())),
                })
                .collect(),
            rules: model
                .rules()
                .iter()
                .map(|r| RuleFile {
                    body: r
                        .body
                        .iter()
                        .map(|a| AtomFile {
                            component: a.component.clone(),
                            mode: a.mode.clone(),
                        })
                        .collect(),
                    head: r.head.clone(),
                })
                .collect(),
            exclusive: model.exclusive().iter().map(|(a, b)| [a.clone(), b.clone()]).collect(),
        }
    }

    pub fn into_model(self) -> Result<SystemModel, ModelError> {
        let components = self
            .components
            .into_iter()
            .map(|c| {
                ComponentSpec::new(
                    c.id,
                    c.modes,
                    &c.correct_mode,
                    c.matrix.into_iter().map(unwrap_probs).collect(),
                    c.initial_distribution.map(unwrap_probs),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let rules = self
            .rules
            .into_iter()
            .map(|r| {
                HornRule::new(
                    r.body.into_iter().map(|a| ModeAtom::new(a.component, a.mode)).collect(),
                    r.head,
                )
            })
            .collect();
        let exclusive = self.exclusive.into_iter().map(|[a, b]| (a, b)).collect();
        SystemModel::new(components, rules, exclusive)
    }
}

pub fn parse_model(json: &str) -> Result<SystemModel, FormatError> {
    let file: ModelFile = serde_json::from_str(json)?;
    Ok(file.into_model()?)
}

pub fn model_to_json(model: &SystemModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from_model(model)).expect("model serializes")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationFile {
    pub t: u64,
    #[serde(default)]
    pub present: Vec<String>,
    #[serde(default)]
    pub absent: Vec<String>,
}

pub fn stream_to_file(stream: &ObservationStream) -> Vec<ObservationFile> {
    stream
        .entries()
        .iter()
        .map(|e| ObservationFile {
            t: e.t,
            present: e.present.iter().cloned().collect(),
            absent: e.absent.iter().cloned().collect(),
        })
        .collect()
}

pub fn parse_observations(json: &str) -> Result<ObservationStream, FormatError> {
    let entries: Vec<ObservationFile> = serde_json::from_str(json)?;
    Ok(ObservationStream::new(
        entries
            .into_iter()
            .map(|e| Observation::new(e.t, e.present, e.absent))
            .collect(),
    )?)
}

pub fn observations_to_json(stream: &ObservationStream) -> String {
    serde_json::to_string_pretty(&stream_to_file(stream)).expect("stream serializes")
}

/// Explicit candidate set at one instant, replacing the atemporal solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateLayerFile {
    pub t: u64,
    pub candidates: Vec<BTreeMap<String, String>>,
}

/// One step of an explicitly given trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryStepFile {
    pub t: u64,
    pub modes: BTreeMap<String, String>,
}

fn assignment(model: &SystemModel, t: u64, modes: &BTreeMap<String, String>) -> Result<ModeAssignment, FormatError> {
    ModeAssignment::from_names(model, t, modes.iter().map(|(c, m)| (c.as_str(), m.as_str())))
        .map_err(|source| FormatError::Assignment { t, source })
}

pub fn parse_candidates(json: &str, model: &SystemModel) -> Result<Vec<Layer>, FormatError> {
    let files: Vec<CandidateLayerFile> = serde_json::from_str(json)?;
    let mut layers: Vec<Layer> = Vec::with_capacity(files.len());
    for (index, f) in files.into_iter().enumerate() {
        if layers.last().is_some_and(|l| l.t >= f.t) {
            return Err(FormatError::NonIncreasingLayer { index, t: f.t });
        }
        let candidates = f
            .candidates
            .iter()
            .map(|c| assignment(model, f.t, c))
            .collect::<Result<Vec<_>, _>>()?;
        layers.push(Layer { t: f.t, candidates });
    }
    Ok(layers)
}

pub fn parse_trajectories(json: &str, model: &SystemModel) -> Result<Vec<Vec<ModeAssignment>>, FormatError> {
    let files: Vec<Vec<TrajectoryStepFile>> = serde_json::from_str(json)?;
    files
        .iter()
        .map(|steps| {
            let traj = steps
                .iter()
                .map(|s| assignment(model, s.t, &s.modes))
                .collect::<Result<Vec<_>, _>>()?;
            for (index, pair) in traj.windows(2).enumerate() {
                if pair[1].t <= pair[0].t {
                    return Err(FormatError::NonIncreasingLayer { index: index + 1, t: pair[1].t });
                }
            }
            Ok(traj)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::hydraulic_model;

    #[test]
    fn fractions() {
        assert_eq!(parse_probability("3/10").unwrap(), 0.3);
        assert_eq!(parse_probability(" 1 / 50 ").unwrap(), 0.02);
        assert_eq!(parse_probability("0.25").unwrap(), 0.25);
        assert!(parse_probability("1/0").is_err());
        assert!(parse_probability("a/3").is_err());
        assert!(parse_probability("-1/3").is_err());
    }

    #[test]
    fn model_from_fraction_strings() {
        let json = r#"{
            "components": [{
                "id": "C", "modes": ["punctured", "leaking", "correct"], "correct_mode": "correct",
                "matrix": [[1, 0, 0], ["3/10", "7/10", 0], [0, "1/10", "9/10"]]
            }],
            "rules": [{"body": [{"component": "C", "mode": "punctured"}], "head": "water_loss(C)"}]
        }"#;
        let m = parse_model(json).unwrap();
        assert_eq!(m.components()[0].matrix().get(1, 0), 0.3);
    }

    #[test]
    fn model_round_trip() {
        let m = hydraulic_model();
        assert_eq!(parse_model(&model_to_json(&m)).unwrap(), m);
    }

    #[test]
    fn validation_errors_surface() {
        let json = r#"{"components": [{"id": "X", "modes": ["a"], "correct_mode": "a", "matrix": [["1/2"]]}]}"#;
        assert!(matches!(
            parse_model(json),
            Err(FormatError::Model(ModelError::MatrixInvalid { .. }))
        ));
        assert!(matches!(parse_model("{"), Err(FormatError::Json(_))));
    }

    #[test]
    fn observation_files() {
        let s = parse_observations(r#"[{"t": 0, "present": ["flow_out(P)"]}, {"t": 2, "absent": ["x"]}]"#).unwrap();
        assert_eq!(s.entries().len(), 2);
        assert_eq!(parse_observations(&observations_to_json(&s)).unwrap(), s);
        assert!(parse_observations(r#"[{"t": 2}, {"t": 1}]"#).is_err());
    }

    #[test]
    fn candidate_files() {
        let m = hydraulic_model();
        let layers = parse_candidates(
            r#"[{"t": 0, "candidates": [{"P": "correct", "C": "correct"}]},
                {"t": 1, "candidates": [{"P": "broken", "C": "correct"}, {"P": "correct", "C": "punctured"}]}]"#,
            &m,
        )
        .unwrap();
        assert_eq!(layers[1].candidates.len(), 2);
        assert!(matches!(
            parse_candidates(r#"[{"t": 0, "candidates": [{"P": "correct"}]}]"#, &m),
            Err(FormatError::Assignment { t: 0, .. })
        ));
        let trajs = parse_trajectories(
            r#"[[{"t": 0, "modes": {"P": "correct", "C": "correct"}}, {"t": 1, "modes": {"P": "occluded", "C": "correct"}}]]"#,
            &m,
        )
        .unwrap();
        assert_eq!(trajs[0].len(), 2);
    }
}
