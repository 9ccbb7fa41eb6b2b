//! The water pump / container system used throughout the tests and examples.
//!
//! Pump `P` modes: broken, occluded, leaking, partially_occluded, correct.
//! Container `C` modes: punctured, leaking, correct.

use crate::model::{ComponentSpec, HornRule, ModeAtom, SystemModel};

pub const PUMP_MODES: [&str; 5] = ["broken", "occluded", "leaking", "partially_occluded", "correct"];
pub const CONTAINER_MODES: [&str; 3] = ["punctured", "leaking", "correct"];

pub fn pump_rows() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0, 0.0],
        vec![1.0 / 5.0, 0.0, 4.0 / 5.0, 0.0, 0.0],
        vec![0.0, 2.0 / 5.0, 0.0, 3.0 / 5.0, 0.0],
        vec![1.0 / 50.0, 0.0, 1.0 / 25.0, 1.0 / 25.0, 9.0 / 10.0],
    ]
}

pub fn container_rows() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, 0.0, 0.0],
        vec![3.0 / 10.0, 7.0 / 10.0, 0.0],
        vec![0.0, 1.0 / 10.0, 9.0 / 10.0],
    ]
}

fn names(modes: &[&str]) -> Vec<String> {
    modes.iter().map(|s| s.to_string()).collect()
}

pub fn pump() -> ComponentSpec {
    ComponentSpec::new("P", names(&PUMP_MODES), "correct", pump_rows(), None)
        .expect("pump fixture is valid")
}

pub fn container() -> ComponentSpec {
    ComponentSpec::new("C", names(&CONTAINER_MODES), "correct", container_rows(), None)
        .expect("container fixture is valid")
}

pub fn hydraulic_rules() -> Vec<HornRule> {
    let p = |mode: &str| ModeAtom::new("P", mode);
    let c = |mode: &str| ModeAtom::new("C", mode);
    vec![
        HornRule::new(vec![p("correct")], "flow_out(P)"),
        HornRule::new(vec![p("occluded")], "no_flow_out(P)"),
        HornRule::new(vec![p("broken")], "no_flow_out(P)"),
        HornRule::new(vec![p("partially_occluded")], "reduced_flow(P)"),
        HornRule::new(vec![p("leaking")], "wet_pump_housing"),
        HornRule::new(vec![c("punctured")], "water_loss(C)"),
        HornRule::new(vec![c("leaking")], "water_loss(C)"),
        HornRule::new(vec![p("correct"), c("correct")], "level_normal(C)"),
    ]
}

pub fn hydraulic_exclusive() -> Vec<(String, String)> {
    vec![("flow_out(P)".into(), "no_flow_out(P)".into())]
}

/// Pump and container with the fixture rule set and the
/// `flow_out(P)` / `no_flow_out(P)` exclusivity pair.
pub fn hydraulic_model() -> SystemModel {
    SystemModel::new(vec![pump(), container()], hydraulic_rules(), hydraulic_exclusive())
        .expect("hydraulic fixture is valid")
}
