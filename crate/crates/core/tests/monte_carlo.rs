mod common;

use std::collections::BTreeMap;

use common::*;
use tempdiag::atemporal::solve_atemporal;
use tempdiag::fixtures::hydraulic_model;
use tempdiag::sim::{empirical_transition_matrix, generate_observation_stream, TrajectorySampler};
use tempdiag::stochastic::ModeDistribution;
use tempdiag::temporal::{build_trellis, Layer};
use tempdiag::{ExplanationCriterion, ModeAssignment, SystemModel, Threshold, ThresholdMode};

const SAMPLES: u64 = 100_000;

fn within_three_se(estimate: f64, p: f64, n: u64) -> bool {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    if se == 0.0 {
        estimate == p
    } else {
        (estimate - p).abs() <= 3.0 * se
    }
}

fn point_initials(model: &SystemModel, modes: &[&str]) -> Vec<ModeDistribution> {
    model
        .components()
        .iter()
        .zip(modes)
        .map(|(c, m)| ModeDistribution::point(c.modes().len(), c.mode_index(m).unwrap()))
        .collect()
}

#[test]
fn two_step_container_frequencies_match_matrix_square() {
    let model = hydraulic_model();
    let sampler = TrajectorySampler::new(&model, &point_initials(&model, &["correct", "correct"])).unwrap();
    let samples: Vec<_> = (0..SAMPLES).map(|s| sampler.sample(2, s)).collect();
    let c = model.component_index("C").unwrap();
    let emp = empirical_transition_matrix(&samples, &model, c, 2);
    let correct = 2;
    assert_eq!(emp.visits[correct], SAMPLES);
    let exact = naive_power(&model.components()[c].matrix().rows(), 2);
    assert!((exact[correct][0] - 3.0 / 100.0).abs() < 1e-12);
    let row = emp.row(correct).unwrap();
    for (j, (&f, &p)) in row.iter().zip(&exact[correct]).enumerate() {
        assert!(within_three_se(f, p, SAMPLES), "correct -> {j}: {f} vs {p}");
    }
}

#[test]
fn container_stays_correct_nine_times_in_ten() {
    let model = hydraulic_model();
    let sampler = TrajectorySampler::new(&model, &point_initials(&model, &["correct", "correct"])).unwrap();
    let c = model.component_index("C").unwrap();
    let still = (0..SAMPLES)
        .filter(|&s| sampler.sample(1, s).component_modes(c)[1] == 2)
        .count();
    assert!(within_three_se(still as f64 / SAMPLES as f64, 0.9, SAMPLES));
}

#[test]
fn trajectory_frequencies_match_joint_probabilities() {
    let model = hydraulic_model();
    let initials = point_initials(&model, &["correct", "correct"]);
    let horizon = 2;

    // every total assignment at every instant, nothing filtered
    let all: Vec<Vec<usize>> = (0..5).flat_map(|p| (0..3).map(move |c| vec![p, c])).collect();
    let layers: Vec<Layer> = (0..=horizon)
        .map(|t| Layer {
            t,
            candidates: all.iter().map(|m| ModeAssignment::from_indices(t, m.clone())).collect(),
        })
        .collect();
    let threshold = Threshold::new(0.0, ThresholdMode::Global).unwrap();
    let trellis = build_trellis(&model, layers, initials.clone(), &threshold).unwrap();
    let diagnoses = trellis.diagnoses(&model, CAP).unwrap();
    assert_eq!(diagnoses.len(), all.len().pow(3));

    let sampler = TrajectorySampler::new(&model, &initials).unwrap();
    let mut counts: BTreeMap<Vec<Vec<usize>>, u64> = BTreeMap::new();
    for s in 0..SAMPLES {
        let traj = sampler.sample(horizon, s);
        let key = (0..=horizon).map(|t| traj.assignment_at(t).modes().to_vec()).collect();
        *counts.entry(key).or_default() += 1;
    }

    let mut mass = 0.0;
    for d in &diagnoses {
        let key: Vec<Vec<usize>> = d.trajectory.iter().map(|w| w.modes().to_vec()).collect();
        let freq = counts.get(&key).copied().unwrap_or(0) as f64 / SAMPLES as f64;
        assert!(
            within_three_se(freq, d.joint_probability, SAMPLES),
            "{key:?}: frequency {freq} vs joint {}",
            d.joint_probability
        );
        mass += d.joint_probability;
    }
    assert!((mass - 1.0).abs() < 1e-12);
}

#[test]
fn generated_streams_admit_the_true_assignment() {
    let model = hydraulic_model();
    let initials: Vec<ModeDistribution> = model
        .components()
        .iter()
        .map(|c| ModeDistribution::uniform(c.modes().len()))
        .collect();
    let sampler = TrajectorySampler::new(&model, &initials).unwrap();
    let horizon = 6;
    let instants: Vec<u64> = (0..=horizon).collect();
    for seed in 0..2_000 {
        let traj = sampler.sample(horizon, seed);
        let stream = generate_observation_stream(&traj, &model, &instants).unwrap();
        for obs in stream.entries() {
            let truth = traj.assignment_at(obs.t);
            let candidates = solve_atemporal(&model, obs, ExplanationCriterion::Abductive, CAP).unwrap();
            assert!(
                candidates.contains(&truth),
                "seed {seed}, t={}: {} missing",
                obs.t,
                truth.display(&model)
            );
        }
    }
}

#[test]
fn sampling_is_reproducible() {
    let model = hydraulic_model();
    let initials: Vec<ModeDistribution> = model
        .components()
        .iter()
        .map(|c| ModeDistribution::uniform(c.modes().len()))
        .collect();
    let sampler = TrajectorySampler::new(&model, &initials).unwrap();
    for seed in [0, 1, 42, u64::MAX] {
        assert_eq!(sampler.sample(50, seed), sampler.sample(50, seed));
    }
}
