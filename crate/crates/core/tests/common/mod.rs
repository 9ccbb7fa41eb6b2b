//! Strategies and independent oracles shared by the integration tests.
//!
//! The oracles deliberately avoid the library's own helpers: matrix powers
//! by repeated multiplication, classification by transitive closure, and
//! explanation checks on plain strings.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use tempdiag::model::{ComponentSpec, HornRule, ModeAtom};
use tempdiag::revision::{posterior_component_distribution, revise_trellis};
use tempdiag::stochastic::{
    classify_states, sojourn_pmf, sojourn_survival, ModeDistribution, StateLabel, TransitionMatrix,
};
use tempdiag::temporal::{
    admissible_step, build_trellis, conditional_probability, initials_for_layers, EngineError, Layer,
    TemporalDiagnosis,
};
use tempdiag::{
    atemporal::solve_atemporal, ExplanationCriterion, ModeAssignment, Observation, SystemModel, Threshold,
    ThresholdMode,
};

pub const CAP: u64 = 1_000_000;

pub type Rows = Vec<Vec<f64>>;

// ---------------------------------------------------------------- strategies

fn normalize(weights: Vec<Vec<u32>>, absorbing: Vec<bool>) -> Rows {
    weights
        .into_iter()
        .enumerate()
        .map(|(i, mut row)| {
            if absorbing[i] || row.iter().all(|&w| w == 0) {
                row.iter_mut().for_each(|w| *w = 0);
                row[i] = 1;
            }
            let sum: u32 = row.iter().sum();
            row.into_iter().map(|w| w as f64 / sum as f64).collect()
        })
        .collect()
}

/// Row-stochastic matrix of the given size, with a fair share of exact zeros
/// and absorbing rows.
pub fn stochastic_rows(dim: usize) -> impl Strategy<Value = Rows> {
    (
        prop::collection::vec(prop::collection::vec(0u32..=6, dim), dim),
        prop::collection::vec(prop::bool::weighted(0.2), dim),
    )
        .prop_map(|(w, a)| normalize(w, a))
}

pub fn mode_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

pub fn stochastic_matrix() -> impl Strategy<Value = TransitionMatrix> {
    (1usize..=6)
        .prop_flat_map(stochastic_rows)
        .prop_map(|rows| TransitionMatrix::new(mode_names(rows.len()), rows).expect("generated rows are stochastic"))
}

// Declared out of id order so declaration order and id order differ.
const IDS: [&str; 3] = ["k", "b", "f"];
const HEADS: [&str; 5] = ["m0", "m1", "m2", "m3", "m4"];

#[derive(Debug, Clone)]
struct RawRule {
    mask: u8,
    modes: [u8; 3],
    head: usize,
}

fn raw_rule() -> impl Strategy<Value = RawRule> {
    (1u8..8, any::<[u8; 3]>(), 0..HEADS.len()).prop_map(|(mask, modes, head)| RawRule { mask, modes, head })
}

fn build_model(dims: &[usize], rows: Vec<Rows>, raw: Vec<RawRule>, pairs: Vec<(usize, usize)>) -> SystemModel {
    let components = dims
        .iter()
        .zip(rows)
        .enumerate()
        .map(|(ci, (&d, r))| {
            let modes = mode_names(d);
            let correct = modes[d - 1].clone();
            ComponentSpec::new(IDS[ci], modes, &correct, r, None).expect("generated component is valid")
        })
        .collect();
    let mut rules = Vec::new();
    for r in raw {
        let body: Vec<ModeAtom> = (0..dims.len())
            .filter(|ci| r.mask & (1 << ci) != 0)
            .map(|ci| ModeAtom::new(IDS[ci], format!("s{}", r.modes[ci] as usize % dims[ci])))
            .collect();
        if !body.is_empty() {
            rules.push(HornRule::new(body, HEADS[r.head]));
        }
    }
    if rules.is_empty() {
        rules.push(HornRule::new(vec![ModeAtom::new(IDS[0], "s0")], HEADS[0]));
    }
    let heads: Vec<&str> = rules
        .iter()
        .map(|r| r.head.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut exclusive = BTreeSet::new();
    for (a, b) in pairs {
        let (a, b) = (heads[a % heads.len()], heads[b % heads.len()]);
        if a != b && !exclusive.contains(&(b.to_string(), a.to_string())) {
            exclusive.insert((a.to_string(), b.to_string()));
        }
    }
    SystemModel::new(components, rules, exclusive.into_iter().collect()).expect("generated model is valid")
}

/// Small random models: up to 3 components with 2 to 4 modes, up to 10 rules.
pub fn small_model() -> impl Strategy<Value = SystemModel> {
    prop::collection::vec(2usize..=4, 1..=3).prop_flat_map(|dims| {
        let rows: Vec<_> = dims.iter().map(|&d| stochastic_rows(d)).collect();
        (
            Just(dims),
            rows,
            prop::collection::vec(raw_rule(), 1..=10),
            prop::collection::vec((0usize..5, 0usize..5), 0..=3),
        )
            .prop_map(|(dims, rows, raw, pairs)| build_model(&dims, rows, raw, pairs))
    })
}

/// Observation over the model's manifestations: each atom is unobserved,
/// present or absent.
pub fn observation_for(model: &SystemModel) -> impl Strategy<Value = Observation> {
    let atoms = model.manifestations().to_vec();
    prop::collection::vec(0u8..3, atoms.len()).prop_map(move |states| {
        let mut obs = Observation::default();
        for (atom, s) in atoms.iter().zip(states) {
            match s {
                1 => {
                    obs.present.insert(atom.clone());
                }
                2 => {
                    obs.absent.insert(atom.clone());
                }
                _ => {}
            }
        }
        obs
    })
}

pub fn model_and_observation() -> impl Strategy<Value = (SystemModel, Observation)> {
    small_model().prop_flat_map(|m| {
        let obs = observation_for(&m);
        (Just(m), obs)
    })
}

pub fn assignment_for(model: &SystemModel, t: u64) -> impl Strategy<Value = ModeAssignment> {
    let dims: Vec<usize> = model.components().iter().map(|c| c.modes().len()).collect();
    dims.into_iter()
        .map(|d| 0..d)
        .collect::<Vec<_>>()
        .prop_map(move |modes| ModeAssignment::from_indices(t, modes))
}

/// Up to 3 layers of up to 8 distinct candidates at increasing instants.
pub fn layers_for(model: &SystemModel) -> impl Strategy<Value = Vec<Layer>> {
    let model = model.clone();
    (0u64..3, prop::collection::vec(1u64..=3, 0..=2)).prop_flat_map(move |(t0, gaps)| {
        let mut instants = vec![t0];
        for g in gaps {
            instants.push(instants.last().unwrap() + g);
        }
        instants
            .into_iter()
            .map(|t| {
                prop::collection::vec(assignment_for(&model, t), 1..=8).prop_map(move |mut cands| {
                    let mut seen = BTreeSet::new();
                    cands.retain(|w| seen.insert(w.modes().to_vec()));
                    Layer { t, candidates: cands }
                })
            })
            .collect::<Vec<_>>()
    })
}

pub fn threshold_mode() -> impl Strategy<Value = ThresholdMode> {
    prop_oneof![Just(ThresholdMode::Global), Just(ThresholdMode::PerComponent)]
}

#[derive(Debug, Clone)]
pub struct TemporalCase {
    pub model: SystemModel,
    pub layers: Vec<Layer>,
    pub sigma: f64,
    pub mode: ThresholdMode,
}

pub fn temporal_case() -> impl Strategy<Value = TemporalCase> {
    small_model().prop_flat_map(|model| {
        let layers = layers_for(&model);
        (Just(model), layers, prop_oneof![Just(0.0), 0.0..0.5], threshold_mode())
            .prop_map(|(model, layers, sigma, mode)| TemporalCase {
                model,
                layers,
                sigma,
                mode,
            })
    })
}

// ------------------------------------------------------------------- oracles

pub fn naive_multiply(a: &Rows, b: &Rows) -> Rows {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// `mⁿ` by `n` successive multiplications.
pub fn naive_power(m: &Rows, n: u64) -> Rows {
    let dim = m.len();
    let mut acc: Rows = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..n {
        acc = naive_multiply(&acc, m);
    }
    acc
}

pub fn naive_propagate(pi: &[f64], m: &Rows, n: u64) -> Vec<f64> {
    let p = naive_power(m, n);
    (0..pi.len())
        .map(|j| (0..pi.len()).map(|i| pi[i] * p[i][j]).sum())
        .collect()
}

/// Reflexive-transitive closure of the positive-entry digraph.
pub fn reachability(m: &Rows) -> Vec<Vec<bool>> {
    let n = m.len();
    let mut r: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j || m[i][j] > 0.0).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r
}

/// A state is recurrent iff everything it reaches reaches it back; a
/// recurrent state whose class is itself alone is absorbing.
pub fn closure_labels(m: &Rows) -> Vec<StateLabel> {
    let r = reachability(m);
    let n = m.len();
    (0..n)
        .map(|i| {
            let recurrent = (0..n).all(|j| !r[i][j] || r[j][i]);
            let class_size = (0..n).filter(|&j| r[i][j] && r[j][i]).count();
            match (recurrent, class_size) {
                (true, 1) => StateLabel::Absorbing,
                (true, _) => StateLabel::ErgodicNonAbsorbing,
                _ => StateLabel::Transient,
            }
        })
        .collect()
}

fn named_modes(model: &SystemModel, modes: &[usize]) -> BTreeMap<String, String> {
    model
        .components()
        .iter()
        .zip(modes)
        .map(|(c, &m)| (c.id().to_string(), c.modes()[m].clone()))
        .collect()
}

/// Brute-force explanation check working on component and atom names only.
pub fn brute_force_solutions(
    model: &SystemModel,
    obs: &Observation,
    criterion: ExplanationCriterion,
) -> BTreeSet<Vec<usize>> {
    let dims: Vec<usize> = model.components().iter().map(|c| c.modes().len()).collect();
    let mut all: Vec<Vec<usize>> = vec![vec![]];
    for &d in &dims {
        all = all
            .into_iter()
            .flat_map(|prefix| {
                (0..d).map(move |m| {
                    let mut v = prefix.clone();
                    v.push(m);
                    v
                })
            })
            .collect();
    }
    all.into_iter()
        .filter(|modes| {
            let named = named_modes(model, modes);
            let predicted: BTreeSet<&str> = model
                .rules()
                .iter()
                .filter(|r| r.body.iter().all(|a| named[&a.component] == a.mode))
                .map(|r| r.head.as_str())
                .collect();
            if obs.absent.iter().any(|a| predicted.contains(a.as_str())) {
                return false;
            }
            let clash = model.exclusive().iter().any(|(a, b)| {
                (obs.present.contains(a) && predicted.contains(b.as_str()))
                    || (obs.present.contains(b) && predicted.contains(a.as_str()))
            });
            if clash {
                return false;
            }
            match criterion {
                ExplanationCriterion::ConsistencyBased => true,
                ExplanationCriterion::Abductive => obs.present.iter().all(|a| predicted.contains(a.as_str())),
            }
        })
        .collect()
}

pub fn solution_set(model: &SystemModel, obs: &Observation, criterion: ExplanationCriterion) -> BTreeSet<Vec<usize>> {
    solve_atemporal(model, obs, criterion, CAP)
        .expect("small models fit the cap")
        .into_iter()
        .map(|w| w.modes().to_vec())
        .collect()
}

/// Every trajectory through the layers whose steps all pass the threshold,
/// with its joint computed from naive powers. Keys are per-layer candidate
/// indices.
pub fn brute_force_trajectories(
    model: &SystemModel,
    layers: &[Layer],
    initials: &[ModeDistribution],
    sigma: f64,
    mode: ThresholdMode,
) -> BTreeMap<Vec<usize>, f64> {
    let rows: Vec<Rows> = model.components().iter().map(|c| c.matrix().rows()).collect();
    let mut paths: Vec<Vec<usize>> = vec![vec![]];
    for layer in layers {
        paths = paths
            .into_iter()
            .flat_map(|p| {
                (0..layer.candidates.len()).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    let mut out = BTreeMap::new();
    'paths: for path in paths {
        let first = &layers[0].candidates[path[0]];
        let mut joint: f64 = (0..rows.len())
            .map(|ci| naive_propagate(initials[ci].probabilities(), &rows[ci], layers[0].t)[first.mode_of(ci)])
            .product();
        for k in 1..layers.len() {
            let prev = &layers[k - 1].candidates[path[k - 1]];
            let next = &layers[k].candidates[path[k]];
            let gap = layers[k].t - layers[k - 1].t;
            let factors: Vec<f64> = (0..rows.len())
                .map(|ci| naive_power(&rows[ci], gap)[prev.mode_of(ci)][next.mode_of(ci)])
                .collect();
            let conditional: f64 = factors.iter().product();
            let ok = match mode {
                ThresholdMode::Global => conditional >= sigma,
                ThresholdMode::PerComponent => factors.iter().all(|&f| f >= sigma),
            };
            if !ok {
                continue 'paths;
            }
            joint *= conditional;
        }
        out.insert(path, joint);
    }
    out
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn assert_close_rows(a: &Rows, b: &Rows, tol: f64) -> Result<(), TestCaseError> {
    for (i, (ra, rb)) in a.iter().zip(b).enumerate() {
        for (j, (x, y)) in ra.iter().zip(rb).enumerate() {
            prop_assert!(close(*x, *y, tol), "entry ({i},{j}): {x} vs {y}");
        }
    }
    Ok(())
}

// Path of candidate indices for a diagnosis, recovered by position in the layers.
pub fn path_of(d: &TemporalDiagnosis, layers: &[Layer]) -> Vec<usize> {
    d.trajectory
        .iter()
        .zip(layers)
        .map(|(w, l)| l.candidates.iter().position(|c| c == w).expect("candidate in its layer"))
        .collect()
}

pub fn diagnoses_or_empty(result: Result<Vec<TemporalDiagnosis>, EngineError>) -> Vec<TemporalDiagnosis> {
    match result {
        Ok(d) => d,
        Err(EngineError::NoAdmissibleEvolution) => Vec::new(),
        Err(e) => panic!("unexpected engine error: {e}"),
    }
}

pub fn run_trellis(case: &TemporalCase, sigma: f64) -> Vec<TemporalDiagnosis> {
    let threshold = Threshold::new(sigma, case.mode).expect("sigma in range");
    let initials = initials_for_layers(&case.model, &case.layers[0]);
    let trellis = build_trellis(&case.model, case.layers.clone(), initials, &threshold).expect("layers are valid");
    diagnoses_or_empty(trellis.diagnoses(&case.model, CAP))
}

// ------------------------------------------------------- shared properties
//
// Each returns a TestCaseResult so the same checks run under `proptest!`
// and under the acceptance runner.

pub fn chapman_kolmogorov(m: &TransitionMatrix, a: u64, b: u64) -> Result<(), TestCaseError> {
    let lhs = m.power(a + b).rows();
    let rhs = m.power(a).multiply(&m.power(b)).expect("same dimension").rows();
    assert_close_rows(&lhs, &rhs, 1e-9)?;
    assert_close_rows(&lhs, &naive_power(&m.rows(), a + b), 1e-9)
}

pub fn powers_stay_stochastic(m: &TransitionMatrix, n: u64) -> Result<(), TestCaseError> {
    for (i, row) in m.power(n).rows().iter().enumerate() {
        let sum: f64 = row.iter().sum();
        prop_assert!(close(sum, 1.0, 1e-9), "row {i} of power {n} sums to {sum}");
        prop_assert!(row.iter().all(|&x| x >= 0.0));
    }
    Ok(())
}

pub fn memoryless(p: f64, t: u64, n: u64) -> Result<(), TestCaseError> {
    let lhs = sojourn_pmf(p, t + n).unwrap() / sojourn_survival(p, t);
    let rhs = sojourn_pmf(p, n).unwrap();
    prop_assert!(close(lhs, rhs, 1e-12), "p={p} t={t} n={n}: {lhs} vs {rhs}");
    Ok(())
}

pub fn classification_matches_closure(m: &TransitionMatrix) -> Result<(), TestCaseError> {
    let c = classify_states(m);
    prop_assert_eq!(&c.labels, &closure_labels(&m.rows()));
    let mut covered: Vec<usize> = c.ergodic_sets.iter().chain(&c.transient_sets).flatten().copied().collect();
    covered.sort_unstable();
    prop_assert_eq!(covered, (0..m.dim()).collect::<Vec<_>>());
    Ok(())
}

pub fn abductive_within_consistency(model: &SystemModel, obs: &Observation) -> Result<(), TestCaseError> {
    let ab = solution_set(model, obs, ExplanationCriterion::Abductive);
    let cb = solution_set(model, obs, ExplanationCriterion::ConsistencyBased);
    prop_assert!(ab.is_subset(&cb), "abductive {ab:?} not within {cb:?}");
    Ok(())
}

pub fn threshold_monotone(case: &TemporalCase, bump: f64) -> Result<(), TestCaseError> {
    let keys = |ds: Vec<TemporalDiagnosis>| -> BTreeSet<Vec<Vec<usize>>> {
        ds.into_iter()
            .map(|d| d.trajectory.iter().map(|w| w.modes().to_vec()).collect())
            .collect()
    };
    let low = keys(run_trellis(case, case.sigma));
    let high = keys(run_trellis(case, (case.sigma + bump).min(1.0)));
    prop_assert!(high.is_subset(&low));
    Ok(())
}

pub fn trellis_matches_brute_force(case: &TemporalCase) -> Result<(), TestCaseError> {
    let found = run_trellis(case, case.sigma);
    let initials = initials_for_layers(&case.model, &case.layers[0]);
    let expected = brute_force_trajectories(&case.model, &case.layers, &initials, case.sigma, case.mode);
    let got: BTreeMap<Vec<usize>, f64> = found
        .iter()
        .map(|d| (path_of(d, &case.layers), d.joint_probability))
        .collect();
    prop_assert_eq!(got.len(), found.len(), "duplicate trajectories emitted");
    prop_assert_eq!(got.keys().collect::<Vec<_>>(), expected.keys().collect::<Vec<_>>());
    for (path, joint) in &got {
        prop_assert!(close(*joint, expected[path], 1e-12), "{path:?}: {joint} vs {}", expected[path]);
    }
    Ok(())
}

/// With σ = 0 every evolution survives revision; the final revised joints
/// are the raw joints times one positive factor, so they sum to 1, keep the
/// raw order and vanish exactly where the raw joints do.
pub fn revision_preserves_order_and_zeros(case: &TemporalCase) -> Result<(), TestCaseError> {
    let threshold = Threshold::new(0.0, case.mode).unwrap();
    let initials = initials_for_layers(&case.model, &case.layers[0]);
    let trellis = build_trellis(&case.model, case.layers.clone(), initials, &threshold).unwrap();
    let run = match revise_trellis(&trellis, &case.model, &threshold, CAP) {
        Ok(run) => run,
        // revision is undefined when every joint, or an admitted mass, is zero
        Err(EngineError::Revision(_)) => return Ok(()),
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
    };
    let last = run.instants.last().unwrap();
    let total: f64 = last.entries.iter().map(|e| e.revised_joint.value()).sum();
    prop_assert!(close(total, 1.0, 1e-12), "revised joints sum to {total}");

    let raw: Vec<f64> = last
        .entries
        .iter()
        .map(|e| trellis.diagnosis_for(&e.path).joint_probability)
        .collect();
    let scale = raw.iter().cloned().fold(0.0, f64::max);
    for (e, &r) in last.entries.iter().zip(&raw) {
        prop_assert_eq!(r == 0.0, e.revised_joint.value() == 0.0, "zero mismatch on {:?}", e.path);
    }
    prop_assert_eq!(run.diagnoses.len(), last.entries.len());
    for pair in run.diagnoses.windows(2) {
        let (a, b) = (pair[0].diagnosis.joint_probability, pair[1].diagnosis.joint_probability);
        prop_assert!(a >= b - 1e-12 * scale, "revised order breaks raw order: {a} < {b}");
    }
    Ok(())
}

pub fn posterior_idempotent(model: &SystemModel, pis: &[ModeDistribution], masks: &[u8]) -> Result<(), TestCaseError> {
    for ((c, pi), mask) in model.components().iter().zip(pis).zip(masks) {
        let admitted: BTreeSet<usize> = (0..c.modes().len()).filter(|m| mask & (1 << m) != 0).collect();
        let Ok(once) = posterior_component_distribution(c, pi, &admitted) else {
            continue;
        };
        let twice = posterior_component_distribution(c, &once, &admitted).unwrap();
        for (x, y) in once.probabilities().iter().zip(twice.probabilities()) {
            prop_assert!(close(*x, *y, 1e-12));
        }
    }
    Ok(())
}

pub fn per_component_implies_power_bound(
    model: &SystemModel,
    prev: &ModeAssignment,
    next: &ModeAssignment,
    sigma: f64,
) -> Result<(), TestCaseError> {
    let per = Threshold::new(sigma, ThresholdMode::PerComponent).unwrap();
    if admissible_step(prev, next, model, &per).unwrap() {
        let global = conditional_probability(prev, next, model).unwrap();
        let bound = sigma.powi(model.components().len() as i32);
        prop_assert!(global >= bound * (1.0 - 1e-12), "{global} < {bound}");
    }
    Ok(())
}
