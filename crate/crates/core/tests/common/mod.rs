#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use helm_core::compiler::FeatureModel;
use helm_core::session::{CompiledModel, EngineKind, JournalEntry};
use serde::{Deserialize, Serialize};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn stern_text() -> String {
    std::fs::read_to_string(repo_root().join("models/stern-plan-view.json")).unwrap()
}

pub fn stern_model() -> FeatureModel {
    FeatureModel::from_json(&stern_text()).unwrap()
}

pub fn stern() -> Arc<CompiledModel> {
    Arc::new(CompiledModel::new("stern-plan-view", stern_model()).unwrap())
}

/// Set when golden and fixture files should be rewritten instead of checked.
pub fn blessing() -> bool {
    std::env::var_os("HELM_BLESS").is_some()
}

/// One cell of the model's joint: a class and a detected/not-detected outcome
/// for every observation, in `FeatureModel::observations` order.
pub struct Cell {
    pub class: usize,
    pub detected: Vec<bool>,
    pub p: f64,
}

/// The joint by direct counting: ship counts give the class weight, each
/// attribute is detected with probability weight/10 independently.
pub fn counting_joint(model: &FeatureModel) -> Vec<Cell> {
    let total: u32 = model.classes.iter().map(|c| c.count).sum();
    let mut attrs = Vec::new();
    for comp in &model.components {
        for a in &comp.attributes {
            attrs.push((comp, a));
        }
    }
    let mut cells = Vec::new();
    for (ci, class) in model.classes.iter().enumerate() {
        for bits in 0u32..(1 << attrs.len()) {
            let mut p = class.count as f64 / total as f64;
            let mut detected = Vec::new();
            for (k, (comp, a)) in attrs.iter().enumerate() {
                let ty = &comp.membership[&class.id];
                let w = comp.weights[ty][*a] as f64 / 10.0;
                let seen = bits >> k & 1 == 1;
                p *= if seen { w } else { 1.0 - w };
                detected.push(seen);
            }
            cells.push(Cell { class: ci, detected, p });
        }
    }
    cells
}

/// `P(class | evidence)` by summing joint cells; evidence is (observation index, detected).
pub fn counting_posterior(model: &FeatureModel, evidence: &[(usize, bool)]) -> Vec<f64> {
    let mut post = vec![0.0; model.classes.len()];
    for cell in counting_joint(model) {
        if evidence.iter().all(|&(k, seen)| cell.detected[k] == seen) {
            post[cell.class] += cell.p;
        }
    }
    let z: f64 = post.iter().sum();
    post.iter().map(|p| p / z).collect()
}

pub fn counting_detection(model: &FeatureModel, k: usize) -> f64 {
    counting_joint(model)
        .iter()
        .filter(|c| c.detected[k])
        .map(|c| c.p)
        .sum()
}

pub const FIXTURES: usize = 20;

/// A recorded session: the exported journal and the beliefs the live session held.
#[derive(Serialize, Deserialize)]
pub struct Fixture {
    pub model: String,
    pub engine: EngineKind,
    pub journal: Vec<JournalEntry>,
    pub beliefs: BTreeMap<String, Vec<f64>>,
}

pub fn fixture_path(i: usize) -> PathBuf {
    repo_root().join(format!("crates/core/tests/fixtures/journals/journal-{i:02}.json"))
}

pub fn load_fixture(i: usize) -> Fixture {
    serde_json::from_str(&std::fs::read_to_string(fixture_path(i)).unwrap()).unwrap()
}

pub fn fleet() -> Arc<CompiledModel> {
    let text = std::fs::read_to_string(repo_root().join("crates/core/tests/fixtures/fleet.json")).unwrap();
    Arc::new(CompiledModel::from_json("fleet", &text).unwrap())
}

pub fn model_named(name: &str) -> Arc<CompiledModel> {
    match name {
        "stern-plan-view" => stern(),
        "fleet" => fleet(),
        other => panic!("no model {other}"),
    }
}
