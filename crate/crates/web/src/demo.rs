use std::collections::BTreeMap;
use std::sync::Arc;

use helm_core::bms::SchedulerPolicy;
use helm_core::harness::{random_tree_benchmark, summarize, TreeBenchConfig, REFERENCE_COUNTS};
use helm_core::merit::MeritRecord;
use helm_core::net::{Evidence, EvidenceForm};
use helm_core::session::{CompiledModel, EngineKind, JournalEntry, Question, Session, SessionError};
use serde::Serialize;

pub const STERN_MODEL: &str = include_str!("../../../models/stern-plan-view.json");

/// Leading probability at which the page reports a confident classification.
pub const CONFIDENT: f64 = 0.95;

#[derive(Debug, Serialize)]
pub struct ObservationView {
    pub id: String,
    pub label: String,
    pub cost: f64,
    /// Current probability of `detected`.
    pub detected: f64,
    pub evidence: Option<EvidenceForm>,
}

#[derive(Debug, Serialize)]
pub struct View {
    pub engine: EngineKind,
    pub ranking: Vec<(String, f64)>,
    pub confident: bool,
    pub observations: Vec<ObservationView>,
    pub question: Option<Question>,
    pub merits: Vec<MeritRecord>,
}

/// An interactive session on the bundled stern model. Unlike a recorded session,
/// evidence can be withdrawn: the session is rebuilt from what remains.
pub struct Demo {
    model: Arc<CompiledModel>,
    session: Session,
}

impl Demo {
    pub fn new(engine: &str) -> Result<Self, String> {
        let kind: EngineKind = engine.parse()?;
        let model = Arc::new(CompiledModel::from_json("stern-plan-view", STERN_MODEL).map_err(|e| e.to_string())?);
        let session = Session::start("demo", Arc::clone(&model), kind);
        Ok(Self { model, session })
    }

    pub fn engine(&self) -> EngineKind {
        self.session.kind()
    }

    fn rebuild(&mut self, kind: EngineKind, journal: Vec<JournalEntry>) -> Result<(), String> {
        self.session = Session::replay("demo", Arc::clone(&self.model), kind, journal).map_err(describe)?;
        Ok(())
    }

    /// Same evidence, other engine.
    pub fn set_engine(&mut self, engine: &str) -> Result<(), String> {
        let kind: EngineKind = engine.parse()?;
        self.rebuild(kind, self.session.journal().to_vec())
    }

    /// Graded answer: probability that the feature is present.
    pub fn set_graded(&mut self, node: &str, p: f64) -> Result<(), String> {
        self.session
            .answer(node, EvidenceForm::Graded(p))
            .map_err(describe)
    }

    pub fn answer(&mut self, node: &str, state: &str) -> Result<(), String> {
        self.session
            .answer(node, EvidenceForm::Hard(state.to_string()))
            .map_err(describe)
    }

    pub fn clear(&mut self, node: &str) -> Result<(), String> {
        let journal = self
            .session
            .journal()
            .iter()
            .filter(|e| e.evidence.node != node)
            .cloned()
            .collect();
        self.rebuild(self.session.kind(), journal)
    }

    pub fn reset(&mut self) {
        self.session = Session::start("demo", Arc::clone(&self.model), self.session.kind());
    }

    pub fn view(&self) -> Result<View, String> {
        let s = &self.session;
        let ranking = s.ranking().map_err(describe)?;
        let beliefs = s.beliefs().map_err(describe)?;
        let given: BTreeMap<&str, &Evidence> = s
            .journal()
            .iter()
            .map(|e| (e.evidence.node.as_str(), &e.evidence))
            .collect();
        let observations = self
            .model
            .observations
            .iter()
            .map(|o| ObservationView {
                id: o.id.clone(),
                label: o.label.clone(),
                cost: o.cost,
                detected: beliefs[&o.id][0],
                evidence: given.get(o.id.as_str()).map(|e| e.form.clone()),
            })
            .collect();
        Ok(View {
            engine: s.kind(),
            confident: ranking[0].1 >= CONFIDENT,
            ranking,
            observations,
            question: s.ask().map_err(describe)?,
            merits: s.merits().map_err(describe)?,
        })
    }

    pub fn view_json(&self) -> Result<String, String> {
        serde_json::to_string(&self.view()?).map_err(|e| e.to_string())
    }
}

fn describe(e: SessionError) -> String {
    format!("{}: {e}", e.code())
}

#[derive(Debug, Serialize)]
pub struct BenchView {
    pub trials: usize,
    pub failures: usize,
    pub medians: Vec<(SchedulerPolicy, f64)>,
    pub reference: Vec<(SchedulerPolicy, u64)>,
    pub ordering_violations: usize,
    pub max_deviation: Option<f64>,
    /// Activation counts per trial, in policy order.
    pub counts: Vec<Vec<u64>>,
}

/// Scheduler benchmark on fresh random binary trees.
pub fn bench(nodes: usize, evidence: usize, trials: usize, seed: u64) -> Result<BenchView, String> {
    if nodes < 2 || trials == 0 || trials > 1000 || nodes > 24 {
        return Err("need 2..=24 nodes and 1..=1000 trials".into());
    }
    let config = TreeBenchConfig::new(nodes, evidence, trials, seed);
    let records = random_tree_benchmark(&config).map_err(|e| e.to_string())?;
    let summary = summarize(&records);
    let counts = records
        .iter()
        .filter(|r| !r.failed())
        .map(|r| r.runs.iter().map(|run| run.activations).collect())
        .collect();
    Ok(BenchView {
        trials: summary.trials,
        failures: summary.failures,
        medians: summary.medians,
        reference: REFERENCE_COUNTS.to_vec(),
        ordering_violations: summary.ordering_violations,
        max_deviation: summary.max_deviation,
        counts,
    })
}
