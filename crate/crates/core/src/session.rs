//! Mixed-initiative classification sessions.
//!
//! A session owns one engine state over a compiled feature model and a journal
//! of every observation posted to it. The user may volunteer evidence at any
//! time or answer the question the session proposes. Re-answering a question
//! replaces the earlier answer: the journal entry is dropped and the engine is
//! rebuilt by replaying the remaining journal, so the journal alone determines
//! the engine state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bms::{BeliefState, BmsError};
use crate::compiler::{
    compile_bms, compile_prospector, CompileError, FeatureModel, Observation, CLASS_NODE,
    OBSERVATION_STATES,
};
use crate::merit::{merit_table, next_question, MeritError, MeritRecord, StateTarget};
use crate::net::{Evidence, EvidenceForm, NetError, PropositionNetwork, VariableNetwork};
use crate::prospector::{ProspectorError, PropositionState};
use crate::{rank, Ranking};

pub const DEFAULT_STOP_THRESHOLD: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Prospector,
    Bms,
}

impl EngineKind {
    pub const ALL: [EngineKind; 2] = [EngineKind::Prospector, EngineKind::Bms];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Prospector => "prospector",
            EngineKind::Bms => "bms",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prospector" => Ok(EngineKind::Prospector),
            "bms" => Ok(EngineKind::Bms),
            other => Err(format!("unknown engine `{other}` (expected prospector or bms)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Volunteered,
    Asked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    #[serde(flatten)]
    pub evidence: Evidence,
    pub source: Source,
    /// Wall-clock milliseconds; informational only and never exported.
    #[serde(skip)]
    pub recorded_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Confident,
    Exhausted,
    Operator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "reason", rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Stopped(StopReason),
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Prospector(#[from] ProspectorError),
    #[error(transparent)]
    Bms(#[from] BmsError),
    #[error(transparent)]
    Merit(#[from] MeritError),
    #[error("`{0}` is not an askable observation")]
    NotAskable(String),
    #[error("session is stopped ({0:?})")]
    Stopped(StopReason),
    #[error("journal: {0}")]
    Journal(String),
}

impl SessionError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        fn net(e: &NetError) -> &'static str {
            match e {
                NetError::UnknownNode(_) => "unknown-node",
                NetError::UnknownState { .. } => "unknown-state",
                NetError::InvalidEvidence { .. } => "invalid-evidence",
                NetError::InconsistentEvidence => "inconsistent-evidence",
                NetError::Parse { .. } | NetError::Schema { .. } | NetError::Invalid(_) => {
                    "invalid-network"
                }
                NetError::TooLarge(_) => "too-large",
            }
        }
        fn bms(e: &BmsError) -> &'static str {
            match e {
                BmsError::Net(e) => net(e),
                BmsError::InconsistentEvidence(_) => "inconsistent-evidence",
                BmsError::StaleRead(_) => "stale-read",
                BmsError::NonConvergence(_) => "non-convergence",
                BmsError::InvalidTolerance(_) => "invalid-tolerance",
            }
        }
        fn prospector(e: &ProspectorError) -> &'static str {
            match e {
                ProspectorError::Net(e) => net(e),
                ProspectorError::NotAskable(_) => "not-askable",
                ProspectorError::InvalidProbability(_) => "invalid-evidence",
                ProspectorError::InvalidLink(_) | ProspectorError::NoTopLevel => "invalid-network",
            }
        }
        match self {
            SessionError::Compile(CompileError::Net(e)) | SessionError::Net(e) => net(e),
            SessionError::Compile(_) => "invalid-model",
            SessionError::Prospector(e) => prospector(e),
            SessionError::Bms(e) => bms(e),
            SessionError::Merit(MeritError::Net(e)) => net(e),
            SessionError::Merit(MeritError::Prospector(e)) => prospector(e),
            SessionError::Merit(MeritError::Bms(e)) => bms(e),
            SessionError::Merit(MeritError::AlreadyAnswered(_)) => "already-answered",
            SessionError::NotAskable(_) => "not-askable",
            SessionError::Stopped(_) => "session-stopped",
            SessionError::Journal(_) => "invalid-journal",
        }
    }
}

/// A feature model with both compiled networks.
#[derive(Debug)]
pub struct CompiledModel {
    pub name: String,
    pub model: FeatureModel,
    pub variables: Arc<VariableNetwork>,
    pub propositions: Arc<PropositionNetwork>,
    pub observations: Vec<Observation>,
}

impl CompiledModel {
    pub fn new(name: &str, model: FeatureModel) -> Result<Self, CompileError> {
        Ok(Self {
            name: name.into(),
            variables: Arc::new(compile_bms(&model)?),
            propositions: Arc::new(compile_prospector(&model)?),
            observations: model.observations(),
            model,
        })
    }

    pub fn from_json(name: &str, text: &str) -> Result<Self, CompileError> {
        Self::new(name, FeatureModel::from_json(text)?)
    }

    pub fn observation(&self, id: &str) -> Option<&Observation> {
        self.observations.iter().find(|o| o.id == id)
    }

    pub fn askables(&self) -> Vec<String> {
        self.observations.iter().map(|o| o.id.clone()).collect()
    }
}

#[derive(Clone, Debug)]
pub enum EngineState {
    Prospector(PropositionState),
    Bms(BeliefState),
}

impl EngineState {
    fn fresh(model: &CompiledModel, kind: EngineKind) -> Self {
        match kind {
            EngineKind::Prospector => {
                EngineState::Prospector(PropositionState::new(Arc::clone(&model.propositions)))
            }
            EngineKind::Bms => {
                EngineState::Bms(BeliefState::init_equilibrium(Arc::clone(&model.variables)))
            }
        }
    }

    fn apply(&mut self, evidence: &Evidence) -> Result<(), SessionError> {
        match self {
            EngineState::Prospector(s) => {
                s.post(evidence)?;
                s.propagate();
            }
            EngineState::Bms(s) => {
                s.post_evidence(evidence)?;
                s.propagate()?;
            }
        }
        Ok(())
    }
}

/// Question proposed to the user.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Question {
    pub question: String,
    pub label: String,
    pub states: Vec<String>,
    pub delta_p: f64,
    pub cost: f64,
    pub merit: f64,
}

#[derive(Clone, Debug)]
pub struct Session {
    id: String,
    model: Arc<CompiledModel>,
    kind: EngineKind,
    engine: EngineState,
    journal: Vec<JournalEntry>,
    next_seq: u64,
    status: SessionStatus,
}

fn now_ms() -> u64 {
    #[cfg(not(target_arch = "wasm32"))]
    {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }
    #[cfg(target_arch = "wasm32")]
    {
        0
    }
}

impl Session {
    pub fn start(id: &str, model: Arc<CompiledModel>, kind: EngineKind) -> Self {
        Self {
            id: id.into(),
            engine: EngineState::fresh(&model, kind),
            model,
            kind,
            journal: Vec::new(),
            next_seq: 1,
            status: SessionStatus::Active,
        }
    }

    /// Rebuilds a session from an exported journal, keeping its sequence numbers.
    pub fn replay(
        id: &str,
        model: Arc<CompiledModel>,
        kind: EngineKind,
        journal: Vec<JournalEntry>,
    ) -> Result<Self, SessionError> {
        let mut seen = BTreeSet::new();
        let mut last = 0;
        for entry in &journal {
            if entry.seq <= last {
                return Err(SessionError::Journal(format!(
                    "sequence numbers must increase (saw {} after {last})",
                    entry.seq
                )));
            }
            last = entry.seq;
            if !seen.insert(entry.evidence.node.as_str()) {
                return Err(SessionError::Journal(format!(
                    "node `{}` appears twice",
                    entry.evidence.node
                )));
            }
        }
        let mut session = Self::start(id, model, kind);
        session.engine = session.rebuild(&journal)?;
        session.next_seq = last + 1;
        session.journal = journal;
        Ok(session)
    }

    pub fn replay_json(
        id: &str,
        model: Arc<CompiledModel>,
        kind: EngineKind,
        text: &str,
    ) -> Result<Self, SessionError> {
        let journal: Vec<JournalEntry> =
            serde_json::from_str(text).map_err(|e| SessionError::Journal(e.to_string()))?;
        Self::replay(id, model, kind, journal)
    }

    fn rebuild(&self, journal: &[JournalEntry]) -> Result<EngineState, SessionError> {
        let mut engine = EngineState::fresh(&self.model, self.kind);
        for entry in journal {
            engine.apply(&entry.evidence)?;
        }
        Ok(engine)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> EngineKind {
        self.kind
    }

    pub fn model(&self) -> &Arc<CompiledModel> {
        &self.model
    }

    pub fn engine(&self) -> &EngineState {
        &self.engine
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    pub fn export_journal(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.journal).expect("journal serializes");
        text.push('\n');
        text
    }

    pub fn answered(&self) -> BTreeSet<String> {
        self.journal.iter().map(|e| e.evidence.node.clone()).collect()
    }

    fn ensure_active(&self) -> Result<(), SessionError> {
        match self.status {
            SessionStatus::Active => Ok(()),
            SessionStatus::Stopped(reason) => Err(SessionError::Stopped(reason)),
        }
    }

    fn record(&mut self, evidence: Evidence, source: Source) -> Result<(), SessionError> {
        self.ensure_active()?;
        let replaces = self.journal.iter().any(|e| e.evidence.node == evidence.node);
        let entry = JournalEntry {
            seq: self.next_seq,
            evidence,
            source,
            recorded_ms: now_ms(),
        };
        // nothing is committed unless the engine accepts the evidence
        let engine = if replaces {
            let mut journal: Vec<JournalEntry> = self
                .journal
                .iter()
                .filter(|e| e.evidence.node != entry.evidence.node)
                .cloned()
                .collect();
            journal.push(entry.clone());
            let engine = self.rebuild(&journal)?;
            self.journal = journal;
            engine
        } else {
            let mut engine = self.engine.clone();
            engine.apply(&entry.evidence)?;
            self.journal.push(entry);
            engine
        };
        self.engine = engine;
        self.next_seq += 1;
        Ok(())
    }

    /// Evidence the user offers unprompted, on any node the engine accepts.
    pub fn volunteer(&mut self, evidence: Evidence) -> Result<(), SessionError> {
        self.record(evidence, Source::Volunteered)
    }

    /// Answer to an askable observation.
    pub fn answer(&mut self, question: &str, value: EvidenceForm) -> Result<(), SessionError> {
        if self.model.observation(question).is_none() {
            return Err(SessionError::NotAskable(question.into()));
        }
        self.record(
            Evidence {
                node: question.into(),
                form: value,
            },
            Source::Asked,
        )
    }

    pub fn ranking(&self) -> Result<Ranking, SessionError> {
        match &self.engine {
            EngineState::Prospector(s) => Ok(s.rank_classes()?),
            EngineState::Bms(s) => {
                let bel = s.belief(CLASS_NODE)?;
                Ok(rank(
                    self.model
                        .model
                        .class_ids()
                        .into_iter()
                        .zip(bel.iter().copied()),
                ))
            }
        }
    }

    fn unanswered(&self) -> Vec<String> {
        let answered = self.answered();
        self.model
            .askables()
            .into_iter()
            .filter(|q| !answered.contains(q))
            .collect()
    }

    fn with_target<T>(
        &self,
        f_prospector: impl FnOnce(&PropositionState, &str) -> Result<T, MeritError>,
        f_bms: impl FnOnce(&BeliefState, &StateTarget) -> Result<T, MeritError>,
    ) -> Result<T, SessionError> {
        let ranking = self.ranking()?;
        let top = &ranking[0].0;
        Ok(match &self.engine {
            EngineState::Prospector(s) => f_prospector(s, top)?,
            EngineState::Bms(s) => f_bms(s, &StateTarget::new(CLASS_NODE, top))?,
        })
    }

    fn question(&self, record: MeritRecord) -> Question {
        let obs = self.model.observation(&record.question);
        Question {
            label: obs.map_or_else(|| record.question.clone(), |o| o.label.clone()),
            states: OBSERVATION_STATES.iter().map(|s| s.to_string()).collect(),
            question: record.question,
            delta_p: record.delta_p,
            cost: record.cost,
            merit: record.merit,
        }
    }

    /// Best question about the current leading class, or `None` when the
    /// session is stopped, nothing is left to ask, or no answer could move it.
    pub fn ask(&self) -> Result<Option<Question>, SessionError> {
        if self.status != SessionStatus::Active {
            return Ok(None);
        }
        let askables = self.unanswered();
        let best = self.with_target(
            |s, t| next_question(s, &askables, t, true),
            |s, t| next_question(s, &askables, t, true),
        )?;
        Ok(best.map(|r| self.question(r)))
    }

    /// Merit of every unanswered question, best first.
    pub fn merits(&self) -> Result<Vec<MeritRecord>, SessionError> {
        let askables = self.unanswered();
        self.with_target(
            |s, t| merit_table(s, &askables, t),
            |s, t| merit_table(s, &askables, t),
        )
    }

    /// Current belief of every node, as a distribution over its states.
    pub fn beliefs(&self) -> Result<BTreeMap<String, Vec<f64>>, SessionError> {
        match &self.engine {
            EngineState::Prospector(s) => Ok(s
                .snapshot()
                .into_iter()
                .map(|(id, p)| (id, vec![p, 1.0 - p]))
                .collect()),
            EngineState::Bms(s) => {
                if !s.pending().is_empty() {
                    return Err(BmsError::StaleRead(s.pending().len()).into());
                }
                Ok(s.snapshot())
            }
        }
    }

    /// Stops when the leading class reaches `threshold` or every question is
    /// answered. A stopped session stays stopped.
    pub fn stop_check(&mut self, threshold: f64) -> Result<SessionStatus, SessionError> {
        if self.status != SessionStatus::Active {
            return Ok(self.status);
        }
        let ranking = self.ranking()?;
        if ranking[0].1 >= threshold {
            self.status = SessionStatus::Stopped(StopReason::Confident);
        } else if self.unanswered().is_empty() {
            self.status = SessionStatus::Stopped(StopReason::Exhausted);
        }
        Ok(self.status)
    }

    pub fn stop(&mut self) {
        if self.status == SessionStatus::Active {
            self.status = SessionStatus::Stopped(StopReason::Operator);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = r#"{"classes":[{"id":"a","count":2},{"id":"b","count":1},{"id":"c","count":1}],
        "components":[{"name":"hull","types":["long","short"],
            "membership":{"a":"long","b":"short","c":"short"},
            "attributes":["wide","flat"],
            "weights":{"long":{"wide":8,"flat":3},"short":{"wide":1,"flat":6}}},
          {"name":"mast","types":["tall","low"],
            "membership":{"a":"low","b":"tall","c":"low"},
            "attributes":["visible"],
            "weights":{"tall":{"visible":9},"low":{"visible":2}}}]}"#;

    fn compiled() -> Arc<CompiledModel> {
        Arc::new(CompiledModel::from_json("test", MODEL).unwrap())
    }

    fn close(a: &BTreeMap<String, Vec<f64>>, b: &BTreeMap<String, Vec<f64>>, tol: f64) -> bool {
        a.len() == b.len()
            && a.iter().all(|(k, v)| {
                b[k].len() == v.len() && v.iter().zip(&b[k]).all(|(x, y)| (x - y).abs() <= tol)
            })
    }

    #[test]
    fn fresh_session_ranks_by_prior() {
        for kind in EngineKind::ALL {
            let s = Session::start("s", compiled(), kind);
            let r = s.ranking().unwrap();
            assert_eq!(r[0].0, "a", "{kind}");
            assert!((r[0].1 - 0.5).abs() < 1e-6, "{kind}");
            // b and c tie; the lower id comes first
            assert_eq!(r[1].0, "b");
        }
    }

    #[test]
    fn journal_round_trip_and_replay() {
        for kind in EngineKind::ALL {
            let mut s = Session::start("s", compiled(), kind);
            s.volunteer(Evidence::graded("hull-appears-wide", 0.8)).unwrap();
            s.answer("mast-appears-visible", EvidenceForm::Hard("detected".into())).unwrap();
            let text = s.export_journal();
            assert!(text.contains("\"source\": \"asked\""));
            assert!(!text.contains("recorded"));
            let r = Session::replay_json("r", compiled(), kind, &text).unwrap();
            assert_eq!(s.beliefs().unwrap(), r.beliefs().unwrap());
            assert_eq!(r.journal().len(), 2);
        }
    }

    #[test]
    fn reanswer_replaces() {
        for kind in EngineKind::ALL {
            let mut s = Session::start("s", compiled(), kind);
            s.answer("hull-appears-wide", EvidenceForm::Hard("detected".into())).unwrap();
            s.answer("mast-appears-visible", EvidenceForm::Hard("detected".into())).unwrap();
            s.answer("hull-appears-wide", EvidenceForm::Hard("not-detected".into())).unwrap();
            assert_eq!(s.journal().len(), 2);
            assert_eq!(s.journal()[1].seq, 3);

            let mut direct = Session::start("d", compiled(), kind);
            direct.answer("mast-appears-visible", EvidenceForm::Hard("detected".into())).unwrap();
            direct.answer("hull-appears-wide", EvidenceForm::Hard("not-detected".into())).unwrap();
            assert!(close(&s.beliefs().unwrap(), &direct.beliefs().unwrap(), 1e-12));
        }
    }

    #[test]
    fn rejected_evidence_leaves_no_trace() {
        let mut s = Session::start("s", compiled(), EngineKind::Bms);
        s.volunteer(Evidence::hard("class", "b")).unwrap();
        let before = s.beliefs().unwrap();
        let err = s.volunteer(Evidence::hard("hull", "long")).unwrap_err();
        assert_eq!(err.code(), "inconsistent-evidence");
        assert_eq!(s.beliefs().unwrap(), before);
        assert_eq!(s.journal().len(), 1);

        let err = s.volunteer(Evidence::hard("nope", "x")).unwrap_err();
        assert_eq!(err.code(), "unknown-node");
        let err = s.answer("hull", EvidenceForm::Hard("long".into())).unwrap_err();
        assert_eq!(err.code(), "not-askable");

        let mut p = Session::start("p", compiled(), EngineKind::Prospector);
        let err = p.volunteer(Evidence::graded("hull-fits-a", 1.0)).unwrap_err();
        assert_eq!(err.code(), "not-askable");
    }

    #[test]
    fn stopping() {
        let mut s = Session::start("s", compiled(), EngineKind::Bms);
        assert_eq!(s.stop_check(DEFAULT_STOP_THRESHOLD).unwrap(), SessionStatus::Active);
        s.volunteer(Evidence::hard("class", "a")).unwrap();
        assert_eq!(
            s.stop_check(DEFAULT_STOP_THRESHOLD).unwrap(),
            SessionStatus::Stopped(StopReason::Confident)
        );
        assert!(s.ask().unwrap().is_none());
        let err = s.volunteer(Evidence::graded("hull-appears-wide", 0.5)).unwrap_err();
        assert_eq!(err.code(), "session-stopped");

        let mut e = Session::start("e", compiled(), EngineKind::Prospector);
        for q in e.model().askables() {
            e.answer(&q, EvidenceForm::Graded(0.5)).unwrap();
        }
        assert_eq!(
            e.stop_check(1.0).unwrap(),
            SessionStatus::Stopped(StopReason::Exhausted)
        );

        let mut o = Session::start("o", compiled(), EngineKind::Prospector);
        o.stop();
        assert_eq!(o.status(), SessionStatus::Stopped(StopReason::Operator));
    }

    #[test]
    fn asks_the_best_unanswered_question() {
        for kind in EngineKind::ALL {
            let mut s = Session::start("s", compiled(), kind);
            let merits = s.merits().unwrap();
            let q = s.ask().unwrap().unwrap();
            assert_eq!(q.question, merits[0].question);
            assert_eq!(q.states, ["detected", "not-detected"]);
            s.answer(&q.question, EvidenceForm::Hard("detected".into())).unwrap();
            let next = s.ask().unwrap().unwrap();
            assert_ne!(next.question, q.question);
            assert_eq!(s.merits().unwrap().len(), merits.len() - 1);
        }
    }

    #[test]
    fn status_json() {
        assert_eq!(
            serde_json::to_string(&SessionStatus::Stopped(StopReason::Confident)).unwrap(),
            r#"{"state":"stopped","reason":"confident"}"#
        );
        assert_eq!(
            serde_json::to_string(&SessionStatus::Active).unwrap(),
            r#"{"state":"active"}"#
        );
    }
}
