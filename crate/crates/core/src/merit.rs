//! Question selection by expected change in a tracked probability.
//!
//! For an unanswered question `q` with answers `a`, the expected change is
//! `sum_a P(a) * |target after a - target now|`, computed by propagating each
//! answer on a clone of the engine state. Merit divides that by the cost of
//! asking.

use serde::Serialize;
use thiserror::Error;

use crate::bms::{BeliefState, BmsError, SchedulerPolicy};
use crate::net::{Evidence, NetError};
use crate::prospector::{ProspectorError, PropositionState};

/// Tolerance for what-if propagation; tighter than the default so expected
/// changes are not swamped by convergence noise.
pub const WHAT_IF_TOLERANCE: f64 = 1e-12;

/// Merits within this of each other are treated as equal; ties go to the lower id.
pub const MERIT_TIE: f64 = 1e-12;

/// Answers whose predictive probability is at most this are skipped.
const IMPOSSIBLE: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum MeritError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Prospector(#[from] ProspectorError),
    #[error(transparent)]
    Bms(#[from] BmsError),
    #[error("question `{0}` is already answered")]
    AlreadyAnswered(String),
}

/// A state `q` can be queried against: clone it, assume an answer, read the target.
pub trait WhatIf: Clone {
    type Target: ?Sized;

    /// Possible answers to `question` with their current predictive probabilities.
    fn answers(&self, question: &str) -> Result<Vec<(Evidence, f64)>, MeritError>;

    /// Posts `answer` and propagates.
    fn assume(&mut self, answer: &Evidence) -> Result<(), MeritError>;

    fn tracked(&self, target: &Self::Target) -> Result<f64, MeritError>;

    fn question_cost(&self, question: &str) -> Result<f64, MeritError>;

    fn is_answered(&self, question: &str) -> Result<bool, MeritError>;
}

/// A state of a variable node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateTarget {
    pub node: String,
    pub state: String,
}

impl StateTarget {
    pub fn new(node: &str, state: &str) -> Self {
        Self {
            node: node.into(),
            state: state.into(),
        }
    }
}

impl WhatIf for BeliefState {
    type Target = StateTarget;

    fn answers(&self, question: &str) -> Result<Vec<(Evidence, f64)>, MeritError> {
        let n = self.network().require(question)?;
        let bel = self.belief(question)?;
        Ok(self
            .network()
            .node(n)
            .states
            .iter()
            .zip(bel)
            .map(|(s, &p)| (Evidence::hard(question, s), p))
            .collect())
    }

    fn assume(&mut self, answer: &Evidence) -> Result<(), MeritError> {
        self.post_evidence(answer)?;
        self.propagate_to_equilibrium(SchedulerPolicy::FifoDedup, WHAT_IF_TOLERANCE)?;
        Ok(())
    }

    fn tracked(&self, target: &StateTarget) -> Result<f64, MeritError> {
        let n = self.network().require(&target.node)?;
        let s = self
            .network()
            .node(n)
            .state_index(&target.state)
            .ok_or_else(|| NetError::UnknownState {
                node: target.node.clone(),
                state: target.state.clone(),
            })?;
        Ok(self.belief(&target.node)?[s])
    }

    fn question_cost(&self, question: &str) -> Result<f64, MeritError> {
        let n = self.network().require(question)?;
        Ok(self.network().node(n).cost)
    }

    fn is_answered(&self, question: &str) -> Result<bool, MeritError> {
        Ok(self.has_evidence(self.network().require(question)?))
    }
}

impl WhatIf for PropositionState {
    type Target = str;

    fn answers(&self, question: &str) -> Result<Vec<(Evidence, f64)>, MeritError> {
        let n = self.network().require(question)?;
        if !self.network().node(n).askable {
            return Err(ProspectorError::NotAskable(question.into()).into());
        }
        let p = self.probability_at(n);
        Ok(vec![
            (Evidence::graded(question, 1.0), p),
            (Evidence::graded(question, 0.0), 1.0 - p),
        ])
    }

    fn assume(&mut self, answer: &Evidence) -> Result<(), MeritError> {
        self.post(answer)?;
        self.propagate();
        Ok(())
    }

    fn tracked(&self, target: &str) -> Result<f64, MeritError> {
        Ok(self.probability(target)?)
    }

    fn question_cost(&self, question: &str) -> Result<f64, MeritError> {
        let n = self.network().require(question)?;
        Ok(self.network().node(n).cost)
    }

    fn is_answered(&self, question: &str) -> Result<bool, MeritError> {
        Ok(self.observation(question)?.is_some())
    }
}

/// Target value after one hypothetical answer.
#[derive(Clone, Debug, Serialize)]
pub struct AnswerOutcome {
    pub answer: Evidence,
    pub probability: f64,
    pub tracked: f64,
}

/// Every possible answer to `question`, propagated on a clone of `state`.
pub fn answer_outcomes<S: WhatIf>(
    state: &S,
    question: &str,
    target: &S::Target,
) -> Result<Vec<AnswerOutcome>, MeritError> {
    if state.is_answered(question)? {
        return Err(MeritError::AlreadyAnswered(question.into()));
    }
    let mut out = Vec::new();
    for (answer, probability) in state.answers(question)? {
        if probability <= IMPOSSIBLE {
            continue;
        }
        let mut what_if = state.clone();
        what_if.assume(&answer)?;
        out.push(AnswerOutcome {
            tracked: what_if.tracked(target)?,
            answer,
            probability,
        });
    }
    Ok(out)
}

pub fn expected_delta<S: WhatIf>(
    state: &S,
    question: &str,
    target: &S::Target,
) -> Result<f64, MeritError> {
    let now = state.tracked(target)?;
    Ok(answer_outcomes(state, question, target)?
        .iter()
        .map(|o| o.probability * (o.tracked - now).abs())
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeritRecord {
    pub question: String,
    pub delta_p: f64,
    pub cost: f64,
    pub merit: f64,
}

pub fn merit<S: WhatIf>(
    state: &S,
    question: &str,
    target: &S::Target,
) -> Result<MeritRecord, MeritError> {
    let delta_p = expected_delta(state, question, target)?;
    let cost = state.question_cost(question)?;
    Ok(MeritRecord {
        question: question.into(),
        delta_p,
        cost,
        merit: delta_p / cost,
    })
}

/// Merits of every unanswered question in `askables`, best first.
pub fn merit_table<S: WhatIf>(
    state: &S,
    askables: &[String],
    target: &S::Target,
) -> Result<Vec<MeritRecord>, MeritError> {
    let mut ids: Vec<&String> = askables.iter().collect();
    ids.sort();
    ids.dedup();
    let mut table = Vec::new();
    for id in ids {
        if !state.is_answered(id)? {
            table.push(merit(state, id, target)?);
        }
    }
    // stable sort over ascending ids keeps the lower id first among ties
    table.sort_by(|a, b| {
        if (a.merit - b.merit).abs() <= MERIT_TIE {
            std::cmp::Ordering::Equal
        } else {
            b.merit.total_cmp(&a.merit)
        }
    });
    Ok(table)
}

/// Highest-merit unanswered question; the lowest id wins ties. `None` when
/// nothing is left to ask, or when `stop_on_zero` is set and no question can
/// move the target.
pub fn next_question<S: WhatIf>(
    state: &S,
    askables: &[String],
    target: &S::Target,
    stop_on_zero: bool,
) -> Result<Option<MeritRecord>, MeritError> {
    let mut ids: Vec<&String> = askables.iter().collect();
    ids.sort();
    ids.dedup();
    let mut best: Option<MeritRecord> = None;
    for id in ids {
        if state.is_answered(id)? {
            continue;
        }
        let record = merit(state, id, target)?;
        if best.as_ref().is_none_or(|b| record.merit > b.merit + MERIT_TIE) {
            best = Some(record);
        }
    }
    Ok(best.filter(|b| !(stop_on_zero && b.merit <= MERIT_TIE)))
}
