use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use super::HarnessError;
use crate::compiler::OBSERVATION_STATES;
use crate::net::Evidence;
use crate::session::{CompiledModel, EngineKind, Session};
use crate::Ranking;

/// Both engines' view of one evidence set.
#[derive(Clone, Debug, Serialize)]
pub struct CaseOutcome {
    pub evidence: Vec<Evidence>,
    pub prospector: Ranking,
    pub bms: Ranking,
    pub top_agrees: bool,
    /// Class to 1-based rank under (prospector, bms).
    pub ranks: BTreeMap<String, (usize, usize)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AgreementReport {
    pub model: String,
    pub cases: Vec<CaseOutcome>,
    pub top_agreements: usize,
    pub top_agreement_rate: f64,
    pub mean_rank_difference: f64,
}

/// One case per observation and answer: each attribute seen or not seen, alone.
pub fn single_attribute_cases(model: &CompiledModel) -> Vec<Vec<Evidence>> {
    model
        .observations
        .iter()
        .flat_map(|o| {
            OBSERVATION_STATES
                .iter()
                .map(move |s| vec![Evidence::hard(&o.id, s)])
        })
        .collect()
}

fn final_ranking(
    model: &Arc<CompiledModel>,
    kind: EngineKind,
    evidence: &[Evidence],
) -> Result<Ranking, HarnessError> {
    let mut session = Session::start("compare", Arc::clone(model), kind);
    for e in evidence {
        session.volunteer(e.clone())?;
    }
    Ok(session.ranking()?)
}

pub fn compare_engines(
    model: &Arc<CompiledModel>,
    cases: &[Vec<Evidence>],
) -> Result<AgreementReport, HarnessError> {
    let mut outcomes = Vec::with_capacity(cases.len());
    let mut rank_difference = 0.0;
    let mut rank_terms = 0usize;
    for evidence in cases {
        let prospector = final_ranking(model, EngineKind::Prospector, evidence)?;
        let bms = final_ranking(model, EngineKind::Bms, evidence)?;
        let position = |r: &Ranking, id: &str| r.iter().position(|(c, _)| c == id).map(|i| i + 1);
        let ranks: BTreeMap<String, (usize, usize)> = prospector
            .iter()
            .filter_map(|(id, _)| Some((id.clone(), (position(&prospector, id)?, position(&bms, id)?))))
            .collect();
        for &(a, b) in ranks.values() {
            rank_difference += a.abs_diff(b) as f64;
            rank_terms += 1;
        }
        outcomes.push(CaseOutcome {
            evidence: evidence.clone(),
            top_agrees: prospector.first().map(|t| &t.0) == bms.first().map(|t| &t.0),
            prospector,
            bms,
            ranks,
        });
    }
    let top_agreements = outcomes.iter().filter(|o| o.top_agrees).count();
    Ok(AgreementReport {
        model: model.name.clone(),
        top_agreement_rate: if outcomes.is_empty() {
            1.0
        } else {
            top_agreements as f64 / outcomes.len() as f64
        },
        mean_rank_difference: if rank_terms == 0 {
            0.0
        } else {
            rank_difference / rank_terms as f64
        },
        top_agreements,
        cases: outcomes,
    })
}
