//! Subjective-Bayes updating over [`PropositionNetwork`]s.
//!
//! Each link `E -> H` carries `lambda1 = P(H | E)` and `lambda2 = P(H | not E)`.
//! When `E` is uncertain its current probability is mapped to a posterior for
//! `H` by piecewise-linear interpolation through three anchors: `P(E) = 0` gives
//! `lambda2`, `P(E) = prior(E)` gives `prior(H)`, `P(E) = 1` gives `lambda1`.
//! The per-link posteriors of all antecedents of `H` are then combined with an
//! odds product relative to `prior(H)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::net::{check_likelihood, Evidence, EvidenceForm, NetError, PropositionNetwork};
use crate::{rank, Ranking};

/// Every probability that enters odds arithmetic is clamped to `[EPSILON, 1 - EPSILON]`.
pub const EPSILON: f64 = 1e-9;

/// A consequent whose probability moves by more than this is propagated further.
pub const CHANGE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ProspectorError {
    #[error("invalid link: antecedent prior {0} leaves the interpolation anchors degenerate")]
    InvalidLink(f64),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("proposition `{0}` is not askable")]
    NotAskable(String),
    #[error("no top-level propositions are designated")]
    NoTopLevel,
    #[error(transparent)]
    Net(#[from] NetError),
}

pub fn clamp(p: f64) -> f64 {
    p.clamp(EPSILON, 1.0 - EPSILON)
}

fn odds(p: f64) -> f64 {
    p / (1.0 - p)
}

/// Posterior of a consequent given the current probability `p_obs` of one antecedent.
///
/// `prior` is the consequent's prior, `p_e` the antecedent's prior.
pub fn interpolate_posterior(
    prior: f64,
    p_e: f64,
    lambda1: f64,
    lambda2: f64,
    p_obs: f64,
) -> Result<f64, ProspectorError> {
    if !(p_e > 0.0 && p_e < 1.0) {
        return Err(ProspectorError::InvalidLink(p_e));
    }
    for p in [prior, lambda1, lambda2, p_obs] {
        if !(0.0..=1.0).contains(&p) {
            return Err(ProspectorError::InvalidProbability(p));
        }
    }
    Ok(interpolate(prior, p_e, lambda1, lambda2, p_obs))
}

fn interpolate(prior: f64, p_e: f64, lambda1: f64, lambda2: f64, p_obs: f64) -> f64 {
    let p = if p_obs <= p_e {
        lambda2 + (prior - lambda2) * p_obs / p_e
    } else {
        prior + (lambda1 - prior) * (p_obs - p_e) / (1.0 - p_e)
    };
    clamp(p)
}

/// Odds-product combination: `O = O(prior) * prod(O(c_i) / O(prior))`.
pub fn combine_evidence(prior: f64, contributions: &[f64]) -> f64 {
    let prior = clamp(prior);
    let base = odds(prior);
    let o = contributions
        .iter()
        .fold(base, |o, &c| o * odds(clamp(c)) / base);
    clamp(o / (1.0 + o))
}

/// Maps a hard answer on a proposition to a probability.
pub fn hard_value(state: &str) -> Option<f64> {
    match state {
        "true" | "detected" => Some(1.0),
        "false" | "not-detected" => Some(0.0),
        _ => None,
    }
}

/// Live probabilities over one proposition network.
#[derive(Clone, Debug)]
pub struct PropositionState {
    network: Arc<PropositionNetwork>,
    current: Vec<f64>,
    observed: Vec<Option<f64>>,
    contributions: Vec<f64>,
    dirty: Vec<bool>,
    visits: Vec<u32>,
}

impl PropositionState {
    pub fn new(network: Arc<PropositionNetwork>) -> Self {
        let current: Vec<f64> = network.nodes().iter().map(|n| clamp(n.prior)).collect();
        let contributions = (0..network.links().len())
            .map(|k| current[network.link_ends(k).1])
            .collect();
        let len = network.len();
        Self {
            network,
            current,
            observed: vec![None; len],
            contributions,
            dirty: vec![false; len],
            visits: vec![0; len],
        }
    }

    pub fn network(&self) -> &PropositionNetwork {
        &self.network
    }

    /// Sets an askable proposition to `p_obs`, replacing any earlier observation.
    pub fn post_graded_evidence(&mut self, id: &str, p_obs: f64) -> Result<(), ProspectorError> {
        let n = self.network.require(id)?;
        if !self.network.node(n).askable {
            return Err(ProspectorError::NotAskable(id.to_string()));
        }
        if !(0.0..=1.0).contains(&p_obs) {
            return Err(ProspectorError::InvalidProbability(p_obs));
        }
        let p = clamp(p_obs);
        self.observed[n] = Some(p);
        self.current[n] = p;
        self.dirty[n] = true;
        Ok(())
    }

    /// Accepts any evidence form. Hard answers map through [`hard_value`]; a virtual
    /// likelihood `(l1, l2)` becomes the posterior of the proposition under its prior.
    pub fn post(&mut self, evidence: &Evidence) -> Result<(), ProspectorError> {
        let n = self.network.require(&evidence.node)?;
        let p_obs = match &evidence.form {
            EvidenceForm::Hard(state) => hard_value(state).ok_or_else(|| NetError::UnknownState {
                node: evidence.node.clone(),
                state: state.clone(),
            })?,
            EvidenceForm::Graded(p) => *p,
            EvidenceForm::Virtual(l) => {
                check_likelihood(&evidence.node, l, 2)?;
                let prior = self.network.node(n).prior;
                l[0] * prior / (l[0] * prior + l[1] * (1.0 - prior))
            }
        };
        self.post_graded_evidence(&evidence.node, p_obs)
    }

    /// Pushes pending changes through the network in topological order. Each
    /// consequent is recomputed at most once. Returns the number of recomputations.
    pub fn propagate(&mut self) -> usize {
        self.visits.fill(0);
        let net = Arc::clone(&self.network);
        let mut recomputed = 0;
        for &n in net.topological_order() {
            if self.observed[n].is_some() {
                continue;
            }
            let incoming = net.incoming(n);
            if !incoming.iter().any(|&k| self.dirty[net.link_ends(k).0]) {
                continue;
            }
            let prior = net.node(n).prior;
            for &k in incoming {
                let a = net.link_ends(k).0;
                if self.dirty[a] {
                    let link = &net.links()[k];
                    self.contributions[k] = interpolate(
                        prior,
                        net.node(a).prior,
                        link.lambda1,
                        link.lambda2,
                        self.current[a],
                    );
                }
            }
            let contributions: Vec<f64> = incoming.iter().map(|&k| self.contributions[k]).collect();
            let updated = combine_evidence(prior, &contributions);
            self.visits[n] += 1;
            recomputed += 1;
            if (updated - self.current[n]).abs() > CHANGE_THRESHOLD {
                self.dirty[n] = true;
            }
            self.current[n] = updated;
        }
        self.dirty.fill(false);
        recomputed
    }

    pub fn probability(&self, id: &str) -> Result<f64, ProspectorError> {
        Ok(self.current[self.network.require(id)?])
    }

    pub fn probability_at(&self, index: usize) -> f64 {
        self.current[index]
    }

    pub fn observation(&self, id: &str) -> Result<Option<f64>, ProspectorError> {
        Ok(self.observed[self.network.require(id)?])
    }

    /// Per-link posterior of the consequent under that link alone.
    pub fn contribution(&self, link: usize) -> f64 {
        self.contributions[link]
    }

    /// How often each node was recomputed during the last [`propagate`](Self::propagate).
    pub fn last_visits(&self) -> &[u32] {
        &self.visits
    }

    pub fn snapshot(&self) -> BTreeMap<String, f64> {
        self.network
            .nodes()
            .iter()
            .zip(&self.current)
            .map(|(n, &p)| (n.id.clone(), p))
            .collect()
    }

    pub fn rank_classes(&self) -> Result<Ranking, ProspectorError> {
        let top = self.network.top();
        if top.is_empty() {
            return Err(ProspectorError::NoTopLevel);
        }
        let entries = top
            .iter()
            .map(|id| Ok((id.clone(), self.probability(id)?)))
            .collect::<Result<Vec<_>, ProspectorError>>()?;
        Ok(rank(entries))
    }
}
