//! Belief maintenance on singly-connected [`VariableNetwork`]s.
//!
//! Every node keeps a diagnostic support vector `lambda` (evidence from its
//! descendants) and a causal support vector `pi` (evidence from its ancestors);
//! `BEL = normalize(lambda * pi)`. Each directed edge carries a pi-message from
//! parent to child and a lambda-message from child to parent. Activating a node
//! recomputes its supports and outgoing messages from its inbound messages and
//! reports which neighbors now see a different inbound message. Propagation
//! pulls nodes off an [`Agenda`] until nothing is pending.

mod schedule;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::net::{check_likelihood, graded_likelihood, Evidence, EvidenceForm, NetError, VariableNetwork};

pub use schedule::{Agenda, SchedulerPolicy};

/// Message change (max-norm) below which a neighbor is not re-activated.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_ACTIVATION_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum BmsError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("inconsistent evidence: support at `{0}` vanished")]
    InconsistentEvidence(String),
    #[error("stale read: {0} activation(s) still pending")]
    StaleRead(usize),
    #[error("no equilibrium after {0} activations")]
    NonConvergence(u64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

/// Edge bookkeeping: edge `e` joins `parent[e] -> child[e]`.
#[derive(Debug)]
struct Edges {
    parent: Vec<usize>,
    child: Vec<usize>,
    /// Per node, edges from its parents in parent order.
    into: Vec<Vec<usize>>,
    /// Per node, edges to its children in child order.
    out: Vec<Vec<usize>>,
}

impl Edges {
    fn new(network: &VariableNetwork) -> Self {
        let len = network.len();
        let mut edges = Edges {
            parent: Vec::new(),
            child: Vec::new(),
            into: vec![Vec::new(); len],
            out: vec![Vec::new(); len],
        };
        for c in 0..len {
            for &p in network.parents_of(c) {
                let e = edges.parent.len();
                edges.parent.push(p);
                edges.child.push(c);
                edges.into[c].push(e);
                edges.out[p].push(e);
            }
        }
        edges
    }
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let sum: f64 = v.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return None;
    }
    for x in &mut v {
        *x /= sum;
    }
    Some(v)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct BeliefState {
    network: Arc<VariableNetwork>,
    edges: Arc<Edges>,
    prior_marginals: Arc<Vec<Vec<f64>>>,
    evidence: Vec<Vec<f64>>,
    observed: Vec<Option<usize>>,
    lambda: Vec<Vec<f64>>,
    pi: Vec<Vec<f64>>,
    bel: Vec<Vec<f64>>,
    pi_msg: Vec<Vec<f64>>,
    lambda_msg: Vec<Vec<f64>>,
    agenda: Vec<usize>,
    updates: u64,
    activation_cap: u64,
}

impl BeliefState {
    /// No-evidence equilibrium: uniform lambdas, pi computed top-down from the priors.
    pub fn init_equilibrium(network: Arc<VariableNetwork>) -> Self {
        let edges = Edges::new(&network);
        let len = network.len();
        let card = |i: usize| network.cardinality(i);
        let ones: Vec<Vec<f64>> = (0..len).map(|i| vec![1.0; card(i)]).collect();
        let lambda_msg: Vec<Vec<f64>> = edges
            .parent
            .iter()
            .map(|&p| vec![1.0 / card(p) as f64; card(p)])
            .collect();
        let mut state = BeliefState {
            pi_msg: edges.parent.iter().map(|&p| vec![0.0; card(p)]).collect(),
            lambda_msg,
            evidence: ones.clone(),
            observed: vec![None; len],
            lambda: ones.clone(),
            pi: ones.clone(),
            bel: ones,
            prior_marginals: Arc::new(Vec::new()),
            edges: Arc::new(edges),
            network,
            agenda: Vec::new(),
            updates: 0,
            activation_cap: DEFAULT_ACTIVATION_CAP,
        };
        let order = state.network.topological_order().to_vec();
        for n in order {
            let pi = state.compute_pi(n);
            let bel = normalize(pi.clone()).expect("priors are normalized");
            for j in 0..state.edges.out[n].len() {
                let e = state.edges.out[n][j];
                state.pi_msg[e] = bel.clone();
            }
            state.pi[n] = pi;
            state.bel[n] = bel;
        }
        state.prior_marginals = Arc::new(state.bel.clone());
        state
    }

    pub fn network(&self) -> &Arc<VariableNetwork> {
        &self.network
    }

    pub fn with_activation_cap(mut self, cap: u64) -> Self {
        self.activation_cap = cap;
        self
    }

    /// Records evidence and queues the node. Beliefs change only on propagation.
    pub fn post_evidence(&mut self, evidence: &Evidence) -> Result<(), BmsError> {
        let n = self.network.require(&evidence.node)?;
        let node = self.network.node(n);
        let factor: Vec<f64> = match &evidence.form {
            EvidenceForm::Hard(state) => {
                let s = node.state_index(state).ok_or_else(|| NetError::UnknownState {
                    node: node.id.clone(),
                    state: state.clone(),
                })?;
                (0..node.states.len())
                    .map(|k| if k == s { 1.0 } else { 0.0 })
                    .collect()
            }
            EvidenceForm::Virtual(l) => {
                check_likelihood(&node.id, l, node.states.len())?;
                l.clone()
            }
            EvidenceForm::Graded(p) => {
                if node.states.len() != 2 {
                    return Err(NetError::InvalidEvidence {
                        node: node.id.clone(),
                        reason: "graded evidence needs a binary node".into(),
                    }
                    .into());
                }
                graded_likelihood(&node.id, *p, self.prior_marginals[n][0])?.to_vec()
            }
        };
        let combined: Vec<f64> = self.evidence[n]
            .iter()
            .zip(&factor)
            .map(|(a, b)| a * b)
            .collect();
        if combined.iter().all(|&v| v == 0.0) {
            return Err(BmsError::InconsistentEvidence(node.id.clone()));
        }
        if let EvidenceForm::Hard(state) = &evidence.form {
            self.observed[n] = node.state_index(state);
        }
        self.evidence[n] = combined;
        self.agenda.push(n);
        Ok(())
    }

    fn compute_lambda(&self, n: usize) -> Vec<f64> {
        let mut lambda = self.evidence[n].clone();
        for &e in &self.edges.out[n] {
            for (l, m) in lambda.iter_mut().zip(&self.lambda_msg[e]) {
                *l *= m;
            }
        }
        lambda
    }

    /// Calls `f(row, parent_states)` for every parent configuration, in row order.
    fn for_each_row(&self, n: usize, mut f: impl FnMut(usize, &[usize])) {
        let parents = self.network.parents_of(n);
        let cards: Vec<usize> = parents.iter().map(|&p| self.network.cardinality(p)).collect();
        let mut states = vec![0usize; parents.len()];
        let rows = self.network.node(n).table.len();
        for row in 0..rows {
            f(row, &states);
            for k in (0..states.len()).rev() {
                states[k] += 1;
                if states[k] < cards[k] {
                    break;
                }
                states[k] = 0;
            }
        }
    }

    fn compute_pi(&self, n: usize) -> Vec<f64> {
        let node = self.network.node(n);
        if node.is_root() {
            return node.table[0].clone();
        }
        let into = &self.edges.into[n];
        let mut pi = vec![0.0; node.states.len()];
        self.for_each_row(n, |row, states| {
            let weight: f64 = into
                .iter()
                .zip(states)
                .map(|(&e, &s)| self.pi_msg[e][s])
                .product();
            if weight != 0.0 {
                for (p, t) in pi.iter_mut().zip(&node.table[row]) {
                    *p += t * weight;
                }
            }
        });
        pi
    }

    /// Unnormalized lambda-message from `n` to its parent in slot `slot`.
    fn lambda_message(&self, n: usize, slot: usize, lambda: &[f64]) -> Vec<f64> {
        let node = self.network.node(n);
        let into = &self.edges.into[n];
        let parent = self.edges.parent[into[slot]];
        let mut msg = vec![0.0; self.network.cardinality(parent)];
        self.for_each_row(n, |row, states| {
            let fit: f64 = node.table[row].iter().zip(lambda).map(|(t, l)| t * l).sum();
            if fit == 0.0 {
                return;
            }
            let weight: f64 = into
                .iter()
                .zip(states)
                .enumerate()
                .filter(|&(k, _)| k != slot)
                .map(|(_, (&e, &s))| self.pi_msg[e][s])
                .product();
            msg[states[slot]] += weight * fit;
        });
        msg
    }

    /// Unnormalized pi-message from `n` to its child in slot `slot`; the product over
    /// the other children is taken directly so hard zeros never divide.
    fn pi_message(&self, n: usize, slot: usize, pi: &[f64]) -> Vec<f64> {
        let mut msg: Vec<f64> = pi.iter().zip(&self.evidence[n]).map(|(p, e)| p * e).collect();
        for (k, &e) in self.edges.out[n].iter().enumerate() {
            if k != slot {
                for (m, l) in msg.iter_mut().zip(&self.lambda_msg[e]) {
                    *m *= l;
                }
            }
        }
        msg
    }

    /// Recomputes `n`'s supports, belief and outgoing messages. Returns the
    /// neighbors (parents first, then children) whose inbound message moved by more
    /// than `tolerance` in max-norm.
    pub fn activate_index(&mut self, n: usize, tolerance: f64) -> Result<Vec<usize>, BmsError> {
        self.updates += 1;
        let inconsistent = || BmsError::InconsistentEvidence(self.network.node(n).id.clone());
        let lambda = self.compute_lambda(n);
        let pi = self.compute_pi(n);
        let bel = normalize(lambda.iter().zip(&pi).map(|(l, p)| l * p).collect())
            .ok_or_else(inconsistent)?;

        let mut changed = Vec::new();
        let mut lambda_out = Vec::with_capacity(self.edges.into[n].len());
        for slot in 0..self.edges.into[n].len() {
            let msg = normalize(self.lambda_message(n, slot, &lambda)).ok_or_else(inconsistent)?;
            lambda_out.push(msg);
        }
        let mut pi_out = Vec::with_capacity(self.edges.out[n].len());
        for slot in 0..self.edges.out[n].len() {
            let msg = normalize(self.pi_message(n, slot, &pi)).ok_or_else(inconsistent)?;
            pi_out.push(msg);
        }

        let edges = Arc::clone(&self.edges);
        for (&e, msg) in edges.into[n].iter().zip(lambda_out) {
            if max_diff(&msg, &self.lambda_msg[e]) > tolerance {
                changed.push(edges.parent[e]);
            }
            self.lambda_msg[e] = msg;
        }
        for (&e, msg) in edges.out[n].iter().zip(pi_out) {
            if max_diff(&msg, &self.pi_msg[e]) > tolerance {
                changed.push(edges.child[e]);
            }
            self.pi_msg[e] = msg;
        }
        self.lambda[n] = lambda;
        self.pi[n] = pi;
        self.bel[n] = bel;
        Ok(changed)
    }

    /// [`activate_index`](Self::activate_index) by id, at the default tolerance.
    pub fn activate(&mut self, id: &str) -> Result<Vec<String>, BmsError> {
        let n = self.network.require(id)?;
        let changed = self.activate_index(n, DEFAULT_TOLERANCE)?;
        Ok(changed
            .into_iter()
            .map(|i| self.network.node(i).id.clone())
            .collect())
    }

    /// Runs the agenda dry under `policy`. Returns the number of activations.
    pub fn propagate_to_equilibrium(
        &mut self,
        policy: SchedulerPolicy,
        tolerance: f64,
    ) -> Result<u64, BmsError> {
        if !(tolerance > 0.0) {
            return Err(BmsError::InvalidTolerance(tolerance));
        }
        let mut agenda = Agenda::new(policy, self.network.len());
        for n in self.agenda.drain(..) {
            agenda.push(n);
        }
        let mut activations = 0u64;
        while let Some(n) = agenda.pop() {
            if activations >= self.activation_cap {
                self.agenda.push(n);
                self.agenda.extend(agenda.entries());
                return Err(BmsError::NonConvergence(activations));
            }
            activations += 1;
            match self.activate_index(n, tolerance) {
                Ok(changed) => changed.into_iter().for_each(|c| agenda.push(c)),
                Err(e) => {
                    self.agenda.push(n);
                    self.agenda.extend(agenda.entries());
                    return Err(e);
                }
            }
        }
        Ok(activations)
    }

    /// Default policy and tolerance.
    pub fn propagate(&mut self) -> Result<u64, BmsError> {
        self.propagate_to_equilibrium(SchedulerPolicy::FifoDedup, DEFAULT_TOLERANCE)
    }

    pub fn belief(&self, id: &str) -> Result<&[f64], BmsError> {
        self.belief_at(self.network.require(id)?, false)
    }

    /// Reads `BEL`; refuses while activations are pending unless `allow_stale`.
    pub fn belief_at(&self, n: usize, allow_stale: bool) -> Result<&[f64], BmsError> {
        if !allow_stale && !self.agenda.is_empty() {
            return Err(BmsError::StaleRead(self.agenda.len()));
        }
        Ok(&self.bel[n])
    }

    pub fn lambda(&self, n: usize) -> &[f64] {
        &self.lambda[n]
    }

    pub fn pi(&self, n: usize) -> &[f64] {
        &self.pi[n]
    }

    pub fn prior_marginal(&self, n: usize) -> &[f64] {
        &self.prior_marginals[n]
    }

    /// Hard-observed state of a node, if any.
    pub fn observed(&self, n: usize) -> Option<usize> {
        self.observed[n]
    }

    pub fn has_evidence(&self, n: usize) -> bool {
        self.evidence[n].iter().any(|&v| v != 1.0)
    }

    /// Queued activations, in posting order.
    pub fn pending(&self) -> &[usize] {
        &self.agenda
    }

    pub fn update_count(&self) -> u64 {
        self.updates
    }

    /// Beliefs by node id.
    pub fn snapshot(&self) -> BTreeMap<String, Vec<f64>> {
        self.network
            .nodes()
            .iter()
            .zip(&self.bel)
            .map(|(n, b)| (n.id.clone(), b.clone()))
            .collect()
    }

    /// All messages, lambda-messages first, for convergence comparisons.
    pub fn messages(&self) -> impl Iterator<Item = &[f64]> {
        self.lambda_msg
            .iter()
            .chain(&self.pi_msg)
            .map(Vec::as_slice)
    }
}
