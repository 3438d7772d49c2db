//! Graph data model for variable networks (multi-valued nodes with CPTs) and
//! proposition networks (binary propositions joined by evidential links).
//!
//! Both network types are immutable once constructed; constructors run the
//! full validator and refuse anything it flags.

mod io;
mod oracle;
mod validate;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_network, save_network, Network};
pub use oracle::{exact_posterior, Marginals, MAX_JOINT_CONFIGURATIONS};
pub use validate::{
    validate, validate_propositions, validate_variables, ValidationReport, Violation,
};

/// Absolute tolerance for probability comparisons (normalization checks and the like).
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Default question cost.
pub const DEFAULT_COST: f64 = 1.0;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error in {location}: {message}")]
    Schema { location: String, message: String },
    #[error("invalid network: {0}")]
    Invalid(ValidationReport),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` has no state `{state}`")]
    UnknownState { node: String, state: String },
    #[error("invalid evidence on `{node}`: {reason}")]
    InvalidEvidence { node: String, reason: String },
    #[error("inconsistent evidence: the evidence has zero probability")]
    InconsistentEvidence,
    #[error("joint has {0} configurations, above the enumeration cap")]
    TooLarge(u128),
}

/// A multi-valued variable. Roots carry their prior as the single row of `table`;
/// other nodes carry one row per parent configuration, first parent varying slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableNode {
    pub id: String,
    pub label: String,
    pub states: Vec<String>,
    pub parents: Vec<String>,
    pub table: Vec<Vec<f64>>,
    pub cost: f64,
}

impl VariableNode {
    pub fn root(id: &str, label: &str, states: &[&str], prior: Vec<f64>) -> Self {
        Self {
            id: id.to_string(),
            label: label.to_string(),
            states: states.iter().map(|s| s.to_string()).collect(),
            parents: Vec::new(),
            table: vec![prior],
            cost: DEFAULT_COST,
        }
    }

    pub fn child(
        id: &str,
        label: &str,
        states: &[&str],
        parents: &[&str],
        cpt: Vec<Vec<f64>>,
    ) -> Self {
        Self {
            id: id.to_string(),
            label: label.to_string(),
            states: states.iter().map(|s| s.to_string()).collect(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            table: cpt,
            cost: DEFAULT_COST,
        }
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.cost = cost;
        self
    }

    pub fn is_root(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn prior(&self) -> Option<&[f64]> {
        if self.is_root() {
            self.table.first().map(Vec::as_slice)
        } else {
            None
        }
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// Singly-connected network of [`VariableNode`]s.
#[derive(Clone, Debug)]
pub struct VariableNetwork {
    nodes: Vec<VariableNode>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
}

impl PartialEq for VariableNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl VariableNetwork {
    pub fn new(nodes: Vec<VariableNode>) -> Result<Self, NetError> {
        let report = validate_variables(&nodes);
        if !report.is_valid() {
            return Err(NetError::Invalid(report));
        }
        let index: HashMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let parents: Vec<Vec<usize>> = nodes
            .iter()
            .map(|n| n.parents.iter().map(|p| index[p]).collect())
            .collect();
        let mut children = vec![Vec::new(); nodes.len()];
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p].push(child);
            }
        }
        let order = topological_order(nodes.len(), &parents);
        Ok(Self {
            nodes,
            index,
            parents,
            children,
            order,
        })
    }

    pub fn nodes(&self) -> &[VariableNode] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &VariableNode {
        &self.nodes[index]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn link_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<usize, NetError> {
        self.index_of(id)
            .ok_or_else(|| NetError::UnknownNode(id.to_string()))
    }

    pub fn parents_of(&self, index: usize) -> &[usize] {
        &self.parents[index]
    }

    pub fn children_of(&self, index: usize) -> &[usize] {
        &self.children[index]
    }

    pub fn cardinality(&self, index: usize) -> usize {
        self.nodes[index].states.len()
    }

    /// Parents before children; ties resolved by declaration order.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Nodes without children.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.children[i].is_empty())
            .collect()
    }

    /// Row of `index`'s table for the given parent states (one per parent, in parent order).
    pub fn row_index(&self, index: usize, parent_states: &[usize]) -> usize {
        self.parents[index]
            .iter()
            .zip(parent_states)
            .fold(0, |row, (&p, &s)| row * self.cardinality(p) + s)
    }
}

/// A binary proposition.
#[derive(Clone, Debug, PartialEq)]
pub struct PropositionNode {
    pub id: String,
    pub label: String,
    pub prior: f64,
    pub askable: bool,
    pub cost: f64,
}

impl PropositionNode {
    pub fn new(id: &str, label: &str, prior: f64) -> Self {
        Self {
            id: id.to_string(),
            label: label.to_string(),
            prior,
            askable: false,
            cost: DEFAULT_COST,
        }
    }

    pub fn askable(mut self) -> Self {
        self.askable = true;
        self
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.cost = cost;
        self
    }
}

/// `If antecedent then (to extent lambda1, lambda2) conclude consequent`:
/// `lambda1 = P(consequent | antecedent)`, `lambda2 = P(consequent | not antecedent)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvidentialLink {
    pub antecedent: String,
    pub consequent: String,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl EvidentialLink {
    pub fn new(antecedent: &str, consequent: &str, lambda1: f64, lambda2: f64) -> Self {
        Self {
            antecedent: antecedent.to_string(),
            consequent: consequent.to_string(),
            lambda1,
            lambda2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PropositionNetwork {
    nodes: Vec<PropositionNode>,
    links: Vec<EvidentialLink>,
    top: Vec<String>,
    index: HashMap<String, usize>,
    link_ends: Vec<(usize, usize)>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
    order: Vec<usize>,
}

impl PartialEq for PropositionNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.links == other.links && self.top == other.top
    }
}

impl PropositionNetwork {
    pub fn new(
        nodes: Vec<PropositionNode>,
        links: Vec<EvidentialLink>,
        top: Vec<String>,
    ) -> Result<Self, NetError> {
        let report = validate_propositions(&nodes, &links, &top);
        if !report.is_valid() {
            return Err(NetError::Invalid(report));
        }
        let index: HashMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let link_ends: Vec<(usize, usize)> = links
            .iter()
            .map(|l| (index[&l.antecedent], index[&l.consequent]))
            .collect();
        let mut incoming = vec![Vec::new(); nodes.len()];
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut parents = vec![Vec::new(); nodes.len()];
        for (k, &(from, to)) in link_ends.iter().enumerate() {
            outgoing[from].push(k);
            incoming[to].push(k);
            parents[to].push(from);
        }
        let order = topological_order(nodes.len(), &parents);
        Ok(Self {
            nodes,
            links,
            top,
            index,
            link_ends,
            incoming,
            outgoing,
            order,
        })
    }

    pub fn nodes(&self) -> &[PropositionNode] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &PropositionNode {
        &self.nodes[index]
    }

    pub fn links(&self) -> &[EvidentialLink] {
        &self.links
    }

    pub fn top(&self) -> &[String] {
        &self.top
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<usize, NetError> {
        self.index_of(id)
            .ok_or_else(|| NetError::UnknownNode(id.to_string()))
    }

    /// `(antecedent, consequent)` node indices of link `k`.
    pub fn link_ends(&self, k: usize) -> (usize, usize) {
        self.link_ends[k]
    }

    pub fn incoming(&self, index: usize) -> &[usize] {
        &self.incoming[index]
    }

    pub fn outgoing(&self, index: usize) -> &[usize] {
        &self.outgoing[index]
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }
}

/// Kahn's algorithm, always picking the lowest-index ready node. Assumes acyclicity.
fn topological_order(len: usize, parents: &[Vec<usize>]) -> Vec<usize> {
    let mut pending: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut children = vec![Vec::new(); len];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    let mut ready: std::collections::BTreeSet<usize> =
        (0..len).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(len);
    while let Some(n) = ready.pop_first() {
        order.push(n);
        for &c in &children[n] {
            pending[c] -= 1;
            if pending[c] == 0 {
                ready.insert(c);
            }
        }
    }
    order
}

/// An observation reported against one node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub node: String,
    #[serde(flatten)]
    pub form: EvidenceForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "value", rename_all = "lowercase")]
pub enum EvidenceForm {
    /// Observed state name.
    Hard(String),
    /// Likelihood vector over the node's states.
    Virtual(Vec<f64>),
    /// Probability that a binary node is in its first state given the observation.
    Graded(f64),
}

impl Evidence {
    pub fn hard(node: &str, state: &str) -> Self {
        Self {
            node: node.to_string(),
            form: EvidenceForm::Hard(state.to_string()),
        }
    }

    pub fn virtual_likelihood(node: &str, likelihood: Vec<f64>) -> Self {
        Self {
            node: node.to_string(),
            form: EvidenceForm::Virtual(likelihood),
        }
    }

    pub fn graded(node: &str, p_obs: f64) -> Self {
        Self {
            node: node.to_string(),
            form: EvidenceForm::Graded(p_obs),
        }
    }
}

/// Likelihood vector for graded evidence on a binary node: the node's first-state
/// probability moves from `prior` to `p_obs` when nothing else is observed.
pub fn graded_likelihood(node: &str, p_obs: f64, prior: f64) -> Result<[f64; 2], NetError> {
    if !(0.0..=1.0).contains(&p_obs) {
        return Err(NetError::InvalidEvidence {
            node: node.to_string(),
            reason: format!("graded probability {p_obs} outside [0, 1]"),
        });
    }
    if prior <= 0.0 || prior >= 1.0 {
        return Err(NetError::InvalidEvidence {
            node: node.to_string(),
            reason: format!("prior {prior} is degenerate; graded evidence is undefined"),
        });
    }
    Ok([p_obs / prior, (1.0 - p_obs) / (1.0 - prior)])
}

pub(crate) fn check_likelihood(node: &str, likelihood: &[f64], states: usize) -> Result<(), NetError> {
    if likelihood.len() != states {
        return Err(NetError::InvalidEvidence {
            node: node.to_string(),
            reason: format!(
                "likelihood has {} entries, node has {states} states",
                likelihood.len()
            ),
        });
    }
    if likelihood.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(NetError::InvalidEvidence {
            node: node.to_string(),
            reason: "likelihood entries must be finite and nonnegative".into(),
        });
    }
    if likelihood.iter().all(|v| *v == 0.0) {
        return Err(NetError::InvalidEvidence {
            node: node.to_string(),
            reason: "likelihood is all zero".into(),
        });
    }
    Ok(())
}
