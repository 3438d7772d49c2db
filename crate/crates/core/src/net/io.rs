//! JSON document format for both network kinds.

use serde::{Deserialize, Serialize};

use super::{
    EvidentialLink, NetError, PropositionNetwork, PropositionNode, VariableNetwork, VariableNode,
    DEFAULT_COST,
};

/// A validated network of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    Variable(VariableNetwork),
    Proposition(PropositionNetwork),
}

impl Network {
    pub fn as_variable(&self) -> Option<&VariableNetwork> {
        match self {
            Network::Variable(n) => Some(n),
            Network::Proposition(_) => None,
        }
    }

    pub fn as_proposition(&self) -> Option<&PropositionNetwork> {
        match self {
            Network::Proposition(n) => Some(n),
            Network::Variable(_) => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Document {
    Variable {
        nodes: Vec<VariableDoc>,
    },
    Proposition {
        nodes: Vec<PropositionDoc>,
        links: Vec<LinkDoc>,
        #[serde(default)]
        top: Vec<String>,
    },
}

#[derive(Serialize, Deserialize)]
struct VariableDoc {
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    states: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prior: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parents: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cpt: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct PropositionDoc {
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    prior: Option<f64>,
    #[serde(default)]
    askable: bool,
    #[serde(default = "default_cost")]
    cost: f64,
}

#[derive(Serialize, Deserialize)]
struct LinkDoc {
    from: String,
    to: String,
    lambda1: f64,
    lambda2: f64,
}

fn default_cost() -> f64 {
    DEFAULT_COST
}

fn schema(location: String, message: impl Into<String>) -> NetError {
    NetError::Schema {
        location,
        message: message.into(),
    }
}

fn node_location(i: usize, id: &Option<String>) -> String {
    match id {
        Some(id) => format!("nodes[{i}] (id `{id}`)"),
        None => format!("nodes[{i}]"),
    }
}

impl VariableDoc {
    fn into_node(self, i: usize) -> Result<VariableNode, NetError> {
        let loc = node_location(i, &self.id);
        let id = self.id.ok_or_else(|| schema(loc.clone(), "missing field `id`"))?;
        let states = self
            .states
            .ok_or_else(|| schema(loc.clone(), "missing field `states`"))?;
        let parents = self.parents.unwrap_or_default();
        let table = match (parents.is_empty(), self.prior, self.cpt) {
            (true, Some(prior), None) => vec![prior],
            (false, None, Some(cpt)) => cpt,
            (true, None, _) => return Err(schema(loc, "root node missing field `prior`")),
            (false, _, None) => return Err(schema(loc, "node with parents missing field `cpt`")),
            (true, Some(_), Some(_)) => {
                return Err(schema(loc, "root node must not carry `cpt`"))
            }
            (false, Some(_), Some(_)) => {
                return Err(schema(loc, "node with parents must not carry `prior`"))
            }
        };
        Ok(VariableNode {
            label: self.label.unwrap_or_else(|| id.clone()),
            id,
            states,
            parents,
            table,
            cost: self.cost.unwrap_or(DEFAULT_COST),
        })
    }

    fn from_node(node: &VariableNode) -> Self {
        let root = node.is_root();
        Self {
            id: Some(node.id.clone()),
            label: Some(node.label.clone()),
            states: Some(node.states.clone()),
            prior: root.then(|| node.table[0].clone()),
            parents: (!root).then(|| node.parents.clone()),
            cpt: (!root).then(|| node.table.clone()),
            cost: (node.cost != DEFAULT_COST).then_some(node.cost),
        }
    }
}

/// Parses and validates a network document.
pub fn load_network(text: &str) -> Result<Network, NetError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| NetError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    match doc {
        Document::Variable { nodes } => {
            let nodes = nodes
                .into_iter()
                .enumerate()
                .map(|(i, d)| d.into_node(i))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Network::Variable(VariableNetwork::new(nodes)?))
        }
        Document::Proposition { nodes, links, top } => {
            let nodes = nodes
                .into_iter()
                .enumerate()
                .map(|(i, d)| {
                    let loc = node_location(i, &d.id);
                    let id = d.id.ok_or_else(|| schema(loc.clone(), "missing field `id`"))?;
                    let prior = d.prior.ok_or_else(|| schema(loc, "missing field `prior`"))?;
                    Ok(PropositionNode {
                        label: d.label.unwrap_or_else(|| id.clone()),
                        id,
                        prior,
                        askable: d.askable,
                        cost: d.cost,
                    })
                })
                .collect::<Result<Vec<_>, NetError>>()?;
            let links = links
                .into_iter()
                .map(|l| EvidentialLink {
                    antecedent: l.from,
                    consequent: l.to,
                    lambda1: l.lambda1,
                    lambda2: l.lambda2,
                })
                .collect();
            Ok(Network::Proposition(PropositionNetwork::new(nodes, links, top)?))
        }
    }
}

/// Pretty-printed JSON with a trailing newline. Floats use shortest round-trip form.
pub fn save_network(network: &Network) -> String {
    let doc = match network {
        Network::Variable(net) => Document::Variable {
            nodes: net.nodes().iter().map(VariableDoc::from_node).collect(),
        },
        Network::Proposition(net) => Document::Proposition {
            nodes: net
                .nodes()
                .iter()
                .map(|n| PropositionDoc {
                    id: Some(n.id.clone()),
                    label: Some(n.label.clone()),
                    prior: Some(n.prior),
                    askable: n.askable,
                    cost: n.cost,
                })
                .collect(),
            links: net
                .links()
                .iter()
                .map(|l| LinkDoc {
                    from: l.antecedent.clone(),
                    to: l.consequent.clone(),
                    lambda1: l.lambda1,
                    lambda2: l.lambda2,
                })
                .collect(),
            top: net.top().to_vec(),
        },
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("network documents always serialize");
    text.push('\n');
    text
}
