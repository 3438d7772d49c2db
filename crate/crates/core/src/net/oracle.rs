//! Exact inference by enumerating the full joint. Exists to check the engines.

use std::collections::BTreeMap;

use super::{check_likelihood, graded_likelihood, Evidence, EvidenceForm, NetError, VariableNetwork};

pub const MAX_JOINT_CONFIGURATIONS: u128 = 1 << 24;

/// Posterior distribution per node id.
pub type Marginals = BTreeMap<String, Vec<f64>>;

/// `P(node | evidence)` for every node, by summing the joint over every state combination.
pub fn exact_posterior(network: &VariableNetwork, evidence: &[Evidence]) -> Result<Marginals, NetError> {
    let configurations: u128 = (0..network.len())
        .map(|i| network.cardinality(i) as u128)
        .product();
    if configurations > MAX_JOINT_CONFIGURATIONS {
        return Err(NetError::TooLarge(configurations));
    }

    let needs_prior = evidence
        .iter()
        .any(|e| matches!(e.form, EvidenceForm::Graded(_)));
    let prior = if needs_prior {
        Some(enumerate(network, &ones(network))?)
    } else {
        None
    };

    let mut likelihood = ones(network);
    for e in evidence {
        let n = network.require(&e.node)?;
        let node = network.node(n);
        let factor = match &e.form {
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
                    });
                }
                let prior = prior.as_ref().expect("computed above")[n][0];
                graded_likelihood(&node.id, *p, prior)?.to_vec()
            }
        };
        for (l, f) in likelihood[n].iter_mut().zip(factor) {
            *l *= f;
        }
    }

    let marginals = enumerate(network, &likelihood)?;
    Ok(network
        .nodes()
        .iter()
        .zip(marginals)
        .map(|(node, m)| (node.id.clone(), m))
        .collect())
}

fn ones(network: &VariableNetwork) -> Vec<Vec<f64>> {
    (0..network.len())
        .map(|i| vec![1.0; network.cardinality(i)])
        .collect()
}

struct Walk<'a> {
    network: &'a VariableNetwork,
    likelihood: &'a [Vec<f64>],
    order: &'a [usize],
    assignment: Vec<usize>,
    parent_states: Vec<usize>,
    mass: Vec<Vec<f64>>,
}

impl Walk<'_> {
    fn visit(&mut self, depth: usize, weight: f64) {
        if depth == self.order.len() {
            for (n, &s) in self.assignment.iter().enumerate() {
                self.mass[n][s] += weight;
            }
            return;
        }
        let n = self.order[depth];
        self.parent_states.clear();
        for &p in self.network.parents_of(n) {
            self.parent_states.push(self.assignment[p]);
        }
        let row = self.network.row_index(n, &self.parent_states);
        let table = &self.network.node(n).table[row];
        for s in 0..table.len() {
            let w = weight * table[s] * self.likelihood[n][s];
            if w == 0.0 {
                continue;
            }
            self.assignment[n] = s;
            self.visit(depth + 1, w);
        }
    }
}

fn enumerate(network: &VariableNetwork, likelihood: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NetError> {
    let mut walk = Walk {
        network,
        likelihood,
        order: network.topological_order(),
        assignment: vec![0; network.len()],
        parent_states: Vec::new(),
        mass: ones(network)
            .into_iter()
            .map(|v| vec![0.0; v.len()])
            .collect(),
    };
    walk.visit(0, 1.0);
    let mut mass = walk.mass;
    let total: f64 = mass.first().map(|m| m.iter().sum()).unwrap_or(1.0);
    if !(total > 0.0) {
        return Err(NetError::InconsistentEvidence);
    }
    for m in &mut mass {
        for v in m.iter_mut() {
            *v /= total;
        }
    }
    Ok(mass)
}
