use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{EvidentialLink, PropositionNetwork, PropositionNode, VariableNetwork, VariableNode};

/// Shape of a generated polytree.
#[derive(Clone, Debug)]
pub struct PolytreeConfig {
    pub nodes: usize,
    pub max_states: usize,
    /// Probability that a tree edge points from the later node to the earlier one,
    /// which produces multi-parent nodes.
    pub flip_probability: f64,
    /// A flip is skipped when the earlier node already has this many parents.
    pub max_parents: usize,
}

impl PolytreeConfig {
    pub fn tree(nodes: usize, max_states: usize) -> Self {
        Self {
            nodes,
            max_states,
            flip_probability: 0.0,
            max_parents: 1,
        }
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tree: each node after the first hangs off a uniformly chosen earlier
/// node. Deterministic in `seed`.
pub fn random_polytree(nodes: usize, max_states: usize, seed: u64) -> VariableNetwork {
    random_polytree_with(&PolytreeConfig::tree(nodes, max_states), &mut seeded_rng(seed))
}

/// Dirichlet(1) sample: normalized unit exponentials.
fn random_distribution(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    loop {
        let row: Vec<f64> = (0..len).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            return row.into_iter().map(|v| v / sum).collect();
        }
    }
}

pub fn random_polytree_with(config: &PolytreeConfig, rng: &mut impl Rng) -> VariableNetwork {
    assert!(config.nodes >= 1, "need at least one node");
    assert!(config.max_states >= 2, "need at least two states");
    let cards: Vec<usize> = (0..config.nodes)
        .map(|_| rng.gen_range(2..=config.max_states))
        .collect();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); config.nodes];
    for i in 1..config.nodes {
        let j = rng.gen_range(0..i);
        let flip = rng.gen::<f64>() < config.flip_probability;
        if flip && parents[j].len() < config.max_parents {
            parents[j].push(i);
        } else {
            parents[i].push(j);
        }
    }
    let id = |i: usize| format!("n{i:02}");
    let nodes = (0..config.nodes)
        .map(|i| {
            let rows: usize = parents[i].iter().map(|&p| cards[p]).product();
            VariableNode {
                id: id(i),
                label: format!("N{i}"),
                states: (0..cards[i]).map(|s| format!("s{s}")).collect(),
                parents: parents[i].iter().map(|&p| id(p)).collect(),
                table: (0..rows).map(|_| random_distribution(rng, cards[i])).collect(),
                cost: crate::net::DEFAULT_COST,
            }
        })
        .collect();
    VariableNetwork::new(nodes).expect("generated polytrees are valid")
}

/// One binary class proposition `c` with conditionally independent binary
/// features `f0, f1, ...`; `features[i] = (P(fi | c), P(fi | not c))`.
/// Returns the proposition network and its variable-network twin.
pub fn naive_bayes_pair(prior: f64, features: &[(f64, f64)]) -> (PropositionNetwork, VariableNetwork) {
    let mut props = vec![PropositionNode::new("c", "Class", prior)];
    let mut links = Vec::new();
    let mut vars = vec![VariableNode::root("c", "Class", &["true", "false"], vec![prior, 1.0 - prior])];
    for (i, &(given_c, given_not_c)) in features.iter().enumerate() {
        let id = format!("f{i}");
        let p_f = prior * given_c + (1.0 - prior) * given_not_c;
        props.push(PropositionNode::new(&id, &id, p_f).askable());
        links.push(EvidentialLink::new(
            &id,
            "c",
            prior * given_c / p_f,
            prior * (1.0 - given_c) / (1.0 - p_f),
        ));
        vars.push(VariableNode::child(
            &id,
            &id,
            &["true", "false"],
            &["c"],
            vec![vec![given_c, 1.0 - given_c], vec![given_not_c, 1.0 - given_not_c]],
        ));
    }
    (
        PropositionNetwork::new(props, links, vec!["c".into()]).expect("consistent by construction"),
        VariableNetwork::new(vars).expect("valid by construction"),
    )
}

/// [`naive_bayes_pair`] with 1 to 6 features and parameters drawn from `[0.05, 0.95]`.
pub fn random_naive_bayes(seed: u64) -> (PropositionNetwork, VariableNetwork) {
    let mut rng = seeded_rng(seed);
    let prior = rng.gen_range(0.05..0.95);
    let count = rng.gen_range(1..=6);
    let features: Vec<(f64, f64)> = (0..count)
        .map(|_| (rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)))
        .collect();
    naive_bayes_pair(prior, &features)
}
