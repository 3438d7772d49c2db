use std::collections::{HashMap, HashSet};
use std::fmt;

use super::{EvidentialLink, Network, PropositionNode, VariableNode, PROB_TOLERANCE};

/// Largest allowed gap between a consequent's prior and the prior implied by one of
/// its links, `lambda1 * P(E) + lambda2 * (1 - P(E))`.
pub const LINK_CONSISTENCY_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub node: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(node) => write!(f, "node `{node}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Diagnostics for one network. `violations` make a network invalid; `notes` do not.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn flag(&mut self, node: Option<&str>, message: impl Into<String>) {
        self.violations.push(Violation {
            node: node.map(str::to_string),
            message: message.into(),
        });
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.to_string().contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(Violation::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Re-validates a constructed network. Always free of violations; may carry notes.
pub fn validate(network: &Network) -> ValidationReport {
    match network {
        Network::Variable(net) => validate_variables(net.nodes()),
        Network::Proposition(net) => validate_propositions(net.nodes(), net.links(), net.top()),
    }
}

fn check_distribution(report: &mut ValidationReport, node: &str, what: &str, row: &[f64]) {
    if row.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
        report.flag(Some(node), format!("{what} has entries outside [0, 1]"));
        return;
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > PROB_TOLERANCE {
        report.flag(Some(node), format!("{what} row sum {sum} ≠ 1"));
    }
}

pub fn validate_variables(nodes: &[VariableNode]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, node) in nodes.iter().enumerate() {
        if node.id.is_empty() {
            report.flag(None, format!("nodes[{i}] has an empty id"));
        }
        if index.insert(node.id.as_str(), i).is_some() {
            report.flag(Some(&node.id), "duplicate node id");
        }
    }

    let mut resolved = true;
    for node in nodes {
        let id = node.id.as_str();
        if node.states.len() < 2 {
            report.flag(Some(id), "needs at least 2 states");
        }
        let distinct: HashSet<&String> = node.states.iter().collect();
        if distinct.len() != node.states.len() {
            report.flag(Some(id), "duplicate state names");
        }
        if node.states.iter().any(String::is_empty) {
            report.flag(Some(id), "empty state name");
        }
        if !(node.cost.is_finite() && node.cost > 0.0) {
            report.flag(Some(id), format!("cost {} must be positive", node.cost));
        }

        let mut rows_expected = Some(1usize);
        let mut seen = HashSet::new();
        for parent in &node.parents {
            if parent == &node.id {
                report.flag(Some(id), "self-loop");
                resolved = false;
                rows_expected = None;
            } else if !seen.insert(parent) {
                report.flag(Some(id), format!("parent `{parent}` listed twice"));
                resolved = false;
                rows_expected = None;
            } else if let Some(&p) = index.get(parent.as_str()) {
                rows_expected = rows_expected.map(|r| r * nodes[p].states.len());
            } else {
                report.flag(Some(id), format!("unknown parent `{parent}`"));
                resolved = false;
                rows_expected = None;
            }
        }

        if let Some(rows) = rows_expected {
            if node.table.len() != rows {
                let what = if node.is_root() { "prior" } else { "cpt" };
                report.flag(
                    Some(id),
                    format!("{what} has {} rows, expected {rows}", node.table.len()),
                );
            }
        }
        for (r, row) in node.table.iter().enumerate() {
            let what = if node.is_root() {
                "prior".to_string()
            } else {
                format!("cpt row {r}")
            };
            if row.len() != node.states.len() {
                report.flag(
                    Some(id),
                    format!("{what} has {} entries for {} states", row.len(), node.states.len()),
                );
                continue;
            }
            check_distribution(&mut report, id, &what, row);
        }
    }

    if resolved && report.is_valid() {
        let edges: Vec<(usize, usize)> = nodes
            .iter()
            .enumerate()
            .flat_map(|(c, n)| {
                let index = &index;
                n.parents.iter().map(move |p| (index[p.as_str()], c))
            })
            .collect();
        check_graph_shape(&mut report, nodes.len(), &edges, |i| &nodes[i].id, true);
    }
    report
}

pub fn validate_propositions(
    nodes: &[PropositionNode],
    links: &[EvidentialLink],
    top: &[String],
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, node) in nodes.iter().enumerate() {
        if node.id.is_empty() {
            report.flag(None, format!("nodes[{i}] has an empty id"));
        }
        if index.insert(node.id.as_str(), i).is_some() {
            report.flag(Some(&node.id), "duplicate node id");
        }
        if !(node.prior > 0.0 && node.prior < 1.0) {
            report.flag(
                Some(&node.id),
                format!("prior {} must lie strictly inside (0, 1)", node.prior),
            );
        } else if node.prior <= 2.0 * crate::prospector::EPSILON
            || node.prior >= 1.0 - 2.0 * crate::prospector::EPSILON
        {
            report
                .notes
                .push(format!("node `{}`: prior sits at the clamp bound", node.id));
        }
        if !(node.cost.is_finite() && node.cost > 0.0) {
            report.flag(Some(&node.id), format!("cost {} must be positive", node.cost));
        }
    }

    let mut edges = Vec::new();
    let mut pairs = HashSet::new();
    for link in links {
        let name = format!("link {} -> {}", link.antecedent, link.consequent);
        let from = index.get(link.antecedent.as_str()).copied();
        let to = index.get(link.consequent.as_str()).copied();
        if from.is_none() {
            report.flag(None, format!("{name}: unknown antecedent"));
        }
        if to.is_none() {
            report.flag(None, format!("{name}: unknown consequent"));
        }
        if link.antecedent == link.consequent {
            report.flag(None, format!("{name}: antecedent equals consequent"));
            continue;
        }
        for (label, v) in [("lambda1", link.lambda1), ("lambda2", link.lambda2)] {
            if !(0.0..=1.0).contains(&v) {
                report.flag(None, format!("{name}: {label} {v} outside [0, 1]"));
            }
        }
        if !pairs.insert((&link.antecedent, &link.consequent)) {
            report.flag(None, format!("{name}: duplicate link"));
        }
        if let (Some(f), Some(t)) = (from, to) {
            edges.push((f, t));
            let p_e = nodes[f].prior;
            let implied = link.lambda1 * p_e + link.lambda2 * (1.0 - p_e);
            let gap = (implied - nodes[t].prior).abs();
            if gap > LINK_CONSISTENCY_TOLERANCE {
                report.flag(
                    None,
                    format!(
                        "{name}: inconsistent with priors (implied {implied}, stored {})",
                        nodes[t].prior
                    ),
                );
            }
        }
    }
    for id in top {
        if !index.contains_key(id.as_str()) {
            report.flag(None, format!("unknown top-level proposition `{id}`"));
        }
    }
    if report.is_valid() {
        check_graph_shape(&mut report, nodes.len(), &edges, |i| &nodes[i].id, false);
    }
    report
}

/// Directed acyclicity always; with `singly_connected`, also no undirected cycles.
fn check_graph_shape<'a>(
    report: &mut ValidationReport,
    len: usize,
    edges: &[(usize, usize)],
    name: impl Fn(usize) -> &'a String,
    singly_connected: bool,
) {
    let mut indegree = vec![0usize; len];
    let mut children = vec![Vec::new(); len];
    for &(p, c) in edges {
        indegree[c] += 1;
        children[p].push(c);
    }
    let mut stack: Vec<usize> = (0..len).filter(|&i| indegree[i] == 0).collect();
    let mut visited = 0;
    while let Some(n) = stack.pop() {
        visited += 1;
        for &c in &children[n] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                stack.push(c);
            }
        }
    }
    if visited != len {
        let stuck: Vec<&str> = (0..len)
            .filter(|&i| indegree[i] > 0)
            .map(|i| name(i).as_str())
            .collect();
        report.flag(None, format!("directed cycle through {}", stuck.join(", ")));
        return;
    }
    if !singly_connected {
        return;
    }
    let mut root: Vec<usize> = (0..len).collect();
    fn find(root: &mut [usize], mut x: usize) -> usize {
        while root[x] != x {
            root[x] = root[root[x]];
            x = root[x];
        }
        x
    }
    for &(p, c) in edges {
        let (a, b) = (find(&mut root, p), find(&mut root, c));
        if a == b {
            report.flag(
                Some(name(c)),
                format!(
                    "undirected cycle: not singly connected (link {} -> {})",
                    name(p),
                    name(c)
                ),
            );
            return;
        }
        root[a] = b;
    }
}
