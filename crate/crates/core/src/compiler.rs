//! Compiles weighted feature descriptions into both network forms.
//!
//! A [`FeatureModel`] lists classes with ship counts and, per structural
//! component, the component type each class carries and a 0..=10 detection
//! weight for every (type, attribute) pair. Weight `w` means the attribute is
//! detected with probability `w / 10`. Class priors come from the counts;
//! attributes are independent given the class.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{
    EvidentialLink, NetError, PropositionNetwork, PropositionNode, VariableNetwork, VariableNode,
    DEFAULT_COST,
};
use crate::prospector::clamp;

/// Id of the class variable in compiled variable networks.
pub const CLASS_NODE: &str = "class";

/// States of every observation node, in order.
pub const OBSERVATION_STATES: [&str; 2] = ["detected", "not-detected"];

pub const MAX_WEIGHT: u32 = 10;

/// Extra zero-probability state given to a class or type variable that would
/// otherwise have a single state.
pub const PADDING_STATE: &str = "unused";

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("model parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub id: String,
    pub count: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    pub types: Vec<String>,
    /// Class id to component type.
    pub membership: BTreeMap<String, String>,
    pub attributes: Vec<String>,
    /// Component type to attribute to weight.
    pub weights: BTreeMap<String, BTreeMap<String, u32>>,
    /// Optional per-attribute question cost; 1.0 when absent.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub costs: BTreeMap<String, f64>,
}

impl ComponentSpec {
    fn weight(&self, ty: &str, attribute: &str) -> f64 {
        f64::from(self.weights[ty][attribute]) / f64::from(MAX_WEIGHT)
    }

    fn cost(&self, attribute: &str) -> f64 {
        self.costs.get(attribute).copied().unwrap_or(DEFAULT_COST)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub classes: Vec<ClassSpec>,
    pub components: Vec<ComponentSpec>,
}

/// One askable attribute observation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Observation {
    pub id: String,
    pub label: String,
    pub component: String,
    pub attribute: String,
    pub cost: f64,
}

pub fn observation_id(component: &str, attribute: &str) -> String {
    format!("{component}-appears-{attribute}")
}

pub fn fit_id(component: &str, class: &str) -> String {
    format!("{component}-fits-{class}")
}

impl FeatureModel {
    pub fn from_json(text: &str) -> Result<Self, CompileError> {
        let model: FeatureModel = serde_json::from_str(text).map_err(|e| CompileError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        model.check()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("models always serialize");
        text.push('\n');
        text
    }

    /// Every violated invariant, or `Ok` when there are none.
    pub fn check(&self) -> Result<(), CompileError> {
        let mut problems = Vec::new();
        if self.classes.is_empty() {
            problems.push("class list is empty".to_string());
        }
        let mut class_ids = HashSet::new();
        for c in &self.classes {
            if c.id.is_empty() {
                problems.push("class with empty id".to_string());
            }
            if !class_ids.insert(c.id.as_str()) {
                problems.push(format!("duplicate class `{}`", c.id));
            }
            if c.count < 1 {
                problems.push(format!("class `{}` has count 0; counts must be >= 1", c.id));
            }
        }
        let mut names = HashSet::new();
        for comp in &self.components {
            let name = &comp.name;
            if !names.insert(name.as_str()) {
                problems.push(format!("duplicate component `{name}`"));
            }
            let types: HashSet<&str> = comp.types.iter().map(String::as_str).collect();
            if types.len() != comp.types.len() {
                problems.push(format!("component `{name}`: duplicate types"));
            }
            if comp.types.is_empty() {
                problems.push(format!("component `{name}`: no types"));
            }
            for c in &self.classes {
                match comp.membership.get(&c.id) {
                    None => problems.push(format!(
                        "component `{name}`: class `{}` has no type",
                        c.id
                    )),
                    Some(t) if !types.contains(t.as_str()) => problems.push(format!(
                        "component `{name}`: class `{}` maps to unknown type `{t}`",
                        c.id
                    )),
                    Some(_) => {}
                }
            }
            for class in comp.membership.keys() {
                if !class_ids.contains(class.as_str()) {
                    problems.push(format!("component `{name}`: membership names unknown class `{class}`"));
                }
            }
            let attrs: HashSet<&str> = comp.attributes.iter().map(String::as_str).collect();
            if attrs.len() != comp.attributes.len() {
                problems.push(format!("component `{name}`: duplicate attributes"));
            }
            for t in &comp.types {
                let Some(row) = comp.weights.get(t) else {
                    problems.push(format!("component `{name}`: type `{t}` has no weights"));
                    continue;
                };
                for a in &comp.attributes {
                    match row.get(a) {
                        None => problems.push(format!(
                            "component `{name}`: missing weight for ({t}, {a})"
                        )),
                        Some(&w) if w > MAX_WEIGHT => problems.push(format!(
                            "component `{name}`: weight {w} for ({t}, {a}) is outside 0..=10"
                        )),
                        Some(_) => {}
                    }
                }
                for a in row.keys() {
                    if !attrs.contains(a.as_str()) {
                        problems.push(format!("component `{name}`: weight for unknown attribute `{a}`"));
                    }
                }
            }
            for t in comp.weights.keys() {
                if !types.contains(t.as_str()) {
                    problems.push(format!("component `{name}`: weights for unknown type `{t}`"));
                }
            }
            for (a, &cost) in &comp.costs {
                if !attrs.contains(a.as_str()) {
                    problems.push(format!("component `{name}`: cost for unknown attribute `{a}`"));
                }
                if !(cost.is_finite() && cost > 0.0) {
                    problems.push(format!("component `{name}`: cost {cost} for `{a}` must be positive"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CompileError::InvalidModel(problems))
        }
    }

    pub fn class_ids(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.id.clone()).collect()
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.components
            .iter()
            .flat_map(|comp| {
                comp.attributes.iter().map(move |a| Observation {
                    id: observation_id(&comp.name, a),
                    label: format!("{} appears {}", comp.name, a),
                    component: comp.name.clone(),
                    attribute: a.clone(),
                    cost: comp.cost(a),
                })
            })
            .collect()
    }
}

/// `P(class) = count / total count`, in class order.
pub fn class_priors(model: &FeatureModel) -> Result<Vec<f64>, CompileError> {
    if model.classes.is_empty() {
        return Err(CompileError::InvalidModel(vec!["class list is empty".into()]));
    }
    let total: f64 = model.classes.iter().map(|c| f64::from(c.count)).sum();
    Ok(model
        .classes
        .iter()
        .map(|c| f64::from(c.count) / total)
        .collect())
}

/// Tree: class root, one type variable per component (deterministic in the
/// class), one detected/not-detected variable per attribute under its component.
pub fn compile_bms(model: &FeatureModel) -> Result<VariableNetwork, CompileError> {
    model.check()?;
    let mut priors = class_priors(model)?;
    let mut class_states: Vec<&str> = model.classes.iter().map(|c| c.id.as_str()).collect();
    if class_states.len() == 1 {
        class_states.push(PADDING_STATE);
        priors.push(0.0);
    }
    let mut nodes = vec![VariableNode::root(CLASS_NODE, "Naval class", &class_states, priors)];
    for comp in &model.components {
        let mut types: Vec<&str> = comp.types.iter().map(String::as_str).collect();
        let padded = types.len() == 1;
        if padded {
            types.push(PADDING_STATE);
        }
        let indicator = |ty: &str| -> Vec<f64> {
            types.iter().map(|&t| if t == ty { 1.0 } else { 0.0 }).collect()
        };
        let mut cpt: Vec<Vec<f64>> = model
            .classes
            .iter()
            .map(|c| indicator(&comp.membership[&c.id]))
            .collect();
        if model.classes.len() == 1 {
            cpt.push(indicator(PADDING_STATE));
        }
        nodes.push(VariableNode::child(
            &comp.name,
            &format!("{} type", comp.name),
            &types,
            &[CLASS_NODE],
            cpt,
        ));
        for obs in model.observations().iter().filter(|o| o.component == comp.name) {
            let mut cpt: Vec<Vec<f64>> = comp
                .types
                .iter()
                .map(|t| {
                    let p = comp.weight(t, &obs.attribute);
                    vec![p, 1.0 - p]
                })
                .collect();
            if padded {
                cpt.push(vec![0.0, 1.0]);
            }
            nodes.push(
                VariableNode::child(&obs.id, &obs.label, &OBSERVATION_STATES, &[&comp.name], cpt)
                    .with_cost(obs.cost),
            );
        }
    }
    Ok(VariableNetwork::new(nodes)?)
}

/// Proposition hierarchy: per class a top-level proposition; per (class,
/// component) a proposition that the component's evidence fits the class; per
/// attribute a shared askable observation. Links run observation -> fit and
/// fit -> class. Observation links carry `P(class | seen)` and
/// `P(class | not seen)` counted exactly from the model's joint; the fit
/// carries the class's prior and passes its belief straight up.
pub fn compile_prospector(model: &FeatureModel) -> Result<PropositionNetwork, CompileError> {
    model.check()?;
    let priors = class_priors(model)?;
    let class_prior: BTreeMap<&str, f64> = model
        .classes
        .iter()
        .zip(&priors)
        .map(|(c, &p)| (c.id.as_str(), p))
        .collect();

    let mut nodes: Vec<PropositionNode> = model
        .classes
        .iter()
        .map(|c| PropositionNode::new(&c.id, &c.id, clamp(class_prior[c.id.as_str()])))
        .collect();
    let mut links = Vec::new();

    for comp in &model.components {
        let type_prior: BTreeMap<&str, f64> = comp
            .types
            .iter()
            .map(|t| {
                let p = model
                    .classes
                    .iter()
                    .filter(|c| &comp.membership[&c.id] == t)
                    .map(|c| class_prior[c.id.as_str()])
                    .sum();
                (t.as_str(), p)
            })
            .collect();
        let detection: BTreeMap<&str, f64> = comp
            .attributes
            .iter()
            .map(|a| {
                let p = comp.types.iter().map(|t| type_prior[t.as_str()] * comp.weight(t, a)).sum();
                (a.as_str(), p)
            })
            .collect();

        for c in &model.classes {
            let ty = comp.membership[&c.id].as_str();
            let p_class = class_prior[c.id.as_str()];
            let fit = fit_id(&comp.name, &c.id);
            nodes.push(PropositionNode::new(
                &fit,
                &format!("{} fits {}", comp.name, c.id),
                clamp(p_class),
            ));
            for a in &comp.attributes {
                let p_e = detection[a.as_str()];
                let w = comp.weight(ty, a);
                let (lambda1, lambda2) = if p_e <= 0.0 || p_e >= 1.0 {
                    // never or always detected across the fleet: carries no information
                    (p_class, p_class)
                } else {
                    (p_class * w / p_e, p_class * (1.0 - w) / (1.0 - p_e))
                };
                links.push(EvidentialLink::new(
                    &observation_id(&comp.name, a),
                    &fit,
                    clamp(lambda1),
                    clamp(lambda2),
                ));
            }
            links.push(EvidentialLink::new(&fit, &c.id, clamp(1.0), clamp(0.0)));
        }
        for obs in model.observations().iter().filter(|o| o.component == comp.name) {
            nodes.push(
                PropositionNode::new(&obs.id, &obs.label, clamp(detection[obs.attribute.as_str()]))
                    .askable()
                    .with_cost(obs.cost),
            );
        }
    }
    Ok(PropositionNetwork::new(nodes, links, model.class_ids())?)
}
