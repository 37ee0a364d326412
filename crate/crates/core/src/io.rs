//! JSON file formats: instances, assignments/solutions and cost vectors.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_instance, Assignment, Instance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEdge {
    pub id: String,
    pub worker: String,
    pub firm: String,
    pub capacity: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum RawChoice {
    #[serde(rename = "linear")]
    Linear { order: Vec<String>, quota: i64 },
    #[serde(rename = "tableau")]
    Tableau {
        columns: Vec<String>,
        quota: i64,
        filling: Vec<Vec<u64>>,
    },
    #[serde(rename = "tableau-a3")]
    TableauA3 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        columns: Option<Vec<String>>,
        quota: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInstance {
    pub workers: Vec<String>,
    pub firms: Vec<String>,
    pub edges: Vec<RawEdge>,
    pub worker_quotas: BTreeMap<String, i64>,
    pub worker_orders: BTreeMap<String, Vec<String>>,
    pub firm_cfs: BTreeMap<String, RawChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let raw: RawInstance = serde_json::from_str(text)?;
    Ok(validate_instance(raw)?)
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&inst.to_raw()).expect("instance serializes")
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSolution {
    Wrapped {
        assignment: HashMap<String, i64>,
        #[allow(dead_code)]
        #[serde(default)]
        stable: Option<bool>,
    },
    Plain(HashMap<String, i64>),
}

/// Accepts a solution file `{"assignment": {...}, "stable": bool}` or a bare
/// edge → value object. Missing edges default to 0.
pub fn parse_assignment(inst: &Instance, text: &str) -> Result<Assignment> {
    let raw: RawSolution = serde_json::from_str(text)?;
    let map = match raw {
        RawSolution::Wrapped { assignment, .. } => assignment,
        RawSolution::Plain(map) => map,
    };
    inst.assignment_from_map(&map)
}

pub fn solution_json(inst: &Instance, x: &Assignment, stable: bool) -> serde_json::Value {
    serde_json::json!({
        "assignment": inst.assignment_json(x),
        "stable": stable,
    })
}

/// Read an edge → number object; numbers keep their exact decimal text.
pub fn parse_costs(inst: &Instance, text: &str) -> Result<crate::cost::CostVector> {
    let raw: HashMap<String, serde_json::Value> = serde_json::from_str(text)?;
    let mut costs = vec![crate::cost::Decimal::ZERO; inst.num_edges()];
    for (id, value) in raw {
        let e = inst.edge_by_id(&id)?;
        let text = match &value {
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::String(s) => s.clone(),
            other => return Err(Error::BadCost(format!("edge `{id}`: {other} is not a number"))),
        };
        costs[e] = text
            .parse()
            .map_err(|err| Error::BadCost(format!("edge `{id}`: {err}")))?;
    }
    Ok(crate::cost::CostVector(costs))
}
