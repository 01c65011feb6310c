//! Typed dataflow graph of blocks, evaluated once per bar.
//!
//! A [`SongGraph`] is built by adding nodes and connecting ports. Every
//! successful [`SongGraph::connect`] keeps the graph well typed, single
//! writer per input and acyclic, so [`SongGraph::topo_order`] cannot fail.

mod descriptor;
mod document;
mod eval;
mod port;
mod registry;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::theory::TimeSignature;

pub use descriptor::{BlockDescriptor, BlockRole, ParamKind, ParamSpec, ParamValue, ParamValues};
pub use document::{
    validate_graph, Diagnostic, DiagnosticCode, EdgeDoc, LoadError, NodeDoc, SongDocument, TimeSigDoc, SCHEMA_VERSION, SEED_HASH,
};
pub use eval::{evaluate_bar, evaluate_song, BarInfo, BarOutput, EvalError, SongOutput};
pub use port::{InputDefault, PortDirection, PortSpec, PortType, PortValue};
pub use registry::{Block, BlockError, BlockInputs, BlockOutputs, EvalContext, Registry, RegistryError};

/// `node.port`
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Endpoint {
    pub node: String,
    pub port: String,
}

impl Endpoint {
    pub fn new(node: &str, port: &str) -> Self {
        Endpoint {
            node: node.into(),
            port: port.into(),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node, self.port)
    }
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once('.') {
            Some((node, port)) if !node.is_empty() && !port.is_empty() => Ok(Endpoint::new(node, port)),
            _ => Err(format!("{s:?} is not of the form node.port")),
        }
    }
}

impl TryFrom<String> for Endpoint {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Endpoint> for String {
    fn from(e: Endpoint) -> String {
        e.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: Endpoint,
    pub to: Endpoint,
}

impl Edge {
    pub fn new(from: &str, from_port: &str, to: &str, to_port: &str) -> Self {
        Edge {
            from: Endpoint::new(from, from_port),
            to: Endpoint::new(to, to_port),
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeInstance {
    pub id: String,
    pub descriptor: Arc<BlockDescriptor>,
    /// Defaults merged with overrides.
    pub params: ParamValues,
}

impl NodeInstance {
    pub fn kind(&self) -> &str {
        &self.descriptor.kind
    }

    /// Params that differ from the descriptor defaults.
    pub fn overrides(&self) -> ParamValues {
        let defaults = self.descriptor.defaults();
        self.params
            .iter()
            .filter(|(k, v)| defaults.get(*k) != Some(*v))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown block kind {kind:?}; known kinds: {}", known.join(", "))]
    UnknownKind { kind: String, known: Vec<String> },
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("invalid node id {0:?}: use letters, digits, '_' or '-'")]
    InvalidNodeId(String),
    #[error("node {node}: parameter {param}: {reason}")]
    InvalidParam { node: String, param: String, reason: String },
    #[error("unknown endpoint {endpoint}: {reason}")]
    UnknownEndpoint { endpoint: String, reason: String },
    #[error("type mismatch on {edge}: {from_type} output into {to_type} input")]
    TypeMismatch {
        edge: String,
        from_type: PortType,
        to_type: PortType,
    },
    #[error("input {port} is already fed by {existing}")]
    PortOccupied { port: String, existing: String },
    #[error("edge {edge} would create a cycle")]
    Cycle { edge: String },
    #[error("song length must be at least one bar")]
    EmptySong,
}

pub fn is_valid_node_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

#[derive(Debug, Clone, PartialEq)]
pub struct SongGraph {
    pub title: String,
    length_bars: u32,
    pub time_sig: TimeSignature,
    pub master_seed: u64,
    nodes: Vec<NodeInstance>,
    edges: Vec<Edge>,
}

impl SongGraph {
    pub fn new(title: &str, length_bars: u32, time_sig: TimeSignature, master_seed: u64) -> Result<Self, GraphError> {
        if length_bars == 0 {
            return Err(GraphError::EmptySong);
        }
        Ok(SongGraph {
            title: title.into(),
            length_bars,
            time_sig,
            master_seed,
            nodes: Vec::new(),
            edges: Vec::new(),
        })
    }

    pub fn length_bars(&self) -> u32 {
        self.length_bars
    }

    pub fn set_length_bars(&mut self, bars: u32) -> Result<(), GraphError> {
        if bars == 0 {
            return Err(GraphError::EmptySong);
        }
        self.length_bars = bars;
        Ok(())
    }

    pub fn nodes(&self) -> &[NodeInstance] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&NodeInstance> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Adds a node of a registered kind; `params` override the defaults.
    pub fn add_node(&mut self, registry: &Registry, id: &str, kind: &str, params: ParamValues) -> Result<(), GraphError> {
        let block = registry.get(kind).ok_or_else(|| GraphError::UnknownKind {
            kind: kind.into(),
            known: registry.kinds().into_iter().map(String::from).collect(),
        })?;
        self.add_instance(id, Arc::new(block.descriptor().clone()), params)
    }

    pub fn add_instance(&mut self, id: &str, descriptor: Arc<BlockDescriptor>, params: ParamValues) -> Result<(), GraphError> {
        if !is_valid_node_id(id) {
            return Err(GraphError::InvalidNodeId(id.into()));
        }
        if self.node(id).is_some() {
            return Err(GraphError::DuplicateNode(id.into()));
        }
        let params = descriptor.resolve_params(&params).map_err(|errs| {
            let (param, reason) = errs.into_iter().next().expect("non-empty error list");
            GraphError::InvalidParam {
                node: id.into(),
                param,
                reason,
            }
        })?;
        self.nodes.push(NodeInstance {
            id: id.into(),
            descriptor,
            params,
        });
        Ok(())
    }

    /// Returns a copy of the graph with `edge` added.
    pub fn connect(&self, edge: Edge) -> Result<SongGraph, GraphError> {
        let mut next = self.clone();
        next.add_edge(edge)?;
        Ok(next)
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        let from_type = self.port_type(&edge.from, PortDirection::Output)?;
        let to_type = self.port_type(&edge.to, PortDirection::Input)?;
        if from_type != to_type {
            return Err(GraphError::TypeMismatch {
                edge: edge.to_string(),
                from_type,
                to_type,
            });
        }
        if let Some(existing) = self.edges.iter().find(|e| e.to == edge.to) {
            return Err(GraphError::PortOccupied {
                port: edge.to.to_string(),
                existing: existing.from.to_string(),
            });
        }
        if self.reaches(&edge.to.node, &edge.from.node) {
            return Err(GraphError::Cycle { edge: edge.to_string() });
        }
        self.edges.push(edge);
        Ok(())
    }

    fn port_type(&self, ep: &Endpoint, dir: PortDirection) -> Result<PortType, GraphError> {
        let unknown = |reason: String| GraphError::UnknownEndpoint {
            endpoint: ep.to_string(),
            reason,
        };
        let node = self.node(&ep.node).ok_or_else(|| unknown(format!("no node {:?}", ep.node)))?;
        let port = match dir {
            PortDirection::Input => node.descriptor.input(&ep.port),
            PortDirection::Output => node.descriptor.output(&ep.port),
        };
        port.map(|p| p.ty).ok_or_else(|| {
            let dir = if dir == PortDirection::Input { "input" } else { "output" };
            unknown(format!("{} has no {dir} port {:?}", node.kind(), ep.port))
        })
    }

    /// Whether `target` is reachable from `start` along existing edges.
    fn reaches(&self, start: &str, target: &str) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            if n == target {
                return true;
            }
            if seen.insert(n) {
                stack.extend(self.edges.iter().filter(|e| e.from.node == n).map(|e| e.to.node.as_str()));
            }
        }
        false
    }

    /// Kahn's algorithm, always taking the lexicographically smallest ready
    /// node, so the order is unique.
    pub fn topo_order(&self) -> Vec<String> {
        topo_sort(self.nodes.iter().map(|n| n.id.as_str()), self.edges.iter().map(|e| (e.from.node.as_str(), e.to.node.as_str())))
            .expect("graphs are acyclic by construction")
    }

    pub fn incoming(&self, node: &str) -> impl Iterator<Item = &Edge> + '_ {
        let node = node.to_string();
        self.edges.iter().filter(move |e| e.to.node == node)
    }

    /// Sink nodes in topo order.
    pub fn sinks(&self) -> Vec<&NodeInstance> {
        self.topo_order()
            .into_iter()
            .filter_map(|id| self.node(&id))
            .filter(|n| n.descriptor.role == BlockRole::Sink)
            .collect()
    }
}

/// Lexicographically tie-broken topological sort. Returns the nodes left
/// over on a cycle as the error.
pub fn topo_sort<'a>(
    nodes: impl IntoIterator<Item = &'a str>,
    edges: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<Vec<String>, Vec<String>> {
    let mut indegree: BTreeMap<&str, usize> = nodes.into_iter().map(|n| (n, 0)).collect();
    let mut out_edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (from, to) in edges {
        *indegree.entry(to).or_default() += 1;
        indegree.entry(from).or_default();
        out_edges.entry(from).or_default().push(to);
    }
    let mut ready: BTreeSet<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut order = Vec::with_capacity(indegree.len());
    while let Some(n) = ready.pop_first() {
        order.push(n.to_string());
        for &m in out_edges.get(n).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indegree.get_mut(m).expect("edge targets are indexed");
            *d -= 1;
            if *d == 0 {
                ready.insert(m);
            }
        }
    }
    if order.len() == indegree.len() {
        Ok(order)
    } else {
        let done: BTreeSet<&str> = order.iter().map(String::as_str).collect();
        Err(indegree.keys().filter(|n| !done.contains(*n)).map(|n| n.to_string()).collect())
    }
}
