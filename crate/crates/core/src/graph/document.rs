//! On-disk song format and its validator.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::descriptor::{BlockRole, ParamValue, ParamValues};
use super::port::PortType;
use super::registry::Registry;
use super::{is_valid_node_id, topo_sort, Edge, Endpoint, SongGraph};
use crate::theory::TimeSignature;

pub const SCHEMA_VERSION: u32 = 1;

/// Name of the per-node seed derivation, recorded in every song file.
pub const SEED_HASH: &str = "fnv1a64-splitmix64";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSigDoc {
    pub numerator: u32,
    pub denominator: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SongDocument {
    pub schema_version: u32,
    #[serde(default)]
    pub title: String,
    pub length_bars: u32,
    pub time_sig: TimeSigDoc,
    pub master_seed: u64,
    #[serde(default = "default_seed_hash")]
    pub seed_hash: String,
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub edges: Vec<EdgeDoc>,
}

fn default_seed_hash() -> String {
    SEED_HASH.into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiagnosticCode {
    InvalidSong,
    UnknownBlockKind,
    InvalidNodeId,
    DuplicateNodeId,
    InvalidParam,
    UnknownEndpoint,
    TypeMismatch,
    PortOccupied,
    Cycle,
    MissingRequiredInput,
    DuplicateSinkChannel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub node: Option<String>,
    /// Index into the document's edge list.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub edge: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub port: Option<String>,
}

impl Diagnostic {
    fn new(code: DiagnosticCode, message: String) -> Self {
        Diagnostic {
            code,
            message,
            node: None,
            edge: None,
            port: None,
        }
    }

    fn node(mut self, id: &str) -> Self {
        self.node = Some(id.into());
        self
    }

    fn edge(mut self, index: usize) -> Self {
        self.edge = Some(index);
        self
    }

    fn port(mut self, port: &str) -> Self {
        self.port = Some(port.into());
        self
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("song has {} problem(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Diagnostic>),
}

/// Checks a document against the registry. Empty iff the document builds
/// into a [`SongGraph`] whose required inputs are all connected.
pub fn validate_graph(doc: &SongDocument, registry: &Registry) -> Vec<Diagnostic> {
    use DiagnosticCode::*;
    let mut out = Vec::new();

    if doc.schema_version != SCHEMA_VERSION {
        out.push(Diagnostic::new(
            InvalidSong,
            format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", doc.schema_version),
        ));
    }
    if doc.seed_hash != SEED_HASH {
        out.push(Diagnostic::new(InvalidSong, format!("seed_hash {:?} is not supported", doc.seed_hash)));
    }
    if doc.length_bars == 0 {
        out.push(Diagnostic::new(InvalidSong, "length_bars must be at least 1".into()));
    }
    if let Err(e) = TimeSignature::new(doc.time_sig.numerator, doc.time_sig.denominator) {
        out.push(Diagnostic::new(InvalidSong, e.to_string()));
    }

    // nodes that resolved to a known kind, by id
    let mut known = BTreeMap::new();
    let mut seen_ids = BTreeSet::new();
    for n in &doc.nodes {
        if !seen_ids.insert(n.id.as_str()) {
            out.push(Diagnostic::new(DuplicateNodeId, format!("node id {:?} is used more than once", n.id)).node(&n.id));
            continue;
        }
        if !is_valid_node_id(&n.id) {
            out.push(
                Diagnostic::new(InvalidNodeId, format!("node id {:?} must use letters, digits, '_' or '-'", n.id))
                    .node(&n.id),
            );
        }
        let Some(block) = registry.get(&n.kind) else {
            out.push(
                Diagnostic::new(
                    UnknownBlockKind,
                    format!("unknown block kind {:?}; known kinds: {}", n.kind, registry.kinds().join(", ")),
                )
                .node(&n.id),
            );
            continue;
        };
        let desc = block.descriptor();
        let mut overrides = ParamValues::new();
        for (name, raw) in &n.params {
            match ParamValue::from_json(raw) {
                Some(v) => {
                    overrides.insert(name.clone(), v);
                }
                None => out.push(
                    Diagnostic::new(InvalidParam, format!("{}.{name}: expected a number or string, got {raw}", n.id))
                        .node(&n.id),
                ),
            }
        }
        match desc.resolve_params(&overrides) {
            Ok(params) => {
                for (param, reason) in block.check_params(&params) {
                    out.push(Diagnostic::new(InvalidParam, format!("{}.{param}: {reason}", n.id)).node(&n.id));
                }
                known.insert(n.id.as_str(), (desc, params));
            }
            Err(errs) => {
                for (param, reason) in errs {
                    out.push(Diagnostic::new(InvalidParam, format!("{}.{param}: {reason}", n.id)).node(&n.id));
                }
                known.insert(n.id.as_str(), (desc, desc.defaults()));
            }
        }
    }

    let mut fed: BTreeMap<Endpoint, usize> = BTreeMap::new();
    let mut dag_edges = Vec::new();
    for (i, e) in doc.edges.iter().enumerate() {
        let resolve = |text: &str, output: bool| -> Result<(Endpoint, PortType), Diagnostic> {
            let ep: Endpoint = text.parse().map_err(|m| Diagnostic::new(UnknownEndpoint, m).edge(i))?;
            let Some((desc, _)) = known.get(ep.node.as_str()) else {
                return Err(Diagnostic::new(UnknownEndpoint, format!("{ep}: no node {:?}", ep.node)).edge(i));
            };
            let spec = if output { desc.output(&ep.port) } else { desc.input(&ep.port) };
            match spec {
                Some(s) => Ok((ep, s.ty)),
                None => Err(Diagnostic::new(
                    UnknownEndpoint,
                    format!(
                        "{ep}: {} has no {} port {:?}",
                        desc.kind,
                        if output { "output" } else { "input" },
                        ep.port
                    ),
                )
                .edge(i)
                .node(&ep.node)
                .port(&ep.port)),
            }
        };
        let from = resolve(&e.from, true);
        let to = resolve(&e.to, false);
        let (from, to) = match (from, to) {
            (Ok(f), Ok(t)) => (f, t),
            (f, t) => {
                out.extend(f.err());
                out.extend(t.err());
                continue;
            }
        };
        // same order as SongGraph::add_edge: type, then occupancy
        if from.1 != to.1 {
            out.push(
                Diagnostic::new(
                    TypeMismatch,
                    format!("{} -> {}: {} output into {} input", from.0, to.0, from.1, to.1),
                )
                .edge(i)
                .node(&to.0.node)
                .port(&to.0.port),
            );
            // still wired, so not also reported as missing
            fed.entry(to.0).or_insert(i);
            continue;
        }
        if let Some(&first) = fed.get(&to.0) {
            out.push(
                Diagnostic::new(PortOccupied, format!("{} is already fed by edge {first}", to.0))
                    .edge(i)
                    .node(&to.0.node)
                    .port(&to.0.port),
            );
            continue;
        }
        fed.insert(to.0.clone(), i);
        dag_edges.push((from.0.node, to.0.node));
    }

    if let Err(stuck) = topo_sort(
        known.keys().copied(),
        dag_edges.iter().map(|(a, b)| (a.as_str(), b.as_str())),
    ) {
        out.push(Diagnostic::new(Cycle, format!("cycle through nodes {}", stuck.join(", "))));
    }

    for (id, (desc, _)) in &known {
        for spec in desc.inputs.iter().filter(|s| s.is_required()) {
            if !fed.contains_key(&Endpoint::new(id, &spec.name)) {
                out.push(
                    Diagnostic::new(
                        MissingRequiredInput,
                        format!("{id}.{}: required {} input is not connected", spec.name, spec.ty),
                    )
                    .node(id)
                    .port(&spec.name),
                );
            }
        }
    }

    let mut channels: BTreeMap<i64, &str> = BTreeMap::new();
    for (id, (desc, params)) in &known {
        if desc.role != BlockRole::Sink {
            continue;
        }
        if let Some(ch) = params.get("channel").and_then(ParamValue::as_i64) {
            if let Some(other) = channels.insert(ch, id) {
                out.push(
                    Diagnostic::new(DuplicateSinkChannel, format!("sinks {other} and {id} both use channel {ch}"))
                        .node(id),
                );
            }
        }
    }
    out
}

impl SongDocument {
    pub fn from_json_str(text: &str) -> Result<Self, LoadError> {
        serde_json::from_str(text).map_err(|e| LoadError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("song documents always serialize") + "\n"
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Validates and builds the graph.
    pub fn into_graph(&self, registry: &Registry) -> Result<SongGraph, Vec<Diagnostic>> {
        let diags = validate_graph(self, registry);
        if !diags.is_empty() {
            return Err(diags);
        }
        let ts = TimeSignature::new(self.time_sig.numerator, self.time_sig.denominator).expect("validated");
        let mut g = SongGraph::new(&self.title, self.length_bars, ts, self.master_seed).expect("validated");
        for n in &self.nodes {
            let params = n.params.iter().filter_map(|(k, v)| Some((k.clone(), ParamValue::from_json(v)?))).collect();
            g.add_node(registry, &n.id, &n.kind, params).expect("validated");
        }
        for e in &self.edges {
            let edge = Edge {
                from: e.from.parse().expect("validated"),
                to: e.to.parse().expect("validated"),
            };
            g.add_edge(edge).expect("validated");
        }
        Ok(g)
    }

    pub fn from_graph(graph: &SongGraph) -> Self {
        SongDocument {
            schema_version: SCHEMA_VERSION,
            title: graph.title.clone(),
            length_bars: graph.length_bars(),
            time_sig: TimeSigDoc {
                numerator: graph.time_sig.numerator(),
                denominator: graph.time_sig.denominator(),
            },
            master_seed: graph.master_seed,
            seed_hash: SEED_HASH.into(),
            nodes: graph
                .nodes()
                .iter()
                .map(|n| NodeDoc {
                    id: n.id.clone(),
                    kind: n.kind().into(),
                    params: n.overrides().into_iter().map(|(k, v)| (k, v.to_json())).collect(),
                })
                .collect(),
            edges: graph
                .edges()
                .iter()
                .map(|e| EdgeDoc {
                    from: e.from.to_string(),
                    to: e.to.to_string(),
                })
                .collect(),
        }
    }
}

impl SongGraph {
    pub fn load(path: &Path, registry: &Registry) -> Result<SongGraph, LoadError> {
        SongDocument::load(path)?.into_graph(registry).map_err(LoadError::Invalid)
    }

    pub fn to_document(&self) -> SongDocument {
        SongDocument::from_graph(self)
    }

    /// Problems with an already built graph; only unconnected required
    /// inputs and sink channel clashes can occur here.
    pub fn diagnostics(&self, registry: &Registry) -> Vec<Diagnostic> {
        validate_graph(&self.to_document(), registry)
    }
}
