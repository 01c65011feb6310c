use std::collections::BTreeMap;

use thiserror::Error;

use super::descriptor::BlockRole;
use super::port::{InputDefault, PortValue};
use super::registry::{BlockError, BlockInputs, EvalContext, Registry};
use super::SongGraph;
use crate::curves::{song_position, CurveSet, EmotionSample};
use crate::generators::tempo_map;
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::theory::{bar_to_tick, NoteSequence, PPQ};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("node {node}: required input {port} is not connected")]
    MissingRequiredInput { node: String, port: String },
    #[error("node {node}: no block registered for kind {kind}")]
    UnknownKind { node: String, kind: String },
    #[error("node {node}: {source}")]
    Block {
        node: String,
        #[source]
        source: BlockError,
    },
    #[error("node {node}: output {port} missing or of the wrong type")]
    Output { node: String, port: String },
    #[error("bar {bar}: {source}")]
    AtBar {
        bar: u32,
        #[source]
        source: Box<EvalError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarInfo {
    pub bar_index: u32,
    pub emotion: EmotionSample<f64>,
    pub bpm: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarOutput {
    pub info: BarInfo,
    /// Every node output; note ticks are song-absolute.
    pub values: BTreeMap<(String, String), PortValue>,
    /// Notes arriving at each sink node, song-absolute.
    pub sinks: BTreeMap<String, NoteSequence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SongOutput {
    pub bars: Vec<BarInfo>,
    pub sinks: BTreeMap<String, NoteSequence>,
}

fn absolute(value: PortValue, offset: u64) -> PortValue {
    match value {
        PortValue::Notes(n) => PortValue::Notes(n.offset(offset)),
        other => other,
    }
}

/// Runs every node once for `bar_index` in topological order.
pub fn evaluate_bar(
    graph: &SongGraph,
    registry: &Registry,
    bar_index: u32,
    emotion: EmotionSample<f64>,
) -> Result<BarOutput, EvalError> {
    let offset = bar_to_tick(bar_index as u64, graph.time_sig, PPQ);
    let mut local: BTreeMap<(String, String), PortValue> = BTreeMap::new();
    let mut sinks = BTreeMap::new();
    let mut bpm = None;

    for id in graph.topo_order() {
        let node = graph.node(&id).expect("topo order lists graph nodes");
        let block = registry.get(node.kind()).ok_or_else(|| EvalError::UnknownKind {
            node: id.clone(),
            kind: node.kind().into(),
        })?;
        let desc = &node.descriptor;

        let mut inputs = BlockInputs::default();
        for spec in &desc.inputs {
            if let Some(edge) = graph.incoming(&id).find(|e| e.to.port == spec.name) {
                let key = (edge.from.node.clone(), edge.from.port.clone());
                let v = local.get(&key).expect("upstream nodes ran first").clone();
                inputs.values.insert(spec.name.clone(), v);
                continue;
            }
            match &spec.default {
                Some(InputDefault::FromParam { param }) => {
                    let x = node.params.get(param).and_then(|v| v.as_f64()).unwrap_or(0.0);
                    inputs.values.insert(spec.name.clone(), PortValue::Param(x));
                }
                Some(InputDefault::Fallback { .. }) => {}
                Some(InputDefault::Required) | None => {
                    return Err(EvalError::MissingRequiredInput {
                        node: id.clone(),
                        port: spec.name.clone(),
                    })
                }
            }
        }

        let ctx = EvalContext {
            bar_index,
            emotion,
            rng_seed: derive_seed(graph.master_seed, &id, bar_index as u64),
            time_sig: graph.time_sig,
            length_bars: graph.length_bars(),
        };
        let mut outputs = block
            .evaluate(&inputs, &node.params, &ctx)
            .map_err(|source| EvalError::Block { node: id.clone(), source })?;

        for spec in &desc.outputs {
            let v = outputs
                .remove(&spec.name)
                .filter(|v| v.port_type() == spec.ty)
                .ok_or_else(|| EvalError::Output {
                    node: id.clone(),
                    port: spec.name.clone(),
                })?;
            local.insert((id.clone(), spec.name.clone()), v);
        }
        if let Some(port) = outputs.into_keys().next() {
            return Err(EvalError::Output { node: id, port });
        }

        match desc.role {
            BlockRole::Tempo if bpm.is_none() => {
                if let Some(x) = local.get(&(id.clone(), "bpm".to_string())).and_then(PortValue::as_param) {
                    bpm = Some(x.round().clamp(1.0, 10_000.0) as u32);
                }
            }
            BlockRole::Sink => {
                let mut merged = NoteSequence::new();
                for v in inputs.values.values() {
                    if let PortValue::Notes(n) = v {
                        merged.extend(n.clone());
                    }
                }
                sinks.insert(id.clone(), merged.offset(offset));
            }
            _ => {}
        }
    }

    let values = local.into_iter().map(|(k, v)| (k, absolute(v, offset))).collect();
    Ok(BarOutput {
        info: BarInfo {
            bar_index,
            emotion,
            bpm: bpm.unwrap_or_else(|| tempo_map(emotion.energy)),
        },
        values,
        sinks,
    })
}

/// Evaluates bars `0..length_bars`, sampling the curves at each bar start,
/// and concatenates the sink outputs.
pub fn evaluate_song<S: Scalar>(graph: &SongGraph, registry: &Registry, curves: &CurveSet<S>) -> Result<SongOutput, EvalError> {
    let bars = graph.length_bars();
    let mut infos = Vec::with_capacity(bars as usize);
    let mut sinks: BTreeMap<String, NoteSequence> = graph.sinks().into_iter().map(|n| (n.id.clone(), NoteSequence::new())).collect();
    for bar in 0..bars {
        let emotion = curves.sample(song_position::<S>(bar, bars)).cast::<f64>();
        let out = evaluate_bar(graph, registry, bar, emotion).map_err(|e| EvalError::AtBar {
            bar,
            source: Box::new(e),
        })?;
        infos.push(out.info);
        for (id, notes) in out.sinks {
            sinks.entry(id).or_default().extend(notes);
        }
    }
    Ok(SongOutput { bars: infos, sinks })
}
