use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::descriptor::{BlockDescriptor, ParamValues};
use super::port::PortValue;
use crate::curves::EmotionSample;
use crate::generators::{ChordProgression, GeneratorError, RhythmPattern};
use crate::theory::{NoteSequence, TimeSignature};

/// Everything a block sees about the bar it is evaluated for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalContext {
    pub bar_index: u32,
    pub emotion: EmotionSample<f64>,
    /// `derive_seed(master_seed, node_id, bar_index)`
    pub rng_seed: u64,
    pub time_sig: TimeSignature,
    pub length_bars: u32,
}

impl EvalContext {
    pub fn is_last_bar(&self) -> bool {
        self.bar_index + 1 >= self.length_bars
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlockError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("input {0} is missing")]
    MissingInput(String),
    #[error("input {port} carries the wrong type")]
    InputType { port: String },
    #[error("parameter {param}: {reason}")]
    Param { param: String, reason: String },
}

/// Resolved input values of one node, keyed by port name. Absent keys are
/// unconnected ports with a block-side fallback.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockInputs {
    pub values: BTreeMap<String, PortValue>,
}

impl BlockInputs {
    pub fn get(&self, port: &str) -> Option<&PortValue> {
        self.values.get(port)
    }

    pub fn chords(&self, port: &str) -> Result<Option<&ChordProgression>, BlockError> {
        self.typed(port, PortValue::as_chords)
    }

    pub fn notes(&self, port: &str) -> Result<Option<&NoteSequence>, BlockError> {
        self.typed(port, PortValue::as_notes)
    }

    pub fn rhythm(&self, port: &str) -> Result<Option<&RhythmPattern>, BlockError> {
        self.typed(port, PortValue::as_rhythm)
    }

    pub fn param(&self, port: &str) -> Result<Option<f64>, BlockError> {
        self.typed(port, |v| v.as_param())
    }

    pub fn require_chords(&self, port: &str) -> Result<&ChordProgression, BlockError> {
        self.chords(port)?.ok_or_else(|| BlockError::MissingInput(port.into()))
    }

    pub fn require_notes(&self, port: &str) -> Result<&NoteSequence, BlockError> {
        self.notes(port)?.ok_or_else(|| BlockError::MissingInput(port.into()))
    }

    pub fn require_param(&self, port: &str) -> Result<f64, BlockError> {
        self.param(port)?.ok_or_else(|| BlockError::MissingInput(port.into()))
    }

    fn typed<'a, T>(
        &'a self,
        port: &str,
        f: impl FnOnce(&'a PortValue) -> Option<T>,
    ) -> Result<Option<T>, BlockError> {
        match self.values.get(port) {
            None => Ok(None),
            Some(v) => f(v).map(Some).ok_or_else(|| BlockError::InputType { port: port.into() }),
        }
    }
}

pub type BlockOutputs = BTreeMap<String, PortValue>;

/// A block implementation. `evaluate` must be a pure function of its
/// arguments; all randomness comes from `ctx.rng_seed`.
pub trait Block: Send + Sync {
    fn descriptor(&self) -> &BlockDescriptor;

    fn evaluate(&self, inputs: &BlockInputs, params: &ParamValues, ctx: &EvalContext) -> Result<BlockOutputs, BlockError>;

    /// Extra parameter checks beyond type and range, run at validation.
    fn check_params(&self, _params: &ParamValues) -> Vec<(String, String)> {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("block kind {0} is already registered")]
    Duplicate(String),
    #[error("malformed descriptor: {0}")]
    Descriptor(String),
}

#[derive(Clone, Default)]
pub struct Registry {
    blocks: BTreeMap<String, Arc<dyn Block>>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.blocks.keys()).finish()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, block: Arc<dyn Block>) -> Result<(), RegistryError> {
        let desc = block.descriptor();
        desc.self_check().map_err(RegistryError::Descriptor)?;
        if self.blocks.contains_key(&desc.kind) {
            return Err(RegistryError::Duplicate(desc.kind.clone()));
        }
        self.blocks.insert(desc.kind.clone(), block);
        Ok(())
    }

    pub fn get(&self, kind: &str) -> Option<&Arc<dyn Block>> {
        self.blocks.get(kind)
    }

    pub fn descriptor(&self, kind: &str) -> Option<&BlockDescriptor> {
        self.blocks.get(kind).map(|b| b.descriptor())
    }

    /// Registered kinds in sorted order.
    pub fn kinds(&self) -> Vec<&str> {
        self.blocks.keys().map(String::as_str).collect()
    }

    pub fn descriptors(&self) -> Vec<&BlockDescriptor> {
        self.blocks.values().map(|b| b.descriptor()).collect()
    }
}
