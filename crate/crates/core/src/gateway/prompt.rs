//! Sectioned prompt templates with named slots. Sections whose slot is
//! absent are omitted entirely, header included, so short prompts carry no
//! empty scaffolding.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Value bound to a slot: a single text or an ordered list rendered one item
/// per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotValue {
    Text(String),
    List(Vec<String>),
}

impl SlotValue {
    fn render(&self) -> String {
        match self {
            SlotValue::Text(s) => s.clone(),
            SlotValue::List(items) => items.join("\n"),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            SlotValue::Text(s) => s.is_empty(),
            SlotValue::List(items) => items.is_empty(),
        }
    }
}

pub type Slots = BTreeMap<String, SlotValue>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Section {
    /// Rendered verbatim on its own line.
    Literal(String),
    /// Optional header line followed by the slot content.
    Slot {
        header: Option<String>,
        name: String,
        required: bool,
    },
}

/// An ordered list of sections. The default extraction template puts the
/// task line first, then input, retrieved examples, candidate relation
/// types, relevant information, memory notes, and the output cue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub sections: Vec<Section>,
}

pub const SLOT_INPUT: &str = "input_sentence";
pub const SLOT_EXAMPLES: &str = "examples";
pub const SLOT_CANDIDATES: &str = "relation_candidates";
pub const SLOT_INFO: &str = "relevant_info";
pub const SLOT_MEMORY: &str = "memory";

pub const HEADER_EXAMPLES: &str = "Some relevant examples:";
pub const HEADER_CANDIDATES: &str = "Possible relation types:";
pub const HEADER_INFO: &str = "Relevant information:";
pub const HEADER_MEMORY: &str = "Notes from memory:";

impl PromptTemplate {
    /// The triple-extraction template used by the direct, staged, and CoT
    /// strategies and as the context block of the tool loop.
    pub fn extraction() -> Self {
        PromptTemplate {
            id: "extraction".into(),
            sections: vec![
                Section::Literal("Task: Extract relation triples from the input text.".into()),
                Section::Slot {
                    header: Some("Input:".into()),
                    name: SLOT_INPUT.into(),
                    required: true,
                },
                Section::Slot {
                    header: Some(HEADER_EXAMPLES.into()),
                    name: SLOT_EXAMPLES.into(),
                    required: false,
                },
                Section::Slot {
                    header: Some(HEADER_CANDIDATES.into()),
                    name: SLOT_CANDIDATES.into(),
                    required: false,
                },
                Section::Slot {
                    header: Some(HEADER_INFO.into()),
                    name: SLOT_INFO.into(),
                    required: false,
                },
                Section::Slot {
                    header: Some(HEADER_MEMORY.into()),
                    name: SLOT_MEMORY.into(),
                    required: false,
                },
                Section::Literal("Output:".into()),
            ],
        }
    }

    pub fn render(&self, slots: &Slots) -> Result<String> {
        let mut lines: Vec<String> = Vec::new();
        for section in &self.sections {
            match section {
                Section::Literal(text) => lines.push(text.clone()),
                Section::Slot {
                    header,
                    name,
                    required,
                } => match slots.get(name) {
                    Some(value) if !value.is_empty() => {
                        if let Some(h) = header {
                            lines.push(h.clone());
                        }
                        lines.push(value.render());
                    }
                    Some(_) | None if *required => {
                        return Err(Error::Render(format!(
                            "template '{}' requires slot '{name}'",
                            self.id
                        )))
                    }
                    _ => {} // omitted section, no header
                },
            }
        }
        Ok(lines.join("\n"))
    }
}

/// Render `template` with `slots`; fails when a required slot is missing.
pub fn render_prompt(template: &PromptTemplate, slots: &Slots) -> Result<String> {
    template.render(slots)
}

/// Convenience for building slot maps.
pub fn text_slot(slots: &mut Slots, name: &str, value: impl Into<String>) {
    slots.insert(name.to_string(), SlotValue::Text(value.into()));
}

pub fn list_slot(slots: &mut Slots, name: &str, items: Vec<String>) {
    slots.insert(name.to_string(), SlotValue::List(items));
}
