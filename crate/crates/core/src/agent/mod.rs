//! The extraction module: strategy selection, the thought/action/observation
//! tool loop, dispatch into retrieval and memory, and corpus runs.

mod pipeline;
mod strategy;

pub use pipeline::{
    read_trajectories, write_trajectories, Pipeline, PipelineStores, RunOutcome, SentenceContext,
};
pub use strategy::{select_strategy, SelectionContext, StrategyMode, StrategyThresholds};

use serde::{Deserialize, Serialize};

use crate::corpus::Triple;
use crate::gateway::{AgentAction, Tool};

/// How one sentence is extracted. Direct, staged, and CoT are fixed one- or
/// two-call pipelines; react is the open tool loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Direct,
    Staged,
    Cot,
    React,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Direct => "direct",
            StrategyKind::Staged => "staged",
            StrategyKind::Cot => "cot",
            StrategyKind::React => "react",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "direct" => Some(StrategyKind::Direct),
            "staged" => Some(StrategyKind::Staged),
            "cot" => Some(StrategyKind::Cot),
            "react" => Some(StrategyKind::React),
            _ => None,
        }
    }
}

/// One loop round: the model's thought, the parsed action, and the verbatim
/// tool output (or error text) it observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub thought: String,
    pub action: AgentAction,
    pub observation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Finish,
    BudgetExhausted,
    ParseFailure,
}

/// The full record of one extraction episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub sentence_id: u64,
    pub strategy: StrategyKind,
    pub steps: Vec<Step>,
    pub result: Vec<Triple>,
    pub terminated: Termination,
}

/// Which tools the agent may call. Finish is always enabled; calls to
/// disabled tools come back as error observations, never a crash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolRegistry {
    enabled: std::collections::BTreeSet<Tool>,
}

impl ToolRegistry {
    pub fn new(enabled: impl IntoIterator<Item = Tool>) -> Self {
        let mut set: std::collections::BTreeSet<Tool> = enabled.into_iter().collect();
        set.insert(Tool::Finish);
        ToolRegistry { enabled: set }
    }

    pub fn all() -> Self {
        ToolRegistry::new(crate::gateway::TOOLS)
    }

    pub fn is_enabled(&self, tool: Tool) -> bool {
        self.enabled.contains(&tool)
    }

    pub fn enabled_tools(&self) -> impl Iterator<Item = Tool> + '_ {
        self.enabled.iter().copied()
    }
}
