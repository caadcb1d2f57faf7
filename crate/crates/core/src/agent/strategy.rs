//! Strategy selection: a fixed kind, a rule cascade over cheap sentence
//! features, or an LLM choice with rule fallback.

use super::StrategyKind;
use crate::gateway::{CompletionRequest, Gateway};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyMode {
    Rule,
    Llm,
    Fixed(StrategyKind),
}

impl StrategyMode {
    pub fn parse(s: &str) -> Option<StrategyMode> {
        match s {
            "rule" => Some(StrategyMode::Rule),
            "llm" => Some(StrategyMode::Llm),
            other => StrategyKind::from_name(other).map(StrategyMode::Fixed),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StrategyThresholds {
    /// Sentence length bound (tokens or characters per tokenizer policy)
    /// under which few-candidate sentences go direct.
    pub short_len: usize,
    /// Recognized mentions required before the tool loop is worth it.
    pub min_mentions: usize,
}

impl Default for StrategyThresholds {
    fn default() -> Self {
        StrategyThresholds {
            short_len: 30,
            min_mentions: 2,
        }
    }
}

/// Cheap per-sentence features the rule cascade looks at.
#[derive(Debug, Clone, Copy)]
pub struct SelectionContext {
    pub candidate_count: usize,
    pub sentence_len: usize,
    pub mention_count: usize,
    /// True when some enabled tool beyond Finish has nonempty backing data.
    pub tools_with_data: bool,
}

fn rule_cascade(ctx: &SelectionContext, thresholds: StrategyThresholds) -> StrategyKind {
    if ctx.candidate_count <= 2 && ctx.sentence_len <= thresholds.short_len {
        StrategyKind::Direct
    } else if ctx.candidate_count > 2 {
        StrategyKind::Staged
    } else if ctx.tools_with_data && ctx.mention_count >= thresholds.min_mentions {
        StrategyKind::React
    } else {
        StrategyKind::Cot
    }
}

/// Pick a strategy for one sentence. An LLM answer outside the four names
/// falls back to the rule cascade.
pub fn select_strategy(
    sentence: &str,
    ctx: &SelectionContext,
    mode: StrategyMode,
    thresholds: StrategyThresholds,
    gateway: Option<&Gateway>,
) -> StrategyKind {
    match mode {
        StrategyMode::Fixed(kind) => kind,
        StrategyMode::Rule => rule_cascade(ctx, thresholds),
        StrategyMode::Llm => {
            let gateway = match gateway {
                Some(g) => g,
                None => return rule_cascade(ctx, thresholds),
            };
            let prompt = format!(
                "Choose the extraction strategy for the sentence. Answer with exactly one of: direct, staged, cot, react.\nSentence: {sentence}\nAnswer:"
            );
            match gateway.complete(&CompletionRequest::new(prompt, "strategy.llm")) {
                Ok(answer) => {
                    let answer = answer.trim().to_lowercase();
                    StrategyKind::from_name(answer.as_str())
                        .unwrap_or_else(|| rule_cascade(ctx, thresholds))
                }
                Err(_) => rule_cascade(ctx, thresholds),
            }
        }
    }
}
