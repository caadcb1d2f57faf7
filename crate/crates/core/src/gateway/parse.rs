//! Strict parsers for model output: triple lists and agent actions.
//!
//! Two triple forms are accepted: a JSON array of `{"h","r","t"}` objects
//! (the canonical serialization) and line-oriented `(head, relation, tail)`
//! tuples as models tend to write them.

use serde::{Deserialize, Serialize};

use crate::corpus::{Schema, Triple};
use crate::error::{Error, Result};

/// A non-fatal problem found while parsing model output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseIssue {
    pub kind: ParseIssueKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseIssueKind {
    EmptyOutput,
    MalformedLine,
    EmptyField,
    UnknownRelation,
}

/// Strict drops triples whose relation is outside the schema; lenient keeps
/// them but still records the issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

/// Parse a triple list from model output. Always returns; problems are
/// reported as issues rather than errors. Schema checking is skipped when
/// the schema is empty.
pub fn parse_triples(text: &str, schema: &Schema, mode: ParseMode) -> (Vec<Triple>, Vec<ParseIssue>) {
    let mut triples = Vec::new();
    let mut issues = Vec::new();
    let trimmed = text.trim();

    if trimmed.is_empty() {
        issues.push(ParseIssue {
            kind: ParseIssueKind::EmptyOutput,
            detail: "empty output".into(),
        });
        return (triples, issues);
    }

    if let Ok(parsed) = serde_json::from_str::<Vec<Triple>>(trimmed) {
        for t in parsed {
            admit(t, schema, mode, &mut triples, &mut issues);
        }
        return (triples, issues);
    }

    for line in trimmed.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Ok(parsed) = serde_json::from_str::<Vec<Triple>>(line) {
            for t in parsed {
                admit(t, schema, mode, &mut triples, &mut issues);
            }
            continue;
        }
        if line.starts_with('(') && line.ends_with(')') {
            match parse_tuple_line(line) {
                Some(t) => admit(t, schema, mode, &mut triples, &mut issues),
                None => issues.push(ParseIssue {
                    kind: ParseIssueKind::MalformedLine,
                    detail: line.to_string(),
                }),
            }
        }
        // Prose lines are ignored; models often wrap the list in text.
    }

    if triples.is_empty() && issues.is_empty() {
        issues.push(ParseIssue {
            kind: ParseIssueKind::EmptyOutput,
            detail: "no triples found in output".into(),
        });
    }
    (triples, issues)
}

/// `(h, r, t)`; extra commas are assigned to the tail, since relation names
/// never contain commas.
fn parse_tuple_line(line: &str) -> Option<Triple> {
    let inner = &line[1..line.len() - 1];
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() < 3 {
        return None;
    }
    Some(Triple::new(
        parts[0],
        parts[1],
        parts[2..].join(", "),
    ))
}

fn admit(
    triple: Triple,
    schema: &Schema,
    mode: ParseMode,
    triples: &mut Vec<Triple>,
    issues: &mut Vec<ParseIssue>,
) {
    let trimmed = Triple::new(
        triple.head.trim(),
        triple.relation.trim(),
        triple.tail.trim(),
    );
    if trimmed.has_empty_field() {
        issues.push(ParseIssue {
            kind: ParseIssueKind::EmptyField,
            detail: trimmed.to_string(),
        });
        return;
    }
    if !schema.is_empty() && !schema.contains(&trimmed.relation) {
        issues.push(ParseIssue {
            kind: ParseIssueKind::UnknownRelation,
            detail: trimmed.relation.clone(),
        });
        if matches!(mode, ParseMode::Strict) {
            return;
        }
    }
    triples.push(trimmed);
}

/// Canonical serialization: a JSON array of `{"h","r","t"}` objects.
/// `parse_triples` inverts this exactly.
pub fn format_triples(triples: &[Triple]) -> String {
    serde_json::to_string(triples).expect("triples always serialize")
}

/// The five tools of the extraction loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tool {
    SearchSamples,
    SearchAnnotation,
    #[serde(rename = "SearchKG")]
    SearchKg,
    SearchMemory,
    Finish,
}

pub const TOOLS: [Tool; 5] = [
    Tool::SearchSamples,
    Tool::SearchAnnotation,
    Tool::SearchKg,
    Tool::SearchMemory,
    Tool::Finish,
];

impl Tool {
    pub fn name(self) -> &'static str {
        match self {
            Tool::SearchSamples => "SearchSamples",
            Tool::SearchAnnotation => "SearchAnnotation",
            Tool::SearchKg => "SearchKG",
            Tool::SearchMemory => "SearchMemory",
            Tool::Finish => "Finish",
        }
    }

    /// Case-sensitive lookup against the registry.
    pub fn from_name(name: &str) -> Option<Tool> {
        TOOLS.iter().copied().find(|t| t.name() == name)
    }
}

impl std::fmt::Display for Tool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A parsed `Action: Tool[argument]` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentAction {
    pub tool: Tool,
    pub argument: String,
}

impl AgentAction {
    pub fn new(tool: Tool, argument: impl Into<String>) -> Self {
        AgentAction {
            tool,
            argument: argument.into(),
        }
    }
}

/// Grammar: `Thought: ...\nAction: <Tool>[<argument>]`. The argument runs
/// from the bracket on the action line to the last closing bracket in the
/// text, so arguments may span lines and contain brackets.
pub fn parse_action(text: &str) -> Result<AgentAction> {
    let action_offset = text
        .split_inclusive('\n')
        .scan(0usize, |offset, line| {
            let start = *offset;
            *offset += line.len();
            Some((start, line))
        })
        .find(|(_, line)| line.trim_start().starts_with("Action:"))
        .map(|(start, _)| start)
        .ok_or_else(|| Error::ActionParse("missing Action line".into()))?;

    let rest = &text[action_offset..];
    let after_keyword = rest.trim_start().trim_start_matches("Action:").trim_start();
    let bracket = after_keyword
        .find('[')
        .ok_or_else(|| Error::ActionParse(format!("missing '[' in line: {}", first_line(rest))))?;
    let tool_name = after_keyword[..bracket].trim();
    let tool = Tool::from_name(tool_name).ok_or_else(|| {
        Error::ActionParse(format!("unknown tool '{tool_name}' in line: {}", first_line(rest)))
    })?;
    let after_bracket = &after_keyword[bracket + 1..];
    let close = after_bracket
        .rfind(']')
        .ok_or_else(|| Error::ActionParse(format!("missing ']' in line: {}", first_line(rest))))?;
    Ok(AgentAction::new(tool, &after_bracket[..close]))
}

/// The content of the first `Thought:` line, or everything before the Action
/// line when the model skipped the keyword.
pub fn parse_thought(text: &str) -> String {
    for line in text.lines() {
        let trimmed = line.trim_start();
        if let Some(thought) = trimmed.strip_prefix("Thought:") {
            return thought.trim().to_string();
        }
        if trimmed.starts_with("Action:") {
            break;
        }
    }
    match text.find("Action:") {
        Some(pos) => text[..pos].trim().to_string(),
        None => text.trim().to_string(),
    }
}

/// Inverse of [`parse_action`] (with the thought attached).
pub fn format_action(thought: &str, action: &AgentAction) -> String {
    format!(
        "Thought: {thought}\nAction: {}[{}]",
        action.tool.name(),
        action.argument
    )
}

fn first_line(text: &str) -> &str {
    text.lines().next().unwrap_or("")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RelationType;
    use proptest::prelude::*;

    fn schema() -> Schema {
        Schema::new(
            "test",
            vec![
                RelationType::inferred("award"),
                RelationType::inferred("place_of_birth"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn parses_single_tuple_line() {
        let (triples, issues) = parse_triples(
            "(Kazuo Ishiguro, award, Nobel Prize in Literature)",
            &schema(),
            ParseMode::Strict,
        );
        assert_eq!(
            triples,
            vec![Triple::new("Kazuo Ishiguro", "award", "Nobel Prize in Literature")]
        );
        assert!(issues.is_empty());
    }

    #[test]
    fn empty_output_yields_issue() {
        let (triples, issues) = parse_triples("", &schema(), ParseMode::Strict);
        assert!(triples.is_empty());
        assert_eq!(issues[0].kind, ParseIssueKind::EmptyOutput);
    }

    #[test]
    fn json_array_form_is_accepted() {
        let (triples, _) = parse_triples(
            r#"[{"h":"Mo Yan","r":"award","t":"Nobel Prize"}]"#,
            &schema(),
            ParseMode::Strict,
        );
        assert_eq!(triples, vec![Triple::new("Mo Yan", "award", "Nobel Prize")]);
    }

    #[test]
    fn strict_drops_unknown_relation_and_records_issue() {
        let (triples, issues) = parse_triples("(a, mystery, b)", &schema(), ParseMode::Strict);
        assert!(triples.is_empty());
        assert_eq!(issues[0].kind, ParseIssueKind::UnknownRelation);

        let (kept, issues) = parse_triples("(a, mystery, b)", &schema(), ParseMode::Lenient);
        assert_eq!(kept.len(), 1);
        assert_eq!(issues[0].kind, ParseIssueKind::UnknownRelation);
    }

    #[test]
    fn tuple_with_extra_commas_folds_into_tail() {
        let (triples, _) = parse_triples(
            "(A, award, Nobel Prize, 2012)",
            &Schema::empty("x"),
            ParseMode::Strict,
        );
        assert_eq!(triples, vec![Triple::new("A", "award", "Nobel Prize, 2012")]);
    }

    #[test]
    fn trailing_json_block_after_prose_is_found() {
        let text = "Reasoning first.\n[{\"h\":\"a\",\"r\":\"award\",\"t\":\"b\"}]";
        let (triples, _) = parse_triples(text, &schema(), ParseMode::Strict);
        assert_eq!(triples, vec![Triple::new("a", "award", "b")]);
    }

    #[test]
    fn action_grammar_fixture() {
        let action = parse_action("Thought: need guidelines\nAction: SearchAnnotation[award]").unwrap();
        assert_eq!(action, AgentAction::new(Tool::SearchAnnotation, "award"));
    }

    #[test]
    fn finish_argument_parses_to_triples() {
        let action = parse_action("Action: Finish[(Mo Yan, award, Nobel Prize)]").unwrap();
        assert_eq!(action.tool, Tool::Finish);
        let (triples, _) = parse_triples(&action.argument, &schema(), ParseMode::Strict);
        assert_eq!(triples.len(), 1);
    }

    #[test]
    fn unknown_tool_is_an_error_carrying_the_line() {
        let err = parse_action("Action: Browse[x]");
        match err {
            Err(Error::ActionParse(msg)) => assert!(msg.contains("Browse")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_action_line_is_an_error() {
        assert!(parse_action("Thought: only thinking").is_err());
    }

    #[test]
    fn thought_is_extracted_from_its_line() {
        assert_eq!(parse_thought("Thought: abc\nAction: Finish[[]]"), "abc");
        assert_eq!(parse_thought("just text\nAction: Finish[[]]"), "just text");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn triple_list_round_trips_through_canonical_form(
            list in proptest::collection::vec((".{1,12}", "[a-z_]{1,10}", ".{1,12}"), 0..8)
        ) {
            let triples: Vec<Triple> = list
                .iter()
                .map(|(h, r, t)| Triple::new(h.trim(), r.clone(), t.trim()))
                .filter(|t| !t.has_empty_field())
                .collect();
            let serialized = format_triples(&triples);
            let (parsed, _) = parse_triples(&serialized, &Schema::empty("x"), ParseMode::Lenient);
            prop_assert_eq!(parsed, triples);
        }

        #[test]
        fn action_format_parse_identity(tool_idx in 0usize..5, arg in "[ -~]{0,60}", thought in "[ -~]{0,40}") {
            let tool = TOOLS[tool_idx];
            let action = AgentAction::new(tool, arg);
            let text = format_action(&thought, &action);
            let parsed = parse_action(&text).unwrap();
            prop_assert_eq!(parsed, action);
        }
    }
}
