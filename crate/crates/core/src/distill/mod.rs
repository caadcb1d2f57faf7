//! Trajectory distillation: summarize fully-correct episodes into succinct
//! rationales and export SFT-ready JSONL datasets — the plain corpus and the
//! rationale-enriched one.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{StrategyKind, Termination, Trajectory};
use crate::corpus::{score, NormalizationPolicy, Sample, Schema, Triple};
use crate::error::{Error, Result};
use crate::gateway::{
    format_triples, parse_triples, render_prompt, text_slot, CompletionRequest, Gateway, ParseMode,
    PromptTemplate, Slots, SLOT_INPUT,
};

/// One rationale-enriched training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillRecord {
    pub sentence: String,
    pub rationale: String,
    pub gold: Vec<Triple>,
    pub strategy_tag: StrategyKind,
    pub source_trajectory_id: u64,
}

/// Why a trajectory was not distilled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReason {
    pub trajectory_id: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistillReport {
    pub total_trajectories: usize,
    pub admitted: usize,
    /// Strategy mix over all input trajectories.
    pub input_per_strategy: BTreeMap<String, usize>,
    /// Strategy mix over admitted records.
    pub admitted_per_strategy: BTreeMap<String, usize>,
    pub skips: Vec<SkipReason>,
}

/// Summarize one episode into a rationale. Requires a finished trajectory
/// whose result matches gold exactly (micro-F1 = 1.0). The rationale must
/// name every gold relation; one regeneration is attempted before giving up.
pub fn summarize_rationale(
    trajectory: &Trajectory,
    sentence: &str,
    gold: &[Triple],
    gateway: &Gateway,
    policy: NormalizationPolicy,
    validate: bool,
) -> Result<String> {
    if trajectory.terminated != Termination::Finish {
        return Err(Error::Export(format!(
            "trajectory {} did not finish",
            trajectory.sentence_id
        )));
    }
    let m = score(&trajectory.result, gold, policy);
    if m.f1 != 1.0 {
        return Err(Error::Export(format!(
            "trajectory {} result does not match gold (f1 = {:.3})",
            trajectory.sentence_id, m.f1
        )));
    }

    let serialized_steps: Vec<String> = trajectory
        .steps
        .iter()
        .map(|s| {
            format!(
                "Thought: {}\nAction: {}[{}]\nObservation: {}",
                s.thought,
                s.action.tool.name(),
                s.action.argument,
                s.observation
            )
        })
        .collect();
    let base_prompt = format!(
        "Summarize the reasoning that led to this extraction as one succinct rationale. Name every relation used.\nSentence: {sentence}\nSteps:\n{}\nTriples: {}\nRationale:",
        serialized_steps.join("\n"),
        format_triples(gold)
    );

    let mut prompt = base_prompt.clone();
    for attempt in 0..2 {
        let rationale = gateway
            .complete(&CompletionRequest::new(prompt.clone(), "distill.rationale"))?
            .trim()
            .to_string();
        if rationale.is_empty() {
            return Err(Error::Export("empty rationale".into()));
        }
        if !validate || mentions_all_relations(&rationale, gold) {
            return Ok(rationale);
        }
        if attempt == 0 {
            prompt = format!("{base_prompt}\n(The rationale must mention every relation name.)");
        }
    }
    Err(Error::Export("rationale failed validation twice: missing gold relation names".into()))
}

fn mentions_all_relations(rationale: &str, gold: &[Triple]) -> bool {
    gold.iter().all(|t| rationale.contains(&t.relation))
}

/// Build the plain dataset D (every sample) and the enriched dataset D'
/// (qualifying trajectories only), plus a reconciliation report.
pub fn build_sft_datasets(
    trajectories: &[Trajectory],
    samples: &[Sample],
    gateway: &Gateway,
    policy: NormalizationPolicy,
    validate: bool,
) -> (Vec<SftRecord>, Vec<DistillRecord>, DistillReport) {
    let by_id: BTreeMap<u64, &Sample> = samples.iter().map(|s| (s.id, s)).collect();

    let plain: Vec<SftRecord> = samples
        .iter()
        .map(|s| SftRecord {
            id: s.id,
            sentence: s.text.clone(),
            gold: s.gold.clone(),
            rationale: None,
            strategy_tag: None,
        })
        .collect();

    let mut report = DistillReport {
        total_trajectories: trajectories.len(),
        ..DistillReport::default()
    };
    let mut enriched = Vec::new();

    for trajectory in trajectories {
        *report
            .input_per_strategy
            .entry(trajectory.strategy.name().to_string())
            .or_insert(0) += 1;

        let sample = match by_id.get(&trajectory.sentence_id) {
            Some(s) => s,
            None => {
                report.skips.push(SkipReason {
                    trajectory_id: trajectory.sentence_id,
                    reason: "no sample with this id".into(),
                });
                continue;
            }
        };
        if sample.gold.is_empty() {
            report.skips.push(SkipReason {
                trajectory_id: trajectory.sentence_id,
                reason: "sample has no gold triples".into(),
            });
            continue;
        }
        match summarize_rationale(trajectory, &sample.text, &sample.gold, gateway, policy, validate) {
            Ok(rationale) => {
                *report
                    .admitted_per_strategy
                    .entry(trajectory.strategy.name().to_string())
                    .or_insert(0) += 1;
                report.admitted += 1;
                enriched.push(DistillRecord {
                    sentence: sample.text.clone(),
                    rationale,
                    gold: sample.gold.clone(),
                    strategy_tag: trajectory.strategy,
                    source_trajectory_id: trajectory.sentence_id,
                });
            }
            Err(e) => report.skips.push(SkipReason {
                trajectory_id: trajectory.sentence_id,
                reason: e.to_string(),
            }),
        }
    }

    (plain, enriched, report)
}

/// A unified exportable record; `rationale` is set for enriched records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub id: u64,
    pub sentence: String,
    pub gold: Vec<Triple>,
    pub rationale: Option<String>,
    pub strategy_tag: Option<StrategyKind>,
}

impl From<&DistillRecord> for SftRecord {
    fn from(r: &DistillRecord) -> Self {
        SftRecord {
            id: r.source_trajectory_id,
            sentence: r.sentence.clone(),
            gold: r.gold.clone(),
            rationale: Some(r.rationale.clone()),
            strategy_tag: Some(r.strategy_tag),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SftTemplate {
    /// Output is the triple block alone.
    Plain,
    /// Output is the rationale followed by the triple block.
    Rationale,
}

#[derive(Serialize, Deserialize)]
struct SftLine {
    id: u64,
    instruction: String,
    output: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    strategy_tag: Option<StrategyKind>,
}

/// Export records as SFT JSONL. Every output line is re-parsed before the
/// file is accepted: the triple block must reproduce gold exactly, otherwise
/// the export aborts naming the record.
pub fn export_sft(
    records: &[SftRecord],
    path: &Path,
    template: SftTemplate,
    policy: NormalizationPolicy,
) -> Result<()> {
    let mut lines = Vec::with_capacity(records.len());
    for record in records {
        let mut slots = Slots::new();
        text_slot(&mut slots, SLOT_INPUT, &record.sentence);
        let instruction = render_prompt(&PromptTemplate::extraction(), &slots)?;
        let triple_block = format_triples(&record.gold);
        let output = match template {
            SftTemplate::Plain => triple_block,
            SftTemplate::Rationale => match &record.rationale {
                Some(rationale) => format!("{rationale}\n{triple_block}"),
                None => {
                    return Err(Error::Export(format!(
                        "record {} has no rationale for the rationale template",
                        record.id
                    )))
                }
            },
        };

        // Round-trip gate: the exported output must parse back to gold.
        let (parsed, _issues) = parse_triples(&output, &Schema::empty("export"), ParseMode::Lenient);
        let expect = score(&parsed, &record.gold, policy);
        let round_trip_exact = expect.fp == 0 && expect.fn_ == 0 && parsed.len() == record.gold.len();
        if !round_trip_exact {
            return Err(Error::Export(format!(
                "record {}: exported output does not re-parse to gold",
                record.id
            )));
        }

        lines.push(SftLine {
            id: record.id,
            instruction,
            output,
            strategy_tag: record.strategy_tag,
        });
    }

    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    for line in &lines {
        let json = serde_json::to_string(line).map_err(|e| Error::Export(e.to_string()))?;
        writeln!(file, "{json}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// Read an exported SFT file back into (id, output) pairs; used by tests and
/// downstream consumers to verify round trips.
pub fn read_sft_outputs(path: &Path) -> Result<Vec<(u64, String)>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SftLine = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            path: path.display().to_string(),
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        out.push((parsed.id, parsed.output));
    }
    Ok(out)
}
