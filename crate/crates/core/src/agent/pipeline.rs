//! Wiring of gateway, retrieval stores, and memory into extraction
//! episodes and sequential corpus runs.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use super::strategy::{select_strategy, SelectionContext, StrategyMode, StrategyThresholds};
use super::{Step, StrategyKind, Termination, ToolRegistry, Trajectory};
use crate::config::{MemoryMode, RunConfig, VerifierMode};
use crate::corpus::{normalize_triple, score, Metrics, NormalizationPolicy, Sample, Schema, Triple};
use crate::error::{Error, Result};
use crate::gateway::{
    format_triples, list_slot, parse_action, parse_thought, parse_triples, text_slot, AgentAction,
    CompletionRequest, Gateway, ParseMode, PromptTemplate, Section, Slots, Tool, SLOT_CANDIDATES,
    SLOT_EXAMPLES, SLOT_INFO, SLOT_INPUT, SLOT_MEMORY,
};
use crate::memory::{MemoryState, Verdict};
use crate::retrieval::{
    link_entity, recognize_entities_gazetteer, recognize_entities_llm, retrieve_candidate_relations,
    retrieve_entity_triples, retrieve_guidelines, retrieve_samples_excluding, tokenize,
    CandidateMethod, EntityMethod, GuidelineSnippet, KgStore, Mention, RelationPrior, SampleIndex,
    TokenizerKind,
};

const FINISHED_OBSERVATION: &str = "finished";
const NO_RESULTS: &str = "no results";
const MAX_CONSECUTIVE_PARSE_FAILURES: u32 = 3;

/// Everything retrieval-shaped the agent can reach, built once per run.
pub struct PipelineStores {
    pub schema: Schema,
    pub index: Option<SampleIndex>,
    pub guidelines: Vec<GuidelineSnippet>,
    pub kg: Option<KgStore>,
    pub prior: RelationPrior,
    /// Training sentences and labels by id, for rendering retrieved hits as
    /// in-context examples.
    pub examples: std::collections::BTreeMap<u64, (String, Vec<Triple>)>,
}

impl PipelineStores {
    /// Build the store set from a training corpus; the relation prior and
    /// the example texts both come from it.
    pub fn new(
        schema: Schema,
        index: Option<SampleIndex>,
        guidelines: Vec<GuidelineSnippet>,
        kg: Option<KgStore>,
        training: &[Sample],
    ) -> Self {
        let prior = RelationPrior::from_samples(training, &schema);
        let examples = training
            .iter()
            .map(|s| (s.id, (s.text.clone(), s.gold.clone())))
            .collect();
        PipelineStores {
            schema,
            index,
            guidelines,
            kg,
            prior,
            examples,
        }
    }
}

/// Per-sentence context computed before the episode starts.
#[derive(Debug, Clone)]
pub struct SentenceContext {
    pub sentence_id: u64,
    pub text: String,
    pub mentions: Vec<Mention>,
    /// Normalized mention surfaces plus linked entity ids; the key set for
    /// memory queries.
    pub mention_keys: Vec<String>,
    pub candidates: Vec<String>,
    pub exclude: BTreeSet<u64>,
}

/// Result of a sequential pass over a corpus.
pub struct RunOutcome {
    pub trajectories: Vec<Trajectory>,
    pub metrics: Metrics,
    pub memory: MemoryState,
}

struct Knobs {
    k: usize,
    l: usize,
    candidate_method: CandidateMethod,
    entity_method: EntityMethod,
    kg_cap: usize,
    memory_mode: MemoryMode,
    verifier: VerifierMode,
    k_each: usize,
    strategy_mode: StrategyMode,
    thresholds: StrategyThresholds,
    max_rounds: usize,
    obs_limit: usize,
    tokenizer: TokenizerKind,
    policy: NormalizationPolicy,
    exclude_self: bool,
}

/// One configured extraction pipeline. Sentences are processed sequentially;
/// all memory writes funnel through [`Pipeline::absorb`].
pub struct Pipeline {
    gateway: Gateway,
    stores: PipelineStores,
    registry: ToolRegistry,
    knobs: Knobs,
}

impl Pipeline {
    pub fn new(gateway: Gateway, stores: PipelineStores, config: &RunConfig) -> Result<Self> {
        let strategy_mode = StrategyMode::parse(&config.agent.strategy)
            .ok_or_else(|| Error::Config(format!("unknown strategy mode '{}'", config.agent.strategy)))?;
        let mut tools = Vec::new();
        if config.retrieval.enabled {
            if config.retrieval.use_samples {
                tools.push(Tool::SearchSamples);
            }
            if config.retrieval.use_guidelines {
                tools.push(Tool::SearchAnnotation);
            }
            if config.retrieval.use_kg {
                tools.push(Tool::SearchKg);
            }
        }
        if config.memory.mode != MemoryMode::Off {
            tools.push(Tool::SearchMemory);
        }
        Ok(Pipeline {
            gateway,
            stores,
            registry: ToolRegistry::new(tools),
            knobs: Knobs {
                k: config.retrieval.k,
                l: config.retrieval.l,
                candidate_method: config.retrieval.candidate_method,
                entity_method: config.retrieval.entity_method,
                kg_cap: config.retrieval.kg_cap,
                memory_mode: config.memory.mode,
                verifier: config.memory.verifier,
                k_each: config.memory.k_each,
                strategy_mode,
                thresholds: StrategyThresholds {
                    short_len: config.agent.short_len,
                    min_mentions: config.agent.min_mentions,
                },
                max_rounds: config.agent.max_rounds,
                obs_limit: config.agent.obs_limit,
                tokenizer: config.retrieval.tokenizer,
                policy: if config.eval.case_fold {
                    NormalizationPolicy::CASE_FOLD
                } else {
                    NormalizationPolicy::EXACT
                },
                exclude_self: config.eval.exclude_self,
            },
        })
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn schema(&self) -> &Schema {
        &self.stores.schema
    }

    pub fn registry(&self) -> &ToolRegistry {
        &self.registry
    }

    pub fn policy(&self) -> NormalizationPolicy {
        self.knobs.policy
    }

    pub fn memory_mode(&self) -> MemoryMode {
        self.knobs.memory_mode
    }

    pub fn verifier(&self) -> VerifierMode {
        self.knobs.verifier
    }

    /// Mentions, memory keys, candidate relations, and the retrieval
    /// exclusion set for one sentence.
    pub fn prepare(&self, sample: &Sample) -> SentenceContext {
        let mentions = match (&self.stores.kg, self.knobs.entity_method) {
            (Some(kg), EntityMethod::Gazetteer) => recognize_entities_gazetteer(&sample.text, kg),
            (_, EntityMethod::Llm) => match recognize_entities_llm(&sample.text, &self.gateway) {
                Ok((mentions, _issues)) => mentions,
                Err(e) => {
                    self.gateway.note("entities.llm.failed", &e.to_string());
                    Vec::new()
                }
            },
            (None, EntityMethod::Gazetteer) => Vec::new(),
        };

        let mut mention_keys = Vec::new();
        for mention in &mentions {
            let surface = crate::corpus::normalize_surface(&mention.surface, self.knobs.policy);
            if !mention_keys.contains(&surface) {
                mention_keys.push(surface);
            }
            if let Some(kg) = &self.stores.kg {
                if let Some(id) = link_entity(&mention.surface, kg, self.knobs.policy) {
                    if !mention_keys.contains(&id) {
                        mention_keys.push(id);
                    }
                }
            }
        }

        let candidates = if self.stores.schema.is_empty() {
            Vec::new()
        } else {
            retrieve_candidate_relations(
                &sample.text,
                &self.stores.schema,
                self.knobs.candidate_method,
                self.knobs.l,
                &self.stores.prior,
                Some(&self.gateway),
            )
            .unwrap_or_default()
        };

        let mut exclude = BTreeSet::new();
        if self.knobs.exclude_self {
            exclude.insert(sample.id);
        }

        SentenceContext {
            sentence_id: sample.id,
            text: sample.text.clone(),
            mentions,
            mention_keys,
            candidates,
            exclude,
        }
    }

    fn tools_with_data(&self, memory: &MemoryState) -> bool {
        let index_has = self
            .stores
            .index
            .as_ref()
            .map(|i| !i.is_empty())
            .unwrap_or(false);
        (self.registry.is_enabled(Tool::SearchSamples) && index_has)
            || (self.registry.is_enabled(Tool::SearchAnnotation) && !self.stores.guidelines.is_empty())
            || (self.registry.is_enabled(Tool::SearchKg)
                && self.stores.kg.as_ref().map(|k| !k.is_empty()).unwrap_or(false))
            || (self.registry.is_enabled(Tool::SearchMemory) && !memory.is_empty())
    }

    pub fn choose_strategy(&self, ctx: &SentenceContext, memory: &MemoryState) -> StrategyKind {
        let sentence_len = match self.knobs.tokenizer {
            TokenizerKind::WhitespacePunct => tokenize(&ctx.text, self.knobs.tokenizer).len(),
            TokenizerKind::CharBigram => ctx.text.chars().count(),
        };
        let selection = SelectionContext {
            candidate_count: ctx.candidates.len(),
            sentence_len,
            mention_count: ctx.mentions.len(),
            tools_with_data: self.tools_with_data(memory),
        };
        select_strategy(
            &ctx.text,
            &selection,
            self.knobs.strategy_mode,
            self.knobs.thresholds,
            Some(&self.gateway),
        )
    }

    /// Prepare, choose a strategy, and run the episode. Never fails: backend
    /// errors become parse-failure trajectories with the cause journaled.
    pub fn extract_one(&self, sample: &Sample, memory: &MemoryState) -> Trajectory {
        let ctx = self.prepare(sample);
        let strategy = self.choose_strategy(&ctx, memory);
        self.run_episode(&ctx, strategy, memory)
    }

    /// Run one episode under an already-chosen strategy.
    pub fn run_episode(
        &self,
        ctx: &SentenceContext,
        strategy: StrategyKind,
        memory: &MemoryState,
    ) -> Trajectory {
        match strategy {
            StrategyKind::Direct => self.episode_single_call(ctx, memory, StrategyKind::Direct),
            StrategyKind::Cot => self.episode_single_call(ctx, memory, StrategyKind::Cot),
            StrategyKind::Staged => self.episode_staged(ctx, memory),
            StrategyKind::React => self.episode_react(ctx, memory),
        }
    }

    // ----- context rendering -------------------------------------------------

    fn context_slots(&self, ctx: &SentenceContext, memory: &MemoryState, candidates: &[String]) -> Slots {
        let mut slots = Slots::new();
        text_slot(&mut slots, SLOT_INPUT, &ctx.text);

        if self.registry.is_enabled(Tool::SearchSamples) {
            if let Some(index) = &self.stores.index {
                match retrieve_samples_excluding(index, &ctx.text, self.knobs.k, &ctx.exclude) {
                    Ok(output) => {
                        let items: Vec<String> = output
                            .hits
                            .iter()
                            .filter_map(|hit| self.example_text(hit.sample_id))
                            .collect();
                        if !items.is_empty() {
                            list_slot(&mut slots, SLOT_EXAMPLES, items);
                        }
                    }
                    Err(e) => self.gateway.note("retrieval.examples.failed", &e.to_string()),
                }
            }
        }

        if !candidates.is_empty() {
            list_slot(&mut slots, SLOT_CANDIDATES, candidates.to_vec());
        }

        let mut info = Vec::new();
        if self.registry.is_enabled(Tool::SearchAnnotation) {
            for snippet in retrieve_guidelines(candidates, &self.stores.guidelines) {
                info.push(format!("[{}] {}", snippet.relation_name, snippet.text));
            }
        }
        if self.registry.is_enabled(Tool::SearchKg) {
            if let Some(kg) = &self.stores.kg {
                let mut seen = BTreeSet::new();
                for mention in &ctx.mentions {
                    if let Some(id) = link_entity(&mention.surface, kg, self.knobs.policy) {
                        if !seen.insert(id.clone()) {
                            continue;
                        }
                        if let Ok(triples) = retrieve_entity_triples(&id, kg, self.knobs.kg_cap) {
                            for (s, p, o) in triples {
                                info.push(format!("({s}, {p}, {o})"));
                            }
                        }
                    }
                }
            }
        }
        if !info.is_empty() {
            list_slot(&mut slots, SLOT_INFO, info);
        }

        if self.knobs.memory_mode != MemoryMode::Off {
            let bundle = memory.query(&ctx.text, &ctx.mention_keys, self.knobs.k_each, self.knobs.tokenizer);
            if !bundle.is_empty() {
                text_slot(&mut slots, SLOT_MEMORY, bundle.render());
            }
        }
        slots
    }

    // ----- strategies --------------------------------------------------------

    fn episode_single_call(
        &self,
        ctx: &SentenceContext,
        memory: &MemoryState,
        kind: StrategyKind,
    ) -> Trajectory {
        let slots = self.context_slots(ctx, memory, &ctx.candidates);
        let template = match kind {
            StrategyKind::Cot => cot_template(),
            _ => PromptTemplate::extraction(),
        };
        let prompt = match template.render(&slots) {
            Ok(p) => p,
            Err(e) => return self.failed(ctx, kind, Vec::new(), &e),
        };
        let tag = match kind {
            StrategyKind::Cot => "extract.cot",
            _ => "extract.direct",
        };
        let response = match self.gateway.complete(&CompletionRequest::new(prompt, tag)) {
            Ok(r) => r,
            Err(e) => return self.failed(ctx, kind, Vec::new(), &e),
        };
        let (triples, _issues) = parse_triples(&response, &self.stores.schema, ParseMode::Strict);
        let thought = match kind {
            StrategyKind::Cot => response.trim().to_string(),
            _ => String::new(),
        };
        self.finished(ctx, kind, Vec::new(), thought, triples)
    }

    fn episode_staged(&self, ctx: &SentenceContext, memory: &MemoryState) -> Trajectory {
        // Call 1: filter the candidate relation types.
        let pool: Vec<String> = if ctx.candidates.is_empty() {
            self.stores.schema.names().map(String::from).collect()
        } else {
            ctx.candidates.clone()
        };
        let select_prompt = format!(
            "Select the relation types that hold in the sentence. Answer with names from the list, comma-separated.\nRelation types: {}\nSentence: {}\nAnswer:",
            pool.join(", "),
            ctx.text
        );
        let selected = match self
            .gateway
            .complete(&CompletionRequest::new(select_prompt, "extract.staged.select"))
        {
            Ok(answer) => {
                let mut picked = Vec::new();
                for raw in answer.split([',', '\n']) {
                    let name = raw.trim();
                    if !name.is_empty() && pool.iter().any(|p| p == name) && !picked.contains(&name.to_string()) {
                        picked.push(name.to_string());
                    }
                }
                if picked.is_empty() {
                    pool.clone()
                } else {
                    picked
                }
            }
            Err(e) => return self.failed(ctx, StrategyKind::Staged, Vec::new(), &e),
        };

        // Call 2: extract with only the selected types in the prompt.
        let slots = self.context_slots(ctx, memory, &selected);
        let prompt = match PromptTemplate::extraction().render(&slots) {
            Ok(p) => p,
            Err(e) => return self.failed(ctx, StrategyKind::Staged, Vec::new(), &e),
        };
        let response = match self.gateway.complete(&CompletionRequest::new(prompt, "extract.staged")) {
            Ok(r) => r,
            Err(e) => return self.failed(ctx, StrategyKind::Staged, Vec::new(), &e),
        };
        let (triples, _issues) = parse_triples(&response, &self.stores.schema, ParseMode::Strict);
        let thought = format!("Selected relation types: {}", selected.join(", "));
        self.finished(ctx, StrategyKind::Staged, Vec::new(), thought, triples)
    }

    fn episode_react(&self, ctx: &SentenceContext, memory: &MemoryState) -> Trajectory {
        let mut steps: Vec<Step> = Vec::new();
        let mut consecutive_failures = 0u32;
        while steps.len() < self.knobs.max_rounds {
            let prompt = match self.react_prompt(ctx, memory, &steps) {
                Ok(p) => p,
                Err(e) => return self.failed(ctx, StrategyKind::React, steps, &e),
            };
            let response = match self.gateway.complete(&CompletionRequest::new(prompt, "agent.react")) {
                Ok(r) => r,
                Err(e) => return self.failed(ctx, StrategyKind::React, steps, &e),
            };
            match parse_action(&response) {
                Err(e) => {
                    consecutive_failures += 1;
                    self.gateway.note("agent.react.unparsed", &e.to_string());
                    if consecutive_failures >= MAX_CONSECUTIVE_PARSE_FAILURES {
                        return Trajectory {
                            sentence_id: ctx.sentence_id,
                            strategy: StrategyKind::React,
                            steps,
                            result: Vec::new(),
                            terminated: Termination::ParseFailure,
                        };
                    }
                }
                Ok(action) => {
                    consecutive_failures = 0;
                    let thought = parse_thought(&response);
                    if action.tool == Tool::Finish {
                        let (triples, _issues) =
                            parse_triples(&action.argument, &self.stores.schema, ParseMode::Strict);
                        return self.finished(ctx, StrategyKind::React, steps, thought, triples);
                    }
                    let observation = truncate_chars(
                        &self.dispatch(&action, ctx, memory),
                        self.knobs.obs_limit,
                    );
                    steps.push(Step {
                        thought,
                        action,
                        observation,
                    });
                }
            }
        }
        Trajectory {
            sentence_id: ctx.sentence_id,
            strategy: StrategyKind::React,
            steps,
            result: Vec::new(),
            terminated: Termination::BudgetExhausted,
        }
    }

    fn react_prompt(&self, ctx: &SentenceContext, memory: &MemoryState, steps: &[Step]) -> Result<String> {
        let mut lines = vec![
            "You extract relation triples from text by reasoning and calling tools.".to_string(),
            "Reply with exactly:".to_string(),
            "Thought: <your reasoning>".to_string(),
            "Action: <Tool>[<argument>]".to_string(),
            "Available tools:".to_string(),
        ];
        for tool in self.registry.enabled_tools() {
            let description = match tool {
                Tool::SearchSamples => "SearchSamples[query]: retrieve labelled example sentences",
                Tool::SearchAnnotation => "SearchAnnotation[relation names]: look up annotation guidelines",
                Tool::SearchKg => "SearchKG[entity mention]: look up known facts about an entity",
                Tool::SearchMemory => "SearchMemory[query]: recall verified results and lessons",
                Tool::Finish => "Finish[triples]: return the final triples as a JSON array of {\"h\",\"r\",\"t\"} objects",
            };
            lines.push(format!("- {description}"));
        }
        let slots = self.context_slots(ctx, memory, &ctx.candidates);
        lines.push(react_context_template().render(&slots)?);
        if !steps.is_empty() {
            lines.push("Steps so far:".to_string());
            for step in steps {
                lines.push(format!("Thought: {}", step.thought));
                lines.push(format!("Action: {}[{}]", step.action.tool.name(), step.action.argument));
                lines.push(format!("Observation: {}", step.observation));
            }
        }
        Ok(lines.join("\n"))
    }

    // ----- tool dispatch -----------------------------------------------------

    /// Execute one tool call and return the observation text. Disabled tools
    /// and empty retrievals come back as error observations.
    pub fn dispatch(&self, action: &AgentAction, ctx: &SentenceContext, memory: &MemoryState) -> String {
        if !self.registry.is_enabled(action.tool) {
            return format!("tool unavailable: {}", action.tool.name());
        }
        match action.tool {
            Tool::Finish => FINISHED_OBSERVATION.to_string(),
            Tool::SearchSamples => {
                let index = match &self.stores.index {
                    Some(index) if !index.is_empty() => index,
                    _ => return NO_RESULTS.to_string(),
                };
                let query = if action.argument.trim().is_empty() {
                    ctx.text.as_str()
                } else {
                    action.argument.trim()
                };
                match retrieve_samples_excluding(index, query, self.knobs.k, &ctx.exclude) {
                    Ok(output) if !output.hits.is_empty() => {
                        let items: Vec<String> = output
                            .hits
                            .iter()
                            .filter_map(|hit| self.example_text(hit.sample_id))
                            .collect();
                        if items.is_empty() {
                            NO_RESULTS.to_string()
                        } else {
                            items.join("\n")
                        }
                    }
                    Ok(_) => NO_RESULTS.to_string(),
                    Err(e) => format!("tool error: {e}"),
                }
            }
            Tool::SearchAnnotation => {
                let names: Vec<String> = action
                    .argument
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                let snippets = retrieve_guidelines(&names, &self.stores.guidelines);
                if snippets.is_empty() {
                    NO_RESULTS.to_string()
                } else {
                    snippets
                        .iter()
                        .map(|s| format!("[{}] {}", s.relation_name, s.text))
                        .collect::<Vec<_>>()
                        .join("\n")
                }
            }
            Tool::SearchKg => {
                let kg = match &self.stores.kg {
                    Some(kg) => kg,
                    None => return NO_RESULTS.to_string(),
                };
                let surface = action.argument.trim();
                if surface.is_empty() {
                    return NO_RESULTS.to_string();
                }
                match link_entity(surface, kg, self.knobs.policy) {
                    Some(id) => match retrieve_entity_triples(&id, kg, self.knobs.kg_cap) {
                        Ok(triples) if !triples.is_empty() => triples
                            .iter()
                            .map(|(s, p, o)| format!("({s}, {p}, {o})"))
                            .collect::<Vec<_>>()
                            .join("\n"),
                        _ => NO_RESULTS.to_string(),
                    },
                    None => NO_RESULTS.to_string(),
                }
            }
            Tool::SearchMemory => {
                let query = if action.argument.trim().is_empty() {
                    ctx.text.as_str()
                } else {
                    action.argument.trim()
                };
                let mut keys = ctx.mention_keys.clone();
                let arg_key = crate::corpus::normalize_surface(query, self.knobs.policy);
                if !arg_key.is_empty() && !keys.contains(&arg_key) {
                    keys.push(arg_key);
                }
                let bundle = memory.query(query, &keys, self.knobs.k_each, self.knobs.tokenizer);
                if bundle.is_empty() {
                    NO_RESULTS.to_string()
                } else {
                    bundle.render()
                }
            }
        }
    }

    // ----- memory writes -----------------------------------------------------

    /// Verify the episode result and write memory per the configured mode.
    /// With the blind verifier every triple is provisionally correct, so the
    /// wrong store and reflections stay empty.
    pub fn absorb(&self, sample: &Sample, trajectory: &Trajectory, memory: &mut MemoryState) {
        if self.knobs.memory_mode == MemoryMode::Off {
            return;
        }
        let verified: Vec<(Triple, Verdict)> = match self.knobs.verifier {
            VerifierMode::Blind => trajectory
                .result
                .iter()
                .map(|t| (t.clone(), Verdict::Correct))
                .collect(),
            VerifierMode::Oracle => {
                let gold: BTreeSet<Triple> = sample
                    .gold
                    .iter()
                    .map(|t| normalize_triple(t, self.knobs.policy))
                    .collect();
                trajectory
                    .result
                    .iter()
                    .map(|t| {
                        let verdict = if gold.contains(&normalize_triple(t, self.knobs.policy)) {
                            Verdict::Correct
                        } else {
                            Verdict::Wrong
                        };
                        (t.clone(), verdict)
                    })
                    .collect()
            }
        };
        memory.record_shallow(&sample.text, &verified, self.knobs.policy);
        if self.knobs.memory_mode == MemoryMode::Deep {
            for (triple, verdict) in &verified {
                match verdict {
                    Verdict::Correct => {
                        let _ = memory.update_deep(
                            triple,
                            self.stores.kg.as_ref(),
                            self.knobs.policy,
                            &self.gateway,
                        );
                    }
                    Verdict::Wrong => {
                        let names = vec![triple.relation.clone()];
                        let context = retrieve_guidelines(&names, &self.stores.guidelines);
                        let _ = memory.reflect(triple, &context, self.knobs.policy, &self.gateway);
                    }
                }
            }
        }
    }

    /// Sequential pass: extract, score, absorb. Micro counts are pooled over
    /// all sentences. Per-sentence backend failures terminate that episode
    /// only; the pass continues.
    pub fn run_corpus(&self, samples: &[Sample], mut memory: MemoryState) -> RunOutcome {
        let mut trajectories = Vec::with_capacity(samples.len());
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for sample in samples {
            let trajectory = self.extract_one(sample, &memory);
            let m = score(&trajectory.result, &sample.gold, self.knobs.policy);
            tp += m.tp;
            fp += m.fp;
            fn_ += m.fn_;
            self.absorb(sample, &trajectory, &mut memory);
            trajectories.push(trajectory);
        }
        RunOutcome {
            trajectories,
            metrics: Metrics::from_counts(tp, fp, fn_),
            memory,
        }
    }

    // ----- helpers -----------------------------------------------------------

    fn finished(
        &self,
        ctx: &SentenceContext,
        strategy: StrategyKind,
        mut steps: Vec<Step>,
        thought: String,
        triples: Vec<Triple>,
    ) -> Trajectory {
        steps.push(Step {
            thought,
            action: AgentAction::new(Tool::Finish, format_triples(&triples)),
            observation: FINISHED_OBSERVATION.to_string(),
        });
        Trajectory {
            sentence_id: ctx.sentence_id,
            strategy,
            steps,
            result: triples,
            terminated: Termination::Finish,
        }
    }

    fn failed(
        &self,
        ctx: &SentenceContext,
        strategy: StrategyKind,
        steps: Vec<Step>,
        error: &Error,
    ) -> Trajectory {
        log::error!("episode for sentence {} failed: {error}", ctx.sentence_id);
        self.gateway.note("episode.failed", &format!("sentence {}: {error}", ctx.sentence_id));
        Trajectory {
            sentence_id: ctx.sentence_id,
            strategy,
            steps,
            result: Vec::new(),
            terminated: Termination::ParseFailure,
        }
    }

    fn example_text(&self, sample_id: u64) -> Option<String> {
        self.stores
            .examples
            .get(&sample_id)
            .map(|(text, gold)| format!("{text}\nTriples: {}", format_triples(gold)))
    }
}

fn cot_template() -> PromptTemplate {
    let mut template = PromptTemplate::extraction();
    template.id = "extraction-cot".into();
    let output = template.sections.pop();
    template.sections.push(Section::Literal(
        "Think step by step, then end with the final triples as a JSON array.".into(),
    ));
    if let Some(output) = output {
        template.sections.push(output);
    }
    template
}

fn react_context_template() -> PromptTemplate {
    let mut template = PromptTemplate::extraction();
    template.id = "react-context".into();
    template.sections.pop(); // drop the "Output:" cue; the loop answers with actions
    template
}

fn truncate_chars(text: &str, limit: usize) -> String {
    if text.chars().count() <= limit {
        text.to_string()
    } else {
        text.chars().take(limit).collect()
    }
}

/// One trajectory per line, in run order.
pub fn write_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    for trajectory in trajectories {
        let line = serde_json::to_string(trajectory).map_err(|e| Error::Export(e.to_string()))?;
        writeln!(file, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let trajectory: Trajectory = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            path: path.display().to_string(),
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        out.push(trajectory);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{BackendConfig, EvalConfig, MemoryConfig, RetrievalConfig};
    use crate::corpus::DatasetFormat;
    use crate::gateway::{BackendHandle, Matcher, ScriptedBackend, ScriptedRule};
    use crate::retrieval::{build_index, EncoderKind, IndexConfig};

    const FIG_SENTENCE: &str =
        "On May 9th, Nobel laureate and writer Mo Yan delivered a speech in Beijing.";

    fn rule(needle: &str, response: &str) -> ScriptedRule {
        ScriptedRule {
            matcher: Matcher::Substring { value: needle.into() },
            response: response.into(),
        }
    }

    fn test_config() -> RunConfig {
        RunConfig {
            seed: 7,
            backend: BackendConfig {
                kind: "scripted".into(),
                script: Some("inline".into()),
                replay: None,
                base_url: None,
                model: None,
            },
            retrieval: RetrievalConfig::default(),
            memory: MemoryConfig::default(),
            agent: Default::default(),
            eval: EvalConfig {
                train: "train".into(),
                eval: "eval".into(),
                format: DatasetFormat::GenericJsonl,
                schema: None,
                case_fold: false,
                exclude_self: true,
            },
        }
    }

    fn schema() -> Schema {
        Schema::new(
            "test",
            vec![
                crate::corpus::RelationType::inferred("award"),
                crate::corpus::RelationType::inferred("place_of_birth"),
            ],
        )
        .unwrap()
    }

    fn kg() -> KgStore {
        KgStore::new(
            vec![("Mo Yan".into(), "E1".into()), ("Beijing".into(), "E2".into())],
            vec![
                ("E1".into(), ("Mo Yan".into(), "real_name".into(), "Guan Moye".into())),
                ("E2".into(), ("Beijing".into(), "country".into(), "China".into())),
            ],
        )
        .unwrap()
    }

    fn guidelines() -> Vec<GuidelineSnippet> {
        vec![GuidelineSnippet {
            id: "g-award".into(),
            relation_name: "award".into(),
            text: "award links a person to a prize they received".into(),
        }]
    }

    fn pipeline(rules: Vec<ScriptedRule>, config: RunConfig, training: &[Sample]) -> Pipeline {
        let index = if training.is_empty() {
            None
        } else {
            Some(
                build_index(
                    training,
                    &IndexConfig {
                        kind: EncoderKind::Bm25,
                        seed: config.seed,
                        ..IndexConfig::default()
                    },
                    None,
                )
                .unwrap(),
            )
        };
        let stores = PipelineStores::new(schema(), index, guidelines(), Some(kg()), training);
        let gateway = Gateway::new(BackendHandle::Scripted(ScriptedBackend::new(rules)));
        Pipeline::new(gateway, stores, &config).unwrap()
    }

    fn ctx_for(pipeline: &Pipeline, text: &str, id: u64) -> SentenceContext {
        pipeline.prepare(&Sample::new(id, text, vec![]))
    }

    #[test]
    fn direct_episode_is_one_finished_step() {
        let p = pipeline(vec![rule("", "(Mo Yan, award, Nobel Prize)")], test_config(), &[]);
        let ctx = ctx_for(&p, FIG_SENTENCE, 0);
        let t = p.run_episode(&ctx, StrategyKind::Direct, &MemoryState::new());
        assert_eq!(t.terminated, Termination::Finish);
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.result, vec![Triple::new("Mo Yan", "award", "Nobel Prize")]);
        assert_eq!(t.steps[0].action.tool, Tool::Finish);
    }

    #[test]
    fn react_episode_follows_scripted_tool_sequence() {
        // Later rounds carry earlier observations, so rules are ordered
        // most-specific first and keyed on observation fragments.
        let rules = vec![
            rule(
                "Observation: (Mo Yan, real_name, Guan Moye)",
                "Thought: I have enough information now.\nAction: Finish[[{\"h\":\"Mo Yan\",\"r\":\"award\",\"t\":\"Nobel Prize\"}]]",
            ),
            rule(
                "Observation: [award]",
                "Thought: Let me look up what is known about Mo Yan.\nAction: SearchKG[Mo Yan]",
            ),
            rule(
                "delivered a speech",
                "Thought: I should check the annotation guidelines for award.\nAction: SearchAnnotation[award]",
            ),
        ];
        let p = pipeline(rules, test_config(), &[]);
        let ctx = ctx_for(&p, FIG_SENTENCE, 0);
        let t = p.run_episode(&ctx, StrategyKind::React, &MemoryState::new());
        assert_eq!(t.terminated, Termination::Finish);
        assert_eq!(t.steps.len(), 3);
        assert_eq!(t.steps[0].action.tool, Tool::SearchAnnotation);
        assert!(t.steps[0].observation.contains("prize they received"));
        assert_eq!(t.steps[1].action.tool, Tool::SearchKg);
        assert!(t.steps[1].observation.contains("Guan Moye"));
        assert_eq!(t.steps[2].action.tool, Tool::Finish);
        assert_eq!(t.result, vec![Triple::new("Mo Yan", "award", "Nobel Prize")]);
    }

    #[test]
    fn never_finishing_script_exhausts_the_budget() {
        let mut config = test_config();
        config.agent.max_rounds = 1;
        let p = pipeline(
            vec![rule("", "Thought: keep looking\nAction: SearchKG[Mo Yan]")],
            config,
            &[],
        );
        let ctx = ctx_for(&p, FIG_SENTENCE, 0);
        let t = p.run_episode(&ctx, StrategyKind::React, &MemoryState::new());
        assert_eq!(t.terminated, Termination::BudgetExhausted);
        assert!(t.result.is_empty());
        assert_eq!(t.steps.len(), 1);
    }

    #[test]
    fn three_unparseable_rounds_terminate_with_parse_failure() {
        let p = pipeline(vec![rule("", "no action grammar here")], test_config(), &[]);
        let ctx = ctx_for(&p, FIG_SENTENCE, 0);
        let t = p.run_episode(&ctx, StrategyKind::React, &MemoryState::new());
        assert_eq!(t.terminated, Termination::ParseFailure);
        assert!(t.steps.is_empty());
    }

    #[test]
    fn staged_episode_filters_types_then_extracts() {
        let rules = vec![
            rule("Select the relation types", "award"),
            rule("Task: Extract relation triples", "(Mo Yan, award, Nobel Prize)"),
        ];
        let p = pipeline(rules, test_config(), &[]);
        let ctx = ctx_for(&p, FIG_SENTENCE, 0);
        let t = p.run_episode(&ctx, StrategyKind::Staged, &MemoryState::new());
        assert_eq!(t.terminated, Termination::Finish);
        assert_eq!(t.steps.len(), 1);
        assert!(t.steps[0].thought.contains("award"));
        assert_eq!(t.result.len(), 1);
    }

    #[test]
    fn cot_episode_keeps_reasoning_as_thought() {
        let response = "The sentence names a laureate, so the prize relation holds.\n[{\"h\":\"Mo Yan\",\"r\":\"award\",\"t\":\"Nobel Prize\"}]";
        let p = pipeline(vec![rule("", response)], test_config(), &[]);
        let ctx = ctx_for(&p, FIG_SENTENCE, 0);
        let t = p.run_episode(&ctx, StrategyKind::Cot, &MemoryState::new());
        assert_eq!(t.terminated, Termination::Finish);
        assert_eq!(t.result.len(), 1);
        assert!(t.steps[0].thought.contains("laureate"));
    }

    #[test]
    fn rule_mode_picks_react_for_rich_context_sentence() {
        let mut config = test_config();
        config.agent.short_len = 5; // the fixture sentence is longer than this
        let p = pipeline(vec![rule("", "x")], config, &[]);
        let ctx = ctx_for(&p, FIG_SENTENCE, 0);
        assert!(ctx.mentions.len() >= 2);
        let strategy = p.choose_strategy(&ctx, &MemoryState::new());
        assert_eq!(strategy, StrategyKind::React);
    }

    #[test]
    fn dispatch_covers_tools_and_errors() {
        let training = vec![Sample::new(
            0,
            "Kazuo Ishiguro received the Nobel Prize in Literature",
            vec![Triple::new("Kazuo Ishiguro", "award", "Nobel Prize in Literature")],
        )];
        let mut config = test_config();
        config.memory.mode = MemoryMode::Shallow; // enables the memory tool
        let p = pipeline(vec![], config, &training);
        let ctx = ctx_for(&p, FIG_SENTENCE, 99);
        let memory = MemoryState::new();

        let obs = p.dispatch(&AgentAction::new(Tool::SearchKg, "Mo Yan"), &ctx, &memory);
        assert!(obs.contains("Guan Moye"));

        let obs = p.dispatch(&AgentAction::new(Tool::SearchAnnotation, "award"), &ctx, &memory);
        assert!(obs.contains("prize they received"));

        let obs = p.dispatch(&AgentAction::new(Tool::SearchSamples, "Nobel"), &ctx, &memory);
        assert!(obs.contains("Kazuo Ishiguro"));

        let obs = p.dispatch(&AgentAction::new(Tool::SearchMemory, ""), &ctx, &memory);
        assert_eq!(obs, NO_RESULTS);

        let obs = p.dispatch(&AgentAction::new(Tool::SearchKg, "Unknown Person"), &ctx, &memory);
        assert_eq!(obs, NO_RESULTS);
    }

    #[test]
    fn dispatch_on_empty_index_reports_no_results() {
        let p = pipeline(vec![], test_config(), &[]);
        let ctx = ctx_for(&p, FIG_SENTENCE, 0);
        let obs = p.dispatch(&AgentAction::new(Tool::SearchSamples, "query"), &ctx, &MemoryState::new());
        assert_eq!(obs, NO_RESULTS);
    }

    #[test]
    fn disabled_tool_reports_unavailable_and_never_appears_in_prompts() {
        let mut config = test_config();
        config.retrieval.enabled = false; // w/oR
        let p = pipeline(vec![rule("", "(Mo Yan, award, Nobel Prize)")], config, &[]);
        let ctx = ctx_for(&p, FIG_SENTENCE, 0);
        let obs = p.dispatch(&AgentAction::new(Tool::SearchKg, "Mo Yan"), &ctx, &MemoryState::new());
        assert_eq!(obs, "tool unavailable: SearchKG");

        let slots = p.context_slots(&ctx, &MemoryState::new(), &ctx.candidates);
        let prompt = PromptTemplate::extraction().render(&slots).unwrap();
        assert!(!prompt.contains(crate::gateway::HEADER_EXAMPLES));
        assert!(!prompt.contains(crate::gateway::HEADER_INFO));
    }

    #[test]
    fn corpus_run_with_gold_script_scores_perfectly() {
        let mut training = Vec::new();
        let mut rules = Vec::new();
        for i in 0..20 {
            let text = format!("synthetic sentence number {i} mentions entity{i}");
            let gold = vec![Triple::new(format!("entity{i}"), "award", format!("prize{i}"))];
            // Key on the Input section so retrieved examples (other training
            // sentences embedded in the prompt) cannot shadow the rule.
            rules.push(rule(&format!("Input:\n{text}\n"), &format_triples(&gold)));
            training.push(Sample::new(i, text, gold));
        }
        let mut config = test_config();
        config.agent.strategy = "direct".into();
        let p = pipeline(rules, config, &training);
        let outcome = p.run_corpus(&training, MemoryState::new());
        assert_eq!(outcome.metrics.f1, 1.0);
        assert_eq!(outcome.trajectories.len(), 20);
    }

    #[test]
    fn memory_off_run_equals_fresh_state_per_sentence() {
        let samples: Vec<Sample> = (0..5)
            .map(|i| {
                Sample::new(
                    i,
                    format!("sentence {i} about entity{i}"),
                    vec![Triple::new(format!("entity{i}"), "award", "prize")],
                )
            })
            .collect();
        let rules = vec![rule("", "(a, award, b)")];
        let mut config = test_config();
        config.agent.strategy = "direct".into();
        config.memory.mode = MemoryMode::Off;

        let p = pipeline(rules.clone(), config.clone(), &samples);
        let run = p.run_corpus(&samples, MemoryState::new());

        let per_sentence: Vec<Trajectory> = samples
            .iter()
            .map(|s| {
                let fresh = pipeline(rules.clone(), config.clone(), &samples);
                fresh.extract_one(s, &MemoryState::new())
            })
            .collect();
        assert_eq!(run.trajectories, per_sentence);
        assert!(run.memory.is_empty());
    }

    #[test]
    fn oracle_verifier_routes_verdicts_into_memory() {
        let sample = Sample::new(
            0,
            "The Musesum is located in Northeast Gaomi Township, Mo Yan's hometown.",
            vec![Triple::new("Mo Yan", "place_of_birth", "Northeast Gaomi Township")],
        );
        // The script extracts one correct and one wrong triple, then serves
        // the memory prompts.
        let rules = vec![
            rule("Summarize the fact", "Mo Yan was born in Northeast Gaomi Township."),
            rule("Write one short lesson", "Incomplete entities such as Musesum should not be extracted."),
            rule(
                "",
                "[{\"h\":\"Mo Yan\",\"r\":\"place_of_birth\",\"t\":\"Northeast Gaomi Township\"},{\"h\":\"Musesum\",\"r\":\"place_of_birth\",\"t\":\"Northeast Gaomi Township\"}]",
            ),
        ];
        let mut config = test_config();
        config.agent.strategy = "direct".into();
        config.memory.mode = MemoryMode::Deep;
        let p = pipeline(rules, config, &[]);
        let outcome = p.run_corpus(std::slice::from_ref(&sample), MemoryState::new());
        assert_eq!(outcome.memory.correct.len(), 1);
        assert_eq!(outcome.memory.wrong.len(), 1);
        assert_eq!(outcome.memory.deep.len(), 1);
        assert_eq!(outcome.memory.reflections.len(), 1);
    }

    #[test]
    fn blind_verifier_keeps_wrong_and_reflections_empty() {
        let sample = Sample::new(0, "some sentence", vec![]);
        let rules = vec![
            rule("Summarize the fact", "a fact about things."),
            rule("", "(anything, award, else)"),
        ];
        let mut config = test_config();
        config.agent.strategy = "direct".into();
        config.memory.mode = MemoryMode::Deep;
        config.memory.verifier = VerifierMode::Blind;
        let p = pipeline(rules, config, &[]);
        let outcome = p.run_corpus(std::slice::from_ref(&sample), MemoryState::new());
        assert!(outcome.memory.wrong.is_empty());
        assert!(outcome.memory.reflections.is_empty());
        assert_eq!(outcome.memory.correct.len(), 1);
    }

    #[test]
    fn case_folded_memory_keys_still_match_mentions() {
        let mut config = test_config();
        config.eval.case_fold = true;
        config.memory.mode = MemoryMode::Shallow;
        let p = pipeline(vec![rule("", "x")], config, &[]);
        let mut memory = MemoryState::new();
        memory.record_shallow(
            "an earlier sentence",
            &[(Triple::new("MO YAN", "award", "Nobel Prize"), crate::memory::Verdict::Correct)],
            p.policy(),
        );
        let ctx = ctx_for(&p, "Mo Yan spoke in Beijing", 0);
        let obs = p.dispatch(&AgentAction::new(Tool::SearchMemory, ""), &ctx, &memory);
        assert!(obs.contains("[verified]"), "folded keys should match: {obs}");
    }

    #[test]
    fn trajectories_round_trip_through_jsonl() {
        let p = pipeline(vec![rule("", "(Mo Yan, award, Nobel Prize)")], test_config(), &[]);
        let ctx = ctx_for(&p, FIG_SENTENCE, 3);
        let t = p.run_episode(&ctx, StrategyKind::Direct, &MemoryState::new());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectories.jsonl");
        write_trajectories(&path, std::slice::from_ref(&t)).unwrap();
        assert_eq!(read_trajectories(&path).unwrap(), vec![t]);
    }

    #[test]
    fn recorded_steps_reserialize_to_parseable_actions() {
        let rules = vec![
            rule("Observation: [award]", "Thought: done\nAction: Finish[[]]"),
            rule("", "Thought: guidelines\nAction: SearchAnnotation[award]"),
        ];
        let p = pipeline(rules, test_config(), &[]);
        let ctx = ctx_for(&p, FIG_SENTENCE, 0);
        let t = p.run_episode(&ctx, StrategyKind::React, &MemoryState::new());
        for step in &t.steps {
            let serialized = crate::gateway::format_action(&step.thought, &step.action);
            let reparsed = parse_action(&serialized).unwrap();
            assert_eq!(reparsed, step.action);
        }
        // Finish appears exactly once and last.
        let finish_positions: Vec<usize> = t
            .steps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.action.tool == Tool::Finish)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(finish_positions, vec![t.steps.len() - 1]);
    }
}
