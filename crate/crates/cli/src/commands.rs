//! The five commands: extract, ablate, lowres, memcurve, distill.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use relex_core::agent::write_trajectories;
use relex_core::config::{MemoryMode, RunConfig, VerifierMode};
use relex_core::corpus::{sample_subset, Metrics, Sample};
use relex_core::distill::{build_sft_datasets, export_sft, SftRecord, SftTemplate};
use relex_core::memory::MemoryState;
use relex_core::retrieval::EncoderKind;

use crate::report::{write_json, write_rows_csv, MetricsReport, Row, TableReport};
use crate::runner::{build_pipeline, load_inputs, LoadedConfig, RunInputs};
use crate::usage::usage;

/// Mixed into the seed so the probe draw is independent of other sampling.
pub const PROBE_SALT: u64 = 0x70726f6265;

fn prepare(config_path: &Path, seed_override: Option<u64>, out: &Path) -> Result<(LoadedConfig, RunInputs)> {
    let mut loaded = LoadedConfig::from_file(config_path)?;
    if let Some(seed) = seed_override {
        loaded.config.seed = seed;
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let inputs = load_inputs(&loaded)?;
    for warning in &inputs.warnings {
        log::warn!("{warning}");
    }
    Ok((loaded, inputs))
}

struct ExtractionArtifacts {
    metrics: Metrics,
    n_sentences: usize,
}

/// Run one extraction pass and write `trajectories.jsonl`, `metrics.json`,
/// and `journal.jsonl` under `out`.
fn run_extraction(
    loaded: &LoadedConfig,
    inputs: &RunInputs,
    training: &[Sample],
    out: &Path,
) -> Result<ExtractionArtifacts> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let journal_path = out.join("journal.jsonl");
    let pipeline = build_pipeline(loaded, inputs, training, Some(&journal_path))?;
    let outcome = pipeline.run_corpus(&inputs.eval, MemoryState::new());

    write_trajectories(&out.join("trajectories.jsonl"), &outcome.trajectories)?;
    let digest = loaded.input_digest()?;
    let report = MetricsReport::new(&outcome.metrics, inputs.eval.len(), &digest, &loaded.config);
    write_json(&report, &out.join("metrics.json"))?;
    Ok(ExtractionArtifacts {
        metrics: outcome.metrics,
        n_sentences: inputs.eval.len(),
    })
}

pub fn cmd_extract(config_path: &Path, seed_override: Option<u64>, out: &Path) -> Result<()> {
    let (loaded, inputs) = prepare(config_path, seed_override, out)?;
    let artifacts = run_extraction(&loaded, &inputs, &inputs.train, out)?;
    println!(
        "extract: n={} precision={:.4} recall={:.4} f1={:.4}",
        artifacts.n_sentences,
        artifacts.metrics.precision,
        artifacts.metrics.recall,
        artifacts.metrics.f1
    );
    Ok(())
}

fn apply_variant(config: &mut RunConfig, spec: &str) -> Result<()> {
    match spec {
        "full" => {}
        "w/oR" => config.retrieval.enabled = false,
        "w/oM" => config.memory.mode = MemoryMode::Off,
        "w/oRM" => {
            config.retrieval.enabled = false;
            config.memory.mode = MemoryMode::Off;
        }
        "-samples" => config.retrieval.use_samples = false,
        "-doc" => config.retrieval.use_guidelines = false,
        "-KG" => config.retrieval.use_kg = false,
        other => {
            if let Some(encoder) = other.strip_prefix("retriever:") {
                config.retrieval.encoder = encoder
                    .parse::<EncoderKind>()
                    .map_err(|e| usage(e.to_string()))?;
            } else if let Some(mode) = other.strip_prefix("memory:") {
                config.memory.mode = match mode {
                    "off" => MemoryMode::Off,
                    "shallow" => MemoryMode::Shallow,
                    "deep" => MemoryMode::Deep,
                    _ => return Err(usage(format!("unknown memory mode '{mode}'"))),
                };
            } else {
                return Err(usage(format!("unknown ablation variant '{other}'")));
            }
        }
    }
    Ok(())
}

fn variant_dir_name(spec: &str) -> String {
    spec.chars()
        .map(|c| if c.is_alphanumeric() { c } else { '-' })
        .collect()
}

/// One metrics row per variant, over the identical sentence set and seed.
pub fn cmd_ablate(
    config_path: &Path,
    seed_override: Option<u64>,
    out: &Path,
    variants: &[String],
) -> Result<()> {
    if variants.len() < 2 {
        return Err(usage("ablate needs at least 2 variants"));
    }
    let (loaded, inputs) = prepare(config_path, seed_override, out)?;

    let mut rows = Vec::new();
    for spec in variants {
        let mut variant_loaded = loaded.clone();
        apply_variant(&mut variant_loaded.config, spec)?;
        let variant_out = out.join(variant_dir_name(spec));
        match run_extraction(&variant_loaded, &inputs, &inputs.train, &variant_out) {
            Ok(artifacts) => rows.push(Row::ok(spec.clone(), &artifacts.metrics)),
            Err(e) => {
                log::error!("variant '{spec}' failed: {e}");
                rows.push(Row::failed(spec.clone(), &e.to_string()));
            }
        }
    }

    let digest = loaded.input_digest()?;
    write_rows_csv(&rows, "variant", &out.join("ablate.csv"))?;
    write_json(
        &TableReport {
            rows: &rows,
            config_digest: &digest,
            config: &loaded.config,
        },
        &out.join("ablate.json"),
    )?;
    for row in &rows {
        println!("ablate: {} status={} f1={:.4}", row.label, row.status, row.f1);
    }
    Ok(())
}

/// Evaluate with the retrieval corpus restricted to each `n`, smallest
/// first. `n = 0` runs with an empty index.
pub fn cmd_lowres(
    config_path: &Path,
    seed_override: Option<u64>,
    out: &Path,
    ns: &[usize],
) -> Result<()> {
    if ns.is_empty() {
        return Err(usage("lowres needs at least one n"));
    }
    if ns.windows(2).any(|w| w[0] > w[1]) {
        return Err(usage("ns must be nondecreasing"));
    }
    let (loaded, inputs) = prepare(config_path, seed_override, out)?;

    let mut unique_ns: Vec<usize> = Vec::new();
    for &n in ns {
        if unique_ns.last() == Some(&n) {
            log::warn!("duplicate n={n} dropped");
            continue;
        }
        unique_ns.push(n);
    }

    let mut rows = Vec::new();
    for &n in &unique_ns {
        if n > inputs.train.len() {
            return Err(usage(format!(
                "n={n} exceeds the training corpus size {}",
                inputs.train.len()
            )));
        }
        let subset = sample_subset(&inputs.train, n, loaded.config.seed)?;
        let run_out = out.join(format!("n{n}"));
        let artifacts = run_extraction(&loaded, &inputs, &subset, &run_out)?;
        rows.push(Row::ok(n.to_string(), &artifacts.metrics));
    }

    let digest = loaded.input_digest()?;
    write_rows_csv(&rows, "n", &out.join("lowres.csv"))?;
    write_json(
        &TableReport {
            rows: &rows,
            config_digest: &digest,
            config: &loaded.config,
        },
        &out.join("lowres.json"),
    )?;
    for row in &rows {
        println!("lowres: n={} f1={:.4}", row.label, row.f1);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct CurveRow {
    checkpoint: usize,
    variant: String,
    precision: f64,
    recall: f64,
    f1: f64,
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
}

/// Stream the labelled training corpus under each memory variant and score a
/// fixed held-out probe set at every checkpoint.
pub fn cmd_memcurve(
    config_path: &Path,
    seed_override: Option<u64>,
    out: &Path,
    checkpoints: &[usize],
    probe_size: Option<usize>,
) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(usage("memcurve needs at least one checkpoint"));
    }
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(usage("checkpoints must be nondecreasing"));
    }
    let (loaded, inputs) = prepare(config_path, seed_override, out)?;
    if loaded.config.memory.verifier != VerifierMode::Oracle {
        return Err(usage("memcurve requires the oracle verifier"));
    }

    // Fixed held-out probe slice; default 20% of the corpus.
    let default_probe = (inputs.train.len() / 5).max(1);
    let probe_n = probe_size.unwrap_or(default_probe).min(inputs.train.len());
    let probe = sample_subset(&inputs.train, probe_n, loaded.config.seed ^ PROBE_SALT)?;
    let probe_ids: BTreeSet<u64> = probe.iter().map(|s| s.id).collect();
    let stream: Vec<Sample> = inputs
        .train
        .iter()
        .filter(|s| !probe_ids.contains(&s.id))
        .cloned()
        .collect();
    if *checkpoints.last().unwrap() > stream.len() {
        return Err(usage(format!(
            "checkpoint {} exceeds the stream length {}",
            checkpoints.last().unwrap(),
            stream.len()
        )));
    }

    let variants: [(&str, MemoryMode); 3] = [
        ("w/oM", MemoryMode::Off),
        ("wM", MemoryMode::Shallow),
        ("wM+", MemoryMode::Deep),
    ];

    let mut rows: Vec<CurveRow> = Vec::new();
    for (label, mode) in variants {
        let mut variant_loaded = loaded.clone();
        variant_loaded.config.memory.mode = mode;
        let variant_out = out.join(variant_dir_name(label));
        std::fs::create_dir_all(&variant_out)?;
        let journal_path = variant_out.join("journal.jsonl");
        let pipeline = build_pipeline(&variant_loaded, &inputs, &stream, Some(&journal_path))?;

        let mut memory = MemoryState::new();
        let mut consumed = 0usize;
        for &checkpoint in checkpoints {
            while consumed < checkpoint {
                let sample = &stream[consumed];
                let trajectory = pipeline.extract_one(sample, &memory);
                pipeline.absorb(sample, &trajectory, &mut memory);
                consumed += 1;
            }
            // Probe pass: read-only memory, no absorption.
            let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
            for sample in &probe {
                let trajectory = pipeline.extract_one(sample, &memory);
                let m = relex_core::corpus::score(&trajectory.result, &sample.gold, pipeline.policy());
                tp += m.tp;
                fp += m.fp;
                fn_ += m.fn_;
            }
            let metrics = Metrics::from_counts(tp, fp, fn_);
            rows.push(CurveRow {
                checkpoint,
                variant: label.to_string(),
                precision: metrics.precision,
                recall: metrics.recall,
                f1: metrics.f1,
                tp: metrics.tp,
                fp: metrics.fp,
                fn_: metrics.fn_,
            });
        }
    }

    let digest = loaded.input_digest()?;
    #[derive(Serialize)]
    struct CurveReport<'a> {
        rows: &'a [CurveRow],
        probe_size: usize,
        config_digest: &'a str,
        config: &'a RunConfig,
    }
    write_json(
        &CurveReport {
            rows: &rows,
            probe_size: probe_n,
            config_digest: &digest,
            config: &loaded.config,
        },
        &out.join("memcurve.json"),
    )?;
    let mut writer = csv::Writer::from_path(out.join("memcurve.csv"))?;
    writer.write_record(["checkpoint", "variant", "precision", "recall", "f1", "tp", "fp", "fn"])?;
    for row in &rows {
        writer.write_record([
            row.checkpoint.to_string(),
            row.variant.clone(),
            format!("{:.6}", row.precision),
            format!("{:.6}", row.recall),
            format!("{:.6}", row.f1),
            row.tp.to_string(),
            row.fp.to_string(),
            row.fn_.to_string(),
        ])?;
    }
    writer.flush()?;
    for row in &rows {
        println!("memcurve: checkpoint={} variant={} f1={:.4}", row.checkpoint, row.variant, row.f1);
    }
    Ok(())
}

/// Build and export the plain dataset D and the rationale-enriched D' from a
/// trajectory log produced by `extract`.
pub fn cmd_distill(
    config_path: &Path,
    seed_override: Option<u64>,
    out: &Path,
    trajectories_path: &Path,
    no_validate: bool,
) -> Result<()> {
    let (loaded, inputs) = prepare(config_path, seed_override, out)?;
    if !trajectories_path.exists() {
        return Err(usage(format!(
            "trajectory log not found: {}",
            trajectories_path.display()
        )));
    }
    let trajectories = relex_core::agent::read_trajectories(trajectories_path)?;

    // The log must reference the corpus the rationale pairs with; that is
    // the evaluation corpus of the producing run.
    let pipeline = build_pipeline(&loaded, &inputs, &inputs.train, None)?;
    let (plain, enriched, report) = build_sft_datasets(
        &trajectories,
        &inputs.eval,
        pipeline.gateway(),
        pipeline.policy(),
        !no_validate,
    );

    export_sft(&plain, &out.join("d.jsonl"), SftTemplate::Plain, pipeline.policy())?;
    let enriched_records: Vec<SftRecord> = enriched.iter().map(SftRecord::from).collect();
    export_sft(
        &enriched_records,
        &out.join("d_prime.jsonl"),
        SftTemplate::Rationale,
        pipeline.policy(),
    )?;
    #[derive(Serialize)]
    struct DistillOut<'a> {
        #[serde(flatten)]
        report: &'a relex_core::distill::DistillReport,
        config_digest: String,
        config: &'a RunConfig,
    }
    write_json(
        &DistillOut {
            report: &report,
            config_digest: loaded.input_digest()?,
            config: &loaded.config,
        },
        &out.join("distill_report.json"),
    )?;
    println!(
        "distill: |D|={} |D'|={} skipped={}",
        plain.len(),
        enriched_records.len(),
        report.skips.len()
    );
    Ok(())
}

/// Default output directory per command when --out is not given.
pub fn default_out(command: &str) -> PathBuf {
    PathBuf::from("runs").join(command)
}
