//! Config loading, store construction, and pipeline assembly shared by all
//! commands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use relex_core::agent::{Pipeline, PipelineStores};
use relex_core::config::RunConfig;
use relex_core::corpus::{load_dataset, LoadMode, LoadOptions, Sample, Schema};
use relex_core::gateway::{
    BackendHandle, Gateway, HttpBackend, HttpConfig, Journal, JournalBackend, ScriptedBackend,
};
use relex_core::retrieval::{
    build_index, load_guidelines, EncoderKind, FileVectorSource, GuidelineSnippet, IndexConfig,
    KgStore, SampleIndex, VectorSource,
};

use crate::usage::usage;

/// A run config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(|e| usage(e.to_string()))?;
        let config: RunConfig =
            toml::from_str(&raw).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        config.validate().map_err(|e| usage(e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok(LoadedConfig {
            config,
            base,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn resolve_opt(&self, p: &Option<PathBuf>) -> Option<PathBuf> {
        p.as_ref().map(|p| self.resolve(p))
    }

    /// Digest over the resolved config and the content of every input file
    /// it references. Two runs with equal digests produce equal outputs.
    pub fn input_digest(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(self.config.digest().as_bytes());
        let mut paths: Vec<PathBuf> = Vec::new();
        paths.push(self.resolve(&self.config.eval.train));
        paths.push(self.resolve(&self.config.eval.eval));
        for optional in [
            &self.config.eval.schema,
            &self.config.backend.script,
            &self.config.backend.replay,
            &self.config.retrieval.vectors,
            &self.config.retrieval.kg_aliases,
            &self.config.retrieval.kg_triples,
            &self.config.retrieval.guidelines,
        ] {
            if let Some(p) = self.resolve_opt(optional) {
                paths.push(p);
            }
        }
        for path in paths {
            if path.exists() {
                let bytes = std::fs::read(&path)
                    .with_context(|| format!("digesting {}", path.display()))?;
                hasher.update(&bytes);
            }
        }
        Ok(format!("{:x}", hasher.finalize()))
    }
}

/// Datasets and stores loaded per run.
pub struct RunInputs {
    pub schema: Schema,
    pub train: Vec<Sample>,
    pub eval: Vec<Sample>,
    pub guidelines: Vec<GuidelineSnippet>,
    pub kg: Option<KgStore>,
    pub vectors: Option<Arc<dyn VectorSource>>,
    pub warnings: Vec<String>,
}

pub fn load_inputs(loaded: &LoadedConfig) -> Result<RunInputs> {
    let config = &loaded.config;
    let options = LoadOptions {
        mode: LoadMode::Strict,
        schema_sidecar: loaded.resolve_opt(&config.eval.schema),
    };
    let train_path = loaded.resolve(&config.eval.train);
    let train = load_dataset(&train_path, config.eval.format, &options)
        .map_err(|e| usage(e.to_string()))?;
    let eval_path = loaded.resolve(&config.eval.eval);
    let eval = load_dataset(&eval_path, config.eval.format, &options)
        .map_err(|e| usage(e.to_string()))?;

    // One schema for the run: the training schema extended by any relation
    // that only occurs in evaluation gold.
    let mut schema = train.schema.clone();
    for name in eval.schema.names() {
        schema.extend_inferred(name);
    }

    let kg = match (
        loaded.resolve_opt(&config.retrieval.kg_aliases),
        loaded.resolve_opt(&config.retrieval.kg_triples),
    ) {
        (Some(aliases), Some(triples)) => Some(KgStore::from_files(&aliases, &triples)?),
        _ => None,
    };

    let guidelines = match loaded.resolve_opt(&config.retrieval.guidelines) {
        Some(path) => load_guidelines(&path, Some(&schema))?,
        None => Vec::new(),
    };

    let vectors: Option<Arc<dyn VectorSource>> = match loaded.resolve_opt(&config.retrieval.vectors)
    {
        Some(path) => Some(Arc::new(FileVectorSource::load(&path)?)),
        None => None,
    };

    let mut warnings = train.warnings;
    warnings.extend(eval.warnings);
    Ok(RunInputs {
        schema,
        train: train.samples,
        eval: eval.samples,
        guidelines,
        kg,
        vectors,
        warnings,
    })
}

pub fn build_backend(loaded: &LoadedConfig) -> Result<BackendHandle> {
    let config = &loaded.config;
    match config.backend.kind.as_str() {
        "scripted" => {
            let path = loaded
                .resolve_opt(&config.backend.script)
                .expect("validated: script path present");
            Ok(BackendHandle::Scripted(ScriptedBackend::from_file(&path)?))
        }
        "journal" => {
            let path = loaded
                .resolve_opt(&config.backend.replay)
                .expect("validated: replay path present");
            Ok(BackendHandle::Journal(JournalBackend::from_file(&path)?))
        }
        "http" => {
            // Environment variables win over config values.
            let base_url = std::env::var("RELEX_BASE_URL")
                .ok()
                .or_else(|| config.backend.base_url.clone())
                .ok_or_else(|| usage("http backend needs RELEX_BASE_URL or backend.base_url"))?;
            let model = std::env::var("RELEX_MODEL")
                .ok()
                .or_else(|| config.backend.model.clone())
                .ok_or_else(|| usage("http backend needs RELEX_MODEL or backend.model"))?;
            let http = HttpConfig {
                base_url,
                model,
                api_key: std::env::var("RELEX_API_KEY").ok(),
                timeout: std::time::Duration::from_secs(60),
            };
            Ok(BackendHandle::Http(HttpBackend::new(http)?))
        }
        other => Err(usage(format!("unknown backend kind '{other}'"))),
    }
}

/// Build the sample index over `training` per the configured encoder.
pub fn build_training_index(
    config: &RunConfig,
    training: &[Sample],
    vectors: Option<Arc<dyn VectorSource>>,
) -> Result<Option<SampleIndex>> {
    if !config.retrieval.enabled || !config.retrieval.use_samples {
        return Ok(None);
    }
    let index_config = IndexConfig {
        kind: config.retrieval.encoder,
        tokenizer: config.retrieval.tokenizer,
        seed: config.seed,
        bm25_k1: config.retrieval.bm25_k1,
        bm25_b: config.retrieval.bm25_b,
    };
    let source = if config.retrieval.encoder == EncoderKind::Embedding {
        vectors
    } else {
        None
    };
    Ok(Some(build_index(training, &index_config, source)?))
}

/// Assemble a pipeline over a specific training corpus (which several
/// commands vary: subsets for low-resource sweeps, streams for memory
/// curves).
pub fn build_pipeline(
    loaded: &LoadedConfig,
    inputs: &RunInputs,
    training: &[Sample],
    journal_path: Option<&Path>,
) -> Result<Pipeline> {
    let index = build_training_index(&loaded.config, training, inputs.vectors.clone())?;
    let stores = PipelineStores::new(
        inputs.schema.clone(),
        index,
        inputs.guidelines.clone(),
        inputs.kg.clone(),
        training,
    );
    let backend = build_backend(loaded)?;
    let mut gateway = Gateway::new(backend);
    if let Some(path) = journal_path {
        gateway = gateway.with_journal(Arc::new(Journal::create(path)?));
    }
    Ok(Pipeline::new(gateway, stores, &loaded.config)?)
}
