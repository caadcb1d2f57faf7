//! Dataset ingestion. Generic JSONL is the canonical internal format; the
//! other loaders convert into it at read time.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RelationType, Sample, Schema, Triple};
use crate::error::{Error, Result};

/// Supported input formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// One object per line: `{"text": ..., "triples": [{"h","r","t"}, ...]}`.
    GenericJsonl,
    /// One object per line with a `spo_list`; multi-slot objects are
    /// flattened into binary triples named `predicate_slot`.
    DuieJsonl,
    /// One document per line with token lists and document-level span
    /// indices; every sentence becomes one sample.
    SciercJson,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic-jsonl" => Ok(DatasetFormat::GenericJsonl),
            "duie-jsonl" => Ok(DatasetFormat::DuieJsonl),
            "scierc-json" => Ok(DatasetFormat::SciercJson),
            other => Err(Error::Config(format!("unknown dataset format '{other}'"))),
        }
    }
}

/// Strict fails on the first problem; lenient skips malformed records and
/// keeps unknown-relation triples, collecting warnings either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub mode: LoadMode,
    /// Optional schema sidecar; without it the schema is inferred from the
    /// gold triples in first-appearance order.
    pub schema_sidecar: Option<PathBuf>,
}

/// A loaded dataset plus any lenient-mode warnings.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub schema: Schema,
    pub samples: Vec<Sample>,
    pub warnings: Vec<String>,
}

#[derive(Deserialize, Serialize)]
struct GenericRecord {
    text: String,
    #[serde(default)]
    triples: Vec<Triple>,
}

#[derive(Deserialize)]
struct DuieRecord {
    text: String,
    #[serde(default)]
    spo_list: Vec<DuieSpo>,
}

#[derive(Deserialize)]
struct DuieSpo {
    subject: String,
    predicate: String,
    object: serde_json::Value,
}

/// (head_start, head_end, tail_start, tail_end, label) over document tokens.
type SciercRelation = (usize, usize, usize, usize, String);

#[derive(Deserialize)]
struct SciercDoc {
    sentences: Vec<Vec<String>>,
    #[serde(default)]
    relations: Vec<Vec<SciercRelation>>,
}

pub fn load_dataset(path: &Path, format: DatasetFormat, options: &LoadOptions) -> Result<Loaded> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let path_str = path.display().to_string();
    let dataset_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());

    let mut warnings = Vec::new();
    let mut samples = Vec::new();

    match format {
        DatasetFormat::GenericJsonl => {
            for (lineno, line) in nonblank_lines(&raw) {
                match serde_json::from_str::<GenericRecord>(line) {
                    Ok(rec) => samples.push(Sample::new(lineno as u64, rec.text, rec.triples)),
                    Err(e) => handle_malformed(&path_str, lineno, &e.to_string(), options.mode, &mut warnings)?,
                }
            }
        }
        DatasetFormat::DuieJsonl => {
            for (lineno, line) in nonblank_lines(&raw) {
                match serde_json::from_str::<DuieRecord>(line) {
                    Ok(rec) => {
                        let mut gold = Vec::new();
                        for spo in rec.spo_list {
                            flatten_duie_object(&spo, &mut gold);
                        }
                        samples.push(Sample::new(lineno as u64, rec.text, gold));
                    }
                    Err(e) => handle_malformed(&path_str, lineno, &e.to_string(), options.mode, &mut warnings)?,
                }
            }
        }
        DatasetFormat::SciercJson => {
            let mut next_id = 0u64;
            for (lineno, line) in nonblank_lines(&raw) {
                match serde_json::from_str::<SciercDoc>(line) {
                    Ok(doc) => scierc_sentences(&doc, &mut next_id, &mut samples),
                    Err(e) => handle_malformed(&path_str, lineno, &e.to_string(), options.mode, &mut warnings)?,
                }
            }
        }
    }

    // Schema: sidecar when given, else inferred from gold in appearance order.
    let mut schema = match &options.schema_sidecar {
        Some(sidecar) => load_schema_sidecar(sidecar, &dataset_id)?,
        None => Schema::empty(dataset_id.clone()),
    };
    let sidecar_given = options.schema_sidecar.is_some();
    for sample in &samples {
        for triple in &sample.gold {
            if !schema.contains(&triple.relation) {
                if sidecar_given {
                    match options.mode {
                        LoadMode::Strict => {
                            return Err(Error::UnknownRelation {
                                path: path_str,
                                line: sample.id as usize + 1,
                                relation: triple.relation.clone(),
                            })
                        }
                        LoadMode::Lenient => {
                            warnings.push(format!(
                                "{path_str}:{}: relation '{}' not in schema sidecar; kept",
                                sample.id + 1,
                                triple.relation
                            ));
                            schema.extend_inferred(&triple.relation);
                        }
                    }
                } else {
                    schema.extend_inferred(&triple.relation);
                }
            }
        }
    }

    Ok(Loaded {
        schema,
        samples,
        warnings,
    })
}

fn nonblank_lines(raw: &str) -> impl Iterator<Item = (usize, &str)> {
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
}

fn handle_malformed(
    path: &str,
    lineno: usize,
    detail: &str,
    mode: LoadMode,
    warnings: &mut Vec<String>,
) -> Result<()> {
    match mode {
        LoadMode::Strict => Err(Error::MalformedRecord {
            path: path.to_string(),
            line: lineno + 1,
            detail: detail.to_string(),
        }),
        LoadMode::Lenient => {
            warnings.push(format!("{path}:{}: skipped malformed record: {detail}", lineno + 1));
            Ok(())
        }
    }
}

/// Flatten one spo entry. String objects yield a plain triple; object maps
/// yield one triple per slot, with `@value` mapping to the bare predicate and
/// every other slot to `predicate_slot`.
fn flatten_duie_object(spo: &DuieSpo, out: &mut Vec<Triple>) {
    match &spo.object {
        serde_json::Value::String(s) => {
            out.push(Triple::new(spo.subject.clone(), spo.predicate.clone(), s.clone()));
        }
        serde_json::Value::Object(map) => {
            for (slot, value) in map {
                if let serde_json::Value::String(s) = value {
                    let relation = if slot == "@value" {
                        spo.predicate.clone()
                    } else {
                        format!("{}_{}", spo.predicate, slot)
                    };
                    out.push(Triple::new(spo.subject.clone(), relation, s.clone()));
                }
            }
        }
        _ => {}
    }
}

/// SciERC span indices address the flattened document token list.
fn scierc_sentences(doc: &SciercDoc, next_id: &mut u64, out: &mut Vec<Sample>) {
    let flat: Vec<&str> = doc.sentences.iter().flatten().map(|s| s.as_str()).collect();
    let span_text = |start: usize, end: usize| -> String {
        flat.get(start..=end.min(flat.len().saturating_sub(1)))
            .map(|toks| toks.join(" "))
            .unwrap_or_default()
    };
    for (i, toks) in doc.sentences.iter().enumerate() {
        let text = toks.join(" ");
        let mut gold = Vec::new();
        if let Some(rels) = doc.relations.get(i) {
            for (hs, he, ts, te, label) in rels {
                gold.push(Triple::new(span_text(*hs, *he), label.clone(), span_text(*ts, *te)));
            }
        }
        out.push(Sample::new(*next_id, text, gold));
        *next_id += 1;
    }
}

/// Sidecar format: JSON array of `{name, description, head_type, tail_type}`.
pub fn load_schema_sidecar(path: &Path, dataset_id: &str) -> Result<Schema> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let types: Vec<RelationType> = serde_json::from_str(&raw)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    Schema::new(dataset_id, types)
}

pub fn write_schema_sidecar(schema: &Schema, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(schema.relation_types())
        .map_err(|e| Error::Schema(e.to_string()))?;
    fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Serialize samples to the canonical generic-jsonl form. Reloading a file
/// written this way yields identical samples.
pub fn write_generic_jsonl(samples: &[Sample], path: &Path) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    for sample in samples {
        let rec = GenericRecord {
            text: sample.text.clone(),
            triples: sample.gold.clone(),
        };
        let line = serde_json::to_string(&rec).map_err(|e| Error::Export(e.to_string()))?;
        writeln!(file, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}
