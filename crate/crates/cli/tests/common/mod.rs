//! Shared fixture builders for the CLI integration and acceptance tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use relex_core::corpus::Triple;

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn new() -> Self {
        Fixture {
            dir: tempfile::tempdir().expect("tempdir"),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, name: &str, content: &str) -> PathBuf {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).unwrap();
        }
        std::fs::write(&path, content).unwrap();
        path
    }

    /// Generic-jsonl corpus file.
    pub fn write_corpus(&self, name: &str, samples: &[(&str, Vec<Triple>)]) -> PathBuf {
        let lines: Vec<String> = samples
            .iter()
            .map(|(text, triples)| {
                serde_json::json!({ "text": text, "triples": triples }).to_string()
            })
            .collect();
        self.write(name, &(lines.join("\n") + "\n"))
    }

    /// Scripted-backend rule file; rules are (needle, response) substring
    /// pairs matched first-wins.
    pub fn write_script(&self, name: &str, rules: &[(&str, &str)]) -> PathBuf {
        let lines: Vec<String> = rules
            .iter()
            .map(|(needle, response)| {
                serde_json::json!({
                    "matcher": {"kind": "substring", "value": needle},
                    "response": response,
                })
                .to_string()
            })
            .collect();
        self.write(name, &(lines.join("\n") + "\n"))
    }
}

pub fn t(h: &str, r: &str, tl: &str) -> Triple {
    Triple::new(h, r, tl)
}

/// Serialize triples the way the scripted model should answer.
pub fn gold_json(triples: &[Triple]) -> String {
    serde_json::to_string(triples).unwrap()
}

pub fn run_bin(args: &[&str], cwd: &Path) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_relex"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run relex binary")
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}
